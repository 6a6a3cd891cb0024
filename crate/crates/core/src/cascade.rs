//! Exact evolution of Bell-pair-count distributions through a nested,
//! multiplexed repeater chain.
//!
//! A chain of `N = 2ⁿ` elementary links makes `M` generation attempts per
//! link and burst. At level `i` every segment holds `Y_i` pairs. An optional
//! distillation pass pairs them up (`⌊Y_i/2⌋` attempts, each succeeding with
//! probability `d_i`), and adjacent segments are then joined by swapping,
//! which keeps `min(left, right)` pairs. A segment with fewer than `R₀` pairs
//! resets the burst.
//!
//! Two tracks are kept per level. The unconditional track (`p`, `q`) ignores
//! resets. The conditional track (`p′`, `q′`) conditions on survival and yields
//! the per-level reset probabilities `r_i`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const MASS_TOL: f64 = 1e-10;

/// Probability mass function over pair counts `k = 0..=K_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCountDistribution {
    probs: Vec<f64>,
}

impl PairCountDistribution {
    /// Validating constructor: non-negative entries of unit total mass.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("empty pair-count distribution".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Domain(format!("invalid probability {p}")));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!("distribution mass {mass} differs from 1")));
        }
        Ok(Self { probs })
    }

    pub fn delta(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn pmf(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    /// Largest representable count.
    pub fn max_count(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// `P(K ≥ k)`.
    pub fn tail(&self, k: usize) -> f64 {
        self.probs.iter().skip(k).sum()
    }

    /// Expectation of `g(K)`.
    pub fn expect(&self, g: impl Fn(usize) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| p * g(k)).sum()
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        let n = self.probs.len().max(other.probs.len());
        0.5 * (0..n).map(|k| (self.pmf(k) - other.pmf(k)).abs()).sum::<f64>()
    }
}

/// Binomial pmf over `0..=n`, built by the ratio recurrence outward from the
/// mode and normalized by its sum, so that `n` up to `2¹⁶` neither overflows
/// nor accumulates the cancellation error of log-factorial differences.
pub(crate) fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if p <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if p >= 1.0 {
        out[n] = 1.0;
        return out;
    }
    let odds = p / (1.0 - p);
    let mode = (((n + 1) as f64 * p).floor() as usize).min(n);
    out[mode] = 1.0;
    for k in mode..n {
        out[k + 1] = out[k] * odds * (n - k) as f64 / (k + 1) as f64;
        if out[k + 1] < 1e-300 {
            break;
        }
    }
    for k in (1..=mode).rev() {
        out[k - 1] = out[k] / odds * k as f64 / (n - k + 1) as f64;
        if out[k - 1] < 1e-300 {
            break;
        }
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    out
}

/// Pair counts after one generation burst on a single link: `Binomial(M, π₀)`.
pub fn generation_distribution(m: usize, pi0: f64) -> Result<PairCountDistribution> {
    if m == 0 {
        return Err(Error::Domain("multiplexing width must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&pi0) {
        return Err(Error::Domain(format!("success probability {pi0} outside [0, 1]")));
    }
    Ok(PairCountDistribution { probs: binomial_pmf(m, pi0) })
}

/// One distillation pass: `⌊j/2⌋` attempts succeeding independently with
/// probability `d`, support truncated to `0..=cap`. With `distill == false`
/// the input passes through unchanged.
pub fn distillation_thinning(
    dist: &PairCountDistribution,
    distill: bool,
    d: f64,
    cap: usize,
) -> PairCountDistribution {
    if !distill {
        return dist.clone();
    }
    let mut out = vec![0.0; cap + 1];
    let mut cached: Option<(usize, Vec<f64>)> = None;
    for (j, &pj) in dist.probs.iter().enumerate() {
        if pj == 0.0 {
            continue;
        }
        let attempts = j / 2;
        if cached.as_ref().map(|c| c.0) != Some(attempts) {
            cached = Some((attempts, binomial_pmf(attempts, d)));
        }
        let pmf = &cached.as_ref().expect("cache populated").1;
        for (k, b) in pmf.iter().enumerate().take(cap + 1) {
            out[k] += pj * b;
        }
    }
    PairCountDistribution { probs: out }
}

/// Distribution of `min(K₁, K₂)` for two independent copies of `dist`.
pub fn pair_minimum(dist: &PairCountDistribution) -> PairCountDistribution {
    let q = &dist.probs;
    let mut out = vec![0.0; q.len()];
    let mut above = 0.0;
    for k in (0..q.len()).rev() {
        out[k] = q[k] * q[k] + 2.0 * q[k] * above;
        above += q[k];
    }
    PairCountDistribution { probs: out }
}

/// Keep the mass at `k ≥ threshold` and rescale it to unit total.
fn condition_on_survival(raw: &[f64], threshold: usize, survival: f64) -> PairCountDistribution {
    let probs = raw
        .iter()
        .enumerate()
        .map(|(k, p)| if k >= threshold { p / survival } else { 0.0 })
        .collect();
    PairCountDistribution { probs }
}

/// Level-0 reset probability `r₀ = P(Binomial(M, π₀) < R₀)` and the
/// generation distribution conditioned on no reset.
pub fn conditional_init(m: usize, pi0: f64, r0: usize) -> Result<(f64, PairCountDistribution)> {
    if r0 == 0 {
        return Err(Error::Domain("reset threshold must be at least 1".into()));
    }
    let gen = generation_distribution(m, pi0)?;
    let survival = gen.tail(r0);
    if survival <= 0.0 {
        return Err(Error::CertainReset { level: 0 });
    }
    Ok((1.0 - survival, condition_on_survival(&gen.probs, r0, survival)))
}

/// How the reset probability at levels `i ≥ 1` is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResetAccounting {
    /// `r_i = P(min(q′_{i−1}, q′_{i−1}) < R₀)`: every pairing that leaves too
    /// few pairs resets, whatever the distillation flags.
    #[default]
    Exact,
    /// The textbook closed form `r_i = (q′₀)² + 2q′₀ Σ_{j≥2} q′_j`, applied only
    /// when `D_i = 1`. It leaves out the `(0, 1)` pairing, and it misses
    /// zero-pair segments produced by distillation at the previous level when
    /// `D_i = 0`.
    Verbatim,
}

/// Outcome of one conditional level step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelUpdate {
    /// Reset probability used for the chain under the chosen accounting.
    pub r: f64,
    /// `1 − r`, summed directly so it keeps precision when tiny.
    pub survival: f64,
    /// Closed-form reset probability (see [`ResetAccounting::Verbatim`]).
    pub r_verbatim: f64,
    /// `1 − r_verbatim − Σ_{k≥R₀} P(min = k)`: mass left out by the closed form.
    pub mass_defect: f64,
    /// Conditional pair distribution `p′_i`, renormalized to unit mass.
    pub p_cond: PairCountDistribution,
}

/// Swap step from level `i−1` to `i` on the conditional track.
///
/// `q_prev` is `q′_{i−1}`; `distill` is the flag `D_i` of the target level,
/// which only the verbatim closed form consults. The returned `p′_i` is
/// always renormalized, so it equals the distribution of surviving counts.
pub fn conditional_level_update(
    q_prev: &PairCountDistribution,
    distill: bool,
    reset_threshold: usize,
    accounting: ResetAccounting,
    level: usize,
) -> Result<LevelUpdate> {
    let q = &q_prev.probs;
    let raw = pair_minimum(q_prev);
    let r_verbatim = if distill {
        let q0 = q[0];
        let from_two: f64 = q.iter().skip(2).sum();
        q0 * q0 + 2.0 * q0 * from_two
    } else {
        0.0
    };
    let survival = raw.tail(reset_threshold);
    let mass_defect = 1.0 - r_verbatim - survival;
    if survival <= 0.0 {
        return Err(Error::CertainReset { level });
    }
    let (r, pass) = match accounting {
        ResetAccounting::Exact => (1.0 - survival, survival),
        ResetAccounting::Verbatim => (r_verbatim, 1.0 - r_verbatim),
    };
    if pass <= 0.0 {
        return Err(Error::CertainReset { level });
    }
    let p_cond = condition_on_survival(&raw.probs, reset_threshold, survival);
    Ok(LevelUpdate { r, survival: pass, r_verbatim, mass_defect, p_cond })
}

/// Per-level burst reset probabilities `f_i` and the completion probability
/// `Π_i (1 − r_i)^{N/2^i}` for a chain of `n_links = N` links.
pub fn reset_probability_f(r: &[f64], n_links: usize) -> (Vec<f64>, f64) {
    let survival: Vec<f64> = r.iter().map(|r| 1.0 - r).collect();
    reset_profile(&survival, n_links)
}

/// As [`reset_probability_f`], from per-segment survival probabilities, which
/// keeps full relative precision when survival is tiny.
fn reset_profile(survival: &[f64], n_links: usize) -> (Vec<f64>, f64) {
    let mut reached = 1.0;
    let mut f = Vec::with_capacity(survival.len());
    for (i, s) in survival.iter().enumerate() {
        let segments = (n_links >> i).max(1) as f64;
        let log_pass = segments * s.clamp(0.0, 1.0).ln();
        let fail = -log_pass.exp_m1();
        f.push(reached * fail);
        reached *= log_pass.exp();
    }
    (f, reached)
}

/// Inputs to the full recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    /// Nesting depth; the chain has `2ⁿ` elementary links.
    pub n: usize,
    /// Multiplexed channels per link and burst.
    pub m: usize,
    /// Elementary generation success probability per channel.
    pub pi0: f64,
    /// Distillation success probabilities, one per level `0..=n`.
    pub d: Vec<f64>,
    /// Distillation decisions, one per level `0..=n`; the top level never distills.
    pub distill: Vec<bool>,
    /// Reset when a segment holds fewer pairs than this.
    #[serde(default = "default_reset_threshold")]
    pub reset_threshold: usize,
    #[serde(default)]
    pub accounting: ResetAccounting,
}

fn default_reset_threshold() -> usize {
    1
}

impl CascadeConfig {
    /// Configuration without any distillation.
    pub fn plain(n: usize, m: usize, pi0: f64) -> Self {
        Self {
            n,
            m,
            pi0,
            d: vec![1.0; n + 1],
            distill: vec![false; n + 1],
            reset_threshold: 1,
            accounting: ResetAccounting::Exact,
        }
    }

    /// Configuration with the given per-level flags and success probabilities.
    /// The top-level flag is cleared.
    pub fn with_distillation(n: usize, m: usize, pi0: f64, distill: Vec<bool>, d: Vec<f64>) -> Self {
        let mut distill = distill;
        if let Some(top) = distill.get_mut(n) {
            *top = false;
        }
        Self { n, m, pi0, d, distill, reset_threshold: 1, accounting: ResetAccounting::Exact }
    }

    pub fn n_links(&self) -> usize {
        1 << self.n
    }

    /// Channel capacity `M_i = ⌊M / 2^{Σ_{j<i} D_j}⌋` of each level.
    pub fn capacities(&self) -> Vec<usize> {
        let mut caps = Vec::with_capacity(self.n + 1);
        let mut halvings = 0;
        for i in 0..=self.n {
            caps.push(self.m >> halvings);
            if self.distill[i] {
                halvings += 1;
            }
        }
        caps
    }

    pub fn validate(&self) -> Result<()> {
        if self.n > 16 {
            return Err(Error::Config(format!("nesting depth {} exceeds 16", self.n)));
        }
        if self.m == 0 {
            return Err(Error::Config("multiplexing width must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.pi0) {
            return Err(Error::Config(format!("success probability {} outside [0, 1]", self.pi0)));
        }
        if self.d.len() != self.n + 1 || self.distill.len() != self.n + 1 {
            return Err(Error::Config(format!(
                "expected {} per-level entries, got d: {}, D: {}",
                self.n + 1,
                self.d.len(),
                self.distill.len()
            )));
        }
        if let Some(d) = self.d.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(Error::Config(format!("distillation probability {d} outside [0, 1]")));
        }
        if self.distill[self.n] {
            return Err(Error::Config("the top level cannot distill".into()));
        }
        if self.reset_threshold == 0 {
            return Err(Error::Config("reset threshold must be at least 1".into()));
        }
        let halvings = self.distill.iter().filter(|x| **x).count();
        if self.m >> halvings == 0 {
            return Err(Error::Config(format!(
                "M = {} cannot feed {halvings} distillation levels",
                self.m
            )));
        }
        Ok(())
    }
}

/// Distributions of one nesting level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDistributions {
    /// Channel capacity `M_i`.
    pub capacity: usize,
    /// Unconditional pair counts entering the level.
    pub p: PairCountDistribution,
    /// Unconditional pair counts after the optional distillation.
    pub q: PairCountDistribution,
    /// Pair counts entering the level, conditioned on no reset so far.
    pub p_cond: PairCountDistribution,
    /// Conditional pair counts after the optional distillation.
    pub q_cond: PairCountDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub levels: Vec<LevelDistributions>,
    /// Conditional per-segment reset probabilities `r_i`.
    pub r: Vec<f64>,
    /// Closed-form `r_i` (equal to `r_0` at level 0).
    pub r_verbatim: Vec<f64>,
    /// Burst reset probability attributed to each level.
    pub f: Vec<f64>,
    pub completion_prob: f64,
    pub expected_end_pairs: f64,
    /// Normalization gap of the closed-form reset count, per level.
    pub mass_defect: Vec<f64>,
}

impl CascadeReport {
    /// End-to-end pair distribution given completion.
    pub fn end_distribution(&self) -> &PairCountDistribution {
        &self.levels.last().expect("at least one level").p_cond
    }

    /// Probability that a burst reaches level `i` without reset.
    pub fn survival_to(&self, i: usize) -> f64 {
        1.0 - self.f.iter().take(i).sum::<f64>()
    }

    pub fn max_mass_defect(&self) -> f64 {
        self.mass_defect.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Run the full recursion over levels `0..=n`.
pub fn run_cascade(config: &CascadeConfig) -> Result<CascadeReport> {
    config.validate()?;
    let caps = config.capacities();
    let threshold = config.reset_threshold;

    let p0 = generation_distribution(config.m, config.pi0)?;
    let (r0, p0_cond) = conditional_init(config.m, config.pi0, threshold)?;
    let mut survival = vec![p0.tail(threshold)];
    let mut r = vec![r0];
    let mut r_verbatim = vec![r0];
    let mut mass_defect = vec![0.0];

    let thin = |dist: &PairCountDistribution, i: usize| {
        distillation_thinning(dist, config.distill[i], config.d[i], caps[i] / 2)
    };
    let q0 = thin(&p0, 0);
    let q0_cond = thin(&p0_cond, 0);
    let mut levels = vec![LevelDistributions { capacity: caps[0], p: p0, q: q0, p_cond: p0_cond, q_cond: q0_cond }];

    for i in 1..=config.n {
        let prev = levels.last().expect("level 0 present");
        let p = pair_minimum(&prev.q);
        let update = conditional_level_update(&prev.q_cond, config.distill[i], threshold, config.accounting, i)?;
        survival.push(update.survival);
        r.push(update.r);
        r_verbatim.push(update.r_verbatim);
        mass_defect.push(update.mass_defect);
        let q = thin(&p, i);
        let q_cond = thin(&update.p_cond, i);
        levels.push(LevelDistributions { capacity: caps[i], p, q, p_cond: update.p_cond, q_cond });
    }

    let (f, completion_prob) = reset_profile(&survival, config.n_links());
    let expected_end_pairs = completion_prob * levels.last().expect("levels").p_cond.mean();
    Ok(CascadeReport { levels, r, r_verbatim, f, completion_prob, expected_end_pairs, mass_defect })
}
