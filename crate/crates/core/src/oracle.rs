//! Independent reference implementations for validation.
//!
//! * [`mc_cascade`] samples bursts directly: binomial generation on every
//!   link, per-pair Bernoulli distillation, min-pairing by swaps and resets on
//!   the `R₀` rule. Random numbers come from ChaCha8 (a counter-based stream
//!   cipher); chunk `c` of a run with seed `s` uses the generator seeded with
//!   `s` on stream `c`, so results do not depend on how chunks are scheduled.
//! * [`dm_two_pair`] realizes the ideal swap and DEJMPS maps on a dense
//!   16-dimensional density matrix of two Bell pairs.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::CascadeConfig;
use crate::protocol::{build_schedule, cascade_config, ProtocolConfig};
use crate::states::{key_fraction, BellDiagonal};
use crate::channel::select_wavelength;
use crate::{Error, Result};

/// Trials per independently seeded chunk.
pub const CHUNK: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub trials: u64,
    pub seed: u64,
}

impl MonteCarloConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self { trials, seed }
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    fn from_sums(sum: f64, sum_sq: f64, n: u64) -> Self {
        let n = n as f64;
        let mean = sum / n;
        let var = ((sum_sq / n) - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        Estimate { mean, std_err: (var / n).sqrt() }
    }

    /// `|x − mean|` in units of the standard error (∞ when the error is zero
    /// and the values differ).
    pub fn z_score(&self, x: f64) -> f64 {
        let diff = (x - self.mean).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_err
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCascadeResult {
    pub trials: u64,
    pub completed: u64,
    /// Histogram of end-to-end pair counts in completed bursts.
    pub end_histogram: Vec<u64>,
    pub completion_prob: Estimate,
    /// End pairs per burst, zero for reset bursts.
    pub end_pairs: Estimate,
    pub swaps: Estimate,
    pub distillations: Estimate,
}

impl McCascadeResult {
    /// Empirical end-pair distribution conditioned on completion.
    pub fn end_pmf(&self) -> Vec<f64> {
        let c = self.completed.max(1) as f64;
        self.end_histogram.iter().map(|h| *h as f64 / c).collect()
    }

    /// Total-variation distance between the empirical end distribution and `pmf`.
    pub fn total_variation(&self, pmf: &[f64]) -> f64 {
        let emp = self.end_pmf();
        let n = emp.len().max(pmf.len());
        let at = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
        0.5 * (0..n).map(|k| (at(&emp, k) - at(pmf, k)).abs()).sum::<f64>()
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    completed: u64,
    hist: Vec<u64>,
    pairs: [f64; 2],
    swaps: [f64; 2],
    distills: [f64; 2],
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.completed += other.completed;
        if self.hist.len() < other.hist.len() {
            self.hist.resize(other.hist.len(), 0);
        }
        for (a, b) in self.hist.iter_mut().zip(&other.hist) {
            *a += b;
        }
        for (a, b) in [(&mut self.pairs, other.pairs), (&mut self.swaps, other.swaps), (&mut self.distills, other.distills)] {
            a[0] += b[0];
            a[1] += b[1];
        }
        self
    }
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("valid binomial parameters").sample(rng)
    }
}

/// One burst: returns `(end pairs or None on reset, swaps, distillation attempts)`.
fn simulate_burst(cfg: &CascadeConfig, rng: &mut ChaCha8Rng, counts: &mut Vec<u64>) -> (Option<u64>, u64, u64) {
    let r0 = cfg.reset_threshold as u64;
    counts.clear();
    counts.extend((0..cfg.n_links()).map(|_| binomial(rng, cfg.m as u64, cfg.pi0)));
    let (mut swaps, mut distills) = (0u64, 0u64);
    for level in 0..=cfg.n {
        if counts.iter().any(|k| *k < r0) {
            return (None, swaps, distills);
        }
        if cfg.distill[level] {
            for k in counts.iter_mut() {
                let attempts = *k / 2;
                distills += attempts;
                *k = binomial(rng, attempts, cfg.d[level]);
            }
        }
        if level < cfg.n {
            let next: Vec<u64> = counts.chunks(2).map(|p| p[0].min(p[1])).collect();
            swaps += next.iter().sum::<u64>();
            *counts = next;
        }
    }
    (Some(counts[0]), swaps, distills)
}

fn run_chunk(cfg: &CascadeConfig, seed: u64, chunk: u64, trials: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let mut t = Tally { hist: vec![0; cfg.m + 1], ..Tally::default() };
    let mut counts = Vec::with_capacity(cfg.n_links());
    for _ in 0..trials {
        let (end, swaps, distills) = simulate_burst(cfg, &mut rng, &mut counts);
        let pairs = end.unwrap_or(0) as f64;
        if let Some(k) = end {
            t.completed += 1;
            t.hist[k as usize] += 1;
        }
        t.pairs[0] += pairs;
        t.pairs[1] += pairs * pairs;
        t.swaps[0] += swaps as f64;
        t.swaps[1] += (swaps * swaps) as f64;
        t.distills[0] += distills as f64;
        t.distills[1] += (distills * distills) as f64;
    }
    t
}

/// Direct burst simulation of the count dynamics described by `cfg`.
pub fn mc_cascade(cfg: &CascadeConfig, mc: &MonteCarloConfig) -> Result<McCascadeResult> {
    cfg.validate()?;
    if mc.trials < 2 {
        return Err(Error::Config("at least two trials are required".into()));
    }
    let chunks = mc.trials.div_ceil(CHUNK);
    let tallies: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| run_chunk(cfg, mc.seed, c, CHUNK.min(mc.trials - c * CHUNK)))
        .collect();
    // sequential merge keeps floating-point sums independent of scheduling
    let t = tallies.into_iter().fold(Tally::default(), Tally::merge);
    let n = mc.trials;
    let c = t.completed as f64;
    Ok(McCascadeResult {
        trials: n,
        completed: t.completed,
        end_histogram: t.hist,
        completion_prob: Estimate::from_sums(c, c, n),
        end_pairs: Estimate::from_sums(t.pairs[0], t.pairs[1], n),
        swaps: Estimate::from_sums(t.swaps[0], t.swaps[1], n),
        distillations: Estimate::from_sums(t.distills[0], t.distills[1], n),
    })
}

/// Monte-Carlo estimate of the secret-key rate per channel use, using the
/// same schedule and end state as the analytic evaluation.
pub fn mc_skr(config: &ProtocolConfig, mc: &MonteCarloConfig) -> Result<(Estimate, McCascadeResult)> {
    let (_, pi0) = select_wavelength(&config.medium, &config.budget)?;
    let trace = build_schedule(config)?;
    let res = mc_cascade(&cascade_config(config, &trace, pi0), mc)?;
    let scale = key_fraction(&trace.end_state()) / config.m as f64;
    let skr = Estimate { mean: res.end_pairs.mean * scale, std_err: res.end_pairs.std_err * scale };
    Ok((skr, res))
}

/// Ideal two-pair map realized on the density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwoPairMap {
    Swap,
    Dejmps,
}

const DIM: usize = 16;
type Matrix = Vec<Complex64>;

fn zeros(n: usize) -> Matrix {
    vec![Complex64::new(0.0, 0.0); n * n]
}

fn matmul(a: &Matrix, b: &Matrix, n: usize) -> Matrix {
    let mut out = zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

fn dagger(a: &Matrix, n: usize) -> Matrix {
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = a[i * n + j].conj();
        }
    }
    out
}

fn kron(a: &Matrix, na: usize, b: &Matrix, nb: usize) -> Matrix {
    let n = na * nb;
    let mut out = zeros(n);
    for i in 0..na {
        for j in 0..na {
            for k in 0..nb {
                for l in 0..nb {
                    out[(i * nb + k) * n + j * nb + l] = a[i * na + j] * b[k * nb + l];
                }
            }
        }
    }
    out
}

fn conjugate(u: &Matrix, rho: &Matrix) -> Matrix {
    matmul(&matmul(u, rho, DIM), &dagger(u, DIM), DIM)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn identity2() -> Matrix {
    vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]
}

fn pauli_x() -> Matrix {
    vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]
}

fn pauli_z() -> Matrix {
    vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]
}

/// Single-qubit operators on qubits `0..4` (qubit 0 most significant).
fn on_qubits(ops: [Matrix; 4]) -> Matrix {
    let [a, b, c2, d] = ops;
    kron(&kron(&kron(&a, 2, &b, 2), 4, &c2, 2), 8, &d, 2)
}

/// Bell vector with Pauli label `(x, z)`: `(I ⊗ XˣZᶻ)|φ+⟩`, basis `|00⟩..|11⟩`.
fn bell_vector(label: usize) -> [f64; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match label {
        0 => [h, 0.0, 0.0, h],
        1 => [h, 0.0, 0.0, -h],
        2 => [0.0, h, h, 0.0],
        _ => [0.0, h, -h, 0.0],
    }
}

fn bell_diagonal_matrix(s: &BellDiagonal) -> Matrix {
    let mut rho = zeros(4);
    for (label, w) in s.to_array().iter().enumerate() {
        let v = bell_vector(label);
        for i in 0..4 {
            for j in 0..4 {
                rho[i * 4 + j] += c(w * v[i] * v[j], 0.0);
            }
        }
    }
    rho
}

/// Reduced 4×4 state on qubits `(keep.0, keep.1)`, keeping only basis states
/// of the traced qubits accepted by `select`.
fn reduce(rho: &Matrix, keep: (usize, usize), select: impl Fn(usize) -> bool) -> Matrix {
    let bit = |idx: usize, q: usize| (idx >> (3 - q)) & 1;
    let traced: Vec<usize> = (0..4).filter(|q| *q != keep.0 && *q != keep.1).collect();
    let mut out = zeros(4);
    for i in 0..DIM {
        for j in 0..DIM {
            if traced.iter().any(|q| bit(i, *q) != bit(j, *q)) || !select(i) {
                continue;
            }
            let ri = bit(i, keep.0) * 2 + bit(i, keep.1);
            let rj = bit(j, keep.0) * 2 + bit(j, keep.1);
            out[ri * 4 + rj] += rho[i * DIM + j];
        }
    }
    out
}

fn trace4(rho: &Matrix) -> f64 {
    (0..4).map(|i| rho[i * 4 + i].re).sum()
}

/// Bell coefficients of a 4×4 state, and the largest off-diagonal Bell-basis
/// element (zero for Bell-diagonal states).
fn bell_coefficients(rho: &Matrix) -> ([f64; 4], f64) {
    let vecs: Vec<[f64; 4]> = (0..4).map(bell_vector).collect();
    let element = |a: &[f64; 4], b: &[f64; 4]| {
        let mut s = c(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                s += rho[i * 4 + j] * a[i] * b[j];
            }
        }
        s
    };
    let mut diag = [0.0; 4];
    let mut off: f64 = 0.0;
    for g in 0..4 {
        for h in 0..4 {
            let e = element(&vecs[g], &vecs[h]);
            if g == h {
                diag[g] = e.re;
            } else {
                off = off.max(e.norm());
            }
        }
    }
    (diag, off)
}

fn cnot(control: usize, target: usize) -> Matrix {
    let mut u = zeros(DIM);
    for i in 0..DIM {
        let cbit = (i >> (3 - control)) & 1;
        let j = if cbit == 1 { i ^ (1 << (3 - target)) } else { i };
        u[j * DIM + i] = c(1.0, 0.0);
    }
    u
}

/// Apply an ideal two-pair map to `s1` (qubits A1 B1) and `s2` (qubits A2 B2).
///
/// Swap: Bell measurement of B1 A2, Pauli correction on B2, output pair A1 B2,
/// success probability 1. DEJMPS: `(I − iX)/√2` on Alice's qubits,
/// `(I + iX)/√2` on Bob's, bilateral CNOT from pair 1 onto pair 2, and
/// postselection on equal Z outcomes of A2 and B2.
pub fn dm_two_pair(map: TwoPairMap, s1: &BellDiagonal, s2: &BellDiagonal) -> Result<(BellDiagonal, f64)> {
    s1.validate()?;
    s2.validate()?;
    let rho = kron(&bell_diagonal_matrix(s1), 4, &bell_diagonal_matrix(s2), 4);
    let (state, prob) = match map {
        TwoPairMap::Swap => {
            let mut out = zeros(4);
            for outcome in 0..4 {
                let v = bell_vector(outcome);
                // projector |β⟩⟨β| on qubits 1, 2
                let mut proj = zeros(4);
                for i in 0..4 {
                    for j in 0..4 {
                        proj[i * 4 + j] = c(v[i] * v[j], 0.0);
                    }
                }
                let full = kron(&kron(&identity2(), 2, &proj, 4), 8, &identity2(), 2);
                let projected = matmul(&matmul(&full, &rho, DIM), &full, DIM);
                let correction = {
                    let x = if outcome & 2 != 0 { pauli_x() } else { identity2() };
                    let z = if outcome & 1 != 0 { pauli_z() } else { identity2() };
                    matmul(&z, &x, 2)
                };
                let corrected = conjugate(&on_qubits([identity2(), identity2(), identity2(), correction]), &projected);
                let part = reduce(&corrected, (0, 3), |_| true);
                for (o, p) in out.iter_mut().zip(part) {
                    *o += p;
                }
            }
            (out, 1.0)
        }
        TwoPairMap::Dejmps => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let alice = vec![c(h, 0.0), c(0.0, -h), c(0.0, -h), c(h, 0.0)];
            let bob = vec![c(h, 0.0), c(0.0, h), c(0.0, h), c(h, 0.0)];
            let rot = on_qubits([alice.clone(), bob.clone(), alice, bob]);
            let rotated = conjugate(&rot, &rho);
            let entangled = conjugate(&cnot(1, 3), &conjugate(&cnot(0, 2), &rotated));
            let equal = |i: usize| ((i >> 1) & 1) == (i & 1);
            let kept = reduce(&entangled, (0, 1), equal);
            let p = trace4(&kept);
            if p <= 0.0 {
                return Err(Error::DegenerateInput);
            }
            (kept.iter().map(|x| x / p).collect(), p)
        }
    };
    let (coeffs, off) = bell_coefficients(&state);
    if off > 1e-12 {
        return Err(Error::Numeric(format!("output is not Bell diagonal (off-diagonal {off:e})")));
    }
    Ok((BellDiagonal::from_array(coeffs), prob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::run_cascade;
    use crate::states::{dejmps_ideal, swap_ideal};
    use rand::Rng;

    fn random_state(rng: &mut ChaCha8Rng) -> BellDiagonal {
        let w: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
        let s: f64 = w.iter().sum();
        BellDiagonal::from_array(w.map(|x| x / s))
    }

    fn max_dev(x: &BellDiagonal, y: &BellDiagonal) -> f64 {
        x.to_array().iter().zip(y.to_array()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn perfect_swap() {
        let (s, p) = dm_two_pair(TwoPairMap::Swap, &BellDiagonal::PERFECT, &BellDiagonal::PERFECT).unwrap();
        assert!(max_dev(&s, &BellDiagonal::PERFECT) < 1e-13);
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dejmps_on_werner() {
        let w = BellDiagonal::werner(0.9).unwrap();
        let (s, p) = dm_two_pair(TwoPairMap::Dejmps, &w, &w).unwrap();
        let closed = dejmps_ideal(&w, &w).unwrap();
        assert!(max_dev(&s, &closed.state) < 1e-12);
        assert!((p - closed.success_prob).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (a, b) = (random_state(&mut rng), random_state(&mut rng));
            let (s, _) = dm_two_pair(TwoPairMap::Swap, &a, &b).unwrap();
            assert!(max_dev(&s, &swap_ideal(&a, &b)) < 1e-12);
            let (d, p) = dm_two_pair(TwoPairMap::Dejmps, &a, &b).unwrap();
            let closed = dejmps_ideal(&a, &b).unwrap();
            assert!(max_dev(&d, &closed.state) < 1e-12);
            assert!((p - closed.success_prob).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_chain_has_zero_variance() {
        let cfg = CascadeConfig::with_distillation(2, 8, 1.0, vec![true, false, false], vec![1.0; 3]);
        let mc = mc_cascade(&cfg, &MonteCarloConfig::new(1000, 3)).unwrap();
        let exact = run_cascade(&cfg).unwrap();
        assert_eq!(mc.completion_prob.mean, 1.0);
        assert_eq!(mc.end_pairs.mean, exact.expected_end_pairs);
        assert_eq!(mc.end_pairs.std_err, 0.0);
        assert_eq!(mc.swaps.mean, 12.0);
        assert_eq!(mc.distillations.mean, 16.0);
    }

    #[test]
    fn seeding_contract() {
        let cfg = CascadeConfig::plain(2, 16, 0.3);
        let a = mc_cascade(&cfg, &MonteCarloConfig::new(40_000, 1)).unwrap();
        let a2 = mc_cascade(&cfg, &MonteCarloConfig::new(40_000, 1)).unwrap();
        let b = mc_cascade(&cfg, &MonteCarloConfig::new(40_000, 2)).unwrap();
        assert_eq!(a, a2);
        assert_ne!(a.end_histogram, b.end_histogram);
        let gap = (a.end_pairs.mean - b.end_pairs.mean).abs();
        assert!(gap < 5.0 * (a.end_pairs.std_err.hypot(b.end_pairs.std_err)));
    }

    #[test]
    fn chunking_is_schedule_independent() {
        let cfg = CascadeConfig::plain(1, 4, 0.5);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let dual = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let mc = MonteCarloConfig::new(3 * CHUNK + 17, 11);
        let a = single.install(|| mc_cascade(&cfg, &mc)).unwrap();
        let b = dual.install(|| mc_cascade(&cfg, &mc)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_run_agrees_with_recursion() {
        let cfg = CascadeConfig::with_distillation(2, 6, 0.4, vec![true, false, false], vec![0.8, 1.0, 1.0]);
        let exact = run_cascade(&cfg).unwrap();
        let mc = mc_cascade(&cfg, &MonteCarloConfig::new(200_000, 5)).unwrap();
        assert!(mc.completion_prob.z_score(exact.completion_prob) < 4.0);
        assert!(mc.total_variation(exact.end_distribution().probs()) < 0.01);
    }
}
