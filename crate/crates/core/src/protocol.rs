//! Static per-level schedule of a nested repeater chain and its end-to-end
//! performance for one configuration.
//!
//! The schedule is computed once on representative (mean) states. Per level:
//! wait for classical confirmation (dephasing), distill if the fidelity is
//! below the threshold and the channel capacity allows it, then swap up to
//! the next level. The resulting flags and DEJMPS success probabilities feed
//! the count recursion in [`crate::cascade`].

use serde::{Deserialize, Serialize};

use crate::cascade::{run_cascade, CascadeConfig, CascadeReport, ResetAccounting};
use crate::channel::{select_wavelength, LinkBudget, MediumProfile};
use crate::metrics::{ops_per_burst, CostModel, OpCounts};
use crate::states::{apply_dephasing, dejmps, initial_state, key_fraction, swap, BellDiagonal, NoiseParams};
use crate::{Error, Result};

pub const DEFAULT_FIDELITY_THRESHOLD: f64 = 0.95;

/// Storage time model for the dephasing applied at each level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaitPolicy {
    /// Heralding takes `l0/v`; confirming a level-`i` swap takes `2^i·l0/v`.
    #[default]
    Doubling,
    /// No storage time at all.
    Instant,
}

/// Storage time in seconds before operations at `level`, for spacing `l0`
/// in km and signal velocity in km/s.
pub fn wait_time(level: usize, l0: f64, velocity: f64) -> f64 {
    let hop = l0 / velocity;
    if level == 0 {
        hop
    } else {
        hop * (1u64 << level.min(63)) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub medium: MediumProfile,
    pub budget: LinkBudget,
    pub noise: NoiseParams,
    /// Nesting depth; `2ⁿ` elementary links of length `budget.l0`.
    pub n: usize,
    /// Multiplexed channels per link and burst.
    pub m: usize,
    #[serde(default = "default_threshold")]
    pub f_th: f64,
    #[serde(default)]
    pub wait: WaitPolicy,
    #[serde(default)]
    pub cost: CostModel,
}

fn default_threshold() -> f64 {
    DEFAULT_FIDELITY_THRESHOLD
}

impl ProtocolConfig {
    pub fn new(medium: MediumProfile, budget: LinkBudget, noise: NoiseParams, n: usize, m: usize) -> Self {
        Self {
            medium,
            budget,
            noise,
            n,
            m,
            f_th: DEFAULT_FIDELITY_THRESHOLD,
            wait: WaitPolicy::Doubling,
            cost: CostModel::default(),
        }
    }

    pub fn n_links(&self) -> usize {
        1 << self.n
    }

    pub fn total_distance(&self) -> f64 {
        self.budget.l0 * self.n_links() as f64
    }

    pub fn validate(&self) -> Result<()> {
        self.medium.validate()?;
        self.budget.validate()?;
        self.noise.validate()?;
        if !(0.0..=1.0).contains(&self.f_th) {
            return Err(Error::Config(format!("f_th = {} outside [0, 1]", self.f_th)));
        }
        if self.n > 16 {
            return Err(Error::Config(format!("nesting depth {} exceeds 16", self.n)));
        }
        if self.m == 0 {
            return Err(Error::Config("multiplexing width must be at least 1".into()));
        }
        self.cost.validate()
    }

    fn wait_at(&self, level: usize) -> f64 {
        match self.wait {
            WaitPolicy::Doubling => wait_time(level, self.budget.l0, self.medium.signal_velocity),
            WaitPolicy::Instant => 0.0,
        }
    }
}

/// One level of the precomputed schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStep {
    pub level: usize,
    /// Storage time before the level's operations, seconds.
    pub wait_time: f64,
    /// Representative state after storage; its fidelity drives the decision.
    pub pre_state: BellDiagonal,
    pub distill: bool,
    /// DEJMPS success probability (1 when not distilling).
    pub d: f64,
    /// State after the optional distillation: swapped upward, or delivered
    /// at the top level.
    pub post_state: BellDiagonal,
    pub fidelity: f64,
    /// Channel capacity `M_i` available to this level.
    pub capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub levels: Vec<LevelStep>,
}

impl LevelTrace {
    pub fn distill_flags(&self) -> Vec<bool> {
        self.levels.iter().map(|l| l.distill).collect()
    }

    pub fn success_probs(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.d).collect()
    }

    pub fn end_state(&self) -> BellDiagonal {
        self.levels.last().expect("schedule has a top level").post_state
    }
}

/// Build the distill/swap schedule on representative states.
///
/// A level distills when its fidelity is below `f_th` and at least two
/// channels remain (`M_i ≥ 2`); otherwise it passes its pairs on unchanged.
pub fn build_schedule(config: &ProtocolConfig) -> Result<LevelTrace> {
    config.validate()?;
    let mut state = initial_state(config.noise.eps_g)?;
    let mut capacity = config.m;
    let mut levels = Vec::with_capacity(config.n + 1);
    for level in 0..=config.n {
        let wait = config.wait_at(level);
        state = apply_dephasing(&state, wait, config.noise.t2)?;
        let pre_state = state;
        let wants = level < config.n && pre_state.fidelity() < config.f_th;
        let distill = wants && capacity >= 2;
        let (post_state, d) = if distill {
            let out = dejmps(&pre_state, &pre_state, &config.noise)?;
            (out.state, out.success_prob)
        } else {
            (pre_state, 1.0)
        };
        levels.push(LevelStep {
            level,
            wait_time: wait,
            pre_state,
            distill,
            d,
            post_state,
            fidelity: post_state.fidelity(),
            capacity,
        });
        if distill {
            capacity /= 2;
        }
        if level < config.n {
            state = swap(&post_state, &post_state, &config.noise)?;
        }
    }
    Ok(LevelTrace { levels })
}

/// Cascade inputs for a schedule.
pub fn cascade_config(config: &ProtocolConfig, trace: &LevelTrace, pi0: f64) -> CascadeConfig {
    CascadeConfig {
        n: config.n,
        m: config.m,
        pi0,
        d: trace.success_probs(),
        distill: trace.distill_flags(),
        reset_threshold: 1,
        accounting: ResetAccounting::Exact,
    }
}

/// End-to-end figures of merit for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformancePoint {
    /// Secret bits per burst divided by the `M` channel uses of a link.
    pub skr_pcu: f64,
    pub expected_end_pairs: f64,
    pub completion_prob: f64,
    pub end_state: BellDiagonal,
    pub key_fraction: f64,
    pub ops: OpCounts,
    pub wavelength_used: u32,
    pub pi0: f64,
    pub l0: f64,
    pub n: usize,
    pub m: usize,
    /// Largest per-level normalization gap of the closed-form reset count.
    pub mass_defect: f64,
    /// Set when the chain cannot deliver pairs (for example a certain reset).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl PerformancePoint {
    /// Expected secret bits delivered per burst.
    pub fn secret_bits_per_burst(&self) -> f64 {
        self.skr_pcu * self.m as f64
    }

    pub fn n_links(&self) -> usize {
        1 << self.n
    }
}

/// Full evaluation: schedule, cascade, key rate and operation counts.
pub fn evaluate_chain(config: &ProtocolConfig) -> Result<PerformancePoint> {
    Ok(evaluate_chain_detailed(config)?.0)
}

/// As [`evaluate_chain`], also returning the schedule and the cascade report
/// (absent when the chain resets with certainty).
pub fn evaluate_chain_detailed(
    config: &ProtocolConfig,
) -> Result<(PerformancePoint, LevelTrace, Option<CascadeReport>)> {
    config.validate()?;
    let (wavelength_used, pi0) = select_wavelength(&config.medium, &config.budget)?;
    let trace = build_schedule(config)?;
    let end_state = trace.end_state();
    let kf = key_fraction(&end_state);
    let base = PerformancePoint {
        skr_pcu: 0.0,
        expected_end_pairs: 0.0,
        completion_prob: 0.0,
        end_state,
        key_fraction: kf,
        ops: OpCounts::default(),
        wavelength_used,
        pi0,
        l0: config.budget.l0,
        n: config.n,
        m: config.m,
        mass_defect: 0.0,
        diagnostic: None,
    };
    match run_cascade(&cascade_config(config, &trace, pi0)) {
        Ok(report) => {
            let ops = ops_per_burst(&report, &trace, config.n_links(), &config.cost);
            let point = PerformancePoint {
                skr_pcu: report.expected_end_pairs * kf / config.m as f64,
                expected_end_pairs: report.expected_end_pairs,
                completion_prob: report.completion_prob,
                ops,
                mass_defect: report.max_mass_defect(),
                ..base
            };
            Ok((point, trace, Some(report)))
        }
        Err(Error::CertainReset { level }) => {
            let point = PerformancePoint {
                diagnostic: Some(format!("certain reset at level {level}")),
                ..base
            };
            Ok((point, trace, None))
        }
        Err(e) => Err(e),
    }
}
