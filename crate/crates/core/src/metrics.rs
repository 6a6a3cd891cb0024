//! Operation counts per burst, cost per secret bit, and element-wise ratio
//! grids between two technologies.

use serde::{Deserialize, Serialize};

use crate::cascade::{pair_minimum, CascadeReport};
use crate::protocol::{LevelTrace, PerformancePoint};
use crate::{Error, Result};

/// Gates and measurements charged per operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub swap_gates: f64,
    pub swap_measurements: f64,
    /// Per DEJMPS attempt: one bilateral CNOT on each node side.
    pub distill_gates: f64,
    pub distill_measurements: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { swap_gates: 1.0, swap_measurements: 2.0, distill_gates: 2.0, distill_measurements: 2.0 }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        let all = [self.swap_gates, self.swap_measurements, self.distill_gates, self.distill_measurements];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Config(format!("cost model entries must be non-negative: {all:?}")));
        }
        Ok(())
    }
}

/// Expected operations per burst.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OpCounts {
    /// Expected swaps, per level `0..n` (the swap that builds level `i+1`).
    pub swaps_per_level: Vec<f64>,
    /// Expected DEJMPS attempts, per level `0..=n`.
    pub distills_per_level: Vec<f64>,
    pub swaps: f64,
    pub distillations: f64,
    pub two_qubit_gates: f64,
    pub measurements: f64,
}

/// Expected swaps and distillation attempts in one burst.
///
/// Operations at level `i` are counted only in bursts that have not reset at
/// levels `0..=i`. With `N/2^i` segments at level `i`, each holding the
/// conditional count `q′_i`, the level performs `(N/2^{i+1})·E[min]` swaps and,
/// when it distills, `(N/2^i)·E[⌊p′_i/2⌋]` DEJMPS attempts.
pub fn ops_per_burst(report: &CascadeReport, trace: &LevelTrace, n_links: usize, cost: &CostModel) -> OpCounts {
    let n = report.levels.len() - 1;
    let mut swaps_per_level = Vec::with_capacity(n);
    let mut distills_per_level = Vec::with_capacity(n + 1);
    for (i, level) in report.levels.iter().enumerate() {
        let alive = report.survival_to(i + 1);
        let segments = (n_links >> i) as f64;
        let distills = if trace.levels[i].distill {
            alive * segments * level.p_cond.expect(|k| (k / 2) as f64)
        } else {
            0.0
        };
        distills_per_level.push(distills);
        if i < n {
            swaps_per_level.push(alive * segments / 2.0 * pair_minimum(&level.q_cond).mean());
        }
    }
    let swaps: f64 = swaps_per_level.iter().sum();
    let distillations: f64 = distills_per_level.iter().sum();
    OpCounts {
        two_qubit_gates: swaps * cost.swap_gates + distillations * cost.distill_gates,
        measurements: swaps * cost.swap_measurements + distillations * cost.distill_measurements,
        swaps_per_level,
        distills_per_level,
        swaps,
        distillations,
    }
}

/// Two-qubit gates per delivered secret bit. `+∞` marks the no-key regime.
pub fn ops_per_secret_bit(point: &PerformancePoint) -> f64 {
    per_secret_bit(point.ops.two_qubit_gates, point)
}

/// Repeater nodes (`N − 1`) per delivered secret bit. `+∞` without key.
pub fn repeaters_per_secret_bit(point: &PerformancePoint) -> f64 {
    per_secret_bit((point.n_links() - 1) as f64, point)
}

fn per_secret_bit(amount: f64, point: &PerformancePoint) -> f64 {
    let bits = point.secret_bits_per_burst();
    if bits > 0.0 {
        amount / bits
    } else {
        f64::INFINITY
    }
}

/// One cell of a ratio grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Ratio {
    Finite(f64),
    /// Denominator zero, numerator positive: saturates the top bin.
    Infinite,
    /// Both zero: no key from either technology.
    Undefined,
}

impl Ratio {
    pub fn of(a: f64, b: f64) -> Self {
        if b > 0.0 {
            Ratio::Finite(a / b)
        } else if a > 0.0 {
            Ratio::Infinite
        } else {
            Ratio::Undefined
        }
    }

    /// Numeric rendering: `+∞` and `NaN` for the two sentinels.
    pub fn as_f64(&self) -> f64 {
        match self {
            Ratio::Finite(r) => *r,
            Ratio::Infinite => f64::INFINITY,
            Ratio::Undefined => f64::NAN,
        }
    }
}

/// Element-wise `a / b` over two aligned grids.
pub fn ratio_grid(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<Vec<Ratio>>> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return Err(Error::GridMismatch("ratio operands have different shapes".into()));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| Ratio::of(*x, *y)).collect())
        .collect())
}
