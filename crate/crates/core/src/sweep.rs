//! Parameter sweeps, nesting-depth optimization, figure presets and
//! CSV/JSON emission.
//!
//! A [`SweepSpec`] is the JSON configuration format. Its keys mirror the
//! struct fields:
//!
//! ```json
//! {
//!   "mode": "optimize",
//!   "media": ["hcf", "smf"],
//!   "total_distance": [100, 200],
//!   "conv_eff": [0.5, 1.0],
//!   "eta_hardware": [1.0],
//!   "t2": [1.0],
//!   "eps_g": [0.001],
//!   "f_th": 0.95,
//!   "m": 1024,
//!   "n_range": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
//! }
//! ```
//!
//! Media are preset names (`smf`, `hcf`, `hcf1550`) or full profiles. Rows are
//! emitted with the medium varying slowest, then total distance, conversion
//! efficiency, hardware efficiency, `T2` and `εG`.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{conversion_threshold, elementary_success, select_wavelength, LinkBudget, MediumProfile, MEMORY_NM, TELECOM_NM};
use crate::metrics::{ops_per_secret_bit, repeaters_per_secret_bit, Ratio};
use crate::protocol::{evaluate_chain, PerformancePoint, ProtocolConfig, DEFAULT_FIDELITY_THRESHOLD};
use crate::states::NoiseParams;
use crate::{Error, Result};

pub const MAX_DEPTH: usize = 12;
pub const DEFAULT_MAX_DEPTH: usize = 10;
pub const DEFAULT_MULTIPLEXING: usize = 1024;

/// A medium given by preset name or by full profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum MediumSpec {
    Preset(String),
    Profile(MediumProfile),
}

impl<'de> Deserialize<'de> for MediumSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        // Through `Value` so that wavelength map keys ("1550") parse as integers.
        match serde_json::Value::deserialize(deserializer)? {
            serde_json::Value::String(name) => Ok(MediumSpec::Preset(name)),
            other => serde_json::from_value(other).map(MediumSpec::Profile).map_err(serde::de::Error::custom),
        }
    }
}

impl MediumSpec {
    pub fn resolve(&self) -> Result<MediumProfile> {
        match self {
            MediumSpec::Preset(name) => MediumProfile::preset(name),
            MediumSpec::Profile(p) => {
                p.validate()?;
                Ok(p.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Optimize the nesting depth at every grid point.
    #[default]
    Optimize,
    /// Elementary-link wavelength choice only; `total_distance` is read as
    /// the link length `l0`.
    Wavelength,
}

/// Which derived ratio a figure reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioMetric {
    /// `skr(numerator) / skr(denominator)`.
    Skr,
    /// `ops_per_secret_bit(numerator) / ops_per_secret_bit(denominator)`.
    OpsPerSecretBit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSpec {
    pub metric: RatioMetric,
    pub numerator: String,
    pub denominator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub mode: SweepMode,
    pub media: Vec<MediumSpec>,
    /// km
    pub total_distance: Vec<f64>,
    pub conv_eff: Vec<f64>,
    #[serde(default = "unit_axis")]
    pub eta_hardware: Vec<f64>,
    /// s
    #[serde(default = "unit_axis")]
    pub t2: Vec<f64>,
    pub eps_g: Vec<f64>,
    #[serde(default = "default_threshold")]
    pub f_th: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_n_range")]
    pub n_range: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<RatioSpec>,
}

fn unit_axis() -> Vec<f64> {
    vec![1.0]
}

fn default_threshold() -> f64 {
    DEFAULT_FIDELITY_THRESHOLD
}

fn default_m() -> usize {
    DEFAULT_MULTIPLEXING
}

fn default_n_range() -> Vec<usize> {
    (0..=DEFAULT_MAX_DEPTH).collect()
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let axes: [(&str, usize); 6] = [
            ("media", self.media.len()),
            ("total_distance", self.total_distance.len()),
            ("conv_eff", self.conv_eff.len()),
            ("eta_hardware", self.eta_hardware.len()),
            ("t2", self.t2.len()),
            ("eps_g", self.eps_g.len()),
        ];
        if let Some((name, _)) = axes.iter().find(|(_, n)| *n == 0) {
            return Err(Error::Config(format!("sweep axis `{name}` is empty")));
        }
        if self.n_range.is_empty() {
            return Err(Error::Config("n_range is empty".into()));
        }
        if let Some(n) = self.n_range.iter().find(|n| **n > MAX_DEPTH) {
            return Err(Error::Config(format!("depth {n} exceeds {MAX_DEPTH}")));
        }
        if let Some(d) = self.total_distance.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(Error::Config(format!("total distance {d} must be positive")));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        for m in &self.media {
            m.resolve()?;
        }
        for &eps in &self.eps_g {
            for &t2 in &self.t2 {
                NoiseParams::new(eps, t2)?;
            }
        }
        for &hw in &self.eta_hardware {
            for &c in &self.conv_eff {
                LinkBudget::new(hw, c, 1.0)?;
            }
        }
        Ok(())
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.media.len()
            * self.total_distance.len()
            * self.conv_eff.len()
            * self.eta_hardware.len()
            * self.t2.len()
            * self.eps_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn points(&self) -> Result<Vec<GridPoint>> {
        let mut out = Vec::with_capacity(self.len());
        for medium in &self.media {
            let medium = medium.resolve()?;
            for &total_distance in &self.total_distance {
                for &conv_eff in &self.conv_eff {
                    for &eta_hardware in &self.eta_hardware {
                        for &t2 in &self.t2 {
                            for &eps_g in &self.eps_g {
                                out.push(GridPoint {
                                    medium: medium.clone(),
                                    total_distance,
                                    conv_eff,
                                    eta_hardware,
                                    t2,
                                    eps_g,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
struct GridPoint {
    medium: MediumProfile,
    total_distance: f64,
    conv_eff: f64,
    eta_hardware: f64,
    t2: f64,
    eps_g: f64,
}

impl GridPoint {
    fn base_config(&self, spec: &SweepSpec) -> Result<ProtocolConfig> {
        let mut c = ProtocolConfig::new(
            self.medium.clone(),
            LinkBudget::new(self.eta_hardware, self.conv_eff, self.total_distance)?,
            NoiseParams::new(self.eps_g, self.t2)?,
            0,
            spec.m,
        );
        c.f_th = spec.f_th;
        Ok(c)
    }
}

/// Best nesting depth for a fixed total distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthOptimum {
    pub best_n: usize,
    /// `total_distance / 2^best_n`, exact in binary floating point.
    pub best_l0: f64,
    pub point: PerformancePoint,
}

/// Evaluate every depth in `n_range` at `l0 = total / 2ⁿ` and keep the
/// highest key rate. Ties go to the smaller depth. If no depth yields key,
/// the smallest depth is returned with a diagnostic.
pub fn optimize_depth(total_distance: f64, base: &ProtocolConfig, n_range: &[usize]) -> Result<DepthOptimum> {
    let mut depths = n_range.to_vec();
    depths.sort_unstable();
    depths.dedup();
    if depths.is_empty() {
        return Err(Error::Config("n_range is empty".into()));
    }
    let mut best: Option<DepthOptimum> = None;
    for n in depths {
        let mut cfg = base.clone();
        cfg.n = n;
        cfg.budget.l0 = total_distance / (1u64 << n) as f64;
        let point = evaluate_chain(&cfg)?;
        let better = best.as_ref().is_none_or(|b| point.skr_pcu > b.point.skr_pcu);
        if better {
            best = Some(DepthOptimum { best_n: n, best_l0: cfg.budget.l0, point });
        }
    }
    let mut best = best.expect("at least one depth evaluated");
    if best.point.skr_pcu == 0.0 && best.point.diagnostic.is_none() {
        best.point.diagnostic = Some("no positive key at any depth".into());
    }
    Ok(best)
}

/// One optimized grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub medium: String,
    pub total_distance: f64,
    pub conv_eff: f64,
    pub eta_hardware: f64,
    pub t2: f64,
    pub eps_g: f64,
    pub f_th: f64,
    pub m: usize,
    pub wavelength_used: u32,
    pub best_n: usize,
    pub best_l0: f64,
    pub skr_pcu: f64,
    pub completion_prob: f64,
    pub ops_per_secret_bit: f64,
    pub repeaters_per_secret_bit: f64,
    pub mass_defect: f64,
}

impl SweepRow {
    pub const HEADER: [&'static str; 16] = [
        "medium",
        "total_distance",
        "conv_eff",
        "eta_hardware",
        "t2",
        "eps_g",
        "f_th",
        "m",
        "wavelength_used",
        "best_n",
        "best_l0",
        "skr_pcu",
        "completion_prob",
        "ops_per_secret_bit",
        "repeaters_per_secret_bit",
        "mass_defect",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.medium.clone(),
            num(self.total_distance),
            num(self.conv_eff),
            num(self.eta_hardware),
            num(self.t2),
            num(self.eps_g),
            num(self.f_th),
            self.m.to_string(),
            self.wavelength_used.to_string(),
            self.best_n.to_string(),
            num(self.best_l0),
            num(self.skr_pcu),
            num(self.completion_prob),
            num(self.ops_per_secret_bit),
            num(self.repeaters_per_secret_bit),
            num(self.mass_defect),
        ]
    }
}

/// Elementary-link wavelength comparison at one `(medium, l0, conv_eff)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthRow {
    pub medium: String,
    pub l0: f64,
    pub conv_eff: f64,
    pub eta_hardware: f64,
    /// `NaN` where the medium does not carry 780 nm.
    pub pi0_memory: f64,
    pub pi0_telecom: f64,
    pub wavelength_used: u32,
    /// Conversion efficiency at which both wavelengths tie; `NaN` when only
    /// one wavelength is available.
    pub conversion_threshold: f64,
}

impl WavelengthRow {
    pub const HEADER: [&'static str; 8] = [
        "medium",
        "l0",
        "conv_eff",
        "eta_hardware",
        "pi0_memory",
        "pi0_telecom",
        "wavelength_used",
        "conversion_threshold",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.medium.clone(),
            num(self.l0),
            num(self.conv_eff),
            num(self.eta_hardware),
            num(self.pi0_memory),
            num(self.pi0_telecom),
            self.wavelength_used.to_string(),
            num(self.conversion_threshold),
        ]
    }
}

/// Ratio between two media at matching grid coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub metric: RatioMetric,
    pub numerator: String,
    pub denominator: String,
    pub total_distance: f64,
    pub conv_eff: f64,
    pub eta_hardware: f64,
    pub t2: f64,
    pub eps_g: f64,
    pub value_numerator: f64,
    pub value_denominator: f64,
    /// `inf`: only the numerator side is positive; `NaN`: neither side is.
    pub ratio: f64,
}

impl RatioRow {
    pub const HEADER: [&'static str; 11] = [
        "metric",
        "numerator",
        "denominator",
        "total_distance",
        "conv_eff",
        "eta_hardware",
        "t2",
        "eps_g",
        "value_numerator",
        "value_denominator",
        "ratio",
    ];

    fn fields(&self) -> Vec<String> {
        let metric = match self.metric {
            RatioMetric::Skr => "skr",
            RatioMetric::OpsPerSecretBit => "ops_per_secret_bit",
        };
        vec![
            metric.into(),
            self.numerator.clone(),
            self.denominator.clone(),
            num(self.total_distance),
            num(self.conv_eff),
            num(self.eta_hardware),
            num(self.t2),
            num(self.eps_g),
            num(self.value_numerator),
            num(self.value_denominator),
            num(self.ratio),
        ]
    }
}

/// Full double precision: 17 significant digits.
fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.join(","));
    }
    out
}

/// Result of a sweep in either mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepOutput {
    Optimized(Vec<SweepRow>),
    Wavelength(Vec<WavelengthRow>),
}

impl SweepOutput {
    pub fn to_csv(&self) -> String {
        match self {
            SweepOutput::Optimized(rows) => csv(&SweepRow::HEADER, rows.iter().map(SweepRow::fields)),
            SweepOutput::Wavelength(rows) => csv(&WavelengthRow::HEADER, rows.iter().map(WavelengthRow::fields)),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn rows(&self) -> Option<&[SweepRow]> {
        match self {
            SweepOutput::Optimized(r) => Some(r),
            SweepOutput::Wavelength(_) => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepOutput::Optimized(r) => r.len(),
            SweepOutput::Wavelength(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn ratio_csv(rows: &[RatioRow]) -> String {
    csv(&RatioRow::HEADER, rows.iter().map(RatioRow::fields))
}

fn evaluate_point(spec: &SweepSpec, p: &GridPoint) -> Result<SweepRow> {
    let base = p.base_config(spec)?;
    let opt = optimize_depth(p.total_distance, &base, &spec.n_range)?;
    Ok(SweepRow {
        medium: p.medium.label(),
        total_distance: p.total_distance,
        conv_eff: p.conv_eff,
        eta_hardware: p.eta_hardware,
        t2: p.t2,
        eps_g: p.eps_g,
        f_th: spec.f_th,
        m: spec.m,
        wavelength_used: opt.point.wavelength_used,
        best_n: opt.best_n,
        best_l0: opt.best_l0,
        skr_pcu: opt.point.skr_pcu,
        completion_prob: opt.point.completion_prob,
        ops_per_secret_bit: ops_per_secret_bit(&opt.point),
        repeaters_per_secret_bit: repeaters_per_secret_bit(&opt.point),
        mass_defect: opt.point.mass_defect,
    })
}

fn wavelength_point(p: &GridPoint) -> Result<WavelengthRow> {
    let budget = LinkBudget::new(p.eta_hardware, p.conv_eff, p.total_distance)?;
    let branch = |w: u32| -> Result<f64> {
        if p.medium.allowed_wavelengths.contains(&w) {
            elementary_success(&p.medium, &budget, w)
        } else {
            Ok(f64::NAN)
        }
    };
    let (wavelength_used, _) = select_wavelength(&p.medium, &budget)?;
    let both = [MEMORY_NM, TELECOM_NM].iter().all(|w| p.medium.allowed_wavelengths.contains(w));
    Ok(WavelengthRow {
        medium: p.medium.label(),
        l0: p.total_distance,
        conv_eff: p.conv_eff,
        eta_hardware: p.eta_hardware,
        pi0_memory: branch(MEMORY_NM)?,
        pi0_telecom: branch(TELECOM_NM)?,
        wavelength_used,
        conversion_threshold: if both { conversion_threshold(&p.medium, p.total_distance)? } else { f64::NAN },
    })
}

/// Evaluate the Cartesian product of the sweep axes. Output order is the
/// grid order, independent of worker scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let points = spec.points()?;
    match spec.mode {
        SweepMode::Optimize => {
            let rows: Result<Vec<SweepRow>> = points.par_iter().map(|p| evaluate_point(spec, p)).collect();
            Ok(SweepOutput::Optimized(rows?))
        }
        SweepMode::Wavelength => {
            let rows: Result<Vec<WavelengthRow>> = points.par_iter().map(wavelength_point).collect();
            Ok(SweepOutput::Wavelength(rows?))
        }
    }
}

/// Run on a dedicated pool of `threads` workers (`None`: rayon's default).
pub fn run_sweep_with_threads(spec: &SweepSpec, threads: Option<usize>) -> Result<SweepOutput> {
    match threads {
        None => run_sweep(spec),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(|| run_sweep(spec)),
    }
}

/// Pair rows of two media at identical grid coordinates and form the ratio.
pub fn ratio_table(rows: &[SweepRow], ratio: &RatioSpec) -> Result<Vec<RatioRow>> {
    let num_label = MediumProfile::preset(&ratio.numerator).map(|m| m.label()).unwrap_or(ratio.numerator.clone());
    let den_label = MediumProfile::preset(&ratio.denominator).map(|m| m.label()).unwrap_or(ratio.denominator.clone());
    let key = |r: &SweepRow| (r.total_distance, r.conv_eff, r.eta_hardware, r.t2, r.eps_g);
    let numerators: Vec<&SweepRow> = rows.iter().filter(|r| r.medium == num_label).collect();
    let denominators: Vec<&SweepRow> = rows.iter().filter(|r| r.medium == den_label).collect();
    if numerators.is_empty() || numerators.len() != denominators.len() {
        return Err(Error::GridMismatch(format!(
            "{} rows for {num_label} vs {} rows for {den_label}",
            numerators.len(),
            denominators.len()
        )));
    }
    numerators
        .iter()
        .zip(&denominators)
        .map(|(a, b)| {
            if key(a) != key(b) {
                return Err(Error::GridMismatch(format!("misaligned grid points {:?} / {:?}", key(a), key(b))));
            }
            let (va, vb, r) = match ratio.metric {
                RatioMetric::Skr => (a.skr_pcu, b.skr_pcu, Ratio::of(a.skr_pcu, b.skr_pcu)),
                RatioMetric::OpsPerSecretBit => {
                    let (x, y) = (a.ops_per_secret_bit, b.ops_per_secret_bit);
                    // no key costs infinitely many operations per bit
                    let r = match (x.is_finite(), y.is_finite()) {
                        (false, false) => Ratio::Undefined,
                        (false, true) => Ratio::Infinite,
                        (true, false) => Ratio::Finite(0.0),
                        (true, true) => Ratio::of(x, y),
                    };
                    (x, y, r)
                }
            };
            Ok(RatioRow {
                metric: ratio.metric,
                numerator: num_label.clone(),
                denominator: den_label.clone(),
                total_distance: a.total_distance,
                conv_eff: a.conv_eff,
                eta_hardware: a.eta_hardware,
                t2: a.t2,
                eps_g: a.eps_g,
                value_numerator: va,
                value_denominator: vb,
                ratio: r.as_f64(),
            })
        })
        .collect()
}

fn range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

fn media(names: &[&str]) -> Vec<MediumSpec> {
    names.iter().map(|n| MediumSpec::Preset((*n).into())).collect()
}

/// Names accepted by [`figure_preset`].
pub const FIGURE_PRESETS: [&str; 6] = ["fig3", "fig5", "fig6", "fig7", "fig8", "skr_curves"];

/// Hard-coded grids for the published figures. Axis extents are read from
/// the plots and are easy to override through a config file.
pub fn figure_preset(name: &str) -> Result<SweepSpec> {
    let base = SweepSpec {
        mode: SweepMode::Optimize,
        media: media(&["hcf", "smf"]),
        total_distance: range(100.0, 1000.0, 100.0),
        conv_eff: range(0.1, 1.0, 0.1),
        eta_hardware: vec![1.0],
        t2: vec![1.0],
        eps_g: vec![1e-4, 1e-3],
        f_th: DEFAULT_FIDELITY_THRESHOLD,
        m: DEFAULT_MULTIPLEXING,
        n_range: default_n_range(),
        output_path: None,
        ratio: None,
    };
    let skr_ratio = Some(RatioSpec { metric: RatioMetric::Skr, numerator: "hcf".into(), denominator: "smf".into() });
    let spec = match name {
        "fig3" => SweepSpec {
            mode: SweepMode::Wavelength,
            total_distance: range(1.0, 100.0, 1.0),
            conv_eff: range(0.02, 1.0, 0.02),
            eps_g: vec![0.0],
            n_range: vec![0],
            ..base
        },
        "fig5" => SweepSpec { ratio: skr_ratio, ..base },
        "fig6" => SweepSpec { conv_eff: vec![0.5], eta_hardware: range(0.1, 1.0, 0.1), ratio: skr_ratio, ..base },
        "fig7" => SweepSpec {
            ratio: Some(RatioSpec {
                metric: RatioMetric::OpsPerSecretBit,
                numerator: "smf".into(),
                denominator: "hcf".into(),
            }),
            ..base
        },
        "fig8" => SweepSpec {
            media: media(&["hcf", "hcf1550", "smf"]),
            total_distance: range(50.0, 1000.0, 50.0),
            conv_eff: vec![1.0, 0.5],
            eps_g: vec![1e-4, 1e-3, 1e-2],
            ..base
        },
        "skr_curves" => SweepSpec {
            media: media(&["hcf", "hcf1550", "smf"]),
            total_distance: range(50.0, 1000.0, 50.0),
            conv_eff: vec![1.0, 0.5],
            t2: vec![1.0, 0.1, 0.01],
            eps_g: vec![1e-4, 1e-3, 1e-2],
            ..base
        },
        other => return Err(Error::UnknownPreset(other.into())),
    };
    spec.validate()?;
    Ok(spec)
}
