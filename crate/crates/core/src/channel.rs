//! Fiber media, link budgets and the elementary-link success probability.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Memory-native emission wavelength (nm).
pub const MEMORY_NM: u32 = 780;
/// Telecom transmission wavelength (nm).
pub const TELECOM_NM: u32 = 1550;

/// Default classical/quantum signalling speed in fiber (km/s).
pub const DEFAULT_SIGNAL_VELOCITY: f64 = 2.0e5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiberKind {
    Smf,
    Hcf,
}

impl fmt::Display for FiberKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FiberKind::Smf => f.write_str("smf"),
            FiberKind::Hcf => f.write_str("hcf"),
        }
    }
}

/// A transmission medium: attenuation per wavelength plus facet coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumProfile {
    pub name: FiberKind,
    /// Attenuation length in km, keyed by wavelength in nm.
    pub att_length: BTreeMap<u32, f64>,
    /// km/s
    #[serde(default = "default_velocity")]
    pub signal_velocity: f64,
    pub coupling_mem_fiber: f64,
    pub allowed_wavelengths: BTreeSet<u32>,
}

fn default_velocity() -> f64 {
    DEFAULT_SIGNAL_VELOCITY
}

impl MediumProfile {
    /// Silica SMF; only telecom transmission is considered.
    pub fn smf() -> Self {
        MediumProfile {
            name: FiberKind::Smf,
            att_length: BTreeMap::from([(TELECOM_NM, 28.95)]),
            signal_velocity: DEFAULT_SIGNAL_VELOCITY,
            coupling_mem_fiber: 0.83,
            allowed_wavelengths: BTreeSet::from([TELECOM_NM]),
        }
    }

    /// DNANF hollow-core fiber with adaptive 780/1550 nm transmission.
    pub fn hcf() -> Self {
        MediumProfile {
            name: FiberKind::Hcf,
            att_length: BTreeMap::from([(MEMORY_NM, 24.127), (TELECOM_NM, 78.96)]),
            signal_velocity: DEFAULT_SIGNAL_VELOCITY,
            coupling_mem_fiber: 0.79,
            allowed_wavelengths: BTreeSet::from([MEMORY_NM, TELECOM_NM]),
        }
    }

    /// HCF constrained to telecom transmission.
    pub fn hcf_telecom() -> Self {
        MediumProfile { allowed_wavelengths: BTreeSet::from([TELECOM_NM]), ..Self::hcf() }
    }

    /// Built-in profiles by name: `smf`, `hcf`, `hcf1550`.
    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "smf" | "silica" => Ok(Self::smf()),
            "hcf" => Ok(Self::hcf()),
            "hcf1550" | "hcf_telecom" => Ok(Self::hcf_telecom()),
            other => Err(Error::Config(format!("unknown medium preset `{other}`"))),
        }
    }

    /// Short label, distinguishing the telecom-only HCF variant.
    pub fn label(&self) -> String {
        match self.name {
            FiberKind::Hcf if !self.allowed_wavelengths.contains(&MEMORY_NM) => "hcf1550".into(),
            k => k.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.coupling_mem_fiber) {
            return Err(Error::Config(format!(
                "coupling efficiency {} outside [0, 1]",
                self.coupling_mem_fiber
            )));
        }
        if self.att_length.values().any(|l| !(*l > 0.0)) {
            return Err(Error::Config("attenuation lengths must be positive".into()));
        }
        if !(self.signal_velocity > 0.0) {
            return Err(Error::Config("signal velocity must be positive".into()));
        }
        if self.name == FiberKind::Smf && self.allowed_wavelengths.contains(&MEMORY_NM) {
            return Err(Error::Config("SMF is not operated at the memory wavelength".into()));
        }
        for w in &self.allowed_wavelengths {
            if !self.att_length.contains_key(w) {
                return Err(Error::Config(format!("no attenuation length for allowed {w} nm")));
            }
        }
        Ok(())
    }

    pub fn attenuation_length(&self, wavelength: u32) -> Result<f64> {
        if !self.allowed_wavelengths.contains(&wavelength) {
            return Err(self.unsupported(wavelength));
        }
        self.att_length.get(&wavelength).copied().ok_or_else(|| self.unsupported(wavelength))
    }

    fn unsupported(&self, wavelength: u32) -> Error {
        Error::UnsupportedWavelength { medium: self.label(), wavelength }
    }
}

/// Per-link efficiencies that do not depend on the medium, plus spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub eta_hardware: f64,
    /// Product of both frequency-conversion stages.
    pub conv_eff: f64,
    /// Inter-repeater spacing in km.
    pub l0: f64,
}

impl LinkBudget {
    pub fn new(eta_hardware: f64, conv_eff: f64, l0: f64) -> Result<Self> {
        let b = LinkBudget { eta_hardware, conv_eff, l0 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta_hardware", self.eta_hardware), ("conv_eff", self.conv_eff)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.l0 >= 0.0) || !self.l0.is_finite() {
            return Err(Error::Config(format!("l0 = {} must be non-negative", self.l0)));
        }
        Ok(())
    }
}

/// Effective photon coupling efficiency for one side of a link.
pub fn eta_c(medium: &MediumProfile, budget: &LinkBudget, wavelength: u32) -> Result<f64> {
    medium.attenuation_length(wavelength)?;
    let base = budget.eta_hardware * medium.coupling_mem_fiber;
    Ok(if wavelength == MEMORY_NM { base } else { base * budget.conv_eff })
}

/// `π₀ = ½ η_c² exp(−L0 / L_att)`.
pub fn elementary_success(medium: &MediumProfile, budget: &LinkBudget, wavelength: u32) -> Result<f64> {
    let eta = eta_c(medium, budget, wavelength)?;
    let att = medium.attenuation_length(wavelength)?;
    Ok(0.5 * eta * eta * (-budget.l0 / att).exp())
}

/// The wavelength maximising `π₀`. Ties go to 1550 nm.
pub fn select_wavelength(medium: &MediumProfile, budget: &LinkBudget) -> Result<(u32, f64)> {
    let mut best: Option<(u32, f64)> = None;
    for &w in &medium.allowed_wavelengths {
        let p = elementary_success(medium, budget, w)?;
        best = match best {
            None => Some((w, p)),
            Some((_, bp)) if p > bp || (p == bp && w == TELECOM_NM) => Some((w, p)),
            keep => keep,
        };
    }
    best.ok_or_else(|| Error::Config(format!("medium {} has no allowed wavelengths", medium.label())))
}

/// Conversion efficiency at which 780 nm and 1550 nm give equal `π₀`.
/// Below this value direct memory-wavelength transmission wins.
pub fn conversion_threshold(medium: &MediumProfile, l0: f64) -> Result<f64> {
    let short = medium.attenuation_length(MEMORY_NM)?;
    let long = medium.attenuation_length(TELECOM_NM)?;
    Ok((-(l0 / 2.0) * (1.0 / short - 1.0 / long)).exp())
}
