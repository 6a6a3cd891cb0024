//! Scalar step-index fiber mode and free-space Gaussian-beam coupling.
//!
//! Lengths are in micrometres, wavelengths in nanometres. The fundamental
//! LP01 mode is `J0(U r/a)` in the core and `J0(U)/K0(W)·K0(W r/a)` in the
//! cladding; `U` and `W` solve the weak-guidance characteristic equation.
//! The hollow-core DNANF cannot be treated this way and is represented by
//! tabulated efficiencies.

pub mod bessel;
pub mod quadrature;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use bessel::{j0, j1, k0, k1};

/// First zero of `J0`; the LP11 cutoff.
pub const SINGLE_MODE_CUTOFF: f64 = 2.404_825_557_695_773;

/// Refractive index of fused silica used for facet reflections.
pub const SILICA_INDEX: f64 = 1.45;

/// Tilt tolerance at which the chain-level coupling constants are quoted.
pub const DEFAULT_TILT_TOLERANCE: f64 = 0.025;

/// DNANF efficiencies as `(tilt rad, η)`; facet reflection is negligible.
pub const DNANF_COUPLING_TABLE: [(f64, f64); 2] = [(0.0, 0.98), (DEFAULT_TILT_TOLERANCE, 0.79)];

const QUAD_REL_TOL: f64 = 1e-10;
/// Field-amplitude level treated as zero when truncating radial integrals.
const FIELD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepIndexFiber {
    /// µm
    pub core_radius: f64,
    pub n1: f64,
    pub n2: f64,
    pub ar_coated: bool,
}

impl StepIndexFiber {
    pub fn new(core_radius: f64, n1: f64, n2: f64, ar_coated: bool) -> Result<Self> {
        let f = StepIndexFiber { core_radius, n1, n2, ar_coated };
        f.validate()?;
        Ok(f)
    }

    /// Fiber with the given NA and a silica core whose radius puts
    /// `V` exactly at the single-mode cutoff for `wavelength_nm`.
    pub fn near_cutoff(na: f64, wavelength_nm: f64, ar_coated: bool) -> Result<Self> {
        let n1 = SILICA_INDEX;
        let n2 = (n1 * n1 - na * na).sqrt();
        let a = SINGLE_MODE_CUTOFF_NOMINAL * wavelength_nm * 1e-3 / (2.0 * PI * na);
        Self::new(a, n1, n2, ar_coated)
    }

    /// Default SMF geometry: near-cutoff at 1550 nm with an SMF-28-class NA.
    pub fn default_smf(ar_coated: bool) -> Self {
        Self::near_cutoff(SMF28_NA, 1550.0, ar_coated).expect("valid preset")
    }

    /// Physical SMF-28-like profile (a = 4.1 µm, NA = 0.117).
    pub fn smf28_like(ar_coated: bool) -> Self {
        let n1 = SILICA_INDEX;
        let n2 = (n1 * n1 - SMF28_NA * SMF28_NA).sqrt();
        Self::new(4.1, n1, n2, ar_coated).expect("valid preset")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.core_radius > 0.0) {
            return Err(Error::Domain(format!("core radius {} must be positive", self.core_radius)));
        }
        if !(self.n2 >= 1.0 && self.n1 > self.n2) {
            return Err(Error::Domain(format!("need n1 > n2 >= 1, got {} / {}", self.n1, self.n2)));
        }
        let na = self.numerical_aperture();
        if !(na > 0.0 && na < 1.0) {
            return Err(Error::Domain(format!("numerical aperture {na} outside (0, 1)")));
        }
        Ok(())
    }

    pub fn numerical_aperture(&self) -> f64 {
        (self.n1 * self.n1 - self.n2 * self.n2).sqrt()
    }

    /// Power transmission of the input facet from air.
    pub fn facet_transmission(&self) -> f64 {
        if self.ar_coated {
            1.0
        } else {
            fresnel_transmission(1.0, self.n1)
        }
    }
}

/// NA of a standard telecom SMF.
pub const SMF28_NA: f64 = 0.117;
/// V used when constructing near-cutoff presets (accepted as single mode).
pub const SINGLE_MODE_CUTOFF_NOMINAL: f64 = 2.405;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSolution {
    pub v: f64,
    pub u: f64,
    pub w: f64,
}

impl ModeSolution {
    /// Propagation constant in 1/µm.
    pub fn beta(&self, fiber: &StepIndexFiber, wavelength_nm: f64) -> f64 {
        let k0 = wavenumber(wavelength_nm);
        let kt = self.u / fiber.core_radius;
        ((fiber.n1 * k0).powi(2) - kt * kt).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeam {
    /// 1/e field radius at the facet, µm.
    pub waist: f64,
    pub wavelength_nm: f64,
}

/// Free-space wavenumber in 1/µm.
pub fn wavenumber(wavelength_nm: f64) -> f64 {
    2.0 * PI / (wavelength_nm * 1e-3)
}

/// `V = (2πa/λ)·NA`. Values at or above [`SINGLE_MODE_CUTOFF`] are multimode.
pub fn normalized_frequency(fiber: &StepIndexFiber, wavelength_nm: f64) -> Result<f64> {
    if !(wavelength_nm > 0.0) {
        return Err(Error::Domain(format!("wavelength {wavelength_nm} must be positive")));
    }
    Ok(wavenumber(wavelength_nm) * fiber.core_radius * fiber.numerical_aperture())
}

pub fn is_single_mode(v: f64) -> bool {
    v < SINGLE_MODE_CUTOFF
}

#[cfg(test)]
fn characteristic(u: f64, v: f64) -> f64 {
    let w = (v * v - u * u).max(0.0).sqrt();
    u * j1(u) / j0(u) - w * k1(w) / k0(w)
}

/// Fundamental-mode root of `U J1(U)/J0(U) = W K1(W)/K0(W)`, `W² = V² − U²`,
/// bracketed on `U ∈ (0, min(V, 2.4048))`.
///
/// The bisection runs on `W` (geometric steps while the bracket spans
/// decades) because for small `V` the root sits exponentially close to
/// `U = V` and is only resolvable through `W`.
pub fn solve_characteristic(v: f64) -> Result<ModeSolution> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("normalized frequency {v} must be positive")));
    }
    let u_max = v.min(2.4048);
    let g = |w: f64| characteristic_in_w(w, v);
    // g > 0 towards U = u_max (small W), g < 0 towards U → 0 (W → V)
    let mut lo = (v * v - u_max * u_max).max(0.0).sqrt().max(1e-300);
    let mut hi = v * (1.0 - 1e-12);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(Error::Solver(format!(
            "no sign change of the characteristic function for V = {v} ({g_lo:e}, {g_hi:e})"
        )));
    }
    for _ in 0..400 {
        let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = 0.5 * (lo + hi);
    let residual = g(w);
    if residual.abs() >= 1e-10 {
        return Err(Error::Solver(format!("residual {residual:e} at W = {w} for V = {v}")));
    }
    Ok(ModeSolution { v, u: (v * v - w * w).sqrt(), w })
}

fn characteristic_in_w(w: f64, v: f64) -> f64 {
    let u = (v * v - w * w).max(0.0).sqrt();
    u * j1(u) / j0(u) - w * k1(w) / k0(w)
}

/// Scalar LP01 field, unit amplitude on axis.
pub fn mode_field(r: f64, fiber: &StepIndexFiber, mode: &ModeSolution) -> f64 {
    let rho = r / fiber.core_radius;
    if rho <= 1.0 {
        j0(mode.u * rho)
    } else {
        j0(mode.u) / k0(mode.w) * k0(mode.w * rho)
    }
}

/// Radius beyond which the cladding field stays below `FIELD_FLOOR`.
fn fiber_field_extent(fiber: &StepIndexFiber, mode: &ModeSolution) -> f64 {
    let a = fiber.core_radius;
    let below = |r: f64| mode_field(r, fiber, mode).abs() < FIELD_FLOOR;
    let mut hi = 2.0 * a;
    while !below(hi) {
        hi *= 2.0;
    }
    let mut lo = a;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Radius at which `exp(−r²/w²)` drops to `level`.
fn gaussian_extent(waist: f64, level: f64) -> f64 {
    waist * (-level.ln()).sqrt()
}

/// `∫ g(r) r dr` over `[0, r_max]`, split at the core boundary.
fn radial_integral<F: Fn(f64) -> f64>(g: F, core: f64, r_max: f64) -> Result<f64> {
    let inner = quadrature::integrate(|r| g(r) * r, 0.0, core.min(r_max), QUAD_REL_TOL, 0.0)?;
    if r_max <= core {
        return Ok(inner);
    }
    let outer = quadrature::integrate(|r| g(r) * r, core, r_max, QUAD_REL_TOL, 0.0)?;
    Ok(inner + outer)
}

fn fiber_power(fiber: &StepIndexFiber, mode: &ModeSolution) -> Result<f64> {
    // squared field: FIELD_FLOOR² = 1e-16 of peak
    let extent = fiber_field_extent(fiber, mode);
    radial_integral(|r| mode_field(r, fiber, mode).powi(2), fiber.core_radius, extent)
}

fn gaussian_power(waist: f64) -> Result<f64> {
    let extent = gaussian_extent(waist, FIELD_FLOOR);
    quadrature::integrate(|r| (-2.0 * r * r / (waist * waist)).exp() * r, 0.0, extent, QUAD_REL_TOL, 0.0)
}

fn overlap_with_kernel<K: Fn(f64) -> f64>(
    beam: &GaussianBeam,
    fiber: &StepIndexFiber,
    mode: &ModeSolution,
    kernel: K,
) -> Result<f64> {
    if !(beam.waist > 0.0) {
        return Err(Error::Domain(format!("beam waist {} must be positive", beam.waist)));
    }
    let w2 = beam.waist * beam.waist;
    let extent = fiber_field_extent(fiber, mode).min(gaussian_extent(beam.waist, 1e-16));
    let overlap = radial_integral(
        |r| mode_field(r, fiber, mode) * (-r * r / w2).exp() * kernel(r),
        fiber.core_radius,
        extent,
    )?;
    let eta = overlap * overlap / (fiber_power(fiber, mode)? * gaussian_power(beam.waist)?);
    if !eta.is_finite() {
        return Err(Error::Numeric(format!("non-finite overlap for waist {}", beam.waist)));
    }
    Ok(eta)
}

/// Mode-match power coupling of a Gaussian beam at its waist into the LP01 mode.
pub fn overlap_eta(beam: &GaussianBeam, fiber: &StepIndexFiber, mode: &ModeSolution) -> Result<f64> {
    overlap_with_kernel(beam, fiber, mode, |_| 1.0)
}

/// Coupling for a beam tilted by `theta` in the x–z plane. The transverse
/// phase ramp `exp(i k0 sinθ x)` integrates over azimuth to `J0(k0 r sinθ)`.
pub fn tilted_eta(beam: &GaussianBeam, fiber: &StepIndexFiber, mode: &ModeSolution, theta: f64) -> Result<f64> {
    if !(theta.abs() < 0.5) {
        return Err(Error::Domain(format!("tilt {theta} rad outside |θ| < 0.5")));
    }
    let kx = wavenumber(beam.wavelength_nm) * theta.sin().abs();
    if kx == 0.0 {
        return overlap_eta(beam, fiber, mode);
    }
    overlap_with_kernel(beam, fiber, mode, |r| j0(kx * r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaistOptimum {
    /// µm
    pub waist: f64,
    pub eta: f64,
}

/// Golden-section maximisation of `overlap_eta` over `w ∈ [0.2a, 5a]`.
pub fn optimize_waist(fiber: &StepIndexFiber, mode: &ModeSolution, wavelength_nm: f64) -> Result<WaistOptimum> {
    let a = fiber.core_radius;
    let eta_at = |w: f64| overlap_eta(&GaussianBeam { waist: w, wavelength_nm }, fiber, mode);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.2 * a, 5.0 * a);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = eta_at(x1)?;
    let mut f2 = eta_at(x2)?;
    while hi - lo > 1e-6 * 0.5 * (hi + lo) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eta_at(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eta_at(x1)?;
        }
    }
    let waist = 0.5 * (lo + hi);
    Ok(WaistOptimum { waist, eta: eta_at(waist)? })
}

/// Power transmission `1 − ((n1 − n0)/(n1 + n0))²` at normal incidence.
pub fn fresnel_transmission(n0: f64, n1: f64) -> f64 {
    let r = (n1 - n0) / (n1 + n0);
    1.0 - r * r
}

/// What the memory photon is coupled into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingTarget {
    StepIndex { fiber: StepIndexFiber, wavelength_nm: f64 },
    /// Hollow-core DNANF; only tabulated values are available.
    Dnanf,
}

/// Tolerance-limited facet efficiency: the optimised-waist coupling at a
/// tilt of `theta_tol`, times facet transmission.
pub fn effective_coupling(target: &CouplingTarget, theta_tol: f64) -> Result<f64> {
    if !(theta_tol >= 0.0) {
        return Err(Error::Domain(format!("tilt tolerance {theta_tol} must be non-negative")));
    }
    match target {
        CouplingTarget::StepIndex { fiber, wavelength_nm } => {
            let v = normalized_frequency(fiber, *wavelength_nm)?;
            let mode = solve_characteristic(v)?;
            let opt = optimize_waist(fiber, &mode, *wavelength_nm)?;
            let beam = GaussianBeam { waist: opt.waist, wavelength_nm: *wavelength_nm };
            Ok(tilted_eta(&beam, fiber, &mode, theta_tol)? * fiber.facet_transmission())
        }
        CouplingTarget::Dnanf => dnanf_coupling(theta_tol),
    }
}

/// Linear interpolation in [`DNANF_COUPLING_TABLE`]; no extrapolation.
pub fn dnanf_coupling(theta: f64) -> Result<f64> {
    let theta = theta.abs();
    for pair in DNANF_COUPLING_TABLE.windows(2) {
        let ((t0, e0), (t1, e1)) = (pair[0], pair[1]);
        if theta >= t0 && theta <= t1 {
            return Ok(e0 + (e1 - e0) * (theta - t0) / (t1 - t0));
        }
    }
    Err(Error::Domain(format!("no tabulated DNANF coupling at {theta} rad")))
}
