//! Bell-diagonal two-qubit states and the local noise channels acting on them.
//!
//! A state is stored as its four Bell coefficients `(a, b, c, d)` on
//! `(φ+, φ−, ψ+, ψ−)`. Each Bell state carries a Pauli label `(x, z)`:
//! `φ+ = (0,0)`, `φ− = (0,1)`, `ψ+ = (1,0)`, `ψ− = (1,1)`. Ideal entanglement
//! swapping composes labels by XOR, which makes it a convolution over the
//! Klein four-group.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const NORM_TOL: f64 = 1e-12;

/// Coefficients of a Bell-diagonal state on `(φ+, φ−, ψ+, ψ−)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellDiagonal {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl BellDiagonal {
    pub const PERFECT: BellDiagonal = BellDiagonal { a: 1.0, b: 0.0, c: 0.0, d: 0.0 };
    pub const MAXIMALLY_MIXED: BellDiagonal = BellDiagonal { a: 0.25, b: 0.25, c: 0.25, d: 0.25 };

    /// Validating constructor: coefficients in `[0, 1]` summing to one.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let s = BellDiagonal { a, b, c, d };
        s.validate()?;
        Ok(s)
    }

    /// Werner state of fidelity `f`: remaining weight split evenly.
    pub fn werner(f: f64) -> Result<Self> {
        let r = (1.0 - f) / 3.0;
        Self::new(f, r, r, r)
    }

    pub fn validate(&self) -> Result<()> {
        let coeffs = self.to_array();
        if coeffs.iter().any(|x| !x.is_finite() || *x < -NORM_TOL || *x > 1.0 + NORM_TOL) {
            return Err(Error::Domain(format!("Bell coefficients out of range: {coeffs:?}")));
        }
        let sum: f64 = coeffs.iter().sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::Domain(format!("Bell coefficients sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Overlap with `φ+`.
    pub fn fidelity(&self) -> f64 {
        self.a
    }

    /// Coefficients indexed by Pauli label `2x + z`, i.e. `[φ+, φ−, ψ+, ψ−]`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        BellDiagonal { a: v[0], b: v[1], c: v[2], d: v[3] }
    }

    /// Bit-flip error rate (weight on ψ±).
    pub fn z_basis_error(&self) -> f64 {
        self.c + self.d
    }

    /// Phase error rate (weight on φ− and ψ−).
    pub fn x_basis_error(&self) -> f64 {
        self.b + self.d
    }

    fn mix(&self, other: &BellDiagonal, w: f64) -> BellDiagonal {
        let (x, y) = (self.to_array(), other.to_array());
        BellDiagonal::from_array(std::array::from_fn(|i| (1.0 - w) * x[i] + w * y[i]))
    }

    /// `(1 − p)·ρ + p·I/4`.
    pub fn depolarize(&self, p: f64) -> BellDiagonal {
        self.mix(&Self::MAXIMALLY_MIXED, p)
    }

    /// Relabel by a Pauli frame change `(x, z)` (XOR on every label).
    fn pauli_shift(&self, x: usize, z: usize) -> BellDiagonal {
        let v = self.to_array();
        let shift = 2 * x + z;
        BellDiagonal::from_array(std::array::from_fn(|g| v[g ^ shift]))
    }
}

/// Gate, measurement and memory noise parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Two-qubit gate depolarizing probability.
    pub eps_g: f64,
    /// Measurement flip probability.
    pub xi: f64,
    /// Memory coherence time in seconds.
    pub t2: f64,
}

impl NoiseParams {
    /// Measurement error tied to the gate error as `ξ = εG/4`.
    pub fn new(eps_g: f64, t2: f64) -> Result<Self> {
        Self::with_measurement_error(eps_g, eps_g / 4.0, t2)
    }

    pub fn with_measurement_error(eps_g: f64, xi: f64, t2: f64) -> Result<Self> {
        let p = NoiseParams { eps_g, xi, t2 };
        p.validate()?;
        Ok(p)
    }

    pub fn ideal() -> Self {
        NoiseParams { eps_g: 0.0, xi: 0.0, t2: f64::INFINITY }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eps_g) {
            return Err(Error::Domain(format!("eps_g = {} outside [0, 1]", self.eps_g)));
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(Error::Domain(format!("xi = {} outside [0, 1]", self.xi)));
        }
        if self.t2.is_nan() || self.t2 <= 0.0 {
            return Err(Error::Domain(format!("t2 = {} must be positive", self.t2)));
        }
        Ok(())
    }
}

/// Werner state produced by a single noisy preparation, `F₀ = 1 − 5εG/4`.
pub fn initial_state(eps_g: f64) -> Result<BellDiagonal> {
    if !(0.0..=0.8).contains(&eps_g) {
        return Err(Error::Domain(format!("eps_g = {eps_g} outside [0, 0.8]")));
    }
    let a = 1.0 - 1.25 * eps_g;
    let r = (1.0 - a) / 3.0;
    Ok(BellDiagonal { a, b: r, c: r, d: r })
}

/// Pure dephasing for a storage time `t`.
///
/// `Λ = (1 + e^{−2t/T2})/2` is the weight kept on each state; the remainder
/// moves to its Z-flipped partner (φ+ ↔ φ−, ψ+ ↔ ψ−).
pub fn apply_dephasing(s: &BellDiagonal, t: f64, t2: f64) -> Result<BellDiagonal> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("storage time {t} must be non-negative")));
    }
    if t2.is_nan() || t2 <= 0.0 {
        return Err(Error::Domain(format!("t2 = {t2} must be positive")));
    }
    let lambda = 0.5 * (1.0 + (-2.0 * t / t2).exp());
    let mu = 1.0 - lambda;
    Ok(BellDiagonal {
        a: lambda * s.a + mu * s.b,
        b: lambda * s.b + mu * s.a,
        c: lambda * s.c + mu * s.d,
        d: lambda * s.d + mu * s.c,
    })
}

/// Ideal swap: convolution of the two label distributions over XOR.
pub fn swap_ideal(s1: &BellDiagonal, s2: &BellDiagonal) -> BellDiagonal {
    let (x, y) = (s1.to_array(), s2.to_array());
    let mut out = [0.0; 4];
    for (g1, p1) in x.iter().enumerate() {
        for (g2, p2) in y.iter().enumerate() {
            out[g1 ^ g2] += p1 * p2;
        }
    }
    BellDiagonal::from_array(out)
}

/// Noisy entanglement swap: ideal composition, one depolarizing application
/// of weight εG, then independent flips of the two Bell-measurement bits.
pub fn swap(s1: &BellDiagonal, s2: &BellDiagonal, noise: &NoiseParams) -> Result<BellDiagonal> {
    s1.validate()?;
    s2.validate()?;
    let out = swap_ideal(s1, s2).depolarize(noise.eps_g);
    Ok(measurement_flips(&out, noise.xi))
}

fn measurement_flips(s: &BellDiagonal, xi: f64) -> BellDiagonal {
    let single = xi * (1.0 - xi);
    let both = xi * xi;
    let keep = 1.0 - 2.0 * single - both;
    let xf = s.pauli_shift(1, 0);
    let zf = s.pauli_shift(0, 1);
    let xz = s.pauli_shift(1, 1);
    let (v, vx, vz, vxz) = (s.to_array(), xf.to_array(), zf.to_array(), xz.to_array());
    BellDiagonal::from_array(std::array::from_fn(|g| {
        keep * v[g] + single * (vx[g] + vz[g]) + both * vxz[g]
    }))
}

/// Outcome of a DEJMPS round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distilled {
    pub state: BellDiagonal,
    pub success_prob: f64,
}

/// Unnormalised coincidence and anti-coincidence branches of ideal DEJMPS.
fn dejmps_branches(s1: &BellDiagonal, s2: &BellDiagonal) -> ([f64; 4], [f64; 4]) {
    let (a1, b1, c1, d1) = (s1.a, s1.b, s1.c, s1.d);
    let (a2, b2, c2, d2) = (s2.a, s2.b, s2.c, s2.d);
    let coincident = [
        a1 * a2 + d1 * d2,
        a1 * d2 + d1 * a2,
        c1 * c2 + b1 * b2,
        c1 * b2 + b1 * c2,
    ];
    let anti = [
        a1 * c2 + d1 * b2,
        a1 * b2 + d1 * c2,
        c1 * a2 + b1 * d2,
        c1 * d2 + b1 * a2,
    ];
    (coincident, anti)
}

/// Noiseless DEJMPS map. Fails when the coincidence probability vanishes.
pub fn dejmps_ideal(s1: &BellDiagonal, s2: &BellDiagonal) -> Result<Distilled> {
    let (coinc, _) = dejmps_branches(s1, s2);
    let n: f64 = coinc.iter().sum();
    if n <= 0.0 {
        return Err(Error::DegenerateInput);
    }
    Ok(Distilled {
        state: BellDiagonal::from_array(coinc.map(|x| x / n)),
        success_prob: n,
    })
}

/// Noisy DEJMPS: both inputs are depolarized with weight εG, and each of the
/// two heralding measurements flips independently with probability ξ.
pub fn dejmps(s1: &BellDiagonal, s2: &BellDiagonal, noise: &NoiseParams) -> Result<Distilled> {
    s1.validate()?;
    s2.validate()?;
    let (n1, n2) = (s1.depolarize(noise.eps_g), s2.depolarize(noise.eps_g));
    let (coinc, anti) = dejmps_branches(&n1, &n2);
    let xi = noise.xi;
    let w_same = (1.0 - xi).powi(2) + xi * xi;
    let w_flip = 2.0 * xi * (1.0 - xi);
    let mixed: [f64; 4] = std::array::from_fn(|g| w_same * coinc[g] + w_flip * anti[g]);
    let accepted: f64 = mixed.iter().sum();
    if accepted <= 0.0 {
        return Err(Error::DegenerateInput);
    }
    Ok(Distilled {
        state: BellDiagonal::from_array(mixed.map(|x| x / accepted)),
        success_prob: accepted,
    })
}

/// Shannon binary entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Asymptotic BB84 secret fraction `max(0, 1 − h(e_X) − h(e_Z))`.
pub fn key_fraction(s: &BellDiagonal) -> f64 {
    let r = 1.0 - binary_entropy(s.x_basis_error()) - binary_entropy(s.z_basis_error());
    r.max(0.0)
}
