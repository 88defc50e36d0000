//! Drift and diffusion of the two linearized optomechanical devices.
//!
//! Every 8×8 matrix uses the device-major [`QuadratureBasis`] ordering
//! (δQ₁, δP₁, δx₁, δy₁, δQ₂, δP₂, δx₂, δy₂).

use std::fmt;
use std::str::FromStr;

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::MechError;
use crate::params::DerivedParams;

pub const N_MODES: usize = 4;
pub const DIM: usize = 2 * N_MODES;

/// Fixed quadrature ordering shared by every matrix in the crate.
pub struct QuadratureBasis;

impl QuadratureBasis {
    pub const LABELS: [&'static str; DIM] = ["dQ1", "dP1", "dx1", "dy1", "dQ2", "dP2", "dx2", "dy2"];

    pub const MECH_1: [usize; 2] = [0, 1];
    pub const OPT_1: [usize; 2] = [2, 3];
    pub const MECH_2: [usize; 2] = [4, 5];
    pub const OPT_2: [usize; 2] = [6, 7];

    pub fn labels() -> Vec<String> {
        Self::LABELS.iter().map(|s| s.to_string()).collect()
    }
}

/// Ω = ⊕ [[0, 1], [−1, 0]] over `n_modes` modes.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Phase dependence of the squeezed-drive cross correlation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SqueezeConvention {
    /// ⟨c₁c₂⟩ ∝ M e^{−2iω_m t}: carrier at ω_L + ω_m seen from the laser frame.
    #[default]
    Rotating,
    /// ⟨c₁c₂⟩ ∝ M with no time dependence.
    Static,
}

impl fmt::Display for SqueezeConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SqueezeConvention::Rotating => f.write_str("rotating"),
            SqueezeConvention::Static => f.write_str("static"),
        }
    }
}

impl FromStr for SqueezeConvention {
    type Err = MechError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "rotating" => Ok(SqueezeConvention::Rotating),
            "static" => Ok(SqueezeConvention::Static),
            other => Err(MechError::Config(format!(
                "unknown squeeze_phase_convention `{other}` (expected rotating|static)"
            ))),
        }
    }
}

/// Linear kernel A = K₁ ⊕ K₂ of the fluctuation equations.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftMatrix(DMatrix<f64>);

impl DriftMatrix {
    /// Wraps an arbitrary square matrix; used by tests and by callers that
    /// assemble their own kernels.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self, MechError> {
        if !m.is_square() {
            return Err(MechError::Shape(format!("drift must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        Ok(DriftMatrix(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// 4×4 kernel of one device in (δQ, δP, δx, δy).
pub fn device_kernel(d: &DerivedParams) -> Matrix4<f64> {
    let re = 2.0 * d.g * d.c_s.re;
    let im = 2.0 * d.g * d.c_s.im;
    // Row 2 carries +2g Im c_s so that the coupling derives from the
    // quadratic Hamiltonian −Q(Re·x + Im·y) that also gives rows 3 and 4.
    Matrix4::new(
        0.0, d.omega_m, 0.0, 0.0,
        -d.omega_m, -d.gamma_m, re, im,
        -im, 0.0, -d.kappa, d.delta,
        re, 0.0, -d.delta, -d.kappa,
    )
}

pub fn build_drift(d: &DerivedParams) -> DriftMatrix {
    let k = device_kernel(d);
    let mut a = DMatrix::zeros(DIM, DIM);
    a.view_mut((0, 0), (4, 4)).copy_from(&k);
    a.view_mut((4, 4), (4, 4)).copy_from(&k);
    DriftMatrix(a)
}

/// Stationary diffusion plus its single 2ω_m harmonic:
/// D(t) = D0 + D2 e^{−i mod_freq t} + c.c.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionSpec {
    pub d0: DMatrix<f64>,
    pub d2: DMatrix<Complex64>,
    pub mod_freq: f64,
}

impl DiffusionSpec {
    /// Constant diffusion with no harmonic part.
    pub fn stationary(d0: DMatrix<f64>, mod_freq: f64) -> Self {
        let n = d0.nrows();
        DiffusionSpec { d0, d2: DMatrix::zeros(n, n), mod_freq }
    }

    pub fn has_harmonic(&self) -> bool {
        self.d2.iter().any(|z| z.norm() > 0.0)
    }

    pub fn at(&self, t: f64) -> DMatrix<f64> {
        let phase = Complex64::from_polar(1.0, -self.mod_freq * t);
        let mut d = self.d0.clone();
        for (out, z) in d.iter_mut().zip(self.d2.iter()) {
            *out += 2.0 * (z * phase).re;
        }
        d
    }
}

pub fn build_diffusion(d: &DerivedParams, convention: SqueezeConvention) -> DiffusionSpec {
    let mut d0 = DMatrix::zeros(DIM, DIM);
    let optical = 2.0 * d.kappa * (d.n_sq + 0.5);
    let thermal = d.gamma_m * (2.0 * d.nbar + 1.0);
    for base in [0, 4] {
        d0[(base + 1, base + 1)] = thermal;
        d0[(base + 2, base + 2)] = optical;
        d0[(base + 3, base + 3)] = optical;
    }

    let mut d2 = DMatrix::zeros(DIM, DIM);
    let m = d.m_sq;
    let (r1, r2) = (QuadratureBasis::OPT_1[0], QuadratureBasis::OPT_2[0]);
    match convention {
        SqueezeConvention::Rotating => {
            // Cross block 2κ[[Re μ, Im μ], [Im μ, −Re μ]] with μ = M e^{−2iω_m t};
            // its e^{−2iω_m t} coefficient is κM[[1, −i], [−i, −1]].
            let i = Complex64::i();
            let block = [[m, -i * m], [-i * m, -m]];
            for (a, row) in block.iter().enumerate() {
                for (b, &z) in row.iter().enumerate() {
                    let v = z * d.kappa;
                    d2[(r1 + a, r2 + b)] = v;
                    d2[(r2 + b, r1 + a)] = v;
                }
            }
        }
        SqueezeConvention::Static => {
            let block = [[m.re, m.im], [m.im, -m.re]];
            for (a, row) in block.iter().enumerate() {
                for (b, &v) in row.iter().enumerate() {
                    d0[(r1 + a, r2 + b)] = 2.0 * d.kappa * v;
                    d0[(r2 + b, r1 + a)] = 2.0 * d.kappa * v;
                }
            }
        }
    }

    DiffusionSpec { d0, d2, mod_freq: 2.0 * d.omega_m }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub max_real_part: f64,
    pub stable: bool,
}

/// Eigenvalues through a real Schur decomposition with an iteration cap;
/// the uncapped nalgebra routine can spin forever on degenerate input.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>, MechError> {
    if m.is_empty() || m.iter().all(|x| *x == 0.0) {
        return Ok(vec![Complex64::new(0.0, 0.0); m.nrows()]);
    }
    Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .map(|s| s.complex_eigenvalues().iter().copied().collect())
        .ok_or_else(|| MechError::Accuracy { message: "Schur iteration did not converge".into(), best: f64::NAN })
}

/// A drift whose spectrum cannot be computed is reported as unstable with a
/// NaN growth rate.
pub fn check_stability(a: &DriftMatrix) -> StabilityReport {
    let max_real_part = match eigenvalues(a.matrix()) {
        Ok(eig) => eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
        Err(_) => f64::NAN,
    };
    StabilityReport { max_real_part, stable: max_real_part < 0.0 }
}
