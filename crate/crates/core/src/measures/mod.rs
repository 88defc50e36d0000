//! Gaussian-state correlation quantifiers in the vacuum = 1/2 convention.

mod discord;
mod nelder_mead;

pub use discord::{
    discord_objective, entropy_function, gaussian_discord, gaussian_discord_detailed, DiscordOutcome,
    DiscordSearch, MeasurementState,
};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};

use nalgebra::{DMatrix, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::dynamics::symplectic_form;
use crate::error::{MechError, Result};
use crate::steady_state::{CovarianceMatrix, VACUUM};

/// Tolerance on the symplectic floor ν ≥ 1/2.
pub const PHYSICAL_TOL: f64 = 1e-9;

/// Symplectic eigenvalues of a 2n×2n symmetric matrix, ascending.
pub fn symplectic_eigenvalues(v: &DMatrix<f64>) -> Result<Vec<f64>> {
    let dim = v.nrows();
    if !v.is_square() || dim % 2 != 0 || dim == 0 {
        return Err(MechError::Shape(format!("need a square even-dimensional matrix, got {:?}", v.shape())));
    }
    let asym = (v - v.transpose()).norm();
    if asym > 1e-9 * v.norm().max(1.0) {
        return Err(MechError::Shape(format!("matrix is not symmetric (‖V − Vᵀ‖ = {asym:e})")));
    }
    let n = dim / 2;
    let omega = symplectic_form(n);

    let mut squared: Vec<f64> = match v.clone().cholesky() {
        // V = LLᵀ makes ΩV similar to the antisymmetric LᵀΩL, whose
        // squared singular values are ν² (each twice).
        Some(ch) => {
            let l = ch.l();
            let k = l.transpose() * &omega * &l;
            (k.transpose() * &k).symmetric_eigenvalues().iter().map(|x| x.max(0.0)).collect()
        }
        None => crate::dynamics::eigenvalues(&(&omega * v))?.iter().map(|z| z.norm_sqr()).collect(),
    };
    squared.sort_by(f64::total_cmp);
    Ok(squared.chunks(2).map(|pair| (0.5 * (pair[0] + pair[1])).sqrt()).collect())
}

/// 4×4 covariance matrix of two modes in (q₁, p₁, q₂, p₂) order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoModeCm(Matrix4<f64>);

impl TwoModeCm {
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        let asym = (m - m.transpose()).norm();
        if asym > 1e-9 * m.norm().max(1.0) {
            return Err(MechError::Shape(format!("two-mode matrix not symmetric (‖V − Vᵀ‖ = {asym:e})")));
        }
        Ok(TwoModeCm((m + m.transpose()) * 0.5))
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.shape() != (4, 4) {
            return Err(MechError::Shape(format!("expected 4x4, got {:?}", m.shape())));
        }
        Self::new(Matrix4::from_fn(|i, j| m[(i, j)]))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(4, 4, |i, j| self.0[(i, j)])
    }

    pub fn alpha1(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn alpha2(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(2, 2).into_owned()
    }

    pub fn gamma(&self) -> Matrix2<f64> {
        self.0.fixed_view::<2, 2>(0, 2).into_owned()
    }

    /// P V P with P = diag(1, 1, 1, −1).
    pub fn partial_transpose(&self) -> Self {
        let p = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, 1.0, -1.0));
        TwoModeCm(p * self.0 * p)
    }

    /// (ν₋, ν₊) from the local-symplectic invariants.
    pub fn symplectic_pair(&self) -> (f64, f64) {
        let delta = self.alpha1().determinant() + self.alpha2().determinant() + 2.0 * self.gamma().determinant();
        let det = self.0.determinant();
        let disc = (delta * delta - 4.0 * det).max(0.0).sqrt();
        (((delta - disc) / 2.0).max(0.0).sqrt(), ((delta + disc) / 2.0).max(0.0).sqrt())
    }

    pub fn smallest_symplectic(&self) -> f64 {
        symplectic_eigenvalues(&self.to_dmatrix()).map(|nu| nu[0]).unwrap_or(f64::NAN)
    }

    pub fn require_physical(&self) -> Result<()> {
        let nu = self.smallest_symplectic();
        if nu >= VACUUM - PHYSICAL_TOL {
            Ok(())
        } else {
            Err(MechError::Unphysical { min_symplectic: nu })
        }
    }
}

impl TryFrom<&CovarianceMatrix> for TwoModeCm {
    type Error = MechError;

    fn try_from(v: &CovarianceMatrix) -> Result<Self> {
        Self::from_dmatrix(v.matrix())
    }
}

/// E = max(0, −ln 2ν̃₋) with ν̃₋ the smallest symplectic eigenvalue of the
/// partially transposed state.
pub fn log_negativity(v: &TwoModeCm) -> Result<f64> {
    v.require_physical()?;
    let nu = v.partial_transpose().smallest_symplectic();
    Ok((-(2.0 * nu).ln()).max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalityReport {
    pub symmetric: bool,
    pub symmetry_error: f64,
    pub min_symplectic: f64,
    pub physical: bool,
    /// Smallest symplectic eigenvalue after partial transposition (two-mode only).
    pub ppt_min_symplectic: Option<f64>,
    pub entangled: Option<bool>,
}

pub fn validate_physical(v: &DMatrix<f64>) -> PhysicalityReport {
    let symmetry_error = if v.is_square() { (v - v.transpose()).norm() } else { f64::INFINITY };
    let symmetric = symmetry_error <= 1e-9 * v.norm().max(1.0);
    let min_symplectic = if symmetric {
        symplectic_eigenvalues(v).map(|nu| nu[0]).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    let physical = min_symplectic >= VACUUM - PHYSICAL_TOL;
    let ppt = if symmetric && v.shape() == (4, 4) {
        TwoModeCm::from_dmatrix(v).ok().map(|cm| cm.partial_transpose().smallest_symplectic())
    } else {
        None
    };
    PhysicalityReport {
        symmetric,
        symmetry_error,
        min_symplectic,
        physical,
        ppt_min_symplectic: ppt,
        entangled: ppt.map(|nu| physical && nu < VACUUM),
    }
}

/// Two-mode squeezed vacuum at squeezing r.
pub fn two_mode_squeezed_vacuum(r: f64) -> TwoModeCm {
    let c = (2.0 * r).cosh() / 2.0;
    let s = (2.0 * r).sinh() / 2.0;
    TwoModeCm(Matrix4::new(
        c, 0.0, s, 0.0,
        0.0, c, 0.0, -s,
        s, 0.0, c, 0.0,
        0.0, -s, 0.0, c,
    ))
}

/// Product of thermal states with occupancies n1, n2.
pub fn product_thermal(n1: f64, n2: f64) -> TwoModeCm {
    TwoModeCm(Matrix4::from_diagonal(&nalgebra::Vector4::new(n1 + 0.5, n1 + 0.5, n2 + 0.5, n2 + 0.5)))
}
