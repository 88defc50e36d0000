//! Asymptotic covariance of the driven devices.
//!
//! The primary route is harmonic balance: with single-harmonic forcing the
//! long-time solution of V̇ = AV + VAᵀ + D(t) is exactly
//! V(t) = V0 + V2 e^{−iΩt} + c.c., where V0 solves a Lyapunov equation and
//! V2 a shifted Sylvester equation. RK4 propagation and a frequency-domain
//! quadrature are kept as independent checks.

mod lyapunov;
mod propagate;
mod spectral;

pub use lyapunov::{solve_harmonic, solve_lyapunov, Solved, RESIDUAL_TOL};
pub use propagate::{propagate, step_limit, write_trajectory_csv, IntegratorConfig, Trajectory};
pub use spectral::{spectral_oracle, SpectralGrid, SpectralOutcome};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DiffusionSpec, DriftMatrix, QuadratureBasis, DIM};
use crate::error::{MechError, Result};

/// Vacuum variance of a quadrature.
pub const VACUUM: f64 = 0.5;

/// Real symmetric second-moment matrix V_αβ = ⟨{g_α, g_β}⟩/2 over a
/// labelled quadrature basis.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix {
    basis: Vec<String>,
    matrix: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct CovarianceJson {
    basis: Vec<String>,
    matrix: Vec<Vec<f64>>,
    vacuum: f64,
}

impl CovarianceMatrix {
    pub fn new(basis: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if !matrix.is_square() || n % 2 != 0 || n == 0 {
            return Err(MechError::Shape(format!(
                "covariance matrix must be square with even dimension, got {}x{}",
                n,
                matrix.ncols()
            )));
        }
        if basis.len() != n {
            return Err(MechError::Shape(format!("{} basis labels for dimension {n}", basis.len())));
        }
        let asym = (&matrix - matrix.transpose()).norm();
        if asym > 1e-9 * matrix.norm().max(1.0) {
            return Err(MechError::Shape(format!("covariance matrix is not symmetric (‖V − Vᵀ‖ = {asym:e})")));
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(CovarianceMatrix { basis, matrix })
    }

    /// Generic labels q1, p1, q2, p2, ...
    pub fn unlabelled(matrix: DMatrix<f64>) -> Result<Self> {
        let basis = (0..matrix.nrows() / 2)
            .flat_map(|k| [format!("q{}", k + 1), format!("p{}", k + 1)])
            .collect();
        Self::new(basis, matrix)
    }

    /// Eight-mode matrix in device-major [`QuadratureBasis`] order.
    pub fn device_major(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(QuadratureBasis::labels(), matrix)
    }

    pub fn vacuum(n_modes: usize) -> Self {
        Self::unlabelled(DMatrix::identity(2 * n_modes, 2 * n_modes) * VACUUM).unwrap()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn basis(&self) -> &[String] {
        &self.basis
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Principal submatrix over the given rows/columns, in that order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.matrix.nrows()) {
            return Err(MechError::Shape(format!("index {bad} out of range")));
        }
        let m = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.matrix[(idx[i], idx[j])]);
        let basis = idx.iter().map(|&i| self.basis[i].clone()).collect();
        Self::new(basis, m)
    }

    pub fn to_json(&self) -> Result<String> {
        let rows = self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
        let json = CovarianceJson { basis: self.basis.clone(), matrix: rows, vacuum: VACUUM };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json: CovarianceJson = serde_json::from_str(text)?;
        if json.vacuum != VACUUM {
            return Err(MechError::Config(format!("unsupported vacuum convention {}", json.vacuum)));
        }
        let n = json.matrix.len();
        if json.matrix.iter().any(|r| r.len() != n) {
            return Err(MechError::Shape("ragged matrix rows".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| json.matrix[i][j]);
        Self::new(json.basis, m)
    }
}

/// V(t) = V0 + V2 e^{−i mod_freq t} + c.c.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicSteadyState {
    pub v0: CovarianceMatrix,
    pub v2: DMatrix<Complex64>,
    pub mod_freq: f64,
    pub lyapunov_residual: f64,
    pub harmonic_residual: f64,
}

impl PeriodicSteadyState {
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.mod_freq
    }

    pub fn sample_matrix(&self, t: f64) -> DMatrix<f64> {
        let phase = Complex64::from_polar(1.0, -self.mod_freq * t);
        let mut v = self.v0.matrix().clone();
        for (out, z) in v.iter_mut().zip(self.v2.iter()) {
            *out += 2.0 * (z * phase).re;
        }
        (&v + v.transpose()) * 0.5
    }

    pub fn sample(&self, t: f64) -> CovarianceMatrix {
        CovarianceMatrix { basis: self.v0.basis.clone(), matrix: self.sample_matrix(t) }
    }

    /// `n` uniformly spaced samples over one period, starting at t = 0.
    pub fn sample_period(&self, n: usize) -> Vec<(f64, CovarianceMatrix)> {
        let period = self.period();
        (0..n)
            .map(|k| {
                let t = k as f64 * period / n as f64;
                (t, self.sample(t))
            })
            .collect()
    }

    pub fn has_harmonic(&self) -> bool {
        self.v2.iter().any(|z| z.norm() > 0.0)
    }

    /// ‖dV/dt − (AV + VAᵀ + D(t))‖_F / ‖D(t)‖_F at time t.
    pub fn fixed_point_residual(&self, a: &DriftMatrix, diffusion: &DiffusionSpec, t: f64) -> f64 {
        let phase = Complex64::from_polar(1.0, -self.mod_freq * t);
        let i_omega = Complex64::new(0.0, -self.mod_freq);
        let mut vdot = DMatrix::zeros(self.v2.nrows(), self.v2.ncols());
        for (out, z) in vdot.iter_mut().zip(self.v2.iter()) {
            *out = 2.0 * (z * phase * i_omega).re;
        }
        let v = self.sample_matrix(t);
        let am = a.matrix();
        let d = diffusion.at(t);
        let rhs = am * &v + &v * am.transpose() + &d;
        (vdot - rhs).norm() / d.norm()
    }
}

/// Harmonic-balance solution of the periodically driven covariance equation.
pub fn solve_periodic(a: &DriftMatrix, diffusion: &DiffusionSpec) -> Result<PeriodicSteadyState> {
    let v0 = solve_lyapunov(a, &diffusion.d0)?;
    let v2 = solve_harmonic(a, &diffusion.d2, diffusion.mod_freq)?;
    let v0_cm = if a.dim() == DIM {
        CovarianceMatrix::device_major(v0.solution)?
    } else {
        CovarianceMatrix::unlabelled(v0.solution)?
    };
    Ok(PeriodicSteadyState {
        v0: v0_cm,
        v2: v2.solution,
        mod_freq: diffusion.mod_freq,
        lyapunov_residual: v0.relative_residual,
        harmonic_residual: v2.relative_residual,
    })
}

/// Device-major index order → (δQ₁, δP₁, δQ₂, δP₂, δx₁, δy₁, δx₂, δy₂).
pub const PAPER_ORDER: [usize; DIM] = [0, 1, 4, 5, 2, 3, 6, 7];

fn require_eight_modes(v: &CovarianceMatrix) -> Result<()> {
    if v.matrix().nrows() != DIM {
        return Err(MechError::Shape(format!(
            "expected an {DIM}x{DIM} device-major covariance matrix, got {}x{}",
            v.matrix().nrows(),
            v.matrix().ncols()
        )));
    }
    Ok(())
}

/// Reorders an eight-mode matrix to mechanical-first ordering.
pub fn to_mechanical_first(v: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    require_eight_modes(v)?;
    v.select(&PAPER_ORDER)
}

/// The two mirrors' 4×4 block (δQ₁, δP₁, δQ₂, δP₂).
pub fn extract_mechanical(v: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    require_eight_modes(v)?;
    to_mechanical_first(v)?.select(&[0, 1, 2, 3])
}

/// The two fields' 4×4 block (δx₁, δy₁, δx₂, δy₂).
pub fn extract_optical(v: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    require_eight_modes(v)?;
    to_mechanical_first(v)?.select(&[4, 5, 6, 7])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_diffusion, build_drift, SqueezeConvention};
    use crate::measures::symplectic_eigenvalues;
    use crate::params::{derive, PhysicalParams};

    fn periodic(r: f64, convention: SqueezeConvention) -> (DriftMatrix, DiffusionSpec, PeriodicSteadyState) {
        let d = derive(&PhysicalParams::reference().with_squeezing(r)).unwrap();
        let a = build_drift(&d);
        let diff = build_diffusion(&d, convention);
        let ss = solve_periodic(&a, &diff).unwrap();
        (a, diff, ss)
    }

    #[test]
    fn extracting_from_half_identity() {
        let v = CovarianceMatrix::device_major(DMatrix::identity(8, 8) * 0.5).unwrap();
        let m = extract_mechanical(&v).unwrap();
        assert_eq!(m.matrix(), &(DMatrix::identity(4, 4) * 0.5));
        assert_eq!(m.basis(), ["dQ1", "dP1", "dQ2", "dP2"]);
    }

    #[test]
    fn extraction_permutes_blocks() {
        let mut full = DMatrix::zeros(8, 8);
        let m1 = [[1.0, 0.2], [0.2, 2.0]];
        let m2 = [[3.0, -0.1], [-0.1, 4.0]];
        for i in 0..2 {
            for j in 0..2 {
                full[(i, j)] = m1[i][j];
                full[(4 + i, 4 + j)] = m2[i][j];
            }
        }
        for k in [2, 3, 6, 7] {
            full[(k, k)] = 9.0;
        }
        let out = extract_mechanical(&CovarianceMatrix::device_major(full).unwrap()).unwrap();
        let out = out.matrix();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(out[(i, j)], m1[i][j]);
                assert_eq!(out[(2 + i, 2 + j)], m2[i][j]);
                assert_eq!(out[(i, 2 + j)], 0.0);
            }
        }
    }

    #[test]
    fn extraction_rejects_wrong_dimension() {
        let v = CovarianceMatrix::vacuum(2);
        assert!(matches!(extract_mechanical(&v), Err(MechError::Shape(_))));
    }

    #[test]
    fn rejects_asymmetric_matrix() {
        let mut m = DMatrix::identity(4, 4);
        m[(0, 1)] = 0.3;
        assert!(CovarianceMatrix::unlabelled(m).is_err());
    }

    #[test]
    fn json_round_trip() {
        let (_, _, ss) = periodic(1.0, SqueezeConvention::Rotating);
        let json = ss.v0.to_json().unwrap();
        assert!(json.contains("\"vacuum\": 0.5"));
        let back = CovarianceMatrix::from_json(&json).unwrap();
        assert_eq!(back, ss.v0);
    }

    #[test]
    fn samples_are_symmetric_and_periodic() {
        let (_, _, ss) = periodic(1.0, SqueezeConvention::Rotating);
        let half_period = ss.period();
        for t in [0.0, 0.25 * half_period, 0.5 * half_period, 0.123e-7] {
            let v = ss.sample_matrix(t);
            assert!((&v - v.transpose()).norm() == 0.0);
            let w = ss.sample_matrix(t + half_period);
            assert!((&v - &w).norm() <= 1e-9 * v.norm());
        }
    }

    #[test]
    fn fixed_point_residual_over_one_period() {
        for r in [0.5, 2.0] {
            let (a, diff, ss) = periodic(r, SqueezeConvention::Rotating);
            for k in 0..16 {
                let t = k as f64 * ss.period() / 16.0;
                let res = ss.fixed_point_residual(&a, &diff, t);
                assert!(res <= 1e-8, "r={r} t={t}: {res:e}");
            }
        }
    }

    #[test]
    fn no_squeezing_leaves_mirrors_uncorrelated() {
        let (_, _, ss) = periodic(0.0, SqueezeConvention::Rotating);
        assert!(!ss.has_harmonic());
        let m = extract_mechanical(&ss.v0).unwrap();
        for i in 0..2 {
            for j in 2..4 {
                assert!(m.matrix()[(i, j)].abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn conventions_place_correlations_differently() {
        let (_, _, rot) = periodic(1.0, SqueezeConvention::Rotating);
        assert!(rot.has_harmonic());
        let (_, _, stat) = periodic(1.0, SqueezeConvention::Static);
        assert!(!stat.has_harmonic());
        let cross = stat.v0.matrix()[(2, 6)].abs();
        assert!(cross > 0.1, "{cross}");
    }

    #[test]
    fn reference_state_is_physical() {
        for r in [0.0, 1.0, 2.0] {
            let (_, _, ss) = periodic(r, SqueezeConvention::Rotating);
            for (_, v) in ss.sample_period(8) {
                let nu = symplectic_eigenvalues(v.matrix()).unwrap();
                assert!(nu[0] >= VACUUM - 1e-9, "r={r}: {nu:?}");
            }
        }
    }

    #[test]
    fn squeezing_correlates_the_mirrors() {
        let (_, _, ss) = periodic(1.0, SqueezeConvention::Rotating);
        let m = extract_mechanical(&ss.sample(0.0)).unwrap();
        let cross = m.matrix().view((0, 2), (2, 2)).norm();
        assert!(cross > 0.1, "{cross}");
    }
}
