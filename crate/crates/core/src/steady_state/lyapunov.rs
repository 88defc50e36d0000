//! Dense Kronecker-vectorized solvers for L·X + X·R + C = 0.
//!
//! The systems here are 8×8, so the 64-unknown LU solve is both the
//! simplest and the most accurate route.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::dynamics::{check_stability, DriftMatrix};
use crate::error::{MechError, Result};

/// Largest accepted residual ‖L X + X R + C‖_F / ‖C‖_F.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Solved<M> {
    pub solution: M,
    pub relative_residual: f64,
}

fn condition_estimate<T: ComplexField<RealField = f64>>(k: &DMatrix<T>) -> f64 {
    let sv = k.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves L·X + X·R = −C.
pub(crate) fn sylvester<T>(l: &DMatrix<T>, r: &DMatrix<T>, c: &DMatrix<T>) -> Result<Solved<DMatrix<T>>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = l.nrows();
    if !l.is_square() || r.shape() != (n, n) || c.shape() != (n, n) {
        return Err(MechError::Shape(format!(
            "sylvester operands must be {n}x{n}: L {:?}, R {:?}, C {:?}",
            l.shape(),
            r.shape(),
            c.shape()
        )));
    }
    let c_norm = c.norm();
    if c_norm == 0.0 {
        return Ok(Solved { solution: DMatrix::zeros(n, n), relative_residual: 0.0 });
    }

    let eye = DMatrix::<T>::identity(n, n);
    let k = eye.kronecker(l) + r.transpose().kronecker(&eye);
    let rhs = DVector::from_column_slice(c.as_slice()).map(|z| -z);
    let x = match k.clone().lu().solve(&rhs) {
        Some(x) => x,
        None => return Err(MechError::Conditioning { condition: condition_estimate(&k) }),
    };
    let solution = DMatrix::from_column_slice(n, n, x.as_slice());
    let relative_residual = (l * &solution + &solution * r + c).norm() / c_norm;
    if !(relative_residual <= RESIDUAL_TOL) {
        return Err(MechError::Conditioning { condition: condition_estimate(&k) });
    }
    Ok(Solved { solution, relative_residual })
}

fn require_stable(a: &DriftMatrix) -> Result<()> {
    let report = check_stability(a);
    if report.stable {
        Ok(())
    } else {
        Err(MechError::Unstable { max_real_part: report.max_real_part })
    }
}

/// Stationary covariance: A·V + V·Aᵀ + D = 0.
pub fn solve_lyapunov(a: &DriftMatrix, d0: &DMatrix<f64>) -> Result<Solved<DMatrix<f64>>> {
    require_stable(a)?;
    let am = a.matrix();
    let mut out = sylvester(am, &am.transpose(), d0)?;
    out.solution = (&out.solution + out.solution.transpose()) * 0.5;
    Ok(out)
}

/// Harmonic part of the periodic covariance:
/// (A + i·mod_freq·I)·V2 + V2·Aᵀ + D2 = 0.
pub fn solve_harmonic(a: &DriftMatrix, d2: &DMatrix<Complex64>, mod_freq: f64) -> Result<Solved<DMatrix<Complex64>>> {
    if !(mod_freq > 0.0 && mod_freq.is_finite()) {
        return Err(MechError::invalid("mod_freq", format!("must be > 0, got {mod_freq}")));
    }
    require_stable(a)?;
    let n = a.dim();
    let ac = a.matrix().map(|x| Complex64::new(x, 0.0));
    let shifted = &ac + DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.0, mod_freq);
    let mut out = sylvester(&shifted, &ac.transpose(), d2)?;
    out.solution = (&out.solution + out.solution.transpose()) * Complex64::new(0.5, 0.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_diffusion, build_drift, SqueezeConvention};
    use crate::params::{derive, PhysicalParams};

    fn scalar_decay() -> DriftMatrix {
        DriftMatrix::from_matrix(DMatrix::identity(8, 8) * -0.5).unwrap()
    }

    #[test]
    fn scalar_balance() {
        let out = solve_lyapunov(&scalar_decay(), &DMatrix::identity(8, 8)).unwrap();
        assert!((out.solution - DMatrix::<f64>::identity(8, 8)).norm() < 1e-14);
    }

    #[test]
    fn zero_diffusion_gives_zero() {
        let out = solve_lyapunov(&scalar_decay(), &DMatrix::zeros(8, 8)).unwrap();
        assert_eq!(out.solution, DMatrix::zeros(8, 8));
        let h = solve_harmonic(&scalar_decay(), &DMatrix::zeros(8, 8), 2.0).unwrap();
        assert_eq!(h.solution, DMatrix::zeros(8, 8));
    }

    #[test]
    fn unstable_drift_is_rejected() {
        let a = DriftMatrix::from_matrix(DMatrix::identity(8, 8) * 0.1).unwrap();
        assert!(matches!(solve_lyapunov(&a, &DMatrix::identity(8, 8)), Err(MechError::Unstable { .. })));
    }

    #[test]
    fn harmonic_rejects_bad_frequency() {
        let d2 = DMatrix::identity(8, 8).map(|x: f64| Complex64::new(x, 0.0));
        assert!(solve_harmonic(&scalar_decay(), &d2, 0.0).is_err());
    }

    #[test]
    fn reference_residuals_meet_tolerance() {
        for r in [0.0, 1.0, 2.0] {
            let d = derive(&PhysicalParams::reference().with_squeezing(r)).unwrap();
            let a = build_drift(&d);
            let diff = build_diffusion(&d, SqueezeConvention::Rotating);
            let v0 = solve_lyapunov(&a, &diff.d0).unwrap();
            assert!(v0.relative_residual <= RESIDUAL_TOL);
            let v2 = solve_harmonic(&a, &diff.d2, diff.mod_freq).unwrap();
            assert!(v2.relative_residual <= RESIDUAL_TOL);
            if r > 0.0 {
                assert!(v2.solution.norm() > 0.0);
            }
        }
    }

    #[test]
    fn singular_system_reports_condition() {
        // A with a zero eigenvalue pair summing to zero: λ = ±i makes A ⊕ A singular.
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = -1.0;
        let err = sylvester(&a, &a.transpose(), &DMatrix::identity(2, 2)).unwrap_err();
        assert!(matches!(err, MechError::Conditioning { .. }), "{err:?}");
    }
}
