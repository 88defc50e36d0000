//! Frequency-domain route to the stationary covariance,
//! V0 = (1/2π) ∫ T(ω) D0 T(ω)† dω with T(ω) = (iω − A)⁻¹,
//! integrated by globally adaptive 15-point Gauss–Kronrod.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::CovarianceMatrix;
use crate::dynamics::{check_stability, DriftMatrix, DIM};
use crate::error::{MechError, Result};

// Kronrod abscissae (descending) and weights; odd indices are the embedded
// 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid {
    /// Uniform panels on [−W, W] before adaptive refinement.
    pub initial_panels: usize,
    /// Stop when the summed error estimate falls below this fraction of ‖V0‖_F.
    pub rel_tol: f64,
    pub max_intervals: usize,
    /// W = cutoff_factor × (largest |eigenvalue| of A).
    pub cutoff_factor: f64,
}

impl Default for SpectralGrid {
    fn default() -> Self {
        SpectralGrid { initial_panels: 64, rel_tol: 1e-9, max_intervals: 50_000, cutoff_factor: 100.0 }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralOutcome {
    pub v0: CovarianceMatrix,
    pub error_estimate: f64,
    pub intervals: usize,
    pub cutoff: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Map {
    /// ω itself on [a, b].
    Direct,
    /// ω = W/u, u ∈ (0, 1].
    UpperTail,
    /// ω = −W/u, u ∈ (0, 1].
    LowerTail,
}

struct Panel {
    a: f64,
    b: f64,
    map: Map,
    value: DMatrix<f64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

struct Integrand<'a> {
    a: &'a DMatrix<Complex64>,
    d0: &'a DMatrix<Complex64>,
    cutoff: f64,
}

impl Integrand<'_> {
    /// Re[T(ω) D0 T(ω)†]; the imaginary part is odd in ω.
    fn at_omega(&self, omega: f64) -> Result<DMatrix<f64>> {
        let n = self.a.nrows();
        let m = DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.0, omega) - self.a;
        let t = m.try_inverse().ok_or(MechError::Conditioning { condition: f64::INFINITY })?;
        let f = &t * self.d0 * t.adjoint();
        Ok(f.map(|z| z.re))
    }

    fn eval(&self, map: Map, x: f64) -> Result<DMatrix<f64>> {
        match map {
            Map::Direct => self.at_omega(x),
            Map::UpperTail => Ok(self.at_omega(self.cutoff / x)? * (self.cutoff / (x * x))),
            Map::LowerTail => Ok(self.at_omega(-self.cutoff / x)? * (self.cutoff / (x * x))),
        }
    }

    fn panel(&self, a: f64, b: f64, map: Map) -> Result<Panel> {
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let fc = self.eval(map, center)?;
        let mut kronrod = &fc * WGK[7];
        let mut gauss = &fc * WG[3];
        for j in 0..7 {
            let dx = half * XGK[j];
            let f1 = self.eval(map, center - dx)?;
            let f2 = self.eval(map, center + dx)?;
            let sum = f1 + f2;
            kronrod += &sum * WGK[j];
            if j % 2 == 1 {
                gauss += &sum * WG[j / 2];
            }
        }
        kronrod *= half;
        gauss *= half;
        let error = (&kronrod - &gauss).norm();
        Ok(Panel { a, b, map, value: kronrod, error })
    }
}

pub fn spectral_oracle(a: &DriftMatrix, d0: &DMatrix<f64>, grid: &SpectralGrid) -> Result<SpectralOutcome> {
    let report = check_stability(a);
    if !report.stable {
        return Err(MechError::Unstable { max_real_part: report.max_real_part });
    }
    let n = a.dim();
    if d0.shape() != (n, n) {
        return Err(MechError::Shape(format!("diffusion {:?} vs drift {n}x{n}", d0.shape())));
    }
    if grid.initial_panels == 0 || !(grid.rel_tol > 0.0) || grid.cutoff_factor < 1.0 {
        return Err(MechError::Config(format!("invalid spectral grid {grid:?}")));
    }

    let eig = crate::dynamics::eigenvalues(a.matrix())?;
    let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let cutoff = grid.cutoff_factor * radius;

    // Uniform panels plus breakpoints at the resonances.
    let mut breaks: Vec<f64> = (0..=grid.initial_panels)
        .map(|k| -cutoff + 2.0 * cutoff * k as f64 / grid.initial_panels as f64)
        .collect();
    breaks.push(0.0);
    for z in eig.iter() {
        breaks.push(z.im);
        breaks.push(-z.im);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * cutoff);

    let integrand = Integrand {
        a: &a.matrix().map(|x| Complex64::new(x, 0.0)),
        d0: &d0.map(|x| Complex64::new(x, 0.0)),
        cutoff,
    };

    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        heap.push(integrand.panel(w[0], w[1], Map::Direct)?);
    }
    heap.push(integrand.panel(0.0, 1.0, Map::UpperTail)?);
    heap.push(integrand.panel(0.0, 1.0, Map::LowerTail)?);

    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut err = 0.0;
    for p in heap.iter() {
        sum += &p.value;
        err += p.error;
    }

    loop {
        let scale = sum.norm();
        if err <= grid.rel_tol * scale || scale == 0.0 {
            // Re-sum exactly; the running totals accumulate rounding.
            let mut exact = DMatrix::<f64>::zeros(n, n);
            let mut exact_err = 0.0;
            for p in heap.iter() {
                exact += &p.value;
                exact_err += p.error;
            }
            let v = (&exact + exact.transpose()) * (0.5 / (2.0 * PI));
            let v0 = if n == DIM { CovarianceMatrix::device_major(v)? } else { CovarianceMatrix::unlabelled(v)? };
            return Ok(SpectralOutcome { v0, error_estimate: exact_err / (2.0 * PI), intervals: heap.len(), cutoff });
        }
        if heap.len() >= grid.max_intervals {
            return Err(MechError::Accuracy {
                message: format!("spectral quadrature did not converge in {} intervals", heap.len()),
                best: err / scale,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let left = integrand.panel(worst.a, mid, worst.map)?;
        let right = integrand.panel(mid, worst.b, worst.map)?;
        sum += &left.value + &right.value - &worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_diffusion, build_drift, SqueezeConvention};
    use crate::params::{derive, PhysicalParams};
    use crate::steady_state::solve_lyapunov;

    #[test]
    fn kronrod_weights_integrate_polynomials() {
        // Kronrod rule is exact to degree 22, Gauss to 13 on [−1, 1].
        let sum = |w: &dyn Fn(usize) -> (f64, f64), k: u32| {
            let mut s = 0.0;
            for j in 0..8 {
                let (x, wt) = w(j);
                if x == 0.0 {
                    s += wt * if k == 0 { 1.0 } else { 0.0 };
                } else {
                    s += wt * (x.powi(k as i32) + (-x).powi(k as i32));
                }
            }
            s
        };
        for k in [0u32, 2, 10, 20] {
            let exact = 2.0 / (k as f64 + 1.0);
            let s = sum(&|j| (XGK[j], WGK[j]), k);
            assert!((s - exact).abs() < 1e-14, "k={k}: {s}");
        }
        let gauss = |k: i32| -> f64 {
            (0..4).map(|j| {
                let x = XGK[2 * j + 1];
                if x == 0.0 { WG[j] * if k == 0 { 1.0 } else { 0.0 } } else { WG[j] * (x.powi(k) + (-x).powi(k)) }
            }).sum()
        };
        for k in [0, 4, 12] {
            assert!((gauss(k) - 2.0 / (k as f64 + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn lorentzian_integral() {
        let a = DriftMatrix::from_matrix(DMatrix::identity(8, 8) * -0.5).unwrap();
        let out = spectral_oracle(&a, &DMatrix::identity(8, 8), &SpectralGrid::default()).unwrap();
        let err = (out.v0.matrix() - DMatrix::<f64>::identity(8, 8)).norm();
        assert!(err < 1e-8, "{err:e}");
    }

    #[test]
    fn agrees_with_lyapunov_without_squeezing() {
        let d = derive(&PhysicalParams::reference().with_squeezing(0.0)).unwrap();
        let a = build_drift(&d);
        let diff = build_diffusion(&d, SqueezeConvention::Rotating);
        let lyap = solve_lyapunov(&a, &diff.d0).unwrap().solution;
        let spec = spectral_oracle(&a, &diff.d0, &SpectralGrid::default()).unwrap();
        let rel = (spec.v0.matrix() - &lyap).norm() / lyap.norm();
        assert!(rel < 1e-4, "{rel:e}");
    }

    #[test]
    fn halving_the_initial_grid_changes_little() {
        let d = derive(&PhysicalParams::reference().with_squeezing(1.0)).unwrap();
        let a = build_drift(&d);
        let diff = build_diffusion(&d, SqueezeConvention::Rotating);
        let coarse = spectral_oracle(&a, &diff.d0, &SpectralGrid { initial_panels: 32, ..Default::default() }).unwrap();
        let fine = spectral_oracle(&a, &diff.d0, &SpectralGrid { initial_panels: 64, ..Default::default() }).unwrap();
        let rel = (coarse.v0.matrix() - fine.v0.matrix()).norm() / fine.v0.matrix().norm();
        assert!(rel < 1e-5, "{rel:e}");
    }

    #[test]
    fn runaway_refinement_is_an_accuracy_error() {
        let d = derive(&PhysicalParams::reference()).unwrap();
        let a = build_drift(&d);
        let diff = build_diffusion(&d, SqueezeConvention::Rotating);
        let grid = SpectralGrid { max_intervals: 80, rel_tol: 1e-14, ..Default::default() };
        assert!(matches!(spectral_oracle(&a, &diff.d0, &grid), Err(MechError::Accuracy { .. })));
    }
}
