use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;

use super::{CovarianceMatrix, VACUUM};
use crate::dynamics::{DiffusionSpec, DriftMatrix};
use crate::error::{MechError, Result};
use crate::measures::symplectic_eigenvalues;
use crate::output::fmt_f64;

/// Symplectic eigenvalues below this floor trigger a warning.
const PHYSICAL_WARN_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Record every n-th step (1 records all).
    pub sample_every: usize,
    /// Steps before this time are integrated but not recorded.
    pub record_from: f64,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        IntegratorConfig { dt, t_final, sample_every: 1, record_from: 0.0 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CovarianceMatrix>,
    pub warnings: Vec<String>,
}

/// Largest admissible step: 1/50 of the shortest oscillation period or
/// decay time present in the drift and the diffusion modulation.
pub fn step_limit(a: &DriftMatrix, diffusion: &DiffusionSpec) -> f64 {
    // The matrix norm bounds every eigenvalue, so it is a safe fallback.
    let eig = crate::dynamics::eigenvalues(a.matrix())
        .unwrap_or_else(|_| vec![num_complex::Complex64::new(a.matrix().norm(), 0.0)]);
    let max_freq = eig.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let max_rate = eig.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let mut shortest = f64::INFINITY;
    if max_freq > 0.0 {
        shortest = shortest.min(2.0 * PI / max_freq);
    }
    if max_rate > 0.0 {
        shortest = shortest.min(1.0 / max_rate);
    }
    if diffusion.has_harmonic() && diffusion.mod_freq > 0.0 {
        shortest = shortest.min(2.0 * PI / diffusion.mod_freq);
    }
    shortest / 50.0
}

fn rhs(a: &DMatrix<f64>, at: &DMatrix<f64>, v: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    a * v + v * at + d
}

fn check_physical(v: &DMatrix<f64>, t: f64, warnings: &mut Vec<String>) {
    match symplectic_eigenvalues(v) {
        Ok(nu) if nu[0] < VACUUM - PHYSICAL_WARN_TOL => {
            warnings.push(format!("t = {t:e}: smallest symplectic eigenvalue {} below vacuum", nu[0]));
        }
        Ok(_) => {}
        Err(e) => warnings.push(format!("t = {t:e}: {e}")),
    }
}

/// Integrates V̇ = AV + VAᵀ + D(t) from t = 0 with classical RK4,
/// symmetrizing after every step.
pub fn propagate(
    a: &DriftMatrix,
    diffusion: &DiffusionSpec,
    v_init: &CovarianceMatrix,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let n = a.dim();
    if v_init.matrix().nrows() != n || diffusion.d0.nrows() != n {
        return Err(MechError::Shape(format!(
            "drift {n}x{n}, diffusion {0}x{0}, initial state {1}x{1}",
            diffusion.d0.nrows(),
            v_init.matrix().nrows()
        )));
    }
    if !(cfg.t_final > 0.0 && cfg.t_final.is_finite()) {
        return Err(MechError::Integrator(format!("t_final must be > 0, got {}", cfg.t_final)));
    }
    let limit = step_limit(a, diffusion);
    if !(cfg.dt > 0.0) || cfg.dt > limit {
        return Err(MechError::Integrator(format!("step {:e} outside (0, {limit:e}]", cfg.dt)));
    }
    if cfg.sample_every == 0 {
        return Err(MechError::Integrator("sample_every must be >= 1".into()));
    }

    let steps = (cfg.t_final / cfg.dt).ceil() as usize;
    let h = cfg.t_final / steps as f64;
    let am = a.matrix();
    let at = am.transpose();
    let harmonic = diffusion.has_harmonic();
    let d_at = |t: f64| if harmonic { diffusion.at(t) } else { diffusion.d0.clone() };

    let mut traj = Trajectory::default();
    let mut v = v_init.matrix().clone();
    check_physical(&v, 0.0, &mut traj.warnings);
    if cfg.record_from <= 0.0 {
        traj.times.push(0.0);
        traj.states.push(v_init.clone());
    }

    for k in 0..steps {
        let t = k as f64 * h;
        let d0 = d_at(t);
        let dm = d_at(t + 0.5 * h);
        let d1 = d_at(t + h);
        let k1 = rhs(am, &at, &v, &d0);
        let k2 = rhs(am, &at, &(&v + &k1 * (0.5 * h)), &dm);
        let k3 = rhs(am, &at, &(&v + &k2 * (0.5 * h)), &dm);
        let k4 = rhs(am, &at, &(&v + &k3 * h), &d1);
        v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        v = (&v + v.transpose()) * 0.5;

        let t_next = (k + 1) as f64 * h;
        if (k + 1) % cfg.sample_every == 0 && t_next >= cfg.record_from {
            check_physical(&v, t_next, &mut traj.warnings);
            traj.times.push(t_next);
            traj.states.push(CovarianceMatrix::new(v_init.basis().to_vec(), v.clone())?);
        }
    }
    Ok(traj)
}

/// CSV with `t` followed by the upper triangle of each state, columns
/// labelled `<row>:<col>`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    let Some(first) = traj.states.first() else {
        writeln!(out, "t")?;
        return Ok(());
    };
    let basis = first.basis();
    let n = basis.len();
    let mut header = vec!["t".to_string()];
    for i in 0..n {
        for j in i..n {
            header.push(format!("{}:{}", basis[i], basis[j]));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let m = state.matrix();
        let mut row = vec![fmt_f64(*t)];
        for i in 0..n {
            for j in i..n {
                row.push(fmt_f64(m[(i, j)]));
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
