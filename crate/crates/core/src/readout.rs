//! All-optical readout: the mirror state is swapped onto two ancilla cavity
//! modes (initially in vacuum) and their entanglement is tracked in time.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{build_diffusion, build_drift, check_stability, QuadratureBasis, SqueezeConvention, DIM};
use crate::error::{MechError, Result};
use crate::measures::{log_negativity, TwoModeCm};
use crate::output::{fmt_f64, LogBase};
use crate::params::{derive, DerivedParams, PhysicalParams};
use crate::steady_state::{extract_mechanical, extract_optical, solve_lyapunov, solve_periodic, CovarianceMatrix, VACUUM};

/// Mechanical rows/columns (δQ₁, δP₁, δQ₂, δP₂) in the device-major basis.
const MECH_INDEX: [usize; 4] = [QuadratureBasis::MECH_1[0], QuadratureBasis::MECH_1[1], QuadratureBasis::MECH_2[0], QuadratureBasis::MECH_2[1]];
const GOLDEN_ITERATIONS: usize = 60;

#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutConfig {
    /// Parameters of the readout devices. Squeezing is ignored: the ancilla
    /// inputs are vacuum.
    pub ancilla: DerivedParams,
    pub t_max: f64,
    pub n_samples: usize,
}

impl ReadoutConfig {
    pub const DEFAULT_SAMPLES: usize = 256;
    /// Default duration in units of 1/κ.
    pub const DEFAULT_DURATION: f64 = 10.0;

    /// Ancillas identical to the preparation cavities.
    pub fn matching(device: &DerivedParams) -> Self {
        ReadoutConfig {
            ancilla: device.without_squeezing(),
            t_max: Self::DEFAULT_DURATION / device.kappa,
            n_samples: Self::DEFAULT_SAMPLES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(MechError::Config(format!("readout t_max must be > 0, got {}", self.t_max)));
        }
        if self.n_samples < 16 {
            return Err(MechError::Config(format!("readout needs n_samples >= 16, got {}", self.n_samples)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutCurve {
    pub times: Vec<f64>,
    pub e_out: Vec<f64>,
    /// Maximum of E over [0, t_max], refined between grid points.
    pub e_peak: f64,
    pub t_star: f64,
}

/// Exact solution of V̇ = LV + VLᵀ + D from V(0):
/// V(t) = V∞ + e^{Lt}(V(0) − V∞)e^{Lᵀt}.
struct AffineFlow {
    l: DMatrix<f64>,
    v_inf: DMatrix<f64>,
    offset: DMatrix<f64>,
}

impl AffineFlow {
    fn at(&self, t: f64) -> DMatrix<f64> {
        let phi = (&self.l * t).exp();
        self.state(&phi)
    }

    fn state(&self, phi: &DMatrix<f64>) -> DMatrix<f64> {
        let v = &self.v_inf + phi * &self.offset * phi.transpose();
        (&v + v.transpose()) * 0.5
    }
}

fn ancilla_negativity(v: &DMatrix<f64>) -> Result<f64> {
    let full = CovarianceMatrix::device_major(v.clone())?;
    log_negativity(&TwoModeCm::try_from(&extract_optical(&full)?)?)
}

/// Eight-mode initial state: mirrors in `v_mech`, ancillas in vacuum,
/// no mirror–ancilla correlations.
pub fn initial_state(v_mech: &TwoModeCm) -> DMatrix<f64> {
    let mut v = DMatrix::identity(DIM, DIM) * VACUUM;
    for (a, &i) in MECH_INDEX.iter().enumerate() {
        for (b, &j) in MECH_INDEX.iter().enumerate() {
            v[(i, j)] = v_mech.matrix()[(a, b)];
        }
    }
    v
}

pub fn readout_propagate(v_mech: &TwoModeCm, cfg: &ReadoutConfig) -> Result<ReadoutCurve> {
    cfg.validate()?;
    v_mech.require_physical()?;
    let ancilla = cfg.ancilla.without_squeezing();
    let drift = build_drift(&ancilla);
    let report = check_stability(&drift);
    if !report.stable {
        return Err(MechError::Unstable { max_real_part: report.max_real_part });
    }
    let noise = build_diffusion(&ancilla, SqueezeConvention::Rotating).d0;
    let v_inf = solve_lyapunov(&drift, &noise)?.solution;
    let flow = AffineFlow { offset: initial_state(v_mech) - &v_inf, l: drift.matrix().clone(), v_inf };

    let h = cfg.t_max / cfg.n_samples as f64;
    let step = (&flow.l * h).exp();
    let mut phi = DMatrix::identity(DIM, DIM);
    let mut times = Vec::with_capacity(cfg.n_samples + 1);
    let mut e_out = Vec::with_capacity(cfg.n_samples + 1);
    for k in 0..=cfg.n_samples {
        times.push(k as f64 * h);
        e_out.push(ancilla_negativity(&flow.state(&phi))?);
        phi = &step * phi;
    }

    let (k_best, &e_best) = e_out
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("time grid is never empty");
    if e_best <= 0.0 {
        return Ok(ReadoutCurve { times, e_out, e_peak: 0.0, t_star: 0.0 });
    }
    let lo = times[k_best.saturating_sub(1)];
    let hi = times[(k_best + 1).min(cfg.n_samples)];
    let (t_star, e_peak) = golden_max(|t| ancilla_negativity(&flow.at(t)), lo, hi)?;
    let (t_star, e_peak) = if e_peak >= e_best { (t_star, e_peak) } else { (times[k_best], e_best) };
    Ok(ReadoutCurve { times, e_out, e_peak, t_star })
}

fn golden_max<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..GOLDEN_ITERATIONS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputOutputPoint {
    pub r: f64,
    pub e_in: f64,
    pub e_out: f64,
    pub t_star: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutOptions {
    pub convention: SqueezeConvention,
    /// Readout duration in units of 1/κ.
    pub duration: f64,
    pub n_samples: usize,
}

impl Default for ReadoutOptions {
    fn default() -> Self {
        ReadoutOptions {
            convention: SqueezeConvention::default(),
            duration: ReadoutConfig::DEFAULT_DURATION,
            n_samples: ReadoutConfig::DEFAULT_SAMPLES,
        }
    }
}

/// Prepared mirror state at t = 0 of the modulation period.
pub fn prepared_state(params: &PhysicalParams, convention: SqueezeConvention) -> Result<(DerivedParams, TwoModeCm)> {
    let derived = derive(params)?;
    let drift = build_drift(&derived);
    let steady = solve_periodic(&drift, &build_diffusion(&derived, convention))?;
    let mech = TwoModeCm::try_from(&extract_mechanical(&steady.sample(0.0))?)?;
    Ok((derived, mech))
}

pub fn io_point(params: &PhysicalParams, opts: &ReadoutOptions) -> Result<InputOutputPoint> {
    let (derived, mech) = prepared_state(params, opts.convention)?;
    let e_in = log_negativity(&mech)?;
    let cfg = ReadoutConfig { t_max: opts.duration / derived.kappa, n_samples: opts.n_samples, ..ReadoutConfig::matching(&derived) };
    let curve = readout_propagate(&mech, &cfg)?;
    Ok(InputOutputPoint { r: params.squeezing_r, e_in, e_out: curve.e_peak, t_star: curve.t_star })
}

/// One point per squeezing value, evaluated in parallel on the current
/// rayon pool and returned in grid order.
pub fn io_curve(base: &PhysicalParams, r_grid: &[f64], opts: &ReadoutOptions) -> Result<Vec<InputOutputPoint>> {
    if r_grid.is_empty() {
        return Err(MechError::Config("r grid is empty".into()));
    }
    if let Some(r) = r_grid.iter().find(|r| !(0.0..=2.0).contains(*r)) {
        return Err(MechError::Config(format!("squeezing {r} outside [0, 2]")));
    }
    r_grid.par_iter().map(|&r| io_point(&base.clone().with_squeezing(r), opts)).collect()
}

/// Evenly spaced grid from `a:b:n`.
pub fn parse_r_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || MechError::Config(format!("r grid must look like a:b:n, got {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, n] = parts.as_slice() else { return Err(bad()) };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    match n {
        0 => Err(bad()),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least squares of E_out on E_in over points with E_in > 0.
pub fn linear_fit(points: &[InputOutputPoint]) -> Result<FitSummary> {
    let used: Vec<(f64, f64)> = points.iter().filter(|p| p.e_in > 0.0).map(|p| (p.e_in, p.e_out)).collect();
    let n = used.len();
    if n < 5 {
        return Err(MechError::Fit(format!("need at least 5 points with E_in > 0, got {n}")));
    }
    let mean_x = used.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let mean_y = used.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = used.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx <= f64::EPSILON * mean_x * mean_x * n as f64 {
        return Err(MechError::Fit("all E_in values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = used.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = used.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    // Spread at rounding level counts as constant output.
    let noise_floor = n as f64 * (8.0 * f64::EPSILON * mean_y.abs()).powi(2);
    let r_squared = if ss_tot > noise_floor { 1.0 - ss_res / ss_tot } else { 0.0 };
    Ok(FitSummary { slope, intercept, r_squared, n_points: n })
}

pub fn write_io_csv<W: Write>(points: &[InputOutputPoint], base: LogBase, header: &[String], mut out: W) -> Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "# entanglement unit: {}", base.label())?;
    writeln!(out, "r,e_in,e_out,t_star")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(p.r),
            fmt_f64(base.convert(p.e_in)),
            fmt_f64(base.convert(p.e_out)),
            fmt_f64(p.t_star)
        )?;
    }
    Ok(())
}
