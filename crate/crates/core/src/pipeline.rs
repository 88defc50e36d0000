//! Parameters → steady state → correlation measures for one operating point.

use serde::{Deserialize, Serialize};

use crate::dynamics::{build_diffusion, build_drift, check_stability, DiffusionSpec, DriftMatrix, SqueezeConvention};
use crate::error::{MechError, Result};
use crate::measures::{gaussian_discord_detailed, log_negativity, DiscordSearch, TwoModeCm};
use crate::params::{derive, DerivedParams, PhysicalParams};
use crate::steady_state::{extract_mechanical, solve_periodic, PeriodicSteadyState};

/// Samples per modulation period used for the mean/min/max of each measure.
pub const PERIOD_SAMPLES: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOptions {
    pub convention: SqueezeConvention,
    pub samples: usize,
    pub discord: bool,
    pub search: DiscordSearch,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            convention: SqueezeConvention::default(),
            samples: PERIOD_SAMPLES,
            discord: false,
            search: DiscordSearch::default(),
        }
    }
}

/// Correlations of the mirror pair. Measures are `None` at unstable points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub stable: bool,
    pub max_re_eigenvalue: f64,
    pub e_mean: Option<f64>,
    pub e_min: Option<f64>,
    pub e_max: Option<f64>,
    pub d_mean: Option<f64>,
    pub lyapunov_residual: Option<f64>,
    pub harmonic_residual: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub derived: DerivedParams,
    pub drift: DriftMatrix,
    pub diffusion: DiffusionSpec,
    pub steady: PeriodicSteadyState,
}

pub fn prepare(params: &PhysicalParams, convention: SqueezeConvention) -> Result<Prepared> {
    let derived = derive(params)?;
    let drift = build_drift(&derived);
    let diffusion = build_diffusion(&derived, convention);
    let steady = solve_periodic(&drift, &diffusion)?;
    Ok(Prepared { derived, drift, diffusion, steady })
}

/// Mechanical two-mode states at `n` uniform times over one period. A state
/// without a harmonic part is returned once.
pub fn mechanical_samples(steady: &PeriodicSteadyState, n: usize) -> Result<Vec<TwoModeCm>> {
    if n == 0 {
        return Err(MechError::Config("need at least one period sample".into()));
    }
    let n = if steady.has_harmonic() { n } else { 1 };
    steady
        .sample_period(n)
        .iter()
        .map(|(_, v)| TwoModeCm::try_from(&extract_mechanical(v)?))
        .collect()
}

fn stats(values: &[f64]) -> (f64, f64, f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, min, max)
}

pub fn evaluate(params: &PhysicalParams, opts: &PipelineOptions) -> Result<CorrelationResult> {
    let derived = derive(params)?;
    let drift = build_drift(&derived);
    let report = check_stability(&drift);
    if !report.stable {
        return Ok(CorrelationResult {
            stable: false,
            max_re_eigenvalue: report.max_real_part,
            e_mean: None,
            e_min: None,
            e_max: None,
            d_mean: None,
            lyapunov_residual: None,
            harmonic_residual: None,
        });
    }
    let diffusion = build_diffusion(&derived, opts.convention);
    let steady = solve_periodic(&drift, &diffusion)?;
    let states = mechanical_samples(&steady, opts.samples)?;

    let negativities = states.iter().map(log_negativity).collect::<Result<Vec<_>>>()?;
    let (e_mean, e_min, e_max) = stats(&negativities);
    let d_mean = if opts.discord {
        let discords = states
            .iter()
            .map(|v| gaussian_discord_detailed(v, &opts.search).map(|o| o.value))
            .collect::<Result<Vec<_>>>()?;
        Some(stats(&discords).0)
    } else {
        None
    };
    Ok(CorrelationResult {
        stable: true,
        max_re_eigenvalue: report.max_real_part,
        e_mean: Some(e_mean),
        e_min: Some(e_min),
        e_max: Some(e_max),
        d_mean,
        lyapunov_residual: Some(steady.lyapunov_residual),
        harmonic_residual: Some(steady.harmonic_residual),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_discord() -> PipelineOptions {
        PipelineOptions { discord: true, ..Default::default() }
    }

    #[test]
    fn no_squeezing_no_correlations() {
        let res = evaluate(&PhysicalParams::reference().with_squeezing(0.0), &with_discord()).unwrap();
        assert!(res.stable);
        assert_eq!(res.e_max, Some(0.0));
        assert!(res.d_mean.unwrap().abs() < 1e-9);
    }

    #[test]
    fn reference_point_is_entangled() {
        let res = evaluate(&PhysicalParams::reference(), &PipelineOptions::default()).unwrap();
        let (lo, mean, hi) = (res.e_min.unwrap(), res.e_mean.unwrap(), res.e_max.unwrap());
        assert!(mean > 0.1, "{res:?}");
        assert!(lo <= mean && mean <= hi);
        assert!(res.d_mean.is_none());
        assert!(res.lyapunov_residual.unwrap() <= 1e-10);
    }

    #[test]
    fn discord_survives_at_elevated_temperature() {
        let p = PhysicalParams::reference().with_squeezing(2.0).with_temperature(0.12);
        let res = evaluate(&p, &with_discord()).unwrap();
        assert_eq!(res.e_max, Some(0.0));
        assert!(res.d_mean.unwrap() > 0.0);
    }

    #[test]
    fn blue_detuning_is_reported_unstable() {
        let p = PhysicalParams::reference().with_detuning_ratio(-1.0);
        let res = evaluate(&p, &PipelineOptions::default()).unwrap();
        assert!(!res.stable && res.max_re_eigenvalue > 0.0);
        assert!(res.e_mean.is_none() && res.lyapunov_residual.is_none());
    }

    #[test]
    fn static_convention_is_time_independent() {
        let opts = PipelineOptions { convention: SqueezeConvention::Static, ..Default::default() };
        let res = evaluate(&PhysicalParams::reference(), &opts).unwrap();
        assert_eq!(res.e_min, res.e_max);
    }

    #[test]
    fn invalid_parameters_are_config_errors() {
        let mut p = PhysicalParams::reference();
        p.mass = -1.0;
        assert!(evaluate(&p, &PipelineOptions::default()).unwrap_err().is_config_error());
    }
}
