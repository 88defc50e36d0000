//! Gaussian quantum discord with measurements on mode 2.
//!
//! Internally the state is rescaled to unit vacuum (σ = 2V), where the
//! entropy function f and its arguments ≥ 1 are defined.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Rotation2};
use serde::{Deserialize, Serialize};

use super::nelder_mead::{nelder_mead, NelderMeadOptions};
use super::TwoModeCm;
use crate::error::{MechError, Result};

/// Refinement never leaves |ln λ| ≤ this bound.
const LOG_LAMBDA_LIMIT: f64 = 30.0;
const NEGATIVE_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-14;

/// f(x) = ((x+1)/2) ln((x+1)/2) − ((x−1)/2) ln((x−1)/2), f(1) = 0.
pub fn entropy_function(x: f64) -> f64 {
    let x = x.max(1.0);
    let plus = 0.5 * (x + 1.0);
    let minus = 0.5 * (x - 1.0);
    let tail = if minus > 0.0 { minus * minus.ln() } else { 0.0 };
    plus * plus.ln() - tail
}

/// Rotated single-mode squeezed state R(θ) diag(λ, 1/λ) R(θ)ᵀ, unit vacuum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementState {
    pub lambda: f64,
    pub theta: f64,
}

impl MeasurementState {
    pub fn from_log(log_lambda: f64, theta: f64) -> Self {
        MeasurementState { lambda: log_lambda.exp(), theta: theta.rem_euclid(PI) }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        let r = Rotation2::new(self.theta).into_inner();
        r * Matrix2::new(self.lambda, 0.0, 0.0, 1.0 / self.lambda) * r.transpose()
    }
}

/// f(√det ε) for ε = α₁ − γ(α₂ + σ₀)⁻¹γᵀ on the unit-vacuum blocks.
pub fn discord_objective(v: &TwoModeCm, state: &MeasurementState) -> f64 {
    let a1 = v.alpha1() * 2.0;
    let a2 = v.alpha2() * 2.0;
    let g = v.gamma() * 2.0;
    // Invert in the measurement's own frame: there σ₀ is diagonal and the
    // determinant expands without cancelling terms of order λ or 1/λ.
    let r = Rotation2::new(state.theta).into_inner();
    let a2 = r.transpose() * a2 * r;
    let g = g * r;
    let (lam, mu) = (state.lambda, 1.0 / state.lambda);
    let (p, q, s) = (a2[(0, 0)], 0.5 * (a2[(0, 1)] + a2[(1, 0)]), a2[(1, 1)]);
    let det = (p * s - q * q + 1.0) + p * mu + s * lam;
    let inv = Matrix2::new(s + mu, -q, -q, p + lam) / det;
    let eps = a1 - g * inv * g.transpose();
    entropy_function(eps.determinant().max(0.0).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscordSearch {
    pub lambda_points: usize,
    pub theta_points: usize,
    /// Grid covers ln λ ∈ [−range, range].
    pub log_lambda_range: f64,
    pub refine: bool,
}

impl Default for DiscordSearch {
    fn default() -> Self {
        DiscordSearch { lambda_points: 64, theta_points: 32, log_lambda_range: 6.0, refine: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscordOutcome {
    pub value: f64,
    pub optimum: MeasurementState,
    /// inf f(√det ε) found by the search.
    pub infimum: f64,
    /// Best objective value on the coarse grid.
    pub grid_bound: f64,
}

fn grid_min(v: &TwoModeCm, search: &DiscordSearch) -> (f64, f64, f64) {
    let mut best: (f64, f64, f64) = (f64::INFINITY, 0.0, 0.0);
    for i in 0..search.lambda_points {
        let log_lambda = if search.lambda_points == 1 {
            0.0
        } else {
            -search.log_lambda_range + 2.0 * search.log_lambda_range * i as f64 / (search.lambda_points - 1) as f64
        };
        for j in 0..search.theta_points {
            let theta = PI * j as f64 / search.theta_points as f64;
            let h = discord_objective(v, &MeasurementState::from_log(log_lambda, theta));
            let better = h < best.0 - TIE_TOL || (h <= best.0 + TIE_TOL && log_lambda.abs() < best.1.abs());
            if better {
                best = (h, log_lambda, theta);
            }
        }
    }
    best
}

pub fn gaussian_discord_detailed(v: &TwoModeCm, search: &DiscordSearch) -> Result<DiscordOutcome> {
    v.require_physical()?;
    if search.lambda_points == 0 || search.theta_points == 0 {
        return Err(MechError::Config("discord grid needs at least one point per axis".into()));
    }

    let (grid_bound, grid_log_lambda, grid_theta) = grid_min(v, search);
    let mut infimum = grid_bound;
    let mut optimum = MeasurementState::from_log(grid_log_lambda, grid_theta);

    if search.refine {
        let objective = |x: &[f64]| {
            let log_lambda = x[0].clamp(-LOG_LAMBDA_LIMIT, LOG_LAMBDA_LIMIT);
            discord_objective(v, &MeasurementState::from_log(log_lambda, x[1]))
        };
        let step_lambda = if search.lambda_points > 1 {
            2.0 * search.log_lambda_range / (search.lambda_points - 1) as f64
        } else {
            0.5
        };
        let opts = NelderMeadOptions {
            initial_step: vec![step_lambda, PI / search.theta_points as f64],
            // The objective carries rounding noise near 1e-15, so tighter
            // tolerances can leave the simplex cycling.
            f_tol: 1e-12,
            x_tol: 1e-8,
            stall_iter: 200,
            max_iter: 4000,
        };
        let res = nelder_mead(objective, &[grid_log_lambda, grid_theta], &opts);
        if !res.converged {
            return Err(MechError::Accuracy {
                message: format!("discord refinement did not converge (grid bound {grid_bound:e})"),
                best: res.value.min(grid_bound),
            });
        }
        if res.value < infimum {
            infimum = res.value;
            optimum = MeasurementState::from_log(res.x[0].clamp(-LOG_LAMBDA_LIMIT, LOG_LAMBDA_LIMIT), res.x[1]);
        }
    }

    let sigma = TwoModeCm::new(*v.matrix() * 2.0)?;
    let (nu_minus, nu_plus) = {
        let nu = super::symplectic_eigenvalues(&v.to_dmatrix())?;
        (2.0 * nu[0], 2.0 * nu[1])
    };
    let a2 = sigma.alpha2().determinant();
    let value = entropy_function(a2.max(1.0).sqrt()) - entropy_function(nu_minus) - entropy_function(nu_plus) + infimum;
    if value < -NEGATIVE_TOL {
        return Err(MechError::Accuracy { message: "discord came out negative".into(), best: value });
    }
    Ok(DiscordOutcome { value: value.max(0.0), optimum, infimum, grid_bound })
}

pub fn gaussian_discord(v: &TwoModeCm) -> Result<f64> {
    gaussian_discord_detailed(v, &DiscordSearch::default()).map(|o| o.value)
}
