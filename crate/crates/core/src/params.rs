//! Laboratory parameters and the derived quantities of the linearized dynamics.
//!
//! Inputs are quoted as ordinary frequencies (Hz) and converted once to
//! angular frequencies here; everything downstream works in rad/s.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MechError, Result};

/// Reduced Planck constant [J·s].
pub const HBAR: f64 = 1.054571817e-34;
/// Boltzmann constant [J/K].
pub const K_B: f64 = 1.380649e-23;
/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 2.99792458e8;

/// One symmetric two-cavity experiment in laboratory units. Both devices
/// share these values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// ω_m/2π [Hz]
    pub mech_freq: f64,
    /// γ_m/2π [Hz]
    pub mech_damping: f64,
    /// κ/2π [Hz]
    pub cavity_decay: f64,
    /// [kg]
    pub mass: f64,
    /// [m]
    pub cavity_length: f64,
    /// [m]
    pub laser_wavelength: f64,
    /// [W]
    pub pump_power: f64,
    /// Effective detuning Δ [rad/s].
    pub detuning: f64,
    /// [K]
    pub bath_temperature: f64,
    pub squeezing_r: f64,
    /// φ [rad]
    pub squeezing_phase: f64,
}

impl PhysicalParams {
    /// Membrane-in-cavity parameters at Δ = ω_m, T = 2 mK, r = 1.
    pub fn reference() -> Self {
        let mech_freq = 947e3;
        PhysicalParams {
            mech_freq,
            mech_damping: 140.0,
            cavity_decay: 215e3,
            mass: 145e-12,
            cavity_length: 25e-3,
            laser_wavelength: 1064e-9,
            pump_power: 11e-3,
            detuning: 2.0 * PI * mech_freq,
            bath_temperature: 2e-3,
            squeezing_r: 1.0,
            squeezing_phase: 0.0,
        }
    }

    pub fn omega_m(&self) -> f64 {
        2.0 * PI * self.mech_freq
    }

    /// Sets Δ as a multiple of ω_m.
    pub fn with_detuning_ratio(mut self, ratio: f64) -> Self {
        self.detuning = ratio * self.omega_m();
        self
    }

    pub fn with_squeezing(mut self, r: f64) -> Self {
        self.squeezing_r = r;
        self
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.bath_temperature = t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mech_freq", self.mech_freq),
            ("mech_damping", self.mech_damping),
            ("cavity_decay", self.cavity_decay),
            ("mass", self.mass),
            ("cavity_length", self.cavity_length),
            ("laser_wavelength", self.laser_wavelength),
            ("pump_power", self.pump_power),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(MechError::invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        let non_negative = [
            ("bath_temperature", self.bath_temperature),
            ("squeezing_r", self.squeezing_r),
        ];
        for (field, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(MechError::invalid(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (field, v) in [("detuning", self.detuning), ("squeezing_phase", self.squeezing_phase)] {
            if !v.is_finite() {
                return Err(MechError::invalid(field, "must be finite"));
            }
        }
        Ok(())
    }
}

/// Angular and dimensionless quantities that parameterize the linearized
/// Langevin equations of one device.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub omega_m: f64,
    pub gamma_m: f64,
    pub kappa: f64,
    pub delta: f64,
    /// Cavity (and laser carrier) angular frequency 2πc/λ.
    pub omega_cavity: f64,
    /// χ = ω_C / L [rad/(s·m)]
    pub chi: f64,
    /// Pump amplitude ℰ = √(2κ𝒫/ħω_L).
    pub drive_amp: f64,
    /// g = χ√(ħ/(2mω_m)) [rad/s]
    pub g: f64,
    /// Steady intracavity amplitude ℰ/(κ + iΔ).
    pub c_s: Complex64,
    /// Static mirror displacement [m]; diagnostic only.
    pub q_s: f64,
    pub nbar: f64,
    /// N = sinh²r
    pub n_sq: f64,
    /// M = sinh r cosh r e^{iφ}
    pub m_sq: Complex64,
}

impl DerivedParams {
    /// Copy with the squeezed drive switched off (vacuum inputs).
    pub fn without_squeezing(&self) -> Self {
        DerivedParams { n_sq: 0.0, m_sq: Complex64::new(0.0, 0.0), ..self.clone() }
    }

    /// Copy with the radiation-pressure coupling switched off.
    pub fn without_coupling(&self) -> Self {
        DerivedParams { g: 0.0, ..self.clone() }
    }
}

/// Bose–Einstein occupancy (e^{ħω/k_BT} − 1)⁻¹; zero at T = 0.
pub fn bose_occupancy(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega / (K_B * temperature);
    1.0 / x.exp_m1()
}

/// Squeezed-drive parameters (N, M) of a two-mode squeezed vacuum.
pub fn squeezing_moments(r: f64, phi: f64) -> (f64, Complex64) {
    let n = r.sinh().powi(2);
    let m = Complex64::from_polar(r.sinh() * r.cosh(), phi);
    (n, m)
}

pub fn derive(p: &PhysicalParams) -> Result<DerivedParams> {
    p.validate()?;
    let omega_m = p.omega_m();
    let gamma_m = 2.0 * PI * p.mech_damping;
    let kappa = 2.0 * PI * p.cavity_decay;
    let delta = p.detuning;

    let omega_cavity = 2.0 * PI * SPEED_OF_LIGHT / p.laser_wavelength;
    let chi = omega_cavity / p.cavity_length;
    let drive_amp = (2.0 * kappa * p.pump_power / (HBAR * omega_cavity)).sqrt();
    let c_s = Complex64::new(drive_amp, 0.0) / Complex64::new(kappa, delta);
    let q_s = HBAR * chi * c_s.norm_sqr() / (p.mass * omega_m * omega_m);
    let g = chi * (HBAR / (2.0 * p.mass * omega_m)).sqrt();
    let nbar = bose_occupancy(omega_m, p.bath_temperature);
    let (n_sq, m_sq) = squeezing_moments(p.squeezing_r, p.squeezing_phase);

    Ok(DerivedParams {
        omega_m,
        gamma_m,
        kappa,
        delta,
        omega_cavity,
        chi,
        drive_amp,
        g,
        c_s,
        q_s,
        nbar,
        n_sq,
        m_sq,
    })
}
