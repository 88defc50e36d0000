//! `key = value` configuration files.
//!
//! Keys are the [`PhysicalParams`] field names in SI units.
//! `detuning_over_omega_m` may replace `detuning`, `squeezing_phase`
//! defaults to 0 and `squeeze_phase_convention` is optional. Blank lines
//! and `#` comments are ignored.

use std::collections::BTreeMap;
use std::path::Path;

use crate::dynamics::SqueezeConvention;
use crate::error::{MechError, Result};
use crate::params::PhysicalParams;

/// Parsed `key = value` pairs keyed by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                MechError::Config(format!("line {}: expected `key = value`, got `{}`", lineno + 1, raw.trim()))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(MechError::Config(format!("line {}: empty key", lineno + 1)));
            }
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(MechError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(KeyValues(map))
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    pub fn take_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| MechError::Config(format!("`{key}`: `{v}` is not a number"))),
        }
    }

    pub fn require_f64(&mut self, key: &str) -> Result<f64> {
        self.take_f64(key)?.ok_or_else(|| MechError::Config(format!("missing required key `{key}`")))
    }

    /// Errors if any key has not been consumed.
    pub fn finish(self) -> Result<()> {
        match self.0.keys().next() {
            None => Ok(()),
            Some(k) => Err(MechError::Config(format!("unknown key `{k}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub params: PhysicalParams,
    pub convention: Option<SqueezeConvention>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mech_freq = kv.require_f64("mech_freq")?;
        let detuning = match (kv.take_f64("detuning")?, kv.take_f64("detuning_over_omega_m")?) {
            (Some(_), Some(_)) => {
                return Err(MechError::Config(
                    "give either `detuning` or `detuning_over_omega_m`, not both".into(),
                ))
            }
            (Some(d), None) => d,
            (None, Some(ratio)) => ratio * 2.0 * std::f64::consts::PI * mech_freq,
            (None, None) => return Err(MechError::Config("missing required key `detuning`".into())),
        };
        let params = PhysicalParams {
            mech_freq,
            mech_damping: kv.require_f64("mech_damping")?,
            cavity_decay: kv.require_f64("cavity_decay")?,
            mass: kv.require_f64("mass")?,
            cavity_length: kv.require_f64("cavity_length")?,
            laser_wavelength: kv.require_f64("laser_wavelength")?,
            pump_power: kv.require_f64("pump_power")?,
            detuning,
            bath_temperature: kv.require_f64("bath_temperature")?,
            squeezing_r: kv.require_f64("squeezing_r")?,
            squeezing_phase: kv.take_f64("squeezing_phase")?.unwrap_or(0.0),
        };
        let convention = kv.take("squeeze_phase_convention").map(|s| s.parse()).transpose()?;
        kv.finish()?;
        params.validate()?;
        Ok(ExperimentConfig { params, convention })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| MechError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Renders the parameters back into the file format.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        for (k, v) in physical_fields(p) {
            out.push_str(&format!("{k} = {v:e}\n"));
        }
        if let Some(c) = self.convention {
            out.push_str(&format!("squeeze_phase_convention = {c}\n"));
        }
        out
    }
}

/// Field name / value pairs in declaration order.
pub fn physical_fields(p: &PhysicalParams) -> [(&'static str, f64); 11] {
    [
        ("mech_freq", p.mech_freq),
        ("mech_damping", p.mech_damping),
        ("cavity_decay", p.cavity_decay),
        ("mass", p.mass),
        ("cavity_length", p.cavity_length),
        ("laser_wavelength", p.laser_wavelength),
        ("pump_power", p.pump_power),
        ("detuning", p.detuning),
        ("bath_temperature", p.bath_temperature),
        ("squeezing_r", p.squeezing_r),
        ("squeezing_phase", p.squeezing_phase),
    ]
}
