//! Grid sweeps over detuning, squeezing and temperature.
//!
//! A sweep spec is a `key = value` file:
//!
//! ```text
//! axis1 = detuning          # or squeezing_r, bath_temperature
//! axis1_min = 0.5           # detuning is given in units of ω_m
//! axis1_max = 1.5
//! axis1_steps = 41
//! axis1_spacing = linear    # optional, linear | log
//! axis2 = squeezing_r       # optional second axis
//! ...
//! measures = log_negativity, discord
//! ```

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{physical_fields, KeyValues};
use crate::dynamics::SqueezeConvention;
use crate::error::{MechError, Result};
use crate::output::{fmt_f64, fmt_opt, LogBase};
use crate::params::{PhysicalParams, HBAR, K_B, SPEED_OF_LIGHT};
use crate::pipeline::{evaluate, CorrelationResult, PipelineOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisKind {
    /// Δ/ω_m
    Detuning,
    SqueezingR,
    /// Kelvin
    BathTemperature,
}

impl AxisKind {
    pub fn column(self) -> &'static str {
        match self {
            AxisKind::Detuning => "delta_over_omega_m",
            AxisKind::SqueezingR => "r",
            AxisKind::BathTemperature => "t_k",
        }
    }

    pub fn apply(self, p: &PhysicalParams, value: f64) -> PhysicalParams {
        let p = p.clone();
        match self {
            AxisKind::Detuning => p.with_detuning_ratio(value),
            AxisKind::SqueezingR => p.with_squeezing(value),
            AxisKind::BathTemperature => p.with_temperature(value),
        }
    }
}

impl fmt::Display for AxisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AxisKind::Detuning => "detuning",
            AxisKind::SqueezingR => "squeezing_r",
            AxisKind::BathTemperature => "bath_temperature",
        })
    }
}

impl FromStr for AxisKind {
    type Err = MechError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "detuning" => Ok(AxisKind::Detuning),
            "squeezing_r" => Ok(AxisKind::SqueezingR),
            "bath_temperature" => Ok(AxisKind::BathTemperature),
            other => Err(MechError::Config(format!(
                "unknown axis `{other}` (expected detuning|squeezing_r|bath_temperature)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spacing::Linear => "linear",
            Spacing::Log => "log",
        })
    }
}

impl FromStr for Spacing {
    type Err = MechError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            other => Err(MechError::Config(format!("unknown spacing `{other}` (expected linear|log)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub kind: AxisKind,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub spacing: Spacing,
}

impl Axis {
    pub fn new(kind: AxisKind, min: f64, max: f64, steps: usize, spacing: Spacing) -> Result<Self> {
        let axis = Axis { kind, min, max, steps, spacing };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        let name = self.kind.to_string();
        if self.steps < 2 {
            return Err(MechError::Config(format!("axis `{name}`: steps must be >= 2, got {}", self.steps)));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(MechError::Config(format!("axis `{name}`: need finite min < max, got [{}, {}]", self.min, self.max)));
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return Err(MechError::Config(format!("axis `{name}`: log spacing needs min > 0")));
        }
        if matches!(self.kind, AxisKind::SqueezingR | AxisKind::BathTemperature) && self.min < 0.0 {
            return Err(MechError::Config(format!("axis `{name}`: values must be >= 0")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| {
                let u = k as f64 / last;
                if k + 1 == self.steps {
                    return self.max;
                }
                match self.spacing {
                    Spacing::Linear => self.min + (self.max - self.min) * u,
                    Spacing::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * u).exp(),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: PhysicalParams,
    pub axes: Vec<Axis>,
    pub discord: bool,
    pub convention: SqueezeConvention,
}

impl SweepSpec {
    pub fn new(base: PhysicalParams, axes: Vec<Axis>, discord: bool, convention: SqueezeConvention) -> Result<Self> {
        let spec = SweepSpec { base, axes, discord, convention };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(MechError::Config(format!("a sweep needs one or two axes, got {}", self.axes.len())));
        }
        if self.axes.len() == 2 && self.axes[0].kind == self.axes[1].kind {
            return Err(MechError::Config(format!("axis `{}` given twice", self.axes[0].kind)));
        }
        self.axes.iter().try_for_each(Axis::validate)
    }

    pub fn parse(base: PhysicalParams, text: &str, convention: SqueezeConvention) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut axes = Vec::new();
        for i in 1..=2 {
            let Some(kind) = kv.take(&format!("axis{i}")) else { continue };
            let kind: AxisKind = kind.parse()?;
            let steps_key = format!("axis{i}_steps");
            let steps = kv.require_f64(&steps_key)?;
            if steps.fract() != 0.0 || steps < 0.0 {
                return Err(MechError::Config(format!("`{steps_key}` must be a non-negative integer")));
            }
            let spacing = kv.take(&format!("axis{i}_spacing")).map(|s| s.parse()).transpose()?.unwrap_or_default();
            axes.push(Axis {
                kind,
                min: kv.require_f64(&format!("axis{i}_min"))?,
                max: kv.require_f64(&format!("axis{i}_max"))?,
                steps: steps as usize,
                spacing,
            });
        }
        let mut discord = false;
        if let Some(list) = kv.take("measures") {
            for m in list.split(',').map(str::trim) {
                match m {
                    "log_negativity" => {}
                    "discord" => discord = true,
                    other => {
                        return Err(MechError::Config(format!(
                            "unknown measure `{other}` (expected log_negativity|discord)"
                        )))
                    }
                }
            }
        }
        kv.finish()?;
        Self::new(base, axes, discord, convention)
    }

    pub fn load(base: PhysicalParams, path: impl AsRef<Path>, convention: SqueezeConvention) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| MechError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(base, &text, convention)
    }

    /// Grid coordinates, first axis outermost.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut points: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &self.axes {
            let values = axis.values();
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(*v);
                        p
                    })
                })
                .collect();
        }
        points
    }

    pub fn params_at(&self, coords: &[f64]) -> PhysicalParams {
        self.axes.iter().zip(coords).fold(self.base.clone(), |p, (axis, v)| axis.kind.apply(&p, *v))
    }

    /// Spec rendered back into its file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, a) in self.axes.iter().enumerate() {
            let n = i + 1;
            out.push_str(&format!(
                "axis{n} = {}\naxis{n}_min = {:e}\naxis{n}_max = {:e}\naxis{n}_steps = {}\naxis{n}_spacing = {}\n",
                a.kind, a.min, a.max, a.steps, a.spacing
            ));
        }
        let measures = if self.discord { "log_negativity, discord" } else { "log_negativity" };
        out.push_str(&format!("measures = {measures}\n"));
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub coords: Vec<f64>,
    /// Solver failures are kept per point as their message.
    pub outcome: std::result::Result<CorrelationResult, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
}

/// Evaluates every grid point on a pool of `jobs` threads. Row order follows
/// [`SweepSpec::points`] regardless of `jobs`.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepResult> {
    spec.validate()?;
    let points = spec.points();
    let params: Vec<PhysicalParams> = points.iter().map(|c| spec.params_at(c)).collect();
    params.iter().try_for_each(PhysicalParams::validate)?;

    let opts = PipelineOptions { convention: spec.convention, discord: spec.discord, ..Default::default() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| MechError::Config(format!("cannot start {jobs} workers: {e}")))?;
    let outcomes: Vec<_> = pool.install(|| {
        params.par_iter().map(|p| evaluate(p, &opts).map_err(|e| e.to_string())).collect()
    });
    let rows = points.into_iter().zip(outcomes).map(|(coords, outcome)| SweepRow { coords, outcome }).collect();
    Ok(SweepResult { spec: spec.clone(), rows })
}

/// Provenance lines (without the leading `# `) shared by every CSV writer.
pub fn provenance(base: &PhysicalParams, convention: SqueezeConvention, log_base: LogBase) -> Vec<String> {
    let mut lines = vec![
        format!("mechlink-core {}", env!("CARGO_PKG_VERSION")),
        format!("constants: hbar = {HBAR:e} J s, k_B = {K_B:e} J/K, c = {SPEED_OF_LIGHT:e} m/s"),
        format!("squeeze_phase_convention = {convention}"),
        format!("entanglement unit: log base {}", log_base.label()),
        format!("period samples per point: {}", crate::pipeline::PERIOD_SAMPLES),
    ];
    lines.extend(physical_fields(base).iter().map(|(k, v)| format!("{k} = {v:e}")));
    lines
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, log_base: LogBase, mut out: W) -> Result<()> {
    let spec = &result.spec;
    for line in provenance(&spec.base, spec.convention, log_base) {
        writeln!(out, "# {line}")?;
    }
    for line in spec.to_text().lines() {
        writeln!(out, "# {line}")?;
    }

    let mut header: Vec<&str> = spec.axes.iter().map(|a| a.kind.column()).collect();
    header.push("e_mean");
    if spec.discord {
        header.push("d_mean");
    }
    header.extend(["e_min", "e_max", "stable", "max_re_eigenvalue", "lyapunov_residual", "harmonic_residual", "error"]);
    writeln!(out, "{}", header.join(","))?;

    let conv = |x: Option<f64>| fmt_opt(x.map(|v| log_base.convert(v)));
    for row in &result.rows {
        let mut fields: Vec<String> = row.coords.iter().map(|v| fmt_f64(*v)).collect();
        match &row.outcome {
            Ok(r) => {
                fields.push(conv(r.e_mean));
                if spec.discord {
                    fields.push(conv(r.d_mean));
                }
                fields.extend([
                    conv(r.e_min),
                    conv(r.e_max),
                    r.stable.to_string(),
                    fmt_f64(r.max_re_eigenvalue),
                    fmt_opt(r.lyapunov_residual),
                    fmt_opt(r.harmonic_residual),
                    String::new(),
                ]);
            }
            Err(message) => {
                let blanks = if spec.discord { 7 } else { 6 };
                fields.extend(std::iter::repeat(String::new()).take(blanks));
                fields.push(csv_field(message));
            }
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Δ ∈ [0.5, 1.5]ω_m × r ∈ [0, 2] at 2 mK, 41 × 41.
pub fn fig1_spec(convention: SqueezeConvention) -> SweepSpec {
    let base = PhysicalParams::reference().with_temperature(2e-3);
    let axes = vec![
        Axis { kind: AxisKind::Detuning, min: 0.5, max: 1.5, steps: 41, spacing: Spacing::Linear },
        Axis { kind: AxisKind::SqueezingR, min: 0.0, max: 2.0, steps: 41, spacing: Spacing::Linear },
    ];
    SweepSpec { base, axes, discord: false, convention }
}

/// r ∈ [0, 2] × T ∈ [1 mK, 0.2 K] (log) at Δ = ω_m, 21 × 21, with discord.
pub fn fig2_spec(convention: SqueezeConvention) -> SweepSpec {
    let base = PhysicalParams::reference().with_detuning_ratio(1.0);
    let axes = vec![
        Axis { kind: AxisKind::SqueezingR, min: 0.0, max: 2.0, steps: 21, spacing: Spacing::Linear },
        Axis { kind: AxisKind::BathTemperature, min: 1e-3, max: 0.2, steps: 21, spacing: Spacing::Log },
    ];
    SweepSpec { base, axes, discord: true, convention }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(text: &str) -> Result<SweepSpec> {
        SweepSpec::parse(PhysicalParams::reference(), text, SqueezeConvention::Rotating)
    }

    const TWO_BY_TWO: &str = "axis1 = squeezing_r\naxis1_min = 0\naxis1_max = 1\naxis1_steps = 2\n\
        axis2 = bath_temperature\naxis2_min = 1e-3\naxis2_max = 0.1\naxis2_steps = 2\naxis2_spacing = log\n\
        measures = log_negativity, discord\n";

    #[test]
    fn axis_values() {
        let lin = Axis::new(AxisKind::SqueezingR, 0.0, 2.0, 5, Spacing::Linear).unwrap();
        assert_eq!(lin.values(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let log = Axis::new(AxisKind::BathTemperature, 1e-3, 1e-1, 3, Spacing::Log).unwrap();
        let v = log.values();
        assert!((v[1] - 1e-2).abs() < 1e-15 && v[2] == 1e-1);
    }

    #[test]
    fn axis_validation() {
        assert!(Axis::new(AxisKind::SqueezingR, 0.0, 2.0, 1, Spacing::Linear).is_err());
        assert!(Axis::new(AxisKind::BathTemperature, 0.0, 0.1, 4, Spacing::Log).is_err());
        assert!(Axis::new(AxisKind::SqueezingR, -1.0, 2.0, 4, Spacing::Linear).is_err());
        assert!(Axis::new(AxisKind::Detuning, 1.0, 1.0, 4, Spacing::Linear).is_err());
    }

    #[test]
    fn parse_rejects_bad_specs() {
        for bad in [
            "",
            "axis1 = squeezing_r\naxis1_min = 0\naxis1_max = 1\naxis1_steps = 1\n",
            "axis1 = spin\naxis1_min = 0\naxis1_max = 1\naxis1_steps = 3\n",
            "axis1 = squeezing_r\naxis1_min = 0\naxis1_max = 1\naxis1_steps = 2.5\n",
            "axis1 = squeezing_r\naxis1_min = 0\naxis1_max = 1\naxis1_steps = 3\nmeasures = fidelity\n",
            "axis1 = squeezing_r\naxis1_min = 0\naxis1_max = 1\naxis1_steps = 3\nextra = 1\n",
        ] {
            let err = small_spec(bad).unwrap_err();
            assert!(err.is_config_error(), "{bad:?}: {err}");
        }
    }

    #[test]
    fn spec_text_round_trips() {
        let spec = small_spec(TWO_BY_TWO).unwrap();
        assert_eq!(small_spec(&spec.to_text()).unwrap(), spec);
    }

    #[test]
    fn two_by_two_grid_gives_four_rows() {
        let spec = small_spec(TWO_BY_TWO).unwrap();
        let res = run_sweep(&spec, 2).unwrap();
        assert_eq!(res.rows.len(), 4);
        assert_eq!(res.rows[1].coords, vec![0.0, 0.1]);
        for row in &res.rows[..2] {
            let r = row.outcome.as_ref().unwrap();
            assert_eq!(r.e_mean, Some(0.0));
            assert!(r.d_mean.unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn csv_is_independent_of_worker_count() {
        let spec = small_spec(TWO_BY_TWO).unwrap();
        let render = |jobs| {
            let mut buf = Vec::new();
            write_sweep_csv(&run_sweep(&spec, jobs).unwrap(), LogBase::E, &mut buf).unwrap();
            buf
        };
        assert_eq!(render(1), render(4));
    }

    #[test]
    fn unstable_points_are_flagged_not_skipped() {
        let text = "axis1 = detuning\naxis1_min = -1\naxis1_max = 1\naxis1_steps = 2\n";
        let res = run_sweep(&small_spec(text).unwrap(), 1).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&res, LogBase::E, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<_> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "delta_over_omega_m,e_mean,e_min,e_max,stable,max_re_eigenvalue,lyapunov_residual,harmonic_residual,error");
        assert!(rows[1].starts_with("-1.0000000000000000e0,,,,false,"), "{}", rows[1]);
        assert!(rows[2].contains(",true,"));
    }

    #[test]
    fn figure_presets() {
        let f1 = fig1_spec(SqueezeConvention::Rotating);
        assert_eq!(f1.points().len(), 41 * 41);
        f1.validate().unwrap();
        let f2 = fig2_spec(SqueezeConvention::Rotating);
        f2.validate().unwrap();
        let cols: Vec<_> = f2.axes.iter().map(|a| a.kind.column()).collect();
        assert_eq!(cols, ["r", "t_k"]);
        assert!(f2.discord);
    }

    #[test]
    fn error_fields_are_quoted() {
        assert_eq!(csv_field("a, b"), "\"a, b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
