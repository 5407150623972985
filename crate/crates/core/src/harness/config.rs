use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::constitutive::{GasModel, HProfile, DEFAULT_C_CAP};
use crate::grid::Grid;
use crate::solver::{Integrator, SolverConfig};
use crate::{Error, Result};

/// Envelope value below which a bump counts as the far field.
const BUMP_CUTOFF_DECADES: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Constant,
    GaussPulse,
    TwoBump,
    Mms,
    AlphaSweep,
    GammaSweep,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Constant,
        Preset::GaussPulse,
        Preset::TwoBump,
        Preset::Mms,
        Preset::AlphaSweep,
        Preset::GammaSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Constant => "constant",
            Preset::GaussPulse => "gauss-pulse",
            Preset::TwoBump => "two-bump",
            Preset::Mms => "mms",
            Preset::AlphaSweep => "alpha-sweep",
            Preset::GammaSweep => "gamma-sweep",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Validation(format!("unknown preset '{name}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-length of the domain `[-L, L]`.
    #[serde(rename = "L")]
    pub half_length: f64,
    #[serde(rename = "N")]
    pub cells: usize,
    pub ghost_depth: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HKindName {
    PowerSum,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HConfig {
    pub kind: HKindName,
    pub ell1: f64,
    pub ell2: f64,
    /// Value of the constant profile; unused by `power-sum`.
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasConfig {
    pub gamma: f64,
    pub mu_tilde: f64,
    pub kappa_tilde: f64,
    pub alpha: f64,
    pub h: HConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    pub output_every: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    V,
    U,
    Theta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub amplitude: f64,
    pub width: f64,
    /// Fields carrying a perturbation.
    pub perturb: Vec<Field>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<Format>,
    /// Profile snapshot interval; a multiple of `time.output_every`, 0 for
    /// initial and final profiles only.
    pub profile_every: f64,
    pub include_wall_time: bool,
    pub h3_interior: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsConfig {
    pub amplitude: f64,
    pub omega: f64,
    pub levels: Vec<usize>,
    pub t_end: f64,
    pub half_length: f64,
    pub integrator: Integrator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateHConfig {
    pub range: Vec<f64>,
    pub samples: usize,
    pub c_cap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Alpha,
    Gamma,
    Amplitude,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "alpha" => Ok(Self::Alpha),
            "gamma" => Ok(Self::Gamma),
            "amplitude" => Ok(Self::Amplitude),
            _ => Err(Error::Argument(format!("unknown sweep parameter '{name}' (alpha, gamma, amplitude)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Alpha => "alpha",
            Self::Gamma => "gamma",
            Self::Amplitude => "amplitude",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    pub strict: bool,
    pub grid: GridConfig,
    pub gas: GasConfig,
    pub solver: SolverConfig,
    pub time: TimeConfig,
    pub initial: InitialConfig,
    pub output: OutputConfig,
    pub mms: MmsConfig,
    pub validate_h: ValidateHConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl RunConfig {
    /// Default table for `preset`.
    pub fn preset(preset: Preset) -> Self {
        let mut c = Self {
            preset,
            strict: false,
            grid: GridConfig { half_length: 30.0, cells: 512, ghost_depth: 2 },
            gas: GasConfig {
                gamma: 5.0 / 3.0,
                mu_tilde: 1.0,
                kappa_tilde: 1.0,
                alpha: 0.05,
                h: HConfig { kind: HKindName::PowerSum, ell1: 1.0, ell2: 1.0, c: 1.0 },
            },
            solver: SolverConfig::default(),
            time: TimeConfig { t_end: 5.0, output_every: 0.1 },
            initial: InitialConfig { amplitude: 0.3, width: 1.0, perturb: vec![Field::V, Field::Theta] },
            output: OutputConfig {
                directory: "out".into(),
                formats: vec![Format::Csv, Format::Json],
                profile_every: 1.0,
                include_wall_time: false,
                h3_interior: false,
            },
            mms: MmsConfig {
                amplitude: 0.1,
                omega: 1.0,
                levels: vec![64, 128, 256],
                t_end: 1.0,
                half_length: 6.0,
                integrator: Integrator::Explicit,
            },
            validate_h: ValidateHConfig { range: vec![1e-2, 1e2], samples: 4001, c_cap: DEFAULT_C_CAP },
            sweep: None,
        };
        match preset {
            Preset::Constant => {
                c.initial.amplitude = 0.0;
                c.time.t_end = 1.0;
            }
            Preset::GaussPulse | Preset::Mms => {}
            Preset::TwoBump => {
                c.initial.perturb = vec![Field::V, Field::U, Field::Theta];
            }
            Preset::AlphaSweep => {
                c.sweep = Some(SweepConfig { param: SweepParam::Alpha, values: vec![-0.1, -0.05, 0.0, 0.05, 0.1] });
            }
            Preset::GammaSweep => {
                c.gas.alpha = 0.0;
                c.sweep = Some(SweepConfig { param: SweepParam::Gamma, values: vec![1.2, 5.0 / 3.0, 3.0] });
            }
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        let g = &self.grid;
        if !(g.half_length > 0.0 && g.half_length.is_finite()) {
            return bad(format!("grid.L must be positive, got {}", g.half_length));
        }
        if g.cells < 8 {
            return bad(format!("grid.N must be at least 8, got {}", g.cells));
        }
        if g.ghost_depth < 2 {
            return bad(format!("grid.ghost_depth must be at least 2, got {}", g.ghost_depth));
        }
        let gas = &self.gas;
        if !(gas.gamma > 1.0 && gas.gamma.is_finite()) {
            return bad(format!("gamma must exceed 1, got {}", gas.gamma));
        }
        if !(gas.mu_tilde > 0.0 && gas.mu_tilde.is_finite()) {
            return bad(format!("mu_tilde must be positive, got {}", gas.mu_tilde));
        }
        if !(gas.kappa_tilde > 0.0 && gas.kappa_tilde.is_finite()) {
            return bad(format!("kappa_tilde must be positive, got {}", gas.kappa_tilde));
        }
        if !gas.alpha.is_finite() {
            return bad(format!("alpha must be finite, got {}", gas.alpha));
        }
        let h = &gas.h;
        if !(h.ell1 >= 0.0 && h.ell2 >= 0.0 && h.ell1.is_finite() && h.ell2.is_finite()) {
            return bad(format!("gas.h.ell1 and gas.h.ell2 must be nonnegative, got {} and {}", h.ell1, h.ell2));
        }
        if h.kind == HKindName::Constant && !(h.c > 0.0 && h.c.is_finite()) {
            return bad(format!("gas.h.c must be positive, got {}", h.c));
        }
        self.solver.validate()?;
        let t = &self.time;
        if !(t.t_end >= 0.0 && t.t_end.is_finite()) {
            return bad(format!("time.t_end must be nonnegative, got {}", t.t_end));
        }
        if !(t.output_every > 0.0 && t.output_every.is_finite()) {
            return bad(format!("time.output_every must be positive, got {}", t.output_every));
        }
        let i = &self.initial;
        if !(i.amplitude.abs() < 1.0) {
            return bad(format!("initial.amplitude must satisfy |a| < 1 to keep v and theta positive, got {}", i.amplitude));
        }
        if !(i.width > 0.0 && i.width.is_finite()) {
            return bad(format!("initial.width must be positive, got {}", i.width));
        }
        let reach = self.support_radius();
        if reach > 0.5 * g.half_length {
            return bad(format!(
                "initial perturbation reaches |x| = {reach:.3}, beyond L/2 = {}",
                0.5 * g.half_length
            ));
        }
        let o = &self.output;
        if !(o.profile_every >= 0.0 && o.profile_every.is_finite()) {
            return bad(format!("output.profile_every must be nonnegative, got {}", o.profile_every));
        }
        if o.profile_every > 0.0 {
            let k = o.profile_every / t.output_every;
            if (k - k.round()).abs() > 1e-9 * k.max(1.0) || k.round() < 1.0 {
                return bad(format!(
                    "output.profile_every = {} is not a multiple of time.output_every = {}",
                    o.profile_every, t.output_every
                ));
            }
        }
        let m = &self.mms;
        if !(m.amplitude.abs() < 1.0) {
            return bad(format!("mms.amplitude must satisfy |a| < 1, got {}", m.amplitude));
        }
        if !(m.t_end >= 0.0 && m.half_length > 0.0) {
            return bad("mms.t_end must be nonnegative and mms.half_length positive".into());
        }
        if m.levels.len() < 3 || m.levels.windows(2).any(|w| w[1] != 2 * w[0]) {
            return bad(format!("mms.levels must hold at least 3 doubling sizes, got {:?}", m.levels));
        }
        let v = &self.validate_h;
        if v.range.len() != 2 {
            return bad(format!("validate_h.range must hold two values, got {:?}", v.range));
        }
        if let Some(s) = &self.sweep {
            if s.values.iter().any(|x| !x.is_finite()) {
                return bad(format!("sweep values must be finite, got {:?}", s.values));
            }
        }
        Ok(())
    }

    /// Largest `|x|` where a perturbation envelope exceeds `1e-12`.
    pub fn support_radius(&self) -> f64 {
        if self.initial.amplitude == 0.0 || self.initial.perturb.is_empty() {
            return 0.0;
        }
        let offset = if self.preset == Preset::TwoBump {
            TWO_BUMP_OFFSET_V.abs().max(TWO_BUMP_OFFSET_THETA.abs())
        } else {
            0.0
        };
        offset + self.initial.width * (BUMP_CUTOFF_DECADES * std::f64::consts::LN_10).sqrt()
    }

    /// Notes on parameters outside the regime of the global theory; only
    /// produced in strict mode.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !self.strict {
            return w;
        }
        let h = &self.gas.h;
        if h.ell1 < 1.0 {
            w.push(format!("gas.h.ell1 = {} is below 1; the global existence theory assumes ell1 >= 1", h.ell1));
        }
        if h.ell2 < 1.0 {
            w.push(format!("gas.h.ell2 = {} is below 1; the global existence theory assumes ell2 >= 1", h.ell2));
        }
        if self.gas.alpha.abs() > 0.1 {
            w.push(format!("|alpha| = {} is large; the theory covers sufficiently small |alpha|", self.gas.alpha.abs()));
        }
        w
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.half_length, self.grid.cells, self.grid.ghost_depth)
    }

    pub fn h_profile(&self) -> Result<HProfile> {
        let h = &self.gas.h;
        match h.kind {
            HKindName::PowerSum => HProfile::power_sum(h.ell1, h.ell2),
            HKindName::Constant => HProfile::constant(h.c, h.ell1, h.ell2),
        }
    }

    pub fn model(&self) -> Result<GasModel> {
        let g = &self.gas;
        GasModel::new(g.gamma, g.mu_tilde, g.kappa_tilde, g.alpha, self.h_profile()?)
    }

    /// Sets one sweep parameter.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Self {
        let mut c = self.clone();
        match param {
            SweepParam::Alpha => c.gas.alpha = value,
            SweepParam::Gamma => c.gas.gamma = value,
            SweepParam::Amplitude => c.initial.amplitude = value,
        }
        c.sweep = None;
        if matches!(c.preset, Preset::AlphaSweep | Preset::GammaSweep) {
            c.preset = Preset::GaussPulse;
        }
        c
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Validation(format!("cannot serialize config: {e}")))
    }
}

/// Offsets of the two-bump perturbations.
pub const TWO_BUMP_OFFSET_V: f64 = -2.0;
pub const TWO_BUMP_OFFSET_THETA: f64 = 1.5;

/// A validated config and any strict-mode warnings.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

fn parse_table(source: &str) -> Result<Table> {
    source.parse::<Table>().map_err(|e| Error::Parse {
        line: e.span().map(|s| line_of(source, s.start)),
        message: e.message().to_string(),
    })
}

/// Parses `key=value`; the value is read as TOML and falls back to a bare
/// string.
pub fn parse_override(spec: &str) -> Result<(String, Value)> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Argument(format!("override '{spec}' is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Argument(format!("override '{spec}' has an empty key")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Argument(format!("override key '{key}': '{p}' is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses config text with `key=value` overrides applied, fills preset
/// defaults and validates.
pub fn parse_config(source: &str, overrides: &[String]) -> Result<LoadedConfig> {
    let mut user = parse_table(source)?;
    for o in overrides {
        let (k, v) = parse_override(o)?;
        set_path(&mut user, &k, v)?;
    }
    let preset = match user.get("preset") {
        None => Preset::GaussPulse,
        Some(Value::String(s)) => Preset::parse(s)?,
        Some(other) => return Err(Error::Validation(format!("preset must be a string, got {other}"))),
    };
    let defaults = toml::Table::try_from(RunConfig::preset(preset))
        .map_err(|e| Error::Validation(format!("cannot build defaults: {e}")))?;
    let mut merged = defaults;
    merge(&mut merged, user);
    let config: RunConfig = merged.try_into().map_err(|e: toml::de::Error| {
        // spans refer to the merged table, not the file
        Error::Parse { line: None, message: e.message().to_string() }
    })?;
    config.validate()?;
    let warnings = config.warnings();
    Ok(LoadedConfig { config, warnings })
}

/// Reads and parses a config file.
pub fn load_config(path: impl AsRef<Path>, overrides: &[String]) -> Result<LoadedConfig> {
    let path = path.as_ref();
    let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&source, overrides)
}
