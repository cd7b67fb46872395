//! Strict TOML run configuration.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use kfpness_core::integrator::cfl_max_dt;
use kfpness_core::model::validate_params;
use kfpness_core::{
    BoundaryMode, BoundarySpec, DiffusivityProfile, EnergyMode, FixedPointOptions,
    IntegratorConfig, KineticSystem, ModelParams, PhaseSpaceGrid, Profile, Region,
    SteadyOptions, ThermostatSpec, ValidationErrors, WeightSpec,
};
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};

/// Scalar profile: a bare number or one of the named shapes.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ProfileCfg {
    Constant(f64),
    Shape(ShapeCfg),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeCfg {
    LinearRamp { start: f64, end: f64 },
    TwoPlateau { low: f64, high: f64, split: f64 },
    Table(Vec<f64>),
}

impl ProfileCfg {
    fn to_profile(&self) -> Profile {
        match self {
            ProfileCfg::Constant(c) => Profile::Constant(*c),
            ProfileCfg::Shape(ShapeCfg::LinearRamp { start, end }) => Profile::LinearRamp {
                start: *start,
                end: *end,
            },
            ProfileCfg::Shape(ShapeCfg::TwoPlateau { low, high, split }) => Profile::TwoPlateau {
                low: *low,
                high: *high,
                split: *split,
            },
            ProfileCfg::Shape(ShapeCfg::Table(v)) => Profile::Table(v.clone()),
        }
    }
}

impl<'de> Deserialize<'de> for ProfileCfg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ProfileCfg;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a table with linear_ramp, two_plateau or table")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ProfileCfg, E> {
                Ok(ProfileCfg::Constant(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ProfileCfg, E> {
                Ok(ProfileCfg::Constant(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ProfileCfg, E> {
                Ok(ProfileCfg::Constant(v as f64))
            }
            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<ProfileCfg, A::Error> {
                ShapeCfg::deserialize(de::value::MapAccessDeserializer::new(map))
                    .map(ProfileCfg::Shape)
            }
        }
        d.deserialize_any(V)
    }
}

/// Velocity cutoff: a number or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum VMax {
    #[default]
    Auto,
    Value(f64),
}

impl Serialize for VMax {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            VMax::Auto => s.serialize_str("auto"),
            VMax::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for VMax {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = VMax;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"auto\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<VMax, E> {
                Ok(VMax::Value(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<VMax, E> {
                Ok(VMax::Value(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<VMax, E> {
                Ok(VMax::Value(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<VMax, E> {
                if v == "auto" {
                    Ok(VMax::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionCfg {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermostatCfg {
    pub eta: f64,
    pub temperature: f64,
    /// Whole domain when absent.
    pub region: Option<RegionCfg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeCfg {
    #[default]
    Periodic,
    Maxwell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryCfg {
    pub mode: ModeCfg,
    pub accommodation: ProfileCfg,
    pub wall_temperature: ProfileCfg,
}

impl Default for BoundaryCfg {
    fn default() -> Self {
        Self {
            mode: ModeCfg::Periodic,
            accommodation: ProfileCfg::Constant(0.0),
            wall_temperature: ProfileCfg::Constant(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightCfg {
    pub k: f64,
    pub zeta: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelCfg {
    pub dimension: usize,
    pub alpha: f64,
    pub tau: ProfileCfg,
    pub thermostats: Vec<ThermostatCfg>,
    pub boundary: BoundaryCfg,
    /// Defaults to `k = d+2, ζ = 0.01, s = 1`.
    pub weight: Option<WeightCfg>,
}

impl Default for ModelCfg {
    fn default() -> Self {
        Self {
            dimension: 1,
            alpha: 0.0,
            tau: ProfileCfg::Constant(1.0),
            thermostats: Vec::new(),
            boundary: BoundaryCfg::default(),
            weight: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridCfg {
    pub nx: usize,
    pub nv: usize,
    pub v_max: VMax,
}

impl Default for GridCfg {
    fn default() -> Self {
        Self {
            nx: 32,
            nv: 64,
            v_max: VMax::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnergyModeCfg {
    #[default]
    SelfConsistent,
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorCfg {
    /// `cfl_max_dt` when absent.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub energy_mode: EnergyModeCfg,
    /// Frozen diffusivity; defaults to `tau`.
    pub lambda: Option<ProfileCfg>,
    pub steady_tol: f64,
    pub max_steps: Option<usize>,
    pub stop_at_steady: bool,
    /// Temperature of the initial Maxwellian; defaults to the mean of `tau`.
    pub initial_temperature: Option<f64>,
}

impl Default for IntegratorCfg {
    fn default() -> Self {
        Self {
            dt: None,
            t_final: 10.0,
            energy_mode: EnergyModeCfg::SelfConsistent,
            lambda: None,
            steady_tol: 1e-10,
            max_steps: None,
            stop_at_steady: true,
            initial_temperature: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NessCfg {
    pub tol_fp: f64,
    pub theta: f64,
    pub max_outer: usize,
    pub alpha_budget: f64,
    pub interval_margin: f64,
    /// Step budget of each steady-state search.
    pub max_steps: usize,
}

impl Default for NessCfg {
    fn default() -> Self {
        Self {
            tol_fp: 1e-4,
            theta: 0.5,
            max_outer: 50,
            alpha_budget: 0.1,
            interval_margin: 0.05,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityCfg {
    pub amplitude: f64,
    pub t_final: f64,
}

impl Default for StabilityCfg {
    fn default() -> Self {
        Self {
            amplitude: 1e-3,
            t_final: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputCfg {
    pub directory: PathBuf,
    pub prefix: String,
    /// Trace cadence in steps; 0 keeps the first and last samples only.
    pub record_every: usize,
}

impl Default for OutputCfg {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            prefix: String::new(),
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelCfg,
    pub grid: GridCfg,
    pub integrator: IntegratorCfg,
    pub ness: NessCfg,
    pub stability: StabilityCfg,
    pub output: OutputCfg,
}

/// One configuration problem, located in the file when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: PathBuf,
    pub issues: Vec<ConfigIssue>,
}

impl ConfigError {
    fn single(file: &Path, path: &str, line: Option<usize>, message: String) -> Self {
        Self {
            file: file.to_path_buf(),
            issues: vec![ConfigIssue {
                path: path.to_string(),
                line,
                message,
            }],
        }
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.issues
            .iter()
            .any(|i| i.message.contains(needle) || i.path.contains(needle))
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, i) in self.issues.iter().enumerate() {
            if n > 0 {
                writeln!(f)?;
            }
            write!(f, "{}", self.file.display())?;
            if let Some(l) = i.line {
                write!(f, ":{l}")?;
            }
            if i.path.is_empty() {
                write!(f, ": {}", i.message)?;
            } else {
                write!(f, ": {}: {}", i.path, i.message)?;
            }
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of every key path in the document (`a.b[2].c`).
fn key_lines(text: &str) -> HashMap<String, usize> {
    use toml::de::{DeTable, DeValue};
    fn walk(text: &str, prefix: &str, table: &DeTable<'_>, out: &mut HashMap<String, usize>) {
        for (k, v) in table.iter() {
            let path = if prefix.is_empty() {
                k.get_ref().to_string()
            } else {
                format!("{prefix}.{}", k.get_ref())
            };
            out.entry(path.clone())
                .or_insert_with(|| line_at(text, k.span().start));
            match v.get_ref() {
                DeValue::Table(t) => walk(text, &path, t, out),
                DeValue::Array(a) => {
                    for (i, item) in a.iter().enumerate() {
                        let ip = format!("{path}[{i}]");
                        out.entry(ip.clone())
                            .or_insert_with(|| line_at(text, item.span().start));
                        if let DeValue::Table(t) = item.get_ref() {
                            walk(text, &ip, t, out);
                        }
                    }
                }
                _ => {}
            }
        }
    }
    let mut out = HashMap::new();
    if let Ok(doc) = DeTable::parse(text) {
        walk(text, "", doc.get_ref(), &mut out);
    }
    out
}

/// Line of `path` or of its closest present ancestor.
fn locate(lines: &HashMap<String, usize>, path: &str) -> Option<usize> {
    let mut p = path.to_string();
    loop {
        if let Some(&l) = lines.get(&p) {
            return Some(l);
        }
        let cut = p.rfind(['.', '['])?;
        p.truncate(cut);
    }
}

/// A parsed configuration together with everything resolved from it.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: RunConfig,
    pub system: KineticSystem,
    pub integrator: IntegratorConfig,
    pub steady: SteadyOptions,
    pub fixed_point: FixedPointOptions,
    pub initial_temperature: f64,
    pub v_max: f64,
}

impl RunConfig {
    pub fn weight(&self) -> WeightSpec {
        match &self.model.weight {
            Some(w) => WeightSpec {
                k: w.k,
                zeta: w.zeta,
                s: w.s,
            },
            None => WeightSpec::monitoring_default(self.model.dimension),
        }
    }

    pub fn model_params(&self) -> ModelParams {
        let d = self.model.dimension;
        ModelParams {
            dimension: d,
            alpha: self.model.alpha,
            tau: self.model.tau.to_profile(),
            thermostats: self
                .model
                .thermostats
                .iter()
                .map(|t| ThermostatSpec {
                    eta: t.eta,
                    temperature: t.temperature,
                    region: t
                        .region
                        .as_ref()
                        .map(|r| Region {
                            lower: r.lower.clone(),
                            upper: r.upper.clone(),
                        })
                        .unwrap_or_else(|| Region::whole(d)),
                })
                .collect(),
            boundary: BoundarySpec {
                mode: match self.model.boundary.mode {
                    ModeCfg::Periodic => BoundaryMode::Periodic,
                    ModeCfg::Maxwell => BoundaryMode::Maxwell,
                },
                accommodation: self.model.boundary.accommodation.to_profile(),
                wall_temperature: self.model.boundary.wall_temperature.to_profile(),
            },
            weight: self.weight(),
        }
    }

    /// Checks every invariant and resolves the run.
    pub fn resolve(&self) -> Result<Setup, ValidationErrors> {
        let mut errs = ValidationErrors::default();
        let params = self.model_params();
        if let Err(e) = validate_params(&params) {
            errs.0.extend(e.0);
        }
        let g = &self.grid;
        if g.nx < 2 {
            errs.push("grid.nx", "nx must be >= 2");
        }
        if g.nv < 2 || !g.nv.is_multiple_of(2) {
            errs.push("grid.nv", "nv must be even and >= 2");
        }
        if let VMax::Value(v) = g.v_max {
            if !(v > 0.0 && v.is_finite()) {
                errs.push("grid.v_max", "v_max must be positive or \"auto\"");
            }
        }
        let it = &self.integrator;
        if let Some(dt) = it.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                errs.push("integrator.dt", "dt must be finite and > 0");
            }
        }
        if !(it.t_final >= 0.0 && it.t_final.is_finite()) {
            errs.push("integrator.t_final", "t_final must be finite and >= 0");
        }
        if !(it.steady_tol >= 0.0) {
            errs.push("integrator.steady_tol", "steady_tol must be >= 0");
        }
        if let Some(t) = it.initial_temperature {
            if !(t > 0.0 && t.is_finite()) {
                errs.push("integrator.initial_temperature", "must be > 0");
            }
        }
        if it.lambda.is_some() && it.energy_mode != EnergyModeCfg::Frozen {
            errs.push("integrator.lambda", "lambda is only used with energy_mode = \"frozen\"");
        }
        let n = &self.ness;
        if !(n.tol_fp > 0.0) {
            errs.push("ness.tol_fp", "tol_fp must be > 0");
        }
        if !(n.theta > 0.0 && n.theta <= 1.0) {
            errs.push("ness.theta", "theta outside (0, 1]");
        }
        if n.max_outer == 0 {
            errs.push("ness.max_outer", "max_outer must be >= 1");
        }
        if !(n.alpha_budget >= 0.0) {
            errs.push("ness.alpha_budget", "alpha_budget must be >= 0");
        }
        if !(n.interval_margin >= 0.0) {
            errs.push("ness.interval_margin", "interval_margin must be >= 0");
        }
        if n.max_steps == 0 {
            errs.push("ness.max_steps", "max_steps must be >= 1");
        }
        let s = &self.stability;
        if !(s.amplitude >= 0.0 && s.amplitude.is_finite()) {
            errs.push("stability.amplitude", "amplitude must be finite and >= 0");
        }
        if !(s.t_final > 0.0 && s.t_final.is_finite()) {
            errs.push("stability.t_final", "t_final must be finite and > 0");
        }
        if !errs.is_empty() {
            return Err(errs);
        }

        let v_max = match g.v_max {
            VMax::Value(v) => v,
            VMax::Auto => PhaseSpaceGrid::default_v_max(params.max_temperature()),
        };
        let grid = PhaseSpaceGrid::new(params.dimension, g.nx, g.nv, v_max)
            .map(Arc::new)
            .map_err(|e| single("grid", e.to_string()))?;
        if let Some(len) = params.tau.table_len() {
            if len != grid.n_cells() {
                return Err(single(
                    "model.tau",
                    format!("table has {len} entries, grid has {} cells", grid.n_cells()),
                ));
            }
        }
        let system = KineticSystem::new(params, grid.clone()).map_err(|e| match e {
            kfpness_core::Error::Validation(v) => v,
            kfpness_core::Error::Shape(m) => single("model", m),
            other => single("model.boundary", other.to_string()),
        })?;
        let cfl = cfl_max_dt(&grid);
        let dt = it.dt.unwrap_or(cfl);
        if dt > cfl * (1.0 + 1e-12) {
            return Err(single(
                "integrator.dt",
                format!("dt = {dt} exceeds the CFL bound {cfl}"),
            ));
        }
        let energy_mode = match it.energy_mode {
            EnergyModeCfg::SelfConsistent => EnergyMode::SelfConsistent,
            EnergyModeCfg::Frozen => {
                let values = match &it.lambda {
                    Some(p) => {
                        let p = p.to_profile();
                        if p.table_len().is_some_and(|l| l != grid.n_cells()) {
                            return Err(single(
                                "integrator.lambda",
                                format!("table needs {} entries", grid.n_cells()),
                            ));
                        }
                        (0..grid.n_cells())
                            .map(|c| p.eval(c, grid.cell_center(c)[0]))
                            .collect()
                    }
                    None => system.tau().to_vec(),
                };
                EnergyMode::Frozen(
                    DiffusivityProfile::new(values)
                        .map_err(|_| single("integrator.lambda", "lambda must be > 0".into()))?,
                )
            }
        };
        let weight = self.weight();
        let integrator = IntegratorConfig {
            dt,
            t_final: it.t_final,
            energy_mode,
            steady_tol: it.steady_tol,
            record_every: self.output.record_every,
            weight,
            max_steps: it.max_steps,
            stop_at_steady: it.stop_at_steady,
            renormalize_initial: true,
        };
        integrator.validate(&grid)?;
        let steady = SteadyOptions {
            dt,
            steady_tol: it.steady_tol,
            max_steps: n.max_steps,
            weight,
        };
        let fixed_point = FixedPointOptions {
            theta: n.theta,
            tol_fp: n.tol_fp,
            max_outer: n.max_outer,
            alpha_budget: n.alpha_budget,
            interval_margin: n.interval_margin,
            steady: steady.clone(),
        };
        let initial_temperature = it.initial_temperature.unwrap_or_else(|| system.tau_mean());
        Ok(Setup {
            config: self.clone(),
            system,
            integrator,
            steady,
            fixed_point,
            initial_temperature,
            v_max,
        })
    }
}

fn single(path: &str, message: String) -> ValidationErrors {
    let mut e = ValidationErrors::default();
    e.push(path, message);
    e
}

/// Parses TOML text strictly. `file` is only used in messages.
pub fn parse_config_str(text: &str, file: &Path) -> Result<Setup, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| {
        let line = e.span().map(|s| line_at(text, s.start));
        ConfigError::single(file, "", line, e.message().to_string())
    })?;
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        let inner = e.into_inner();
        let line = inner
            .span()
            .map(|s| line_at(text, s.start))
            .or_else(|| locate(&key_lines(text), &path));
        ConfigError::single(file, &path, line, inner.message().to_string())
    })?;
    cfg.resolve().map_err(|errs| {
        let lines = key_lines(text);
        ConfigError {
            file: file.to_path_buf(),
            issues: errs
                .iter()
                .map(|v| ConfigIssue {
                    path: v.path.clone(),
                    line: locate(&lines, &v.path),
                    message: v.message.clone(),
                })
                .collect(),
        }
    })
}

pub fn parse_config(path: &Path) -> Result<Setup, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::single(path, "", None, format!("cannot read: {e}")))?;
    parse_config_str(&text, path)
}

impl Setup {
    /// Fully materialized configuration, echoed into run metadata.
    pub fn metadata(&self) -> serde_json::Value {
        let mut cfg = self.config.clone();
        cfg.grid.v_max = VMax::Value(self.v_max);
        cfg.integrator.dt = Some(self.integrator.dt);
        cfg.integrator.initial_temperature = Some(self.initial_temperature);
        let w = self.config.weight();
        cfg.model.weight = Some(WeightCfg {
            k: w.k,
            zeta: w.zeta,
            s: w.s,
        });
        serde_json::json!({
            "config": cfg,
            "resolved": {
                "v_max": self.v_max,
                "v_max_auto": self.config.grid.v_max == VMax::Auto,
                "cfl_max_dt": cfl_max_dt(self.system.grid()),
                "wall_kernel_renormalization": self.system.wall().kernel_deviation(),
            }
        })
    }
}
