//! Versioned TOML experiment configuration.
//!
//! ```toml
//! version = 1
//! seed = 7
//! replicas = 200
//! representation = "moving-average"
//!
//! [hurst]
//! kind = "sinusoidal"
//! params = [0.5, 0.2, 6.283185307179586, 0.0]
//! beta = 1.0
//! holder_constant = 1.26
//!
//! [grid]
//! t0 = 0.0
//! dt = 0.0009765625
//! n = 1025
//!
//! [[statistics]]
//! name = "holder-localtime"
//! t0 = 0.5
//! ```
//!
//! Unknown keys, a missing seed and out-of-range parameters are all reported
//! together, each with the dotted path of the offending field.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::hurst::{HurstFunction, HurstKind};
use crate::lass::{xi_bound, ScalingPair, TestFunction, DEFAULT_GRID_N, DEFAULT_PERMUTATIONS, MIN_FDD_REPLICAS};
use crate::localtime::{Level, MIN_MOMENT_REPLICAS};
use crate::path::{Representation, TimeGrid};
use crate::regularity::{DEFAULT_DELTA_FLOOR, DEFAULT_DELTA_MAX, MIN_HOLDER_SCALES};
use crate::synth::{FbmMethod, KernelQuadrature, SynthSettings};

pub const CONFIG_VERSION: u32 = 1;
/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "MBM_LAB_OUT";
pub const DEFAULT_OUTPUT: &str = "mbm-lab-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HurstSpec {
    pub kind: String,
    pub params: Vec<f64>,
    pub horizon: f64,
    pub beta: Option<f64>,
    pub holder_constant: Option<f64>,
}

impl Default for HurstSpec {
    fn default() -> Self {
        Self {
            kind: "constant".into(),
            params: vec![0.5],
            horizon: 1.0,
            beta: None,
            holder_constant: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t0: 0.0,
            dt: 1.0 / 1024.0,
            n: 1025,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisSpec {
    pub t_past: f64,
    pub q: usize,
    pub omega_max: f64,
    pub n_freq: usize,
    pub fbm_method: FbmMethod,
}

impl Default for SynthesisSpec {
    fn default() -> Self {
        let s = SynthSettings::default();
        Self {
            t_past: s.kq.t_past,
            q: s.kq.q,
            omega_max: s.omega_max,
            n_freq: s.n_freq,
            fbm_method: s.fbm_method,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalTimeSpec {
    /// Bin width factor: `dx = kappa·dt^{mean H}`.
    pub kappa: f64,
}

impl Default for LocalTimeSpec {
    fn default() -> Self {
        Self { kappa: 1.0 }
    }
}

/// Verdict thresholds; tunable without recompiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub p_value: f64,
    pub replica_failure_budget: f64,
    pub bounded_growth: f64,
    pub inflation: f64,
    pub chung_bracket: (f64, f64),
    pub lil_bracket: (f64, f64),
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            p_value: 0.01,
            replica_failure_budget: crate::ensemble::DEFAULT_FAILURE_BUDGET,
            bounded_growth: crate::regularity::BOUNDED_GROWTH,
            inflation: 5.0,
            chung_bracket: (0.85, 1.45),
            lil_bracket: (1.0, 1.9),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OccupationIdentity {
    /// Random bin-aligned indicators per replica.
    pub indicators: usize,
    pub rel_tol: f64,
}

impl Default for OccupationIdentity {
    fn default() -> Self {
        Self {
            indicators: 20,
            rel_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarianceBounds {
    pub pairs: usize,
    /// Defaults to the grid span.
    pub interval: Option<(f64, f64)>,
}

impl Default for VarianceBounds {
    fn default() -> Self {
        Self {
            pairs: 50,
            interval: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMode {
    /// Compare with the Brownian closed forms `h^{m/2} E|N|^m` at level 0.
    Levy,
    /// Fit one `Ĉ` with `E_m ≤ Ĉ^m (m!)^{H}` across the orders.
    #[default]
    Fit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Moments {
    pub orders: Vec<u32>,
    pub mode: MomentMode,
    pub t: Option<f64>,
    /// Window `h`; defaults to the rest of the grid after `t`.
    pub window: Option<f64>,
    pub level: Level,
    /// Agreement band in standard errors for the closed-form comparison.
    pub se_multiplier: f64,
}

impl Default for Moments {
    fn default() -> Self {
        Self {
            orders: vec![1, 2, 3],
            mode: MomentMode::Fit,
            t: None,
            window: None,
            level: Level::Fixed(0.0),
            se_multiplier: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HolderPath {
    /// Defaults to the grid midpoint.
    pub t0: Option<f64>,
    /// Defaults to a quarter of the grid span.
    pub delta_max: Option<f64>,
    pub scales: usize,
    pub tolerance: f64,
}

impl Default for HolderPath {
    fn default() -> Self {
        Self {
            t0: None,
            delta_max: None,
            scales: MIN_HOLDER_SCALES,
            tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HolderLocalTime {
    pub t0: Option<f64>,
    /// Defaults to the span after `t0`.
    pub delta_max: Option<f64>,
    pub scales: usize,
    /// Sliding-window width as a fraction of the local path range.
    pub range_window: f64,
    pub tolerance: f64,
}

impl Default for HolderLocalTime {
    fn default() -> Self {
        Self {
            t0: None,
            delta_max: None,
            scales: MIN_HOLDER_SCALES,
            range_window: 0.1,
            tolerance: 0.07,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLaw {
    pub t0: Option<f64>,
    pub delta_max: f64,
    pub delta_floor: f64,
    /// Added to the normalizing exponent; nonzero values are sensitivity probes.
    pub exponent_shift: f64,
    /// Also run a standard BM ensemble and two-sample test the final values.
    pub compare_bm: bool,
}

impl Default for PathLaw {
    fn default() -> Self {
        Self {
            t0: None,
            delta_max: DEFAULT_DELTA_MAX,
            delta_floor: DEFAULT_DELTA_FLOOR,
            exponent_shift: 0.0,
            compare_bm: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeModulus {
    pub t: Option<f64>,
    /// Local modulus level; the uniform modulus uses `x` instead.
    pub level: Level,
    /// Uniform modulus level; defaults to the path's starting value.
    pub x: Option<f64>,
    pub delta_max: f64,
    pub delta_floor: f64,
    pub exponent_shift: f64,
    pub perturbation: f64,
}

impl Default for TimeModulus {
    fn default() -> Self {
        Self {
            t: None,
            level: Level::PathPoint,
            x: None,
            delta_max: DEFAULT_DELTA_MAX,
            delta_floor: DEFAULT_DELTA_FLOOR,
            exponent_shift: 0.0,
            perturbation: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpaceModulus {
    pub interval: Option<(f64, f64)>,
    /// Defaults to the admissible bound minus 0.1.
    pub alpha: Option<f64>,
    pub perturbation: f64,
    /// Defaults to `2·span^{sup H}`.
    pub spacing_max: Option<f64>,
    /// Defaults to two bins.
    pub spacing_min: Option<f64>,
}

impl Default for SpaceModulus {
    fn default() -> Self {
        Self {
            interval: None,
            alpha: None,
            perturbation: 0.1,
            spacing_max: None,
            spacing_min: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RangeInequality {
    pub t0: Option<f64>,
    /// Defaults to dyadic scales from half the remaining span.
    pub deltas: Vec<f64>,
}

impl Default for RangeInequality {
    fn default() -> Self {
        Self {
            t0: None,
            deltas: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LassLocalTime {
    pub t0: f64,
    pub x: f64,
    pub rhos: Vec<f64>,
    pub t_coords: Vec<f64>,
    pub grid_n: usize,
    pub kappa: f64,
    pub permutations: usize,
    pub reference_shift: f64,
}

impl Default for LassLocalTime {
    fn default() -> Self {
        let s = crate::lass::LassSettings::new(0.5, MIN_FDD_REPLICAS);
        Self {
            t0: s.t0,
            x: s.x,
            rhos: s.rhos,
            t_coords: s.t_coords,
            grid_n: s.grid_n,
            kappa: s.kappa,
            permutations: s.permutations,
            reference_shift: s.reference_shift,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightedOccupation {
    pub t0: f64,
    pub rho: f64,
    pub y: f64,
    pub t: f64,
    pub a: f64,
    /// Defaults to `a + 1 - H(t0)`.
    pub b: Option<f64>,
    /// Defaults to half the admissible bound.
    pub xi: Option<f64>,
    pub grid_n: usize,
    pub permutations: usize,
    pub functions: Vec<TestFunction>,
}

impl Default for WeightedOccupation {
    fn default() -> Self {
        Self {
            t0: 0.5,
            rho: 0.01,
            y: 0.0,
            t: 1.0,
            a: 1.3,
            b: None,
            xi: None,
            grid_n: 4 * DEFAULT_GRID_N,
            permutations: DEFAULT_PERMUTATIONS,
            functions: vec![
                TestFunction::Indicator {
                    lo: -1.0,
                    hi: 1.0,
                    height: 0.5,
                },
                TestFunction::Triangle {
                    center: 0.0,
                    half_width: 1.0,
                    height: 1.0,
                },
            ],
        }
    }
}

/// One selected statistic with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Statistic {
    OccupationIdentity(OccupationIdentity),
    VarianceBounds(VarianceBounds),
    Moments(Moments),
    HolderPath(HolderPath),
    HolderLocaltime(HolderLocalTime),
    Chung(PathLaw),
    Lil(PathLaw),
    LocalModulus(TimeModulus),
    UniformModulus(TimeModulus),
    SpaceModulus(SpaceModulus),
    RangeInequality(RangeInequality),
    LassLocaltime(LassLocalTime),
    WeightedOccupation(WeightedOccupation),
}

pub const STATISTIC_NAMES: [&str; 13] = [
    "occupation-identity",
    "variance-bounds",
    "moments",
    "holder-path",
    "holder-localtime",
    "chung",
    "lil",
    "local-modulus",
    "uniform-modulus",
    "space-modulus",
    "range-inequality",
    "lass-localtime",
    "weighted-occupation",
];

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::OccupationIdentity(_) => "occupation-identity",
            Statistic::VarianceBounds(_) => "variance-bounds",
            Statistic::Moments(_) => "moments",
            Statistic::HolderPath(_) => "holder-path",
            Statistic::HolderLocaltime(_) => "holder-localtime",
            Statistic::Chung(_) => "chung",
            Statistic::Lil(_) => "lil",
            Statistic::LocalModulus(_) => "local-modulus",
            Statistic::UniformModulus(_) => "uniform-modulus",
            Statistic::SpaceModulus(_) => "space-modulus",
            Statistic::RangeInequality(_) => "range-inequality",
            Statistic::LassLocaltime(_) => "lass-localtime",
            Statistic::WeightedOccupation(_) => "weighted-occupation",
        }
    }

    /// The statistic with default parameters.
    pub fn default_for(name: &str) -> Option<Self> {
        Some(match name {
            "occupation-identity" => Statistic::OccupationIdentity(Default::default()),
            "variance-bounds" => Statistic::VarianceBounds(Default::default()),
            "moments" => Statistic::Moments(Default::default()),
            "holder-path" => Statistic::HolderPath(Default::default()),
            "holder-localtime" => Statistic::HolderLocaltime(Default::default()),
            "chung" => Statistic::Chung(Default::default()),
            "lil" => Statistic::Lil(Default::default()),
            "local-modulus" => Statistic::LocalModulus(Default::default()),
            "uniform-modulus" => Statistic::UniformModulus(Default::default()),
            "space-modulus" => Statistic::SpaceModulus(Default::default()),
            "range-inequality" => Statistic::RangeInequality(Default::default()),
            "lass-localtime" => Statistic::LassLocaltime(Default::default()),
            "weighted-occupation" => Statistic::WeightedOccupation(Default::default()),
            _ => return None,
        })
    }

    fn decode(name: &str, v: toml::Value, path: &str, out: &mut Vec<Violation>) -> Option<Self> {
        Some(match name {
            "occupation-identity" => Statistic::OccupationIdentity(decode(v, path, out)?),
            "variance-bounds" => Statistic::VarianceBounds(decode(v, path, out)?),
            "moments" => Statistic::Moments(decode(v, path, out)?),
            "holder-path" => Statistic::HolderPath(decode(v, path, out)?),
            "holder-localtime" => Statistic::HolderLocaltime(decode(v, path, out)?),
            "chung" => Statistic::Chung(decode(v, path, out)?),
            "lil" => Statistic::Lil(decode(v, path, out)?),
            "local-modulus" => Statistic::LocalModulus(decode(v, path, out)?),
            "uniform-modulus" => Statistic::UniformModulus(decode(v, path, out)?),
            "space-modulus" => Statistic::SpaceModulus(decode(v, path, out)?),
            "range-inequality" => Statistic::RangeInequality(decode(v, path, out)?),
            "lass-localtime" => Statistic::LassLocaltime(decode(v, path, out)?),
            "weighted-occupation" => Statistic::WeightedOccupation(decode(v, path, out)?),
            other => {
                out.push(Violation::new(
                    format!("{path}.name"),
                    format!("unknown statistic '{other}' (known: {})", STATISTIC_NAMES.join(", ")),
                ));
                return None;
            }
        })
    }
}

/// A parsed and validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub replicas: usize,
    pub representation: Representation,
    /// Run location; not part of the echoed configuration.
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub hurst: HurstSpec,
    pub grid: GridSpec,
    pub synthesis: SynthesisSpec,
    pub localtime: LocalTimeSpec,
    pub thresholds: Thresholds,
    pub statistics: Vec<Statistic>,
}

/// Command-line values that replace the corresponding config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn hurst_function(&self) -> Result<HurstFunction> {
        build_hurst(&self.hurst)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.t0, self.grid.dt, self.grid.n)
    }

    pub fn synth_settings(&self) -> SynthSettings {
        SynthSettings {
            kq: KernelQuadrature {
                t_past: self.synthesis.t_past,
                q: self.synthesis.q,
            },
            omega_max: self.synthesis.omega_max,
            n_freq: self.synthesis.n_freq,
            fbm_method: self.synthesis.fbm_method,
        }
    }

    /// Output directory: config value, else `MBM_LAB_OUT`, else `mbm-lab-out`.
    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
    }
}

fn build_hurst(spec: &HurstSpec) -> Result<HurstFunction> {
    let kind = HurstKind::from_params(&spec.kind, &spec.params)?;
    let h = if let HurstKind::Constant { value } = kind {
        HurstFunction::constant(value)?
    } else {
        HurstFunction::new(kind, spec.horizon)?
    };
    match spec.beta {
        Some(beta) => h.with_holder(beta, spec.holder_constant.unwrap_or(0.0)),
        None => Ok(h),
    }
}

fn decode<T: DeserializeOwned>(v: toml::Value, path: &str, out: &mut Vec<Violation>) -> Option<T> {
    let mut unknown = Vec::new();
    let r = serde_ignored::deserialize(v, |p| unknown.push(p.to_string()));
    for u in unknown {
        out.push(Violation::new(join(path, &u), "unknown key"));
    }
    match r {
        Ok(t) => Some(t),
        Err(e) => {
            out.push(Violation::new(path, e.to_string().trim().to_string()));
            None
        }
    }
}

fn join(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a}.{b}"),
    }
}

fn section<T: DeserializeOwned + Default>(t: &toml::Table, key: &str, out: &mut Vec<Violation>) -> T {
    match t.get(key) {
        None => T::default(),
        Some(v) => decode(v.clone(), key, out).unwrap_or_default(),
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, &Overrides::default())
}

/// Parses `text`, applies `overrides` (flags win) and validates. On failure
/// the error lists every violation found.
pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![Violation::new("<document>", e.to_string().trim())]))?;
    if let Some(s) = overrides.seed {
        let v = i64::try_from(s).map_err(|_| {
            Error::Config(vec![Violation::new("seed", "seed must fit in a signed 64-bit integer")])
        })?;
        table.insert("seed".into(), toml::Value::Integer(v));
    }
    if let Some(r) = overrides.replicas {
        table.insert("replicas".into(), toml::Value::Integer(r as i64));
    }
    if let Some(o) = &overrides.output {
        table.insert("output".into(), toml::Value::String(o.to_string_lossy().into_owned()));
    }

    let mut out = Vec::new();
    const KNOWN: [&str; 11] = [
        "version",
        "seed",
        "replicas",
        "representation",
        "output",
        "hurst",
        "grid",
        "synthesis",
        "localtime",
        "thresholds",
        "statistics",
    ];
    for k in table.keys() {
        if !KNOWN.contains(&k.as_str()) {
            out.push(Violation::new(k.clone(), "unknown key"));
        }
    }
    let version = match table.get("version") {
        None => {
            out.push(Violation::new("version", format!("missing; the current schema is version {CONFIG_VERSION}")));
            CONFIG_VERSION
        }
        Some(v) => decode::<u32>(v.clone(), "version", &mut out).unwrap_or(CONFIG_VERSION),
    };
    if version != CONFIG_VERSION {
        out.push(Violation::new(
            "version",
            format!("unsupported version {version}, expected {CONFIG_VERSION}"),
        ));
    }
    let seed = match table.get("seed") {
        None => {
            out.push(Violation::new("seed", "missing; a master seed is required"));
            None
        }
        Some(v) => decode::<u64>(v.clone(), "seed", &mut out),
    };
    let replicas = match table.get("replicas") {
        None => 100,
        Some(v) => decode::<usize>(v.clone(), "replicas", &mut out).unwrap_or(0),
    };
    let representation = match table.get("representation") {
        None => Representation::MovingAverage,
        Some(v) => decode(v.clone(), "representation", &mut out).unwrap_or(Representation::MovingAverage),
    };
    let output = table
        .get("output")
        .and_then(|v| decode::<PathBuf>(v.clone(), "output", &mut out));
    let hurst: HurstSpec = section(&table, "hurst", &mut out);
    let grid: GridSpec = section(&table, "grid", &mut out);
    let synthesis: SynthesisSpec = section(&table, "synthesis", &mut out);
    let localtime: LocalTimeSpec = section(&table, "localtime", &mut out);
    let thresholds: Thresholds = section(&table, "thresholds", &mut out);

    let mut statistics = Vec::new();
    match table.get("statistics") {
        None => {}
        Some(toml::Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                let path = format!("statistics[{i}]");
                let mut t = match item {
                    toml::Value::Table(t) => t.clone(),
                    _ => {
                        out.push(Violation::new(path, "expected a table"));
                        continue;
                    }
                };
                let name = match t.remove("name") {
                    Some(toml::Value::String(s)) => s,
                    Some(_) => {
                        out.push(Violation::new(format!("{path}.name"), "expected a string"));
                        continue;
                    }
                    None => {
                        out.push(Violation::new(format!("{path}.name"), "missing statistic name"));
                        continue;
                    }
                };
                if let Some(s) = Statistic::decode(&name, toml::Value::Table(t), &path, &mut out) {
                    statistics.push(s);
                }
            }
        }
        Some(_) => out.push(Violation::new("statistics", "expected an array of tables")),
    }

    let cfg = ExperimentConfig {
        version,
        seed: seed.unwrap_or(0),
        replicas,
        representation,
        output,
        hurst,
        grid,
        synthesis,
        localtime,
        thresholds,
        statistics,
    };
    out.extend(validate(&cfg));
    if out.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(out))
    }
}

/// Semantic checks of an already decoded configuration.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |path: &str, msg: String| out.push(Violation::new(path, msg));

    if cfg.replicas == 0 {
        bad("replicas", "must be at least 1".into());
    }
    let hurst = match build_hurst(&cfg.hurst) {
        Ok(h) => Some(h),
        Err(e) => {
            let field = if e.to_string().contains("beta") { "hurst.beta" } else { "hurst" };
            bad(field, strip(&e));
            None
        }
    };
    if cfg.hurst.holder_constant.is_some() && cfg.hurst.beta.is_none() {
        bad("hurst.holder_constant", "given without hurst.beta".into());
    }
    let grid = match cfg.time_grid() {
        Ok(g) => Some(g),
        Err(e) => {
            bad("grid", strip(&e));
            None
        }
    };
    if let (Some(h), Some(g)) = (&hurst, &grid) {
        if g.t0 < 0.0 {
            bad("grid.t0", "must be >= 0".into());
        }
        if !h.is_constant() && g.end() > h.horizon * (1.0 + 1e-12) {
            bad(
                "grid",
                format!("grid end {} exceeds hurst.horizon {}", g.end(), h.horizon),
            );
        }
        if cfg.representation == Representation::FbmExact && !h.is_constant() {
            bad("representation", "fbm-exact requires a constant hurst function".into());
        }
    }
    if let Err(e) = cfg.synth_settings().kq.validate() {
        bad("synthesis", strip(&e));
    }
    if !(cfg.synthesis.omega_max > 0.0) {
        bad("synthesis.omega_max", "must be positive".into());
    }
    if cfg.synthesis.n_freq < 2 {
        bad("synthesis.n_freq", "must be at least 2".into());
    }
    if !(cfg.localtime.kappa > 0.0) {
        bad("localtime.kappa", "must be positive".into());
    }
    let th = &cfg.thresholds;
    if !(th.p_value > 0.0 && th.p_value < 1.0) {
        bad("thresholds.p_value", "must lie in (0, 1)".into());
    }
    if !(th.replica_failure_budget >= 0.0 && th.replica_failure_budget < 1.0) {
        bad("thresholds.replica_failure_budget", "must lie in [0, 1)".into());
    }
    if !(th.bounded_growth > 0.0) {
        bad("thresholds.bounded_growth", "must be positive".into());
    }
    if !(th.inflation > 1.0) {
        bad("thresholds.inflation", "must exceed 1".into());
    }
    for (name, (lo, hi)) in [("chung_bracket", th.chung_bracket), ("lil_bracket", th.lil_bracket)] {
        if !(lo < hi) {
            bad(&format!("thresholds.{name}"), "lower end must be below the upper end".into());
        }
    }

    for (i, s) in cfg.statistics.iter().enumerate() {
        let p = format!("statistics[{i}]");
        for (field, msg) in statistic_violations(cfg, s, hurst.as_ref(), grid.as_ref()) {
            bad(&join(&p, field), msg);
        }
    }
    out
}

fn strip(e: &Error) -> String {
    match e {
        Error::Domain(m) | Error::Range(m) => m.clone(),
        other => other.to_string(),
    }
}

fn on_grid(g: &TimeGrid, t: f64) -> bool {
    g.index_of(t).is_some()
}

fn statistic_violations(
    cfg: &ExperimentConfig,
    s: &Statistic,
    hurst: Option<&HurstFunction>,
    grid: Option<&TimeGrid>,
) -> Vec<(&'static str, String)> {
    let mut v: Vec<(&'static str, String)> = Vec::new();
    let time = |v: &mut Vec<(&'static str, String)>, field: &'static str, t: Option<f64>| {
        if let (Some(t), Some(g)) = (t, grid) {
            if !on_grid(g, t) {
                v.push((field, format!("{t} is not a grid time")));
            }
        }
    };
    match s {
        Statistic::OccupationIdentity(p) => {
            if p.indicators == 0 {
                v.push(("indicators", "must be at least 1".into()));
            }
            if !(p.rel_tol > 0.0) {
                v.push(("rel_tol", "must be positive".into()));
            }
        }
        Statistic::VarianceBounds(p) => {
            if p.pairs < 2 {
                v.push(("pairs", "must be at least 2".into()));
            }
            if let Some((a, b)) = p.interval {
                if !(a >= 0.0 && b > a) {
                    v.push(("interval", format!("[{a}, {b}] is not a valid interval")));
                }
            }
            if cfg.representation == Representation::FbmExact {
                v.push(("name", "variance bounds need an mBm representation".into()));
            }
        }
        Statistic::Moments(p) => {
            if p.orders.is_empty() || p.orders.iter().any(|m| !(1..=6).contains(m)) {
                v.push(("orders", "orders must be non-empty and within 1..=6".into()));
            }
            if cfg.replicas < MIN_MOMENT_REPLICAS {
                v.push(("name", format!("moments need at least {MIN_MOMENT_REPLICAS} replicas")));
            }
            time(&mut v, "t", p.t);
            if let Some(w) = p.window {
                if !(w > 0.0) {
                    v.push(("window", "must be positive".into()));
                }
            }
            if p.mode == MomentMode::Levy {
                if hurst.map_or(false, |h| !(h.is_constant() && (h.mu - 0.5).abs() < 1e-12)) {
                    v.push(("mode", "the levy closed forms need a constant H = 0.5".into()));
                }
                if p.level != Level::Fixed(0.0) {
                    v.push(("level", "the levy closed forms are for the level x = 0".into()));
                }
                if let Some(t) = p.t {
                    if t != cfg.grid.t0 {
                        v.push(("t", "the levy closed forms start at the grid origin".into()));
                    }
                }
                if cfg.grid.t0 != 0.0 {
                    v.push(("mode", "the levy closed forms need grid.t0 = 0".into()));
                }
                if cfg.representation == Representation::Harmonizable {
                    v.push(("mode", "the harmonizable field is not standard BM at H = 0.5".into()));
                }
            }
        }
        Statistic::HolderPath(p) => {
            time(&mut v, "t0", p.t0);
            if p.scales < MIN_HOLDER_SCALES {
                v.push(("scales", format!("need at least {MIN_HOLDER_SCALES}")));
            }
            if !(p.tolerance > 0.0) {
                v.push(("tolerance", "must be positive".into()));
            }
        }
        Statistic::HolderLocaltime(p) => {
            time(&mut v, "t0", p.t0);
            if p.scales < MIN_HOLDER_SCALES {
                v.push(("scales", format!("need at least {MIN_HOLDER_SCALES}")));
            }
            if !(p.range_window > 0.0) {
                v.push(("range_window", "must be positive".into()));
            }
            if !(p.tolerance > 0.0) {
                v.push(("tolerance", "must be positive".into()));
            }
        }
        Statistic::Chung(p) | Statistic::Lil(p) => {
            time(&mut v, "t0", p.t0);
            if !(p.delta_max > p.delta_floor && p.delta_floor > 0.0) {
                v.push(("delta_max", "need delta_max > delta_floor > 0".into()));
            }
            if p.delta_max >= (-1.0f64).exp().min(1.0) {
                v.push(("delta_max", "log|log delta| must be positive on the ladder (delta_max < 1/e)".into()));
            }
            if p.compare_bm && matches!(s, Statistic::Lil(_)) {
                v.push(("compare_bm", "only supported for chung".into()));
            }
            if p.exponent_shift != 0.0 && matches!(s, Statistic::Chung(_)) {
                v.push(("exponent_shift", "only supported for lil".into()));
            }
        }
        Statistic::LocalModulus(p) | Statistic::UniformModulus(p) => {
            time(&mut v, "t", p.t);
            if !(p.delta_max > p.delta_floor && p.delta_floor > 0.0) {
                v.push(("delta_max", "need delta_max > delta_floor > 0".into()));
            }
            if !(p.perturbation > 0.0) {
                v.push(("perturbation", "must be positive".into()));
            }
        }
        Statistic::SpaceModulus(p) => {
            if let Some((a, b)) = p.interval {
                if !(b > a) {
                    v.push(("interval", format!("[{a}, {b}] is empty")));
                }
                time(&mut v, "interval", Some(a));
                time(&mut v, "interval", Some(b));
            }
            if let Some(a) = p.alpha {
                if !(a > 0.0) {
                    v.push(("alpha", "must be positive".into()));
                }
            }
            if !(p.perturbation > 0.0) {
                v.push(("perturbation", "must be positive".into()));
            }
        }
        Statistic::RangeInequality(p) => {
            time(&mut v, "t0", p.t0);
            if p.deltas.iter().any(|&d| !(d > 0.0)) {
                v.push(("deltas", "must be positive".into()));
            }
        }
        Statistic::LassLocaltime(p) => {
            if cfg.replicas < MIN_FDD_REPLICAS {
                v.push(("name", format!("fdd comparisons need at least {MIN_FDD_REPLICAS} replicas")));
            }
            if p.rhos.is_empty() || p.rhos.windows(2).any(|w| !(w[1] < w[0])) || p.rhos.iter().any(|&r| !(r > 0.0)) {
                v.push(("rhos", "must be positive and strictly decreasing".into()));
            }
            if p.t_coords.is_empty() || p.t_coords.iter().any(|&u| !(u > 0.0 && u <= 1.0)) {
                v.push(("t_coords", "must lie in (0, 1]".into()));
            }
            if p.grid_n < 2 {
                v.push(("grid_n", "must be at least 2".into()));
            }
            if !(p.kappa > 0.0) {
                v.push(("kappa", "must be positive".into()));
            }
            if let Some(h) = hurst {
                if !(p.t0 >= 0.0 && p.t0 <= h.horizon) {
                    v.push(("t0", format!("must lie in [0, {}]", h.horizon)));
                }
            }
        }
        Statistic::WeightedOccupation(p) => {
            if cfg.replicas < MIN_FDD_REPLICAS {
                v.push(("name", format!("two-sample tests need at least {MIN_FDD_REPLICAS} replicas")));
            }
            if p.functions.is_empty() {
                v.push(("functions", "need at least one test function".into()));
            }
            for f in &p.functions {
                if let Err(e) = f.validate() {
                    v.push(("functions", strip(&e)));
                }
            }
            if !(p.rho > 0.0 && p.rho < 1.0) {
                v.push(("rho", "must lie in (0, 1)".into()));
            }
            if !(p.t > 0.0 && p.t <= 1.0) {
                v.push(("t", "must lie in (0, 1]".into()));
            }
            if let Some(h) = hurst {
                match h.eval(p.t0) {
                    Ok(h0) => {
                        let b = p.b.unwrap_or(p.a + 1.0 - h0);
                        for m in (ScalingPair { a: p.a, b }).violations(h0) {
                            v.push(("a", m));
                        }
                        let bound = xi_bound(h.nu);
                        let xi = p.xi.unwrap_or(0.5 * bound);
                        if !(xi > 0.0 && xi < bound) {
                            v.push(("xi", format!("xi = {xi} must lie in (0, {bound}) for sup H = {}", h.nu)));
                        }
                    }
                    Err(e) => v.push(("t0", strip(&e))),
                }
            }
        }
    }
    v
}
