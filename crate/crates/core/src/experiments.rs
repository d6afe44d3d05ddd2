//! Scenario configs, parameter validation and CSV result tables.
//!
//! A config names a scenario, a master seed and a flat key/value parameter
//! map. Missing keys take documented defaults; every resolved value is echoed
//! into the table metadata so a table can be regenerated from its header.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::channels::{precompensate, CoherentMacChannel, PrecompPolicy, DEFAULT_CLIP};
use crate::constellation::{
    latitude_grid, los_profile, ota_downlink_mse, GroundStation, SyncModel, WalkerConstellation,
    DEFAULT_CARRIER_HZ, DEFAULT_MASK_DEG, DEFAULT_PROFILE_DURATION_S,
};
use crate::detection::{self, DetectionConfig, Hypotheses};
use crate::error::{Error, Result};
use crate::estimation::{self, EstimationConfig, PtotMode};
use crate::mc::{accumulate, with_threads, Accumulator, SeedStream};
use crate::nomographic::{self, BUILTIN_NAMES};
use crate::separation::{self, uncoded_transceive};
use crate::sources::{adder_mac_preset, sample_pair, CorrelatedBinaryPair, GaussianCeoModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    Separation,
    Nomographic,
    EstimationScaling,
    DetectionSweep,
    ConstellationProfile,
    ConstellationOtaMse,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Separation,
        Scenario::Nomographic,
        Scenario::EstimationScaling,
        Scenario::DetectionSweep,
        Scenario::ConstellationProfile,
        Scenario::ConstellationOtaMse,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Separation => "separation",
            Scenario::Nomographic => "nomographic",
            Scenario::EstimationScaling => "estimation-scaling",
            Scenario::DetectionSweep => "detection-sweep",
            Scenario::ConstellationProfile => "constellation-profile",
            Scenario::ConstellationOtaMse => "constellation-ota-mse",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or(Error::Unknown {
                kind: "scenario",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub parameters: BTreeMap<String, String>,
    pub output_path: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: DEFAULT_SEED,
            parameters: BTreeMap::new(),
            output_path: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn set(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    /// Parses a TOML config:
    ///
    /// ```toml
    /// scenario = "estimation-scaling"
    /// seed = 7
    /// output = "out.csv"
    ///
    /// [parameters]
    /// n_list = [1, 4, 16]
    /// ptot_mode = "linear"
    /// ```
    ///
    /// Array values are joined with commas.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let scenario = match table.get("scenario") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(_) => return Err(Error::Config("`scenario` must be a string".into())),
            None => return Err(Error::Config("missing `scenario`".into())),
        };
        let mut cfg = Self::new(scenario);
        for (key, value) in &table {
            match key.as_str() {
                "scenario" => {}
                "seed" => {
                    cfg.seed = value
                        .as_integer()
                        .and_then(|s| u64::try_from(s).ok())
                        .ok_or_else(|| Error::Config("`seed` must be a non-negative integer".into()))?;
                }
                "output" => {
                    let path = value
                        .as_str()
                        .ok_or_else(|| Error::Config("`output` must be a string".into()))?;
                    cfg.output_path = Some(PathBuf::from(path));
                }
                "parameters" => {
                    let params = value
                        .as_table()
                        .ok_or_else(|| Error::Config("`parameters` must be a table".into()))?;
                    for (k, v) in params {
                        cfg.parameters.insert(k.clone(), toml_scalar(k, v)?);
                    }
                }
                other => return Err(Error::Config(format!("unknown top-level key `{other}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }
}

fn toml_scalar(key: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        toml::Value::Array(items) => items
            .iter()
            .map(|i| toml_scalar(key, i))
            .collect::<Result<Vec<_>>>()
            .map(|parts| parts.join(",")),
        _ => Err(Error::Config(format!("parameter `{key}` has an unsupported type"))),
    }
}

// ---------------------------------------------------------------------------
// Parameter reading and validation
// ---------------------------------------------------------------------------

/// A problem with one config key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

struct Reader<'a> {
    params: &'a BTreeMap<String, String>,
    used: BTreeSet<&'a str>,
    resolved: BTreeMap<String, String>,
    diags: Vec<Diagnostic>,
}

impl<'a> Reader<'a> {
    fn new(params: &'a BTreeMap<String, String>) -> Self {
        Self {
            params,
            used: BTreeSet::new(),
            resolved: BTreeMap::new(),
            diags: Vec::new(),
        }
    }

    fn flag(&mut self, key: &str, message: impl Into<String>) {
        self.diags.push(Diagnostic {
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn raw(&mut self, key: &str) -> Option<&'a str> {
        let (k, v) = self.params.get_key_value(key)?;
        self.used.insert(k.as_str());
        Some(v.as_str().trim())
    }

    fn parsed<T: FromStr + ToString>(&mut self, key: &str, default: T, rule: &str, ok: impl Fn(&T) -> bool) -> T {
        let value = match self.raw(key) {
            None => default,
            Some(text) => match text.parse::<T>() {
                Ok(v) => v,
                Err(_) => {
                    self.flag(key, format!("cannot parse `{text}`"));
                    return default;
                }
            },
        };
        if !ok(&value) {
            self.flag(key, format!("{rule}, got {}", value.to_string()));
        }
        self.resolved.insert(key.to_string(), value.to_string());
        value
    }

    fn f64(&mut self, key: &str, default: f64, rule: &str, ok: impl Fn(f64) -> bool) -> f64 {
        self.parsed(key, default, rule, |v: &f64| v.is_finite() && ok(*v))
    }

    fn u64(&mut self, key: &str, default: u64, rule: &str, ok: impl Fn(u64) -> bool) -> u64 {
        self.parsed(key, default, rule, |v: &u64| ok(*v))
    }

    fn text(&mut self, key: &str, default: &str) -> String {
        let v = self.raw(key).unwrap_or(default).to_string();
        self.resolved.insert(key.to_string(), v.clone());
        v
    }

    fn list<T>(&mut self, key: &str, default: &[T], rule: &str, ok: impl Fn(&T) -> bool) -> Vec<T>
    where
        T: FromStr + ToString + Clone,
    {
        let values: Vec<T> = match self.raw(key) {
            None => default.to_vec(),
            Some(text) => {
                let parsed: std::result::Result<Vec<T>, _> = text
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse::<T>)
                    .collect();
                match parsed {
                    Ok(v) => v,
                    Err(_) => {
                        self.flag(key, format!("cannot parse list `{text}`"));
                        return default.to_vec();
                    }
                }
            }
        };
        if values.is_empty() {
            self.flag(key, "list must not be empty");
        } else if let Some(bad) = values.iter().find(|v| !ok(v)) {
            self.flag(key, format!("{rule}, got {}", bad.to_string()));
        }
        let echo: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        self.resolved.insert(key.to_string(), echo.join(","));
        values
    }

    /// Records an error raised while building a module config.
    fn absorb<T>(&mut self, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(Error::InvalidParameter { name, reason }) => {
                self.flag(name, reason);
                None
            }
            Err(e) => {
                self.flag("parameters", e.to_string());
                None
            }
        }
    }

    fn finish(mut self) -> (BTreeMap<String, String>, Vec<Diagnostic>) {
        let unknown: Vec<String> = self
            .params
            .keys()
            .filter(|k| !self.used.contains(k.as_str()))
            .cloned()
            .collect();
        for key in unknown {
            self.flag(&key, "unknown parameter for this scenario");
        }
        (self.resolved, self.diags)
    }
}

const POSITIVE: &str = "must be > 0";
const NON_NEGATIVE: &str = "must be >= 0";
const AT_LEAST_ONE: &str = "must be >= 1";

// ---------------------------------------------------------------------------
// Scenario plans
// ---------------------------------------------------------------------------

struct SeparationPlan {
    dist: CorrelatedBinaryPair,
    grid_step: f64,
    draws: u64,
}

struct NomographicPlan {
    functions: Vec<String>,
    n_sensors: usize,
    points: u64,
    noise_var: f64,
    phase_err_std: f64,
}

struct EstimationPlan {
    base: EstimationConfig,
    n_list: Vec<usize>,
    mode: PtotMode,
}

struct DetectionPlan {
    base: DetectionConfig,
    n_list: Vec<usize>,
    snr_db: Vec<f64>,
    trials: u64,
}

struct ProfilePlan {
    constellation: WalkerConstellation,
    mask_deg: f64,
    lat_grid: Vec<f64>,
    samples: usize,
    duration_s: f64,
}

struct OtaMsePlan {
    constellation: WalkerConstellation,
    station: GroundStation,
    est: EstimationConfig,
    sync: SyncModel,
}

enum Plan {
    Separation(SeparationPlan),
    Nomographic(NomographicPlan),
    Estimation(EstimationPlan),
    Detection(DetectionPlan),
    Profile(ProfilePlan),
    OtaMse(OtaMsePlan),
}

fn ceo_model(r: &mut Reader, n: usize) -> Option<GaussianCeoModel> {
    let s2 = r.f64("sigma_s2", 1.0, POSITIVE, |v| v > 0.0);
    let z2 = r.f64("sigma_z2", 1.0, NON_NEGATIVE, |v| v >= 0.0);
    r.absorb(GaussianCeoModel::new(s2, z2, n.max(1)))
}

fn preset(r: &mut Reader, default: &str) -> Option<WalkerConstellation> {
    let name = r.text("preset", default);
    let c = r.absorb(WalkerConstellation::preset(&name))?;
    let offset = r.f64("raan_offset_deg", c.raan_offset_deg, "must be finite", |_| true);
    Some(c.with_raan_offset(offset))
}

fn mask(r: &mut Reader) -> f64 {
    r.f64("mask_deg", DEFAULT_MASK_DEG, "must lie in [0, 90)", |v| (0.0..90.0).contains(&v))
}

fn build_plan(cfg: &ExperimentConfig) -> (Option<Plan>, BTreeMap<String, String>, Vec<Diagnostic>) {
    let mut r = Reader::new(&cfg.parameters);
    let plan = match cfg.scenario {
        Scenario::Separation => separation_plan(&mut r),
        Scenario::Nomographic => nomographic_plan(&mut r),
        Scenario::EstimationScaling => estimation_plan(&mut r),
        Scenario::DetectionSweep => detection_plan(&mut r),
        Scenario::ConstellationProfile => profile_plan(&mut r),
        Scenario::ConstellationOtaMse => ota_mse_plan(&mut r),
    };
    let (resolved, diags) = r.finish();
    (plan, resolved, diags)
}

fn separation_plan(r: &mut Reader) -> Option<Plan> {
    let p = adder_mac_preset();
    let cells = [
        r.f64("p00", p.p00(), NON_NEGATIVE, |v| v >= 0.0),
        r.f64("p01", p.p01(), NON_NEGATIVE, |v| v >= 0.0),
        r.f64("p10", p.p10(), NON_NEGATIVE, |v| v >= 0.0),
        r.f64("p11", p.p11(), NON_NEGATIVE, |v| v >= 0.0),
    ];
    let grid_step = r.f64("grid_step", 1e-3, "must lie in (0, 0.01]", |v| v > 0.0 && v <= 0.01);
    let draws = r.u64("draws", 1_000_000, AT_LEAST_ONE, |v| v >= 1);
    let dist = r.absorb(CorrelatedBinaryPair::new(cells[0], cells[1], cells[2], cells[3]))?;
    Some(Plan::Separation(SeparationPlan { dist, grid_step, draws }))
}

fn nomographic_plan(r: &mut Reader) -> Option<Plan> {
    let function = r.text("function", "all");
    let functions = if function == "all" {
        BUILTIN_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        r.absorb(nomographic::builtin(&function))?;
        vec![function]
    };
    let n_sensors = r.u64("n", 8, AT_LEAST_ONE, |v| v >= 1) as usize;
    let points = r.u64("points", 100, AT_LEAST_ONE, |v| v >= 1);
    let noise_var = r.f64("noise_var", 0.0, NON_NEGATIVE, |v| v >= 0.0);
    let phase_err_std = r.f64("phase_err_std", 0.0, NON_NEGATIVE, |v| v >= 0.0);
    Some(Plan::Nomographic(NomographicPlan {
        functions,
        n_sensors,
        points,
        noise_var,
        phase_err_std,
    }))
}

fn estimation_plan(r: &mut Reader) -> Option<Plan> {
    let n_list: Vec<usize> = r.list("n_list", &[1, 2, 4, 8, 16, 32, 64, 128, 256, 512], AT_LEAST_ONE, |n| *n >= 1);
    let mode_name = r.text("ptot_mode", "fixed");
    let p_tot = r.f64("p_tot", 10.0, POSITIVE, |v| v > 0.0);
    let per_sensor = r.f64("p_per_sensor", 1.0, POSITIVE, |v| v > 0.0);
    let mode = match mode_name.as_str() {
        "fixed" => PtotMode::Fixed(p_tot),
        "linear" => PtotMode::Linear { per_sensor },
        other => {
            r.flag("ptot_mode", format!("must be `fixed` or `linear`, got `{other}`"));
            PtotMode::Fixed(p_tot)
        }
    };
    let noise_var = r.f64("noise_var", 1.0, NON_NEGATIVE, |v| v >= 0.0);
    let trials = r.u64("trials", 20_000, AT_LEAST_ONE, |v| v >= 1);
    let model = ceo_model(r, 1)?;
    let base = r.absorb(EstimationConfig::new(model, p_tot, noise_var, trials.max(1)))?;
    Some(Plan::Estimation(EstimationPlan { base, n_list, mode }))
}

fn detection_plan(r: &mut Reader) -> Option<Plan> {
    let k = r.u64("k", 2, "must be 2 or 4", |v| v == 2 || v == 4);
    let n_list: Vec<usize> = r.list("n_list", &[1, 3, 5, 7, 9], AT_LEAST_ONE, |n| *n >= 1);
    let snr_db: Vec<f64> = r.list("snr_db", &[-5.0, 0.0, 5.0, 10.0, 15.0], "must be finite", |v: &f64| {
        v.is_finite()
    });
    let trials = r.u64("trials", 100_000, AT_LEAST_ONE, |v| v >= 1);
    let prior = r.f64("prior", 0.5, "must lie in the open interval (0, 1)", |v| v > 0.0 && v < 1.0);
    let obs_noise_var = r.f64("obs_noise_var", 0.25, NON_NEGATIVE, |v| v >= 0.0);
    let phase_err_std = r.f64("phase_err_std", 0.0, NON_NEGATIVE, |v| v >= 0.0);
    let amp_err_std = r.f64("amp_err_std", 0.0, NON_NEGATIVE, |v| v >= 0.0);
    let clip = r.f64("clip", DEFAULT_CLIP, POSITIVE, |v| v > 0.0);
    let policy_name = r.text("policy", PrecompPolicy::FullInversion.as_str());
    let policy = r.absorb(policy_name.parse::<PrecompPolicy>())?;
    let hypotheses = r.absorb(Hypotheses::from_count(k as usize))?;
    let n0 = n_list.first().copied().unwrap_or(1).max(1);
    let mut base = match hypotheses {
        Hypotheses::Binary => r.absorb(DetectionConfig::binary(n0))?,
        Hypotheses::Quaternary => r.absorb(DetectionConfig::quaternary(n0))?,
    };
    base.prior = prior;
    base.obs_noise_var = obs_noise_var;
    base.policy = policy;
    base.clip = clip;
    base.channel = r.absorb(
        CoherentMacChannel::unit(n0, 0.0).and_then(|c| c.with_impairments(phase_err_std, amp_err_std)),
    )?;
    r.absorb(base.validate())?;
    Some(Plan::Detection(DetectionPlan {
        base,
        n_list,
        snr_db,
        trials,
    }))
}

fn profile_plan(r: &mut Reader) -> Option<Plan> {
    let mask_deg = mask(r);
    let lat_step = r.f64("lat_step", 2.0, "must lie in (0, 90]", |v| v > 0.0 && v <= 90.0);
    let samples = r.u64("samples", 500, AT_LEAST_ONE, |v| v >= 1) as usize;
    let duration_s = r.f64("duration_s", DEFAULT_PROFILE_DURATION_S, POSITIVE, |v| v > 0.0);
    let constellation = preset(r, "starlink-p1-like")?;
    let lat_grid = r.absorb(latitude_grid(lat_step))?;
    Some(Plan::Profile(ProfilePlan {
        constellation,
        mask_deg,
        lat_grid,
        samples,
        duration_s,
    }))
}

fn ota_mse_plan(r: &mut Reader) -> Option<Plan> {
    let mask_deg = mask(r);
    let lat = r.f64("lat_deg", 45.0, "must satisfy |lat| <= 90", |v| v.abs() <= 90.0);
    let lon = r.f64("lon_deg", 0.0, "must be finite", |_| true);
    let d = SyncModel::default();
    let phase_err_grid = r.list("phase_err_grid", &d.phase_err_grid, NON_NEGATIVE, |v: &f64| *v >= 0.0);
    let timing = r.f64("timing_err_std_s", 1e-11, "must be >= 0 (0 disables)", |v| v >= 0.0);
    let carrier_hz = r.f64("carrier_hz", DEFAULT_CARRIER_HZ, POSITIVE, |v| v > 0.0);
    let amp_err_std = r.f64("amp_err_std", 0.0, NON_NEGATIVE, |v| v >= 0.0);
    let epochs = r.u64("epochs", d.epochs as u64, AT_LEAST_ONE, |v| v >= 1) as usize;
    let duration_s = r.f64("duration_s", d.duration_s, NON_NEGATIVE, |v| v >= 0.0);
    let clip = r.f64("clip", DEFAULT_CLIP, POSITIVE, |v| v > 0.0);
    let policy_names = r.text("policies", "full-inversion,phase-only,none");
    let mut policies = Vec::new();
    for name in policy_names.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some(p) = r.absorb(name.parse::<PrecompPolicy>()) {
            policies.push(p);
        }
    }
    let p_tot = r.f64("p_tot", 10.0, POSITIVE, |v| v > 0.0);
    let noise_var = r.f64("noise_var", 1.0, NON_NEGATIVE, |v| v >= 0.0);
    let trials = r.u64("trials", 20_000, AT_LEAST_ONE, |v| v >= 1);
    let model = ceo_model(r, 1)?;
    let constellation = preset(r, "starlink-p1-like")?;
    let station = r.absorb(GroundStation::new(lat, lon, mask_deg))?;
    let est = r.absorb(EstimationConfig::new(model, p_tot, noise_var, trials.max(1)))?;
    Some(Plan::OtaMse(OtaMsePlan {
        constellation,
        station,
        est,
        sync: SyncModel {
            phase_err_grid,
            timing_err_std_s: (timing > 0.0).then_some(timing),
            carrier_hz,
            amp_err_std,
            policies,
            clip,
            epochs,
            duration_s,
        },
    }))
}

/// Checks every parameter of `cfg` without running anything.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    build_plan(cfg).2
}

// ---------------------------------------------------------------------------
// Result tables
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            Cell::Num(_) => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Num(v as f64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    /// Empty for dimensionless quantities.
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    /// Ordered `(key, value)` pairs written as `#` lines.
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    fn new(columns: &[(&str, &str)]) -> Self {
        Self {
            columns: columns
                .iter()
                .map(|(n, u)| Column {
                    name: n.to_string(),
                    unit: u.to_string(),
                })
                .collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// All numeric values of a column, in row order.
    pub fn numbers(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows.iter().map(|r| r[i].as_f64()).collect()
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn header(&self) -> Vec<String> {
        self.columns
            .iter()
            .map(|c| {
                if c.unit.is_empty() {
                    c.name.clone()
                } else {
                    format!("{} [{}]", c.name, c.unit)
                }
            })
            .collect()
    }

    /// Header and data rows, without metadata.
    pub fn csv_body(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.csv_body()?);
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_csv()?.as_bytes())?;
        Ok(())
    }
}

/// Version string recorded in table metadata. `OTA_GIT_DESCRIBE` at build
/// time overrides the crate version.
pub fn version_string() -> String {
    option_env!("OTA_GIT_DESCRIBE")
        .map(str::to_string)
        .unwrap_or_else(|| format!("v{}", env!("CARGO_PKG_VERSION")))
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

/// Validates, runs the scenario and, when `output_path` is set, writes the CSV.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let started = Instant::now();
    let (plan, resolved, diags) = build_plan(cfg);
    if !diags.is_empty() {
        let list: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(Error::Config(list.join("; ")));
    }
    let plan = plan.ok_or_else(|| Error::Config("invalid parameters".into()))?;
    let stream = SeedStream::new(cfg.seed).named(cfg.scenario.as_str());

    let mut table = match plan {
        Plan::Separation(p) => run_separation(&p, stream)?,
        Plan::Nomographic(p) => run_nomographic(&p, stream)?,
        Plan::Estimation(p) => run_estimation(&p, stream)?,
        Plan::Detection(p) => run_detection(&p, stream)?,
        Plan::Profile(p) => run_profile(&p)?,
        Plan::OtaMse(p) => run_ota_mse(&p, stream)?,
    };

    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut meta = vec![
        ("scenario".to_string(), cfg.scenario.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("version".to_string(), version_string()),
        ("started_unix_s".to_string(), stamp.to_string()),
        ("wall_clock_s".to_string(), format!("{:.3}", started.elapsed().as_secs_f64())),
    ];
    meta.extend(resolved.into_iter().map(|(k, v)| (format!("param.{k}"), v)));
    meta.append(&mut table.metadata);
    table.metadata = meta;

    if let Some(path) = &cfg.output_path {
        table.write_csv(path)?;
    }
    Ok(table)
}

/// [`run`] on a dedicated pool with `threads` workers (`None`: rayon default).
pub fn run_with_threads(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ResultTable> {
    with_threads(threads, || run(cfg))
}

#[derive(Debug, Default, Clone, Copy)]
struct ErrorCount {
    errors: u64,
}

impl Accumulator for ErrorCount {
    fn merge(&mut self, later: Self) {
        self.errors += later.errors;
    }
}

fn run_separation(p: &SeparationPlan, stream: SeedStream) -> Result<ResultTable> {
    let verdict = separation::separation_fails(&p.dist, p.grid_step)?;
    let count: ErrorCount = accumulate(stream, p.draws, |c: &mut ErrorCount, rng, _| {
        let pair = sample_pair(&p.dist, rng);
        if uncoded_transceive(pair) != Ok(pair) {
            c.errors += 1;
        }
    });
    let mut t = ResultTable::new(&[("quantity", ""), ("value", ""), ("units", "")]);
    let rows: [(&str, f64, &str); 11] = [
        ("joint_entropy", separation::joint_entropy(&p.dist), "bits"),
        ("h_s1_given_s2", verdict.source.r1_min, "bits"),
        ("h_s2_given_s1", verdict.source.r2_min, "bits"),
        ("sum_min", verdict.source.sum_min, "bits"),
        ("mac_sum_capacity", verdict.capacity.bits, "bits/use"),
        ("capacity_p", verdict.capacity.p, "probability"),
        ("capacity_q", verdict.capacity.q, "probability"),
        ("margin", verdict.margin_bits, "bits"),
        ("separation_fails", if verdict.fails { 1.0 } else { 0.0 }, "bool"),
        ("uncoded_draws", p.draws as f64, "count"),
        ("uncoded_errors", count.errors as f64, "count"),
    ];
    for (q, v, u) in rows {
        t.push(vec![q.into(), v.into(), u.into()]);
    }
    Ok(t)
}

fn run_nomographic(p: &NomographicPlan, stream: SeedStream) -> Result<ResultTable> {
    let mut t = ResultTable::new(&[
        ("spec", ""),
        ("point", ""),
        ("readings", ""),
        ("direct", ""),
        ("ota", ""),
        ("error", ""),
    ]);
    let catalog = nomographic::Catalog::with_builtins();
    for name in &p.functions {
        let spec = catalog.get(name)?;
        let channel =
            CoherentMacChannel::unit_real(p.n_sensors, p.noise_var)?.with_impairments(p.phase_err_std, 0.0)?;
        let pre = precompensate(channel.gains(), PrecompPolicy::FullInversion, DEFAULT_CLIP)?;
        let sub = stream.named(name);
        // Sequential: each row keeps its own trial substream.
        for i in 0..p.points {
            let mut rng = sub.trial(i);
            let readings: Vec<f64> = (0..p.n_sensors).map(|_| spec.domain.sample(&mut rng)).collect();
            let tr = nomographic::trace(spec, &readings, &channel, &pre, &mut rng)?;
            let joined: Vec<String> = tr.readings.iter().map(|x| x.to_string()).collect();
            t.push(vec![
                name.as_str().into(),
                (i as usize).into(),
                joined.join(";").into(),
                tr.direct.into(),
                tr.ota.into(),
                tr.error().into(),
            ]);
        }
    }
    Ok(t)
}

fn run_estimation(p: &EstimationPlan, stream: SeedStream) -> Result<ResultTable> {
    let rows = estimation::sweep(&p.base, &p.n_list, p.mode, stream)?;
    let mut t = ResultTable::new(&[
        ("N", ""),
        ("p_tot", "power"),
        ("d_analog_emp", "mse"),
        ("d_analog_ana", "mse"),
        ("d_digital", "mse"),
        ("std_err", "mse"),
        ("d_digital_emp", "mse"),
    ]);
    for r in rows {
        t.push(vec![
            r.n.into(),
            r.p_tot.into(),
            r.analog.d_empirical.into(),
            r.analog.d_analytic.into(),
            r.digital.d_analytic.into(),
            r.analog.std_err.into(),
            r.digital.d_empirical.into(),
        ]);
    }
    Ok(t)
}

fn run_detection(p: &DetectionPlan, stream: SeedStream) -> Result<ResultTable> {
    let rows = detection::sweep(&p.base, &p.n_list, &p.snr_db, p.trials, stream)?;
    let mut t = ResultTable::new(&[
        ("N", ""),
        ("K", ""),
        ("snr_db", "dB"),
        ("p_fa", ""),
        ("p_miss", ""),
        ("p_error", ""),
        ("std_err", ""),
    ]);
    for r in rows {
        t.push(vec![
            r.n.into(),
            r.k.into(),
            r.snr_db.into(),
            r.outcome.p_false_alarm.into(),
            r.outcome.p_miss.into(),
            r.outcome.p_error.into(),
            r.outcome.std_err_error.into(),
        ]);
    }
    Ok(t)
}

fn run_profile(p: &ProfilePlan) -> Result<ResultTable> {
    let prof = los_profile(&p.constellation, p.mask_deg, &p.lat_grid, p.samples, p.duration_s)?;
    let mut t = ResultTable::new(&[
        ("lat_deg", "deg"),
        ("mean", "satellites"),
        ("min", "satellites"),
        ("max", "satellites"),
        ("std", "satellites"),
    ]);
    for i in 0..prof.latitudes.len() {
        t.push(vec![
            prof.latitudes[i].into(),
            prof.mean_count[i].into(),
            prof.min_count[i].into(),
            prof.max_count[i].into(),
            prof.std_count[i].into(),
        ]);
    }
    Ok(t)
}

fn run_ota_mse(p: &OtaMsePlan, stream: SeedStream) -> Result<ResultTable> {
    let curve = ota_downlink_mse(&p.constellation, &p.station, &p.est, &p.sync, stream)?;
    let mut t = ResultTable::new(&[
        ("phase_err_std", "rad"),
        ("policy", ""),
        ("N_mean", "satellites"),
        ("mse", ""),
        ("std_err", ""),
        ("mse_analytic", ""),
    ]);
    for r in &curve.rows {
        t.push(vec![
            r.phase_err_std.into(),
            r.policy.as_str().into(),
            r.n_mean.into(),
            r.mse.into(),
            r.std_err.into(),
            r.analytic.into(),
        ]);
    }
    let used: Vec<String> = curve.epochs.iter().map(|(e, n)| format!("{e}:{n}")).collect();
    t.metadata.push(("epochs_los".into(), used.join(",")));
    let skipped: Vec<String> = curve.skipped_epochs.iter().map(|e| e.to_string()).collect();
    t.metadata.push(("epochs_skipped".into(), skipped.join(",")));
    if let Some(phase) = curve.timing_phase_std {
        t.metadata.push(("timing_phase_std".into(), phase.to_string()));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.as_str().parse::<Scenario>().unwrap(), sc);
        }
        assert!("fig4".parse::<Scenario>().is_err());
    }

    #[test]
    fn defaults_validate() {
        for sc in Scenario::ALL {
            assert!(validate(&ExperimentConfig::new(sc)).is_empty(), "{sc}");
        }
    }

    #[test]
    fn diagnostics_name_the_key() {
        let cfg = ExperimentConfig::new(Scenario::DetectionSweep).set("trials", 0);
        let d = validate(&cfg);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].key, "trials");
        assert!(d[0].message.contains(">= 1"));

        let cfg = ExperimentConfig::new(Scenario::DetectionSweep).set("prior", 1.0);
        let d = validate(&cfg);
        assert_eq!(d[0].key, "prior");
        assert!(d[0].message.contains("open interval"));

        let cfg = ExperimentConfig::new(Scenario::Separation).set("colour", "red");
        assert_eq!(validate(&cfg)[0].key, "colour");

        let cfg = ExperimentConfig::new(Scenario::ConstellationProfile).set("preset", "iridium");
        assert!(!validate(&cfg).is_empty());
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn toml_config_parses() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            scenario = "estimation-scaling"
            seed = 7
            output = "x.csv"
            [parameters]
            n_list = [1, 4, 16]
            ptot_mode = "linear"
            trials = 100
            "#,
        )
        .unwrap();
        assert_eq!(cfg.scenario, Scenario::EstimationScaling);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.parameters["n_list"], "1,4,16");
        assert_eq!(cfg.output_path.as_deref(), Some(Path::new("x.csv")));
        assert!(validate(&cfg).is_empty());
        assert!(ExperimentConfig::from_toml_str("seed = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("scenario = \"nope\"").is_err());
    }

    #[test]
    fn separation_table() {
        let cfg = ExperimentConfig::new(Scenario::Separation).set("draws", 10_000);
        let t = run(&cfg).unwrap();
        let value = |q: &str| {
            t.rows
                .iter()
                .find(|r| r[0].as_text() == Some(q))
                .and_then(|r| r[1].as_f64())
                .unwrap()
        };
        assert!((value("sum_min") - 3f64.log2()).abs() < 1e-9);
        assert!((value("mac_sum_capacity") - 1.5).abs() < 1e-4);
        assert!((value("margin") - (3f64.log2() - 1.5)).abs() < 1e-4);
        assert_eq!(value("uncoded_errors"), 0.0);
        assert_eq!(t.meta("seed"), Some(DEFAULT_SEED.to_string().as_str()));
        assert_eq!(t.meta("param.draws"), Some("10000"));
    }

    #[test]
    fn estimation_schema_and_csv() {
        let cfg = ExperimentConfig::new(Scenario::EstimationScaling)
            .set("n_list", "1,4")
            .set("trials", 500);
        let t = run(&cfg).unwrap();
        for c in ["N", "p_tot", "d_analog_emp", "d_analog_ana", "d_digital", "std_err"] {
            assert!(t.column_index(c).is_some(), "{c}");
        }
        let csv = t.to_csv().unwrap();
        assert!(csv.starts_with("# scenario: estimation-scaling\n"));
        assert!(csv.contains("\nN,p_tot [power],"));
        assert_eq!(t.rows.len(), 2);
    }

    #[test]
    fn same_seed_same_body() {
        let cfg = ExperimentConfig::new(Scenario::DetectionSweep)
            .set("trials", 2000)
            .set("n_list", "1,3");
        let a = run_with_threads(&cfg, Some(1)).unwrap().csv_body().unwrap();
        let b = run_with_threads(&cfg, Some(3)).unwrap().csv_body().unwrap();
        assert_eq!(a, b);
        let c = run(&cfg.clone().with_seed(1)).unwrap().csv_body().unwrap();
        assert_ne!(a, c);
    }
}
