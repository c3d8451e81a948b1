//! JSON run configurations. Every block is checked key by key so that one
//! pass reports all unknown keys, type errors and out-of-range values.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::born_infeld::{BiInitial, BiParams};
use crate::gradient_flow::VectorEntropy;
use crate::mhd::sweep::default_levels;
use crate::mhd::{InitialCondition, MreParams, Scheme};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Mre,
    Sweep,
    Certify,
    Heat,
    Relativistic,
    Bi,
    Krtest,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Mre,
        Experiment::Sweep,
        Experiment::Certify,
        Experiment::Heat,
        Experiment::Relativistic,
        Experiment::Bi,
        Experiment::Krtest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Mre => "mre",
            Experiment::Sweep => "sweep",
            Experiment::Certify => "certify",
            Experiment::Heat => "heat",
            Experiment::Relativistic => "relativistic",
            Experiment::Bi => "bi",
            Experiment::Krtest => "krtest",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

/// The `mre` block; also the base of `sweep` and of `certify` runs without a
/// stored trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MreBlock {
    pub epsilon: f64,
    pub mu: f64,
    pub nu: f64,
    pub dt: f64,
    pub t_final: f64,
    pub n: usize,
    pub initial: InitialCondition,
    pub scheme: Scheme,
    pub track_potential: bool,
}

impl Default for MreBlock {
    fn default() -> Self {
        let p = MreParams::default();
        Self {
            epsilon: p.epsilon,
            mu: p.mu,
            nu: p.nu,
            dt: p.dt,
            t_final: p.t_final,
            n: p.n,
            initial: p.initial,
            scheme: p.scheme,
            track_potential: p.track_potential,
        }
    }
}

impl MreBlock {
    pub fn params(&self, seed: u64, snap_every: usize) -> MreParams {
        MreParams {
            epsilon: self.epsilon,
            mu: self.mu,
            nu: self.nu,
            dt: self.dt,
            t_final: self.t_final,
            n: self.n,
            seed,
            initial: self.initial.clone(),
            scheme: self.scheme,
            snap_every,
            track_potential: self.track_potential,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    /// `(ε, μ, ν)` per run, coarsest first.
    pub levels: Vec<[f64; 3]>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            levels: default_levels(3).into_iter().map(|(a, b, c)| [a, b, c]).collect(),
        }
    }
}

/// Scales the stored energy from time `at` on by `factor`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyBump {
    pub at: f64,
    pub factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyBlock {
    /// Directory written by an `mre` run; when absent the `mre` block is run.
    pub traj: Option<String>,
    pub r: Vec<f64>,
    pub budget: usize,
    pub transport: bool,
    /// Tamper with the trajectory before certifying it.
    pub bump: Option<EnergyBump>,
}

impl Default for CertifyBlock {
    fn default() -> Self {
        Self {
            traj: None,
            r: vec![0.0, 1.0, 5.0],
            budget: 500,
            transport: true,
            bump: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityInitial {
    /// `1 + a cos 2π(k1 x1 + k2 x2)`.
    Mode { amplitude: f64, k1: i64, k2: i64 },
    /// `background + height·exp(−|x − c|²/(2 width²))`, centred at `(½, ½)`.
    Bump { background: f64, height: f64, width: f64 },
}

/// `heat` and `relativistic` blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionBlock {
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub initial: DensityInitial,
}

impl DiffusionBlock {
    pub fn heat_default() -> Self {
        Self {
            n: 64,
            dt: 2e-5,
            t_final: 0.01,
            initial: DensityInitial::Mode { amplitude: 0.5, k1: 1, k2: 0 },
        }
    }

    pub fn relativistic_default() -> Self {
        Self {
            n: 64,
            dt: 2e-5,
            t_final: 0.01,
            initial: DensityInitial::Bump { background: 0.05, height: 1.0, width: 0.05 },
        }
    }
}

impl Default for DiffusionBlock {
    fn default() -> Self {
        Self::heat_default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KrBlock {
    pub n: usize,
    /// Number of seeded random fields.
    pub fields: usize,
    pub r: Vec<f64>,
    pub budget: usize,
    /// Also report the recovered lower bound of `L(B)` over `r`.
    pub recover_l: bool,
}

impl Default for KrBlock {
    fn default() -> Self {
        Self {
            n: 32,
            fields: 20,
            r: vec![0.0, 1.0, 5.0],
            budget: 100,
            recover_l: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Per-step energy balance residual, relative to the initial energy.
    pub energy_balance: f64,
    /// Entropy certificate slack, relative to `||B(0)||²`.
    pub certificate: f64,
    /// Mass drift of diffusion runs, relative.
    pub mass: f64,
    /// Allowed single-step rise of an entropy, relative.
    pub entropy_rise: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            energy_balance: 1e-6,
            certificate: 1e-6,
            mass: 1e-12,
            entropy_rise: 1e-8,
        }
    }
}

/// A validated configuration. Blocks not relevant to `experiment` keep their
/// defaults and are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub out: Option<String>,
    pub seed: u64,
    /// Snapshot every this many steps; `None` picks about twenty per run.
    pub snap_every: Option<usize>,
    pub tolerances: Tolerances,
    pub mre: MreBlock,
    pub sweep: SweepBlock,
    pub certify: CertifyBlock,
    pub heat: DiffusionBlock,
    pub relativistic: DiffusionBlock,
    pub bi: BiParams,
    pub krtest: KrBlock,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            out: None,
            seed: 0,
            snap_every: None,
            tolerances: Tolerances::default(),
            mre: MreBlock::default(),
            sweep: SweepBlock::default(),
            certify: CertifyBlock::default(),
            heat: DiffusionBlock::heat_default(),
            relativistic: DiffusionBlock::relativistic_default(),
            bi: BiParams::default(),
            krtest: KrBlock::default(),
        }
    }
}

/// Every problem found in a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration ({} problem", self.violations.len())?;
        if self.violations.len() != 1 {
            write!(f, "s")?;
        }
        write!(f, ")")?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn single(msg: impl Into<String>) -> Self {
        Self { violations: vec![msg.into()] }
    }
}

const TOP_KEYS: [&str; 12] = [
    "experiment",
    "out",
    "seed",
    "snap_every",
    "tolerances",
    "mre",
    "sweep",
    "certify",
    "heat",
    "relativistic",
    "bi",
    "krtest",
];

fn suggestion<'a>(key: &str, known: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    known
        .into_iter()
        .map(|k| (strsim::levenshtein(key, k), strsim::jaro_winkler(key, k), k))
        .filter(|&(d, s, _)| d <= 2 || s >= 0.85)
        .min_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)))
        .map(|(_, _, k)| k)
}

fn unknown_key(path: &str, key: &str, known: &[&str]) -> String {
    let full = if path.is_empty() { key.to_string() } else { format!("{path}.{key}") };
    match suggestion(key, known.iter().copied()) {
        Some(s) => format!("unknown key \"{full}\"; did you mean \"{s}\"?"),
        None => format!("unknown key \"{full}\"; expected one of {}", known.join(", ")),
    }
}

/// Overlays the keys of `user` on `base`, reporting unknown keys and values
/// that do not deserialize, one entry per key.
fn merge_block<T: Serialize + DeserializeOwned + Clone>(base: &T, user: &Value, path: &str, errs: &mut Vec<String>) -> T {
    let Value::Object(user) = user else {
        errs.push(format!("\"{path}\" must be an object"));
        return base.clone();
    };
    let Value::Object(defaults) = serde_json::to_value(base).expect("config blocks serialise") else {
        unreachable!("config blocks are structs")
    };
    let known: Vec<&str> = defaults.keys().map(String::as_str).collect();
    let mut merged: Map<String, Value> = defaults.clone();
    for (k, v) in user {
        if !defaults.contains_key(k) {
            errs.push(unknown_key(path, k, &known));
            continue;
        }
        let mut trial = defaults.clone();
        trial.insert(k.clone(), v.clone());
        match serde_json::from_value::<T>(Value::Object(trial)) {
            Ok(_) => {
                merged.insert(k.clone(), v.clone());
            }
            Err(e) => errs.push(format!("{path}.{k}: {e}")),
        }
    }
    serde_json::from_value(Value::Object(merged)).unwrap_or_else(|e| {
        errs.push(format!("{path}: {e}"));
        base.clone()
    })
}

fn check(errs: &mut Vec<String>, ok: bool, field: &str, value: impl fmt::Display, rule: &str) {
    if !ok {
        errs.push(format!("{field} = {value} {rule}"));
    }
}

fn positive(errs: &mut Vec<String>, field: &str, v: f64) {
    check(errs, v.is_finite() && v > 0.0, field, v, "must be finite and > 0");
}

fn nonneg(errs: &mut Vec<String>, field: &str, v: f64) {
    check(errs, v.is_finite() && v >= 0.0, field, v, "must be finite and >= 0");
}

fn grid_size(errs: &mut Vec<String>, field: &str, n: usize, min: usize) {
    check(errs, n >= min && n % 2 == 0, field, n, &format!("must be even and >= {min}"));
}

fn validate(cfg: &RunConfig, errs: &mut Vec<String>) {
    let m = &cfg.mre;
    for (k, v) in [("mre.epsilon", m.epsilon), ("mre.mu", m.mu), ("mre.nu", m.nu)] {
        nonneg(errs, k, v);
    }
    positive(errs, "mre.dt", m.dt);
    positive(errs, "mre.t_final", m.t_final);
    grid_size(errs, "mre.n", m.n, 4);
    if let InitialCondition::Shear { amplitude } = m.initial {
        check(errs, amplitude.is_finite(), "mre.initial.amplitude", amplitude, "must be finite");
    }
    if let Some(s) = cfg.snap_every {
        check(errs, s >= 1, "snap_every", s, "must be >= 1");
    }
    let t = &cfg.tolerances;
    for (k, v) in [
        ("tolerances.energy_balance", t.energy_balance),
        ("tolerances.certificate", t.certificate),
        ("tolerances.mass", t.mass),
        ("tolerances.entropy_rise", t.entropy_rise),
    ] {
        nonneg(errs, k, v);
    }
    check(errs, !cfg.sweep.levels.is_empty(), "sweep.levels", "[]", "must not be empty");
    for (i, l) in cfg.sweep.levels.iter().enumerate() {
        for (j, name) in ["epsilon", "mu", "nu"].iter().enumerate() {
            nonneg(errs, &format!("sweep.levels[{i}].{name}"), l[j]);
        }
    }
    let c = &cfg.certify;
    check(errs, !c.r.is_empty(), "certify.r", "[]", "must not be empty");
    for (i, &r) in c.r.iter().enumerate() {
        nonneg(errs, &format!("certify.r[{i}]"), r);
    }
    if let Some(b) = c.bump {
        nonneg(errs, "certify.bump.at", b.at);
        positive(errs, "certify.bump.factor", b.factor);
    }
    for (name, d) in [("heat", &cfg.heat), ("relativistic", &cfg.relativistic)] {
        grid_size(errs, &format!("{name}.n"), d.n, 4);
        positive(errs, &format!("{name}.dt"), d.dt);
        positive(errs, &format!("{name}.t_final"), d.t_final);
        match d.initial {
            DensityInitial::Mode { amplitude, .. } => check(
                errs,
                amplitude.abs() < 1.0,
                &format!("{name}.initial.amplitude"),
                amplitude,
                "must lie in (-1, 1) to keep the density positive",
            ),
            DensityInitial::Bump { background, height, width } => {
                positive(errs, &format!("{name}.initial.background"), background);
                nonneg(errs, &format!("{name}.initial.height"), height);
                positive(errs, &format!("{name}.initial.width"), width);
            }
        }
    }
    let b = &cfg.bi;
    check(errs, b.lambda == 0.0, "bi.lambda", b.lambda, "must be 0 (only the λ = 0 flow is evolved)");
    if let VectorEntropy::Abs { delta } = b.theta {
        positive(errs, "bi.theta.delta", delta);
    }
    grid_size(errs, "bi.n", b.n, 8);
    positive(errs, "bi.dt", b.dt);
    positive(errs, "bi.t_final", b.t_final);
    check(errs, b.snap_every >= 1, "bi.snap_every", b.snap_every, "must be >= 1");
    if let BiInitial::Helical { a, c } = b.initial {
        check(errs, a.is_finite() && c.is_finite(), "bi.initial", format!("({a}, {c})"), "must be finite");
    }
    let k = &cfg.krtest;
    grid_size(errs, "krtest.n", k.n, 4);
    check(errs, k.fields >= 1, "krtest.fields", k.fields, "must be >= 1");
    check(errs, !k.r.is_empty(), "krtest.r", "[]", "must not be empty");
    for (i, &r) in k.r.iter().enumerate() {
        nonneg(errs, &format!("krtest.r[{i}]"), r);
    }
}

/// Parses and validates a configuration. `experiment` fills in the tag when
/// the file has none and must agree with it otherwise.
pub fn parse_config_str(text: &str, experiment: Option<Experiment>) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::single(format!("not valid JSON: {e}")))?;
    parse_config_value(&value, experiment)
}

pub fn parse_config_value(value: &Value, experiment: Option<Experiment>) -> Result<RunConfig, ConfigError> {
    let Value::Object(top) = value else {
        return Err(ConfigError::single("configuration must be a JSON object"));
    };
    let mut errs = Vec::new();
    for k in top.keys() {
        if !TOP_KEYS.contains(&k.as_str()) {
            errs.push(unknown_key("", k, &TOP_KEYS));
        }
    }
    let tag = match top.get("experiment") {
        None => None,
        Some(Value::String(s)) => match Experiment::parse(s) {
            Some(e) => Some(e),
            None => {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                let hint = suggestion(s, names.iter().copied())
                    .map(|n| format!("; did you mean \"{n}\"?"))
                    .unwrap_or_else(|| format!("; expected one of {}", names.join(", ")));
                errs.push(format!("experiment: unknown tag \"{s}\"{hint}"));
                None
            }
        },
        Some(other) => {
            errs.push(format!("experiment: expected a string, got {other}"));
            None
        }
    };
    let exp = match (tag, experiment) {
        (Some(t), Some(e)) if t != e && !(e == Experiment::Heat && t == Experiment::Relativistic) => {
            errs.push(format!("experiment: the file says \"{}\" but \"{}\" was requested", t.name(), e.name()));
            t
        }
        (Some(t), _) => t,
        (None, Some(e)) => e,
        (None, None) => {
            if !top.contains_key("experiment") {
                errs.push("experiment: missing (one of mre, sweep, certify, heat, relativistic, bi, krtest)".into());
            }
            Experiment::Mre
        }
    };
    let mut cfg = RunConfig::new(exp);
    match top.get("out") {
        None | Some(Value::Null) => {}
        Some(Value::String(s)) => cfg.out = Some(s.clone()),
        Some(other) => errs.push(format!("out: expected a string, got {other}")),
    }
    match top.get("seed") {
        None => {}
        Some(v) => match v.as_u64() {
            Some(s) => cfg.seed = s,
            None => errs.push(format!("seed: expected a nonnegative integer, got {v}")),
        },
    }
    match top.get("snap_every") {
        None | Some(Value::Null) => {}
        Some(v) => match v.as_u64() {
            Some(s) => cfg.snap_every = Some(s as usize),
            None => errs.push(format!("snap_every: expected a positive integer, got {v}")),
        },
    }
    if let Some(v) = top.get("tolerances") {
        cfg.tolerances = merge_block(&cfg.tolerances, v, "tolerances", &mut errs);
    }
    if let Some(v) = top.get("mre") {
        cfg.mre = merge_block(&cfg.mre, v, "mre", &mut errs);
    }
    if let Some(v) = top.get("sweep") {
        cfg.sweep = merge_block(&cfg.sweep, v, "sweep", &mut errs);
    }
    if let Some(v) = top.get("certify") {
        cfg.certify = merge_block(&cfg.certify, v, "certify", &mut errs);
    }
    if let Some(v) = top.get("heat") {
        cfg.heat = merge_block(&cfg.heat, v, "heat", &mut errs);
    }
    if let Some(v) = top.get("relativistic") {
        cfg.relativistic = merge_block(&cfg.relativistic, v, "relativistic", &mut errs);
    }
    if let Some(v) = top.get("bi") {
        cfg.bi = merge_block(&cfg.bi, v, "bi", &mut errs);
    }
    if let Some(v) = top.get("krtest") {
        cfg.krtest = merge_block(&cfg.krtest, v, "krtest", &mut errs);
    }
    validate(&cfg, &mut errs);
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { violations: errs })
    }
}

pub fn parse_config(path: &Path, experiment: Option<Experiment>) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::single(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, experiment)
}
