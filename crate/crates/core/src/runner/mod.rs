//! Experiment orchestration: validated configs in, ledgers, snapshots,
//! certificates and a manifest out.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numeric failure, 3 a
//! checked property (certificate, balance, bound) failed. The manifest is
//! written on every path that knows its output directory.

pub mod config;
pub mod persist;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use config::{parse_config, parse_config_str, ConfigError, DensityInitial, DiffusionBlock, Experiment, RunConfig};
pub use persist::{load_trajectory, save_trajectory};

use crate::born_infeld::{maxwell_limit_check, run_bi};
use crate::certify::{entropy_residual, transport_dictionary, transport_residual, witnesses_for, RSchedule};
use crate::error::{RelaxError, Result};
use crate::fields::snapshot::{save_scalar, save_vec3};
use crate::fields::{divergence_max, Grid2, ScalarField};
use crate::functionals::{euler_residual, kr_maximize, recover_l};
use crate::gradient_flow::{run_diffusion, ScalarDiffusionProblem};
use crate::mhd::sweep::run_sweep;
use crate::mhd::{energy_balance_residual, run_mhd, run_mhd_partial, InitialCondition, MhdState, MreParams, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

pub const MANIFEST_SCHEMA: &str = "relaxlab-manifest-v1";
pub const OUT_ENV: &str = "RELAXLAB_OUT";

/// One checked property: passes when `value <= limit`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(value: f64, limit: f64) -> Self {
        Self {
            value,
            limit,
            pass: value <= limit,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub schema: &'static str,
    pub code_version: &'static str,
    pub experiment: String,
    pub config: Option<RunConfig>,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub wall_time_s: f64,
    pub exit_code: i32,
    pub status: &'static str,
    pub error: Option<String>,
    pub verdicts: BTreeMap<String, Check>,
    /// Informational values that carry no verdict.
    pub metrics: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub manifest: Manifest,
}

/// Where a run writes. Relative paths are taken under `$RELAXLAB_OUT` when
/// it is set; without any path the run goes to `<root>/<experiment>` with
/// root `$RELAXLAB_OUT` or `out`.
pub fn resolve_out(cli: Option<&Path>, cfg: Option<&str>, exp: &str, env_root: Option<PathBuf>) -> PathBuf {
    match cli.map(Path::to_path_buf).or_else(|| cfg.map(PathBuf::from)) {
        Some(p) if p.is_absolute() => p,
        Some(p) => match env_root {
            Some(r) => r.join(p),
            None => p,
        },
        None => env_root.unwrap_or_else(|| PathBuf::from("out")).join(exp),
    }
}

pub fn env_root() -> Option<PathBuf> {
    std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Collected results of one experiment body.
#[derive(Default)]
struct Report {
    verdicts: BTreeMap<String, Check>,
    metrics: BTreeMap<String, f64>,
    outputs: Vec<String>,
    notes: Vec<String>,
    /// Set when the body stopped on a numeric failure after writing output.
    failure: Option<RelaxError>,
}

impl Report {
    fn check(&mut self, name: &str, c: Check) {
        self.verdicts.insert(name.to_string(), c);
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }

    fn output(&mut self, out: &Path, p: &Path) {
        let rel = p.strip_prefix(out).unwrap_or(p);
        self.outputs.push(rel.display().to_string());
    }
}

fn manifest_base(exp: &str, out: &Path, threads: Option<usize>) -> Manifest {
    Manifest {
        schema: MANIFEST_SCHEMA,
        code_version: env!("CARGO_PKG_VERSION"),
        experiment: exp.to_string(),
        config: None,
        out_dir: out.to_path_buf(),
        threads,
        wall_time_s: 0.0,
        exit_code: EXIT_OK,
        status: "ok",
        error: None,
        verdicts: BTreeMap::new(),
        metrics: BTreeMap::new(),
        outputs: Vec::new(),
        notes: Vec::new(),
    }
}

pub fn write_manifest(m: &Manifest) -> Result<()> {
    fs::create_dir_all(&m.out_dir)?;
    let text = serde_json::to_string_pretty(m).map_err(|e| RelaxError::Format(e.to_string()))?;
    fs::write(m.out_dir.join("manifest.json"), text)?;
    Ok(())
}

/// Manifest for a configuration that never got to run.
pub fn config_failure(exp: &str, out: &Path, err: &ConfigError) -> Outcome {
    let mut m = manifest_base(exp, out, None);
    m.exit_code = EXIT_CONFIG;
    m.status = "config_error";
    m.error = Some(err.to_string());
    // best effort: the directory may be unusable
    let _ = write_manifest(&m);
    Outcome { exit_code: EXIT_CONFIG, manifest: m }
}

fn finish(mut m: Manifest, started: Instant, body: Result<Report>) -> Outcome {
    m.wall_time_s = started.elapsed().as_secs_f64();
    let report = match body {
        Ok(r) => r,
        Err(e) => Report {
            failure: Some(e),
            ..Report::default()
        },
    };
    m.verdicts = report.verdicts;
    m.metrics = report.metrics;
    m.outputs = report.outputs;
    m.notes = report.notes;
    if let Some(e) = report.failure {
        m.exit_code = EXIT_NUMERIC;
        m.status = "numeric_failure";
        m.error = Some(e.to_string());
    } else if let Some((name, _)) = m.verdicts.iter().find(|(_, c)| !c.pass) {
        m.exit_code = EXIT_CHECK;
        m.status = "check_failure";
        m.error = Some(format!("check \"{name}\" failed"));
    }
    if let Err(e) = write_manifest(&m) {
        m.exit_code = EXIT_NUMERIC;
        m.status = "numeric_failure";
        m.error = Some(format!("could not write the manifest: {e}"));
    }
    Outcome {
        exit_code: m.exit_code,
        manifest: m,
    }
}

/// Runs `cfg` into `out`, on a pool of `threads` workers when given.
pub fn execute(cfg: &RunConfig, out: &Path, threads: Option<usize>) -> Outcome {
    let started = Instant::now();
    let mut m = manifest_base(cfg.experiment.name(), out, threads);
    m.config = Some(cfg.clone());
    let body = || -> Result<Report> {
        fs::create_dir_all(out)?;
        match cfg.experiment {
            Experiment::Mre => mre(cfg, out),
            Experiment::Sweep => sweep(cfg, out),
            Experiment::Certify => certify(cfg, out),
            Experiment::Heat => diffusion(&cfg.heat, false, cfg, out),
            Experiment::Relativistic => diffusion(&cfg.relativistic, true, cfg, out),
            Experiment::Bi => bi(cfg, out),
            Experiment::Krtest => krtest(cfg, out),
        }
    };
    let result = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(body),
            Err(e) => Err(RelaxError::InvalidArgument(format!("thread pool: {e}"))),
        },
        None => body(),
    };
    finish(m, started, result)
}

fn snap_cadence(cfg: &RunConfig, steps: usize) -> usize {
    cfg.snap_every.unwrap_or((steps / 20).max(1))
}

fn write_csv_file<F>(out: &Path, name: &str, rep: &mut Report, write: F) -> Result<()>
where
    F: FnOnce(fs::File) -> Result<()>,
{
    let path = out.join(name);
    write(fs::File::create(&path)?)?;
    rep.output(out, &path);
    Ok(())
}

fn mre_checks(traj: &Trajectory, cfg: &RunConfig, rep: &mut Report) -> Result<()> {
    let rows = &traj.ledger.rows;
    let e0 = traj.initial_energy();
    if rows.len() >= 2 {
        let res = energy_balance_residual(&traj.ledger)?;
        let worst = res.total.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        rep.check(
            "energy_balance",
            Check::at_most(worst / e0.max(f64::MIN_POSITIVE), cfg.tolerances.energy_balance),
        );
        let rise = rows
            .windows(2)
            .map(|w| (w[1].b2 + w[1].epsv2) - (w[0].b2 + w[0].epsv2))
            .fold(f64::NEG_INFINITY, f64::max);
        // rounding allowance only
        rep.check("energy_nonincreasing", Check::at_most(rise, 1e-14 * e0));
    }
    let div = traj
        .snapshots
        .iter()
        .map(|s| Ok(divergence_max(&s.b)? / (1.0 + s.b.scale())))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    rep.check("div_b", Check::at_most(div, 1e-10));
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        rep.metric("LB_initial", first.lb);
        rep.metric("LB_final", last.lb);
        rep.metric("energy_initial", e0);
        rep.metric("energy_final", last.b2 + last.epsv2);
    }
    Ok(())
}

fn mre(cfg: &RunConfig, out: &Path) -> Result<Report> {
    let mut rep = Report::default();
    let steps = cfg.mre.params(cfg.seed, 1).steps();
    let p = cfg.mre.params(cfg.seed, snap_cadence(cfg, steps));
    let run = run_mhd_partial(&p)?;
    save_trajectory(out, &run.trajectory)?;
    rep.outputs.extend(["params.json", "ledger.csv", "snapshots/"].map(String::from));
    mre_checks(&run.trajectory, cfg, &mut rep)?;
    rep.metric("steps_completed", (run.trajectory.ledger.rows.len() - 1) as f64);
    rep.failure = run.failure;
    Ok(rep)
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<Report> {
    let mut rep = Report::default();
    let base = cfg.mre.params(cfg.seed, 0);
    let levels: Vec<(f64, f64, f64)> = cfg.sweep.levels.iter().map(|l| (l[0], l[1], l[2])).collect();
    let report = run_sweep(&base, &levels)?;
    write_csv_file(out, "sweep.csv", &mut rep, |f| {
        let mut w = csv::Writer::from_writer(f);
        let err = |e: csv::Error| RelaxError::Format(e.to_string());
        w.write_record(["level", "epsilon", "mu", "nu", "distance_to_next"]).map_err(err)?;
        for (i, r) in report.runs.iter().enumerate() {
            let d = report.distances.get(i).map_or(String::new(), |d| format!("{d:e}"));
            w.write_record([i.to_string(), format!("{:e}", r.epsilon), format!("{:e}", r.mu), format!("{:e}", r.nu), d])
                .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    })?;
    let worst_step = report.distances.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    if report.distances.len() >= 2 {
        rep.check("cauchy_decreasing", Check::at_most(worst_step, 0.0));
    }
    Ok(rep)
}

fn certify(cfg: &RunConfig, out: &Path) -> Result<Report> {
    let mut rep = Report::default();
    let c = &cfg.certify;
    let mut traj = match &c.traj {
        Some(dir) => load_trajectory(Path::new(dir))?,
        None => {
            let steps = cfg.mre.params(cfg.seed, 1).steps();
            let t = run_mhd(&cfg.mre.params(cfg.seed, snap_cadence(cfg, steps)))?;
            rep.notes.push("trajectory computed from the mre block".into());
            t
        }
    };
    if let Some(b) = c.bump {
        let s = b.factor.sqrt();
        for snap in traj.snapshots.iter_mut().filter(|x| x.time >= b.at - 1e-12) {
            snap.b = snap.b.scaled(s);
        }
        for row in traj.ledger.rows.iter_mut().filter(|x| x.time >= b.at - 1e-12) {
            row.b2 *= b.factor;
        }
        rep.notes.push(format!("stored energy scaled by {} from t = {}", b.factor, b.at));
    }
    let b0 = traj.snapshots[0].b.norm_sq();
    let tol = cfg.tolerances.certificate * b0;
    for &r in &c.r {
        let sched = RSchedule::constant_from(traj.snapshots[0].time, r)?;
        let w = witnesses_for(&traj, &sched, c.budget)?;
        let cert = entropy_residual(&traj, &sched, &w, tol)?;
        let path = out.join(format!("certificate_r{r}.json"));
        fs::write(&path, cert.to_json())?;
        rep.output(out, &path);
        rep.check(&format!("entropy_r{r}"), Check::at_most(-cert.worst_residual, tol));
    }
    if c.transport {
        let fields = transport_dictionary();
        let res = transport_residual(&traj, &fields)?;
        write_csv_file(out, "transport.csv", &mut rep, |f| {
            let mut w = csv::Writer::from_writer(f);
            let err = |e: csv::Error| RelaxError::Format(e.to_string());
            w.write_record(["k1", "k2", "phase", "residual"]).map_err(err)?;
            for (tf, r) in fields.iter().zip(&res) {
                w.write_record([tf.k.0.to_string(), tf.k.1.to_string(), format!("{:e}", tf.phase), format!("{r:e}")])
                    .map_err(err)?;
            }
            w.flush()?;
            Ok(())
        })?;
        rep.metric("transport_residual_max", res.iter().copied().fold(0.0, f64::max));
    }
    Ok(rep)
}

pub fn density(grid: Grid2, init: &DensityInitial) -> ScalarField {
    let tau = 2.0 * std::f64::consts::PI;
    match *init {
        DensityInitial::Mode { amplitude, k1, k2 } => {
            ScalarField::from_fn(grid, |x1, x2| 1.0 + amplitude * (tau * (k1 as f64 * x1 + k2 as f64 * x2)).cos())
        }
        DensityInitial::Bump { background, height, width } => ScalarField::from_fn(grid, |x1, x2| {
            let r2 = (x1 - 0.5).powi(2) + (x2 - 0.5).powi(2);
            background + height * (-r2 / (2.0 * width * width)).exp()
        }),
    }
}

fn diffusion(block: &DiffusionBlock, relativistic: bool, cfg: &RunConfig, out: &Path) -> Result<Report> {
    let mut rep = Report::default();
    let grid = Grid2::square(block.n)?;
    let rho = density(grid, &block.initial);
    let prob = if relativistic {
        ScalarDiffusionProblem::relativistic(rho)?
    } else {
        ScalarDiffusionProblem::heat(rho)?
    };
    let steps = (block.t_final / block.dt).round().max(1.0) as usize;
    let run = run_diffusion(&prob, block.dt, block.t_final, snap_cadence(cfg, steps))?;
    write_csv_file(out, "diffusion.csv", &mut rep, |f| run.ledger.write_csv(f))?;
    let snaps = out.join("snapshots");
    fs::create_dir_all(&snaps)?;
    for (k, (t, rho)) in run.snapshots.iter().enumerate() {
        save_scalar(&snaps.join(format!("rho_{k:05}")), "rho", *t, rho)?;
    }
    rep.outputs.push("snapshots/".into());
    let rows = &run.ledger.rows;
    let m0 = rows[0].mass;
    let drift = rows.iter().map(|r| (r.mass - m0).abs()).fold(0.0, f64::max) / m0.abs().max(f64::MIN_POSITIVE);
    rep.check("mass_conservation", Check::at_most(drift, cfg.tolerances.mass));
    let scale = rows[0].entropy.abs().max(1.0);
    rep.check(
        "entropy_nonincreasing",
        Check::at_most(run.max_entropy_increase / scale, cfg.tolerances.entropy_rise),
    );
    if relativistic {
        rep.check("flux_speed_bound", Check::at_most(run.max_flux_ratio, 1.0));
    }
    rep.metric("max_flux_ratio", run.max_flux_ratio);
    rep.metric("rejections", run.rejections as f64);
    let hv = rows[1..].iter().map(|r| r.hv_lhs).fold(f64::NEG_INFINITY, f64::max);
    rep.metric("hv_lhs_max", hv);
    Ok(rep)
}

fn bi(cfg: &RunConfig, out: &Path) -> Result<Report> {
    let mut rep = Report::default();
    let p = &cfg.bi;
    let run = run_bi(p)?;
    write_csv_file(out, "bi.csv", &mut rep, |f| run.ledger.write_csv(f))?;
    let snaps = out.join("snapshots");
    fs::create_dir_all(&snaps)?;
    for (k, s) in run.snapshots.iter().enumerate() {
        save_vec3(&snaps.join(format!("B_{k:05}")), "B", s.time, &s.b)?;
    }
    rep.outputs.push("snapshots/".into());
    if let crate::gradient_flow::VectorEntropy::Abs { delta } = p.theta {
        rep.metric("smoothing_delta", delta);
        rep.notes.push(format!("theta = |B| is smoothed as sqrt(delta² + |B|²) with delta = {delta}"));
    }
    let rows = &run.ledger.rows;
    let scale = run.snapshots[0].b.max_magnitude().max(1.0);
    let fold = |f: fn(&crate::born_infeld::BiRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let max_v = fold(|r| r.max_v);
    rep.check(
        "speed_below_one",
        Check {
            value: max_v,
            limit: 1.0,
            pass: max_v < 1.0,
        },
    );
    rep.check("e_dot_b", Check::at_most(fold(|r| r.e_dot_b_max), 1e-10));
    rep.check("div_b", Check::at_most(fold(|r| r.div_b_max) / scale, 1e-10));
    rep.check(
        "theta_nonincreasing",
        Check::at_most(run.ledger.max_theta_rise().max(0.0), cfg.tolerances.entropy_rise),
    );
    rep.metric("theta_initial", rows[0].theta_b);
    rep.metric("theta_final", rows[rows.len() - 1].theta_b);
    Ok(rep)
}

fn krtest(cfg: &RunConfig, out: &Path) -> Result<Report> {
    let mut rep = Report::default();
    let k = &cfg.krtest;
    let mut rows = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..k.fields {
        let p = MreParams {
            n: k.n,
            seed: cfg.seed.wrapping_add(i as u64),
            initial: InitialCondition::Random,
            ..MreParams::default()
        };
        let b = MhdState::initial(&p)?.b;
        let b2 = b.norm_sq();
        for &r in &k.r {
            let est = kr_maximize(&b, r, k.budget)?;
            worst = worst.max(r * b2 - est.value);
            rows.push(vec![
                i.to_string(),
                format!("{r:e}"),
                format!("{:e}", est.value),
                format!("{:e}", r * b2),
                format!("{:e}", est.dual_bound),
                est.iterations.to_string(),
                format!("{:e}", est.witness.margin()),
            ]);
        }
        if k.recover_l {
            let lower = recover_l(&b, &k.r, k.budget)?;
            let l = euler_residual(&b)?;
            rep.metric(&format!("field{i}_recovered_L"), lower);
            rep.metric(&format!("field{i}_L"), l);
        }
    }
    write_csv_file(out, "kr.csv", &mut rep, |f| {
        let mut w = csv::Writer::from_writer(f);
        let err = |e: csv::Error| RelaxError::Format(e.to_string());
        w.write_record(["field", "r", "value", "r_norm2", "dual_bound", "iterations", "margin"])
            .map_err(err)?;
        for r in &rows {
            w.write_record(r).map_err(err)?;
        }
        w.flush()?;
        Ok(())
    })?;
    rep.check("lower_bound", Check::at_most(worst, 1e-10));
    Ok(rep)
}

/// `g(λ) = λ(λ + L_λ(E, B))` at `E = 0`, `B = e1` for λ in {10, 100, 1000},
/// written as `maxwell_limit.csv`. Returns the outcome and the CSV text.
pub fn maxwell_demo(out: &Path) -> (Outcome, String) {
    let started = Instant::now();
    let m = manifest_base("bi", out, None);
    let mut text = String::new();
    let body = (|| -> Result<Report> {
        let mut rep = Report::default();
        fs::create_dir_all(out)?;
        let table = maxwell_limit_check([0.0; 3], [1.0, 0.0, 0.0], &[10.0, 100.0, 1000.0])?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| RelaxError::Format(e.to_string());
        w.write_record(["lambda", "g", "limit", "abs_error"]).map_err(err)?;
        for i in 0..table.lambdas.len() {
            w.write_record([table.lambdas[i], table.g[i], table.limit, table.errors[i]].map(|v| format!("{v:e}")))
                .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| RelaxError::Format(e.to_string()))?;
        text = String::from_utf8(bytes).map_err(|e| RelaxError::Format(e.to_string()))?;
        let path = out.join("maxwell_limit.csv");
        fs::write(&path, &text)?;
        rep.output(out, &path);
        let slope = table.slope.unwrap_or(f64::NAN);
        rep.metric("slope", slope);
        rep.check("slope_minus_two", Check::at_most((slope + 2.0).abs(), 0.1));
        Ok(rep)
    })();
    (finish(m, started, body), text)
}

/// A gnuplot script plotting every CSV output against its first column.
pub fn emit_plotscript(m: &Manifest) -> Result<PathBuf> {
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\n");
    for o in m.outputs.iter().filter(|o| o.ends_with(".csv")) {
        let path = m.out_dir.join(o);
        let header = fs::read_to_string(&path)?.lines().next().unwrap_or_default().to_string();
        let cols = header.split(',').count();
        if cols < 2 {
            continue;
        }
        let stem = o.trim_end_matches(".csv");
        s.push_str(&format!(
            "set output '{stem}.png'\nplot for [i=2:{cols}] '{o}' using 1:i with lines\n"
        ));
    }
    let path = m.out_dir.join("plot.gp");
    fs::write(&path, s)?;
    Ok(path)
}
