use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use relaxlab::runner::{
    config_failure, emit_plotscript, env_root, execute, maxwell_demo, parse_config, resolve_out, ConfigError,
    Experiment, Outcome, RunConfig, EXIT_CONFIG,
};

#[derive(Parser)]
#[command(name = "relaxlab", version, about = "Magnetic relaxation solvers, gradient flows and their certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (relative paths go under $RELAXLAB_OUT when set).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 gives bitwise reproducible output.
    #[arg(long)]
    threads: Option<usize>,
    /// Also write a gnuplot script for the CSV outputs.
    #[arg(long)]
    emit_plotscript: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Demo {
    MaxwellLimit,
}

#[derive(Subcommand)]
enum Command {
    /// Run whatever experiment the config names.
    Run(Common),
    /// Regularisation sweep of the MHD system.
    Sweep(Common),
    /// Entropy and transport certificates for a stored trajectory.
    Certify {
        #[command(flatten)]
        common: Common,
        /// Directory written by `relaxlab run`.
        #[arg(long)]
        traj: Option<PathBuf>,
        /// Constant rates r, comma separated.
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
        /// Iteration budget of the K_r maximisation.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Heat or relativistic heat diffusion.
    Heat(Common),
    /// Born–Infeld λ = 0 flow, or a pointwise demo.
    Bi {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        demo: Option<Demo>,
    },
    /// K_r lower bounds on seeded random fields.
    Krtest(Common),
}

fn load(common: &Common, exp: Option<Experiment>) -> Result<RunConfig, ConfigError> {
    match (&common.config, exp) {
        (Some(path), _) => parse_config(path, exp),
        (None, Some(e)) => Ok(RunConfig::new(e)),
        (None, None) => Err(ConfigError {
            violations: vec!["`run` needs --config <path>".into()],
        }),
    }
}

fn report(o: &Outcome) {
    let m = &o.manifest;
    eprintln!("{}: {} (exit {})", m.experiment, m.status, o.exit_code);
    for (name, c) in &m.verdicts {
        let mark = if c.pass { "ok  " } else { "FAIL" };
        eprintln!("  {mark} {name}: {:e} (limit {:e})", c.value, c.limit);
    }
    if let Some(e) = &m.error {
        eprintln!("  error: {e}");
    }
    eprintln!("  manifest: {}", m.out_dir.join("manifest.json").display());
}

fn finish(o: Outcome, plot: bool) -> ExitCode {
    report(&o);
    if plot {
        match emit_plotscript(&o.manifest) {
            Ok(p) => eprintln!("  plot script: {}", p.display()),
            Err(e) => eprintln!("  could not write the plot script: {e}"),
        }
    }
    ExitCode::from(o.exit_code as u8)
}

fn config_error(common: &Common, exp: Option<Experiment>, err: &ConfigError) -> ExitCode {
    let name = exp.map_or("run", Experiment::name);
    let out = resolve_out(common.out.as_deref(), None, name, env_root());
    eprintln!("{err}");
    let o = config_failure(name, &out, err);
    ExitCode::from(o.exit_code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, exp) = match &cli.command {
        Command::Run(c) => (c.clone(), None),
        Command::Sweep(c) => (c.clone(), Some(Experiment::Sweep)),
        Command::Certify { common, .. } => (common.clone(), Some(Experiment::Certify)),
        Command::Heat(c) => (c.clone(), Some(Experiment::Heat)),
        Command::Bi { common, .. } => (common.clone(), Some(Experiment::Bi)),
        Command::Krtest(c) => (c.clone(), Some(Experiment::Krtest)),
    };
    if let Command::Bi { demo: Some(Demo::MaxwellLimit), .. } = cli.command {
        let out = resolve_out(common.out.as_deref(), None, "bi", env_root()).join("maxwell-limit");
        let (o, csv) = maxwell_demo(&out);
        print!("{csv}");
        if let Some(slope) = o.manifest.metrics.get("slope") {
            eprintln!("fitted slope {slope:.4}");
        }
        return finish(o, common.emit_plotscript);
    }
    let mut cfg = match load(&common, exp) {
        Ok(c) => c,
        Err(e) => return config_error(&common, exp, &e),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Command::Certify { traj, r, budget, .. } = &cli.command {
        if let Some(t) = traj {
            cfg.certify.traj = Some(t.display().to_string());
        }
        if let Some(r) = r {
            if r.is_empty() || r.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                let err = ConfigError {
                    violations: vec![format!("--r {r:?}: rates must be finite and >= 0")],
                };
                return config_error(&common, exp, &err);
            }
            cfg.certify.r = r.clone();
        }
        if let Some(b) = budget {
            cfg.certify.budget = *b;
        }
    }
    if common.threads == Some(0) {
        let err = ConfigError {
            violations: vec!["--threads must be >= 1".into()],
        };
        return config_error(&common, exp, &err);
    }
    let out = resolve_out(common.out.as_deref(), cfg.out.as_deref(), cfg.experiment.name(), env_root());
    let o = execute(&cfg, Path::new(&out), common.threads);
    debug_assert!(o.exit_code != EXIT_CONFIG);
    finish(o, common.emit_plotscript)
}
