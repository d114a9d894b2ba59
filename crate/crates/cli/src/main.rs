//! `emhd`: run, ensemble, verify and inspect.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use emhd_core::checkpoint::{read_checkpoint, write_checkpoint, CheckpointMeta};
use emhd_core::config::{parse_config_with, RunConfig};
use emhd_core::diagnostics::write_ndjson;
use emhd_core::ensemble::{aggregate, run_ensemble_with};
use emhd_core::integrator::{InitialData, Solver, SolverConfig, TrajectoryRecord};
use emhd_core::spectral::{sobolev_norm, Mode};
use emhd_core::verification::{primary_checks_pass, run_suite, Selector, SuiteOptions, Thresholds};
use emhd_core::Error;

const OUTPUT_ENV: &str = "EMHD_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "emhd", version, about = "Stochastic electron-MHD on the torus: simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one path and write its diagnostics and final state.
    Run {
        #[command(flatten)]
        common: RunArgs,
        /// Path id, which selects the Brownian increments.
        #[arg(long, default_value_t = 0)]
        path_id: u64,
    },
    /// Integrate many paths and aggregate their moments.
    Ensemble {
        #[command(flatten)]
        common: RunArgs,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run verification groups and write one report per check.
    Verify {
        /// Groups to run: identities, oracles, ratios, dissipation, scheme,
        /// conservation, energy, uniqueness, cutoff, bookkeeping, ablations, all.
        selectors: Vec<String>,
        /// Turn the faults of the negative controls on in the primary checks.
        #[arg(long)]
        inject_ablation: bool,
        /// Smaller sweeps and ensembles.
        #[arg(long)]
        quick: bool,
        /// TOML file overriding individual tolerances.
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Print the header and norms of a checkpoint.
    Inspect { checkpoint: PathBuf },
    /// Check a single decaying mode against its closed form.
    SelfTest,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; every key has a default.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// `section.key=value`, applied after the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; beats both the environment and the file.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Failures that should exit with the usage code.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<UsageError>().is_some() || matches!(e.downcast_ref::<Error>(), Some(Error::Config(_)));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { common, path_id } => run(&common, path_id),
        Command::Ensemble { common, paths, workers } => ensemble(&common, paths, workers),
        Command::Verify { selectors, inject_ablation, quick, thresholds, seed, workers, output } => {
            verify(&selectors, inject_ablation, quick, thresholds.as_deref(), seed, workers, output)
        }
        Command::Inspect { checkpoint } => inspect(&checkpoint),
        Command::SelfTest => self_test(),
    }
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    let text = match &args.config {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let mut cfg = parse_config_with(&text, &args.overrides)?;
    if let Some(dir) = std::env::var_os(OUTPUT_ENV) {
        cfg.output_dir = PathBuf::from(dir);
    }
    if let Some(dir) = &args.output {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn prepare(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    fs::write(cfg.output_dir.join("config.toml"), cfg.to_toml())?;
    Ok(())
}

fn write_records(path: &Path, rec: &TrajectoryRecord) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_ndjson(&mut w, &rec.records)?;
    w.flush()?;
    Ok(())
}

fn meta(cfg: &SolverConfig, rec: &TrajectoryRecord) -> CheckpointMeta {
    CheckpointMeta {
        alpha: cfg.alpha,
        mu: cfg.mu,
        r: cfg.r,
        s: cfg.s,
        t: rec.final_state.t,
        seed: cfg.seed,
        path_id: rec.path_id,
    }
}

fn describe(rec: &TrajectoryRecord, s: f64) -> String {
    let st = &rec.final_state;
    let mut line = format!(
        "path {}: t={:.6} steps={} |B|_L2={:.6e} |B|_H^{s}={:.6e}",
        rec.path_id,
        st.t,
        st.step,
        st.b.l2_norm(),
        sobolev_norm(&st.b, s, false)
    );
    if let Some(t) = st.sigma_r_hit {
        line.push_str(&format!(" cutoff_time={t:.6}"));
    }
    if st.blown_up {
        line.push_str(&format!(" blown_up_at={:.6}", st.blow_up_time.unwrap_or(st.t)));
    }
    line
}

fn run(args: &RunArgs, path_id: u64) -> Result<ExitCode> {
    let cfg = load(args)?;
    prepare(&cfg)?;
    let start = Instant::now();
    let solver = Solver::new(&cfg.solver)?;
    let rec = solver.run(path_id)?;
    let dir = &cfg.output_dir;
    write_records(&dir.join("diagnostics.ndjson"), &rec)?;
    write_checkpoint(&dir.join("final.ckpt"), &meta(&cfg.solver, &rec), &rec.final_state.b, &solver.basis)?;
    println!("{}", describe(&rec, cfg.solver.s));
    if !cfg.deterministic {
        println!("wall time {:.2}s", start.elapsed().as_secs_f64());
    }
    println!("wrote {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn ensemble(args: &RunArgs, paths: Option<usize>, workers: Option<usize>) -> Result<ExitCode> {
    let mut cfg = load(args)?;
    cfg.paths = paths.unwrap_or(cfg.paths);
    cfg.workers = workers.unwrap_or(cfg.workers);
    if cfg.paths == 0 || cfg.workers == 0 {
        bail!(UsageError("--paths and --workers must be at least 1".into()));
    }
    prepare(&cfg)?;
    let start = Instant::now();
    let solver = Solver::new(&cfg.solver)?;
    let recs = run_ensemble_with(&solver, cfg.paths, cfg.workers)?;
    let dir = cfg.output_dir.join("paths");
    fs::create_dir_all(&dir)?;
    for rec in &recs {
        write_records(&dir.join(format!("path_{:05}.ndjson", rec.path_id)), rec)?;
    }
    let agg = aggregate(&recs, cfg.solver.moment_p)?;
    let mut value = serde_json::to_value(&agg)?;
    if !cfg.deterministic {
        value["wall_time_s"] = start.elapsed().as_secs_f64().into();
    }
    fs::write(cfg.output_dir.join("aggregate.json"), serde_json::to_string_pretty(&value)?)?;
    println!(
        "{} paths: E sup|B|^p_H^s = {:.6e} ± {:.2e}, blown up {}, cutoff reached {}",
        agg.paths, agg.sup_hs_p.mean, agg.sup_hs_p.std_error, agg.blown_up, agg.sigma_r_hits
    );
    println!("wrote {}", cfg.output_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn verify(
    names: &[String],
    inject_ablation: bool,
    quick: bool,
    thresholds: Option<&Path>,
    seed: u64,
    workers: usize,
    output: Option<PathBuf>,
) -> Result<ExitCode> {
    if names.is_empty() {
        bail!(UsageError("name at least one group to verify, or `all`".into()));
    }
    let selectors = names
        .iter()
        .map(|n| n.parse::<Selector>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| UsageError(e.to_string()))?;
    let thresholds = match thresholds {
        Some(p) => Thresholds::from_toml(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => Thresholds::default(),
    };
    let opts = SuiteOptions { thresholds, inject_ablation, quick, seed, workers: workers.max(1) };
    let reports = run_suite(&selectors, &opts)?;
    let dir = output.or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    let mut w = BufWriter::new(File::create(dir.join("verification.ndjson"))?);
    for r in &reports {
        writeln!(w, "{}", r.to_json_line()?)?;
        println!("{}", r.summary());
    }
    w.flush()?;
    let ok = primary_checks_pass(&reports);
    println!("{} checks, {}", reports.len(), if ok { "all primary checks passed" } else { "some primary checks FAILED" });
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn inspect(path: &Path) -> Result<ExitCode> {
    let c = read_checkpoint(path)?;
    let h = &c.header;
    println!("checkpoint {}", path.display());
    println!("  format version {}", h.version);
    println!("  n = {}  K = {}", h.n, h.k);
    println!("  alpha = {}  mu = {}  r = {}  s = {}", h.alpha, h.mu, h.r, h.s);
    println!("  t = {}  seed = {}  path = {}", h.t, h.seed, h.path_id);
    println!("  |B|_L2 = {:.6e}", c.b.l2_norm());
    println!("  |B|_H^s = {:.6e}", sobolev_norm(&c.b, h.s, false));
    println!("  divergence residual = {:.3e}", c.b.divergence_residual());
    Ok(ExitCode::SUCCESS)
}

/// A single mode with no noise and no Hall term decays as `e^{-μ|k|^α t}`.
fn self_test() -> Result<ExitCode> {
    let k = Mode([1, 1, 0]);
    let cfg = SolverConfig {
        n: 4,
        noise_modes: 0,
        dt: 0.01,
        t_final: 0.5,
        diagnostics_interval: 50,
        initial: InitialData::SingleMode { mode: k.0, amplitude: 0.3 },
        ..Default::default()
    };
    let solver = Solver::new(&cfg)?;
    let b0 = solver.initial_state()?.b;
    let rec = solver.run(0)?;
    let expected = b0.l2_norm() * (-cfg.mu * k.norm().powf(cfg.alpha) * cfg.t_final).exp();
    let err = (rec.final_state.b.l2_norm() - expected).abs() / expected;
    let ok = err <= 1e-10;
    println!("{} single-mode decay: relative error {err:.3e}", if ok { "PASS" } else { "FAIL" });
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
