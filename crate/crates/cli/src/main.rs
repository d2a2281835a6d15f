use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rtdd_core::audit::fault_audit;
use rtdd_core::certificate::{check_certificate, spot_check, CertContext, PolynomialCertificate, Verdict};
use rtdd_core::config::RobotConfig;
use rtdd_core::export::{export_plot_data, ExportOptions};
use rtdd_core::frs::{compute_frs, FrsOptions, FrsTube};
use rtdd_core::planner::{Budget, PlannerOptions};
use rtdd_core::sim::{metrics_table, BatchSpec, Harness, TrialConfig};
use rtdd_core::trace::TrialTrace;
use rtdd_core::tracking::{fit_for_robot, SampleGrid, TrackingErrorBound, DEFAULT_MARGIN};
use rtdd_core::world::PredictorKind;

#[derive(Parser)]
#[command(name = "rtdd", version, about = "Reachability-based trajectory design among moving obstacles")]
struct Cli {
    /// Directory that relative output paths are resolved against.
    #[arg(long, env = "RTDD_OUT_DIR", default_value = "out", global = true)]
    out_dir: PathBuf,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tracking-error bound fitting.
    G {
        #[command(subcommand)]
        cmd: GCmd,
    },
    /// Forward reachable set construction.
    Frs {
        #[command(subcommand)]
        cmd: FrsCmd,
    },
    /// Simulation trials.
    Sim {
        #[command(subcommand)]
        cmd: SimCmd,
    },
    /// Offline fault audit of trace files.
    Audit {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Polynomial certificate verification.
    Cert {
        #[command(subcommand)]
        cmd: CertCmd,
    },
    /// Plot-ready JSON from a trace.
    ExportPlotData {
        trace: PathBuf,
        #[arg(long)]
        frs: PathBuf,
        #[arg(long, default_value = "plot.json")]
        out: PathBuf,
        /// Iteration for the K-space feasibility map.
        #[arg(long)]
        kspace: Option<usize>,
        #[arg(long, default_value_t = 10)]
        stride: usize,
    },
}

#[derive(Subcommand)]
enum GCmd {
    Fit {
        #[command(flatten)]
        robot: RobotArg,
        #[arg(long, default_value = "g.json")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
        /// Samples per axis of K, aux values, and speed values.
        #[arg(long, num_args = 3, value_names = ["K", "AUX", "SPEED"])]
        grid: Option<Vec<usize>>,
        #[arg(long, default_value_t = 1000)]
        holdout: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum FrsCmd {
    Build {
        #[command(flatten)]
        robot: RobotArg,
        /// Tracking-error bound; fitted with defaults when omitted.
        #[arg(long)]
        g: Option<PathBuf>,
        #[arg(long, default_value = "frs.json")]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        cells: usize,
        #[arg(long, default_value_t = 0.02)]
        dt: f64,
    },
}

#[derive(Args, Clone)]
struct RobotArg {
    /// Preset name (`segway`, `ev`) or robot TOML file.
    #[arg(long, default_value = "segway")]
    robot: String,
}

#[derive(Args, Clone)]
struct TrialArgs {
    #[command(flatten)]
    robot: RobotArg,
    #[arg(long)]
    frs: PathBuf,
    /// Trial config TOML; flags below override it.
    #[arg(long)]
    trial: Option<PathBuf>,
    #[arg(long)]
    max_duration: Option<f64>,
    #[arg(long, value_enum, default_value_t = Predictor::Oracle)]
    predictor: Predictor,
    /// Candidate budget per planning iteration.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Predictor {
    Oracle,
    Cone,
}

#[derive(Subcommand)]
enum SimCmd {
    Run {
        #[command(flatten)]
        args: TrialArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        obstacles: usize,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    Batch {
        #[command(flatten)]
        args: TrialArgs,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Obstacle counts, e.g. `1..=10` or `0,2,5`.
        #[arg(long, default_value = "1..=10")]
        counts: String,
        #[arg(long, default_value = "metrics.csv")]
        out: PathBuf,
        /// Directory for per-trial traces.
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long)]
        no_audit: bool,
    },
}

#[derive(Subcommand)]
enum CertCmd {
    Check {
        certificate: PathBuf,
        #[command(flatten)]
        robot: RobotArg,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long, default_value_t = 10_000)]
        spot: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn output(dir: &Path, p: &Path) -> Result<PathBuf> {
    let full = if p.is_absolute() { p.to_path_buf() } else { dir.join(p) };
    if let Some(parent) = full.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(full)
}

fn output_dir(dir: &Path, p: &Path) -> Result<PathBuf> {
    let full = if p.is_absolute() { p.to_path_buf() } else { dir.join(p) };
    fs::create_dir_all(&full).with_context(|| format!("creating {}", full.display()))?;
    Ok(full)
}

fn parse_counts(s: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = s.split_once("..=") {
        return Ok((a.trim().parse()?..=b.trim().parse()?).collect());
    }
    if let Some((a, b)) = s.split_once("..") {
        return Ok((a.trim().parse()?..b.trim().parse()?).collect());
    }
    s.split(',').map(|c| Ok(c.trim().parse()?)).collect()
}

fn load_robot(arg: &RobotArg) -> Result<RobotConfig> {
    RobotConfig::load(&arg.robot).with_context(|| format!("loading robot `{}`", arg.robot))
}

fn load_tube(path: &Path) -> Result<FrsTube> {
    FrsTube::load(path).with_context(|| format!("loading tube {}", path.display()))
}

fn trial_setup(args: &TrialArgs) -> Result<(RobotConfig, FrsTube, TrialConfig, PlannerOptions)> {
    let robot = load_robot(&args.robot)?;
    let tube = load_tube(&args.frs)?;
    let mut tc = match &args.trial {
        Some(p) => TrialConfig::from_toml_str(&fs::read_to_string(p)?)?,
        None => TrialConfig::for_robot(&robot, 0, 0),
    };
    if let Some(d) = args.max_duration {
        tc.max_duration = d;
    }
    let mut opts = PlannerOptions::for_robot(&robot);
    opts.predictor = match args.predictor {
        Predictor::Oracle => PredictorKind::Oracle,
        Predictor::Cone => PredictorKind::Cone,
    };
    if let Some(b) = args.budget {
        opts.budget = Budget::Candidates(b);
    }
    Ok((robot, tube, tc, opts))
}

fn run(cli: Cli) -> Result<bool> {
    let dir = cli.out_dir;
    match cli.cmd {
        Command::G { cmd: GCmd::Fit { robot, out, margin, grid, holdout, seed } } => {
            let cfg = load_robot(&robot)?;
            let grid = match grid.as_deref() {
                Some([k, a, s]) => SampleGrid { k_per_axis: *k, n_aux: *a, n_speed: *s },
                _ => SampleGrid::default(),
            };
            let t = Instant::now();
            let g = fit_for_robot(&cfg, &grid, margin, holdout, seed)?;
            let path = output(&dir, &out)?;
            g.save(&path)?;
            println!("fitted {} samples in {:.2?}", g.report.samples, t.elapsed());
            if let Some(h) = &g.report.holdout {
                println!("holdout: {} pairs, {} violations, worst excess {:.4}", h.pairs, h.violations, h.worst_excess);
            }
            println!("wrote {}", path.display());
            Ok(g.report.holdout.as_ref().map_or(true, |h| h.violations == 0))
        }
        Command::Frs { cmd: FrsCmd::Build { robot, g, out, cells, dt } } => {
            let cfg = load_robot(&robot)?;
            let g = match g {
                Some(p) => TrackingErrorBound::load(&p).with_context(|| format!("loading {}", p.display()))?,
                None => fit_for_robot(&cfg, &SampleGrid::default(), DEFAULT_MARGIN, 0, 7)?,
            };
            let t = Instant::now();
            let tube = compute_frs(&cfg, cfg.family.params, &g, FrsOptions { cells: [cells, cells], dt })?;
            let s = tube.summary();
            let path = output(&dir, &out)?;
            tube.save(&path)?;
            println!("built {} cells x {} steps in {:.2?}", s.cells, s.steps, t.elapsed());
            println!("max face speed {:.3} m/s, mean final area {:.3} m^2", s.max_face_speed, s.mean_final_area);
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::Sim { cmd: SimCmd::Run { args, seed, obstacles, trace } } => {
            let (robot, tube, tc, opts) = trial_setup(&args)?;
            let h = Harness::new(&robot, &tube, opts)?;
            let tc = TrialConfig { n_obs: obstacles, seed, ..tc };
            let (r, tr) = h.run_trial(&tc)?;
            let audit = fault_audit(&tr);
            println!("{}", serde_json::to_string_pretty(&r)?);
            println!("audit: {}", audit.label());
            if let Some(p) = trace {
                let path = output(&dir, &p)?;
                tr.save(&path)?;
                println!("wrote {}", path.display());
            }
            Ok(!r.at_fault && audit.is_clean())
        }
        Command::Sim { cmd: SimCmd::Batch { args, trials, counts, out, traces, no_audit } } => {
            let (robot, tube, tc, opts) = trial_setup(&args)?;
            if trials == 0 {
                bail!("--trials must be at least 1");
            }
            let h = Harness::new(&robot, &tube, opts)?;
            let trace_dir = traces.map(|p| output_dir(&dir, &p)).transpose()?;
            let batch = BatchSpec { template: tc, trials_per_count: trials, counts: parse_counts(&counts)?, audit: !no_audit, trace_dir };
            let t = Instant::now();
            let outcome = h.run_batch(&batch)?;
            let results: Vec<_> = outcome.iter().map(|b| b.result.clone()).collect();
            let csv = metrics_table(&results).to_csv();
            let path = output(&dir, &out)?;
            fs::write(&path, &csv)?;
            print!("{csv}");
            let dirty: Vec<_> = outcome.iter().filter(|b| b.audit.as_ref().is_some_and(|a| !a.is_clean())).collect();
            for b in &dirty {
                println!("audit n_obs={} seed={}: {}", b.result.n_obs, b.result.seed, b.audit.as_ref().unwrap().label());
            }
            println!("{} trials in {:.2?}; wrote {}", outcome.len(), t.elapsed(), path.display());
            Ok(dirty.is_empty() && results.iter().all(|r| !r.at_fault))
        }
        Command::Audit { traces } => {
            let mut clean = true;
            for p in traces {
                let tr = TrialTrace::load(&p).with_context(|| format!("loading {}", p.display()))?;
                let v = fault_audit(&tr);
                println!("{}: {}", p.display(), v.label());
                clean &= v.is_clean();
            }
            Ok(clean)
        }
        Command::Cert { cmd: CertCmd::Check { certificate, robot, depth, spot, seed } } => {
            let cfg = load_robot(&robot)?;
            let ctx = CertContext::for_robot(&cfg)?;
            let cert = PolynomialCertificate::parse(&fs::read_to_string(&certificate)?)?;
            let verdict = check_certificate(&cert, &ctx, depth);
            println!("{}", serde_json::to_string(&verdict)?);
            println!("{}", verdict.label());
            if let Verdict::Accept { .. } = verdict {
                let s = spot_check(&cert, &ctx, spot, seed);
                println!("spot check: {} points, {} failures, min value {:.6}", s.points, s.failures, s.min_value);
                return Ok(s.failures == 0);
            }
            Ok(false)
        }
        Command::ExportPlotData { trace, frs, out, kspace, stride } => {
            let tr = TrialTrace::load(&trace).with_context(|| format!("loading {}", trace.display()))?;
            let tube = load_tube(&frs)?;
            let data = export_plot_data(&tr, &tube, ExportOptions { stride, kspace_iteration: kspace, ..Default::default() })?;
            let path = output(&dir, &out)?;
            fs::write(&path, serde_json::to_string(&data)?)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
    }
}

fn main() {
    match run(Cli::parse()) {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
