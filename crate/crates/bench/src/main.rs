use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cavity_bench::commands::{
    available_cores, cmd_bench, cmd_solve, cmd_verify, format_table, read_csv, write_bench_outputs, write_plots,
    BenchPlan, VERIFY_TOL,
};
use cavity_bench::config::{GridSize, RunConfig};
use cavity_core::decomp::{DecompMode, Dims, GrowthType};
use cavity_core::halo::Strategy;
use cavity_core::metrics::Scaling;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cavity", version, about = "Domain-decomposed buoyancy-driven cavity solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// March one configuration to convergence or the step limit.
    Solve(RunArgs),
    /// Compare a decomposed run against the single-rank reference.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Largest accepted relative interior difference.
        #[arg(long, default_value_t = VERIFY_TOL)]
        tolerance: f64,
    },
    /// Strong or weak scaling sweep; writes bench.csv and SVG plots.
    Bench(BenchArgs),
    /// Print a bench CSV as a table and redraw its plots.
    Report {
        csv: PathBuf,
        /// Directory for the SVG plots; defaults to the CSV's directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        log: bool,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Flat key = value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    np: Option<usize>,
    /// Explicit process grid PIxPJxPK.
    #[arg(long)]
    dims: Option<Dims>,
    /// 1d-i, 1d-j, 1d-k, 2d or 3d.
    #[arg(long)]
    mode: Option<DecompMode>,
    /// baseline, v1, v2 or v3.
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    overlap: bool,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    growth: Option<u8>,
    /// N or NXxNYxNZ interior nodes.
    #[arg(long)]
    grid: Option<GridSize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print relative residuals every this many iterations.
    #[arg(long)]
    progress: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalingArg {
    Strong,
    Weak,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "strong")]
    scaling: ScalingArg,
    /// Comma-separated rank counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    np: Vec<usize>,
    #[arg(long = "strategy", value_delimiter = ',', default_value = "baseline,v1,v2,v3")]
    strategies: Vec<Strategy>,
    #[arg(long = "mode", value_delimiter = ',', default_value = "3d")]
    modes: Vec<DecompMode>,
    /// Also run every point with overlap enabled.
    #[arg(long)]
    overlap: bool,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    growth: u8,
    /// Total grid (strong) or per-rank base grid (weak).
    #[arg(long, default_value = "32")]
    grid: GridSize,
    /// Timed iterations per point.
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Log-scale plot axes.
    #[arg(long)]
    log: bool,
}

fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var("CAVITY_SEED") {
        Ok(s) => Ok(Some(s.trim().parse().with_context(|| format!("CAVITY_SEED={s:?} is not an integer"))?)),
        Err(_) => Ok(None),
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        cfg.apply_text(&text).with_context(|| format!("in {}", p.display()))?;
    }
    if cfg.seed.is_none() {
        cfg.seed = seed_from_env()?;
    }
    Ok(cfg)
}

fn build_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = load_config(a.config.as_ref())?;
    if let Some(v) = a.np {
        cfg.np = Some(v);
    }
    if let Some(v) = a.dims {
        cfg.dims = Some(v);
    }
    if let Some(v) = a.mode {
        cfg.mode = v;
    }
    if let Some(v) = a.strategy {
        cfg.strategy = v;
    }
    cfg.overlap |= a.overlap;
    if let Some(v) = a.growth {
        cfg.growth = GrowthType::from_number(v).expect("range-checked by clap");
    }
    if let Some(v) = a.grid {
        cfg.grid = v;
    }
    if let Some(v) = a.steps {
        cfg.steps = v;
    }
    if let Some(v) = &a.out {
        cfg.out = Some(v.clone());
    }
    Ok(cfg)
}

fn warn_oversubscribed(np: usize) {
    let cores = available_cores();
    if np > cores {
        eprintln!("warning: {np} ranks on {cores} schedulable cores; timings are oversubscribed");
    }
}

fn solve(a: &RunArgs) -> Result<()> {
    let cfg = build_config(a)?;
    warn_oversubscribed(cfg.resolve_dims()?.ranks());
    let res = cmd_solve(&cfg, a.progress)?;
    let o = &res.outcome;
    let last = o.history.last();
    println!("grid {} dims {} strategy {} overlap {}", cfg.grid, res.record.dims, cfg.strategy, cfg.overlap);
    println!("steps {} converged {} wall {:.4} s", o.steps, o.converged, o.wall_time);
    if let Some(h) = last {
        println!("final residual norms p {:.3e} u {:.3e} v {:.3e} w {:.3e} T {:.3e}", h.norms[0], h.norms[1], h.norms[2], h.norms[3], h.norms[4]);
    }
    match res.record.ssspnt {
        Some(s) => println!("ssspnt {s:.6e}  bytes/iter {}", res.record.bytes_sent),
        None => println!("ssspnt -  bytes/iter {}", res.record.bytes_sent),
    }
    if let Some(p) = &res.dump {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn verify(a: &RunArgs, tolerance: f64) -> Result<bool> {
    let test = build_config(a)?;
    let mut reference = test.clone();
    reference.np = Some(1);
    reference.dims = None;
    reference.strategy = Strategy::Baseline;
    reference.overlap = false;
    warn_oversubscribed(test.resolve_dims()?.ranks());
    let report = cmd_verify(&reference, &test, tolerance)?;
    println!("reference 1x1x1 vs {} {} overlap {}", test.resolve_dims()?, test.strategy, test.overlap);
    println!("{report}");
    Ok(report.pass)
}

fn bench(a: &BenchArgs) -> Result<()> {
    let base = load_config(a.config.as_ref())?;
    let plan = BenchPlan {
        scaling: match a.scaling {
            ScalingArg::Strong => Scaling::Strong,
            ScalingArg::Weak => Scaling::Weak,
        },
        grid: a.grid,
        nps: a.np.clone(),
        strategies: a.strategies.clone(),
        modes: a.modes.clone(),
        overlaps: if a.overlap { vec![false, true] } else { vec![false] },
        growth: GrowthType::from_number(a.growth).expect("range-checked by clap"),
        steps: a.steps,
        base,
    };
    if plan.nps.is_empty() {
        bail!("--np needs at least one rank count");
    }
    warn_oversubscribed(*plan.nps.iter().max().expect("non-empty"));
    let points = cmd_bench(&plan);
    for p in &points {
        if let Err(e) = &p.result {
            eprintln!("point np={} {} {} overlap={} failed: {e}", p.np, p.mode, p.strategy, p.overlap);
        }
    }
    let rows = write_bench_outputs(&a.out, &points, a.log)?;
    print!("{}", format_table(&rows));
    println!("wrote {}", a.out.join("bench.csv").display());
    Ok(())
}

fn report(csv: &Path, out: Option<&PathBuf>, log: bool) -> Result<()> {
    let rows = read_csv(csv)?;
    print!("{}", format_table(&rows));
    let dir = out.cloned().unwrap_or_else(|| csv.parent().map(PathBuf::from).unwrap_or_default());
    std::fs::create_dir_all(&dir)?;
    write_plots(&dir, &rows, log)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => solve(a).map(|_| true),
        Command::Verify { run, tolerance } => verify(run, *tolerance),
        Command::Bench(a) => bench(a).map(|_| true),
        Command::Report { csv, out, log } => report(csv, out.as_ref(), *log).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
