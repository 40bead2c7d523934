//! `levelset`: level-set estimation from compressive measurements.
//!
//! Exit status is 0 on success, 1 on invalid input or I/O failure and 2 when
//! a sweep finished with failed cells.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use levelset::harness::{self, k_from_fraction, ExperimentGrid, ImageSource, Manifest, Method};
use levelset::phantom::{render_phantom, PhantomSpec};
use levelset::risk::{evaluate, threshold_baseline, RiskParams};
use levelset::sensing::{measure, proxy_observations};
use levelset::{extract_level_set, pgm, solve, LevelSpec, MeasurementSet, SensingOperator, SolverConfig, TvFlavor};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "levelset", version, about = "Level-set estimation from compressive measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a phantom (the default one unless --spec is given) to PGM.
    Phantom {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a Gaussian operator and noisy measurements of an image.
    Sense(SenseArgs),
    /// Solve the box-constrained TV problem for one set of measurements.
    Solve(SolveArgs),
    /// Threshold the proxy observations A^T y.
    Baseline {
        #[command(flatten)]
        input: MeasuredInput,
        #[arg(long, default_value_t = 70.0)]
        gamma: f64,
        /// Output mask PGM.
        #[arg(long)]
        out: PathBuf,
    },
    /// Excess and empirical risk of a mask against a truth image.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = 70.0)]
        gamma: f64,
        #[arg(long, default_value = "estimate")]
        label: String,
    },
    /// Run a full (k, sigma, method) grid.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ImageInput {
    /// PGM image; the default phantom when omitted.
    #[arg(long, conflicts_with = "phantom")]
    image: Option<PathBuf>,
    /// Phantom spec (JSON).
    #[arg(long)]
    phantom: Option<PathBuf>,
}

impl ImageInput {
    fn source(&self) -> anyhow::Result<ImageSource> {
        Ok(match (&self.image, &self.phantom) {
            (Some(path), _) => ImageSource::File { path: path.clone() },
            (None, Some(spec)) => ImageSource::Phantom {
                spec: PhantomSpec::load(spec)?,
            },
            (None, None) => ImageSource::Phantom {
                spec: PhantomSpec::default(),
            },
        })
    }
}

#[derive(Args)]
struct SenseArgs {
    #[command(flatten)]
    image: ImageInput,
    /// Number of measurements.
    #[arg(long, conflicts_with = "k_frac")]
    k: Option<usize>,
    /// Number of measurements as a fraction of the pixel count.
    #[arg(long, default_value_t = 0.5)]
    k_frac: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Operator seed; the noise seed is derived from it.
    #[arg(long, default_value_t = 2012)]
    seed: u64,
    /// Output directory for operator.bin and measurements.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MeasuredInput {
    #[arg(long)]
    operator: PathBuf,
    #[arg(long)]
    measurements: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: MeasuredInput,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 70.0)]
    gamma: f64,
    /// Box lower bound [default: gamma - 5].
    #[arg(long)]
    lower: Option<f64>,
    #[arg(long, default_value_t = harness::DEFAULT_UPPER)]
    upper: f64,
    #[arg(long, default_value_t = levelset::solver::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = levelset::solver::DEFAULT_REL_TOL)]
    rel_tol: f64,
    #[arg(long, default_value = "iso")]
    tv: TvFlavor,
    /// Estimated image PGM (rounded to 8 bits).
    #[arg(long)]
    out: PathBuf,
    /// Level-set mask PGM of the estimate.
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Re-run the grid recorded in a manifest; other grid flags are ignored.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    image: ImageInput,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.5, 0.25])]
    k_fracs: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 10.0])]
    sigmas: Vec<f64>,
    /// Alpha grid [default: 12 log-spaced values in 1e-3..1e2].
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 70.0)]
    gamma: f64,
    #[arg(long)]
    lower: Option<f64>,
    #[arg(long)]
    upper: Option<f64>,
    #[arg(long, default_value_t = 2012)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [Method::Tv, Method::ProxyThreshold])]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    #[arg(long, default_value = "iso")]
    tv: TvFlavor,
    #[arg(long, default_value_t = levelset::solver::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = levelset::solver::DEFAULT_REL_TOL)]
    rel_tol: f64,
    /// Write wall_time_ms as 0 so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out: PathBuf,
}

/// Contents of measurements.json.
#[derive(Serialize, Deserialize)]
struct SensedData {
    rows: usize,
    cols: usize,
    measurements: MeasurementSet,
}

const OPERATOR_FILE: &str = "operator.bin";
const MEASUREMENTS_FILE: &str = "measurements.json";

fn load_measured(input: &MeasuredInput) -> anyhow::Result<(SensingOperator, SensedData)> {
    let op = SensingOperator::load(&input.operator)?;
    let text = std::fs::read_to_string(&input.measurements)
        .with_context(|| format!("reading {}", input.measurements.display()))?;
    let data: SensedData = serde_json::from_str(&text).context("parsing measurements")?;
    if data.rows * data.cols != op.p() || data.measurements.y.len() != op.k() {
        bail!(
            "measurements ({}x{} image, {} values) do not match the {}x{} operator",
            data.rows,
            data.cols,
            data.measurements.y.len(),
            op.k(),
            op.p()
        );
    }
    Ok((op, data))
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn sense(args: &SenseArgs) -> anyhow::Result<()> {
    let img = args.image.source()?.load()?;
    let p = img.len();
    let k = args.k.unwrap_or_else(|| k_from_fraction(args.k_frac, p));
    if k == 0 || k > p {
        bail!("k = {k} must lie in 1..={p}");
    }
    let op = SensingOperator::gaussian(k, p, args.seed)?;
    let noise_seed = harness::derive_seed(args.seed, k, args.sigma, "noise");
    let meas = measure(&op, img.pixels(), args.sigma, noise_seed)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    op.save(&args.out.join(OPERATOR_FILE))?;
    let data = SensedData {
        rows: img.rows(),
        cols: img.cols(),
        measurements: meas,
    };
    write_json(&args.out.join(MEASUREMENTS_FILE), &data)?;
    println!("wrote {k}x{p} operator and measurements to {}", args.out.display());
    Ok(())
}

fn solve_cmd(args: &SolveArgs) -> anyhow::Result<()> {
    let (op, data) = load_measured(&args.input)?;
    let level = LevelSpec::new(
        args.gamma,
        args.lower.unwrap_or(args.gamma - harness::DEFAULT_LOWER_OFFSET),
        args.upper,
    )?;
    let cfg = SolverConfig {
        max_iters: args.max_iters,
        rel_tol: args.rel_tol,
        flavor: args.tv,
        ..SolverConfig::new(args.alpha, level)
    };
    let res = solve(&op, &data.measurements, (data.rows, data.cols), &cfg)?;
    pgm::save_image(&res.estimate, &args.out)?;
    if let Some(path) = &args.mask_out {
        pgm::save_mask(&extract_level_set(&res.estimate, args.gamma), path)?;
    }
    let summary = serde_json::json!({
        "iterations": res.iterations,
        "converged": res.converged,
        "final_rel_change": res.final_rel_change,
        "objective": res.objective_trace.last(),
        "step": res.step,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn sweep(args: &SweepArgs) -> anyhow::Result<bool> {
    let grid = match &args.manifest {
        Some(path) => Manifest::load(path)?.grid,
        None => {
            let image = args.image.source()?;
            let p = image.load()?.len();
            ExperimentGrid {
                image,
                gamma: args.gamma,
                lower: args.lower,
                upper: args.upper,
                k_values: args.k_fracs.iter().map(|&f| k_from_fraction(f, p)).collect(),
                sigma_values: args.sigmas.clone(),
                alpha_grid: args.alphas.clone().unwrap_or_else(harness::default_alpha_grid),
                base_seed: args.seed,
                methods: args.methods.clone(),
                replicates: args.replicates,
                flavor: args.tv,
                max_iters: args.max_iters,
                rel_tol: args.rel_tol,
                record_wall_time: !args.no_timing,
                ..ExperimentGrid::default()
            }
        }
    };
    let report = harness::run_grid(&grid, &args.out)?;
    for (k, sigma, method, msg) in &report.failures {
        eprintln!("cell k={k} sigma={sigma} method={method} failed: {msg}");
    }
    println!(
        "{} rows written to {}",
        report.rows.len(),
        args.out.join(harness::RESULTS_FILE).display()
    );
    Ok(!report.has_failures())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Phantom { spec, out } => {
            let spec = match spec {
                Some(path) => PhantomSpec::load(&path)?,
                None => PhantomSpec::default(),
            };
            pgm::save_image(&render_phantom(&spec)?, &out)?;
        }
        Command::Sense(args) => sense(&args)?,
        Command::Solve(args) => solve_cmd(&args)?,
        Command::Baseline { input, gamma, out } => {
            let (op, data) = load_measured(&input)?;
            let z = proxy_observations(&op, &data.measurements)?;
            pgm::save_mask(&threshold_baseline(&z, data.rows, data.cols, gamma)?, &out)?;
        }
        Command::Evaluate {
            truth,
            mask,
            gamma,
            label,
        } => {
            let truth = pgm::load_image(&truth)?;
            let mask = pgm::load_mask(&mask)?;
            let params = RiskParams {
                k: 0,
                sigma: 0.0,
                alpha: None,
                gamma,
                seed: 0,
            };
            let report = evaluate(&truth, gamma, &mask, &label, params)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Sweep(args) => return sweep(&args),
    }
    Ok(true)
}

fn main() -> ExitCode {
    // clap's own usage-error status (2) would collide with "partial failure".
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
