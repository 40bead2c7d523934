//! Experiment orchestration: measurement sweeps over `(k, sigma)`, clairvoyant
//! selection of `alpha`, CSV results, mask images and a run manifest.

mod manifest;
mod report;
mod seed;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{extract_level_set, Image, LevelSetMask, LevelSpec};
use crate::phantom::{render_phantom, PhantomSpec};
use crate::risk::{excess_risk, threshold_baseline};
use crate::sensing::{measure, proxy_observations, SensingOperator};
use crate::solver::{self, solve, SolverConfig};
use crate::tv::{self, TvFlavor};
use crate::pgm;

pub use manifest::{CellRecord, Manifest};
pub use report::{format_sig, write_results_csv, CSV_COLUMNS};
pub use seed::derive_seed;

/// Distance of the default lower box bound below `gamma`.
pub const DEFAULT_LOWER_OFFSET: f64 = 5.0;
pub const DEFAULT_UPPER: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "tv")]
    Tv,
    #[serde(rename = "proxy-threshold")]
    ProxyThreshold,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Tv => "tv",
            Method::ProxyThreshold => "proxy-threshold",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tv" => Ok(Method::Tv),
            "proxy-threshold" | "proxy" | "threshold" => Ok(Method::ProxyThreshold),
            other => Err(Error::invalid(format!("unknown method {other:?} (expected tv or proxy-threshold)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum ImageSource {
    Phantom { spec: PhantomSpec },
    File { path: PathBuf },
}

impl ImageSource {
    pub fn load(&self) -> Result<Image> {
        match self {
            ImageSource::Phantom { spec } => render_phantom(spec),
            ImageSource::File { path } => pgm::load_image(path),
        }
    }
}

/// Full description of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub image: ImageSource,
    pub gamma: f64,
    /// Box lower bound; `gamma - 5` when absent.
    pub lower: Option<f64>,
    /// Box upper bound; 255 when absent.
    pub upper: Option<f64>,
    pub k_values: Vec<usize>,
    pub sigma_values: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub base_seed: u64,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub flavor: TvFlavor,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub inner_iters: usize,
    pub inner_tol: f64,
    /// When false, `wall_time_ms` is written as 0 so output files are byte-stable.
    pub record_wall_time: bool,
}

/// 12 log-spaced values from 1e-3 to 1e2.
pub fn default_alpha_grid() -> Vec<f64> {
    log_space(1e-3, 1e2, 12)
}

pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

/// `round(frac * p)`, at least 1.
pub fn k_from_fraction(frac: f64, p: usize) -> usize {
    ((frac * p as f64).round() as usize).max(1)
}

impl Default for ExperimentGrid {
    /// Default phantom, `gamma = 70`, `k in {p, p/2, p/4}`, `sigma in {0, 10}`,
    /// both methods, one replicate.
    fn default() -> Self {
        let spec = PhantomSpec::default();
        let p = spec.rows * spec.cols;
        Self {
            image: ImageSource::Phantom { spec },
            gamma: 70.0,
            lower: None,
            upper: None,
            k_values: [1.0, 0.5, 0.25].iter().map(|&f| k_from_fraction(f, p)).collect(),
            sigma_values: vec![0.0, 10.0],
            alpha_grid: default_alpha_grid(),
            base_seed: 2012,
            methods: vec![Method::Tv, Method::ProxyThreshold],
            replicates: 1,
            flavor: TvFlavor::Isotropic,
            max_iters: solver::DEFAULT_MAX_ITERS,
            rel_tol: solver::DEFAULT_REL_TOL,
            inner_iters: tv::DEFAULT_INNER_ITERS,
            inner_tol: tv::DEFAULT_INNER_TOL,
            record_wall_time: true,
        }
    }
}

impl ExperimentGrid {
    pub fn level(&self) -> Result<LevelSpec> {
        LevelSpec::new(
            self.gamma,
            self.lower.unwrap_or(self.gamma - DEFAULT_LOWER_OFFSET),
            self.upper.unwrap_or(DEFAULT_UPPER),
        )
    }

    pub fn solver_config(&self, alpha: f64) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            alpha,
            level: self.level()?,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            inner_iters: self.inner_iters,
            inner_tol: self.inner_tol,
            flavor: self.flavor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that do not need the image.
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods selected"));
        }
        if self.k_values.is_empty() || self.sigma_values.is_empty() {
            return Err(Error::invalid("k and sigma lists must be nonempty"));
        }
        if self.k_values.contains(&0) {
            return Err(Error::invalid("k values must be positive"));
        }
        if let Some(s) = self.sigma_values.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return Err(Error::invalid(format!("sigma values must be finite and nonnegative, got {s}")));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        if self.methods.contains(&Method::Tv) {
            if self.alpha_grid.is_empty() {
                return Err(Error::invalid("alpha grid is empty"));
            }
            if self.alpha_grid.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
                return Err(Error::invalid("alpha grid values must be positive"));
            }
            if self.alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("alpha grid must be strictly ascending"));
            }
            self.solver_config(self.alpha_grid[0])?;
        }
        self.level()?;
        Ok(())
    }

    fn replicate_seed(&self, replicate: usize) -> u64 {
        self.base_seed.wrapping_add(replicate as u64)
    }

    /// Seed of the sensing matrix for `k`; shared across sigma values and methods.
    pub fn operator_seed(&self, k: usize, replicate: usize) -> u64 {
        derive_seed(self.replicate_seed(replicate), k, 0.0, "operator")
    }

    /// Seed of the noise draw for `(k, sigma)`; shared across methods.
    pub fn noise_seed(&self, k: usize, sigma: f64, replicate: usize) -> u64 {
        derive_seed(self.replicate_seed(replicate), k, sigma, "noise")
    }
}

/// Outcome of a single `alpha` on the TV path.
#[derive(Debug, Clone)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub excess_risk: f64,
    pub sym_diff_size: usize,
    pub iterations: usize,
    pub converged: bool,
    pub mask: LevelSetMask,
}

/// One measurement draw of one `(k, sigma, method)` cell.
#[derive(Debug, Clone)]
pub struct GridCellResult {
    pub k: usize,
    pub sigma: f64,
    pub method: Method,
    pub replicate: usize,
    /// Clairvoyant choice; `None` for thresholding.
    pub best_alpha: Option<f64>,
    pub excess_risk: f64,
    pub sym_diff_size: usize,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: u64,
    /// Noise seed of the draw.
    pub seed: u64,
    pub operator_seed: u64,
    pub mask: LevelSetMask,
    /// Per-alpha outcomes in grid order (TV only).
    pub alpha_curve: Vec<AlphaPoint>,
}

/// An image loaded and validated against a grid, ready to run cells.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub grid: ExperimentGrid,
    pub truth: Image,
    pub level: LevelSpec,
}

impl Experiment {
    pub fn new(grid: ExperimentGrid) -> Result<Self> {
        grid.validate()?;
        let truth = grid.image.load()?;
        let p = truth.len();
        if let Some(k) = grid.k_values.iter().find(|&&k| k > p) {
            return Err(Error::invalid(format!("k = {k} exceeds the image dimension p = {p}")));
        }
        let level = grid.level()?;
        Ok(Self { grid, truth, level })
    }

    pub fn p(&self) -> usize {
        self.truth.len()
    }

    pub fn true_mask(&self) -> LevelSetMask {
        extract_level_set(&self.truth, self.level.gamma())
    }

    pub fn operator(&self, k: usize, replicate: usize) -> Result<SensingOperator> {
        SensingOperator::gaussian(k, self.p(), self.grid.operator_seed(k, replicate))
    }

    /// Run one cell on a freshly generated operator.
    pub fn run_cell(&self, k: usize, sigma: f64, method: Method, replicate: usize) -> Result<GridCellResult> {
        let op = self.operator(k, replicate)?;
        self.run_cell_with(&op, sigma, method, replicate)
    }

    /// Run one cell against a given operator (so methods can share it).
    pub fn run_cell_with(
        &self,
        op: &SensingOperator,
        sigma: f64,
        method: Method,
        replicate: usize,
    ) -> Result<GridCellResult> {
        let started = Instant::now();
        let k = op.k();
        let gamma = self.level.gamma();
        let (rows, cols) = (self.truth.rows(), self.truth.cols());
        let seed = self.grid.noise_seed(k, sigma, replicate);
        let meas = measure(op, self.truth.pixels(), sigma, seed)?;

        let (best_alpha, best, alpha_curve) = match method {
            Method::ProxyThreshold => {
                let z = proxy_observations(op, &meas)?;
                let mask = threshold_baseline(&z, rows, cols, gamma)?;
                let point = self.score(None, mask, 0, true)?;
                (None, point, Vec::new())
            }
            Method::Tv => {
                op.lipschitz();
                let curve = self
                    .grid
                    .alpha_grid
                    .par_iter()
                    .map(|&alpha| {
                        let cfg = self.grid.solver_config(alpha)?;
                        let res = solve(op, &meas, (rows, cols), &cfg)?;
                        let mask = extract_level_set(&res.estimate, gamma);
                        self.score(Some(alpha), mask, res.iterations, res.converged)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let best = argmin(curve.iter().map(|pt| pt.excess_risk));
                (Some(curve[best].alpha), curve[best].clone(), curve)
            }
        };

        let wall_time_ms = if self.grid.record_wall_time {
            started.elapsed().as_millis() as u64
        } else {
            0
        };
        Ok(GridCellResult {
            k,
            sigma,
            method,
            replicate,
            best_alpha,
            excess_risk: best.excess_risk,
            sym_diff_size: best.sym_diff_size,
            iterations: best.iterations,
            converged: best.converged,
            wall_time_ms,
            seed,
            operator_seed: op.seed(),
            mask: best.mask,
            alpha_curve,
        })
    }

    fn score(&self, alpha: Option<f64>, mask: LevelSetMask, iterations: usize, converged: bool) -> Result<AlphaPoint> {
        let risk = excess_risk(&self.truth, self.level.gamma(), &mask)?;
        let sym = crate::image::symmetric_difference(&self.true_mask(), &mask)?.count();
        Ok(AlphaPoint {
            alpha: alpha.unwrap_or(f64::NAN),
            excess_risk: risk,
            sym_diff_size: sym,
            iterations,
            converged,
            mask,
        })
    }
}

/// First index of the minimum value.
fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Single-draw cell run straight from a grid.
pub fn run_cell(grid: &ExperimentGrid, k: usize, sigma: f64, method: Method) -> Result<GridCellResult> {
    Experiment::new(grid.clone())?.run_cell(k, sigma, method, 0)
}

/// One row of `results.csv`: a cell aggregated over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub k: usize,
    pub sigma: f64,
    pub method: Method,
    pub alpha: Option<f64>,
    /// `None` when the cell failed.
    pub excess_risk: Option<f64>,
    pub sym_diff_size: Option<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: u64,
    pub seed: u64,
}

impl ResultRow {
    fn from_draw(r: &GridCellResult) -> Self {
        Self {
            k: r.k,
            sigma: r.sigma,
            method: r.method,
            alpha: r.best_alpha,
            excess_risk: Some(r.excess_risk),
            sym_diff_size: Some(r.sym_diff_size),
            iterations: r.iterations,
            converged: r.converged,
            wall_time_ms: r.wall_time_ms,
            seed: r.seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<(usize, f64, Method, String)>,
    pub manifest: Manifest,
}

impl SweepReport {
    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// File name of the estimated mask for a cell.
pub fn mask_file_name(method: Method, k: usize, sigma: f64) -> String {
    format!("mask_{}_k{}_sigma{}.pgm", method.label(), k, format_sig(sigma))
}

pub const RESULTS_FILE: &str = "results.csv";
pub const REPLICATES_FILE: &str = "replicates.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRUTH_FILE: &str = "truth.pgm";
pub const TRUTH_MASK_FILE: &str = "truth_mask.pgm";

/// Run every cell of the grid and write results into `output_dir`.
///
/// Cells run in parallel; rows are written in grid order (k, then sigma,
/// then method). Cell failures are recorded and do not stop the sweep.
pub fn run_grid(grid: &ExperimentGrid, output_dir: &Path) -> Result<SweepReport> {
    let exp = Experiment::new(grid.clone())?;
    std::fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;

    let jobs: Vec<(usize, f64, usize)> = grid
        .k_values
        .iter()
        .flat_map(|&k| {
            grid.sigma_values
                .iter()
                .flat_map(move |&sigma| (0..grid.replicates).map(move |r| (k, sigma, r)))
        })
        .collect();

    // Methods share the operator and noise draw of their cell.
    let draws: Vec<Vec<Result<GridCellResult>>> = jobs
        .par_iter()
        .map(|&(k, sigma, r)| match exp.operator(k, r) {
            Ok(op) => grid
                .methods
                .iter()
                .map(|&m| exp.run_cell_with(&op, sigma, m, r))
                .collect(),
            Err(e) => grid.methods.iter().map(|_| Err(Error::invalid(e.to_string()))).collect(),
        })
        .collect();

    let mut rows = Vec::new();
    let mut replicate_rows = Vec::new();
    let mut failures = Vec::new();
    let mut cells = Vec::new();
    let mut mask_files = Vec::new();

    let per_cell = grid.replicates;
    for (jobs_chunk, draws_chunk) in jobs.chunks(per_cell).zip(draws.chunks(per_cell)) {
        let (k, sigma, _) = jobs_chunk[0];
        for (m_idx, &method) in grid.methods.iter().enumerate() {
            let outcomes: Vec<&Result<GridCellResult>> = draws_chunk.iter().map(|d| &d[m_idx]).collect();
            for (r, outcome) in outcomes.iter().enumerate() {
                cells.push(CellRecord {
                    k,
                    sigma,
                    method,
                    replicate: r,
                    operator_seed: grid.operator_seed(k, r),
                    noise_seed: grid.noise_seed(k, sigma, r),
                    error: outcome.as_ref().err().map(|e| e.to_string()),
                });
                if let Ok(draw) = outcome {
                    replicate_rows.push(ResultRow::from_draw(draw));
                }
            }
            let ok: Vec<&GridCellResult> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
            if ok.len() != outcomes.len() {
                let msg = outcomes
                    .iter()
                    .find_map(|o| o.as_ref().err().map(|e| e.to_string()))
                    .unwrap_or_default();
                failures.push((k, sigma, method, msg));
                rows.push(ResultRow {
                    k,
                    sigma,
                    method,
                    alpha: None,
                    excess_risk: None,
                    sym_diff_size: None,
                    iterations: 0,
                    converged: false,
                    wall_time_ms: 0,
                    seed: grid.noise_seed(k, sigma, 0),
                });
                continue;
            }
            let (row, mask) = aggregate(&ok);
            let name = mask_file_name(method, k, sigma);
            pgm::save_mask(&mask, &output_dir.join(&name))?;
            mask_files.push(name);
            rows.push(row);
        }
    }

    pgm::save_image(&exp.truth, &output_dir.join(TRUTH_FILE))?;
    pgm::save_mask(&exp.true_mask(), &output_dir.join(TRUTH_MASK_FILE))?;
    write_results_csv(&output_dir.join(RESULTS_FILE), &rows)?;
    let mut results_files = vec![RESULTS_FILE.to_string()];
    if grid.replicates > 1 {
        write_results_csv(&output_dir.join(REPLICATES_FILE), &replicate_rows)?;
        results_files.push(REPLICATES_FILE.to_string());
    }

    let manifest = Manifest::new(
        grid.clone(),
        (exp.truth.rows(), exp.truth.cols()),
        exp.level,
        cells,
        results_files,
        mask_files,
    );
    manifest.save(&output_dir.join(MANIFEST_FILE))?;

    Ok(SweepReport {
        rows,
        failures,
        manifest,
    })
}

/// Combine replicate draws of one cell. For TV the clairvoyant alpha
/// minimizes the replicate-averaged risk curve. Returns the row and the
/// first replicate's mask at the chosen alpha.
fn aggregate(draws: &[&GridCellResult]) -> (ResultRow, LevelSetMask) {
    let first = draws[0];
    let n = draws.len() as f64;
    let wall_time_ms = draws.iter().map(|d| d.wall_time_ms).sum();
    let mean_round = |it: &mut dyn Iterator<Item = usize>| (it.map(|v| v as f64).sum::<f64>() / n).round() as usize;

    match first.method {
        Method::ProxyThreshold => {
            let row = ResultRow {
                k: first.k,
                sigma: first.sigma,
                method: first.method,
                alpha: None,
                excess_risk: Some(draws.iter().map(|d| d.excess_risk).sum::<f64>() / n),
                sym_diff_size: Some(mean_round(&mut draws.iter().map(|d| d.sym_diff_size))),
                iterations: 0,
                converged: true,
                wall_time_ms,
                seed: first.seed,
            };
            (row, first.mask.clone())
        }
        Method::Tv => {
            let len = first.alpha_curve.len();
            let mean_curve: Vec<f64> = (0..len)
                .map(|i| draws.iter().map(|d| d.alpha_curve[i].excess_risk).sum::<f64>() / n)
                .collect();
            let best = argmin(mean_curve.iter().copied());
            let row = ResultRow {
                k: first.k,
                sigma: first.sigma,
                method: first.method,
                alpha: Some(first.alpha_curve[best].alpha),
                excess_risk: Some(mean_curve[best]),
                sym_diff_size: Some(mean_round(&mut draws.iter().map(|d| d.alpha_curve[best].sym_diff_size))),
                iterations: mean_round(&mut draws.iter().map(|d| d.alpha_curve[best].iterations)),
                converged: draws.iter().all(|d| d.alpha_curve[best].converged),
                wall_time_ms,
                seed: first.seed,
            };
            (row, first.alpha_curve[best].mask.clone())
        }
    }
}
