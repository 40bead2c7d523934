//! Accelerated proximal-gradient solver for the box-constrained TV problem
//!
//! ```text
//! minimize 0.5 * ||A z - y||^2 + alpha * TV(Z)   subject to  lower <= z_i <= upper
//! ```
//!
//! Each iteration takes a gradient step at the extrapolated point, applies the
//! TV prox with multiplier `alpha * rho`, clamps to the box, and updates the
//! momentum sequence. The prox and the box projection are applied one after
//! the other, not as a joint prox.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::image::{Image, LevelSpec};
use crate::sensing::{norm, LinearOperator, MeasurementSet};
use crate::tv::{self, tv_norm, tv_prox, TvFlavor};

pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub level: LevelSpec,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub inner_iters: usize,
    pub inner_tol: f64,
    pub flavor: TvFlavor,
}

impl SolverConfig {
    pub fn new(alpha: f64, level: LevelSpec) -> Self {
        Self {
            alpha,
            level,
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
            inner_iters: tv::DEFAULT_INNER_ITERS,
            inner_tol: tv::DEFAULT_INNER_TOL,
            flavor: TvFlavor::Isotropic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !(self.inner_tol >= 0.0) {
            return Err(Error::invalid(format!("inner_tol must be nonnegative, got {}", self.inner_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub estimate: Image,
    pub iterations: usize,
    /// `0.5 * ||A x^k - y||^2 + alpha * TV(X^k)` after every iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub final_rel_change: f64,
    /// Step size `1 / L` used.
    pub step: f64,
}

/// `r - rho * A^T (A r - y)`
pub fn gradient_step<O: LinearOperator + ?Sized>(op: &O, y: &[f64], r: &[f64], rho: f64) -> Result<Vec<f64>> {
    check_len(op.cols(), r.len(), "gradient point")?;
    check_len(op.rows(), y.len(), "observations")?;
    let mut residual = vec![0.0; op.rows()];
    op.apply(r, &mut residual);
    for (ri, yi) in residual.iter_mut().zip(y) {
        *ri -= yi;
    }
    let mut out = vec![0.0; op.cols()];
    op.apply_adjoint(&residual, &mut out);
    for (o, ri) in out.iter_mut().zip(r) {
        *o = ri - rho * *o;
    }
    Ok(out)
}

/// Elementwise clamp to `[lower, upper]`.
pub fn project_box(v: &[f64], lower: f64, upper: f64) -> Result<Vec<f64>> {
    if !(lower < upper) {
        return Err(Error::invalid(format!("box lower bound {lower} must be below upper bound {upper}")));
    }
    Ok(v.iter().map(|x| x.clamp(lower, upper)).collect())
}

pub fn momentum_update(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}

/// Data fit plus TV penalty at `x` (the box indicator is not included).
pub fn objective<O: LinearOperator + ?Sized>(
    op: &O,
    y: &[f64],
    x: &Image,
    alpha: f64,
    flavor: TvFlavor,
) -> Result<f64> {
    check_len(op.cols(), x.len(), "objective point")?;
    check_len(op.rows(), y.len(), "observations")?;
    let mut ax = vec![0.0; op.rows()];
    op.apply(x.pixels(), &mut ax);
    Ok(data_fit(&ax, y) + alpha * tv_norm(x, flavor))
}

fn data_fit(ax: &[f64], y: &[f64]) -> f64 {
    0.5 * ax.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// One full proximal-gradient map applied at `x`.
pub fn prox_gradient_map<O: LinearOperator + ?Sized>(
    op: &O,
    y: &[f64],
    x: &Image,
    rho: f64,
    cfg: &SolverConfig,
) -> Result<Image> {
    let xg = gradient_step(op, y, x.pixels(), rho)?;
    let xg = Image::new(x.rows(), x.cols(), xg)?;
    let prox = tv_prox(&xg, cfg.alpha * rho, cfg.flavor, cfg.inner_iters, cfg.inner_tol)?;
    let projected = project_box(prox.pixels(), cfg.level.lower(), cfg.level.upper())?;
    Image::new(x.rows(), x.cols(), projected)
}

/// `||x - T(x)|| / max(1, ||x||)` for the proximal-gradient map `T`; zero at a fixed point.
pub fn fixed_point_residual<O: LinearOperator + ?Sized>(
    op: &O,
    y: &[f64],
    x: &Image,
    rho: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    let mapped = prox_gradient_map(op, y, x, rho, cfg)?;
    let diff: f64 = x
        .pixels()
        .iter()
        .zip(mapped.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm(x.pixels()).max(1.0))
}

/// Solve the box-constrained TV problem for an image of shape `rows x cols`.
///
/// Starts from `x^0 = r^1 = 0`, `t^1 = 1` and stops once
/// `||x^k - x^{k-1}|| / max(1, ||x^{k-1}||) < rel_tol` or after `max_iters`.
pub fn solve<O: LinearOperator + ?Sized>(
    op: &O,
    meas: &MeasurementSet,
    shape: (usize, usize),
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    cfg.validate()?;
    let (rows, cols) = shape;
    let (k, p) = (op.rows(), op.cols());
    check_len(p, rows * cols, "image shape vs operator columns")?;
    check_len(k, meas.y.len(), "measurement length")?;
    let y = &meas.y;

    let lipschitz = op.lipschitz_bound();
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(Error::invalid(format!("operator Lipschitz bound must be positive, got {lipschitz}")));
    }
    let rho = 1.0 / lipschitz;
    let (lower, upper) = (cfg.level.lower(), cfg.level.upper());

    let mut x_prev = vec![0.0; p];
    let mut ax_prev = vec![0.0; k];
    let mut r = vec![0.0; p];
    let mut ar = vec![0.0; k];
    let mut t = 1.0;

    let mut residual = vec![0.0; k];
    let mut grad = vec![0.0; p];
    let mut ax = vec![0.0; k];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut rel_change = f64::INFINITY;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iters {
        iterations = iter;

        for ((res, a), yi) in residual.iter_mut().zip(&ar).zip(y) {
            *res = a - yi;
        }
        op.apply_adjoint(&residual, &mut grad);
        let xg: Vec<f64> = r.iter().zip(&grad).map(|(ri, gi)| ri - rho * gi).collect();
        if let Some(idx) = xg.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                iteration: iter,
                detail: format!("gradient step produced a non-finite value at pixel {idx}"),
            });
        }

        let xg = Image::new(rows, cols, xg)?;
        let prox = tv_prox(&xg, cfg.alpha * rho, cfg.flavor, cfg.inner_iters, cfg.inner_tol).map_err(|e| {
            Error::Numerical {
                iteration: iter,
                detail: format!("TV prox failed: {e}"),
            }
        })?;
        let x = project_box(prox.pixels(), lower, upper)?;
        debug_assert!(x.iter().all(|v| (lower..=upper).contains(v)));

        op.apply(&x, &mut ax);
        let x_img = Image::new(rows, cols, x)?;
        let value = data_fit(&ax, y) + cfg.alpha * tv_norm(&x_img, cfg.flavor);
        if !value.is_finite() {
            return Err(Error::Numerical {
                iteration: iter,
                detail: format!("objective became {value}"),
            });
        }
        trace.push(value);
        let x = x_img.into_pixels();

        let step_norm = x.iter().zip(&x_prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        rel_change = step_norm / norm(&x_prev).max(1.0);

        let t_next = momentum_update(t);
        let beta = (t - 1.0) / t_next;
        for ((ri, xi), xp) in r.iter_mut().zip(&x).zip(&x_prev) {
            *ri = xi + beta * (xi - xp);
        }
        // A r^{k+1} follows from A x^k and A x^{k-1} by linearity.
        for ((ari, axi), axp) in ar.iter_mut().zip(&ax).zip(&ax_prev) {
            *ari = axi + beta * (axi - axp);
        }
        x_prev = x;
        std::mem::swap(&mut ax_prev, &mut ax);
        t = t_next;

        if rel_change < cfg.rel_tol {
            converged = true;
            break;
        }
    }

    Ok(SolverResult {
        estimate: Image::new(rows, cols, x_prev)?,
        iterations,
        objective_trace: trace,
        converged,
        final_rel_change: rel_change,
        step: rho,
    })
}
