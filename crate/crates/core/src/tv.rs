//! Discrete total variation and its proximal operator.
//!
//! Differences are taken forward with the convention `X[i,j] - X[i+1,j]`
//! (vertical) and `X[i,j] - X[i,j+1]` (horizontal). The isotropic seminorm
//! pairs the two differences at every pixel that has both; pixels in the last
//! column only have a vertical difference and pixels in the last row only a
//! horizontal one, and those enter as plain absolute values.
//!
//! The prox is computed by fast gradient projection on the dual problem.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::image::Image;

pub const DEFAULT_INNER_ITERS: usize = 50;
pub const DEFAULT_INNER_TOL: f64 = 1e-5;

/// Squared operator-norm bound of the 2-D difference operator.
const DIFF_NORM_SQ: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TvFlavor {
    #[default]
    Isotropic,
    Anisotropic,
}

impl std::str::FromStr for TvFlavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iso" | "isotropic" => Ok(TvFlavor::Isotropic),
            "aniso" | "anisotropic" => Ok(TvFlavor::Anisotropic),
            other => Err(Error::invalid(format!("unknown TV flavor {other:?} (expected iso or aniso)"))),
        }
    }
}

impl std::fmt::Display for TvFlavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TvFlavor::Isotropic => "iso",
            TvFlavor::Anisotropic => "aniso",
        })
    }
}

/// Pair of fields living on the vertical and horizontal difference grids of
/// an `rows x cols` image: `vertical` is `(rows-1) x cols`, `horizontal` is
/// `rows x (cols-1)`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField {
    rows: usize,
    cols: usize,
    vertical: Vec<f64>,
    horizontal: Vec<f64>,
}

impl DualField {
    pub fn new(rows: usize, cols: usize, vertical: Vec<f64>, horizontal: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!("dual field for empty image {rows}x{cols}")));
        }
        check_len((rows - 1) * cols, vertical.len(), "vertical dual field")?;
        check_len(rows * (cols - 1), horizontal.len(), "horizontal dual field")?;
        Ok(Self {
            rows,
            cols,
            vertical,
            horizontal,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            vertical: vec![0.0; rows.saturating_sub(1) * cols],
            horizontal: vec![0.0; rows * cols.saturating_sub(1)],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn vertical(&self) -> &[f64] {
        &self.vertical
    }

    pub fn horizontal(&self) -> &[f64] {
        &self.horizontal
    }

    pub fn dot(&self, other: &DualField) -> f64 {
        let v: f64 = self.vertical.iter().zip(&other.vertical).map(|(a, b)| a * b).sum();
        let h: f64 = self.horizontal.iter().zip(&other.horizontal).map(|(a, b)| a * b).sum();
        v + h
    }

    fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Whether the field lies in the dual unit ball of `flavor` (with slack `tol`).
    pub fn is_feasible(&self, flavor: TvFlavor, tol: f64) -> bool {
        let (m, n) = (self.rows, self.cols);
        match flavor {
            TvFlavor::Anisotropic => self.vertical.iter().chain(&self.horizontal).all(|v| v.abs() <= 1.0 + tol),
            TvFlavor::Isotropic => {
                for i in 0..m - 1 {
                    for j in 0..n - 1 {
                        let (p, q) = (self.vertical[i * n + j], self.horizontal[i * (n - 1) + j]);
                        if p * p + q * q > (1.0 + tol).powi(2) {
                            return false;
                        }
                    }
                    if self.vertical[i * n + n - 1].abs() > 1.0 + tol {
                        return false;
                    }
                }
                (0..n - 1).all(|j| self.horizontal[(m - 1) * (n - 1) + j].abs() <= 1.0 + tol)
            }
        }
    }

    fn project(&mut self, flavor: TvFlavor) {
        let (m, n) = (self.rows, self.cols);
        match flavor {
            TvFlavor::Anisotropic => {
                for v in self.vertical.iter_mut().chain(self.horizontal.iter_mut()) {
                    *v = v.clamp(-1.0, 1.0);
                }
            }
            TvFlavor::Isotropic => {
                for i in 0..m - 1 {
                    for j in 0..n - 1 {
                        let (pi, qi) = (i * n + j, i * (n - 1) + j);
                        let mag = self.vertical[pi].hypot(self.horizontal[qi]);
                        if mag > 1.0 {
                            self.vertical[pi] /= mag;
                            self.horizontal[qi] /= mag;
                        }
                    }
                    let last = &mut self.vertical[i * n + n - 1];
                    *last = last.clamp(-1.0, 1.0);
                }
                for j in 0..n - 1 {
                    let last = &mut self.horizontal[(m - 1) * (n - 1) + j];
                    *last = last.clamp(-1.0, 1.0);
                }
            }
        }
    }
}

/// Vertical and horizontal forward differences of `img`.
pub fn forward_differences(img: &Image) -> DualField {
    forward_differences_raw(img.pixels(), img.rows(), img.cols())
}

/// Adjoint of [`forward_differences`].
///
/// `out[i,j] = P[i,j] - P[i-1,j] + Q[i,j] - Q[i,j-1]`, with out-of-range
/// terms dropped.
pub fn divergence_adjoint(d: &DualField) -> Result<Image> {
    let (m, n) = (d.rows, d.cols);
    check_len((m - 1) * n, d.vertical.len(), "vertical dual field")?;
    check_len(m * (n - 1), d.horizontal.len(), "horizontal dual field")?;
    let mut out = vec![0.0; m * n];
    adjoint_into(d, &mut out);
    Image::new(m, n, out)
}

fn adjoint_into(d: &DualField, out: &mut [f64]) {
    let (m, n) = (d.rows, d.cols);
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            if i + 1 < m {
                acc += d.vertical[i * n + j];
            }
            if i > 0 {
                acc -= d.vertical[(i - 1) * n + j];
            }
            if j + 1 < n {
                acc += d.horizontal[i * (n - 1) + j];
            }
            if j > 0 {
                acc -= d.horizontal[i * (n - 1) + j - 1];
            }
            out[i * n + j] = acc;
        }
    }
}

pub fn tv_norm(img: &Image, flavor: TvFlavor) -> f64 {
    let d = forward_differences(img);
    let (m, n) = (img.rows(), img.cols());
    match flavor {
        TvFlavor::Anisotropic => d.vertical.iter().chain(&d.horizontal).map(|v| v.abs()).sum(),
        TvFlavor::Isotropic => {
            let mut total = 0.0;
            for i in 0..m.saturating_sub(1) {
                for j in 0..n - 1 {
                    total += d.vertical[i * n + j].hypot(d.horizontal[i * (n - 1) + j]);
                }
                total += d.vertical[i * n + n - 1].abs();
            }
            if n > 1 {
                total += d.horizontal[(m - 1) * (n - 1)..].iter().map(|v| v.abs()).sum::<f64>();
            }
            total
        }
    }
}

/// Result of [`tv_prox_detailed`].
#[derive(Debug, Clone)]
pub struct ProxOutput {
    pub image: Image,
    /// Final dual iterate; always feasible.
    pub dual: DualField,
    pub iterations: usize,
}

/// `argmin_u weight * TV(u) + 0.5 * ||u - b||^2`, approximately.
pub fn tv_prox(b: &Image, weight: f64, flavor: TvFlavor, inner_iters: usize, inner_tol: f64) -> Result<Image> {
    tv_prox_detailed(b, weight, flavor, inner_iters, inner_tol).map(|out| out.image)
}

pub fn tv_prox_detailed(
    b: &Image,
    weight: f64,
    flavor: TvFlavor,
    inner_iters: usize,
    inner_tol: f64,
) -> Result<ProxOutput> {
    if !(weight >= 0.0) || !weight.is_finite() {
        return Err(Error::invalid(format!("prox weight must be finite and nonnegative, got {weight}")));
    }
    let (m, n) = (b.rows(), b.cols());
    if weight == 0.0 {
        return Ok(ProxOutput {
            image: b.clone(),
            dual: DualField::zeros(m, n),
            iterations: 0,
        });
    }

    let bp = b.pixels();
    let step = 1.0 / (DIFF_NORM_SQ * weight);
    let mut dual = DualField::zeros(m, n);
    let mut extrapolated = dual.clone();
    let mut u = vec![0.0; m * n];
    let mut t = 1.0_f64;
    let mut iterations = 0;

    for _ in 0..inner_iters {
        iterations += 1;
        primal_from_dual(bp, weight, &extrapolated, &mut u);
        let grad = forward_differences_raw(&u, m, n);

        let mut next = extrapolated.clone();
        for (v, g) in next.vertical.iter_mut().zip(&grad.vertical) {
            *v += step * g;
        }
        for (h, g) in next.horizontal.iter_mut().zip(&grad.horizontal) {
            *h += step * g;
        }
        next.project(flavor);

        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        let mut change_sq = 0.0;
        for ((e, nv), ov) in extrapolated.vertical.iter_mut().zip(&next.vertical).zip(&dual.vertical) {
            let diff = nv - ov;
            change_sq += diff * diff;
            *e = nv + beta * diff;
        }
        for ((e, nh), oh) in extrapolated.horizontal.iter_mut().zip(&next.horizontal).zip(&dual.horizontal) {
            let diff = nh - oh;
            change_sq += diff * diff;
            *e = nh + beta * diff;
        }
        let rel_change = change_sq.sqrt() / next.norm_sq().sqrt().max(1.0);
        dual = next;
        t = t_next;
        if rel_change < inner_tol {
            break;
        }
    }

    primal_from_dual(bp, weight, &dual, &mut u);
    Ok(ProxOutput {
        image: Image::new(m, n, u)?,
        dual,
        iterations,
    })
}

/// `u = b - weight * D^T(dual)`
fn primal_from_dual(b: &[f64], weight: f64, dual: &DualField, u: &mut [f64]) {
    adjoint_into(dual, u);
    for (ui, bi) in u.iter_mut().zip(b) {
        *ui = bi - weight * *ui;
    }
}

fn forward_differences_raw(x: &[f64], m: usize, n: usize) -> DualField {
    let mut out = DualField::zeros(m, n);
    for i in 0..m - 1 {
        for j in 0..n {
            out.vertical[i * n + j] = x[i * n + j] - x[(i + 1) * n + j];
        }
    }
    for i in 0..m {
        for j in 0..n - 1 {
            out.horizontal[i * (n - 1) + j] = x[i * n + j] - x[i * n + j + 1];
        }
    }
    out
}
