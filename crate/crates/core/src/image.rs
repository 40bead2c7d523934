//! Images, level-set masks and the arithmetic shared by every other module.
//!
//! All vectorizations are row-major: pixel `(i, j)` of an `m x n` image lives
//! at index `i * n + j`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Real-valued `rows x cols` pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!("image dimensions must be positive, got {rows}x{cols}")));
        }
        check_len(rows * cols, pixels.len(), "image pixel count")?;
        if let Some(idx) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite pixel at index {idx}")));
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::filled(rows, cols, 0.0)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[i * self.cols + j]
    }

    /// Row-major vectorization; exact inverse of [`reshape_to_image`].
    pub fn flatten(&self) -> Vec<f64> {
        self.pixels.clone()
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

/// Reshape a row-major vector into an `m x n` image.
pub fn reshape_to_image(v: &[f64], m: usize, n: usize) -> Result<Image> {
    Image::new(m, n, v.to_vec())
}

/// Boolean membership grid for a level set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSetMask {
    rows: usize,
    cols: usize,
    members: Vec<bool>,
}

impl LevelSetMask {
    pub fn new(rows: usize, cols: usize, members: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!("mask dimensions must be positive, got {rows}x{cols}")));
        }
        check_len(rows * cols, members.len(), "mask member count")?;
        Ok(Self { rows, cols, members })
    }

    pub fn empty(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![false; rows * cols])
    }

    /// Mask containing exactly the given (0-based, row-major) indices.
    pub fn from_indices(rows: usize, cols: usize, indices: &[usize]) -> Result<Self> {
        let mut members = vec![false; rows * cols];
        for &idx in indices {
            if idx >= members.len() {
                return Err(Error::invalid(format!("index {idx} outside mask of {} pixels", members.len())));
            }
            members[idx] = true;
        }
        Self::new(rows, cols, members)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[bool] {
        &self.members
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.members[idx]
    }

    /// Number of member pixels.
    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            members: self.members.iter().map(|m| !m).collect(),
        }
    }

    pub fn intersection_count(&self, other: &Self) -> Result<usize> {
        self.check_shape(other)?;
        Ok(self.members.iter().zip(&other.members).filter(|(a, b)| **a && **b).count())
    }

    /// 0-based indices of member pixels.
    pub fn indices(&self) -> Vec<usize> {
        self.members.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::invalid(format!(
                "mask shapes differ: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

/// The `{ j : x(j) >= gamma }` level set of an image.
pub fn extract_level_set(img: &Image, gamma: f64) -> LevelSetMask {
    LevelSetMask {
        rows: img.rows,
        cols: img.cols,
        members: img.pixels.iter().map(|&v| v >= gamma).collect(),
    }
}

pub fn symmetric_difference(a: &LevelSetMask, b: &LevelSetMask) -> Result<LevelSetMask> {
    a.check_shape(b)?;
    Ok(LevelSetMask {
        rows: a.rows,
        cols: a.cols,
        members: a.members.iter().zip(&b.members).map(|(x, y)| x ^ y).collect(),
    })
}

/// Target level together with the box `[lower, upper]` imposed on the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    gamma: f64,
    lower: f64,
    upper: f64,
}

impl LevelSpec {
    pub fn new(gamma: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(gamma.is_finite() && lower.is_finite() && upper.is_finite()) {
            return Err(Error::invalid("level parameters must be finite"));
        }
        if lower >= upper {
            return Err(Error::invalid(format!("box lower bound {lower} must be below upper bound {upper}")));
        }
        if gamma < lower || gamma > upper {
            return Err(Error::invalid(format!("gamma {gamma} outside box [{lower}, {upper}]")));
        }
        Ok(Self { gamma, lower, upper })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }
}
