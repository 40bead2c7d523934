//! Piecewise-constant synthetic test images.
//!
//! Shapes are painted in list order onto a constant background, so every
//! pixel takes the intensity of the last shape covering it. Geometry that
//! falls outside the canvas is clipped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, LevelSetMask};

pub use crate::pgm::{load_image, save_image, save_mask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    /// Axis-aligned rectangle covering rows `top..top+height` and columns
    /// `left..left+width`.
    Rectangle {
        top: i64,
        left: i64,
        height: u64,
        width: u64,
        intensity: f64,
    },
    /// Pixel `(i, j)` is covered when its center `(i + 0.5, j + 0.5)` lies
    /// within `radius` of `(row, col)`.
    Disk {
        row: f64,
        col: f64,
        radius: f64,
        intensity: f64,
    },
}

impl Shape {
    pub fn intensity(&self) -> f64 {
        match *self {
            Shape::Rectangle { intensity, .. } | Shape::Disk { intensity, .. } => intensity,
        }
    }

    pub fn covers(&self, i: usize, j: usize) -> bool {
        match *self {
            Shape::Rectangle {
                top,
                left,
                height,
                width,
                ..
            } => {
                let (i, j) = (i as i64, j as i64);
                i >= top && i < top + height as i64 && j >= left && j < left + width as i64
            }
            Shape::Disk { row, col, radius, .. } => {
                let (di, dj) = (i as f64 + 0.5 - row, j as f64 + 0.5 - col);
                di * di + dj * dj <= radius * radius
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub rows: usize,
    pub cols: usize,
    pub background: f64,
    #[serde(default)]
    pub shapes: Vec<Shape>,
}

impl Default for PhantomSpec {
    /// 32x32 canvas at 40 with a 12x20 rectangle at 120 and a radius-6 disk
    /// at 90. A level of 70 separates both shapes from the background.
    fn default() -> Self {
        Self {
            rows: 32,
            cols: 32,
            background: 40.0,
            shapes: vec![
                Shape::Rectangle {
                    top: 4,
                    left: 6,
                    height: 12,
                    width: 20,
                    intensity: 120.0,
                },
                Shape::Disk {
                    row: 23.0,
                    col: 12.0,
                    radius: 6.0,
                    intensity: 90.0,
                },
            ],
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid(format!("phantom canvas must be nonempty, got {}x{}", self.rows, self.cols)));
        }
        let in_range = |v: f64| (0.0..=255.0).contains(&v);
        if !in_range(self.background) {
            return Err(Error::invalid(format!("background {} outside [0, 255]", self.background)));
        }
        for (idx, shape) in self.shapes.iter().enumerate() {
            if !in_range(shape.intensity()) {
                return Err(Error::invalid(format!(
                    "shape {idx} intensity {} outside [0, 255]",
                    shape.intensity()
                )));
            }
            if let Shape::Disk { row, col, radius, .. } = shape {
                if !(row.is_finite() && col.is_finite() && radius.is_finite() && *radius >= 0.0) {
                    return Err(Error::invalid(format!("shape {idx} has invalid disk geometry")));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Pixels covered by one shape, after clipping to the canvas.
    pub fn shape_mask(&self, shape: &Shape) -> LevelSetMask {
        let members = (0..self.rows)
            .flat_map(|i| (0..self.cols).map(move |j| (i, j)))
            .map(|(i, j)| shape.covers(i, j))
            .collect();
        LevelSetMask::new(self.rows, self.cols, members).expect("canvas validated")
    }
}

pub fn render_phantom(spec: &PhantomSpec) -> Result<Image> {
    spec.validate()?;
    let mut pixels = vec![spec.background; spec.rows * spec.cols];
    for shape in &spec.shapes {
        for i in 0..spec.rows {
            for j in 0..spec.cols {
                if shape.covers(i, j) {
                    pixels[i * spec.cols + j] = shape.intensity();
                }
            }
        }
    }
    Image::new(spec.rows, spec.cols, pixels)
}
