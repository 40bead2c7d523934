use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::LevelSpec;

use super::{seed::SIGMA_SCALE, ExperimentGrid, Method};

pub const MANIFEST_FORMAT: &str = "levelset-sweep";
pub const MANIFEST_VERSION: u32 = 1;

/// Seeds and status of one replicate draw of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub k: usize,
    pub sigma: f64,
    pub method: Method,
    pub replicate: usize,
    pub operator_seed: u64,
    pub noise_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Everything needed to rerun a sweep, plus the files it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub grid: ExperimentGrid,
    pub image_shape: (usize, usize),
    pub level: LevelSpec,
    pub seed_hash: String,
    pub cells: Vec<CellRecord>,
    pub results_files: Vec<String>,
    pub mask_files: Vec<String>,
    pub truth_files: Vec<String>,
}

impl Manifest {
    pub fn new(
        grid: ExperimentGrid,
        image_shape: (usize, usize),
        level: LevelSpec,
        cells: Vec<CellRecord>,
        results_files: Vec<String>,
        mask_files: Vec<String>,
    ) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            grid,
            image_shape,
            level,
            seed_hash: format!(
                "splitmix64(fnv1a64(base_seed+replicate u64le | k u64le | round(sigma*{SIGMA_SCALE:e}) i64le | label))"
            ),
            cells,
            results_files,
            mask_files,
            truth_files: vec![super::TRUTH_FILE.into(), super::TRUTH_MASK_FILE.into()],
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Self = serde_json::from_str(&text)?;
        if manifest.format != MANIFEST_FORMAT || manifest.version != MANIFEST_VERSION {
            return Err(Error::invalid(format!(
                "unsupported manifest {} v{}",
                manifest.format, manifest.version
            )));
        }
        Ok(manifest)
    }
}
