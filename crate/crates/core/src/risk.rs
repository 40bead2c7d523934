//! Risk functionals for level-set estimates and the thresholding baselines.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::image::{extract_level_set, symmetric_difference, Image, LevelSetMask};

/// Echo of the parameters an estimate was produced under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    pub k: usize,
    pub sigma: f64,
    pub alpha: Option<f64>,
    pub gamma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub excess_risk: f64,
    /// Empirical risk of the mask measured against the truth pixels.
    pub empirical_risk: f64,
    pub sym_diff_size: usize,
    pub method_label: String,
    pub params: RiskParams,
}

/// `(1/p) * sum over the symmetric difference of S* and S of |gamma - x_i|`.
pub fn excess_risk(truth: &Image, gamma: f64, estimate_mask: &LevelSetMask) -> Result<f64> {
    let (diff, _) = sym_diff_against_truth(truth, gamma, estimate_mask)?;
    Ok(weighted_sum(truth, gamma, &diff) / truth.len() as f64)
}

fn sym_diff_against_truth(truth: &Image, gamma: f64, mask: &LevelSetMask) -> Result<(LevelSetMask, LevelSetMask)> {
    if mask.rows() != truth.rows() || mask.cols() != truth.cols() {
        return Err(Error::invalid(format!(
            "mask is {}x{} but truth image is {}x{}",
            mask.rows(),
            mask.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    let true_set = extract_level_set(truth, gamma);
    Ok((symmetric_difference(&true_set, mask)?, true_set))
}

fn weighted_sum(truth: &Image, gamma: f64, diff: &LevelSetMask) -> f64 {
    truth
        .pixels()
        .iter()
        .zip(diff.members())
        .filter(|(_, &in_diff)| in_diff)
        .map(|(x, _)| (gamma - x).abs())
        .sum()
}

/// `(1/p) * sum_i (gamma - y_i) * (+1 if i in S else -1)`.
pub fn empirical_risk(observations: &[f64], gamma: f64, mask: &LevelSetMask) -> Result<f64> {
    check_len(mask.len(), observations.len(), "observations vs mask")?;
    let total: f64 = observations
        .iter()
        .zip(mask.members())
        .map(|(y, &inside)| if inside { gamma - y } else { y - gamma })
        .sum();
    Ok(total / observations.len() as f64)
}

/// Coordinate-wise `observations[i] >= gamma`. Applied to `A^T y` this is the
/// proxy-thresholding baseline.
pub fn threshold_baseline(observations: &[f64], rows: usize, cols: usize, gamma: f64) -> Result<LevelSetMask> {
    LevelSetMask::new(rows, cols, observations.iter().map(|&v| v >= gamma).collect())
}

pub fn evaluate(
    truth: &Image,
    gamma: f64,
    estimate_mask: &LevelSetMask,
    label: &str,
    params: RiskParams,
) -> Result<RiskReport> {
    let (diff, _) = sym_diff_against_truth(truth, gamma, estimate_mask)?;
    Ok(RiskReport {
        excess_risk: weighted_sum(truth, gamma, &diff) / truth.len() as f64,
        empirical_risk: empirical_risk(truth.pixels(), gamma, estimate_mask)?,
        sym_diff_size: diff.count(),
        method_label: label.to_string(),
        params,
    })
}
