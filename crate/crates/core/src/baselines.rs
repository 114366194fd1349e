//! Baselines: the direct inverse difference and its hard-thresholded version.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dtrace::DifferenceEstimate;
use crate::error::{Result, SddError};
use crate::realspace::{project_block_structure, ExpandedMatrix};
use crate::tuning::{
    count_edges, ebic_with, log_spaced_descending, select_tau_with, FitTerm, Selection,
    TuningRecord, DEFAULT_EDGE_THRESHOLD,
};

/// Smallest eigenvalue accepted by [`naive_difference`].
pub const MIN_INVERTIBLE_EIGENVALUE: f64 = 1e-10;

fn symmetric_inverse(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    if min <= MIN_INVERTIBLE_EIGENVALUE {
        return Err(SddError::Singular { min_eigenvalue: min });
    }
    let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose())
}

/// `S1^{-1} - S2^{-1}` by direct inversion. No pseudo-inverse fallback.
pub fn naive_difference(s1: &ExpandedMatrix, s2: &ExpandedMatrix) -> Result<DifferenceEstimate> {
    if s1.dim() != s2.dim() {
        return Err(SddError::Argument("S1 and S2 differ in dimension".into()));
    }
    let diff = symmetric_inverse(s1.matrix())? - symmetric_inverse(s2.matrix())?;
    let sym = (&diff + diff.transpose()) * 0.5;
    Ok(DifferenceEstimate::new(project_block_structure(&sym)?, None, None))
}

/// Zeroes every entry with `|value| <= t`.
pub fn hard_threshold(estimate: &DifferenceEstimate, t: f64) -> DifferenceEstimate {
    let m = estimate.matrix().map(|v| if v.abs() <= t { 0.0 } else { v });
    // thresholding acts entrywise, so block structure survives
    let expanded = ExpandedMatrix::from_real(m, 0.0).expect("thresholding keeps block structure");
    DifferenceEstimate::new(expanded, Some(t), None)
}

/// Strictly increasing positive thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPath {
    pub thresholds: Vec<f64>,
}

/// `k` log-spaced thresholds between the smallest nonzero and the largest
/// absolute entry of the estimate.
pub fn threshold_path(estimate: &DifferenceEstimate, k: usize) -> Result<ThresholdPath> {
    if k < 1 {
        return Err(SddError::Argument("path length must be at least 1".into()));
    }
    let (lo, hi) = estimate
        .matrix()
        .iter()
        .map(|v| v.abs())
        .filter(|v| *v > 0.0)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi == 0.0 {
        return Err(SddError::DegeneratePath(
            "estimate has no nonzero entries to threshold".into(),
        ));
    }
    let mut thresholds = if lo == hi {
        vec![hi]
    } else {
        log_spaced_descending(lo, hi, k)
    };
    thresholds.reverse();
    Ok(ThresholdPath { thresholds })
}

/// A hard-threshold path scored with the SDD eBIC.
#[derive(Debug, Clone)]
pub struct TunedThreshold {
    pub records: Vec<TuningRecord>,
    pub selection: Selection,
    pub estimate: DifferenceEstimate,
}

/// Thresholds the direct inverse difference along [`threshold_path`] and
/// keeps the minimum-eBIC result (ties go to the larger threshold).
#[allow(clippy::too_many_arguments)]
pub fn tune_hard_threshold(
    s1: &ExpandedMatrix,
    s2: &ExpandedMatrix,
    n1: usize,
    n2: usize,
    gamma: f64,
    fit: FitTerm,
    k: usize,
) -> Result<TunedThreshold> {
    let naive = naive_difference(s1, s2)?;
    let thresholds = match threshold_path(&naive, k) {
        Ok(path) => path.thresholds,
        // already all zero
        Err(SddError::DegeneratePath(_)) => vec![0.0],
        Err(e) => return Err(e),
    };
    let p = naive.p();
    let candidates: Vec<DifferenceEstimate> = thresholds
        .iter()
        .map(|&t| hard_threshold(&naive, t))
        .collect();
    let records = candidates
        .iter()
        .map(|est| {
            Ok(TuningRecord {
                tau: est.tau.unwrap_or(0.0),
                edge_count: count_edges(est, DEFAULT_EDGE_THRESHOLD),
                ebic: ebic_with(est.matrix(), s1.matrix(), s2.matrix(), n1, n2, gamma, p, fit)?,
                converged: true,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let selection = select_tau_with(&records, true)?;
    let estimate = candidates[selection.index].clone();
    Ok(TunedThreshold {
        records,
        selection,
        estimate,
    })
}
