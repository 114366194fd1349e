//! Penalty paths, edge counting, eBIC scoring and penalty selection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dtrace::{AdmmState, DifferenceEstimate, DtraceProblem, SolverOptions};
use crate::error::{Result, SddError};
use crate::realspace::ExpandedMatrix;

pub const DEFAULT_PATH_LEN: usize = 20;
pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_EDGE_THRESHOLD: f64 = 1e-6;
/// Smallest path value as a fraction of the largest.
pub const PATH_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub tau: f64,
    pub edge_count: usize,
    pub ebic: f64,
    pub converged: bool,
}

/// `k` values spaced evenly on a log scale from `lo` up to `hi`, returned
/// largest first with both endpoints exact.
pub(crate) fn log_spaced_descending(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![hi];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / (k - 1) as f64;
    (0..k)
        .map(|i| match i {
            0 => hi,
            _ if i == k - 1 => lo,
            _ => (lhi - step * i as f64).exp(),
        })
        .collect()
}

/// Largest penalty on the path, `2 max |S1 - S2|`.
pub fn tau_max(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> f64 {
    2.0 * s1
        .iter()
        .zip(s2.iter())
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
}

/// `k` penalties from `tau_max` down to `0.001 tau_max`, geometrically spaced.
pub fn penalty_path(s1: &ExpandedMatrix, s2: &ExpandedMatrix, k: usize) -> Result<Vec<f64>> {
    if s1.dim() != s2.dim() {
        return Err(SddError::Argument("S1 and S2 differ in dimension".into()));
    }
    if k < 1 {
        return Err(SddError::Argument("path length must be at least 1".into()));
    }
    let top = tau_max(s1.matrix(), s2.matrix());
    if top == 0.0 {
        return Err(SddError::DegeneratePath(
            "S1 equals S2, so every penalty gives the zero estimate".into(),
        ));
    }
    Ok(log_spaced_descending(PATH_RATIO * top, top, k))
}

/// Unique edges of an expanded difference: entries above `threshold` in the
/// upper triangles (diagonal included) of the `[0..p, 0..p]` and
/// `[0..p, p..2p]` blocks.
pub fn count_edges_matrix(delta: &DMatrix<f64>, p: usize, threshold: f64) -> usize {
    let mut count = 0;
    for j in 0..p {
        for i in 0..=j {
            if delta[(i, j)].abs() > threshold {
                count += 1;
            }
            if delta[(i, j + p)].abs() > threshold {
                count += 1;
            }
        }
    }
    count
}

pub fn count_edges(estimate: &DifferenceEstimate, threshold: f64) -> usize {
    count_edges_matrix(estimate.matrix(), estimate.p(), threshold)
}

/// Which matrix the eBIC fit term takes the max-norm of.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitTerm {
    /// The loss gradient at the estimate, `(S1 D S2 + S2 D S1)/2 - S2 + S1`.
    /// It vanishes at the unpenalised minimiser.
    #[default]
    Gradient,
    /// `(S1 D S2 + S2 D S1 - S2 + S1)/2`, halving the constant term as well.
    HalvedConstant,
}

/// Extended BIC with the default [`FitTerm::Gradient`] fit term:
/// `min(n1,n2) |G|_inf + log(min(n1,n2)) |E| + 4 gamma |E| log p`.
///
/// `p` is the channel count of the complex problem, not `2p`.
pub fn ebic(
    delta: &DMatrix<f64>,
    s1: &DMatrix<f64>,
    s2: &DMatrix<f64>,
    n1: usize,
    n2: usize,
    gamma: f64,
    p: usize,
) -> Result<f64> {
    ebic_with(delta, s1, s2, n1, n2, gamma, p, FitTerm::Gradient)
}

#[allow(clippy::too_many_arguments)]
pub fn ebic_with(
    delta: &DMatrix<f64>,
    s1: &DMatrix<f64>,
    s2: &DMatrix<f64>,
    n1: usize,
    n2: usize,
    gamma: f64,
    p: usize,
    fit: FitTerm,
) -> Result<f64> {
    if n1 < 2 || n2 < 2 {
        return Err(SddError::Argument(format!(
            "sample sizes must be at least 2, got {n1} and {n2}"
        )));
    }
    let dim = 2 * p;
    if delta.shape() != (dim, dim) || s1.shape() != (dim, dim) || s2.shape() != (dim, dim) {
        return Err(SddError::Argument(format!(
            "expected {dim}x{dim} matrices for p={p}"
        )));
    }
    let edges = count_edges_matrix(delta, p, DEFAULT_EDGE_THRESHOLD) as f64;
    let quad = (s1 * delta * s2 + s2 * delta * s1) * 0.5;
    let inner = match fit {
        FitTerm::Gradient => quad - s2 + s1,
        FitTerm::HalvedConstant => quad + (s1 - s2) * 0.5,
    };
    let fit_norm = inner.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let n_min = n1.min(n2) as f64;
    Ok(n_min * fit_norm + n_min.ln() * edges + 4.0 * gamma * edges * (p as f64).ln())
}

/// The penalty chosen from a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub record: TuningRecord,
    pub index: usize,
    /// Set when no path point converged and the choice fell back to all points.
    pub from_unconverged: bool,
}

/// Minimum-eBIC record among converged points, ties going to the larger
/// penalty. Falls back to all records when none converged.
pub fn select_tau(records: &[TuningRecord]) -> Result<Selection> {
    select_tau_with(records, false)
}

/// As [`select_tau`]; `include_unconverged` lets every point compete.
pub fn select_tau_with(records: &[TuningRecord], include_unconverged: bool) -> Result<Selection> {
    if records.is_empty() {
        return Err(SddError::Argument("no tuning records to select from".into()));
    }
    let any_converged = records.iter().any(|r| r.converged);
    let eligible = |r: &TuningRecord| include_unconverged || !any_converged || r.converged;
    let (index, record) = records
        .iter()
        .enumerate()
        .filter(|(_, r)| eligible(r))
        .min_by(|(_, a), (_, b)| {
            a.ebic
                .total_cmp(&b.ebic)
                .then_with(|| b.tau.total_cmp(&a.tau))
        })
        .expect("at least one eligible record");
    Ok(Selection {
        record: *record,
        index,
        from_unconverged: !record.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    pub path_len: usize,
    pub gamma: f64,
    pub include_unconverged: bool,
    pub fit_term: FitTerm,
    pub solver: SolverOptions,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            path_len: DEFAULT_PATH_LEN,
            gamma: DEFAULT_GAMMA,
            include_unconverged: false,
            fit_term: FitTerm::Gradient,
            solver: SolverOptions::default(),
        }
    }
}

/// A solved penalty path with the eBIC-selected estimate.
#[derive(Debug, Clone)]
pub struct TunedEstimate {
    pub records: Vec<TuningRecord>,
    pub selection: Selection,
    pub estimate: DifferenceEstimate,
}

/// Solves the penalty path from the largest penalty down, warm-starting each
/// point from the previous one, and keeps the minimum-eBIC estimate. When
/// `S1 = S2` the path collapses to one point holding the zero estimate.
pub fn tune_sdd(
    s1: &ExpandedMatrix,
    s2: &ExpandedMatrix,
    n1: usize,
    n2: usize,
    config: &TuningConfig,
) -> Result<TunedEstimate> {
    // identical inputs: every positive penalty gives the zero estimate
    let path = if tau_max(s1.matrix(), s2.matrix()) == 0.0 && s1.dim() == s2.dim() {
        vec![f64::MIN_POSITIVE]
    } else {
        penalty_path(s1, s2, config.path_len)?
    };
    let problem = DtraceProblem::new(s1, s2)?;
    let p = problem.p();
    let mut warm: Option<AdmmState> = None;
    let mut records = Vec::with_capacity(path.len());
    let mut estimates = Vec::with_capacity(path.len());
    for &tau in &path {
        let (est, state) = problem.solve(tau, &config.solver, warm.as_ref())?;
        let score = ebic_with(
            est.matrix(),
            problem.s1(),
            problem.s2(),
            n1,
            n2,
            config.gamma,
            p,
            config.fit_term,
        )?;
        records.push(TuningRecord {
            tau,
            edge_count: count_edges(&est, DEFAULT_EDGE_THRESHOLD),
            ebic: score,
            converged: est.converged(),
        });
        estimates.push(est);
        warm = Some(state);
    }
    let selection = select_tau_with(&records, config.include_unconverged)?;
    let estimate = estimates.swap_remove(selection.index);
    Ok(TunedEstimate {
        records,
        selection,
        estimate,
    })
}

/// Writes the tuning trace as `tau,edge_count,ebic,converged`.
pub fn write_tuning_trace<W: std::io::Write>(records: &[TuningRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)
            .map_err(|e| SddError::Serialization(e.to_string()))?;
    }
    w.flush()
        .map_err(|e| SddError::Serialization(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(tau: f64, ebic: f64, converged: bool) -> TuningRecord {
        TuningRecord {
            tau,
            edge_count: 0,
            ebic,
            converged,
        }
    }

    fn diag_expanded(values: &[f64]) -> ExpandedMatrix {
        let p = values.len();
        let mut m = DMatrix::zeros(2 * p, 2 * p);
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
            m[(i + p, i + p)] = *v;
        }
        ExpandedMatrix::from_real(m, 0.0).unwrap()
    }

    #[test]
    fn path_endpoints_and_ratio() {
        let s1 = diag_expanded(&[1.5, 1.0]);
        let s2 = diag_expanded(&[1.0, 1.0]);
        let path = penalty_path(&s1, &s2, 20).unwrap();
        assert_eq!(path.len(), 20);
        assert_eq!(path[0], 1.0);
        assert_eq!(path[19], 0.001);
        let ratio = 1000f64.powf(1.0 / 19.0);
        for w in path.windows(2) {
            assert!((w[0] / w[1] - ratio).abs() < 1e-12);
        }
        assert_eq!(penalty_path(&s1, &s2, 2).unwrap(), vec![1.0, 0.001]);
        assert!(matches!(
            penalty_path(&s1, &s1, 20),
            Err(SddError::DegeneratePath(_))
        ));
    }

    #[test]
    fn edge_count_examples() {
        let zero = DMatrix::<f64>::zeros(4, 4);
        assert_eq!(count_edges_matrix(&zero, 2, 1e-6), 0);
        let mut one = DMatrix::<f64>::zeros(4, 4);
        one[(0, 0)] = 0.5;
        one[(2, 2)] = 0.5;
        assert_eq!(count_edges_matrix(&one, 2, 1e-6), 1);
        let tiny = DMatrix::<f64>::from_element(4, 4, 1e-7);
        assert_eq!(count_edges_matrix(&tiny, 2, 1e-6), 0);
    }

    #[test]
    fn ebic_at_zero_estimate() {
        let s1 = diag_expanded(&[2.0, 1.0]);
        let s2 = diag_expanded(&[1.0, 1.25]);
        let zero = DMatrix::zeros(4, 4);
        let (m1, m2) = (s1.matrix(), s2.matrix());
        let v = ebic(&zero, m1, m2, 300, 200, 0.5, 2).unwrap();
        assert!((v - 200.0 * 1.0).abs() < 1e-12);
        let halved = ebic_with(&zero, m1, m2, 300, 200, 0.5, 2, FitTerm::HalvedConstant).unwrap();
        assert!((halved - 200.0 * 0.5 * 1.0).abs() < 1e-12);
        let v2 = ebic(&zero, m1, m2, 300, 200, 3.0, 2).unwrap();
        assert_eq!(v, v2);
        assert!(ebic(&zero, s1.matrix(), s2.matrix(), 1, 200, 0.5, 2).is_err());
    }

    #[test]
    fn selection_rules() {
        let single = [rec(0.3, 5.0, true)];
        assert_eq!(select_tau(&single).unwrap().record, single[0]);

        let tie = [rec(0.1, 4.0, true), rec(0.5, 4.0, true)];
        assert_eq!(select_tau(&tie).unwrap().record.tau, 0.5);

        let mixed = [rec(0.5, 6.0, true), rec(0.1, 1.0, false), rec(0.05, 3.0, true)];
        let s = select_tau(&mixed).unwrap();
        assert_eq!((s.index, s.from_unconverged), (2, false));
        assert_eq!(select_tau_with(&mixed, true).unwrap().index, 1);

        let none = [rec(0.5, 6.0, false), rec(0.1, 2.0, false)];
        let s = select_tau(&none).unwrap();
        assert_eq!((s.index, s.from_unconverged), (1, true));

        assert!(select_tau(&[]).is_err());
    }
}
