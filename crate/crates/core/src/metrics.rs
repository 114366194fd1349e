//! Edge-recovery and estimation-error metrics against a known difference.
//!
//! Edges are classified over all `4p^2` entries of the expanded matrices,
//! which is a different convention from the unique-edge count used by eBIC
//! (see [`crate::tuning::count_edges`]).

use serde::{Deserialize, Serialize};

use crate::error::{Result, SddError};
use nalgebra::DMatrix;

pub const DEFAULT_EDGE_TOL: f64 = 1e-6;

/// Metrics at a single frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMetrics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_index: Option<i64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub n_true_edges: usize,
    pub n_est_edges: usize,
    /// `None` when nothing was estimated as an edge.
    pub precision: Option<f64>,
    /// `None` when the truth has no edges.
    pub recall: Option<f64>,
    pub accuracy: f64,
    /// `None` when the truth has no edges.
    pub rrmse: Option<f64>,
}

impl FrequencyMetrics {
    pub fn rrmse(&self) -> Result<f64> {
        self.rrmse.ok_or(SddError::UndefinedRrmse)
    }

    pub fn entries(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }
}

/// Scores an estimate against the truth over every expanded entry.
pub fn score(estimate: &DMatrix<f64>, truth: &DMatrix<f64>, edge_tol: f64) -> Result<FrequencyMetrics> {
    if estimate.shape() != truth.shape() {
        return Err(SddError::Argument(format!(
            "estimate is {:?} but truth is {:?}",
            estimate.shape(),
            truth.shape()
        )));
    }
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    let (mut err_sq, mut truth_sq) = (0.0f64, 0.0f64);
    for (&e, &t) in estimate.iter().zip(truth.iter()) {
        match (e.abs() > edge_tol, t.abs() > edge_tol) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fneg += 1,
        }
        err_sq += (e - t) * (e - t);
        truth_sq += t * t;
    }
    let total = estimate.len() as f64;
    let n_true = tp + fneg;
    let n_est = tp + fp;
    Ok(FrequencyMetrics {
        freq_index: None,
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fneg,
        n_true_edges: n_true,
        n_est_edges: n_est,
        precision: (n_est > 0).then(|| tp as f64 / n_est as f64),
        recall: (n_true > 0).then(|| tp as f64 / n_true as f64),
        accuracy: (tp + tn) as f64 / total,
        rrmse: (n_true > 0).then(|| (err_sq / truth_sq).sqrt()),
    })
}

/// Mean and standard error of one metric across frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; zero for a single value.
    pub se: f64,
    pub count: usize,
    /// Frequencies where the metric was undefined.
    pub skipped: usize,
}

impl MetricStat {
    fn from_values(values: &[f64], skipped: usize) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                count,
                skipped,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let se = if count > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            var.sqrt() / (count as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            se,
            count,
            skipped,
        }
    }

    /// `"0.53 (0.01)"`, or `"NA"` when every frequency was skipped.
    pub fn mean_se(&self, decimals: usize) -> String {
        if self.count == 0 {
            return "NA".to_string();
        }
        format!("{:.*} ({:.*})", decimals, self.mean, decimals, self.se)
    }
}

/// How undefined precision values enter the aggregate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum UndefinedPrecision {
    /// Leave them out and count them as skipped.
    #[default]
    Skip,
    /// Count them as zero, which matches tables that print 0.00 for empty estimates.
    Zero,
}

/// Metrics aggregated across frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_true_edges: MetricStat,
    pub n_est_edges: MetricStat,
    pub precision: MetricStat,
    pub recall: MetricStat,
    pub accuracy: MetricStat,
    pub rrmse: MetricStat,
    pub per_frequency: Vec<FrequencyMetrics>,
}

pub fn aggregate(reports: &[FrequencyMetrics]) -> Result<MetricsReport> {
    aggregate_with(reports, UndefinedPrecision::Skip)
}

pub fn aggregate_with(reports: &[FrequencyMetrics], policy: UndefinedPrecision) -> Result<MetricsReport> {
    let first = reports
        .first()
        .ok_or_else(|| SddError::Argument("no reports to aggregate".into()))?;
    if reports.iter().any(|r| r.entries() != first.entries()) {
        return Err(SddError::Argument(
            "reports cover matrices of different sizes".into(),
        ));
    }
    let collect = |f: &dyn Fn(&FrequencyMetrics) -> Option<f64>| {
        let values: Vec<f64> = reports.iter().filter_map(f).collect();
        let skipped = reports.len() - values.len();
        MetricStat::from_values(&values, skipped)
    };
    Ok(MetricsReport {
        n_true_edges: collect(&|r| Some(r.n_true_edges as f64)),
        n_est_edges: collect(&|r| Some(r.n_est_edges as f64)),
        precision: collect(&|r| match policy {
            UndefinedPrecision::Skip => r.precision,
            UndefinedPrecision::Zero => Some(r.precision.unwrap_or(0.0)),
        }),
        recall: collect(&|r| r.recall),
        accuracy: collect(&|r| Some(r.accuracy)),
        rrmse: collect(&|r| r.rrmse),
        per_frequency: reports.to_vec(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per frequency, then a `mean` and an `se` summary row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let ser = |e: csv::Error| SddError::Serialization(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "freq_index", "tp", "fp", "tn", "fn", "n_true_edges", "n_est_edges", "precision",
            "recall", "accuracy", "rrmse",
        ])
        .map_err(ser)?;
        for r in &self.per_frequency {
            w.write_record([
                r.freq_index.map_or_else(|| "NA".into(), |j| j.to_string()),
                r.true_positives.to_string(),
                r.false_positives.to_string(),
                r.true_negatives.to_string(),
                r.false_negatives.to_string(),
                r.n_true_edges.to_string(),
                r.n_est_edges.to_string(),
                opt(r.precision),
                opt(r.recall),
                r.accuracy.to_string(),
                opt(r.rrmse),
            ])
            .map_err(ser)?;
        }
        for (label, pick) in [("mean", 0usize), ("se", 1)] {
            let v = |s: &MetricStat| if pick == 0 { s.mean } else { s.se }.to_string();
            w.write_record([
                label.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                v(&self.n_true_edges),
                v(&self.n_est_edges),
                v(&self.precision),
                v(&self.recall),
                v(&self.accuracy),
                v(&self.rrmse),
            ])
            .map_err(ser)?;
        }
        w.flush().map_err(|e| SddError::Serialization(e.to_string()))?;
        Ok(())
    }

    /// Summary row in `Mean (SE)` form: true edges, estimated edges,
    /// precision, recall, accuracy, RRMSE.
    pub fn table_row(&self) -> [String; 6] {
        [
            self.n_true_edges.mean_se(1),
            self.n_est_edges.mean_se(1),
            self.precision.mean_se(2),
            self.recall.mean_se(2),
            self.accuracy.mean_se(2),
            self.rrmse.mean_se(2),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report_with_rrmse(r: Option<f64>) -> FrequencyMetrics {
        FrequencyMetrics {
            freq_index: None,
            true_positives: 1,
            false_positives: 0,
            true_negatives: 3,
            false_negatives: 0,
            n_true_edges: 1,
            n_est_edges: 1,
            precision: Some(1.0),
            recall: Some(1.0),
            accuracy: 1.0,
            rrmse: r,
        }
    }

    #[test]
    fn perfect_estimate() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        let m = score(&t, &t, 1e-6).unwrap();
        assert_eq!(m.precision, Some(1.0));
        assert_eq!(m.recall, Some(1.0));
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.rrmse, Some(0.0));
    }

    #[test]
    fn zero_estimate() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        let m = score(&DMatrix::zeros(2, 2), &t, 1e-6).unwrap();
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.precision, None);
        assert_eq!(m.rrmse, Some(1.0));
        assert_eq!(m.accuracy, (4.0 - 2.0) / 4.0);
    }

    #[test]
    fn zero_truth_has_undefined_rrmse() {
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let m = score(&e, &DMatrix::zeros(2, 2), 1e-6).unwrap();
        assert!(matches!(m.rrmse(), Err(SddError::UndefinedRrmse)));
        assert_eq!(m.recall, None);
        assert_eq!(m.precision, Some(0.0));
        assert!(score(&e, &DMatrix::zeros(3, 3), 1e-6).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let one = aggregate(&[report_with_rrmse(Some(0.3))]).unwrap();
        assert_eq!((one.rrmse.mean, one.rrmse.se), (0.3, 0.0));

        let two = aggregate(&[report_with_rrmse(Some(0.4)), report_with_rrmse(Some(0.6))]).unwrap();
        assert!((two.rrmse.mean - 0.5).abs() < 1e-15);
        assert!((two.rrmse.se - 0.1).abs() < 1e-15);

        let skip = aggregate(&[report_with_rrmse(Some(0.4)), report_with_rrmse(None)]).unwrap();
        assert_eq!((skip.rrmse.count, skip.rrmse.skipped), (1, 1));
        assert_eq!(skip.rrmse.mean, 0.4);

        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn undefined_precision_policy() {
        let mut empty = report_with_rrmse(Some(1.0));
        empty.precision = None;
        let reports = [report_with_rrmse(Some(0.5)), empty];
        assert_eq!(aggregate(&reports).unwrap().precision.mean, 1.0);
        let zeroed = aggregate_with(&reports, UndefinedPrecision::Zero).unwrap();
        assert_eq!(zeroed.precision.mean, 0.5);
    }

    #[test]
    fn csv_has_summary_rows() {
        let rep = aggregate(&[report_with_rrmse(Some(0.4)), report_with_rrmse(Some(0.6))]).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[3].starts_with("mean,"));
        assert!(lines[4].starts_with("se,"));
        assert_eq!(rep.table_row()[5], "0.50 (0.10)");
    }
}
