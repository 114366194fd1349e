use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use sdd::pipeline::Method;

/// Fully resolved parameters of one run. Stored in every manifest so the run
/// can be repeated with `sdd replay`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum RunConfig {
    Simulate(SimulateConfig),
    Estimate(EstimateRun),
    Evaluate(EvaluateConfig),
    Experiment(ExperimentConfig),
}

impl RunConfig {
    pub fn out(&self) -> &PathBuf {
        match self {
            RunConfig::Simulate(c) => &c.out,
            RunConfig::Estimate(c) => &c.out,
            RunConfig::Evaluate(c) => &c.out,
            RunConfig::Experiment(c) => &c.out,
        }
    }

    pub fn set_out(&mut self, out: PathBuf) {
        match self {
            RunConfig::Simulate(c) => c.out = out,
            RunConfig::Estimate(c) => c.out = out,
            RunConfig::Evaluate(c) => c.out = out,
            RunConfig::Experiment(c) => c.out = out,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub setting: u8,
    pub n: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub grid_count: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PanelLayout {
    RowsAreTime,
    RowsAreChannels,
}

impl From<PanelLayout> for sdd::timeseries::Layout {
    fn from(l: PanelLayout) -> Self {
        match l {
            PanelLayout::RowsAreTime => sdd::timeseries::Layout::RowsAreTime,
            PanelLayout::RowsAreChannels => sdd::timeseries::Layout::RowsAreChannels,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateRun {
    pub condition1: PathBuf,
    pub condition2: PathBuf,
    pub layout: PanelLayout,
    /// Angular frequencies in [0, pi], or Hz when `fs` is set.
    pub freqs: Option<Vec<f64>>,
    pub band: Option<String>,
    pub fs: Option<f64>,
    pub bandwidth: Option<usize>,
    pub path_len: usize,
    pub gamma: f64,
    pub jobs: usize,
    pub methods: Vec<Method>,
    pub grid_count: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateConfig {
    pub estimates: PathBuf,
    pub truth: PathBuf,
    pub edge_tol: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub setting: u8,
    pub n: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub grid_count: usize,
    pub bandwidth: Option<usize>,
    pub path_len: usize,
    pub gamma: f64,
    pub jobs: usize,
    pub methods: Vec<Method>,
    pub edge_tol: f64,
    pub out: PathBuf,
}
