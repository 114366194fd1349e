use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use sdd::dtrace::{DifferenceEstimate, HARD_ZERO};
use sdd::matrix_io::{read_real_csv, write_complex_csv, write_real_csv};
use sdd::metrics::{aggregate, score, MetricsReport};
use sdd::pipeline::{
    band_frequencies, estimate_frequencies, evaluation_grid, nearest_index_for_angle, Conditions,
    EstimateConfig, FrequencyResult, Method,
};
use sdd::spectral::{default_bandwidth, fourier_frequency, nearest_fourier_index};
use sdd::timeseries::{load_panel, write_panel};
use sdd::tuning::{
    count_edges_matrix, write_tuning_trace, TuningConfig, TuningRecord,
    DEFAULT_EDGE_THRESHOLD,
};
use sdd::varsim::{
    build_setting, simulate_var1_stream, true_difference, SettingId, SimSetting,
    STREAM_CONDITION_1, STREAM_CONDITION_2,
};
use sdd::SddError;

use crate::config::{
    EstimateRun, EvaluateConfig, ExperimentConfig, RunConfig, SimulateConfig,
};

pub const MANIFEST: &str = "manifest.json";

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    run: &'a RunConfig,
    details: serde_json::Value,
}

fn write_manifest(run: &RunConfig, details: serde_json::Value) -> Result<()> {
    let manifest = Manifest {
        tool: "sdd",
        version: env!("CARGO_PKG_VERSION"),
        run,
        details,
    };
    let path = run.out().join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

fn freq_dir(out: &Path, j: i64) -> Result<PathBuf> {
    let dir = out.join(j.to_string());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn run(config: &RunConfig) -> Result<()> {
    match config {
        RunConfig::Simulate(c) => simulate(c, config),
        RunConfig::Estimate(c) => estimate(c, config),
        RunConfig::Evaluate(c) => evaluate(c, config),
        RunConfig::Experiment(c) => experiment(c, config),
    }
}

/// Rebuilds a run from a manifest, optionally into a different directory.
pub fn replay(manifest: &Path, out: Option<PathBuf>) -> Result<()> {
    let text = fs::read_to_string(manifest)
        .with_context(|| format!("reading manifest {}", manifest.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing manifest {}", manifest.display()))?;
    let run = value
        .get("run")
        .ok_or_else(|| anyhow!("manifest {} has no run section", manifest.display()))?;
    let mut config: RunConfig = serde_json::from_value(run.clone())
        .with_context(|| format!("reading run section of {}", manifest.display()))?;
    if let Some(out) = out {
        config.set_out(out);
    }
    self::run(&config)
}

fn simulate(c: &SimulateConfig, run: &RunConfig) -> Result<()> {
    prepare_out(&c.out)?;
    let setting = SimSetting::new(SettingId::from_number(c.setting)?, c.seed);
    let models = build_setting(&setting)?;
    let x1 = simulate_var1_stream(&models.condition1, c.n, c.burn_in, c.seed, STREAM_CONDITION_1)?;
    let x2 = simulate_var1_stream(&models.condition2, c.n, c.burn_in, c.seed, STREAM_CONDITION_2)?;
    write_panel(&x1, c.out.join("condition1.csv"))?;
    write_panel(&x2, c.out.join("condition2.csv"))?;
    write_real_csv(models.condition1.transition(), c.out.join("transition1.csv"))?;
    write_real_csv(models.condition2.transition(), c.out.join("transition2.csv"))?;

    let indices = evaluation_grid(c.n, c.grid_count)?;
    let mut summary = csv::Writer::from_path(c.out.join("truth_summary.csv"))?;
    summary.write_record(["freq_index", "lambda", "true_edges", "nonzero_entries"])?;
    for &j in &indices {
        let lambda = fourier_frequency(j, c.n);
        let truth = true_difference(&models.condition1, &models.condition2, lambda)
            .map_err(|e| e.at_frequency(j))?;
        let dir = freq_dir(&c.out, j)?;
        write_real_csv(truth.matrix(), dir.join("truth.csv"))?;
        write_complex_csv(&truth.to_complex(), dir.join("truth_complex.csv"))?;
        let nonzero = truth.matrix().iter().filter(|v| v.abs() > DEFAULT_EDGE_THRESHOLD).count();
        summary.write_record([
            j.to_string(),
            format!("{lambda:?}"),
            count_edges_matrix(truth.matrix(), truth.p(), DEFAULT_EDGE_THRESHOLD).to_string(),
            nonzero.to_string(),
        ])?;
    }
    summary.flush()?;
    write_manifest(
        run,
        json!({
            "p": setting.p,
            "setting": setting,
            "retries": models.retries,
            "large_block_scale": models.large_block_scale,
            "spectral_radius": [models.condition1.spectral_radius(), models.condition2.spectral_radius()],
            "streams": {"condition1": STREAM_CONDITION_1, "condition2": STREAM_CONDITION_2},
            "freq_indices": indices,
        }),
    )
}

/// Maps the requested frequencies onto condition-1 Fourier indices.
fn resolve_indices(c: &EstimateRun, n1: usize) -> Result<Vec<i64>> {
    let requested: Option<Vec<f64>> = match (&c.freqs, &c.band) {
        (Some(_), Some(_)) => bail!(SddError::Argument(
            "give either --freqs or --band, not both".into()
        )),
        (Some(f), None) => Some(f.clone()),
        (None, Some(b)) => {
            if c.fs.is_none() {
                bail!(SddError::Argument("--band needs --fs".into()));
            }
            Some(band_frequencies(b)?)
        }
        (None, None) => None,
    };
    let Some(requested) = requested else {
        return Ok(evaluation_grid(n1, c.grid_count)?);
    };
    let mut seen = BTreeSet::new();
    let mut indices = Vec::new();
    for f in requested {
        let j = match c.fs {
            Some(fs) => nearest_fourier_index(f, n1, fs)?,
            None => nearest_index_for_angle(f, n1)?,
        };
        if seen.insert(j) {
            indices.push(j);
        }
    }
    Ok(indices)
}

#[derive(Clone, Serialize)]
struct SummaryRow {
    freq_index: i64,
    freq_index2: i64,
    lambda: f64,
    hz: Option<f64>,
    method: &'static str,
    status: &'static str,
    tau: Option<f64>,
    edge_count: Option<usize>,
    ebic: Option<f64>,
    iterations: Option<usize>,
    converged: Option<bool>,
    kkt_residual: Option<f64>,
    message: String,
}

fn write_estimate(dir: &Path, method: Method, est: &DifferenceEstimate) -> Result<()> {
    let name = method.name();
    write_real_csv(est.matrix(), dir.join(format!("{name}_delta.csv")))?;
    write_complex_csv(&est.delta_complex, dir.join(format!("{name}_complex.csv")))?;
    Ok(())
}

fn write_trace(dir: &Path, method: Method, records: &[TuningRecord]) -> Result<()> {
    let path = dir.join(format!("{}_tuning.csv", method.name()));
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_tuning_trace(records, file)?;
    Ok(())
}

fn status_of(e: &SddError) -> &'static str {
    match e {
        SddError::Singular { .. } => "singular",
        _ => "error",
    }
}

/// Writes one frequency's files and returns its summary rows plus the SDD
/// failure, if any.
fn write_frequency(
    out: &Path,
    mut r: FrequencyResult,
    fs_hz: Option<f64>,
    methods: &[Method],
) -> Result<(Vec<SummaryRow>, Option<SddError>)> {
    let j = r.target.index1;
    let dir = freq_dir(out, j)?;
    write_complex_csv(&r.spectral1.matrix, dir.join("spectral1.csv"))?;
    write_complex_csv(&r.spectral2.matrix, dir.join("spectral2.csv"))?;
    let mut rows = Vec::new();
    let mut sdd_failure = None;
    for &m in methods {
        let base = SummaryRow {
            freq_index: j,
            freq_index2: r.target.index2,
            lambda: r.target.lambda,
            hz: fs_hz.map(|fs| r.target.lambda * fs / (2.0 * std::f64::consts::PI)),
            method: m.name(),
            status: "ok",
            tau: None,
            edge_count: None,
            ebic: None,
            iterations: None,
            converged: None,
            kkt_residual: None,
            message: String::new(),
        };
        let tuned = |records: &[TuningRecord], sel: &TuningRecord, est: &DifferenceEstimate| {
            write_estimate(&dir, m, est)?;
            write_trace(&dir, m, records)?;
            Ok::<_, anyhow::Error>(SummaryRow {
                tau: Some(sel.tau),
                edge_count: Some(sel.edge_count),
                ebic: Some(sel.ebic),
                iterations: est.diagnostics.as_ref().map(|d| d.iterations),
                converged: Some(est.converged()),
                kkt_residual: est.kkt_residual(),
                ..base.clone()
            })
        };
        let outcome: std::result::Result<SummaryRow, SddError> = match m {
            Method::Sdd => match r.sdd.take() {
                Some(Ok(t)) => Ok(tuned(&t.records, &t.selection.record, &t.estimate)?),
                Some(Err(e)) => Err(e),
                None => continue,
            },
            Method::Hard => match r.hard.take() {
                Some(Ok(t)) => Ok(tuned(&t.records, &t.selection.record, &t.estimate)?),
                Some(Err(e)) => Err(e),
                None => continue,
            },
            Method::Naive => match r.naive.take() {
                Some(Ok(est)) => {
                    write_estimate(&dir, m, &est)?;
                    Ok(SummaryRow {
                        edge_count: Some(count_edges_matrix(
                            est.matrix(),
                            est.p(),
                            DEFAULT_EDGE_THRESHOLD,
                        )),
                        ..base.clone()
                    })
                }
                Some(Err(e)) => Err(e),
                None => continue,
            },
        };
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => {
                fs::write(dir.join(format!("{}_error.txt", m.name())), format!("{e}\n"))?;
                rows.push(SummaryRow {
                    status: status_of(&e),
                    message: e.to_string(),
                    ..base
                });
                if m == Method::Sdd {
                    sdd_failure = Some(e.at_frequency(j));
                }
            }
        }
    }
    Ok((rows, sdd_failure))
}

fn estimate(c: &EstimateRun, run: &RunConfig) -> Result<()> {
    prepare_out(&c.out)?;
    let mut p1 = load_panel(&c.condition1, c.layout.into())?;
    let mut p2 = load_panel(&c.condition2, c.layout.into())?;
    if let Some(fs) = c.fs {
        p1 = p1.with_sampling_rate(fs)?;
        p2 = p2.with_sampling_rate(fs)?;
    }
    let conditions = Conditions::new(&p1, &p2)?;
    let indices = resolve_indices(c, p1.n())?;
    let config = EstimateConfig {
        bandwidth: c.bandwidth,
        tuning: TuningConfig {
            path_len: c.path_len,
            gamma: c.gamma,
            ..TuningConfig::default()
        },
        methods: c.methods.clone(),
    };
    let jobs = if c.jobs == 0 {
        std::thread::available_parallelism()
            .map_or(1, |n| n.get())
            .min(indices.len().max(1))
    } else {
        c.jobs
    };
    let results = estimate_frequencies(&conditions, &indices, &config, jobs)?;

    let mut summary = csv::Writer::from_path(c.out.join("summary.csv"))?;
    let mut failures: Vec<SddError> = Vec::new();
    let mut failed_indices = Vec::new();
    for (r, &j) in results.into_iter().zip(&indices) {
        match r {
            Ok(r) => {
                let (rows, sdd_failure) = write_frequency(&c.out, r, c.fs, &c.methods)?;
                for row in rows {
                    summary.serialize(row)?;
                }
                if let Some(e) = sdd_failure {
                    failed_indices.push(j);
                    failures.push(e);
                }
            }
            Err(e) => {
                let dir = freq_dir(&c.out, j)?;
                fs::write(dir.join("error.txt"), format!("{e}\n"))?;
                failed_indices.push(j);
                failures.push(e);
            }
        }
    }
    summary.flush()?;

    let n1 = p1.n();
    let n2 = p2.n();
    write_manifest(
        run,
        json!({
            "n1": n1,
            "n2": n2,
            "p": p1.p(),
            "freq_indices": indices,
            "frequencies": indices.iter().map(|&j| fourier_frequency(j, n1)).collect::<Vec<_>>(),
            "bandwidth1": c.bandwidth.unwrap_or_else(|| default_bandwidth(n1)),
            "bandwidth2": c.bandwidth.unwrap_or_else(|| default_bandwidth(n2)),
            "jobs_used": jobs,
            "tuning": config.tuning,
            "edge_threshold": DEFAULT_EDGE_THRESHOLD,
            "hard_zero": HARD_ZERO,
            "failed_freq_indices": failed_indices,
        }),
    )?;

    if let Some(first) = failures.into_iter().next() {
        let count = failed_indices.len();
        return Err(anyhow::Error::new(first)
            .context(format!("{count} of {} frequencies failed", indices.len())));
    }
    Ok(())
}

fn numbered_dirs(root: &Path) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(root).with_context(|| format!("reading {}", root.display()))? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            if let Some(j) = entry.file_name().to_str().and_then(|s| s.parse::<i64>().ok()) {
                out.push(j);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

struct MethodOutcome {
    method: Method,
    report: Option<MetricsReport>,
    failed: Vec<i64>,
}

fn evaluate(c: &EvaluateConfig, run: &RunConfig) -> Result<()> {
    prepare_out(&c.out)?;
    let indices = numbered_dirs(&c.estimates)?;
    if indices.is_empty() {
        bail!(SddError::Structure(format!(
            "no per-frequency directories in {}",
            c.estimates.display()
        )));
    }
    let mut outcomes = Vec::new();
    for method in Method::ALL {
        let name = method.name();
        let mut per_freq = Vec::new();
        let mut failed = Vec::new();
        let mut seen = false;
        for &j in &indices {
            let dir = c.estimates.join(j.to_string());
            let est_path = dir.join(format!("{name}_delta.csv"));
            if est_path.exists() {
                seen = true;
                let truth_path = c.truth.join(j.to_string()).join("truth.csv");
                if !truth_path.exists() {
                    bail!(SddError::Structure(format!(
                        "no ground truth for frequency index {j} at {}",
                        truth_path.display()
                    )));
                }
                let est = read_real_csv(&est_path)?;
                let truth = read_real_csv(&truth_path)?;
                let mut m = score(&est, &truth, c.edge_tol).map_err(|e| e.at_frequency(j))?;
                m.freq_index = Some(j);
                per_freq.push(m);
            } else if dir.join(format!("{name}_error.txt")).exists() || dir.join("error.txt").exists()
            {
                seen = true;
                failed.push(j);
            }
        }
        if !seen {
            continue;
        }
        let report = if per_freq.is_empty() {
            None
        } else {
            Some(aggregate(&per_freq)?)
        };
        if let Some(report) = &report {
            fs::write(c.out.join(format!("metrics_{name}.json")), report.to_json()? + "\n")?;
            report.write_csv(fs::File::create(c.out.join(format!("metrics_{name}.csv")))?)?;
        }
        outcomes.push(MethodOutcome { method, report, failed });
    }

    let mut table = csv::Writer::from_path(c.out.join("table.csv"))?;
    let header = [
        "method",
        "true_edges",
        "est_edges",
        "precision",
        "recall",
        "accuracy",
        "rrmse",
        "failed_frequencies",
    ];
    table.write_record(header)?;
    println!("{}", header.join("\t"));
    for o in &outcomes {
        let cells: Vec<String> = match &o.report {
            Some(r) => r.table_row().to_vec(),
            None => vec!["-".to_string(); 6],
        };
        let mut record = vec![o.method.name().to_string()];
        record.extend(cells);
        record.push(o.failed.len().to_string());
        println!("{}", record.join("\t"));
        table.write_record(&record)?;
    }
    table.flush()?;
    write_manifest(
        run,
        json!({
            "freq_indices": indices,
            "methods": outcomes.iter().map(|o| json!({
                "method": o.method,
                "scored": o.report.as_ref().map_or(0, |r| r.per_frequency.len()),
                "failed_freq_indices": o.failed,
            })).collect::<Vec<_>>(),
        }),
    )
}

fn experiment(c: &ExperimentConfig, run: &RunConfig) -> Result<()> {
    prepare_out(&c.out)?;
    let sim_dir = c.out.join("simulate");
    let est_dir = c.out.join("estimate");
    let eval_dir = c.out.join("evaluate");
    let sim = RunConfig::Simulate(SimulateConfig {
        setting: c.setting,
        n: c.n,
        seed: c.seed,
        burn_in: c.burn_in,
        grid_count: c.grid_count,
        out: sim_dir.clone(),
    });
    self::run(&sim)?;
    let est = RunConfig::Estimate(EstimateRun {
        condition1: sim_dir.join("condition1.csv"),
        condition2: sim_dir.join("condition2.csv"),
        layout: crate::config::PanelLayout::RowsAreTime,
        freqs: None,
        band: None,
        fs: None,
        bandwidth: c.bandwidth,
        path_len: c.path_len,
        gamma: c.gamma,
        jobs: c.jobs,
        methods: c.methods.clone(),
        grid_count: c.grid_count,
        out: est_dir.clone(),
    });
    // Frequencies where a method failed are still scored for the others.
    let est_result = self::run(&est);
    let eval = RunConfig::Evaluate(EvaluateConfig {
        estimates: est_dir,
        truth: sim_dir,
        edge_tol: c.edge_tol,
        out: eval_dir,
    });
    self::run(&eval)?;
    write_manifest(run, json!({}))?;
    est_result
}
