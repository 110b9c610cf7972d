//! Trial execution and result files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use reprocs_core::analysis::{FrameMetrics, MetricsLog};
use nalgebra::DMatrix;
use reprocs_core::experiment::{
    generate_trial, initial_subspace_error, run_pcp, run_reprocs_with, trial_seed, PcpRun, TrialData,
};
use reprocs_core::io::{format_f64, write_rpca};
use reprocs_core::ExperimentConfig;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Emit;
use crate::dataset;
use crate::failure::{CliResult, Code, Failure};
use crate::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Reprocs,
    Pcp,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Reprocs => "reprocs",
            Algo::Pcp => "pcp",
        }
    }
}

pub struct AlgoRun {
    pub log: MetricsLog,
    pub supports: Vec<Vec<usize>>,
    pub pcp: Option<PcpRun>,
    /// Kept only when requested.
    pub x_hat: Option<DMatrix<f64>>,
    pub seconds: f64,
}

pub struct TrialResult {
    pub index: usize,
    pub seed: u64,
    pub initial_se: f64,
    pub truth: Vec<Vec<usize>>,
    pub runs: Vec<(Algo, AlgoRun)>,
}

impl TrialResult {
    pub fn run(&self, algo: Algo) -> Option<&AlgoRun> {
        self.runs.iter().find(|(a, _)| *a == algo).map(|(_, r)| r)
    }
}

/// Where trial data comes from.
pub enum Source<'a> {
    Generate { cfg: &'a ExperimentConfig, seed: u64 },
    Dataset { cfg: &'a ExperimentConfig, root: &'a Path },
}

impl Source<'_> {
    pub fn config(&self) -> &ExperimentConfig {
        match self {
            Source::Generate { cfg, .. } | Source::Dataset { cfg, .. } => cfg,
        }
    }

    fn trial(&self, index: usize) -> CliResult<TrialData> {
        match self {
            Source::Generate { cfg, seed } => Ok(generate_trial(cfg, trial_seed(*seed, index))?),
            Source::Dataset { cfg, root } => dataset::load_trial(root, cfg, index),
        }
    }
}

fn run_one(source: &Source, index: usize, algos: &[Algo], keep_x_hat: bool) -> CliResult<TrialResult> {
    let cfg = source.config();
    let data = source.trial(index)?;
    let mut runs = Vec::new();
    for &algo in algos {
        let start = Instant::now();
        let mut run = match algo {
            Algo::Reprocs => {
                let n = cfg.model.n;
                let mut supports = Vec::with_capacity(data.samples.len());
                let mut x_hat = keep_x_hat.then(|| DMatrix::zeros(n, data.samples.len()));
                let log = run_reprocs_with(cfg, &data, |s, out| {
                    supports.push(out.support.clone());
                    if let Some(x) = x_hat.as_mut() {
                        x.set_column(s.t - 1, &out.x_hat);
                    }
                })?;
                AlgoRun {
                    log,
                    supports,
                    pcp: None,
                    x_hat,
                    seconds: 0.0,
                }
            }
            Algo::Pcp => {
                let mut pcp = run_pcp(cfg, &data)?;
                let x_hat = keep_x_hat.then(|| std::mem::replace(&mut pcp.x_hat, DMatrix::zeros(0, 0)));
                AlgoRun {
                    log: pcp.log.clone(),
                    supports: pcp.supports.clone(),
                    pcp: Some(pcp),
                    x_hat,
                    seconds: 0.0,
                }
            }
        };
        run.seconds = start.elapsed().as_secs_f64();
        if let Some(bad) = run.log.records.iter().find(|r| !r.rel_x_err.is_finite()) {
            return Err(Failure::new(
                Code::Numerical,
                anyhow::anyhow!("{} produced a non-finite error at t = {} (trial {index})", algo.name(), bad.t),
            ));
        }
        runs.push((algo, run));
    }
    Ok(TrialResult {
        index,
        seed: data.seed,
        initial_se: initial_subspace_error(&data),
        truth: data.samples.iter().map(|s| s.support()).collect(),
        runs,
    })
}

/// Runs `trials` trials in parallel; results come back in trial order.
pub fn run_trials(source: &Source, trials: usize, algos: &[Algo], keep_x_hat: bool) -> CliResult<Vec<TrialResult>> {
    (0..trials)
        .into_par_iter()
        .map(|i| run_one(source, i, algos, keep_x_hat))
        .collect()
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(e).context(format!("creating {}", dir.display())))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Failure::io(e).context(format!("writing {}", path.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, text)
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Failure::io(e).context(format!("writing {}", path.display())))
}

fn csv_fail(path: &Path) -> impl Fn(csv::Error) -> Failure + '_ {
    move |e| Failure::io(e).context(format!("writing {}", path.display()))
}

const METRIC_COLUMNS: [&str; 6] = ["t", "se", "x_err", "rel_x_err", "support_exact", "solver_iters"];

pub fn write_metrics_csv(path: &Path, log: &MetricsLog) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let fail = csv_fail(path);
    w.write_record(METRIC_COLUMNS).map_err(&fail)?;
    for r in &log.records {
        w.write_record([
            r.t.to_string(),
            r.se.map(format_f64).unwrap_or_default(),
            format_f64(r.x_err),
            format_f64(r.rel_x_err),
            (r.support_exact as u8).to_string(),
            r.solver_iters.to_string(),
        ])
        .map_err(&fail)?;
    }
    w.flush().map_err(|e| Failure::io(e).context(format!("writing {}", path.display())))
}

/// Per-frame averages across trials.
pub struct MeanCurve {
    pub t: Vec<usize>,
    pub se: Vec<Option<f64>>,
    pub x_err: Vec<f64>,
    pub rel_x_err: Vec<f64>,
    pub support_exact: Vec<f64>,
}

pub fn mean_curve(logs: &[&MetricsLog]) -> MeanCurve {
    let len = logs.iter().map(|l| l.len()).min().unwrap_or(0);
    let k = logs.len() as f64;
    let avg = |i: usize, f: &dyn Fn(&FrameMetrics) -> f64| logs.iter().map(|l| f(&l.records[i])).sum::<f64>() / k;
    MeanCurve {
        t: (0..len).map(|i| logs[0].records[i].t).collect(),
        se: (0..len)
            .map(|i| {
                logs.iter()
                    .map(|l| l.records[i].se)
                    .sum::<Option<f64>>()
                    .map(|s| s / k)
            })
            .collect(),
        x_err: (0..len).map(|i| avg(i, &|r| r.x_err)).collect(),
        rel_x_err: (0..len).map(|i| avg(i, &|r| r.rel_x_err)).collect(),
        support_exact: (0..len).map(|i| avg(i, &|r| r.support_exact as u8 as f64)).collect(),
    }
}

pub fn write_mean_csv(path: &Path, c: &MeanCurve) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let fail = csv_fail(path);
    w.write_record(["t", "se", "x_err", "rel_x_err", "support_exact"]).map_err(&fail)?;
    for i in 0..c.t.len() {
        w.write_record([
            c.t[i].to_string(),
            c.se[i].map(format_f64).unwrap_or_default(),
            format_f64(c.x_err[i]),
            format_f64(c.rel_x_err[i]),
            format_f64(c.support_exact[i]),
        ])
        .map_err(&fail)?;
    }
    w.flush().map_err(|e| Failure::io(e).context(format!("writing {}", path.display())))
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = v.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    if k == 0 {
        f64::NAN
    } else {
        s / k as f64
    }
}

/// Summary of one algorithm over all trials.
pub fn summarize(cfg: &ExperimentConfig, algo: Algo, results: &[TrialResult]) -> Value {
    let runs: Vec<&AlgoRun> = results
        .iter()
        .filter_map(|r| r.run(algo))
        .collect();
    let logs: Vec<&MetricsLog> = runs.iter().map(|r| &r.log).collect();
    let all = || logs.iter().flat_map(|l| l.records.iter());
    let per_trial: Vec<Value> = results
        .iter()
        .zip(&runs)
        .map(|(res, run)| {
            json!({
                "trial": res.index,
                "seed": res.seed,
                "initial_se": res.initial_se,
                "mean_rel_x_err": mean(run.log.records.iter().map(|r| r.rel_x_err)),
                "support_exact_fraction": mean(run.log.records.iter().map(|r| r.support_exact as u8 as f64)),
                "seconds": run.seconds,
            })
        })
        .collect();
    let mut out = json!({
        "algo": algo,
        "trials": runs.len(),
        "frames": logs.first().map_or(0, |l| l.len()),
        "mean_rel_x_err": mean(all().map(|r| r.rel_x_err)),
        "mean_x_err": mean(all().map(|r| r.x_err)),
        "support_exact_fraction": mean(all().map(|r| r.support_exact as u8 as f64)),
        "flagged_frames": all().filter(|r| r.flagged).count(),
        "per_trial": per_trial,
    });
    if algo == Algo::Reprocs {
        // trial-mean subspace error over each of the K windows after a change
        let windows: Vec<Vec<Option<f64>>> = cfg
            .model
            .change_times
            .iter()
            .map(|&tj| {
                (1..=cfg.k)
                    .map(|k| {
                        let (lo, hi) = (tj + (k - 1) * cfg.alpha, tj + k * cfg.alpha - 1);
                        let v: Vec<f64> = logs
                            .iter()
                            .filter_map(|l| l.window_mean(lo, hi).and_then(|w| w.se))
                            .collect();
                        (!v.is_empty()).then(|| mean(v.into_iter()))
                    })
                    .collect()
            })
            .collect();
        out["pca_window_se"] = json!(windows);
    } else {
        let finals: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.pcp.as_ref())
            .flat_map(|p| p.final_rel_x_err.iter().copied())
            .collect();
        out["final_snapshot_mean_rel_x_err"] = json!(mean(finals.into_iter()));
        out["snapshot_stride"] = json!(cfg.pcp_stride());
        out["all_snapshots_converged"] = json!(runs
            .iter()
            .filter_map(|r| r.pcp.as_ref())
            .all(|p| p.converged.iter().all(|&c| c)));
    }
    out
}

/// Writes the per-algorithm files selected by `emit`; returns their paths.
pub fn write_algo_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    algo: Algo,
    results: &[TrialResult],
    emit: &[Emit],
    raster_frames: usize,
) -> CliResult<Vec<PathBuf>> {
    let name = algo.name();
    let mut files = Vec::new();
    let mut logs = Vec::new();
    for res in results {
        let Some(run) = res.run(algo) else {
            continue;
        };
        if emit.contains(&Emit::Csv) {
            let path = dir.join(format!("{name}_trial{:03}.csv", res.index));
            write_metrics_csv(&path, &run.log)?;
            files.push(path);
        }
        if let (true, Some(x)) = (emit.contains(&Emit::Xhat), &run.x_hat) {
            let path = dir.join(format!("{name}_xhat_trial{:03}.rpca", res.index));
            write_rpca(&path, x)?;
            files.push(path);
        }
        logs.push(&run.log);
    }
    if logs.is_empty() {
        return Ok(files);
    }
    let curve = mean_curve(&logs);
    if emit.contains(&Emit::Csv) {
        let path = dir.join(format!("{name}_mean.csv"));
        write_mean_csv(&path, &curve)?;
        files.push(path);
    }
    if emit.contains(&Emit::Json) {
        let path = dir.join(format!("{name}_aggregate.json"));
        write_json(&path, &summarize(cfg, algo, results))?;
        files.push(path);
    }
    if !emit.contains(&Emit::Svg) {
        return Ok(files);
    }
    let mut series = vec![svg::Series {
        label: "rel. error of x".into(),
        points: curve.t.iter().zip(&curve.rel_x_err).map(|(&t, &v)| (t as f64, v)).collect(),
    }];
    if !curve.se.is_empty() && curve.se.iter().all(Option::is_some) {
        series.push(svg::Series {
            label: "subspace error".into(),
            points: curve.t.iter().zip(&curve.se).map(|(&t, v)| (t as f64, v.unwrap())).collect(),
        });
    }
    let title = format!("{name}: mean over {} trial(s)", logs.len());
    let path = dir.join(format!("{name}_errors.svg"));
    write_file(&path, svg::log_line_chart(&title, "t", "error", &series))?;
    files.push(path);

    if let Some(path) = write_raster(dir, cfg, algo, &results[0], raster_frames)? {
        files.push(path);
    }
    Ok(files)
}

/// Support raster of one trial, starting at the first change.
pub fn write_raster(
    dir: &Path,
    cfg: &ExperimentConfig,
    algo: Algo,
    res: &TrialResult,
    frames: usize,
) -> CliResult<Option<PathBuf>> {
    let Some(run) = res.run(algo) else {
        return Ok(None);
    };
    let len = res.truth.len();
    let start = cfg.model.change_times.first().copied().unwrap_or(1).clamp(1, len.max(1)) - 1;
    let end = (start + frames).min(len);
    let path = dir.join(format!("{}_support.svg", algo.name()));
    let raster = svg::support_raster(
        &format!("{}: support of trial {}", algo.name(), res.index),
        cfg.model.n,
        start + 1,
        &res.truth[start..end],
        &run.supports[start..end],
    );
    write_file(&path, raster)?;
    Ok(Some(path))
}

/// `(t, mean rel_x_err)` read back from a `<algo>_mean.csv`.
pub fn read_mean_rel_err(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    let fail = |e: csv::Error| Failure::io(e).context(format!("reading {}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(fail)?;
    let headers = r.headers().map_err(fail)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Failure::config(format!("{}: no {name} column", path.display())))
    };
    let (ti, ei) = (col("t")?, col("rel_x_err")?);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(fail)?;
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|_| Failure::config(format!("{}: bad number {:?}", path.display(), &rec[i])))
        };
        out.push((num(ti)?, num(ei)?));
    }
    Ok(out)
}

/// Log-scale overlay of the mean relative error of each method.
pub fn comparison_chart(series: Vec<(Algo, Vec<(f64, f64)>)>) -> String {
    let series: Vec<svg::Series> = series
        .into_iter()
        .map(|(algo, points)| svg::Series {
            label: algo.name().into(),
            points,
        })
        .collect();
    svg::log_line_chart("relative error of the sparse estimate", "t", "mean rel. error", &series)
}

pub fn curve_points(results: &[TrialResult], algo: Algo) -> Option<Vec<(f64, f64)>> {
    let logs: Vec<&MetricsLog> = results.iter().filter_map(|r| r.run(algo)).map(|r| &r.log).collect();
    if logs.is_empty() {
        return None;
    }
    let c = mean_curve(&logs);
    Some(c.t.iter().zip(&c.rel_x_err).map(|(&t, &v)| (t as f64, v)).collect())
}
