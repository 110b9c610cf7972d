//! On-disk datasets written by `gen` and read back by `run` and `compare`.
//!
//! Layout: `config.json` and `manifest.json` at the top, and one directory
//! `trialNNN/` per trial holding `measurements`, `p0_hat` (algorithm inputs)
//! and `sparse`, `low_rank`, `basis`, `supports.json` (ground truth, used
//! only for scoring). Matrices are `RPCA` binaries or CSV. Stream CSVs are
//! time-major with columns `t, m_1..m_n` (`x_i`, `l_i` for the truth files);
//! `p0_hat` and `basis` CSVs hold the matrix as is.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use reprocs_core::experiment::TrialData;
use reprocs_core::io::{read_matrix_csv, read_rpca, write_matrix_csv, write_rpca};
use reprocs_core::synth::{subspace_model_from_basis, SupportSequence};
use reprocs_core::{BasisMatrix, ExperimentConfig, StreamSample};
use serde::{Deserialize, Serialize};

use crate::config;
use crate::failure::{CliResult, Failure};
use crate::runner::{create_dir, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Rpca,
    Csv,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Rpca => "rpca",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialInfo {
    index: usize,
    seed: u64,
}

pub fn trial_dir(root: &Path, index: usize) -> PathBuf {
    root.join(format!("trial{index:03}"))
}

fn write_matrix(dir: &Path, stem: &str, m: &DMatrix<f64>, format: Format) -> CliResult<PathBuf> {
    let path = dir.join(format!("{stem}.{}", format.ext()));
    match format {
        Format::Rpca => write_rpca(&path, m)?,
        Format::Csv => write_matrix_csv(&path, m, None)?,
    }
    Ok(path)
}

/// `n × T` stream matrix; `prefix` names the CSV columns.
fn write_stream(dir: &Path, stem: &str, prefix: &str, m: &DMatrix<f64>, format: Format) -> CliResult<PathBuf> {
    if format == Format::Rpca {
        return write_matrix(dir, stem, m, format);
    }
    let path = dir.join(format!("{stem}.csv"));
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=m.nrows()).map(|i| format!("{prefix}_{i}")))
        .collect();
    let mut rows = DMatrix::zeros(m.ncols(), m.nrows() + 1);
    for j in 0..m.ncols() {
        rows[(j, 0)] = (j + 1) as f64;
        for i in 0..m.nrows() {
            rows[(j, i + 1)] = m[(i, j)];
        }
    }
    write_matrix_csv(&path, &rows, Some(&header))?;
    Ok(path)
}

fn read_matrix(dir: &Path, stem: &str) -> CliResult<DMatrix<f64>> {
    read_any(dir, stem, false)
}

fn read_stream(dir: &Path, stem: &str) -> CliResult<DMatrix<f64>> {
    read_any(dir, stem, true)
}

fn read_any(dir: &Path, stem: &str, stream: bool) -> CliResult<DMatrix<f64>> {
    let rpca = dir.join(format!("{stem}.rpca"));
    if rpca.exists() {
        return Ok(read_rpca(&rpca)?);
    }
    let csv = dir.join(format!("{stem}.csv"));
    if csv.exists() {
        let m = read_matrix_csv(&csv, stream)?.1;
        if !stream {
            return Ok(m);
        }
        if m.ncols() == 0 {
            return Err(Failure::config(format!("{}: no columns", csv.display())));
        }
        return Ok(m.columns(1, m.ncols() - 1).transpose());
    }
    Err(Failure::io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("neither {} nor {} exists", rpca.display(), csv.display()),
    )))
}

/// Writes one trial; returns the files written.
pub fn write_trial(root: &Path, index: usize, data: &TrialData, format: Format) -> CliResult<Vec<PathBuf>> {
    let dir = trial_dir(root, index);
    create_dir(&dir)?;
    let n = data.model.n();
    let mut low_rank = DMatrix::zeros(n, data.samples.len());
    for (j, s) in data.samples.iter().enumerate() {
        low_rank.set_column(j, &s.l_true);
    }
    let full = data.model.bases.last().expect("model has a basis");
    let mut files = vec![
        write_stream(&dir, "measurements", "m", &data.measurements(), format)?,
        write_matrix(&dir, "p0_hat", data.p0_hat.as_matrix(), format)?,
        write_stream(&dir, "sparse", "x", &data.sparse_truth(), format)?,
        write_stream(&dir, "low_rank", "l", &low_rank, format)?,
        write_matrix(&dir, "basis", full.as_matrix(), format)?,
    ];
    let supports = dir.join("supports.json");
    write_json(&supports, &data.supports)?;
    files.push(supports);
    let info = dir.join("trial.json");
    write_json(&info, &TrialInfo { index, seed: data.seed })?;
    files.push(info);
    Ok(files)
}

/// The experiment stored with a dataset.
pub fn load_config(root: &Path) -> CliResult<ExperimentConfig> {
    Ok(config::load(&root.join("config.json"))?.experiment)
}

/// Number of consecutive `trialNNN` directories.
pub fn count_trials(root: &Path) -> usize {
    (0..).take_while(|&i| trial_dir(root, i).is_dir()).count()
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(e).context(format!("reading {}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

pub fn load_trial(root: &Path, cfg: &ExperimentConfig, index: usize) -> CliResult<TrialData> {
    let dir = trial_dir(root, index);
    let ctx = |f: Failure| f.context(format!("loading {}", dir.display()));
    let info: TrialInfo = read_json(&dir.join("trial.json")).map_err(ctx)?;
    let m = read_stream(&dir, "measurements").map_err(ctx)?;
    let p0 = read_matrix(&dir, "p0_hat").map_err(ctx)?;
    let x = read_stream(&dir, "sparse").map_err(ctx)?;
    let l = read_stream(&dir, "low_rank").map_err(ctx)?;
    let basis = read_matrix(&dir, "basis").map_err(ctx)?;
    let supports: SupportSequence = read_json(&dir.join("supports.json")).map_err(ctx)?;
    let (n, t_max) = (cfg.model.n, cfg.model.t_max);
    for (name, mat) in [("measurements", &m), ("sparse", &x), ("low_rank", &l)] {
        if mat.shape() != (n, t_max) {
            return Err(ctx(Failure::config(format!(
                "{name} is {}×{}, config expects {n}×{t_max}",
                mat.nrows(),
                mat.ncols()
            ))));
        }
    }
    let p0_hat = BasisMatrix::new(p0, 1e-8).map_err(|e| ctx(e.into()))?;
    let model = subspace_model_from_basis(&cfg.model, BasisMatrix::new(basis, 1e-8)?, info.seed).map_err(|e| ctx(e.into()))?;
    let rank = model.rank();
    let samples = (0..t_max)
        .map(|j| StreamSample {
            t: j + 1,
            m: m.column(j).into_owned(),
            x_true: x.column(j).into_owned(),
            l_true: l.column(j).into_owned(),
            a_true: DVector::zeros(rank),
        })
        .collect();
    Ok(TrialData {
        seed: info.seed,
        model,
        supports,
        samples,
        p0_hat,
    })
}
