//! Seeded end-to-end trials: data generation, ReProCS and the PCP comparator
//! on the same stream.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::{compute_metrics, subspace_error, xi_for, zeta_bound, MetricsLog};
use crate::error::{Error, Result};
use crate::linalg::BasisMatrix;
use crate::pcp::{pcp_schedule, snapshot_times, PcpOptions};
use crate::reprocs::{run_stream_with, FrameOutput, ReProCSParams};
use crate::rng::derive_seed;
use crate::solver::BpdnOptions;
use crate::synth::{
    gen_subspace_model, gen_support_everyframe, gen_support_example1, gen_support_probabilistic,
    gen_support_uniform, move_every_for_alpha, perturb_initial_estimate, synthesize_stream, ModelConfig, StreamSample,
    SubspaceModel, SupportModel, SupportSequence, THEOREM_MOVE_DIVISOR,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub s: usize,
    pub support: SupportModel,
    /// Nonzero sparse entries are drawn from `U[lo, hi]`.
    pub x_range: (f64, f64),
    /// Entry noise added to `P_(0)` to form the initial estimate.
    pub p0_noise: f64,
    pub alpha: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// Defaults to the theorem's `√c γ_new + √ζ(√r + √c)`.
    #[serde(default)]
    pub xi: Option<f64>,
    /// Defaults to `x_min / 2`, the middle of `[7ξ, x_min − 7ξ]`.
    #[serde(default)]
    pub omega: Option<f64>,
    /// PCP snapshot spacing; defaults to `2α`.
    #[serde(default)]
    pub pcp_stride: Option<usize>,
    #[serde(default)]
    pub solver: BpdnOptions,
    #[serde(default)]
    pub pcp: PcpOptions,
}

impl ExperimentConfig {
    /// Correlated supports: a block of 20 moving by 10 every 18 frames.
    pub fn fig1() -> Self {
        Self {
            model: ModelConfig::simulation(),
            s: 20,
            support: SupportModel::Example1 {
                step: 10,
                move_every: 18,
            },
            x_range: (2.0, 6.0),
            p0_noise: 1e-11,
            alpha: 800,
            k: 6,
            xi: None,
            omega: None,
            pcp_stride: None,
            solver: BpdnOptions::default(),
            pcp: PcpOptions::default(),
        }
    }

    /// As [`fig1`](Self::fig1) with independent uniform supports.
    pub fn fig2() -> Self {
        Self {
            support: SupportModel::Uniform,
            ..Self::fig1()
        }
    }

    /// As [`fig1`](Self::fig1) with the block moving every `⌊α/200⌋` frames,
    /// the rate the correctness theorem allows.
    pub fn fig1_theorem() -> Self {
        let base = Self::fig1();
        Self {
            support: SupportModel::Example1 {
                step: 10,
                move_every: move_every_for_alpha(base.alpha, THEOREM_MOVE_DIVISOR),
            },
            ..base
        }
    }

    pub const PRESETS: [&'static str; 3] = ["fig1", "fig2", "fig1-theorem"];

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "fig1" => Some(Self::fig1()),
            "fig2" => Some(Self::fig2()),
            "fig1-theorem" => Some(Self::fig1_theorem()),
            _ => None,
        }
    }

    pub fn pcp_stride(&self) -> usize {
        self.pcp_stride.unwrap_or(2 * self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s > self.model.n {
            return Err(Error::Config(format!("s = {} exceeds n = {}", self.s, self.model.n)));
        }
        if !(self.x_range.0 > 0.0) || self.x_range.1 < self.x_range.0 {
            return Err(Error::Config("x_range must satisfy 0 < lo ≤ hi".into()));
        }
        if !(self.p0_noise >= 0.0) {
            return Err(Error::Config("p0_noise must be nonnegative".into()));
        }
        if self.pcp_stride() == 0 {
            return Err(Error::Config("pcp_stride must be positive".into()));
        }
        Ok(())
    }

    /// Algorithm parameters for a generated model.
    pub fn reprocs_params(&self, model: &SubspaceModel) -> ReProCSParams {
        let xi = self.xi.unwrap_or_else(|| {
            let r = model.rank().max(1);
            let zeta = zeta_bound(r, model.f, self.model.gamma);
            xi_for(model.c_max(), r, self.model.gamma_new, zeta)
        });
        ReProCSParams {
            xi,
            omega: self.omega.unwrap_or(self.x_range.0 / 2.0),
            alpha: self.alpha,
            k: self.k,
            change_times: self.model.change_times.clone(),
            c_new: self.model.c_new.clone(),
            max_support: Some(2 * self.s),
            solver: self.solver,
        }
    }
}

pub fn gen_supports(cfg: &ExperimentConfig, seed: u64) -> Result<SupportSequence> {
    let (n, s, t_max) = (cfg.model.n, cfg.s, cfg.model.t_max);
    match cfg.support {
        SupportModel::Example1 { step, move_every } => gen_support_example1(n, s, step, move_every, t_max, seed),
        SupportModel::Probabilistic { q, sigma2 } => gen_support_probabilistic(n, s, q, sigma2, t_max, seed),
        SupportModel::EveryFrame { max_step } => gen_support_everyframe(n, s, max_step, t_max, seed),
        SupportModel::Uniform => gen_support_uniform(n, s, t_max, seed),
        SupportModel::Custom => Err(Error::Config("custom supports cannot be generated".into())),
    }
}

/// Everything drawn for one trial.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub seed: u64,
    pub model: SubspaceModel,
    pub supports: SupportSequence,
    pub samples: Vec<StreamSample>,
    pub p0_hat: BasisMatrix,
}

impl TrialData {
    /// `[m_1 … m_t]`.
    pub fn measurements(&self) -> DMatrix<f64> {
        columns(self.model.n(), self.samples.iter().map(|s| &s.m))
    }

    pub fn sparse_truth(&self) -> DMatrix<f64> {
        columns(self.model.n(), self.samples.iter().map(|s| &s.x_true))
    }
}

fn columns<'a>(n: usize, cols: impl ExactSizeIterator<Item = &'a DVector<f64>>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.enumerate() {
        out.set_column(j, c);
    }
    out
}

/// Seed of trial `index` under base seed `seed`.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

pub fn generate_trial(cfg: &ExperimentConfig, seed: u64) -> Result<TrialData> {
    cfg.validate()?;
    let model = gen_subspace_model(&cfg.model, seed)?;
    let supports = gen_supports(cfg, seed)?;
    let samples = synthesize_stream(&model, &supports, cfg.x_range, seed)?.collect();
    let (p0_hat, _) = perturb_initial_estimate(&model.bases[0], cfg.p0_noise, seed)?;
    Ok(TrialData {
        seed,
        model,
        supports,
        samples,
        p0_hat,
    })
}

pub fn run_reprocs(cfg: &ExperimentConfig, data: &TrialData) -> Result<MetricsLog> {
    run_reprocs_with(cfg, data, |_, _| {})
}

pub fn run_reprocs_with<F>(cfg: &ExperimentConfig, data: &TrialData, on_frame: F) -> Result<MetricsLog>
where
    F: FnMut(&StreamSample, &FrameOutput),
{
    run_stream_with(
        data.samples.iter().cloned(),
        cfg.reprocs_params(&data.model),
        data.p0_hat.clone(),
        &data.model,
        on_frame,
    )
}

/// Per-column PCP scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcpRun {
    pub snapshots: Vec<usize>,
    /// Snapshot each column's estimate came from.
    pub source: Vec<usize>,
    /// Column `t` scored with the first snapshot at or after `t`.
    pub log: MetricsLog,
    /// Column `t` is the sparse estimate scored in `log`.
    pub x_hat: DMatrix<f64>,
    /// Entries of each column's estimate above `ω`.
    pub supports: Vec<Vec<usize>>,
    /// `rel_x_err` of every column under the last (full-data) snapshot.
    pub final_rel_x_err: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
}

fn rel_err(est: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    let err = (est - truth).norm();
    let norm = truth.norm();
    if norm > 0.0 {
        err / norm
    } else {
        err
    }
}

pub fn run_pcp(cfg: &ExperimentConfig, data: &TrialData) -> Result<PcpRun> {
    let m = data.measurements();
    let t_max = m.ncols();
    let snapshots = snapshot_times(t_max, cfg.pcp_stride());
    let truth: Vec<DVector<f64>> = data.samples.iter().map(|s| s.x_true.clone()).collect();
    let mut x_hats = vec![DVector::zeros(m.nrows()); t_max];
    let mut source = vec![0; t_max];
    let mut final_rel_x_err = Vec::new();
    let mut iterations = Vec::new();
    let mut converged = Vec::new();
    let mut done = 0;
    pcp_schedule(&m, &snapshots, &cfg.pcp, |t, sol| {
        for col in done..t {
            x_hats[col] = sol.s_hat.column(col).into_owned();
            source[col] = t;
        }
        done = t;
        iterations.push(sol.iterations);
        converged.push(sol.converged);
        if t == t_max {
            final_rel_x_err = (0..t)
                .map(|j| rel_err(&sol.s_hat.column(j).into_owned(), &truth[j]))
                .collect();
        }
        Ok(())
    })?;
    // support estimate: entries above the threshold ReProCS uses
    let omega = cfg.omega.unwrap_or(cfg.x_range.0 / 2.0);
    let supports: Vec<Vec<usize>> = x_hats
        .iter()
        .map(|x| (0..x.len()).filter(|&i| x[i].abs() > omega).collect())
        .collect();
    let log = compute_metrics(&x_hats, &supports, &truth, None)?;
    Ok(PcpRun {
        snapshots,
        source,
        log,
        x_hat: columns(m.nrows(), x_hats.iter()),
        supports,
        final_rel_x_err,
        iterations,
        converged,
    })
}

/// Subspace error of `P̂_(0)` against the true `P_(0)`.
pub fn initial_subspace_error(data: &TrialData) -> f64 {
    subspace_error(&data.p0_hat, &data.model.bases[0])
}
