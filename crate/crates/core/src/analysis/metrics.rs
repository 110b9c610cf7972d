use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, BasisMatrix};

/// `‖(I − P̂P̂ᵀ)P‖₂`, clamped to `[0, 1]`.
pub fn subspace_error(p_hat: &BasisMatrix, p: &BasisMatrix) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    let resid = p_hat.project_out_matrix(p.as_matrix());
    spectral_norm(&resid).clamp(0.0, 1.0)
}

/// Per-frame scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub t: usize,
    /// Absent for methods without a subspace estimate.
    pub se: Option<f64>,
    pub x_err: f64,
    /// `‖x̂ − x‖ / ‖x‖`, or the absolute error when `x = 0`.
    pub rel_x_err: f64,
    pub support_exact: bool,
    pub precision: f64,
    pub recall: f64,
    pub solver_iters: usize,
    pub seconds: f64,
    /// Set when the frame left the theorem's regime (e.g. `|T̂| > 2s`).
    pub flagged: bool,
}

pub fn frame_metrics(
    t: usize,
    x_hat: &DVector<f64>,
    support_hat: &[usize],
    x_true: &DVector<f64>,
    se: Option<f64>,
) -> FrameMetrics {
    let truth: Vec<usize> = (0..x_true.len()).filter(|&i| x_true[i] != 0.0).collect();
    let hits = support_hat.iter().filter(|i| truth.binary_search(i).is_ok()).count();
    let precision = if support_hat.is_empty() {
        1.0
    } else {
        hits as f64 / support_hat.len() as f64
    };
    let recall = if truth.is_empty() {
        1.0
    } else {
        hits as f64 / truth.len() as f64
    };
    let x_err = (x_hat - x_true).norm();
    let norm = x_true.norm();
    FrameMetrics {
        t,
        se,
        x_err,
        rel_x_err: if norm > 0.0 { x_err / norm } else { x_err },
        support_exact: hits == truth.len() && hits == support_hat.len(),
        precision,
        recall,
        solver_iters: 0,
        seconds: 0.0,
        flagged: false,
    }
}

/// Mean scores over a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMean {
    pub start: usize,
    pub end: usize,
    pub frames: usize,
    pub se: Option<f64>,
    pub x_err: f64,
    pub rel_x_err: f64,
    pub support_exact: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub records: Vec<FrameMetrics>,
}

impl MetricsLog {
    pub fn push(&mut self, rec: FrameMetrics) {
        self.records.push(rec);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Means over records with `start ≤ t ≤ end`; `None` if there are none.
    pub fn window_mean(&self, start: usize, end: usize) -> Option<WindowMean> {
        let sel: Vec<&FrameMetrics> = self
            .records
            .iter()
            .filter(|r| r.t >= start && r.t <= end)
            .collect();
        if sel.is_empty() {
            return None;
        }
        let k = sel.len() as f64;
        let se = if sel.iter().all(|r| r.se.is_some()) {
            Some(sel.iter().map(|r| r.se.unwrap()).sum::<f64>() / k)
        } else {
            None
        };
        Some(WindowMean {
            start,
            end,
            frames: sel.len(),
            se,
            x_err: sel.iter().map(|r| r.x_err).sum::<f64>() / k,
            rel_x_err: sel.iter().map(|r| r.rel_x_err).sum::<f64>() / k,
            support_exact: sel.iter().filter(|r| r.support_exact).count() as f64 / k,
        })
    }

    /// Window means over `[t_j + (k−1)α, t_j + kα − 1]` for `k = 1..=K`.
    pub fn pca_windows(&self, t_j: usize, alpha: usize, k_max: usize) -> Vec<Option<WindowMean>> {
        (1..=k_max)
            .map(|k| self.window_mean(t_j + (k - 1) * alpha, t_j + k * alpha - 1))
            .collect()
    }
}

/// Scores aligned estimate and truth sequences (`t` starts at 1).
pub fn compute_metrics(
    x_hat: &[DVector<f64>],
    supports_hat: &[Vec<usize>],
    x_true: &[DVector<f64>],
    se: Option<&[f64]>,
) -> Result<MetricsLog> {
    let n = x_true.len();
    if x_hat.len() != n || supports_hat.len() != n || se.is_some_and(|s| s.len() != n) {
        return Err(Error::Dimension("metric inputs have different lengths".into()));
    }
    let mut log = MetricsLog::default();
    for i in 0..n {
        if x_hat[i].len() != x_true[i].len() {
            return Err(Error::Dimension(format!("frame {} has mismatched vector lengths", i + 1)));
        }
        log.push(frame_metrics(
            i + 1,
            &x_hat[i],
            &supports_hat[i],
            &x_true[i],
            se.map(|s| s[i]),
        ));
    }
    Ok(log)
}
