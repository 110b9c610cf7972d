//! Batch principal components pursuit,
//! `min ‖L‖_* + λ‖S‖₁ s.t. L + S = M`, by the inexact augmented Lagrangian
//! method.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sorted_symmetric_eigen, spectral_norm};
use crate::solver::soft_threshold;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcpOptions {
    /// `None` selects `1/√max(n, t)`.
    pub lambda: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    /// Penalty growth factor.
    pub rho: f64,
    /// Initial penalty is `mu_scale / ‖M‖₂`.
    pub mu_scale: f64,
}

impl Default for PcpOptions {
    fn default() -> Self {
        Self {
            lambda: None,
            tol: 1e-7,
            max_iter: 1000,
            rho: 1.5,
            mu_scale: 1.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcpSolution {
    pub l_hat: DMatrix<f64>,
    pub s_hat: DMatrix<f64>,
    pub iterations: usize,
    /// `‖M − L̂ − Ŝ‖_F / ‖M‖_F`.
    pub primal_residual: f64,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub lambda: f64,
}

/// Entrywise `sign(x) max(|x| − τ, 0)`.
pub fn shrink(x: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    x.map(|v| soft_threshold(v, tau))
}

/// Singular value thresholding `U max(Σ − τ, 0) Vᵀ`, computed from the
/// eigendecomposition of the Gram matrix on the thin side. Returns the
/// result and the number of singular values above `τ`.
pub fn svt(x: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, usize) {
    let (n, t) = x.shape();
    if n == 0 || t == 0 {
        return (x.clone(), 0);
    }
    let tall = n > t;
    let gram = if tall { x.tr_mul(x) } else { x * x.transpose() };
    let (vals, vecs) = sorted_symmetric_eigen(&gram);
    let tau2 = tau * tau;
    let keep = vals.iter().take_while(|&&v| v > tau2).count();
    if keep == 0 {
        return (DMatrix::zeros(n, t), 0);
    }
    let u = vecs.columns(0, keep).into_owned();
    let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        keep,
        vals.iter().take(keep).map(|&v| 1.0 - tau / v.sqrt()),
    ));
    // X = U Σ Vᵀ on the short side: SVT(X) = U diag(1 − τ/σ) Uᵀ X
    let out = if tall {
        let xu = x * &u;
        xu * scale * u.transpose()
    } else {
        let ux = u.tr_mul(x);
        &u * scale * ux
    };
    (out, keep)
}

pub fn pcp_solve(m: &DMatrix<f64>, opts: &PcpOptions) -> Result<PcpSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let (n, t) = m.shape();
    let lambda = opts
        .lambda
        .unwrap_or_else(|| 1.0 / (n.max(t).max(1) as f64).sqrt());
    let m_fro = m.norm();
    if m_fro == 0.0 {
        return Ok(PcpSolution {
            l_hat: DMatrix::zeros(n, t),
            s_hat: DMatrix::zeros(n, t),
            iterations: 0,
            primal_residual: 0.0,
            converged: true,
            residual_history: Vec::new(),
            lambda,
        });
    }
    let m_two = spectral_norm(m);
    let m_inf = m.amax();
    let mut y = m / m_two.max(m_inf / lambda);
    let mut mu = opts.mu_scale / m_two;
    let mu_max = mu * 1e7;
    let mut l = DMatrix::zeros(n, t);
    let mut s = DMatrix::zeros(n, t);
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let (l_next, _) = svt(&(m - &s + &y / mu), 1.0 / mu);
        l = l_next;
        s = shrink(&(m - &l + &y / mu), lambda / mu);
        let z = m - &l - &s;
        residual = z.norm() / m_fro;
        history.push(residual);
        if residual < opts.tol {
            return Ok(PcpSolution {
                l_hat: l,
                s_hat: s,
                iterations: it,
                primal_residual: residual,
                converged: true,
                residual_history: history,
                lambda,
            });
        }
        y += &z * mu;
        mu = (mu * opts.rho).min(mu_max);
    }
    Ok(PcpSolution {
        l_hat: l,
        s_hat: s,
        iterations: opts.max_iter,
        primal_residual: residual,
        converged: false,
        residual_history: history,
        lambda,
    })
}

/// `stride, 2·stride, …` up to `t_max`, with `t_max` appended if missing.
pub fn snapshot_times(t_max: usize, stride: usize) -> Vec<usize> {
    if stride == 0 || t_max == 0 {
        return Vec::new();
    }
    let mut out: Vec<usize> = (1..=t_max / stride).map(|k| k * stride).collect();
    if out.last() != Some(&t_max) {
        out.push(t_max);
    }
    out
}

/// Solves PCP on the prefix `M[:, ..t]` for each snapshot time `t` and
/// passes `(t, solution)` to `on_snapshot`.
pub fn pcp_schedule<F>(m: &DMatrix<f64>, times: &[usize], opts: &PcpOptions, mut on_snapshot: F) -> Result<()>
where
    F: FnMut(usize, &PcpSolution) -> Result<()>,
{
    let mut prev = 0;
    for &t in times {
        if t <= prev || t > m.ncols() {
            return Err(Error::InvalidInput(format!(
                "snapshot times must increase within 1..={}",
                m.ncols()
            )));
        }
        let sol = pcp_solve(&m.columns(0, t).into_owned(), opts)?;
        on_snapshot(t, &sol)?;
        prev = t;
    }
    Ok(())
}

/// Sparse estimate for every column, each taken from the first snapshot at
/// or after that column. Also returns the snapshot a column came from.
pub fn pcp_column_estimates(
    m: &DMatrix<f64>,
    times: &[usize],
    opts: &PcpOptions,
) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let (n, t_max) = m.shape();
    let mut x_hat = DMatrix::zeros(n, t_max);
    let mut source = vec![0usize; t_max];
    let mut done = 0;
    pcp_schedule(m, times, opts, |t, sol| {
        for col in done..t {
            x_hat.set_column(col, &sol.s_hat.column(col));
            source[col] = t;
        }
        done = t;
        Ok(())
    })?;
    Ok((x_hat, source))
}
