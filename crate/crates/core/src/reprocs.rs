//! The online ReProCS state machine.
//!
//! Each frame `m_t` is projected away from the current subspace estimate,
//! the sparse part is recovered by BPDN, thresholded and refined by least
//! squares, and the remainder `ℓ̂_t = m_t − x̂_t` is buffered. After each
//! change time `t_j` the estimate of the new directions is recomputed by
//! projection-PCA at the end of each of `K` windows of `α` frames.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::{frame_metrics, subspace_error, MetricsLog};
use crate::error::{Error, Result};
use crate::linalg::{gram_schmidt, normalize_sign, sorted_symmetric_eigen, BasisMatrix};
use crate::solver::{bpdn_solve, BpdnOptions, BpdnProblem, ComplementProjector};
use crate::synth::{StreamSample, SubspaceModel};

/// Singular values of `Φ_T̂` below this make the LS step fail.
pub const LS_SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReProCSParams {
    pub xi: f64,
    pub omega: f64,
    pub alpha: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub change_times: Vec<usize>,
    pub c_new: Vec<usize>,
    /// Frames whose estimated support exceeds this size are flagged.
    #[serde(default)]
    pub max_support: Option<usize>,
    #[serde(default)]
    pub solver: BpdnOptions,
}

impl ReProCSParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0) || !(self.omega >= 0.0) {
            return Err(Error::Config("xi and omega must be nonnegative".into()));
        }
        if 7.0 * self.xi > self.omega {
            return Err(Error::Config(format!(
                "omega = {} is below 7 xi = {}",
                self.omega,
                7.0 * self.xi
            )));
        }
        if self.alpha == 0 || self.k == 0 {
            return Err(Error::Config("alpha and K must be at least 1".into()));
        }
        if self.change_times.len() != self.c_new.len() {
            return Err(Error::Config("change_times and c_new differ in length".into()));
        }
        for w in self.change_times.windows(2) {
            if w[1] < w[0] + self.k * self.alpha {
                return Err(Error::Config(format!(
                    "changes at {} and {} are closer than K alpha = {}",
                    w[0],
                    w[1],
                    self.k * self.alpha
                )));
            }
        }
        if self.change_times.first().is_some_and(|&t| t == 0) {
            return Err(Error::Config("time indices start at 1".into()));
        }
        Ok(())
    }
}

/// `(I − P̂P̂ᵀ) m`.
pub fn project(p_hat: &BasisMatrix, m: &DVector<f64>) -> DVector<f64> {
    p_hat.project_out(m)
}

/// `{i : |x_i| > ω}`.
pub fn estimate_support(x_cs: &DVector<f64>, omega: f64) -> Vec<usize> {
    (0..x_cs.len()).filter(|&i| x_cs[i].abs() > omega).collect()
}

/// Least-squares fit of `y` on the columns `T̂` of `Φ = I − P̂P̂ᵀ`, via a QR
/// factorisation of `Φ I_T̂`.
pub fn ls_refine(p_hat: &BasisMatrix, y: &DVector<f64>, support: &[usize]) -> Result<DVector<f64>> {
    let n = y.len();
    let mut x = DVector::zeros(n);
    if support.is_empty() {
        return Ok(x);
    }
    if support.len() > n {
        return Err(Error::Dimension("support larger than n".into()));
    }
    let p = p_hat.as_matrix();
    let mut a = DMatrix::zeros(n, support.len());
    for (k, &i) in support.iter().enumerate() {
        if !p_hat.is_empty() {
            let coeffs = p.row(i).transpose();
            a.set_column(k, &(-(p * coeffs)));
        }
        a[(i, k)] += 1.0;
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let rmin = r.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if rmin < LS_SINGULAR_TOL {
        let sigma_min = a.singular_values().min();
        if sigma_min < LS_SINGULAR_TOL {
            return Err(Error::Singular { sigma_min });
        }
    }
    let rhs = qr.q().tr_mul(y);
    let sol = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::Singular { sigma_min: rmin })?;
    for (k, &i) in support.iter().enumerate() {
        x[i] = sol[k];
    }
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct ProjPcaResult {
    pub q: BasisMatrix,
    /// Leading eigenvalues of `(1/α) D_proj D_projᵀ`.
    pub eigenvalues: Vec<f64>,
    /// The numerical rank of `D_proj` was below the requested count; the
    /// missing directions were filled in deterministically.
    pub degenerate: bool,
}

/// Top `r_extract` eigenvectors of `(1/α) D_proj D_projᵀ`,
/// `D_proj = (I − PPᵀ) D`.
pub fn proj_pca(d: &DMatrix<f64>, p: &BasisMatrix, r_extract: usize) -> Result<ProjPcaResult> {
    let (n, alpha) = d.shape();
    if p.n() != n {
        return Err(Error::Dimension("data and basis have different n".into()));
    }
    if r_extract == 0 {
        return Err(Error::InvalidInput("r_extract must be at least 1".into()));
    }
    if alpha < r_extract {
        return Err(Error::InvalidInput(format!(
            "window of {alpha} columns cannot give {r_extract} directions"
        )));
    }
    if p.rank() + r_extract > n {
        return Err(Error::Dimension("not enough room for new directions".into()));
    }
    let d_proj = p.project_out_matrix(d);
    let scale = d.norm_squared() / alpha as f64;
    let rank_tol = 1e-12 * scale.max(f64::MIN_POSITIVE);

    let (vals, mut dirs) = if alpha < n {
        let gram = d_proj.tr_mul(&d_proj) / alpha as f64;
        let (vals, vecs) = sorted_symmetric_eigen(&gram);
        let mut u = DMatrix::zeros(n, r_extract);
        for i in 0..r_extract {
            if vals[i] > rank_tol {
                let col = &d_proj * vecs.column(i) / (alpha as f64 * vals[i]).sqrt();
                u.set_column(i, &col);
            }
        }
        (vals, u)
    } else {
        let cov = &d_proj * d_proj.transpose() / alpha as f64;
        let (vals, vecs) = sorted_symmetric_eigen(&cov);
        (vals, vecs.columns(0, r_extract).into_owned())
    };
    let eigenvalues: Vec<f64> = vals.iter().take(r_extract).copied().collect();
    let degenerate = eigenvalues.iter().any(|&v| !(v > rank_tol));

    // Re-project and orthonormalise against P; replace null directions by
    // the first standard basis vectors independent of [P Q].
    let good: Vec<usize> = (0..r_extract).filter(|&i| eigenvalues[i] > rank_tol).collect();
    let mut basis = p.as_matrix().clone().resize_horizontally(p.rank() + r_extract, 0.0);
    let mut filled = p.rank();
    for &i in &good {
        basis.set_column(filled, &dirs.column(i));
        filled += 1;
    }
    let mut e = 0;
    while filled < p.rank() + r_extract {
        let mut cand = DVector::zeros(n);
        cand[e] = 1.0;
        e += 1;
        let head = basis.columns(0, filled).into_owned();
        let resid = &cand - &head * head.tr_mul(&cand);
        if resid.norm() > 1e-6 {
            basis.set_column(filled, &resid);
            filled += 1;
        }
    }
    let ortho = gram_schmidt(basis)?;
    dirs = ortho.columns(p.rank(), r_extract).into_owned();
    for i in 0..r_extract {
        let mut col = dirs.column(i).into_owned();
        normalize_sign(&mut col);
        dirs.set_column(i, &col);
    }
    Ok(ProjPcaResult {
        q: BasisMatrix::from_trusted(dirs),
        eigenvalues,
        degenerate,
    })
}

/// Result of one `step`.
#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub t: usize,
    pub x_hat: DVector<f64>,
    pub l_hat: DVector<f64>,
    pub support: Vec<usize>,
    pub solver_iters: usize,
    pub seconds: f64,
    pub flagged: bool,
    /// `(j, k)` when a projection-PCA update ran at the end of this frame.
    pub pca_update: Option<(usize, usize)>,
    pub pca_degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct ReProCSState {
    params: ReProCSParams,
    p_hat: BasisMatrix,
    /// Rank of the committed part `P̂_(j−1)` (the leading columns of `p_hat`).
    committed: usize,
    /// Index of the next or current change.
    j: usize,
    /// Completed PCA steps for change `j`.
    k: usize,
    buffer: Vec<DVector<f64>>,
    last_t: usize,
}

impl ReProCSState {
    pub fn new(params: ReProCSParams, p0: BasisMatrix) -> Result<Self> {
        params.validate()?;
        let committed = p0.rank();
        Ok(Self {
            params,
            p_hat: p0,
            committed,
            j: 0,
            k: 0,
            buffer: Vec::new(),
            last_t: 0,
        })
    }

    pub fn params(&self) -> &ReProCSParams {
        &self.params
    }

    /// `P̂_t`.
    pub fn p_hat(&self) -> &BasisMatrix {
        &self.p_hat
    }

    /// `P̂_(j−1)`.
    pub fn p_hat_star(&self) -> BasisMatrix {
        self.p_hat.leading(self.committed)
    }

    /// Current new-direction estimate `P̂_(j),new,k` (empty outside a PCA phase).
    pub fn p_hat_new(&self) -> BasisMatrix {
        self.p_hat.columns(self.committed, self.p_hat.rank() - self.committed)
    }

    pub fn change_index(&self) -> usize {
        self.j
    }

    pub fn pca_step(&self) -> usize {
        self.k
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn last_t(&self) -> usize {
        self.last_t
    }

    /// Whether `t` lies in the PCA phase `[t_j, t_j + Kα − 1]` of change `j`.
    fn in_pca_phase(&self, t: usize) -> bool {
        match self.params.change_times.get(self.j) {
            Some(&tj) => t >= tj && t < tj + self.params.k * self.params.alpha,
            None => false,
        }
    }

    pub fn step(&mut self, t: usize, m: &DVector<f64>) -> Result<FrameOutput> {
        if t <= self.last_t {
            return Err(Error::InvalidInput(format!(
                "time {t} does not follow {}",
                self.last_t
            )));
        }
        if m.len() != self.p_hat.n() {
            return Err(Error::Dimension(format!(
                "frame has length {} but n = {}",
                m.len(),
                self.p_hat.n()
            )));
        }
        let start = Instant::now();
        // A change whose phase was skipped entirely (t jumped past it).
        while let Some(&tj) = self.params.change_times.get(self.j) {
            if t >= tj + self.params.k * self.params.alpha {
                self.commit();
            } else {
                break;
            }
        }

        let y = project(&self.p_hat, m);
        let phi = ComplementProjector(&self.p_hat);
        let prob = BpdnProblem {
            projector: &phi,
            y: &y,
            xi: self.params.xi,
        };
        let cs = bpdn_solve(&prob, &self.params.solver)?;
        let support = estimate_support(&cs.x, self.params.omega);
        let x_hat = ls_refine(&self.p_hat, &y, &support)?;
        let l_hat = m - &x_hat;
        let flagged = self.params.max_support.is_some_and(|s| support.len() > s);

        let mut pca_update = None;
        let mut pca_degenerate = false;
        if self.in_pca_phase(t) {
            let tj = self.params.change_times[self.j];
            let c = self.params.c_new[self.j];
            let alpha = self.params.alpha;
            let offset = t - tj;
            let k = offset / alpha + 1;
            if offset.is_multiple_of(alpha) {
                self.buffer.clear();
            }
            self.buffer.push(l_hat.clone());
            if offset % alpha == alpha - 1 {
                if c > 0 {
                    let d = DMatrix::from_columns(&self.buffer);
                    let star = self.p_hat_star();
                    let res = proj_pca(&d, &star, c)?;
                    pca_degenerate = res.degenerate;
                    let mut data = star.as_matrix().clone().resize_horizontally(self.committed + c, 0.0);
                    data.columns_mut(self.committed, c).copy_from(res.q.as_matrix());
                    self.p_hat = BasisMatrix::from_trusted(data);
                }
                self.buffer.clear();
                self.k = k;
                pca_update = Some((self.j + 1, k));
                if k == self.params.k {
                    self.commit();
                }
            }
        }
        self.last_t = t;
        Ok(FrameOutput {
            t,
            x_hat,
            l_hat,
            support,
            solver_iters: cs.iterations,
            seconds: start.elapsed().as_secs_f64(),
            flagged,
            pca_update,
            pca_degenerate,
        })
    }

    fn commit(&mut self) {
        self.committed = self.p_hat.rank();
        self.j += 1;
        self.k = 0;
        self.buffer.clear();
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            n: self.p_hat.n(),
            rank: self.p_hat.rank(),
            p_hat: row_major(self.p_hat.as_matrix()),
            committed: self.committed,
            j: self.j,
            k: self.k,
            last_t: self.last_t,
            buffer: self.buffer.iter().map(|v| v.iter().copied().collect()).collect(),
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(cp: Checkpoint) -> Result<Self> {
        cp.params.validate()?;
        if cp.p_hat.len() != cp.n * cp.rank || cp.committed > cp.rank {
            return Err(Error::Parse("checkpoint basis has inconsistent size".into()));
        }
        if cp.buffer.iter().any(|v| v.len() != cp.n) || cp.buffer.len() > cp.params.alpha {
            return Err(Error::Parse("checkpoint buffer has inconsistent size".into()));
        }
        let data = DMatrix::from_row_slice(cp.n, cp.rank, &cp.p_hat);
        Ok(Self {
            p_hat: BasisMatrix::new(data, 1e-8)?,
            committed: cp.committed,
            j: cp.j,
            k: cp.k,
            buffer: cp.buffer.into_iter().map(DVector::from_vec).collect(),
            last_t: cp.last_t,
            params: cp.params,
        })
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
    out
}

/// Serializable snapshot of a [`ReProCSState`]; `p_hat` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub n: usize,
    pub rank: usize,
    pub p_hat: Vec<f64>,
    pub committed: usize,
    pub j: usize,
    pub k: usize,
    pub last_t: usize,
    pub buffer: Vec<Vec<f64>>,
    pub params: ReProCSParams,
}

/// Runs the algorithm over a synthetic stream and scores every frame. Only
/// `m_t` reaches the algorithm; truth is used for the metrics.
pub fn run_stream<I>(
    samples: I,
    params: ReProCSParams,
    p0: BasisMatrix,
    model: &SubspaceModel,
) -> Result<MetricsLog>
where
    I: IntoIterator<Item = StreamSample>,
{
    run_stream_with(samples, params, p0, model, |_, _| {})
}

/// As [`run_stream`], also handing every frame's output to `on_frame`.
pub fn run_stream_with<I, F>(
    samples: I,
    params: ReProCSParams,
    p0: BasisMatrix,
    model: &SubspaceModel,
    mut on_frame: F,
) -> Result<MetricsLog>
where
    I: IntoIterator<Item = StreamSample>,
    F: FnMut(&StreamSample, &FrameOutput),
{
    let mut state = ReProCSState::new(params, p0)?;
    let mut log = MetricsLog::default();
    for sample in samples {
        let out = state.step(sample.t, &sample.m)?;
        let se = subspace_error(state.p_hat(), model.basis_at(sample.t));
        let mut rec = frame_metrics(sample.t, &out.x_hat, &out.support, &sample.x_true, Some(se));
        rec.solver_iters = out.solver_iters;
        rec.seconds = out.seconds;
        rec.flagged = out.flagged;
        log.push(rec);
        on_frame(&sample, &out);
    }
    Ok(log)
}
