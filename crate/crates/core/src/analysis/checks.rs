//! Numerical evaluation of both sides of the inequalities the correctness
//! argument rests on.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::hstar::{h_window, HMode};
use crate::error::{Error, Result};
use crate::linalg::{lambda_max, lambda_min, sorted_symmetric_eigen, spectral_norm, symmetric_norm};

/// Relative slack used when comparing the two sides.
const SLACK: f64 = 1e-12;

fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + SLACK) + 1e-14
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub h: usize,
    pub holds: bool,
}

/// `‖Σ_t I_{T_t} A_t I_{T_t}ᵀ‖₂ ≤ 2 d² σ⁺ h`, where `h` is computed from the
/// window with `mode`. `bands = 2` gives the `8σ⁺h` form; `bands = 1` the
/// `2σ⁺h` form for disjoint supports.
pub fn check_block_bound(
    n: usize,
    window: &[Vec<usize>],
    a: &[DMatrix<f64>],
    sigma_plus: f64,
    bands: usize,
    mode: HMode,
) -> Result<BlockBoundReport> {
    if window.len() != a.len() {
        return Err(Error::Dimension(format!(
            "{} supports but {} matrices",
            window.len(),
            a.len()
        )));
    }
    let mut m = DMatrix::zeros(n, n);
    for (t, (sup, at)) in window.iter().zip(a).enumerate() {
        if at.nrows() != sup.len() || at.ncols() != sup.len() {
            return Err(Error::Dimension(format!(
                "A_{t} is {}×{} but |T_t| = {}",
                at.nrows(),
                at.ncols(),
                sup.len()
            )));
        }
        if sup.iter().any(|&i| i >= n) {
            return Err(Error::InvalidInput(format!("support of frame {t} exceeds n = {n}")));
        }
        if at.is_empty() {
            continue;
        }
        let asym = (at - at.transpose()).amax();
        let scale = at.amax().max(1.0);
        if asym > 1e-10 * scale {
            return Err(Error::InvalidInput(format!("A_{t} is not symmetric")));
        }
        if lambda_min(at) < -1e-10 * scale {
            return Err(Error::InvalidInput(format!("A_{t} is not positive semidefinite")));
        }
        if lambda_max(at) > sigma_plus * (1.0 + 1e-10) {
            return Err(Error::InvalidInput(format!("‖A_{t}‖ exceeds sigma_plus")));
        }
        for (p, &i) in sup.iter().enumerate() {
            for (q, &j) in sup.iter().enumerate() {
                m[(i, j)] += at[(p, q)];
            }
        }
    }
    let h = h_window(window, mode)?;
    let lhs = symmetric_norm(&m);
    let rhs = 2.0 * (bands * bands) as f64 * sigma_plus * h as f64;
    Ok(BlockBoundReport {
        lhs,
        rhs,
        h,
        holds: holds(lhs, rhs),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinThetaReport {
    /// `‖(I − QQᵀ) E_new‖₂`.
    pub lhs: f64,
    /// `‖H‖ / (λ_min(A) − ‖A_⊥‖ − ‖H‖)`.
    pub rhs: f64,
    pub holds: bool,
    /// `‖H E_new‖ / (λ_min(A) − λ_max(Λ_⊥))`, when that gap is positive.
    pub davis_kahan_rhs: Option<f64>,
    pub davis_kahan_holds: Option<bool>,
}

/// Forms `𝒜 = E A Eᵀ + E_⊥ A_⊥ E_⊥ᵀ`, takes `Q` as the top-`c` eigenvectors
/// of `𝒜 + H` and compares `‖(I − QQᵀ)E‖` with both quotient bounds.
pub fn check_sin_theta(
    a_k: &DMatrix<f64>,
    a_perp: &DMatrix<f64>,
    h: &DMatrix<f64>,
    e_new: &DMatrix<f64>,
    e_perp: &DMatrix<f64>,
) -> Result<SinThetaReport> {
    let n = e_new.nrows();
    let c = e_new.ncols();
    if a_k.shape() != (c, c)
        || e_perp.shape() != (n, n - c)
        || a_perp.shape() != (n - c, n - c)
        || h.shape() != (n, n)
    {
        return Err(Error::Dimension("inconsistent sin-theta block sizes".into()));
    }
    let full = e_new * a_k * e_new.transpose() + e_perp * a_perp * e_perp.transpose() + h;
    let lam_a = lambda_min(a_k);
    let h_norm = symmetric_norm(h);
    let gap = lam_a - symmetric_norm(a_perp) - h_norm;
    if gap <= 0.0 {
        return Err(Error::Precondition(format!(
            "eigen-gap λ_min(A) − ‖A_⊥‖ − ‖H‖ = {gap:.3e} is not positive"
        )));
    }
    let (vals, vecs) = sorted_symmetric_eigen(&full);
    let q = vecs.columns(0, c).into_owned();
    let resid = e_new - &q * q.tr_mul(e_new);
    let lhs = spectral_norm(&resid);
    let rhs = h_norm / gap;
    let dk_gap = lam_a - vals.get(c).copied().unwrap_or(f64::NEG_INFINITY);
    let (davis_kahan_rhs, davis_kahan_holds) = if dk_gap > 0.0 {
        let v = spectral_norm(&(h * e_new)) / dk_gap;
        (Some(v), Some(holds(lhs, v)))
    } else {
        (None, None)
    };
    Ok(SinThetaReport {
        lhs,
        rhs,
        holds: holds(lhs, rhs),
        davis_kahan_rhs,
        davis_kahan_holds,
    })
}

/// `‖(1/α) Σ X_t Y_tᵀ‖² ≤ λ_max((1/α) Σ X_t X_tᵀ) · λ_max((1/α) Σ Y_t Y_tᵀ)`.
pub fn matrix_cs_check(xs: &[DMatrix<f64>], ys: &[DMatrix<f64>]) -> Result<BoundReport> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::Dimension("need equally many, at least one, X_t and Y_t".into()));
    }
    let (rx, cx) = xs[0].shape();
    let (ry, cy) = ys[0].shape();
    if cx != cy || xs.iter().any(|x| x.shape() != (rx, cx)) || ys.iter().any(|y| y.shape() != (ry, cy)) {
        return Err(Error::Dimension("X_t and Y_t are not conformable".into()));
    }
    let alpha = xs.len() as f64;
    let mut xy = DMatrix::zeros(rx, ry);
    let mut xx = DMatrix::zeros(rx, rx);
    let mut yy = DMatrix::zeros(ry, ry);
    for (x, y) in xs.iter().zip(ys) {
        xy += x * y.transpose();
        xx += x * x.transpose();
        yy += y * y.transpose();
    }
    let lhs = (spectral_norm(&xy) / alpha).powi(2);
    let rhs = lambda_max(&(xx / alpha)) * lambda_max(&(yy / alpha));
    Ok(BoundReport {
        lhs,
        rhs,
        holds: holds(lhs, rhs),
    })
}
