use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{
    binomial, lambda_max, lambda_min, principal_submatrix, select_rows, spectral_norm,
    BasisMatrix, Combinations,
};

/// Largest number of subsets an exact enumeration may visit.
pub const ENUMERATION_BUDGET: u128 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaMode {
    Exact,
    /// `min(√s κ₁, 1)`.
    Bound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaResult {
    pub value: f64,
    /// A maximising row set (exact mode only).
    pub certificate: Option<Vec<usize>>,
}

/// Denseness coefficient `κ_s(P) = max_{|T| ≤ s} ‖I_Tᵀ P‖₂`.
pub fn kappa_s(p: &BasisMatrix, s: usize, mode: KappaMode) -> Result<KappaResult> {
    let n = p.n();
    if s == 0 || p.is_empty() {
        return Ok(KappaResult {
            value: 0.0,
            certificate: Some(Vec::new()),
        });
    }
    match mode {
        KappaMode::Bound => {
            let k1 = (0..n)
                .map(|i| p.as_matrix().row(i).norm())
                .fold(0.0, f64::max);
            Ok(KappaResult {
                value: ((s as f64).sqrt() * k1).min(1.0),
                certificate: None,
            })
        }
        KappaMode::Exact => {
            // ‖I_Tᵀ P‖ is monotone in T, so subsets of size min(s, n) suffice.
            let s = s.min(n);
            let required = binomial(n, s);
            if required > ENUMERATION_BUDGET {
                return Err(Error::BudgetExceeded {
                    required,
                    budget: ENUMERATION_BUDGET,
                });
            }
            let mut best = -1.0;
            let mut arg = Vec::new();
            for t in Combinations::new(n, s) {
                let v = spectral_norm(&select_rows(p.as_matrix(), &t));
                if v > best {
                    best = v;
                    arg = t;
                }
            }
            Ok(KappaResult {
                value: best.min(1.0),
                certificate: Some(arg),
            })
        }
    }
}

/// Restricted isometry constant of `A` over `s`-subsets of columns.
pub fn ric_delta_s(a: &DMatrix<f64>, s: usize) -> Result<f64> {
    let n = a.ncols();
    if s == 0 {
        return Ok(0.0);
    }
    if s > n {
        return Err(Error::InvalidInput(format!("s = {s} exceeds {n} columns")));
    }
    let required = binomial(n, s);
    if required > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            required,
            budget: ENUMERATION_BUDGET,
        });
    }
    let gram = a.tr_mul(a);
    let mut delta: f64 = 0.0;
    for t in Combinations::new(n, s) {
        let sub = principal_submatrix(&gram, &t);
        delta = delta.max(lambda_max(&sub) - 1.0).max(1.0 - lambda_min(&sub));
    }
    Ok(delta)
}
