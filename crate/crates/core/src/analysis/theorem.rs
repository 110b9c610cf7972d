//! Parameter settings prescribed by the correctness theorem.

use serde::{Deserialize, Serialize};

use super::zeta::{H_PLUS, KAPPA_S_PLUS, PHI_PLUS};
use crate::error::{Error, Result};

/// Model statistics the settings depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremInputs {
    pub r0: usize,
    /// Largest number of directions added at one change.
    pub c: usize,
    /// Number of changes `J`.
    pub num_changes: usize,
    /// Largest rank `r`.
    pub r: usize,
    pub f: f64,
    pub g: f64,
    pub gamma: f64,
    pub gamma_new: f64,
    pub x_min: f64,
    pub lambda_minus: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub zeta: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub xi: f64,
    pub omega_interval: (f64, f64),
    pub c_add: f64,
    pub alpha_min: f64,
    pub h_plus: f64,
    pub kappa_s_plus: f64,
    pub phi_plus: f64,
    /// Whether `g ≤ √2`; reported, not enforced.
    pub g_ok: bool,
}

impl TheoremParams {
    /// Midpoint of the admissible threshold interval, `x_min / 2`.
    pub fn omega_mid(&self) -> f64 {
        0.5 * (self.omega_interval.0 + self.omega_interval.1)
    }
}

/// `min(10⁻⁴/r², 1.5·10⁻⁴/(r² f), 1/(r³ γ²))`.
pub fn zeta_bound(r: usize, f: f64, gamma: f64) -> f64 {
    let r = r as f64;
    let third = if gamma > 0.0 {
        1.0 / (r.powi(3) * gamma * gamma)
    } else {
        f64::INFINITY
    };
    (1e-4 / (r * r)).min(1.5e-4 / (r * r * f)).min(third)
}

/// `⌈log(0.17 c ζ) / log(0.72)⌉`.
pub fn proj_pca_steps(c: usize, zeta: f64) -> usize {
    ((0.17 * c as f64 * zeta).ln() / 0.72f64.ln()).ceil() as usize
}

/// `√c γ_new + √ζ (√r + √c)`.
pub fn xi_for(c: usize, r: usize, gamma_new: f64, zeta: f64) -> f64 {
    let (c, r) = (c as f64, r as f64);
    c.sqrt() * gamma_new + zeta.sqrt() * (r.sqrt() + c.sqrt())
}

pub fn theorem_params(inp: &TheoremInputs) -> Result<TheoremParams> {
    if inp.r == 0 || inp.c == 0 || inp.n == 0 {
        return Err(Error::InvalidInput("r, c and n must be positive".into()));
    }
    if !(inp.f >= 1.0) || !(inp.lambda_minus > 0.0) || !(inp.x_min > 0.0) {
        return Err(Error::InvalidInput(
            "need f ≥ 1, lambda_minus > 0 and x_min > 0".into(),
        ));
    }
    let zeta = zeta_bound(inp.r, inp.f, inp.gamma);
    let k = proj_pca_steps(inp.c, zeta);
    let xi = xi_for(inp.c, inp.r, inp.gamma_new, zeta);
    if inp.x_min < 14.0 * xi {
        return Err(Error::InfeasibleOmega { xi, x_min: inp.x_min });
    }
    let c_add = 4800.0 / (zeta * inp.lambda_minus).powi(2) * 16f64.max((1.2 * xi).powi(4));
    let jobs = (6 * k * inp.num_changes.max(1)) as f64;
    let alpha_min = c_add * (jobs.ln() + 11.0 * (inp.n as f64).ln());
    Ok(TheoremParams {
        zeta,
        k,
        xi,
        omega_interval: (7.0 * xi, inp.x_min - 7.0 * xi),
        c_add,
        alpha_min,
        h_plus: H_PLUS,
        kappa_s_plus: KAPPA_S_PLUS,
        phi_plus: PHI_PLUS,
        g_ok: inp.g <= std::f64::consts::SQRT_2,
    })
}
