//! The deterministic sequence of subspace-error bounds `ζ⁺_{j,k}`.

use crate::error::{Error, Result};

pub const KAPPA_S_PLUS: f64 = 0.0215;
pub const H_PLUS: f64 = 1.0 / 200.0;
/// `h⁺` when all supports in a window are mutually disjoint (the block bound
/// sharpens to `2σ⁺h`).
pub const H_PLUS_DISJOINT: f64 = 1.0 / 22.0;
pub const PHI_PLUS: f64 = 1.2;

#[derive(Debug, Clone, PartialEq)]
pub struct ZetaSequence {
    /// `ζ⁺_{j,*} = (r0 + (j−1)c)ζ` for `j = 1..=J`.
    pub zeta_star: Vec<f64>,
    /// `values[j-1][k]` is `ζ⁺_{j,k}` for `k = 0..=K`.
    pub values: Vec<Vec<f64>>,
    /// Denominators `D_{j,k}` for `k = 1..=K` (index `k − 1`).
    pub denominators: Vec<Vec<f64>>,
}

/// Evaluates the recursion for `j = 1..=J`, `k = 0..=K`. Fails with a regime
/// error if `ζ` violates its first two bounds or a denominator is `≤ 0`.
#[allow(clippy::too_many_arguments)]
pub fn zeta_plus_sequence(
    r0: usize,
    c: usize,
    num_changes: usize,
    k_max: usize,
    zeta: f64,
    f: f64,
    g: f64,
) -> Result<ZetaSequence> {
    let r = (r0 + num_changes * c) as f64;
    if !(zeta > 0.0) || !(f >= 1.0) || !(g >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "need zeta > 0, f ≥ 1, g ≥ 1 (got {zeta}, {f}, {g})"
        )));
    }
    if zeta > 1e-4 / (r * r) || zeta > 1.5e-4 / (r * r * f) {
        return Err(Error::RegimeViolation(format!(
            "zeta = {zeta} exceeds min(1e-4/r², 1.5e-4/(r² f)) for r = {r}, f = {f}"
        )));
    }
    let (kappa, h, phi) = (KAPPA_S_PLUS, H_PLUS, PHI_PLUS);
    let cz = c as f64 * zeta;
    let first_term = 8.0 * h * kappa * kappa * phi * phi + 2.0 * kappa * phi;
    let a = 8.0 * h * phi * phi;
    let b = 2.0 * (8.0 * h).sqrt() * phi;

    let mut seq = ZetaSequence {
        zeta_star: Vec::with_capacity(num_changes),
        values: Vec::with_capacity(num_changes),
        denominators: Vec::with_capacity(num_changes),
    };
    for j in 1..=num_changes {
        let zs = (r0 + (j - 1) * c) as f64 * zeta;
        let zs2 = zs * zs;
        let mut vals = vec![1.0];
        let mut dens = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let (num_head, num_tail, den) = if k == 1 {
                let head = g * first_term;
                let tail = zs2 * f * (first_term + 2.0) + 5.0 * cz / 24.0;
                // as written, the g-term of D_{j,1} carries no (φ⁺)² on 8h⁺κ²
                let den = 1.0
                    - zs2 * (1.0 + f)
                    - cz / 8.0
                    - zs2 * f * (first_term + 2.0)
                    - g * (8.0 * h * kappa * kappa + 2.0 * kappa * phi)
                    - 5.0 * cz / 24.0;
                (head, tail, den)
            } else {
                let prev = vals[k - 1];
                let head = prev * g * (a * prev + b);
                let tail = zs2 * f * (a + b + 2.0) + 5.0 * cz / 24.0;
                let den = 1.0
                    - zs2 * (1.0 + f)
                    - cz / 8.0
                    - zs2 * f * (a + b + 2.0)
                    - prev * g * (a * prev + b)
                    - 5.0 * cz / 24.0;
                (head, tail, den)
            };
            if den <= 0.0 {
                return Err(Error::RegimeViolation(format!(
                    "denominator D_{{{j},{k}}} = {den} is not positive"
                )));
            }
            dens.push(den);
            vals.push(num_head / den + num_tail / den);
        }
        seq.zeta_star.push(zs);
        seq.values.push(vals);
        seq.denominators.push(dens);
    }
    Ok(seq)
}
