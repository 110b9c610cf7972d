//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerical routines.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vec(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `n × r` orthonormal columns from a Householder QR.
pub fn orthonormal(rng: &mut impl Rng, n: usize, r: usize) -> DMatrix<f64> {
    let q = gaussian(rng, n, n.max(r)).qr().q();
    q.columns(0, r).into_owned()
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn rows_of(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

fn cols_of(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
}

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Largest spectral norm over `s`-row submatrices, by SVD.
pub fn kappa_oracle(p: &DMatrix<f64>, s: usize) -> f64 {
    let s = s.min(p.nrows());
    subsets(p.nrows(), s)
        .iter()
        .map(|t| singular_values(&rows_of(p, t))[0])
        .fold(0.0, f64::max)
}

/// `max_T max(σ_max(A_T)² − 1, 1 − σ_min(A_T)²)` over `s`-column subsets.
pub fn ric_oracle(a: &DMatrix<f64>, s: usize) -> f64 {
    subsets(a.ncols(), s)
        .iter()
        .map(|t| {
            let sv = singular_values(&cols_of(a, t));
            let hi = sv[0] * sv[0];
            let lo = sv.last().map_or(0.0, |v| v * v);
            (hi - 1.0).max(1.0 - lo)
        })
        .fold(0.0, f64::max)
}

/// Symmetric PSD `k × k` with spectral norm exactly `norm`.
pub fn random_psd(rng: &mut impl Rng, k: usize, norm: f64) -> DMatrix<f64> {
    let b = gaussian(rng, k, k);
    let a = &b * b.transpose();
    let top = singular_values(&a)[0];
    if top == 0.0 {
        return a;
    }
    a * (norm / top)
}

/// Minimiser of `‖x‖₁` s.t. `‖y − Φx‖₂ ≤ ξ`, found by enumerating supports
/// and sign patterns. For a fixed support `T` and signs `z`, the minimiser of
/// `zᵀx` over the ellipsoid is `x_ls − √(ρ²/zᵀG⁻¹z) G⁻¹z` with
/// `G = Φ_TᵀΦ_T` and `ρ² = ξ² − ‖y − Φ_T x_ls‖²`; it is a candidate when its
/// signs agree with `z`.
pub fn bpdn_oracle(phi: &DMatrix<f64>, y: &DVector<f64>, xi: f64) -> (DVector<f64>, f64) {
    let n = phi.ncols();
    let mut best = DVector::zeros(n);
    if y.norm() <= xi {
        return (best, 0.0);
    }
    let mut best_l1 = f64::INFINITY;
    for k in 1..=n.min(phi.nrows()) {
        for t in subsets(n, k) {
            let pt = cols_of(phi, &t);
            let g = pt.tr_mul(&pt);
            let sv = singular_values(&g);
            if *sv.last().unwrap() < 1e-9 * sv[0].max(1.0) {
                continue;
            }
            let g_inv = match g.clone().try_inverse() {
                Some(v) => v,
                None => continue,
            };
            let x_ls = &g_inv * pt.tr_mul(y);
            let res2 = (y - &pt * &x_ls).norm_squared();
            let rho2 = xi * xi - res2;
            if rho2 < 0.0 {
                continue;
            }
            for mask in 0..(1u32 << k) {
                let z = DVector::from_fn(k, |i, _| if mask >> i & 1 == 1 { -1.0 } else { 1.0 });
                let w = &g_inv * &z;
                let x = &x_ls - &w * (rho2 / z.dot(&w)).sqrt();
                if (0..k).all(|i| z[i] * x[i] >= -1e-12) {
                    let l1 = x.abs().sum();
                    if l1 < best_l1 {
                        best_l1 = l1;
                        best = DVector::zeros(n);
                        for (i, &idx) in t.iter().enumerate() {
                            best[idx] = x[i];
                        }
                    }
                }
            }
        }
    }
    (best, best_l1)
}
