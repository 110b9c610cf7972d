//! Randomised checks of the structural identities and inequalities.

use clap::ValueEnum;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use reprocs_core::analysis::{
    check_block_bound, check_sin_theta, kappa_s, matrix_cs_check, proj_pca_steps, ric_delta_s,
    zeta_bound, zeta_plus_sequence, HMode, KappaMode,
};
use reprocs_core::linalg::{lambda_max, lambda_min};
use reprocs_core::rng::derive_seed;
use reprocs_core::synth::{gen_basis, gen_support_example1};
use reprocs_core::Result;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// RIC of `I − PPᵀ` equals `κ_s(P)²`.
    Lemma1,
    /// Sum of per-frame blocks against `2 d² σ⁺ h`.
    Blockbound,
    /// The `ζ⁺` recursion over a parameter grid.
    Zeta,
    /// sin θ bound for a perturbed block-diagonal matrix.
    Sincos,
    /// Matrix Cauchy–Schwarz.
    Cs,
    All,
}

impl Suite {
    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Lemma1, Suite::Blockbound, Suite::Zeta, Suite::Sincos, Suite::Cs],
            s => vec![s],
        }
    }

    fn default_instances(self) -> usize {
        match self {
            Suite::Lemma1 => 200,
            Suite::Blockbound | Suite::Sincos | Suite::Cs => 1000,
            Suite::Zeta | Suite::All => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Blockbound => "blockbound",
            Suite::Zeta => "zeta",
            Suite::Sincos => "sincos",
            Suite::Cs => "cs",
            Suite::All => "all",
        }
    }
}

/// One failing instance. For identities `lhs` and `rhs` are the two sides.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub lhs: f64,
    pub rhs: f64,
    pub config: String,
}

/// Failing instances kept per suite; `violations` still counts all of them.
const MAX_LISTED: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub instances: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` (or deviation, for identities) seen.
    pub worst: f64,
    pub detail: String,
    pub failures: Vec<Violation>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Running tally shared by the suites.
#[derive(Default)]
struct Tally {
    instances: usize,
    violations: usize,
    worst: f64,
    failures: Vec<Violation>,
}

impl Tally {
    fn record(&mut self, ok: bool, lhs: f64, rhs: f64, config: impl FnOnce() -> String) {
        self.instances += 1;
        if !ok {
            self.violations += 1;
            if self.failures.len() < MAX_LISTED {
                self.failures.push(Violation { lhs, rhs, config: config() });
            }
        }
    }

    fn report(self, suite: Suite, detail: String) -> SuiteReport {
        SuiteReport {
            suite,
            instances: self.instances,
            violations: self.violations,
            worst: self.worst,
            detail,
            failures: self.failures,
        }
    }
}

fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_psd(rng: &mut impl Rng, k: usize, norm: f64) -> DMatrix<f64> {
    let b = gaussian(rng, k, k);
    let a = &b * b.transpose();
    let top = lambda_max(&a);
    if top > 0.0 {
        a * (norm / top)
    } else {
        a
    }
}

/// `instances = None` uses the suite's default count.
pub fn run(suite: Suite, seed: u64, instances: Option<usize>) -> Result<SuiteReport> {
    let count = instances.unwrap_or(suite.default_instances());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, suite as u64));
    match suite {
        Suite::Lemma1 => lemma1(&mut rng, count),
        Suite::Blockbound => block_bound(&mut rng, count),
        Suite::Zeta => zeta(),
        Suite::Sincos => sin_theta(&mut rng, count),
        Suite::Cs => cauchy_schwarz(&mut rng, count),
        Suite::All => unreachable!("expanded by the caller"),
    }
}

fn lemma1(rng: &mut ChaCha8Rng, count: usize) -> Result<SuiteReport> {
    let mut t = Tally::default();
    for _ in 0..count {
        let n = rng.random_range(4..=14);
        let r = rng.random_range(1..=4);
        let s = rng.random_range(1..=3);
        let seed: u64 = rng.random();
        let p = gen_basis(n, r, seed)?;
        let kappa = kappa_s(&p, s, KappaMode::Exact)?.value;
        let phi = DMatrix::identity(n, n) - p.as_matrix() * p.as_matrix().transpose();
        let delta = ric_delta_s(&phi, s)?;
        let dev = (delta - kappa * kappa).abs();
        t.worst = t.worst.max(dev);
        t.record(dev <= 1e-8, delta, kappa * kappa, || format!("n={n} r={r} s={s} basis_seed={seed}"));
    }
    let worst = t.worst;
    Ok(t.report(Suite::Lemma1, format!("max |delta_s - kappa_s^2| = {worst:.2e}")))
}

/// Example-1 window cyclically shifted and started at a random phase.
fn window(rng: &mut ChaCha8Rng, n: usize, s: usize, step: usize, w: usize, beta: usize) -> Result<Vec<Vec<usize>>> {
    let phase = rng.random_range(0..w);
    let shift = rng.random_range(0..n);
    let seq = gen_support_example1(n, s, step, w, beta + phase, 0)?;
    Ok(seq.supports[phase..]
        .iter()
        .map(|sup| {
            let mut v: Vec<usize> = sup.iter().map(|&i| (i + shift) % n).collect();
            v.sort_unstable();
            v
        })
        .collect())
}

fn block_bound(rng: &mut ChaCha8Rng, count: usize) -> Result<SuiteReport> {
    let (n, s, beta): (usize, usize, usize) = (64, 8, 40);
    let mut t = Tally::default();
    for i in 0..count {
        // alternate overlapping (banded) and disjoint consecutive supports
        let disjoint = i % 2 == 1;
        let (step, w) = loop {
            let step = if disjoint { s } else { rng.random_range(s / 2..2 * s) };
            let w = rng.random_range(1..=beta);
            if beta.div_ceil(w) * step + s <= n {
                break (step, w);
            }
        };
        let win = window(rng, n, s, step, w, beta)?;
        let sigma_plus = rng.random_range(0.1..10.0);
        let a: Vec<DMatrix<f64>> = (0..beta)
            .map(|_| {
                let norm = sigma_plus * rng.random_range(0.05..=1.0);
                random_psd(rng, s, norm)
            })
            .collect();
        let d = if disjoint { 1 } else { 2 };
        let rep = check_block_bound(n, &win, &a, sigma_plus, d, HMode::Constructive)?;
        t.worst = t.worst.max(rep.lhs / rep.rhs);
        t.record(rep.holds, rep.lhs, rep.rhs, || {
            format!("n={n} s={s} beta={beta} step={step} period={w} d={d} sigma_plus={sigma_plus}")
        });
    }
    let worst = t.worst;
    Ok(t.report(Suite::Blockbound, format!("max lhs/rhs = {worst:.3}")))
}

fn zeta() -> Result<SuiteReport> {
    let mut t = Tally::default();
    for r0 in [1, 2, 5, 10, 20, 50] {
        for c in [1, 2, 3, 5] {
            for num_changes in [1, 2, 3] {
                for f in [1.0, 1.5, 10.0, 100.0] {
                    for g in [1.0, 1.2, std::f64::consts::SQRT_2] {
                        for scale in [1.0, 0.1] {
                            let zeta = zeta_bound(r0 + num_changes * c, f, 0.0) * scale;
                            let k_max = proj_pca_steps(c, zeta);
                            let config = || {
                                format!("r0={r0} c={c} changes={num_changes} f={f} g={g} zeta={zeta:e} K={k_max}")
                            };
                            let seq = match zeta_plus_sequence(r0, c, num_changes, k_max, zeta, f, g) {
                                Ok(seq) => seq,
                                Err(_) => {
                                    t.record(false, f64::NAN, f64::NAN, config);
                                    continue;
                                }
                            };
                            let limit = |k: usize| 0.72f64.powi(k as i32) + 0.83 * c as f64 * zeta;
                            let mut ok = true;
                            let (mut lhs, mut rhs) = (0.0, 0.0);
                            for vals in &seq.values {
                                t.worst = t.worst.max(vals[1]);
                                let checks = (1..=k_max)
                                    .map(|k| (vals[k], limit(k) + 1e-12))
                                    .chain(std::iter::once((vals[1], 0.1)))
                                    .chain((k_max >= 2).then(|| (vals[2], 0.06 + 1e-12)));
                                for (l, r) in checks {
                                    if ok && l > r {
                                        ok = false;
                                        (lhs, rhs) = (l, r);
                                    }
                                }
                            }
                            t.record(ok, lhs, rhs, config);
                        }
                    }
                }
            }
        }
    }
    let worst = t.worst;
    Ok(t.report(Suite::Zeta, format!("max zeta_1 = {worst:.4} (limit 0.1)")))
}

fn sin_theta(rng: &mut ChaCha8Rng, count: usize) -> Result<SuiteReport> {
    let mut t = Tally::default();
    for i in 0..count {
        let n = rng.random_range(3..=10);
        let c = rng.random_range(1..=3.min(n - 1));
        let seed: u64 = rng.random();
        let e = gen_basis(n, n, seed)?.into_matrix();
        let e_new = e.columns(0, c).into_owned();
        let e_perp = e.columns(c, n - c).into_owned();
        let lam = rng.random_range(0.5..5.0);
        let a_k = random_psd(rng, c, lam) + DMatrix::identity(c, c) * lam;
        let lam_min = lambda_min(&a_k);
        let perp_scale = lam_min * rng.random_range(0.0..0.6);
        let a_perp = random_psd(rng, n - c, perp_scale);
        let g = gaussian(rng, n, n);
        let h_raw = &g + g.transpose();
        let h_norm = lambda_max(&h_raw).max(-lambda_min(&h_raw));
        let h = h_raw * ((lam_min - lambda_max(&a_perp)) * rng.random_range(0.0..0.45) / h_norm);
        let rep = check_sin_theta(&a_k, &a_perp, &h, &e_new, &e_perp)?;
        if rep.rhs > 0.0 {
            t.worst = t.worst.max(rep.lhs / rep.rhs);
        }
        let ok = rep.holds && rep.davis_kahan_holds != Some(false);
        t.record(ok, rep.lhs, rep.rhs, || format!("instance={i} n={n} c={c} basis_seed={seed}"));
    }
    let worst = t.worst;
    Ok(t.report(Suite::Sincos, format!("max lhs/rhs = {worst:.3}")))
}

fn cauchy_schwarz(rng: &mut ChaCha8Rng, count: usize) -> Result<SuiteReport> {
    let mut t = Tally::default();
    for i in 0..count {
        let (rx, ry, k) = (rng.random_range(1..=5), rng.random_range(1..=5), rng.random_range(1..=5));
        let alpha = rng.random_range(1..=20);
        let xs: Vec<DMatrix<f64>> = (0..alpha).map(|_| gaussian(rng, rx, k)).collect();
        let ys: Vec<DMatrix<f64>> = (0..alpha).map(|_| gaussian(rng, ry, k)).collect();
        let rep = matrix_cs_check(&xs, &ys)?;
        if rep.rhs > 0.0 {
            t.worst = t.worst.max(rep.lhs / rep.rhs);
        }
        t.record(rep.holds, rep.lhs, rep.rhs, || format!("instance={i} rx={rx} ry={ry} k={k} alpha={alpha}"));
    }
    let worst = t.worst;
    Ok(t.report(Suite::Cs, format!("max lhs/rhs = {worst:.3}")))
}
