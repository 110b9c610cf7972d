//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! `REPROCS_ACCEPTANCE_PCP_TRIALS` lowers the number of trials that also run
//! the PCP comparator (default: all of them).

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use reprocs_core::analysis::{
    check_block_bound, check_sin_theta, h_star, kappa_s, matrix_cs_check, proj_pca_steps,
    ric_delta_s, theorem_params, zeta_bound, zeta_plus_sequence, HMode, KappaMode, MetricsLog,
    TheoremInputs, H_PLUS_DISJOINT,
};
use reprocs_core::experiment::{generate_trial, run_pcp, run_reprocs, trial_seed, ExperimentConfig, PcpRun};
use reprocs_core::reprocs::run_stream;
use reprocs_core::solver::{bpdn_solve, BpdnOptions, BpdnProblem, ComplementProjector};
use reprocs_core::synth::{
    gen_support_example1, perturb_initial_estimate, subspace_model_from_basis, synthesize_stream,
    ModelConfig, SupportSequence,
};
use reprocs_core::{BasisMatrix, Result};

use common::{bpdn_oracle, gaussian, gaussian_vec, kappa_oracle, orthonormal, random_psd, ric_oracle, rng};

const TRIALS: usize = 10;
const SEED: u64 = 20_130_601;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    let pcp_trials = std::env::var("REPROCS_ACCEPTANCE_PCP_TRIALS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(TRIALS)
        .clamp(1, TRIALS);

    let mut failed = 0;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Result<Verdict>| {
        let start = Instant::now();
        let v = f().unwrap_or_else(|e| verdict(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {id} [{name}]: {} ({secs:.1}s) {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    };

    let mut fig1 = None;
    report(1, "fig1 correlated supports", &mut || {
        let run = fig_run(&ExperimentConfig::fig1(), pcp_trials)?;
        let v = criterion_fig1(&ExperimentConfig::fig1(), &run);
        fig1 = Some(run);
        Ok(v)
    });
    report(2, "fig2 uniform supports", &mut || {
        let Some(f1) = fig1.as_ref() else {
            return Ok(verdict(false, "figure 1 runs unavailable"));
        };
        let f2 = fig_run(&ExperimentConfig::fig2(), pcp_trials)?;
        Ok(criterion_fig2(f1, &f2))
    });
    report(3, "lemma 1 identity", &mut criterion_lemma1);
    report(4, "block bound", &mut criterion_block_bound);
    report(5, "zeta recursion", &mut criterion_zeta);
    report(6, "bpdn oracle", &mut criterion_bpdn);
    report(7, "sin-theta and matrix cauchy-schwarz", &mut criterion_sin_theta_cs);
    report(8, "exact support at small scale", &mut criterion_exact_support);

    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- figures

struct FigRun {
    reprocs: Vec<MetricsLog>,
    pcp: Vec<PcpRun>,
}

fn fig_run(cfg: &ExperimentConfig, pcp_trials: usize) -> Result<FigRun> {
    let mut run = FigRun {
        reprocs: Vec::new(),
        pcp: Vec::new(),
    };
    for i in 0..TRIALS {
        let data = generate_trial(cfg, trial_seed(SEED, i))?;
        run.reprocs.push(run_reprocs(cfg, &data)?);
        if i < pcp_trials {
            run.pcp.push(run_pcp(cfg, &data)?);
        }
    }
    Ok(run)
}

/// Trial-averaged per-frame values.
fn mean_curve(logs: &[&MetricsLog], f: impl Fn(&reprocs_core::analysis::FrameMetrics) -> f64) -> Vec<f64> {
    let len = logs[0].len();
    (0..len)
        .map(|i| logs.iter().map(|l| f(&l.records[i])).sum::<f64>() / logs.len() as f64)
        .collect()
}

fn criterion_fig1(cfg: &ExperimentConfig, run: &FigRun) -> Verdict {
    let changes = &cfg.model.change_times;
    let t_max = cfg.model.t_max;
    let first = changes[0];

    // (a) exact support at ≥ 99% of frames from the first change on
    let (mut exact, mut total) = (0usize, 0usize);
    for log in &run.reprocs {
        for r in log.records.iter().filter(|r| r.t >= first) {
            total += 1;
            exact += r.support_exact as usize;
        }
    }
    let exact_frac = exact as f64 / total as f64;

    // (b) windowed means strictly decrease over the K windows after a change
    let mut decreasing = true;
    let mut windows = Vec::new();
    for &tj in changes {
        let means: Vec<f64> = (0..cfg.k)
            .map(|k| {
                run.reprocs
                    .iter()
                    .map(|l| l.pca_windows(tj, cfg.alpha, cfg.k)[k].as_ref().unwrap().rel_x_err)
                    .sum::<f64>()
                    / run.reprocs.len() as f64
            })
            .collect();
        decreasing &= means.windows(2).all(|w| w[1] < w[0]);
        windows.push(means);
    }

    // (c) small error once the K updates are done, and PCP ≥ 10× worse
    let all: Vec<&MetricsLog> = run.reprocs.iter().collect();
    let curve = mean_curve(&all, |r| r.rel_x_err);
    let settled = |t: usize| {
        changes
            .iter()
            .rev()
            .find(|&&tj| tj <= t)
            .is_some_and(|&tj| t >= tj + cfg.k * cfg.alpha)
    };
    let worst_settled = (1..=t_max)
        .filter(|&t| settled(t))
        .map(|t| curve[t - 1])
        .fold(0.0, f64::max);

    let paired: Vec<&MetricsLog> = run.reprocs.iter().take(run.pcp.len()).collect();
    let ours = mean_curve(&paired, |r| r.rel_x_err);
    let pcp_logs: Vec<&MetricsLog> = run.pcp.iter().map(|p| &p.log).collect();
    let theirs = mean_curve(&pcp_logs, |r| r.rel_x_err);
    let worse = ours.iter().zip(&theirs).filter(|(a, b)| **b >= 10.0 * **a).count();
    let worse_frac = worse as f64 / t_max as f64;

    let pass = exact_frac >= 0.99 && decreasing && worst_settled < 1e-2 && worse_frac > 0.5;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" > ");
    verdict(
        pass,
        format!(
            "exact={exact_frac:.4} windows=[{}] settled_max={worst_settled:.2e} pcp>=10x at {:.1}% of frames ({} reprocs / {} pcp trials)",
            windows.iter().map(|w| fmt(w)).collect::<Vec<_>>().join("; "),
            100.0 * worse_frac,
            run.reprocs.len(),
            run.pcp.len()
        ),
    )
}

fn criterion_fig2(f1: &FigRun, f2: &FigRun) -> Verdict {
    let final_mean = |run: &FigRun| {
        let v: Vec<f64> = run.pcp.iter().flat_map(|p| p.final_rel_x_err.iter().copied()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let pcp_gain = final_mean(f1) / final_mean(f2);

    let summary = |run: &FigRun| {
        let recs: Vec<_> = run.reprocs.iter().flat_map(|l| l.records.iter()).filter(|r| r.t >= 25).collect();
        let k = recs.len() as f64;
        (
            recs.iter().map(|r| r.rel_x_err).sum::<f64>() / k,
            recs.iter().filter(|r| r.support_exact).count() as f64 / k,
        )
    };
    let (e1, s1) = summary(f1);
    let (e2, s2) = summary(f2);
    let within = |a: f64, b: f64| a < 2.0 * b && b < 2.0 * a;
    let pass = pcp_gain >= 10.0 && within(e1, e2) && within(s1, s2);
    verdict(
        pass,
        format!(
            "pcp final error fig1/fig2 = {pcp_gain:.3e}; reprocs rel_x_err {e1:.3e} vs {e2:.3e}, exact {s1:.4} vs {s2:.4}"
        ),
    )
}

// ---------------------------------------------------------------- suites

fn criterion_lemma1() -> Result<Verdict> {
    let mut r = rng(SEED ^ 3);
    let mut worst: f64 = 0.0;
    let mut oracle_dev: f64 = 0.0;
    for _ in 0..200 {
        let n = r.random_range(2..=14);
        let rank = r.random_range(1..=4.min(n));
        let s = r.random_range(1..=3.min(n));
        let p = orthonormal(&mut r, n, rank);
        let basis = BasisMatrix::new(p.clone(), 1e-10)?;
        let phi = DMatrix::identity(n, n) - &p * p.transpose();
        let delta = ric_delta_s(&phi, s)?;
        let kappa = kappa_s(&basis, s, KappaMode::Exact)?.value;
        worst = worst.max((delta - kappa * kappa).abs());
        oracle_dev = oracle_dev
            .max((delta - ric_oracle(&phi, s)).abs())
            .max((kappa - kappa_oracle(&p, s)).abs());
    }
    Ok(verdict(
        worst <= 1e-8 && oracle_dev <= 1e-8,
        format!("max |delta - kappa^2| = {worst:.2e}, max deviation from SVD oracle = {oracle_dev:.2e}"),
    ))
}

/// Example-1 window of `beta` frames, cyclically shifted by a random offset
/// and starting at a random phase of the move period.
fn example1_window(r: &mut impl Rng, n: usize, s: usize, step: usize, w: usize, beta: usize) -> Result<Vec<Vec<usize>>> {
    let phase = r.random_range(0..w);
    let shift = r.random_range(0..n);
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

fn criterion_block_bound() -> Result<Verdict> {
    let (n, s, beta): (usize, usize, usize) = (64, 8, 40);
    let mut r = rng(SEED ^ 4);
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut run = |r: &mut rand_chacha::ChaCha8Rng, disjoint: bool| -> Result<()> {
        // parameters whose window never revisits an index
        let (step, w) = loop {
            let step = if disjoint { s } else { r.random_range(s / 2..2 * s) };
            let w = r.random_range(1..=beta);
            if beta.div_ceil(w) * step + s <= n {
                break (step, w);
            }
        };
        let window = example1_window(r, n, s, step, w, beta)?;
        let sigma_plus = r.random_range(0.1..10.0);
        let a: Vec<DMatrix<f64>> = (0..beta)
            .map(|_| {
                let norm = sigma_plus * r.random_range(0.05..=1.0);
                random_psd(r, s, norm)
            })
            .collect();
        let bands = if disjoint { 1 } else { 2 };
        let rep = check_block_bound(n, &window, &a, sigma_plus, bands, HMode::Constructive)?;
        if !rep.holds {
            violations += 1;
        }
        worst_ratio = worst_ratio.max(rep.lhs / rep.rhs);
        Ok(())
    };
    for _ in 0..1000 {
        run(&mut r, false)?;
    }
    for _ in 0..1000 {
        run(&mut r, true)?;
    }
    Ok(verdict(
        violations == 0,
        format!("2000 windows (1000 banded, 1000 disjoint), {violations} violations, max lhs/rhs = {worst_ratio:.3}"),
    ))
}

fn criterion_zeta() -> Result<Verdict> {
    let mut cases = 0;
    let mut bad = Vec::new();
    let mut worst_first: f64 = 0.0;
    let mut worst_second: f64 = 0.0;
    for r0 in [1, 2, 5, 10, 20, 50] {
        for c in [1, 2, 3, 5] {
            for num_changes in [1, 2, 3] {
                for f in [1.0, 1.5, 10.0, 100.0] {
                    for g in [1.0, 1.2, std::f64::consts::SQRT_2] {
                        let r = r0 + num_changes * c;
                        for scale in [1.0, 0.1] {
                            let zeta = zeta_bound(r, f, 0.0) * scale;
                            let k_max = proj_pca_steps(c, zeta);
                            cases += 1;
                            let seq = match zeta_plus_sequence(r0, c, num_changes, k_max, zeta, f, g) {
                                Ok(s) => s,
                                Err(e) => {
                                    bad.push(format!("r0={r0} c={c} J={num_changes} f={f} g={g}: {e}"));
                                    continue;
                                }
                            };
                            for vals in &seq.values {
                                worst_first = worst_first.max(vals[1]);
                                worst_second = worst_second.max(vals[2.min(k_max)]);
                                let decay_ok = (1..=k_max).all(|k| {
                                    vals[k] <= 0.72f64.powi(k as i32) + 0.83 * c as f64 * zeta + 1e-12
                                });
                                if !decay_ok || vals[1].is_nan() || vals[1] >= 0.1 || (k_max >= 2 && vals[2] > 0.06 + 1e-12) {
                                    bad.push(format!("r0={r0} c={c} J={num_changes} f={f} g={g} zeta={zeta:.2e}"));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(verdict(
        bad.is_empty(),
        format!(
            "{cases} grid points, {} failures, max zeta_1 = {worst_first:.4}, max zeta_2 = {worst_second:.4}{}",
            bad.len(),
            bad.first().map(|b| format!("; first: {b}")).unwrap_or_default()
        ),
    ))
}

fn criterion_bpdn() -> Result<Verdict> {
    let mut r = rng(SEED ^ 6);
    let mut worst_gap: f64 = 0.0;
    let mut worst_slack: f64 = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = r.random_range(3..=12);
        let rank = r.random_range(0..=3.min(n - 2));
        let p = orthonormal(&mut r, n, rank);
        let basis = BasisMatrix::new(p.clone(), 1e-10)?;
        let phi = DMatrix::identity(n, n) - &p * p.transpose();
        let k = r.random_range(1..=3.min(n));
        let mut x0 = DVector::zeros(n);
        for _ in 0..k {
            x0[r.random_range(0..n)] = r.random_range(1.0..4.0) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
        }
        let v = &x0 + gaussian_vec(&mut r, n) * r.random_range(0.0..0.5);
        let y = &phi * v;
        let xi = y.norm() * r.random_range(0.02..0.8);
        let proj = ComplementProjector(&basis);
        let sol = bpdn_solve(
            &BpdnProblem {
                projector: &proj,
                y: &y,
                xi,
            },
            &BpdnOptions::default(),
        )?;
        let (_, opt) = bpdn_oracle(&phi, &y, xi);
        worst_gap = worst_gap.max((sol.x.abs().sum() - opt).abs());
        worst_slack = worst_slack.max((&y - &phi * &sol.x).norm() - xi);
    }
    Ok(verdict(
        worst_gap <= 1e-4 && worst_slack <= 1e-6,
        format!("100 instances, max objective gap = {worst_gap:.2e}, max feasibility slack = {worst_slack:.2e}"),
    ))
}

fn criterion_sin_theta_cs() -> Result<Verdict> {
    let mut r = rng(SEED ^ 7);
    let mut sin_bad = 0;
    let mut dk_bad = 0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..1000 {
        let n = r.random_range(3..=10);
        let c = r.random_range(1..=3.min(n - 1));
        let e = orthonormal(&mut r, n, n);
        let e_new = e.columns(0, c).into_owned();
        let e_perp = e.columns(c, n - c).into_owned();
        let lam = r.random_range(0.5..5.0);
        let a_k = random_psd(&mut r, c, lam) + DMatrix::identity(c, c) * lam;
        let lam_min = a_k.clone().symmetric_eigen().eigenvalues.min();
        let perp_scale = lam_min * r.random_range(0.0..0.6);
        let a_perp = random_psd(&mut r, n - c, perp_scale);
        let perp_norm = a_perp.clone().symmetric_eigen().eigenvalues.amax();
        let g = gaussian(&mut r, n, n);
        let h_raw = &g + g.transpose();
        let h_norm = h_raw.clone().symmetric_eigen().eigenvalues.amax();
        let h = h_raw * ((lam_min - perp_norm) * r.random_range(0.0..0.45) / h_norm);
        let rep = check_sin_theta(&a_k, &a_perp, &h, &e_new, &e_perp)?;
        sin_bad += !rep.holds as usize;
        dk_bad += (rep.davis_kahan_holds == Some(false)) as usize;
        if rep.rhs > 0.0 {
            worst_ratio = worst_ratio.max(rep.lhs / rep.rhs);
        }
    }
    let mut cs_bad = 0;
    for _ in 0..1000 {
        let (rx, ry, k) = (r.random_range(1..=5), r.random_range(1..=5), r.random_range(1..=5));
        let alpha = r.random_range(1..=20);
        let xs: Vec<DMatrix<f64>> = (0..alpha).map(|_| gaussian(&mut r, rx, k)).collect();
        let ys: Vec<DMatrix<f64>> = (0..alpha).map(|_| gaussian(&mut r, ry, k)).collect();
        cs_bad += !matrix_cs_check(&xs, &ys)?.holds as usize;
    }
    Ok(verdict(
        sin_bad == 0 && dk_bad == 0 && cs_bad == 0,
        format!(
            "sin-theta: {sin_bad} violations (davis-kahan form {dk_bad}), max lhs/rhs = {worst_ratio:.3}; cauchy-schwarz: {cs_bad} violations"
        ),
    ))
}

// ------------------------------------------------------- exact support

/// Flat cosine/sine pair at frequency `k`.
fn flat_basis(n: usize, k: usize) -> Result<BasisMatrix> {
    let scale = (2.0 / n as f64).sqrt();
    let m = DMatrix::from_fn(n, 2, |i, j| {
        let phase = 2.0 * PI * (k * i) as f64 / n as f64;
        scale * if j == 0 { phase.cos() } else { phase.sin() }
    });
    BasisMatrix::new(m, 1e-10)
}

fn criterion_exact_support() -> Result<Verdict> {
    let (n, s, alpha) = (64, 1, 200);
    let (gamma, gamma_new, x_range) = (1.0, 0.04, (2.0, 6.0));
    let t1 = 50;
    let probe = ModelConfig {
        n,
        t_max: t1 + 1,
        r0: 1,
        change_times: vec![t1],
        c_new: vec![1],
        gamma,
        gamma_new,
        ramp: 1,
    };
    let probe_model = subspace_model_from_basis(&probe, flat_basis(n, 1)?, 0)?;
    let tp = theorem_params(&TheoremInputs {
        r0: 1,
        c: 1,
        num_changes: 1,
        r: 2,
        f: probe_model.f,
        g: probe_model.g,
        gamma,
        gamma_new,
        x_min: x_range.0,
        lambda_minus: probe_model.lambda_minus,
        n,
    })?;
    let cfg = ModelConfig {
        t_max: t1 + tp.k * alpha + 2 * alpha,
        ramp: tp.k * alpha,
        ..probe
    };
    let params = reprocs_core::ReProCSParams {
        xi: tp.xi,
        omega: tp.omega_mid(),
        alpha,
        k: tp.k,
        change_times: cfg.change_times.clone(),
        c_new: cfg.c_new.clone(),
        max_support: Some(2 * s),
        solver: BpdnOptions::default(),
    };
    let supports: SupportSequence = gen_support_example1(n, s, 1, 1, cfg.t_max, 0)?;
    let h = h_star(&supports, alpha, HMode::Constructive)?;
    let h_limit = alpha as f64 * H_PLUS_DISJOINT;

    let mut worst_kappa: f64 = 0.0;
    let mut worst_se0: f64 = 0.0;
    let mut exact_trials = 0;
    let mut missed_frames = 0;
    for trial in 0..20u64 {
        let seed = trial_seed(SEED ^ 8, trial as usize);
        let freq = 1 + (seed % 31) as usize;
        let full = flat_basis(n, freq)?;
        worst_kappa = worst_kappa.max(kappa_s(&full, 2 * s, KappaMode::Exact)?.value);
        let model = subspace_model_from_basis(&cfg, full, seed)?;
        let (p0_hat, se0) = perturb_initial_estimate(&model.bases[0], 1e-9, seed)?;
        worst_se0 = worst_se0.max(se0);
        if worst_kappa > 0.3 || h as f64 > h_limit || se0 > tp.zeta {
            break;
        }
        let stream = synthesize_stream(&model, &supports, x_range, seed)?;
        let log = run_stream(stream, params.clone(), p0_hat, &model)?;
        let missed = log.records.iter().filter(|r| !r.support_exact).count();
        missed_frames += missed;
        exact_trials += (missed == 0) as usize;
    }
    let regime_ok = worst_kappa <= 0.3 && h as f64 <= h_limit && worst_se0 <= tp.zeta;
    Ok(verdict(
        regime_ok && exact_trials == 20,
        format!(
            "regime: kappa_2s={worst_kappa:.3} (<= 0.3), h={h} (<= alpha/22 = {h_limit:.2}), SE0={worst_se0:.1e} (<= r0 zeta = {:.1e}), xi={:.4}, omega={:.3}, K={}; exact support at every frame in {exact_trials}/20 trials ({missed_frames} missed frames)",
            tp.zeta, tp.xi, tp.omega_mid(), tp.k
        ),
    ))
}
