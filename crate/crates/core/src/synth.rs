//! Synthetic data: nested subspace models, coefficient sequences, support
//! motion models and the measurement stream `m_t = x_t + ℓ_t`.
//!
//! Time indices are 1-based (`t = 1..=t_max`); support indices are 0-based.

use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::{Bernoulli, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::subspace_error;
use crate::error::{Error, Result};
use crate::linalg::{gram_schmidt, BasisMatrix};
use crate::rng::{stream_rng, Stream};

/// Divisor used by the published simulation: the support moves every
/// `⌊α/44⌋` frames.
pub const SIMULATION_MOVE_DIVISOR: usize = 44;
/// Divisor required by the correctness theorem: `h*(α) ≤ α/200`.
pub const THEOREM_MOVE_DIVISOR: usize = 200;

/// Draws an `n × r` Gaussian matrix and orthonormalises its columns.
pub fn gen_basis(n: usize, r: usize, seed: u64) -> Result<BasisMatrix> {
    if r > n {
        return Err(Error::Dimension(format!("rank {r} exceeds dimension {n}")));
    }
    if r == 0 {
        return Err(Error::InvalidInput("rank must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, Stream::Basis, 0);
    let raw = DMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    BasisMatrix::orthonormalize(raw)
}

/// Parameters of the piecewise-constant nested subspace model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    pub t_max: usize,
    pub r0: usize,
    /// Change instants `t_1 < t_2 < …`.
    pub change_times: Vec<usize>,
    /// Number of directions added at each change.
    pub c_new: Vec<usize>,
    /// Sup-norm bound on coefficients.
    pub gamma: f64,
    /// Sup-norm bound on new-direction coefficients during the ramp.
    pub gamma_new: f64,
    /// Number of frames after a change during which `gamma_new` applies.
    pub ramp: usize,
}

impl ModelConfig {
    /// The configuration of the published simulation (`K α = 4800`).
    pub fn simulation() -> Self {
        Self {
            n: 256,
            t_max: 10_000,
            r0: 10,
            change_times: vec![25, 5001],
            c_new: vec![2, 2],
            gamma: 5.0,
            gamma_new: 0.04,
            ramp: 6 * 800,
        }
    }

    pub fn total_rank(&self) -> usize {
        self.r0 + self.c_new.iter().sum::<usize>()
    }

    fn validate(&self) -> Result<()> {
        if self.change_times.len() != self.c_new.len() {
            return Err(Error::Config(format!(
                "{} change times but {} c_new entries",
                self.change_times.len(),
                self.c_new.len()
            )));
        }
        if self.total_rank() > self.n {
            return Err(Error::Config(format!(
                "total rank {} exceeds n = {}",
                self.total_rank(),
                self.n
            )));
        }
        if self.gamma < 0.0 || self.gamma_new < 0.0 {
            return Err(Error::Config("coefficient bounds must be nonnegative".into()));
        }
        for (i, &t) in self.change_times.iter().enumerate() {
            if t < 1 || t > self.t_max {
                return Err(Error::Config(format!(
                    "change time {t} outside [1, {}]",
                    self.t_max
                )));
            }
            if i > 0 {
                let prev = self.change_times[i - 1];
                if t <= prev {
                    return Err(Error::Config("change times must be strictly increasing".into()));
                }
                if t - prev <= self.ramp {
                    return Err(Error::Config(format!(
                        "changes at {prev} and {t} are not separated by more than the ramp {}",
                        self.ramp
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Subspace trajectory `P_(0) ⊂ P_(1) ⊂ …` plus coefficient statistics.
#[derive(Debug, Clone)]
pub struct SubspaceModel {
    pub config: ModelConfig,
    /// Segment bases; `bases[j]` is active for `t_j ≤ t < t_{j+1}`.
    pub bases: Vec<BasisMatrix>,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub lambda_new_minus: f64,
    pub lambda_new_plus: f64,
    /// `λ⁺/λ⁻`.
    pub f: f64,
    /// `λ⁺_new/λ⁻_new`.
    pub g: f64,
    seed: u64,
}

/// Builds the nested bases from one orthonormalised Gaussian matrix: the
/// first `r0` columns form `P_(0)`, the next `c_1` columns `P_(1),new`, …
pub fn gen_subspace_model(cfg: &ModelConfig, seed: u64) -> Result<SubspaceModel> {
    cfg.validate()?;
    let r = cfg.total_rank();
    let full = if r == 0 {
        BasisMatrix::empty(cfg.n)
    } else {
        gen_basis(cfg.n, r, seed)?
    };
    subspace_model_from_basis(cfg, full, seed)
}

/// As [`gen_subspace_model`] with the nested bases taken from the columns of
/// `full`, which must be `n × total_rank`. `seed` drives the coefficients.
pub fn subspace_model_from_basis(cfg: &ModelConfig, full: BasisMatrix, seed: u64) -> Result<SubspaceModel> {
    cfg.validate()?;
    if full.n() != cfg.n || full.rank() != cfg.total_rank() {
        return Err(Error::Dimension(format!(
            "basis is {}×{}, model needs {}×{}",
            full.n(),
            full.rank(),
            cfg.n,
            cfg.total_rank()
        )));
    }
    let mut bases = Vec::with_capacity(cfg.c_new.len() + 1);
    let mut rank = cfg.r0;
    bases.push(full.leading(rank));
    for &c in &cfg.c_new {
        rank += c;
        bases.push(full.leading(rank));
    }

    let var = |bound: f64| bound * bound / 3.0;
    let has_ramp = !cfg.change_times.is_empty() && cfg.ramp > 0 && cfg.c_new.iter().any(|&c| c > 0);
    let lambda_plus = var(cfg.gamma.max(if has_ramp { cfg.gamma_new } else { 0.0 }));
    let lambda_minus = if has_ramp {
        var(cfg.gamma.min(cfg.gamma_new))
    } else {
        var(cfg.gamma)
    };
    let (lambda_new_minus, lambda_new_plus) = if has_ramp {
        (var(cfg.gamma_new), var(cfg.gamma_new))
    } else {
        (0.0, 0.0)
    };
    let ratio = |hi: f64, lo: f64| if hi == lo { 1.0 } else { hi / lo };
    Ok(SubspaceModel {
        config: cfg.clone(),
        bases,
        lambda_minus,
        lambda_plus,
        lambda_new_minus,
        lambda_new_plus,
        f: ratio(lambda_plus, lambda_minus),
        g: ratio(lambda_new_plus, lambda_new_minus),
        seed,
    })
}

impl SubspaceModel {
    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn t_max(&self) -> usize {
        self.config.t_max
    }

    /// Largest rank `r`.
    pub fn rank(&self) -> usize {
        self.config.total_rank()
    }

    /// Number of changes `J`.
    pub fn num_changes(&self) -> usize {
        self.config.change_times.len()
    }

    /// Largest number of directions added at once, `c`.
    pub fn c_max(&self) -> usize {
        self.config.c_new.iter().copied().max().unwrap_or(0)
    }

    /// Segment index active at time `t`.
    pub fn segment_at(&self, t: usize) -> usize {
        self.config.change_times.iter().take_while(|&&tj| tj <= t).count()
    }

    /// `P_t`.
    pub fn basis_at(&self, t: usize) -> &BasisMatrix {
        &self.bases[self.segment_at(t)]
    }

    /// The newly added block `P_(j),new` for change `j ≥ 1`.
    pub fn new_directions(&self, j: usize) -> BasisMatrix {
        let prev = self.bases[j - 1].rank();
        self.bases[j].columns(prev, self.bases[j].rank() - prev)
    }

    /// Sup-norm bound on coefficient `col` at time `t`.
    fn coefficient_bound(&self, col: usize, t: usize) -> f64 {
        let cfg = &self.config;
        if col < cfg.r0 {
            return cfg.gamma;
        }
        let mut start = cfg.r0;
        for (j, &c) in cfg.c_new.iter().enumerate() {
            if col < start + c {
                let tj = cfg.change_times[j];
                return if t >= tj && t < tj + cfg.ramp {
                    cfg.gamma_new
                } else {
                    cfg.gamma
                };
            }
            start += c;
        }
        cfg.gamma
    }

    /// Coefficient vector `a_t` (length `r_j` of the active segment), drawn
    /// uniformly on `[−bound, bound]` per entry from the model's seed.
    pub fn coefficients(&self, t: usize) -> DVector<f64> {
        let mut rng = stream_rng(self.seed, Stream::Coefficients, t as u64);
        let r = self.basis_at(t).rank();
        DVector::from_fn(r, |i, _| {
            let b = self.coefficient_bound(i, t);
            if b == 0.0 {
                0.0
            } else {
                rng.random_range(-b..=b)
            }
        })
    }

    /// `ℓ_t = P_t a_t`.
    pub fn low_rank_at(&self, t: usize, a: &DVector<f64>) -> DVector<f64> {
        let p = self.basis_at(t);
        if p.is_empty() {
            DVector::zeros(self.n())
        } else {
            p.as_matrix() * a
        }
    }
}

/// Which generator produced a support sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupportModel {
    /// Contiguous block moving down by `step` every `move_every` frames.
    Example1 { step: usize, move_every: usize },
    /// Center random walk with Bernoulli moves and Gaussian jitter.
    Probabilistic { q: f64, sigma2: f64 },
    /// Contiguous block advancing by `1..=max_step` every frame.
    EveryFrame { max_step: usize },
    /// Independent uniform `s`-subsets.
    Uniform,
    /// Supplied by the caller.
    Custom,
}

/// Per-frame supports `T_t` (0-based, sorted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSequence {
    pub n: usize,
    pub s: usize,
    pub supports: Vec<Vec<usize>>,
    pub model: SupportModel,
    pub seed: u64,
}

impl SupportSequence {
    /// Wraps caller-supplied supports, validating indices and sizes.
    pub fn from_supports(n: usize, supports: Vec<Vec<usize>>) -> Result<Self> {
        let mut s = 0;
        let mut out = Vec::with_capacity(supports.len());
        for mut sup in supports {
            sup.sort_unstable();
            sup.dedup();
            if let Some(&last) = sup.last() {
                if last >= n {
                    return Err(Error::InvalidInput(format!("support index {last} ≥ n = {n}")));
                }
            }
            s = s.max(sup.len());
            out.push(sup);
        }
        Ok(Self {
            n,
            s,
            supports: out,
            model: SupportModel::Custom,
            seed: 0,
        })
    }

    /// All-empty supports (`s = 0`).
    pub fn empty(n: usize, t_max: usize) -> Self {
        Self {
            n,
            s: 0,
            supports: vec![Vec::new(); t_max],
            model: SupportModel::Custom,
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    /// `T_t` for 1-based `t`.
    pub fn at(&self, t: usize) -> &[usize] {
        &self.supports[t - 1]
    }

    /// Supports for frames `start..start+len` (1-based `start`).
    pub fn window(&self, start: usize, len: usize) -> &[Vec<usize>] {
        &self.supports[start - 1..start - 1 + len]
    }
}

fn contiguous_block(n: usize, start: usize, s: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..s).map(|i| (start + i) % n).collect();
    v.sort_unstable();
    v
}

/// `⌊α / divisor⌋`, at least 1.
pub fn move_every_for_alpha(alpha: usize, divisor: usize) -> usize {
    (alpha / divisor).max(1)
}

/// Block of `s` consecutive indices (cyclic) moving down by `step` every
/// `move_every` frames, starting at index 0. Requires `s/2 ≤ step < 2s`.
pub fn gen_support_example1(
    n: usize,
    s: usize,
    step: usize,
    move_every: usize,
    t_max: usize,
    seed: u64,
) -> Result<SupportSequence> {
    if s > n {
        return Err(Error::InvalidInput(format!("s = {s} exceeds n = {n}")));
    }
    if 2 * step < s || step >= 2 * s {
        return Err(Error::ModelViolation(format!(
            "step {step} outside [s/2, 2s) for s = {s}"
        )));
    }
    if move_every == 0 {
        return Err(Error::InvalidInput("move_every must be at least 1".into()));
    }
    let supports = (0..t_max)
        .map(|i| contiguous_block(n, ((i / move_every) * step) % n, s))
        .collect();
    Ok(SupportSequence {
        n,
        s,
        supports,
        model: SupportModel::Example1 { step, move_every },
        seed,
    })
}

/// One step of the center random walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterStep {
    pub moved: bool,
    /// Gaussian jitter drawn for this frame (applied only if `moved`).
    pub jitter: f64,
    /// Center after the step (unwrapped real).
    pub center: f64,
}

/// `o_t = o_{t−1} + θ_t (0.6 s + ν_t)`, `θ_t ~ Bernoulli(q)`, `ν_t ~ N(0, σ²)`.
#[derive(Debug, Clone)]
pub struct CenterWalk {
    s: usize,
    moves: Bernoulli,
    jitter: Normal<f64>,
    center: f64,
    t: u64,
    seed: u64,
}

impl CenterWalk {
    pub fn new(s: usize, q: f64, sigma2: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidInput(format!("q = {q} outside [0, 1]")));
        }
        if sigma2 < 0.0 {
            return Err(Error::InvalidInput(format!("sigma2 = {sigma2} is negative")));
        }
        Ok(Self {
            s,
            moves: Bernoulli::new(q).map_err(|e| Error::InvalidInput(e.to_string()))?,
            jitter: Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::InvalidInput(e.to_string()))?,
            center: (s / 2) as f64,
            t: 0,
            seed,
        })
    }

    pub fn center(&self) -> f64 {
        self.center
    }
}

impl Iterator for CenterWalk {
    type Item = CenterStep;

    fn next(&mut self) -> Option<CenterStep> {
        self.t += 1;
        let mut rng = stream_rng(self.seed, Stream::Support, self.t);
        let moved = self.moves.sample(&mut rng);
        let jitter = self.jitter.sample(&mut rng);
        if moved {
            self.center += 0.6 * self.s as f64 + jitter;
        }
        Some(CenterStep {
            moved,
            jitter,
            center: self.center,
        })
    }
}

fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Support centered at the random-walk position. The first frame is
/// `{0..s-1}`; the walk is applied from the second frame on.
pub fn gen_support_probabilistic(
    n: usize,
    s: usize,
    q: f64,
    sigma2: f64,
    t_max: usize,
    seed: u64,
) -> Result<SupportSequence> {
    if s > n {
        return Err(Error::InvalidInput(format!("s = {s} exceeds n = {n}")));
    }
    let mut walk = CenterWalk::new(s, q, sigma2, seed)?;
    let half = (s / 2) as i64;
    let block = |center: f64| {
        let start = (round_half_up(center) - half).rem_euclid(n as i64) as usize;
        contiguous_block(n, start, s)
    };
    let mut supports = Vec::with_capacity(t_max);
    if t_max > 0 {
        supports.push(block(walk.center()));
    }
    for step in walk.by_ref().take(t_max.saturating_sub(1)) {
        supports.push(block(step.center));
    }
    Ok(SupportSequence {
        n,
        s,
        supports,
        model: SupportModel::Probabilistic { q, sigma2 },
        seed,
    })
}

/// Jitter variance `ρ s² / log n`.
pub fn probabilistic_sigma2(rho: f64, s: usize, n: usize) -> f64 {
    rho * (s * s) as f64 / (n as f64).ln()
}

/// Block advancing by `Uniform{1..=a}` indices each frame, same direction.
pub fn gen_support_everyframe(
    n: usize,
    s: usize,
    a: usize,
    t_max: usize,
    seed: u64,
) -> Result<SupportSequence> {
    if a == 0 {
        return Err(Error::InvalidInput("max step must be at least 1".into()));
    }
    if s + a > n {
        return Err(Error::InvalidInput(format!("s + a = {} exceeds n = {n}", s + a)));
    }
    let steps = Uniform::new_inclusive(1, a).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut start = 0usize;
    let mut supports = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        if t > 1 {
            let mut rng = stream_rng(seed, Stream::Support, t as u64);
            start = (start + steps.sample(&mut rng)) % n;
        }
        supports.push(contiguous_block(n, start, s));
    }
    Ok(SupportSequence {
        n,
        s,
        supports,
        model: SupportModel::EveryFrame { max_step: a },
        seed,
    })
}

/// Independent uniformly random `s`-subsets.
pub fn gen_support_uniform(n: usize, s: usize, t_max: usize, seed: u64) -> Result<SupportSequence> {
    if s > n {
        return Err(Error::InvalidInput(format!("s = {s} exceeds n = {n}")));
    }
    let supports = (1..=t_max)
        .map(|t| {
            let mut rng = stream_rng(seed, Stream::Support, t as u64);
            let mut v = rand::seq::index::sample(&mut rng, n, s).into_vec();
            v.sort_unstable();
            v
        })
        .collect();
    Ok(SupportSequence {
        n,
        s,
        supports,
        model: SupportModel::Uniform,
        seed,
    })
}

/// One frame of synthetic data.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSample {
    pub t: usize,
    pub m: DVector<f64>,
    pub x_true: DVector<f64>,
    pub l_true: DVector<f64>,
    pub a_true: DVector<f64>,
}

impl StreamSample {
    pub fn support(&self) -> Vec<usize> {
        self.x_true
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Lazily generated measurement stream.
#[derive(Debug, Clone)]
pub struct SyntheticStream<'a> {
    model: &'a SubspaceModel,
    supports: &'a SupportSequence,
    values: Uniform<f64>,
    seed: u64,
    t: usize,
}

/// Iterator over `StreamSample`s for `t = 1..=t_max`. Nonzero entries of
/// `x_t` are drawn uniformly from `value_range`.
pub fn synthesize_stream<'a>(
    model: &'a SubspaceModel,
    supports: &'a SupportSequence,
    value_range: (f64, f64),
    seed: u64,
) -> Result<SyntheticStream<'a>> {
    let (lo, hi) = value_range;
    if !(lo > 0.0) || hi < lo {
        return Err(Error::InvalidInput(format!(
            "value range [{lo}, {hi}] must satisfy 0 < lo ≤ hi"
        )));
    }
    if supports.n != model.n() {
        return Err(Error::Dimension(format!(
            "supports are over n = {} but the model has n = {}",
            supports.n,
            model.n()
        )));
    }
    if supports.len() != model.t_max() {
        return Err(Error::Dimension(format!(
            "{} supports for t_max = {}",
            supports.len(),
            model.t_max()
        )));
    }
    Ok(SyntheticStream {
        model,
        supports,
        values: Uniform::new_inclusive(lo, hi).map_err(|e| Error::InvalidInput(e.to_string()))?,
        seed,
        t: 0,
    })
}

impl Iterator for SyntheticStream<'_> {
    type Item = StreamSample;

    fn next(&mut self) -> Option<StreamSample> {
        if self.t >= self.model.t_max() {
            return None;
        }
        self.t += 1;
        let t = self.t;
        let a = self.model.coefficients(t);
        let l = self.model.low_rank_at(t, &a);
        let mut x = DVector::zeros(self.model.n());
        let mut rng = stream_rng(self.seed, Stream::SparseValues, t as u64);
        for &i in self.supports.at(t) {
            x[i] = self.values.sample(&mut rng);
        }
        let m = &x + &l;
        Some(StreamSample {
            t,
            m,
            x_true: x,
            l_true: l,
            a_true: a,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.model.t_max() - self.t;
        (left, Some(left))
    }
}

impl ExactSizeIterator for SyntheticStream<'_> {}

/// `P0` plus i.i.d. `N(0, noise_std²)` entries, re-orthonormalised. Returns
/// the estimate and its subspace error `‖(I − P̂P̂ᵀ)P0‖₂`.
pub fn perturb_initial_estimate(
    p0: &BasisMatrix,
    noise_std: f64,
    seed: u64,
) -> Result<(BasisMatrix, f64)> {
    if noise_std < 0.0 {
        return Err(Error::InvalidInput("noise_std must be nonnegative".into()));
    }
    if p0.is_empty() {
        return Ok((p0.clone(), 0.0));
    }
    let mut rng = stream_rng(seed, Stream::InitialEstimate, 0);
    let noisy = DMatrix::from_fn(p0.n(), p0.rank(), |i, j| {
        p0.as_matrix()[(i, j)] + noise_std * rng.sample::<f64, _>(StandardNormal)
    });
    let estimate = BasisMatrix::from_trusted(gram_schmidt(noisy)?);
    let se = subspace_error(&estimate, p0);
    Ok((estimate, se))
}
