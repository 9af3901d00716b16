//! The multilogit-bilinear model
//!
//! ```text
//! P(x_ij = c) ∝ exp θ_ij(c),   θ_ij(c) = β_j(c) + Γ_i^j(c),   Γ = U D Vᵀ,
//! ```
//!
//! with `Γʲpʲ = 0` per row and `β` of `pʲ`-weighted mean zero per block, and
//! a majorization-minimization fitter for the (optionally trace-norm
//! penalized) likelihood.
//!
//! The fitter works with the quadratic minorant of the multinomial
//! log-likelihood given by the curvature bound `½` on every block:
//!
//! ```text
//! ℓ(Θ) ≥ ℓ(Θ₀) + ⟨A − P₀, Θ − Θ₀⟩ − ¼‖Θ − Θ₀‖²_F.
//! ```
//!
//! Maximizing the minorant minus `λ‖Γ‖_*` under `rank Γ ≤ K` is a proximal
//! step: `β` moves by twice the column means of `A − P₀`, and `Γ` is the
//! rank-K truncation of the singular values of `Γ₀ + 2(A − P₀)` (column
//! centered) soft-thresholded at `2λ`. Inside the fitter `Γ` is kept
//! column-centered with uniformly centered blocks; the penalty is applied to
//! that representative. Results are converted to the `pʲ`-weighted
//! convention on output.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corresp::scale_cols;
use crate::error::{Error, Result};
use crate::lowrank::{leading_svd, truncated_svd, RankKFactors};
use crate::mca::{center_blocks, OneStepEstimate};
use crate::tables::{category_margins, CategoryLayout, IndicatorMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilogitModel {
    /// Length-C offsets, `pʲ`-weighted mean zero per block.
    pub beta: DVector<f64>,
    /// `Γ = U D Vᵀ`, `n × C`.
    pub factors: RankKFactors,
    pub layout: CategoryLayout,
    /// The weights `p` of the centering convention.
    pub weights: DVector<f64>,
}

impl MultilogitModel {
    /// Builds a model from raw parameters, moving each row block's
    /// weighted mean of `Γ` out (probabilities are unchanged) and keeping
    /// the rank-`k` part of the result.
    pub fn from_parameters(
        beta: DVector<f64>,
        gamma: DMatrix<f64>,
        k: usize,
        layout: CategoryLayout,
        weights: DVector<f64>,
    ) -> Result<Self> {
        let c = layout.n_categories();
        if beta.len() != c || gamma.ncols() != c || weights.len() != c {
            return Err(Error::LayoutMismatch);
        }
        if beta.iter().chain(gamma.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut gamma = gamma;
        center_blocks(&mut gamma, &weights, &layout);
        let mut beta = beta;
        center_vector(&mut beta, &weights, &layout);
        let factors = truncated_svd(&gamma, k)?;
        Ok(Self {
            beta,
            factors,
            layout,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.factors.nrows()
    }

    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    pub fn gamma(&self) -> DMatrix<f64> {
        self.factors.reconstruct()
    }

    /// `θ = 1βᵀ + Γ`.
    pub fn theta(&self) -> DMatrix<f64> {
        let mut t = self.gamma();
        add_row(&mut t, &self.beta);
        t
    }
}

fn add_row(m: &mut DMatrix<f64>, row: &DVector<f64>) {
    for (j, mut col) in m.column_iter_mut().enumerate() {
        col.add_scalar_mut(row[j]);
    }
}

fn center_vector(v: &mut DVector<f64>, w: &DVector<f64>, layout: &CategoryLayout) {
    for b in layout.blocks() {
        let mean: f64 = b.clone().map(|c| w[c] * v[c]).sum();
        for c in b {
            v[c] -= mean;
        }
    }
}

/// `n × C` probabilities, each row block on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityBlocks {
    pub probs: DMatrix<f64>,
    pub layout: CategoryLayout,
}

impl ProbabilityBlocks {
    /// Largest `|Σ_c P_ic − 1|` over rows and blocks.
    pub fn simplex_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.probs.nrows() {
            for b in self.layout.blocks() {
                let s: f64 = b.map(|c| self.probs[(i, c)]).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
        worst
    }
}

/// Per-iteration record of a majorization fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    /// Penalized log-likelihood, starting with the initial point.
    pub objective: Vec<f64>,
    /// `‖A − P‖_F` at the same points.
    pub gradient_norm: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Iterations whose inexact SVD had to be redone exactly.
    pub exact_fallbacks: usize,
    pub warning: Option<String>,
}

/// Blockwise softmax of `θ` with max subtraction.
pub fn softmax_blocks(theta: &DMatrix<f64>, layout: &CategoryLayout) -> ProbabilityBlocks {
    let mut probs = theta.clone();
    for i in 0..theta.nrows() {
        for b in layout.blocks() {
            let lse = log_sum_exp(theta, i, b.clone());
            for c in b {
                probs[(i, c)] = (theta[(i, c)] - lse).exp();
            }
        }
    }
    ProbabilityBlocks {
        probs,
        layout: layout.clone(),
    }
}

fn log_sum_exp(theta: &DMatrix<f64>, i: usize, b: std::ops::Range<usize>) -> f64 {
    let mx = b.clone().map(|c| theta[(i, c)]).fold(f64::NEG_INFINITY, f64::max);
    mx + b.map(|c| (theta[(i, c)] - mx).exp()).sum::<f64>().ln()
}

fn check_model(model: &MultilogitModel) -> Result<()> {
    if model.beta.iter().chain(model.factors.d().iter()).any(|x| !x.is_finite())
        || model.factors.u().iter().chain(model.factors.v().iter()).any(|x| !x.is_finite())
    {
        return Err(Error::NonFinite);
    }
    Ok(())
}

pub fn predict_probabilities(model: &MultilogitModel) -> Result<ProbabilityBlocks> {
    check_model(model)?;
    Ok(softmax_blocks(&model.theta(), &model.layout))
}

/// Individuals `ũ_i = D^{1/2}u_i`, categories `ṽ_j(c) = D^{1/2}v_j(c)`, and
/// offsets `β̃_j(c) = β_j(c) + ½‖ṽ_j(c)‖²` such that
/// `P(x_ij = c) ∝ exp{β̃_j(c) − ½‖ṽ_j(c) − ũ_i‖²}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCoordinates {
    pub individuals: DMatrix<f64>,
    pub categories: DMatrix<f64>,
    pub offsets: DVector<f64>,
}

pub fn latent_coordinates(model: &MultilogitModel) -> LatentCoordinates {
    let sd = model.factors.d().map(f64::sqrt);
    let individuals = scale_cols(model.factors.u(), &sd);
    let categories = scale_cols(model.factors.v(), &sd);
    let offsets = DVector::from_fn(categories.nrows(), |c, _| {
        model.beta[c] + 0.5 * categories.row(c).norm_squared()
    });
    LatentCoordinates {
        individuals,
        categories,
        offsets,
    }
}

/// Probabilities from the distance form of [`LatentCoordinates`].
pub fn probabilities_from_latent(lat: &LatentCoordinates, layout: &CategoryLayout) -> ProbabilityBlocks {
    let n = lat.individuals.nrows();
    let theta = DMatrix::from_fn(n, lat.categories.nrows(), |i, c| {
        lat.offsets[c] - 0.5 * (lat.categories.row(c) - lat.individuals.row(i)).norm_squared()
    });
    softmax_blocks(&theta, layout)
}

fn check_layout(model: &MultilogitModel, a: &IndicatorMatrix) -> Result<()> {
    if model.layout != *a.layout() || model.n() != a.n() {
        return Err(Error::LayoutMismatch);
    }
    Ok(())
}

/// Observed cells; `None` means every cell is observed.
type Mask<'a> = Option<&'a [bool]>;

fn observed(mask: Mask, i: usize, j: usize, m: usize) -> bool {
    mask.is_none_or(|mk| mk[i * m + j])
}

/// `(ℓ, P)` at `θ`, summing over observed cells only.
fn evaluate(theta: &DMatrix<f64>, a: &IndicatorMatrix, mask: Mask) -> (f64, DMatrix<f64>) {
    let layout = a.layout();
    let m = layout.n_variables();
    let x = a.entries();
    let mut probs = DMatrix::zeros(theta.nrows(), theta.ncols());
    let mut ll = 0.0;
    for i in 0..theta.nrows() {
        for (j, b) in layout.blocks().enumerate() {
            let lse = log_sum_exp(theta, i, b.clone());
            let on = observed(mask, i, j, m);
            for c in b {
                probs[(i, c)] = (theta[(i, c)] - lse).exp();
                if on && x[(i, c)] != 0.0 {
                    ll += x[(i, c)] * (theta[(i, c)] - lse);
                }
            }
        }
    }
    (ll, probs)
}

/// `Σ_ij [θ_ij(x_ij) − log Σ_c e^{θ_ij(c)}]`.
pub fn log_likelihood(model: &MultilogitModel, a: &IndicatorMatrix) -> Result<f64> {
    check_layout(model, a)?;
    check_model(model)?;
    Ok(evaluate(&model.theta(), a, None).0)
}

/// `∂ℓ/∂Γ = A − P`.
pub fn gradient_interaction(model: &MultilogitModel, a: &IndicatorMatrix) -> Result<DMatrix<f64>> {
    let p = predict_probabilities(model)?;
    check_layout(model, a)?;
    Ok(a.entries() - p.probs)
}

fn block_variance_sum(delta: &DMatrix<f64>, p: &DVector<f64>, layout: &CategoryLayout) -> f64 {
    let mut s = 0.0;
    for i in 0..delta.nrows() {
        for b in layout.blocks() {
            let mean: f64 = b.clone().map(|c| p[c] * delta[(i, c)]).sum();
            s += b.map(|c| p[c] * (delta[(i, c)] - mean).powi(2)).sum::<f64>();
        }
    }
    s
}

/// Second-order expansion of `ℓ(β, Γ) − ℓ(β₀, 0)` around the independence
/// model `β₀ = log p`:
///
/// ```text
/// ⟨Δ, A − 1pᵀ⟩ − ½ Σ_ij Var_{pʲ}(Δ_ij),    Δ = 1(β − β₀)ᵀ + Γ.
/// ```
///
/// The constant `ℓ(β₀, 0)` is omitted. At `β = β₀` and `Γʲpʲ = 0` this is
/// `⟨Γ, A − 1pᵀ⟩ − ½‖Γ D_p^{1/2}‖²_F`.
pub fn taylor_objective(a: &IndicatorMatrix, beta: &DVector<f64>, gamma: &DMatrix<f64>) -> Result<f64> {
    let layout = a.layout();
    if beta.len() != layout.n_categories() || gamma.shape() != a.entries().shape() {
        return Err(Error::LayoutMismatch);
    }
    let p = category_margins(a)?;
    let beta0 = p.p().map(f64::ln);
    let mut delta = gamma.clone();
    add_row(&mut delta, &(beta - beta0));
    let mut lin = 0.0;
    for i in 0..delta.nrows() {
        for c in 0..delta.ncols() {
            lin += delta[(i, c)] * (a.entries()[(i, c)] - p.p()[c]);
        }
    }
    Ok(lin - 0.5 * block_variance_sum(&delta, p.p(), layout))
}

/// `⟨Γ, A − 1pᵀ⟩ − ½‖Γ D_p^{1/2}‖²_F`, the interaction part of
/// [`taylor_objective`] at `β = β₀`.
pub fn taylor_interaction_objective(a: &IndicatorMatrix, gamma: &DMatrix<f64>) -> Result<f64> {
    if gamma.shape() != a.entries().shape() {
        return Err(Error::LayoutMismatch);
    }
    let p = category_margins(a)?;
    let mut s = 0.0;
    for i in 0..gamma.nrows() {
        for c in 0..gamma.ncols() {
            let g = gamma[(i, c)];
            s += g * (a.entries()[(i, c)] - p.p()[c]) - 0.5 * p.p()[c] * g * g;
        }
    }
    Ok(s)
}

pub fn rmse_probabilities(truth: &ProbabilityBlocks, est: &ProbabilityBlocks) -> Result<f64> {
    if truth.probs.shape() != est.probs.shape() {
        return Err(Error::ShapeMismatch {
            expected: truth.probs.shape(),
            got: est.probs.shape(),
        });
    }
    let n = truth.probs.len() as f64;
    Ok(((&truth.probs - &est.probs).norm_squared() / n).sqrt())
}

/// The model `(β₀, Γ̂)` of a one-step estimate.
pub fn model_from_one_step(est: &OneStepEstimate) -> MultilogitModel {
    let f = &est.factors;
    // Γ̂ = U D (D_p^{-1/2} V)ᵀ; re-orthonormalize the right factor
    let k = f.rank();
    let factors = if k == 0 {
        RankKFactors::empty(f.nrows(), f.ncols())
    } else {
        truncated_svd(&est.gamma, k).expect("finite one-step estimate")
    };
    MultilogitModel {
        beta: est.beta0.clone(),
        factors,
        layout: est.layout().clone(),
        weights: est.margins.p().clone(),
    }
}

pub fn probabilities_from_one_step(est: &OneStepEstimate) -> ProbabilityBlocks {
    let mut theta = est.gamma.clone();
    add_row(&mut theta, &est.beta0);
    softmax_blocks(&theta, est.layout())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// `β = log p̂`, `Γ` = half the one-step estimate.
    Mca,
    /// `β = log p̂`, `Γ = 0`.
    Cold,
}

impl std::str::FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mca" => Ok(Init::Mca),
            "cold" => Ok(Init::Cold),
            other => Err(Error::InvalidArgument(format!("unknown init `{}` (expected mca or cold)", other))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmOptions {
    /// Trace-norm penalty `λ ≥ 0`.
    pub lambda: f64,
    pub max_iter: usize,
    /// Relative change of the objective that stops the iteration.
    pub tol: f64,
    pub init: Init,
    /// Nesterov extrapolation with restarts; the objective stays monotone.
    pub accelerate: bool,
}

impl Default for MmOptions {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            max_iter: 2000,
            tol: 1e-8,
            init: Init::Mca,
            accelerate: false,
        }
    }
}

/// Internal parametrization: `θ = 1β̃ᵀ + U diag(d) Vᵀ` with the interaction
/// column-centered and uniformly block-centered.
#[derive(Clone)]
struct MmState {
    beta: DVector<f64>,
    f: RankKFactors,
}

impl MmState {
    fn theta(&self) -> DMatrix<f64> {
        let mut t = self.f.reconstruct();
        add_row(&mut t, &self.beta);
        t
    }

    fn penalty(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            0.0
        } else {
            lambda * self.f.d().sum()
        }
    }
}

fn uniform_center(gamma: &mut DMatrix<f64>, layout: &CategoryLayout) {
    for i in 0..gamma.nrows() {
        for b in layout.blocks() {
            let mean = b.clone().map(|c| gamma[(i, c)]).sum::<f64>() / b.len() as f64;
            for c in b {
                gamma[(i, c)] -= mean;
            }
        }
    }
}

fn column_center(m: &mut DMatrix<f64>) -> DVector<f64> {
    let means = DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.mean()));
    for (j, mut col) in m.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    means
}

/// Margins over observed cells, smoothed so that every category stays
/// strictly positive.
fn observed_margins(a: &IndicatorMatrix, mask: Mask) -> DVector<f64> {
    let layout = a.layout();
    let m = layout.n_variables();
    let x = a.entries();
    let mut p = DVector::zeros(layout.n_categories());
    for (j, b) in layout.blocks().enumerate() {
        let mut tot = 0.0;
        for i in 0..a.n() {
            if observed(mask, i, j, m) {
                for c in b.clone() {
                    p[c] += x[(i, c)];
                    tot += x[(i, c)];
                }
            }
        }
        let needs_smoothing = mask.is_some() || b.clone().any(|c| p[c] <= 0.0);
        let (add, denom) = if needs_smoothing {
            (0.5, tot + 0.5 * b.len() as f64)
        } else {
            (0.0, tot)
        };
        for c in b {
            p[c] = (p[c] + add) / denom;
        }
    }
    p
}

fn initial_state(a: &IndicatorMatrix, k: usize, init: Init, mask: Mask) -> Result<MmState> {
    let layout = a.layout();
    let p = observed_margins(a, mask);
    let beta = p.map(f64::ln);
    let (n, c) = a.entries().shape();
    if k == 0 || init == Init::Cold {
        return Ok(MmState {
            beta,
            f: RankKFactors::empty(n, c),
        });
    }
    // (A − 1pᵀ)D_p^{-1/2}, rank k, mapped back by D_p^{-1/2}
    let x = a.entries();
    let m = layout.n_variables();
    let mut g = DMatrix::from_fn(n, c, |i, col| {
        let (j, _) = layout.locate(col);
        if observed(mask, i, j, m) {
            (x[(i, col)] - p[col]) / p[col].sqrt()
        } else {
            0.0
        }
    });
    let f = truncated_svd(&g, k)?;
    g = f.reconstruct();
    for (col, mut column) in g.column_iter_mut().enumerate() {
        column *= 0.5 / p[col].sqrt();
    }
    uniform_center(&mut g, layout);
    let shift = column_center(&mut g);
    Ok(MmState {
        beta: beta + shift,
        f: truncated_svd(&g, k)?,
    })
}

struct StepOutcome {
    state: MmState,
    loglik: f64,
    probs: DMatrix<f64>,
    exact: bool,
}

fn soft_threshold(f: RankKFactors, tau: f64) -> RankKFactors {
    if tau == 0.0 {
        return f;
    }
    let d = f.d().map(|s| (s - tau).max(0.0));
    RankKFactors::new(f.u().clone(), d, f.v().clone()).expect("shrunk factors stay valid")
}

/// One MM step from the point `(beta, gamma)` whose probabilities are
/// `probs`. `warm` seeds the inexact SVD; `exact` forces a dense one.
#[allow(clippy::too_many_arguments)]
fn mm_step(
    beta: &DVector<f64>,
    gamma: &DMatrix<f64>,
    probs: &DMatrix<f64>,
    warm: &DMatrix<f64>,
    a: &IndicatorMatrix,
    k: usize,
    lambda: f64,
    mask: Mask,
    exact: bool,
) -> Result<StepOutcome> {
    let layout = a.layout();
    let m = layout.n_variables();
    let mut g = a.entries() - probs;
    if let Some(mk) = mask {
        for i in 0..a.n() {
            for (j, b) in layout.blocks().enumerate() {
                if !mk[i * m + j] {
                    for c in b {
                        g[(i, c)] = 0.0;
                    }
                }
            }
        }
    }
    let gbar = column_center(&mut g);
    let target = gamma + 2.0 * g;
    let beta = beta + 2.0 * gbar;
    let approx = if exact || k == 0 {
        None
    } else {
        leading_svd(&target, k, Some(warm), 1e-10, 60)
    };
    let used_exact = approx.is_none();
    let f = match approx {
        Some(f) => f,
        None => truncated_svd(&target, k)?,
    };
    let next = MmState {
        beta,
        f: soft_threshold(f, 2.0 * lambda),
    };
    let (loglik, probs) = evaluate(&next.theta(), a, mask);
    Ok(StepOutcome {
        state: next,
        loglik,
        probs,
        exact: used_exact,
    })
}

fn gradient_norm(a: &IndicatorMatrix, probs: &DMatrix<f64>, mask: Mask) -> f64 {
    let layout = a.layout();
    let m = layout.n_variables();
    let x = a.entries();
    let mut s = 0.0;
    for i in 0..a.n() {
        for (j, b) in layout.blocks().enumerate() {
            if observed(mask, i, j, m) {
                s += b.map(|c| (x[(i, c)] - probs[(i, c)]).powi(2)).sum::<f64>();
            }
        }
    }
    s.sqrt()
}

fn check_fit_args(a: &IndicatorMatrix, k: usize, opts: &MmOptions) -> Result<()> {
    let layout = a.layout();
    let max = a.n().min(layout.n_categories() - layout.n_variables());
    if k > max {
        return Err(Error::RankOutOfRange { rank: k, max });
    }
    if !(opts.lambda >= 0.0) || !opts.lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be a nonnegative number, got {}", opts.lambda)));
    }
    if !(opts.tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be nonnegative, got {}", opts.tol)));
    }
    Ok(())
}

fn run_mm(
    a: &IndicatorMatrix,
    k: usize,
    opts: &MmOptions,
    mask: Mask,
    start: MmState,
) -> Result<(MmState, FitTrace)> {
    let mut state = start;
    let (mut loglik, mut probs) = evaluate(&state.theta(), a, mask);
    let mut obj = loglik - state.penalty(opts.lambda);
    let mut trace = FitTrace {
        objective: vec![obj],
        gradient_norm: vec![gradient_norm(a, &probs, mask)],
        converged: false,
        iterations: 0,
        exact_fallbacks: 0,
        warning: None,
    };
    if !obj.is_finite() {
        return Err(Error::NonFinite);
    }
    if k == 0 && mask.is_none() && opts.lambda == 0.0 {
        // the empirical log-margins are the maximizer
        trace.converged = true;
        return Ok((state, trace));
    }
    // Nesterov extrapolation, restarted whenever the extrapolated step
    // fails to improve on the current iterate
    let mut gamma = state.f.reconstruct();
    let mut prev: Option<(DVector<f64>, DMatrix<f64>)> = None;
    let mut momentum = 1.0f64;
    while trace.iterations < opts.max_iter {
        trace.iterations += 1;
        let mut accepted = None;
        let mut restart = false;
        let next_m = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        if let (true, Some((pb, pg))) = (opts.accelerate, &prev) {
            let w = (momentum - 1.0) / next_m;
            if w > 0.0 {
                let by = &state.beta + w * (&state.beta - pb);
                let gy = &gamma + w * (&gamma - pg);
                let mut ty = gy.clone();
                add_row(&mut ty, &by);
                let (_, py) = evaluate(&ty, a, mask);
                let step = mm_step(&by, &gy, &py, state.f.v(), a, k, opts.lambda, mask, false)?;
                let o = step.loglik - step.state.penalty(opts.lambda);
                if o.is_finite() && o >= obj {
                    accepted = Some((step, o));
                } else {
                    restart = true;
                }
            }
        }
        momentum = if restart { 1.0 } else { next_m };
        let extrapolated = accepted.is_some();
        let (step, new_obj) = match accepted {
            Some(x) => x,
            None => {
                let mut step = mm_step(&state.beta, &gamma, &probs, state.f.v(), a, k, opts.lambda, mask, false)?;
                let mut o = step.loglik - step.state.penalty(opts.lambda);
                if !step.exact && !(o >= obj - 1e-12 * obj.abs()) {
                    step = mm_step(&state.beta, &gamma, &probs, state.f.v(), a, k, opts.lambda, mask, true)?;
                    o = step.loglik - step.state.penalty(opts.lambda);
                    trace.exact_fallbacks += 1;
                }
                (step, o)
            }
        };
        if !new_obj.is_finite() {
            return Err(Error::NonFinite);
        }
        let change = new_obj - obj;
        let new_gamma = step.state.f.reconstruct();
        prev = Some((std::mem::replace(&mut state, step.state).beta, std::mem::replace(&mut gamma, new_gamma)));
        loglik = step.loglik;
        probs = step.probs;
        obj = new_obj;
        trace.objective.push(obj);
        trace.gradient_norm.push(gradient_norm(a, &probs, mask));
        if change.abs() <= opts.tol * obj.abs().max(f64::MIN_POSITIVE) {
            if !extrapolated {
                trace.converged = true;
                break;
            }
            // confirm with a plain step
            momentum = 1.0;
        }
    }
    let _ = loglik;
    if !trace.converged {
        let big = state.f.d().iter().copied().next().unwrap_or(0.0);
        let scale = (a.n() * a.layout().n_categories()) as f64;
        if opts.lambda == 0.0 && big > 10.0 * scale.sqrt() {
            let msg = "no convergence and the interaction keeps growing: parameters wandering off to infinity (try lambda > 0)";
            log::warn!("{}", msg);
            trace.warning = Some(msg.into());
        } else {
            log::warn!("fit_majorization: no convergence after {} iterations", trace.iterations);
        }
    }
    Ok((state, trace))
}

fn finish(state: &MmState, a: &IndicatorMatrix, k: usize, weights: DVector<f64>) -> Result<MultilogitModel> {
    let gamma = state.f.reconstruct();
    MultilogitModel::from_parameters(state.beta.clone(), gamma, k, a.layout().clone(), weights)
}

/// Penalized maximum likelihood by majorization-minimization. The penalized
/// objective is nondecreasing along the returned trace.
pub fn fit_majorization(a: &IndicatorMatrix, k: usize, opts: &MmOptions) -> Result<(MultilogitModel, FitTrace)> {
    check_fit_args(a, k, opts)?;
    let p = category_margins(a)?;
    let start = initial_state(a, k, opts.init, None)?;
    let (state, trace) = run_mm(a, k, opts, None, start)?;
    Ok((finish(&state, a, k, p.p().clone())?, trace))
}

/// One exact MM step from the independence point `(log p, 0)`, returning
/// the interaction in the weighted convention.
pub fn majorization_step_from_independence(a: &IndicatorMatrix, k: usize, lambda: f64) -> Result<DMatrix<f64>> {
    check_fit_args(a, k, &MmOptions { lambda, ..Default::default() })?;
    let p = category_margins(a)?;
    let (n, c) = a.entries().shape();
    let state = MmState {
        beta: p.p().map(f64::ln),
        f: RankKFactors::empty(n, c),
    };
    let (_, probs) = evaluate(&state.theta(), a, None);
    let step = mm_step(&state.beta, &state.f.reconstruct(), &probs, state.f.v(), a, k, lambda, None, true)?;
    let mut gamma = step.state.f.reconstruct();
    center_blocks(&mut gamma, p.p(), a.layout());
    Ok(gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    /// Grid as fractions of `λ_max`, the smallest penalty whose fit from the
    /// independence point has `Γ = 0`.
    pub fractions: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            fractions: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0],
            folds: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambda_max: f64,
    pub lambdas: Vec<f64>,
    /// Held-out deviance summed over folds, per λ.
    pub deviance: Vec<f64>,
    pub best_lambda: f64,
}

/// `σ₁(A − 1pᵀ)`.
pub fn lambda_max(a: &IndicatorMatrix) -> Result<f64> {
    let p = category_margins(a)?;
    let mut g = a.entries().clone();
    for mut row in g.row_iter_mut() {
        row -= p.p().transpose();
    }
    Ok(truncated_svd(&g, 1)?.d()[0])
}

fn heldout_deviance(a: &IndicatorMatrix, probs: &DMatrix<f64>, mask: &[bool]) -> f64 {
    let layout = a.layout();
    let m = layout.n_variables();
    let x = a.entries();
    let mut dev = 0.0;
    for i in 0..a.n() {
        for (j, b) in layout.blocks().enumerate() {
            if !mask[i * m + j] {
                for c in b {
                    if x[(i, c)] != 0.0 {
                        dev -= 2.0 * x[(i, c)] * probs[(i, c)].max(1e-300).ln();
                    }
                }
            }
        }
    }
    dev
}

/// Chooses `λ` by K-fold cross-validation over held-out cells `(i, j)`:
/// each fold hides a random subset of cells, the model is fitted on the
/// rest, and the held-out predictive deviance is summed.
pub fn cross_validate_lambda(a: &IndicatorMatrix, k: usize, base: &MmOptions, cv: &CvOptions) -> Result<CvResult> {
    check_fit_args(a, k, base)?;
    if cv.folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {}", cv.folds)));
    }
    if cv.fractions.is_empty() || cv.fractions.iter().any(|&f| !(f >= 0.0)) {
        return Err(Error::InvalidArgument("lambda grid must be nonempty and nonnegative".into()));
    }
    let lmax = lambda_max(a)?;
    let mut fractions = cv.fractions.clone();
    fractions.sort_by(|x, y| y.total_cmp(x));
    let lambdas: Vec<f64> = fractions.iter().map(|f| f * lmax).collect();
    let m = a.layout().n_variables();
    let cells = a.n() * m;
    let mut order: Vec<usize> = (0..cells).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cv.seed));
    let mut deviance = vec![0.0; lambdas.len()];
    for fold in 0..cv.folds {
        let mut mask = vec![true; cells];
        for (pos, &cell) in order.iter().enumerate() {
            if pos % cv.folds == fold {
                mask[cell] = false;
            }
        }
        // largest λ first, each fit warm-started from the previous one
        let mut state = initial_state(a, k, Init::Cold, Some(&mask))?;
        for (q, &lambda) in lambdas.iter().enumerate() {
            let opts = MmOptions { lambda, ..*base };
            let (next, _) = run_mm(a, k, &opts, Some(&mask), state)?;
            let (_, probs) = evaluate(&next.theta(), a, None);
            deviance[q] += heldout_deviance(a, &probs, &mask);
            state = next;
        }
    }
    let best = (0..lambdas.len())
        .min_by(|&x, &y| deviance[x].total_cmp(&deviance[y]))
        .expect("nonempty grid");
    Ok(CvResult {
        lambda_max: lmax,
        best_lambda: lambdas[best],
        lambdas,
        deviance,
    })
}

/// [`cross_validate_lambda`] followed by a full-data fit at the chosen `λ`.
pub fn fit_cross_validated(
    a: &IndicatorMatrix,
    k: usize,
    base: &MmOptions,
    cv: &CvOptions,
) -> Result<(MultilogitModel, FitTrace, CvResult)> {
    let res = cross_validate_lambda(a, k, base, cv)?;
    let (model, trace) = fit_majorization(a, k, &MmOptions { lambda: res.best_lambda, ..*base })?;
    Ok((model, trace, res))
}
