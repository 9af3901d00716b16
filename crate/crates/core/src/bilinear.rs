//! Likelihood counterparts of CA: the linear-bilinear (AMMI) model, the
//! Poisson log-bilinear RC(K) model and CA written as a weighted GLM.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::corresp::{ca_fit, ca_result_from_factors, scale_cols, scale_rows, total_inertia, CaResult, ContingencyTable};
use crate::error::{Error, Result};
use crate::lowrank::{symmetric_eigen, thin_svd, truncated_svd, RankKFactors};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBilinearFit {
    pub alpha: Option<DVector<f64>>,
    pub beta: DVector<f64>,
    pub interaction: RankKFactors,
    /// `RSS / (nm)`.
    pub sigma2: f64,
}

impl LinearBilinearFit {
    pub fn fitted(&self) -> DMatrix<f64> {
        let mut f = self.interaction.reconstruct();
        for (j, mut col) in f.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.beta[j]);
        }
        if let Some(a) = &self.alpha {
            for (i, mut row) in f.row_iter_mut().enumerate() {
                row.add_scalar_mut(a[i]);
            }
        }
        f
    }
}

fn col_means(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()))
}

fn row_means(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(x.nrows(), x.row_iter().map(|r| r.mean()))
}

/// Least-squares fit of `x_ij = α_i + β_j + Σ_k d_k u_ik v_jk + ε_ij`
/// (α omitted when `row_effects` is false).
pub fn fit_linear_bilinear(x: &DMatrix<f64>, k: usize, row_effects: bool) -> Result<LinearBilinearFit> {
    let (n, m) = x.shape();
    if n == 0 || m == 0 {
        return Err(Error::EmptyInput("data matrix has no cells".into()));
    }
    let max = (n - 1).min(m.saturating_sub(1));
    if k > max {
        return Err(Error::RankOutOfRange { rank: k, max });
    }
    let beta = col_means(x);
    let mut centered = x.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-beta[j]);
    }
    let alpha = if row_effects {
        let a = row_means(&centered);
        for (i, mut row) in centered.row_iter_mut().enumerate() {
            row.add_scalar_mut(-a[i]);
        }
        Some(a)
    } else {
        None
    };
    let interaction = truncated_svd(&centered, k)?;
    let mut fit = LinearBilinearFit {
        alpha,
        beta,
        interaction,
        sigma2: 0.0,
    };
    fit.sigma2 = (x - fit.fitted()).norm_squared() / (n * m) as f64;
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogBilinearOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Coefficient of `‖Γ‖²_F` added to the deviance.
    pub ridge: f64,
}

impl Default for LogBilinearOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-10,
            ridge: 0.0,
        }
    }
}

/// `log μ_ij = α_i + β_j + Σ_k d_k u_ik v_jk` with a double-centered
/// interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcModelFit {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub interaction: RankKFactors,
    /// Penalized deviance after each pass, starting with the initial value.
    pub deviance_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub diagnostic: Option<String>,
}

impl RcModelFit {
    pub fn log_means(&self) -> DMatrix<f64> {
        log_means(&self.alpha, &self.beta, &self.interaction.reconstruct())
    }

    pub fn fitted_means(&self) -> DMatrix<f64> {
        self.log_means().map(f64::exp)
    }

    pub fn deviance(&self) -> f64 {
        *self.deviance_trace.last().expect("trace holds the initial deviance")
    }
}

fn log_means(alpha: &DVector<f64>, beta: &DVector<f64>, gamma: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(gamma.nrows(), gamma.ncols(), |i, j| alpha[i] + beta[j] + gamma[(i, j)])
}

/// Poisson deviance `2 Σ [x log(x/μ) − (x − μ)]`.
pub fn poisson_deviance(x: &DMatrix<f64>, mu: &DMatrix<f64>) -> f64 {
    2.0 * x
        .iter()
        .zip(mu.iter())
        .map(|(&x, &m)| {
            let t = if x > 0.0 { x * (x / m).ln() } else { 0.0 };
            t - (x - m)
        })
        .sum::<f64>()
}

struct RcState {
    alpha: DVector<f64>,
    beta: DVector<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl RcState {
    fn gamma(&self) -> DMatrix<f64> {
        &self.a * self.b.transpose()
    }

    fn criterion(&self, x: &DMatrix<f64>, ridge: f64) -> f64 {
        let g = self.gamma();
        let mu = log_means(&self.alpha, &self.beta, &g).map(f64::exp);
        poisson_deviance(x, &mu) + ridge * g.norm_squared()
    }

    /// Moves row and column means of `Γ` into `α`, `β` and rebalances the
    /// factors as `U√D`, `V√D`. Leaves `μ` unchanged.
    fn normalize(&mut self, k: usize) -> Result<RankKFactors> {
        let mut g = self.gamma();
        let rm = row_means(&g);
        let cm = col_means(&g);
        let grand = rm.mean();
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                g[(i, j)] -= rm[i] + cm[j] - grand;
            }
        }
        self.alpha += rm.add_scalar(-grand);
        self.beta += cm;
        let f = truncated_svd(&g, k)?;
        let sd = f.d().map(f64::sqrt);
        self.a = scale_cols(f.u(), &sd);
        self.b = scale_cols(f.v(), &sd);
        Ok(f)
    }
}

/// Penalized Newton step for one (offset, loading) block with the other side
/// held fixed. `design` rows are the fixed loadings; `xs` the counts and
/// `offsets` the fixed part of the linear predictor. Returns the updated
/// parameters, or `None` if no step-halving trial decreased the criterion.
fn newton_block(
    xs: &[f64],
    offsets: &[f64],
    design: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    ridge: f64,
    intercept: f64,
    load: &DVector<f64>,
) -> Option<(f64, DVector<f64>)> {
    let k = load.len();
    let eval = |c: f64, l: &DVector<f64>| -> f64 {
        let mut f = 0.0;
        for (r, (&x, &o)) in xs.iter().zip(offsets).enumerate() {
            let eta = o + c + design.row(r).dot(&l.transpose());
            f += eta.exp() - x * eta;
        }
        f + 0.5 * ridge * (l.transpose() * gram * l)[(0, 0)]
    };
    let f0 = eval(intercept, load);
    let mut grad = DVector::<f64>::zeros(k + 1);
    let mut hess = DMatrix::<f64>::zeros(k + 1, k + 1);
    let mut z = DVector::<f64>::zeros(k + 1);
    for (r, (&x, &o)) in xs.iter().zip(offsets).enumerate() {
        let eta = o + intercept + design.row(r).dot(&load.transpose());
        let mu = eta.exp();
        z[0] = 1.0;
        for q in 0..k {
            z[q + 1] = design[(r, q)];
        }
        grad.axpy(mu - x, &z, 1.0);
        hess.ger(mu, &z, &z, 1.0);
    }
    if ridge > 0.0 && k > 0 {
        let gl = gram * load;
        for q in 0..k {
            grad[q + 1] += ridge * gl[q];
            for s in 0..k {
                hess[(q + 1, s + 1)] += ridge * gram[(q, s)];
            }
        }
    }
    let step = solve_spd(&hess, &grad)?;
    let mut t = 1.0;
    for _ in 0..40 {
        let c = intercept - t * step[0];
        let l = DVector::from_fn(k, |q, _| load[q] - t * step[q + 1]);
        let f = eval(c, &l);
        if f.is_finite() && f <= f0 {
            return Some((c, l));
        }
        t *= 0.5;
    }
    None
}

/// Solves `h s = g` for symmetric positive semidefinite `h`, regularizing
/// the diagonal when the Cholesky factorization fails.
fn solve_spd(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut jitter = 0.0;
    for _ in 0..8 {
        let mut hj = h.clone();
        for q in 0..hj.nrows() {
            hj[(q, q)] += jitter;
        }
        if let Some(ch) = hj.cholesky() {
            return Some(ch.solve(g));
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 100.0 };
    }
    None
}

/// True when a fitted mean on an empty cell has fallen below `1e-8` of the
/// average cell count: the deviance is decreasing toward a boundary.
fn collapsing(x: &DMatrix<f64>, st: &RcState) -> bool {
    let floor = (x.mean() * 1e-8).ln();
    let eta = log_means(&st.alpha, &st.beta, &st.gamma());
    x.iter().zip(eta.iter()).any(|(&x, &e)| x == 0.0 && e < floor)
}

/// Poisson RC(K) model by alternating row and column Newton steps with
/// step-halving. The penalized deviance is nonincreasing by construction.
pub fn fit_log_bilinear(x: &DMatrix<f64>, k: usize, opts: &LogBilinearOptions) -> Result<RcModelFit> {
    if opts.ridge < 0.0 || !opts.ridge.is_finite() {
        return Err(Error::InvalidArgument(format!("ridge must be a nonnegative number, got {}", opts.ridge)));
    }
    let table = ContingencyTable::new(x.clone())?;
    let (n, m) = x.shape();
    let max = (n - 1).min(m - 1);
    if k > max {
        return Err(Error::RankOutOfRange { rank: k, max });
    }
    let total = table.total();
    let mut st = RcState {
        alpha: table.row_margins().map(|r| (r * total).ln()),
        beta: table.col_margins().map(f64::ln),
        a: DMatrix::zeros(n, k),
        b: DMatrix::zeros(m, k),
    };
    if k == 0 {
        let dev = st.criterion(x, 0.0);
        return Ok(RcModelFit {
            alpha: st.alpha,
            beta: st.beta,
            interaction: RankKFactors::empty(n, m),
            deviance_trace: vec![dev],
            converged: true,
            iterations: 0,
            diagnostic: None,
        });
    }
    // CA start: log(1 + Σ d φ ψ) ≈ Σ d φ ψ
    let ca = ca_fit(&table, k)?;
    let sd = ca.factors.d().map(f64::sqrt);
    st.a = scale_cols(&ca.row_standard, &sd);
    st.b = scale_cols(&ca.col_standard, &sd);
    let mut factors = st.normalize(k)?;

    let mut trace = vec![st.criterion(x, opts.ridge)];
    let mut converged = false;
    let mut diagnostic = None;
    let mut iterations = 0;
    let mut offsets = vec![0.0; n.max(m)];
    let mut xs = vec![0.0; n.max(m)];
    while iterations < opts.max_iter {
        iterations += 1;
        // rows: (α_i, a_i) given β, B
        let gram_b = st.b.tr_mul(&st.b);
        for i in 0..n {
            for j in 0..m {
                xs[j] = x[(i, j)];
                offsets[j] = st.beta[j];
            }
            let load = st.a.row(i).transpose();
            if let Some((c, l)) = newton_block(&xs[..m], &offsets[..m], &st.b, &gram_b, opts.ridge, st.alpha[i], &load) {
                st.alpha[i] = c;
                st.a.set_row(i, &l.transpose());
            }
        }
        // columns: (β_j, b_j) given α, A
        let gram_a = st.a.tr_mul(&st.a);
        for j in 0..m {
            for i in 0..n {
                xs[i] = x[(i, j)];
                offsets[i] = st.alpha[i];
            }
            let load = st.b.row(j).transpose();
            if let Some((c, l)) = newton_block(&xs[..n], &offsets[..n], &st.a, &gram_a, opts.ridge, st.beta[j], &load) {
                st.beta[j] = c;
                st.b.set_row(j, &l.transpose());
            }
        }
        factors = st.normalize(k)?;
        let crit = st.criterion(x, opts.ridge);
        let prev = *trace.last().expect("nonempty trace");
        trace.push(crit);
        if !crit.is_finite() {
            diagnostic = Some("non-finite deviance".into());
            break;
        }
        if collapsing(x, &st) {
            diagnostic = Some(
                "interaction diverging: the deviance keeps decreasing toward a boundary (sparse or separable table); consider a ridge penalty"
                    .into(),
            );
            log::warn!("fit_log_bilinear: interaction diverging after {} iterations", iterations);
            break;
        }
        if (prev - crit).abs() <= opts.tol * (crit.abs() + 0.1) {
            converged = true;
            break;
        }
    }
    if !converged && diagnostic.is_none() {
        diagnostic = Some(format!("no convergence after {} iterations", iterations));
    }
    Ok(RcModelFit {
        alpha: st.alpha,
        beta: st.beta,
        interaction: factors,
        deviance_trace: trace,
        converged,
        iterations,
        diagnostic,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaGlmFit {
    /// CA coordinates rebuilt from the fitted `η̂`.
    pub result: CaResult,
    /// Fitted proportions `r_i c_j (1 + η̂_ij)`.
    pub fitted: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn weighted_gram(f: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    f.tr_mul(&scale_rows(f, w))
}

/// Least-squares solve of `g s = rhs` for each column of `rhs`, using a
/// pseudo-inverse when `g` is singular.
fn solve_gram(g: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = g.clone().cholesky() {
        return ch.solve(rhs);
    }
    let (vals, vecs) = symmetric_eigen(g).expect("finite Gram matrix");
    let cut = 1e-12 * vals.amax().max(f64::MIN_POSITIVE);
    let inv = vals.map(|v| if v > cut { 1.0 / v } else { 0.0 });
    scale_cols(&vecs, &inv) * vecs.tr_mul(rhs)
}

/// CA as alternating weighted regressions of the working response
/// `z_ij = x_ij/(N r_i c_j) − 1` with weights `r_i c_j`.
pub fn fit_ca_glm(t: &ContingencyTable, k: usize, max_iter: usize, tol: f64) -> Result<CaGlmFit> {
    let (n, m) = t.counts().shape();
    let max = (n - 1).min(m - 1);
    if k > max {
        return Err(Error::RankOutOfRange { rank: k, max });
    }
    let r = t.row_margins();
    let c = t.col_margins();
    let p = t.proportions();
    let z = DMatrix::from_fn(n, m, |i, j| p[(i, j)] / (r[i] * c[j]) - 1.0);
    let zw = scale_cols(&z, c);

    // deterministic start, D_c-orthonormalized
    let mut b = DMatrix::from_fn(m, k, |j, q| ((j + 1) as f64 * (q + 1) as f64 * 0.754_877_666).sin());
    b = c_orthonormalize(&b, c);
    let mut eta = DMatrix::<f64>::zeros(n, m);
    let mut converged = k == 0;
    let mut iterations = 0;
    while !converged && iterations < max_iter {
        iterations += 1;
        // a_i = (BᵀD_cB)⁻¹ Bᵀ D_c z_i
        let a = solve_gram(&weighted_gram(&b, c), &b.tr_mul(&zw.transpose())).transpose();
        if a.amax() == 0.0 {
            eta.fill(0.0);
            converged = true;
            break;
        }
        // b_j = (AᵀD_rA)⁻¹ Aᵀ D_r z_j
        let bt = solve_gram(&weighted_gram(&a, r), &a.tr_mul(&scale_rows(&z, r)));
        let new_eta = &a * &bt;
        let diff = weighted_norm(&(&new_eta - &eta), r, c);
        let size = weighted_norm(&new_eta, r, c);
        eta = new_eta;
        b = c_orthonormalize(&bt.transpose(), c);
        if diff <= tol * size.max(f64::MIN_POSITIVE) {
            converged = true;
        }
    }
    if !converged {
        log::warn!("fit_ca_glm: no convergence after {} iterations", iterations);
    }
    let rs = r.map(f64::sqrt);
    let cs = c.map(f64::sqrt);
    let zhat = scale_cols(&scale_rows(&eta, &rs), &cs);
    let factors = thin_svd(&zhat)?.truncate(k);
    let spectrum = factors.d().clone();
    let mut result = ca_result_from_factors(t, factors, spectrum);
    result.total_inertia = total_inertia(t);
    let fitted = DMatrix::from_fn(n, m, |i, j| r[i] * c[j] * (1.0 + eta[(i, j)]));
    Ok(CaGlmFit {
        result,
        fitted,
        iterations,
        converged,
    })
}

fn weighted_norm(e: &DMatrix<f64>, r: &DVector<f64>, c: &DVector<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..e.nrows() {
        for j in 0..e.ncols() {
            s += r[i] * c[j] * e[(i, j)] * e[(i, j)];
        }
    }
    s.sqrt()
}

fn c_orthonormalize(b: &DMatrix<f64>, c: &DVector<f64>) -> DMatrix<f64> {
    if b.ncols() == 0 {
        return b.clone();
    }
    let cs = c.map(f64::sqrt);
    let q = scale_rows(b, &cs).qr().q();
    scale_rows(&q, &cs.map(|x| 1.0 / x))
}
