//! Truncated SVD and the rank-constrained quadratic maximizer.
//!
//! Every estimator in this crate ends in the same subproblem,
//!
//! ```text
//! maximize  ⟨Γ, G⟩ − ½‖H₁ Γ H₂‖²_F   subject to rank(Γ) ≤ K,
//! ```
//!
//! whose solution is `H₁⁻¹ · SVD_K(H₁⁻¹ G H₂⁻¹) · H₂⁻¹`: substituting
//! `Γ̃ = H₁ Γ H₂` turns the objective into `−½‖Γ̃ − H₁⁻¹GH₂⁻¹‖² + const`, and the
//! best rank-K approximation is the truncated SVD (Eckart–Young).
//!
//! Singular vectors are reported with a fixed sign: the largest-magnitude
//! entry of every left singular vector is positive. Coordinates derived from
//! them are therefore reproducible, but only defined up to axis sign.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rank-K decomposition `U diag(D) Vᵀ` with orthonormal `U`, `V` and
/// nonincreasing, nonnegative `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankKFactors {
    u: DMatrix<f64>,
    d: DVector<f64>,
    v: DMatrix<f64>,
}

impl RankKFactors {
    pub fn new(u: DMatrix<f64>, d: DVector<f64>, v: DMatrix<f64>) -> Result<Self> {
        let k = d.len();
        if u.ncols() != k || v.ncols() != k {
            return Err(Error::ShapeMismatch {
                expected: (u.nrows(), k),
                got: u.shape(),
            });
        }
        if d.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidArgument("singular values must be nonnegative".into()));
        }
        if d.as_slice().windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("singular values must be nonincreasing".into()));
        }
        Ok(Self { u, d, v })
    }

    /// Rank-0 factors for an `nrows × ncols` matrix.
    pub fn empty(nrows: usize, ncols: usize) -> Self {
        Self {
            u: DMatrix::zeros(nrows, 0),
            d: DVector::zeros(0),
            v: DMatrix::zeros(ncols, 0),
        }
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.d.len()
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    /// `U diag(D) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.reconstruct_rank(self.rank())
    }

    /// Product using only the leading `k` components.
    pub fn reconstruct_rank(&self, k: usize) -> DMatrix<f64> {
        let k = k.min(self.rank());
        let mut ud = self.u.columns(0, k).into_owned();
        for (mut col, &s) in ud.column_iter_mut().zip(self.d.iter()) {
            col *= s;
        }
        ud * self.v.columns(0, k).transpose()
    }

    /// Leading `k` components.
    pub fn truncate(&self, k: usize) -> Self {
        let k = k.min(self.rank());
        Self {
            u: self.u.columns(0, k).into_owned(),
            d: self.d.rows(0, k).into_owned(),
            v: self.v.columns(0, k).into_owned(),
        }
    }

    /// Largest deviation of `UᵀU` and `VᵀV` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.rank();
        let eye = DMatrix::<f64>::identity(k, k);
        let eu = (self.u.tr_mul(&self.u) - &eye).amax();
        let ev = (self.v.tr_mul(&self.v) - &eye).amax();
        eu.max(ev)
    }

    /// Flips column pairs so the largest-magnitude entry of each `U` column is
    /// positive.
    fn fix_signs(&mut self) {
        for k in 0..self.rank() {
            let col = self.u.column(k);
            let mut best = 0;
            for i in 1..col.len() {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            if col.len() > 0 && col[best] < 0.0 {
                self.u.column_mut(k).neg_mut();
                self.v.column_mut(k).neg_mut();
            }
        }
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `(U, s, V)` with `s` nonincreasing, no sign convention.
pub(crate) fn dense_svd(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let svd = to_faer(m).thin_svd().ok()?;
    let s = svd.S().column_vector();
    let d = DVector::from_fn(s.nrows(), |i, _| s[i]);
    Some((from_faer(svd.U()), d, from_faer(svd.V())))
}

/// Eigenpairs of a symmetric matrix, eigenvalues nonincreasing.
pub(crate) fn symmetric_eigen(m: &DMatrix<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let eig = to_faer(m).self_adjoint_eigen(faer::Side::Lower).ok()?;
    let s = eig.S().column_vector();
    let n = s.nrows();
    let vals = DVector::from_fn(n, |i, _| s[n - 1 - i]);
    let vecs = from_faer(eig.U());
    let order: Vec<usize> = (0..n).rev().collect();
    Some((vals, vecs.select_columns(&order)))
}

/// Full thin SVD, sorted with the sign convention applied.
pub fn thin_svd(m: &DMatrix<f64>) -> Result<RankKFactors> {
    check_finite(m)?;
    let r = m.nrows().min(m.ncols());
    if r == 0 {
        return Ok(RankKFactors::empty(m.nrows(), m.ncols()));
    }
    let (u, s, v) = dense_svd(m).ok_or(Error::NonFinite)?;
    let mut factors = RankKFactors { u, d: s, v };
    factors.fix_signs();

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| {
        factors.d[b].total_cmp(&factors.d[a]).then_with(|| {
            // exact ties: lexicographic on U columns
            let (ca, cb) = (factors.u.column(a), factors.u.column(b));
            ca.iter()
                .zip(cb.iter())
                .map(|(x, y)| y.total_cmp(x))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    if order.iter().enumerate().any(|(i, &o)| i != o) {
        factors = RankKFactors {
            u: factors.u.select_columns(&order),
            d: DVector::from_iterator(r, order.iter().map(|&i| factors.d[i])),
            v: factors.v.select_columns(&order),
        };
    }
    Ok(factors)
}

/// Best rank-`k` approximation of `m` in Frobenius norm.
pub fn truncated_svd(m: &DMatrix<f64>, k: usize) -> Result<RankKFactors> {
    let max = m.nrows().min(m.ncols());
    if k > max {
        return Err(Error::RankOutOfRange { rank: k, max });
    }
    Ok(thin_svd(m)?.truncate(k))
}

/// Leading `k` singular triplets by block subspace iteration, optionally
/// warm-started from a `ncols × b` basis (e.g. the right factors of a nearby
/// matrix). Returns `None` if the residual tolerance is not reached within
/// `max_iter` sweeps; callers then fall back to [`truncated_svd`].
pub fn leading_svd(
    m: &DMatrix<f64>,
    k: usize,
    start: Option<&DMatrix<f64>>,
    tol: f64,
    max_iter: usize,
) -> Option<RankKFactors> {
    let (nr, nc) = m.shape();
    let max = nr.min(nc);
    if k == 0 {
        return Some(RankKFactors::empty(nr, nc));
    }
    let block = (k + 6).min(max);
    if block <= k || 3 * block >= max {
        // small problems: a dense SVD is cheaper than iterating
        return truncated_svd(m, k).ok();
    }
    let mut v = DMatrix::<f64>::zeros(nc, block);
    let mut filled = 0;
    if let Some(s) = start {
        let cols = s.ncols().min(block);
        v.columns_mut(0, cols).copy_from(&s.columns(0, cols));
        filled = cols;
    }
    // deterministic fill for the remaining directions
    for c in filled..block {
        for r in 0..nc {
            let h = (r as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (c as u64 + 1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
            v[(r, c)] = ((h >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
        }
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let mut prev: Option<(DMatrix<f64>, DVector<f64>)> = None;
    for _ in 0..max_iter {
        let y = m * &v;
        if let Some((pu, ps)) = &prev {
            let mut worst = 0.0f64;
            for i in 0..k {
                let r = (y.column(i) - pu.column(i) * ps[i]).norm();
                worst = worst.max(r);
            }
            if worst <= tol * scale {
                let mut f = RankKFactors {
                    u: pu.columns(0, k).into_owned(),
                    d: ps.rows(0, k).into_owned(),
                    v: v.columns(0, k).into_owned(),
                };
                f.fix_signs();
                return Some(f);
            }
        }
        let q = y.qr().q();
        // Rayleigh–Ritz on span(q): qᵀ m = Ub S Vbᵀ
        let bt = m.tr_mul(&q); // nc × block
        // bt = bu S bvᵀ  =>  qᵀm = bv S buᵀ
        let (bu, s, bv) = dense_svd(&bt)?;
        v = bu;
        prev = Some((&q * bv, s));
    }
    None
}

/// Positive-definite weight matrix; the diagonal form is the fast path.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl Weight {
    pub fn identity(n: usize) -> Self {
        Weight::Diagonal(DVector::from_element(n, 1.0))
    }

    pub fn dim(&self) -> usize {
        match self {
            Weight::Diagonal(d) => d.len(),
            Weight::Dense(h) => h.nrows(),
        }
    }

    fn inverse(&self, name: &'static str) -> Result<Weight> {
        match self {
            Weight::Diagonal(d) => {
                if d.iter().all(|&x| x > 0.0 && x.is_finite()) {
                    Ok(Weight::Diagonal(d.map(|x| 1.0 / x)))
                } else {
                    Err(Error::NotPositiveDefinite(name))
                }
            }
            Weight::Dense(h) => {
                if !h.is_square() || (h - h.transpose()).amax() > 1e-10 * h.amax().max(1.0) {
                    return Err(Error::NotPositiveDefinite(name));
                }
                let chol = h.clone().cholesky().ok_or(Error::NotPositiveDefinite(name))?;
                Ok(Weight::Dense(chol.inverse()))
            }
        }
    }

    /// `H · m`
    pub fn left(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Weight::Diagonal(d) => {
                let mut out = m.clone();
                for (mut row, &s) in out.row_iter_mut().zip(d.iter()) {
                    row *= s;
                }
                out
            }
            Weight::Dense(h) => h * m,
        }
    }

    /// `m · H`
    pub fn right(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Weight::Diagonal(d) => {
                let mut out = m.clone();
                for (mut col, &s) in out.column_iter_mut().zip(d.iter()) {
                    col *= s;
                }
                out
            }
            Weight::Dense(h) => m * h,
        }
    }
}

/// `max ⟨Γ, G⟩ − ½‖H₁ Γ H₂‖²_F` over `rank(Γ) ≤ K`, for rectangular `G`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    pub gradient: DMatrix<f64>,
    pub left: Weight,
    pub right: Weight,
    pub rank: usize,
}

impl QuadraticProblem {
    pub fn objective(&self, gamma: &DMatrix<f64>) -> f64 {
        let weighted = self.right.right(&self.left.left(gamma));
        gamma.dot(&self.gradient) - 0.5 * weighted.norm_squared()
    }

    fn validate(&self) -> Result<()> {
        let (n, p) = self.gradient.shape();
        if self.left.dim() != n || self.right.dim() != p {
            return Err(Error::ShapeMismatch {
                expected: (n, p),
                got: (self.left.dim(), self.right.dim()),
            });
        }
        if self.rank > n.min(p) {
            return Err(Error::RankOutOfRange {
                rank: self.rank,
                max: n.min(p),
            });
        }
        check_finite(&self.gradient)
    }
}

/// Closed-form maximizer `H₁⁻¹ · SVD_K(H₁⁻¹ G H₂⁻¹) · H₂⁻¹`.
pub fn solve_rank_constrained_quadratic(q: &QuadraticProblem) -> Result<DMatrix<f64>> {
    Ok(solve_with_factors(q)?.0)
}

/// As [`solve_rank_constrained_quadratic`], also returning the truncated
/// factors of the whitened target `H₁⁻¹ G H₂⁻¹`.
pub fn solve_with_factors(q: &QuadraticProblem) -> Result<(DMatrix<f64>, RankKFactors)> {
    q.validate()?;
    let l_inv = q.left.inverse("H1")?;
    let r_inv = q.right.inverse("H2")?;
    let target = r_inv.right(&l_inv.left(&q.gradient));
    let factors = truncated_svd(&target, q.rank)?;
    let gamma = r_inv.right(&l_inv.left(&factors.reconstruct()));
    Ok((gamma, factors))
}

/// Largest principal angle (radians) between the column spaces of two
/// matrices with orthonormal columns.
pub fn subspace_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 || b.ncols() == 0 {
        return 0.0;
    }
    // sin of the largest angle is the spectral norm of b's residual off span(a)
    let resid = b - a * a.tr_mul(b);
    let s = dense_svd(&resid).map(|(_, s, _)| s).unwrap_or_else(|| resid.singular_values());
    s.iter().cloned().fold(0.0, f64::max).min(1.0).asin()
}

/// Orthonormal basis of the column space of `m` (thin QR).
pub fn orthonormal_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}
