//! Self-adjoint operators stored by eigendecomposition, and their exact
//! functional calculus.
//!
//! The stored spectrum is that of the nonnegative operator `A`; on model
//! manifolds `A = sqrt(-Δ)`, so Laplacian formulas use `Δ = -A²`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::basis::Eigenbasis;
use crate::error::{Error, Result};
use crate::linalg::{FiniteMeasureSpace, LinearMap, C64};
use crate::quadrature;

/// Closed spectral window `[a, b]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub a: f64,
    pub b: f64,
}

impl SpectralWindow {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::param(format!("window requires a < b, got [{a}, {b}]")));
        }
        Ok(Self { a, b })
    }

    pub fn contains(&self, tau: f64) -> bool {
        self.a <= tau && tau <= self.b
    }

    pub fn intersect(&self, other: &SpectralWindow) -> Option<SpectralWindow> {
        let a = self.a.max(other.a);
        let b = self.b.min(other.b);
        (a < b).then_some(SpectralWindow { a, b })
    }
}

/// Parameters of `(A² - (λ + iμ)²)^{-β}`, optionally localized to a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventQuery {
    pub lambda: f64,
    pub mu: f64,
    pub beta: f64,
    pub cutoff: Option<SpectralWindow>,
}

impl ResolventQuery {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        let q = Self {
            lambda,
            mu,
            beta: 1.0,
            cutoff: None,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        self.beta = beta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_cutoff(mut self, window: SpectralWindow) -> Self {
        self.cutoff = Some(window);
        self
    }

    /// Cutoff `Π_{[0, 2λ]}`.
    pub fn localized(self) -> Self {
        let w = SpectralWindow {
            a: 0.0,
            b: 2.0 * self.lambda,
        };
        self.with_cutoff(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::param(format!(
                "resolvent requires mu > 0, got {}",
                self.mu
            )));
        }
        if !(self.lambda >= 1.0) {
            return Err(Error::param(format!(
                "resolvent requires lambda >= 1, got {}",
                self.lambda
            )));
        }
        if !(self.beta >= 1.0) {
            return Err(Error::param(format!(
                "resolvent power must be >= 1, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// `z = (λ + iμ)²`.
    pub fn z(&self) -> C64 {
        let w = C64::new(self.lambda, self.mu);
        w * w
    }

    /// Scalar symbol at spectral value `tau`.
    pub fn symbol(&self, tau: f64) -> C64 {
        let base = C64::new(tau * tau, 0.0) - self.z();
        let v = if self.beta == 1.0 {
            base.inv()
        } else if self.beta.fract() == 0.0 && self.beta <= 64.0 {
            base.inv().powi(self.beta as i32)
        } else {
            base.powf(-self.beta)
        };
        match self.cutoff {
            Some(w) if !w.contains(tau) => C64::new(0.0, 0.0),
            _ => v,
        }
    }
}

/// A self-adjoint operator on a finite weighted space, by eigenpairs.
/// Cheap to clone; immutable after construction.
#[derive(Clone)]
pub struct SpectralOperator {
    space: FiniteMeasureSpace,
    eigenvalues: Arc<Vec<f64>>,
    basis: Arc<Eigenbasis>,
    label: String,
}

impl fmt::Debug for SpectralOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralOperator")
            .field("label", &self.label)
            .field("points", &self.space.len())
            .field("eigenpairs", &self.eigenvalues.len())
            .finish()
    }
}

const GRAM_TOL: f64 = 1e-10;

impl SpectralOperator {
    /// Assemble from parts; eigenvalues must be sorted, nonnegative and match
    /// the basis. Orthonormality is the caller's responsibility (see
    /// [`SpectralOperator::validate`]).
    pub(crate) fn from_parts(
        space: FiniteMeasureSpace,
        eigenvalues: Vec<f64>,
        basis: Eigenbasis,
        label: impl Into<String>,
    ) -> Result<Self> {
        if basis.dim() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                actual: basis.dim(),
            });
        }
        if basis.len() != eigenvalues.len() {
            return Err(Error::DimensionMismatch {
                expected: eigenvalues.len(),
                actual: basis.len(),
            });
        }
        if basis.len() > space.len() {
            return Err(Error::param("more eigenvectors than grid points"));
        }
        if let Some(t) = eigenvalues.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::param(format!("eigenvalue {t} is negative or not finite")));
        }
        if eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::param("eigenvalues must be sorted ascending"));
        }
        Ok(Self {
            space,
            eigenvalues: Arc::new(eigenvalues),
            basis: Arc::new(basis),
            label: label.into(),
        })
    }

    /// Build from real eigenvector columns, sorting eigenpairs and checking
    /// weighted orthonormality.
    pub fn from_real_eigenpairs(
        space: FiniteMeasureSpace,
        eigenvalues: Vec<f64>,
        vectors: DMatrix<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let (vals, vecs) = sort_pairs(eigenvalues, vectors);
        let op = Self::from_parts(space, vals, Eigenbasis::DenseReal(vecs), label)?;
        op.validate()?;
        Ok(op)
    }

    pub fn from_complex_eigenpairs(
        space: FiniteMeasureSpace,
        eigenvalues: Vec<f64>,
        vectors: DMatrix<C64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let (vals, vecs) = sort_pairs(eigenvalues, vectors);
        let op = Self::from_parts(space, vals, Eigenbasis::DenseComplex(vecs), label)?;
        op.validate()?;
        Ok(op)
    }

    /// Diagonalize a real matrix `M` that is self-adjoint in the weighted
    /// pairing (`W M` symmetric) and store `f(eigenvalue)` as the spectrum.
    /// `f` must be nondecreasing on the spectrum of `M`.
    pub fn from_weighted_symmetric(
        space: FiniteMeasureSpace,
        m: &DMatrix<f64>,
        f: impl Fn(f64) -> Result<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let n = space.len();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: m.nrows(),
            });
        }
        let w = space.weights();
        let sq: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        let sym = DMatrix::from_fn(n, n, |i, j| sq[i] * m[(i, j)] / sq[j]);
        let asym = (&sym - sym.transpose()).amax();
        if asym > 1e-10 * sym.amax().max(1.0) {
            return Err(Error::Numerical(format!(
                "matrix is not self-adjoint in the weighted pairing (asymmetry {asym:.3e})"
            )));
        }
        let sym = (&sym + sym.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut vecs = eig.eigenvectors;
        for (i, mut row) in vecs.row_iter_mut().enumerate() {
            row /= sq[i];
        }
        let vals = eig
            .eigenvalues
            .iter()
            .map(|v| f(*v))
            .collect::<Result<Vec<_>>>()?;
        let (vals, vecs) = sort_pairs(vals, vecs);
        Self::from_parts(space, vals, Eigenbasis::DenseReal(vecs), label)
    }

    pub fn space(&self) -> &FiniteMeasureSpace {
        &self.space
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &Eigenbasis {
        &self.basis
    }

    pub(crate) fn basis_arc(&self) -> Arc<Eigenbasis> {
        self.basis.clone()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Number of eigenpairs (may be smaller than the number of points).
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_complete(&self) -> bool {
        self.rank() == self.space.len()
    }

    /// Indices with eigenvalue in the closed window.
    pub fn window_indices(&self, w: &SpectralWindow) -> std::ops::Range<usize> {
        let lo = self.eigenvalues.partition_point(|t| *t < w.a);
        let hi = self.eigenvalues.partition_point(|t| *t <= w.b);
        lo..hi.max(lo)
    }

    /// Check weighted orthonormality (Gram residual) of the eigenvectors.
    pub fn validate(&self) -> Result<f64> {
        let g = self.basis.gram(self.space.weights());
        let r = g.nrows();
        let mut worst = 0.0f64;
        for i in 0..r {
            for j in 0..r {
                let t = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - C64::new(t, 0.0)).norm());
            }
        }
        if worst > GRAM_TOL {
            return Err(Error::Numerical(format!(
                "eigenvectors not orthonormal: Gram residual {worst:.3e}"
            )));
        }
        Ok(worst)
    }

    /// Same eigenvectors with eigenvalues replaced (must stay sorted).
    pub(crate) fn with_eigenvalues(&self, vals: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let mut op = self.clone();
        if vals.len() != self.rank() {
            return Err(Error::DimensionMismatch {
                expected: self.rank(),
                actual: vals.len(),
            });
        }
        if vals.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::param("transformed eigenvalues must remain sorted"));
        }
        op.eigenvalues = Arc::new(vals);
        op.label = label.into();
        Ok(op)
    }

    /// `A x` computed through the eigenbasis.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let c = self.basis.analyze(self.space.weights(), x);
        let c: Vec<C64> = c.iter().zip(self.eigenvalues.iter()).map(|(a, t)| a * *t).collect();
        self.basis.synthesize(&c)
    }

    pub fn to_json(&self) -> OperatorJson {
        let m = self.basis.materialize();
        let complex = !self.basis.is_real() && m.iter().any(|v| v.im != 0.0);
        let vecs = (0..m.ncols())
            .map(|j| m.column(j).iter().map(|v| v.re).collect())
            .collect();
        let im = complex.then(|| {
            (0..m.ncols())
                .map(|j| m.column(j).iter().map(|v| v.im).collect())
                .collect()
        });
        OperatorJson {
            label: Some(self.label.clone()),
            weights: self.space.weights().to_vec(),
            eigenvalues: self.eigenvalues.to_vec(),
            eigenvectors: vecs,
            eigenvectors_im: im,
        }
    }

    pub fn from_json(doc: &OperatorJson) -> Result<Self> {
        let space = FiniteMeasureSpace::new(doc.weights.clone())?;
        let n = space.len();
        let r = doc.eigenvectors.len();
        if let Some(v) = doc.eigenvectors.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: v.len(),
            });
        }
        let label = doc.label.clone().unwrap_or_else(|| "loaded".into());
        match &doc.eigenvectors_im {
            None => {
                let m = DMatrix::from_fn(n, r, |i, j| doc.eigenvectors[j][i]);
                Self::from_real_eigenpairs(space, doc.eigenvalues.clone(), m, label)
            }
            Some(im) => {
                if im.len() != r || im.iter().any(|v| v.len() != n) {
                    return Err(Error::param("eigenvectors_im shape differs from eigenvectors"));
                }
                let m = DMatrix::from_fn(n, r, |i, j| C64::new(doc.eigenvectors[j][i], im[j][i]));
                Self::from_complex_eigenpairs(space, doc.eigenvalues.clone(), m, label)
            }
        }
    }
}

fn sort_pairs<T: nalgebra::Scalar + Copy>(vals: Vec<f64>, vecs: DMatrix<T>) -> (Vec<f64>, DMatrix<T>) {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|a, b| vals[*a].total_cmp(&vals[*b]));
    if idx.iter().enumerate().all(|(i, j)| i == *j) {
        return (vals, vecs);
    }
    let sorted_vals = idx.iter().map(|i| vals[*i]).collect();
    let sorted = vecs.select_columns(idx.iter());
    (sorted_vals, sorted)
}

/// On-disk operator schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub weights: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// One inner list per eigenvector, sampled on the points.
    pub eigenvectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvectors_im: Option<Vec<Vec<f64>>>,
}

/// How a spectral map acts on eigen-coefficients.
#[derive(Clone, Debug)]
pub enum Coefficients {
    Diagonal(Vec<C64>),
    Dense(DMatrix<C64>),
}

/// `x -> sum_ij M_ij <x, e_j> e_i`, with `M` diagonal for functions of `A`.
#[derive(Clone, Debug)]
pub struct SpectralMap {
    op: SpectralOperator,
    coef: Coefficients,
}

impl SpectralMap {
    pub fn diagonal(op: &SpectralOperator, values: Vec<C64>) -> Result<Self> {
        if values.len() != op.rank() {
            return Err(Error::DimensionMismatch {
                expected: op.rank(),
                actual: values.len(),
            });
        }
        Ok(Self {
            op: op.clone(),
            coef: Coefficients::Diagonal(values),
        })
    }

    pub fn dense(op: &SpectralOperator, m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != op.rank() || m.ncols() != op.rank() {
            return Err(Error::DimensionMismatch {
                expected: op.rank(),
                actual: m.nrows(),
            });
        }
        Ok(Self {
            op: op.clone(),
            coef: Coefficients::Dense(m),
        })
    }

    pub fn operator(&self) -> &SpectralOperator {
        &self.op
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coef
    }

    /// Diagonal action, if the map is a function of `A`.
    pub fn diagonal_values(&self) -> Option<&[C64]> {
        match &self.coef {
            Coefficients::Diagonal(d) => Some(d),
            Coefficients::Dense(_) => None,
        }
    }

    pub fn coefficient_matrix(&self) -> DMatrix<C64> {
        match &self.coef {
            Coefficients::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Coefficients::Dense(m) => m.clone(),
        }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &SpectralMap) -> Result<SpectralMap> {
        if !Arc::ptr_eq(&self.op.basis, &other.op.basis) {
            return Err(Error::param("cannot compose maps built on different eigenbases"));
        }
        let coef = match (&self.coef, &other.coef) {
            (Coefficients::Diagonal(a), Coefficients::Diagonal(b)) => {
                Coefficients::Diagonal(a.iter().zip(b).map(|(x, y)| x * y).collect())
            }
            _ => Coefficients::Dense(self.coefficient_matrix() * other.coefficient_matrix()),
        };
        Ok(SpectralMap {
            op: self.op.clone(),
            coef,
        })
    }

    /// The weighted adjoint, `M^H`.
    pub fn adjoint(&self) -> SpectralMap {
        let coef = match &self.coef {
            Coefficients::Diagonal(d) => Coefficients::Diagonal(d.iter().map(|v| v.conj()).collect()),
            Coefficients::Dense(m) => Coefficients::Dense(m.adjoint()),
        };
        SpectralMap {
            op: self.op.clone(),
            coef,
        }
    }

    /// Exact `L² -> L²` norm on the span of the eigenvectors.
    pub fn l2_norm(&self) -> f64 {
        match &self.coef {
            Coefficients::Diagonal(d) => d.iter().map(|v| v.norm()).fold(0.0, f64::max),
            Coefficients::Dense(m) => {
                if m.is_empty() {
                    0.0
                } else {
                    m.clone().svd(false, false).singular_values.max()
                }
            }
        }
    }

    fn act(&self, c: &[C64], adjoint: bool) -> Vec<C64> {
        match &self.coef {
            Coefficients::Diagonal(d) => c
                .iter()
                .zip(d)
                .map(|(a, m)| if adjoint { a * m.conj() } else { a * m })
                .collect(),
            Coefficients::Dense(m) => {
                let v = DVector::from_column_slice(c);
                if adjoint {
                    m.ad_mul(&v).as_slice().to_vec()
                } else {
                    (m * v).as_slice().to_vec()
                }
            }
        }
    }

    /// Action on eigen-coefficients.
    pub fn apply_coefficients(&self, c: &[C64]) -> Vec<C64> {
        self.act(c, false)
    }
}

impl LinearMap for SpectralMap {
    fn domain(&self) -> &FiniteMeasureSpace {
        &self.op.space
    }
    fn codomain(&self) -> &FiniteMeasureSpace {
        &self.op.space
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let c = self.op.basis.analyze(self.op.space.weights(), x);
        self.op.basis.synthesize(&self.act(&c, false))
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        let c = self.op.basis.analyze(self.op.space.weights(), y);
        self.op.basis.synthesize(&self.act(&c, true))
    }
}

/// Orthogonal projector onto eigenvalues in the closed window.
pub fn project(op: &SpectralOperator, window: &SpectralWindow) -> SpectralMap {
    let values = op
        .eigenvalues()
        .iter()
        .map(|t| C64::new(if window.contains(*t) { 1.0 } else { 0.0 }, 0.0))
        .collect();
    SpectralMap::diagonal(op, values).expect("length matches rank")
}

/// `m(A)`; fails if `m` is not finite at some eigenvalue.
pub fn multiplier(op: &SpectralOperator, m: impl Fn(f64) -> C64) -> Result<SpectralMap> {
    let values = op
        .eigenvalues()
        .iter()
        .map(|t| {
            let v = m(*t);
            if v.re.is_finite() && v.im.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteMultiplier(*t))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralMap::diagonal(op, values)
}

/// `(A² - (λ+iμ)²)^{-β}`, pre-composed with the query's cutoff if present.
pub fn resolvent_sq(op: &SpectralOperator, query: &ResolventQuery) -> Result<SpectralMap> {
    query.validate()?;
    multiplier(op, |t| query.symbol(t))
}

/// `Im (A² - (λ+iμ)²)^{-1}` (cutoff honored; β is ignored).
pub fn im_resolvent(op: &SpectralOperator, query: &ResolventQuery) -> Result<SpectralMap> {
    let q = ResolventQuery { beta: 1.0, ..*query };
    q.validate()?;
    multiplier(op, |t| C64::new(q.symbol(t).im, 0.0))
}

/// Quadrature controls for [`cosine_resolvent`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineQuadrature {
    /// Truncation `T` of the ℓ-integral; chosen from `tail_tol` if absent.
    pub truncation: Option<f64>,
    pub tail_tol: f64,
    /// Gauss–Legendre points per panel.
    pub order: usize,
}

impl Default for CosineQuadrature {
    fn default() -> Self {
        Self {
            truncation: None,
            tail_tol: 1e-12,
            order: 8,
        }
    }
}

/// `((λ+iε)² - A²)^{-1}`, i.e. `(Δ + (λ+iε)²)^{-1}`, evaluated per eigenvalue
/// from `(1/(iz)) ∫_0^∞ e^{iℓz} cos(ℓτ) dℓ`, `z = λ+iε`.
pub fn cosine_resolvent(
    op: &SpectralOperator,
    lambda: f64,
    eps: f64,
    quad: &CosineQuadrature,
) -> Result<SpectralMap> {
    if !(eps > 0.0) {
        return Err(Error::param(format!("cosine transform requires eps > 0, got {eps}")));
    }
    if !(quad.tail_tol > 0.0 && quad.tail_tol < 1.0) {
        return Err(Error::param("tail tolerance must lie in (0,1)"));
    }
    // one extra e-fold keeps the tail strictly below tolerance
    let t_needed = (1.0 - quad.tail_tol.ln()) / eps;
    let t_max = quad.truncation.unwrap_or(t_needed);
    let tail = (-eps * t_max).exp();
    if tail > quad.tail_tol {
        return Err(Error::Numerical(format!(
            "truncation T={t_max} leaves tail e^(-eps T)={tail:.3e} above {:.1e}",
            quad.tail_tol
        )));
    }
    let tau_max = op.eigenvalues().last().copied().unwrap_or(0.0);
    let freq = lambda.abs().max(tau_max).max(1e-12);
    let step = std::f64::consts::PI / (8.0 * freq);
    let panels = (t_max / step).ceil().max(1.0) as usize;
    let rule = quadrature::gauss_legendre(quad.order)?;
    let z = C64::new(lambda, eps);
    let pre = (C64::i() * z).inv();
    let mut cache: HashMap<u64, C64> = HashMap::new();
    let values = op
        .eigenvalues()
        .iter()
        .map(|&tau| {
            *cache.entry(tau.to_bits()).or_insert_with(|| {
                let integral = quadrature::composite_complex(0.0, t_max, panels, &rule, |l| {
                    (C64::i() * z * l).exp() * (l * tau).cos()
                });
                pre * integral
            })
        })
        .collect();
    SpectralMap::diagonal(op, values)
}

/// `(λ² + A²)^{s/2}`, the flattened Sobolev weight `(λ² - Δ)^{s/2}`.
pub fn flattened_sobolev(op: &SpectralOperator, lambda: f64, s: f64) -> Result<SpectralMap> {
    if !(lambda >= 1.0) {
        return Err(Error::param(format!("flattening frequency must be >= 1, got {lambda}")));
    }
    multiplier(op, |t| C64::new((lambda * lambda + t * t).powf(s / 2.0), 0.0))
}

/// `A^α` with the same eigenvectors.
pub fn fractional_power(op: &SpectralOperator, alpha: f64) -> Result<SpectralOperator> {
    if !(alpha > 0.0) {
        return Err(Error::param(format!("fractional power requires alpha > 0, got {alpha}")));
    }
    if let Some(t) = op.eigenvalues().iter().find(|t| **t < 0.0) {
        return Err(Error::param(format!("negative eigenvalue {t}")));
    }
    let vals = op.eigenvalues().iter().map(|t| t.powf(alpha)).collect();
    op.with_eigenvalues(vals, format!("{}^{alpha}", op.label()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn diag_op(vals: &[f64]) -> SpectralOperator {
        let n = vals.len();
        let space = FiniteMeasureSpace::uniform(n, 1.0).unwrap();
        SpectralOperator::from_real_eigenpairs(space, vals.to_vec(), DMatrix::identity(n, n), "diag")
            .unwrap()
    }

    #[test]
    fn projector_examples() {
        let op = diag_op(&[1.0, 2.0, 3.0]);
        let p = project(&op, &SpectralWindow::new(1.5, 2.5).unwrap());
        assert_eq!(p.diagonal_values().unwrap(), &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let all = project(&op, &SpectralWindow::new(0.0, 10.0).unwrap());
        assert!(all.diagonal_values().unwrap().iter().all(|v| *v == c(1.0, 0.0)));
        let none = project(&op, &SpectralWindow::new(5.0, 6.0).unwrap());
        assert!(none.diagonal_values().unwrap().iter().all(|v| *v == c(0.0, 0.0)));
        assert!(SpectralWindow::new(2.0, 2.0).is_err());
    }

    #[test]
    fn multiplier_examples() {
        let op = diag_op(&[1.0, 2.0]);
        let sq = multiplier(&op, |t| c(t * t, 0.0)).unwrap();
        assert_eq!(sq.diagonal_values().unwrap(), &[c(1.0, 0.0), c(4.0, 0.0)]);
        assert!(matches!(
            multiplier(&op, |t| c(1.0 / (t - 1.0), 0.0)),
            Err(Error::NonFiniteMultiplier(_))
        ));
    }

    #[test]
    fn resolvent_examples() {
        let q = ResolventQuery::new(1.0, 1.0).unwrap();
        assert!((q.symbol(2.0) - c(0.2, 0.1)).norm() < 1e-15);
        assert!((q.symbol(0.0) - c(0.0, 0.5)).norm() < 1e-15);
        let q2 = q.with_beta(2.0).unwrap();
        assert!((q2.symbol(2.0) - c(0.03, 0.04)).norm() < 1e-15);
        assert!(ResolventQuery::new(1.0, 0.0).is_err());
        let q10 = ResolventQuery::new(10.0, 1.0).unwrap();
        // oracle: Im[1/(100 - (10+i)^2)] by hand-expanded arithmetic
        let d_re = 100.0 - (100.0 - 1.0);
        let d_im = -20.0;
        let oracle = -d_im / (d_re * d_re + d_im * d_im);
        assert!((q10.symbol(10.0).im - oracle).abs() < 1e-15);
        assert!((oracle - 20.0 / 401.0).abs() < 1e-15);
    }

    #[test]
    fn cosine_examples() {
        let op = diag_op(&[0.0, 2.0, 5.0]);
        let r = cosine_resolvent(&op, 1.0, 1.0, &CosineQuadrature::default()).unwrap();
        let d = r.diagonal_values().unwrap();
        assert!((d[0] - c(0.0, -0.5)).norm() < 1e-9);
        assert!((d[1] - c(-0.2, -0.1)).norm() < 1e-9);
        let r = cosine_resolvent(&op, 4.0, 0.5, &CosineQuadrature::default()).unwrap();
        let exact = (C64::new(4.0, 0.5).powi(2) - 25.0).inv();
        let got = r.diagonal_values().unwrap()[2];
        assert!((got - exact).norm() / exact.norm() < 1e-6);
        let short = CosineQuadrature {
            truncation: Some(3.0),
            ..Default::default()
        };
        assert!(cosine_resolvent(&op, 1.0, 1.0, &short).is_err());
        assert!(cosine_resolvent(&op, 1.0, 0.0, &CosineQuadrature::default()).is_err());
    }

    #[test]
    fn flattened_and_fractional() {
        let op = diag_op(&[0.0, 3.0]);
        let f = flattened_sobolev(&op, 4.0, 1.0).unwrap();
        assert!((f.diagonal_values().unwrap()[1] - c(5.0, 0.0)).norm() < 1e-14);
        let g = flattened_sobolev(&op, 4.0, -1.0).unwrap();
        let id = f.compose(&g).unwrap();
        assert!(id.diagonal_values().unwrap().iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-12));
        let op = diag_op(&[1.0, 2.0, 3.0]);
        assert_eq!(fractional_power(&op, 2.0).unwrap().eigenvalues(), &[1.0, 4.0, 9.0]);
        let back = fractional_power(&fractional_power(&op, 0.7).unwrap(), 1.0 / 0.7).unwrap();
        for (a, b) in back.eigenvalues().iter().zip(op.eigenvalues()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(fractional_power(&op, 0.0).is_err());
    }

    #[test]
    fn weighted_symmetric_diagonalization() {
        // M = W^{-1} S with S symmetric is self-adjoint for <.,.>_W
        let w = vec![1.0, 2.0, 0.5];
        let s = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let m = DMatrix::from_fn(3, 3, |i, j| s[(i, j)] / w[i]);
        let space = FiniteMeasureSpace::new(w).unwrap();
        let op = SpectralOperator::from_weighted_symmetric(space, &m, Ok, "t").unwrap();
        op.validate().unwrap();
        for i in 0..3 {
            let e = op.basis().column(i);
            let me: Vec<C64> = (0..3).map(|r| (0..3).map(|k| e[k] * m[(r, k)]).sum()).collect();
            for r in 0..3 {
                assert!((me[r] - e[r] * op.eigenvalues()[i]).norm() < 1e-10);
            }
        }
        assert!(SpectralOperator::from_weighted_symmetric(
            FiniteMeasureSpace::uniform(3, 1.0).unwrap(),
            &DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            Ok,
            "bad"
        )
        .is_err());
    }

    #[test]
    fn json_roundtrip() {
        let op = diag_op(&[0.5, 1.0]);
        let doc = op.to_json();
        let text = serde_json::to_string(&doc).unwrap();
        let back = SpectralOperator::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.eigenvalues(), op.eigenvalues());
    }
}
