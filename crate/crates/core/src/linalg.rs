//! Weighted measure spaces and the linear-map abstraction shared by the
//! spectral calculus and the norm engine.
//!
//! Vectors are complex samples on the points of a [`FiniteMeasureSpace`];
//! adjoints are taken with respect to the weighted pairing
//! `<u, v> = sum_i w_i u_i conj(v_i)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Point masses `w_i > 0` on `N` points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMeasureSpace {
    weights: Arc<Vec<f64>>,
}

impl FiniteMeasureSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("measure space must have at least one point"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::param(format!("weights must be positive and finite, got {w}")));
        }
        Ok(Self {
            weights: Arc::new(weights),
        })
    }

    pub fn uniform(n: usize, w: f64) -> Result<Self> {
        Self::new(vec![w; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted pairing `sum_i w_i u_i conj(v_i)`.
    pub fn inner(&self, u: &[C64], v: &[C64]) -> C64 {
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| a * b.conj() * *w)
            .sum()
    }

    pub fn same_as(&self, other: &FiniteMeasureSpace) -> bool {
        Arc::ptr_eq(&self.weights, &other.weights) || self.weights == other.weights
    }

    pub(crate) fn check_vec(&self, v: &[C64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: v.len(),
            });
        }
        Ok(())
    }
}

/// A linear map between weighted sample spaces with its weighted adjoint.
pub trait LinearMap: Send + Sync {
    fn domain(&self) -> &FiniteMeasureSpace;
    fn codomain(&self) -> &FiniteMeasureSpace;
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64>;

    /// Materialize the ambient matrix (column `j` is the image of `delta_j`).
    fn to_matrix(&self) -> DMatrix<C64> {
        let n = self.domain().len();
        let m = self.codomain().len();
        let mut out = DMatrix::zeros(m, n);
        let mut e = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            e[j] = C64::new(1.0, 0.0);
            let col = self.apply(&e);
            for (i, v) in col.into_iter().enumerate() {
                out[(i, j)] = v;
            }
            e[j] = C64::new(0.0, 0.0);
        }
        out
    }
}

impl<T: LinearMap + ?Sized> LinearMap for Arc<T> {
    fn domain(&self) -> &FiniteMeasureSpace {
        (**self).domain()
    }
    fn codomain(&self) -> &FiniteMeasureSpace {
        (**self).codomain()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        (**self).apply_adjoint(y)
    }
}

impl<T: LinearMap + ?Sized> LinearMap for Box<T> {
    fn domain(&self) -> &FiniteMeasureSpace {
        (**self).domain()
    }
    fn codomain(&self) -> &FiniteMeasureSpace {
        (**self).codomain()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        (**self).apply_adjoint(y)
    }
}

/// Explicit matrix acting on samples. The weighted adjoint is
/// `W_dom^{-1} M^H W_cod`.
#[derive(Clone, Debug)]
pub struct DenseMap {
    domain: FiniteMeasureSpace,
    codomain: FiniteMeasureSpace,
    matrix: DMatrix<C64>,
}

impl DenseMap {
    pub fn new(
        domain: FiniteMeasureSpace,
        codomain: FiniteMeasureSpace,
        matrix: DMatrix<C64>,
    ) -> Result<Self> {
        if matrix.ncols() != domain.len() {
            return Err(Error::DimensionMismatch {
                expected: domain.len(),
                actual: matrix.ncols(),
            });
        }
        if matrix.nrows() != codomain.len() {
            return Err(Error::DimensionMismatch {
                expected: codomain.len(),
                actual: matrix.nrows(),
            });
        }
        Ok(Self {
            domain,
            codomain,
            matrix,
        })
    }

    pub fn square(space: FiniteMeasureSpace, matrix: DMatrix<C64>) -> Result<Self> {
        Self::new(space.clone(), space, matrix)
    }

    /// `x -> u <x, v>` with the weighted pairing on the domain.
    pub fn rank_one(
        domain: FiniteMeasureSpace,
        codomain: FiniteMeasureSpace,
        u: &[C64],
        v: &[C64],
    ) -> Result<Self> {
        domain.check_vec(v)?;
        codomain.check_vec(u)?;
        let w = domain.weights();
        let m = DMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj() * w[j]);
        Self::new(domain, codomain, m)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

impl LinearMap for DenseMap {
    fn domain(&self) -> &FiniteMeasureSpace {
        &self.domain
    }
    fn codomain(&self) -> &FiniteMeasureSpace {
        &self.codomain
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let v = nalgebra::DVector::from_column_slice(x);
        (&self.matrix * v).as_slice().to_vec()
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        let wc = self.codomain.weights();
        let wd = self.domain.weights();
        let scaled: Vec<C64> = y.iter().zip(wc).map(|(a, w)| a * *w).collect();
        let v = nalgebra::DVector::from_column_slice(&scaled);
        let out = self.matrix.ad_mul(&v);
        out.iter().zip(wd).map(|(a, w)| a / *w).collect()
    }
    fn to_matrix(&self) -> DMatrix<C64> {
        self.matrix.clone()
    }
}

/// Pointwise multiplication by a (complex) field.
#[derive(Clone, Debug)]
pub struct Multiplication {
    space: FiniteMeasureSpace,
    values: Vec<C64>,
}

impl Multiplication {
    pub fn new(space: FiniteMeasureSpace, values: Vec<C64>) -> Result<Self> {
        space.check_vec(&values)?;
        Ok(Self { space, values })
    }

    pub fn real(space: FiniteMeasureSpace, values: &[f64]) -> Result<Self> {
        Self::new(space, values.iter().map(|v| C64::new(*v, 0.0)).collect())
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }
}

impl LinearMap for Multiplication {
    fn domain(&self) -> &FiniteMeasureSpace {
        &self.space
    }
    fn codomain(&self) -> &FiniteMeasureSpace {
        &self.space
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        x.iter().zip(&self.values).map(|(a, v)| a * v).collect()
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        y.iter().zip(&self.values).map(|(a, v)| a * v.conj()).collect()
    }
}

/// Composition `maps[k-1] ∘ ... ∘ maps[0]` (the first map is applied first).
pub struct Chain {
    maps: Vec<Arc<dyn LinearMap>>,
}

impl Chain {
    pub fn new(maps: Vec<Arc<dyn LinearMap>>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::param("empty composition"));
        }
        for pair in maps.windows(2) {
            if pair[0].codomain().len() != pair[1].domain().len() {
                return Err(Error::DimensionMismatch {
                    expected: pair[1].domain().len(),
                    actual: pair[0].codomain().len(),
                });
            }
        }
        Ok(Self { maps })
    }
}

impl LinearMap for Chain {
    fn domain(&self) -> &FiniteMeasureSpace {
        self.maps[0].domain()
    }
    fn codomain(&self) -> &FiniteMeasureSpace {
        self.maps[self.maps.len() - 1].codomain()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut v = x.to_vec();
        for m in &self.maps {
            v = m.apply(&v);
        }
        v
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        let mut v = y.to_vec();
        for m in self.maps.iter().rev() {
            v = m.apply_adjoint(&v);
        }
        v
    }
}

/// The weighted adjoint of a map, as a map.
pub struct Adjoint<T>(pub T);

impl<T: LinearMap> LinearMap for Adjoint<T> {
    fn domain(&self) -> &FiniteMeasureSpace {
        self.0.codomain()
    }
    fn codomain(&self) -> &FiniteMeasureSpace {
        self.0.domain()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.0.apply_adjoint(x)
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        self.0.apply(y)
    }
}

/// `T T*` as a single map on the codomain of `T`.
pub struct Gram<T>(pub T);

impl<T: LinearMap> LinearMap for Gram<T> {
    fn domain(&self) -> &FiniteMeasureSpace {
        self.0.codomain()
    }
    fn codomain(&self) -> &FiniteMeasureSpace {
        self.0.codomain()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.0.apply(&self.0.apply_adjoint(x))
    }
    fn apply_adjoint(&self, y: &[C64]) -> Vec<C64> {
        self.apply(y)
    }
}


pub(crate) fn max_abs(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
