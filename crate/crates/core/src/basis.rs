//! Orthonormal eigenvector families on a weighted grid.
//!
//! Families may be partial (fewer vectors than grid points): a truncated
//! Fourier or spherical-harmonic basis sampled on a quadrature grid. Every
//! spectral multiplier then acts as zero on the orthogonal complement.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::linalg::C64;

/// Sampled exponentials `(2π)^{-n/2} e^{i k·x}` on a `G^n` periodic grid,
/// for lattice modes `|k| <= K`. Transforms are separable partial DFTs.
#[derive(Clone, Debug)]
pub struct TorusBasis {
    n: usize,
    g: usize,
    k_max: usize,
    modes: Vec<Vec<i32>>,
    box_index: Vec<usize>,
    // phase[m * g + j] = exp(-i k_m x_j), k_m = m - K
    phase: Vec<C64>,
}

impl TorusBasis {
    /// `modes` must already be ordered as the caller wants the eigenvalues.
    pub(crate) fn new(n: usize, k_max: usize, g: usize, modes: Vec<Vec<i32>>) -> Self {
        let m = 2 * k_max + 1;
        let box_index = modes
            .iter()
            .map(|k| {
                k.iter()
                    .fold(0usize, |acc, &kd| acc * m + (kd + k_max as i32) as usize)
            })
            .collect();
        let mut phase = Vec::with_capacity(m * g);
        for mi in 0..m {
            let k = mi as f64 - k_max as f64;
            for j in 0..g {
                let x = 2.0 * PI * j as f64 / g as f64;
                phase.push(C64::from_polar(1.0, -k * x));
            }
        }
        Self {
            n,
            g,
            k_max,
            modes,
            box_index,
            phase,
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> usize {
        self.g
    }

    pub fn cutoff(&self) -> usize {
        self.k_max
    }

    pub fn modes(&self) -> &[Vec<i32>] {
        &self.modes
    }

    pub fn point_weight(&self) -> f64 {
        (2.0 * PI / self.g as f64).powi(self.n as i32)
    }

    fn amplitude(&self) -> f64 {
        (2.0 * PI).powf(-(self.n as f64) / 2.0)
    }

    /// Transform one axis of a row-major tensor from length `from` to `to`,
    /// with kernel `kern(to_idx, from_idx)`.
    fn transform_axis(
        data: &[C64],
        dims: &mut [usize],
        axis: usize,
        to: usize,
        kern: impl Fn(usize, usize) -> C64,
    ) -> Vec<C64> {
        let from = dims[axis];
        let outer: usize = dims[..axis].iter().product();
        let inner: usize = dims[axis + 1..].iter().product();
        let mut out = vec![C64::new(0.0, 0.0); outer * to * inner];
        let kmat: Vec<C64> = (0..to)
            .flat_map(|t| (0..from).map(move |f| (t, f)))
            .map(|(t, f)| kern(t, f))
            .collect();
        for o in 0..outer {
            let src = &data[o * from * inner..(o + 1) * from * inner];
            let dst = &mut out[o * to * inner..(o + 1) * to * inner];
            for t in 0..to {
                let row = &mut dst[t * inner..(t + 1) * inner];
                for f in 0..from {
                    let c = kmat[t * from + f];
                    if c.re == 0.0 && c.im == 0.0 {
                        continue;
                    }
                    let col = &src[f * inner..(f + 1) * inner];
                    for (r, s) in row.iter_mut().zip(col) {
                        *r += c * s;
                    }
                }
            }
        }
        dims[axis] = to;
        out
    }

    pub(crate) fn analyze(&self, weights: &[f64], x: &[C64]) -> Vec<C64> {
        let m = 2 * self.k_max + 1;
        let g = self.g;
        let mut dims = vec![g; self.n];
        let mut buf: Vec<C64> = x.iter().zip(weights).map(|(v, w)| v * *w).collect();
        for axis in 0..self.n {
            buf = Self::transform_axis(&buf, &mut dims, axis, m, |t, f| self.phase[t * g + f]);
        }
        let amp = self.amplitude();
        self.box_index.iter().map(|&b| buf[b] * amp).collect()
    }

    pub(crate) fn synthesize(&self, c: &[C64]) -> Vec<C64> {
        let m = 2 * self.k_max + 1;
        let g = self.g;
        let mut buf = vec![C64::new(0.0, 0.0); m.pow(self.n as u32)];
        let amp = self.amplitude();
        for (&b, v) in self.box_index.iter().zip(c) {
            buf[b] = v * amp;
        }
        let mut dims = vec![m; self.n];
        for axis in 0..self.n {
            buf = Self::transform_axis(&buf, &mut dims, axis, g, |t, f| {
                self.phase[f * g + t].conj()
            });
        }
        buf
    }

    pub(crate) fn column(&self, i: usize) -> Vec<C64> {
        let amp = self.amplitude();
        let k = &self.modes[i];
        let total = self.g.pow(self.n as u32);
        (0..total)
            .map(|mut idx| {
                let mut phase = 0.0;
                for d in (0..self.n).rev() {
                    let j = idx % self.g;
                    idx /= self.g;
                    phase += k[d] as f64 * 2.0 * PI * j as f64 / self.g as f64;
                }
                C64::from_polar(amp, phase)
            })
            .collect()
    }
}

/// The eigenvector family of a [`crate::SpectralOperator`].
#[derive(Clone, Debug)]
pub enum Eigenbasis {
    /// Real eigenvectors as columns (`N × r`).
    DenseReal(DMatrix<f64>),
    /// Complex eigenvectors as columns (`N × r`).
    DenseComplex(DMatrix<C64>),
    Torus(TorusBasis),
    /// Columns `base · u`, for operators re-diagonalized inside another family.
    Rotated {
        base: Arc<Eigenbasis>,
        u: DMatrix<C64>,
    },
}

impl Eigenbasis {
    /// Number of grid points.
    pub fn dim(&self) -> usize {
        match self {
            Eigenbasis::DenseReal(e) => e.nrows(),
            Eigenbasis::DenseComplex(e) => e.nrows(),
            Eigenbasis::Torus(t) => t.g.pow(t.n as u32),
            Eigenbasis::Rotated { base, .. } => base.dim(),
        }
    }

    /// Number of eigenvectors.
    pub fn len(&self) -> usize {
        match self {
            Eigenbasis::DenseReal(e) => e.ncols(),
            Eigenbasis::DenseComplex(e) => e.ncols(),
            Eigenbasis::Torus(t) => t.modes.len(),
            Eigenbasis::Rotated { u, .. } => u.ncols(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coefficients `c_i = <x, e_i>` in the weighted pairing.
    pub fn analyze(&self, weights: &[f64], x: &[C64]) -> Vec<C64> {
        match self {
            Eigenbasis::DenseReal(e) => {
                let re = DVector::from_iterator(x.len(), x.iter().zip(weights).map(|(v, w)| v.re * w));
                let im = DVector::from_iterator(x.len(), x.iter().zip(weights).map(|(v, w)| v.im * w));
                let cr = e.tr_mul(&re);
                let ci = e.tr_mul(&im);
                cr.iter().zip(ci.iter()).map(|(a, b)| C64::new(*a, *b)).collect()
            }
            Eigenbasis::DenseComplex(e) => {
                let v = DVector::from_iterator(x.len(), x.iter().zip(weights).map(|(v, w)| v * *w));
                e.ad_mul(&v).as_slice().to_vec()
            }
            Eigenbasis::Torus(t) => t.analyze(weights, x),
            Eigenbasis::Rotated { base, u } => {
                let c = DVector::from_vec(base.analyze(weights, x));
                u.ad_mul(&c).as_slice().to_vec()
            }
        }
    }

    /// `sum_i c_i e_i`.
    pub fn synthesize(&self, c: &[C64]) -> Vec<C64> {
        match self {
            Eigenbasis::DenseReal(e) => {
                let re = DVector::from_iterator(c.len(), c.iter().map(|v| v.re));
                let im = DVector::from_iterator(c.len(), c.iter().map(|v| v.im));
                let xr = e * re;
                let xi = e * im;
                xr.iter().zip(xi.iter()).map(|(a, b)| C64::new(*a, *b)).collect()
            }
            Eigenbasis::DenseComplex(e) => (e * DVector::from_column_slice(c)).as_slice().to_vec(),
            Eigenbasis::Torus(t) => t.synthesize(c),
            Eigenbasis::Rotated { base, u } => {
                let bc = u * DVector::from_column_slice(c);
                base.synthesize(bc.as_slice())
            }
        }
    }

    pub fn column(&self, i: usize) -> Vec<C64> {
        match self {
            Eigenbasis::DenseReal(e) => e.column(i).iter().map(|v| C64::new(*v, 0.0)).collect(),
            Eigenbasis::DenseComplex(e) => e.column(i).iter().copied().collect(),
            Eigenbasis::Torus(t) => t.column(i),
            Eigenbasis::Rotated { base, u } => {
                let c: Vec<C64> = u.column(i).iter().copied().collect();
                base.synthesize(&c)
            }
        }
    }

    /// Pointwise `sum_i a_i |e_i(x)|^2` for nonnegative `a`.
    pub fn density(&self, a: &[f64]) -> Vec<f64> {
        let n = self.dim();
        match self {
            Eigenbasis::Torus(t) => {
                let s: f64 = a.iter().sum();
                vec![s * t.amplitude().powi(2); n]
            }
            Eigenbasis::DenseReal(e) => {
                let mut out = vec![0.0; n];
                for (i, &ai) in a.iter().enumerate() {
                    if ai == 0.0 {
                        continue;
                    }
                    for (o, v) in out.iter_mut().zip(e.column(i).iter()) {
                        *o += ai * v * v;
                    }
                }
                out
            }
            _ => {
                let mut out = vec![0.0; n];
                for (i, &ai) in a.iter().enumerate() {
                    if ai == 0.0 {
                        continue;
                    }
                    for (o, v) in out.iter_mut().zip(self.column(i)) {
                        *o += ai * v.norm_sqr();
                    }
                }
                out
            }
        }
    }

    /// All eigenvectors as complex columns.
    pub fn materialize(&self) -> DMatrix<C64> {
        match self {
            Eigenbasis::DenseReal(e) => e.map(|v| C64::new(v, 0.0)),
            Eigenbasis::DenseComplex(e) => e.clone(),
            _ => {
                let cols: Vec<DVector<C64>> = (0..self.len())
                    .map(|i| DVector::from_vec(self.column(i)))
                    .collect();
                if cols.is_empty() {
                    DMatrix::zeros(self.dim(), 0)
                } else {
                    DMatrix::from_columns(&cols)
                }
            }
        }
    }

    /// Weighted Gram matrix `G_ij = <e_j, e_i>`.
    pub fn gram(&self, weights: &[f64]) -> DMatrix<C64> {
        let r = self.len();
        let mut g = DMatrix::zeros(r, r);
        for j in 0..r {
            let c = self.analyze(weights, &self.column(j));
            for i in 0..r {
                g[(i, j)] = c[i];
            }
        }
        g
    }

    pub fn is_real(&self) -> bool {
        matches!(self, Eigenbasis::DenseReal(_))
    }
}
