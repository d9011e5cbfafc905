use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Geometry, GeometryKind, Model, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::FiniteMeasureSpace;
use crate::spectral::SpectralOperator;

/// Divergence-form operator `-D⁻(a D⁺)` on a periodic `N^dim` grid over
/// `[0, 2π)^dim` with a lacunary `C^s` coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoughMetricModel {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(rename = "N")]
    pub grid: usize,
    pub s: f64,
    /// `δ_a`.
    pub amplitude: f64,
    /// `J`.
    pub scales: u32,
    /// Overall constant factor on the coefficient (1 by default).
    #[serde(default = "one")]
    pub scale: f64,
}

fn default_dim() -> usize {
    2
}

fn one() -> f64 {
    1.0
}

const MAX_DENSE: usize = 4096;

/// `a(x) = c (1 + δ Σ_{j=1..J} 2^{-js} cos(2^j x·e_j))`, with `e_j` cycling
/// through the coordinate axes.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    pub dim: usize,
    pub grid: usize,
    pub s: f64,
    pub amplitude: f64,
    pub scales: u32,
    pub scale: f64,
    /// Values at grid nodes, row-major.
    pub values: Vec<f64>,
    /// `max |a(x+h e) - a(x)| / h`.
    pub lipschitz: f64,
    /// `max |a(x+h e) - a(x)| / h^{min(s,1)}`.
    pub holder: f64,
    /// `max |a(x+h e) - 2a(x) + a(x-h e)| / h²`.
    pub second_difference: f64,
}

impl CoefficientField {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 1.0;
        for j in 1..=self.scales {
            let axis = (j as usize - 1) % self.dim;
            v += self.amplitude * 2f64.powf(-(j as f64) * self.s) * (2f64.powi(j as i32) * x[axis]).cos();
        }
        self.scale * v
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn coords(idx: usize, dim: usize, n: usize) -> [usize; 2] {
    if dim == 1 {
        [idx, 0]
    } else {
        [idx / n, idx % n]
    }
}

fn index(c: [usize; 2], dim: usize, n: usize) -> usize {
    if dim == 1 {
        c[0]
    } else {
        c[0] * n + c[1]
    }
}

fn shift(c: [usize; 2], axis: usize, by: isize, n: usize) -> [usize; 2] {
    let mut out = c;
    out[axis] = ((c[axis] as isize + by).rem_euclid(n as isize)) as usize;
    out
}

pub fn weierstrass_coefficient(dim: usize, s: f64, amplitude: f64, scales: u32, grid: usize) -> Result<CoefficientField> {
    if !(dim == 1 || dim == 2) {
        return Err(Error::param(format!("rough models are 1D or 2D, got {dim}")));
    }
    if !(0.0..=2.0).contains(&s) {
        return Err(Error::param(format!("regularity s must lie in [0, 2], got {s}")));
    }
    let total: f64 = (1..=scales).map(|j| 2f64.powf(-(j as f64) * s)).sum();
    if amplitude.abs() * total >= 0.5 {
        return Err(Error::param(format!(
            "ellipticity violated: δ Σ 2^(-js) = {} >= 1/2",
            amplitude.abs() * total
        )));
    }
    let mut field = CoefficientField {
        dim,
        grid,
        s,
        amplitude,
        scales,
        scale: 1.0,
        values: Vec::new(),
        lipschitz: 0.0,
        holder: 0.0,
        second_difference: 0.0,
    };
    let h = 2.0 * PI / grid as f64;
    let npts = grid.pow(dim as u32);
    field.values = (0..npts)
        .map(|i| {
            let c = coords(i, dim, grid);
            field.eval(&[h * c[0] as f64, h * c[1] as f64])
        })
        .collect();
    let hs = h.powf(s.min(1.0));
    for i in 0..npts {
        let c = coords(i, dim, grid);
        for axis in 0..dim {
            let fwd = field.values[index(shift(c, axis, 1, grid), dim, grid)];
            let back = field.values[index(shift(c, axis, -1, grid), dim, grid)];
            let d1 = (fwd - field.values[i]).abs();
            field.lipschitz = field.lipschitz.max(d1 / h);
            field.holder = field.holder.max(d1 / hs);
            field.second_difference = field
                .second_difference
                .max((fwd - 2.0 * field.values[i] + back).abs() / (h * h));
        }
    }
    Ok(field)
}

/// Assemble `-D⁻(a D⁺)` (coefficient sampled at cell midpoints) as a dense
/// matrix. Symmetric, since the grid weights are uniform.
fn assemble(field: &CoefficientField) -> DMatrix<f64> {
    let (dim, n) = (field.dim, field.grid);
    let h = 2.0 * PI / n as f64;
    let npts = n.pow(dim as u32);
    let mut m = DMatrix::<f64>::zeros(npts, npts);
    for i in 0..npts {
        let c = coords(i, dim, n);
        for axis in 0..dim {
            let mut mid = [h * c[0] as f64, h * c[1] as f64];
            mid[axis] += 0.5 * h;
            let a = field.eval(&mid) / (h * h);
            let j = index(shift(c, axis, 1, n), dim, n);
            // edge (i, j) with conductance a
            m[(i, i)] += a;
            m[(j, j)] += a;
            m[(i, j)] -= a;
            m[(j, i)] -= a;
        }
    }
    m
}

pub fn build_rough(model: &RoughMetricModel) -> Result<SpectralOperator> {
    let n = model.grid;
    if !n.is_power_of_two() || n < 4 {
        return Err(Error::param(format!("grid N must be a power of two >= 4, got {n}")));
    }
    let npts = n.pow(model.dim as u32);
    if npts > MAX_DENSE {
        return Err(Error::param(format!("{npts} grid points exceed the dense cap {MAX_DENSE}")));
    }
    if !(model.scale > 0.0) {
        return Err(Error::param("coefficient scale must be positive"));
    }
    let mut field = weierstrass_coefficient(model.dim, model.s, model.amplitude, model.scales, n)?;
    field.scale = model.scale;
    let m = assemble(&field);
    let asym = (&m - m.transpose()).amax();
    assert!(asym == 0.0, "divergence-form assembly is not symmetric ({asym})");
    let h = 2.0 * PI / n as f64;
    let space = FiniteMeasureSpace::uniform(npts, h.powi(model.dim as i32))?;
    let tol = 1e-9 * m.amax().max(1.0);
    let label = ModelSpec::Rough(model.clone()).label();
    SpectralOperator::from_weighted_symmetric(
        space,
        &m,
        |v| {
            if v < -tol {
                Err(Error::Numerical(format!("negative eigenvalue {v} in divergence-form operator")))
            } else {
                Ok(v.max(0.0).sqrt())
            }
        },
        label,
    )
}

pub(super) fn build_model(m: &RoughMetricModel) -> Result<Model> {
    let op = build_rough(m)?;
    let n = m.grid;
    let h = 2.0 * PI / n as f64;
    let points = (0..n.pow(m.dim as u32))
        .map(|i| {
            let c = coords(i, m.dim, n);
            [h * c[0] as f64, if m.dim == 2 { h * c[1] as f64 } else { 0.0 }, 0.0]
        })
        .collect();
    Ok(Model {
        spec: ModelSpec::Rough(m.clone()),
        op,
        geometry: Geometry {
            kind: GeometryKind::Periodic { dim: m.dim },
            points,
            cell: h,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(dim: usize, n: usize, s: f64, amp: f64, j: u32, scale: f64) -> RoughMetricModel {
        RoughMetricModel {
            dim,
            grid: n,
            s,
            amplitude: amp,
            scales: j,
            scale,
        }
    }

    #[test]
    fn flat_coefficient_matches_discrete_symbol() {
        let n = 8;
        let op = build_rough(&model(1, n, 1.0, 0.0, 3, 1.0)).unwrap();
        // oracle: the discrete Fourier symbol (2/h)|sin(πk/N)|
        let mut expected: Vec<f64> = (0..n)
            .map(|k| (n as f64 / PI) * (PI * k as f64 / n as f64).sin().abs())
            .collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in op.eigenvalues().iter().zip(&expected) {
            assert!((a * a - b * b).abs() < 1e-9, "{a} vs {b}");
        }
        let op4 = build_rough(&model(1, n, 1.0, 0.0, 3, 4.0)).unwrap();
        for (a, b) in op4.eigenvalues().iter().zip(op.eigenvalues()) {
            assert!((a - 2.0 * b).abs() < 1e-10);
        }
    }

    #[test]
    fn rough_2d_is_nonnegative() {
        let op = build_rough(&model(2, 16, 1.0, 0.1, 3, 1.0)).unwrap();
        assert!(op.validate().unwrap() < 1e-10);
        assert!(op.eigenvalues()[0] < 1e-6);
    }

    #[test]
    fn coefficient_quotients() {
        let flat = weierstrass_coefficient(2, 1.0, 0.0, 3, 32).unwrap();
        assert!(flat.values.iter().all(|v| *v == 1.0));
        let smooth = weierstrass_coefficient(1, 2.0, 0.2, 3, 256).unwrap();
        // |a''| <= δ Σ 2^{-2j} 4^j = δ J
        assert!(smooth.second_difference <= 0.2 * 3.0 * 1.01);
        let lip = |j| weierstrass_coefficient(1, 0.5, 0.1, j, 1024).unwrap();
        let (a, b) = (lip(4), lip(8));
        // Lipschitz quotient grows like 2^{J/2}; the Hölder-1/2 quotient obeys a J-free bound
        assert!(b.lipschitz / a.lipschitz > 2.5);
        // |a(x) - a(y)| <= δ Σ_j 2^{-j/2} min(2^j |x-y|, 2) <= 9.3 δ |x-y|^{1/2}, uniformly in J
        assert!(a.holder <= 9.3 * 0.1 && b.holder <= 9.3 * 0.1);
        assert!(weierstrass_coefficient(1, 0.0, 0.2, 3, 64).is_err());
    }
}
