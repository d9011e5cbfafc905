use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Geometry, GeometryKind, Model, ModelSpec};
use crate::basis::{Eigenbasis, TorusBasis};
use crate::error::{Error, Result};
use crate::linalg::FiniteMeasureSpace;
use crate::spectral::SpectralOperator;

/// Flat torus `[0, 2π)^n`: the mode box `max_d |k_d| <= K` (which contains
/// the ball `|k| <= K`), `G` points per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusModel {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "G")]
    pub g: usize,
}

fn lattice(n: usize, k: usize) -> Vec<Vec<i32>> {
    let side = 2 * k + 1;
    let mut out = Vec::new();
    for idx in 0..side.pow(n as u32) {
        let mut rest = idx;
        let mut mode = vec![0i32; n];
        for d in (0..n).rev() {
            mode[d] = (rest % side) as i32 - k as i32;
            rest /= side;
        }
        out.push(mode);
    }
    let norm2 = |m: &Vec<i32>| m.iter().map(|&x| (x as i64) * (x as i64)).sum::<i64>();
    out.sort_by(|a, b| norm2(a).cmp(&norm2(b)).then_with(|| a.cmp(b)));
    out
}

/// Exact Fourier diagonalization of `A = sqrt(-Δ)` on the torus.
pub fn build_torus(n: usize, k: usize, g: usize) -> Result<SpectralOperator> {
    if n == 0 || n > 3 {
        return Err(Error::param(format!("torus dimension must be 1..=3, got {n}")));
    }
    if g < 4 * k + 1 {
        return Err(Error::param(format!("grid G={g} too small for K={k}: need G >= 4K+1")));
    }
    let modes = lattice(n, k);
    let eig: Vec<f64> = modes
        .iter()
        .map(|m| (m.iter().map(|&x| (x as f64).powi(2)).sum::<f64>()).sqrt())
        .collect();
    let basis = TorusBasis::new(n, k, g, modes);
    let space = FiniteMeasureSpace::uniform(g.pow(n as u32), basis.point_weight())?;
    SpectralOperator::from_parts(space, eig, Eigenbasis::Torus(basis), format!("torus-n{n}-K{k}-G{g}"))
}

pub(super) fn build_model(m: &TorusModel) -> Result<Model> {
    let op = build_torus(m.n, m.k, m.g)?;
    let total = m.g.pow(m.n as u32);
    let h = 2.0 * PI / m.g as f64;
    let points = (0..total)
        .map(|mut idx| {
            let mut p = [0.0; 3];
            for d in (0..m.n).rev() {
                p[d] = h * (idx % m.g) as f64;
                idx /= m.g;
            }
            p
        })
        .collect();
    Ok(Model {
        spec: ModelSpec::Torus(m.clone()),
        op,
        geometry: Geometry {
            kind: GeometryKind::Periodic { dim: m.n },
            points,
            cell: h,
        },
    })
}
