use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Model;
use crate::error::{Error, Result};
use crate::lp::lp_norm_real;

/// Potential families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialKind {
    Zero,
    /// Height `h` on the grid points nearest the centre carrying a fraction
    /// `f` of the total mass.
    SingleBump { height: f64, fraction: f64 },
    /// `h · max(d(x, x₀), cell)^{-γ}`.
    InversePower {
        gamma: f64,
        #[serde(default = "unit")]
        height: f64,
    },
    /// Independent uniform values in `[-h, h]`.
    Random {
        #[serde(default = "unit")]
        height: f64,
        seed: u64,
    },
}

fn unit() -> f64 {
    1.0
}

/// A real potential on the model grid with its `L^p` norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    pub values: Vec<f64>,
    pub p: f64,
    pub norm: f64,
}

impl Potential {
    pub fn sup(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            kind: self.kind.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            p: self.p,
            norm: self.norm * c.abs(),
        }
    }
}

/// Potentials are centred at the first grid point.
pub fn build_potential(kind: &PotentialKind, model: &Model, p: f64) -> Result<Potential> {
    if !(p >= 1.0) {
        return Err(Error::param(format!("potential exponent p must be >= 1, got {p}")));
    }
    let geo = &model.geometry;
    let w = model.op.space().weights();
    let x0 = geo.points[0];
    let values = match kind {
        PotentialKind::Zero => vec![0.0; w.len()],
        PotentialKind::SingleBump { height, fraction } => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::param(format!("support fraction must lie in [0, 1], got {fraction}")));
            }
            let mut order: Vec<usize> = (0..w.len()).collect();
            let d: Vec<f64> = geo.points.iter().map(|x| geo.distance(&x0, x)).collect();
            order.sort_by(|a, b| d[*a].total_cmp(&d[*b]).then(a.cmp(b)));
            let target = fraction * model.op.space().total_mass();
            let mut values = vec![0.0; w.len()];
            let mut mass = 0.0;
            for i in order {
                if mass >= target * (1.0 - 1e-12) {
                    break;
                }
                values[i] = *height;
                mass += w[i];
            }
            values
        }
        PotentialKind::InversePower { gamma, height } => {
            let n = geo.dimension() as f64;
            if !(*gamma >= 0.0 && gamma * p < n) {
                return Err(Error::param(format!(
                    "inverse power γ={gamma} is not L^{p}-integrable in dimension {n}"
                )));
            }
            geo.points
                .iter()
                .map(|x| height * geo.distance(&x0, x).max(geo.cell).powf(-gamma))
                .collect()
        }
        PotentialKind::Random { height, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..w.len()).map(|_| height * rng.gen_range(-1.0..=1.0)).collect()
        }
    };
    let norm = lp_norm_real(&values, w, p);
    if !norm.is_finite() {
        return Err(Error::Numerical("potential norm is not finite".into()));
    }
    Ok(Potential {
        kind: kind.clone(),
        values,
        p,
        norm,
    })
}
