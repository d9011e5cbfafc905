//! Model operators: flat tori, the round 2-sphere, divergence-form operators
//! with rough coefficients, and seeded random models.

mod potential;
mod random;
mod rough;
mod sphere;
mod torus;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectral::SpectralOperator;

pub use potential::{build_potential, Potential, PotentialKind};
pub use random::{random_operator, RandomModel};
pub use rough::{build_rough, weierstrass_coefficient, CoefficientField, RoughMetricModel};
pub use sphere::{build_sphere, sphere_band, sphere_lambda, SphereModel};
pub use torus::{build_torus, TorusModel};

/// Sample points of a model grid, used for placing potentials.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub kind: GeometryKind,
    /// Coordinates: angles on the torus (one per axis, `dim` used), unit
    /// vectors on the sphere, the index on abstract models.
    pub points: Vec<[f64; 3]>,
    /// Linear size of one grid cell.
    pub cell: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GeometryKind {
    /// `[0, 2π)^dim` with periodic distance.
    Periodic { dim: usize },
    /// Unit 2-sphere, geodesic distance.
    Sphere,
    /// No geometry; distance is index distance.
    Abstract,
}

impl Geometry {
    pub fn distance(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        match self.kind {
            GeometryKind::Periodic { dim } => {
                let mut s = 0.0;
                for d in 0..dim {
                    let mut t = (a[d] - b[d]).abs() % (2.0 * std::f64::consts::PI);
                    t = t.min(2.0 * std::f64::consts::PI - t);
                    s += t * t;
                }
                s.sqrt()
            }
            GeometryKind::Sphere => {
                let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
                dot.clamp(-1.0, 1.0).acos()
            }
            GeometryKind::Abstract => (a[0] - b[0]).abs(),
        }
    }

    /// Intrinsic dimension.
    pub fn dimension(&self) -> usize {
        match self.kind {
            GeometryKind::Periodic { dim } => dim,
            GeometryKind::Sphere => 2,
            GeometryKind::Abstract => 1,
        }
    }
}

/// A constructed model: operator `A` plus the grid it lives on.
#[derive(Clone, Debug)]
pub struct Model {
    pub spec: ModelSpec,
    pub op: SpectralOperator,
    pub geometry: Geometry,
}

/// Declarative model description (config files, cache keys).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Torus(TorusModel),
    Sphere(SphereModel),
    Rough(RoughMetricModel),
    Random(RandomModel),
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        match self {
            ModelSpec::Torus(m) => torus::build_model(m),
            ModelSpec::Sphere(m) => sphere::build_model(m),
            ModelSpec::Rough(m) => rough::build_model(m),
            ModelSpec::Random(m) => random::build_model(m),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelSpec::Torus(m) => format!("torus-n{}-K{}-G{}", m.n, m.k, m.g),
            ModelSpec::Sphere(m) => format!("sphere-l{}-{}", m.l_min, m.l_max),
            ModelSpec::Rough(m) => format!("rough-d{}-N{}-s{}-a{}-J{}", m.dim, m.grid, m.s, m.amplitude, m.scales),
            ModelSpec::Random(m) => format!("random-{}-{}", m.dim, m.seed),
        }
    }

    /// Largest `λ` at which the discrete model is read as the continuum one.
    pub fn regime_cutoff(&self) -> f64 {
        match self {
            ModelSpec::Torus(m) => m.k as f64 / 4.0,
            ModelSpec::Sphere(m) => m.l_max as f64 / 2.0,
            ModelSpec::Rough(m) => m.grid as f64 / 8.0,
            ModelSpec::Random(m) => m.spectrum_max,
        }
    }

    /// Manifold dimension used for exponent bookkeeping.
    pub fn dimension(&self) -> usize {
        match self {
            ModelSpec::Torus(m) => m.n,
            ModelSpec::Sphere(_) => 2,
            ModelSpec::Rough(m) => m.dim,
            ModelSpec::Random(_) => 1,
        }
    }
}
