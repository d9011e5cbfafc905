use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Geometry, GeometryKind, Model, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::FiniteMeasureSpace;
use crate::spectral::SpectralOperator;

/// Random self-adjoint model: weights in `[1/2, 2]`, eigenvalues uniform in
/// `[0, spectrum_max]`, eigenvectors from a weighted QR of a Gaussian matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomModel {
    pub dim: usize,
    pub seed: u64,
    pub spectrum_max: f64,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn random_operator(dim: usize, seed: u64, spectrum_max: f64) -> Result<SpectralOperator> {
    if dim == 0 {
        return Err(Error::param("random model needs dim >= 1"));
    }
    if !(spectrum_max > 0.0) {
        return Err(Error::param("spectrum_max must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.5..=2.0)).collect();
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian(&mut rng));
    let q = g.qr().q();
    // columns of W^{-1/2} Q are orthonormal in the weighted pairing
    let vecs = DMatrix::from_fn(dim, dim, |i, j| q[(i, j)] / weights[i].sqrt());
    let eig: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..=spectrum_max)).collect();
    SpectralOperator::from_real_eigenpairs(
        FiniteMeasureSpace::new(weights)?,
        eig,
        vecs,
        format!("random-{dim}-{seed}"),
    )
}

pub(super) fn build_model(m: &RandomModel) -> Result<Model> {
    let op = random_operator(m.dim, m.seed, m.spectrum_max)?;
    Ok(Model {
        spec: ModelSpec::Random(m.clone()),
        op,
        geometry: Geometry {
            kind: GeometryKind::Abstract,
            points: (0..m.dim).map(|i| [i as f64, 0.0, 0.0]).collect(),
            cell: 1.0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_orthonormal() {
        let a = random_operator(12, 7, 5.0).unwrap();
        let b = random_operator(12, 7, 5.0).unwrap();
        assert_eq!(a.eigenvalues(), b.eigenvalues());
        assert!(a.validate().unwrap() < 1e-12);
        assert!(a.eigenvalues().iter().all(|t| (0.0..=5.0).contains(t)));
    }
}
