//! Fixtures shared by the criterion benches.

use speclab_core::manifolds::{random_operator, Model, ModelSpec, TorusModel};
use speclab_core::SpectralOperator;

/// Random model of the size used by the proposition corpus.
pub fn corpus_operator(dim: usize) -> SpectralOperator {
    random_operator(dim, 11, 16.0).expect("random model")
}

/// Small flat torus (n = 2).
pub fn torus(k: i64) -> Model {
    let k = k as usize;
    ModelSpec::Torus(TorusModel { n: 2, k, g: 4 * k + 1 })
        .build()
        .expect("torus model")
}
