#![allow(dead_code)]

use quantile_energy::linalg::{spectral_norm, Matrix, Vector};
use quantile_energy::model::ModelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    let g = gaussian(rng, n, 1).column(0).into_owned();
    let norm = g.norm();
    g / norm
}

/// Random model with `A` shifted left of the imaginary axis by more than its
/// norm, `Σ = LLᵀ + 0.1 I`, `T ∈ [0.5, 2]`.
pub fn random_stable_model(rng: &mut ChaCha8Rng, n: usize) -> ModelSpec {
    let m = rng.random_range(1..=n);
    let g = gaussian(rng, n, n) / (n as f64).sqrt();
    let shift = spectral_norm(&g) + rng.random_range(0.1..1.0);
    let a = g - Matrix::identity(n, n) * shift;
    let b = gaussian(rng, n, m);
    let l = gaussian(rng, n, n);
    let sigma = &l * l.transpose() / n as f64 + Matrix::identity(n, n) * 0.1;
    let x0 = gaussian(rng, n, 1).column(0).into_owned();
    let t = rng.random_range(0.5..2.0);
    ModelSpec::new(a, b, sigma, x0, t, None).unwrap()
}

/// `B = [1; 0]`, `A = diag(−1, −1)`: the second state is unreachable.
pub fn unreachable_model() -> ModelSpec {
    ModelSpec::new(
        Matrix::identity(2, 2) * -1.0,
        Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
        Matrix::identity(2, 2),
        Vector::zeros(2),
        1.0,
        None,
    )
    .unwrap()
}
