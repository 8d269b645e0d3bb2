//! Seeded random operators for tests and benchmarks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::opalg::{Operator, C64};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries with real and imaginary parts uniform in [-1, 1).
pub fn random_matrix<R: Rng>(dim: usize, rng: &mut R) -> Operator {
    let m = DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    Operator::new(m).expect("dim > 0")
}

pub fn random_hermitian<R: Rng>(dim: usize, rng: &mut R) -> Operator {
    let a = random_matrix(dim, rng);
    (&a + &a.adjoint()).scale(C64::new(0.5, 0.0))
}

/// B B* for a random B.
pub fn random_psd<R: Rng>(dim: usize, rng: &mut R) -> Operator {
    let b = random_matrix(dim, rng);
    let p = &b * &b.adjoint();
    // exact Hermitian symmetry, so downstream tolerance checks see no rounding asymmetry
    (&p + &p.adjoint()).scale(C64::new(0.5, 0.0))
}

/// Random matrix shifted away from singularity.
pub fn random_invertible<R: Rng>(dim: usize, rng: &mut R) -> Operator {
    let a = random_matrix(dim, rng);
    let shift = C64::new(rng.gen_range(1.0..2.0) * dim as f64, rng.gen_range(-1.0..1.0));
    &a + &Operator::identity(dim).scale(shift)
}
