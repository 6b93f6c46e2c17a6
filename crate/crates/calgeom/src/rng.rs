//! Deterministic random streams. Restart `r` of a run seeded with `s` draws
//! from the stream `s + r`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut Stream) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_matrix(rng: &mut Stream, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn gaussian_vector(rng: &mut Stream, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| gaussian(rng))
}

/// Uniform point on the unit sphere `S^{n−1}`.
pub fn unit_vector(rng: &mut Stream, n: usize) -> DVector<f64> {
    loop {
        let v = gaussian_vector(rng, n);
        let r = v.norm();
        if r > 1e-8 {
            return v / r;
        }
    }
}

/// Random symmetric matrix with standard Gaussian upper triangle.
pub fn symmetric(rng: &mut Stream, n: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    (&g + g.transpose()) * 0.5
}

pub fn uniform(rng: &mut Stream, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}
