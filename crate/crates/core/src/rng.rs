//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream. A
//! master seed selects the key, and the 64-bit stream id selects one of
//! 2^64 independent counter-based sequences under that key, so trial `i`
//! of cell `c` always sees the same numbers no matter how trials are
//! scheduled across threads.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// The stream for `seed` with stream id 0.
pub fn from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// An independent stream derived from `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for trial `trial` of table cell `cell`.
pub fn trial_stream(seed: u64, cell: u32, trial: u32) -> StreamRng {
    stream(seed, (u64::from(cell) << 32) | u64::from(trial))
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Uniform sample on the unit sphere S^{n-1} (normalized Gaussian).
pub fn unit_sphere<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let g = gaussian_vector(rng, n);
        let norm = g.norm();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

/// Uniform sample in the closed unit ball: a sphere point scaled by `U^{1/n}`.
pub fn unit_ball<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    let dir = unit_sphere(rng, n);
    let u: f64 = rng.random();
    dir * u.powf(1.0 / n as f64)
}
