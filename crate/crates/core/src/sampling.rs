//! Seeded sampling of chart points and tangent vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::tensor::{MetricFrame, PointVector};

/// Generator for sample `index` under `seed`; independent of thread layout.
pub fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> PointVector {
    PointVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

/// Uniform sample in the Euclidean ball of radius `radius`.
pub fn ball_point<R: Rng + ?Sized>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    let dir = gaussian_vector(rng, d);
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    let n = dir.norm();
    (dir * (r / n)).as_slice().to_vec()
}

/// `count` points in the ball of radius `radius`, point `i` drawn from
/// `point_rng(seed, i)`.
pub fn sample_points(seed: u64, count: usize, d: usize, radius: f64) -> Vec<Vec<f64>> {
    (0..count).map(|i| ball_point(&mut point_rng(seed, i as u64), d, radius)).collect()
}

/// Gaussian vector normalized in `frame`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, frame: &MetricFrame) -> Result<PointVector> {
    frame.normalize(&gaussian_vector(rng, frame.dim()))
}
