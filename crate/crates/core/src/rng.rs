//! Seed derivation for reproducible parallel Monte Carlo.
//!
//! Every sampling task derives its own generator from `(root seed, task
//! path)`, so results are independent of worker count and scheduling.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; stateless integer mixing.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for the task identified by `path` under `seed`.
pub fn stream_rng(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut s = mix64(seed ^ 0x5851_f42d_4c95_7f2d);
    for &p in path {
        s = mix64(s ^ mix64(p));
    }
    ChaCha8Rng::seed_from_u64(s)
}

/// Standard normal deviate (Box-Muller).
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen();
        if u1 > 1e-300 {
            let u2: f64 = rng.gen();
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

/// Uniform direction on the unit sphere of R^d.
pub fn unit_sphere_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| standard_normal(rng));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}
