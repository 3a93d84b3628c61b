//! Ergodic base dynamics: the driving systems underneath every cocycle.
//!
//! Two concrete drivers are provided, plus products:
//!
//! * an irrational circle rotation, with the angle stored as a 64-bit
//!   fixed-point fraction so that shifts compose bit-exactly;
//! * a two-sided Bernoulli shift whose full symbol sequence is a pure
//!   function of a stream seed, so a state is just `(stream, offset)` and
//!   shifting never allocates.
//!
//! Time is two-sided and discrete throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpectraError};
use crate::rng::mix64;

/// Fixed-point fraction of the golden rotation number: the angle is
/// `GOLDEN_ROTATION_FIXED / 2^64 = 0.6180339887498948964...`, which agrees
/// with `(sqrt(5)-1)/2` to about 19 significant digits. The constant is odd,
/// so the induced rotation of the 2^64-point grid has full period and orbits
/// are non-repeating at any practical horizon.
pub const GOLDEN_ROTATION_FIXED: u64 = 0x9e37_79b9_7f4a_7c15;

const PROB_SUM_TOL: f64 = 1e-12;

/// An ergodic driving system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Driver {
    /// Rotation by `alpha_fixed / 2^64` on the circle `[0,1)`.
    CircleRotation { alpha_fixed: u64 },
    /// Two-sided iid shift over `probabilities.len()` symbols. The window
    /// half-width only controls how much of the sequence accessors expose.
    BernoulliShift {
        probabilities: Vec<f64>,
        window_half_width: usize,
    },
    Product(Box<Driver>, Box<Driver>),
}

/// A point of the base space, exact under shift composition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OmegaPoint {
    Circle { frac: u64 },
    Bernoulli { stream: u64, offset: i64 },
    Product(Box<OmegaPoint>, Box<OmegaPoint>),
}

impl Driver {
    pub fn golden_circle() -> Driver {
        Driver::CircleRotation { alpha_fixed: GOLDEN_ROTATION_FIXED }
    }

    pub fn circle(alpha_fixed: u64) -> Driver {
        Driver::CircleRotation { alpha_fixed }
    }

    pub fn bernoulli(probabilities: Vec<f64>, window_half_width: usize) -> Result<Driver> {
        if probabilities.len() < 2 {
            return Err(SpectraError::invalid("bernoulli shift needs at least 2 symbols"));
        }
        if probabilities.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(SpectraError::invalid("bernoulli probabilities must lie in [0,1]"));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(SpectraError::invalid(format!(
                "bernoulli probabilities sum to {sum}, expected 1 within {PROB_SUM_TOL:e}"
            )));
        }
        Ok(Driver::BernoulliShift { probabilities, window_half_width })
    }

    pub fn product(a: Driver, b: Driver) -> Driver {
        Driver::Product(Box::new(a), Box::new(b))
    }

    pub fn describe(&self) -> String {
        match self {
            Driver::CircleRotation { alpha_fixed } => {
                format!("circle rotation by {}/2^64", alpha_fixed)
            }
            Driver::BernoulliShift { probabilities, .. } => {
                format!("bernoulli shift on {} symbols", probabilities.len())
            }
            Driver::Product(a, b) => format!("product({}, {})", a.describe(), b.describe()),
        }
    }
}

/// `theta_t(omega)`; composition is exact for any integers t, s.
pub fn theta_step(driver: &Driver, omega: &OmegaPoint, t: i64) -> OmegaPoint {
    match (driver, omega) {
        (Driver::CircleRotation { alpha_fixed }, OmegaPoint::Circle { frac }) => {
            // wrapping arithmetic is addition mod 2^64, i.e. mod 1 in
            // fixed point; negative t works through two's complement.
            let step = (t as u64).wrapping_mul(*alpha_fixed);
            OmegaPoint::Circle { frac: frac.wrapping_add(step) }
        }
        (Driver::BernoulliShift { .. }, OmegaPoint::Bernoulli { stream, offset }) => {
            OmegaPoint::Bernoulli { stream: *stream, offset: offset + t }
        }
        (Driver::Product(da, db), OmegaPoint::Product(pa, pb)) => OmegaPoint::Product(
            Box::new(theta_step(da, pa, t)),
            Box::new(theta_step(db, pb, t)),
        ),
        _ => panic!("driver/state kind mismatch"),
    }
}

/// Deterministic draw from the invariant measure.
pub fn sample_omega(driver: &Driver, seed: u64) -> OmegaPoint {
    match driver {
        Driver::CircleRotation { .. } => {
            OmegaPoint::Circle { frac: mix64(mix64(seed) ^ 0xa076_1d64_78bd_642f) }
        }
        Driver::BernoulliShift { .. } => OmegaPoint::Bernoulli {
            stream: mix64(seed ^ 0xe703_7ed1_a0b4_28db),
            offset: 0,
        },
        Driver::Product(a, b) => OmegaPoint::Product(
            Box::new(sample_omega(a, mix64(seed ^ 1))),
            Box::new(sample_omega(b, mix64(seed ^ 2))),
        ),
    }
}

/// Circle position in `[0,1)`. Panics on non-circle states.
pub fn circle_position(omega: &OmegaPoint) -> f64 {
    match omega {
        OmegaPoint::Circle { frac } => *frac as f64 / 2f64.powi(64),
        _ => panic!("circle_position on a non-circle state"),
    }
}

/// Symbol at position `offset + rel` of the two-sided sequence.
pub fn bernoulli_symbol(driver: &Driver, omega: &OmegaPoint, rel: i64) -> usize {
    let (probabilities, stream, offset) = match (driver, omega) {
        (
            Driver::BernoulliShift { probabilities, .. },
            OmegaPoint::Bernoulli { stream, offset },
        ) => (probabilities, *stream, *offset),
        _ => panic!("bernoulli_symbol on a non-bernoulli state"),
    };
    let idx = offset + rel;
    let u = mix64(stream ^ mix64(idx as u64)) as f64 / 2f64.powi(64);
    let mut acc = 0.0;
    for (s, &p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return s;
        }
    }
    probabilities.len() - 1
}

/// The visible window `[-W, W]` of symbols around the current offset.
pub fn bernoulli_window(driver: &Driver, omega: &OmegaPoint) -> Vec<usize> {
    let w = match driver {
        Driver::BernoulliShift { window_half_width, .. } => *window_half_width as i64,
        _ => panic!("bernoulli_window on a non-bernoulli driver"),
    };
    (-w..=w).map(|rel| bernoulli_symbol(driver, omega, rel)).collect()
}

/// A uniform variate measurably attached to the state: the circle position
/// itself, or the binary expansion of the forward symbol window.
pub fn uniform_variate(driver: &Driver, omega: &OmegaPoint) -> f64 {
    match (driver, omega) {
        (Driver::CircleRotation { .. }, _) => circle_position(omega),
        (Driver::BernoulliShift { .. }, _) => {
            let mut u = 0.0;
            let mut w = 0.5;
            for rel in 0..53 {
                let bit = bernoulli_symbol(driver, omega, rel) % 2;
                if bit == 1 {
                    u += w;
                }
                w *= 0.5;
            }
            u
        }
        (Driver::Product(da, db), OmegaPoint::Product(pa, pb)) => {
            (uniform_variate(da, pa) + uniform_variate(db, pb)).fract()
        }
        _ => panic!("driver/state kind mismatch"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_point(x: f64) -> OmegaPoint {
        OmegaPoint::Circle { frac: (x * 2f64.powi(64)) as u64 }
    }

    #[test]
    fn quarter_rotation_two_steps() {
        // alpha = 0.25 exactly in fixed point
        let driver = Driver::circle(1u64 << 62);
        let w = circle_point(0.1);
        let moved = theta_step(&driver, &w, 2);
        assert!((circle_position(&moved) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn zero_step_is_identity() {
        let drivers = [
            Driver::golden_circle(),
            Driver::bernoulli(vec![0.5, 0.5], 4).unwrap(),
        ];
        for d in drivers {
            let w = sample_omega(&d, 5);
            assert_eq!(theta_step(&d, &w, 0), w);
        }
    }

    #[test]
    fn bernoulli_roundtrip_restores_window() {
        let d = Driver::bernoulli(vec![0.5, 0.5], 8).unwrap();
        let w = sample_omega(&d, 17);
        let before = bernoulli_window(&d, &w);
        let fwd = theta_step(&d, &w, 1);
        let back = theta_step(&d, &fwd, -1);
        assert_eq!(back, w);
        assert_eq!(bernoulli_window(&d, &back), before);
    }

    #[test]
    fn composition_law_is_exact() {
        let drivers = [
            Driver::golden_circle(),
            Driver::bernoulli(vec![0.25, 0.25, 0.5], 3).unwrap(),
            Driver::product(
                Driver::golden_circle(),
                Driver::bernoulli(vec![0.5, 0.5], 2).unwrap(),
            ),
        ];
        for d in drivers {
            let w = sample_omega(&d, 23);
            for &(t, s) in &[(3i64, 5i64), (-4, 9), (10_000, -9_999), (-10_000, -10_000)] {
                let one = theta_step(&d, &theta_step(&d, &w, s), t);
                let two = theta_step(&d, &w, t + s);
                assert_eq!(one, two, "t={t} s={s}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = Driver::golden_circle();
        assert_eq!(sample_omega(&d, 99), sample_omega(&d, 99));
        assert_ne!(sample_omega(&d, 99), sample_omega(&d, 100));
    }

    #[test]
    fn bernoulli_symbol_frequency() {
        let d = Driver::bernoulli(vec![0.5, 0.5], 2).unwrap();
        let w = sample_omega(&d, 1234);
        let n = 100_000;
        let zeros = (0..n).filter(|&i| bernoulli_symbol(&d, &w, i) == 0).count();
        let freq = zeros as f64 / n as f64;
        assert!((0.495..=0.505).contains(&freq), "freq {freq}");
    }

    #[test]
    fn invalid_probabilities_are_rejected() {
        assert!(Driver::bernoulli(vec![0.7, 0.2], 2).is_err());
        assert!(Driver::bernoulli(vec![1.0], 2).is_err());
    }

    /// Kolmogorov-Smirnov statistic of orbit positions against uniform.
    fn ks_statistic(driver: &Driver, w: &OmegaPoint, n: usize) -> f64 {
        let mut xs: Vec<f64> = (0..n as i64)
            .map(|t| circle_position(&theta_step(driver, w, t)))
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64;
                (x - lo).abs().max((hi - x).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn golden_orbit_equidistributes() {
        let d = Driver::golden_circle();
        let w = sample_omega(&d, 3);
        let k100 = ks_statistic(&d, &w, 100);
        let k1k = ks_statistic(&d, &w, 1_000);
        let k10k = ks_statistic(&d, &w, 10_000);
        assert!(k100 > k1k && k1k > k10k, "{k100} {k1k} {k10k}");
    }

    #[test]
    fn product_sampling_is_componentwise() {
        let d = Driver::product(
            Driver::golden_circle(),
            Driver::bernoulli(vec![0.5, 0.5], 2).unwrap(),
        );
        match sample_omega(&d, 8) {
            OmegaPoint::Product(a, b) => {
                assert!(matches!(*a, OmegaPoint::Circle { .. }));
                assert!(matches!(*b, OmegaPoint::Bernoulli { .. }));
            }
            _ => panic!("expected product state"),
        }
    }
}
