//! Thin sampling helpers over `rand_distr`, generic in the scalar type.
//!
//! Draws are made in `f64` and narrowed, which keeps the samplers identical
//! across scalar types for a fixed seed.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

use crate::num::Real;

/// Normal draw parameterised by mean and precision.
pub fn normal<T: Real, R: Rng + ?Sized>(rng: &mut R, mean: T, precision: T) -> T {
    let sd = (1.0 / precision.as_f64()).sqrt();
    let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
    mean + T::lit(z * sd)
}

/// Gamma draw with the given shape and scale (mean `shape * scale`).
pub fn gamma<T: Real, R: Rng + ?Sized>(rng: &mut R, shape: T, scale: T) -> T {
    let g = Gamma::new(shape.as_f64(), scale.as_f64()).expect("positive gamma parameters");
    let v: f64 = g.sample(rng);
    T::lit(v.max(f64::MIN_POSITIVE))
}

/// Gamma draw in the mean parameterisation used by the mixture hyperpriors:
/// `G(a, b)` has shape `a/2` and mean `b`.
pub fn gamma_mean<T: Real, R: Rng + ?Sized>(rng: &mut R, a: T, mean: T) -> T {
    let half = T::lit(0.5);
    let shape = a * half;
    gamma(rng, shape, mean / shape)
}

/// Poisson draw conditioned on being at least one.
pub fn poisson_at_least_one<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let p = Poisson::new(mean).expect("positive Poisson mean");
    loop {
        let v: f64 = p.sample(rng);
        if v >= 1.0 {
            return v as u64;
        }
    }
}

/// Index drawn proportionally to `exp(log_weights)`.
pub fn categorical_log<T: Real, R: Rng + ?Sized>(rng: &mut R, log_weights: &[T]) -> usize {
    let max = log_weights.iter().copied().fold(T::neg_infinity(), T::max);
    let w: Vec<f64> = log_weights.iter().map(|&l| (l - max).as_f64().exp()).collect();
    categorical(rng, &w)
}

/// Index drawn proportionally to non-negative weights.
pub fn categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // rounding fallback: last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_parameterised_gamma_has_requested_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let m: f64 = (0..n).map(|_| gamma_mean(&mut rng, 6.0_f64, 2.5)).sum::<f64>() / n as f64;
        assert!((m - 2.5).abs() < 0.03, "{m}");
    }

    #[test]
    fn categorical_respects_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0usize; 3];
        for _ in 0..60_000 {
            counts[categorical_log(&mut rng, &[0.0_f64, 2f64.ln(), f64::NEG_INFINITY])] += 1;
        }
        assert_eq!(counts[2], 0);
        let ratio = counts[1] as f64 / counts[0] as f64;
        assert!((ratio - 2.0).abs() < 0.08, "{ratio}");
    }

    #[test]
    fn poisson_draw_never_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..10_000).all(|_| poisson_at_least_one(&mut rng, 0.5) >= 1));
    }
}
