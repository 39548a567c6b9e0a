//! Special functions: log-gamma, digamma, regularized incomplete gamma, the
//! Gaussian CDF and the Poisson duration survival ratio.

use crate::num::Real;

const MAX_ITER: usize = 10_000;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation, reflection below 1/2).
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // Γ(x)Γ(1-x) = π / sin(πx)
        return (T::PI() / (T::PI() * x).sin().abs()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::of_usize(i));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    half * (T::PI() + T::PI()).ln() + (x + half) * t.ln() - t + acc.ln()
}

/// Digamma `ψ(x)` for `x > 0`.
pub fn digamma<T: Real>(mut x: T) -> T {
    let mut shift = T::zero();
    while x < T::lit(6.0) {
        shift = shift - x.recip();
        x = x + T::one();
    }
    let inv = x.recip();
    let inv2 = inv * inv;
    // asymptotic expansion in 1/x^2
    let series = inv2
        * (T::lit(1.0 / 12.0)
            - inv2 * (T::lit(1.0 / 120.0) - inv2 * (T::lit(1.0 / 252.0) - inv2 * (T::lit(1.0 / 240.0) - inv2 * T::lit(1.0 / 132.0)))));
    shift + x.ln() - T::lit(0.5) * inv - series
}

/// `ln P(a, x)` and `ln Q(a, x)` for the regularized incomplete gamma pair.
///
/// Series below `a + 1`, Lentz continued fraction above, each branch giving
/// the small tail directly so neither side suffers cancellation.
pub fn ln_gamma_pq<T: Real>(a: T, x: T) -> (T, T) {
    assert!(a > T::zero(), "incomplete gamma needs a > 0");
    assert!(x >= T::zero(), "incomplete gamma needs x >= 0");
    if x == T::zero() {
        return (T::neg_infinity(), T::zero());
    }
    let eps = T::epsilon();
    if x < a + T::one() {
        let mut term = a.recip();
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap = ap + T::one();
            term = term * x / ap;
            sum = sum + term;
            if term.abs() < sum.abs() * eps {
                break;
            }
        }
        let ln_p = a * x.ln() - x - ln_gamma(a) + sum.ln();
        let ln_q = (-ln_p.exp()).ln_1p();
        (ln_p, ln_q)
    } else {
        let tiny = T::min_positive_value() / eps;
        let mut b = x + T::one() - a;
        let mut c = tiny.recip();
        let mut d = b.recip();
        let mut h = d;
        for i in 1..MAX_ITER {
            let fi = T::of_usize(i);
            let an = -fi * (fi - a);
            b = b + T::lit(2.0);
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = d.recip();
            let del = d * c;
            h = h * del;
            if (del - T::one()).abs() < eps {
                break;
            }
        }
        let ln_q = a * x.ln() - x - ln_gamma(a) + h.ln();
        let ln_p = (-ln_q.exp()).ln_1p();
        (ln_p, ln_q)
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p<T: Real>(a: T, x: T) -> T {
    ln_gamma_pq(a, x).0.exp()
}

/// Regularized upper incomplete gamma `Q(a, x) = Γ(a, x) / Γ(a)`.
pub fn gamma_q<T: Real>(a: T, x: T) -> T {
    ln_gamma_pq(a, x).1.exp()
}

/// Complementary error function via `erfc(x) = Q(1/2, x²)`.
pub fn erfc<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x.is_infinite() {
        return if x > T::zero() { T::zero() } else { T::lit(2.0) };
    }
    if x >= T::zero() {
        gamma_q(half, x * x)
    } else {
        T::lit(2.0) - gamma_q(half, x * x)
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf<T: Real>(z: T) -> T {
    T::lit(0.5) * erfc(-z / T::SQRT_2())
}

/// `Pr{a < X ≤ b}` for `X ~ Normal(mean, 1/precision)`; `a`, `b` may be infinite.
pub fn normal_interval_mass<T: Real>(a: T, b: T, mean: T, precision: T) -> T {
    if b <= a {
        return T::zero();
    }
    let sd_inv = precision.sqrt();
    let za = (a - mean) * sd_inv;
    let zb = (b - mean) * sd_inv;
    // work in the tail that avoids 1 - (1 - ε) cancellation
    if za >= T::zero() {
        std_normal_cdf(-za) - std_normal_cdf(-zb)
    } else if zb <= T::zero() {
        std_normal_cdf(zb) - std_normal_cdf(za)
    } else {
        T::one() - std_normal_cdf(za) - std_normal_cdf(-zb)
    }
}

/// `ln Pr{D > τ}` for `D ~ Poisson(ν)`, i.e. `ln(1 - F_ν(τ))` with
/// `F_ν(τ) = Γ(τ+1, ν)/Γ(τ+1)`.
pub fn poisson_ln_tail<T: Real>(nu: T, tau: u64) -> T {
    let a = T::from_u64(tau + 1).expect("slot count representable");
    ln_gamma_pq(a, nu).0
}

/// Poisson CDF `F_ν(τ) = Pr{D ≤ τ}`.
pub fn poisson_cdf<T: Real>(nu: T, tau: u64) -> T {
    let a = T::from_u64(tau + 1).expect("slot count representable");
    gamma_q(a, nu)
}

/// Result of the survival evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Survival<T> {
    pub value: T,
    /// `1 - F_ν(τ)` underflowed: the hypothesis has certainly ended.
    pub saturated: bool,
}

/// Probability that a hypothesis that has lasted `τ` slots lasts a further
/// `τ0` slots: `(1 - F_ν(τ+τ0)) / (1 - F_ν(τ))`.
pub fn survival<T: Real>(nu: T, tau: u64, tau0: u64) -> Survival<T> {
    let den = poisson_ln_tail(nu, tau);
    if !den.is_finite() || den < T::min_positive_value().ln() {
        return Survival {
            value: T::zero(),
            saturated: true,
        };
    }
    let num = poisson_ln_tail(nu, tau + tau0);
    let value = (num - den).exp().min(T::one()).max(T::zero());
    Survival {
        value,
        saturated: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma as sg;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0_f64)).abs() < 1e-14);
        assert!((ln_gamma(5.0_f64) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5_f64) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        for &x in &[0.1_f64, 0.7, 3.3, 17.5, 250.0, 1001.0] {
            assert!((ln_gamma(x) - sg::ln_gamma(x)).abs() < 1e-10 * (1.0 + sg::ln_gamma(x).abs()));
        }
        assert!((ln_gamma(5.0_f32) - 24f32.ln()).abs() < 1e-5);
    }

    #[test]
    fn digamma_against_statrs() {
        for &x in &[0.05_f64, 0.5, 1.0, 2.5, 7.0, 40.0] {
            assert!((digamma(x) - sg::digamma(x)).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn incomplete_gamma_against_statrs() {
        for &(a, x) in &[(0.5_f64, 0.2), (1.0, 1.5), (3.0, 10.0), (101.0, 100.0), (20.0, 3.0), (0.5, 30.0)] {
            let p = gamma_p(a, x);
            let q = gamma_q(a, x);
            assert!((p - sg::gamma_lr(a, x)).abs() < 1e-12, "P({a},{x})");
            assert!((q - sg::gamma_ur(a, x)).abs() < 1e-12, "Q({a},{x})");
            assert!((p + q - 1.0).abs() < 1e-13);
        }
        // P(1, x) = 1 - e^{-x}
        assert!((gamma_p(1.0_f64, 1.5) - (1.0 - (-1.5_f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn normal_cdf_symmetry_and_tails() {
        assert!((std_normal_cdf(0.0_f64) - 0.5).abs() < 1e-15);
        assert!((std_normal_cdf(1.96_f64) - 0.975_002_104_851_78).abs() < 1e-12);
        let t = std_normal_cdf(-10.0_f64);
        assert!(t > 0.0 && (t - 7.619_853_024_160_527e-24).abs() < 1e-35);
        let m = normal_interval_mass(f64::NEG_INFINITY, f64::INFINITY, 3.0, 4.0);
        assert!((m - 1.0).abs() < 1e-15);
    }

    fn pmf_tail(nu: f64, tau: u64) -> f64 {
        // Pr{D > τ} by direct upward summation of Poisson pmf terms
        let mut s = 0.0;
        for i in (tau + 1)..(tau + 2000) {
            let ln = i as f64 * nu.ln() - nu - sg::ln_gamma(i as f64 + 1.0);
            s += ln.exp();
        }
        s
    }

    #[test]
    fn survival_near_one_for_early_slots() {
        let g = survival(100.0_f64, 0, 1);
        assert!(!g.saturated);
        assert!(g.value >= 1.0 - 1e-30);
    }

    #[test]
    fn survival_matches_pmf_summation() {
        let g = survival(100.0_f64, 100, 4).value;
        let oracle = pmf_tail(100.0, 104) / pmf_tail(100.0, 100);
        assert!((g - oracle).abs() < 1e-12, "{g} vs {oracle}");
    }

    #[test]
    fn survival_monotone_on_grid() {
        let nu = 50.0_f64;
        for tau in 0..=150 {
            let mut prev = 1.0;
            for tau0 in 1..=10 {
                let g = survival(nu, tau, tau0).value;
                assert!((0.0..=1.0).contains(&g));
                assert!(g <= prev + 1e-15);
                prev = g;
            }
            if tau > 0 {
                assert!(survival(nu, tau, 4).value <= survival(nu, tau - 1, 4).value + 1e-15);
            }
        }
    }

    #[test]
    fn survival_saturates_far_past_the_mean() {
        let g = survival(1.0_f64, 400, 1);
        assert!(g.saturated);
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn poisson_cdf_sums_to_one_in_limit() {
        assert!((poisson_cdf(5.0_f64, 200) - 1.0).abs() < 1e-15);
        let direct: f64 = (0..=3).map(|i| (i as f64 * 5f64.ln() - 5.0 - sg::ln_gamma(i as f64 + 1.0)).exp()).sum();
        assert!((poisson_cdf(5.0_f64, 3) - direct).abs() < 1e-14);
    }
}
