//! Sampling the precision-prior shape β from its log-concave conditional.
//!
//! The conditional is handled on `y = ln β`, where it is log-concave, either
//! with derivative-based adaptive rejection sampling or with a stepping-out
//! slice sampler.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::special::{digamma, ln_gamma};

/// Which sampler draws β.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaSampler {
    #[default]
    Ars,
    Slice,
}

/// Sufficient statistics of the β conditional given the component precisions
/// and the scale hyperparameter `W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaConditional {
    pub k: usize,
    /// `Σ ln(S_k W)`
    pub sum_ln_sw: f64,
    /// `Σ S_k W`
    pub sum_sw: f64,
}

impl BetaConditional {
    pub fn new(precisions: &[f64], w: f64) -> Self {
        Self {
            k: precisions.len(),
            sum_ln_sw: precisions.iter().map(|s| (s * w).ln()).sum(),
            sum_sw: precisions.iter().map(|s| s * w).sum(),
        }
    }

    /// Unnormalised log density of β itself.
    pub fn ln_density_beta(&self, beta: f64) -> f64 {
        let k = self.k as f64;
        -k * ln_gamma(beta / 2.0) - 1.0 / (2.0 * beta) + (k * beta - 3.0) / 2.0 * (beta / 2.0).ln()
            + beta / 2.0 * self.sum_ln_sw
            - beta / 2.0 * self.sum_sw
    }

    /// Unnormalised log density of `y = ln β` (includes the Jacobian).
    pub fn ln_density(&self, y: f64) -> f64 {
        self.ln_density_beta(y.exp()) + y
    }

    /// Derivative of [`Self::ln_density`] with respect to `y`.
    pub fn d_ln_density(&self, y: f64) -> f64 {
        let b = y.exp();
        let k = self.k as f64;
        let d_beta = -k / 2.0 * digamma(b / 2.0) + 1.0 / (2.0 * b * b) + k / 2.0 * (b / 2.0).ln() + (k * b - 3.0) / (2.0 * b)
            + 0.5 * self.sum_ln_sw
            - 0.5 * self.sum_sw;
        b * d_beta + 1.0
    }

    /// Draws a new β; `current` seeds the abscissae or the slice.
    pub fn sample<R: Rng + ?Sized>(&self, sampler: BetaSampler, current: f64, rng: &mut R) -> f64 {
        let y0 = current.max(1e-300).ln();
        let y = match sampler {
            BetaSampler::Ars => ars_sample(|y| self.ln_density(y), |y| self.d_ln_density(y), y0, rng)
                .unwrap_or_else(|| slice_sample(|y| self.ln_density(y), y0, 1.0, rng)),
            BetaSampler::Slice => slice_sample(|y| self.ln_density(y), y0, 1.0, rng),
        };
        y.exp()
    }
}

const ARS_MAX_POINTS: usize = 64;
const ARS_MAX_TRIES: usize = 1_000;

/// One draw from a log-concave density `exp(h)` by adaptive rejection
/// sampling with tangent upper hulls. Returns `None` when the density is not
/// log-concave where probed or the abscissae cannot bracket the mode.
pub fn ars_sample<R, H, D>(h: H, dh: D, start: f64, rng: &mut R) -> Option<f64>
where
    R: Rng + ?Sized,
    H: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut xs = vec![start - 1.0, start, start + 1.0];
    // widen until both ends point toward the mode
    let mut step = 1.0;
    for _ in 0..60 {
        if dh(xs[0]) > 0.0 {
            break;
        }
        step *= 2.0;
        xs.insert(0, xs[0] - step);
    }
    step = 1.0;
    for _ in 0..60 {
        if dh(*xs.last().unwrap()) < 0.0 {
            break;
        }
        step *= 2.0;
        let last = *xs.last().unwrap();
        xs.push(last + step);
    }
    if !(dh(xs[0]) > 0.0 && dh(*xs.last().unwrap()) < 0.0) {
        return None;
    }
    let mut pts: Vec<(f64, f64, f64)> = xs.iter().map(|&x| (x, h(x), dh(x))).collect();
    if pts.iter().any(|p| !p.1.is_finite() || !p.2.is_finite()) {
        return None;
    }

    for _ in 0..ARS_MAX_TRIES {
        let hull = UpperHull::build(&pts)?;
        let x = hull.sample(rng);
        let u_x = hull.eval(x);
        let w: f64 = rng.gen();
        let lw = w.ln();
        // squeeze
        let idx = pts.partition_point(|p| p.0 <= x);
        if idx > 0 && idx < pts.len() {
            let (x0, h0, _) = pts[idx - 1];
            let (x1, h1, _) = pts[idx];
            let l_x = h0 + (x - x0) * (h1 - h0) / (x1 - x0);
            if lw <= l_x - u_x {
                return Some(x);
            }
        }
        let hx = h(x);
        let dx = dh(x);
        if !hx.is_finite() || !dx.is_finite() || hx > u_x + 1e-9 * (1.0 + u_x.abs()) {
            return None;
        }
        if lw <= hx - u_x {
            return Some(x);
        }
        if pts.len() < ARS_MAX_POINTS {
            pts.insert(idx, (x, hx, dx));
        }
    }
    None
}

struct UpperHull {
    /// (abscissa, h, h') per tangent
    tangents: Vec<(f64, f64, f64)>,
    /// breakpoints z_0..z_m, first -inf and last +inf
    z: Vec<f64>,
    /// log mass per segment
    ln_mass: Vec<f64>,
}

impl UpperHull {
    fn build(pts: &[(f64, f64, f64)]) -> Option<Self> {
        let m = pts.len();
        let mut z = Vec::with_capacity(m + 1);
        z.push(f64::NEG_INFINITY);
        for i in 0..m - 1 {
            let (x0, h0, d0) = pts[i];
            let (x1, h1, d1) = pts[i + 1];
            let zi = if (d0 - d1).abs() < 1e-12 {
                0.5 * (x0 + x1)
            } else {
                (h1 - h0 - x1 * d1 + x0 * d0) / (d0 - d1)
            };
            if !zi.is_finite() {
                return None;
            }
            z.push(zi.clamp(x0, x1));
        }
        z.push(f64::INFINITY);
        let ln_mass = (0..m)
            .map(|i| {
                let (x, hx, d) = pts[i];
                segment_ln_mass(hx, x, d, z[i], z[i + 1])
            })
            .collect::<Vec<_>>();
        if ln_mass.iter().any(|v| v.is_nan()) {
            return None;
        }
        Some(Self {
            tangents: pts.to_vec(),
            z,
            ln_mass,
        })
    }

    fn eval(&self, x: f64) -> f64 {
        let i = (self.z.partition_point(|&b| b < x)).clamp(1, self.tangents.len()) - 1;
        let (xi, hi, di) = self.tangents[i];
        hi + (x - xi) * di
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let max = self.ln_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.ln_mass.iter().map(|l| (l - max).exp()).collect();
        let i = crate::sample::categorical(rng, &w);
        let (_, _, d) = self.tangents[i];
        let (a, b) = (self.z[i], self.z[i + 1]);
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        if a == f64::NEG_INFINITY {
            b + u.ln() / d
        } else if b == f64::INFINITY {
            a + (1.0 - u).ln() / d
        } else if (d * (b - a)).abs() < 1e-12 {
            a + u * (b - a)
        } else {
            let x = a + (u * (d * (b - a)).exp_m1()).ln_1p() / d;
            x.clamp(a, b)
        }
    }
}

/// `ln ∫_a^b exp(h + (t - x) d) dt`.
fn segment_ln_mass(h: f64, x: f64, d: f64, a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        // requires d > 0
        h + (b - x) * d - d.ln()
    } else if b == f64::INFINITY {
        // requires d < 0
        h + (a - x) * d - (-d).ln()
    } else if (d * (b - a)).abs() < 1e-12 {
        h + (0.5 * (a + b) - x) * d + (b - a).max(1e-300).ln()
    } else if d > 0.0 {
        h + (b - x) * d + (-(-(d * (b - a))).exp_m1()).ln() - d.ln()
    } else {
        h + (a - x) * d + ((d * (b - a)).exp_m1().abs()).ln() - (-d).ln()
    }
}

/// One stepping-out / shrinkage slice-sampling transition from `x0`.
pub fn slice_sample<R, H>(h: H, x0: f64, width: f64, rng: &mut R) -> f64
where
    R: Rng + ?Sized,
    H: Fn(f64) -> f64,
{
    let h0 = h(x0);
    let level = h0 + rng.gen::<f64>().max(f64::MIN_POSITIVE).ln();
    let mut left = x0 - width * rng.gen::<f64>();
    let mut right = left + width;
    let mut steps = 0;
    while h(left) > level && steps < 200 {
        left -= width;
        steps += 1;
    }
    steps = 0;
    while h(right) > level && steps < 200 {
        right += width;
        steps += 1;
    }
    for _ in 0..1_000 {
        let x = left + rng.gen::<f64>() * (right - left);
        if h(x) > level {
            return x;
        }
        if x < x0 {
            left = x;
        } else {
            right = x;
        }
    }
    x0
}
