//! Ground-truth primary-transmitter traces and the secondary transmitter's
//! per-slot energy statistics.
//!
//! Discrete time is counted in sensing slots. Level indices into a
//! [`PowerMode`] follow the configured order, where the idle level (zero SNR)
//! conventionally comes last.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::sample;

/// Slots-per-sensing-window below which the Gaussian approximation is not trusted.
pub const MIN_SAMPLES_PER_SLOT: usize = 100;

/// Ground-truth PT configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PowerMode<T> {
    /// Linear received SNR per level; exactly one entry is zero (idle).
    pub snr: Vec<T>,
    /// Hypothesis probabilities.
    pub prior: Vec<T>,
    pub sigma2_u: T,
    /// Mean hypothesis duration in slots.
    pub nu: T,
    /// Samples per sensing slot.
    pub samples_per_slot: usize,
}

impl<T: Real> PowerMode<T> {
    pub fn new(snr: Vec<T>, prior: Vec<T>, sigma2_u: T, nu: T, samples_per_slot: usize) -> Result<Self> {
        let mode = Self {
            snr,
            prior,
            sigma2_u,
            nu,
            samples_per_slot,
        };
        mode.validate()?;
        Ok(mode)
    }

    /// Builds the level SNRs from power ratios scaled so that their average
    /// over the levels equals `avg_snr_db`.
    pub fn from_ratios(
        ratios: &[T],
        avg_snr_db: T,
        prior: Vec<T>,
        sigma2_u: T,
        nu: T,
        samples_per_slot: usize,
    ) -> Result<Self> {
        let unit = Self::unit_snr(ratios, avg_snr_db)?;
        Self::new(ratios.iter().map(|&r| r * unit).collect(), prior, sigma2_u, nu, samples_per_slot)
    }

    /// Linear SNR of a unit ratio given the per-level average in dB.
    pub fn unit_snr(ratios: &[T], avg_snr_db: T) -> Result<T> {
        let total: T = ratios.iter().copied().sum();
        if ratios.is_empty() || total <= T::zero() {
            return Err(Error::InvalidMode("power ratios must have a positive sum".into()));
        }
        let avg = T::lit(10.0).powf(avg_snr_db / T::lit(10.0));
        Ok(avg * T::of_usize(ratios.len()) / total)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.snr.len();
        if l == 0 || self.prior.len() != l {
            return Err(Error::InvalidMode(format!(
                "snr has {l} levels but prior has {}",
                self.prior.len()
            )));
        }
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        let total: T = self.prior.iter().copied().sum();
        if (total - T::one()).abs() > tol || self.prior.iter().any(|&p| p < T::zero()) {
            return Err(Error::InvalidMode(format!("prior must be a distribution (sum {total})")));
        }
        if self.snr.iter().any(|&g| !(g >= T::zero()) || !g.is_finite()) {
            return Err(Error::InvalidMode("snr values must be finite and non-negative".into()));
        }
        let zeros = self.snr.iter().filter(|&&g| g == T::zero()).count();
        if zeros != 1 {
            return Err(Error::InvalidMode(format!("exactly one idle (zero snr) level required, found {zeros}")));
        }
        if self.samples_per_slot < MIN_SAMPLES_PER_SLOT {
            return Err(Error::InvalidMode(format!(
                "samples_per_slot {} below {MIN_SAMPLES_PER_SLOT}",
                self.samples_per_slot
            )));
        }
        if !(self.nu >= T::one()) {
            return Err(Error::InvalidMode(format!("mean duration nu = {} must be >= 1", self.nu)));
        }
        if !(self.sigma2_u > T::zero()) {
            return Err(Error::InvalidMode("noise power must be positive".into()));
        }
        Ok(())
    }

    pub fn level_count(&self) -> usize {
        self.snr.len()
    }

    /// Mean of the test statistic under level `l`.
    pub fn stat_mean(&self, l: usize) -> T {
        (self.snr[l] + T::one()) * self.sigma2_u
    }

    /// Variance of the test statistic under level `l`.
    pub fn stat_variance(&self, l: usize) -> T {
        (T::lit(2.0) * self.snr[l] + T::one()) * self.sigma2_u * self.sigma2_u / T::of_usize(self.samples_per_slot)
    }

    pub fn idle_level(&self) -> usize {
        self.snr.iter().position(|&g| g == T::zero()).expect("validated mode has an idle level")
    }

    /// Level indices in ascending order of statistic mean (idle first).
    pub fn sorted_levels(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.level_count()).collect();
        idx.sort_by(|&a, &b| self.snr[a].partial_cmp(&self.snr[b]).expect("finite snr").then(a.cmp(&b)));
        idx
    }

    /// 1-based power-level label: powered levels by ascending power, idle last.
    pub fn paper_label(&self, l: usize) -> usize {
        power_label(&self.sorted_levels(), l)
    }

    /// The generating mixture of the test statistic, components sorted by mean.
    pub fn true_mixture(&self) -> Result<crate::mixture::MixtureModel<T>> {
        let l = self.level_count();
        crate::mixture::MixtureModel::new(
            (0..l).map(|i| self.stat_mean(i)).collect(),
            (0..l).map(|i| self.stat_variance(i).recip()).collect(),
            self.prior.clone(),
        )
    }

    /// Transition matrix between consecutive hypotheses.
    pub fn transition(&self) -> Result<Vec<Vec<T>>> {
        crate::sensing::transition_matrix(&self.prior)
    }
}

/// 1-based label for position `l` given indices sorted by ascending mean.
/// The lowest-mean (idle) entry takes the largest label.
pub(crate) fn power_label(sorted: &[usize], l: usize) -> usize {
    let rank = sorted.iter().position(|&s| s == l).expect("level present");
    if rank == 0 {
        sorted.len()
    } else {
        rank
    }
}

/// One PT hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub start: usize,
    pub level: usize,
    pub duration: usize,
}

/// Ground-truth PT level per slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub level: Vec<usize>,
    pub boundaries: Vec<Hypothesis>,
}

impl LevelTrace {
    pub fn len(&self) -> usize {
        self.level.len()
    }

    pub fn is_empty(&self) -> bool {
        self.level.is_empty()
    }

    /// Durations of hypotheses that were not truncated by the horizon.
    pub fn complete_durations(&self) -> Vec<usize> {
        let n = self.len();
        self.boundaries
            .iter()
            .filter(|h| h.start + h.duration < n)
            .map(|h| h.duration)
            .collect()
    }
}

/// Test statistic per sensing slot with its generating level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StatStream<T> {
    pub x: Vec<T>,
    pub truth: Vec<usize>,
}

impl<T> StatStream<T> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Sequence of power modes taking effect at given slots. The first entry
/// must start at slot 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ModeSchedule<T> {
    pub segments: Vec<(usize, PowerMode<T>)>,
}

impl<T: Real> ModeSchedule<T> {
    pub fn constant(mode: PowerMode<T>) -> Self {
        Self {
            segments: vec![(0, mode)],
        }
    }

    pub fn new(segments: Vec<(usize, PowerMode<T>)>) -> Result<Self> {
        if segments.first().map(|s| s.0) != Some(0) {
            return Err(Error::InvalidArgument("mode schedule must start at slot 0".into()));
        }
        if segments.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidArgument("mode schedule slots must increase".into()));
        }
        for (_, m) in &segments {
            m.validate()?;
        }
        Ok(Self { segments })
    }

    pub fn mode_at(&self, slot: usize) -> &PowerMode<T> {
        let i = self.segments.partition_point(|s| s.0 <= slot);
        &self.segments[i.saturating_sub(1)].1
    }

    pub fn initial(&self) -> &PowerMode<T> {
        &self.segments[0].1
    }

    /// Generates the level trace; each segment starts a fresh hypothesis and
    /// truncates the one in progress at its start slot.
    pub fn gen_levels<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> Result<LevelTrace> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least one slot".into()));
        }
        let mut level = Vec::with_capacity(horizon);
        let mut boundaries = Vec::new();
        for (i, (start, mode)) in self.segments.iter().enumerate() {
            if *start >= horizon {
                break;
            }
            let end = self.segments.get(i + 1).map_or(horizon, |s| s.0.min(horizon));
            append_levels(mode, *start, end, rng, &mut level, &mut boundaries)?;
        }
        Ok(LevelTrace { level, boundaries })
    }

    pub fn gen_statistics<R: Rng + ?Sized>(&self, trace: &LevelTrace, rng: &mut R) -> StatStream<T> {
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let x = trace
            .level
            .iter()
            .enumerate()
            .map(|(slot, &l)| {
                let mode = self.mode_at(slot);
                let z: f64 = unit.sample(rng);
                mode.stat_mean(l) + mode.stat_variance(l).sqrt() * T::lit(z)
            })
            .collect();
        StatStream {
            x,
            truth: trace.level.clone(),
        }
    }
}

fn append_levels<T: Real, R: Rng + ?Sized>(
    mode: &PowerMode<T>,
    start: usize,
    end: usize,
    rng: &mut R,
    level: &mut Vec<usize>,
    boundaries: &mut Vec<Hypothesis>,
) -> Result<()> {
    let l_count = mode.level_count();
    if l_count < 2 {
        return Err(Error::InvalidMode("at least two levels are needed to define transitions".into()));
    }
    let c = mode.transition()?;
    let prior: Vec<f64> = mode.prior.iter().map(|p| p.as_f64()).collect();
    let mut current = sample::categorical(rng, &prior);
    let mut slot = start;
    while slot < end {
        let d = sample::poisson_at_least_one(rng, mode.nu.as_f64()) as usize;
        let d = d.min(end - slot);
        boundaries.push(Hypothesis {
            start: slot,
            level: current,
            duration: d,
        });
        level.extend(std::iter::repeat(current).take(d));
        slot += d;
        let row: Vec<f64> = c[current].iter().map(|v| v.as_f64()).collect();
        current = sample::categorical(rng, &row);
    }
    Ok(())
}

/// Level trace over `horizon` slots with Poisson(ν) hypothesis durations
/// (zero draws rejected) and zero-diagonal transitions.
pub fn gen_level_sequence<T: Real, R: Rng + ?Sized>(mode: &PowerMode<T>, horizon: usize, rng: &mut R) -> Result<LevelTrace> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least one slot".into()));
    }
    let mut level = Vec::with_capacity(horizon);
    let mut boundaries = Vec::new();
    append_levels(mode, 0, horizon, rng, &mut level, &mut boundaries)?;
    Ok(LevelTrace { level, boundaries })
}

/// Gaussian-shortcut statistics: `X ~ Normal((γ+1)σ², (2γ+1)σ⁴/Ns)` per slot.
pub fn gen_test_statistics<T: Real, R: Rng + ?Sized>(trace: &LevelTrace, mode: &PowerMode<T>, rng: &mut R) -> StatStream<T> {
    ModeSchedule::constant(mode.clone()).gen_statistics(trace, rng)
}

/// Raw-sample synthesis settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawSampling {
    /// Overrides the mode's samples per slot when set.
    pub samples_per_slot: Option<usize>,
    /// Upper bound on samples per slot.
    pub cap: usize,
}

impl Default for RawSampling {
    fn default() -> Self {
        Self {
            samples_per_slot: None,
            cap: 1_000_000,
        }
    }
}

/// Statistics synthesised from complex QPSK symbols plus complex Gaussian
/// noise, averaging `|R|²` over the slot's samples.
pub fn gen_raw_samples<T: Real, R: Rng + ?Sized>(
    trace: &LevelTrace,
    mode: &PowerMode<T>,
    cfg: RawSampling,
    rng: &mut R,
) -> Result<StatStream<T>> {
    let ns = cfg.samples_per_slot.unwrap_or(mode.samples_per_slot);
    if ns == 0 || ns > cfg.cap {
        return Err(Error::InvalidArgument(format!("samples per slot {ns} outside (0, {}]", cfg.cap)));
    }
    let sigma2 = mode.sigma2_u.as_f64();
    let noise = Normal::new(0.0, (sigma2 / 2.0).sqrt()).expect("noise sd");
    let phases = [
        std::f64::consts::FRAC_PI_4,
        3.0 * std::f64::consts::FRAC_PI_4,
        5.0 * std::f64::consts::FRAC_PI_4,
        7.0 * std::f64::consts::FRAC_PI_4,
    ];
    let x = trace
        .level
        .iter()
        .map(|&l| {
            let amp = (mode.snr[l].as_f64() * sigma2).sqrt();
            let mut acc = 0.0;
            for _ in 0..ns {
                let ph = phases[rng.gen_range(0..4)];
                let re = amp * ph.cos() + noise.sample(rng);
                let im = amp * ph.sin() + noise.sample(rng);
                acc += re * re + im * im;
            }
            T::lit(acc / ns as f64)
        })
        .collect();
    Ok(StatStream {
        x,
        truth: trace.level.clone(),
    })
}

/// Empirical moments of one level's statistics against the Gaussian shortcut.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelMoments {
    pub level: usize,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub expected_mean: f64,
    pub expected_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCheck {
    pub levels: Vec<LevelMoments>,
    pub consistent: bool,
}

/// Compares per-level moments and skewness of a stream against the Gaussian
/// shortcut computed with `samples_per_slot` samples. Moments must agree
/// within 5% and the skewness must be compatible with zero.
pub fn validate_gaussian_shortcut<T: Real>(stream: &StatStream<T>, mode: &PowerMode<T>, samples_per_slot: usize) -> GaussianCheck {
    let sigma2 = mode.sigma2_u.as_f64();
    let mut levels = Vec::new();
    let mut consistent = true;
    for l in 0..mode.level_count() {
        let xs: Vec<f64> = stream
            .x
            .iter()
            .zip(&stream.truth)
            .filter(|(_, &t)| t == l)
            .map(|(x, _)| x.as_f64())
            .collect();
        if xs.len() < 3 {
            continue;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        let skewness = m3 / m2.powf(1.5);
        let variance = m2 * n / (n - 1.0);
        let g = mode.snr[l].as_f64();
        let expected_mean = (g + 1.0) * sigma2;
        let expected_variance = (2.0 * g + 1.0) * sigma2 * sigma2 / samples_per_slot as f64;
        let skew_band = 0.5 + 5.0 * (6.0 / n).sqrt();
        let ok = ((mean - expected_mean) / expected_mean).abs() < 0.05
            && ((variance - expected_variance) / expected_variance).abs() < 0.05
            && skewness.abs() < skew_band;
        consistent &= ok;
        levels.push(LevelMoments {
            level: l,
            count: xs.len(),
            mean,
            variance,
            skewness,
            expected_mean,
            expected_variance,
        });
    }
    GaussianCheck { levels, consistent }
}
