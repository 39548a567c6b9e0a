//! Decision inputs derived from a learned mixture: MAP classifier, confusion
//! matrix `H`, transition matrix `C`, duration estimate and ACK table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::MixtureModel;
use crate::num::Real;
use crate::scenario::PowerMode;
use crate::special::normal_interval_mass;

pub use crate::special::{survival, Survival};

/// MAP component for a statistic; ties go to the lower index.
pub fn classify<T: Real>(x: T, model: &MixtureModel<T>) -> usize {
    let mut best = 0;
    let mut best_v = model.ln_weighted_density(0, x);
    for k in 1..model.k() {
        let v = model.ln_weighted_density(k, x);
        if v > best_v {
            best = k;
            best_v = v;
        }
    }
    best
}

/// Half-open decision interval `(lo, hi]` assigned to component `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DecisionInterval<T> {
    pub lo: T,
    pub hi: T,
    pub k: usize,
}

/// Real roots of `a u² + b u + c = 0`, with the linear case handled.
fn quadratic_roots<T: Real>(a: T, b: T, c: T) -> Vec<T> {
    let two = T::lit(2.0);
    if a == T::zero() {
        return if b == T::zero() { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - T::lit(4.0) * a * c;
    if disc < T::zero() {
        return vec![];
    }
    let sq = disc.sqrt();
    let q = -(b + sq.copysign(b)) / two;
    let mut out = Vec::with_capacity(2);
    if q != T::zero() {
        out.push(c / q);
    }
    let r = q / a;
    if r.is_finite() {
        out.push(r);
    }
    out
}

/// Partition of the real line into MAP regions. Boundaries are the roots of
/// every pairwise equal-posterior equation; labels are read at midpoints and
/// equal neighbours merged.
pub fn decision_intervals<T: Real>(model: &MixtureModel<T>) -> Vec<DecisionInterval<T>> {
    let half = T::lit(0.5);
    let k = model.k();
    let mut cuts: Vec<T> = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let (si, sj) = (model.precision[i], model.precision[j]);
            let m = half * (model.mu[i] + model.mu[j]);
            let (di, dj) = (model.mu[i] - m, model.mu[j] - m);
            let a = -half * (si - sj);
            let b = si * di - sj * dj;
            let c = -half * (si * di * di - sj * dj * dj) + (model.weight[i].ln() - model.weight[j].ln())
                + half * (si.ln() - sj.ln());
            for u in quadratic_roots(a, b, c) {
                if (u + m).is_finite() {
                    cuts.push(u + m);
                }
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut"));
    cuts.dedup();
    if cuts.is_empty() {
        return vec![DecisionInterval {
            lo: T::neg_infinity(),
            hi: T::infinity(),
            k: classify(model.mu[0], model),
        }];
    }
    let span = cuts[cuts.len() - 1] - cuts[0] + T::one();
    let mut out: Vec<DecisionInterval<T>> = Vec::with_capacity(cuts.len() + 1);
    let push = |out: &mut Vec<DecisionInterval<T>>, lo: T, hi: T, probe: T| {
        let label = classify(probe, model);
        match out.last_mut() {
            Some(last) if last.k == label => last.hi = hi,
            _ => out.push(DecisionInterval { lo, hi, k: label }),
        }
    };
    push(&mut out, T::neg_infinity(), cuts[0], cuts[0] - span);
    for w in cuts.windows(2) {
        push(&mut out, w[0], w[1], half * (w[0] + w[1]));
    }
    push(&mut out, cuts[cuts.len() - 1], T::infinity(), cuts[cuts.len() - 1] + span);
    out
}

/// `H[k][j] = Pr{classify(X) = j | X ~ N(μ_k, 1/S_k)}`, from Gaussian CDF
/// differences over the decision intervals.
pub fn estimate_confusion<T: Real>(model: &MixtureModel<T>) -> Result<Vec<Vec<T>>> {
    let iv = decision_intervals(model);
    let k = model.k();
    let mut h = vec![vec![T::zero(); k]; k];
    for (row, hk) in h.iter_mut().enumerate() {
        for d in &iv {
            hk[d.k] = hk[d.k] + normal_interval_mass(d.lo, d.hi, model.mu[row], model.precision[row]);
        }
        let total: T = hk.iter().copied().sum();
        if !total.is_finite() || (total - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::Numerical(format!("confusion row {row} sums to {total}")));
        }
    }
    Ok(h)
}

/// `C[k][j] = π_j / (1 - π_k)` off the diagonal, zero on it.
pub fn transition_matrix<T: Real>(pi: &[T]) -> Result<Vec<Vec<T>>> {
    if pi.len() < 2 {
        return Err(Error::Degenerate("transition matrix needs at least two levels".into()));
    }
    if pi.iter().any(|&p| !(p < T::one()) || p < T::zero()) {
        return Err(Error::Degenerate("a level with probability one admits no transition".into()));
    }
    Ok((0..pi.len())
        .map(|k| {
            (0..pi.len())
                .map(|j| if j == k { T::zero() } else { pi[j] / (T::one() - pi[k]) })
                .collect()
        })
        .collect())
}

/// Lengths of maximal constant runs, in order.
pub fn run_lengths(labels: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let mut j = i + 1;
        while j < labels.len() && labels[j] == labels[i] {
            j += 1;
        }
        out.push(j - i);
        i = j;
    }
    out
}

/// Mean length of the interior runs; the first and last runs are censored
/// and dropped.
pub fn estimate_duration_mean<T: Real>(labels: &[usize]) -> Result<T> {
    let runs = run_lengths(labels);
    if runs.len() < 4 {
        return Err(Error::Degenerate(format!(
            "need at least two interior runs to estimate the duration, got {}",
            runs.len().saturating_sub(2)
        )));
    }
    let interior = &runs[1..runs.len() - 1];
    Ok(T::of_usize(interior.iter().sum()) / T::of_usize(interior.len()))
}

/// Absorbs runs shorter than `min_run` into the preceding run (or the next
/// one at the start). Isolated misclassifications otherwise split true runs.
pub fn merge_short_runs(labels: &[usize], min_run: usize) -> Vec<usize> {
    if min_run <= 1 || labels.is_empty() {
        return labels.to_vec();
    }
    let runs = run_lengths(labels);
    let mut spans = Vec::with_capacity(runs.len());
    let mut start = 0;
    for r in runs {
        spans.push((start, r, labels[start]));
        start += r;
    }
    let first_long = spans.iter().position(|s| s.1 >= min_run);
    let Some(first_long) = first_long else {
        return labels.to_vec();
    };
    let mut out = labels.to_vec();
    let mut current = spans[first_long].2;
    for (idx, &(s, len, lab)) in spans.iter().enumerate() {
        if idx < first_long {
            out[s..s + len].fill(spans[first_long].2);
        } else if len >= min_run {
            current = lab;
        } else {
            out[s..s + len].fill(current);
        }
    }
    out
}

/// `Σ_l H[l][l] · prior[l]`.
pub fn p_c<T: Real>(h: &[Vec<T>], prior: &[T]) -> Result<T> {
    if h.len() != prior.len() || h.iter().any(|r| r.len() != prior.len()) {
        return Err(Error::InvalidArgument("confusion matrix and prior shapes differ".into()));
    }
    Ok(h.iter().zip(prior).enumerate().map(|(l, (row, &p))| row[l] * p).sum())
}

/// True level whose statistic mean is nearest each learned component.
pub fn map_to_truth<T: Real>(model: &MixtureModel<T>, mode: &PowerMode<T>) -> Vec<usize> {
    model
        .mu
        .iter()
        .map(|&m| {
            (0..mode.level_count())
                .min_by(|&a, &b| {
                    let da = (mode.stat_mean(a) - m).abs();
                    let db = (mode.stat_mean(b) - m).abs();
                    da.partial_cmp(&db).expect("finite means")
                })
                .expect("at least one level")
        })
        .collect()
}

/// Probability of correct level prediction against the generating mode,
/// whatever the learned component count: a draw from true level `l` counts
/// as correct when its MAP component maps back to `l`.
pub fn p_c_against_truth<T: Real>(model: &MixtureModel<T>, mode: &PowerMode<T>) -> T {
    let iv = decision_intervals(model);
    let map = map_to_truth(model, mode);
    (0..mode.level_count())
        .map(|l| {
            let (m, prec) = (mode.stat_mean(l), mode.stat_variance(l).recip());
            let hit: T = iv
                .iter()
                .filter(|d| map[d.k] == l)
                .map(|d| normal_interval_mass(d.lo, d.hi, m, prec))
                .sum();
            mode.prior[l] * hit
        })
        .sum()
}

/// Default ACK table in internal (sorted) order: `ack[k][j] = 1` iff the
/// power label of `k` exceeds that of `j`, with the idle component (index 0)
/// carrying label `K`.
pub fn default_ack<T: Real>(k: usize) -> Vec<Vec<T>> {
    let label = |i: usize| if i == 0 { k } else { i };
    (0..k)
        .map(|a| (0..k).map(|b| if label(a) > label(b) { T::one() } else { T::zero() }).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SenseModel<T> {
    pub h: Vec<Vec<T>>,
    pub c: Vec<Vec<T>>,
    pub nu_hat: T,
    pub ack: Vec<Vec<T>>,
}

impl<T: Real> SenseModel<T> {
    pub fn from_mixture(model: &MixtureModel<T>, nu_hat: T) -> Result<Self> {
        if model.k() < 2 {
            return Err(Error::Degenerate("a single learned level leaves nothing to decide".into()));
        }
        let s = Self {
            h: estimate_confusion(model)?,
            c: transition_matrix(&model.weight)?,
            nu_hat,
            ack: default_ack(model.k()),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn k(&self) -> usize {
        self.h.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        let tol = T::lit(1e-9);
        for (name, m) in [("H", &self.h), ("C", &self.c), ("ack", &self.ack)] {
            if m.len() != k || m.iter().any(|r| r.len() != k) {
                return Err(Error::InvalidArgument(format!("{name} is not {k}x{k}")));
            }
        }
        for r in self.h.iter().chain(&self.c) {
            let s: T = r.iter().copied().sum();
            if (s - T::one()).abs() > tol || r.iter().any(|&v| v < T::zero()) {
                return Err(Error::Degenerate("matrix rows must be probability vectors".into()));
            }
        }
        if (0..k).any(|i| self.c[i][i] != T::zero()) {
            return Err(Error::Degenerate("transition matrix diagonal must be zero".into()));
        }
        if self.ack.iter().flatten().any(|&a| a < T::zero() || a > T::one()) {
            return Err(Error::InvalidArgument("ACK probabilities must lie in [0, 1]".into()));
        }
        if !(self.nu_hat > T::zero()) {
            return Err(Error::Degenerate("duration estimate must be positive".into()));
        }
        // components the classifier cannot tell apart
        if (0..k).any(|i| self.h[i][i] < T::lit(0.5) / T::of_usize(k)) {
            return Err(Error::Degenerate("confusion matrix has a level that is rarely identified".into()));
        }
        Ok(())
    }

    /// `Σ_j C[k][j] ack[k][j]`: the chance a departed PT still lets the block through.
    pub fn ack_after_departure(&self, k: usize) -> T {
        self.c[k].iter().zip(&self.ack[k]).map(|(&c, &a)| c * a).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(w1: f64) -> MixtureModel<f64> {
        MixtureModel::new(vec![0.0, 4.0], vec![1.0, 1.0], vec![w1, 1.0 - w1]).unwrap()
    }

    #[test]
    fn symmetric_boundary_at_midpoint() {
        let m = two(0.5);
        assert_eq!(classify(1.99, &m), 0);
        assert_eq!(classify(2.01, &m), 1);
        let iv = decision_intervals(&m);
        assert_eq!(iv.len(), 2);
        assert!((iv[0].hi - 2.0).abs() < 1e-12);
    }

    #[test]
    fn weight_ratio_shifts_boundary() {
        // π1/π2 = e^8 moves the boundary by 8/4 = 2
        let e8 = 8f64.exp();
        let m = two(e8 / (1.0 + e8));
        let iv = decision_intervals(&m);
        assert!((iv[0].hi - 4.0).abs() < 1e-9, "{:?}", iv);
        assert_eq!(classify(3.99, &m), 0);
        assert_eq!(classify(4.01, &m), 1);
    }

    #[test]
    fn unequal_precision_gives_three_regions() {
        let m = MixtureModel::new(vec![0.0, 1.0], vec![1.0, 100.0], vec![0.5, 0.5]).unwrap();
        let iv = decision_intervals(&m);
        assert_eq!(iv.len(), 3);
        assert_eq!(iv[0].k, 0);
        assert_eq!(iv[1].k, 1);
        assert_eq!(iv[2].k, 0);
        let h = estimate_confusion(&m).unwrap();
        for r in &h {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn far_apart_components_identity() {
        let m = MixtureModel::new(vec![0.0, 50.0, 100.0], vec![1.0; 3], vec![0.2, 0.3, 0.5]).unwrap();
        let h = estimate_confusion(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(h[i][j] < 1e-10);
                }
            }
        }
    }

    #[test]
    fn transition_examples() {
        let c = transition_matrix(&[0.25_f64; 4]).unwrap();
        for (k, row) in c.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if j == k { 0.0 } else { 1.0 / 3.0 });
            }
        }
        let c = transition_matrix(&[0.5_f64, 0.25, 0.25]).unwrap();
        assert_eq!(c[0], vec![0.0, 0.5, 0.5]);
        assert!(transition_matrix(&[1.0_f64, 0.0]).is_err());
    }

    #[test]
    fn duration_examples() {
        let l = |s: &str| s.bytes().map(|b| (b - b'0') as usize).collect::<Vec<_>>();
        assert_eq!(estimate_duration_mean::<f64>(&l("1112221112")).unwrap(), 3.0);
        assert_eq!(estimate_duration_mean::<f64>(&l("121212")).unwrap(), 1.0);
        assert!(estimate_duration_mean::<f64>(&l("11122")).is_err());
    }

    #[test]
    fn merge_absorbs_blips() {
        let l = vec![1, 1, 1, 2, 1, 1, 3, 3, 3, 3, 1, 3, 3];
        assert_eq!(merge_short_runs(&l, 2), vec![1, 1, 1, 1, 1, 1, 3, 3, 3, 3, 3, 3, 3]);
        assert_eq!(merge_short_runs(&l, 1), l);
    }

    #[test]
    fn p_c_examples() {
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(p_c(&id, &[0.3, 0.7]).unwrap(), 1.0);
        let u = vec![vec![0.25_f64; 4]; 4];
        assert!((p_c(&u, &[0.25; 4]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ack_table_follows_labels() {
        let a: Vec<Vec<f64>> = default_ack(3);
        // labels: idx0 -> 3, idx1 -> 1, idx2 -> 2
        assert_eq!(a[0], vec![0.0, 1.0, 1.0]);
        assert_eq!(a[1], vec![0.0, 0.0, 0.0]);
        assert_eq!(a[2], vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn sense_model_json_roundtrip() {
        let m = MixtureModel::new(vec![1.0, 2.0, 3.0], vec![100.0; 3], vec![0.3, 0.3, 0.4]).unwrap();
        let s = SenseModel::from_mixture(&m, 40.0).unwrap();
        let back = SenseModel::<f64>::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(SenseModel::from_mixture(&MixtureModel::new(vec![1.0], vec![1.0], vec![1.0]).unwrap(), 5.0).is_err());
    }
}
