//! Conditionally conjugate DP Gaussian mixture, Gibbs sampling with
//! auxiliary components for the indicators.
//!
//! Gamma draws below use the mean parameterisation of [`gamma_mean`]:
//! `G(a, b)` has shape `a/2` and mean `b`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::beta::{BetaConditional, BetaSampler};
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;
use crate::num::{normal_ln_pdf, Real};
use crate::sample::{categorical_log, gamma_mean, normal};
use crate::special::ln_gamma;

/// Empirical moments of the observations, fixed for the life of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HyperPriors<T> {
    pub mu_y: T,
    /// Empirical precision `1 / var(X)`.
    pub s_y: T,
}

impl<T: Real> HyperPriors<T> {
    pub fn from_data(x: &[T]) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Degenerate("no observations".into()));
        }
        let n = T::of_usize(x.len());
        let mu_y = x.iter().copied().sum::<T>() / n;
        let var = x.iter().map(|&v| (v - mu_y) * (v - mu_y)).sum::<T>() / n;
        if !(var > T::zero()) || !var.is_finite() {
            return Err(Error::Degenerate("observations have zero empirical variance".into()));
        }
        Ok(Self { mu_y, s_y: var.recip() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HyperParams<T> {
    pub lambda: T,
    pub r: T,
    pub w: T,
    pub beta: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Component<T> {
    pub mu: T,
    pub s: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsOptions {
    pub iters: usize,
    pub burnin: usize,
    pub alpha: f64,
    pub k0: usize,
    pub beta_sampler: BetaSampler,
    /// Keep per-observation indicators in every snapshot.
    pub keep_indicators: bool,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        Self {
            iters: 3000,
            burnin: 1000,
            alpha: 0.2,
            k0: 3,
            beta_sampler: BetaSampler::Ars,
            keep_indicators: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GibbsState<T> {
    pub z: Vec<usize>,
    pub comp: Vec<Component<T>>,
    pub counts: Vec<usize>,
    pub hyper: HyperParams<T>,
    pub priors: HyperPriors<T>,
    pub alpha: T,
    pub k0: usize,
    pub beta_sampler: BetaSampler,
}

/// Post-burn-in record of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Snapshot<T> {
    pub iteration: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub mu: Vec<T>,
    pub s: Vec<T>,
    pub counts: Vec<usize>,
    pub hyper: HyperParams<T>,
    /// `Σ ln N(X_n | θ_{z_n}) + ln CRP(z | α)`.
    pub joint_log_likelihood: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Chain<T> {
    pub n_obs: usize,
    pub snapshots: Vec<Snapshot<T>>,
}

impl<T: Real> Chain<T> {
    /// Writes one JSON object per snapshot.
    pub fn write_jsonl<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for s in &self.snapshots {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: std::io::BufRead>(input: R, n_obs: usize) -> Result<Self> {
        let mut snapshots = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            snapshots.push(serde_json::from_str(&line)?);
        }
        Ok(Self { n_obs, snapshots })
    }

    pub fn k_trace(&self) -> Vec<usize> {
        self.snapshots.iter().map(|s| s.k).collect()
    }
}

/// Single component holding everything, hyperparameters drawn from the vague
/// priors.
pub fn init_state<T: Real, R: Rng + ?Sized>(x: &[T], alpha: f64, k0: usize, rng: &mut R) -> Result<GibbsState<T>> {
    if x.len() < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 observations, got {}", x.len())));
    }
    if k0 == 0 {
        return Err(Error::InvalidArgument("k0 must be at least 1".into()));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be finite and non-negative, got {alpha}")));
    }
    let priors = HyperPriors::from_data(x)?;
    let one = T::one();
    let hyper = HyperParams {
        lambda: normal(rng, priors.mu_y, priors.s_y),
        r: gamma_mean(rng, one, priors.s_y),
        w: gamma_mean(rng, one, priors.s_y.recip()),
        beta: gamma_mean(rng, one, one).recip(),
    };
    Ok(GibbsState {
        z: vec![0; x.len()],
        comp: vec![Component {
            mu: priors.mu_y,
            s: priors.s_y,
        }],
        counts: vec![x.len()],
        hyper,
        priors,
        alpha: T::lit(alpha),
        k0,
        beta_sampler: BetaSampler::Ars,
    })
}

impl<T: Real> GibbsState<T> {
    pub fn k(&self) -> usize {
        self.comp.len()
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Draw from the conditional prior of a fresh component.
    pub fn draw_prior_component<R: Rng + ?Sized>(&self, rng: &mut R) -> Component<T> {
        let h = &self.hyper;
        Component {
            mu: normal(rng, h.lambda, h.r),
            s: gamma_mean(rng, h.beta, h.w.recip()),
        }
    }

    /// Redraws every `μ_k` then every `S_k` from their conjugate conditionals.
    pub fn sample_component_params<R: Rng + ?Sized>(&mut self, x: &[T], rng: &mut R) {
        let k = self.k();
        let mut sum = vec![T::zero(); k];
        for (&xn, &zn) in x.iter().zip(&self.z) {
            sum[zn] = sum[zn] + xn;
        }
        let h = self.hyper;
        for j in 0..k {
            let s = self.comp[j].s;
            let prec = T::of_usize(self.counts[j]) * s + h.r;
            let mean = (s * sum[j] + h.r * h.lambda) / prec;
            self.comp[j].mu = normal(rng, mean, prec);
        }
        let mut ss = vec![T::zero(); k];
        for (&xn, &zn) in x.iter().zip(&self.z) {
            let d = xn - self.comp[zn].mu;
            ss[zn] = ss[zn] + d * d;
        }
        for j in 0..k {
            let a = h.beta + T::of_usize(self.counts[j]);
            let mean = a / (h.w * h.beta + ss[j]);
            self.comp[j].s = gamma_mean(rng, a, mean);
        }
    }

    /// Redraws `λ`, `R`, `W` and `β` in that order.
    pub fn sample_hyperparams<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let k = T::of_usize(self.k());
        let p = self.priors;
        let sum_mu: T = self.comp.iter().map(|c| c.mu).sum();
        let prec = p.s_y + k * self.hyper.r;
        self.hyper.lambda = normal(rng, (p.mu_y * p.s_y + self.hyper.r * sum_mu) / prec, prec);

        let lambda = self.hyper.lambda;
        let ss: T = self.comp.iter().map(|c| (c.mu - lambda) * (c.mu - lambda)).sum();
        let a = k + T::one();
        // prior scale enters as the data variance 1/S_y
        self.hyper.r = gamma_mean(rng, a, a / (p.s_y.recip() + ss));

        let beta = self.hyper.beta;
        let sum_s: T = self.comp.iter().map(|c| c.s).sum();
        let a = k * beta + T::one();
        self.hyper.w = gamma_mean(rng, a, a / (p.s_y + beta * sum_s));

        let s: Vec<f64> = self.comp.iter().map(|c| c.s.as_f64()).collect();
        let cond = BetaConditional::new(&s, self.hyper.w.as_f64());
        let b = cond.sample(self.beta_sampler, beta.as_f64(), rng);
        if b.is_finite() && b > 0.0 {
            self.hyper.beta = T::lit(b);
        }
    }

    /// One pass of indicator updates over all observations in order.
    pub fn sample_indicators<R: Rng + ?Sized>(&mut self, x: &[T], rng: &mut R) {
        let mut aux = Vec::with_capacity(self.k0);
        let mut lw = Vec::with_capacity(self.k() + self.k0 + 4);
        for n in 0..x.len() {
            self.resample_one(x[n], n, &mut aux, &mut lw, rng);
        }
    }

    fn resample_one<R: Rng + ?Sized>(
        &mut self,
        xn: T,
        n: usize,
        aux: &mut Vec<Component<T>>,
        lw: &mut Vec<T>,
        rng: &mut R,
    ) {
        let k = self.z[n];
        self.counts[k] -= 1;
        let singleton = self.counts[k] == 0;
        aux.clear();
        if singleton {
            aux.push(self.comp[k]);
        }
        while aux.len() < self.k0 {
            aux.push(self.draw_prior_component(rng));
        }
        lw.clear();
        for (c, &cnt) in self.comp.iter().zip(&self.counts) {
            lw.push(if cnt == 0 {
                T::neg_infinity()
            } else {
                T::of_usize(cnt).ln() + normal_ln_pdf(xn, c.mu, c.s)
            });
        }
        let ln_aux = (self.alpha / T::of_usize(self.k0)).ln();
        for c in aux.iter() {
            lw.push(ln_aux + normal_ln_pdf(xn, c.mu, c.s));
        }
        let choice = categorical_log(rng, lw);
        let kk = self.comp.len();
        if choice < kk {
            self.z[n] = choice;
            self.counts[choice] += 1;
            if singleton {
                self.remove_component(k);
            }
        } else {
            let c = aux[choice - kk];
            if singleton {
                self.comp[k] = c;
                self.counts[k] = 1;
                self.z[n] = k;
            } else {
                self.comp.push(c);
                self.counts.push(1);
                self.z[n] = kk;
            }
        }
    }

    fn remove_component(&mut self, k: usize) {
        let last = self.comp.len() - 1;
        self.comp.swap_remove(k);
        self.counts.swap_remove(k);
        if k != last {
            for zi in self.z.iter_mut() {
                if *zi == last {
                    *zi = k;
                }
            }
        }
    }

    /// Component parameters, hyperparameters, then indicators.
    pub fn sweep<R: Rng + ?Sized>(&mut self, x: &[T], rng: &mut R) {
        self.sample_component_params(x, rng);
        self.sample_hyperparams(rng);
        self.sample_indicators(x, rng);
    }

    /// Drops the oldest observation (index 0) from the state.
    pub fn pop_front(&mut self) {
        let k = self.z.remove(0);
        self.counts[k] -= 1;
        if self.counts[k] == 0 && self.comp.len() > 1 {
            self.remove_component(k);
        }
    }

    /// Appends an observation and draws its indicator. `x` must already
    /// contain it as the last element.
    pub fn push_back<R: Rng + ?Sized>(&mut self, x: &[T], rng: &mut R) {
        let n = x.len() - 1;
        debug_assert_eq!(self.z.len(), n);
        // temporarily attach to component 0, then resample from the full conditional
        self.z.push(0);
        self.counts[0] += 1;
        let mut aux = Vec::with_capacity(self.k0);
        let mut lw = Vec::new();
        self.resample_one(x[n], n, &mut aux, &mut lw, rng);
    }

    pub fn joint_log_likelihood(&self, x: &[T]) -> T {
        let data: T = x
            .iter()
            .zip(&self.z)
            .map(|(&xn, &zn)| normal_ln_pdf(xn, self.comp[zn].mu, self.comp[zn].s))
            .sum();
        data + crp_ln_prob(&self.counts, self.alpha)
    }

    pub fn check_consistency(&self) -> Result<()> {
        let total: usize = self.counts.iter().sum();
        if total != self.z.len() || self.counts.iter().any(|&c| c == 0) || self.counts.len() != self.comp.len() {
            return Err(Error::Numerical("indicator bookkeeping out of sync".into()));
        }
        let mut recount = vec![0usize; self.comp.len()];
        for &zn in &self.z {
            recount[zn] += 1;
        }
        if recount != self.counts {
            return Err(Error::Numerical("counts disagree with indicators".into()));
        }
        if self.comp.iter().any(|c| !(c.s > T::zero()) || !c.mu.is_finite()) {
            return Err(Error::Numerical("non-positive component precision".into()));
        }
        Ok(())
    }

    pub fn snapshot(&self, iteration: usize, x: &[T], keep_indicators: bool) -> Snapshot<T> {
        Snapshot {
            iteration,
            k: self.k(),
            mu: self.comp.iter().map(|c| c.mu).collect(),
            s: self.comp.iter().map(|c| c.s).collect(),
            counts: self.counts.clone(),
            hyper: self.hyper,
            joint_log_likelihood: self.joint_log_likelihood(x),
            z: keep_indicators.then(|| self.z.iter().map(|&v| v as u32).collect()),
        }
    }
}

/// `ln` of the Chinese-restaurant-process probability of a partition with
/// the given block sizes.
pub fn crp_ln_prob<T: Real>(counts: &[usize], alpha: T) -> T {
    let n: usize = counts.iter().sum();
    let k = T::of_usize(counts.len());
    let blocks: T = counts.iter().map(|&c| ln_gamma(T::of_usize(c))).sum();
    if alpha == T::zero() {
        return if counts.len() == 1 { T::zero() } else { T::neg_infinity() };
    }
    k * alpha.ln() + blocks + ln_gamma(alpha) - ln_gamma(alpha + T::of_usize(n))
}

/// Runs `opts.iters` sweeps and records the ones after burn-in.
pub fn run_gibbs<T: Real, R: Rng + ?Sized>(x: &[T], opts: &GibbsOptions, rng: &mut R) -> Result<Chain<T>> {
    run_gibbs_state(x, opts, rng).map(|(chain, _)| chain)
}

/// As [`run_gibbs`], also returning the final state for warm starts.
pub fn run_gibbs_state<T: Real, R: Rng + ?Sized>(x: &[T], opts: &GibbsOptions, rng: &mut R) -> Result<(Chain<T>, GibbsState<T>)> {
    if opts.iters <= opts.burnin {
        return Err(Error::InvalidArgument(format!(
            "iters ({}) must exceed burnin ({})",
            opts.iters, opts.burnin
        )));
    }
    let mut state = init_state(x, opts.alpha, opts.k0, rng)?;
    state.beta_sampler = opts.beta_sampler;
    let mut snapshots = Vec::with_capacity(opts.iters - opts.burnin);
    for it in 0..opts.iters {
        state.sweep(x, rng);
        if it >= opts.burnin {
            snapshots.push(state.snapshot(it, x, opts.keep_indicators));
        }
    }
    let chain = Chain {
        n_obs: x.len(),
        snapshots,
    };
    Ok((chain, state))
}

/// How a point estimate is read off a chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    /// Components holding less than this share of the observations are not
    /// counted towards `K` and are left out of the estimate.
    pub min_share: f64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self { min_share: 0.02 }
    }
}

impl SummaryOptions {
    /// Counts every occupied component.
    pub const ALL: Self = Self { min_share: 0.0 };

    fn min_count(&self, n: usize) -> usize {
        ((self.min_share * n as f64).ceil() as usize).max(1)
    }
}

/// Indices of the components of `s` that pass the occupancy floor; the
/// largest component always passes.
pub fn retained_components<T: Real>(s: &Snapshot<T>, opts: &SummaryOptions) -> Vec<usize> {
    let n: usize = s.counts.iter().sum();
    let floor = opts.min_count(n);
    let mut keep: Vec<usize> = (0..s.k).filter(|&i| s.counts[i] >= floor).collect();
    if keep.is_empty() {
        let big = (0..s.k).max_by_key(|&i| (s.counts[i], std::cmp::Reverse(i))).expect("non-empty snapshot");
        keep.push(big);
    }
    keep
}

/// Point estimate from a chain with the default [`SummaryOptions`].
pub fn summarize<T: Real>(chain: &Chain<T>) -> Result<MixtureModel<T>> {
    summarize_with(chain, &SummaryOptions::default())
}

/// The modal component count (smaller count on ties), then the highest joint
/// log-likelihood snapshot with that count (earliest on ties). Weights are the
/// retained components' occupancy fractions.
pub fn summarize_with<T: Real>(chain: &Chain<T>, opts: &SummaryOptions) -> Result<MixtureModel<T>> {
    let snap = select_snapshot(chain, opts)?;
    let keep = retained_components(snap, opts);
    let n = T::of_usize(keep.iter().map(|&i| snap.counts[i]).sum());
    MixtureModel::new(
        keep.iter().map(|&i| snap.mu[i]).collect(),
        keep.iter().map(|&i| snap.s[i]).collect(),
        keep.iter().map(|&i| T::of_usize(snap.counts[i]) / n).collect(),
    )
}

/// Effective component count of each snapshot.
pub fn effective_k_trace<T: Real>(chain: &Chain<T>, opts: &SummaryOptions) -> Vec<usize> {
    chain.snapshots.iter().map(|s| retained_components(s, opts).len()).collect()
}

pub fn select_snapshot<'a, T: Real>(chain: &'a Chain<T>, opts: &SummaryOptions) -> Result<&'a Snapshot<T>> {
    if chain.snapshots.is_empty() {
        return Err(Error::InvalidArgument("empty chain".into()));
    }
    let ks = effective_k_trace(chain, opts);
    let k_mode = modal_k(&ks);
    let mut best: Option<&Snapshot<T>> = None;
    for (s, _) in chain.snapshots.iter().zip(&ks).filter(|(_, &k)| k == k_mode) {
        match best {
            Some(b) if !(s.joint_log_likelihood > b.joint_log_likelihood) => {}
            _ => best = Some(s),
        }
    }
    Ok(best.expect("modal K present"))
}

/// Most frequent value, smaller value on ties.
pub fn modal_k(ks: &[usize]) -> usize {
    let max = ks.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0usize; max + 1];
    for &k in ks {
        hist[k] += 1;
    }
    let mut best = 0;
    for (k, &c) in hist.iter().enumerate() {
        if c > hist[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data(means: &[f64], sd: f64, per: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = Vec::new();
        for &m in means {
            for _ in 0..per {
                v.push(normal(&mut rng, m, 1.0 / (sd * sd)));
            }
        }
        v
    }

    #[test]
    fn init_rejects_constant_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(init_state(&[2.0_f64; 20], 1.0, 3, &mut rng), Err(Error::Degenerate(_))));
        assert!(init_state(&[1.0_f64, 2.0], 1.0, 3, &mut rng).is_err());
    }

    #[test]
    fn init_contract() {
        let x = data(&[1.0, 2.0], 0.1, 30, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = init_state(&x, 1.0, 3, &mut rng).unwrap();
        assert_eq!(s.k(), 1);
        assert_eq!(s.counts, vec![60]);
        let mean = x.iter().sum::<f64>() / 60.0;
        assert_eq!(s.priors.mu_y, mean);
        s.check_consistency().unwrap();
    }

    #[test]
    fn sweeps_keep_bookkeeping() {
        let x = data(&[1.0, 1.5, 2.2], 0.05, 40, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = init_state(&x, 1.0, 3, &mut rng).unwrap();
        for _ in 0..50 {
            s.sweep(&x, &mut rng);
            s.check_consistency().unwrap();
        }
    }

    #[test]
    fn alpha_zero_never_grows() {
        let x = data(&[1.0, 5.0], 0.1, 30, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = init_state(&x, 0.0, 3, &mut rng).unwrap();
        for _ in 0..100 {
            s.sweep(&x, &mut rng);
            assert_eq!(s.k(), 1);
        }
    }

    #[test]
    fn one_snapshot_when_iters_is_burnin_plus_one() {
        let x = data(&[1.0], 0.1, 20, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let opts = GibbsOptions {
            iters: 11,
            burnin: 10,
            ..Default::default()
        };
        assert_eq!(run_gibbs(&x, &opts, &mut rng).unwrap().snapshots.len(), 1);
        let bad = GibbsOptions {
            iters: 10,
            burnin: 10,
            ..Default::default()
        };
        assert!(run_gibbs(&x, &bad, &mut rng).is_err());
    }

    #[test]
    fn modal_k_prefers_smaller_on_tie() {
        assert_eq!(modal_k(&[3, 4, 4, 5]), 4);
        assert_eq!(modal_k(&[2, 3, 3, 2]), 2);
    }

    #[test]
    fn crp_probabilities_sum_to_one_for_three_items() {
        // partitions of 3: {3}, {2,1} x3, {1,1,1}
        let a = 0.7_f64;
        let total = crp_ln_prob(&[3], a).exp() + 3.0 * crp_ln_prob(&[2, 1], a).exp() + crp_ln_prob(&[1, 1, 1], a).exp();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jsonl_roundtrip() {
        let x = data(&[1.0, 3.0], 0.1, 20, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let opts = GibbsOptions {
            iters: 30,
            burnin: 20,
            ..Default::default()
        };
        let chain = run_gibbs(&x, &opts, &mut rng).unwrap();
        let mut buf = Vec::new();
        chain.write_jsonl(&mut buf).unwrap();
        let back = Chain::<f64>::read_jsonl(std::io::Cursor::new(buf), x.len()).unwrap();
        assert_eq!(back.snapshots.len(), 10);
        assert_eq!(back.k_trace(), chain.k_trace());
    }
}
