//! Expectation-maximisation baseline with a known component count.

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::error::{Error, Result};
use crate::mixture::MixtureModel;
use crate::num::{log_sum_exp, normal_ln_pdf, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Stop once the log-likelihood gain falls below `tol * |ll|`.
    pub tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { max_iter: 500, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFit<T> {
    pub model: MixtureModel<T>,
    pub converged: bool,
    /// Log-likelihood after every iteration of the winning restart.
    pub loglik: Vec<T>,
}

/// Best of `restarts` EM runs by final log-likelihood.
pub fn fit_em_gmm<T: Real, R: Rng + ?Sized>(x: &[T], l_known: usize, restarts: usize, rng: &mut R) -> Result<EmFit<T>> {
    fit_em_gmm_with(x, l_known, restarts, &EmOptions::default(), rng)
}

pub fn fit_em_gmm_with<T: Real, R: Rng + ?Sized>(
    x: &[T],
    l_known: usize,
    restarts: usize,
    opts: &EmOptions,
    rng: &mut R,
) -> Result<EmFit<T>> {
    if l_known == 0 {
        return Err(Error::InvalidArgument("EM needs at least one component".into()));
    }
    if x.len() < l_known {
        return Err(Error::InvalidArgument("fewer observations than components".into()));
    }
    let mut best: Option<(Vec<T>, Vec<T>, Vec<T>, bool, Vec<T>)> = None;
    for _ in 0..restarts.max(1) {
        let run = em_once(x, l_known, opts, rng);
        let better = match &best {
            None => true,
            Some(b) => run.4.last() > b.4.last(),
        };
        if better {
            best = Some(run);
        }
    }
    let (mu, s, w, converged, loglik) = best.expect("at least one restart");
    let model = MixtureModel::new(mu, s, w)?;
    Ok(EmFit { model, converged, loglik })
}

#[allow(clippy::type_complexity)]
fn em_once<T: Real, R: Rng + ?Sized>(x: &[T], l: usize, opts: &EmOptions, rng: &mut R) -> (Vec<T>, Vec<T>, Vec<T>, bool, Vec<T>) {
    let n = x.len();
    let nt = T::of_usize(n);
    let mean = x.iter().copied().sum::<T>() / nt;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nt;
    let floor = var * T::lit(1e-10) + T::min_positive_value();

    let mut mu: Vec<T> = sample_indices(rng, n, l).into_iter().map(|i| x[i]).collect();
    let mut s = vec![var.recip(); l];
    let mut w = vec![T::one() / T::of_usize(l); l];
    let mut resp = vec![T::zero(); n * l];
    let mut row = vec![T::zero(); l];
    let mut trace = Vec::new();
    let mut converged = false;

    for _ in 0..opts.max_iter {
        // E step
        let mut ll = T::zero();
        for i in 0..n {
            for k in 0..l {
                row[k] = w[k].ln() + normal_ln_pdf(x[i], mu[k], s[k]);
            }
            let lse = log_sum_exp(&row);
            ll = ll + lse;
            for k in 0..l {
                resp[i * l + k] = (row[k] - lse).exp();
            }
        }
        if let Some(&prev) = trace.last() {
            let gain: T = ll - prev;
            if gain.abs() <= T::lit(opts.tol) * ll.abs() {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        // M step
        for k in 0..l {
            let nk: T = (0..n).map(|i| resp[i * l + k]).sum();
            if !(nk > T::lit(1e-12)) {
                // collapsed component: reseed at a random point
                mu[k] = x[rng.gen_range(0..n)];
                s[k] = var.recip();
                w[k] = T::lit(1e-6);
                continue;
            }
            let m = (0..n).map(|i| resp[i * l + k] * x[i]).sum::<T>() / nk;
            let v = (0..n).map(|i| resp[i * l + k] * (x[i] - m) * (x[i] - m)).sum::<T>() / nk;
            mu[k] = m;
            s[k] = v.max(floor).recip();
            w[k] = nk / nt;
        }
        let tw: T = w.iter().copied().sum();
        for wk in w.iter_mut() {
            *wk = *wk / tw;
        }
    }
    // break exact ties so the model can be sorted strictly
    for k in 1..l {
        for j in 0..k {
            if mu[k] == mu[j] {
                mu[k] = mu[k] + (mu[k].abs() + T::one()) * T::epsilon() * T::of_usize(4 * k);
            }
        }
    }
    (mu, s, w, converged, trace)
}
