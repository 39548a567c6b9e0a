//! Backward induction over a uniform belief grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{departed_observation, horizon, survival_value, RewardSpec};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::sensing::SenseModel;

/// Grids smaller than this are accepted but flagged as coarse.
pub const MIN_RECOMMENDED_GRID: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub grid_size: usize,
    /// Keep V, E and A for every column in the result.
    pub keep_grids: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            grid_size: 1001,
            keep_grids: false,
        }
    }
}

/// `v[τ][i]`, `e[τ][i]`, `a[τ][i]` for `τ ∈ [0, T_k]` and grid point `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ValueGrids<T> {
    pub v: Vec<Vec<T>>,
    pub e: Vec<Vec<T>>,
    pub a: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LevelPolicy<T> {
    pub k: usize,
    pub horizon: usize,
    /// `p*(τ)` for `τ ∈ [0, T_k]`; 1 marks a pure-predict column.
    pub p_star: Vec<T>,
    /// `p**(τ)`; 1 when the transmit region reaches `p = 1`.
    pub p_star2: Vec<T>,
    /// `V(0, 1, k)`.
    pub v0: T,
    /// Smallest first difference over all value columns.
    pub min_first_diff: T,
    /// Smallest second difference over all value columns.
    pub min_second_diff: T,
    /// Largest number of sign changes of `A - E` along one column.
    pub max_sign_changes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grids: Option<ValueGrids<T>>,
}

impl<T: Real> LevelPolicy<T> {
    /// `p*(τ)`, saturating at 1 beyond the horizon.
    pub fn threshold(&self, tau: usize) -> T {
        self.p_star.get(tau).copied().unwrap_or_else(T::one)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PolicyTable<T> {
    pub grid_size: usize,
    pub tau_s: usize,
    pub levels: Vec<LevelPolicy<T>>,
}

impl<T: Real> PolicyTable<T> {
    pub fn coarse(&self) -> bool {
        self.grid_size < MIN_RECOMMENDED_GRID
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// `τ,k,p_star` rows, continuing one slot past each horizon where the
    /// curve saturates at 1.
    pub fn threshold_csv(&self) -> String {
        let mut out = String::from("tau,k,p_star\n");
        for lp in &self.levels {
            for tau in 0..=lp.horizon + 1 {
                out.push_str(&format!("{tau},{},{}\n", lp.k, lp.threshold(tau)));
            }
        }
        out
    }
}

#[inline]
fn interp<T: Real>(col: &[T], p: T) -> T {
    let last = col.len() - 1;
    let x = p.max(T::zero()).min(T::one()) * T::of_usize(last);
    let i = x.floor().to_usize().unwrap_or(0).min(last - 1);
    let f = x - T::of_usize(i);
    col[i] + (col[i + 1] - col[i]) * f
}

/// Solves one level by backward induction from `T_k` down to 0.
pub fn solve_value<T: Real>(k: usize, sm: &SenseModel<T>, rs: &RewardSpec<T>, opts: &SolveOptions) -> Result<LevelPolicy<T>> {
    let g = opts.grid_size;
    if g < 3 {
        return Err(Error::InvalidArgument(format!("belief grid needs at least 3 points, got {g}")));
    }
    if k >= sm.k() {
        return Err(Error::InvalidArgument(format!("level {k} outside a {}-level model", sm.k())));
    }
    let t_k = horizon(k, sm, rs)?;
    let n = sm.k();
    let tau_s = rs.tau_s;
    let grid: Vec<T> = (0..g).map(|i| T::of_usize(i) / T::of_usize(g - 1)).collect();
    let h_kj: Vec<T> = (0..n).map(|j| sm.h[k][j]).collect();
    let dep: Vec<T> = (0..n).map(|j| departed_observation(sm, k, j)).collect();
    let ack_dep = sm.ack_after_departure(k);
    let pen = rs.expected_penalty(sm, k);
    let ts = T::of_usize(tau_s);
    let zero_col = vec![T::zero(); g];

    let mut v: Vec<Vec<T>> = vec![Vec::new(); t_k + 1];
    let mut e_all: Vec<Vec<T>> = if opts.keep_grids { vec![Vec::new(); t_k + 1] } else { Vec::new() };
    let mut a_all: Vec<Vec<T>> = e_all.clone();
    let mut p_star = vec![T::one(); t_k + 1];
    let mut p_star2 = vec![T::one(); t_k + 1];
    let mut max_sign_changes = 0;

    for tau in (0..=t_k).rev() {
        let g_e = survival_value(sm.nu_hat, tau, 1);
        let g_a = survival_value(sm.nu_hat, tau, tau_s);
        let v_next = if tau < t_k { &v[tau + 1] } else { &zero_col };
        let v_after = if tau + tau_s <= t_k { &v[tau + tau_s] } else { &zero_col };
        let mut e_col = vec![T::zero(); g];
        let mut a_col = vec![T::zero(); g];
        for (i, &p) in grid.iter().enumerate() {
            let pg = p * g_e;
            let mut e = T::zero();
            for j in 0..n {
                let stay = pg * h_kj[j];
                let pr = stay + (T::one() - pg) * dep[j];
                if pr > T::zero() {
                    e = e + pr * interp(v_next, stay / pr);
                }
            }
            e_col[i] = e;
            let pga = p * g_a;
            let pr_ack = pga + (T::one() - pga) * ack_dep;
            let reward = (pga * rs.d[k] - (T::one() - pga) * pen) * ts;
            let cont = if pr_ack > T::zero() {
                pr_ack * interp(v_after, pga / pr_ack)
            } else {
                T::zero()
            };
            a_col[i] = reward + cont;
        }
        let diff: Vec<T> = a_col.iter().zip(&e_col).map(|(&a, &e)| a - e).collect();
        let (lo, hi, changes) = thresholds(&grid, &diff);
        p_star[tau] = lo;
        p_star2[tau] = hi;
        max_sign_changes = max_sign_changes.max(changes);
        v[tau] = e_col.iter().zip(&a_col).map(|(&e, &a)| e.max(a)).collect();
        if opts.keep_grids {
            e_all[tau] = e_col;
            a_all[tau] = a_col;
        }
    }

    let mut min_first = T::infinity();
    let mut min_second = T::infinity();
    let mut scale = T::one();
    for col in &v {
        for w in col.windows(2) {
            min_first = min_first.min(w[1] - w[0]);
        }
        for w in col.windows(3) {
            min_second = min_second.min(w[2] - w[1] - (w[1] - w[0]));
        }
        scale = scale.max(col[g - 1].abs()).max(col[0].abs());
    }
    // rounding noise in the backward pass scales with the working precision
    let tol = T::lit(1e-9).max(T::lit(64.0) * T::epsilon());
    if min_second < -tol * scale {
        return Err(Error::Numerical(format!(
            "value function for level {k} is not convex on the grid (second difference {min_second})"
        )));
    }
    let v0 = v[0][g - 1];
    Ok(LevelPolicy {
        k,
        horizon: t_k,
        p_star,
        p_star2,
        v0,
        min_first_diff: min_first,
        min_second_diff: min_second,
        max_sign_changes,
        grids: opts.keep_grids.then(|| ValueGrids { v, e: e_all, a: a_all }),
    })
}

/// `(p*, p**, sign changes)` of `diff = A - E` sampled on `grid`.
fn thresholds<T: Real>(grid: &[T], diff: &[T]) -> (T, T, usize) {
    let ok = |d: T| d >= T::zero();
    let changes = diff.windows(2).filter(|w| ok(w[0]) != ok(w[1])).count();
    let Some(first) = diff.iter().position(|&d| ok(d)) else {
        return (T::one(), T::one(), changes);
    };
    let last = diff.iter().rposition(|&d| ok(d)).expect("first exists");
    let cross = |i: usize| {
        // zero of the segment between grid points i and i + 1
        let (d0, d1) = (diff[i], diff[i + 1]);
        let f = if d1 != d0 { d0 / (d0 - d1) } else { T::zero() };
        grid[i] + (grid[i + 1] - grid[i]) * f.max(T::zero()).min(T::one())
    };
    let lo = if first == 0 { T::zero() } else { cross(first - 1) };
    let hi = if last == grid.len() - 1 { T::one() } else { cross(last) };
    (lo, hi, changes)
}

/// Solves every level, in parallel.
pub fn solve_policy<T: Real>(sm: &SenseModel<T>, rs: &RewardSpec<T>, opts: &SolveOptions) -> Result<PolicyTable<T>> {
    rs.validate()?;
    let levels = (0..sm.k())
        .into_par_iter()
        .map(|k| solve_value(k, sm, rs, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(PolicyTable {
        grid_size: opts.grid_size,
        tau_s: rs.tau_s,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_is_exact_on_lines() {
        let col: Vec<f64> = (0..11).map(|i| 2.0 * i as f64 / 10.0 + 1.0).collect();
        for &p in &[0.0, 0.05, 0.37, 0.999, 1.0] {
            assert!((interp(&col, p) - (2.0 * p + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn thresholds_single_and_double() {
        let grid: Vec<f64> = (0..5).map(|i| i as f64 / 4.0).collect();
        let (lo, hi, c) = thresholds(&grid, &[-1.0, -0.5, 0.5, 1.0, 2.0]);
        assert!((lo - 0.375).abs() < 1e-15 && hi == 1.0 && c == 1);
        let (lo, hi, c) = thresholds(&grid, &[-1.0, 1.0, 1.0, -1.0, -2.0]);
        assert!((lo - 0.125).abs() < 1e-15 && (hi - 0.625).abs() < 1e-15 && c == 2);
        let (lo, hi, _) = thresholds(&grid, &[-1.0; 5]);
        assert_eq!((lo, hi), (1.0, 1.0));
    }
}
