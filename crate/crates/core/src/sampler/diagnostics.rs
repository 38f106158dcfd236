//! Convergence diagnostics: split-R̂ and rank-normalized bulk ESS.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std float methods shadow it when a dev-dependency links std
use num_traits::Float;

use super::Draws;
use crate::math::{mean, normal_quantile, variance};

/// Splits every chain into a first and second half (dropping the middle
/// draw of an odd-length chain).
fn split_chains<'a>(chains: &[&'a [f64]]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(&c[..half]);
        out.push(&c[c.len() - half..]);
    }
    out
}

fn well_formed(chains: &[&[f64]], min_len: usize) -> Option<usize> {
    let n = chains.first()?.len();
    if n < min_len || chains.iter().any(|c| c.len() != n || c.iter().any(|x| !x.is_finite())) {
        return None;
    }
    Some(n)
}

fn rhat_of(chains: &[&[f64]]) -> Option<f64> {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| variance(c)).sum::<f64>() / chains.len() as f64;
    let b_over_n = if chains.len() > 1 { variance(&means) } else { 0.0 };
    if !(w > 0.0) {
        return None;
    }
    let var_plus = (n - 1.0) / n * w + b_over_n;
    Some((var_plus / w).sqrt())
}

/// Split-R̂ of one parameter given its draws per chain.
///
/// Returns `None` when the draws have zero variance, contain non-finite
/// values, or chains are shorter than 4 draws.
pub fn split_rhat(chains: &[&[f64]]) -> Option<f64> {
    well_formed(chains, 4)?;
    rhat_of(&split_chains(chains))
}

/// Biased autocovariance at lag `t`.
fn autocov(x: &[f64], m: f64, t: usize) -> f64 {
    let n = x.len();
    x[..n - t].iter().zip(&x[t..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / n as f64
}

/// Effective sample size from Geyer's initial positive and monotone
/// sequence estimators, with autocovariances computed lag by lag until the
/// truncation point.
fn ess_of(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len();
    let n = chains[0].len();
    let chain_mean: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let acov = |t: usize| -> f64 {
        chains.iter().zip(&chain_mean).map(|(c, &mu)| autocov(c, mu, t)).sum::<f64>() / m as f64
    };
    let acov0 = acov(0);
    let mean_var = acov0 * n as f64 / (n as f64 - 1.0);
    let mut var_plus = mean_var * (n as f64 - 1.0) / n as f64;
    if m > 1 {
        var_plus += variance(&chain_mean);
    }
    if !(var_plus > 0.0) {
        return None;
    }
    let rho = |t: usize| 1.0 - (mean_var - acov(t)) / var_plus;

    let mut rho_hat = vec![0.0; n + 1];
    rho_hat[0] = 1.0;
    let mut rho_even = 1.0;
    let mut rho_odd = rho(1);
    rho_hat[1] = rho_odd;
    let mut t = 1;
    while t + 5 < n && (rho_even + rho_odd).is_finite() && rho_even + rho_odd > 0.0 {
        rho_even = rho(t + 1);
        rho_odd = rho(t + 2);
        if rho_even + rho_odd >= 0.0 {
            rho_hat[t + 1] = rho_even;
            rho_hat[t + 2] = rho_odd;
        }
        t += 2;
    }
    let max_t = t;
    if rho_even > 0.0 {
        rho_hat[max_t + 1] = rho_even;
    }
    let mut t = 1;
    while t + 2 <= max_t {
        let prev = rho_hat[t - 1] + rho_hat[t];
        if rho_hat[t + 1] + rho_hat[t + 2] > prev {
            rho_hat[t + 1] = prev / 2.0;
            rho_hat[t + 2] = prev / 2.0;
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho_hat[..max_t].iter().sum::<f64>() + rho_hat[max_t + 1];
    let tau = tau.max(1.0 / total.log10());
    Some(total / tau)
}

/// Ranks with ties averaged, 1-based.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut e = k;
        while e + 1 < idx.len() && x[idx[e + 1]] == x[idx[k]] {
            e += 1;
        }
        let r = (k + e) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=e] {
            ranks[i] = r;
        }
        k = e + 1;
    }
    ranks
}

/// Bulk effective sample size: split chains, rank-normalize, then apply
/// the autocorrelation estimator. `None` for constant or non-finite draws
/// or chains shorter than 8.
pub fn ess_bulk(chains: &[&[f64]]) -> Option<f64> {
    well_formed(chains, 8)?;
    let split = split_chains(chains);
    let pooled: Vec<f64> = split.iter().flat_map(|c| c.iter().copied()).collect();
    if pooled.iter().all(|&x| x == pooled[0]) {
        return None;
    }
    let ranks = average_ranks(&pooled);
    let s = pooled.len() as f64;
    let z: Vec<f64> = ranks.iter().map(|r| normal_quantile((r - 0.375) / (s + 0.25))).collect();
    let len = split[0].len();
    let normalized: Vec<Vec<f64>> = z.chunks(len).map(|c| c.to_vec()).collect();
    ess_of(&normalized)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamDiagnostics {
    pub name: String,
    pub rhat: Option<f64>,
    pub ess_bulk: Option<f64>,
}

/// Summary diagnostics over all columns of a fit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    pub params: Vec<ParamDiagnostics>,
    pub divergences: usize,
    pub max_tree_depth_hits: usize,
    pub max_rhat: Option<f64>,
    pub min_ess_bulk: Option<f64>,
}

impl Diagnostics {
    /// Computes diagnostics for every column of `draws` (named by `names`).
    pub fn compute(draws: &Draws, names: &[String], max_tree_depth: usize) -> Self {
        let params: Vec<ParamDiagnostics> = names
            .iter()
            .enumerate()
            .map(|(d, name)| {
                let cols = draws.column(d);
                let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
                ParamDiagnostics { name: name.clone(), rhat: split_rhat(&refs), ess_bulk: ess_bulk(&refs) }
            })
            .collect();
        let max_rhat = params.iter().filter_map(|p| p.rhat).reduce(f64::max);
        let min_ess_bulk = params.iter().filter_map(|p| p.ess_bulk).reduce(f64::min);
        Self {
            params,
            divergences: draws.divergences(),
            max_tree_depth_hits: draws.stats.iter().filter(|s| s.tree_depth >= max_tree_depth).count(),
            max_rhat,
            min_ess_bulk,
        }
    }

    /// True when every defined R̂ is below 1.01 and nothing diverged.
    pub fn converged(&self) -> bool {
        self.divergences == 0 && self.max_rhat.is_none_or(|r| r < 1.01)
    }
}
