//! Pareto-smoothed importance sampling.

use alloc::vec::Vec;

#[allow(unused_imports)] // std float methods shadow it when a dev-dependency links std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::log_sum_exp_slice;

/// Pareto k̂ above which an importance-sampling estimate is unreliable.
pub const K_THRESHOLD: f64 = 0.7;

const MIN_TAIL: usize = 5;
const MIN_DRAWS: usize = 25;

/// Fits a generalized Pareto distribution to positive exceedances by the
/// profile-posterior-mean method of Zhang and Stephens, with a weakly
/// informative prior shrinking the shape towards 0.5.
///
/// Returns `(k, sigma)`.
pub fn gpd_fit(exceedances: &[f64]) -> Result<(f64, f64)> {
    let n = exceedances.len();
    if n < MIN_TAIL {
        return Err(Error::TooFewSamples { needed: MIN_TAIL, found: n });
    }
    let mut x = exceedances.to_vec();
    x.sort_by(f64::total_cmp);
    if x[0] == x[n - 1] {
        return Err(Error::DegenerateTail);
    }
    let prior = 3.0;
    let m = 30 + libm::floor(libm::sqrt(n as f64)) as usize;
    let xstar = x[(n as f64 / 4.0 + 0.5) as usize - 1];
    let x_max = x[n - 1];
    let theta: Vec<f64> = (1..=m)
        .map(|j| 1.0 / x_max + (1.0 - (m as f64 / (j as f64 - 0.5)).sqrt()) / prior / xstar)
        .collect();
    let profile: Vec<f64> = theta
        .iter()
        .map(|&t| {
            let k = x.iter().map(|&xi| (-t * xi).ln_1p()).sum::<f64>() / n as f64;
            n as f64 * ((-t / k).ln() - k - 1.0)
        })
        .collect();
    let norm = log_sum_exp_slice(&profile);
    let theta_hat: f64 = theta.iter().zip(&profile).map(|(t, l)| t * (l - norm).exp()).sum();
    let k = x.iter().map(|&xi| (-theta_hat * xi).ln_1p()).sum::<f64>() / n as f64;
    let sigma = -k / theta_hat;
    let k = (k * n as f64 + 0.5 * 10.0) / (n as f64 + 10.0);
    if !(k.is_finite() && sigma.is_finite() && sigma > 0.0) {
        return Err(Error::NonFinite("generalized Pareto fit"));
    }
    Ok((k, sigma))
}

/// Quantile function of the generalized Pareto distribution.
pub fn gpd_quantile(p: f64, k: f64, sigma: f64) -> f64 {
    if k.abs() < 1e-12 {
        -sigma * (-p).ln_1p()
    } else {
        sigma * (-k * (-p).ln_1p()).exp_m1() / k
    }
}

/// Smoothed, self-normalized log weights plus the tail shape estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub log_weights: Vec<f64>,
    /// `None` when the tail is degenerate (all tail ratios equal), which
    /// leaves the raw weights unchanged and counts as reliable.
    pub pareto_k: Option<f64>,
}

/// Replaces the largest `M = ceil(min(0.2 S, 3 √S))` importance ratios by
/// expected order statistics of a generalized Pareto fit to the tail,
/// truncates at the largest raw ratio and normalizes.
pub fn psis_smooth(log_ratios: &[f64]) -> Result<Smoothed> {
    let s = log_ratios.len();
    if s < MIN_DRAWS {
        return Err(Error::TooFewSamples { needed: MIN_DRAWS, found: s });
    }
    if log_ratios.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(Error::NonFinite("log importance ratio"));
    }
    let max = log_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lw: Vec<f64> = log_ratios.iter().map(|x| x - max).collect();
    let m = libm::ceil((0.2 * s as f64).min(3.0 * libm::sqrt(s as f64))) as usize;
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| lw[a].total_cmp(&lw[b]));
    let cutoff = lw[order[s - m - 1]];
    let tail = &order[s - m..];
    let exceed: Vec<f64> = tail.iter().map(|&i| lw[i].exp() - cutoff.exp()).collect();

    let pareto_k = match gpd_fit(&exceed) {
        Ok((k, sigma)) => {
            for (rank, &i) in tail.iter().enumerate() {
                let p = (rank as f64 + 0.5) / m as f64;
                let smoothed = (gpd_quantile(p, k, sigma) + cutoff.exp()).ln();
                lw[i] = smoothed.min(0.0);
            }
            Some(k)
        }
        Err(Error::DegenerateTail) => None,
        Err(e) => return Err(e),
    };
    let norm = log_sum_exp_slice(&lw);
    lw.iter_mut().for_each(|x| *x -= norm);
    Ok(Smoothed { log_weights: lw, pareto_k })
}
