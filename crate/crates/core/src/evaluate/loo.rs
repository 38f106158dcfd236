//! PSIS leave-one-out cross-validation.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std float methods shadow it when a dev-dependency links std
use num_traits::Float;

use super::psis::{psis_smooth, K_THRESHOLD};
use crate::data::RatingDataset;
use crate::error::{Error, Result};
use crate::math::log_sum_exp_slice;
use crate::model::{for_each_pointwise, item_log_marginal};
use crate::sampler::Fit;

/// What is left out: a single rating, or all ratings of an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LooUnit {
    Rating,
    Item,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LooReport {
    pub unit: LooUnit,
    pub elpd_loo: f64,
    pub se_elpd_loo: f64,
    /// One contribution per rating (or per item).
    pub pointwise: Vec<f64>,
    /// `None` marks a degenerate tail, which is reliable.
    pub pareto_k: Vec<Option<f64>>,
    pub num_high_k: usize,
}

/// Caps the buffered log-likelihood matrix at about 32 MB.
const CHUNK_VALUES: usize = 1 << 22;

/// PSIS-LOO estimate of the expected log pointwise predictive density.
pub fn elpd_loo(fit: &Fit, data: &RatingDataset, unit: LooUnit) -> Result<LooReport> {
    let spec = fit.spec();
    let draws = fit.draws.total();
    if fit.layout.num_items != data.num_items() || fit.layout.num_raters != data.num_raters() {
        return Err(Error::DimensionMismatch { expected: fit.layout.num_items, found: data.num_items() });
    }
    let units = match unit {
        LooUnit::Rating => data.len(),
        LooUnit::Item => data.num_items(),
    };
    let mut pointwise = vec![0.0; units];
    let mut pareto_k = vec![None; units];

    let mut start = 0;
    while start < data.num_items() {
        // Grow the chunk of items until the buffer is full.
        let mut end = start;
        let mut cells = 0;
        while end < data.num_items() {
            let add = match unit {
                LooUnit::Rating => data.item_ratings(end).len(),
                LooUnit::Item => 1,
            };
            if cells > 0 && (cells + add) * draws > CHUNK_VALUES {
                break;
            }
            cells += add;
            end += 1;
        }
        // Column c holds unit ids[c]; rows are draws.
        let ids: Vec<usize> = match unit {
            LooUnit::Rating => (start..end).flat_map(|i| data.item_ratings(i).iter().copied()).collect(),
            LooUnit::Item => (start..end).collect(),
        };
        let mut slot = vec![0usize; units];
        for (c, &id) in ids.iter().enumerate() {
            slot[id] = c;
        }
        let mut ll = vec![0.0; ids.len() * draws];
        for s in 0..draws {
            let p = fit.param_block(s)?;
            match unit {
                LooUnit::Rating => {
                    for_each_pointwise(&spec, &p, data, start..end, |n, v| ll[slot[n] * draws + s] = v);
                }
                LooUnit::Item => {
                    for i in start..end {
                        ll[slot[i] * draws + s] = item_log_marginal(&spec, &p, data, i);
                    }
                }
            }
        }
        for (c, &id) in ids.iter().enumerate() {
            let col = &ll[c * draws..(c + 1) * draws];
            let neg: Vec<f64> = col.iter().map(|v| -v).collect();
            let smoothed = psis_smooth(&neg)?;
            let terms: Vec<f64> = smoothed.log_weights.iter().zip(col).map(|(w, v)| w + v).collect();
            pointwise[id] = log_sum_exp_slice(&terms);
            pareto_k[id] = smoothed.pareto_k;
        }
        start = end;
    }

    let elpd_loo: f64 = pointwise.iter().sum();
    let n = pointwise.len() as f64;
    let se_elpd_loo = if n > 1.0 {
        let mean = elpd_loo / n;
        (n * pointwise.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let num_high_k = pareto_k.iter().filter(|k| k.is_some_and(|k| k > K_THRESHOLD)).count();
    Ok(LooReport { unit, elpd_loo, se_elpd_loo, pointwise, pareto_k, num_high_k })
}
