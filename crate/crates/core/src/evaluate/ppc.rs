//! Posterior predictive checks on marginal vote counts.
//!
//! For each posterior draw one replicated dataset is simulated at the
//! observed (item, rater) positions. Counts of positive votes per rater
//! and per item are compared through a variance-standardized discrepancy
//! whose moments are computed analytically under the same draw, with the
//! item categories summed out.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::RatingDataset;
use crate::error::{Error, Result};
use crate::math::{mean, quantile_sorted};
use crate::model::rating_one_prob;
use crate::params::ParamBlock;
use crate::sampler::Fit;
use crate::spec::ModelSpec;

pub const MIN_PPC_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Axis {
    Rater,
    Item,
}

/// Random generator for replicate `draw`.
fn draw_rng(seed: u64, draw: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw as u64);
    rng
}

/// Simulates new ratings at the positions of `skeleton`: every item gets
/// a fresh category, then every rating is drawn given it.
pub fn simulate_replicate(spec: &ModelSpec, p: &ParamBlock, skeleton: &RatingDataset, seed: u64) -> Vec<u8> {
    replicate_with(spec, p, skeleton, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn replicate_with<R: Rng>(spec: &ModelSpec, p: &ParamBlock, skeleton: &RatingDataset, rng: &mut R) -> Vec<u8> {
    let mut out = vec![0u8; skeleton.len()];
    for i in 0..skeleton.num_items() {
        let z = rng.random::<f64>() < p.prevalence;
        for &n in skeleton.item_ratings(i) {
            let p1 = rating_one_prob(spec, p, i, skeleton.rater(n), z);
            out[n] = u8::from(rng.random::<f64>() < p1);
        }
    }
    out
}

/// Number of 1 ratings given by each rater.
pub fn stat_positive_per_rater(data: &RatingDataset, ratings: &[u8]) -> Vec<u32> {
    let mut counts = vec![0u32; data.num_raters()];
    for (n, &y) in ratings.iter().enumerate() {
        counts[data.rater(n)] += u32::from(y);
    }
    counts
}

/// Number of 1 ratings received by each item.
pub fn stat_positive_per_item(data: &RatingDataset, ratings: &[u8]) -> Vec<u32> {
    (0..data.num_items())
        .map(|i| data.item_ratings(i).iter().map(|&n| u32::from(ratings[n])).sum())
        .collect()
}

/// Mean and variance of each cell count under one draw.
struct Moments {
    rater: Vec<(f64, f64)>,
    item: Vec<(f64, f64)>,
}

/// Mixture moments of a sum of ratings of one item: `(E, Var)` given the
/// per-category probabilities of a 1.
fn mixture_moments(pi: f64, probs: &[(f64, f64)]) -> (f64, f64) {
    let (mut s0, mut s1, mut v0, mut v1) = (0.0, 0.0, 0.0, 0.0);
    for &(p0, p1) in probs {
        s0 += p0;
        s1 += p1;
        v0 += p0 * (1.0 - p0);
        v1 += p1 * (1.0 - p1);
    }
    let e = pi * s1 + (1.0 - pi) * s0;
    let v = pi * v1 + (1.0 - pi) * v0 + pi * (1.0 - pi) * (s1 - s0) * (s1 - s0);
    (e, v)
}

fn moments(spec: &ModelSpec, p: &ParamBlock, data: &RatingDataset) -> Moments {
    let mut rater = vec![(0.0, 0.0); data.num_raters()];
    let mut item = vec![(0.0, 0.0); data.num_items()];
    let mut probs: Vec<(f64, f64)> = Vec::new();
    let mut by_rater: Vec<(usize, (f64, f64))> = Vec::new();
    for i in 0..data.num_items() {
        probs.clear();
        by_rater.clear();
        for &n in data.item_ratings(i) {
            let j = data.rater(n);
            let pr = (rating_one_prob(spec, p, i, j, false), rating_one_prob(spec, p, i, j, true));
            probs.push(pr);
            by_rater.push((j, pr));
        }
        item[i] = mixture_moments(p.prevalence, &probs);
        // A rater's repeated ratings of one item share its category.
        by_rater.sort_by_key(|&(j, _)| j);
        let mut k = 0;
        while k < by_rater.len() {
            let j = by_rater[k].0;
            let mut e = k;
            while e < by_rater.len() && by_rater[e].0 == j {
                e += 1;
            }
            let group: Vec<(f64, f64)> = by_rater[k..e].iter().map(|&(_, pr)| pr).collect();
            let (m, v) = mixture_moments(p.prevalence, &group);
            rater[j].0 += m;
            rater[j].1 += v;
            k = e;
        }
    }
    Moments { rater, item }
}

fn discrepancy(counts: &[u32], moments: &[(f64, f64)]) -> f64 {
    counts
        .iter()
        .zip(moments)
        .map(|(&c, &(m, v))| {
            let d = c as f64 - m;
            d * d / (v + 1e-8)
        })
        .sum()
}

/// Summary of replicated vote histograms: for each `k`, the number of
/// items with exactly `k` positive votes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VoteHistogram {
    pub k: Vec<usize>,
    pub observed: Vec<f64>,
    pub replicate_mean: Vec<f64>,
    pub lo90: Vec<f64>,
    pub hi90: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PpcReport {
    pub rater_p_value: f64,
    /// Per-item statistic.
    pub ratings_p_value: f64,
    pub rater_observed: Vec<f64>,
    pub rater_replicated: Vec<f64>,
    pub ratings_observed: Vec<f64>,
    pub ratings_replicated: Vec<f64>,
    pub histogram: VoteHistogram,
}

fn histogram_counts(item_counts: &[u32], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &c in item_counts {
        h[(c as usize).min(bins - 1)] += 1.0;
    }
    h
}

/// Runs both discrepancy checks and the vote histogram off one set of replicates.
pub fn ppc_report(fit: &Fit, data: &RatingDataset, seed: u64) -> Result<PpcReport> {
    let spec = fit.spec();
    let draws = fit.draws.total();
    if draws < MIN_PPC_DRAWS {
        return Err(Error::TooFewDraws { needed: MIN_PPC_DRAWS, found: draws });
    }
    if fit.layout.num_items != data.num_items() || fit.layout.num_raters != data.num_raters() {
        return Err(Error::DimensionMismatch { expected: fit.layout.num_items, found: data.num_items() });
    }
    let obs_rater = stat_positive_per_rater(data, data.ratings());
    let obs_item = stat_positive_per_item(data, data.ratings());
    let bins = data.max_ratings_per_item() + 1;
    let mut trace = [Vec::with_capacity(draws), Vec::with_capacity(draws), Vec::with_capacity(draws), Vec::with_capacity(draws)];
    let mut hist_draws: Vec<Vec<f64>> = vec![Vec::with_capacity(draws); bins];
    for s in 0..draws {
        let p = fit.param_block(s)?;
        let mom = moments(&spec, &p, data);
        let rep = replicate_with(&spec, &p, data, &mut draw_rng(seed, s));
        let rep_rater = stat_positive_per_rater(data, &rep);
        let rep_item = stat_positive_per_item(data, &rep);
        trace[0].push(discrepancy(&obs_rater, &mom.rater));
        trace[1].push(discrepancy(&rep_rater, &mom.rater));
        trace[2].push(discrepancy(&obs_item, &mom.item));
        trace[3].push(discrepancy(&rep_item, &mom.item));
        for (b, v) in histogram_counts(&rep_item, bins).into_iter().enumerate() {
            hist_draws[b].push(v);
        }
    }
    let p_value = |obs: &[f64], rep: &[f64]| {
        obs.iter().zip(rep).filter(|(o, r)| r >= o).count() as f64 / obs.len() as f64
    };
    let rater_p_value = p_value(&trace[0], &trace[1]);
    let ratings_p_value = p_value(&trace[2], &trace[3]);

    let mut histogram = VoteHistogram {
        k: (0..bins).collect(),
        observed: histogram_counts(&obs_item, bins),
        replicate_mean: Vec::with_capacity(bins),
        lo90: Vec::with_capacity(bins),
        hi90: Vec::with_capacity(bins),
    };
    for mut col in hist_draws {
        let m = mean(&col);
        col.sort_by(f64::total_cmp);
        // Very skewed replicate counts can put the mean outside the
        // quantile band; widen the band to keep the mean inside.
        histogram.replicate_mean.push(m);
        histogram.lo90.push(quantile_sorted(&col, 0.05).min(m));
        histogram.hi90.push(quantile_sorted(&col, 0.95).max(m));
    }
    let [rater_observed, rater_replicated, ratings_observed, ratings_replicated] = trace;
    Ok(PpcReport {
        rater_p_value,
        ratings_p_value,
        rater_observed,
        rater_replicated,
        ratings_observed,
        ratings_replicated,
        histogram,
    })
}

/// Posterior predictive p-value of one axis.
pub fn ppc_pvalue(fit: &Fit, data: &RatingDataset, axis: Axis, seed: u64) -> Result<f64> {
    let report = ppc_report(fit, data, seed)?;
    Ok(match axis {
        Axis::Rater => report.rater_p_value,
        Axis::Item => report.ratings_p_value,
    })
}

/// Vote histogram of observed and replicated data.
pub fn vote_histogram(fit: &Fit, data: &RatingDataset, seed: u64) -> Result<VoteHistogram> {
    Ok(ppc_report(fit, data, seed)?.histogram)
}
