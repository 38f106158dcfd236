//! Rating kernel, marginal likelihood, priors and the log posterior.
//!
//! A rater `j` rates item `i` correctly with probability
//! `λ_i + (1 − λ_i) · inv_logit(δ_i · (α^k_j − β_i))`, where `k` is the
//! sensitivity side when the true category is 1 and the specificity side
//! when it is 0. The latent category of each item is summed out on the log
//! scale, which factors the likelihood by item.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)] // std float methods shadow it when a dev-dependency links std
use num_traits::Float;

use crate::data::RatingDataset;
use crate::error::{Error, Result};
use crate::math::{beta22_lpdf, inv_logit, log_inv_logit, log_sum_exp, lognormal_lpdf, normal_lpdf};
use crate::params::{ParamBlock, ParamLayout};
use crate::spec::ModelSpec;

pub const PRIOR_SENS_MEAN: f64 = 1.0;
pub const PRIOR_SPEC_MEAN: f64 = 2.0;
pub const PRIOR_ABILITY_SD: f64 = 2.0;
pub const PRIOR_DIFFICULTY_SD: f64 = 1.0;
pub const PRIOR_LOG_DISCRIMINATION_SD: f64 = 0.25;

#[inline]
fn linear_predictor(spec: &ModelSpec, p: &ParamBlock, i: usize, j: usize, z: bool) -> f64 {
    let alpha = if spec.has_rater_effects() { p.ability(j, z) } else { 0.0 };
    let gap = if spec.equal_difficulty() { alpha } else { alpha - p.difficulty[i] };
    if spec.equal_discrimination() {
        gap
    } else {
        p.discrimination[i] * gap
    }
}

/// Probability that rater `j` gives item `i` its correct rating when the
/// item's true category is `z`.
pub fn prob_correct(spec: &ModelSpec, p: &ParamBlock, i: usize, j: usize, z: bool) -> f64 {
    let s = inv_logit(linear_predictor(spec, p, i, j, z));
    if spec.no_guessing() {
        s
    } else {
        let lambda = p.guessing[i];
        lambda + (1.0 - lambda) * s
    }
}

/// Probability of a 1 rating from rater `j` on item `i` given category `z`.
pub fn rating_one_prob(spec: &ModelSpec, p: &ParamBlock, i: usize, j: usize, z: bool) -> f64 {
    if z {
        return prob_correct(spec, p, i, j, true);
    }
    let miss = inv_logit(-linear_predictor(spec, p, i, j, false));
    if spec.no_guessing() {
        miss
    } else {
        (1.0 - p.guessing[i]) * miss
    }
}

/// Log probability of one rating and its partial derivatives with respect
/// to the linear predictor and the guessing parameter.
#[derive(Debug, Clone, Copy, Default)]
struct Term {
    logp: f64,
    d_eta: f64,
    d_lambda: f64,
}

#[inline]
fn rating_term(guessing: Option<f64>, eta: f64, correct: bool) -> Term {
    let s = inv_logit(eta);
    match (guessing, correct) {
        (None, true) => Term { logp: log_inv_logit(eta), d_eta: 1.0 - s, d_lambda: 0.0 },
        (None, false) => Term { logp: log_inv_logit(-eta), d_eta: -s, d_lambda: 0.0 },
        (Some(lambda), true) => {
            let logp = log_sum_exp(lambda.ln(), (1.0 - lambda).ln() + log_inv_logit(eta));
            let c = logp.exp();
            Term { logp, d_eta: (1.0 - lambda) * s * (1.0 - s) / c, d_lambda: (1.0 - s) / c }
        }
        (Some(lambda), false) => Term {
            logp: (1.0 - lambda).ln() + log_inv_logit(-eta),
            d_eta: -s,
            d_lambda: -1.0 / (1.0 - lambda),
        },
    }
}

#[inline]
fn log_rating_prob(spec: &ModelSpec, p: &ParamBlock, i: usize, j: usize, z: bool, y: u8) -> f64 {
    let eta = linear_predictor(spec, p, i, j, z);
    let guess = if spec.no_guessing() { None } else { Some(p.guessing[i]) };
    rating_term(guess, eta, (y == 1) == z).logp
}

/// `[log p(z=0) + Σ log p(y|0), log p(z=1) + Σ log p(y|1)]` for item `i`.
fn item_branches(spec: &ModelSpec, p: &ParamBlock, data: &RatingDataset, i: usize) -> [f64; 2] {
    let mut branches = [(1.0 - p.prevalence).ln(), p.prevalence.ln()];
    for &n in data.item_ratings(i) {
        let (j, y) = (data.rater(n), data.rating(n));
        branches[0] += log_rating_prob(spec, p, i, j, false, y);
        branches[1] += log_rating_prob(spec, p, i, j, true, y);
    }
    branches
}

/// Log marginal likelihood of the ratings of item `i`, with its category
/// summed out. An item with no ratings contributes exactly zero.
pub fn item_log_marginal(spec: &ModelSpec, p: &ParamBlock, data: &RatingDataset, i: usize) -> f64 {
    if data.item_ratings(i).is_empty() {
        return 0.0;
    }
    let [l0, l1] = item_branches(spec, p, data, i);
    log_sum_exp(l0, l1)
}

/// Per-item log marginal likelihoods.
pub fn item_log_lik(spec: &ModelSpec, p: &ParamBlock, data: &RatingDataset) -> Vec<f64> {
    (0..data.num_items()).map(|i| item_log_marginal(spec, p, data, i)).collect()
}

pub fn log_likelihood(spec: &ModelSpec, p: &ParamBlock, data: &RatingDataset) -> f64 {
    (0..data.num_items()).map(|i| item_log_marginal(spec, p, data, i)).sum()
}

/// Posterior probability that each item's true category is 1.
pub fn category_posterior(spec: &ModelSpec, p: &ParamBlock, data: &RatingDataset) -> Vec<f64> {
    (0..data.num_items())
        .map(|i| {
            if data.item_ratings(i).is_empty() {
                return p.prevalence;
            }
            let [l0, l1] = item_branches(spec, p, data, i);
            (l1 - log_sum_exp(l0, l1)).exp()
        })
        .collect()
}

/// Leave-one-rating-out conditional predictive log density of every
/// rating: `log Σ_z Pr[z | θ, other ratings of the item] · p(y_n | z, θ)`.
pub fn pointwise_log_lik(spec: &ModelSpec, p: &ParamBlock, data: &RatingDataset) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for_each_pointwise(spec, p, data, 0..data.num_items(), |n, v| out[n] = v);
    out
}

/// Calls `f(n, value)` with the pointwise log likelihood of every rating of
/// the items in `items`, item by item.
pub fn for_each_pointwise<F>(spec: &ModelSpec, p: &ParamBlock, data: &RatingDataset, items: Range<usize>, mut f: F)
where
    F: FnMut(usize, f64),
{
    let mut terms: Vec<[f64; 2]> = Vec::new();
    for i in items {
        let members = data.item_ratings(i);
        if members.is_empty() {
            continue;
        }
        terms.clear();
        let mut full = [(1.0 - p.prevalence).ln(), p.prevalence.ln()];
        for &n in members {
            let (j, y) = (data.rater(n), data.rating(n));
            let t = [log_rating_prob(spec, p, i, j, false, y), log_rating_prob(spec, p, i, j, true, y)];
            full[0] += t[0];
            full[1] += t[1];
            terms.push(t);
        }
        let total = log_sum_exp(full[0], full[1]);
        for (&n, t) in members.iter().zip(&terms) {
            let rest = if members.len() == 1 {
                0.0
            } else {
                log_sum_exp(full[0] - t[0], full[1] - t[1])
            };
            f(n, total - rest);
        }
    }
}

/// Log prior density of constrained parameters (no Jacobian).
///
/// Tied abilities take the sensitivity prior.
pub fn log_prior(layout: &ParamLayout, p: &ParamBlock) -> f64 {
    let mut lp = beta22_lpdf(p.prevalence);
    lp += p
        .alpha_sens
        .iter()
        .map(|&a| normal_lpdf(a, PRIOR_SENS_MEAN, PRIOR_ABILITY_SD))
        .sum::<f64>();
    if !layout.spec.tied_sens_spec() {
        lp += p
            .alpha_spec
            .iter()
            .map(|&a| normal_lpdf(a, PRIOR_SPEC_MEAN, PRIOR_ABILITY_SD))
            .sum::<f64>();
    }
    lp += p.difficulty.iter().map(|&b| normal_lpdf(b, 0.0, PRIOR_DIFFICULTY_SD)).sum::<f64>();
    lp += p
        .discrimination
        .iter()
        .map(|&d| lognormal_lpdf(d, 0.0, PRIOR_LOG_DISCRIMINATION_SD))
        .sum::<f64>();
    lp += p.guessing.iter().map(|&l| beta22_lpdf(l)).sum::<f64>();
    lp
}

/// Log posterior density (up to the evidence) over unconstrained coordinates.
pub fn log_posterior(spec: &ModelSpec, u: &[f64], data: &RatingDataset) -> Result<f64> {
    RatingPosterior::new(*spec, data).log_density(u)
}

/// Gradient of [`log_posterior`] with respect to the unconstrained vector.
pub fn grad_log_posterior(spec: &ModelSpec, u: &[f64], data: &RatingDataset) -> Result<Vec<f64>> {
    let post = RatingPosterior::new(*spec, data);
    let mut grad = vec![0.0; u.len()];
    post.log_density_and_grad(u, &mut grad)?;
    Ok(grad)
}

/// Gradient of the log likelihood with respect to constrained parameters,
/// shaped like a [`ParamBlock`].
struct GradBlock {
    prevalence: f64,
    alpha_sens: Vec<f64>,
    alpha_spec: Vec<f64>,
    difficulty: Vec<f64>,
    discrimination: Vec<f64>,
    guessing: Vec<f64>,
}

impl GradBlock {
    fn zeros_like(p: &ParamBlock) -> Self {
        Self {
            prevalence: 0.0,
            alpha_sens: vec![0.0; p.alpha_sens.len()],
            alpha_spec: vec![0.0; p.alpha_spec.len()],
            difficulty: vec![0.0; p.difficulty.len()],
            discrimination: vec![0.0; p.discrimination.len()],
            guessing: vec![0.0; p.guessing.len()],
        }
    }
}

#[derive(Clone, Copy)]
struct RatingPartials {
    slot: usize,
    d_eta: [f64; 2],
    d_lambda: [f64; 2],
    gap: [f64; 2],
}

/// The marginalized posterior of one model on one dataset.
#[derive(Debug, Clone, Copy)]
pub struct RatingPosterior<'a> {
    layout: ParamLayout,
    data: &'a RatingDataset,
}

impl<'a> RatingPosterior<'a> {
    pub fn new(spec: ModelSpec, data: &'a RatingDataset) -> Self {
        Self { layout: ParamLayout::new(spec, data.num_items(), data.num_raters()), data }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn data(&self) -> &'a RatingDataset {
        self.data
    }

    pub fn log_density(&self, u: &[f64]) -> Result<f64> {
        let (p, log_jac) = self.layout.constrain(u)?;
        let lp = log_likelihood(&self.layout.spec, &p, self.data) + log_prior(&self.layout, &p) + log_jac;
        if lp.is_finite() {
            Ok(lp)
        } else {
            Err(Error::NonFinite("log posterior"))
        }
    }

    /// Log density plus its gradient, written into `grad`.
    pub fn log_density_and_grad(&self, u: &[f64], grad: &mut [f64]) -> Result<f64> {
        let layout = &self.layout;
        let spec = &layout.spec;
        if grad.len() != u.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), found: grad.len() });
        }
        let (p, log_jac) = layout.constrain(u)?;
        let (ll, mut g) = self.likelihood_and_grad(&p);
        let lp = ll + log_prior(layout, &p) + log_jac;
        if !lp.is_finite() {
            return Err(Error::NonFinite("log posterior"));
        }

        // Prior scores on the constrained scale.
        let pi = p.prevalence;
        g.prevalence += 1.0 / pi - 1.0 / (1.0 - pi);
        let var = PRIOR_ABILITY_SD * PRIOR_ABILITY_SD;
        for (gs, &a) in g.alpha_sens.iter_mut().zip(&p.alpha_sens) {
            *gs -= (a - PRIOR_SENS_MEAN) / var;
        }
        if !spec.tied_sens_spec() {
            for (gs, &a) in g.alpha_spec.iter_mut().zip(&p.alpha_spec) {
                *gs -= (a - PRIOR_SPEC_MEAN) / var;
            }
        }
        for (gb, &b) in g.difficulty.iter_mut().zip(&p.difficulty) {
            *gb -= b / (PRIOR_DIFFICULTY_SD * PRIOR_DIFFICULTY_SD);
        }
        for (gl, &l) in g.guessing.iter_mut().zip(&p.guessing) {
            *gl += 1.0 / l - 1.0 / (1.0 - l);
        }

        // Chain rule through the constraining transform plus Jacobian terms.
        grad[0] = g.prevalence * pi * (1.0 - pi) + (1.0 - 2.0 * pi);
        let slots = layout.ability_slots();
        let rb = &mut grad[1..];
        match (spec.tied_sens_spec(), spec.allow_adversarial()) {
            (true, adversarial) => {
                for k in 0..slots {
                    let g_alpha = g.alpha_sens[k] + g.alpha_spec[k];
                    rb[k] = if adversarial { g_alpha } else { g_alpha * p.alpha_sens[k] + 1.0 };
                }
            }
            (false, true) => {
                rb[..slots].copy_from_slice(&g.alpha_sens);
                rb[slots..2 * slots].copy_from_slice(&g.alpha_spec);
            }
            (false, false) => {
                for k in 0..slots {
                    let margin = p.alpha_sens[k] + p.alpha_spec[k];
                    rb[k] = g.alpha_spec[k] - g.alpha_sens[k];
                    rb[slots + k] = g.alpha_sens[k] * margin + 1.0;
                }
            }
        }
        let (ob, od, ol) = layout.item_offsets();
        let sd2 = PRIOR_LOG_DISCRIMINATION_SD * PRIOR_LOG_DISCRIMINATION_SD;
        if let Some(o) = ob {
            grad[o..o + g.difficulty.len()].copy_from_slice(&g.difficulty);
        }
        if let Some(o) = od {
            for (i, (&gd, &d)) in g.discrimination.iter().zip(&p.discrimination).enumerate() {
                // d/dv [lognormal(e^v) + v] = -v / sd²
                grad[o + i] = gd * d - u[o + i] / sd2;
            }
        }
        if let Some(o) = ol {
            for (i, (&gl, &l)) in g.guessing.iter().zip(&p.guessing).enumerate() {
                grad[o + i] = gl * l * (1.0 - l) + (1.0 - 2.0 * l);
            }
        }
        if grad.iter().all(|x| x.is_finite()) {
            Ok(lp)
        } else {
            Err(Error::NonFinite("gradient"))
        }
    }

    fn likelihood_and_grad(&self, p: &ParamBlock) -> (f64, GradBlock) {
        let spec = &self.layout.spec;
        let data = self.data;
        let slots = self.layout.ability_slots();
        let mut g = GradBlock::zeros_like(p);
        let mut scratch: Vec<RatingPartials> = Vec::new();
        let mut total = 0.0;
        let log_pi = [(1.0 - p.prevalence).ln(), p.prevalence.ln()];
        for i in 0..data.num_items() {
            let members = data.item_ratings(i);
            if members.is_empty() {
                continue;
            }
            scratch.clear();
            let guess = if spec.no_guessing() { None } else { Some(p.guessing[i]) };
            let beta = p.difficulty_of(i);
            let mut branch = log_pi;
            for &n in members {
                let (j, y) = (data.rater(n), data.rating(n));
                let slot = if slots == 1 { 0 } else { j };
                let mut partials = RatingPartials { slot, d_eta: [0.0; 2], d_lambda: [0.0; 2], gap: [0.0; 2] };
                for (zi, z) in [false, true].into_iter().enumerate() {
                    let alpha = if slots > 0 { p.ability(j, z) } else { 0.0 };
                    let gap = alpha - beta;
                    let eta = p.discrimination_of(i) * gap;
                    let t = rating_term(guess, eta, (y == 1) == z);
                    branch[zi] += t.logp;
                    partials.d_eta[zi] = t.d_eta;
                    partials.d_lambda[zi] = t.d_lambda;
                    partials.gap[zi] = gap;
                }
                scratch.push(partials);
            }
            let lse = log_sum_exp(branch[0], branch[1]);
            total += lse;
            let w = [(branch[0] - lse).exp(), (branch[1] - lse).exp()];
            g.prevalence += w[1] / p.prevalence - w[0] / (1.0 - p.prevalence);
            let delta = p.discrimination_of(i);
            for r in &scratch {
                for zi in 0..2 {
                    let de = w[zi] * r.d_eta[zi];
                    if slots > 0 {
                        let side = if zi == 1 { &mut g.alpha_sens } else { &mut g.alpha_spec };
                        side[r.slot] += de * delta;
                    }
                    if !spec.equal_difficulty() {
                        g.difficulty[i] -= de * delta;
                    }
                    if !spec.equal_discrimination() {
                        g.discrimination[i] += de * r.gap[zi];
                    }
                    if guess.is_some() {
                        g.guessing[i] += w[zi] * r.d_lambda[zi];
                    }
                }
            }
        }
        (total, g)
    }
}
