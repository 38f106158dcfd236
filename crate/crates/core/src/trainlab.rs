//! Training a downstream logistic regression from probabilistic labels.
//!
//! Each trial draws correlated predictors and true coefficients, turns the
//! true probabilities into a training target with one of five strategies,
//! fits coefficients with a ridge estimator and with a Bayesian posterior
//! mean, and records the L2 distance to the truth.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std float methods shadow it when a dev-dependency links std
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Cholesky, Matrix};
use crate::math::{derive_seed as sub_seed, inv_logit, quantile_sorted};
use crate::sampler::{run_chains, LogDensity, SamplerConfig};

/// Predictors, true coefficients and true probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSet {
    pub x: Matrix,
    pub b: Vec<f64>,
    pub q: Vec<f64>,
}

/// Rows of `x` are zero-mean Gaussian with covariance `ρ^|m−n|`;
/// coefficients are standard normal.
pub fn gen_regression_set(dim: usize, rows: usize, rho: f64, seed: u64) -> Result<RegressionSet> {
    if dim == 0 || rows == 0 {
        return Err(Error::InvalidConfig("dimension and row count must be positive"));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidConfig("correlation must satisfy |rho| < 1"));
    }
    let sigma = Matrix::from_fn(dim, dim, |m, n| rho.powi((m as i32 - n as i32).abs()));
    let chol = Cholesky::new(&sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let mut data = Vec::with_capacity(rows * dim);
    for _ in 0..rows {
        let e: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        data.extend(chol.mul_lower(&e));
    }
    let x = Matrix::from_rows(rows, dim, data)?;
    let q = x.mul_vec(&b).into_iter().map(inv_logit).collect();
    Ok(RegressionSet { x, b, q })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Strategy {
    /// Outcome 1 exactly when `q > 1/2`.
    MaxProb,
    /// Linear regression on the exact log odds.
    LogOdds,
    /// Linear regression on the log odds plus standard normal noise.
    NoisyOdds,
    /// Outcome drawn as Bernoulli(q).
    Random,
    /// Each row twice: outcome 1 with weight q, outcome 0 with weight 1 − q.
    Weighted,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::MaxProb, Strategy::LogOdds, Strategy::NoisyOdds, Strategy::Random, Strategy::Weighted];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::MaxProb => "max_prob",
            Strategy::LogOdds => "log_odds",
            Strategy::NoisyOdds => "noisy_odds",
            Strategy::Random => "random",
            Strategy::Weighted => "weighted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Estimator {
    BayesMean,
    RidgeMle,
}

impl Estimator {
    pub const ALL: [Estimator; 2] = [Estimator::BayesMean, Estimator::RidgeMle];

    pub fn name(&self) -> &'static str {
        match self {
            Estimator::BayesMean => "bayes_mean",
            Estimator::RidgeMle => "ridge_mle",
        }
    }
}

/// A training set built from a [`RegressionSet`].
#[derive(Debug, Clone, PartialEq)]
pub enum TrainingData {
    /// Weighted binary outcomes; `x` may repeat rows of the source set.
    Binary { x: Matrix, y: Vec<u8>, w: Vec<f64> },
    /// Real-valued targets on the source predictors.
    Real { x: Matrix, t: Vec<f64> },
}

pub fn make_training_target(strategy: Strategy, set: &RegressionSet, seed: u64) -> TrainingData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = set.q.len();
    match strategy {
        Strategy::MaxProb => TrainingData::Binary {
            x: set.x.clone(),
            y: set.q.iter().map(|&q| u8::from(q > 0.5)).collect(),
            w: vec![1.0; n],
        },
        Strategy::Random => TrainingData::Binary {
            x: set.x.clone(),
            y: set.q.iter().map(|&q| u8::from(rng.random::<f64>() < q)).collect(),
            w: vec![1.0; n],
        },
        Strategy::Weighted => {
            let d = set.x.cols();
            let mut data = Vec::with_capacity(2 * n * d);
            let mut y = Vec::with_capacity(2 * n);
            let mut w = Vec::with_capacity(2 * n);
            for (i, &q) in set.q.iter().enumerate() {
                for (label, weight) in [(1u8, q), (0u8, 1.0 - q)] {
                    data.extend_from_slice(set.x.row(i));
                    y.push(label);
                    w.push(weight);
                }
            }
            TrainingData::Binary { x: Matrix::from_rows(2 * n, d, data).unwrap(), y, w }
        }
        Strategy::LogOdds => TrainingData::Real { x: set.x.clone(), t: set.x.mul_vec(&set.b) },
        Strategy::NoisyOdds => {
            let t = set.x.mul_vec(&set.b).into_iter().map(|v| v + rng.sample::<f64, _>(StandardNormal)).collect();
            TrainingData::Real { x: set.x.clone(), t }
        }
    }
}

/// Weighted binary outcomes with repeated consecutive rows merged: row
/// `i` contributes `pos[i] log s_i + neg[i] log(1 − s_i)`.
struct Logistic {
    x: Matrix,
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl Logistic {
    fn checked(x: &Matrix, y: &[u8], w: &[f64]) -> Result<Self> {
        if y.len() != x.rows() || w.len() != x.rows() {
            return Err(Error::DimensionMismatch { expected: x.rows(), found: y.len().min(w.len()) });
        }
        if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("weights must be finite and nonnegative"));
        }
        Ok(Self::new(x, y, w))
    }

    fn new(x: &Matrix, y: &[u8], w: &[f64]) -> Self {
        let d = x.cols();
        let mut data: Vec<f64> = Vec::with_capacity(x.rows() * d);
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for i in 0..x.rows() {
            let row = x.row(i);
            let repeat = !pos.is_empty() && data[data.len() - d..] == *row;
            if !repeat {
                data.extend_from_slice(row);
                pos.push(0.0);
                neg.push(0.0);
            }
            let k = pos.len() - 1;
            if y[i] == 1 {
                pos[k] += w[i];
            } else {
                neg[k] += w[i];
            }
        }
        let rows = pos.len();
        Self { x: Matrix::from_rows(rows, d, data).unwrap(), pos, neg }
    }

    /// Penalized log likelihood minus `½‖b‖²`, with its gradient.
    fn objective(&self, b: &[f64], grad: &mut [f64]) -> f64 {
        let mut f = -0.5 * dot(b, b);
        for (g, &bi) in grad.iter_mut().zip(b) {
            *g = -bi;
        }
        for i in 0..self.x.rows() {
            let (wp, wn) = (self.pos[i], self.neg[i]);
            if wp == 0.0 && wn == 0.0 {
                continue;
            }
            let row = self.x.row(i);
            let eta = dot(row, b);
            // log s = −log1p(e^−η), log(1 − s) = −log1p(e^η), from one exponential
            let e = (-eta.abs()).exp();
            let l = e.ln_1p();
            let (log_s, log_1ms, s) = if eta >= 0.0 {
                (-l, -l - eta, 1.0 / (1.0 + e))
            } else {
                (-l + eta, -l, e / (1.0 + e))
            };
            f += wp * log_s + wn * log_1ms;
            let r = wp - (wp + wn) * s;
            for (g, &xv) in grad.iter_mut().zip(row) {
                *g += r * xv;
            }
        }
        f
    }

    fn curvature(&self, b: &[f64]) -> Vec<f64> {
        (0..self.x.rows())
            .map(|i| {
                let s = inv_logit(dot(self.x.row(i), b));
                (self.pos[i] + self.neg[i]) * s * (1.0 - s)
            })
            .collect()
    }
}

const NEWTON_MAX_ITERS: usize = 100;
const NEWTON_TOL: f64 = 1e-8;

/// Ridge-penalized weighted logistic regression by damped Newton steps.
pub fn fit_ridge_logistic(x: &Matrix, y: &[u8], w: &[f64]) -> Result<Vec<f64>> {
    let problem = Logistic::checked(x, y, w)?;
    let d = x.cols();
    let mut b = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut trial_grad = vec![0.0; d];
    let mut f = problem.objective(&b, &mut grad);
    for _ in 0..NEWTON_MAX_ITERS {
        if norm(&grad) < NEWTON_TOL {
            return Ok(b);
        }
        let mut h = problem.x.gram(Some(&problem.curvature(&b)));
        h.add_diagonal(1.0);
        let step = Cholesky::new(&h)?.solve(&grad);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = b.iter().zip(&step).map(|(bi, si)| bi + t * si).collect();
            let fc = problem.objective(&cand, &mut trial_grad);
            // Near the optimum the objective change drops below rounding;
            // a smaller gradient is then the better progress measure.
            let flat = f - fc <= 1e-12 * (1.0 + f.abs()) && norm(&trial_grad) < norm(&grad);
            if fc >= f || flat || t < 1e-10 {
                b = cand;
                f = fc;
                grad.copy_from_slice(&trial_grad);
                break;
            }
            t *= 0.5;
        }
    }
    if norm(&grad) < NEWTON_TOL {
        return Ok(b);
    }
    Err(Error::NotConverged { iterations: NEWTON_MAX_ITERS, grad_norm: norm(&grad) })
}

/// Closed-form ridge regression `(XᵀX + I)⁻¹ Xᵀ t`.
pub fn fit_ridge_linear(x: &Matrix, t: &[f64]) -> Result<Vec<f64>> {
    if t.len() != x.rows() {
        return Err(Error::DimensionMismatch { expected: x.rows(), found: t.len() });
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression target"));
    }
    let mut a = x.gram(None);
    a.add_diagonal(1.0);
    Ok(Cholesky::new(&a)?.solve(&x.tmul_vec(t)))
}

/// The ridge objective is also the log posterior under a standard normal prior.
impl LogDensity for Logistic {
    fn dim(&self) -> usize {
        self.x.cols()
    }

    fn log_density_and_grad(&self, b: &[f64], grad: &mut [f64]) -> Result<f64> {
        Ok(self.objective(b, grad))
    }
}

/// Unit-variance Gaussian likelihood with a standard normal prior, from
/// sufficient statistics.
struct LinearPosterior {
    xtx: Matrix,
    xtt: Vec<f64>,
}

impl LogDensity for LinearPosterior {
    fn dim(&self) -> usize {
        self.xtt.len()
    }

    fn log_density_and_grad(&self, b: &[f64], grad: &mut [f64]) -> Result<f64> {
        // Up to a constant: -½ bᵀ(XᵀX + I)b + bᵀXᵀt
        let hb = self.xtx.mul_vec(b);
        let mut lp = 0.0;
        for k in 0..b.len() {
            let ab = hb[k] + b[k];
            grad[k] = self.xtt[k] - ab;
            lp += b[k] * (self.xtt[k] - 0.5 * ab);
        }
        Ok(lp)
    }
}

/// Posterior mean of the coefficients under a standard normal prior.
pub fn fit_bayes_mean(data: &TrainingData, config: &SamplerConfig) -> Result<Vec<f64>> {
    let draws = match data {
        TrainingData::Binary { x, y, w } => run_chains(&Logistic::checked(x, y, w)?, config)?,
        TrainingData::Real { x, t } => {
            let target = LinearPosterior { xtx: x.gram(None), xtt: x.tmul_vec(t) };
            run_chains(&target, config)?
        }
    };
    let mut mean = vec![0.0; draws.dim];
    for q in draws.iter() {
        for (m, v) in mean.iter_mut().zip(q) {
            *m += v;
        }
    }
    let n = draws.total() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

pub fn fit_ridge(data: &TrainingData) -> Result<Vec<f64>> {
    match data {
        TrainingData::Binary { x, y, w } => fit_ridge_logistic(x, y, w),
        TrainingData::Real { x, t } => fit_ridge_linear(x, t),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentConfig {
    pub trials: usize,
    pub dim: usize,
    pub rows: usize,
    pub rho: f64,
    pub seed: u64,
    /// Sampler settings of the Bayesian estimator; its seed is replaced per cell.
    pub sampler: SamplerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { trials: 32, dim: 32, rows: 1024, rho: 0.9, seed: 0, sampler: SamplerConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StrategyResult {
    pub trial: usize,
    pub trial_seed: u64,
    pub strategy: Strategy,
    pub estimator: Estimator,
    pub l2_error: f64,
}

/// Runs every strategy under both estimators for each trial. All
/// strategies of a trial share one regression set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<StrategyResult>> {
    if config.trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1"));
    }
    let mut out = Vec::with_capacity(config.trials * 10);
    for trial in 0..config.trials {
        let trial_seed = sub_seed(config.seed, &[trial as u64]);
        let set = gen_regression_set(config.dim, config.rows, config.rho, trial_seed)?;
        for (si, &strategy) in Strategy::ALL.iter().enumerate() {
            let data = make_training_target(strategy, &set, sub_seed(trial_seed, &[1, si as u64]));
            for (ei, &estimator) in Estimator::ALL.iter().enumerate() {
                let b_hat = match estimator {
                    Estimator::RidgeMle => fit_ridge(&data)?,
                    Estimator::BayesMean => {
                        let sampler = SamplerConfig {
                            seed: sub_seed(trial_seed, &[2, si as u64, ei as u64]),
                            ..config.sampler.clone()
                        };
                        fit_bayes_mean(&data, &sampler)?
                    }
                };
                let err: Vec<f64> = b_hat.iter().zip(&set.b).map(|(a, b)| a - b).collect();
                out.push(StrategyResult { trial, trial_seed, strategy, estimator, l2_error: norm(&err) });
            }
        }
    }
    Ok(out)
}

/// Median and quartiles of the L2 errors of one (strategy, estimator) cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub estimator: Estimator,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub fn summarize(results: &[StrategyResult]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &estimator in &Estimator::ALL {
        for &strategy in &Strategy::ALL {
            let mut errs: Vec<f64> = results
                .iter()
                .filter(|r| r.strategy == strategy && r.estimator == estimator)
                .map(|r| r.l2_error)
                .collect();
            if errs.is_empty() {
                continue;
            }
            errs.sort_by(f64::total_cmp);
            rows.push(SummaryRow {
                strategy,
                estimator,
                q1: quantile_sorted(&errs, 0.25),
                median: quantile_sorted(&errs, 0.5),
                q3: quantile_sorted(&errs, 0.75),
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_correlation_is_identity_covariance() {
        let set = gen_regression_set(3, 4, 0.0, 1).unwrap();
        assert_eq!(set.x.rows(), 4);
        let sigma = Matrix::from_fn(3, 3, |m, n| 0.0f64.powi((m as i32 - n as i32).abs()));
        assert_eq!(sigma, Matrix::identity(3));
    }

    #[test]
    fn max_prob_threshold() {
        let set = RegressionSet {
            x: Matrix::from_rows(3, 1, vec![1.0, 1.0, 1.0]).unwrap(),
            b: vec![0.0],
            q: vec![0.6329, 0.5, 0.2],
        };
        match make_training_target(Strategy::MaxProb, &set, 0) {
            TrainingData::Binary { y, .. } => assert_eq!(y, [1, 0, 0]),
            _ => panic!(),
        }
        match make_training_target(Strategy::Weighted, &set, 0) {
            TrainingData::Binary { y, w, x } => {
                assert_eq!(x.rows(), 6);
                assert_eq!(y, [1, 0, 1, 0, 1, 0]);
                for pair in w.chunks(2) {
                    assert!((pair[0] + pair[1] - 1.0).abs() < 1e-15);
                }
            }
            _ => panic!(),
        }
    }

    #[test]
    fn ridge_linear_identity_design() {
        let x = Matrix::identity(3);
        let b = fit_ridge_linear(&x, &[2.0, -4.0, 1.0]).unwrap();
        for (got, want) in b.iter().zip([1.0, -2.0, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn ridge_logistic_pure_penalty() {
        let x = Matrix::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(fit_ridge_logistic(&x, &[1, 0], &[0.0, 0.0]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn sub_seeds_differ() {
        assert_ne!(sub_seed(1, &[0]), sub_seed(1, &[1]));
        assert_ne!(sub_seed(1, &[2, 0, 1]), sub_seed(1, &[2, 1, 0]));
    }
}
