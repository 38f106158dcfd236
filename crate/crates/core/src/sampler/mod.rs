//! Adaptive Hamiltonian Monte Carlo.
//!
//! The default transition is the multinomial no-U-turn sampler with the
//! generalized U-turn criterion and a diagonal inverse metric. Warmup runs
//! dual-averaging step size adaptation and estimates the metric from
//! doubling windows of warmup draws, then both are frozen.

mod adapt;
pub mod diagnostics;
mod fit;
mod nuts;

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::RatingPosterior;

pub use diagnostics::{ess_bulk, split_rhat, Diagnostics, ParamDiagnostics};
pub use fit::{fit, Fit};

/// A differentiable log density on `R^dim`.
pub trait LogDensity {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log density. An
    /// error or non-finite value marks the point as outside the support.
    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64>;
}

impl LogDensity for RatingPosterior<'_> {
    fn dim(&self) -> usize {
        self.layout().dimension()
    }

    fn log_density_and_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        RatingPosterior::log_density_and_grad(self, x, grad)
    }
}

/// Transition kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Algorithm {
    Nuts,
    /// Fixed number of leapfrog steps with a Metropolis correction.
    StaticHmc { steps: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup_iters: usize,
    pub sampling_iters: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub init_radius: f64,
    pub algorithm: Algorithm,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup_iters: 1000,
            sampling_iters: 1000,
            seed: 0,
            target_accept: 0.8,
            max_tree_depth: 10,
            init_radius: 2.0,
            algorithm: Algorithm::Nuts,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::InvalidConfig("chains must be at least 1"));
        }
        if self.sampling_iters == 0 {
            return Err(Error::InvalidConfig("sampling_iters must be at least 1"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidConfig("target_accept must lie in (0, 1)"));
        }
        if self.max_tree_depth == 0 {
            return Err(Error::InvalidConfig("max_tree_depth must be at least 1"));
        }
        if !(self.init_radius >= 0.0 && self.init_radius.is_finite()) {
            return Err(Error::InvalidConfig("init_radius must be finite and nonnegative"));
        }
        if let Algorithm::StaticHmc { steps: 0 } = self.algorithm {
            return Err(Error::InvalidConfig("static HMC needs at least one leapfrog step"));
        }
        Ok(())
    }
}

/// Per-draw sampler statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DrawStats {
    pub lp: f64,
    pub accept_stat: f64,
    pub step_size: f64,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
    pub energy: f64,
}

/// Adapted tuning parameters of one chain.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Adaptation {
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
}

/// Post-warmup draws of all chains, stored `[chain][iter][dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub num_chains: usize,
    pub num_samples: usize,
    pub dim: usize,
    values: Vec<f64>,
    pub stats: Vec<DrawStats>,
    pub adaptation: Vec<Adaptation>,
    pub warmup_divergences: usize,
}

impl Draws {
    /// Assembles draws from raw parts, checking the shape.
    pub fn from_parts(
        num_chains: usize,
        num_samples: usize,
        dim: usize,
        values: Vec<f64>,
        stats: Vec<DrawStats>,
    ) -> Result<Self> {
        let expected = num_chains * num_samples * dim;
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: values.len() });
        }
        if stats.len() != num_chains * num_samples {
            return Err(Error::DimensionMismatch { expected: num_chains * num_samples, found: stats.len() });
        }
        Ok(Self { num_chains, num_samples, dim, values, stats, adaptation: Vec::new(), warmup_divergences: 0 })
    }

    pub fn total(&self) -> usize {
        self.num_chains * self.num_samples
    }

    pub fn draw(&self, chain: usize, iter: usize) -> &[f64] {
        let at = (chain * self.num_samples + iter) * self.dim;
        &self.values[at..at + self.dim]
    }

    /// Draw `s` in chain-major order, `0 <= s < total()`.
    pub fn flat(&self, s: usize) -> &[f64] {
        &self.values[s * self.dim..(s + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim.max(1)).take(self.total())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stat(&self, chain: usize, iter: usize) -> &DrawStats {
        &self.stats[chain * self.num_samples + iter]
    }

    /// One coordinate, split by chain.
    pub fn column(&self, d: usize) -> Vec<Vec<f64>> {
        (0..self.num_chains)
            .map(|c| (0..self.num_samples).map(|t| self.draw(c, t)[d]).collect())
            .collect()
    }

    pub fn divergences(&self) -> usize {
        self.stats.iter().filter(|s| s.divergent).count()
    }

    /// Applies `f` to every draw in place (used to map to constrained space).
    pub fn map_in_place<F>(&mut self, mut f: F) -> Result<()>
    where
        F: FnMut(&mut [f64]) -> Result<()>,
    {
        if self.dim == 0 {
            return Ok(());
        }
        for chunk in self.values.chunks_exact_mut(self.dim) {
            f(chunk)?;
        }
        Ok(())
    }
}

/// Random generator of one chain: the seed picks the key, the chain index
/// picks the stream, so chains never share randomness.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

const MAX_INIT_ATTEMPTS: usize = 100;

fn initialize<T: LogDensity, R: Rng>(target: &T, radius: f64, rng: &mut R) -> Result<nuts::Point> {
    let dim = target.dim();
    let mut grad = alloc::vec![0.0; dim];
    for _ in 0..MAX_INIT_ATTEMPTS {
        let q: Vec<f64> = (0..dim).map(|_| radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
        if let Ok(lp) = target.log_density_and_grad(&q, &mut grad) {
            if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
                return Ok(nuts::Point::new(q, grad.clone(), lp));
            }
        }
    }
    Err(Error::InitializationFailed { attempts: MAX_INIT_ATTEMPTS })
}

/// Runs every chain to completion and collects post-warmup draws.
///
/// Chains run one after another; the result depends only on the target,
/// the configuration and the seed.
pub fn run_chains<T: LogDensity>(target: &T, config: &SamplerConfig) -> Result<Draws> {
    config.validate()?;
    let dim = target.dim();
    let per_chain = config.sampling_iters;
    let mut values = Vec::with_capacity(config.chains * per_chain * dim);
    let mut stats = Vec::with_capacity(config.chains * per_chain);
    let mut adaptation = Vec::with_capacity(config.chains);
    let mut warmup_divergences = 0;
    for chain in 0..config.chains {
        let mut rng = chain_rng(config.seed, chain);
        let mut z = initialize(target, config.init_radius, &mut rng)?;
        let mut sampler = nuts::Sampler::new(target, config);
        sampler.init_step_size(&mut z, &mut rng)?;
        let mut adapter = adapt::WindowedAdapter::new(config.warmup_iters, dim, config.target_accept);
        adapter.set_mu(sampler.step_size);
        for _ in 0..config.warmup_iters {
            let info = sampler.transition(&mut z, &mut rng);
            warmup_divergences += usize::from(info.divergent);
            sampler.step_size = adapter.learn_step_size(info.accept_stat);
            if adapter.learn_variance(&mut sampler.inv_metric, &z.q) {
                sampler.init_step_size(&mut z, &mut rng)?;
                adapter.set_mu(sampler.step_size);
            }
        }
        if config.warmup_iters > 0 {
            if let Some(eps) = adapter.final_step_size() {
                sampler.step_size = eps;
            }
        }
        for _ in 0..per_chain {
            let info = sampler.transition(&mut z, &mut rng);
            values.extend_from_slice(&z.q);
            stats.push(DrawStats {
                lp: z.lp,
                accept_stat: info.accept_stat,
                step_size: sampler.step_size,
                tree_depth: info.depth,
                n_leapfrog: info.n_leapfrog,
                divergent: info.divergent,
                energy: info.energy,
            });
        }
        adaptation.push(Adaptation { step_size: sampler.step_size, inv_metric: sampler.inv_metric.clone() });
    }
    let mut draws = Draws::from_parts(config.chains, per_chain, dim, values, stats)?;
    draws.adaptation = adaptation;
    draws.warmup_divergences = warmup_divergences;
    Ok(draws)
}
