//! Fitting a rating model: sampler plus constrained draws plus diagnostics.

use alloc::vec::Vec;

use super::{run_chains, Diagnostics, Draws, SamplerConfig};
use crate::data::RatingDataset;
use crate::error::Result;
use crate::model::RatingPosterior;
use crate::params::{ParamBlock, ParamLayout};
use crate::spec::ModelSpec;

/// Posterior draws of one model, stored as constrained columns in
/// [`ParamLayout::column_names`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub layout: ParamLayout,
    pub draws: Draws,
    pub diagnostics: Diagnostics,
}

impl Fit {
    /// Wraps already-constrained draws (for instance reloaded from disk).
    pub fn from_constrained(layout: ParamLayout, draws: Draws, max_tree_depth: usize) -> Self {
        let diagnostics = Diagnostics::compute(&draws, &layout.column_names(), max_tree_depth);
        Self { layout, draws, diagnostics }
    }

    pub fn spec(&self) -> ModelSpec {
        self.layout.spec
    }

    /// Parameter block of draw `s` in chain-major order.
    pub fn param_block(&self, s: usize) -> Result<ParamBlock> {
        self.layout.from_columns(self.draws.flat(s))
    }

    pub fn param_blocks(&self) -> Result<Vec<ParamBlock>> {
        (0..self.draws.total()).map(|s| self.param_block(s)).collect()
    }
}

/// Samples the posterior of `spec` given `data`.
pub fn fit(spec: ModelSpec, data: &RatingDataset, config: &SamplerConfig) -> Result<Fit> {
    let target = RatingPosterior::new(spec, data);
    let layout = *target.layout();
    let mut draws = run_chains(&target, config)?;
    draws.map_in_place(|q| {
        let (p, _) = layout.constrain(q)?;
        q.copy_from_slice(&p.to_columns(&layout));
        Ok(())
    })?;
    Ok(Fit::from_constrained(layout, draws, config.max_tree_depth))
}
