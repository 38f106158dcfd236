//! Constrained parameters, their unconstrained image, and the bijection
//! between the two.
//!
//! Unconstrained layout, in order:
//!
//! 1. prevalence (`logit π`);
//! 2. the rater block, `r` = number of ability slots (`J`, or 1 for tag E,
//!    or 0 for ABDE):
//!    * free sens/spec, constrained: `r` × `α^spec`, then
//!      `r` × `log(α^sens + α^spec)`;
//!    * free sens/spec, adversarial allowed: `r` × `α^sens`, `r` × `α^spec`;
//!    * tied, constrained: `r` × `log α` (so `α^sens + α^spec = 2α > 0`);
//!    * tied, adversarial allowed: `r` × `α`;
//! 3. `I` × `β` when difficulty is free;
//! 4. `I` × `log δ` when discrimination is free;
//! 5. `I` × `logit λ` when guessing is free.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // std float methods shadow it when a dev-dependency links std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::{inv_logit, logit};
use crate::spec::ModelSpec;

/// Shape of the parameter vector for one model on one dataset size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub spec: ModelSpec,
    pub num_items: usize,
    pub num_raters: usize,
}

/// Model parameters on their natural scales.
///
/// Absent blocks are empty vectors: `difficulty` under tag C,
/// `discrimination` under B, `guessing` under A. With tied sens/spec the
/// two ability vectors hold the same values. With identical raters they
/// have length 1, and for ABDE they are empty.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamBlock {
    pub prevalence: f64,
    pub alpha_sens: Vec<f64>,
    pub alpha_spec: Vec<f64>,
    pub difficulty: Vec<f64>,
    pub discrimination: Vec<f64>,
    pub guessing: Vec<f64>,
}

impl ParamLayout {
    pub fn new(spec: ModelSpec, num_items: usize, num_raters: usize) -> Self {
        Self { spec, num_items, num_raters }
    }

    /// Number of distinct ability slots (per sens/spec side).
    pub fn ability_slots(&self) -> usize {
        if !self.spec.has_rater_effects() {
            0
        } else if self.spec.identical_raters() {
            1
        } else {
            self.num_raters
        }
    }

    fn rater_block_len(&self) -> usize {
        let slots = self.ability_slots();
        if self.spec.tied_sens_spec() {
            slots
        } else {
            2 * slots
        }
    }

    fn item_blocks(&self) -> usize {
        usize::from(!self.spec.equal_difficulty())
            + usize::from(!self.spec.equal_discrimination())
            + usize::from(!self.spec.no_guessing())
    }

    /// Dimension of the unconstrained vector.
    pub fn dimension(&self) -> usize {
        1 + self.rater_block_len() + self.item_blocks() * self.num_items
    }

    /// Offsets of the item blocks (β, δ, λ) in the unconstrained vector.
    pub(crate) fn item_offsets(&self) -> (Option<usize>, Option<usize>, Option<usize>) {
        let mut at = 1 + self.rater_block_len();
        let mut next = |active: bool| {
            if active {
                let o = at;
                at += self.num_items;
                Some(o)
            } else {
                None
            }
        };
        let beta = next(!self.spec.equal_difficulty());
        let delta = next(!self.spec.equal_discrimination());
        let lambda = next(!self.spec.no_guessing());
        (beta, delta, lambda)
    }

    /// Names of the constrained quantities, in [`ParamBlock::to_columns`] order.
    /// Indices are 1-based.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = alloc::vec![String::from("pi")];
        let slots = self.ability_slots();
        let suffix = |k: usize| if self.spec.identical_raters() { String::new() } else { format!("[{}]", k + 1) };
        if self.spec.tied_sens_spec() {
            names.extend((0..slots).map(|k| format!("alpha{}", suffix(k))));
        } else {
            names.extend((0..slots).map(|k| format!("alpha_sens{}", suffix(k))));
            names.extend((0..slots).map(|k| format!("alpha_spec{}", suffix(k))));
        }
        for (active, base) in [
            (!self.spec.equal_difficulty(), "beta"),
            (!self.spec.equal_discrimination(), "delta"),
            (!self.spec.no_guessing(), "lambda"),
        ] {
            if active {
                names.extend((0..self.num_items).map(|i| format!("{base}[{}]", i + 1)));
            }
        }
        names
    }

    /// Number of constrained columns; equals the unconstrained dimension.
    pub fn num_columns(&self) -> usize {
        self.dimension()
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        let expected = self.dimension();
        if found != expected {
            return Err(Error::DimensionMismatch { expected, found });
        }
        Ok(())
    }

    /// Maps an unconstrained vector to parameters, returning the log
    /// absolute Jacobian determinant of the transform.
    pub fn constrain(&self, u: &[f64]) -> Result<(ParamBlock, f64)> {
        self.check_dim(u.len())?;
        let mut log_jac = 0.0;
        let prevalence = inv_logit(u[0]);
        log_jac += prevalence.ln() + (1.0 - prevalence).ln();

        let slots = self.ability_slots();
        let rb = &u[1..1 + self.rater_block_len()];
        let (alpha_sens, alpha_spec) = match (self.spec.tied_sens_spec(), self.spec.allow_adversarial()) {
            (true, true) => (rb.to_vec(), rb.to_vec()),
            (true, false) => {
                log_jac += rb.iter().sum::<f64>();
                let a: Vec<f64> = rb.iter().map(|x| x.exp()).collect();
                (a.clone(), a)
            }
            (false, true) => (rb[..slots].to_vec(), rb[slots..].to_vec()),
            (false, false) => {
                let spec_side = rb[..slots].to_vec();
                let margin = &rb[slots..];
                log_jac += margin.iter().sum::<f64>();
                let sens_side = spec_side.iter().zip(margin).map(|(s, m)| -s + m.exp()).collect();
                (sens_side, spec_side)
            }
        };

        let (ob, od, ol) = self.item_offsets();
        let n = self.num_items;
        let difficulty = ob.map(|o| u[o..o + n].to_vec()).unwrap_or_default();
        let discrimination = od
            .map(|o| {
                log_jac += u[o..o + n].iter().sum::<f64>();
                u[o..o + n].iter().map(|x| x.exp()).collect()
            })
            .unwrap_or_default();
        let guessing: Vec<f64> = ol
            .map(|o| u[o..o + n].iter().map(|&x| inv_logit(x)).collect())
            .unwrap_or_default();
        log_jac += guessing.iter().map(|l| l.ln() + (1.0 - l).ln()).sum::<f64>();

        Ok((
            ParamBlock { prevalence, alpha_sens, alpha_spec, difficulty, discrimination, guessing },
            log_jac,
        ))
    }

    /// Inverse of [`constrain`](Self::constrain). The block must satisfy
    /// [`check`](Self::check).
    pub fn unconstrain(&self, p: &ParamBlock) -> Result<Vec<f64>> {
        self.check(p)?;
        let mut u = Vec::with_capacity(self.dimension());
        u.push(logit(p.prevalence));
        match (self.spec.tied_sens_spec(), self.spec.allow_adversarial()) {
            (true, true) => u.extend_from_slice(&p.alpha_sens),
            (true, false) => u.extend(p.alpha_sens.iter().map(|a| a.ln())),
            (false, true) => {
                u.extend_from_slice(&p.alpha_sens);
                u.extend_from_slice(&p.alpha_spec);
            }
            (false, false) => {
                u.extend_from_slice(&p.alpha_spec);
                u.extend(p.alpha_sens.iter().zip(&p.alpha_spec).map(|(s, c)| (s + c).ln()));
            }
        }
        u.extend_from_slice(&p.difficulty);
        u.extend(p.discrimination.iter().map(|d| d.ln()));
        u.extend(p.guessing.iter().map(|&l| logit(l)));
        Ok(u)
    }

    /// Checks block shapes and parameter ranges against this layout.
    pub fn check(&self, p: &ParamBlock) -> Result<()> {
        let slots = self.ability_slots();
        let n = self.num_items;
        let shapes = [
            (p.alpha_sens.len(), slots),
            (p.alpha_spec.len(), slots),
            (p.difficulty.len(), if self.spec.equal_difficulty() { 0 } else { n }),
            (p.discrimination.len(), if self.spec.equal_discrimination() { 0 } else { n }),
            (p.guessing.len(), if self.spec.no_guessing() { 0 } else { n }),
        ];
        for (found, expected) in shapes {
            if found != expected {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(p.prevalence) {
            return Err(Error::InvalidConfig("prevalence must lie in (0, 1)"));
        }
        if !p.guessing.iter().all(|&l| unit(l)) {
            return Err(Error::InvalidConfig("guessing must lie in (0, 1)"));
        }
        if !p.discrimination.iter().all(|&d| d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidConfig("discrimination must be positive"));
        }
        if self.spec.tied_sens_spec() && p.alpha_sens != p.alpha_spec {
            return Err(Error::InvalidConfig("tied model needs equal sensitivity and specificity"));
        }
        if !self.spec.allow_adversarial()
            && !p.alpha_sens.iter().zip(&p.alpha_spec).all(|(s, c)| s + c > 0.0)
        {
            return Err(Error::InvalidConfig("adversarial rater under the cooperative constraint"));
        }
        Ok(())
    }

    /// Rebuilds a block from constrained columns (see [`column_names`](Self::column_names)).
    pub fn from_columns(&self, cols: &[f64]) -> Result<ParamBlock> {
        self.check_dim(cols.len())?;
        let slots = self.ability_slots();
        let mut at = 1;
        let mut take = |len: usize| {
            let s = cols[at..at + len].to_vec();
            at += len;
            s
        };
        let (alpha_sens, alpha_spec) = if self.spec.tied_sens_spec() {
            let a = take(slots);
            (a.clone(), a)
        } else {
            (take(slots), take(slots))
        };
        let n = self.num_items;
        let difficulty = if self.spec.equal_difficulty() { Vec::new() } else { take(n) };
        let discrimination = if self.spec.equal_discrimination() { Vec::new() } else { take(n) };
        let guessing = if self.spec.no_guessing() { Vec::new() } else { take(n) };
        Ok(ParamBlock { prevalence: cols[0], alpha_sens, alpha_spec, difficulty, discrimination, guessing })
    }
}

impl ParamBlock {
    /// Flattens to constrained columns in layout order.
    pub fn to_columns(&self, layout: &ParamLayout) -> Vec<f64> {
        let mut out = Vec::with_capacity(layout.num_columns());
        out.push(self.prevalence);
        out.extend_from_slice(&self.alpha_sens);
        if !layout.spec.tied_sens_spec() {
            out.extend_from_slice(&self.alpha_spec);
        }
        out.extend_from_slice(&self.difficulty);
        out.extend_from_slice(&self.discrimination);
        out.extend_from_slice(&self.guessing);
        out
    }

    /// Log-odds ability used for rater `j` on an item whose true category is `z`.
    #[inline]
    pub fn ability(&self, j: usize, z: bool) -> f64 {
        let side = if z { &self.alpha_sens } else { &self.alpha_spec };
        match side.len() {
            0 => 0.0,
            1 => side[0],
            _ => side[j],
        }
    }

    #[inline]
    pub fn difficulty_of(&self, i: usize) -> f64 {
        self.difficulty.get(i).copied().unwrap_or(0.0)
    }

    #[inline]
    pub fn discrimination_of(&self, i: usize) -> f64 {
        self.discrimination.get(i).copied().unwrap_or(1.0)
    }

    #[inline]
    pub fn guessing_of(&self, i: usize) -> f64 {
        self.guessing.get(i).copied().unwrap_or(0.0)
    }
}

/// `param_dimension(spec, I, J)`: size of the unconstrained vector.
pub fn param_dimension(spec: ModelSpec, num_items: usize, num_raters: usize) -> usize {
    ParamLayout::new(spec, num_items, num_raters).dimension()
}
