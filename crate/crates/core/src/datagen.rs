//! Forward simulation of rating data with controllable rater populations.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std float methods shadow it when a dev-dependency links std
use num_traits::Float;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal, Normal};

use crate::data::RatingDataset;
use crate::error::{Error, Result};
use crate::math::logit;
use crate::model::{
    rating_one_prob, PRIOR_ABILITY_SD, PRIOR_DIFFICULTY_SD, PRIOR_LOG_DISCRIMINATION_SD, PRIOR_SENS_MEAN,
    PRIOR_SPEC_MEAN,
};
use crate::params::ParamBlock;
use crate::spec::ModelSpec;

/// Log-odds ability of an expert on both sides (about 0.95 accuracy).
pub const EXPERT_ABILITY: f64 = 3.0;
/// Log-odds ability of an adversarial rater on both sides (about 0.18 accuracy).
pub const ADVERSARIAL_ABILITY: f64 = -1.5;

/// How one rater's abilities are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum RaterProfile {
    /// Drawn from the model prior (respecting the cooperative constraint
    /// unless the model allows adversarial raters).
    Prior,
    Explicit { alpha_sens: f64, alpha_spec: f64 },
    /// Says 1 with probability `response_rate` whatever the item, so
    /// sensitivity is the rate and specificity its complement
    /// (exactly so when difficulty is zero).
    Spam { response_rate: f64 },
    /// More likely wrong than right on both sides.
    Adversarial,
    /// Both accuracies above 0.9.
    Expert,
}

impl RaterProfile {
    fn draw<R: Rng>(&self, allow_adversarial: bool, tied: bool, rng: &mut R) -> (f64, f64) {
        match *self {
            RaterProfile::Prior => {
                let sens = Normal::new(PRIOR_SENS_MEAN, PRIOR_ABILITY_SD).unwrap();
                let spec = Normal::new(PRIOR_SPEC_MEAN, PRIOR_ABILITY_SD).unwrap();
                loop {
                    let s = sens.sample(rng);
                    let c = if tied { s } else { spec.sample(rng) };
                    if allow_adversarial || s + c > 0.0 {
                        return (s, c);
                    }
                }
            }
            RaterProfile::Explicit { alpha_sens, alpha_spec } => (alpha_sens, alpha_spec),
            RaterProfile::Spam { response_rate } => {
                let a = logit(response_rate);
                (a, -a)
            }
            RaterProfile::Adversarial => (ADVERSARIAL_ABILITY, ADVERSARIAL_ABILITY),
            RaterProfile::Expert => (EXPERT_ABILITY, EXPERT_ABILITY),
        }
    }
}

/// Source of one kind of item parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum ItemParam {
    Prior,
    Constant(f64),
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    /// One value per item.
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Missingness {
    /// Every rater rates every item.
    Complete,
    /// Each rater rates this many distinct items chosen uniformly at random.
    PerRaterBudget(usize),
}

/// Everything that determines a synthetic population.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub num_items: usize,
    pub num_raters: usize,
    /// `None` draws prevalence from its Beta(2, 2) prior.
    pub prevalence: Option<f64>,
    /// One profile per rater.
    pub raters: Vec<RaterProfile>,
    pub difficulty: ItemParam,
    pub discrimination: ItemParam,
    pub guessing: ItemParam,
    pub missingness: Missingness,
}

impl PopulationSpec {
    /// Complete design with every parameter drawn from the prior.
    pub fn from_prior(num_items: usize, num_raters: usize) -> Self {
        Self {
            num_items,
            num_raters,
            prevalence: None,
            raters: vec![RaterProfile::Prior; num_raters],
            difficulty: ItemParam::Prior,
            discrimination: ItemParam::Prior,
            guessing: ItemParam::Prior,
            missingness: Missingness::Complete,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.raters.len() != self.num_raters {
            return Err(Error::DimensionMismatch { expected: self.num_raters, found: self.raters.len() });
        }
        if let Some(pi) = self.prevalence {
            if !(0.0..=1.0).contains(&pi) {
                return Err(Error::InvalidConfig("prevalence must lie in [0, 1]"));
            }
        }
        for src in [&self.difficulty, &self.discrimination, &self.guessing] {
            if let ItemParam::Values(v) = src {
                if v.len() != self.num_items {
                    return Err(Error::DimensionMismatch { expected: self.num_items, found: v.len() });
                }
            }
        }
        if let Missingness::PerRaterBudget(b) = self.missingness {
            if b > self.num_items {
                return Err(Error::InvalidConfig("rating budget exceeds the number of items"));
            }
        }
        for r in &self.raters {
            if let RaterProfile::Spam { response_rate } = r {
                if !(*response_rate > 0.0 && *response_rate < 1.0) {
                    return Err(Error::InvalidConfig("spam response rate must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }
}

/// A simulated dataset with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub data: RatingDataset,
    pub params: ParamBlock,
    pub truth: Vec<u8>,
}

#[derive(Clone, Copy)]
enum Kind {
    Difficulty,
    Discrimination,
    Guessing,
}

fn draw_items<R: Rng>(src: &ItemParam, kind: Kind, n: usize, rng: &mut R) -> Vec<f64> {
    match src {
        ItemParam::Prior => match kind {
            Kind::Difficulty => {
                let d = Normal::new(0.0, PRIOR_DIFFICULTY_SD).unwrap();
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Kind::Discrimination => {
                let d = LogNormal::new(0.0, PRIOR_LOG_DISCRIMINATION_SD).unwrap();
                (0..n).map(|_| d.sample(rng)).collect()
            }
            Kind::Guessing => {
                let d = Beta::new(2.0, 2.0).unwrap();
                (0..n).map(|_| d.sample(rng)).collect()
            }
        },
        ItemParam::Constant(c) => vec![*c; n],
        ItemParam::Normal { mean, sd } => {
            let d = Normal::new(*mean, *sd).unwrap();
            (0..n).map(|_| d.sample(rng)).collect()
        }
        ItemParam::Uniform { lo, hi } => (0..n).map(|_| rng.random_range(*lo..*hi)).collect(),
        ItemParam::Values(v) => v.clone(),
    }
}

/// Draws parameters, true categories and ratings for `spec` from `pop`.
///
/// Parameter blocks follow the model's reductions: pinned blocks are
/// empty, tied models copy sensitivity into specificity, and identical
/// raters take the first rater's profile.
pub fn simulate_dataset(spec: ModelSpec, pop: &PopulationSpec, seed: u64) -> Result<Simulated> {
    pop.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prevalence = match pop.prevalence {
        Some(pi) => pi,
        None => Beta::new(2.0, 2.0).unwrap().sample(&mut rng),
    };

    let slots = if !spec.has_rater_effects() {
        0
    } else if spec.identical_raters() {
        1
    } else {
        pop.num_raters
    };
    let mut alpha_sens = Vec::with_capacity(slots);
    let mut alpha_spec = Vec::with_capacity(slots);
    for profile in pop.raters.iter().take(slots) {
        let (s, c) = profile.draw(spec.allow_adversarial(), spec.tied_sens_spec(), &mut rng);
        alpha_sens.push(s);
        alpha_spec.push(if spec.tied_sens_spec() { s } else { c });
    }

    let n = pop.num_items;
    let mut maybe = |active: bool, src: &ItemParam, kind| if active { draw_items(src, kind, n, &mut rng) } else { Vec::new() };
    let difficulty = maybe(!spec.equal_difficulty(), &pop.difficulty, Kind::Difficulty);
    let discrimination = maybe(!spec.equal_discrimination(), &pop.discrimination, Kind::Discrimination);
    let guessing = maybe(!spec.no_guessing(), &pop.guessing, Kind::Guessing);
    let params = ParamBlock { prevalence, alpha_sens, alpha_spec, difficulty, discrimination, guessing };

    let truth: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < prevalence)).collect();

    let mut cells: Vec<(usize, usize)> = match pop.missingness {
        Missingness::Complete => (0..n).flat_map(|i| (0..pop.num_raters).map(move |j| (i, j))).collect(),
        Missingness::PerRaterBudget(budget) => {
            let mut cells = Vec::with_capacity(budget * pop.num_raters);
            for j in 0..pop.num_raters {
                cells.extend(sample(&mut rng, n, budget).into_iter().map(|i| (i, j)));
            }
            cells.sort_unstable();
            cells
        }
    };
    let triples: Vec<(usize, usize, u8)> = cells
        .drain(..)
        .map(|(i, j)| {
            let p1 = rating_one_prob(&spec, &params, i, j, truth[i] == 1);
            (i, j, u8::from(rng.random::<f64>() < p1))
        })
        .collect();
    let data = RatingDataset::from_indices(n, pop.num_raters, &triples)?;
    Ok(Simulated { data, params, truth })
}

/// Replaces `count` randomly chosen raters with spam raters whose response
/// rates are uniform on `[0.1, 0.9]`.
pub fn inject_spam(pop: &PopulationSpec, count: usize, seed: u64) -> Result<PopulationSpec> {
    if count > pop.num_raters || pop.raters.len() != pop.num_raters {
        return Err(Error::InvalidConfig("cannot inject more spam raters than there are raters"));
    }
    let mut out = pop.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = sample(&mut rng, pop.num_raters, count).into_vec();
    chosen.sort_unstable();
    for j in chosen {
        out.raters[j] = RaterProfile::Spam { response_rate: rng.random_range(0.1..0.9) };
    }
    Ok(out)
}
