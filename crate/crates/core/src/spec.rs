//! The lattice of model reductions.
//!
//! Each of the five tags pins or ties one group of parameters:
//!
//! | tag | reduction                    |
//! |-----|------------------------------|
//! | A   | no guessing, `λ_i = 0`       |
//! | B   | equal discrimination, `δ_i = 1` |
//! | C   | equal difficulty, `β_i = 0`  |
//! | D   | tied sensitivity/specificity |
//! | E   | identical raters             |
//!
//! Of the 32 tag subsets, 18 are distinct identifiable models. Thirteen
//! subsets that contain `E` are redundant parameterizations and are
//! redirected to a canonical model; the subset `B` alone is not part of
//! the model family and is rejected.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

const A: u8 = 1;
const B: u8 = 2;
const C: u8 = 4;
const D: u8 = 8;
const E: u8 = 16;

/// Which family a distinct model belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum VariantGroup {
    TiedSensSpec,
    FreeSensSpec,
    NoRaterEffects,
}

/// One distinct rating model: a set of reductions plus the adversarial switch.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    tags: u8,
    allow_adversarial: bool,
}

/// Outcome of resolving an arbitrary tag string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolved {
    Distinct(ModelSpec),
    /// The requested tags are a redundant parameterization of `canonical`.
    Redirect { requested: String, canonical: ModelSpec },
}

impl Resolved {
    pub fn spec(&self) -> ModelSpec {
        match self {
            Resolved::Distinct(s) => *s,
            Resolved::Redirect { canonical, .. } => *canonical,
        }
    }

    pub fn is_redirect(&self) -> bool {
        matches!(self, Resolved::Redirect { .. })
    }
}

/// The 18 distinct models in the order of the published comparison table.
const TABLE_ORDER: [u8; 18] = [
    A | B | C | D | E,
    A | B | C | D,
    A | B | C | E,
    A | B | D | E,
    A | B | C,
    A | B | D,
    A | C | D,
    B | C | D,
    A | B,
    A | C,
    A | D,
    B | C,
    B | D,
    C | D,
    A,
    C,
    D,
    0,
];

fn is_distinct(tags: u8) -> bool {
    TABLE_ORDER.contains(&tags)
}

fn parse_tags(name: &str) -> Result<u8> {
    if name == "Full" || name == "full" {
        return Ok(0);
    }
    let mut tags = 0u8;
    for ch in name.chars() {
        let bit = match ch {
            'A' => A,
            'B' => B,
            'C' => C,
            'D' => D,
            'E' => E,
            other => return Err(Error::UnknownTag(other)),
        };
        if tags & bit != 0 {
            return Err(Error::DuplicateTag(ch));
        }
        tags |= bit;
    }
    Ok(tags)
}

fn tags_name(tags: u8) -> String {
    if tags == 0 {
        return String::from("Full");
    }
    ['A', 'B', 'C', 'D', 'E']
        .iter()
        .enumerate()
        .filter(|&(k, _)| tags & (1 << k) != 0)
        .map(|(_, &c)| c)
        .collect()
}

/// Canonical model for a redundant tag set.
///
/// With tied abilities and identical raters the correct-rating probability
/// is a free per-item number, which is exactly the item-only model ABDE.
/// Otherwise the nearest distinct model that nests the request is used
/// (drop `E`; `BE` has no B-only counterpart and goes to `Full`).
fn canonical_for(tags: u8) -> u8 {
    debug_assert!(tags & E != 0);
    if tags & D != 0 {
        return A | B | D | E;
    }
    let dropped = tags & !E;
    if is_distinct(dropped) {
        dropped
    } else {
        dropped & !B
    }
}

/// Resolves any subset of `{A, B, C, D, E}` (or `"Full"`).
pub fn canonicalize_redundant(tags: &str) -> Result<Resolved> {
    let bits = parse_tags(tags)?;
    if is_distinct(bits) {
        return Ok(Resolved::Distinct(ModelSpec { tags: bits, allow_adversarial: false }));
    }
    if bits & E != 0 {
        return Ok(Resolved::Redirect {
            requested: tags_name(bits),
            canonical: ModelSpec { tags: canonical_for(bits), allow_adversarial: false },
        });
    }
    // Only `B` remains: equal discrimination with free sens/spec is not in
    // the family; `Full` nests it.
    Err(Error::RedundantModel { requested: tags_name(bits), canonical: String::from("Full") })
}

/// All 18 distinct models in table order, with the adversarial constraint on.
pub fn enumerate_variants() -> Vec<ModelSpec> {
    TABLE_ORDER.iter().map(|&tags| ModelSpec { tags, allow_adversarial: false }).collect()
}

impl ModelSpec {
    /// Parses a distinct model name such as `"ABC"` or `"Full"`.
    ///
    /// Redundant tag sets are rejected with the canonical model they reduce to.
    pub fn parse(name: &str) -> Result<Self> {
        match canonicalize_redundant(name)? {
            Resolved::Distinct(spec) => Ok(spec),
            Resolved::Redirect { requested, canonical } => {
                Err(Error::RedundantModel { requested, canonical: canonical.name() })
            }
        }
    }

    pub fn full() -> Self {
        ModelSpec { tags: 0, allow_adversarial: false }
    }

    pub fn with_adversarial(mut self, allow: bool) -> Self {
        self.allow_adversarial = allow;
        self
    }

    pub fn name(&self) -> String {
        tags_name(self.tags)
    }

    /// Tag A: `λ_i = 0`.
    pub fn no_guessing(&self) -> bool {
        self.tags & A != 0
    }

    /// Tag B: `δ_i = 1`.
    pub fn equal_discrimination(&self) -> bool {
        self.tags & B != 0
    }

    /// Tag C: `β_i = 0`.
    pub fn equal_difficulty(&self) -> bool {
        self.tags & C != 0
    }

    /// Tag D: `α^sens = α^spec`.
    pub fn tied_sens_spec(&self) -> bool {
        self.tags & D != 0
    }

    /// Tag E: one ability (pair) shared by all raters.
    pub fn identical_raters(&self) -> bool {
        self.tags & E != 0
    }

    pub fn allow_adversarial(&self) -> bool {
        self.allow_adversarial
    }

    /// True only for ABDE, whose kernel has no rater parameters at all.
    pub fn has_rater_effects(&self) -> bool {
        !(self.tied_sens_spec() && self.identical_raters() && !self.equal_difficulty())
    }

    pub fn group(&self) -> VariantGroup {
        if !self.has_rater_effects() {
            VariantGroup::NoRaterEffects
        } else if self.tied_sens_spec() {
            VariantGroup::TiedSensSpec
        } else {
            VariantGroup::FreeSensSpec
        }
    }

    /// Name of the classical model this variant coincides with, if any.
    pub fn note(&self) -> Option<&'static str> {
        match self.tags {
            t if t == D => Some("IRT 3PL"),
            t if t == B | D => Some("IRT 2PL"),
            t if t == A | B | D => Some("IRT 1PL"),
            0 => Some("IRT 3PL + sens/spec"),
            t if t == A => Some("IRT 2PL + sens/spec"),
            t if t == A | B => Some("IRT 1PL + sens/spec"),
            t if t == A | B | C => Some("Dawid/Skene"),
            _ => None,
        }
    }
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModelSpec({}", self.name())?;
        if self.allow_adversarial {
            f.write_str(", adversarial")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl core::str::FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelSpec::parse(s)
    }
}
