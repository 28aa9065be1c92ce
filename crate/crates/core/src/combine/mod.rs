//! Combination operators for pairs of assignments: Dempster's rule, Yager's
//! conjunctive rule, and the weighted, reliability-discounted ER rule with
//! conflict-driven reliabilities.
//!
//! Only pairwise combination is exposed. The ER rule is not associative in
//! general, so folding more than two sources needs an ordering policy that
//! this crate does not pick.

pub(crate) mod kernel;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::evidence::{Bba, Fod, HypothesisSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CombineError {
    #[error("assignments are defined on different frames")]
    FodMismatch,
    #[error("total conflict (K = 1), Dempster normalization is undefined")]
    TotalConflict,
    #[error("ER normalizer is zero (full reliabilities under total conflict)")]
    DegenerateNormalizer,
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error(
        "weight {weight} and reliability {reliability} give a nonpositive discount denominator"
    )]
    InvalidParams { weight: f64, reliability: f64 },
}

fn unit_interval(name: &'static str, value: f64) -> Result<f64, CombineError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(CombineError::OutOfRange { name, value })
    }
}

/// Importance weight and reliability of one source of evidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    weight: f64,
    reliability: f64,
}

impl SourceParams {
    pub fn new(weight: f64, reliability: f64) -> Result<Self, CombineError> {
        unit_interval("weight", weight)?;
        unit_interval("reliability", reliability)?;
        if 1.0 + weight - reliability <= 0.0 {
            return Err(CombineError::InvalidParams {
                weight,
                reliability,
            });
        }
        Ok(Self {
            weight,
            reliability,
        })
    }

    /// Full weight and reliability; the ER rule then reduces to Dempster's.
    pub fn full() -> Self {
        Self {
            weight: 1.0,
            reliability: 1.0,
        }
    }

    pub(crate) fn trusted(weight: f64, reliability: f64) -> Self {
        Self {
            weight,
            reliability,
        }
    }

    pub fn weight(self) -> f64 {
        self.weight
    }

    pub fn reliability(self) -> f64 {
        self.reliability
    }

    /// `1 / (1 + w − r)`.
    pub fn discount_factor(self) -> f64 {
        1.0 / (1.0 + self.weight - self.reliability)
    }
}

/// Nonnegative masses on nonempty sets that need not sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct UnnormalizedAssignment {
    fod: Fod,
    focal: Vec<(u16, f64)>,
}

impl UnnormalizedAssignment {
    pub fn fod(&self) -> &Fod {
        &self.fod
    }

    pub fn mass(&self, set: HypothesisSet) -> f64 {
        self.focal
            .iter()
            .find(|(m, _)| *m == set.mask())
            .map_or(0.0, |e| e.1)
    }

    pub fn total(&self) -> f64 {
        self.focal.iter().map(|e| e.1).sum()
    }

    pub fn focal_elements(&self) -> impl Iterator<Item = (HypothesisSet, f64)> + '_ {
        let id = self.fod.id();
        self.focal
            .iter()
            .map(move |&(m, v)| (HypothesisSet::from_mask_unchecked(m, id), v))
    }
}

fn same_frame(m1: &Bba, m2: &Bba) -> Result<(), CombineError> {
    if m1.fod().id() == m2.fod().id() {
        Ok(())
    } else {
        Err(CombineError::FodMismatch)
    }
}

pub fn conflict_mass(m1: &Bba, m2: &Bba) -> Result<f64, CombineError> {
    same_frame(m1, m2)?;
    Ok(kernel::conflict(m1.raw(), m2.raw()))
}

pub fn dempster(m1: &Bba, m2: &Bba) -> Result<Bba, CombineError> {
    same_frame(m1, m2)?;
    let mut out = kernel::Focal::new();
    kernel::dempster(m1.raw(), m2.raw(), &mut out)?;
    Ok(Bba::from_sorted_unchecked(m1.fod(), out.into_vec()))
}

/// Yager's rule: conjunctive combination with the conflict moved to `Ω`.
pub fn conjunctive_yager(m1: &Bba, m2: &Bba) -> Result<Bba, CombineError> {
    same_frame(m1, m2)?;
    let mut out = kernel::Focal::new();
    kernel::yager(m1.raw(), m2.raw(), m1.fod().omega().mask(), &mut out);
    Ok(Bba::from_sorted_unchecked(m1.fod(), out.into_vec()))
}

/// Scales every focal mass by `1 / (1 + w − r)`.
pub fn discount(m: &Bba, params: SourceParams) -> UnnormalizedAssignment {
    let denom = 1.0 + params.weight - params.reliability;
    UnnormalizedAssignment {
        fod: m.fod().clone(),
        focal: m.raw().iter().map(|&(s, v)| (s, v / denom)).collect(),
    }
}

pub fn er_combine(
    m1: &Bba,
    p1: SourceParams,
    m2: &Bba,
    p2: SourceParams,
) -> Result<Bba, CombineError> {
    same_frame(m1, m2)?;
    let mut out = kernel::Focal::new();
    kernel::er(m1.raw(), p1, m2.raw(), p2, &mut out)?;
    Ok(Bba::from_sorted_unchecked(m1.fod(), out.into_vec()))
}

/// `r = 1 − (1 − b) K`: full reliability without conflict, the credibility
/// `b` under total conflict.
pub fn reliability_from_conflict(conflict: f64, credibility: f64) -> Result<f64, CombineError> {
    unit_interval("conflict", conflict)?;
    unit_interval("credibility", credibility)?;
    Ok(kernel::reliability(conflict, credibility))
}

/// ER combination with unit weights and reliabilities derived from the
/// conflict between `m1` and `m2`.
pub fn er_combine_adaptive(m1: &Bba, b1: f64, m2: &Bba, b2: f64) -> Result<Bba, CombineError> {
    let k = conflict_mass(m1, m2)?;
    let p1 = SourceParams::new(1.0, reliability_from_conflict(k, b1)?)?;
    let p2 = SourceParams::new(1.0, reliability_from_conflict(k, b2)?)?;
    er_combine(m1, p1, m2, p2)
}

/// Rule selector for grid fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinationRule {
    Dempster,
    Yager,
    ErAdaptive,
}

impl CombinationRule {
    /// Combines under this rule. Credibilities are ignored except by
    /// [`CombinationRule::ErAdaptive`].
    pub fn combine(self, m1: &Bba, b1: f64, m2: &Bba, b2: f64) -> Result<Bba, CombineError> {
        match self {
            Self::Dempster => dempster(m1, m2),
            Self::Yager => conjunctive_yager(m1, m2),
            Self::ErAdaptive => er_combine_adaptive(m1, b1, m2, b2),
        }
    }

    pub(crate) fn combine_raw(
        self,
        a: &[(u16, f64)],
        b1: f64,
        b: &[(u16, f64)],
        b2: f64,
        omega: u16,
        out: &mut kernel::Focal,
    ) -> Result<(), CombineError> {
        match self {
            Self::Dempster => kernel::dempster(a, b, out),
            Self::Yager => {
                kernel::yager(a, b, omega, out);
                Ok(())
            }
            Self::ErAdaptive => kernel::er_adaptive(a, b1, b, b2, out),
        }
    }
}

impl fmt::Display for CombinationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dempster => "dempster",
            Self::Yager => "yager",
            Self::ErAdaptive => "er",
        })
    }
}

impl FromStr for CombinationRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dempster" => Ok(Self::Dempster),
            "yager" => Ok(Self::Yager),
            "er" | "er_adaptive" => Ok(Self::ErAdaptive),
            other => Err(format!("unknown rule `{other}`")),
        }
    }
}
