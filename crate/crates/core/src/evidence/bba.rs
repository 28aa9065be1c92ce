use std::fmt;

use super::{EvidenceError, Fod, HypothesisSet};

/// Tolerance on `|Σm − 1|` for a valid assignment.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A normalized basic belief assignment.
///
/// Only focal elements (nonzero masses) are stored, sorted by mask. The
/// empty set never carries mass.
#[derive(Clone, PartialEq)]
pub struct Bba {
    fod: Fod,
    focal: Vec<(u16, f64)>,
}

impl Bba {
    /// Builds an assignment, validating it. Repeated sets accumulate;
    /// zero masses are dropped. Masses are never rescaled.
    pub fn new<I>(fod: &Fod, assignments: I) -> Result<Self, EvidenceError>
    where
        I: IntoIterator<Item = (HypothesisSet, f64)>,
    {
        let mut focal: Vec<(u16, f64)> = Vec::new();
        for (set, mass) in assignments {
            if set.fod_id() != fod.id() {
                return Err(EvidenceError::ForeignSet);
            }
            if mass.is_nan() || mass.is_infinite() {
                return Err(EvidenceError::NonFiniteMass);
            }
            if mass < 0.0 {
                return Err(EvidenceError::NegativeMass(mass));
            }
            if mass == 0.0 {
                continue;
            }
            if set.is_empty() {
                return Err(EvidenceError::EmptySetMass(mass));
            }
            match focal.iter_mut().find(|(m, _)| *m == set.mask()) {
                Some(entry) => entry.1 += mass,
                None => focal.push((set.mask(), mass)),
            }
        }
        let sum: f64 = focal.iter().map(|&(_, m)| m).sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(EvidenceError::NotNormalized(sum));
        }
        focal.sort_unstable_by_key(|&(m, _)| m);
        Ok(Self {
            fod: fod.clone(),
            focal,
        })
    }

    /// Total ignorance: `m(Ω) = 1`.
    pub fn vacuous(fod: &Fod) -> Self {
        Self {
            fod: fod.clone(),
            focal: vec![(fod.omega().mask(), 1.0)],
        }
    }

    /// All mass on `set`.
    pub fn certain(fod: &Fod, set: HypothesisSet) -> Result<Self, EvidenceError> {
        Self::new(fod, [(set, 1.0)])
    }

    /// Wraps kernel output. Entries must be sorted, nonzero, and non-empty.
    pub(crate) fn from_sorted_unchecked(fod: &Fod, focal: Vec<(u16, f64)>) -> Self {
        debug_assert!(focal.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(focal.iter().all(|&(m, v)| m != 0 && v > 0.0));
        debug_assert!(
            (focal.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() <= NORMALIZATION_TOLERANCE,
            "kernel produced an unnormalized assignment"
        );
        Self {
            fod: fod.clone(),
            focal,
        }
    }

    pub fn fod(&self) -> &Fod {
        &self.fod
    }

    pub fn mass(&self, set: HypothesisSet) -> f64 {
        if set.fod_id() != self.fod.id() {
            return 0.0;
        }
        self.mass_of_mask(set.mask())
    }

    pub(crate) fn mass_of_mask(&self, mask: u16) -> f64 {
        self.focal
            .binary_search_by_key(&mask, |&(m, _)| m)
            .map(|i| self.focal[i].1)
            .unwrap_or(0.0)
    }

    /// Number of focal elements.
    pub fn len(&self) -> usize {
        self.focal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.focal.is_empty()
    }

    pub fn is_vacuous(&self) -> bool {
        self.focal.len() == 1 && self.focal[0].0 == self.fod.omega().mask()
    }

    pub fn focal_elements(&self) -> impl Iterator<Item = (HypothesisSet, f64)> + '_ {
        let id = self.fod.id();
        self.focal
            .iter()
            .map(move |&(m, v)| (HypothesisSet::from_mask_unchecked(m, id), v))
    }

    pub(crate) fn raw(&self) -> &[(u16, f64)] {
        &self.focal
    }
}

impl fmt::Debug for Bba {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for (set, mass) in self.focal_elements() {
            map.entry(&self.fod.label(set, ","), &mass);
        }
        map.finish()
    }
}
