//! Frame-of-discernment algebra, basic belief assignments, and the
//! pignistic and Deng uncertainty measures built on them.

mod bba;
mod fod;
mod measures;

pub use bba::{Bba, NORMALIZATION_TOLERANCE};
pub use fod::{Fod, FodId, HypothesisSet, MAX_FOD_SIZE};
pub use measures::{
    deng_measures, max_deng_entropy, max_nonspecificity, pignistic, UncertaintyTriple,
};

pub(crate) use measures::deng_of;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvidenceError {
    #[error("frame of discernment needs at least one hypothesis")]
    EmptyFod,
    #[error("frame of discernment has {0} hypotheses, at most 16 are supported")]
    FodTooLarge(usize),
    #[error("hypothesis names must be nonempty")]
    EmptyName,
    #[error("duplicate hypothesis name `{0}`")]
    DuplicateName(String),
    #[error("unknown hypothesis `{0}`")]
    UnknownHypothesis(String),
    #[error("mask {0:#06x} has bits outside the frame")]
    MaskOutOfRange(u16),
    #[error("empty set carries mass {0}")]
    EmptySetMass(f64),
    #[error("masses sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("hypothesis set belongs to a different frame")]
    ForeignSet,
    #[error("negative mass {0}")]
    NegativeMass(f64),
    #[error("mass is not a finite number")]
    NonFiniteMass,
}
