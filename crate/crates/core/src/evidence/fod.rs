//! Frames of discernment and subsets encoded as 16-bit masks.

use std::fmt;
use std::sync::Arc;

use super::EvidenceError;

/// Largest supported frame size. Every subset fits in a `u16` mask.
pub const MAX_FOD_SIZE: usize = 16;

/// Identity token of a [`Fod`].
///
/// Two frames built from the same ordered name list share an id, so maps
/// loaded from disk interoperate with frames constructed in code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FodId {
    tag: u64,
    size: u8,
}

impl FodId {
    fn of(names: &[String]) -> Self {
        // FNV-1a over the NUL-separated names.
        let mut tag: u64 = 0xcbf2_9ce4_8422_2325;
        for name in names {
            for byte in name.bytes().chain(std::iter::once(0)) {
                tag ^= u64::from(byte);
                tag = tag.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        Self {
            tag,
            size: names.len() as u8,
        }
    }

    pub fn size(self) -> usize {
        usize::from(self.size)
    }

    fn omega_mask(self) -> u16 {
        if self.size as usize == MAX_FOD_SIZE {
            u16::MAX
        } else {
            (1u16 << self.size) - 1
        }
    }
}

#[derive(Debug)]
struct FodInner {
    names: Vec<String>,
    id: FodId,
}

/// An ordered frame of discernment: singleton `i` is named `names()[i]`.
///
/// Cloning is cheap; the name list is shared.
#[derive(Clone)]
pub struct Fod {
    inner: Arc<FodInner>,
}

impl Fod {
    pub fn new<I, S>(names: I) -> Result<Self, EvidenceError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(EvidenceError::EmptyFod);
        }
        if names.len() > MAX_FOD_SIZE {
            return Err(EvidenceError::FodTooLarge(names.len()));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(EvidenceError::EmptyName);
            }
            if names[..i].contains(name) {
                return Err(EvidenceError::DuplicateName(name.clone()));
            }
        }
        let id = FodId::of(&names);
        Ok(Self {
            inner: Arc::new(FodInner { names, id }),
        })
    }

    /// The occupancy frame `{c, cy, p, om, nm, f, v}`.
    ///
    /// `om` names "other mobile object"; some texts abbreviate it as `m`.
    pub fn occupancy() -> Self {
        Self::new(OCCUPANCY_NAMES).expect("occupancy frame is valid")
    }

    pub fn id(&self) -> FodId {
        self.inner.id
    }

    pub fn size(&self) -> usize {
        self.inner.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.inner.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.inner.names.iter().position(|n| n == name)
    }

    pub fn empty(&self) -> HypothesisSet {
        HypothesisSet::from_mask_unchecked(0, self.id())
    }

    pub fn omega(&self) -> HypothesisSet {
        HypothesisSet::from_mask_unchecked(self.id().omega_mask(), self.id())
    }

    /// Singleton `{names()[index]}`.
    pub fn singleton(&self, index: usize) -> HypothesisSet {
        assert!(index < self.size(), "singleton index {index} out of range");
        HypothesisSet::from_mask_unchecked(1 << index, self.id())
    }

    pub fn singletons(&self) -> impl Iterator<Item = HypothesisSet> + '_ {
        (0..self.size()).map(|i| self.singleton(i))
    }

    pub fn set_from_mask(&self, mask: u16) -> Result<HypothesisSet, EvidenceError> {
        if mask & !self.id().omega_mask() != 0 {
            return Err(EvidenceError::MaskOutOfRange(mask));
        }
        Ok(HypothesisSet::from_mask_unchecked(mask, self.id()))
    }

    pub fn set_from_names<I, S>(&self, names: I) -> Result<HypothesisSet, EvidenceError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut mask = 0u16;
        for name in names {
            let name = name.as_ref();
            let index = self
                .index_of(name)
                .ok_or_else(|| EvidenceError::UnknownHypothesis(name.to_string()))?;
            mask |= 1 << index;
        }
        Ok(HypothesisSet::from_mask_unchecked(mask, self.id()))
    }

    /// Parses comma-joined singleton names such as `"c,cy,p"`.
    /// `"omega"` names the full frame.
    pub fn parse_set(&self, text: &str) -> Result<HypothesisSet, EvidenceError> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("omega") && self.index_of(text).is_none() {
            return Ok(self.omega());
        }
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(EvidenceError::UnknownHypothesis(text.to_string()));
        }
        self.set_from_names(parts)
    }

    /// Singleton names of `set`, in frame order.
    pub fn members(&self, set: HypothesisSet) -> Vec<&str> {
        set.indices()
            .map(|i| self.inner.names[i].as_str())
            .collect()
    }

    /// Name joined with `sep`; the full frame renders as `omega` and the
    /// empty set as `empty`.
    pub fn label(&self, set: HypothesisSet, sep: &str) -> String {
        if set.is_empty() {
            "empty".to_string()
        } else if set == self.omega() {
            "omega".to_string()
        } else {
            self.members(set).join(sep)
        }
    }
}

impl PartialEq for Fod {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.names == other.inner.names
    }
}

impl Eq for Fod {}

impl fmt::Debug for Fod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Fod").field(&self.inner.names).finish()
    }
}

const OCCUPANCY_NAMES: [&str; 7] = ["c", "cy", "p", "om", "nm", "f", "v"];

/// A subset of a frame of discernment.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct HypothesisSet {
    mask: u16,
    fod: FodId,
}

impl HypothesisSet {
    pub(crate) fn from_mask_unchecked(mask: u16, fod: FodId) -> Self {
        Self { mask, fod }
    }

    pub fn mask(self) -> u16 {
        self.mask
    }

    pub fn fod_id(self) -> FodId {
        self.fod
    }

    pub fn len(self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.mask == 0
    }

    pub fn is_omega(self) -> bool {
        self.mask == self.fod.omega_mask()
    }

    pub fn is_singleton(self) -> bool {
        self.mask.count_ones() == 1
    }

    pub fn contains(self, index: usize) -> bool {
        index < 16 && self.mask & (1 << index) != 0
    }

    fn same_frame(self, other: Self) {
        assert_eq!(self.fod, other.fod, "hypothesis sets from different frames");
    }

    pub fn intersection(self, other: Self) -> Self {
        self.same_frame(other);
        Self::from_mask_unchecked(self.mask & other.mask, self.fod)
    }

    pub fn union(self, other: Self) -> Self {
        self.same_frame(other);
        Self::from_mask_unchecked(self.mask | other.mask, self.fod)
    }

    pub fn complement(self) -> Self {
        Self::from_mask_unchecked(!self.mask & self.fod.omega_mask(), self.fod)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.same_frame(other);
        self.mask & !other.mask == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.same_frame(other);
        self.mask & other.mask == 0
    }

    /// Member singleton indices in increasing order.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..16).filter(move |i| self.mask & (1 << i) != 0)
    }
}

impl fmt::Debug for HypothesisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HypothesisSet({:#06x})", self.mask)
    }
}
