//! Multi-layer evidential grid maps.
//!
//! A [`GridMap`] stores one assignment per cell over a fixed
//! [`LayerCatalog`] of focal elements. Layer values are 32-bit floats in
//! layer-major, row-major order with `x` varying fastest.

mod export;
mod io;

pub use export::{export_csv, export_pgm, write_csv, write_pgm};
pub use io::{load, read_from, save, write_to, FORMAT_VERSION, MAGIC};

use serde::{Deserialize, Serialize};

use crate::combine::kernel::Focal;
use crate::evidence::{Bba, EvidenceError, Fod, FodId, HypothesisSet};

/// Tolerance on the per-cell layer sum.
pub const CELL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("layer catalog has no layer for the full frame")]
    CatalogMissingOmega,
    #[error("layer catalog contains the empty set")]
    EmptyLayer,
    #[error("layer catalog lists `{0}` twice")]
    DuplicateLayer(String),
    #[error("layer belongs to a different frame")]
    ForeignLayer,
    #[error("cell ({x}, {y}) is outside the {width}x{height} grid")]
    CellOutOfRange {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("point ({0}, {1}) is outside the region of interest")]
    OutOfRegion(f64, f64),
    #[error("focal element `{0}` is not a layer of this map")]
    FocalNotInCatalog(String),
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),
    #[error("cell ({x}, {y}) is not a valid assignment: {reason}")]
    InvalidCell { x: usize, y: usize, reason: String },
    #[error("raster holds {found} values, expected {expected}")]
    DataLength { expected: usize, found: usize },
    #[error("bad magic bytes, not an EVGM file")]
    BadMagic,
    #[error("EVGM version {0} is not supported")]
    VersionUnsupported(u32),
    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Cell `(x, y)`: `x` runs along the first axis, `y` along the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub x: usize,
    pub y: usize,
}

impl CellIndex {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Cartesian partition of a rectangular region of interest.
///
/// Cell `k` along axis `i` covers `[origin[i] + k·cell_size[i],
/// origin[i] + (k+1)·cell_size[i])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    origin: [f64; 2],
    cell_size: [f64; 2],
    size: [usize; 2],
}

impl GridGeometry {
    pub fn new(origin: [f64; 2], cell_size: [f64; 2], size: [usize; 2]) -> Result<Self, GridError> {
        if !origin.iter().all(|o| o.is_finite()) {
            return Err(GridError::InvalidGeometry(format!(
                "origin {origin:?} is not finite"
            )));
        }
        if !cell_size.iter().all(|d| d.is_finite() && *d > 0.0) {
            return Err(GridError::InvalidGeometry(format!(
                "cell size {cell_size:?} must be positive"
            )));
        }
        if size.contains(&0) {
            return Err(GridError::InvalidGeometry(format!(
                "size {size:?} must be positive"
            )));
        }
        if size[0].checked_mul(size[1]).is_none() {
            return Err(GridError::InvalidGeometry(format!(
                "size {size:?} overflows"
            )));
        }
        Ok(Self {
            origin,
            cell_size,
            size,
        })
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn cell_size(&self) -> [f64; 2] {
        self.cell_size
    }

    pub fn size(&self) -> [usize; 2] {
        self.size
    }

    pub fn width(&self) -> usize {
        self.size[0]
    }

    pub fn height(&self) -> usize {
        self.size[1]
    }

    pub fn cell_count(&self) -> usize {
        self.size[0] * self.size[1]
    }

    pub(crate) fn linear(&self, cell: CellIndex) -> usize {
        cell.y * self.size[0] + cell.x
    }

    pub(crate) fn unlinear(&self, index: usize) -> CellIndex {
        CellIndex::new(index % self.size[0], index / self.size[0])
    }

    pub fn check(&self, cell: CellIndex) -> Result<usize, GridError> {
        if cell.x < self.size[0] && cell.y < self.size[1] {
            Ok(self.linear(cell))
        } else {
            Err(GridError::CellOutOfRange {
                x: cell.x,
                y: cell.y,
                width: self.size[0],
                height: self.size[1],
            })
        }
    }

    fn edge(&self, axis: usize, k: f64) -> f64 {
        self.origin[axis] + k * self.cell_size[axis]
    }

    fn axis_index(&self, axis: usize, p: f64) -> Option<usize> {
        if !p.is_finite() {
            return None;
        }
        let mut k = ((p - self.origin[axis]) / self.cell_size[axis]).floor();
        // Snap to the interval edges as they evaluate in floating point.
        if self.edge(axis, k) > p {
            k -= 1.0;
        } else if self.edge(axis, k + 1.0) <= p {
            k += 1.0;
        }
        if k < 0.0 || k >= self.size[axis] as f64 {
            None
        } else {
            Some(k as usize)
        }
    }

    /// Cell containing `point`; lower edges are inclusive, upper exclusive.
    pub fn world_to_cell(&self, point: [f64; 2]) -> Result<CellIndex, GridError> {
        match (self.axis_index(0, point[0]), self.axis_index(1, point[1])) {
            (Some(x), Some(y)) => Ok(CellIndex::new(x, y)),
            _ => Err(GridError::OutOfRegion(point[0], point[1])),
        }
    }

    pub fn cell_center(&self, cell: CellIndex) -> [f64; 2] {
        [
            self.edge(0, cell.x as f64 + 0.5),
            self.edge(1, cell.y as f64 + 0.5),
        ]
    }

    /// `[x_min, y_min, x_max, y_max]` of the region of interest.
    pub fn region(&self) -> [f64; 4] {
        [
            self.origin[0],
            self.origin[1],
            self.edge(0, self.size[0] as f64),
            self.edge(1, self.size[1] as f64),
        ]
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> {
        let [w, h] = self.size;
        (0..h).flat_map(move |y| (0..w).map(move |x| CellIndex::new(x, y)))
    }
}

/// Ordered focal elements a map can store; the order is the layer order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerCatalog {
    fod: FodId,
    sets: Vec<HypothesisSet>,
}

impl LayerCatalog {
    pub fn new(fod: &Fod, sets: Vec<HypothesisSet>) -> Result<Self, GridError> {
        for (i, set) in sets.iter().enumerate() {
            if set.fod_id() != fod.id() {
                return Err(GridError::ForeignLayer);
            }
            if set.is_empty() {
                return Err(GridError::EmptyLayer);
            }
            if sets[..i].contains(set) {
                return Err(GridError::DuplicateLayer(fod.label(*set, ",")));
            }
        }
        if !sets.iter().any(|s| s.is_omega()) {
            return Err(GridError::CatalogMissingOmega);
        }
        Ok(Self {
            fod: fod.id(),
            sets,
        })
    }

    /// `{c}, {cy}, {p}, {om}, {nm}, {f}, {c,cy,p,om,nm}, Ω` on a frame that
    /// names those hypotheses.
    pub fn occupancy(fod: &Fod) -> Result<Self, GridError> {
        let mut sets = Vec::with_capacity(8);
        for name in SEMANTIC_CLASSES.iter().chain(&["f"]) {
            sets.push(fod.set_from_names([name])?);
        }
        sets.push(fod.set_from_names(SEMANTIC_CLASSES)?);
        sets.push(fod.omega());
        Self::new(fod, sets)
    }

    /// Every nonempty `X ∩ Y` with `X` from `a` and `Y` from `b`: the focal
    /// elements reachable when combining maps over these catalogs. Layers
    /// of `a` come first, then new layers of `b`, then other intersections.
    pub fn combined(a: &Self, b: &Self) -> Self {
        assert_eq!(a.fod, b.fod, "catalogs from different frames");
        let mut sets = a.sets.clone();
        let mut push = |s: HypothesisSet| {
            if !s.is_empty() && !sets.contains(&s) {
                sets.push(s);
            }
        };
        b.sets.iter().copied().for_each(&mut push);
        for x in &a.sets {
            for y in &b.sets {
                push(x.intersection(*y));
            }
        }
        Self { fod: a.fod, sets }
    }

    pub fn fod_id(&self) -> FodId {
        self.fod
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[HypothesisSet] {
        &self.sets
    }

    pub fn index_of(&self, set: HypothesisSet) -> Option<usize> {
        if set.fod_id() != self.fod {
            return None;
        }
        self.index_of_mask(set.mask())
    }

    pub(crate) fn index_of_mask(&self, mask: u16) -> Option<usize> {
        self.sets.iter().position(|s| s.mask() == mask)
    }

    pub(crate) fn omega_index(&self) -> usize {
        self.sets
            .iter()
            .position(|s| s.is_omega())
            .expect("catalog always holds omega")
    }

    /// `+`-joined singleton names (`omega` for the full frame), safe for
    /// CSV headers and file names.
    pub fn layer_name(&self, fod: &Fod, layer: usize) -> String {
        fod.label(self.sets[layer], "+")
    }
}

/// Semantic occupancy classes of the occupancy frame.
pub const SEMANTIC_CLASSES: [&str; 5] = ["c", "cy", "p", "om", "nm"];

/// Evidential grid map: one assignment per cell over a layer catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    fod: Fod,
    geometry: GridGeometry,
    catalog: LayerCatalog,
    data: Vec<f32>,
}

impl GridMap {
    /// New map with every cell vacuous.
    pub fn new(
        fod: &Fod,
        geometry: GridGeometry,
        catalog: LayerCatalog,
    ) -> Result<Self, GridError> {
        if catalog.fod_id() != fod.id() {
            return Err(GridError::ForeignLayer);
        }
        let n = geometry.cell_count();
        let mut data = vec![0.0f32; n * catalog.len()];
        let omega = catalog.omega_index();
        data[omega * n..(omega + 1) * n].fill(1.0);
        Ok(Self {
            fod: fod.clone(),
            geometry,
            catalog,
            data,
        })
    }

    /// Wraps existing layer-major rasters, validating every cell.
    pub fn from_layers(
        fod: &Fod,
        geometry: GridGeometry,
        catalog: LayerCatalog,
        data: Vec<f32>,
    ) -> Result<Self, GridError> {
        if catalog.fod_id() != fod.id() {
            return Err(GridError::ForeignLayer);
        }
        let expected = geometry.cell_count() * catalog.len();
        if data.len() != expected {
            return Err(GridError::DataLength {
                expected,
                found: data.len(),
            });
        }
        let grid = Self {
            fod: fod.clone(),
            geometry,
            catalog,
            data,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub(crate) fn from_layers_unchecked(
        fod: &Fod,
        geometry: GridGeometry,
        catalog: LayerCatalog,
        data: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(data.len(), geometry.cell_count() * catalog.len());
        Self {
            fod: fod.clone(),
            geometry,
            catalog,
            data,
        }
    }

    pub fn fod(&self) -> &Fod {
        &self.fod
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn catalog(&self) -> &LayerCatalog {
        &self.catalog
    }

    pub fn cell_count(&self) -> usize {
        self.geometry.cell_count()
    }

    pub fn layer(&self, layer: usize) -> &[f32] {
        let n = self.cell_count();
        &self.data[layer * n..(layer + 1) * n]
    }

    /// Layer raster of `set`, if the catalog stores it.
    pub fn layer_of(&self, set: HypothesisSet) -> Option<&[f32]> {
        self.catalog.index_of(set).map(|i| self.layer(i))
    }

    pub(crate) fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub(crate) fn value_at(&self, linear: usize, layer: usize) -> f32 {
        self.data[layer * self.cell_count() + linear]
    }

    /// Stored mass of `set` in `cell`; zero for sets outside the catalog.
    pub fn mass(&self, cell: CellIndex, set: HypothesisSet) -> Result<f64, GridError> {
        let linear = self.geometry.check(cell)?;
        Ok(self
            .catalog
            .index_of(set)
            .map_or(0.0, |l| f64::from(self.value_at(linear, l))))
    }

    /// Reads a cell as `(mask, mass)` pairs, rescaled by the cell sum so the
    /// masses are normalized in double precision.
    pub(crate) fn read_cell(&self, linear: usize, out: &mut Focal) {
        out.clear();
        let mut sum = 0.0;
        for (layer, set) in self.catalog.sets.iter().enumerate() {
            let v = f64::from(self.value_at(linear, layer));
            if v > 0.0 {
                out.push((set.mask(), v));
                sum += v;
            }
        }
        if sum != 1.0 {
            for entry in out.iter_mut() {
                entry.1 /= sum;
            }
        }
    }

    /// Assignment of `cell`. Stored single-precision masses are rescaled by
    /// their sum, which the map keeps within [`CELL_TOLERANCE`] of one.
    pub fn cell_bba(&self, cell: CellIndex) -> Result<Bba, GridError> {
        let linear = self.geometry.check(cell)?;
        let mut focal = Focal::new();
        self.read_cell(linear, &mut focal);
        focal.sort_unstable_by_key(|e| e.0);
        Ok(Bba::from_sorted_unchecked(&self.fod, focal.into_vec()))
    }

    pub fn set_cell(&mut self, cell: CellIndex, bba: &Bba) -> Result<(), GridError> {
        let linear = self.geometry.check(cell)?;
        if bba.fod().id() != self.fod.id() {
            return Err(GridError::ForeignLayer);
        }
        let mut values = vec![0.0f32; self.catalog.len()];
        for (set, mass) in bba.focal_elements() {
            let layer = self
                .catalog
                .index_of(set)
                .ok_or_else(|| GridError::FocalNotInCatalog(self.fod.label(set, ",")))?;
            values[layer] = mass as f32;
        }
        let n = self.cell_count();
        for (layer, v) in values.into_iter().enumerate() {
            self.data[layer * n + linear] = v;
        }
        Ok(())
    }

    /// Checks that every cell is a valid assignment.
    pub fn validate(&self) -> Result<(), GridError> {
        let n = self.cell_count();
        let layers = self.catalog.len();
        for linear in 0..n {
            let mut sum = 0.0f64;
            for layer in 0..layers {
                let v = self.data[layer * n + linear];
                if !(0.0..=1.0).contains(&v) {
                    let cell = self.geometry.unlinear(linear);
                    return Err(GridError::InvalidCell {
                        x: cell.x,
                        y: cell.y,
                        reason: format!(
                            "layer `{}` holds {v}",
                            self.catalog.layer_name(&self.fod, layer)
                        ),
                    });
                }
                sum += f64::from(v);
            }
            if (sum - 1.0).abs() > CELL_TOLERANCE {
                let cell = self.geometry.unlinear(linear);
                return Err(GridError::InvalidCell {
                    x: cell.x,
                    y: cell.y,
                    reason: format!("layers sum to {sum}"),
                });
            }
        }
        Ok(())
    }

    /// Moves the mass of every layer that is a nonempty proper subset of
    /// `target` onto the `target` layer.
    pub fn collapse_into(&self, target: HypothesisSet) -> Result<Self, GridError> {
        let dest = self
            .catalog
            .index_of(target)
            .ok_or_else(|| GridError::UnknownLayer(self.fod.label(target, ",")))?;
        let n = self.cell_count();
        let mut data = self.data.clone();
        for (layer, set) in self.catalog.sets.iter().enumerate() {
            if layer == dest || set.is_empty() || !set.is_subset_of(target) {
                continue;
            }
            for linear in 0..n {
                let v = data[layer * n + linear];
                if v != 0.0 {
                    data[dest * n + linear] += v;
                    data[layer * n + linear] = 0.0;
                }
            }
        }
        Ok(Self::from_layers_unchecked(
            &self.fod,
            self.geometry,
            self.catalog.clone(),
            data,
        ))
    }
}

/// Boolean cell selection over a geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    size: [usize; 2],
    bits: Vec<bool>,
}

impl CellMask {
    pub fn filled(geometry: &GridGeometry, value: bool) -> Self {
        Self {
            size: geometry.size(),
            bits: vec![value; geometry.cell_count()],
        }
    }

    pub fn size(&self) -> [usize; 2] {
        self.size
    }

    pub fn matches(&self, geometry: &GridGeometry) -> bool {
        self.size == geometry.size()
    }

    pub fn get(&self, cell: CellIndex) -> bool {
        cell.x < self.size[0] && cell.y < self.size[1] && self.bits[cell.y * self.size[0] + cell.x]
    }

    pub fn set(&mut self, cell: CellIndex, value: bool) {
        assert!(cell.x < self.size[0] && cell.y < self.size[1]);
        self.bits[cell.y * self.size[0] + cell.x] = value;
    }

    pub(crate) fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn and(&self, other: &Self) -> Self {
        assert_eq!(self.size, other.size, "mask sizes differ");
        Self {
            size: self.size,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }
}
