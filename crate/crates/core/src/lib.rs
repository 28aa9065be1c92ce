//! Evidential occupancy grids: Dempster–Shafer assignments over a small
//! frame of discernment, cell-wise fusion of sensor maps, evidential IoU
//! scoring, credibility calibration and synthetic scene rendering.

pub mod calibration;
pub mod combine;
pub mod evidence;
pub mod fusion;
pub mod grid;
pub mod metrics;
pub mod scenario;

pub use combine::{CombinationRule, CombineError, SourceParams};
pub use evidence::{Bba, EvidenceError, Fod, HypothesisSet};
pub use fusion::{fuse_grids, fuse_grids_with_threads, FusionConfig, FusionError};
pub use grid::{CellIndex, CellMask, GridError, GridGeometry, GridMap, LayerCatalog};
