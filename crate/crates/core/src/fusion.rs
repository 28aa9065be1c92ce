//! Cell-wise combination of two sensor grid maps.

use rayon::prelude::*;

use crate::combine::kernel::Focal;
use crate::combine::{CombinationRule, CombineError};
use crate::grid::{CellIndex, GridMap, LayerCatalog};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("grid geometries differ")]
    GeometryMismatch,
    #[error("grids are defined on different frames")]
    FodMismatch,
    #[error("credibility {0} is outside [0, 1]")]
    InvalidCredibility(f64),
    #[error("combination failed in cell ({}, {}): {source}", cell.x, cell.y)]
    RuleFailure {
        cell: CellIndex,
        #[source]
        source: CombineError,
    },
    #[error("cell ({}, {}) produced focal element `{focal}` outside the output catalog", cell.x, cell.y)]
    UnrepresentableFocal { cell: CellIndex, focal: String },
    #[error("failed to build a worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub rule: CombinationRule,
    /// Credibility of the first map's sensor; used by the ER rule only.
    pub b_first: f64,
    /// Credibility of the second map's sensor; used by the ER rule only.
    pub b_second: f64,
    /// Layers of the fused map.
    pub catalog: LayerCatalog,
}

impl FusionConfig {
    /// Config with full credibility for both sources.
    pub fn new(rule: CombinationRule, catalog: LayerCatalog) -> Self {
        Self {
            rule,
            b_first: 1.0,
            b_second: 1.0,
            catalog,
        }
    }

    pub fn with_credibility(mut self, b_first: f64, b_second: f64) -> Result<Self, FusionError> {
        self.b_first = b_first;
        self.b_second = b_second;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        for b in [self.b_first, self.b_second] {
            if !(0.0..=1.0).contains(&b) {
                return Err(FusionError::InvalidCredibility(b));
            }
        }
        Ok(())
    }
}

/// Fuses `first` and `second` cell by cell on the current rayon pool.
pub fn fuse_grids(
    first: &GridMap,
    second: &GridMap,
    config: &FusionConfig,
) -> Result<GridMap, FusionError> {
    fuse(first, second, config, true)
}

/// Fuses with at most `threads` workers; `threads == 1` runs on the
/// calling thread. The result does not depend on the worker count.
pub fn fuse_grids_with_threads(
    first: &GridMap,
    second: &GridMap,
    config: &FusionConfig,
    threads: usize,
) -> Result<GridMap, FusionError> {
    if threads <= 1 {
        return fuse(first, second, config, false);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| FusionError::ThreadPool(e.to_string()))?;
    pool.install(|| fuse(first, second, config, true))
}

fn fuse(
    first: &GridMap,
    second: &GridMap,
    config: &FusionConfig,
    parallel: bool,
) -> Result<GridMap, FusionError> {
    config.validate()?;
    if first.fod() != second.fod() || config.catalog.fod_id() != first.fod().id() {
        return Err(FusionError::FodMismatch);
    }
    if first.geometry() != second.geometry() {
        return Err(FusionError::GeometryMismatch);
    }
    let geometry = *first.geometry();
    let width = geometry.width();
    let layers = config.catalog.len();
    let row_len = width * layers;

    // Cell-major scratch, one chunk per raster row.
    let mut cells = vec![0.0f32; geometry.cell_count() * layers];
    let fuse_row = |(y, row): (usize, &mut [f32])| -> Result<(), FusionError> {
        let mut a = Focal::new();
        let mut b = Focal::new();
        let mut out = Focal::new();
        for x in 0..width {
            let linear = y * width + x;
            first.read_cell(linear, &mut a);
            second.read_cell(linear, &mut b);
            config
                .rule
                .combine_raw(
                    &a,
                    config.b_first,
                    &b,
                    config.b_second,
                    first.fod().omega().mask(),
                    &mut out,
                )
                .map_err(|source| FusionError::RuleFailure {
                    cell: CellIndex::new(x, y),
                    source,
                })?;
            let slot = &mut row[x * layers..(x + 1) * layers];
            for &(mask, mass) in &out {
                let layer = config.catalog.index_of_mask(mask).ok_or_else(|| {
                    let set = first.fod().set_from_mask(mask).expect("mask within frame");
                    FusionError::UnrepresentableFocal {
                        cell: CellIndex::new(x, y),
                        focal: first.fod().label(set, ","),
                    }
                })?;
                slot[layer] = mass as f32;
            }
        }
        Ok(())
    };
    let results: Vec<Result<(), FusionError>> = if parallel {
        cells
            .par_chunks_mut(row_len)
            .enumerate()
            .map(fuse_row)
            .collect()
    } else {
        cells
            .chunks_mut(row_len)
            .enumerate()
            .map(fuse_row)
            .collect()
    };
    // Rows are in order, so the reported failure is the first in raster order.
    results.into_iter().collect::<Result<(), _>>()?;

    let n = geometry.cell_count();
    let mut data = vec![0.0f32; n * layers];
    for (linear, cell) in cells.chunks_exact(layers).enumerate() {
        for (layer, v) in cell.iter().enumerate() {
            data[layer * n + linear] = *v;
        }
    }
    Ok(GridMap::from_layers_unchecked(
        first.fod(),
        geometry,
        config.catalog.clone(),
        data,
    ))
}
