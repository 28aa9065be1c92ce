//! Evidential IoU against a reference map, Deng-entropy aggregation, and
//! sector-shaped field-of-view masks.
//!
//! Reductions run over fixed-size chunks of cells whose partial sums are
//! added in chunk order, so results do not depend on the worker count.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combine::kernel::Focal;
use crate::evidence::{deng_of, HypothesisSet};
use crate::grid::{CellMask, GridGeometry, GridMap};

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("grid geometries differ")]
    GeometryMismatch,
    #[error("grids are defined on different frames")]
    FodMismatch,
    #[error("mask size does not match the grid")]
    MaskMismatch,
    #[error("hypothesis must be nonempty")]
    EmptyHypothesis,
    #[error("hypothesis belongs to a different frame")]
    ForeignHypothesis,
    #[error("eIoU is undefined: eTP + eFP + eFN = 0")]
    UndefinedIoU,
    #[error("no cells selected")]
    EmptySelection,
    #[error("half angle {0} must lie in (0, π]")]
    InvalidAngle(f64),
    #[error("maximum range {0} must be positive")]
    InvalidRange(f64),
}

/// Mass-weighted confusion counts and eIoU for one hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EiouReport {
    pub hypothesis: String,
    pub etp: f64,
    pub efp: f64,
    pub efn: f64,
    /// `None` where `eTP + eFP + eFN = 0`.
    pub eiou: Option<f64>,
}

impl EiouReport {
    pub fn from_counts(hypothesis: impl Into<String>, etp: f64, efp: f64, efn: f64) -> Self {
        let denom = etp + efp + efn;
        Self {
            hypothesis: hypothesis.into(),
            etp,
            efp,
            efn,
            eiou: (denom > 0.0).then(|| etp / denom),
        }
    }

    /// Adds another frame's counts; the ratio is re-taken over the sums.
    pub fn accumulate(&mut self, other: &Self) {
        *self = Self::from_counts(
            std::mem::take(&mut self.hypothesis),
            self.etp + other.etp,
            self.efp + other.efp,
            self.efn + other.efn,
        );
    }

    pub fn iou(&self) -> Result<f64, MetricsError> {
        self.eiou.ok_or(MetricsError::UndefinedIoU)
    }

    pub const CSV_HEADER: &'static str = "hypothesis,etp,efp,efn,eiou";

    /// CSV row with six decimals; an undefined eIoU is an empty field.
    pub fn csv_row(&self) -> String {
        let mut row = format!(
            "{},{:.6},{:.6},{:.6},",
            self.hypothesis, self.etp, self.efp, self.efn
        );
        if let Some(v) = self.eiou {
            let _ = write!(row, "{v:.6}");
        }
        row
    }
}

pub fn eiou_csv(reports: &[EiouReport]) -> String {
    let mut out = String::from(EiouReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn check_mask(mask: Option<&CellMask>, geometry: &GridGeometry) -> Result<(), MetricsError> {
    match mask {
        Some(m) if !m.matches(geometry) => Err(MetricsError::MaskMismatch),
        _ => Ok(()),
    }
}

/// Calls `f` on every selected cell, chunk by chunk, and sums the partial
/// results in chunk order.
fn reduce<const N: usize, F>(cells: usize, mask: Option<&CellMask>, f: F) -> ([f64; N], usize)
where
    F: Fn(usize, &mut [f64; N]) + Sync,
{
    let chunks = cells.div_ceil(CHUNK);
    let partials: Vec<([f64; N], usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = [0.0; N];
            let mut count = 0;
            for linear in c * CHUNK..((c + 1) * CHUNK).min(cells) {
                if mask.is_none_or(|m| m.bits()[linear]) {
                    f(linear, &mut acc);
                    count += 1;
                }
            }
            (acc, count)
        })
        .collect();
    let mut total = [0.0; N];
    let mut count = 0;
    for (acc, n) in partials {
        for (t, a) in total.iter_mut().zip(acc) {
            *t += a;
        }
        count += n;
    }
    (total, count)
}

/// Per-layer relation of a catalog to the queried hypothesis.
struct LayerRoles {
    subset: Vec<bool>,
    disjoint: Vec<bool>,
    exact: Option<usize>,
}

impl LayerRoles {
    fn of(grid: &GridMap, omega: HypothesisSet) -> Self {
        let sets = grid.catalog().sets();
        Self {
            subset: sets.iter().map(|s| s.is_subset_of(omega)).collect(),
            disjoint: sets.iter().map(|s| s.is_disjoint(omega)).collect(),
            exact: grid.catalog().index_of(omega),
        }
    }
}

/// Evidential true/false positives and false negatives of `estimate` for
/// `omega`, against `reference`, over the cells selected by `mask`.
///
/// Reference mass on sets that partly overlap `omega` counts toward none
/// of the three sums.
pub fn eiou(
    reference: &GridMap,
    estimate: &GridMap,
    omega: HypothesisSet,
    mask: Option<&CellMask>,
) -> Result<EiouReport, MetricsError> {
    if reference.fod() != estimate.fod() {
        return Err(MetricsError::FodMismatch);
    }
    if omega.fod_id() != reference.fod().id() {
        return Err(MetricsError::ForeignHypothesis);
    }
    if omega.is_empty() {
        return Err(MetricsError::EmptyHypothesis);
    }
    if reference.geometry() != estimate.geometry() {
        return Err(MetricsError::GeometryMismatch);
    }
    check_mask(mask, reference.geometry())?;

    let ref_roles = LayerRoles::of(reference, omega);
    let est_roles = LayerRoles::of(estimate, omega);
    let ref_layers = reference.catalog().len();
    let est_layers = estimate.catalog().len();

    let ([etp, efp, efn], _) = reduce(reference.cell_count(), mask, |linear, acc| {
        let est_omega = est_roles
            .exact
            .map_or(0.0, |l| f64::from(estimate.value_at(linear, l)));
        let ref_omega = ref_roles
            .exact
            .map_or(0.0, |l| f64::from(reference.value_at(linear, l)));
        let mut ref_subset = 0.0;
        let mut ref_disjoint = 0.0;
        for layer in 0..ref_layers {
            let v = f64::from(reference.value_at(linear, layer));
            if ref_roles.subset[layer] {
                ref_subset += v;
            } else if ref_roles.disjoint[layer] {
                ref_disjoint += v;
            }
        }
        let mut est_disjoint = 0.0;
        for layer in 0..est_layers {
            if est_roles.disjoint[layer] {
                est_disjoint += f64::from(estimate.value_at(linear, layer));
            }
        }
        acc[0] += ref_subset * est_omega;
        acc[1] += ref_disjoint * est_omega;
        acc[2] += ref_omega * est_disjoint;
    });
    Ok(EiouReport::from_counts(
        reference.fod().label(omega, ","),
        etp,
        efp,
        efn,
    ))
}

/// Mean Deng measures over selected cells, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub cells: usize,
    pub nonspecificity: f64,
    pub discord: f64,
    pub entropy: f64,
}

impl EntropyReport {
    pub const CSV_HEADER: &'static str = "cells,nonspecificity,discord,entropy";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6}",
            self.cells, self.nonspecificity, self.discord, self.entropy
        )
    }
}

pub fn grid_entropy(
    grid: &GridMap,
    mask: Option<&CellMask>,
) -> Result<EntropyReport, MetricsError> {
    check_mask(mask, grid.geometry())?;
    let ([nonspecificity, discord], cells) = reduce(grid.cell_count(), mask, |linear, acc| {
        let mut focal = Focal::new();
        grid.read_cell(linear, &mut focal);
        let t = deng_of(&focal);
        acc[0] += t.nonspecificity;
        acc[1] += t.discord;
    });
    if cells == 0 {
        return Err(MetricsError::EmptySelection);
    }
    let n = cells as f64;
    let (nonspecificity, discord) = (nonspecificity / n, discord / n);
    Ok(EntropyReport {
        cells,
        nonspecificity,
        discord,
        entropy: nonspecificity + discord,
    })
}

/// Angular sector seen from `apex`: directions within `half_angle` of
/// `heading` (radians, counterclockwise from +x), up to `max_range` meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovSector {
    pub apex: [f64; 2],
    pub heading: f64,
    pub half_angle: f64,
    /// Unlimited when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_range: Option<f64>,
}

impl FovSector {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.half_angle > 0.0 && self.half_angle <= PI) {
            return Err(MetricsError::InvalidAngle(self.half_angle));
        }
        if !self.heading.is_finite() {
            return Err(MetricsError::InvalidAngle(self.heading));
        }
        if let Some(r) = self.max_range {
            if r.is_nan() || r <= 0.0 {
                return Err(MetricsError::InvalidRange(r));
            }
        }
        Ok(())
    }

    /// Whether `point` lies in the closed sector. A slack of 1e-9 rad keeps
    /// points on the bounding rays inside.
    pub fn contains(&self, point: [f64; 2]) -> bool {
        let dx = point[0] - self.apex[0];
        let dy = point[1] - self.apex[1];
        let dist = dx.hypot(dy);
        if self.max_range.is_some_and(|r| dist > r) {
            return false;
        }
        if dist == 0.0 {
            return true;
        }
        let offset = (dy.atan2(dx) - self.heading + PI).rem_euclid(TAU) - PI;
        offset.abs() <= self.half_angle + 1e-9
    }

    pub fn mask(&self, geometry: &GridGeometry) -> Result<CellMask, MetricsError> {
        self.validate()?;
        let mut mask = CellMask::filled(geometry, false);
        for cell in geometry.cells() {
            if self.contains(geometry.cell_center(cell)) {
                mask.set(cell, true);
            }
        }
        Ok(mask)
    }
}

/// Cells whose centers fall inside the sector.
pub fn fov_mask(
    geometry: &GridGeometry,
    apex: [f64; 2],
    heading: f64,
    half_angle: f64,
    max_range: f64,
) -> Result<CellMask, MetricsError> {
    let max_range = if max_range.is_infinite() && max_range > 0.0 {
        None
    } else {
        Some(max_range)
    };
    FovSector {
        apex,
        heading,
        half_angle,
        max_range,
    }
    .mask(geometry)
}
