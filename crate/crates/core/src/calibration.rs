//! Exhaustive credibility sweep for the adaptive ER rule.
//!
//! Every `(b_first, b_second)` pair on a regular lattice over `[0, 1]²` is
//! scored by the eIoU of the target hypothesis, with confusion sums pooled
//! over all frames before the ratio is taken.

use rayon::prelude::*;
use serde::Serialize;

use crate::combine::CombinationRule;
use crate::evidence::HypothesisSet;
use crate::fusion::{fuse_grids, FusionConfig, FusionError};
use crate::grid::{GridError, GridMap, LayerCatalog, SEMANTIC_CLASSES};
use crate::metrics::{eiou, EiouReport, MetricsError};

pub const DEFAULT_STEP: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error("no frames to sweep")]
    EmptyFrameList,
    #[error("step {0} must lie in (0, 1]")]
    InvalidStep(f64),
    #[error("frame {frame}: the frame has no default target set {{c,cy,p,om,nm}}")]
    NoDefaultTarget { frame: usize },
    #[error("frame {frame}: target hypothesis belongs to a different frame of discernment")]
    ForeignTarget { frame: usize },
    #[error("frame {frame}: {source}")]
    Grid {
        frame: usize,
        #[source]
        source: GridError,
    },
    #[error("frame {frame}: {source}")]
    Fusion {
        frame: usize,
        #[source]
        source: FusionError,
    },
    #[error("frame {frame}: {source}")]
    Metrics {
        frame: usize,
        #[source]
        source: MetricsError,
    },
}

/// Maps of one scene: the two sensors and the ground truth.
#[derive(Debug, Clone)]
pub struct Frame {
    pub first: GridMap,
    pub second: GridMap,
    pub reference: GridMap,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub step: f64,
    pub frames: Vec<Frame>,
    /// Hypothesis scored by eIoU; `None` selects `{c,cy,p,om,nm}`.
    pub target: Option<HypothesisSet>,
}

impl SweepSpec {
    pub fn new(frames: Vec<Frame>) -> Self {
        Self {
            step: DEFAULT_STEP,
            frames,
            target: None,
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_target(mut self, target: HypothesisSet) -> Self {
        self.target = Some(target);
        self
    }
}

/// Lattice values `0, step, 2·step, …` up to 1. When `1/step` is an
/// integer the values are computed as `i / n` so that 1 is hit exactly.
pub fn sweep_values(step: f64) -> Result<Vec<f64>, CalibrationError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(CalibrationError::InvalidStep(step));
    }
    let inv = 1.0 / step;
    let n = inv.round();
    if (inv - n).abs() < 1e-9 {
        let n = n as usize;
        Ok((0..=n).map(|i| i as f64 / n as f64).collect())
    } else {
        let n = (inv + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| i as f64 * step).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestPair {
    pub b_first: f64,
    pub b_second: f64,
    pub eiou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub hypothesis: String,
    pub b_values: Vec<f64>,
    /// `eiou[i][j]` is the pooled eIoU at `(b_values[i], b_values[j])`;
    /// `None` where it is undefined.
    pub eiou: Vec<Vec<Option<f64>>>,
    pub best: Option<BestPair>,
    /// Pooled eIoU of Dempster fusion, which ignores credibility.
    pub dempster: Option<f64>,
}

impl SweepTable {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.eiou[i][j]
    }

    /// Header `b_first,<b_second values>`, then one row per `b_first`.
    /// Undefined entries are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("b_first");
        for b in &self.b_values {
            out.push(',');
            out.push_str(&format_b(*b));
        }
        out.push('\n');
        for (b, row) in self.b_values.iter().zip(&self.eiou) {
            out.push_str(&format_b(*b));
            for v in row {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep table serializes")
    }
}

/// Six decimals with trailing zeros removed.
pub fn format_b(b: f64) -> String {
    let s = format!("{b:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.into()
    }
}

struct Prepared {
    first: GridMap,
    second: GridMap,
    reference: GridMap,
    catalog: LayerCatalog,
}

fn default_target(frame: &Frame, index: usize) -> Result<HypothesisSet, CalibrationError> {
    frame
        .reference
        .fod()
        .set_from_names(SEMANTIC_CLASSES)
        .map_err(|_| CalibrationError::NoDefaultTarget { frame: index })
}

fn prepare(
    frame: &Frame,
    index: usize,
    target: HypothesisSet,
) -> Result<Prepared, CalibrationError> {
    if target.fod_id() != frame.reference.fod().id() {
        return Err(CalibrationError::ForeignTarget { frame: index });
    }
    let grid = |source| CalibrationError::Grid {
        frame: index,
        source,
    };
    // Maps lacking the target layer are scored without collapsing.
    let collapse = |g: &GridMap| -> Result<GridMap, CalibrationError> {
        match g.catalog().index_of(target) {
            Some(_) => g.collapse_into(target).map_err(grid),
            None => Ok(g.clone()),
        }
    };
    let first = collapse(&frame.first)?;
    let second = collapse(&frame.second)?;
    let reference = collapse(&frame.reference)?;
    let catalog = LayerCatalog::combined(first.catalog(), second.catalog());
    Ok(Prepared {
        first,
        second,
        reference,
        catalog,
    })
}

fn pooled(
    frames: &[Prepared],
    target: HypothesisSet,
    rule: CombinationRule,
    b_first: f64,
    b_second: f64,
) -> Result<EiouReport, CalibrationError> {
    let mut total: Option<EiouReport> = None;
    for (index, f) in frames.iter().enumerate() {
        let config = FusionConfig::new(rule, f.catalog.clone())
            .with_credibility(b_first, b_second)
            .map_err(|source| CalibrationError::Fusion {
                frame: index,
                source,
            })?;
        let fused = fuse_grids(&f.first, &f.second, &config).map_err(|source| {
            CalibrationError::Fusion {
                frame: index,
                source,
            }
        })?;
        let report = eiou(&f.reference, &fused, target, None).map_err(|source| {
            CalibrationError::Metrics {
                frame: index,
                source,
            }
        })?;
        match &mut total {
            Some(t) => t.accumulate(&report),
            None => total = Some(report),
        }
    }
    Ok(total.expect("at least one frame"))
}

/// Scores every credibility pair with the adaptive ER rule and reports the
/// best one. Ties go to the larger `b_first`, then the larger `b_second`.
pub fn credibility_sweep(spec: &SweepSpec) -> Result<SweepTable, CalibrationError> {
    let values = sweep_values(spec.step)?;
    let first = spec
        .frames
        .first()
        .ok_or(CalibrationError::EmptyFrameList)?;
    let target = match spec.target {
        Some(t) => t,
        None => default_target(first, 0)?,
    };
    let frames = spec
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| prepare(f, i, target))
        .collect::<Result<Vec<_>, _>>()?;

    let n = values.len();
    let entries: Vec<Option<f64>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            pooled(
                &frames,
                target,
                CombinationRule::ErAdaptive,
                values[k / n],
                values[k % n],
            )
            .map(|r| r.eiou)
        })
        .collect::<Result<_, _>>()?;
    let dempster = pooled(&frames, target, CombinationRule::Dempster, 1.0, 1.0)?.eiou;

    let mut best: Option<BestPair> = None;
    for (k, v) in entries.iter().enumerate() {
        if let Some(v) = *v {
            if best.is_none_or(|b| v >= b.eiou) {
                best = Some(BestPair {
                    b_first: values[k / n],
                    b_second: values[k % n],
                    eiou: v,
                });
            }
        }
    }
    Ok(SweepTable {
        hypothesis: first.reference.fod().label(target, ","),
        b_values: values,
        eiou: entries.chunks(n).map(<[_]>::to_vec).collect(),
        best,
        dempster,
    })
}
