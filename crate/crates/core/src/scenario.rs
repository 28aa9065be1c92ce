//! Synthetic scenes and grid-level sensor emulation.
//!
//! A scene is a drivable rectangle holding axis-aligned object rectangles.
//! Cells are assigned by their centers. Sensor models perturb object edges
//! with Gaussian noise and, for stereo-like sensors, pull the edge facing
//! the sensor closer by a fixed range bias.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::evidence::{Bba, Fod, HypothesisSet};
use crate::grid::{GridError, GridGeometry, GridMap, LayerCatalog, SEMANTIC_CLASSES};
use crate::metrics::FovSector;

/// `[x_min, y_min, x_max, y_max]` in meters.
pub type Rect = [f64; 4];

const REGION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid sensor model: {0}")]
    InvalidModel(String),
}

impl From<GridError> for ScenarioError {
    fn from(e: GridError) -> Self {
        Self::InvalidScenario(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: String,
    pub rect: Rect,
}

/// Scalar cell sizes are square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellSize {
    Square(f64),
    Sides([f64; 2]),
}

impl CellSize {
    pub fn sides(self) -> [f64; 2] {
        match self {
            Self::Square(s) => [s, s],
            Self::Sides(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub origin: [f64; 2],
    pub cell_size: CellSize,
    pub size: [usize; 2],
    /// Free space outside the objects; absent means no free cells.
    #[serde(default)]
    pub drivable: Option<Rect>,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub seed: u64,
}

fn rect_ok(r: &Rect) -> bool {
    r.iter().all(|v| v.is_finite()) && r[0] < r[2] && r[1] < r[3]
}

fn rect_contains(r: &Rect, p: [f64; 2]) -> bool {
    p[0] >= r[0] && p[0] < r[2] && p[1] >= r[1] && p[1] < r[3]
}

fn overlaps(a: &Rect, b: &Rect) -> bool {
    a[0] < b[2] && b[0] < a[2] && a[1] < b[3] && b[1] < a[3]
}

impl ScenarioSpec {
    pub fn geometry(&self) -> Result<GridGeometry, ScenarioError> {
        Ok(GridGeometry::new(
            self.origin,
            self.cell_size.sides(),
            self.size,
        )?)
    }

    pub fn validate(&self) -> Result<GridGeometry, ScenarioError> {
        let geometry = self.geometry()?;
        let region = geometry.region();
        let inside = |r: &Rect| {
            r[0] >= region[0] - REGION_SLACK
                && r[1] >= region[1] - REGION_SLACK
                && r[2] <= region[2] + REGION_SLACK
                && r[3] <= region[3] + REGION_SLACK
        };
        let bad = |msg: String| Err(ScenarioError::InvalidScenario(msg));
        if let Some(d) = &self.drivable {
            if !rect_ok(d) {
                return bad(format!("drivable rectangle {d:?} is degenerate"));
            }
            if !inside(d) {
                return bad(format!(
                    "drivable rectangle {d:?} leaves the region {region:?}"
                ));
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !SEMANTIC_CLASSES.contains(&o.class.as_str()) {
                return bad(format!("object {i}: unknown class `{}`", o.class));
            }
            if !rect_ok(&o.rect) {
                return bad(format!("object {i}: rectangle {:?} is degenerate", o.rect));
            }
            if !inside(&o.rect) {
                return bad(format!(
                    "object {i}: rectangle {:?} leaves the region {region:?}",
                    o.rect
                ));
            }
            for (j, p) in self.objects[..i].iter().enumerate() {
                if overlaps(&o.rect, &p.rect) {
                    return bad(format!("objects {j} and {i} overlap"));
                }
            }
        }
        Ok(geometry)
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::InvalidScenario(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    LidarLike,
    StereoLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModel {
    pub kind: SensorKind,
    pub occupancy_confidence: f64,
    pub free_confidence: f64,
    /// Meters the edge facing the sensor is moved toward it. Stereo only.
    #[serde(default)]
    pub range_bias: f64,
    #[serde(default)]
    pub position_noise_sigma: f64,
    #[serde(default)]
    pub misclassification_rate: f64,
    /// Sensor location, used to decide which object edge faces it.
    #[serde(default)]
    pub position: [f64; 2],
    /// Cells outside the sector are vacuous.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov: Option<FovSector>,
    /// Follows `kind` when absent; must agree with it when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantics: Option<bool>,
}

impl SensorModel {
    pub fn lidar(occupancy_confidence: f64, free_confidence: f64) -> Self {
        Self {
            kind: SensorKind::LidarLike,
            occupancy_confidence,
            free_confidence,
            range_bias: 0.0,
            position_noise_sigma: 0.0,
            misclassification_rate: 0.0,
            position: [0.0, 0.0],
            fov: None,
            semantics: None,
        }
    }

    pub fn stereo(occupancy_confidence: f64, free_confidence: f64) -> Self {
        Self {
            kind: SensorKind::StereoLike,
            ..Self::lidar(occupancy_confidence, free_confidence)
        }
    }

    pub fn semantic(&self) -> bool {
        self.kind == SensorKind::StereoLike
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::InvalidModel(msg));
        for (name, v) in [
            ("occupancy_confidence", self.occupancy_confidence),
            ("free_confidence", self.free_confidence),
            ("misclassification_rate", self.misclassification_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if !(self.position_noise_sigma >= 0.0 && self.position_noise_sigma.is_finite()) {
            return bad(format!(
                "position_noise_sigma = {} must be nonnegative",
                self.position_noise_sigma
            ));
        }
        if !self.range_bias.is_finite() {
            return bad("range_bias must be finite".into());
        }
        if self.kind == SensorKind::LidarLike && self.range_bias != 0.0 {
            return bad("range_bias applies to stereo_like sensors only".into());
        }
        if self.position.iter().any(|v| !v.is_finite()) {
            return bad("position must be finite".into());
        }
        if let Some(s) = self.semantics {
            if s != self.semantic() {
                return bad(format!("semantics = {s} contradicts the sensor kind"));
            }
        }
        if let Some(fov) = &self.fov {
            fov.validate()
                .map_err(|e| ScenarioError::InvalidModel(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::InvalidModel(e.to_string()))
    }
}

struct Hypotheses {
    fod: Fod,
    catalog: LayerCatalog,
    classes: Vec<HypothesisSet>,
    occupied: HypothesisSet,
    free: HypothesisSet,
}

impl Hypotheses {
    fn occupancy() -> Self {
        let fod = Fod::occupancy();
        let catalog = LayerCatalog::occupancy(&fod).expect("occupancy catalog");
        let classes = SEMANTIC_CLASSES
            .iter()
            .map(|c| fod.set_from_names([*c]).expect("semantic class"))
            .collect();
        let occupied = fod
            .set_from_names(SEMANTIC_CLASSES)
            .expect("semantic classes");
        let free = fod.set_from_names(["f"]).expect("free hypothesis");
        Self {
            fod,
            catalog,
            classes,
            occupied,
            free,
        }
    }

    fn class(&self, name: &str) -> usize {
        SEMANTIC_CLASSES
            .iter()
            .position(|c| *c == name)
            .expect("validated class")
    }

    fn assignment(&self, set: HypothesisSet, confidence: f64) -> Bba {
        Bba::new(
            &self.fod,
            [(set, confidence), (self.fod.omega(), 1.0 - confidence)],
        )
        .expect("confidence in [0, 1]")
    }
}

/// Ground truth: `{class}` in objects, `{f}` elsewhere in the drivable area,
/// `Ω` outside it.
pub fn render_reference(spec: &ScenarioSpec) -> Result<GridMap, ScenarioError> {
    let geometry = spec.validate()?;
    let frame = Hypotheses::occupancy();
    let mut grid = GridMap::new(&frame.fod, geometry, frame.catalog.clone())?;
    let certain: Vec<Bba> = frame
        .classes
        .iter()
        .map(|s| Bba::certain(&frame.fod, *s).expect("class set"))
        .collect();
    let free = Bba::certain(&frame.fod, frame.free).expect("free set");
    for cell in geometry.cells() {
        let center = geometry.cell_center(cell);
        if let Some(o) = spec.objects.iter().find(|o| rect_contains(&o.rect, center)) {
            grid.set_cell(cell, &certain[frame.class(&o.class)])?;
        } else if spec.drivable.is_some_and(|d| rect_contains(&d, center)) {
            grid.set_cell(cell, &free)?;
        }
    }
    Ok(grid)
}

/// Uniform in `[0, 1)` with 53 random bits.
fn uniform(rng: &mut SplitMix64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal via Box–Muller, one variate per two uniforms.
fn gaussian(rng: &mut SplitMix64) -> f64 {
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn stream_seed(seed: u64, kind: SensorKind) -> u64 {
    match kind {
        SensorKind::LidarLike => seed,
        SensorKind::StereoLike => seed ^ 0x9e37_79b9_7f4a_7c15,
    }
}

/// Moves the edge of `r` facing `from` by `bias` toward it, along the axis
/// with the larger gap. Rectangles containing `from` are unchanged.
fn pull_near_edge(r: &mut Rect, from: [f64; 2], bias: f64) {
    let gap = |lo: f64, hi: f64, p: f64| {
        if p < lo {
            lo - p
        } else if p > hi {
            p - hi
        } else {
            0.0
        }
    };
    let gx = gap(r[0], r[2], from[0]);
    let gy = gap(r[1], r[3], from[1]);
    if gx == 0.0 && gy == 0.0 {
        return;
    }
    let (axis, p) = if gx >= gy { (0, from[0]) } else { (1, from[1]) };
    if p < r[axis] {
        r[axis] -= bias;
    } else {
        r[axis + 2] += bias;
    }
}

/// Emulated sensor map. Output depends only on `spec` and `model`.
///
/// Each object draws four edge offsets in the order `x_min, y_min, x_max,
/// y_max`; a stereo-like sensor then draws one uniform per perceived
/// occupied cell in raster order, plus one more to pick the wrong class
/// when that cell is misclassified.
pub fn render_sensor(spec: &ScenarioSpec, model: &SensorModel) -> Result<GridMap, ScenarioError> {
    let geometry = spec.validate()?;
    model.validate()?;
    let frame = Hypotheses::occupancy();
    let mut rng = SplitMix64::seed_from_u64(stream_seed(spec.seed, model.kind));

    let perceived: Vec<(usize, Rect)> = spec
        .objects
        .iter()
        .map(|o| {
            let mut r = o.rect;
            for v in &mut r {
                *v += model.position_noise_sigma * gaussian(&mut rng);
            }
            if model.range_bias != 0.0 {
                pull_near_edge(&mut r, model.position, model.range_bias);
            }
            (frame.class(&o.class), r)
        })
        .collect();

    let occupied: Vec<Bba> = if model.semantic() {
        frame
            .classes
            .iter()
            .map(|s| frame.assignment(*s, model.occupancy_confidence))
            .collect()
    } else {
        vec![frame.assignment(frame.occupied, model.occupancy_confidence)]
    };
    let free = frame.assignment(frame.free, model.free_confidence);
    let n_classes = frame.classes.len();

    let mut grid = GridMap::new(&frame.fod, geometry, frame.catalog.clone())?;
    for cell in geometry.cells() {
        let center = geometry.cell_center(cell);
        let hit = perceived
            .iter()
            .find(|(_, r)| rect_ok(r) && rect_contains(r, center));
        let mut class = hit.map(|(c, _)| *c);
        if let (Some(c), true) = (class, model.semantic()) {
            if uniform(&mut rng) < model.misclassification_rate {
                let offset = 1 + (uniform(&mut rng) * (n_classes - 1) as f64) as usize;
                class = Some((c + offset.min(n_classes - 1)) % n_classes);
            }
        }
        if model.fov.is_some_and(|f| !f.contains(center)) {
            continue;
        }
        match class {
            Some(c) if model.semantic() => grid.set_cell(cell, &occupied[c])?,
            Some(_) => grid.set_cell(cell, &occupied[0])?,
            None if spec.drivable.is_some_and(|d| rect_contains(&d, center)) => {
                grid.set_cell(cell, &free)?
            }
            None => {}
        }
    }
    Ok(grid)
}
