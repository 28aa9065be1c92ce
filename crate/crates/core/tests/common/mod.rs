//! Test support: naive reference implementations over explicit element
//! sets, seeded random inputs, and scene builders.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use evgrid::combine::{er_combine_adaptive, SourceParams};
use evgrid::evidence::{Bba, Fod, HypothesisSet};
use evgrid::grid::{CellIndex, GridGeometry, GridMap, LayerCatalog};
use evgrid::metrics::FovSector;
use evgrid::scenario::{CellSize, ScenarioSpec, SceneObject, SensorModel};
use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

pub type Set = BTreeSet<usize>;
pub type Assignment = BTreeMap<Set, f64>;

/// Explicit list of frame elements and assignments over sets of them.
pub mod oracle {
    use super::*;

    pub fn powerset(n: usize) -> Vec<Set> {
        let mut out = vec![Set::new()];
        for e in 0..n {
            let extended: Vec<Set> = out
                .iter()
                .map(|s| {
                    let mut t = s.clone();
                    t.insert(e);
                    t
                })
                .collect();
            out.extend(extended);
        }
        out
    }

    pub fn from_bba(m: &Bba) -> Assignment {
        m.focal_elements()
            .map(|(s, v)| (s.indices().collect::<Set>(), v))
            .collect()
    }

    pub fn hypothesis(fod: &Fod, s: &Set) -> HypothesisSet {
        fod.set_from_names(s.iter().map(|i| fod.names()[*i].as_str()))
            .unwrap()
    }

    fn full(n: usize) -> Set {
        (0..n).collect()
    }

    fn products(m1: &Assignment, m2: &Assignment) -> (Assignment, f64) {
        let mut joint = Assignment::new();
        let mut conflict = 0.0;
        for (b, x) in m1 {
            for (c, y) in m2 {
                let a: Set = b.intersection(c).copied().collect();
                if a.is_empty() {
                    conflict += x * y;
                } else {
                    *joint.entry(a).or_insert(0.0) += x * y;
                }
            }
        }
        (joint, conflict)
    }

    pub fn conflict(m1: &Assignment, m2: &Assignment) -> f64 {
        products(m1, m2).1
    }

    pub fn dempster(m1: &Assignment, m2: &Assignment) -> Assignment {
        let (joint, k) = products(m1, m2);
        joint.into_iter().map(|(a, v)| (a, v / (1.0 - k))).collect()
    }

    pub fn yager(m1: &Assignment, m2: &Assignment, n: usize) -> Assignment {
        let (mut joint, k) = products(m1, m2);
        *joint.entry(full(n)).or_insert(0.0) += k;
        joint
    }

    /// Discounted combination followed by normalization over nonempty sets.
    pub fn er(m1: &Assignment, w1: f64, r1: f64, m2: &Assignment, w2: f64, r2: f64) -> Assignment {
        let d1: Assignment = m1
            .iter()
            .map(|(s, v)| (s.clone(), v / (1.0 + w1 - r1)))
            .collect();
        let d2: Assignment = m2
            .iter()
            .map(|(s, v)| (s.clone(), v / (1.0 + w2 - r2)))
            .collect();
        let (mut joint, _) = products(&d1, &d2);
        for (s, v) in &d1 {
            *joint.entry(s.clone()).or_insert(0.0) += (1.0 - r2) * v;
        }
        for (s, v) in &d2 {
            *joint.entry(s.clone()).or_insert(0.0) += (1.0 - r1) * v;
        }
        let total: f64 = joint.values().sum();
        joint.into_iter().map(|(s, v)| (s, v / total)).collect()
    }

    pub fn er_adaptive(m1: &Assignment, b1: f64, m2: &Assignment, b2: f64) -> Assignment {
        let k = conflict(m1, m2);
        er(m1, 1.0, 1.0 - (1.0 - b1) * k, m2, 1.0, 1.0 - (1.0 - b2) * k)
    }

    /// Largest absolute difference to `m` over every subset of the frame.
    pub fn max_diff(expected: &Assignment, m: &Bba) -> f64 {
        let fod = m.fod();
        powerset(fod.size())
            .iter()
            .skip(1)
            .map(|s| {
                let e = expected.get(s).copied().unwrap_or(0.0);
                (e - m.mass(hypothesis(fod, s))).abs()
            })
            .fold(0.0, f64::max)
    }

    /// eTP, eFP, eFN of one cell pair for `omega`.
    pub fn eiou_cell(reference: &Assignment, estimate: &Assignment, omega: &Set) -> [f64; 3] {
        let est_omega = estimate.get(omega).copied().unwrap_or(0.0);
        let ref_omega = reference.get(omega).copied().unwrap_or(0.0);
        let mut tp = 0.0;
        let mut fp = 0.0;
        for (phi, v) in reference {
            if phi.is_subset(omega) {
                tp += v * est_omega;
            } else if phi.is_disjoint(omega) {
                fp += v * est_omega;
            }
        }
        let fn_: f64 = estimate
            .iter()
            .filter(|(phi, _)| phi.is_disjoint(omega))
            .map(|(_, v)| ref_omega * v)
            .sum();
        [tp, fp, fn_]
    }

    /// Bitwise CRC-32 (IEEE, reflected, polynomial 0xEDB88320).
    pub fn crc32(bytes: &[u8]) -> u32 {
        let mut crc = 0xFFFF_FFFFu32;
        for b in bytes {
            crc ^= u32::from(*b);
            for _ in 0..8 {
                crc = if crc & 1 == 1 {
                    (crc >> 1) ^ 0xEDB8_8320
                } else {
                    crc >> 1
                };
            }
        }
        !crc
    }
}

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

pub fn uniform(rng: &mut SplitMix64) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn below(rng: &mut SplitMix64, n: usize) -> usize {
    (uniform(rng) * n as f64) as usize
}

pub fn letters(n: usize) -> Fod {
    Fod::new((0..n).map(|i| ((b'A' + i as u8) as char).to_string())).unwrap()
}

/// Random assignment with one to four focal sets drawn from the nonempty
/// subsets of `fod`.
pub fn random_bba(rng: &mut SplitMix64, fod: &Fod) -> Bba {
    let full = (1usize << fod.size()) - 1;
    let k = 1 + below(rng, 4);
    let sets: Vec<HypothesisSet> = (0..k)
        .map(|_| fod.set_from_mask((1 + below(rng, full)) as u16).unwrap())
        .collect();
    random_over(rng, fod, &sets)
}

/// Random masses over the given sets.
pub fn random_over(rng: &mut SplitMix64, fod: &Fod, sets: &[HypothesisSet]) -> Bba {
    let weights: Vec<f64> = sets.iter().map(|_| uniform(rng) + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    Bba::new(fod, sets.iter().zip(&weights).map(|(s, w)| (*s, w / total))).unwrap()
}

pub fn random_params(rng: &mut SplitMix64) -> SourceParams {
    let r = uniform(rng);
    let w = uniform(rng) * (1.0 + r);
    SourceParams::new(w.min(1.0), r).unwrap()
}

/// Single-precision rounding as applied when a cell is stored.
pub fn stored(m: &Assignment) -> Assignment {
    m.iter()
        .map(|(s, v)| (s.clone(), f64::from(*v as f32)))
        .collect()
}

pub fn random_grid(
    rng: &mut SplitMix64,
    fod: &Fod,
    catalog: &LayerCatalog,
    size: [usize; 2],
) -> GridMap {
    random_grid_with(rng, fod, catalog, size, false)
}

/// Random grid whose cells all keep some mass on `Ω`, so that no pair of
/// cells is in total conflict.
pub fn random_open_grid(
    rng: &mut SplitMix64,
    fod: &Fod,
    catalog: &LayerCatalog,
    size: [usize; 2],
) -> GridMap {
    random_grid_with(rng, fod, catalog, size, true)
}

fn random_grid_with(
    rng: &mut SplitMix64,
    fod: &Fod,
    catalog: &LayerCatalog,
    size: [usize; 2],
    open: bool,
) -> GridMap {
    let geometry = GridGeometry::new([0.0, 0.0], [1.0, 1.0], size).unwrap();
    let mut grid = GridMap::new(fod, geometry, catalog.clone()).unwrap();
    for cell in geometry.cells() {
        let k = 1 + below(rng, catalog.len().min(4));
        let mut sets: Vec<HypothesisSet> = if open { vec![fod.omega()] } else { Vec::new() };
        while sets.len() < k + usize::from(open) {
            let s = catalog.sets()[below(rng, catalog.len())];
            if !sets.contains(&s) {
                sets.push(s);
            }
        }
        grid.set_cell(cell, &random_over(rng, fod, &sets)).unwrap();
    }
    grid
}

pub fn cell_assignment(grid: &GridMap, cell: CellIndex) -> Assignment {
    grid.catalog()
        .sets()
        .iter()
        .filter_map(|s| {
            let v = grid.mass(cell, *s).unwrap();
            (v > 0.0).then(|| (s.indices().collect::<Set>(), v))
        })
        .collect()
}

pub fn zadeh(fod: &Fod) -> (Bba, Bba) {
    let [a, b, c] = [0, 1, 2].map(|i| fod.singleton(i));
    (
        Bba::new(fod, [(a, 0.9), (b, 0.1)]).unwrap(),
        Bba::new(fod, [(b, 0.1), (c, 0.9)]).unwrap(),
    )
}

/// eIoU of `{A}` against a reference `m({A}) = 1` after fusing the two
/// Zadeh assignments with credibilities `b1`, `b2`.
pub fn zadeh_sweep_entry(b1: f64, b2: f64) -> f64 {
    let fod = letters(3);
    let (m1, m2) = zadeh(&fod);
    let fused = er_combine_adaptive(&m1, b1, &m2, b2).unwrap();
    let a = fod.singleton(0);
    let tp = fused.mass(a);
    let fn_: f64 = fused
        .focal_elements()
        .filter(|(s, _)| s.is_disjoint(a))
        .map(|(_, v)| v)
        .sum();
    tp / (tp + fn_)
}

/// Street scene, 40 m by 20 m at 0.25 m cells, sensors at the left edge
/// looking along +x. One car in the lane plus a parked cyclist and a
/// pedestrian whose positions vary with `seed`.
pub fn street_scene(seed: u64) -> ScenarioSpec {
    let mut r = rng(seed ^ 0x5eed);
    let car_x = 10.0 + 12.0 * uniform(&mut r);
    let car_y = 7.0 + 3.0 * uniform(&mut r);
    let cyclist_x = 4.0 + 4.0 * uniform(&mut r);
    let pedestrian_x = 26.0 + 8.0 * uniform(&mut r);
    ScenarioSpec {
        origin: [0.0, 0.0],
        cell_size: CellSize::Square(0.25),
        size: [160, 80],
        drivable: Some([0.0, 2.0, 40.0, 18.0]),
        objects: vec![
            SceneObject {
                class: "c".into(),
                rect: [car_x, car_y, car_x + 4.5, car_y + 2.0],
            },
            SceneObject {
                class: "cy".into(),
                rect: [cyclist_x, 3.0, cyclist_x + 1.75, 3.75],
            },
            SceneObject {
                class: "p".into(),
                rect: [pedestrian_x, 15.0, pedestrian_x + 0.75, 15.75],
            },
        ],
        seed,
    }
}

pub fn camera_fov() -> FovSector {
    FovSector {
        apex: [0.0, 10.0],
        heading: 0.0,
        half_angle: 0.6,
        max_range: Some(38.0),
    }
}

/// Noiseless lidar: occupancy without semantics, full view.
pub fn clean_lidar() -> SensorModel {
    let mut m = SensorModel::lidar(0.9, 0.8);
    m.position = [0.0, 10.0];
    m
}

/// Stereo camera that sees objects too close, with edge jitter and class
/// confusion, inside a forward sector.
pub fn biased_stereo() -> SensorModel {
    let mut m = SensorModel::stereo(0.95, 0.8);
    m.position = [0.0, 10.0];
    m.range_bias = 1.5;
    m.position_noise_sigma = 0.15;
    m.misclassification_rate = 0.05;
    m.fov = Some(camera_fov());
    m
}
