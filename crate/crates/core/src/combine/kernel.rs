//! Combination arithmetic over raw `(mask, mass)` slices.
//!
//! The public rules in the parent module and the grid fusion loop both call
//! into these functions, so a fused cell is bit-identical to combining the
//! cell assignments directly.

use smallvec::SmallVec;

use super::{CombineError, SourceParams};

pub(crate) type Focal = SmallVec<[(u16, f64); 16]>;

#[inline]
fn accumulate(out: &mut Focal, mask: u16, mass: f64) {
    match out.iter_mut().find(|(m, _)| *m == mask) {
        Some(entry) => entry.1 += mass,
        None => out.push((mask, mass)),
    }
}

#[inline]
fn finish(out: &mut Focal) {
    out.retain(|(_, v)| *v > 0.0);
    out.sort_unstable_by_key(|&(m, _)| m);
}

/// `K = Σ_{X∩Y=∅} m1(X) m2(Y)`, clamped to `[0, 1]`.
pub(crate) fn conflict(a: &[(u16, f64)], b: &[(u16, f64)]) -> f64 {
    let mut k = 0.0;
    for &(x, mx) in a {
        for &(y, my) in b {
            if x & y == 0 {
                k += mx * my;
            }
        }
    }
    k.min(1.0)
}

/// Unnormalized conjunctive masses for every nonempty intersection.
/// Returns the conflict mass.
fn conjunctive(a: &[(u16, f64)], b: &[(u16, f64)], out: &mut Focal) -> f64 {
    out.clear();
    let mut k = 0.0;
    for &(x, mx) in a {
        for &(y, my) in b {
            let meet = x & y;
            if meet == 0 {
                k += mx * my;
            } else {
                accumulate(out, meet, mx * my);
            }
        }
    }
    k
}

pub(crate) fn dempster(
    a: &[(u16, f64)],
    b: &[(u16, f64)],
    out: &mut Focal,
) -> Result<(), CombineError> {
    let k = conjunctive(a, b, out);
    if out.is_empty() || k >= 1.0 {
        return Err(CombineError::TotalConflict);
    }
    // The surviving products sum to 1 − K. Summing them directly keeps the
    // result normalized even when K is close to one.
    let total: f64 = out.iter().map(|e| e.1).sum();
    if k > 0.0 || (total - 1.0).abs() > 1e-12 {
        for entry in out.iter_mut() {
            entry.1 /= total;
        }
    }
    finish(out);
    Ok(())
}

pub(crate) fn yager(a: &[(u16, f64)], b: &[(u16, f64)], omega: u16, out: &mut Focal) {
    let k = conjunctive(a, b, out);
    if k > 0.0 {
        accumulate(out, omega, k);
    }
    finish(out);
}

pub(crate) fn er(
    a: &[(u16, f64)],
    pa: SourceParams,
    b: &[(u16, f64)],
    pb: SourceParams,
    out: &mut Focal,
) -> Result<(), CombineError> {
    out.clear();
    let da = 1.0 + pa.weight() - pa.reliability();
    let db = 1.0 + pb.weight() - pb.reliability();
    let keep_a = 1.0 - pb.reliability();
    let keep_b = 1.0 - pa.reliability();
    for &(x, mx) in a {
        accumulate(out, x, keep_a * (mx / da));
    }
    for &(y, my) in b {
        accumulate(out, y, keep_b * (my / db));
    }
    for &(x, mx) in a {
        let tx = mx / da;
        for &(y, my) in b {
            let meet = x & y;
            if meet != 0 {
                accumulate(out, meet, tx * (my / db));
            }
        }
    }
    let total: f64 = out.iter().map(|e| e.1).sum();
    if total.is_nan() || total <= 0.0 {
        return Err(CombineError::DegenerateNormalizer);
    }
    for entry in out.iter_mut() {
        entry.1 /= total;
    }
    finish(out);
    Ok(())
}

#[inline]
pub(crate) fn reliability(k: f64, b: f64) -> f64 {
    1.0 - (1.0 - b) * k
}

pub(crate) fn er_adaptive(
    a: &[(u16, f64)],
    b_first: f64,
    b: &[(u16, f64)],
    b_second: f64,
    out: &mut Focal,
) -> Result<(), CombineError> {
    let k = conflict(a, b);
    let pa = SourceParams::trusted(1.0, reliability(k, b_first));
    let pb = SourceParams::trusted(1.0, reliability(k, b_second));
    er(a, pa, b, pb, out)
}
