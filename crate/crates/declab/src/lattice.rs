//! Integer points on circles `x^2 + y^2 = R`: exact enumeration, normalized
//! separation, and assignment of normalized points to arcs and subarcs of a
//! geometric scale ladder.
//!
//! Everything that determines set membership runs in integer arithmetic;
//! floating point enters only for angles, separations, and subarc offsets.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::LadderParams;
use crate::numerics::{isqrt_u64, perfect_sqrt};
use crate::{Error, Result};

/// Radii at or beyond `2^62` put `x^2 + y^2` outside safe `i64` range.
const RADIUS_CAP: u64 = 1 << 62;

/// All integer points on `x^2 + y^2 = R`, canonically sorted.
///
/// The point set is closed under the 8 symmetries
/// `(x, y) -> (+-x, +-y), (+-y, +-x)`, so the count is a multiple of 4
/// whenever it is nonzero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeCircle {
    #[serde(rename = "R")]
    pub r: u64,
    pub points: Vec<(i64, i64)>,
}

impl LatticeCircle {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Normalized points `(x, y)/sqrt(R)` on the unit circle, in the same
    /// order as `points`.
    pub fn normalized(&self) -> Vec<[f64; 2]> {
        let scale = 1.0 / (self.r as f64).sqrt();
        self.points
            .iter()
            .map(|&(x, y)| [x as f64 * scale, y as f64 * scale])
            .collect()
    }
}

/// Enumerates `{(x, y) in Z^2 : x^2 + y^2 = R}` by scanning `x` over
/// `[0, sqrt(R)]` with an exact perfect-square test on the remainder, then
/// closing under the 8 symmetries.
pub fn enumerate_circle_points(r: u64) -> Result<LatticeCircle> {
    if r == 0 {
        return Err(Error::InvalidParameter(
            "radius squared must be at least 1".into(),
        ));
    }
    if r >= RADIUS_CAP {
        return Err(Error::InvalidParameter(format!(
            "radius squared {r} at or beyond the integer guard {RADIUS_CAP}"
        )));
    }

    let root = isqrt_u64(r);
    let firsts: Vec<(i64, i64)> = (0..=root)
        .into_par_iter()
        .filter_map(|x| {
            let y2 = r - x * x;
            perfect_sqrt(y2).and_then(|y| (x <= y).then_some((x as i64, y as i64)))
        })
        .collect();

    let mut set = BTreeSet::new();
    for (x, y) in firsts {
        for (a, b) in [(x, y), (y, x)] {
            for sx in [1, -1] {
                for sy in [1, -1] {
                    set.insert((sx * a, sy * b));
                }
            }
        }
    }
    let points: Vec<(i64, i64)> = set.into_iter().collect();
    debug_assert!(points.len() % 4 == 0);
    Ok(LatticeCircle { r, points })
}

/// Minimum pairwise distance of the points divided by `sqrt(R)`, i.e. the
/// separation after normalization to the unit circle.  Squared distances
/// stay in integer arithmetic; one square root at the end.
///
/// Distinct integer points are at least 1 apart, so the result is always
/// `>= 1/sqrt(R)`.
pub fn normalized_separation(lc: &LatticeCircle) -> Result<f64> {
    let pts = &lc.points;
    if pts.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 points for a separation, have {}",
            pts.len()
        )));
    }
    let mut min_d2 = u128::MAX;
    for (i, &(x1, y1)) in pts.iter().enumerate() {
        for &(x2, y2) in &pts[i + 1..] {
            let dx = (x1 - x2) as i128;
            let dy = (y1 - y2) as i128;
            let d2 = (dx * dx + dy * dy) as u128;
            if d2 < min_d2 {
                min_d2 = d2;
            }
        }
    }
    let sep = ((min_d2 as f64) / (lc.r as f64)).sqrt();
    debug_assert!(sep * (lc.r as f64).sqrt() >= 1.0 - 1e-9);
    Ok(sep)
}

/// Placement of every normalized point into an arc of the unit circle and a
/// subarc within it.
///
/// Arcs split the circle by normalized arclength `t = angle/2pi` into
/// `tau0^-1` half-open cells `[k tau0, (k+1) tau0)`.  Within an arc, the
/// point's horizontal coordinate in the frame that moves the arc's starting
/// point to the origin (concretely, the distance
/// `sin(angle - arc start)` from the arc's left edge) is cut into strips of
/// width `tau_{N+1} tau0`.  Occupancy of the subarc cells is validated, not
/// assumed: collisions are reported as data.
#[derive(Clone, Debug)]
pub struct ArcAssignment {
    pub tau0_inv: u64,
    /// Reciprocal of the subarc strip width `tau_{N+1} tau0`.
    pub inv_subwidth: u128,
    /// Per input point: (arc index, subarc index), parallel to the
    /// enumeration order of the circle.
    pub assignment: Vec<(u64, u128)>,
    /// Number of points per occupied arc, sorted by arc index.
    pub occupancy: Vec<(u64, usize)>,
    /// Subarc cells holding more than one point: (arc, subarc, count).
    pub violations: Vec<(u64, u128, usize)>,
}

impl ArcAssignment {
    pub fn max_subarc_occupancy(&self) -> usize {
        if self.violations.is_empty() {
            usize::from(!self.assignment.is_empty())
        } else {
            self.violations.iter().map(|&(_, _, c)| c).max().unwrap()
        }
    }
}

/// Core arc/subarc placement with explicit widths: `tau0 = 1/tau0_inv` and
/// subarc strips of width `1/inv_subwidth`.
pub fn assign_points_with_widths(
    lc: &LatticeCircle,
    tau0_inv: u64,
    inv_subwidth: u128,
) -> Result<ArcAssignment> {
    if tau0_inv == 0 || inv_subwidth == 0 {
        return Err(Error::InvalidParameter(
            "arc and subarc widths must be positive".into(),
        ));
    }
    if (inv_subwidth as f64) < tau0_inv as f64 {
        return Err(Error::InvalidParameter(format!(
            "subarc width 1/{inv_subwidth} wider than the arc width 1/{tau0_inv}"
        )));
    }

    let mut assignment = Vec::with_capacity(lc.points.len());
    let mut arc_counts: HashMap<u64, usize> = HashMap::new();
    let mut cell_counts: HashMap<(u64, u128), usize> = HashMap::new();
    for &(x, y) in &lc.points {
        let theta = (y as f64).atan2(x as f64);
        let mut t = theta / TAU;
        if t < 0.0 {
            t += 1.0;
        }
        let arc = ((t * tau0_inv as f64).floor() as u64).min(tau0_inv - 1);
        let rel = TAU * (t - arc as f64 / tau0_inv as f64);
        let horizontal = rel.sin();
        let sub = (horizontal * inv_subwidth as f64).floor().max(0.0) as u128;
        assignment.push((arc, sub));
        *arc_counts.entry(arc).or_insert(0) += 1;
        *cell_counts.entry((arc, sub)).or_insert(0) += 1;
    }

    let mut occupancy: Vec<(u64, usize)> = arc_counts.into_iter().collect();
    occupancy.sort_unstable();
    let mut violations: Vec<(u64, u128, usize)> = cell_counts
        .into_iter()
        .filter(|&(_, c)| c > 1)
        .map(|((a, s), c)| (a, s, c))
        .collect();
    violations.sort_unstable();

    Ok(ArcAssignment {
        tau0_inv,
        inv_subwidth,
        assignment,
        occupancy,
        violations,
    })
}

/// Arc/subarc placement at the widths a scale ladder prescribes:
/// `tau0 = C0^(2 * 2^N)` arcs and strips of width `tau_{N+1} tau0`.
///
/// Checks the separation consistency `1/sqrt(R) >= tau_{N+1}` that the
/// one-point-per-subarc geometry needs, and that the exact reciprocal
/// widths fit the integer index types.
pub fn assign_points_to_arcs(lc: &LatticeCircle, ladder: &LadderParams) -> Result<ArcAssignment> {
    let log_k = (ladder.k as f64).ln();
    let log_sep_inv = 0.5 * (lc.r as f64).ln();
    let last = *ladder.tau_exponents.last().unwrap();
    if log_sep_inv > last as f64 * log_k * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "separation 1/sqrt({}) is finer than the ladder floor tau_{}",
            lc.r,
            ladder.n + 1
        )));
    }

    let tau0_inv = checked_power(ladder.k, ladder.tau_exponents[0])
        .and_then(|v| u64::try_from(v).ok())
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "arc count {}^{} does not fit the index type",
                ladder.k, ladder.tau_exponents[0]
            ))
        })?;
    let inv_subwidth = checked_power(ladder.k, ladder.tau_exponents[0] + last).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "subarc count {}^{} does not fit the index type",
            ladder.k,
            ladder.tau_exponents[0] + last
        ))
    })?;
    assign_points_with_widths(lc, tau0_inv, inv_subwidth)
}

fn checked_power(base: u64, exp: u64) -> Option<u128> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base as u128)?;
    }
    Some(acc)
}
