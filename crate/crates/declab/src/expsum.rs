//! Additive correlation counts for planar integer point sets and Lᵖ norms of
//! their exponential sums.
//!
//! The central quantity is the sixth-order energy `S6`: the number of ordered
//! six-tuples from a set whose first three members have the same vector sum as
//! the last three.  For the sum `F(z) = Σ_a e(a·z)` over integer points, `S6`
//! equals the mean of `|F|⁶` over the period square, which gives three
//! independent routes to the same integer: direct enumeration, a triple-sum
//! multiplicity map, and an exact trigonometric grid mean.  The fourth-order
//! analogue `S4` plays the same role one convolution earlier.

use std::collections::HashMap;

use num::complex::Complex64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::extension::eval::{expsum_field, ShearGrid};
use crate::geometry::SquareRegion;
use crate::lattice::LatticeCircle;
use crate::numerics::{e2pi, isqrt_u64, simpson_pattern, Kahan};

/// Largest point count the triple-sum map accepts; beyond it the quadratic
/// intermediate map no longer fits comfortably in memory.
pub const HASH_POINT_CAP: usize = 5_000;

/// Largest point count the six-fold enumeration waits for.
pub const BRUTE_POINT_CAP: usize = 12;

/// Grid oversampling factor that makes the sixth-moment mean exact: `|F|⁶`
/// has frequencies no larger than six times the coordinate bound per axis,
/// so `m ≥ 12·max|c| + 1` resolves them all.
pub const S6_NYQUIST_FACTOR: u64 = 12;

/// Fourth-moment analogue of [`S6_NYQUIST_FACTOR`].
pub const S4_NYQUIST_FACTOR: u64 = 8;

/// Coordinate magnitude cap keeping three-fold integer sums far from i64
/// overflow.
const COORD_CAP: i64 = 1 << 40;

/// Largest grid side the exact-moment mean will sweep.
const MOMENT_GRID_CAP: u64 = 20_000;

/// A grid moment must land within this relative distance of an integer.
const MOMENT_RESIDUAL_TOL: f64 = 1e-6;

/// Largest integer a grid moment may round to while every nearby integer is
/// still exactly representable in f64.
const MOMENT_EXACT_CAP: f64 = 9_007_199_254_740_992.0;

/// Radii whose excess exponents are pinned by the frozen envelope below.
pub const SRTC_SUITE: [u64; 5] = [2, 5, 25, 325, 1105];

/// Upper envelope for the sixth-moment excess exponent across [`SRTC_SUITE`].
/// The largest member is e(2) = log₄(400/64) ≈ 1.3219; the exponent decays as
/// the circles fill out.
pub const SRTC_EXCESS_CAP: f64 = 1.33;

fn guard_coords(points: &[(i64, i64)]) -> Result<()> {
    for &(x, y) in points {
        if x.abs() > COORD_CAP || y.abs() > COORD_CAP {
            return Err(Error::InvalidParameter(format!(
                "coordinate ({x}, {y}) exceeds the magnitude cap {COORD_CAP}"
            )));
        }
    }
    Ok(())
}

fn merge_counts(
    a: HashMap<(i64, i64), u64>,
    b: HashMap<(i64, i64), u64>,
) -> HashMap<(i64, i64), u64> {
    let (mut big, small) = if a.len() < b.len() { (b, a) } else { (a, b) };
    for (k, v) in small {
        *big.entry(k).or_insert(0) += v;
    }
    big
}

/// Multiplicity map of all ordered pair sums, sharded over the first index.
fn pair_sum_map(points: &[(i64, i64)]) -> HashMap<(i64, i64), u64> {
    points
        .par_iter()
        .fold(HashMap::new, |mut acc, &(x1, y1)| {
            for &(x2, y2) in points {
                *acc.entry((x1 + x2, y1 + y2)).or_insert(0) += 1;
            }
            acc
        })
        .reduce(HashMap::new, merge_counts)
}

fn sum_of_squared_counts(map: &HashMap<(i64, i64), u64>) -> u128 {
    map.values().map(|&c| (c as u128) * (c as u128)).sum()
}

/// Number of ordered six-tuples from `points` whose leading and trailing
/// triples share a vector sum, via the triple-sum multiplicity map.
///
/// The map keyed on pair sums keeps the work near `|A+A|·N` instead of `N³`,
/// and the counts stay exact in integer arithmetic throughout.
pub fn count_s6_hash(points: &[(i64, i64)]) -> Result<u128> {
    guard_coords(points)?;
    if points.is_empty() {
        return Err(Error::InvalidParameter(
            "triple-sum count needs at least one point".into(),
        ));
    }
    if points.len() > HASH_POINT_CAP {
        return Err(Error::ResourceGuard(format!(
            "{} points exceed the triple-sum map cap {HASH_POINT_CAP}; use the dft route",
            points.len()
        )));
    }
    let pairs = pair_sum_map(points);
    let triples = points
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<(i64, i64), u64>, &(x3, y3)| {
            for (&(sx, sy), &c) in &pairs {
                *acc.entry((sx + x3, sy + y3)).or_insert(0) += c;
            }
            acc
        })
        .reduce(HashMap::new, merge_counts);
    Ok(sum_of_squared_counts(&triples))
}

/// Oracle-grade six-fold enumeration, refused above [`BRUTE_POINT_CAP`]
/// points.  The empty set counts zero tuples.
pub fn count_s6_brute(points: &[(i64, i64)]) -> Result<u128> {
    guard_coords(points)?;
    if points.len() > BRUTE_POINT_CAP {
        return Err(Error::InvalidParameter(format!(
            "{} points exceed the enumeration cap {BRUTE_POINT_CAP}; use the hash or dft route",
            points.len()
        )));
    }
    let mut count: u128 = 0;
    for a in points {
        for b in points {
            for c in points {
                let (sx, sy) = (a.0 + b.0 + c.0, a.1 + b.1 + c.1);
                for d in points {
                    for e in points {
                        for f in points {
                            if d.0 + e.0 + f.0 == sx && d.1 + e.1 + f.1 == sy {
                                count += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(count)
}

/// Fourth-order analogue of [`count_s6_hash`]: ordered quadruples whose
/// leading and trailing pairs share a vector sum.
pub fn count_s4(points: &[(i64, i64)]) -> Result<u128> {
    guard_coords(points)?;
    if points.is_empty() {
        return Err(Error::InvalidParameter(
            "pair-sum count needs at least one point".into(),
        ));
    }
    if points.len() > HASH_POINT_CAP {
        return Err(Error::ResourceGuard(format!(
            "{} points exceed the pair-sum map cap {HASH_POINT_CAP}; use the dft route",
            points.len()
        )));
    }
    Ok(sum_of_squared_counts(&pair_sum_map(points)))
}

/// Exact mean of `|F|^{2q}` over the `m × m` periodic grid, where `F` is the
/// exponential sum of `points` with integer frequencies.
///
/// Column phases advance by integer index steps in a shared root-of-unity
/// table, so no rounding drifts with grid position; rows accumulate with
/// compensation and merge in index order.
fn periodic_mean_power(points: &[(i64, i64)], m: u64, q: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter("grid size must be positive".into()));
    }
    if m > MOMENT_GRID_CAP {
        return Err(Error::ResourceGuard(format!(
            "grid side {m} exceeds the sweep cap {MOMENT_GRID_CAP}; use the hash route"
        )));
    }
    let mm = m as usize;
    let table: Vec<Complex64> = (0..mm).map(|t| e2pi(t as f64 / m as f64)).collect();
    let reduced: Vec<(usize, usize)> = points
        .iter()
        .map(|&(x, y)| {
            (
                x.rem_euclid(m as i64) as usize,
                y.rem_euclid(m as i64) as usize,
            )
        })
        .collect();
    let row_sums: Vec<f64> = (0..mm)
        .into_par_iter()
        .map(|j| {
            let mut idx: Vec<usize> = reduced.iter().map(|&(xr, _)| (xr * j) % mm).collect();
            let mut acc = Kahan::new();
            for _ in 0..mm {
                let mut re = 0.0;
                let mut im = 0.0;
                for (slot, &(_, yr)) in idx.iter_mut().zip(&reduced) {
                    let w = table[*slot];
                    re += w.re;
                    im += w.im;
                    *slot += yr;
                    if *slot >= mm {
                        *slot -= mm;
                    }
                }
                acc.add((re * re + im * im).powi(q as i32));
            }
            acc.total()
        })
        .collect();
    let mut total = Kahan::new();
    for v in row_sums {
        total.add(v);
    }
    Ok(total.total() / (m as f64 * m as f64))
}

fn grid_moment(points: &[(i64, i64)], m: u64, q: u32, factor: u64) -> Result<u128> {
    guard_coords(points)?;
    if points.is_empty() {
        return Ok(0);
    }
    let maxc = points
        .iter()
        .map(|&(x, y)| x.unsigned_abs().max(y.unsigned_abs()))
        .max()
        .unwrap_or(0);
    let needed = factor * maxc + 1;
    if m < needed {
        return Err(Error::InvalidParameter(format!(
            "grid side {m} aliases degree-{factor} products of coordinates up to {maxc}; need at least {needed}"
        )));
    }
    let mean = periodic_mean_power(points, m, q)?;
    let rounded = mean.round();
    if rounded > MOMENT_EXACT_CAP {
        return Err(Error::Numerical(format!(
            "moment {mean:e} exceeds the exactly representable integer range"
        )));
    }
    if (mean - rounded).abs() > MOMENT_RESIDUAL_TOL * rounded.max(1.0) || rounded < 0.0 {
        return Err(Error::Numerical(format!(
            "grid moment {mean} does not round cleanly to an integer"
        )));
    }
    Ok(rounded as u128)
}

/// Sixth moment of the exponential sum on an `m × m` grid over the period
/// square, rounded to the integer it provably equals.
///
/// Requires `m ≥ 12·max|coordinate| + 1`; the grid mean then annihilates
/// every nonzero frequency of the degree-six product and the result must
/// round cleanly, otherwise a precision-loss error is raised.
pub fn s6_via_dft(points: &[(i64, i64)], m: u64) -> Result<u128> {
    grid_moment(points, m, 3, S6_NYQUIST_FACTOR)
}

/// Fourth-moment counterpart of [`s6_via_dft`]; requires
/// `m ≥ 8·max|coordinate| + 1`.
pub fn s4_via_dft(points: &[(i64, i64)], m: u64) -> Result<u128> {
    grid_moment(points, m, 2, S4_NYQUIST_FACTOR)
}

/// Smallest default grid side making the sixth moment of a radius-√r circle
/// exact: twelve times the coordinate bound `⌈√r⌉`, plus one.
pub fn s6_grid_size(r: u64) -> u64 {
    let s = isqrt_u64(r);
    let ceil = if s * s == r { s } else { s + 1 };
    S6_NYQUIST_FACTOR * ceil + 1
}

/// Counting route behind a [`CorrelationResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Brute6,
    Hash3,
    Dft,
}

pub(crate) fn u128_as_string<S: Serializer>(
    v: &u128,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(&v.to_string())
}

/// Correlation counts for one circle.  The big counters serialize as decimal
/// strings so JSON consumers keep exactness beyond 2⁵³.
#[derive(Clone, Debug, Serialize)]
pub struct CorrelationResult {
    #[serde(rename = "R")]
    pub r: u64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "S6", serialize_with = "u128_as_string")]
    pub s6: u128,
    #[serde(rename = "S4", serialize_with = "u128_as_string")]
    pub s4: u128,
    #[serde(rename = "ratio_S6_N3")]
    pub ratio_s6_n3: f64,
    pub method: Method,
}

/// Counts `S6` by the requested route and `S4` by the pair map, for the
/// points of one circle.  An empty circle reports zero counts directly.
pub fn correlate_circle(lc: &LatticeCircle, method: Method) -> Result<CorrelationResult> {
    let n = lc.n();
    if n == 0 {
        return Ok(CorrelationResult {
            r: lc.r,
            n,
            s6: 0,
            s4: 0,
            ratio_s6_n3: 0.0,
            method,
        });
    }
    let s6 = match method {
        Method::Brute6 => count_s6_brute(&lc.points)?,
        Method::Hash3 => count_s6_hash(&lc.points)?,
        Method::Dft => s6_via_dft(&lc.points, s6_grid_size(lc.r))?,
    };
    let s4 = count_s4(&lc.points)?;
    Ok(CorrelationResult {
        r: lc.r,
        n,
        s6,
        s4,
        ratio_s6_n3: s6 as f64 / (n as f64).powi(3),
        method,
    })
}

/// Averaging domain for [`expsum_lp_norm`].
#[derive(Clone, Debug)]
pub enum NormDomain {
    /// Exact mean over the unit period square with the integer points as
    /// frequencies; restricted to even `p` where the grid mean is an
    /// identity rather than a quadrature.
    Period,
    /// Simpson quadrature over an explicit square with the points scaled to
    /// the unit circle.
    Normalized(SquareRegion),
}

/// Lᵖ average of a circle's exponential sum over a square domain.
#[derive(Clone, Debug)]
pub struct ExpSumSpec {
    pub points: LatticeCircle,
    pub p: f64,
    /// Nodes per grid axis.
    pub m: u64,
    pub domain: NormDomain,
}

impl ExpSumSpec {
    /// Exact even-moment norm over the period square.
    pub fn period(points: LatticeCircle, p: f64, m: u64) -> ExpSumSpec {
        ExpSumSpec {
            points,
            p,
            m,
            domain: NormDomain::Period,
        }
    }

    /// Quadrature norm of the unit-circle normalization over `square`.
    pub fn normalized(points: LatticeCircle, p: f64, square: SquareRegion, m: u64) -> ExpSumSpec {
        ExpSumSpec {
            points,
            p,
            m,
            domain: NormDomain::Normalized(square),
        }
    }
}

/// Normalized Lᵖ norm `(avg |F|^p)^{1/p}` of the exponential sum described by
/// `spec`.
///
/// In period mode the value is exact for `p ∈ {2, 4, 6}` once the grid side
/// reaches `p·max|coordinate| + 1`; a single point gives exactly 1 for every
/// `p` in either mode.
pub fn expsum_lp_norm(spec: &ExpSumSpec) -> Result<f64> {
    let p = spec.p;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "norm exponent {p} must be a finite value of at least 1"
        )));
    }
    let pts = &spec.points.points;
    if pts.is_empty() {
        return Ok(0.0);
    }
    match &spec.domain {
        NormDomain::Period => {
            guard_coords(pts)?;
            let q = match p {
                v if v == 2.0 => 1u32,
                v if v == 4.0 => 2,
                v if v == 6.0 => 3,
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "period mode is exact only for p in {{2, 4, 6}}, got {p}"
                    )))
                }
            };
            let maxc = pts
                .iter()
                .map(|&(x, y)| x.unsigned_abs().max(y.unsigned_abs()))
                .max()
                .unwrap_or(0);
            let needed = 2 * q as u64 * maxc + 1;
            if spec.m < needed {
                return Err(Error::InvalidParameter(format!(
                    "grid side {} aliases the degree-{p} moment; need at least {needed}",
                    spec.m
                )));
            }
            Ok(periodic_mean_power(pts, spec.m, q)?.powf(1.0 / p))
        }
        NormDomain::Normalized(square) => {
            if spec.m < 3 || spec.m % 2 == 0 {
                return Err(Error::InvalidParameter(format!(
                    "Simpson quadrature needs an odd node count of at least 3 per axis, got {}",
                    spec.m
                )));
            }
            let nodes = spec.m as usize;
            let spacing = square.side / (nodes - 1) as f64;
            let grid = ShearGrid::axis_aligned(square, spacing, 1)?;
            let terms: Vec<(Complex64, [f64; 2])> = spec
                .points
                .normalized()
                .into_iter()
                .map(|a| (Complex64::new(1.0, 0.0), a))
                .collect();
            let field = expsum_field(&terms, &grid);
            let w = simpson_pattern(nodes - 1);
            let mut acc = Kahan::new();
            for iy in 0..nodes {
                let mut row = Kahan::new();
                for ix in 0..nodes {
                    let v = field[iy * nodes + ix];
                    row.add(w[ix] * (v.re * v.re + v.im * v.im).powf(p / 2.0));
                }
                acc.add(w[iy] * row.total());
            }
            let integral = acc.total() * (spacing / 3.0) * (spacing / 3.0);
            Ok((integral / (square.side * square.side)).powf(1.0 / p))
        }
    }
}

/// One row of the moment-excess table: the exponent `e` with
/// `S_p = N^{p/2 + e}` for the circle of squared radius `r`.
#[derive(Clone, Debug, Serialize)]
pub struct ExcessRow {
    #[serde(rename = "R")]
    pub r: u64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(serialize_with = "u128_as_string")]
    pub moment: u128,
    pub excess: f64,
}

/// Tabulates the moment-excess exponent `e(R) = log(S_p / N^{p/2}) / log N`
/// for each radius, using exact counts.
///
/// `p` selects the fourth or sixth moment.  Each circle must carry at least
/// 4 points.  For the sixth moment the members of [`SRTC_SUITE`] are checked
/// against the frozen envelope [`SRTC_EXCESS_CAP`]; the exponent is allowed
/// to be negative and no lower envelope exists.
pub fn srtc_envelope_check(rs: &[u64], p: f64) -> Result<Vec<ExcessRow>> {
    let half = match p {
        v if v == 4.0 => 2u32,
        v if v == 6.0 => 3,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "excess table covers the even moments p = 4 and p = 6, got {p}"
            )))
        }
    };
    let mut rows = Vec::with_capacity(rs.len());
    for &r in rs {
        let lc = crate::lattice::enumerate_circle_points(r)?;
        let n = lc.n();
        if n < 4 {
            return Err(Error::InvalidParameter(format!(
                "radius^2 {r} carries {n} lattice points; the excess exponent needs at least 4"
            )));
        }
        let moment = if half == 3 {
            count_s6_hash(&lc.points)?
        } else {
            count_s4(&lc.points)?
        };
        let excess = ((moment as f64).ln() - half as f64 * (n as f64).ln()) / (n as f64).ln();
        if half == 3 && SRTC_SUITE.contains(&r) {
            debug_assert!(
                excess <= SRTC_EXCESS_CAP,
                "excess {excess} at R = {r} breaks the frozen envelope {SRTC_EXCESS_CAP}"
            );
        }
        rows.push(ExcessRow { r, n, moment, excess });
    }
    Ok(rows)
}
