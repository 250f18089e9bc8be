//! Geometric substrate: rational intervals, axis-parallel squares, the three
//! weight families, oriented boxes with exact intersection, and tilings of
//! squares by curve-normal boxes.

use crate::numerics::Kahan;
use crate::{Error, Result};
use num::rational::Ratio;
use num::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Subinterval of [0, 1] with exactly representable endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Ratio<i64>,
    hi: Ratio<i64>,
}

impl Interval {
    pub fn new(lo: Ratio<i64>, hi: Ratio<i64>) -> Result<Interval> {
        if lo < Ratio::zero() || hi > Ratio::one() || lo >= hi {
            return Err(Error::InvalidParameter(format!(
                "interval [{lo}, {hi}] is not a nondegenerate subinterval of [0, 1]"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn unit() -> Interval {
        Interval { lo: Ratio::zero(), hi: Ratio::one() }
    }

    /// [k*step, (k+1)*step], the k-th member of P_step([0,1]).
    pub fn nth_child(step: Ratio<i64>, k: i64) -> Result<Interval> {
        Interval::new(step * k, step * (k + 1))
    }

    pub fn lo(&self) -> Ratio<i64> {
        self.lo
    }

    pub fn hi(&self) -> Ratio<i64> {
        self.hi
    }

    pub fn length(&self) -> Ratio<i64> {
        self.hi - self.lo
    }

    pub fn center(&self) -> Ratio<i64> {
        (self.lo + self.hi) / 2
    }

    pub fn lo_f64(&self) -> f64 {
        self.lo.to_f64().unwrap()
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi.to_f64().unwrap()
    }

    pub fn center_f64(&self) -> f64 {
        self.center().to_f64().unwrap()
    }

    pub fn length_f64(&self) -> f64 {
        self.length().to_f64().unwrap()
    }

    pub fn contains_point(&self, xi: f64) -> bool {
        self.lo_f64() <= xi && xi <= self.hi_f64()
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Gap distance d(I, I'); zero for touching or overlapping intervals.
    pub fn separation(&self, other: &Interval) -> Ratio<i64> {
        let a = other.lo - self.hi;
        let b = self.lo - other.hi;
        a.max(b).max(Ratio::zero())
    }

    /// The (hi-lo)/step disjoint intervals of length `step` covering self.
    pub fn partition(&self, step: Ratio<i64>) -> Result<Vec<Interval>> {
        let count = self.length() / step;
        if step <= Ratio::zero() || !count.is_integer() || count < Ratio::one() {
            return Err(Error::NonIntegralPartition {
                lo: self.lo_f64(),
                hi: self.hi_f64(),
                step: step.to_f64().unwrap_or(f64::NAN),
            });
        }
        let n = count.to_integer();
        Ok((0..n)
            .map(|i| Interval { lo: self.lo + step * i, hi: self.lo + step * (i + 1) })
            .collect())
    }
}

/// Axis-parallel square B(c, R): center c, side length R.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareRegion {
    pub center: Point,
    pub side: f64,
}

impl SquareRegion {
    pub fn new(center: Point, side: f64) -> Result<SquareRegion> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::InvalidParameter(format!("square side {side} must be positive")));
        }
        Ok(SquareRegion { center, side })
    }

    pub fn origin(side: f64) -> Result<SquareRegion> {
        SquareRegion::new([0.0, 0.0], side)
    }

    pub fn half(&self) -> f64 {
        self.side / 2.0
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    pub fn scaled(&self, factor: f64) -> SquareRegion {
        SquareRegion { center: self.center, side: self.side * factor }
    }

    pub fn contains(&self, x: Point) -> bool {
        (x[0] - self.center[0]).abs() <= self.half() && (x[1] - self.center[1]).abs() <= self.half()
    }

    /// Exact tiling into (side/r)^2 squares of side r.
    pub fn partition(&self, r: f64) -> Result<Vec<SquareRegion>> {
        let ratio = self.side / r;
        let n = ratio.round();
        if !(r > 0.0) || n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::NonIntegralPartition { lo: 0.0, hi: self.side, step: r });
        }
        let n = n as i64;
        let corner = [self.center[0] - self.half(), self.center[1] - self.half()];
        let mut tiles = Vec::with_capacity((n * n) as usize);
        for j in 0..n {
            for i in 0..n {
                tiles.push(SquareRegion {
                    center: [
                        corner[0] + (i as f64 + 0.5) * r,
                        corner[1] + (j as f64 + 0.5) * r,
                    ],
                    side: r,
                });
            }
        }
        Ok(tiles)
    }
}

/// The three weight families attached to a square B(c, R).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightKind {
    /// (1 + |x - c|/R)^{-e}
    Radial { exponent: f64 },
    /// (1 + |x1 - c1|/R)^{-e} (1 + |x2 - c2|/R)^{-e}
    Product { exponent: f64 },
    /// Compactly supported bump >= 1 on B, equal to the squared radial
    /// weight outside B(c, 2R).
    Bump { exponent: f64 },
}

impl WeightKind {
    pub fn radial() -> WeightKind {
        WeightKind::Radial { exponent: 100.0 }
    }

    pub fn product() -> WeightKind {
        WeightKind::Product { exponent: 100.0 }
    }

    pub fn bump() -> WeightKind {
        WeightKind::Bump { exponent: 100.0 }
    }

    pub fn exponent(&self) -> f64 {
        match *self {
            WeightKind::Radial { exponent }
            | WeightKind::Product { exponent }
            | WeightKind::Bump { exponent } => exponent,
        }
    }
}

/// Normalization making the bump core >= 1 on all of B: the core minimum over
/// B sits at the corners, where |(x - c)/(2R)|^2 = 1/8, so scale by e^{1/7}.
fn bump_normalization() -> f64 {
    (1.0_f64 / 7.0).exp()
}

pub fn evaluate_weight(kind: WeightKind, b: &SquareRegion, x: Point) -> f64 {
    let r = b.side;
    match kind {
        WeightKind::Radial { exponent } => (1.0 + dist(x, b.center) / r).powf(-exponent),
        WeightKind::Product { exponent } => {
            (1.0 + (x[0] - b.center[0]).abs() / r).powf(-exponent)
                * (1.0 + (x[1] - b.center[1]).abs() / r).powf(-exponent)
        }
        WeightKind::Bump { exponent } => {
            let tail = (1.0 + dist(x, b.center) / r).powf(-2.0 * exponent);
            let u2 = ((x[0] - b.center[0]).powi(2) + (x[1] - b.center[1]).powi(2))
                / (2.0 * r * (2.0 * r));
            if u2 < 1.0 {
                bump_normalization() * (1.0 - 1.0 / (1.0 - u2)).exp() + tail
            } else {
                tail
            }
        }
    }
}

/// Sampling grid description: symmetric square [-extent, extent]^2 walked at
/// the given spacing, offset by a center where an operation says so.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub spacing: f64,
    pub extent: f64,
}

impl GridSpec {
    pub fn new(spacing: f64, extent: f64) -> Result<GridSpec> {
        if !(spacing > 0.0 && extent > 0.0 && spacing <= extent) {
            return Err(Error::InvalidParameter(format!(
                "grid spacing {spacing} / extent {extent} out of range"
            )));
        }
        Ok(GridSpec { spacing, extent })
    }

    /// Symmetric 1-D axis including both endpoints.
    pub fn axis(&self) -> Vec<f64> {
        let n = (self.extent / self.spacing).ceil() as i64;
        (-n..=n).map(|i| i as f64 * self.spacing).collect()
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConvolutionCheck {
    /// sup over the grid of (w_R * w_Rp)(x) / (Rp^2 w_R(x)).
    pub upper_constant: f64,
    /// inf over the grid of (1_B * w_R)(x) / (R^2 w_R(x)).
    pub lower_constant: f64,
}

/// Discrete check that w_{B(0,R)} * w_{B(0,Rp)} stays below a multiple of
/// Rp^2 w_{B(0,R)} and that R^2 w_{B(0,R)} stays above a multiple of
/// 1_{B(0,R)} * w_{B(0,R)}. Both factors are radial, so the sup side is
/// sampled along a single ray; the indicator side sweeps the full grid.
pub fn weight_convolution_check(r: f64, rp: f64, grid: &GridSpec) -> Result<ConvolutionCheck> {
    if !(rp > 0.0 && rp <= r) {
        return Err(Error::InvalidParameter(format!(
            "convolution check needs 0 < Rp <= R, got R={r}, Rp={rp}"
        )));
    }
    if grid.spacing > rp / 4.0 {
        return Err(Error::GridTooCoarse { spacing: grid.spacing, max: rp / 4.0 });
    }
    if grid.extent < 8.0 * r {
        return Err(Error::InvalidParameter(format!(
            "grid extent {} does not cover B(0, 8R) = B(0, {})",
            grid.extent,
            8.0 * r
        )));
    }
    let w_r = WeightKind::radial();
    let b_r = SquareRegion::origin(r)?;
    let b_rp = SquareRegion::origin(rp)?;
    let h = grid.spacing;

    // Inner grid for the smooth factor: w_Rp carries all but ~1e-90 of its
    // mass inside [-8Rp, 8Rp]^2.
    let inner = GridSpec::new(h, 8.0 * rp)?.axis();
    let mut inner_weights = Vec::with_capacity(inner.len() * inner.len());
    for &y1 in &inner {
        for &y2 in &inner {
            inner_weights.push(([y1, y2], evaluate_weight(w_r, &b_rp, [y1, y2])));
        }
    }
    let mut upper: f64 = 0.0;
    for xr in GridSpec::new(h, grid.extent)?.axis() {
        if xr < 0.0 {
            continue;
        }
        let mut acc = Kahan::new();
        for &(y, wy) in &inner_weights {
            acc.add(wy * evaluate_weight(w_r, &b_r, [xr - y[0], -y[1]]));
        }
        let conv = acc.total() * h * h;
        upper = upper.max(conv / (rp * rp * evaluate_weight(w_r, &b_r, [xr, 0.0])));
    }

    // Indicator side: integrate w_R over B(0, R) shifted to x, full 2-D sweep.
    let m = ((r / h).ceil() as i64).max(2);
    let bh = r / m as f64;
    let box_nodes: Vec<f64> = (0..m).map(|i| -r / 2.0 + (i as f64 + 0.5) * bh).collect();
    let axis = grid.axis();
    let mut lower = f64::INFINITY;
    for &x1 in &axis {
        for &x2 in &axis {
            let mut acc = Kahan::new();
            for &y1 in &box_nodes {
                for &y2 in &box_nodes {
                    acc.add(evaluate_weight(w_r, &b_r, [x1 - y1, x2 - y2]));
                }
            }
            let conv = acc.total() * bh * bh;
            lower = lower.min(conv / (r * r * evaluate_weight(w_r, &b_r, [x1, x2])));
        }
    }
    Ok(ConvolutionCheck { upper_constant: upper, lower_constant: lower })
}

/// sup over the grid (centered on B) of sum_{tiles} w_tile / w_B for the
/// partition of B into side-r subsquares.
pub fn sum_of_subweights_check(b: &SquareRegion, r: f64, grid: &GridSpec) -> Result<f64> {
    let tiles = b.partition(r)?;
    let w = WeightKind::radial();
    let axis = grid.axis();
    let mut sup: f64 = 0.0;
    for &u1 in &axis {
        for &u2 in &axis {
            let x = [b.center[0] + u1, b.center[1] + u2];
            let mut acc = Kahan::new();
            for tile in &tiles {
                acc.add(evaluate_weight(w, tile, x));
            }
            sup = sup.max(acc.total() / evaluate_weight(w, b, x));
        }
    }
    Ok(sup)
}

/// Rectangle with arbitrary orientation: `direction` is the unit vector of
/// the long axis, `long >= short > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Point,
    pub long: f64,
    pub short: f64,
    pub direction: Point,
}

impl OrientedBox {
    pub fn new(center: Point, long: f64, short: f64, direction: Point) -> Result<OrientedBox> {
        if !(long >= short && short > 0.0 && long.is_finite()) {
            return Err(Error::DegenerateBox { long, short });
        }
        let norm = (direction[0] * direction[0] + direction[1] * direction[1]).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter("box direction must be nonzero".into()));
        }
        Ok(OrientedBox {
            center,
            long,
            short,
            direction: [direction[0] / norm, direction[1] / norm],
        })
    }

    pub fn axis_aligned(square: &SquareRegion) -> OrientedBox {
        OrientedBox {
            center: square.center,
            long: square.side,
            short: square.side,
            direction: [0.0, 1.0],
        }
    }

    pub fn area(&self) -> f64 {
        self.long * self.short
    }

    fn normal(&self) -> Point {
        [-self.direction[1], self.direction[0]]
    }

    pub fn corners(&self) -> [Point; 4] {
        let d = self.direction;
        let n = self.normal();
        let (hl, hs) = (self.long / 2.0, self.short / 2.0);
        let at = |a: f64, b: f64| {
            [self.center[0] + a * d[0] + b * n[0], self.center[1] + a * d[1] + b * n[1]]
        };
        [at(-hl, -hs), at(hl, -hs), at(hl, hs), at(-hl, hs)]
    }

    pub fn contains(&self, x: Point) -> bool {
        let rel = [x[0] - self.center[0], x[1] - self.center[1]];
        dot(rel, self.direction).abs() <= self.long / 2.0 + 1e-12 * self.long
            && dot(rel, self.normal()).abs() <= self.short / 2.0 + 1e-12 * self.long
    }
}

fn shoelace(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = Kahan::new();
    for (i, p) in poly.iter().enumerate() {
        let q = poly[(i + 1) % poly.len()];
        acc.add(p[0] * q[1] - q[0] * p[1]);
    }
    acc.total().abs() / 2.0
}

/// Exact area of the intersection of two oriented rectangles via half-plane
/// clipping of one against the other.
pub fn oriented_box_intersection_area(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let mut poly: Vec<Point> = a.corners().to_vec();
    let clip_corners = b.corners();
    for i in 0..4 {
        let p = clip_corners[i];
        let q = clip_corners[(i + 1) % 4];
        let edge = [q[0] - p[0], q[1] - p[1]];
        // Interior of a CCW rectangle lies left of each directed edge.
        let inside =
            |v: Point| edge[0] * (v[1] - p[1]) - edge[1] * (v[0] - p[0]) >= -1e-12 * b.long;
        let mut next = Vec::with_capacity(poly.len() + 2);
        for (j, &cur) in poly.iter().enumerate() {
            let prev = poly[(j + poly.len() - 1) % poly.len()];
            let (ci, pi) = (inside(cur), inside(prev));
            if ci != pi {
                let fp = edge[0] * (prev[1] - p[1]) - edge[1] * (prev[0] - p[0]);
                let fc = edge[0] * (cur[1] - p[1]) - edge[1] * (cur[0] - p[0]);
                let t = fp / (fp - fc);
                next.push([prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])]);
            }
            if ci {
                next.push(cur);
            }
        }
        poly = next;
        if poly.is_empty() {
            return 0.0;
        }
    }
    shoelace(&poly)
}

/// Monte-Carlo cross-check for the exact intersection: sample uniformly in
/// box `a` and count hits in box `b`.
pub fn mc_box_intersection_area(a: &OrientedBox, b: &OrientedBox, samples: u64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = a.direction;
    let n = a.normal();
    let mut hits: u64 = 0;
    for _ in 0..samples {
        let u = (rng.gen::<f64>() - 0.5) * a.long;
        let v = (rng.gen::<f64>() - 0.5) * a.short;
        let x = [a.center[0] + u * d[0] + v * n[0], a.center[1] + u * d[1] + v * n[1]];
        if b.contains(x) {
            hits += 1;
        }
    }
    a.area() * hits as f64 / samples as f64
}

/// Lattice of nu^{-b} x nu^{-2b} boxes with long side along the curve normal
/// (-2c_J, 1)/|(-2c_J, 1)| at the center of J, trimmed to the translates
/// meeting the side-nu^{-2b} square `dp`. The retained boxes tile a
/// neighborhood of dp and stay inside the 4x dilate.
pub fn build_tiling(
    j: &Interval,
    dp: &SquareRegion,
    b: u32,
    nu: Ratio<i64>,
) -> Result<Vec<OrientedBox>> {
    if b < 1 || nu <= Ratio::zero() || nu >= Ratio::one() {
        return Err(Error::InvalidParameter(format!("tiling needs b >= 1 and 0 < nu < 1, got b={b}, nu={nu}")));
    }
    let nu_b = num::pow::pow(nu, b as usize);
    if j.length() != nu_b {
        return Err(Error::InvalidParameter(format!(
            "interval length {} is not nu^b = {}",
            j.length(),
            nu_b
        )));
    }
    let short = 1.0 / nu_b.to_f64().unwrap();
    let long = short * short;
    if (dp.side - long).abs() > 1e-9 * long {
        return Err(Error::InvalidParameter(format!(
            "square side {} is not nu^(-2b) = {long}",
            dp.side
        )));
    }
    let c = j.center_f64();
    let scale = (1.0 + 4.0 * c * c).sqrt();
    let normal = [-2.0 * c / scale, 1.0 / scale];
    let tangent = [1.0 / scale, 2.0 * c / scale];
    let rho = dp.side * std::f64::consts::FRAC_1_SQRT_2;
    let ni = (rho / short).ceil() as i64 + 1;
    let nk = (rho / long).ceil() as i64 + 1;
    let dp_box = OrientedBox::axis_aligned(dp);
    let mut boxes = Vec::new();
    for i in -ni..=ni {
        for k in -nk..=nk {
            let center = [
                dp.center[0] + i as f64 * short * tangent[0] + k as f64 * long * normal[0],
                dp.center[1] + i as f64 * short * tangent[1] + k as f64 * long * normal[1],
            ];
            let bx = OrientedBox::new(center, long, short, normal)?;
            if oriented_box_intersection_area(&bx, &dp_box) > 1e-9 * bx.area() {
                boxes.push(bx);
            }
        }
    }
    Ok(boxes)
}
