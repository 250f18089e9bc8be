//! Extension-operator fields along planar curves.
//!
//! A density on a subinterval of the frequency segment is pushed forward along
//! a curve `t -> (t, h(t))` and integrated against plane waves, producing a
//! complex field on a spatial grid.  This module owns the curve and density
//! vocabulary, the sampled-field container with its serialization formats,
//! weighted and unweighted norms of sampled fields, and the rescaling and
//! comparison checks built from those norms.

pub(crate) mod eval;
pub(crate) mod fast;
mod checks;

pub use checks::{
    anisotropic_rescale_identity_check, l2_decoupling_ratio, parabolic_rescale_identity_check,
    reverse_holder_ratio,
};

use std::fmt;
use std::io::{Read as _, Write as _};
use std::path::Path;
use std::sync::Arc;

use num::complex::Complex64;
use num::rational::Ratio;
use num::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{evaluate_weight, Interval, Point, SquareRegion, WeightKind};
use crate::numerics::{cubic4, e2pi, simpson_pattern, Kahan};

/// Curvature window certified by [`CurveSpec::certify_curvature_class`].
pub const CURVATURE_LO: f64 = 0.5;
/// Upper end of the certified curvature window.
pub const CURVATURE_HI: f64 = 2.0;

/// Graph curve `t -> (t, h(t))` over a frequency domain starting at zero.
#[derive(Clone)]
pub enum CurveSpec {
    /// `h(t) = a t^2`.
    Parabola { a: f64 },
    /// `h(t) = 1 - sqrt(1 - t^2)` on `[0, tau]`.
    CircleArc { tau: f64 },
    /// `h(t) = (1 - sqrt(1 - t^2 tau0^2)) / tau0^2` on `[0, 1]`.
    ScaledCircle { tau0: f64 },
    /// Caller-supplied `t -> [h, h', h'']` on `[0, 1]`.
    Tabulated {
        name: String,
        table: Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>,
    },
}

impl fmt::Debug for CurveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveSpec::Parabola { a } => write!(f, "Parabola {{ a: {a} }}"),
            CurveSpec::CircleArc { tau } => write!(f, "CircleArc {{ tau: {tau} }}"),
            CurveSpec::ScaledCircle { tau0 } => write!(f, "ScaledCircle {{ tau0: {tau0} }}"),
            CurveSpec::Tabulated { name, .. } => write!(f, "Tabulated {{ name: {name:?} }}"),
        }
    }
}

impl CurveSpec {
    /// Parabola with coefficient `a` in `[1/100, 100]`.
    pub fn parabola(a: f64) -> Result<Self, Error> {
        if !(0.01..=100.0).contains(&a) {
            return Err(Error::InvalidParameter(format!(
                "parabola coefficient {a} outside [0.01, 100]"
            )));
        }
        Ok(CurveSpec::Parabola { a })
    }

    /// Unit circle arc parametrized by abscissa, domain `[0, tau]`, `0 < tau < 1`.
    pub fn circle_arc(tau: f64) -> Result<Self, Error> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "circle arc endpoint {tau} outside (0, 1)"
            )));
        }
        Ok(CurveSpec::CircleArc { tau })
    }

    /// Circle arc rescaled to the unit frequency domain, `0 < tau0 < 1`.
    pub fn scaled_circle(tau0: f64) -> Result<Self, Error> {
        if !(tau0 > 0.0 && tau0 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "circle scale {tau0} outside (0, 1)"
            )));
        }
        Ok(CurveSpec::ScaledCircle { tau0 })
    }

    /// Curve given by a table of `h` and its first two derivatives on `[0, 1]`.
    pub fn tabulated(
        name: impl Into<String>,
        table: Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>,
    ) -> Self {
        CurveSpec::Tabulated {
            name: name.into(),
            table,
        }
    }

    /// Frequency domain `[0, end]` the curve is defined on.
    pub fn domain_end(&self) -> f64 {
        match self {
            CurveSpec::CircleArc { tau } => *tau,
            _ => 1.0,
        }
    }

    /// Height of the curve at abscissa `t`.
    pub fn height(&self, t: f64) -> f64 {
        self.derivatives(t)[0]
    }

    /// `[h(t), h'(t), h''(t)]`.
    pub fn derivatives(&self, t: f64) -> [f64; 3] {
        match self {
            CurveSpec::Parabola { a } => [a * t * t, 2.0 * a * t, 2.0 * a],
            CurveSpec::CircleArc { .. } => {
                let s = (1.0 - t * t).sqrt();
                [1.0 - s, t / s, 1.0 / (s * s * s)]
            }
            CurveSpec::ScaledCircle { tau0 } => {
                let u = t * tau0;
                let s = (1.0 - u * u).sqrt();
                [(1.0 - s) / (tau0 * tau0), t / s, 1.0 / (s * s * s)]
            }
            CurveSpec::Tabulated { table, .. } => table(t),
        }
    }

    /// Checks `h(0) = h'(0) = 0` and a curvature window on a dense sample.
    ///
    /// Membership requires `h''` to stay within [`CURVATURE_LO`, `CURVATURE_HI`]
    /// across the whole domain; the scan uses 1001 equispaced abscissas.
    pub fn certify_curvature_class(&self) -> Result<(), Error> {
        let end = self.domain_end();
        let [h0, dh0, _] = self.derivatives(0.0);
        if h0.abs() > 1e-12 || dh0.abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "curve does not vanish to first order at 0: h(0)={h0}, h'(0)={dh0}"
            )));
        }
        for i in 0..=1000 {
            let t = end * (i as f64) / 1000.0;
            let dd = self.derivatives(t)[2];
            if !(CURVATURE_LO..=CURVATURE_HI).contains(&dd) || !dd.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "curvature {dd} at t={t} leaves [{CURVATURE_LO}, {CURVATURE_HI}]"
                )));
            }
        }
        Ok(())
    }
}

/// Density on the frequency segment: a function or a finite atomic measure.
///
/// A global complex `prefactor` and a modulation `e(theta xi)` ride on top of
/// the base kind, so unimodular rescaling and frequency translation are cheap
/// and exact.
#[derive(Clone, Debug)]
pub struct DensityFunction {
    kind: DensityKind,
    prefactor: Complex64,
    modulation: f64,
}

#[derive(Clone, Debug)]
enum DensityKind {
    Constant(Complex64),
    RandomPhase { seed: u64, scale: Ratio<i64> },
    AtomSum(Vec<(f64, f64)>),
}

impl DensityFunction {
    /// Constant density `xi -> c`.
    pub fn constant(c: Complex64) -> Self {
        DensityFunction {
            kind: DensityKind::Constant(c),
            prefactor: Complex64::new(1.0, 0.0),
            modulation: 0.0,
        }
    }

    /// The constant-one density.
    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    /// Piecewise-constant unimodular density: on the `k`-th cell of width
    /// `scale` the value is `e(u_k)` with `u_k` drawn uniformly from a
    /// deterministic stream seeded by `seed`.
    pub fn random_phase(seed: u64, scale: Ratio<i64>) -> Result<Self, Error> {
        if scale <= Ratio::new(0, 1) || scale > Ratio::new(1, 1) {
            return Err(Error::InvalidParameter(format!(
                "random-phase cell width {scale} outside (0, 1]"
            )));
        }
        if !(Ratio::new(1, 1) / scale).is_integer() {
            return Err(Error::InvalidParameter(format!(
                "random-phase cell width {scale} does not tile the unit interval"
            )));
        }
        Ok(DensityFunction {
            kind: DensityKind::RandomPhase { seed, scale },
            prefactor: Complex64::new(1.0, 0.0),
            modulation: 0.0,
        })
    }

    /// Finite sum of point masses at `(location, mass)` with positive masses
    /// and locations in `[0, 1]`.
    pub fn atom_sum(atoms: Vec<(f64, f64)>) -> Result<Self, Error> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("empty atom list".into()));
        }
        for &(loc, mass) in &atoms {
            if !(0.0..=1.0).contains(&loc) || !(mass > 0.0) || !mass.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "atom ({loc}, {mass}) needs location in [0,1] and positive mass"
                )));
            }
        }
        Ok(DensityFunction {
            kind: DensityKind::AtomSum(atoms),
            prefactor: Complex64::new(1.0, 0.0),
            modulation: 0.0,
        })
    }

    /// Multiplies the density by a fixed complex factor.
    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.prefactor *= factor;
        self
    }

    /// Multiplies the density by the modulation `xi -> e(theta xi)`.
    pub fn modulated(mut self, theta: f64) -> Self {
        self.modulation += theta;
        self
    }

    /// Whether the density is an atomic measure rather than a function.
    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, DensityKind::AtomSum(_))
    }

    /// The `(location, mass)` pairs of an atomic density.
    pub fn atom_locations(&self) -> Option<&[(f64, f64)]> {
        match &self.kind {
            DensityKind::AtomSum(atoms) => Some(atoms),
            _ => None,
        }
    }

    /// The cell width at which the density is piecewise constant, when it has
    /// one (random phases change value across cells of their seed scale).
    pub(crate) fn native_scale(&self) -> Option<Ratio<i64>> {
        match &self.kind {
            DensityKind::RandomPhase { scale, .. } => Some(*scale),
            _ => None,
        }
    }

    /// Short human-readable label, used to tag report rows.
    pub fn describe(&self) -> String {
        let mut label = match &self.kind {
            DensityKind::Constant(c) if *c == Complex64::new(1.0, 0.0) => "one".to_string(),
            DensityKind::Constant(c) => format!("constant({c})"),
            DensityKind::RandomPhase { seed, scale } => {
                format!("random_phase(seed={seed}, scale={scale})")
            }
            DensityKind::AtomSum(atoms) => format!("atoms(n={})", atoms.len()),
        };
        if self.modulation != 0.0 {
            label.push_str(&format!("*e({} xi)", self.modulation));
        }
        if self.prefactor != Complex64::new(1.0, 0.0) {
            label.push_str(&format!("*{}", self.prefactor));
        }
        label
    }

    /// Restriction to `j`, flattened for the quadrature evaluator.
    pub(crate) fn lower(&self, j: &Interval) -> eval::Lowered {
        let lo = j.lo_f64();
        let hi = j.hi_f64();
        match &self.kind {
            DensityKind::Constant(c) => eval::Lowered::Pieces {
                cuts: vec![lo, hi],
                values: vec![self.prefactor * *c],
                modulation: self.modulation,
            },
            DensityKind::RandomPhase { seed, scale } => {
                let phases = random_phases(*seed, *scale);
                let width = ratio_f64(*scale);
                let k_lo = (lo / width).floor() as i64;
                let k_hi = ((hi / width).ceil() as i64).min(phases.len() as i64);
                let mut cuts = vec![lo];
                let mut values = Vec::new();
                for k in k_lo.max(0)..k_hi {
                    let cell_hi = (width * (k + 1) as f64).min(hi);
                    if cell_hi <= *cuts.last().unwrap() + 1e-15 {
                        continue;
                    }
                    values.push(self.prefactor * e2pi(phases[k as usize]));
                    cuts.push(cell_hi);
                }
                eval::Lowered::Pieces {
                    cuts,
                    values,
                    modulation: self.modulation,
                }
            }
            DensityKind::AtomSum(atoms) => {
                let kept = atoms
                    .iter()
                    .filter(|(loc, _)| *loc >= lo - 1e-15 && *loc <= hi + 1e-15)
                    .map(|&(loc, mass)| {
                        (loc, self.prefactor * mass * e2pi(self.modulation * loc))
                    })
                    .collect();
                eval::Lowered::Atoms(kept)
            }
        }
    }

    /// Per-child constant values of the density on the cells of `partition`,
    /// or `None` when the density is not constant at that granularity.
    pub(crate) fn child_values(
        &self,
        j: &Interval,
        step: Ratio<i64>,
    ) -> Option<Vec<Complex64>> {
        if self.modulation != 0.0 {
            return None;
        }
        let children = j.partition(step).ok()?;
        match &self.kind {
            DensityKind::Constant(c) => Some(vec![self.prefactor * *c; children.len()]),
            DensityKind::RandomPhase { seed, scale } => {
                if *scale != step {
                    return None;
                }
                let phases = random_phases(*seed, *scale);
                let mut out = Vec::with_capacity(children.len());
                for child in &children {
                    let k = (child.lo() / scale).to_integer();
                    out.push(self.prefactor * e2pi(phases[k as usize]));
                }
                Some(out)
            }
            DensityKind::AtomSum(_) => None,
        }
    }
}

fn random_phases(seed: u64, scale: Ratio<i64>) -> Vec<f64> {
    let n = (Ratio::new(1, 1) / scale).to_integer() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

pub(crate) fn ratio_f64(r: Ratio<i64>) -> f64 {
    r.to_f64().expect("rational fits in f64")
}

/// Complex field sampled on an axis-parallel grid covering a base square.
///
/// Node `(ix, iy)` sits at `origin + spacing * (ix, iy)`; values are stored
/// row-major with `ix` fastest.  The grid may extend beyond `square` (weighted
/// norms want surrounding mass); both node counts are odd so every axis
/// carries a Simpson pattern.
#[derive(Clone, Debug)]
pub struct SampledField {
    pub origin: Point,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<Complex64>,
    pub square: SquareRegion,
}

/// Maximum node spacing accepted for sampled fields.
pub const MAX_FIELD_SPACING: f64 = 0.25;

const JSON_VALUE_CAP: usize = 1 << 16;

#[derive(Serialize, Deserialize)]
struct FieldJson {
    origin: [f64; 2],
    spacing: f64,
    nx: u64,
    ny: u64,
    square_center: [f64; 2],
    square_side: f64,
    values: Vec<[f64; 2]>,
}

impl SampledField {
    pub(crate) fn new(
        origin: Point,
        spacing: f64,
        nx: usize,
        ny: usize,
        values: Vec<Complex64>,
        square: SquareRegion,
    ) -> Result<Self, Error> {
        if !(spacing > 0.0) || spacing > MAX_FIELD_SPACING {
            return Err(Error::GridTooCoarse {
                spacing,
                max: MAX_FIELD_SPACING,
            });
        }
        if nx < 3 || ny < 3 || nx % 2 == 0 || ny % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "field needs odd node counts of at least 3, got {nx} x {ny}"
            )));
        }
        if values.len() != nx * ny {
            return Err(Error::InvalidParameter(format!(
                "value buffer holds {} entries for a {nx} x {ny} grid",
                values.len()
            )));
        }
        Ok(SampledField {
            origin,
            spacing,
            nx,
            ny,
            values,
            square,
        })
    }

    /// Spatial coordinates of node `(ix, iy)`.
    pub fn node(&self, ix: usize, iy: usize) -> Point {
        [
            self.origin[0] + self.spacing * ix as f64,
            self.origin[1] + self.spacing * iy as f64,
        ]
    }

    /// Value at node `(ix, iy)`.
    pub fn value(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[iy * self.nx + ix]
    }

    /// Largest modulus over all nodes.
    pub fn sup_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Bicubic interpolation at `x`, which must lie inside the grid hull.
    pub fn interpolate(&self, x: Point) -> Result<Complex64, Error> {
        let fx = (x[0] - self.origin[0]) / self.spacing;
        let fy = (x[1] - self.origin[1]) / self.spacing;
        let eps = 1e-9;
        if fx < -eps
            || fy < -eps
            || fx > (self.nx - 1) as f64 + eps
            || fy > (self.ny - 1) as f64 + eps
        {
            return Err(Error::InvalidParameter(format!(
                "interpolation point ({}, {}) outside the sampled grid",
                x[0], x[1]
            )));
        }
        // Clamp the 4x4 stencil inside the grid; near an edge this degrades
        // to one-sided cubic extrapolation of interior nodes.
        let base_x = (fx.floor() as isize - 1).clamp(0, self.nx as isize - 4) as usize;
        let base_y = (fy.floor() as isize - 1).clamp(0, self.ny as isize - 4) as usize;
        let tx = fx - (base_x + 1) as f64;
        let ty = fy - (base_y + 1) as f64;
        let mut rows = [Complex64::new(0.0, 0.0); 4];
        for (r, row_val) in rows.iter_mut().enumerate() {
            let idx = (base_y + r) * self.nx + base_x;
            *row_val = cubic4(
                [
                    self.values[idx],
                    self.values[idx + 1],
                    self.values[idx + 2],
                    self.values[idx + 3],
                ],
                tx,
            );
        }
        Ok(cubic4(rows, ty))
    }

    /// Writes the field as flat little-endian binary:
    /// origin (2 f64), spacing (f64), nx, ny (u64), then re/im interleaved
    /// f64 values in row-major order.
    pub fn write_binary(&self, path: &Path) -> Result<(), Error> {
        let mut buf =
            Vec::with_capacity(8 * (5 + 2 * self.values.len()));
        buf.extend_from_slice(&self.origin[0].to_le_bytes());
        buf.extend_from_slice(&self.origin[1].to_le_bytes());
        buf.extend_from_slice(&self.spacing.to_le_bytes());
        buf.extend_from_slice(&(self.nx as u64).to_le_bytes());
        buf.extend_from_slice(&(self.ny as u64).to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    /// Reads the flat binary format written by [`write_binary`].
    ///
    /// The base square is not part of the format; the reader takes the grid's
    /// bounding box, which matches fields sampled without extension.
    ///
    /// [`write_binary`]: SampledField::write_binary
    pub fn read_binary(path: &Path) -> Result<Self, Error> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 40 {
            return Err(Error::InvalidParameter(
                "field file shorter than its header".into(),
            ));
        }
        let f = |i: usize| f64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap());
        let u = |i: usize| u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap());
        let origin = [f(0), f(1)];
        let spacing = f(2);
        let nx = u(3) as usize;
        let ny = u(4) as usize;
        let expect = 40 + 16 * nx * ny;
        if bytes.len() != expect {
            return Err(Error::InvalidParameter(format!(
                "field file holds {} bytes, header implies {expect}",
                bytes.len()
            )));
        }
        let values = (0..nx * ny)
            .map(|k| Complex64::new(f(5 + 2 * k), f(6 + 2 * k)))
            .collect();
        let side_x = spacing * (nx - 1) as f64;
        let side_y = spacing * (ny - 1) as f64;
        let square = SquareRegion::new(
            [origin[0] + side_x / 2.0, origin[1] + side_y / 2.0],
            side_x.max(side_y),
        )?;
        SampledField::new(origin, spacing, nx, ny, values, square)
    }

    /// JSON mirror of the field for small grids (at most 65536 nodes).
    pub fn to_json(&self) -> Result<String, Error> {
        if self.values.len() > JSON_VALUE_CAP {
            return Err(Error::ResourceGuard(format!(
                "JSON mirror capped at {JSON_VALUE_CAP} nodes, field has {}",
                self.values.len()
            )));
        }
        let mirror = FieldJson {
            origin: self.origin,
            spacing: self.spacing,
            nx: self.nx as u64,
            ny: self.ny as u64,
            square_center: self.square.center,
            square_side: self.square.side,
            values: self.values.iter().map(|v| [v.re, v.im]).collect(),
        };
        Ok(serde_json::to_string(&mirror)?)
    }

    /// Parses the JSON mirror produced by [`to_json`].
    ///
    /// [`to_json`]: SampledField::to_json
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let mirror: FieldJson = serde_json::from_str(text)?;
        let values = mirror
            .values
            .iter()
            .map(|[re, im]| Complex64::new(*re, *im))
            .collect();
        SampledField::new(
            mirror.origin,
            mirror.spacing,
            mirror.nx as usize,
            mirror.ny as usize,
            values,
            SquareRegion::new(mirror.square_center, mirror.square_side)?,
        )
    }
}

/// Samples the extension field of `(g, j)` along `curve` on a grid covering
/// the base square `b` at the given node spacing.
pub fn evaluate_extension(
    g: &DensityFunction,
    j: &Interval,
    curve: &CurveSpec,
    b: &SquareRegion,
    spacing: f64,
) -> Result<SampledField, Error> {
    evaluate_extension_extended(g, j, curve, b, spacing, 1)
}

/// Same as [`evaluate_extension`] but sampling over the `extent`-fold
/// concentric enlargement of `b`, as weighted norms require.
pub fn evaluate_extension_extended(
    g: &DensityFunction,
    j: &Interval,
    curve: &CurveSpec,
    b: &SquareRegion,
    spacing: f64,
    extent: u32,
) -> Result<SampledField, Error> {
    if j.hi_f64() > curve.domain_end() + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "interval [{}, {}] leaves the curve domain [0, {}]",
            j.lo_f64(),
            j.hi_f64(),
            curve.domain_end()
        )));
    }
    if extent == 0 {
        return Err(Error::InvalidParameter("zero grid extent".into()));
    }
    let grid = eval::ShearGrid::axis_aligned(b, spacing, extent)?;
    let lowered = g.lower(j);
    let values = eval::adaptive_field(&lowered, curve, &grid)?;
    SampledField::new(grid.origin, spacing, grid.nx, grid.ny, values, *b)
}

/// Extension field of `(g, j)` along `curve` at a single spatial point.
pub fn eval_point(
    g: &DensityFunction,
    j: &Interval,
    curve: &CurveSpec,
    x: Point,
) -> Result<Complex64, Error> {
    if j.hi_f64() > curve.domain_end() + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "interval [{}, {}] leaves the curve domain [0, {}]",
            j.lo_f64(),
            j.hi_f64(),
            curve.domain_end()
        )));
    }
    eval::adaptive_point(&g.lower(j), curve, x)
}

/// How a field norm integrates over the base square.
#[derive(Clone, Debug, PartialEq)]
pub enum NormMode {
    /// `(integral over the square of |f|^p)^(1/p)`.
    Plain,
    /// Plain divided by `|square|^(1/p)`.
    Normalized,
    /// `(integral over the whole grid of |f|^p W^s)^(1/p)` with
    /// `W = evaluate_weight(kind, square, .)` and `s = exponent_scale`.
    Weighted {
        kind: WeightKind,
        exponent_scale: f64,
    },
}

/// `L^p` norm of a sampled field; `p = infinity` takes the sup over the
/// square's nodes.
pub fn lp_norm(f: &SampledField, p: f64, mode: &NormMode) -> Result<f64, Error> {
    lp_norm_with_tail(f, p, mode).map(|(v, _)| v)
}

/// Norm plus a relative bound on the weight mass beyond the sampled grid
/// (zero for the unweighted modes, which do not truncate anything).
pub fn lp_norm_with_tail(
    f: &SampledField,
    p: f64,
    mode: &NormMode,
) -> Result<(f64, f64), Error> {
    if p.is_infinite() {
        if matches!(mode, NormMode::Weighted { .. }) {
            return Err(Error::InvalidParameter(
                "weighted mode undefined for the sup norm".into(),
            ));
        }
        let (ix0, iy0, n) = square_window(f)?;
        let mut sup = 0.0_f64;
        for iy in iy0..=iy0 + n {
            for ix in ix0..=ix0 + n {
                sup = sup.max(f.value(ix, iy).norm());
            }
        }
        return Ok((sup, 0.0));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "norm exponent {p} outside [1, infinity]"
        )));
    }
    match mode {
        NormMode::Plain | NormMode::Normalized => {
            let (ix0, iy0, n) = square_window(f)?;
            let wts = simpson_pattern(n);
            let mut outer = Kahan::new();
            for iy in 0..=n {
                let mut inner = Kahan::new();
                for ix in 0..=n {
                    let v = f.value(ix0 + ix, iy0 + iy).norm();
                    inner.add(wts[ix] * v.powf(p));
                }
                outer.add(wts[iy] * inner.total());
            }
            let scale = (f.spacing / 3.0) * (f.spacing / 3.0);
            let mut integral = (outer.total() * scale).max(0.0);
            if matches!(mode, NormMode::Normalized) {
                integral /= f.square.area();
            }
            Ok((integral.powf(1.0 / p), 0.0))
        }
        NormMode::Weighted {
            kind,
            exponent_scale,
        } => {
            if !(*exponent_scale > 0.0) {
                return Err(Error::InvalidParameter(
                    "weighted norm needs a positive weight exponent scale".into(),
                ));
            }
            let wx = simpson_pattern(f.nx - 1);
            let wy = simpson_pattern(f.ny - 1);
            let mut outer = Kahan::new();
            let mut sup_mod = 0.0_f64;
            for iy in 0..f.ny {
                let mut inner = Kahan::new();
                for ix in 0..f.nx {
                    let v = f.value(ix, iy).norm();
                    sup_mod = sup_mod.max(v);
                    let w =
                        evaluate_weight(*kind, &f.square, f.node(ix, iy)).powf(*exponent_scale);
                    inner.add(wx[ix] * v.powf(p) * w);
                }
                outer.add(wy[iy] * inner.total());
            }
            let scale = (f.spacing / 3.0) * (f.spacing / 3.0);
            let integral = (outer.total() * scale).max(0.0);
            let tail = weight_tail_bound(f, kind, *exponent_scale) * sup_mod.powf(p);
            let rel = if integral > 0.0 { tail / integral } else { 0.0 };
            Ok((integral.powf(1.0 / p), rel))
        }
    }
}

/// Upper bound on the weight integral outside the sampled grid.
///
/// The grid hull contains the ball of radius `rho` around the square center;
/// beyond it the radial majorant of every weight kind is
/// `(1 + r/R)^(-e)` with `e` at least 100, whose outer integral is
/// `2 pi R^2 (1+u)^(2-e) ((1+u)^2/(e-2) - ... )`-shaped.  A crude but safe
/// form suffices: `2 pi (R + rho)^2 (1 + rho/R)^(-(e - 2)) / (e - 2)`.
fn weight_tail_bound(f: &SampledField, kind: &WeightKind, s: f64) -> f64 {
    let r = f.square.half();
    let half_x = f.spacing * ((f.nx - 1) as f64) / 2.0;
    let half_y = f.spacing * ((f.ny - 1) as f64) / 2.0;
    let rho = half_x.min(half_y);
    let e = (kind.exponent() * s).max(3.0);
    2.0 * std::f64::consts::PI * (r + rho).powi(2) * (1.0 + rho / r).powf(-(e - 2.0))
        / (e - 2.0)
}

/// Index window of the base square inside the grid: bottom-left node and the
/// (even) number of steps per side.
fn square_window(f: &SampledField) -> Result<(usize, usize, usize), Error> {
    let cx = f.square.center[0] - f.square.half();
    let cy = f.square.center[1] - f.square.half();
    let fx = (cx - f.origin[0]) / f.spacing;
    let fy = (cy - f.origin[1]) / f.spacing;
    let steps = f.square.side / f.spacing;
    let ix0 = fx.round();
    let iy0 = fy.round();
    let n = steps.round();
    let tol = 1e-6;
    if (fx - ix0).abs() > tol || (fy - iy0).abs() > tol || (steps - n).abs() > tol {
        return Err(Error::InvalidParameter(
            "base square is not aligned with the sampling grid".into(),
        ));
    }
    if n < 2.0 || (n as usize) % 2 != 0 {
        return Err(Error::InvalidParameter(
            "base square must span an even positive number of grid steps".into(),
        ));
    }
    let (ix0, iy0, n) = (ix0 as isize, iy0 as isize, n as usize);
    if ix0 < 0
        || iy0 < 0
        || (ix0 as usize) + n >= f.nx
        || (iy0 as usize) + n >= f.ny
    {
        return Err(Error::InvalidParameter(
            "base square leaves the sampled grid".into(),
        ));
    }
    Ok((ix0 as usize, iy0 as usize, n))
}

#[cfg(test)]
mod tests;
