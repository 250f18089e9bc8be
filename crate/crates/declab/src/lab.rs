//! Ratio experiments for the decoupling, bilinear, and ball-inflation
//! inequalities.
//!
//! Every operation here compares the two sides of one inequality on a
//! concrete density and reports `lhs / rhs`.  The reported ratios are
//! empirical lower-bound evidence for the best constants; the defining
//! suprema range over all densities and cannot be certified numerically.
//! Frozen regression values pin each experiment so that refactors of the
//! quadrature layers cannot silently shift results.
//!
//! Conventions shared by all experiments:
//!
//! * left-hand sides integrate plainly over the box `B` (or over the tile
//!   lattice of `B`),
//! * right-hand child norms use the flat-top box weight [`box weight`](self),
//!   which equals 1 on `B` and decays like `(1 + d/side)^{-100}` in each
//!   coordinate's excess distance `d` beyond the box, so the weighted norm
//!   dominates the plain one and a single-interval experiment lands at a
//!   ratio just below 1,
//! * tile-lattice norms (`L^2` and `L^{p/2}` against `w-hat_Delta`) use the
//!   centered product spike weight of the tile, matching the inequality they
//!   probe on both sides.

use std::collections::HashMap;
use std::f64::consts::PI;

use num::complex::Complex64;
use num::rational::Ratio;
use num::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extension::eval::{curve_terms, expsum_field, Lowered, ShearGrid};
use crate::extension::fast::{
    cubic_weights, multi_draw_lhs_norms, tabulate_field, ParabolaChildren, PowerChain,
};
use crate::extension::{
    evaluate_extension, lp_norm, ratio_f64, CurveSpec, DensityFunction, NormMode,
};
use crate::geometry::{Interval, SquareRegion};
use crate::numerics::{e2pi, gauss_legendre, quad_phase_unit, simpson_pattern, Kahan};

/// Decay exponent of the right-hand-side box weight and of tile spike weights.
const RHS_WEIGHT_EXPONENT: f64 = 100.0;
/// Hard cap on grid nodes for a single field tabulation.
const NODE_CAP: f64 = 2.7e8;
/// Relative sup-norm tolerance between successive tile-lattice refinements.
const LATTICE_TOL: f64 = 1e-7;
/// Largest quadrature doubling level tried for tile lattices.
const LEVEL_MAX: u32 = 6;
/// Sample pitch of the one-dimensional weight-transform table.
const W1_STEP: f64 = 0.01;
/// Integration cutoff for the weight transform; the integrand tail beyond it
/// is below 1e-20 relative.
const W1_CUT: f64 = 0.6;

/// `2^{100/p} / sqrt(delta)`, the a-priori envelope every decoupling ratio
/// must stay under.
pub fn trivial_bound(p: f64, delta: Ratio<i64>) -> f64 {
    2f64.powf(100.0 / p) / ratio_f64(delta).sqrt()
}

/// Parses `"n/d"` or `"n"` into an exact rational.
pub fn parse_ratio(s: &str) -> Result<Ratio<i64>> {
    let bad = |s: &str| Error::InvalidParameter(format!("cannot parse rational from {s:?}"));
    let mut parts = s.splitn(2, '/');
    let numer: i64 = parts
        .next()
        .and_then(|t| t.trim().parse().ok())
        .ok_or_else(|| bad(s))?;
    let denom: i64 = match parts.next() {
        Some(t) => t.trim().parse().map_err(|_| bad(s))?,
        None => 1,
    };
    if denom == 0 {
        return Err(bad(s));
    }
    Ok(Ratio::new(numer, denom))
}

fn ratio_pow(r: Ratio<i64>, b: u32) -> Result<Ratio<i64>> {
    let numer = r
        .numer()
        .checked_pow(b)
        .ok_or_else(|| Error::InvalidParameter(format!("{r}^{b} overflows")))?;
    let denom = r
        .denom()
        .checked_pow(b)
        .ok_or_else(|| Error::InvalidParameter(format!("{r}^{b} overflows")))?;
    Ok(Ratio::new(numer, denom))
}

fn check_unit_fraction(name: &str, r: Ratio<i64>) -> Result<()> {
    if r <= Ratio::zero() || r > Ratio::one() || !(Ratio::one() / r).is_integer() {
        return Err(Error::InvalidParameter(format!(
            "{name} = {r} must be the reciprocal of a positive integer"
        )));
    }
    Ok(())
}

fn check_exponent(p: f64) -> Result<()> {
    if !(2.0..=6.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "exponent p = {p} outside the supported range [2, 6]"
        )));
    }
    Ok(())
}

fn grid_guard(side: f64, spacing: f64) -> Result<()> {
    let steps = side / spacing;
    let nodes = (steps + 1.0) * (steps + 1.0);
    if !(nodes <= NODE_CAP) {
        return Err(Error::ResourceGuard(format!(
            "field grid would hold {nodes:.2e} nodes (cap {NODE_CAP:.1e}); \
             coarsen the spacing or shrink the box"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Reports

/// Outcome of one ratio experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs` when `rhs > 0`, otherwise 0.
    pub ratio: f64,
    /// Grid spacing of the field tabulation; 0 for grid-free routes.
    pub spacing: f64,
    /// Node count of the dominant quadrature or lattice.
    pub nodes: usize,
    /// Reference envelope for this experiment, when one exists: the trivial
    /// decoupling bound, or the divided-out ball-inflation normalizer.
    pub envelope: Option<f64>,
    /// Label of the density that produced the ratio.
    pub member: Option<String>,
}

impl RatioReport {
    fn new(lhs: f64, rhs: f64, spacing: f64, nodes: usize) -> RatioReport {
        let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
        RatioReport {
            lhs,
            rhs,
            ratio,
            spacing,
            nodes,
            envelope: None,
            member: None,
        }
    }
}

/// One line of the CSV table emitted by experiment runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub delta: String,
    pub p: f64,
    pub family: String,
    pub ratio: f64,
    pub envelope: f64,
}

/// Renders rows as `delta,p,family,ratio,envelope` CSV with a header line.
pub fn rows_to_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from("delta,p,family,ratio,envelope\n");
    for row in rows {
        let family = row.family.replace('"', "\"\"");
        out.push_str(&format!(
            "{},{},\"{}\",{},{}\n",
            row.delta, row.p, family, row.ratio, row.envelope
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Box weight: flat on B, per-axis polynomial tails outside

/// `integral of the box weight over the plane` for a square of side `r`.
fn box_weight_mass(r: f64) -> f64 {
    let axis = r * (RHS_WEIGHT_EXPONENT + 1.0) / (RHS_WEIGHT_EXPONENT - 1.0);
    axis * axis
}

/// Quadrature nodes for one axis of a box-weighted integral.  The returned
/// weights fold in the one-dimensional weight factor, so callers integrate
/// `f(t) * W(t) dt` as `sum w_i f(t_i)`.
///
/// Interior panels have width at most `field_scale`; exterior panels start at
/// the weight's decay scale `r/exponent` and double outward (the weight is
/// analytic with its pole a full `r` away, so 16-node panels resolve it far
/// below the tolerances in play), truncated at excess `r/2` where the
/// remaining weight mass is below 1e-17 relative.
fn box_axis(center: f64, r: f64, field_scale: f64) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre(16);
    let (gt, gw) = &*rule;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut panel = |lo: f64, hi: f64, weighted: bool| {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (t, w) in gt.iter().zip(gw.iter()) {
            let x = mid + half * t;
            let excess = ((x - center).abs() - 0.5 * r).max(0.0);
            let wt = if weighted {
                (1.0 + excess / r).powf(-RHS_WEIGHT_EXPONENT)
            } else {
                1.0
            };
            nodes.push(x);
            weights.push(w * half * wt);
        }
    };

    let w_int = field_scale.min(r);
    let n_int = (r / w_int).ceil().max(1.0) as usize;
    let width = r / n_int as f64;
    let lo = center - 0.5 * r;
    for k in 0..n_int {
        panel(lo + width * k as f64, lo + width * (k + 1) as f64, false);
    }

    for side in [1.0, -1.0] {
        let edge = center + side * 0.5 * r;
        let mut e = 0.0;
        let mut w = (r / RHS_WEIGHT_EXPONENT).min(field_scale);
        while e < 0.5 * r {
            let e2 = (e + w).min(0.5 * r);
            let (a, b) = if side > 0.0 {
                (edge + e, edge + e2)
            } else {
                (edge - e2, edge - e)
            };
            panel(a, b, true);
            e = e2;
            w = (2.0 * w).min(field_scale);
        }
    }
    (nodes, weights)
}

/// `(integral |E_child 1|^p W_B)^{1/p}` for the parabola-child envelope with
/// curvature `a`, center `c`, half-length `h`, one value per requested `p`.
///
/// The envelope modulus is `h |Q(alpha, beta)|` with `alpha = 2 pi h (x + 2 a
/// c y)` and `beta = 2 pi a h^2 y`, so the integrand separates into slow
/// tensor factors that panelized Gauss rules resolve.
fn box_child_norms(a: f64, c: f64, h: f64, b: &SquareRegion, ps: &[f64]) -> Vec<f64> {
    let r = b.side;
    let s1 = 1.0 / h;
    let x2_rate = (4.0 * a * h * c.abs()).max(2.0 * a * h * h);
    let s2 = 2.0 / x2_rate;
    let (xs, wx) = box_axis(b.center[0], r, s1);
    let (ys, wy) = box_axis(b.center[1], r, s2);
    let chains: Vec<PowerChain> = ps.iter().map(|&p| PowerChain::for_p(p)).collect();

    let partials: Vec<Vec<f64>> = ys
        .par_iter()
        .zip(wy.par_iter())
        .map(|(&y, &wyv)| {
            let beta = 2.0 * PI * a * h * h * y;
            let shear = 2.0 * a * c * y;
            let mut accs = vec![Kahan::new(); chains.len()];
            for (&x, &wxv) in xs.iter().zip(wx.iter()) {
                let alpha = 2.0 * PI * h * (x + shear);
                let m2 = h * h * quad_phase_unit(alpha, beta).norm_sqr();
                for (ci, chain) in chains.iter().enumerate() {
                    accs[ci].add(wxv * chain.apply(m2));
                }
            }
            accs.iter().map(|acc| wyv * acc.total()).collect()
        })
        .collect();

    ps.iter()
        .enumerate()
        .map(|(ci, &p)| {
            let mut acc = Kahan::new();
            for row in &partials {
                acc.add(row[ci]);
            }
            acc.total().max(0.0).powf(1.0 / p)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Experiment specs

/// Parameters of one decoupling experiment.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    /// Child scale; `1/delta` must be an integer.
    pub delta: Ratio<i64>,
    pub p: f64,
    pub curve: CurveSpec,
    /// Box of side `delta^{-2}` unless explicitly overridden.
    pub square: SquareRegion,
    pub spacing: f64,
    pub family: Vec<DensityFunction>,
}

impl ExperimentSpec {
    pub fn new(delta: Ratio<i64>, p: f64) -> Result<ExperimentSpec> {
        check_unit_fraction("delta", delta)?;
        check_exponent(p)?;
        let side = 1.0 / (ratio_f64(delta) * ratio_f64(delta));
        Ok(ExperimentSpec {
            delta,
            p,
            curve: CurveSpec::parabola(1.0)?,
            square: SquareRegion::origin(side)?,
            spacing: 0.25,
            family: Vec::new(),
        })
    }

    pub fn with_curve(mut self, curve: CurveSpec) -> ExperimentSpec {
        self.curve = curve;
        self
    }

    pub fn with_square(mut self, square: SquareRegion) -> ExperimentSpec {
        self.square = square;
        self
    }

    pub fn with_spacing(mut self, spacing: f64) -> Result<ExperimentSpec> {
        if !(spacing > 0.0 && spacing <= 0.25) {
            return Err(Error::GridTooCoarse {
                spacing,
                max: 0.25,
            });
        }
        self.spacing = spacing;
        Ok(self)
    }

    pub fn with_family(mut self, family: Vec<DensityFunction>) -> ExperimentSpec {
        self.family = family;
        self
    }
}

/// Parameters of one bilinear experiment.
#[derive(Clone, Debug)]
pub struct BilinearSpec {
    pub delta: Ratio<i64>,
    pub nu: Ratio<i64>,
    /// Tile-scale exponent: tiles have side `nu^{-b}`.
    pub b: u32,
    pub i1: Interval,
    pub i2: Interval,
    pub p: f64,
    pub curve: CurveSpec,
    pub square: SquareRegion,
}

impl BilinearSpec {
    pub fn new(
        delta: Ratio<i64>,
        nu: Ratio<i64>,
        b: u32,
        i1: Interval,
        i2: Interval,
        p: f64,
    ) -> Result<BilinearSpec> {
        check_unit_fraction("delta", delta)?;
        check_unit_fraction("nu", nu)?;
        check_exponent(p)?;
        if b < 1 {
            return Err(Error::InvalidParameter(
                "tile exponent b must be at least 1".into(),
            ));
        }
        let nu_b = ratio_pow(nu, b)?;
        if !(nu_b / delta).is_integer() {
            return Err(Error::InvalidParameter(format!(
                "nu^b = {nu_b} is not an integer multiple of delta = {delta}"
            )));
        }
        for (name, i) in [("I", &i1), ("I'", &i2)] {
            if i.length() != nu || !(i.lo() / nu).is_integer() {
                return Err(Error::InvalidParameter(format!(
                    "{name} = [{}, {}] is not a cell of the nu = {nu} partition",
                    i.lo(),
                    i.hi()
                )));
            }
        }
        if i1.separation(&i2) < nu {
            return Err(Error::InvalidParameter(format!(
                "intervals must be nu-separated; got gap {}",
                i1.separation(&i2)
            )));
        }
        let side = 1.0 / (ratio_f64(delta) * ratio_f64(delta));
        Ok(BilinearSpec {
            delta,
            nu,
            b,
            i1,
            i2,
            p,
            curve: CurveSpec::parabola(1.0)?,
            square: SquareRegion::origin(side)?,
        })
    }

    /// Whether `nu` is small enough for the regime the bilinear constant is
    /// designed for; experiments at desk scales run outside it.
    pub fn paper_regime(&self) -> bool {
        self.nu < Ratio::new(1, 100)
    }
}

// ---------------------------------------------------------------------------
// Decoupling ratio

struct ChildNormSet {
    kids: ParabolaChildren,
    /// Unit-coefficient box-weighted norm of each child envelope.
    norms: Vec<f64>,
}

fn child_norm_set(a: f64, delta: Ratio<i64>, b: &SquareRegion, p: f64) -> Result<ChildNormSet> {
    let kids = ParabolaChildren::new(&Interval::unit(), a, delta)?;
    let norms: Vec<f64> = kids
        .centers
        .par_iter()
        .map(|&c| box_child_norms(a, c, kids.h, b, &[p])[0])
        .collect();
    Ok(ChildNormSet { kids, norms })
}

fn rhs_from_draw(set: &ChildNormSet, z: &[Complex64]) -> f64 {
    let mut acc = Kahan::new();
    for (n, zv) in set.norms.iter().zip(z.iter()) {
        let term = n * zv.norm();
        acc.add(term * term);
    }
    acc.total().max(0.0).sqrt()
}

/// Per-child atom masses, requiring at most one atom per child and no atom on
/// a child boundary (boundary atoms would be counted twice).
fn atom_child_masses(g: &DensityFunction, delta: Ratio<i64>) -> Result<Vec<f64>> {
    let children = Interval::unit().partition(delta)?;
    let total = g
        .atom_locations()
        .map(|a| a.len())
        .ok_or_else(|| Error::InvalidParameter("density is not atomic".into()))?;
    let mut masses = Vec::with_capacity(children.len());
    let mut seen = 0usize;
    for child in &children {
        match g.lower(child) {
            Lowered::Atoms(atoms) => {
                if atoms.len() > 1 {
                    return Err(Error::InvalidParameter(format!(
                        "child [{}, {}] holds {} atoms; at most one is supported",
                        child.lo(),
                        child.hi(),
                        atoms.len()
                    )));
                }
                seen += atoms.len();
                masses.push(atoms.first().map(|(_, c)| c.norm()).unwrap_or(0.0));
            }
            Lowered::Pieces { .. } => unreachable!("atomic density lowered to pieces"),
        }
    }
    if seen != total {
        return Err(Error::InvalidParameter(
            "an atom sits on a child boundary and would be double-counted".into(),
        ));
    }
    Ok(masses)
}

/// Measures `lhs/rhs` of the decoupling inequality for one density: plain
/// `L^p` norm of the full extension over `B` against the `l^2` aggregate of
/// box-weighted child norms at scale `delta`.
///
/// Supported densities are piecewise-constant ones (constant and seeded
/// random phases) on the parabola, where the child envelopes factor through
/// the quadratic-phase kernel, and atomic densities on any curve, where both
/// sides are exactly computable.
pub fn decoupling_ratio(spec: &ExperimentSpec, g: &DensityFunction) -> Result<RatioReport> {
    grid_guard(spec.square.side, spec.spacing)?;
    let envelope = trivial_bound(spec.p, spec.delta);
    let steps = (spec.square.side / spec.spacing).round() as usize;
    let nodes = (steps + 1) * (steps + 1);

    let mut report = if let (CurveSpec::Parabola { a }, Some(z)) =
        (&spec.curve, g.child_values(&Interval::unit(), spec.delta))
    {
        let set = child_norm_set(*a, spec.delta, &spec.square, spec.p)?;
        let lhs = multi_draw_lhs_norms(
            &set.kids,
            std::slice::from_ref(&z),
            &spec.square,
            spec.spacing,
            &[spec.p],
        )?[0][0];
        RatioReport::new(lhs, rhs_from_draw(&set, &z), spec.spacing, nodes)
    } else if g.is_atomic() {
        let masses = atom_child_masses(g, spec.delta)?;
        let field = evaluate_extension(g, &Interval::unit(), &spec.curve, &spec.square, spec.spacing)?;
        let lhs = lp_norm(&field, spec.p, &NormMode::Plain)?;
        let mut acc = Kahan::new();
        for m in &masses {
            acc.add(m * m);
        }
        let rhs = acc.total().sqrt() * box_weight_mass(spec.square.side).powf(1.0 / spec.p);
        RatioReport::new(lhs, rhs, spec.spacing, nodes)
    } else {
        return Err(Error::InvalidParameter(
            "decoupling experiments support piecewise-constant densities on the \
             parabola and atomic densities on any curve"
                .into(),
        ));
    };
    report.envelope = Some(envelope);
    report.member = Some(g.describe());
    Ok(report)
}

/// Largest decoupling ratio over `spec.family`, with the achieving member's
/// label.  Piecewise-constant members on the parabola share one field sweep
/// and one set of child norms; other members run individually.
pub fn max_ratio_over_family(spec: &ExperimentSpec) -> Result<RatioReport> {
    if spec.family.is_empty() {
        return Err(Error::InvalidParameter(
            "family must hold at least one density".into(),
        ));
    }
    grid_guard(spec.square.side, spec.spacing)?;

    // Batched lhs norms for every member the envelope sweep can take.
    let mut draw_of_member: HashMap<usize, usize> = HashMap::new();
    let mut draws: Vec<Vec<Complex64>> = Vec::new();
    if let CurveSpec::Parabola { .. } = spec.curve {
        for (idx, g) in spec.family.iter().enumerate() {
            if let Some(z) = g.child_values(&Interval::unit(), spec.delta) {
                draw_of_member.insert(idx, draws.len());
                draws.push(z);
            }
        }
    }
    let batched = if draws.is_empty() {
        None
    } else {
        let a = match spec.curve {
            CurveSpec::Parabola { a } => a,
            _ => unreachable!(),
        };
        let set = child_norm_set(a, spec.delta, &spec.square, spec.p)?;
        let lhs =
            multi_draw_lhs_norms(&set.kids, &draws, &spec.square, spec.spacing, &[spec.p])?;
        Some((set, lhs))
    };

    let steps = (spec.square.side / spec.spacing).round() as usize;
    let nodes = (steps + 1) * (steps + 1);
    let mut best: Option<RatioReport> = None;
    for (idx, g) in spec.family.iter().enumerate() {
        let report = match (&batched, draw_of_member.get(&idx)) {
            (Some((set, lhs)), Some(&d)) => {
                let mut r =
                    RatioReport::new(lhs[d][0], rhs_from_draw(set, &draws[d]), spec.spacing, nodes);
                r.envelope = Some(trivial_bound(spec.p, spec.delta));
                r.member = Some(g.describe());
                r
            }
            _ => decoupling_ratio(spec, g)?,
        };
        if best.as_ref().map_or(true, |b| report.ratio > b.ratio) {
            best = Some(report);
        }
    }
    Ok(best.expect("nonempty family"))
}

/// Ratio reports for every family member at every exponent in `ps`,
/// `reports[m][i]` pairing `spec.family[m]` with `ps[i]`; `spec.p` itself is
/// ignored.
///
/// Piecewise-constant members on the parabola share one field sweep across
/// all members and exponents, which is what makes wide draw suites
/// affordable; other members fall back to individual runs.
pub fn family_ratio_reports(spec: &ExperimentSpec, ps: &[f64]) -> Result<Vec<Vec<RatioReport>>> {
    if spec.family.is_empty() {
        return Err(Error::InvalidParameter(
            "family must hold at least one density".into(),
        ));
    }
    if ps.is_empty() {
        return Err(Error::InvalidParameter(
            "exponent list must be nonempty".into(),
        ));
    }
    for &p in ps {
        check_exponent(p)?;
    }
    grid_guard(spec.square.side, spec.spacing)?;

    let mut draw_of_member: HashMap<usize, usize> = HashMap::new();
    let mut draws: Vec<Vec<Complex64>> = Vec::new();
    if let CurveSpec::Parabola { .. } = spec.curve {
        for (idx, g) in spec.family.iter().enumerate() {
            if let Some(z) = g.child_values(&Interval::unit(), spec.delta) {
                draw_of_member.insert(idx, draws.len());
                draws.push(z);
            }
        }
    }
    let batched = if draws.is_empty() {
        None
    } else {
        let a = match spec.curve {
            CurveSpec::Parabola { a } => a,
            _ => unreachable!(),
        };
        let sets: Vec<ChildNormSet> = ps
            .iter()
            .map(|&p| child_norm_set(a, spec.delta, &spec.square, p))
            .collect::<Result<_>>()?;
        let lhs = multi_draw_lhs_norms(&sets[0].kids, &draws, &spec.square, spec.spacing, ps)?;
        Some((sets, lhs))
    };

    let steps = (spec.square.side / spec.spacing).round() as usize;
    let nodes = (steps + 1) * (steps + 1);
    let mut out = Vec::with_capacity(spec.family.len());
    for (idx, g) in spec.family.iter().enumerate() {
        let mut row = Vec::with_capacity(ps.len());
        match (&batched, draw_of_member.get(&idx)) {
            (Some((sets, lhs)), Some(&d)) => {
                for (i, &p) in ps.iter().enumerate() {
                    let mut r = RatioReport::new(
                        lhs[d][i],
                        rhs_from_draw(&sets[i], &draws[d]),
                        spec.spacing,
                        nodes,
                    );
                    r.envelope = Some(trivial_bound(p, spec.delta));
                    r.member = Some(g.describe());
                    row.push(r);
                }
            }
            _ => {
                for &p in ps {
                    let mut per = spec.clone();
                    per.p = p;
                    row.push(decoupling_ratio(&per, g)?);
                }
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// The constant density, `n` seeded random-phase draws at scale `delta`, and
/// one unit atom per child center.
pub fn standard_family(
    delta: Ratio<i64>,
    random_draws: usize,
    seed0: u64,
) -> Result<Vec<DensityFunction>> {
    let mut family = vec![DensityFunction::one()];
    for k in 0..random_draws {
        family.push(DensityFunction::random_phase(seed0 + k as u64, delta)?);
    }
    let atoms: Vec<(f64, f64)> = Interval::unit()
        .partition(delta)?
        .iter()
        .map(|c| (c.center_f64(), 1.0))
        .collect();
    family.push(DensityFunction::atom_sum(atoms)?);
    Ok(family)
}

/// Max empirical ratio per scale over the standard family, for
/// submultiplicativity checks across a dyadic table of scales.
pub fn dyadic_ratio_table(
    deltas: &[Ratio<i64>],
    p: f64,
    random_draws: usize,
    seed0: u64,
) -> Result<Vec<(Ratio<i64>, f64)>> {
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let spec = ExperimentSpec::new(delta, p)?
            .with_family(standard_family(delta, random_draws, seed0)?);
        out.push((delta, max_ratio_over_family(&spec)?.ratio));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Bilinear ratio

/// Transform of one axis factor of the tile spike weight: `2 int_0^{0.6}
/// (1+t)^{-100} cos(2 pi u t) dt`, tabulated on a uniform grid and read back
/// with cubic interpolation (the function varies on `u`-scale ~16, so the
/// 0.01 pitch is far inside tolerance).
struct W1Table {
    vals: Vec<f64>,
}

impl W1Table {
    fn build(umax: f64) -> W1Table {
        let rule = gauss_legendre(64);
        let n = (umax.max(0.0) / W1_STEP).ceil() as usize + 6;
        let vals = (0..=n)
            .map(|i| {
                let u = i as f64 * W1_STEP;
                let (gt, gw) = &*rule;
                let mut acc = 0.0;
                for (t, w) in gt.iter().zip(gw.iter()) {
                    let tau = 0.5 * W1_CUT * (t + 1.0);
                    acc += w * (1.0 + tau).powf(-RHS_WEIGHT_EXPONENT) * (2.0 * PI * u * tau).cos();
                }
                W1_CUT * acc
            })
            .collect();
        W1Table { vals }
    }

    fn eval(&self, u: f64) -> f64 {
        let t = u.abs() / W1_STEP;
        let base = t.floor();
        let idx = base as isize;
        let w4 = cubic_weights(t - base);
        let get = |k: isize| {
            let j = (k.unsigned_abs()).min(self.vals.len() - 1);
            self.vals[j]
        };
        w4[0] * get(idx - 1) + w4[1] * get(idx) + w4[2] * get(idx + 1) + w4[3] * get(idx + 2)
    }
}

struct TileLattice {
    /// Tiles per axis.
    m: usize,
    /// Tile side.
    l: f64,
    /// Center of the lowest-left tile.
    cx0: f64,
    cy0: f64,
}

impl TileLattice {
    fn new(square: &SquareRegion, l: f64) -> Result<TileLattice> {
        let m_f = square.side / l;
        let m = m_f.round();
        if !(m >= 1.0) || (m_f - m).abs() > 1e-9 * m.max(1.0) {
            return Err(Error::NonIntegralPartition {
                lo: 0.0,
                hi: square.side,
                step: l,
            });
        }
        Ok(TileLattice {
            m: m as usize,
            l,
            cx0: square.center[0] - 0.5 * square.side + 0.5 * l,
            cy0: square.center[1] - 0.5 * square.side + 0.5 * l,
        })
    }
}

/// Per-tile normalized squared `L^2` norms against the tile spike weight, of
/// the extension from each piece of `js`, summed over `js`.
///
/// The plane-wave form of each piece turns the weighted integral into a sum
/// over frequency pairs; each pair contributes an exactly-known transform
/// factor times a rank-one phase profile over tile centers, so one pass over
/// pairs fills the whole lattice.  The tile area cancels against the
/// normalization, leaving `sum_pairs c_s conj(c_t) W1(l dxi) W1(l dh) e(dxi
/// cx + dh cy)` per tile.
fn pair_lattice(
    lowered: &[Lowered],
    curve: &CurveSpec,
    level: u32,
    lat: &TileLattice,
) -> Vec<f64> {
    let m = lat.m;
    let per_j: Vec<Vec<(Complex64, [f64; 2])>> = lowered
        .iter()
        .map(|lw| curve_terms(lw, curve, level))
        .collect();

    let mut span = 0.0_f64;
    for terms in &per_j {
        for coord in 0..2 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (_, f) in terms {
                lo = lo.min(f[coord]);
                hi = hi.max(f[coord]);
            }
            if hi > lo {
                span = span.max(hi - lo);
            }
        }
    }
    let table = W1Table::build(lat.l * span);
    let w10 = table.vals[0];

    let mut acc = vec![Complex64::new(0.0, 0.0); m * m];
    let mut diag = Kahan::new();
    for terms in &per_j {
        if terms.iter().all(|(c, _)| c.norm_sqr() == 0.0) {
            continue;
        }
        for (c, _) in terms {
            diag.add(c.norm_sqr() * w10 * w10);
        }
        let n = terms.len();
        let chunk = (n / 64).max(1);
        let starts: Vec<usize> = (0..n).collect();
        let partials: Vec<Vec<Complex64>> = starts
            .par_chunks(chunk)
            .map(|ss| {
                let mut local = vec![Complex64::new(0.0, 0.0); m * m];
                let mut u = vec![Complex64::new(0.0, 0.0); m];
                for &s in ss {
                    let (cs, fs) = terms[s];
                    for &(ct, ft) in terms.iter().skip(s + 1) {
                        let dxi = fs[0] - ft[0];
                        let dh = fs[1] - ft[1];
                        let w = cs
                            * ct.conj()
                            * (table.eval(lat.l * dxi) * table.eval(lat.l * dh));
                        let w = w * e2pi(dxi * lat.cx0 + dh * lat.cy0);
                        let ustep = e2pi(dxi * lat.l);
                        let vstep = e2pi(dh * lat.l);
                        let mut uv = Complex64::new(1.0, 0.0);
                        for uk in u.iter_mut() {
                            *uk = uv;
                            uv *= ustep;
                        }
                        let mut rv = w;
                        for j in 0..m {
                            let row = &mut local[j * m..(j + 1) * m];
                            for (cell, uk) in row.iter_mut().zip(u.iter()) {
                                *cell += rv * uk;
                            }
                            rv *= vstep;
                        }
                    }
                }
                local
            })
            .collect();
        for part in partials {
            for (cell, add) in acc.iter_mut().zip(part.iter()) {
                *cell += add;
            }
        }
    }
    acc.iter()
        .map(|c| (diag.total() + 2.0 * c.re).max(0.0))
        .collect()
}

/// Runs `pair_lattice` at increasing quadrature levels until the per-tile
/// values stop moving in sup norm, starting from a phase-rate estimate of the
/// level that first resolves the fastest panel.
fn lattice_with_refinement(
    g: &DensityFunction,
    interval: &Interval,
    curve: &CurveSpec,
    nu_b: Ratio<i64>,
    square: &SquareRegion,
    lat: &TileLattice,
) -> Result<Vec<f64>> {
    let js = interval.partition(nu_b)?;
    let lowered: Vec<Lowered> = js.iter().map(|j| g.lower(j)).collect();
    if lowered.iter().all(|lw| lw.mass() == 0.0) {
        return Ok(vec![0.0; lat.m * lat.m]);
    }
    if lowered.iter().all(|lw| matches!(lw, Lowered::Atoms(_))) {
        return Ok(pair_lattice(&lowered, curve, 0, lat));
    }

    let slope = {
        let end = curve.domain_end();
        curve.derivatives(0.0)[1].abs().max(curve.derivatives(end)[1].abs())
    };
    let reach = 0.5 * square.side + 2.0 * lat.l;
    let omega = 2.0 * PI * 0.0625 * reach * (1.0 + slope);
    let start = ((omega / 8.0).log2().ceil() as i32).clamp(2, LEVEL_MAX as i32 - 1) as u32;

    let mut prev = pair_lattice(&lowered, curve, start, lat);
    let mut diffs = [f64::INFINITY; 2];
    for level in start + 1..=LEVEL_MAX {
        let cur = pair_lattice(&lowered, curve, level, lat);
        let sup = cur.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let d = cur
            .iter()
            .zip(prev.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if d <= LATTICE_TOL * sup {
            return Ok(cur);
        }
        prev = cur;
        diffs = [diffs[1], d];
    }
    Err(Error::QuadratureDivergence {
        doublings: LEVEL_MAX - start,
        prev: diffs[0],
        last: diffs[1],
    })
}

/// `sum_{J in P_delta(I)} (normalized box-weighted L^p norm of E_J g)^2`.
fn rhs_child_square_sum(
    g: &DensityFunction,
    interval: &Interval,
    delta: Ratio<i64>,
    curve: &CurveSpec,
    square: &SquareRegion,
    p: f64,
) -> Result<f64> {
    let area = square.area();
    if let (CurveSpec::Parabola { a }, Some(z)) = (curve, g.child_values(interval, delta)) {
        let kids = ParabolaChildren::new(interval, *a, delta)?;
        let norms: Vec<f64> = kids
            .centers
            .par_iter()
            .map(|&c| box_child_norms(*a, c, kids.h, square, &[p])[0])
            .collect();
        let mut acc = Kahan::new();
        for (n, zv) in norms.iter().zip(z.iter()) {
            let term = n * zv.norm() / area.powf(1.0 / p);
            acc.add(term * term);
        }
        Ok(acc.total())
    } else if g.is_atomic() {
        let children = interval.partition(delta)?;
        let unit_norm = (box_weight_mass(square.side) / area).powf(1.0 / p);
        let mut acc = Kahan::new();
        for child in &children {
            match g.lower(child) {
                Lowered::Atoms(atoms) => {
                    if atoms.len() > 1 {
                        return Err(Error::InvalidParameter(
                            "at most one atom per child is supported".into(),
                        ));
                    }
                    let mass = atoms.first().map(|(_, c)| c.norm()).unwrap_or(0.0);
                    let term = mass * unit_norm;
                    acc.add(term * term);
                }
                Lowered::Pieces { .. } => unreachable!("atomic density lowered to pieces"),
            }
        }
        Ok(acc.total())
    } else {
        Err(Error::InvalidParameter(
            "bilinear experiments support piecewise-constant densities on the \
             parabola and atomic densities"
                .into(),
        ))
    }
}

/// Measures the bilinear inequality: tile-averaged product of `l^2 L^2`
/// aggregates at scale `nu^b` over the two intervals, against the product of
/// `l^2 L^p` child aggregates at scale `delta`.  Both sides carry the `p`-th
/// power; the reported `lhs`, `rhs`, and `ratio` are their `1/p`-th roots, so
/// `ratio` is an empirical lower bound for the bilinear constant.
pub fn bilinear_ratio(spec: &BilinearSpec, g: &DensityFunction) -> Result<RatioReport> {
    let nu_b = ratio_pow(spec.nu, spec.b)?;
    let l = 1.0 / ratio_f64(nu_b);
    let lat = TileLattice::new(&spec.square, l)?;
    let chain_half = PowerChain::for_p(spec.p / 2.0);

    let v1 = lattice_with_refinement(g, &spec.i1, &spec.curve, nu_b, &spec.square, &lat)?;
    let v2 = lattice_with_refinement(g, &spec.i2, &spec.curve, nu_b, &spec.square, &lat)?;
    let mut acc = Kahan::new();
    for (a, b) in v1.iter().zip(v2.iter()) {
        acc.add(chain_half.apply(a * b));
    }
    let lhs_p = acc.total() / (lat.m * lat.m) as f64;

    let s1 = rhs_child_square_sum(g, &spec.i1, spec.delta, &spec.curve, &spec.square, spec.p)?;
    let s2 = rhs_child_square_sum(g, &spec.i2, spec.delta, &spec.curve, &spec.square, spec.p)?;
    let rhs_p = chain_half.apply(s1 * s2);

    let mut report = RatioReport::new(
        lhs_p.powf(1.0 / spec.p),
        rhs_p.powf(1.0 / spec.p),
        0.0,
        lat.m * lat.m,
    );
    report.member = Some(g.describe());
    Ok(report)
}

// ---------------------------------------------------------------------------
// Ball inflation

/// Quadrature for one axis of a spike-weighted integral: the centered factor
/// `(1 + |t - c|/scale)^{-100}` folded into the weights.  Panels double
/// outward from the center (never straddling it, where the weight has a
/// kink) and are capped at `w_cap` so the field factor stays resolved;
/// truncation at excess `2 * scale` leaves relative tail mass below 1e-47.
fn spike_axis(center: f64, scale: f64, w_cap: f64) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre(16);
    let (gt, gw) = &*rule;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let reach = 2.0 * scale;
    for side in [1.0, -1.0] {
        let mut e = 0.0;
        let mut w = (scale / 4.0).min(w_cap);
        while e < reach {
            let e2 = (e + w).min(reach);
            let (a, b) = if side > 0.0 {
                (center + e, center + e2)
            } else {
                (center - e2, center - e)
            };
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (t, gwv) in gt.iter().zip(gw.iter()) {
                let x = mid + half * t;
                let wt = (1.0 + (x - center).abs() / scale).powf(-RHS_WEIGHT_EXPONENT);
                nodes.push(x);
                weights.push(gwv * half * wt);
            }
            e = e2;
            w = (2.0 * w).min(w_cap);
        }
    }
    (nodes, weights)
}

/// Field sources of one interval for the ball-inflation sweep: shared
/// envelope children plus, per family member and per cell of the `nu^b`
/// partition, either coefficients into the shared children or explicit
/// plane-wave terms.
struct IntervalPlan {
    /// `(center, half-length)` of each distinct envelope child.
    shared: Vec<(f64, f64)>,
    /// One entry per (member, cell): range into `env_entries`.
    env_ranges: Vec<(usize, usize)>,
    env_entries: Vec<(usize, Complex64)>,
    /// One entry per (member, cell): range into `wave_terms`.
    wave_ranges: Vec<(usize, usize)>,
    wave_terms: Vec<(Complex64, [f64; 2])>,
    cells: usize,
    /// Fastest frequency differences within any cell, per coordinate.
    max_freq: [f64; 2],
}

fn build_interval_plan(
    interval: &Interval,
    nu_b: Ratio<i64>,
    curve: &CurveSpec,
    a: f64,
    family: &[DensityFunction],
    y_reach: f64,
) -> Result<IntervalPlan> {
    let js = interval.partition(nu_b)?;
    let mut plan = IntervalPlan {
        shared: Vec::new(),
        env_ranges: Vec::new(),
        env_entries: Vec::new(),
        wave_ranges: Vec::new(),
        wave_terms: Vec::new(),
        cells: js.len(),
        max_freq: [0.0, 0.0],
    };
    let mut dedup: HashMap<(u64, u64), usize> = HashMap::new();

    for g in family {
        if g.is_atomic() {
            for j in &js {
                let terms = curve_terms(&g.lower(j), curve, 0);
                let lo = plan.wave_terms.len();
                for coord in 0..2 {
                    let mut fmin = f64::INFINITY;
                    let mut fmax = f64::NEG_INFINITY;
                    for (_, f) in &terms {
                        fmin = fmin.min(f[coord]);
                        fmax = fmax.max(f[coord]);
                    }
                    if fmax > fmin {
                        plan.max_freq[coord] = plan.max_freq[coord].max(fmax - fmin);
                    }
                }
                plan.wave_terms.extend(terms);
                plan.wave_ranges.push((lo, plan.wave_terms.len()));
                plan.env_ranges.push((0, 0));
            }
        } else {
            let scale = g.native_scale().unwrap_or(nu_b);
            for j in &js {
                let z = g.child_values(j, scale).ok_or_else(|| {
                    Error::InvalidParameter(
                        "ball-inflation members must be piecewise constant at one scale \
                         or atomic"
                            .into(),
                    )
                })?;
                let children = j.partition(scale)?;
                let h = ratio_f64(scale) / 2.0;
                // Sub-split so the quadratic phase stays inside the envelope
                // kernel's regime: |beta| = 2 pi a h'^2 |y| <= 2 everywhere
                // the spike quadrature reaches.
                let splits = (h * (PI * a * y_reach).sqrt()).ceil().max(1.0) as usize;
                let hs = h / splits as f64;
                let lo = plan.env_entries.len();
                let mut cmin = f64::INFINITY;
                let mut cmax = f64::NEG_INFINITY;
                for (child, zv) in children.iter().zip(z.iter()) {
                    let c = child.center_f64();
                    cmin = cmin.min(c);
                    cmax = cmax.max(c);
                    for s in 0..splits {
                        let cs = c - h + (2 * s + 1) as f64 * hs;
                        let key = (cs.to_bits(), hs.to_bits());
                        let next = plan.shared.len();
                        let idx = *dedup.entry(key).or_insert_with(|| {
                            plan.shared.push((cs, hs));
                            next
                        });
                        plan.env_entries.push((idx, *zv));
                    }
                }
                plan.env_ranges.push((lo, plan.env_entries.len()));
                plan.wave_ranges.push((0, 0));
                if cmax > cmin {
                    plan.max_freq[0] = plan.max_freq[0].max(cmax - cmin + 2.0 * h);
                    let hmax = a * cmax * cmax - a * cmin * cmin;
                    plan.max_freq[1] = plan.max_freq[1].max(hmax.abs() + 2.0 * a * h * h);
                } else {
                    plan.max_freq[0] = plan.max_freq[0].max(2.0 * h);
                    plan.max_freq[1] = plan.max_freq[1].max(2.0 * a * h * h);
                }
            }
        }
    }
    Ok(plan)
}

/// Per-box aggregates `[S_1, S_2]` for each family member, where `S_i` sums
/// `(|box|^{-1} int |E_J g|^{p/2} w-hat_box)^{4/p}` over the cells `J` of the
/// interval plan's partition.
fn ball_sides(
    plans: &[IntervalPlan; 2],
    a: f64,
    p: f64,
    members: usize,
    boxes: &[SquareRegion],
) -> Vec<Vec<[f64; 2]>> {
    let chain_half = PowerChain::for_p(0.5 * p);
    let cells: [usize; 2] = [plans[0].cells, plans[1].cells];
    let stride = cells[0] + cells[1];
    let w_cap = [
        3.0 / plans[0].max_freq[0].max(plans[1].max_freq[0]).max(1e-9),
        3.0 / plans[0].max_freq[1].max(plans[1].max_freq[1]).max(1e-9),
    ];

    boxes
        .par_iter()
        .map(|bx| {
            let (xs, wx) = spike_axis(bx.center[0], bx.side, w_cap[0]);
            let (ys, wy) = spike_axis(bx.center[1], bx.side, w_cap[1]);
            let mut acc = vec![Kahan::new(); members * stride];
            let mut vbuf: [Vec<Complex64>; 2] = [
                vec![Complex64::new(0.0, 0.0); plans[0].shared.len()],
                vec![Complex64::new(0.0, 0.0); plans[1].shared.len()],
            ];
            let mut wave_row: [Vec<Complex64>; 2] = [
                vec![Complex64::new(0.0, 0.0); plans[0].wave_terms.len()],
                vec![Complex64::new(0.0, 0.0); plans[1].wave_terms.len()],
            ];
            for (&y, &wyv) in ys.iter().zip(wy.iter()) {
                for side in 0..2 {
                    for (rot, (coeff, f)) in
                        wave_row[side].iter_mut().zip(plans[side].wave_terms.iter())
                    {
                        *rot = coeff * e2pi(f[1] * y);
                    }
                }
                for (&x, &wxv) in xs.iter().zip(wx.iter()) {
                    let wt = wxv * wyv;
                    for side in 0..2 {
                        for (v, &(c, h)) in vbuf[side].iter_mut().zip(plans[side].shared.iter()) {
                            let alpha = 2.0 * PI * h * (x + 2.0 * a * c * y);
                            let beta = 2.0 * PI * a * h * h * y;
                            *v = quad_phase_unit(alpha, beta) * (h * e2pi(c * x + a * c * c * y));
                        }
                    }
                    for member in 0..members {
                        for side in 0..2 {
                            let plan = &plans[side];
                            for cell in 0..cells[side] {
                                let slot = member * plan.cells + cell;
                                let mut f = Complex64::new(0.0, 0.0);
                                let (elo, ehi) = plan.env_ranges[slot];
                                for &(idx, z) in &plan.env_entries[elo..ehi] {
                                    f += z * vbuf[side][idx];
                                }
                                let (tlo, thi) = plan.wave_ranges[slot];
                                for (rot, (_, fr)) in wave_row[side][tlo..thi]
                                    .iter()
                                    .zip(plan.wave_terms[tlo..thi].iter())
                                {
                                    f += rot * e2pi(fr[0] * x);
                                }
                                let at = member * stride + side * cells[0] + cell;
                                acc[at].add(wt * chain_half.apply(f.norm_sqr()));
                            }
                        }
                    }
                }
            }
            let area = bx.area();
            (0..members)
                .map(|member| {
                    let mut s = [0.0_f64; 2];
                    for side in 0..2 {
                        let mut sum = Kahan::new();
                        for cell in 0..cells[side] {
                            let at = member * stride + side * cells[0] + cell;
                            let val = (acc[at].total() / area).max(0.0);
                            sum.add(val.powf(4.0 / p));
                        }
                        s[side] = sum.total();
                    }
                    s
                })
                .collect()
        })
        .collect()
}

/// Ball-inflation residuals for a family sharing one node sweep.
///
/// For each member: `lhs` averages `(S_1 S_2)^{p/4}` over the tiles of side
/// `nu^{-b}` partitioning `dprime`, where `S_i` aggregates normalized
/// `L^{p/2}` spike-weighted norms at scale `nu^b` over interval `i`; `rhs` is
/// the same product on `dprime` itself times the divided-out normalizer
/// `nu^{-1} (ln nu^{-b})^{p/2}`, which is surfaced in `envelope`.  The ratio
/// is the residual constant of the inequality.
pub fn ball_inflation_residuals(
    b_exp: u32,
    nu: Ratio<i64>,
    p: f64,
    i1: &Interval,
    i2: &Interval,
    dprime: &SquareRegion,
    family: &[DensityFunction],
) -> Result<Vec<RatioReport>> {
    check_unit_fraction("nu", nu)?;
    if b_exp < 1 {
        return Err(Error::InvalidParameter(
            "tile exponent b must be at least 1".into(),
        ));
    }
    if !(p > 4.0 && p <= 6.0) {
        return Err(Error::InvalidParameter(format!(
            "ball inflation needs p in (4, 6], got {p}"
        )));
    }
    if family.is_empty() {
        return Err(Error::InvalidParameter(
            "family must hold at least one density".into(),
        ));
    }
    let nu_b = ratio_pow(nu, b_exp)?;
    let nu_2b = ratio_pow(nu, 2 * b_exp)?;
    let side_want = 1.0 / ratio_f64(nu_2b);
    if (dprime.side - side_want).abs() > 1e-9 * side_want {
        return Err(Error::InvalidParameter(format!(
            "outer box side {} must be nu^(-2b) = {side_want}",
            dprime.side
        )));
    }
    for (name, i) in [("I1", i1), ("I2", i2)] {
        if i.length() != nu || !(i.lo() / nu).is_integer() {
            return Err(Error::InvalidParameter(format!(
                "{name} is not a cell of the nu = {nu} partition"
            )));
        }
    }
    if i1.separation(&i2) < nu {
        return Err(Error::InvalidParameter(format!(
            "intervals must be nu-separated; got gap {}",
            i1.separation(&i2)
        )));
    }

    let a = 1.0;
    let curve = CurveSpec::parabola(a)?;
    let l = 1.0 / ratio_f64(nu_b);
    // Farthest vertical coordinate any spike quadrature can touch: a tile (or
    // the outer box itself) is centered inside the outer box and its nodes
    // reach two side-lengths beyond the center.
    let y_reach = dprime.center[1].abs() + 2.5 * dprime.side;
    let plans = [
        build_interval_plan(i1, nu_b, &curve, a, family, y_reach)?,
        build_interval_plan(i2, nu_b, &curve, a, family, y_reach)?,
    ];
    let mut boxes = dprime.partition(l)?;
    let tiles = boxes.len();
    boxes.push(*dprime);

    let sides = ball_sides(&plans, a, p, family.len(), &boxes);
    let chain_half = PowerChain::for_p(0.5 * p);
    let normalizer =
        (1.0 / ratio_f64(nu)) * (1.0 / ratio_f64(nu_b)).ln().powf(0.5 * p);

    let mut out = Vec::with_capacity(family.len());
    for (member, g) in family.iter().enumerate() {
        let mut acc = Kahan::new();
        for tile in sides.iter().take(tiles) {
            let s = tile[member];
            acc.add(chain_half.apply(s[0] * s[1]));
        }
        let lhs = acc.total() / tiles as f64;
        let sp = sides[tiles][member];
        let rhs_raw = chain_half.apply(sp[0] * sp[1]);
        let mut report = RatioReport::new(lhs, normalizer * rhs_raw, 0.0, tiles);
        report.envelope = Some(normalizer);
        report.member = Some(g.describe());
        out.push(report);
    }
    Ok(out)
}

/// Single-density front end for [`ball_inflation_residuals`].
pub fn ball_inflation_ratio(
    b_exp: u32,
    nu: Ratio<i64>,
    p: f64,
    i1: &Interval,
    i2: &Interval,
    dprime: &SquareRegion,
    g: &DensityFunction,
) -> Result<RatioReport> {
    let mut reports =
        ball_inflation_residuals(b_exp, nu, p, i1, i2, dprime, std::slice::from_ref(g))?;
    Ok(reports.pop().expect("one report per member"))
}

// ---------------------------------------------------------------------------
// Reduction consistency

/// Outcome of the two-term reduction split on one density.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionReport {
    pub member: String,
    /// `L^p(B)` norm of the full extension.
    pub lhs: f64,
    /// `sqrt` of the summed `L^{p/2}` norms of near-pair products.
    pub near: f64,
    /// `sqrt` of the largest far-pair product norm.
    pub far: f64,
    /// `lhs / (near + nu^{-1} far)`; 0 when the split is zero.
    pub constant: f64,
}

/// Splits the decoupling left side along the proof of the reduction to the
/// bilinear constant: `||E g||_p` is controlled by near-diagonal pairs of
/// `nu`-intervals plus `nu^{-1}` times the worst separated pair.  Reports the
/// implied constant per member; a healthy implementation keeps one constant
/// across a whole suite.
pub fn reduction_consistency_check(
    delta: Ratio<i64>,
    nu: Ratio<i64>,
    p: f64,
    family: &[DensityFunction],
) -> Result<Vec<ReductionReport>> {
    check_unit_fraction("delta", delta)?;
    check_unit_fraction("nu", nu)?;
    check_exponent(p)?;
    if !(nu / delta).is_integer() || nu > Ratio::new(1, 2) {
        return Err(Error::InvalidParameter(format!(
            "need delta | nu and nu <= 1/2; got delta = {delta}, nu = {nu}"
        )));
    }
    let side = 1.0 / (ratio_f64(delta) * ratio_f64(delta));
    let square = SquareRegion::origin(side)?;
    let spacing = 0.25;
    grid_guard(side, spacing)?;
    let a = 1.0;
    let curve = CurveSpec::parabola(a)?;
    let intervals = Interval::unit().partition(nu)?;
    let grid = ShearGrid::axis_aligned(&square, spacing, 1)?;
    let nu_f = ratio_f64(nu);

    let chain_p = PowerChain::for_p(p);
    let chain_half = PowerChain::for_p(0.5 * p);
    let sx = simpson_pattern(grid.nx - 1);
    let sy = simpson_pattern(grid.ny - 1);
    let scale = (spacing / 3.0) * (spacing / 3.0);

    let mut out = Vec::with_capacity(family.len());
    for g in family {
        let fields: Vec<Vec<Complex64>> = intervals
            .iter()
            .map(|i| -> Result<Vec<Complex64>> {
                if g.is_atomic() {
                    let terms = curve_terms(&g.lower(i), &curve, 0);
                    Ok(expsum_field(&terms, &grid))
                } else if let Some(z) = g.child_values(i, delta) {
                    let kids = ParabolaChildren::new(i, a, delta)?;
                    Ok(tabulate_field(&kids, &z, &square, spacing)?.1)
                } else {
                    Err(Error::InvalidParameter(
                        "reduction members must be piecewise constant at the child \
                         scale or atomic"
                            .into(),
                    ))
                }
            })
            .collect::<Result<_>>()?;

        let m2: Vec<Vec<f64>> = fields
            .iter()
            .map(|f| f.iter().map(|v| v.norm_sqr()).collect())
            .collect();

        let lhs = {
            let rows: Vec<f64> = (0..grid.ny)
                .into_par_iter()
                .map(|iy| {
                    let mut acc = Kahan::new();
                    for ix in 0..grid.nx {
                        let at = iy * grid.nx + ix;
                        let mut f = Complex64::new(0.0, 0.0);
                        for field in &fields {
                            f += field[at];
                        }
                        acc.add(sx[ix] * chain_p.apply(f.norm_sqr()));
                    }
                    sy[iy] * acc.total()
                })
                .collect();
            let mut acc = Kahan::new();
            for r in rows {
                acc.add(r);
            }
            (acc.total() * scale).max(0.0).powf(1.0 / p)
        };

        let pair_norm = |i: usize, j: usize| -> f64 {
            let rows: Vec<f64> = (0..grid.ny)
                .into_par_iter()
                .map(|iy| {
                    let mut acc = Kahan::new();
                    for ix in 0..grid.nx {
                        let at = iy * grid.nx + ix;
                        acc.add(sx[ix] * chain_half.apply(m2[i][at] * m2[j][at]));
                    }
                    sy[iy] * acc.total()
                })
                .collect();
            let mut acc = Kahan::new();
            for r in rows {
                acc.add(r);
            }
            (acc.total() * scale).max(0.0).powf(2.0 / p)
        };

        let n = intervals.len();
        let mut near_sum = Kahan::new();
        let mut far_max = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                let mult = if i == j { 1.0 } else { 2.0 };
                if j - i <= 1 {
                    near_sum.add(mult * pair_norm(i, j));
                } else {
                    far_max = far_max.max(pair_norm(i, j));
                }
            }
        }
        let near = near_sum.total().max(0.0).sqrt();
        let far = far_max.sqrt();
        let denom = near + far / nu_f;
        out.push(ReductionReport {
            member: g.describe(),
            lhs,
            near,
            far,
            constant: if denom > 0.0 { lhs / denom } else { 0.0 },
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Serializable experiment descriptions

/// Family description in wire form; [`FamilyConfig::build`] instantiates it
/// at a given scale.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyConfig {
    #[serde(default)]
    pub constant: bool,
    #[serde(default)]
    pub random_draws: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub atoms: bool,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            constant: true,
            random_draws: 0,
            seed: 0,
            atoms: false,
        }
    }
}

impl FamilyConfig {
    pub fn build(&self, delta: Ratio<i64>) -> Result<Vec<DensityFunction>> {
        let mut family = Vec::new();
        if self.constant {
            family.push(DensityFunction::one());
        }
        for k in 0..self.random_draws {
            family.push(DensityFunction::random_phase(self.seed + k as u64, delta)?);
        }
        if self.atoms {
            let atoms: Vec<(f64, f64)> = Interval::unit()
                .partition(delta)?
                .iter()
                .map(|c| (c.center_f64(), 1.0))
                .collect();
            family.push(DensityFunction::atom_sum(atoms)?);
        }
        if family.is_empty() {
            return Err(Error::InvalidParameter(
                "family description selects no members".into(),
            ));
        }
        Ok(family)
    }
}

/// JSON form of an [`ExperimentSpec`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Child scale as a rational string, e.g. `"1/16"`.
    pub delta: String,
    pub p: f64,
    #[serde(default)]
    pub side: Option<f64>,
    #[serde(default)]
    pub spacing: Option<f64>,
    #[serde(default)]
    pub family: Option<FamilyConfig>,
}

impl ExperimentConfig {
    pub fn to_spec(&self) -> Result<ExperimentSpec> {
        let delta = parse_ratio(&self.delta)?;
        let mut spec = ExperimentSpec::new(delta, self.p)?;
        if let Some(side) = self.side {
            spec = spec.with_square(SquareRegion::origin(side)?);
        }
        if let Some(spacing) = self.spacing {
            spec = spec.with_spacing(spacing)?;
        }
        let family = self.family.clone().unwrap_or_default();
        Ok(spec.with_family(family.build(delta)?))
    }
}

#[cfg(test)]
mod tests;
