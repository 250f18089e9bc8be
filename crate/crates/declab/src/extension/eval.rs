//! Reference evaluation of extension fields.
//!
//! A lowered density is discretized along the curve by panelwise
//! Gauss-Legendre quadrature; the field is then an exponential sum evaluated
//! over an affine grid with a geometric carrier recurrence per column.
//! Accuracy comes from comparing successive node-doubling levels.

use num::complex::Complex64;
use rayon::prelude::*;

use crate::error::Error;
use crate::geometry::{Point, SquareRegion};
use crate::numerics::{e2pi, gauss_legendre, Kahan};

use super::{CurveSpec, MAX_FIELD_SPACING};

/// Density restricted to one interval, flattened for quadrature.
#[derive(Clone, Debug)]
pub(crate) enum Lowered {
    /// Constant values between consecutive cuts, all multiplied by the
    /// modulation character `xi -> e(modulation xi)` at evaluation time.
    Pieces {
        cuts: Vec<f64>,
        values: Vec<Complex64>,
        modulation: f64,
    },
    /// Point masses as `(location, complex coefficient)`.
    Atoms(Vec<(f64, Complex64)>),
}

impl Lowered {
    /// Pull-back under the substitution `xi = scale * eta + offset` with
    /// `scale > 0`; the result lives on the `eta` axis.  Function pieces keep
    /// their values while atoms pick up the `1/scale` mass change.
    pub(crate) fn map_affine(&self, scale: f64, offset: f64) -> Lowered {
        assert!(scale > 0.0, "affine pull-back needs a positive scale");
        match self {
            Lowered::Pieces {
                cuts,
                values,
                modulation,
            } => {
                let shift = e2pi(modulation * offset);
                Lowered::Pieces {
                    cuts: cuts.iter().map(|c| (c - offset) / scale).collect(),
                    values: values.iter().map(|v| *v * shift).collect(),
                    modulation: modulation * scale,
                }
            }
            Lowered::Atoms(atoms) => Lowered::Atoms(
                atoms
                    .iter()
                    .map(|&(loc, coeff)| ((loc - offset) / scale, coeff / scale))
                    .collect(),
            ),
        }
    }

    /// Total mass `sum |coefficients|`, the natural absolute scale of the
    /// field the density generates.
    pub(crate) fn mass(&self) -> f64 {
        match self {
            Lowered::Pieces { cuts, values, .. } => values
                .iter()
                .enumerate()
                .map(|(k, v)| v.norm() * (cuts[k + 1] - cuts[k]))
                .sum(),
            Lowered::Atoms(atoms) => atoms.iter().map(|(_, c)| c.norm()).sum(),
        }
    }
}

/// Longest curve panel a single Gauss-Legendre rule spans.
const PANEL_MAX: f64 = 0.125;
/// Nodes per panel at doubling level zero.
const BASE_NODES: usize = 8;
/// Relative accuracy demanded between successive doubling levels.
const REL_TOL: f64 = 1e-8;
/// Doubling levels tried before reporting divergence.
const MAX_DOUBLINGS: u32 = 20;
/// Quadrature node budget per level; exhaustion counts as divergence.
const TERM_BUDGET: usize = 1 << 24;

/// Discretizes the lowered density along the curve at one doubling level,
/// producing plane-wave terms `(coeff, [f1, f2])` meaning
/// `coeff * e(f1 x1 + f2 x2)`.
pub(crate) fn curve_terms(
    lowered: &Lowered,
    curve: &CurveSpec,
    level: u32,
) -> Vec<(Complex64, [f64; 2])> {
    match lowered {
        Lowered::Atoms(atoms) => atoms
            .iter()
            .map(|&(loc, coeff)| (coeff, [loc, curve.height(loc)]))
            .collect(),
        Lowered::Pieces {
            cuts,
            values,
            modulation,
        } => {
            let n = BASE_NODES << level;
            let rule = gauss_legendre(n);
            let (nodes, weights) = &*rule;
            let mut out = Vec::new();
            for (k, v) in values.iter().enumerate() {
                let lo = cuts[k];
                let len = cuts[k + 1] - lo;
                if len <= 0.0 {
                    continue;
                }
                let panels = (len / PANEL_MAX).ceil().max(1.0) as usize;
                let half = len / (2.0 * panels as f64);
                for p in 0..panels {
                    let mid = lo + (2 * p + 1) as f64 * half;
                    for (t, w) in nodes.iter().zip(weights.iter()) {
                        let xi = mid + half * t;
                        let coeff = *v * (w * half) * e2pi(modulation * xi);
                        out.push((coeff, [xi, curve.height(xi)]));
                    }
                }
            }
            out
        }
    }
}

/// Affine lattice of evaluation points: node `(ix, iy)` sits at
/// `origin + ix col_step + iy row_step`.
#[derive(Clone, Debug)]
pub(crate) struct ShearGrid {
    pub origin: Point,
    pub col_step: Point,
    pub row_step: Point,
    pub nx: usize,
    pub ny: usize,
}

impl ShearGrid {
    /// Axis-parallel grid covering the `extent`-fold enlargement of `b` with
    /// an even number of steps per side.
    pub(crate) fn axis_aligned(
        b: &SquareRegion,
        spacing: f64,
        extent: u32,
    ) -> Result<ShearGrid, Error> {
        if !(spacing > 0.0) || spacing > MAX_FIELD_SPACING {
            return Err(Error::GridTooCoarse {
                spacing,
                max: MAX_FIELD_SPACING,
            });
        }
        let side = b.side * extent as f64;
        let steps_f = side / spacing;
        let steps = steps_f.round();
        if (steps_f - steps).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "spacing {spacing} does not divide the grid side {side}"
            )));
        }
        let steps = steps as usize;
        if steps < 2 || steps % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "grid needs an even step count of at least 2 per side, got {steps}"
            )));
        }
        let half = side / 2.0;
        Ok(ShearGrid {
            origin: [b.center[0] - half, b.center[1] - half],
            col_step: [spacing, 0.0],
            row_step: [0.0, spacing],
            nx: steps + 1,
            ny: steps + 1,
        })
    }
}

/// Evaluates the exponential sum at every grid node, row-major.
///
/// Within a row the phase of each term advances by the constant factor
/// `e(f . col_step)`, so a term costs one complex multiply and add per node.
/// Rows are independent and collected in index order, which keeps the result
/// identical for any worker count.
pub(crate) fn expsum_field(terms: &[(Complex64, [f64; 2])], grid: &ShearGrid) -> Vec<Complex64> {
    let rows: Vec<Vec<Complex64>> = (0..grid.ny)
        .into_par_iter()
        .map(|iy| {
            let oy = [
                grid.origin[0] + grid.row_step[0] * iy as f64,
                grid.origin[1] + grid.row_step[1] * iy as f64,
            ];
            let mut row = vec![Complex64::new(0.0, 0.0); grid.nx];
            for &(coeff, f) in terms {
                let mut carrier = coeff * e2pi(f[0] * oy[0] + f[1] * oy[1]);
                let step = e2pi(f[0] * grid.col_step[0] + f[1] * grid.col_step[1]);
                for cell in row.iter_mut() {
                    *cell += carrier;
                    carrier *= step;
                }
            }
            row
        })
        .collect();
    rows.into_iter().flatten().collect()
}

/// Evaluates the exponential sum at a single point with compensated
/// accumulation.
pub(crate) fn expsum_at(terms: &[(Complex64, [f64; 2])], x: Point) -> Complex64 {
    let mut re = Kahan::new();
    let mut im = Kahan::new();
    for &(coeff, f) in terms {
        let v = coeff * e2pi(f[0] * x[0] + f[1] * x[1]);
        re.add(v.re);
        im.add(v.im);
    }
    Complex64::new(re.total(), im.total())
}

/// Field of the lowered density over the grid, with node counts doubled until
/// two successive levels agree to [`REL_TOL`] in the sup norm.  Atomic
/// densities are exact at the first pass.
pub(crate) fn adaptive_field(
    lowered: &Lowered,
    curve: &CurveSpec,
    grid: &ShearGrid,
) -> Result<Vec<Complex64>, Error> {
    if matches!(lowered, Lowered::Atoms(_)) {
        return Ok(expsum_field(&curve_terms(lowered, curve, 0), grid));
    }
    let mut prev = expsum_field(&curve_terms(lowered, curve, 0), grid);
    let mut rel_diffs = (f64::NAN, f64::NAN);
    for level in 1..=MAX_DOUBLINGS {
        let terms = curve_terms(lowered, curve, level);
        if terms.len() > TERM_BUDGET {
            return Err(Error::QuadratureDivergence {
                doublings: level - 1,
                prev: rel_diffs.0,
                last: rel_diffs.1,
            });
        }
        let field = expsum_field(&terms, grid);
        let sup = field.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
        let diff = field
            .iter()
            .zip(prev.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0_f64, f64::max);
        if diff <= REL_TOL * sup {
            return Ok(field);
        }
        rel_diffs = (rel_diffs.1, diff / sup.max(f64::MIN_POSITIVE));
        prev = field;
    }
    Err(Error::QuadratureDivergence {
        doublings: MAX_DOUBLINGS,
        prev: rel_diffs.0,
        last: rel_diffs.1,
    })
}

/// Single-point analogue of [`adaptive_field`]; the tolerance is relative to
/// the larger of the point value and the density mass, so true zeros of an
/// oscillatory field do not stall convergence.
pub(crate) fn adaptive_point(
    lowered: &Lowered,
    curve: &CurveSpec,
    x: Point,
) -> Result<Complex64, Error> {
    if matches!(lowered, Lowered::Atoms(_)) {
        return Ok(expsum_at(&curve_terms(lowered, curve, 0), x));
    }
    let scale = lowered.mass();
    let mut prev = expsum_at(&curve_terms(lowered, curve, 0), x);
    let mut rel_diffs = (f64::NAN, f64::NAN);
    for level in 1..=MAX_DOUBLINGS {
        let terms = curve_terms(lowered, curve, level);
        if terms.len() > TERM_BUDGET {
            return Err(Error::QuadratureDivergence {
                doublings: level - 1,
                prev: rel_diffs.0,
                last: rel_diffs.1,
            });
        }
        let v = expsum_at(&terms, x);
        let tol_scale = v.norm().max(scale);
        let diff = (v - prev).norm();
        if diff <= REL_TOL * tol_scale {
            return Ok(v);
        }
        rel_diffs = (rel_diffs.1, diff / tol_scale.max(f64::MIN_POSITIVE));
        prev = v;
    }
    Err(Error::QuadratureDivergence {
        doublings: MAX_DOUBLINGS,
        prev: rel_diffs.0,
        last: rel_diffs.1,
    })
}
