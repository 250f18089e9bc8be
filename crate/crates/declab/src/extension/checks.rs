//! Identity and comparison checks built on the extension evaluator.
//!
//! Each check computes both sides of a known relation through independent
//! code paths and discretizations, so agreement certifies the evaluator
//! rather than restating a formula.

use num::complex::Complex64;
use num::rational::Ratio;

use crate::error::Error;
use crate::geometry::{Interval, SquareRegion, WeightKind};
use crate::numerics::{simpson_pattern, Kahan};

use super::eval;
use super::{
    evaluate_extension_extended, lp_norm, CurveSpec, DensityFunction, NormMode, SampledField,
};

/// Relative deviation between the two sides of the parabola's affine
/// covariance: the extension of `g` over `i` agrees pointwise (up to a
/// unimodular factor) with the extension of the rescaled density over the
/// unit interval composed with the shear-dilation sending `i` to `[0, 1]`.
///
/// Both sides are `L^p(b)` norms computed on deliberately incommensurate
/// grids; for the unit interval itself the transform is the identity and the
/// grids are matched, making the deviation exactly zero.
pub fn parabolic_rescale_identity_check(
    i: &Interval,
    p: f64,
    g: &DensityFunction,
    b: &SquareRegion,
) -> Result<f64, Error> {
    let steps = ((b.side * 4.0).ceil() as usize).max(64).next_multiple_of(4);
    parabolic_rescale_deviation(i, p, g, b, steps)
}

/// Same check at an explicit resolution: `steps` grid steps per side for the
/// left side (must be a positive multiple of 4), 3/2 as many for the right.
pub(crate) fn parabolic_rescale_deviation(
    i: &Interval,
    p: f64,
    g: &DensityFunction,
    b: &SquareRegion,
    steps: usize,
) -> Result<f64, Error> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "norm exponent {p} outside [1, infinity)"
        )));
    }
    if steps == 0 || steps % 4 != 0 {
        return Err(Error::InvalidParameter(format!(
            "step count {steps} is not a positive multiple of 4"
        )));
    }
    let curve = CurveSpec::Parabola { a: 1.0 };
    let sigma = i.length_f64();
    let lo = i.lo_f64();
    let identity = *i == Interval::unit();

    let h1 = b.side / steps as f64;
    let corner = [b.center[0] - b.side / 2.0, b.center[1] - b.side / 2.0];
    let lhs_grid = eval::ShearGrid {
        origin: corner,
        col_step: [h1, 0.0],
        row_step: [0.0, h1],
        nx: steps + 1,
        ny: steps + 1,
    };
    let lhs_vals = eval::adaptive_field(&g.lower(i), &curve, &lhs_grid)?;
    let lhs = (simpson_power_integral(&lhs_vals, steps + 1, p) * (h1 / 3.0) * (h1 / 3.0))
        .powf(1.0 / p);

    // Right side: sample E over [0, 1] of the pulled-back density at the
    // image of a fresh grid under the shear-dilation.
    let steps2 = if identity { steps } else { steps * 3 / 2 };
    let h2 = b.side / steps2 as f64;
    let g_unit = g.lower(i).map_affine(sigma, lo);
    let rhs_grid = eval::ShearGrid {
        origin: [
            sigma * corner[0] + 2.0 * lo * sigma * corner[1],
            sigma * sigma * corner[1],
        ],
        col_step: [sigma * h2, 0.0],
        row_step: [2.0 * lo * sigma * h2, sigma * sigma * h2],
        nx: steps2 + 1,
        ny: steps2 + 1,
    };
    let rhs_vals = eval::adaptive_field(&g_unit, &curve, &rhs_grid)?;
    let rhs = sigma
        * (simpson_power_integral(&rhs_vals, steps2 + 1, p) * (h2 / 3.0) * (h2 / 3.0))
            .powf(1.0 / p);

    if lhs == 0.0 && rhs == 0.0 {
        return Ok(0.0);
    }
    Ok((lhs - rhs).abs() / lhs.max(rhs))
}

/// `sum simpson2d |values|^p` over an `n x n` row-major grid, without the
/// `(h/3)^2` factor.
fn simpson_power_integral(values: &[Complex64], n: usize, p: f64) -> f64 {
    let w = simpson_pattern(n - 1);
    let mut outer = Kahan::new();
    for iy in 0..n {
        let mut inner = Kahan::new();
        for ix in 0..n {
            inner.add(w[ix] * values[iy * n + ix].norm().powf(p));
        }
        outer.add(w[iy] * inner.total());
    }
    outer.total().max(0.0)
}

/// Relative deviation of `||f||_p` from `r^{1/p - 1} ||f_r||_p` where
/// `f_r(x1, x2) = r f(x1, r x2)`.
///
/// The right side resamples `f` by bicubic interpolation on a fresh grid over
/// the image box; `r = 1` keeps the original nodes, where interpolation is
/// exact, so the deviation vanishes identically there.
pub fn anisotropic_rescale_identity_check(
    r: f64,
    p: f64,
    f: &SampledField,
) -> Result<f64, Error> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "dilation factor {r} outside (0, infinity)"
        )));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "norm exponent {p} outside [1, infinity)"
        )));
    }
    let lhs = lp_norm(f, p, &NormMode::Plain)?;

    let side = f.square.side;
    let base_steps = (side / f.spacing).round() as usize;
    let (steps_x, steps_y, hx, hy) = if r == 1.0 {
        (base_steps, base_steps, f.spacing, f.spacing)
    } else {
        let s = (base_steps * 3 / 2).next_multiple_of(2);
        (s, s, side / s as f64, side / (r * s as f64))
    };
    let x_lo = f.square.center[0] - side / 2.0;
    let y_lo = (f.square.center[1] - side / 2.0) / r;
    let wx = simpson_pattern(steps_x);
    let wy = simpson_pattern(steps_y);
    let mut outer = Kahan::new();
    for iy in 0..=steps_y {
        let y = y_lo + hy * iy as f64;
        let mut inner = Kahan::new();
        for ix in 0..=steps_x {
            let x = x_lo + hx * ix as f64;
            let v = r * f.interpolate([x, r * y])?.norm();
            inner.add(wx[ix] * v.powf(p));
        }
        outer.add(wy[iy] * inner.total());
    }
    let integral = (outer.total() * (hx / 3.0) * (hy / 3.0)).max(0.0);
    let rhs = r.powf(1.0 / p - 1.0) * integral.powf(1.0 / p);

    if lhs == 0.0 && rhs == 0.0 {
        return Ok(0.0);
    }
    Ok((lhs - rhs).abs() / lhs.max(rhs))
}

/// Ratio of the normalized weighted `L^q` norm of the extension field to the
/// normalized `L^p` norm against the correspondingly flattened weight, for
/// `1 <= p < q <= infinity` and an interval-square pair at duality
/// (`|j| * side = 1`).  At `q = infinity` the numerator is the sup over the
/// square and the denominator keeps the full weight.  `kind` selects the
/// weight family and exponent.
pub fn reverse_holder_ratio(
    g: &DensityFunction,
    j: &Interval,
    curve: &CurveSpec,
    p: f64,
    q: f64,
    b: &SquareRegion,
    kind: WeightKind,
) -> Result<f64, Error> {
    if !(p >= 1.0) || !p.is_finite() || !(q > p) {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= p < q (p = {p}, q = {q})"
        )));
    }
    let duality = j.length_f64() * b.side;
    if (duality - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "interval length times square side is {duality}, expected 1"
        )));
    }
    let field = evaluate_extension_extended(g, j, curve, b, field_spacing(b), 8)?;
    let area = b.area();
    let lhs = if q.is_finite() {
        lp_norm(
            &field,
            q,
            &NormMode::Weighted {
                kind,
                exponent_scale: 1.0,
            },
        )? / area.powf(1.0 / q)
    } else {
        lp_norm(&field, f64::INFINITY, &NormMode::Plain)?
    };
    let flatten = if q.is_finite() { p / q } else { 1.0 };
    let rhs = lp_norm(
        &field,
        p,
        &NormMode::Weighted {
            kind,
            exponent_scale: flatten,
        },
    )? / area.powf(1.0 / p);
    if rhs == 0.0 {
        return Ok(0.0);
    }
    Ok(lhs / rhs)
}

/// Ratio `||E_j g||^2 / sum_children ||E_child g||^2` in weighted `L^2`,
/// where the children are the side-length `1/side(b)` subintervals of `j`.
/// A single child makes this exactly one.  Near-orthogonality of the
/// children shows up only when the weight decays on the scale of the whole
/// square, so `kind` should carry a small exponent (a few units) when the
/// ratio is meant to sit near one; steep exponents concentrate the weight
/// far below the oscillation wavelengths and push the ratio toward the
/// coherent value.
pub fn l2_decoupling_ratio(
    g: &DensityFunction,
    j: &Interval,
    curve: &CurveSpec,
    b: &SquareRegion,
    kind: WeightKind,
) -> Result<f64, Error> {
    let r = b.side.round();
    if (b.side - r).abs() > 1e-9 || r < 1.0 || r > 1e9 {
        return Err(Error::InvalidParameter(format!(
            "square side {} is not a small positive integer",
            b.side
        )));
    }
    let step = Ratio::new(1, r as i64);
    let children = j.partition(step)?;
    if let Some(atoms) = g.atom_locations() {
        for child in children.iter().skip(1) {
            let cut = child.lo_f64();
            if atoms.iter().any(|&(loc, _)| (loc - cut).abs() < 1e-9) {
                return Err(Error::InvalidParameter(format!(
                    "atom at {cut} sits on a partition boundary"
                )));
            }
        }
    }
    let mode = NormMode::Weighted {
        kind,
        exponent_scale: 1.0,
    };
    let spacing = field_spacing(b);
    let parent = evaluate_extension_extended(g, j, curve, b, spacing, 8)?;
    let lhs = lp_norm(&parent, 2.0, &mode)?.powi(2);
    let mut rhs = Kahan::new();
    for child in &children {
        let field = evaluate_extension_extended(g, child, curve, b, spacing, 8)?;
        rhs.add(lp_norm(&field, 2.0, &mode)?.powi(2));
    }
    let rhs = rhs.total();
    if rhs == 0.0 {
        return Ok(0.0);
    }
    Ok(lhs / rhs)
}

/// Node spacing for the reference-path check fields: fine enough for the
/// square, capped at the global spacing maximum.
fn field_spacing(b: &SquareRegion) -> f64 {
    (b.side / 16.0).min(0.25)
}
