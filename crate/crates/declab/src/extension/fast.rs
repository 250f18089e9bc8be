//! Sheared-envelope evaluation of parabola extensions of per-child-constant
//! densities.
//!
//! Over a child interval with center `c` and half-length `h` a constant
//! density extends along `xi -> (xi, a xi^2)` to an exact product of a
//! unimodular plane-wave carrier and the unit-phase envelope
//! `Q(alpha, beta) = int_{-1}^{1} exp(i(alpha t + beta t^2)) dt` at
//! `alpha = 2 pi h (x1 + 2 a c x2)`, `beta = 2 pi a h^2 x2`.  The envelope is
//! slowly varying, so on large grids it is read from one shared table whose
//! column spacing equals the per-column alpha increment: the cubic
//! interpolation fraction is then constant along a row and the carrier
//! advances by a fixed complex factor, leaving a few dozen flops per node and
//! child.  All draws of a random family differ only in the per-child
//! constants, so a single sweep accumulates every draw at once.

use num::complex::Complex64;
use num::rational::Ratio;
use rayon::prelude::*;

use crate::error::Error;
use crate::geometry::{evaluate_weight, Interval, SquareRegion, WeightKind};
use crate::numerics::{e2pi, quad_phase_unit, simpson_pattern, GradedAxis, Kahan};

use super::eval::ShearGrid;
use super::ratio_f64;

/// Children of one interval on the parabola, with the data the envelope
/// evaluation needs.
#[derive(Clone, Debug)]
pub(crate) struct ParabolaChildren {
    pub a: f64,
    /// Half-length of each child.
    pub h: f64,
    /// Child interval centers, in partition order.
    pub centers: Vec<f64>,
}

impl ParabolaChildren {
    pub(crate) fn new(j: &Interval, a: f64, step: Ratio<i64>) -> Result<Self, Error> {
        let children = j.partition(step)?;
        Ok(ParabolaChildren {
            a,
            h: ratio_f64(step) / 2.0,
            centers: children.iter().map(|c| c.center_f64()).collect(),
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.centers.len()
    }
}

/// `m2 -> m2^{p/2}` specialized for half-integer `p`, where the power is a
/// product of an integer power and at most two square roots.
#[derive(Clone, Copy, Debug)]
pub(crate) enum PowerChain {
    QuarterSteps { int_pow: i32, rem: u8 },
    General(f64),
}

impl PowerChain {
    pub(crate) fn for_p(p: f64) -> Self {
        let k = (2.0 * p).round();
        if (2.0 * p - k).abs() < 1e-9 && (0.0..=1e6).contains(&k) {
            PowerChain::QuarterSteps {
                int_pow: (k as i32) / 4,
                rem: (k as u8) % 4,
            }
        } else {
            PowerChain::General(p / 2.0)
        }
    }

    /// `m2^{p/2}` for `m2 >= 0`.
    #[inline]
    pub(crate) fn apply(self, m2: f64) -> f64 {
        match self {
            PowerChain::QuarterSteps { int_pow, rem } => {
                let base = m2.powi(int_pow);
                match rem {
                    0 => base,
                    1 => base * m2.sqrt().sqrt(),
                    2 => base * m2.sqrt(),
                    _ => {
                        let s = m2.sqrt();
                        base * s * s.sqrt()
                    }
                }
            }
            PowerChain::General(e) => m2.powf(e),
        }
    }
}

/// Envelope values on a rectangular `(alpha, beta)` lattice.
struct EnvelopeTable {
    alpha0: f64,
    dalpha: f64,
    ncols: usize,
    beta0: f64,
    dbeta: f64,
    nrows: usize,
    data: Vec<Complex64>,
}

/// Beta row pitch of the envelope table; quadratic interpolation across three
/// rows leaves a relative error around 2e-6.
const DBETA: f64 = 0.05;
/// Grid side (in spatial units) above which the table pays for itself.
const TABLE_MIN_SIDE: f64 = 64.0;

impl EnvelopeTable {
    fn build(alpha_lo: f64, alpha_hi: f64, dalpha: f64, beta_max: f64) -> EnvelopeTable {
        let alpha0 = alpha_lo - 8.0 * dalpha;
        let ncols = ((alpha_hi - alpha0) / dalpha).ceil() as usize + 16;
        let beta0 = -beta_max - 2.0 * DBETA;
        let nrows = (2.0 * (beta_max + 2.0 * DBETA) / DBETA).ceil() as usize + 2;
        let data: Vec<Complex64> = (0..nrows)
            .into_par_iter()
            .flat_map_iter(|r| {
                let beta = beta0 + r as f64 * DBETA;
                (0..ncols).map(move |i| quad_phase_unit(alpha0 + i as f64 * dalpha, beta))
            })
            .collect();
        EnvelopeTable {
            alpha0,
            dalpha,
            ncols,
            beta0,
            dbeta: DBETA,
            nrows,
            data,
        }
    }

    /// Fills `out` with the envelope at `beta` on the alpha sub-lattice
    /// `[i_lo, i_lo + out.len())` by quadratic interpolation across rows.
    fn fill_row(&self, beta: f64, i_lo: usize, out: &mut [Complex64]) {
        let u = (beta - self.beta0) / self.dbeta;
        let rc = (u.round() as usize).clamp(1, self.nrows - 2);
        let t = u - rc as f64;
        let wm = 0.5 * t * (t - 1.0);
        let w0 = 1.0 - t * t;
        let wp = 0.5 * t * (t + 1.0);
        let rm = &self.data[(rc - 1) * self.ncols + i_lo..];
        let r0 = &self.data[rc * self.ncols + i_lo..];
        let rp = &self.data[(rc + 1) * self.ncols + i_lo..];
        for (j, cell) in out.iter_mut().enumerate() {
            *cell = rm[j] * wm + r0[j] * w0 + rp[j] * wp;
        }
    }
}

/// Lagrange weights on the stencil -1, 0, 1, 2 at fraction `t` past node 0.
#[inline]
pub(crate) fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Plain `L^p(b)` norms of every draw's extension field in one sweep.
///
/// `draws[d][k]` is the density value on child `k` in draw `d`; the returned
/// `norms[d][i]` is the norm at `ps[i]`.  One pass over the grid serves all
/// draws and all exponents because the per-child envelope and carrier are
/// draw-independent.
pub(crate) fn multi_draw_lhs_norms(
    kids: &ParabolaChildren,
    draws: &[Vec<Complex64>],
    b: &SquareRegion,
    spacing: f64,
    ps: &[f64],
) -> Result<Vec<Vec<f64>>, Error> {
    for z in draws {
        if z.len() != kids.len() {
            return Err(Error::InvalidParameter(format!(
                "draw carries {} child values for {} children",
                z.len(),
                kids.len()
            )));
        }
    }
    let grid = ShearGrid::axis_aligned(b, spacing, 1)?;
    let chains: Vec<PowerChain> = ps.iter().map(|&p| PowerChain::for_p(p)).collect();
    // Density values scaled by the child half-length, absorbing the envelope
    // prefactor h once.
    let z_scaled: Vec<Vec<Complex64>> = draws
        .iter()
        .map(|z| z.iter().map(|v| *v * kids.h).collect())
        .collect();

    let (a, h) = (kids.a, kids.h);
    let x0 = grid.origin[0];
    let dalpha = 2.0 * std::f64::consts::PI * h * spacing;
    let y_ends = [
        grid.origin[1],
        grid.origin[1] + spacing * (grid.ny - 1) as f64,
    ];
    let table = if b.side >= TABLE_MIN_SIDE {
        let mut alpha_lo = f64::INFINITY;
        let mut alpha_hi = f64::NEG_INFINITY;
        for &c in &kids.centers {
            for y in y_ends {
                let off = 2.0 * std::f64::consts::PI * h * (x0 + 2.0 * a * c * y);
                alpha_lo = alpha_lo.min(off);
                alpha_hi = alpha_hi.max(off + dalpha * (grid.nx - 1) as f64);
            }
        }
        let beta_max = 2.0 * std::f64::consts::PI * a * h * h
            * y_ends.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
        Some(EnvelopeTable::build(alpha_lo, alpha_hi, dalpha, beta_max))
    } else {
        None
    };

    let wx = simpson_pattern(grid.nx - 1);
    let wy = simpson_pattern(grid.ny - 1);

    // Per row: Simpson-in-x partial sums of |F_d|^p for every draw and p.
    let row_sums: Vec<Vec<f64>> = (0..grid.ny)
        .into_par_iter()
        .map(|iy| {
            let y = grid.origin[1] + spacing * iy as f64;
            let beta = 2.0 * std::f64::consts::PI * a * h * h * y;
            let mut fields = vec![Complex64::new(0.0, 0.0); draws.len() * grid.nx];

            let offs: Vec<f64> = kids
                .centers
                .iter()
                .map(|&c| 2.0 * std::f64::consts::PI * h * (x0 + 2.0 * a * c * y))
                .collect();
            // Envelope values for this row's beta over the alpha window all
            // children touch, on the master column lattice.
            let row_ctx: Option<(Vec<Complex64>, usize)> = table.as_ref().map(|tab| {
                let floors: Vec<f64> = offs
                    .iter()
                    .map(|&o| ((o - tab.alpha0) / tab.dalpha).floor())
                    .collect();
                let i_lo = floors.iter().fold(f64::INFINITY, |m, &f| m.min(f)) as usize - 4;
                let i_hi = floors.iter().fold(f64::NEG_INFINITY, |m, &f| m.max(f)) as usize
                    + (grid.nx - 1)
                    + 4;
                let mut env = vec![Complex64::new(0.0, 0.0); i_hi - i_lo + 1];
                tab.fill_row(beta, i_lo, &mut env);
                (env, i_lo)
            });

            for (k, &c) in kids.centers.iter().enumerate() {
                let mut carrier = e2pi(c * x0 + a * c * c * y);
                let step = e2pi(c * spacing);
                if let Some((row_env, i_lo)) = &row_ctx {
                    let tab = table.as_ref().unwrap();
                    let u = (offs[k] - tab.alpha0) / tab.dalpha - *i_lo as f64;
                    let base = u.floor() as usize;
                    let w4 = cubic_weights(u - base as f64);
                    for col in 0..grid.nx {
                        let j = base + col;
                        let q = row_env[j - 1] * w4[0]
                            + row_env[j] * w4[1]
                            + row_env[j + 1] * w4[2]
                            + row_env[j + 2] * w4[3];
                        let v = carrier * q;
                        for (d, z) in z_scaled.iter().enumerate() {
                            fields[d * grid.nx + col] += z[k] * v;
                        }
                        carrier *= step;
                    }
                } else {
                    for col in 0..grid.nx {
                        let alpha = offs[k] + dalpha * col as f64;
                        let v = carrier * quad_phase_unit(alpha, beta);
                        for (d, z) in z_scaled.iter().enumerate() {
                            fields[d * grid.nx + col] += z[k] * v;
                        }
                        carrier *= step;
                    }
                }
            }

            let mut partial = vec![0.0_f64; draws.len() * chains.len()];
            for d in 0..draws.len() {
                let row = &fields[d * grid.nx..(d + 1) * grid.nx];
                let mut accs = vec![Kahan::new(); chains.len()];
                for (col, v) in row.iter().enumerate() {
                    let m2 = v.norm_sqr();
                    for (ci, chain) in chains.iter().enumerate() {
                        accs[ci].add(wx[col] * chain.apply(m2));
                    }
                }
                for (ci, acc) in accs.iter().enumerate() {
                    partial[d * chains.len() + ci] = acc.total();
                }
            }
            partial
        })
        .collect();

    let scale = (spacing / 3.0) * (spacing / 3.0);
    let mut norms = vec![vec![0.0_f64; ps.len()]; draws.len()];
    for (d, out) in norms.iter_mut().enumerate() {
        for (ci, &p) in ps.iter().enumerate() {
            let mut acc = Kahan::new();
            for (iy, partial) in row_sums.iter().enumerate() {
                acc.add(wy[iy] * partial[d * chains.len() + ci]);
            }
            out[ci] = (acc.total() * scale).max(0.0).powf(1.0 / p);
        }
    }
    Ok(norms)
}

/// Extension field of one draw over the grid on `b`, as row-major values on
/// `ShearGrid::axis_aligned(b, spacing, 1)`.  Same envelope walk as the norm
/// sweep, kept separate because callers that need the field itself (for
/// pointwise products across intervals) are off the hot path.
pub(crate) fn tabulate_field(
    kids: &ParabolaChildren,
    z: &[Complex64],
    b: &SquareRegion,
    spacing: f64,
) -> Result<(ShearGrid, Vec<Complex64>), Error> {
    if z.len() != kids.len() {
        return Err(Error::InvalidParameter(format!(
            "draw carries {} child values for {} children",
            z.len(),
            kids.len()
        )));
    }
    let grid = ShearGrid::axis_aligned(b, spacing, 1)?;
    let z_scaled: Vec<Complex64> = z.iter().map(|v| *v * kids.h).collect();
    let (a, h) = (kids.a, kids.h);
    let x0 = grid.origin[0];
    let dalpha = 2.0 * std::f64::consts::PI * h * spacing;
    let y_ends = [
        grid.origin[1],
        grid.origin[1] + spacing * (grid.ny - 1) as f64,
    ];
    let table = if b.side >= TABLE_MIN_SIDE {
        let mut alpha_lo = f64::INFINITY;
        let mut alpha_hi = f64::NEG_INFINITY;
        for &c in &kids.centers {
            for y in y_ends {
                let off = 2.0 * std::f64::consts::PI * h * (x0 + 2.0 * a * c * y);
                alpha_lo = alpha_lo.min(off);
                alpha_hi = alpha_hi.max(off + dalpha * (grid.nx - 1) as f64);
            }
        }
        let beta_max = 2.0 * std::f64::consts::PI * a * h * h
            * y_ends.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
        Some(EnvelopeTable::build(alpha_lo, alpha_hi, dalpha, beta_max))
    } else {
        None
    };

    let rows: Vec<Vec<Complex64>> = (0..grid.ny)
        .into_par_iter()
        .map(|iy| {
            let y = grid.origin[1] + spacing * iy as f64;
            let beta = 2.0 * std::f64::consts::PI * a * h * h * y;
            let mut row = vec![Complex64::new(0.0, 0.0); grid.nx];
            let offs: Vec<f64> = kids
                .centers
                .iter()
                .map(|&c| 2.0 * std::f64::consts::PI * h * (x0 + 2.0 * a * c * y))
                .collect();
            let row_ctx: Option<(Vec<Complex64>, usize)> = table.as_ref().map(|tab| {
                let floors: Vec<f64> = offs
                    .iter()
                    .map(|&o| ((o - tab.alpha0) / tab.dalpha).floor())
                    .collect();
                let i_lo = floors.iter().fold(f64::INFINITY, |m, &f| m.min(f)) as usize - 4;
                let i_hi = floors.iter().fold(f64::NEG_INFINITY, |m, &f| m.max(f)) as usize
                    + (grid.nx - 1)
                    + 4;
                let mut env = vec![Complex64::new(0.0, 0.0); i_hi - i_lo + 1];
                tab.fill_row(beta, i_lo, &mut env);
                (env, i_lo)
            });
            for (k, &c) in kids.centers.iter().enumerate() {
                let mut carrier = e2pi(c * x0 + a * c * c * y);
                let step = e2pi(c * spacing);
                if let Some((row_env, i_lo)) = &row_ctx {
                    let tab = table.as_ref().unwrap();
                    let u = (offs[k] - tab.alpha0) / tab.dalpha - *i_lo as f64;
                    let base = u.floor() as usize;
                    let w4 = cubic_weights(u - base as f64);
                    for (col, cell) in row.iter_mut().enumerate() {
                        let j = base + col;
                        let q = row_env[j - 1] * w4[0]
                            + row_env[j] * w4[1]
                            + row_env[j + 1] * w4[2]
                            + row_env[j + 2] * w4[3];
                        *cell += z_scaled[k] * (carrier * q);
                        carrier *= step;
                    }
                } else {
                    for (col, cell) in row.iter_mut().enumerate() {
                        let v = carrier * quad_phase_unit(offs[k] + dalpha * col as f64, beta);
                        *cell += z_scaled[k] * v;
                        carrier *= step;
                    }
                }
            }
            row
        })
        .collect();
    Ok((grid, rows.into_iter().flatten().collect()))
}

/// Weighted `L^p` norms `(integral |E g_child|^p W)^{1/p}` of a unit-constant
/// child density, integrated over the concentric double of `b` on a
/// weight-graded tensor grid.
///
/// The weight mass outside the doubled square is below 1e-25 of the total for
/// every supported kind, far under the quadrature accuracy, so the truncation
/// never shows.  Scale the result by `|z|` for a child value `z`.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn weighted_child_norms(
    a: f64,
    center: f64,
    h: f64,
    b: &SquareRegion,
    kind: WeightKind,
    ps: &[f64],
) -> Result<Vec<f64>, Error> {
    if !(h > 0.0) || !(a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "child envelope needs positive half-length and curvature, got h={h}, a={a}"
        )));
    }
    let r = b.side;
    // Per-axis grading exponent: a product weight splits exactly; the radial
    // and bump kinds are dominated by the split of half their exponent.
    let e_axis = match kind {
        WeightKind::Product { exponent } => exponent,
        WeightKind::Radial { exponent } => exponent / 2.0,
        WeightKind::Bump { exponent } => exponent,
    };
    // Feature scales of |Q|: alpha sweeps one lobe over 1/(2h) in x1; in x2
    // the faster of the shear and the quadratic envelope terms governs.
    let hx1 = 1.0 / (16.0 * h);
    let x2_rate = (4.0 * a * h * center.abs()).max(2.0 * a * h * h);
    let hx2 = std::f64::consts::PI / (8.0 * x2_rate);
    let axis_x = GradedAxis::build(b.center[0], r, r, e_axis, hx1)?;
    let axis_y = GradedAxis::build(b.center[1], r, r, e_axis, hx2)?;

    let chains: Vec<PowerChain> = ps.iter().map(|&p| PowerChain::for_p(p)).collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    let partials: Vec<Vec<f64>> = axis_y
        .nodes
        .par_iter()
        .zip(axis_y.weights.par_iter())
        .map(|(&y, &wy)| {
            let beta = two_pi * a * h * h * y;
            let shear = 2.0 * a * center * y;
            let mut accs = vec![Kahan::new(); chains.len()];
            for (&x, &wx) in axis_x.nodes.iter().zip(axis_x.weights.iter()) {
                let alpha = two_pi * h * (x + shear);
                let m2 = h * h * quad_phase_unit(alpha, beta).norm_sqr();
                let w = evaluate_weight(kind, b, [x, y]);
                for (ci, chain) in chains.iter().enumerate() {
                    accs[ci].add(wx * chain.apply(m2) * w);
                }
            }
            accs.iter().map(|acc| wy * acc.total()).collect()
        })
        .collect();

    Ok(ps
        .iter()
        .enumerate()
        .map(|(ci, &p)| {
            let mut acc = Kahan::new();
            for row in &partials {
                acc.add(row[ci]);
            }
            acc.total().max(0.0).powf(1.0 / p)
        })
        .collect())
}
