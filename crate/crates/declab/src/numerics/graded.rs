//! Quadrature axes graded to a power-law envelope.
//!
//! Weighted norms integrate field(x) * (1 + |x - c| / r)^{-e} over boxes a
//! couple of orders of magnitude wider than the scale r / e on which the
//! weight actually varies. A uniform grid fine enough for the weight near its
//! center wastes almost all of its nodes in the far tail, so each axis is
//! built from Simpson panels whose width grows with distance d from the
//! center:
//!
//!   h(d) = min( h_field * (1 + d/r)^{e/4},  SAFETY * (r + d) / e )
//!
//! The first branch keeps panel_error * weight level (Simpson error scales
//! like h^4, the weight shrinks like (1 + d/r)^{-e}); the second keeps every
//! panel short against the weight's local e-folding length (r + d) / e.

use crate::{Error, Result};

const SAFETY: f64 = 0.2;

/// Nodes and positive weights for integration over [center - halfwidth,
/// center + halfwidth], graded toward `center`. Nodes strictly increase and
/// include both endpoints; weights carry no weight-function factor.
pub struct GradedAxis {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GradedAxis {
    pub fn build(
        center: f64,
        halfwidth: f64,
        scale: f64,
        exponent: f64,
        h_field: f64,
    ) -> Result<GradedAxis> {
        if !(halfwidth > 0.0 && scale > 0.0 && exponent > 1.0 && h_field > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "graded axis needs positive halfwidth/scale/h_field and exponent > 1, \
                 got halfwidth={halfwidth} scale={scale} exponent={exponent} h_field={h_field}"
            )));
        }
        let spacing = |d: f64| -> f64 {
            let field = h_field * (1.0 + d / scale).powf(exponent / 4.0);
            let weight = SAFETY * (scale + d) / exponent;
            field.min(weight)
        };

        // Panel boundaries for the positive half [0, halfwidth].
        let mut cuts = vec![0.0f64];
        loop {
            let d = *cuts.last().unwrap();
            let h = spacing(d);
            let next = d + 2.0 * h;
            if next >= halfwidth - 0.5 * h {
                cuts.push(halfwidth);
                break;
            }
            cuts.push(next);
        }

        let mut axis = GradedAxis { nodes: Vec::new(), weights: Vec::new() };
        let push_panel = |axis: &mut GradedAxis, a: f64, b: f64| {
            let len = b - a;
            let touches = axis
                .nodes
                .last()
                .is_some_and(|&last| (last - a).abs() < 1e-9 * halfwidth.max(1.0));
            if touches {
                *axis.weights.last_mut().unwrap() += len / 6.0;
            } else {
                axis.nodes.push(a);
                axis.weights.push(len / 6.0);
            }
            axis.nodes.push(0.5 * (a + b));
            axis.weights.push(4.0 * len / 6.0);
            axis.nodes.push(b);
            axis.weights.push(len / 6.0);
        };
        for pair in cuts.windows(2).rev() {
            push_panel(&mut axis, center - pair[1], center - pair[0]);
        }
        for pair in cuts.windows(2) {
            push_panel(&mut axis, center + pair[0], center + pair[1]);
        }
        Ok(axis)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = super::Kahan::new();
        for (&t, &w) in self.nodes.iter().zip(self.weights.iter()) {
            acc.add(w * f(t));
        }
        acc.total()
    }
}

/// Exact integral of (1 + |t| / scale)^{-exponent} over [a, b].
pub fn weight_axis_integral(scale: f64, exponent: f64, a: f64, b: f64) -> f64 {
    debug_assert!(scale > 0.0 && exponent > 1.0);
    // Odd antiderivative vanishing at 0.
    let anti = |x: f64| -> f64 {
        let core = scale / (exponent - 1.0) * (1.0 - (1.0 + x.abs() / scale).powf(1.0 - exponent));
        core.copysign(x)
    };
    anti(b) - anti(a)
}
