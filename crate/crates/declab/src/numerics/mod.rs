//! Shared numerical kernels: compensated sums, log-domain helpers,
//! Gauss-Legendre rules, oscillatory quadratic-phase integrals and
//! weight-adapted graded quadrature axes.

mod gauss;
mod graded;
mod phase;

pub use gauss::gauss_legendre;
pub use graded::{weight_axis_integral, GradedAxis};
pub use phase::quad_phase_unit;

use num::complex::Complex64;

/// Compensated (Kahan-Neumaier) accumulator. Deterministic and accurate for
/// the long norm sums; reductions over parallel chunks always combine these
/// serially in index order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn merge(&mut self, other: &Kahan) {
        self.add(other.sum);
        self.add(other.comp);
    }
}

/// log(exp(a) + exp(b)) without leaving the log domain.
#[inline]
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// e(z) = exp(2 pi i z), the character convention used throughout.
#[inline]
pub fn e2pi(z: f64) -> Complex64 {
    let (s, c) = (2.0 * std::f64::consts::PI * z).sin_cos();
    Complex64::new(c, s)
}

/// exp(i theta) for theta in radians.
#[inline]
pub fn cis(theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    Complex64::new(c, s)
}

/// Floor of sqrt(n) in pure integer arithmetic.
pub fn isqrt_u64(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut x = (n as f64).sqrt() as u64;
    // float seed can be off by one in either direction near 2^53
    while x.checked_mul(x).map_or(true, |sq| sq > n) {
        x -= 1;
    }
    while (x + 1).checked_mul(x + 1).map_or(false, |sq| sq <= n) {
        x += 1;
    }
    x
}

/// Some(r) when n = r^2.
pub fn perfect_sqrt(n: u64) -> Option<u64> {
    let r = isqrt_u64(n);
    (r * r == n).then_some(r)
}

/// Four-point cubic interpolation on a uniform grid; `f` holds samples at
/// offsets -1, 0, 1, 2 and `t` in [0, 1] is the fraction past the second one.
#[inline]
pub fn cubic4(f: [Complex64; 4], t: f64) -> Complex64 {
    // Lagrange weights for nodes -1, 0, 1, 2
    let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    f[0] * w0 + f[1] * w1 + f[2] * w2 + f[3] * w3
}

/// Composite Simpson weights (without the h/3 factor) for n+1 nodes, n even.
pub fn simpson_pattern(n: usize) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "simpson needs an even interval count");
    let mut w = vec![2.0; n + 1];
    w[0] = 1.0;
    w[n] = 1.0;
    for wk in w.iter_mut().skip(1).step_by(2) {
        *wk = 4.0;
    }
    w
}
