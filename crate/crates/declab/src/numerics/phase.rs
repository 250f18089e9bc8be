//! The unit quadratic-phase integral Q(alpha, beta) = int_{-1}^{1}
//! exp(i (alpha t + beta t^2)) dt.
//!
//! Extension fields of an interval J of length 2h factor through Q: with
//! xi = c + h t the inner integral over J becomes h Q(2 pi h s1, 2 pi h^2 a x2)
//! in the sheared coordinate s1 = x1 + 2 a c x2. On every grid this library
//! touches |beta| stays below ~2 because |x2| <= (extension factor) / delta^2
//! while h = delta / 2, so beta is handled by a short Taylor expansion in
//! beta whose coefficients are moment integrals M_k = int t^k e^{i alpha t} dt.
//! The moment recurrence is run upward only when |alpha| comfortably exceeds
//! the largest k used (it loses digits otherwise); smaller |alpha| falls back
//! to a fixed Gauss-Legendre rule, exact there because the total phase is
//! bounded by |alpha| + |beta|.

use super::{cis, gauss_legendre};
use num::complex::Complex64;

const MAX_TAYLOR: usize = 22;
const ALPHA_SWITCH: f64 = 52.0;
const FALLBACK_NODES: usize = 48;

/// Q(alpha, beta) for |beta| <= 2.4, relative accuracy ~1e-10.
pub fn quad_phase_unit(alpha: f64, beta: f64) -> Complex64 {
    debug_assert!(beta.abs() <= 2.4, "beta = {beta} outside the Taylor regime");
    if alpha.abs() < ALPHA_SWITCH {
        return fallback_gl(alpha, beta);
    }
    let terms = taylor_terms(beta.abs());
    let moments = even_moments(alpha, 2 * terms);
    let ib = Complex64::new(0.0, beta);
    let mut coeff = Complex64::new(1.0, 0.0);
    let mut q = Complex64::new(0.0, 0.0);
    for (m, &mm) in moments.iter().enumerate() {
        q += coeff * mm;
        coeff *= ib / (m as f64 + 1.0);
    }
    q
}

/// Number of Taylor terms so the first dropped one is below 1e-15.
fn taylor_terms(b: f64) -> usize {
    let mut t = 1.0;
    for m in 1..=MAX_TAYLOR {
        t *= b / m as f64;
        if t < 1e-15 {
            return m;
        }
    }
    MAX_TAYLOR
}

/// Even moments M_0, M_2, ..., M_{2m} of e^{i alpha t} on [-1, 1], via the
/// integration-by-parts recurrence
/// M_k = (e^{i a} - (-1)^k e^{-i a}) / (i a) - (k / (i a)) M_{k-1}.
/// Stable because it is only called with |alpha| > k_max.
fn even_moments(alpha: f64, k_max: usize) -> Vec<Complex64> {
    let ea = cis(alpha);
    let inv_ia = Complex64::new(0.0, -1.0 / alpha); // 1 / (i alpha)
    let mut out = Vec::with_capacity(k_max / 2 + 1);
    let mut m_prev = Complex64::new(2.0 * alpha.sin() / alpha, 0.0);
    out.push(m_prev);
    for k in 1..=k_max {
        let boundary = if k % 2 == 0 { ea - ea.conj() } else { ea + ea.conj() };
        let m_k = (boundary - m_prev * k as f64) * inv_ia;
        if k % 2 == 0 {
            out.push(m_k);
        }
        m_prev = m_k;
    }
    out
}

fn fallback_gl(alpha: f64, beta: f64) -> Complex64 {
    let rule = gauss_legendre(FALLBACK_NODES);
    let mut acc = Complex64::new(0.0, 0.0);
    for (&t, &w) in rule.0.iter().zip(rule.1.iter()) {
        acc += cis(t * (alpha + beta * t)) * w;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute reference: adaptive-order Gauss-Legendre far above the phase span.
    fn reference(alpha: f64, beta: f64) -> Complex64 {
        let n = 64 + (alpha.abs() + beta.abs()) as usize;
        let rule = gauss_legendre(n);
        let mut acc = Complex64::new(0.0, 0.0);
        for (&t, &w) in rule.0.iter().zip(rule.1.iter()) {
            acc += cis(t * (alpha + beta * t)) * w;
        }
        acc
    }

    #[test]
    fn matches_reference_across_regimes() {
        for &alpha in &[0.0, 0.4, 3.0, 20.0, 51.0, 52.5, 60.0, 113.7, 301.0, 2047.3] {
            for &beta in &[0.0, 0.3, -0.3, 1.5, -1.57, 2.2] {
                for &a in &[alpha, -alpha] {
                    let got = quad_phase_unit(a, beta);
                    let want = reference(a, beta);
                    let denom = want.norm().max(1e-3);
                    assert!(
                        (got - want).norm() / denom < 1e-9,
                        "alpha={a} beta={beta} got={got} want={want}"
                    );
                }
            }
        }
    }

    #[test]
    fn beta_zero_is_sinc() {
        for &alpha in &[77.0, 400.0] {
            let got = quad_phase_unit(alpha, 0.0);
            let want = 2.0 * alpha.sin() / alpha;
            assert!((got.re - want).abs() < 1e-12);
            assert!(got.im.abs() < 1e-12);
        }
    }

    #[test]
    fn conjugation_symmetry() {
        // Q(-alpha, -beta) = conj Q(alpha, beta)
        let q1 = quad_phase_unit(88.0, 1.2);
        let q2 = quad_phase_unit(-88.0, -1.2);
        assert!((q1.conj() - q2).norm() < 1e-12);
    }
}
