//! Closed-form growth bounds in the natural-log domain: the main
//! sub-exponential bound, the two-scale recursion it satisfies, iteration
//! depth selection, bootstrap exponent pairs, the circle parameter ladder,
//! and the interpolated bound for integer point sets.
//!
//! Raw bound values like `exp((log 1/delta)^{3/4} loglog 1/delta)` overflow
//! doubles long before the interesting range of `delta`, so every function
//! here returns the natural log of the bound and every table stores logs.
//! Absolute constants that the estimates leave unnamed enter as caller
//! parameters with default 1; tests pin shapes (monotonicity, exponent
//! identities, frozen envelopes), never absolute sizes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::numerics::{log_sum_exp, Kahan};
use crate::{Error, Result};

/// Largest recursion / depth-scan index.  `2^(N+1)` must stay well inside
/// `f64` exponent range and no representable `delta` ever selects more.
const DEPTH_CAP: u32 = 64;

/// Scan ceiling for [`solve_nchoice`].
const NCHOICE_CAP: u64 = 1_000_000;

/// The recursion needs its coarsest scale strictly below this separation
/// threshold: `delta^(1/2^(N+1)) < 1/SEPARATION_INV`.
const SEPARATION_INV: f64 = 100.0;

/// Smallest admissible denominator `K` in the ladder base `C0 = 1/K`.
pub const LADDER_K_MIN: u64 = 101;

/// Ladder base used when the caller does not pick one.
pub const DEFAULT_LADDER_K: u64 = LADDER_K_MIN;

/// Depth cap for the circle ladder; keeps `3^(N+1)` inside `u64`.
const LADDER_DEPTH_CAP: u32 = 38;

/// Relative tolerance for band membership when selecting the ladder depth.
/// Exponents arrive through `powf`, so exact boundary inputs can land an
/// ulp outside their band.
const LADDER_BAND_TOL: f64 = 1e-9;

/// Frozen multiplier for the self-consistency check in
/// [`best_bound_over_depth`]: the bound at the sandwich-selected depth
/// exceeds the scanned minimum by at most the closed-form bound with this
/// constant (scaled by `max(1, log C)`).  Derived by scanning
/// `p in (4,6)`, `delta` down to `2^-900`, `C in {1, e^10}`; observed
/// worst ratio 7.87.
const BEST_DEPTH_SLACK_C: f64 = 16.0;

/// Frozen envelope for [`circle_bound_log`]: the ladder product bound stays
/// below `C * max(1, c) * L^(1-sigma_p) * (log L)^KAPPA` with `L = log(1/delta)`.
/// Derived by scanning `K in {101..2^61}`, all bands reachable in `f64`
/// plus log-domain entries to depth 12; observed worst ratio 1.97.
const CIRCLE_ENVELOPE_C: f64 = 8.0;
const CIRCLE_ENVELOPE_LOGLOG_POW: i32 = 1;

/// Frozen constant for the ladder-base term: `(1/2) log(1/tau0)` is at most
/// `TAU0_TERM_C * (log K)^(1 - log_3 2) * L^(log_3 2)`.  The band sandwich
/// gives the algebraic bound with constant `2^(-log_3 2) = 0.646`.
const TAU0_TERM_C: f64 = 0.7;

fn log3_2() -> f64 {
    2f64.ln() / 3f64.ln()
}

fn check_exponent_open(p: f64) -> Result<()> {
    if !(p > 4.0 && p < 6.0) {
        return Err(Error::InvalidParameter(format!(
            "exponent p = {p} outside (4, 6)"
        )));
    }
    Ok(())
}

fn check_exponent_closed(p: f64) -> Result<()> {
    if !(4.0..=6.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "exponent p = {p} outside [4, 6]"
        )));
    }
    Ok(())
}

fn check_constant(c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "constant multiplier must be positive and finite, got {c}"
        )));
    }
    Ok(())
}

fn check_delta_unit(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "scale delta = {delta} outside (0, 1)"
        )));
    }
    Ok(())
}

/// `sum_{j=0}^{n} r^j` in closed form, with the `r = 1` branch exact.
fn geometric_sum(r: f64, n: u32) -> f64 {
    if (r - 1.0).abs() < 1e-14 {
        (n + 1) as f64
    } else {
        (1.0 - r.powi(n as i32 + 1)) / (1.0 - r)
    }
}

/// Exponent bookkeeping shared by the closed-form bound and its users.
///
/// `alpha` is the interpolation weight `(p-4)/(p-2)` of the bilinear
/// reduction, `sigma_p = (1/4)(1 - log2((p-2)/2))` the exponent gain, and
/// `theorem_exponent = 1 - sigma_p` the power of `log(1/delta)` in the
/// closed-form bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExponentProfile {
    pub p: f64,
    pub alpha: f64,
    pub sigma_p: f64,
    pub theorem_exponent: f64,
}

impl ExponentProfile {
    pub fn new(p: f64) -> Result<Self> {
        check_exponent_closed(p)?;
        let half = (p - 2.0) / 2.0;
        Ok(ExponentProfile {
            p,
            alpha: (p - 4.0) / (p - 2.0),
            sigma_p: 0.25 * (1.0 - half.log2()),
            theorem_exponent: 0.75 + 0.25 * half.log2(),
        })
    }
}

/// Core of [`theorem_bound_log`] taking `log(1/delta)` directly, so ladder
/// rungs far below `f64` range stay computable.  Requires `logdelta_inv > 1`
/// (the log-log factor must be positive).
fn theorem_log_from_log(logdelta_inv: f64, p: f64, c: f64) -> Result<f64> {
    check_exponent_open(p)?;
    check_constant(c)?;
    if !(logdelta_inv > 1.0 && logdelta_inv.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need log(1/delta) > 1 for a positive log-log factor, got {logdelta_inv}"
        )));
    }
    let e = ExponentProfile::new(p)?.theorem_exponent;
    Ok(c * logdelta_inv.powf(e) * logdelta_inv.ln())
}

/// Natural log of the closed-form bound
/// `exp(C (log 1/delta)^(3/4 + (1/4) log2((p-2)/2)) loglog(1/delta))`.
///
/// Requires `0 < delta < 1/e` so that the log-log factor is positive, and
/// `4 < p < 6`.
pub fn theorem_bound_log(delta: f64, p: f64, c: f64) -> Result<f64> {
    check_delta_unit(delta)?;
    let l = -delta.ln();
    if l <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} >= 1/e, log-log factor nonpositive"
        )));
    }
    theorem_log_from_log(l, p, c)
}

/// Immutable-after-fill table of log-bounds per scale, keyed by exact bit
/// pattern.  Carries the ambient `(p, delta, C)` so the recursion cannot be
/// fed mismatched parameters.
#[derive(Clone, Debug)]
pub struct BoundLedger {
    p: f64,
    delta: f64,
    c: f64,
    logdelta_inv: f64,
    entries: BTreeMap<u64, f64>,
}

impl BoundLedger {
    pub fn new(p: f64, delta: f64, c: f64) -> Result<Self> {
        check_exponent_open(p)?;
        check_delta_unit(delta)?;
        check_constant(c)?;
        Ok(BoundLedger {
            p,
            delta,
            c,
            logdelta_inv: -delta.ln(),
            entries: BTreeMap::new(),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn logdelta_inv(&self) -> f64 {
        self.logdelta_inv
    }

    /// Stores `log_bound` for `scale`, replacing any previous entry.
    pub fn insert(&mut self, scale: f64, log_bound: f64) -> Result<()> {
        check_delta_unit(scale)?;
        if !log_bound.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "log-bound for scale {scale} must be finite, got {log_bound}"
            )));
        }
        self.entries.insert(scale.to_bits(), log_bound);
        Ok(())
    }

    pub fn get(&self, scale: f64) -> Option<f64> {
        self.entries.get(&scale.to_bits()).copied()
    }

    /// The scales `delta^(1 - 1/2^(j+1))`, `j = 0..=n`, that the depth-`n`
    /// recursion reads.  Coarsest first.
    pub fn recursion_scales(&self, n: u32) -> Vec<f64> {
        (0..=n)
            .map(|j| self.delta.powf(1.0 - 0.5f64.powi(j as i32 + 1)))
            .collect()
    }

    /// Fills every depth-`n` recursion scale with the closed-form bound.
    pub fn fill_from_theorem(&mut self, n: u32) -> Result<()> {
        for scale in self.recursion_scales(n) {
            let lb = theorem_bound_log(scale, self.p, self.c)?;
            self.insert(scale, lb)?;
        }
        Ok(())
    }
}

/// Natural log of the two-term recursion right-hand side at depth `n`:
/// a single coarse-scale bound plus a negative power of `delta` times a
/// geometric product of intermediate-scale bounds, all under a `C^(n^2)`
/// prefactor.  The two terms combine by log-sum-exp; the exponent sums use
/// closed-form geometric series.
///
/// Requires `delta^(1/2^(n+1)) < 1/100` and a table entry at every scale
/// from [`BoundLedger::recursion_scales`].
pub fn recursion_rhs_log(n: u32, table: &BoundLedger) -> Result<f64> {
    if n > DEPTH_CAP {
        return Err(Error::InvalidParameter(format!(
            "recursion depth {n} exceeds cap {DEPTH_CAP}"
        )));
    }
    let l = table.logdelta_inv();
    let halvings = 0.5f64.powi(n as i32 + 1);
    if l * halvings <= SEPARATION_INV.ln() {
        return Err(Error::InvalidParameter(format!(
            "delta^(1/2^{}) = {:.3e} is not below 1/{}",
            n + 1,
            (-l * halvings).exp(),
            SEPARATION_INV
        )));
    }

    let scales = table.recursion_scales(n);
    let looked: Vec<Option<f64>> = scales.iter().map(|&s| table.get(s)).collect();
    let missing: Vec<f64> = scales
        .iter()
        .zip(&looked)
        .filter(|(_, v)| v.is_none())
        .map(|(&s, _)| s)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingScales(missing));
    }

    let p = table.p();
    let r = 2.0 / (p - 2.0);
    let alpha = (p - 4.0) / (p - 2.0);

    let single = looked[n as usize].unwrap();

    let mut product = Kahan::new();
    for (j, v) in looked.iter().enumerate() {
        product.add(alpha * r.powi((n - j as u32) as i32) * v.unwrap());
    }
    let delta_exponent = halvings * (1.0 + (2.0 / p) * geometric_sum(r, n));
    let spread = delta_exponent * l + product.total();

    Ok((n as f64).powi(2) * table.c().ln() + log_sum_exp(single, spread))
}

/// The `(log-constant multiplier, delta-exponent)` pair the depth-`n`
/// bootstrap certifies: constant `C^(8^n)` and exponent
/// `lambda_n = n / (4/(p-2))^(n+1)`.
///
/// `lambda_n` decreases to 0 in `n` for every fixed `p` in `(4, 6)`.
pub fn bootstrap_exponent(n: u32, p: f64) -> Result<(f64, f64)> {
    check_exponent_closed(p)?;
    if n < 1 || n > DEPTH_CAP {
        return Err(Error::InvalidParameter(format!(
            "bootstrap depth {n} outside [1, {DEPTH_CAP}]"
        )));
    }
    let g = 4.0 / (p - 2.0);
    Ok((8f64.powi(n as i32), n as f64 / g.powi(n as i32 + 1)))
}

/// The unique depth `N >= 1` with
/// `2^-N <= (log2(1/delta))^(-1/4) <= 2^(-N+1)`, ties resolved to the
/// smaller `N`.  Equivalently the first `N` with
/// `16^(N-1) <= log2(1/delta) <= 16^N`.
///
/// Errors when `delta` is too large for any `N >= 1` (that is,
/// `delta > 1/2`).
pub fn choose_iteration_depth(delta: f64) -> Result<u32> {
    check_delta_unit(delta)?;
    let l2 = -delta.log2();
    for n in 0..=DEPTH_CAP {
        let hi = 16f64.powi(n as i32);
        if l2 <= hi {
            if l2 < hi / 16.0 || n == 0 {
                return Err(Error::InvalidParameter(format!(
                    "delta = {delta} too large: depth selection gives N < 1"
                )));
            }
            return Ok(n);
        }
    }
    Err(Error::InvalidParameter(format!(
        "delta = {delta} below the depth-{DEPTH_CAP} scan range"
    )))
}

/// Log of the depth-`n` closed bound `(C^(8^n) delta^(-n/2^(n+1)))^((p-2)/2)^(n+1)`.
fn depth_bound_log(n: u32, logdelta_inv: f64, p: f64, log_c: f64) -> f64 {
    let rp = (p - 2.0) / 2.0;
    rp.powi(n as i32 + 1)
        * (8f64.powi(n as i32) * log_c + n as f64 * 0.5f64.powi(n as i32 + 1) * logdelta_inv)
}

/// Minimizes the depth-`n` closed bound over `n in [1, 64]` and reports
/// `(argmin, min log-bound)`.  Ties resolve to the smaller depth.
///
/// Requires `delta < 1/e` and `C >= 1` (the bound is vacuous below 1).
/// When the sandwich of [`choose_iteration_depth`] applies, the bound at
/// that depth is checked to exceed the minimum by at most the closed-form
/// bound with the frozen constant [`BEST_DEPTH_SLACK_C`].
pub fn best_bound_over_depth(delta: f64, p: f64, c: f64) -> Result<(u32, f64)> {
    check_exponent_open(p)?;
    check_delta_unit(delta)?;
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "depth scan needs a constant >= 1, got {c}"
        )));
    }
    let l = -delta.ln();
    if l <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} >= 1/e, no nontrivial bound to scan"
        )));
    }
    let log_c = c.ln();
    let mut best_n = 1u32;
    let mut best = depth_bound_log(1, l, p, log_c);
    for n in 2..=DEPTH_CAP {
        let v = depth_bound_log(n, l, p, log_c);
        if v < best {
            best = v;
            best_n = n;
        }
    }
    if let Ok(np) = choose_iteration_depth(delta) {
        let slack = theorem_log_from_log(l, p, BEST_DEPTH_SLACK_C * log_c.max(1.0))?;
        debug_assert!(
            depth_bound_log(np, l, p, log_c) <= best + slack,
            "sandwich depth {np} strays beyond the frozen slack at delta = {delta}, p = {p}"
        );
    }
    Ok((best_n, best))
}

/// Smallest `N` balancing the bootstrap gain against the recursion cost:
/// the first `N` with
/// `(4/(p-2))^(N+1) (p/4 + ((p-4)/4) sum_{j=1}^{N} ((p-2)/4)^j)
///  >= (1/eps) (1 + (2/p) sum_{j=0}^{N} (2/(p-2))^j)`,
/// found by direct scan.
///
/// Accepts `4 <= p <= 6` and `0 < eps <= 1`; errors when no `N <= 10^6`
/// satisfies the inequality.
pub fn solve_nchoice(p: f64, eps: f64) -> Result<u64> {
    check_exponent_closed(p)?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps = {eps} outside (0, 1]"
        )));
    }
    let g = 4.0 / (p - 2.0);
    let r_gain = (p - 2.0) / 4.0;
    let r_cost = 2.0 / (p - 2.0);
    let mut gain_sum = 0.0;
    let mut gain_pow = 1.0;
    let mut cost_sum = 1.0;
    let mut cost_pow = 1.0;
    for n in 0..=NCHOICE_CAP {
        let lhs = g.powi(n as i32 + 1) * (p / 4.0 + (p - 4.0) / 4.0 * gain_sum);
        let rhs = (1.0 + 2.0 / p * cost_sum) / eps;
        if lhs >= rhs {
            return Ok(n);
        }
        gain_pow *= r_gain;
        gain_sum += gain_pow;
        cost_pow *= r_cost;
        cost_sum += cost_pow;
    }
    Err(Error::Numerical(format!(
        "no depth N <= {NCHOICE_CAP} balances the scan for p = {p}, eps = {eps}"
    )))
}

/// Geometric ladder of scales `tau_j = tau_0^((3/2)^j)` over the base
/// `C0 = 1/k`, stored as exact integer exponents of `C0` together with
/// their natural logs.  `tau_exponents[j] = 2^(n+1-j) 3^j` for
/// `j = 0..=n+1`; the first `n+1` of them are even, so each rung's square
/// root is again an integer power of `C0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderParams {
    pub k: u64,
    pub n: u32,
    /// `log(1/delta)` of the scale the ladder was selected for.
    pub logdelta_inv: f64,
    /// Exponent of `C0` in `tau_j`, `j = 0..=n+1`.
    pub tau_exponents: Vec<u64>,
    /// `log tau_j`, all nonpositive.
    pub log_tau: Vec<f64>,
}

impl LadderParams {
    pub fn c0(&self) -> f64 {
        1.0 / self.k as f64
    }

    /// `delta` this ladder was selected for; underflows to 0 for log-domain
    /// entries beyond `f64` range.
    pub fn delta(&self) -> f64 {
        (-self.logdelta_inv).exp()
    }

    pub fn log_tau0_inv(&self) -> f64 {
        -self.log_tau[0]
    }

    /// Integer exponent `e` with `tau_j^(1/2) = C0^e`; defined for
    /// `j = 0..=n` where the stored exponent is even.
    pub fn sqrt_exponent(&self, j: usize) -> u64 {
        debug_assert!(j <= self.n as usize && self.tau_exponents[j] % 2 == 0);
        self.tau_exponents[j] / 2
    }

    /// `log(1/tau_j^(1/2))` for a ladder rung `j = 0..=n`.
    pub fn rung_log_scale_inv(&self, j: usize) -> f64 {
        self.sqrt_exponent(j) as f64 * (self.k as f64).ln()
    }
}

/// Selects the ladder depth and scales for `delta`, base `C0 = 1/k`.
///
/// `n` is the unique depth with `C0^(3 * 3^n) <= delta <= C0^(2 * 3^n)`
/// (ties to the smaller `n`); then `tau_0 = C0^(2 * 2^n)`.  `delta` values
/// whose exponent falls in a gap between bands, or above `C0^2`, admit no
/// depth and error.
pub fn choose_circle_ladder(delta: f64, k: u64) -> Result<LadderParams> {
    check_delta_unit(delta)?;
    choose_circle_ladder_from_log(-delta.ln(), k)
}

/// Log-domain entry to [`choose_circle_ladder`] for scales far below `f64`
/// range: `logdelta_inv = log(1/delta)`.
pub fn choose_circle_ladder_from_log(logdelta_inv: f64, k: u64) -> Result<LadderParams> {
    if k < LADDER_K_MIN {
        return Err(Error::InvalidParameter(format!(
            "ladder base denominator {k} below minimum {LADDER_K_MIN}"
        )));
    }
    if !(logdelta_inv > 0.0 && logdelta_inv.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "log(1/delta) must be positive and finite, got {logdelta_inv}"
        )));
    }
    let log_k = (k as f64).ln();
    let q = logdelta_inv / log_k;
    let delta = (-logdelta_inv).exp();

    let mut band = None;
    let mut tripled = 1u64;
    for n in 0..=LADDER_DEPTH_CAP {
        let lo = 2.0 * tripled as f64;
        let hi = 3.0 * tripled as f64;
        if q < lo * (1.0 - LADDER_BAND_TOL) {
            break;
        }
        if q <= hi * (1.0 + LADDER_BAND_TOL) {
            band = Some(n);
            break;
        }
        tripled *= 3;
    }
    let n = band.ok_or(Error::NoValidLadder { delta, k })?;

    let mut tau_exponents = Vec::with_capacity(n as usize + 2);
    for j in 0..=n + 1 {
        let e = 2u64
            .checked_pow(n + 1 - j)
            .and_then(|a| a.checked_mul(3u64.pow(j)))
            .ok_or_else(|| {
                Error::InvalidParameter(format!("ladder exponent overflow at depth {n}"))
            })?;
        tau_exponents.push(e);
    }
    let log_tau = tau_exponents.iter().map(|&e| -(e as f64) * log_k).collect();

    Ok(LadderParams {
        k,
        n,
        logdelta_inv,
        tau_exponents,
        log_tau,
    })
}

/// Log of the ladder product bound on the circle at scale `delta`:
/// `(1/2) log(1/tau_0)` plus the closed-form bound at every rung scale
/// `tau_j^(1/2)`, `j = 0..=n`.
///
/// The result is checked against two frozen envelopes: the whole bound
/// stays below `CIRCLE_ENVELOPE_C * max(1, C) * L^(1-sigma_p) * log L`
/// with `L = log(1/delta)`, and the base term alone below
/// `TAU0_TERM_C * (log k)^(1 - log_3 2) * L^(log_3 2)`.
pub fn circle_bound_log(delta: f64, p: f64, c: f64) -> Result<f64> {
    circle_bound_log_with(delta, p, c, DEFAULT_LADDER_K)
}

pub fn circle_bound_log_with(delta: f64, p: f64, c: f64, k: u64) -> Result<f64> {
    check_delta_unit(delta)?;
    circle_bound_log_from_log(-delta.ln(), p, c, k)
}

/// Log-domain entry to [`circle_bound_log_with`].
pub fn circle_bound_log_from_log(logdelta_inv: f64, p: f64, c: f64, k: u64) -> Result<f64> {
    check_exponent_open(p)?;
    check_constant(c)?;
    let ladder = choose_circle_ladder_from_log(logdelta_inv, k)?;
    let base = 0.5 * ladder.log_tau0_inv();
    let mut rungs = Kahan::new();
    for j in 0..=ladder.n as usize {
        rungs.add(theorem_log_from_log(ladder.rung_log_scale_inv(j), p, c)?);
    }
    let total = base + rungs.total();

    let l = logdelta_inv;
    let profile = ExponentProfile::new(p)?;
    let envelope = CIRCLE_ENVELOPE_C
        * c.max(1.0)
        * l.powf(1.0 - profile.sigma_p)
        * l.ln().powi(CIRCLE_ENVELOPE_LOGLOG_POW);
    debug_assert!(
        total <= envelope,
        "ladder bound {total:.3e} escapes its frozen envelope {envelope:.3e}"
    );
    let base_cap =
        TAU0_TERM_C * (k as f64).ln().powf(1.0 - log3_2()) * l.powf(log3_2());
    debug_assert!(
        base <= base_cap,
        "ladder base term {base:.3e} escapes its frozen cap {base_cap:.3e}"
    );
    Ok(total)
}

/// Excess over `sqrt(|A|)` in the interpolated bound for an integer set of
/// size `asize`: minimizes `c * L^(1-tau) + cc * tau * log(asize)` over a
/// 1000-point grid of `tau in (0, 1/4]` and returns `(argmin tau, min)`.
pub fn l6_interpolated_argmin(delta: f64, asize: f64, c: f64, cc: f64) -> Result<(f64, f64)> {
    check_delta_unit(delta)?;
    check_constant(c)?;
    check_constant(cc)?;
    if !(asize >= 2.0 && asize.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "point-set size must be >= 2, got {asize}"
        )));
    }
    let l = -delta.ln();
    if l <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} >= 1/e, interpolation range empty"
        )));
    }
    let log_a = asize.ln();
    let mut best_tau = 0.25e-3;
    let mut best = f64::INFINITY;
    for i in 1..=1000 {
        let tau = i as f64 * 0.25e-3;
        let v = c * l.powf(1.0 - tau) + cc * tau * log_a;
        if v < best {
            best = v;
            best_tau = tau;
        }
    }
    Ok((best_tau, best))
}

/// Grid minimum of [`l6_interpolated_argmin`], the log of the bound factor
/// beyond `sqrt(|A|)`.
pub fn l6_interpolated_bound_log(delta: f64, asize: f64, c: f64, cc: f64) -> Result<f64> {
    l6_interpolated_argmin(delta, asize, c, cc).map(|(_, v)| v)
}

/// One CSV row of the bound summary for a `(delta, p)` pair.
#[derive(Clone, Debug, Serialize)]
pub struct BoundsRow {
    pub p: f64,
    pub delta: f64,
    pub exponent: f64,
    pub sigma_p: f64,
    pub alpha: f64,
    pub log_bound: f64,
    pub n_star: u32,
}

/// Exponent profile, closed-form log-bound, and scanned best depth for one
/// scale.
pub fn bound_summary_row(delta: f64, p: f64, c: f64) -> Result<BoundsRow> {
    let profile = ExponentProfile::new(p)?;
    let log_bound = theorem_bound_log(delta, p, c)?;
    let (n_star, _) = best_bound_over_depth(delta, p, c)?;
    Ok(BoundsRow {
        p,
        delta,
        exponent: profile.theorem_exponent,
        sigma_p: profile.sigma_p,
        alpha: profile.alpha,
        log_bound,
        n_star,
    })
}

/// Renders bound-summary rows as CSV with a fixed header.
pub fn bounds_csv(rows: &[BoundsRow]) -> String {
    let mut out = String::from("p,delta,exponent,sigma_p,alpha,log_bound,n_star\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:e},{},{},{},{:e},{}\n",
            r.p, r.delta, r.exponent, r.sigma_p, r.alpha, r.log_bound, r.n_star
        ));
    }
    out
}
