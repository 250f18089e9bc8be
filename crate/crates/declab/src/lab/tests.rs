use super::*;
use crate::geometry::WeightKind;

fn assert_rel(got: f64, want: f64, tol: f64) {
    let denom = want.abs().max(1e-300);
    assert!(
        ((got - want) / denom).abs() <= tol,
        "got {got:e}, want {want:e} (rel tol {tol:e})"
    );
}

// Frozen regression values, derived once by `derive_frozen_lab_constants`
// and asserted within a 5% band thereafter (tighter where the quantity is
// grid-exact).
const UNIT_SCALE_RATIO: f64 = 9.968310664321746e-1;
const ATOM_QUARTER_RATIO: f64 = 1.1990115736123006e0;
const BILINEAR_ONE_EIGHTH: f64 = 1.5183603792183784e-2;
const BILINEAR_ATOMS_QUARTER: f64 = 2.0041043439987413e-2;
const BALL_SINGLE_RESIDUAL: f64 = 4.877629474153234e-4;
const REDUCTION_ONE_EIGHTH: f64 = 3.532595081537763e-1;
const FROZEN_BAND: f64 = 5e-2;

fn quarter() -> Ratio<i64> {
    Ratio::new(1, 4)
}

fn eighth() -> Ratio<i64> {
    Ratio::new(1, 8)
}

fn center_atoms(delta: Ratio<i64>) -> DensityFunction {
    let atoms: Vec<(f64, f64)> = Interval::unit()
        .partition(delta)
        .unwrap()
        .iter()
        .map(|c| (c.center_f64(), 1.0))
        .collect();
    DensityFunction::atom_sum(atoms).unwrap()
}

#[test]
fn parse_ratio_reads_fractions_and_integers() {
    assert_eq!(parse_ratio("1/16").unwrap(), Ratio::new(1, 16));
    assert_eq!(parse_ratio(" 3 / 4 ").unwrap(), Ratio::new(3, 4));
    assert_eq!(parse_ratio("2").unwrap(), Ratio::new(2, 1));
    assert!(parse_ratio("1/0").is_err());
    assert!(parse_ratio("x").is_err());
    assert!(parse_ratio("1/2/3").is_err());
}

#[test]
fn trivial_bound_matches_closed_form() {
    assert_rel(trivial_bound(5.0, Ratio::new(1, 16)), 4194304.0, 1e-12);
    assert_rel(trivial_bound(2.0, Ratio::one()), 2f64.powi(50), 1e-12);
}

#[test]
fn specs_reject_malformed_parameters() {
    assert!(ExperimentSpec::new(Ratio::new(2, 3), 5.0).is_err());
    assert!(ExperimentSpec::new(Ratio::new(0, 1), 5.0).is_err());
    assert!(ExperimentSpec::new(quarter(), 7.0).is_err());
    assert!(ExperimentSpec::new(quarter(), 5.0)
        .unwrap()
        .with_spacing(0.3)
        .is_err());

    let i0 = Interval::new(Ratio::zero(), quarter()).unwrap();
    let i1 = Interval::new(quarter(), Ratio::new(1, 2)).unwrap();
    let i3 = Interval::new(Ratio::new(3, 4), Ratio::one()).unwrap();
    // Adjacent intervals have zero separation; identical ones likewise.
    assert!(BilinearSpec::new(eighth(), quarter(), 1, i0, i0, 5.0).is_err());
    assert!(BilinearSpec::new(eighth(), quarter(), 1, i0, i1, 5.0).is_err());
    // Interval off the nu-partition lattice.
    let off = Interval::new(eighth(), Ratio::new(3, 8)).unwrap();
    assert!(BilinearSpec::new(eighth(), quarter(), 1, off, i3, 5.0).is_err());
    // Tile scale finer than the child scale.
    assert!(BilinearSpec::new(quarter(), quarter(), 2, i0, i3, 5.0).is_err());
    assert!(BilinearSpec::new(eighth(), quarter(), 0, i0, i3, 5.0).is_err());
    assert!(BilinearSpec::new(eighth(), quarter(), 1, i0, i3, 5.0).is_ok());

    let sq = SquareRegion::origin(64.0).unwrap();
    let g = DensityFunction::one();
    // Ball inflation rejects p <= 4 and an outer box of the wrong side.
    assert!(ball_inflation_ratio(1, eighth(), 4.0, &i0, &i1, &sq, &g).is_err());
    let small = SquareRegion::origin(32.0).unwrap();
    let j0 = Interval::new(Ratio::zero(), eighth()).unwrap();
    let j2 = Interval::new(quarter(), Ratio::new(3, 8)).unwrap();
    assert!(ball_inflation_ratio(1, eighth(), 5.0, &j0, &j2, &small, &g).is_err());
    assert!(ball_inflation_ratio(1, eighth(), 5.0, &j0, &j2, &sq, &g).is_ok());
}

#[test]
fn box_axis_reproduces_the_weight_mass() {
    for r in [1.0, 4.0] {
        let (_, w) = box_axis(0.7, r, 1e9);
        let total: f64 = w.iter().sum();
        let e = RHS_WEIGHT_EXPONENT;
        // One axis: r inside, plus two tails r/(e-1)(1 - (3/2)^{1-e}).
        let tail = r / (e - 1.0) * (1.0 - 1.5f64.powf(1.0 - e));
        assert_rel(total, r + 2.0 * tail, 1e-12);
    }
    let e = RHS_WEIGHT_EXPONENT;
    let full_axis = 4.0 * (e + 1.0) / (e - 1.0);
    assert_rel(box_weight_mass(4.0), full_axis * full_axis, 1e-12);
}

#[test]
fn box_child_norms_match_a_brute_grid() {
    // delta = 1 child on the unit box, against plain 2d Simpson of
    // |envelope|^p times the box weight over the 3x-enlarged grid.
    let b = SquareRegion::origin(1.0).unwrap();
    let (a, c, h) = (1.0, 0.5, 0.5);
    let p = 5.0;
    let fast = box_child_norms(a, c, h, &b, &[p])[0];

    let n = 384usize;
    let spacing = 3.0 / n as f64;
    let wts = simpson_pattern(n);
    let mut acc = Kahan::new();
    for iy in 0..=n {
        let y = -1.5 + spacing * iy as f64;
        for ix in 0..=n {
            let x = -1.5 + spacing * ix as f64;
            let alpha = 2.0 * PI * h * (x + 2.0 * a * c * y);
            let beta = 2.0 * PI * a * h * h * y;
            let m = h * quad_phase_unit(alpha, beta).norm();
            let wx = (1.0 + (x.abs() - 0.5).max(0.0)).powf(-RHS_WEIGHT_EXPONENT);
            let wy = (1.0 + (y.abs() - 0.5).max(0.0)).powf(-RHS_WEIGHT_EXPONENT);
            acc.add(wts[ix] * wts[iy] * m.powf(p) * wx * wy);
        }
    }
    let brute = (acc.total() * (spacing / 3.0) * (spacing / 3.0)).powf(1.0 / p);
    // The weight kink at the box edge limits the brute grid; the tail beyond
    // the enlargement is below 1e-40 of the total.
    assert_rel(fast, brute, 5e-4);
}

#[test]
fn weight_transform_table_matches_direct_integrals() {
    let table = W1Table::build(4.0);
    let e = RHS_WEIGHT_EXPONENT;
    let w0 = 2.0 / (e - 1.0) * (1.0 - 1.6f64.powf(1.0 - e));
    assert_rel(table.vals[0], w0, 1e-12);

    let rule = gauss_legendre(64);
    let (gt, gw) = &*rule;
    for u in [0.333, 1.77, -2.5] {
        let mut direct = 0.0;
        for (t, w) in gt.iter().zip(gw.iter()) {
            let tau = 0.5 * W1_CUT * (t + 1.0);
            direct += w * (1.0 + tau).powf(-e) * (2.0 * PI * u * tau).cos();
        }
        direct *= W1_CUT;
        assert_rel(table.eval(u), direct, 1e-9);
    }
}

#[test]
fn spike_axis_reproduces_the_weight_mass() {
    let scale = 8.0;
    let (_, w) = spike_axis(3.0, scale, 1e9);
    let total: f64 = w.iter().sum();
    let e = RHS_WEIGHT_EXPONENT;
    let want = 2.0 * scale / (e - 1.0) * (1.0 - 3.0f64.powf(1.0 - e));
    assert_rel(total, want, 1e-12);
}

#[test]
fn zero_density_reports_zero_everywhere() {
    let zero = DensityFunction::constant(Complex64::new(0.0, 0.0));
    let spec = ExperimentSpec::new(quarter(), 5.0).unwrap();
    let r = decoupling_ratio(&spec, &zero).unwrap();
    assert_eq!(r.ratio, 0.0);
    assert!(r.lhs < 1e-12);

    let i0 = Interval::new(Ratio::zero(), quarter()).unwrap();
    let i3 = Interval::new(Ratio::new(3, 4), Ratio::one()).unwrap();
    let bspec = BilinearSpec::new(quarter(), quarter(), 1, i0, i3, 5.0).unwrap();
    assert_eq!(bilinear_ratio(&bspec, &zero).unwrap().ratio, 0.0);

    let j0 = Interval::new(Ratio::zero(), quarter()).unwrap();
    let j2 = Interval::new(Ratio::new(1, 2), Ratio::new(3, 4)).unwrap();
    let dp = SquareRegion::origin(16.0).unwrap();
    let ball = ball_inflation_ratio(1, quarter(), 5.0, &j0, &j2, &dp, &zero).unwrap();
    assert_eq!(ball.ratio, 0.0);

    let red = reduction_consistency_check(quarter(), quarter(), 5.0, &[zero]).unwrap();
    assert_eq!(red[0].constant, 0.0);
}

#[test]
fn unit_density_at_scale_one_sits_just_under_one() {
    let spec = ExperimentSpec::new(Ratio::one(), 5.0).unwrap();
    let r = decoupling_ratio(&spec, &DensityFunction::one()).unwrap();
    assert!(r.ratio >= 0.9 && r.ratio <= 1.0, "ratio {}", r.ratio);
    assert_rel(r.ratio, UNIT_SCALE_RATIO, 1e-9);
    assert_eq!(r.member.as_deref(), Some("one"));
}

#[test]
fn ratios_stay_under_the_trivial_envelope() {
    let family = standard_family(eighth(), 2, 7).unwrap();
    let spec = ExperimentSpec::new(eighth(), 5.0)
        .unwrap()
        .with_family(family);
    let best = max_ratio_over_family(&spec).unwrap();
    let env = best.envelope.unwrap();
    assert_rel(env, trivial_bound(5.0, eighth()), 1e-12);
    assert!(best.ratio <= env * 1.001, "{} > {}", best.ratio, env);
    assert!(best.ratio > 0.0);
}

#[test]
fn fast_route_agrees_with_the_adaptive_reference() {
    let g = DensityFunction::random_phase(3, quarter()).unwrap();
    let spec = ExperimentSpec::new(quarter(), 5.0).unwrap();
    let fast = decoupling_ratio(&spec, &g).unwrap();

    let field = evaluate_extension(
        &g,
        &Interval::unit(),
        &spec.curve,
        &spec.square,
        spec.spacing,
    )
    .unwrap();
    let reference = lp_norm(&field, spec.p, &NormMode::Plain).unwrap();
    assert_rel(fast.lhs, reference, 1e-6);
}

#[test]
fn atom_ratio_is_reproducible_and_exact_on_the_rhs() {
    let spec = ExperimentSpec::new(quarter(), 5.0).unwrap();
    let g = center_atoms(quarter());
    let r = decoupling_ratio(&spec, &g).unwrap();
    // Four unit atoms: rhs = 2 * mass(B)^{1/5} exactly.
    assert_rel(r.rhs, 2.0 * box_weight_mass(16.0).powf(0.2), 1e-12);
    assert_rel(r.ratio, ATOM_QUARTER_RATIO, FROZEN_BAND);
    assert!(r.ratio <= r.envelope.unwrap() * 1.001);
}

#[test]
fn atoms_on_child_boundaries_are_rejected() {
    let g = DensityFunction::atom_sum(vec![(0.25, 1.0), (0.6, 1.0)]).unwrap();
    let spec = ExperimentSpec::new(quarter(), 5.0).unwrap();
    assert!(decoupling_ratio(&spec, &g).is_err());
}

#[test]
fn family_max_matches_member_ratios() {
    let family = standard_family(eighth(), 1, 5).unwrap();
    let spec = ExperimentSpec::new(eighth(), 5.0)
        .unwrap()
        .with_family(family.clone());
    let best = max_ratio_over_family(&spec).unwrap();
    let mut individual = Vec::new();
    for g in &family {
        individual.push(decoupling_ratio(&spec, g).unwrap().ratio);
    }
    for (g, &r) in family.iter().zip(individual.iter()) {
        assert!(
            best.ratio >= r * (1.0 - 1e-9),
            "max {} below member {} ({})",
            best.ratio,
            r,
            g.describe()
        );
    }
    let want = individual.iter().fold(0.0_f64, |m, &r| m.max(r));
    assert_rel(best.ratio, want, 1e-9);

    let singleton = ExperimentSpec::new(eighth(), 5.0)
        .unwrap()
        .with_family(vec![DensityFunction::one()]);
    let alone = max_ratio_over_family(&singleton).unwrap();
    let direct = decoupling_ratio(&singleton, &DensityFunction::one()).unwrap();
    assert_eq!(alone.ratio, direct.ratio);

    let zero_family = ExperimentSpec::new(eighth(), 5.0)
        .unwrap()
        .with_family(vec![DensityFunction::constant(Complex64::new(0.0, 0.0))]);
    assert_eq!(max_ratio_over_family(&zero_family).unwrap().ratio, 0.0);

    let empty = ExperimentSpec::new(eighth(), 5.0).unwrap();
    assert!(max_ratio_over_family(&empty).is_err());
}

#[test]
fn unimodular_prefactors_leave_ratios_fixed() {
    let phase = Complex64::from_polar(1.0, 1.234567);
    let spec = ExperimentSpec::new(quarter(), 5.0).unwrap();
    let g = DensityFunction::random_phase(9, quarter()).unwrap();
    let base = decoupling_ratio(&spec, &g).unwrap();
    let spun = decoupling_ratio(&spec, &g.clone().scaled(phase)).unwrap();
    assert_rel(spun.ratio, base.ratio, 1e-12);

    let ga = center_atoms(quarter());
    let base_a = decoupling_ratio(&spec, &ga).unwrap();
    let spun_a = decoupling_ratio(&spec, &ga.clone().scaled(phase)).unwrap();
    assert_rel(spun_a.ratio, base_a.ratio, 1e-12);

    let i0 = Interval::new(Ratio::zero(), quarter()).unwrap();
    let i3 = Interval::new(Ratio::new(3, 4), Ratio::one()).unwrap();
    let bspec = BilinearSpec::new(quarter(), quarter(), 1, i0, i3, 5.0).unwrap();
    let bb = bilinear_ratio(&bspec, &g).unwrap();
    let bs = bilinear_ratio(&bspec, &g.scaled(phase)).unwrap();
    assert_rel(bs.ratio, bb.ratio, 1e-12);
}

#[test]
fn bilinear_tile_values_match_direct_spike_quadrature() {
    // One tile of the 4x4 lattice, constant density: the rank-one pair
    // expansion against a pointwise |E|^2 integral with the spike weight.
    let i1 = Interval::new(Ratio::zero(), quarter()).unwrap();
    let square = SquareRegion::origin(16.0).unwrap();
    let lat = TileLattice::new(&square, 4.0).unwrap();
    let g = DensityFunction::one();
    let curve = CurveSpec::parabola(1.0).unwrap();
    let lowered = vec![g.lower(&i1)];
    let vals = pair_lattice(&lowered, &curve, 5, &lat);

    let tile = 5usize; // (ix, iy) = (1, 1)
    let (cx, cy) = (lat.cx0 + lat.l, lat.cy0 + lat.l);
    let terms = curve_terms(&lowered[0], &curve, 6);
    let (xs, wx) = spike_axis(cx, lat.l, 8.0);
    let (ys, wyv) = spike_axis(cy, lat.l, 64.0);
    let mut acc = Kahan::new();
    for (&y, &wy) in ys.iter().zip(wyv.iter()) {
        let rotated: Vec<Complex64> = terms.iter().map(|(c, f)| c * e2pi(f[1] * y)).collect();
        for (&x, &wxv) in xs.iter().zip(wx.iter()) {
            let mut f = Complex64::new(0.0, 0.0);
            for ((_, fr), rot) in terms.iter().zip(rotated.iter()) {
                f += rot * e2pi(fr[0] * x);
            }
            acc.add(wxv * wy * f.norm_sqr());
        }
    }
    let direct = acc.total() / (lat.l * lat.l);
    assert_rel(vals[tile], direct, 1e-5);
}

#[test]
fn bilinear_constant_density_is_frozen() {
    let i0 = Interval::new(Ratio::zero(), quarter()).unwrap();
    let i3 = Interval::new(Ratio::new(3, 4), Ratio::one()).unwrap();
    let spec = BilinearSpec::new(eighth(), quarter(), 1, i0, i3, 5.0).unwrap();
    assert!(!spec.paper_regime());
    let r = bilinear_ratio(&spec, &DensityFunction::one()).unwrap();
    assert!(r.ratio.is_finite() && r.ratio > 0.0);
    assert_rel(r.ratio, BILINEAR_ONE_EIGHTH, FROZEN_BAND);
}

#[test]
fn bilinear_atom_density_is_frozen() {
    let i0 = Interval::new(Ratio::zero(), quarter()).unwrap();
    let i3 = Interval::new(Ratio::new(3, 4), Ratio::one()).unwrap();
    let spec = BilinearSpec::new(quarter(), quarter(), 1, i0, i3, 5.0).unwrap();
    let r = bilinear_ratio(&spec, &center_atoms(quarter())).unwrap();
    assert!(r.ratio.is_finite() && r.ratio > 0.0);
    assert_rel(r.ratio, BILINEAR_ATOMS_QUARTER, FROZEN_BAND);
}

#[test]
fn ball_single_child_residual_is_frozen_and_small() {
    let j0 = Interval::new(Ratio::zero(), eighth()).unwrap();
    let j2 = Interval::new(quarter(), Ratio::new(3, 8)).unwrap();
    let dp = SquareRegion::origin(64.0).unwrap();
    let g = DensityFunction::one();
    let r = ball_inflation_ratio(1, eighth(), 5.0, &j0, &j2, &dp, &g).unwrap();
    let normalizer = 8.0 * 8.0f64.ln().powf(2.5);
    assert_rel(r.envelope.unwrap(), normalizer, 1e-12);
    // Both sides live at the same single scale; the divided-out residual
    // sits well under 1 (the outer spike weight concentrates the right side
    // where the field peaks, while most tiles see its decay).
    assert!(r.ratio <= 1.0, "residual {}", r.ratio);
    assert_rel(r.ratio, BALL_SINGLE_RESIDUAL, FROZEN_BAND);
    assert!(r.lhs > 0.0 && r.rhs > 0.0);
}

#[test]
fn ball_residual_is_symmetric_in_the_intervals() {
    let j0 = Interval::new(Ratio::zero(), eighth()).unwrap();
    let j2 = Interval::new(quarter(), Ratio::new(3, 8)).unwrap();
    let dp = SquareRegion::origin(64.0).unwrap();
    let g = DensityFunction::random_phase(21, Ratio::new(1, 64)).unwrap();
    let fwd = ball_inflation_ratio(1, eighth(), 5.0, &j0, &j2, &dp, &g).unwrap();
    let rev = ball_inflation_ratio(1, eighth(), 5.0, &j2, &j0, &dp, &g).unwrap();
    assert_rel(rev.ratio, fwd.ratio, 1e-13);
}

#[test]
fn ball_residual_is_translation_invariant_via_modulation() {
    let j0 = Interval::new(Ratio::zero(), eighth()).unwrap();
    let j2 = Interval::new(quarter(), Ratio::new(3, 8)).unwrap();
    let g = DensityFunction::atom_sum(vec![(0.03, 1.0), (0.11, 0.7), (0.29, 1.3)]).unwrap();
    let theta = 0.37;
    let centered = SquareRegion::origin(64.0).unwrap();
    let moved = SquareRegion::new([theta, 0.0], 64.0).unwrap();
    // Translating the outer box by theta e1 is the same experiment as
    // modulating the density by e(theta xi) over the centered box.
    let a = ball_inflation_ratio(1, eighth(), 5.0, &j0, &j2, &moved, &g).unwrap();
    let b =
        ball_inflation_ratio(1, eighth(), 5.0, &j0, &j2, &centered, &g.modulated(theta)).unwrap();
    assert_rel(a.ratio, b.ratio, 1e-9);
}

#[test]
fn ball_family_sweep_matches_single_runs() {
    let j0 = Interval::new(Ratio::zero(), eighth()).unwrap();
    let j2 = Interval::new(quarter(), Ratio::new(3, 8)).unwrap();
    let dp = SquareRegion::origin(64.0).unwrap();
    let family = vec![
        DensityFunction::one(),
        DensityFunction::random_phase(4, Ratio::new(1, 64)).unwrap(),
    ];
    let batch = ball_inflation_residuals(1, eighth(), 5.0, &j0, &j2, &dp, &family).unwrap();
    for (g, got) in family.iter().zip(batch.iter()) {
        let single = ball_inflation_ratio(1, eighth(), 5.0, &j0, &j2, &dp, g).unwrap();
        assert_rel(got.ratio, single.ratio, 1e-13);
    }
}

#[test]
fn reduction_constant_is_frozen_for_the_unit_density() {
    let reports =
        reduction_consistency_check(eighth(), quarter(), 5.0, &[DensityFunction::one()]).unwrap();
    let r = &reports[0];
    assert!(r.near > 0.0 && r.lhs > 0.0);
    assert_rel(r.constant, REDUCTION_ONE_EIGHTH, FROZEN_BAND);
}

#[test]
fn reduction_suite_shares_one_constant() {
    let family = vec![
        DensityFunction::one(),
        DensityFunction::random_phase(11, eighth()).unwrap(),
        DensityFunction::random_phase(12, eighth()).unwrap(),
        center_atoms(eighth()),
    ];
    let reports = reduction_consistency_check(eighth(), quarter(), 5.0, &family).unwrap();
    let cap = REDUCTION_ONE_EIGHTH * (1.0 + FROZEN_BAND);
    for r in &reports {
        assert!(
            r.constant <= cap,
            "member {} exceeds the frozen constant: {} > {cap}",
            r.member,
            r.constant
        );
        assert!(r.constant > 0.0);
    }
}

#[test]
fn csv_rendering_is_stable() {
    let rows = vec![
        ExperimentRow {
            delta: "1/8".into(),
            p: 5.0,
            family: "one".into(),
            ratio: 1.25,
            envelope: 2.0,
        },
        ExperimentRow {
            delta: "1/4".into(),
            p: 4.5,
            family: "random \"a\"".into(),
            ratio: 0.5,
            envelope: 3.5,
        },
    ];
    let want = "delta,p,family,ratio,envelope\n\
                1/8,5,\"one\",1.25,2\n\
                1/4,4.5,\"random \"\"a\"\"\",0.5,3.5\n";
    assert_eq!(rows_to_csv(&rows), want);
}

#[test]
fn dyadic_table_covers_requested_scales() {
    let deltas = [Ratio::new(1, 2), quarter()];
    let table = dyadic_ratio_table(&deltas, 5.0, 1, 3).unwrap();
    assert_eq!(table.len(), 2);
    for (delta, ratio) in &table {
        assert!(*ratio > 0.0 && ratio.is_finite());
        assert!(*ratio <= trivial_bound(5.0, *delta) * 1.001);
    }
}

#[test]
fn experiment_config_builds_the_described_spec() {
    let json = r#"{
        "delta": "1/8",
        "p": 5.0,
        "spacing": 0.125,
        "family": {"constant": true, "random_draws": 2, "seed": 9, "atoms": true}
    }"#;
    let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
    let spec = cfg.to_spec().unwrap();
    assert_eq!(spec.delta, eighth());
    assert_eq!(spec.p, 5.0);
    assert_eq!(spec.spacing, 0.125);
    assert_eq!(spec.square.side, 64.0);
    assert_eq!(spec.family.len(), 4);

    let bad: ExperimentConfig = serde_json::from_str(r#"{"delta": "0", "p": 5.0}"#).unwrap();
    assert!(bad.to_spec().is_err());
}

#[test]
fn weighted_norm_modes_stay_available_for_reference_runs() {
    // The lab's box weight is deliberately not a WeightKind; the weighted
    // norm path must still work for the radial and product families used by
    // the weight-constant experiments.
    let g = DensityFunction::one();
    let b = SquareRegion::origin(16.0).unwrap();
    let curve = CurveSpec::parabola(1.0).unwrap();
    let field = crate::extension::evaluate_extension_extended(
        &g,
        &Interval::unit(),
        &curve,
        &b,
        0.25,
        3,
    )
    .unwrap();
    let wnorm = lp_norm(
        &field,
        5.0,
        &NormMode::Weighted {
            kind: WeightKind::product(),
            exponent_scale: 1.0,
        },
    )
    .unwrap();
    let plain = lp_norm(&field, 5.0, &NormMode::Plain).unwrap();
    // The centered weight is below 1 over most of the square, so it cannot
    // dominate the plain norm; it must still be finite and positive.
    assert!(wnorm.is_finite() && wnorm > 0.0);
    assert!(plain.is_finite() && plain > 0.0);
}

/// Derivation run for the frozen constants above: prints each value so the
/// source constants can be updated after an intentional quadrature change.
#[test]
#[ignore]
fn derive_frozen_lab_constants() {
    let spec1 = ExperimentSpec::new(Ratio::one(), 5.0).unwrap();
    let unit = decoupling_ratio(&spec1, &DensityFunction::one()).unwrap();
    println!("UNIT_SCALE_RATIO: f64 = {:e}", unit.ratio);

    let spec4 = ExperimentSpec::new(quarter(), 5.0).unwrap();
    let atom = decoupling_ratio(&spec4, &center_atoms(quarter())).unwrap();
    println!("ATOM_QUARTER_RATIO: f64 = {:e}", atom.ratio);

    let i0 = Interval::new(Ratio::zero(), quarter()).unwrap();
    let i3 = Interval::new(Ratio::new(3, 4), Ratio::one()).unwrap();
    let b8 = BilinearSpec::new(eighth(), quarter(), 1, i0, i3, 5.0).unwrap();
    let bil = bilinear_ratio(&b8, &DensityFunction::one()).unwrap();
    println!("BILINEAR_ONE_EIGHTH: f64 = {:e}", bil.ratio);

    let b4 = BilinearSpec::new(quarter(), quarter(), 1, i0, i3, 5.0).unwrap();
    let bat = bilinear_ratio(&b4, &center_atoms(quarter())).unwrap();
    println!("BILINEAR_ATOMS_QUARTER: f64 = {:e}", bat.ratio);

    let j0 = Interval::new(Ratio::zero(), eighth()).unwrap();
    let j2 = Interval::new(quarter(), Ratio::new(3, 8)).unwrap();
    let dp = SquareRegion::origin(64.0).unwrap();
    let ball = ball_inflation_ratio(1, eighth(), 5.0, &j0, &j2, &dp, &DensityFunction::one())
        .unwrap();
    println!("BALL_SINGLE_RESIDUAL: f64 = {:e}", ball.ratio);

    let red = reduction_consistency_check(eighth(), quarter(), 5.0, &[DensityFunction::one()])
        .unwrap();
    println!("REDUCTION_ONE_EIGHTH: f64 = {:e}", red[0].constant);
}

#[test]
fn family_sweep_matches_single_runs() {
    let delta = eighth();
    let family = standard_family(delta, 2, 11).unwrap();
    let spec = ExperimentSpec::new(delta, 5.0)
        .unwrap()
        .with_family(family.clone());
    let ps = [4.5, 5.0];
    let table = family_ratio_reports(&spec, &ps).unwrap();
    assert_eq!(table.len(), family.len());
    for (m, row) in table.iter().enumerate() {
        assert_eq!(row.len(), ps.len());
        for (i, &p) in ps.iter().enumerate() {
            let mut per = spec.clone();
            per.p = p;
            let single = decoupling_ratio(&per, &family[m]).unwrap();
            assert_rel(row[i].ratio, single.ratio, 1e-12);
            assert_rel(row[i].lhs, single.lhs, 1e-12);
            assert_rel(
                row[i].envelope.unwrap(),
                trivial_bound(p, delta),
                1e-15,
            );
            assert_eq!(row[i].member, single.member);
        }
    }

    assert!(family_ratio_reports(&spec, &[]).is_err());
    assert!(family_ratio_reports(&spec, &[7.0]).is_err());
    let bare = ExperimentSpec::new(delta, 5.0).unwrap();
    assert!(family_ratio_reports(&bare, &ps).is_err());
}
