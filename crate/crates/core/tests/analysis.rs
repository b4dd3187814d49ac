use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slipflow::analysis::{
    bogovskii_battery, bogovskii_solve, decay_profile, embedding_bound, embedding_ratio, growth_profile, korn_constant,
    mean_free, poincare_constant, unit_slab_layout, uniqueness_probe, DecayVerdict, ProbeStart, ProbeVerdict,
    SaintVenantVerdict,
};
use slipflow::carrier::{default_cutoffs, CarrierField, CarrierParams};
use slipflow::discretization::{build_spaces, EndCondition, SpaceOptions};
use slipflow::error::Error;
use slipflow::fields::{FnScalar, FnVector, StreamField, VectorSample};
use slipflow::geometry::{build_mesh, ChannelGeometry};
use slipflow::solver::{picard_solve, Problem, SolveOptions};

fn straight() -> ChannelGeometry {
    ChannelGeometry::straight(0.0)
}

fn bump(a: f64) -> ChannelGeometry {
    ChannelGeometry::bump(a, 1.5, 2.0 * (1.0 + a.min(0.0))).unwrap()
}

fn m1(geom: &ChannelGeometry, t: f64, h: f64) -> f64 {
    m1_with(geom, t, h, EndCondition::Free)
}

fn m1_with(geom: &ChannelGeometry, t: f64, h: f64, ends: EndCondition) -> f64 {
    poincare_constant(Arc::new(build_mesh(geom, t, h).unwrap()), ends).unwrap().m1
}

fn korn(geom: &ChannelGeometry, t: f64, h: f64) -> f64 {
    let mesh = Arc::new(build_mesh(geom, t, h).unwrap());
    korn_constant(&build_spaces(mesh, SpaceOptions::default()).unwrap()).unwrap().korn_c
}

#[test]
fn poincare_constant_dominates_the_trial_field() {
    // v = (0, sin(π(x2+1)/2)) is admissible with ‖v‖/‖∇v‖ = 2/π
    let coarse = m1(&straight(), 3.0, 0.25);
    assert!(coarse >= 2.0 / PI - 1e-3, "{coarse}");
    let fine = m1(&straight(), 3.0, 0.125);
    assert!((fine - coarse).abs() <= 0.01 * fine, "{coarse} vs {fine}");
}

#[test]
fn poincare_constant_grows_with_the_channel() {
    // clamped fields extend by zero, so the short space nests in the long one
    let short = m1_with(&bump(0.2), 3.0, 0.25, EndCondition::Clamped);
    let long = m1_with(&bump(0.2), 5.0, 0.25, EndCondition::Clamped);
    assert!(long >= short * (1.0 - 1e-9), "{short} vs {long}");
}

#[test]
fn korn_constant_is_at_most_two_and_falls_with_the_amplitude() {
    let values: Vec<f64> = [0.1, 0.2, 0.3].iter().map(|&a| korn(&bump(a), 4.0, 0.25)).collect();
    for k in &values {
        assert!(*k > 0.0 && *k <= 1.0 + 1e-9, "{values:?}");
    }
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    let flat = korn(&straight(), 3.0, 0.5);
    assert!(flat <= 2.0 && (flat - 1.0).abs() <= 1e-6, "{flat}");
}

#[test]
fn embedding_ratio_matches_the_trial_field_and_ignores_scale() {
    let trial = FnVector(|x: [f64; 2]| {
        let (s, c) = (0.5 * PI * (x[1] + 1.0)).sin_cos();
        VectorSample { value: [0.0, s], grad: [[0.0, 0.0], [0.0, 0.5 * PI * c]] }
    });
    // ∫ sin⁴ = 3/4 per unit length, ∫ |∇v|² = π²/4 per unit length
    let (a, b): (f64, f64) = (0.5, 4.5);
    let exact = (0.75 * (b - a)).powf(0.25) / (0.5 * PI * (b - a).sqrt());
    let r = embedding_ratio(&straight(), &trial, a, b, &[]).unwrap();
    assert!((r - exact).abs() <= 1e-6 * exact, "{r} vs {exact}");

    let geom = bump(0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let v = StreamField::random(&geom, -2.0, 2.0, &mut rng);
    let (lo, hi) = v.support();
    let one = embedding_ratio(&geom, &v, lo, hi, &v.breakpoints()).unwrap();
    let two = embedding_ratio(&geom, &v.scaled(2.0), lo, hi, &v.breakpoints()).unwrap();
    assert!((one - two).abs() <= 1e-12 * one);
}

#[test]
fn embedding_bound_does_not_drop_on_a_longer_window() {
    let geom = bump(0.2);
    let short = embedding_bound(&geom, -1.0, 1.0, 6, 4).unwrap().m4;
    let long = embedding_bound(&geom, -2.0, 2.0, 6, 4).unwrap().m4;
    assert!(long >= short, "{short} vs {long}");
    assert!(matches!(embedding_bound(&geom, -1.0, 1.0, 0, 4), Err(Error::DegenerateInput(_))));
}

#[test]
fn bogovskii_solve_handles_the_reference_inputs() {
    let geom = bump(0.2);
    let layout = unit_slab_layout(&geom, 0.0, 0.125).unwrap();
    let zero = bogovskii_solve(&layout, &FnScalar(|_: [f64; 2]| (0.0, [0.0, 0.0]))).unwrap();
    assert!(zero.velocity.iter().all(|x| *x == 0.0));
    assert_eq!(zero.ratio, 0.0);

    let (name, odd) = bogovskii_battery(0.0).into_iter().next().unwrap();
    assert_eq!(name, "odd_bump");
    let sol = bogovskii_solve(&layout, &mean_free(&layout, odd)).unwrap();
    assert!(sol.residual <= 1e-8, "{}", sol.residual);
    assert!(sol.ratio > 0.0);

    // constant with ∫ f = 0.1 over the slab
    let c = 0.1 / layout.mesh.area();
    let biased = FnScalar(move |_: [f64; 2]| (c, [0.0, 0.0]));
    assert!(matches!(bogovskii_solve(&layout, &biased), Err(Error::Precondition(_))));
}

fn zero_flux_bundle_problem() -> Problem {
    let geom = bump(0.2);
    let h = 0.5;
    let cut = default_cutoffs(&geom, h).cutoffs;
    let mesh = Arc::new(build_mesh(&geom, 10.0, h).unwrap());
    let carrier = CarrierField::new(CarrierParams::new(geom, 0.0, cut.epsilon, cut.dist)).unwrap();
    Problem::new(mesh, carrier).unwrap()
}

#[test]
fn zero_flux_diagnostics_are_trivial() {
    let p = zero_flux_bundle_problem();
    let b = picard_solve(&p, &SolveOptions::default(), None).unwrap();
    let lo = 2.0 * b.carrier.dist() + 1.0;
    let grid: Vec<f64> = (0..4).map(|k| lo + k as f64 * (9.0 - lo) / 3.0).collect();
    let decay = decay_profile(&b, &grid).unwrap();
    assert_eq!(decay.verdict, DecayVerdict::ExactZero);
    assert!(decay.y_plus.iter().chain(&decay.y_minus).all(|y| *y == 0.0));
    assert!(decay.fit.is_none() && decay.c4_empirical.is_none());

    let growth = growth_profile(&b, &[1.0, 2.0, 5.0, 10.0]).unwrap();
    assert!(growth.rows.iter().all(|r| r.cumulative_grad == 0.0 && r.slab_h1 == 0.0));
    assert_eq!(growth.c6, 0.0);

    assert!(decay_profile(&b, &[lo - 0.5, lo + 1.0]).is_err());
}

#[test]
fn zero_flux_probe_coincides_on_the_trivial_branch() {
    let p = zero_flux_bundle_problem();
    let starts = [ProbeStart::Zero, ProbeStart::ScaledCarrier(0.5), ProbeStart::Random { seed: 3, relative: 0.5 }];
    let report = uniqueness_probe(&p, &starts, &SolveOptions::default()).unwrap();
    assert_eq!(report.verdict, ProbeVerdict::Coincide);
    for (i, row) in report.distances.iter().enumerate() {
        for (j, d) in row.iter().enumerate() {
            assert_eq!(*d, report.distances[j][i]);
            assert!(*d >= 0.0);
        }
    }
    assert_eq!(report.saint_venant.unwrap().verdict, SaintVenantVerdict::Trivial);
}
