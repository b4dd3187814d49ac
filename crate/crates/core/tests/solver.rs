use std::sync::Arc;

use slipflow::analysis::{korn_constant, poincare_constant};
use slipflow::carrier::{default_cutoffs, CarrierField, CarrierParams};
use slipflow::discretization::{integrate_cells, EndCondition, FieldSource, MixedField};
use slipflow::geometry::{build_mesh, ChannelGeometry};
use slipflow::solver::{picard_solve, reconstruct_u, Problem, SolveOptions};

fn problem(geom: ChannelGeometry, t: f64, h: f64, flux: f64) -> Problem {
    let cut = default_cutoffs(&geom, h).cutoffs;
    let mesh = Arc::new(build_mesh(&geom, t, h).unwrap());
    let carrier = CarrierField::new(CarrierParams::new(geom, flux, cut.epsilon, cut.dist)).unwrap();
    Problem::new(mesh, carrier).unwrap()
}

fn bump() -> ChannelGeometry {
    ChannelGeometry::bump(0.2, 1.5, 2.0).unwrap()
}

#[test]
fn zero_flux_converges_at_once_to_zero() {
    let p = problem(bump(), 6.0, 0.5, 0.0);
    let b = picard_solve(&p, &SolveOptions::default(), None).unwrap();
    assert_eq!(b.iterations(), 1);
    assert!(b.perturbation.velocity.iter().chain(&b.perturbation.pressure).all(|x| *x == 0.0));
    let u = reconstruct_u(&b).unwrap();
    let table = u.norms(None, &[0.0, 2.0]).unwrap();
    assert_eq!((table.l2, table.h1_semi), (0.0, 0.0));
    assert!(table.fluxes.iter().all(|(_, q)| *q == 0.0));
}

#[test]
fn doubling_the_load_doubles_the_linearized_solution() {
    let mut p = problem(bump(), 6.0, 0.5, 1.0);
    let once = p.solve_linearized(None).unwrap();
    let norm = p.load_norm().unwrap();
    assert!(norm > 0.0);
    assert_eq!(p.weak_residual(&MixedField::zeros(&p.layout)).unwrap(), norm);
    p.load.iter_mut().for_each(|x| *x *= 2.0);
    let twice = p.solve_linearized(None).unwrap();
    let size = p.h1_norm(&once.velocity);
    let diff: Vec<f64> = twice.velocity.iter().zip(&once.velocity).map(|(a, b)| a - 2.0 * b).collect();
    assert!(p.h1_norm(&diff) <= 1e-10 * size);
    let doubled = p.dual_norm(&p.load).unwrap();
    assert!((doubled - 2.0 * norm).abs() <= 1e-12 * norm);
}

#[test]
fn apriori_bound_holds_at_unit_flux() {
    let geom = bump();
    let (t, h) = (6.0, 0.25);
    let p = problem(geom.clone(), t, h, 1.0);
    let b = picard_solve(&p, &SolveOptions::default(), None).unwrap();
    let m1 = poincare_constant(Arc::new(build_mesh(&geom, t, h).unwrap()), EndCondition::Free).unwrap().m1;
    let korn = korn_constant(&p.layout).unwrap().korn_c;
    let bound = 2.0 * (1.0 + m1 * m1) / korn;
    assert!(b.apriori_quotient() <= bound, "{} vs {bound}", b.apriori_quotient());
    assert!(b.residual <= 10.0 * 1e-9 * b.load_norm);
}

#[test]
fn straight_channel_iteration_contracts() {
    let p = problem(ChannelGeometry::straight(0.0), 8.0, 0.25, 0.5);
    let b = picard_solve(&p, &SolveOptions::default(), None).unwrap();
    assert!(b.iterations() >= 3);
    let ratio = b.contraction_estimate();
    assert!(ratio > 0.0 && ratio < 1.0, "{ratio}");
    assert!(b.history.windows(2).all(|w| w[1].increment < w[0].increment));
    assert!(b.history.iter().all(|r| r.flux_leak <= 1e-8));
}

#[test]
fn converged_fields_carry_the_flux_and_equal_the_perturbation_far_away() {
    let flux = 0.5;
    let p = problem(bump(), 8.0, 0.25, flux);
    let b = picard_solve(&p, &SolveOptions::default(), None).unwrap();
    let u = reconstruct_u(&b).unwrap();
    let stations: Vec<f64> = (0..10).map(|k| -7.6 + 15.2 * k as f64 / 9.0).collect();
    for (x, q) in u.station_fluxes(&stations).unwrap() {
        assert!((q - flux).abs() <= 1e-8 * flux, "station {x}: {q}");
    }
    // the carrier is tangent to the exact walls, the discrete field to the
    // chords; the two directions differ by O(h) times the wall curvature
    assert!(u.wall_normal_defect() <= 0.05, "{}", u.wall_normal_defect());

    // beyond the transition g = U, so u − U and v agree pointwise
    let start = b.carrier.far_field_start();
    let far = b.carrier.far_field();
    for x in [[start + 0.3, 0.2], [-start - 1.1, -0.7], [7.9, 0.95]] {
        let v = u.perturbation_at(x).unwrap();
        let g = b.carrier.eval_unchecked(x);
        assert_eq!(g.g, far);
        assert_eq!(g.grad, [[0.0; 2]; 2]);
        assert!(v.value.iter().all(|c| c.is_finite()));
    }
    let (l2, grad) = u.far_field_deviation(start).unwrap();
    let mut v_parts = [0.0; 2];
    for w in [(-8.0, -start), (start, 8.0)] {
        let [a, c] = integrate_cells(&b.layout, FieldSource::Discrete(&b.perturbation.velocity), Some(w), |s, _| {
            let g = s.grad;
            [s.value[0].powi(2) + s.value[1].powi(2), g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2)]
        })
        .unwrap();
        v_parts[0] += a;
        v_parts[1] += c;
    }
    assert!((l2 - v_parts[0].sqrt()).abs() <= 1e-12 * l2.max(1e-300));
    assert!((grad - v_parts[1].sqrt()).abs() <= 1e-12 * grad.max(1e-300));
}

#[test]
fn nonconvergence_is_reported_with_the_increments() {
    let p = problem(bump(), 6.0, 0.5, 0.5);
    let opts = SolveOptions { max_iters: 2, ..SolveOptions::default() };
    match picard_solve(&p, &opts, None) {
        Err(slipflow::Error::NonConvergence { iterations, increments }) => {
            assert_eq!(iterations, 2);
            assert_eq!(increments.len(), 2);
        }
        other => panic!("expected nonconvergence, got {other:?}"),
    }
}

#[test]
fn flat_walls_see_no_normal_velocity() {
    let p = problem(ChannelGeometry::straight(0.0), 6.0, 0.5, 0.5);
    let b = picard_solve(&p, &SolveOptions::default(), None).unwrap();
    assert!(reconstruct_u(&b).unwrap().wall_normal_defect() <= 1e-12);
}
