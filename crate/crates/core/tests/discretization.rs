use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slipflow::carrier::{CarrierField, CarrierParams};
use slipflow::discretization::{
    assemble, body_force_load, build_spaces, column_fluxes, evaluate_norms, integrate_cells, p2_gradients, p2_values,
    pressure_mass, solve_saddle, station_flux, Advector, CarrierQuadrature, EndCondition, FieldSource, Form,
    FunctionSpaceLayout, SpaceOptions,
};
use slipflow::fields::{FnVector, VectorSample};
use slipflow::geometry::{build_mesh, ChannelGeometry};

fn layout(geom: &ChannelGeometry, t: f64, h: f64, ends: EndCondition) -> FunctionSpaceLayout {
    let mesh = Arc::new(build_mesh(geom, t, h).unwrap());
    build_spaces(mesh, SpaceOptions { ends, ..SpaceOptions::default() }).unwrap()
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn bump() -> ChannelGeometry {
    ChannelGeometry::bump(0.2, 1.5, 2.0).unwrap()
}

#[test]
fn strain_splits_into_gradient_and_divergence_on_straight_walls() {
    // 2‖D(v)‖² = ‖∇v‖² + ‖div v‖² for v tangent to flat walls and clamped at the ends
    let lay = layout(&ChannelGeometry::straight(0.0), 3.0, 0.5, EndCondition::Clamped);
    let viscous = assemble(&lay, Form::Viscous).unwrap();
    let gradient = assemble(&lay, Form::Gradient).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let v = random_vector(lay.velocity_dofs, &mut rng);
        let [div2] = integrate_cells(&lay, FieldSource::Discrete(&v), None, |s, _| [(s.grad[0][0] + s.grad[1][1]).powi(2)]).unwrap();
        let lhs = viscous.bilinear(&v, &v);
        let rhs = gradient.bilinear(&v, &v) + div2;
        assert!((lhs - rhs).abs() <= 1e-10 * lhs, "{lhs} vs {rhs}");
    }
}

#[test]
fn saddle_pressure_has_zero_mean() {
    let lay = layout(&bump(), 4.0, 0.5, EndCondition::Clamped);
    let a = assemble(&lay, Form::Viscous).unwrap();
    let d = assemble(&lay, Form::Divergence).unwrap();
    let force = FnVector(|x: [f64; 2]| VectorSample { value: [x[1], x[0] * x[1]], grad: [[0.0; 2]; 2] });
    let f = body_force_load(&lay, &force);
    let sol = solve_saddle(&lay, &a, &d, &f).unwrap();
    let m = pressure_mass(&lay);
    let mean: f64 = m.iter().zip(&sol.pressure).map(|(a, b)| a * b).sum();
    let size = sol.pressure.iter().map(|p| p.abs()).fold(0.0, f64::max);
    assert!(size > 0.0);
    assert!(mean.abs() <= 1e-12 * size, "{mean}");
    let div = d.matvec(&sol.velocity);
    assert!(div.iter().all(|q| q.abs() <= 1e-12), "discrete divergence");
}

#[test]
fn uniform_flow_has_no_strain_and_carries_its_flux() {
    let flux = 0.7;
    let lay = layout(&ChannelGeometry::straight(0.0), 3.0, 0.5, EndCondition::Free);
    let u = FnVector(move |_: [f64; 2]| VectorSample { value: [0.5 * flux, 0.0], grad: [[0.0; 2]; 2] });
    let v = lay.interpolate(&u);
    let table = evaluate_norms(&lay, FieldSource::Discrete(&v), None, &[-2.9, -0.3, 0.0, 1.7]).unwrap();
    assert!(table.strain <= 1e-13 && table.divergence <= 1e-13);
    assert!((table.area - 12.0).abs() <= 1e-12);
    for (x, q) in &table.fluxes {
        assert!((q - flux).abs() <= 1e-13, "station {x}: {q}");
    }
    for (_, q) in column_fluxes(&lay, &v).unwrap() {
        assert!((q - flux).abs() <= 1e-13);
    }
    let analytic = evaluate_norms(&lay, FieldSource::Analytic(&u), None, &[0.5]).unwrap();
    assert_eq!(analytic.strain, 0.0);
    assert!((analytic.fluxes[0].1 - flux).abs() <= 1e-13);
}

#[test]
fn carrier_convection_is_skew_on_a_straight_channel() {
    // ∫(g·∇v)·w = −∫(g·∇w)·v for div g = 0 and g·n = 0
    let geom = ChannelGeometry::straight(1.5);
    let lay = layout(&geom, 6.0, 0.5, EndCondition::Clamped);
    let carrier = CarrierField::new(CarrierParams::new(geom, 1.0, 0.3, 3.0)).unwrap();
    let cq = CarrierQuadrature::new(&lay, &carrier);
    let c = assemble(&lay, Form::Convection(Advector::Carrier(&cq))).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v = random_vector(lay.velocity_dofs, &mut rng);
    let w = random_vector(lay.velocity_dofs, &mut rng);
    let scale = c.bilinear(&v, &w).abs().max(c.bilinear(&w, &v).abs());
    assert!(scale > 0.0);
    let defect = (c.bilinear(&v, &w) + c.bilinear(&w, &v)).abs();
    assert!(defect <= 1e-8 * scale, "{defect} vs {scale}");
}

#[test]
fn carrier_flux_adds_to_discrete_flux() {
    let geom = bump();
    let lay = layout(&geom, 6.0, 0.25, EndCondition::Clamped);
    let carrier = CarrierField::new(CarrierParams::new(geom, 0.8, 0.45, 3.0)).unwrap();
    let zero = vec![0.0; lay.velocity_dofs];
    for x in [-5.5, -1.0, 0.0, 0.6, 4.2] {
        let q = station_flux(&lay, FieldSource::CarrierPlus(&carrier, &zero), x).unwrap();
        assert!((q - 0.8).abs() <= 1e-10, "station {x}: {q}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quadratic_shapes_partition_unity(a in 0.0..1.0f64, b in 0.0..1.0f64) {
        prop_assume!(a + b <= 1.0);
        let l = [a, b, 1.0 - a - b];
        let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        let n = p2_values(l);
        let dn = p2_gradients(l, &dl);
        prop_assert!((n.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
        for j in 0..2 {
            prop_assert!(dn.iter().map(|g| g[j]).sum::<f64>().abs() <= 1e-13);
        }
    }

    #[test]
    fn forms_are_symmetric_and_semidefinite(seed in 0u64..1000, free in any::<bool>()) {
        let ends = if free { EndCondition::Free } else { EndCondition::Clamped };
        let lay = layout(&bump(), 2.5, 0.5, ends);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_vector(lay.velocity_dofs, &mut rng);
        for form in [Form::Mass, Form::Gradient, Form::Viscous] {
            let op = assemble(&lay, form).unwrap();
            prop_assert!(op.symmetry_defect() <= 1e-13 * op.max_abs());
            prop_assert!(op.bilinear(&v, &v) >= 0.0);
        }
        let viscous = assemble(&lay, Form::Viscous).unwrap();
        let [strain] = integrate_cells(&lay, FieldSource::Discrete(&v), None, |s, _| {
            let off = 0.5 * (s.grad[0][1] + s.grad[1][0]);
            [2.0 * (s.grad[0][0].powi(2) + 2.0 * off * off + s.grad[1][1].powi(2))]
        }).unwrap();
        let e = viscous.bilinear(&v, &v);
        prop_assert!((e - strain).abs() <= 1e-10 * e);
    }
}
