use proptest::prelude::*;
use slipflow::error::Error;
use slipflow::geometry::{build_mesh, build_slab_mesh, slab_submesh, BoundaryTag, ChannelGeometry};

fn bump(a: f64, l: f64) -> ChannelGeometry {
    ChannelGeometry::bump(a, l, 2.0 * (1.0 + a.min(0.0))).unwrap()
}

#[test]
fn standard_bump_examples() {
    let g = bump(0.2, 3.0);
    let far = g.eval_walls(5.0);
    assert_eq!([far.f1, far.f2, far.df1, far.df2, far.ddf1, far.ddf2], [-1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    assert!((g.eval_walls(0.0).f2 - 1.2).abs() <= 1e-15);
    for x in [-3.0, 3.0] {
        assert_eq!(g.eval_walls(x).df2, 0.0);
    }
}

#[test]
fn straight_mesh_wall_nodes_have_vertical_normals() {
    let mesh = build_mesh(&ChannelGeometry::straight(0.0), 5.0, 0.5).unwrap();
    for &(e, tag) in &mesh.boundary {
        let [a, b] = mesh.edges[e];
        let (p, q) = (mesh.nodes[a], mesh.nodes[b]);
        match tag {
            BoundaryTag::WallUpper => assert!(p[1] == 1.0 && q[1] == 1.0),
            BoundaryTag::WallLower => assert!(p[1] == -1.0 && q[1] == -1.0),
            _ => assert!(p[0] == q[0] && p[0].abs() == 5.0),
        }
    }
}

#[test]
fn bump_mesh_nodes_lie_in_the_closure() {
    let g = bump(0.2, 3.0);
    let mesh = build_mesh(&g, 6.0, 0.25).unwrap();
    let worst = mesh
        .nodes
        .iter()
        .map(|&[x1, x2]| {
            let w = g.eval_walls(x1);
            (x2 - x2.clamp(w.f1, w.f2)).abs()
        })
        .fold(0.0, f64::max);
    assert_eq!(worst, 0.0);
}

#[test]
fn slab_examples() {
    let mesh = build_mesh(&bump(0.2, 1.5), 6.0, 0.25).unwrap();
    let s = slab_submesh(&mesh, 3.3, 4.3).unwrap();
    assert!((s.exact_area(&mesh) - 2.0).abs() <= 1e-12);
    assert!(matches!(slab_submesh(&mesh, 3.0, 2.0), Err(Error::InvalidInterval { .. })));
}

/// Trapezoid rule of the exact width over the mesh columns: the area enclosed
/// by the wall chords.
fn chord_area(g: &ChannelGeometry, columns: &[f64]) -> f64 {
    columns.windows(2).map(|c| 0.5 * (c[1] - c[0]) * (g.eval_walls(c[0]).width() + g.eval_walls(c[1]).width())).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn walls_are_symmetric_flat_outside_and_bounded(a in -0.4..0.4f64, l in 0.5..4.0f64, s in -3.0..3.0f64) {
        let g = bump(a, l);
        let x1 = s * l;
        let w = g.eval_walls(x1);
        prop_assert_eq!(w.f1, -w.f2);
        prop_assert_eq!(w.df1, -w.df2);
        prop_assert!(w.width() >= g.narrowest_width() - 1e-15);
        prop_assert!(w.width() <= g.widest() + 1e-15);
        if x1.abs() >= l {
            prop_assert_eq!((w.f2, w.df2, w.ddf2), (1.0, 0.0, 0.0));
        }
        prop_assert!(w.ddf2.abs() <= g.max_curvature() * (1.0 + 1e-12));
    }

    #[test]
    fn meshes_are_oriented_disks_enclosing_the_chord_area(
        a in -0.3..0.3f64, l in 0.5..2.0f64, extra in 1.0..3.0f64, k in 0..3usize,
    ) {
        let g = bump(a, l);
        let h = [0.5, 0.35, 0.25][k];
        let t = l + extra;
        let mesh = build_mesh(&g, t, h).unwrap();
        prop_assert_eq!(mesh.euler_characteristic(), 1);
        prop_assert!((0..mesh.cells.len()).all(|c| mesh.cell_area(c) > 0.0));
        let expected = chord_area(&g, &mesh.columns);
        prop_assert!((mesh.area() - expected).abs() <= 1e-12 * expected);
        for tag in [BoundaryTag::WallUpper, BoundaryTag::WallLower, BoundaryTag::EndLeft, BoundaryTag::EndRight] {
            prop_assert!(mesh.has_tag(tag));
        }
    }

    #[test]
    fn exact_slab_areas_are_additive(a in -0.3..0.3f64, cut in -0.9..0.9f64) {
        let g = bump(a, 1.5);
        let mesh = build_slab_mesh(&g, -3.0, 3.0, 0.25).unwrap();
        let c = 3.0 * cut;
        let left = slab_submesh(&mesh, -3.0, c).unwrap().exact_area(&mesh);
        let right = slab_submesh(&mesh, c, 3.0).unwrap().exact_area(&mesh);
        prop_assert!((left + right - mesh.area()).abs() <= 1e-12 * mesh.area());
    }

    #[test]
    fn straight_unit_slabs_have_area_two(t in -3.0..4.0f64) {
        let mesh = build_mesh(&ChannelGeometry::straight(0.0), 5.0, 0.3).unwrap();
        let s = slab_submesh(&mesh, t - 1.0, t).unwrap();
        prop_assert!((s.exact_area(&mesh) - 2.0).abs() <= 1e-12);
    }
}
