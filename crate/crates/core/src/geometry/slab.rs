use super::TruncatedMesh;
use crate::error::{Error, Result};
use crate::quadrature::{triangle_points, PlainRule};

/// Cells of a mesh whose centroids fall inside `a < x1 < b`.
#[derive(Clone, Debug)]
pub struct SlabSelection {
    pub a: f64,
    pub b: f64,
    pub cells: Vec<usize>,
}

pub fn slab_submesh(mesh: &TruncatedMesh, a: f64, b: f64) -> Result<SlabSelection> {
    if !(a < b) {
        return Err(Error::InvalidInterval { a, b });
    }
    let tol = 1e-12 * (1.0 + mesh.x_max.abs().max(mesh.x_min.abs()));
    if a < mesh.x_min - tol || b > mesh.x_max + tol {
        return Err(Error::Domain(format!(
            "slab ({a}, {b}) exceeds the mesh range ({}, {})",
            mesh.x_min, mesh.x_max
        )));
    }
    let cells = (0..mesh.cells.len())
        .filter(|&c| {
            let p = mesh.cell_points(c);
            let x = (p[0][0] + p[1][0] + p[2][0]) / 3.0;
            a < x && x < b
        })
        .collect();
    Ok(SlabSelection { a, b, cells })
}

impl SlabSelection {
    /// Area of the selected cells (differs from the slab area by O(h)).
    pub fn selected_area(&self, mesh: &TruncatedMesh) -> f64 {
        self.cells.iter().map(|&c| mesh.cell_area(c)).sum()
    }

    /// Area of the mesh cut exactly at `x1 = a` and `x1 = b`.
    pub fn exact_area(&self, mesh: &TruncatedMesh) -> f64 {
        let mut pts = Vec::new();
        for c in mesh.column_of(self.a)..=mesh.column_of(self.b) {
            for cell in mesh.column_cells(c) {
                triangle_points(mesh.cell_points(cell), (self.a, self.b), &[], 1, &PlainRule::new(1), &mut pts);
            }
        }
        pts.iter().map(|p| p.w).sum()
    }
}

/// Splits `[a, b]` into consecutive slabs of equal width in `[1/2, 1]`.
///
/// Intervals shorter than 1/2 are returned whole.
pub fn unit_slabs(a: f64, b: f64) -> Result<Vec<(f64, f64)>> {
    if !(a < b) {
        return Err(Error::InvalidInterval { a, b });
    }
    let n = (b - a).ceil().max(1.0) as usize;
    let w = (b - a) / n as f64;
    Ok((0..n)
        .map(|k| (a + w * k as f64, if k + 1 == n { b } else { a + w * (k + 1) as f64 }))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, ChannelGeometry};

    #[test]
    fn exact_cut_slab_area() {
        let g = ChannelGeometry::straight(3.0);
        let m = build_mesh(&g, 6.0, 0.3).unwrap();
        let s = slab_submesh(&m, 4.0, 5.0).unwrap();
        assert!((s.exact_area(&m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn halves_add_up() {
        let g = ChannelGeometry::bump(0.2, 3.0, 1.0).unwrap();
        let m = build_mesh(&g, 6.0, 0.25).unwrap();
        let t = m.half_length();
        let left = slab_submesh(&m, -t, 0.0).unwrap().exact_area(&m);
        let right = slab_submesh(&m, 0.0, t).unwrap().exact_area(&m);
        assert!((left + right - m.area()).abs() < 1e-12);
    }

    #[test]
    fn reversed_interval_rejected() {
        let g = ChannelGeometry::straight(3.0);
        let m = build_mesh(&g, 6.0, 0.5).unwrap();
        assert!(matches!(slab_submesh(&m, 3.0, 2.0), Err(Error::InvalidInterval { .. })));
    }

    #[test]
    fn splitter_widths() {
        for (a, b) in [(0.0, 1.0), (-2.0, 5.3), (1.0, 2.7), (0.0, 17.01)] {
            let s = unit_slabs(a, b).unwrap();
            assert_eq!(s.first().unwrap().0, a);
            assert_eq!(s.last().unwrap().1, b);
            for w in s.windows(2) {
                assert_eq!(w[0].1, w[1].0);
            }
            for &(lo, hi) in &s {
                assert!(hi - lo >= 0.5 - 1e-12 && hi - lo <= 1.0 + 1e-12);
            }
        }
    }
}
