use std::collections::HashMap;

use super::ChannelGeometry;
use crate::error::{Error, Result};

/// Default lower bound on the cell quality `4√3·area / Σ edge²`.
pub const DEFAULT_QUALITY_FLOOR: f64 = 0.1;

/// Label of a boundary edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    WallLower,
    WallUpper,
    EndLeft,
    EndRight,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::WallLower => "wall_lower",
            BoundaryTag::WallUpper => "wall_upper",
            BoundaryTag::EndLeft => "end_left",
            BoundaryTag::EndRight => "end_right",
        }
    }

    pub fn code(self) -> i32 {
        match self {
            BoundaryTag::WallLower => 1,
            BoundaryTag::WallUpper => 2,
            BoundaryTag::EndLeft => 3,
            BoundaryTag::EndRight => 4,
        }
    }

    pub fn is_wall(self) -> bool {
        matches!(self, BoundaryTag::WallLower | BoundaryTag::WallUpper)
    }
}

/// Structured triangulation of `Ω_{x_min, x_max}`.
///
/// Nodes sit on vertical lines `x1 = columns[i]`; node `(i, j)` is placed at
/// reference height `s_j = -1 + 2j/ny` through the transfinite map
/// `x2 = f1 + (s + 1)(f2 - f1)/2`. Every quad is split along the diagonal
/// from `(i, j)` to `(i + 1, j + 1)`, so all triangles are counterclockwise
/// and the edges fall into three direction families.
#[derive(Clone, Debug)]
pub struct TruncatedMesh {
    pub geometry: ChannelGeometry,
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub columns: Vec<f64>,
    pub nodes: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    /// Vertex pairs with `edges[e][0] < edges[e][1]`.
    pub edges: Vec<[usize; 2]>,
    /// Local edge `k` of a cell joins local vertices `k` and `(k + 1) % 3`.
    pub cell_edges: Vec<[usize; 3]>,
    pub boundary: Vec<(usize, BoundaryTag)>,
}

/// Mesh of the symmetric truncation `Ω_T`.
pub fn build_mesh(geom: &ChannelGeometry, t: f64, h: f64) -> Result<TruncatedMesh> {
    let required = geom.straight_from + 1.0;
    if !(t >= required) {
        return Err(Error::DomainTooShort { t, required });
    }
    build_slab_mesh(geom, -t, t, h)
}

/// Mesh of an arbitrary slab `Ω_{a,b}`; the end sections carry the end tags.
pub fn build_slab_mesh(geom: &ChannelGeometry, a: f64, b: f64, h: f64) -> Result<TruncatedMesh> {
    if !(a < b) {
        return Err(Error::InvalidInterval { a, b });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("mesh size h = {h} must be positive")));
    }
    geom.validate()?;
    let nx = ((b - a) / h).ceil().max(1.0) as usize;
    let ny = (geom.widest() / h).ceil().max(2.0) as usize;
    let columns: Vec<f64> = (0..=nx)
        .map(|i| if i == nx { b } else { a + (b - a) * i as f64 / nx as f64 })
        .collect();

    let id = |i: usize, j: usize| i * (ny + 1) + j;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for &x1 in &columns {
        let w = geom.eval_walls(x1);
        if w.width() < geom.min_width {
            return Err(Error::Geometry(format!(
                "width {} at x1 = {x1} is below m = {}",
                w.width(),
                geom.min_width
            )));
        }
        for j in 0..=ny {
            let x2 = if j == 0 {
                w.f1
            } else if j == ny {
                w.f2
            } else {
                let s = -1.0 + 2.0 * j as f64 / ny as f64;
                w.f1 + 0.5 * (s + 1.0) * w.width()
            };
            nodes.push([x1, x2]);
        }
    }

    let mut cells = Vec::with_capacity(2 * nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }

    let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut edge_cells: Vec<u8> = Vec::new();
    let mut cell_edges = Vec::with_capacity(cells.len());
    for c in &cells {
        let mut ce = [0usize; 3];
        for k in 0..3 {
            let (p, q) = (c[k], c[(k + 1) % 3]);
            let key = [p.min(q), p.max(q)];
            let e = *edge_index.entry(key).or_insert_with(|| {
                edges.push(key);
                edge_cells.push(0);
                edges.len() - 1
            });
            edge_cells[e] += 1;
            ce[k] = e;
        }
        cell_edges.push(ce);
    }

    let grid = |v: usize| (v / (ny + 1), v % (ny + 1));
    let mut boundary = Vec::new();
    for (e, &[p, q]) in edges.iter().enumerate() {
        if edge_cells[e] != 1 {
            continue;
        }
        let ((ip, jp), (iq, jq)) = (grid(p), grid(q));
        let tag = if jp == 0 && jq == 0 {
            BoundaryTag::WallLower
        } else if jp == ny && jq == ny {
            BoundaryTag::WallUpper
        } else if ip == 0 && iq == 0 {
            BoundaryTag::EndLeft
        } else if ip == nx && iq == nx {
            BoundaryTag::EndRight
        } else {
            return Err(Error::Geometry(format!("untagged boundary edge {e}")));
        };
        boundary.push((e, tag));
    }

    let mesh = TruncatedMesh {
        geometry: geom.clone(),
        x_min: a,
        x_max: b,
        h,
        nx,
        ny,
        columns,
        nodes,
        cells,
        edges,
        cell_edges,
        boundary,
    };
    let q = mesh.min_quality();
    if q < DEFAULT_QUALITY_FLOOR {
        return Err(Error::Geometry(format!(
            "cell quality {q} below the floor {DEFAULT_QUALITY_FLOOR}"
        )));
    }
    Ok(mesh)
}

fn quality(p: [[f64; 2]; 3]) -> f64 {
    let area = signed_area(p);
    let l2: f64 = (0..3)
        .map(|k| {
            let (a, b) = (p[k], p[(k + 1) % 3]);
            (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
        })
        .sum();
    4.0 * 3f64.sqrt() * area / l2
}

pub(crate) fn signed_area(p: [[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

impl TruncatedMesh {
    /// `T` for a symmetric mesh.
    pub fn half_length(&self) -> f64 {
        0.5 * (self.x_max - self.x_min)
    }

    pub fn cell_points(&self, c: usize) -> [[f64; 2]; 3] {
        let v = self.cells[c];
        [self.nodes[v[0]], self.nodes[v[1]], self.nodes[v[2]]]
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        signed_area(self.cell_points(c))
    }

    pub fn area(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_area(c)).sum()
    }

    pub fn min_quality(&self) -> f64 {
        (0..self.cells.len())
            .map(|c| quality(self.cell_points(c)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Grid indices `(i, j)` of a vertex.
    pub fn grid_index(&self, v: usize) -> (usize, usize) {
        (v / (self.ny + 1), v % (self.ny + 1))
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.nodes.len() as i64 - self.edges.len() as i64 + self.cells.len() as i64
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.boundary.iter().any(|&(_, t)| t == tag)
    }

    /// Column index containing `x1`, clamped to the mesh.
    pub fn column_of(&self, x1: f64) -> usize {
        let dx = (self.x_max - self.x_min) / self.nx as f64;
        (((x1 - self.x_min) / dx).floor().max(0.0) as usize).min(self.nx - 1)
    }

    /// Cell indices of column `i`, bottom to top.
    pub fn column_cells(&self, i: usize) -> std::ops::Range<usize> {
        2 * i * self.ny..2 * (i + 1) * self.ny
    }

    /// Locates the cell containing `x` and returns it with barycentric coordinates.
    ///
    /// Points between a wall chord and the curved wall fall in no cell; the
    /// cell with the least negative coordinate is returned so that fields can
    /// be extrapolated there.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 3])> {
        if x[0] < self.x_min - 1e-12 || x[0] > self.x_max + 1e-12 {
            return None;
        }
        let i = self.column_of(x[0]);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for c in self.column_cells(i) {
            let lam = barycentric(self.cell_points(c), x);
            let worst = lam.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= 0.0 {
                return Some((c, lam));
            }
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((c, lam, worst));
            }
        }
        best.map(|b| (b.0, b.1))
    }
}

/// Barycentric coordinates of `x` with respect to triangle `p`.
pub fn barycentric(p: [[f64; 2]; 3], x: [f64; 2]) -> [f64; 3] {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let l1 = ((x[0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (x[1] - p[0][1])) / det;
    let l2 = ((p[1][0] - p[0][0]) * (x[1] - p[0][1]) - (x[0] - p[0][0]) * (p[1][1] - p[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChannelGeometry;

    #[test]
    fn straight_mesh_topology_and_tags() {
        let g = ChannelGeometry::straight(3.0);
        let m = build_mesh(&g, 5.0, 0.5).unwrap();
        assert_eq!(m.euler_characteristic(), 1);
        for tag in [
            BoundaryTag::WallLower,
            BoundaryTag::WallUpper,
            BoundaryTag::EndLeft,
            BoundaryTag::EndRight,
        ] {
            assert!(m.has_tag(tag));
        }
        for &(e, tag) in &m.boundary {
            let [p, q] = m.edges[e];
            let (a, b) = (m.nodes[p], m.nodes[q]);
            match tag {
                BoundaryTag::WallLower => assert!(a[1] == -1.0 && b[1] == -1.0),
                BoundaryTag::WallUpper => assert!(a[1] == 1.0 && b[1] == 1.0),
                BoundaryTag::EndLeft => assert!(a[0] == -5.0 && b[0] == -5.0),
                BoundaryTag::EndRight => assert!(a[0] == 5.0 && b[0] == 5.0),
            }
        }
        assert!((m.area() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn bump_mesh_contains_nodes() {
        let g = ChannelGeometry::bump(0.2, 3.0, 1.0).unwrap();
        let m = build_mesh(&g, 6.0, 0.25).unwrap();
        let worst = m
            .nodes
            .iter()
            .map(|x| {
                let w = g.eval_walls(x[0]);
                (x[1] - x[1].clamp(w.f1, w.f2)).abs()
            })
            .fold(0.0, f64::max);
        assert_eq!(worst, 0.0);
        for c in 0..m.cells.len() {
            assert!(m.cell_area(c) > 0.0);
        }
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn short_domain_rejected() {
        let g = ChannelGeometry::bump(0.2, 3.0, 1.0).unwrap();
        assert!(matches!(build_mesh(&g, 3.5, 0.25), Err(Error::DomainTooShort { .. })));
    }

    #[test]
    fn locate_finds_containing_cell() {
        let g = ChannelGeometry::bump(0.2, 3.0, 1.0).unwrap();
        let m = build_mesh(&g, 4.0, 0.5).unwrap();
        for c in [0, 17, 101, m.cells.len() - 1] {
            let p = m.cell_points(c);
            let x = [
                (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                (p[0][1] + p[1][1] + p[2][1]) / 3.0,
            ];
            let (found, lam) = m.locate(x).unwrap();
            assert_eq!(found, c);
            assert!(lam.iter().all(|&l| (l - 1.0 / 3.0).abs() < 1e-12));
        }
    }
}
