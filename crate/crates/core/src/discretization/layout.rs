use std::sync::Arc;

use super::element::{map_point, p2_gradients, p2_values, lambda_gradients, NODE_LAMBDA};
use crate::error::{Error, Result};
use crate::fields::{VectorField, VectorSample};
use crate::geometry::{BoundaryTag, TruncatedMesh};

/// Boundary condition on the walls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WallCondition {
    /// `v·n = 0`, tangential component free.
    Slip,
    /// `v = 0`.
    NoSlip,
}

/// Boundary condition on the end sections `Σ(±T)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndCondition {
    /// `v = 0`.
    Clamped,
    /// No constraint.
    Free,
}

/// How the wall normal of a slip node is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalMode {
    /// Normals of the polygonal boundary: chord normal at edge midpoints and
    /// the length-weighted average of the two chord normals at vertices.
    /// Discrete fields then have exactly zero boundary flux, so the constant
    /// pressure stays in the kernel of the discrete gradient.
    Consistent,
    /// Normals of the exact walls from `f1'`, `f2'`.
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceOptions {
    pub walls: WallCondition,
    pub ends: EndCondition,
    pub normals: NormalMode,
}

impl Default for SpaceOptions {
    fn default() -> Self {
        Self { walls: WallCondition::Slip, ends: EndCondition::Clamped, normals: NormalMode::Consistent }
    }
}

/// Degrees of freedom carried by one velocity node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeDofs {
    Free([usize; 2]),
    /// Velocity is `coefficient · tangent`.
    Slip { dof: usize, tangent: [f64; 2] },
    Fixed,
}

/// One local basis function: node `k` of the cell, global dof, direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalDof {
    pub node: usize,
    pub dof: usize,
    pub dir: [f64; 2],
}

/// Quadratic velocity / linear pressure spaces on a mesh.
///
/// Velocity nodes are the mesh vertices followed by the edge midpoints;
/// pressure dofs are the vertices.
#[derive(Clone, Debug)]
pub struct FunctionSpaceLayout {
    pub mesh: Arc<TruncatedMesh>,
    pub options: SpaceOptions,
    pub node_points: Vec<[f64; 2]>,
    pub nodes: Vec<NodeDofs>,
    /// Outward unit normal of wall nodes.
    pub normals: Vec<Option<[f64; 2]>>,
    pub cell_nodes: Vec<[usize; 6]>,
    pub velocity_dofs: usize,
}

fn chord_normal(p: [f64; 2], q: [f64; 2], upper: bool) -> [f64; 2] {
    let d = [q[0] - p[0], q[1] - p[1]];
    let len = d[0].hypot(d[1]);
    let n = [-d[1] / len, d[0] / len];
    let outward = if upper { n[1] > 0.0 } else { n[1] < 0.0 };
    if outward {
        n
    } else {
        [-n[0], -n[1]]
    }
}

fn tangent_of(n: [f64; 2]) -> [f64; 2] {
    let t = [n[1], -n[0]];
    if t[0] < 0.0 || (t[0] == 0.0 && t[1] < 0.0) {
        [-t[0], -t[1]]
    } else {
        t
    }
}

/// Builds the constrained spaces on `mesh`.
pub fn build_spaces(mesh: Arc<TruncatedMesh>, options: SpaceOptions) -> Result<FunctionSpaceLayout> {
    if !(mesh.has_tag(BoundaryTag::EndLeft) && mesh.has_tag(BoundaryTag::EndRight)) {
        return Err(Error::Precondition("the velocity space needs both end sections Σ(±T)".into()));
    }
    let nv = mesh.nodes.len();
    let ne = mesh.edges.len();
    let mut node_points = mesh.nodes.clone();
    for e in &mesh.edges {
        let (p, q) = (mesh.nodes[e[0]], mesh.nodes[e[1]]);
        node_points.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Kind {
        Interior,
        End,
        Wall { upper: bool },
        Corner { upper: bool },
    }
    let mut kind = vec![Kind::Interior; nv + ne];
    for v in 0..nv {
        let (i, j) = mesh.grid_index(v);
        let end = i == 0 || i == mesh.nx;
        let wall = j == 0 || j == mesh.ny;
        kind[v] = match (end, wall) {
            (true, true) => Kind::Corner { upper: j == mesh.ny },
            (true, false) => Kind::End,
            (false, true) => Kind::Wall { upper: j == mesh.ny },
            _ => Kind::Interior,
        };
    }
    // accumulated length-weighted chord normals at wall vertices
    let mut vertex_normal = vec![[0.0f64; 2]; nv];
    let mut normals = vec![None; nv + ne];
    for &(e, tag) in &mesh.boundary {
        let [a, b] = mesh.edges[e];
        match tag {
            BoundaryTag::EndLeft | BoundaryTag::EndRight => kind[nv + e] = Kind::End,
            BoundaryTag::WallLower | BoundaryTag::WallUpper => {
                let upper = tag == BoundaryTag::WallUpper;
                kind[nv + e] = Kind::Wall { upper };
                let (p, q) = (mesh.nodes[a], mesh.nodes[b]);
                let n = chord_normal(p, q, upper);
                let len = (q[0] - p[0]).hypot(q[1] - p[1]);
                normals[nv + e] = Some(n);
                for v in [a, b] {
                    vertex_normal[v][0] += len * n[0];
                    vertex_normal[v][1] += len * n[1];
                }
            }
        }
    }
    for v in 0..nv {
        if let Kind::Wall { .. } | Kind::Corner { .. } = kind[v] {
            let n = vertex_normal[v];
            let len = n[0].hypot(n[1]);
            normals[v] = Some([n[0] / len, n[1] / len]);
        }
    }
    if options.normals == NormalMode::Analytic {
        for (k, n) in normals.iter_mut().enumerate() {
            if n.is_some() {
                let x = node_points[k];
                let w = mesh.geometry.eval_walls(x[0]);
                let upper = matches!(kind[k], Kind::Wall { upper: true } | Kind::Corner { upper: true });
                *n = Some(if upper { w.upper_normal() } else { w.lower_normal() });
            }
        }
    }

    let mut next = 0usize;
    let mut nodes = Vec::with_capacity(nv + ne);
    for k in 0..nv + ne {
        let node = match (kind[k], options.ends, options.walls) {
            (Kind::Interior, _, _) | (Kind::End, EndCondition::Free, _) => {
                next += 2;
                NodeDofs::Free([next - 2, next - 1])
            }
            (Kind::End | Kind::Corner { .. }, EndCondition::Clamped, _) => NodeDofs::Fixed,
            (Kind::Wall { .. } | Kind::Corner { .. }, _, WallCondition::NoSlip) => NodeDofs::Fixed,
            (Kind::Wall { .. } | Kind::Corner { .. }, _, WallCondition::Slip) => {
                next += 1;
                let n = normals[k].expect("wall nodes carry a normal");
                NodeDofs::Slip { dof: next - 1, tangent: tangent_of(n) }
            }
        };
        nodes.push(node);
    }

    let cell_nodes = mesh
        .cells
        .iter()
        .zip(&mesh.cell_edges)
        .map(|(c, e)| [c[0], c[1], c[2], nv + e[0], nv + e[1], nv + e[2]])
        .collect();

    Ok(FunctionSpaceLayout {
        options,
        node_points,
        nodes,
        normals,
        cell_nodes,
        velocity_dofs: next,
        mesh,
    })
}

impl FunctionSpaceLayout {
    pub fn pressure_dofs(&self) -> usize {
        self.mesh.nodes.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Velocity basis functions supported on `cell`.
    pub fn local_dofs(&self, cell: usize) -> Vec<LocalDof> {
        let mut out = Vec::with_capacity(12);
        for (k, &node) in self.cell_nodes[cell].iter().enumerate() {
            match self.nodes[node] {
                NodeDofs::Free([a, b]) => {
                    out.push(LocalDof { node: k, dof: a, dir: [1.0, 0.0] });
                    out.push(LocalDof { node: k, dof: b, dir: [0.0, 1.0] });
                }
                NodeDofs::Slip { dof, tangent } => out.push(LocalDof { node: k, dof, dir: tangent }),
                NodeDofs::Fixed => {}
            }
        }
        out
    }

    /// Velocity vectors at all nodes.
    pub fn nodal_values(&self, coeffs: &[f64]) -> Result<Vec<[f64; 2]>> {
        self.check_velocity(coeffs)?;
        Ok(self
            .nodes
            .iter()
            .map(|n| match *n {
                NodeDofs::Free([a, b]) => [coeffs[a], coeffs[b]],
                NodeDofs::Slip { dof, tangent } => [coeffs[dof] * tangent[0], coeffs[dof] * tangent[1]],
                NodeDofs::Fixed => [0.0, 0.0],
            })
            .collect())
    }

    pub fn check_velocity(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.velocity_dofs {
            return Err(Error::LayoutMismatch(format!(
                "velocity vector has {} entries, the layout has {} dofs",
                coeffs.len(),
                self.velocity_dofs
            )));
        }
        Ok(())
    }

    /// Dof vector whose nodal values best match `f` at the nodes: free nodes
    /// take the value, slip nodes its tangential component, fixed nodes 0.
    pub fn interpolate(&self, f: &dyn VectorField) -> Vec<f64> {
        let mut out = vec![0.0; self.velocity_dofs];
        for (k, n) in self.nodes.iter().enumerate() {
            let v = f.eval(self.node_points[k]).value;
            match *n {
                NodeDofs::Free([a, b]) => {
                    out[a] = v[0];
                    out[b] = v[1];
                }
                NodeDofs::Slip { dof, tangent } => out[dof] = v[0] * tangent[0] + v[1] * tangent[1],
                NodeDofs::Fixed => {}
            }
        }
        out
    }

    /// Value and gradient of a discrete field inside `cell` at barycentric `l`,
    /// given the nodal values of that cell.
    pub fn eval_in_cell(&self, cell: usize, local: &[[f64; 2]; 6], l: [f64; 3]) -> VectorSample {
        let p = self.mesh.cell_points(cell);
        let dl = lambda_gradients(p);
        let n = p2_values(l);
        let dn = p2_gradients(l, &dl);
        let mut s = VectorSample::default();
        for k in 0..6 {
            for i in 0..2 {
                s.value[i] += n[k] * local[k][i];
                for j in 0..2 {
                    s.grad[i][j] += local[k][i] * dn[k][j];
                }
            }
        }
        s
    }

    pub fn cell_values(&self, nodal: &[[f64; 2]], cell: usize) -> [[f64; 2]; 6] {
        let mut out = [[0.0; 2]; 6];
        for (k, &node) in self.cell_nodes[cell].iter().enumerate() {
            out[k] = nodal[node];
        }
        out
    }

    /// Physical position of local node `k` of `cell`.
    pub fn local_node_point(&self, cell: usize, k: usize) -> [f64; 2] {
        map_point(&self.mesh.cell_points(cell), NODE_LAMBDA[k])
    }

    /// Number of scalar constraints per node kind: `(slip, fixed)` node counts.
    pub fn constraint_counts(&self) -> (usize, usize) {
        let slip = self.nodes.iter().filter(|n| matches!(n, NodeDofs::Slip { .. })).count();
        let fixed = self.nodes.iter().filter(|n| matches!(n, NodeDofs::Fixed)).count();
        (slip, fixed)
    }
}

/// Discrete velocity-pressure pair.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedField {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
}

impl MixedField {
    pub fn zeros(layout: &FunctionSpaceLayout) -> Self {
        Self { velocity: vec![0.0; layout.velocity_dofs], pressure: vec![0.0; layout.pressure_dofs()] }
    }
}
