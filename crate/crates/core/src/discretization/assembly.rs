use rayon::prelude::*;

use super::element::{lambda_gradients, map_point, p2_gradients, p2_values, triangle_rule};
use super::layout::{FunctionSpaceLayout, LocalDof};
use super::sparse::{OperatorRole, SparseOperator};
use crate::carrier::{CarrierField, CarrierSample};
use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::geometry::mesh::barycentric;
use crate::quadrature::{triangle_points, InnerRule, PlainRule};

/// Order of the collapsed rule for polynomial integrands (exact to degree 8).
pub const POLY_ORDER: usize = 5;
const LAYER_NODES: usize = 8;

/// Quadrature point of a cell with its barycentric coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellPoint {
    pub lambda: [f64; 3],
    pub x: [f64; 2],
    pub w: f64,
}

/// Quadrature points of `cell ∩ {window.0 < x1 < window.1}`.
///
/// Cells untouched by the window and by the carrier's active zone use the
/// collapsed rule; cut cells are sliced vertically at the window, and cells
/// in the carrier's active zone are additionally split at its breakpoints,
/// with the inner rule graded through the wall layer when the cell reaches it.
pub fn cell_points(
    layout: &FunctionSpaceLayout,
    cell: usize,
    window: Option<(f64, f64)>,
    carrier: Option<&CarrierField>,
    order: usize,
) -> Vec<CellPoint> {
    let mesh = &layout.mesh;
    let tri = mesh.cell_points(cell);
    let xmin = tri.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let xmax = tri.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let win = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    if xmax <= win.0 || xmin >= win.1 {
        return Vec::new();
    }
    let cut = xmin < win.0 || xmax > win.1;
    let active = carrier.filter(|c| {
        let far = c.far_field_start();
        xmax > -far && xmin < far
    });
    if !cut && active.is_none() {
        let area = mesh.cell_area(cell);
        return triangle_rule(order)
            .iter()
            .map(|r| CellPoint { lambda: r.lambda, x: map_point(&tri, r.lambda), w: r.w * area })
            .collect();
    }
    let mut pts = Vec::new();
    let plain = PlainRule::new(order);
    match active {
        Some(c) => {
            let mut breaks = c.x_breakpoints();
            let ymin = tri.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
            let ymax = tri.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
            let t_min = tri
                .iter()
                .map(|p| mesh.geometry.eval_walls(p[0]).f2 - p[1])
                .fold(f64::INFINITY, f64::min);
            let layered = t_min < 1.5 * c.epsilon() + (ymax - ymin);
            if layered {
                let rule = c.layer_rule(LAYER_NODES, mesh.h);
                breaks.extend(rule.edge_crossings(tri));
                breaks.sort_by(|p, q| p.total_cmp(q));
                triangle_points(tri, win, &breaks, LAYER_NODES.max(order), &rule, &mut pts);
            } else {
                triangle_points(tri, win, &breaks, order, &plain, &mut pts);
            }
        }
        None => triangle_points(tri, win, &[], order, &plain as &dyn InnerRule, &mut pts),
    }
    pts.into_iter()
        .map(|q| CellPoint { lambda: barycentric(tri, q.x), x: q.x, w: q.w })
        .collect()
}

/// Carrier samples at the quadrature points of every cell.
#[derive(Clone, Debug)]
pub struct CarrierQuadrature {
    pub cells: Vec<Vec<(CellPoint, CarrierSample)>>,
    pub flux: f64,
}

impl CarrierQuadrature {
    pub fn new(layout: &FunctionSpaceLayout, carrier: &CarrierField) -> Self {
        let cells = (0..layout.mesh.cells.len())
            .into_par_iter()
            .map(|c| {
                cell_points(layout, c, None, Some(carrier), POLY_ORDER)
                    .into_iter()
                    .map(|p| (p, carrier.eval_unchecked(p.x)))
                    .collect()
            })
            .collect();
        Self { cells, flux: carrier.flux() }
    }

    fn check(&self, layout: &FunctionSpaceLayout) -> Result<()> {
        if self.cells.len() != layout.mesh.cells.len() {
            return Err(Error::LayoutMismatch(format!(
                "carrier quadrature built for {} cells, mesh has {}",
                self.cells.len(),
                layout.mesh.cells.len()
            )));
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }
}

/// Field transporting the velocity in the convection and reaction forms.
#[derive(Clone, Copy, Debug)]
pub enum Advector<'a> {
    Carrier(&'a CarrierQuadrature),
    /// Discrete velocity given by its dof vector.
    Discrete(&'a [f64]),
}

/// Form selector for [`assemble`].
#[derive(Clone, Copy, Debug)]
pub enum Form<'a> {
    /// `∫ v·φ`
    Mass,
    /// `∫ ∇v:∇φ`
    Gradient,
    /// `∫ 2D(v):D(φ)`
    Viscous,
    /// `∫ q div v`, pressure rows by velocity columns.
    Divergence,
    /// `∫ (b·∇v)·φ`
    Convection(Advector<'a>),
    /// `∫ (v·∇b)·φ`
    Reaction(Advector<'a>),
}

impl Form<'_> {
    fn role(&self) -> OperatorRole {
        match self {
            Form::Mass => OperatorRole::Mass,
            Form::Gradient => OperatorRole::Gradient,
            Form::Viscous => OperatorRole::Viscous,
            Form::Divergence => OperatorRole::Divergence,
            Form::Convection(_) => OperatorRole::Convection,
            Form::Reaction(_) => OperatorRole::Reaction,
        }
    }
}

/// Shape data of one quadrature point.
struct Shape {
    n: [f64; 6],
    dn: [[f64; 2]; 6],
    w: f64,
    lambda: [f64; 3],
    /// Advector value and gradient, when present.
    b: Option<([f64; 2], [[f64; 2]; 2])>,
}

fn shapes_poly(layout: &FunctionSpaceLayout, cell: usize, order: usize) -> Vec<Shape> {
    let tri = layout.mesh.cell_points(cell);
    let dl = lambda_gradients(tri);
    let area = layout.mesh.cell_area(cell);
    triangle_rule(order)
        .iter()
        .map(|r| Shape { n: p2_values(r.lambda), dn: p2_gradients(r.lambda, &dl), w: r.w * area, lambda: r.lambda, b: None })
        .collect()
}

fn shapes_for(layout: &FunctionSpaceLayout, cell: usize, adv: Option<&Advector>, nodal: Option<&[[f64; 2]]>) -> Vec<Shape> {
    match adv {
        None => shapes_poly(layout, cell, POLY_ORDER),
        Some(Advector::Carrier(cq)) => {
            let dl = lambda_gradients(layout.mesh.cell_points(cell));
            cq.cells[cell]
                .iter()
                .map(|(p, s)| Shape {
                    n: p2_values(p.lambda),
                    dn: p2_gradients(p.lambda, &dl),
                    w: p.w,
                    lambda: p.lambda,
                    b: Some((s.g, s.grad)),
                })
                .collect()
        }
        Some(Advector::Discrete(_)) => {
            let local = layout.cell_values(nodal.expect("nodal values"), cell);
            let mut shapes = shapes_poly(layout, cell, POLY_ORDER);
            for s in &mut shapes {
                let mut v = [0.0; 2];
                let mut g = [[0.0; 2]; 2];
                for k in 0..6 {
                    for i in 0..2 {
                        v[i] += s.n[k] * local[k][i];
                        for j in 0..2 {
                            g[i][j] += local[k][i] * s.dn[k][j];
                        }
                    }
                }
                s.b = Some((v, g));
            }
            shapes
        }
    }
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn local_matrix(form: &Form, dofs: &[LocalDof], shapes: &[Shape]) -> Vec<f64> {
    let m = dofs.len();
    let mut out = vec![0.0; m * m];
    for s in shapes {
        for (a, da) in dofs.iter().enumerate() {
            let (na, ga) = (s.n[da.node], s.dn[da.node]);
            for (b, db) in dofs.iter().enumerate() {
                let (nb, gb) = (s.n[db.node], s.dn[db.node]);
                let v = match form {
                    Form::Mass => na * nb * dot2(da.dir, db.dir),
                    Form::Gradient => dot2(da.dir, db.dir) * dot2(ga, gb),
                    Form::Viscous => dot2(da.dir, db.dir) * dot2(ga, gb) + dot2(da.dir, gb) * dot2(db.dir, ga),
                    Form::Convection(_) => {
                        let (beta, _) = s.b.expect("advector");
                        na * dot2(da.dir, db.dir) * dot2(beta, gb)
                    }
                    Form::Reaction(_) => {
                        let (_, gbeta) = s.b.expect("advector");
                        let mut q = 0.0;
                        for i in 0..2 {
                            for j in 0..2 {
                                q += da.dir[i] * gbeta[i][j] * db.dir[j];
                            }
                        }
                        na * nb * q
                    }
                    Form::Divergence => unreachable!(),
                };
                out[a * m + b] += s.w * v;
            }
        }
    }
    out
}

/// Assembles the operator of `form` on the constrained velocity space.
pub fn assemble(layout: &FunctionSpaceLayout, form: Form) -> Result<SparseOperator> {
    let adv = match &form {
        Form::Convection(a) | Form::Reaction(a) => Some(*a),
        _ => None,
    };
    let nodal = match adv {
        Some(Advector::Discrete(v)) => Some(layout.nodal_values(v)?),
        Some(Advector::Carrier(cq)) => {
            cq.check(layout)?;
            None
        }
        None => None,
    };
    let ncells = layout.mesh.cells.len();
    let nv = layout.velocity_dofs;
    if let Form::Divergence = form {
        let np = layout.pressure_dofs();
        let locals: Vec<Vec<(usize, usize, f64)>> = (0..ncells)
            .into_par_iter()
            .map(|c| {
                let dofs = layout.local_dofs(c);
                let verts = layout.mesh.cells[c];
                let mut out = vec![0.0; 3 * dofs.len()];
                for s in shapes_poly(layout, c, 3) {
                    for m in 0..3 {
                        for (b, db) in dofs.iter().enumerate() {
                            out[m * dofs.len() + b] += s.w * s.lambda[m] * dot2(db.dir, s.dn[db.node]);
                        }
                    }
                }
                let mut t = Vec::with_capacity(out.len());
                for m in 0..3 {
                    for (b, db) in dofs.iter().enumerate() {
                        t.push((verts[m], db.dof, out[m * dofs.len() + b]));
                    }
                }
                t
            })
            .collect();
        return Ok(SparseOperator::from_triplets(OperatorRole::Divergence, np, nv, locals.concat()));
    }
    let locals: Vec<Vec<(usize, usize, f64)>> = (0..ncells)
        .into_par_iter()
        .map(|c| {
            let dofs = layout.local_dofs(c);
            let shapes = shapes_for(layout, c, adv.as_ref(), nodal.as_deref());
            let k = local_matrix(&form, &dofs, &shapes);
            let m = dofs.len();
            let mut t = Vec::with_capacity(m * m);
            for a in 0..m {
                for b in 0..m {
                    t.push((dofs[a].dof, dofs[b].dof, k[a * m + b]));
                }
            }
            t
        })
        .collect();
    Ok(SparseOperator::from_triplets(form.role(), nv, nv, locals.concat()))
}

fn assemble_vector<F>(layout: &FunctionSpaceLayout, local: F) -> Vec<f64>
where
    F: Fn(usize, &[LocalDof]) -> Vec<f64> + Sync,
{
    let parts: Vec<(Vec<LocalDof>, Vec<f64>)> = (0..layout.mesh.cells.len())
        .into_par_iter()
        .map(|c| {
            let dofs = layout.local_dofs(c);
            let v = local(c, &dofs);
            (dofs, v)
        })
        .collect();
    let mut out = vec![0.0; layout.velocity_dofs];
    for (dofs, v) in parts {
        for (d, x) in dofs.iter().zip(v) {
            out[d.dof] += x;
        }
    }
    out
}

/// Load of the perturbation problem: `-∫ 2D(g):D(φ) + (g·∇g)·φ`.
pub fn carrier_load(layout: &FunctionSpaceLayout, cq: &CarrierQuadrature) -> Result<Vec<f64>> {
    cq.check(layout)?;
    Ok(assemble_vector(layout, |c, dofs| {
        let shapes = shapes_for(layout, c, Some(&Advector::Carrier(cq)), None);
        let mut out = vec![0.0; dofs.len()];
        for s in &shapes {
            let (g, gg) = s.b.expect("carrier sample");
            let strain = [[gg[0][0], 0.5 * (gg[0][1] + gg[1][0])], [0.5 * (gg[0][1] + gg[1][0]), gg[1][1]]];
            let conv = [gg[0][0] * g[0] + gg[0][1] * g[1], gg[1][0] * g[0] + gg[1][1] * g[1]];
            for (a, d) in dofs.iter().enumerate() {
                let gn = s.dn[d.node];
                let mut visc = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        visc += 2.0 * strain[i][j] * d.dir[i] * gn[j];
                    }
                }
                out[a] -= s.w * (visc + s.n[d.node] * dot2(conv, d.dir));
            }
        }
        out
    }))
}

/// `∫ (v·∇v)·φ` for a discrete velocity `v`.
pub fn convection_vector(layout: &FunctionSpaceLayout, v: &[f64]) -> Result<Vec<f64>> {
    let nodal = layout.nodal_values(v)?;
    Ok(assemble_vector(layout, |c, dofs| {
        let shapes = shapes_for(layout, c, Some(&Advector::Discrete(v)), Some(&nodal));
        let mut out = vec![0.0; dofs.len()];
        for s in &shapes {
            let (b, gb) = s.b.expect("velocity sample");
            let conv = [gb[0][0] * b[0] + gb[0][1] * b[1], gb[1][0] * b[0] + gb[1][1] * b[1]];
            for (a, d) in dofs.iter().enumerate() {
                out[a] += s.w * s.n[d.node] * dot2(conv, d.dir);
            }
        }
        out
    }))
}

/// `∫ f·φ` for an analytic body force.
pub fn body_force_load(layout: &FunctionSpaceLayout, f: &dyn VectorField) -> Vec<f64> {
    assemble_vector(layout, |c, dofs| {
        let tri = layout.mesh.cell_points(c);
        let area = layout.mesh.cell_area(c);
        let mut out = vec![0.0; dofs.len()];
        for r in triangle_rule(POLY_ORDER + 1) {
            let n = p2_values(r.lambda);
            let fx = f.eval(map_point(&tri, r.lambda)).value;
            for (a, d) in dofs.iter().enumerate() {
                out[a] += r.w * area * n[d.node] * dot2(fx, d.dir);
            }
        }
        out
    })
}

/// `∫ q` for every pressure hat function.
pub fn pressure_mass(layout: &FunctionSpaceLayout) -> Vec<f64> {
    let mut out = vec![0.0; layout.pressure_dofs()];
    for (c, verts) in layout.mesh.cells.iter().enumerate() {
        let third = layout.mesh.cell_area(c) / 3.0;
        for &v in verts {
            out[v] += third;
        }
    }
    out
}
