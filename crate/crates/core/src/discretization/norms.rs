use rayon::prelude::*;

use super::assembly::{cell_points, CellPoint, POLY_ORDER};
use super::layout::FunctionSpaceLayout;
use crate::carrier::CarrierField;
use crate::error::{Error, Result};
use crate::fields::{VectorField, VectorSample};
use crate::quadrature::gauss_legendre;

/// A velocity to integrate: a discrete field, an analytic one, the carrier,
/// or the carrier plus a discrete perturbation.
#[derive(Clone, Copy)]
pub enum FieldSource<'a> {
    Discrete(&'a [f64]),
    Analytic(&'a dyn VectorField),
    Carrier(&'a CarrierField),
    CarrierPlus(&'a CarrierField, &'a [f64]),
}

impl FieldSource<'_> {
    fn carrier(&self) -> Option<&CarrierField> {
        match self {
            FieldSource::Carrier(c) | FieldSource::CarrierPlus(c, _) => Some(c),
            _ => None,
        }
    }

    fn discrete(&self) -> Option<&[f64]> {
        match self {
            FieldSource::Discrete(v) | FieldSource::CarrierPlus(_, v) => Some(v),
            _ => None,
        }
    }
}

fn add(a: VectorSample, b: VectorSample) -> VectorSample {
    let mut out = a;
    for i in 0..2 {
        out.value[i] += b.value[i];
        for j in 0..2 {
            out.grad[i][j] += b.grad[i][j];
        }
    }
    out
}

fn check_window(layout: &FunctionSpaceLayout, window: Option<(f64, f64)>) -> Result<()> {
    if let Some((a, b)) = window {
        if !(a < b) {
            return Err(Error::InvalidInterval { a, b });
        }
        let mesh = &layout.mesh;
        if b <= mesh.x_min || a >= mesh.x_max {
            return Err(Error::Precondition(format!(
                "region ({a}, {b}) misses the mesh ({}, {})",
                mesh.x_min, mesh.x_max
            )));
        }
    }
    Ok(())
}

/// `∫ f(u, x)` over the mesh cells inside `window` (the whole mesh for `None`).
///
/// Cut cells are integrated exactly for piecewise polynomials; the carrier's
/// layer is resolved by graded quadrature. Cells are processed in parallel
/// and summed in cell order.
pub fn integrate_cells<const K: usize, F>(
    layout: &FunctionSpaceLayout,
    source: FieldSource,
    window: Option<(f64, f64)>,
    f: F,
) -> Result<[f64; K]>
where
    F: Fn(&VectorSample, [f64; 2]) -> [f64; K] + Sync,
{
    check_window(layout, window)?;
    let nodal = source.discrete().map(|v| layout.nodal_values(v)).transpose()?;
    let carrier = source.carrier();
    let cells: Vec<usize> = match window {
        None => (0..layout.mesh.cells.len()).collect(),
        Some((a, b)) => {
            let mesh = &layout.mesh;
            let (i0, i1) = (mesh.column_of(a), mesh.column_of(b));
            (mesh.column_cells(i0).start..mesh.column_cells(i1).end).collect()
        }
    };
    let parts: Vec<[f64; K]> = cells
        .par_iter()
        .map(|&c| {
            let pts = cell_points(layout, c, window, carrier, POLY_ORDER + 1);
            let local = nodal.as_ref().map(|n| layout.cell_values(n, c));
            let mut acc = [0.0; K];
            for CellPoint { lambda, x, w } in pts {
                let mut s = VectorSample::default();
                if let Some(local) = &local {
                    s = layout.eval_in_cell(c, local, lambda);
                }
                match source {
                    FieldSource::Analytic(a) => s = a.eval(x),
                    FieldSource::Carrier(g) | FieldSource::CarrierPlus(g, _) => {
                        let cs = g.eval_unchecked(x);
                        s = add(s, VectorSample { value: cs.g, grad: cs.grad });
                    }
                    FieldSource::Discrete(_) => {}
                }
                let v = f(&s, x);
                for k in 0..K {
                    acc[k] += w * v[k];
                }
            }
            acc
        })
        .collect();
    let mut total = [0.0; K];
    for p in parts {
        for k in 0..K {
            total[k] += p[k];
        }
    }
    Ok(total)
}

/// Norms of a velocity over a region.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NormTable {
    pub area: f64,
    pub l2: f64,
    pub l4: f64,
    /// `‖∇u‖`
    pub h1_semi: f64,
    /// `‖D(u)‖`
    pub strain: f64,
    /// `‖div u‖`
    pub divergence: f64,
    /// `(x1, ∫ u1 dx2)` at the requested stations.
    pub fluxes: Vec<(f64, f64)>,
}

impl NormTable {
    /// `(‖u‖² + ‖∇u‖²)^{1/2}`
    pub fn h1(&self) -> f64 {
        self.l2.hypot(self.h1_semi)
    }
}

/// Evaluates [`NormTable`] for `source` over `window`.
pub fn evaluate_norms(
    layout: &FunctionSpaceLayout,
    source: FieldSource,
    window: Option<(f64, f64)>,
    stations: &[f64],
) -> Result<NormTable> {
    let [area, l2, l4, grad, strain, div] = integrate_cells(layout, source, window, |s, _| {
        let [[a, b], [c, d]] = s.grad;
        let v2 = s.value[0] * s.value[0] + s.value[1] * s.value[1];
        let off = 0.5 * (b + c);
        [1.0, v2, v2 * v2, a * a + b * b + c * c + d * d, a * a + 2.0 * off * off + d * d, (a + d) * (a + d)]
    })?;
    if area <= 0.0 {
        return Err(Error::Precondition("empty integration region".into()));
    }
    let fluxes = stations
        .iter()
        .map(|&x| station_flux(layout, source, x).map(|q| (x, q)))
        .collect::<Result<_>>()?;
    Ok(NormTable {
        area,
        l2: l2.sqrt(),
        l4: l4.sqrt().sqrt(),
        h1_semi: grad.sqrt(),
        strain: strain.sqrt(),
        divergence: div.sqrt(),
        fluxes,
    })
}

/// Vertical segment where the line `x1 = s` meets a triangle.
pub(crate) fn vertical_section(tri: [[f64; 2]; 3], s: f64) -> Option<(f64, f64)> {
    let mut ys = Vec::with_capacity(3);
    for k in 0..3 {
        let (p, q) = (tri[k], tri[(k + 1) % 3]);
        let (lo, hi) = if p[0] <= q[0] { (p, q) } else { (q, p) };
        if s < lo[0] || s > hi[0] {
            continue;
        }
        if hi[0] == lo[0] {
            ys.push(lo[1]);
            ys.push(hi[1]);
        } else {
            ys.push(lo[1] + (s - lo[0]) / (hi[0] - lo[0]) * (hi[1] - lo[1]));
        }
    }
    let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi > lo).then_some((lo, hi))
}

/// `∫ u1(x1, x2) dx2` across the mesh at `x1`.
///
/// The carrier part uses the exact cross-section and its graded rule; the
/// discrete part is integrated exactly along the mesh section.
pub fn station_flux(layout: &FunctionSpaceLayout, source: FieldSource, x1: f64) -> Result<f64> {
    let mesh = &layout.mesh;
    if x1 < mesh.x_min || x1 > mesh.x_max {
        return Err(Error::Precondition(format!("station {x1} outside the mesh")));
    }
    let mut total = source.carrier().map_or(0.0, |g| crate::carrier::station_flux(g, x1));
    let nodal = source.discrete().map(|v| layout.nodal_values(v)).transpose()?;
    let analytic = match source {
        FieldSource::Analytic(a) => Some(a),
        _ => None,
    };
    if nodal.is_none() && analytic.is_none() {
        return Ok(total);
    }
    let (xs, ws) = gauss_legendre(if analytic.is_some() { 8 } else { 3 });
    let col = mesh.column_of(x1);
    for c in mesh.column_cells(col) {
        let tri = mesh.cell_points(c);
        let Some((lo, hi)) = vertical_section(tri, x1) else { continue };
        // a station on a column line touches the cells on one side only
        let local = nodal.as_ref().map(|n| layout.cell_values(n, c));
        for (xi, wi) in xs.iter().zip(ws) {
            let y = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xi;
            let w = 0.5 * (hi - lo) * wi;
            let v = match (&local, analytic) {
                (Some(local), _) => {
                    let lam = crate::geometry::mesh::barycentric(tri, [x1, y]);
                    layout.eval_in_cell(c, local, lam).value[0]
                }
                (None, Some(a)) => a.eval([x1, y]).value[0],
                (None, None) => unreachable!(),
            };
            total += w * v;
        }
    }
    Ok(total)
}

/// Column-averaged flux `(1/Δx) ∫_column u1` of a discrete field, per column.
///
/// For a discretely divergence-free field with the consistent wall normals
/// these averages coincide up to rounding.
pub fn column_fluxes(layout: &FunctionSpaceLayout, v: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mesh = &layout.mesh;
    let nodal = layout.nodal_values(v)?;
    Ok((0..mesh.nx)
        .into_par_iter()
        .map(|i| {
            let (a, b) = (mesh.columns[i], mesh.columns[i + 1]);
            let mut q = 0.0;
            for c in mesh.column_cells(i) {
                let local = layout.cell_values(&nodal, c);
                for p in cell_points(layout, c, None, None, 3) {
                    q += p.w * layout.eval_in_cell(c, &local, p.lambda).value[0];
                }
            }
            (0.5 * (a + b), q / (b - a))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::discretization::{build_spaces, EndCondition, SpaceOptions};
    use crate::fields::FnVector;
    use crate::geometry::{build_mesh, ChannelGeometry};

    fn layout(ends: EndCondition) -> FunctionSpaceLayout {
        let mesh = build_mesh(&ChannelGeometry::straight(0.0), 2.0, 0.25).unwrap();
        build_spaces(Arc::new(mesh), SpaceOptions { ends, ..SpaceOptions::default() }).unwrap()
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let l = layout(EndCondition::Clamped);
        let v = vec![0.0; l.velocity_dofs];
        let t = evaluate_norms(&l, FieldSource::Discrete(&v), None, &[0.0]).unwrap();
        assert_eq!((t.l2, t.l4, t.h1_semi, t.strain), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(t.fluxes, vec![(0.0, 0.0)]);
        assert!((t.area - 8.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_shear_state() {
        let l = layout(EndCondition::Free);
        let u = FnVector(|_| VectorSample { value: [0.5 * 1.3, 0.0], grad: [[0.0; 2]; 2] });
        let v = l.interpolate(&u);
        let t = evaluate_norms(&l, FieldSource::Discrete(&v), Some((-1.3, 0.7)), &[-2.0, 0.1, 1.0]).unwrap();
        assert!(t.strain < 1e-13);
        for (_, q) in &t.fluxes {
            assert!((q - 1.3).abs() < 1e-13);
        }
        assert!((t.area - 4.0).abs() < 1e-13);
    }

    #[test]
    fn empty_region_is_rejected() {
        let l = layout(EndCondition::Clamped);
        let v = vec![0.0; l.velocity_dofs];
        assert!(evaluate_norms(&l, FieldSource::Discrete(&v), Some((3.0, 4.0)), &[]).is_err());
        assert!(evaluate_norms(&l, FieldSource::Discrete(&v), Some((1.0, 1.0)), &[]).is_err());
    }

    #[test]
    fn quadratic_field_on_one_cell() {
        // u = (x1², x1 x2) on the cell (0,0), (1/4,0), (1/4,1/4)
        let l = layout(EndCondition::Free);
        let u = FnVector(|x: [f64; 2]| VectorSample {
            value: [x[0] * x[0], x[0] * x[1]],
            grad: [[2.0 * x[0], 0.0], [x[1], x[0]]],
        });
        let v = l.interpolate(&u);
        let nodal = l.nodal_values(&v).unwrap();
        let c = (0..l.mesh.cells.len())
            .find(|&c| {
                let p = l.mesh.cell_points(c);
                p.iter().all(|q| q[0] >= -1e-12 && q[0] <= 0.25 + 1e-12 && q[1] >= -1e-12 && q[1] <= 0.25 + 1e-12)
                    && p.iter().any(|q| q[1].abs() < 1e-12 && (q[0] - 0.25).abs() < 1e-12)
                    && p.iter().filter(|q| q[1].abs() < 1e-12).count() == 2
            })
            .expect("lower cell of the first interior quad");
        let local = l.cell_values(&nodal, c);
        let mut q = 0.0;
        for p in cell_points(&l, c, None, None, 6) {
            let s = l.eval_in_cell(c, &local, p.lambda);
            q += p.w * (s.value[0].powi(2) + s.value[1].powi(2));
        }
        // ∫_0^{1/4} ∫_0^{x} x⁴ + x² y² dy dx = ∫ x⁵ + x⁵/3 = (4/3)(1/4)⁶/6
        let exact = (4.0 / 3.0) * 0.25f64.powi(6) / 6.0;
        assert!((q - exact).abs() <= 1e-12 * exact, "{q} vs {exact}");
    }
}
