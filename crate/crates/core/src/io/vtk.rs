use std::io::Write;

use crate::carrier::CarrierField;
use crate::error::Result;
use crate::geometry::TruncatedMesh;
use crate::solver::SolutionBundle;

const VTK_LINE: u8 = 3;
const VTK_TRIANGLE: u8 = 5;
const VTK_QUADRATIC_TRIANGLE: u8 = 22;

/// Floats are written with 17 significant digits so that they round-trip.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn header<W: Write>(w: &mut W, title: &str) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")
}

fn points<W: Write>(w: &mut W, pts: &[[f64; 2]]) -> std::io::Result<()> {
    writeln!(w, "POINTS {} double", pts.len())?;
    for p in pts {
        writeln!(w, "{} {} {}", num(p[0]), num(p[1]), num(0.0))?;
    }
    Ok(())
}

fn cells<W: Write>(w: &mut W, cells: &[Vec<usize>], kind: u8) -> std::io::Result<()> {
    let size: usize = cells.iter().map(|c| c.len() + 1).sum();
    writeln!(w, "CELLS {} {size}", cells.len())?;
    for c in cells {
        let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
        writeln!(w, "{} {}", c.len(), ids.join(" "))?;
    }
    writeln!(w, "CELL_TYPES {}", cells.len())?;
    for _ in cells {
        writeln!(w, "{kind}")?;
    }
    Ok(())
}

fn vectors<W: Write>(w: &mut W, name: &str, v: &[[f64; 2]]) -> std::io::Result<()> {
    writeln!(w, "VECTORS {name} double")?;
    for x in v {
        writeln!(w, "{} {} {}", num(x[0]), num(x[1]), num(0.0))?;
    }
    Ok(())
}

fn scalars<W: Write>(w: &mut W, name: &str, v: &[f64]) -> std::io::Result<()> {
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for x in v {
        writeln!(w, "{}", num(*x))?;
    }
    Ok(())
}

/// Mesh vertices and linear triangles.
pub fn write_mesh_vtk<W: Write>(mesh: &TruncatedMesh, mut w: W) -> Result<()> {
    header(&mut w, "truncated channel mesh")?;
    points(&mut w, &mesh.nodes)?;
    let tris: Vec<Vec<usize>> = mesh.cells.iter().map(|c| c.to_vec()).collect();
    cells(&mut w, &tris, VTK_TRIANGLE)?;
    Ok(())
}

/// Boundary edges as line cells with their tag codes as cell data.
pub fn write_boundary_vtk<W: Write>(mesh: &TruncatedMesh, mut w: W) -> Result<()> {
    header(&mut w, "truncated channel boundary")?;
    points(&mut w, &mesh.nodes)?;
    let lines: Vec<Vec<usize>> = mesh.boundary.iter().map(|&(e, _)| mesh.edges[e].to_vec()).collect();
    cells(&mut w, &lines, VTK_LINE)?;
    writeln!(w, "CELL_DATA {}", lines.len())?;
    writeln!(w, "SCALARS boundary_tag int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for &(_, tag) in &mesh.boundary {
        writeln!(w, "{}", tag.code())?;
    }
    Ok(())
}

/// The carrier sampled at the mesh vertices.
pub fn write_carrier_vtk<W: Write>(mesh: &TruncatedMesh, carrier: &CarrierField, mut w: W) -> Result<()> {
    header(&mut w, "flux carrier")?;
    points(&mut w, &mesh.nodes)?;
    let tris: Vec<Vec<usize>> = mesh.cells.iter().map(|c| c.to_vec()).collect();
    cells(&mut w, &tris, VTK_TRIANGLE)?;
    writeln!(w, "POINT_DATA {}", mesh.nodes.len())?;
    let g: Vec<[f64; 2]> = mesh.nodes.iter().map(|&x| carrier.eval_unchecked(x).g).collect();
    vectors(&mut w, "carrier", &g)?;
    Ok(())
}

/// Quadratic triangles on all velocity nodes with point data `velocity`
/// (`u = g + v`), `pressure` (linear, interpolated to edge midpoints),
/// `carrier` and `perturbation`.
pub fn write_solution_vtk<W: Write>(bundle: &SolutionBundle, mut w: W) -> Result<()> {
    let layout = &bundle.layout;
    let mesh = &layout.mesh;
    header(&mut w, &format!("steady channel flow, flux {}", bundle.flux()))?;
    points(&mut w, &layout.node_points)?;
    let tris: Vec<Vec<usize>> = layout.cell_nodes.iter().map(|c| c.to_vec()).collect();
    cells(&mut w, &tris, VTK_QUADRATIC_TRIANGLE)?;
    let v = layout.nodal_values(&bundle.perturbation.velocity)?;
    let g: Vec<[f64; 2]> = layout.node_points.iter().map(|&x| bundle.carrier.eval_unchecked(x).g).collect();
    let u: Vec<[f64; 2]> = v.iter().zip(&g).map(|(a, b)| [a[0] + b[0], a[1] + b[1]]).collect();
    let p_vertex = &bundle.perturbation.pressure;
    let mut p = p_vertex.clone();
    p.extend(mesh.edges.iter().map(|e| 0.5 * (p_vertex[e[0]] + p_vertex[e[1]])));
    writeln!(w, "POINT_DATA {}", layout.node_points.len())?;
    vectors(&mut w, "velocity", &u)?;
    scalars(&mut w, "pressure", &p)?;
    vectors(&mut w, "carrier", &g)?;
    vectors(&mut w, "perturbation", &v)?;
    Ok(())
}
