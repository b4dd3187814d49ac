//! Manufactured slip solution on the straight channel `|x2| < 1`, `|x1| < T`.
//!
//! `u1 = s cos(πx2)`, `u2 = -s' sin(πx2)/π` with `s = cos²(πx1/(2T))` is
//! solenoidal, tangent to the walls, stress-free there and zero at the ends;
//! `p = sin(πx2/2) cos(πx1/T)` has zero mean. The body force is
//! `f = -Δu + ∇p`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use super::assembly::{assemble, body_force_load, cell_points, Form};
use super::layout::{build_spaces, FunctionSpaceLayout, MixedField, SpaceOptions};
use super::saddle::solve_saddle;
use crate::error::{Error, Result};
use crate::fields::{VectorField, VectorSample};
use crate::geometry::{build_mesh, ChannelGeometry};

/// Half-length of the manufactured-solution channel.
pub const MMS_HALF_LENGTH: f64 = 2.0;

/// Exact fields of the manufactured solution.
#[derive(Clone, Copy, Debug)]
pub struct Manufactured {
    pub half_length: f64,
}

impl Manufactured {
    /// `s`, `s'`, `s''`, `s'''`
    fn profile(&self, x1: f64) -> [f64; 4] {
        let k2 = PI / self.half_length;
        let (sn, cs) = (k2 * x1).sin_cos();
        [0.5 * (1.0 + cs), -0.5 * k2 * sn, -0.5 * k2 * k2 * cs, 0.5 * k2 * k2 * k2 * sn]
    }

    pub fn velocity(&self, x: [f64; 2]) -> VectorSample {
        let [s, s1, s2, _] = self.profile(x[0]);
        let (sn, cs) = (PI * x[1]).sin_cos();
        VectorSample {
            value: [s * cs, -s1 * sn / PI],
            grad: [[s1 * cs, -PI * s * sn], [-s2 * sn / PI, -s1 * cs]],
        }
    }

    pub fn pressure(&self, x: [f64; 2]) -> f64 {
        (0.5 * PI * x[1]).sin() * (PI * x[0] / self.half_length).cos()
    }

    pub fn body_force(&self, x: [f64; 2]) -> [f64; 2] {
        let [s, s1, s2, s3] = self.profile(x[0]);
        let (sn, cs) = (PI * x[1]).sin_cos();
        let k = PI / self.half_length;
        let lap1 = s2 * cs - PI * PI * s * cs;
        let lap2 = -s3 * sn / PI + PI * s1 * sn;
        let dp1 = -k * (0.5 * PI * x[1]).sin() * (k * x[0]).sin();
        let dp2 = 0.5 * PI * (0.5 * PI * x[1]).cos() * (k * x[0]).cos();
        [-lap1 + dp1, -lap2 + dp2]
    }
}

impl VectorField for Manufactured {
    fn eval(&self, x: [f64; 2]) -> VectorSample {
        self.velocity(x)
    }
}

struct Force(Manufactured);

impl VectorField for Force {
    fn eval(&self, x: [f64; 2]) -> VectorSample {
        VectorSample { value: self.0.body_force(x), grad: [[0.0; 2]; 2] }
    }
}

/// Errors at one mesh size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmsLevel {
    pub h: f64,
    pub velocity_dofs: usize,
    /// `‖∇(u - u_h)‖`
    pub velocity_h1: f64,
    /// `‖p - p_h‖`
    pub pressure_l2: f64,
}

/// Errors over a refinement sequence with observed orders between levels.
#[derive(Clone, Debug, PartialEq)]
pub struct MmsStudy {
    pub levels: Vec<MmsLevel>,
    pub velocity_orders: Vec<f64>,
    pub pressure_orders: Vec<f64>,
}

/// Solves the manufactured Stokes problem on `layout`.
pub fn solve_manufactured(layout: &FunctionSpaceLayout, exact: Manufactured) -> Result<MixedField> {
    let a = assemble(layout, Form::Viscous)?;
    let d = assemble(layout, Form::Divergence)?;
    let f = body_force_load(layout, &Force(exact));
    solve_saddle(layout, &a, &d, &f)
}

/// `(‖∇(u - u_h)‖, ‖p - p_h‖)`
pub fn manufactured_errors(layout: &FunctionSpaceLayout, exact: Manufactured, field: &MixedField) -> Result<(f64, f64)> {
    let nodal = layout.nodal_values(&field.velocity)?;
    let parts: Vec<(f64, f64)> = (0..layout.mesh.cells.len())
        .into_par_iter()
        .map(|c| {
            let local = layout.cell_values(&nodal, c);
            let verts = layout.mesh.cells[c];
            let mut acc = (0.0, 0.0);
            for p in cell_points(layout, c, None, None, 7) {
                let uh = layout.eval_in_cell(c, &local, p.lambda);
                let u = exact.velocity(p.x);
                let mut e = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        e += (u.grad[i][j] - uh.grad[i][j]).powi(2);
                    }
                }
                let ph: f64 = (0..3).map(|k| p.lambda[k] * field.pressure[verts[k]]).sum();
                acc.0 += p.w * e;
                acc.1 += p.w * (exact.pressure(p.x) - ph).powi(2);
            }
            acc
        })
        .collect();
    let (eu, ep) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok((eu.sqrt(), ep.sqrt()))
}

/// Runs the manufactured solution on the straight channel for each `h`.
pub fn mms_convergence(hs: &[f64]) -> Result<MmsStudy> {
    if hs.len() < 2 || hs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("mesh sizes must be at least two, strictly decreasing".into()));
    }
    let exact = Manufactured { half_length: MMS_HALF_LENGTH };
    let geom = ChannelGeometry::straight(0.0);
    let mut levels = Vec::with_capacity(hs.len());
    for &h in hs {
        let mesh = build_mesh(&geom, MMS_HALF_LENGTH, h)?;
        let layout = build_spaces(Arc::new(mesh), SpaceOptions::default())?;
        let field = solve_manufactured(&layout, exact)?;
        let (velocity_h1, pressure_l2) = manufactured_errors(&layout, exact, &field)?;
        levels.push(MmsLevel { h, velocity_dofs: layout.velocity_dofs, velocity_h1, pressure_l2 });
    }
    let order = |e: fn(&MmsLevel) -> f64| -> Vec<f64> {
        levels.windows(2).map(|w| (e(&w[0]) / e(&w[1])).ln() / (w[0].h / w[1].h).ln()).collect()
    };
    let velocity_orders = order(|l| l.velocity_h1);
    let pressure_orders = order(|l| l.pressure_l2);
    Ok(MmsStudy { levels, velocity_orders, pressure_orders })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fields_satisfy_the_boundary_conditions() {
        let m = Manufactured { half_length: 2.0 };
        for x1 in [-1.7, -0.3, 0.0, 0.9] {
            for x2 in [-1.0, 1.0] {
                let u = m.velocity([x1, x2]);
                assert!(u.value[1].abs() < 1e-15);
                assert!((u.grad[0][1] + u.grad[1][0]).abs() < 1e-14);
            }
            let u = m.velocity([x1, 0.37]);
            assert!((u.grad[0][0] + u.grad[1][1]).abs() < 1e-15);
        }
        for x2 in [-0.6, 0.2] {
            let u = m.velocity([2.0, x2]);
            assert!(u.value[0].abs() < 1e-15 && u.value[1].abs() < 1e-15);
        }
    }

    #[test]
    fn body_force_matches_finite_differences() {
        let m = Manufactured { half_length: 2.0 };
        let x = [0.41, -0.23];
        let e = 1e-3;
        let lap = |i: usize| {
            let f = |p: [f64; 2]| m.velocity(p).value[i];
            (f([x[0] + e, x[1]]) + f([x[0] - e, x[1]]) + f([x[0], x[1] + e]) + f([x[0], x[1] - e]) - 4.0 * f(x)) / (e * e)
        };
        let dp = [
            (m.pressure([x[0] + e, x[1]]) - m.pressure([x[0] - e, x[1]])) / (2.0 * e),
            (m.pressure([x[0], x[1] + e]) - m.pressure([x[0], x[1] - e])) / (2.0 * e),
        ];
        let f = m.body_force(x);
        for i in 0..2 {
            assert!((f[i] - (-lap(i) + dp[i])).abs() < 1e-5, "component {i}");
        }
    }
}
