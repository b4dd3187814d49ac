use std::sync::Arc;

use super::Problem;
use crate::carrier::{station_flux, CarrierField};
use crate::discretization::{
    column_fluxes, evaluate_norms, integrate_cells, FieldSource, FunctionSpaceLayout, MixedField, NormTable,
};
use crate::error::{Error, Result};
use crate::fields::{VectorField, VectorSample};
use crate::geometry::mesh::barycentric;

/// One accepted fixed-point step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖v^{k+1} − v^k‖_{H¹} / ‖v^{k+1}‖_{H¹}`
    pub increment: f64,
    /// Weak residual of `v^{k+1}`.
    pub residual: f64,
    /// Relaxation factor used for the step.
    pub damping: f64,
    /// Largest column-averaged flux of `v^{k+1}` relative to `max(Φ, 1)`.
    pub flux_leak: f64,
}

/// Converged perturbation with its carrier and iteration record.
#[derive(Clone, Debug)]
pub struct SolutionBundle {
    pub layout: Arc<FunctionSpaceLayout>,
    pub carrier: CarrierField,
    pub perturbation: MixedField,
    pub history: Vec<IterationRecord>,
    /// Weak residual at `v = 0`.
    pub load_norm: f64,
    pub residual: f64,
    /// `‖v‖_{H¹}`
    pub v_h1: f64,
    /// `(∫ |∇g|² + |g·∇g|²)^{1/2}`
    pub carrier_size: f64,
}

impl SolutionBundle {
    pub(super) fn new(
        problem: &Problem,
        perturbation: MixedField,
        history: Vec<IterationRecord>,
        load_norm: f64,
    ) -> Result<Self> {
        let residual = history.last().map_or(0.0, |h| h.residual);
        let v_h1 = problem.h1_norm(&perturbation.velocity);
        Ok(Self {
            layout: problem.layout.clone(),
            carrier: problem.carrier.clone(),
            v_h1,
            carrier_size: problem.carrier_size()?,
            perturbation,
            history,
            load_norm,
            residual,
        })
    }

    pub fn flux(&self) -> f64 {
        self.carrier.flux()
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    /// `‖v‖_{H¹} / (∫ |∇g|² + |g·∇g|²)^{1/2}`, zero for a zero carrier.
    pub fn apriori_quotient(&self) -> f64 {
        if self.carrier_size == 0.0 {
            0.0
        } else {
            self.v_h1 / self.carrier_size
        }
    }

    /// Largest ratio of successive increments (ignoring exact zeros).
    pub fn contraction_estimate(&self) -> f64 {
        self.history
            .windows(2)
            .filter(|w| w[0].increment > 0.0)
            .map(|w| w[1].increment / w[0].increment)
            .fold(0.0, f64::max)
    }

    /// Residual relative to the load, zero when both vanish.
    pub fn relative_residual(&self) -> f64 {
        if self.residual == 0.0 {
            0.0
        } else {
            self.residual / self.load_norm
        }
    }
}

/// `u = g + v` evaluable anywhere in the truncated channel.
#[derive(Clone, Debug)]
pub struct Reconstruction<'a> {
    pub bundle: &'a SolutionBundle,
    nodal: Vec<[f64; 2]>,
}

/// Builds the full-field evaluator of a converged bundle.
pub fn reconstruct_u(bundle: &SolutionBundle) -> Result<Reconstruction<'_>> {
    let nodal = bundle.layout.nodal_values(&bundle.perturbation.velocity)?;
    Ok(Reconstruction { bundle, nodal })
}

impl Reconstruction<'_> {
    fn source(&self) -> FieldSource<'_> {
        FieldSource::CarrierPlus(&self.bundle.carrier, &self.bundle.perturbation.velocity)
    }

    /// The perturbation `v` at `x`.
    pub fn perturbation_at(&self, x: [f64; 2]) -> Result<VectorSample> {
        let layout = &self.bundle.layout;
        let (cell, lambda) = layout
            .mesh
            .locate(x)
            .ok_or(Error::OutsideDomain { x1: x[0], x2: x[1] })?;
        Ok(layout.eval_in_cell(cell, &layout.cell_values(&self.nodal, cell), lambda))
    }

    /// Norms of `u` over `window` with [`Self::station_fluxes`] at `stations`.
    pub fn norms(&self, window: Option<(f64, f64)>, stations: &[f64]) -> Result<NormTable> {
        let mut table = evaluate_norms(&self.bundle.layout, self.source(), window, &[])?;
        table.fluxes = self.station_fluxes(stations)?;
        Ok(table)
    }

    /// Flux of `u` at each station: the carrier's flux through the exact
    /// cross-section plus the column-averaged flux of `v` over the mesh
    /// column containing the station.
    ///
    /// `v` is divergence-free only against the pressure space, so its
    /// pointwise section flux carries an `O(h²)` defect while the column
    /// averages are equal to rounding.
    pub fn station_fluxes(&self, stations: &[f64]) -> Result<Vec<(f64, f64)>> {
        let layout = &self.bundle.layout;
        let columns = column_fluxes(layout, &self.bundle.perturbation.velocity)?;
        stations
            .iter()
            .map(|&x| {
                if x < layout.mesh.x_min || x > layout.mesh.x_max {
                    return Err(Error::Precondition(format!("station {x} outside the mesh")));
                }
                let q = station_flux(&self.bundle.carrier, x) + columns[layout.mesh.column_of(x)].1;
                Ok((x, q))
            })
            .collect()
    }

    /// `(‖u − U‖, ‖∇(u − U)‖)` over `t < |x1| < T`.
    pub fn far_field_deviation(&self, t: f64) -> Result<(f64, f64)> {
        let half = self.bundle.layout.mesh.x_max;
        if !(t >= 0.0 && t < half) {
            return Err(Error::InvalidParameter(format!("far-field cut t = {t} outside [0, {half})")));
        }
        let u_inf = self.bundle.carrier.far_field();
        let mut total = [0.0; 2];
        for w in [(-half, -t), (t, half)] {
            let [a, b] = integrate_cells(&self.bundle.layout, self.source(), Some(w), |s, _| {
                let g = &s.grad;
                [
                    (s.value[0] - u_inf[0]).powi(2) + (s.value[1] - u_inf[1]).powi(2),
                    g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2),
                ]
            })?;
            total[0] += a;
            total[1] += b;
        }
        Ok((total[0].sqrt(), total[1].sqrt()))
    }

    /// Largest `|u·n|` over Gauss points of the wall chords, with `n` the
    /// chord normal.
    pub fn wall_normal_defect(&self) -> f64 {
        let layout = &self.bundle.layout;
        let mesh = &layout.mesh;
        let nv = mesh.nodes.len();
        let mut worst: f64 = 0.0;
        for &(e, tag) in &mesh.boundary {
            if !tag.is_wall() {
                continue;
            }
            let [a, b] = mesh.edges[e];
            let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            let n = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
            let (va, vm, vb) = (self.nodal[a], self.nodal[nv + e], self.nodal[b]);
            for s in [0.0, 0.1127016653792583, 0.5, 0.8872983346207417, 1.0] {
                let (na, nm, nb) = ((1.0 - s) * (1.0 - 2.0 * s), 4.0 * s * (1.0 - s), s * (2.0 * s - 1.0));
                let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                let g = self.bundle.carrier.eval_unchecked(x).g;
                let u = [
                    g[0] + na * va[0] + nm * vm[0] + nb * vb[0],
                    g[1] + na * va[1] + nm * vm[1] + nb * vb[1],
                ];
                worst = worst.max((u[0] * n[0] + u[1] * n[1]).abs());
            }
        }
        worst
    }
}

impl VectorField for Reconstruction<'_> {
    /// `u(x)`; points outside the mesh are extrapolated from the nearest cell.
    fn eval(&self, x: [f64; 2]) -> VectorSample {
        let g = self.bundle.carrier.eval_unchecked(x);
        let mesh = &self.bundle.layout.mesh;
        let i = mesh.column_of(x[0]);
        let (cell, lambda) = mesh.locate(x).unwrap_or_else(|| {
            let c = mesh.column_cells(i).start;
            (c, barycentric(mesh.cell_points(c), x))
        });
        let layout = &self.bundle.layout;
        let v = layout.eval_in_cell(cell, &layout.cell_values(&self.nodal, cell), lambda);
        let mut out = v;
        for k in 0..2 {
            out.value[k] += g.g[k];
            for j in 0..2 {
                out.grad[k][j] += g.grad[k][j];
            }
        }
        out
    }
}
