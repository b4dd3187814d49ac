//! The perturbation problem: linearized solves, the damped fixed-point map
//! and the nonlinear weak residual.
//!
//! With `u = g + v` the discrete problem reads
//! `a(v, φ) + c(g; v, φ) + c(v; g, φ) + c(v; v, φ) − (p, div φ) = ℓ(φ)`,
//! `(q, div v) = 0`, where `a` is the viscous form `∫ 2D:D`, `c(b; w, φ) =
//! ∫ (b·∇w)·φ` and `ℓ(φ) = −a(g, φ) − c(g; g, φ)`. The fixed-point map keeps
//! the terms linear in `v` on the left and lags `c(v; v, ·)`.

mod bundle;

use std::sync::{Arc, OnceLock};

pub use bundle::{reconstruct_u, IterationRecord, Reconstruction, SolutionBundle};

use crate::carrier::CarrierField;
use crate::discretization::{
    assemble, build_spaces, carrier_load, column_fluxes, convection_vector, integrate_cells, pressure_mass,
    Advector, CarrierQuadrature, FieldSource, Form, FunctionSpaceLayout, Gauge, MixedField, SaddleSystem,
    SpaceOptions, SparseOperator,
};
use crate::error::{Error, Result};
use crate::geometry::TruncatedMesh;

/// Smallest damping reached by automatic halving.
pub const DAMPING_FLOOR: f64 = 0.125;

/// Controls of the fixed-point iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Threshold on the relative H¹ increment.
    pub picard_tol: f64,
    pub max_iters: usize,
    /// Initial relaxation factor ω.
    pub damping: f64,
    /// Coercivity margin δ the carrier is expected to satisfy.
    pub delta_target: f64,
    /// Iterate with the Oseen linearization `(v^k·∇)v^{k+1}` instead.
    pub oseen: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { picard_tol: 1e-9, max_iters: 50, damping: 1.0, delta_target: 0.25, oseen: false }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.picard_tol > 0.0) {
            problems.push(format!("picard_tol = {} must be positive", self.picard_tol));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            problems.push(format!("damping = {} must lie in (0, 1]", self.damping));
        }
        if self.max_iters == 0 {
            problems.push("max_iters must be at least 1".into());
        }
        if !(self.delta_target > 0.0) {
            problems.push(format!("delta_target = {} must be positive", self.delta_target));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }
}

/// Everything about the perturbation problem that does not depend on `v`.
pub struct Problem {
    pub layout: Arc<FunctionSpaceLayout>,
    pub carrier: CarrierField,
    pub quadrature: CarrierQuadrature,
    pub viscous: SparseOperator,
    pub divergence: SparseOperator,
    /// `∫ v·φ + ∇v:∇φ`
    pub h1: SparseOperator,
    /// `a(·,·) + c(g; ·, ·) + c(·; g, ·)`
    pub linear: SparseOperator,
    pub load: Vec<f64>,
    linear_system: OnceLock<Result<SaddleSystem>>,
    gram_system: OnceLock<Result<SaddleSystem>>,
    load_norm: OnceLock<f64>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("velocity_dofs", &self.layout.velocity_dofs)
            .field("pressure_dofs", &self.layout.pressure_dofs())
            .field("flux", &self.carrier.flux())
            .finish()
    }
}

fn stokes_gauge(layout: &FunctionSpaceLayout) -> Gauge {
    Gauge::Auto(pressure_mass(layout))
}

fn cached(cell: &OnceLock<Result<SaddleSystem>>, build: impl FnOnce() -> Result<SaddleSystem>) -> Result<&SaddleSystem> {
    match cell.get_or_init(build) {
        Ok(s) => Ok(s),
        Err(Error::SolverBreakdown { message, residuals }) => {
            Err(Error::SolverBreakdown { message: message.clone(), residuals: residuals.clone() })
        }
        Err(e) => Err(Error::SolverBreakdown { message: e.to_string(), residuals: Vec::new() }),
    }
}

impl Problem {
    /// Assembles the perturbation problem on `mesh` (slip walls, clamped ends).
    pub fn new(mesh: Arc<TruncatedMesh>, carrier: CarrierField) -> Result<Self> {
        if mesh.geometry != *carrier.geometry() {
            return Err(Error::LayoutMismatch("mesh and carrier use different geometries".into()));
        }
        let layout = Arc::new(build_spaces(mesh, SpaceOptions::default())?);
        Self::with_layout(layout, carrier)
    }

    pub fn with_layout(layout: Arc<FunctionSpaceLayout>, carrier: CarrierField) -> Result<Self> {
        let quadrature = CarrierQuadrature::new(&layout, &carrier);
        let viscous = assemble(&layout, Form::Viscous)?;
        let divergence = assemble(&layout, Form::Divergence)?;
        let mass = assemble(&layout, Form::Mass)?;
        let gradient = assemble(&layout, Form::Gradient)?;
        let h1 = SparseOperator::combine(&[(1.0, &mass), (1.0, &gradient)])?;
        let conv = assemble(&layout, Form::Convection(Advector::Carrier(&quadrature)))?;
        let reac = assemble(&layout, Form::Reaction(Advector::Carrier(&quadrature)))?;
        let linear = SparseOperator::combine(&[(1.0, &viscous), (1.0, &conv), (1.0, &reac)])?;
        let load = carrier_load(&layout, &quadrature)?;
        Ok(Self {
            layout,
            carrier,
            quadrature,
            viscous,
            divergence,
            h1,
            linear,
            load,
            linear_system: OnceLock::new(),
            gram_system: OnceLock::new(),
            load_norm: OnceLock::new(),
        })
    }

    pub fn flux(&self) -> f64 {
        self.carrier.flux()
    }

    fn linear_system(&self) -> Result<&SaddleSystem> {
        cached(&self.linear_system, || {
            SaddleSystem::new(&self.linear, &self.divergence.scaled(-1.0), stokes_gauge(&self.layout))
        })
    }

    fn gram_system(&self) -> Result<&SaddleSystem> {
        cached(&self.gram_system, || SaddleSystem::new(&self.h1, &self.divergence, stokes_gauge(&self.layout)))
    }

    /// `‖v‖_{H¹}` of a dof vector.
    pub fn h1_norm(&self, v: &[f64]) -> f64 {
        self.h1.bilinear(v, v).max(0.0).sqrt()
    }

    /// `(∫ |∇g|² + |g·∇g|²)^{1/2}` over the truncated channel.
    pub fn carrier_size(&self) -> Result<f64> {
        let [s] = integrate_cells(&self.layout, FieldSource::Carrier(&self.carrier), None, |s, _| {
            let g = &s.grad;
            let conv = [g[0][0] * s.value[0] + g[0][1] * s.value[1], g[1][0] * s.value[0] + g[1][1] * s.value[1]];
            [g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2) + conv[0].powi(2) + conv[1].powi(2)]
        })?;
        Ok(s.sqrt())
    }

    /// Dual norm of the load functional, the residual at `v = 0`.
    pub fn load_norm(&self) -> Result<f64> {
        if let Some(n) = self.load_norm.get() {
            return Ok(*n);
        }
        let n = self.dual_norm(&self.load)?;
        Ok(*self.load_norm.get_or_init(|| n))
    }

    /// `sup ⟨r, φ⟩ / ‖φ‖_{H¹}` over discretely divergence-free `φ`.
    pub fn dual_norm(&self, r: &[f64]) -> Result<f64> {
        // ‖z‖ for the Riesz representer z; unlike `r·z` it carries no
        // cancellation from the part of `r` the constraint removes.
        let (z, _) = self.gram_system()?.solve(r, None)?;
        Ok(self.h1_norm(&z))
    }

    /// The map `K`: solves the linearized problem with the extra load
    /// `−c(w; w, ·)` of a frozen velocity `w`.
    pub fn solve_linearized(&self, frozen: Option<&[f64]>) -> Result<MixedField> {
        let mut rhs = self.load.clone();
        if let Some(w) = frozen {
            let n = convection_vector(&self.layout, w)?;
            rhs.iter_mut().zip(&n).for_each(|(r, x)| *r -= x);
        }
        let (velocity, pressure) = self.linear_system()?.solve(&rhs, None)?;
        Ok(MixedField { velocity, pressure })
    }

    /// Oseen step: `(v^k·∇)` kept on the left, no lagged load.
    fn solve_oseen(&self, w: &[f64]) -> Result<MixedField> {
        let conv = assemble(&self.layout, Form::Convection(Advector::Discrete(w)))?;
        let op = SparseOperator::combine(&[(1.0, &self.linear), (1.0, &conv)])?;
        let sys = SaddleSystem::new(&op, &self.divergence.scaled(-1.0), stokes_gauge(&self.layout))?;
        let (velocity, pressure) = sys.solve(&self.load, None)?;
        Ok(MixedField { velocity, pressure })
    }

    /// Nonlinear residual vector of the velocity equation, tested against
    /// discretely divergence-free functions (the pressure drops out).
    pub fn residual_vector(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.linear.matvec(v);
        let n = convection_vector(&self.layout, v)?;
        for ((ri, ni), li) in r.iter_mut().zip(&n).zip(&self.load) {
            *ri += ni - li;
        }
        Ok(r)
    }

    /// Dual norm of the nonlinear residual of `field`.
    pub fn weak_residual(&self, field: &MixedField) -> Result<f64> {
        self.layout.check_velocity(&field.velocity)?;
        self.dual_norm(&self.residual_vector(&field.velocity)?)
    }

    /// Largest column-averaged flux of `v` relative to `max(Φ, 1)`.
    pub fn flux_leak(&self, v: &[f64]) -> Result<f64> {
        let q = column_fluxes(&self.layout, v)?;
        Ok(q.iter().map(|(_, f)| f.abs()).fold(0.0, f64::max) / self.flux().abs().max(1.0))
    }
}

/// Damped fixed-point iteration `v^{k+1} = (1−ω)v^k + ωK(v^k)` from `start`
/// (zero when `None`).
///
/// ω is halved, down to [`DAMPING_FLOOR`], whenever the candidate's residual
/// exceeds the previous one. Converges when the relative H¹ increment is at
/// most `picard_tol` and the weak residual at most `10·picard_tol·‖ℓ‖`.
pub fn picard_solve(problem: &Problem, opts: &SolveOptions, start: Option<&[f64]>) -> Result<SolutionBundle> {
    opts.validate()?;
    let layout = &problem.layout;
    let mut field = MixedField::zeros(layout);
    if let Some(s) = start {
        layout.check_velocity(s)?;
        field.velocity = s.to_vec();
    }
    let load_norm = problem.load_norm()?;
    let mut residual = problem.weak_residual(&field)?;
    let mut history = Vec::new();
    let mut omega = opts.damping;
    for iteration in 1..=opts.max_iters {
        let next = if opts.oseen {
            problem.solve_oseen(&field.velocity)?
        } else {
            problem.solve_linearized(Some(&field.velocity))?
        };
        let (candidate, cand_residual) = loop {
            let c = blend(&field, &next, omega);
            let r = problem.weak_residual(&c)?;
            if r <= residual || omega <= DAMPING_FLOOR {
                break (c, r);
            }
            omega = (0.5 * omega).max(DAMPING_FLOOR);
        };
        let diff: Vec<f64> = candidate.velocity.iter().zip(&field.velocity).map(|(a, b)| a - b).collect();
        let size = problem.h1_norm(&candidate.velocity);
        let step = problem.h1_norm(&diff);
        let increment = if step == 0.0 { 0.0 } else { step / size.max(f64::MIN_POSITIVE) };
        let flux_leak = problem.flux_leak(&candidate.velocity)?;
        history.push(IterationRecord { iteration, increment, residual: cand_residual, damping: omega, flux_leak });
        field = candidate;
        residual = cand_residual;
        if !(increment.is_finite() && residual.is_finite()) {
            return Err(Error::SolverBreakdown {
                message: format!("non-finite iterate at iteration {iteration}"),
                residuals: history.iter().map(|h| h.residual).collect(),
            });
        }
        if increment <= opts.picard_tol && residual <= 10.0 * opts.picard_tol * load_norm.max(f64::MIN_POSITIVE) {
            return SolutionBundle::new(problem, field, history, load_norm);
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iters,
        increments: history.iter().map(|h| h.increment).collect(),
    })
}

fn blend(old: &MixedField, new: &MixedField, omega: f64) -> MixedField {
    if omega == 1.0 {
        return new.clone();
    }
    let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (1.0 - omega) * x + omega * y).collect();
    MixedField { velocity: mix(&old.velocity, &new.velocity), pressure: mix(&old.pressure, &new.pressure) }
}
