use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::decay::log_linear_fit;
use crate::carrier::{default_cutoffs, CarrierField, CarrierParams};
use crate::discretization::{integrate_cells, FieldSource, FunctionSpaceLayout};
use crate::error::{Error, Result};
use crate::geometry::{build_mesh, ChannelGeometry};
use crate::solver::{picard_solve, Problem, SolveOptions};

/// Series whose maximum is at most this are trivial.
pub const TRIVIAL_TOL: f64 = 1e-12;
/// Smallest log-log slope of the normalized tail accepted as bounded away from 0.
pub const GROWTH_SLOPE_TOL: f64 = 0.05;

/// Initial iterate of a probe run.
#[derive(Clone, Debug, PartialEq)]
pub enum ProbeStart {
    Zero,
    /// Uniform random coefficients rescaled to `relative` times the
    /// H¹ norm of the first iterate from zero.
    Random { seed: u64, relative: f64 },
    /// `factor` times the nodal interpolant of the carrier.
    ScaledCarrier(f64),
    Given(Vec<f64>),
}

impl ProbeStart {
    pub fn label(&self) -> String {
        match self {
            ProbeStart::Zero => "zero".into(),
            ProbeStart::Random { seed, relative } => format!("random(seed={seed}, relative={relative})"),
            ProbeStart::ScaledCarrier(f) => format!("scaled_carrier({f})"),
            ProbeStart::Given(_) => "given".into(),
        }
    }

    fn vector(&self, problem: &Problem) -> Result<Vec<f64>> {
        let n = problem.layout.velocity_dofs;
        match self {
            ProbeStart::Zero => Ok(vec![0.0; n]),
            ProbeStart::Random { seed, relative } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let target = relative * problem.h1_norm(&problem.solve_linearized(None)?.velocity);
                let size = problem.h1_norm(&v);
                let s = if size > 0.0 { target / size } else { 0.0 };
                v.iter_mut().for_each(|x| *x *= s);
                Ok(v)
            }
            ProbeStart::ScaledCarrier(f) => {
                Ok(problem.layout.interpolate(&problem.carrier).into_iter().map(|x| f * x).collect())
            }
            ProbeStart::Given(v) => {
                problem.layout.check_velocity(v)?;
                Ok(v.clone())
            }
        }
    }
}

/// Outcome of one start.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeRun {
    pub label: String,
    pub converged: bool,
    pub iterations: usize,
    pub contraction_estimate: f64,
    pub v_h1: f64,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeVerdict {
    Coincide,
    Distinct,
    Inconclusive,
}

impl ProbeVerdict {
    pub fn name(self) -> &'static str {
        match self {
            ProbeVerdict::Coincide => "coincide",
            ProbeVerdict::Distinct => "distinct",
            ProbeVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Comparison of the solutions reached from several starts.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub runs: Vec<ProbeRun>,
    /// Symmetric H¹ distances between converged runs; `NaN` where a run failed.
    pub distances: Vec<Vec<f64>>,
    /// Largest increment ratio over all runs.
    pub contraction_estimate: f64,
    /// Distances up to this count as equal: `10·picard_tol·max(1, ‖v‖_{H¹})`.
    pub threshold: f64,
    /// `(t, y(t))` of the difference of the two most distant converged runs.
    pub growth: Vec<(f64, f64)>,
    /// `max y(t)/t³`
    pub tail_max: f64,
    pub saint_venant: Option<SaintVenantReport>,
    pub verdict: ProbeVerdict,
}

/// `y(t) = ∫ ζ_t |∇w|²` with `ζ_t = 1` on `|x1| ≤ t − 1`, `t − |x1|` on
/// `t − 1 < |x1| < t` and 0 beyond, each piece cut exactly.
pub fn truncated_energy(layout: &FunctionSpaceLayout, w: &[f64], t: f64) -> Result<f64> {
    let half = layout.mesh.x_max;
    let mut total = 0.0;
    let mut piece = |a: f64, b: f64, ramp: Option<f64>| -> Result<()> {
        let (a, b) = (a.max(-half), b.min(half));
        if a < b {
            let [e] = integrate_cells(layout, FieldSource::Discrete(w), Some((a, b)), |s, x| {
                let z = ramp.map_or(1.0, |t| t - x[0].abs());
                [z * s.grad.iter().flatten().map(|g| g * g).sum::<f64>()]
            })?;
            total += e;
        }
        Ok(())
    };
    let inner = (t - 1.0).max(0.0);
    if inner > 0.0 {
        piece(-inner, inner, None)?;
    }
    piece(inner, t, Some(t))?;
    piece(-t, -inner, Some(t))?;
    Ok(total)
}

/// Runs [`picard_solve`] from every start and compares the limits.
///
/// Any failed run makes the verdict inconclusive; the report keeps the data
/// of the runs that converged.
pub fn uniqueness_probe(problem: &Problem, starts: &[ProbeStart], opts: &SolveOptions) -> Result<ProbeReport> {
    if starts.len() < 2 {
        return Err(Error::InvalidParameter("the probe needs at least two starts".into()));
    }
    opts.validate()?;
    let mut runs = Vec::new();
    let mut solutions: Vec<Option<Vec<f64>>> = Vec::new();
    for s in starts {
        let start = s.vector(problem)?;
        match picard_solve(problem, opts, Some(&start)) {
            Ok(b) => {
                runs.push(ProbeRun {
                    label: s.label(),
                    converged: true,
                    iterations: b.iterations(),
                    contraction_estimate: b.contraction_estimate(),
                    v_h1: b.v_h1,
                    error: None,
                });
                solutions.push(Some(b.perturbation.velocity));
            }
            Err(e @ (Error::NonConvergence { .. } | Error::SolverBreakdown { .. })) => {
                let increments = match &e {
                    Error::NonConvergence { increments, .. } => increments.clone(),
                    _ => Vec::new(),
                };
                let contraction = increments
                    .windows(2)
                    .filter(|w| w[0] > 0.0)
                    .map(|w| w[1] / w[0])
                    .fold(0.0, f64::max);
                runs.push(ProbeRun {
                    label: s.label(),
                    converged: false,
                    iterations: increments.len(),
                    contraction_estimate: contraction,
                    v_h1: f64::NAN,
                    error: Some(e.to_string()),
                });
                solutions.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let n = starts.len();
    let mut distances = vec![vec![f64::NAN; n]; n];
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 0..n {
        for j in i..n {
            if let (Some(a), Some(b)) = (&solutions[i], &solutions[j]) {
                let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let dist = problem.h1_norm(&d);
                distances[i][j] = dist;
                distances[j][i] = dist;
                if i != j && worst.is_none_or(|w| dist > w.2) {
                    worst = Some((i, j, dist));
                }
            }
        }
    }
    let size = runs.iter().filter(|r| r.converged).map(|r| r.v_h1).fold(0.0, f64::max);
    let threshold = 10.0 * opts.picard_tol * size.max(1.0);
    let contraction_estimate = runs.iter().map(|r| r.contraction_estimate).fold(0.0, f64::max);
    let half = problem.layout.mesh.x_max;
    let mut growth = Vec::new();
    let mut saint_venant = None;
    if let Some((i, j, _)) = worst {
        let (a, b) = (solutions[i].as_ref().expect("converged"), solutions[j].as_ref().expect("converged"));
        let w: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let mut t = 1.0;
        while t <= half + 1e-12 {
            growth.push((t, truncated_energy(&problem.layout, &w, t)?));
            t += 1.0;
        }
        let (ts, zs): (Vec<f64>, Vec<f64>) = growth.iter().cloned().unzip();
        saint_venant = Some(saint_venant_check(&ts, &zs, 1.5, 1.0, 0.0, 1.0)?);
    }
    let tail_max = growth.iter().map(|(t, y)| y / t.powi(3)).fold(0.0, f64::max);
    let verdict = if runs.iter().any(|r| !r.converged) {
        ProbeVerdict::Inconclusive
    } else if worst.is_none_or(|w| w.2 <= threshold) {
        ProbeVerdict::Coincide
    } else {
        ProbeVerdict::Distinct
    };
    Ok(ProbeReport { runs, distances, contraction_estimate, threshold, growth, tail_max, saint_venant, verdict })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaintVenantVerdict {
    /// `max z ≤` [`TRIVIAL_TOL`].
    Trivial,
    /// `t^{−m/(m−1)} z(t)` stays bounded away from 0 on the tail.
    GrowthBranch,
    /// Neither alternative: `z ≤ c0 (z')^m` must fail somewhere.
    Inconsistent,
}

impl SaintVenantVerdict {
    pub fn name(self) -> &'static str {
        match self {
            SaintVenantVerdict::Trivial => "trivial",
            SaintVenantVerdict::GrowthBranch => "growth_branch",
            SaintVenantVerdict::Inconsistent => "inconsistent",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaintVenantReport {
    pub verdict: SaintVenantVerdict,
    /// `(t, t^{−m/(m−1)} z(t))` for `t ≥ t0`.
    pub normalized_tail: Vec<(f64, f64)>,
    /// Log-log slope of the normalized tail.
    pub tail_slope: Option<f64>,
    /// Grid points with `t ≥ t0`, `z' ≥ tau1` and `z > c0 (z')^m`, or `z' < 0 < z`.
    pub hypothesis_violations: usize,
}

/// Tests the alternative for `z ≤ c0 (z')^m` on sampled data: either `z`
/// vanishes or it grows at least like `t^{m/(m−1)}`.
///
/// `z'` is taken by finite differences on the grid.
pub fn saint_venant_check(t: &[f64], z: &[f64], m: f64, c0: f64, tau1: f64, t0: f64) -> Result<SaintVenantReport> {
    if t.len() != z.len() || t.len() < 2 {
        return Err(Error::InvalidParameter("z needs at least two samples on a grid of the same length".into()));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("the sampling grid is not strictly increasing".into()));
    }
    if !(m > 1.0) || !(c0 > 0.0) {
        return Err(Error::InvalidParameter(format!("need m > 1 and c0 > 0, got m = {m}, c0 = {c0}")));
    }
    if z.iter().any(|z| !(*z >= 0.0)) {
        return Err(Error::Precondition("z must be nonnegative".into()));
    }
    let power = m / (m - 1.0);
    let normalized_tail: Vec<(f64, f64)> =
        t.iter().zip(z).filter(|(t, _)| **t >= t0).map(|(t, z)| (*t, t.powf(-power) * z)).collect();
    let n = t.len();
    let dz: Vec<f64> = (0..n)
        .map(|k| match k {
            0 => (z[1] - z[0]) / (t[1] - t[0]),
            k if k == n - 1 => (z[k] - z[k - 1]) / (t[k] - t[k - 1]),
            k => (z[k + 1] - z[k - 1]) / (t[k + 1] - t[k - 1]),
        })
        .collect();
    let hypothesis_violations = (0..n)
        .filter(|&k| t[k] >= t0 && z[k] > 0.0)
        .filter(|&k| dz[k] < 0.0 || (dz[k] >= tau1 && z[k] > c0 * dz[k].powf(m) * (1.0 + 1e-9)))
        .count();
    if z.iter().cloned().fold(0.0, f64::max) <= TRIVIAL_TOL {
        return Ok(SaintVenantReport {
            verdict: SaintVenantVerdict::Trivial,
            normalized_tail,
            tail_slope: None,
            hypothesis_violations,
        });
    }
    // trend of the later half of the tail in log-log coordinates
    let late = &normalized_tail[normalized_tail.len() / 2..];
    let tail_slope = if late.len() >= 2 && late.iter().all(|p| p.1 > 0.0) {
        let lt: Vec<f64> = late.iter().map(|p| p.0.ln()).collect();
        let ly: Vec<f64> = late.iter().map(|p| p.1).collect();
        log_linear_fit(&lt, &ly).map(|f| -f.rate)
    } else {
        None
    };
    let verdict = if tail_slope.is_some_and(|s| s >= -GROWTH_SLOPE_TOL) {
        SaintVenantVerdict::GrowthBranch
    } else {
        SaintVenantVerdict::Inconsistent
    };
    Ok(SaintVenantReport { verdict, normalized_tail, tail_slope, hypothesis_violations })
}

/// Result of the Φ₀ bisection.
#[derive(Clone, Debug, PartialEq)]
pub struct Phi0Bracket {
    /// Largest flux whose probe coincided.
    pub coincide_max: Option<f64>,
    /// Smallest flux whose probe did not.
    pub other_min: Option<f64>,
    pub evaluations: Vec<(f64, ProbeVerdict)>,
}

/// Setup shared by every probe of the bisection.
#[derive(Clone, Debug)]
pub struct BracketSetup {
    pub geometry: ChannelGeometry,
    pub half_length: f64,
    pub h: f64,
    pub starts: Vec<ProbeStart>,
    pub options: SolveOptions,
}

/// Probe verdict at flux `phi` with the default cutoffs.
pub fn probe_at(setup: &BracketSetup, phi: f64) -> Result<ProbeVerdict> {
    let mesh = Arc::new(build_mesh(&setup.geometry, setup.half_length, setup.h)?);
    let cut = default_cutoffs(&setup.geometry, setup.h).cutoffs;
    let carrier = CarrierField::new(CarrierParams::new(setup.geometry.clone(), phi, cut.epsilon, cut.dist))?;
    let problem = Problem::new(mesh, carrier)?;
    Ok(uniqueness_probe(&problem, &setup.starts, &setup.options)?.verdict)
}

/// Bisection on `Φ ∈ [lo, hi]` over probe verdicts.
pub fn bracket_phi0(setup: &BracketSetup, lo: f64, hi: f64, steps: usize) -> Result<Phi0Bracket> {
    if !(0.0 <= lo && lo < hi) {
        return Err(Error::InvalidInterval { a: lo, b: hi });
    }
    let mut evaluations = Vec::new();
    let mut eval = |phi: f64| -> Result<bool> {
        let v = probe_at(setup, phi)?;
        evaluations.push((phi, v));
        Ok(v == ProbeVerdict::Coincide)
    };
    if !eval(lo)? {
        return Ok(Phi0Bracket { coincide_max: None, other_min: Some(lo), evaluations });
    }
    if eval(hi)? {
        return Ok(Phi0Bracket { coincide_max: Some(hi), other_min: None, evaluations });
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..steps {
        let mid = 0.5 * (a + b);
        if eval(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Phi0Bracket { coincide_max: Some(a), other_min: Some(b), evaluations })
}
