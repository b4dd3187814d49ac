use crate::discretization::{integrate_cells, FieldSource, FunctionSpaceLayout};
use crate::error::{Error, Result};
use crate::fields::VectorSample;
use crate::quadrature::gauss_legendre;
use crate::solver::SolutionBundle;

/// Truncated energies below this on the whole window count as zero.
pub const ZERO_ENERGY: f64 = 1e-14;

fn grad2(s: &VectorSample) -> f64 {
    s.grad.iter().flatten().map(|z| z * z).sum()
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty t grid".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("t grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// `∫ |∇v|²` over `a < x1 < b` weighted by `weight(x1)`, clipped to the mesh.
fn weighted_energy(layout: &FunctionSpaceLayout, v: &[f64], a: f64, b: f64, weight: impl Fn(f64) -> f64 + Sync) -> Result<f64> {
    let (a, b) = (a.max(layout.mesh.x_min), b.min(layout.mesh.x_max));
    if !(a < b) {
        return Ok(0.0);
    }
    let [e] = integrate_cells(layout, FieldSource::Discrete(v), Some((a, b)), |s, x| [weight(x[0]) * grad2(s)])?;
    Ok(e)
}

/// `y⁺(t) = ∫ ζ⁺_t |∇v|²` with `ζ⁺_t` rising linearly from 0 at `t − 1` to 1
/// at `t`; the two pieces are integrated over exactly cut slabs.
pub fn y_plus(layout: &FunctionSpaceLayout, v: &[f64], t: f64) -> Result<f64> {
    let ramp = weighted_energy(layout, v, t - 1.0, t, |x1| x1 - t + 1.0)?;
    let tail = weighted_energy(layout, v, t, f64::INFINITY, |_| 1.0)?;
    Ok(ramp + tail)
}

/// Mirror of [`y_plus`] on the left end.
pub fn y_minus(layout: &FunctionSpaceLayout, v: &[f64], t: f64) -> Result<f64> {
    let ramp = weighted_energy(layout, v, -t, 1.0 - t, |x1| 1.0 - t - x1)?;
    let tail = weighted_energy(layout, v, f64::NEG_INFINITY, -t, |_| 1.0)?;
    Ok(ramp + tail)
}

/// `∫_{E⁺_s} |∇v|²` on the slab `s − 1 < x1 < s`.
fn slab_energy(layout: &FunctionSpaceLayout, v: &[f64], s: f64) -> Result<f64> {
    weighted_energy(layout, v, s - 1.0, s, |_| 1.0)
}

/// `∫_{t1}^{t2} ∫_{E⁺_s} |∇v|² ds`, split where the slab ends cross mesh columns.
fn integrated_slab_energy(layout: &FunctionSpaceLayout, v: &[f64], t1: f64, t2: f64) -> Result<f64> {
    let mut breaks = vec![t1, t2];
    for &c in &layout.mesh.columns {
        for b in [c, c + 1.0] {
            if b > t1 && b < t2 {
                breaks.push(b);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    let (xs, ws) = gauss_legendre(6);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        for (x, wx) in xs.iter().zip(ws) {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * x;
            total += 0.5 * (b - a) * wx * slab_energy(layout, v, s)?;
        }
    }
    Ok(total)
}

/// Least-squares fit `ln y = intercept − rate·t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLinearFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Fits `ln y` against `t` over the points with `y > 0`; needs two of them.
pub fn log_linear_fit(t: &[f64], y: &[f64]) -> Option<LogLinearFit> {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, y)| **y > 0.0).map(|(t, y)| (*t, y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sty / stt;
    let r_squared = if syy == 0.0 { 1.0 } else { sty * sty / (stt * syy) };
    Some(LogLinearFit {
        rate: -slope,
        intercept: my - slope * mt,
        r_squared,
        window: (pts[0].0, pts[pts.len() - 1].0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayVerdict {
    /// `y⁺` below [`ZERO_ENERGY`] on the whole grid.
    ExactZero,
    /// Positive fitted rate.
    Decaying,
    NotDecaying,
}

/// Truncated-energy profile of a perturbation towards both ends.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub t_grid: Vec<f64>,
    pub y_plus: Vec<f64>,
    pub y_minus: Vec<f64>,
    /// Fit of `y⁺`; `None` for an exact-zero profile.
    pub fit: Option<LogLinearFit>,
    pub fit_minus: Option<LogLinearFit>,
    /// `1/rate` of the right-end fit.
    pub c4_empirical: Option<f64>,
    /// `exp(intercept)`: prefactor of `y⁺ ≤ C5 e^{−t/C4}`.
    pub c5_empirical: Option<f64>,
    /// `y⁺` nonincreasing on the grid up to rounding.
    pub monotone: bool,
    /// Largest relative mismatch between `y⁺(t_k) − y⁺(t_{k+1})` and the
    /// integral of `∫_{E⁺}|∇v|²` over `(t_k, t_{k+1})`.
    pub derivative_defect: f64,
    pub verdict: DecayVerdict,
}

/// Evaluates `y⁺`, `y⁻` on `t_grid`, checks `−(y⁺)' = ∫_{E⁺}|∇v|²` in
/// integrated form between grid points and fits the decay rate.
///
/// The grid must lie in `[2𝔡 + 1, T − 1]`.
pub fn decay_profile(bundle: &SolutionBundle, t_grid: &[f64]) -> Result<DecayReport> {
    check_grid(t_grid)?;
    let layout = &bundle.layout;
    let lo = 2.0 * bundle.carrier.dist() + 1.0;
    let hi = layout.mesh.x_max - 1.0;
    if t_grid[0] < lo - 1e-12 || t_grid[t_grid.len() - 1] > hi + 1e-12 {
        return Err(Error::InvalidParameter(format!("t grid must lie in [2𝔡 + 1, T − 1] = [{lo}, {hi}]")));
    }
    let v = &bundle.perturbation.velocity;
    let y_plus: Vec<f64> = t_grid.iter().map(|&t| y_plus(layout, v, t)).collect::<Result<_>>()?;
    let y_minus: Vec<f64> = t_grid.iter().map(|&t| y_minus(layout, v, t)).collect::<Result<_>>()?;
    let scale = y_plus[0].max(f64::MIN_POSITIVE);
    let monotone = y_plus.windows(2).all(|w| w[1] <= w[0] + 1e-12 * scale);
    let mut derivative_defect: f64 = 0.0;
    for (k, w) in t_grid.windows(2).enumerate() {
        let drop = y_plus[k] - y_plus[k + 1];
        let flux = integrated_slab_energy(layout, v, w[0], w[1])?;
        if flux > 0.0 {
            derivative_defect = derivative_defect.max((drop - flux).abs() / flux);
        } else if drop.abs() > 0.0 {
            derivative_defect = f64::INFINITY;
        }
    }
    if y_plus.iter().all(|y| *y < ZERO_ENERGY) {
        return Ok(DecayReport {
            t_grid: t_grid.to_vec(),
            y_plus,
            y_minus,
            fit: None,
            fit_minus: None,
            c4_empirical: None,
            c5_empirical: None,
            monotone,
            derivative_defect,
            verdict: DecayVerdict::ExactZero,
        });
    }
    let fit = log_linear_fit(t_grid, &y_plus);
    let fit_minus = log_linear_fit(t_grid, &y_minus);
    let decaying = fit.is_some_and(|f| f.rate > 0.0);
    Ok(DecayReport {
        t_grid: t_grid.to_vec(),
        c4_empirical: fit.filter(|f| f.rate > 0.0).map(|f| 1.0 / f.rate),
        c5_empirical: fit.map(|f| f.intercept.exp()),
        y_plus,
        y_minus,
        fit,
        fit_minus,
        monotone,
        derivative_defect,
        verdict: if decaying { DecayVerdict::Decaying } else { DecayVerdict::NotDecaying },
    })
}

/// One row of the growth table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthRow {
    pub t: f64,
    /// `‖u‖_{H¹}` on the slab `t − 1 < x1 < t`.
    pub slab_h1: f64,
    /// `‖u‖_{L⁴}` on the same slab.
    pub slab_l4: f64,
    /// `‖∇u‖_{L²}` on `|x1| < t`.
    pub cumulative_grad: f64,
}

/// Growth table of `u = g + v` with the `C6` surrogate.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthReport {
    pub rows: Vec<GrowthRow>,
    /// `max_t ‖∇u‖_{L²(Ω_t)} / (1 + √t)`
    pub c6: f64,
    pub argmax_t: f64,
    /// The maximum is not at the last grid point.
    pub attained_inside: bool,
}

/// Slab norms and cumulative gradient norms of `u` on `t_grid ⊂ (0, T]`.
pub fn growth_profile(bundle: &SolutionBundle, t_grid: &[f64]) -> Result<GrowthReport> {
    check_grid(t_grid)?;
    let layout = &bundle.layout;
    let half = layout.mesh.x_max;
    if t_grid[0] <= 0.0 || t_grid[t_grid.len() - 1] > half + 1e-12 {
        return Err(Error::InvalidParameter(format!("t grid must lie in (0, {half}]")));
    }
    let source = FieldSource::CarrierPlus(&bundle.carrier, &bundle.perturbation.velocity);
    let grad_on = |a: f64, b: f64| -> Result<[f64; 3]> {
        let (a, b) = (a.max(-half), b.min(half));
        if !(a < b) {
            return Ok([0.0; 3]);
        }
        integrate_cells(layout, source, Some((a, b)), |s, _| {
            let m2 = s.value[0] * s.value[0] + s.value[1] * s.value[1];
            [grad2(s), m2, m2 * m2]
        })
    };
    let mut rows = Vec::with_capacity(t_grid.len());
    let mut cumulative = 0.0;
    let mut prev = 0.0;
    for &t in t_grid {
        let [g, m2, m4] = grad_on(t - 1.0, t)?;
        cumulative += grad_on(-t, -prev)?[0] + grad_on(prev, t)?[0];
        prev = t;
        rows.push(GrowthRow {
            t,
            slab_h1: (g + m2).sqrt(),
            slab_l4: m4.powf(0.25),
            cumulative_grad: cumulative.sqrt(),
        });
    }
    let (mut c6, mut arg) = (0.0, 0);
    for (k, r) in rows.iter().enumerate() {
        let q = r.cumulative_grad / (1.0 + r.t.sqrt());
        if q > c6 {
            c6 = q;
            arg = k;
        }
    }
    Ok(GrowthReport { c6, argmax_t: rows[arg].t, attained_inside: arg + 1 < rows.len(), rows })
}
