//! Cutoff functions: the logarithmic wall cutoff `μ` and the axial transition `π`.

use crate::error::{Error, Result};
use crate::quadrature::push_interval;

/// Relative width of the rounding ramp at the outer end `t = ε` of the log branch.
pub const OUTER_ROUNDING: f64 = 0.01;

/// Logarithmic cutoff `μ(t; ε)` in the distance `t` to the upper wall.
///
/// The derivative is prescribed as `-μ'(t) = (ε/t)·ρ(t)` with a window `ρ`
/// equal to 1 on the logarithmic branch `[δ, ε(1 - r)]`, `δ = ε·e^(-1/ε)`,
/// ramping linearly to 0 over `[ε(1 - r), ε]` and over `[δ/(1 + q), δ]`.
/// The inner ramp width `q` is fixed by requiring `∫ -μ' = 1`, so `μ` is
/// exactly 1 on the plateau `t ≤ δ/(1 + q)` and exactly 0 for `t ≥ ε`, is
/// C¹ with bounded `μ''`, and satisfies `-μ'(t)·t ≤ ε` everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct HopfCutoff {
    pub eps: f64,
    /// Start of the logarithmic branch.
    pub delta: f64,
    /// End of the plateau `μ = 1`.
    pub plateau: f64,
    /// Start of the outer rounding ramp.
    pub outer: f64,
    /// Value of `μ` at `t = δ`.
    mu_delta: f64,
    /// Value of `μ` at `t = ε(1 - r)`.
    mu_outer: f64,
}

/// Width parameter `q` of the inner ramp for outer rounding `r`.
///
/// Solves `ln(1 + q)/q = -(1 - r) ln(1 - r)/r`, which makes the total drop of
/// `μ` equal to 1 independently of `ε`.
fn inner_ramp_width(r: f64) -> f64 {
    let target = -(1.0 - r) * (1.0 - r).ln() / r;
    let f = |q: f64| (1.0 + q).ln() / q - target;
    let (mut lo, mut hi) = (1e-12, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl HopfCutoff {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("layer thickness ε = {eps} must lie in (0, 1)")));
        }
        let r = OUTER_ROUNDING;
        let q = inner_ramp_width(r);
        let delta = eps * (-1.0 / eps).exp();
        let plateau = delta / (1.0 + q);
        let outer = eps * (1.0 - r);
        let mu_outer = (-eps * (1.0 - r).ln() - r * eps) / r;
        let mu_delta = mu_outer + eps * (outer / delta).ln();
        Ok(Self { eps, delta, plateau, outer, mu_delta, mu_outer })
    }

    /// Distances at which the piecewise definition changes.
    pub fn breakpoints(&self) -> [f64; 4] {
        [self.plateau, self.delta, self.outer, self.eps]
    }

    /// `(μ, μ', μ'')` for any real `t`; `μ = 1` is continued to `t < 0`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let eps = self.eps;
        if t <= self.plateau {
            (1.0, 0.0, 0.0)
        } else if t < self.delta {
            let span = self.delta - self.plateau;
            let value = self.mu_delta + eps / span * ((self.delta - t) - self.plateau * (self.delta / t).ln());
            let d1 = -eps * (t - self.plateau) / (t * span);
            let d2 = -eps * self.plateau / (span * t * t);
            (value.min(1.0), d1, d2)
        } else if t <= self.outer {
            let value = self.mu_outer + eps * (self.outer / t).ln();
            (value, -eps / t, eps / (t * t))
        } else if t < eps {
            let r = OUTER_ROUNDING;
            let value = (eps * (eps / t).ln() - (eps - t)) / r;
            (value.max(0.0), -(eps - t) / (r * t), eps / (r * t * t))
        } else {
            (0.0, 0.0, 0.0)
        }
    }

    /// Largest value of `-μ'(t)·t/ε`; equals 1 on the logarithmic branch.
    pub fn bound_factor(&self) -> f64 {
        1.0
    }
}

/// `(μ(t), μ'(t))` for `t ≥ 0`.
pub fn mu_cutoff(t: f64, eps: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("wall distance t = {t} must be nonnegative")));
    }
    let (v, d, _) = HopfCutoff::new(eps)?.eval(t);
    Ok((v, d))
}

/// Profile of the axial transition between `5d/4` and `7d/4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransitionKind {
    /// C^{1,1}: triangular derivative, `π' ≤ 4/d` and `|π''| ≤ 16/d²` with equality.
    Triangular,
    /// C^∞: a narrower triangular derivative mollified by a smooth kernel;
    /// bounds hold relaxed by the factor 1.1.
    Smooth,
}

/// Even axial cutoff `π(x1; d)`: 0 for `|x1| ≤ 5d/4`, 1 for `|x1| ≥ 7d/4`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionCutoff {
    pub dist: f64,
    pub kind: TransitionKind,
    /// Half-width of the mollifier (smooth variant only).
    kernel_radius: f64,
    kernel_norm: f64,
}

/// Second-derivative factor of the narrowed triangle, below [`SMOOTH_RELAXATION`].
const SMOOTH_SLOPE_FACTOR: f64 = 1.05;

/// Relaxation factor of the smooth variant's bounds.
pub const SMOOTH_RELAXATION: f64 = 1.1;

fn kernel(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

const KERNEL_NODES: usize = 20;
const KERNEL_PANELS: usize = 8;

impl TransitionCutoff {
    pub fn new(dist: f64, kind: TransitionKind) -> Result<Self> {
        if !(dist > 0.0 && dist.is_finite()) {
            return Err(Error::InvalidParameter(format!("transition offset d = {dist} must be positive")));
        }
        let (kernel_radius, kernel_norm) = match kind {
            TransitionKind::Triangular => (0.0, 1.0),
            TransitionKind::Smooth => {
                // the narrowed triangle of base w has slope 4/w², kept strictly
                // below the relaxed second-derivative bound; the rest is padding
                let w = (4.0 / (16.0 * SMOOTH_SLOPE_FACTOR)).sqrt() * dist;
                let radius = 0.5 * (0.5 * dist - w);
                let mut pts = Vec::new();
                for k in 0..KERNEL_PANELS {
                    let a = -1.0 + 2.0 * k as f64 / KERNEL_PANELS as f64;
                    push_interval(a, a + 2.0 / KERNEL_PANELS as f64, KERNEL_NODES, &mut pts);
                }
                let norm: f64 = pts.iter().map(|&(s, w)| w * kernel(s)).sum();
                (radius, norm)
            }
        };
        Ok(Self { dist, kind, kernel_radius, kernel_norm })
    }

    pub fn triangular(dist: f64) -> Result<Self> {
        Self::new(dist, TransitionKind::Triangular)
    }

    /// Support `[start, end]` of `π'` on the positive half-line.
    pub fn ramp(&self) -> (f64, f64) {
        (1.25 * self.dist, 1.75 * self.dist)
    }

    fn triangle(&self, tau: f64, a: f64, b: f64) -> (f64, f64, f64) {
        let w = b - a;
        let m = 0.5 * (a + b);
        let slope = 4.0 / (w * w);
        if tau <= a {
            (0.0, 0.0, 0.0)
        } else if tau <= m {
            let s = tau - a;
            (0.5 * slope * s * s, slope * s, slope)
        } else if tau < b {
            let s = b - tau;
            (1.0 - 0.5 * slope * s * s, slope * s, -slope)
        } else {
            (1.0, 0.0, 0.0)
        }
    }

    fn profile(&self, tau: f64) -> (f64, f64, f64) {
        let (a, b) = self.ramp();
        match self.kind {
            TransitionKind::Triangular => self.triangle(tau, a, b),
            TransitionKind::Smooth => {
                let r = self.kernel_radius;
                let (ia, ib) = (a + r, b - r);
                if tau <= a {
                    return (0.0, 0.0, 0.0);
                }
                if tau >= b {
                    return (1.0, 0.0, 0.0);
                }
                // convolution with the kernel, split where the integrand has kinks
                let mut cuts = vec![-1.0, 1.0];
                for k in [ia, 0.5 * (ia + ib), ib] {
                    let s = (tau - k) / r;
                    if s > -1.0 && s < 1.0 {
                        cuts.push(s);
                    }
                }
                cuts.sort_by(|p, q| p.total_cmp(q));
                let mut acc = (0.0, 0.0, 0.0);
                let mut pts = Vec::new();
                for pair in cuts.windows(2) {
                    let len = pair[1] - pair[0];
                    for k in 0..KERNEL_PANELS {
                        let lo = pair[0] + len * k as f64 / KERNEL_PANELS as f64;
                        push_interval(lo, lo + len / KERNEL_PANELS as f64, KERNEL_NODES, &mut pts);
                    }
                }
                // normalizing by the discrete mass keeps π a convex combination
                let mass: f64 = pts.iter().map(|&(s, w)| w * kernel(s)).sum();
                for &(s, w) in &pts {
                    let kw = w * kernel(s) / mass;
                    let (v, d1, d2) = self.triangle(tau - r * s, ia, ib);
                    acc.0 += kw * v;
                    acc.1 += kw * d1;
                    acc.2 += kw * d2;
                }
                acc
            }
        }
    }

    /// `(π, π', π'')` at `x1`; `π'` is odd.
    pub fn eval(&self, x1: f64) -> (f64, f64, f64) {
        let (v, d1, d2) = self.profile(x1.abs());
        let sign = if x1 < 0.0 { -1.0 } else { 1.0 };
        (v, sign * d1, d2)
    }

    /// Bounds `(max π', max |π''|)` guaranteed by the construction.
    pub fn derivative_bounds(&self) -> (f64, f64) {
        let d = self.dist;
        match self.kind {
            TransitionKind::Triangular => (4.0 / d, 16.0 / (d * d)),
            TransitionKind::Smooth => (
                SMOOTH_RELAXATION * 4.0 / d,
                SMOOTH_RELAXATION * 16.0 / (d * d),
            ),
        }
    }

    /// Abscissae (positive and negative) where `π` changes analytic form.
    pub fn breakpoints(&self) -> Vec<f64> {
        let d = self.dist;
        let mut b = Vec::new();
        for k in [1.25, 1.5, 1.75] {
            b.push(-k * d);
            b.push(k * d);
        }
        b.sort_by(|p, q| p.total_cmp(q));
        b
    }
}

/// `(π(t), π'(t), π''(t))` for the C^{1,1} transition.
pub fn pi_cutoff(t: f64, d: f64) -> Result<(f64, f64, f64)> {
    Ok(TransitionCutoff::triangular(d)?.eval(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_endpoints() {
        assert_eq!(mu_cutoff(0.0, 0.1).unwrap().0, 1.0);
        assert_eq!(mu_cutoff(0.2, 0.1).unwrap().0, 0.0);
        assert!(matches!(mu_cutoff(-1e-3, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn mu_is_continuous_at_junctions() {
        for eps in [0.45, 0.1, 0.05] {
            let mu = HopfCutoff::new(eps).unwrap();
            for b in mu.breakpoints() {
                let (l, r) = (mu.eval(b * (1.0 - 1e-12)), mu.eval(b * (1.0 + 1e-12)));
                assert!((l.0 - r.0).abs() < 1e-9, "eps {eps} value jump at {b}");
                assert!((l.1 - r.1).abs() < 1e-6 * (eps / b), "eps {eps} slope jump at {b}");
            }
        }
    }

    #[test]
    fn mu_derivative_matches_differences() {
        let mu = HopfCutoff::new(0.3).unwrap();
        for k in 1..400 {
            let t = mu.plateau * 0.5 + (0.32 - mu.plateau * 0.5) * k as f64 / 400.0;
            let h = 1e-7 * t;
            let fd = (mu.eval(t + h).0 - mu.eval(t - h).0) / (2.0 * h);
            assert!((fd - mu.eval(t).1).abs() < 1e-5 * (1.0 + mu.eval(t).1.abs()), "t = {t}");
            let fd2 = (mu.eval(t + h).1 - mu.eval(t - h).1) / (2.0 * h);
            let near_kink = mu.breakpoints().iter().any(|&b| (t - b).abs() < 2.0 * h);
            if !near_kink {
                assert!((fd2 - mu.eval(t).2).abs() < 1e-4 * (1.0 + mu.eval(t).2.abs()), "t = {t}");
            }
        }
    }

    #[test]
    fn pi_examples() {
        assert_eq!(pi_cutoff(0.0, 10.0).unwrap().0, 0.0);
        assert_eq!(pi_cutoff(20.0, 10.0).unwrap().0, 1.0);
        assert!((pi_cutoff(15.0, 10.0).unwrap().1 - 0.4).abs() < 1e-15);
        assert!((pi_cutoff(-15.0, 10.0).unwrap().1 + 0.4).abs() < 1e-15);
    }

    #[test]
    fn smooth_transition_bounds() {
        let d = 3.0;
        let p = TransitionCutoff::new(d, TransitionKind::Smooth).unwrap();
        let (b1, b2) = p.derivative_bounds();
        let mut last = 0.0;
        for k in 0..=2000 {
            let x = 1.2 * d + 0.6 * d * k as f64 / 2000.0;
            let (v, d1, d2) = p.eval(x);
            assert!(v >= last - 1e-12 && v <= 1.0 + 1e-12, "x = {x}: {v} after {last}");
            last = v;
            assert!(d1 >= -1e-12 && d1 <= b1);
            assert!(d2.abs() <= b2, "x = {x}: {d2} > {b2}");
        }
        assert!((p.eval(1.5 * d).0 - 0.5).abs() < 1e-12);
        assert!((p.eval(1.75 * d).0 - 1.0).abs() < 1e-14);
    }
}
