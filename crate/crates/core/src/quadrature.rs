//! Gauss-Legendre rules and vertical-slice integration over triangles.
//!
//! A triangle whose vertices lie on at most three vertical lines is cut into
//! slices `x0 < x1 < x1'` over which its lower and upper edges are linear in
//! `x1`. Each slice is integrated with an outer rule in `x1` and an inner
//! rule along the vertical segment, which integrates polynomials exactly and
//! makes cutting at arbitrary `x1 = a, b` exact as well. The inner rule can
//! be graded towards the upper wall to resolve the carrier layer.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::geometry::ChannelGeometry;

const MAX_RULE: usize = 24;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (&'static [f64], &'static [f64]) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    assert!((1..=MAX_RULE).contains(&n), "Gauss-Legendre order {n} unsupported");
    let rules = RULES.get_or_init(|| (1..=MAX_RULE).map(legendre_rule).collect());
    let (x, w) = &rules[n - 1];
    (x, w)
}

fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Appends the `n`-point rule mapped to `[a, b]`.
pub fn push_interval(a: f64, b: f64, n: usize, out: &mut Vec<(f64, f64)>) {
    if !(b > a) {
        return;
    }
    let (x, w) = gauss_legendre(n);
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    for k in 0..n {
        out.push((c + r * x[k], r * w[k]));
    }
}

/// Composite rule on `[a, b]` split at `breaks` and into panels no longer than `max_panel`.
pub fn composite_rule(a: f64, b: f64, breaks: &[f64], max_panel: f64, n: usize) -> Vec<(f64, f64)> {
    let mut cuts = vec![a];
    cuts.extend(breaks.iter().cloned().filter(|&x| x > a && x < b));
    cuts.push(b);
    cuts.sort_by(|p, q| p.total_cmp(q));
    let mut out = Vec::new();
    for pair in cuts.windows(2) {
        let len = pair[1] - pair[0];
        let panels = (len / max_panel).ceil().max(1.0) as usize;
        for k in 0..panels {
            let lo = pair[0] + len * k as f64 / panels as f64;
            let hi = if k + 1 == panels { pair[1] } else { pair[0] + len * (k + 1) as f64 / panels as f64 };
            push_interval(lo, hi, n, &mut out);
        }
    }
    out
}

/// Quadrature point in physical coordinates.
#[derive(Clone, Copy, Debug)]
pub struct QPoint {
    pub x: [f64; 2],
    pub w: f64,
}

/// Rule along the vertical segment `x2 ∈ [lo, hi]` at abscissa `x1`.
pub trait InnerRule: Sync {
    fn points(&self, x1: f64, lo: f64, hi: f64, out: &mut Vec<(f64, f64)>);
}

/// Gauss-Legendre on the whole segment, split into panels of at most `max_panel`.
#[derive(Clone, Copy, Debug)]
pub struct PlainRule {
    pub n: usize,
    pub max_panel: f64,
}

impl PlainRule {
    pub fn new(n: usize) -> Self {
        Self { n, max_panel: f64::INFINITY }
    }
}

impl InnerRule for PlainRule {
    fn points(&self, _x1: f64, lo: f64, hi: f64, out: &mut Vec<(f64, f64)>) {
        if !(hi > lo) {
            return;
        }
        let panels = ((hi - lo) / self.max_panel).ceil().max(1.0) as usize;
        for k in 0..panels {
            let a = lo + (hi - lo) * k as f64 / panels as f64;
            let b = lo + (hi - lo) * (k + 1) as f64 / panels as f64;
            push_interval(a, b, self.n, out);
        }
    }
}

/// Rule graded towards the upper wall in the distance `t = f2(x1) - x2`.
///
/// The segment is split at the fixed distances `breaks` and geometrically
/// (ratio `ratio`) inside `grade`, so integrands behaving like powers of
/// `1/t` are integrated to near machine precision.
#[derive(Clone, Debug)]
pub struct LayerRule<'a> {
    pub geom: &'a ChannelGeometry,
    pub breaks: Vec<f64>,
    pub grade: Option<(f64, f64)>,
    pub ratio: f64,
    pub n: usize,
    pub max_panel: f64,
}

impl LayerRule<'_> {
    fn distance_cuts(&self, t_lo: f64, t_hi: f64) -> Vec<f64> {
        let mut cuts = vec![t_lo];
        for &b in &self.breaks {
            if b > t_lo && b < t_hi {
                cuts.push(b);
            }
        }
        if let Some((g0, g1)) = self.grade {
            let mut t = g0 * self.ratio;
            while t < g1 {
                if t > t_lo && t < t_hi {
                    cuts.push(t);
                }
                t *= self.ratio;
            }
        }
        cuts.push(t_hi);
        cuts.sort_by(|p, q| p.total_cmp(q));
        cuts.dedup();
        let mut refined = vec![cuts[0]];
        for pair in cuts.windows(2) {
            let len = pair[1] - pair[0];
            let panels = (len / self.max_panel).ceil().max(1.0) as usize;
            for k in 1..=panels {
                refined.push(if k == panels { pair[1] } else { pair[0] + len * k as f64 / panels as f64 });
            }
        }
        refined
    }
}

impl LayerRule<'_> {
    /// Distances at which the inner rule is cut, before panel refinement.
    pub fn levels(&self) -> Vec<f64> {
        let mut out = self.breaks.clone();
        if let Some((g0, g1)) = self.grade {
            let mut t = g0 * self.ratio;
            while t < g1 {
                out.push(t);
                t *= self.ratio;
            }
        }
        out.sort_by(|p, q| p.total_cmp(q));
        out.dedup();
        out
    }

    /// Abscissae where a slanted edge of `tri` crosses a level of the rule.
    ///
    /// Splitting the outer rule there keeps the inner integral smooth in `x1`
    /// when the edge cuts through the graded layer.
    pub fn edge_crossings(&self, tri: [[f64; 2]; 3]) -> Vec<f64> {
        const SAMPLES: usize = 8;
        let levels = self.levels();
        let mut out = Vec::new();
        for k in 0..3 {
            let (p, q) = (tri[k], tri[(k + 1) % 3]);
            if (q[0] - p[0]).abs() <= 1e-14 {
                continue;
            }
            let point = |s: f64| [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            let dist = |s: f64| {
                let x = point(s);
                self.geom.eval_walls(x[0]).f2 - x[1]
            };
            for &b in &levels {
                for i in 0..SAMPLES {
                    let (mut s0, mut s1) = (i as f64 / SAMPLES as f64, (i + 1) as f64 / SAMPLES as f64);
                    let (d0, d1) = (dist(s0) - b, dist(s1) - b);
                    if d0 == 0.0 || d0 * d1 >= 0.0 {
                        continue;
                    }
                    for _ in 0..60 {
                        let m = 0.5 * (s0 + s1);
                        if (dist(m) - b) * d0 > 0.0 {
                            s0 = m;
                        } else {
                            s1 = m;
                        }
                    }
                    out.push(point(0.5 * (s0 + s1))[0]);
                }
            }
        }
        out
    }
}

impl InnerRule for LayerRule<'_> {
    fn points(&self, x1: f64, lo: f64, hi: f64, out: &mut Vec<(f64, f64)>) {
        if !(hi > lo) {
            return;
        }
        let f2 = self.geom.eval_walls(x1).f2;
        let cuts = self.distance_cuts(f2 - hi, f2 - lo);
        for pair in cuts.windows(2) {
            push_interval(f2 - pair[1], f2 - pair[0], self.n, out);
        }
    }
}

/// Integrates `f` over the channel region `a < x1 < b` (exact walls).
///
/// The outer rule is split at `x_breaks`, at the wall breakpoints and into
/// panels of at most `max_panel`; cross-sections use `inner`. Outer nodes are
/// processed in parallel and summed in a fixed order.
#[allow(clippy::too_many_arguments)]
pub fn integrate_region<const K: usize, F>(
    geom: &ChannelGeometry,
    a: f64,
    b: f64,
    x_breaks: &[f64],
    max_panel: f64,
    n_outer: usize,
    inner: &dyn InnerRule,
    f: F,
) -> [f64; K]
where
    F: Fn([f64; 2]) -> [f64; K] + Sync,
{
    let mut breaks = geom.breakpoints();
    breaks.extend_from_slice(x_breaks);
    let outer = composite_rule(a, b, &breaks, max_panel, n_outer);
    let parts: Vec<[f64; K]> = outer
        .par_iter()
        .map(|&(x1, wx)| {
            let w = geom.eval_walls(x1);
            let mut seg = Vec::new();
            inner.points(x1, w.f1, w.f2, &mut seg);
            let mut acc = [0.0; K];
            for &(x2, wy) in &seg {
                let v = f([x1, x2]);
                for k in 0..K {
                    acc[k] += wx * wy * v[k];
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
    total
}

/// Vertical slice of a triangle with linear lower and upper boundaries.
#[derive(Clone, Copy, Debug)]
struct Slice {
    x0: f64,
    x1: f64,
    lo: (f64, f64),
    hi: (f64, f64),
}

fn edge_height(p: [f64; 2], q: [f64; 2], x: f64) -> f64 {
    if q[0] == p[0] {
        return 0.5 * (p[1] + q[1]);
    }
    p[1] + (q[1] - p[1]) * (x - p[0]) / (q[0] - p[0])
}

fn slices(tri: [[f64; 2]; 3]) -> Vec<Slice> {
    let mut v = tri;
    v.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let [a, b, c] = v;
    let mut out = Vec::with_capacity(2);
    // the long edge a-c spans the full range; the short edges a-b and b-c the pieces
    for (p, q) in [(a, b), (b, c)] {
        if q[0] <= p[0] {
            continue;
        }
        let long0 = edge_height(a, c, p[0]);
        let long1 = edge_height(a, c, q[0]);
        let short0 = p[1];
        let short1 = q[1];
        let (lo, hi) = if long0 + long1 <= short0 + short1 {
            ((long0, long1), (short0, short1))
        } else {
            ((short0, short1), (long0, long1))
        };
        out.push(Slice { x0: p[0], x1: q[0], lo, hi });
    }
    out
}

/// Quadrature points for `tri ∩ {window.0 < x1 < window.1}`.
///
/// The outer `x1` rule is split at every value in `x_breaks`.
pub fn triangle_points(
    tri: [[f64; 2]; 3],
    window: (f64, f64),
    x_breaks: &[f64],
    n_outer: usize,
    inner: &dyn InnerRule,
    out: &mut Vec<QPoint>,
) {
    let mut seg = Vec::new();
    for s in slices(tri) {
        let a = s.x0.max(window.0);
        let b = s.x1.min(window.1);
        if !(b > a) {
            continue;
        }
        let outer = composite_rule(a, b, x_breaks, f64::INFINITY, n_outer);
        let span = s.x1 - s.x0;
        for (x1, wx) in outer {
            let theta = (x1 - s.x0) / span;
            let lo = s.lo.0 + theta * (s.lo.1 - s.lo.0);
            let hi = s.hi.0 + theta * (s.hi.1 - s.hi.0);
            seg.clear();
            inner.points(x1, lo, hi, &mut seg);
            for &(x2, wy) in &seg {
                out.push(QPoint { x: [x1, x2], w: wx * wy });
            }
        }
    }
}
