//! Quantitative properties of the carrier: the Hardy-type layer estimate and
//! the smallness of `∫ v·∇g·v` relative to `‖∇v‖²`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::field::{CarrierField, CarrierParams};
use crate::error::{Error, Result};
use crate::fields::{ScalarField, StreamField, VectorField};
use crate::geometry::ChannelGeometry;
use crate::quadrature::integrate_region;

const NODES: usize = 10;
const PANEL: f64 = 0.25;

/// `∫ w²|∂2G|² / (Φ²ε² ∫ |∂2w|²)` over `a < x1 < b`.
pub fn hardy_ratio(field: &CarrierField, w: &dyn ScalarField, a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::InvalidInterval { a, b });
    }
    let phi = field.flux();
    if phi == 0.0 {
        return Err(Error::DegenerateInput("the ratio is undefined for zero flux".into()));
    }
    let geom = field.geometry();
    let probe: Vec<(f64, f64, f64)> = (0..=100)
        .map(|k| {
            let x1 = a + (b - a) * k as f64 / 100.0;
            let walls = geom.eval_walls(x1);
            let top = w.eval([x1, walls.f2]).0;
            let inside = (1..10)
                .map(|j| w.eval([x1, walls.f1 + walls.width() * j as f64 / 10.0]).0.abs())
                .fold(0.0, f64::max);
            (x1, top, inside)
        })
        .collect();
    let scale = probe.iter().map(|p| p.2).fold(0.0, f64::max);
    if let Some(p) = probe.iter().find(|p| p.1.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::Precondition(format!(
            "test field is {} on the upper wall at x1 = {}",
            p.1, p.0
        )));
    }
    let rule = field.layer_rule(NODES, PANEL);
    let [num, den] = integrate_region(geom, a, b, &field.x_breakpoints(), PANEL, NODES, &rule, |x| {
        let (value, grad) = w.eval(x);
        let g2 = field.stream_unchecked(x).grad[1];
        [value * value * g2 * g2, grad[1] * grad[1]]
    });
    if den == 0.0 {
        return Err(Error::DegenerateInput("test field vanishes identically".into()));
    }
    let eps = field.epsilon();
    Ok(num / (phi * phi * eps * eps * den))
}

/// Profile `w = ψ(f2(x1) - x2)` adapted to the layer: `ψ(t) = t/√δ` below
/// `δ`, `√t` on `[δ, ε]` and `√ε` beyond. It nearly saturates the Hardy
/// inequality on the logarithmic branch of the cutoff.
#[derive(Clone, Debug)]
pub struct LayerProfile {
    pub geom: ChannelGeometry,
    pub eps: f64,
    pub delta: f64,
}

impl LayerProfile {
    pub fn for_carrier(field: &CarrierField) -> Self {
        Self { geom: field.geometry().clone(), eps: field.epsilon(), delta: field.mu.delta }
    }

    fn profile(&self, t: f64) -> (f64, f64) {
        if t <= self.delta {
            (t / self.delta.sqrt(), 1.0 / self.delta.sqrt())
        } else if t <= self.eps {
            (t.sqrt(), 0.5 / t.sqrt())
        } else {
            (self.eps.sqrt(), 0.0)
        }
    }
}

impl ScalarField for LayerProfile {
    fn eval(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let w = self.geom.eval_walls(x[0]);
        let (p, dp) = self.profile(w.f2 - x[1]);
        (p, [dp * w.df2, -dp])
    }
}

/// `|∫ v·∇g·v| / ‖∇v‖²` over `a < x1 < b`; `v` must vanish outside.
pub fn smallness_ratio(
    field: &CarrierField,
    v: &dyn VectorField,
    a: f64,
    b: f64,
    x_breaks: &[f64],
) -> Result<f64> {
    if !(a < b) {
        return Err(Error::InvalidInterval { a, b });
    }
    let mut breaks = field.x_breakpoints();
    breaks.extend_from_slice(x_breaks);
    let rule = field.layer_rule(NODES, PANEL);
    let [num, den] = integrate_region(field.geometry(), a, b, &breaks, PANEL, NODES, &rule, |x| {
        let s = v.eval(x);
        let g = field.eval_unchecked(x);
        let mut form = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                form += s.value[i] * g.grad[i][j] * s.value[j];
            }
        }
        let grad2: f64 = s.grad.iter().flatten().map(|z| z * z).sum();
        [form, grad2]
    });
    if den == 0.0 {
        return Err(Error::DegenerateInput("velocity field vanishes identically".into()));
    }
    Ok(num.abs() / den)
}

/// Ratio for a [`StreamField`], integrating over its support only.
pub fn stream_smallness_ratio(field: &CarrierField, v: &StreamField) -> Result<f64> {
    let (a, b) = v.support();
    if !(a < b) {
        return Err(Error::DegenerateInput("stream field has no modes".into()));
    }
    smallness_ratio(field, v, a, b, &v.breakpoints())
}

/// One grid point of the certification sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificationPoint {
    pub epsilon: f64,
    pub dist: f64,
    pub max_ratio: f64,
    pub certified: bool,
}

/// Result of [`certify_smallness`].
#[derive(Clone, Debug, PartialEq)]
pub struct Certification {
    pub korn: f64,
    pub threshold: f64,
    pub points: Vec<CertificationPoint>,
    /// Certified point with the largest `ε`, then the smallest `𝔡`.
    pub chosen: Option<(f64, f64)>,
}

impl Certification {
    pub fn point(&self, epsilon: f64, dist: f64) -> Option<&CertificationPoint> {
        self.points.iter().find(|p| p.epsilon == epsilon && p.dist == dist)
    }
}

/// Options of [`certify_smallness`].
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub eps_grid: Vec<f64>,
    pub dist_grid: Vec<f64>,
    pub samples: usize,
    /// Interval in which the random fields are supported.
    pub window: (f64, f64),
    pub seed: u64,
}

/// Random solenoidal slip fields used by the sweep, reproducible from the seed.
pub fn sample_fields(geom: &ChannelGeometry, window: (f64, f64), samples: usize, seed: u64) -> Vec<StreamField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(|_| StreamField::random(geom, window.0, window.1, &mut rng)).collect()
}

/// Grid search for `(ε, 𝔡)` whose worst smallness ratio is at most `𝔠/2`.
pub fn certify_smallness(
    geom: &ChannelGeometry,
    flux: f64,
    korn: f64,
    opts: &SweepOptions,
) -> Result<Certification> {
    if opts.samples == 0 {
        return Err(Error::DegenerateInput("the sweep needs at least one sample field".into()));
    }
    let fields = sample_fields(geom, opts.window, opts.samples, opts.seed);
    let threshold = 0.5 * korn;
    let mut points = Vec::new();
    for &epsilon in &opts.eps_grid {
        for &dist in &opts.dist_grid {
            let carrier = CarrierField::new(CarrierParams::new(geom.clone(), flux, epsilon, dist))?;
            let ratios: Vec<f64> = fields
                .par_iter()
                .map(|v| stream_smallness_ratio(&carrier, v))
                .collect::<Result<_>>()?;
            let max_ratio = ratios.into_iter().fold(0.0, f64::max);
            points.push(CertificationPoint { epsilon, dist, max_ratio, certified: max_ratio <= threshold });
        }
    }
    let chosen = points
        .iter()
        .filter(|p| p.certified)
        .max_by(|p, q| p.epsilon.total_cmp(&q.epsilon).then(q.dist.total_cmp(&p.dist)))
        .map(|p| (p.epsilon, p.dist));
    Ok(Certification { korn, threshold, points, chosen })
}
