use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::eigen::{lanczos_largest, lanczos_run, EigenEstimate, SpdFactor};
use crate::discretization::{
    assemble, build_spaces, cell_points, p2_values, pressure_mass, vertical_section, EndCondition, Form,
    FunctionSpaceLayout, Gauge, OperatorRole, SaddleSystem, SpaceOptions, SparseOperator, WallCondition,
};
use crate::error::{Error, Result};
use crate::fields::{ScalarField, StreamField, VectorField};
use crate::geometry::{build_slab_mesh, mesh::barycentric, ChannelGeometry, TruncatedMesh};
use crate::quadrature::{gauss_legendre, integrate_region, PlainRule};

/// Residual tolerance of the Lanczos runs; the eigenvalue error is of its square.
const EIGEN_TOL: f64 = 1e-7;
const EIGEN_MAX_ITER: usize = 400;
const EIGEN_SEED: u64 = 0x5eed;

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Relative width of the bracket that certifies the Korn constant.
pub const KORN_BRACKET: f64 = 1e-9;
const KORN_ITER: usize = 120;

/// Discrete Korn constant of a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct KornEstimate {
    /// `min 2‖D(v)‖² / ‖∇v‖²`, the upper end of `bracket`.
    pub korn_c: f64,
    /// `A − σK` is positive definite at the lower end and not at the upper.
    pub bracket: (f64, f64),
    pub eigen: EigenEstimate,
}

/// `𝔠 = min 2‖D(v)‖²/‖∇v‖²` over the velocity space of `layout`.
///
/// Lanczos on `A⁻¹K` (`A` the strain form, `K` the gradient form) gives a
/// Ritz quotient, an upper bound for `𝔠`. Since `A − σK` is positive
/// definite exactly when `σ < 𝔠`, Cholesky tests then bisect `𝔠` into a
/// bracket of relative width [`KORN_BRACKET`]. This stays sharp when `𝔠`
/// sits at the edge of a dense cluster, as on straight walls, where the
/// Ritz values alone converge slowly. A strain form that is not positive
/// definite means a rigid motion survived the constraints.
pub fn korn_constant(layout: &FunctionSpaceLayout) -> Result<KornEstimate> {
    let a = assemble(layout, Form::Viscous)?;
    let k = assemble(layout, Form::Gradient)?;
    let n = layout.velocity_dofs;
    let fa = SpdFactor::new(&a)?
        .ok_or_else(|| Error::ConstraintLeak("strain form is not positive definite on the constrained space".into()))?;
    let apply = |x: &[f64]| -> Result<Vec<f64>> { Ok(fa.solve(&k.matvec(x))) };
    let (eigen, _) = lanczos_run(&apply, &a, random_vector(n, EIGEN_SEED), EIGEN_TOL, KORN_ITER)?;
    if !(eigen.value.is_finite() && eigen.value > 0.0) || 1.0 / eigen.value <= 1e-12 {
        return Err(Error::ConstraintLeak(format!("Korn quotient minimum {} is not positive", 1.0 / eigen.value)));
    }
    let ritz = 1.0 / eigen.value;
    let definite = |sigma: f64| -> Result<bool> {
        Ok(SpdFactor::new(&SparseOperator::combine(&[(1.0, &a), (-sigma, &k)])?)?.is_some())
    };
    let (mut lo, mut hi) = (ritz * (1.0 - KORN_BRACKET), ritz);
    let mut step = KORN_BRACKET;
    while !definite(lo)? {
        hi = lo;
        step *= 10.0;
        if step >= 1.0 {
            lo = 0.0;
            break;
        }
        lo = ritz * (1.0 - step);
    }
    while hi - lo > KORN_BRACKET * hi {
        let mid = 0.5 * (lo + hi);
        if definite(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(KornEstimate { korn_c: hi, bracket: (lo, hi), eigen })
}

/// Flux functionals `v ↦ ∫ v1 dx2` through the vertical sections at every
/// column line and column midline of the mesh; rows that vanish identically
/// on the space (clamped ends) are dropped.
pub fn section_flux_rows(layout: &FunctionSpaceLayout) -> SparseOperator {
    let mesh = &layout.mesh;
    let mut stations: Vec<f64> = mesh.columns.clone();
    stations.extend(mesh.columns.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    let (xs, ws) = gauss_legendre(3);
    let mut triplets = Vec::new();
    let mut row = 0;
    for &x1 in &stations {
        let col = mesh.column_of(x1);
        let mut entries = Vec::new();
        for c in mesh.column_cells(col) {
            let tri = mesh.cell_points(c);
            let Some((lo, hi)) = vertical_section(tri, x1) else { continue };
            let dofs = layout.local_dofs(c);
            for (xi, wi) in xs.iter().zip(ws) {
                let y = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xi;
                let w = 0.5 * (hi - lo) * wi;
                let n = p2_values(barycentric(tri, [x1, y]));
                for d in &dofs {
                    let coef = w * n[d.node] * d.dir[0];
                    if coef != 0.0 {
                        entries.push((row, d.dof, coef));
                    }
                }
            }
        }
        let scale: f64 = entries.iter().map(|e| e.2.abs()).sum();
        if scale > 1e-12 {
            triplets.extend(entries);
            row += 1;
        }
    }
    SparseOperator::from_triplets(OperatorRole::Divergence, row, layout.velocity_dofs, triplets)
}

/// Discrete Poincaré constant of the zero-flux slip space.
#[derive(Clone, Debug, PartialEq)]
pub struct PoincareEstimate {
    /// `1/√λ_min`
    pub m1: f64,
    /// Smallest eigenvalue of the gradient form against the mass form.
    pub lambda_min: f64,
    pub constraints: usize,
    pub eigen: EigenEstimate,
}

/// `M1 = max ‖v‖/‖∇v‖` over slip fields on `mesh` with zero flux through
/// every column line and midline and the given end condition.
pub fn poincare_constant(mesh: Arc<TruncatedMesh>, ends: EndCondition) -> Result<PoincareEstimate> {
    let layout = build_spaces(mesh, SpaceOptions { ends, ..SpaceOptions::default() })?;
    let mass = assemble(&layout, Form::Mass)?;
    let grad = assemble(&layout, Form::Gradient)?;
    let flux = section_flux_rows(&layout);
    let sys = SaddleSystem::new(&grad, &flux, Gauge::None)?;
    // constrained inverse of the gradient form applied to the mass form;
    // its range lies in the zero-flux subspace
    let apply = |x: &[f64]| -> Result<Vec<f64>> { sys.solve(&mass.matvec(x), None).map(|(y, _)| y) };
    let start = apply(&random_vector(layout.velocity_dofs, EIGEN_SEED))?;
    let eigen = lanczos_largest(&apply, &mass, start, EIGEN_TOL, EIGEN_MAX_ITER)?;
    if !(eigen.value > 0.0) {
        return Err(Error::DegenerateInput("mass form vanishes on the zero-flux space".into()));
    }
    Ok(PoincareEstimate { m1: eigen.value.sqrt(), lambda_min: 1.0 / eigen.value, constraints: flux.nrows, eigen })
}

/// `‖v‖_{L⁴} / ‖∇v‖_{L²}` over `a < x1 < b`; `v` must vanish outside.
pub fn embedding_ratio(geom: &ChannelGeometry, v: &dyn VectorField, a: f64, b: f64, x_breaks: &[f64]) -> Result<f64> {
    if !(a < b) {
        return Err(Error::InvalidInterval { a, b });
    }
    let inner = PlainRule { n: 8, max_panel: 0.25 };
    let [l4, grad] = integrate_region(geom, a, b, x_breaks, 0.125, 8, &inner, |x| {
        let s = v.eval(x);
        let m2 = s.value[0] * s.value[0] + s.value[1] * s.value[1];
        [m2 * m2, s.grad.iter().flatten().map(|z| z * z).sum()]
    });
    if grad == 0.0 {
        return Err(Error::DegenerateInput("sample field vanishes identically".into()));
    }
    Ok(l4.powf(0.25) / grad.sqrt())
}

fn stream_ratio(geom: &ChannelGeometry, v: &StreamField) -> Result<f64> {
    let (a, b) = v.support();
    if !(a < b) {
        return Err(Error::DegenerateInput("sample field has no modes".into()));
    }
    embedding_ratio(geom, v, a, b, &v.breakpoints())
}

/// Best ratio found inside one window.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingWindow {
    pub a: f64,
    pub b: f64,
    pub ratio: f64,
    pub field: StreamField,
}

/// Lower estimate of `M4` from random zero-flux slip fields.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingEstimate {
    /// Largest ratio over all windows; a lower bound for the true constant.
    pub m4: f64,
    pub windows: Vec<EmbeddingWindow>,
}

const ASCENT_STEPS: usize = 24;

/// Maximizes `‖v‖_{L⁴}/‖∇v‖` over random stream-function fields.
///
/// The fields live in windows of length `2^k ≥ 1/2` centered in `(a, b)`;
/// each window draws `samples` fields from a seed fixed by its length and
/// refines the best by random local ascent. Doubling `(a, b)` about its
/// center keeps every window, so the bound cannot decrease.
pub fn embedding_bound(geom: &ChannelGeometry, a: f64, b: f64, samples: usize, seed: u64) -> Result<EmbeddingEstimate> {
    if !(a < b) {
        return Err(Error::InvalidInterval { a, b });
    }
    if samples == 0 {
        return Err(Error::DegenerateInput("no sample fields requested".into()));
    }
    if b - a < 0.5 {
        return Err(Error::InvalidParameter(format!("window length {} below 1/2", b - a)));
    }
    let center = 0.5 * (a + b);
    let mut lengths = Vec::new();
    let mut len = 0.5;
    while len <= b - a {
        lengths.push(len);
        len *= 2.0;
    }
    let windows: Vec<EmbeddingWindow> = lengths
        .par_iter()
        .map(|&len| {
            let (wa, wb) = (center - 0.5 * len, center + 0.5 * len);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ len.to_bits());
            let mut best: Option<(f64, StreamField)> = None;
            for _ in 0..samples {
                let f = StreamField::random(geom, wa, wb, &mut rng);
                let r = stream_ratio(geom, &f)?;
                if best.as_ref().is_none_or(|(br, _)| r > *br) {
                    best = Some((r, f));
                }
            }
            let (mut ratio, mut field) = best.expect("samples > 0");
            let mut step = 0.5;
            for _ in 0..ASCENT_STEPS {
                let cand = perturb(&field, wa, wb, step, &mut rng);
                let r = stream_ratio(geom, &cand)?;
                if r > ratio {
                    ratio = r;
                    field = cand;
                } else {
                    step = (0.7 * step).max(0.02);
                }
            }
            Ok(EmbeddingWindow { a: wa, b: wb, ratio, field })
        })
        .collect::<Result<_>>()?;
    let m4 = windows.iter().map(|w| w.ratio).fold(0.0, f64::max);
    Ok(EmbeddingEstimate { m4, windows })
}

fn perturb(f: &StreamField, a: f64, b: f64, step: f64, rng: &mut ChaCha8Rng) -> StreamField {
    let mut out = f.clone();
    let i = rng.random_range(0..out.modes.len());
    let m = &mut out.modes[i];
    match rng.random_range(0..3) {
        0 => m.amplitude *= 1.0 + step * rng.random_range(-1.0..1.0),
        1 => m.center += step * m.half_width * rng.random_range(-1.0..1.0),
        _ => m.half_width *= 1.0 + step * rng.random_range(-1.0..1.0),
    }
    m.half_width = m.half_width.clamp(0.05, 0.5 * (b - a));
    m.center = m.center.clamp(a + m.half_width, b - m.half_width);
    out
}

/// Minimal-energy solution of the discrete divergence equation.
#[derive(Clone, Debug, PartialEq)]
pub struct BogovskiiSolution {
    pub velocity: Vec<f64>,
    /// `‖∇a‖ / ‖f‖`, zero for `f = 0`.
    pub ratio: f64,
    /// `‖D a − f_h‖ / ‖f_h‖` with `f_h` the load of `f` against the pressure basis.
    pub residual: f64,
}

/// No-slip layout on the slab `c - 1/2 < x1 < c + 1/2`.
pub fn unit_slab_layout(geom: &ChannelGeometry, center: f64, h: f64) -> Result<FunctionSpaceLayout> {
    let mesh = build_slab_mesh(geom, center - 0.5, center + 0.5, h)?;
    build_spaces(
        Arc::new(mesh),
        SpaceOptions { walls: WallCondition::NoSlip, ends: EndCondition::Clamped, ..SpaceOptions::default() },
    )
}

/// `(∫ f, ∫ |f|, ∫ f², ∫ f λ_m)` over the layout's mesh.
fn scalar_moments(layout: &FunctionSpaceLayout, f: &dyn ScalarField) -> (f64, f64, f64, Vec<f64>) {
    let mesh = &layout.mesh;
    let parts: Vec<(f64, f64, f64, [f64; 3])> = (0..mesh.cells.len())
        .into_par_iter()
        .map(|c| {
            let mut acc = (0.0, 0.0, 0.0, [0.0; 3]);
            for p in cell_points(layout, c, None, None, 8) {
                let v = f.eval(p.x).0;
                acc.0 += p.w * v;
                acc.1 += p.w * v.abs();
                acc.2 += p.w * v * v;
                for k in 0..3 {
                    acc.3[k] += p.w * v * p.lambda[k];
                }
            }
            acc
        })
        .collect();
    let mut load = vec![0.0; mesh.nodes.len()];
    let (mut s, mut s_abs, mut s2) = (0.0, 0.0, 0.0);
    for (c, part) in parts.iter().enumerate() {
        s += part.0;
        s_abs += part.1;
        s2 += part.2;
        for k in 0..3 {
            load[mesh.cells[c][k]] += part.3[k];
        }
    }
    (s, s_abs, s2, load)
}

/// Solves `div a = f` in the discrete sense with `a` of least `‖∇a‖`.
///
/// `f` must have zero mean over the mesh to `10⁻¹⁰` relative.
pub fn bogovskii_solve(layout: &FunctionSpaceLayout, f: &dyn ScalarField) -> Result<BogovskiiSolution> {
    let (mean, total, f2, load) = scalar_moments(layout, f);
    if mean.abs() > 1e-10 * total {
        return Err(Error::Precondition(format!("∫f = {mean:.3e} is not zero")));
    }
    let k = assemble(layout, Form::Gradient)?;
    let d = assemble(layout, Form::Divergence)?;
    let sys = SaddleSystem::new(&k, &d, Gauge::Always(pressure_mass(layout)))?;
    let (a, _) = sys.solve(&vec![0.0; layout.velocity_dofs], Some(&load))?;
    let da = d.matvec(&a);
    let load_norm = load.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (ratio, residual) = if f2 == 0.0 {
        (0.0, 0.0)
    } else {
        let defect = da.iter().zip(&load).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        (k.bilinear(&a, &a).max(0.0).sqrt() / f2.sqrt(), defect / load_norm)
    };
    Ok(BogovskiiSolution { velocity: a, ratio, residual })
}

/// Per-instance Bogovskii ratios and their maximum.
#[derive(Clone, Debug, PartialEq)]
pub struct BogovskiiReport {
    pub m5: f64,
    /// `(name, ratio, residual)`
    pub instances: Vec<(String, f64, f64)>,
}

/// A scalar field with its mean over a mesh removed.
pub struct MeanFree<F> {
    pub field: F,
    pub mean: f64,
}

impl<F: ScalarField> ScalarField for MeanFree<F> {
    fn eval(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        let (v, g) = self.field.eval(x);
        (v - self.mean, g)
    }
}

/// Removes the mean of `f` over the mesh of `layout`.
pub fn mean_free<F: ScalarField>(layout: &FunctionSpaceLayout, f: F) -> MeanFree<F> {
    let (s, _, _, _) = scalar_moments(layout, &f);
    MeanFree { mean: s / layout.mesh.area(), field: f }
}

/// Five mean-free test functions on the slab centered at `c`: an odd bump,
/// a wall-normal ramp, a product mode, a localized peak and a corner-heavy
/// polynomial.
pub fn bogovskii_battery(c: f64) -> Vec<(String, Box<dyn ScalarField>)> {
    use crate::fields::FnScalar;
    use std::f64::consts::PI;
    vec![
        (
            "odd_bump".into(),
            Box::new(FnScalar(move |x: [f64; 2]| {
                let s = x[0] - c;
                let b = (1.0 - 4.0 * s * s).max(0.0);
                (s * b * b, [b * b - 16.0 * s * s * b, 0.0])
            })),
        ),
        ("ramp".into(), Box::new(FnScalar(|x: [f64; 2]| (x[1], [0.0, 1.0])))),
        (
            "product_mode".into(),
            Box::new(FnScalar(move |x: [f64; 2]| {
                let (s1, c1) = (2.0 * PI * (x[0] - c)).sin_cos();
                let (s2, c2) = (PI * x[1]).sin_cos();
                (c1 * c2, [-2.0 * PI * s1 * c2, -PI * c1 * s2])
            })),
        ),
        (
            "peak".into(),
            Box::new(FnScalar(move |x: [f64; 2]| {
                let r2 = (x[0] - c - 0.1).powi(2) + (x[1] - 0.3).powi(2);
                let e = (-20.0 * r2).exp();
                (e, [-40.0 * (x[0] - c - 0.1) * e, -40.0 * (x[1] - 0.3) * e])
            })),
        ),
        (
            "corner".into(),
            Box::new(FnScalar(move |x: [f64; 2]| {
                let s = x[0] - c;
                (s * s * x[1] * x[1] * x[1], [2.0 * s * x[1].powi(3), 3.0 * s * s * x[1] * x[1]])
            })),
        ),
    ]
}

/// `M5 = max ‖∇a‖/‖f‖` over the mean-freed battery on the unit slab.
pub fn bogovskii_bound(geom: &ChannelGeometry, center: f64, h: f64) -> Result<BogovskiiReport> {
    let layout = unit_slab_layout(geom, center, h)?;
    let mut instances = Vec::new();
    for (name, f) in bogovskii_battery(center) {
        let g = mean_free(&layout, f);
        let sol = bogovskii_solve(&layout, &g)?;
        instances.push((name, sol.ratio, sol.residual));
    }
    let m5 = instances.iter().map(|i| i.1).fold(0.0, f64::max);
    Ok(BogovskiiReport { m5, instances })
}
