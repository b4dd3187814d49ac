use faer::linalg::solvers::Solve;
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMat, Triplet};
use faer::MatMut;

use super::assembly::pressure_mass;
use super::layout::{FunctionSpaceLayout, MixedField};
use super::sparse::{dot, norm, SparseOperator};
use crate::error::{Error, Result};

/// Relative algebraic residual accepted after refinement.
pub const RESIDUAL_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 3;

/// How the pressure constant is fixed.
#[derive(Clone, Debug, PartialEq)]
pub enum Gauge {
    /// Border the system with `m·p = 0` when the constant pressure lies in
    /// the kernel of `Bᵀ`.
    Auto(Vec<f64>),
    /// Always border with `m·p = 0`.
    Always(Vec<f64>),
    None,
}

/// Factorized block system `[A Bᵀ; B 0]`, optionally bordered by a gauge row.
pub struct SaddleSystem {
    nv: usize,
    np: usize,
    gauge: Option<Vec<f64>>,
    matrix: SparseOperator,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SaddleSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaddleSystem")
            .field("nv", &self.nv)
            .field("np", &self.np)
            .field("gauged", &self.gauge.is_some())
            .finish()
    }
}

impl SaddleSystem {
    /// Factorizes `[A Bᵀ; B 0]`; `b` has one row per multiplier.
    pub fn new(a: &SparseOperator, b: &SparseOperator, gauge: Gauge) -> Result<Self> {
        let nv = a.nrows;
        let np = b.nrows;
        if a.ncols != nv || b.ncols != nv {
            return Err(Error::LayoutMismatch(format!(
                "saddle blocks {}×{} and {}×{} do not match",
                a.nrows, a.ncols, b.nrows, b.ncols
            )));
        }
        let gauge = match gauge {
            Gauge::None => None,
            Gauge::Always(m) => Some(m),
            Gauge::Auto(m) => {
                let ones = vec![1.0; np];
                let bt1 = b.matvec_transpose(&ones);
                let scale = b.max_abs() * (np as f64).sqrt();
                (norm(&bt1) <= 1e-10 * scale).then_some(m)
            }
        };
        if let Some(m) = &gauge {
            if m.len() != np {
                return Err(Error::LayoutMismatch(format!("gauge of length {} for {np} multipliers", m.len())));
            }
        }
        let n = nv + np + usize::from(gauge.is_some());
        let mut t = a.triplets();
        for (r, c, v) in b.triplets() {
            t.push((nv + r, c, v));
            t.push((c, nv + r, v));
        }
        if let Some(m) = &gauge {
            for (i, &w) in m.iter().enumerate() {
                t.push((nv + np, nv + i, w));
                t.push((nv + i, nv + np, w));
            }
        }
        let matrix = SparseOperator::from_triplets(a.role, n, n, t);
        let entries: Vec<Triplet<usize, usize, f64>> =
            matrix.triplets().into_iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries)
            .map_err(|e| breakdown(format!("sparse matrix construction failed: {e:?}"), Vec::new()))?;
        let lu = csc.sp_lu().map_err(|e| match e {
            LuError::SymbolicSingular { index } => {
                breakdown(format!("structurally singular saddle matrix at pivot {index}"), Vec::new())
            }
            LuError::Generic(e) => breakdown(format!("factorization failed: {e:?}"), Vec::new()),
        })?;
        Ok(Self { nv, np, gauge, matrix, lu })
    }

    pub fn velocity_len(&self) -> usize {
        self.nv
    }

    pub fn multiplier_len(&self) -> usize {
        self.np
    }

    pub fn is_gauged(&self) -> bool {
        self.gauge.is_some()
    }

    /// Solves `A v + Bᵀ p = f`, `B v = g`; `g = None` means zero.
    ///
    /// When gauged the multiplier is returned with `m·p = 0`.
    pub fn solve(&self, f: &[f64], g: Option<&[f64]>) -> Result<(Vec<f64>, Vec<f64>)> {
        if f.len() != self.nv || g.is_some_and(|g| g.len() != self.np) {
            return Err(Error::LayoutMismatch("right-hand side length differs from the saddle system".into()));
        }
        let n = self.matrix.nrows;
        let mut rhs = vec![0.0; n];
        rhs[..self.nv].copy_from_slice(f);
        if let Some(g) = g {
            rhs[self.nv..self.nv + self.np].copy_from_slice(g);
        }
        let rhs_norm = norm(&rhs);
        if rhs_norm == 0.0 {
            return Ok((vec![0.0; self.nv], vec![0.0; self.np]));
        }
        let mut x = rhs.clone();
        self.lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
        let mut history = Vec::with_capacity(REFINEMENT_STEPS + 1);
        for step in 0..=REFINEMENT_STEPS {
            let ax = self.matrix.matvec(&x);
            let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let rel = norm(&r) / rhs_norm;
            history.push(rel);
            if !rel.is_finite() {
                return Err(breakdown("non-finite residual (singular or indefinite reduced system)".into(), history));
            }
            if rel <= 1e-14 || step == REFINEMENT_STEPS {
                break;
            }
            self.lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut r, n, 1));
            x.iter_mut().zip(&r).for_each(|(xi, ri)| *xi += ri);
        }
        let last = *history.last().expect("residual");
        if last > RESIDUAL_TOL {
            return Err(breakdown(format!("relative residual {last:.3e} above {RESIDUAL_TOL:.0e}"), history));
        }
        let v = x[..self.nv].to_vec();
        let mut p = x[self.nv..self.nv + self.np].to_vec();
        if let Some(m) = &self.gauge {
            // the bordered solve already gives m·p ≈ 0; remove the rounding
            let total: f64 = m.iter().sum();
            let mean = dot(m, &p) / total;
            p.iter_mut().for_each(|q| *q -= mean);
        }
        Ok((v, p))
    }

    /// Applies the unbordered operator `[A Bᵀ; B 0]`.
    pub fn apply(&self, v: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.matrix.nrows;
        let mut x = vec![0.0; n];
        x[..self.nv].copy_from_slice(v);
        x[self.nv..self.nv + self.np].copy_from_slice(p);
        let y = self.matrix.matvec(&x);
        (y[..self.nv].to_vec(), y[self.nv..self.nv + self.np].to_vec())
    }
}

/// Solves `A v − Dᵀ p = f`, `D v = 0` with `D` the divergence block, so that
/// `p` is the pressure of the weak form `a(v, φ) − (p, div φ)`.
///
/// The pressure is returned with zero mean when its constant is free.
pub fn solve_saddle(
    layout: &FunctionSpaceLayout,
    a: &SparseOperator,
    divergence: &SparseOperator,
    f: &[f64],
) -> Result<MixedField> {
    let sys = SaddleSystem::new(a, &divergence.scaled(-1.0), Gauge::Auto(pressure_mass(layout)))?;
    let (velocity, pressure) = sys.solve(f, None)?;
    Ok(MixedField { velocity, pressure })
}

fn breakdown(message: String, residuals: Vec<f64>) -> Error {
    Error::SolverBreakdown { message, residuals }
}
