use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};
use nalgebra::{DMatrix, SymmetricEigen};

use crate::discretization::{dot, SparseOperator};
use crate::error::{Error, Result};

/// Sparse Cholesky factor of a symmetric matrix.
pub(crate) struct SpdFactor {
    n: usize,
    llt: Llt<usize, f64>,
}

impl SpdFactor {
    /// `None` when the matrix is not numerically positive definite.
    pub(crate) fn new(a: &SparseOperator) -> Result<Option<Self>> {
        let n = a.nrows;
        let entries: Vec<Triplet<usize, usize, f64>> =
            a.triplets().into_iter().filter(|t| t.0 >= t.1).map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries).map_err(|e| {
            Error::SolverBreakdown { message: format!("sparse matrix construction failed: {e:?}"), residuals: Vec::new() }
        })?;
        match csc.sp_cholesky(Side::Lower) {
            Ok(llt) => Ok(Some(Self { n, llt })),
            Err(faer::sparse::linalg::LltError::Numeric(_)) => Ok(None),
            Err(e) => Err(Error::SolverBreakdown { message: format!("Cholesky failed: {e}"), residuals: Vec::new() }),
        }
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, self.n, 1));
        x
    }
}

/// Largest eigenpair found by [`lanczos_largest`].
#[derive(Clone, Debug, PartialEq)]
pub struct EigenEstimate {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// Ritz value after each step.
    pub history: Vec<f64>,
}

/// Largest eigenvalue of `apply`, assumed self-adjoint and positive
/// semidefinite in the inner product of `inner`.
///
/// Lanczos with full reorthogonalization. Stops when the residual bound
/// `|β_j s_j|` of the top Ritz pair is below `tol·θ`, which bounds the
/// eigenvalue error by `tol²·θ²/gap`.
pub fn lanczos_largest(
    apply: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    inner: &SparseOperator,
    start: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<EigenEstimate> {
    let (est, converged) = lanczos_run(apply, inner, start, tol, max_iter)?;
    if converged {
        Ok(est)
    } else {
        Err(Error::EigenStagnation { iterations: max_iter, history: est.history })
    }
}

/// [`lanczos_largest`] that returns the last Ritz pair with a convergence
/// flag instead of failing when `max_iter` is reached.
pub(crate) fn lanczos_run(
    apply: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    inner: &SparseOperator,
    start: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(EigenEstimate, bool)> {
    let bnorm = |x: &[f64]| dot(x, &inner.matvec(x)).max(0.0).sqrt();
    let n0 = bnorm(&start);
    if !(n0 > 0.0) {
        return Err(Error::DegenerateInput("start vector has zero norm".into()));
    }
    let mut q: Vec<Vec<f64>> = vec![start.iter().map(|x| x / n0).collect()];
    let mut bq: Vec<Vec<f64>> = vec![inner.matvec(&q[0])];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut history = Vec::new();
    for j in 0..max_iter {
        let mut w = apply(&q[j])?;
        let a = dot(&bq[j], &w);
        alpha.push(a);
        for _ in 0..2 {
            for (qi, bqi) in q.iter().zip(&bq) {
                let c = dot(bqi, &w);
                w.iter_mut().zip(qi).for_each(|(wk, qk)| *wk -= c * qk);
            }
        }
        let b = bnorm(&w);
        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (top, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        history.push(theta);
        let s = eig.eigenvectors.column(top);
        let bound = (b * s[k - 1]).abs();
        let exhausted = b <= 1e-14 * theta.abs().max(1e-300);
        let converged = (k >= 3 && bound <= tol * theta.abs()) || exhausted;
        if converged || j + 1 == max_iter {
            let mut vector = vec![0.0; start.len()];
            for (i, qi) in q.iter().enumerate() {
                vector.iter_mut().zip(qi).for_each(|(v, x)| *v += s[i] * x);
            }
            return Ok((EigenEstimate { value: theta, vector, iterations: k, history }, converged));
        }
        beta.push(b);
        let next: Vec<f64> = w.iter().map(|x| x / b).collect();
        bq.push(inner.matvec(&next));
        q.push(next);
    }
    Err(Error::InvalidParameter("Lanczos needs at least one iteration".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::OperatorRole;

    #[test]
    fn diagonal_generalized_problem() {
        // S = diag(1..n) in the inner product diag(2): largest eigenvalue n
        let n = 30;
        let inner = SparseOperator::from_triplets(OperatorRole::Mass, n, n, (0..n).map(|i| (i, i, 2.0)).collect());
        let apply = |x: &[f64]| -> Result<Vec<f64>> { Ok(x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).collect()) };
        let est = lanczos_largest(&apply, &inner, vec![1.0; n], 1e-10, 60).unwrap();
        assert!((est.value - n as f64).abs() < 1e-9);
        let peak = est.vector.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!((est.vector[n - 1].abs() - peak).abs() < 1e-12);
    }
}
