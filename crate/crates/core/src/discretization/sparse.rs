use std::io::Write;

use crate::error::{Error, Result};

/// Which bilinear form an operator discretizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorRole {
    Mass,
    Gradient,
    Viscous,
    Convection,
    Reaction,
    Divergence,
    Constraint,
    Combined,
}

impl OperatorRole {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mass => "mass",
            Self::Gradient => "gradient",
            Self::Viscous => "viscous",
            Self::Convection => "convection",
            Self::Reaction => "reaction",
            Self::Divergence => "divergence",
            Self::Constraint => "constraint",
            Self::Combined => "combined",
        }
    }
}

/// Compressed sparse row matrix with a role label.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    pub role: OperatorRole,
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseOperator {
    /// Builds from unsorted triplets; duplicates are summed in input order.
    pub fn from_triplets(role: OperatorRole, nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|e| (e.0, e.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().expect("entry") += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self { role, nrows, ncols, indptr, indices, values }
    }

    pub fn zeros(role: OperatorRole, nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(role, nrows, ncols, Vec::new())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                out[c] += v * y[r];
            }
        }
        out
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|`.
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        let mut all = self.triplets();
        all.extend(t.triplets().into_iter().map(|(r, c, v)| (r, c, -v)));
        SparseOperator::from_triplets(self.role, self.nrows, self.ncols, all).max_abs()
    }

    pub fn transpose(&self) -> Self {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.role, self.ncols, self.nrows, t)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `Σ factor·A` over operators of equal shape.
    pub fn combine(parts: &[(f64, &SparseOperator)]) -> Result<Self> {
        let (nrows, ncols) = parts.first().map(|(_, a)| (a.nrows, a.ncols)).unwrap_or((0, 0));
        let mut t = Vec::new();
        for (f, a) in parts {
            if (a.nrows, a.ncols) != (nrows, ncols) {
                return Err(Error::LayoutMismatch(format!(
                    "cannot add a {}×{} {} operator to a {nrows}×{ncols} one",
                    a.nrows,
                    a.ncols,
                    a.role.name()
                )));
            }
            t.extend(a.triplets().into_iter().map(|(r, c, v)| (r, c, f * v)));
        }
        let role = if parts.len() == 1 { parts[0].1.role } else { OperatorRole::Combined };
        Ok(Self::from_triplets(role, nrows, ncols, t))
    }

    /// Coordinate text export: a header line, then `i j value` per entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "% {} {} {} {}", self.role.name(), self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
