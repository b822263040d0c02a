//! Dense matrices over an exact field, row-major.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::Caps;

use super::elim::rref_batch;
use super::span::{span_generic, SpanOutcome, VecColumns};
use super::{sparse_from_dense, LinField, SparseVec};

#[derive(Clone, Debug, PartialEq)]
pub struct ExactMatrix<F: Field> {
    pub field: F,
    pub rows: usize,
    pub cols: usize,
    entries: Vec<F::Elem>,
}

impl<F: Field> ExactMatrix<F> {
    pub fn zero(field: F, rows: usize, cols: usize) -> Self {
        let entries = vec![field.zero(); rows * cols];
        ExactMatrix { field, rows, cols, entries }
    }

    pub fn identity(field: F, n: usize) -> Self {
        let mut m = Self::zero(field, n, n);
        for i in 0..n {
            let one = m.field.one();
            m.set(i, i, one);
        }
        m
    }

    pub fn from_rows(field: F, data: Vec<Vec<F::Elem>>) -> Result<Self> {
        let rows = data.len();
        let cols = data.first().map_or(0, |r| r.len());
        if data.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Ok(ExactMatrix { field, rows, cols, entries: data.into_iter().flatten().collect() })
    }

    pub fn get(&self, i: usize, j: usize) -> &F::Elem {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: F::Elem) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> &[F::Elem] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[F::Elem] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zero(self.field.clone(), self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = &self.field;
        let mut out = Self::zero(f.clone(), self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if f.is_zero(a) {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !f.is_zero(b) {
                        let t = f.mul(a, b);
                        let cur = out.get(i, j).clone();
                        out.set(i, j, f.add(&cur, &t));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Apply to a column vector.
    pub fn apply(&self, v: &[F::Elem]) -> Result<Vec<F::Elem>> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch("matrix-vector length".into()));
        }
        let f = &self.field;
        let mut out = vec![f.zero(); self.rows];
        for i in 0..self.rows {
            let mut acc = f.zero();
            for j in 0..self.cols {
                let a = self.get(i, j);
                if !f.is_zero(a) && !f.is_zero(&v[j]) {
                    acc = f.add(&acc, &f.mul(a, &v[j]));
                }
            }
            out[i] = acc;
        }
        Ok(out)
    }

    fn dense_rows(&self) -> Vec<Vec<F::Elem>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

impl<F: LinField> ExactMatrix<F> {
    /// Rank over the matrix's field.
    pub fn rank(&self) -> usize {
        let (_, pivots) = rref_batch(&self.field, self.dense_rows(), self.cols);
        pivots.len()
    }

    /// Exact solution of `self * x = rhs`, or `None` when none exists.
    pub fn solve(&self, rhs: &[F::Elem]) -> Result<Option<Vec<F::Elem>>> {
        if rhs.len() != self.rows {
            return Err(Error::ShapeMismatch(format!(
                "rhs length {} for {} rows",
                rhs.len(),
                self.rows
            )));
        }
        let f = &self.field;
        // Solve via span membership of rhs in the column space.
        let cols: Vec<SparseVec<F::Elem>> = (0..self.cols)
            .map(|j| {
                (0..self.rows)
                    .filter(|&i| !f.is_zero(self.get(i, j)))
                    .map(|i| (i as u32, self.get(i, j).clone()))
                    .collect()
            })
            .collect();
        let oracle = VecColumns { len: self.rows, cols };
        let target = sparse_from_dense(f, rhs);
        match span_generic(f, &oracle, &target, usize::MAX) {
            SpanOutcome::Member { coefficients } => {
                let mut x = vec![f.zero(); self.cols];
                for (j, c) in coefficients {
                    x[j as usize] = c;
                }
                Ok(Some(x))
            }
            SpanOutcome::NotMember { .. } => Ok(None),
            SpanOutcome::Inconclusive { reason } => Err(Error::CapExceeded(reason)),
        }
    }

    /// Kernel basis (canonical) of the matrix as a constraint system.
    pub fn kernel(&self, caps: &Caps) -> Result<Vec<Vec<F::Elem>>> {
        let rows: Vec<SparseVec<F::Elem>> =
            (0..self.rows).map(|i| sparse_from_dense(&self.field, self.row(i))).collect();
        let ker = self.field.kernel(&rows, self.cols, caps)?;
        Ok(ker
            .into_iter()
            .map(|v| super::dense_from_sparse(&self.field, &v, self.cols))
            .collect())
    }

    /// Coefficients expressing `target` in the span of `generators`
    /// (matrices of identical shape), or `None` when outside the span.
    pub fn span_membership(
        target: &ExactMatrix<F>,
        generators: &[ExactMatrix<F>],
    ) -> Result<Option<Vec<F::Elem>>> {
        let f = &target.field;
        for g in generators {
            if g.rows != target.rows || g.cols != target.cols {
                return Err(Error::ShapeMismatch("generator shape differs from target".into()));
            }
            if g.field != *f {
                return Err(Error::FieldMismatch("generator field differs".into()));
            }
        }
        let len = target.rows * target.cols;
        let cols: Vec<SparseVec<F::Elem>> =
            generators.iter().map(|g| sparse_from_dense(f, g.entries())).collect();
        let oracle = VecColumns { len, cols };
        let t = sparse_from_dense(f, target.entries());
        match f.span_solve(&oracle, &t, &super::SpanOpts::default()) {
            SpanOutcome::Member { coefficients } => {
                let mut out = vec![f.zero(); generators.len()];
                for (k, c) in coefficients {
                    out[k as usize] = c;
                }
                Ok(Some(out))
            }
            SpanOutcome::NotMember { .. } => Ok(None),
            SpanOutcome::Inconclusive { reason } => Err(Error::CapExceeded(reason)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{PrimeField, Rationals};

    #[test]
    fn rank_of_empty_and_identity() {
        let m = ExactMatrix::zero(Rationals, 0, 0);
        assert_eq!(m.rank(), 0);
        let id = ExactMatrix::identity(Rationals, 5);
        assert_eq!(id.rank(), 5);
    }

    #[test]
    fn solve_identity_and_zero() {
        let q = Rationals;
        let id = ExactMatrix::identity(q, 3);
        let b = vec![q.from_i64(4), q.from_i64(-1), q.from_i64(7)];
        assert_eq!(id.solve(&b).unwrap().unwrap(), b);

        let z = ExactMatrix::zero(q, 2, 2);
        let b2 = vec![q.from_i64(1), q.zero()];
        assert!(z.solve(&b2).unwrap().is_none());
    }

    #[test]
    fn span_membership_diagonal() {
        let q = Rationals;
        let mut e11 = ExactMatrix::zero(q, 2, 2);
        e11.set(0, 0, q.one());
        let mut e22 = ExactMatrix::zero(q, 2, 2);
        e22.set(1, 1, q.one());
        let id = ExactMatrix::identity(q, 2);
        let c = ExactMatrix::span_membership(&id, &[e11.clone(), e22.clone()]).unwrap().unwrap();
        assert_eq!(c, vec![q.one(), q.one()]);
        // target = generators[0]
        let c0 = ExactMatrix::span_membership(&e11, &[e11.clone(), e22]).unwrap().unwrap();
        assert_eq!(c0, vec![q.one(), q.zero()]);
    }

    #[test]
    fn rank_transpose_fp() {
        let f = PrimeField::new(13).unwrap();
        let m = ExactMatrix::from_rows(
            f,
            vec![vec![1, 2, 3], vec![4, 5, 6], vec![5, 7, 9]],
        )
        .unwrap();
        assert_eq!(m.rank(), 2);
        assert_eq!(m.transpose().rank(), 2);
    }
}
