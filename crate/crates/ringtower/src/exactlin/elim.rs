//! Generic Gaussian elimination over an arbitrary exact field.
//!
//! Used directly for prime fields and small rational systems, and as the
//! certified fallback when the modular fast path for `Q` gives up.

use crate::error::{Error, Result};
use crate::field::Field;

use super::{dense_from_sparse, sparse_from_dense, SparseVec};

/// Incremental row-echelon state. Rows are kept with unit leading entry and
/// sorted by pivot column; each inserted row is reduced against the rows
/// already present, so the set stays in echelon form.
pub struct RefState<'f, F: Field> {
    pub field: &'f F,
    pub ncols: usize,
    pub rows: Vec<Vec<F::Elem>>,
    pub pivots: Vec<usize>,
}

impl<'f, F: Field> RefState<'f, F> {
    pub fn new(field: &'f F, ncols: usize) -> Self {
        RefState { field, ncols, rows: Vec::new(), pivots: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduce `v` against the current rows in place.
    pub fn reduce(&self, v: &mut [F::Elem]) {
        let f = self.field;
        for (r, &p) in self.pivots.iter().enumerate() {
            let c = v[p].clone();
            if f.is_zero(&c) {
                continue;
            }
            let row = &self.rows[r];
            for j in p..self.ncols {
                if !f.is_zero(&row[j]) {
                    let t = f.mul(&c, &row[j]);
                    v[j] = f.sub(&v[j], &t);
                }
            }
        }
    }

    /// Reduce and, if nonzero remains, insert as a new pivot row.
    /// Returns the pivot column of the inserted row.
    pub fn insert(&mut self, mut v: Vec<F::Elem>) -> Option<usize> {
        let f = self.field;
        self.reduce(&mut v);
        let lead = v.iter().position(|x| !f.is_zero(x))?;
        let inv = f.inv(&v[lead]).expect("nonzero entry in a field");
        for x in v.iter_mut().skip(lead) {
            *x = f.mul(x, &inv);
        }
        let at = self.pivots.partition_point(|&p| p < lead);
        self.pivots.insert(at, lead);
        self.rows.insert(at, v);
        Some(lead)
    }

    /// Back-eliminate so every pivot column is zero outside its own row.
    pub fn back_reduce(&mut self) {
        let f = self.field;
        for r in (0..self.rows.len()).rev() {
            let p = self.pivots[r];
            let lower = self.rows[r].clone();
            for s in 0..r {
                let c = self.rows[s][p].clone();
                if f.is_zero(&c) {
                    continue;
                }
                for j in p..self.ncols {
                    if !f.is_zero(&lower[j]) {
                        let t = f.mul(&c, &lower[j]);
                        self.rows[s][j] = f.sub(&self.rows[s][j], &t);
                    }
                }
            }
        }
    }

    /// Kernel of the row set viewed as a constraint matrix, one canonical
    /// basis vector per free column (unit there, zero at other free columns).
    /// Requires `back_reduce` to have run.
    pub fn kernel_basis(&self) -> Vec<SparseVec<F::Elem>> {
        let f = self.field;
        let mut is_pivot = vec![false; self.ncols];
        for &p in &self.pivots {
            is_pivot[p] = true;
        }
        let mut out = Vec::new();
        for j in 0..self.ncols {
            if is_pivot[j] {
                continue;
            }
            let mut v: SparseVec<F::Elem> = Vec::new();
            for (r, &p) in self.pivots.iter().enumerate() {
                let c = &self.rows[r][j];
                if !f.is_zero(c) {
                    v.push((p as u32, f.neg(c)));
                }
            }
            v.push((j as u32, f.one()));
            v.sort_by_key(|(i, _)| *i);
            out.push(v);
        }
        out
    }
}

/// Row-reduce a dense matrix to reduced row echelon form, choosing pivots by
/// the field's cost heuristic (smallest numerator/denominator size over `Q`).
/// Returns the reduced nonzero rows and their pivot columns.
pub fn rref_batch<F: Field>(
    f: &F,
    mut rows: Vec<Vec<F::Elem>>,
    ncols: usize,
) -> (Vec<Vec<F::Elem>>, Vec<usize>) {
    let mut pivots: Vec<usize> = Vec::new();
    let mut done = 0usize;
    for col in 0..ncols {
        let mut best: Option<(usize, u64)> = None;
        for r in done..rows.len() {
            if !f.is_zero(&rows[r][col]) {
                let cost = f.pivot_cost(&rows[r][col]);
                if best.map_or(true, |(_, c)| cost < c) {
                    best = Some((r, cost));
                }
            }
        }
        let Some((r, _)) = best else { continue };
        rows.swap(done, r);
        let inv = f.inv(&rows[done][col]).unwrap();
        for j in col..ncols {
            rows[done][j] = f.mul(&rows[done][j], &inv);
        }
        let pivot_row = rows[done].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r == done {
                continue;
            }
            let c = row[col].clone();
            if f.is_zero(&c) {
                continue;
            }
            for j in col..ncols {
                if !f.is_zero(&pivot_row[j]) {
                    let t = f.mul(&c, &pivot_row[j]);
                    row[j] = f.sub(&row[j], &t);
                }
            }
        }
        pivots.push(col);
        done += 1;
        if done == rows.len() {
            break;
        }
    }
    rows.truncate(done);
    (rows, pivots)
}

/// Kernel of a sparse constraint matrix by incremental echelon insertion.
/// Memory stays proportional to rank x ncols regardless of the row count.
pub fn kernel_generic<F: Field>(
    f: &F,
    rows: &[SparseVec<F::Elem>],
    ncols: usize,
    max_cells: usize,
) -> Result<Vec<SparseVec<F::Elem>>> {
    let mut st = RefState::new(f, ncols);
    for row in rows {
        if st.rank().saturating_mul(ncols) > max_cells {
            return Err(Error::CapExceeded(format!(
                "elimination state {} x {ncols} over memory cap",
                st.rank()
            )));
        }
        let dense = dense_from_sparse(f, row, ncols);
        st.insert(dense);
    }
    st.back_reduce();
    Ok(st.kernel_basis())
}

/// Reduced row echelon form of a sparse row set; canonical for the row space.
pub fn rref_generic<F: Field>(
    f: &F,
    rows: &[SparseVec<F::Elem>],
    ncols: usize,
    max_cells: usize,
) -> Result<(Vec<SparseVec<F::Elem>>, Vec<u32>)> {
    let mut st = RefState::new(f, ncols);
    for row in rows {
        if st.rank().saturating_mul(ncols) > max_cells {
            return Err(Error::CapExceeded(format!(
                "elimination state {} x {ncols} over memory cap",
                st.rank()
            )));
        }
        let dense = dense_from_sparse(f, row, ncols);
        st.insert(dense);
    }
    st.back_reduce();
    let pivots: Vec<u32> = st.pivots.iter().map(|&p| p as u32).collect();
    let rows_out = st.rows.iter().map(|r| sparse_from_dense(f, r)).collect();
    Ok((rows_out, pivots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{PrimeField, Rationals};

    #[test]
    fn rref_identity_like() {
        let q = Rationals;
        let rows = vec![
            vec![q.from_i64(2), q.from_i64(0)],
            vec![q.from_i64(1), q.from_i64(1)],
        ];
        let (r, piv) = rref_batch(&q, rows, 2);
        assert_eq!(piv, vec![0, 1]);
        assert_eq!(r[0], vec![q.one(), q.zero()]);
        assert_eq!(r[1], vec![q.zero(), q.one()]);
    }

    #[test]
    fn kernel_of_singular_system() {
        let f = PrimeField::new(5).unwrap();
        // x + 2y + 3z = 0 and x + z = 0 over F5.
        let rows: Vec<SparseVec<u64>> = vec![
            vec![(0, 1), (1, 2), (2, 3)],
            vec![(0, 1), (2, 1)],
        ];
        let ker = kernel_generic(&f, &rows, 3, 1 << 20).unwrap();
        assert_eq!(ker.len(), 1);
        // check the vector satisfies both constraints
        for row in &rows {
            let mut acc = 0u64;
            for (i, c) in row {
                for (j, v) in &ker[0] {
                    if i == j {
                        acc = f.add(&acc, &f.mul(c, v));
                    }
                }
            }
            assert_eq!(acc, 0);
        }
    }
}
