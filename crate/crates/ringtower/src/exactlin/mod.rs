//! Exact dense/sparse linear algebra over `Q` and `F_p`: rank, solving,
//! kernels, row reduction and span membership. This is the engine every
//! decision procedure in the crate reduces to.
//!
//! Over the rationals the heavy routines run a modular filter first (row
//! reduction over word-sized primes with delayed reduction), then lift the
//! candidate answer by CRT and rational reconstruction, and finally certify
//! it with exact rational arithmetic. A verdict is only ever reported once
//! the rational certificate checks out, so unlucky primes cost retries,
//! never correctness.

pub mod elim;
pub mod matrix;
pub mod modular;
pub mod span;

pub use matrix::ExactMatrix;
pub use span::{SpanColumns, SpanOpts, SpanOutcome, VecColumns};

use crate::error::Result;
use crate::field::{Field, PrimeField, Rationals};
use crate::Caps;

/// Sparse vector: sorted `(index, value)` pairs with nonzero values.
pub type SparseVec<E> = Vec<(u32, E)>;

/// Field with certified linear-algebra backends. Prime fields eliminate
/// directly; the rationals run the modular filter with exact certification.
pub trait LinField: Field {
    /// Canonical kernel basis of a sparse constraint matrix.
    fn kernel(
        &self,
        rows: &[SparseVec<Self::Elem>],
        ncols: usize,
        caps: &Caps,
    ) -> Result<Vec<SparseVec<Self::Elem>>>;

    /// Canonical reduced row echelon form (rows, pivot columns).
    fn rref(
        &self,
        rows: &[SparseVec<Self::Elem>],
        ncols: usize,
        caps: &Caps,
    ) -> Result<(Vec<SparseVec<Self::Elem>>, Vec<u32>)>;

    /// Span membership with exact certificates either way.
    fn span_solve(
        &self,
        cols: &dyn SpanColumns<Self::Elem>,
        target: &SparseVec<Self::Elem>,
        opts: &SpanOpts,
    ) -> SpanOutcome<Self::Elem>;
}

impl LinField for Rationals {
    fn kernel(
        &self,
        rows: &[SparseVec<Self::Elem>],
        ncols: usize,
        caps: &Caps,
    ) -> Result<Vec<SparseVec<Self::Elem>>> {
        modular::kernel_rational(rows, ncols, caps.max_elim_cells, caps.max_crt_primes)
    }

    fn rref(
        &self,
        rows: &[SparseVec<Self::Elem>],
        ncols: usize,
        caps: &Caps,
    ) -> Result<(Vec<SparseVec<Self::Elem>>, Vec<u32>)> {
        modular::rref_rational(rows, ncols, caps.max_elim_cells, caps.max_crt_primes)
    }

    fn span_solve(
        &self,
        cols: &dyn SpanColumns<Self::Elem>,
        target: &SparseVec<Self::Elem>,
        opts: &SpanOpts,
    ) -> SpanOutcome<Self::Elem> {
        span::span_modular(cols, target, opts)
    }
}

impl LinField for PrimeField {
    fn kernel(
        &self,
        rows: &[SparseVec<Self::Elem>],
        ncols: usize,
        caps: &Caps,
    ) -> Result<Vec<SparseVec<Self::Elem>>> {
        elim::kernel_generic(self, rows, ncols, caps.max_elim_cells)
    }

    fn rref(
        &self,
        rows: &[SparseVec<Self::Elem>],
        ncols: usize,
        caps: &Caps,
    ) -> Result<(Vec<SparseVec<Self::Elem>>, Vec<u32>)> {
        elim::rref_generic(self, rows, ncols, caps.max_elim_cells)
    }

    fn span_solve(
        &self,
        cols: &dyn SpanColumns<Self::Elem>,
        target: &SparseVec<Self::Elem>,
        opts: &SpanOpts,
    ) -> SpanOutcome<Self::Elem> {
        span::span_generic(self, cols, target, opts.max_cells)
    }
}

pub fn sparse_from_dense<F: Field>(f: &F, v: &[F::Elem]) -> SparseVec<F::Elem> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| !f.is_zero(x))
        .map(|(i, x)| (i as u32, x.clone()))
        .collect()
}

pub fn dense_from_sparse<F: Field>(f: &F, v: &SparseVec<F::Elem>, len: usize) -> Vec<F::Elem> {
    let mut out = vec![f.zero(); len];
    for (i, x) in v {
        out[*i as usize] = x.clone();
    }
    out
}

/// `dst += c * src` on a dense vector.
pub fn dense_axpy<F: Field>(f: &F, dst: &mut [F::Elem], c: &F::Elem, src: &SparseVec<F::Elem>) {
    if f.is_zero(c) {
        return;
    }
    for (i, x) in src {
        let t = f.mul(c, x);
        dst[*i as usize] = f.add(&dst[*i as usize], &t);
    }
}

pub fn sparse_dot_dense<F: Field>(f: &F, a: &SparseVec<F::Elem>, b: &[F::Elem]) -> F::Elem {
    let mut acc = f.zero();
    for (i, x) in a {
        acc = f.add(&acc, &f.mul(x, &b[*i as usize]));
    }
    acc
}

pub fn sparse_scale<F: Field>(f: &F, v: &SparseVec<F::Elem>, c: &F::Elem) -> SparseVec<F::Elem> {
    if f.is_zero(c) {
        return Vec::new();
    }
    v.iter().map(|(i, x)| (*i, f.mul(x, c))).collect()
}

/// Sum of scaled sparse vectors, result sparse and sorted.
pub fn sparse_combine<F: Field>(
    f: &F,
    terms: impl IntoIterator<Item = (F::Elem, SparseVec<F::Elem>)>,
    len: usize,
) -> SparseVec<F::Elem> {
    let mut dense = vec![f.zero(); len];
    for (c, v) in terms {
        dense_axpy(f, &mut dense, &c, &v);
    }
    sparse_from_dense(f, &dense)
}
