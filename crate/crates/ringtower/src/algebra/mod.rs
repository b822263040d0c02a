//! Finite-dimensional unital algebras via structure constants, embeddings,
//! and towers `C -> B -> A`.
//!
//! Structure constants are stored sparsely (group algebras and the basic
//! constructions built from them are monomial), and every constructor audits
//! the ring axioms it claims: associativity on basis triples, two-sided
//! unitality, injective unital multiplicative embeddings.

pub mod bimodule;

pub use bimodule::{
    bimodule_hom, centralizer, one_sided_endos, tensor_over, Bimodule, TensorProduct,
};

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::exactlin::{dense_from_sparse, sparse_from_dense, LinField, SparseVec};
use crate::field::Field;
use crate::groups::PermGroup;
use crate::Caps;

pub type Alg<F> = Arc<FinDimAlgebra<F>>;

/// Column-sparse matrix: `cols[j]` is the image of basis vector `j`.
pub type SparseMat<E> = Vec<SparseVec<E>>;

/// Full audit threshold: associativity is checked on every basis triple up
/// to this dimension, and on a deterministic sample plus all generator
/// triples above it.
const FULL_AUDIT_DIM: usize = 220;

/// A finite-dimensional unital associative algebra with a distinguished
/// basis and sparse structure constants.
pub struct FinDimAlgebra<F: Field> {
    pub field: F,
    pub dim: usize,
    pub labels: Vec<String>,
    /// coordinates of the identity element
    pub unit: Vec<F::Elem>,
    /// `mult[i * dim + j]` = coordinates of `b_i * b_j`
    mult: Vec<SparseVec<F::Elem>>,
    /// elements generating the algebra together with the unit
    pub gens: Vec<Vec<F::Elem>>,
}

impl<F: Field> std::fmt::Debug for FinDimAlgebra<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FinDimAlgebra(dim {}, field {})", self.dim, self.field.spec())
    }
}

impl<F: Field> FinDimAlgebra<F> {
    pub fn new(
        field: F,
        labels: Vec<String>,
        unit: Vec<F::Elem>,
        mult: Vec<SparseVec<F::Elem>>,
        gens: Vec<Vec<F::Elem>>,
    ) -> Result<Alg<F>> {
        let dim = labels.len();
        if unit.len() != dim || mult.len() != dim * dim {
            return Err(Error::ShapeMismatch("structure constant table size".into()));
        }
        let alg = FinDimAlgebra { field, dim, labels, unit, mult, gens };
        alg.audit()?;
        Ok(Arc::new(alg))
    }

    pub fn basis_product(&self, i: usize, j: usize) -> &SparseVec<F::Elem> {
        &self.mult[i * self.dim + j]
    }

    pub fn basis_vector(&self, i: usize) -> Vec<F::Elem> {
        let mut v = vec![self.field.zero(); self.dim];
        v[i] = self.field.one();
        v
    }

    pub fn mul_dense(&self, x: &[F::Elem], y: &[F::Elem]) -> Vec<F::Elem> {
        let f = &self.field;
        let mut out = vec![f.zero(); self.dim];
        for (i, xi) in x.iter().enumerate() {
            if f.is_zero(xi) {
                continue;
            }
            for (j, yj) in y.iter().enumerate() {
                if f.is_zero(yj) {
                    continue;
                }
                let c = f.mul(xi, yj);
                for (k, m) in self.basis_product(i, j) {
                    let t = f.mul(&c, m);
                    out[*k as usize] = f.add(&out[*k as usize], &t);
                }
            }
        }
        out
    }

    /// Matrix of left multiplication by `x` (columns indexed by basis).
    pub fn left_mult_matrix(&self, x: &[F::Elem]) -> SparseMat<F::Elem> {
        let f = &self.field;
        (0..self.dim)
            .map(|j| {
                let mut col = vec![f.zero(); self.dim];
                for (i, xi) in x.iter().enumerate() {
                    if f.is_zero(xi) {
                        continue;
                    }
                    for (k, m) in self.basis_product(i, j) {
                        let t = f.mul(xi, m);
                        col[*k as usize] = f.add(&col[*k as usize], &t);
                    }
                }
                sparse_from_dense(f, &col)
            })
            .collect()
    }

    /// Matrix of right multiplication by `x`.
    pub fn right_mult_matrix(&self, x: &[F::Elem]) -> SparseMat<F::Elem> {
        let f = &self.field;
        (0..self.dim)
            .map(|j| {
                let mut col = vec![f.zero(); self.dim];
                for (i, xi) in x.iter().enumerate() {
                    if f.is_zero(xi) {
                        continue;
                    }
                    for (k, m) in self.basis_product(j, i) {
                        let t = f.mul(xi, m);
                        col[*k as usize] = f.add(&col[*k as usize], &t);
                    }
                }
                sparse_from_dense(f, &col)
            })
            .collect()
    }

    pub fn is_commutative(&self) -> bool {
        for i in 0..self.dim {
            for j in 0..i {
                if self.basis_product(i, j) != self.basis_product(j, i) {
                    return false;
                }
            }
        }
        true
    }

    /// The opposite algebra on the same basis.
    pub fn opposite(&self) -> Alg<F> {
        let mut mult = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                mult.push(self.basis_product(j, i).clone());
            }
        }
        Arc::new(FinDimAlgebra {
            field: self.field.clone(),
            dim: self.dim,
            labels: self.labels.clone(),
            unit: self.unit.clone(),
            mult,
            gens: self.gens.clone(),
        })
    }

    fn audit(&self) -> Result<()> {
        let f = &self.field;
        let dim = self.dim;
        for i in 0..dim {
            let b = self.basis_vector(i);
            if self.mul_dense(&self.unit, &b) != b || self.mul_dense(&b, &self.unit) != b {
                return Err(Error::AuditFailed(format!("unit fails on basis element {i}")));
            }
        }
        let collect = |terms: &mut SparseVec<F::Elem>| {
            terms.sort_by_key(|(t, _)| *t);
            let mut merged: SparseVec<F::Elem> = Vec::with_capacity(terms.len());
            for (t, c) in terms.drain(..) {
                match merged.last_mut() {
                    Some((last, acc)) if *last == t => *acc = f.add(acc, &c),
                    _ => merged.push((t, c)),
                }
            }
            merged.retain(|(_, c)| !f.is_zero(c));
            merged
        };
        let check = |i: usize, j: usize, k: usize| -> bool {
            let mut lhs: SparseVec<F::Elem> = Vec::new();
            for (m, c) in self.basis_product(i, j) {
                for (t, d) in self.basis_product(*m as usize, k) {
                    lhs.push((*t, f.mul(c, d)));
                }
            }
            let mut rhs: SparseVec<F::Elem> = Vec::new();
            for (m, c) in self.basis_product(j, k) {
                for (t, d) in self.basis_product(i, *m as usize) {
                    rhs.push((*t, f.mul(c, d)));
                }
            }
            collect(&mut lhs) == collect(&mut rhs)
        };
        if dim <= FULL_AUDIT_DIM {
            for i in 0..dim {
                for j in 0..dim {
                    for k in 0..dim {
                        if !check(i, j, k) {
                            return Err(Error::AuditFailed(format!(
                                "associativity fails at basis triple ({i},{j},{k})"
                            )));
                        }
                    }
                }
            }
        } else {
            let mut state = 0x5eed ^ dim as u64;
            let mut next = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 33) as usize
            };
            for _ in 0..200_000 {
                let (i, j, k) = (next() % dim, next() % dim, next() % dim);
                if !check(i, j, k) {
                    return Err(Error::AuditFailed(format!(
                        "associativity fails at basis triple ({i},{j},{k})"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl<F: LinField> FinDimAlgebra<F> {
    /// Check that the recorded generators, together with the unit, span the
    /// algebra under products.
    pub fn audit_generators(&self) -> Result<()> {
        let f = &self.field;
        let mut st = crate::exactlin::elim::RefState::new(f, self.dim);
        st.insert(self.unit.clone());
        let mut frontier: Vec<Vec<F::Elem>> = vec![self.unit.clone()];
        for g in &self.gens {
            if st.insert(g.clone()).is_some() {
                frontier.push(g.clone());
            }
        }
        while let Some(v) = frontier.pop() {
            if st.rank() == self.dim {
                return Ok(());
            }
            for g in &self.gens {
                for w in [self.mul_dense(&v, g), self.mul_dense(g, &v)] {
                    if st.insert(w.clone()).is_some() {
                        frontier.push(w);
                    }
                }
            }
        }
        if st.rank() == self.dim {
            Ok(())
        } else {
            Err(Error::AuditFailed(format!(
                "generators span only {} of {} dimensions",
                st.rank(),
                self.dim
            )))
        }
    }
}

/// The group algebra `F[G]` with basis indexed by the sorted element list.
pub fn group_algebra<F: Field>(g: &PermGroup, field: F) -> Alg<F> {
    let n = g.order();
    let mut mult = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let prod = g.element(i).compose(g.element(j));
            let k = g.index_of(&prod).expect("closed");
            mult.push(vec![(k as u32, field.one())]);
        }
    }
    let mut unit = vec![field.zero(); n];
    let e = g.index_of(&crate::groups::Perm::identity(g.degree())).unwrap();
    unit[e] = field.one();
    let labels = g.elements().iter().map(|p| p.to_string()).collect();
    let gens: Vec<Vec<F::Elem>> = g
        .generators()
        .iter()
        .map(|p| {
            let mut v = vec![field.zero(); n];
            v[g.index_of(p).unwrap()] = field.one();
            v
        })
        .collect();
    FinDimAlgebra::new(field, labels, unit, mult, gens).expect("group algebra axioms")
}

/// The base field as a one-dimensional algebra.
pub fn field_algebra<F: Field>(field: F) -> Alg<F> {
    let one = field.one();
    FinDimAlgebra::new(field.clone(), vec!["1".into()], vec![one.clone()], vec![vec![(0, one)]], vec![])
        .expect("field algebra axioms")
}

/// A unital algebra embedding given by its matrix on basis vectors.
pub struct Embedding<F: Field> {
    pub from: Alg<F>,
    pub to: Alg<F>,
    /// image of each `from`-basis vector, dense in `to`-coordinates
    pub images: Vec<Vec<F::Elem>>,
}

impl<F: Field> Clone for Embedding<F> {
    fn clone(&self) -> Self {
        Embedding { from: self.from.clone(), to: self.to.clone(), images: self.images.clone() }
    }
}

impl<F: LinField> Embedding<F> {
    pub fn new(from: Alg<F>, to: Alg<F>, images: Vec<Vec<F::Elem>>, caps: &Caps) -> Result<Self> {
        if images.len() != from.dim || images.iter().any(|v| v.len() != to.dim) {
            return Err(Error::ShapeMismatch("embedding matrix".into()));
        }
        let e = Embedding { from, to, images };
        e.audit(caps)?;
        Ok(e)
    }

    pub fn identity(a: &Alg<F>) -> Self {
        let images = (0..a.dim).map(|i| a.basis_vector(i)).collect();
        Embedding { from: a.clone(), to: a.clone(), images }
    }

    pub fn apply(&self, x: &[F::Elem]) -> Vec<F::Elem> {
        let f = &self.from.field;
        let mut out = vec![f.zero(); self.to.dim];
        for (i, xi) in x.iter().enumerate() {
            if f.is_zero(xi) {
                continue;
            }
            for (k, v) in self.images[i].iter().enumerate() {
                if !f.is_zero(v) {
                    let t = f.mul(xi, v);
                    out[k] = f.add(&out[k], &t);
                }
            }
        }
        out
    }

    pub fn compose(&self, outer: &Embedding<F>) -> Embedding<F> {
        let images = self.images.iter().map(|v| outer.apply(v)).collect();
        Embedding { from: self.from.clone(), to: outer.to.clone(), images }
    }

    /// Generators of the source, mapped into the target.
    pub fn mapped_gens(&self) -> Vec<Vec<F::Elem>> {
        let mut out: Vec<Vec<F::Elem>> = self.from.gens.iter().map(|g| self.apply(g)).collect();
        if out.is_empty() {
            out.push(self.apply(&self.from.unit));
        }
        out
    }

    fn audit(&self, caps: &Caps) -> Result<()> {
        let f = &self.from.field;
        if self.apply(&self.from.unit) != self.to.unit {
            return Err(Error::AuditFailed("embedding does not preserve the unit".into()));
        }
        for i in 0..self.from.dim {
            for j in 0..self.from.dim {
                let lhs =
                    self.apply(&dense_from_sparse(f, self.from.basis_product(i, j), self.from.dim));
                let rhs = self.to.mul_dense(&self.images[i], &self.images[j]);
                if lhs != rhs {
                    return Err(Error::AuditFailed(format!(
                        "embedding not multiplicative at basis pair ({i},{j})"
                    )));
                }
            }
        }
        // injective: the image matrix has trivial kernel
        let rows: Vec<SparseVec<F::Elem>> = (0..self.to.dim)
            .map(|r| {
                (0..self.from.dim)
                    .filter(|&c| !f.is_zero(&self.images[c][r]))
                    .map(|c| (c as u32, self.images[c][r].clone()))
                    .collect()
            })
            .collect();
        let ker = f.kernel(&rows, self.from.dim, caps)?;
        if !ker.is_empty() {
            return Err(Error::AuditFailed("embedding is not injective".into()));
        }
        Ok(())
    }
}

/// A tower of unital embeddings `C -> B -> A`.
pub struct Tower<F: Field> {
    pub a: Alg<F>,
    pub b: Alg<F>,
    pub c: Alg<F>,
    pub incl_ba: Embedding<F>,
    pub incl_cb: Embedding<F>,
    pub incl_ca: Embedding<F>,
    tensor_square_cache: OnceLock<Arc<TensorProduct<F>>>,
}

impl<F: LinField> Tower<F> {
    pub fn new(incl_cb: Embedding<F>, incl_ba: Embedding<F>) -> Result<Tower<F>> {
        if !Arc::ptr_eq(&incl_cb.to, &incl_ba.from) {
            return Err(Error::ShapeMismatch("tower embeddings do not compose".into()));
        }
        let incl_ca = incl_cb.compose(&incl_ba);
        Ok(Tower {
            a: incl_ba.to.clone(),
            b: incl_ba.from.clone(),
            c: incl_cb.from.clone(),
            incl_ba,
            incl_cb,
            incl_ca,
            tensor_square_cache: OnceLock::new(),
        })
    }

    /// The degenerate tower `A | B | B` activating the depth-two reduction.
    pub fn degenerate(incl_ba: Embedding<F>) -> Result<Tower<F>> {
        let id = Embedding::identity(&incl_ba.from);
        Tower::new(id, incl_ba)
    }

    /// The tensor square `A (x)_B A` as an `A`-`A`-bimodule, cached.
    pub fn tensor_square(&self, caps: &Caps) -> Result<Arc<TensorProduct<F>>> {
        if let Some(t) = self.tensor_square_cache.get() {
            return Ok(t.clone());
        }
        let left = Bimodule::regular(&self.a).restrict_right(&self.incl_ba);
        let right = Bimodule::regular(&self.a).restrict_left(&self.incl_ba);
        let t = Arc::new(tensor_over(&left, &right, caps)?);
        let _ = self.tensor_square_cache.set(t.clone());
        Ok(self.tensor_square_cache.get().unwrap().clone())
    }

    /// Opposite tower, for the left/right duality checks.
    pub fn opposite(&self, caps: &Caps) -> Result<Tower<F>> {
        let aop = self.a.opposite();
        let bop = self.b.opposite();
        let cop = self.c.opposite();
        let incl_ba = Embedding::new(bop.clone(), aop, self.incl_ba.images.clone(), caps)?;
        let incl_cb = Embedding::new(cop, bop, self.incl_cb.images.clone(), caps)?;
        Tower::new(incl_cb, incl_ba)
    }
}

/// Coordinates on an explicit subspace basis, with exact membership tests.
pub struct SpanCoords<F: Field> {
    pub field: F,
    pub dim_ambient: usize,
    pub basis: Vec<SparseVec<F::Elem>>,
    rows: Vec<Vec<F::Elem>>,
    pivots: Vec<usize>,
}

impl<F: LinField> SpanCoords<F> {
    pub fn new(field: F, dim_ambient: usize, basis: Vec<SparseVec<F::Elem>>) -> SpanCoords<F> {
        let n = basis.len();
        let width = dim_ambient + n;
        let mut st = crate::exactlin::elim::RefState::new(&field, width);
        for (k, b) in basis.iter().enumerate() {
            let mut v = dense_from_sparse(&field, b, width);
            v[dim_ambient + k] = field.one();
            st.insert(v);
        }
        let rows = std::mem::take(&mut st.rows);
        let pivots = std::mem::take(&mut st.pivots);
        SpanCoords { field, dim_ambient, basis, rows, pivots }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Express an ambient vector in the basis, or `None` if outside the span.
    pub fn express(&self, v: &[F::Elem]) -> Option<Vec<F::Elem>> {
        let f = &self.field;
        let width = self.dim_ambient + self.basis.len();
        let mut acc = vec![f.zero(); width];
        acc[..self.dim_ambient].clone_from_slice(v);
        for (r, &p) in self.pivots.iter().enumerate() {
            let c = acc[p].clone();
            if f.is_zero(&c) {
                continue;
            }
            for (j, x) in self.rows[r].iter().enumerate().skip(p) {
                if !f.is_zero(x) {
                    let t = f.mul(&c, x);
                    acc[j] = f.sub(&acc[j], &t);
                }
            }
        }
        if acc[..self.dim_ambient].iter().any(|x| !f.is_zero(x)) {
            return None;
        }
        Some(acc[self.dim_ambient..].iter().map(|x| f.neg(x)).collect())
    }

    pub fn contains(&self, v: &[F::Elem]) -> bool {
        self.express(v).is_some()
    }

    /// Reconstitute an ambient vector from coordinates.
    pub fn lift(&self, coords: &[F::Elem]) -> Vec<F::Elem> {
        let f = &self.field;
        let mut out = vec![f.zero(); self.dim_ambient];
        for (k, c) in coords.iter().enumerate() {
            if !f.is_zero(c) {
                crate::exactlin::dense_axpy(f, &mut out, c, &self.basis[k]);
            }
        }
        out
    }
}

/// Build the subalgebra of `ambient` spanned by `basis` (which must be
/// multiplicatively closed and contain the unit), with its inclusion map.
pub fn subalgebra_on_basis<F: LinField>(
    ambient: &Alg<F>,
    basis: Vec<SparseVec<F::Elem>>,
    labels: Option<Vec<String>>,
    caps: &Caps,
) -> Result<(Alg<F>, Embedding<F>)> {
    let f = ambient.field.clone();
    let coords = SpanCoords::new(f.clone(), ambient.dim, basis.clone());
    let n = basis.len();
    let unit = coords
        .express(&ambient.unit)
        .ok_or_else(|| Error::AuditFailed("subspace does not contain the unit".into()))?;
    let mut mult = Vec::with_capacity(n * n);
    for i in 0..n {
        let bi = dense_from_sparse(&f, &basis[i], ambient.dim);
        for j in 0..n {
            let bj = dense_from_sparse(&f, &basis[j], ambient.dim);
            let prod = ambient.mul_dense(&bi, &bj);
            let c = coords.express(&prod).ok_or_else(|| {
                Error::AuditFailed(format!("subspace not closed at basis pair ({i},{j})"))
            })?;
            mult.push(sparse_from_dense(&f, &c));
        }
    }
    let labels = labels.unwrap_or_else(|| (0..n).map(|i| format!("s{i}")).collect());
    let gens: Vec<Vec<F::Elem>> = (0..n)
        .map(|i| {
            let mut v = vec![f.zero(); n];
            v[i] = f.one();
            v
        })
        .collect();
    let sub = FinDimAlgebra::new(f.clone(), labels, unit, mult, gens)?;
    let images = basis.iter().map(|b| dense_from_sparse(&f, b, ambient.dim)).collect();
    let emb = Embedding::new(sub.clone(), ambient.clone(), images, caps)?;
    Ok((sub, emb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{PrimeField, Rationals};
    use crate::groups;

    #[test]
    fn trivial_group_algebra_is_the_field() {
        let a = group_algebra(&groups::PermGroup::trivial(3), Rationals);
        assert_eq!(a.dim, 1);
        assert!(a.is_commutative());
    }

    #[test]
    fn s3_group_algebra() {
        let s3 = groups::symmetric(3);
        let a = group_algebra(&s3, Rationals);
        assert_eq!(a.dim, 6);
        // the basis element of a transposition squares to the unit
        let t = groups::parse_perm("(1 2)", 3, 0).unwrap();
        let i = s3.index_of(&t).unwrap();
        let sq = a.mul_dense(&a.basis_vector(i), &a.basis_vector(i));
        assert_eq!(sq, a.unit);
        assert!(!a.is_commutative());
    }

    #[test]
    fn z3_over_f7_is_commutative() {
        let z3 = groups::cyclic(3);
        let f7 = PrimeField::new(7).unwrap();
        let a = group_algebra(&z3, f7);
        assert_eq!(a.dim, 3);
        assert!(a.is_commutative());
    }

    #[test]
    fn opposite_of_group_algebra_audits() {
        let a = group_algebra(&groups::symmetric(3), Rationals);
        let op = a.opposite();
        assert_eq!(op.dim, 6);
        assert!(op.audit_generators().is_ok());
    }

    #[test]
    fn span_coords_round_trip() {
        let q = Rationals;
        let basis: Vec<SparseVec<_>> = vec![
            vec![(0, q.one()), (1, q.one())],
            vec![(1, q.one()), (2, q.one())],
        ];
        let sc = SpanCoords::new(q, 3, basis);
        let v = vec![q.from_i64(2), q.from_i64(5), q.from_i64(3)];
        let c = sc.express(&v).unwrap();
        assert_eq!(sc.lift(&c), v);
        let outside = vec![q.one(), q.zero(), q.zero()];
        assert!(sc.express(&outside).is_none());
    }
}
