//! Bimodules, tensor products over a middle algebra, centralizers and
//! intertwiner (bimodule hom) spaces.
//!
//! A bimodule stores one sparse action matrix per basis element of each
//! acting algebra. Tensor products over `B` are computed as quotients of the
//! tensor product over the base field by the row space of the relations
//! `x.b (x) y - x (x) b.y`, with the quotient basis chosen as the
//! lexicographically first complement of the relation row space (the
//! non-pivot columns of its reduced echelon form), so every report is
//! reproducible coordinate for coordinate.

use crate::error::{Error, Result};
use crate::exactlin::{dense_from_sparse, sparse_from_dense, LinField, SparseVec};
use crate::field::Field;
use crate::Caps;

use super::{Alg, Embedding, SparseMat};

pub struct Bimodule<F: Field> {
    pub field: F,
    pub left: Alg<F>,
    pub right: Alg<F>,
    pub dim: usize,
    /// action matrix of each left-algebra basis element
    pub left_act: Vec<SparseMat<F::Elem>>,
    /// action matrix of each right-algebra basis element
    pub right_act: Vec<SparseMat<F::Elem>>,
}

impl<F: Field> Clone for Bimodule<F> {
    fn clone(&self) -> Self {
        Bimodule {
            field: self.field.clone(),
            left: self.left.clone(),
            right: self.right.clone(),
            dim: self.dim,
            left_act: self.left_act.clone(),
            right_act: self.right_act.clone(),
        }
    }
}

fn combine_mats<F: Field>(
    f: &F,
    elem: &[F::Elem],
    mats: &[SparseMat<F::Elem>],
    dim: usize,
) -> SparseMat<F::Elem> {
    let ncols = mats.first().map_or(dim, |m| m.len());
    let mut out: Vec<Vec<F::Elem>> = vec![vec![f.zero(); dim]; ncols];
    for (k, c) in elem.iter().enumerate() {
        if f.is_zero(c) {
            continue;
        }
        for (j, col) in mats[k].iter().enumerate() {
            for (i, v) in col {
                let t = f.mul(c, v);
                out[j][*i as usize] = f.add(&out[j][*i as usize], &t);
            }
        }
    }
    out.into_iter().map(|col| sparse_from_dense(f, &col)).collect()
}

impl<F: Field> Bimodule<F> {
    /// The regular `A`-`A`-bimodule on `A` itself.
    pub fn regular(a: &Alg<F>) -> Bimodule<F> {
        let f = a.field.clone();
        let left_act = (0..a.dim).map(|i| a.left_mult_matrix(&a.basis_vector(i))).collect();
        let right_act = (0..a.dim).map(|i| a.right_mult_matrix(&a.basis_vector(i))).collect();
        Bimodule { field: f, left: a.clone(), right: a.clone(), dim: a.dim, left_act, right_act }
    }

    /// Pull the left action back along an embedding into the left algebra.
    pub fn restrict_left(&self, emb: &Embedding<F>) -> Bimodule<F> {
        let f = &self.field;
        let left_act: Vec<SparseMat<F::Elem>> =
            emb.images.iter().map(|im| combine_mats(f, im, &self.left_act, self.dim)).collect();
        Bimodule {
            field: self.field.clone(),
            left: emb.from.clone(),
            right: self.right.clone(),
            dim: self.dim,
            left_act,
            right_act: self.right_act.clone(),
        }
    }

    /// Pull the right action back along an embedding into the right algebra.
    pub fn restrict_right(&self, emb: &Embedding<F>) -> Bimodule<F> {
        let f = &self.field;
        let right_act: Vec<SparseMat<F::Elem>> =
            emb.images.iter().map(|im| combine_mats(f, im, &self.right_act, self.dim)).collect();
        Bimodule {
            field: self.field.clone(),
            left: self.left.clone(),
            right: emb.from.clone(),
            dim: self.dim,
            left_act: self.left_act.clone(),
            right_act,
        }
    }

    pub fn left_action_of(&self, elem: &[F::Elem]) -> SparseMat<F::Elem> {
        combine_mats(&self.field, elem, &self.left_act, self.dim)
    }

    pub fn right_action_of(&self, elem: &[F::Elem]) -> SparseMat<F::Elem> {
        combine_mats(&self.field, elem, &self.right_act, self.dim)
    }

    pub fn apply_left(&self, elem: &[F::Elem], v: &[F::Elem]) -> Vec<F::Elem> {
        let f = &self.field;
        let mut out = vec![f.zero(); self.dim];
        for (k, c) in elem.iter().enumerate() {
            if f.is_zero(c) {
                continue;
            }
            for (j, x) in v.iter().enumerate() {
                if f.is_zero(x) {
                    continue;
                }
                let cx = f.mul(c, x);
                for (i, m) in &self.left_act[k][j] {
                    let t = f.mul(&cx, m);
                    out[*i as usize] = f.add(&out[*i as usize], &t);
                }
            }
        }
        out
    }

    pub fn apply_right(&self, v: &[F::Elem], elem: &[F::Elem]) -> Vec<F::Elem> {
        let f = &self.field;
        let mut out = vec![f.zero(); self.dim];
        for (k, c) in elem.iter().enumerate() {
            if f.is_zero(c) {
                continue;
            }
            for (j, x) in v.iter().enumerate() {
                if f.is_zero(x) {
                    continue;
                }
                let cx = f.mul(c, x);
                for (i, m) in &self.right_act[k][j] {
                    let t = f.mul(&cx, m);
                    out[*i as usize] = f.add(&out[*i as usize], &t);
                }
            }
        }
        out
    }

    /// Unitality, multiplicativity and commutation audits for the actions.
    pub fn audit(&self) -> Result<()> {
        let f = &self.field;
        let dim = self.dim;
        // unit of each side acts as the identity
        for (name, alg, acts) in [
            ("left", &self.left, &self.left_act),
            ("right", &self.right, &self.right_act),
        ] {
            let mat = combine_mats(f, &alg.unit, acts, dim);
            for (j, col) in mat.iter().enumerate() {
                let expected: SparseVec<F::Elem> = vec![(j as u32, f.one())];
                if *col != expected {
                    return Err(Error::AuditFailed(format!("{name} unit action is not identity")));
                }
            }
        }
        // multiplicativity on basis pairs, and left/right commutation
        let budget = 200usize.pow(3);
        let la = self.left.dim;
        let ra = self.right.dim;
        if la * la * dim <= budget {
            for i in 0..la {
                for j in 0..la {
                    let prod = dense_from_sparse(f, self.left.basis_product(i, j), la);
                    let lhs = combine_mats(f, &prod, &self.left_act, dim);
                    for (q, col) in lhs.iter().enumerate() {
                        let step = dense_from_sparse(f, &self.left_act[j][q], dim);
                        let two = self.apply_left(&self.left.basis_vector(i), &step);
                        if *col != sparse_from_dense(f, &two) {
                            return Err(Error::AuditFailed(format!(
                                "left action not multiplicative at ({i},{j})"
                            )));
                        }
                    }
                }
            }
        }
        if ra * ra * dim <= budget {
            for i in 0..ra {
                for j in 0..ra {
                    let prod = dense_from_sparse(f, self.right.basis_product(i, j), ra);
                    let lhs = combine_mats(f, &prod, &self.right_act, dim);
                    for (q, col) in lhs.iter().enumerate() {
                        let step = dense_from_sparse(f, &self.right_act[i][q], dim);
                        let two = self.apply_right(&step, &self.right.basis_vector(j));
                        if *col != sparse_from_dense(f, &two) {
                            return Err(Error::AuditFailed(format!(
                                "right action not multiplicative at ({i},{j})"
                            )));
                        }
                    }
                }
            }
        }
        if la * ra * dim <= budget {
            for i in 0..la {
                for j in 0..ra {
                    for q in 0..dim {
                        let rv = dense_from_sparse(f, &self.right_act[j][q], dim);
                        let lr = self.apply_left(&self.left.basis_vector(i), &rv);
                        let lv = dense_from_sparse(f, &self.left_act[i][q], dim);
                        let rl = self.apply_right(&lv, &self.right.basis_vector(j));
                        if lr != rl {
                            return Err(Error::AuditFailed(format!(
                                "left/right actions do not commute at ({i},{j},{q})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// A tensor product `X (x)_B Y` with its projection data.
pub struct TensorProduct<F: Field> {
    pub module: Bimodule<F>,
    pub dx: usize,
    pub dy: usize,
    /// ambient index of each quotient basis vector (lex-first complement)
    pub basis: Vec<u32>,
    rel_rows: Vec<SparseVec<F::Elem>>,
    rel_pivots: Vec<u32>,
    /// quotient position of each ambient index, or usize::MAX for pivots
    position: Vec<usize>,
    /// relation row pivoting at each ambient index, or u32::MAX
    pivot_row: Vec<u32>,
}

impl<F: Field> TensorProduct<F> {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_index(&self, i: usize, j: usize) -> usize {
        i * self.dy + j
    }

    /// Ambient pair `(i, j)` of a quotient basis vector.
    pub fn lift_index(&self, q: usize) -> (usize, usize) {
        let a = self.basis[q] as usize;
        (a / self.dy, a % self.dy)
    }

    /// Reduce an ambient vector by the relation row space and read off the
    /// quotient coordinates.
    pub fn project_ambient(&self, ambient: &mut [F::Elem]) -> Vec<F::Elem> {
        let f = &self.module.field;
        for (r, &p) in self.rel_pivots.iter().enumerate() {
            let c = ambient[p as usize].clone();
            if f.is_zero(&c) {
                continue;
            }
            for (j, x) in &self.rel_rows[r] {
                let t = f.mul(&c, x);
                ambient[*j as usize] = f.sub(&ambient[*j as usize], &t);
            }
        }
        self.basis.iter().map(|&a| ambient[a as usize].clone()).collect()
    }

    /// Image of an elementary tensor `x (x) y` in quotient coordinates.
    /// Works sparsely: reduction by a reduced row introduces only non-pivot
    /// columns, so one pass over the initial pivot hits suffices.
    pub fn project_pair(&self, x: &[F::Elem], y: &[F::Elem]) -> Vec<F::Elem> {
        let f = &self.module.field;
        let mut entries: SparseVec<F::Elem> = Vec::new();
        for (i, xi) in x.iter().enumerate() {
            if f.is_zero(xi) {
                continue;
            }
            for (j, yj) in y.iter().enumerate() {
                if !f.is_zero(yj) {
                    entries.push((self.ambient_index(i, j) as u32, f.mul(xi, yj)));
                }
            }
        }
        self.project_sparse(entries)
    }

    /// Reduce a sparse ambient vector by the relation row space and read off
    /// the quotient coordinates.
    pub fn project_sparse(&self, mut entries: SparseVec<F::Elem>) -> Vec<F::Elem> {
        let f = &self.module.field;
        entries.sort_by_key(|(i, _)| *i);
        let mut merged: SparseVec<F::Elem> = Vec::with_capacity(entries.len());
        for (idx, c) in entries {
            match merged.last_mut() {
                Some((last, acc)) if *last == idx => *acc = f.add(acc, &c),
                _ => merged.push((idx, c)),
            }
        }
        let mut extra: SparseVec<F::Elem> = Vec::new();
        for (idx, c) in &merged {
            if f.is_zero(c) {
                continue;
            }
            let row_idx = self.pivot_row[*idx as usize];
            if row_idx != u32::MAX {
                for (j, x) in &self.rel_rows[row_idx as usize] {
                    if *j != *idx {
                        extra.push((*j, f.neg(&f.mul(c, x))));
                    }
                }
            }
        }
        let mut out = vec![f.zero(); self.basis.len()];
        for (idx, c) in merged.iter().chain(extra.iter()) {
            let pos = self.position[*idx as usize];
            if pos != usize::MAX {
                out[pos] = f.add(&out[pos], c);
            }
        }
        out
    }

    /// A distinguished ambient representative of a quotient vector
    /// (sum of the complement basis tensors).
    pub fn lift_vector(&self, v: &[F::Elem]) -> Vec<(usize, usize, F::Elem)> {
        let f = &self.module.field;
        v.iter()
            .enumerate()
            .filter(|(_, c)| !f.is_zero(c))
            .map(|(q, c)| {
                let (i, j) = self.lift_index(q);
                (i, j, c.clone())
            })
            .collect()
    }

    pub fn position_of_ambient(&self, a: usize) -> Option<usize> {
        let p = self.position[a];
        if p == usize::MAX {
            None
        } else {
            Some(p)
        }
    }
}

/// Tensor product over the shared middle algebra: `m` is a `(L, B)`-bimodule,
/// `n` a `(B, R)`-bimodule, the result the `(L, R)`-bimodule `m (x)_B n`.
pub fn tensor_over<F: LinField>(
    m: &Bimodule<F>,
    n: &Bimodule<F>,
    caps: &Caps,
) -> Result<TensorProduct<F>> {
    let f = m.field.clone();
    if m.right.dim != n.left.dim || m.right.spec_key() != n.left.spec_key() {
        return Err(Error::ShapeMismatch("middle algebras differ".into()));
    }
    let dx = m.dim;
    let dy = n.dim;
    let ambient = dx * dy;
    if ambient > caps.max_span_len {
        return Err(Error::CapExceeded(format!(
            "tensor ambient dimension {ambient} over cap {}",
            caps.max_span_len
        )));
    }
    let b = &m.right;
    let mut gens: Vec<Vec<F::Elem>> = b.gens.clone();
    if gens.is_empty() {
        gens.push(b.unit.clone());
    }
    let mut rel: Vec<SparseVec<F::Elem>> = Vec::new();
    for g in &gens {
        let xm = m.right_action_of(g); // columns: x_i . g
        let yn = n.left_action_of(g); // columns: g . y_j
        for i in 0..dx {
            for j in 0..dy {
                let mut row: SparseVec<F::Elem> = Vec::new();
                for (k, c) in &xm[i] {
                    row.push(((*k as usize * dy + j) as u32, c.clone()));
                }
                for (l, c) in &yn[j] {
                    row.push(((i * dy + *l as usize) as u32, f.neg(c)));
                }
                row.sort_by_key(|(idx, _)| *idx);
                // merge duplicates
                let mut merged: SparseVec<F::Elem> = Vec::with_capacity(row.len());
                for (idx, c) in row {
                    match merged.last_mut() {
                        Some((last, acc)) if *last == idx => *acc = f.add(acc, &c),
                        _ => merged.push((idx, c)),
                    }
                }
                merged.retain(|(_, c)| !f.is_zero(c));
                if !merged.is_empty() {
                    rel.push(merged);
                }
            }
        }
    }
    let (rel_rows, rel_pivots) = f.rref(&rel, ambient, caps)?;
    let mut position = vec![usize::MAX; ambient];
    let mut basis = Vec::new();
    {
        let mut is_pivot = vec![false; ambient];
        for &p in &rel_pivots {
            is_pivot[p as usize] = true;
        }
        for a in 0..ambient {
            if !is_pivot[a] {
                position[a] = basis.len();
                basis.push(a as u32);
            }
        }
    }
    let qdim = basis.len();
    let mut pivot_row = vec![u32::MAX; ambient];
    for (r, &p) in rel_pivots.iter().enumerate() {
        pivot_row[p as usize] = r as u32;
    }

    let mut partial = TensorProduct {
        module: Bimodule {
            field: f.clone(),
            left: m.left.clone(),
            right: n.right.clone(),
            dim: qdim,
            left_act: Vec::new(),
            right_act: Vec::new(),
        },
        dx,
        dy,
        basis,
        rel_rows,
        rel_pivots,
        position,
        pivot_row,
    };

    // outer actions on the quotient basis
    let mut left_act: Vec<SparseMat<F::Elem>> = Vec::with_capacity(m.left.dim);
    for a in 0..m.left.dim {
        let av = m.left.basis_vector(a);
        let xm = m.left_action_of(&av);
        let mut mat: SparseMat<F::Elem> = Vec::with_capacity(qdim);
        for q in 0..qdim {
            let (i, j) = partial.lift_index(q);
            let mut amb = vec![f.zero(); dx * dy];
            for (k, c) in &xm[i] {
                amb[*k as usize * dy + j] = c.clone();
            }
            let proj = partial.project_ambient(&mut amb);
            mat.push(sparse_from_dense(&f, &proj));
        }
        left_act.push(mat);
    }
    let mut right_act: Vec<SparseMat<F::Elem>> = Vec::with_capacity(n.right.dim);
    for b_idx in 0..n.right.dim {
        let bv = n.right.basis_vector(b_idx);
        let yn = n.right_action_of(&bv);
        let mut mat: SparseMat<F::Elem> = Vec::with_capacity(qdim);
        for q in 0..qdim {
            let (i, j) = partial.lift_index(q);
            let mut amb = vec![f.zero(); dx * dy];
            for (l, c) in &yn[j] {
                amb[i * dy + *l as usize] = c.clone();
            }
            let proj = partial.project_ambient(&mut amb);
            mat.push(sparse_from_dense(&f, &proj));
        }
        right_act.push(mat);
    }
    partial.module.left_act = left_act;
    partial.module.right_act = right_act;
    Ok(partial)
}

impl<F: Field> super::FinDimAlgebra<F> {
    /// Cheap identity for "same algebra" checks across bimodule plumbing.
    pub fn spec_key(&self) -> (usize, crate::field::FieldSpec) {
        (self.dim, self.field.spec())
    }
}

/// Basis of `{ v : phi_L(g) v = v phi_R(g) for all generators g of sub }`.
pub fn centralizer<F: LinField>(
    m: &Bimodule<F>,
    sub: &Alg<F>,
    into_left: &Embedding<F>,
    into_right: &Embedding<F>,
    caps: &Caps,
) -> Result<Vec<SparseVec<F::Elem>>> {
    let f = &m.field;
    let mut gens = sub.gens.clone();
    if gens.is_empty() {
        gens.push(sub.unit.clone());
    }
    let mut rows: Vec<SparseVec<F::Elem>> = Vec::new();
    for g in &gens {
        let lmat = m.left_action_of(&into_left.apply(g));
        let rmat = m.right_action_of(&into_right.apply(g));
        let mut row_maps: Vec<SparseVec<F::Elem>> = vec![Vec::new(); m.dim];
        for (j, col) in lmat.iter().enumerate() {
            for (i, c) in col {
                row_maps[*i as usize].push((j as u32, c.clone()));
            }
        }
        for (j, col) in rmat.iter().enumerate() {
            for (i, c) in col {
                row_maps[*i as usize].push((j as u32, f.neg(c)));
            }
        }
        for mut row in row_maps {
            row.sort_by_key(|(j, _)| *j);
            let mut merged: SparseVec<F::Elem> = Vec::with_capacity(row.len());
            for (idx, c) in row {
                match merged.last_mut() {
                    Some((last, acc)) if *last == idx => *acc = f.add(acc, &c),
                    _ => merged.push((idx, c)),
                }
            }
            merged.retain(|(_, c)| !f.is_zero(c));
            if !merged.is_empty() {
                rows.push(merged);
            }
        }
    }
    f.kernel(&rows, m.dim, caps)
}

/// Endomorphisms of `alg` commuting with one-sided multiplication by the
/// embedded subalgebra (right module endos for `right = true`), as dense
/// `d x d` matrices.
pub fn one_sided_endos<F: LinField>(
    alg: &Alg<F>,
    sub_incl: &Embedding<F>,
    right: bool,
    caps: &Caps,
) -> Result<Vec<Vec<F::Elem>>> {
    let f = &alg.field;
    let d = alg.dim;
    let mut rows: Vec<SparseVec<F::Elem>> = Vec::new();
    for gelem in sub_incl.mapped_gens() {
        let mat = if right { alg.right_mult_matrix(&gelem) } else { alg.left_mult_matrix(&gelem) };
        // condition: Phi . mat = mat . Phi, unknowns Phi[i][j] at i*d+j
        for i in 0..d {
            for j in 0..d {
                let mut row: SparseVec<F::Elem> = Vec::new();
                for (l, c) in &mat[j] {
                    row.push(((i * d + *l as usize) as u32, c.clone()));
                }
                for (k, col) in mat.iter().enumerate() {
                    for (r, c) in col {
                        if *r as usize == i {
                            row.push(((k * d + j) as u32, f.neg(c)));
                        }
                    }
                }
                row.sort_by_key(|(idx, _)| *idx);
                let mut merged: SparseVec<F::Elem> = Vec::with_capacity(row.len());
                for (idx, c) in row {
                    match merged.last_mut() {
                        Some((last, acc)) if *last == idx => *acc = f.add(acc, &c),
                        _ => merged.push((idx, c)),
                    }
                }
                merged.retain(|(_, c)| !f.is_zero(c));
                if !merged.is_empty() {
                    rows.push(merged);
                }
            }
        }
    }
    let ker = f.kernel(&rows, d * d, caps)?;
    Ok(ker.into_iter().map(|v| dense_from_sparse(f, &v, d * d)).collect())
}

/// Basis of the space of maps `m -> n` commuting with both actions,
/// returned as dense `n.dim x m.dim` matrices in row-major order.
pub fn bimodule_hom<F: LinField>(
    m: &Bimodule<F>,
    n: &Bimodule<F>,
    caps: &Caps,
) -> Result<Vec<Vec<F::Elem>>> {
    let f = &m.field;
    if m.left.spec_key() != n.left.spec_key() || m.right.spec_key() != n.right.spec_key() {
        return Err(Error::ShapeMismatch("bimodule_hom requires matching algebras".into()));
    }
    let dm = m.dim;
    let dn = n.dim;
    let unknowns = dm * dn;
    if unknowns > caps.max_span_len {
        return Err(Error::CapExceeded(format!(
            "bimodule hom system with {unknowns} unknowns over cap"
        )));
    }
    let mut rows: Vec<SparseVec<F::Elem>> = Vec::new();
    let push_constraints =
        |act_m: &SparseMat<F::Elem>, act_n: &SparseMat<F::Elem>, rows: &mut Vec<SparseVec<F::Elem>>| {
            // condition: act_n . phi = phi . act_m, unknowns phi[i][j] at i*dm+j
            for i in 0..dn {
                for j in 0..dm {
                    let mut row: SparseVec<F::Elem> = Vec::new();
                    // sum_k (act_n)[k -> i] phi[k][j]
                    for (k, col) in act_n.iter().enumerate() {
                        for (r, c) in col {
                            if *r as usize == i {
                                row.push(((k * dm + j) as u32, c.clone()));
                            }
                        }
                    }
                    // - sum_l phi[i][l] (act_m)[j -> l]
                    for (l, c) in &act_m[j] {
                        row.push(((i * dm + *l as usize) as u32, f.neg(c)));
                    }
                    row.sort_by_key(|(idx, _)| *idx);
                    let mut merged: SparseVec<F::Elem> = Vec::with_capacity(row.len());
                    for (idx, c) in row {
                        match merged.last_mut() {
                            Some((last, acc)) if *last == idx => *acc = f.add(acc, &c),
                            _ => merged.push((idx, c)),
                        }
                    }
                    merged.retain(|(_, c)| !f.is_zero(c));
                    if !merged.is_empty() {
                        rows.push(merged);
                    }
                }
            }
        };
    let mut lgens = m.left.gens.clone();
    if lgens.is_empty() {
        lgens.push(m.left.unit.clone());
    }
    for g in &lgens {
        push_constraints(&m.left_action_of(g), &n.left_action_of(g), &mut rows);
    }
    let mut rgens = m.right.gens.clone();
    if rgens.is_empty() {
        rgens.push(m.right.unit.clone());
    }
    for g in &rgens {
        push_constraints(&m.right_action_of(g), &n.right_action_of(g), &mut rows);
    }
    let ker = f.kernel(&rows, unknowns, caps)?;
    Ok(ker.into_iter().map(|v| dense_from_sparse(f, &v, unknowns)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::group_algebra;
    use crate::field::Rationals;
    use crate::groups;

    fn s3_tower_b(h_gens: &[&str]) -> (crate::algebra::Alg<Rationals>, crate::algebra::Alg<Rationals>, Embedding<Rationals>) {
        let caps = Caps::default();
        let s3 = groups::symmetric(3);
        let gens: Vec<_> =
            h_gens.iter().map(|s| groups::parse_perm(s, 3, 0).unwrap()).collect();
        let h = groups::PermGroup::closure(3, &gens, 100).unwrap();
        let a = group_algebra(&s3, Rationals);
        let b = group_algebra(&h, Rationals);
        let images = h
            .elements()
            .iter()
            .map(|p| {
                let mut v = vec![Rationals.zero(); a.dim];
                v[s3.index_of(p).unwrap()] = Rationals.one();
                v
            })
            .collect();
        let emb = Embedding::new(b.clone(), a.clone(), images, &caps).unwrap();
        (a, b, emb)
    }

    #[test]
    fn tensor_square_dimensions() {
        let caps = Caps::default();
        // A (x)_A A has dim A
        let (a, _b, _e) = s3_tower_b(&["(1 2)"]);
        let id = Embedding::identity(&a);
        let left = Bimodule::regular(&a).restrict_right(&id);
        let right = Bimodule::regular(&a).restrict_left(&id);
        let t = tensor_over(&left, &right, &caps).unwrap();
        assert_eq!(t.dim(), 6);

        // A (x)_{Q[Z2]} A has dim 18 = 6*6/2
        let (a2, _b2, e2) = s3_tower_b(&["(1 2)"]);
        let left2 = Bimodule::regular(&a2).restrict_right(&e2);
        let right2 = Bimodule::regular(&a2).restrict_left(&e2);
        let t2 = tensor_over(&left2, &right2, &caps).unwrap();
        assert_eq!(t2.dim(), 18);
        t2.module.audit().unwrap();

        // A (x)_Q A has dim 36
        let (a3, _b3, _e3) = s3_tower_b(&["(1 2)"]);
        let trivial = groups::PermGroup::trivial(3);
        let k = group_algebra(&trivial, Rationals);
        let ek = Embedding::new(
            k.clone(),
            a3.clone(),
            vec![a3.unit.clone()],
            &caps,
        )
        .unwrap();
        let left3 = Bimodule::regular(&a3).restrict_right(&ek);
        let right3 = Bimodule::regular(&a3).restrict_left(&ek);
        let t3 = tensor_over(&left3, &right3, &caps).unwrap();
        assert_eq!(t3.dim(), 36);
    }

    #[test]
    fn centralizer_of_s3_in_itself_is_three_dimensional() {
        let caps = Caps::default();
        let (a, _, _) = s3_tower_b(&["(1 2)"]);
        let reg = Bimodule::regular(&a);
        let id = Embedding::identity(&a);
        let z = centralizer(&reg, &a, &id, &id, &caps).unwrap();
        // center of Q[S3]: one class sum per conjugacy class
        assert_eq!(z.len(), 3);
    }

    #[test]
    fn centralizer_of_base_field_is_everything() {
        let caps = Caps::default();
        let (a, _, _) = s3_tower_b(&["(1 2)"]);
        let trivial = groups::PermGroup::trivial(3);
        let k = group_algebra(&trivial, Rationals);
        let ek = Embedding::new(k.clone(), a.clone(), vec![a.unit.clone()], &caps).unwrap();
        let reg = Bimodule::regular(&a);
        let z = centralizer(&reg, &k, &ek, &ek, &caps).unwrap();
        assert_eq!(z.len(), a.dim);
    }

    #[test]
    fn hom_of_bimodule_with_itself_contains_identity() {
        let caps = Caps::default();
        let (a, _b, e) = s3_tower_b(&["(1 2)"]);
        let m = Bimodule::regular(&a).restrict_left(&e); // (B, A)-bimodule A
        let homs = bimodule_hom(&m, &m, &caps).unwrap();
        assert!(!homs.is_empty());
        // identity matrix must lie in the span
        let q = Rationals;
        let id: Vec<_> = {
            let mut v = vec![q.zero(); m.dim * m.dim];
            for i in 0..m.dim {
                v[i * m.dim + i] = q.one();
            }
            v
        };
        let cols: Vec<SparseVec<_>> =
            homs.iter().map(|h| sparse_from_dense(&q, h)).collect();
        let oracle = crate::exactlin::VecColumns { len: m.dim * m.dim, cols };
        let target = sparse_from_dense(&q, &id);
        match crate::exactlin::span::span_generic(&q, &oracle, &target, usize::MAX) {
            crate::exactlin::SpanOutcome::Member { .. } => {}
            _ => panic!("identity not found in End"),
        }
    }
}
