//! Span membership: decide whether a target vector is a linear combination
//! of a (possibly very large) family of generator columns, and certify the
//! answer either way.
//!
//! A positive answer carries explicit coefficients, a negative answer
//! carries a separating linear functional (zero on every generator, nonzero
//! on the target). Over the rationals the decision runs modulo word-sized
//! primes and only the certificate is lifted and verified exactly, so the
//! modular phase can use every speed trick without risking soundness.

use num::rational::BigRational;
use num::Zero;

use super::modular::{mod_inv, rat_mod_u64, rat_reconstruct, CrtValue, ModRef};
use super::{dense_from_sparse, sparse_from_dense, SparseVec};
use crate::field::{Field, Rationals};

/// Generator columns, produced on demand so huge families never need to be
/// materialized in exact form all at once.
pub trait SpanColumns<E>: Sync {
    /// Length of each column vector.
    fn len(&self) -> usize;
    /// Number of generator columns.
    fn count(&self) -> usize;
    fn column(&self, k: usize) -> SparseVec<E>;

    fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

/// Columns held in memory.
pub struct VecColumns<E> {
    pub len: usize,
    pub cols: Vec<SparseVec<E>>,
}

impl<E: Clone + Send + Sync> SpanColumns<E> for VecColumns<E> {
    fn len(&self) -> usize {
        self.len
    }
    fn count(&self) -> usize {
        self.cols.len()
    }
    fn column(&self, k: usize) -> SparseVec<E> {
        self.cols[k].clone()
    }
}

#[derive(Clone, Debug)]
pub enum SpanOutcome<E> {
    /// Coefficients over the generator indices with
    /// `target = sum coeff_k * column_k`, verified exactly.
    Member { coefficients: SparseVec<E> },
    /// A functional `w` with `w . column_k = 0` for every generator and
    /// `w . target != 0`, verified exactly.
    NotMember { functional: SparseVec<E> },
    Inconclusive { reason: String },
}

#[derive(Clone, Debug)]
pub struct SpanOpts {
    pub max_len: usize,
    pub max_cols: usize,
    pub max_cells: usize,
    pub max_primes: usize,
    pub seed: u64,
}

impl Default for SpanOpts {
    fn default() -> Self {
        SpanOpts {
            max_len: 40_000,
            max_cols: 400_000,
            max_cells: 40_000_000,
            max_primes: 12,
            seed: 0,
        }
    }
}

impl SpanOpts {
    pub fn from_caps(caps: &crate::Caps, seed: u64) -> Self {
        SpanOpts {
            max_len: caps.max_span_len,
            max_cols: caps.max_span_cols,
            max_cells: caps.max_elim_cells,
            max_primes: caps.max_crt_primes,
            seed,
        }
    }
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Exact engine for any field (small systems)
// ---------------------------------------------------------------------------

/// Exact span decision with coefficient tracking; cost is
/// O(count * (len + count) * rank), so only suitable for small systems.
pub fn span_generic<F: Field>(
    f: &F,
    cols: &dyn SpanColumns<F::Elem>,
    target: &SparseVec<F::Elem>,
    max_cells: usize,
) -> SpanOutcome<F::Elem> {
    let len = cols.len();
    let count = cols.count();
    let width = len + count;
    if count > 0 && width.saturating_mul(count.min(width)) > max_cells {
        return SpanOutcome::Inconclusive {
            reason: format!("exact span system {count} x {width} over cap"),
        };
    }
    if target.iter().all(|(_, x)| f.is_zero(x)) {
        return SpanOutcome::Member { coefficients: Vec::new() };
    }

    let mut st = super::elim::RefState::new(f, width);
    for k in 0..count {
        let mut v = dense_from_sparse(f, &cols.column(k), width);
        v[len + k] = f.one();
        st.insert(v);
    }
    let mut residual = dense_from_sparse(f, target, width);
    st.reduce(&mut residual);
    if residual[..len].iter().all(|x| f.is_zero(x)) {
        let coefficients = residual[len..]
            .iter()
            .enumerate()
            .filter(|(_, x)| !f.is_zero(x))
            .map(|(k, x)| (k as u32, f.neg(x)))
            .collect();
        return SpanOutcome::Member { coefficients };
    }
    // Build the separating functional from the fully reduced rows whose
    // pivots land in the coordinate block (rows pivoting in the coefficient
    // block have zero coordinate part and cannot matter).
    st.back_reduce();
    let j0 = residual[..len].iter().position(|x| !f.is_zero(x)).unwrap();
    let mut w: SparseVec<F::Elem> = vec![(j0 as u32, f.one())];
    for (r, &p) in st.pivots.iter().enumerate() {
        if p >= len {
            break;
        }
        let z = &st.rows[r][j0];
        if !f.is_zero(z) {
            w.push((p as u32, f.neg(z)));
        }
    }
    w.sort_by_key(|(i, _)| *i);
    SpanOutcome::NotMember { functional: w }
}

// ---------------------------------------------------------------------------
// Modular engine for the rationals
// ---------------------------------------------------------------------------

struct ModularRun {
    p: u64,
    /// columns reduced mod p, in original index order
    cols_p: Vec<SparseVec<u64>>,
    /// processing order (sorted by sparsity then index)
    order: Vec<u32>,
}

fn materialize(cols: &dyn SpanColumns<BigRational>, p: u64) -> Option<ModularRun> {
    let count = cols.count();
    let mut cols_p = Vec::with_capacity(count);
    for k in 0..count {
        let col = cols.column(k);
        let mut v: SparseVec<u64> = Vec::with_capacity(col.len());
        for (i, x) in &col {
            let r = rat_mod_u64(x, p)?;
            if r != 0 {
                v.push((*i, r));
            }
        }
        cols_p.push(v);
    }
    let mut order: Vec<u32> = (0..count as u32).collect();
    order.sort_by_key(|&k| (cols_p[k as usize].len(), k));
    Some(ModularRun { p, cols_p, order })
}

/// Greedy cover: repeatedly subtract a multiple of a column when doing so
/// strictly shrinks the residual's support. Finds the sparse witnesses typical
/// of permutation-structured towers without any elimination.
fn pursuit(run: &ModularRun, residual: &mut [u64], nnz: &mut usize, chosen: &mut Vec<u32>) {
    let p = run.p;
    let mut chosen_mark = vec![false; run.cols_p.len()];
    for _pass in 0..6 {
        let mut progress = false;
        for &k in &run.order {
            if *nnz == 0 {
                return;
            }
            if chosen_mark[k as usize] {
                continue;
            }
            let col = &run.cols_p[k as usize];
            if col.is_empty() {
                continue;
            }
            let Some(&(i0, v0)) = col.iter().find(|(i, _)| residual[*i as usize] % p != 0) else {
                continue;
            };
            let lam = (residual[i0 as usize] % p) * mod_inv(v0, p) % p;
            // support delta if we subtract lam * col
            let mut delta: isize = 0;
            for (i, v) in col {
                let old = residual[*i as usize] % p;
                let new = (old + (p - lam) * v % p) % p;
                match (old != 0, new != 0) {
                    (true, false) => delta -= 1,
                    (false, true) => delta += 1,
                    _ => {}
                }
            }
            if delta < 0 {
                for (i, v) in col {
                    let idx = *i as usize;
                    let old = residual[idx] % p;
                    let new = (old + (p - lam) * v % p) % p;
                    residual[idx] = new;
                }
                *nnz = (*nnz as isize + delta) as usize;
                chosen.push(k);
                chosen_mark[k as usize] = true;
                progress = true;
            }
        }
        if !progress || *nnz == 0 {
            return;
        }
    }
}

struct EliminationResult {
    st: ModRef,
    residual: Vec<u64>,
    feasible: bool,
    /// column indices inserted as pivots or chosen by pursuit, in order
    support: Vec<u32>,
    capped: bool,
}

/// Full modular pass: pursuit, then incremental elimination with block
/// skipping. When `skip_blocks` is false each column is processed
/// individually (used on certificate retries).
fn eliminate(
    run: &ModularRun,
    target_p: &[u64],
    opts: &SpanOpts,
    skip_blocks: bool,
    early_exit: bool,
) -> EliminationResult {
    let p = run.p;
    let len = target_p.len();
    let mut residual: Vec<u64> = target_p.to_vec();
    let mut nnz = residual.iter().filter(|&&x| x % p != 0).count();
    let mut support: Vec<u32> = Vec::new();
    pursuit(run, &mut residual, &mut nnz, &mut support);

    let mut st = ModRef::new(p, len);
    if nnz == 0 {
        return EliminationResult { st, residual, feasible: true, support, capped: false };
    }

    let mut rng = opts.seed ^ p;
    let block = 256usize;
    let order = &run.order;
    let mut idx = 0usize;
    let mut capped = false;
    'outer: while idx < order.len() {
        let hi = (idx + block).min(order.len());
        if skip_blocks && st.rank() > 0 && hi - idx > 8 {
            // cheap probabilistic block test; certified later, so a miss only
            // costs a retry
            let mut combo = vec![0u64; len];
            for &k in &order[idx..hi] {
                let c = splitmix(&mut rng) % (p - 1) + 1;
                for (i, v) in &run.cols_p[k as usize] {
                    combo[*i as usize] += c * v % p;
                }
            }
            st.reduce(&mut combo);
            st.normalize(&mut combo);
            if combo.iter().all(|&x| x == 0) {
                idx = hi;
                continue;
            }
        }
        for &k in &order[idx..hi] {
            if st.cells() + len > opts.max_cells {
                capped = true;
                break 'outer;
            }
            let col = &run.cols_p[k as usize];
            if col.is_empty() {
                continue;
            }
            let mut dense = vec![0u64; len];
            for (i, v) in col {
                dense[*i as usize] = *v;
            }
            if let Some(piv) = st.insert(dense) {
                support.push(k);
                let c = residual[piv as usize] % p;
                if c != 0 {
                    let w = p - c;
                    let row = st.rows[st.pivots.iter().position(|&q| q == piv).unwrap()].clone();
                    let pv = piv as usize;
                    for (d, s) in residual[pv..].iter_mut().zip(row[pv..].iter()) {
                        *d += w * (*s as u64);
                    }
                    nnz = residual.iter().filter(|&&x| x % p != 0).count();
                    if nnz == 0 && early_exit {
                        return EliminationResult {
                            st,
                            residual,
                            feasible: true,
                            support,
                            capped: false,
                        };
                    }
                }
            }
        }
        idx = hi;
    }
    for x in residual.iter_mut() {
        *x %= p;
    }
    let feasible = residual.iter().all(|&x| x == 0);
    EliminationResult { st, residual, feasible, support, capped }
}

/// Canonical certificate of infeasibility mod p: pivot columns, the failing
/// coordinate, and the back-substituted column of the implicit RREF there.
struct ModFunctional {
    j0: u32,
    pivots: Vec<u32>,
    z: Vec<u64>,
}

fn functional_mod_p(res: &EliminationResult, p: u64) -> ModFunctional {
    let j0 = res.residual.iter().position(|&x| x != 0).unwrap() as u32;
    let r = res.st.rank();
    // T is unit upper triangular: T[s][k] = row_s[pivot_k] for k >= s.
    let mut z = vec![0u64; r];
    for s in (0..r).rev() {
        let mut acc = res.st.rows[s][j0 as usize] as u64 % p;
        for k in (s + 1)..r {
            let t = res.st.rows[s][res.st.pivots[k] as usize] as u64;
            if t != 0 && z[k] != 0 {
                acc = (acc + p - t * z[k] % p) % p;
            }
        }
        z[s] = acc;
    }
    ModFunctional { j0, pivots: res.st.pivots.clone(), z }
}

/// Exact restricted solve: find rational coefficients over the given column
/// subset via per-prime elimination with coefficient tracking, CRT and
/// rational reconstruction. Returns `None` when no verified solution is
/// found within the prime budget.
fn solve_columns_exact(
    cols: &dyn SpanColumns<BigRational>,
    subset: &[u32],
    target: &SparseVec<BigRational>,
    opts: &SpanOpts,
    first_prime: u64,
) -> Option<SparseVec<BigRational>> {
    let len = cols.len();
    let m = subset.len();
    let width = len + m;
    let exact_cols: Vec<SparseVec<BigRational>> =
        subset.iter().map(|&k| cols.column(k as usize)).collect();

    let mut crt: Option<Vec<CrtValue>> = None;
    let mut primes_used = 0usize;
    let mut prime_iter = super::modular::filter_primes();
    let mut p = first_prime;
    loop {
        // eliminate with coefficient tracking mod p
        let mut ok_prime = true;
        let mut st = ModRef::new(p, width);
        for (j, col) in exact_cols.iter().enumerate() {
            let mut dense = vec![0u64; width];
            let mut good = true;
            for (i, x) in col {
                match rat_mod_u64(x, p) {
                    Some(v) => dense[*i as usize] = v,
                    None => {
                        good = false;
                        break;
                    }
                }
            }
            if !good {
                ok_prime = false;
                break;
            }
            dense[len + j] = 1;
            st.insert(dense);
        }
        let mut residual = vec![0u64; width];
        if ok_prime {
            for (i, x) in target {
                match rat_mod_u64(x, p) {
                    Some(v) => residual[*i as usize] = v,
                    None => {
                        ok_prime = false;
                        break;
                    }
                }
            }
        }
        if ok_prime {
            st.reduce(&mut residual);
            st.normalize(&mut residual);
            if residual[..len].iter().any(|&x| x != 0) {
                ok_prime = false; // disagrees with the membership decision
            }
        }
        if ok_prime {
            let coeffs: Vec<u64> = (0..m).map(|j| (p - residual[len + j] % p) % p).collect();
            match &mut crt {
                None => crt = Some(coeffs.iter().map(|&c| CrtValue::single(c, p)).collect()),
                Some(acc) => {
                    for (a, &c) in acc.iter_mut().zip(coeffs.iter()) {
                        a.push(c, p);
                    }
                }
            }
            primes_used += 1;
            if let Some(acc) = &crt {
                let lift: Option<Vec<BigRational>> = acc
                    .iter()
                    .map(|c| rat_reconstruct(&c.value, &c.modulus))
                    .collect();
                if let Some(coeffs) = lift {
                    // exact verification
                    let mut acc_dense = vec![BigRational::zero(); len];
                    for (c, col) in coeffs.iter().zip(exact_cols.iter()) {
                        if c.is_zero() {
                            continue;
                        }
                        for (i, x) in col {
                            acc_dense[*i as usize] += c * x;
                        }
                    }
                    for (i, x) in target {
                        acc_dense[*i as usize] -= x;
                    }
                    if acc_dense.iter().all(|x| x.is_zero()) {
                        return Some(
                            subset
                                .iter()
                                .zip(coeffs)
                                .filter(|(_, c)| !c.is_zero())
                                .map(|(&k, c)| (k, c))
                                .collect(),
                        );
                    }
                }
            }
        }
        if primes_used >= opts.max_primes {
            return None;
        }
        p = loop {
            let q = prime_iter.next()?;
            if q != first_prime {
                break q;
            }
        };
    }
}

/// Span membership over the rationals: modular decision, exact certificates.
pub fn span_modular(
    cols: &dyn SpanColumns<BigRational>,
    target: &SparseVec<BigRational>,
    opts: &SpanOpts,
) -> SpanOutcome<BigRational> {
    let len = cols.len();
    let count = cols.count();
    if len > opts.max_len {
        return SpanOutcome::Inconclusive {
            reason: format!("span system length {len} over cap {}", opts.max_len),
        };
    }
    if count > opts.max_cols {
        return SpanOutcome::Inconclusive {
            reason: format!("span system has {count} columns, cap {}", opts.max_cols),
        };
    }
    if target.iter().all(|(_, x)| x.is_zero()) {
        return SpanOutcome::Member { coefficients: Vec::new() };
    }
    // small systems: plain exact elimination
    if count <= 1024 && len.saturating_mul(count) <= 262_144 {
        return span_generic(&Rationals, cols, target, usize::MAX);
    }

    let q = Rationals;
    let mut prime_iter = super::modular::filter_primes();
    for _attempt in 0..4 {
        let Some(p) = prime_iter.next() else {
            return SpanOutcome::Inconclusive { reason: "prime pool exhausted".into() };
        };
        let Some(run) = materialize(cols, p) else { continue };
        let mut target_p = vec![0u64; len];
        let mut bad = false;
        for (i, x) in target {
            match rat_mod_u64(x, p) {
                Some(v) => target_p[*i as usize] = v,
                None => {
                    bad = true;
                    break;
                }
            }
        }
        if bad {
            continue;
        }

        let res = eliminate(&run, &target_p, opts, true, true);
        if res.capped {
            return SpanOutcome::Inconclusive {
                reason: "elimination state over memory cap".into(),
            };
        }
        if res.feasible {
            if res.support.len() > 8192 {
                return SpanOutcome::Inconclusive {
                    reason: format!("witness support {} too large to lift", res.support.len()),
                };
            }
            if let Some(coefficients) =
                solve_columns_exact(cols, &res.support, target, opts, p)
            {
                return SpanOutcome::Member { coefficients };
            }
            continue; // lift failed; retry with a new prime
        }
        // candidate infeasibility: lift the separating functional
        let f0 = functional_mod_p(&res, p);
        let mut crt: Vec<CrtValue> = f0.z.iter().map(|&z| CrtValue::single(z, p)).collect();
        let mut extra = super::modular::filter_primes().skip_while(|&q2| q2 <= p);
        for _round in 0..opts.max_primes {
            let lift: Option<Vec<BigRational>> = crt
                .iter()
                .map(|c| rat_reconstruct(&c.value, &c.modulus))
                .collect();
            if let Some(z_lift) = lift {
                let mut w: SparseVec<BigRational> = vec![(f0.j0, q.one())];
                for (&pv, zv) in f0.pivots.iter().zip(z_lift.iter()) {
                    if !zv.is_zero() {
                        w.push((pv, -zv.clone()));
                    }
                }
                w.sort_by_key(|(i, _)| *i);
                if verify_functional(cols, target, &w) {
                    return SpanOutcome::NotMember { functional: w };
                }
            }
            // add another prime, without block skipping for reproducible pivots
            let Some(p2) = extra.next() else { break };
            let Some(run2) = materialize(cols, p2) else { continue };
            let mut t2 = vec![0u64; len];
            let mut bad2 = false;
            for (i, x) in target {
                match rat_mod_u64(x, p2) {
                    Some(v) => t2[*i as usize] = v,
                    None => {
                        bad2 = true;
                        break;
                    }
                }
            }
            if bad2 {
                continue;
            }
            let res2 = eliminate(&run2, &t2, opts, false, false);
            if res2.capped || res2.feasible {
                continue;
            }
            let f2 = functional_mod_p(&res2, p2);
            if f2.j0 != f0.j0 || f2.pivots != f0.pivots {
                continue;
            }
            for (c, &zv) in crt.iter_mut().zip(f2.z.iter()) {
                c.push(zv, p2);
            }
        }
        // functional lift failed; retry from scratch with a new prime
    }
    SpanOutcome::Inconclusive { reason: "modular span attempts exhausted".into() }
}

fn verify_functional(
    cols: &dyn SpanColumns<BigRational>,
    target: &SparseVec<BigRational>,
    w: &SparseVec<BigRational>,
) -> bool {
    let len = cols.len();
    let w_dense = dense_from_sparse(&Rationals, w, len);
    let mut t_acc = BigRational::zero();
    for (i, x) in target {
        let wv = &w_dense[*i as usize];
        if !wv.is_zero() {
            t_acc += wv * x;
        }
    }
    if t_acc.is_zero() {
        return false;
    }
    for k in 0..cols.count() {
        let mut acc = BigRational::zero();
        for (i, x) in &cols.column(k) {
            let wv = &w_dense[*i as usize];
            if !wv.is_zero() {
                acc += wv * x;
            }
        }
        if !acc.is_zero() {
            return false;
        }
    }
    true
}

/// Exact verification that coefficients reproduce the target.
pub fn verify_membership<F: Field>(
    f: &F,
    cols: &dyn SpanColumns<F::Elem>,
    target: &SparseVec<F::Elem>,
    coefficients: &SparseVec<F::Elem>,
) -> bool {
    let len = cols.len();
    let mut acc = vec![f.zero(); len];
    for (k, c) in coefficients {
        super::dense_axpy(f, &mut acc, c, &cols.column(*k as usize));
    }
    for (i, x) in target {
        acc[*i as usize] = f.sub(&acc[*i as usize], x);
    }
    acc.iter().all(|x| f.is_zero(x))
}

pub(crate) fn sparse_of<F: Field>(f: &F, v: &[F::Elem]) -> SparseVec<F::Elem> {
    sparse_from_dense(f, v)
}
