//! Modular fast path for rational elimination.
//!
//! Rational kernels, row reductions and solves are computed modulo one or
//! more word-sized primes, lifted back to `Q` by CRT plus rational
//! reconstruction, and then certified by exact rational arithmetic. The
//! primes live in `[2^19, 2^20)` so elimination can run with delayed
//! reduction: an axpy accumulates raw `u64` products and only reduces when a
//! value is actually inspected.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::field::Rationals;

use super::elim::kernel_generic;
use super::SparseVec;

/// Lower bound of the filter-prime range; keeps products below 2^40 so tens
/// of thousands of delayed-reduction axpys fit in a `u64` accumulator.
const PRIME_FLOOR: u64 = 1 << 19;

/// Deterministic sequence of filter primes.
pub(crate) fn filter_primes() -> impl Iterator<Item = u64> {
    (PRIME_FLOOR..(1 << 20)).filter(|&n| crate::field::is_prime_u64(n))
}

pub(crate) fn mod_inv(a: u64, p: u64) -> u64 {
    // Fermat; p is prime and a nonzero mod p.
    let mut acc = 1u64;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    acc
}

pub(crate) fn bigint_mod_u64(x: &BigInt, p: u64) -> u64 {
    if let Some(v) = x.to_i64() {
        return v.rem_euclid(p as i64) as u64;
    }
    let m = x.mod_floor(&BigInt::from(p));
    m.to_u64_digits().1.first().copied().unwrap_or(0)
}

/// Residue of a rational mod p, or `None` when the denominator vanishes.
pub(crate) fn rat_mod_u64(x: &BigRational, p: u64) -> Option<u64> {
    let den = bigint_mod_u64(x.denom(), p);
    if den == 0 {
        return None;
    }
    let num = bigint_mod_u64(x.numer(), p);
    Some(num * mod_inv(den, p) % p)
}

/// Incremental row-echelon state over `F_p` with delayed reduction.
/// Rows are normalized (`u32` residues, unit pivot) and sorted by pivot.
pub(crate) struct ModRef {
    pub p: u64,
    pub len: usize,
    pub rows: Vec<Vec<u32>>,
    pub pivots: Vec<u32>,
}

impl ModRef {
    pub fn new(p: u64, len: usize) -> Self {
        ModRef { p, len, rows: Vec::new(), pivots: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn cells(&self) -> usize {
        self.rows.len() * self.len
    }

    /// Reduce an accumulator vector against the current rows. Entries of `v`
    /// may be unreduced sums as long as they stay below 2^63.
    pub fn reduce(&self, v: &mut [u64]) {
        let p = self.p;
        for (r, &pv) in self.pivots.iter().enumerate() {
            let pv = pv as usize;
            let c = v[pv] % p;
            if c == 0 {
                continue;
            }
            let w = p - c;
            let row = &self.rows[r];
            for (d, s) in v[pv..].iter_mut().zip(row[pv..].iter()) {
                *d += w * (*s as u64);
            }
        }
    }

    pub fn normalize(&self, v: &mut [u64]) {
        for x in v.iter_mut() {
            *x %= self.p;
        }
    }

    /// Reduce, normalize and insert `v` if anything survives.
    /// Returns the new pivot column.
    pub fn insert(&mut self, mut v: Vec<u64>) -> Option<u32> {
        self.reduce(&mut v);
        self.normalize(&mut v);
        let lead = v.iter().position(|&x| x != 0)?;
        let inv = mod_inv(v[lead], self.p);
        let row: Vec<u32> = v.iter().map(|&x| (x * inv % self.p) as u32).collect();
        let at = self.pivots.partition_point(|&q| (q as usize) < lead);
        self.pivots.insert(at, lead as u32);
        self.rows.insert(at, row);
        Some(lead as u32)
    }

    /// Back-eliminate pivot columns from earlier rows (full RREF).
    pub fn back_reduce(&mut self) {
        let p = self.p;
        for r in (0..self.rows.len()).rev() {
            let pv = self.pivots[r] as usize;
            let lower = self.rows[r].clone();
            for s in 0..r {
                let c = self.rows[s][pv] as u64;
                if c == 0 {
                    continue;
                }
                let w = p - c;
                let row = &mut self.rows[s];
                for (d, src) in row[pv..].iter_mut().zip(lower[pv..].iter()) {
                    let t = (*d as u64 + w * (*src as u64)) % p;
                    *d = t as u32;
                }
            }
        }
    }

    /// Canonical kernel basis of the row set as constraints. Requires
    /// `back_reduce` to have run.
    pub fn kernel_basis(&self) -> Vec<SparseVec<u64>> {
        let mut is_pivot = vec![false; self.len];
        for &pv in &self.pivots {
            is_pivot[pv as usize] = true;
        }
        let mut out = Vec::new();
        for j in 0..self.len {
            if is_pivot[j] {
                continue;
            }
            let mut v: SparseVec<u64> = Vec::new();
            for (r, &pv) in self.pivots.iter().enumerate() {
                let c = self.rows[r][j] as u64;
                if c != 0 {
                    v.push((pv, self.p - c));
                }
            }
            v.push((j as u32, 1));
            v.sort_by_key(|(i, _)| *i);
            out.push(v);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// CRT and rational reconstruction
// ---------------------------------------------------------------------------

/// Accumulated CRT residue: value in `[0, modulus)`.
#[derive(Clone, Debug)]
pub(crate) struct CrtValue {
    pub value: BigInt,
    pub modulus: BigInt,
}

impl CrtValue {
    pub fn single(r: u64, p: u64) -> Self {
        CrtValue { value: BigInt::from(r), modulus: BigInt::from(p) }
    }

    pub fn push(&mut self, r: u64, p: u64) {
        let pb = BigInt::from(p);
        let cur = bigint_mod_u64(&self.value, p);
        let diff = (r + p - cur) % p;
        let minv = bigint_mod_u64(&self.modulus, p);
        let k = diff * mod_inv(minv, p) % p;
        self.value += &self.modulus * BigInt::from(k);
        self.modulus *= pb;
    }
}

/// Rational reconstruction: the unique `n/d` with `2|n|d < m`, if it exists.
pub(crate) fn rat_reconstruct(a: &BigInt, m: &BigInt) -> Option<BigRational> {
    let bits = m.bits();
    if bits < 4 {
        return None;
    }
    let bound = BigInt::one() << ((bits - 2) / 2);
    let mut r0 = m.clone();
    let mut r1 = a.mod_floor(m);
    let mut t0 = BigInt::zero();
    let mut t1 = BigInt::one();
    while r1 >= bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r2);
        let t2 = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t2);
    }
    if t1.is_zero() {
        return None;
    }
    if t1.is_negative() {
        t1 = -t1;
        r1 = -r1;
    }
    if t1 > bound {
        return None;
    }
    if r1.gcd(&t1) != BigInt::one() && !r1.is_zero() {
        return None;
    }
    Some(BigRational::new(r1, t1))
}

// ---------------------------------------------------------------------------
// Certified rational kernels, row reductions and solves
// ---------------------------------------------------------------------------

fn rows_mod_p(rows: &[SparseVec<BigRational>], p: u64) -> Option<Vec<SparseVec<u64>>> {
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let mut r: SparseVec<u64> = Vec::with_capacity(row.len());
        for (i, x) in row {
            let v = rat_mod_u64(x, p)?;
            if v != 0 {
                r.push((*i, v));
            }
        }
        out.push(r);
    }
    Some(out)
}

fn echelon_mod_p(rows: &[SparseVec<u64>], ncols: usize, p: u64, max_cells: usize) -> Result<ModRef> {
    let mut st = ModRef::new(p, ncols);
    for row in rows {
        if st.cells() > max_cells {
            return Err(Error::CapExceeded(format!(
                "modular elimination state {} x {ncols} over memory cap",
                st.rank()
            )));
        }
        let mut dense = vec![0u64; ncols];
        for (i, x) in row {
            dense[*i as usize] = *x;
        }
        st.insert(dense);
    }
    Ok(st)
}

/// Exact dot of a sparse rational row with a dense rational vector.
fn row_dot(row: &SparseVec<BigRational>, v: &[BigRational]) -> BigRational {
    let mut acc = BigRational::zero();
    for (i, x) in row {
        let y = &v[*i as usize];
        if !y.is_zero() {
            acc += x * y;
        }
    }
    acc
}

/// Certified kernel basis over `Q` in canonical (unit-at-free-column) form.
///
/// Lifts the mod-p kernel and verifies each vector against every constraint
/// exactly; success certifies completeness because the mod-p nullity bounds
/// the rational nullity from above.
pub(crate) fn kernel_rational(
    rows: &[SparseVec<BigRational>],
    ncols: usize,
    max_cells: usize,
    max_primes: usize,
) -> Result<Vec<SparseVec<BigRational>>> {
    let mut primes = filter_primes();
    let mut used: Vec<(u64, Vec<SparseVec<u64>>, Vec<u32>)> = Vec::new();
    let mut best_pivots: Option<Vec<u32>> = None;

    for round in 0..max_primes {
        let p = loop {
            let p = primes.next().ok_or_else(|| Error::CapExceeded("prime pool exhausted".into()))?;
            if rows_mod_p(rows, p).is_some() {
                break p;
            }
        };
        let rows_p = rows_mod_p(rows, p).unwrap();
        let mut st = echelon_mod_p(&rows_p, ncols, p, max_cells)?;
        st.back_reduce();
        let pivots = st.pivots.clone();
        let basis = st.kernel_basis();

        match &best_pivots {
            None => best_pivots = Some(pivots.clone()),
            Some(bp) => {
                if pivots.len() > bp.len() {
                    // higher rank: previous primes were unlucky
                    used.clear();
                    best_pivots = Some(pivots.clone());
                } else if pivots != *bp {
                    continue; // unlucky prime, skip
                }
            }
        }
        used.push((p, basis, pivots));

        // CRT-combine entries across agreeing primes and attempt a lift.
        let nvecs = used[0].1.len();
        let mut lifted: Vec<SparseVec<BigRational>> = Vec::with_capacity(nvecs);
        let mut ok = true;
        'vecs: for k in 0..nvecs {
            let pattern: Vec<u32> = used[0].1[k].iter().map(|(i, _)| *i).collect();
            let mut entries: Vec<BigRational> = Vec::with_capacity(pattern.len());
            for (e_idx, &col) in pattern.iter().enumerate() {
                let mut crt: Option<CrtValue> = None;
                for (p, basis, _) in &used {
                    let val = basis[k]
                        .iter()
                        .find(|(i, _)| *i == col)
                        .map(|(_, v)| *v)
                        .unwrap_or(0);
                    match &mut crt {
                        None => crt = Some(CrtValue::single(val, *p)),
                        Some(c) => c.push(val, *p),
                    }
                }
                let _ = e_idx;
                let c = crt.unwrap();
                match rat_reconstruct(&c.value, &c.modulus) {
                    Some(r) => entries.push(r),
                    None => {
                        ok = false;
                        break 'vecs;
                    }
                }
            }
            lifted.push(
                pattern
                    .into_iter()
                    .zip(entries)
                    .filter(|(_, r)| !r.is_zero())
                    .collect(),
            );
        }
        if ok {
            // exact verification against every constraint row
            let mut all_good = true;
            'check: for v in &lifted {
                let mut dense = vec![BigRational::zero(); ncols];
                for (i, x) in v {
                    dense[*i as usize] = x.clone();
                }
                for row in rows {
                    if !row_dot(row, &dense).is_zero() {
                        all_good = false;
                        break 'check;
                    }
                }
            }
            if all_good {
                return Ok(lifted);
            }
        }
        let _ = round;
    }

    // Certified fallback: plain rational elimination.
    kernel_generic(&Rationals, rows, ncols, max_cells)
}

/// Certified reduced row echelon form of a rational row space.
pub(crate) fn rref_rational(
    rows: &[SparseVec<BigRational>],
    ncols: usize,
    max_cells: usize,
    max_primes: usize,
) -> Result<(Vec<SparseVec<BigRational>>, Vec<u32>)> {
    let mut primes = filter_primes();
    let mut used: Vec<(u64, Vec<Vec<u32>>, Vec<u32>)> = Vec::new();
    let mut best_pivots: Option<Vec<u32>> = None;

    for _ in 0..max_primes {
        let p = loop {
            let p = primes.next().ok_or_else(|| Error::CapExceeded("prime pool exhausted".into()))?;
            if rows_mod_p(rows, p).is_some() {
                break p;
            }
        };
        let rows_p = rows_mod_p(rows, p).unwrap();
        let mut st = echelon_mod_p(&rows_p, ncols, p, max_cells)?;
        st.back_reduce();
        let pivots = st.pivots.clone();
        match &best_pivots {
            None => best_pivots = Some(pivots.clone()),
            Some(bp) => {
                if pivots.len() > bp.len() {
                    used.clear();
                    best_pivots = Some(pivots.clone());
                } else if pivots != *bp {
                    continue;
                }
            }
        }
        used.push((p, st.rows.clone(), pivots.clone()));

        let nrows = used[0].1.len();
        let mut lifted: Vec<SparseVec<BigRational>> = Vec::with_capacity(nrows);
        let mut ok = true;
        'rows: for r in 0..nrows {
            let mut v: SparseVec<BigRational> = Vec::new();
            for j in 0..ncols {
                if used.iter().all(|(_, rws, _)| rws[r][j] == 0) {
                    continue;
                }
                let mut crt: Option<CrtValue> = None;
                for (p, rws, _) in &used {
                    let val = rws[r][j] as u64;
                    match &mut crt {
                        None => crt = Some(CrtValue::single(val, *p)),
                        Some(c) => c.push(val, *p),
                    }
                }
                let acc = crt.unwrap();
                match rat_reconstruct(&acc.value, &acc.modulus) {
                    Some(x) => {
                        if !x.is_zero() {
                            v.push((j as u32, x));
                        }
                    }
                    None => {
                        ok = false;
                        break 'rows;
                    }
                }
            }
            lifted.push(v);
        }
        if ok {
            // verify: every original row must reduce to zero against the lift
            let piv = best_pivots.clone().unwrap();
            if verify_rowspace(rows, &lifted, &piv, ncols) {
                return Ok((lifted, piv));
            }
        }
    }

    super::elim::rref_generic(&Rationals, rows, ncols, max_cells)
}

fn verify_rowspace(
    rows: &[SparseVec<BigRational>],
    rref: &[SparseVec<BigRational>],
    pivots: &[u32],
    ncols: usize,
) -> bool {
    for row in rows {
        let mut dense = vec![BigRational::zero(); ncols];
        for (i, x) in row {
            dense[*i as usize] = x.clone();
        }
        for (r, &pv) in pivots.iter().enumerate() {
            let c = dense[pv as usize].clone();
            if c.is_zero() {
                continue;
            }
            for (j, x) in &rref[r] {
                let t = &c * x;
                dense[*j as usize] -= t;
            }
        }
        if dense.iter().any(|x| !x.is_zero()) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn reconstruct_small_fractions() {
        let p = 524309u64;
        // encode 3/7 mod p
        let enc = 3 * mod_inv(7, p) % p;
        let r = rat_reconstruct(&BigInt::from(enc), &BigInt::from(p)).unwrap();
        assert_eq!(r, q(3, 7));
    }

    #[test]
    fn crt_push_consistency() {
        let mut c = CrtValue::single(5 % 524309, 524309);
        c.push(5 % 524341, 524341);
        assert_eq!(c.value, BigInt::from(5));
    }

    #[test]
    fn certified_kernel_matches_generic() {
        // kernel of [[1,2,3],[2,4,6],[0,1,1]] over Q has dimension 1
        let rows: Vec<SparseVec<BigRational>> = vec![
            vec![(0, q(1, 1)), (1, q(2, 1)), (2, q(3, 1))],
            vec![(0, q(2, 1)), (1, q(4, 1)), (2, q(6, 1))],
            vec![(1, q(1, 1)), (2, q(1, 1))],
        ];
        let ker = kernel_rational(&rows, 3, 1 << 20, 8).unwrap();
        assert_eq!(ker.len(), 1);
        let dense: Vec<BigRational> = {
            let mut d = vec![BigRational::zero(); 3];
            for (i, x) in &ker[0] {
                d[*i as usize] = x.clone();
            }
            d
        };
        for row in &rows {
            assert!(row_dot(row, &dense).is_zero());
        }
    }

    #[test]
    fn certified_rref_fractions() {
        // rowspace of [[2,1],[0,3]] has RREF [[1,0],[0,1]]
        let rows: Vec<SparseVec<BigRational>> = vec![
            vec![(0, q(2, 1)), (1, q(1, 1))],
            vec![(1, q(3, 1))],
        ];
        let (rref, piv) = rref_rational(&rows, 2, 1 << 20, 8).unwrap();
        assert_eq!(piv, vec![0, 1]);
        assert_eq!(rref[0], vec![(0, q(1, 1))]);
        assert_eq!(rref[1], vec![(1, q(1, 1))]);
    }

    #[test]
    fn modref_rank_and_kernel() {
        let p = 524309;
        let mut st = ModRef::new(p, 3);
        st.insert(vec![1, 2, 3]);
        st.insert(vec![2, 4, 6]);
        st.insert(vec![0, 1, 1]);
        assert_eq!(st.rank(), 2);
        st.back_reduce();
        let ker = st.kernel_basis();
        assert_eq!(ker.len(), 1);
    }
}
