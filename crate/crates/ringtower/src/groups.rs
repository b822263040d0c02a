//! Finite permutation groups by explicit enumeration: closure, subgroup
//! tests, normal closure, cosets and double cosets.
//!
//! Everything here targets desk-scale orders (cap 5040 by default), so full
//! element lists replace stabilizer chains; the sorted element list doubles
//! as the canonical basis order for group algebras downstream.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// A permutation of `{0, .., degree-1}` in image form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm {
    images: Vec<usize>,
}

impl Perm {
    pub fn identity(degree: usize) -> Perm {
        Perm { images: (0..degree).collect() }
    }

    pub fn new(images: Vec<usize>) -> Result<Perm> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            if i >= images.len() || seen[i] {
                return Err(Error::Parse { line: 0, msg: "not a bijection".into() });
            }
            seen[i] = true;
        }
        Ok(Perm { images })
    }

    /// Build from disjoint cycles on 0-based points.
    pub fn from_cycles(degree: usize, cycles: &[Vec<usize>]) -> Result<Perm> {
        let mut images: Vec<usize> = (0..degree).collect();
        for c in cycles {
            for w in 0..c.len() {
                let from = c[w];
                let to = c[(w + 1) % c.len()];
                if from >= degree || to >= degree {
                    return Err(Error::DegreeMismatch(format!(
                        "point {} out of range for degree {degree}",
                        from.max(to)
                    )));
                }
                images[from] = to;
            }
        }
        Perm::new(images)
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn apply(&self, point: usize) -> usize {
        self.images[point]
    }

    /// `(self * other)(x) = self(other(x))`.
    pub fn compose(&self, other: &Perm) -> Perm {
        debug_assert_eq!(self.degree(), other.degree());
        Perm { images: (0..self.degree()).map(|x| self.images[other.images[x]]).collect() }
    }

    pub fn inverse(&self) -> Perm {
        let mut images = vec![0; self.degree()];
        for (i, &j) in self.images.iter().enumerate() {
            images[j] = i;
        }
        Perm { images }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Pad to a larger degree (new points fixed).
    pub fn extend_to(&self, degree: usize) -> Perm {
        let mut images = self.images.clone();
        images.extend(images.len()..degree);
        Perm { images }
    }

    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.degree()];
        let mut out = Vec::new();
        for start in 0..self.degree() {
            if seen[start] || self.images[start] == start {
                seen[start] = true;
                continue;
            }
            let mut cyc = vec![start];
            seen[start] = true;
            let mut x = self.images[start];
            while x != start {
                seen[x] = true;
                cyc.push(x);
                x = self.images[x];
            }
            out.push(cyc);
        }
        out
    }
}

impl fmt::Display for Perm {
    /// Disjoint-cycle notation on 1-based points; identity prints `()`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return write!(f, "()");
        }
        for c in cycles {
            write!(f, "(")?;
            for (k, p) in c.iter().enumerate() {
                if k > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{}", p + 1)?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Parse one permutation in cycle notation on 1-based points, e.g.
/// `(1 2 3)(4 5)`. Commas are accepted as separators. `()` or `e` is the
/// identity.
pub fn parse_perm(s: &str, degree: usize, line: usize) -> Result<Perm> {
    let s = s.trim();
    if s == "e" || s == "()" {
        return Ok(Perm::identity(degree));
    }
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    let mut cur: Option<Vec<usize>> = None;
    let mut num = String::new();
    let flush_num = |num: &mut String, cur: &mut Option<Vec<usize>>| -> Result<()> {
        if num.is_empty() {
            return Ok(());
        }
        let v: usize = num.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad point {num:?}"),
        })?;
        if v == 0 {
            return Err(Error::Parse { line, msg: "points are 1-based".into() });
        }
        match cur {
            Some(c) => c.push(v - 1),
            None => return Err(Error::Parse { line, msg: "point outside cycle".into() }),
        }
        num.clear();
        Ok(())
    };
    for ch in s.chars() {
        match ch {
            '(' => {
                if cur.is_some() {
                    return Err(Error::Parse { line, msg: "nested parenthesis".into() });
                }
                cur = Some(Vec::new());
            }
            ')' => {
                flush_num(&mut num, &mut cur)?;
                match cur.take() {
                    Some(c) => {
                        if !c.is_empty() {
                            cycles.push(c);
                        }
                    }
                    None => return Err(Error::Parse { line, msg: "unmatched )".into() }),
                }
            }
            '0'..='9' => num.push(ch),
            ' ' | ',' | '\t' => flush_num(&mut num, &mut cur)?,
            other => {
                return Err(Error::Parse { line, msg: format!("unexpected character {other:?}") })
            }
        }
    }
    if cur.is_some() {
        return Err(Error::Parse { line, msg: "unmatched (".into() });
    }
    let max_point = cycles.iter().flatten().copied().max().map_or(0, |m| m + 1);
    Perm::from_cycles(degree.max(max_point), &cycles)
}

/// A finite permutation group with its full, lexicographically sorted
/// element list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermGroup {
    degree: usize,
    generators: Vec<Perm>,
    elements: Vec<Perm>,
}

impl PermGroup {
    /// Closure of a generating set; deterministic lexicographic element order.
    pub fn closure(degree: usize, generators: &[Perm], cap: usize) -> Result<PermGroup> {
        for g in generators {
            if g.degree() != degree {
                return Err(Error::DegreeMismatch(format!(
                    "generator degree {} vs {}",
                    g.degree(),
                    degree
                )));
            }
        }
        let mut set: BTreeSet<Perm> = BTreeSet::new();
        set.insert(Perm::identity(degree));
        let mut frontier: Vec<Perm> = vec![Perm::identity(degree)];
        while let Some(x) = frontier.pop() {
            for g in generators {
                let y = g.compose(&x);
                if !set.contains(&y) {
                    if set.len() >= cap {
                        return Err(Error::OrderCapExceeded { cap });
                    }
                    set.insert(y.clone());
                    frontier.push(y);
                }
            }
        }
        Ok(PermGroup {
            degree,
            generators: generators.to_vec(),
            elements: set.into_iter().collect(),
        })
    }

    pub fn trivial(degree: usize) -> PermGroup {
        PermGroup::closure(degree, &[], 2).unwrap()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn generators(&self) -> &[Perm] {
        &self.generators
    }

    /// Sorted element list; the canonical basis order downstream.
    pub fn elements(&self) -> &[Perm] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &Perm {
        &self.elements[i]
    }

    pub fn contains(&self, p: &Perm) -> bool {
        p.degree() == self.degree && self.elements.binary_search(p).is_ok()
    }

    pub fn index_of(&self, p: &Perm) -> Option<usize> {
        self.elements.binary_search(p).ok()
    }

    pub fn is_subgroup_of(&self, other: &PermGroup) -> bool {
        self.degree == other.degree && self.elements.iter().all(|e| other.contains(e))
    }

    /// Conjugate subgroup `g * self * g^-1`.
    pub fn conjugate_by(&self, g: &Perm) -> PermGroup {
        let gi = g.inverse();
        let mut elements: Vec<Perm> =
            self.elements.iter().map(|h| g.compose(h).compose(&gi)).collect();
        elements.sort();
        let generators = self.generators.iter().map(|h| g.compose(h).compose(&gi)).collect();
        PermGroup { degree: self.degree, generators, elements }
    }
}

/// Smallest normal subgroup of `g` containing `k`; conjugation-closure sweep
/// until fixed point.
pub fn normal_closure(k: &PermGroup, g: &PermGroup, cap: usize) -> Result<PermGroup> {
    if !k.is_subgroup_of(g) {
        return Err(Error::NotASubgroup("normal_closure requires k <= g".into()));
    }
    let mut gens: Vec<Perm> = k.generators().to_vec();
    if gens.is_empty() {
        gens.push(Perm::identity(g.degree()));
    }
    loop {
        let cur = PermGroup::closure(g.degree(), &gens, cap)?;
        let mut new_gens: Vec<Perm> = Vec::new();
        for x in g.generators() {
            let xi = x.inverse();
            for h in cur.elements() {
                let c = x.compose(h).compose(&xi);
                if !cur.contains(&c) {
                    new_gens.push(c);
                }
            }
        }
        if new_gens.is_empty() {
            return Ok(cur);
        }
        gens = cur.generators().to_vec();
        gens.extend(new_gens);
    }
}

pub fn is_normal(h: &PermGroup, g: &PermGroup) -> Result<bool> {
    if !h.is_subgroup_of(g) {
        return Err(Error::NotASubgroup("is_normal requires h <= g".into()));
    }
    for x in g.generators() {
        let xi = x.inverse();
        for e in h.elements() {
            if !h.contains(&x.compose(e).compose(&xi)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Representatives of the double cosets `H g K` in `g`, least element per
/// cell, sorted. Returned as indices into `g.elements()`.
pub fn double_cosets(g: &PermGroup, h: &PermGroup, k: &PermGroup) -> Result<Vec<usize>> {
    if !h.is_subgroup_of(g) || !k.is_subgroup_of(g) {
        return Err(Error::NotASubgroup("double_cosets requires h, k <= g".into()));
    }
    let n = g.order();
    let mut cell = vec![usize::MAX; n];
    let mut reps = Vec::new();
    for i in 0..n {
        if cell[i] != usize::MAX {
            continue;
        }
        // elements are sorted, so the first unassigned element is the least
        // element of its cell
        reps.push(i);
        let rep = g.element(i);
        for a in h.elements() {
            let ar = a.compose(rep);
            for b in k.elements() {
                let x = ar.compose(b);
                let j = g.index_of(&x).expect("closed under multiplication");
                cell[j] = i;
            }
        }
    }
    Ok(reps)
}

/// Left coset representatives of `h` in `g` (cells `x h`), least element per
/// cell, as indices into `g.elements()`.
pub fn left_coset_reps(g: &PermGroup, h: &PermGroup) -> Result<Vec<usize>> {
    if !h.is_subgroup_of(g) {
        return Err(Error::NotASubgroup("left_coset_reps requires h <= g".into()));
    }
    let n = g.order();
    let mut assigned = vec![false; n];
    let mut reps = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        reps.push(i);
        let rep = g.element(i);
        for b in h.elements() {
            let x = rep.compose(b);
            let j = g.index_of(&x).expect("closed");
            assigned[j] = true;
        }
    }
    Ok(reps)
}

// ---------------------------------------------------------------------------
// Named groups and subgroup enumeration
// ---------------------------------------------------------------------------

pub fn symmetric(n: usize) -> PermGroup {
    let mut gens = Vec::new();
    if n >= 2 {
        gens.push(Perm::from_cycles(n, &[vec![0, 1]]).unwrap());
    }
    if n >= 3 {
        gens.push(Perm::from_cycles(n, &[(0..n).collect()]).unwrap());
    }
    PermGroup::closure(n, &gens, 50_000).unwrap()
}

pub fn alternating(n: usize) -> PermGroup {
    let mut gens = Vec::new();
    if n >= 3 {
        gens.push(Perm::from_cycles(n, &[vec![0, 1, 2]]).unwrap());
    }
    if n >= 4 {
        if n % 2 == 1 {
            gens.push(Perm::from_cycles(n, &[(0..n).collect()]).unwrap());
        } else {
            gens.push(Perm::from_cycles(n, &[(1..n).collect()]).unwrap());
        }
    }
    PermGroup::closure(n, &gens, 50_000).unwrap()
}

pub fn cyclic(n: usize) -> PermGroup {
    let gens = vec![Perm::from_cycles(n, &[(0..n).collect()]).unwrap()];
    PermGroup::closure(n, &gens, 50_000).unwrap()
}

/// Symmetries of the square on 4 points (order 8).
pub fn dihedral_square() -> PermGroup {
    let r = Perm::from_cycles(4, &[vec![0, 1, 2, 3]]).unwrap();
    let s = Perm::from_cycles(4, &[vec![0, 2]]).unwrap();
    PermGroup::closure(4, &[r, s], 64).unwrap()
}

/// The quaternion group of order 8 via its regular representation.
pub fn quaternion() -> PermGroup {
    // elements 0..8 = 1, -1, i, -i, j, -j, k, -k; build the left
    // multiplication tables of i and j from the sign/axis form.
    #[derive(Clone, Copy, PartialEq)]
    struct Q(i32, usize); // sign, axis in {1=1, i=2, j=3, k=4}
    fn mul(a: Q, b: Q) -> Q {
        let Q(sa, xa) = a;
        let Q(sb, xb) = b;
        let s = sa * sb;
        match (xa, xb) {
            (1, x) => Q(s, x),
            (x, 1) => Q(s, x),
            (2, 2) | (3, 3) | (4, 4) => Q(-s, 1),
            (2, 3) => Q(s, 4),
            (3, 2) => Q(-s, 4),
            (3, 4) => Q(s, 2),
            (4, 3) => Q(-s, 2),
            (4, 2) => Q(s, 3),
            (2, 4) => Q(-s, 3),
            _ => unreachable!(),
        }
    }
    let elems = [
        Q(1, 1),
        Q(-1, 1),
        Q(1, 2),
        Q(-1, 2),
        Q(1, 3),
        Q(-1, 3),
        Q(1, 4),
        Q(-1, 4),
    ];
    let idx = |q: Q| elems.iter().position(|&e| e == q).unwrap();
    let perm_of = |a: Q| -> Perm {
        Perm::new((0..8).map(|j| idx(mul(a, elems[j]))).collect()).unwrap()
    };
    let gens = vec![perm_of(Q(1, 2)), perm_of(Q(1, 3))];
    PermGroup::closure(8, &gens, 16).unwrap()
}

/// The normal Klein four-group inside S4.
pub fn klein_four_in_s4() -> PermGroup {
    let a = Perm::from_cycles(4, &[vec![0, 1], vec![2, 3]]).unwrap();
    let b = Perm::from_cycles(4, &[vec![0, 2], vec![1, 3]]).unwrap();
    PermGroup::closure(4, &[a, b], 16).unwrap()
}

/// Every subgroup, found by saturating one-generator extensions.
pub fn all_subgroups(g: &PermGroup) -> Vec<PermGroup> {
    let mut seen: BTreeSet<Vec<Perm>> = BTreeSet::new();
    let trivial = PermGroup::trivial(g.degree());
    seen.insert(trivial.elements().to_vec());
    let mut out = vec![trivial];
    let mut frontier = vec![0usize];
    while let Some(i) = frontier.pop() {
        let base = out[i].clone();
        for x in g.elements() {
            if base.contains(x) {
                continue;
            }
            let mut gens = base.generators().to_vec();
            gens.push(x.clone());
            let ext = PermGroup::closure(g.degree(), &gens, g.order() + 1).unwrap();
            if !ext.is_subgroup_of(g) {
                continue;
            }
            if seen.insert(ext.elements().to_vec()) {
                out.push(ext.clone());
                frontier.push(out.len() - 1);
            }
        }
    }
    out.sort_by_key(|h| (h.order(), h.elements().to_vec()));
    out
}

/// Canonical key of `(H, K)` under simultaneous conjugation by `G`; conjugate
/// pairs give isomorphic towers, so catalogs deduplicate on this.
pub fn conjugacy_key(g: &PermGroup, h: &PermGroup, k: &PermGroup) -> Vec<Perm> {
    let mut best: Option<Vec<Perm>> = None;
    for x in g.elements() {
        let hc = h.conjugate_by(x);
        let kc = k.conjugate_by(x);
        let mut key = hc.elements().to_vec();
        key.extend(kc.elements().iter().cloned());
        if best.as_ref().map_or(true, |b| key < *b) {
            best = Some(key);
        }
    }
    best.unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_basics() {
        assert_eq!(PermGroup::trivial(3).order(), 1);
        let s3 = symmetric(3);
        assert_eq!(s3.order(), 6);
        let v4 = klein_four_in_s4();
        assert_eq!(v4.order(), 4);
        assert_eq!(quaternion().order(), 8);
        assert_eq!(dihedral_square().order(), 8);
        assert_eq!(alternating(4).order(), 12);
    }

    #[test]
    fn closure_cap() {
        let s4 = symmetric(4);
        let err = PermGroup::closure(4, s4.generators(), 10);
        assert!(matches!(err, Err(Error::OrderCapExceeded { cap: 10 })));
    }

    #[test]
    fn normal_closure_examples() {
        let s3 = symmetric(3);
        let t = PermGroup::closure(3, &[parse_perm("(1 2)", 3, 0).unwrap()], 10).unwrap();
        let nc = normal_closure(&t, &s3, 100).unwrap();
        assert_eq!(nc.order(), 6); // transpositions generate S3

        let a3 = alternating(3);
        let nc2 = normal_closure(&a3, &s3, 100).unwrap();
        assert_eq!(nc2.elements(), a3.elements()); // already normal

        let s4 = symmetric(4);
        let dt = PermGroup::closure(4, &[parse_perm("(1 2)(3 4)", 4, 0).unwrap()], 10).unwrap();
        let nc3 = normal_closure(&dt, &s4, 100).unwrap();
        assert_eq!(nc3.order(), 4); // the Klein four-group
    }

    #[test]
    fn normal_closure_idempotent_and_normal() {
        let s4 = symmetric(4);
        for h in [cyclic(4), alternating(4), dihedral_square()] {
            if !h.is_subgroup_of(&s4) {
                continue;
            }
            let nc = normal_closure(&h, &s4, 100).unwrap();
            assert!(is_normal(&nc, &s4).unwrap());
            let nc2 = normal_closure(&nc, &s4, 100).unwrap();
            assert_eq!(nc.elements(), nc2.elements());
        }
    }

    #[test]
    fn double_coset_partition() {
        let s3 = symmetric(3);
        let h = PermGroup::closure(3, &[parse_perm("(1 2)", 3, 0).unwrap()], 10).unwrap();
        let reps = double_cosets(&s3, &h, &h).unwrap();
        assert_eq!(reps.len(), 2);
        // cell sizes 2 and 4
        let mut sizes: Vec<usize> = reps
            .iter()
            .map(|&i| {
                let rep = s3.element(i);
                let mut cell = BTreeSet::new();
                for a in h.elements() {
                    for b in h.elements() {
                        cell.insert(a.compose(rep).compose(b));
                    }
                }
                cell.len()
            })
            .collect();
        sizes.sort();
        assert_eq!(sizes, vec![2, 4]);

        // trivial cases
        let whole = double_cosets(&s3, &s3, &s3).unwrap();
        assert_eq!(whole.len(), 1);
        let trivial = PermGroup::trivial(3);
        let singletons = double_cosets(&s3, &trivial, &trivial).unwrap();
        assert_eq!(singletons.len(), 6);
    }

    #[test]
    fn double_coset_size_formula() {
        // |HgK| = |H| |K| / |H meet gKg^-1|, checked by enumeration
        let s4 = symmetric(4);
        let h = PermGroup::closure(4, &[parse_perm("(1 2)", 4, 0).unwrap()], 10).unwrap();
        let k = cyclic(4);
        let reps = double_cosets(&s4, &h, &k).unwrap();
        let mut total = 0usize;
        for &i in &reps {
            let rep = s4.element(i);
            let mut cell = BTreeSet::new();
            for a in h.elements() {
                for b in k.elements() {
                    cell.insert(a.compose(rep).compose(b));
                }
            }
            let gi = rep.inverse();
            let meet = k
                .elements()
                .iter()
                .filter(|x| h.contains(&rep.compose(x).compose(&gi)))
                .count();
            assert_eq!(cell.len(), h.order() * k.order() / meet);
            total += cell.len();
        }
        assert_eq!(total, s4.order());
    }

    #[test]
    fn normality_checks() {
        let s3 = symmetric(3);
        let a3 = alternating(3);
        assert!(is_normal(&a3, &s3).unwrap());
        let t = PermGroup::closure(3, &[parse_perm("(1 2)", 3, 0).unwrap()], 10).unwrap();
        assert!(!is_normal(&t, &s3).unwrap());
        assert!(is_normal(&t, &t).unwrap());
        // is_normal(h, g) iff normal_closure(h, g) == h
        assert_eq!(
            normal_closure(&t, &s3, 100).unwrap().order() == t.order(),
            is_normal(&t, &s3).unwrap()
        );
    }

    #[test]
    fn subgroup_enumeration_s4() {
        let s4 = symmetric(4);
        let subs = all_subgroups(&s4);
        assert_eq!(subs.len(), 30);
        let s3 = symmetric(3);
        assert_eq!(all_subgroups(&s3).len(), 6);
        let q8 = quaternion();
        assert_eq!(all_subgroups(&q8).len(), 6);
    }

    #[test]
    fn parse_and_display() {
        let p = parse_perm("(1 2 3)(4 5)", 5, 1).unwrap();
        assert_eq!(p.to_string(), "(1 2 3)(4 5)");
        assert_eq!(parse_perm("()", 3, 1).unwrap(), Perm::identity(3));
        assert!(parse_perm("(0 1)", 3, 1).is_err());
        assert!(parse_perm("(1 2", 3, 1).is_err());
    }
}
