//! Smith normal form over ℤ.
//!
//! Dense matrices go through an arbitrary-precision reduction that can keep
//! its unimodular transforms. Large sparse incidence matrices are first
//! reduced by eliminating ±1 pivots exactly (which never changes the
//! invariant factors) and only the small remainder is handed to the dense
//! routine.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::sparse::IntMatrix;

pub type BigMatrix = Vec<Vec<BigInt>>;

/// `U·A·V = diag(d₁, d₂, …)` with `d₁ | d₂ | …`.
#[derive(Clone, Debug)]
pub struct SnfResult {
    /// Nonzero invariant factors, each positive, in divisibility order.
    pub invariant_factors: Vec<BigInt>,
    pub rank: usize,
    pub left: Option<BigMatrix>,
    pub right: Option<BigMatrix>,
    /// Inverse of `right`, kept alongside it.
    pub right_inverse: Option<BigMatrix>,
}

impl SnfResult {
    /// Invariant factors greater than one.
    pub fn torsion(&self) -> Vec<BigInt> {
        self.invariant_factors.iter().filter(|d| !d.is_one()).cloned().collect()
    }
}

fn identity(n: usize) -> BigMatrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect()
}

struct Dense {
    a: BigMatrix,
    u: Option<BigMatrix>,
    v: Option<BigMatrix>,
    vinv: Option<BigMatrix>,
}

impl Dense {
    fn swap_rows(&mut self, i: usize, j: usize) {
        self.a.swap(i, j);
        if let Some(u) = &mut self.u {
            u.swap(i, j);
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        for r in &mut self.a {
            r.swap(i, j);
        }
        if let Some(v) = &mut self.v {
            for r in v.iter_mut() {
                r.swap(i, j);
            }
        }
        if let Some(w) = &mut self.vinv {
            w.swap(i, j);
        }
    }

    /// row_i -= q * row_j
    fn row_axpy(&mut self, i: usize, j: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        let rj = self.a[j].clone();
        for (x, y) in self.a[i].iter_mut().zip(&rj) {
            *x -= q * y;
        }
        if let Some(u) = &mut self.u {
            let uj = u[j].clone();
            for (x, y) in u[i].iter_mut().zip(&uj) {
                *x -= q * y;
            }
        }
    }

    /// col_i -= q * col_j
    fn col_axpy(&mut self, i: usize, j: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for r in &mut self.a {
            let y = r[j].clone();
            r[i] -= q * y;
        }
        if let Some(v) = &mut self.v {
            for r in v.iter_mut() {
                let y = r[j].clone();
                r[i] -= q * y;
            }
        }
        // V ← V·E with E = I - q e_j e_iᵀ, so V⁻¹ ← (I + q e_j e_iᵀ)·V⁻¹: row_j += q row_i.
        if let Some(w) = &mut self.vinv {
            let wi = w[i].clone();
            for (x, y) in w[j].iter_mut().zip(&wi) {
                *x += q * y;
            }
        }
    }

    fn negate_row(&mut self, i: usize) {
        for x in &mut self.a[i] {
            *x = -x.clone();
        }
        if let Some(u) = &mut self.u {
            for x in &mut u[i] {
                *x = -x.clone();
            }
        }
    }
}

/// Smallest nonzero |entry| in the trailing block, ties broken by lowest
/// row then lowest column.
fn min_entry(a: &BigMatrix, t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, BigInt)> = None;
    for (i, row) in a.iter().enumerate().skip(t) {
        for (j, x) in row.iter().enumerate().skip(t) {
            if x.is_zero() {
                continue;
            }
            let ax = x.abs();
            if best.as_ref().map_or(true, |b| ax < b.2) {
                best = Some((i, j, ax));
            }
        }
    }
    best.map(|(i, j, _)| (i, j))
}

/// Dense Smith normal form of an integer matrix.
pub fn smith_normal_form(a: &[Vec<i64>], keep_transforms: bool) -> SnfResult {
    let big: BigMatrix = a.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
    smith_normal_form_big(big, keep_transforms)
}

pub fn smith_normal_form_big(a: BigMatrix, keep_transforms: bool) -> SnfResult {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    let mut d = Dense {
        a,
        u: keep_transforms.then(|| identity(m)),
        v: keep_transforms.then(|| identity(n)),
        vinv: keep_transforms.then(|| identity(n)),
    };
    let mut factors = Vec::new();
    for t in 0..m.min(n) {
        let Some((pi, pj)) = min_entry(&d.a, t) else { break };
        d.swap_rows(t, pi);
        d.swap_cols(t, pj);
        loop {
            let mut dirty = false;
            for i in t + 1..m {
                if !d.a[i][t].is_zero() {
                    let q = d.a[i][t].div_floor(&d.a[t][t]);
                    d.row_axpy(i, t, &q);
                    if !d.a[i][t].is_zero() {
                        dirty = true;
                    }
                }
            }
            for j in t + 1..n {
                if !d.a[t][j].is_zero() {
                    let q = d.a[t][j].div_floor(&d.a[t][t]);
                    d.col_axpy(j, t, &q);
                    if !d.a[t][j].is_zero() {
                        dirty = true;
                    }
                }
            }
            if dirty {
                // A remainder smaller than the pivot appeared; move the
                // smallest one in row/column t onto the diagonal.
                let mut best: Option<(bool, usize, BigInt)> = None;
                for i in t + 1..m {
                    let x = d.a[i][t].abs();
                    if !x.is_zero() && best.as_ref().map_or(true, |b| x < b.2) {
                        best = Some((true, i, x));
                    }
                }
                for j in t + 1..n {
                    let x = d.a[t][j].abs();
                    if !x.is_zero() && best.as_ref().map_or(true, |b| x < b.2) {
                        best = Some((false, j, x));
                    }
                }
                match best {
                    Some((true, i, _)) => d.swap_rows(t, i),
                    Some((false, j, _)) => d.swap_cols(t, j),
                    None => {}
                }
                continue;
            }
            let pivot = d.a[t][t].clone();
            let offender = (t + 1..m).find(|&i| (t + 1..n).any(|j| !(&d.a[i][j] % &pivot).is_zero()));
            match offender {
                Some(i) => d.row_axpy(t, i, &BigInt::from(-1)),
                None => break,
            }
        }
        if d.a[t][t].is_negative() {
            d.negate_row(t);
        }
        factors.push(d.a[t][t].clone());
    }
    SnfResult { rank: factors.len(), invariant_factors: factors, left: d.u, right: d.v, right_inverse: d.vinv }
}

/// A pivot taken during sparse elimination: the pivot column, the pivot
/// value, and the pivot row as it was at that moment.
#[derive(Clone, Debug)]
pub(crate) struct Pivot {
    pub col: usize,
    pub value: i64,
    pub row: Vec<(usize, i64)>,
}

pub(crate) struct Reduction {
    pub pivots: Vec<Pivot>,
    /// Rows that still have entries once no further pivot is available.
    pub leftover: Vec<Vec<(usize, i64)>>,
}

/// Coefficient arithmetic for sparse elimination.
trait Coeff {
    fn is_pivot(&self, v: i64) -> bool;
    /// `x - f·y`, with `f` chosen so the pivot column cancels.
    fn factor(&self, a: i64, pivot: i64) -> i64;
    fn sub_mul(&self, x: i64, f: i64, y: i64) -> Option<i64>;
}

struct Integers;

impl Coeff for Integers {
    fn is_pivot(&self, v: i64) -> bool {
        v == 1 || v == -1
    }
    fn factor(&self, a: i64, pivot: i64) -> i64 {
        a * pivot
    }
    fn sub_mul(&self, x: i64, f: i64, y: i64) -> Option<i64> {
        x.checked_sub(f.checked_mul(y)?)
    }
}

const PRIME: i64 = 2_147_483_647;

struct ModP;

impl ModP {
    fn inv(v: i64) -> i64 {
        let (mut base, mut exp, mut acc) = (v.rem_euclid(PRIME), PRIME - 2, 1i64);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = (acc as i128 * base as i128 % PRIME as i128) as i64;
            }
            base = (base as i128 * base as i128 % PRIME as i128) as i64;
            exp >>= 1;
        }
        acc
    }
}

impl Coeff for ModP {
    fn is_pivot(&self, v: i64) -> bool {
        v.rem_euclid(PRIME) != 0
    }
    fn factor(&self, a: i64, pivot: i64) -> i64 {
        (a as i128 * Self::inv(pivot) as i128).rem_euclid(PRIME as i128) as i64
    }
    fn sub_mul(&self, x: i64, f: i64, y: i64) -> Option<i64> {
        Some((x as i128 - f as i128 * y as i128).rem_euclid(PRIME as i128) as i64)
    }
}

fn eliminate<C: Coeff>(m: &IntMatrix, ring: &C, record: bool) -> Option<Reduction> {
    let mut rows: Vec<Vec<(usize, i64)>> = m.rows().to_vec();
    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m.ncols()];
    let mut queue: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (i, r) in rows.iter().enumerate() {
        for &(c, _) in r {
            col_rows[c].insert(i);
        }
        if !r.is_empty() {
            queue.insert((r.len(), i));
        }
    }
    let mut pivots = Vec::new();
    while let Some((len, p)) = queue.pop_first() {
        debug_assert_eq!(len, rows[p].len());
        let Some(&(c, pv)) = rows[p].iter().find(|&&(_, v)| ring.is_pivot(v)) else {
            continue;
        };
        let prow = std::mem::take(&mut rows[p]);
        for &(col, _) in &prow {
            col_rows[col].remove(&p);
        }
        let targets: Vec<usize> = col_rows[c].iter().copied().collect();
        for r in targets {
            let old = std::mem::take(&mut rows[r]);
            let a = old.iter().find(|&&(col, _)| col == c).map(|&(_, v)| v).unwrap();
            let f = ring.factor(a, pv);
            let mut merged = Vec::with_capacity(old.len() + prow.len());
            let (mut i, mut j) = (0, 0);
            while i < old.len() || j < prow.len() {
                let take_old = j >= prow.len() || (i < old.len() && old[i].0 < prow[j].0);
                let take_new = i >= old.len() || (j < prow.len() && prow[j].0 < old[i].0);
                let (col, v) = if take_old {
                    i += 1;
                    old[i - 1]
                } else if take_new {
                    j += 1;
                    (prow[j - 1].0, ring.sub_mul(0, f, prow[j - 1].1)?)
                } else {
                    i += 1;
                    j += 1;
                    (old[i - 1].0, ring.sub_mul(old[i - 1].1, f, prow[j - 1].1)?)
                };
                if v != 0 {
                    merged.push((col, v));
                }
            }
            for &(col, _) in &old {
                col_rows[col].remove(&r);
            }
            for &(col, _) in &merged {
                col_rows[col].insert(r);
            }
            queue.remove(&(old.len(), r));
            if !merged.is_empty() {
                queue.insert((merged.len(), r));
            }
            rows[r] = merged;
        }
        if record {
            pivots.push(Pivot { col: c, value: pv, row: prow });
        } else {
            pivots.push(Pivot { col: c, value: pv, row: Vec::new() });
        }
    }
    let leftover = rows.into_iter().filter(|r| !r.is_empty()).collect();
    Some(Reduction { pivots, leftover })
}

/// Exact integer reduction by ±1 pivots. `None` if an intermediate entry
/// overflows `i64`.
pub(crate) fn unit_eliminate(m: &IntMatrix, record: bool) -> Option<Reduction> {
    eliminate(m, &Integers, record)
}

/// Rank and nonzero invariant factors of a sparse integer matrix.
pub fn sparse_invariant_factors(m: &IntMatrix) -> SnfResult {
    match unit_eliminate(m, false) {
        Some(red) => {
            let units = red.pivots.len();
            let cols: BTreeSet<usize> = red.leftover.iter().flat_map(|r| r.iter().map(|&(c, _)| c)).collect();
            let cols: Vec<usize> = cols.into_iter().collect();
            let dense: Vec<Vec<i64>> = red
                .leftover
                .iter()
                .map(|r| {
                    let mut d = vec![0; cols.len()];
                    for &(c, v) in r {
                        d[cols.binary_search(&c).unwrap()] = v;
                    }
                    d
                })
                .collect();
            let rest = smith_normal_form(&dense, false);
            let mut factors = vec![BigInt::one(); units];
            factors.extend(rest.invariant_factors);
            SnfResult { rank: factors.len(), invariant_factors: factors, left: None, right: None, right_inverse: None }
        }
        None => smith_normal_form(&m.to_dense(), false),
    }
}

/// Rank over GF(2³¹−1); equals the rational rank except for matrices with
/// that prime among their invariant factors.
pub fn rank_mod_p(m: &IntMatrix) -> usize {
    eliminate(m, &ModP, false).map(|r| r.pivots.len()).unwrap_or(0)
}

pub fn to_u64(d: &BigInt) -> u64 {
    d.to_u64().unwrap_or(u64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factors(a: &[Vec<i64>]) -> Vec<i64> {
        smith_normal_form(a, true).invariant_factors.iter().map(|d| d.to_i64().unwrap()).collect()
    }

    fn mul(a: &BigMatrix, b: &BigMatrix) -> BigMatrix {
        let n = b.first().map_or(0, Vec::len);
        a.iter()
            .map(|r| (0..n).map(|j| r.iter().zip(b).map(|(x, row)| x * &row[j]).sum()).collect())
            .collect()
    }

    #[test]
    fn small_examples() {
        assert_eq!(factors(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]), vec![1, 1, 1]);
        assert_eq!(factors(&[vec![2, 4], vec![6, 8]]), vec![2, 4]);
        assert_eq!(smith_normal_form(&[vec![0, 0], vec![0, 0]], false).rank, 0);
    }

    #[test]
    fn transforms_reproduce_diagonal() {
        let a = vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        let r = smith_normal_form(&a, true);
        let big: BigMatrix = a.iter().map(|row| row.iter().map(|&x| BigInt::from(x)).collect()).collect();
        let d = mul(&mul(r.left.as_ref().unwrap(), &big), r.right.as_ref().unwrap());
        for (i, row) in d.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                let expect = if i == j && i < r.rank { r.invariant_factors[i].clone() } else { BigInt::zero() };
                assert_eq!(*x, expect);
            }
        }
        let vv = mul(r.right.as_ref().unwrap(), r.right_inverse.as_ref().unwrap());
        assert_eq!(vv, identity(3));
        assert_eq!(r.invariant_factors, vec![BigInt::from(2), BigInt::from(6), BigInt::from(12)]);
    }

    #[test]
    fn sparse_path_agrees_with_dense() {
        let a = vec![vec![1, -1, 0, 0], vec![0, 2, 2, 0], vec![0, 0, 4, 6], vec![1, 1, 2, 6]];
        let sparse = sparse_invariant_factors(&IntMatrix::from_dense(&a));
        let dense = smith_normal_form(&a, false);
        assert_eq!(sparse.invariant_factors, dense.invariant_factors);
        assert_eq!(rank_mod_p(&IntMatrix::from_dense(&a)), dense.rank);
    }
}
