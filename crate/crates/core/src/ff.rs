//! Dense matrices over prime fields F_p.
//!
//! Entries are stored row-major as `u32` values already reduced mod `p`.
//! Products are formed in `u64` and reduced immediately, which is exact for
//! every prime below 2^16.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible field characteristic (exclusive).
pub const MAX_PRIME: u32 = 1 << 16;

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub(crate) fn check_prime(p: u32) -> Result<()> {
    if p < MAX_PRIME && is_prime(p) {
        Ok(())
    } else {
        Err(Error::NotPrime(p))
    }
}

/// Multiplicative inverse of a nonzero element via Fermat's little theorem.
pub fn inv_mod(a: u32, p: u32) -> u32 {
    debug_assert!(a % p != 0);
    pow_mod(a, p - 2, p)
}

pub fn pow_mod(base: u32, mut exp: u32, p: u32) -> u32 {
    let p64 = p as u64;
    let mut acc = 1u64 % p64;
    let mut b = base as u64 % p64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % p64;
        }
        b = b * b % p64;
        exp >>= 1;
    }
    acc as u32
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FpMatrix {
    p: u32,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl fmt::Debug for FpMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FpMatrix(p={}, {}x{})", self.p, self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

impl FpMatrix {
    pub fn zeros(p: u32, rows: usize, cols: usize) -> Result<Self> {
        check_prime(p)?;
        Ok(FpMatrix {
            p,
            rows,
            cols,
            data: vec![0; rows * cols],
        })
    }

    pub fn identity(p: u32, n: usize) -> Result<Self> {
        let mut m = Self::zeros(p, n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        Ok(m)
    }

    /// Builds a matrix from row-major entries, rejecting anything outside `[0, p)`.
    pub fn from_vec(p: u32, rows: usize, cols: usize, data: Vec<u32>) -> Result<Self> {
        check_prime(p)?;
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|&&v| v >= p) {
            return Err(Error::Dimension(format!(
                "entry {bad} is out of field F_{p}"
            )));
        }
        Ok(FpMatrix {
            p,
            rows,
            cols,
            data,
        })
    }

    pub fn from_rows(p: u32, rows: &[Vec<u32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::from_vec(p, rows.len(), cols, rows.concat())
    }

    /// The q x q down-shift matrix with `n` ones: the `n` leading input
    /// coordinates land on the `n` trailing output coordinates.
    pub fn shift(p: u32, q: usize, n: usize) -> Result<Self> {
        if n > q {
            return Err(Error::Dimension(format!("shift {n} exceeds dimension {q}")));
        }
        let mut m = Self::zeros(p, q, q)?;
        for j in 0..n {
            m.data[(j + q - n) * q + j] = 1;
        }
        Ok(m)
    }

    /// Uniformly random matrix.
    pub fn random<R: Rng + ?Sized>(p: u32, rows: usize, cols: usize, rng: &mut R) -> Result<Self> {
        check_prime(p)?;
        let data = (0..rows * cols).map(|_| rng.random_range(0..p)).collect();
        Ok(FpMatrix {
            p,
            rows,
            cols,
            data,
        })
    }

    /// Uniformly random q x q permutation matrix.
    pub fn random_permutation<R: Rng + ?Sized>(p: u32, q: usize, rng: &mut R) -> Result<Self> {
        let mut perm: Vec<usize> = (0..q).collect();
        perm.shuffle(rng);
        let mut m = Self::zeros(p, q, q)?;
        for (r, &c) in perm.iter().enumerate() {
            m.data[r * q + c] = 1;
        }
        Ok(m)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: u32) {
        self.data[r * self.cols + c] = v % self.p;
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        FpMatrix {
            p: self.p,
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    fn same_field(&self, other: &Self) -> Result<()> {
        if self.p != other.p {
            return Err(Error::Dimension(format!(
                "field mismatch: F_{} vs F_{}",
                self.p, other.p
            )));
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_field(other)?;
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let p = self.p as u64;
        let mut data = vec![0u32; self.rows * other.cols];
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k] as u64;
                if a == 0 {
                    continue;
                }
                for c in 0..other.cols {
                    let idx = r * other.cols + c;
                    data[idx] = ((data[idx] as u64 + a * other.data[k * other.cols + c] as u64) % p) as u32;
                }
            }
        }
        Ok(FpMatrix {
            p: self.p,
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_field(other)?;
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension("cannot add matrices of different shape".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| ((a as u64 + b as u64) % self.p as u64) as u32)
            .collect();
        Ok(FpMatrix {
            p: self.p,
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn mul_vec(&self, x: &[u32]) -> Result<Vec<u32>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "vector of length {} for a {}x{} matrix",
                x.len(),
                self.rows,
                self.cols
            )));
        }
        let p = self.p as u64;
        Ok((0..self.rows)
            .map(|r| {
                let acc = self
                    .row(r)
                    .iter()
                    .zip(x)
                    .fold(0u64, |acc, (&a, &b)| (acc + a as u64 * (b as u64 % p)) % p);
                acc as u32
            })
            .collect())
    }

    /// Stacks matrices vertically (all must share `p` and column count).
    pub fn vstack(parts: &[&FpMatrix]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Dimension("vstack of nothing".into()))?;
        let mut data = Vec::new();
        let mut rows = 0;
        for m in parts {
            first.same_field(m)?;
            if m.cols != first.cols {
                return Err(Error::Dimension("vstack column mismatch".into()));
            }
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        Ok(FpMatrix {
            p: first.p,
            rows,
            cols: first.cols,
            data,
        })
    }

    /// Writes `block` into `self` with its top-left corner at (`r0`, `c0`).
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &FpMatrix) -> Result<()> {
        self.same_field(block)?;
        if r0 + block.rows > self.rows || c0 + block.cols > self.cols {
            return Err(Error::Dimension("block does not fit".into()));
        }
        for r in 0..block.rows {
            let dst = (r0 + r) * self.cols + c0;
            self.data[dst..dst + block.cols].copy_from_slice(block.row(r));
        }
        Ok(())
    }

    /// Selects a subset of columns, in the given order.
    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            for &c in cols {
                data.push(self.data[r * self.cols + c]);
            }
        }
        FpMatrix {
            p: self.p,
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    /// Reduced row echelon form together with the pivot columns.
    pub fn rref(&self) -> (FpMatrix, Vec<usize>) {
        let mut m = self.clone();
        let pivots = m.eliminate();
        (m, pivots)
    }

    /// In-place Gauss-Jordan elimination; returns pivot columns.
    fn eliminate(&mut self) -> Vec<usize> {
        let p = self.p as u64;
        let (rows, cols) = (self.rows, self.cols);
        let mut pivots = Vec::new();
        let mut pr = 0;
        for c in 0..cols {
            if pr == rows {
                break;
            }
            let Some(sel) = (pr..rows).find(|&r| self.data[r * cols + c] != 0) else {
                continue;
            };
            if sel != pr {
                for k in 0..cols {
                    self.data.swap(sel * cols + k, pr * cols + k);
                }
            }
            let inv = inv_mod(self.data[pr * cols + c], self.p) as u64;
            for k in c..cols {
                let idx = pr * cols + k;
                self.data[idx] = (self.data[idx] as u64 * inv % p) as u32;
            }
            for r in 0..rows {
                if r == pr {
                    continue;
                }
                let f = self.data[r * cols + c] as u64;
                if f == 0 {
                    continue;
                }
                for k in c..cols {
                    let sub = f * self.data[pr * cols + k] as u64 % p;
                    let idx = r * cols + k;
                    self.data[idx] = ((self.data[idx] as u64 + p - sub) % p) as u32;
                }
            }
            pivots.push(c);
            pr += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().eliminate().len()
    }

    /// Any solution `x` of `self * x = y`, or `None` if the system is
    /// inconsistent. Free variables are set to zero.
    pub fn solve(&self, y: &[u32]) -> Result<Option<Vec<u32>>> {
        if y.len() != self.rows {
            return Err(Error::Dimension(format!(
                "right-hand side of length {} for {} rows",
                y.len(),
                self.rows
            )));
        }
        let cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.push(y[r] % self.p);
        }
        let mut aug = FpMatrix {
            p: self.p,
            rows: self.rows,
            cols,
            data,
        };
        let pivots = aug.eliminate();
        if pivots.last() == Some(&self.cols) {
            return Ok(None);
        }
        let mut x = vec![0u32; self.cols];
        for (r, &c) in pivots.iter().enumerate() {
            x[c] = aug.data[r * cols + self.cols];
        }
        Ok(Some(x))
    }

    /// Basis of the right null space, one vector per free column.
    pub fn kernel(&self) -> Vec<Vec<u32>> {
        let (r, pivots) = self.rref();
        let p = self.p;
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![0u32; self.cols];
                v[f] = 1;
                for (row, &pc) in pivots.iter().enumerate() {
                    let a = r.get(row, f);
                    v[pc] = (p - a) % p;
                }
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Pivot counting by fraction-free elimination: rows are combined as
    /// `a*r_j - b*r_i` without ever forming an inverse.
    fn fraction_free_rank(m: &FpMatrix) -> usize {
        let p = m.p() as i64;
        let mut a: Vec<Vec<i64>> = m.to_rows().into_iter().map(|r| r.into_iter().map(i64::from).collect()).collect();
        let (rows, cols) = (m.rows(), m.cols());
        let mut rank = 0;
        for c in 0..cols {
            let Some(piv) = (rank..rows).find(|&r| a[r][c].rem_euclid(p) != 0) else {
                continue;
            };
            a.swap(rank, piv);
            for r in rank + 1..rows {
                let lead = a[rank][c];
                let f = a[r][c];
                for k in 0..cols {
                    a[r][k] = (lead * a[r][k] - f * a[rank][k]).rem_euclid(p);
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn shift_rank_equals_shift_count() {
        for q in 1..6 {
            for n in 0..=q {
                assert_eq!(FpMatrix::shift(2, q, n).unwrap().rank(), n);
            }
        }
        assert_eq!(FpMatrix::shift(2, 3, 2).unwrap().rank(), 2);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        assert_eq!(FpMatrix::zeros(7, 4, 5).unwrap().rank(), 0);
    }

    #[test]
    fn rejects_composite_characteristic() {
        assert!(matches!(FpMatrix::zeros(4, 2, 2), Err(Error::NotPrime(4))));
        assert!(matches!(FpMatrix::zeros(65537, 2, 2), Err(Error::NotPrime(_))));
        assert!(FpMatrix::zeros(65521, 2, 2).is_ok());
    }

    #[test]
    fn rank_matches_fraction_free_oracle_on_random_f5() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = FpMatrix::random(5, 6, 6, &mut rng).unwrap();
            assert_eq!(m.rank(), fraction_free_rank(&m));
        }
        // low-rank products as well, so ranks other than 6 are exercised
        for _ in 0..50 {
            let a = FpMatrix::random(5, 6, 3, &mut rng).unwrap();
            let b = FpMatrix::random(5, 3, 6, &mut rng).unwrap();
            let m = a.mul(&b).unwrap();
            assert_eq!(m.rank(), fraction_free_rank(&m));
        }
    }

    #[test]
    fn permutation_is_full_rank_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for q in 1..8 {
            let m = FpMatrix::random_permutation(3, q, &mut rng).unwrap();
            assert_eq!(m.rank(), q);
            for r in 0..q {
                assert_eq!(m.row(r).iter().filter(|&&v| v == 1).count(), 1);
            }
        }
        let a = FpMatrix::random(7, 4, 4, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        let b = FpMatrix::random(7, 4, 4, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_entries_are_uniform_chi_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = FpMatrix::random(3, 1000, 100, &mut rng).unwrap();
        let mut counts = [0f64; 3];
        for &v in m.as_slice() {
            counts[v as usize] += 1.0;
        }
        let n = 1e5;
        let expected = n / 3.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 2 degrees of freedom: mean 2, sd 2, so 3 sigma is 8
        assert!(chi2 < 8.0, "chi2 = {chi2}, counts = {counts:?}");
        for c in counts {
            let sd = (n * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
            assert!((c - expected).abs() < 3.0 * sd);
        }
    }

    #[test]
    fn solve_identity_and_inconsistent() {
        let id = FpMatrix::identity(5, 4).unwrap();
        assert_eq!(id.solve(&[1, 2, 3, 4]).unwrap(), Some(vec![1, 2, 3, 4]));
        let z = FpMatrix::zeros(5, 3, 3).unwrap();
        assert_eq!(z.solve(&[0, 1, 0]).unwrap(), None);
        assert!(matches!(z.solve(&[0, 1]), Err(Error::Dimension(_))));
    }

    #[test]
    fn solve_multiplies_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let m = FpMatrix::random(7, 5, 6, &mut rng).unwrap();
            let x: Vec<u32> = (0..6).map(|_| rng.random_range(0..7)).collect();
            let y = m.mul_vec(&x).unwrap();
            let sol = m.solve(&y).unwrap().expect("consistent by construction");
            assert_eq!(m.mul_vec(&sol).unwrap(), y);
        }
    }

    #[test]
    fn kernel_vectors_are_annihilated() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let m = FpMatrix::random(3, 3, 6, &mut rng).unwrap();
            let ker = m.kernel();
            assert_eq!(ker.len(), 6 - m.rank());
            for v in ker {
                assert!(m.mul_vec(&v).unwrap().iter().all(|&e| e == 0));
            }
        }
    }

    #[test]
    fn full_rank_probability_matches_product_formula() {
        // P(full rank) for a uniform q x q matrix over F_p is prod_{i=1..q} (1 - p^-i)
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for (p, q) in [(2u32, 3usize), (3, 2), (2, 4)] {
            let trials = 20_000;
            let hits = (0..trials)
                .filter(|_| FpMatrix::random(p, q, q, &mut rng).unwrap().rank() == q)
                .count();
            let truth: f64 = (1..=q).map(|i| 1.0 - (p as f64).powi(-(i as i32))).product();
            let emp = hits as f64 / trials as f64;
            let sigma = (truth * (1.0 - truth) / trials as f64).sqrt();
            assert!((emp - truth).abs() <= 3.0 * sigma, "p={p} q={q}: {emp} vs {truth}");
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn matrix(p: u32, max: usize) -> impl Strategy<Value = FpMatrix> {
            (1..=max, 1..=max).prop_flat_map(move |(r, c)| {
                proptest::collection::vec(0..p, r * c)
                    .prop_map(move |d| FpMatrix::from_vec(p, r, c, d).unwrap())
            })
        }

        proptest! {
            #[test]
            fn rank_is_transpose_invariant(m in matrix(3, 6)) {
                prop_assert_eq!(m.rank(), m.transpose().rank());
                prop_assert!(m.rank() <= m.rows().min(m.cols()));
            }

            #[test]
            fn rank_of_product_is_bounded(a in matrix(5, 5), seed in any::<u64>()) {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let b = FpMatrix::random(5, a.cols(), 4, &mut rng).unwrap();
                let ab = a.mul(&b).unwrap();
                prop_assert!(ab.rank() <= a.rank().min(b.rank()));
            }
        }
    }
}
