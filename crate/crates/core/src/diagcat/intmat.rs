//! Dense arbitrary-precision integer matrices.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// A rectangular matrix over the integers, row-major, arbitrary precision.
#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from rows of machine integers.  Rows must be rectangular.
    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = BigInt::from(*v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    if i == j { self[(i, j)].is_one() } else { self[(i, j)].is_zero() }
                })
            })
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matrix product");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let prod = a * &other[(k, j)];
                    out[(i, j)] += prod;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in matrix-vector product");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| &self[(i, j)] * &v[j]).sum())
            .collect()
    }

    pub fn add(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a -= b;
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn row(&self, i: usize) -> Vec<BigInt> {
        (0..self.cols).map(|j| self[(i, j)].clone()).collect()
    }

    /// Keeps the listed rows, in order.
    pub fn select_rows(&self, keep: &[usize]) -> IntMatrix {
        let mut out = Self::zeros(keep.len(), self.cols);
        for (i, &r) in keep.iter().enumerate() {
            for j in 0..self.cols {
                out[(i, j)] = self[(r, j)].clone();
            }
        }
        out
    }

    pub fn select_cols(&self, keep: &[usize]) -> IntMatrix {
        let mut out = Self::zeros(self.rows, keep.len());
        for (j, &c) in keep.iter().enumerate() {
            for i in 0..self.rows {
                out[(i, j)] = self[(i, c)].clone();
            }
        }
        out
    }

    /// Stacks `other` below `self`.  Column counts must agree; a matrix with
    /// zero rows is permitted on either side.
    pub fn vstack(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.cols, "column mismatch in vstack");
        let mut out = Self::zeros(self.rows + other.rows, self.cols);
        out.data[..self.data.len()].clone_from_slice(&self.data);
        out.data[self.data.len()..].clone_from_slice(&other.data);
        out
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += c * row[src]
    fn add_row_multiple(&mut self, dst: usize, src: usize, c: &BigInt) {
        if c.is_zero() {
            return;
        }
        for j in 0..self.cols {
            let v = &self[(src, j)] * c;
            self[(dst, j)] += v;
        }
    }

    /// col[dst] += c * col[src]
    fn add_col_multiple(&mut self, dst: usize, src: usize, c: &BigInt) {
        if c.is_zero() {
            return;
        }
        for i in 0..self.rows {
            let v = &self[(i, src)] * c;
            self[(i, dst)] += v;
        }
    }

    fn negate_row(&mut self, r: usize) {
        for j in 0..self.cols {
            let v = -self[(r, j)].clone();
            self[(r, j)] = v;
        }
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> BigInt {
        assert!(self.is_square(), "determinant of non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut m = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if m[(k, k)].is_zero() {
                match (k + 1..n).find(|&i| !m[(i, k)].is_zero()) {
                    Some(i) => {
                        m.swap_rows(i, k);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &m[(k, k)] * &m[(i, j)] - &m[(i, k)] * &m[(k, j)];
                    m[(i, j)] = num / &prev;
                }
                m[(i, k)] = BigInt::zero();
            }
            prev = m[(k, k)].clone();
        }
        sign * m[(n - 1, n - 1)].clone()
    }

    pub fn is_unimodular(&self) -> bool {
        self.is_square() && self.det().abs().is_one()
    }
}

impl Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "IntMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Result of a Smith normal form computation: `u * m * v = d` with `u`, `v`
/// unimodular and `d` diagonal with a divisibility chain.
#[derive(Clone, Debug)]
pub struct Snf {
    pub u: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
    /// Inverse of `v`, tracked during elimination (avoids a BigInt inversion).
    pub v_inv: IntMatrix,
}

impl Snf {
    /// Diagonal entries of `d` up to min(rows, cols).
    pub fn diagonal(&self) -> Vec<BigInt> {
        let n = self.d.rows().min(self.d.cols());
        (0..n).map(|i| self.d[(i, i)].clone()).collect()
    }

    pub fn rank(&self) -> usize {
        self.diagonal().iter().filter(|x| !x.is_zero()).count()
    }
}

/// Smith normal form by repeated minimal-pivot elimination.
///
/// The pivot is always a nonzero entry of minimal absolute value in the
/// remaining submatrix, which keeps coefficient growth tame at this scale.
pub fn smith_normal_form(m: &IntMatrix) -> Snf {
    let rows = m.rows();
    let cols = m.cols();
    let mut d = m.clone();
    let mut u = IntMatrix::identity(rows);
    let mut v = IntMatrix::identity(cols);
    let mut v_inv = IntMatrix::identity(cols);

    let n = rows.min(cols);
    let mut t = 0;
    while t < n {
        // Locate minimal-magnitude nonzero pivot in the trailing submatrix.
        let mut pivot: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if d[(i, j)].is_zero() {
                    continue;
                }
                match pivot {
                    None => pivot = Some((i, j)),
                    Some((pi, pj)) => {
                        if d[(i, j)].abs() < d[(pi, pj)].abs() {
                            pivot = Some((i, j));
                        }
                    }
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        d.swap_rows(t, pi);
        u.swap_rows(t, pi);
        d.swap_cols(t, pj);
        v.swap_cols(t, pj);
        v_inv.swap_rows(t, pj);

        // Clear the pivot row and column; restart if a remainder shrinks the pivot.
        let mut clean = true;
        for i in t + 1..rows {
            if d[(i, t)].is_zero() {
                continue;
            }
            let q = -(&d[(i, t)] / &d[(t, t)]);
            d.add_row_multiple(i, t, &q);
            u.add_row_multiple(i, t, &q);
            if !d[(i, t)].is_zero() {
                clean = false;
            }
        }
        for j in t + 1..cols {
            if d[(t, j)].is_zero() {
                continue;
            }
            let q = -(&d[(t, j)] / &d[(t, t)]);
            d.add_col_multiple(j, t, &q);
            v.add_col_multiple(j, t, &q);
            v_inv.add_row_multiple(t, j, &-q);
            if !d[(t, j)].is_zero() {
                clean = false;
            }
        }
        if !clean {
            continue; // smaller remainders now exist; pick a fresh pivot
        }

        // Enforce divisibility of the remaining submatrix by d[t][t].
        let mut divides_all = true;
        'scan: for i in t + 1..rows {
            for j in t + 1..cols {
                if !(&d[(i, j)] % &d[(t, t)]).is_zero() {
                    // Fold row i into row t and retry this pivot position.
                    d.add_row_multiple(t, i, &BigInt::one());
                    u.add_row_multiple(t, i, &BigInt::one());
                    divides_all = false;
                    break 'scan;
                }
            }
        }
        if !divides_all {
            continue;
        }

        if d[(t, t)].is_negative() {
            d.negate_row(t);
            u.negate_row(t);
        }
        t += 1;
    }

    Snf { u, d, v, v_inv }
}

/// Basis for the integer kernel { x : m·x = 0 }, returned as the columns of a
/// matrix with `m.cols()` rows.
pub fn integer_kernel(m: &IntMatrix) -> IntMatrix {
    let snf = smith_normal_form(m);
    let diag = snf.diagonal();
    let mut keep = Vec::new();
    for j in 0..m.cols() {
        let dj = diag.get(j).cloned().unwrap_or_else(BigInt::zero);
        if dj.is_zero() {
            keep.push(j);
        }
    }
    snf.v.select_cols(&keep)
}

/// Solves `x · a = b` over the integers.  Returns the solution along with a
/// uniqueness flag (`true` when `a` has trivial left kernel).
pub fn solve_left(a: &IntMatrix, b: &IntMatrix) -> Option<(IntMatrix, bool)> {
    assert_eq!(a.cols(), b.cols(), "shape mismatch in solve_left");
    let snf = smith_normal_form(a);
    // x·a = b  ⇔  (x·u⁻¹)·d = b·v, writing a = u⁻¹·d·v⁻¹.
    let bv = b.mul(&snf.v);
    let diag = snf.diagonal();
    let mut y = IntMatrix::zeros(b.rows(), a.rows());
    for j in 0..a.rows() {
        let dj = diag.get(j).cloned().unwrap_or_else(BigInt::zero);
        if dj.is_zero() {
            // Column must vanish for a solution to exist; y column stays zero.
            if j < bv.cols() && (0..bv.rows()).any(|i| !bv[(i, j)].is_zero()) {
                return None;
            }
        } else {
            for i in 0..b.rows() {
                let num = &bv[(i, j)];
                if !(num % &dj).is_zero() {
                    return None;
                }
                y[(i, j)] = num / &dj;
            }
        }
    }
    // Any column of bv beyond a's row count must be zero.
    for j in a.rows()..bv.cols() {
        if (0..bv.rows()).any(|i| !bv[(i, j)].is_zero()) {
            return None;
        }
    }
    let unique = snf.rank() == a.rows();
    Some((y.mul(&snf.u), unique))
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn arb_matrix() -> impl Strategy<Value = IntMatrix> {
        (1usize..=6, 1usize..=6).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-20i64..=20, r * c).prop_map(move |data| {
                let mut m = IntMatrix::zeros(r, c);
                for i in 0..r {
                    for j in 0..c {
                        m[(i, j)] = BigInt::from(data[i * c + j]);
                    }
                }
                m
            })
        })
    }

    proptest! {
        #[test]
        fn snf_diagonalizes_with_unimodular_transforms(m in arb_matrix()) {
            let snf = smith_normal_form(&m);
            prop_assert_eq!(snf.u.mul(&m).mul(&snf.v), snf.d.clone());
            prop_assert!(snf.u.is_unimodular());
            prop_assert!(snf.v.is_unimodular());
            prop_assert!(snf.v.mul(&snf.v_inv).is_identity());
            let diag = snf.diagonal();
            for w in diag.windows(2) {
                if w[0].is_zero() {
                    prop_assert!(w[1].is_zero());
                } else if !w[1].is_zero() {
                    prop_assert!((&w[1] % &w[0]).is_zero());
                }
            }
        }

        #[test]
        fn kernel_columns_annihilate(m in arb_matrix()) {
            let k = integer_kernel(&m);
            for j in 0..k.cols() {
                let img = m.mul_vec(&k.column(j));
                prop_assert!(img.iter().all(|x| x.is_zero()));
            }
            // Kernel dimension matches the rank-nullity count.
            let rank = smith_normal_form(&m).rank();
            prop_assert_eq!(k.cols(), m.cols() - rank);
        }
    }
}
