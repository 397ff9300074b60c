//! Dense matrices over a prime field.

use std::fmt;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::field::{FieldElement, Modulus};

/// Row-major dense matrix over `F_q`. Entries are stored reduced.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u32>,
    modulus: Modulus,
}

impl FieldMatrix {
    pub fn new(modulus: Modulus, rows: usize, cols: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| **v >= modulus.get()) {
            return Err(Error::Dimension(format!(
                "entry {bad} not reduced mod {modulus}"
            )));
        }
        Ok(FieldMatrix { rows, cols, data, modulus })
    }

    /// Builds a matrix from signed integer rows, reducing each entry mod q.
    pub fn from_rows<R: AsRef<[i64]>>(modulus: Modulus, rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend(r.iter().map(|v| modulus.reduce(*v)));
        }
        Ok(FieldMatrix { rows: rows.len(), cols, data, modulus })
    }

    pub fn zeros(modulus: Modulus, rows: usize, cols: usize) -> Self {
        FieldMatrix { rows, cols, data: vec![0; rows * cols], modulus }
    }

    pub fn identity(modulus: Modulus, n: usize) -> Self {
        let mut m = Self::zeros(modulus, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1 % modulus.get();
        }
        m
    }

    pub fn column_vector(elems: &[FieldElement]) -> Result<Self> {
        let modulus = elems
            .first()
            .map(|e| e.modulus())
            .ok_or_else(|| Error::Dimension("empty vector".into()))?;
        let mut data = Vec::with_capacity(elems.len());
        for e in elems {
            if e.modulus() != modulus {
                return Err(Error::ModulusMismatch {
                    left: modulus.get(),
                    right: e.modulus().get(),
                });
            }
            data.push(e.value());
        }
        Ok(FieldMatrix { rows: elems.len(), cols: 1, data, modulus })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    #[inline]
    pub fn raw(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    pub fn get(&self, r: usize, c: usize) -> FieldElement {
        self.modulus.element(self.raw(r, c) as i64)
    }

    pub fn set(&mut self, r: usize, c: usize, v: FieldElement) {
        assert_eq!(v.modulus(), self.modulus);
        self.data[r * self.cols + c] = v.value();
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<FieldElement> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.modulus, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.raw(r, c);
            }
        }
        t
    }

    fn check_modulus(&self, other: &FieldMatrix) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch {
                left: self.modulus.get(),
                right: other.modulus.get(),
            });
        }
        Ok(())
    }

    pub fn mul(&self, other: &FieldMatrix) -> Result<FieldMatrix> {
        self.check_modulus(other)?;
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let q = self.modulus.get() as u64;
        let mut out = Self::zeros(self.modulus, self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = 0u64;
                for i in 0..self.cols {
                    acc = (acc + self.raw(r, i) as u64 * other.raw(i, c) as u64) % q;
                }
                out.data[r * other.cols + c] = acc as u32;
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[FieldElement]) -> Result<Vec<FieldElement>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "vector of length {} for {} columns",
                v.len(),
                self.cols
            )));
        }
        let q = self.modulus.get() as u64;
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut acc = 0u64;
            for (i, x) in v.iter().enumerate() {
                if x.modulus() != self.modulus {
                    return Err(Error::ModulusMismatch {
                        left: self.modulus.get(),
                        right: x.modulus().get(),
                    });
                }
                acc = (acc + self.raw(r, i) as u64 * x.value() as u64) % q;
            }
            out.push(self.modulus.element(acc as i64));
        }
        Ok(out)
    }

    /// Sub-matrix made of the given (0-based) columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<FieldMatrix> {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            for &c in cols {
                if c >= self.cols {
                    return Err(Error::Dimension(format!(
                        "column {c} out of range for {} columns",
                        self.cols
                    )));
                }
                data.push(self.raw(r, c));
            }
        }
        Ok(FieldMatrix { rows: self.rows, cols: cols.len(), data, modulus: self.modulus })
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<FieldMatrix> {
        let mut data = Vec::with_capacity(self.cols * rows.len());
        for &r in rows {
            if r >= self.rows {
                return Err(Error::Dimension(format!(
                    "row {r} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(r));
        }
        Ok(FieldMatrix { rows: rows.len(), cols: self.cols, data, modulus: self.modulus })
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for c in 0..self.cols {
                self.data.swap(a * self.cols + c, b * self.cols + c);
            }
        }
    }

    /// Reduced row-echelon form and the pivot column of each nonzero row.
    pub fn rref(&self) -> (FieldMatrix, Vec<usize>) {
        let m = self.modulus;
        let mut a = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..a.cols {
            if row == a.rows {
                break;
            }
            let Some(p) = (row..a.rows).find(|&r| a.raw(r, col) != 0) else {
                continue;
            };
            a.swap_rows(row, p);
            let pivot = a.raw(row, col);
            assert_ne!(pivot, 0, "pivot must be nonzero");
            let inv = m.inv(pivot).expect("nonzero pivot");
            for c in 0..a.cols {
                a.data[row * a.cols + c] = m.mul(a.raw(row, c), inv);
            }
            for r in 0..a.rows {
                let factor = a.raw(r, col);
                if r == row || factor == 0 {
                    continue;
                }
                for c in 0..a.cols {
                    let sub = m.mul(factor, a.raw(row, c));
                    a.data[r * a.cols + c] = m.sub(a.raw(r, c), sub);
                }
            }
            pivots.push(col);
            row += 1;
        }
        (a, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Inverse by Gauss-Jordan elimination on `[self | I]`.
    pub fn inverse(&self) -> Result<FieldMatrix> {
        if self.rows != self.cols {
            return Err(Error::Dimension(format!(
                "cannot invert a non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(self.clone());
        }
        let mut aug = Self::zeros(self.modulus, n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                aug.data[r * 2 * n + c] = self.raw(r, c);
            }
            aug.data[r * 2 * n + n + r] = 1 % self.modulus.get();
        }
        let (red, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Err(Error::Singular);
        }
        let right: Vec<usize> = (n..2 * n).collect();
        red.select_columns(&right)
    }

    /// Basis of the right null space, one vector per row.
    ///
    /// Free columns are taken in ascending order and each basis vector has
    /// a 1 in its free column and zeros in the other free columns, so the
    /// result is fully determined by the row space of `self`.
    pub fn null_space_basis(&self) -> Result<FieldMatrix> {
        let (red, pivots) = self.rref();
        if pivots.len() != self.rows {
            return Err(Error::RankDeficient { rank: pivots.len(), expected: self.rows });
        }
        let m = self.modulus;
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut basis = Self::zeros(m, free.len(), self.cols);
        for (i, &fc) in free.iter().enumerate() {
            basis.data[i * self.cols + fc] = 1 % m.get();
            for (r, &pc) in pivots.iter().enumerate() {
                basis.data[i * self.cols + pc] = m.neg(red.raw(r, fc));
            }
        }
        Ok(basis)
    }

    /// True iff every `size x size` submatrix, over all row subsets and all
    /// column subsets of that size, is invertible. With `size == rows` this
    /// is the MDS column condition.
    pub fn all_square_submatrices_invertible(&self, size: usize) -> Result<bool> {
        if size > self.rows.min(self.cols) {
            return Err(Error::Dimension(format!(
                "size {size} exceeds min({}, {})",
                self.rows, self.cols
            )));
        }
        for rows in (0..self.rows).combinations(size) {
            let sub_rows = self.select_rows(&rows)?;
            for cols in (0..self.cols).combinations(size) {
                if sub_rows.select_columns(&cols)?.rank() != size {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

impl fmt::Debug for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldMatrix(q={}, {:?})", self.modulus, self.to_rows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: u64) -> Modulus {
        Modulus::new(n).unwrap()
    }

    fn h_worked() -> FieldMatrix {
        FieldMatrix::from_rows(
            q(11),
            &[[1, 1, 1, 1, 1, 1], [1, 2, 3, 4, 5, 6], [1, 4, 9, 5, 3, 3]],
        )
        .unwrap()
    }

    fn g_worked() -> FieldMatrix {
        FieldMatrix::from_rows(
            q(11),
            &[[3, 8, 1, 7, 2, 1], [3, 4, 4, 0, 1, 10], [6, 10, 6, 5, 1, 5]],
        )
        .unwrap()
    }

    #[test]
    fn multiply_examples() {
        let f5 = q(5);
        let m = FieldMatrix::from_rows(f5, &[[1, 2, 3], [4, 0, 1], [2, 2, 2]]).unwrap();
        assert_eq!(FieldMatrix::identity(f5, 3).mul(&m).unwrap(), m);

        let a = FieldMatrix::from_rows(f5, &[[1, 1], [1, 2]]).unwrap();
        let b = FieldMatrix::from_rows(f5, &[[2], [4]]).unwrap();
        let expect = FieldMatrix::from_rows(f5, &[[1], [0]]).unwrap();
        assert_eq!(a.mul(&b).unwrap(), expect);

        let hg = h_worked().mul(&g_worked().transpose()).unwrap();
        assert_eq!((hg.rows(), hg.cols()), (3, 3));
        assert!(hg.is_zero());
    }

    #[test]
    fn multiply_errors() {
        let a = FieldMatrix::zeros(q(5), 2, 3);
        let b = FieldMatrix::zeros(q(5), 2, 3);
        assert!(matches!(a.mul(&b), Err(Error::Dimension(_))));
        let c = FieldMatrix::zeros(q(7), 3, 1);
        assert!(matches!(a.mul(&c), Err(Error::ModulusMismatch { .. })));
    }

    #[test]
    fn inverse_examples() {
        let f11 = q(11);
        let v = FieldMatrix::from_rows(f11, &[[1, 1, 1], [1, 2, 3], [1, 4, 9]]).unwrap();
        let expect = FieldMatrix::from_rows(f11, &[[3, 3, -5], [-3, 4, -1], [1, 4, -5]]).unwrap();
        assert_eq!(expect.to_rows(), vec![vec![3, 3, 6], vec![8, 4, 10], vec![1, 4, 6]]);
        assert_eq!(v.inverse().unwrap(), expect);

        let id = FieldMatrix::identity(f11, 4);
        assert_eq!(id.inverse().unwrap(), id);

        let f5 = q(5);
        let a = FieldMatrix::from_rows(f5, &[[1, 1], [1, 2]]).unwrap();
        let expect = FieldMatrix::from_rows(f5, &[[2, 4], [4, 1]]).unwrap();
        assert_eq!(a.inverse().unwrap(), expect);
    }

    #[test]
    fn inverse_errors_are_distinct() {
        let f5 = q(5);
        let singular = FieldMatrix::from_rows(f5, &[[1, 2], [2, 4]]).unwrap();
        assert_eq!(singular.inverse(), Err(Error::Singular));
        let rect = FieldMatrix::zeros(f5, 2, 3);
        assert!(matches!(rect.inverse(), Err(Error::Dimension(_))));
    }

    #[test]
    fn null_space_examples() {
        let h = h_worked();
        let basis = h.null_space_basis().unwrap();
        assert_eq!((basis.rows(), basis.cols()), (3, 6));
        assert!(h.mul(&basis.transpose()).unwrap().is_zero());
        assert_eq!(basis.rank(), 3);

        let id = FieldMatrix::identity(q(7), 4);
        let empty = id.null_space_basis().unwrap();
        assert_eq!((empty.rows(), empty.cols()), (0, 4));

        let f5 = q(5);
        let h = FieldMatrix::from_rows(f5, &[[1, 1, 1], [1, 2, 3]]).unwrap();
        let basis = h.null_space_basis().unwrap();
        assert_eq!(basis.to_rows(), vec![vec![1, 3, 1]]);
    }

    #[test]
    fn null_space_rejects_rank_deficient() {
        let m = FieldMatrix::from_rows(q(5), &[[1, 2, 3], [2, 4, 1]]).unwrap();
        assert_eq!(
            m.null_space_basis(),
            Err(Error::RankDeficient { rank: 1, expected: 2 })
        );
    }

    #[test]
    fn minor_enumeration() {
        assert!(h_worked().all_square_submatrices_invertible(3).unwrap());
        assert!(g_worked().all_square_submatrices_invertible(3).unwrap());
        let rep = FieldMatrix::from_rows(q(7), &[[1, 1, 2], [3, 3, 5]]).unwrap();
        assert!(!rep.all_square_submatrices_invertible(2).unwrap());
        assert!(matches!(
            rep.all_square_submatrices_invertible(3),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn minor_count_for_worked_h() {
        // Independent count: every 3-column subset of the 3x6 matrix.
        let h = h_worked();
        let n = (0..6).combinations(3).filter(|c| h.select_columns(c).unwrap().inverse().is_ok()).count();
        assert_eq!(n, 20);
    }

    fn random_matrix(qv: u64, n: usize) -> impl Strategy<Value = FieldMatrix> {
        proptest::collection::vec(0..qv as u32, n * n)
            .prop_map(move |d| FieldMatrix::new(Modulus::new(qv).unwrap(), n, n, d).unwrap())
    }

    fn any_small() -> impl Strategy<Value = FieldMatrix> {
        (prop_oneof![Just(5u64), Just(7), Just(11)], 1usize..=6)
            .prop_flat_map(|(qv, n)| random_matrix(qv, n))
    }

    proptest! {
        #[test]
        fn inverse_roundtrip(m in any_small()) {
            match m.inverse() {
                Ok(inv) => {
                    let id = FieldMatrix::identity(m.modulus(), m.rows());
                    prop_assert_eq!(inv.mul(&m).unwrap(), id.clone());
                    prop_assert_eq!(m.mul(&inv).unwrap(), id);
                }
                Err(e) => {
                    prop_assert_eq!(e, Error::Singular);
                    prop_assert!(m.rank() < m.rows());
                }
            }
        }

        #[test]
        fn null_space_is_annihilated(
            (qv, rows, cols, data) in (prop_oneof![Just(5u64), Just(7), Just(11)], 1usize..4, 1usize..7)
                .prop_flat_map(|(qv, r, c)| (Just(qv), Just(r), Just(c), proptest::collection::vec(0..qv as u32, r * c)))
        ) {
            let m = FieldMatrix::new(Modulus::new(qv).unwrap(), rows, cols, data).unwrap();
            match m.null_space_basis() {
                Ok(b) => {
                    prop_assert_eq!(b.rows(), cols - rows);
                    prop_assert_eq!(b.rank(), b.rows());
                    prop_assert!(m.mul(&b.transpose()).unwrap().is_zero());
                }
                Err(Error::RankDeficient { rank, .. }) => prop_assert!(rank < rows),
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }
    }
}
