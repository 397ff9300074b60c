//! The MDS code pair `(H, G)`.
//!
//! `H` is an `L x N` Vandermonde parity-check matrix; `G` spans its right
//! null space. Storage encoding inverts `L`-column blocks of `H`, and the
//! shared randomness is masked through the columns of `G`.

use itertools::Itertools;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::field::{FieldElement, Modulus};
use crate::matrix::FieldMatrix;

/// Above this length the MDS property is spot-checked instead of enumerated.
pub const EXHAUSTIVE_MDS_LIMIT: usize = 12;
const SPOT_CHECKS: usize = 100;
const SPOT_CHECK_SEED: u64 = 0x5eed_c0de;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodePair {
    h: FieldMatrix,
    g: FieldMatrix,
    points: Vec<FieldElement>,
}

impl CodePair {
    /// Vandermonde code on `points` (default `0, 1, ..., n-1`):
    /// `h[i][j] = points[j]^i`, `g` the canonical null-space basis.
    pub fn vandermonde(
        modulus: Modulus,
        n: usize,
        l: usize,
        points: Option<&[i64]>,
    ) -> Result<CodePair> {
        if l == 0 || l > n {
            return Err(Error::InvalidCode(format!("need 1 <= L <= N, got L={l}, N={n}")));
        }
        if (modulus.get() as usize) < n {
            return Err(Error::InvalidCode(format!(
                "q={modulus} is too small for {n} distinct evaluation points"
            )));
        }
        let points: Vec<FieldElement> = match points {
            Some(p) => {
                if p.len() != n {
                    return Err(Error::InvalidCode(format!(
                        "{} evaluation points given for N={n}",
                        p.len()
                    )));
                }
                p.iter().map(|v| modulus.element(*v)).collect()
            }
            None => (0..n as i64).map(|v| modulus.element(v)).collect(),
        };
        if let Some((a, _)) = points.iter().tuple_combinations().find(|(a, b)| a == b) {
            return Err(Error::InvalidCode(format!("duplicate evaluation point {a}")));
        }
        let rows: Vec<Vec<i64>> = (0..l)
            .map(|i| points.iter().map(|p| p.pow(i as u64).value() as i64).collect())
            .collect();
        let h = FieldMatrix::from_rows(modulus, &rows)?;
        let g = h.null_space_basis()?;
        CodePair::checked(h, g, points)
    }

    /// Replaces `g` with another generator of the same code.
    pub fn with_generator(&self, g: FieldMatrix) -> Result<CodePair> {
        CodePair::checked(self.h.clone(), g, self.points.clone())
    }

    /// Builds a pair from explicit matrices, verifying every invariant.
    pub fn from_parts(h: FieldMatrix, g: FieldMatrix, points: Vec<FieldElement>) -> Result<CodePair> {
        CodePair::checked(h, g, points)
    }

    fn checked(h: FieldMatrix, g: FieldMatrix, points: Vec<FieldElement>) -> Result<CodePair> {
        let (l, n) = (h.rows(), h.cols());
        if l == 0 || l > n {
            return Err(Error::InvalidCode(format!("shape: H is {l}x{n}")));
        }
        if points.len() != n {
            return Err(Error::InvalidCode(format!("{} points for N={n}", points.len())));
        }
        if g.modulus() != h.modulus() {
            return Err(Error::ModulusMismatch {
                left: h.modulus().get(),
                right: g.modulus().get(),
            });
        }
        if g.rows() != n - l || g.cols() != n {
            return Err(Error::InvalidCode(format!(
                "shape: generator is {}x{}, expected {}x{n}",
                g.rows(),
                g.cols(),
                n - l
            )));
        }
        let rank_g = g.rank();
        if rank_g != n - l {
            return Err(Error::InvalidCode(format!(
                "rank: generator has rank {rank_g}, expected {}",
                n - l
            )));
        }
        if !h.mul(&g.transpose())?.is_zero() {
            return Err(Error::InvalidCode("orthogonality: H * G^T != 0".into()));
        }
        if !columns_mds(&h)? {
            return Err(Error::InvalidCode(format!(
                "mds: some {l} columns of H are dependent"
            )));
        }
        if !columns_mds(&g)? {
            return Err(Error::InvalidCode(format!(
                "mds: some {} columns of G are dependent",
                n - l
            )));
        }
        Ok(CodePair { h, g, points })
    }

    pub fn h(&self) -> &FieldMatrix {
        &self.h
    }

    pub fn g(&self) -> &FieldMatrix {
        &self.g
    }

    pub fn points(&self) -> &[FieldElement] {
        &self.points
    }

    pub fn modulus(&self) -> Modulus {
        self.h.modulus()
    }

    /// Code length `N`.
    pub fn len(&self) -> usize {
        self.h.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.h.cols() == 0
    }

    /// Number of parity checks `L`.
    pub fn checks(&self) -> usize {
        self.h.rows()
    }

    /// `H` restricted to the given 0-based columns, inverted.
    pub fn block_inverse(&self, cols: &[usize]) -> Result<FieldMatrix> {
        self.h.select_columns(cols)?.inverse()
    }
}

/// Every `rows`-subset of columns is independent. Exhaustive for short
/// codes, seeded spot checks otherwise.
fn columns_mds(m: &FieldMatrix) -> Result<bool> {
    let (k, n) = (m.rows(), m.cols());
    if k == 0 {
        return Ok(true);
    }
    if n <= EXHAUSTIVE_MDS_LIMIT {
        return m.all_square_submatrices_invertible(k);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(SPOT_CHECK_SEED);
    for _ in 0..SPOT_CHECKS {
        let mut cols = sample(&mut rng, n, k).into_vec();
        cols.sort_unstable();
        if m.select_columns(&cols)?.rank() != k {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn q(v: u64) -> Modulus {
        Modulus::new(v).unwrap()
    }

    fn worked_g() -> FieldMatrix {
        FieldMatrix::from_rows(
            q(11),
            &[[3, 8, 1, 7, 2, 1], [3, 4, 4, 0, 1, 10], [6, 10, 6, 5, 1, 5]],
        )
        .unwrap()
    }

    fn worked_pair() -> CodePair {
        CodePair::vandermonde(q(11), 6, 3, Some(&[1, 2, 3, 4, 5, 6])).unwrap()
    }

    #[test]
    fn vandermonde_matches_printed_h() {
        let pair = worked_pair();
        assert_eq!(
            pair.h().to_rows(),
            vec![
                vec![1, 1, 1, 1, 1, 1],
                vec![1, 2, 3, 4, 5, 6],
                vec![1, 4, 9, 5, 3, 3]
            ]
        );
        assert_eq!(pair.g().rows(), 3);
    }

    #[test]
    fn small_instance_generator_spans_131() {
        let pair = CodePair::vandermonde(q(5), 3, 2, Some(&[1, 2, 3])).unwrap();
        assert_eq!(pair.h().to_rows(), vec![vec![1, 1, 1], vec![1, 2, 3]]);
        assert_eq!(pair.g().to_rows(), vec![vec![1, 3, 1]]);
    }

    #[test]
    fn full_length_has_empty_generator() {
        let pair = CodePair::vandermonde(q(7), 4, 4, None).unwrap();
        assert!(pair.h().inverse().is_ok());
        assert_eq!((pair.g().rows(), pair.g().cols()), (0, 4));
    }

    #[test]
    fn default_points_allow_q_equal_n() {
        let pair = CodePair::vandermonde(q(5), 5, 2, None).unwrap();
        assert_eq!(pair.h().row(0), &[1, 1, 1, 1, 1]);
        assert_eq!(pair.h().row(1), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(CodePair::vandermonde(q(5), 6, 3, None), Err(Error::InvalidCode(_))));
        assert!(matches!(
            CodePair::vandermonde(q(11), 3, 2, Some(&[1, 2, 13])),
            Err(Error::InvalidCode(m)) if m.contains("duplicate")
        ));
        assert!(CodePair::vandermonde(q(11), 3, 4, None).is_err());
        assert!(CodePair::vandermonde(q(11), 3, 0, None).is_err());
    }

    #[test]
    fn override_accepts_printed_generator() {
        let pair = worked_pair().with_generator(worked_g()).unwrap();
        assert_eq!(pair.g(), &worked_g());
    }

    #[test]
    fn override_rejects_zero_row() {
        let mut rows = worked_g().to_rows();
        rows[1] = vec![0; 6];
        let rows: Vec<Vec<i64>> = rows.iter().map(|r| r.iter().map(|v| *v as i64).collect()).collect();
        let g = FieldMatrix::from_rows(q(11), &rows).unwrap();
        assert!(matches!(
            worked_pair().with_generator(g),
            Err(Error::InvalidCode(m)) if m.starts_with("rank")
        ));
    }

    #[test]
    fn override_accepts_row_permutation() {
        let g = worked_g().select_rows(&[2, 0, 1]).unwrap();
        assert!(worked_pair().with_generator(g).is_ok());
    }

    #[test]
    fn override_rejects_wrong_shape_and_non_orthogonal() {
        let g = worked_g().select_rows(&[0, 1]).unwrap();
        assert!(matches!(
            worked_pair().with_generator(g),
            Err(Error::InvalidCode(m)) if m.starts_with("shape")
        ));
        let id = FieldMatrix::from_rows(
            q(11),
            &[[1, 0, 0, 0, 0, 0], [0, 1, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0]],
        )
        .unwrap();
        assert!(matches!(
            worked_pair().with_generator(id),
            Err(Error::InvalidCode(m)) if m.starts_with("orthogonality")
        ));
    }

    #[test]
    fn codewords_lie_in_null_space() {
        let pair = worked_pair().with_generator(worked_g()).unwrap();
        let m = pair.modulus();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let gt = pair.g().transpose();
        for _ in 0..1000 {
            let u: Vec<FieldElement> = (0..3).map(|_| m.element(rng.gen_range(0..11))).collect();
            let word = gt.mul_vec(&u).unwrap();
            assert!(pair.h().mul_vec(&word).unwrap().iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn long_code_uses_spot_checks() {
        let pair = CodePair::vandermonde(q(17), 16, 5, None).unwrap();
        assert_eq!(pair.g().rows(), 11);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        /// Vandermonde on distinct points is MDS, and so is its dual.
        #[test]
        fn mds_duality(qi in 0usize..4, n in 1usize..=9, l_frac in 0.0f64..1.0, shift in 0i64..20) {
            let qv = [11u64, 13, 17, 19][qi];
            let l = 1 + ((n - 1) as f64 * l_frac) as usize;
            let points: Vec<i64> = (0..n as i64).map(|p| p + shift).collect();
            let pair = CodePair::vandermonde(q(qv), n, l, Some(&points)).unwrap();
            prop_assert!(pair.h().all_square_submatrices_invertible(l).unwrap());
            if l < n {
                prop_assert!(pair.g().all_square_submatrices_invertible(n - l).unwrap());
            }
        }
    }
}
