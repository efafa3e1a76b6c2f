//! Kronecker and Khatri-Rao products.

use nalgebra::{DMatrix, DVector};

use super::CpFactors;
use crate::error::{Error, Result};

/// Kronecker product of two vectors: result[(l1)*m2 + l2] = u[l1] * v[l2].
pub fn kronecker(u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len() * v.len());
    for (i, ui) in u.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            out[i * v.len() + j] = ui * vj;
        }
    }
    out
}

/// Khatri-Rao product of the given matrices, leftmost factor slowest.
/// Column r of the result is the Kronecker product of the r-th columns.
pub fn khatri_rao(mats: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let (first, rest) = mats
        .split_first()
        .ok_or_else(|| Error::invalid("khatri_rao needs at least one matrix"))?;
    let rank = first.ncols();
    if rest.iter().any(|m| m.ncols() != rank) {
        return Err(Error::shape("khatri_rao column counts differ"));
    }
    let mut out: DMatrix<f64> = (*first).clone();
    for m in rest {
        let mut next = DMatrix::zeros(out.nrows() * m.nrows(), rank);
        for r in 0..rank {
            let col = kronecker(&out.column(r).into_owned(), &m.column(r).into_owned());
            next.set_column(r, &col);
        }
        out = next;
    }
    Ok(out)
}

/// The product (U^{(j)})^{odot, j != i} in descending mode order, so its rows
/// line up with the columns of the mode-i unfolding.
pub fn khatri_rao_excluding(factors: &CpFactors, mode: usize) -> DMatrix<f64> {
    let mats: Vec<&DMatrix<f64>> = (0..factors.order())
        .rev()
        .filter(|&j| j != mode)
        .map(|j| factors.factor(j))
        .collect();
    khatri_rao(&mats).expect("factors share a rank by construction")
}

/// Squared column norms of a Khatri-Rao product without materializing it:
/// entry r is prod_j ||column r of mats[j]||^2.
pub fn khatri_rao_col_norms_sq(mats: &[&DMatrix<f64>]) -> Result<DVector<f64>> {
    let (first, rest) = mats
        .split_first()
        .ok_or_else(|| Error::invalid("khatri_rao_col_norms_sq needs a nonempty set"))?;
    let rank = first.ncols();
    if rest.iter().any(|m| m.ncols() != rank) {
        return Err(Error::shape("column counts differ"));
    }
    let mut out = DVector::from_element(rank, 1.0);
    for m in mats {
        for r in 0..rank {
            out[r] *= m.column(r).norm_squared();
        }
    }
    Ok(out)
}

/// Row of the mode-i Khatri-Rao product for one multi-index: the Hadamard
/// product over j != i of the rows U^{(j)}[l_j, :]. Writes into `out`.
pub fn kr_row_excluding(factors: &CpFactors, mode: usize, index: &[usize], out: &mut [f64]) {
    out.fill(1.0);
    for (j, &l) in index.iter().enumerate() {
        if j == mode {
            continue;
        }
        let factor = factors.factor(j);
        for (r, slot) in out.iter_mut().enumerate() {
            *slot *= factor[(l, r)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn kronecker_basics() {
        let u = DVector::from_vec(vec![1.0, 2.0]);
        let v = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(kronecker(&u, &v).as_slice(), &[3.0, 4.0, 6.0, 8.0]);

        let one = DVector::from_vec(vec![1.0]);
        let w = DVector::from_vec(vec![5.0, 6.0]);
        assert_eq!(kronecker(&one, &w).as_slice(), &[5.0, 6.0]);

        let e1 = DVector::from_vec(vec![0.0, 1.0]);
        let e2 = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(kronecker(&e1, &e2).as_slice(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn khatri_rao_rank1_reduces_to_kronecker() {
        let u = DMatrix::from_vec(2, 1, vec![1.0, 2.0]);
        let v = DMatrix::from_vec(2, 1, vec![3.0, 4.0]);
        let kr = khatri_rao(&[&u, &v]).unwrap();
        assert_eq!(kr.as_slice(), &[3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn khatri_rao_columns_are_kronecker_columns() {
        let mut rng = crate::testutil::rng(7);
        let a = crate::testutil::random_matrix(3, 2, &mut rng);
        let b = crate::testutil::random_matrix(4, 2, &mut rng);
        let kr = khatri_rao(&[&a, &b]).unwrap();
        for r in 0..2 {
            let expect = kronecker(&a.column(r).into_owned(), &b.column(r).into_owned());
            assert!((kr.column(r) - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn khatri_rao_rejects_rank_mismatch() {
        let a = DMatrix::zeros(2, 2);
        let b = DMatrix::zeros(2, 3);
        assert!(khatri_rao(&[&a, &b]).is_err());
    }

    #[test]
    fn col_norms_sq_examples() {
        let u = DMatrix::from_vec(2, 1, vec![1.0, 2.0]);
        let n = khatri_rao_col_norms_sq(&[&u]).unwrap();
        assert_eq!(n.as_slice(), &[5.0]);

        let v = DMatrix::from_vec(2, 1, vec![1.0, 1.0]);
        let n2 = khatri_rao_col_norms_sq(&[&u, &v]).unwrap();
        assert_eq!(n2.as_slice(), &[10.0]);

        assert!(khatri_rao_col_norms_sq(&[]).is_err());
    }

    #[test]
    fn col_norms_match_materialized_product() {
        let mut rng = crate::testutil::rng(11);
        let mats: Vec<DMatrix<f64>> = [3usize, 2, 4]
            .iter()
            .map(|&m| crate::testutil::random_matrix(m, 3, &mut rng))
            .collect();
        let refs: Vec<&DMatrix<f64>> = mats.iter().collect();
        let fast = khatri_rao_col_norms_sq(&refs).unwrap();
        let dense = khatri_rao(&refs).unwrap();
        for r in 0..3 {
            assert!((fast[r] - dense.column(r).norm_squared()).abs() < 1e-12);
        }
    }

    #[test]
    fn kr_row_matches_materialized_row() {
        let mut rng = crate::testutil::rng(3);
        let shape = Shape::new(vec![3, 2, 4]).unwrap();
        let factors = CpFactors::random_gaussian(&shape, 2, &mut rng);
        let dense = khatri_rao_excluding(&factors, 1);
        let map = crate::tensor::ModeIndexMap::new(&shape, 1).unwrap();
        let mut row = vec![0.0; 2];
        for lin in 0..shape.num_entries() {
            let idx = shape.multi_index(lin);
            let (_, col) = map.to_pair(&idx).unwrap();
            kr_row_excluding(&factors, 1, &idx, &mut row);
            for r in 0..2 {
                assert!((row[r] - dense[(col, r)]).abs() < 1e-14);
            }
        }
    }
}
