use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 10_000;

/// Full symmetric eigen-decomposition with eigenvalues sorted ascending.
pub struct SortedEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SortedEigen {
    pub fn min(&self) -> (f64, DVector<f64>) {
        (self.values[0], self.vectors.column(0).into_owned())
    }
}

pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<SortedEigen> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::EigenNonConvergence { order: n, max_iter: MAX_SWEEPS })?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNonConvergence { order: n, max_iter: MAX_SWEEPS });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        // Fix the sign so the largest-magnitude component is positive.
        let (imax, _) = col.iamax_full();
        if col[imax] < 0.0 {
            col = -col;
        }
        vectors.set_column(dst, &col);
    }
    Ok(SortedEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_with_unit_vectors() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let e = symmetric_eigen(&m).unwrap();
        let expect = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        for (v, x) in e.values.iter().zip(expect) {
            assert!((v - x).abs() < 1e-12);
        }
        let (l, v) = e.min();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!(((&m * &v) - v.clone() * l).norm() < 1e-12);
    }
}
