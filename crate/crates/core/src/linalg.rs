//! Dense helpers on top of nalgebra's decompositions.

use nalgebra::{DMatrix, DVector, SymmetricEigen, QR};

use crate::error::{CcaError, Result, Side};

const JACOBI_MAX_SWEEPS: usize = 100;

/// Thin SVD with singular values sorted in decreasing order.
pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// One-sided (Hestenes) Jacobi SVD. Meant for the small matrices the
/// solver works with; stays accurate when the input is rank deficient.
/// Left singular vectors for zero singular values are completed to an
/// orthonormal set.
pub(crate) fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    if m.nrows() < m.ncols() {
        let t = thin_svd(&m.transpose())?;
        return Ok(ThinSvd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    let (rows, k) = m.shape();
    let mut u = m.clone();
    let mut v = DMatrix::<f64>::identity(k, k);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..k {
            for j in (i + 1)..k {
                let a = u.column(i).norm_squared();
                let b = u.column(j).norm_squared();
                let g = u.column(i).dot(&u.column(j));
                if g == 0.0 || g.abs() <= f64::EPSILON * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut u, i, j, c, s);
                rotate_columns(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CcaError::NumericalConsistency(
            "Jacobi SVD did not converge".into(),
        ));
    }
    let norms: Vec<f64> = u.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).expect("finite norms"));
    let top = norms.iter().cloned().fold(0.0, f64::max);
    let s = DVector::from_iterator(k, order.iter().map(|&i| norms[i]));
    let mut uu = DMatrix::zeros(rows, k);
    let mut filled = Vec::new();
    for (c, &i) in order.iter().enumerate() {
        if norms[i] > top * f64::EPSILON * rows as f64 && norms[i] > 0.0 {
            uu.column_mut(c).copy_from(&(u.column(i) / norms[i]));
            filled.push(c);
        }
    }
    // Complete the left basis for numerically zero singular values.
    let mut candidate = 0;
    for c in 0..k {
        if filled.contains(&c) {
            continue;
        }
        loop {
            let mut e = DVector::<f64>::zeros(rows);
            e[candidate % rows] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &f in &filled {
                    let proj = uu.column(f).dot(&e);
                    e -= uu.column(f) * proj;
                }
            }
            let norm = e.norm();
            if norm > 1e-8 {
                uu.column_mut(c).copy_from(&(e / norm));
                filled.push(c);
                break;
            }
        }
    }
    Ok(ThinSvd {
        u: uu,
        s,
        v: v.select_columns(&order),
    })
}

fn rotate_columns(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let x = m[(r, i)];
        let y = m[(r, j)];
        m[(r, i)] = c * x - s * y;
        m[(r, j)] = s * x + c * y;
    }
}

/// Factors `X = R V^T` with `V` having orthonormal columns, so that `R` has
/// `min(n, p)` columns. Uses Householder QR of `X^T`, which is exact up to
/// roundoff even for rank-deficient (e.g. centered) data.
pub(crate) fn row_space_factor(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let qr = QR::new(x.transpose());
    let v = qr.q();
    let r = qr.r().transpose();
    Ok((r, v))
}

/// Symmetric eigendecomposition with eigenvalues in increasing order.
pub(crate) fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let k = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    let vals = DVector::from_iterator(k, order.iter().map(|&i| eig.eigenvalues[i]));
    (vals, eig.eigenvectors.select_columns(&order))
}

/// `A^{-1/2}` for a symmetric positive definite `A`.
///
/// Fails when the smallest eigenvalue is at or below `1e-10 * trace / m`.
pub(crate) fn inv_sqrt_pd(a: &DMatrix<f64>, side: Side) -> Result<DMatrix<f64>> {
    let m = a.nrows();
    let (vals, vecs) = sym_eigen(a);
    let floor = 1e-10 * a.trace() / m as f64;
    let min = vals[0];
    if !(min > floor) || !min.is_finite() {
        return Err(CcaError::SingularCovariance {
            side,
            min_eigenvalue: min,
        });
    }
    let mut scaled = vecs.clone();
    for (mut col, v) in scaled.column_iter_mut().zip(vals.iter()) {
        col /= v.sqrt();
    }
    Ok(scaled * vecs.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_square_root() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let w = inv_sqrt_pd(&a, Side::X).unwrap();
        let id = &w * &a * &w;
        assert!((id - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn singular_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match inv_sqrt_pd(&a, Side::Y) {
            Err(CcaError::SingularCovariance { side, .. }) => assert_eq!(side, Side::Y),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jacobi_svd_rank_deficient() {
        for (n, p) in [(9, 4), (4, 9), (6, 6)] {
            let m = DMatrix::from_fn(n, p, |i, j| ((i * 31 + j * 17) as f64).sin());
            let ThinSvd { u, s, v } = thin_svd(&m).unwrap();
            let k = n.min(p);
            assert_eq!(s.len(), k);
            assert!(s.as_slice().windows(2).all(|w| w[0] >= w[1]));
            let rec = &u * DMatrix::from_diagonal(&s) * v.transpose();
            assert!((rec - &m).amax() < 1e-12);
            assert!((u.tr_mul(&u) - DMatrix::identity(k, k)).amax() < 1e-12);
            assert!((v.tr_mul(&v) - DMatrix::identity(k, k)).amax() < 1e-12);
        }
    }

    #[test]
    fn factor_reconstructs_wide_and_tall() {
        for (n, p) in [(4, 9), (9, 4)] {
            let x = DMatrix::from_fn(n, p, |i, j| ((i * 31 + j * 17) as f64).sin());
            let (r, v) = row_space_factor(&x).unwrap();
            assert_eq!(r.ncols(), n.min(p));
            assert!((&r * v.transpose() - &x).amax() < 1e-12);
            assert!((v.tr_mul(&v) - DMatrix::identity(v.ncols(), v.ncols())).amax() < 1e-12);
        }
    }
}
