use nalgebra::SymmetricEigen;

use super::CMatrix;
use crate::C64;

/// Largest eigenvalue of a Hermitian matrix and a unit eigenvector for it.
pub fn leading_eig(a: &CMatrix) -> (f64, Vec<C64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "leading_eig needs a square matrix");
    if n == 0 {
        return (0.0, Vec::new());
    }
    // Symmetrize so tiny asymmetries in the input cannot leak in.
    let h = CMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    let eig = SymmetricEigen::new(h);
    let (k, lambda) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, l)| if l > best.1 { (k, l) } else { best });
    let mut v: Vec<C64> = eig.eigenvectors.column(k).iter().copied().collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|z| *z /= norm);
    } else {
        v[0] = C64::new(1.0, 0.0);
    }
    (lambda, v)
}

/// Largest eigenvalue only.
pub fn lambda_max(a: &CMatrix) -> f64 {
    leading_eig(a).0
}
