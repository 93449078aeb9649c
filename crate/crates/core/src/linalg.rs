//! Small dense helpers on complex matrices.

use nalgebra::linalg::SymmetricEigen;

use crate::error::{CzError, Result};
use crate::{Mat, C64};

/// Eigenvalues in ascending order with matching eigenvector columns.
pub fn herm_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), Mat::zeros(0, 0));
    }
    // Symmetrize first so round-off asymmetry never reaches the solver.
    let h = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

pub fn herm_eigenvalues(a: &Mat) -> Vec<f64> {
    herm_eigen(a).0
}

/// Singular values in descending order.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    if a.nrows() == 1 && a.ncols() == 1 {
        return vec![a[(0, 0)].norm()];
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Largest singular value.
pub fn op_norm(a: &Mat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn frobenius(a: &Mat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_entry(a: &Mat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn identity(m: usize) -> Mat {
    Mat::identity(m, m)
}

pub fn hermitian_defect(a: &Mat) -> f64 {
    frobenius(&(a - a.adjoint()))
}

pub fn is_hermitian(a: &Mat, rel_tol: f64) -> bool {
    hermitian_defect(a) <= rel_tol * frobenius(a)
}

/// `|A| = (A*A)^{1/2}`.
pub fn abs(a: &Mat) -> Mat {
    let n = a.ncols();
    if n == 1 && a.nrows() == 1 {
        return Mat::from_element(1, 1, C64::new(a[(0, 0)].norm(), 0.0));
    }
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut sigma = Mat::zeros(vt.nrows(), vt.nrows());
    for (i, s) in svd.singular_values.iter().enumerate() {
        sigma[(i, i)] = C64::new(*s, 0.0);
    }
    let out = vt.adjoint() * sigma * &vt;
    (&out + out.adjoint()) * C64::new(0.5, 0.0)
}

/// Projection onto the span of eigenvectors of Hermitian `a` whose eigenvalue
/// exceeds `threshold`.
pub fn range_projection(a: &Mat, threshold: f64) -> Mat {
    let (vals, vecs) = herm_eigen(a);
    projector_from_columns(&vecs, vals.iter().map(|&v| v > threshold))
}

/// `Σ v_i v_i*` over the selected columns.
pub fn projector_from_columns(vecs: &Mat, keep: impl Iterator<Item = bool>) -> Mat {
    let n = vecs.nrows();
    let mut p = Mat::zeros(n, n);
    for (i, k) in keep.enumerate() {
        if k {
            let v = vecs.column(i);
            p += v * v.adjoint();
        }
    }
    (&p + p.adjoint()) * C64::new(0.5, 0.0)
}

/// Orthonormal basis of the range of a projection, as columns.
pub fn projection_basis(p: &Mat) -> Mat {
    let (vals, vecs) = herm_eigen(p);
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
    let mut basis = Mat::zeros(p.nrows(), cols.len());
    for (dst, &src) in cols.iter().enumerate() {
        basis.set_column(dst, &vecs.column(src));
    }
    basis
}

/// Projection defect `max(‖P − P*‖, ‖P² − P‖)` in the Frobenius norm.
pub fn projection_defect(p: &Mat) -> f64 {
    hermitian_defect(p).max(frobenius(&(p * p - p)))
}

pub fn check_projection(p: &Mat, tol: f64, what: &str) -> Result<()> {
    let d = projection_defect(p);
    if d > tol {
        return Err(CzError::Contract(format!("{what} is not an orthogonal projection (defect {d:.3e})")));
    }
    Ok(())
}

/// `P ≤ Q` for projections: `‖P − QPQ‖ ≤ 1e-9`.
pub fn proj_leq(p: &Mat, q: &Mat) -> bool {
    frobenius(&(p - q * p * q)) <= 1e-9
}

/// The meet `P ∧ Q`: projection onto `range P ∩ range Q`.
pub fn proj_meet(p: &Mat, q: &Mat) -> Mat {
    // range P ∩ range Q is the eigenvalue-2 eigenspace of P + Q.
    let (vals, vecs) = herm_eigen(&(p + q));
    projector_from_columns(&vecs, vals.iter().map(|&v| v > 2.0 - 1e-8))
}

/// Whether a Hermitian matrix is positive semidefinite up to `rel_tol·max(1,‖a‖)`.
pub fn min_eigenvalue(a: &Mat) -> f64 {
    herm_eigenvalues(a).first().copied().unwrap_or(0.0)
}

pub fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Matrix unit `e_{ij}` (zero based).
pub fn matrix_unit(m: usize, i: usize, j: usize) -> Mat {
    let mut e = Mat::zeros(m, m);
    e[(i, j)] = real(1.0);
    e
}

/// Schatten-`p` norm of a single matrix.
pub fn schatten(a: &Mat, p: f64) -> f64 {
    let s = singular_values(a);
    if p.is_infinite() {
        return s.first().copied().unwrap_or(0.0);
    }
    s.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> Mat {
        let mut m = Mat::zeros(v.len(), v.len());
        for (i, x) in v.iter().enumerate() {
            m[(i, i)] = real(*x);
        }
        m
    }

    #[test]
    fn eigen_ordering_and_reconstruction() {
        let mut a = diag(&[3.0, -1.0, 2.0]);
        a[(0, 1)] = C64::new(0.5, 0.25);
        a[(1, 0)] = C64::new(0.5, -0.25);
        let (vals, vecs) = herm_eigen(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let mut d = Mat::zeros(3, 3);
        for i in 0..3 {
            d[(i, i)] = real(vals[i]);
        }
        let back = &vecs * d * vecs.adjoint();
        assert!(frobenius(&(back - a)) < 1e-12);
    }

    #[test]
    fn abs_of_unitary_is_identity() {
        let s = 0.5f64.sqrt();
        let mut u = Mat::zeros(2, 2);
        u[(0, 0)] = real(s);
        u[(0, 1)] = C64::new(0.0, s);
        u[(1, 0)] = C64::new(0.0, s);
        u[(1, 1)] = real(s);
        assert!(frobenius(&(abs(&u) - identity(2))) < 1e-12);
    }

    #[test]
    fn meet_of_diagonal_projections() {
        let p = diag(&[1.0, 1.0, 0.0]);
        let q = diag(&[0.0, 1.0, 1.0]);
        assert!(frobenius(&(proj_meet(&p, &q) - diag(&[0.0, 1.0, 0.0]))) < 1e-12);
    }

    #[test]
    fn projection_order_on_diagonals() {
        for a in 0..8u32 {
            for b in 0..8u32 {
                let p = diag(&(0..3).map(|i| ((a >> i) & 1) as f64).collect::<Vec<_>>());
                let q = diag(&(0..3).map(|i| ((b >> i) & 1) as f64).collect::<Vec<_>>());
                assert_eq!(proj_leq(&p, &q), a & !b == 0);
            }
        }
    }
}
