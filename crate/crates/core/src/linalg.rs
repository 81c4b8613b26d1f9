//! Small dense complex linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector, Dim, Matrix, RawStorage};

use crate::C64;

/// Largest entry magnitude.
pub fn max_abs<R: Dim, C: Dim, S: RawStorage<C64, R, C>>(m: &Matrix<C64, R, C, S>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut vals: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigenvalues of a general complex matrix from its complex Schur form.
pub fn eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    let schur = m.clone().schur();
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|k| t[(k, k)]).collect()
}

/// Unit vector spanning (approximately) the kernel of `m`: the right singular
/// vector of the smallest singular value.
pub fn kernel_vector(m: &DMatrix<C64>) -> DVector<C64> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (k, &s)| if s < best.1 { (k, s) } else { best });
    v_t.row(k).adjoint()
}

pub fn commutator(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a * b - b * a
}

/// `max |m - m^dagger|`.
pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    max_abs(&(m - m.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schur_eigenvalues_of_triangular() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 1.0), C64::new(3.0, 0.0), C64::new(0.0, 0.0), C64::new(-2.0, 0.5)],
        );
        let mut ev = eigenvalues(&m);
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - C64::new(-2.0, 0.5)).norm() < 1e-12);
        assert!((ev[1] - C64::new(1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn kernel_of_rank_deficient() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(2.0, 0.0), C64::new(4.0, 0.0)],
        );
        let v = kernel_vector(&m);
        assert!((&m * &v).norm() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }
}
