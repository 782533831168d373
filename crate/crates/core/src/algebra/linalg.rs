//! Dense complex linear algebra helpers shared across the crate.

use nalgebra::{Complex, DMatrix};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Entrywise max-norm; the only norm used for tolerance checks.
pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn approx_eq(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    a.shape() == b.shape() && max_norm(&(a - b)) <= tol
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    max_norm(&(m - m.adjoint())) <= tol
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
/// Returns (eigenvalues, basis) with unitary `basis` whose column j is the
/// eigenvector of the j-th listed eigenvalue.  The input is symmetrized
/// first, so slightly perturbed Hermitian matrices are accepted.
pub fn eig_hermitian_desc(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut basis = CMatrix::zeros(n, n);
    for (j, &i) in order.iter().enumerate() {
        basis.set_column(j, &eig.eigenvectors.column(i));
    }
    (vals, basis)
}

/// Diagonal 0/1 matrix with ones on rows `lo..hi`.
pub fn range_projector(n: usize, lo: usize, hi: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in lo..hi {
        m[(i, i)] = C64::new(1.0, 0.0);
    }
    m
}

/// Permutation matrix sending basis vector l to basis vector sigma(l).
pub fn permutation_matrix(sigma: &[usize]) -> CMatrix {
    let n = sigma.len();
    let mut m = CMatrix::zeros(n, n);
    for (l, &s) in sigma.iter().enumerate() {
        m[(s, l)] = C64::new(1.0, 0.0);
    }
    m
}
