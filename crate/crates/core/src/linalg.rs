//! Dense Hermitian kernels: eigendecomposition, spectral matrix functions,
//! norms and the polar decomposition.
//!
//! Every matrix function goes through a full eigendecomposition. Eigenvalues
//! at or below `support_tol * lambda_max` are treated as exact zeros, so
//! "inverse" is the Moore-Penrose pseudo-inverse and "log" is the logarithm
//! restricted to the support.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// Relative Frobenius asymmetry accepted (and silently symmetrized) by
/// [`eig_hermitian`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Default rank-decision slack: `64 * dim * eps`, relative to the largest
/// eigenvalue.
pub fn default_support_tol(dim: usize) -> f64 {
    64.0 * dim.max(1) as f64 * f64::EPSILON
}

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Spectral decomposition `M = Q diag(values) Q*` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub vectors: ComplexMatrix,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_radius(&self) -> f64 {
        self.lambda_max().abs().max(self.lambda_min().abs())
    }

    /// Threshold below which an eigenvalue counts as zero.
    pub fn cutoff(&self, support_tol: f64) -> f64 {
        support_tol * self.lambda_max().max(0.0)
    }

    /// Number of eigenvalues above the support cutoff.
    pub fn rank(&self, support_tol: f64) -> usize {
        let cut = self.cutoff(support_tol);
        if self.lambda_max() <= 0.0 {
            return 0;
        }
        self.values.iter().filter(|&&l| l > cut).count()
    }

    /// Applies `f` to every eigenvalue.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        self.apply_complex(|x| c(f(x)))
    }

    pub fn apply_complex(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let fl = f(l);
            for i in 0..n {
                scaled[(i, j)] *= fl;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Applies `f` on the support only; eigenvalues below the cutoff map to 0.
    pub fn apply_on_support(&self, f: impl Fn(f64) -> f64, support_tol: f64) -> ComplexMatrix {
        self.apply_complex_on_support(|x| c(f(x)), support_tol)
    }

    pub fn apply_complex_on_support(
        &self,
        f: impl Fn(f64) -> C64,
        support_tol: f64,
    ) -> ComplexMatrix {
        let cut = self.cutoff(support_tol);
        let positive = self.lambda_max() > 0.0;
        self.apply_complex(|x| {
            if positive && x > cut {
                f(x)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// Orthogonal projector onto the eigenvectors above the support cutoff.
    pub fn support_projector(&self, support_tol: f64) -> ComplexMatrix {
        self.apply_on_support(|_| 1.0, support_tol)
    }

    /// Columns of `vectors` spanning the support.
    pub fn support_basis(&self, support_tol: f64) -> ComplexMatrix {
        let r = self.rank(support_tol);
        self.vectors.columns(0, r).into_owned()
    }

    /// Columns of `vectors` spanning the numerical kernel.
    pub fn kernel_basis(&self, support_tol: f64) -> ComplexMatrix {
        let r = self.rank(support_tol);
        self.vectors.columns(r, self.dim() - r).into_owned()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply(|x| x)
    }
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `||M - M*||_F / ||M||_F` (0 for the zero matrix).
pub fn relative_asymmetry(m: &ComplexMatrix) -> f64 {
    let n = m.norm();
    if n == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / n
}

pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * c(0.5)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues in descending
/// order. Inputs with asymmetry up to [`HERMITIAN_TOL`] are symmetrized first.
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<EigenSystem> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !is_finite(m) {
        return Err(Error::NonFinite);
    }
    let asymmetry = relative_asymmetry(m);
    if asymmetry > HERMITIAN_TOL {
        return Err(Error::NonHermitian { asymmetry });
    }
    Ok(eig_symmetrized(m))
}

/// Eigendecomposition of the Hermitian part of `m`, without the asymmetry
/// gate. Used internally on products that are Hermitian up to rounding.
pub(crate) fn eig_symmetrized(m: &ComplexMatrix) -> EigenSystem {
    let n = m.nrows();
    if n == 0 {
        return EigenSystem {
            values: Vec::new(),
            vectors: ComplexMatrix::zeros(0, 0),
        };
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    EigenSystem { values, vectors }
}

/// Applies `f` to a Hermitian positive semidefinite matrix on its support.
///
/// Eigenvalues `<= support_tol * lambda_max` are treated as zeros and mapped
/// to 0. Fails with [`Error::NegativeEigenvalue`] when
/// `lambda_min < -support_tol * lambda_max`.
pub fn mat_func(
    m: &ComplexMatrix,
    f: impl Fn(f64) -> f64,
    support_tol: f64,
) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(m)?;
    check_psd(&eig, support_tol)?;
    Ok(eig.apply_on_support(f, support_tol))
}

pub(crate) fn check_psd(eig: &EigenSystem, support_tol: f64) -> Result<()> {
    let lambda_min = eig.lambda_min();
    if lambda_min < -eig.cutoff(support_tol) {
        return Err(Error::NegativeEigenvalue { lambda_min });
    }
    Ok(())
}

/// Support-restricted functions of PSD matrices that are known to be PSD up to
/// rounding (marginals of validated states, products of such).
pub(crate) mod psd {
    use super::*;

    pub fn sqrt(m: &ComplexMatrix) -> ComplexMatrix {
        let e = eig_symmetrized(m);
        e.apply_on_support(f64::sqrt, default_support_tol(e.dim()))
    }

    pub fn inv_sqrt(m: &ComplexMatrix) -> ComplexMatrix {
        let e = eig_symmetrized(m);
        e.apply_on_support(|x| 1.0 / x.sqrt(), default_support_tol(e.dim()))
    }

    pub fn pinv(m: &ComplexMatrix) -> ComplexMatrix {
        let e = eig_symmetrized(m);
        e.apply_on_support(|x| 1.0 / x, default_support_tol(e.dim()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    /// Sum of singular values.
    Trace,
    /// Largest singular value.
    Operator,
    /// Entrywise l2.
    Frobenius,
}

pub fn norm(m: &ComplexMatrix, kind: NormKind) -> Result<f64> {
    if !is_finite(m) {
        return Err(Error::NonFinite);
    }
    Ok(match kind {
        NormKind::Frobenius => m.norm(),
        NormKind::Trace => singular_values(m).iter().sum(),
        NormKind::Operator => singular_values(m).iter().copied().fold(0.0, f64::max),
    })
}

/// Singular values; Hermitian inputs (up to rounding) go through the
/// eigensolver.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    if m.nrows() == m.ncols() && relative_asymmetry(m) <= 1e-14 {
        return eig_symmetrized(m).values.iter().map(|v| v.abs()).collect();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

pub fn trace_norm(m: &ComplexMatrix) -> f64 {
    singular_values(m).iter().sum()
}

pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    singular_values(m).iter().copied().fold(0.0, f64::max)
}

/// Smallest singular value.
pub fn min_singular_value(m: &ComplexMatrix) -> f64 {
    singular_values(m).iter().copied().fold(f64::INFINITY, f64::min)
}

/// Polar decomposition `A = W P` with `W` unitary and `P = (A*A)^{1/2}`.
///
/// Computed from the SVD `A = U S V*` as `W = U V*`, which also completes `W`
/// to a unitary on the kernel of a singular `A`.
pub fn polar_unitary(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimMismatch(format!(
            "polar decomposition needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V*");
    let w = &u * &v_t;
    let sigma = ComplexMatrix::from_diagonal(&svd.singular_values.map(c));
    let p = v_t.adjoint() * sigma * &v_t;
    Ok((w, p))
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { c(values[i]) } else { c(0.0) })
}

/// Builds a complex matrix from real row slices.
pub fn from_real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    ComplexMatrix::from_fn(n, m, |i, j| c(rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pauli_x() -> ComplexMatrix {
        from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    fn reconstruction_error(m: &ComplexMatrix, e: &EigenSystem) -> f64 {
        (e.reconstruct() - m).norm()
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = eig_hermitian(&identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        let qq = e.vectors.adjoint() * &e.vectors;
        assert!((qq - identity(2)).norm() < 1e-15);

        let e = eig_hermitian(&diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert_abs_diff_eq!(e.vectors[(1, 0)].norm(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.vectors[(0, 1)].norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn eig_pauli_x() {
        let x = pauli_x();
        let e = eig_hermitian(&x).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.values[1], -1.0, epsilon = 1e-15);
        assert!(reconstruction_error(&x, &e) < 1e-14);
    }

    #[test]
    fn eig_rejects_bad_input() {
        let m = from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(eig_hermitian(&m), Err(Error::NonHermitian { .. })));
        let mut n = identity(2);
        n[(0, 0)] = c(f64::NAN);
        assert!(matches!(eig_hermitian(&n), Err(Error::NonFinite)));
    }

    #[test]
    fn eig_symmetrizes_small_asymmetry() {
        let mut m = pauli_x();
        m[(0, 1)] += c(1e-12);
        assert!(eig_hermitian(&m).is_ok());
    }

    #[test]
    fn mat_func_examples() {
        let s = mat_func(&identity(2), f64::sqrt, 1e-12).unwrap();
        assert!((s - identity(2)).norm() < 1e-15);

        let inv = mat_func(&diag(&[4.0, 0.0]), |x| 1.0 / x, 1e-12).unwrap();
        assert!((inv - diag(&[0.25, 0.0])).norm() < 1e-15);

        let e2 = std::f64::consts::E.powi(2);
        let l = mat_func(&diag(&[e2, 1.0]), f64::ln, 1e-12).unwrap();
        assert!((l - diag(&[2.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn mat_func_rejects_negative() {
        let m = diag(&[1.0, -0.5]);
        assert!(matches!(
            mat_func(&m, f64::sqrt, 1e-12),
            Err(Error::NegativeEigenvalue { .. })
        ));
    }

    #[test]
    fn norm_examples() {
        assert_abs_diff_eq!(norm(&diag(&[1.0, -2.0]), NormKind::Trace).unwrap(), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(norm(&identity(5), NormKind::Operator).unwrap(), 1.0, epsilon = 1e-14);
        let n = from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert_abs_diff_eq!(norm(&n, NormKind::Frobenius).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(norm(&n, NormKind::Trace).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn polar_examples() {
        let (w, p) = polar_unitary(&identity(3)).unwrap();
        assert!((w - identity(3)).norm() < 1e-14);
        assert!((p - identity(3)).norm() < 1e-14);

        let a = diag(&[-1.0, 1.0]);
        let (w, p) = polar_unitary(&a).unwrap();
        assert!((w - &a).norm() < 1e-14);
        assert!((p - identity(2)).norm() < 1e-14);
    }

    #[test]
    fn polar_singular_completes_unitary() {
        let a = from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let (w, p) = polar_unitary(&a).unwrap();
        assert!((w.adjoint() * &w - identity(2)).norm() < 1e-14);
        assert!((&w * &p - &a).norm() < 1e-14);
    }
}
