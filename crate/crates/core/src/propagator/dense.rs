use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::SparseHamiltonian;
use crate::state::StateVector;

/// Largest dimension the dense reference will factorize.
pub const DENSE_ORACLE_MAX_DIM: usize = 5000;

const EIGEN_RESIDUAL: f64 = 1e-12;

/// `e^{−iHt}|ψ₀⟩` by dense linear algebra: eigendecomposition for Hermitian
/// `H` when it checks out, scaling and squaring of a Taylor series otherwise.
pub fn expm_dense_oracle(h: &SparseHamiltonian, t: f64, psi0: &StateVector) -> Result<StateVector> {
    let dim = h.dim();
    if dim > DENSE_ORACLE_MAX_DIM {
        return Err(Error::Dimension {
            dim,
            limit: DENSE_ORACLE_MAX_DIM,
        });
    }
    if dim != psi0.dim() {
        return Err(Error::Consistency("state and Hamiltonian dimensions differ".into()));
    }
    let m = h.to_dense();
    let v = DVector::from_column_slice(psi0.amps());
    let eig = if h.is_hermitian() {
        checked_eigen(h, &m.map(|z| z.re))
    } else {
        None
    };
    let out = if let Some(eig) = eig {
        let q = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
        let coeffs = q.adjoint() * &v;
        let rotated = DVector::from_iterator(
            dim,
            coeffs
                .iter()
                .zip(eig.eigenvalues.iter())
                .map(|(c, &e)| c * Complex64::new(0.0, -e * t).exp()),
        );
        q * rotated
    } else {
        expm_taylor(&(m * Complex64::new(0.0, -t))) * v
    };
    StateVector::from_amps(psi0.basis_arc().clone(), out.iter().copied().collect())
}

/// Eigendecomposition whose residual `‖HQ − QΛ‖_max` is verified. The QR
/// iteration occasionally stalls on clustered spectra at the default
/// threshold, so a tighter one is tried before giving up.
fn checked_eigen(h: &SparseHamiltonian, re: &DMatrix<f64>) -> Option<SymmetricEigen<f64, Dyn>> {
    let scale = re.amax().max(1.0);
    let dim = re.nrows();
    let mut x = vec![Complex64::new(0.0, 0.0); dim];
    let mut y = x.clone();
    for eps in [f64::EPSILON, 1e-18] {
        let Some(eig) = SymmetricEigen::try_new(re.clone(), eps, 0) else {
            continue;
        };
        let mut residual: f64 = 0.0;
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            for (xi, &q) in x.iter_mut().zip(eig.eigenvectors.column(j).iter()) {
                *xi = Complex64::new(q, 0.0);
            }
            h.apply(&x, &mut y);
            for (yi, xi) in y.iter().zip(&x) {
                residual = residual.max((yi - lambda * xi).norm());
            }
        }
        if residual <= EIGEN_RESIDUAL * scale {
            return Some(eig);
        }
        log::debug!("eigendecomposition residual {residual:e} at threshold {eps:e}");
    }
    None
}

fn expm_taylor(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm: f64 = (0..n)
        .map(|i| a.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / Complex64::new(2f64.powi(s), 0.0);
    let mut result = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / Complex64::new(k as f64, 0.0);
        result += &term;
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}
