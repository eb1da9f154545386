//! Dense eigensolver wrappers: real Schur for eigenvalues and shifted
//! inverse iteration in complex arithmetic for residual-checked
//! eigenvectors.  Matrices here stay in the low thousands, so dense
//! Hessenberg + QR (what the Schur decomposition does internally) is the
//! right tool.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::{Error, Result};

pub type C64 = Complex<f64>;

/// One converged eigenpair with its residual `|A v - lambda v| / |v|`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C64,
    pub vector: DVector<C64>,
    pub residual: f64,
}

/// All eigenvalues of a real square matrix.
pub fn eigenvalues(mat: &DMatrix<f64>) -> Result<Vec<C64>> {
    let schur = nalgebra::linalg::Schur::try_new(mat.clone(), 1e-14, 0)
        .ok_or_else(|| Error::Eigensolver("Schur iteration did not converge".into()))?;
    let vals = schur
        .complex_eigenvalues();
    Ok(vals.iter().cloned().collect())
}

/// Eigenvector for a known (approximate) eigenvalue by two or three
/// rounds of shifted inverse iteration, with a Rayleigh-quotient‑refined
/// eigenvalue.  Works for complex eigenvalues of real matrices.
pub fn inverse_iteration(mat: &DMatrix<f64>, lambda: C64) -> Result<EigenPair> {
    let n = mat.nrows();
    let scale = mat.norm() / (n as f64).sqrt();
    let shift = lambda + C64::new(1e-10 * scale.max(1e-300), 0.0);
    let ac: DMatrix<C64> = mat.map(|v| C64::new(v, 0.0));
    let mut shifted = ac.clone();
    for i in 0..n {
        shifted[(i, i)] -= shift;
    }
    let lu = shifted.lu();
    // Deterministic pseudo-random start vector.
    let mut state = 0x9e3779b97f4a7c15_u64;
    let mut v = DVector::from_fn(n, |_, _| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        C64::new(((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5, 0.0)
    });
    v /= C64::new(v.norm(), 0.0);
    let mut value = lambda;
    let mut residual = f64::INFINITY;
    for _ in 0..4 {
        let w = lu
            .solve(&v)
            .ok_or_else(|| Error::Eigensolver("singular shifted system".into()))?;
        let nw = w.norm();
        if !nw.is_finite() || nw == 0.0 {
            return Err(Error::Eigensolver("inverse iteration broke down".into()));
        }
        v = w / C64::new(nw, 0.0);
        let av = &ac * &v;
        value = v.dotc(&av);
        residual = (&av - &v * value).norm();
        if residual < 1e-13 * scale.max(1.0) {
            break;
        }
    }
    Ok(EigenPair { value, vector: v, residual })
}

/// Eigenvalues sorted by descending real part, with eigenpairs computed
/// for the `k_vectors` leading ones.
pub fn leading_eigenpairs(
    mat: &DMatrix<f64>,
    k_vectors: usize,
) -> Result<(Vec<C64>, Vec<EigenPair>)> {
    let mut vals = eigenvalues(mat)?;
    vals.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
    let mut pairs = Vec::new();
    for &lambda in vals.iter().take(k_vectors) {
        pairs.push(inverse_iteration(mat, lambda)?);
    }
    Ok((vals, pairs))
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn solve_real(mat: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    mat.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::SingularOperator("dense LU solve failed".into()))
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigen_of_known_matrix() {
        // [[2, 1], [0, 3]] has eigenvalues 2 and 3.
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let mut vals = eigenvalues(&m).unwrap();
        vals.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert_abs_diff_eq!(vals[0].re, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1].re, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn complex_pair_and_vectors() {
        // Rotation-like block has eigenvalues 1 +/- 2i.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 2.0, 1.0]);
        let (vals, pairs) = leading_eigenpairs(&m, 2).unwrap();
        assert_abs_diff_eq!(vals[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[0].im.abs(), 2.0, epsilon = 1e-12);
        for p in pairs {
            assert!(p.residual < 1e-10, "residual {}", p.residual);
        }
    }

    #[test]
    fn inverse_iteration_residuals_on_random_matrix() {
        let n = 40;
        let mut state = 12345u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = DMatrix::from_fn(n, n, |_, _| rnd());
        let (vals, pairs) = leading_eigenpairs(&m, 6).unwrap();
        assert_eq!(vals.len(), n);
        for p in &pairs {
            assert!(p.residual < 1e-9, "residual {}", p.residual);
        }
    }

    #[test]
    fn slope_fit() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        assert_abs_diff_eq!(ls_slope(&x, &y), 2.0, epsilon = 1e-12);
    }
}
