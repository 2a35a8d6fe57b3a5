//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, Dyn, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::system::{ComplexMatrix, RealMatrix};

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Symmetrizes a numerically Hermitian matrix.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Cholesky factor of the Hermitian part of `m`, or `None` unless it is positive definite.
///
/// nalgebra's complex factorization takes complex square roots of negative
/// pivots instead of failing, so the pivots are checked here.
pub(crate) fn cholesky(m: &ComplexMatrix) -> Option<Cholesky<Complex64, Dyn>> {
    let ch = hermitian_part(m).cholesky()?;
    let ok = ch
        .l_dirty()
        .diagonal()
        .iter()
        .all(|z| z.re > 0.0 && z.re.is_finite() && z.im.abs() <= 1e-12 * z.re);
    ok.then_some(ch)
}

/// `log det` of a Hermitian positive-definite matrix (natural log).
pub fn logdet_hpd(m: &ComplexMatrix) -> Result<f64> {
    let ch = cholesky(m).ok_or_else(|| Error::RankDeficient("matrix is not positive definite".into()))?;
    Ok(ch.l_dirty().diagonal().iter().map(|z| 2.0 * z.re.ln()).sum())
}

pub fn inverse_hpd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    cholesky(m)
        .map(|ch| ch.inverse())
        .ok_or_else(|| Error::RankDeficient("matrix is not positive definite".into()))
}

/// Solves `m x = rhs` for Hermitian positive-definite `m`.
///
/// When the factorization fails, a diagonal load of `1e-12 · tr(m)/n` (growing
/// tenfold per retry) is added and the returned flag is set.
pub fn solve_hpd_regularized(m: &ComplexMatrix, rhs: &ComplexMatrix) -> (ComplexMatrix, bool) {
    if let Some(ch) = cholesky(m) {
        return (ch.solve(rhs), false);
    }
    let n = m.nrows().max(1);
    let scale = (m.trace().re.abs() / n as f64).max(f64::MIN_POSITIVE);
    let mut load = 1e-12 * scale;
    loop {
        let mut loaded = hermitian_part(m);
        for i in 0..m.nrows() {
            loaded[(i, i)] += c(load);
        }
        if let Some(ch) = cholesky(&loaded) {
            return (ch.solve(rhs), true);
        }
        load *= 10.0;
    }
}

/// Inverse square root of a Hermitian positive-definite matrix.
pub fn inverse_sqrt_hpd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if eig.eigenvalues.iter().any(|&l| l <= max * 1e-13 || l <= 0.0) {
        return Err(Error::RankDeficient("matrix is singular".into()));
    }
    let q = &eig.eigenvectors;
    let d = ComplexMatrix::from_diagonal(&eig.eigenvalues.map(|l| c(1.0 / l.sqrt())));
    Ok(q * d * q.adjoint())
}

/// Euclidean norm of each row of `f · w`.
pub fn row_norms(f: &ComplexMatrix, w: &ComplexMatrix) -> Vec<f64> {
    let fw = f * w;
    fw.row_iter().map(|r| r.norm()).collect()
}

/// Unit-modulus matrix `exp(j θ)`.
pub fn phase_matrix(theta: &RealMatrix) -> ComplexMatrix {
    theta.map(|t| Complex64::from_polar(1.0, t))
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Matrix of i.i.d. circularly-symmetric complex Gaussians with the given variance.
pub fn random_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> ComplexMatrix {
    let s = (variance / 2.0).sqrt();
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logdet_matches_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_gaussian(&mut rng, 4, 4, 1.0);
        let m = &a * a.adjoint() + identity(4);
        let eig = SymmetricEigen::new(m.clone());
        let expected: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum();
        assert!((logdet_hpd(&m).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn inverse_sqrt_squares_to_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_gaussian(&mut rng, 3, 3, 1.0);
        let m = &a * a.adjoint() + identity(3);
        let s = inverse_sqrt_hpd(&m).unwrap();
        let err = (&s * &s * &m - identity(3)).norm();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn singular_matrix_is_regularized() {
        let m = ComplexMatrix::zeros(2, 2);
        let rhs = ComplexMatrix::from_element(2, 1, c(1.0));
        let (_, flagged) = solve_hpd_regularized(&m, &rhs);
        assert!(flagged);
        assert!(logdet_hpd(&m).is_err());
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let m = -identity(2);
        assert!(logdet_hpd(&m).is_err());
        assert!(inverse_hpd(&m).is_err());
    }
}
