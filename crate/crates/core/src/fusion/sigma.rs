use nalgebra::{DMatrix, SMatrix, SVector};

use crate::{Error, Result};

/// Scaled unscented transform parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UtParams {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 2.0, kappa: 0.0 }
    }
}

/// `2n + 1` points with mean and covariance weights.
#[derive(Debug, Clone)]
pub struct SigmaPoints<const N: usize> {
    pub points: Vec<SVector<f64, N>>,
    pub wm: Vec<f64>,
    pub wc: Vec<f64>,
}

impl<const N: usize> SigmaPoints<N> {
    pub fn mean(&self) -> SVector<f64, N> {
        self.points.iter().zip(&self.wm).fold(SVector::zeros(), |acc, (x, w)| acc + x * *w)
    }

    pub fn covariance(&self) -> SMatrix<f64, N, N> {
        let m = self.mean();
        self.points.iter().zip(&self.wc).fold(SMatrix::zeros(), |acc, (x, w)| {
            let d = x - m;
            acc + d * d.transpose() * *w
        })
    }
}

/// Largest negative eigenvalue tolerated (and clamped) when a covariance has
/// to be square-rooted by eigendecomposition.
pub const PSD_TOLERANCE: f64 = 1e-6;

pub fn sigma_points<const N: usize>(
    mean: &SVector<f64, N>,
    p: &SMatrix<f64, N, N>,
    ut: &UtParams,
) -> Result<SigmaPoints<N>> {
    let n = N as f64;
    let lambda = ut.alpha * ut.alpha * (n + ut.kappa) - n;
    let scale = n + lambda;
    if !(scale > 0.0) {
        return Err(Error::config(format!("unscented scale n + lambda = {scale} must be > 0")));
    }
    let root = sqrt_psd(&(p * scale))?;
    let mut points = Vec::with_capacity(2 * N + 1);
    points.push(*mean);
    for i in 0..N {
        points.push(mean + root.column(i));
    }
    for i in 0..N {
        points.push(mean - root.column(i));
    }
    let w = 0.5 / scale;
    let mut wm = vec![w; 2 * N + 1];
    let mut wc = wm.clone();
    wm[0] = lambda / scale;
    wc[0] = lambda / scale + (1.0 - ut.alpha * ut.alpha + ut.beta);
    Ok(SigmaPoints { points, wm, wc })
}

/// Lower-triangular Cholesky factor when it exists; otherwise a symmetric
/// eigendecomposition with small negative eigenvalues clamped to zero.
pub fn sqrt_psd<const N: usize>(p: &SMatrix<f64, N, N>) -> Result<SMatrix<f64, N, N>> {
    if let Some(ch) = p.cholesky() {
        return Ok(ch.l());
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite covariance"));
    }
    let sym = DMatrix::from_fn(N, N, |i, j| 0.5 * (p[(i, j)] + p[(j, i)]));
    let eig = sym.symmetric_eigen();
    let min = eig.eigenvalues.min();
    let tol = PSD_TOLERANCE * p.diagonal().abs().max().max(1.0);
    if min < -tol {
        return Err(Error::numeric(format!("covariance is indefinite (eigenvalue {min:.3e})")));
    }
    let sq = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let r = &eig.eigenvectors * DMatrix::from_diagonal(&sq);
    Ok(SMatrix::from_fn(|i, j| r[(i, j)]))
}

/// Symmetrize and check that no eigenvalue is below `-tol`.
pub fn ensure_psd<const N: usize>(p: &SMatrix<f64, N, N>, tol: f64) -> Result<SMatrix<f64, N, N>> {
    let sym = (p + p.transpose()) * 0.5;
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite covariance"));
    }
    if (sym + SMatrix::<f64, N, N>::identity() * tol).cholesky().is_some() {
        return Ok(sym);
    }
    let min = min_eigenvalue(&sym);
    if min < -tol {
        return Err(Error::numeric(format!("covariance is indefinite (eigenvalue {min:.3e})")));
    }
    Ok(sym)
}

pub fn min_eigenvalue<const N: usize>(p: &SMatrix<f64, N, N>) -> f64 {
    DMatrix::from_fn(N, N, |i, j| 0.5 * (p[(i, j)] + p[(j, i)])).symmetric_eigenvalues().min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix1, Vector1};
    use rand::{Rng, SeedableRng};

    #[test]
    fn scalar_unit_case() {
        let ut = UtParams { alpha: 1.0, beta: 2.0, kappa: 0.0 };
        let sp = sigma_points(&Vector1::new(0.0), &Matrix1::new(1.0), &ut).unwrap();
        let xs: Vec<f64> = sp.points.iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, -1.0]);
        assert_relative_eq!(sp.wm[0], 0.0);
        assert_relative_eq!(sp.mean()[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(sp.covariance()[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn moments_are_recovered() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = SMatrix::<f64, 15, 15>::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let p = a * a.transpose() + SMatrix::<f64, 15, 15>::identity() * 0.1;
            let m = SVector::<f64, 15>::from_fn(|_, _| rng.random_range(-100.0..100.0));
            let sp = sigma_points(&m, &p, &UtParams::default()).unwrap();
            assert_relative_eq!(sp.mean(), m, epsilon = 1e-12 * 100.0);
            assert_relative_eq!(sp.covariance(), p, epsilon = 1e-10 * p.amax());
            assert_eq!(sp.points.len(), 31);
        }
    }

    #[test]
    fn singular_covariance_falls_back() {
        let p = nalgebra::Matrix3::new(1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        let r = sqrt_psd(&p).unwrap();
        assert_relative_eq!(r * r.transpose(), p, epsilon = 1e-12);
        let bad = nalgebra::Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(sqrt_psd(&bad).is_err());
        assert!(ensure_psd(&bad, 1e-6).is_err());
    }
}
