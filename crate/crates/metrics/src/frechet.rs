//! Frechet distance between Gaussian fits of feature sets.

use crate::{MetricsError, Result};
use nalgebra::{DMatrix, DVector};

const COV_REG: f64 = 1e-6;

/// Symmetric PSD square root via eigendecomposition, negative eigenvalues
/// clamped to zero.
fn sqrtm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let roots: DVector<f64> = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `|mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2)` from explicit
/// moments (covariances regularized by `1e-6 I` before the root).
pub fn frechet_from_moments(
    mu_a: &[f64],
    cov_a: &DMatrix<f64>,
    mu_b: &[f64],
    cov_b: &DMatrix<f64>,
) -> Result<f64> {
    let d = mu_a.len();
    if mu_b.len() != d || cov_a.shape() != (d, d) || cov_b.shape() != (d, d) {
        return Err(MetricsError::Estimator("moment dimensions disagree".into()));
    }
    let reg = DMatrix::<f64>::identity(d, d) * COV_REG;
    let ca = cov_a + &reg;
    let cb = cov_b + &reg;
    let mean_term: f64 = mu_a.iter().zip(mu_b).map(|(a, b)| (a - b) * (a - b)).sum();
    let ra = sqrtm(&ca);
    let inner = &ra * &cb * &ra;
    let cross = sqrtm(&inner);
    let trace = ca.trace() + cb.trace() - 2.0 * cross.trace();
    Ok((mean_term + trace).max(0.0))
}

fn moments(features: &[Vec<f64>]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = features.len();
    if n < 2 {
        return Err(MetricsError::Estimator(format!("need >= 2 feature vectors, got {}", n)));
    }
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d) {
        return Err(MetricsError::Estimator("ragged feature vectors".into()));
    }
    let mut mu = vec![0.0; d];
    for f in features {
        for (m, v) in mu.iter_mut().zip(f) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n as f64);
    // unbiased sample covariance
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for f in features {
        let centered: Vec<f64> = f.iter().zip(&mu).map(|(v, m)| v - m).collect();
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    cov /= (n - 1) as f64;
    Ok((mu, cov))
}

/// Frechet distance between the Gaussian fits of two feature sets.
pub fn frechet(feats_a: &[Vec<f64>], feats_b: &[Vec<f64>]) -> Result<f64> {
    let (mu_a, cov_a) = moments(feats_a)?;
    let (mu_b, cov_b) = moments(feats_b)?;
    frechet_from_moments(&mu_a, &cov_a, &mu_b, &cov_b)
}
