//! Model definition: kernels, correlations, the mixing matrix, the initial
//! forward variance curve and the configuration document.

mod config;
mod curve;
mod kernel;

use nalgebra::{DMatrix, DVector};

pub use config::{load_config, load_config_file, Factor, ModelConfig};
pub use curve::ForwardVarianceCurve;
pub use kernel::{EffectiveKernel, Kernel, KernelSpec};

use crate::error::{Result, SsrError};

/// Spot-vol correlations `ρᵢ = d⟨B, Wⁱ⟩/dt` with `ρ = |ρ| ∈ (0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVector(Vec<f64>);

impl CorrelationVector {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() {
            return Err(SsrError::InvalidCorrelation("need at least one factor".into()));
        }
        if rho.iter().any(|r| !r.is_finite()) {
            return Err(SsrError::InvalidCorrelation("non-finite correlation".into()));
        }
        let norm = rho.iter().map(|r| r * r).sum::<f64>().sqrt();
        if norm >= 1.0 {
            return Err(SsrError::InvalidCorrelation(format!(
                "correlation norm ≥ 1 (|rho| = {norm})"
            )));
        }
        if norm == 0.0 {
            return Err(SsrError::InvalidCorrelation(
                "correlation norm must be positive".into(),
            ));
        }
        Ok(Self(rho))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `ρ = sqrt(Σ ρᵢ²)`.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|r| r * r).sum::<f64>().sqrt()
    }
}

/// Symmetric square root `L = I − β ρρᵀ` of `I − ρρᵀ`, with
/// `β = (1 − sqrt(1 − ρ²)) / ρ²`, so that `W = ρB + L·B⊥` has
/// `Cov(Wⁱ, B) = ρᵢ` and identity covariance.
pub fn mixing_matrix(correlations: &CorrelationVector) -> DMatrix<f64> {
    let rho = DVector::from_column_slice(correlations.as_slice());
    let r2 = rho.norm_squared();
    // (1 − sqrt(1 − r²)) / r² = 1 / (1 + sqrt(1 − r²)), stable for small r
    let beta = 1.0 / (1.0 + (1.0 - r2).sqrt());
    let d = correlations.dim();
    DMatrix::identity(d, d) - beta * &rho * rho.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn residual(rho: &[f64]) -> f64 {
        let c = CorrelationVector::new(rho.to_vec()).unwrap();
        let l = mixing_matrix(&c);
        let r = DVector::from_column_slice(rho);
        let target = DMatrix::identity(rho.len(), rho.len()) - &r * r.transpose();
        (&l * l.transpose() - target).amax()
    }

    #[test]
    fn scalar_case() {
        let c = CorrelationVector::new(vec![0.6]).unwrap();
        let l = mixing_matrix(&c);
        assert!((l[(0, 0)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn two_factor_example() {
        let c = CorrelationVector::new(vec![0.6, 0.0]).unwrap();
        let l = mixing_matrix(&c);
        let expected = DMatrix::from_row_slice(2, 2, &[0.8, 0.0, 0.0, 1.0]);
        assert!((l - expected).amax() < 1e-15);
    }

    #[test]
    fn symmetric_and_reconstructs_covariance() {
        let rho = [0.3, -0.5, 0.2];
        let l = mixing_matrix(&CorrelationVector::new(rho.to_vec()).unwrap());
        assert!((&l - l.transpose()).amax() == 0.0);
        assert!(residual(&rho) <= 1e-12);
    }

    #[test]
    fn eigenvalues_are_one_and_one_minus_rho_squared() {
        let rho = [0.4, 0.1, -0.6, 0.2];
        let c = CorrelationVector::new(rho.to_vec()).unwrap();
        let l = mixing_matrix(&c);
        let mut eig: Vec<f64> = (&l * l.transpose()).symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let r2 = c.norm().powi(2);
        assert!((eig[0] - (1.0 - r2)).abs() < 1e-12);
        for e in &eig[1..] {
            assert!((e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_correlations() {
        assert!(CorrelationVector::new(vec![0.8, 0.7]).is_err());
        assert!(CorrelationVector::new(vec![1.0]).is_err());
        assert!(CorrelationVector::new(vec![0.0, 0.0]).is_err());
        assert!(CorrelationVector::new(vec![]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn cholesky_identity(raw in prop::collection::vec(-1.0f64..1.0, 1..=5), scale in 0.01f64..0.99) {
            let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assume!(n > 1e-6);
            let rho: Vec<f64> = raw.iter().map(|x| x / n * scale).collect();
            prop_assert!(residual(&rho) <= 1e-12);
        }
    }
}
