use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorrelationVector, EffectiveKernel, ForwardVarianceCurve, KernelSpec};
use crate::error::{Result, SsrError};

/// One Volterra factor: correlation with the spot Brownian and its kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Factor {
    pub rho: f64,
    pub kernel: KernelSpec,
}

/// Validated model configuration.
///
/// The vol-of-vol multiplier `epsilon` scales every kernel at simulation time;
/// the kernels themselves stay ε-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawConfig")]
pub struct ModelConfig {
    pub spot0: f64,
    pub maturity: f64,
    pub curve: ForwardVarianceCurve,
    pub factors: Vec<Factor>,
    pub epsilon: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    spot0: f64,
    maturity: f64,
    curve: ForwardVarianceCurve,
    factors: Vec<Factor>,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
}

fn default_epsilon() -> f64 {
    1.0
}

impl TryFrom<RawConfig> for ModelConfig {
    type Error = SsrError;

    fn try_from(raw: RawConfig) -> Result<Self> {
        let cfg = ModelConfig {
            spot0: raw.spot0,
            maturity: raw.maturity,
            curve: raw.curve,
            factors: raw.factors,
            epsilon: raw.epsilon,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ModelConfig {
    pub fn new(
        spot0: f64,
        maturity: f64,
        curve: ForwardVarianceCurve,
        factors: Vec<Factor>,
        epsilon: f64,
    ) -> Result<Self> {
        let cfg = Self {
            spot0,
            maturity,
            curve,
            factors,
            epsilon,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spot0.is_finite() && self.spot0 > 0.0) {
            return Err(SsrError::Validation(format!(
                "spot0 must be positive, got {}",
                self.spot0
            )));
        }
        if !(self.maturity.is_finite() && self.maturity > 0.0) {
            return Err(SsrError::Validation(format!(
                "maturity must be positive, got {}",
                self.maturity
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(SsrError::Validation(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        self.curve.validate()?;
        if self.curve.horizon() < self.maturity {
            return Err(SsrError::Validation(format!(
                "forward variance curve ends at {} before maturity {}",
                self.curve.horizon(),
                self.maturity
            )));
        }
        for f in &self.factors {
            f.kernel.validate()?;
        }
        self.correlations()
            .map_err(|e| SsrError::Validation(e.to_string()))?;
        self.effective_kernel()?;
        Ok(())
    }

    pub fn correlations(&self) -> Result<CorrelationVector> {
        CorrelationVector::new(self.factors.iter().map(|f| f.rho).collect())
    }

    pub fn kernels(&self) -> Vec<KernelSpec> {
        self.factors.iter().map(|f| f.kernel).collect()
    }

    /// `k = Σ ρᵢ kᵢ` (ε excluded).
    pub fn effective_kernel(&self) -> Result<EffectiveKernel> {
        EffectiveKernel::new(self.factors.iter().map(|f| (f.rho, f.kernel)).collect())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut c = self.clone();
        c.epsilon = epsilon;
        c.validate()?;
        Ok(c)
    }

    pub fn with_maturity(&self, maturity: f64) -> Result<Self> {
        let mut c = self.clone();
        c.maturity = maturity;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a JSON config document.
pub fn load_config(text: &str) -> Result<ModelConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| SsrError::Parse(e.to_string()))?;
    ModelConfig::try_from(raw)
}

pub fn load_config_file(path: impl AsRef<Path>) -> Result<ModelConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| SsrError::Io(format!("cannot read config {}: {e}", path.display())))?;
    load_config(&text).map_err(|e| match e {
        SsrError::Parse(m) => SsrError::Parse(format!("{}: {m}", path.display())),
        SsrError::Validation(m) => SsrError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}
