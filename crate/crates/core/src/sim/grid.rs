use crate::error::{Result, SsrError};

/// Uniform grid `t_j = jΔ` on `[0, T]` with `Δ = T / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    maturity: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(maturity: f64, n_steps: usize) -> Result<Self> {
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(SsrError::Validation(format!(
                "grid maturity must be positive, got {maturity}"
            )));
        }
        if n_steps < 2 {
            return Err(SsrError::Validation(format!(
                "grid needs at least 2 steps, got {n_steps}"
            )));
        }
        Ok(Self { maturity, n_steps })
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.maturity / self.n_steps as f64
    }

    /// Cell edge `t_j`; `t_n` is exactly the maturity.
    pub fn time(&self, j: usize) -> f64 {
        if j == self.n_steps {
            self.maturity
        } else {
            j as f64 * self.dt()
        }
    }
}
