//! Initial forward variance curve `t ↦ V₀(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsrError};

// Slack for grid points that land a few ulps past the last knot.
const EDGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum ForwardVarianceCurve {
    #[serde(rename = "flat")]
    Flat { v0: f64 },
    /// Linear interpolation between `(t, v)` knots; the first knot sits at `t = 0`.
    #[serde(rename = "pwl")]
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl ForwardVarianceCurve {
    pub fn flat(v0: f64) -> Result<Self> {
        let c = ForwardVarianceCurve::Flat { v0 };
        c.validate()?;
        Ok(c)
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        let c = ForwardVarianceCurve::PiecewiseLinear { knots };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ForwardVarianceCurve::Flat { v0 } => {
                if !(v0.is_finite() && *v0 > 0.0) {
                    return Err(SsrError::Validation(format!(
                        "forward variance must be positive, got v0 = {v0}"
                    )));
                }
            }
            ForwardVarianceCurve::PiecewiseLinear { knots } => {
                if knots.len() < 2 {
                    return Err(SsrError::Validation(
                        "piecewise-linear curve needs at least two knots".into(),
                    ));
                }
                if knots[0].0 != 0.0 {
                    return Err(SsrError::Validation(format!(
                        "first curve knot must be at t = 0, got t = {}",
                        knots[0].0
                    )));
                }
                for &(t, v) in knots {
                    if !(t.is_finite() && v.is_finite() && v > 0.0) {
                        return Err(SsrError::Validation(format!(
                            "forward variance must be positive, got V0({t}) = {v}"
                        )));
                    }
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(SsrError::Validation(
                        "curve knots must be strictly increasing in t".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Last time at which the curve is defined.
    pub fn horizon(&self) -> f64 {
        match self {
            ForwardVarianceCurve::Flat { .. } => f64::INFINITY,
            ForwardVarianceCurve::PiecewiseLinear { knots } => knots[knots.len() - 1].0,
        }
    }

    /// Times where the curve has kinks (knots), including the ends of `[lo, hi]`.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = vec![lo];
        if let ForwardVarianceCurve::PiecewiseLinear { knots } = self {
            out.extend(knots.iter().map(|k| k.0).filter(|&t| t > lo && t < hi));
        }
        out.push(hi);
        out
    }

    fn check_domain(&self, t: f64) -> Result<f64> {
        let hi = self.horizon();
        if t < 0.0 || t > hi * (1.0 + EDGE_SLACK) || t.is_nan() {
            return Err(SsrError::Extrapolation { t, lo: 0.0, hi });
        }
        Ok(t.min(hi))
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let t = self.check_domain(t)?;
        Ok(match self {
            ForwardVarianceCurve::Flat { v0 } => *v0,
            ForwardVarianceCurve::PiecewiseLinear { knots } => {
                let i = segment_index(knots, t);
                let (t0, v0) = knots[i];
                let (t1, v1) = knots[i + 1];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        })
    }

    /// `∫_a^b V₀(t) dt`, exact for both variants.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if b < a {
            return Err(SsrError::Domain(format!("integral bounds reversed: [{a}, {b}]")));
        }
        let a = self.check_domain(a)?;
        let b = self.check_domain(b)?;
        Ok(match self {
            ForwardVarianceCurve::Flat { v0 } => v0 * (b - a),
            ForwardVarianceCurve::PiecewiseLinear { .. } => {
                let pts = self.breakpoints(a, b);
                pts.windows(2)
                    .map(|w| {
                        let va = self.eval(w[0]).expect("inside domain");
                        let vb = self.eval(w[1]).expect("inside domain");
                        0.5 * (va + vb) * (w[1] - w[0])
                    })
                    .sum()
            }
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            ForwardVarianceCurve::Flat { v0 } => ForwardVarianceCurve::Flat { v0: v0 * c },
            ForwardVarianceCurve::PiecewiseLinear { knots } => ForwardVarianceCurve::PiecewiseLinear {
                knots: knots.iter().map(|&(t, v)| (t, v * c)).collect(),
            },
        }
    }
}

fn segment_index(knots: &[(f64, f64)], t: f64) -> usize {
    let n = knots.len();
    match knots.binary_search_by(|k| k.0.total_cmp(&t)) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.saturating_sub(1).min(n - 2),
    }
}
