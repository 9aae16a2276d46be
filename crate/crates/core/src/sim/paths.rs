use super::covariance::standard_layout;
use super::{JointCovariance, RngStreamSpec, TimeGrid};
use crate::error::Result;
use crate::model::{EffectiveKernel, ForwardVarianceCurve, Kernel, ModelConfig};

/// One simulated path on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    /// `ΔB_j`, `j = 0..n`.
    pub brownian_increments: Vec<f64>,
    /// Volterra factor `X(t_m) = Σᵢ ∫_0^{t_m} kᵢ(t_m − u) dWⁱ_u` at `t_1..t_n`.
    pub volterra: Vec<f64>,
    /// Spot variance at the left cell edges `t_0..t_{n−1}`.
    pub variance: Vec<f64>,
    /// `log S` at `t_0..t_n`.
    pub log_spot: Vec<f64>,
    /// `I_T = ∫_0^T √V_s k(s) (dB_s − √V_s ds)`.
    pub integral: f64,
}

impl PathBundle {
    pub fn terminal_spot(&self) -> f64 {
        self.log_spot[self.log_spot.len() - 1].exp()
    }
}

/// What the estimators need from a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTerminal {
    pub log_spot: f64,
    pub integral: f64,
}

/// Correlated Gaussian inputs of one path: `(ΔB_j)` and `(X(t_m))`.
#[derive(Debug, Clone, Default)]
pub struct GaussianDraw {
    pub brownian: Vec<f64>,
    pub volterra: Vec<f64>,
    normals: Vec<f64>,
    mapped: Vec<f64>,
}

impl GaussianDraw {
    pub fn with_steps(n: usize) -> Self {
        Self {
            brownian: vec![0.0; n],
            volterra: vec![0.0; n],
            normals: vec![0.0; 2 * n],
            mapped: vec![0.0; 2 * n],
        }
    }
}

/// Per-(curve, spot, ε) data reused across paths.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spot0: f64,
    pub epsilon: f64,
    forward: Vec<f64>,
    compensator: Vec<f64>,
}

impl Scenario {
    /// `V₀(t_0)`, the initial spot variance.
    pub fn initial_variance(&self) -> f64 {
        self.forward[0]
    }

    /// Initial forward variances at the left cell edges.
    pub fn forward_variances(&self) -> &[f64] {
        &self.forward
    }
}

/// Samples paths of one (kernel, grid) pair. The covariance factorization is
/// independent of the curve, the spot and ε, so one generator serves any
/// number of [`Scenario`]s.
#[derive(Debug, Clone)]
pub struct PathGenerator {
    grid: TimeGrid,
    covariance: JointCovariance,
    volterra_variance: Vec<f64>,
    cell_weights: Vec<f64>,
}

impl PathGenerator {
    pub fn new(config: &ModelConfig, grid: TimeGrid) -> Result<Self> {
        Self::from_kernel(&config.effective_kernel()?, grid)
    }

    pub fn from_kernel(kernel: &EffectiveKernel, grid: TimeGrid) -> Result<Self> {
        let covariance = JointCovariance::build(kernel, &grid, standard_layout(&grid))?;
        let n = grid.n_steps();
        let volterra_variance = (0..n).map(|m| covariance.matrix()[(n + m, n + m)]).collect();
        Ok(Self {
            grid,
            covariance,
            volterra_variance,
            cell_weights: kernel_cell_weights(kernel, &grid),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn covariance(&self) -> &JointCovariance {
        &self.covariance
    }

    /// `Var X(t_m)` for `m = 1..n`.
    pub fn volterra_variance(&self) -> &[f64] {
        &self.volterra_variance
    }

    pub fn cell_weights(&self) -> &[f64] {
        &self.cell_weights
    }

    pub fn scenario(&self, config: &ModelConfig) -> Result<Scenario> {
        self.scenario_for(config.spot0, &config.curve, config.epsilon)
    }

    pub fn scenario_for(
        &self,
        spot0: f64,
        curve: &ForwardVarianceCurve,
        epsilon: f64,
    ) -> Result<Scenario> {
        let n = self.grid.n_steps();
        let forward = (0..n)
            .map(|j| curve.eval(self.grid.time(j)))
            .collect::<Result<Vec<_>>>()?;
        // compensator[j] = ε²/2 · Var X(t_j), zero at t_0
        let compensator = std::iter::once(0.0)
            .chain(
                self.volterra_variance[..n - 1]
                    .iter()
                    .map(|v| 0.5 * epsilon * epsilon * v),
            )
            .collect();
        Ok(Scenario {
            spot0,
            epsilon,
            forward,
            compensator,
        })
    }

    /// Fills `draw` from the stream `stream`.
    pub fn draw(&self, stream: RngStreamSpec, draw: &mut GaussianDraw) {
        let n = self.grid.n_steps();
        if draw.normals.len() != 2 * n {
            *draw = GaussianDraw::with_steps(n);
        }
        let mut rng = stream.rng();
        self.covariance
            .sample_into(&mut rng, &mut draw.normals, &mut draw.mapped);
        draw.brownian.copy_from_slice(&draw.mapped[..n]);
        draw.volterra.copy_from_slice(&draw.mapped[n..]);
    }

    /// Terminal log-spot and `I_T` for `sign · draw` (sign = −1 is the
    /// antithetic partner).
    pub fn terminal(&self, sc: &Scenario, draw: &GaussianDraw, sign: f64) -> PathTerminal {
        let dt = self.grid.dt();
        let eps = sc.epsilon * sign;
        let mut log_spot = sc.spot0.ln();
        let mut integral = 0.0;
        for j in 0..self.grid.n_steps() {
            let v = if j == 0 {
                sc.forward[0]
            } else {
                sc.forward[j] * (eps * draw.volterra[j - 1] - sc.compensator[j]).exp()
            };
            let sv = v.sqrt();
            let db = sign * draw.brownian[j];
            log_spot += sv * db - 0.5 * v * dt;
            integral += sv * self.cell_weights[j] * (db - sv * dt);
        }
        PathTerminal { log_spot, integral }
    }

    /// Full path for `sign · draw`; same arithmetic as [`Self::terminal`].
    pub fn path(&self, sc: &Scenario, draw: &GaussianDraw, sign: f64) -> PathBundle {
        let n = self.grid.n_steps();
        let dt = self.grid.dt();
        let eps = sc.epsilon * sign;
        let brownian_increments: Vec<f64> = draw.brownian.iter().map(|x| sign * x).collect();
        let volterra: Vec<f64> = draw.volterra.iter().map(|x| sign * x).collect();
        let mut variance = Vec::with_capacity(n);
        let mut log_spot = Vec::with_capacity(n + 1);
        let mut ls = sc.spot0.ln();
        log_spot.push(ls);
        let mut integral = 0.0;
        for j in 0..n {
            let v = if j == 0 {
                sc.forward[0]
            } else {
                sc.forward[j] * (eps * draw.volterra[j - 1] - sc.compensator[j]).exp()
            };
            variance.push(v);
            let sv = v.sqrt();
            let db = sign * draw.brownian[j];
            ls += sv * db - 0.5 * v * dt;
            log_spot.push(ls);
            integral += sv * self.cell_weights[j] * (db - sv * dt);
        }
        PathBundle {
            brownian_increments,
            volterra,
            variance,
            log_spot,
            integral,
        }
    }

    /// Sequential stream of paths. With `antithetic`, paths `2i` and `2i + 1`
    /// share stream `i` with opposite signs; `n_paths` is then rounded up to
    /// an even count.
    pub fn paths<'a>(
        &'a self,
        sc: &'a Scenario,
        n_paths: usize,
        seed: u64,
        antithetic: bool,
    ) -> impl Iterator<Item = PathBundle> + 'a {
        let per_stream = if antithetic { 2 } else { 1 };
        let n_streams = n_paths.div_ceil(per_stream);
        let mut draw = GaussianDraw::with_steps(self.grid.n_steps());
        (0..n_streams).flat_map(move |i| {
            self.draw(RngStreamSpec::new(seed, i as u64), &mut draw);
            let first = self.path(sc, &draw, 1.0);
            let second = antithetic.then(|| self.path(sc, &draw, -1.0));
            std::iter::once(first).chain(second)
        })
    }
}

/// Cell averages `w_j = (1/Δ) ∫_{t_j}^{t_{j+1}} k(u) du` of the aggregate kernel.
pub fn kernel_cell_weights(kernel: &EffectiveKernel, grid: &TimeGrid) -> Vec<f64> {
    (0..grid.n_steps())
        .map(|j| {
            let (lo, hi) = (grid.time(j), grid.time(j + 1));
            kernel.integral(lo, hi) / (hi - lo)
        })
        .collect()
}

/// Builds a generator for `config` and streams `n_paths` paths from `seed`.
pub fn generate_paths(
    config: &ModelConfig,
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
    antithetic: bool,
) -> Result<impl Iterator<Item = PathBundle>> {
    let generator = PathGenerator::new(config, grid)?;
    let sc = generator.scenario(config)?;
    let per_stream = if antithetic { 2 } else { 1 };
    let n_streams = n_paths.div_ceil(per_stream);
    let mut draw = GaussianDraw::with_steps(grid.n_steps());
    Ok((0..n_streams).flat_map(move |i| {
        generator.draw(RngStreamSpec::new(seed, i as u64), &mut draw);
        let first = generator.path(&sc, &draw, 1.0);
        let second = antithetic.then(|| generator.path(&sc, &draw, -1.0));
        std::iter::once(first).chain(second)
    }))
}
