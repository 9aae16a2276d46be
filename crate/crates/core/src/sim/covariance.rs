use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::TimeGrid;
use crate::error::{Result, SsrError};
use crate::model::{EffectiveKernel, Kernel, ModelConfig};

const RIDGE_SCALE: f64 = 1e-12;
const RIDGE_RETRIES: usize = 3;

/// A coordinate of the joint Gaussian vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaussianVariable {
    /// Spot Brownian increment `ΔB_j` over grid cell `j`.
    BrownianCell(usize),
    /// `Σᵢ ∫_0^horizon kᵢ(at − u) dWⁱ_u`, with `at ≥ horizon`. For
    /// `at == horizon` this is the Volterra factor driving `V_at`.
    Volterra { at: f64, horizon: f64 },
}

/// Covariance matrix of a set of [`GaussianVariable`]s with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct JointCovariance {
    variables: Vec<GaussianVariable>,
    matrix: DMatrix<f64>,
    factor: LowerFactor,
    ridge: f64,
}

impl JointCovariance {
    pub fn build(
        kernel: &EffectiveKernel,
        grid: &TimeGrid,
        variables: Vec<GaussianVariable>,
    ) -> Result<Self> {
        let matrix = assemble(kernel, grid, &variables);
        let (factor, ridge) = cholesky_with_ridge(&matrix)?;
        Ok(Self {
            variables,
            matrix,
            factor: LowerFactor::from_dense(&factor),
            ridge,
        })
    }

    pub fn variables(&self) -> &[GaussianVariable] {
        &self.variables
    }

    /// Analytic covariance before any ridge.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn factor(&self) -> &LowerFactor {
        &self.factor
    }

    /// Diagonal shift that was needed for the factorization (0 when none).
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Draws `dim` standard normals into `normals` and writes `L · normals` to `out`.
    pub fn sample_into<R: Rng>(&self, rng: &mut R, normals: &mut [f64], out: &mut [f64]) {
        for z in normals.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        self.factor.mul_vec(normals, out);
    }
}

/// Covariance of `(ΔB_0..ΔB_{n−1}, X(t_1)..X(t_n))` for the config's kernels.
pub fn build_joint_covariance(config: &ModelConfig, grid: &TimeGrid) -> Result<JointCovariance> {
    let kernel = config.effective_kernel()?;
    JointCovariance::build(&kernel, grid, standard_layout(grid))
}

pub(crate) fn standard_layout(grid: &TimeGrid) -> Vec<GaussianVariable> {
    let n = grid.n_steps();
    (0..n)
        .map(GaussianVariable::BrownianCell)
        .chain((1..=n).map(|m| {
            let t = grid.time(m);
            GaussianVariable::Volterra { at: t, horizon: t }
        }))
        .collect()
}

fn covariance(
    kernel: &EffectiveKernel,
    grid: &TimeGrid,
    a: GaussianVariable,
    b: GaussianVariable,
) -> f64 {
    use GaussianVariable::*;
    match (a, b) {
        (BrownianCell(i), BrownianCell(j)) => {
            if i == j {
                grid.time(i + 1) - grid.time(i)
            } else {
                0.0
            }
        }
        (BrownianCell(j), Volterra { at, horizon }) | (Volterra { at, horizon }, BrownianCell(j)) => {
            let lo = grid.time(j);
            let hi = grid.time(j + 1).min(horizon);
            if hi <= lo {
                0.0
            } else {
                // ∫_cell k(at − u) du with the aggregate kernel
                kernel.integral((at - hi).max(0.0), at - lo)
            }
        }
        (
            Volterra {
                at: s1,
                horizon: h1,
            },
            Volterra {
                at: s2,
                horizon: h2,
            },
        ) => {
            let m = h1.min(h2);
            // the factors Wⁱ are independent: no cross-component terms
            kernel
                .components()
                .iter()
                .map(|(_, k)| k.product_integral(s1 - m, s2 - m, m))
                .sum()
        }
    }
}

fn assemble(kernel: &EffectiveKernel, grid: &TimeGrid, vars: &[GaussianVariable]) -> DMatrix<f64> {
    let d = vars.len();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let c = covariance(kernel, grid, vars[i], vars[j]);
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    m
}

fn cholesky_with_ridge(matrix: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(ch) = matrix.clone().cholesky() {
        return Ok((ch.l(), 0.0));
    }
    let d = matrix.nrows();
    let mut ridge = RIDGE_SCALE * matrix.trace() / d as f64;
    for _ in 0..RIDGE_RETRIES {
        let mut shifted = matrix.clone();
        for i in 0..d {
            shifted[(i, i)] += ridge;
        }
        if let Some(ch) = shifted.cholesky() {
            return Ok((ch.l(), ridge));
        }
        ridge *= 10.0;
    }
    Err(SsrError::NumericalDegeneracy(format!(
        "Cholesky factorization of the {d}x{d} covariance failed after ridge {}",
        ridge / 10.0
    )))
}

#[derive(Debug, Clone, Copy)]
struct Run {
    col: usize,
    len: usize,
    offset: usize,
}

/// Lower-triangular factor stored as runs of nonzeros per row. The Brownian
/// block of the standard layout is diagonal and the cross block is
/// lower-triangular, so about half of the dense entries are skipped.
#[derive(Debug, Clone)]
pub struct LowerFactor {
    dim: usize,
    row_runs: Vec<(usize, usize)>,
    runs: Vec<Run>,
    data: Vec<f64>,
}

impl LowerFactor {
    // zero gaps shorter than this are stored rather than split
    const MIN_GAP: usize = 8;

    pub fn from_dense(l: &DMatrix<f64>) -> Self {
        let dim = l.nrows();
        let mut row_runs = Vec::with_capacity(dim);
        let mut runs = Vec::new();
        let mut data = Vec::new();
        for i in 0..dim {
            let first_run = runs.len();
            let mut j = 0;
            while j <= i {
                if l[(i, j)] == 0.0 {
                    j += 1;
                    continue;
                }
                let start = j;
                let mut end = j + 1; // exclusive end of the last nonzero
                let mut k = j + 1;
                while k <= i {
                    if l[(i, k)] != 0.0 {
                        end = k + 1;
                    } else if k - end + 1 >= Self::MIN_GAP {
                        break;
                    }
                    k += 1;
                }
                let offset = data.len();
                data.extend((start..end).map(|c| l[(i, c)]));
                runs.push(Run {
                    col: start,
                    len: end - start,
                    offset,
                });
                j = end;
            }
            row_runs.push((first_run, runs.len()));
        }
        Self {
            dim,
            row_runs,
            runs,
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored entries.
    pub fn stored(&self) -> usize {
        self.data.len()
    }

    /// `out = L · z`.
    pub fn mul_vec(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for (o, &(r0, r1)) in out.iter_mut().zip(&self.row_runs) {
            let mut acc = 0.0;
            for run in &self.runs[r0..r1] {
                acc += dot(
                    &self.data[run.offset..run.offset + run.len],
                    &z[run.col..run.col + run.len],
                );
            }
            *o = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, &(r0, r1)) in self.row_runs.iter().enumerate() {
            for run in &self.runs[r0..r1] {
                for c in 0..run.len {
                    m[(i, run.col + c)] = self.data[run.offset + c];
                }
            }
        }
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ForwardVarianceCurve, KernelSpec};
    use crate::quadrature::{integrate, Tolerance};

    fn single(rho: f64, k: KernelSpec) -> EffectiveKernel {
        EffectiveKernel::new(vec![(rho, k)]).unwrap()
    }

    #[test]
    fn exponential_volterra_covariance_closed_form() {
        let (a, b) = (1.0, 1.0);
        let kernel = single(0.6, KernelSpec::Exponential { a, b });
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let cov = JointCovariance::build(&kernel, &grid, standard_layout(&grid)).unwrap();
        let n = 8;
        for m in 1..=n {
            for l in 1..=n {
                let (tm, tl) = (grid.time(m), grid.time(l));
                let mn = tm.min(tl);
                let closed = a * a * (-b * (tm + tl)).exp() * ((2.0 * b * mn).exp() - 1.0) / (2.0 * b);
                let quad = integrate(
                    |u| a * (-b * (tm - u)).exp() * a * (-b * (tl - u)).exp(),
                    0.0,
                    mn,
                    Tolerance::relative(1e-14),
                )
                .value;
                let got = cov.matrix()[(n + m - 1, n + l - 1)];
                assert!((got - closed).abs() < 1e-10, "m={m} l={l}");
                assert!((closed - quad).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn power_volterra_variance_closed_form() {
        let kernel = single(0.6, KernelSpec::Power { a: 0.7, hurst: 0.1 });
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let cov = JointCovariance::build(&kernel, &grid, standard_layout(&grid)).unwrap();
        for m in 1..=16 {
            let t = grid.time(m);
            let expected = 0.49 * t.powf(0.2) / 0.2;
            let got = cov.matrix()[(15 + m, 15 + m)];
            assert!((got - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn brownian_block_and_cross_block_structure() {
        let kernel = single(0.6, KernelSpec::Power { a: 1.0, hurst: 0.1 });
        let grid = TimeGrid::new(0.5, 10).unwrap();
        let cov = JointCovariance::build(&kernel, &grid, standard_layout(&grid)).unwrap();
        let m = cov.matrix();
        let dt = grid.dt();
        for i in 0..10 {
            for j in 0..10 {
                let expected = if i == j { dt } else { 0.0 };
                assert!((m[(i, j)] - expected).abs() < 1e-16);
            }
        }
        // X(t_m) only sees cells before t_m; k(t_m − u) integrated over the cell
        for mm in 1..=10 {
            let t = grid.time(mm);
            for j in 0..10 {
                let c = m[(10 + mm - 1, j)];
                if j >= mm {
                    assert_eq!(c, 0.0);
                } else {
                    let (lo, hi) = (grid.time(j), grid.time(j + 1));
                    let p: f64 = 0.6;
                    let expected = 0.6 * ((t - lo).powf(p) - (t - hi).powf(p)) / p;
                    assert!((c - expected).abs() < 1e-14, "m={mm} j={j}");
                }
            }
        }
    }

    #[test]
    fn cancelling_kernels_have_zero_cross_block() {
        let kernel = EffectiveKernel::new(vec![
            (0.5, KernelSpec::Exponential { a: 1.0, b: 1.0 }),
            (-0.5, KernelSpec::Exponential { a: 1.0, b: 1.0 }),
        ])
        .unwrap();
        let grid = TimeGrid::new(1.0, 6).unwrap();
        let cov = JointCovariance::build(&kernel, &grid, standard_layout(&grid)).unwrap();
        for i in 6..12 {
            for j in 0..6 {
                assert_eq!(cov.matrix()[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn matrix_is_symmetric_and_psd() {
        let cfg = ModelConfig::new(
            1.0,
            1.0,
            ForwardVarianceCurve::flat(0.04).unwrap(),
            vec![crate::model::Factor {
                rho: 0.6,
                kernel: KernelSpec::Power { a: 1.0, hurst: 0.1 },
            }],
            1.0,
        )
        .unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let cov = build_joint_covariance(&cfg, &grid).unwrap();
        let m = cov.matrix();
        assert_eq!((m - m.transpose()).amax(), 0.0);
        let min_eig = m.clone().symmetric_eigenvalues().min();
        assert!(min_eig >= -1e-10, "{min_eig}");
        // the factor reproduces the (possibly ridged) matrix
        let l = cov.factor().to_dense();
        let rebuilt = &l * l.transpose();
        assert!((rebuilt - m).amax() < 1e-10 + cov.ridge());
        assert!(cov.factor().stored() < 3 * 128 * 128 / 4);
    }

    #[test]
    fn sparse_matvec_matches_dense() {
        let kernel = single(0.6, KernelSpec::Exponential { a: 1.0, b: 2.0 });
        let grid = TimeGrid::new(1.0, 12).unwrap();
        let cov = JointCovariance::build(&kernel, &grid, standard_layout(&grid)).unwrap();
        let z: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut out = vec![0.0; 24];
        cov.factor().mul_vec(&z, &mut out);
        let dense = cov.factor().to_dense() * nalgebra::DVector::from_vec(z);
        for i in 0..24 {
            assert!((out[i] - dense[i]).abs() < 1e-14);
        }
    }
}
