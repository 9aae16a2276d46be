use std::ops::Range;

use crate::error::{Result, SsrError};

/// Units per work chunk. Fixed so that chunk boundaries, and with them the
/// floating-point summation order, never depend on the worker count.
pub const CHUNK_UNITS: usize = 256;

/// Runs chunked work on a private thread pool and returns results in chunk order.
#[derive(Debug)]
pub struct Executor {
    pool: rayon::ThreadPool,
}

impl Executor {
    /// `workers == 0` means one worker per available core.
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| SsrError::Validation(format!("cannot start worker pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Applies `f` to consecutive ranges of at most [`CHUNK_UNITS`] units covering `0..n_units`.
    pub fn map_chunks<T, F>(&self, n_units: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync,
    {
        use rayon::prelude::*;
        let n_chunks = n_units.div_ceil(CHUNK_UNITS);
        self.pool.install(|| {
            (0..n_chunks)
                .into_par_iter()
                .map(|c| f(c * CHUNK_UNITS..((c + 1) * CHUNK_UNITS).min(n_units)))
                .collect()
        })
    }

    /// Applies `f` to every index in `0..n`, results in index order.
    pub fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        use rayon::prelude::*;
        self.pool.install(|| (0..n).into_par_iter().map(&f).collect())
    }

    /// `map_chunks` followed by [`tree_reduce`].
    pub fn map_reduce<T, F, G>(&self, n_units: usize, f: F, merge: G) -> Option<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync,
        G: Fn(T, T) -> T,
    {
        tree_reduce(self.map_chunks(n_units, f), merge)
    }
}

/// Pairwise reduction with a shape fixed by the number of items.
pub fn tree_reduce<T, G: Fn(T, T) -> T>(mut items: Vec<T>, merge: G) -> Option<T> {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

/// Running mean and co-moment matrix of a fixed-length observation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    count: u64,
    mean: Vec<f64>,
    // row-major `dim × dim` sum of centred cross products
    comoment: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        let d = self.dim();
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl / n;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            for j in 0..d {
                self.comoment[i * d + j] += delta[j] * after;
            }
        }
    }

    /// Combines two disjoint samples.
    pub fn merge(self, other: Self) -> Self {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let d = self.dim();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let mean = self
            .mean
            .iter()
            .zip(&delta)
            .map(|(a, dl)| a + dl * nb / n)
            .collect();
        let mut comoment = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                comoment[k] = self.comoment[k] + other.comoment[k] + delta[i] * delta[j] * na * nb / n;
            }
        }
        Self {
            count: self.count + other.count,
            mean,
            comoment,
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample covariance of components `i` and `j`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.comoment[i * self.dim() + j] / (self.count - 1) as f64
    }

    /// Covariance matrix of the sample mean.
    pub fn mean_covariance(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let n = self.count as f64;
        (0..d)
            .map(|i| (0..d).map(|j| self.covariance(i, j) / n).collect())
            .collect()
    }

    /// Standard error of the mean of component `i`.
    pub fn std_error(&self, i: usize) -> f64 {
        (self.covariance(i, i) / self.count as f64).sqrt()
    }
}
