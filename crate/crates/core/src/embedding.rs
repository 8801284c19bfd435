//! Metric-regression state embeddings: fit `z_s` so that `|z_i - z_j|_2`
//! matches a fixed target metric.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bisim::MetricMatrix;
use crate::error::{Error, Result};

/// Above this many states, each descent step uses a sampled set of pairs.
pub const ALL_PAIRS_LIMIT: usize = 64;
const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    k: usize,
    /// Row-major `n x k`.
    z: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(k: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        let mut z = Vec::with_capacity(rows.len() * k);
        for (s, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Input(format!("row {s} has dimension {}, expected {k}", row.len())));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Input(format!("row {s} is not finite")));
            }
            z.extend_from_slice(row);
        }
        Ok(Self { k, z })
    }

    pub fn zeros(n: usize, k: usize) -> Self {
        Self { k, z: vec![0.0; n * k] }
    }

    /// Uniform in `[-0.1, 0.1]`.
    pub fn random(n: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            k,
            z: (0..n * k).map(|_| rng.gen_range(-INIT_SCALE..=INIT_SCALE)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn n_states(&self) -> usize {
        self.z.len() / self.k
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.z[s * self.k..(s + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.z
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// `mean over pairs of (|z_i - z_j| - target(i, j))^2`. The target is a
/// constant: no gradient flows into it.
pub fn regression_loss(z: &EmbeddingTable, target: &MetricMatrix, pairs: &[(usize, usize)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs
        .iter()
        .map(|&(i, j)| {
            let e = z.distance(i, j) - target.get(i, j);
            e * e
        })
        .sum::<f64>()
        / pairs.len() as f64
}

/// Analytic gradient of [`regression_loss`]. Coincident points contribute
/// the zero subgradient.
pub fn regression_gradient(z: &EmbeddingTable, target: &MetricMatrix, pairs: &[(usize, usize)]) -> Vec<f64> {
    let k = z.dim();
    let mut grad = vec![0.0; z.as_slice().len()];
    if pairs.is_empty() {
        return grad;
    }
    let scale = 2.0 / pairs.len() as f64;
    for &(i, j) in pairs {
        let dist = z.distance(i, j);
        if dist == 0.0 {
            continue;
        }
        let coeff = scale * (dist - target.get(i, j)) / dist;
        for c in 0..k {
            let diff = z.row(i)[c] - z.row(j)[c];
            grad[i * k + c] += coeff * diff;
            grad[j * k + c] -= coeff * diff;
        }
    }
    grad
}

#[derive(Debug, Clone)]
pub struct EmbeddingFit {
    pub table: EmbeddingTable,
    pub final_loss: f64,
    /// `(step, loss)` roughly every `steps / 20` steps, plus the end.
    pub checkpoints: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingOptions {
    pub k: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Pairs drawn per step when the state count exceeds [`ALL_PAIRS_LIMIT`].
    pub pairs_per_step: usize,
}

impl EmbeddingOptions {
    pub fn new(k: usize, steps: usize, learning_rate: f64, seed: u64) -> Self {
        Self {
            k,
            steps,
            learning_rate,
            seed,
            pairs_per_step: 1024,
        }
    }
}

/// Gradient descent on the regression loss from a seeded uniform
/// initialization.
pub fn fit_embedding(target: &MetricMatrix, opts: EmbeddingOptions) -> Result<EmbeddingFit> {
    if opts.k == 0 {
        return Err(Error::Config("embedding dimension must be at least 1".into()));
    }
    let init = EmbeddingTable::random(target.n_states(), opts.k, opts.seed);
    fit_embedding_from(init, target, opts)
}

pub fn fit_embedding_from(mut table: EmbeddingTable, target: &MetricMatrix, opts: EmbeddingOptions) -> Result<EmbeddingFit> {
    let n = target.n_states();
    if table.n_states() != n {
        return Err(Error::Input(format!("embedding has {} rows, target {n}", table.n_states())));
    }
    if !(opts.learning_rate > 0.0) {
        return Err(Error::Config(format!("learning rate must be positive, got {}", opts.learning_rate)));
    }
    let full = all_pairs(n);
    let sampled = n > ALL_PAIRS_LIMIT;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let every = (opts.steps / 20).max(1);
    let mut checkpoints = Vec::new();

    let mut batch = Vec::new();
    for step in 0..opts.steps {
        let pairs: &[(usize, usize)] = if sampled {
            batch.clear();
            let m = opts.pairs_per_step.min(full.len());
            batch.extend(sample(&mut rng, full.len(), m).into_iter().map(|k| full[k]));
            &batch
        } else {
            &full
        };
        if step % every == 0 {
            let loss = regression_loss(&table, target, &full);
            if !loss.is_finite() {
                return Err(Error::Diverged { step, loss });
            }
            checkpoints.push((step, loss));
        }
        let grad = regression_gradient(&table, target, pairs);
        for (z, g) in table.as_mut_slice().iter_mut().zip(&grad) {
            *z -= opts.learning_rate * g;
        }
    }
    let final_loss = regression_loss(&table, target, &full);
    if !final_loss.is_finite() || table.as_slice().iter().any(|z| !z.is_finite()) {
        return Err(Error::Diverged {
            step: opts.steps,
            loss: final_loss,
        });
    }
    checkpoints.push((opts.steps, final_loss));
    Ok(EmbeddingFit {
        table,
        final_loss,
        checkpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_target_zero_init_has_zero_loss() {
        let target = MetricMatrix::zeros(4);
        let fit = fit_embedding_from(EmbeddingTable::zeros(4, 3), &target, EmbeddingOptions::new(3, 10, 0.1, 0)).unwrap();
        assert_eq!(fit.checkpoints[0].1, 0.0);
        assert_eq!(fit.final_loss, 0.0);
    }

    #[test]
    fn two_states_recover_the_target_distance() {
        let target = MetricMatrix::from_pairs(2, |_, _| 2.0);
        let fit = fit_embedding(&target, EmbeddingOptions::new(1, 2000, 0.1, 7)).unwrap();
        assert_abs_diff_eq!(fit.table.distance(0, 1), 2.0, epsilon = 1e-3);
    }

    #[test]
    fn loss_does_not_increase() {
        let target = MetricMatrix::from_pairs(6, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.3 + 0.2);
        let fit = fit_embedding(&target, EmbeddingOptions::new(3, 4000, 0.05, 3)).unwrap();
        for w in fit.checkpoints.windows(2) {
            assert!(w[1].1 <= w[0].1 * 1.05 + 1e-12, "{:?}", fit.checkpoints);
        }
    }

    #[test]
    fn huge_step_diverges() {
        let target = MetricMatrix::from_pairs(5, |i, j| (i + j) as f64);
        let err = fit_embedding(&target, EmbeddingOptions::new(2, 5000, 1e6, 1));
        assert!(matches!(err, Err(Error::Diverged { .. })), "{err:?}");
    }

    #[test]
    fn large_instances_sample_pairs() {
        let n = ALL_PAIRS_LIMIT + 6;
        let target = MetricMatrix::from_pairs(n, |i, j| (j - i) as f64 / n as f64);
        let mut opts = EmbeddingOptions::new(1, 300, 0.2, 5);
        opts.pairs_per_step = 256;
        let fit = fit_embedding(&target, opts).unwrap();
        assert!(fit.final_loss < fit.checkpoints[0].1);
    }
}
