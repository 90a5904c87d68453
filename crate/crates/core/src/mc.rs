//! Deterministic Monte-Carlo partitioning.
//!
//! Work is split into a fixed number of chunks, each with its own derived
//! seed, and results are combined in chunk order. The outcome therefore does
//! not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::{self, Rng};

pub const CHUNKS: usize = 64;

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub budget: usize,
}

/// Runs `work(rng, count)` on each chunk, returning results in chunk order.
pub fn chunked<T, F>(budget: usize, seed: u64, label: &str, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Rng, usize) -> T + Sync,
{
    let chunks = CHUNKS.min(budget.max(1));
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = budget / chunks + usize::from(c < budget % chunks);
            let mut rng = seed::child_rng(seed, label, c as u64);
            work(&mut rng, count)
        })
        .collect()
}

/// Running sum and sum of squares.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn merge(mut self, other: Moments) -> Moments {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn estimate(&self) -> McEstimate {
        McEstimate {
            value: self.mean(),
            std_error: (self.variance() / self.count as f64).sqrt(),
            budget: self.count,
        }
    }
}

/// Mean of `draw(rng)` over `budget` samples.
pub fn mean_of<F>(budget: usize, seed: u64, label: &str, draw: F) -> McEstimate
where
    F: Fn(&mut Rng) -> f64 + Sync,
{
    chunked(budget, seed, label, |rng, count| {
        let mut m = Moments::default();
        for _ in 0..count {
            m.push(draw(rng));
        }
        m
    })
    .into_iter()
    .fold(Moments::default(), Moments::merge)
    .estimate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn chunk_counts_sum_to_budget() {
        let counts = chunked(1000, 1, "t", |_, c| c);
        assert_eq!(counts.len(), CHUNKS);
        assert_eq!(counts.iter().sum::<usize>(), 1000);
        assert_eq!(chunked(5, 1, "t", |_, c| c), vec![1; 5]);
    }

    #[test]
    fn independent_of_thread_count() {
        let run = || mean_of(10_000, 3, "u", |rng| rng.random::<f64>());
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
        assert_eq!(one, four);
        assert!((one.value - 0.5).abs() < 4.0 * one.std_error);
    }

    #[test]
    fn moments_of_known_values() {
        let mut m = Moments::default();
        for v in [1.0, 2.0, 3.0, 4.0] {
            m.push(v);
        }
        assert_eq!(m.mean(), 2.5);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-12);
    }
}
