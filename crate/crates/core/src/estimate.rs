//! Deterministic parallel Monte-Carlo.
//!
//! A budget of `samples` draws is split into `workers` chunks. Chunk `w` owns
//! the ChaCha stream `w` of a generator keyed by `(seed, tag)`, and partial
//! statistics are merged in chunk order. Results therefore depend only on
//! `(seed, workers, samples)`, not on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Seed and worker count shared by every estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: u64,
    pub workers: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { seed: 0, workers: 4 }
    }
}

impl McConfig {
    pub fn new(seed: u64, workers: usize) -> Self {
        McConfig { seed, workers: workers.max(1) }
    }

    /// Independent stream for `(tag, worker)`.
    pub fn stream(&self, tag: u64, worker: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(self.seed ^ splitmix(tag)));
        rng.set_stream(worker);
        rng
    }

    /// Splits `0..total` into `workers` contiguous ranges and runs
    /// `body(rng, range)` on each in parallel; results come back in range order.
    pub fn map_ranges<S, F>(&self, tag: u64, total: u64, body: F) -> Vec<S>
    where
        S: Send,
        F: Fn(&mut ChaCha8Rng, std::ops::Range<u64>) -> S + Sync,
    {
        let w = self.workers.max(1) as u64;
        let (base, rem) = (total / w, total % w);
        (0..w)
            .into_par_iter()
            .map(|i| {
                let start = i * base + i.min(rem);
                let len = base + u64::from(i < rem);
                let mut rng = self.stream(tag, i);
                body(&mut rng, start..start + len)
            })
            .collect()
    }

    /// Runs `body(rng, count)` on each chunk in parallel and returns the
    /// per-chunk results in chunk order.
    pub fn map_chunks<S, F>(&self, tag: u64, samples: u64, body: F) -> Vec<S>
    where
        S: Send,
        F: Fn(&mut ChaCha8Rng, u64) -> S + Sync,
    {
        self.map_ranges(tag, samples, |rng, r| body(rng, r.end - r.start))
    }

    /// Mean of `f(rng)` over `samples` draws.
    pub fn estimate<F>(&self, tag: u64, samples: u64, f: F) -> Estimate
    where
        F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
    {
        self.map_chunks(tag, samples, |rng, count| {
            let mut acc = Accumulator::default();
            for _ in 0..count {
                acc.push(f(rng));
            }
            acc
        })
        .into_iter()
        .fold(Accumulator::default(), |a, b| a.merged(&b))
        .estimate()
    }

    /// Means of `k` statistics computed from the same draws (common random numbers).
    pub fn estimate_many<F>(&self, tag: u64, samples: u64, k: usize, f: F) -> Vec<Estimate>
    where
        F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
    {
        self.accumulate_many(tag, samples, k, f).iter().map(Accumulator::estimate).collect()
    }

    /// Like [`estimate_many`](Self::estimate_many) but returns mergeable accumulators.
    pub fn accumulate_many<F>(&self, tag: u64, samples: u64, k: usize, f: F) -> Vec<Accumulator>
    where
        F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
    {
        self.map_chunks(tag, samples, |rng, count| {
            let mut accs = vec![Accumulator::default(); k];
            let mut buf = vec![0.0; k];
            for _ in 0..count {
                f(rng, &mut buf);
                for (a, &v) in accs.iter_mut().zip(&buf) {
                    a.push(v);
                }
            }
            accs
        })
        .into_iter()
        .fold(vec![Accumulator::default(); k], |acc, part| merge_all(&acc, &part))
    }
}

/// Pairwise merge of two accumulator vectors of equal length.
pub fn merge_all(a: &[Accumulator], b: &[Accumulator]) -> Vec<Accumulator> {
    a.iter().zip(b).map(|(x, y)| x.merged(y)).collect()
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { mean: value, se: 0.0, samples: 0 }
    }

    /// `|mean - target| ≤ k · se`, with equality allowed when `se = 0`.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + 1e-12 * target.abs().max(1.0)
    }
}

/// Welford running mean and variance; merging uses the parallel update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merged(&self, other: &Accumulator) -> Accumulator {
        if other.n == 0 {
            return *self;
        }
        if self.n == 0 {
            return *other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Accumulator { n, mean, m2 }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn estimate(&self) -> Estimate {
        let se = if self.n < 2 { 0.0 } else { (self.variance() / self.n as f64).sqrt() };
        Estimate { mean: self.mean, se, samples: self.n }
    }
}
