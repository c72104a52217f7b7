//! Seeded, stream-partitioned Monte Carlo over Dirichlet draws.
//!
//! Work is split into a fixed number of ChaCha streams (stream id = batch
//! index); each stream is summed sequentially and the per-stream partial sums
//! are merged in stream order, so results do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::StableSum;
use crate::Real;

pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSettings {
    /// Total proposals drawn across all streams.
    pub draws: u64,
    pub seed: u64,
    /// Number of independent RNG streams the draws are partitioned into.
    pub streams: u64,
    /// Largest acceptable standard error of the estimate, if any.
    pub max_std_error: Option<f64>,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self {
            draws: 1_000_000,
            seed: DEFAULT_SEED,
            streams: 64,
            max_std_error: None,
        }
    }
}

impl MonteCarloSettings {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn with_draws(mut self, draws: u64) -> Self {
        self.draws = draws;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub accepted: u64,
    pub proposed: u64,
}

impl MonteCarloEstimate {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposed as f64
    }
}

#[derive(Default)]
struct Partial {
    accepted: u64,
    proposed: u64,
    sum: StableSum<f64>,
    sum_sq: StableSum<f64>,
}

/// Deterministic stream generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `θ ~ Dirichlet(alphas)`; `f` returns `None` to reject a draw.
/// The estimate is the mean of `f` over accepted draws.
pub fn dirichlet_rejection<T, F>(alphas: &[T], settings: &MonteCarloSettings, f: F) -> Result<MonteCarloEstimate>
where
    T: Real,
    F: Fn(&[T]) -> Option<T> + Sync,
{
    if settings.draws == 0 || settings.streams == 0 {
        return domain("Monte Carlo needs draws >= 1 and streams >= 1");
    }
    let gammas: Vec<Gamma<f64>> = alphas
        .iter()
        .map(|&a| Gamma::new(a.as_f64(), 1.0).map_err(|e| Error::Domain(format!("Dirichlet parameter {a}: {e}"))))
        .collect::<Result<_>>()?;
    let streams = settings.streams;
    let per_stream = settings.draws.div_ceil(streams);
    let partials: Vec<Partial> = (0..streams)
        .into_par_iter()
        .map(|stream| {
            let mut rng = stream_rng(settings.seed, stream);
            let start = stream * per_stream;
            let count = per_stream.min(settings.draws.saturating_sub(start));
            let mut part = Partial::default();
            let mut g = vec![0.0f64; gammas.len()];
            let mut theta = vec![T::zero(); gammas.len()];
            for _ in 0..count {
                part.proposed += 1;
                let mut total = 0.0;
                for (slot, dist) in g.iter_mut().zip(&gammas) {
                    *slot = dist.sample(&mut rng);
                    total += *slot;
                }
                if !(total > 0.0) {
                    continue;
                }
                for (t, &v) in theta.iter_mut().zip(&g) {
                    *t = T::lit(v / total);
                }
                if let Some(v) = f(&theta) {
                    let v = v.as_f64();
                    part.accepted += 1;
                    part.sum.add(v);
                    part.sum_sq.add(v * v);
                }
            }
            part
        })
        .collect();
    let mut total = Partial::default();
    for p in &partials {
        total.accepted += p.accepted;
        total.proposed += p.proposed;
        total.sum.merge(&p.sum);
        total.sum_sq.merge(&p.sum_sq);
    }
    let n = total.accepted as f64;
    let mean = if total.accepted > 0 { total.sum.value() / n } else { f64::NAN };
    let std_error = if total.accepted > 1 {
        let var = (total.sum_sq.value() / n - mean * mean).max(0.0) * n / (n - 1.0);
        (var / n).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(MonteCarloEstimate {
        mean,
        std_error,
        accepted: total.accepted,
        proposed: total.proposed,
    })
}

pub(crate) fn check_std_error(est: &MonteCarloEstimate, settings: &MonteCarloSettings) -> Result<()> {
    if let Some(ceiling) = settings.max_std_error {
        if !(est.std_error <= ceiling) {
            return Err(Error::Statistical {
                std_error: est.std_error,
                ceiling,
            });
        }
    }
    Ok(())
}
