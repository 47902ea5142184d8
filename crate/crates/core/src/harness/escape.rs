use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeMcConfig {
    /// Measure of the escaping α-set.
    pub p: f64,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeRow {
    pub k: usize,
    pub empirical: f64,
    pub predicted: f64,
    /// Three standard errors of the Bernoulli estimate.
    pub tolerance: f64,
}

pub fn predicted_escape(p: f64, k: usize) -> f64 {
    1.0 - (1.0 - p).powi(k as i32)
}

/// Monte Carlo of the escape law. Each trial draws `K` values of α from
/// `Unif[0, 1]`; the trial escapes when one lands in the escaping set,
/// modelled as `[0, p)`.
pub fn escape_mc(config: &EscapeMcConfig) -> Result<Vec<EscapeRow>> {
    if !(config.p > 0.0 && config.p < 1.0) {
        return Err(Error::Config("p must lie in (0, 1)".into()));
    }
    if config.trials == 0 || config.k_values.contains(&0) {
        return Err(Error::Config("trials and K values must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(config
        .k_values
        .iter()
        .map(|&k| {
            let hits = (0..config.trials)
                .filter(|_| (0..k).any(|_| rng.random::<f64>() < config.p))
                .count();
            let predicted = predicted_escape(config.p, k);
            let n = config.trials as f64;
            EscapeRow {
                k,
                empirical: hits as f64 / n,
                predicted,
                tolerance: 3.0 * (predicted * (1.0 - predicted) / n).sqrt(),
            }
        })
        .collect())
}
