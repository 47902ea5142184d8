use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// `α_j = j / K` for `j = 1..=K`.
    #[default]
    DeterministicGrid,
    /// `K` i.i.d. draws from `Unif[0, 1]`, sorted.
    UniformRandom,
}

/// Continuation parameters, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationGrid {
    pub mode: GridMode,
    pub values: Vec<f64>,
}

impl ContinuationGrid {
    pub fn deterministic(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("continuation grid needs K >= 1".into()));
        }
        Ok(Self {
            mode: GridMode::DeterministicGrid,
            values: (1..=k).map(|j| j as f64 / k as f64).collect(),
        })
    }

    pub fn uniform_random(k: usize, rng: &mut impl Rng) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("continuation grid needs K >= 1".into()));
        }
        let mut values: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        values.sort_by(f64::total_cmp);
        Ok(Self {
            mode: GridMode::UniformRandom,
            values,
        })
    }

    /// Explicit values (sorted on construction). Used for single-shot
    /// `{1.0}` and α = 0 neutrality checks.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Config(
                "continuation values must lie in [0, 1]".into(),
            ));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self {
            mode: GridMode::DeterministicGrid,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Displacement `α_j (x_d − x)` for every grid value.
pub fn continuation_targets(
    x_now: &DVector<f64>,
    x_d: &DVector<f64>,
    grid: &ContinuationGrid,
) -> Result<Vec<DVector<f64>>> {
    if x_now.len() != x_d.len() {
        return Err(Error::DimensionMismatch {
            expected: x_now.len(),
            found: x_d.len(),
        });
    }
    let e = x_d - x_now;
    Ok(grid.values.iter().map(|&a| &e * a).collect())
}
