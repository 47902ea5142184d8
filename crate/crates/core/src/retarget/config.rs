use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CertificateParams, GridMode};
use crate::qpsolve::QpSettings;
use crate::safety::DEFAULT_GAMMA;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub k: usize,
    pub mode: GridMode,
    /// Seed for `uniform_random` draws.
    pub seed: u64,
    /// Explicit α values; overrides `k` and `mode` when non-empty.
    pub values: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            k: 64,
            mode: GridMode::DeterministicGrid,
            seed: 0,
            values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub name: String,
    /// Joint names; joints may appear in several segments.
    pub joints: Vec<String>,
}

/// Controller configuration, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub grid: GridConfig,
    pub certificate: CertificateParams,
    /// Barrier decay rate in `∇hᵀΔq ≥ −γh`.
    pub gamma: f64,
    /// Include the model's barrier pairs as QP rows.
    pub cbf: bool,
    /// Joint increment regularisation `W_q = w_q I`.
    pub w_q: f64,
    /// Control period in seconds; the increment box is `±velocity_limit·dt`.
    pub dt: f64,
    /// Apply the best feasible decreasing candidate when nothing certifies.
    pub fallback: bool,
    /// With the certificate disabled, still reject candidates whose
    /// constraint violation exceeds `certificate.feas_tol`. When false the
    /// solver output is applied as returned.
    pub require_feasible: bool,
    /// Empty means one segment over all joints.
    pub segments: Vec<SegmentConfig>,
    pub solver: QpSettings,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            certificate: CertificateParams::default(),
            gamma: DEFAULT_GAMMA,
            cbf: true,
            w_q: 1e-2,
            dt: 0.01,
            fallback: true,
            require_feasible: true,
            segments: Vec::new(),
            solver: QpSettings::batch(),
        }
    }
}

impl ControllerConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.certificate;
        if self.grid.values.is_empty() && self.grid.k == 0 {
            return Err(Error::Config("grid.k must be at least 1".into()));
        }
        if self.grid.values.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Config("grid.values must lie in [0, 1]".into()));
        }
        if !(c.eta > 0.0) || !(c.eps_q >= 0.0) || !(c.eps_v >= 0.0) || !(c.feas_tol >= 0.0) {
            return Err(Error::Config(
                "certificate needs eta > 0 and non-negative eps_q, eps_v, feas_tol".into(),
            ));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if !(self.w_q > 0.0) || !self.w_q.is_finite() {
            return Err(Error::Config("w_q must be positive".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config("dt must be positive".into()));
        }
        for s in &self.segments {
            if s.joints.is_empty() {
                return Err(Error::Config(format!("segment {} has no joints", s.name)));
            }
        }
        self.solver.validate()
    }

    /// Same settings with a deterministic grid of `k` candidates.
    pub fn with_k(mut self, k: usize) -> Self {
        self.grid.k = k;
        self.grid.mode = GridMode::DeterministicGrid;
        self.grid.values.clear();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let text = r#"
            dt = 0.02
            gamma = 0.4
            [grid]
            k = 16
            mode = "uniform_random"
            seed = 3
            [certificate]
            eta = 0.005
            [[segments]]
            name = "left"
            joints = ["a", "b"]
            [solver]
            max_iter = 80
        "#;
        let cfg = ControllerConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.grid.k, 16);
        assert_eq!(cfg.grid.mode, GridMode::UniformRandom);
        assert_eq!(cfg.certificate.eta, 0.005);
        assert_eq!(cfg.certificate.eps_q, 1e-4);
        assert_eq!(cfg.solver.max_iter, 80);
        assert_eq!(cfg.solver.rho, QpSettings::batch().rho);
        let back = ControllerConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ControllerConfig::from_toml_str("dt = -1.0").is_err());
        assert!(ControllerConfig::from_toml_str("[certificate]\neta = 0.0").is_err());
        assert!(ControllerConfig::from_toml_str("[grid]\nk = 0").is_err());
        assert!(ControllerConfig::from_toml_str("unknown = 1").is_err());
        assert!(ControllerConfig::from_toml_str("[solver]\nrelaxation = 2.5").is_err());
    }
}
