//! Run configuration shared by the CLI subcommands.

use serde::{Deserialize, Serialize};

use crate::error::{HomeoError, Result};

/// All tunables of a build/verify run. Field defaults finish a full build
/// plus verification in well under two minutes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    /// Base length scale of the blown-up intervals (|J₀| = kappa/4).
    pub kappa: f64,
    /// Maximal dyadic level receiving an inserted interval.
    pub depth: u32,
    /// Half-width (in periods) of the modeled window.
    pub window: u32,
    /// Grid resolution for residual measurements.
    pub grid: usize,
    /// Convergence tolerance of the fixed-point iteration.
    pub tol: f64,
    /// Iteration budget for the fixed-point loop.
    pub max_iter: usize,
    /// Optional exponent override for the ping-pong pair b = β₀^N, d = β₁^N.
    pub n_override: Option<u32>,
    /// Sign sequence ε for family runs ("all", "periodic:1,-1", "flips:2,5").
    pub seq_eps: String,
    /// Sign sequence δ for family runs, same format.
    pub seq_delta: String,
    /// Output directory for JSON/CSV artifacts.
    pub out: std::path::PathBuf,
    /// RNG seed for the randomized sweeps.
    pub rng_seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            kappa: 0.125,
            depth: 6,
            window: 8,
            grid: 4096,
            tol: 1e-7,
            max_iter: 60,
            n_override: None,
            seq_eps: "all".into(),
            seq_delta: "all".into(),
            out: std::path::PathBuf::from("out"),
            rng_seed: 0,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(HomeoError::Construction("kappa must be positive".into()));
        }
        if self.depth == 0 || self.window == 0 {
            return Err(HomeoError::Construction("depth and window must be positive".into()));
        }
        if self.grid == 0 || self.max_iter == 0 {
            return Err(HomeoError::Construction("grid and max_iter must be positive".into()));
        }
        if !(self.tol >= 1e-9) {
            return Err(HomeoError::Construction("tol must be at least 1e-9".into()));
        }
        Ok(())
    }

    pub fn blowup(&self) -> crate::denjoy::BlowupConfig {
        crate::denjoy::BlowupConfig { kappa: self.kappa, depth: self.depth, window: self.window }
    }
}
