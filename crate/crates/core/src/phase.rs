//! Virtual reference clock, phase error and stagnation counter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Projection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    /// Phase-error threshold, in demo time-index units.
    pub epsilon: f64,
    /// Stagnation count at which the temperature saturates.
    pub c_max: u32,
    /// Demo indices the clock advances per tracking step.
    pub clock_rate: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            epsilon: 10.0,
            c_max: 50,
            clock_rate: 1.0,
        }
    }
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::invalid("phase.epsilon", "must be >= 0"));
        }
        if self.c_max < 1 {
            return Err(Error::invalid("phase.c_max", "must be >= 1"));
        }
        if !(self.clock_rate >= 0.0) || !self.clock_rate.is_finite() {
            return Err(Error::invalid("phase.clock_rate", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Which rule the last update applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseBranch {
    /// e <= epsilon: clock advances, counter resets.
    Tracking,
    /// e > epsilon: clock frozen, counter increments.
    Stagnating,
    /// Retrieval moved to another demonstration: clock re-anchored, counter kept.
    Switched,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub tau: f64,
    pub c: u32,
    pub last_error: f64,
    pub active_demo: Option<usize>,
    pub branch: Option<PhaseBranch>,
}

impl Default for PhaseState {
    fn default() -> Self {
        PhaseState {
            tau: 0.0,
            c: 0,
            last_error: 0.0,
            active_demo: None,
            branch: None,
        }
    }
}

pub fn phase_error(tau: f64, t_prime: usize) -> f64 {
    tau - t_prime as f64
}

/// Applies one step of the reference-clock rules.
pub fn update(phase: &PhaseState, proj: &Projection, cfg: &PhaseConfig) -> PhaseState {
    let t_prime = proj.time_index as f64;
    if phase.active_demo.is_some_and(|d| d != proj.demo_id) {
        return PhaseState {
            tau: t_prime,
            c: phase.c,
            last_error: 0.0,
            active_demo: Some(proj.demo_id),
            branch: Some(PhaseBranch::Switched),
        };
    }
    // Catch-up keeps the clock from lagging an agent that runs ahead.
    let tau = phase.tau.max(t_prime);
    let e = phase_error(tau, proj.time_index);
    let (tau, c, branch) = if e <= cfg.epsilon {
        (tau + cfg.clock_rate, 0, PhaseBranch::Tracking)
    } else {
        (tau, phase.c.saturating_add(1), PhaseBranch::Stagnating)
    };
    PhaseState {
        tau,
        c,
        last_error: e,
        active_demo: Some(proj.demo_id),
        branch: Some(branch),
    }
}

/// theta = min(1, c / c_max).
pub fn temperature(phase: &PhaseState, cfg: &PhaseConfig) -> f64 {
    temperature_of(phase.c, cfg.c_max)
}

pub fn temperature_of(c: u32, c_max: u32) -> f64 {
    (c as f64 / c_max.max(1) as f64).min(1.0)
}
