//! Episode orchestration, perturbation sweeps and file output.

mod episode;
mod svg;
mod sweep;
mod trace;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use episode::{
    run_episode, EpisodeOptions, EpisodeRun, EpisodeTrace, Outcome, ParticleSnapshot, PlannerRow, TraceRow,
};
pub use svg::render_svg;
pub use sweep::{export_sweep, run_sweep, SweepRow};
pub use trace::{
    export_particles, export_planner, export_trace, parse_trace, PARTICLE_HEADER, PLANNER_HEADER, TRACE_HEADER,
};

use crate::error::{Error, Result};
use crate::geometry::DemoDataset;
use crate::maze::{scripted_expert, MazeLayout};
use crate::phase::PhaseConfig;
use crate::planner::PlannerConfig;
use crate::target::SdeParams;

/// Portion of the active demonstration the target is built around: from
/// `behind` indices before the retrieved index to some way past the reference
/// clock. The forward extent shrinks from `ahead` at zero temperature to
/// `ahead_explore` at full temperature, so a stuck agent explores around the
/// place it is stuck instead of chasing the rest of the demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceWindow {
    pub behind: usize,
    pub ahead: usize,
    pub ahead_explore: i64,
}

impl Default for ReferenceWindow {
    fn default() -> Self {
        ReferenceWindow {
            behind: 5,
            ahead: 40,
            ahead_explore: -5,
        }
    }
}

impl ReferenceWindow {
    /// Inclusive index range for retrieved index `retrieved`, clock index
    /// `clock` and temperature `theta`.
    pub fn range(&self, retrieved: usize, clock: usize, theta: f64) -> (usize, usize) {
        let (ahead, explore) = (self.ahead as f64, self.ahead_explore as f64);
        let span = ahead - (ahead - explore) * theta.clamp(0.0, 1.0);
        let start = retrieved.min(clock).saturating_sub(self.behind);
        let end = (clock.max(retrieved) as i64 + span.round() as i64).max(retrieved as i64 + 1);
        (start, end as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub sigmas: Vec<f64>,
    pub trials: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sigmas: vec![0.0, 0.02, 0.05, 0.08],
            trials: 50,
        }
    }
}

/// Everything a run needs. Every field has a default; a config file only
/// lists what it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub step_budget: usize,
    /// Layout file; the built-in nominal layout when absent.
    pub layout: Option<PathBuf>,
    /// Directory of demonstration files; a scripted expert on the nominal
    /// layout when absent.
    pub dataset: Option<PathBuf>,
    /// Speed of the scripted expert, in workspace units per step.
    pub demo_speed: f64,
    /// Grid-bucket cell for retrieval; exhaustive scan when absent.
    pub grid_cell: Option<f64>,
    /// Baseline mode: the target is always built at zero temperature.
    pub tracking_only: bool,
    pub phase: PhaseConfig,
    pub sde: SdeParams,
    pub planner: PlannerConfig,
    pub window: ReferenceWindow,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            step_budget: 1000,
            layout: None,
            dataset: None,
            demo_speed: 0.01,
            grid_cell: None,
            tracking_only: false,
            phase: PhaseConfig::default(),
            sde: SdeParams::default(),
            planner: PlannerConfig::default(),
            window: ReferenceWindow::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a config file; relative paths inside are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => Error::parse(path, other),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.layout, &mut cfg.dataset].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::parse("<config>", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.phase.validate()?;
        self.sde.validate()?;
        self.planner.validate()?;
        if !(self.demo_speed > 0.0) {
            return Err(Error::invalid("demo_speed", "must be positive"));
        }
        if self.sweep.trials == 0 {
            return Err(Error::invalid("sweep.trials", "must be >= 1"));
        }
        if self.sweep.sigmas.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::invalid("sweep.sigmas", "must be >= 0"));
        }
        if let Some(c) = self.grid_cell {
            if !(c > 0.0) {
                return Err(Error::invalid("grid_cell", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn nominal_layout(&self) -> Result<MazeLayout> {
        let layout = match &self.layout {
            Some(p) => MazeLayout::load(p)?,
            None => MazeLayout::nominal(),
        };
        layout.check_gate_widths(self.planner.u_max)?;
        Ok(layout)
    }

    /// The demonstration dataset: loaded from disk, or one scripted expert
    /// demonstration on `layout`.
    pub fn dataset(&self, layout: &MazeLayout) -> Result<DemoDataset> {
        let ds = match &self.dataset {
            Some(dir) => DemoDataset::load_dir(dir)?,
            None => DemoDataset::new(vec![scripted_expert(layout, self.demo_speed)?])?,
        };
        match self.grid_cell {
            Some(cell) => ds.with_grid(cell),
            None => Ok(ds),
        }
    }
}

/// Mixes seed components (splitmix64 finalizer).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(h << 6)
            .wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}
