use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maze::perturb_gates;

use super::{derive_seed, run_episode, EpisodeOptions, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sigma: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean steps to goal over successful trials; NaN without successes.
    pub mean_steps_success: f64,
}

/// Runs `trials` perturbed episodes per sigma, all with the same nominal
/// demonstrations.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    if cfg.sweep.sigmas.is_empty() {
        return Err(Error::invalid("sweep.sigmas", "must not be empty"));
    }
    let nominal = cfg.nominal_layout()?;
    let dataset = cfg.dataset(&nominal)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.sweep.sigmas.len())
        .flat_map(|i| (0..cfg.sweep.trials).map(move |j| (i, j)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(i, j)| {
            let sigma = cfg.sweep.sigmas[i];
            let (layout, perturbation) =
                perturb_gates(&nominal, sigma, derive_seed(&[cfg.seed, i as u64, j as u64, 0]))?;
            let opts = EpisodeOptions {
                perturbation,
                record_particles: false,
            };
            let seed = derive_seed(&[cfg.seed, i as u64, j as u64, 1]);
            run_episode(cfg, &layout, &dataset, seed, &opts).map(|run| run.trace.outcome)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(cfg
        .sweep
        .sigmas
        .iter()
        .enumerate()
        .map(|(i, &sigma)| {
            let mine = &outcomes[i * cfg.sweep.trials..(i + 1) * cfg.sweep.trials];
            let steps: Vec<usize> = mine.iter().filter(|o| o.success).map(|o| o.steps).collect();
            let successes = steps.len();
            SweepRow {
                sigma,
                trials: cfg.sweep.trials,
                successes,
                success_rate: successes as f64 / cfg.sweep.trials as f64,
                mean_steps_success: if successes == 0 {
                    f64::NAN
                } else {
                    steps.iter().sum::<usize>() as f64 / successes as f64
                },
            }
        })
        .collect())
}

pub fn export_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "sigma,trials,successes,success_rate,mean_steps_success").map_err(io)?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.sigma, r.trials, r.successes, r.success_rate, r.mean_steps_success
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}
