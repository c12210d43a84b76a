use crate::error::Result;
use crate::geometry::{project_to_trajectory, DemoDataset, State};
use crate::maze::{step_with_contacts, EnvState, MazeLayout, Perturbation};
use crate::phase::{temperature, update, PhaseState};
use crate::planner::{plan, shift_warm_start, CoverageMemory};
use crate::target::{evolve, init_particles, ParticleSet};

use super::{derive_seed, RunConfig};

/// One executed control step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub position: [f64; 2],
    pub tau: f64,
    pub c: u32,
    pub theta: f64,
    pub e: f64,
    pub cycle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub success: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub perturbation: Perturbation,
    pub rows: Vec<TraceRow>,
    pub outcome: Outcome,
}

impl EpisodeTrace {
    pub fn max_theta(&self) -> f64 {
        self.rows.iter().map(|r| r.theta).fold(0.0, f64::max)
    }

    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.e).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_c(&self) -> u32 {
        self.rows.iter().map(|r| r.c).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerRow {
    pub cycle: usize,
    pub objective: f64,
    pub mmd: f64,
    pub effort: f64,
    pub iters_used: usize,
    /// Coverage samples in the objective: remembered plus planned states.
    pub coverage_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSnapshot {
    pub cycle: usize,
    pub particles: ParticleSet,
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeOptions {
    pub perturbation: Perturbation,
    /// Keep the particle set of every planning cycle.
    pub record_particles: bool,
}

#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub trace: EpisodeTrace,
    pub planner: Vec<PlannerRow>,
    pub particles: Vec<ParticleSnapshot>,
}

/// Retrieve, update phase, evolve the target, plan, execute; repeated until
/// the goal is reached or the step budget runs out.
pub fn run_episode(
    cfg: &RunConfig,
    layout: &MazeLayout,
    dataset: &DemoDataset,
    seed: u64,
    opts: &EpisodeOptions,
) -> Result<EpisodeRun> {
    let solids = layout.solids();
    let mut env = EnvState::new(layout, cfg.step_budget);
    let mut phase = PhaseState::default();
    let mut memory = CoverageMemory::new(cfg.planner.memory_len, dataset.dim());
    let mut warm: Option<Vec<f64>> = None;
    let mut particles: Option<ParticleSet> = None;
    let mut rows = Vec::new();
    let mut planner_rows = Vec::new();
    let mut snapshots = Vec::new();
    let mut cycle = 0;

    while !env.done {
        let mut proj = dataset.nearest(&env.position)?;
        phase = update(&phase, &proj, &cfg.phase);
        let theta = temperature(&phase, &cfg.phase);

        let demo = dataset.demo(proj.demo_id);
        let clock = (phase.tau.round() as usize).min(demo.len() - 1);
        let (start, end) = cfg.window.range(proj.time_index, clock, theta);
        let window = demo.window(start, end);
        let s_star = project_to_trajectory(&env.position, &window)?.arc_s;
        let sde_theta = if cfg.tracking_only { 0.0 } else { theta };

        let initial = match particles.take() {
            Some(prev) if !cfg.sde.reinit_each_cycle => prev,
            _ => init_particles(
                &window,
                cfg.sde.n_particles,
                cfg.sde.h / 2.0,
                derive_seed(&[seed, cycle as u64, 0]),
            )?,
        };
        let target = evolve(
            &initial,
            &window,
            sde_theta,
            phase.c,
            s_star,
            &cfg.sde,
            derive_seed(&[seed, cycle as u64, 1]),
        );

        let plan = plan(&env.position, &target, &memory, &cfg.planner, warm.as_deref())?;
        planner_rows.push(PlannerRow {
            cycle,
            objective: plan.objective_value,
            mmd: plan.mmd,
            effort: plan.effort,
            iters_used: plan.iters_used,
            coverage_size: memory.state_count() + cfg.planner.horizon,
        });

        let mut executed: Vec<State> = Vec::with_capacity(cfg.planner.exec_steps);
        for k in 0..cfg.planner.exec_steps {
            if k > 0 {
                proj = dataset.nearest(&env.position)?;
                phase = update(&phase, &proj, &cfg.phase);
            }
            let (next, _) = step_with_contacts(&env, plan.control(k), layout, &solids);
            env = next;
            executed.push(env.position.clone());
            rows.push(TraceRow {
                step: env.step_count,
                position: [env.position[0], env.position[1]],
                tau: phase.tau,
                c: phase.c,
                theta: temperature(&phase, &cfg.phase),
                e: phase.last_error,
                cycle,
            });
            if env.done {
                break;
            }
        }
        memory.push(&executed);
        warm = Some(shift_warm_start(&plan, &cfg.planner));
        if opts.record_particles {
            snapshots.push(ParticleSnapshot {
                cycle,
                particles: target.clone(),
            });
        }
        particles = Some(target);
        cycle += 1;
    }

    Ok(EpisodeRun {
        trace: EpisodeTrace {
            seed,
            perturbation: opts.perturbation.clone(),
            rows,
            outcome: Outcome {
                success: env.success,
                steps: env.step_count,
            },
        },
        planner: planner_rows,
        particles: snapshots,
    })
}
