use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ergodic_imitation::check::run_checks;
use ergodic_imitation::geometry::save_demo;
use ergodic_imitation::harness::{
    derive_seed, export_particles, export_planner, export_sweep, export_trace, render_svg, run_episode, run_sweep,
    EpisodeOptions, ParticleSnapshot, RunConfig,
};
use ergodic_imitation::maze::{apply_gate_offsets, perturb_gates, scripted_expert, MazeLayout};
use ergodic_imitation::{Error, Result};

#[derive(Parser)]
#[command(name = "ergimit", version, about = "Adaptive ergodic imitation in a 2D gate maze")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scripted expert demonstration for a layout.
    DemoGen {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Workspace units per step.
        #[arg(long, default_value_t = 0.01)]
        speed: f64,
    },
    /// Run a single episode.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Std of the Gaussian gate perturbation.
        #[arg(long)]
        sigma: Option<f64>,
        /// Explicit per-gate offsets, comma separated; overrides --sigma.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        offsets: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
        /// Force the tracking-only baseline.
        #[arg(long)]
        tracking_only: bool,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Per-cycle planner diagnostics.
        #[arg(long)]
        planner: Option<PathBuf>,
        /// Particle snapshots of every cycle.
        #[arg(long)]
        particles: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Success rate over a grid of perturbation scales.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant and oracle suite.
    Check,
}

/// At most `count` snapshots, evenly spaced over the episode.
fn pick_snapshots(all: Vec<ParticleSnapshot>, count: usize) -> Vec<ParticleSnapshot> {
    if all.len() <= count {
        return all;
    }
    let stride = all.len().div_ceil(count);
    all.into_iter().step_by(stride).collect()
}

fn demo_gen(layout: &Path, out: &Path, speed: f64) -> Result<()> {
    let layout = MazeLayout::load(layout)?;
    let demo = scripted_expert(&layout, speed)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("demo_000.csv");
    save_demo(&demo, &path)?;
    println!("wrote {} ({} states)", path.display(), demo.len());
    Ok(())
}

struct RunArgs {
    config: PathBuf,
    sigma: Option<f64>,
    offsets: Option<Vec<f64>>,
    seed: Option<u64>,
    tracking_only: bool,
    trace: Option<PathBuf>,
    planner: Option<PathBuf>,
    particles: Option<PathBuf>,
    svg: Option<PathBuf>,
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.tracking_only |= args.tracking_only;
    let nominal = cfg.nominal_layout()?;
    let dataset = cfg.dataset(&nominal)?;
    let (layout, perturbation) = match (&args.offsets, args.sigma) {
        (Some(offsets), _) => {
            if offsets.len() != nominal.gates.len() {
                return Err(Error::DimensionMismatch {
                    expected: nominal.gates.len(),
                    got: offsets.len(),
                });
            }
            apply_gate_offsets(&nominal, offsets)
        }
        (None, Some(sigma)) => perturb_gates(&nominal, sigma, derive_seed(&[cfg.seed, 0]))?,
        (None, None) => perturb_gates(&nominal, 0.0, 0)?,
    };
    let opts = EpisodeOptions {
        perturbation,
        record_particles: args.particles.is_some() || args.svg.is_some(),
    };
    let run = run_episode(&cfg, &layout, &dataset, cfg.seed, &opts)?;
    let trace = &run.trace;
    println!(
        "success={} steps={} max_theta={:.3} max_e={} gate_offsets={:?}",
        trace.outcome.success,
        trace.outcome.steps,
        trace.max_theta(),
        trace.max_error(),
        trace.perturbation.applied
    );
    if let Some(path) = &args.trace {
        export_trace(trace, path)?;
    }
    if let Some(path) = &args.planner {
        export_planner(&run.planner, path)?;
    }
    if let Some(path) = &args.particles {
        export_particles(&run.particles, path)?;
    }
    if let Some(path) = &args.svg {
        let demo = &dataset.demos()[0];
        render_svg(trace, &layout, demo, &pick_snapshots(run.particles, 6), path)?;
    }
    Ok(())
}

fn sweep(config: &Path, out: Option<&Path>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let rows = run_sweep(&cfg)?;
    println!("sigma\ttrials\tsuccesses\trate\tmean_steps");
    for r in &rows {
        println!(
            "{}\t{}\t{}\t{:.2}\t{:.1}",
            r.sigma, r.trials, r.successes, r.success_rate, r.mean_steps_success
        );
    }
    if let Some(path) = out {
        export_sweep(&rows, path)?;
    }
    Ok(())
}

fn check() -> ExitCode {
    let results = run_checks();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if results.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::DemoGen { layout, out, speed } => demo_gen(&layout, &out, speed),
        Command::Run {
            config,
            sigma,
            offsets,
            seed,
            tracking_only,
            trace,
            planner,
            particles,
            svg,
        } => run(RunArgs {
            config,
            sigma,
            offsets,
            seed,
            tracking_only,
            trace,
            planner,
            particles,
            svg,
        }),
        Command::Sweep { config, out } => sweep(&config, out.as_deref()),
        Command::Check => return check(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
