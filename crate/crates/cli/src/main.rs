//! Experiment harness CLI: runs the characterization protocols against the
//! simulated plant and writes CSV traces plus plain-text summaries.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use pneumarm::config::Config;
use pneumarm::experiments::{run, ExperimentKind, ExperimentSpec};
use pneumarm::ik::{sample_feasible, solve_position_ik};
use pneumarm::JointVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "pneumarm",
    about = "Kinematics, control, and plant simulation experiments for a 12-joint antagonistic pneumatic arm",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Configuration file; defaults to the built-in configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Stiffness/gain profile name (per-experiment default otherwise).
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Output directory for CSV and summary files.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,
    /// Seed for randomized target utilities.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Duration override, seconds (per-experiment default otherwise).
    #[arg(long, global = true)]
    duration: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Joint step-response protocol (steps at 6, 12, 18 s).
    Step(CommonOpts),
    /// Eight-waypoint traversal under the IK-fed joint controller.
    Waypoints {
        #[command(flatten)]
        common: CommonOpts,
        /// Dwell per waypoint, seconds.
        #[arg(long)]
        dwell: Option<f64>,
    },
    /// Max one-sided bend under increasing tool payloads.
    Payload {
        #[command(flatten)]
        common: CommonOpts,
        /// Payloads to sweep, kg.
        #[arg(long, value_delimiter = ',')]
        payloads: Option<Vec<f64>>,
    },
    /// Waypoint cycling against the compressed-air tank until depletion.
    Endurance {
        #[command(flatten)]
        common: CommonOpts,
        /// Ignore the tank and run to the duration cap.
        #[arg(long)]
        infinite_tank: bool,
    },
    /// Directional-compliance probe at the rest posture.
    Compliance(CommonOpts),
    /// Solve IK for randomized reachable targets and report convergence.
    IkCheck {
        #[command(flatten)]
        common: CommonOpts,
        /// Number of targets.
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
}

fn load_config(common: &CommonOpts) -> anyhow::Result<Config> {
    match &common.config {
        Some(path) => {
            Config::from_path(path).with_context(|| format!("loading {}", path.display()))
        }
        None => Ok(Config::builtin()),
    }
}

fn spec_from(kind: ExperimentKind, common: &CommonOpts) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(kind);
    spec.profile = common.profile.clone();
    spec.out_dir = Some(common.out.clone());
    spec.seed = common.seed;
    spec.duration_s = common.duration;
    spec
}

fn run_and_report(config: &Config, spec: &ExperimentSpec) -> anyhow::Result<()> {
    let report = run(config, spec)?;
    print!("{report}");
    if let Some(dir) = &spec.out_dir {
        println!(
            "wrote {} and {}",
            dir.join(format!("{}.csv", spec.kind.name())).display(),
            dir.join(format!("{}_summary.txt", spec.kind.name())).display()
        );
    }
    Ok(())
}

fn ik_check(config: &Config, common: &CommonOpts, n: usize) -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let mut converged = 0usize;
    let mut total_iters = 0usize;
    let mut worst_residual = 0.0f64;
    for _ in 0..n {
        let star = sample_feasible(&config.limits, &mut rng);
        let target = config.arm.tool_position(&star);
        let result = solve_position_ik(
            &config.arm,
            &config.limits,
            &JointVector::zeros(),
            &target,
            &config.ik,
        )?;
        if result.converged {
            converged += 1;
            total_iters += result.iterations;
        } else {
            worst_residual = worst_residual.max(result.residual);
        }
    }
    println!("ik-check: {converged}/{n} converged (seed {})", common.seed);
    if converged > 0 {
        println!(
            "mean iterations over converged solves: {:.1}",
            total_iters as f64 / converged as f64
        );
    }
    if converged < n {
        println!("worst unconverged residual: {worst_residual:.3e} m");
    }
    if converged * 100 < n * 95 {
        bail!("ik-check failed: {converged}/{n} below the 95% convergence bar");
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Step(common) => {
            let config = load_config(&common)?;
            run_and_report(&config, &spec_from(ExperimentKind::StepResponse, &common))
        }
        Command::Waypoints { common, dwell } => {
            let config = load_config(&common)?;
            let mut spec = spec_from(ExperimentKind::Waypoints, &common);
            spec.dwell_s = dwell;
            run_and_report(&config, &spec)
        }
        Command::Payload { common, payloads } => {
            let config = load_config(&common)?;
            let mut spec = spec_from(ExperimentKind::PayloadSweep, &common);
            spec.payloads = payloads;
            run_and_report(&config, &spec)
        }
        Command::Endurance {
            common,
            infinite_tank,
        } => {
            let config = load_config(&common)?;
            let mut spec = spec_from(ExperimentKind::Endurance, &common);
            spec.infinite_tank = infinite_tank;
            run_and_report(&config, &spec)
        }
        Command::Compliance(common) => {
            let config = load_config(&common)?;
            run_and_report(&config, &spec_from(ExperimentKind::ComplianceDemo, &common))
        }
        Command::IkCheck { common, n } => {
            let config = load_config(&common)?;
            ik_check(&config, &common, n)
        }
    }
}
