//! `qlll`: condition checks, gaps, bounds, solver experiments, log-tree
//! verification, instance generation and the resampling commutativity demo.
//!
//! Exit codes: 0 success or condition satisfied, 1 condition or run failed,
//! 2 input error.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qlll::channels::Simulator;
use qlll::experiments::{
    bounds_report, commutativity_report, condition_report, condition_summary, enumeration_channel,
    enumeration_report, gap_report, run_experiment, ExperimentConfig, RunMode,
};
use qlll::fixtures::{appendix_e, appendix_f, random_instance, ProjectorKind, Topology};
use qlll::solver::ChannelChoice;
use qlll::{Condition, Error, Instance64, Matrix64, Witness};

use output::{emit, emit_json};

/// Subsets are listed individually in gap reports up to this many flaws.
const GAP_LIST_FLAWS: usize = 6;

#[derive(Parser, Debug)]
#[command(
    name = "qlll",
    version,
    about = "Constructive quantum Lovász local lemma toolkit"
)]
struct Cli {
    /// Write the report here instead of stdout (`.csv` for CSV, JSON otherwise).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check all four avoidability conditions; succeeds iff Shearer's condition holds.
    Check {
        instance: PathBuf,
        /// JSON witness `{"x": [...]}` or `{"y": [...]}`.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Uniform gap, full-Hamiltonian gap and per-subset gaps.
    Gap {
        instance: PathBuf,
        /// Comma-separated flaw ids; with no ids, the empty set.
        #[arg(long, num_args = 0.., value_delimiter = ',')]
        subset: Option<Vec<String>>,
    },
    /// Expected-resampling bound, path estimate and tail sizes.
    Bounds {
        instance: PathBuf,
        #[arg(long, default_value = "shc")]
        condition: Condition,
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Monte Carlo solver trials.
    Run(RunArgs),
    /// Exhaustive measurement-log enumeration checking the key-lemma bounds.
    Enumerate {
        instance: PathBuf,
        #[arg(long, default_value_t = 4)]
        max_resamples: usize,
        #[arg(long, default_value = "exact")]
        channel: ChannelChoice,
        #[arg(long, default_value_t = 0.05)]
        theta: f64,
        #[arg(long)]
        t: Option<u64>,
        #[arg(long, default_value_t = 50)]
        tau: u64,
    },
    /// Generate an instance file.
    Gen(GenArgs),
    /// Trace distance between the two orders of resampling `a` and `b`.
    Commute {
        instance: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// JSON density matrix (`[[[re, im], ...], ...]`); `|1…1⟩` by default.
        #[arg(long)]
        state: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    instance: PathBuf,
    #[arg(long, default_value = "projective")]
    mode: RunMode,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Condition the weak-measurement parameters are derived from.
    #[arg(long, default_value = "shc")]
    condition: Condition,
    #[arg(long)]
    witness: Option<PathBuf>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    t: Option<u64>,
    #[arg(long)]
    tau: Option<u64>,
    #[arg(long)]
    max_resamples: Option<usize>,
    /// Lower bound on the uniform gap, used instead of computing it.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Loop passes of the alternative algorithm.
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    /// Comma-separated basis states the alternative algorithm starts from.
    #[arg(long, value_delimiter = ',')]
    initial: Vec<usize>,
    /// Channel used by boosted runs.
    #[arg(long, default_value = "zeno-implementable")]
    boost_channel: ChannelChoice,
    /// Include wall-clock time in the report.
    #[arg(long)]
    timing: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum GenKind {
    /// Haar-random rank-r projectors on k qubits.
    Random,
    /// Diagonal (mutually commuting) rank-r projectors on k qubits.
    RandomCommuting,
    AppendixE,
    AppendixF,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TopologyArg {
    Random,
    Chain,
    Cycle,
}

#[derive(clap::Args, Debug)]
struct GenArgs {
    kind: GenKind,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    rank: usize,
    #[arg(long, value_enum, default_value = "chain")]
    topology: TopologyArg,
    /// Number of flaws for the random topology.
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
}

/// A command either completes (exit 0) or reports a failed condition or run (exit 1).
enum Status {
    Ok,
    Failed,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Ok
        } else {
            Status::Failed
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instance(path: &Path) -> Result<Instance64> {
    serde_json::from_str(&read(path)?)
        .with_context(|| format!("invalid instance {}", path.display()))
}

fn load_witness(path: Option<&Path>) -> Result<Option<Witness<f64>>> {
    path.map(|p| {
        serde_json::from_str(&read(p)?).with_context(|| format!("invalid witness {}", p.display()))
    })
    .transpose()
}

fn simulator(path: &Path) -> Result<Simulator<f64>> {
    Ok(Simulator::new(load_instance(path)?)?)
}

fn execute(cli: Cli) -> Result<Status> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Check { instance, witness } => {
            let inst = load_instance(&instance)?;
            let summary = condition_summary(&inst, load_witness(witness.as_deref())?.as_ref())?;
            emit(&summary, out)?;
            Ok(Status::from_bool(summary.shearer_satisfied))
        }
        Command::Gap { instance, subset } => {
            let sim = simulator(&instance)?;
            let requested = subset
                .map(|ids| sim.instance().flaw_set(&ids))
                .transpose()?;
            emit(&gap_report(&sim, requested, GAP_LIST_FLAWS)?, out)?;
            Ok(Status::Ok)
        }
        Command::Bounds {
            instance,
            condition,
            witness,
        } => {
            let inst = load_instance(&instance)?;
            let witness = load_witness(witness.as_deref())?;
            match bounds_report(&inst, condition, witness.as_ref()) {
                Ok(report) => {
                    emit(&report, out)?;
                    Ok(Status::Ok)
                }
                Err(Error::ConditionNotSatisfied(reason)) => {
                    let report = condition_report(&inst, condition, witness.as_ref())?;
                    serde_json::to_writer_pretty(std::io::stdout().lock(), &report)?;
                    println!();
                    eprintln!("qlll: {condition} is not satisfied: {reason}");
                    Ok(Status::Failed)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Run(args) => run(args, out),
        Command::Enumerate {
            instance,
            max_resamples,
            channel,
            theta,
            t,
            tau,
        } => {
            let sim = simulator(&instance)?;
            let channel = enumeration_channel(&sim, channel, theta, t, tau)?;
            let report = enumeration_report(&sim, channel, max_resamples)?;
            emit(&report, out)?;
            Ok(Status::from_bool(report.passes))
        }
        Command::Gen(args) => {
            emit_json(&generate(&args)?, out)?;
            Ok(Status::Ok)
        }
        Command::Commute {
            instance,
            a,
            b,
            state,
        } => {
            let sim = simulator(&instance)?;
            let rho: Option<Matrix64> = state
                .map(|p| -> Result<Matrix64> {
                    serde_json::from_str(&read(&p)?)
                        .with_context(|| format!("invalid state {}", p.display()))
                })
                .transpose()?;
            emit(&commutativity_report(&sim, &a, &b, rho.as_ref())?, out)?;
            Ok(Status::Ok)
        }
    }
}

fn run(args: RunArgs, out: Option<&Path>) -> Result<Status> {
    let sim = simulator(&args.instance)?;
    let mut config = ExperimentConfig::new(args.mode, args.trials, args.seed);
    config.condition = args.condition;
    config.witness = load_witness(args.witness.as_deref())?;
    config.theta = args.theta;
    config.t = args.t;
    config.tau = args.tau;
    config.max_resamplings = args.max_resamples;
    config.gamma = args.gamma;
    config.delta = args.delta;
    config.epsilon = args.epsilon;
    config.iterations = args.iterations;
    config.initial = args.initial;
    config.boost_channel = args.boost_channel;
    config.timing = args.timing;
    let report = run_experiment(&sim, &config)?;
    emit(&report, out)?;
    Ok(Status::from_bool(report.aggregates.successes > 0))
}

fn generate(args: &GenArgs) -> Result<Instance64> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let topology = match args.topology {
        TopologyArg::Random => Topology::Random { m: args.m },
        TopologyArg::Chain => Topology::Chain,
        TopologyArg::Cycle => Topology::Cycle,
    };
    let inst = match args.kind {
        GenKind::Random => random_instance(
            args.n,
            args.k,
            args.rank,
            topology,
            ProjectorKind::Haar,
            &mut rng,
        )?,
        GenKind::RandomCommuting => random_instance(
            args.n,
            args.k,
            args.rank,
            topology,
            ProjectorKind::Diagonal,
            &mut rng,
        )?,
        GenKind::AppendixE => appendix_e(),
        GenKind::AppendixF => appendix_f(args.epsilon)?,
    };
    if inst.num_flaws() == 0 {
        bail!("generated instance has no flaws");
    }
    Ok(inst)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qlll: {e:#}");
            ExitCode::from(2)
        }
    }
}
