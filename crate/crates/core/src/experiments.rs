//! Experiment orchestration and machine-readable reports: seeded parallel Monte
//! Carlo trials of the solver, and the condition, gap, bound, enumeration and
//! commutativity reports behind the command line.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::channels::{commutativity_distance, ChannelKind, ProgressMeasure, Simulator, ZenoMode};
use crate::conditions::{
    check, default_glc_witness, resampling_bound, BoundTerms, Condition, ConditionReport,
    ResamplingBound, Witness,
};
use crate::error::{Error, Result};
use crate::instance::{FlawSet, QsatInstance};
use crate::limits::Limits;
use crate::linalg::ComplexMatrix;
use crate::scalar::Real;
use crate::shearer::{certified_tail, path_estimate, tail_bound_noslack, weighted_sums};
use crate::solver::{
    alternative_algorithm_run, boosted_run, enumerate_log_tree, projection_rounds_for, rounds_for,
    run, select_parameters, ChannelChoice, LogTree, MeasurementLog, RunRecord, SolverParams,
    Terminal,
};

/// Resampling budget for the error-free channels when none is given.
pub const DEFAULT_EXACT_BUDGET: usize = 10_000;

/// Largest size `k` summed exactly in bound reports.
pub const BOUNDS_ENUMERATION_SIZE: usize = 8;

/// Serializes a real as a JSON number, or as `"inf"`/`"-inf"`/`"nan"` when not finite.
fn real_or_string<R: Real, S: Serializer>(x: &R, s: S) -> std::result::Result<S::Ok, S::Error> {
    let v = x.as_f64();
    if v.is_finite() {
        s.serialize_f64(v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn opt_real_or_string<R: Real, S: Serializer>(
    x: &Option<R>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => real_or_string(v, s),
        None => s.serialize_none(),
    }
}

/// What a Monte Carlo experiment runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Projective,
    Exact,
    ZenoIdeal,
    ZenoImplementable,
    Boosted,
    AppendixFAlt,
}

impl RunMode {
    pub const ALL: [RunMode; 6] = [
        RunMode::Projective,
        RunMode::Exact,
        RunMode::ZenoIdeal,
        RunMode::ZenoImplementable,
        RunMode::Boosted,
        RunMode::AppendixFAlt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RunMode::Projective => "projective",
            RunMode::Exact => "exact",
            RunMode::ZenoIdeal => "zeno-ideal",
            RunMode::ZenoImplementable => "zeno-implementable",
            RunMode::Boosted => "boosted",
            RunMode::AppendixFAlt => "appendix-f-alt",
        }
    }

    fn needs_weak_parameters(self) -> bool {
        matches!(
            self,
            RunMode::ZenoIdeal | RunMode::ZenoImplementable | RunMode::Boosted
        )
    }
}

impl std::str::FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RunMode::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown mode `{s}`")))
    }
}

/// Experiment settings; every `Option` falls back to a derived default.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig<R: Real> {
    pub mode: RunMode,
    pub trials: usize,
    pub seed: u64,
    pub condition: Condition,
    pub witness: Option<Witness<R>>,
    pub theta: Option<R>,
    pub t: Option<u64>,
    pub tau: Option<u64>,
    pub max_resamplings: Option<usize>,
    /// Lower bound on the uniform gap used instead of computing it.
    pub gamma: Option<R>,
    pub delta: R,
    pub epsilon: R,
    /// Loop passes of the alternative algorithm.
    pub iterations: usize,
    /// Basis states the alternative algorithm starts from, cycled over trials
    /// (maximally mixed when empty).
    pub initial: Vec<usize>,
    /// Channel used inside boosted runs.
    pub boost_channel: ChannelChoice,
    /// Record wall-clock time (makes reports non-reproducible byte-for-byte).
    pub timing: bool,
}

impl<R: Real> ExperimentConfig<R> {
    pub fn new(mode: RunMode, trials: usize, seed: u64) -> Self {
        Self {
            mode,
            trials,
            seed,
            condition: Condition::Shc,
            witness: None,
            theta: None,
            t: None,
            tau: None,
            max_resamplings: None,
            gamma: None,
            delta: R::lit(0.1),
            epsilon: R::lit(0.1),
            iterations: 100,
            initial: Vec::new(),
            boost_channel: ChannelChoice::ZenoImplementable,
            timing: false,
        }
    }
}

/// Parameters actually used, with the quantities they were derived from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct ResolvedParameters<R: Real> {
    pub params: SolverParams<R>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<ResamplingBound<R>>,
    #[serde(
        serialize_with = "opt_real_or_string",
        skip_serializing_if = "Option::is_none"
    )]
    pub gamma: Option<R>,
    #[serde(
        serialize_with = "opt_real_or_string",
        skip_serializing_if = "Option::is_none"
    )]
    pub gamma_full: Option<R>,
    pub delta: R,
    pub epsilon: R,
}

fn channel_for(mode: RunMode, boost: ChannelChoice) -> ChannelChoice {
    match mode {
        RunMode::Projective | RunMode::AppendixFAlt => ChannelChoice::Projective,
        RunMode::Exact => ChannelChoice::Exact,
        RunMode::ZenoIdeal => ChannelChoice::ZenoIdeal,
        RunMode::ZenoImplementable => ChannelChoice::ZenoImplementable,
        RunMode::Boosted => boost,
    }
}

/// Fills in the parameters: `θ, β, t, τ` and the `6R` budget from the condition for
/// the weak-measurement modes, a fixed budget otherwise; explicit values win.
pub fn resolve_parameters<R: Real>(
    sim: &Simulator<R>,
    config: &ExperimentConfig<R>,
) -> Result<ResolvedParameters<R>> {
    let channel_kind = channel_for(config.mode, config.boost_channel);
    if !config.mode.needs_weak_parameters() {
        let bound =
            resampling_bound(sim.instance(), config.condition, config.witness.as_ref()).ok();
        let mut params = SolverParams::simple(
            channel_kind,
            config.max_resamplings.unwrap_or(DEFAULT_EXACT_BUDGET),
            config.seed,
        );
        params.tau = config.tau.unwrap_or(1);
        return Ok(ResolvedParameters {
            params,
            bound,
            gamma: None,
            gamma_full: None,
            delta: config.delta,
            epsilon: config.epsilon,
        });
    }
    let choice = select_parameters(
        sim,
        config.condition,
        config.witness.as_ref(),
        config.gamma,
        config.seed,
    );
    let (mut params, bound, gamma, gamma_full) = match choice {
        Ok(c) => (c.params, Some(c.bound), c.gamma, c.gamma_full),
        Err(e) => {
            // Without a satisfied condition every weak parameter must be explicit.
            let (Some(theta), Some(t), Some(budget)) =
                (config.theta, config.t, config.max_resamplings)
            else {
                return Err(e);
            };
            let params = SolverParams {
                theta,
                t,
                tau: config.tau.unwrap_or(1),
                beta: R::one(),
                max_resamplings: budget,
                seed: config.seed,
                channel_kind,
            };
            let gamma_full = sim.gap(sim.all_flaws())?;
            (params, None, config.gamma.unwrap_or(R::zero()), gamma_full)
        }
    };
    params.channel_kind = channel_kind;
    if let Some(theta) = config.theta {
        params.theta = theta;
        if config.t.is_none() && gamma > R::zero() {
            params.t = rounds_for(theta, gamma);
        }
    }
    if let Some(t) = config.t {
        params.t = t;
    }
    if let Some(tau) = config.tau {
        params.tau = tau;
    } else if gamma > R::zero() {
        params.tau = projection_rounds_for(sim.num_flaws(), gamma, params.beta, params.t);
    }
    if let Some(budget) = config.max_resamplings {
        params.max_resamplings = budget;
    }
    params.validate()?;
    Ok(ResolvedParameters {
        params,
        bound,
        gamma: Some(gamma),
        gamma_full: Some(gamma_full),
        delta: config.delta,
        epsilon: config.epsilon,
    })
}

/// One Monte Carlo trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct TrialRow<R: Real> {
    pub trial: usize,
    pub terminal: Terminal,
    pub resamples: usize,
    pub channel_uses: usize,
    pub attempts: usize,
    pub residual_energy: R,
    pub ground_overlap: R,
    pub log: MeasurementLog,
}

impl<R: Real> TrialRow<R> {
    fn from_record(trial: usize, record: RunRecord<R>) -> Self {
        Self {
            trial,
            terminal: record.terminal,
            resamples: record.resample_count,
            channel_uses: record.channel_uses,
            attempts: record.attempts,
            residual_energy: record.residual_energy,
            ground_overlap: record.ground_overlap,
            log: record.log,
        }
    }
}

/// Summary statistics, recomputable from the per-trial rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct Aggregates<R: Real> {
    pub trials: usize,
    pub successes: usize,
    pub errors: usize,
    pub timeouts: usize,
    pub success_rate: R,
    /// Standard error of the success rate.
    pub success_rate_se: R,
    pub mean_resamples: R,
    /// Standard error of the mean number of resamplings.
    pub resamples_se: R,
    /// Normal-approximation 95% interval for the mean number of resamplings.
    pub resamples_ci95: [R; 2],
    pub mean_channel_uses: R,
    pub mean_residual_energy: R,
    pub mean_ground_overlap: R,
    /// Mean ground-state overlap over successful trials.
    pub mean_ground_overlap_success: Option<R>,
}

fn mean<R: Real>(values: impl Iterator<Item = R>) -> Option<R> {
    let (sum, count) = values.fold((R::zero(), 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / R::from_usize_lossy(count))
}

impl<R: Real> Aggregates<R> {
    pub fn from_rows(rows: &[TrialRow<R>]) -> Self {
        let k = rows.len();
        let kr = R::from_usize_lossy(k.max(1));
        let count = |t: Terminal| rows.iter().filter(|r| r.terminal == t).count();
        let successes = count(Terminal::Success);
        let success_rate = R::from_usize_lossy(successes) / kr;
        let resamples = || rows.iter().map(|r| R::from_usize_lossy(r.resamples));
        let mean_resamples = mean(resamples()).unwrap_or(R::zero());
        let variance = if k > 1 {
            resamples().fold(R::zero(), |acc, x| acc + (x - mean_resamples).powi(2))
                / R::from_usize_lossy(k - 1)
        } else {
            R::zero()
        };
        let resamples_se = (variance / kr).sqrt();
        let z = R::lit(1.96);
        Self {
            trials: k,
            successes,
            errors: count(Terminal::Error),
            timeouts: count(Terminal::Timeout),
            success_rate,
            success_rate_se: (success_rate * (R::one() - success_rate) / kr).sqrt(),
            mean_resamples,
            resamples_se,
            resamples_ci95: [
                mean_resamples - z * resamples_se,
                mean_resamples + z * resamples_se,
            ],
            mean_channel_uses: mean(rows.iter().map(|r| R::from_usize_lossy(r.channel_uses)))
                .unwrap_or(R::zero()),
            mean_residual_energy: mean(rows.iter().map(|r| r.residual_energy)).unwrap_or(R::zero()),
            mean_ground_overlap: mean(rows.iter().map(|r| r.ground_overlap)).unwrap_or(R::zero()),
            mean_ground_overlap_success: mean(
                rows.iter()
                    .filter(|r| r.terminal == Terminal::Success)
                    .map(|r| r.ground_overlap),
            ),
        }
    }
}

/// Identification of the instance an experiment ran on.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct InstanceSummary<R: Real> {
    pub n: usize,
    pub flaws: Vec<String>,
    pub probabilities: Vec<R>,
    pub edges: Vec<(usize, usize)>,
}

impl<R: Real> InstanceSummary<R> {
    pub fn of(inst: &QsatInstance<R>) -> Self {
        Self {
            n: inst.n,
            flaws: inst.flaws.iter().map(|f| f.id.clone()).collect(),
            probabilities: inst.probabilities(),
            edges: inst.dependency_graph().edges(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct ExperimentReport<R: Real> {
    pub mode: RunMode,
    pub seed: u64,
    pub instance: InstanceSummary<R>,
    pub condition: ConditionReport<R>,
    pub parameters: ResolvedParameters<R>,
    pub aggregates: Aggregates<R>,
    pub rows: Vec<TrialRow<R>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

/// RNG of trial `index`: the experiment seed selects the key, the index the stream.
pub fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn one_trial<R: Real>(
    sim: &Simulator<R>,
    config: &ExperimentConfig<R>,
    resolved: &ResolvedParameters<R>,
    initial: &[ComplexMatrix<R>],
    index: usize,
) -> Result<RunRecord<R>> {
    let mut rng = trial_rng(config.seed, index);
    let params = &resolved.params;
    match config.mode {
        RunMode::Projective | RunMode::Exact | RunMode::ZenoIdeal | RunMode::ZenoImplementable => {
            run(sim, params, &mut rng)
        }
        RunMode::Boosted => boosted_run(sim, params, resolved.delta, resolved.epsilon, &mut rng),
        RunMode::AppendixFAlt => {
            let start = (!initial.is_empty()).then(|| &initial[index % initial.len()]);
            alternative_algorithm_run(sim, start, config.iterations, &mut rng)
        }
    }
}

/// Runs `config.trials` independent trials in parallel. Trial `i` draws from
/// [`trial_rng`]`(seed, i)` and rows are kept in trial order, so the report only
/// depends on the configuration.
pub fn run_experiment<R: Real>(
    sim: &Simulator<R>,
    config: &ExperimentConfig<R>,
) -> Result<ExperimentReport<R>> {
    if config.trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be at least 1".into(),
        });
    }
    let started = Instant::now();
    let inst = sim.instance();
    let condition = condition_report(inst, config.condition, config.witness.as_ref())?;
    let resolved = resolve_parameters(sim, config)?;
    let initial = config
        .initial
        .iter()
        .map(|&k| {
            if k < sim.dim() {
                Ok(ComplexMatrix::basis_projector(sim.dim(), k))
            } else {
                Err(Error::InvalidParameter {
                    name: "initial",
                    reason: format!("basis state {k} outside dimension {}", sim.dim()),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    // Build shared caches once before fanning out.
    sim.ground_projector()?;
    let records = (0..config.trials)
        .into_par_iter()
        .map(|i| one_trial(sim, config, &resolved, &initial, i))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<TrialRow<R>> = records
        .into_iter()
        .enumerate()
        .map(|(i, r)| TrialRow::from_record(i, r))
        .collect();
    Ok(ExperimentReport {
        mode: config.mode,
        seed: config.seed,
        instance: InstanceSummary::of(inst),
        condition,
        parameters: resolved,
        aggregates: Aggregates::from_rows(&rows),
        rows,
        wall_clock_seconds: config.timing.then(|| started.elapsed().as_secs_f64()),
    })
}

/// `check`, with the witness a condition needs derived when not given: the default
/// `x` for the general condition and `y = x/(1−x)` for the cluster expansion.
pub fn condition_report<R: Real>(
    inst: &QsatInstance<R>,
    condition: Condition,
    witness: Option<&Witness<R>>,
) -> Result<ConditionReport<R>> {
    let g = inst.dependency_graph();
    let p = inst.probabilities();
    let derived;
    let witness = match (condition, witness) {
        (Condition::Cec, None) => {
            derived = Witness::Y(
                default_glc_witness::<R>(&g)
                    .into_iter()
                    .map(|x| x / (R::one() - x))
                    .collect(),
            );
            Some(&derived)
        }
        (Condition::Cec, Some(Witness::X(x))) => {
            derived = Witness::Y(x.iter().map(|&x| x / (R::one() - x)).collect());
            Some(&derived)
        }
        (Condition::Slc | Condition::Shc, _) => None,
        (Condition::Glc, Some(Witness::Y(_))) => None,
        (_, w) => w,
    };
    check(&g, &p, condition, witness)
}

/// All four conditions and whether they respect `SLC ⇒ GLC ⇒ CEC ⇒ SHC`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct ConditionSummary<R: Real> {
    pub instance: InstanceSummary<R>,
    pub reports: Vec<ConditionReport<R>>,
    /// No satisfied condition is followed by an unsatisfied weaker one.
    pub implications_consistent: bool,
    pub shearer_satisfied: bool,
}

pub fn condition_summary<R: Real>(
    inst: &QsatInstance<R>,
    witness: Option<&Witness<R>>,
) -> Result<ConditionSummary<R>> {
    let reports = Condition::ALL
        .iter()
        .map(|&c| condition_report(inst, c, witness))
        .collect::<Result<Vec<_>>>()?;
    let implications_consistent = reports
        .iter()
        .enumerate()
        .all(|(i, r)| !r.satisfied || reports[i..].iter().all(|w| w.satisfied));
    Ok(ConditionSummary {
        instance: InstanceSummary::of(inst),
        shearer_satisfied: reports[3].satisfied,
        reports,
        implications_consistent,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct SubsetGap<R: Real> {
    pub flaws: Vec<String>,
    #[serde(serialize_with = "real_or_string")]
    pub gap: R,
}

/// Gap report: the uniform gap, `γ^F`, and `γ^S` for requested or all subsets.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct GapReport<R: Real> {
    #[serde(serialize_with = "opt_real_or_string")]
    pub uniform_gap: Option<R>,
    #[serde(serialize_with = "real_or_string")]
    pub full_gap: R,
    pub subsets: Vec<SubsetGap<R>>,
}

/// Subsets are listed individually when requested, or all of them when there are
/// at most `2^list_limit`.
pub fn gap_report<R: Real>(
    sim: &Simulator<R>,
    requested: Option<FlawSet>,
    list_limit: usize,
) -> Result<GapReport<R>> {
    let inst = sim.instance();
    let m = sim.num_flaws();
    let uniform_gap = if m <= Limits::from_env()?.max_gap_flaws {
        Some(inst.uniform_gap()?)
    } else {
        None
    };
    let sets: Vec<FlawSet> = match requested {
        Some(s) => vec![s],
        None if m <= list_limit => (0..1u64 << m).map(FlawSet).collect(),
        None => Vec::new(),
    };
    let subsets = sets
        .into_iter()
        .map(|s| {
            Ok(SubsetGap {
                flaws: inst.flaw_ids(s),
                gap: sim.gap(s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GapReport {
        uniform_gap,
        full_gap: sim.gap(sim.all_flaws())?,
        subsets,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct TailCheck<R: Real> {
    pub t: R,
    /// `T(t)`.
    pub size: R,
    /// Certified upper bound on the weight of sequences of size `≥ ⌈T(t)⌉`
    /// (small instances only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified_tail: Option<R>,
    /// `certified_tail ≤ e^{−t}`, when certified.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holds: Option<bool>,
}

/// Resampling bound, path estimate, and tail sizes for a satisfied condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct BoundsReport<R: Real> {
    pub condition: ConditionReport<R>,
    pub terms: BoundTerms<R>,
    /// `R` before scaling by `n`.
    pub resampling_bound: R,
    /// `n · R`.
    pub n_scaled: R,
    pub path_estimate: R,
    /// Exact weight of stable set sequences of size `0..=k` (small instances only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_sums: Option<Vec<R>>,
    /// `Σ_k weighted_sums[k] ≤ path_estimate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_estimate_holds: Option<bool>,
    pub tails: Vec<TailCheck<R>>,
}

/// Errors with [`Error::ConditionNotSatisfied`] when the condition fails.
pub fn bounds_report<R: Real>(
    inst: &QsatInstance<R>,
    condition: Condition,
    witness: Option<&Witness<R>>,
) -> Result<BoundsReport<R>> {
    let report = condition_report(inst, condition, witness)?;
    let witness = report.witness.clone();
    let witness = match (condition, witness) {
        (Condition::Slc, _) => None,
        (_, w) => w,
    };
    let bound = resampling_bound(inst, condition, witness.as_ref())?;
    let g = inst.dependency_graph();
    let p = inst.probabilities();
    let estimate = path_estimate(&g, &p, condition, witness.as_ref())?;
    let limits = Limits::default();
    let small = g.num_vertices() <= limits.max_sequence_flaws;
    let sums = if small {
        Some(weighted_sums(&g, &p, BOUNDS_ENUMERATION_SIZE)?)
    } else {
        None
    };
    let path_estimate_holds = sums.as_ref().map(|s| {
        let total = s.iter().fold(R::zero(), |a, &b| a + b);
        total <= estimate * (R::one() + R::lit(1e-12))
    });
    let tails = [0.0, 1.0, 2.0]
        .into_iter()
        .map(|t| {
            let t = R::lit(t);
            let size = tail_bound_noslack(&g, &p, condition, witness.as_ref(), t)?;
            let from = size.ceil().as_f64() as usize;
            let certified = if small {
                Some(certified_tail(&g, &p, from, BOUNDS_ENUMERATION_SIZE)?.upper())
            } else {
                None
            };
            Ok(TailCheck {
                t,
                size,
                certified_tail: certified,
                holds: certified.map(|c| c <= (-t).exp()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundsReport {
        condition: report,
        terms: bound.terms,
        resampling_bound: bound.core,
        n_scaled: bound.n_scaled,
        path_estimate: estimate,
        weighted_sums: sums,
        path_estimate_holds,
        tails,
    })
}

/// Summary of an exhaustive log-tree verification.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct EnumerationReport<R: Real> {
    pub channel: ChannelKind<R>,
    pub max_resamples: usize,
    pub nodes: usize,
    pub root_violation: R,
    pub worst_violation: R,
    pub violations: Vec<String>,
    #[serde(serialize_with = "real_or_string")]
    pub worst_error_excess: R,
    pub error_violations: Vec<String>,
    pub success_mass: R,
    pub error_mass: R,
    pub frontier_mass: R,
    pub expected_resamplings_truncated: R,
    pub passes: bool,
}

impl<R: Real> EnumerationReport<R> {
    pub fn from_tree(channel: ChannelKind<R>, tree: &LogTree<R>) -> Self {
        let names = |logs: &[MeasurementLog]| logs.iter().map(|l| l.to_string()).collect();
        Self {
            channel,
            max_resamples: tree.max_resamples,
            nodes: tree.node_count,
            root_violation: tree.root_violation,
            worst_violation: tree.worst_violation,
            violations: names(&tree.violations),
            worst_error_excess: tree.worst_error_excess,
            error_violations: names(&tree.error_violations),
            success_mass: tree.success_mass,
            error_mass: tree.error_mass,
            frontier_mass: tree.frontier_mass,
            expected_resamplings_truncated: tree.expected_resamplings_truncated,
            passes: tree.passes(),
        }
    }
}

/// Channel for enumeration: the Zeno channels take `θ` (and `t` from the uniform gap
/// when not given).
pub fn enumeration_channel<R: Real>(
    sim: &Simulator<R>,
    choice: ChannelChoice,
    theta: R,
    t: Option<u64>,
    tau: u64,
) -> Result<ChannelKind<R>> {
    let zeno = |mode| -> Result<ChannelKind<R>> {
        let t = match t {
            Some(t) => t,
            None => rounds_for(theta, sim.instance().uniform_gap()?.min(R::one())),
        };
        Ok(ChannelKind::Zeno { theta, t, mode })
    };
    match choice {
        ChannelChoice::Projective => Ok(ChannelKind::Projective),
        ChannelChoice::Exact => Ok(ChannelKind::Exact),
        ChannelChoice::ZenoIdeal => zeno(ZenoMode::Ideal),
        ChannelChoice::ZenoImplementable => zeno(ZenoMode::Implementable { tau }),
    }
}

pub fn enumeration_report<R: Real>(
    sim: &Simulator<R>,
    channel: ChannelKind<R>,
    max_resamples: usize,
) -> Result<EnumerationReport<R>> {
    let tree = enumerate_log_tree(sim, &channel, ProgressMeasure::Exact, max_resamples, false)?;
    Ok(EnumerationReport::from_tree(channel, &tree))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = ""))]
pub struct CommutativityReport<R: Real> {
    pub a: String,
    pub b: String,
    /// Basis state of the input, when the input is a basis state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis_state: Option<String>,
    pub distance: R,
}

/// Compares the two orders of resampling `a` and `b` between dephasings, on the
/// basis state `|1…1⟩` unless a state is given.
pub fn commutativity_report<R: Real>(
    sim: &Simulator<R>,
    a: &str,
    b: &str,
    rho: Option<&ComplexMatrix<R>>,
) -> Result<CommutativityReport<R>> {
    let inst = sim.instance();
    let index = |id: &str| {
        inst.flaw_index(id).ok_or_else(|| Error::InvalidParameter {
            name: "flaw",
            reason: format!("no flaw with id `{id}`"),
        })
    };
    let (ia, ib) = (index(a)?, index(b)?);
    let ones = ComplexMatrix::basis_projector(sim.dim(), sim.dim() - 1);
    let (rho, basis_state) = match rho {
        Some(r) => (r, None),
        None => (&ones, Some("1".repeat(sim.n()))),
    };
    Ok(CommutativityReport {
        a: a.to_string(),
        b: b.to_string(),
        basis_state,
        distance: commutativity_distance(sim, ia, ib, rho)?,
    })
}
