//! The maximal independent set resampling algorithm over any flaw-checking
//! channel, exhaustive enumeration of its measurement logs, parameter selection,
//! the boosted procedure, and the alternative algorithm that fails to progress.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{
    kernel_projection_approx, resample, ChannelKind, Label, LabeledState, ProgressMeasure,
    ProjectionMode, Simulator, ZenoMode,
};
use crate::conditions::{resampling_bound, Condition, ResamplingBound, Witness};
use crate::error::{Error, Result};
use crate::instance::{DependencyGraph, FlawSet};
use crate::limits::Limits;
use crate::linalg::{projector_rank, psd_violation, ComplexMatrix};
use crate::scalar::Real;
use crate::shearer::StableSetSequence;

/// Outcome label of one channel application.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    G,
    B,
    E,
}

impl Outcome {
    fn from_label(label: Label) -> Result<Self> {
        match label {
            Label::G => Ok(Outcome::G),
            Label::B => Ok(Outcome::B),
            Label::E => Ok(Outcome::E),
            other => Err(Error::InvalidLog(format!("channel produced label {other}"))),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::G => "G",
            Outcome::B => "B",
            Outcome::E => "E",
        })
    }
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Terminal {
    Success,
    Error,
    Timeout,
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Terminal::Success => "SUCCESS",
            Terminal::Error => "ERROR",
            Terminal::Timeout => "TIMEOUT",
        })
    }
}

/// The classical variables of the algorithm: checked flaws `C`, the current
/// round's resampled set `I`, and the sets of completed rounds.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bookkeeping {
    pub checked: FlawSet,
    pub current: FlawSet,
    pub rounds: Vec<FlawSet>,
}

impl Bookkeeping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_done(&self, g: &DependencyGraph) -> bool {
        self.checked == g.all()
    }

    /// The flaw addressed next (minimal `f ∉ C ∪ Γ⁺(I)`, starting a new round when
    /// that set is empty), or `None` once `C = F`.
    pub fn next_flaw(&self, g: &DependencyGraph) -> Option<usize> {
        if self.is_done(g) {
            return None;
        }
        let blocked = self.checked.union(g.inclusive_of(self.current));
        let available = g.all().difference(blocked);
        if available.is_empty() {
            g.all().difference(self.checked).first()
        } else {
            available.first()
        }
    }

    /// Processes the outcome of addressing the next flaw; returns that flaw.
    pub fn record(&mut self, g: &DependencyGraph, outcome: Outcome) -> Result<usize> {
        let f = self
            .next_flaw(g)
            .ok_or_else(|| Error::InvalidLog("outcome recorded after termination".into()))?;
        if self.checked.union(g.inclusive_of(self.current)) == g.all() {
            self.rounds.push(self.current);
            self.current = FlawSet::EMPTY;
        }
        match outcome {
            Outcome::G => self.checked.insert(f),
            Outcome::B => {
                self.current.insert(f);
                self.checked = self.checked.difference(g.neighbors(f));
            }
            Outcome::E => {}
        }
        Ok(f)
    }

    /// Completed rounds followed by the current one if non-empty.
    pub fn stable_set_sequence(&self) -> StableSetSequence {
        let mut sets = self.rounds.clone();
        if !self.current.is_empty() {
            sets.push(self.current);
        }
        StableSetSequence { sets }
    }
}

/// A measurement log `L ∈ {G, B, E}*`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasurementLog {
    pub outcomes: Vec<Outcome>,
}

impl fmt::Display for MeasurementLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.outcomes.is_empty() {
            return f.write_str("∅");
        }
        self.outcomes.iter().try_for_each(|o| write!(f, "{o}"))
    }
}

/// Everything determined by a log: the algorithm's variables after processing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogReplay {
    pub book: Bookkeeping,
    /// Flaw addressed by each outcome.
    pub addressed: Vec<usize>,
    /// Flaw of each resampling, in order.
    pub resampled: Vec<usize>,
    /// `f_L`, if the algorithm continues.
    pub next: Option<usize>,
    /// Set once the log ends the run (`C = F` or a final `E`).
    pub terminal: Option<Terminal>,
}

impl LogReplay {
    /// `C_L`.
    pub fn checked(&self) -> FlawSet {
        self.book.checked
    }

    /// `I_L`.
    pub fn current(&self) -> FlawSet {
        self.book.current
    }

    /// `p_L = Π_f p_f^{L_f}`.
    pub fn weight<R: Real>(&self, p: &[R]) -> R {
        self.resampled.iter().fold(R::one(), |acc, &f| acc * p[f])
    }

    pub fn stable_set_sequence(&self) -> StableSetSequence {
        self.book.stable_set_sequence()
    }
}

impl MeasurementLog {
    pub fn new(outcomes: Vec<Outcome>) -> Self {
        Self { outcomes }
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn count(&self, outcome: Outcome) -> usize {
        self.outcomes.iter().filter(|&&o| o == outcome).count()
    }

    /// Reconstructs the algorithm's variables, rejecting logs the algorithm cannot
    /// produce (an `E` before the end, or outcomes after `C = F`).
    pub fn replay(&self, g: &DependencyGraph) -> Result<LogReplay> {
        let mut book = Bookkeeping::new();
        let mut addressed = Vec::with_capacity(self.len());
        let mut resampled = Vec::new();
        for (pos, &outcome) in self.outcomes.iter().enumerate() {
            if outcome == Outcome::E && pos + 1 != self.len() {
                return Err(Error::InvalidLog(format!(
                    "E at position {pos} is not terminal"
                )));
            }
            let f = book.record(g, outcome).map_err(|_| {
                Error::InvalidLog(format!("outcome at position {pos} follows termination"))
            })?;
            addressed.push(f);
            if outcome == Outcome::B {
                resampled.push(f);
            }
        }
        let terminal = if self.outcomes.last() == Some(&Outcome::E) {
            Some(Terminal::Error)
        } else if book.is_done(g) {
            Some(Terminal::Success)
        } else {
            None
        };
        let next = if terminal.is_none() {
            book.next_flaw(g)
        } else {
            None
        };
        Ok(LogReplay {
            book,
            addressed,
            resampled,
            next,
            terminal,
        })
    }
}

/// Which flaw-checking channel the solver uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelChoice {
    Projective,
    Exact,
    ZenoIdeal,
    ZenoImplementable,
}

impl fmt::Display for ChannelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelChoice::Projective => "projective",
            ChannelChoice::Exact => "exact",
            ChannelChoice::ZenoIdeal => "zeno-ideal",
            ChannelChoice::ZenoImplementable => "zeno-implementable",
        })
    }
}

impl std::str::FromStr for ChannelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "projective" => Ok(ChannelChoice::Projective),
            "exact" => Ok(ChannelChoice::Exact),
            "zeno-ideal" | "zeno" => Ok(ChannelChoice::ZenoIdeal),
            "zeno-implementable" | "implementable" => Ok(ChannelChoice::ZenoImplementable),
            other => Err(Error::Parse(format!("unknown channel `{other}`"))),
        }
    }
}

/// Solver parameters. `t` and `τ` only matter for the Zeno channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct SolverParams<R: Real> {
    pub theta: R,
    pub t: u64,
    pub tau: u64,
    pub beta: R,
    pub max_resamplings: usize,
    pub seed: u64,
    pub channel_kind: ChannelChoice,
}

impl<R: Real> SolverParams<R> {
    /// Parameters for an error-free channel with the given resampling budget.
    pub fn simple(channel_kind: ChannelChoice, max_resamplings: usize, seed: u64) -> Self {
        Self {
            theta: R::one(),
            t: 1,
            tau: 1,
            beta: R::one(),
            max_resamplings,
            seed,
            channel_kind,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > R::zero() && self.theta <= R::one()) {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("must lie in (0, 1], got {}", self.theta),
            });
        }
        if self.t == 0 || self.tau == 0 {
            return Err(Error::InvalidParameter {
                name: "t/tau",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn channel(&self) -> ChannelKind<R> {
        match self.channel_kind {
            ChannelChoice::Projective => ChannelKind::Projective,
            ChannelChoice::Exact => ChannelKind::Exact,
            ChannelChoice::ZenoIdeal => ChannelKind::Zeno {
                theta: self.theta,
                t: self.t,
                mode: ZenoMode::Ideal,
            },
            ChannelChoice::ZenoImplementable => ChannelKind::Zeno {
                theta: self.theta,
                t: self.t,
                mode: ZenoMode::Implementable { tau: self.tau },
            },
        }
    }
}

/// Result of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct RunRecord<R: Real> {
    pub terminal: Terminal,
    pub log: MeasurementLog,
    pub resample_count: usize,
    pub channel_uses: usize,
    /// Unit-trace state at termination.
    pub final_state: ComplexMatrix<R>,
    /// `tr(H ρ)`.
    pub residual_energy: R,
    /// `tr(Π_{ker H} ρ)`.
    pub ground_overlap: R,
    /// Repetitions performed (boosted runs); 1 otherwise.
    pub attempts: usize,
}

fn finish<R: Real>(
    sim: &Simulator<R>,
    terminal: Terminal,
    log: MeasurementLog,
    channel_uses: usize,
    state: ComplexMatrix<R>,
) -> Result<RunRecord<R>> {
    let energy = (0..sim.num_flaws()).try_fold(R::zero(), |acc, f| {
        Ok::<R, Error>(acc + state.trace_product(sim.projector(f)?).re)
    })?;
    let overlap = state.trace_product(&*sim.ground_projector()?).re;
    Ok(RunRecord {
        terminal,
        resample_count: log.count(Outcome::B),
        log,
        channel_uses,
        final_state: state,
        residual_energy: energy,
        ground_overlap: overlap,
        attempts: 1,
    })
}

fn sample_branch<R: Real, G: Rng + ?Sized>(
    out: &LabeledState<R>,
    rng: &mut G,
) -> Result<(Label, ComplexMatrix<R>)> {
    out.sample(rng)
        .ok_or_else(|| Error::Precondition("channel output has zero trace".into()))
}

/// One trajectory of the maximal independent set resampling algorithm, starting
/// from the maximally mixed state. Outcomes are drawn with probability equal to
/// the branch traces and the chosen branch is renormalized.
pub fn run<R: Real, G: Rng + ?Sized>(
    sim: &Simulator<R>,
    params: &SolverParams<R>,
    rng: &mut G,
) -> Result<RunRecord<R>> {
    run_with_channel(sim, &params.channel(), params.max_resamplings, rng)
}

/// [`run`] with an explicit channel.
pub fn run_with_channel<R: Real, G: Rng + ?Sized>(
    sim: &Simulator<R>,
    channel: &ChannelKind<R>,
    max_resamplings: usize,
    rng: &mut G,
) -> Result<RunRecord<R>> {
    if let ChannelKind::Zeno { theta, t, .. } = channel {
        SolverParams::<R> {
            theta: *theta,
            t: *t,
            ..SolverParams::simple(ChannelChoice::ZenoIdeal, 0, 0)
        }
        .validate()?;
    }
    let g = sim.graph();
    let mut book = Bookkeeping::new();
    let mut log = MeasurementLog::default();
    let mut rho = ComplexMatrix::maximally_mixed(sim.dim());
    let mut uses = 0;
    while let Some(f) = book.next_flaw(g) {
        let out = channel.apply(sim, &rho, book.checked, f)?;
        uses += 1;
        let (label, state) = sample_branch(&out, rng)?;
        let outcome = Outcome::from_label(label)?;
        match outcome {
            Outcome::E => {
                log.outcomes.push(outcome);
                return finish(sim, Terminal::Error, log, uses, state);
            }
            Outcome::G => rho = state,
            Outcome::B => {
                if log.count(Outcome::B) >= max_resamplings {
                    return finish(sim, Terminal::Timeout, log, uses, state);
                }
                rho = resample(&state, sim.instance(), f)?;
            }
        }
        book.record(g, outcome)?;
        log.outcomes.push(outcome);
    }
    finish(sim, Terminal::Success, log, uses, rho)
}

/// A node of the enumerated log tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct LogNode<R: Real> {
    pub log: MeasurementLog,
    /// Unnormalized `ρ_L`.
    pub rho: ComplexMatrix<R>,
    /// `p_L`.
    pub weight: R,
    /// `C_L`.
    pub checked: FlawSet,
    /// Violation of `ρ_L ⪯ p_L · Π_{V^{C_L}} / N`.
    pub violation: R,
}

/// Key-lemma verification over every log with at most the budgeted resamplings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct LogTree<R: Real> {
    pub max_resamples: usize,
    pub nodes: Vec<LogNode<R>>,
    /// Number of logs expanded.
    pub node_count: usize,
    /// Violation at the empty log (zero when the bound holds with equality).
    pub root_violation: R,
    /// Largest violation of `ρ_L ⪯ p_L · Π_{V^{C_L}} / N` over all nodes.
    pub worst_violation: R,
    /// Nodes whose violation exceeds `1e−8`.
    pub violations: Vec<MeasurementLog>,
    /// Largest `tr ρ_{(L,E)} − 2θ · tr ρ_{(L,B)}` over error leaves.
    pub worst_error_excess: R,
    /// Logs `L` with `tr ρ_{(L,E)} > 2θ · tr ρ_{(L,B)} + 1e−10`.
    pub error_violations: Vec<MeasurementLog>,
    pub success_mass: R,
    pub error_mass: R,
    /// Mass of runs that exceed the resampling budget.
    pub frontier_mass: R,
    /// `Σ #B(L) · tr ρ_L` over runs ending within the budget.
    pub expected_resamplings_truncated: R,
    /// `Σ tr ρ_L` over logs ending in `B` within the budget (a lower bound on `E[#B]`).
    pub resampling_mass: R,
}

impl<R: Real> LogTree<R> {
    pub fn passes(&self) -> bool {
        self.violations.is_empty() && self.error_violations.is_empty()
    }
}

const NODE_LIMIT: usize = 2_000_000;

/// Exhaustively expands all valid logs with at most `max_resamples` resamplings,
/// carrying exact unnormalized states, and checks the key-lemma inequalities at
/// every node.
pub fn enumerate_log_tree<R: Real>(
    sim: &Simulator<R>,
    channel: &ChannelKind<R>,
    measure: ProgressMeasure,
    max_resamples: usize,
    keep_nodes: bool,
) -> Result<LogTree<R>> {
    let limits = Limits::from_env()?;
    Limits::check(
        "flaws for log-tree enumeration",
        sim.num_flaws(),
        limits.max_tree_flaws,
    )?;
    Limits::check(
        "qubits for log-tree enumeration",
        sim.n(),
        limits.max_tree_qubits,
    )?;
    let g = sim.graph();
    let p = sim.instance().probabilities();
    let dim = R::from_usize_lossy(sim.dim());
    let theta = channel.theta();
    let mut tree = LogTree {
        max_resamples,
        nodes: Vec::new(),
        node_count: 0,
        root_violation: R::zero(),
        worst_violation: R::zero(),
        violations: Vec::new(),
        worst_error_excess: -R::infinity(),
        error_violations: Vec::new(),
        success_mass: R::zero(),
        error_mass: R::zero(),
        frontier_mass: R::zero(),
        expected_resamplings_truncated: R::zero(),
        resampling_mass: R::zero(),
    };
    let mut stack = vec![(
        MeasurementLog::default(),
        Bookkeeping::new(),
        ComplexMatrix::maximally_mixed(sim.dim()),
        R::one(),
        0usize,
    )];
    let mut visited = 0usize;
    while let Some((log, book, rho, weight, resamples)) = stack.pop() {
        visited += 1;
        Limits::check("log-tree nodes", visited, NODE_LIMIT)?;
        let bound = measure.projector(sim, book.checked)?.scale(weight / dim);
        let violation = psd_violation(&rho, &bound)?;
        if log.is_empty() {
            tree.root_violation = violation;
        }
        tree.worst_violation = tree.worst_violation.max(violation);
        if violation > R::lit(1e-8) {
            tree.violations.push(log.clone());
        }
        let mass = rho.tr();
        if log.outcomes.last() == Some(&Outcome::B) {
            tree.resampling_mass += mass;
        }
        let next = book.next_flaw(g);
        if keep_nodes {
            tree.nodes.push(LogNode {
                log: log.clone(),
                rho: rho.clone(),
                weight,
                checked: book.checked,
                violation,
            });
        }
        let Some(f) = next else {
            tree.success_mass += mass;
            tree.expected_resamplings_truncated += mass * R::from_usize_lossy(resamples);
            continue;
        };
        let out = channel.apply(sim, &rho, book.checked, f)?;
        let bad_trace = out.trace(Label::B);
        if let Some(e) = out.get(Label::E) {
            let e_trace = e.tr();
            let excess = e_trace - R::lit(2.0) * theta * bad_trace;
            tree.worst_error_excess = tree.worst_error_excess.max(excess);
            let mut error_log = log.clone();
            error_log.outcomes.push(Outcome::E);
            if excess > R::lit(1e-10) {
                tree.error_violations.push(error_log);
            }
            tree.error_mass += e_trace;
            tree.expected_resamplings_truncated += e_trace * R::from_usize_lossy(resamples);
        }
        // Push B before G so the depth-first order visits G children first.
        if let Some(b) = out.get(Label::B) {
            if resamples < max_resamples {
                let mut child_book = book.clone();
                child_book.record(g, Outcome::B)?;
                let mut child_log = log.clone();
                child_log.outcomes.push(Outcome::B);
                stack.push((
                    child_log,
                    child_book,
                    resample(b, sim.instance(), f)?,
                    weight * p[f],
                    resamples + 1,
                ));
            } else {
                tree.frontier_mass += bad_trace;
            }
        }
        if let Some(good) = out.get(Label::G) {
            let mut child_book = book.clone();
            child_book.record(g, Outcome::G)?;
            let mut child_log = log.clone();
            child_log.outcomes.push(Outcome::G);
            stack.push((child_log, child_book, good.clone(), weight, resamples));
        }
    }
    tree.node_count = visited;
    Ok(tree)
}

/// Parameters chosen from a satisfied condition, with the quantities they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct ParameterChoice<R: Real> {
    pub params: SolverParams<R>,
    pub bound: ResamplingBound<R>,
    /// `R` (the `n`-scaled resampling bound).
    pub r: R,
    /// `d = max_f |Γ⁺(f)|`.
    pub d: usize,
    /// Uniform gap `γ`.
    pub gamma: R,
    /// Gap of the full Hamiltonian `γ^F`.
    pub gamma_full: R,
}

/// Weak-measurement rounds `t = ⌈ln(3/θ)/(θγ)⌉`.
pub fn rounds_for<R: Real>(theta: R, gamma: R) -> u64 {
    ((R::lit(3.0) / theta).ln() / (theta * gamma))
        .as_f64()
        .ceil()
        .max(1.0) as u64
}

/// Projection rounds `τ = ⌈(|F|/γ)(ln(1/β) + ln(t+1) + ln 4)⌉`.
pub fn projection_rounds_for<R: Real>(flaws: usize, gamma: R, beta: R, t: u64) -> u64 {
    let f = R::from_usize_lossy(flaws);
    let value = f / gamma * (-beta.ln() + R::lit((t + 1) as f64).ln() + R::lit(4.0).ln());
    value.as_f64().ceil().max(1.0) as u64
}

/// `θ = 1/(12R)`, `β = 1/(6(|F| + 6Rd))`, `t`, `τ` from the gap, and a budget of `6R`
/// resamplings, with `R` the `n`-scaled resampling bound.
///
/// `gamma` overrides the exact uniform gap (required above the gap enumeration limit).
pub fn select_parameters<R: Real>(
    sim: &Simulator<R>,
    condition: Condition,
    witness: Option<&Witness<R>>,
    gamma: Option<R>,
    seed: u64,
) -> Result<ParameterChoice<R>> {
    let inst = sim.instance();
    let bound = resampling_bound(inst, condition, witness)?;
    let r = bound.n_scaled;
    let d = sim.graph().max_inclusive_degree();
    let gamma = match gamma {
        Some(g) if g > R::zero() => g,
        Some(g) => {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must be positive, got {g}"),
            })
        }
        None => inst.uniform_gap()?,
    };
    let gamma_full = sim.gap(sim.all_flaws())?;
    let m = sim.num_flaws();
    let theta = R::one() / (R::lit(12.0) * r);
    let beta = R::one()
        / (R::lit(6.0) * (R::from_usize_lossy(m) + R::lit(6.0) * r * R::from_usize_lossy(d)));
    let t = rounds_for(theta, gamma);
    let tau = projection_rounds_for(m, gamma, beta, t);
    let max_resamplings = (R::lit(6.0) * r).floor().as_f64() as usize;
    Ok(ParameterChoice {
        params: SolverParams {
            theta,
            t,
            tau,
            beta,
            max_resamplings,
            seed,
            channel_kind: ChannelChoice::ZenoImplementable,
        },
        bound,
        r,
        d,
        gamma,
        gamma_full,
    })
}

/// Repetitions `⌈4 ln(1/ε)⌉` of the boosted procedure.
pub fn boost_repetitions<R: Real>(epsilon: R) -> usize {
    (R::lit(4.0) * (-epsilon.ln())).as_f64().ceil().max(1.0) as usize
}

/// Final purification rounds `⌈(|F|/γ^F) ln(8/δ)⌉`.
pub fn purification_rounds<R: Real>(flaws: usize, gamma_full: R, delta: R) -> u64 {
    if !gamma_full.is_finite_value() {
        return 0;
    }
    let value = R::from_usize_lossy(flaws) / gamma_full * (R::lit(8.0) / delta).ln();
    value.as_f64().ceil().max(0.0) as u64
}

/// Boosted procedure: up to `⌈4 ln(1/ε)⌉` runs with the given parameters; after a
/// successful run, the approximate kernel projection of the whole instance with
/// `τ = ⌈(|F|/γ^F) ln(8/δ)⌉` is applied and a pass ends the procedure.
///
/// Returns the successful record, or the last failed one; `attempts` counts the
/// repetitions used. A failed purification is reported as `ERROR`.
pub fn boosted_run<R: Real, G: Rng + ?Sized>(
    sim: &Simulator<R>,
    params: &SolverParams<R>,
    delta: R,
    epsilon: R,
    rng: &mut G,
) -> Result<RunRecord<R>> {
    for (name, v) in [("delta", delta), ("epsilon", epsilon)] {
        if !(v > R::zero() && v <= R::one()) {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("must lie in (0, 1], got {v}"),
            });
        }
    }
    params.validate()?;
    let repetitions = boost_repetitions(epsilon);
    let all = sim.all_flaws();
    let tau_final = purification_rounds(sim.num_flaws(), sim.gap(all)?, delta);
    let mut last = None;
    for attempt in 1..=repetitions {
        let mut record = run(sim, params, rng)?;
        record.attempts = attempt;
        if record.terminal == Terminal::Success {
            let out = kernel_projection_approx(
                sim,
                &record.final_state,
                all,
                tau_final,
                ProjectionMode::Superoperator,
            )?;
            let (label, state) = sample_branch(&out, rng)?;
            let passed = label == Label::P;
            let mut purified = finish(
                sim,
                if passed {
                    Terminal::Success
                } else {
                    Terminal::Error
                },
                record.log,
                record.channel_uses,
                state,
            )?;
            purified.attempts = attempt;
            if passed {
                return Ok(purified);
            }
            record = purified;
        }
        last = Some(record);
    }
    Ok(last.expect("at least one repetition"))
}

/// The alternative algorithm that measures `Π^{C∪{f}}` directly and resamples on
/// violation: from `initial` (default `Id/N`), repeatedly take the minimal unchecked
/// flaw `f`; if the state passes the kernel projection of `C ∪ {f}` mark `f`
/// checked, otherwise resample `b(f)` and uncheck `Γ⁺(f)`.
///
/// Stops with `SUCCESS` when all flaws are checked, or `TIMEOUT` after
/// `iterations` loop passes. The log records `G` for passes and `B` for violations.
pub fn alternative_algorithm_run<R: Real, G: Rng + ?Sized>(
    sim: &Simulator<R>,
    initial: Option<&ComplexMatrix<R>>,
    iterations: usize,
    rng: &mut G,
) -> Result<RunRecord<R>> {
    let dim = sim.dim();
    let mut rho = match initial {
        Some(r) => {
            if r.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.dim(),
                });
            }
            r.scale(R::one() / r.tr())
        }
        None => ComplexMatrix::maximally_mixed(dim),
    };
    let g = sim.graph();
    let mut checked = FlawSet::EMPTY;
    let mut log = MeasurementLog::default();
    let id = ComplexMatrix::identity(dim);
    for _ in 0..iterations {
        let Some(f) = g.all().difference(checked).first() else {
            break;
        };
        let pass = sim.kernel(checked.with(f))?;
        let fail = &id - &*pass;
        let out = LabeledState::new()
            .with(Label::G, rho.conjugate_by(&pass).hermitian_part())
            .with(Label::B, rho.conjugate_by(&fail).hermitian_part());
        let (label, state) = sample_branch(&out, rng)?;
        if label == Label::G {
            checked.insert(f);
            rho = state;
            log.outcomes.push(Outcome::G);
        } else {
            rho = resample(&state, sim.instance(), f)?;
            checked = checked.difference(g.inclusive(f));
            log.outcomes.push(Outcome::B);
        }
    }
    let terminal = if checked == g.all() {
        Terminal::Success
    } else {
        Terminal::Timeout
    };
    let uses = log.len();
    finish(sim, terminal, log, uses, rho)
}

/// `dim ker H`.
pub fn ground_space_dimension<R: Real>(sim: &Simulator<R>) -> Result<usize> {
    Ok(projector_rank(&*sim.ground_projector()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::zeno_rounds;
    use crate::fixtures::{appendix_f, random_instance, single_flaw, ProjectorKind, Topology};
    use crate::instance::QsatInstance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn sim(inst: QsatInstance<f64>) -> Simulator<f64> {
        Simulator::new(inst).unwrap()
    }

    fn path3() -> DependencyGraph {
        DependencyGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    fn log(s: &str) -> MeasurementLog {
        MeasurementLog::new(
            s.chars()
                .map(|c| match c {
                    'G' => Outcome::G,
                    'B' => Outcome::B,
                    _ => Outcome::E,
                })
                .collect(),
        )
    }

    fn noncommuting(seed: u64) -> Simulator<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sim(random_instance(3, 2, 1, Topology::Chain, ProjectorKind::Haar, &mut rng).unwrap())
    }

    #[test]
    fn replay_tracks_rounds() {
        let g = path3();
        // f0 bad (I={0}, C=∅), then f2 good, round ends since Γ⁺({0}) ∪ {2} = F.
        let r = log("BG").replay(&g).unwrap();
        assert_eq!(r.addressed, vec![0, 2]);
        assert_eq!(r.checked(), FlawSet::singleton(2));
        assert_eq!(r.next, Some(0));
        let r = log("BGB").replay(&g).unwrap();
        assert_eq!(r.book.rounds, vec![FlawSet::singleton(0)]);
        assert_eq!(r.current(), FlawSet::singleton(0));
        assert_eq!(r.stable_set_sequence().sets.len(), 2);
        let r = log("GGG").replay(&g).unwrap();
        assert_eq!(r.terminal, Some(Terminal::Success));
        assert_eq!(r.next, None);
    }

    #[test]
    fn replay_rejects_invalid_logs() {
        let g = path3();
        assert!(matches!(log("EG").replay(&g), Err(Error::InvalidLog(_))));
        assert!(matches!(log("GGGG").replay(&g), Err(Error::InvalidLog(_))));
        assert_eq!(
            log("GGE").replay(&g).unwrap().terminal,
            Some(Terminal::Error)
        );
    }

    #[test]
    fn bad_outcome_unchecks_neighbours() {
        let g = path3();
        // G on 0 and 1, then B on 2 removes 1 from C but keeps 0.
        let r = log("GGB").replay(&g).unwrap();
        assert_eq!(r.checked(), FlawSet::singleton(0));
        assert_eq!(r.resampled, vec![2]);
        assert_eq!(r.weight(&[0.5, 0.25, 0.1]), 0.1);
    }

    #[test]
    fn bad_logs_map_injectively_to_stable_set_sequences() {
        let g = DependencyGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let mut frontier = vec![MeasurementLog::default()];
        let mut seen = HashSet::new();
        let mut count = 0;
        while let Some(l) = frontier.pop() {
            let r = l.replay(&g).unwrap();
            if l.outcomes.last() == Some(&Outcome::B) {
                let seq = r.stable_set_sequence();
                assert!(seq.is_valid(&g));
                assert_eq!(seq.size(), l.count(Outcome::B));
                assert!(seen.insert(seq), "{l}");
                count += 1;
            }
            if r.next.is_some() && l.count(Outcome::B) < 4 {
                for o in [Outcome::G, Outcome::B] {
                    let mut child = l.clone();
                    child.outcomes.push(o);
                    frontier.push(child);
                }
            }
        }
        assert!(count > 50);
    }

    #[test]
    fn single_flaw_geometric_resamplings() {
        for (k, p) in [(1usize, 0.5f64), (2, 0.25)] {
            let s = sim(single_flaw(k, 1).unwrap());
            let tree = enumerate_log_tree(
                &s,
                &ChannelKind::Projective,
                ProgressMeasure::Exact,
                40,
                true,
            )
            .unwrap();
            let exact = p / (1.0 - p);
            let partial: f64 = (1..=40).map(|j| j as f64 * p.powi(j) * (1.0 - p)).sum();
            assert!((tree.expected_resamplings_truncated - partial).abs() < 1e-12);
            assert!((tree.expected_resamplings_truncated - exact).abs() < 1e-9);
            assert!((tree.frontier_mass - p.powi(41)).abs() < 1e-15);
            assert!(tree.passes());
            assert_eq!(tree.nodes[0].violation, 0.0);
        }
    }

    #[test]
    fn root_satisfies_key_lemma_with_equality() {
        let s = noncommuting(1);
        let tree =
            enumerate_log_tree(&s, &ChannelKind::Exact, ProgressMeasure::Exact, 0, true).unwrap();
        let root = &tree.nodes[0];
        assert!(root.log.is_empty());
        assert!(root.rho.max_abs_diff(&ComplexMatrix::maximally_mixed(8)) < 1e-15);
        assert_eq!(root.violation, 0.0);
    }

    #[test]
    fn key_lemma_exact_channel() {
        let s = noncommuting(2);
        let tree =
            enumerate_log_tree(&s, &ChannelKind::Exact, ProgressMeasure::Exact, 3, false).unwrap();
        assert!(tree.passes(), "{:?}", tree.violations);
        let total = tree.success_mass + tree.error_mass + tree.frontier_mass;
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(tree.error_mass, 0.0);
    }

    #[test]
    fn key_lemma_zeno_channel() {
        let s = noncommuting(3);
        let theta = 0.05;
        let t = zeno_rounds(theta, s.instance().uniform_gap().unwrap());
        let channel = ChannelKind::Zeno {
            theta,
            t,
            mode: ZenoMode::Ideal,
        };
        let tree = enumerate_log_tree(&s, &channel, ProgressMeasure::Exact, 3, false).unwrap();
        assert!(
            tree.passes(),
            "{:?} {:?}",
            tree.violations,
            tree.error_violations
        );
        let total = tree.success_mass + tree.error_mass + tree.frontier_mass;
        assert!((total - 1.0).abs() < 1e-9);
        assert!(
            tree.error_mass <= 2.0 * theta * (tree.resampling_mass + tree.frontier_mass) + 1e-10
        );
    }

    #[test]
    fn projective_channel_violates_key_lemma_without_commutation() {
        let s = noncommuting(4);
        let tree = enumerate_log_tree(
            &s,
            &ChannelKind::Projective,
            ProgressMeasure::Exact,
            2,
            false,
        )
        .unwrap();
        assert!(!tree.violations.is_empty());
    }

    #[test]
    fn enumeration_respects_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = sim(
            random_instance(6, 2, 1, Topology::Chain, ProjectorKind::Diagonal, &mut rng).unwrap(),
        );
        assert!(matches!(
            enumerate_log_tree(
                &s,
                &ChannelKind::Projective,
                ProgressMeasure::Exact,
                2,
                false
            ),
            Err(Error::LimitExceeded { .. })
        ));
    }

    #[test]
    fn commuting_runs_end_in_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = sim(
            random_instance(4, 2, 1, Topology::Cycle, ProjectorKind::Diagonal, &mut rng).unwrap(),
        );
        let params = SolverParams::simple(ChannelChoice::Projective, 1000, 0);
        for _ in 0..50 {
            let record = run(&s, &params, &mut rng).unwrap();
            assert_eq!(record.terminal, Terminal::Success);
            assert!(record.residual_energy <= 1e-8);
            assert!((record.ground_overlap - 1.0).abs() < 1e-9);
            assert_eq!(record.resample_count, record.log.count(Outcome::B));
            let replay = record.log.replay(s.graph()).unwrap();
            assert_eq!(replay.terminal, Some(Terminal::Success));
            assert!(replay.stable_set_sequence().is_valid(s.graph()));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let s = noncommuting(7);
        let params = SolverParams::simple(ChannelChoice::Exact, 100, 0);
        let a = run(&s, &params, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = run(&s, &params, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_channel_keeps_state_in_checked_kernel() {
        let s = noncommuting(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let channel = ChannelKind::Exact;
        let g = s.graph();
        for _ in 0..20 {
            let mut book = Bookkeeping::new();
            let mut rho = ComplexMatrix::maximally_mixed(s.dim());
            let mut steps = 0;
            while let Some(f) = book.next_flaw(g) {
                let leak = 1.0 - rho.trace_product(&s.kernel(book.checked).unwrap()).re;
                assert!(leak <= (steps + 1) as f64 * 1e-8);
                let out = channel.apply(&s, &rho, book.checked, f).unwrap();
                let (label, state) = out.sample(&mut rng).unwrap();
                let outcome = Outcome::from_label(label).unwrap();
                rho = if outcome == Outcome::B {
                    resample(&state, s.instance(), f).unwrap()
                } else {
                    state
                };
                book.record(g, outcome).unwrap();
                steps += 1;
                if steps > 200 {
                    break;
                }
            }
        }
    }

    #[test]
    fn timeout_when_budget_exhausted() {
        let s = sim(single_flaw(1, 1).unwrap());
        let params = SolverParams::simple(ChannelChoice::Projective, 0, 0);
        let mut timeouts = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let r = run(&s, &params, &mut rng).unwrap();
            assert_eq!(r.resample_count, 0);
            if r.terminal == Terminal::Timeout {
                timeouts += 1;
                assert!(r.log.is_empty());
            }
        }
        assert!(timeouts > 30 && timeouts < 70);
    }

    #[test]
    fn appendix_f_exact_channel_succeeds() {
        let s = sim(appendix_f(0.01).unwrap());
        let params = SolverParams::simple(ChannelChoice::Exact, 10_000, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let r = run(&s, &params, &mut rng).unwrap();
            assert_eq!(r.terminal, Terminal::Success);
            assert!(r.ground_overlap >= 1.0 - 1e-6);
        }
    }

    #[test]
    fn alternative_algorithm_preserves_checked_invariant() {
        let s = sim(appendix_f(0.01).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let start = ComplexMatrix::basis_projector(4, 1);
        let r = alternative_algorithm_run(&s, Some(&start), 100, &mut rng).unwrap();
        assert_eq!(r.channel_uses, r.log.len());
        assert!((r.final_state.tr() - 1.0).abs() < 1e-12);
        // Replaying the checked set, the state always lies in the checked kernel.
        let mut checked = FlawSet::EMPTY;
        let g = s.graph();
        for o in &r.log.outcomes {
            let f = g.all().difference(checked).first().unwrap();
            if *o == Outcome::G {
                checked.insert(f);
            } else {
                checked = checked.difference(g.inclusive(f));
            }
        }
        let leak = 1.0 - r.final_state.trace_product(&s.kernel(checked).unwrap()).re;
        assert!(leak < 1e-9);
    }

    #[test]
    fn parameter_formulas() {
        assert_eq!(
            rounds_for(1.0 / 12.0, 0.5f64),
            (12.0 * 36f64.ln() / 0.5).ceil() as u64
        );
        let beta = 1.0 / (6.0 * (2.0 + 6.0 * 1.0 * 1.0));
        assert!((beta - 1.0 / 48.0f64).abs() < 1e-15);
        let tau = projection_rounds_for(2, 1.0f64, beta, 10);
        assert_eq!(
            tau,
            (2.0 * (48f64.ln() + 11f64.ln() + 4f64.ln())).ceil() as u64
        );
        assert_eq!(boost_repetitions(1.0 / std::f64::consts::E), 4);
        assert_eq!(boost_repetitions(0.1f64), 10);
        assert_eq!(
            purification_rounds(2, 1.0f64, 1.0 / 8.0),
            (2.0 * 64f64.ln()).ceil() as u64
        );
    }

    #[test]
    fn select_parameters_uses_bound() {
        let s = sim(single_flaw(2, 1).unwrap());
        let choice = select_parameters(&s, Condition::Slc, None, None, 7).unwrap();
        let r = choice.r;
        assert!((choice.params.theta - 1.0 / (12.0 * r)).abs() < 1e-15);
        assert_eq!(choice.params.max_resamplings, (6.0 * r).floor() as usize);
        assert_eq!(choice.d, 1);
        assert_eq!(choice.gamma, 1.0);
        assert_eq!(choice.params.t, rounds_for(choice.params.theta, 1.0));
        assert_eq!(choice.params.seed, 7);
        assert!(select_parameters(&s, Condition::Slc, None, Some(0.0), 0).is_err());
    }

    #[test]
    fn select_parameters_requires_condition() {
        let inst = QsatInstance::new(
            1,
            vec![
                crate::instance::Flaw::new("a", vec![0], ComplexMatrix::basis_projector(2, 1))
                    .unwrap(),
                crate::instance::Flaw::new("b", vec![0], ComplexMatrix::basis_projector(2, 0))
                    .unwrap(),
            ],
        )
        .unwrap();
        let s = sim(inst);
        assert!(matches!(
            select_parameters(&s, Condition::Shc, None, None, 0),
            Err(Error::ConditionNotSatisfied(_))
        ));
    }

    #[test]
    fn boosted_run_on_easy_commuting_instance() {
        let s = sim(single_flaw(2, 1).unwrap());
        let choice = select_parameters(&s, Condition::Shc, None, None, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let r = boosted_run(&s, &choice.params, 0.1, 0.1, &mut rng).unwrap();
        assert_eq!(r.terminal, Terminal::Success);
        assert!(r.ground_overlap >= 0.9);
        assert!(r.attempts >= 1);
    }

    #[test]
    fn existential_dimension() {
        let s = sim(appendix_f(0.01).unwrap());
        assert_eq!(ground_space_dimension(&s).unwrap(), 1);
    }

    #[test]
    fn log_and_params_serialize() {
        let l = log("GBE");
        assert_eq!(serde_json::to_string(&l).unwrap(), r#"["G","B","E"]"#);
        assert_eq!(l.to_string(), "GBE");
        let p = SolverParams::<f64>::simple(ChannelChoice::ZenoImplementable, 5, 1);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"zeno-implementable\""));
        assert_eq!(serde_json::from_str::<SolverParams<f64>>(&json).unwrap(), p);
        assert_eq!(
            "zeno-ideal".parse::<ChannelChoice>().unwrap(),
            ChannelChoice::ZenoIdeal
        );
    }
}
