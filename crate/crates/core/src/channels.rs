//! Quantum operations on flaws: resampling, weak measurement, the exact rotation
//! channel, kernel projections, the Zeno measurement channel, and checks of the
//! progressive-channel properties.
//!
//! Every randomized operation has a deterministic averaged form (superoperator)
//! used for exact verification; sampling happens one level up, by drawing a
//! label of a [`LabeledState`] with probability proportional to its trace.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::Hash;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{DependencyGraph, FlawSet, QsatInstance};
use crate::limits::Limits;
use crate::linalg::{
    complex_product, depolarize_qubits, hermitian_eig, kernel_projector, psd_violation, svd,
    trace_norm, trace_norm_hermitian, ComplexMatrix, Svd,
};
use crate::random::{random_density, random_density_in, random_pure_density};
use crate::scalar::{Real, C};

/// Classical label attached to a branch of a quantum-classical state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    /// Good: the flaw is now certified absent.
    G,
    /// Bad: the flaw was detected.
    B,
    /// Error.
    E,
    /// Kernel projection passed.
    P,
    /// Kernel projection failed (depolarized).
    D,
    /// Weak-measurement detection outcome.
    #[serde(rename = "b")]
    WeakB,
    /// Weak-measurement pass outcome.
    #[serde(rename = "g")]
    WeakG,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::G => "G",
            Label::B => "B",
            Label::E => "E",
            Label::P => "P",
            Label::D => "D",
            Label::WeakB => "b",
            Label::WeakG => "g",
        };
        f.write_str(s)
    }
}

/// The two sources of error of the Zeno channel, kept apart for diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct ErrorParts<R: Real> {
    /// Leakage out of `V^C` during the weak-measurement rounds.
    pub e1: ComplexMatrix<R>,
    /// Final state failing the projection onto `V^{C∪{f}}`.
    pub e2: ComplexMatrix<R>,
}

/// Unnormalized branches of a quantum-classical state, keyed by label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct LabeledState<R: Real> {
    pub branches: BTreeMap<Label, ComplexMatrix<R>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_parts: Option<ErrorParts<R>>,
}

impl<R: Real> LabeledState<R> {
    pub fn new() -> Self {
        Self {
            branches: BTreeMap::new(),
            error_parts: None,
        }
    }

    pub fn with(mut self, label: Label, branch: ComplexMatrix<R>) -> Self {
        self.branches.insert(label, branch);
        self
    }

    pub fn get(&self, label: Label) -> Option<&ComplexMatrix<R>> {
        self.branches.get(&label)
    }

    /// Trace of a branch; zero when the label is absent.
    pub fn trace(&self, label: Label) -> R {
        self.get(label).map_or_else(R::zero, |m| m.tr())
    }

    pub fn total_trace(&self) -> R {
        self.branches
            .values()
            .fold(R::zero(), |acc, m| acc + m.tr())
    }

    /// `Σ_label ‖self_label − other_label‖₁`.
    pub fn distance(&self, other: &Self) -> R {
        let mut labels: Vec<Label> = self.branches.keys().copied().collect();
        labels.extend(other.branches.keys().copied());
        labels.sort();
        labels.dedup();
        labels
            .into_iter()
            .map(|l| match (self.get(l), other.get(l)) {
                (Some(a), Some(b)) => trace_norm(&(a - b)),
                (Some(a), None) | (None, Some(a)) => trace_norm(a),
                (None, None) => R::zero(),
            })
            .fold(R::zero(), |acc, d| acc + d)
    }

    /// Largest negative eigenvalue magnitude over all branches (zero if all PSD).
    pub fn psd_defect(&self) -> R {
        self.branches.values().fold(R::zero(), |acc, m| {
            let lmin = hermitian_eig(m)
                .eigenvalues
                .first()
                .copied()
                .unwrap_or_else(R::zero);
            acc.max(-lmin)
        })
    }

    /// Largest Hermiticity defect over all branches.
    pub fn hermiticity_defect(&self) -> R {
        self.branches
            .values()
            .fold(R::zero(), |acc, m| acc.max(m.hermiticity_defect()))
    }

    /// Draws a label with probability proportional to its branch trace and returns
    /// the branch normalized to unit trace. `None` if every branch vanishes.
    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> Option<(Label, ComplexMatrix<R>)> {
        let weights: Vec<(Label, f64)> = self
            .branches
            .iter()
            .map(|(l, m)| (*l, m.tr().as_f64().max(0.0)))
            .collect();
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        if total <= 0.0 || !total.is_finite() {
            return None;
        }
        let mut u = rng.random::<f64>() * total;
        let mut chosen = None;
        for (l, w) in &weights {
            if *w > 0.0 {
                chosen = Some(*l);
                if u < *w {
                    break;
                }
                u -= *w;
            }
        }
        let label = chosen?;
        let branch = &self.branches[&label];
        Some((label, branch.scale(R::one() / branch.tr())))
    }
}

impl<R: Real> Default for LabeledState<R> {
    fn default() -> Self {
        Self::new()
    }
}

/// Dense superoperator acting on column-major vectorized `N × N` matrices.
pub type Superoperator<R> = DMatrix<C<R>>;

fn superop_of<R: Real>(l: &ComplexMatrix<R>) -> Superoperator<R> {
    let m = l.as_dmatrix();
    m.map(|z| z.conj()).kronecker(m)
}

fn apply_superop<R: Real>(s: &Superoperator<R>, rho: &ComplexMatrix<R>) -> ComplexMatrix<R> {
    let n = rho.dim();
    let v = DMatrix::from_column_slice(n * n, 1, rho.as_dmatrix().as_slice());
    let out = complex_product(s, &v);
    ComplexMatrix::from_dmatrix(DMatrix::from_column_slice(n, n, out.as_slice()))
        .expect("square")
        .hermitian_part()
}

fn superop_power<R: Real>(base: &Superoperator<R>, mut k: u64) -> Superoperator<R> {
    let dim = base.nrows();
    let mut result = DMatrix::identity(dim, dim);
    let mut square = base.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = complex_product(&result, &square);
        }
        k >>= 1;
        if k > 0 {
            square = complex_product(&square, &square);
        }
    }
    result
}

/// `(Λ^t, Σ_{i<t} Λ^i)` by binary doubling.
fn power_and_sum<R: Real>(
    lambda: &Superoperator<R>,
    t: u64,
) -> (Superoperator<R>, Superoperator<R>) {
    let dim = lambda.nrows();
    let mut power: Superoperator<R> = DMatrix::identity(dim, dim);
    let mut sum: Superoperator<R> = DMatrix::zeros(dim, dim);
    if t == 0 {
        return (power, sum);
    }
    for bit in (0..64 - t.leading_zeros()).rev() {
        sum = &sum + complex_product(&power, &sum);
        power = complex_product(&power, &power);
        if (t >> bit) & 1 == 1 {
            sum += &power;
            power = complex_product(&power, lambda);
        }
    }
    (power, sum)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct ZenoKey {
    c: FlawSet,
    f: usize,
    theta_bits: u64,
    t: u64,
    tau: u64,
}

struct ZenoSuperops<R: Real> {
    /// `Λ^t`.
    power: Superoperator<R>,
    /// `Σ_{i<t} Λ^i`.
    sum: Superoperator<R>,
}

/// SVD of `Π_f Π_{V^C}` with the rotation used by the exact channel.
#[derive(Clone, Debug)]
pub struct ExactRotation<R: Real> {
    pub svd: Svd<R>,
    pub rot: ComplexMatrix<R>,
}

/// `W sgnΣ U† + (Id − W sgnΣ W†)(Id − U sgnΣ U†)`.
pub fn rotation_from_svd<R: Real>(svd: &Svd<R>) -> ComplexMatrix<R> {
    let tol = R::sign_tol();
    let dim = svd.w.nrows();
    let id = ComplexMatrix::identity(dim);
    let core = svd.signed_product(&svd.w, &svd.u, tol);
    let left = &id - &svd.signed_product(&svd.w, &svd.w, tol);
    let right = &id - &svd.signed_product(&svd.u, &svd.u, tol);
    &core + &(&left * &right)
}

fn cached<K: Eq + Hash + Copy, V>(
    lock: &Cache<K, V>,
    key: K,
    build: impl FnOnce() -> Result<V>,
) -> Result<Arc<V>> {
    if let Some(v) = lock.read().expect("cache lock").get(&key) {
        return Ok(Arc::clone(v));
    }
    let value = Arc::new(build()?);
    let mut guard = lock.write().expect("cache lock");
    Ok(Arc::clone(guard.entry(key).or_insert(value)))
}

/// A simulable instance together with caches of derived operators
/// (kernel projectors, gaps, rotations, superoperators).
type Cache<K, V> = RwLock<HashMap<K, Arc<V>>>;

pub struct Simulator<R: Real> {
    instance: QsatInstance<R>,
    graph: DependencyGraph,
    kernels: Cache<FlawSet, ComplexMatrix<R>>,
    gaps: Cache<FlawSet, R>,
    rotations: Cache<(FlawSet, usize), ExactRotation<R>>,
    phis: Cache<(FlawSet, u64), Superoperator<R>>,
    zeno: Cache<ZenoKey, ZenoSuperops<R>>,
}

impl<R: Real> fmt::Debug for Simulator<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulator")
            .field("n", &self.instance.n)
            .field("flaws", &self.instance.num_flaws())
            .finish()
    }
}

impl<R: Real> Simulator<R> {
    pub fn new(instance: QsatInstance<R>) -> Result<Self> {
        instance.check_simulable()?;
        instance.projectors()?;
        let graph = instance.dependency_graph();
        Ok(Self {
            instance,
            graph,
            kernels: RwLock::default(),
            gaps: RwLock::default(),
            rotations: RwLock::default(),
            phis: RwLock::default(),
            zeno: RwLock::default(),
        })
    }

    pub fn instance(&self) -> &QsatInstance<R> {
        &self.instance
    }

    pub fn graph(&self) -> &DependencyGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.instance.n
    }

    pub fn dim(&self) -> usize {
        self.instance.dim()
    }

    pub fn num_flaws(&self) -> usize {
        self.instance.num_flaws()
    }

    pub fn all_flaws(&self) -> FlawSet {
        self.instance.all_flaws()
    }

    /// Embedded projector `Π_f`.
    pub fn projector(&self, f: usize) -> Result<&ComplexMatrix<R>> {
        self.instance.projector(f)
    }

    /// `Π_{V^S}`: projector onto the common kernel of the flaws in `S` (`Id` for `S = ∅`).
    pub fn kernel(&self, s: FlawSet) -> Result<Arc<ComplexMatrix<R>>> {
        cached(&self.kernels, s, || {
            if s.is_empty() {
                Ok(ComplexMatrix::identity(self.dim()))
            } else {
                kernel_projector(&self.instance.sub_hamiltonian(s)?, R::zero_tol())
            }
        })
    }

    /// `γ^S` (`+∞` when `H^S = 0`).
    pub fn gap(&self, s: FlawSet) -> Result<R> {
        cached(&self.gaps, s, || self.instance.subset_gap(s)).map(|g| *g)
    }

    /// Projector onto the satisfying subspace of the whole instance.
    pub fn ground_projector(&self) -> Result<Arc<ComplexMatrix<R>>> {
        self.kernel(self.all_flaws())
    }

    /// SVD and rotation of `Π_f Π_{V^C}`.
    pub fn exact_rotation(&self, c: FlawSet, f: usize) -> Result<Arc<ExactRotation<R>>> {
        cached(&self.rotations, (c, f), || {
            let product = self.projector(f)? * &*self.kernel(c)?;
            let svd = svd(&product);
            let rot = rotation_from_svd(&svd);
            Ok(ExactRotation { svd, rot })
        })
    }

    /// Superoperator `Φ_S^τ` of the approximate kernel projection (P branch).
    pub fn projection_superoperator(&self, s: FlawSet, tau: u64) -> Result<Arc<Superoperator<R>>> {
        Limits::check(
            "qubits for superoperators",
            self.n(),
            Limits::from_env()?.max_superoperator_qubits,
        )?;
        cached(&self.phis, (s, tau), || {
            let d2 = self.dim() * self.dim();
            if s.is_empty() || tau == 0 {
                return Ok(DMatrix::identity(d2, d2));
            }
            let id = ComplexMatrix::identity(self.dim());
            let mut phi: Superoperator<R> = DMatrix::zeros(d2, d2);
            for f in s.iter() {
                phi += superop_of(&(&id - self.projector(f)?));
            }
            phi.unscale_mut(R::from_usize_lossy(s.len()));
            Ok(superop_power(&phi, tau))
        })
    }

    fn zeno_superops(&self, key: ZenoKey, theta: R) -> Result<Arc<ZenoSuperops<R>>> {
        cached(&self.zeno, key, || {
            let (_, m_g) = weak_kraus(self.projector(key.f)?, theta);
            let phi = self.projection_superoperator(key.c, key.tau)?;
            let lambda = complex_product(&phi, &superop_of(&m_g));
            let (power, sum) = power_and_sum(&lambda, key.t);
            Ok(ZenoSuperops { power, sum })
        })
    }
}

fn check_dim<R: Real>(rho: &ComplexMatrix<R>, dim: usize) -> Result<()> {
    if rho.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: rho.dim(),
        });
    }
    Ok(())
}

fn check_theta<R: Real>(theta: R) -> Result<()> {
    if !(theta > R::zero() && theta <= R::one()) {
        return Err(Error::InvalidParameter {
            name: "theta",
            reason: format!("must lie in (0, 1], got {theta}"),
        });
    }
    Ok(())
}

/// `R_f(ρ)`: replaces the qubits of flaw `f` by maximally mixed qubits.
pub fn resample<R: Real>(
    rho: &ComplexMatrix<R>,
    inst: &QsatInstance<R>,
    f: usize,
) -> Result<ComplexMatrix<R>> {
    check_dim(rho, inst.dim())?;
    let flaw = inst.flaws.get(f).ok_or(Error::IndexOutOfRange {
        index: f,
        n: inst.num_flaws(),
    })?;
    depolarize_qubits(rho, &flaw.support, inst.n)
}

/// Kraus pair `(M_b, M_g) = (√θ Π, Id − (1 − √(1−θ)) Π)`.
pub fn weak_kraus<R: Real>(
    pi: &ComplexMatrix<R>,
    theta: R,
) -> (ComplexMatrix<R>, ComplexMatrix<R>) {
    let m_b = pi.scale(theta.sqrt());
    let m_g = &ComplexMatrix::identity(pi.dim()) - &pi.scale(R::one() - (R::one() - theta).sqrt());
    (m_b, m_g)
}

/// Weak measurement of the embedded projector `pi` with intensity `θ` (branches `b`, `g`).
pub fn weak_measure<R: Real>(
    rho: &ComplexMatrix<R>,
    pi: &ComplexMatrix<R>,
    theta: R,
) -> Result<LabeledState<R>> {
    check_theta(theta)?;
    check_dim(rho, pi.dim())?;
    let (m_b, m_g) = weak_kraus(pi, theta);
    Ok(LabeledState::new()
        .with(Label::WeakB, rho.conjugate_by(&m_b).hermitian_part())
        .with(Label::WeakG, rho.conjugate_by(&m_g).hermitian_part()))
}

/// Projective measurement of `Π_f`: `G = (Id−Π_f)ρ(Id−Π_f)`, `B = Π_f ρ Π_f`.
pub fn projective_channel<R: Real>(
    sim: &Simulator<R>,
    rho: &ComplexMatrix<R>,
    f: usize,
) -> Result<LabeledState<R>> {
    check_dim(rho, sim.dim())?;
    let pi = sim.projector(f)?;
    let q = &ComplexMatrix::identity(sim.dim()) - pi;
    Ok(LabeledState::new()
        .with(Label::G, rho.conjugate_by(&q).hermitian_part())
        .with(Label::B, rho.conjugate_by(pi).hermitian_part()))
}

/// Rejects inputs with more than `1e−8 · tr ρ` weight outside `V^C`.
fn check_supported<R: Real>(rho: &ComplexMatrix<R>, pi_v: &ComplexMatrix<R>) -> Result<()> {
    let total = rho.tr();
    let inside = rho.trace_product(pi_v).re;
    let leak = total - inside;
    if leak > R::lit(1e-8) * total.abs().max(R::lit(1e-300)) {
        return Err(Error::Precondition(format!(
            "input has weight {:e} outside V^C (trace {:e})",
            leak.as_f64(),
            total.as_f64()
        )));
    }
    Ok(())
}

/// The exact channel: `G = Π_{V^{C∪f}} ρ Π_{V^{C∪f}}`, `B = Rot (Id−Π_{V^{C∪f}}) ρ (Id−Π_{V^{C∪f}}) Rot†`.
///
/// `ρ` must be supported on `V^C`; leaking inputs are rejected rather than projected.
pub fn exact_channel<R: Real>(
    sim: &Simulator<R>,
    rho: &ComplexMatrix<R>,
    c: FlawSet,
    f: usize,
) -> Result<LabeledState<R>> {
    check_dim(rho, sim.dim())?;
    let pi_v = sim.kernel(c)?;
    check_supported(rho, &pi_v)?;
    let pi_vf = sim.kernel(c.with(f))?;
    let rotation = sim.exact_rotation(c, f)?;
    let q = &ComplexMatrix::identity(sim.dim()) - &*pi_vf;
    let bad = rho.conjugate_by(&q).conjugate_by(&rotation.rot);
    Ok(LabeledState::new()
        .with(Label::G, rho.conjugate_by(&pi_vf).hermitian_part())
        .with(Label::B, bad.hermitian_part()))
}

/// Residuals of the subspace identities for `Π_f Π_{V^C} = W Σ U†`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct SubspaceIdentities<R: Real> {
    /// `‖Π_{im(Π_f Π_V)} − W sgnΣ W†‖₁`.
    pub image_residual: R,
    /// `‖(Π_V − Π_{V_f}) − U sgnΣ U†‖₁`.
    pub difference_residual: R,
    /// Violation of `Π_{im(Π_f Π_V)} ⪯ Π_f Π_{V^{C∖Γ⁺(f)}}`.
    pub domination_violation: R,
    /// `max_i |σ_i − sgn σ_i|` (zero exactly when the projectors commute).
    pub sign_deviation: R,
    /// Smallest nonzero `σ²` (`+∞` if `Π_f Π_V = 0`).
    pub sigma_min_sq: R,
    /// `γ^{C∪{f}}`.
    pub gap: R,
}

impl<R: Real> SubspaceIdentities<R> {
    pub fn max_residual(&self) -> R {
        self.image_residual
            .max(self.difference_residual)
            .max(self.domination_violation)
    }
}

pub fn subspace_identities_check<R: Real>(
    sim: &Simulator<R>,
    c: FlawSet,
    f: usize,
) -> Result<SubspaceIdentities<R>> {
    let dim = sim.dim();
    let id = ComplexMatrix::identity(dim);
    let pi_f = sim.projector(f)?;
    let pi_v = sim.kernel(c)?;
    let pi_vf = sim.kernel(c.with(f))?;
    let outside = c.difference(sim.graph().inclusive(f));
    let pi_far = sim.kernel(outside)?;
    let a = pi_f * &*pi_v;
    let rotation = sim.exact_rotation(c, f)?;
    let svd = &rotation.svd;
    let tol = R::sign_tol();

    let image = &id - &kernel_projector(&(&a * &a.adjoint()), R::zero_tol())?;
    let w_sgn_w = svd.signed_product(&svd.w, &svd.w, tol);
    let u_sgn_u = svd.signed_product(&svd.u, &svd.u, tol);
    let image_residual = trace_norm_hermitian(&(&image - &w_sgn_w).hermitian_part());
    let difference = &*pi_v - &*pi_vf;
    let difference_residual = trace_norm_hermitian(&(&difference - &u_sgn_u).hermitian_part());
    let bound = (pi_f * &*pi_far).hermitian_part();
    let domination_violation = psd_violation(&image, &bound)?;

    let pattern = svd.sign_pattern(tol);
    let mut sign_deviation = R::zero();
    let mut sigma_min_sq = R::infinity();
    for (s, keep) in svd.sigma.iter().zip(&pattern) {
        if *keep {
            sign_deviation = sign_deviation.max((R::one() - *s).abs());
            sigma_min_sq = sigma_min_sq.min(*s * *s);
        } else {
            sign_deviation = sign_deviation.max(s.abs());
        }
    }
    Ok(SubspaceIdentities {
        image_residual,
        difference_residual,
        domination_violation,
        sign_deviation,
        sigma_min_sq,
        gap: sim.gap(c.with(f))?,
    })
}

/// Destructive kernel projection: `P = Π_V ρ Π_V`, `D = tr((Id−Π_V)ρ(Id−Π_V)) · Id/N`.
pub fn kernel_projection_ideal<R: Real>(
    sim: &Simulator<R>,
    rho: &ComplexMatrix<R>,
    s: FlawSet,
) -> Result<LabeledState<R>> {
    check_dim(rho, sim.dim())?;
    let pi_v = sim.kernel(s)?;
    let q = &ComplexMatrix::identity(sim.dim()) - &*pi_v;
    let lost = rho.conjugate_by(&q).tr();
    Ok(LabeledState::new()
        .with(Label::P, rho.conjugate_by(&pi_v).hermitian_part())
        .with(
            Label::D,
            ComplexMatrix::maximally_mixed(sim.dim()).scale(lost),
        ))
}

/// How the approximate kernel projection is evaluated.
pub enum ProjectionMode<'a> {
    /// The exact averaged channel.
    Superoperator,
    /// One sampled run; the result has a single branch carrying all of the trace.
    Trajectory(&'a mut dyn RngCore),
}

impl fmt::Debug for ProjectionMode<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjectionMode::Superoperator => f.write_str("Superoperator"),
            ProjectionMode::Trajectory(_) => f.write_str("Trajectory"),
        }
    }
}

/// Approximate kernel projection by `τ` rounds of random flaw measurements.
///
/// The P branch is the `τ`-fold iterate of `ρ ↦ (1/|S|) Σ_f (Id−Π_f)ρ(Id−Π_f)`;
/// the discarded weight is returned depolarized in the D branch.
pub fn kernel_projection_approx<R: Real>(
    sim: &Simulator<R>,
    rho: &ComplexMatrix<R>,
    s: FlawSet,
    tau: u64,
    mode: ProjectionMode<'_>,
) -> Result<LabeledState<R>> {
    check_dim(rho, sim.dim())?;
    let dim = sim.dim();
    let total = rho.tr();
    if s.is_empty() || tau == 0 {
        return Ok(LabeledState::new()
            .with(Label::P, rho.clone())
            .with(Label::D, ComplexMatrix::zeros(dim)));
    }
    let id = ComplexMatrix::identity(dim);
    let complements = s
        .iter()
        .map(|f| Ok(&id - sim.projector(f)?))
        .collect::<Result<Vec<_>>>()?;
    match mode {
        ProjectionMode::Superoperator => {
            let p = if prefer_direct_iteration(dim, s.len(), tau) {
                let weight = R::one() / R::from_usize_lossy(s.len());
                let mut state = rho.clone();
                for _ in 0..tau {
                    let mut next = ComplexMatrix::zeros(dim);
                    for q in &complements {
                        next += &state.conjugate_by(q);
                    }
                    state = next.scale(weight).hermitian_part();
                }
                state
            } else {
                apply_superop(&*sim.projection_superoperator(s, tau)?, rho)
            };
            let lost = total - p.tr();
            Ok(LabeledState::new()
                .with(Label::P, p)
                .with(Label::D, ComplexMatrix::maximally_mixed(dim).scale(lost)))
        }
        ProjectionMode::Trajectory(rng) => {
            let mut state = rho.clone();
            for _ in 0..tau {
                let q = &complements[rng.random_range(0..complements.len())];
                let next = state.conjugate_by(q).hermitian_part();
                let kept = next.tr();
                let p_pass = if total > R::zero() {
                    (kept / total).as_f64()
                } else {
                    1.0
                };
                if rng.random::<f64>() < p_pass {
                    state = if kept > R::zero() {
                        next.scale(total / kept)
                    } else {
                        next
                    };
                } else {
                    return Ok(LabeledState::new()
                        .with(Label::D, ComplexMatrix::maximally_mixed(dim).scale(total)));
                }
            }
            Ok(LabeledState::new().with(Label::P, state))
        }
    }
}

fn prefer_direct_iteration(dim: usize, flaws: usize, tau: u64) -> bool {
    let d = dim as f64;
    let direct = tau as f64 * flaws as f64 * 2.0 * d.powi(3);
    let squaring = 2.0 * (64 - tau.leading_zeros()) as f64 * d.powi(6);
    direct <= squaring
}

/// `4 exp(−γ^S τ / |S|)`: trace-distance bound between approximate and ideal kernel projections.
pub fn projection_error_bound<R: Real>(gap: R, s_len: usize, tau: u64) -> R {
    if s_len == 0 {
        return R::zero();
    }
    let g = if gap.is_finite_value() {
        gap
    } else {
        R::zero()
    };
    R::lit(4.0) * (-(g * R::lit(tau as f64)) / R::from_usize_lossy(s_len)).exp()
}

/// How the Zeno channel realizes the projections onto `V^C` and `V^{C∪{f}}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "projection", rename_all = "snake_case")]
pub enum ZenoMode {
    /// Ideal projective measurements (evaluated in closed form).
    Ideal,
    /// Approximate kernel projections with `τ` rounds (superoperator evaluation).
    Implementable { tau: u64 },
}

/// Number of weak-measurement rounds `⌈ln(3/θ) / (θ·min(γ, 1))⌉`.
pub fn zeno_rounds<R: Real>(theta: R, gap: R) -> u64 {
    let g = gap.min(R::one()).as_f64();
    let th = theta.as_f64();
    ((3.0 / th).ln() / (th * g)).ceil().max(1.0) as u64
}

/// `Σ_{j<m} z^j` for `z ∈ [0,1]`.
fn geometric<R: Real>(z: R, m: u64) -> R {
    if m == 0 {
        return R::zero();
    }
    if z <= R::zero() {
        return R::one();
    }
    let mr = R::lit(m as f64);
    let d = R::one() - z;
    if d * mr < R::lit(1e-8) {
        return mr * (R::one() - (mr - R::one()) * d / R::lit(2.0));
    }
    -(mr * (-d).ln_1p()).exp_m1() / d
}

/// `z^m` for `z ∈ [0,1]`.
fn power<R: Real>(z: R, m: u64) -> R {
    if m == 0 {
        R::one()
    } else if z <= R::zero() {
        R::zero()
    } else {
        (R::lit(m as f64) * z.ln()).exp()
    }
}

/// Zeno measurement channel: `t` rounds of weak measurement of `Π_f` interleaved with
/// projections onto `V^C`, then a final projection onto `V^{C∪{f}}`.
///
/// Branches: `G`, `B` and `E = E1 + E2`, with `E1`, `E2` kept in `error_parts`.
pub fn zeno_channel<R: Real>(
    sim: &Simulator<R>,
    rho: &ComplexMatrix<R>,
    c: FlawSet,
    f: usize,
    theta: R,
    t: u64,
    mode: ZenoMode,
) -> Result<LabeledState<R>> {
    check_theta(theta)?;
    if t == 0 {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: "needs at least one round".into(),
        });
    }
    check_dim(rho, sim.dim())?;
    match mode {
        ZenoMode::Ideal => zeno_ideal(sim, rho, c, f, theta, t),
        ZenoMode::Implementable { tau } => zeno_implementable(sim, rho, c, f, theta, t, tau),
    }
}

fn zeno_ideal<R: Real>(
    sim: &Simulator<R>,
    rho: &ComplexMatrix<R>,
    c: FlawSet,
    f: usize,
    theta: R,
    t: u64,
) -> Result<LabeledState<R>> {
    let dim = sim.dim();
    let id = ComplexMatrix::identity(dim);
    let pi_v = sim.kernel(c)?;
    let pi_vf = sim.kernel(c.with(f))?;
    let (m_b, m_g) = weak_kraus(sim.projector(f)?, theta);

    // X = Π_V M_g, K = X Π_V; then X^i ρ X^i† = K^{i−1} (XρX†) K^{i−1} for i ≥ 1.
    let x = &*pi_v * &m_g;
    let k = (&x * &*pi_v).hermitian_part();
    let y = rho.conjugate_by(&x);
    let eig = hermitian_eig(&k);
    let vecs = &eig.eigenvectors;
    let ks: Vec<R> = eig
        .eigenvalues
        .iter()
        .map(|l| l.max(R::zero()).min(R::one()))
        .collect();
    let y_rot = complex_product(&complex_product(&vecs.adjoint(), y.as_dmatrix()), vecs);
    let sum_rot = DMatrix::from_fn(dim, dim, |a, b| {
        y_rot[(a, b)] * C::from(geometric(ks[a] * ks[b], t - 1))
    });
    let last_rot = DMatrix::from_fn(dim, dim, |a, b| {
        y_rot[(a, b)] * C::from(power(ks[a] * ks[b], t - 1))
    });
    let back = |m: DMatrix<C<R>>| {
        ComplexMatrix::from_dmatrix(complex_product(&complex_product(vecs, &m), &vecs.adjoint()))
            .expect("square")
            .hermitian_part()
    };
    let accumulated = rho + &back(sum_rot);
    let last = back(last_rot);

    let out_v = &id - &*pi_v;
    let out_vf = &id - &*pi_vf;
    let bad = accumulated.conjugate_by(&m_b).hermitian_part();
    let e1 = accumulated
        .conjugate_by(&m_g)
        .conjugate_by(&out_v)
        .hermitian_part();
    let good = last.conjugate_by(&pi_vf).hermitian_part();
    let e2 = last.conjugate_by(&out_vf).hermitian_part();
    Ok(assemble_zeno(good, bad, e1, e2))
}

fn zeno_implementable<R: Real>(
    sim: &Simulator<R>,
    rho: &ComplexMatrix<R>,
    c: FlawSet,
    f: usize,
    theta: R,
    t: u64,
    tau: u64,
) -> Result<LabeledState<R>> {
    let dim = sim.dim();
    let key = ZenoKey {
        c,
        f,
        theta_bits: theta.as_f64().to_bits(),
        t,
        tau,
    };
    let ops = sim.zeno_superops(key, theta)?;
    let (m_b, _) = weak_kraus(sim.projector(f)?, theta);
    let bad = apply_superop(&ops.sum, rho)
        .conjugate_by(&m_b)
        .hermitian_part();
    let last = apply_superop(&ops.power, rho);
    let good = apply_superop(&*sim.projection_superoperator(c.with(f), tau)?, &last);
    let mixed = ComplexMatrix::maximally_mixed(dim);
    let e2 = mixed.scale(last.tr() - good.tr());
    let e1 = mixed.scale(rho.tr() - bad.tr() - last.tr());
    Ok(assemble_zeno(good, bad, e1, e2))
}

fn assemble_zeno<R: Real>(
    good: ComplexMatrix<R>,
    bad: ComplexMatrix<R>,
    e1: ComplexMatrix<R>,
    e2: ComplexMatrix<R>,
) -> LabeledState<R> {
    let error = &e1 + &e2;
    let mut state = LabeledState::new()
        .with(Label::G, good)
        .with(Label::B, bad)
        .with(Label::E, error);
    state.error_parts = Some(ErrorParts { e1, e2 });
    state
}

/// The flaw-checking channel `Q_f^C` used by the solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    rename_all = "snake_case",
    bound(serialize = "", deserialize = "")
)]
pub enum ChannelKind<R: Real> {
    /// Projective measurement of `Π_f` (the commuting algorithm).
    Projective,
    /// Exact SVD-rotation channel.
    Exact,
    /// Zeno weak-measurement channel.
    Zeno { theta: R, t: u64, mode: ZenoMode },
}

impl<R: Real> ChannelKind<R> {
    pub fn apply(
        &self,
        sim: &Simulator<R>,
        rho: &ComplexMatrix<R>,
        c: FlawSet,
        f: usize,
    ) -> Result<LabeledState<R>> {
        match *self {
            ChannelKind::Projective => projective_channel(sim, rho, f),
            ChannelKind::Exact => exact_channel(sim, rho, c, f),
            ChannelKind::Zeno { theta, t, mode } => zeno_channel(sim, rho, c, f, theta, t, mode),
        }
    }

    /// Error parameter `θ` of the channel (zero for the error-free channels).
    pub fn theta(&self) -> R {
        match *self {
            ChannelKind::Zeno { theta, .. } => theta,
            _ => R::zero(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ChannelKind::Projective => "projective",
            ChannelKind::Exact => "exact",
            ChannelKind::Zeno {
                mode: ZenoMode::Ideal,
                ..
            } => "zeno-ideal",
            ChannelKind::Zeno {
                mode: ZenoMode::Implementable { .. },
                ..
            } => "zeno-implementable",
        }
    }
}

/// A family of subspaces `V^C` against which progress is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgressMeasure {
    /// `V^C = ⋂_{f∈C} ker Π_f`.
    Exact,
    /// `V^C` = the whole space.
    Trivial,
}

impl ProgressMeasure {
    pub fn projector<R: Real>(
        &self,
        sim: &Simulator<R>,
        c: FlawSet,
    ) -> Result<Arc<ComplexMatrix<R>>> {
        match self {
            ProgressMeasure::Exact => sim.kernel(c),
            ProgressMeasure::Trivial => sim.kernel(FlawSet::EMPTY),
        }
    }
}

/// Which error-branch condition to verify.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCondition {
    /// `tr Q_E(ρ) ≤ 2θ · tr Q_B(ρ)`.
    PerBad,
    /// `tr Q_E(ρ) ≤ 2θ · tr ρ`.
    Total,
}

/// Which property of a progressive channel failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProgressiveProperty {
    /// `Q_G(Π_{V^C}) ⪯ Π_{V^{C∪{f}}}`.
    Good,
    /// `Q_B(Π_{V^C}) ⪯ Π_f Π_{V^{C∖Γ⁺(f)}}`.
    Bad,
    /// Error-branch trace bound.
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct ProgressiveViolation<R: Real> {
    pub c: FlawSet,
    pub f: usize,
    pub property: ProgressiveProperty,
    pub amount: R,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct ProgressiveReport<R: Real> {
    pub configurations: usize,
    pub max_good_violation: R,
    pub max_bad_violation: R,
    /// Largest `tr Q_E(ρ) − 2θ·tr Q_B(ρ)` (or `− 2θ·tr ρ`) observed.
    pub max_error_excess: R,
    pub violations: Vec<ProgressiveViolation<R>>,
}

impl<R: Real> ProgressiveReport<R> {
    pub fn is_progressive(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the progressive-channel properties on `(C, f)` pairs: all of them when
/// there are at most `trials`, otherwise `trials` random pairs. The error condition
/// is tested on `states` random inputs supported on `V^C` per pair.
#[allow(clippy::too_many_arguments)]
pub fn verify_progressive<R: Real, G: Rng + ?Sized>(
    sim: &Simulator<R>,
    channel: &ChannelKind<R>,
    measure: ProgressMeasure,
    theta: R,
    condition: ErrorCondition,
    trials: usize,
    states: usize,
    rng: &mut G,
) -> Result<ProgressiveReport<R>> {
    let m = sim.num_flaws();
    let all = sim.all_flaws();
    let exhaustive = m < 20 && (m << m.saturating_sub(1)) <= trials;
    let configs: Vec<(FlawSet, usize)> = if exhaustive {
        (0..m)
            .flat_map(|f| {
                let rest = all.without(f);
                (0..1u64 << m)
                    .map(FlawSet)
                    .filter(move |s| s.is_subset(rest))
                    .map(move |s| (s, f))
            })
            .collect()
    } else {
        (0..trials)
            .map(|_| {
                let f = rng.random_range(0..m);
                let mask: u64 = rng.random::<u64>() & all.without(f).0;
                (FlawSet(mask), f)
            })
            .collect()
    };
    let tol = R::lit(1e-8);
    let two_theta = R::lit(2.0) * theta;
    let mut report = ProgressiveReport {
        configurations: configs.len(),
        max_good_violation: R::zero(),
        max_bad_violation: R::zero(),
        max_error_excess: -R::infinity(),
        violations: Vec::new(),
    };
    for (c, f) in configs {
        let pi_v = measure.projector(sim, c)?;
        let pi_vf = measure.projector(sim, c.with(f))?;
        let far = measure.projector(sim, c.difference(sim.graph().inclusive(f)))?;
        let bad_bound = (sim.projector(f)? * &*far).hermitian_part();
        let out = channel.apply(sim, &pi_v, c, f)?;
        let zero = ComplexMatrix::zeros(sim.dim());
        let good = psd_violation(out.get(Label::G).unwrap_or(&zero), &pi_vf)?;
        let bad = psd_violation(out.get(Label::B).unwrap_or(&zero), &bad_bound)?;
        report.max_good_violation = report.max_good_violation.max(good);
        report.max_bad_violation = report.max_bad_violation.max(bad);
        if good > tol {
            report.violations.push(ProgressiveViolation {
                c,
                f,
                property: ProgressiveProperty::Good,
                amount: good,
            });
        }
        if bad > tol {
            report.violations.push(ProgressiveViolation {
                c,
                f,
                property: ProgressiveProperty::Bad,
                amount: bad,
            });
        }
        if pi_v.tr() < R::lit(0.5) {
            continue;
        }
        for _ in 0..states {
            let rho = match measure {
                ProgressMeasure::Exact => random_density_in(&pi_v, rng),
                ProgressMeasure::Trivial => random_density(sim.dim(), sim.dim(), rng),
            };
            let out = channel.apply(sim, &rho, c, f)?;
            let allowance = match condition {
                ErrorCondition::PerBad => two_theta * out.trace(Label::B),
                ErrorCondition::Total => two_theta * rho.tr(),
            };
            let excess = out.trace(Label::E) - allowance;
            report.max_error_excess = report.max_error_excess.max(excess);
            if excess > tol {
                report.violations.push(ProgressiveViolation {
                    c,
                    f,
                    property: ProgressiveProperty::Error,
                    amount: excess,
                });
            }
        }
    }
    Ok(report)
}

/// Certified lower bound on the channel distance `sup_A Σ_label ‖qa(A) − qb(A)‖₁`
/// over Hermitian `A` with `‖A‖₁ = 1`, sampled on random pure states and normalized
/// differences of pure states.
pub fn channel_distance_lower_bound<R, QA, QB, G>(
    dim: usize,
    qa: QA,
    qb: QB,
    trials: usize,
    rng: &mut G,
) -> Result<R>
where
    R: Real,
    QA: Fn(&ComplexMatrix<R>) -> Result<LabeledState<R>>,
    QB: Fn(&ComplexMatrix<R>) -> Result<LabeledState<R>>,
    G: Rng + ?Sized,
{
    let mut best = R::zero();
    for trial in 0..trials {
        let input = if trial % 2 == 0 {
            random_pure_density(dim, rng)
        } else {
            let diff = &random_pure_density::<R, G>(dim, rng) - &random_pure_density(dim, rng);
            let norm = trace_norm_hermitian(&diff);
            if norm <= R::zero() {
                continue;
            }
            diff.scale(R::one() / norm)
        };
        best = best.max(qa(&input)?.distance(&qb(&input)?));
    }
    Ok(best)
}

/// `Σ_{i<t} (1 − (1−√(1−θ))σ²)^{2i}`, summed term by term.
pub fn geometric_sum<R: Real>(theta: R, sigma: R, t: u64) -> R {
    let r = R::one() - (R::one() - (R::one() - theta).sqrt()) * sigma * sigma;
    let r2 = r * r;
    let mut term = R::one();
    let mut sum = R::zero();
    for _ in 0..t {
        sum += term;
        term *= r2;
    }
    sum
}

/// Whether `Σ_{i<t} (1 − (1−√(1−θ))σ²)^{2i} ≤ 1/(σ²θ)`.
pub fn geometric_sum_check<R: Real>(theta: R, sigma: R, t: u64) -> bool {
    let lhs = geometric_sum(theta, sigma, t);
    let rhs = R::one() / (sigma * sigma * theta);
    lhs <= rhs * (R::one() + R::lit(8.0) * R::default_epsilon())
}

/// Dephases the state in the eigenbasis of every flaw projector, one after another.
pub fn dephase_all<R: Real>(
    sim: &Simulator<R>,
    rho: &ComplexMatrix<R>,
) -> Result<ComplexMatrix<R>> {
    check_dim(rho, sim.dim())?;
    let id = ComplexMatrix::identity(sim.dim());
    let mut state = rho.clone();
    for f in 0..sim.num_flaws() {
        let pi = sim.projector(f)?;
        let q = &id - pi;
        state = (&state.conjugate_by(pi) + &state.conjugate_by(&q)).hermitian_part();
    }
    Ok(state)
}

/// `‖M∘R_b∘M∘R_a∘M(ρ) − M∘R_a∘M∘R_b∘M(ρ)‖₁`, where `M` dephases all flaws and
/// `R_x` resamples flaw `x`: whether two resamplings commute through measurement.
pub fn commutativity_distance<R: Real>(
    sim: &Simulator<R>,
    a: usize,
    b: usize,
    rho: &ComplexMatrix<R>,
) -> Result<R> {
    let inst = sim.instance();
    let order = |first: usize, second: usize| -> Result<ComplexMatrix<R>> {
        let s = dephase_all(sim, rho)?;
        let s = dephase_all(sim, &resample(&s, inst, first)?)?;
        dephase_all(sim, &resample(&s, inst, second)?)
    };
    let ab = order(a, b)?;
    let ba = order(b, a)?;
    Ok(trace_norm_hermitian(&(&ab - &ba).hermitian_part()))
}
