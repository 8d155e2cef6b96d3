//! QSAT instances: flaws as local projectors, the dependency graph, independent
//! sets and the independent set polynomial.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::linalg::{embed_local, projector_defects, smallest_nonzero_eig, ComplexMatrix};
use crate::scalar::Real;

/// A set of flaws, stored as a bitmask over flaw indices (at most 64 flaws).
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlawSet(pub u64);

impl FlawSet {
    pub const EMPTY: FlawSet = FlawSet(0);

    pub fn full(m: usize) -> Self {
        assert!(m <= 64, "at most 64 flaws are supported");
        if m == 64 {
            FlawSet(u64::MAX)
        } else {
            FlawSet((1u64 << m) - 1)
        }
    }

    pub fn singleton(f: usize) -> Self {
        FlawSet(1u64 << f)
    }

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        indices.into_iter().fold(Self::EMPTY, |s, f| s.with(f))
    }

    pub fn contains(self, f: usize) -> bool {
        f < 64 && self.0 & (1u64 << f) != 0
    }

    pub fn with(self, f: usize) -> Self {
        FlawSet(self.0 | (1u64 << f))
    }

    pub fn without(self, f: usize) -> Self {
        FlawSet(self.0 & !(1u64 << f))
    }

    pub fn insert(&mut self, f: usize) {
        *self = self.with(f);
    }

    pub fn remove(&mut self, f: usize) {
        *self = self.without(f);
    }

    pub fn union(self, other: Self) -> Self {
        FlawSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        FlawSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        FlawSet(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Smallest flaw index in the set.
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// Indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let f = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(f)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl fmt::Debug for FlawSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for FlawSet {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.to_vec().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FlawSet {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let indices: Vec<usize> = Vec::deserialize(deserializer)?;
        if let Some(bad) = indices.iter().find(|&&f| f >= 64) {
            return Err(serde::de::Error::custom(format!("flaw index {bad} ≥ 64")));
        }
        Ok(Self::from_indices(indices))
    }
}

/// A flaw: an orthogonal projector acting on the qubits of `support`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct Flaw<R: Real> {
    pub id: String,
    pub support: Vec<usize>,
    #[serde(rename = "projector")]
    pub local_projector: ComplexMatrix<R>,
}

impl<R: Real> Flaw<R> {
    /// Validates support and projector; the support is kept in the given order.
    pub fn new(
        id: impl Into<String>,
        support: Vec<usize>,
        local_projector: ComplexMatrix<R>,
    ) -> Result<Self> {
        let flaw = Self {
            id: id.into(),
            support,
            local_projector,
        };
        flaw.validate()?;
        Ok(flaw)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidFlaw {
            id: self.id.clone(),
            reason,
        };
        if self.support.is_empty() {
            return Err(invalid("empty support".into()));
        }
        for (i, q) in self.support.iter().enumerate() {
            if self.support[..i].contains(q) {
                return Err(invalid(format!("qubit {q} repeated in support")));
            }
        }
        if self.support.len() >= usize::BITS as usize - 1 {
            return Err(invalid("support too large".into()));
        }
        let expected = 1usize << self.support.len();
        if self.local_projector.dim() != expected {
            return Err(invalid(format!(
                "projector has dimension {} but support needs {expected}",
                self.local_projector.dim()
            )));
        }
        self.local_projector.validate_finite()?;
        let (idem, herm) = projector_defects(&self.local_projector);
        let tol = R::projector_tol();
        if idem > tol || herm > tol {
            return Err(invalid(format!(
                "not an orthogonal projector (‖Π²−Π‖₁ = {:e}, ‖Π−Π†‖₁ = {:e})",
                idem.as_f64(),
                herm.as_f64()
            )));
        }
        Ok(())
    }

    /// `Tr(Π_f^loc) / 2^|b(f)|`.
    pub fn probability(&self) -> R {
        let p = self.local_projector.tr() / R::from_usize_lossy(self.local_projector.dim());
        p.max(R::zero()).min(R::one())
    }

    /// Rank of the projector.
    pub fn rank(&self) -> usize {
        crate::linalg::projector_rank(&self.local_projector)
    }
}

/// An `n`-qubit instance with an ordered list of flaws; the list order is the
/// fixed order used for flaw selection.
#[derive(Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""), try_from = "RawInstance<R>")]
pub struct QsatInstance<R: Real> {
    pub n: usize,
    pub flaws: Vec<Flaw<R>>,
    #[serde(skip)]
    embedded: OnceLock<Vec<ComplexMatrix<R>>>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = ""))]
struct RawInstance<R: Real> {
    n: usize,
    flaws: Vec<Flaw<R>>,
}

impl<R: Real> TryFrom<RawInstance<R>> for QsatInstance<R> {
    type Error = Error;
    fn try_from(raw: RawInstance<R>) -> Result<Self> {
        Self::new(raw.n, raw.flaws)
    }
}

impl<R: Real> Clone for QsatInstance<R> {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            flaws: self.flaws.clone(),
            embedded: self.embedded.clone(),
        }
    }
}

impl<R: Real> PartialEq for QsatInstance<R> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.flaws == other.flaws
    }
}

impl<R: Real> QsatInstance<R> {
    pub fn new(n: usize, flaws: Vec<Flaw<R>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInstance(
                "instance needs at least one qubit".into(),
            ));
        }
        if flaws.len() > 64 {
            return Err(Error::TooLarge {
                what: "flaws",
                value: flaws.len(),
                limit: 64,
            });
        }
        for (i, flaw) in flaws.iter().enumerate() {
            flaw.validate()?;
            if let Some(&q) = flaw.support.iter().find(|&&q| q >= n) {
                return Err(Error::InvalidFlaw {
                    id: flaw.id.clone(),
                    reason: format!("qubit {q} out of range for n = {n}"),
                });
            }
            if flaws[..i].iter().any(|g| g.id == flaw.id) {
                return Err(Error::InvalidInstance(format!(
                    "duplicate flaw id {:?}",
                    flaw.id
                )));
            }
        }
        Ok(Self {
            n,
            flaws,
            embedded: OnceLock::new(),
        })
    }

    pub fn num_flaws(&self) -> usize {
        self.flaws.len()
    }

    /// `N = 2^n`.
    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn all_flaws(&self) -> FlawSet {
        FlawSet::full(self.flaws.len())
    }

    pub fn flaw_index(&self, id: &str) -> Option<usize> {
        self.flaws.iter().position(|f| f.id == id)
    }

    /// Resolves flaw ids to a set; unknown ids are an error.
    pub fn flaw_set(&self, ids: &[impl AsRef<str>]) -> Result<FlawSet> {
        ids.iter().try_fold(FlawSet::EMPTY, |s, id| {
            self.flaw_index(id.as_ref())
                .map(|f| s.with(f))
                .ok_or_else(|| Error::InvalidParameter {
                    name: "flaw id",
                    reason: format!("unknown flaw {:?}", id.as_ref()),
                })
        })
    }

    pub fn flaw_ids(&self, set: FlawSet) -> Vec<String> {
        set.iter().map(|f| self.flaws[f].id.clone()).collect()
    }

    pub fn probabilities(&self) -> Vec<R> {
        self.flaws.iter().map(Flaw::probability).collect()
    }

    pub fn dependency_graph(&self) -> DependencyGraph {
        let m = self.flaws.len();
        let mut neighbors = vec![FlawSet::EMPTY; m];
        for f in 0..m {
            for g in (f + 1)..m {
                let shares = self.flaws[f]
                    .support
                    .iter()
                    .any(|q| self.flaws[g].support.contains(q));
                if shares {
                    neighbors[f].insert(g);
                    neighbors[g].insert(f);
                }
            }
        }
        DependencyGraph { neighbors }
    }

    /// Refuses instances above the configured qubit limit.
    pub fn check_simulable(&self) -> Result<()> {
        let limit = Limits::from_env()?.max_qubits;
        if self.n > limit {
            return Err(Error::TooLarge {
                what: "qubits",
                value: self.n,
                limit,
            });
        }
        Ok(())
    }

    /// Embedded projectors `Π_f` on the full register, built once and cached.
    pub fn projectors(&self) -> Result<&[ComplexMatrix<R>]> {
        if let Some(p) = self.embedded.get() {
            return Ok(p);
        }
        self.check_simulable()?;
        let built = self
            .flaws
            .iter()
            .map(|f| embed_local(&f.local_projector, &f.support, self.n))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.embedded.get_or_init(|| built))
    }

    pub fn projector(&self, f: usize) -> Result<&ComplexMatrix<R>> {
        self.projectors()?.get(f).ok_or(Error::IndexOutOfRange {
            index: f,
            n: self.flaws.len(),
        })
    }

    /// `H^S = Σ_{f∈S} Π_f`.
    pub fn sub_hamiltonian(&self, s: FlawSet) -> Result<ComplexMatrix<R>> {
        let projectors = self.projectors()?;
        let mut h = ComplexMatrix::zeros(self.dim());
        for f in s.iter() {
            h += projectors.get(f).ok_or(Error::IndexOutOfRange {
                index: f,
                n: projectors.len(),
            })?;
        }
        Ok(h)
    }

    pub fn hamiltonian(&self) -> Result<ComplexMatrix<R>> {
        self.sub_hamiltonian(self.all_flaws())
    }

    /// `γ^S`: smallest nonzero eigenvalue of `H^S` (`+∞` when `H^S = 0`).
    pub fn subset_gap(&self, s: FlawSet) -> Result<R> {
        smallest_nonzero_eig(&self.sub_hamiltonian(s)?, R::zero_tol())
    }

    /// Uniform gap `γ = min_S γ^S` over all `2^|F|` subsets.
    pub fn uniform_gap(&self) -> Result<R> {
        let m = self.flaws.len();
        Limits::check("flaws for uniform gap", m, Limits::default().max_gap_flaws)?;
        self.projectors()?;
        let gaps = (1u64..(1u64 << m))
            .into_par_iter()
            .map(|mask| self.subset_gap(FlawSet(mask)))
            .collect::<Result<Vec<R>>>()?;
        Ok(gaps.into_iter().fold(R::infinity(), |acc, g| acc.min(g)))
    }

    /// Re-indexes qubits so the instance can be serialized with sorted supports.
    pub fn with_sorted_supports(&self) -> Result<Self> {
        let flaws = self
            .flaws
            .iter()
            .map(|f| {
                let mut order: Vec<usize> = (0..f.support.len()).collect();
                order.sort_by_key(|&i| f.support[i]);
                if order.iter().enumerate().all(|(i, &j)| i == j) {
                    return Ok(f.clone());
                }
                let support: Vec<usize> = order.iter().map(|&i| f.support[i]).collect();
                // Express the projector in the sorted qubit order by embedding on
                // the permuted positions of a |support|-qubit register.
                let positions: Vec<usize> = f
                    .support
                    .iter()
                    .map(|q| support.iter().position(|s| s == q).expect("same qubits"))
                    .collect();
                let proj = embed_local(&f.local_projector, &positions, support.len())?;
                Flaw::new(f.id.clone(), support, proj)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.n, flaws)
    }
}

/// The dependency graph: flaws are adjacent iff their supports intersect.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    neighbors: Vec<FlawSet>,
}

impl DependencyGraph {
    /// Builds a graph on `m` vertices from an edge list.
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if m > 64 {
            return Err(Error::TooLarge {
                what: "flaws",
                value: m,
                limit: 64,
            });
        }
        let mut neighbors = vec![FlawSet::EMPTY; m];
        for &(a, b) in edges {
            if a >= m || b >= m {
                return Err(Error::IndexOutOfRange {
                    index: a.max(b),
                    n: m,
                });
            }
            if a != b {
                neighbors[a].insert(b);
                neighbors[b].insert(a);
            }
        }
        Ok(Self { neighbors })
    }

    pub fn num_vertices(&self) -> usize {
        self.neighbors.len()
    }

    pub fn all(&self) -> FlawSet {
        FlawSet::full(self.neighbors.len())
    }

    /// `Γ(f)`.
    pub fn neighbors(&self, f: usize) -> FlawSet {
        self.neighbors[f]
    }

    /// `Γ⁺(f) = Γ(f) ∪ {f}`.
    pub fn inclusive(&self, f: usize) -> FlawSet {
        self.neighbors[f].with(f)
    }

    /// `Γ(S) = ∪_{f∈S} Γ(f)`.
    pub fn neighbors_of(&self, s: FlawSet) -> FlawSet {
        s.iter()
            .fold(FlawSet::EMPTY, |acc, f| acc.union(self.neighbors[f]))
    }

    /// `Γ⁺(S) = S ∪ Γ(S)`.
    pub fn inclusive_of(&self, s: FlawSet) -> FlawSet {
        self.neighbors_of(s).union(s)
    }

    pub fn max_inclusive_degree(&self) -> usize {
        (0..self.neighbors.len())
            .map(|f| self.inclusive(f).len())
            .max()
            .unwrap_or(0)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.neighbors.len())
            .flat_map(|f| {
                self.neighbors[f]
                    .iter()
                    .filter(move |&g| g > f)
                    .map(move |g| (f, g))
            })
            .collect()
    }

    pub fn is_independent(&self, s: FlawSet) -> bool {
        self.neighbors_of(s).intersection(s).is_empty()
    }

    /// Every independent subset of `within`, including `∅`, in lexicographic
    /// order of their sorted index lists.
    pub fn independent_subsets_of(&self, within: FlawSet) -> Vec<FlawSet> {
        fn extend(
            g: &DependencyGraph,
            current: FlawSet,
            candidates: FlawSet,
            out: &mut Vec<FlawSet>,
        ) {
            out.push(current);
            for f in candidates.iter() {
                let rest = FlawSet(candidates.0 & !((1u64 << f) | ((1u64 << f) - 1)));
                extend(g, current.with(f), rest.difference(g.neighbors[f]), out);
            }
        }
        let mut out = Vec::new();
        extend(self, FlawSet::EMPTY, within, &mut out);
        out
    }

    /// `Ind(F)` with the default enumeration limit.
    pub fn independent_sets(&self) -> Result<Vec<FlawSet>> {
        Limits::check(
            "flaws for independent set enumeration",
            self.neighbors.len(),
            Limits::default().max_independent_set_flaws,
        )?;
        Ok(self.independent_subsets_of(self.all()))
    }

    /// `q_∅` of the subgraph induced by `s`.
    pub fn q_empty<R: Real>(&self, x: &[R], s: FlawSet) -> R {
        QEvaluator::new(self, x).q_empty(s)
    }

    /// `q_I(x) = Σ_{S ∈ Ind, I ⊆ S} (−1)^{|S|−|I|} Π_{f∈S} x_f`.
    pub fn indep_polynomial<R: Real>(&self, x: &[R], i: FlawSet) -> Result<R> {
        if x.len() != self.neighbors.len() {
            return Err(Error::DimensionMismatch {
                expected: self.neighbors.len(),
                got: x.len(),
            });
        }
        if !i.is_subset(self.all()) {
            return Err(Error::InvalidParameter {
                name: "I",
                reason: "contains unknown flaws".into(),
            });
        }
        if !self.is_independent(i) {
            return Err(Error::InvalidParameter {
                name: "I",
                reason: format!("{i:?} is not independent"),
            });
        }
        Ok(QEvaluator::new(self, x).q(i))
    }
}

/// Memoized evaluation of the independent set polynomial using
/// `q_∅(G) = q_∅(G − v) − x_v · q_∅(G − Γ⁺(v))` and
/// `q_I = x_I · q_∅(G − Γ⁺(I))`.
pub struct QEvaluator<'a, R: Real> {
    graph: &'a DependencyGraph,
    x: &'a [R],
    memo: HashMap<u64, R>,
}

impl<'a, R: Real> QEvaluator<'a, R> {
    pub fn new(graph: &'a DependencyGraph, x: &'a [R]) -> Self {
        assert_eq!(graph.num_vertices(), x.len(), "one weight per flaw");
        Self {
            graph,
            x,
            memo: HashMap::new(),
        }
    }

    pub fn q_empty(&mut self, s: FlawSet) -> R {
        let Some(v) = s.first() else {
            return R::one();
        };
        if let Some(q) = self.memo.get(&s.0) {
            return *q;
        }
        let without = self.q_empty(s.without(v));
        let blocked = self.q_empty(s.difference(self.graph.inclusive(v)));
        let q = without - self.x[v] * blocked;
        self.memo.insert(s.0, q);
        q
    }

    pub fn q(&mut self, i: FlawSet) -> R {
        let weight = i.iter().fold(R::one(), |acc, f| acc * self.x[f]);
        let rest = self.graph.all().difference(self.graph.inclusive_of(i));
        weight * self.q_empty(rest)
    }
}
