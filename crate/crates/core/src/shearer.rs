//! Stable set sequences: enumeration, weighted sums, closed-form estimates of
//! their total weight and tail bounds.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::conditions::{bound_terms, check, Condition, Witness};
use crate::error::{Error, Result};
use crate::instance::{DependencyGraph, FlawSet, QEvaluator};
use crate::limits::Limits;
use crate::scalar::Real;

/// A chain `I₁, …, I_s` of non-empty independent sets with `I_{r+1} ⊆ Γ⁺(I_r)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StableSetSequence {
    pub sets: Vec<FlawSet>,
}

impl StableSetSequence {
    /// `‖𝓘‖ = Σ |I_r|`.
    pub fn size(&self) -> usize {
        self.sets.iter().map(|s| s.len()).sum()
    }

    /// `p_𝓘 = Π_r Π_{f∈I_r} p_f`.
    pub fn weight<R: Real>(&self, p: &[R]) -> R {
        self.sets
            .iter()
            .flat_map(|s| s.iter())
            .fold(R::one(), |acc, f| acc * p[f])
    }

    pub fn is_valid(&self, g: &DependencyGraph) -> bool {
        self.sets
            .iter()
            .all(|s| !s.is_empty() && s.is_subset(g.all()) && g.is_independent(*s))
            && self
                .sets
                .windows(2)
                .all(|w| w[1].is_subset(g.inclusive_of(w[0])))
    }
}

fn check_sequence_limits(g: &DependencyGraph, k: usize) -> Result<()> {
    let limits = Limits::default();
    Limits::check("stable set sequence size", k, limits.max_sequence_size)?;
    Limits::check(
        "flaws for stable set sequence enumeration",
        g.num_vertices(),
        limits.max_sequence_flaws,
    )
}

/// All stable set sequences of total size `k`, depth first with independent
/// sets in lexicographic order.
pub fn enumerate_sequences(g: &DependencyGraph, k: usize) -> Result<Vec<StableSetSequence>> {
    check_sequence_limits(g, k)?;
    fn extend(
        g: &DependencyGraph,
        allowed: FlawSet,
        remaining: usize,
        prefix: &mut Vec<FlawSet>,
        out: &mut Vec<StableSetSequence>,
    ) {
        if remaining == 0 {
            out.push(StableSetSequence {
                sets: prefix.clone(),
            });
            return;
        }
        for set in g.independent_subsets_of(allowed) {
            if set.is_empty() || set.len() > remaining {
                continue;
            }
            prefix.push(set);
            extend(g, g.inclusive_of(set), remaining - set.len(), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(g, g.all(), k, &mut Vec::new(), &mut out);
    Ok(out)
}

/// `Σ_{𝓘 ∈ 𝓘𝓢_k} p_𝓘` by explicit enumeration.
pub fn weighted_sum<R: Real>(g: &DependencyGraph, p: &[R], k: usize) -> Result<R> {
    check_weights(g, p)?;
    Ok(enumerate_sequences(g, k)?
        .iter()
        .fold(R::zero(), |acc, s| acc + s.weight(p)))
}

fn check_weights<R>(g: &DependencyGraph, p: &[R]) -> Result<()> {
    if p.len() == g.num_vertices() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: g.num_vertices(),
            got: p.len(),
        })
    }
}

/// `Σ_{𝓘 ∈ 𝓘𝓢_k} p_𝓘` for `k = 0..=k_max` by a transfer recursion over
/// (remaining size, allowed flaws) — the same quantity as [`weighted_sum`]
/// without materializing sequences.
pub fn weighted_sums<R: Real>(g: &DependencyGraph, p: &[R], k_max: usize) -> Result<Vec<R>> {
    check_weights(g, p)?;
    Limits::check(
        "flaws for independent set enumeration",
        g.num_vertices(),
        Limits::default().max_independent_set_flaws,
    )?;
    let mut subsets: HashMap<u64, Vec<(FlawSet, R)>> = HashMap::new();
    let mut memo: HashMap<(usize, u64), R> = HashMap::new();

    fn total<R: Real>(
        g: &DependencyGraph,
        p: &[R],
        remaining: usize,
        allowed: FlawSet,
        subsets: &mut HashMap<u64, Vec<(FlawSet, R)>>,
        memo: &mut HashMap<(usize, u64), R>,
    ) -> R {
        if remaining == 0 {
            return R::one();
        }
        if let Some(v) = memo.get(&(remaining, allowed.0)) {
            return *v;
        }
        let candidates = subsets
            .entry(allowed.0)
            .or_insert_with(|| {
                g.independent_subsets_of(allowed)
                    .into_iter()
                    .filter(|s| !s.is_empty())
                    .map(|s| (s, s.iter().fold(R::one(), |acc, f| acc * p[f])))
                    .collect()
            })
            .clone();
        let mut sum = R::zero();
        for (set, w) in candidates {
            if set.len() <= remaining {
                sum += w * total(
                    g,
                    p,
                    remaining - set.len(),
                    g.inclusive_of(set),
                    subsets,
                    memo,
                );
            }
        }
        memo.insert((remaining, allowed.0), sum);
        sum
    }

    Ok((0..=k_max)
        .map(|k| total(g, p, k, g.all(), &mut subsets, &mut memo))
        .collect())
}

/// Closed-form upper bound on `Σ_{𝓘 ∈ 𝓘𝓢} p_𝓘`:
/// `Π 1/(1−x_f)`, `Π (1+y_f)` or `1/q_∅(p)`.
pub fn path_estimate<R: Real>(
    g: &DependencyGraph,
    p: &[R],
    condition: Condition,
    witness: Option<&Witness<R>>,
) -> Result<R> {
    let report = check(g, p, condition, witness)?;
    if !report.satisfied {
        return Err(Error::ConditionNotSatisfied(format!(
            "{condition} fails for the given probabilities"
        )));
    }
    match (condition, report.witness) {
        (Condition::Slc | Condition::Glc, _) => {
            let x = match witness {
                Some(Witness::X(x)) => x.clone(),
                _ => crate::conditions::default_glc_witness(g),
            };
            Ok(x.iter().fold(R::one(), |acc, &x| acc / (R::one() - x)))
        }
        (Condition::Cec, Some(Witness::Y(y))) => {
            Ok(y.iter().fold(R::one(), |acc, &y| acc * (R::one() + y)))
        }
        (Condition::Shc, _) => Ok(R::one() / QEvaluator::new(g, p).q_empty(g.all())),
        (Condition::Cec, _) => unreachable!("cec always reports its witness"),
    }
}

/// `p' = (1+ε)·p`; errors when some `p'_f` leaves `(0,1)` territory.
fn inflate<R: Real>(p: &[R], epsilon: R) -> Result<Vec<R>> {
    let scaled: Vec<R> = p.iter().map(|&v| v * (R::one() + epsilon)).collect();
    if scaled.iter().any(|&v| v >= R::one()) {
        return Err(Error::ConditionNotSatisfied(
            "inflated probabilities reach 1".into(),
        ));
    }
    Ok(scaled)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct SlackTail<R: Real> {
    /// Size offset `T`.
    pub t: R,
    /// `(1+ε)^{−r}`, bounding the weight of sequences of size `≥ T + r`.
    pub bound: R,
}

/// Tail bound with slack: if `(1+ε)p` satisfies the condition, sequences of
/// size at least `T + r` weigh at most `(1+ε)^{−r}` in total.
pub fn tail_bound_slack<R: Real>(
    g: &DependencyGraph,
    p: &[R],
    epsilon: R,
    condition: Condition,
    witness: Option<&Witness<R>>,
    r: R,
) -> Result<SlackTail<R>> {
    if !(epsilon > R::zero()) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be positive, got {epsilon}"),
        });
    }
    let inflated = inflate(p, epsilon)?;
    let report = check(g, &inflated, condition, witness)?;
    if !report.satisfied {
        return Err(Error::ConditionNotSatisfied(format!(
            "{condition} fails for the inflated probabilities"
        )));
    }
    let log_base = epsilon.ln_1p();
    let numerator = match (condition, report.witness) {
        (Condition::Slc | Condition::Glc, Some(Witness::X(x))) => x
            .iter()
            .fold(R::zero(), |acc, &x| acc - (R::one() - x).ln()),
        (Condition::Slc, _) => crate::conditions::default_glc_witness::<R>(g)
            .iter()
            .fold(R::zero(), |acc, &x| acc - (R::one() - x).ln()),
        (Condition::Cec, Some(Witness::Y(y))) => {
            y.iter().fold(R::zero(), |acc, &y| acc + y.ln_1p())
        }
        (Condition::Shc, _) => -QEvaluator::new(g, &inflated).q_empty(g.all()).ln(),
        _ => unreachable!("checked witness kinds"),
    };
    Ok(SlackTail {
        t: numerator / log_base,
        bound: (-r * log_base).exp(),
    })
}

/// Tail bound without slack: sequences of size at least `T` weigh at most `e^{−t}`.
pub fn tail_bound_noslack<R: Real>(
    g: &DependencyGraph,
    p: &[R],
    condition: Condition,
    witness: Option<&Witness<R>>,
    t: R,
) -> Result<R> {
    if t < R::zero() {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("must be non-negative, got {t}"),
        });
    }
    Ok(bound_terms(g, p, condition, witness)?.tail_size(t))
}

/// Slack for which `(1+ε)p` still satisfies Shearer's condition, starting from
/// `ε = q_∅ / (2 Σ_f q_{f})` and halving until the inflated vector passes.
pub fn shearer_slack<R: Real>(g: &DependencyGraph, p: &[R]) -> Result<R> {
    let mut eval = QEvaluator::new(g, p);
    let q_empty = eval.q_empty(g.all());
    let singles =
        (0..g.num_vertices()).fold(R::zero(), |acc, f| acc + eval.q(FlawSet::singleton(f)));
    if !(q_empty > R::zero()) {
        return Err(Error::ConditionNotSatisfied("q_∅ is not positive".into()));
    }
    let mut epsilon = if singles > R::zero() {
        (q_empty / (R::lit(2.0) * singles)).min(R::one())
    } else {
        R::one()
    };
    for _ in 0..60 {
        if let Ok(inflated) = inflate(p, epsilon) {
            if check(g, &inflated, Condition::Shc, None)?.satisfied {
                return Ok(epsilon);
            }
        }
        epsilon /= R::lit(2.0);
    }
    Err(Error::ConditionNotSatisfied(
        "no positive slack found for Shearer's condition".into(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct CertifiedTail<R: Real> {
    /// Exact weight of sizes `from..=k_star`.
    pub enumerated: R,
    /// Analytic bound on sizes `> max(k_star, from − 1)`.
    pub analytic: R,
    pub epsilon: R,
}

impl<R: Real> CertifiedTail<R> {
    pub fn upper(&self) -> R {
        self.enumerated + self.analytic
    }
}

/// Upper bound on `Σ_{k ≥ from} Σ_{𝓘 ∈ 𝓘𝓢_k} p_𝓘` for Shearer-satisfying `p`:
/// exact sums up to `k_star`, then `(1+ε)^{−k}·(1/q_∅(p'))` beyond.
pub fn certified_tail<R: Real>(
    g: &DependencyGraph,
    p: &[R],
    from: usize,
    k_star: usize,
) -> Result<CertifiedTail<R>> {
    let epsilon = shearer_slack(g, p)?;
    let inflated = inflate(p, epsilon)?;
    let total_inflated = R::one() / QEvaluator::new(g, &inflated).q_empty(g.all());
    let sums = weighted_sums(g, p, k_star)?;
    let enumerated = sums
        .iter()
        .enumerate()
        .filter(|(k, _)| *k >= from)
        .fold(R::zero(), |acc, (_, v)| acc + *v);
    let start = from.max(k_star + 1);
    let analytic = (-R::from_usize_lossy(start) * epsilon.ln_1p()).exp() * total_inflated;
    Ok(CertifiedTail {
        enumerated,
        analytic,
        epsilon,
    })
}
