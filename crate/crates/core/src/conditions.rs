//! Sufficient conditions for avoidability (symmetric, general/asymmetric,
//! cluster expansion, Shearer) and the expected-resampling bounds they imply.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{DependencyGraph, FlawSet, QEvaluator, QsatInstance};
use crate::limits::Limits;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Condition {
    Slc,
    Glc,
    Cec,
    Shc,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Slc,
        Condition::Glc,
        Condition::Cec,
        Condition::Shc,
    ];
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Slc => "SLC",
            Condition::Glc => "GLC",
            Condition::Cec => "CEC",
            Condition::Shc => "SHC",
        })
    }
}

impl FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "slc" => Ok(Condition::Slc),
            "glc" | "alc" => Ok(Condition::Glc),
            "cec" => Ok(Condition::Cec),
            "shc" | "shearer" => Ok(Condition::Shc),
            other => Err(Error::Parse(format!("unknown condition {other:?}"))),
        }
    }
}

/// The witness a condition was checked with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", bound(serialize = "", deserialize = ""))]
pub enum Witness<R: Real> {
    /// Maximum inclusive degree `d = max_f |Γ⁺(f)|`.
    Degree(usize),
    /// Per-flaw `x_f ∈ (0,1)`.
    X(Vec<R>),
    /// Per-flaw `y_f > 0`.
    Y(Vec<R>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct QValue<R: Real> {
    pub set: FlawSet,
    pub value: R,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct ConditionReport<R: Real> {
    pub condition: Condition,
    pub satisfied: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Witness<R>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_values: Option<Vec<QValue<R>>>,
    /// Flaws at which the inequality fails (empty for SHC; see `q_values`).
    #[serde(default)]
    pub violations: Vec<usize>,
}

/// Floating slack for the boundary comparisons of the condition inequalities.
fn slack<R: Real>() -> R {
    R::default_epsilon() * R::lit(64.0)
}

fn check_len<R>(what: &'static str, v: &[R], m: usize) -> Result<()> {
    if v.len() == m {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: what,
            reason: format!("expected {m} entries, got {}", v.len()),
        })
    }
}

/// The default witness for the general condition: `x_f = 1/d`, with `d`
/// raised to 2 so that `x_f < 1` on graphs without edges.
pub fn default_glc_witness<R: Real>(g: &DependencyGraph) -> Vec<R> {
    let d = g.max_inclusive_degree().max(2);
    vec![R::one() / R::from_usize_lossy(d); g.num_vertices()]
}

/// `p_f ≤ 1/(d·e)` for `d = max_f |Γ⁺(f)|`.
pub fn slc<R: Real>(g: &DependencyGraph, p: &[R]) -> Result<ConditionReport<R>> {
    check_len("p", p, g.num_vertices())?;
    let d = g.max_inclusive_degree();
    let violations = if d == 0 {
        Vec::new()
    } else {
        let threshold = R::one() / (R::from_usize_lossy(d) * R::e());
        (0..p.len())
            .filter(|&f| p[f] > threshold * (R::one() + slack::<R>()))
            .collect()
    };
    Ok(ConditionReport {
        condition: Condition::Slc,
        satisfied: violations.is_empty(),
        witness: Some(Witness::Degree(d)),
        q_values: None,
        violations,
    })
}

/// `p_f ≤ x_f · Π_{f'∈Γ(f)} (1 − x_{f'})`; without `x` the default witness is tried.
pub fn glc<R: Real>(g: &DependencyGraph, p: &[R], x: Option<&[R]>) -> Result<ConditionReport<R>> {
    let m = g.num_vertices();
    check_len("p", p, m)?;
    let x: Vec<R> = match x {
        Some(x) => {
            check_len("x", x, m)?;
            if let Some(bad) = x.iter().find(|v| !(**v > R::zero() && **v < R::one())) {
                return Err(Error::InvalidParameter {
                    name: "x",
                    reason: format!("every x_f must lie in (0,1), got {bad}"),
                });
            }
            x.to_vec()
        }
        None => default_glc_witness(g),
    };
    let violations = (0..m)
        .filter(|&f| {
            let rhs = g
                .neighbors(f)
                .iter()
                .fold(x[f], |acc, h| acc * (R::one() - x[h]));
            p[f] > rhs * (R::one() + slack::<R>())
        })
        .collect::<Vec<_>>();
    Ok(ConditionReport {
        condition: Condition::Glc,
        satisfied: violations.is_empty(),
        witness: Some(Witness::X(x)),
        q_values: None,
        violations,
    })
}

/// `y_f ≥ p_f · Σ_{J ⊆ Γ⁺(f), J ∈ Ind} Π_{f'∈J} y_{f'}`.
pub fn cec<R: Real>(g: &DependencyGraph, p: &[R], y: &[R]) -> Result<ConditionReport<R>> {
    let m = g.num_vertices();
    check_len("p", p, m)?;
    check_len("y", y, m)?;
    if let Some(bad) = y
        .iter()
        .find(|v| !(**v > R::zero()) || !v.is_finite_value())
    {
        return Err(Error::InvalidParameter {
            name: "y",
            reason: format!("every y_f must be positive, got {bad}"),
        });
    }
    let violations = (0..m)
        .filter(|&f| {
            let sum = g
                .independent_subsets_of(g.inclusive(f))
                .into_iter()
                .fold(R::zero(), |acc, j| {
                    acc + j.iter().fold(R::one(), |w, h| w * y[h])
                });
            p[f] * sum > y[f] * (R::one() + slack::<R>())
        })
        .collect::<Vec<_>>();
    Ok(ConditionReport {
        condition: Condition::Cec,
        satisfied: violations.is_empty(),
        witness: Some(Witness::Y(y.to_vec())),
        q_values: None,
        violations,
    })
}

/// `q_∅(p) > 0` and `q_I(p) ≥ 0` for every independent `I`.
pub fn shc<R: Real>(g: &DependencyGraph, p: &[R]) -> Result<ConditionReport<R>> {
    check_len("p", p, g.num_vertices())?;
    let sets = g.independent_sets()?;
    let mut eval = QEvaluator::new(g, p);
    let q_values: Vec<QValue<R>> = sets
        .into_iter()
        .map(|set| QValue {
            set,
            value: eval.q(set),
        })
        .collect();
    let tol = slack::<R>();
    let q_empty = q_values[0].value;
    let satisfied = q_empty > tol && q_values.iter().all(|q| q.value >= -tol);
    Ok(ConditionReport {
        condition: Condition::Shc,
        satisfied,
        witness: None,
        q_values: Some(q_values),
        violations: Vec::new(),
    })
}

/// Whether `p` satisfies `condition` (with `witness` where one is needed).
pub fn check<R: Real>(
    g: &DependencyGraph,
    p: &[R],
    condition: Condition,
    witness: Option<&Witness<R>>,
) -> Result<ConditionReport<R>> {
    match (condition, witness) {
        (Condition::Slc, _) => slc(g, p),
        (Condition::Glc, None) => glc(g, p, None),
        (Condition::Glc, Some(Witness::X(x))) => glc(g, p, Some(x)),
        (Condition::Cec, Some(Witness::Y(y))) => cec(g, p, y),
        (Condition::Cec, None) => Err(Error::InvalidParameter {
            name: "witness",
            reason: "the cluster expansion condition needs an explicit y witness".into(),
        }),
        (Condition::Shc, _) => shc(g, p),
        (c, Some(w)) => Err(Error::InvalidParameter {
            name: "witness",
            reason: format!("witness {w:?} does not fit condition {c}"),
        }),
    }
}

pub fn check_slc<R: Real>(inst: &QsatInstance<R>) -> Result<ConditionReport<R>> {
    slc(&inst.dependency_graph(), &inst.probabilities())
}

pub fn check_glc<R: Real>(inst: &QsatInstance<R>, x: Option<&[R]>) -> Result<ConditionReport<R>> {
    glc(&inst.dependency_graph(), &inst.probabilities(), x)
}

pub fn check_cec<R: Real>(inst: &QsatInstance<R>, y: &[R]) -> Result<ConditionReport<R>> {
    cec(&inst.dependency_graph(), &inst.probabilities(), y)
}

pub fn check_shc<R: Real>(inst: &QsatInstance<R>) -> Result<ConditionReport<R>> {
    shc(&inst.dependency_graph(), &inst.probabilities())
}

/// The ingredients shared by the resampling bound and the tail bounds:
/// `T(t) = 4·A·(t + 1 + min[ln(1/q_∅), L])`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct BoundTerms<R: Real> {
    pub q_empty: R,
    /// `Σ q_{f}/q_∅`, `Σ x/(1−x)` or `Σ y`.
    pub a: R,
    /// `Σ ln(1 + q_{f}/q_∅)`, `Σ ln 1/(1−x)` or `Σ ln(1+y)`.
    pub l: R,
}

impl<R: Real> BoundTerms<R> {
    pub fn log_term(&self) -> R {
        (-self.q_empty.ln()).min(self.l)
    }

    /// Size beyond which the weighted stable-set-sequence tail is below `e^{−t}`.
    pub fn tail_size(&self, t: R) -> R {
        R::lit(4.0) * self.a * (t + R::one() + self.log_term())
    }
}

/// Computes the bound ingredients after confirming the condition holds.
pub fn bound_terms<R: Real>(
    g: &DependencyGraph,
    p: &[R],
    condition: Condition,
    witness: Option<&Witness<R>>,
) -> Result<BoundTerms<R>> {
    let report = check(g, p, condition, witness)?;
    if !report.satisfied {
        return Err(Error::ConditionNotSatisfied(format!(
            "{condition} fails for the given probabilities"
        )));
    }
    Limits::check(
        "flaws for independent set enumeration",
        g.num_vertices(),
        Limits::default().max_independent_set_flaws,
    )?;
    let mut eval = QEvaluator::new(g, p);
    let q_empty = eval.q_empty(g.all());
    if !(q_empty > R::zero()) {
        return Err(Error::ConditionNotSatisfied(format!(
            "q_∅ = {q_empty} is not positive"
        )));
    }
    let (a, l) = match (condition, report.witness) {
        (Condition::Slc, _) | (Condition::Glc, _) => {
            let x = match (condition, witness) {
                (Condition::Glc, Some(Witness::X(x))) => x.clone(),
                _ => default_glc_witness(g),
            };
            if condition == Condition::Slc {
                // The reduction to the general condition must hold for the bound to apply.
                let reduced = glc(g, p, Some(&x))?;
                if !reduced.satisfied {
                    return Err(Error::ConditionNotSatisfied(
                        "the x = 1/d reduction of SLC fails".into(),
                    ));
                }
            }
            x.iter().fold((R::zero(), R::zero()), |(a, l), &x| {
                (a + x / (R::one() - x), l - (R::one() - x).ln())
            })
        }
        (Condition::Cec, Some(Witness::Y(y))) => y
            .iter()
            .fold((R::zero(), R::zero()), |(a, l), &y| (a + y, l + y.ln_1p())),
        (Condition::Shc, _) => (0..g.num_vertices()).fold((R::zero(), R::zero()), |(a, l), f| {
            let r = eval.q(FlawSet::singleton(f)) / q_empty;
            (a + r, l + r.ln_1p())
        }),
        (Condition::Cec, _) => unreachable!("checked above"),
    };
    Ok(BoundTerms { q_empty, a, l })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct ResamplingBound<R: Real> {
    pub condition: Condition,
    pub terms: BoundTerms<R>,
    /// `1 + 4·A·(1 + min[ln(1/q_∅), L])`.
    pub core: R,
    /// `n · core`.
    pub n_scaled: R,
}

/// Graph-level bound; `n` only enters the scaled value.
pub fn resampling_bound_for<R: Real>(
    g: &DependencyGraph,
    p: &[R],
    n: usize,
    condition: Condition,
    witness: Option<&Witness<R>>,
) -> Result<ResamplingBound<R>> {
    let terms = bound_terms(g, p, condition, witness)?;
    let core = R::one() + terms.tail_size(R::zero());
    Ok(ResamplingBound {
        condition,
        terms,
        core,
        n_scaled: core * R::from_usize_lossy(n),
    })
}

pub fn resampling_bound<R: Real>(
    inst: &QsatInstance<R>,
    condition: Condition,
    witness: Option<&Witness<R>>,
) -> Result<ResamplingBound<R>> {
    resampling_bound_for(
        &inst.dependency_graph(),
        &inst.probabilities(),
        inst.n,
        condition,
        witness,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> DependencyGraph {
        DependencyGraph::from_edges(1, &[]).unwrap()
    }

    fn edge() -> DependencyGraph {
        DependencyGraph::from_edges(2, &[(0, 1)]).unwrap()
    }

    /// Star with centre 0 and two leaves: d = 3.
    fn star() -> DependencyGraph {
        DependencyGraph::from_edges(3, &[(0, 1), (0, 2)]).unwrap()
    }

    #[test]
    fn slc_examples() {
        assert!(slc(&star(), &[0.1, 0.1, 0.1]).unwrap().satisfied);
        let r = slc(&star(), &[0.1, 0.2, 0.1]).unwrap();
        assert!(!r.satisfied);
        assert_eq!(r.violations, vec![1]);
        assert!(slc(&single(), &[0.3]).unwrap().satisfied);
        assert_eq!(
            slc(&single(), &[0.3]).unwrap().witness,
            Some(Witness::Degree(1))
        );
    }

    #[test]
    fn glc_examples() {
        let r = glc(&star(), &[0.1, 0.1, 0.1], None).unwrap();
        assert!(r.satisfied);
        assert_eq!(r.witness, Some(Witness::X(vec![1.0 / 3.0; 3])));
        assert!(glc(&single(), &[0.5], Some(&[0.6])).unwrap().satisfied);
        assert!(
            !glc(&edge(), &[0.3, 0.3], Some(&[0.3, 0.3]))
                .unwrap()
                .satisfied
        );
        assert!(glc(&single(), &[0.5], Some(&[1.0])).is_err());
    }

    #[test]
    fn cec_examples() {
        assert!(cec(&single(), &[0.25], &[0.5]).unwrap().satisfied);
        assert!(!cec(&single(), &[0.5], &[0.5]).unwrap().satisfied);
        assert!(cec(&single(), &[0.25], &[0.0]).is_err());
        // Star, y = 1/(d−1) = 1/2: leaf sum over {∅,{leaf},{0}} = 2, centre sum
        // over {∅,{0},{1},{2},{1,2}} = 2.75.
        let r = cec(&star(), &[0.1, 0.1, 0.1], &[0.5, 0.5, 0.5]).unwrap();
        assert!(r.satisfied);
        let r = cec(&star(), &[0.18, 0.26, 0.26], &[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(r.violations, vec![1, 2]);
    }

    #[test]
    fn shc_examples() {
        let r = shc(&single(), &[0.25]).unwrap();
        assert!(r.satisfied);
        let q = r.q_values.unwrap();
        assert_eq!(q[0].value, 0.75);
        assert_eq!(q[1].value, 0.25);
        assert!(!shc(&edge(), &[0.5, 0.5]).unwrap().satisfied);
    }

    #[test]
    fn resampling_bound_single_flaw() {
        let b = resampling_bound_for(&single(), &[0.25], 1, Condition::Shc, None).unwrap();
        let expected = 1.0 + 4.0 / 3.0 * (1.0 + (4.0f64 / 3.0).ln());
        assert!((b.core - expected).abs() < 1e-12);
        assert!((b.core - 2.717).abs() < 1e-3);
    }

    #[test]
    fn resampling_bound_vanishing_probabilities() {
        let b = resampling_bound_for(&edge(), &[1e-12f64, 1e-12], 2, Condition::Shc, None).unwrap();
        assert!((b.core - 1.0).abs() < 1e-9);
    }

    #[test]
    fn resampling_bound_two_independent_flaws() {
        let g = DependencyGraph::from_edges(2, &[]).unwrap();
        let b = resampling_bound_for(&g, &[0.25f64, 0.25], 2, Condition::Shc, None).unwrap();
        assert!((b.terms.q_empty - 9.0 / 16.0).abs() < 1e-15);
        let r = (3.0 / 16.0) / (9.0 / 16.0);
        let l = 2.0 * (1.0f64 + r).ln();
        let expected = 1.0 + 4.0 * 2.0 * r * (1.0 + l.min((16.0f64 / 9.0).ln()));
        assert!((b.core - expected).abs() < 1e-12);
        assert!((b.n_scaled - 2.0 * expected).abs() < 1e-12);
    }

    #[test]
    fn resampling_bound_refuses_unsatisfied() {
        assert!(matches!(
            resampling_bound_for(&edge(), &[0.5, 0.5], 2, Condition::Shc, None),
            Err(Error::ConditionNotSatisfied(_))
        ));
        assert!(resampling_bound_for(&single(), &[0.25], 1, Condition::Cec, None).is_err());
    }

    #[test]
    fn weaker_conditions_give_looser_bounds() {
        let p = [0.1, 0.1, 0.1];
        let shc_b = resampling_bound_for(&star(), &p, 3, Condition::Shc, None).unwrap();
        let glc_b = resampling_bound_for(&star(), &p, 3, Condition::Glc, None).unwrap();
        let slc_b = resampling_bound_for(&star(), &p, 3, Condition::Slc, None).unwrap();
        assert!(shc_b.core <= glc_b.core + 1e-12);
        assert_eq!(glc_b.core, slc_b.core);
    }

    #[test]
    fn condition_parsing() {
        assert_eq!("shc".parse::<Condition>().unwrap(), Condition::Shc);
        assert_eq!("GLC".parse::<Condition>().unwrap(), Condition::Glc);
        assert!("foo".parse::<Condition>().is_err());
        assert_eq!(serde_json::to_string(&Condition::Cec).unwrap(), "\"CEC\"");
    }
}
