//! Instance generators: the two appendix examples, random `k`-local instances
//! (Haar-random images or diagonal/commuting), and chain/cycle topologies.

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param as invalid, Result};
use crate::instance::{Flaw, QsatInstance};
use crate::linalg::{tensor, ComplexMatrix};
use crate::random::random_projector;
use crate::scalar::{c, Real};

/// Where the supports of generated flaws sit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// `m` uniformly random `k`-subsets of the qubits.
    Random { m: usize },
    /// Windows `{i, …, i+k−1}` for `i = 0, …, n−k`.
    Chain,
    /// Windows `{i, …, i+k−1} mod n` for `i = 0, …, n−1`.
    Cycle,
}

/// How generated projectors are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectorKind {
    /// Projector onto a Haar-random `rank`-dimensional subspace.
    Haar,
    /// Diagonal projector onto `rank` random computational basis states
    /// (all such flaws commute).
    Diagonal,
}

fn supports<G: Rng + ?Sized>(
    n: usize,
    k: usize,
    topology: Topology,
    rng: &mut G,
) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > n {
        return Err(invalid("k", format!("locality {k} must lie in 1..={n}")));
    }
    Ok(match topology {
        Topology::Random { m } => (0..m)
            .map(|_| {
                let mut s = sample(rng, n, k).into_vec();
                s.sort_unstable();
                s
            })
            .collect(),
        Topology::Chain => (0..=n - k).map(|i| (i..i + k).collect()).collect(),
        Topology::Cycle => {
            if k == n {
                return Err(invalid("k", "a cycle needs k < n"));
            }
            (0..n)
                .map(|i| {
                    let mut s: Vec<usize> = (0..k).map(|j| (i + j) % n).collect();
                    s.sort_unstable();
                    s
                })
                .collect()
        }
    })
}

fn local_projector<R: Real, G: Rng + ?Sized>(
    k: usize,
    rank: usize,
    kind: ProjectorKind,
    rng: &mut G,
) -> ComplexMatrix<R> {
    let dim = 1usize << k;
    match kind {
        ProjectorKind::Haar => random_projector(dim, rank, rng),
        ProjectorKind::Diagonal => {
            let mut diag = vec![R::zero(); dim];
            for i in sample(rng, dim, rank).into_iter() {
                diag[i] = R::one();
            }
            ComplexMatrix::from_real_diagonal(&diag)
        }
    }
}

/// Random instance with rank-`rank` flaws on `k` qubits each.
pub fn random_instance<R: Real, G: Rng + ?Sized>(
    n: usize,
    k: usize,
    rank: usize,
    topology: Topology,
    kind: ProjectorKind,
    rng: &mut G,
) -> Result<QsatInstance<R>> {
    if rank == 0 || rank >= 1 << k.min(20) {
        return Err(invalid("rank", format!("rank {rank} must lie in 1..2^{k}")));
    }
    let flaws = supports(n, k, topology, rng)?
        .into_iter()
        .enumerate()
        .map(|(i, support)| {
            Flaw::new(
                format!("f{i}"),
                support,
                local_projector(k, rank, kind, rng),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    QsatInstance::new(n, flaws)
}

/// One flaw projecting onto `rank` computational basis states of `k` qubits
/// (`p = rank / 2^k`).
pub fn single_flaw<R: Real>(k: usize, rank: usize) -> Result<QsatInstance<R>> {
    let dim = 1usize << k;
    if rank == 0 || rank >= dim {
        return Err(invalid("rank", format!("rank {rank} must lie in 1..{dim}")));
    }
    let diag: Vec<R> = (0..dim)
        .map(|i| if i >= dim - rank { R::one() } else { R::zero() })
        .collect();
    QsatInstance::new(
        k,
        vec![Flaw::new(
            "f0",
            (0..k).collect(),
            ComplexMatrix::from_real_diagonal(&diag),
        )?],
    )
}

fn ket_one<R: Real>() -> ComplexMatrix<R> {
    ComplexMatrix::basis_projector(2, 1)
}

/// Three commuting flaws on four qubits for which resampling does not commute
/// through measurement: `a = |1⟩⟨1| ⊗ Id` on `{0,1}`, `b = Id ⊗ |1⟩⟨1|` on `{2,3}`,
/// `c = |φ⟩⟨φ|` on `{1,2}` with `φ = (3/5)|00⟩ + (4/5)|11⟩`.
pub fn appendix_e<R: Real>() -> QsatInstance<R> {
    let id = ComplexMatrix::identity(2);
    let a = tensor(&ket_one(), &id).expect("small");
    let b = tensor(&id, &ket_one()).expect("small");
    let phi = DVector::from_vec(vec![
        c(R::lit(0.6)),
        c(R::zero()),
        c(R::zero()),
        c(R::lit(0.8)),
    ]);
    let flaws = vec![
        Flaw::new("a", vec![0, 1], a).expect("valid"),
        Flaw::new("b", vec![2, 3], b).expect("valid"),
        Flaw::new("c", vec![1, 2], ComplexMatrix::outer(&phi)).expect("valid"),
    ];
    QsatInstance::new(4, flaws).expect("valid")
}

/// Two-qubit instance with `Π₁ = |ψ⟩⟨ψ|`, `ψ = √ε|00⟩ + √(1−ε)|11⟩`, and
/// `Π₂ = |1⟩⟨1|` on qubit 1. The unique satisfying state is `|10⟩`.
pub fn appendix_f<R: Real>(epsilon: R) -> Result<QsatInstance<R>> {
    if !(epsilon > R::zero() && epsilon < R::one()) {
        return Err(invalid(
            "epsilon",
            format!("must lie in (0, 1), got {epsilon}"),
        ));
    }
    let psi = DVector::from_vec(vec![
        c(epsilon.sqrt()),
        c(R::zero()),
        c(R::zero()),
        c((R::one() - epsilon).sqrt()),
    ]);
    QsatInstance::new(
        2,
        vec![
            Flaw::new("psi", vec![0, 1], ComplexMatrix::outer(&psi))?,
            Flaw::new("one", vec![1], ket_one())?,
        ],
    )
}
