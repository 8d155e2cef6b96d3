//! Dense complex linear algebra on qubit registers.
//!
//! Basis convention: qubit 0 is the most significant bit of a basis index, so
//! for `n` qubits the bit of qubit `q` sits at position `n - 1 - q`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen, SVD};
use num_complex::Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::scalar::{c, cabs, Real, C};

type RawSvd<R> = SVD<C<R>, Dyn, Dyn>;

/// Dense square matrix of complex entries.
///
/// `dim > 0` always holds; finiteness is checked where matrices enter the
/// crate from outside ([`ComplexMatrix::validate_finite`]).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix<R: Real> {
    data: DMatrix<C<R>>,
}

impl<R: Real> ComplexMatrix<R> {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self {
            data: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self {
            data: DMatrix::identity(dim, dim),
        }
    }

    /// `Id / dim`, the maximally mixed state.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self::identity(dim).scale(R::one() / R::from_usize_lossy(dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C<R>) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self {
            data: DMatrix::from_fn(dim, dim, f),
        }
    }

    /// Builds from row-major entries.
    pub fn from_rows(rows: &[Vec<C<R>>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    pub fn from_real_diagonal(diag: &[R]) -> Self {
        Self::from_fn(
            diag.len(),
            |i, j| if i == j { c(diag[i]) } else { C::default() },
        )
    }

    /// `|v⟩⟨v|` (not normalized).
    pub fn outer(v: &DVector<C<R>>) -> Self {
        assert!(!v.is_empty(), "vector must be non-empty");
        Self {
            data: v * v.adjoint(),
        }
    }

    /// Computational basis projector `|k⟩⟨k|`.
    pub fn basis_projector(dim: usize, k: usize) -> Self {
        Self::from_fn(dim, |i, j| {
            if i == k && j == k {
                c(R::one())
            } else {
                C::default()
            }
        })
    }

    /// Wraps an existing square nalgebra matrix.
    pub fn from_dmatrix(data: DMatrix<C<R>>) -> Result<Self> {
        if data.nrows() != data.ncols() || data.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: data.nrows().max(1),
                got: data.ncols(),
            });
        }
        Ok(Self { data })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C<R>> {
        &self.data
    }

    pub fn into_dmatrix(self) -> DMatrix<C<R>> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C<R> {
        self.data[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C<R>) {
        self.data[(row, col)] = value;
    }

    pub fn adjoint(&self) -> Self {
        Self {
            data: self.data.adjoint(),
        }
    }

    pub fn trace(&self) -> C<R> {
        self.data.trace()
    }

    /// Real part of the trace.
    pub fn tr(&self) -> R {
        self.data.trace().re
    }

    pub fn scale(&self, s: R) -> Self {
        Self {
            data: self.data.map(|z| z * s),
        }
    }

    pub fn scale_complex(&self, s: C<R>) -> Self {
        Self {
            data: &self.data * s,
        }
    }

    /// `a · self · a†`.
    pub fn conjugate_by(&self, a: &Self) -> Self {
        Self {
            data: complex_product(&complex_product(&a.data, &self.data), &a.data.adjoint()),
        }
    }

    /// `(self + self†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let half = R::lit(0.5);
        Self {
            data: (&self.data + self.data.adjoint()).map(|z| z * half),
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> R {
        self.data.iter().fold(R::zero(), |acc, z| acc.max(cabs(*z)))
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> R {
        assert_eq!(self.dim(), other.dim());
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(R::zero(), |acc, (a, b)| acc.max(cabs(*a - *b)))
    }

    pub fn hermiticity_defect(&self) -> R {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: R) -> bool {
        self.hermiticity_defect() <= tol * R::one().max(self.max_abs())
    }

    pub fn validate_finite(&self) -> Result<()> {
        if self
            .data
            .iter()
            .all(|z| z.re.is_finite_value() && z.im.is_finite_value())
        {
            Ok(())
        } else {
            Err(Error::Parse("matrix has non-finite entries".into()))
        }
    }

    /// `tr(self · other)`, computed without forming the product.
    pub fn trace_product(&self, other: &Self) -> C<R> {
        let n = self.dim();
        let mut acc = C::default();
        for i in 0..n {
            for k in 0..n {
                acc += self.data[(i, k)] * other.data[(k, i)];
            }
        }
        acc
    }

    /// Row-major `[re, im]` pairs, used by file formats.
    pub fn to_pairs(&self) -> Vec<Vec<[R; 2]>> {
        (0..self.dim())
            .map(|i| {
                (0..self.dim())
                    .map(|j| {
                        let z = self.data[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect()
    }

    pub fn from_pairs(rows: &[Vec<[R; 2]>]) -> Result<Self> {
        let converted: Vec<Vec<C<R>>> = rows
            .iter()
            .map(|r| r.iter().map(|p| Complex::new(p[0], p[1])).collect())
            .collect();
        let m = Self::from_rows(&converted)?;
        m.validate_finite()?;
        Ok(m)
    }

    /// Converts to another precision.
    pub fn cast<S: Real>(&self) -> ComplexMatrix<S> {
        ComplexMatrix {
            data: self
                .data
                .map(|z| Complex::new(S::lit(z.re.as_f64()), S::lit(z.im.as_f64()))),
        }
    }
}

impl<R: Real> Serialize for ComplexMatrix<R> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_pairs().serialize(serializer)
    }
}

impl<'de, R: Real> Deserialize<'de> for ComplexMatrix<R> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[R; 2]>> = Vec::deserialize(deserializer)?;
        Self::from_pairs(&rows).map_err(serde::de::Error::custom)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl<'a, R: Real> $trait<&'a ComplexMatrix<R>> for &'a ComplexMatrix<R> {
            type Output = ComplexMatrix<R>;
            fn $method(self, rhs: &'a ComplexMatrix<R>) -> ComplexMatrix<R> {
                assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
                ComplexMatrix { data: &self.data $op &rhs.data }
            }
        }
        impl<R: Real> $trait<ComplexMatrix<R>> for ComplexMatrix<R> {
            type Output = ComplexMatrix<R>;
            fn $method(self, rhs: ComplexMatrix<R>) -> ComplexMatrix<R> {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);

impl<'a, R: Real> Mul<&'a ComplexMatrix<R>> for &'a ComplexMatrix<R> {
    type Output = ComplexMatrix<R>;
    fn mul(self, rhs: &'a ComplexMatrix<R>) -> ComplexMatrix<R> {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        ComplexMatrix {
            data: complex_product(&self.data, &rhs.data),
        }
    }
}

impl<R: Real> Mul<ComplexMatrix<R>> for ComplexMatrix<R> {
    type Output = ComplexMatrix<R>;
    fn mul(self, rhs: ComplexMatrix<R>) -> ComplexMatrix<R> {
        &self * &rhs
    }
}

/// Below this many multiply-adds the direct complex product is used.
const SPLIT_PRODUCT_MIN_WORK: usize = 4096;

/// `a · b`, computed as four real products when large enough: nalgebra runs real
/// products through its blocked kernels but complex ones through a generic loop.
pub fn complex_product<R: Real>(a: &DMatrix<C<R>>, b: &DMatrix<C<R>>) -> DMatrix<C<R>> {
    assert_eq!(a.ncols(), b.nrows(), "dimension mismatch");
    if a.nrows() * a.ncols() * b.ncols() < SPLIT_PRODUCT_MIN_WORK {
        return a * b;
    }
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    re.zip_map(&im, Complex::new)
}

impl<R: Real> AddAssign<&ComplexMatrix<R>> for ComplexMatrix<R> {
    fn add_assign(&mut self, rhs: &ComplexMatrix<R>) {
        self.data += &rhs.data;
    }
}

impl<R: Real> SubAssign<&ComplexMatrix<R>> for ComplexMatrix<R> {
    fn sub_assign(&mut self, rhs: &ComplexMatrix<R>) {
        self.data -= &rhs.data;
    }
}

impl<R: Real> Neg for &ComplexMatrix<R> {
    type Output = ComplexMatrix<R>;
    fn neg(self) -> ComplexMatrix<R> {
        ComplexMatrix {
            data: -self.data.clone(),
        }
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEig<R: Real> {
    pub eigenvalues: Vec<R>,
    /// Columns are the eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<C<R>>,
}

impl<R: Real> HermitianEig<R> {
    /// `V diag(g(λ)) V†`.
    pub fn reconstruct_with(&self, g: impl Fn(R) -> R) -> ComplexMatrix<R> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, lambda) in self.eigenvalues.iter().enumerate() {
            let s = g(*lambda);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        ComplexMatrix {
            data: scaled * v.adjoint(),
        }
    }

    pub fn reconstruct(&self) -> ComplexMatrix<R> {
        self.reconstruct_with(|l| l)
    }
}

/// Singular value decomposition `A = W diag(Σ) U†`, Σ descending.
#[derive(Clone, Debug)]
pub struct Svd<R: Real> {
    pub w: DMatrix<C<R>>,
    pub sigma: Vec<R>,
    pub u: DMatrix<C<R>>,
}

impl<R: Real> Svd<R> {
    pub fn reconstruct(&self) -> ComplexMatrix<R> {
        let mut ws = self.w.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            ws.column_mut(j).iter_mut().for_each(|z| *z *= *s);
        }
        ComplexMatrix {
            data: ws * self.u.adjoint(),
        }
    }

    /// `sgn(Σ)` with singular values `≤ rel_tol · σ_max` counted as zero.
    pub fn sign_pattern(&self, rel_tol: R) -> Vec<bool> {
        let smax = self.sigma.first().copied().unwrap_or_else(R::zero);
        let cut = rel_tol * smax;
        self.sigma
            .iter()
            .map(|s| smax > R::zero() && *s > cut)
            .collect()
    }

    /// `X sgn(Σ) Y†` for `X, Y ∈ {W, U}`.
    pub fn signed_product(
        &self,
        left: &DMatrix<C<R>>,
        right: &DMatrix<C<R>>,
        rel_tol: R,
    ) -> ComplexMatrix<R> {
        let pattern = self.sign_pattern(rel_tol);
        let mut l = left.clone();
        for (j, keep) in pattern.iter().enumerate() {
            if !keep {
                l.column_mut(j).fill(C::default());
            }
        }
        ComplexMatrix {
            data: l * right.adjoint(),
        }
    }

    /// The unitary `W U†`.
    pub fn rotation(&self) -> ComplexMatrix<R> {
        ComplexMatrix {
            data: &self.w * self.u.adjoint(),
        }
    }
}

pub fn hermitian_eig<R: Real>(a: &ComplexMatrix<R>) -> HermitianEig<R> {
    let h = a.hermitian_part();
    let eig = SymmetricEigen::new(h.data);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let dim = order.len();
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(dim, dim, |r, k| eig.eigenvectors[(r, order[k])]);
    HermitianEig {
        eigenvalues,
        eigenvectors,
    }
}

pub fn svd<R: Real>(a: &ComplexMatrix<R>) -> Svd<R> {
    let dim = a.dim();
    // No single convergence threshold of the complex bidiagonal SVD is accurate on
    // every rank-deficient input (products of projectors): some leave residue at the
    // default threshold, others go wrong at a tighter one. Try several and keep the
    // decomposition with the smallest reconstruction and orthonormality residual.
    let eps = R::default_epsilon();
    let scale = a.data.iter().fold(R::one(), |m, z| m.max(z.re.hypot(z.im)));
    let good_enough = eps * R::lit(64.0) * R::from_usize_lossy(dim.max(1)) * scale;
    let id = DMatrix::<C<R>>::identity(dim, dim);
    let residual = |d: &SVD<C<R>, Dyn, Dyn>| -> R {
        let (Some(w), Some(v_t)) = (&d.u, &d.v_t) else {
            return R::infinity();
        };
        let sigma = DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                C::from(d.singular_values[i])
            } else {
                C::from(R::zero())
            }
        });
        let max_abs =
            |m: DMatrix<C<R>>| m.iter().fold(R::zero(), |acc, z| acc.max(z.re.hypot(z.im)));
        max_abs(w * sigma * v_t - &a.data)
            + max_abs(w.adjoint() * w - &id)
            + max_abs(v_t * v_t.adjoint() - &id)
    };
    let mut best: Option<(R, RawSvd<R>)> = None;
    for threshold in [eps, eps * eps, eps * R::lit(1e-4)] {
        let Some(d) = SVD::try_new(a.data.clone(), true, true, threshold, 0) else {
            continue;
        };
        let r = residual(&d);
        if best.as_ref().is_none_or(|(b, _)| r < *b) {
            best = Some((r, d));
        }
        if r <= good_enough {
            break;
        }
    }
    let decomposition = match best {
        Some((_, d)) => d,
        None => SVD::new(a.data.clone(), true, true),
    };
    let w = decomposition.u.expect("left singular vectors requested");
    let v_t = decomposition.v_t.expect("right singular vectors requested");
    let s = decomposition.singular_values;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap_or(std::cmp::Ordering::Equal));
    let sigma = order.iter().map(|&i| s[i].max(R::zero())).collect();
    let w = DMatrix::from_fn(dim, dim, |r, k| w[(r, order[k])]);
    // v_t rows are the right singular vectors (conjugated).
    let u = DMatrix::from_fn(dim, dim, |r, k| v_t[(order[k], r)].conj());
    Svd { w, sigma, u }
}

/// Kronecker product with `a`'s indices outermost.
pub fn tensor<R: Real>(a: &ComplexMatrix<R>, b: &ComplexMatrix<R>) -> Result<ComplexMatrix<R>> {
    tensor_with_limit(a, b, Limits::default().max_dim())
}

pub fn tensor_with_limit<R: Real>(
    a: &ComplexMatrix<R>,
    b: &ComplexMatrix<R>,
    max_dim: usize,
) -> Result<ComplexMatrix<R>> {
    let dim = a.dim().saturating_mul(b.dim());
    if dim > max_dim {
        return Err(Error::TooLarge {
            what: "tensor dimension",
            value: dim,
            limit: max_dim,
        });
    }
    Ok(ComplexMatrix {
        data: a.data.kronecker(&b.data),
    })
}

#[inline]
fn bit(q: usize, n: usize) -> usize {
    1usize << (n - 1 - q)
}

/// Reads the bits of `index` on `qubits` into a local index, first qubit most significant.
#[inline]
fn gather(index: usize, qubits: &[usize], n: usize) -> usize {
    qubits.iter().fold(0, |acc, &q| {
        (acc << 1) | usize::from(index & bit(q, n) != 0)
    })
}

/// Writes the bits of local index `local` onto `qubits` of a zeroed index.
#[inline]
fn scatter(local: usize, qubits: &[usize], n: usize) -> usize {
    let k = qubits.len();
    qubits.iter().enumerate().fold(0, |acc, (j, &q)| {
        if local & (1 << (k - 1 - j)) != 0 {
            acc | bit(q, n)
        } else {
            acc
        }
    })
}

fn check_qubits(qubits: &[usize], n: usize) -> Result<()> {
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n {
            return Err(Error::IndexOutOfRange { index: q, n });
        }
        if qubits[..i].contains(&q) {
            return Err(Error::InvalidParameter {
                name: "support",
                reason: format!("qubit {q} listed twice"),
            });
        }
    }
    Ok(())
}

fn register_dim(n: usize) -> Result<usize> {
    let max = Limits::from_env().unwrap_or_default().max_qubits;
    if n > max {
        return Err(Error::TooLarge {
            what: "qubits",
            value: n,
            limit: max,
        });
    }
    Ok(1usize << n)
}

/// Embeds an operator on `support` into an `n`-qubit register (identity elsewhere).
///
/// The `j`-th tensor factor of `op` acts on qubit `support[j]`.
pub fn embed_local<R: Real>(
    op: &ComplexMatrix<R>,
    support: &[usize],
    n: usize,
) -> Result<ComplexMatrix<R>> {
    check_qubits(support, n)?;
    let k = support.len();
    if op.dim() != 1 << k {
        return Err(Error::DimensionMismatch {
            expected: 1 << k,
            got: op.dim(),
        });
    }
    let dim = register_dim(n)?;
    let mask = support.iter().fold(0, |m, &q| m | bit(q, n));
    let mut out = ComplexMatrix::zeros(dim);
    for r in 0..dim {
        let lr = gather(r, support, n);
        let base = r & !mask;
        for lc in 0..(1 << k) {
            let z = op.data[(lr, lc)];
            if z != C::default() {
                out.data[(r, base | scatter(lc, support, n))] = z;
            }
        }
    }
    Ok(out)
}

/// Traces out `traced` qubits; the kept qubits stay in ascending order.
pub fn partial_trace<R: Real>(
    rho: &ComplexMatrix<R>,
    traced: &[usize],
    n: usize,
) -> Result<ComplexMatrix<R>> {
    check_qubits(traced, n)?;
    if rho.dim() != 1 << n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            got: rho.dim(),
        });
    }
    let kept: Vec<usize> = (0..n).filter(|q| !traced.contains(q)).collect();
    let kd = 1usize << kept.len();
    let td = 1usize << traced.len();
    let mut out = ComplexMatrix::zeros(kd);
    for ri in 0..kd {
        let rbase = scatter(ri, &kept, n);
        for ci in 0..kd {
            let cbase = scatter(ci, &kept, n);
            let mut acc = C::default();
            for x in 0..td {
                let xs = scatter(x, traced, n);
                acc += rho.data[(rbase | xs, cbase | xs)];
            }
            out.data[(ri, ci)] = acc;
        }
    }
    Ok(out)
}

/// Replaces `qubits` by maximally mixed qubits: `Tr_q[ρ] ⊗ Id_q / 2^|q|`.
pub fn depolarize_qubits<R: Real>(
    rho: &ComplexMatrix<R>,
    qubits: &[usize],
    n: usize,
) -> Result<ComplexMatrix<R>> {
    check_qubits(qubits, n)?;
    let dim = 1usize << n;
    if rho.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: rho.dim(),
        });
    }
    let mask = qubits.iter().fold(0, |m, &q| m | bit(q, n));
    let td = 1usize << qubits.len();
    let weight = R::one() / R::from_usize_lossy(td);
    let scattered: Vec<usize> = (0..td).map(|x| scatter(x, qubits, n)).collect();
    let mut out = ComplexMatrix::zeros(dim);
    for r in 0..dim {
        if r & mask != 0 {
            continue;
        }
        for col in 0..dim {
            if col & mask != 0 {
                continue;
            }
            let mut acc = C::default();
            for &xs in &scattered {
                acc += rho.data[(r | xs, col | xs)];
            }
            let value = acc * weight;
            for &xs in &scattered {
                out.data[(r | xs, col | xs)] = value;
            }
        }
    }
    Ok(out)
}

/// Sum of singular values.
pub fn trace_norm<R: Real>(a: &ComplexMatrix<R>) -> R {
    let s = SVD::new(a.data.clone(), false, false);
    s.singular_values.iter().fold(R::zero(), |acc, v| acc + *v)
}

/// `Σ|λᵢ|` for a Hermitian matrix (equals the trace norm).
pub fn trace_norm_hermitian<R: Real>(a: &ComplexMatrix<R>) -> R {
    hermitian_eig(a)
        .eigenvalues
        .iter()
        .fold(R::zero(), |acc, l| acc + l.abs())
}

/// Largest singular value.
pub fn spectral_norm<R: Real>(a: &ComplexMatrix<R>) -> R {
    let s = SVD::new(a.data.clone(), false, false);
    s.singular_values
        .iter()
        .fold(R::zero(), |acc, v| acc.max(*v))
}

fn require_hermitian<R: Real>(a: &ComplexMatrix<R>) -> Result<()> {
    if a.is_hermitian(R::hermitian_tol()) {
        Ok(())
    } else {
        Err(Error::NotHermitian(a.hermiticity_defect().as_f64()))
    }
}

/// Scaled violation of `a ⪯ b`: `max(0, −λ_min(b − a)) / max(1, ‖b − a‖₁)`.
pub fn psd_violation<R: Real>(a: &ComplexMatrix<R>, b: &ComplexMatrix<R>) -> Result<R> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    require_hermitian(a)?;
    require_hermitian(b)?;
    let eig = hermitian_eig(&(b - a));
    let norm = eig
        .eigenvalues
        .iter()
        .fold(R::zero(), |acc, l| acc + l.abs());
    let lmin = eig.eigenvalues.first().copied().unwrap_or_else(R::zero);
    Ok((-lmin).max(R::zero()) / R::one().max(norm))
}

/// `a ⪯ b` up to `tol`: `λ_min(b − a) ≥ −tol · max(1, ‖b − a‖₁)`.
pub fn psd_leq<R: Real>(a: &ComplexMatrix<R>, b: &ComplexMatrix<R>, tol: R) -> Result<bool> {
    Ok(psd_violation(a, b)? <= tol)
}

/// `0 ⪯ a` up to `tol`, relative to `max(1, ‖a‖₁)`.
pub fn is_psd<R: Real>(a: &ComplexMatrix<R>, tol: R) -> Result<bool> {
    psd_leq(&ComplexMatrix::zeros(a.dim()), a, tol)
}

struct ScaledSpectrum<R: Real> {
    eig: HermitianEig<R>,
    threshold: R,
}

fn scaled_spectrum<R: Real>(h: &ComplexMatrix<R>, zero_tol: R) -> Result<ScaledSpectrum<R>> {
    require_hermitian(h)?;
    let eig = hermitian_eig(h);
    let norm_inf = eig
        .eigenvalues
        .iter()
        .fold(R::zero(), |acc, l| acc.max(l.abs()));
    let threshold = zero_tol * R::one().max(norm_inf);
    if let Some(&lmin) = eig.eigenvalues.first() {
        if lmin < -threshold {
            return Err(Error::NotPsd(lmin.as_f64()));
        }
    }
    Ok(ScaledSpectrum { eig, threshold })
}

/// Orthogonal projector onto the span of eigenvectors with eigenvalue `≤ zero_tol`
/// (relative to `‖h‖∞` when that exceeds 1).
pub fn kernel_projector<R: Real>(h: &ComplexMatrix<R>, zero_tol: R) -> Result<ComplexMatrix<R>> {
    let spec = scaled_spectrum(h, zero_tol)?;
    let threshold = spec.threshold;
    let p = spec
        .eig
        .reconstruct_with(|l| if l <= threshold { R::one() } else { R::zero() });
    Ok(p.hermitian_part())
}

/// Smallest eigenvalue above `zero_tol` (relative as in [`kernel_projector`]),
/// or `+∞` when every eigenvalue is zero.
pub fn smallest_nonzero_eig<R: Real>(h: &ComplexMatrix<R>, zero_tol: R) -> Result<R> {
    let spec = scaled_spectrum(h, zero_tol)?;
    Ok(spec
        .eig
        .eigenvalues
        .iter()
        .copied()
        .find(|l| *l > spec.threshold)
        .unwrap_or_else(R::infinity))
}

/// Rank of an orthogonal projector (rounded trace).
pub fn projector_rank<R: Real>(p: &ComplexMatrix<R>) -> usize {
    p.tr().as_f64().round().max(0.0) as usize
}

/// `‖P² − P‖₁` and `‖P − P†‖₁`.
pub fn projector_defects<R: Real>(p: &ComplexMatrix<R>) -> (R, R) {
    let idem = trace_norm(&(&(p * p) - p));
    let herm = trace_norm(&(p - &p.adjoint()));
    (idem, herm)
}

/// `‖A, B‖` commutator trace norm.
pub fn commutator_norm<R: Real>(a: &ComplexMatrix<R>, b: &ComplexMatrix<R>) -> R {
    trace_norm(&(&(a * b) - &(b * a)))
}
