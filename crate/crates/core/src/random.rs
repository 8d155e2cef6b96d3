//! Random unitaries, states and projectors for generators and property checks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::ComplexMatrix;
use crate::scalar::{Real, C};

fn gaussian<R: Real, G: Rng + ?Sized>(rng: &mut G) -> C<R> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(R::lit(re), R::lit(im))
}

fn ginibre<R: Real, G: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut G) -> DMatrix<C<R>> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-random unitary (QR of a Ginibre matrix with the phase of `R`'s diagonal fixed).
pub fn haar_unitary<R: Real, G: Rng + ?Sized>(dim: usize, rng: &mut G) -> ComplexMatrix<R> {
    let qr = ginibre::<R, G>(dim, dim, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let modulus = d.re.hypot(d.im);
        if modulus > R::zero() {
            let phase = d / modulus;
            q.column_mut(j).iter_mut().for_each(|z| *z *= phase);
        }
    }
    ComplexMatrix::from_dmatrix(q).expect("square")
}

/// Uniformly random unit vector.
pub fn random_pure_state<R: Real, G: Rng + ?Sized>(dim: usize, rng: &mut G) -> DVector<C<R>> {
    let v = DVector::from_fn(dim, |_, _| gaussian::<R, G>(rng));
    let norm = v.norm();
    v.unscale(norm)
}

/// `|ψ⟩⟨ψ|` for a uniformly random `ψ`.
pub fn random_pure_density<R: Real, G: Rng + ?Sized>(dim: usize, rng: &mut G) -> ComplexMatrix<R> {
    ComplexMatrix::outer(&random_pure_state(dim, rng))
}

/// Random density matrix of the given rank (normalized Wishart).
pub fn random_density<R: Real, G: Rng + ?Sized>(
    dim: usize,
    rank: usize,
    rng: &mut G,
) -> ComplexMatrix<R> {
    let g = ginibre::<R, G>(dim, rank.max(1), rng);
    let rho = ComplexMatrix::from_dmatrix(&g * g.adjoint()).expect("square");
    let t = rho.tr();
    rho.scale(R::one() / t)
}

/// Orthogonal projector onto a Haar-random subspace of the given rank.
pub fn random_projector<R: Real, G: Rng + ?Sized>(
    dim: usize,
    rank: usize,
    rng: &mut G,
) -> ComplexMatrix<R> {
    let u = haar_unitary::<R, G>(dim, rng);
    let cols = u.as_dmatrix().columns(0, rank.min(dim)).into_owned();
    ComplexMatrix::from_dmatrix(&cols * cols.adjoint())
        .expect("square")
        .hermitian_part()
}

/// Random Hermitian matrix (GUE-like), not normalized.
pub fn random_hermitian<R: Real, G: Rng + ?Sized>(dim: usize, rng: &mut G) -> ComplexMatrix<R> {
    ComplexMatrix::from_dmatrix(ginibre::<R, G>(dim, dim, rng))
        .expect("square")
        .hermitian_part()
}

/// Random general complex matrix.
pub fn random_matrix<R: Real, G: Rng + ?Sized>(dim: usize, rng: &mut G) -> ComplexMatrix<R> {
    ComplexMatrix::from_dmatrix(ginibre::<R, G>(dim, dim, rng)).expect("square")
}

/// Random state supported on the range of projector `p` (zero if `p = 0`).
pub fn random_density_in<R: Real, G: Rng + ?Sized>(
    p: &ComplexMatrix<R>,
    rng: &mut G,
) -> ComplexMatrix<R> {
    let rho = random_density::<R, G>(p.dim(), p.dim(), rng).conjugate_by(p);
    let t = rho.tr();
    if t > R::zero() {
        rho.scale(R::one() / t).hermitian_part()
    } else {
        rho
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eig, projector_defects};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = haar_unitary::<f64, _>(8, &mut rng);
        let id = &u.adjoint() * &u;
        assert!(id.max_abs_diff(&ComplexMatrix::identity(8)) < 1e-12);
    }

    #[test]
    fn random_projector_has_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_projector::<f64, _>(8, 3, &mut rng);
        let (idem, herm) = projector_defects(&p);
        assert!(idem < 1e-10 && herm < 1e-12);
        assert!((p.tr() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn random_density_is_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density::<f64, _>(4, 2, &mut rng);
        assert!((rho.tr() - 1.0).abs() < 1e-12);
        let eig = hermitian_eig(&rho);
        assert!(eig.eigenvalues[0] > -1e-12);
        assert!(eig.eigenvalues[1].abs() < 1e-12);
    }

    #[test]
    fn random_density_in_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_projector::<f64, _>(4, 2, &mut rng);
        let rho = random_density_in(&p, &mut rng);
        assert!(rho.max_abs_diff(&rho.conjugate_by(&p)) < 1e-12);
        assert!((rho.tr() - 1.0).abs() < 1e-12);
    }
}
