use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qlll::linalg::{
    commutator_norm, embed_local, kernel_projector, partial_trace, spectral_norm, tensor,
    trace_norm,
};
use qlll::random::{random_density, random_hermitian, random_matrix, random_projector};
use qlll::{Matrix64, Real};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_is_associative(seed: u64, da in 1usize..4, db in 1usize..4, dc in 1usize..4) {
        let mut r = rng(seed);
        let (a, b, c) = (random_matrix::<f64, _>(da, &mut r), random_matrix(db, &mut r), random_matrix(dc, &mut r));
        let left = tensor(&tensor(&a, &b).unwrap(), &c).unwrap();
        let right = tensor(&a, &tensor(&b, &c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) <= 1e-12);
    }

    #[test]
    fn disjoint_embeddings_commute(seed: u64, n in 2usize..5) {
        let mut r = rng(seed);
        let split = 1 + (seed as usize % (n - 1));
        let s1: Vec<usize> = (0..split).collect();
        let s2: Vec<usize> = (split..n).rev().collect();
        let a = embed_local(&random_matrix::<f64, _>(1 << s1.len(), &mut r), &s1, n).unwrap();
        let b = embed_local(&random_matrix::<f64, _>(1 << s2.len(), &mut r), &s2, n).unwrap();
        prop_assert!(commutator_norm(&a, &b) <= 1e-10);
    }

    #[test]
    fn local_action_sees_only_the_marginal(seed: u64, k in 1usize..3, rest in 1usize..3) {
        let mut r = rng(seed);
        let n = k + rest;
        let support: Vec<usize> = (0..k).collect();
        let traced: Vec<usize> = (k..n).collect();
        let sigma = random_density::<f64, _>(1 << k, 2, &mut r);
        let rho1 = tensor(&sigma, &random_density(1 << rest, 2, &mut r)).unwrap();
        let rho2 = tensor(&sigma, &random_density(1 << rest, 1, &mut r)).unwrap();
        let u = embed_local(&random_matrix::<f64, _>(1 << k, &mut r), &support, n).unwrap();
        let out1 = partial_trace(&rho1.conjugate_by(&u), &traced, n).unwrap();
        let out2 = partial_trace(&rho2.conjugate_by(&u), &traced, n).unwrap();
        prop_assert!(out1.max_abs_diff(&out2) <= 1e-12);
    }

    #[test]
    fn trace_norm_is_a_norm(seed: u64, dim in 1usize..9, s in -3.0f64..3.0) {
        let mut r = rng(seed);
        let a = random_matrix::<f64, _>(dim, &mut r);
        let b = random_matrix::<f64, _>(dim, &mut r);
        let sum = &a + &b;
        prop_assert!(trace_norm(&sum) <= trace_norm(&a) + trace_norm(&b) + 1e-10);
        prop_assert!((trace_norm(&a.scale(s)) - s.abs() * trace_norm(&a)).abs() <= 1e-10 * (1.0 + trace_norm(&a)));
    }

    #[test]
    fn holder_special_case(seed: u64, dim in 1usize..9) {
        let mut r = rng(seed);
        let a = random_matrix::<f64, _>(dim, &mut r);
        let b = random_matrix::<f64, _>(dim, &mut r);
        prop_assert!(trace_norm(&(&a * &b)) <= trace_norm(&a) * spectral_norm(&b) * (1.0 + 1e-12));
    }

    #[test]
    fn kernel_projector_annihilates(seed: u64, dim in 2usize..9) {
        let mut r = rng(seed);
        let rank = 1 + (seed as usize % (dim - 1));
        let p = random_projector::<f64, _>(dim, rank, &mut r);
        let h = random_hermitian::<f64, _>(dim, &mut r);
        // A PSD matrix with a nontrivial kernel: P H² P.
        let psd = (&h * &h).conjugate_by(&p);
        let k = kernel_projector(&psd, f64::zero_tol()).unwrap();
        let residual = (&(&k * &psd) * &k).tr();
        prop_assert!(residual.abs() <= dim as f64 * f64::zero_tol());
        prop_assert!((k.tr() - (dim - rank) as f64).abs() < 1e-9);
    }
}

#[test]
fn single_precision_matches_double() {
    let mut r = rng(5);
    let p64 = random_projector::<f64, _>(4, 2, &mut r);
    let p32: qlll::Matrix32 = qlll::ComplexMatrix::from_fn(4, |i, j| {
        let z = p64.get(i, j);
        qlll::C::new(z.re as f32, z.im as f32)
    });
    let k64 = kernel_projector(&p64, f64::zero_tol()).unwrap();
    let k32 = kernel_projector(&p32, f32::zero_tol()).unwrap();
    assert!((k32.tr() - 2.0).abs() < 1e-4);
    assert!((k64.tr() - 2.0).abs() < 1e-12);
    let _: Matrix64 = k64;
}
