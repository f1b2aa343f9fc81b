use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use calderon_core::calderon::{nonnegative_projection, spectral_projection_contour};
use calderon_core::csalg::CStarAlgebra;
use calderon_core::hilbmod::*;
use calderon_core::linalg::*;

fn algebra(kind: u8) -> std::sync::Arc<CStarAlgebra> {
    match kind % 4 {
        0 => CStarAlgebra::matrix(2).unwrap(),
        1 => CStarAlgebra::matrix(3).unwrap(),
        2 => CStarAlgebra::cyclic(4).unwrap(),
        _ => CStarAlgebra::symmetric(3).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_is_right_linear(seed in any::<u64>(), kind in 0u8..4, rank in 1usize..4) {
        let alg = algebra(kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = ModuleVector::random(&alg, rank, &mut rng);
        let y = ModuleVector::random(&alg, rank, &mut rng);
        let a = alg.random_element(&mut rng);
        let lhs = x.inner(&y.right_mul(&a).unwrap()).unwrap();
        let rhs = &x.inner(&y).unwrap() * &a;
        prop_assert!(lhs.approx_eq(&rhs, 1e-12));
    }

    #[test]
    fn products_stay_in_the_algebra(seed in any::<u64>(), kind in 0u8..4) {
        let alg = algebra(kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = alg.random_element(&mut rng);
        let b = alg.random_element(&mut rng);
        let ab = a.try_mul(&b).unwrap();
        prop_assert!(alg.residual(ab.matrix()) < 1e-12);
        prop_assert!((ab.star().matrix() - b.star().try_mul(&a.star()).unwrap().matrix()).norm() < 1e-12);
    }

    #[test]
    fn relative_index_is_antisymmetric(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = hermitian_function(&random_hermitian(&mut rng, n), |l| if l > 0.0 { 1.0 } else { 0.0 });
        let q = hermitian_function(&random_hermitian(&mut rng, n), |l| if l > 0.3 { 1.0 } else { 0.0 });
        let pq = relative_index_matrix(&p, &q).unwrap().index;
        let qp = relative_index_matrix(&q, &p).unwrap().index;
        prop_assert_eq!(pq, -qp);
        prop_assert_eq!(relative_index_matrix(&p, &p).unwrap().index, 0);
    }

    #[test]
    fn orthogonalization_is_idempotent_as_a_map(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = hermitian_function(&random_hermitian(&mut rng, n), |l| if l > 0.0 { 1.0 } else { 0.0 });
        let s = eye(n) + random_matrix(&mut rng, n, n) * cr(0.2);
        let c = &s * p * inverse(&s).unwrap();
        let once = orthogonalize_idempotent_matrix(&c).unwrap().projection;
        let twice = orthogonalize_idempotent_matrix(&once).unwrap().projection;
        prop_assert!(op_norm(&(twice - &once)) < 1e-12);
    }

    #[test]
    fn contour_matches_eigenprojection(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_hermitian(&mut rng, n);
        let (vals, _) = hermitian_eigen(&b);
        prop_assume!(vals.iter().all(|l| l.abs() > 0.1));
        let q = spectral_projection_contour(&b).unwrap().projection;
        prop_assert!(op_norm(&(q - nonnegative_projection(&b))) < 1e-10);
    }
}
