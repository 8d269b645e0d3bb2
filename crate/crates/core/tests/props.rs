mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use qldp_core::exact::ExactSystem;
use qldp_core::level2::Level2;
use qldp_core::model::{site, LatticeBox};
use qldp_core::opalg::{herm_eig, kron, psi_functional, psi_norm, spin, Operator};
use qldp_core::polymer::{ursell, Polymer};
use qldp_core::random::{random_hermitian, random_invertible, random_matrix, seeded};
use qldp_core::{Caps, ClusterExpansion, Model, Potential};

fn random_pair_model(seed: u64) -> Model {
    let mut rng = seeded(seed);
    let pair = random_hermitian(4, &mut rng);
    let x = random_hermitian(2, &mut rng);
    Model::new(Potential::nearest_neighbour(1, &pair).unwrap(), x).unwrap()
}

fn bond(i: i32) -> Polymer {
    Polymer::new(vec![vec![site(&[i]), site(&[i + 1])]]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn psi_functional_bounded_by_norm(seed in any::<u64>(), dim in 2usize..5) {
        let mut rng = seeded(seed);
        let x = random_invertible(dim, &mut rng);
        let b = random_matrix(dim, &mut rng);
        let b = b.scale(qldp_core::C64::new(1.0 / b.spectral_norm(), 0.0));
        let p = psi_norm(&x).unwrap();
        prop_assert!(psi_functional(&x, &b).norm() <= p.norm + 1e-9);
        prop_assert!(p.norm >= 1.0 - 1e-12);
    }

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), dim in 1usize..6) {
        let mut rng = seeded(seed);
        let a = random_hermitian(dim, &mut rng);
        let back = herm_eig(&a).unwrap().reconstruct();
        prop_assert!((&back - &a).max_abs() <= 1e-10);
    }

    #[test]
    fn finite_f_vanishes_at_zero_and_is_convex(seed in any::<u64>(), t in -2.0f64..2.0, s in -2.0f64..2.0, beta in 0.0f64..1.5) {
        let model = random_pair_model(seed);
        let sys = ExactSystem::new(&model, &LatticeBox::chain(3).unwrap(), &Caps::default()).unwrap();
        prop_assert_eq!(sys.finite_f(0.0, beta), 0.0);
        let mid = sys.finite_f((t + s) / 2.0, beta);
        prop_assert!(mid <= (sys.finite_f(t, beta) + sys.finite_f(s, beta)) / 2.0 + 1e-10);
    }

    #[test]
    fn golden_thompson_gap_nonnegative(seed in any::<u64>(), t in -2.0f64..2.0, beta in 0.0f64..2.0) {
        let model = random_pair_model(seed);
        let sys = ExactSystem::new(&model, &LatticeBox::chain(2).unwrap(), &Caps::default()).unwrap();
        prop_assert!(sys.golden_thompson_gap(t, beta).gap >= -1e-10);
    }

    #[test]
    fn ursell_is_permutation_invariant(shifts in proptest::collection::vec(-2i32..3, 1..5), rot in 0usize..4) {
        let polys: Vec<Polymer> = shifts.iter().map(|&i| bond(i)).collect();
        let mut rotated = polys.clone();
        let k = rot % rotated.len();
        rotated.rotate_left(k);
        let caps = Caps::default();
        prop_assert_eq!(ursell(&polys, &caps).unwrap(), ursell(&rotated, &caps).unwrap());
    }

    #[test]
    fn cluster_series_matches_dense_oracle(seed in any::<u64>(), t in -1.0f64..1.0) {
        let model = random_pair_model(seed);
        let volume = LatticeBox::chain(4).unwrap();
        let engine = ClusterExpansion::new(&model, 3, &Caps::default()).unwrap();
        let coeffs = engine.box_coefficients(volume.sites(), &engine.linear_tilt(c(t))).unwrap();
        let oracle = log_moment_series(&product_density(&model.observable, t, 4), &[hamiltonian(&model, &volume)], 3);
        for k in 1..=3usize {
            let got = coeffs[engine.basis().index_of(&[k as u8]).unwrap()];
            prop_assert!((got - oracle.get(&[k])).norm() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn level2_psi_is_convex_and_shift_covariant(
        f in proptest::collection::vec(-2.0f64..2.0, 2),
        g in proptest::collection::vec(-2.0f64..2.0, 2),
        shift in -1.0f64..1.0,
    ) {
        let zz = kron(&spin::sz(), &spin::sz());
        let model = Model::new(Potential::nearest_neighbour(1, &zz).unwrap(), spin::sx()).unwrap();
        let engine = Arc::new(ClusterExpansion::new(&model, 2, &Caps::default()).unwrap());
        let l2 = Level2::new(engine, 0.01).unwrap();
        let mid: Vec<f64> = f.iter().zip(&g).map(|(a, b)| (a + b) / 2.0).collect();
        let pf = l2.psi(&f).unwrap();
        prop_assert!(l2.psi(&mid).unwrap() <= (pf + l2.psi(&g).unwrap()) / 2.0 + 1e-10);
        let shifted: Vec<f64> = f.iter().map(|a| a + shift).collect();
        prop_assert!((l2.psi(&shifted).unwrap() - pf - shift).abs() <= 1e-10);
    }

    #[test]
    fn free_rate_function_is_nonnegative(x in -0.95f64..0.95, t_max in 3.0f64..6.0) {
        let free = Model::new(Potential::zero(1, 2), Operator::from_diagonal(&[-1.0, 1.0])).unwrap();
        let engine = Arc::new(ClusterExpansion::new(&free, 1, &Caps::default()).unwrap());
        let gf = qldp_core::ldp::cluster_generating_function(engine, qldp_core::ldp::t_grid(t_max, 0.1), 0.0).unwrap();
        let rate = qldp_core::ldp::legendre(&gf, &[x]).unwrap();
        prop_assert!(rate.i_values[0] >= -1e-12);
    }
}
