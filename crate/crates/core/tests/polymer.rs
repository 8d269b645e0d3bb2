mod common;

use common::*;
use qldp_core::model::{site, LatticeBox};
use qldp_core::opalg::{kron, mat_exp, spin, Operator, C64};
use qldp_core::polymer::{
    enumerate_clusters, omega_t, rho, rho_tilde, ursell, ClusterExpansion, DegreeCaps, Polymer,
    SignConvention, TiltRegion,
};
use qldp_core::{Caps, Model, Potential};

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

/// Compares engine box coefficients with the dense Taylor oracle.
fn check_box(model: &Model, volume: &LatticeBox, order: usize, t: f64) {
    let engine = ClusterExpansion::new(model, order, &Caps::default()).unwrap();
    let coeffs = engine.box_coefficients(volume.sites(), &engine.linear_tilt(c(t))).unwrap();
    let rho = product_density(&model.observable, t, volume.len());
    let oracle = log_moment_series(&rho, &[hamiltonian(model, volume)], order);
    for k in 0..=order {
        let got = coeffs[engine.basis().index_of(&[k as u8]).unwrap()];
        let want = if k == 0 { c(0.0) } else { oracle.get(&[k]) };
        assert!(close(got, want, 1e-10), "order {} t {}: {} vs {}", k, t, got, want);
    }
}

#[test]
fn box_sum_matches_taylor_oracle_ising_chain() {
    for t in [-1.0, 0.0, 1.0] {
        check_box(&ising_x(), &LatticeBox::chain(4).unwrap(), 4, t);
        check_box(&ising_x(), &LatticeBox::chain(6).unwrap(), 4, t);
    }
}

#[test]
fn box_sum_matches_taylor_oracle_2d() {
    for t in [-1.0, 0.5] {
        check_box(&xz_2d(), &LatticeBox::new(&[2, 3]).unwrap(), 4, t);
    }
}

#[test]
fn box_sum_matches_taylor_oracle_with_field() {
    for t in [-0.7, 0.3] {
        check_box(&xx_field(), &LatticeBox::chain(5).unwrap(), 4, t);
    }
}

#[test]
fn generalized_matches_joint_taylor_oracle() {
    let zz = kron(&spin::sz(), &spin::sz());
    let xx = kron(&spin::sx(), &spin::sx());
    let p1 = Potential::nearest_neighbour(1, &zz).unwrap();
    let mut t2 = Potential::nearest_neighbour(1, &xx).unwrap().terms().to_vec();
    t2.push(qldp_core::BaseInteraction::new(vec![site(&[0])], spin::sz().scale(c(0.4))).unwrap());
    let p2 = Potential::new(1, 2, t2).unwrap();
    let order = 3;
    let engine = ClusterExpansion::generalized(
        &[p1.clone(), p2.clone()],
        &DegreeCaps::total(order, 2),
        &Caps::default(),
    )
    .unwrap();
    let volume = LatticeBox::chain(3).unwrap();
    let coeffs = engine.box_coefficients(volume.sites(), &[c(0.0), c(0.0)]).unwrap();
    let caps = Caps::default();
    let hs = [p1.hamiltonian(&volume, &caps).unwrap(), p2.hamiltonian(&volume, &caps).unwrap()];
    let rho = Operator::identity(8).scale(c(1.0 / 8.0));
    let oracle = log_moment_series(&rho, &hs, order);
    for i in 0..=order {
        for j in 0..=(order - i) {
            if i + j == 0 {
                continue;
            }
            let got = coeffs[engine.basis().index_of(&[i as u8, j as u8]).unwrap()];
            assert!(close(got, oracle.get(&[i, j]), 1e-10), "({}, {})", i, j);
        }
    }
}

#[test]
fn generalized_single_block_equals_untilted_xi() {
    let model = ising_x();
    let engine = ClusterExpansion::new(&model, 3, &Caps::default()).unwrap();
    let gen = ClusterExpansion::generalized(
        &[model.potential.clone()],
        &DegreeCaps::total(3, 1),
        &Caps::default(),
    )
    .unwrap();
    let beta = 0.07;
    let a = engine.xi_free(c(0.0), c(beta)).unwrap().value;
    let b = gen.generalized_xi(&[c(-beta)]).unwrap().value;
    assert!(close(a, b, 1e-12));
    assert!(gen.generalized_xi(&[c(0.0)]).unwrap().value.norm() < 1e-15);
}

#[test]
fn xi_first_order_by_hand() {
    // K = 1: −β Σ_{B∋0} ω^t(Φ(B))/|B| = −β·2·tanh(t)²/2 for σxσx bonds with X = σx
    let xx = kron(&spin::sx(), &spin::sx());
    let model = Model::new(Potential::nearest_neighbour(1, &xx).unwrap(), spin::sx()).unwrap();
    let engine = ClusterExpansion::new(&model, 1, &Caps::default()).unwrap();
    let (t, beta) = (0.6, 0.2);
    let v = engine.xi_free(c(t), c(beta)).unwrap().value;
    assert!(close(v, c(-beta * t.tanh().powi(2)), 1e-13));
    assert!(engine.xi_free(c(t), c(0.0)).unwrap().value.norm() < 1e-15);
}

#[test]
fn explicit_clusters_reproduce_engine() {
    let model = ising_x();
    let order = 3;
    let engine = ClusterExpansion::new(&model, order, &Caps::default()).unwrap();
    let clusters = enumerate_clusters(&engine, site(&[0])).unwrap();
    let (t, beta) = (0.4, 0.15);
    let mut xi = c(0.0);
    for cl in &clusters {
        let w = cl
            .weight(&model.potential, &model.observable, c(t), c(beta), &TiltRegion::All)
            .unwrap();
        xi += w / cl.support.len() as f64;
    }
    let engine_xi = engine.xi_free(c(t), c(beta)).unwrap().value;
    assert!(close(xi, engine_xi, 1e-13), "{} vs {}", xi, engine_xi);
}

#[test]
fn cluster_counts_by_hand() {
    let model = ising_x();
    let count = |k| {
        let engine = ClusterExpansion::new(&model, k, &Caps::default()).unwrap();
        enumerate_clusters(&engine, site(&[0])).unwrap().len()
    };
    // two bonds through the origin
    assert_eq!(count(1), 2);
    // + (b,b) twice, ordered overlapping bond pairs 3·2, multisets {b,b} 2 and {b,b'} 3
    assert_eq!(count(2), 15);
    let zero = Model::new(Potential::zero(1, 2), spin::sz()).unwrap();
    let engine = ClusterExpansion::new(&zero, 3, &Caps::default()).unwrap();
    assert!(enumerate_clusters(&engine, site(&[0])).unwrap().is_empty());
}

#[test]
fn omega_t_examples() {
    let z = spin::sz();
    let one = [(vec![site(&[0])], z.clone())];
    let t = 0.8;
    let v = omega_t(&one, &z, c(t), &TiltRegion::All).unwrap();
    assert!(close(v, c(t.tanh()), 1e-14));
    let v0 = omega_t(&one, &z, c(t), &TiltRegion::None).unwrap();
    assert!(v0.norm() < 1e-15);
    // disjoint factors multiply
    let x = spin::sx();
    let two = [(vec![site(&[0])], z.clone()), (vec![site(&[3])], x.clone())];
    let xz = &x + &z;
    let pair = omega_t(&two, &xz, c(t), &TiltRegion::All).unwrap();
    let a = omega_t(&two[..1], &xz, c(t), &TiltRegion::All).unwrap();
    let b = omega_t(&two[1..], &xz, c(t), &TiltRegion::All).unwrap();
    assert!(close(pair, a * b, 1e-12));
    // degenerate complex tilt
    let pi2 = C64::new(0.0, std::f64::consts::FRAC_PI_2);
    assert!(omega_t(&one, &z, pi2, &TiltRegion::All).is_err());
}

#[test]
fn rho_order_dependence_and_coincidence() {
    let op = &kron(&spin::sx(), &spin::sz()) + &kron(&spin::sz(), &spin::sz()).scale(c(0.5));
    let pot = Potential::nearest_neighbour(1, &op).unwrap();
    let x = &(&spin::sz() + &spin::sy().scale(c(0.5))) + &spin::sx().scale(c(0.4));
    let a = vec![site(&[0]), site(&[1])];
    let b = vec![site(&[1]), site(&[2])];
    let ab = Polymer::new(vec![a.clone(), b.clone()]).unwrap();
    let ba = Polymer::new(vec![b.clone(), a.clone()]).unwrap();
    let (t, beta) = (c(0.7), c(0.3));
    let r_ab = rho(&ab, &pot, &x, t, beta).unwrap();
    let r_ba = rho(&ba, &pot, &x, t, beta).unwrap();
    assert!((r_ab - r_ba).norm() > 1e-6);
    assert!(rho(&ab, &pot, &x, t, c(0.0)).unwrap().norm() == 0.0);

    let inside = LatticeBox::chain(3).unwrap();
    let outside = LatticeBox::with_origin(&[5], &[3]).unwrap();
    let straddle = LatticeBox::chain(2).unwrap();
    assert!(close(rho_tilde(&ab, &pot, &x, t, beta, &inside).unwrap(), r_ab, 1e-14));
    let untilted = rho(&ab, &pot, &x, c(0.0), beta).unwrap();
    assert!(close(rho_tilde(&ab, &pot, &x, t, beta, &outside).unwrap(), untilted, 1e-14));
    // straddling: direct mixed-state evaluation
    let dens = mat_exp(&x, t).unwrap();
    let dens = dens.scale(c(1.0) / dens.trace());
    let flat = Operator::identity(2).scale(c(0.5));
    let state = kron(&kron(&dens, &dens), &flat);
    let i2 = Operator::identity(2);
    let pa = kron(&op, &i2);
    let pb = kron(&i2, &op);
    let direct = (&state * &(&pa * &pb)).trace() * beta * beta / 2.0;
    assert!(close(rho_tilde(&ab, &pot, &x, t, beta, &straddle).unwrap(), direct, 1e-12));

    assert!(Polymer::new(vec![vec![site(&[0])], vec![site(&[2])]]).is_err());
}

#[test]
fn ursell_small_cases() {
    let caps = Caps::default();
    let p = |s: i32| Polymer::new(vec![vec![site(&[s]), site(&[s + 1])]]).unwrap();
    assert_eq!(ursell(&[p(0)], &caps).unwrap(), 1);
    assert_eq!(ursell(&[p(0), p(1)], &caps).unwrap(), -1);
    assert_eq!(ursell(&[p(0), p(5)], &caps).unwrap(), 0);
    let many: Vec<Polymer> = (0..9).map(|_| p(0)).collect();
    assert!(ursell(&many, &caps).is_err());
}

#[test]
fn boundary_sums_match_mixed_state_oracle() {
    let model = ising_x();
    let order = 3;
    let engine = ClusterExpansion::new(&model, order, &Caps::default()).unwrap();
    let inner = LatticeBox::with_origin(&[2], &[2]).unwrap();
    let outer = LatticeBox::chain(6).unwrap();
    let t = 0.9;
    let theta = engine.linear_tilt(c(t));
    let rest: Vec<_> = outer.sites().iter().copied().filter(|s| !inner.contains(s)).collect();
    let (tilde, plain) = engine
        .boundary_coefficients(inner.sites(), outer.sites(), &theta, SignConvention::Standard)
        .unwrap();
    let inside = engine.box_coefficients(inner.sites(), &theta).unwrap();
    let flat = vec![c(0.0); 2];
    let inside0 = engine.box_coefficients(inner.sites(), &flat).unwrap();
    let out0 = engine.box_coefficients(&rest, &flat).unwrap();
    let all0 = engine.box_coefficients(outer.sites(), &flat).unwrap();

    // oracle: mixed product state on the outer chain
    let dens = mat_exp(&model.observable, c(t)).unwrap();
    let dens = dens.scale(c(1.0) / dens.trace());
    let flat_op = Operator::identity(2).scale(c(0.5));
    let mut state = Operator::identity(1);
    for s in outer.sites() {
        state = kron(&state, if inner.contains(s) { &dens } else { &flat_op });
    }
    let h = hamiltonian(&model, &outer);
    let oracle = log_moment_series(&state, &[h.clone()], order);
    let untilted = log_moment_series(&Operator::identity(64).scale(c(1.0 / 64.0)), &[h], order);
    for k in 1..=order {
        let i = engine.basis().index_of(&[k as u8]).unwrap();
        let full = inside[i] + out0[i] + tilde[i];
        assert!(close(full, oracle.get(&[k]), 1e-10), "order {}", k);
        let corrected = inside[i] - inside0[i] + (tilde[i] - plain[i]);
        let want = oracle.get(&[k]) - untilted.get(&[k]);
        assert!(close(corrected, want, 1e-10), "order {}", k);
        assert!(close(all0[i], untilted.get(&[k]), 1e-10));
    }
    let same = engine
        .boundary_cluster_sum(outer.sites(), outer.sites(), c(t), c(0.1), SignConvention::Standard)
        .unwrap();
    assert_eq!(same.value, c(0.0));
}

#[test]
fn literal_sign_flips_tilt_on_inner_sites() {
    let model = ising_x();
    let engine = ClusterExpansion::new(&model, 2, &Caps::default()).unwrap();
    let inner = LatticeBox::chain(2).unwrap();
    let outer = LatticeBox::with_origin(&[-2], &[6]).unwrap();
    let a = engine
        .boundary_cluster_sum(inner.sites(), outer.sites(), c(0.5), c(0.1), SignConvention::Literal)
        .unwrap();
    let b = engine
        .boundary_cluster_sum(inner.sites(), outer.sites(), c(-0.5), c(0.1), SignConvention::Standard)
        .unwrap();
    assert!(close(a.value, b.value, 1e-15));
}

#[test]
fn support_weights_are_translation_invariant() {
    let model = xz_2d();
    let engine = ClusterExpansion::new(&model, 2, &Caps::default()).unwrap();
    let theta = engine.linear_tilt(c(0.3));
    let weights = engine.support_weights(&theta).unwrap();
    // box sums over two translated boxes agree
    let a = engine.box_coefficients(LatticeBox::new(&[3, 3]).unwrap().sites(), &theta).unwrap();
    let b = engine
        .box_coefficients(LatticeBox::with_origin(&[-4, 7], &[3, 3]).unwrap().sites(), &theta)
        .unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(close(*x, *y, 1e-12));
    }
    assert!(!weights.is_empty());
}

#[test]
fn kp_sums_are_monotone_and_bounded() {
    let model = ising_x();
    let cert = model.certify(&[0.05, 0.1, 0.2], 0.0, 10.0).unwrap();
    let engine = ClusterExpansion::new(&model, 4, &Caps::default())
        .unwrap()
        .with_certificate(cert);
    let sums = engine.kp_weighted_sums(cert.a, c(1.0), c(cert.beta0)).unwrap();
    assert!(sums.windows(2).all(|w| w[1] >= w[0]));
    assert!(*sums.last().unwrap() <= cert.a);
    let abs = engine.abs_cluster_sums(c(1.0), c(cert.beta0)).unwrap();
    assert!(*abs.last().unwrap() <= cert.a);
    let zero = Model::new(Potential::zero(1, 2), spin::sz()).unwrap();
    let ez = ClusterExpansion::new(&zero, 3, &Caps::default()).unwrap();
    assert!(ez.kp_weighted_sums(0.1, c(0.0), c(0.1)).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn caps_are_enforced() {
    let caps = Caps {
        max_ursell: 2,
        ..Caps::default()
    };
    assert!(ClusterExpansion::new(&ising_x(), 4, &caps).is_err());
}
