//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p qldp-core --test acceptance`.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use qldp_core::exact::{empirical_distribution, ExactSystem};
use qldp_core::ldp::{self, Sigma2Method};
use qldp_core::level2::{empirical_measure_distribution, mean_pushforward, Level2, SpectralSimplexPoint, Spectrum};
use qldp_core::model::{site, LatticeBox};
use qldp_core::opalg::{kron, psi_functional, psi_norm, spin, Operator, C64};
use qldp_core::polymer::{local_observable_f, SignConvention};
use qldp_core::random::{random_hermitian, random_invertible, random_psd, seeded};
use qldp_core::{BaseInteraction, Caps, ClusterExpansion, DegreeCaps, Model, Potential};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ising_certificate(model: &Model) -> qldp_core::Certificate {
    model.certify(&[0.1], 0.0, 10.0).expect("Ising model certifies at a = 0.1")
}

fn box_oracle_error(model: &Model, volume: &LatticeBox, order: usize, t: f64) -> f64 {
    let engine = ClusterExpansion::new(model, order, &Caps::default()).unwrap();
    let coeffs = engine.box_coefficients(volume.sites(), &engine.linear_tilt(c(t))).unwrap();
    let rho = product_density(&model.observable, t, volume.len());
    let oracle = log_moment_series(&rho, &[hamiltonian(model, volume)], order);
    (1..=order)
        .map(|k| (coeffs[engine.basis().index_of(&[k as u8]).unwrap()] - oracle.get(&[k])).norm())
        .fold(0.0, f64::max)
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for t in [-1.0, 0.0, 1.0] {
        for (_, model) in ising_family() {
            for n in [4, 5, 6] {
                worst = worst.max(box_oracle_error(&model, &LatticeBox::chain(n).unwrap(), 4, t));
            }
        }
        worst = worst.max(box_oracle_error(&xz_2d(), &LatticeBox::new(&[2, 2]).unwrap(), 4, t));
        worst = worst.max(box_oracle_error(&xz_2d(), &LatticeBox::new(&[2, 3]).unwrap(), 4, t));
    }
    outcome(worst <= 1e-10, format!("max |Δ| = {:.2e} over K ≤ 4, |Λ| ≤ 6, t ∈ {{−1, 0, 1}}", worst))
}

fn kp_soundness() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, model) in ising_family() {
        let cert = ising_certificate(&model);
        let engine = ClusterExpansion::new(&model, 6, &Caps::default()).unwrap();
        let mut worst_kp: f64 = 0.0;
        let mut worst_abs: f64 = 0.0;
        for k in -20..=20 {
            let t = c(k as f64 * 0.1);
            for beta in [cert.beta0 / 2.0, cert.beta0] {
                let kp = engine.kp_weighted_sums(cert.a, t, c(beta)).unwrap();
                let abs = engine.abs_cluster_sums(t, c(beta)).unwrap();
                worst_kp = kp.iter().copied().fold(worst_kp, f64::max);
                worst_abs = abs.iter().copied().fold(worst_abs, f64::max);
            }
        }
        pass &= worst_kp <= cert.a && worst_abs <= cert.a;
        parts.push(format!(
            "{}: a = {}, β₀ = {:.6}, max KP {:.3e}, max Σ|w| {:.3e}",
            name, cert.a, cert.beta0, worst_kp, worst_abs
        ));
    }
    outcome(pass, parts.join("; "))
}

fn boundary_negligibility() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut models = ising_family();
    // σxσx bonds plus a field: the tilt reaches the straddling weights
    models.push(("σxσx + field", xx_field()));
    for (name, model) in models {
        let cert = ising_certificate(&model);
        let order = 3;
        let engine = ClusterExpansion::new(&model, order, &Caps::default()).unwrap();
        let pad = order as i32 * model.potential.range();
        let mut rows = Vec::new();
        for n in [4usize, 8, 16] {
            let inner = LatticeBox::chain(n).unwrap();
            let outer = LatticeBox::with_origin(&[-pad], &[n + 2 * pad as usize]).unwrap();
            let v = engine
                .boundary_cluster_sum(inner.sites(), outer.sites(), c(1.0), c(cert.beta0 / 2.0), SignConvention::Standard)
                .unwrap()
                .value
                .norm();
            rows.push((n, v, inner.boundary_sites(1).len()));
        }
        let per_volume: Vec<f64> = rows.iter().map(|r| r.1 / r.0 as f64).collect();
        let per_boundary: Vec<f64> = rows.iter().map(|r| r.1 / r.2 as f64).collect();
        let drop = per_volume[0] / per_volume[2];
        let hi = per_boundary.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = per_boundary.iter().copied().fold(f64::INFINITY, f64::min);
        let variation = (hi - lo) / hi;
        pass &= drop >= 3.0 && variation <= 0.2 && lo > 0.0;
        parts.push(format!(
            "{}: |sum| {:.3e}, /|Λ| drops {:.2}×, /|∂Λ| varies {:.1e}",
            name, rows[2].1, drop, variation
        ));
    }
    outcome(pass, parts.join("; "))
}

fn golden_thompson() -> Outcome {
    let caps = Caps::default();
    let mut rng = seeded(2024);
    let mut min_gap = f64::INFINITY;
    for i in 0..100 {
        let x = random_hermitian(2, &mut rng);
        let (pot, n) = if i % 2 == 0 {
            (Potential::on_site(1, &random_hermitian(2, &mut rng)).unwrap(), 1)
        } else {
            (Potential::nearest_neighbour(1, &random_hermitian(4, &mut rng)).unwrap(), 2)
        };
        let model = Model::new(pot, x).unwrap();
        let sys = ExactSystem::new(&model, &LatticeBox::chain(n).unwrap(), &caps).unwrap();
        let t = rng.gen_range(-2.0..2.0);
        let beta = rng.gen_range(0.1..2.0);
        min_gap = min_gap.min(sys.golden_thompson_gap(t, beta).gap);
    }
    let mut max_commuting: f64 = 0.0;
    for i in 0..20 {
        let diag = |k: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            Operator::from_diagonal(&(0..k).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>())
        };
        let x = diag(2, &mut rng);
        let (pot, n) = if i % 2 == 0 {
            (Potential::on_site(1, &diag(2, &mut rng)).unwrap(), 1)
        } else {
            (Potential::nearest_neighbour(1, &diag(4, &mut rng)).unwrap(), 2)
        };
        let model = Model::new(pot, x).unwrap();
        let sys = ExactSystem::new(&model, &LatticeBox::chain(n).unwrap(), &caps).unwrap();
        let t = rng.gen_range(-2.0..2.0);
        max_commuting = max_commuting.max(sys.golden_thompson_gap(t, 1.0).gap.abs());
    }
    let demo = Model::new(Potential::on_site(1, &spin::sz()).unwrap(), spin::sx()).unwrap();
    let sys = ExactSystem::new(&demo, &LatticeBox::chain(1).unwrap(), &caps).unwrap();
    let strict = sys.golden_thompson_gap(1.0, 1.0).gap;
    outcome(
        min_gap >= -1e-10 && max_commuting <= 1e-10 && strict >= 1e-4,
        format!(
            "min random gap {:.2e}, max commuting |gap| {:.2e}, σx/σz gap {:.4e}",
            min_gap, max_commuting, strict
        ),
    )
}

fn binary_entropy_conjugate(x: f64) -> f64 {
    let p = (1.0 + x) / 2.0;
    let q = (1.0 - x) / 2.0;
    p * (2.0 * p).ln() + q * (2.0 * q).ln()
}

fn rate_functions() -> Outcome {
    let caps = Caps::default();
    let free = Model::new(Potential::zero(1, 2), spin::sz()).unwrap();
    let engine = Arc::new(ClusterExpansion::new(&free, 1, &caps).unwrap());
    let gf = ldp::cluster_generating_function(engine, ldp::t_grid(4.0, 0.05), 0.0).unwrap();
    let xs = [-0.5, 0.0, 0.5];
    let rate = ldp::legendre(&gf, &xs).unwrap();
    let closed = xs
        .iter()
        .zip(&rate.i_values)
        .map(|(x, i)| (i - binary_entropy_conjugate(*x)).abs())
        .fold(0.0, f64::max);

    // interacting generating function; the oblique X makes F depend on β
    let model = ising_oblique();
    let cert = ising_certificate(&model);
    let beta = cert.beta0 / 2.0;
    let engine = Arc::new(ClusterExpansion::new(&model, 4, &caps).unwrap());
    let gf_int = ldp::cluster_generating_function(engine.clone(), ldp::t_grid(2.0, 0.05), beta).unwrap();
    let d = |h: f64| (ldp::f_free(&engine, h, beta).unwrap() - ldp::f_free(&engine, -h, beta).unwrap()) / (2.0 * h);
    let slope = (4.0 * d(5e-4) - d(1e-3)) / 3.0;
    let at_mean = ldp::legendre(&gf_int, &[slope]).unwrap().i_values[0];

    let mut bic: f64 = 0.0;
    for g in [&gf, &gf_int] {
        let (s_lo, s_hi) = g.end_slopes();
        let x_grid: Vec<f64> = (0..=200)
            .map(|k| s_lo + (s_hi - s_lo) * (0.005 + 0.99 * k as f64 / 200.0))
            .collect();
        let ts: Vec<f64> = (-15..=15).map(|k| k as f64 * 0.1).collect();
        let back = ldp::biconjugate(g, &x_grid, &ts).unwrap();
        for (t, v) in ts.iter().zip(&back) {
            bic = bic.max((v - g.value(*t)).abs());
        }
    }

    let demo = Model::new(Potential::on_site(1, &spin::sz()).unwrap(), spin::sx()).unwrap();
    let sys = ExactSystem::new(&demo, &LatticeBox::chain(1).unwrap(), &caps).unwrap();
    let grid: Vec<f64> = (-16..=16).map(|k| k as f64 * 0.05).collect();
    let rep = ldp::inequality_check(&sys, &ldp::t_grid(8.0, 0.05), &grid, 1.0).unwrap();
    let worst_tilde = rep.i_rows.iter().map(|r| r.2 - r.1).fold(f64::INFINITY, f64::min);
    outcome(
        closed <= 1e-8 && at_mean <= 1e-8 && bic <= 2e-6 && worst_tilde >= -1e-8,
        format!(
            "|I − conj| {:.1e}, I(F′(0)) {:.1e}, |F** − F| {:.1e}, min(Ĩ − I) {:.1e}",
            closed, at_mean, bic, worst_tilde
        ),
    )
}

fn clt_trend() -> Outcome {
    let caps = Caps::default();
    let free = Model::new(Potential::zero(1, 2), spin::sz()).unwrap();
    let volumes: Vec<LatticeBox> = [4, 6, 8, 10, 12].iter().map(|&n| LatticeBox::chain(n).unwrap()).collect();
    let rep = ldp::clt_compare(&free, &volumes, &[1.0], 0.0, 1.0, &caps).unwrap();
    let dev = rep.deviations_at(1.0);
    let decreasing = dev.windows(2).all(|w| w[1].1 < w[0].1);

    let mut sig_ok = true;
    let mut sig = Vec::new();
    for (name, model) in ising_family() {
        let cert = ising_certificate(&model);
        let beta = cert.beta0 / 2.0;
        let engine = ClusterExpansion::new(&model, 4, &caps).unwrap();
        let s = ldp::sigma2(&engine, &model, beta, Sigma2Method::Series, None, &caps).unwrap();
        let d = ldp::sigma2(&engine, &model, beta, Sigma2Method::FiniteDiff, None, &caps).unwrap();
        sig_ok &= (s - d).abs() <= 1e-6 && s > 0.0;
        sig.push(format!("{}: σ² {:.10} vs {:.10}", name, s, d));
    }
    outcome(
        decreasing && sig_ok,
        format!(
            "deviations {:?}; {}",
            dev.iter().map(|r| format!("{:.2e}", r.1)).collect::<Vec<_>>(),
            sig.join(", ")
        ),
    )
}

fn level_two() -> Outcome {
    let caps = Caps::default();
    let free = Model::new(Potential::zero(1, 2), spin::sz()).unwrap();
    let l2 = Level2::new(Arc::new(ClusterExpansion::new(&free, 1, &caps).unwrap()), 0.0).unwrap();
    let mut sanov: f64 = 0.0;
    for k in 1..=20 {
        let p = k as f64 / 21.0;
        let mu = [p, 1.0 - p];
        let want = p * (2.0 * p).ln() + (1.0 - p) * (2.0 * (1.0 - p)).ln();
        let got = l2.rate2(&SpectralSimplexPoint::new(mu.to_vec()).unwrap()).unwrap().value;
        sanov = sanov.max((got - want).abs());
    }

    // spin-1 chain with S^x S^x bonds, X = S^z = diag(−1, 0, 1)
    let pair = kron(&spin::spin1_x(), &spin::spin1_x());
    let model = Model::new(Potential::nearest_neighbour(1, &pair).unwrap(), spin::spin1_z()).unwrap();
    let cert = model.certify(&[0.05, 0.1, 0.2], 0.0, 10.0).unwrap();
    let engine = Arc::new(ClusterExpansion::new(&model, 3, &caps).unwrap());
    let l3 = Level2::new(engine, cert.beta0 / 2.0).unwrap();
    let mut contraction: f64 = 0.0;
    for k in -4..=4 {
        let (a, b) = l3.contraction_check(0.2 * k as f64).unwrap();
        contraction = contraction.max((a - b).abs());
    }

    let mut push: f64 = 0.0;
    for (m, volume, beta) in [
        (xx_field(), LatticeBox::chain(4).unwrap(), 0.7),
        (model.clone(), LatticeBox::chain(3).unwrap(), 0.4),
    ] {
        let sys = ExactSystem::new(&m, &volume, &caps).unwrap();
        let classes = empirical_measure_distribution(&sys, beta);
        let atoms = Spectrum::new(sys.x_eigenvalues()).atoms;
        let pf = mean_pushforward(&classes, &atoms).unwrap();
        let dense = empirical_distribution(&m, &volume, beta, &caps).unwrap();
        if pf.atoms.len() != dense.atoms.len() {
            push = f64::INFINITY;
            continue;
        }
        for k in 0..pf.atoms.len() {
            push = push.max((pf.atoms[k] - dense.atoms[k]).abs()).max((pf.weights[k] - dense.weights[k]).abs());
        }
    }
    outcome(
        sanov <= 1e-6 && contraction <= 1e-4 && push <= 1e-10,
        format!(
            "|𝓘 − D| {:.1e} (20 points), |I − inf 𝓘| {:.1e} (9 points), pushforward {:.1e}",
            sanov, contraction, push
        ),
    )
}

fn generalization() -> Outcome {
    let caps = Caps::default();
    let zz = kron(&spin::sz(), &spin::sz());
    let xx = kron(&spin::sx(), &spin::sx());
    let p1 = Potential::nearest_neighbour(1, &zz).unwrap();
    let mut t2 = Potential::nearest_neighbour(1, &xx).unwrap().terms().to_vec();
    t2.push(BaseInteraction::new(vec![site(&[0])], spin::sz().scale(c(0.4))).unwrap());
    let p2 = Potential::new(1, 2, t2).unwrap();
    let order = 3;
    let engine = ClusterExpansion::generalized(&[p1.clone(), p2.clone()], &DegreeCaps::total(order, 2), &caps).unwrap();
    let volume = LatticeBox::chain(3).unwrap();
    let coeffs = engine.box_coefficients(volume.sites(), &[c(0.0), c(0.0)]).unwrap();
    let hs = [p1.hamiltonian(&volume, &caps).unwrap(), p2.hamiltonian(&volume, &caps).unwrap()];
    let oracle = log_moment_series(&Operator::identity(8).scale(c(1.0 / 8.0)), &hs, order);
    let mut joint: f64 = 0.0;
    for i in 0..=order {
        for j in 0..=(order - i) {
            if i + j > 0 {
                let got = coeffs[engine.basis().index_of(&[i as u8, j as u8]).unwrap()];
                joint = joint.max((got - oracle.get(&[i, j])).norm());
            }
        }
    }

    // bond-density generating function at β = 0 from the 2×2 transfer matrix
    let obs = BaseInteraction::new(vec![site(&[0]), site(&[1])], zz.clone()).unwrap();
    let caps_local = DegreeCaps {
        order: 6,
        per_block: vec![0, 6],
    };
    let mut local: f64 = 0.0;
    for z in [-0.1, 0.05, 0.1] {
        let f = local_observable_f(&p1, &obs, c(z), 0.0, &caps_local, &caps).unwrap().value;
        let transfer = Operator::from_real_rows(&[&[z.exp() / 2.0, (-z).exp() / 2.0], &[(-z).exp() / 2.0, z.exp() / 2.0]]).unwrap();
        let top = qldp_core::opalg::herm_eig(&transfer).unwrap().eigenvalues[1];
        local = local.max((f - c(top.ln())).norm());
    }
    outcome(
        joint <= 1e-10 && local <= 1e-8,
        format!("joint Taylor |Δ| {:.1e}; bond generating function |Δ| {:.1e}", joint, local),
    )
}

fn psi_norm_suite() -> Outcome {
    let mut rng = seeded(99);
    let mut psd: f64 = 0.0;
    for k in 0..50 {
        let x = random_psd(2 + k % 4, &mut rng);
        psd = psd.max((psi_norm(&x).unwrap().norm - 1.0).abs());
    }
    let mut attain: f64 = 0.0;
    for k in 0..50 {
        let x = random_invertible(2 + k % 4, &mut rng);
        let p = psi_norm(&x).unwrap();
        let direct = psi_functional(&x, &p.witness).norm();
        attain = attain.max((direct - p.norm).abs()).max((p.attained - p.norm).abs());
    }
    let traceless = psi_norm(&spin::sz()).is_err()
        && psi_norm(&(&spin::sz() + &Operator::identity(2).scale(C64::new(1e-13, 0.0)))).is_err();
    outcome(
        psd <= 1e-9 && attain <= 1e-9 && traceless,
        format!("|‖Ψ‖ − 1| {:.1e} (PSD), |Ψ(C) − ‖Ψ‖| {:.1e}, traceless rejected: {}", psd, attain, traceless),
    )
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 9] = [
        ("cluster-expansion oracle equivalence", 60, oracle_equivalence),
        ("KP certification soundness", 120, kp_soundness),
        ("boundary negligibility", 60, boundary_negligibility),
        ("Golden-Thompson comparison", 30, golden_thompson),
        ("rate-function suite", 60, rate_functions),
        ("CLT trend and variance", 120, clt_trend),
        ("level-2 rate and contraction", 120, level_two),
        ("multi-potential generalization", 120, generalization),
        ("Psi_X norm", 10, psi_norm_suite),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= Duration::from_secs(*limit);
        if !pass {
            failed += 1;
        }
        println!(
            "{} {}. {}: {} [{:.2}s / {}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            name,
            out.detail,
            elapsed.as_secs_f64(),
            limit
        );
    }
    if failed > 0 {
        println!("{} criteria failed", failed);
        std::process::exit(1);
    }
}
