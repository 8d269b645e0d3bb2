//! Independent oracles: dense standard-basis Taylor coefficients and the
//! small models shared by the integration tests.
#![allow(dead_code)]

use qldp_core::model::LatticeBox;
use qldp_core::opalg::{kron, mat_exp, spin, Operator, C64};
use qldp_core::{BaseInteraction, Caps, Model, Potential};

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Product density ⊗ e^{tX}/Tr e^{tX} on n sites.
pub fn product_density(x: &Operator, t: f64, n: usize) -> Operator {
    let e = mat_exp(x, c(t)).unwrap();
    let z = e.trace();
    let local = e.scale(c(1.0) / z);
    let mut rho = Operator::identity(1);
    for _ in 0..n {
        rho = kron(&rho, &local);
    }
    rho
}

/// Truncated multivariate power series in `nvars` variables, stored densely
/// by exponent tuple with total degree ≤ order.
#[derive(Clone, Debug)]
pub struct Series {
    pub order: usize,
    pub nvars: usize,
    pub coeffs: std::collections::BTreeMap<Vec<usize>, C64>,
}

impl Series {
    pub fn new(order: usize, nvars: usize) -> Self {
        Series {
            order,
            nvars,
            coeffs: Default::default(),
        }
    }

    pub fn get(&self, e: &[usize]) -> C64 {
        self.coeffs.get(e).copied().unwrap_or(c(0.0))
    }

    pub fn mul(&self, o: &Series) -> Series {
        let mut out = Series::new(self.order, self.nvars);
        for (a, x) in &self.coeffs {
            for (b, y) in &o.coeffs {
                let e: Vec<usize> = a.iter().zip(b).map(|(i, j)| i + j).collect();
                if e.iter().sum::<usize>() <= self.order {
                    *out.coeffs.entry(e).or_insert(c(0.0)) += x * y;
                }
            }
        }
        out
    }

    /// log(1 + u) for a series u = self − 1 without constant term.
    pub fn log(&self) -> Series {
        let zero = vec![0; self.nvars];
        let a0 = self.get(&zero);
        let mut u = self.clone();
        u.coeffs.remove(&zero);
        for v in u.coeffs.values_mut() {
            *v /= a0;
        }
        let mut out = Series::new(self.order, self.nvars);
        out.coeffs.insert(zero, a0.ln());
        let mut power = u.clone();
        for k in 1..=self.order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            for (e, v) in &power.coeffs {
                *out.coeffs.entry(e.clone()).or_insert(c(0.0)) += v * (sign / k as f64);
            }
            power = power.mul(&u);
        }
        out
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Coefficients in z of log Tr[ρ e^{z₁H₁}⋯e^{z_nH_n}] up to total degree K,
/// from the moments Tr[ρ H₁^{k₁}⋯H_n^{k_n}].
pub fn log_moment_series(rho: &Operator, hs: &[Operator], order: usize) -> Series {
    let n = hs.len();
    let mut s = Series::new(order, n);
    let mut powers: Vec<Vec<Operator>> = Vec::new();
    for h in hs {
        let mut p = vec![Operator::identity(h.dim())];
        for k in 1..=order {
            p.push(&p[k - 1] * h);
        }
        powers.push(p);
    }
    let mut e = vec![0usize; n];
    loop {
        if e.iter().sum::<usize>() <= order {
            let mut m = rho.clone();
            for (b, &k) in e.iter().enumerate() {
                m = &m * &powers[b][k];
            }
            let denom: f64 = e.iter().map(|&k| factorial(k)).product();
            s.coeffs.insert(e.clone(), m.trace() / denom);
        }
        let mut i = 0;
        loop {
            if i == n {
                return s.log();
            }
            e[i] += 1;
            if e[i] <= order {
                break;
            }
            e[i] = 0;
            i += 1;
        }
    }
}

/// 1D nearest-neighbour σzσz, X = σx.
pub fn ising_x() -> Model {
    let zz = kron(&spin::sz(), &spin::sz());
    Model::new(Potential::nearest_neighbour(1, &zz).unwrap(), spin::sx()).unwrap()
}

/// 1D nearest-neighbour σzσz, X = σz (commuting).
pub fn ising_z() -> Model {
    let zz = kron(&spin::sz(), &spin::sz());
    Model::new(Potential::nearest_neighbour(1, &zz).unwrap(), spin::sz()).unwrap()
}

/// 2D σxσx + 0.5 σzσz on nearest-neighbour bonds, X = σz.
pub fn xz_2d() -> Model {
    let op = &kron(&spin::sx(), &spin::sx()) + &kron(&spin::sz(), &spin::sz()).scale(c(0.5));
    Model::new(Potential::nearest_neighbour(2, &op).unwrap(), spin::sz()).unwrap()
}

/// Mixed chain: σxσx bonds plus a 0.3 σz field, X = σz.
pub fn xx_field() -> Model {
    let xx = kron(&spin::sx(), &spin::sx());
    let mut terms = Potential::nearest_neighbour(1, &xx).unwrap().terms().to_vec();
    terms.push(BaseInteraction::new(vec![[0, 0, 0]], spin::sz().scale(c(0.3))).unwrap());
    Model::new(Potential::new(1, 2, terms).unwrap(), spin::sz()).unwrap()
}

/// Dense Hamiltonian on a box (standard basis).
pub fn hamiltonian(model: &Model, volume: &LatticeBox) -> Operator {
    model.potential.hamiltonian(volume, &Caps::default()).unwrap()
}

/// 1D σzσz with the oblique observable X = (σx + σz)/√2, so the interaction
/// responds to the tilt and X does not commute with H.
pub fn ising_oblique() -> Model {
    let zz = kron(&spin::sz(), &spin::sz());
    let x = (&spin::sx() + &spin::sz()).scale(c(std::f64::consts::FRAC_1_SQRT_2));
    Model::new(Potential::nearest_neighbour(1, &zz).unwrap(), x).unwrap()
}

/// The three Ising-pair chains used across the suites.
pub fn ising_family() -> Vec<(&'static str, Model)> {
    vec![("X=σx", ising_x()), ("X=σz", ising_z()), ("X oblique", ising_oblique())]
}
