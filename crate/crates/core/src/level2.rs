//! Level-2 large deviations for the empirical measure of the site
//! observables. Test functions are parametrized by their values on the
//! distinct eigenvalues of X, which is all that enters f(X_i).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::ExactSystem;
use crate::ldp::{conjugate_at, golden_max};
use crate::opalg::{cluster_sorted, DiscreteMeasure, C64, CLUSTER_TOL};
use crate::polymer::{log_trace_exp, ClusterExpansion};

/// Distinct eigenvalues of X with multiplicities.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub atoms: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// Distinct-atom index of every eigenvalue (ascending, with repetition).
    pub index: Vec<usize>,
}

impl Spectrum {
    pub fn new(eigenvalues: &[f64]) -> Self {
        let groups = cluster_sorted(eigenvalues, CLUSTER_TOL);
        let mut index = vec![0; eigenvalues.len()];
        for (g, (_, members)) in groups.iter().enumerate() {
            for &m in members {
                index[m] = g;
            }
        }
        Spectrum {
            atoms: groups.iter().map(|g| g.0).collect(),
            multiplicities: groups.iter().map(|g| g.1.len()).collect(),
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Normalized-trace spectral distribution m_k/d.
    pub fn trace_weights(&self) -> Vec<f64> {
        let d: usize = self.multiplicities.iter().sum();
        self.multiplicities.iter().map(|&m| m as f64 / d as f64).collect()
    }
}

/// Probability vector on the distinct eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSimplexPoint {
    pub weights: Vec<f64>,
}

impl SpectralSimplexPoint {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !(w >= -1e-12)) {
            return Err(Error::Invariant("negative simplex weight".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::Invariant(format!("simplex weights sum to {}", s)));
        }
        Ok(SpectralSimplexPoint { weights })
    }

    pub fn mean(&self, atoms: &[f64]) -> f64 {
        self.weights.iter().zip(atoms).map(|(w, a)| w * a).sum()
    }
}

/// Maximizer of ⟨μ, f⟩ − Ψ(f).
#[derive(Clone, Debug, PartialEq)]
pub struct Rate2 {
    pub value: f64,
    pub f: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Ψ and 𝓘 for one model at fixed β and truncation order.
pub struct Level2 {
    engine: Arc<ClusterExpansion>,
    beta: f64,
    spectrum: Spectrum,
    xi0: f64,
}

impl std::fmt::Debug for Level2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Level2")
            .field("beta", &self.beta)
            .field("spectrum", &self.spectrum)
            .finish()
    }
}

const GRAD_TOL: f64 = 1e-8;
const GRAD_STEP: f64 = 1e-5;
const MAX_ITER: usize = 5000;

impl Level2 {
    pub fn new(engine: Arc<ClusterExpansion>, beta: f64) -> Result<Self> {
        let spectrum = Spectrum::new(engine.x_eigenvalues());
        let zero = vec![C64::new(0.0, 0.0); engine.site_dim()];
        let xi0 = engine.xi_weighted(&zero, C64::new(beta, 0.0))?.value.re;
        Ok(Level2 {
            engine,
            beta,
            spectrum,
            xi0,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Ψ(f) = Re Ξ(f) − Ξ(0) + log Σ_k e^{f(x_k)} − log d.
    pub fn psi(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.spectrum.len() {
            return Err(Error::DimensionMismatch {
                expected: self.spectrum.len(),
                got: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("test function values must be finite".into()));
        }
        let theta: Vec<C64> = self.spectrum.index.iter().map(|&g| C64::new(f[g], 0.0)).collect();
        let xi = self.engine.xi_weighted(&theta, C64::new(self.beta, 0.0))?.value.re;
        let d = self.engine.site_dim() as f64;
        Ok(xi - self.xi0 + log_trace_exp(&theta).re - d.ln())
    }

    fn psi_gradient(&self, f: &[f64]) -> Result<Vec<f64>> {
        (0..f.len())
            .into_par_iter()
            .map(|k| {
                let mut up = f.to_vec();
                let mut dn = f.to_vec();
                up[k] += GRAD_STEP;
                dn[k] -= GRAD_STEP;
                Ok((self.psi(&up)? - self.psi(&dn)?) / (2.0 * GRAD_STEP))
            })
            .collect()
    }

    /// 𝓘(μ) = sup_f (⟨μ, f⟩ − Ψ(f)), starting from f = 0.
    pub fn rate2(&self, mu: &SpectralSimplexPoint) -> Result<Rate2> {
        self.rate2_from(mu, &vec![0.0; self.spectrum.len()])
    }

    /// Gradient ascent with Barzilai–Borwein steps and Armijo backtracking.
    pub fn rate2_from(&self, mu: &SpectralSimplexPoint, f0: &[f64]) -> Result<Rate2> {
        let n = self.spectrum.len();
        if mu.weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: mu.weights.len(),
            });
        }
        let obj = |f: &[f64]| -> Result<f64> {
            Ok(f.iter().zip(&mu.weights).map(|(a, b)| a * b).sum::<f64>() - self.psi(f)?)
        };
        let grad = |f: &[f64]| -> Result<Vec<f64>> {
            let g = self.psi_gradient(f)?;
            // ⟨μ, f⟩ − Ψ(f) is invariant under f → f + c; remove the mean direction
            let mut g: Vec<f64> = mu.weights.iter().zip(&g).map(|(m, p)| m - p).collect();
            let c = g.iter().sum::<f64>() / n as f64;
            g.iter_mut().for_each(|v| *v -= c);
            Ok(g)
        };
        let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut f = f0.to_vec();
        let mut val = obj(&f)?;
        let mut g = grad(&f)?;
        let mut step = 1.0;
        let mut it = 0;
        while norm(&g) > GRAD_TOL && it < MAX_ITER {
            it += 1;
            let gg = norm(&g).powi(2);
            let mut s = step;
            let (mut next, mut next_val);
            loop {
                next = f.iter().zip(&g).map(|(a, b)| a + s * b).collect::<Vec<f64>>();
                next_val = obj(&next)?;
                if next_val >= val + 1e-4 * s * gg || s < 1e-16 {
                    break;
                }
                s *= 0.5;
            }
            if next_val < val {
                break;
            }
            let ng = grad(&next)?;
            let sy: f64 = next
                .iter()
                .zip(&f)
                .zip(ng.iter().zip(&g))
                .map(|((a, b), (c, d))| (a - b) * (d - c))
                .sum();
            let ss: f64 = next.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum();
            step = if sy > 0.0 { (ss / sy).clamp(1e-6, 1e6) } else { 1.0 };
            let stalled = next_val - val <= 1e-16 * val.abs().max(1.0);
            f = next;
            val = next_val;
            g = ng;
            if stalled && it > 50 {
                break;
            }
        }
        Ok(Rate2 {
            value: val,
            gradient_norm: norm(&g),
            f,
            iterations: it,
        })
    }

    /// 𝓘 of an arbitrary discrete measure: +∞ if it charges points off σ(X).
    pub fn rate2_measure(&self, mu: &DiscreteMeasure) -> Result<f64> {
        let mut w = vec![0.0; self.spectrum.len()];
        for (a, p) in mu.atoms.iter().zip(&mu.weights) {
            if *p == 0.0 {
                continue;
            }
            match self.spectrum.atoms.iter().position(|x| (x - a).abs() <= CLUSTER_TOL) {
                Some(k) => w[k] += p,
                None => return Ok(f64::INFINITY),
            }
        }
        Ok(self.rate2(&SpectralSimplexPoint::new(w)?)?.value)
    }

    /// Level-1 rate I(x) = sup_t (t x − Ψ(t·id)).
    pub fn level1(&self, x: f64) -> Result<f64> {
        let lo = self.spectrum.atoms[0];
        let hi = *self.spectrum.atoms.last().unwrap();
        if !(x > lo && x < hi) {
            return Ok(f64::INFINITY);
        }
        let line = |t: f64| -> Result<f64> {
            let f: Vec<f64> = self.spectrum.atoms.iter().map(|a| t * a).collect();
            self.psi(&f)
        };
        let grid: Vec<f64> = (-40..=40).map(|k| k as f64 * 0.25).collect();
        let values = grid.iter().map(|&t| line(t)).collect::<Result<Vec<_>>>()?;
        let eval = |t: f64| line(t).expect("finite tilt");
        Ok(conjugate_at(&eval, &grid, &values, x))
    }

    /// inf{𝓘(μ) : Σ μ_k x_k = x}, minimized over the affine fiber.
    pub fn contracted(&self, x: f64) -> Result<f64> {
        let atoms = &self.spectrum.atoms;
        let n = atoms.len();
        let (lo, hi) = (atoms[0], atoms[n - 1]);
        if x < lo || x > hi {
            return Err(Error::Infeasible(format!("x = {} outside [{}, {}]", x, lo, hi)));
        }
        if n == 1 || x == lo || x == hi {
            let mut w = vec![0.0; n];
            w[if x == hi { n - 1 } else { 0 }] = 1.0;
            return Ok(self.rate2(&SpectralSimplexPoint::new(w)?)?.value);
        }
        // interior starting point on the fiber: mix the trace weights with two atoms
        let mut mu0 = vec![1.0 / n as f64; n];
        let m0: f64 = mu0.iter().zip(atoms).map(|(w, a)| w * a).sum();
        let target = if x >= m0 { n - 1 } else { 0 };
        let lambda = (x - m0) / (atoms[target] - m0);
        mu0.iter_mut().for_each(|w| *w *= 1.0 - lambda);
        mu0[target] += lambda;
        let basis = fiber_basis(atoms);
        if basis.ncols() == 0 {
            return Ok(self.rate2(&SpectralSimplexPoint::new(mu0)?)?.value);
        }
        let eval = |s: &DVector<f64>, warm: &[f64]| -> Result<Rate2> {
            let mut w: Vec<f64> = (DVector::from_vec(mu0.clone()) + &basis * s).iter().copied().collect();
            w.iter_mut().for_each(|v| *v = v.max(0.0));
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            self.rate2_from(&SpectralSimplexPoint::new(w)?, warm)
        };
        // feasible interval along each direction
        let range = |s: &DVector<f64>, dir: &DVector<f64>| -> (f64, f64) {
            let mu = DVector::from_vec(mu0.clone()) + &basis * s;
            let v = &basis * dir;
            let (mut a, mut b) = (f64::NEG_INFINITY, f64::INFINITY);
            for k in 0..n {
                if v[k] > 1e-15 {
                    a = a.max(-mu[k] / v[k]);
                } else if v[k] < -1e-15 {
                    b = b.min(-mu[k] / v[k]);
                }
            }
            (a, b)
        };
        let mut s = DVector::zeros(basis.ncols());
        let mut warm = vec![0.0; n];
        let mut best = f64::INFINITY;
        // coordinate golden-section sweeps; one sweep is exact for a 1D fiber
        let sweeps = if basis.ncols() == 1 { 1 } else { 30 };
        for _ in 0..sweeps {
            let before = best;
            for j in 0..basis.ncols() {
                let mut dir = DVector::zeros(basis.ncols());
                dir[j] = 1.0;
                let (a, b) = range(&s, &dir);
                let shrink = 1e-12 * (b - a);
                let w0 = warm.clone();
                let (u, v) = golden_max(
                    |u| {
                        let p = &s + &dir * u;
                        -eval(&p, &w0).map(|r| r.value).unwrap_or(f64::INFINITY)
                    },
                    a + shrink,
                    b - shrink,
                    1e-9 * (b - a).max(1.0),
                );
                s += &dir * u;
                best = -v;
                warm = eval(&s, &w0)?.f;
            }
            if (before - best).abs() <= 1e-12 {
                break;
            }
        }
        Ok(best)
    }

    /// (level-1 I(x), contracted 𝓘).
    pub fn contraction_check(&self, x: f64) -> Result<(f64, f64)> {
        Ok((self.level1(x)?, self.contracted(x)?))
    }

    /// d/ds Ψ(f + s g) at s = 0, Richardson-refined central differences.
    pub fn gateaux(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        if g.len() != f.len() {
            return Err(Error::DimensionMismatch {
                expected: f.len(),
                got: g.len(),
            });
        }
        let d = |s: f64| -> Result<f64> {
            let up: Vec<f64> = f.iter().zip(g).map(|(a, b)| a + s * b).collect();
            let dn: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - s * b).collect();
            Ok((self.psi(&up)? - self.psi(&dn)?) / (2.0 * s))
        };
        Ok((4.0 * d(5e-4)? - d(1e-3)?) / 3.0)
    }
}

/// Orthonormal basis of {v : Σ v = 0, Σ a v = 0}, by Gram–Schmidt.
fn fiber_basis(atoms: &[f64]) -> DMatrix<f64> {
    let n = atoms.len();
    let mut kept: Vec<DVector<f64>> = Vec::new();
    let push = |v: DVector<f64>, kept: &mut Vec<DVector<f64>>| {
        let mut w = v;
        for k in kept.iter() {
            w -= k * k.dot(&w);
        }
        let norm = w.norm();
        if norm > 1e-8 {
            kept.push(w / norm);
            true
        } else {
            false
        }
    };
    push(DVector::from_element(n, 1.0), &mut kept);
    push(DVector::from_column_slice(atoms), &mut kept);
    let rank = kept.len();
    let mut basis = Vec::new();
    for k in 0..n {
        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        if push(e, &mut kept) {
            basis.push(kept.last().unwrap().clone());
        }
    }
    debug_assert_eq!(basis.len(), n - rank);
    DMatrix::from_fn(n, basis.len(), |i, j| basis[j][i])
}

/// Probability of one type class (histogram over distinct eigenvalues).
#[derive(Clone, Debug, PartialEq)]
pub struct TypeClass {
    pub counts: Vec<usize>,
    pub probability: f64,
}

impl TypeClass {
    pub fn mean(&self, atoms: &[f64]) -> f64 {
        let n: usize = self.counts.iter().sum();
        self.counts.iter().zip(atoms).map(|(&c, a)| c as f64 * a).sum::<f64>() / n as f64
    }
}

/// Distribution of the empirical measure L_Λ over type classes, sorted by
/// counts.
pub fn empirical_measure_distribution(system: &ExactSystem, beta: f64) -> Vec<TypeClass> {
    let spectrum = Spectrum::new(system.x_eigenvalues());
    let positions = system.tilted_positions();
    let q = system.config_probabilities(beta);
    let mut table: std::collections::BTreeMap<Vec<usize>, f64> = Default::default();
    for (c, &p) in q.iter().enumerate() {
        let mut counts = vec![0usize; spectrum.len()];
        for &pos in positions {
            counts[spectrum.index[system.config_digit(c, pos)]] += 1;
        }
        *table.entry(counts).or_insert(0.0) += p;
    }
    table
        .into_iter()
        .map(|(counts, probability)| TypeClass { counts, probability })
        .collect()
}

/// Pushforward of a type-class distribution under the mean functional.
pub fn mean_pushforward(classes: &[TypeClass], atoms: &[f64]) -> Result<DiscreteMeasure> {
    let mut pairs: Vec<(f64, f64)> = classes.iter().map(|c| (c.mean(atoms), c.probability)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (atoms, weights) = cluster_sorted(&values, CLUSTER_TOL)
        .into_iter()
        .map(|(a, idx)| (a, idx.iter().map(|&i| pairs[i].1).sum::<f64>()))
        .unzip();
    DiscreteMeasure::new(atoms, weights)
}
