//! Exact finite-volume computations by diagonalization.
//!
//! [`ExactSystem`] works in the product eigenbasis of the observable X, where
//! X_Λ is diagonal. When every rotated interaction term is diagonal as well
//! (commuting classical case) the Hamiltonian is stored as a vector and no
//! dense matrix is formed.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{LatticeBox, Model, Site};
use crate::opalg::{
    add_embedded, check_density, cluster_sorted, embed, herm_eig, kron, spectral_distribution,
    DiscreteMeasure, Operator, SpectralDecomposition, TensorLayout, C64, CLUSTER_TOL,
};
use crate::Caps;

/// Normalized Gibbs density matrix.
#[derive(Clone, Debug)]
pub struct DensityState {
    rho: Operator,
}

impl DensityState {
    pub fn new(rho: Operator) -> Result<Self> {
        check_density(&rho)?;
        Ok(DensityState { rho })
    }

    pub fn rho(&self) -> &Operator {
        &self.rho
    }

    pub fn expect(&self, a: &Operator) -> C64 {
        (&self.rho * a).trace()
    }
}

/// e^{−βH_Λ}/Tr e^{−βH_Λ} in the standard product basis.
pub fn gibbs_state(model: &Model, volume: &LatticeBox, beta: f64, caps: &Caps) -> Result<DensityState> {
    let h = model.potential.hamiltonian(volume, caps)?;
    let eig = herm_eig(&h)?;
    let shift = eig
        .eigenvalues
        .iter()
        .map(|&e| -beta * e)
        .fold(f64::NEG_INFINITY, f64::max);
    let w = eig.map(|e| C64::new((-beta * e - shift).exp(), 0.0));
    let z = w.trace().re;
    let rho = w.scale(C64::new(1.0 / z, 0.0));
    // remove rounding asymmetry before validation
    DensityState::new((&rho + &rho.adjoint()).scale(C64::new(0.5, 0.0)))
}

/// X_Λ = Σ_{i∈Λ} X_i in the standard basis.
pub fn sum_observable(model: &Model, volume: &LatticeBox, caps: &Caps) -> Result<Operator> {
    let n = volume.len();
    let d = model.site_dim();
    let dim = caps.check_dim(d, n)?;
    let mut m = DMatrix::zeros(dim, dim);
    for p in 0..n {
        let layout = TensorLayout::new(&[p], n, d);
        add_embedded(&mut m, &model.observable, &layout, C64::new(1.0, 0.0));
    }
    Operator::new(m)
}

/// Distribution of X_Λ/|Λ| under the Gibbs state, by dense spectral
/// decomposition in the standard basis.
pub fn empirical_distribution(
    model: &Model,
    volume: &LatticeBox,
    beta: f64,
    caps: &Caps,
) -> Result<DiscreteMeasure> {
    let state = gibbs_state(model, volume, beta, caps)?;
    let mean = sum_observable(model, volume, caps)?.scale(C64::new(1.0 / volume.len() as f64, 0.0));
    spectral_distribution(&mean, state.rho())
}

#[derive(Clone, Debug)]
enum HRep {
    Diagonal(Vec<f64>),
    Dense {
        matrix: DMatrix<C64>,
        eig: SpectralDecomposition,
    },
}

/// Boundary convention for the finite-volume generating function.
#[derive(Clone, Copy, Debug)]
pub enum BoundaryMode<'a> {
    /// H = H_Λ
    Free,
    /// H = H_{Λ'} with Λ ⊆ Λ'; only sites of Λ are tilted.
    Embedded(&'a LatticeBox),
}

/// Results of the Golden–Thompson comparison at one t.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GtGap {
    pub tilde_f: f64,
    pub f: f64,
    pub gap: f64,
}

/// A finite volume prepared in the eigenbasis of X.
#[derive(Clone, Debug)]
pub struct ExactSystem {
    site_dim: usize,
    n_sites: usize,
    /// Positions (in the volume) of the tilted sites, i.e. of Λ.
    tilted: Vec<usize>,
    center: usize,
    x_eigs: Vec<f64>,
    /// Per basis configuration: Σ_{i∈Λ} x(c_i).
    x_sum: Vec<f64>,
    h: HRep,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl ExactSystem {
    /// Free boundary conditions on Λ.
    pub fn new(model: &Model, volume: &LatticeBox, caps: &Caps) -> Result<Self> {
        Self::build(model, volume.sites(), volume.sites(), volume.center(), caps)
    }

    /// Hamiltonian of `outer`, tilt and averages restricted to `inner`.
    pub fn embedded(model: &Model, inner: &LatticeBox, outer: &LatticeBox, caps: &Caps) -> Result<Self> {
        if !inner.is_subset_of(outer) {
            return Err(Error::NotContained("inner box not inside outer box".into()));
        }
        Self::build(model, outer.sites(), inner.sites(), inner.center(), caps)
    }

    pub fn with_mode(model: &Model, volume: &LatticeBox, mode: BoundaryMode, caps: &Caps) -> Result<Self> {
        match mode {
            BoundaryMode::Free => Self::new(model, volume, caps),
            BoundaryMode::Embedded(outer) => Self::embedded(model, volume, outer, caps),
        }
    }

    fn build(model: &Model, sites: &[Site], tilted_sites: &[Site], center: Site, caps: &Caps) -> Result<Self> {
        let d = model.site_dim();
        let n = sites.len();
        let dim = caps.check_dim(d, n)?;
        let xe = herm_eig(&model.observable)?;
        let v = Operator::new(xe.eigenvectors.clone())?;
        let tilted: Vec<usize> = tilted_sites
            .iter()
            .map(|s| sites.binary_search(s).map_err(|_| Error::NotContained(format!("{:?}", s))))
            .collect::<Result<_>>()?;
        let center = sites.binary_search(&center).expect("center inside volume");

        let mut x_sum = vec![0.0; dim];
        for (c, xs) in x_sum.iter_mut().enumerate() {
            for &p in &tilted {
                *xs += xe.eigenvalues[digit(c, p, n, d)];
            }
        }

        // rotate each term into the X eigenbasis
        let pot = &model.potential;
        let mut rotated = Vec::with_capacity(pot.terms().len());
        let mut all_diagonal = true;
        for t in pot.terms() {
            let mut w = v.clone();
            for _ in 1..t.shape().len() {
                w = kron(&w, &v);
            }
            let r = &(&w.adjoint() * t.op()) * &w;
            all_diagonal &= r.is_diagonal(1e-13 * r.max_abs().max(1.0));
            rotated.push(r);
        }

        let placed = pot.terms_within(sites);
        let h = if all_diagonal {
            let mut diag = vec![0.0; dim];
            for (j, support) in &placed {
                let positions: Vec<usize> = support.iter().map(|s| sites.binary_search(s).unwrap()).collect();
                let layout = TensorLayout::new(&positions, n, d);
                let r = &rotated[*j];
                for (c, e) in diag.iter_mut().enumerate() {
                    let l = layout.local_index(c);
                    *e += r.get(l, l).re;
                }
            }
            HRep::Diagonal(diag)
        } else {
            let mut m = DMatrix::zeros(dim, dim);
            for (j, support) in &placed {
                let positions: Vec<usize> = support.iter().map(|s| sites.binary_search(s).unwrap()).collect();
                let layout = TensorLayout::new(&positions, n, d);
                add_embedded(&mut m, &rotated[*j], &layout, C64::new(1.0, 0.0));
            }
            let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            let eig = herm_eig(&Operator::new(m.clone())?)?;
            HRep::Dense { matrix: m, eig }
        };
        Ok(ExactSystem {
            site_dim: d,
            n_sites: n,
            tilted,
            center,
            x_eigs: xe.eigenvalues,
            x_sum,
            h,
        })
    }

    /// |Λ| (number of tilted sites).
    pub fn volume(&self) -> usize {
        self.tilted.len()
    }

    pub fn dim(&self) -> usize {
        self.x_sum.len()
    }

    /// True when X_Λ and H commute through the diagonal fast path.
    pub fn is_diagonal(&self) -> bool {
        matches!(self.h, HRep::Diagonal(_))
    }

    /// Eigenvalues of the observable, ascending; basis digits index into them.
    pub fn x_eigenvalues(&self) -> &[f64] {
        &self.x_eigs
    }

    /// Digit (eigen-index of X) of position p in configuration c.
    pub fn config_digit(&self, c: usize, p: usize) -> usize {
        digit(c, p, self.n_sites, self.site_dim)
    }

    /// Positions of the tilted sites in the volume.
    pub fn tilted_positions(&self) -> &[usize] {
        &self.tilted
    }

    /// Diagonal of e^{−βH}/Tr e^{−βH} in the X eigenbasis (probabilities of
    /// the joint eigen-configurations of the commuting family X_i).
    pub fn config_probabilities(&self, beta: f64) -> Vec<f64> {
        self.diag_gibbs(|_| 0.0, beta).0
    }

    /// Diagonal of e^{A}/Tr e^{A} with A = −βH − Σ_c g(c)|c⟩⟨c| and log Tr e^{A}.
    fn diag_gibbs<G: Fn(usize) -> f64>(&self, g: G, beta: f64) -> (Vec<f64>, f64) {
        match &self.h {
            HRep::Diagonal(e) => {
                let logw: Vec<f64> = e.iter().enumerate().map(|(c, &ec)| -beta * ec - g(c)).collect();
                let lz = log_sum_exp(logw.iter().copied());
                (logw.iter().map(|&l| (l - lz).exp()).collect(), lz)
            }
            HRep::Dense { matrix, eig } => {
                let dim = self.dim();
                let any_tilt = (0..dim).any(|c| g(c) != 0.0);
                let owned;
                let eig = if any_tilt {
                    let mut a = matrix * C64::new(-beta, 0.0);
                    for c in 0..dim {
                        a[(c, c)] -= g(c);
                    }
                    owned = herm_eig(&Operator::new(a).expect("square")).expect("Hermitian");
                    &owned
                } else {
                    eig
                };
                let scale = if any_tilt { 1.0 } else { -beta };
                let logw: Vec<f64> = eig.eigenvalues.iter().map(|&l| scale * l).collect();
                let lz = log_sum_exp(logw.iter().copied());
                let w: Vec<f64> = logw.iter().map(|&l| (l - lz).exp()).collect();
                let u = &eig.eigenvectors;
                let p = (0..dim)
                    .map(|c| (0..dim).map(|k| u[(c, k)].norm_sqr() * w[k]).sum())
                    .collect();
                (p, lz)
            }
        }
    }

    /// (1/|Λ|) log [Tr(e^{tX_Λ} e^{−βH})/Tr e^{−βH}]
    pub fn finite_f(&self, t: f64, beta: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let q = self.config_probabilities(beta);
        let lf = log_sum_exp(
            q.iter()
                .zip(&self.x_sum)
                .filter(|(&p, _)| p > 0.0)
                .map(|(&p, &x)| p.ln() + t * x),
        );
        lf / self.volume() as f64
    }

    /// (1/|Λ|) log Tr e^{−βH − hX_Λ}
    pub fn tilted_pressure(&self, h: f64, beta: f64) -> f64 {
        let (_, lz) = self.diag_gibbs(|c| h * self.x_sum[c], beta);
        lz / self.volume() as f64
    }

    /// Site-averaged tilted expectation of X.
    pub fn tilted_mean(&self, h: f64, beta: f64) -> f64 {
        let (p, _) = self.diag_gibbs(|c| h * self.x_sum[c], beta);
        p.iter().zip(&self.x_sum).map(|(p, x)| p * x).sum::<f64>() / self.volume() as f64
    }

    /// Solves tilted_mean(h) = a by bisection, checking monotonicity of the
    /// tilted expectation along the way.
    pub fn solve_tilt(&self, a: f64, beta: f64) -> Result<f64> {
        let lo_x = self.x_eigs[0];
        let hi_x = *self.x_eigs.last().unwrap();
        if !(a > lo_x && a < hi_x) {
            return Err(Error::Domain(format!(
                "a = {} outside the open spectral interval ({}, {})",
                a, lo_x, hi_x
            )));
        }
        let m = |h: f64| self.tilted_mean(h, beta);
        let (mut lo, mut hi) = (-1.0, 1.0);
        let (mut m_lo, mut m_hi) = (m(lo), m(hi));
        while m_lo < a {
            lo *= 2.0;
            if lo < -1e4 {
                return Err(Error::Domain(format!("no tilt bracket for a = {}", a)));
            }
            m_lo = m(lo);
        }
        while m_hi > a {
            hi *= 2.0;
            if hi > 1e4 {
                return Err(Error::Domain(format!("no tilt bracket for a = {}", a)));
            }
            m_hi = m(hi);
        }
        let tol = 1e-12;
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            let mm = m(mid);
            if mm > m_lo + tol || mm < m_hi - tol {
                return Err(Error::Monotonicity(format!(
                    "tilted mean {} at h = {} leaves the bracket [{}, {}]",
                    mm, mid, m_hi, m_lo
                )));
            }
            if (mm - a).abs() <= 1e-10 && (hi - lo) < 1e-12 * (1.0 + mid.abs()) || hi - lo == 0.0 {
                return Ok(mid);
            }
            if mm > a {
                lo = mid;
                m_lo = mm;
            } else {
                hi = mid;
                m_hi = mm;
            }
            if hi - lo <= f64::EPSILON * (1.0 + mid.abs()) {
                break;
            }
        }
        let mid = 0.5 * (lo + hi);
        let residual = (m(mid) - a).abs();
        if residual <= 1e-10 {
            Ok(mid)
        } else {
            Err(Error::Domain(format!("tilt residual {:.3e} above tolerance", residual)))
        }
    }

    /// tilted_pressure(−t) − tilted_pressure(0)
    pub fn tilde_f(&self, t: f64, beta: f64) -> f64 {
        self.tilted_pressure(-t, beta) - self.tilted_pressure(0.0, beta)
    }

    pub fn golden_thompson_gap(&self, t: f64, beta: f64) -> GtGap {
        let tilde_f = self.tilde_f(t, beta);
        let f = self.finite_f(t, beta);
        GtGap {
            tilde_f,
            f,
            gap: f - tilde_f,
        }
    }

    /// Gibbs mean of X_Λ/|Λ|.
    pub fn mean(&self, beta: f64) -> f64 {
        let q = self.config_probabilities(beta);
        q.iter().zip(&self.x_sum).map(|(p, x)| p * x).sum::<f64>() / self.volume() as f64
    }

    /// ω(e^{itW}) with W = (X_Λ − ω(X_Λ))/√|Λ|.
    pub fn clt_charfn(&self, t: f64, beta: f64) -> C64 {
        let q = self.config_probabilities(beta);
        let n = self.volume() as f64;
        let mean: f64 = q.iter().zip(&self.x_sum).map(|(p, x)| p * x).sum();
        let s = t / n.sqrt();
        q.iter()
            .zip(&self.x_sum)
            .map(|(&p, &x)| C64::new(0.0, s * (x - mean)).exp() * p)
            .sum()
    }

    /// Σ_{i∈Λ} [ω(X_i X_c) − ω(X_i)ω(X_c)] with c the central site of Λ.
    pub fn chi2(&self, beta: f64) -> f64 {
        let q = self.config_probabilities(beta);
        let xc = |c: usize| self.x_eigs[self.config_digit(c, self.center)];
        let mean_c: f64 = q.iter().enumerate().map(|(c, p)| p * xc(c)).sum();
        let mut total = 0.0;
        for &p in &self.tilted {
            let xi = |c: usize| self.x_eigs[self.config_digit(c, p)];
            let mut m_i = 0.0;
            let mut m_ic = 0.0;
            for (c, &w) in q.iter().enumerate() {
                m_i += w * xi(c);
                m_ic += w * xi(c) * xc(c);
            }
            total += m_ic - m_i * mean_c;
        }
        total
    }

    /// Distribution of X_Λ/|Λ| from the configuration probabilities.
    pub fn mean_distribution(&self, beta: f64) -> DiscreteMeasure {
        let q = self.config_probabilities(beta);
        let n = self.volume() as f64;
        let mut pairs: Vec<(f64, f64)> = self.x_sum.iter().map(|&x| x / n).zip(q).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let (atoms, weights) = cluster_sorted(&values, CLUSTER_TOL)
            .into_iter()
            .map(|(a, idx)| (a, idx.iter().map(|&i| pairs[i].1).sum::<f64>()))
            .unzip();
        DiscreteMeasure { atoms, weights }
    }
}

fn digit(c: usize, p: usize, n: usize, d: usize) -> usize {
    (c / d.pow((n - 1 - p) as u32)) % d
}

/// Finite-volume generating function (1/|Λ|) log ω_Λ(e^{tX_Λ}).
pub fn finite_f(
    model: &Model,
    volume: &LatticeBox,
    t: f64,
    beta: f64,
    mode: BoundaryMode,
    caps: &Caps,
) -> Result<f64> {
    Ok(ExactSystem::with_mode(model, volume, mode, caps)?.finite_f(t, beta))
}

pub fn tilted_pressure(model: &Model, volume: &LatticeBox, h: f64, beta: f64, caps: &Caps) -> Result<f64> {
    Ok(ExactSystem::new(model, volume, caps)?.tilted_pressure(h, beta))
}

pub fn solve_tilt(model: &Model, volume: &LatticeBox, a: f64, beta: f64, caps: &Caps) -> Result<f64> {
    ExactSystem::new(model, volume, caps)?.solve_tilt(a, beta)
}

pub fn tilde_f(model: &Model, volume: &LatticeBox, t: f64, beta: f64, caps: &Caps) -> Result<f64> {
    Ok(ExactSystem::new(model, volume, caps)?.tilde_f(t, beta))
}

pub fn golden_thompson_gap(model: &Model, volume: &LatticeBox, t: f64, beta: f64, caps: &Caps) -> Result<GtGap> {
    Ok(ExactSystem::new(model, volume, caps)?.golden_thompson_gap(t, beta))
}

pub fn clt_charfn(model: &Model, volume: &LatticeBox, t: f64, beta: f64, caps: &Caps) -> Result<C64> {
    Ok(ExactSystem::new(model, volume, caps)?.clt_charfn(t, beta))
}

pub fn chi2(model: &Model, volume: &LatticeBox, beta: f64, caps: &Caps) -> Result<f64> {
    Ok(ExactSystem::new(model, volume, caps)?.chi2(beta))
}

/// Embeds a volume operator of `inner` into `outer` (helper for consistency checks).
pub fn embed_box(op: &Operator, inner: &LatticeBox, outer: &LatticeBox, site_dim: usize) -> Result<Operator> {
    embed(op, inner.sites(), outer.sites(), site_dim)
}
