//! Lattice geometry, translation-invariant finite-range potentials,
//! Hamiltonians and the summability conditions certifying the expansion.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::opalg::{add_embedded, Operator, TensorLayout, C64};
use crate::Caps;

/// A point of Z^d, d ≤ 3; unused axes are zero.
pub type Site = [i32; 3];

pub const ORIGIN: Site = [0, 0, 0];

/// Default upper end of the β₀ search.
pub const DEFAULT_BETA_MAX: f64 = 10.0;

pub fn site(coords: &[i32]) -> Site {
    let mut s = ORIGIN;
    s[..coords.len()].copy_from_slice(coords);
    s
}

pub fn translate(s: &Site, by: &Site) -> Site {
    [s[0] + by[0], s[1] + by[1], s[2] + by[2]]
}

pub fn sub(s: &Site, by: &Site) -> Site {
    [s[0] - by[0], s[1] - by[1], s[2] - by[2]]
}

/// ℓ∞ diameter of a site set.
pub fn diameter(sites: &[Site]) -> i32 {
    let mut d = 0;
    for a in sites {
        for b in sites {
            for k in 0..3 {
                d = d.max((a[k] - b[k]).abs());
            }
        }
    }
    d
}

/// Rectangular box of Z^d with sites in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeBox {
    dim: usize,
    origin: Site,
    lengths: Vec<usize>,
    sites: Vec<Site>,
}

impl LatticeBox {
    pub fn new(lengths: &[usize]) -> Result<Self> {
        Self::with_origin(&vec![0; lengths.len()], lengths)
    }

    pub fn chain(n: usize) -> Result<Self> {
        Self::new(&[n])
    }

    pub fn with_origin(origin: &[i32], lengths: &[usize]) -> Result<Self> {
        let dim = lengths.len();
        if !(1..=3).contains(&dim) || origin.len() != dim {
            return Err(Error::Domain(format!("lattice dimension {} not in 1..=3", dim)));
        }
        if lengths.iter().any(|&l| l == 0) {
            return Err(Error::Domain("box lengths must be positive".into()));
        }
        let mut full = [1usize; 3];
        full[..dim].copy_from_slice(lengths);
        let o = site(origin);
        let mut sites = Vec::with_capacity(full.iter().product());
        for i in 0..full[0] as i32 {
            for j in 0..full[1] as i32 {
                for k in 0..full[2] as i32 {
                    sites.push(translate(&o, &[i, j, k]));
                }
            }
        }
        Ok(LatticeBox {
            dim,
            origin: o,
            lengths: lengths.to_vec(),
            sites,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn origin(&self) -> Site {
        self.origin
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, s: &Site) -> bool {
        (0..3).all(|a| {
            let len = if a < self.dim { self.lengths[a] as i32 } else { 1 };
            s[a] >= self.origin[a] && s[a] < self.origin[a] + len
        })
    }

    pub fn is_subset_of(&self, other: &LatticeBox) -> bool {
        self.sites.iter().all(|s| other.contains(s))
    }

    /// Site with coordinates origin + (length - 1) / 2 on every axis.
    pub fn center(&self) -> Site {
        let mut c = self.origin;
        for a in 0..self.dim {
            c[a] += (self.lengths[a] as i32 - 1) / 2;
        }
        c
    }

    /// Sites within ℓ∞ distance `r` of the complement, i.e. the inner
    /// boundary layer ∂Λ of width r (r ≥ 1).
    pub fn boundary_sites(&self, r: usize) -> Vec<Site> {
        let r = r.max(1) as i32;
        self.sites
            .iter()
            .filter(|s| {
                (0..self.dim).any(|a| {
                    let lo = s[a] - self.origin[a];
                    let hi = self.origin[a] + self.lengths[a] as i32 - 1 - s[a];
                    lo < r || hi < r
                })
            })
            .copied()
            .collect()
    }
}

/// One interaction term anchored at the origin; Φ(shape + i) is this
/// operator placed on the translated sites.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseInteraction {
    shape: Vec<Site>,
    op: Operator,
}

impl BaseInteraction {
    /// `shape` must be strictly increasing with the origin first; tensor
    /// factors of `op` follow that order.
    pub fn new(shape: Vec<Site>, op: Operator) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::Domain("empty shape".into()));
        }
        if shape.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("shape must be strictly increasing".into()));
        }
        if shape[0] != ORIGIN {
            return Err(Error::Domain(format!(
                "shape must have the origin as lexicographic minimum, found {:?}",
                shape[0]
            )));
        }
        op.check_hermitian()?;
        Ok(BaseInteraction { shape, op })
    }

    pub fn shape(&self) -> &[Site] {
        &self.shape
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }
}

/// Translation-invariant finite-range interaction.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    lattice_dim: usize,
    site_dim: usize,
    terms: Vec<BaseInteraction>,
    norms: Vec<f64>,
}

impl Potential {
    pub fn new(lattice_dim: usize, site_dim: usize, terms: Vec<BaseInteraction>) -> Result<Self> {
        if !(1..=3).contains(&lattice_dim) {
            return Err(Error::Domain(format!("lattice dimension {}", lattice_dim)));
        }
        if site_dim < 1 {
            return Err(Error::Domain("site dimension must be positive".into()));
        }
        let mut seen = HashSet::new();
        for t in &terms {
            if !seen.insert(t.shape.clone()) {
                return Err(Error::Domain(format!("duplicate shape {:?}", t.shape)));
            }
            if t.shape.iter().any(|s| s[lattice_dim..].iter().any(|&c| c != 0)) {
                return Err(Error::Domain(format!(
                    "shape {:?} leaves the {}-dimensional lattice",
                    t.shape, lattice_dim
                )));
            }
            let expected = site_dim.pow(t.shape.len() as u32);
            if t.op.dim() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    got: t.op.dim(),
                });
            }
        }
        let norms = terms.iter().map(|t| t.op.spectral_norm()).collect();
        Ok(Potential {
            lattice_dim,
            site_dim,
            terms,
            norms,
        })
    }

    pub fn zero(lattice_dim: usize, site_dim: usize) -> Self {
        Potential::new(lattice_dim, site_dim, vec![]).expect("valid empty potential")
    }

    /// Nearest-neighbour pair interaction `op` along every lattice axis.
    pub fn nearest_neighbour(lattice_dim: usize, op: &Operator) -> Result<Self> {
        let d = (op.dim() as f64).sqrt().round() as usize;
        if d * d != op.dim() {
            return Err(Error::Shape("pair operator dimension is not a square".into()));
        }
        let terms = (0..lattice_dim)
            .map(|a| {
                let mut e = ORIGIN;
                e[a] = 1;
                BaseInteraction::new(vec![ORIGIN, e], op.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Potential::new(lattice_dim, d, terms)
    }

    /// Single-site field term.
    pub fn on_site(lattice_dim: usize, op: &Operator) -> Result<Self> {
        Potential::new(
            lattice_dim,
            op.dim(),
            vec![BaseInteraction::new(vec![ORIGIN], op.clone())?],
        )
    }

    pub fn lattice_dim(&self) -> usize {
        self.lattice_dim
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn terms(&self) -> &[BaseInteraction] {
        &self.terms
    }

    /// Spectral norm of each term.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn is_zero(&self) -> bool {
        self.norms.iter().all(|&n| n == 0.0)
    }

    /// Maximal shape diameter R.
    pub fn range(&self) -> i32 {
        self.terms.iter().map(|t| diameter(&t.shape)).max().unwrap_or(0)
    }

    pub fn scaled(&self, s: f64) -> Potential {
        let terms = self
            .terms
            .iter()
            .map(|t| BaseInteraction {
                shape: t.shape.clone(),
                op: t.op.scale(C64::new(s, 0.0)),
            })
            .collect();
        Potential::new(self.lattice_dim, self.site_dim, terms).expect("scaling keeps validity")
    }

    /// Φ(A), or None when A is not a translate of a listed shape.
    pub fn phi_of(&self, set: &[Site]) -> Option<&Operator> {
        let mut sorted = set.to_vec();
        sorted.sort();
        sorted.dedup();
        let anchor = *sorted.first()?;
        let shape: Vec<Site> = sorted.iter().map(|s| sub(s, &anchor)).collect();
        self.terms.iter().find(|t| t.shape == shape).map(|t| &t.op)
    }

    /// All (term index, translated support) with support inside `sites`
    /// (sorted, strictly increasing).
    pub fn terms_within(&self, sites: &[Site]) -> Vec<(usize, Vec<Site>)> {
        let mut out = Vec::new();
        for x in sites {
            for (j, t) in self.terms.iter().enumerate() {
                let support: Vec<Site> = t.shape.iter().map(|s| translate(s, x)).collect();
                if support.iter().all(|s| sites.binary_search(s).is_ok()) {
                    out.push((j, support));
                }
            }
        }
        out
    }

    fn sum_terms<F: Fn(&[Site]) -> bool>(
        &self,
        sites: &[Site],
        caps: &Caps,
        keep: F,
    ) -> Result<Operator> {
        let n = sites.len();
        let dim = caps.check_dim(self.site_dim, n)?;
        let mut m = DMatrix::zeros(dim, dim);
        for (j, support) in self.terms_within(sites) {
            if !keep(&support) {
                continue;
            }
            let positions: Vec<usize> = support
                .iter()
                .map(|s| sites.binary_search(s).expect("support inside volume"))
                .collect();
            let layout = TensorLayout::new(&positions, n, self.site_dim);
            add_embedded(&mut m, &self.terms[j].op, &layout, C64::new(1.0, 0.0));
        }
        Operator::new(m)
    }

    /// H = Σ_{A ⊆ sites} Φ(A) for a sorted site list.
    pub fn hamiltonian_on(&self, sites: &[Site], caps: &Caps) -> Result<Operator> {
        if sites.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("site list must be strictly increasing".into()));
        }
        self.sum_terms(sites, caps, |_| true)
    }

    pub fn hamiltonian(&self, volume: &LatticeBox, caps: &Caps) -> Result<Operator> {
        self.hamiltonian_on(volume.sites(), caps)
    }

    /// W = Σ Φ(A) over A ⊆ Λ' meeting both Λ and Λ'∖Λ, as an operator on Λ'.
    pub fn boundary_term(
        &self,
        inner: &LatticeBox,
        outer: &LatticeBox,
        caps: &Caps,
    ) -> Result<Operator> {
        if !inner.is_subset_of(outer) {
            return Err(Error::NotContained("inner box not inside outer box".into()));
        }
        self.sum_terms(outer.sites(), caps, |support| {
            support.iter().any(|s| inner.contains(s)) && support.iter().any(|s| !inner.contains(s))
        })
    }

    /// Σ_{B∋0} g(|B|, ‖Φ(B)‖): each shape contributes once per site it contains.
    pub fn origin_sum<F: Fn(usize, f64) -> f64>(&self, g: F) -> f64 {
        self.terms
            .iter()
            .zip(&self.norms)
            .map(|(t, &n)| t.shape.len() as f64 * g(t.shape.len(), n))
            .sum()
    }

    /// a − Σ_{B∋0} e^{2a|B|}(e^{β₀‖Φ(B)‖} − 1)
    pub fn kp_condition(&self, a: f64, beta0: f64) -> f64 {
        a - self.origin_sum(|size, norm| (2.0 * a * size as f64).exp() * (beta0 * norm).exp_m1())
    }

    /// a − Σ_{B∋0} (e^{2a}/(2 − e^{δ‖X‖}))^{|B|}(e^{β₀‖Φ(B)‖} − 1)
    pub fn kp_condition_analytic(&self, a: f64, delta: f64, beta0: f64, x_norm: f64) -> Result<f64> {
        let damping = 2.0 - (delta * x_norm).exp();
        if damping <= 0.0 {
            return Err(Error::Domain(format!(
                "δ‖X‖ = {} must be below ln 2",
                delta * x_norm
            )));
        }
        let base = (2.0 * a).exp() / damping;
        Ok(a - self.origin_sum(|size, norm| base.powi(size as i32) * (beta0 * norm).exp_m1()))
    }

    /// Σ_{B∋0} e^{ε|B|}‖Φ(B)‖
    pub fn exp_summability(&self, eps: f64) -> f64 {
        self.origin_sum(|size, norm| (eps * size as f64).exp() * norm)
    }

    /// Largest certified β₀ over the a-grid for strip half-width δ.
    pub fn find_beta0(
        &self,
        a_grid: &[f64],
        delta: f64,
        x_norm: f64,
        beta_max: f64,
    ) -> Result<Certificate> {
        if a_grid.is_empty() {
            return Err(Error::Domain("empty a grid".into()));
        }
        let mut best: Option<Certificate> = None;
        for &a in a_grid {
            if a <= 0.0 {
                return Err(Error::Domain(format!("a = {} must be positive", a)));
            }
            let margin = |b: f64| self.kp_condition_analytic(a, delta, b, x_norm);
            let beta0 = if margin(beta_max).map_err(|e| Error::Infeasible(e.to_string()))? >= 0.0 {
                beta_max
            } else {
                let (mut lo, mut hi) = (0.0, beta_max);
                while hi - lo > 1e-8 {
                    let mid = 0.5 * (lo + hi);
                    if margin(mid)? >= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            };
            if best.as_ref().map_or(true, |c| beta0 > c.beta0) {
                best = Some(Certificate {
                    a,
                    beta0,
                    delta,
                    margin: margin(beta0)?,
                });
            }
        }
        match best {
            Some(c) if c.beta0 > 0.0 => Ok(c),
            _ => Err(Error::Infeasible("no positive β₀ on the a grid".into())),
        }
    }
}

/// Parameters (a, β₀, δ) for which the summability condition holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certificate {
    pub a: f64,
    pub beta0: f64,
    pub delta: f64,
    pub margin: f64,
}

/// A potential together with the single-site observable X.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub potential: Potential,
    pub observable: Operator,
}

impl Model {
    pub fn new(potential: Potential, observable: Operator) -> Result<Self> {
        observable.check_hermitian()?;
        if observable.dim() != potential.site_dim() {
            return Err(Error::DimensionMismatch {
                expected: potential.site_dim(),
                got: observable.dim(),
            });
        }
        Ok(Model {
            potential,
            observable,
        })
    }

    pub fn site_dim(&self) -> usize {
        self.potential.site_dim()
    }

    pub fn x_norm(&self) -> f64 {
        self.observable.spectral_norm()
    }

    pub fn certify(&self, a_grid: &[f64], delta: f64, beta_max: f64) -> Result<Certificate> {
        self.potential.find_beta0(a_grid, delta, self.x_norm(), beta_max)
    }
}
