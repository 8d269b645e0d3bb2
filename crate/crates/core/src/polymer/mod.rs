//! Cluster expansion of log ω^t(e^{z₁H₁}⋯e^{z_nH_n}) around a product
//! reference state.
//!
//! [`ClusterExpansion`] enumerates polymers and clusters once for a given
//! truncation order and then evaluates cluster sums for any product tilt,
//! returning coefficient tables in the couplings. Clusters are stored as
//! multisets of polymer species (polymers grouped by support); this is exact
//! because the Ursell coefficient only depends on supports.

mod enumerate;
pub mod explicit;
pub mod poly;
pub mod ursell;

use std::collections::HashMap;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{translate, Certificate, Model, Potential, Site};
use crate::opalg::{herm_eig, kron, Operator, C64};
use crate::Caps;

use enumerate::{
    all_polymers, contract, element_sets, elements, grow_clusters, BlockTerm, Bits, Element,
    SequenceRecord, Window,
};
pub use explicit::{
    complex_margin, enumerate_clusters, omega_t, rho, rho_tilde, strip_ratio, ursell, ClusterTerm,
    Polymer, TiltRegion,
};
pub use poly::MonomialBasis;

/// Truncation of the couplings: total degree and per-block degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeCaps {
    pub order: usize,
    pub per_block: Vec<usize>,
}

impl DegreeCaps {
    pub fn total(order: usize, blocks: usize) -> Self {
        DegreeCaps {
            order,
            per_block: vec![order; blocks],
        }
    }
}

/// A cluster sum truncated at total degree K.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries {
    pub order: usize,
    pub value: C64,
    /// Contribution of each total degree 0..=K.
    pub degree_terms: Vec<C64>,
    /// |value(K) − value(K−1)|
    pub next_order_estimate: f64,
    /// Rigorous bound on the omitted orders, when a certificate covers the point.
    pub support_tail_bound: Option<f64>,
}

impl TruncatedSeries {
    pub fn from_parts(parts: Vec<C64>, tail: Option<f64>) -> Self {
        let order = parts.len() - 1;
        TruncatedSeries {
            order,
            value: parts.iter().sum(),
            next_order_estimate: parts[order].norm(),
            degree_terms: parts,
            support_tail_bound: tail,
        }
    }

    /// Value truncated at a lower order.
    pub fn value_at_order(&self, k: usize) -> C64 {
        self.degree_terms[..=k.min(self.order)].iter().sum()
    }

    pub fn sub(&self, other: &TruncatedSeries) -> TruncatedSeries {
        let parts = self
            .degree_terms
            .iter()
            .zip(&other.degree_terms)
            .map(|(a, b)| a - b)
            .collect();
        let tail = match (self.support_tail_bound, other.support_tail_bound) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        TruncatedSeries::from_parts(parts, tail)
    }
}

/// Sign of the tilt on the tilted region of a mixed reference state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SignConvention {
    /// e^{+tX} on the tilted sites, consistent with the uniform tilt.
    #[default]
    Standard,
    /// e^{−tX} on the tilted sites.
    Literal,
}

/// Polymers sharing one support, aggregated per coupling monomial.
#[derive(Clone, Debug)]
pub struct Species {
    pub sites: Vec<Site>,
    pub min_degree: usize,
    /// (monomial index, diagonal of Σ ordered products / Π k_b!)
    pub terms: Vec<(usize, Vec<C64>)>,
    bits: Bits,
}

/// A multiset of translated species with connected overlap graph.
#[derive(Clone, Debug)]
pub struct Cluster {
    /// (species index, offset) per member, with repetition.
    pub members: Vec<(usize, Site)>,
    pub ursell: i64,
    /// φ^T / Π m_j!
    pub coefficient: f64,
    pub support: Vec<Site>,
    pub min_degree: usize,
    union: Bits,
}

/// Per-site tilt probabilities p_k = e^{θ_k}/Σ_j e^{θ_j}.
pub fn tilt_probabilities(theta: &[C64]) -> Result<Vec<C64>> {
    let shift = theta.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<C64> = theta.iter().map(|z| (z - shift).exp()).collect();
    let s: C64 = w.iter().sum();
    let scale: f64 = w.iter().map(|z| z.norm()).sum();
    if s.norm() <= 1e-14 * scale {
        return Err(Error::DegenerateTilt(s.norm()));
    }
    Ok(w.iter().map(|z| z / s).collect())
}

/// log Σ_k e^{θ_k}
pub fn log_trace_exp(theta: &[C64]) -> C64 {
    let shift = theta.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    theta.iter().map(|z| (z - shift).exp()).sum::<C64>().ln() + shift
}

/// The enumerated cluster expansion.
pub struct ClusterExpansion {
    site_dim: usize,
    basis: MonomialBasis,
    degree_caps: DegreeCaps,
    x_eigs: Vec<f64>,
    window: Window,
    terms: Vec<BlockTerm>,
    elements: Vec<Element>,
    element_sets: Vec<Vec<u32>>,
    species: Vec<Species>,
    clusters: Vec<Cluster>,
    certificate: Option<Certificate>,
    caps: Caps,
    sequences: OnceLock<Vec<(usize, SequenceRecord)>>,
}

impl std::fmt::Debug for ClusterExpansion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClusterExpansion")
            .field("order", &self.degree_caps.order)
            .field("species", &self.species.len())
            .field("clusters", &self.clusters.len())
            .finish()
    }
}

impl ClusterExpansion {
    /// Expansion of log ω^t(e^{−βH}) for a model, to β-order `order`, in the
    /// eigenbasis of its observable.
    pub fn new(model: &Model, order: usize, caps: &Caps) -> Result<Self> {
        Self::build(
            std::slice::from_ref(&model.potential),
            &DegreeCaps::total(order, 1),
            Some(&model.observable),
            caps,
        )
    }

    /// Expansion of log tr(e^{z₁H₁}⋯e^{z_nH_n}) for several potentials with
    /// the normalized trace as reference state.
    pub fn generalized(blocks: &[Potential], degree_caps: &DegreeCaps, caps: &Caps) -> Result<Self> {
        Self::build(blocks, degree_caps, None, caps)
    }

    fn build(
        blocks: &[Potential],
        degree_caps: &DegreeCaps,
        observable: Option<&Operator>,
        caps: &Caps,
    ) -> Result<Self> {
        if blocks.is_empty() || degree_caps.per_block.len() != blocks.len() {
            return Err(Error::Domain("one degree cap per block required".into()));
        }
        if degree_caps.order == 0 {
            return Err(Error::Domain("truncation order must be at least 1".into()));
        }
        let d = blocks[0].site_dim();
        let dim = blocks[0].lattice_dim();
        if blocks.iter().any(|b| b.site_dim() != d || b.lattice_dim() != dim) {
            return Err(Error::Domain("blocks must share site and lattice dimension".into()));
        }
        let (x_eigs, v) = match observable {
            Some(x) => {
                if x.dim() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: x.dim(),
                    });
                }
                let e = herm_eig(x)?;
                (e.eigenvalues.clone(), Operator::new(e.eigenvectors)?)
            }
            None => (vec![0.0; d], Operator::identity(d)),
        };
        let mut terms = Vec::new();
        for (b, pot) in blocks.iter().enumerate() {
            for t in pot.terms() {
                let r = t.shape().len();
                let mut w = v.clone();
                for _ in 1..r {
                    w = kron(&w, &v);
                }
                let rot = &(&w.adjoint() * t.op()) * &w;
                let m = rot.dim();
                terms.push(BlockTerm {
                    block: b,
                    shape: t.shape().to_vec(),
                    op: (0..m * m).map(|k| rot.get(k / m, k % m)).collect(),
                    local_dim: m,
                });
            }
        }
        let order = degree_caps.order;
        let range = blocks.iter().map(|b| b.range()).max().unwrap_or(0);
        let window = Window::new(dim, order as i32 * range)?;
        let basis = MonomialBasis::new(order, &degree_caps.per_block);
        let elems = elements(&terms, &window, &degree_caps.per_block);
        let sets = element_sets(&elems, window.len(), order, &degree_caps.per_block, caps)?;
        let polys = all_polymers(&sets, &elems, &terms, d, order, &degree_caps.per_block, &basis, false);

        // group by support
        let mut species: Vec<Species> = Vec::new();
        let mut by_bits: HashMap<Bits, usize> = HashMap::new();
        for p in polys {
            let k = *by_bits.entry(p.bits).or_insert_with(|| {
                species.push(Species {
                    sites: p.support.clone(),
                    min_degree: p.size,
                    terms: Vec::new(),
                    bits: p.bits,
                });
                species.len() - 1
            });
            let s = &mut species[k];
            s.min_degree = s.min_degree.min(p.size);
            for (m, diag) in p.aggregated {
                match s.terms.iter_mut().find(|t| t.0 == m) {
                    Some(t) => t.1.iter_mut().zip(&diag).for_each(|(a, b)| *a += b),
                    None => s.terms.push((m, diag)),
                }
            }
        }
        for s in species.iter_mut() {
            s.terms.sort_by_key(|t| t.0);
        }

        // translates of each species inside the window
        let mut pool: Vec<(usize, Site)> = Vec::new();
        let mut pool_bits: Vec<Bits> = Vec::new();
        for (k, s) in species.iter().enumerate() {
            for o in &window.sites {
                let moved: Vec<Site> = s.sites.iter().map(|x| translate(x, o)).collect();
                if let Some(bits) = window.bits_of(&moved) {
                    pool.push((k, *o));
                    pool_bits.push(bits);
                }
            }
        }
        let pool_deg: Vec<usize> = pool.iter().map(|p| species[p.0].min_degree).collect();
        let raw = grow_clusters(&pool_bits, &pool_deg, window.len(), order, caps)?;

        let mut cache = ursell::UrsellCache::default();
        let clusters = raw
            .into_iter()
            .map(|members| {
                let adj = ursell::adjacency(members.len(), |i, j| {
                    pool_bits[members[i] as usize].intersects(&pool_bits[members[j] as usize])
                });
                let phi = cache.get(&adj);
                let mut denom = 1.0;
                let mut run = 1;
                for w in members.windows(2) {
                    if w[0] == w[1] {
                        run += 1;
                        denom *= run as f64;
                    } else {
                        run = 1;
                    }
                }
                let union = members.iter().fold(Bits::default(), |u, &m| u.union(&pool_bits[m as usize]));
                Cluster {
                    members: members
                        .iter()
                        .map(|&m| pool[m as usize])
                        .collect(),
                    ursell: phi,
                    coefficient: phi as f64 / denom,
                    support: window.sites_of(&union),
                    min_degree: members.iter().map(|&m| pool_deg[m as usize]).sum(),
                    union,
                }
            })
            .collect();

        Ok(ClusterExpansion {
            site_dim: d,
            basis,
            degree_caps: degree_caps.clone(),
            x_eigs,
            window,
            terms,
            elements: elems,
            element_sets: sets,
            species,
            clusters,
            certificate: None,
            caps: *caps,
            sequences: OnceLock::new(),
        })
    }

    /// Attaches a certificate; enables the rigorous truncation bound.
    pub fn with_certificate(mut self, c: Certificate) -> Self {
        self.certificate = Some(c);
        self
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    pub fn order(&self) -> usize {
        self.degree_caps.order
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    /// Eigenvalues of the observable (ascending); tilt vectors are indexed by them.
    pub fn x_eigenvalues(&self) -> &[f64] {
        &self.x_eigs
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// θ_k = t·x_k
    pub fn linear_tilt(&self, t: C64) -> Vec<C64> {
        self.x_eigs.iter().map(|&x| t * x).collect()
    }

    fn species_poly(&self, s: &Species, probs: &[&[C64]]) -> Vec<C64> {
        let mut out = self.basis.zero();
        for (m, diag) in &s.terms {
            out[*m] = contract(diag, probs, self.site_dim);
        }
        out
    }

    fn uniform_species_polys(&self, p: &[C64]) -> Vec<Vec<C64>> {
        self.species
            .par_iter()
            .map(|s| {
                let probs: Vec<&[C64]> = vec![p; s.sites.len()];
                self.species_poly(s, &probs)
            })
            .collect()
    }

    fn cluster_poly<F: Fn(usize, &Site) -> Vec<C64>>(&self, c: &Cluster, member: F) -> Vec<C64> {
        let mut acc = self.basis.one();
        for (s, o) in &c.members {
            acc = self.basis.mul(&acc, &member(*s, o));
        }
        acc.iter_mut().for_each(|v| *v *= c.coefficient);
        acc
    }

    fn uniform_cluster_polys(&self, theta: &[C64]) -> Result<Vec<Vec<C64>>> {
        let p = tilt_probabilities(theta)?;
        let sp = self.uniform_species_polys(&p);
        Ok(self
            .clusters
            .par_iter()
            .map(|c| self.cluster_poly(c, |s, _| sp[s].clone()))
            .collect())
    }

    fn sum_ordered(&self, polys: impl IntoIterator<Item = Vec<C64>>) -> Vec<C64> {
        let mut total = self.basis.zero();
        for p in polys {
            total.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
        }
        total
    }

    /// Coefficients of Ξ = Σ_{C∋0} w(C)/|C| for site log-weights θ.
    pub fn xi_coefficients(&self, theta: &[C64]) -> Result<Vec<C64>> {
        Ok(self.sum_ordered(self.uniform_cluster_polys(theta)?))
    }

    /// w(C) for every canonical cluster support C, in enumeration order.
    pub fn support_weights(&self, theta: &[C64]) -> Result<Vec<(Vec<Site>, Vec<C64>)>> {
        let polys = self.uniform_cluster_polys(theta)?;
        let mut order: Vec<Bits> = Vec::new();
        let mut acc: HashMap<Bits, Vec<C64>> = HashMap::new();
        for (c, p) in self.clusters.iter().zip(polys) {
            let e = acc.entry(c.union).or_insert_with(|| {
                order.push(c.union);
                self.basis.zero()
            });
            e.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
        }
        Ok(order
            .into_iter()
            .map(|b| (self.window.sites_of(&b), acc.remove(&b).unwrap()))
            .collect())
    }

    /// Offsets o with C + o ⊆ volume (volume sorted).
    fn fitting_offsets<'a>(&'a self, support: &'a [Site], volume: &'a [Site]) -> impl Iterator<Item = Site> + 'a {
        volume.iter().copied().filter(move |o| {
            support
                .iter()
                .all(|s| volume.binary_search(&translate(s, o)).is_ok())
        })
    }

    /// Coefficients of Σ_{C ⊆ Λ} w(C) for a uniform tilt; `volume` sorted.
    pub fn box_coefficients(&self, volume: &[Site], theta: &[C64]) -> Result<Vec<C64>> {
        let polys = self.uniform_cluster_polys(theta)?;
        let counts: Vec<f64> = self
            .clusters
            .par_iter()
            .map(|c| self.fitting_offsets(&c.support, volume).count() as f64)
            .collect();
        Ok(self.sum_ordered(
            polys
                .into_iter()
                .zip(counts)
                .map(|(p, n)| p.into_iter().map(|v| v * n).collect()),
        ))
    }

    /// Σ over clusters C ⊆ outer meeting both inner and outer∖inner, with
    /// the tilt applied only on inner sites. Returns (w̃ sum, untilted sum).
    pub fn boundary_coefficients(
        &self,
        inner: &[Site],
        outer: &[Site],
        theta: &[C64],
        sign: SignConvention,
    ) -> Result<(Vec<C64>, Vec<C64>)> {
        if inner.iter().any(|s| outer.binary_search(s).is_err()) {
            return Err(Error::NotContained("inner volume not inside outer volume".into()));
        }
        let theta_in: Vec<C64> = match sign {
            SignConvention::Standard => theta.to_vec(),
            SignConvention::Literal => theta.iter().map(|z| -z).collect(),
        };
        let tilted = tilt_probabilities(&theta_in)?;
        let flat = vec![C64::new(1.0 / self.site_dim as f64, 0.0); self.site_dim];
        let sp0 = self.uniform_species_polys(&flat);
        let in_inner = |s: &Site| inner.binary_search(s).is_ok();
        let parts: Vec<(Vec<C64>, Vec<C64>)> = self
            .clusters
            .par_iter()
            .map(|c| {
                let mut tilde = self.basis.zero();
                let mut plain = self.basis.zero();
                for o in self.fitting_offsets(&c.support, outer) {
                    let moved: Vec<Site> = c.support.iter().map(|s| translate(s, &o)).collect();
                    let meets_in = moved.iter().any(in_inner);
                    let meets_out = moved.iter().any(|s| !in_inner(s));
                    if !(meets_in && meets_out) {
                        continue;
                    }
                    let p = self.cluster_poly(c, |k, off| {
                        let s = &self.species[k];
                        let probs: Vec<&[C64]> = s
                            .sites
                            .iter()
                            .map(|x| {
                                let y = translate(&translate(x, off), &o);
                                if in_inner(&y) {
                                    tilted.as_slice()
                                } else {
                                    flat.as_slice()
                                }
                            })
                            .collect();
                        self.species_poly(s, &probs)
                    });
                    let q = self.cluster_poly(c, |k, _| sp0[k].clone());
                    tilde.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
                    plain.iter_mut().zip(&q).for_each(|(a, b)| *a += b);
                }
                (tilde, plain)
            })
            .collect();
        let mut tilde = self.basis.zero();
        let mut plain = self.basis.zero();
        for (a, b) in parts {
            tilde.iter_mut().zip(&a).for_each(|(x, y)| *x += y);
            plain.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
        }
        Ok((tilde, plain))
    }

    /// Truncated value at coupling z, with the tail bound when applicable.
    pub fn series(&self, coeffs: &[C64], z: &[C64], tail: Option<f64>) -> TruncatedSeries {
        TruncatedSeries::from_parts(self.basis.degree_parts(coeffs, z), tail)
    }

    /// a·r^{K+1}/(1 − r) with r = |β|/β₀: Cauchy estimate for a function
    /// analytic and bounded by a on the disc |β| < β₀.
    pub fn tail_bound(&self, t: C64, beta: C64) -> Option<f64> {
        let c = self.certificate?;
        if self.degree_caps.per_block.len() != 1 || t.im != 0.0 {
            return None;
        }
        let r = beta.norm() / c.beta0;
        if r >= 1.0 {
            return None;
        }
        Some(c.a * r.powi(self.order() as i32 + 1) / (1.0 - r))
    }

    /// Ξ_f(t) = Σ_{C∋0} w^{t,β}(C)/|C| truncated at β-order K.
    pub fn xi_free(&self, t: C64, beta: C64) -> Result<TruncatedSeries> {
        let coeffs = self.xi_coefficients(&self.linear_tilt(t))?;
        Ok(self.series(&coeffs, &[-beta], self.tail_bound(t, beta)))
    }

    /// Ξ for arbitrary per-eigenvalue log-weights θ (f(X) tilts).
    pub fn xi_weighted(&self, theta: &[C64], beta: C64) -> Result<TruncatedSeries> {
        let coeffs = self.xi_coefficients(theta)?;
        let tail = self.tail_bound(C64::new(0.0, 0.0), beta);
        Ok(self.series(&coeffs, &[-beta], tail))
    }

    /// Σ_{C⊆Λ} w^{t,β}(C) truncated at order K.
    pub fn box_sum(&self, volume: &[Site], t: C64, beta: C64) -> Result<TruncatedSeries> {
        let coeffs = self.box_coefficients(volume, &self.linear_tilt(t))?;
        Ok(self.series(&coeffs, &[-beta], None))
    }

    /// Σ over straddling clusters of w̃^{t,β}_Λ(C).
    pub fn boundary_cluster_sum(
        &self,
        inner: &[Site],
        outer: &[Site],
        t: C64,
        beta: C64,
        sign: SignConvention,
    ) -> Result<TruncatedSeries> {
        let (tilde, _) = self.boundary_coefficients(inner, outer, &self.linear_tilt(t), sign)?;
        Ok(self.series(&tilde, &[-beta], None))
    }

    /// Σ over straddling clusters of (w̃^{t,β}_Λ(C) − w^{0,β}(C)). Adding
    /// Σ_{C⊆Λ}(w^t − w^0) gives log ω^t_{Λ',Λ}(e^{−βH_{Λ'}}) − log ω^0(e^{−βH_{Λ'}}).
    pub fn boundary_correction(
        &self,
        inner: &[Site],
        outer: &[Site],
        t: C64,
        beta: C64,
        sign: SignConvention,
    ) -> Result<TruncatedSeries> {
        let (tilde, plain) = self.boundary_coefficients(inner, outer, &self.linear_tilt(t), sign)?;
        let diff: Vec<C64> = tilde.iter().zip(&plain).map(|(a, b)| a - b).collect();
        Ok(self.series(&diff, &[-beta], None))
    }

    /// Cluster expansion of (1/|Λ|) log tr(Π_b e^{z_b H_b}).
    pub fn generalized_xi(&self, z: &[C64]) -> Result<TruncatedSeries> {
        if z.len() != self.degree_caps.per_block.len() {
            return Err(Error::DimensionMismatch {
                expected: self.degree_caps.per_block.len(),
                got: z.len(),
            });
        }
        let coeffs = self.xi_coefficients(&vec![C64::new(0.0, 0.0); self.site_dim])?;
        Ok(self.series(&coeffs, z, None))
    }

    /// Σ_{C∋0} |w^{t,β}(C)| for each truncation order 1..=K.
    pub fn abs_cluster_sums(&self, t: C64, beta: C64) -> Result<Vec<f64>> {
        let weights = self.support_weights(&self.linear_tilt(t))?;
        let mut out = vec![0.0; self.order()];
        for (sites, coeffs) in weights {
            let parts = self.basis.degree_parts(&coeffs, &[-beta]);
            let mut partial = C64::new(0.0, 0.0);
            for k in 1..=self.order() {
                partial += parts[k];
                out[k - 1] += sites.len() as f64 * partial.norm();
            }
        }
        Ok(out)
    }

    fn sequences(&self) -> &[(usize, SequenceRecord)] {
        self.sequences.get_or_init(|| {
            let polys = all_polymers(
                &self.element_sets,
                &self.elements,
                &self.terms,
                self.site_dim,
                self.order(),
                &self.degree_caps.per_block,
                &self.basis,
                true,
            );
            polys
                .into_iter()
                .flat_map(|p| {
                    let k = self
                        .species
                        .iter()
                        .position(|s| s.bits == p.bits)
                        .expect("species for every support");
                    p.sequences.into_iter().map(move |r| (k, r))
                })
                .collect()
        })
    }

    /// Number of ordered polymers (sequences) anchored at the origin.
    pub fn polymer_count(&self) -> usize {
        self.sequences().len()
    }

    /// Σ_{γ: 0∈Supp γ} e^{a|Supp γ|}|ρ^{t,β}(γ)| for each truncation order 1..=K.
    pub fn kp_weighted_sums(&self, a: f64, t: C64, beta: C64) -> Result<Vec<f64>> {
        let p = tilt_probabilities(&self.linear_tilt(t))?;
        let z = [-beta];
        let per_degree: Vec<(usize, f64)> = self
            .sequences()
            .par_iter()
            .map(|(k, r)| {
                let s = &self.species[*k];
                let probs: Vec<&[C64]> = vec![&p; s.sites.len()];
                let omega = contract(&r.diag, &probs, self.site_dim);
                let mut coeffs = self.basis.zero();
                coeffs[r.monomial] = omega;
                let size = s.sites.len() as f64;
                (
                    self.basis.degree(r.monomial),
                    size * (a * size).exp() * self.basis.eval(&coeffs, &z).norm(),
                )
            })
            .collect();
        let mut by_degree = vec![0.0; self.order() + 1];
        for (d, v) in per_degree {
            by_degree[d] += v;
        }
        let mut out = Vec::with_capacity(self.order());
        let mut acc = 0.0;
        for v in by_degree.iter().skip(1) {
            acc += v;
            out.push(acc);
        }
        Ok(out)
    }

    pub(crate) fn sequence_polymers(&self) -> Vec<(Vec<Vec<Site>>, usize)> {
        self.sequences()
            .iter()
            .map(|(_, r)| {
                (
                    r.elements.iter().map(|&e| self.elements[e as usize].sites.clone()).collect(),
                    r.elements.len(),
                )
            })
            .collect()
    }

    pub(crate) fn window_sites(&self) -> &[Site] {
        &self.window.sites
    }

    pub(crate) fn caps(&self) -> &Caps {
        &self.caps
    }
}

/// Generating-function density for Σ_i τ_i(X_D) with a multi-site
/// observable on shape D: Ξ(−β, z) − Ξ(−β, 0) from the two-block expansion.
pub fn local_observable_f(
    potential: &Potential,
    observable: &crate::model::BaseInteraction,
    z: C64,
    beta: f64,
    degree_caps: &DegreeCaps,
    caps: &Caps,
) -> Result<TruncatedSeries> {
    let obs = Potential::new(
        potential.lattice_dim(),
        potential.site_dim(),
        vec![observable.clone()],
    )?;
    let engine = ClusterExpansion::generalized(&[potential.clone(), obs], degree_caps, caps)?;
    let b = C64::new(-beta, 0.0);
    let with = engine.generalized_xi(&[b, z])?;
    let without = engine.generalized_xi(&[b, C64::new(0.0, 0.0)])?;
    Ok(with.sub(&without))
}
