//! Direct, unaggregated evaluation of polymer weights and cluster terms with
//! dense operators in the standard basis. Slow; used to cross-check the
//! aggregated engine and for inspecting individual terms.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::model::{translate, LatticeBox, Potential, Site};
use crate::opalg::{embed, herm_eig, Operator, C64};
use crate::Caps;

use super::ursell::{adjacency, ursell_from_adjacency};
use super::ClusterExpansion;

/// Sites carrying the tilted density e^{tX}/Tr e^{tX}; the rest carry 1/d.
#[derive(Clone, Debug, PartialEq)]
pub enum TiltRegion {
    All,
    Sites(Vec<Site>),
    None,
}

impl TiltRegion {
    fn tilts(&self, s: &Site) -> bool {
        match self {
            TiltRegion::All => true,
            TiltRegion::Sites(v) => v.contains(s),
            TiltRegion::None => false,
        }
    }
}

fn tilted_density(x: &Operator, t: C64) -> Result<Operator> {
    let e = herm_eig(x)?;
    let shift = e.eigenvalues.iter().map(|&v| (t * v).re).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<C64> = e.eigenvalues.iter().map(|&v| (t * v - shift).exp()).collect();
    let z: C64 = w.iter().sum();
    if z.norm() <= 1e-14 * w.iter().map(|c| c.norm()).sum::<f64>() {
        return Err(Error::DegenerateTilt(z.norm()));
    }
    Ok(e.map(|v| (t * v - shift).exp() / z))
}

/// Product-state expectation of the ordered product op₁⋯op_k, each op_j
/// acting on its (sorted) site set. Computed separately on each
/// overlap-connected component.
pub fn omega_t(ops: &[(Vec<Site>, Operator)], x: &Operator, t: C64, region: &TiltRegion) -> Result<C64> {
    let d = x.dim();
    let tilted = tilted_density(x, t)?;
    let flat = Operator::identity(d).scale(C64::new(1.0 / d as f64, 0.0));
    let n = ops.len();
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(c: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while c[r] != r {
            r = c[r];
        }
        c[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if ops[i].0.iter().any(|s| ops[j].0.contains(s)) {
                let (a, b) = (find(&mut comp, i), find(&mut comp, j));
                comp[a.max(b)] = a.min(b);
            }
        }
    }
    let roots: BTreeSet<usize> = (0..n).map(|i| find(&mut comp, i)).collect();
    let caps = Caps::default();
    let mut total = C64::new(1.0, 0.0);
    for r in roots {
        let members: Vec<usize> = (0..n).filter(|&i| find(&mut comp, i) == r).collect();
        let union: Vec<Site> = members
            .iter()
            .flat_map(|&i| ops[i].0.iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let dim = caps.check_dim(d, union.len())?;
        let mut prod = Operator::identity(dim);
        for &i in &members {
            prod = &prod * &embed(&ops[i].1, &ops[i].0, &union, d)?;
        }
        let mut state = Operator::identity(1);
        for s in &union {
            let local = if region.tilts(s) { &tilted } else { &flat };
            state = crate::opalg::kron(&state, local);
        }
        total *= (&state * &prod).trace();
    }
    Ok(total)
}

/// Ordered sequence of interaction supports with connected overlap graph.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Polymer {
    sets: Vec<Vec<Site>>,
}

impl Polymer {
    pub fn new(mut sets: Vec<Vec<Site>>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::Domain("empty polymer".into()));
        }
        for s in sets.iter_mut() {
            if s.is_empty() {
                return Err(Error::Domain("empty set in polymer".into()));
            }
            s.sort();
            s.dedup();
        }
        let adj = adjacency(sets.len(), |i, j| sets[i].iter().any(|s| sets[j].contains(s)));
        let mut seen = 1u32;
        let mut frontier = 1u32;
        while frontier != 0 {
            let i = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let new = adj[i] & !seen;
            seen |= new;
            frontier |= new;
        }
        if seen.count_ones() as usize != sets.len() {
            return Err(Error::Domain("polymer sets are not overlap-connected".into()));
        }
        Ok(Polymer { sets })
    }

    pub fn sets(&self) -> &[Vec<Site>] {
        &self.sets
    }

    /// β-degree.
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn support(&self) -> Vec<Site> {
        self.sets
            .iter()
            .flatten()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn translated(&self, by: &Site) -> Polymer {
        Polymer {
            sets: self
                .sets
                .iter()
                .map(|s| s.iter().map(|x| translate(x, by)).collect())
                .collect(),
        }
    }

    fn operators(&self, potential: &Potential) -> Option<Vec<(Vec<Site>, Operator)>> {
        self.sets
            .iter()
            .map(|s| potential.phi_of(s).map(|op| (s.clone(), op.clone())))
            .collect()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn weight(gamma: &Polymer, potential: &Potential, x: &Operator, t: C64, beta: C64, region: &TiltRegion) -> Result<C64> {
    let Some(ops) = gamma.operators(potential) else {
        return Ok(C64::new(0.0, 0.0));
    };
    let k = gamma.len();
    Ok((-beta).powi(k as i32) / factorial(k) * omega_t(&ops, x, t, region)?)
}

/// ρ^{t,β}(γ) = ((−β)^k/k!)·ω^t(Φ(A₁)⋯Φ(A_k)).
pub fn rho(gamma: &Polymer, potential: &Potential, x: &Operator, t: C64, beta: C64) -> Result<C64> {
    weight(gamma, potential, x, t, beta, &TiltRegion::All)
}

/// ρ with the tilt applied only on the sites of Λ.
pub fn rho_tilde(
    gamma: &Polymer,
    potential: &Potential,
    x: &Operator,
    t: C64,
    beta: C64,
    lambda: &LatticeBox,
) -> Result<C64> {
    weight(gamma, potential, x, t, beta, &TiltRegion::Sites(lambda.sites().to_vec()))
}

/// Ursell coefficient of a polymer tuple (incompatible iff supports meet).
pub fn ursell(polymers: &[Polymer], caps: &Caps) -> Result<i64> {
    if polymers.is_empty() {
        return Err(Error::Domain("empty cluster".into()));
    }
    if polymers.len() > caps.max_ursell {
        return Err(Error::CapExceeded(format!(
            "{} polymers exceeds the Ursell cap {}",
            polymers.len(),
            caps.max_ursell
        )));
    }
    let supports: Vec<Vec<Site>> = polymers.iter().map(|p| p.support()).collect();
    let adj = adjacency(polymers.len(), |i, j| supports[i].iter().any(|s| supports[j].contains(s)));
    Ok(ursell_from_adjacency(&adj))
}

/// A cluster as a multiset of polymers (sorted, with repetition).
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterTerm {
    pub polymers: Vec<Polymer>,
    pub ursell: i64,
    pub support: Vec<Site>,
}

impl ClusterTerm {
    pub fn degree(&self) -> usize {
        self.polymers.iter().map(|p| p.len()).sum()
    }

    /// a_T / Π m! for the multiplicities m of repeated polymers.
    pub fn coefficient(&self) -> f64 {
        let mut denom = 1.0;
        let mut run = 1;
        for w in self.polymers.windows(2) {
            if w[0] == w[1] {
                run += 1;
                denom *= run as f64;
            } else {
                run = 1;
            }
        }
        self.ursell as f64 / denom
    }

    /// coefficient · Π ρ(γ_i) under the given tilt region.
    pub fn weight(&self, potential: &Potential, x: &Operator, t: C64, beta: C64, region: &TiltRegion) -> Result<C64> {
        let mut w = C64::new(self.coefficient(), 0.0);
        for p in &self.polymers {
            w *= weight(p, potential, x, t, beta, region)?;
        }
        Ok(w)
    }
}

/// All clusters of total β-degree ≤ K whose support contains `anchor`,
/// built from the polymer shapes of a single-potential engine.
pub fn enumerate_clusters(engine: &ClusterExpansion, anchor: Site) -> Result<Vec<ClusterTerm>> {
    let order = engine.order();
    if engine.basis().nvars() != 1 {
        return Err(Error::Domain("explicit clusters need a single-potential expansion".into()));
    }
    let caps = *engine.caps();
    let canonical: Vec<Polymer> = engine
        .sequence_polymers()
        .into_iter()
        .map(|(sets, _)| Polymer { sets })
        .collect();
    // every polymer of a cluster containing the anchor lies within this radius
    let radius = engine
        .window_sites()
        .iter()
        .flat_map(|s| s.iter().map(|c| c.abs()))
        .max()
        .unwrap_or(0);
    let inside = |s: &Site| (0..3).all(|k| (s[k] - anchor[k]).abs() <= radius);
    let mut pool: Vec<Polymer> = Vec::new();
    for p in &canonical {
        for o in engine.window_sites().iter().flat_map(|w| {
            let neg = [-w[0], -w[1], -w[2]];
            [translate(w, &anchor), translate(&neg, &anchor)]
        }) {
            let q = p.translated(&o);
            if q.support().iter().all(inside) {
                pool.push(q);
            }
        }
    }
    pool.sort();
    pool.dedup();
    let supports: Vec<Vec<Site>> = pool.iter().map(|p| p.support()).collect();
    let meets = |i: usize, j: usize| supports[i].iter().any(|s| supports[j].contains(s));

    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut level: Vec<Vec<usize>> = (0..pool.len())
        .filter(|&i| pool[i].len() <= order && supports[i].contains(&anchor))
        .map(|i| vec![i])
        .collect();
    let mut seen: HashSet<Vec<usize>> = level.iter().cloned().collect();
    while !level.is_empty() {
        out.extend(level.iter().cloned());
        if out.len() > caps.max_clusters {
            return Err(Error::CapExceeded(format!("more than {} clusters", caps.max_clusters)));
        }
        let mut next = Vec::new();
        for m in &level {
            let deg: usize = m.iter().map(|&i| pool[i].len()).sum();
            for c in 0..pool.len() {
                if deg + pool[c].len() > order || !m.iter().any(|&i| meets(i, c)) {
                    continue;
                }
                if m.len() >= caps.max_ursell {
                    return Err(Error::CapExceeded(format!(
                        "cluster with more than {} polymers",
                        caps.max_ursell
                    )));
                }
                let mut grown = m.clone();
                grown.insert(grown.partition_point(|&x| x <= c), c);
                if seen.insert(grown.clone()) {
                    next.push(grown);
                }
            }
        }
        next.sort();
        level = next;
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out.into_iter()
        .map(|m| {
            let polymers: Vec<Polymer> = m.iter().map(|&i| pool[i].clone()).collect();
            let support = polymers
                .iter()
                .flat_map(|p| p.support())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            Ok(ClusterTerm {
                ursell: ursell(&polymers, &caps)?,
                polymers,
                support,
            })
        })
        .collect()
}

/// a − Σ_{B∋0} (e^{2a}/(2 − e^{|y|‖X‖}))^{|B|}(e^{|β|‖Φ(B)‖} − 1): the
/// weight-bound margin on the strip |Im t| ≤ |y|.
pub fn complex_margin(potential: &Potential, a: f64, y: f64, beta: f64, x_norm: f64) -> Result<f64> {
    potential.kp_condition_analytic(a, y.abs(), beta.abs(), x_norm)
}

/// |Tr e^{tX}| / Tr e^{Re(t) X}; at least 2 − e^{|Im t|‖X‖}.
pub fn strip_ratio(x: &Operator, t: C64) -> Result<f64> {
    let e = herm_eig(x)?;
    let shift = e.eigenvalues.iter().map(|&v| v * t.re).fold(f64::NEG_INFINITY, f64::max);
    let num: C64 = e.eigenvalues.iter().map(|&v| (t * v - shift).exp()).sum();
    let den: f64 = e.eigenvalues.iter().map(|&v| (v * t.re - shift).exp()).sum();
    Ok(num.norm() / den)
}
