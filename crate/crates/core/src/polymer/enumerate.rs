//! Enumeration of polymers and clusters whose support has the origin as its
//! lexicographic minimum.
//!
//! An element is one translated interaction term (block, term, offset). A
//! polymer is an ordered, overlap-connected sequence of elements with
//! non-decreasing block labels. Polymers are grouped by support into
//! species; the ordered operator products are kept as diagonals in the
//! product eigenbasis of the observable, so any product reference state
//! diagonal in that basis is a cheap contraction.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{translate, Site, ORIGIN};
use crate::opalg::{TensorLayout, C64};
use crate::Caps;

use super::poly::MonomialBasis;

const WORDS: usize = 8;
/// Largest number of window sites representable in [`Bits`].
pub(crate) const MAX_WINDOW: usize = WORDS * 64;

/// Fixed-width site bitset over window indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub(crate) struct Bits([u64; WORDS]);

impl Bits {
    pub fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    pub fn intersects(&self, o: &Bits) -> bool {
        self.0.iter().zip(&o.0).any(|(a, b)| a & b != 0)
    }

    pub fn union(&self, o: &Bits) -> Bits {
        let mut r = *self;
        for (a, b) in r.0.iter_mut().zip(&o.0) {
            *a |= b;
        }
        r
    }

    #[cfg(test)]
    pub fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(k, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let i = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(k * 64 + i)
                }
            })
        })
    }
}

/// Sites ≥lex origin within ℓ∞ radius, sorted, origin first.
#[derive(Clone, Debug)]
pub(crate) struct Window {
    pub sites: Vec<Site>,
    index: HashMap<Site, usize>,
}

impl Window {
    pub fn new(lattice_dim: usize, radius: i32) -> Result<Self> {
        let r = |a: usize| if a < lattice_dim { radius } else { 0 };
        let mut sites = Vec::new();
        for x in -r(0)..=r(0) {
            for y in -r(1)..=r(1) {
                for z in -r(2)..=r(2) {
                    let s = [x, y, z];
                    if s >= ORIGIN {
                        sites.push(s);
                    }
                }
            }
        }
        if sites.len() > MAX_WINDOW {
            return Err(Error::CapExceeded(format!(
                "cluster window of {} sites exceeds {}",
                sites.len(),
                MAX_WINDOW
            )));
        }
        let index = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Ok(Window { sites, index })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn bits_of(&self, sites: &[Site]) -> Option<Bits> {
        let mut b = Bits::default();
        for s in sites {
            b.set(*self.index.get(s)?);
        }
        Some(b)
    }

    pub fn sites_of(&self, bits: &Bits) -> Vec<Site> {
        bits.ones().map(|i| self.sites[i]).collect()
    }
}

/// Interaction term rotated into the observable eigenbasis.
#[derive(Clone, Debug)]
pub(crate) struct BlockTerm {
    pub block: usize,
    pub shape: Vec<Site>,
    /// Row-major local matrix.
    pub op: Vec<C64>,
    pub local_dim: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Element {
    pub block: usize,
    pub term: usize,
    pub sites: Vec<Site>,
    pub bits: Bits,
}

pub(crate) fn elements(terms: &[BlockTerm], window: &Window, block_caps: &[usize]) -> Vec<Element> {
    let mut out = Vec::new();
    for (j, t) in terms.iter().enumerate() {
        if block_caps[t.block] == 0 || t.op.iter().all(|z| z.norm() == 0.0) {
            continue;
        }
        for o in &window.sites {
            let sites: Vec<Site> = t.shape.iter().map(|s| translate(s, o)).collect();
            if let Some(bits) = window.bits_of(&sites) {
                out.push(Element {
                    block: t.block,
                    term: j,
                    sites,
                    bits,
                });
            }
        }
    }
    out.sort_by(|a, b| (a.block, a.term, a.sites[0]).cmp(&(b.block, b.term, b.sites[0])));
    out
}

fn by_site(bits: &[Bits], n_sites: usize) -> Vec<Vec<u32>> {
    let mut idx = vec![Vec::new(); n_sites];
    for (k, b) in bits.iter().enumerate() {
        for i in b.ones() {
            idx[i].push(k as u32);
        }
    }
    idx
}

/// Overlap-connected sets of distinct elements whose union contains the origin.
pub(crate) fn element_sets(
    elems: &[Element],
    n_sites: usize,
    order: usize,
    block_caps: &[usize],
    caps: &Caps,
) -> Result<Vec<Vec<u32>>> {
    let bits: Vec<Bits> = elems.iter().map(|e| e.bits).collect();
    let idx = by_site(&bits, n_sites);
    let mut level: Vec<Vec<u32>> = idx[0].iter().map(|&e| vec![e]).collect();
    let mut all = level.clone();
    for _ in 1..order {
        let mut next: HashSet<Vec<u32>> = HashSet::new();
        for set in &level {
            let union = set.iter().fold(Bits::default(), |u, &e| u.union(&bits[e as usize]));
            let mut counts = vec![0usize; block_caps.len()];
            for &e in set {
                counts[elems[e as usize].block] += 1;
            }
            let mut cand: Vec<u32> = union.ones().flat_map(|i| idx[i].iter().copied()).collect();
            cand.sort_unstable();
            cand.dedup();
            for c in cand {
                if set.binary_search(&c).is_ok() {
                    continue;
                }
                let b = elems[c as usize].block;
                if counts[b] + 1 > block_caps[b] {
                    continue;
                }
                let mut s = set.clone();
                let pos = s.binary_search(&c).unwrap_err();
                s.insert(pos, c);
                next.insert(s);
            }
        }
        let mut next: Vec<Vec<u32>> = next.into_iter().collect();
        next.sort();
        if next.is_empty() {
            break;
        }
        all.extend(next.iter().cloned());
        if all.len() > caps.max_clusters {
            return Err(Error::CapExceeded(format!(
                "more than {} polymer supports",
                caps.max_clusters
            )));
        }
        level = next;
    }
    all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(all)
}

/// One ordered polymer with its diagonal (already multiplied by Π 1/k_b!).
#[derive(Clone, Debug)]
pub(crate) struct SequenceRecord {
    pub elements: Vec<u32>,
    pub monomial: usize,
    pub diag: Vec<C64>,
}

/// All polymers over one element set.
pub(crate) struct SetPolymers {
    pub support: Vec<Site>,
    pub bits: Bits,
    pub size: usize,
    /// Σ over sequences, per monomial.
    pub aggregated: Vec<(usize, Vec<C64>)>,
    pub sequences: Vec<SequenceRecord>,
}

struct Placed<'a> {
    block: usize,
    op: &'a [C64],
    m: usize,
    offsets: Vec<usize>,
    row: Vec<usize>,
    base: Vec<usize>,
}

struct SeqCtx<'a> {
    dim: usize,
    placed: Vec<Placed<'a>>,
    set: &'a [u32],
    order: usize,
    block_caps: &'a [usize],
    basis: &'a MonomialBasis,
    keep: bool,
}

impl SeqCtx<'_> {
    fn right_mul(&self, m: &[C64], e: &Placed) -> Vec<C64> {
        let d = self.dim;
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        for j in 0..d {
            let r = e.row[j];
            let base = e.base[j];
            for (c, &off) in e.offsets.iter().enumerate() {
                let v = e.op[c * e.m + r];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                let col = base + off;
                for i in 0..d {
                    out[i * d + j] += m[i * d + col] * v;
                }
            }
        }
        out
    }

    fn diag_mul(&self, m: &[C64], e: &Placed) -> Vec<C64> {
        let d = self.dim;
        (0..d)
            .map(|j| {
                let r = e.row[j];
                e.offsets
                    .iter()
                    .enumerate()
                    .map(|(c, &off)| m[j * d + e.base[j] + off] * e.op[c * e.m + r])
                    .sum()
            })
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        m: &[C64],
        seq: &mut Vec<usize>,
        counts: &mut [usize],
        block_counts: &mut [usize],
        uncovered: usize,
        out: &mut HashMap<usize, Vec<C64>>,
        records: &mut Vec<SequenceRecord>,
    ) {
        let len = seq.len();
        if len == self.order {
            return;
        }
        let last_block = seq.last().map_or(0, |&k| self.placed[k].block);
        for k in 0..self.placed.len() {
            let b = self.placed[k].block;
            if b < last_block || block_counts[b] + 1 > self.block_caps[b] {
                continue;
            }
            let left = uncovered - (counts[k] == 0) as usize;
            if left > self.order - len - 1 {
                continue;
            }
            // uncovered elements of an earlier block can never be placed later
            if (0..self.placed.len()).any(|q| q != k && counts[q] == 0 && self.placed[q].block < b) {
                continue;
            }
            counts[k] += 1;
            block_counts[b] += 1;
            seq.push(k);
            let extend = len + 1 < self.order;
            let next = if extend {
                Some(self.right_mul(m, &self.placed[k]))
            } else {
                None
            };
            if left == 0 {
                let diag = match &next {
                    Some(p) => (0..self.dim).map(|i| p[i * self.dim + i]).collect(),
                    None => self.diag_mul(m, &self.placed[k]),
                };
                self.record(diag, seq, block_counts, out, records);
            }
            if let Some(p) = next {
                self.dfs(&p, seq, counts, block_counts, left, out, records);
            }
            seq.pop();
            block_counts[b] -= 1;
            counts[k] -= 1;
        }
    }

    fn record(
        &self,
        mut diag: Vec<C64>,
        seq: &[usize],
        block_counts: &[usize],
        out: &mut HashMap<usize, Vec<C64>>,
        records: &mut Vec<SequenceRecord>,
    ) {
        let exps: Vec<u8> = block_counts.iter().map(|&c| c as u8).collect();
        let monomial = self.basis.index_of(&exps).expect("degree within caps");
        let fact: f64 = block_counts
            .iter()
            .map(|&c| (1..=c).map(|x| x as f64).product::<f64>())
            .product();
        for v in diag.iter_mut() {
            *v /= fact;
        }
        let acc = out
            .entry(monomial)
            .or_insert_with(|| vec![C64::new(0.0, 0.0); self.dim]);
        for (a, v) in acc.iter_mut().zip(&diag) {
            *a += v;
        }
        if self.keep {
            records.push(SequenceRecord {
                elements: seq.iter().map(|&k| self.set[k]).collect(),
                monomial,
                diag,
            });
        }
    }
}

/// Enumerates every block-sorted sequence covering `set` and returns the
/// diagonals of the ordered products on the union support.
#[allow(clippy::too_many_arguments)]
pub(crate) fn set_polymers(
    set: &[u32],
    elems: &[Element],
    terms: &[BlockTerm],
    site_dim: usize,
    order: usize,
    block_caps: &[usize],
    basis: &MonomialBasis,
    keep: bool,
) -> SetPolymers {
    let bits = set.iter().fold(Bits::default(), |u, &e| u.union(&elems[e as usize].bits));
    let mut support: Vec<Site> = set.iter().flat_map(|&e| elems[e as usize].sites.clone()).collect();
    support.sort();
    support.dedup();
    let r = support.len();
    let dim = site_dim.pow(r as u32);
    let placed: Vec<Placed> = set
        .iter()
        .map(|&e| {
            let el = &elems[e as usize];
            let t = &terms[el.term];
            let positions: Vec<usize> = el.sites.iter().map(|s| support.binary_search(s).unwrap()).collect();
            let layout = TensorLayout::new(&positions, r, site_dim);
            let row: Vec<usize> = (0..dim).map(|j| layout.local_index(j)).collect();
            let base: Vec<usize> = (0..dim).map(|j| j - layout.offsets[row[j]]).collect();
            Placed {
                block: el.block,
                op: &t.op,
                m: t.local_dim,
                offsets: layout.offsets.clone(),
                row,
                base,
            }
        })
        .collect();
    let ctx = SeqCtx {
        dim,
        placed,
        set,
        order,
        block_caps,
        basis,
        keep,
    };
    let mut identity = vec![C64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        identity[i * dim + i] = C64::new(1.0, 0.0);
    }
    let mut out = HashMap::new();
    let mut records = Vec::new();
    let mut counts = vec![0; set.len()];
    let mut block_counts = vec![0; block_caps.len()];
    ctx.dfs(
        &identity,
        &mut Vec::new(),
        &mut counts,
        &mut block_counts,
        set.len(),
        &mut out,
        &mut records,
    );
    let mut aggregated: Vec<(usize, Vec<C64>)> = out.into_iter().collect();
    aggregated.sort_by_key(|p| p.0);
    SetPolymers {
        support,
        bits,
        size: set.len(),
        aggregated,
        sequences: records,
    }
}

/// Runs [`set_polymers`] over all sets in parallel, preserving set order.
#[allow(clippy::too_many_arguments)]
pub(crate) fn all_polymers(
    sets: &[Vec<u32>],
    elems: &[Element],
    terms: &[BlockTerm],
    site_dim: usize,
    order: usize,
    block_caps: &[usize],
    basis: &MonomialBasis,
    keep: bool,
) -> Vec<SetPolymers> {
    sets.par_iter()
        .map(|s| set_polymers(s, elems, terms, site_dim, order, block_caps, basis, keep))
        .collect()
}

/// Connected multisets of pool entries whose union contains the origin
/// (window index 0) and whose total minimal degree is at most `order`.
/// Members are returned as sorted pool indices.
pub(crate) fn grow_clusters(
    pool_bits: &[Bits],
    pool_degree: &[usize],
    n_sites: usize,
    order: usize,
    caps: &Caps,
) -> Result<Vec<Vec<u32>>> {
    let idx = by_site(pool_bits, n_sites);
    let mut level: Vec<(Vec<u32>, Bits, usize)> = idx[0]
        .iter()
        .filter(|&&p| pool_degree[p as usize] <= order)
        .map(|&p| (vec![p], pool_bits[p as usize], pool_degree[p as usize]))
        .collect();
    let mut all: Vec<Vec<u32>> = level.iter().map(|l| l.0.clone()).collect();
    let mut n = 1;
    while !level.is_empty() {
        let mut next: HashMap<Vec<u32>, (Bits, usize)> = HashMap::new();
        for (members, union, deg) in &level {
            let mut cand: Vec<u32> = union.ones().flat_map(|i| idx[i].iter().copied()).collect();
            cand.sort_unstable();
            cand.dedup();
            for c in cand {
                let d = deg + pool_degree[c as usize];
                if d > order {
                    continue;
                }
                if n >= caps.max_ursell {
                    return Err(Error::CapExceeded(format!(
                        "cluster with more than {} polymers",
                        caps.max_ursell
                    )));
                }
                let mut m = members.clone();
                let pos = m.partition_point(|&x| x <= c);
                m.insert(pos, c);
                next.entry(m).or_insert((union.union(&pool_bits[c as usize]), d));
            }
        }
        let mut next: Vec<(Vec<u32>, Bits, usize)> = next.into_iter().map(|(k, (b, d))| (k, b, d)).collect();
        next.sort_by(|a, b| a.0.cmp(&b.0));
        all.extend(next.iter().map(|l| l.0.clone()));
        if all.len() > caps.max_clusters {
            return Err(Error::CapExceeded(format!("more than {} clusters", caps.max_clusters)));
        }
        level = next;
        n += 1;
    }
    Ok(all)
}

/// Contracts a diagonal over ⊗ sites with per-site weight vectors
/// (first site most significant).
pub(crate) fn contract(diag: &[C64], probs: &[&[C64]], d: usize) -> C64 {
    let mut cur: Vec<C64> = diag.to_vec();
    for p in probs.iter().rev() {
        cur = cur
            .chunks(d)
            .map(|chunk| chunk.iter().zip(p.iter()).map(|(a, b)| a * b).sum())
            .collect();
    }
    debug_assert_eq!(cur.len(), 1);
    cur[0]
}
