//! Truncated multivariate polynomials in the coupling constants.

use std::collections::HashMap;

use crate::opalg::C64;

const NONE: u32 = u32::MAX;

/// Monomials z^e with total degree ≤ `order` and e_b ≤ caps[b], ordered by
/// total degree and then lexicographically. Index 0 is the constant.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    order: usize,
    caps: Vec<usize>,
    exps: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    table: Vec<u32>,
}

impl MonomialBasis {
    pub fn new(order: usize, caps: &[usize]) -> Self {
        let nvars = caps.len();
        let mut exps: Vec<Vec<u8>> = Vec::new();
        let mut cur = vec![0u8; nvars];
        fn rec(b: usize, left: usize, caps: &[usize], cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
            if b == caps.len() {
                out.push(cur.clone());
                return;
            }
            for e in 0..=left.min(caps[b]) {
                cur[b] = e as u8;
                rec(b + 1, left - e, caps, cur, out);
            }
            cur[b] = 0;
        }
        rec(0, order, caps, &mut cur, &mut exps);
        exps.sort_by(|a, b| {
            let da: usize = a.iter().map(|&e| e as usize).sum();
            let db: usize = b.iter().map(|&e| e as usize).sum();
            da.cmp(&db).then_with(|| b.cmp(a))
        });
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let m = exps.len();
        let mut table = vec![NONE; m * m];
        for i in 0..m {
            for j in 0..m {
                let sum: Vec<u8> = exps[i].iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                if let Some(&k) = index.get(&sum) {
                    table[i * m + j] = k as u32;
                }
            }
        }
        MonomialBasis {
            order,
            caps: caps.to_vec(),
            exps,
            index,
            table,
        }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nvars(&self) -> usize {
        self.caps.len()
    }

    pub fn caps(&self) -> &[usize] {
        &self.caps
    }

    pub fn exponents(&self, i: usize) -> &[u8] {
        &self.exps[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.exps[i].iter().map(|&e| e as usize).sum()
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    pub fn one(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.len()];
        v[0] = C64::new(1.0, 0.0);
        v
    }

    pub fn zero(&self) -> Vec<C64> {
        vec![C64::new(0.0, 0.0); self.len()]
    }

    /// Truncated product.
    pub fn mul(&self, a: &[C64], b: &[C64]) -> Vec<C64> {
        let m = self.len();
        let mut out = self.zero();
        for (i, &ai) in a.iter().enumerate() {
            if ai == C64::new(0.0, 0.0) {
                continue;
            }
            let row = &self.table[i * m..(i + 1) * m];
            for (j, &bj) in b.iter().enumerate() {
                let k = row[j];
                if k != NONE {
                    out[k as usize] += ai * bj;
                }
            }
        }
        out
    }

    /// Value at z split by total degree: entry n is Σ_{|e| = n} c_e z^e.
    pub fn degree_parts(&self, coeffs: &[C64], z: &[C64]) -> Vec<C64> {
        let mut parts = vec![C64::new(0.0, 0.0); self.order + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            let mut term = c;
            for (b, &e) in self.exps[i].iter().enumerate() {
                term *= z[b].powu(e as u32);
            }
            parts[self.degree(i)] += term;
        }
        parts
    }

    pub fn eval(&self, coeffs: &[C64], z: &[C64]) -> C64 {
        self.degree_parts(coeffs, z).iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn univariate_layout() {
        let b = MonomialBasis::new(4, &[4]);
        assert_eq!(b.len(), 5);
        for i in 0..5 {
            assert_eq!(b.degree(i), i);
        }
    }

    #[test]
    fn caps_restrict_monomials() {
        let b = MonomialBasis::new(3, &[1, 3]);
        // (0,0) (1,0) (0,1) (1,1) (0,2) (1,2) (0,3)
        assert_eq!(b.len(), 7);
        assert!(b.index_of(&[2, 0]).is_none());
    }

    #[test]
    fn truncated_product_matches_direct_expansion() {
        let b = MonomialBasis::new(3, &[3, 3]);
        let mut p = b.zero();
        let mut q = b.zero();
        p[b.index_of(&[0, 0]).unwrap()] = C64::new(1.0, 0.0);
        p[b.index_of(&[1, 0]).unwrap()] = C64::new(2.0, 0.0);
        q[b.index_of(&[0, 1]).unwrap()] = C64::new(3.0, 0.0);
        q[b.index_of(&[1, 1]).unwrap()] = C64::new(-1.0, 0.5);
        let r = b.mul(&p, &q);
        let z = [C64::new(0.3, 0.1), C64::new(-0.2, 0.4)];
        // full product has degree ≤ 3 here, so truncation is exact
        let direct = b.eval(&p, &z) * b.eval(&q, &z);
        assert!((b.eval(&r, &z) - direct).norm() < 1e-14);
    }
}
