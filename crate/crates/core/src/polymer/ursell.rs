//! Ursell coefficients of polymer clusters.
//!
//! φ^T(G) = Σ over connected spanning subgraphs of G of (−1)^{#edges}. With
//! f(S) = [S independent in G] (the alternating sum over all spanning
//! subgraphs of G[S]), the connected part follows from
//! c(S) = f(S) − Σ_{T ⊊ S, min S ∈ T} c(T) f(S∖T).

use std::collections::HashMap;

/// φ^T of the graph with adjacency bitmasks `adj` (no self loops). Exact for
/// up to 16 vertices.
pub fn ursell_from_adjacency(adj: &[u32]) -> i64 {
    let n = adj.len();
    assert!(n >= 1 && n <= 16, "ursell: {} vertices", n);
    let full = (1u32 << n) - 1;
    let independent = |s: u32| -> bool {
        let mut rest = s;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            if adj[i] & s != 0 {
                return false;
            }
            rest &= rest - 1;
        }
        true
    };
    let mut c = vec![0i64; 1 << n];
    for s in 1..=full {
        let low = s & s.wrapping_neg();
        let f_s = independent(s) as i64;
        let mut acc = f_s;
        // proper subsets T of S containing the lowest element
        let rest = s & !low;
        let mut sub = rest;
        loop {
            let t = sub | low;
            if t != s && independent(s & !t) {
                acc -= c[t as usize];
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        c[s as usize] = acc;
    }
    c[full as usize]
}

/// Memoized φ^T keyed by adjacency.
#[derive(Default, Debug)]
pub struct UrsellCache {
    map: HashMap<Vec<u32>, i64>,
}

impl UrsellCache {
    pub fn get(&mut self, adj: &[u32]) -> i64 {
        if let Some(&v) = self.map.get(adj) {
            return v;
        }
        let v = ursell_from_adjacency(adj);
        self.map.insert(adj.to_vec(), v);
        v
    }
}

/// Adjacency masks from a pairwise incompatibility predicate.
pub fn adjacency<F: FnMut(usize, usize) -> bool>(n: usize, mut incompatible: F) -> Vec<u32> {
    let mut adj = vec![0u32; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if incompatible(i, j) {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
    }
    adj
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over edge subsets.
    fn brute(adj: &[u32]) -> i64 {
        let n = adj.len();
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).filter(move |&j| adj[i] >> j & 1 == 1).map(move |j| (i, j)))
            .collect();
        let mut total = 0i64;
        for mask in 0u64..(1u64 << edges.len()) {
            let mut parent: Vec<usize> = (0..n).collect();
            fn find(p: &mut Vec<usize>, x: usize) -> usize {
                if p[x] != x {
                    let r = find(p, p[x]);
                    p[x] = r;
                }
                p[x]
            }
            let mut count = 0;
            for (k, &(i, j)) in edges.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    count += 1;
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
            let root = find(&mut parent, 0);
            if (0..n).all(|v| find(&mut parent, v) == root) {
                total += if count % 2 == 0 { 1 } else { -1 };
            }
        }
        total
    }

    #[test]
    fn small_cases() {
        assert_eq!(ursell_from_adjacency(&[0]), 1);
        assert_eq!(ursell_from_adjacency(&adjacency(2, |_, _| true)), -1);
        assert_eq!(ursell_from_adjacency(&adjacency(2, |_, _| false)), 0);
        // complete graph: (−1)^{n−1}(n−1)!
        assert_eq!(ursell_from_adjacency(&adjacency(4, |_, _| true)), -6);
        assert_eq!(ursell_from_adjacency(&adjacency(5, |_, _| true)), 24);
        // path on three vertices: single spanning tree
        assert_eq!(ursell_from_adjacency(&adjacency(3, |i, j| j == i + 1)), 1);
    }

    #[test]
    fn log_series_coefficients() {
        // one-polymer gas: log(1 + ρ) = Σ (−1)^{n−1} ρ^n / n; the n-fold
        // repetition has φ^T(K_n)/n! = (−1)^{n−1}/n
        for n in 1..=6usize {
            let v = ursell_from_adjacency(&adjacency(n, |_, _| true)) as f64;
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            let expected = if n % 2 == 1 { 1.0 } else { -1.0 } / n as f64;
            assert!((v / fact - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_brute_force_on_random_graphs() {
        let mut state = 12345u64;
        for _ in 0..200 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let n = 1 + (state >> 60) as usize % 6;
            let bits = state >> 8;
            let mut k = 0;
            let adj = adjacency(n, |_, _| {
                k += 1;
                bits >> (k % 50) & 1 == 1
            });
            assert_eq!(ursell_from_adjacency(&adj), brute(&adj));
        }
    }
}
