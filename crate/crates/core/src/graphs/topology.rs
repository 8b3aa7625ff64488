//! Combinatorial hypergraph quantities: degrees, edge sharing, boundaries,
//! the modified Cheeger constant and the rapid-expansion constant.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::model::Edge;

pub const DEFAULT_CHEEGER_CAP: usize = 20;
pub const DEFAULT_GAMMA_RE_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub degrees: Vec<usize>,
    pub min: usize,
    pub max: usize,
}

fn check_items(edges: &[Edge], n: usize) -> Result<()> {
    for e in edges {
        if let Some(&k) = e.items().iter().find(|&&k| k >= n) {
            return Err(Error::InvalidEdge(format!("item {k} out of range for n = {n}")));
        }
    }
    Ok(())
}

pub fn degree_stats(edges: &[Edge], n: usize) -> Result<DegreeStats> {
    check_items(edges, n)?;
    let mut degrees = vec![0; n];
    for e in edges {
        for &k in e.items() {
            degrees[k] += 1;
        }
    }
    let min = degrees.iter().copied().min().unwrap_or(0);
    let max = degrees.iter().copied().max().unwrap_or(0);
    Ok(DegreeStats { degrees, min, max })
}

/// `N_jk` for every pair `j < k` sharing at least one edge.
pub fn shared_edges(edges: &[Edge], n: usize) -> Result<BTreeMap<(usize, usize), usize>> {
    check_items(edges, n)?;
    let mut out = BTreeMap::new();
    for e in edges {
        let it = e.items();
        for a in 0..it.len() {
            for b in (a + 1)..it.len() {
                *out.entry((it[a], it[b])).or_insert(0) += 1;
            }
        }
    }
    Ok(out)
}

/// Largest fraction `N_jk / N_j` over ordered pairs with `N_j > 0`.
pub fn r_ratio(edges: &[Edge], n: usize) -> Result<f64> {
    let deg = degree_stats(edges, n)?.degrees;
    let shared = shared_edges(edges, n)?;
    let mut r: f64 = 0.0;
    for (&(j, k), &c) in &shared {
        r = r.max(c as f64 / deg[j] as f64).max(c as f64 / deg[k] as f64);
    }
    Ok(r)
}

/// Edges meeting both `subset` and its complement.
pub fn boundary_edges(edges: &[Edge], subset: &[usize]) -> Vec<Edge> {
    let mut inside: Vec<usize> = subset.to_vec();
    inside.sort_unstable();
    inside.dedup();
    edges
        .iter()
        .filter(|e| {
            let hits = e.items().iter().filter(|k| inside.binary_search(k).is_ok()).count();
            hits > 0 && hits < e.len()
        })
        .cloned()
        .collect()
}

/// Whether every item is reachable from item 0 through shared edges.
pub fn is_connected(edges: &[Edge], n: usize) -> bool {
    if n <= 1 {
        return true;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut components = n;
    for e in edges {
        let it = e.items();
        let r0 = find(&mut parent, it[0]);
        for &k in &it[1..] {
            let rk = find(&mut parent, k);
            if rk != r0 {
                let r0 = find(&mut parent, it[0]);
                parent[rk] = r0;
                components -= 1;
            }
        }
    }
    components == 1
}

/// Distinct edges as bitmasks with multiplicities.
fn edge_masks(edges: &[Edge], n: usize, cap: usize) -> Result<Vec<(u64, usize)>> {
    if n > cap || n > 63 {
        return Err(Error::SizeCap { n, cap: cap.min(63) });
    }
    check_items(edges, n)?;
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for e in edges {
        let mask = e.items().iter().fold(0u64, |m, &k| m | (1 << k));
        *counts.entry(mask).or_insert(0) += 1;
    }
    let mut v: Vec<_> = counts.into_iter().collect();
    v.sort_unstable();
    Ok(v)
}

fn boundary_count(masks: &[(u64, usize)], set: u64) -> usize {
    masks.iter().filter(|(e, _)| e & set != 0 && e & !set != 0).map(|(_, c)| c).sum()
}

fn cheeger_ratio(masks: &[(u64, usize)], set: u64, n: usize) -> f64 {
    let size = set.count_ones() as usize;
    boundary_count(masks, set) as f64 / size.min(n - size) as f64
}

/// Modified Cheeger constant by scanning every vertex subset.
pub fn modified_cheeger(edges: &[Edge], n: usize, cap: usize) -> Result<f64> {
    let masks = edge_masks(edges, n, cap)?;
    if n < 2 {
        return Err(Error::Config("the Cheeger constant needs at least two items".into()));
    }
    let full = (1u64 << n) - 1;
    // U and its complement give the same ratio; fix item n-1 outside U.
    let mut best = f64::INFINITY;
    for set in 1..(1u64 << (n - 1)) {
        debug_assert!(set != full);
        best = best.min(cheeger_ratio(&masks, set, n));
    }
    Ok(best)
}

fn subset_mask(subset: &[usize], n: usize) -> Result<u64> {
    let mut mask = 0u64;
    for &k in subset {
        if k >= n {
            return Err(Error::InvalidEdge(format!("item {k} out of range for n = {n}")));
        }
        mask |= 1 << k;
    }
    Ok(mask)
}

/// Whether `next` strictly contains `set` and holds at least half of its boundary edges.
fn admissible_step(masks: &[(u64, usize)], set: u64, next: u64) -> bool {
    if next & set != set || next == set {
        return false;
    }
    let mut boundary = 0;
    let mut kept = 0;
    for &(e, c) in masks {
        if e & set != 0 && e & !set != 0 {
            boundary += c;
            if e & !next == 0 {
                kept += c;
            }
        }
    }
    2 * kept >= boundary
}

/// Sum of `sqrt(log n / h(A_j))` over all but the last set of an admissible chain.
pub fn re_chain_sum(edges: &[Edge], n: usize, chain: &[Vec<usize>]) -> Result<Option<f64>> {
    let masks = edge_masks(edges, n, 63)?;
    let sets = chain.iter().map(|s| subset_mask(s, n)).collect::<Result<Vec<_>>>()?;
    if sets.contains(&0) {
        return Ok(None);
    }
    let mut total = 0.0;
    for w in sets.windows(2) {
        if !admissible_step(&masks, w[0], w[1]) {
            return Ok(None);
        }
        let h = cheeger_ratio(&masks, w[0], n);
        if h == 0.0 {
            return Err(Error::Disconnected);
        }
        total += ((n as f64).ln() / h).sqrt();
    }
    Ok(Some(total))
}

/// Rapid-expansion constant: best admissible chain sum over all chains of
/// nonempty vertex sets, by dynamic programming over subsets.
pub fn gamma_re(edges: &[Edge], n: usize, cap: usize) -> Result<f64> {
    let masks = edge_masks(edges, n, cap)?;
    if n < 2 {
        return Err(Error::Config("the expansion constant needs at least two items".into()));
    }
    if !is_connected(edges, n) {
        return Err(Error::Disconnected);
    }
    let full = (1u64 << n) - 1;
    let log_n = (n as f64).ln();
    let mut order: Vec<u64> = (1..full).collect();
    order.sort_by_key(|s| std::cmp::Reverse(s.count_ones()));
    let mut best = vec![0.0; (full + 1) as usize];
    for &set in &order {
        let weight = (log_n / cheeger_ratio(&masks, set, n)).sqrt();
        let rest = full & !set;
        let mut value: f64 = 0.0;
        let mut sub = rest;
        while sub != 0 {
            let next = set | sub;
            if admissible_step(&masks, set, next) {
                value = value.max(weight + best[next as usize]);
            }
            sub = (sub - 1) & rest;
        }
        best[set as usize] = value;
    }
    Ok(order.iter().map(|&s| best[s as usize]).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(list: &[&[usize]]) -> Vec<Edge> {
        list.iter().map(|e| Edge::new(e.to_vec()).unwrap()).collect()
    }

    #[test]
    fn degree_and_sharing_examples() {
        let e = edges(&[&[0, 1, 2], &[0, 1, 3]]);
        let d = degree_stats(&e, 4).unwrap();
        assert_eq!(d.degrees, vec![2, 2, 1, 1]);
        assert_eq!((d.min, d.max), (1, 2));
        assert_eq!(shared_edges(&e, 4).unwrap()[&(0, 1)], 2);
        assert_eq!(r_ratio(&e, 4).unwrap(), 1.0);
        assert_eq!(r_ratio(&edges(&[&[0, 1], &[2, 3]]), 4).unwrap(), 1.0);
        assert_eq!(r_ratio(&[], 4).unwrap(), 0.0);
    }

    #[test]
    fn simple_pairwise_ratio_is_inverse_min_degree() {
        // star plus a path: simple graph, minimum degree 1
        let e = edges(&[&[0, 1], &[0, 2], &[0, 3], &[2, 3]]);
        let d = degree_stats(&e, 4).unwrap();
        assert_eq!(r_ratio(&e, 4).unwrap(), 1.0 / d.min as f64);
        let k4 = edges(&[&[0, 1], &[0, 2], &[0, 3], &[1, 2], &[1, 3], &[2, 3]]);
        assert!((r_ratio(&k4, 4).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cheeger_examples() {
        assert_eq!(modified_cheeger(&edges(&[&[0, 1, 2]]), 3, 20).unwrap(), 1.0);
        assert_eq!(modified_cheeger(&edges(&[&[0, 1], &[2, 3]]), 4, 20).unwrap(), 0.0);
        let k4 = edges(&[&[0, 1], &[0, 2], &[0, 3], &[1, 2], &[1, 3], &[2, 3]]);
        assert_eq!(modified_cheeger(&k4, 4, 20).unwrap(), 2.0);
        assert!(matches!(modified_cheeger(&k4, 21, 20), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn boundary_of_subset() {
        let e = edges(&[&[0, 1, 2], &[2, 3], &[3, 4]]);
        assert_eq!(boundary_edges(&e, &[0, 1, 2]), edges(&[&[2, 3]]));
        assert_eq!(boundary_edges(&e, &[3]), edges(&[&[2, 3], &[3, 4]]));
    }

    #[test]
    fn gamma_re_single_pair() {
        let g = gamma_re(&edges(&[&[0, 1]]), 2, 10).unwrap();
        assert!((g - 2f64.ln().sqrt()).abs() < 1e-15);
        assert_eq!(re_chain_sum(&edges(&[&[0, 1]]), 2, &[vec![0], vec![0, 1]]).unwrap(), Some(g));
    }

    #[test]
    fn gamma_re_errors() {
        assert!(matches!(gamma_re(&edges(&[&[0, 1], &[2, 3]]), 4, 10), Err(Error::Disconnected)));
        assert!(matches!(gamma_re(&[], 11, 10), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn connectivity() {
        assert!(is_connected(&edges(&[&[0, 1, 2], &[2, 3]]), 4));
        assert!(!is_connected(&edges(&[&[0, 1, 2]]), 4));
    }
}
