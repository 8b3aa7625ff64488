//! Random comparison hypergraphs: the nonuniform random hypergraph model
//! (independent Bernoulli inclusion of every candidate edge of each size) and
//! the hypergraph stochastic block model.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Edge;

/// Upper bound on `sum_m C(n, m)` for modes that enumerate every candidate edge.
pub const CANDIDATE_ENUMERATION_CAP: u128 = 10_000_000;

/// How candidate edges of one size are included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum EdgeRule {
    /// Every candidate included independently with probability `p`.
    Constant { p: f64 },
    /// Candidate `e` gets its own probability `p_e ~ Uniform[p, q]`, then is included with `p_e`.
    Uniform { p: f64, q: f64 },
    /// Exactly `count` distinct edges drawn uniformly.
    FixedCount { count: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSpec {
    pub m: usize,
    #[serde(flatten)]
    pub rule: EdgeRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NurhmConfig {
    pub n: usize,
    pub sizes: Vec<SizeSpec>,
}

impl NurhmConfig {
    pub fn validate(&self) -> Result<()> {
        for s in &self.sizes {
            if s.m < 2 || s.m > self.n {
                return Err(Error::Config(format!("edge size {} outside [2, n = {}]", s.m, self.n)));
            }
            let ok = match s.rule {
                EdgeRule::Constant { p } => (0.0..=1.0).contains(&p),
                EdgeRule::Uniform { p, q } => (0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q) && p <= q,
                EdgeRule::FixedCount { count } => (count as u128) <= binomial(self.n, s.m),
            };
            if !ok {
                return Err(Error::Config(format!("invalid edge rule for size {}: {:?}", s.m, s.rule)));
            }
        }
        Ok(())
    }
}

/// `C(n, k)` saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Calls `f` for every increasing `m`-subset of `items`.
pub(crate) fn for_each_combination(items: &[usize], m: usize, mut f: impl FnMut(&[usize])) {
    let n = items.len();
    if m > n {
        return;
    }
    let mut idx: Vec<usize> = (0..m).collect();
    let mut buf = vec![0; m];
    loop {
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = items[i];
        }
        f(&buf);
        let mut i = m;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - m {
                break;
            }
            if i == 0 && idx[0] == n - m {
                return;
            }
        }
        idx[i] += 1;
        for j in (i + 1)..m {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn uniform_subset<R: Rng + ?Sized>(items: &[usize], m: usize, rng: &mut R) -> Vec<usize> {
    let mut e: Vec<usize> = index::sample(rng, items.len(), m).into_iter().map(|i| items[i]).collect();
    e.sort_unstable();
    e
}

/// `count` distinct edges drawn uniformly among the `m`-subsets of `items`
/// accepted by `keep`; `candidates` is the number of accepted subsets.
fn sample_distinct<R: Rng + ?Sized>(
    items: &[usize],
    m: usize,
    count: usize,
    candidates: u128,
    keep: impl Fn(&[usize]) -> bool,
    rng: &mut R,
) -> Result<Vec<Edge>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if count as u128 > candidates {
        return Err(Error::Config(format!("cannot draw {count} distinct edges from {candidates} candidates")));
    }
    let total = binomial(items.len(), m);
    let enumerate = total <= CANDIDATE_ENUMERATION_CAP && (count as u128) * 2 > candidates;
    if enumerate {
        let mut all = Vec::with_capacity(candidates as usize);
        for_each_combination(items, m, |c| {
            if keep(c) {
                all.push(c.to_vec());
            }
        });
        let picks = index::sample(rng, all.len(), count);
        return Ok(picks.into_iter().map(|i| Edge::from_sorted_unchecked(all[i].clone())).collect());
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let e = uniform_subset(items, m, rng);
        if keep(&e) && seen.insert(e.clone()) {
            out.push(Edge::from_sorted_unchecked(e));
        }
    }
    Ok(out)
}

fn binomial_count<R: Rng + ?Sized>(trials: u128, p: f64, rng: &mut R) -> Result<usize> {
    let trials = u64::try_from(trials).map_err(|_| Error::Config("too many candidate edges".into()))?;
    let dist = Binomial::new(trials, p).map_err(|e| Error::Config(e.to_string()))?;
    Ok(dist.sample(rng) as usize)
}

/// Draws one hypergraph from the nonuniform random hypergraph model.
pub fn sample_nurhm<R: Rng + ?Sized>(config: &NurhmConfig, rng: &mut R) -> Result<Vec<Edge>> {
    config.validate()?;
    let all: Vec<usize> = (0..config.n).collect();
    let mut edges = Vec::new();
    for spec in &config.sizes {
        let candidates = binomial(config.n, spec.m);
        match spec.rule {
            EdgeRule::Constant { p } => {
                let count = binomial_count(candidates, p, rng)?;
                edges.extend(sample_distinct(&all, spec.m, count, candidates, |_| true, rng)?);
            }
            EdgeRule::FixedCount { count } => {
                edges.extend(sample_distinct(&all, spec.m, count, candidates, |_| true, rng)?);
            }
            EdgeRule::Uniform { p, q } => {
                let required: u128 = config.sizes.iter().map(|s| binomial(config.n, s.m)).sum();
                if required > CANDIDATE_ENUMERATION_CAP {
                    return Err(Error::BudgetExceeded { required, cap: CANDIDATE_ENUMERATION_CAP });
                }
                for_each_combination(&all, spec.m, |c| {
                    let pe = if q > p { rng.random_range(p..=q) } else { p };
                    if rng.random::<f64>() < pe {
                        edges.push(Edge::from_sorted_unchecked(c.to_vec()));
                    }
                });
            }
        }
    }
    Ok(edges)
}

/// Per-block edge counts for the fixed-count HSBM mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsbmCounts {
    pub within: Vec<usize>,
    pub cross: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsbmConfig {
    pub n: usize,
    /// Uniform edge size M.
    pub m: usize,
    /// Community sizes; community `i` holds a contiguous block of items.
    pub community_sizes: Vec<usize>,
    /// Inclusion probability for edges inside community `i`.
    pub within: Vec<f64>,
    /// Inclusion probability for edges meeting at least two communities.
    pub cross: f64,
    /// When set, draw exactly these many distinct edges per block instead.
    #[serde(default)]
    pub fixed_counts: Option<HsbmCounts>,
}

impl HsbmConfig {
    pub fn validate(&self) -> Result<()> {
        let k = self.community_sizes.len();
        if k == 0 || self.community_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("community sizes must be positive".into()));
        }
        if self.community_sizes.iter().sum::<usize>() != self.n {
            return Err(Error::Config("community sizes must sum to n".into()));
        }
        if self.m < 2 || self.m > self.n {
            return Err(Error::Config(format!("edge size {} outside [2, n]", self.m)));
        }
        if self.within.len() != k {
            return Err(Error::Config("one within-community probability per community".into()));
        }
        if self.within.iter().chain(std::iter::once(&self.cross)).any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        if let Some(c) = &self.fixed_counts {
            if c.within.len() != k {
                return Err(Error::Config("one within-community count per community".into()));
            }
        }
        Ok(())
    }

    /// Item ranges of each community.
    pub fn communities(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.community_sizes
            .iter()
            .map(|&s| {
                let r = start..start + s;
                start += s;
                r
            })
            .collect()
    }

    /// Community index of every item.
    pub fn membership(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n);
        for (c, &s) in self.community_sizes.iter().enumerate() {
            out.extend(std::iter::repeat_n(c, s));
        }
        out
    }

    /// Number of candidate edges inside each community and across communities.
    pub fn candidate_counts(&self) -> (Vec<u128>, u128) {
        let within: Vec<u128> = self.community_sizes.iter().map(|&s| binomial(s, self.m)).collect();
        let cross = binomial(self.n, self.m) - within.iter().sum::<u128>();
        (within, cross)
    }
}

/// Draws one M-uniform hypergraph from the stochastic block model.
pub fn sample_hsbm<R: Rng + ?Sized>(config: &HsbmConfig, rng: &mut R) -> Result<Vec<Edge>> {
    config.validate()?;
    let (within_cand, cross_cand) = config.candidate_counts();
    let (within_counts, cross_count) = match &config.fixed_counts {
        Some(c) => (c.within.clone(), c.cross),
        None => {
            let w = within_cand
                .iter()
                .zip(&config.within)
                .map(|(&c, &p)| binomial_count(c, p, rng))
                .collect::<Result<Vec<_>>>()?;
            (w, binomial_count(cross_cand, config.cross, rng)?)
        }
    };
    let membership = config.membership();
    let mut edges = Vec::new();
    for ((range, &count), &cand) in config.communities().into_iter().zip(&within_counts).zip(&within_cand) {
        let items: Vec<usize> = range.collect();
        edges.extend(sample_distinct(&items, config.m, count, cand, |_| true, rng)?);
    }
    let all: Vec<usize> = (0..config.n).collect();
    let crossing = |e: &[usize]| e.iter().any(|&k| membership[k] != membership[e[0]]);
    edges.extend(sample_distinct(&all, config.m, cross_count, cross_cand, crossing, rng)?);
    Ok(edges)
}

/// `count` uniformly drawn `m`-subsets of `items`, with replacement.
pub fn sample_uniform_edges<R: Rng + ?Sized>(items: &[usize], m: usize, count: usize, rng: &mut R) -> Result<Vec<Edge>> {
    if m < 2 || m > items.len() {
        return Err(Error::Config(format!("edge size {m} outside [2, {}]", items.len())));
    }
    Ok((0..count).map(|_| Edge::from_sorted_unchecked(uniform_subset(items, m, rng))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(20, 3), 1140);
        assert_eq!(binomial(200, 5), 2_535_650_040);
        assert_eq!(binomial(4, 5), 0);
    }

    #[test]
    fn combinations_are_complete() {
        let mut seen = Vec::new();
        for_each_combination(&[0, 1, 2, 3, 4], 3, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 10);
        assert_eq!(seen[0], vec![0, 1, 2]);
        assert_eq!(seen[9], vec![2, 3, 4]);
        let mut all = Vec::new();
        for_each_combination(&[7, 9], 2, |c| all.push(c.to_vec()));
        assert_eq!(all, vec![vec![7, 9]]);
    }

    #[test]
    fn trivial_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = NurhmConfig { n: 10, sizes: vec![SizeSpec { m: 3, rule: EdgeRule::Constant { p: 0.0 } }] };
        assert!(sample_nurhm(&cfg, &mut rng).unwrap().is_empty());
        let cfg = NurhmConfig { n: 4, sizes: vec![SizeSpec { m: 2, rule: EdgeRule::Constant { p: 1.0 } }] };
        let mut edges = sample_nurhm(&cfg, &mut rng).unwrap();
        edges.sort();
        let expected: Vec<Edge> = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]
            .iter()
            .map(|e| Edge::new(e.to_vec()).unwrap())
            .collect();
        assert_eq!(edges, expected);
    }

    #[test]
    fn fixed_count_is_exact_and_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = NurhmConfig {
            n: 12,
            sizes: vec![
                SizeSpec { m: 3, rule: EdgeRule::FixedCount { count: 200 } },
                SizeSpec { m: 5, rule: EdgeRule::FixedCount { count: 7 } },
            ],
        };
        let edges = sample_nurhm(&cfg, &mut rng).unwrap();
        assert_eq!(edges.iter().filter(|e| e.len() == 3).count(), 200);
        assert_eq!(edges.iter().filter(|e| e.len() == 5).count(), 7);
        let set: HashSet<_> = edges.iter().collect();
        assert_eq!(set.len(), edges.len());
    }

    #[test]
    fn hsbm_without_cross_edges_stays_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = HsbmConfig {
            n: 12,
            m: 3,
            community_sizes: vec![5, 7],
            within: vec![0.5, 0.5],
            cross: 0.0,
            fixed_counts: None,
        };
        let member = cfg.membership();
        let edges = sample_hsbm(&cfg, &mut rng).unwrap();
        assert!(!edges.is_empty());
        for e in &edges {
            assert!(e.items().iter().all(|&k| member[k] == member[e.items()[0]]));
        }
    }

    #[test]
    fn invalid_configs() {
        let cfg = NurhmConfig { n: 3, sizes: vec![SizeSpec { m: 4, rule: EdgeRule::Constant { p: 0.1 } }] };
        assert!(cfg.validate().is_err());
        let cfg = NurhmConfig { n: 5, sizes: vec![SizeSpec { m: 2, rule: EdgeRule::Uniform { p: 0.5, q: 0.1 } }] };
        assert!(cfg.validate().is_err());
        let cfg = HsbmConfig {
            n: 10,
            m: 3,
            community_sizes: vec![4, 5],
            within: vec![0.1, 0.1],
            cross: 0.1,
            fixed_counts: None,
        };
        assert!(cfg.validate().is_err());
    }
}
