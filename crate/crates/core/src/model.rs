//! Plackett-Luce ranking model: record types, exact probabilities, the
//! sequential sampler, marginalization and full breaking.
//!
//! All probabilities are computed in the log domain. Suffix denominators
//! `log sum_{t >= j} exp(u_{pi(t)})` are accumulated from the back of the
//! ranking with `log_add_exp`, so utilities of any magnitude are safe.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the edge size for brute-force permutation enumeration (8! = 40320).
pub const DEFAULT_ENUMERATION_CAP: usize = 8;

/// Tolerance for the sum-zero identification constraint.
pub const IDENTIFICATION_TOL: f64 = 1e-9;

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log sum exp(x)` with max subtraction.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Real-valued log-score vector, one entry per item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UtilityVector(Vec<f64>);

impl UtilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Builds the vector and shifts it to sum zero.
    pub fn centered(values: Vec<f64>) -> Result<Self> {
        let mut u = Self::new(values)?;
        u.center();
        Ok(u)
    }

    pub fn center(&mut self) {
        if self.0.is_empty() {
            return;
        }
        let mean = self.0.iter().sum::<f64>() / self.0.len() as f64;
        self.0.iter_mut().for_each(|v| *v -= mean);
    }

    pub fn is_identified(&self) -> bool {
        self.0.iter().sum::<f64>().abs() <= IDENTIFICATION_TOL
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| v + c).collect())
    }

    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.0.len() });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for UtilityVector {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// A comparison set: strictly increasing item indices, at least two of them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge(Vec<usize>);

impl Edge {
    pub fn new(mut items: Vec<usize>) -> Result<Self> {
        items.sort_unstable();
        if items.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidEdge(format!("duplicate items in {items:?}")));
        }
        if items.len() < 2 {
            return Err(Error::InvalidEdge(format!("edge {items:?} has fewer than 2 items")));
        }
        Ok(Self(items))
    }

    /// Caller guarantees `items` is strictly increasing with at least two entries.
    pub(crate) fn from_sorted_unchecked(items: Vec<usize>) -> Self {
        debug_assert!(items.len() >= 2 && items.windows(2).all(|w| w[0] < w[1]));
        Self(items)
    }

    pub fn items(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0.binary_search(&k).is_ok()
    }
}

/// Best-to-worst ordering of an edge's items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking(Vec<usize>);

impl Ranking {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidObservation(format!(
                "ranking {order:?} contains duplicate items (ties are not supported)"
            )));
        }
        Ok(Self(order))
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One comparison outcome. Positions after `cutoff` are carried but every
/// likelihood consumer ignores their relative order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    edge: Edge,
    ranking: Ranking,
    cutoff: usize,
}

impl Observation {
    pub fn new(order: Vec<usize>, cutoff: usize) -> Result<Self> {
        let ranking = Ranking::new(order)?;
        let edge = Edge::new(ranking.order().to_vec())
            .map_err(|e| Error::InvalidObservation(e.to_string()))?;
        if cutoff == 0 || cutoff > edge.len() {
            return Err(Error::InvalidObservation(format!(
                "cutoff {cutoff} outside 1..={}",
                edge.len()
            )));
        }
        Ok(Self { edge, ranking, cutoff })
    }

    /// Observation of the full ranking (cutoff = m).
    pub fn full(order: Vec<usize>) -> Result<Self> {
        let m = order.len();
        Self::new(order, m)
    }

    pub fn edge(&self) -> &Edge {
        &self.edge
    }

    pub fn ranking(&self) -> &Ranking {
        &self.ranking
    }

    pub fn order(&self) -> &[usize] {
        self.ranking.order()
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn size(&self) -> usize {
        self.edge.len()
    }

    /// Same ranking with cutoff replaced by `min(y, m)`.
    pub fn with_cutoff(&self, y: usize) -> Self {
        let mut o = self.clone();
        o.cutoff = y.clamp(1, self.size());
        o
    }

    /// 1-based rank of `k`, if present.
    pub fn rank_of(&self, k: usize) -> Option<usize> {
        self.order().iter().position(|&i| i == k).map(|p| p + 1)
    }
}

/// How observation cutoffs are interpreted by a marginal-likelihood consumer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CutoffOverride {
    /// Each observation's own cutoff.
    #[default]
    PerObservation,
    /// y_i = m_i.
    Full,
    /// y_i = min(y, m_i).
    Top(usize),
}

impl CutoffOverride {
    pub fn apply(&self, obs: &Observation) -> usize {
        match *self {
            CutoffOverride::PerObservation => obs.cutoff(),
            CutoffOverride::Full => obs.size(),
            CutoffOverride::Top(y) => y.clamp(1, obs.size()),
        }
    }
}

/// Item count plus independent comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    observations: Vec<Observation>,
}

impl Dataset {
    pub fn new(n: usize, observations: Vec<Observation>) -> Result<Self> {
        for (i, obs) in observations.iter().enumerate() {
            if let Some(&bad) = obs.order().iter().find(|&&k| k >= n) {
                return Err(Error::InvalidObservation(format!(
                    "observation {i} references item {bad} but n = {n}"
                )));
            }
        }
        Ok(Self { n, observations })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn push(&mut self, obs: Observation) -> Result<()> {
        if let Some(&bad) = obs.order().iter().find(|&&k| k >= self.n) {
            return Err(Error::InvalidObservation(format!(
                "item {bad} out of range for n = {}",
                self.n
            )));
        }
        self.observations.push(obs);
        Ok(())
    }

    /// Per-item degree N_k.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for obs in &self.observations {
            for &k in obs.order() {
                deg[k] += 1;
            }
        }
        deg
    }

    pub fn edges(&self) -> Vec<Edge> {
        self.observations.iter().map(|o| o.edge().clone()).collect()
    }

    pub fn cutoffs(&self) -> Vec<usize> {
        self.observations.iter().map(|o| o.cutoff()).collect()
    }

    /// Copy with every cutoff rewritten by `rule`.
    pub fn with_cutoffs(&self, rule: CutoffOverride) -> Self {
        let observations = self
            .observations
            .iter()
            .map(|o| o.with_cutoff(rule.apply(o)))
            .collect();
        Self { n: self.n, observations }
    }

    /// Indices of observations containing each item.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n];
        for (i, obs) in self.observations.iter().enumerate() {
            for &k in obs.order() {
                inc[k].push(i);
            }
        }
        inc
    }

    /// Applies a label permutation: item k becomes `perm[k]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let observations = self
            .observations
            .iter()
            .map(|o| Observation::new(o.order().iter().map(|&k| perm[k]).collect(), o.cutoff()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.n, observations)
    }
}

fn check_observation(u: &UtilityVector, obs: &Observation) -> Result<()> {
    if let Some(&bad) = obs.order().iter().find(|&&k| k >= u.len()) {
        return Err(Error::DimensionMismatch { expected: bad + 1, got: u.len() });
    }
    Ok(())
}

/// `log sum_{t >= j} exp(u_{order[t]})` for every position j.
pub(crate) fn suffix_log_sums(u: &[f64], order: &[usize]) -> Vec<f64> {
    let m = order.len();
    let mut out = vec![0.0; m];
    let mut acc = f64::NEG_INFINITY;
    for j in (0..m).rev() {
        acc = log_add_exp(acc, u[order[j]]);
        out[j] = acc;
    }
    out
}

/// Log-probability of the observed top-`cutoff` sequence under the PL model.
/// With cutoff = m this is the full PL log-mass.
pub fn pl_log_probability(u: &UtilityVector, obs: &Observation) -> Result<f64> {
    check_observation(u, obs)?;
    Ok(pl_log_probability_unchecked(u.values(), obs.order(), obs.cutoff()))
}

pub(crate) fn pl_log_probability_unchecked(u: &[f64], order: &[usize], cutoff: usize) -> f64 {
    let suffix = suffix_log_sums(u, order);
    let y = cutoff.min(order.len());
    (0..y).map(|j| u[order[j]] - suffix[j]).sum()
}

/// Draws a full ranking of `edge` by repeatedly picking the next item with
/// probability proportional to `exp(u_k)` among the remaining ones.
pub fn sample_ranking<R: Rng + ?Sized>(u: &UtilityVector, edge: &Edge, rng: &mut R) -> Ranking {
    Ranking(sample_order(u.values(), edge.items(), rng))
}

pub(crate) fn sample_order<R: Rng + ?Sized>(u: &[f64], items: &[usize], rng: &mut R) -> Vec<usize> {
    let max = items.iter().map(|&k| u[k]).fold(f64::NEG_INFINITY, f64::max);
    let mut remaining: Vec<(usize, f64)> = items.iter().map(|&k| (k, (u[k] - max).exp())).collect();
    let mut order = Vec::with_capacity(items.len());
    while remaining.len() > 1 {
        let total: f64 = remaining.iter().map(|(_, w)| w).sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = remaining.len() - 1;
        for (idx, (_, w)) in remaining.iter().enumerate() {
            if target < *w {
                pick = idx;
                break;
            }
            target -= w;
        }
        order.push(remaining.remove(pick).0);
    }
    order.push(remaining[0].0);
    order
}

/// Visits every permutation of `items` (Heap's algorithm).
pub(crate) fn for_each_permutation(items: &[usize], mut f: impl FnMut(&[usize])) {
    let mut a = items.to_vec();
    let n = a.len();
    let mut c = vec![0usize; n];
    f(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            f(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Probability that `relative_order` appears in exactly that relative order in
/// a full PL ranking of `edge`, by exhaustive summation over permutations.
pub fn marginal_probability(
    u: &UtilityVector,
    edge: &Edge,
    relative_order: &[usize],
    enumeration_cap: usize,
) -> Result<f64> {
    if edge.len() > enumeration_cap {
        return Err(Error::BudgetExceeded {
            required: factorial(edge.len()),
            cap: factorial(enumeration_cap),
        });
    }
    if let Some(&bad) = edge.items().iter().find(|&&k| k >= u.len()) {
        return Err(Error::DimensionMismatch { expected: bad + 1, got: u.len() });
    }
    let mut seen = relative_order.to_vec();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidObservation("relative order has duplicates".into()));
    }
    if let Some(&bad) = relative_order.iter().find(|&&k| !edge.contains(k)) {
        return Err(Error::InvalidObservation(format!("item {bad} is not in the edge")));
    }

    let m = edge.len();
    let mut total = 0.0;
    for_each_permutation(edge.items(), |perm| {
        let mut next = 0;
        for &k in perm {
            if next < relative_order.len() && k == relative_order[next] {
                next += 1;
            } else if relative_order[next..].contains(&k) {
                return;
            }
        }
        total += pl_log_probability_unchecked(u.values(), perm, m).exp();
    });
    Ok(total)
}

/// All implied (winner, loser) pairs `(pi(j), pi(t))` with `j < t` and `j <= cutoff`.
pub fn full_breaking(obs: &Observation) -> Vec<(usize, usize)> {
    let order = obs.order();
    let m = order.len();
    let y = obs.cutoff().min(m);
    let mut pairs = Vec::with_capacity(y * m);
    for j in 0..y {
        for t in (j + 1)..m {
            pairs.push((order[j], order[t]));
        }
    }
    pairs
}

pub(crate) fn factorial(m: usize) -> u128 {
    (1..=m as u128).product()
}

/// m! / (m - y)!, the number of ordered y-prefixes of an m-set.
pub fn falling_factorial(m: usize, y: usize) -> u128 {
    let y = y.min(m);
    ((m - y + 1) as u128..=m as u128).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obs(order: &[usize], y: usize) -> Observation {
        Observation::new(order.to_vec(), y).unwrap()
    }

    #[test]
    fn two_item_probabilities() {
        let u = UtilityVector::zeros(2);
        let p = pl_log_probability(&u, &obs(&[0, 1], 1)).unwrap();
        assert!((p - 0.5f64.ln()).abs() < 1e-15);

        let u = UtilityVector::centered(vec![2f64.ln(), 0.0]).unwrap();
        let p = pl_log_probability(&u, &obs(&[0, 1], 1)).unwrap();
        assert!((p - (2.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn uniform_triple() {
        let u = UtilityVector::zeros(3);
        for order in [[0, 1, 2], [2, 0, 1], [1, 2, 0]] {
            let p = pl_log_probability(&u, &obs(&order, 3)).unwrap();
            assert!((p - (1.0f64 / 6.0).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Observation::new(vec![0, 0, 1], 2).is_err());
        assert!(Observation::new(vec![0, 1], 0).is_err());
        assert!(Observation::new(vec![0, 1], 3).is_err());
        assert!(Observation::new(vec![0], 1).is_err());
        assert!(UtilityVector::new(vec![0.0, f64::NAN]).is_err());
        let u = UtilityVector::zeros(2);
        assert!(matches!(
            pl_log_probability(&u, &obs(&[0, 2], 2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Dataset::new(2, vec![obs(&[0, 2], 1)]).is_err());
    }

    #[test]
    fn huge_utilities_do_not_overflow() {
        let u = UtilityVector::new(vec![800.0, 0.0, -800.0]).unwrap();
        let p = pl_log_probability(&u, &obs(&[0, 1, 2], 3)).unwrap();
        assert!(p.is_finite() && p.abs() < 1e-300);
        let q = pl_log_probability(&u, &obs(&[2, 1, 0], 3)).unwrap();
        assert!((q - (-2400.0)).abs() < 1e-9);
    }

    #[test]
    fn breaking_examples() {
        let pairs = full_breaking(&obs(&[2, 0, 1], 3));
        assert_eq!(pairs, vec![(2, 0), (2, 1), (0, 1)]);
        let pairs = full_breaking(&obs(&[2, 0, 1], 1));
        assert_eq!(pairs, vec![(2, 0), (2, 1)]);
        assert_eq!(full_breaking(&obs(&[1, 0], 2)), vec![(1, 0)]);
        let big = obs(&[4, 2, 0, 1, 3], 5);
        assert_eq!(full_breaking(&big).len(), 10);
    }

    #[test]
    fn marginal_probability_examples() {
        let edge = Edge::new(vec![0, 1, 2]).unwrap();
        let u = UtilityVector::zeros(3);
        let p = marginal_probability(&u, &edge, &[0, 1], 8).unwrap();
        assert!((p - 0.5).abs() < 1e-15);

        let u = UtilityVector::new(vec![0.7, -0.3, 1.1]).unwrap();
        let p = marginal_probability(&u, &edge, &[0, 1], 8).unwrap();
        let logistic = 0.7f64.exp() / (0.7f64.exp() + (-0.3f64).exp());
        assert!((p - logistic).abs() < 1e-14);

        let full = marginal_probability(&u, &edge, &[2, 0, 1], 8).unwrap();
        let direct = pl_log_probability(&u, &obs(&[2, 0, 1], 3)).unwrap().exp();
        assert!((full - direct).abs() < 1e-15);

        let big = Edge::new((0..9).collect()).unwrap();
        assert!(matches!(
            marginal_probability(&UtilityVector::zeros(9), &big, &[0], 8),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(marginal_probability(&u, &edge, &[0, 0], 8).is_err());
    }

    #[test]
    fn sampler_degenerate_limit() {
        let u = UtilityVector::new(vec![10.0, 0.0, 0.0]).unwrap();
        let edge = Edge::new(vec![0, 1, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 20_000;
        let first = (0..draws)
            .filter(|_| sample_ranking(&u, &edge, &mut rng).order()[0] == 0)
            .count();
        assert!(first as f64 / draws as f64 >= 0.999);
    }

    #[test]
    fn falling_factorial_counts() {
        assert_eq!(falling_factorial(6, 6), 720);
        assert_eq!(falling_factorial(6, 2), 30);
        assert_eq!(falling_factorial(5, 0), 1);
        assert_eq!(factorial(0), 1);
    }
}
