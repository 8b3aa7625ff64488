//! Marginal log-likelihood (top-y PL terms) and quasi log-likelihood (Bradley-Terry
//! on fully broken pairs): values, scores, Hessians and the expected marginal Hessian.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{falling_factorial, log_add_exp, sample_order, suffix_log_sums, Dataset, UtilityVector};

/// Default cap on ordered top-y prefixes enumerated per observation.
pub const DEFAULT_EXPECTED_HESSIAN_CAP: u128 = 1_000_000;

/// Default number of Monte Carlo replicates when enumeration is over budget.
pub const DEFAULT_MC_SAMPLES: usize = 10_000;

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Gradient of a log-likelihood, one entry per item.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Symmetric Hessian stored as a diagonal plus upper-triangle entries for co-edge pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianMatrix {
    n: usize,
    diag: Vec<f64>,
    off: BTreeMap<(usize, usize), f64>,
}

impl HessianMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, diag: vec![0.0; n], off: BTreeMap::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Upper-triangle off-diagonal entries `(i, j) -> value` with `i < j`.
    pub fn off_diagonal(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.off
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => self.diag[i],
            std::cmp::Ordering::Less => self.off.get(&(i, j)).copied().unwrap_or(0.0),
            std::cmp::Ordering::Greater => self.off.get(&(j, i)).copied().unwrap_or(0.0),
        }
    }

    pub(crate) fn add_diag(&mut self, i: usize, v: f64) {
        self.diag[i] += v;
    }

    pub(crate) fn add_off(&mut self, i: usize, j: usize, v: f64) {
        let key = if i < j { (i, j) } else { (j, i) };
        *self.off.entry(key).or_insert(0.0) += v;
    }

    pub(crate) fn add_scaled(&mut self, other: &HessianMatrix, scale: f64) {
        for (d, o) in self.diag.iter_mut().zip(&other.diag) {
            *d += scale * o;
        }
        for (&(i, j), &v) in &other.off {
            *self.off.entry((i, j)).or_insert(0.0) += scale * v;
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut sums = self.diag.clone();
        for (&(i, j), &v) in &self.off {
            sums[i] += v;
            sums[j] += v;
        }
        sums
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diag));
        for (&(i, j), &v) in &self.off {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.to_dense()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Coordinate-format dump `row,col,value` of the full symmetric matrix.
    pub fn write_coo<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["row", "col", "value"])?;
        let mut entries: Vec<(usize, usize, f64)> = (0..self.n).map(|i| (i, i, self.diag[i])).collect();
        for (&(i, j), &v) in &self.off {
            entries.push((i, j, v));
            entries.push((j, i, v));
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        for (i, j, v) in entries {
            wtr.write_record([i.to_string(), j.to_string(), format!("{v:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check(u: &UtilityVector, data: &Dataset) -> Result<()> {
    u.check_len(data.n())
}

/// Sum over observations of the top-y PL log-probabilities.
pub fn marginal_log_likelihood(u: &UtilityVector, data: &Dataset) -> Result<f64> {
    check(u, data)?;
    let mut acc = CompensatedSum::default();
    for obs in data.observations() {
        acc.add(crate::model::pl_log_probability_unchecked(u.values(), obs.order(), obs.cutoff()));
    }
    Ok(acc.value())
}

/// Bradley-Terry log-likelihood of the fully broken data.
pub fn quasi_log_likelihood(u: &UtilityVector, data: &Dataset) -> Result<f64> {
    check(u, data)?;
    let u = u.values();
    let mut acc = CompensatedSum::default();
    for obs in data.observations() {
        for_each_broken_pair(obs.order(), obs.cutoff(), |w, l| {
            acc.add(u[w] - log_add_exp(u[w], u[l]));
        });
    }
    Ok(acc.value())
}

#[inline]
pub(crate) fn for_each_broken_pair(order: &[usize], cutoff: usize, mut f: impl FnMut(usize, usize)) {
    let m = order.len();
    for j in 0..cutoff.min(m) {
        for t in (j + 1)..m {
            f(order[j], order[t]);
        }
    }
}

/// Per-position contributions `psi(pi(p); T, pi, u)` for one observation.
pub fn observation_marginal_score(u: &[f64], order: &[usize], cutoff: usize) -> Vec<f64> {
    let m = order.len();
    let y = cutoff.min(m);
    let suffix = suffix_log_sums(u, order);
    (0..m)
        .map(|p| {
            let observed = if p < y { 1.0 } else { 0.0 };
            let last = p.min(y - 1);
            observed - (0..=last).map(|j| (u[order[p]] - suffix[j]).exp()).sum::<f64>()
        })
        .collect()
}

/// Per-position quasi-score contributions for one observation.
pub fn observation_quasi_score(u: &[f64], order: &[usize], cutoff: usize) -> Vec<f64> {
    let m = order.len();
    let mut out = vec![0.0; m];
    let y = cutoff.min(m);
    for j in 0..y {
        for t in (j + 1)..m {
            let p_loser = logistic(u[order[t]] - u[order[j]]);
            out[j] += p_loser;
            out[t] -= p_loser;
        }
    }
    out
}

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn marginal_score(u: &UtilityVector, data: &Dataset) -> Result<ScoreVector> {
    check(u, data)?;
    let mut s = vec![0.0; data.n()];
    for obs in data.observations() {
        let contrib = observation_marginal_score(u.values(), obs.order(), obs.cutoff());
        for (&k, c) in obs.order().iter().zip(contrib) {
            s[k] += c;
        }
    }
    Ok(ScoreVector(s))
}

pub fn quasi_score(u: &UtilityVector, data: &Dataset) -> Result<ScoreVector> {
    check(u, data)?;
    let mut s = vec![0.0; data.n()];
    for obs in data.observations() {
        let contrib = observation_quasi_score(u.values(), obs.order(), obs.cutoff());
        for (&k, c) in obs.order().iter().zip(contrib) {
            s[k] += c;
        }
    }
    Ok(ScoreVector(s))
}

/// Adds one observation's marginal Hessian, scaled by `weight`, into `h`.
pub(crate) fn accumulate_marginal_hessian(h: &mut HessianMatrix, u: &[f64], order: &[usize], cutoff: usize, weight: f64) {
    let m = order.len();
    let y = cutoff.min(m - 1);
    let suffix = suffix_log_sums(u, order);
    let mut a = vec![0.0; m];
    for j in 0..y {
        for p in j..m {
            a[p] = (u[order[p]] - suffix[j]).exp();
        }
        for p in j..m {
            h.add_diag(order[p], -weight * a[p] * (1.0 - a[p]));
            for q in (p + 1)..m {
                h.add_off(order[p], order[q], weight * a[p] * a[q]);
            }
        }
    }
}

pub fn marginal_hessian(u: &UtilityVector, data: &Dataset) -> Result<HessianMatrix> {
    check(u, data)?;
    let mut h = HessianMatrix::zeros(data.n());
    for obs in data.observations() {
        accumulate_marginal_hessian(&mut h, u.values(), obs.order(), obs.cutoff(), 1.0);
    }
    Ok(h)
}

pub fn quasi_hessian(u: &UtilityVector, data: &Dataset) -> Result<HessianMatrix> {
    check(u, data)?;
    let uv = u.values();
    let mut h = HessianMatrix::zeros(data.n());
    for obs in data.observations() {
        for_each_broken_pair(obs.order(), obs.cutoff(), |w, l| {
            let p = logistic(uv[w] - uv[l]);
            let v = p * (1.0 - p);
            h.add_off(w, l, v);
            h.add_diag(w, -v);
            h.add_diag(l, -v);
        });
    }
    Ok(h)
}

/// Expected marginal Hessian contribution of one edge with top-`cutoff`
/// observation, by enumerating every ordered prefix with its PL probability.
pub(crate) fn accumulate_expected_marginal_hessian(
    h: &mut HessianMatrix,
    u: &[f64],
    items: &[usize],
    cutoff: usize,
) {
    let m = items.len();
    let depth = cutoff.min(m - 1);
    let mut remaining = items.to_vec();
    expected_dfs(h, u, &mut remaining, depth, 1.0);
}

fn expected_dfs(h: &mut HessianMatrix, u: &[f64], remaining: &mut Vec<usize>, depth: usize, prob: f64) {
    if depth == 0 || remaining.len() < 2 || prob == 0.0 {
        return;
    }
    let lse = crate::model::log_sum_exp(remaining.iter().map(|&k| u[k]));
    let a: Vec<f64> = remaining.iter().map(|&k| (u[k] - lse).exp()).collect();
    let r = remaining.len();
    for p in 0..r {
        h.add_diag(remaining[p], -prob * a[p] * (1.0 - a[p]));
        for q in (p + 1)..r {
            h.add_off(remaining[p], remaining[q], prob * a[p] * a[q]);
        }
    }
    if depth == 1 {
        return;
    }
    for p in 0..r {
        let k = remaining.swap_remove(p);
        expected_dfs(h, u, remaining, depth - 1, prob * a[p]);
        remaining.push(k);
        let last = remaining.len() - 1;
        remaining.swap(p, last);
    }
}

/// Number of ordered prefixes enumerated for one observation (`m!/(m-y)!`).
pub fn prefix_count(m: usize, cutoff: usize) -> u128 {
    falling_factorial(m, cutoff)
}

/// `E[marginal_hessian(u)]` over ranking outcomes, exact by prefix enumeration.
/// Fails with [`Error::BudgetExceeded`] when some observation needs more than `cap` prefixes.
pub fn expected_marginal_hessian(u: &UtilityVector, data: &Dataset, cap: u128) -> Result<HessianMatrix> {
    check(u, data)?;
    for obs in data.observations() {
        let required = prefix_count(obs.size(), obs.cutoff());
        if required > cap {
            return Err(Error::BudgetExceeded { required, cap });
        }
    }
    let mut h = HessianMatrix::zeros(data.n());
    for obs in data.observations() {
        accumulate_expected_marginal_hessian(&mut h, u.values(), obs.edge().items(), obs.cutoff());
    }
    Ok(h)
}

/// Monte Carlo estimate of the expected marginal Hessian: returns the mean
/// and the entrywise standard error over `samples` simulated outcome sets.
pub fn expected_marginal_hessian_mc<R: Rng + ?Sized>(
    u: &UtilityVector,
    data: &Dataset,
    samples: usize,
    rng: &mut R,
) -> Result<(HessianMatrix, HessianMatrix)> {
    check(u, data)?;
    let n = data.n();
    let mut mean = HessianMatrix::zeros(n);
    let mut sq = HessianMatrix::zeros(n);
    for _ in 0..samples {
        let mut h = HessianMatrix::zeros(n);
        for obs in data.observations() {
            let order = sample_order(u.values(), obs.edge().items(), rng);
            accumulate_marginal_hessian(&mut h, u.values(), &order, obs.cutoff(), 1.0);
        }
        mean.add_scaled(&h, 1.0);
        for d in h.diag.iter_mut() {
            *d *= *d;
        }
        for v in h.off.values_mut() {
            *v *= *v;
        }
        sq.add_scaled(&h, 1.0);
    }
    let s = samples as f64;
    let mut se = HessianMatrix::zeros(n);
    for i in 0..n {
        mean.diag[i] /= s;
        let var = (sq.diag[i] / s - mean.diag[i] * mean.diag[i]).max(0.0);
        se.diag[i] = (var / s).sqrt();
    }
    for (key, v) in mean.off.iter_mut() {
        *v /= s;
        let var = (sq.off[key] / s - *v * *v).max(0.0);
        se.off.insert(*key, (var / s).sqrt());
    }
    Ok((mean, se))
}

/// Exact expected Hessian when every observation fits `cap`, else the Monte Carlo
/// mean with its standard errors.
pub fn expected_marginal_hessian_or_mc<R: Rng + ?Sized>(
    u: &UtilityVector,
    data: &Dataset,
    cap: u128,
    samples: usize,
    rng: &mut R,
) -> Result<(HessianMatrix, Option<HessianMatrix>)> {
    match expected_marginal_hessian(u, data, cap) {
        Ok(h) => Ok((h, None)),
        Err(Error::BudgetExceeded { .. }) => {
            let (mean, se) = expected_marginal_hessian_mc(u, data, samples, rng)?;
            Ok((mean, Some(se)))
        }
        Err(e) => Err(e),
    }
}
