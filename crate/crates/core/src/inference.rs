//! Plug-in asymptotic standard errors and confidence intervals.
//!
//! Marginal-family estimators use `rho_{k,1}^2 = sum_i sum_{y <= y_i} theta_{k,1}(u; y, T_i)`,
//! which costs one ordered-prefix enumeration per edge (`m!/(m-y)!` terms).
//! The QMLE uses `rho_{k,2}^2 = (sum_i theta_{k,2})^2 / sum_i theta_{k,3}`, which
//! only needs pairs and triples of each edge.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, FitResult};
use crate::likelihood::logistic;
use crate::model::{falling_factorial, log_sum_exp, Dataset, Edge, UtilityVector};
use crate::normal::two_sided_critical;

/// Default cap on enumerated prefixes per inference call.
pub const DEFAULT_COST_BUDGET: u128 = 10_000_000;

fn check_member(u: &UtilityVector, edge: &Edge, k: usize) -> Result<()> {
    if let Some(&bad) = edge.items().iter().find(|&&i| i >= u.len()) {
        return Err(Error::DimensionMismatch { expected: bad + 1, got: u.len() });
    }
    if !edge.contains(k) {
        return Err(Error::InvalidEdge(format!("item {k} is not in edge {:?}", edge.items())));
    }
    Ok(())
}

/// `theta_{k,1}(u; y, T)`: sum over ordered (y-1)-prefixes `S` of `T \ {k}` of
/// `P(S in order, then k) * (1 - P(k first in T \ S))`. Zero for `y >= m`.
pub fn theta_k1(u: &UtilityVector, edge: &Edge, y: usize, k: usize, cap: u128) -> Result<f64> {
    check_member(u, edge, k)?;
    let m = edge.len();
    if y == 0 || y >= m {
        return Ok(0.0);
    }
    let required = falling_factorial(m - 1, y - 1);
    if required > cap {
        return Err(Error::BudgetExceeded { required, cap });
    }
    let others: Vec<usize> = edge.items().iter().copied().filter(|&i| i != k).collect();
    let mut acc = 0.0;
    let mut rest = others;
    theta_k1_dfs(u.values(), k, &mut rest, y - 1, 1.0, &mut |p| acc += p);
    Ok(acc)
}

/// Walks ordered prefixes of `rest` down to `depth`, calling `emit` at the
/// leaves with `P(prefix, then k) * (1 - P(k first among remaining))`.
fn theta_k1_dfs(u: &[f64], k: usize, rest: &mut Vec<usize>, depth: usize, prob: f64, emit: &mut impl FnMut(f64)) {
    let lse = log_sum_exp(rest.iter().map(|&i| u[i]).chain(std::iter::once(u[k])));
    if depth == 0 {
        let pk = (u[k] - lse).exp();
        emit(prob * pk * (1.0 - pk));
        return;
    }
    for p in 0..rest.len() {
        let next = (u[rest[p]] - lse).exp();
        let i = rest.swap_remove(p);
        theta_k1_dfs(u, k, rest, depth - 1, prob * next, emit);
        rest.push(i);
        let last = rest.len() - 1;
        rest.swap(p, last);
    }
}

/// `sum_{y=1..cutoff} theta_{k,1}(u; y, T)` in one enumeration.
fn theta_k1_cumulative(u: &[f64], k: usize, edge: &[usize], cutoff: usize) -> f64 {
    let m = edge.len();
    let depth = cutoff.min(m - 1);
    let mut rest: Vec<usize> = edge.iter().copied().filter(|&i| i != k).collect();
    let mut acc = 0.0;
    cumulative_dfs(u, k, &mut rest, depth, 1.0, &mut acc);
    acc
}

fn cumulative_dfs(u: &[f64], k: usize, rest: &mut Vec<usize>, depth: usize, prob: f64, acc: &mut f64) {
    if depth == 0 || rest.is_empty() {
        return;
    }
    let lse = log_sum_exp(rest.iter().map(|&i| u[i]).chain(std::iter::once(u[k])));
    let pk = (u[k] - lse).exp();
    *acc += prob * pk * (1.0 - pk);
    if depth == 1 {
        return;
    }
    for p in 0..rest.len() {
        let next = (u[rest[p]] - lse).exp();
        let i = rest.swap_remove(p);
        cumulative_dfs(u, k, rest, depth - 1, prob * next, acc);
        rest.push(i);
        let last = rest.len() - 1;
        rest.swap(p, last);
    }
}

/// Prefix counts `m_i!/(m_i - y_i)!` for every observation.
pub fn marginal_cost(data: &Dataset) -> Vec<(usize, u128)> {
    data.observations()
        .iter()
        .enumerate()
        .map(|(i, o)| (i, falling_factorial(o.size(), o.cutoff())))
        .collect()
}

fn check_cost(data: &Dataset, cap: u128) -> Result<u128> {
    let per_edge = marginal_cost(data);
    let total: u128 = per_edge.iter().map(|&(_, c)| c).sum();
    if total > cap {
        return Err(Error::CostBudgetExceeded { total, cap, per_edge });
    }
    Ok(total)
}

/// Inverse asymptotic variance of the marginal MLE for item `k`, using each
/// observation's cutoff.
pub fn rho_k1_sq(u: &UtilityVector, data: &Dataset, k: usize, cap: u128) -> Result<f64> {
    u.check_len(data.n())?;
    let relevant: Vec<_> = data.observations().iter().filter(|o| o.edge().contains(k)).collect();
    let total: u128 = relevant.iter().map(|o| falling_factorial(o.size(), o.cutoff())).sum();
    if total > cap {
        let per_edge = data
            .observations()
            .iter()
            .enumerate()
            .filter(|(_, o)| o.edge().contains(k))
            .map(|(i, o)| (i, falling_factorial(o.size(), o.cutoff())))
            .collect();
        return Err(Error::CostBudgetExceeded { total, cap, per_edge });
    }
    Ok(relevant
        .iter()
        .map(|o| theta_k1_cumulative(u.values(), k, o.edge().items(), o.cutoff()))
        .sum())
}

/// `rho_{k,1}^2` for every item with one prefix enumeration per observation.
pub fn rho1_sq_all(u: &UtilityVector, data: &Dataset, cap: u128) -> Result<Vec<f64>> {
    u.check_len(data.n())?;
    check_cost(data, cap)?;
    let mut rho = vec![0.0; data.n()];
    for obs in data.observations() {
        let depth = obs.cutoff().min(obs.size() - 1);
        let mut rest = obs.edge().items().to_vec();
        all_items_dfs(u.values(), &mut rest, depth, 1.0, &mut rho);
    }
    Ok(rho)
}

fn all_items_dfs(u: &[f64], rest: &mut Vec<usize>, depth: usize, prob: f64, rho: &mut [f64]) {
    let lse = log_sum_exp(rest.iter().map(|&i| u[i]));
    let probs: Vec<f64> = rest.iter().map(|&i| (u[i] - lse).exp()).collect();
    for (&i, &a) in rest.iter().zip(&probs) {
        rho[i] += prob * a * (1.0 - a);
    }
    if depth <= 1 || rest.len() <= 2 {
        return;
    }
    for p in 0..rest.len() {
        let i = rest.swap_remove(p);
        all_items_dfs(u, rest, depth - 1, prob * probs[p], rho);
        rest.push(i);
        let last = rest.len() - 1;
        rest.swap(p, last);
    }
}

/// `theta_{k,2}(u; T) = sum_{j != k} e^{u_k + u_j} / (e^{u_k} + e^{u_j})^2`.
pub fn theta_k2(u: &UtilityVector, edge: &Edge, k: usize) -> Result<f64> {
    check_member(u, edge, k)?;
    Ok(theta23(u.values(), edge.items(), k).0)
}

/// `theta_{k,3}(u; T) = theta_{k,2} + 2 sum_{{j,t}} [P(k first in {k,j,t}) - P(k > j) P(k > t)]`.
pub fn theta_k3(u: &UtilityVector, edge: &Edge, k: usize) -> Result<f64> {
    check_member(u, edge, k)?;
    Ok(theta23(u.values(), edge.items(), k).1)
}

fn theta23(u: &[f64], items: &[usize], k: usize) -> (f64, f64) {
    let uk = u[k];
    let mut t2 = 0.0;
    let mut sum_a = 0.0;
    let mut sum_a2 = 0.0;
    let mut triple = 0.0;
    for (x, &j) in items.iter().enumerate() {
        if j == k {
            continue;
        }
        let a = logistic(uk - u[j]);
        t2 += a * (1.0 - a);
        sum_a += a;
        sum_a2 += a * a;
        let ej = (u[j] - uk).exp();
        for &t in &items[x + 1..] {
            if t == k {
                continue;
            }
            triple += 1.0 / (1.0 + ej + (u[t] - uk).exp());
        }
    }
    let pair_products = 0.5 * (sum_a * sum_a - sum_a2);
    (t2, t2 + 2.0 * (triple - pair_products))
}

/// `rho_{k,2}^2 = (sum_i theta_{k,2})^2 / sum_i theta_{k,3}` over edges containing `k`.
pub fn rho_k2_sq(u: &UtilityVector, data: &Dataset, k: usize) -> Result<f64> {
    u.check_len(data.n())?;
    let (mut s2, mut s3) = (0.0, 0.0);
    for obs in data.observations().iter().filter(|o| o.edge().contains(k)) {
        let (a, b) = theta23(u.values(), obs.edge().items(), k);
        s2 += a;
        s3 += b;
    }
    Ok(if s3 > 0.0 { s2 * s2 / s3 } else { 0.0 })
}

/// `rho_{k,2}^2` for every item.
pub fn rho2_sq_all(u: &UtilityVector, data: &Dataset) -> Result<Vec<f64>> {
    u.check_len(data.n())?;
    let n = data.n();
    let mut s2 = vec![0.0; n];
    let mut s3 = vec![0.0; n];
    for obs in data.observations() {
        let items = obs.edge().items();
        for &k in items {
            let (a, b) = theta23(u.values(), items, k);
            s2[k] += a;
            s3[k] += b;
        }
    }
    Ok(s2
        .iter()
        .zip(&s3)
        .map(|(&a, &b)| if b > 0.0 { a * a / b } else { 0.0 })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemInference {
    pub item: usize,
    pub estimate: f64,
    pub sigma: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub estimator_kind: EstimatorKind,
    pub level: f64,
    pub items: Vec<ItemInference>,
    /// Enumeration cost proxy: `sum_i m_i!/(m_i - y_i)!` for marginal
    /// estimators, `sum_i m_i (m_i - 1)` for the QMLE.
    pub theta_cost: u128,
}

impl InferenceReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["item", "estimate", "sigma", "ci_low", "ci_high", "n_k"])?;
        for it in &self.items {
            wtr.write_record([
                it.item.to_string(),
                it.estimate.to_string(),
                it.sigma.to_string(),
                it.ci_low.to_string(),
                it.ci_high.to_string(),
                it.n_k.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn mean_sigma(&self) -> f64 {
        self.items.iter().map(|i| i.sigma).sum::<f64>() / self.items.len().max(1) as f64
    }
}

/// Plug-in standard errors `1/rho_k` evaluated at the fitted utilities and
/// normal confidence intervals at `level`.
pub fn standard_errors(fit: &FitResult, data: &Dataset, level: f64, cost_cap: u128) -> Result<InferenceReport> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    let z = two_sided_critical(level)
        .ok_or_else(|| Error::Config(format!("confidence level {level} must lie in (0, 1)")))?;
    let u = &fit.estimate;
    u.check_len(data.n())?;
    let prepared = fit.estimator_kind.prepare(data);
    let (rho_sq, theta_cost) = match fit.estimator_kind {
        EstimatorKind::Marginal(_) => {
            let cost = check_cost(&prepared, cost_cap)?;
            (rho1_sq_all(u, &prepared, cost_cap)?, cost)
        }
        EstimatorKind::Qmle => {
            if prepared.observations().iter().any(|o| o.cutoff() < o.size()) {
                return Err(Error::Config(
                    "QMLE standard errors are defined for fully observed rankings only".into(),
                ));
            }
            let cost = prepared.observations().iter().map(|o| (o.size() * (o.size() - 1)) as u128).sum();
            (rho2_sq_all(u, &prepared)?, cost)
        }
    };
    let degrees = data.degrees();
    let items = (0..data.n())
        .map(|k| {
            let sigma = 1.0 / rho_sq[k].sqrt();
            let est = u[k];
            ItemInference {
                item: k,
                estimate: est,
                sigma,
                ci_low: est - z * sigma,
                ci_high: est + z * sigma,
                n_k: degrees[k],
            }
        })
        .collect();
    Ok(InferenceReport { estimator_kind: fit.estimator_kind, level, items, theta_cost })
}
