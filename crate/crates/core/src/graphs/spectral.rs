//! Spectral parameters of the expected Hessian: the normalized Laplacian
//! spectrum, the gap `s = min(lambda_2, 2 - lambda_n)` and the leave-one-out
//! second eigenvalue.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::likelihood::{
    accumulate_expected_marginal_hessian, accumulate_marginal_hessian, for_each_broken_pair, logistic, prefix_count,
    HessianMatrix, DEFAULT_EXPECTED_HESSIAN_CAP, DEFAULT_MC_SAMPLES,
};
use crate::model::{sample_order, Dataset, Edge, Observation, UtilityVector};

/// Largest `n` accepted by the dense eigensolves.
pub const DENSE_CAP: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    /// Per-observation prefix cap before switching to Monte Carlo.
    pub enumeration_cap: u128,
    pub mc_samples: usize,
    pub seed: u64,
    pub leave_one_out: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            enumeration_cap: DEFAULT_EXPECTED_HESSIAN_CAP,
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: 0,
            leave_one_out: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Eigenvalues of the normalized Laplacian, ascending.
    pub eigenvalues: Vec<f64>,
    pub s_gap: f64,
    pub lambda2_leave: Option<f64>,
    /// Whether some observation's expected block was estimated by simulation.
    pub monte_carlo: bool,
}

/// Expected negative Hessian contribution of one observation, on its own items.
struct Block {
    items: Vec<usize>,
    values: DMatrix<f64>,
}

fn observation_block(u: &[f64], obs: &Observation, kind: EstimatorKind, opts: &SpectralOptions) -> (Block, bool) {
    let items = obs.edge().items().to_vec();
    let m = items.len();
    let local_u: Vec<f64> = items.iter().map(|&k| u[k]).collect();
    let local: Vec<usize> = (0..m).collect();
    let mut h = HessianMatrix::zeros(m);
    let mut mc = false;
    match kind {
        EstimatorKind::Qmle => {
            // Full breaking: every pair is compared once whatever the outcome.
            for_each_broken_pair(&local, m, |w, l| {
                let p = logistic(local_u[w] - local_u[l]);
                let v = p * (1.0 - p);
                h.add_off(w, l, v);
                h.add_diag(w, -v);
                h.add_diag(l, -v);
            });
        }
        EstimatorKind::Marginal(rule) => {
            let y = rule.apply(obs);
            if prefix_count(m, y.min(m - 1)) <= opts.enumeration_cap {
                accumulate_expected_marginal_hessian(&mut h, &local_u, &local, y);
            } else {
                mc = true;
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (items[0] as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let w = 1.0 / opts.mc_samples as f64;
                for _ in 0..opts.mc_samples {
                    let order = sample_order(&local_u, &local, &mut rng);
                    accumulate_marginal_hessian(&mut h, &local_u, &order, y, w);
                }
            }
        }
    }
    let values = -h.to_dense();
    (Block { items, values }, mc)
}

fn add_block(target: &mut DMatrix<f64>, block: &Block, sign: f64) {
    for (a, &i) in block.items.iter().enumerate() {
        for (b, &j) in block.items.iter().enumerate() {
            target[(i, j)] += sign * block.values[(a, b)];
        }
    }
}

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Dense `-E[H](u)` for the estimator's likelihood.
pub fn expected_negative_hessian(
    data: &Dataset,
    u: &UtilityVector,
    kind: EstimatorKind,
    opts: &SpectralOptions,
) -> Result<DMatrix<f64>> {
    u.check_len(data.n())?;
    let mut l = DMatrix::zeros(data.n(), data.n());
    for obs in data.observations() {
        add_block(&mut l, &observation_block(u.values(), obs, kind, opts).0, 1.0);
    }
    Ok(l)
}

/// Normalized Laplacian spectrum, `s` and the leave-one-out `lambda_2`.
pub fn spectral_diagnostics(
    data: &Dataset,
    u: &UtilityVector,
    kind: EstimatorKind,
    opts: &SpectralOptions,
) -> Result<SpectralReport> {
    let n = data.n();
    u.check_len(n)?;
    if n < 2 {
        return Err(Error::Config("spectral diagnostics need at least two items".into()));
    }
    if n > DENSE_CAP {
        return Err(Error::SizeCap { n, cap: DENSE_CAP });
    }
    let mut monte_carlo = false;
    let blocks: Vec<Block> = data
        .observations()
        .iter()
        .map(|obs| {
            let (b, mc) = observation_block(u.values(), obs, kind, opts);
            monte_carlo |= mc;
            b
        })
        .collect();
    let mut l = DMatrix::zeros(n, n);
    for b in &blocks {
        add_block(&mut l, b, 1.0);
    }

    let mut scale = vec![0.0; n];
    for (i, s) in scale.iter_mut().enumerate() {
        let d = l[(i, i)];
        if d <= 0.0 {
            return Err(Error::IsolatedVertex(i));
        }
        *s = 1.0 / d.sqrt();
    }
    let mut norm = l.clone();
    for i in 0..n {
        for j in 0..n {
            norm[(i, j)] *= scale[i] * scale[j];
        }
    }
    let eigenvalues = sorted_eigenvalues(norm);
    let s_gap = eigenvalues[1].min(2.0 - eigenvalues[n - 1]);

    let lambda2_leave = if opts.leave_one_out && n >= 3 {
        let incidence = data.incidence();
        let values: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut lk = l.clone();
                for &i in &incidence[k] {
                    add_block(&mut lk, &blocks[i], -1.0);
                }
                let reduced = lk.remove_row(k).remove_column(k);
                sorted_eigenvalues(reduced)[1]
            })
            .collect();
        Some(values.into_iter().fold(f64::INFINITY, f64::min))
    } else {
        None
    };
    Ok(SpectralReport { eigenvalues, s_gap, lambda2_leave, monte_carlo })
}

/// Spectral diagnostics of a bare edge list, read as full rankings.
pub fn spectral_diagnostics_edges(
    edges: &[Edge],
    n: usize,
    u: &UtilityVector,
    kind: EstimatorKind,
    opts: &SpectralOptions,
) -> Result<SpectralReport> {
    let obs = edges.iter().map(|e| Observation::full(e.items().to_vec())).collect::<Result<Vec<_>>>()?;
    let data = Dataset::new(n, obs)?;
    let kind = match kind {
        EstimatorKind::Marginal(crate::model::CutoffOverride::PerObservation) => EstimatorKind::FULL,
        k => k,
    };
    spectral_diagnostics(&data, u, kind, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(list: &[&[usize]]) -> Vec<Edge> {
        list.iter().map(|e| Edge::new(e.to_vec()).unwrap()).collect()
    }

    #[test]
    fn single_pair() {
        let r = spectral_diagnostics_edges(
            &edges(&[&[0, 1]]),
            2,
            &UtilityVector::zeros(2),
            EstimatorKind::FULL,
            &SpectralOptions::default(),
        )
        .unwrap();
        assert!(r.eigenvalues[0].abs() < 1e-12);
        assert!((r.eigenvalues[1] - 2.0).abs() < 1e-12);
        assert!(r.s_gap.abs() < 1e-12);
    }

    #[test]
    fn triangle() {
        for kind in [EstimatorKind::FULL, EstimatorKind::Qmle, EstimatorKind::CHOICE_ONE] {
            let r = spectral_diagnostics_edges(
                &edges(&[&[0, 1], &[1, 2], &[0, 2]]),
                3,
                &UtilityVector::zeros(3),
                kind,
                &SpectralOptions::default(),
            )
            .unwrap();
            let expect = [0.0, 1.5, 1.5];
            for (a, b) in r.eigenvalues.iter().zip(expect) {
                assert!((a - b).abs() < 1e-12, "{:?}", r.eigenvalues);
            }
            assert!((r.s_gap - 0.5).abs() < 1e-12);
            // removing any vertex leaves one edge of weight 1/4: Laplacian eigenvalues {0, 1/2}
            assert!((r.lambda2_leave.unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn isolated_vertex_is_named() {
        let r = spectral_diagnostics_edges(
            &edges(&[&[0, 1]]),
            3,
            &UtilityVector::zeros(3),
            EstimatorKind::FULL,
            &SpectralOptions::default(),
        );
        assert!(matches!(r, Err(Error::IsolatedVertex(2))));
    }
}
