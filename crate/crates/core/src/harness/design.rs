//! Comparison designs used by the simulation experiments, parameterized by `n`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{binomial, sample_hsbm, sample_nurhm, EdgeRule, HsbmConfig, HsbmCounts, NurhmConfig, SizeSpec};
use crate::model::Edge;

/// `round(coef * n^n_power * (ln n)^log_power)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountFormula {
    pub coef: f64,
    #[serde(default)]
    pub n_power: f64,
    #[serde(default)]
    pub log_power: f64,
}

impl CountFormula {
    pub fn eval(&self, n: usize) -> usize {
        let n = n as f64;
        (self.coef * n.powf(self.n_power) * n.ln().powf(self.log_power)).round().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DesignConfig {
    /// Fixed-count NURHM: `per_size(n)` distinct uniform edges of every listed size.
    NurhmFixed { sizes: Vec<usize>, per_size: CountFormula },
    /// Bernoulli NURHM with explicit per-size rules (the same rules at every `n`).
    Nurhm { sizes: Vec<SizeSpec> },
    /// HSBM with inclusion probabilities proportional to `within` (per community)
    /// and `cross`, scaled so the expected edge count is `total(n)`.
    Hsbm {
        m: usize,
        community_fractions: Vec<f64>,
        within: Vec<f64>,
        cross: f64,
        total: CountFormula,
    },
    /// HSBM with a fixed number of edges per type: `total(n)` split by `shares`
    /// (one share per community, then the cross share).
    HsbmTypes {
        m: usize,
        community_fractions: Vec<f64>,
        shares: Vec<f64>,
        total: CountFormula,
    },
    /// The same explicit edge list (repeats allowed) in every replication.
    Explicit { edges: Vec<Vec<usize>> },
}

/// A design resolved at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvedDesign {
    Nurhm(NurhmConfig),
    Hsbm(HsbmConfig),
    Explicit(Vec<Edge>),
}

impl ResolvedDesign {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Edge>> {
        match self {
            Self::Nurhm(c) => sample_nurhm(c, rng),
            Self::Hsbm(c) => sample_hsbm(c, rng),
            Self::Explicit(edges) => Ok(edges.clone()),
        }
    }

    /// Items of the first community for block designs.
    pub fn first_community(&self) -> Option<Vec<usize>> {
        match self {
            Self::Nurhm(_) | Self::Explicit(_) => None,
            Self::Hsbm(c) => c.communities().first().map(|r| r.clone().collect()),
        }
    }
}

fn community_sizes(n: usize, fractions: &[f64]) -> Result<Vec<usize>> {
    if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0)) {
        return Err(Error::Config("community fractions must be positive".into()));
    }
    let total: f64 = fractions.iter().sum();
    let mut sizes: Vec<usize> = fractions.iter().map(|f| (f / total * n as f64).round() as usize).collect();
    let head: usize = sizes[..sizes.len() - 1].iter().sum();
    if head >= n {
        return Err(Error::Config(format!("community fractions leave no room at n = {n}")));
    }
    *sizes.last_mut().unwrap() = n - head;
    if sizes.contains(&0) {
        return Err(Error::Config(format!("empty community at n = {n}")));
    }
    Ok(sizes)
}

impl DesignConfig {
    pub fn resolve(&self, n: usize) -> Result<ResolvedDesign> {
        match self {
            Self::NurhmFixed { sizes, per_size } => {
                let count = per_size.eval(n);
                let config = NurhmConfig {
                    n,
                    sizes: sizes.iter().map(|&m| SizeSpec { m, rule: EdgeRule::FixedCount { count } }).collect(),
                };
                config.validate()?;
                Ok(ResolvedDesign::Nurhm(config))
            }
            Self::Nurhm { sizes } => {
                let config = NurhmConfig { n, sizes: sizes.clone() };
                config.validate()?;
                Ok(ResolvedDesign::Nurhm(config))
            }
            Self::Hsbm { m, community_fractions, within, cross, total } => {
                let community_sizes = community_sizes(n, community_fractions)?;
                if within.len() != community_sizes.len() {
                    return Err(Error::Config("one within weight per community".into()));
                }
                let mut config = HsbmConfig {
                    n,
                    m: *m,
                    community_sizes,
                    within: within.clone(),
                    cross: *cross,
                    fixed_counts: None,
                };
                let (wc, cc) = config.candidate_counts();
                let weighted: f64 =
                    wc.iter().zip(within).map(|(&c, &w)| c as f64 * w).sum::<f64>() + cc as f64 * cross;
                if !(weighted > 0.0) {
                    return Err(Error::Config("HSBM weights must not all vanish".into()));
                }
                let scale = total.eval(n) as f64 / weighted;
                config.within = within.iter().map(|w| w * scale).collect();
                config.cross = cross * scale;
                config.validate()?;
                Ok(ResolvedDesign::Hsbm(config))
            }
            Self::HsbmTypes { m, community_fractions, shares, total } => {
                let community_sizes = community_sizes(n, community_fractions)?;
                let k = community_sizes.len();
                if shares.len() != k + 1 || shares.iter().any(|s| !(*s >= 0.0)) {
                    return Err(Error::Config("one nonnegative share per community plus the cross share".into()));
                }
                let sum: f64 = shares.iter().sum();
                let t = total.eval(n) as f64;
                let counts: Vec<usize> = shares.iter().map(|s| (s / sum * t).round() as usize).collect();
                let config = HsbmConfig {
                    n,
                    m: *m,
                    community_sizes: community_sizes.clone(),
                    within: vec![0.0; k],
                    cross: 0.0,
                    fixed_counts: Some(HsbmCounts { within: counts[..k].to_vec(), cross: counts[k] }),
                };
                config.validate()?;
                let (wc, cc) = config.candidate_counts();
                for (&c, &cand) in counts.iter().zip(wc.iter().chain(std::iter::once(&cc))) {
                    if c as u128 > cand {
                        return Err(Error::Config(format!("{c} edges requested from {cand} candidates")));
                    }
                }
                Ok(ResolvedDesign::Hsbm(config))
            }
            Self::Explicit { edges } => {
                let edges = edges.iter().map(|e| Edge::new(e.clone())).collect::<Result<Vec<_>>>()?;
                if let Some(&k) = edges.iter().flat_map(|e| e.items()).find(|&&k| k >= n) {
                    return Err(Error::Config(format!("explicit edge item {k} out of range for n = {n}")));
                }
                Ok(ResolvedDesign::Explicit(edges))
            }
        }
    }

    /// Expected number of edges at `n`.
    pub fn expected_edges(&self, n: usize) -> Result<f64> {
        Ok(match self.resolve(n)? {
            ResolvedDesign::Nurhm(c) => c
                .sizes
                .iter()
                .map(|s| match s.rule {
                    EdgeRule::FixedCount { count } => count as f64,
                    EdgeRule::Constant { p } => p * binomial(n, s.m) as f64,
                    EdgeRule::Uniform { p, q } => 0.5 * (p + q) * binomial(n, s.m) as f64,
                })
                .sum(),
            ResolvedDesign::Explicit(edges) => edges.len() as f64,
            ResolvedDesign::Hsbm(c) => match &c.fixed_counts {
                Some(f) => (f.within.iter().sum::<usize>() + f.cross) as f64,
                None => {
                    let (wc, cc) = c.candidate_counts();
                    wc.iter().zip(&c.within).map(|(&k, &p)| k as f64 * p).sum::<f64>() + cc as f64 * c.cross
                }
            },
        })
    }
}
