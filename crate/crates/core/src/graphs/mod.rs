//! Comparison hypergraphs: random generators and structural diagnostics.

mod generate;
mod spectral;
mod topology;

pub use generate::{
    binomial, sample_hsbm, sample_nurhm, sample_uniform_edges, EdgeRule, HsbmConfig, HsbmCounts, NurhmConfig,
    SizeSpec, CANDIDATE_ENUMERATION_CAP,
};
pub use spectral::{
    expected_negative_hessian, spectral_diagnostics, spectral_diagnostics_edges, SpectralOptions, SpectralReport,
    DENSE_CAP,
};
pub use topology::{
    boundary_edges, degree_stats, gamma_re, is_connected, modified_cheeger, r_ratio, re_chain_sum, shared_edges,
    DegreeStats, DEFAULT_CHEEGER_CAP, DEFAULT_GAMMA_RE_CAP,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimators::EstimatorKind;
use crate::model::{Dataset, UtilityVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDiagnostics {
    pub n: usize,
    pub edges: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub r_ratio: f64,
    pub connected: bool,
    pub cheeger: Option<f64>,
    pub s_gap: Option<f64>,
    pub lambda2_leave: Option<f64>,
    pub gamma_re: Option<f64>,
}

/// Which of the expensive diagnostics to compute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsOptions {
    pub exact_cheeger: bool,
    pub cheeger_cap: usize,
    pub gamma_re: bool,
    pub gamma_re_cap: usize,
    pub spectral: bool,
    pub spectral_options: SpectralOptions,
    pub kind: EstimatorKind,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            exact_cheeger: false,
            cheeger_cap: DEFAULT_CHEEGER_CAP,
            gamma_re: false,
            gamma_re_cap: DEFAULT_GAMMA_RE_CAP,
            spectral: true,
            spectral_options: SpectralOptions::default(),
            kind: EstimatorKind::FULL,
        }
    }
}

/// Collects the requested diagnostics; spectral quantities are skipped
/// (left `None`) when the design is disconnected.
pub fn graph_diagnostics(data: &Dataset, u: &UtilityVector, options: &DiagnosticsOptions) -> Result<GraphDiagnostics> {
    let n = data.n();
    let edges = data.edges();
    let degrees = degree_stats(&edges, n)?;
    let connected = is_connected(&edges, n);
    let cheeger = if options.exact_cheeger { Some(modified_cheeger(&edges, n, options.cheeger_cap)?) } else { None };
    let gamma = if options.gamma_re && connected { Some(gamma_re(&edges, n, options.gamma_re_cap)?) } else { None };
    let (s_gap, lambda2_leave) = if options.spectral && connected && n >= 2 {
        let r = spectral_diagnostics(data, u, options.kind, &options.spectral_options)?;
        (Some(r.s_gap), r.lambda2_leave)
    } else {
        (None, None)
    };
    Ok(GraphDiagnostics {
        n,
        edges: edges.len(),
        n_min: degrees.min,
        n_max: degrees.max,
        r_ratio: r_ratio(&edges, n)?,
        connected,
        cheeger,
        s_gap,
        lambda2_leave,
        gamma_re: gamma,
    })
}
