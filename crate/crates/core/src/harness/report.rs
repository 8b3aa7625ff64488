//! Ranked summary table of fitted utilities with their intervals.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::FitResult;
use crate::inference::InferenceReport;
use crate::model::Dataset;

/// Column names of the ranked table.
pub const RANK_COLUMNS: [&str; 6] = ["id", "races", "average_place", "estimate", "confidence_interval", "rank"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    pub item: usize,
    /// Number of comparisons containing the item.
    pub races: usize,
    /// Mean 1-based finishing place over those comparisons.
    pub average_place: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub level: f64,
    pub rows: Vec<RankRow>,
}

/// Top `top_k` items by estimate (descending; ties by ascending item id).
pub fn rank_report(fit: &FitResult, inference: &InferenceReport, data: &Dataset, top_k: usize) -> Result<RankTable> {
    let n = data.n();
    fit.estimate.check_len(n)?;
    if inference.items.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: inference.items.len() });
    }
    let mut place_sum = vec![0usize; n];
    let mut races = vec![0usize; n];
    for obs in data.observations() {
        for (pos, &k) in obs.order().iter().enumerate() {
            place_sum[k] += pos + 1;
            races[k] += 1;
        }
    }
    let u = fit.estimate.values();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then(a.cmp(&b)));
    let rows = order
        .into_iter()
        .take(top_k)
        .enumerate()
        .map(|(i, k)| RankRow {
            rank: i + 1,
            item: k,
            races: races[k],
            average_place: if races[k] > 0 { place_sum[k] as f64 / races[k] as f64 } else { f64::NAN },
            estimate: u[k],
            ci_low: inference.items[k].ci_low,
            ci_high: inference.items[k].ci_high,
        })
        .collect();
    Ok(RankTable { level: inference.level, rows })
}

impl RankTable {
    /// CSV with [`RANK_COLUMNS`]; `labels` maps item indices to display ids.
    pub fn write_csv<W: Write>(&self, writer: W, labels: Option<&[String]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(RANK_COLUMNS)?;
        for r in &self.rows {
            let id = labels.and_then(|l| l.get(r.item).cloned()).unwrap_or_else(|| r.item.to_string());
            w.write_record([
                id,
                r.races.to_string(),
                format!("{:.3}", r.average_place),
                format!("{:.3}", r.estimate),
                format!("({:.3}, {:.3})", r.ci_low, r.ci_high),
                r.rank.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_qmle, FitConfig};
    use crate::inference::{standard_errors, DEFAULT_COST_BUDGET};
    use crate::model::Observation;

    #[test]
    fn two_items_winner_first() {
        let obs = [vec![1, 0], vec![1, 0], vec![0, 1]];
        let data = Dataset::new(2, obs.iter().map(|o| Observation::full(o.clone()).unwrap()).collect()).unwrap();
        let fit = fit_qmle(&data, &FitConfig::default()).unwrap();
        let inf = standard_errors(&fit, &data, 0.95, DEFAULT_COST_BUDGET).unwrap();
        let table = rank_report(&fit, &inf, &data, 10).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].item, 1);
        assert_eq!(table.rows[0].races, 3);
        assert!((table.rows[0].average_place - 4.0 / 3.0).abs() < 1e-15);
        let mut buf = Vec::new();
        table.write_csv(&mut buf, Some(&["x".into(), "y".into()])).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("id,races,average_place,estimate,confidence_interval,rank\ny,3,1.333,"));
    }

    #[test]
    fn ties_break_by_item_id() {
        let data = Dataset::new(3, vec![Observation::full(vec![0, 1, 2]).unwrap(), Observation::full(vec![2, 1, 0]).unwrap()])
            .unwrap();
        let fit = fit_qmle(&data, &FitConfig::default()).unwrap();
        let mut fit = fit;
        fit.estimate = crate::model::UtilityVector::zeros(3);
        let inf = standard_errors(&fit, &data, 0.95, DEFAULT_COST_BUDGET).unwrap();
        let table = rank_report(&fit, &inf, &data, 3).unwrap();
        let items: Vec<usize> = table.rows.iter().map(|r| r.item).collect();
        assert_eq!(items, vec![0, 1, 2]);
    }
}
