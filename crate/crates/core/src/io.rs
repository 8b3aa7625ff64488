//! Dataset files: a long-format CSV `obs_id,rank,item` (rank 1 = best) and a
//! sidecar JSON `{"n": ..., "cutoffs": {obs_id: y}}`. An absent cutoff means y = m.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Observation};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: Option<usize>,
    #[serde(default)]
    pub cutoffs: BTreeMap<String, usize>,
}

#[derive(Debug, Deserialize)]
struct Row {
    obs_id: String,
    rank: usize,
    item: usize,
}

/// Sidecar path convention: `data.csv` -> `data.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Parses the long-format CSV. Observations keep first-appearance order.
pub fn read_dataset_csv<R: Read>(reader: R, meta: &DatasetMeta) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut ids: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, Vec<(usize, usize, u64)>> = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        let line = i as u64 + 2;
        let row = rec.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        if row.rank == 0 {
            return Err(Error::Data(format!("line {line}: rank must be >= 1")));
        }
        let entry = rows.entry(row.obs_id.clone()).or_insert_with(|| {
            ids.push(row.obs_id.clone());
            Vec::new()
        });
        entry.push((row.rank, row.item, line));
    }

    let max_item = rows.values().flatten().map(|&(_, k, _)| k).max();
    let n = match (meta.n, max_item) {
        (Some(n), _) => n,
        (None, Some(k)) => k + 1,
        (None, None) => 0,
    };

    let mut observations = Vec::with_capacity(ids.len());
    for id in &ids {
        let mut entries = rows.remove(id).unwrap_or_default();
        entries.sort_by_key(|&(r, _, _)| r);
        for (expected, &(rank, _, line)) in entries.iter().enumerate() {
            if rank != expected + 1 {
                return Err(Error::Data(format!(
                    "line {line}: observation {id} ranks must be 1..m without gaps or ties"
                )));
            }
        }
        let order: Vec<usize> = entries.iter().map(|&(_, k, _)| k).collect();
        let m = order.len();
        let y = meta.cutoffs.get(id).copied().unwrap_or(m);
        let obs = Observation::new(order, y)
            .map_err(|e| Error::Data(format!("observation {id}: {e}")))?;
        observations.push(obs);
    }
    Dataset::new(n, observations).map_err(|e| Error::Data(e.to_string()))
}

/// Writes observations with ids `0..N` and returns the matching sidecar.
pub fn write_dataset_csv<W: Write>(writer: W, dataset: &Dataset) -> Result<DatasetMeta> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["obs_id", "rank", "item"])?;
    let mut cutoffs = BTreeMap::new();
    for (i, obs) in dataset.observations().iter().enumerate() {
        for (r, k) in obs.order().iter().enumerate() {
            wtr.write_record([i.to_string(), (r + 1).to_string(), k.to_string()])?;
        }
        if obs.cutoff() != obs.size() {
            cutoffs.insert(i.to_string(), obs.cutoff());
        }
    }
    wtr.flush()?;
    Ok(DatasetMeta { n: Some(dataset.n()), cutoffs })
}

/// Loads `path` and its sidecar (if present).
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let side = sidecar_path(path);
    let meta = if side.exists() {
        serde_json::from_reader(File::open(&side)?)
            .map_err(|e| Error::Data(format!("{}: {e}", side.display())))?
    } else {
        DatasetMeta::default()
    };
    read_dataset_csv(File::open(path)?, &meta)
}

/// Writes `path` and its sidecar.
pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let meta = write_dataset_csv(File::create(path)?, dataset)?;
    let mut side = File::create(sidecar_path(path))?;
    serde_json::to_writer_pretty(&mut side, &meta)?;
    side.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_long_format_with_cutoffs() {
        let csv = "obs_id,rank,item\na,2,1\na,1,0\na,3,2\nb,1,2\nb,2,1\n";
        let meta = DatasetMeta { n: Some(4), cutoffs: [("a".to_string(), 1)].into() };
        let ds = read_dataset_csv(csv.as_bytes(), &meta).unwrap();
        assert_eq!(ds.n(), 4);
        assert_eq!(ds.observations()[0].order(), &[0, 1, 2]);
        assert_eq!(ds.observations()[0].cutoff(), 1);
        assert_eq!(ds.observations()[1].order(), &[2, 1]);
        assert_eq!(ds.observations()[1].cutoff(), 2);
    }

    #[test]
    fn rejects_gaps_and_ties() {
        let csv = "obs_id,rank,item\na,1,0\na,3,1\n";
        assert!(matches!(
            read_dataset_csv(csv.as_bytes(), &DatasetMeta::default()),
            Err(Error::Data(_))
        ));
        let csv = "obs_id,rank,item\na,1,0\na,1,1\n";
        assert!(read_dataset_csv(csv.as_bytes(), &DatasetMeta::default()).is_err());
        let csv = "obs_id,rank,item\na,1,0\na,2,x\n";
        let err = read_dataset_csv(csv.as_bytes(), &DatasetMeta::default()).unwrap_err();
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let ds = Dataset::new(
            5,
            vec![
                Observation::new(vec![3, 1, 4], 1).unwrap(),
                Observation::full(vec![0, 2]).unwrap(),
            ],
        )
        .unwrap();
        save_dataset(&path, &ds).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
    }
}
