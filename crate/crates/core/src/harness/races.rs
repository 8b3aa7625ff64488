//! Race-results ingestion: one full ranking per race after removing horses
//! with too few starts or with identical outcomes in every start.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Observation};

pub const DEFAULT_MIN_RACES: usize = 10;

/// One row of a race-results file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceRecord {
    pub race_id: String,
    pub horse_id: String,
    /// 1 is the winner.
    pub finish_position: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub input_rows: usize,
    pub input_horses: usize,
    pub input_races: usize,
    pub removed_few_races: usize,
    pub removed_all_wins: usize,
    pub removed_all_losses: usize,
    pub dropped_races: usize,
    /// Filtering passes until nothing changed.
    pub passes: usize,
    pub horses: usize,
    pub races: usize,
    /// Original horse id of every dense item index.
    pub horse_ids: Vec<String>,
    /// Original race id of every observation.
    pub race_ids: Vec<String>,
}

fn column(headers: &csv::StringRecord, names: &[&str]) -> Result<usize> {
    headers
        .iter()
        .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
        .ok_or_else(|| Error::Data(format!("missing column '{}'", names[0])))
}

/// Parses `race_id,horse_id,finish_position` rows (`result` is accepted for
/// the position column; other columns are ignored).
pub fn read_race_records<R: Read>(reader: R) -> Result<Vec<RaceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let race_col = column(&headers, &["race_id"])?;
    let horse_col = column(&headers, &["horse_id"])?;
    let pos_col = column(&headers, &["finish_position", "result"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize, name: &str| {
            rec.get(i)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::Data(format!("line {line}: missing {name}")))
        };
        let race_id = field(race_col, "race_id")?.to_string();
        let horse_id = field(horse_col, "horse_id")?.to_string();
        let pos = field(pos_col, "finish_position")?;
        let finish_position = pos
            .parse::<u32>()
            .ok()
            .filter(|&p| p >= 1)
            .ok_or_else(|| Error::Data(format!("line {line}: invalid finish position '{pos}'")))?;
        out.push(RaceRecord { race_id, horse_id, finish_position });
    }
    Ok(out)
}

/// Builds the filtered dataset from parsed records.
pub fn build_race_dataset(records: &[RaceRecord], min_races: usize) -> Result<(Dataset, IngestReport)> {
    let mut race_index: HashMap<&str, usize> = HashMap::new();
    let mut horse_index: HashMap<&str, usize> = HashMap::new();
    let mut race_names = Vec::new();
    let mut horse_names = Vec::new();
    // (position, horse, row) per race
    let mut entries: Vec<Vec<(u32, usize, usize)>> = Vec::new();
    for (row, r) in records.iter().enumerate() {
        let race = *race_index.entry(&r.race_id).or_insert_with(|| {
            race_names.push(r.race_id.clone());
            entries.push(Vec::new());
            race_names.len() - 1
        });
        let horse = *horse_index.entry(&r.horse_id).or_insert_with(|| {
            horse_names.push(r.horse_id.clone());
            horse_names.len() - 1
        });
        entries[race].push((r.finish_position, horse, row));
    }
    let mut races: Vec<Vec<usize>> = Vec::with_capacity(entries.len());
    for (race, list) in entries.iter_mut().enumerate() {
        list.sort_unstable();
        for w in list.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Data(format!(
                    "race '{}': finish position {} appears twice (data rows {} and {})",
                    race_names[race],
                    w[0].0,
                    w[0].2 + 1,
                    w[1].2 + 1
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for &(_, h, row) in list.iter() {
            if !seen.insert(h) {
                return Err(Error::Data(format!(
                    "race '{}': horse '{}' listed twice (data row {})",
                    race_names[race],
                    horse_names[h],
                    row + 1
                )));
            }
        }
        races.push(list.iter().map(|&(_, h, _)| h).collect());
    }

    let mut report = IngestReport {
        input_rows: records.len(),
        input_horses: horse_names.len(),
        input_races: race_names.len(),
        removed_few_races: 0,
        removed_all_wins: 0,
        removed_all_losses: 0,
        dropped_races: 0,
        passes: 0,
        horses: 0,
        races: 0,
        horse_ids: Vec::new(),
        race_ids: Vec::new(),
    };
    let mut alive_race: Vec<bool> = races.iter().map(|r| r.len() >= 2).collect();
    report.dropped_races += alive_race.iter().filter(|a| !**a).count();
    let mut alive_horse = vec![true; horse_names.len()];
    loop {
        report.passes += 1;
        let mut starts = vec![0usize; horse_names.len()];
        let mut wins = vec![0usize; horse_names.len()];
        let mut lasts = vec![0usize; horse_names.len()];
        for (r, race) in races.iter().enumerate().filter(|(r, _)| alive_race[*r]) {
            let _ = r;
            for &h in race {
                starts[h] += 1;
            }
            wins[race[0]] += 1;
            lasts[race[race.len() - 1]] += 1;
        }
        let mut changed = false;
        for h in 0..horse_names.len() {
            if !alive_horse[h] {
                continue;
            }
            if starts[h] == 0 || starts[h] < min_races {
                report.removed_few_races += 1;
            } else if wins[h] == starts[h] {
                report.removed_all_wins += 1;
            } else if lasts[h] == starts[h] {
                report.removed_all_losses += 1;
            } else {
                continue;
            }
            alive_horse[h] = false;
            changed = true;
        }
        if !changed {
            break;
        }
        for (r, race) in races.iter_mut().enumerate() {
            if !alive_race[r] {
                continue;
            }
            race.retain(|&h| alive_horse[h]);
            if race.len() < 2 {
                alive_race[r] = false;
                report.dropped_races += 1;
            }
        }
    }

    let mut dense = vec![usize::MAX; horse_names.len()];
    let mut observations = Vec::new();
    for (r, race) in races.iter().enumerate().filter(|(r, _)| alive_race[*r]) {
        let order: Vec<usize> = race
            .iter()
            .map(|&h| {
                if dense[h] == usize::MAX {
                    dense[h] = report.horse_ids.len();
                    report.horse_ids.push(horse_names[h].clone());
                }
                dense[h]
            })
            .collect();
        observations.push(Observation::full(order)?);
        report.race_ids.push(race_names[r].clone());
    }
    report.horses = report.horse_ids.len();
    report.races = observations.len();
    Ok((Dataset::new(report.horses, observations)?, report))
}

/// Reads and filters a race-results file; see [`build_race_dataset`].
pub fn ingest_races(path: &Path, min_races: usize) -> Result<(Dataset, IngestReport)> {
    let file = std::fs::File::open(path)?;
    let records = read_race_records(file)?;
    build_race_dataset(&records, min_races)
}
