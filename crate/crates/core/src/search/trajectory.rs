use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEntry {
    pub id: String,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    /// 1-based batch number. The batch was selected with the posteriors of
    /// snapshot `round - 1`.
    pub round: usize,
    pub id: String,
    pub pi: f64,
    pub arm_score: Option<f64>,
    pub label: bool,
}

/// Every reviewed instance in review order: seeds first, then batches.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seeds: Vec<SeedEntry>,
    pub entries: Vec<TrajectoryEntry>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.seeds.len() + self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reviewed ids with their labels, seeds first.
    pub fn reviews(&self) -> impl Iterator<Item = (&str, bool)> + '_ {
        self.seeds
            .iter()
            .map(|s| (s.id.as_str(), s.label))
            .chain(self.entries.iter().map(|e| (e.id.as_str(), e.label)))
    }

    /// `round \t doc_id \t pi \t arm_score \t label`. Seeds are written as
    /// round 0 with `-` for the scores; a missing arm score is also `-`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for s in &self.seeds {
            writeln!(out, "0\t{}\t-\t-\t{}", s.id, u8::from(s.label))?;
        }
        for e in &self.entries {
            let arm = e.arm_score.map_or_else(|| "-".to_string(), |a| a.to_string());
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e.round,
                e.id,
                e.pi,
                arm,
                u8::from(e.label)
            )?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut t = Trajectory::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |message: &str| CorpusError::Parse {
                line: n + 1,
                message: message.to_string(),
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            let round: usize = f[0].parse().map_err(|_| bad("bad round"))?;
            let label = match f[4] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("label must be 0 or 1")),
            };
            if round == 0 {
                t.seeds.push(SeedEntry {
                    id: f[1].to_string(),
                    label,
                });
                continue;
            }
            let arm_score = match f[3] {
                "-" => None,
                v => Some(v.parse().map_err(|_| bad("bad arm score"))?),
            };
            t.entries.push(TrajectoryEntry {
                round,
                id: f[1].to_string(),
                pi: f[2].parse().map_err(|_| bad("bad pi"))?,
                arm_score,
                label,
            });
        }
        Ok(t)
    }
}
