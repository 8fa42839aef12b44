//! The results matrix: (env, victim) rows by timer columns.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cell::{evaluate_cell, obtain_victim, row_seed, CellResult, EpisodeRecord};
use super::config::ExperimentConfig;
use super::episode::TimerKind;
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::noise::NoiseName;
use crate::victims::Algo;

/// A cell either evaluated or failed with a message.
pub type CellEntry = std::result::Result<CellResult, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub env: EnvKind,
    pub algo: Algo,
    pub cells: BTreeMap<TimerKind, CellEntry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub rows: Vec<TableRow>,
}

/// Every (env, algo) pair, env-major.
pub fn all_rows() -> Vec<(EnvKind, Algo)> {
    EnvKind::ALL
        .iter()
        .flat_map(|&env| Algo::ALL.iter().map(move |&algo| (env, algo)))
        .collect()
}

/// Evaluates every column for each requested row. A row whose victim cannot
/// be obtained gets the error in every cell.
pub fn build_table(cfg: &ExperimentConfig, rows: &[(EnvKind, Algo)]) -> ResultsTable {
    let rows = rows
        .par_iter()
        .map(|&(env, algo)| {
            let seed = row_seed(cfg.env.seed, env, algo);
            let cells = match obtain_victim(cfg, env, algo) {
                Ok(victim) => TimerKind::ALL
                    .par_iter()
                    .map(|&timer| {
                        let entry = evaluate_cell(cfg, env, victim.as_victim(), timer, seed).map_err(|e| e.to_string());
                        (timer, entry)
                    })
                    .collect(),
                Err(e) => TimerKind::ALL.iter().map(|&t| (t, Err(e.to_string()))).collect(),
            };
            TableRow { env, algo, cells }
        })
        .collect();
    ResultsTable { rows }
}

impl ResultsTable {
    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.cells.values().any(|c| c.is_err()))
    }

    pub fn cell(&self, env: EnvKind, algo: Algo, timer: TimerKind) -> Option<&CellEntry> {
        self.rows
            .iter()
            .find(|r| r.env == env && r.algo == algo)
            .and_then(|r| r.cells.get(&timer))
    }

    /// Aligned markdown with `mean±std` cells.
    pub fn to_markdown(&self) -> String {
        let mut header = vec!["env".to_string(), "victim".to_string()];
        header.extend(TimerKind::ALL.iter().map(|t| t.name().to_string()));
        let mut lines: Vec<Vec<String>> = vec![header];
        for row in &self.rows {
            let mut line = vec![row.env.to_string(), row.algo.to_string()];
            for timer in TimerKind::ALL {
                line.push(match row.cells.get(&timer) {
                    Some(Ok(cell)) => cell.display(),
                    Some(Err(_)) => "error".to_string(),
                    None => "-".to_string(),
                });
            }
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let render = |line: &[String]| {
            let padded: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count())))
                .collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = render(&lines[0]);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
        for line in &lines[1..] {
            out.push_str(&render(line));
        }
        for row in &self.rows {
            for (timer, cell) in &row.cells {
                if let Err(msg) = cell {
                    out.push_str(&format!("\n{} {} {}: {msg}", row.env, row.algo, timer));
                }
            }
        }
        out
    }

    /// One line per episode; failed cells are a single line carrying the
    /// error. Values are written in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            for (&timer, cell) in &row.cells {
                match cell {
                    Ok(cell) => {
                        for e in &cell.episodes {
                            w.serialize(CsvLine {
                                env: row.env,
                                algo: row.algo,
                                timer,
                                noise: e.noise,
                                episode: Some(e.episode),
                                ret: Some(e.ret),
                                attacks: Some(e.attacks),
                                frames: Some(e.frames),
                                error: None,
                            })?;
                        }
                    }
                    Err(msg) => w.serialize(CsvLine {
                        env: row.env,
                        algo: row.algo,
                        timer,
                        noise: None,
                        episode: None,
                        ret: None,
                        attacks: None,
                        frames: None,
                        error: Some(msg.clone()),
                    })?,
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut table = ResultsTable::default();
        for line in csv::Reader::from_reader(input).deserialize::<CsvLine>() {
            let line = line?;
            let needs_row = table.rows.last().is_none_or(|r| (r.env, r.algo) != (line.env, line.algo));
            if needs_row {
                table.rows.push(TableRow {
                    env: line.env,
                    algo: line.algo,
                    cells: BTreeMap::new(),
                });
            }
            let row = table.rows.last_mut().expect("row pushed above");
            if let Some(msg) = line.error {
                row.cells.insert(line.timer, Err(msg));
                continue;
            }
            let missing = |field: &str| Error::Config(format!("results line for {} lacks `{field}`", line.timer));
            let record = EpisodeRecord {
                noise: line.noise,
                episode: line.episode.ok_or_else(|| missing("episode"))?,
                ret: line.ret.ok_or_else(|| missing("return"))?,
                attacks: line.attacks.ok_or_else(|| missing("attacks"))?,
                frames: line.frames.ok_or_else(|| missing("frames"))?,
            };
            match row.cells.entry(line.timer).or_insert_with(|| Ok(CellResult::default())) {
                Ok(cell) => cell.episodes.push(record),
                Err(_) => return Err(Error::Config(format!("episode line after error line for {}", line.timer))),
            }
        }
        Ok(table)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvLine {
    env: EnvKind,
    algo: Algo,
    timer: TimerKind,
    noise: Option<NoiseName>,
    episode: Option<usize>,
    #[serde(rename = "return")]
    ret: Option<f64>,
    attacks: Option<usize>,
    frames: Option<usize>,
    error: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_table() -> ResultsTable {
        let cell = |rets: &[f64], noise| CellResult {
            episodes: rets
                .iter()
                .enumerate()
                .map(|(i, &ret)| EpisodeRecord {
                    noise,
                    episode: i,
                    ret,
                    attacks: i,
                    frames: 300,
                })
                .collect(),
        };
        let mut rows = Vec::new();
        for (env, algo) in all_rows() {
            let mut cells = BTreeMap::new();
            cells.insert(TimerKind::None, Ok(cell(&[12.0, 0.1 + 0.2], None)));
            cells.insert(TimerKind::Random, Ok(cell(&[1.0 / 3.0, -2.5], Some(NoiseName::Fgsm))));
            cells.insert(TimerKind::Wma, Err("victim diverged, \"quoted\"".to_string()));
            cells.insert(TimerKind::Pepg, Ok(cell(&[f64::MIN_POSITIVE], Some(NoiseName::Gaussian))));
            cells.insert(TimerKind::Lin, Ok(cell(&[0.9, 5.5], Some(NoiseName::ZeroOut))));
            rows.push(TableRow { env, algo, cells });
        }
        ResultsTable { rows }
    }

    #[test]
    fn shape_is_six_by_five() {
        let t = sample_table();
        assert_eq!(t.rows.len(), 6);
        assert!(t.rows.iter().all(|r| r.cells.len() == 5));
        assert!(t.has_errors());
    }

    #[test]
    fn csv_round_trips() {
        let t = sample_table();
        let mut bytes = Vec::new();
        t.write_csv(&mut bytes).unwrap();
        let back = ResultsTable::read_csv(bytes.as_slice()).unwrap();
        assert_eq!(back, t);
        let mut again = Vec::new();
        back.write_csv(&mut again).unwrap();
        assert_eq!(again, bytes);
    }

    #[test]
    fn markdown_cells_and_alignment() {
        let md = sample_table().to_markdown();
        let lines: Vec<&str> = md.lines().take(8).collect();
        assert!(lines[0].starts_with("| env "));
        assert!(lines[2].contains("3.2±2.3"));
        assert!(lines[2].contains("error"));
        let width = lines[0].chars().count();
        assert!(lines.iter().all(|l| l.chars().count() == width));
    }
}
