//! Result files: per-episode CSVs, text summaries and SVG charts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::campaign::{Campaign, CellResult, Sweep};
use super::svg::{Chart, Series};
use crate::agents::EpisodeRecord;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "episode,reward_total,reward_mean,violations,mean_t_total,epsilon";

/// Serializes records as RFC 4180 CSV with the fixed header.
pub fn records_to_csv(records: &[EpisodeRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(|e| Error::config("csv", e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::config("csv", e.to_string()))
}

fn cell_file_name(cell: &CellResult) -> String {
    match cell.t_require_s {
        None => format!("{}_seed{}.csv", cell.algorithm.name(), cell.seed),
        Some(t) => format!("{}_t{t:.2}_seed{}.csv", cell.algorithm.name(), cell.seed),
    }
}

fn check_cells(cells: &[CellResult]) -> Result<()> {
    if cells.is_empty() || cells.iter().any(|c| c.records.is_empty()) {
        return Err(Error::NoRecords);
    }
    Ok(())
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<PathBuf> {
    fs::write(&path, bytes).map_err(|e| Error::io("writing output", &path, e))?;
    Ok(path)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io("creating output directory", dir, e))
}

fn summary_text(c: &Campaign) -> String {
    let s = &c.summary;
    let mut seeds: Vec<u64> = c.cells.iter().map(|c| c.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let mut out = String::new();
    let _ = writeln!(out, "episodes: {}", s.episodes);
    let _ = writeln!(out, "seeds: {seeds:?}");
    let _ = writeln!(
        out,
        "convergence: first episode whose {}-episode moving average of the seed-mean per-step reward reaches {}% of the final plateau",
        s.window,
        s.convergence_fraction * 100.0
    );
    let _ = writeln!(out, "final average: mean per-step reward over the last {} episodes", s.final_window);
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<10} {:>12} {:>9} {:>10} {:>10} {:>10}  per-seed convergence",
        "algorithm", "convergence", "plateau", "final_avg", "final_tot", "overall"
    );
    for a in &s.algorithms {
        let per_seed: Vec<String> = a.per_seed_convergence.iter().map(|(seed, ep)| format!("{seed}:{ep}")).collect();
        let steps = c
            .cells
            .iter()
            .find(|x| x.algorithm == a.algorithm)
            .and_then(|x| x.records.first())
            .map_or(f64::NAN, |r| r.reward_total / r.reward_mean);
        let _ = writeln!(
            out,
            "{:<10} {:>12} {:>9.3} {:>10.3} {:>10.1} {:>10.3}  {}",
            a.algorithm.label(),
            a.convergence_episode,
            a.plateau,
            a.final_average,
            a.final_average * steps,
            a.overall_average,
            per_seed.join(" ")
        );
    }
    out
}

/// Writes one CSV per cell, `summary.txt` and `convergence.svg` into
/// `out_dir`. Nothing is written if any cell has no records.
pub fn emit_outputs(c: &Campaign, out_dir: &Path) -> Result<Vec<PathBuf>> {
    check_cells(&c.cells)?;
    let csvs: Vec<(String, Vec<u8>)> = c
        .cells
        .iter()
        .map(|cell| Ok((cell_file_name(cell), records_to_csv(&cell.records)?)))
        .collect::<Result<_>>()?;
    let chart = Chart {
        title: "Average reward (moving average, seed mean)".into(),
        x_label: "Episode".into(),
        y_label: "Average reward per step".into(),
        series: c
            .summary
            .algorithms
            .iter()
            .map(|a| Series {
                label: a.algorithm.label().into(),
                points: a
                    .moving_average
                    .iter()
                    .enumerate()
                    .map(|(i, v)| ((i + a.mean_reward.len() + 1 - a.moving_average.len()) as f64, *v))
                    .collect(),
            })
            .collect(),
        markers: false,
    };

    create_dir(out_dir)?;
    let mut written = Vec::new();
    for (name, bytes) in csvs {
        written.push(write(out_dir.join(name), &bytes)?);
    }
    written.push(write(out_dir.join("summary.txt"), summary_text(c).as_bytes())?);
    written.push(write(out_dir.join("convergence.svg"), chart.render().as_bytes())?);
    Ok(written)
}

fn sweep_csv(s: &Sweep) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t_require_s".to_string()];
    header.extend(s.table.algorithms.iter().map(|a| a.name().to_string()));
    w.write_record(&header).map_err(|e| Error::config("csv", e.to_string()))?;
    for row in &s.table.rows {
        let mut rec = vec![row.t_require_s.to_string()];
        rec.extend(row.rewards.iter().map(|r| r.to_string()));
        w.write_record(&rec).map_err(|e| Error::config("csv", e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::config("csv", e.to_string()))
}

/// Writes the sweep table (`sweep.csv`, `sweep_summary.txt`), the
/// `requirement.svg` chart and per-cell CSVs under `out_dir/sweep_runs`.
pub fn emit_sweep(s: &Sweep, out_dir: &Path) -> Result<Vec<PathBuf>> {
    check_cells(&s.cells)?;
    let csvs: Vec<(String, Vec<u8>)> = s
        .cells
        .iter()
        .map(|cell| Ok((cell_file_name(cell), records_to_csv(&cell.records)?)))
        .collect::<Result<_>>()?;
    let table = sweep_csv(s)?;
    let mut text = String::from("final average per-step reward by fixed latency requirement\n\n");
    let _ = write!(text, "{:>12}", "t_require_s");
    for a in &s.table.algorithms {
        let _ = write!(text, " {:>9}", a.label());
    }
    text.push('\n');
    for row in &s.table.rows {
        let _ = write!(text, "{:>12.3}", row.t_require_s);
        for r in &row.rewards {
            let _ = write!(text, " {r:>9.3}");
        }
        text.push('\n');
    }
    let chart = Chart {
        title: "Average reward vs. latency requirement".into(),
        x_label: "Latency requirement (s)".into(),
        y_label: "Average reward per step".into(),
        series: s
            .table
            .algorithms
            .iter()
            .map(|a| Series {
                label: a.label().into(),
                points: s
                    .table
                    .rows
                    .iter()
                    .zip(s.table.column(*a).unwrap_or_default())
                    .map(|(row, v)| (row.t_require_s, v))
                    .collect(),
            })
            .collect(),
        markers: true,
    };

    let runs = out_dir.join("sweep_runs");
    create_dir(&runs)?;
    let mut written = Vec::new();
    for (name, bytes) in csvs {
        written.push(write(runs.join(name), &bytes)?);
    }
    written.push(write(out_dir.join("sweep.csv"), &table)?);
    written.push(write(out_dir.join("sweep_summary.txt"), text.as_bytes())?);
    written.push(write(out_dir.join("requirement.svg"), chart.render().as_bytes())?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Algorithm;
    use crate::harness::campaign::CampaignSummary;

    fn record(episode: usize) -> EpisodeRecord {
        EpisodeRecord {
            episode,
            reward_total: 1997.0,
            reward_mean: 19.97,
            violations: 1,
            mean_t_total: 1.25,
            epsilon: 0.5,
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let bytes = records_to_csv(&[record(1), record(2)]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "1,1997.0,19.97,1,1.25,0.5");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn empty_records_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let c = Campaign {
            cells: vec![CellResult {
                algorithm: Algorithm::Rm,
                seed: 1,
                t_require_s: None,
                records: vec![],
            }],
            summary: CampaignSummary {
                episodes: 0,
                window: 50,
                convergence_fraction: 0.95,
                final_window: 100,
                algorithms: vec![],
            },
        };
        assert!(matches!(emit_outputs(&c, &out), Err(Error::NoRecords)));
        assert!(!out.exists());
    }
}
