use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use plantbridge::env::ENV_TRACE_HEADER;

use super::train::{AGGREGATE_HEADER, EPISODES_HEADER};
use crate::exit::{CmdResult, ExitCodeExt, DATA};
use crate::svg::{Band, Chart, Series};

const MEAN_COLOR: &str = "#08306b";
const BAND_COLOR: &str = "#6baed6";
const TARGET_COLOR: &str = "#d62728";
const PITCH_COLOR: &str = "#1f77b4";

/// Which kind of CSV the input is, decided from its header alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Schema {
    Aggregate,
    Episodes,
    Trace,
}

fn detect(header: &[&str]) -> Option<Schema> {
    let matches = |expected: &str| header.iter().copied().eq(expected.split(','));
    if matches(AGGREGATE_HEADER) {
        Some(Schema::Aggregate)
    } else if matches(EPISODES_HEADER) {
        Some(Schema::Episodes)
    } else if header.len() >= ENV_TRACE_HEADER.len() && header[..ENV_TRACE_HEADER.len()] == ENV_TRACE_HEADER {
        Some(Schema::Trace)
    } else {
        None
    }
}

/// Renders a training return curve or an evaluation trace to SVG.
pub fn run(input: &Path, output: &Path) -> CmdResult {
    let svg = render(input).exit_code(DATA)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(output, svg)?;
    println!("wrote {}", output.display());
    Ok(())
}

fn render(input: &Path) -> anyhow::Result<String> {
    let mut reader = csv::Reader::from_path(input).with_context(|| format!("reading {}", input.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() {
        return Err(anyhow!("{}: empty file", input.display()));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let schema = detect(&header_refs).ok_or_else(|| {
        anyhow!("{}: unrecognized columns `{}`", input.display(), header.join(","))
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| anyhow!("{}: row {} is not all finite numbers", input.display(), i + 2))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(anyhow!("{}: no data rows", input.display()));
    }
    Ok(match schema {
        Schema::Aggregate => {
            let x: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            let runs = rows[0][4];
            returns_chart(x, rows.iter().map(|r| (r[1], r[2], r[3])).collect(), runs as usize)
        }
        Schema::Episodes => {
            // Group by episode number across runs.
            let mut by_episode: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
            for r in &rows {
                by_episode.entry(r[1] as u64).or_default().push(r[2]);
            }
            let runs = by_episode.values().map(Vec::len).max().unwrap_or(0);
            let x = by_episode.keys().map(|&e| e as f64).collect();
            let stats = by_episode
                .values()
                .map(|v| {
                    let mean = v.iter().sum::<f64>() / v.len() as f64;
                    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
                    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (mean, min, max)
                })
                .collect();
            returns_chart(x, stats, runs)
        }
        Schema::Trace => trace_chart(&rows),
    })
}

fn returns_chart(x: Vec<f64>, stats: Vec<(f64, f64, f64)>, runs: usize) -> String {
    let title = format!("Episode return over {runs} run{}", if runs == 1 { "" } else { "s" });
    Chart {
        title: &title,
        x_label: "episode",
        y_label: "episode return",
        bands: vec![Band {
            label: "min / max",
            color: BAND_COLOR,
            x: x.clone(),
            lower: stats.iter().map(|s| s.1).collect(),
            upper: stats.iter().map(|s| s.2).collect(),
        }],
        series: vec![Series {
            label: "mean",
            color: MEAN_COLOR,
            points: x.into_iter().zip(stats.iter().map(|s| s.0)).collect(),
            steps: false,
        }],
    }
    .render()
}

fn trace_chart(rows: &[Vec<f64>]) -> String {
    let deg = 180.0 / std::f64::consts::PI;
    Chart {
        title: "Target and pitch",
        x_label: "time [s]",
        y_label: "angle [deg]",
        bands: vec![],
        series: vec![
            Series {
                label: "target",
                color: TARGET_COLOR,
                points: rows.iter().map(|r| (r[0], r[1] * deg)).collect(),
                steps: true,
            },
            Series {
                label: "pitch",
                color: PITCH_COLOR,
                points: rows.iter().map(|r| (r[0], r[2] * deg)).collect(),
                steps: false,
            },
        ],
    }
    .render()
}
