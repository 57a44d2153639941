//! CSV and JSON writers.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::harness::aggregate::Summary;
use crate::harness::config::RunConfig;
use crate::harness::episode::{RegretReport, Trace};

/// One run-level CSV line; `None` cells are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub seed: u64,
    pub algo: String,
    pub arms: usize,
    pub rounds: usize,
    pub total_delay: usize,
    pub d_star: usize,
    pub tilde_d: Option<usize>,
    pub skips: Option<usize>,
    pub regret: f64,
    pub bound_cor1: Option<f64>,
    pub bound_cor2: Option<f64>,
    pub bound_skip: Option<f64>,
    pub bound_thm4_worst: Option<f64>,
    pub bound_thm4_bestarm: Option<f64>,
}

impl From<&RegretReport> for CsvRow {
    fn from(r: &RegretReport) -> Self {
        Self {
            seed: r.seed,
            algo: r.algo.to_string(),
            arms: r.arms,
            rounds: r.rounds,
            total_delay: r.total_delay,
            d_star: r.d_star,
            tilde_d: r.tilde_d,
            skips: r.skips,
            regret: r.regret,
            bound_cor1: r.bounds.cor1,
            bound_cor2: r.bounds.cor2,
            bound_skip: r.bounds.skip,
            bound_thm4_worst: r.bounds.thm4_worst,
            bound_thm4_bestarm: r.bounds.thm4_bestarm,
        }
    }
}

pub const CSV_HEADER: &str = "seed,algo,K,T,D,d_star,tilde_D,skips,regret,bound_cor1,bound_cor2,bound_skip,bound_thm4_worst,bound_thm4_bestarm";

pub fn write_reports_csv<W: Write>(out: W, reports: &[RegretReport]) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER.split(','))?;
    for r in reports {
        writer.write_record(record(CsvRow::from(r)))?;
    }
    writer.flush()?;
    Ok(())
}

fn record(row: CsvRow) -> [String; 14] {
    let cell = |v: Option<String>| v.unwrap_or_default();
    [
        row.seed.to_string(),
        row.algo,
        row.arms.to_string(),
        row.rounds.to_string(),
        row.total_delay.to_string(),
        row.d_star.to_string(),
        cell(row.tilde_d.map(|v| v.to_string())),
        cell(row.skips.map(|v| v.to_string())),
        row.regret.to_string(),
        cell(row.bound_cor1.map(|v| v.to_string())),
        cell(row.bound_cor2.map(|v| v.to_string())),
        cell(row.bound_skip.map(|v| v.to_string())),
        cell(row.bound_thm4_worst.map(|v| v.to_string())),
        cell(row.bound_thm4_bestarm.map(|v| v.to_string())),
    ]
}

/// Sweep output: the run-level schema prefixed by the grid point index.
pub fn write_sweep_csv<W: Write>(out: W, points: &[(usize, Vec<RegretReport>)]) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(std::iter::once("point").chain(CSV_HEADER.split(',')))?;
    for (point, reports) in points {
        for r in reports {
            let cells = record(CsvRow::from(r));
            writer.write_record(std::iter::once(point.to_string()).chain(cells))?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunDocument<'a> {
    config: &'a RunConfig,
    summary: &'a Summary,
    /// Comparator convention for the high-probability bounds.
    comparator: &'static str,
    reports: &'a [RegretReport],
}

pub const COMPARATOR_NOTE: &str =
    "high-probability bounds are checked against the best fixed arm in hindsight on the realized losses";

pub fn write_run_json<W: Write>(
    out: W,
    config: &RunConfig,
    summary: &Summary,
    reports: &[RegretReport],
) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(
        out,
        &RunDocument {
            config,
            summary,
            comparator: COMPARATOR_NOTE,
            reports,
        },
    )
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// One row per round; list-valued cells are `;`-separated.
pub fn write_trace_csv<W: Write>(out: W, trace: &Trace) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "round", "arm", "loss", "delay", "eta", "gamma", "tau", "cum_tau", "d_star", "l_bck",
        "skipped", "arrivals", "probs",
    ])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in &trace.rounds {
        writer.write_record([
            r.round.to_string(),
            r.arm.to_string(),
            r.loss.to_string(),
            r.delay.to_string(),
            r.eta.to_string(),
            opt(r.gamma.map(|v| v.to_string())),
            r.tau.to_string(),
            r.cum_tau.to_string(),
            opt(r.d_star.map(|v| v.to_string())),
            opt(r.l_bck.map(|v| v.to_string())),
            opt(r.skipped.map(|v| v.to_string())),
            join(&r.arrivals),
            join(&r.probs),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_trace_file(dir: &Path, seed: u64, trace: &Trace) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let file = File::create(dir.join(format!("trace_seed{seed}.csv")))?;
    write_trace_csv(file, trace).map_err(io::Error::other)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Algo;
    use crate::harness::episode::run_episode;

    #[test]
    fn csv_header_and_empty_cells() {
        let cfg = RunConfig::new(
            Algo::Dada,
            "bernoulli_gap(0.3,0.5)".parse().unwrap(),
            "constant(2)".parse().unwrap(),
            3,
            20,
        );
        let report = run_episode(&cfg, 1, false).unwrap().report;
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, std::slice::from_ref(&report)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(cells.len(), 14);
        assert_eq!(cells[1], "dada");
        // 18 rounds of delay 2, then 1 and 0 after clipping
        assert_eq!(cells[4], "37");
        assert_eq!(cells[6], "");
        assert!(!cells[9].is_empty());
        assert_eq!(cells[10], "");
    }

    #[test]
    fn sweep_rows_prefix_point() {
        let cfg = RunConfig::new(
            Algo::DadaSkip,
            "constant(0.5)".parse().unwrap(),
            "one_huge".parse().unwrap(),
            4,
            30,
        );
        let report = run_episode(&cfg, 2, false).unwrap().report;
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &[(3, vec![report])]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("point,{CSV_HEADER}"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 15);
        assert_eq!(row[0], "3");
        assert_eq!(row[8], "1");
    }

    #[test]
    fn trace_csv_has_one_row_per_round() {
        let cfg = RunConfig::new(
            Algo::DedaKnown,
            "bernoulli_gap(0.3,0.5)".parse().unwrap(),
            "uniform(3)".parse().unwrap(),
            3,
            25,
        );
        let trace = run_episode(&cfg, 5, true).unwrap().trace.unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 26);
    }
}
