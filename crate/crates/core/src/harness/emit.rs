//! CSV outputs.
//!
//! Summary (`# softnull summary v1`): strategy, clustering, cluster_size,
//! curve, snr_db, trials, failed, mean_normalized_sum_rate, stderr,
//! active_fraction, mean_utility. Missing cells leave the statistics empty.
//!
//! Plot data (`# softnull plot v1`): `snr_db` followed by one column per
//! curve, one row per SNR point; missing cells are empty.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::aggregate::Summary;
use super::table::{sig6, ResultTable};
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: &str = "# softnull summary v1";
pub const PLOT_HEADER: &str = "# softnull plot v1";

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub raw: PathBuf,
    pub summary: PathBuf,
    pub plot: PathBuf,
}

impl OutputPaths {
    /// `raw.csv`, `summary.csv` and `plot.csv` inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self { raw: dir.join("raw.csv"), summary: dir.join("summary.csv"), plot: dir.join("plot.csv") }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

pub fn write_summary<W: Write>(summary: &Summary, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "strategy",
        "clustering",
        "cluster_size",
        "curve",
        "snr_db",
        "trials",
        "failed",
        "mean_normalized_sum_rate",
        "stderr",
        "active_fraction",
        "mean_utility",
    ])?;
    for r in &summary.rows {
        w.write_record([
            r.strategy.name().to_string(),
            r.clustering.map_or("-".into(), |c| c.name().into()),
            r.cluster_size.to_string(),
            r.curve.clone(),
            sig6(r.snr_db),
            r.trials.to_string(),
            r.failed.to_string(),
            opt(r.mean_normalized_sum_rate),
            opt(r.stderr),
            opt(r.active_fraction),
            opt(r.mean_utility),
        ])?;
    }
    w.flush()
}

pub fn write_plot<W: Write>(summary: &Summary, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{PLOT_HEADER}")?;
    let curves = summary.curves();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once("snr_db".to_string()).chain(curves.iter().cloned()))?;
    for snr in summary.snr_points() {
        let mut rec = vec![sig6(snr)];
        rec.extend(curves.iter().map(|c| opt(summary.mean(c, snr))));
        w.write_record(rec)?;
    }
    w.flush()
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut buf = Vec::new();
    f(&mut buf).map_err(io)?;
    fs::write(path, buf).map_err(io)
}

/// Write the raw table, the summary and the plot data.
pub fn emit(table: &ResultTable, summary: &Summary, paths: &OutputPaths) -> Result<()> {
    write_file(&paths.raw, |b| table.write_csv(b))?;
    emit_summary(summary, paths)
}

/// Write the summary and plot data only.
pub fn emit_summary(summary: &Summary, paths: &OutputPaths) -> Result<()> {
    write_file(&paths.summary, |b| write_summary(summary, b))?;
    write_file(&paths.plot, |b| write_plot(summary, b))
}

#[cfg(test)]
mod tests {
    use super::super::aggregate::aggregate;
    use super::super::table::tests::row;
    use super::*;
    use crate::precoders::Strategy;

    #[test]
    fn empty_summary_gives_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        let paths = OutputPaths::in_dir(dir.path());
        emit(&ResultTable::default(), &Summary::default(), &paths).unwrap();
        for p in [&paths.raw, &paths.summary, &paths.plot] {
            assert_eq!(fs::read_to_string(p).unwrap().lines().count(), 2, "{}", p.display());
        }
    }

    #[test]
    fn plot_has_one_column_per_curve() {
        let t = ResultTable {
            rows: vec![
                row(0, Strategy::Noncoop, 0, 0.0, 1.0),
                row(0, Strategy::Noncoop, 0, 10.0, 1.5),
                row(0, Strategy::Sin, 3, 0.0, 2.0),
                row(0, Strategy::Sin, 3, 10.0, 1.0 / 3.0),
            ],
        };
        let mut buf = Vec::new();
        write_plot(&aggregate(&t).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# softnull plot v1\nsnr_db,noncoop,sin-3\n0,1,2\n10,1.5,0.333333\n");
    }

    #[test]
    fn summary_columns_are_fixed() {
        let t = ResultTable { rows: vec![row(0, Strategy::Zf, 0, 5.0, 2.0)] };
        let mut buf = Vec::new();
        write_summary(&aggregate(&t).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER);
        assert_eq!(
            lines[1],
            "strategy,clustering,cluster_size,curve,snr_db,trials,failed,mean_normalized_sum_rate,stderr,active_fraction,mean_utility"
        );
        assert_eq!(lines[2], "zf,-,0,zf,5,1,0,2,0,1,4");
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let paths = OutputPaths::in_dir(&blocker.join("sub"));
        let e = emit(&ResultTable::default(), &Summary::default(), &paths).unwrap_err();
        assert_eq!(e.kind(), "io");
        assert!(e.to_string().contains("file"));
    }
}
