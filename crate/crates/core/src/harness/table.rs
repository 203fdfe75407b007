//! Raw per-trial results and their CSV form.
//!
//! Raw CSV (`# softnull raw v1`), one row per (trial, strategy, clustering,
//! cluster size, SNR):
//!
//! | column | meaning |
//! |---|---|
//! | trial | `shadow · fading_trials + fading` |
//! | shadow, fading | realization indices |
//! | strategy | sin, zf, dpc, myopic-zf, noncoop |
//! | clustering | clustering algorithm, `-` for strategies without clusters |
//! | cluster_size | `0` for strategies without clusters |
//! | snr_db | per-base power in dB |
//! | status | `ok` or `failed:<kind>` |
//! | utility | utility of the achieved rates |
//! | normalized_sum_rate | sum rate / number of bases (bps/Hz) |
//! | active_fraction | users with nonzero rate / users |
//! | iterations | outer (SIN) or solver iterations |
//! | converged | `true` / `false` |
//! | rates | per-user rates separated by `;`, empty for dpc and failed rows |
//! | note | flags or the error message |
//!
//! Floats carry 6 significant digits.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Clustering;
use crate::error::{Error, Result};
use crate::precoders::Strategy;

pub const RAW_HEADER: &str = "# softnull raw v1";

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub trial: usize,
    pub shadow: usize,
    pub fading: usize,
    pub strategy: Strategy,
    pub clustering: Option<Clustering>,
    pub cluster_size: usize,
    pub snr_db: f64,
    pub status: RowStatus,
    pub rates: Vec<f64>,
    pub utility: f64,
    pub normalized_sum_rate: f64,
    pub active_fraction: f64,
    pub iterations: usize,
    pub converged: bool,
    pub note: String,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        matches!(self.status, RowStatus::Failed(_))
    }

    /// Curve name, e.g. `sin-7`; the clustering is spelled out when
    /// `with_clustering` is set.
    pub fn curve(&self, with_clustering: bool) -> String {
        match self.clustering {
            None => self.strategy.name().to_string(),
            Some(c) if with_clustering => format!("{}-{}-{}", self.strategy, c, self.cluster_size),
            Some(_) => format!("{}-{}", self.strategy, self.cluster_size),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    /// True when rows use more than one clustering algorithm.
    pub fn mixed_clustering(&self) -> bool {
        let mut it = self.rows.iter().filter_map(|r| r.clustering);
        match it.next() {
            Some(first) => it.any(|c| c != first),
            None => false,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{RAW_HEADER}")?;
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(RAW_COLUMNS)?;
        }
        for r in &self.rows {
            w.serialize(RawRecord::from(r)).map_err(std::io::Error::other)?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(input: R) -> std::result::Result<Self, csv::Error> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut rows = Vec::new();
        for rec in rd.deserialize::<RawRecord>() {
            rows.push(rec?.try_into().map_err(|e: Error| csv::Error::from(std::io::Error::other(e.to_string())))?);
        }
        Ok(Self { rows })
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::read_csv(file).map_err(|source| Error::Csv { path: path.to_path_buf(), source })
    }
}

const RAW_COLUMNS: [&str; 15] = [
    "trial",
    "shadow",
    "fading",
    "strategy",
    "clustering",
    "cluster_size",
    "snr_db",
    "status",
    "utility",
    "normalized_sum_rate",
    "active_fraction",
    "iterations",
    "converged",
    "rates",
    "note",
];

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    trial: usize,
    shadow: usize,
    fading: usize,
    strategy: String,
    clustering: String,
    cluster_size: usize,
    snr_db: String,
    status: String,
    utility: String,
    normalized_sum_rate: String,
    active_fraction: String,
    iterations: usize,
    converged: bool,
    rates: String,
    note: String,
}

impl From<&ResultRow> for RawRecord {
    fn from(r: &ResultRow) -> Self {
        RawRecord {
            trial: r.trial,
            shadow: r.shadow,
            fading: r.fading,
            strategy: r.strategy.name().into(),
            clustering: r.clustering.map_or("-".into(), |c| c.name().into()),
            cluster_size: r.cluster_size,
            snr_db: sig6(r.snr_db),
            status: match &r.status {
                RowStatus::Ok => "ok".into(),
                RowStatus::Failed(kind) => format!("failed:{kind}"),
            },
            utility: sig6(r.utility),
            normalized_sum_rate: sig6(r.normalized_sum_rate),
            active_fraction: sig6(r.active_fraction),
            iterations: r.iterations,
            converged: r.converged,
            rates: r.rates.iter().map(|x| sig6(*x)).collect::<Vec<_>>().join(";"),
            note: r.note.clone(),
        }
    }
}

fn parse_f64(field: &str, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::InvalidInput(format!("{field}: '{s}' is not a number")))
}

impl TryFrom<RawRecord> for ResultRow {
    type Error = Error;

    fn try_from(r: RawRecord) -> Result<Self> {
        let status = match r.status.as_str() {
            "ok" => RowStatus::Ok,
            s => match s.strip_prefix("failed:") {
                Some(kind) => RowStatus::Failed(kind.into()),
                None => return Err(Error::InvalidInput(format!("status '{s}'"))),
            },
        };
        let rates = if r.rates.is_empty() {
            Vec::new()
        } else {
            r.rates.split(';').map(|x| parse_f64("rates", x)).collect::<Result<Vec<_>>>()?
        };
        Ok(ResultRow {
            trial: r.trial,
            shadow: r.shadow,
            fading: r.fading,
            strategy: r.strategy.parse()?,
            clustering: if r.clustering == "-" { None } else { Some(r.clustering.parse()?) },
            cluster_size: r.cluster_size,
            snr_db: parse_f64("snr_db", &r.snr_db)?,
            status,
            rates,
            utility: parse_f64("utility", &r.utility)?,
            normalized_sum_rate: parse_f64("normalized_sum_rate", &r.normalized_sum_rate)?,
            active_fraction: parse_f64("active_fraction", &r.active_fraction)?,
            iterations: r.iterations,
            converged: r.converged,
            note: r.note,
        })
    }
}

/// `%.6g`-style formatting: 6 significant digits, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn row(trial: usize, strategy: Strategy, size: usize, snr: f64, nsr: f64) -> ResultRow {
        ResultRow {
            trial,
            shadow: 0,
            fading: trial,
            strategy,
            clustering: (size > 0).then_some(Clustering::NearestBases),
            cluster_size: size,
            snr_db: snr,
            status: RowStatus::Ok,
            rates: vec![nsr, nsr],
            utility: 2.0 * nsr,
            normalized_sum_rate: nsr,
            active_fraction: 1.0,
            iterations: 1,
            converged: true,
            note: String::new(),
        }
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(-10.0), "-10");
        assert_eq!(sig6(std::f64::consts::PI), "3.14159");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(1.5e-7), "1.5e-7");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(9.999996), "10");
    }

    #[test]
    fn csv_round_trip() {
        let mut t = ResultTable { rows: vec![row(0, Strategy::Sin, 3, -10.0, 0.25), row(1, Strategy::Dpc, 0, 40.0, 12.5)] };
        t.rows[1].rates.clear();
        t.rows[1].status = RowStatus::Failed("non-convergence".into());
        t.rows[1].note = "gap 1e-3, stalled".into();
        let text = t.to_csv_string();
        assert!(text.starts_with(RAW_HEADER));
        let back = ResultTable::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_csv_string(), text);
    }

    #[test]
    fn empty_table_writes_header_only() {
        let text = ResultTable::default().to_csv_string();
        assert_eq!(text.lines().count(), 2);
        assert!(ResultTable::read_csv(text.as_bytes()).unwrap().rows.is_empty());
    }

    #[test]
    fn curve_names() {
        let r = row(0, Strategy::Sin, 7, 0.0, 1.0);
        assert_eq!(r.curve(false), "sin-7");
        assert_eq!(r.curve(true), "sin-nearest-bases-7");
        assert_eq!(row(0, Strategy::Zf, 0, 0.0, 1.0).curve(true), "zf");
    }
}
