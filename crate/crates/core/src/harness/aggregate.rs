//! Per-cell statistics over trials.

use std::collections::BTreeMap;

use super::config::Clustering;
use super::table::ResultTable;
use crate::error::{Error, Result};
use crate::precoders::Strategy;

/// Curve ordering: baselines first, then the cooperative schemes.
fn strategy_rank(s: Strategy) -> u8 {
    match s {
        Strategy::Noncoop => 0,
        Strategy::Zf => 1,
        Strategy::Dpc => 2,
        Strategy::MyopicZf => 3,
        Strategy::Sin => 4,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub clustering: Option<Clustering>,
    pub cluster_size: usize,
    pub curve: String,
    pub snr_db: f64,
    /// Non-failed rows in the cell.
    pub trials: usize,
    pub failed: usize,
    /// `None` when every row of the cell failed.
    pub mean_normalized_sum_rate: Option<f64>,
    pub stderr: Option<f64>,
    pub active_fraction: Option<f64>,
    pub mean_utility: Option<f64>,
}

impl SummaryRow {
    pub fn missing(&self) -> bool {
        self.trials == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn get(&self, curve: &str, snr_db: f64) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.curve == curve && r.snr_db == snr_db)
    }

    /// Mean normalized sum rate of `curve` at `snr_db`.
    pub fn mean(&self, curve: &str, snr_db: f64) -> Option<f64> {
        self.get(curve, snr_db).and_then(|r| r.mean_normalized_sum_rate)
    }

    /// Curve names in output order.
    pub fn curves(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.curve) {
                out.push(r.curve.clone());
            }
        }
        out
    }

    /// Sorted distinct SNR points.
    pub fn snr_points(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.rows.iter().map(|r| r.snr_db).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// Mean, standard error and active fraction per (strategy, clustering,
/// cluster size, SNR), over non-failed rows.
pub fn aggregate(table: &ResultTable) -> Result<Summary> {
    if table.rows.is_empty() {
        return Err(Error::InvalidInput("cannot aggregate an empty table".into()));
    }
    let with_clustering = table.mixed_clustering();
    #[derive(Default)]
    struct Acc {
        values: Vec<f64>,
        active: Vec<f64>,
        utility: Vec<f64>,
        failed: usize,
        curve: String,
    }
    type Key = (u8, Option<Clustering>, usize, u64);
    let mut cells: BTreeMap<Key, (Strategy, f64, Acc)> = BTreeMap::new();
    for r in &table.rows {
        // Order SNR keys numerically: map f64 bits to a monotone u64.
        let bits = r.snr_db.to_bits();
        let snr_key = if bits >> 63 == 1 { !bits } else { bits | (1 << 63) };
        let key = (strategy_rank(r.strategy), r.clustering, r.cluster_size, snr_key);
        let entry = cells.entry(key).or_insert_with(|| {
            (r.strategy, r.snr_db, Acc { curve: r.curve(with_clustering), ..Default::default() })
        });
        let acc = &mut entry.2;
        if r.failed() {
            acc.failed += 1;
        } else {
            acc.values.push(r.normalized_sum_rate);
            acc.active.push(r.active_fraction);
            acc.utility.push(r.utility);
        }
    }
    let rows = cells
        .into_iter()
        .map(|((_, clustering, cluster_size, _), (strategy, snr_db, acc))| {
            let n = acc.values.len();
            let mean = |v: &[f64]| (n > 0).then(|| v.iter().sum::<f64>() / n as f64);
            let m = mean(&acc.values);
            let stderr = m.map(|m| {
                if n < 2 {
                    0.0
                } else {
                    let var = acc.values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
                    (var / n as f64).sqrt()
                }
            });
            SummaryRow {
                strategy,
                clustering,
                cluster_size,
                curve: acc.curve,
                snr_db,
                trials: n,
                failed: acc.failed,
                mean_normalized_sum_rate: m,
                stderr,
                active_fraction: mean(&acc.active),
                mean_utility: mean(&acc.utility),
            }
        })
        .collect();
    Ok(Summary { rows })
}
