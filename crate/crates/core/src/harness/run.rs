//! Monte Carlo sweep over realizations, SNR points, cluster layouts and
//! strategies.

use rayon::prelude::*;

use super::config::{Clustering, ExperimentConfig, NetworkSpec};
use super::seeds::{fading_seed, layout_seed, shadow_seed};
use super::table::{ResultRow, ResultTable, RowStatus};
use crate::clustering::{nearest_bases, nearest_interferers, ClusterLayout};
use crate::error::{Error, Result};
use crate::netgen::{draw_channels, hex_gains, hex_layout, line_gains, line_geometry, ChannelSet, LargeScaleGains, NetworkGeometry};
use crate::precoders::{run_strategy, PrecodeInput, Strategy, StrategyResult};
use crate::rate_model::normalized_sum_rate;

/// Share of failed rows above which the whole experiment is an error.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

/// One channel realization.
#[derive(Debug, Clone)]
pub struct Realization {
    pub geometry: NetworkGeometry,
    pub gains: LargeScaleGains,
    pub channels: ChannelSet,
}

pub fn realize(config: &ExperimentConfig, shadow: usize, fading: usize) -> Result<Realization> {
    let (geometry, gains) = match &config.network {
        NetworkSpec::Line { bases, spacing, offset, pathloss_exponent } => {
            let geo = line_geometry(*bases, *spacing, *offset)?;
            let gains = line_gains(&geo, *pathloss_exponent)?;
            (geo, gains)
        }
        NetworkSpec::Hex(params) => {
            let geo = hex_layout(params, layout_seed(config.seed, shadow))?;
            let gains = hex_gains(&geo, params, shadow_seed(config.seed, shadow))?;
            (geo, gains)
        }
    };
    let channels = draw_channels(&gains, &geometry, fading_seed(config.seed, shadow, fading))?;
    Ok(Realization { geometry, gains, channels })
}

pub fn build_layout(clustering: Clustering, gains: &LargeScaleGains, size: usize, antennas: &[usize]) -> Result<ClusterLayout> {
    match clustering {
        Clustering::NearestBases => nearest_bases(gains, size, antennas),
        Clustering::NearestInterferers => nearest_interferers(gains, size, antennas),
    }
}

/// (strategy, clustering, cluster size) combinations in output order.
pub fn combinations(config: &ExperimentConfig) -> Vec<(Strategy, Option<Clustering>, usize)> {
    let mut out = Vec::new();
    for &s in &config.strategies {
        if s.uses_clusters() {
            for &c in &config.clusterings {
                for &size in &config.cluster_sizes {
                    out.push((s, Some(c), size));
                }
            }
        } else {
            out.push((s, None, 0));
        }
    }
    out
}

/// Rows per trial: SNR points × combinations.
pub fn rows_per_trial(config: &ExperimentConfig) -> usize {
    config.snr_db.len() * combinations(config).len()
}

fn trial_rows(config: &ExperimentConfig, trial: usize) -> Vec<ResultRow> {
    let shadow = trial / config.fading_trials;
    let fading = trial % config.fading_trials;
    let combos = combinations(config);
    let blank = |strategy, clustering, cluster_size, snr_db| ResultRow {
        trial,
        shadow,
        fading,
        strategy,
        clustering,
        cluster_size,
        snr_db,
        status: RowStatus::Ok,
        rates: Vec::new(),
        utility: 0.0,
        normalized_sum_rate: 0.0,
        active_fraction: 0.0,
        iterations: 0,
        converged: false,
        note: String::new(),
    };
    let fail = |row: ResultRow, e: &Error| ResultRow { status: RowStatus::Failed(e.kind().into()), note: e.to_string(), ..row };

    let real = match realize(config, shadow, fading) {
        Ok(r) => r,
        Err(e) => {
            return config
                .snr_db
                .iter()
                .flat_map(|&snr| combos.iter().map(move |&(s, c, n)| (s, c, n, snr)))
                .map(|(s, c, n, snr)| fail(blank(s, c, n, snr), &e))
                .collect();
        }
    };
    let bases = real.geometry.num_bases();
    let users = real.geometry.num_users();
    let antennas = real.geometry.base_antennas.clone();
    let layouts: Vec<Result<ClusterLayout>> = combos
        .iter()
        .map(|&(_, c, size)| match c {
            Some(c) => build_layout(c, &real.gains, size, &antennas),
            None => ClusterLayout::full(users, antennas.clone()),
        })
        .collect();

    let mut rows = Vec::with_capacity(rows_per_trial(config));
    for &snr in &config.snr_db {
        let powers = vec![10f64.powf(snr / 10.0); bases];
        for (&(strategy, clustering, size), layout) in combos.iter().zip(&layouts) {
            let row = blank(strategy, clustering, size, snr);
            rows.push(match layout {
                Err(e) => fail(row, e),
                Ok(layout) => {
                    let input = PrecodeInput {
                        channels: &real.channels,
                        layout,
                        powers: &powers,
                        utility: &config.utility,
                        serving: &real.geometry.serving,
                    };
                    match run_strategy(strategy, &input, &config.precoder) {
                        Ok(res) => fill(row, &res, bases),
                        Err(e) => fail(row, &e),
                    }
                }
            });
        }
    }
    rows
}

fn fill(row: ResultRow, res: &StrategyResult, bases: usize) -> ResultRow {
    let rates = res.report.rates.clone();
    let active_fraction = if res.report.active.is_empty() {
        1.0
    } else {
        res.report.active.iter().filter(|a| **a).count() as f64 / res.report.active.len() as f64
    };
    let normalized = if rates.is_empty() { res.sum_rate / bases as f64 } else { normalized_sum_rate(&rates, bases) };
    let iterations = if res.strategy == Strategy::Sin {
        res.iterations
    } else {
        res.certificates.iter().map(|c| c.iterations).sum::<usize>().max(res.iterations)
    };
    ResultRow {
        rates,
        utility: res.report.utility,
        normalized_sum_rate: normalized,
        active_fraction,
        iterations,
        converged: res.converged,
        note: res.flags.join("; "),
        ..row
    }
}

/// Evaluate every (trial, SNR, combination). Trials run on the current rayon
/// pool and are merged in trial order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    run_experiment_with(config, |_, _| {})
}

/// As [`run_experiment`], calling `progress(done, total)` after each trial.
pub fn run_experiment_with<F>(config: &ExperimentConfig, progress: F) -> Result<ResultTable>
where
    F: Fn(usize, usize) + Sync,
{
    config.validate()?;
    let total = config.num_trials();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let per_trial: Vec<Vec<ResultRow>> = (0..total)
        .into_par_iter()
        .map(|t| {
            let rows = trial_rows(config, t);
            progress(done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1, total);
            rows
        })
        .collect();
    let table = ResultTable { rows: per_trial.into_iter().flatten().collect() };
    let failed = table.failed_rows();
    if failed as f64 > MAX_FAILED_FRACTION * table.rows.len() as f64 {
        return Err(Error::Experiment { failed, total: table.rows.len() });
    }
    Ok(table)
}
