#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use softnull::clustering::{nearest_bases, ClusterLayout};
use softnull::linalg::{CMat, C64};
use softnull::netgen::{draw_channels, line_gains, line_geometry, ChannelSet};
use softnull::rate_model::CovarianceSet;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cn(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> CMat {
    let s = (scale / 2.0).sqrt();
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(s * re, s * im)
    })
}

/// Random PSD matrix `A Aᴴ` of random rank (possibly zero).
pub fn psd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let rank = rng.random_range(0..=n);
    if rank == 0 {
        return CMat::zeros(n, n);
    }
    let a = cn(rng, n, rank, scale);
    &a * a.adjoint()
}

/// Random multi-antenna network with random overlapping clusters.
pub struct Instance {
    pub channels: ChannelSet,
    pub layout: ClusterLayout,
    pub powers: Vec<f64>,
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_users: usize, max_antennas: usize) -> Instance {
    let k = rng.random_range(1..=max_users);
    let b = rng.random_range(1..=max_users);
    let base_antennas: Vec<usize> = (0..b).map(|_| rng.random_range(1..=max_antennas)).collect();
    let user_antennas: Vec<usize> = (0..k).map(|_| rng.random_range(1..=max_antennas)).collect();
    let total: usize = base_antennas.iter().sum();
    let aggregate = user_antennas
        .iter()
        .map(|&n| {
            let scale = rng.random_range(0.1..3.0);
            cn(rng, n, total, scale)
        })
        .collect();
    let channels = ChannelSet::from_aggregate(base_antennas.clone(), user_antennas, aggregate).unwrap();
    let clusters = (0..k)
        .map(|_| {
            let mut set: Vec<usize> = (0..b).filter(|_| rng.random_bool(0.5)).collect();
            if set.is_empty() {
                set.push(rng.random_range(0..b));
            }
            set
        })
        .collect();
    let layout = ClusterLayout::new(clusters, base_antennas).unwrap();
    let powers = (0..b).map(|_| 10f64.powf(rng.random_range(-1.0..2.0))).collect();
    Instance { channels, layout, powers }
}

pub fn random_covariances(rng: &mut ChaCha8Rng, layout: &ClusterLayout, scale: f64) -> CovarianceSet {
    CovarianceSet::new((0..layout.num_users()).map(|i| psd(rng, layout.cluster_antennas(i), scale)).collect())
}

/// Seeded line network: channels, a nearest-bases layout and the serving map.
pub fn line_instance(bases: usize, cluster_size: usize, seed: u64) -> (ChannelSet, ClusterLayout, Vec<usize>) {
    let geo = line_geometry(bases, 1.0, 1.0).unwrap();
    let gains = line_gains(&geo, 4.0).unwrap();
    let channels = draw_channels(&gains, &geo, seed).unwrap();
    let layout = nearest_bases(&gains, cluster_size, &geo.base_antennas).unwrap();
    (channels, layout, geo.serving.clone())
}

pub fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}
