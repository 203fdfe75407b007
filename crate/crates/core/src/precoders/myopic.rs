//! Myopic zero forcing: each base splits its power evenly among the users it
//! serves, and each user's cluster nulls toward the strongest co-served users
//! it has spare dimensions for.

use super::{check_powers, noncoop_rates, Strategy, StrategyResult};
use crate::clustering::ClusterLayout;
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::netgen::ChannelSet;
use crate::rate_model::{achievable_rates, CovarianceSet, RateReport, Utility};

const NULL_TOL: f64 = 1e-12;

/// The `floor(fraction · K)` users with the lowest rates, ties broken by
/// index, in ascending index order.
pub fn outage_users(rates: &[f64], fraction: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!("outage fraction {fraction} must lie in [0, 1)")));
    }
    let count = (fraction * rates.len() as f64 + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..rates.len()).collect();
    order.sort_by(|&a, &b| rates[a].total_cmp(&rates[b]).then(a.cmp(&b)));
    let mut out: Vec<usize> = order.into_iter().take(count).collect();
    out.sort_unstable();
    Ok(out)
}

fn restricted(h: &CMat, user: usize, bases: &[usize]) -> Vec<C64> {
    bases.iter().map(|&j| h[(user, j)]).collect()
}

/// Project `v` onto the orthogonal complement of the rows of `rows`.
fn null_projection(v: &[C64], rows: &[Vec<C64>]) -> Vec<C64> {
    let n = v.len();
    if rows.is_empty() {
        return v.to_vec();
    }
    let a = CMat::from_fn(rows.len(), n, |r, col| rows[r][col]);
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut out = v.to_vec();
    for (r, s) in svd.singular_values.iter().enumerate() {
        if *s <= NULL_TOL * top || top == 0.0 {
            continue;
        }
        // Row r of Vᴴ spans the row space; remove the component along it.
        let basis: Vec<C64> = (0..n).map(|col| vt[(r, col)].conj()).collect();
        let coef: C64 = basis.iter().zip(&out).map(|(b, x)| b.conj() * x).sum();
        for (x, b) in out.iter_mut().zip(&basis) {
            *x -= coef * b;
        }
    }
    out
}

pub fn myopic_zf(
    channels: &ChannelSet,
    layout: &ClusterLayout,
    powers: &[f64],
    serving: &[usize],
    outage_fraction: f64,
    utility: &Utility,
) -> Result<StrategyResult> {
    let h = channels.scalar_matrix()?;
    let (k, b) = h.shape();
    check_powers(powers, b)?;
    if layout.num_users() != k || layout.num_bases() != b {
        return Err(Error::InvalidInput("cluster layout does not match the channel dimensions".into()));
    }
    let outage = outage_users(&noncoop_rates(channels, powers, serving)?, outage_fraction)?;
    let active: Vec<bool> = (0..k).map(|i| !outage.contains(&i)).collect();
    let served: Vec<Vec<usize>> = (0..b).map(|j| layout.served_users(j).iter().copied().filter(|&u| active[u]).collect()).collect();
    let mut flags = Vec::new();
    if !outage.is_empty() {
        flags.push(format!("outage users {outage:?}"));
    }
    let mut blocks = Vec::with_capacity(k);
    for i in 0..k {
        let bases = layout.cluster(i);
        let n = bases.len();
        if !active[i] {
            blocks.push(CMat::zeros(n, n));
            continue;
        }
        let mut candidates: Vec<usize> = bases.iter().flat_map(|&j| served[j].iter().copied()).filter(|&u| u != i).collect();
        candidates.sort_unstable();
        candidates.dedup();
        let strength = |u: usize| restricted(&h, u, bases).iter().map(|z| z.norm_sqr()).sum::<f64>();
        candidates.sort_by(|&a, &b| strength(b).total_cmp(&strength(a)).then(a.cmp(&b)));
        candidates.truncate(n - 1);
        let mrt: Vec<C64> = restricted(&h, i, bases).iter().map(|z| z.conj()).collect();
        let mrt_norm: f64 = mrt.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let rows: Vec<Vec<C64>> = candidates.iter().map(|&u| restricted(&h, u, bases)).collect();
        let mut beam = null_projection(&mrt, &rows);
        let beam_norm: f64 = beam.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if beam_norm <= NULL_TOL * mrt_norm.max(f64::MIN_POSITIVE) {
            flags.push(format!("user {i}: no nulling direction, using MRT"));
            beam = mrt;
        }
        let mut scale2 = f64::INFINITY;
        for (pos, &j) in bases.iter().enumerate() {
            let m = beam[pos].norm_sqr();
            if m > 0.0 {
                scale2 = scale2.min(powers[j] / served[j].len() as f64 / m);
            }
        }
        if !scale2.is_finite() {
            blocks.push(CMat::zeros(n, n));
            continue;
        }
        let x = CMat::from_fn(n, 1, |r, _| beam[r] * scale2.sqrt());
        blocks.push(&x * x.adjoint());
    }
    let q = CovarianceSet::new(blocks).validated(layout)?;
    let rates = achievable_rates(channels, layout, &q)?;
    let report = RateReport::from_rates(rates, q.base_power(layout), utility)?;
    Ok(StrategyResult {
        strategy: Strategy::MyopicZf,
        sum_rate: report.sum_rate(),
        report,
        covariances: Some(q),
        layout: Some(layout.clone()),
        certificates: Vec::new(),
        iterations: 0,
        converged: true,
        flags,
        utility_trace: Vec::new(),
    })
}
