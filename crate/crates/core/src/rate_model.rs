//! Achievable rates with interference treated as noise, the interference-plus-
//! noise covariance at a linearization point, the first-order lower bound on
//! the rate, utilities and precoder recovery.
//!
//! Reported rates are in bits per channel use (log base 2). The solvers work
//! in nats internally.

use crate::clustering::ClusterLayout;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, LN2};
use crate::netgen::ChannelSet;

/// Users whose rate exceeds this (bps/Hz) count as active.
pub const ACTIVE_RATE_FLOOR: f64 = 1e-3;
/// Eigenvalues below this fraction of the largest are not counted as streams.
pub const STREAM_FLOOR_REL: f64 = 1e-7;
/// Largest tolerated negative eigenvalue of a covariance block (relative to its scale).
pub const PSD_TOL: f64 = 1e-9;
/// Largest tolerated deviation from Hermitian symmetry (relative to its scale).
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Per-user transmit covariance blocks `Q_i` in linear power units.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    blocks: Vec<CMat>,
}

impl CovarianceSet {
    pub fn new(blocks: Vec<CMat>) -> Self {
        Self { blocks }
    }

    pub fn zeros(layout: &ClusterLayout) -> Self {
        Self {
            blocks: (0..layout.num_users())
                .map(|i| CMat::zeros(layout.cluster_antennas(i), layout.cluster_antennas(i)))
                .collect(),
        }
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, user: usize) -> &CMat {
        &self.blocks[user]
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Check shapes against `layout`, Hermitian symmetry and PSD-ness within
    /// tolerance, returning a copy with small negative eigenvalues clipped.
    pub fn validated(&self, layout: &ClusterLayout) -> Result<CovarianceSet> {
        if self.blocks.len() != layout.num_users() {
            return Err(Error::InvalidInput(format!(
                "{} covariance blocks for {} users",
                self.blocks.len(),
                layout.num_users()
            )));
        }
        let mut out = Vec::with_capacity(self.blocks.len());
        for (i, q) in self.blocks.iter().enumerate() {
            let n = layout.cluster_antennas(i);
            if q.shape() != (n, n) {
                return Err(Error::InvalidInput(format!(
                    "user {i}: covariance is {:?}, cluster has {n} antennas",
                    q.shape()
                )));
            }
            if q.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidInput(format!("user {i}: non-finite covariance")));
            }
            let scale = linalg::max_abs(q).max(1.0);
            if linalg::hermitian_defect(q) > HERMITIAN_TOL * scale {
                return Err(Error::InvalidInput(format!("user {i}: covariance is not Hermitian")));
            }
            let (vals, _) = linalg::herm_eig(q);
            let min = vals.last().copied().unwrap_or(0.0);
            if min < -PSD_TOL * scale {
                return Err(Error::NotPsd { user: i, min_eigenvalue: min });
            }
            out.push(if min < 0.0 { linalg::clip_psd(q) } else { linalg::hermitian_part(q) });
        }
        Ok(CovarianceSet { blocks: out })
    }

    /// Power each base spends summed over all users.
    pub fn base_power(&self, layout: &ClusterLayout) -> Vec<f64> {
        let mut power = vec![0.0; layout.num_bases()];
        for (i, q) in self.blocks.iter().enumerate() {
            for &j in layout.cluster(i) {
                power[j] += layout.block_power(i, j, q);
            }
        }
        power
    }
}

/// Columns of `H_i` that belong to user `k`'s cluster: `H_i C_k`.
pub fn cluster_channel(channels: &ChannelSet, layout: &ClusterLayout, user: usize, block: usize) -> CMat {
    let h = channels.aggregate(user);
    let idx = layout.antenna_index(block);
    CMat::from_fn(h.nrows(), idx.len(), |r, c| h[(r, idx[c])])
}

fn check_shapes(channels: &ChannelSet, layout: &ClusterLayout) -> Result<()> {
    if channels.num_users() != layout.num_users() || channels.base_antennas() != layout.base_antennas() {
        return Err(Error::InvalidInput(format!(
            "channels ({} users, antennas {:?}) do not match layout ({} users, antennas {:?})",
            channels.num_users(),
            channels.base_antennas(),
            layout.num_users(),
            layout.base_antennas()
        )));
    }
    Ok(())
}

/// Received covariance contributions `H_i C_k Q_k C_kᵀ H_iᴴ` for every k.
fn received_terms(channels: &ChannelSet, layout: &ClusterLayout, q: &CovarianceSet, user: usize) -> Vec<CMat> {
    (0..layout.num_users())
        .map(|k| {
            let b = cluster_channel(channels, layout, user, k);
            &b * q.block(k) * b.adjoint()
        })
        .collect()
}

fn logdet(a: &CMat) -> Result<f64> {
    linalg::logdet_hpd(a).ok_or_else(|| Error::Numerical("log-determinant of a non-positive-definite matrix".into()))
}

/// How rates are combined into a scalar utility.
#[derive(Debug, Clone, PartialEq)]
pub enum Utility {
    SumRate,
    WeightedSum(Vec<f64>),
    /// `Σ ln(R_i + floor)`.
    ProportionalFair { floor: f64 },
}

impl Utility {
    pub fn weights(&self, users: usize) -> Result<Vec<f64>> {
        match self {
            Utility::SumRate => Ok(vec![1.0; users]),
            Utility::WeightedSum(w) => {
                if w.len() != users {
                    return Err(Error::InvalidInput(format!("{} weights for {users} users", w.len())));
                }
                if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                    return Err(Error::InvalidInput(format!("negative or non-finite weight {bad}")));
                }
                Ok(w.clone())
            }
            Utility::ProportionalFair { .. } => Err(Error::InvalidInput(
                "proportional-fair utility has no fixed rate weights".into(),
            )),
        }
    }

    pub fn evaluate(&self, rates: &[f64]) -> Result<f64> {
        match self {
            Utility::ProportionalFair { floor } => {
                if !(*floor > 0.0) {
                    return Err(Error::InvalidInput(format!("proportional-fair floor {floor} must be > 0")));
                }
                Ok(rates.iter().map(|r| (r + floor).ln()).sum())
            }
            _ => {
                let w = self.weights(rates.len())?;
                Ok(w.iter().zip(rates).map(|(w, r)| w * r).sum())
            }
        }
    }
}

/// Sum rate divided by the number of bases.
pub fn normalized_sum_rate(rates: &[f64], bases: usize) -> f64 {
    rates.iter().sum::<f64>() / bases as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub rates: Vec<f64>,
    pub utility: f64,
    pub base_power: Vec<f64>,
    pub active: Vec<bool>,
}

impl RateReport {
    pub fn from_rates(rates: Vec<f64>, base_power: Vec<f64>, utility: &Utility) -> Result<Self> {
        let utility_value = utility.evaluate(&rates)?;
        let active = rates.iter().map(|&r| r > ACTIVE_RATE_FLOOR).collect();
        Ok(Self { rates, utility: utility_value, base_power, active })
    }

    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// Per-user rates in bps/Hz with other users' signals treated as noise.
pub fn achievable_rates(channels: &ChannelSet, layout: &ClusterLayout, q: &CovarianceSet) -> Result<Vec<f64>> {
    check_shapes(channels, layout)?;
    let q = q.validated(layout)?;
    (0..layout.num_users())
        .map(|i| {
            let terms = received_terms(channels, layout, &q, i);
            let n = channels.user_antennas()[i];
            let mut interference = linalg::identity(n);
            for (k, t) in terms.iter().enumerate() {
                if k != i {
                    interference += t;
                }
            }
            let total = &interference + &terms[i];
            Ok(((logdet(&total)? - logdet(&interference)?) / LN2).max(0.0))
        })
        .collect()
}

/// Full report: rates, utility, per-base power and active flags.
pub fn rate_report(
    channels: &ChannelSet,
    layout: &ClusterLayout,
    q: &CovarianceSet,
    utility: &Utility,
) -> Result<RateReport> {
    let rates = achievable_rates(channels, layout, q)?;
    RateReport::from_rates(rates, q.base_power(layout), utility)
}

/// `Y_i = I + Σ_{k≠i} H_i C_k Q̄_k C_kᵀ H_iᴴ`.
pub fn interference_covariance(
    channels: &ChannelSet,
    layout: &ClusterLayout,
    qbar: &CovarianceSet,
    user: usize,
) -> Result<CMat> {
    check_shapes(channels, layout)?;
    if user >= layout.num_users() {
        return Err(Error::IndexOutOfRange { index: user, limit: layout.num_users() });
    }
    let mut y = linalg::identity(channels.user_antennas()[user]);
    for (k, t) in received_terms(channels, layout, qbar, user).iter().enumerate() {
        if k != user {
            y += t;
        }
    }
    Ok(linalg::hermitian_part(&y))
}

/// First-order lower bound on user `user`'s rate (bps/Hz) around `qbar`:
/// the interference log-det is replaced by its tangent plane at `qbar`.
/// May be negative; not clipped.
pub fn taylor_rate(
    channels: &ChannelSet,
    layout: &ClusterLayout,
    q: &CovarianceSet,
    qbar: &CovarianceSet,
    user: usize,
) -> Result<f64> {
    let y = interference_covariance(channels, layout, qbar, user)?;
    let y_inv = linalg::inverse_hpd(&y).ok_or_else(|| Error::Numerical("singular interference covariance".into()))?;
    let terms = received_terms(channels, layout, q, user);
    let bar_terms = received_terms(channels, layout, qbar, user);
    let mut total = linalg::identity(y.nrows());
    let mut penalty = 0.0;
    for k in 0..terms.len() {
        total += &terms[k];
        if k != user {
            penalty += linalg::re_inner(&y_inv, &terms[k]) - linalg::re_inner(&y_inv, &bar_terms[k]);
        }
    }
    Ok((logdet(&total)? - penalty - logdet(&y)?) / LN2)
}

/// Linear precoders `G_i = V_i D_i^{1/2}` recovered from covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub precoders: Vec<CMat>,
    pub streams: Vec<usize>,
}

impl PrecoderSet {
    /// Rows of `G_i` owned by `base` (`G_ji`), in cluster order.
    pub fn base_slice(&self, layout: &ClusterLayout, user: usize, base: usize) -> Option<CMat> {
        let owner = layout.antenna_owner(user);
        let rows: Vec<usize> = (0..owner.len()).filter(|&a| owner[a] == base).collect();
        if rows.is_empty() {
            return None;
        }
        let g = &self.precoders[user];
        Some(CMat::from_fn(rows.len(), g.ncols(), |r, c| g[(rows[r], c)]))
    }
}

pub fn recover_precoders(q: &CovarianceSet) -> PrecoderSet {
    let mut precoders = Vec::with_capacity(q.len());
    let mut streams = Vec::with_capacity(q.len());
    for block in q.blocks() {
        let (vals, mut vecs) = linalg::herm_eig(block);
        let top = vals.first().copied().unwrap_or(0.0).max(0.0);
        let mut count = 0;
        for (j, &v) in vals.iter().enumerate() {
            let v = v.max(0.0);
            if top > 0.0 && v > STREAM_FLOOR_REL * top {
                count += 1;
            }
            vecs.column_mut(j).scale_mut(v.sqrt());
        }
        precoders.push(vecs);
        streams.push(count);
    }
    PrecoderSet { precoders, streams }
}
