//! Full-network zero forcing with the channel pseudoinverse and per-antenna
//! power allocation.

use super::{check_powers, Strategy, StrategyResult};
use crate::clustering::ClusterLayout;
use crate::detmax::{solve_zf_power, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::netgen::ChannelSet;
use crate::rate_model::{rate_report, CovarianceSet, Utility};

/// Relative singular-value threshold for declaring the channel rank deficient.
const RANK_TOL: f64 = 1e-10;
const CROSSTALK_TOL: f64 = 1e-9;

fn rank(h: &CMat) -> usize {
    let sv = h.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > RANK_TOL * top && top > 0.0).count()
}

/// Largest off-diagonal magnitude of `H W` relative to its largest diagonal.
pub fn crosstalk(h: &CMat, w: &CMat) -> f64 {
    let hw = h * w;
    let mut diag = 0.0f64;
    let mut off = 0.0f64;
    for i in 0..hw.nrows() {
        for k in 0..hw.ncols() {
            if i == k {
                diag = diag.max(hw[(i, k)].norm());
            } else {
                off = off.max(hw[(i, k)].norm());
            }
        }
    }
    if diag > 0.0 { off / diag } else { off }
}

/// Users kept after greedily dropping the weakest until the rows of `h` are
/// linearly independent.
fn full_rank_users(h: &CMat) -> Vec<usize> {
    let mut kept: Vec<usize> = (0..h.nrows()).collect();
    loop {
        let sub = h.select_rows(&kept);
        if kept.is_empty() || rank(&sub) == kept.len() {
            return kept;
        }
        let weakest = kept
            .iter()
            .enumerate()
            .min_by(|a, b| h.row(*a.1).norm_squared().total_cmp(&h.row(*b.1).norm_squared()))
            .map(|(pos, _)| pos)
            .unwrap();
        kept.remove(weakest);
    }
}

pub fn zf_fullnet(channels: &ChannelSet, powers: &[f64], utility: &Utility, solver: &SolverOptions) -> Result<StrategyResult> {
    let h = channels.scalar_matrix()?;
    let (k, b) = h.shape();
    check_powers(powers, b)?;
    let weights = utility.weights(k)?;
    let layout = ClusterLayout::full(k, vec![1; b])?;
    let mut flags = Vec::new();
    if k > b {
        flags.push(format!("{k} users exceed {b} antennas"));
    }
    let kept = full_rank_users(&h);
    if kept.len() < k {
        let dropped: Vec<usize> = (0..k).filter(|i| !kept.contains(i)).collect();
        flags.push(format!("rank-deficient channel, dropped users {dropped:?}"));
    }
    let mut blocks = vec![CMat::zeros(b, b); k];
    let mut certificates = Vec::new();
    if !kept.is_empty() {
        let hk = h.select_rows(&kept);
        let w = hk
            .clone()
            .pseudo_inverse(0.0)
            .map_err(|e| Error::Numerical(format!("pseudoinverse failed: {e}")))?;
        let residual = crosstalk(&hk, &w);
        if residual > CROSSTALK_TOL {
            flags.push(format!("zero-forcing crosstalk {residual:.3e}"));
        }
        let kept_weights: Vec<f64> = kept.iter().map(|&i| weights[i]).collect();
        let alloc = solve_zf_power(&w, powers, &kept_weights, solver)?;
        if !alloc.certificate.converged {
            return Err(Error::NonConvergence {
                iterations: alloc.certificate.iterations,
                gap: alloc.certificate.duality_gap,
                feasibility: alloc.certificate.feasibility_residual,
            });
        }
        for (pos, &i) in kept.iter().enumerate() {
            let col = w.column(pos);
            blocks[i] = (&col * col.adjoint()).scale(alloc.gamma[pos]);
        }
        certificates.push(alloc.certificate);
    }
    let q = CovarianceSet::new(blocks).validated(&layout)?;
    let report = rate_report(channels, &layout, &q, utility)?;
    Ok(StrategyResult {
        strategy: Strategy::Zf,
        sum_rate: report.sum_rate(),
        report,
        covariances: Some(q),
        layout: Some(layout),
        certificates,
        iterations: 1,
        converged: true,
        flags,
        utility_trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, C64};

    fn scalar(h: CMat) -> ChannelSet {
        ChannelSet::from_scalar(&h).unwrap()
    }

    #[test]
    fn identity_channel_gives_log_one_plus_p() {
        let ch = scalar(CMat::identity(3, 3));
        let res = zf_fullnet(&ch, &[10.0; 3], &Utility::SumRate, &SolverOptions::default()).unwrap();
        for r in &res.report.rates {
            assert!((r - 11f64.log2()).abs() < 1e-6);
        }
        assert!(res.flags.is_empty());
    }

    #[test]
    fn random_instances_have_no_crosstalk() {
        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..10 {
            let h = CMat::from_fn(4, 4, |_, _| C64::new(next(), next()));
            let w = h.clone().pseudo_inverse(0.0).unwrap();
            assert!(crosstalk(&h, &w) <= 1e-9);
            let res = zf_fullnet(&scalar(h), &[5.0; 4], &Utility::SumRate, &SolverOptions::default()).unwrap();
            for (used, p) in res.report.base_power.iter().zip([5.0; 4]) {
                assert!(*used <= p * (1.0 + 1e-6));
            }
            // Interference-free: achieved rates equal log₂(1 + γ) from the allocation.
            assert!((res.sum_rate - res.certificates[0].objective).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicate_user_is_dropped() {
        let h = CMat::from_row_slice(3, 3, &[c(1.0), c(0.5), c(0.0), c(0.2), c(0.1), c(0.0), c(0.0), c(0.0), c(1.0)]);
        // Row 1 is 0.2 × row 0 and the weaker of the two.
        let res = zf_fullnet(&scalar(h), &[1.0; 3], &Utility::SumRate, &SolverOptions::default()).unwrap();
        assert_eq!(res.report.rates[1], 0.0);
        assert!(res.report.rates[0] > 0.0 && res.report.rates[2] > 0.0);
        assert!(res.flags.iter().any(|f| f.contains("dropped users [1]")));
    }

    #[test]
    fn multi_antenna_channels_are_rejected() {
        let ch = ChannelSet::from_aggregate(vec![2], vec![1], vec![CMat::from_element(1, 2, c(1.0))]).unwrap();
        assert!(zf_fullnet(&ch, &[1.0], &Utility::SumRate, &SolverOptions::default()).is_err());
    }
}
