//! Every base transmits at full power to its own user; everything else is
//! noise.

use super::{check_powers, Strategy, StrategyResult};
use crate::clustering::ClusterLayout;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::netgen::ChannelSet;
use crate::rate_model::{achievable_rates, rate_report, CovarianceSet, Utility};

fn singleton_setup(channels: &ChannelSet, powers: &[f64], serving: &[usize]) -> Result<(ClusterLayout, CovarianceSet)> {
    if !channels.is_scalar() {
        return Err(Error::InvalidInput("non-cooperative transmission requires single antennas".into()));
    }
    let b = channels.num_bases();
    check_powers(powers, b)?;
    if serving.len() != channels.num_users() {
        return Err(Error::InvalidInput(format!("{} serving bases for {} users", serving.len(), channels.num_users())));
    }
    let mut taken = vec![false; b];
    for &j in serving {
        if j >= b {
            return Err(Error::IndexOutOfRange { index: j, limit: b });
        }
        if taken[j] {
            return Err(Error::InvalidInput(format!("base {j} serves more than one user")));
        }
        taken[j] = true;
    }
    let layout = ClusterLayout::new(serving.iter().map(|&j| vec![j]).collect(), vec![1; b])?;
    let q = CovarianceSet::new(serving.iter().map(|&j| CMat::from_element(1, 1, c(powers[j]))).collect());
    Ok((layout, q))
}

/// `log₂(1 + P_s|h_is|² / (1 + Σ_{j≠s} P_j|h_ij|²))` with `s` the serving base
/// of user `i`; bases without a user stay silent.
pub fn noncoop_rates(channels: &ChannelSet, powers: &[f64], serving: &[usize]) -> Result<Vec<f64>> {
    let (layout, q) = singleton_setup(channels, powers, serving)?;
    achievable_rates(channels, &layout, &q)
}

pub fn noncoop(channels: &ChannelSet, powers: &[f64], serving: &[usize], utility: &Utility) -> Result<StrategyResult> {
    let (layout, q) = singleton_setup(channels, powers, serving)?;
    let report = rate_report(channels, &layout, &q, utility)?;
    Ok(StrategyResult {
        strategy: Strategy::Noncoop,
        sum_rate: report.sum_rate(),
        report,
        covariances: Some(q),
        layout: Some(layout),
        certificates: Vec::new(),
        iterations: 0,
        converged: true,
        flags: Vec::new(),
        utility_trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_closed_form() {
        let g = [[1.0, 0.3, 0.1], [0.2, 0.8, 0.4], [0.05, 0.6, 1.5]];
        let h = CMat::from_fn(3, 3, |i, j| c(g[i][j]));
        let ch = ChannelSet::from_scalar(&h).unwrap();
        let p = [2.0, 3.0, 4.0];
        let rates = noncoop_rates(&ch, &p, &[0, 1, 2]).unwrap();
        for i in 0..3 {
            let interf: f64 = (0..3).filter(|&j| j != i).map(|j| p[j] * g[i][j] * g[i][j]).sum();
            let expect = (1.0 + p[i] * g[i][i] * g[i][i] / (1.0 + interf)).log2();
            assert!((rates[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn no_interference_gives_point_to_point_rate() {
        let ch = ChannelSet::from_scalar(&CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(2.0)]))).unwrap();
        let res = noncoop(&ch, &[10.0, 10.0], &[0, 1], &Utility::SumRate).unwrap();
        assert!((res.report.rates[0] - 11f64.log2()).abs() < 1e-12);
        assert!((res.report.rates[1] - 41f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn shared_serving_base_is_rejected() {
        let ch = ChannelSet::from_scalar(&CMat::from_element(2, 2, c(1.0))).unwrap();
        assert!(noncoop_rates(&ch, &[1.0, 1.0], &[0, 0]).is_err());
    }

    #[test]
    fn idle_base_is_silent() {
        let h = CMat::from_row_slice(1, 2, &[c(1.0), c(5.0)]);
        let ch = ChannelSet::from_scalar(&h).unwrap();
        let r = noncoop_rates(&ch, &[3.0, 3.0], &[0]).unwrap();
        assert!((r[0] - 4f64.log2()).abs() < 1e-12);
    }
}
