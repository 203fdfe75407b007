//! Dirty-paper-coding sum capacity under per-antenna power limits, used only
//! as an upper bound.

use nalgebra::DVector;

use super::{check_powers, Strategy, StrategyResult};
use crate::detmax::{solve_dpc_minimax, verify_saddle, MinimaxOptions, MinimaxProblem, SolverCertificate};
use crate::error::{Error, Result};
use crate::netgen::ChannelSet;
use crate::rate_model::RateReport;

/// Saddle check: perturbation size and allowed change in nats.
const SADDLE_STEP: f64 = 1e-3;
const SADDLE_TOL: f64 = 1e-7;

/// Sum capacity in bps/Hz. The report carries no per-user rates; its utility
/// is the sum capacity.
pub fn dpc_bound(channels: &ChannelSet, powers: &[f64]) -> Result<StrategyResult> {
    if !channels.is_scalar() {
        return Err(Error::InvalidInput("the capacity bound requires single-antenna bases and users".into()));
    }
    check_powers(powers, channels.num_bases())?;
    let problem = MinimaxProblem {
        channels: (0..channels.num_users()).map(|i| DVector::from_iterator(channels.total_antennas(), channels.aggregate(i).iter().cloned())).collect(),
        powers: powers.to_vec(),
    };
    let sol = solve_dpc_minimax(&problem, &MinimaxOptions::default())?;
    let mut flags = Vec::new();
    if !verify_saddle(&problem, &sol, SADDLE_STEP, SADDLE_TOL) {
        flags.push("saddle-point check failed".to_string());
    }
    let certificate = SolverCertificate {
        objective: sol.sum_rate,
        feasibility_residual: 0.0,
        stationarity_residual: sol.gradient_residual,
        duality_gap: sol.inner_gap,
        iterations: sol.iterations,
        stages: 0,
        converged: true,
        kept_warm_start: false,
    };
    let report = RateReport { rates: Vec::new(), utility: sol.sum_rate, base_power: powers.to_vec(), active: Vec::new() };
    Ok(StrategyResult {
        strategy: Strategy::Dpc,
        report,
        sum_rate: sol.sum_rate,
        covariances: None,
        layout: None,
        certificates: vec![certificate],
        iterations: sol.iterations,
        converged: true,
        flags,
        utility_trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CMat};

    #[test]
    fn single_user_capacity() {
        for (g, p) in [(0.1f64, 1.0f64), (1.0, 10.0), (10.0, 100.0)] {
            let ch = ChannelSet::from_scalar(&CMat::from_element(1, 1, c(g.sqrt()))).unwrap();
            let res = dpc_bound(&ch, &[p]).unwrap();
            assert!((res.sum_rate - (1.0 + g * p).log2()).abs() < 1e-6);
            assert!(res.report.rates.is_empty());
        }
    }

    #[test]
    fn dominates_zero_forcing() {
        use crate::detmax::SolverOptions;
        use crate::rate_model::Utility;
        let h = CMat::from_row_slice(2, 2, &[c(1.0), c(0.6), c(0.4), c(0.9)]);
        let ch = ChannelSet::from_scalar(&h).unwrap();
        let dpc = dpc_bound(&ch, &[3.0, 3.0]).unwrap();
        let zf = super::super::zf_fullnet(&ch, &[3.0, 3.0], &Utility::SumRate, &SolverOptions::default()).unwrap();
        assert!(dpc.sum_rate >= zf.sum_rate - 1e-6);
    }
}
