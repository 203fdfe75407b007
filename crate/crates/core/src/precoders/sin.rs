//! Soft interference nulling: repeatedly replace each user's interference
//! log-det by its tangent plane at the current covariances and solve the
//! resulting concave program.

use super::{check_powers, PrecoderConfig, Strategy, StrategyResult};
use crate::clustering::ClusterLayout;
use crate::detmax::{solve_block_concave, BlockProblem, LinearBudget, Receiver};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, LN2};
use crate::netgen::ChannelSet;
use crate::rate_model::{cluster_channel, interference_covariance, rate_report, taylor_rate, CovarianceSet, Utility};

/// Outer-loop state.
#[derive(Debug, Clone)]
pub struct SinState {
    /// Linearization point.
    pub qbar: CovarianceSet,
    /// Convexified rates at the last accepted solution (bits).
    pub rbar: Vec<f64>,
    pub iteration: usize,
    pub epsilon: f64,
    /// Convexified utility after each solve (bits); nondecreasing.
    pub utility_trace: Vec<f64>,
}

impl SinState {
    pub fn new(layout: &ClusterLayout, epsilon: f64) -> Self {
        Self {
            qbar: CovarianceSet::zeros(layout),
            rbar: vec![0.0; layout.num_users()],
            iteration: 0,
            epsilon,
            utility_trace: Vec::new(),
        }
    }
}

/// The concave program around `qbar`, in nats:
/// `Σ_i w_i [ln det(I + Σ_k H_i C_k Q_k C_kᵀ H_iᴴ) − tr(Y_i⁻¹ Σ_{k≠i} H_i C_k (Q_k − Q̄_k) C_kᵀ H_iᴴ) − ln det Y_i]`
/// subject to the per-base power limits.
pub fn sin_subproblem(
    channels: &ChannelSet,
    layout: &ClusterLayout,
    powers: &[f64],
    weights: &[f64],
    qbar: &CovarianceSet,
) -> Result<BlockProblem> {
    let k = layout.num_users();
    check_powers(powers, layout.num_bases())?;
    if weights.len() != k || qbar.len() != k {
        return Err(Error::InvalidInput("weights or linearization point do not match the user count".into()));
    }
    let sizes: Vec<usize> = (0..k).map(|u| layout.cluster_antennas(u)).collect();
    let mut problem = BlockProblem::new(sizes.clone());
    let mut penalty: Vec<CMat> = sizes.iter().map(|&n| CMat::zeros(n, n)).collect();
    let mut constant = 0.0;
    for i in 0..k {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let y = interference_covariance(channels, layout, qbar, i)?;
        let (chol, logdet_y) =
            linalg::cholesky_hpd(&y).ok_or_else(|| Error::Numerical(format!("user {i}: singular interference covariance")))?;
        let y_inv = linalg::hermitian_part(&chol.inverse());
        constant -= w * logdet_y;
        let mut links = Vec::new();
        for blk in 0..k {
            let b = cluster_channel(channels, layout, i, blk);
            if b.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            if blk != i {
                let l = b.adjoint() * &y_inv * &b;
                constant += w * linalg::re_inner(&l, qbar.block(blk));
                penalty[blk] += l.scale(w);
            }
            links.push((blk, b));
        }
        problem.receivers.push(Receiver { weight: w, dim: channels.user_antennas()[i], links });
    }
    problem.penalty = penalty.iter().map(|p| Some(linalg::hermitian_part(p))).collect();
    problem.constant = constant;
    for (j, &p) in powers.iter().enumerate() {
        let terms: Vec<(usize, Vec<f64>)> = layout
            .served_users(j)
            .iter()
            .map(|&u| (u, layout.antenna_owner(u).iter().map(|&o| if o == j { 1.0 } else { 0.0 }).collect()))
            .collect();
        if !terms.is_empty() {
            problem.budgets.push(LinearBudget { bound: p, terms });
        }
    }
    Ok(problem)
}

/// Iterate convexified solves from `Q̄ = 0` until the convexified utility
/// improves by less than `epsilon`. Rates are reported at the last solution.
pub fn sin_precode(
    channels: &ChannelSet,
    layout: &ClusterLayout,
    powers: &[f64],
    utility: &Utility,
    config: &PrecoderConfig,
) -> Result<StrategyResult> {
    if !(config.epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon {} must be > 0", config.epsilon)));
    }
    let weights = utility.weights(layout.num_users())?;
    let mut state = SinState::new(layout, config.epsilon);
    let mut ubar = 0.0;
    let mut certificates = Vec::new();
    let mut flags = Vec::new();
    let mut converged = false;
    let mut last: Option<CovarianceSet> = None;
    while state.iteration < config.max_outer_iterations {
        state.iteration += 1;
        let problem = sin_subproblem(channels, layout, powers, &weights, &state.qbar)?;
        let warm = (state.iteration > 1).then(|| state.qbar.blocks());
        let sol = solve_block_concave(&problem, warm, &config.solver)?;
        let cert = sol.certificate.clone();
        if !cert.converged {
            if cert.duality_gap > 1e-4 * (1.0 + cert.objective.abs()) {
                return Err(Error::NonConvergence {
                    iterations: cert.iterations,
                    gap: cert.duality_gap,
                    feasibility: cert.feasibility_residual,
                });
            }
            flags.push(format!("subproblem {} stopped at gap {:.3e}", state.iteration, cert.duality_gap));
        }
        certificates.push(cert.clone());
        let ustar = cert.objective / LN2;
        state.utility_trace.push(ustar);
        let qstar = CovarianceSet::new(sol.blocks);
        let improvement = ustar - ubar;
        let rstar = (0..layout.num_users())
            .map(|i| taylor_rate(channels, layout, &qstar, &state.qbar, i))
            .collect::<Result<Vec<_>>>()?;
        last = Some(qstar.clone());
        if improvement < config.epsilon {
            converged = true;
            break;
        }
        state.qbar = qstar;
        state.rbar = rstar;
        ubar = ustar;
        if config.single_iteration {
            converged = true;
            break;
        }
    }
    if !converged {
        flags.push(format!("outer loop hit the {} iteration cap", config.max_outer_iterations));
    }
    let q = last.expect("at least one outer iteration").validated(layout)?;
    let report = rate_report(channels, layout, &q, utility)?;
    Ok(StrategyResult {
        strategy: Strategy::Sin,
        sum_rate: report.sum_rate(),
        report,
        covariances: Some(q),
        layout: Some(layout.clone()),
        certificates,
        iterations: state.iteration,
        converged,
        flags,
        utility_trace: state.utility_trace,
    })
}
