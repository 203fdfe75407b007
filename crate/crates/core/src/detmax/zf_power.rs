//! Power allocation for zero-forcing precoders: maximize `Σ_i w_i log₂(1 + γ_i)`
//! subject to `|W|² γ ≤ P` and `γ ≥ 0`.

use super::block::{solve_block_concave, BlockProblem, LinearBudget, Receiver, SolverOptions};
use super::SolverCertificate;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, LN2};

#[derive(Debug, Clone)]
pub struct ZfPowerSolution {
    pub gamma: Vec<f64>,
    /// `log₂(1 + γ_i)` per user.
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    /// Weighted objective in bits.
    pub utility: f64,
    /// Users whose precoder column is zero; they receive `γ = 0`.
    pub unconstrained: Vec<usize>,
    pub certificate: SolverCertificate,
}

/// `w` is the `antennas × users` precoder matrix, `powers` the per-antenna limits.
pub fn solve_zf_power(w: &CMat, powers: &[f64], weights: &[f64], options: &SolverOptions) -> Result<ZfPowerSolution> {
    let (rows, users) = w.shape();
    if powers.len() != rows {
        return Err(Error::InvalidInput(format!("{} powers for {rows} antennas", powers.len())));
    }
    if weights.len() != users {
        return Err(Error::InvalidInput(format!("{} weights for {users} users", weights.len())));
    }
    let mag: Vec<Vec<f64>> = (0..rows).map(|j| (0..users).map(|i| w[(j, i)].norm_sqr()).collect()).collect();
    let unconstrained: Vec<usize> = (0..users).filter(|&i| (0..rows).all(|j| mag[j][i] == 0.0)).collect();
    let live: Vec<usize> = (0..users).filter(|i| !unconstrained.contains(i)).collect();

    let mut gamma = vec![0.0; users];
    let certificate = if live.is_empty() {
        SolverCertificate {
            objective: 0.0,
            feasibility_residual: 0.0,
            stationarity_residual: 0.0,
            duality_gap: 0.0,
            iterations: 0,
            stages: 0,
            converged: true,
            kept_warm_start: false,
        }
    } else {
        let mut problem = BlockProblem::new(vec![1; live.len()]);
        for (b, &i) in live.iter().enumerate() {
            problem.receivers.push(Receiver { weight: weights[i], dim: 1, links: vec![(b, CMat::from_element(1, 1, c(1.0)))] });
        }
        for j in 0..rows {
            let terms: Vec<(usize, Vec<f64>)> =
                live.iter().enumerate().filter(|(_, &i)| mag[j][i] > 0.0).map(|(b, &i)| (b, vec![mag[j][i]])).collect();
            if !terms.is_empty() {
                problem.budgets.push(LinearBudget { bound: powers[j], terms });
            }
        }
        let sol = solve_block_concave(&problem, None, options)?;
        for (b, &i) in live.iter().enumerate() {
            gamma[i] = sol.blocks[b][(0, 0)].re.max(0.0);
        }
        sol.certificate
    };
    let rates: Vec<f64> = gamma.iter().map(|g| (1.0 + g).log2()).collect();
    let sum_rate = rates.iter().sum();
    let utility = rates.iter().zip(weights).map(|(r, w)| r * w).sum();
    Ok(ZfPowerSolution {
        gamma,
        rates,
        sum_rate,
        utility,
        unconstrained,
        certificate: SolverCertificate { objective: certificate.objective / LN2, ..certificate },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: usize, cols: usize, v: &[f64]) -> CMat {
        CMat::from_row_iterator(rows, cols, v.iter().map(|x| c(*x)))
    }

    #[test]
    fn identity_channel() {
        let sol = solve_zf_power(&real(3, 3, &[1., 0., 0., 0., 1., 0., 0., 0., 1.]), &[10.0; 3], &[1.0; 3], &SolverOptions::default()).unwrap();
        for g in &sol.gamma {
            assert!((g - 10.0).abs() < 1e-5);
        }
        assert!((sol.sum_rate - 3.0 * 11f64.log2()).abs() < 1e-6);
    }

    #[test]
    fn diagonal_channel_scales_independently() {
        // H = diag(2, 1) so W = diag(1/2, 1).
        let w = real(2, 2, &[0.5, 0., 0., 1.]);
        let sol = solve_zf_power(&w, &[4.0, 3.0], &[1.0, 1.0], &SolverOptions::default()).unwrap();
        assert!((sol.gamma[0] - 16.0).abs() < 1e-6);
        assert!((sol.gamma[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn zero_column_is_flagged() {
        let w = real(2, 2, &[1., 0., 0., 0.]);
        let sol = solve_zf_power(&w, &[1.0, 1.0], &[1.0, 1.0], &SolverOptions::default()).unwrap();
        assert_eq!(sol.unconstrained, vec![1]);
        assert_eq!(sol.gamma[1], 0.0);
    }

    #[test]
    fn coupled_budgets_match_grid_search() {
        let w = real(2, 2, &[0.9, -0.4, 0.3, 1.1]);
        let p = [2.0, 3.0];
        let sol = solve_zf_power(&w, &p, &[1.0, 1.0], &SolverOptions::default()).unwrap();
        let m: Vec<f64> = w.iter().map(|z| z.norm_sqr()).collect();
        let (a00, a10, a01, a11) = (m[0], m[1], m[2], m[3]);
        // Grid over γ₀, the best γ₁ is the largest feasible one.
        let g0_max = (p[0] / a00).min(p[1] / a10);
        let mut best = 0.0f64;
        for s in 0..=100_000 {
            let g0 = g0_max * s as f64 / 100_000.0;
            let g1 = ((p[0] - a00 * g0) / a01).min((p[1] - a10 * g0) / a11).max(0.0);
            best = best.max((1.0 + g0).log2() + (1.0 + g1).log2());
        }
        assert!(sol.sum_rate >= best - 1e-6);
        assert!(sol.sum_rate <= best + 1e-4);
    }
}
