//! Sum capacity of the broadcast channel under per-antenna power constraints
//! as the saddle value of
//! `f(q, s) = ln det(Σ_i s_i h_i h_iᴴ + diag q) − Σ_j ln q_j`,
//! maximized over uplink powers `s ≥ 0, Σ s ≤ P_tot` and minimized over
//! `q > 0, Σ_j q_j P_j ≤ P_tot`.
//!
//! Both sides carry a logarithmic barrier; the saddle of the barrier problem
//! is found by Newton's method on its full gradient, with backtracking on the
//! gradient norm, while the barrier weight is driven to zero.

use nalgebra::{DMatrix, DVector};

use super::block::{solve_block_concave, BlockProblem, LinearBudget, Receiver, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, LN2};

#[derive(Debug, Clone)]
pub struct MinimaxProblem {
    /// One aggregate channel vector per user, length = number of antennas.
    pub channels: Vec<DVector<C64>>,
    /// Per-antenna power limits.
    pub powers: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MinimaxOptions {
    /// Target for the barrier contribution `t · (K + n + 2)` in nats.
    pub tol: f64,
    pub max_newton_per_stage: usize,
    pub max_stages: usize,
    /// Largest barrier contribution at which a stalled centering is accepted.
    pub stall_tol: f64,
}

impl Default for MinimaxOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_newton_per_stage: 200, max_stages: 60, stall_tol: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct MinimaxSolution {
    /// Saddle value in bits.
    pub sum_rate: f64,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    pub gradient_residual: f64,
    pub barrier_weight: f64,
    /// Certified gap of the final maximization over `s` (nats).
    pub inner_gap: f64,
    pub iterations: usize,
}

/// `f(q, s)` in nats, `None` outside the domain.
pub fn saddle_objective(problem: &MinimaxProblem, q: &[f64], s: &[f64]) -> Option<f64> {
    if q.iter().any(|x| !(*x > 0.0)) {
        return None;
    }
    let a = build_a(&problem.channels, q, s, 1.0);
    let ld = linalg::logdet_hpd(&a)?;
    Some(ld - q.iter().map(|x| x.ln()).sum::<f64>())
}

fn build_a(h: &[DVector<C64>], q: &[f64], s: &[f64], scale: f64) -> CMat {
    let n = q.len();
    let mut a = CMat::from_diagonal(&DVector::from_iterator(n, q.iter().map(|x| c(*x))));
    for (hi, si) in h.iter().zip(s) {
        a += (hi * hi.adjoint()).scale(si * scale);
    }
    linalg::hermitian_part(&a)
}

struct Scaled<'a> {
    h: &'a [DVector<C64>],
    p: Vec<f64>,
    total: f64,
    sigma: f64,
}

struct Point {
    grad: DVector<f64>,
    hess: Option<DMatrix<f64>>,
}

impl Scaled<'_> {
    /// Barrier saddle function with gradient and (optionally) Hessian; the
    /// variable vector is `[s; q]` with `s` in units of `sigma`.
    fn eval(&self, x: &[f64], t: f64, hessian: bool) -> Option<Point> {
        let k = self.h.len();
        let n = self.p.len();
        let (s, q) = x.split_at(k);
        if s.iter().chain(q).any(|v| !(*v > 0.0)) {
            return None;
        }
        let s_slack = self.total - s.iter().sum::<f64>();
        let q_slack = self.total - self.p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
        if !(s_slack > 0.0 && q_slack > 0.0) {
            return None;
        }
        let a = build_a(self.h, q, s, self.sigma);
        let (chol, ld) = linalg::cholesky_hpd(&a)?;
        let ainv = linalg::hermitian_part(&chol.inverse());
        let f = ld - q.iter().map(|v| v.ln()).sum::<f64>();
        let psi = f + t * (s.iter().map(|v| v.ln()).sum::<f64>() + s_slack.ln())
            - t * (q.iter().map(|v| v.ln()).sum::<f64>() + q_slack.ln());
        if !psi.is_finite() {
            return None;
        }
        let ah: Vec<DVector<C64>> = self.h.iter().map(|hi| (&ainv * hi).scale(self.sigma.sqrt())).collect();
        let mut grad = DVector::zeros(k + n);
        for i in 0..k {
            let hs = self.h[i].scale(self.sigma.sqrt());
            grad[i] = hs.dotc(&ah[i]).re + t / s[i] - t / s_slack;
        }
        for j in 0..n {
            grad[k + j] = ainv[(j, j)].re - 1.0 / q[j] - t / q[j] + t * self.p[j] / q_slack;
        }
        let hess = hessian.then(|| {
            let mut h = DMatrix::zeros(k + n, k + n);
            for i in 0..k {
                let hi = self.h[i].scale(self.sigma.sqrt());
                for m in 0..k {
                    h[(i, m)] = -hi.dotc(&ah[m]).norm_sqr() - t / (s_slack * s_slack);
                }
                h[(i, i)] -= t / (s[i] * s[i]);
                for j in 0..n {
                    let v = -ah[i][j].norm_sqr();
                    h[(i, k + j)] = v;
                    h[(k + j, i)] = v;
                }
            }
            for j in 0..n {
                for m in 0..n {
                    h[(k + j, k + m)] = -ainv[(j, m)].norm_sqr() + t * self.p[j] * self.p[m] / (q_slack * q_slack);
                }
                h[(k + j, k + j)] += (1.0 + t) / (q[j] * q[j]);
            }
            h
        });
        Some(Point { grad, hess })
    }
}

/// Approximate saddle point of the capacity minimax program.
pub fn solve_dpc_minimax(problem: &MinimaxProblem, options: &MinimaxOptions) -> Result<MinimaxSolution> {
    let n = problem.powers.len();
    let k = problem.channels.len();
    if n == 0 || k == 0 {
        return Err(Error::InvalidInput("minimax needs at least one user and one antenna".into()));
    }
    if problem.powers.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::InvalidInput("antenna powers must be positive".into()));
    }
    for (i, h) in problem.channels.iter().enumerate() {
        if h.len() != n {
            return Err(Error::InvalidInput(format!("user {i}: channel length {} != {n}", h.len())));
        }
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical(format!("user {i}: non-finite channel")));
        }
    }
    let total: f64 = problem.powers.iter().sum();
    if problem.channels.iter().all(|h| h.iter().all(|z| z.norm() == 0.0)) {
        return Ok(MinimaxSolution {
            sum_rate: 0.0,
            q: vec![1.0; n],
            s: vec![total / k as f64; k],
            gradient_residual: 0.0,
            barrier_weight: 0.0,
            inner_gap: 0.0,
            iterations: 0,
        });
    }
    let sigma = total / n as f64;
    let sc = Scaled { h: &problem.channels, p: problem.powers.iter().map(|p| p / sigma).collect(), total: total / sigma, sigma };

    let mut x: Vec<f64> = (0..k).map(|_| sc.total / (2.0 * k as f64)).collect();
    x.extend(sc.p.iter().map(|p| sc.total / (2.0 * n as f64 * p)));

    let degree = (k + n + 2) as f64;
    let mut t = 1.0;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut stages = 0;
    'stages: loop {
        stages += 1;
        let mut centred = false;
        for _ in 0..options.max_newton_per_stage {
            let pt = sc.eval(&x, t, true).ok_or_else(|| Error::Numerical("minimax iterate left the domain".into()))?;
            residual = pt.grad.norm();
            if residual <= 1e-9 {
                centred = true;
                break;
            }
            let hess = pt.hess.expect("hessian requested");
            let dir = match hess.lu().solve(&(-&pt.grad)) {
                Some(d) if d.iter().all(|v| v.is_finite()) => d,
                _ => break,
            };
            iterations += 1;
            let merit = residual * residual;
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-14 {
                let trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + alpha * d).collect();
                if let Some(tp) = sc.eval(&trial, t, false) {
                    if tp.grad.norm_squared() <= (1.0 - 1e-4 * alpha) * merit {
                        x = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if !centred {
            // Rounding in the slacks limits how far the barrier can be pushed;
            // the final value is certified by the inner maximization below.
            if t * degree <= options.stall_tol {
                break 'stages;
            }
            return Err(Error::NonConvergence { iterations, gap: t * degree, feasibility: residual });
        }
        if t * degree <= options.tol {
            break;
        }
        if stages >= options.max_stages {
            return Err(Error::NonConvergence { iterations, gap: t * degree, feasibility: residual });
        }
        t *= 0.2;
    }
    let s_hat: Vec<f64> = x[..k].iter().map(|v| v * sigma).collect();
    let mut q = x[k..].to_vec();
    let used: f64 = q.iter().zip(&problem.powers).map(|(a, p)| a * p).sum();
    if used > 0.0 {
        let r = total / used;
        q.iter_mut().for_each(|v| *v *= r);
    }
    let (value, s, inner_gap) = inner_maximum(problem, &q, &s_hat, total)?;
    Ok(MinimaxSolution { sum_rate: value / LN2, q, s, gradient_residual: residual, barrier_weight: t, inner_gap, iterations })
}

/// `max_s f(q, s)` for fixed `q`, an upper bound on the saddle value up to the
/// returned gap.
fn inner_maximum(problem: &MinimaxProblem, q: &[f64], warm: &[f64], total: f64) -> Result<(f64, Vec<f64>, f64)> {
    let k = problem.channels.len();
    let mut block = BlockProblem::new(vec![1; k]);
    let links = problem
        .channels
        .iter()
        .enumerate()
        .map(|(i, h)| (i, CMat::from_iterator(h.len(), 1, h.iter().zip(q).map(|(z, qj)| z / qj.sqrt()))))
        .collect();
    block.receivers.push(Receiver { weight: 1.0, dim: q.len(), links });
    block.budgets.push(LinearBudget { bound: total, terms: (0..k).map(|i| (i, vec![1.0])).collect() });
    let warm: Vec<CMat> = warm.iter().map(|v| CMat::from_element(1, 1, c(*v))).collect();
    let sol = solve_block_concave(&block, Some(&warm), &SolverOptions { gap_abs: 1e-9, gap_rel: 1e-9, ..SolverOptions::default() })?;
    let s = sol.blocks.iter().map(|b| b[(0, 0)].re.max(0.0)).collect();
    Ok((sol.certificate.objective, s, sol.certificate.duality_gap))
}

/// Unilateral deviation test: moving `s` toward any vertex of its feasible set
/// must not raise `f`, and moving `q` toward any feasible point must not lower
/// it, beyond `tol` nats.
pub fn verify_saddle(problem: &MinimaxProblem, solution: &MinimaxSolution, step: f64, tol: f64) -> bool {
    let Some(f0) = saddle_objective(problem, &solution.q, &solution.s) else {
        return false;
    };
    let total: f64 = problem.powers.iter().sum();
    let k = solution.s.len();
    let n = solution.q.len();
    let mix = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (1.0 - step) * x + step * y).collect() };
    let mut s_targets: Vec<Vec<f64>> = vec![vec![0.0; k], vec![total / k as f64; k]];
    for i in 0..k {
        let mut v = vec![0.0; k];
        v[i] = total;
        s_targets.push(v);
    }
    for target in &s_targets {
        match saddle_objective(problem, &solution.q, &mix(&solution.s, target)) {
            Some(f) if f <= f0 + tol => {}
            _ => return false,
        }
    }
    let mut q_targets: Vec<Vec<f64>> = vec![problem.powers.iter().map(|p| total / (n as f64 * p)).collect()];
    for j in 0..n {
        let mut v: Vec<f64> = problem.powers.iter().map(|p| 0.01 * total / (n as f64 * p)).collect();
        v[j] = 0.99 * total / problem.powers[j];
        q_targets.push(v);
    }
    for target in &q_targets {
        match saddle_objective(problem, &mix(&solution.q, target), &solution.s) {
            Some(f) if f >= f0 - tol => {}
            None => {}
            _ => return false,
        }
    }
    true
}
