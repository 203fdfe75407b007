//! Convex optimization engines.
//!
//! * [`solve_block_concave`]: maximize a weighted sum of `ln det(I + Σ_k B_rk Q_k B_rkᴴ)`
//!   terms minus a linear penalty over Hermitian PSD blocks `Q_k`, subject to
//!   per-budget linear constraints on the block diagonals. This covers the
//!   convexified precoder subproblem and zero-forcing power allocation.
//! * [`solve_dpc_minimax`]: the convex-concave program whose saddle value is
//!   the broadcast-channel sum capacity under per-antenna power constraints.
//! * [`solve_zf_power`]: zero-forcing power allocation, a thin wrapper around
//!   the block solver.

mod block;
mod minimax;
mod zf_power;

pub use block::{solve_block_concave, BlockProblem, BlockSolution, LinearBudget, Receiver, SolverOptions};
pub use minimax::{solve_dpc_minimax, verify_saddle, MinimaxOptions, MinimaxProblem, MinimaxSolution};
pub use zf_power::{solve_zf_power, ZfPowerSolution};

/// Evidence that a solve met its contract.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverCertificate {
    /// Objective at the returned point (nats).
    pub objective: f64,
    /// Largest constraint violation in linear power units.
    pub feasibility_residual: f64,
    /// Newton decrement at the final centering step.
    pub stationarity_residual: f64,
    /// Certified upper bound on `optimum - objective` (nats).
    pub duality_gap: f64,
    pub iterations: usize,
    pub stages: usize,
    pub converged: bool,
    /// The warm start beat the barrier iterate and was returned instead.
    pub kept_warm_start: bool,
}

/// One row of the optional iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub stage: usize,
    pub barrier_weight: f64,
    pub objective: f64,
    pub decrement: f64,
}

/// Render a trace as CSV (`iteration,stage,barrier_weight,objective,decrement`).
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("iteration,stage,barrier_weight,objective,decrement\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:e},{:.12e},{:e}\n",
            r.iteration, r.stage, r.barrier_weight, r.objective, r.decrement
        ));
    }
    out
}
