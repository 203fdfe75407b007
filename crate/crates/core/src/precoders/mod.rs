//! Transmission strategies. Each maps one channel realization, a cluster
//! layout, per-base powers and a utility to a [`StrategyResult`].

mod dpc;
mod myopic;
mod noncoop;
mod sin;
mod zf;

use std::fmt;
use std::str::FromStr;

pub use dpc::dpc_bound;
pub use myopic::{myopic_zf, outage_users};
pub use noncoop::{noncoop, noncoop_rates};
pub use sin::{sin_precode, sin_subproblem, SinState};
pub use zf::zf_fullnet;

use crate::clustering::ClusterLayout;
use crate::detmax::{SolverCertificate, SolverOptions};
use crate::error::{Error, Result};
use crate::netgen::ChannelSet;
use crate::rate_model::{CovarianceSet, RateReport, Utility};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Sin,
    Zf,
    Dpc,
    MyopicZf,
    Noncoop,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Strategy::Sin, Strategy::Zf, Strategy::Dpc, Strategy::MyopicZf, Strategy::Noncoop];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Sin => "sin",
            Strategy::Zf => "zf",
            Strategy::Dpc => "dpc",
            Strategy::MyopicZf => "myopic-zf",
            Strategy::Noncoop => "noncoop",
        }
    }

    /// Whether results depend on the coordination cluster layout.
    pub fn uses_clusters(self) -> bool {
        matches!(self, Strategy::Sin | Strategy::MyopicZf)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown strategy '{s}' (expected sin, zf, dpc, myopic-zf or noncoop)")))
    }
}

/// Knobs shared by the strategies.
#[derive(Debug, Clone)]
pub struct PrecoderConfig {
    /// Outer-loop stopping tolerance on the utility improvement (bits).
    pub epsilon: f64,
    pub max_outer_iterations: usize,
    /// Stop after the first convexified solve.
    pub single_iteration: bool,
    /// Fraction of users left in outage by myopic ZF.
    pub outage_fraction: f64,
    pub solver: SolverOptions,
}

impl Default for PrecoderConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            max_outer_iterations: 50,
            single_iteration: false,
            outage_fraction: 0.1,
            solver: SolverOptions::default(),
        }
    }
}

/// Everything a strategy needs about one realization.
#[derive(Debug, Clone, Copy)]
pub struct PrecodeInput<'a> {
    pub channels: &'a ChannelSet,
    pub layout: &'a ClusterLayout,
    pub powers: &'a [f64],
    pub utility: &'a Utility,
    /// Serving base of each user for non-cooperative transmission.
    pub serving: &'a [usize],
}

#[derive(Debug, Clone)]
pub struct StrategyResult {
    pub strategy: Strategy,
    /// Per-user rates from the covariances. Empty for the DPC bound, which has
    /// no per-user split.
    pub report: RateReport,
    pub sum_rate: f64,
    pub covariances: Option<CovarianceSet>,
    /// Layout the covariances are expressed in.
    pub layout: Option<ClusterLayout>,
    pub certificates: Vec<SolverCertificate>,
    pub iterations: usize,
    pub converged: bool,
    /// Non-fatal conditions, e.g. dropped users or a nulling fallback.
    pub flags: Vec<String>,
    /// Utility of the convexified problem after each outer iteration (SIN only).
    pub utility_trace: Vec<f64>,
}

impl StrategyResult {
    pub fn label(&self) -> &'static str {
        self.strategy.name()
    }
}

/// Dispatch by strategy.
pub fn run_strategy(strategy: Strategy, input: &PrecodeInput<'_>, config: &PrecoderConfig) -> Result<StrategyResult> {
    match strategy {
        Strategy::Sin => sin_precode(input.channels, input.layout, input.powers, input.utility, config),
        Strategy::Zf => zf_fullnet(input.channels, input.powers, input.utility, &config.solver),
        Strategy::Dpc => dpc_bound(input.channels, input.powers),
        Strategy::MyopicZf => {
            myopic_zf(input.channels, input.layout, input.powers, input.serving, config.outage_fraction, input.utility)
        }
        Strategy::Noncoop => noncoop(input.channels, input.powers, input.serving, input.utility),
    }
}

pub(crate) fn check_powers(powers: &[f64], bases: usize) -> Result<()> {
    if powers.len() != bases {
        return Err(Error::InvalidInput(format!("{} powers for {bases} bases", powers.len())));
    }
    if let Some(p) = powers.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::InvalidInput(format!("base power {p} must be positive")));
    }
    Ok(())
}
