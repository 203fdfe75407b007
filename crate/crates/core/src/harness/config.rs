//! Experiment configuration: a TOML file plus command-line overrides.
//!
//! ```toml
//! name = "fig3"
//! network = "line"            # line | hex
//! seed = 2009
//! strategies = ["noncoop", "zf", "dpc", "sin"]
//! cluster_sizes = [3, 7, 21]
//! clustering = ["nearest-bases"]      # nearest-bases | nearest-interferers
//! utility = "sum-rate"                # sum-rate | proportional-fair
//! epsilon = 0.01
//! single_iteration = true
//! outage_fraction = 0.1
//! snr_db = [0.0, 10.0]                # or a [snr_range] table
//!
//! [snr_range]
//! start = -10.0
//! stop = 40.0
//! step = 2.0
//!
//! [trials]
//! shadow = 1
//! fading = 20
//!
//! [line]
//! bases = 21
//! spacing = 1.0
//! offset = 1.0
//! pathloss_exponent = 4.0
//!
//! [hex]                               # any HexParams field
//! pathloss_exponent = 3.76
//!
//! [output]
//! dir = "results/fig3"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::netgen::HexParams;
use crate::precoders::{PrecoderConfig, Strategy};
use crate::rate_model::Utility;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Clustering {
    NearestBases,
    NearestInterferers,
}

impl Clustering {
    pub fn name(self) -> &'static str {
        match self {
            Clustering::NearestBases => "nearest-bases",
            Clustering::NearestInterferers => "nearest-interferers",
        }
    }
}

impl fmt::Display for Clustering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Clustering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest-bases" => Ok(Clustering::NearestBases),
            "nearest-interferers" => Ok(Clustering::NearestInterferers),
            _ => Err(Error::Config(format!("unknown clustering '{s}' (expected nearest-bases or nearest-interferers)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSpec {
    Line { bases: usize, spacing: f64, offset: f64, pathloss_exponent: f64 },
    Hex(HexParams),
}

impl NetworkSpec {
    pub fn name(&self) -> &'static str {
        match self {
            NetworkSpec::Line { .. } => "line",
            NetworkSpec::Hex(_) => "hex",
        }
    }
}

/// Validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub network: NetworkSpec,
    pub snr_db: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
    pub clusterings: Vec<Clustering>,
    pub strategies: Vec<Strategy>,
    pub utility: Utility,
    pub shadow_trials: usize,
    pub fading_trials: usize,
    pub seed: u64,
    pub precoder: PrecoderConfig,
    pub output_dir: PathBuf,
}

/// Command-line overrides; `None` keeps the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub snr_db: Option<Vec<f64>>,
    pub cluster_sizes: Option<Vec<usize>>,
    pub strategies: Option<Vec<Strategy>>,
    pub seed: Option<u64>,
    /// Fading realizations per shadow realization.
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    name: Option<String>,
    network: String,
    seed: Option<u64>,
    strategies: Vec<String>,
    #[serde(default)]
    cluster_sizes: Vec<usize>,
    #[serde(default)]
    clustering: Vec<String>,
    utility: Option<String>,
    utility_floor: Option<f64>,
    epsilon: Option<f64>,
    single_iteration: Option<bool>,
    max_outer_iterations: Option<usize>,
    outage_fraction: Option<f64>,
    snr_db: Option<Vec<f64>>,
    snr_range: Option<SnrRange>,
    trials: Option<TrialsSection>,
    line: Option<LineSection>,
    hex: Option<HexParams>,
    output: Option<OutputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnrRange {
    start: f64,
    stop: f64,
    step: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialsSection {
    shadow: Option<usize>,
    fading: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineSection {
    bases: Option<usize>,
    spacing: Option<f64>,
    offset: Option<f64>,
    pathloss_exponent: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
}

/// Inclusive grid `start, start + step, …, stop`.
pub fn snr_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step > 0.0 && stop >= start) {
        return Err(Error::Config(format!("bad SNR range {start}..{stop} step {step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let network = match file.network.as_str() {
            "line" => {
                if file.hex.is_some() {
                    return Err(Error::Config("[hex] section given for a line network".into()));
                }
                let l = file.line.unwrap_or(LineSection { bases: None, spacing: None, offset: None, pathloss_exponent: None });
                NetworkSpec::Line {
                    bases: l.bases.unwrap_or(21),
                    spacing: l.spacing.unwrap_or(1.0),
                    offset: l.offset.unwrap_or(1.0),
                    pathloss_exponent: l.pathloss_exponent.unwrap_or(4.0),
                }
            }
            "hex" => {
                if file.line.is_some() {
                    return Err(Error::Config("[line] section given for a hex network".into()));
                }
                NetworkSpec::Hex(file.hex.unwrap_or_default())
            }
            other => return Err(Error::Config(format!("unknown network '{other}' (expected line or hex)"))),
        };
        let snr_db = match (file.snr_db, file.snr_range) {
            (Some(_), Some(_)) => return Err(Error::Config("give either snr_db or [snr_range], not both".into())),
            (Some(v), None) => v,
            (None, Some(r)) => snr_grid(r.start, r.stop, r.step)?,
            (None, None) => return Err(Error::Config("missing snr_db or [snr_range]".into())),
        };
        let strategies = file
            .strategies
            .iter()
            .map(|s| s.parse::<Strategy>().map_err(|e| Error::Config(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let clusterings = if file.clustering.is_empty() {
            vec![Clustering::NearestBases]
        } else {
            file.clustering.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>()?
        };
        let utility = match file.utility.as_deref().unwrap_or("sum-rate") {
            "sum-rate" => Utility::SumRate,
            "proportional-fair" => Utility::ProportionalFair { floor: file.utility_floor.unwrap_or(0.1) },
            other => return Err(Error::Config(format!("unknown utility '{other}' (expected sum-rate or proportional-fair)"))),
        };
        let defaults = PrecoderConfig::default();
        let trials = file.trials.unwrap_or(TrialsSection { shadow: None, fading: None });
        let name = file.name.unwrap_or_else(|| "experiment".into());
        let config = ExperimentConfig {
            output_dir: file.output.and_then(|o| o.dir).unwrap_or_else(|| PathBuf::from("results").join(&name)),
            name,
            network,
            snr_db,
            cluster_sizes: file.cluster_sizes,
            clusterings,
            strategies,
            utility,
            shadow_trials: trials.shadow.unwrap_or(1),
            fading_trials: trials.fading.unwrap_or(1),
            seed: file.seed.unwrap_or(0),
            precoder: PrecoderConfig {
                epsilon: file.epsilon.unwrap_or(defaults.epsilon),
                max_outer_iterations: file.max_outer_iterations.unwrap_or(defaults.max_outer_iterations),
                single_iteration: file.single_iteration.unwrap_or(false),
                outage_fraction: file.outage_fraction.unwrap_or(defaults.outage_fraction),
                solver: defaults.solver,
            },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(v) = &o.snr_db {
            self.snr_db = v.clone();
        }
        if let Some(v) = &o.cluster_sizes {
            self.cluster_sizes = v.clone();
        }
        if let Some(v) = &o.strategies {
            self.strategies = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.trials {
            self.fading_trials = v;
        }
        if let Some(v) = &o.out {
            self.output_dir = v.clone();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.shadow_trials == 0 || self.fading_trials == 0 {
            return Err(Error::Config("trial counts must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Config("SNR list is empty".into()));
        }
        if let Some(x) = self.snr_db.iter().find(|x| !x.is_finite()) {
            return Err(Error::Config(format!("SNR {x} dB is not finite")));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies".into()));
        }
        if self.clusterings.is_empty() {
            return Err(Error::Config("no clustering algorithm".into()));
        }
        if self.strategies.iter().any(|s| s.uses_clusters()) && self.cluster_sizes.is_empty() {
            return Err(Error::Config("cluster-based strategy without cluster sizes".into()));
        }
        let bases = self.num_bases();
        if let Some(s) = self.cluster_sizes.iter().find(|&&s| s == 0 || s > bases) {
            return Err(Error::Config(format!("cluster size {s} outside 1..={bases}")));
        }
        if !(self.precoder.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon {} must be > 0", self.precoder.epsilon)));
        }
        if !(0.0..1.0).contains(&self.precoder.outage_fraction) {
            return Err(Error::Config(format!("outage fraction {} outside [0, 1)", self.precoder.outage_fraction)));
        }
        match &self.network {
            NetworkSpec::Line { bases, spacing, offset, pathloss_exponent } => {
                if *bases == 0 || !(*spacing > 0.0) || !(*offset >= 0.0) || !(*pathloss_exponent > 0.0) {
                    return Err(Error::Config("line network needs bases ≥ 1, spacing > 0, offset ≥ 0, exponent > 0".into()));
                }
                if self.shadow_trials != 1 {
                    return Err(Error::Config("line network has no shadowing; set trials.shadow = 1".into()));
                }
            }
            NetworkSpec::Hex(_) => {}
        }
        if let Utility::ProportionalFair { floor } = self.utility {
            if !(floor > 0.0) {
                return Err(Error::Config(format!("utility floor {floor} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn num_bases(&self) -> usize {
        match &self.network {
            NetworkSpec::Line { bases, .. } => *bases,
            NetworkSpec::Hex(_) => crate::netgen::HEX_SECTORS,
        }
    }

    pub fn num_trials(&self) -> usize {
        self.shadow_trials * self.fading_trials
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
network = "line"
strategies = ["noncoop"]
snr_db = [10.0]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.num_bases(), 21);
        assert_eq!(c.num_trials(), 1);
        assert_eq!(c.clusterings, vec![Clustering::NearestBases]);
        assert_eq!(c.utility, Utility::SumRate);
    }

    #[test]
    fn snr_range_is_inclusive() {
        let g = snr_grid(-10.0, 40.0, 2.0).unwrap();
        assert_eq!(g.len(), 26);
        assert_eq!(g[0], -10.0);
        assert_eq!(*g.last().unwrap(), 40.0);
        assert!(snr_grid(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_names_and_counts() {
        for bad in [
            MINIMAL.replace("noncoop", "mmse"),
            MINIMAL.replace("\"line\"", "\"ring\""),
            format!("{MINIMAL}clustering = [\"random\"]\n"),
            format!("{MINIMAL}[trials]\nfading = 0\n"),
            format!("{MINIMAL}bogus = 1\n"),
            MINIMAL.replace("noncoop", "sin"),
            format!("{MINIMAL}cluster_sizes = [22]\n"),
        ] {
            let e = ExperimentConfig::from_toml(&bad).unwrap_err();
            assert_eq!(e.kind(), "config", "{bad}");
        }
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.apply(&Overrides {
            snr_db: Some(vec![0.0, 5.0]),
            strategies: Some(vec![Strategy::Zf, Strategy::Sin]),
            cluster_sizes: Some(vec![3]),
            seed: Some(7),
            trials: Some(4),
            out: Some("x".into()),
        })
        .unwrap();
        assert_eq!(c.snr_db, vec![0.0, 5.0]);
        assert_eq!(c.seed, 7);
        assert_eq!(c.num_trials(), 4);
        assert_eq!(c.output_dir, PathBuf::from("x"));
        assert!(c.apply(&Overrides { snr_db: Some(vec![]), ..Default::default() }).is_err());
    }

    #[test]
    fn hex_section_overrides_defaults() {
        let c = ExperimentConfig::from_toml(
            "network = \"hex\"\nstrategies = [\"sin\"]\ncluster_sizes = [2]\nsnr_db = [20.0]\n[hex]\nshadow_std_db = 4.0\n",
        )
        .unwrap();
        match c.network {
            NetworkSpec::Hex(p) => {
                assert_eq!(p.shadow_std_db, 4.0);
                assert_eq!(p.pathloss_exponent, HexParams::default().pathloss_exponent);
            }
            _ => panic!("expected hex"),
        }
        assert_eq!(c.num_bases(), 57);
    }
}
