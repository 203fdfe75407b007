//! Built-in experiments, identical to `configs/fig3.toml` and `configs/fig5.toml`.

use std::fmt;
use std::str::FromStr;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const FIG3_TOML: &str = include_str!("../../configs/fig3.toml");
pub const FIG5_TOML: &str = include_str!("../../configs/fig5.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig3,
    Fig5,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig5 => "fig5",
        }
    }

    /// Desk-scale configuration: 20 line trials or 3 × 3 hex realizations.
    /// `paper_scale` restores 100 line trials or 10 × 10 hex realizations.
    pub fn config(self, paper_scale: bool) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::from_toml(match self {
            Preset::Fig3 => FIG3_TOML,
            Preset::Fig5 => FIG5_TOML,
        })?;
        if paper_scale {
            match self {
                Preset::Fig3 => c.fading_trials = 100,
                Preset::Fig5 => (c.shadow_trials, c.fading_trials) = (10, 10),
            }
        }
        Ok(c)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig3" => Ok(Preset::Fig3),
            "fig5" => Ok(Preset::Fig5),
            _ => Err(Error::Config(format!("unknown preset '{s}' (expected fig3 or fig5)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::{combinations, rows_per_trial};

    #[test]
    fn fig3_shape() {
        let c = Preset::Fig3.config(false).unwrap();
        assert_eq!(c.num_bases(), 21);
        assert_eq!(c.snr_db.len(), 26);
        assert_eq!(c.num_trials(), 20);
        assert!(c.precoder.single_iteration);
        assert_eq!(combinations(&c).len(), 6);
        assert_eq!(rows_per_trial(&c), 156);
        assert_eq!(Preset::Fig3.config(true).unwrap().num_trials(), 100);
    }

    #[test]
    fn fig5_shape() {
        let c = Preset::Fig5.config(false).unwrap();
        assert_eq!(c.num_bases(), 57);
        assert_eq!((c.shadow_trials, c.fading_trials), (3, 3));
        assert!(!c.precoder.single_iteration);
        assert_eq!(combinations(&c).len(), 12);
        assert_eq!(Preset::Fig5.config(true).unwrap().num_trials(), 100);
        assert!("fig4".parse::<Preset>().is_err());
    }
}
