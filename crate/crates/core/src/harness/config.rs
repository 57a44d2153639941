use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dada::{EstimatorMode, StepSchedule};
use crate::deda::DelayKnowledge;
use crate::env::{AdversarySpec, DelaySpec};
use crate::error::{Error, Result};

/// Algorithm variants the harness can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    /// Importance weighting, expectation tuning.
    Dada,
    /// Implicit exploration, high-probability tuning.
    DadaHp,
    DadaSkip,
    DadaHpSkip,
    DedaKnown,
    /// DeDa with an a priori delay bound `d^B`.
    DedaBound(usize),
}

impl Algo {
    pub fn is_skipping(self) -> bool {
        matches!(self, Self::DadaSkip | Self::DadaHpSkip)
    }

    pub fn is_deda(self) -> bool {
        matches!(self, Self::DedaKnown | Self::DedaBound(_))
    }

    /// Step schedule and estimator of the DAda-based variants.
    pub fn dada_parts(self) -> Option<(StepSchedule, EstimatorMode)> {
        match self {
            Self::Dada | Self::DadaSkip => Some((StepSchedule::Cor1, EstimatorMode::Iw)),
            Self::DadaHp | Self::DadaHpSkip => Some((StepSchedule::Cor2, EstimatorMode::Ix)),
            _ => None,
        }
    }

    pub fn delay_knowledge(self) -> Option<DelayKnowledge> {
        match self {
            Self::DedaKnown => Some(DelayKnowledge::Known),
            Self::DedaBound(b) => Some(DelayKnowledge::PriorBound(b)),
            _ => None,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dada => f.write_str("dada"),
            Self::DadaHp => f.write_str("dada-hp"),
            Self::DadaSkip => f.write_str("dada-skip"),
            Self::DadaHpSkip => f.write_str("dada-hp-skip"),
            Self::DedaKnown => f.write_str("deda-known"),
            Self::DedaBound(b) => write!(f, "deda-bound({b})"),
        }
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        Ok(match text {
            "dada" => Self::Dada,
            "dada-hp" => Self::DadaHp,
            "dada-skip" => Self::DadaSkip,
            "dada-hp-skip" => Self::DadaHpSkip,
            "deda-known" => Self::DedaKnown,
            _ => {
                let bound = text
                    .strip_prefix("deda-bound(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .or_else(|| text.strip_prefix("deda-bound:"))
                    .ok_or_else(|| Error::UnknownSpec(format!("algorithm {text:?}")))?;
                Self::DedaBound(
                    bound
                        .trim()
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("delay bound in {text:?}")))?,
                )
            }
        })
    }
}

impl Serialize for Algo {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Algo {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(de)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Either an explicit seed list or `count` consecutive seeds from `base`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range {
        count: u64,
        #[serde(default)]
        base: u64,
    },
}

impl Default for Seeds {
    fn default() -> Self {
        Self::Range { count: 1, base: 0 }
    }
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Self::List(list) => list.clone(),
            Self::Range { count, base } => (*base..base + count).collect(),
        }
    }
}

fn default_delta() -> f64 {
    0.05
}

/// One experiment: an algorithm on an instance family, over a set of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algo: Algo,
    pub adversary: AdversarySpec,
    pub delays: DelaySpec,
    #[serde(rename = "K", alias = "k")]
    pub arms: usize,
    #[serde(rename = "T", alias = "t")]
    pub rounds: usize,
    #[serde(default)]
    pub seeds: Seeds,
    /// Fixes the environment stream across seeds (one instance, many learner runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_seed: Option<u64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(
        algo: Algo,
        adversary: AdversarySpec,
        delays: DelaySpec,
        arms: usize,
        rounds: usize,
    ) -> Self {
        Self {
            algo,
            adversary,
            delays,
            arms,
            rounds,
            seeds: Seeds::default(),
            instance_seed: None,
            delta: default_delta(),
            csv: None,
            json: None,
            trace_dir: None,
        }
    }

    pub fn with_seeds(mut self, count: u64, base: u64) -> Self {
        self.seeds = Seeds::Range { count, base };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms < 2 {
            return Err(Error::InvalidParameter("K must be at least 2".into()));
        }
        if self.rounds < 1 {
            return Err(Error::InvalidParameter("T must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta {} outside (0, 1)",
                self.delta
            )));
        }
        if self.seeds.to_vec().is_empty() {
            return Err(Error::InvalidParameter("no seeds".into()));
        }
        self.adversary.validate()?;
        self.delays.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let config: Self = serde_json::from_value(value)
            .map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }
}
