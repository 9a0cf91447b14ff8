//! Experiment configuration: a flat TOML key-value file plus `key=value`
//! overrides.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::entanglement::ChshSettings;
use crate::fock::Spatial;
use crate::optics::SourceParams;

pub const DEFAULT_CUTOFF: u32 = 8;
pub const DEFAULT_ANGLE_STEPS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Derive,
    Bell,
    Qkd,
    Dist,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Derive => "derive",
            Command::Bell => "bell",
            Command::Qkd => "qkd",
            Command::Dist => "dist",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    WeakPair,
    Squeezed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ReflectionPhase {
    #[default]
    #[serde(rename = "1")]
    One,
    #[serde(rename = "i")]
    I,
    #[serde(rename = "-1")]
    MinusOne,
    #[serde(rename = "-i")]
    MinusI,
}

impl ReflectionPhase {
    pub fn value(self) -> Complex64 {
        match self {
            ReflectionPhase::One => Complex64::new(1.0, 0.0),
            ReflectionPhase::I => Complex64::new(0.0, 1.0),
            ReflectionPhase::MinusOne => Complex64::new(-1.0, 0.0),
            ReflectionPhase::MinusI => Complex64::new(0.0, -1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Records,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "records" => Ok(OutputFormat::Records),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(config_error(format!(
                "unknown format {other:?} (expected records or csv)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    A,
    B,
}

impl Arm {
    pub fn spatial(self) -> Spatial {
        match self {
            Arm::A => Spatial::OutA,
            Arm::B => Spatial::OutB,
        }
    }
}

/// Every key accepted in a config file. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub source: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default = "default_cutoff")]
    pub cutoff: u32,
    #[serde(default)]
    pub reflection_phase: ReflectionPhase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Squeezing values for a QKD sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alice_angles: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bob_angles: Option<[f64; 2]>,
    /// Analyzer grid `k * pi / angle_steps`, `k < angle_steps`.
    #[serde(default = "default_angle_steps")]
    pub angle_steps: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<Arm>,
    /// Born-rule shots for the sampled photon-number histogram.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
}

fn default_cutoff() -> u32 {
    DEFAULT_CUTOFF
}

fn default_eta() -> f64 {
    1.0
}

fn default_angle_steps() -> u32 {
    DEFAULT_ANGLE_STEPS
}

/// Parses a `key=value` override. Values are read as TOML literals and fall
/// back to bare strings (`--set source=squeezed`).
pub fn parse_override(spec: &str) -> Result<(String, toml::Value), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_error(format!("override {spec:?} is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(config_error(format!("override {spec:?} has an empty key")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

impl ExperimentConfig {
    /// Parses a config file body and applies overrides (overrides win).
    pub fn load(text: &str, overrides: &[(String, toml::Value)]) -> Result<Self, ConfigError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| config_error(format!("config parse error: {e}")))?;
        for (k, v) in overrides {
            table.insert(k.clone(), v.clone());
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| config_error(format!("invalid config: {}", e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything the given command needs before any work starts.
    pub fn validate(&self, command: Command) -> Result<(), ConfigError> {
        match (self.source, self.p, self.r) {
            (SourceKind::WeakPair, Some(p), _) if (0.0..1.0).contains(&p) => {}
            (SourceKind::WeakPair, Some(p), _) => {
                return Err(config_error(format!("p must lie in [0, 1), got {p}")))
            }
            (SourceKind::WeakPair, None, _) => {
                return Err(config_error("source = \"weak-pair\" requires p"))
            }
            (SourceKind::Squeezed, _, Some(r)) if r.is_finite() => {}
            (SourceKind::Squeezed, _, Some(r)) => {
                return Err(config_error(format!("r must be finite, got {r}")))
            }
            (SourceKind::Squeezed, _, None) if command == Command::Qkd && self.r_grid.is_some() => {
            }
            (SourceKind::Squeezed, _, None) => {
                return Err(config_error("source = \"squeezed\" requires r"))
            }
        }
        if self.cutoff == 0 {
            return Err(config_error("cutoff must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(config_error(format!(
                "eta must lie in [0, 1], got {}",
                self.eta
            )));
        }
        if let Some(grid) = &self.r_grid {
            if grid.is_empty() || grid.iter().any(|r| !r.is_finite()) {
                return Err(config_error(
                    "r_grid must be a non-empty list of finite values",
                ));
            }
        }
        for angles in [self.alice_angles, self.bob_angles].into_iter().flatten() {
            if angles.iter().any(|a| !a.is_finite()) {
                return Err(config_error("analyzer angles must be finite"));
            }
        }
        match command {
            Command::Qkd => {
                if self.source != SourceKind::Squeezed {
                    return Err(config_error("qkd requires source = \"squeezed\""));
                }
                if self.seed.is_none() {
                    return Err(config_error("qkd requires an explicit seed"));
                }
                match self.rounds {
                    Some(n) if n >= 1 => {}
                    _ => return Err(config_error("qkd requires rounds >= 1")),
                }
            }
            Command::Bell => {
                if self.angle_steps == 0 {
                    return Err(config_error("angle_steps must be at least 1"));
                }
            }
            Command::Dist => {
                if self.samples.is_some_and(|s| s > 0) && self.seed.is_none() {
                    return Err(config_error("sampling requires an explicit seed"));
                }
            }
            Command::Derive => {}
        }
        Ok(())
    }

    /// Source parameters for a single run (`r` overridden by sweep points).
    pub fn source_params(&self) -> SourceParams {
        match self.source {
            SourceKind::WeakPair => SourceParams::WeakPair {
                p: self.p.unwrap_or(0.0),
            },
            SourceKind::Squeezed => SourceParams::Squeezed {
                r: self.r.unwrap_or(0.0),
            },
        }
    }

    pub fn chsh_settings(&self) -> ChshSettings {
        let standard = ChshSettings::standard();
        ChshSettings {
            alice: self
                .alice_angles
                .map(|[a, b]| (a, b))
                .unwrap_or(standard.alice),
            bob: self.bob_angles.map(|[a, b]| (a, b)).unwrap_or(standard.bob),
        }
    }

    pub fn angle_grid(&self) -> Vec<f64> {
        let steps = self.angle_steps.max(1);
        (0..steps)
            .map(|k| f64::from(k) * PI / f64::from(steps))
            .collect()
    }

    /// The config with output-only keys cleared; this is what gets echoed
    /// and hashed, so results do not depend on where they are written.
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            out: None,
            format: None,
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON form of [`Self::experiment`].
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.experiment()).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QKD: &str = r#"
source = "squeezed"
r = 0.3
rounds = 100
seed = 7
"#;

    #[test]
    fn defaults_applied() {
        let c = ExperimentConfig::load(QKD, &[]).unwrap();
        assert_eq!(c.cutoff, 8);
        assert_eq!(c.reflection_phase, ReflectionPhase::One);
        assert_eq!(c.eta, 1.0);
        assert_eq!(c.angle_steps, 64);
        c.validate(Command::Qkd).unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let err =
            ExperimentConfig::load("source = \"squeezed\"\nr = 0.3\nbogus = 1\n", &[]).unwrap_err();
        assert!(err.0.contains("bogus"), "{err}");
    }

    #[test]
    fn overrides_win() {
        let overrides = vec![
            parse_override("r=0.5").unwrap(),
            parse_override("reflection_phase=i").unwrap(),
            parse_override("r_grid=[0.2, 0.4]").unwrap(),
        ];
        let c = ExperimentConfig::load(QKD, &overrides).unwrap();
        assert_eq!(c.r, Some(0.5));
        assert_eq!(c.reflection_phase, ReflectionPhase::I);
        assert_eq!(c.r_grid, Some(vec![0.2, 0.4]));
        assert!(parse_override("novalue").is_err());
        assert!(parse_override("=3").is_err());
    }

    #[test]
    fn seed_required_for_randomized_commands() {
        let c =
            ExperimentConfig::load("source = \"squeezed\"\nr = 0.3\nrounds = 10\n", &[]).unwrap();
        assert!(c.validate(Command::Qkd).unwrap_err().0.contains("seed"));
        let d =
            ExperimentConfig::load("source = \"squeezed\"\nr = 0.3\nsamples = 10\n", &[]).unwrap();
        assert!(d.validate(Command::Dist).is_err());
        assert!(d.validate(Command::Derive).is_ok());
    }

    #[test]
    fn invalid_source_parameters() {
        let c = ExperimentConfig::load("source = \"weak-pair\"\np = 1.0\n", &[]).unwrap();
        assert!(c.validate(Command::Derive).is_err());
        let c = ExperimentConfig::load("source = \"weak-pair\"\n", &[]).unwrap();
        assert!(c.validate(Command::Derive).is_err());
        let c = ExperimentConfig::load(
            "source = \"weak-pair\"\np = 0.1\nseed = 1\nrounds = 5\n",
            &[],
        )
        .unwrap();
        assert!(c.validate(Command::Qkd).is_err());
    }

    #[test]
    fn hash_ignores_output_keys() {
        let a = ExperimentConfig::load(QKD, &[]).unwrap();
        let b = ExperimentConfig::load(QKD, &[parse_override("out=\"x.jsonl\"").unwrap()]).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::load(QKD, &[parse_override("seed=8").unwrap()]).unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn angle_grid_spans_half_turn() {
        let c = ExperimentConfig::load(QKD, &[parse_override("angle_steps=4").unwrap()]).unwrap();
        let g = c.angle_grid();
        assert_eq!(g.len(), 4);
        assert!((g[2] - PI / 2.0).abs() < 1e-15);
    }
}
