//! TOML run-configuration parsing and validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fedsim::{Optimizer, ScenarioConfig};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    csv_dir: Option<PathBuf>,
    synthetic: Option<SyntheticSection>,
    train_frac: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub n_clients: usize,
    pub n_days: usize,
    #[serde(default)]
    pub flat_fraction: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    /// Preset 1-4: (subset_size, local_epochs) = (5,1), (20,1), (5,5), (20,5).
    scenario: Option<u8>,
    rounds: Option<usize>,
    subset_size: Option<usize>,
    local_epochs: Option<usize>,
    learning_rate: Option<f64>,
    optimizer: Option<Optimizer>,
    eligibility_threshold: Option<f64>,
    min_records: Option<usize>,
    look_back: Option<usize>,
    look_ahead: Option<usize>,
    layer_widths: Option<Vec<usize>>,
    batch_size: Option<usize>,
    seed: Option<u64>,
    guard_after_select: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionSection {
    n_participants: usize,
    n_holdout: usize,
}

impl Default for PartitionSection {
    fn default() -> Self {
        PartitionSection {
            n_participants: 180,
            n_holdout: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    #[serde(default = "default_hops")]
    pub default_hops: u32,
    /// Per-client hop overrides.
    #[serde(default)]
    pub hops: BTreeMap<String, u32>,
}

fn default_hops() -> u32 {
    1
}

impl Default for TopologySpec {
    fn default() -> Self {
        TopologySpec {
            default_hops: 1,
            hops: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetloadSpec {
    #[serde(default = "default_model_size")]
    pub model_size_kb: f64,
    /// Aggregate raw-data size across all clients, in kilobits.
    #[serde(default = "default_total_data")]
    pub total_data_kb: f64,
    #[serde(default = "default_multiplier")]
    pub direction_multiplier: u32,
}

fn default_model_size() -> f64 {
    1.9
}
fn default_total_data() -> f64 {
    16000.0
}
fn default_multiplier() -> u32 {
    2
}

impl Default for NetloadSpec {
    fn default() -> Self {
        NetloadSpec {
            model_size_kb: default_model_size(),
            total_data_kb: default_total_data(),
            direction_multiplier: default_multiplier(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(default = "default_out_dir")]
    out_dir: PathBuf,
    #[serde(default)]
    personalize: bool,
    #[serde(default = "default_personalize_epochs")]
    personalize_epochs: usize,
    personalize_learning_rate: Option<f64>,
    /// 0 means the rayon default.
    #[serde(default)]
    workers: usize,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_personalize_epochs() -> usize {
    5
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            out_dir: default_out_dir(),
            personalize: false,
            personalize_epochs: default_personalize_epochs(),
            personalize_learning_rate: None,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    data: DataSection,
    #[serde(default)]
    scenario: ScenarioSection,
    #[serde(default)]
    partition: PartitionSection,
    #[serde(default)]
    topology: TopologySpec,
    #[serde(default)]
    netload: NetloadSpec,
    #[serde(default)]
    run: RunSection,
}

/// Where the client series come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DataSource {
    CsvDir(PathBuf),
    Synthetic(SyntheticSection),
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataSource,
    pub train_frac: f64,
    pub scenario: ScenarioConfig,
    pub n_participants: usize,
    pub n_holdout: usize,
    pub topology: TopologySpec,
    pub netload: NetloadSpec,
    pub out_dir: PathBuf,
    pub personalize: bool,
    pub personalize_epochs: usize,
    pub personalize_learning_rate: f64,
    pub workers: usize,
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?;
    let file: FileConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?;
    resolve(file)
}

fn resolve(file: FileConfig) -> Result<RunConfig> {
    let data = match (&file.data.csv_dir, &file.data.synthetic) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "data: exactly one of csv_dir and synthetic must be set, found both".into(),
            ))
        }
        (None, None) => {
            return Err(Error::Config(
                "data: exactly one of csv_dir and synthetic must be set, found neither".into(),
            ))
        }
        (Some(dir), None) => DataSource::CsvDir(dir.clone()),
        (None, Some(synth)) => DataSource::Synthetic(synth.clone()),
    };

    let s = &file.scenario;
    let preset = match s.scenario {
        None => None,
        Some(n @ 1..=4) => {
            let (k, epochs) = match n {
                1 => (5, 1),
                2 => (20, 1),
                3 => (5, 5),
                _ => (20, 5),
            };
            Some((k, epochs))
        }
        Some(n) => {
            return Err(Error::Config(format!(
                "scenario.scenario: preset must be 1-4, got {}",
                n
            )))
        }
    };
    let defaults = ScenarioConfig::default();
    let scenario = ScenarioConfig {
        rounds: s.rounds.unwrap_or(defaults.rounds),
        subset_size: s
            .subset_size
            .or(preset.map(|p| p.0))
            .unwrap_or(defaults.subset_size),
        local_epochs: s
            .local_epochs
            .or(preset.map(|p| p.1))
            .unwrap_or(defaults.local_epochs),
        learning_rate: s.learning_rate.unwrap_or(defaults.learning_rate),
        optimizer: s.optimizer.unwrap_or(defaults.optimizer),
        eligibility_threshold: s
            .eligibility_threshold
            .unwrap_or(defaults.eligibility_threshold),
        min_records: s.min_records.unwrap_or(defaults.min_records),
        look_back: s.look_back.unwrap_or(defaults.look_back),
        look_ahead: s.look_ahead.unwrap_or(defaults.look_ahead),
        layer_widths: s.layer_widths.clone().unwrap_or(defaults.layer_widths),
        batch_size: s.batch_size.unwrap_or(defaults.batch_size),
        seed: s.seed.unwrap_or(defaults.seed),
        guard_after_select: s.guard_after_select.unwrap_or(defaults.guard_after_select),
    };
    scenario
        .validate()
        .map_err(|e| Error::Config(format!("scenario: {}", e)))?;

    let train_frac = file.data.train_frac.unwrap_or(0.9);
    if !(0.0 < train_frac && train_frac < 1.0) {
        return Err(Error::Config(format!(
            "data.train_frac: must be in (0, 1), got {}",
            train_frac
        )));
    }
    if file.partition.n_participants < 1 {
        return Err(Error::Config(
            "partition.n_participants: must be >= 1".into(),
        ));
    }
    if file.topology.default_hops < 1 || file.topology.hops.values().any(|&h| h < 1) {
        return Err(Error::Config("topology: hop counts must be >= 1".into()));
    }
    if file.netload.model_size_kb <= 0.0 || file.netload.total_data_kb <= 0.0 {
        return Err(Error::Config("netload: sizes must be > 0".into()));
    }
    if !matches!(file.netload.direction_multiplier, 1 | 2) {
        return Err(Error::Config(
            "netload.direction_multiplier: must be 1 or 2".into(),
        ));
    }

    let personalize_learning_rate = file
        .run
        .personalize_learning_rate
        .unwrap_or(scenario.learning_rate);

    Ok(RunConfig {
        data,
        train_frac,
        scenario,
        n_participants: file.partition.n_participants,
        n_holdout: file.partition.n_holdout,
        topology: file.topology,
        netload: file.netload,
        out_dir: file.run.out_dir,
        personalize: file.run.personalize,
        personalize_epochs: file.run.personalize_epochs,
        personalize_learning_rate,
        workers: file.run.workers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(s: &str) -> Result<RunConfig> {
        let file: FileConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        resolve(file)
    }

    #[test]
    fn minimal_preset_fills_paper_defaults() {
        let cfg = parse_str(
            "[data]\nsynthetic = { n_clients = 25, n_days = 28 }\n[scenario]\nscenario = 1\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.subset_size, 5);
        assert_eq!(cfg.scenario.local_epochs, 1);
        assert_eq!(cfg.scenario.rounds, 20);
        assert_eq!(cfg.scenario.look_back, 12);
        assert_eq!(cfg.scenario.look_ahead, 1);
        assert_eq!(cfg.train_frac, 0.9);
        assert_eq!(cfg.netload.direction_multiplier, 2);
    }

    #[test]
    fn zero_rounds_is_a_constraint_violation() {
        let err = parse_str(
            "[data]\nsynthetic = { n_clients = 5, n_days = 10 }\n[scenario]\nrounds = 0\n",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("rounds"), "{}", err);
    }

    #[test]
    fn both_sources_rejected() {
        let err = parse_str(
            "[data]\ncsv_dir = \"d\"\nsynthetic = { n_clients = 5, n_days = 10 }\n",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("exactly one"), "{}", err);
    }

    #[test]
    fn missing_source_rejected() {
        assert!(parse_str("[scenario]\nscenario = 1\n").is_err());
    }

    #[test]
    fn unknown_key_names_the_key() {
        let err = parse_str("[data]\ncsv_dir = \"d\"\nnope = 3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("nope"), "{}", err);
    }

    #[test]
    fn explicit_fields_override_preset() {
        let cfg = parse_str(
            "[data]\ncsv_dir = \"d\"\n[scenario]\nscenario = 2\nlocal_epochs = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.subset_size, 20);
        assert_eq!(cfg.scenario.local_epochs, 3);
    }
}
