//! Pipeline configuration file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ais::Roi;
use crate::cellmap::{FormKind, MapConfig, DEFAULT_CELL_SIZE, DEFAULT_M_MIN};
use crate::contrario::{DetectorConfig, DEFAULT_P};
use crate::fourhot::FourHotSpec;
use crate::store::PreprocessConfig;
use crate::vrnn::{ModelConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Resolution {
    pub lat: f64,
    pub lon: f64,
    pub sog: f64,
    pub cog: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { lat: 0.01, lon: 0.01, sog: 1.0, cog: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub hidden: usize,
    pub subnet_hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { hidden: 100, subnet_hidden: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub samples: usize,
    pub validation_samples: usize,
    pub clip_norm: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            lr: d.lr,
            batch_size: d.batch_size,
            max_epochs: d.max_epochs,
            patience: d.patience,
            samples: d.samples,
            validation_samples: d.validation_samples,
            clip_norm: d.clip_norm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapSection {
    pub cell_size: f64,
    pub m_min: usize,
    pub form: FormKind,
}

impl Default for MapSection {
    fn default() -> Self {
        MapSection { cell_size: DEFAULT_CELL_SIZE, m_min: DEFAULT_M_MIN, form: FormKind::Kde }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSection {
    pub p: f64,
    /// No default: required by `detect` unless a sweep grid is given.
    pub epsilon: Option<f64>,
    /// Monte Carlo samples per step when scoring (map building and detection).
    pub samples: usize,
}

impl Default for DetectorSection {
    fn default() -> Self {
        DetectorSection { p: DEFAULT_P, epsilon: None, samples: 16 }
    }
}

/// Input and output files. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub train_csv: Option<PathBuf>,
    pub validation_csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    pub train_store: Option<PathBuf>,
    pub validation_store: Option<PathBuf>,
    pub test_store: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub history_csv: Option<PathBuf>,
    pub cellmap: Option<PathBuf>,
    pub performance_csv: Option<PathBuf>,
    pub verdicts: Option<PathBuf>,
    pub geojson: Option<PathBuf>,
    pub sweep_csv: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub eval_report: Option<PathBuf>,
}

impl Paths {
    fn all(&self) -> Vec<(&'static str, &Option<PathBuf>)> {
        vec![
            ("train_csv", &self.train_csv),
            ("validation_csv", &self.validation_csv),
            ("test_csv", &self.test_csv),
            ("train_store", &self.train_store),
            ("validation_store", &self.validation_store),
            ("test_store", &self.test_store),
            ("checkpoint", &self.checkpoint),
            ("history_csv", &self.history_csv),
            ("cellmap", &self.cellmap),
            ("performance_csv", &self.performance_csv),
            ("verdicts", &self.verdicts),
            ("geojson", &self.geojson),
            ("sweep_csv", &self.sweep_csv),
            ("labels", &self.labels),
            ("eval_report", &self.eval_report),
        ]
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        fix(&mut self.train_csv);
        fix(&mut self.validation_csv);
        fix(&mut self.test_csv);
        fix(&mut self.train_store);
        fix(&mut self.validation_store);
        fix(&mut self.test_store);
        fix(&mut self.checkpoint);
        fix(&mut self.history_csv);
        fix(&mut self.cellmap);
        fix(&mut self.performance_csv);
        fix(&mut self.verdicts);
        fix(&mut self.geojson);
        fix(&mut self.sweep_csv);
        fix(&mut self.labels);
        fix(&mut self.eval_report);
    }
}

/// Every hyperparameter of the pipeline in one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub roi: Roi,
    pub resolution: Resolution,
    pub preprocess: PreprocessConfig,
    pub model: ModelSection,
    pub train: TrainSection,
    pub map: MapSection,
    pub detector: DetectorSection,
    pub paths: Paths,
    /// Drives initialization, shuffling and every Monte Carlo draw.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            roi: Roi::USHANT,
            resolution: Resolution::default(),
            preprocess: PreprocessConfig::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            map: MapSection::default(),
            detector: DetectorSection::default(),
            paths: Paths::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Parses and validates a config file; relative paths are resolved
    /// against its directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.paths.resolve(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn spec(&self) -> FourHotSpec {
        FourHotSpec {
            roi: self.roi,
            res_lat: self.resolution.lat,
            res_lon: self.resolution.lon,
            res_sog: self.resolution.sog,
            res_cog: self.resolution.cog,
            sog_max: self.preprocess.sog_max,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig { hidden: self.model.hidden, latent: self.model.hidden, subnet_hidden: self.model.subnet_hidden }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = self.train;
        TrainConfig {
            lr: t.lr,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            samples: t.samples,
            validation_samples: t.validation_samples,
            seed: self.seed,
            clip_norm: t.clip_norm,
        }
    }

    pub fn map_config(&self) -> MapConfig {
        MapConfig {
            cell_size: self.map.cell_size,
            m_min: self.map.m_min,
            form: self.map.form,
            samples: self.detector.samples,
            seed: self.seed,
            p: self.detector.p,
        }
    }

    /// Detector settings for a given threshold.
    pub fn detector_config(&self, epsilon: f64) -> DetectorConfig {
        DetectorConfig { p: self.detector.p, epsilon, samples: self.detector.samples, seed: self.seed }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.spec().validate().map_err(|e| e.to_string())?;
        self.preprocess.validate().map_err(|e| e.to_string())?;
        self.model_config().validate().map_err(|e| e.to_string())?;
        self.train_config().validate().map_err(|e| e.to_string())?;
        self.map_config().validate().map_err(|e| e.to_string())?;
        if !(self.map.cell_size > 0.0) {
            return Err("map.cell_size must be positive".into());
        }
        if let Some(e) = self.detector.epsilon {
            self.detector_config(e).validate().map_err(|e| e.to_string())?;
        }
        let mut seen = HashSet::new();
        for (name, p) in self.paths.all() {
            if let Some(p) = p {
                if !seen.insert(p.clone()) {
                    return Err(format!("path of `{name}` ({}) is used twice", p.display()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_fill_missing_fields() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"seed": 3, "map": {"form": "gaussian"}}"#).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.map.form, FormKind::Gaussian);
        assert_eq!(cfg.map.m_min, 50);
        assert_eq!(cfg.spec().dim(), 602);
        assert_eq!(cfg.train.lr, 3e-4);
    }

    #[test]
    fn duplicate_paths_are_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.paths.train_store = Some("a.json".into());
        cfg.paths.test_store = Some("a.json".into());
        assert!(cfg.validate().unwrap_err().contains("used twice"));
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.detector.p = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.detector.epsilon = Some(0.0);
        assert!(cfg.validate().is_err());
    }
}
