//! Defaults read from `--config`. Keys mirror the long flag names with
//! underscores; a flag given on the command line always wins.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use oddforge::ingestion::ColumnMapping;
use oddforge::DistanceMode;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Openlabel,
}

/// Comma-separated values on the command line, a JSON array in the config.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .enumerate()
            .map(|(i, cell)| {
                let cell = cell.trim();
                if cell.is_empty() {
                    return Err(format!("empty value at position {}", i + 1));
                }
                cell.parse()
                    .map_err(|e| format!("value {cell:?} at position {}: {e}", i + 1))
            })
            .collect::<Result<Vec<T>, String>>()
            .map(List)
    }
}

/// `--map`: a JSON mapping file, or a comma-separated list of column names.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum MapSetting {
    Text(String),
    Columns(Vec<String>),
    Mapping(ColumnMapping),
}

impl FromStr for MapSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(MapSetting::Text(s.to_string()))
    }
}

impl MapSetting {
    pub fn resolve(&self) -> Result<ColumnMapping> {
        let mapping = match self {
            MapSetting::Mapping(m) => m.clone(),
            MapSetting::Columns(c) => ColumnMapping::new(c.iter().cloned()),
            MapSetting::Text(t) if Path::new(t).is_file() => {
                let text = std::fs::read_to_string(t).with_context(|| format!("reading mapping {t}"))?;
                serde_json::from_str(&text).with_context(|| format!("parsing mapping {t}"))?
            }
            MapSetting::Text(t) => ColumnMapping::new(t.split(',').map(|c| c.trim().to_string())),
        };
        mapping.validate()?;
        Ok(mapping)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub format: Option<InputFormat>,
    pub map: Option<MapSetting>,
    pub lenient: Option<bool>,
    pub output: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub point: Option<List<f64>>,
    pub bands: Option<List<f64>>,
    pub spec: Option<PathBuf>,
    pub anchors: Option<List<usize>>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub labeled_data: Option<PathBuf>,
    pub verify_data: Option<PathBuf>,
    pub kappa: Option<f64>,
    pub eta: Option<f64>,
    pub lambda: Option<f64>,
    pub xi: Option<f64>,
    pub zeta: Option<f64>,
    pub normalize: Option<bool>,
    pub distance_mode: Option<DistanceMode>,
    pub shrink_factor: Option<f64>,
    pub shrink_floor: Option<f64>,
    pub max_shrink_iters: Option<usize>,
    pub max_passes: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
