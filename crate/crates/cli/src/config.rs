//! `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored, as is anything after ` #` on a
//! line. Relative paths are taken relative to the working directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hijackmap::corpus::{SplitSpec, StrataCounts};
use hijackmap::eval::SelectionRule;
use hijackmap::geomap::{LatLon, DEFAULT_CENTER, DEFAULT_RADIUS_KM};
use hijackmap::models::Family;
use nnkit::{LossKind, TrainConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    /// When set, used as the test set instead of splitting `dataset`.
    pub test_dataset: Option<PathBuf>,
    pub stoplist: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub vectorizer: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub batch_size: usize,
    pub epochs: usize,
    pub val_fraction: f64,
    pub loss: LossKind,
    pub train_count: usize,
    pub test_count: usize,
    pub train_relevant: usize,
    pub test_relevant: usize,
    pub center: LatLon,
    pub radius_km: f64,
    pub selection: BTreeMap<Family, SelectionRule>,
    pub geocoder_url: Option<String>,
    pub geocoder_interval_ms: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let defaults = TrainConfig::default();
        let split = SplitSpec::reference(0);
        let strata = split.strata.expect("reference split is stratified");
        Self {
            dataset: None,
            test_dataset: None,
            stoplist: None,
            gazetteer: None,
            checkpoint: None,
            vectorizer: None,
            out_dir: PathBuf::from("out"),
            seed: defaults.seed,
            batch_size: defaults.batch_size,
            epochs: defaults.epochs,
            val_fraction: defaults.val_fraction,
            loss: defaults.loss,
            train_count: split.train_count,
            test_count: split.test_count,
            train_relevant: strata.train_relevant,
            test_relevant: strata.test_relevant,
            center: DEFAULT_CENTER,
            radius_km: DEFAULT_RADIUS_KM,
            selection: Family::ALL.into_iter().map(|f| (f, SelectionRule::default_for(f))).collect(),
            geocoder_url: None,
            geocoder_interval_ms: 1000,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("{key}: cannot parse `{value}`: {e}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split(" #").next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            cfg.set(key.trim(), value.trim()).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let path = || Some(PathBuf::from(value));
        match key {
            "dataset" => self.dataset = path(),
            "test_dataset" => self.test_dataset = path(),
            "stoplist" => self.stoplist = path(),
            "gazetteer" => self.gazetteer = path(),
            "checkpoint" => self.checkpoint = path(),
            "vectorizer" => self.vectorizer = path(),
            "out" | "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "val_fraction" => self.val_fraction = parse(key, value)?,
            "loss" => self.loss = parse(key, value)?,
            "train_count" => self.train_count = parse(key, value)?,
            "test_count" => self.test_count = parse(key, value)?,
            "train_relevant" => self.train_relevant = parse(key, value)?,
            "test_relevant" => self.test_relevant = parse(key, value)?,
            "center_lat" => self.center.lat = parse(key, value)?,
            "center_lon" => self.center.lon = parse(key, value)?,
            "radius_km" => self.radius_km = parse(key, value)?,
            "geocoder_url" => self.geocoder_url = Some(value.to_owned()).filter(|v| !v.is_empty()),
            "geocoder_interval_ms" => self.geocoder_interval_ms = parse(key, value)?,
            _ => match key.strip_prefix("selection.") {
                Some(family) => {
                    let family: Family = family.parse().map_err(|e| format!("{key}: {e}"))?;
                    self.selection.insert(family, parse(key, value)?);
                }
                None => return Err(format!("unknown key `{key}`")),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        self.train_config().validate().map_err(|e| e.to_string())?;
        if !self.center.in_bounds() {
            return Err(format!("center ({}, {}) out of range", self.center.lat, self.center.lon));
        }
        if !(self.radius_km > 0.0) {
            return Err(format!("radius_km must be positive, got {}", self.radius_km));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            val_fraction: self.val_fraction,
            seed: self.seed,
            loss: self.loss,
            ..TrainConfig::default()
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_count: self.train_count,
            test_count: self.test_count,
            seed: self.seed,
            stratified: true,
            strata: Some(StrataCounts {
                train_relevant: self.train_relevant,
                test_relevant: self.test_relevant,
            }),
        }
    }

    pub fn selection_for(&self, family: Family) -> SelectionRule {
        self.selection.get(&family).copied().unwrap_or(SelectionRule::default_for(family))
    }

    /// Where `experiment` writes and `classify` reads the vectorizer manifest.
    pub fn vectorizer_path(&self) -> PathBuf {
        self.vectorizer.clone().unwrap_or_else(|| self.out_dir.join("vectorizer.tsv"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out_dir.join("model.hjnn"))
    }
}

/// Fails with an input error unless `path` exists.
pub fn require_exists(what: &str, path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::input(format!("{what} {} does not exist", path.display())))
    }
}
