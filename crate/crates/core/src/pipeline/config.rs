//! Flat `section.key = value` configuration.
//!
//! ```text
//! # comments start with '#'
//! run.seed = 7
//! models.lc = out/lc.txt
//! models.ae = out/ae.txt
//! models.calibration = out/calibration.txt
//! targeting.tau = 0.8          # all levels
//! targeting.low.tau = 0.75     # one level
//! data.source = synthetic      # or: files
//! data.dir = corpus/
//! data.per_level = 100
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sigcore::SnrLevel;
use crate::targeting::TargetingParams;

/// Where benchmark segments come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    SyntheticProxy,
    /// A directory written by `tada mix`.
    FileCorpus(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub lc_path: Option<PathBuf>,
    pub ae_path: Option<PathBuf>,
    pub calibration_path: Option<PathBuf>,
    /// Indexed by `SnrLevel::index`.
    pub targeting: [TargetingParams; 3],
    pub seed: u64,
    pub source: DatasetSource,
    /// Synthetic benchmark pairs per level.
    pub per_level: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            lc_path: None,
            ae_path: None,
            calibration_path: None,
            targeting: [TargetingParams::default(); 3],
            seed: 0,
            source: DatasetSource::SyntheticProxy,
            per_level: 100,
        }
    }
}

const TARGETING_KEYS: [&str; 4] = ["tau", "window", "fir_taps", "anomaly_factor"];

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn set_targeting(p: &mut TargetingParams, field: &str, key: &str, v: &str) -> Result<()> {
    match field {
        "tau" => p.tau = parse_value(key, v)?,
        "window" => p.window = parse_value(key, v)?,
        "fir_taps" => p.fir_taps = parse_value(key, v)?,
        "anomaly_factor" => p.anomaly_factor = parse_value(key, v)?,
        _ => return Err(Error::Config(format!("unknown key '{key}'"))),
    }
    Ok(())
}

/// Splits a config text into ordered key/value entries.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !k.contains('.') {
            return Err(Error::Config(format!("line {}: key '{k}' lacks a section", n + 1)));
        }
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let entries = parse_entries(text)?;
        let mut cfg = Self::default();
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        let mut source = None;
        let mut dir = None;
        // Level-wide targeting keys first so per-level overrides win.
        for (k, v) in &entries {
            if let Some(field) = k.strip_prefix("targeting.") {
                if TARGETING_KEYS.contains(&field) {
                    for p in &mut cfg.targeting {
                        set_targeting(p, field, k, v)?;
                    }
                }
            }
        }
        for (k, v) in &entries {
            match k.as_str() {
                "run.seed" => cfg.seed = parse_value(k, v)?,
                "models.lc" => cfg.lc_path = Some(path(v)),
                "models.ae" => cfg.ae_path = Some(path(v)),
                "models.calibration" => cfg.calibration_path = Some(path(v)),
                "data.source" => source = Some(v.clone()),
                "data.dir" => dir = Some(path(v)),
                "data.per_level" => cfg.per_level = parse_value(k, v)?,
                _ => {
                    let Some(rest) = k.strip_prefix("targeting.") else {
                        // Training keys are read by the CLI; anything else is a typo.
                        if k.starts_with("train.") || k.starts_with("meta.") {
                            continue;
                        }
                        return Err(Error::Config(format!("unknown key '{k}'")));
                    };
                    if TARGETING_KEYS.contains(&rest) {
                        continue;
                    }
                    let (lvl, field) = rest
                        .split_once('.')
                        .ok_or_else(|| Error::Config(format!("unknown key '{k}'")))?;
                    let level: SnrLevel = lvl
                        .parse()
                        .map_err(|_| Error::Config(format!("unknown level in '{k}'")))?;
                    set_targeting(&mut cfg.targeting[level.index()], field, k, v)?;
                }
            }
        }
        cfg.source = match source.as_deref() {
            None | Some("synthetic") => DatasetSource::SyntheticProxy,
            Some("files") => DatasetSource::FileCorpus(
                dir.ok_or_else(|| Error::Config("data.source = files needs data.dir".into()))?,
            ),
            Some(other) => return Err(Error::Config(format!("unknown data.source '{other}'"))),
        };
        for p in &cfg.targeting {
            p.validate()?;
        }
        if cfg.per_level == 0 {
            return Err(Error::Config("data.per_level must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Fails unless every referenced file exists.
    pub fn check_paths(&self) -> Result<()> {
        let named = [
            ("models.lc", &self.lc_path),
            ("models.ae", &self.ae_path),
            ("models.calibration", &self.calibration_path),
        ];
        for (key, p) in named {
            match p {
                None => return Err(Error::MissingModels(format!("{key} is not set"))),
                Some(p) if !p.exists() => {
                    return Err(Error::MissingModels(format!("{key}: {} not found", p.display())))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn params_for(&self, level: SnrLevel) -> &TargetingParams {
        &self.targeting[level.index()]
    }

    /// Extra keys from the same file, for callers that read their own sections.
    pub fn extra(text: &str, key: &str) -> Result<Option<String>> {
        Ok(parse_entries(text)?.get(key).cloned())
    }
}
