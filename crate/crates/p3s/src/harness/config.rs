//! Run configuration: TOML schema, dotted-path overrides and validation.
//!
//! The file is a flat table plus per-concern blocks:
//!
//! ```toml
//! scheme = "p3s"            # single | drl | eso | resetting | p3s | center
//! env = "delayed:pointmass-sparse:20"
//! n_learners = 4
//! total_env_steps = 100000  # summed over learners
//! r_eval = 4000             # evaluation period, in summed steps
//! eval_episodes = 10
//!
//! [td3]                     # see Td3Hyper for fields and defaults
//! t_initial = 1000
//! hidden = [64, 64]
//!
//! [p3s]                     # see ChiefHyper
//! d_min = 0.05
//!
//! [resetting]
//! reset_period = 5000       # per-learner steps; omit for never
//!
//! [center]
//! beta = 1.0
//! center_period = 40
//! ```
//!
//! Unknown keys anywhere are errors. Any field can be overridden from the
//! command line with `key=value` or `block.key=value`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chief::ChiefHyper;
use crate::env::make_env;
use crate::error::{Error, Result};
use crate::td3::Td3Hyper;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    /// One learner, plain TD3.
    Single,
    /// N actors sharing one set of parameters and one buffer.
    Drl,
    /// N independent learners sharing only the buffer.
    Eso,
    /// Experience sharing plus periodic hard copy of the best learner.
    Resetting,
    /// Soft guidance toward the periodically selected best learner.
    P3s,
    /// Soft pull of every learner toward a trained center policy.
    Center,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Single => "single",
            SchemeKind::Drl => "drl",
            SchemeKind::Eso => "eso",
            SchemeKind::Resetting => "resetting",
            SchemeKind::P3s => "p3s",
            SchemeKind::Center => "center",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResettingConfig {
    /// Per-learner steps between best-policy copies; `None` never resets.
    pub reset_period: Option<u64>,
}

impl Default for ResettingConfig {
    fn default() -> Self {
        ResettingConfig {
            reset_period: Some(5000),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CenterConfig {
    /// Fixed penalty weight toward the center policy.
    pub beta: f64,
    /// Per-learner steps between center updates.
    pub center_period: u64,
    /// Gradient steps per center update.
    pub center_steps: u32,
    /// States sampled from the buffer per center update.
    pub center_batch: usize,
}

impl Default for CenterConfig {
    fn default() -> Self {
        CenterConfig {
            beta: 1.0,
            center_period: 40,
            center_steps: 10,
            center_batch: 1000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: SchemeKind,
    pub env: String,
    #[serde(default = "default_n_learners")]
    pub n_learners: usize,
    pub total_env_steps: u64,
    #[serde(default = "default_r_eval")]
    pub r_eval: u64,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub td3: Td3Hyper,
    #[serde(default)]
    pub p3s: ChiefHyper,
    #[serde(default)]
    pub resetting: ResettingConfig,
    #[serde(default)]
    pub center: CenterConfig,
}

fn default_n_learners() -> usize {
    4
}

fn default_r_eval() -> u64 {
    4000
}

fn default_eval_episodes() -> usize {
    10
}

impl RunConfig {
    /// Parse a TOML string, apply `key=value` overrides, validate.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<RunConfig> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        let mut value = toml::Value::Table(table);
        for spec in overrides {
            apply_override(&mut value, spec)?;
        }
        let config: RunConfig = value
            .try_into()
            .map_err(|e| Error::Config(format!("config schema error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Number of actor slots (environment copies) the scheme runs.
    pub fn n_slots(&self) -> usize {
        self.n_learners
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_learners == 0 {
            return Err(Error::Config("n_learners must be >= 1".into()));
        }
        if self.scheme == SchemeKind::Single && self.n_learners != 1 {
            return Err(Error::Config("scheme 'single' requires n_learners = 1".into()));
        }
        if self.total_env_steps == 0 {
            return Err(Error::Config("total_env_steps must be positive".into()));
        }
        if self.total_env_steps % self.n_learners as u64 != 0 {
            return Err(Error::Config(format!(
                "total_env_steps ({}) must divide evenly across {} learners",
                self.total_env_steps, self.n_learners
            )));
        }
        if self.r_eval == 0 || self.r_eval % self.n_learners as u64 != 0 {
            return Err(Error::Config(format!(
                "r_eval ({}) must be a positive multiple of n_learners ({})",
                self.r_eval, self.n_learners
            )));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be >= 1".into()));
        }
        self.td3.validate()?;
        if self.scheme == SchemeKind::P3s {
            self.p3s.validate()?;
        }
        if self.scheme == SchemeKind::Center {
            let c = &self.center;
            if c.beta <= 0.0 || c.center_period == 0 || c.center_steps == 0 || c.center_batch == 0 {
                return Err(Error::Config("invalid center-policy block".into()));
            }
        }
        if let Some(p) = self.resetting.reset_period {
            if self.scheme == SchemeKind::Resetting && p == 0 {
                return Err(Error::Config("reset_period must be >= 1".into()));
            }
        }
        make_env(&self.env)?;
        Ok(())
    }
}

/// Apply one `path.to.key=value` override onto a parsed TOML document.
fn apply_override(doc: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
    let parsed: toml::Value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let mut node = doc;
    let segments: Vec<&str> = path.split('.').collect();
    for (k, segment) in segments.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path '{path}' crosses a non-table")))?;
        if k + 1 == segments.len() {
            table.insert(segment.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(segment.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    unreachable!("override paths have at least one segment")
}
