//! JSON run configuration.
//!
//! Every field is optional in the file; missing fields take the defaults
//! below and unknown keys are rejected. Command-line flags override file
//! values, and the resolved document is written next to the outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sinkbss::separation::{Method, SeparationConfig};
use sinkbss::source_model::UpdateRule;
use sinkbss::stft::StftConfig;
use sinkbss::transport::SinkhornParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Auxiva,
    Siva,
    Ilrma,
    Silrma,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Auxiva => Method::AuxIva,
            MethodName::Siva => Method::SIva,
            MethodName::Ilrma => Method::Ilrma,
            MethodName::Silrma => Method::SIlrma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RuleName {
    Standard,
    Literal,
}

impl From<RuleName> for UpdateRule {
    fn from(r: RuleName) -> Self {
        match r {
            RuleName::Standard => UpdateRule::Standard,
            RuleName::Literal => UpdateRule::Literal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowName {
    Hamming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftSection {
    pub frame_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub window: WindowName,
}

impl Default for StftSection {
    fn default() -> Self {
        let d = StftConfig::default();
        Self {
            frame_len: d.frame_len,
            hop: d.hop,
            fft_len: d.fft_len,
            window: WindowName::Hamming,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SinkhornSection {
    pub lambda: f64,
    pub gamma: f64,
    pub inner_iters: usize,
    pub eps_floor: f64,
    pub normalize_scale: bool,
    /// Accepted for completeness; no update uses it.
    pub r: f64,
}

impl Default for SinkhornSection {
    fn default() -> Self {
        let d = SinkhornParams::default();
        Self {
            lambda: d.lambda,
            gamma: d.gamma,
            inner_iters: d.inner_iters,
            eps_floor: d.eps_floor,
            normalize_scale: d.normalize_scale,
            r: d.r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub method: MethodName,
    pub iters: usize,
    pub bases: usize,
    pub nmf_rule: RuleName,
    pub seed: u64,
    pub ref_channel: usize,
    pub stft: StftSection,
    pub sinkhorn: SinkhornSection,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = SeparationConfig::default();
        Self {
            method: MethodName::Silrma,
            iters: d.iters,
            bases: d.nmf_order,
            nmf_rule: RuleName::Standard,
            seed: d.seed,
            ref_channel: d.reference_channel,
            stft: StftSection::default(),
            sinkhorn: SinkhornSection::default(),
            input: None,
            out: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] sinkbss::Error),
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn stft_config(&self) -> Result<StftConfig, ConfigError> {
        Ok(StftConfig::new(self.stft.frame_len, self.stft.hop, self.stft.fft_len)?)
    }

    pub fn sinkhorn_params(&self) -> Result<SinkhornParams, ConfigError> {
        let s = &self.sinkhorn;
        let p = SinkhornParams {
            lambda: s.lambda,
            gamma: s.gamma,
            inner_iters: s.inner_iters,
            eps_floor: s.eps_floor,
            normalize_scale: s.normalize_scale,
            r: s.r,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn separation_config(&self) -> Result<SeparationConfig, ConfigError> {
        let cfg = SeparationConfig {
            method: self.method.into(),
            iters: self.iters,
            nmf_order: self.bases,
            sinkhorn: self.sinkhorn_params()?,
            nmf_rule: self.nmf_rule.into(),
            seed: self.seed,
            reference_channel: self.ref_channel,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every section without running anything.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.stft_config()?;
        self.separation_config()?;
        Ok(())
    }
}
