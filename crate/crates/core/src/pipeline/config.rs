use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decompose::{DecomposeOptions, DecomposeParams, FieldMethod};
use crate::error::{Error, Result};
use crate::fields::FlowDirection;
use crate::laplacian::{EigenOptions, Variant};
use crate::solver::CgOptions;

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "MTDL_WORKERS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    #[default]
    Gradient,
    Flow,
    ChannelPair,
    Patch,
}

impl std::str::FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(MethodName::Gradient),
            "flow" => Ok(MethodName::Flow),
            "channel-pair" => Ok(MethodName::ChannelPair),
            "patch" => Ok(MethodName::Patch),
            other => Err(Error::Parameter(format!("unknown field method `{other}`"))),
        }
    }
}

/// Flat batch configuration, stored as `key = value` lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Selects `{split}_images` / `{split}_labels` in the input archive.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    /// Foreground threshold; derived from the data when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub method: MethodName,
    pub s: usize,
    pub t: usize,
    pub direction: FlowDirection,
    pub patch_edge: usize,
    pub variant: Variant,
    pub tol: f64,
    pub max_iter_factor: usize,
    pub workers: usize,
    /// Also write direction-coded color rasters.
    pub hsv: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let cg = CgOptions::default();
        PipelineConfig {
            input: PathBuf::new(),
            output: PathBuf::new(),
            split: None,
            threshold: None,
            method: MethodName::Gradient,
            s: 1,
            t: 1,
            direction: FlowDirection::Descend,
            patch_edge: 4,
            variant: Variant::Big,
            tol: cg.tol,
            max_iter_factor: cg.max_iter_factor,
            workers: 1,
            hsv: false,
            seed: EigenOptions::default().seed,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies the worker-count environment override, if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(WORKERS_ENV) {
            self.workers = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v} is not a worker count")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if let Some(th) = self.threshold {
            if !th.is_finite() {
                return bad(format!("threshold must be finite, got {th}"));
            }
        }
        if self.s == 0 || self.t == 0 {
            return bad("gradient steps s and t must be at least 1".into());
        }
        if self.patch_edge < 2 {
            return bad("patch_edge must be at least 2".into());
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        if self.max_iter_factor == 0 {
            return bad("max_iter_factor must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }

    /// SHA-256 of the serialized config, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn field_method(&self) -> FieldMethod {
        match self.method {
            MethodName::Gradient => FieldMethod::Gradient { s: self.s, t: self.t },
            MethodName::Flow => FieldMethod::Flow {
                direction: self.direction,
            },
            MethodName::ChannelPair => FieldMethod::ChannelPair,
            MethodName::Patch => FieldMethod::Patch {
                patch_edge: self.patch_edge,
            },
        }
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            seed: self.seed,
            ..EigenOptions::default()
        }
    }

    /// Decomposition parameters for a resolved threshold.
    pub fn decompose_params(&self, threshold: f64) -> DecomposeParams {
        DecomposeParams {
            method: self.field_method(),
            threshold,
            options: DecomposeOptions {
                variant: self.variant,
                cg: CgOptions {
                    tol: self.tol,
                    max_iter_factor: self.max_iter_factor,
                },
            },
            eigen: self.eigen_options(),
        }
    }
}
