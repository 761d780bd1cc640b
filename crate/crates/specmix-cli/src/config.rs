//! Pipeline configuration: defaults, TOML loading, CLI overrides and the
//! config hash embedded in every report.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed for every stochastic step (ICA initialization, synthesis).
    pub seed: u64,
    pub axis: AxisConfig,
    pub ica: IcaConfig,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
    pub pls: PlsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            axis: AxisConfig::default(),
            ica: IcaConfig::default(),
            matching: MatchConfig::default(),
            pls: PlsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for AxisConfig {
    fn default() -> Self {
        Self {
            min: 150.0,
            max: 3480.0,
            step: 4.0,
        }
    }
}

impl AxisConfig {
    pub fn build(&self) -> Result<specmix::spectra::WavenumberAxis, CliError> {
        specmix::spectra::WavenumberAxis::from_range(self.min, self.max, self.step)
            .map_err(CliError::from)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcaConfig {
    /// Number of sample blocks for order selection.
    pub blocks: usize,
    /// Largest model order to test.
    pub f_max: usize,
    /// Minimum matched inter-block |correlation|.
    pub threshold: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Finish fits with the unconstrained maximum-likelihood pass.
    pub relax_orthogonality: bool,
}

impl Default for IcaConfig {
    fn default() -> Self {
        Self {
            blocks: 2,
            f_max: 6,
            threshold: 0.80,
            max_iter: 500,
            tol: 1e-6,
            relax_orthogonality: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    /// Minimum |correlation| for a library hit.
    pub threshold: f64,
    /// Candidates within this margin of the best hit flag the IC ambiguous.
    pub ambiguity_margin: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            threshold: 0.90,
            ambiguity_margin: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlsConfig {
    /// "auto", "loo" or "venetian:<k>".
    pub cv: String,
    /// Largest LV count scanned by cross-validation (capped by the data).
    pub lv_max: usize,
    /// Preprocessing for calibration/quantification: "none", "snv" or
    /// "msc".
    pub preprocess: String,
    /// Clip predicted compositions into [0, 100].
    pub clip: bool,
}

impl Default for PlsConfig {
    fn default() -> Self {
        Self {
            cv: "auto".to_string(),
            lv_max: 10,
            preprocess: "none".to_string(),
            clip: false,
        }
    }
}

impl PlsConfig {
    pub fn scheme(&self, samples: usize) -> Result<specmix::pls::CvScheme, CliError> {
        let scheme = match self.cv.as_str() {
            "auto" => specmix::pls::CvScheme::auto(samples),
            "loo" => specmix::pls::CvScheme::leave_one_out(),
            other => match other.strip_prefix("venetian:") {
                Some(k) => {
                    let k: usize = k.parse().map_err(|_| {
                        CliError::user(format!("bad cv scheme '{other}' (want venetian:<k>)"))
                    })?;
                    specmix::pls::CvScheme::venetian_blinds(k)
                }
                None => {
                    return Err(CliError::user(format!(
                        "unknown cv scheme '{other}' (want auto, loo or venetian:<k>)"
                    )))
                }
            },
        };
        Ok(scheme)
    }
}

impl PipelineConfig {
    /// Load a TOML config file; unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io_msg(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::user(format!("config {}: {e}", path.display())))
    }

    /// SHA-256 of the canonical TOML rendering, truncated to 16 hex chars.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn ica_options(&self) -> specmix::bss::IcaOptions {
        specmix::bss::IcaOptions {
            max_iter: self.ica.max_iter,
            tol: self.ica.tol,
            seed: self.seed,
            relax_orthogonality: self.ica.relax_orthogonality,
        }
    }

    pub fn ica_by_blocks_options(&self) -> specmix::bss::IcaByBlocksOptions {
        specmix::bss::IcaByBlocksOptions {
            ica: self.ica_options(),
            threshold: self.ica.threshold,
        }
    }
}
