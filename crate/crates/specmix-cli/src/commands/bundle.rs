//! The persisted calibration model: PLS model(s) plus everything needed to
//! preprocess and predict an unknown spectrum later.

use std::path::Path;

use serde::{Deserialize, Serialize};
use specmix::pls::PlsModel;
use specmix::spectra::{Spectrum, SpectrumMatrix, WavenumberAxis};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preprocessing {
    None,
    Snv,
    Msc,
}

impl Preprocessing {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        match text {
            "none" => Ok(Self::None),
            "snv" => Ok(Self::Snv),
            "msc" => Ok(Self::Msc),
            other => Err(CliError::user(format!(
                "unknown preprocessing '{other}' (want none, snv or msc)"
            ))),
        }
    }
}

/// A calibration model on disk: bundle.json + per-model subdirectories.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub mode: String, // "pls2" or "pls1"
    pub component_names: Vec<String>,
    pub preprocessing: Preprocessing,
    pub axis: WavenumberAxis,
    pub msc_reference: Option<Spectrum>,
    pub models: Vec<PlsModel>,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BundleManifest {
    mode: String,
    component_names: Vec<String>,
    preprocessing: Preprocessing,
    axis_values: Vec<f64>,
    has_msc_reference: bool,
    n_models: usize,
    config_hash: String,
    seed: u64,
}

impl ModelBundle {
    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::io_msg(format!("cannot create {}: {e}", dir.display())))?;
        let manifest = BundleManifest {
            mode: self.mode.clone(),
            component_names: self.component_names.clone(),
            preprocessing: self.preprocessing,
            axis_values: self.axis.values().to_vec(),
            has_msc_reference: self.msc_reference.is_some(),
            n_models: self.models.len(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
        };
        crate::write_json_atomic(&dir.join("bundle.json"), &manifest)?;
        if let Some(reference) = &self.msc_reference {
            reference.write_csv(dir.join("msc_reference.csv"))?;
        }
        for (i, model) in self.models.iter().enumerate() {
            model.save(dir.join(format!("pls_{i}")))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let manifest_path = dir.join("bundle.json");
        let body = std::fs::read(&manifest_path).map_err(|e| {
            CliError::io_msg(format!("cannot read {}: {e}", manifest_path.display()))
        })?;
        let manifest: BundleManifest = serde_json::from_slice(&body)
            .map_err(|e| CliError::user(format!("{}: {e}", manifest_path.display())))?;
        let axis = WavenumberAxis::new(manifest.axis_values)?;
        let msc_reference = if manifest.has_msc_reference {
            Some(Spectrum::read_csv(dir.join("msc_reference.csv"))?)
        } else {
            None
        };
        let mut models = Vec::with_capacity(manifest.n_models);
        for i in 0..manifest.n_models {
            models.push(PlsModel::load(dir.join(format!("pls_{i}")))?);
        }
        Ok(Self {
            mode: manifest.mode,
            component_names: manifest.component_names,
            preprocessing: manifest.preprocessing,
            axis,
            msc_reference,
            models,
            config_hash: manifest.config_hash,
            seed: manifest.seed,
        })
    }

    /// Resample rows onto the bundle axis and apply the stored
    /// preprocessing.
    pub fn preprocess(&self, x: &SpectrumMatrix) -> Result<SpectrumMatrix, CliError> {
        let mut spectra = Vec::with_capacity(x.n_samples());
        for i in 0..x.n_samples() {
            spectra.push(x.row(i).resample(&self.axis)?);
        }
        let on_axis = SpectrumMatrix::from_spectra(&spectra)?;
        let processed = match self.preprocessing {
            Preprocessing::None => on_axis,
            Preprocessing::Snv => on_axis.normalize_rows()?,
            Preprocessing::Msc => {
                let reference = self.msc_reference.as_ref().ok_or_else(|| {
                    CliError::user("bundle declares MSC preprocessing but has no reference")
                })?;
                on_axis.msc_correct_rows(reference)?
            }
        };
        Ok(processed)
    }

    /// Predict compositions (percent) for preprocessed rows.
    pub fn predict(&self, x: &ndarray::Array2<f64>) -> Result<ndarray::Array2<f64>, CliError> {
        if self.mode == "pls2" {
            Ok(self.models[0].predict(x)?)
        } else {
            let r = self.component_names.len();
            let mut out = ndarray::Array2::<f64>::zeros((x.nrows(), r));
            for (j, model) in self.models.iter().enumerate() {
                let pred = model.predict(x)?;
                out.column_mut(j).assign(&pred.column(0));
            }
            Ok(out)
        }
    }
}
