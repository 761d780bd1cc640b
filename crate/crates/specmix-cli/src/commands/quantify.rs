//! `quantify`: predict the composition of unknown spectra with a persisted
//! calibration model, optionally comparing against reference values.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use specmix::design::MixtureDesign;
use specmix::spectra::SpectrumMatrix;

use crate::commands::bundle::ModelBundle;
use crate::config::PipelineConfig;
use crate::CliError;

pub struct QuantifyArgs {
    pub model_dir: PathBuf,
    pub spectra: PathBuf,
    pub reference: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub clip: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentPrediction {
    pub component: String,
    pub predicted_pct: f64,
    pub reference_pct: Option<f64>,
    pub abs_error: Option<f64>,
    pub clipped: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub sample: String,
    pub components: Vec<ComponentPrediction>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantificationReport {
    pub config_hash: String,
    pub seed: u64,
    pub model_mode: String,
    pub clip: bool,
    pub samples: Vec<SamplePrediction>,
}

impl QuantificationReport {
    /// Aligned text table, one block per sample.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for sample in &self.samples {
            out.push_str(&format!("sample: {}\n", sample.sample));
            let has_reference = sample.components.iter().any(|c| c.reference_pct.is_some());
            if has_reference {
                out.push_str(&format!(
                    "  {:<28} {:>12} {:>12} {:>10}\n",
                    "component", "calculated", "reference", "|error|"
                ));
            } else {
                out.push_str(&format!("  {:<28} {:>12}\n", "component", "calculated"));
            }
            for c in &sample.components {
                let mark = if c.clipped { "*" } else { "" };
                match (c.reference_pct, c.abs_error) {
                    (Some(reference), Some(err)) => out.push_str(&format!(
                        "  {:<28} {:>11.2}%{mark} {:>11.2}% {:>9.2}\n",
                        c.component, c.predicted_pct, reference, err
                    )),
                    _ => out.push_str(&format!(
                        "  {:<28} {:>11.2}%{mark}\n",
                        c.component, c.predicted_pct
                    )),
                }
            }
        }
        if self.samples.iter().flat_map(|s| &s.components).any(|c| c.clipped) {
            out.push_str("  (* clipped into [0, 100])\n");
        }
        out
    }
}

pub fn cmd_quantify(
    cfg: &PipelineConfig,
    args: &QuantifyArgs,
) -> Result<QuantificationReport, CliError> {
    // accept either a calibrate output directory (containing model/) or the
    // model directory itself
    let model_dir = {
        let nested = args.model_dir.join("model");
        if nested.join("bundle.json").exists() {
            nested
        } else {
            args.model_dir.clone()
        }
    };
    let bundle = ModelBundle::load(&model_dir)?;
    let spectra = SpectrumMatrix::read_csv(&args.spectra)?;
    let prepared = bundle.preprocess(&spectra)?;
    let predictions = bundle.predict(prepared.rows())?;

    let reference = match &args.reference {
        Some(path) => {
            let design = MixtureDesign::read_csv(path)?;
            if design.components() != bundle.component_names.as_slice() {
                return Err(CliError::user(format!(
                    "reference components {:?} do not match model components {:?}",
                    design.components(),
                    bundle.component_names
                )));
            }
            if design.n_points() != spectra.n_samples() {
                return Err(CliError::user(format!(
                    "reference has {} rows for {} spectra",
                    design.n_points(),
                    spectra.n_samples()
                )));
            }
            Some(design.points() * 100.0)
        }
        None => None,
    };

    let clip = args.clip || cfg.pls.clip;
    let mut samples = Vec::with_capacity(spectra.n_samples());
    for (i, label) in spectra.labels().iter().enumerate() {
        let mut components = Vec::with_capacity(bundle.component_names.len());
        for (j, name) in bundle.component_names.iter().enumerate() {
            let raw = predictions[[i, j]];
            let (value, clipped) = if clip {
                let clamped = raw.clamp(0.0, 100.0);
                (clamped, clamped != raw)
            } else {
                (raw, false)
            };
            let reference_pct = reference.as_ref().map(|r| r[[i, j]]);
            components.push(ComponentPrediction {
                component: name.clone(),
                predicted_pct: value,
                reference_pct,
                abs_error: reference_pct.map(|t| (value - t).abs()),
                clipped,
            });
        }
        samples.push(SamplePrediction {
            sample: label.clone(),
            components,
        });
    }

    let report = QuantificationReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        model_mode: bundle.mode.clone(),
        clip,
        samples,
    };
    std::fs::create_dir_all(&args.out_dir).map_err(|e| {
        CliError::io_msg(format!("cannot create {}: {e}", args.out_dir.display()))
    })?;
    crate::write_json_atomic(&args.out_dir.join("quantification.json"), &report)?;

    // predictions as a plain CSV too
    let mut body = String::from("sample");
    for name in &bundle.component_names {
        body.push_str(&format!(",{name}"));
    }
    body.push('\n');
    for sample in &report.samples {
        body.push_str(&sample.sample);
        for c in &sample.components {
            body.push_str(&format!(",{}", c.predicted_pct));
        }
        body.push('\n');
    }
    crate::write_atomic(&args.out_dir.join("predictions.csv"), body.as_bytes())?;
    Ok(report)
}
