//! `calibrate`: fit a PLS model linking calibration spectra to design
//! compositions, select the LV count by cross-validation, and persist the
//! model with its metrics.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specmix::design::MixtureDesign;
use specmix::pls;
use specmix::spectra::SpectrumMatrix;

use crate::commands::bundle::{ModelBundle, Preprocessing};
use crate::config::PipelineConfig;
use crate::CliError;

pub struct CalibrateArgs {
    pub design: PathBuf,
    pub spectra: PathBuf,
    pub out_dir: PathBuf,
    /// Fit one single-response model per component instead of one joint
    /// model.
    pub pls1: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseMetrics {
    pub response: String,
    pub rmsec: f64,
    pub rmsecv: f64,
    pub rmsep: Option<f64>,
    pub r2y: f64,
    pub q2y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub config_hash: String,
    pub seed: u64,
    pub mode: String,
    pub n_samples: usize,
    pub n_components: usize,
    pub selected_lv: Vec<usize>,
    pub rmsecv_by_lv: Vec<f64>,
    pub metrics: Vec<ResponseMetrics>,
    pub flags: Vec<String>,
}

pub fn cmd_calibrate(
    cfg: &PipelineConfig,
    args: &CalibrateArgs,
) -> Result<CalibrationReport, CliError> {
    let design = MixtureDesign::read_csv(&args.design)?;
    let spectra = SpectrumMatrix::read_csv(&args.spectra)?;
    let s = spectra.n_samples();
    if design.n_points() != s {
        return Err(CliError::user(format!(
            "design has {} rows but spectra matrix has {s} samples",
            design.n_points()
        )));
    }

    let preprocessing = Preprocessing::parse(&cfg.pls.preprocess)?;
    let msc_reference = match preprocessing {
        Preprocessing::Msc => Some(spectra.msc_reference()?),
        _ => None,
    };
    let prepared = match preprocessing {
        Preprocessing::None => spectra.clone(),
        Preprocessing::Snv => spectra.normalize_rows()?,
        Preprocessing::Msc => spectra.msc_correct_rows(msc_reference.as_ref().unwrap())?,
    };

    let x = prepared.rows().clone();
    let y = design.points() * 100.0; // compositions in percent
    let scheme = cfg.pls.scheme(s)?;
    let max_fold = match scheme.kind {
        pls::CvKind::LeaveOneOut => 1,
        pls::CvKind::VenetianBlinds { k } => s.div_ceil(k),
    };
    let lv_cap = s
        .saturating_sub(max_fold + 1)
        .min(x.ncols())
        .max(1);
    let lv_max = cfg.pls.lv_max.min(lv_cap);

    let (mode, models, selected, cv_curve) = if args.pls1 {
        let mut models = Vec::new();
        let mut selected = Vec::new();
        let mut curve = Vec::new();
        for j in 0..design.n_components() {
            let yj = y.column(j).to_owned().insert_axis(ndarray::Axis(1));
            let cv = pls::cross_validate(&x, &yj, &scheme, lv_max)?;
            let model = pls::fit_nipals(&x, &yj, cv.selected_lv)?;
            selected.push(model.n_lv());
            if j == 0 {
                curve = cv.rmsecv.clone();
            }
            models.push(model);
        }
        ("pls1".to_string(), models, selected, curve)
    } else {
        let cv = pls::cross_validate(&x, &y, &scheme, lv_max)?;
        let model = pls::fit_nipals(&x, &y, cv.selected_lv)?;
        let selected = vec![model.n_lv()];
        ("pls2".to_string(), vec![model], selected, cv.rmsecv)
    };

    // metrics per response, from the primary (first) model layout
    let mut metric_rows = Vec::with_capacity(design.n_components());
    let mut flags = Vec::new();
    if mode == "pls2" {
        let report = pls::metrics(&models[0], &x, &y, None, &scheme)?;
        for (j, name) in design.components().iter().enumerate() {
            metric_rows.push(ResponseMetrics {
                response: name.clone(),
                rmsec: report.rmsec[j],
                rmsecv: report.rmsecv[j],
                rmsep: report.rmsep.as_ref().map(|v| v[j]),
                r2y: report.r2y[j],
                q2y: report.q2y[j],
            });
        }
        flags.extend(report.flags);
    } else {
        for (j, name) in design.components().iter().enumerate() {
            let yj = y.column(j).to_owned().insert_axis(ndarray::Axis(1));
            let report = pls::metrics(&models[j], &x, &yj, None, &scheme)?;
            metric_rows.push(ResponseMetrics {
                response: name.clone(),
                rmsec: report.rmsec[0],
                rmsecv: report.rmsecv[0],
                rmsep: report.rmsep.as_ref().map(|v| v[0]),
                r2y: report.r2y[0],
                q2y: report.q2y[0],
            });
            flags.extend(report.flags);
        }
    }

    std::fs::create_dir_all(&args.out_dir).map_err(|e| {
        CliError::io_msg(format!("cannot create {}: {e}", args.out_dir.display()))
    })?;
    let bundle = ModelBundle {
        mode: mode.clone(),
        component_names: design.components().to_vec(),
        preprocessing,
        axis: prepared.axis().clone(),
        msc_reference,
        models,
        config_hash: cfg.hash(),
        seed: cfg.seed,
    };
    bundle.save(&args.out_dir.join("model"))?;
    write_metrics_csv(&metric_rows, &args.out_dir.join("metrics.csv"))?;

    let report = CalibrationReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        mode,
        n_samples: s,
        n_components: design.n_components(),
        selected_lv: selected,
        rmsecv_by_lv: cv_curve,
        metrics: metric_rows,
        flags,
    };
    crate::write_json_atomic(&args.out_dir.join("calibration_report.json"), &report)?;
    Ok(report)
}

fn write_metrics_csv(rows: &[ResponseMetrics], path: &Path) -> Result<(), CliError> {
    let mut body = String::from("response,rmsec,rmsecv,rmsep,r2y,q2y\n");
    for m in rows {
        let rmsep = m.rmsep.map(|v| format!("{v}")).unwrap_or_default();
        body.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.response, m.rmsec, m.rmsecv, rmsep, m.r2y, m.q2y
        ));
    }
    crate::write_atomic(path, body.as_bytes())
}
