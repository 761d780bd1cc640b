//! `synth material` and `synth mix`: generate reproducible synthetic data.

use std::path::PathBuf;

use ndarray::Array2;
use specmix::design::MixtureDesign;
use specmix::synth::{self, RawMaterialModel};

use crate::config::PipelineConfig;
use crate::CliError;

pub struct SynthMaterialArgs {
    pub bands: usize,
    pub name: Option<String>,
    pub out_file: PathBuf,
    /// Also write the pure spectrum CSV here.
    pub spectrum_out: Option<PathBuf>,
}

pub fn cmd_synth_material(
    cfg: &PipelineConfig,
    args: &SynthMaterialArgs,
) -> Result<String, CliError> {
    let axis = cfg.axis.build()?;
    let mut material = synth::generate_material(cfg.seed, &axis, args.bands)?;
    if let Some(name) = &args.name {
        material.name = name.clone();
    }
    material.write_json(&args.out_file)?;
    if let Some(path) = &args.spectrum_out {
        material.pure_spectrum(&axis)?.write_csv(path)?;
    }
    Ok(format!(
        "wrote material '{}' ({} bands, seed {}) to {}",
        material.name,
        material.bands.len(),
        cfg.seed,
        args.out_file.display()
    ))
}

pub struct SynthMixArgs {
    pub materials: Vec<PathBuf>,
    /// Either explicit proportions...
    pub composition: Option<Vec<f64>>,
    /// ... or a design file, one mixture per row.
    pub design: Option<PathBuf>,
    /// When > 0 (with --composition): emit this many jittered/diluted
    /// variation rows instead of the single exact mixture.
    pub vary: usize,
    /// Relative composition jitter for --vary rows.
    pub jitter: f64,
    /// Absolute composition jitter for --vary rows.
    pub abs_jitter: f64,
    /// Dilution factor range LO:HI for --vary rows.
    pub dilution_range: Option<(f64, f64)>,
    pub noise: f64,
    /// Acquisitions averaged per recorded spectrum.
    pub accumulations: usize,
    pub out_file: PathBuf,
}

pub fn cmd_synth_mix(cfg: &PipelineConfig, args: &SynthMixArgs) -> Result<String, CliError> {
    let axis = cfg.axis.build()?;
    let materials: Vec<RawMaterialModel> = args
        .materials
        .iter()
        .map(RawMaterialModel::read_json)
        .collect::<Result<_, _>>()?;
    if materials.is_empty() {
        return Err(CliError::user("synth mix needs at least one material"));
    }

    let compositions: Array2<f64> = match (&args.composition, &args.design) {
        (Some(c), None) if args.vary > 0 => {
            synth::vary_composition(c, args.vary, args.jitter, args.abs_jitter, args.dilution_range, cfg.seed)?
        }
        (Some(c), None) => {
            let mut m = Array2::<f64>::zeros((1, c.len()));
            for (j, &v) in c.iter().enumerate() {
                m[[0, j]] = v;
            }
            m
        }
        (None, Some(path)) => {
            let design = MixtureDesign::read_csv(path)?;
            if design.n_components() != materials.len() {
                return Err(CliError::user(format!(
                    "design has {} components for {} materials",
                    design.n_components(),
                    materials.len()
                )));
            }
            design.points().clone()
        }
        _ => {
            return Err(CliError::user(
                "synth mix needs exactly one of --composition or --design",
            ))
        }
    };

    if args.accumulations == 0 {
        return Err(CliError::user("--accumulations must be at least 1"));
    }
    let batch = {
        let first = synth::mix_batch(&materials, &axis, &compositions, args.noise, cfg.seed)?;
        if args.accumulations == 1 {
            first
        } else {
            let mut acc = first.rows().clone();
            for a in 1..args.accumulations {
                let next = synth::mix_batch(
                    &materials,
                    &axis,
                    &compositions,
                    args.noise,
                    cfg.seed.wrapping_add(1000 * a as u64),
                )?;
                acc = acc + next.rows();
            }
            acc /= args.accumulations as f64;
            specmix::spectra::SpectrumMatrix::new(axis.clone(), acc, first.labels().to_vec())?
        }
    };
    batch.write_csv(&args.out_file)?;
    Ok(format!(
        "wrote {} mixture spectra (noise {}, seed {}) to {}",
        batch.n_samples(),
        args.noise,
        cfg.seed,
        args.out_file.display()
    ))
}
