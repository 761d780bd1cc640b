//! `identify`: preprocess the unknown's spectra, select the model order by
//! ICA-by-blocks, extract the sources, and match each against the library.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use specmix::bss;
use specmix::speclib::LibraryIndex;
use specmix::spectra::{Spectrum, SpectrumMatrix};

use crate::config::PipelineConfig;
use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentifiedComponent {
    pub index: usize,
    pub spectrum_file: String,
    pub identified: bool,
    pub ambiguous: bool,
    pub note: String,
    pub matches: Vec<MatchRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchRecord {
    pub entry: String,
    pub inci: String,
    pub dilution_pct: f64,
    pub correlation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub config_hash: String,
    pub seed: u64,
    pub n_inputs: usize,
    pub blocks: usize,
    pub block_sizes: Vec<usize>,
    pub f_max: usize,
    pub optimal_f: usize,
    /// True when no order met the reproducibility threshold.
    pub order_fallback: bool,
    pub min_correlations_per_order: Vec<f64>,
    pub converged: bool,
    pub reconstruction_residual: f64,
    pub components: Vec<IdentifiedComponent>,
}

/// Read every input file as a spectrum matrix (single-spectrum CSVs are
/// one-column matrices), resample onto `axis` and stack the rows.
pub fn load_input_rows(
    inputs: &[PathBuf],
    axis: &specmix::spectra::WavenumberAxis,
) -> Result<SpectrumMatrix, CliError> {
    let mut spectra: Vec<Spectrum> = Vec::new();
    for path in inputs {
        let matrix = SpectrumMatrix::read_csv(path)?;
        for i in 0..matrix.n_samples() {
            let row = matrix.row(i);
            let label = format!(
                "{}:{}",
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                row.label()
            );
            spectra.push(row.resample(axis)?.with_label(label));
        }
    }
    SpectrumMatrix::from_spectra(&spectra).map_err(CliError::from)
}

pub fn cmd_identify(
    cfg: &PipelineConfig,
    library_dir: &Path,
    inputs: &[PathBuf],
    out_dir: &Path,
) -> Result<IdentificationReport, CliError> {
    if inputs.is_empty() {
        return Err(CliError::user("identify needs at least one spectra file"));
    }
    let library = LibraryIndex::load(library_dir)?;
    let x = load_input_rows(inputs, library.axis())?;

    let b = cfg.ica.blocks;
    let s = x.n_samples();
    if s < 2 * b {
        return Err(CliError::user(format!(
            "identify needs at least {} spectra for {b} blocks, got {s}; record more dilution/variation spectra",
            2 * b
        )));
    }

    // §-style preprocessing for source extraction: per-row SNV, then MSC
    // against the mean of the normalized set.
    let normalized = x.normalize_rows()?;
    let reference = normalized.msc_reference()?;
    let preprocessed = normalized.msc_correct_rows(&reference)?;

    let f_max = cfg.ica.f_max.min(s / b).max(1);
    let report = bss::ica_by_blocks(&preprocessed, b, f_max, &cfg.ica_by_blocks_options())?;
    let model = bss::fit_infomax(&preprocessed, report.optimal_f, &cfg.ica_options())?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::io_msg(format!("cannot create {}: {e}", out_dir.display())))?;
    model.export(out_dir)?;
    report.write_correlation_csv(out_dir.join("correlation_table.csv"))?;

    let mut components = Vec::with_capacity(model.n_components());
    for i in 0..model.n_components() {
        let spectrum = model.source_spectrum(i);
        let file = format!("ic_{}.csv", i + 1);
        spectrum.write_csv(out_dir.join(&file))?;

        let hits = library.match_spectrum(&spectrum, cfg.matching.threshold)?;
        let identified = !hits.is_empty();
        let ambiguous = hits.len() >= 2
            && hits[1].correlation.abs() >= hits[0].correlation.abs() - cfg.matching.ambiguity_margin;
        let note = if !identified {
            "no library match above threshold; possible sub-1% constituent or absent from library"
                .to_string()
        } else if ambiguous {
            "ambiguous: near-collinear library entries; include both in the mixture design"
                .to_string()
        } else {
            String::new()
        };
        components.push(IdentifiedComponent {
            index: i + 1,
            spectrum_file: file,
            identified,
            ambiguous,
            note,
            matches: hits
                .into_iter()
                .map(|m| MatchRecord {
                    entry: m.entry_name,
                    inci: m.inci,
                    dilution_pct: m.dilution_pct,
                    correlation: m.correlation,
                })
                .collect(),
        });
    }

    let out = IdentificationReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        n_inputs: s,
        blocks: b,
        block_sizes: report.block_sizes.clone(),
        f_max,
        optimal_f: report.optimal_f,
        order_fallback: report.fallback,
        min_correlations_per_order: report.orders.iter().map(|o| o.min_correlation).collect(),
        converged: model.converged(),
        reconstruction_residual: model.residual(),
        components,
    };
    crate::write_json_atomic(&out_dir.join("report.json"), &out)?;
    Ok(out)
}
