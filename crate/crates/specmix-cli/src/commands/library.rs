//! `lib add`, `lib list` and `lib show`.

use std::path::{Path, PathBuf};

use specmix::speclib::{LibraryEntry, LibraryIndex};
use specmix::spectra::Spectrum;

use crate::config::PipelineConfig;
use crate::CliError;

pub struct LibAddArgs {
    pub library: PathBuf,
    pub name: String,
    pub inci: String,
    pub supplier: String,
    /// (dilution percentage, spectrum CSV path)
    pub spectra: Vec<(f64, PathBuf)>,
}

/// Load a library directory, treating an uninitialized directory as empty.
pub fn open_or_create(dir: &Path, cfg: &PipelineConfig) -> Result<LibraryIndex, CliError> {
    if dir.join("manifest.json").exists() {
        Ok(LibraryIndex::load(dir)?)
    } else {
        Ok(LibraryIndex::new(cfg.axis.build()?))
    }
}

pub fn cmd_lib_add(cfg: &PipelineConfig, args: &LibAddArgs) -> Result<String, CliError> {
    if args.spectra.is_empty() {
        return Err(CliError::user(
            "lib add needs at least one --spectrum PCT=FILE",
        ));
    }
    let index = open_or_create(&args.library, cfg)?;
    let mut spectra = Vec::with_capacity(args.spectra.len());
    for (dilution, path) in &args.spectra {
        let spectrum = Spectrum::read_csv(path)?;
        spectra.push((*dilution, spectrum));
    }
    let entry = LibraryEntry::new(&args.name, &args.inci, &args.supplier, spectra)?;
    let n_spectra = entry.spectra().len();
    let index = index.add_entry(entry)?;
    index.save(&args.library)?;
    Ok(format!(
        "added '{}' with {} spectra ({} entries total)",
        args.name,
        n_spectra,
        index.len()
    ))
}

pub fn cmd_lib_list(cfg: &PipelineConfig, library: &Path) -> Result<String, CliError> {
    let index = open_or_create(library, cfg)?;
    let mut out = format!("{} entries\n", index.len());
    let mut names: Vec<&LibraryEntry> = index.entries().iter().collect();
    names.sort_by(|a, b| a.name().cmp(b.name()));
    for entry in names {
        out.push_str(&format!(
            "{}  [{} spectra]  inci: {}  supplier: {}\n",
            entry.name(),
            entry.spectra().len(),
            entry.inci(),
            entry.supplier()
        ));
    }
    Ok(out)
}

pub fn cmd_lib_show(cfg: &PipelineConfig, library: &Path, name: &str) -> Result<String, CliError> {
    let index = open_or_create(library, cfg)?;
    let entry = index
        .entry(name)
        .ok_or_else(|| CliError::user(format!("no entry named '{name}'")))?;
    let mut out = format!(
        "name: {}\ninci: {}\nsupplier: {}\nspectra:\n",
        entry.name(),
        entry.inci(),
        entry.supplier()
    );
    for (dilution, spectrum) in entry.spectra() {
        out.push_str(&format!(
            "  dilution {:>5}%  {} points on [{}, {}] cm^-1\n",
            dilution,
            spectrum.axis().len(),
            spectrum.axis().min(),
            spectrum.axis().max()
        ));
    }
    Ok(out)
}
