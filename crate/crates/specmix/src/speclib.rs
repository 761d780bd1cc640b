//! Persistent library of raw-material reference spectra and
//! correlation-based identification.
//!
//! Entries carry a pure spectrum plus an optional dilution series. Spectra
//! are resampled onto the library's shared axis and SNV-normalized on
//! ingestion, so matching reduces to Pearson correlation. An index is
//! immutable once built; `add_entry` returns a new index value.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::par;
use crate::spectra::{Spectrum, WavenumberAxis};
use crate::{Error, Result};

/// One raw material: metadata plus its reference spectra by dilution level.
#[derive(Debug, Clone, PartialEq)]
pub struct LibraryEntry {
    name: String,
    inci: String,
    supplier: String,
    /// (dilution percentage in (0, 100], spectrum), sorted descending by
    /// dilution.
    spectra: Vec<(f64, Spectrum)>,
}

impl LibraryEntry {
    /// Build an entry. Requires a pure (dilution 100) spectrum and unique
    /// dilution levels.
    pub fn new(
        name: impl Into<String>,
        inci: impl Into<String>,
        supplier: impl Into<String>,
        mut spectra: Vec<(f64, Spectrum)>,
    ) -> Result<Self> {
        let name = name.into();
        if spectra.is_empty() {
            return Err(Error::InvalidParam(format!(
                "entry '{name}' has no spectra"
            )));
        }
        for &(d, _) in &spectra {
            if !(d > 0.0 && d <= 100.0) {
                return Err(Error::InvalidParam(format!(
                    "entry '{name}': dilution {d} outside (0, 100]"
                )));
            }
        }
        if !spectra.iter().any(|&(d, _)| d == 100.0) {
            return Err(Error::InvalidParam(format!(
                "entry '{name}' lacks a pure (dilution 100) spectrum"
            )));
        }
        spectra.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        if spectra.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParam(format!(
                "entry '{name}' has duplicate dilution levels"
            )));
        }
        Ok(Self {
            name,
            inci: inci.into(),
            supplier: supplier.into(),
            spectra,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn inci(&self) -> &str {
        &self.inci
    }

    pub fn supplier(&self) -> &str {
        &self.supplier
    }

    pub fn spectra(&self) -> &[(f64, Spectrum)] {
        &self.spectra
    }
}

/// An immutable set of library entries on one shared axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LibraryIndex {
    axis: WavenumberAxis,
    entries: Vec<LibraryEntry>,
}

/// One identification hit.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub entry_name: String,
    pub inci: String,
    pub dilution_pct: f64,
    pub correlation: f64,
}

impl LibraryIndex {
    pub fn new(axis: WavenumberAxis) -> Self {
        Self {
            axis,
            entries: Vec::new(),
        }
    }

    pub fn axis(&self) -> &WavenumberAxis {
        &self.axis
    }

    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, name: &str) -> Option<&LibraryEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Add an entry, returning the extended index. Spectra are resampled to
    /// the index axis and SNV-normalized.
    pub fn add_entry(&self, entry: LibraryEntry) -> Result<LibraryIndex> {
        if self.entry(&entry.name).is_some() {
            return Err(Error::DuplicateName(entry.name));
        }
        let mut stored = Vec::with_capacity(entry.spectra.len());
        for (dilution, spectrum) in entry.spectra {
            let resampled = spectrum.resample(&self.axis)?;
            let normalized = resampled
                .normalize()?
                .with_label(format!("{}@{dilution}", entry.name));
            stored.push((dilution, normalized));
        }
        let mut entries = self.entries.clone();
        entries.push(LibraryEntry {
            name: entry.name,
            inci: entry.inci,
            supplier: entry.supplier,
            spectra: stored,
        });
        Ok(LibraryIndex {
            axis: self.axis.clone(),
            entries,
        })
    }

    /// Correlate `query` against every stored spectrum.
    ///
    /// Returns at most one result per entry (its best dilution) with
    /// `|correlation| >= threshold`, sorted by descending |correlation|.
    /// The query is resampled and normalized first, so results are
    /// invariant to affine rescaling of the input.
    pub fn match_spectrum(&self, query: &Spectrum, threshold: f64) -> Result<Vec<MatchResult>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidParam(format!(
                "threshold {threshold} outside [0, 1]"
            )));
        }
        let query = if query.axis() == &self.axis {
            query.clone()
        } else {
            query.resample(&self.axis)?
        };
        let query = query.normalize()?;

        let jobs: Vec<usize> = (0..self.entries.len()).collect();
        let mut results: Vec<MatchResult> = par::map_collect(jobs, |i| {
            let entry = &self.entries[i];
            let mut best: Option<(f64, f64)> = None; // (|corr| best, dilution)
            let mut signed = 0.0;
            for (dilution, spectrum) in &entry.spectra {
                let corr = linalg::pearson(query.intensities(), spectrum.intensities());
                if best.map(|(b, _)| corr.abs() > b).unwrap_or(true) {
                    best = Some((corr.abs(), *dilution));
                    signed = corr;
                }
            }
            let (_, dilution) = best.expect("entries have spectra");
            MatchResult {
                entry_name: entry.name.clone(),
                inci: entry.inci.clone(),
                dilution_pct: dilution,
                correlation: signed,
            }
        })
        .into_iter()
        .filter(|m| m.correlation.abs() >= threshold)
        .collect();

        results.sort_by(|a, b| {
            b.correlation
                .abs()
                .partial_cmp(&a.correlation.abs())
                .unwrap()
                .then_with(|| a.entry_name.cmp(&b.entry_name))
        });
        Ok(results)
    }

    /// Write the library to a directory: `manifest.json` (the entry array),
    /// `axis.csv` and one spectrum CSV per stored spectrum.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let mut axis_body = String::from("wavenumber_cm1\n");
        for w in self.axis.values() {
            axis_body.push_str(&format!("{w}\n"));
        }
        crate::fsutil::write_atomic(&dir.join("axis.csv"), axis_body.as_bytes())?;

        let mut manifest: Vec<ManifestEntry> = Vec::with_capacity(self.entries.len());
        let mut used_files: BTreeSet<String> = BTreeSet::new();
        for entry in &self.entries {
            let slug = slugify(&entry.name);
            let mut records = Vec::with_capacity(entry.spectra.len());
            for (dilution, spectrum) in &entry.spectra {
                let mut file = format!("{slug}_{dilution}.csv");
                let mut suffix = 1usize;
                while used_files.contains(&file) {
                    file = format!("{slug}_{dilution}_{suffix}.csv");
                    suffix += 1;
                }
                used_files.insert(file.clone());
                spectrum.write_csv(dir.join(&file))?;
                records.push(ManifestSpectrum {
                    dilution_pct: *dilution,
                    file,
                });
            }
            manifest.push(ManifestEntry {
                name: entry.name.clone(),
                inci: entry.inci.clone(),
                supplier: entry.supplier.clone(),
                spectra: records,
                unknown: Default::default(),
            });
        }
        let body = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| Error::InvalidParam(e.to_string()))?;
        crate::fsutil::write_atomic(&dir.join("manifest.json"), &body)
    }

    /// Load a library directory written by [`LibraryIndex::save`].
    ///
    /// Unknown manifest fields are ignored with a warning on stderr; a
    /// missing spectrum file is an error naming the path.
    pub fn load(dir: impl AsRef<Path>) -> Result<LibraryIndex> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("manifest.json");
        let body =
            std::fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Vec<ManifestEntry> =
            serde_json::from_slice(&body).map_err(|e| Error::ManifestParse {
                path: manifest_path.clone(),
                detail: e.to_string(),
            })?;
        for entry in &manifest {
            for key in entry.unknown.keys() {
                eprintln!(
                    "warning: manifest entry '{}': ignoring unknown field '{key}'",
                    entry.name
                );
            }
        }

        let axis_path = dir.join("axis.csv");
        let axis = if axis_path.exists() {
            read_axis_csv(&axis_path)?
        } else if let Some(first) = manifest.first() {
            // legacy layout: take the axis from the first referenced CSV
            let file = first.spectra.first().map(|s| s.file.clone()).ok_or_else(|| {
                Error::ManifestParse {
                    path: manifest_path.clone(),
                    detail: format!("entry '{}' lists no spectra", first.name),
                }
            })?;
            let path = dir.join(file);
            if !path.exists() {
                return Err(Error::MissingSpectrumFile { path });
            }
            Spectrum::read_csv(&path)?.axis().clone()
        } else {
            return Err(Error::ManifestParse {
                path: manifest_path.clone(),
                detail: "empty library without axis.csv".into(),
            });
        };

        let mut index = LibraryIndex::new(axis.clone());
        for entry in manifest {
            let mut spectra = Vec::with_capacity(entry.spectra.len());
            for record in entry.spectra {
                let path = dir.join(&record.file);
                if !path.exists() {
                    return Err(Error::MissingSpectrumFile { path });
                }
                let spectrum = Spectrum::read_csv(&path)?
                    .with_label(format!("{}@{}", entry.name, record.dilution_pct));
                if spectrum.axis() != &axis {
                    return Err(Error::AxisMismatch(format!(
                        "{} differs from library axis",
                        path.display()
                    )));
                }
                spectra.push((record.dilution_pct, spectrum));
            }
            // stored spectra are already processed; bypass re-normalization
            let entry = LibraryEntry::new(entry.name, entry.inci, entry.supplier, spectra)?;
            if index.entry(&entry.name).is_some() {
                return Err(Error::DuplicateName(entry.name));
            }
            index.entries.push(entry);
        }
        Ok(index)
    }
}

fn read_axis_csv(path: &Path) -> Result<WavenumberAxis> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line.trim() != "wavenumber_cm1" {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    detail: "expected header 'wavenumber_cm1'".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        values.push(line.trim().parse::<f64>().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            detail: format!("not a number: '{line}'"),
        })?);
    }
    WavenumberAxis::new(values)
}

fn slugify(name: &str) -> String {
    let slug: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if slug.is_empty() {
        "entry".to_string()
    } else {
        slug
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    inci: String,
    supplier: String,
    spectra: Vec<ManifestSpectrum>,
    #[serde(flatten, skip_serializing)]
    unknown: std::collections::BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestSpectrum {
    dilution_pct: f64,
    file: String,
}
