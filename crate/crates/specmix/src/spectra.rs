//! Spectrum representation, axis handling, normalization and multiplicative
//! signal correction.
//!
//! All operations are pure: they borrow their inputs and return new values,
//! so they are safe to call from any number of threads.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::{Error, Result};

/// Shared wavenumber grid in cm^-1, strictly increasing, at least two points.
#[derive(Debug, Clone, PartialEq)]
pub struct WavenumberAxis {
    values: Vec<f64>,
}

impl WavenumberAxis {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParam(format!(
                "axis needs at least 2 points, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("axis contains non-finite value".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParam(
                "axis must be strictly increasing".into(),
            ));
        }
        Ok(Self { values })
    }

    /// Evenly spaced axis from `min` to at most `max` with the given step.
    pub fn from_range(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) || !min.is_finite() || !max.is_finite() || max <= min {
            return Err(Error::InvalidParam(format!(
                "invalid axis range {min}..{max} step {step}"
            )));
        }
        let count = ((max - min) / step * (1.0 + 1e-12)).floor() as usize + 1;
        let values = (0..count).map(|k| min + step * k as f64).collect();
        Self::new(values)
    }

    /// The instrument grid used as the crate-wide default: 150 to 3480 cm^-1
    /// in 4 cm^-1 steps (833 points).
    pub fn default_raman() -> Self {
        Self::from_range(150.0, 3480.0, 4.0).expect("default axis is valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Smallest gap between adjacent grid points.
    pub fn min_step(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// One intensity vector on a wavenumber axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    axis: WavenumberAxis,
    intensities: Array1<f64>,
    label: String,
}

impl Spectrum {
    pub fn new(
        axis: WavenumberAxis,
        intensities: Array1<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if intensities.len() != axis.len() {
            return Err(Error::DimensionMismatch(format!(
                "axis has {} points, intensities {}",
                axis.len(),
                intensities.len()
            )));
        }
        if intensities.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(
                "intensities contain NaN or infinity".into(),
            ));
        }
        Ok(Self {
            axis,
            intensities,
            label: label.into(),
        })
    }

    pub fn axis(&self) -> &WavenumberAxis {
        &self.axis
    }

    pub fn intensities(&self) -> ArrayView1<'_, f64> {
        self.intensities.view()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Linear interpolation onto `target`, exact at shared grid points.
    ///
    /// The target range must lie inside this spectrum's axis range.
    pub fn resample(&self, target: &WavenumberAxis) -> Result<Spectrum> {
        let src = self.axis.values();
        if target.min() < src[0] || target.max() > *src.last().unwrap() {
            return Err(Error::AxisOutOfRange {
                requested: (target.min(), target.max()),
                available: (src[0], *src.last().unwrap()),
            });
        }
        let mut out = Array1::<f64>::zeros(target.len());
        for (k, &w) in target.values().iter().enumerate() {
            out[k] = match src.binary_search_by(|probe| probe.partial_cmp(&w).unwrap()) {
                Ok(i) => self.intensities[i],
                Err(i) => {
                    // w lies strictly between src[i-1] and src[i]
                    let (lo, hi) = (i - 1, i);
                    let t = (w - src[lo]) / (src[hi] - src[lo]);
                    self.intensities[lo] * (1.0 - t) + self.intensities[hi] * t
                }
            };
        }
        Spectrum::new(target.clone(), out, self.label.clone())
    }

    /// SNV normalization: subtract the mean, scale to unit Euclidean norm.
    ///
    /// The result is invariant to affine rescaling `a*x + b` (a > 0) of the
    /// input. Constant spectra are rejected.
    pub fn normalize(&self) -> Result<Spectrum> {
        let first = self.intensities[0];
        if self.intensities.iter().all(|&v| v == first) {
            return Err(Error::DegenerateSpectrum(self.label.clone()));
        }
        let mean = self.intensities.sum() / self.intensities.len() as f64;
        let centered = &self.intensities - mean;
        let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateSpectrum(self.label.clone()));
        }
        Spectrum::new(self.axis.clone(), centered / norm, self.label.clone())
    }

    /// Ordinary least-squares fit of `self ≈ slope * reference + intercept`.
    pub fn msc_fit(&self, reference: &Spectrum) -> Result<MscFit> {
        self.check_axis(reference)?;
        let r = reference.intensities();
        let x = self.intensities();
        let n = r.len() as f64;
        let mr = r.sum() / n;
        let mx = x.sum() / n;
        let mut srr = 0.0;
        let mut srx = 0.0;
        for (&ri, &xi) in r.iter().zip(x.iter()) {
            srr += (ri - mr) * (ri - mr);
            srx += (ri - mr) * (xi - mx);
        }
        if srr == 0.0 {
            return Err(Error::DegenerateReference);
        }
        let slope = srx / srr;
        let intercept = mx - slope * mr;
        Ok(MscFit { slope, intercept })
    }

    /// Multiplicative signal correction against a reference spectrum.
    ///
    /// Fits `self ≈ a * reference + b` and returns `(self - b) / a`, so the
    /// corrected spectrum regresses on the reference with slope 1 and
    /// intercept 0.
    pub fn msc_correct(&self, reference: &Spectrum) -> Result<Spectrum> {
        let fit = self.msc_fit(reference)?;
        if fit.slope.abs() < 1e-10 {
            return Err(Error::NearZeroSlope(fit.slope));
        }
        let corrected = self.intensities.mapv(|v| (v - fit.intercept) / fit.slope);
        Spectrum::new(self.axis.clone(), corrected, self.label.clone())
    }

    fn check_axis(&self, other: &Spectrum) -> Result<()> {
        if self.axis != other.axis {
            return Err(Error::AxisMismatch(format!(
                "'{}' vs '{}'",
                self.label, other.label
            )));
        }
        Ok(())
    }

    /// Read a single-spectrum CSV with header `wavenumber_cm1,intensity`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Spectrum> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        {
            let headers = reader.headers().map_err(|e| csv_error(path, e))?;
            if headers.len() < 2 || headers.get(0) != Some("wavenumber_cm1") {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    detail: "expected header wavenumber_cm1,intensity".into(),
                });
            }
        }
        let mut wavenumbers = Vec::new();
        let mut intensities = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let line = idx + 2;
            wavenumbers.push(parse_field(path, line, record.get(0))?);
            intensities.push(parse_field(path, line, record.get(1))?);
        }
        let axis = WavenumberAxis::new(wavenumbers)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Spectrum::new(axis, Array1::from_vec(intensities), label)
    }

    /// Write as CSV with header `wavenumber_cm1,intensity`.
    ///
    /// Values are written in shortest round-trip form, so a read-back is
    /// bit-exact.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut body = String::from("wavenumber_cm1,intensity\n");
        for (w, v) in self.axis.values().iter().zip(self.intensities.iter()) {
            body.push_str(&format!("{w},{v}\n"));
        }
        crate::fsutil::write_atomic(path, body.as_bytes())
    }
}

/// Coefficients of the MSC regression `spectrum ≈ slope * reference + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MscFit {
    pub slope: f64,
    pub intercept: f64,
}

/// A stack of spectra sharing one axis; rows are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMatrix {
    axis: WavenumberAxis,
    rows: Array2<f64>,
    labels: Vec<String>,
}

impl SpectrumMatrix {
    pub fn new(axis: WavenumberAxis, rows: Array2<f64>, labels: Vec<String>) -> Result<Self> {
        if rows.ncols() != axis.len() {
            return Err(Error::DimensionMismatch(format!(
                "axis has {} points, rows have {} columns",
                axis.len(),
                rows.ncols()
            )));
        }
        if rows.nrows() == 0 {
            return Err(Error::InvalidParam("matrix needs at least one row".into()));
        }
        if labels.len() != rows.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                rows.nrows()
            )));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(
                "intensities contain NaN or infinity".into(),
            ));
        }
        Ok(Self { axis, rows, labels })
    }

    /// Stack spectra into a matrix; all must share the first spectrum's axis.
    pub fn from_spectra(spectra: &[Spectrum]) -> Result<Self> {
        if spectra.is_empty() {
            return Err(Error::InvalidParam("matrix needs at least one row".into()));
        }
        let axis = spectra[0].axis().clone();
        for s in spectra.iter().skip(1) {
            if s.axis() != &axis {
                return Err(Error::AxisMismatch(format!(
                    "'{}' differs from '{}'",
                    s.label(),
                    spectra[0].label()
                )));
            }
        }
        let mut rows = Array2::<f64>::zeros((spectra.len(), axis.len()));
        for (i, s) in spectra.iter().enumerate() {
            rows.row_mut(i).assign(&s.intensities());
        }
        let labels = spectra.iter().map(|s| s.label().to_string()).collect();
        Self::new(axis, rows, labels)
    }

    pub fn axis(&self) -> &WavenumberAxis {
        &self.axis
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.rows.nrows()
    }

    pub fn row(&self, i: usize) -> Spectrum {
        Spectrum {
            axis: self.axis.clone(),
            intensities: self.rows.row(i).to_owned(),
            label: self.labels[i].clone(),
        }
    }

    /// Column-wise mean spectrum, the working-set MSC reference.
    pub fn msc_reference(&self) -> Result<Spectrum> {
        if self.n_samples() < 2 {
            return Err(Error::InvalidParam(
                "MSC reference needs at least 2 spectra".into(),
            ));
        }
        let mean = self.rows.mean_axis(Axis(0)).unwrap();
        Spectrum::new(self.axis.clone(), mean, "mean")
    }

    /// SNV-normalize every row.
    pub fn normalize_rows(&self) -> Result<SpectrumMatrix> {
        let mut rows = self.rows.clone();
        for (i, mut row) in rows.axis_iter_mut(Axis(0)).enumerate() {
            let spec = self.row(i).normalize()?;
            row.assign(&spec.intensities());
        }
        Self::new(self.axis.clone(), rows, self.labels.clone())
    }

    /// MSC-correct every row against the given reference.
    pub fn msc_correct_rows(&self, reference: &Spectrum) -> Result<SpectrumMatrix> {
        let mut rows = self.rows.clone();
        for (i, mut row) in rows.axis_iter_mut(Axis(0)).enumerate() {
            let spec = self.row(i).msc_correct(reference)?;
            row.assign(&spec.intensities());
        }
        Self::new(self.axis.clone(), rows, self.labels.clone())
    }

    /// Read a multi-spectrum CSV: first column `wavenumber_cm1`, one column
    /// per sample, header row carries the sample labels.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<SpectrumMatrix> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let labels: Vec<String> = {
            let headers = reader.headers().map_err(|e| csv_error(path, e))?;
            if headers.len() < 2 || headers.get(0) != Some("wavenumber_cm1") {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    detail: "expected header wavenumber_cm1,<label>,...".into(),
                });
            }
            headers.iter().skip(1).map(|s| s.to_string()).collect()
        };
        let mut wavenumbers = Vec::new();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
        for (idx, record) in reader.records().enumerate() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let line = idx + 2;
            if record.len() != labels.len() + 1 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    detail: format!(
                        "expected {} fields, got {}",
                        labels.len() + 1,
                        record.len()
                    ),
                });
            }
            wavenumbers.push(parse_field(path, line, record.get(0))?);
            for (c, col) in columns.iter_mut().enumerate() {
                col.push(parse_field(path, line, record.get(c + 1))?);
            }
        }
        let axis = WavenumberAxis::new(wavenumbers)?;
        let mut rows = Array2::<f64>::zeros((labels.len(), axis.len()));
        for (c, col) in columns.iter().enumerate() {
            for (k, &v) in col.iter().enumerate() {
                rows[[c, k]] = v;
            }
        }
        Self::new(axis, rows, labels)
    }

    /// Write the transpose layout described in [`SpectrumMatrix::read_csv`].
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["wavenumber_cm1".to_string()];
        header.extend(self.labels.iter().cloned());
        writer
            .write_record(&header)
            .map_err(|e| csv_error(path, e))?;
        for (k, &w) in self.axis.values().iter().enumerate() {
            let mut record = Vec::with_capacity(self.labels.len() + 1);
            record.push(format!("{w}"));
            for i in 0..self.n_samples() {
                record.push(format!("{}", self.rows[[i, k]]));
            }
            writer
                .write_record(&record)
                .map_err(|e| csv_error(path, e))?;
        }
        let body = writer
            .into_inner()
            .map_err(|e| Error::InvalidParam(e.to_string()))?;
        crate::fsutil::write_atomic(path, &body)
    }
}

fn parse_field(path: &Path, line: usize, field: Option<&str>) -> Result<f64> {
    let raw = field.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line,
        detail: "missing field".into(),
    })?;
    let value: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        detail: format!("not a number: '{raw}'"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            detail: format!("non-finite value: '{raw}'"),
        });
    }
    Ok(value)
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    match err.kind() {
        csv::ErrorKind::Io(_) => {
            if let csv::ErrorKind::Io(io) = err.into_kind() {
                Error::io(path, io)
            } else {
                unreachable!()
            }
        }
        _ => Error::Parse {
            path: path.to_path_buf(),
            line: err
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or_default(),
            detail: err.to_string(),
        },
    }
}
