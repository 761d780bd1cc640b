//! Seeded synthetic Raman-like spectrum generator.
//!
//! Materials are band models (Gaussian or Lorentzian peaks over an optional
//! polynomial baseline); mixtures are exact linear combinations of the pure
//! spectra plus additive seeded Gaussian noise. Everything is reproducible
//! from a `u64` seed, so generated data doubles as ground truth in tests.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::spectra::{Spectrum, SpectrumMatrix, WavenumberAxis};
use crate::{Error, Result};

/// Peak line shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandShape {
    Gaussian,
    Lorentzian,
}

/// One vibrational band: `width` is the half-width at half-maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandModel {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub shape: BandShape,
}

impl BandModel {
    fn eval(&self, w: f64) -> f64 {
        let d = w - self.center;
        match self.shape {
            BandShape::Gaussian => {
                self.amplitude * (-std::f64::consts::LN_2 * (d / self.width).powi(2)).exp()
            }
            BandShape::Lorentzian => {
                self.amplitude * self.width * self.width / (d * d + self.width * self.width)
            }
        }
    }
}

/// A synthetic raw material: a set of bands over a polynomial baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMaterialModel {
    pub name: String,
    pub bands: Vec<BandModel>,
    /// Baseline polynomial coefficients, lowest order first. Empty means no
    /// baseline.
    pub baseline: Vec<f64>,
}

impl RawMaterialModel {
    /// Evaluate the pure spectrum on `axis`.
    ///
    /// Bands must sit inside the axis and be resolvable (width at least two
    /// grid steps); the result must be non-negative, which a mischosen
    /// baseline can violate.
    pub fn pure_spectrum(&self, axis: &WavenumberAxis) -> Result<Spectrum> {
        if self.bands.is_empty() {
            return Err(Error::InvalidParam(format!(
                "material '{}' has no bands",
                self.name
            )));
        }
        let step = axis.min_step();
        for band in &self.bands {
            if band.center < axis.min() || band.center > axis.max() {
                return Err(Error::InvalidParam(format!(
                    "band center {} outside axis [{}, {}]",
                    band.center,
                    axis.min(),
                    axis.max()
                )));
            }
            if band.width < 2.0 * step {
                return Err(Error::InvalidParam(format!(
                    "band width {} unresolvable on {} cm^-1 grid",
                    band.width, step
                )));
            }
            if band.amplitude <= 0.0 {
                return Err(Error::InvalidParam("band amplitude must be positive".into()));
            }
        }
        let values = Array1::from_iter(axis.values().iter().map(|&w| {
            let bands: f64 = self.bands.iter().map(|b| b.eval(w)).sum();
            let baseline: f64 = self
                .baseline
                .iter()
                .rev()
                .fold(0.0, |acc, &c| acc * w + c);
            bands + baseline
        }));
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParam(format!(
                "material '{}' has a negative pure spectrum; adjust the baseline",
                self.name
            )));
        }
        Spectrum::new(axis.clone(), values, self.name.clone())
    }

    /// Write the model as JSON.
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let body = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::InvalidParam(e.to_string()))?;
        crate::fsutil::write_atomic(path.as_ref(), &body)
    }

    /// Read a model written by [`RawMaterialModel::write_json`].
    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&body).map_err(|e| Error::ManifestParse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }
}

/// One synthesized mixture observation.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSample {
    pub composition: Vec<f64>,
    pub spectrum: Spectrum,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Generate a material with `n_bands` seeded random bands on `axis`.
///
/// Band centers keep a minimum spacing of three times the widest band so the
/// materials stay spectrally distinct; widths, amplitudes and shapes are
/// drawn uniformly. The same seed always yields the same model.
pub fn generate_material(
    seed: u64,
    axis: &WavenumberAxis,
    n_bands: usize,
) -> Result<RawMaterialModel> {
    if n_bands == 0 {
        return Err(Error::InvalidParam("n_bands must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = axis.min_step();
    let width_lo = (2.0 * step).max(6.0);
    let width_hi = width_lo.max(40.0);

    let widths: Vec<f64> = (0..n_bands)
        .map(|_| rng.gen_range(width_lo..=width_hi))
        .collect();
    let amplitudes: Vec<f64> = (0..n_bands).map(|_| rng.gen_range(0.2..=1.0)).collect();
    let shapes: Vec<BandShape> = (0..n_bands)
        .map(|_| {
            if rng.gen_bool(0.5) {
                BandShape::Gaussian
            } else {
                BandShape::Lorentzian
            }
        })
        .collect();

    let max_width = widths.iter().cloned().fold(0.0, f64::max);
    let spacing = 3.0 * max_width;
    let margin = max_width;
    let usable = (axis.max() - margin) - (axis.min() + margin);
    let needed = spacing * (n_bands as f64 - 1.0);
    if usable <= 0.0 || needed > usable {
        return Err(Error::AxisTooNarrow {
            span: usable.max(0.0),
            needed,
        });
    }

    // Ordered-uniform placement: draw offsets into the slack left over after
    // reserving the minimum spacing, sort, and lay the centers out. No
    // rejection loop; succeeds whenever the layout is feasible.
    let slack = usable - needed;
    let mut offsets: Vec<f64> = (0..n_bands).map(|_| rng.gen_range(0.0..=slack)).collect();
    offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let bands = (0..n_bands)
        .map(|i| BandModel {
            center: axis.min() + margin + offsets[i] + spacing * i as f64,
            width: widths[i],
            amplitude: amplitudes[i],
            shape: shapes[i],
        })
        .collect();

    Ok(RawMaterialModel {
        name: format!("material-{seed}"),
        bands,
        baseline: Vec::new(),
    })
}

/// Linear mixture of pure spectra plus seeded Gaussian noise.
///
/// `composition` entries are proportions of each material; the remainder up
/// to 1 is an implicit diluent that contributes no signal. Noise sigma is
/// relative to the maximum intensity of the clean mixture; at sigma 0 the
/// result is exactly the linear combination.
pub fn mix(
    materials: &[RawMaterialModel],
    axis: &WavenumberAxis,
    composition: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<MixtureSample> {
    if materials.len() != composition.len() {
        return Err(Error::CompositionInvalid(format!(
            "{} proportions for {} materials",
            composition.len(),
            materials.len()
        )));
    }
    if !composition.iter().all(|&c| c >= 0.0) {
        return Err(Error::CompositionInvalid(
            "proportions must be non-negative".into(),
        ));
    }
    let total: f64 = composition.iter().sum();
    if total > 1.0 + 1e-9 {
        return Err(Error::CompositionInvalid(format!(
            "proportions sum to {total}, above 1"
        )));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::InvalidParam("noise_sigma must be >= 0".into()));
    }

    let mut clean = Array1::<f64>::zeros(axis.len());
    for (material, &c) in materials.iter().zip(composition.iter()) {
        let pure = material.pure_spectrum(axis)?;
        clean.scaled_add(c, &pure.intensities());
    }

    let values = if noise_sigma > 0.0 {
        let peak = clean.iter().cloned().fold(0.0f64, |a, v| a.max(v.abs()));
        let normal = Normal::new(0.0, noise_sigma * peak.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::InvalidParam(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        clean.mapv(|v| v + normal.sample(&mut rng))
    } else {
        clean
    };

    let spectrum = Spectrum::new(axis.clone(), values, "mixture")?;
    Ok(MixtureSample {
        composition: composition.to_vec(),
        spectrum,
        noise_sigma,
        seed,
    })
}

/// Jittered/diluted variations of one base composition.
///
/// Simulates the sample-preparation protocol for an unknown mixture: each
/// row perturbs every proportion by a relative factor `1 + U(-jitter,
/// jitter)` plus an absolute offset `U(-abs_jitter, abs_jitter)` (weighing
/// error, which dominates for minor constituents), clamps at zero, then
/// scales by a dilution factor drawn from `dilution_range`; rows exceeding
/// a total of 1 are rescaled. The resulting rows vary the relative
/// proportions, which is what source separation needs across samples.
pub fn vary_composition(
    base: &[f64],
    n_rows: usize,
    jitter: f64,
    abs_jitter: f64,
    dilution_range: Option<(f64, f64)>,
    seed: u64,
) -> Result<Array2<f64>> {
    if n_rows == 0 {
        return Err(Error::InvalidParam("need at least one variation row".into()));
    }
    if !(0.0..1.0).contains(&jitter) {
        return Err(Error::InvalidParam(format!(
            "jitter {jitter} outside [0, 1)"
        )));
    }
    if !(0.0..1.0).contains(&abs_jitter) {
        return Err(Error::InvalidParam(format!(
            "abs_jitter {abs_jitter} outside [0, 1)"
        )));
    }
    if !base.iter().all(|&c| c >= 0.0) || base.iter().sum::<f64>() > 1.0 + 1e-9 {
        return Err(Error::CompositionInvalid(
            "base proportions must be non-negative and sum at most 1".into(),
        ));
    }
    if let Some((lo, hi)) = dilution_range {
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "dilution range ({lo}, {hi}) must satisfy 0 < lo <= hi <= 1"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Array2::<f64>::zeros((n_rows, base.len()));
    for mut row in out.outer_iter_mut() {
        let dilution = match dilution_range {
            Some((lo, hi)) if lo < hi => rng.gen_range(lo..=hi),
            Some((lo, _)) => lo,
            None => 1.0,
        };
        let mut sum = 0.0;
        for (v, &c) in row.iter_mut().zip(base.iter()) {
            let factor = if jitter > 0.0 {
                1.0 + rng.gen_range(-jitter..=jitter)
            } else {
                1.0
            };
            let offset = if abs_jitter > 0.0 {
                rng.gen_range(-abs_jitter..=abs_jitter)
            } else {
                0.0
            };
            *v = (c * factor + offset).max(0.0) * dilution;
            sum += *v;
        }
        if sum > 1.0 {
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
    }
    Ok(out)
}

/// Synthesize one spectrum per composition row.
///
/// Row `i` uses `seed + i`, so a batch is reproducible while rows stay
/// independent. Labels are `mix_01`, `mix_02`, ...
pub fn mix_batch(
    materials: &[RawMaterialModel],
    axis: &WavenumberAxis,
    compositions: &Array2<f64>,
    noise_sigma: f64,
    seed: u64,
) -> Result<SpectrumMatrix> {
    if compositions.nrows() == 0 {
        return Err(Error::InvalidParam("no composition rows".into()));
    }
    let mut rows = Array2::<f64>::zeros((compositions.nrows(), axis.len()));
    let mut labels = Vec::with_capacity(compositions.nrows());
    for (i, comp) in compositions.outer_iter().enumerate() {
        let sample = mix(
            materials,
            axis,
            comp.as_slice().expect("contiguous row"),
            noise_sigma,
            seed.wrapping_add(i as u64),
        )?;
        rows.row_mut(i).assign(&sample.spectrum.intensities());
        labels.push(format!("mix_{:02}", i + 1));
    }
    SpectrumMatrix::new(axis.clone(), rows, labels)
}
