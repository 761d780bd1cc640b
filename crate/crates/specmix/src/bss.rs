//! Blind source separation.
//!
//! The observation model is `X = A S`: each of the `s` rows of `X` is a
//! linear combination of `f` unknown source spectra (rows of `S`, length
//! `n`). This module provides
//!
//! * [`whiten`] — PCA-based decorrelation of the sample space,
//! * [`fit_infomax`] — sequential entropy-maximization ICA with Gram-Schmidt
//!   deflation, giving `S = W X`,
//! * [`estimate_mixing`] — least-squares recovery `A = X Sᵀ (S Sᵀ)⁻¹`,
//! * [`ica_by_blocks`] — model-order selection by fitting each candidate
//!   order per sample block and keeping orders whose components agree across
//!   blocks.
//!
//! Individual fits are single-threaded and fully determined by their seed;
//! the independent (block, order) fits of `ica_by_blocks` run in parallel
//! with the `parallel` feature and are merged in a fixed order, so results
//! do not depend on the build.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg;
use crate::par;
use crate::spectra::{Spectrum, SpectrumMatrix, WavenumberAxis};
use crate::{Error, Result};

/// Options for a single InfoMax fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcaOptions {
    /// Iteration cap per extracted component.
    pub max_iter: usize,
    /// Convergence tolerance on the change of the extraction direction.
    pub tol: f64,
    /// RNG seed for the initial directions.
    pub seed: u64,
    /// Finish with an unconstrained maximum-likelihood pass over the
    /// unmixing matrix. Lifting the orthogonality constraint lets the fit
    /// undo empirical correlation between sources; disable to keep the
    /// purely Gram-Schmidt-orthogonal solution.
    pub relax_orthogonality: bool,
}

impl Default for IcaOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-6,
            seed: 42,
            relax_orthogonality: true,
        }
    }
}

/// Centering and projection that map observations to decorrelated
/// unit-variance components.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningTransform {
    mean: Array1<f64>,
    projection: Array2<f64>,
    explained_variance: Vec<f64>,
}

impl WhiteningTransform {
    /// Per-row mean of the observations (length `s`).
    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    /// `f x s` matrix mapping centered observations to whitened components.
    pub fn projection(&self) -> &Array2<f64> {
        &self.projection
    }

    /// Fraction of total variance carried by each retained component.
    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// Apply the transform: `Z = P (X - mean 1ᵀ)`.
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut centered = x.clone();
        for (i, mut row) in centered.outer_iter_mut().enumerate() {
            let m = self.mean[i];
            row.mapv_inplace(|v| v - m);
        }
        self.projection.dot(&centered)
    }
}

/// Fitted ICA decomposition of an `s x n` spectrum matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IcaModel {
    f: usize,
    unmixing: Array2<f64>,
    sources: Array2<f64>,
    mixing: Array2<f64>,
    converged: bool,
    iterations: usize,
    residual: f64,
    seed: u64,
    axis: WavenumberAxis,
    sample_labels: Vec<String>,
}

impl IcaModel {
    /// Number of independent components.
    pub fn n_components(&self) -> usize {
        self.f
    }

    /// `f x s` unmixing matrix `W` with `S = W X`.
    pub fn unmixing(&self) -> &Array2<f64> {
        &self.unmixing
    }

    /// `f x n` source matrix; rows have unit norm and the largest-magnitude
    /// element of each row is positive.
    pub fn sources(&self) -> &Array2<f64> {
        &self.sources
    }

    /// `s x f` mixing matrix recovered by least squares.
    pub fn mixing(&self) -> &Array2<f64> {
        &self.mixing
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Total gradient-ascent iterations over all components.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Relative reconstruction error `‖X - A S‖_F / ‖X‖_F`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn axis(&self) -> &WavenumberAxis {
        &self.axis
    }

    /// The `i`-th extracted source as a spectrum labeled `IC<i+1>`.
    pub fn source_spectrum(&self, i: usize) -> Spectrum {
        Spectrum::new(
            self.axis.clone(),
            self.sources.row(i).to_owned(),
            format!("IC{}", i + 1),
        )
        .expect("source rows are finite")
    }

    /// Export sources (spectrum-matrix CSV), mixing matrix (one row per
    /// sample) and a JSON sidecar with the fit diagnostics.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let sources: Vec<Spectrum> = (0..self.f).map(|i| self.source_spectrum(i)).collect();
        SpectrumMatrix::from_spectra(&sources)?.write_csv(dir.join("sources.csv"))?;

        let mut body = String::from("sample");
        for i in 0..self.f {
            body.push_str(&format!(",IC{}", i + 1));
        }
        body.push('\n');
        for (r, label) in self.sample_labels.iter().enumerate() {
            body.push_str(&escape_csv(label));
            for c in 0..self.f {
                body.push_str(&format!(",{}", self.mixing[[r, c]]));
            }
            body.push('\n');
        }
        crate::fsutil::write_atomic(&dir.join("mixing.csv"), body.as_bytes())?;

        let sidecar = serde_json::json!({
            "f": self.f,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "seed": self.seed,
        });
        let text = serde_json::to_vec_pretty(&sidecar)
            .map_err(|e| Error::InvalidParam(e.to_string()))?;
        crate::fsutil::write_atomic(&dir.join("ica_model.json"), &text)
    }
}

fn escape_csv(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Decorrelate the sample space of `x`, keeping `f` components.
///
/// Eigendecomposition of the row-space covariance; the returned matrix has
/// identity covariance (population convention, `1/n`). Errors with
/// [`Error::RankDeficient`] when fewer than `f` eigenvalues exceed
/// `1e-10 * λ_max`.
pub fn whiten(x: &SpectrumMatrix, f: usize) -> Result<(Array2<f64>, WhiteningTransform)> {
    whiten_array(x.rows(), f)
}

fn whiten_array(x: &Array2<f64>, f: usize) -> Result<(Array2<f64>, WhiteningTransform)> {
    let (s, n) = (x.nrows(), x.ncols());
    if f == 0 || f > s.min(n) {
        return Err(Error::InvalidParam(format!(
            "component count {f} outside 1..={}",
            s.min(n)
        )));
    }

    let mean = x.mean_axis(Axis(1)).unwrap();
    let mut centered = x.clone();
    for (i, mut row) in centered.outer_iter_mut().enumerate() {
        let m = mean[i];
        row.mapv_inplace(|v| v - m);
    }
    let cov = centered.dot(&centered.t()) / n as f64;

    let (eigenvalues, eigenvectors) = linalg::sym_eig(&cov);
    let lambda_max = eigenvalues[0].max(0.0);
    let significant = eigenvalues
        .iter()
        .filter(|&&l| l > 1e-10 * lambda_max && l > 0.0)
        .count();
    if significant < f {
        return Err(Error::RankDeficient {
            requested: f,
            available: significant,
        });
    }

    let total: f64 = eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    let mut projection = Array2::<f64>::zeros((f, s));
    let mut explained = Vec::with_capacity(f);
    for k in 0..f {
        let scale = 1.0 / eigenvalues[k].sqrt();
        for j in 0..s {
            projection[[k, j]] = eigenvectors[[j, k]] * scale;
        }
        explained.push(eigenvalues[k] / total);
    }

    let transform = WhiteningTransform {
        mean,
        projection,
        explained_variance: explained,
    };
    let whitened = transform.apply(x);
    Ok((whitened, transform))
}

// log g'(u) for the logistic nonlinearity, computed stably:
// log g'(u) = -(softplus(u) + softplus(-u)).
fn log_logistic_density(u: f64) -> f64 {
    -(softplus(u) + softplus(-u))
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

// The unit output is y = g(wᵀz + b) with a free bias weight b; the bias
// absorbs source skewness that would otherwise tilt the direction.
fn entropy_objective(z: &Array2<f64>, w: &Array1<f64>, bias: f64) -> f64 {
    let u = w.dot(z);
    u.iter().map(|&v| log_logistic_density(v + bias)).sum::<f64>() / u.len() as f64
}

// Gradient of the objective: E[(1 - 2 g(u + b)) z] over the direction and
// E[1 - 2 g(u + b)] over the bias, with g the logistic sigmoid.
fn entropy_gradient(z: &Array2<f64>, w: &Array1<f64>, bias: f64) -> (Array1<f64>, f64) {
    let u = w.dot(z);
    let score = u.mapv(|v| -((v + bias) / 2.0).tanh());
    let n = u.len() as f64;
    (z.dot(&score) / n, score.sum() / n)
}

// Remove projections on `basis` (vectors assumed orthonormal).
fn gram_schmidt(v: &mut Array1<f64>, basis: &[Array1<f64>]) {
    for b in basis {
        let proj = v.dot(b);
        v.scaled_add(-proj, b);
    }
}

fn vec_norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

// Extract `f` orthonormal directions in the whitened space by sequential
// entropy maximization. Returns (directions as rows, all converged, total
// iterations).
fn extract_directions(z: &Array2<f64>, f: usize, opts: &IcaOptions) -> (Array2<f64>, bool, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut directions: Vec<Array1<f64>> = Vec::with_capacity(f);
    let mut all_converged = true;
    let mut total_iterations = 0usize;

    for _comp in 0..f {
        let mut w = loop {
            let mut cand = Array1::from_iter((0..f).map(|_| rng.gen_range(-1.0..1.0)));
            gram_schmidt(&mut cand, &directions);
            let norm = vec_norm(&cand);
            if norm > 1e-6 {
                break cand / norm;
            }
        };
        let mut bias = 0.0f64;

        let mut objective = entropy_objective(z, &w, bias);
        let mut step = 0.5f64;
        let mut converged = false;

        for _iter in 0..opts.max_iter {
            total_iterations += 1;
            let (gradient, bias_gradient) = entropy_gradient(z, &w, bias);
            let mut trial = step;
            let mut accepted = false;
            for _ in 0..40 {
                let mut cand = &w + &(&gradient * trial);
                gram_schmidt(&mut cand, &directions);
                let norm = vec_norm(&cand);
                if norm < 1e-12 {
                    trial *= 0.5;
                    continue;
                }
                cand /= norm;
                let cand_bias = bias + trial * bias_gradient;
                let cand_objective = entropy_objective(z, &cand, cand_bias);
                if cand_objective >= objective {
                    let delta = vec_norm(&(&cand - &w));
                    w = cand;
                    bias = cand_bias;
                    objective = cand_objective;
                    step = (trial * 1.5).min(2.0);
                    accepted = true;
                    if delta < opts.tol {
                        converged = true;
                    }
                    break;
                }
                trial *= 0.5;
            }
            if !accepted {
                // no uphill step within line-search resolution: local maximum
                converged = true;
            }
            if converged {
                break;
            }
        }

        if !converged {
            all_converged = false;
        }
        directions.push(w);
    }

    let mut r = Array2::<f64>::zeros((f, f));
    for (i, d) in directions.iter().enumerate() {
        r.row_mut(i).assign(d);
    }

    if f > 1 {
        let (joint_converged, joint_iterations) = refine_joint(z, &mut r, opts);
        all_converged = all_converged && joint_converged;
        total_iterations += joint_iterations;
        if opts.relax_orthogonality {
            let (ml_converged, ml_iterations) = refine_maximum_likelihood(z, &mut r, opts);
            all_converged = all_converged && ml_converged;
            total_iterations += ml_iterations;
        }
    }
    (r, all_converged, total_iterations)
}

// Full InfoMax likelihood over an unconstrained unmixing matrix:
// J(W, b) = sum_i E[log g'(w_i z + b_i)] + log |det W|, climbed with the
// natural gradient (I + E[phi(u) u^T]) W. Starting from the orthogonal
// solution, this stage can tilt the directions to undo empirical source
// correlation that an orthogonal rotation cannot express.
fn refine_maximum_likelihood(
    z: &Array2<f64>,
    r: &mut Array2<f64>,
    opts: &IcaOptions,
) -> (bool, usize) {
    let f = r.nrows();
    let n = z.ncols() as f64;
    let mut biases = vec![0.0f64; f];

    let total = |w: &Array2<f64>, bs: &[f64]| -> f64 {
        let det = linalg::det(w);
        if det.abs() < 1e-300 {
            return f64::NEG_INFINITY;
        }
        let mut acc = det.abs().ln();
        for i in 0..f {
            acc += entropy_objective(z, &w.row(i).to_owned(), bs[i]);
        }
        acc
    };

    let mut objective = total(r, &biases);
    let mut step = 0.1f64;
    let mut converged = false;
    let mut iterations = 0usize;

    for _iter in 0..opts.max_iter {
        iterations += 1;
        let u = r.dot(z);
        let mut phi = Array2::<f64>::zeros((f, u.ncols()));
        let mut bias_gradient = vec![0.0f64; f];
        for i in 0..f {
            let mut mean_phi = 0.0;
            for (k, &v) in u.row(i).iter().enumerate() {
                let score = -((v + biases[i]) / 2.0).tanh();
                phi[[i, k]] = score;
                mean_phi += score;
            }
            bias_gradient[i] = mean_phi / n;
        }
        // natural gradient: (I + E[phi u^T]) W
        let mut factor = phi.dot(&u.t()) / n;
        for i in 0..f {
            factor[[i, i]] += 1.0;
        }
        let gradient = factor.dot(&*r);

        let mut trial = step;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &*r + &(&gradient * trial);
            let cand_biases: Vec<f64> = biases
                .iter()
                .zip(bias_gradient.iter())
                .map(|(b, g)| b + trial * g)
                .collect();
            let cand_objective = total(&cand, &cand_biases);
            if cand_objective > objective {
                let delta = (&cand - &*r).iter().map(|v| v * v).sum::<f64>().sqrt();
                *r = cand;
                biases = cand_biases;
                objective = cand_objective;
                step = (trial * 1.5).min(1.0);
                accepted = true;
                if delta < opts.tol {
                    converged = true;
                }
                break;
            }
            trial *= 0.5;
        }
        if !accepted {
            converged = true;
        }
        if converged {
            break;
        }
    }
    (converged, iterations)
}

// Symmetric (Loewdin) orthonormalization of the rows of `r`:
// R <- (R Rᵀ)^(-1/2) R. Unlike the ordered Gram-Schmidt used during
// deflation this treats all rows equally, so a joint gradient step can
// rotate the whole set.
fn orthonormalize_rows(r: &mut Array2<f64>) -> bool {
    let gram = r.dot(&r.t());
    let (eigenvalues, eigenvectors) = linalg::sym_eig(&gram);
    if eigenvalues.iter().any(|&l| l < 1e-24) {
        return false;
    }
    let f = r.nrows();
    let mut inv_sqrt = Array2::<f64>::zeros((f, f));
    for i in 0..f {
        for j in 0..f {
            let mut acc = 0.0;
            for k in 0..f {
                acc += eigenvectors[[i, k]] * eigenvectors[[j, k]] / eigenvalues[k].sqrt();
            }
            inv_sqrt[[i, j]] = acc;
        }
    }
    *r = inv_sqrt.dot(r);
    true
}

// Joint refinement: gradient ascent on the summed per-component objective
// over the orthogonal group, re-orthonormalizing after every step. Sequential
// deflation loads its small finite-sample tilt onto later components; the
// joint optimum distributes it, which is what the full entropy objective
// asks for.
fn refine_joint(z: &Array2<f64>, r: &mut Array2<f64>, opts: &IcaOptions) -> (bool, usize) {
    let f = r.nrows();
    let mut biases = vec![0.0f64; f];

    let total = |rot: &Array2<f64>, bs: &[f64]| -> f64 {
        (0..f)
            .map(|i| entropy_objective(z, &rot.row(i).to_owned(), bs[i]))
            .sum()
    };

    let mut objective = total(r, &biases);
    let mut step = 0.5f64;
    let mut converged = false;
    let mut iterations = 0usize;

    for _iter in 0..opts.max_iter {
        iterations += 1;
        let mut gradient = Array2::<f64>::zeros((f, f));
        let mut bias_gradient = vec![0.0f64; f];
        for i in 0..f {
            let (g, gb) = entropy_gradient(z, &r.row(i).to_owned(), biases[i]);
            gradient.row_mut(i).assign(&g);
            bias_gradient[i] = gb;
        }

        let mut trial = step;
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand = &*r + &(&gradient * trial);
            if !orthonormalize_rows(&mut cand) {
                trial *= 0.5;
                continue;
            }
            let cand_biases: Vec<f64> = biases
                .iter()
                .zip(bias_gradient.iter())
                .map(|(b, g)| b + trial * g)
                .collect();
            let cand_objective = total(&cand, &cand_biases);
            if cand_objective >= objective {
                let delta = (&cand - &*r).iter().map(|v| v * v).sum::<f64>().sqrt();
                *r = cand;
                biases = cand_biases;
                objective = cand_objective;
                step = (trial * 1.5).min(2.0);
                accepted = true;
                if delta < opts.tol {
                    converged = true;
                }
                break;
            }
            trial *= 0.5;
        }
        if !accepted {
            converged = true;
        }
        if converged {
            break;
        }
    }
    (converged, iterations)
}

/// Fit an InfoMax ICA model with `f` components.
///
/// Components are extracted one at a time on the whitened data by gradient
/// ascent on the logistic entropy objective, with Gram-Schmidt
/// re-orthogonalization against already extracted directions at every step
/// and step halving whenever the objective would decrease. Source rows are
/// scaled to unit norm and sign-fixed so each row's largest-magnitude
/// element is positive. Deterministic for a given seed.
///
/// A fit that hits `max_iter` without meeting `tol` is still returned, with
/// [`IcaModel::converged`] reporting `false`.
pub fn fit_infomax(x: &SpectrumMatrix, f: usize, opts: &IcaOptions) -> Result<IcaModel> {
    let xr = x.rows();
    let (z, transform) = whiten_array(xr, f)?;
    let (rotation, converged, iterations) = extract_directions(&z, f, opts);

    // Back to observation coordinates: S = (R P) X, without centering, so
    // the span of S matches the row space of X and A S can reconstruct X.
    let mut unmixing = rotation.dot(transform.projection());
    let mut sources = unmixing.dot(xr);

    for i in 0..f {
        let norm = vec_norm(&sources.row(i).to_owned());
        if norm > 0.0 {
            let mut max_abs = 0.0f64;
            let mut sign = 1.0f64;
            for &v in sources.row(i) {
                if v.abs() > max_abs {
                    max_abs = v.abs();
                    sign = if v < 0.0 { -1.0 } else { 1.0 };
                }
            }
            let scale = sign / norm;
            sources.row_mut(i).mapv_inplace(|v| v * scale);
            unmixing.row_mut(i).mapv_inplace(|v| v * scale);
        }
    }

    let estimate = estimate_mixing_array(xr, &sources)?;
    let x_norm = xr.iter().map(|v| v * v).sum::<f64>().sqrt();
    let residual = if x_norm > 0.0 {
        estimate.residual / x_norm
    } else {
        0.0
    };

    Ok(IcaModel {
        f,
        unmixing,
        sources,
        mixing: estimate.mixing,
        converged,
        iterations,
        residual,
        seed: opts.seed,
        axis: x.axis().clone(),
        sample_labels: x.labels().to_vec(),
    })
}

/// Least-squares mixing estimate and its absolute residual.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingEstimate {
    /// `s x f` mixing matrix.
    pub mixing: Array2<f64>,
    /// Frobenius norm of `X - A S`.
    pub residual: f64,
}

/// Recover the mixing matrix as `A = X Sᵀ (S Sᵀ)⁻¹`.
///
/// `sources` must have full row rank; the condition number of `S Sᵀ` is
/// checked against `1e12`.
pub fn estimate_mixing(x: &SpectrumMatrix, sources: &Array2<f64>) -> Result<MixingEstimate> {
    estimate_mixing_array(x.rows(), sources)
}

fn estimate_mixing_array(x: &Array2<f64>, sources: &Array2<f64>) -> Result<MixingEstimate> {
    if sources.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "sources have {} columns, data {}",
            sources.ncols(),
            x.ncols()
        )));
    }
    let gram = sources.dot(&sources.t());
    let (eigenvalues, _) = linalg::sym_eig(&gram);
    let lambda_max = eigenvalues[0];
    let lambda_min = eigenvalues[eigenvalues.len() - 1];
    let condition = if lambda_min > 0.0 {
        lambda_max / lambda_min
    } else {
        f64::INFINITY
    };
    if condition.is_nan() || condition >= 1e12 {
        return Err(Error::SingularSources { condition });
    }

    // A = X Sᵀ M⁻¹ solved as M Aᵀ = S Xᵀ
    let rhs = sources.dot(&x.t());
    let solution = linalg::solve(&gram, &rhs).ok_or(Error::SingularSources { condition })?;
    let mixing = solution.t().to_owned();

    let reconstruction = mixing.dot(sources);
    let residual = (x - &reconstruction)
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    Ok(MixingEstimate { mixing, residual })
}

/// Options for [`ica_by_blocks`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcaByBlocksOptions {
    pub ica: IcaOptions,
    /// Minimum matched inter-block |correlation| for an order to count as
    /// reproducible.
    pub threshold: f64,
}

impl Default for IcaByBlocksOptions {
    fn default() -> Self {
        Self {
            ica: IcaOptions::default(),
            threshold: 0.80,
        }
    }
}

/// Cross-block diagnostics for one candidate order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderDiagnostics {
    pub order: usize,
    /// False when some block could not support this many components.
    pub feasible: bool,
    /// Matched |correlations|, every block pair, assignment order.
    pub matched_correlations: Vec<f64>,
    /// Minimum of `matched_correlations` (0 when infeasible).
    pub min_correlation: f64,
}

/// Outcome of ICA-by-blocks order selection.
#[derive(Debug, Clone, PartialEq)]
pub struct IcaByBlocksReport {
    pub block_count: usize,
    pub block_sizes: Vec<usize>,
    pub tested_orders: Vec<usize>,
    pub orders: Vec<OrderDiagnostics>,
    pub threshold: f64,
    pub optimal_f: usize,
    /// True when no order met the threshold and `optimal_f` fell back to the
    /// order with the best minimum correlation.
    pub fallback: bool,
}

impl IcaByBlocksReport {
    /// Long-format CSV of the correlation table: one row per (order, matched
    /// component pair).
    pub fn write_correlation_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut body = String::from("order,feasible,matched_index,correlation,min_correlation\n");
        for diag in &self.orders {
            if diag.matched_correlations.is_empty() {
                body.push_str(&format!(
                    "{},{},,,{}\n",
                    diag.order, diag.feasible, diag.min_correlation
                ));
            }
            for (i, c) in diag.matched_correlations.iter().enumerate() {
                body.push_str(&format!(
                    "{},{},{},{},{}\n",
                    diag.order, diag.feasible, i, c, diag.min_correlation
                ));
            }
        }
        crate::fsutil::write_atomic(path.as_ref(), body.as_bytes())
    }
}

// Greedy maximum-|correlation| assignment between two source sets.
// Returns the matched |correlation| per assigned pair, best first.
fn greedy_match(a: &Array2<f64>, b: &Array2<f64>) -> Vec<f64> {
    let f = a.nrows();
    let mut corr = Array2::<f64>::zeros((f, f));
    for i in 0..f {
        for j in 0..f {
            corr[[i, j]] = linalg::pearson(a.row(i), b.row(j)).abs();
        }
    }
    let mut used_a = vec![false; f];
    let mut used_b = vec![false; f];
    let mut matched = Vec::with_capacity(f);
    for _ in 0..f {
        let mut best = (0usize, 0usize, -1.0f64);
        for i in 0..f {
            if used_a[i] {
                continue;
            }
            for j in 0..f {
                if used_b[j] {
                    continue;
                }
                if corr[[i, j]] > best.2 {
                    best = (i, j, corr[[i, j]]);
                }
            }
        }
        used_a[best.0] = true;
        used_b[best.1] = true;
        matched.push(best.2);
    }
    matched
}

/// Select the ICA model order by reproducibility across sample blocks.
///
/// Rows are split into `b` nearly equal contiguous blocks; for every order
/// `1..=f_max` an ICA model is fitted per block and components are matched
/// across block pairs by greedy maximum |correlation|. The chosen order is
/// the largest whose worst matched correlation stays at or above the
/// threshold. Orders a block cannot support (rank deficiency) are recorded
/// as infeasible rather than failing the whole scan.
pub fn ica_by_blocks(
    x: &SpectrumMatrix,
    b: usize,
    f_max: usize,
    opts: &IcaByBlocksOptions,
) -> Result<IcaByBlocksReport> {
    let s = x.n_samples();
    if b < 2 {
        return Err(Error::InvalidParam("need at least 2 blocks".into()));
    }
    if s < 2 * b {
        return Err(Error::TooFewSamples {
            rows: s,
            needed: 2 * b,
        });
    }
    let n = x.axis().len();
    let max_supported = (s / b).min(n);
    if f_max == 0 || f_max > max_supported {
        return Err(Error::InvalidParam(format!(
            "f_max {f_max} outside 1..={max_supported} for {s} rows in {b} blocks"
        )));
    }
    if !(0.0..=1.0).contains(&opts.threshold) {
        return Err(Error::InvalidParam(format!(
            "threshold {} outside [0, 1]",
            opts.threshold
        )));
    }

    // contiguous blocks, sizes differing by at most one
    let base = s / b;
    let remainder = s % b;
    let mut blocks: Vec<SpectrumMatrix> = Vec::with_capacity(b);
    let mut block_sizes = Vec::with_capacity(b);
    let mut start = 0usize;
    for i in 0..b {
        let size = base + usize::from(i < remainder);
        let rows = x
            .rows()
            .slice(ndarray::s![start..start + size, ..])
            .to_owned();
        let labels = x.labels()[start..start + size].to_vec();
        blocks.push(SpectrumMatrix::new(x.axis().clone(), rows, labels)?);
        block_sizes.push(size);
        start += size;
    }

    // all (order, block) fits are independent
    let jobs: Vec<(usize, usize)> = (1..=f_max)
        .flat_map(|f| (0..b).map(move |blk| (f, blk)))
        .collect();
    let fits: Vec<((usize, usize), Result<IcaModel>)> = par::map_collect(jobs, |(f, blk)| {
        let ica = IcaOptions {
            seed: opts.ica.seed.wrapping_add((f * b + blk) as u64),
            ..opts.ica
        };
        ((f, blk), fit_infomax(&blocks[blk], f, &ica))
    });

    let mut orders = Vec::with_capacity(f_max);
    for f in 1..=f_max {
        let mut models = Vec::with_capacity(b);
        let mut feasible = true;
        for blk in 0..b {
            let (_, result) = fits
                .iter()
                .find(|((jf, jb), _)| *jf == f && *jb == blk)
                .expect("every job ran");
            match result {
                Ok(model) => models.push(model),
                Err(Error::RankDeficient { .. }) => {
                    feasible = false;
                    break;
                }
                Err(e) => {
                    return Err(Error::InvalidParam(format!(
                        "order {f} block {blk} failed: {e}"
                    )))
                }
            }
        }
        if !feasible {
            orders.push(OrderDiagnostics {
                order: f,
                feasible: false,
                matched_correlations: Vec::new(),
                min_correlation: 0.0,
            });
            continue;
        }
        let mut matched = Vec::new();
        for i in 0..b {
            for j in (i + 1)..b {
                matched.extend(greedy_match(models[i].sources(), models[j].sources()));
            }
        }
        let min = matched.iter().cloned().fold(f64::INFINITY, f64::min);
        orders.push(OrderDiagnostics {
            order: f,
            feasible: true,
            matched_correlations: matched,
            min_correlation: if min.is_finite() { min } else { 0.0 },
        });
    }

    let mut optimal = None;
    for diag in orders.iter().rev() {
        if diag.feasible && diag.min_correlation >= opts.threshold {
            optimal = Some(diag.order);
            break;
        }
    }
    let fallback = optimal.is_none();
    let optimal_f = optimal.unwrap_or_else(|| {
        orders
            .iter()
            .max_by(|a, b| {
                a.min_correlation
                    .partial_cmp(&b.min_correlation)
                    .unwrap()
                    .then(b.order.cmp(&a.order))
            })
            .map(|d| d.order)
            .unwrap_or(1)
    });

    Ok(IcaByBlocksReport {
        block_count: b,
        block_sizes,
        tested_orders: (1..=f_max).collect(),
        orders,
        threshold: opts.threshold,
        optimal_f,
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use ndarray::array;

    fn matrix(rows: Array2<f64>) -> SpectrumMatrix {
        let n = rows.ncols();
        let axis = WavenumberAxis::from_range(0.0, (n - 1) as f64, 1.0).unwrap();
        let labels = (0..rows.nrows()).map(|i| format!("r{i}")).collect();
        SpectrumMatrix::new(axis, rows, labels).unwrap()
    }

    #[test]
    fn whiten_identity_covariance() {
        // orthogonal equal-power rows
        let x = matrix(array![[1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0]]);
        let (z, transform) = whiten(&x, 2).unwrap();
        let cov = z.dot(&z.t()) / z.ncols() as f64;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((cov[[i, j]] - want).abs() < 1e-10);
            }
        }
        assert_eq!(transform.explained_variance().len(), 2);
    }

    #[test]
    fn whiten_rank_one_single_component() {
        let base = Array1::from_iter((0..50).map(|i| ((i as f64) * 0.7).sin()));
        let mut rows = Array2::<f64>::zeros((3, 50));
        for (i, scale) in [1.0, 2.0, -0.5].iter().enumerate() {
            rows.row_mut(i).assign(&(&base * *scale));
        }
        let x = matrix(rows);
        let (_, transform) = whiten(&x, 1).unwrap();
        assert!((transform.explained_variance()[0] - 1.0).abs() < 1e-9);
        match whiten(&x, 2) {
            Err(Error::RankDeficient { available, .. }) => assert_eq!(available, 1),
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn whiten_random_matrix_variances_match_projection_oracle() {
        // The explained variances must equal the variances of the data
        // projected on the eigenvector directions, computed independently.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rows = Array2::from_shape_fn((10, 200), |_| rng.gen_range(-1.0..1.0));
        let x = matrix(rows.clone());
        let (z, transform) = whiten(&x, 3).unwrap();

        let cov = z.dot(&z.t()) / z.ncols() as f64;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (cov[[i, j]] - want).abs() < 1e-8,
                    "cov[{i},{j}] = {}",
                    cov[[i, j]]
                );
            }
        }

        let n = rows.ncols() as f64;
        let mean = rows.mean_axis(Axis(1)).unwrap();
        let mut total = 0.0;
        for (i, row) in rows.outer_iter().enumerate() {
            total += row.iter().map(|v| (v - mean[i]).powi(2)).sum::<f64>() / n;
        }
        // the k-th projection row is e_k / sqrt(l_k); its direction projects
        // the centered data onto variance l_k, so the ratio to the total must
        // reproduce the reported explained variance
        for k in 0..3 {
            let p_row = transform.projection().row(k).to_owned();
            let norm = vec_norm(&p_row);
            let e_k = &p_row / norm;
            let mut centered = rows.clone();
            for (i, mut r) in centered.outer_iter_mut().enumerate() {
                let m = mean[i];
                r.mapv_inplace(|v| v - m);
            }
            let proj = e_k.dot(&centered);
            let var = proj.iter().map(|v| v * v).sum::<f64>() / n;
            let ratio = var / total;
            assert!(
                (ratio - transform.explained_variance()[k]).abs() < 1e-10,
                "component {k}: oracle {ratio}, reported {}",
                transform.explained_variance()[k]
            );
        }
    }

    #[test]
    fn estimate_mixing_identity_for_orthonormal_sources() {
        let s = array![[0.5, 0.5, -0.5, -0.5], [0.5, -0.5, 0.5, -0.5]];
        let x = matrix(s.clone());
        let est = estimate_mixing(&x, &s).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((est.mixing[[i, j]] - want).abs() < 1e-10);
            }
        }
        assert!(est.residual < 1e-12);
    }

    #[test]
    fn estimate_mixing_single_scaled_source() {
        let s = array![[1.0, 2.0, 3.0, 4.0]];
        let x = matrix(&s * 2.0);
        let est = estimate_mixing(&x, &s).unwrap();
        assert!((est.mixing[[0, 0]] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_mixing_recovers_random_mixing() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let sources = Array2::from_shape_fn((3, 120), |_| rng.gen_range(-1.0..1.0));
        let a0 = Array2::from_shape_fn((8, 3), |_| rng.gen_range(-2.0..2.0));
        let x = matrix(a0.dot(&sources));
        let est = estimate_mixing(&x, &sources).unwrap();
        let diff = (&est.mixing - &a0).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff < 1e-8, "Frobenius error {diff}");
    }

    #[test]
    fn estimate_mixing_rejects_singular_sources() {
        let s = array![[1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 6.0, 8.0]];
        let x = matrix(s.clone());
        match estimate_mixing(&x, &s) {
            Err(Error::SingularSources { .. }) => {}
            other => panic!("expected SingularSources, got {other:?}"),
        }
    }

    #[test]
    fn estimate_mixing_residual_orthogonal_to_sources() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let sources = Array2::from_shape_fn((2, 60), |_| rng.gen_range(-1.0..1.0));
        // data not in the span of the sources
        let x = Array2::from_shape_fn((4, 60), |_| rng.gen_range(-1.0..1.0));
        let xm = matrix(x.clone());
        let est = estimate_mixing(&xm, &sources).unwrap();
        let residual = &x - &est.mixing.dot(&sources);
        let cross = residual.dot(&sources.t());
        let scale = est.residual.max(1e-30);
        for v in cross.iter() {
            assert!(v.abs() / scale < 1e-8, "residual not orthogonal: {v}");
        }
    }

    #[test]
    fn infomax_identity_mixing_two_orthogonal_sources() {
        // f = s = 2, X = S0 with two exactly orthogonal sparse sources:
        // recovery up to permutation/sign.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let axis = WavenumberAxis::default_raman();
        let n = axis.len();
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            Array1::from_iter((0..n).map(|_| {
                if rng.gen_bool(0.05) {
                    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    sign * rng.gen_range(0.5..2.0)
                } else {
                    0.0
                }
            }))
        };
        let raw1 = draw(&mut rng);
        let raw2 = draw(&mut rng);
        let s1 = &raw1 - raw1.sum() / n as f64;
        let mut s2 = &raw2 - raw2.sum() / n as f64;
        let proj = s1.dot(&s2) / s1.dot(&s1);
        s2.scaled_add(-proj, &s1);
        assert!(linalg::pearson(s1.view(), s2.view()).abs() < 1e-12);

        let mut rows = Array2::<f64>::zeros((2, n));
        rows.row_mut(0).assign(&s1);
        rows.row_mut(1).assign(&s2);
        let x = SpectrumMatrix::new(axis, rows, vec!["s1".into(), "s2".into()]).unwrap();
        let model = fit_infomax(&x, 2, &IcaOptions::default()).unwrap();

        for t in [&s1, &s2] {
            let best = (0..2)
                .map(|i| linalg::pearson(model.sources().row(i), t.view()).abs())
                .fold(f64::MIN, f64::max);
            assert!(best >= 0.999, "matched |corr| {best}");
        }
    }

    #[test]
    fn infomax_three_band_sources_from_simplex_mixtures() {
        // 3 synthetic band-spectra sources observed through 10 simplex
        // design mixtures, noise-free: permutation-matched |corr| >= 0.99.
        let axis = WavenumberAxis::default_raman();
        let mats: Vec<_> = (51..=53)
            .map(|s| synth::generate_material(s, &axis, 5).unwrap())
            .collect();
        let design = crate::design::simplex_lattice(3, 3).unwrap();
        let x = synth::mix_batch(&mats, &axis, design.points(), 0.0, 5).unwrap();
        assert_eq!(x.n_samples(), 10);
        let model = fit_infomax(&x, 3, &IcaOptions::default()).unwrap();

        let mut mean = 0.0;
        for m in &mats {
            let truth = m.pure_spectrum(&axis).unwrap();
            let best = (0..3)
                .map(|i| linalg::pearson(model.sources().row(i), truth.intensities()).abs())
                .fold(f64::MIN, f64::max);
            assert!(best >= 0.99, "matched |corr| {best} for {}", m.name);
            mean += best / 3.0;
        }
        assert!(mean >= 0.99, "mean matched |corr| {mean}");
    }

    #[test]
    fn infomax_single_source_under_scaling() {
        let axis = WavenumberAxis::default_raman();
        let m = synth::generate_material(41, &axis, 6).unwrap();
        let pure = m.pure_spectrum(&axis).unwrap();
        let mut rows = Array2::<f64>::zeros((4, axis.len()));
        for (i, scale) in [0.2, 0.5, 1.0, 1.7].iter().enumerate() {
            rows.row_mut(i).assign(&(&pure.intensities() * *scale));
        }
        let labels = (0..4).map(|i| format!("r{i}")).collect();
        let x = SpectrumMatrix::new(axis.clone(), rows, labels).unwrap();
        let model = fit_infomax(&x, 1, &IcaOptions::default()).unwrap();
        let corr = linalg::pearson(model.sources().row(0), pure.intensities()).abs();
        assert!(corr >= 0.999, "|corr| {corr}");
    }

    #[test]
    fn infomax_is_deterministic() {
        let axis = WavenumberAxis::default_raman();
        let mats: Vec<_> = (1..=3)
            .map(|s| synth::generate_material(s, &axis, 5).unwrap())
            .collect();
        let comps = array![
            [0.5, 0.3, 0.2],
            [0.2, 0.5, 0.3],
            [0.3, 0.2, 0.5],
            [0.6, 0.2, 0.2],
            [0.2, 0.6, 0.2],
            [0.2, 0.2, 0.6]
        ];
        let x = synth::mix_batch(&mats, &axis, &comps, 0.0, 7).unwrap();
        let a = fit_infomax(&x, 3, &IcaOptions::default()).unwrap();
        let b = fit_infomax(&x, 3, &IcaOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infomax_extraction_directions_orthogonal() {
        // With the maximum-likelihood pass disabled, Gram-Schmidt deflation
        // leaves the whitened-domain extraction directions mutually
        // orthogonal; equivalently u_i = w_i (X - mean) are uncorrelated
        // across components.
        let axis = WavenumberAxis::default_raman();
        let mats: Vec<_> = (11..=14)
            .map(|s| synth::generate_material(s, &axis, 5).unwrap())
            .collect();
        let comps = array![
            [0.4, 0.3, 0.2, 0.1],
            [0.1, 0.4, 0.3, 0.2],
            [0.2, 0.1, 0.4, 0.3],
            [0.3, 0.2, 0.1, 0.4],
            [0.25, 0.25, 0.25, 0.25],
            [0.7, 0.1, 0.1, 0.1],
            [0.1, 0.7, 0.1, 0.1],
            [0.1, 0.1, 0.7, 0.1]
        ];
        let x = synth::mix_batch(&mats, &axis, &comps, 0.0, 3).unwrap();
        let opts = IcaOptions {
            relax_orthogonality: false,
            ..Default::default()
        };
        let model = fit_infomax(&x, 4, &opts).unwrap();
        let mut u = model.unmixing().dot(x.rows());
        for mut row in u.outer_iter_mut() {
            let m = row.sum() / row.len() as f64;
            row.mapv_inplace(|v| v - m);
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let num = u.row(i).dot(&u.row(j)).abs();
                let den = vec_norm(&u.row(i).to_owned()) * vec_norm(&u.row(j).to_owned());
                assert!(
                    num / den < 1e-8,
                    "components {i},{j} correlated: {}",
                    num / den
                );
            }
        }
    }

    #[test]
    fn ica_by_blocks_single_source() {
        let axis = WavenumberAxis::default_raman();
        let m = synth::generate_material(21, &axis, 6).unwrap();
        let pure = m.pure_spectrum(&axis).unwrap();
        let mut rows = Array2::<f64>::zeros((8, axis.len()));
        for i in 0..8 {
            let scale = 0.2 + 0.3 * i as f64;
            rows.row_mut(i).assign(&(&pure.intensities() * scale));
        }
        let labels = (0..8).map(|i| format!("r{i}")).collect();
        let x = SpectrumMatrix::new(axis, rows, labels).unwrap();
        let report = ica_by_blocks(&x, 2, 3, &IcaByBlocksOptions::default()).unwrap();
        assert_eq!(report.optimal_f, 1);
        assert!(report.orders[0].min_correlation >= 0.999);
        // orders 2 and 3 cannot be fitted on rank-1 blocks
        assert!(!report.orders[1].feasible);
        assert!(!report.orders[2].feasible);
    }

    #[test]
    fn ica_by_blocks_rejects_too_few_rows() {
        let x = matrix(array![
            [1.0, 2.0, 3.0, 4.0],
            [4.0, 3.0, 2.0, 1.0],
            [1.0, 3.0, 2.0, 4.0]
        ]);
        match ica_by_blocks(&x, 2, 1, &IcaByBlocksOptions::default()) {
            Err(Error::TooFewSamples { rows, needed }) => {
                assert_eq!((rows, needed), (3, 4));
            }
            other => panic!("expected TooFewSamples, got {other:?}"),
        }
    }
}
