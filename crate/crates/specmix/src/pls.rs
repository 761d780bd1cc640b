//! Partial least squares regression (NIPALS) with cross-validation and the
//! usual chemometric quality metrics.
//!
//! `X` holds one spectrum per row, `Y` one composition per row. `X` is
//! column-centered, `Y` column-centered and autoscaled; band intensities
//! carry information, so `X` is deliberately not variance-scaled.
//!
//! Fits are single-threaded and deterministic. Cross-validation folds are
//! independent and run in parallel with the `parallel` feature, reduced in
//! fold order.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use crate::linalg;
use crate::par;
use crate::{Error, Result};

const NIPALS_TOL: f64 = 1e-10;
const NIPALS_MAX_ITER: usize = 1000;

/// A fitted PLS model.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsModel {
    n_lv: usize,
    x_mean: Array1<f64>,
    y_mean: Array1<f64>,
    y_scale: Array1<f64>,
    /// n x k weight vectors (W).
    weights: Array2<f64>,
    /// n x k X-loadings (P).
    x_loadings: Array2<f64>,
    /// r x k Y-loadings (Q).
    y_loadings: Array2<f64>,
    /// n x r regression coefficients in the centered/scaled space, at n_lv.
    coefficients: Array2<f64>,
    /// Per-LV inner-iteration convergence flags.
    lv_converged: Vec<bool>,
}

impl PlsModel {
    /// Number of latent variables actually extracted.
    pub fn n_lv(&self) -> usize {
        self.n_lv
    }

    pub fn n_vars(&self) -> usize {
        self.x_mean.len()
    }

    pub fn n_responses(&self) -> usize {
        self.y_mean.len()
    }

    /// Regression coefficients mapping centered X to centered/scaled Y.
    pub fn coefficients(&self) -> &Array2<f64> {
        &self.coefficients
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn x_loadings(&self) -> &Array2<f64> {
        &self.x_loadings
    }

    pub fn y_loadings(&self) -> &Array2<f64> {
        &self.y_loadings
    }

    pub fn lv_converged(&self) -> &[bool] {
        &self.lv_converged
    }

    /// True when every extracted LV met the inner NIPALS tolerance.
    pub fn converged(&self) -> bool {
        self.lv_converged.iter().all(|&c| c)
    }

    /// X-scores of the training (or any) data: `T = (X - mean) W (PᵀW)⁻¹`.
    pub fn scores(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_x(x)?;
        let centered = center(x, &self.x_mean);
        let pw = self.x_loadings.t().dot(&self.weights);
        let k = self.n_lv;
        if k == 0 {
            return Ok(Array2::zeros((x.nrows(), 0)));
        }
        let inv = linalg::solve(&pw, &Array2::eye(k)).ok_or(Error::SingularSources {
            condition: f64::INFINITY,
        })?;
        Ok(centered.dot(&self.weights.dot(&inv)))
    }

    /// Predict responses in original units.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.predict_with_lv(x, self.n_lv)
    }

    /// Predict using only the first `k` latent variables.
    pub fn predict_with_lv(&self, x: &Array2<f64>, k: usize) -> Result<Array2<f64>> {
        self.check_x(x)?;
        if k > self.n_lv {
            return Err(Error::InvalidParam(format!(
                "requested {k} latent variables, model has {}",
                self.n_lv
            )));
        }
        let b = if k == self.n_lv {
            self.coefficients.clone()
        } else {
            regression_coefficients(
                &self.weights.slice(ndarray::s![.., ..k]).to_owned(),
                &self.x_loadings.slice(ndarray::s![.., ..k]).to_owned(),
                &self.y_loadings.slice(ndarray::s![.., ..k]).to_owned(),
            )?
        };
        let centered = center(x, &self.x_mean);
        let scaled = centered.dot(&b);
        let mut out = scaled;
        for mut row in out.outer_iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * self.y_scale[j] + self.y_mean[j];
            }
        }
        Ok(out)
    }

    fn check_x(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.n_vars() {
            return Err(Error::AxisMismatch(format!(
                "model expects {} variables, got {}",
                self.n_vars(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Persist as a JSON sidecar plus CSV matrices. Values round-trip
    /// bit-exact.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let sidecar = serde_json::json!({
            "n_lv": self.n_lv,
            "n_vars": self.n_vars(),
            "n_responses": self.n_responses(),
            "x_mean": self.x_mean.to_vec(),
            "y_mean": self.y_mean.to_vec(),
            "y_scale": self.y_scale.to_vec(),
            "lv_converged": self.lv_converged,
        });
        let text = serde_json::to_vec_pretty(&sidecar)
            .map_err(|e| Error::InvalidParam(e.to_string()))?;
        crate::fsutil::write_atomic(&dir.join("model.json"), &text)?;
        write_matrix_csv(&dir.join("weights.csv"), &self.weights, "lv")?;
        write_matrix_csv(&dir.join("x_loadings.csv"), &self.x_loadings, "lv")?;
        write_matrix_csv(&dir.join("y_loadings.csv"), &self.y_loadings, "lv")?;
        write_matrix_csv(&dir.join("coefficients.csv"), &self.coefficients, "response")?;
        Ok(())
    }

    /// Load a model saved by [`PlsModel::save`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let sidecar_path = dir.join("model.json");
        let body = std::fs::read(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
        let json: serde_json::Value =
            serde_json::from_slice(&body).map_err(|e| Error::ManifestParse {
                path: sidecar_path.clone(),
                detail: e.to_string(),
            })?;
        let field_err = |field: &str| Error::ManifestParse {
            path: sidecar_path.clone(),
            detail: format!("missing or invalid field '{field}'"),
        };
        let n_lv = json["n_lv"].as_u64().ok_or_else(|| field_err("n_lv"))? as usize;
        let x_mean = json_f64_vec(&json["x_mean"]).ok_or_else(|| field_err("x_mean"))?;
        let y_mean = json_f64_vec(&json["y_mean"]).ok_or_else(|| field_err("y_mean"))?;
        let y_scale = json_f64_vec(&json["y_scale"]).ok_or_else(|| field_err("y_scale"))?;
        let lv_converged = json["lv_converged"]
            .as_array()
            .map(|a| a.iter().filter_map(|v| v.as_bool()).collect::<Vec<_>>())
            .ok_or_else(|| field_err("lv_converged"))?;
        let weights = read_matrix_csv(&dir.join("weights.csv"))?;
        let x_loadings = read_matrix_csv(&dir.join("x_loadings.csv"))?;
        let y_loadings = read_matrix_csv(&dir.join("y_loadings.csv"))?;
        let coefficients = read_matrix_csv(&dir.join("coefficients.csv"))?;
        Ok(Self {
            n_lv,
            x_mean: Array1::from_vec(x_mean),
            y_mean: Array1::from_vec(y_mean),
            y_scale: Array1::from_vec(y_scale),
            weights,
            x_loadings,
            y_loadings,
            coefficients,
            lv_converged,
        })
    }
}

fn json_f64_vec(v: &serde_json::Value) -> Option<Vec<f64>> {
    v.as_array()
        .map(|a| a.iter().filter_map(|x| x.as_f64()).collect::<Vec<_>>())
        .filter(|vec: &Vec<f64>| !vec.iter().any(|x| x.is_nan()))
}

fn write_matrix_csv(path: &Path, m: &Array2<f64>, prefix: &str) -> Result<()> {
    let mut body = String::new();
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("{prefix}_{}", j + 1)).collect();
    body.push_str(&header.join(","));
    body.push('\n');
    for row in m.outer_iter() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        body.push_str(&fields.join(","));
        body.push('\n');
    }
    crate::fsutil::write_atomic(path, body.as_bytes())
}

fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        detail: "empty matrix file".into(),
    })?;
    let ncols = header.split(',').count();
    let mut values: Vec<f64> = Vec::new();
    let mut nrows = 0usize;
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != ncols {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 2,
                detail: format!("expected {ncols} fields, got {}", fields.len()),
            });
        }
        for f in fields {
            values.push(f.trim().parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 2,
                detail: format!("not a number: '{f}'"),
            })?);
        }
        nrows += 1;
    }
    Array2::from_shape_vec((nrows, ncols), values)
        .map_err(|e| Error::InvalidParam(e.to_string()))
}

fn center(x: &Array2<f64>, mean: &Array1<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.outer_iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v -= mean[j];
        }
    }
    out
}

// B = W (PᵀW)⁻¹ Qᵀ
fn regression_coefficients(
    w: &Array2<f64>,
    p: &Array2<f64>,
    q: &Array2<f64>,
) -> Result<Array2<f64>> {
    let k = w.ncols();
    if k == 0 {
        return Ok(Array2::zeros((w.nrows(), q.nrows())));
    }
    let pw = p.t().dot(w);
    let inv = linalg::solve(&pw, &Array2::eye(k)).ok_or(Error::SingularSources {
        condition: f64::INFINITY,
    })?;
    Ok(w.dot(&inv).dot(&q.t()))
}

/// Fit a PLS2 model with up to `n_lv` latent variables by NIPALS.
///
/// Extraction stops early when the X residual is exhausted; the model then
/// carries fewer latent variables than requested. `n_lv = 0` is legal and
/// yields the column-mean predictor.
pub fn fit_nipals(x: &Array2<f64>, y: &Array2<f64>, n_lv: usize) -> Result<PlsModel> {
    let (s, n) = (x.nrows(), x.ncols());
    let r = y.ncols();
    if y.nrows() != s {
        return Err(Error::DimensionMismatch(format!(
            "X has {s} rows, Y has {}",
            y.nrows()
        )));
    }
    if s < 2 {
        return Err(Error::TooFewSamples { rows: s, needed: 2 });
    }
    if n_lv > (s - 1).min(n) {
        return Err(Error::InvalidParam(format!(
            "n_lv {n_lv} above limit {}",
            (s - 1).min(n)
        )));
    }

    let x_mean = x.mean_axis(Axis(0)).unwrap();
    let y_mean = y.mean_axis(Axis(0)).unwrap();
    let mut y_scale = Array1::<f64>::zeros(r);
    for j in 0..r {
        let col = y.column(j);
        let var = col.iter().map(|v| (v - y_mean[j]).powi(2)).sum::<f64>() / (s as f64 - 1.0);
        if var == 0.0 {
            return Err(Error::ZeroVarianceColumn(j));
        }
        y_scale[j] = var.sqrt();
    }

    let mut xc = center(x, &x_mean);
    let mut yc = center(y, &y_mean);
    for mut row in yc.outer_iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v /= y_scale[j];
        }
    }

    let x0_norm: f64 = xc.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut weights = Array2::<f64>::zeros((n, n_lv));
    let mut x_loadings = Array2::<f64>::zeros((n, n_lv));
    let mut y_loadings = Array2::<f64>::zeros((r, n_lv));
    let mut lv_converged = Vec::with_capacity(n_lv);
    let mut extracted = 0usize;

    for _lv in 0..n_lv {
        let x_norm: f64 = xc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if x_norm <= 1e-12 * x0_norm.max(1e-300) {
            break; // X residual exhausted
        }
        // start from the Y column with the largest remaining sum of squares
        let mut u = {
            let mut best = 0usize;
            let mut best_ss = f64::MIN;
            for j in 0..r {
                let ss: f64 = yc.column(j).iter().map(|v| v * v).sum();
                if ss > best_ss {
                    best_ss = ss;
                    best = j;
                }
            }
            yc.column(best).to_owned()
        };
        if u.iter().map(|v| v * v).sum::<f64>() <= 0.0 {
            break; // Y residual exhausted
        }

        let mut w = Array1::<f64>::zeros(n);
        let mut t_prev: Option<Array1<f64>> = None;
        let mut t = Array1::<f64>::zeros(s);
        let mut q = Array1::<f64>::zeros(r);
        let mut converged = false;
        for _it in 0..NIPALS_MAX_ITER {
            w = xc.t().dot(&u);
            let w_norm = w.dot(&w).sqrt();
            if w_norm <= 0.0 {
                break;
            }
            w /= w_norm;
            t = xc.dot(&w);
            let tt = t.dot(&t);
            if tt <= 0.0 {
                break;
            }
            q = yc.t().dot(&t) / tt;
            let qq = q.dot(&q);
            if qq <= 0.0 {
                break;
            }
            u = yc.dot(&q) / qq;
            if let Some(prev) = &t_prev {
                let diff = (&t - prev).iter().map(|v| v * v).sum::<f64>().sqrt();
                let scale = t.dot(&t).sqrt();
                if diff <= NIPALS_TOL * scale.max(1e-300) {
                    converged = true;
                    break;
                }
            }
            t_prev = Some(t.clone());
        }

        let tt = t.dot(&t);
        if tt <= 0.0 {
            break;
        }
        let p = xc.t().dot(&t) / tt;

        // deflate
        for (i, ti) in t.iter().enumerate() {
            for (j, pj) in p.iter().enumerate() {
                xc[[i, j]] -= ti * pj;
            }
            for (j, qj) in q.iter().enumerate() {
                yc[[i, j]] -= ti * qj;
            }
        }

        weights.column_mut(extracted).assign(&w);
        x_loadings.column_mut(extracted).assign(&p);
        y_loadings.column_mut(extracted).assign(&q);
        lv_converged.push(converged);
        extracted += 1;
    }

    let weights = weights.slice(ndarray::s![.., ..extracted]).to_owned();
    let x_loadings = x_loadings.slice(ndarray::s![.., ..extracted]).to_owned();
    let y_loadings = y_loadings.slice(ndarray::s![.., ..extracted]).to_owned();
    let coefficients = regression_coefficients(&weights, &x_loadings, &y_loadings)?;

    Ok(PlsModel {
        n_lv: extracted,
        x_mean,
        y_mean,
        y_scale,
        weights,
        x_loadings,
        y_loadings,
        coefficients,
        lv_converged,
    })
}

/// Cross-validation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvKind {
    LeaveOneOut,
    /// Interleaved folds: row i lands in fold (i + offset) % k.
    VenetianBlinds { k: usize },
}

/// Scheme plus optional seed (used to offset venetian-blind fold
/// assignment).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvScheme {
    pub kind: CvKind,
    pub seed: Option<u64>,
}

impl CvScheme {
    pub fn leave_one_out() -> Self {
        Self {
            kind: CvKind::LeaveOneOut,
            seed: None,
        }
    }

    pub fn venetian_blinds(k: usize) -> Self {
        Self {
            kind: CvKind::VenetianBlinds { k },
            seed: None,
        }
    }

    /// The default for `s` samples: leave-one-out up to 30 rows, 5-fold
    /// venetian blinds beyond.
    pub fn auto(s: usize) -> Self {
        if s <= 30 {
            Self::leave_one_out()
        } else {
            Self::venetian_blinds(5)
        }
    }

    fn folds(&self, s: usize) -> Result<Vec<Vec<usize>>> {
        match self.kind {
            CvKind::LeaveOneOut => Ok((0..s).map(|i| vec![i]).collect()),
            CvKind::VenetianBlinds { k } => {
                if k < 2 || k > s {
                    return Err(Error::InvalidParam(format!(
                        "venetian blinds needs 2 <= k <= {s}, got {k}"
                    )));
                }
                let offset = self.seed.map(|sd| (sd % k as u64) as usize).unwrap_or(0);
                let mut folds = vec![Vec::new(); k];
                for i in 0..s {
                    folds[(i + offset) % k].push(i);
                }
                Ok(folds)
            }
        }
    }
}

/// Per-LV cross-validation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// Pooled RMSECV indexed by latent-variable count (entry 0 = mean
    /// model).
    pub rmsecv: Vec<f64>,
    /// PRESS per (lv, response).
    pub press: Array2<f64>,
    /// Smallest LV count whose RMSECV is within 5% of the global minimum.
    pub selected_lv: usize,
}

/// Cross-validate NIPALS fits for every LV count `0..=lv_max`.
///
/// Every fold refits on the retained rows and predicts the held-out rows;
/// RMSECV pools squared errors over all held-out predictions and responses.
pub fn cross_validate(
    x: &Array2<f64>,
    y: &Array2<f64>,
    scheme: &CvScheme,
    lv_max: usize,
) -> Result<CvReport> {
    let s = x.nrows();
    if y.nrows() != s {
        return Err(Error::DimensionMismatch(format!(
            "X has {s} rows, Y has {}",
            y.nrows()
        )));
    }
    let folds = scheme.folds(s)?;
    let max_fold = folds.iter().map(Vec::len).max().unwrap_or(0);
    let limit = (s.saturating_sub(max_fold + 1)).min(x.ncols());
    if lv_max == 0 || lv_max > limit {
        return Err(Error::FoldTooSmall {
            retained: s - max_fold,
            needed: lv_max + 1,
        });
    }

    let r = y.ncols();
    let jobs: Vec<Vec<usize>> = folds;
    let fold_results: Vec<Result<Array2<f64>>> = par::map_collect(jobs.clone(), |held_out| {
        let retained: Vec<usize> = (0..s).filter(|i| !held_out.contains(i)).collect();
        let x_train = select_rows(x, &retained);
        let y_train = select_rows(y, &retained);
        let x_test = select_rows(x, &held_out);
        let y_test = select_rows(y, &held_out);
        let model = fit_nipals(&x_train, &y_train, lv_max)?;
        // squared errors per (lv, response), summed over this fold's rows
        let mut sq = Array2::<f64>::zeros((lv_max + 1, r));
        for lv in 0..=lv_max {
            let effective = lv.min(model.n_lv());
            let pred = model.predict_with_lv(&x_test, effective)?;
            for (row_pred, row_true) in pred.outer_iter().zip(y_test.outer_iter()) {
                for j in 0..r {
                    let d = row_pred[j] - row_true[j];
                    sq[[lv, j]] += d * d;
                }
            }
        }
        Ok(sq)
    });

    let mut press = Array2::<f64>::zeros((lv_max + 1, r));
    for fr in fold_results {
        press = press + fr?;
    }

    let total_points = (s * r) as f64;
    let rmsecv: Vec<f64> = (0..=lv_max)
        .map(|lv| (press.row(lv).sum() / total_points).sqrt())
        .collect();

    let min = rmsecv.iter().cloned().fold(f64::INFINITY, f64::min);
    let selected_lv = rmsecv
        .iter()
        .position(|&v| v <= min * 1.05)
        .unwrap_or(0);

    Ok(CvReport {
        rmsecv,
        press,
        selected_lv,
    })
}

fn select_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((rows.len(), m.ncols()));
    for (dst, &src) in rows.iter().enumerate() {
        out.row_mut(dst).assign(&m.row(src));
    }
    out
}

/// The calibration quality metrics reported for a model.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Per-response root-mean-square error of calibration.
    pub rmsec: Vec<f64>,
    /// Per-response RMSE of cross-validation at the model's LV count.
    pub rmsecv: Vec<f64>,
    /// Per-response RMSE of prediction on the held-out test set, when one
    /// was supplied.
    pub rmsep: Option<Vec<f64>>,
    /// Per-response calibration R².
    pub r2y: Vec<f64>,
    /// Per-response cross-validated Q².
    pub q2y: Vec<f64>,
    /// Sanity flags (empty test set, Q² above R² band, ...).
    pub flags: Vec<String>,
}

impl MetricsReport {
    /// CSV with one row per response: RMSEC, RMSECV, RMSEP, R2Y, Q2Y.
    pub fn write_csv(&self, names: &[String], path: impl AsRef<Path>) -> Result<()> {
        let r = self.rmsec.len();
        if names.len() != r {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {r} responses",
                names.len()
            )));
        }
        let mut body = String::from("response,rmsec,rmsecv,rmsep,r2y,q2y\n");
        for j in 0..r {
            let rmsep = match &self.rmsep {
                Some(v) => format!("{}", v[j]),
                None => String::new(),
            };
            body.push_str(&format!(
                "{},{},{},{},{},{}\n",
                names[j], self.rmsec[j], self.rmsecv[j], rmsep, self.r2y[j], self.q2y[j]
            ));
        }
        crate::fsutil::write_atomic(path.as_ref(), body.as_bytes())
    }
}

/// Compute RMSEC/RMSECV/RMSEP, R²Y and Q²Y for a fitted model.
///
/// RMSEC and R²Y come from the calibration fit, RMSECV and Q²Y from a fresh
/// cross-validation at the model's LV count, RMSEP from the optional test
/// set (omitted, with a flag, when absent or empty).
pub fn metrics(
    model: &PlsModel,
    x_cal: &Array2<f64>,
    y_cal: &Array2<f64>,
    test: Option<(&Array2<f64>, &Array2<f64>)>,
    scheme: &CvScheme,
) -> Result<MetricsReport> {
    let s = x_cal.nrows();
    let r = y_cal.ncols();
    let mut flags = Vec::new();

    let fitted = model.predict(x_cal)?;
    let mut rmsec = Vec::with_capacity(r);
    let mut r2y = Vec::with_capacity(r);
    let y_mean: Vec<f64> = (0..r)
        .map(|j| y_cal.column(j).sum() / s as f64)
        .collect();
    for j in 0..r {
        let ss_res: f64 = (0..s)
            .map(|i| (y_cal[[i, j]] - fitted[[i, j]]).powi(2))
            .sum();
        let ss_tot: f64 = (0..s).map(|i| (y_cal[[i, j]] - y_mean[j]).powi(2)).sum();
        rmsec.push((ss_res / s as f64).sqrt());
        r2y.push(if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN });
    }

    // cross-validated quantities at the model's LV count
    let lv = model.n_lv().max(1);
    let cv = cross_validate(x_cal, y_cal, scheme, lv)?;
    let at = model.n_lv().min(cv.rmsecv.len() - 1);
    let mut rmsecv = Vec::with_capacity(r);
    let mut q2y = Vec::with_capacity(r);
    for j in 0..r {
        let press = cv.press[[at, j]];
        rmsecv.push((press / s as f64).sqrt());
        let ss_tot: f64 = (0..s).map(|i| (y_cal[[i, j]] - y_mean[j]).powi(2)).sum();
        q2y.push(if ss_tot > 0.0 { 1.0 - press / ss_tot } else { f64::NAN });
    }

    let rmsep = match test {
        Some((x_test, y_test)) if x_test.nrows() > 0 => {
            let pred = model.predict(x_test)?;
            let st = x_test.nrows();
            let mut out = Vec::with_capacity(r);
            for j in 0..r {
                let ss: f64 = (0..st)
                    .map(|i| (y_test[[i, j]] - pred[[i, j]]).powi(2))
                    .sum();
                out.push((ss / st as f64).sqrt());
            }
            Some(out)
        }
        Some(_) | None => {
            flags.push("RMSEP omitted: empty test set".to_string());
            None
        }
    };

    for j in 0..r {
        if q2y[j] > r2y[j] + 0.2 {
            flags.push(format!(
                "response {j}: Q2Y {} above R2Y {} sanity band",
                q2y[j], r2y[j]
            ));
        }
    }

    Ok(MetricsReport {
        rmsec,
        rmsecv,
        rmsep,
        r2y,
        q2y,
        flags,
    })
}
