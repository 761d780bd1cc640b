//! Scheffé simplex mixture designs.
//!
//! Designs are sets of composition points (proportions summing to 1) used as
//! calibration mixtures. Lattice and centroid generators are exact and
//! deterministic; lower bounds enter through the pseudo-component transform
//! and upper bounds by row rejection.

use std::path::Path;

use ndarray::Array2;

use crate::{Error, Result};

/// A set of mixture compositions over named components.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDesign {
    components: Vec<String>,
    points: Array2<f64>,
    bounds: Vec<(f64, f64)>,
}

impl MixtureDesign {
    /// Build a design, enforcing the row-sum, bound and uniqueness
    /// invariants.
    pub fn new(
        components: Vec<String>,
        points: Array2<f64>,
        bounds: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let q = components.len();
        if q < 2 {
            return Err(Error::InvalidParam(
                "a mixture needs at least 2 components".into(),
            ));
        }
        if points.ncols() != q {
            return Err(Error::DimensionMismatch(format!(
                "{} columns for {q} components",
                points.ncols()
            )));
        }
        if bounds.len() != q {
            return Err(Error::DimensionMismatch(format!(
                "{} bounds for {q} components",
                bounds.len()
            )));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
                return Err(Error::InvalidParam(format!(
                    "bounds for component {i} must satisfy 0 <= lower < upper <= 1, got ({lo}, {hi})"
                )));
            }
        }
        for (r, row) in points.outer_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParam(format!(
                    "design row {r} sums to {sum}, not 1"
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                let (lo, hi) = bounds[c];
                if v < lo - 1e-9 || v > hi + 1e-9 {
                    return Err(Error::InvalidParam(format!(
                        "design row {r} component {c} = {v} outside [{lo}, {hi}]"
                    )));
                }
            }
        }
        for i in 0..points.nrows() {
            for j in (i + 1)..points.nrows() {
                let dup = points
                    .row(i)
                    .iter()
                    .zip(points.row(j).iter())
                    .all(|(a, b)| (a - b).abs() <= 1e-9);
                if dup {
                    return Err(Error::InvalidParam(format!(
                        "design rows {i} and {j} duplicate"
                    )));
                }
            }
        }
        Ok(Self {
            components,
            points,
            bounds,
        })
    }

    pub fn components(&self) -> &[String] {
        &self.components
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn n_points(&self) -> usize {
        self.points.nrows()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Write as CSV: `#bounds:` comment lines, then a header of component
    /// names and one row per mixture point.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut body = String::new();
        for (name, (lo, hi)) in self.components.iter().zip(self.bounds.iter()) {
            body.push_str(&format!("#bounds: {name},{lo},{hi}\n"));
        }
        body.push_str(&self.components.join(","));
        body.push('\n');
        for row in self.points.outer_iter() {
            let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            body.push_str(&fields.join(","));
            body.push('\n');
        }
        crate::fsutil::write_atomic(path.as_ref(), body.as_bytes())
    }

    /// Read a design written by [`MixtureDesign::write_csv`]. Missing
    /// `#bounds:` lines default to (0, 1).
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut bound_lines = Vec::new();
        let mut header: Option<Vec<String>> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("#bounds:") {
                let fields: Vec<&str> = rest.split(',').map(str::trim).collect();
                if fields.len() != 3 {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: line_no,
                        detail: "expected '#bounds: name,lower,upper'".into(),
                    });
                }
                let lo: f64 = fields[1].parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    detail: format!("bad lower bound '{}'", fields[1]),
                })?;
                let hi: f64 = fields[2].parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    detail: format!("bad upper bound '{}'", fields[2]),
                })?;
                bound_lines.push((fields[0].to_string(), lo, hi));
                continue;
            }
            if trimmed.starts_with('#') {
                continue;
            }
            match &header {
                None => {
                    header = Some(trimmed.split(',').map(|s| s.trim().to_string()).collect());
                }
                Some(names) => {
                    let fields: Vec<&str> = trimmed.split(',').collect();
                    if fields.len() != names.len() {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            line: line_no,
                            detail: format!(
                                "expected {} fields, got {}",
                                names.len(),
                                fields.len()
                            ),
                        });
                    }
                    let mut row = Vec::with_capacity(fields.len());
                    for f in fields {
                        row.push(f.trim().parse::<f64>().map_err(|_| Error::Parse {
                            path: path.to_path_buf(),
                            line: line_no,
                            detail: format!("not a number: '{f}'"),
                        })?);
                    }
                    rows.push(row);
                }
            }
        }
        let components = header.ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            detail: "missing header row".into(),
        })?;
        let q = components.len();
        let mut bounds = vec![(0.0, 1.0); q];
        for (name, lo, hi) in bound_lines {
            match components.iter().position(|c| c == &name) {
                Some(i) => bounds[i] = (lo, hi),
                None => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: 0,
                        detail: format!("bounds for unknown component '{name}'"),
                    })
                }
            }
        }
        let mut points = Array2::<f64>::zeros((rows.len(), q));
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                points[[r, c]] = v;
            }
        }
        Self::new(components, points, bounds)
    }
}

/// Design family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    /// Simplex lattice of the given degree.
    Lattice(usize),
    /// All nonempty subset centroids.
    Centroid,
    /// Subset centroids plus axial points.
    CentroidAugmented,
}

/// A design request: component count, family and optional bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub components: Vec<String>,
    pub kind: DesignKind,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl DesignSpec {
    /// Generate the design, grow it to the minimum run count for its
    /// component count, and apply bounds. Returns the design and any rows
    /// rejected by upper bounds.
    pub fn build(&self) -> Result<(MixtureDesign, Vec<RejectedPoint>)> {
        let q = self.components.len();
        let base = match self.kind {
            DesignKind::Lattice(m) => simplex_lattice(q, m)?,
            DesignKind::Centroid => simplex_centroid(q)?,
            DesignKind::CentroidAugmented => {
                let c = simplex_centroid(q)?;
                augment_axial(&c, 0.5)?
            }
        };
        let named = MixtureDesign::new(
            self.components.clone(),
            base.points.clone(),
            base.bounds.clone(),
        )?;
        let grown = meet_minimum_runs(&named)?;
        match &self.bounds {
            Some(b) => apply_bounds(&grown, b),
            None => Ok((grown, Vec::new())),
        }
    }
}

fn generic_names(q: usize) -> Vec<String> {
    (0..q).map(|i| format!("c{}", i + 1)).collect()
}

fn unit_bounds(q: usize) -> Vec<(f64, f64)> {
    vec![(0.0, 1.0); q]
}

/// All compositions with coordinates in `{0, 1/m, ..., 1}` summing to 1.
///
/// The point count is `C(q + m - 1, m)`.
pub fn simplex_lattice(q: usize, m: usize) -> Result<MixtureDesign> {
    if q < 2 {
        return Err(Error::InvalidParam("lattice needs q >= 2".into()));
    }
    if m < 1 {
        return Err(Error::InvalidParam("lattice degree must be >= 1".into()));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut current = vec![0usize; q];
    enumerate_compositions(m, 0, &mut current, &mut rows, m);
    let mut points = Array2::<f64>::zeros((rows.len(), q));
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            points[[r, c]] = v;
        }
    }
    MixtureDesign::new(generic_names(q), points, unit_bounds(q))
}

// Enumerate all ways to place `remaining` lattice units into slots from
// `slot` on; appends each complete assignment as proportions.
fn enumerate_compositions(
    remaining: usize,
    slot: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<f64>>,
    m: usize,
) {
    let q = current.len();
    if slot == q - 1 {
        current[slot] = remaining;
        out.push(current.iter().map(|&k| k as f64 / m as f64).collect());
        return;
    }
    for k in (0..=remaining).rev() {
        current[slot] = k;
        enumerate_compositions(remaining - k, slot + 1, current, out, m);
    }
}

/// All `2^q - 1` nonempty-subset centroids (equal parts over each subset).
pub fn simplex_centroid(q: usize) -> Result<MixtureDesign> {
    if !(2..=12).contains(&q) {
        return Err(Error::InvalidParam(format!(
            "centroid design supports q in 2..=12, got {q}"
        )));
    }
    let total = (1usize << q) - 1;
    let mut points = Array2::<f64>::zeros((total, q));
    let mut r = 0usize;
    // size-major, then lexicographic within a size
    for size in 1..=q {
        for mask in 1u32..(1u32 << q) {
            if mask.count_ones() as usize != size {
                continue;
            }
            for c in 0..q {
                if mask & (1 << c) != 0 {
                    points[[r, c]] = 1.0 / size as f64;
                }
            }
            r += 1;
        }
    }
    MixtureDesign::new(generic_names(q), points, unit_bounds(q))
}

/// One rejected composition with the bound it violated.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedPoint {
    pub index: usize,
    pub point: Vec<f64>,
    pub violation: String,
}

/// Pseudo-component transform plus upper-bound screening.
///
/// Each point `z` of the unconstrained design maps to
/// `x = lower + (1 - Σ lower) * z`; rows that then violate an upper bound
/// are dropped and reported.
pub fn apply_bounds(
    design: &MixtureDesign,
    bounds: &[(f64, f64)],
) -> Result<(MixtureDesign, Vec<RejectedPoint>)> {
    let q = design.n_components();
    if bounds.len() != q {
        return Err(Error::DimensionMismatch(format!(
            "{} bounds for {q} components",
            bounds.len()
        )));
    }
    let lower_sum: f64 = bounds.iter().map(|b| b.0).sum();
    let upper_sum: f64 = bounds.iter().map(|b| b.1).sum();
    if lower_sum >= 1.0 {
        return Err(Error::InfeasibleBounds(format!(
            "sum of lower bounds {lower_sum} >= 1"
        )));
    }
    if upper_sum <= 1.0 {
        return Err(Error::InfeasibleBounds(format!(
            "sum of upper bounds {upper_sum} <= 1"
        )));
    }

    let slack = 1.0 - lower_sum;
    let mut kept: Vec<Vec<f64>> = Vec::new();
    let mut rejected = Vec::new();
    'rows: for (r, row) in design.points.outer_iter().enumerate() {
        let mapped: Vec<f64> = row
            .iter()
            .zip(bounds.iter())
            .map(|(&z, &(lo, _))| lo + slack * z)
            .collect();
        for (c, (&v, &(_, hi))) in mapped.iter().zip(bounds.iter()).enumerate() {
            if v > hi + 1e-12 {
                rejected.push(RejectedPoint {
                    index: r,
                    point: mapped.clone(),
                    violation: format!(
                        "component {} = {v} above upper bound {hi}",
                        design.components[c]
                    ),
                });
                continue 'rows;
            }
        }
        kept.push(mapped);
    }
    if kept.is_empty() {
        return Err(Error::InfeasibleBounds(
            "upper bounds rejected every design point".into(),
        ));
    }
    let mut points = Array2::<f64>::zeros((kept.len(), q));
    for (r, row) in kept.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            points[[r, c]] = v;
        }
    }
    let design = MixtureDesign::new(design.components.clone(), points, bounds.to_vec())?;
    Ok((design, rejected))
}

/// The minimum number of calibration mixtures for `q` components.
///
/// 3, 4 and 5 components require 10, 18 and 30 mixtures; two-component
/// mixtures use a floor of 6 by this crate's convention.
pub fn minimum_runs(q: usize) -> Result<usize> {
    match q {
        2 => Ok(6),
        3 => Ok(10),
        4 => Ok(18),
        5 => Ok(30),
        other => Err(Error::UnsupportedQ(other)),
    }
}

/// Append axial points at fraction `t` of the way from the overall centroid
/// toward each vertex (t = 0.5 is midway). Already-present points are not
/// duplicated.
pub fn augment_axial(design: &MixtureDesign, t: f64) -> Result<MixtureDesign> {
    let q = design.n_components();
    let centroid = 1.0 / q as f64;
    let mut rows: Vec<Vec<f64>> = design
        .points
        .outer_iter()
        .map(|r| r.to_vec())
        .collect();
    for vertex in 0..q {
        let mut point = vec![centroid * (1.0 - t); q];
        point[vertex] = centroid + t * (1.0 - centroid);
        let exists = rows.iter().any(|row| {
            row.iter()
                .zip(point.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-9)
        });
        if !exists {
            rows.push(point);
        }
    }
    let mut points = Array2::<f64>::zeros((rows.len(), q));
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            points[[r, c]] = v;
        }
    }
    MixtureDesign::new(design.components.clone(), points, design.bounds.clone())
}

/// Grow a design with axial shells (t = 1/2, 1/4, 3/4, 1/8, ...) until it
/// reaches [`minimum_runs`] for its component count.
pub fn meet_minimum_runs(design: &MixtureDesign) -> Result<MixtureDesign> {
    let floor = minimum_runs(design.n_components())?;
    let mut grown = design.clone();
    let shells = [0.5, 0.25, 0.75, 0.125, 0.375, 0.625, 0.875];
    let mut shell = 0usize;
    while grown.n_points() < floor {
        if shell >= shells.len() {
            return Err(Error::InvalidParam(format!(
                "cannot grow design to {floor} runs by axial augmentation"
            )));
        }
        grown = augment_axial(&grown, shells[shell])?;
        shell += 1;
    }
    Ok(grown)
}
