//! `design`: generate a calibration mixture design meeting the run-count
//! floor for its component count.

use std::path::PathBuf;

use specmix::design::{minimum_runs, DesignKind, DesignSpec};

use crate::CliError;

pub struct DesignArgs {
    pub components: Vec<String>,
    /// NAME=LO:HI bound expressions.
    pub bounds: Vec<String>,
    /// "lattice", "centroid" or "centroid-aug".
    pub kind: String,
    /// Lattice degree; 0 picks the smallest degree meeting the run floor.
    pub degree: usize,
    pub out_file: PathBuf,
}

fn parse_bounds(
    components: &[String],
    exprs: &[String],
) -> Result<Option<Vec<(f64, f64)>>, CliError> {
    if exprs.is_empty() {
        return Ok(None);
    }
    let mut bounds = vec![(0.0, 1.0); components.len()];
    for expr in exprs {
        let (name, range) = expr
            .split_once('=')
            .ok_or_else(|| CliError::user(format!("bad bound '{expr}' (want NAME=LO:HI)")))?;
        let (lo, hi) = range
            .split_once(':')
            .ok_or_else(|| CliError::user(format!("bad bound '{expr}' (want NAME=LO:HI)")))?;
        let idx = components
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::user(format!("bound for unknown component '{name}'")))?;
        let lo: f64 = lo
            .parse()
            .map_err(|_| CliError::user(format!("bad lower bound in '{expr}'")))?;
        let hi: f64 = hi
            .parse()
            .map_err(|_| CliError::user(format!("bad upper bound in '{expr}'")))?;
        bounds[idx] = (lo, hi);
    }
    Ok(Some(bounds))
}

// smallest lattice degree whose point count reaches the run floor
fn auto_degree(q: usize) -> Result<usize, CliError> {
    let floor = minimum_runs(q)?;
    let mut m = 1usize;
    loop {
        let mut count = 1usize;
        for i in 0..m {
            count = count * (q + m - 1 - i) / (i + 1);
        }
        if count >= floor {
            return Ok(m);
        }
        m += 1;
    }
}

pub fn cmd_design(args: &DesignArgs) -> Result<String, CliError> {
    let q = args.components.len();
    if !(2..=5).contains(&q) {
        return Err(CliError::user(format!(
            "design supports 2 to 5 components, got {q}"
        )));
    }
    let kind = match args.kind.as_str() {
        "lattice" => {
            let degree = if args.degree == 0 {
                auto_degree(q)?
            } else {
                args.degree
            };
            DesignKind::Lattice(degree)
        }
        "centroid" => DesignKind::Centroid,
        "centroid-aug" => DesignKind::CentroidAugmented,
        other => {
            return Err(CliError::user(format!(
                "unknown design kind '{other}' (want lattice, centroid or centroid-aug)"
            )))
        }
    };
    let spec = DesignSpec {
        components: args.components.clone(),
        kind,
        bounds: parse_bounds(&args.components, &args.bounds)?,
    };
    let (design, rejected) = spec.build()?;
    design.write_csv(&args.out_file)?;

    let mut summary = format!(
        "wrote {} mixtures x {} components to {} (floor {})\n",
        design.n_points(),
        q,
        args.out_file.display(),
        minimum_runs(q)?
    );
    for r in &rejected {
        summary.push_str(&format!(
            "rejected design point {}: {}\n",
            r.index, r.violation
        ));
    }
    Ok(summary)
}
