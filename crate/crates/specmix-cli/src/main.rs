use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use specmix_cli::commands::{
    cmd_calibrate, cmd_design, cmd_identify, cmd_lib_add, cmd_lib_list, cmd_lib_show,
    cmd_quantify, cmd_synth_material, cmd_synth_mix, CalibrateArgs, DesignArgs, LibAddArgs,
    QuantifyArgs, SynthMaterialArgs, SynthMixArgs,
};
use specmix_cli::{CliError, PipelineConfig};

/// Spectral mixture reverse engineering: identify the constituents of an
/// unknown mixture from its spectra and quantify the composition.
#[derive(Parser)]
#[command(name = "specmix", version, about)]
struct Cli {
    /// TOML config file; CLI flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Wavenumber axis as MIN,MAX,STEP (cm^-1).
    #[arg(long, global = true)]
    axis: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manage the reference spectrum library.
    Lib {
        #[command(subcommand)]
        action: LibAction,
    },
    /// Identify the constituents of an unknown mixture from its spectra.
    Identify {
        /// Library directory.
        #[arg(long)]
        library: PathBuf,
        /// Output directory for the report and extracted spectra.
        #[arg(long)]
        out: PathBuf,
        /// Spectrum or spectrum-matrix CSV files (needs at least twice the
        /// ICA block count of rows in total).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Generate a calibration mixture design.
    Design {
        /// Comma-separated component names (2 to 5).
        #[arg(long, value_delimiter = ',')]
        components: Vec<String>,
        /// Per-component bounds NAME=LO:HI (repeatable).
        #[arg(long)]
        bounds: Vec<String>,
        /// lattice, centroid or centroid-aug.
        #[arg(long, default_value = "lattice")]
        kind: String,
        /// Lattice degree (0 = smallest degree meeting the run floor).
        #[arg(long, default_value_t = 0)]
        degree: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a PLS calibration model from a design and matching spectra.
    Calibrate {
        /// Design CSV (from `specmix design`).
        #[arg(long)]
        design: PathBuf,
        /// Spectrum-matrix CSV, one column per design row.
        #[arg(long)]
        spectra: PathBuf,
        /// Output directory for the model and metrics.
        #[arg(long)]
        out: PathBuf,
        /// Fit one model per response instead of one joint model.
        #[arg(long)]
        pls1: bool,
    },
    /// Predict compositions of unknown spectra with a calibrated model.
    Quantify {
        /// Model directory (from `specmix calibrate`).
        #[arg(long)]
        model: PathBuf,
        /// Spectrum-matrix CSV of unknowns.
        #[arg(long)]
        spectra: PathBuf,
        /// Optional reference compositions (design CSV layout) for a
        /// side-by-side comparison.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Clip predictions into [0, 100].
        #[arg(long)]
        clip: bool,
    },
    /// Generate synthetic materials and mixtures.
    Synth {
        #[command(subcommand)]
        action: SynthAction,
    },
}

#[derive(Subcommand)]
enum LibAction {
    /// Ingest a raw material (pure spectrum plus optional dilutions).
    Add {
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "")]
        inci: String,
        #[arg(long, default_value = "")]
        supplier: String,
        /// Spectrum as PCT=FILE, e.g. 100=pure.csv (repeatable; a pure
        /// 100 entry is required).
        #[arg(long = "spectrum", required = true)]
        spectra: Vec<String>,
    },
    /// List entries.
    List {
        #[arg(long)]
        library: PathBuf,
    },
    /// Show one entry in detail.
    Show {
        #[arg(long)]
        library: PathBuf,
        name: String,
    },
}

#[derive(Subcommand)]
enum SynthAction {
    /// Generate a random band-model material (JSON).
    Material {
        /// Number of bands.
        #[arg(long, default_value_t = 6)]
        bands: usize,
        /// Material name (default material-<seed>).
        #[arg(long)]
        name: Option<String>,
        /// Output JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the pure spectrum CSV here.
        #[arg(long)]
        spectrum_out: Option<PathBuf>,
    },
    /// Mix materials into one or many spectra.
    Mix {
        /// Material JSON files, comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        materials: Vec<PathBuf>,
        /// Proportions, comma-separated (one mixture).
        #[arg(long, value_delimiter = ',')]
        composition: Option<Vec<f64>>,
        /// Design CSV (one mixture per row).
        #[arg(long)]
        design: Option<PathBuf>,
        /// Emit this many jittered/diluted variation rows of --composition
        /// (simulates the dilution-series protocol for unknowns).
        #[arg(long, default_value_t = 0)]
        vary: usize,
        /// Relative composition jitter for --vary.
        #[arg(long, default_value_t = 0.25)]
        jitter: f64,
        /// Absolute composition jitter for --vary.
        #[arg(long, default_value_t = 0.02)]
        abs_jitter: f64,
        /// Dilution factor range LO:HI for --vary.
        #[arg(long)]
        dilution_range: Option<String>,
        /// Relative Gaussian noise sigma.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Acquisitions averaged per recorded spectrum.
        #[arg(long, default_value_t = 1)]
        accumulations: usize,
        /// Output spectrum-matrix CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(axis) = &cli.axis {
        let parts: Vec<&str> = axis.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::user(format!(
                "--axis wants MIN,MAX,STEP, got '{axis}'"
            )));
        }
        let parse = |s: &str| -> Result<f64, CliError> {
            s.trim()
                .parse()
                .map_err(|_| CliError::user(format!("bad axis number '{s}'")))
        };
        cfg.axis.min = parse(parts[0])?;
        cfg.axis.max = parse(parts[1])?;
        cfg.axis.step = parse(parts[2])?;
    }
    Ok(cfg)
}

fn parse_spectrum_args(raw: &[String]) -> Result<Vec<(f64, PathBuf)>, CliError> {
    raw.iter()
        .map(|expr| {
            let (pct, file) = expr.split_once('=').ok_or_else(|| {
                CliError::user(format!("bad --spectrum '{expr}' (want PCT=FILE)"))
            })?;
            let pct: f64 = pct
                .trim()
                .parse()
                .map_err(|_| CliError::user(format!("bad dilution in '{expr}'")))?;
            Ok((pct, PathBuf::from(file)))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Lib { action } => match action {
            LibAction::Add {
                library,
                name,
                inci,
                supplier,
                spectra,
            } => {
                let args = LibAddArgs {
                    library,
                    name,
                    inci,
                    supplier,
                    spectra: parse_spectrum_args(&spectra)?,
                };
                println!("{}", cmd_lib_add(&cfg, &args)?);
            }
            LibAction::List { library } => {
                print!("{}", cmd_lib_list(&cfg, &library)?);
            }
            LibAction::Show { library, name } => {
                print!("{}", cmd_lib_show(&cfg, &library, &name)?);
            }
        },
        Command::Identify {
            library,
            out,
            inputs,
        } => {
            let report = cmd_identify(&cfg, &library, &inputs, &out)?;
            println!(
                "{} components (order fallback: {}); report in {}",
                report.optimal_f,
                report.order_fallback,
                out.display()
            );
            for c in &report.components {
                match c.matches.first() {
                    Some(best) => println!(
                        "IC{}: {} (|corr| {:.4}){}",
                        c.index,
                        best.entry,
                        best.correlation.abs(),
                        if c.ambiguous { "  [ambiguous]" } else { "" }
                    ),
                    None => println!("IC{}: unidentified — {}", c.index, c.note),
                }
            }
        }
        Command::Design {
            components,
            bounds,
            kind,
            degree,
            out,
        } => {
            let args = DesignArgs {
                components,
                bounds,
                kind,
                degree,
                out_file: out,
            };
            print!("{}", cmd_design(&args)?);
        }
        Command::Calibrate {
            design,
            spectra,
            out,
            pls1,
        } => {
            let args = CalibrateArgs {
                design,
                spectra,
                out_dir: out.clone(),
                pls1,
            };
            let report = cmd_calibrate(&cfg, &args)?;
            println!(
                "calibrated {} model on {} samples; selected LVs {:?}; model in {}",
                report.mode,
                report.n_samples,
                report.selected_lv,
                out.display()
            );
            for m in &report.metrics {
                println!(
                    "{:<28} RMSEC {:>8.3}  RMSECV {:>8.3}  R2Y {:>7.4}  Q2Y {:>7.4}",
                    m.response, m.rmsec, m.rmsecv, m.r2y, m.q2y
                );
            }
            for flag in &report.flags {
                println!("note: {flag}");
            }
        }
        Command::Quantify {
            model,
            spectra,
            reference,
            out,
            clip,
        } => {
            let args = QuantifyArgs {
                model_dir: model,
                spectra,
                reference,
                out_dir: out,
                clip,
            };
            let report = cmd_quantify(&cfg, &args)?;
            print!("{}", report.to_table());
        }
        Command::Synth { action } => match action {
            SynthAction::Material {
                bands,
                name,
                out,
                spectrum_out,
            } => {
                let args = SynthMaterialArgs {
                    bands,
                    name,
                    out_file: out,
                    spectrum_out,
                };
                println!("{}", cmd_synth_material(&cfg, &args)?);
            }
            SynthAction::Mix {
                materials,
                composition,
                design,
                vary,
                jitter,
                abs_jitter,
                dilution_range,
                noise,
                accumulations,
                out,
            } => {
                let dilution_range = match dilution_range {
                    Some(expr) => {
                        let (lo, hi) = expr.split_once(':').ok_or_else(|| {
                            CliError::user(format!("--dilution-range wants LO:HI, got '{expr}'"))
                        })?;
                        let parse = |s: &str| -> Result<f64, CliError> {
                            s.trim().parse().map_err(|_| {
                                CliError::user(format!("bad dilution bound '{s}'"))
                            })
                        };
                        Some((parse(lo)?, parse(hi)?))
                    }
                    None => None,
                };
                let args = SynthMixArgs {
                    materials,
                    composition,
                    design,
                    vary,
                    jitter,
                    abs_jitter,
                    dilution_range,
                    noise,
                    accumulations,
                    out_file: out,
                };
                println!("{}", cmd_synth_mix(&cfg, &args)?);
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code as u8)
        }
    }
}
