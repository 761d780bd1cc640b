use std::fmt;
use std::path::PathBuf;

/// Errors produced by the spectral pipeline.
#[derive(Debug)]
pub enum Error {
    /// Target axis extends beyond the source spectrum's axis.
    AxisOutOfRange {
        requested: (f64, f64),
        available: (f64, f64),
    },
    /// Two operands live on different wavenumber axes.
    AxisMismatch(String),
    /// Spectrum is constant; normalization is undefined.
    DegenerateSpectrum(String),
    /// MSC reference spectrum is constant.
    DegenerateReference,
    /// MSC regression slope is numerically zero; the spectrum is unrelated
    /// to the reference.
    NearZeroSlope(f64),
    /// Library already contains an entry with this name.
    DuplicateName(String),
    /// Library contains no entries.
    EmptyLibrary,
    /// Library manifest could not be parsed.
    ManifestParse { path: PathBuf, detail: String },
    /// Manifest references a spectrum CSV that does not exist.
    MissingSpectrumFile { path: PathBuf },
    /// Covariance has fewer significant eigenvalues than requested
    /// components.
    RankDeficient { requested: usize, available: usize },
    /// Source matrix is numerically rank-deficient; the mixing matrix
    /// cannot be recovered.
    SingularSources { condition: f64 },
    /// Not enough sample rows for the requested block split.
    TooFewSamples { rows: usize, needed: usize },
    /// Mixture bounds leave no feasible composition.
    InfeasibleBounds(String),
    /// Component count outside the supported 2..=5 range.
    UnsupportedQ(usize),
    /// A response column has zero variance and cannot be autoscaled.
    ZeroVarianceColumn(usize),
    /// A cross-validation fold leaves too few training rows.
    FoldTooSmall { retained: usize, needed: usize },
    /// Composition vector is negative or sums above one.
    CompositionInvalid(String),
    /// Axis cannot hold the requested bands at the required spacing.
    AxisTooNarrow { span: f64, needed: f64 },
    /// Matrix dimensions do not line up.
    DimensionMismatch(String),
    /// Invalid argument outside any more specific category.
    InvalidParam(String),
    /// Filesystem failure.
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed CSV or numeric field.
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::AxisOutOfRange {
                requested,
                available,
            } => write!(
                f,
                "target axis [{}, {}] extends beyond source axis [{}, {}]",
                requested.0, requested.1, available.0, available.1
            ),
            Error::AxisMismatch(detail) => write!(f, "wavenumber axes differ: {detail}"),
            Error::DegenerateSpectrum(label) => {
                write!(f, "spectrum '{label}' is constant; cannot normalize")
            }
            Error::DegenerateReference => write!(f, "MSC reference spectrum is constant"),
            Error::NearZeroSlope(a) => write!(
                f,
                "MSC regression slope {a:e} is numerically zero; spectrum unrelated to reference"
            ),
            Error::DuplicateName(name) => write!(f, "library already contains entry '{name}'"),
            Error::EmptyLibrary => write!(f, "library contains no entries"),
            Error::ManifestParse { path, detail } => {
                write!(f, "cannot parse manifest {}: {detail}", path.display())
            }
            Error::MissingSpectrumFile { path } => {
                write!(f, "manifest references missing spectrum file {}", path.display())
            }
            Error::RankDeficient {
                requested,
                available,
            } => write!(
                f,
                "requested {requested} components but data has only {available} significant directions"
            ),
            Error::SingularSources { condition } => write!(
                f,
                "source matrix is numerically singular (condition {condition:e})"
            ),
            Error::TooFewSamples { rows, needed } => {
                write!(f, "have {rows} sample rows, need at least {needed}")
            }
            Error::InfeasibleBounds(detail) => {
                write!(f, "infeasible mixture bounds: {detail}")
            }
            Error::UnsupportedQ(q) => {
                write!(f, "unsupported component count {q} (expected 2..=5)")
            }
            Error::ZeroVarianceColumn(idx) => {
                write!(f, "response column {idx} has zero variance")
            }
            Error::FoldTooSmall { retained, needed } => write!(
                f,
                "cross-validation fold retains {retained} rows, need at least {needed}"
            ),
            Error::CompositionInvalid(detail) => write!(f, "invalid composition: {detail}"),
            Error::AxisTooNarrow { span, needed } => write!(
                f,
                "axis span {span} cm^-1 too narrow; band layout needs {needed} cm^-1"
            ),
            Error::DimensionMismatch(detail) => write!(f, "dimension mismatch: {detail}"),
            Error::InvalidParam(detail) => write!(f, "invalid parameter: {detail}"),
            Error::Io { path, source } => {
                write!(f, "I/O error on {}: {source}", path.display())
            }
            Error::Parse { path, line, detail } => {
                write!(f, "parse error in {} line {line}: {detail}", path.display())
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
