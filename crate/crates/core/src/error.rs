use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("buffer is empty")]
    EmptyBuffer,

    #[error("sample rate must be positive, got {0}")]
    InvalidSampleRate(f64),

    #[error("band [{lo}, {hi}] Hz is outside the Nyquist range of a {rate} Hz buffer")]
    BandOutOfRange { lo: f64, hi: f64, rate: f64 },

    #[error("segment length {segment} exceeds buffer length {len}")]
    SegmentTooLong { segment: usize, len: usize },

    #[error("rate ratio {from} Hz -> {to} Hz is not an integer factor")]
    NonIntegerRateRatio { from: f64, to: f64 },

    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("symbol on non-data carrier {carrier}")]
    NonDataCarrier { carrier: usize },

    #[error("inverted range: lower {lo} > upper {hi}")]
    InvertedRange { lo: f64, hi: f64 },

    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("integration step {dt} s too coarse for time constant {tau} s (need dt <= tau/20)")]
    StepTooCoarse { dt: f64, tau: f64 },

    #[error("non-finite {name}: {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("duration {duration} s is shorter than the burst period {period} s")]
    DurationTooShort { duration: f64, period: f64 },

    #[error("calibration input is all zero")]
    ZeroCalibration,

    #[error("misaligned signals: cross-correlation peak at lag {lag} instead of 0")]
    Misaligned { lag: i64 },

    #[error("threshold search saw zero errors at threshold {threshold}; budget too small for the BER floor")]
    BudgetTooSmall { threshold: f64 },

    #[error("no results to emit")]
    EmptyResults,

    #[error("at {context}: {source}")]
    Point {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub fn at(self, context: impl Into<String>) -> Self {
        Error::Point {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { name, value })
    }
}
