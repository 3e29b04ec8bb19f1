use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not Hermitian (relative deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("rate generator is singular or reducible: {0}")]
    SingularGenerator(String),

    #[error("contrast undefined: PL without RF is zero")]
    UndefinedContrast,

    #[error("steady-state solve failed for defect class {class} (offset {offset_ghz:.4} GHz): {source}")]
    DefectClass {
        class: usize,
        offset_ghz: f64,
        #[source]
        source: Box<SimError>,
    },

    #[error("spectrum too coarse: grid spacing {spacing_mhz:.4} MHz exceeds peak FWHM/5 = {limit_mhz:.4} MHz; refine the RF sweep step")]
    SpectrumTooCoarse { spacing_mhz: f64, limit_mhz: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("sample rate mismatch: {0}")]
    RateMismatch(String),

    #[error("scenario error at `{key}`: {message}")]
    Schema { key: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data: {0}")]
    Format(String),
}

impl SimError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        SimError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn schema(key: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Schema {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
