use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no measurements for variable `{0}`")]
    NoMeasurements(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` is {actual}, but this metric needs a {expected} variable")]
    KindMismatch {
        variable: String,
        expected: &'static str,
        actual: &'static str,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("non-finite time or value on line(s) {}", format_lines(.0))]
    NonFinite(Vec<u64>),
    #[error("invalid data: {0}")]
    Validation(String),
    #[error("variogram undefined for `{0}`: no subject has two or more observations")]
    VariogramUndefined(String),
    #[error("assignment: {0}")]
    Assignment(String),
    #[error("matrix dimensions differ ({original_rows}x{original_cols} vs {synthetic_rows}x{synthetic_cols}); subsample both sides to the same number of subjects")]
    DimensionMismatch {
        original_rows: usize,
        original_cols: usize,
        synthetic_rows: usize,
        synthetic_cols: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_lines(lines: &[u64]) -> String {
    const SHOWN: usize = 10;
    let mut s = lines
        .iter()
        .take(SHOWN)
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(", ");
    if lines.len() > SHOWN {
        s.push_str(&format!(" (+{} more)", lines.len() - SHOWN));
    }
    s
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
