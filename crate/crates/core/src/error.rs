use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("duplicate edge ({0}, {1}) in explicit edge list")]
    DuplicateEdge(usize, usize),

    #[error("site {0} has no containing region")]
    UnassignedSite(usize),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid value {value} for {name}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("count must be non-negative, got {0}")]
    NegativeCount(i64),

    #[error("NaN encountered while evaluating {0}")]
    NotANumber(String),

    #[error("chain state has non-finite log posterior: {0}")]
    NonFiniteState(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}", render_issues(.0))]
    Data(Vec<DataIssue>),

    #[error("scenario {scenario} failed: {message}")]
    ScenarioFailed { scenario: usize, message: String },

    #[error("refusing to pool {failed} failed scenario(s) without allow_partial")]
    IncompletePool { failed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            value,
            reason,
        }
    }

    pub(crate) fn data(file: impl Into<PathBuf>, line: usize, rule: impl Into<String>) -> Self {
        Error::Data(vec![DataIssue::new(file, line, rule)])
    }
}

/// One rule violation in an input file. `line` is 1-based and counts the
/// header; 0 marks a whole-file problem such as a missing site id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataIssue {
    pub file: PathBuf,
    pub line: usize,
    pub rule: String,
}

impl DataIssue {
    pub fn new(file: impl Into<PathBuf>, line: usize, rule: impl Into<String>) -> Self {
        Self {
            file: file.into(),
            line,
            rule: rule.into(),
        }
    }
}

impl std::fmt::Display for DataIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line == 0 {
            write!(f, "{}: {}", self.file.display(), self.rule)
        } else {
            write!(f, "{}:{}: {}", self.file.display(), self.line, self.rule)
        }
    }
}

fn render_issues(issues: &[DataIssue]) -> String {
    let mut out = format!("{} data error(s)", issues.len());
    for issue in issues {
        out.push_str("\n  ");
        out.push_str(&issue.to_string());
    }
    out
}
