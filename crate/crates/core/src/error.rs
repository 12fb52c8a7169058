use thiserror::Error;

use crate::lss::ModelIssue;

/// Ranks reported by two-sided reducers: `rank V`, `rank W`, `rank WV`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RankTriple {
    pub v: usize,
    pub w: usize,
    pub wv: usize,
}

impl std::fmt::Display for RankTriple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "rank V = {}, rank W = {}, rank WV = {}", self.v, self.w, self.wv)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("rank deficient: {0}")]
    Rank(String),
    #[error("invalid model: {}", format_issues(.0))]
    InvalidModel(Vec<ModelIssue>),
    #[error("letter {letter} outside the mode alphabet 1..={modes}")]
    LetterOutOfRange { letter: usize, modes: usize },
    #[error("enumeration of {requested} words exceeds the guard of {limit}")]
    SizeGuard { requested: u128, limit: u128 },
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error("signal does not cover the switching sequence: {0}")]
    Coverage(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("two-sided projection rank condition failed ({0})")]
    RankFailure(RankTriple),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_issues(issues: &[ModelIssue]) -> String {
    issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
