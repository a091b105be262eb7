use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point coincides with a focus of the elliptic system")]
    AtFocus,
    #[error("point coincides with a dyon center{}", index_suffix(*.index))]
    AtCenter { index: Option<usize> },
    #[error("point lies on a Dirac string{}", index_suffix(*.index))]
    OnString { index: Option<usize> },
    #[error("coordinate map is singular at this point (on the symmetry axis)")]
    SingularJacobian,
    #[error("elliptic boundary (xi = 1 or |eta| = 1) with nonvanishing centrifugal numerator")]
    BoundaryDegenerate,
    #[error("parabolic form undefined at the origin")]
    AtOrigin,
    #[error("outside metric domain: {0}")]
    DomainError(String),
    #[error("quantity not defined for this family: {0}")]
    FamilyMismatch(String),
    #[error("invalid system specification: {0}")]
    InvalidSpec(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("collision with dyon {index}")]
    Collision { index: usize },
    #[error("radicand is negative on the whole search interval")]
    NoLibration,
    #[error("libration interval has zero length")]
    DegenerateInterval,
    #[error("branch tracking failed: {0}")]
    BranchTrackingFailure(String),
    #[error("no string assignment avoids the point (it coincides with dyon {index})")]
    Unpatchable { index: usize },
}

fn index_suffix(index: Option<usize>) -> String {
    match index {
        Some(i) => format!(" (dyon {i})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn with_index(self, i: usize) -> Self {
        match self {
            Error::AtCenter { .. } => Error::AtCenter { index: Some(i) },
            Error::OnString { .. } => Error::OnString { index: Some(i) },
            other => other,
        }
    }
}
