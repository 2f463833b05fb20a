use thiserror::Error;

/// Which side of the observation matrix an index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Node,
    Source,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::Node => f.write_str("node"),
            Axis::Source => f.write_str("source"),
        }
    }
}

/// Coarse classification used by the CLI and the C API to pick exit/error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum GardeError {
    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid observation at node {node}, source {source_id}: {value}")]
    InvalidObservation { node: usize, source_id: usize, value: f64 },

    #[error("non-finite coordinate ({x}, {y})")]
    NonFinitePoint { x: f64, y: f64 },

    #[error("{axis} {index} has {count} valid observations, at least {required} required")]
    UnderObserved {
        axis: Axis,
        index: usize,
        count: usize,
        required: usize,
    },

    #[error("nodes {0} and {1} share no valid source")]
    NoSharedSource(usize, usize),

    #[error("degenerate point set: {0}")]
    Degenerate(String),

    #[error("singular anchor configuration (reciprocal condition {rcond:e})")]
    SingularConfiguration { rcond: f64 },

    #[error("{axis} {index}: {inner}")]
    AtIndex {
        axis: Axis,
        index: usize,
        #[source]
        inner: Box<GardeError>,
    },

    #[error("pass {pass}: {inner}")]
    AtPass {
        pass: usize,
        #[source]
        inner: Box<GardeError>,
    },

    #[error("stage {stage}: {inner}")]
    Stage {
        stage: &'static str,
        #[source]
        inner: Box<GardeError>,
    },

    #[error("node at ({x}, {y}) coincides with the evaluated position")]
    Coincident { x: f64, y: f64 },

    #[error("singular Fisher information (det {det:e})")]
    SingularInformation { det: f64 },

    #[error("scenario infeasible: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl GardeError {
    pub(crate) fn at(self, axis: Axis, index: usize) -> Self {
        GardeError::AtIndex {
            axis,
            index,
            inner: Box::new(self),
        }
    }

    pub(crate) fn at_pass(self, pass: usize) -> Self {
        GardeError::AtPass {
            pass,
            inner: Box::new(self),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        GardeError::Stage {
            stage,
            inner: Box::new(self),
        }
    }

    /// Innermost error with all location wrappers stripped.
    pub fn root(&self) -> &GardeError {
        match self {
            GardeError::AtIndex { inner, .. }
            | GardeError::AtPass { inner, .. }
            | GardeError::Stage { inner, .. } => inner.root(),
            other => other,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            GardeError::Degenerate(_)
            | GardeError::SingularConfiguration { .. }
            | GardeError::Coincident { .. }
            | GardeError::SingularInformation { .. } => ErrorClass::Numerical,
            GardeError::Config(_) => ErrorClass::Usage,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = GardeError> = std::result::Result<T, E>;
