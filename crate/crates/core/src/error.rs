use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CapabilityError {
    #[error("no triangle quadrature of degree {requested} (max {max})")]
    QuadratureDegree { requested: usize, max: usize },
    #[error("polynomial degree {0} is not supported (expected 1..=4)")]
    PolynomialDegree(usize),
}

/// A state outside the admissible set of the PDE (negative depth, density,
/// pressure, or a non-finite value).
#[derive(Debug, Clone, PartialEq, Error)]
#[error("inadmissible {system} state: {quantity} = {value:e}")]
pub struct StateError {
    pub system: &'static str,
    pub quantity: &'static str,
    pub value: f64,
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh argument: {0}")]
    InvalidArgument(String),
    #[error("mesh topology error: {0}")]
    Topology(String),
    #[error("mesh file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("degenerate cell {cell}: area {area:e}")]
    DegenerateCell { cell: usize, area: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelaxationError {
    #[error("no relaxation root in [{lo}, {hi}]: R(lo) = {r_lo:e}, R(hi) = {r_hi:e}")]
    NoRoot {
        lo: f64,
        hi: f64,
        r_lo: f64,
        r_hi: f64,
    },
    #[error("relaxation residual {residual:e} above tolerance {tol:e} after {iterations} iterations")]
    NotConverged {
        residual: f64,
        tol: f64,
        iterations: usize,
    },
    #[error("quadratic relaxation requires a scalar quadratic entropy")]
    NotQuadratic,
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
    #[error(transparent)]
    Capability(#[from] CapabilityError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("degenerate mass matrix in cell {0}")]
    SingularMass(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("operation not supported: {0}")]
    Unsupported(String),
    #[error("step {step} failed after {retries} retries at t = {time}: {source}")]
    RetriesExhausted {
        step: usize,
        retries: usize,
        time: f64,
        #[source]
        source: Box<SolverError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = SolverError> = std::result::Result<T, E>;
