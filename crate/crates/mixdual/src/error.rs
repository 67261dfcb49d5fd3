//! Error type shared across the crate.

use std::fmt;

/// Errors raised by grid construction, expression handling, solvers and
/// the duality checkers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid argument domain (grid bounds, node counts, weights, ...).
    Domain(String),
    /// Vector length does not match the grid it is paired with.
    LengthMismatch { expected: usize, got: usize },
    /// Two trajectories live on different grids or have different widths.
    GridMismatch(String),
    /// Expression text failed to parse; `pos` is a byte offset into the input.
    Syntax { pos: usize, msg: String },
    /// Identifier in an expression is not `t`, `x<i>`, `xd<i>`, `xdd<i>` or a function name.
    UnknownIdentifier(String),
    /// Variable index `idx` is outside the declared state dimension `n`.
    IndexOutOfRange { idx: usize, n: usize },
    /// Runtime evaluation failure (sqrt of negative, division by zero).
    Eval(String),
    /// Matrix passed where a square matrix is required.
    NonSquare { rows: usize, cols: usize },
    /// Partition does not cover {1..m} disjointly, or index out of range.
    InvalidPartition(String),
    /// Operation requires natural boundary conditions.
    WrongBoundaryKind(String),
    /// Static specialization requested but expressions reference t, xd or xdd.
    NotStatic(String),
    /// Weak-duality check given a primal or dual point that fails feasibility.
    InfeasibleInput(String),
    /// Solver hit the iteration cap without converging.
    MaxIterExceeded { outer: usize, inner: usize },
    /// Solver could not reduce constraint violation from the start point.
    InfeasibleStart(String),
    /// Multiplier recovery left a stationarity residual above tolerance.
    RecoveryFailed { residual: f64, tol: f64 },
    /// Recovery precondition: the point failed the efficiency certificate.
    NotEfficient(String),
    /// Configuration (CLI flags / config file / problem file) is invalid.
    Config(String),
    /// Filesystem propagation for the experiment driver.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            Error::GridMismatch(m) => write!(f, "grid mismatch: {m}"),
            Error::Syntax { pos, msg } => write!(f, "syntax error at byte {pos}: {msg}"),
            Error::UnknownIdentifier(id) => write!(f, "unknown identifier `{id}`"),
            Error::IndexOutOfRange { idx, n } => {
                write!(f, "variable index {idx} out of range for n = {n}")
            }
            Error::Eval(m) => write!(f, "evaluation error: {m}"),
            Error::NonSquare { rows, cols } => write!(f, "matrix is not square: {rows}x{cols}"),
            Error::InvalidPartition(m) => write!(f, "invalid partition: {m}"),
            Error::WrongBoundaryKind(m) => write!(f, "wrong boundary kind: {m}"),
            Error::NotStatic(m) => write!(f, "not a static problem: {m}"),
            Error::InfeasibleInput(m) => write!(f, "infeasible input: {m}"),
            Error::MaxIterExceeded { outer, inner } => {
                write!(f, "iteration limit exceeded (outer {outer}, inner {inner})")
            }
            Error::InfeasibleStart(m) => write!(f, "infeasible start: {m}"),
            Error::RecoveryFailed { residual, tol } => {
                write!(f, "recovery failed: residual {residual:.3e} above tol {tol:.3e}")
            }
            Error::NotEfficient(m) => write!(f, "point is not efficient: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
