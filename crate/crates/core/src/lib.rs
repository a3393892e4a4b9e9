//! Lower bounds on the cp-rank and the nonnegative rank via sparse moment
//! relaxations.
//!
//! The crate builds truncated moment relaxations of a generalized moment
//! problem whose support constraints carry a monomial ideal ("ideal
//! sparsity"), lowers them to semidefinite programs, and solves those with an
//! embedded homogeneous self-dual interior-point method.  On top of that sit
//! the two applications: completely-positive rank (`cprank`) and nonnegative
//! matrix-factorization rank (`nnrank`), together with flatness checks and
//! atom extraction (`certify`) and the instance corpus (`instances`).

pub mod certify;
pub mod conic;
pub mod cprank;
pub mod graph;
pub mod instances;
pub mod momrelax;
pub mod nnrank;
pub mod polybasis;

pub use certify::{Atom, AtomicMeasure, BlockFlatness, FlatnessReport};
pub use conic::{ConicProgram, ConicSolution, LinExpr, Sense, SolveOptions, Status, VarRef};
pub use cprank::{BoundResult, CpBoundRequest, CpInstance, CpMode, ProgramStats, Strength};
pub use graph::{BipartiteGraph, CliqueList, Graph};
pub use momrelax::{GmpSpec, MatrixScope, MomentTable, PseudoMoment, RelaxationLayout};
pub use nnrank::{NnBoundRequest, NnInstance, NnMode};
pub use polybasis::{Exponent, MonomialBasis, PolyMatrix, Polynomial};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not symmetric: max |A - A^T| = {0:.3e}")]
    AsymmetricMatrix(f64),
    #[error("relaxation level t = {t} too small: requires 2t >= {needed}")]
    LevelTooSmall { t: usize, needed: usize },
    #[error("equality {index} has empty support under the clique cover but rhs = {rhs:.6e}")]
    InfeasibleBySupport { index: usize, rhs: f64 },
    #[error("clique list is empty")]
    EmptyCliqueList,
    #[error("edge {{{0}, {1}}} is covered by no clique")]
    UncoveredEdge(usize, usize),
    #[error("unknown builtin instance `{0}`")]
    UnknownBuiltin(String),
    #[error("invalid generator config: {0}")]
    BadGeneratorConfig(String),
    #[error("could not sample a connected support graph in {0} attempts")]
    DisconnectedSupport(usize),
    #[error("atom extraction failed: {0}")]
    ExtractionFailed(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("solver returned status `{0}` where an optimum was required")]
    SolverStatus(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
