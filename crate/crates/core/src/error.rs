use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kinematics: {0}")]
    InvalidKinematics(String),

    #[error("Langevin inversion failed to converge for b = {b:e} T after {iterations} iterations")]
    LangevinSolve { b: f64, iterations: usize },

    #[error("non-finite value in energy derivatives")]
    EvaluationFailure,

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("singular cell Jacobian in cell {cell}")]
    InvalidMesh { cell: usize },

    #[error("element inversion in cell {cell} (det F = {det_f:e})")]
    ElementInversion { cell: usize, det_f: f64 },

    #[error("constraint conflict on dof {dof}: {detail}")]
    ConstraintConflict { dof: usize, detail: String },

    #[error("cyclic constraint chain through dof {0}")]
    CyclicConstraint(usize),

    #[error("constraint selection: {0}")]
    Selection(String),

    #[error("singular linear system: {detail}; check the anchor and gauge constraints for an unconstrained null mode")]
    SingularSystem { detail: String },

    #[error("iterative solver stagnated after {iterations} iterations (relative residual {residual:e}); the direct backend is the fallback")]
    IterativeStagnation { iterations: usize, residual: f64 },

    #[error("load step failed at t = {t} after {halvings} step halvings")]
    StepFailure { t: f64, halvings: usize },

    #[error("stress relaxation did not converge after {iterations} outer iterations (normalized stress {residual:e})")]
    RelaxationFailure { iterations: usize, residual: f64 },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
