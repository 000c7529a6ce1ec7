use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("certificate failed: {0}")]
    Certificate(String),

    #[error("field carries no derivative data ({0})")]
    MissingDerivative(&'static str),

    #[error("quadrature tolerance not met: {0}")]
    Quadrature(String),

    #[error("extrapolation did not converge: {0}")]
    Convergence(String),

    #[error("singular discrete system: {0}")]
    SingularMatrix(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error(
        "parameter search exhausted: best into margin {best_into_margin:.3e}, \
         best contraction {best_contraction:.3e}"
    )]
    SearchExhausted {
        best_into_margin: f64,
        best_contraction: f64,
    },

    #[error("no convergence after {iterations} iterations (last step {last_step:.3e})")]
    MaxIterations { iterations: usize, last_step: f64 },

    #[error("iterate left the ball at iteration {iteration}: norm {norm:.3e} > R = {r_ball:.3e}")]
    BallEscape {
        iteration: usize,
        norm: f64,
        r_ball: f64,
    },

    #[error("positivity violated at r = {r:.6e}: value {value:.6e}")]
    PositivityViolation { r: f64, value: f64 },

    #[error("lower bound violated at r = {r:.6e}: margin {margin:.6e}")]
    BoundViolation { r: f64, margin: f64 },

    #[error("config error at {path}: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
