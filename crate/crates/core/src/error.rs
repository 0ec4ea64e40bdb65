use thiserror::Error;

pub type Result<T> = std::result::Result<T, GhdError>;

#[derive(Debug, Error)]
pub enum GhdError {
    /// Invalid user-supplied parameters (bounds, counts, table shapes).
    #[error("configuration error: {0}")]
    Config(String),

    /// A rigorous precondition of the construction does not hold.
    #[error("assumption violated ({clause}): value {value:.6e} not below bound {bound:.6e}")]
    Assumption {
        clause: String,
        value: f64,
        bound: f64,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("fixed point did not converge after {iters} iterations (last step {last_step:.3e}, ratios {ratios:?})")]
    Convergence {
        iters: usize,
        last_step: f64,
        ratios: Vec<f64>,
    },

    #[error("range error: {0}")]
    Range(String),

    #[error("support escapes the integration window: {0}")]
    Window(String),

    #[error("CFL violated: {courant:.4} > {limit}")]
    Cfl { courant: f64, limit: f64 },

    #[error("diagnostic failure: {0}")]
    Diagnostic(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GhdError {
    pub fn config(msg: impl Into<String>) -> Self {
        GhdError::Config(msg.into())
    }
}
