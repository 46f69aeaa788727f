use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A thermodynamic state or parameter set outside the EOS domain.
    #[error("EOS domain error: {0}")]
    Domain(String),

    #[error("Riemann problem generates vacuum (pressure function has no positive root)")]
    Vacuum,

    #[error("{what} did not converge within {iterations} iterations")]
    Convergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("collision budget of {budget} events exhausted at t = {time}")]
    CollisionCascade { budget: u64, time: f64 },

    #[error("covariance matrix is not positive definite after jitter")]
    Factorization,

    #[error("positivity lost in cell {cell}: {detail}")]
    Positivity { cell: usize, detail: String },

    #[error("no admissible pressure equilibrium in cell {cell}")]
    NoEquilibrium { cell: usize },

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sample {sample} (seed {seed}) failed: {source}")]
    SampleFailed {
        sample: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed input file {path}: {detail}")]
    Schema { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
