//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    // ---- graph construction ----
    #[error("graph is not connected as an undirected multigraph")]
    DisconnectedGraph,
    #[error("edge `{edge}` has index of length {got}, expected dim {expected}")]
    IndexArityMismatch {
        edge: String,
        expected: usize,
        got: usize,
    },
    #[error("edge indices span rank {rank} < dim {dim}; the graph cannot be Z^{dim}-periodic")]
    RankDeficientIndices { rank: usize, dim: usize },
    #[error("Euler bound violated: nu + d = {nu} + {dim} > {nu_star} + 1 = nu* + 1")]
    EulerViolation {
        nu: usize,
        nu_star: usize,
        dim: usize,
    },
    #[error("unknown built-in graph `{0}`")]
    UnknownBuiltin(String),
    #[error("invalid graph spec: {0}")]
    InvalidSpec(String),

    // ---- fiber operators ----
    #[error("quasimomentum has {got} components, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not Hermitian: max asymmetry {max_asym:.3e}")]
    NonHermitianInput { max_asym: f64 },
    #[error("fiber is degenerate at band {band}: eigenvalue gap {gap:.3e}")]
    DegenerateFiber { band: usize, gap: f64 },
    #[error("quasimomentum is zero (or below the 1e-8 threshold)")]
    ThetaZero,
    #[error("sin z is singular at band {band}: lambda = {lambda} is within 1e-8 of ±1")]
    SinSingular { band: usize, lambda: f64 },
    #[error("Dirichlet system has rank {rank}, expected {expected}")]
    RankAnomaly { rank: usize, expected: usize },
    #[error("eigenvalue {0} lies outside [-1, 1] beyond the clamp tolerance")]
    OutOfRange(f64),
    #[error("energy {energy} is within 1e-9 of the Dirichlet value (pi*{j})^2")]
    DirichletPoint { energy: f64, j: u32 },
    #[error("unknown edge id {0}")]
    UnknownEdge(usize),

    // ---- scattering ----
    #[error("potential has empty support")]
    EmptyPotential,
    #[error("truncation tail bound {bound:.3e} exceeds the requested tolerance {tol:.3e}")]
    TailTooLarge { bound: f64, tol: f64 },
    #[error("energy {energy} is too close to a band edge or Dirichlet point (distance {dist:.3e})")]
    NearSingularEnergy { energy: f64, dist: f64 },
    #[error("invalid potential file: {0}")]
    PotentialFormat(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
