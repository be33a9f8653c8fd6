use thiserror::Error;

/// Top-level error type, wrapping the per-subsystem errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Material(#[from] crate::materials::MaterialError),
    #[error(transparent)]
    Constitutive(#[from] crate::constitutive::ConstitutiveError),
    #[error(transparent)]
    Load(#[from] crate::loads::LoadError),
    #[error(transparent)]
    Assembly(#[from] crate::assembly::AssemblyError),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
    #[error("verification gate failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
