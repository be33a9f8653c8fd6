//! 2D unstructured finite-element simulator for salt cavern deformation
//! under gas-storage loading.
//!
//! The simulator models linear elasticity plus time-dependent power-law
//! creep of rock salt on constant-strain triangles, with Kachanov damage
//! for the tertiary creep stage, heterogeneous interlayers, cyclic
//! pressure schedules and dilatancy-based permeability post-processing.

pub mod assembly;
pub mod constitutive;
pub mod error;
pub mod linalg;
pub mod loads;
pub mod materials;
pub mod mesh;
pub mod postprocess;
pub mod scenario;
pub mod solver;

pub use error::Error;
