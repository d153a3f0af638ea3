//! Numerical laboratory for the perfect conductivity problem with two
//! nearly touching inclusions.
//!
//! The pipeline is `geometry` → `mesh` → `solver` → `harness`: build the
//! two-inclusion geometry at separation ε, mesh the thin gap with a graded
//! structured neck, solve the floating-potential problem (directly, and via
//! the `u = C₁v₁ + C₂v₂ + v₀` decomposition), then sweep ε and compare the
//! measured gradients and capacity coefficients against the closed-form
//! rates in [`asymptotics`].

pub mod asymptotics;
pub mod config;
mod error;
pub mod geometry;
pub mod harness;
pub mod mesh;
pub mod solver;

pub use error::{Error, Result};

pub use asymptotics::{Envelope, EnvelopeKind, RateFamily};
pub use config::{load_config, RunConfig};
pub use geometry::{BoundaryData, GapGeometry, Mode, Order, Profile, ProfileKind};
pub use harness::{FitResult, SweepConfig, SweepRecord};
pub use mesh::{BoundaryTag, Mesh, MeshParams, MeshQuality};
pub use solver::{CapacitySystem, GradientStats, HarmonicField, SolverBackend};

/// Crate version embedded in output provenance headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
