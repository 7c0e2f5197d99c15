//! Coupled moisture transport, carbonation and corrosion-current simulation
//! for cracked and uncracked concrete.
//!
//! The crate solves, fully implicitly on bilinear quadrilateral meshes, the
//! liquid saturation `S`, gaseous CO₂ concentration `c` and calcium
//! hydroxide content `c_ch`, with prescribed cracks entering through a
//! regularized phase field.

pub mod cases;
pub mod config;
pub mod constitutive;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod output;
pub mod phasefield;
pub mod solver;
pub mod validate;

pub use cases::{run_scenario, ProbeKind, ProbeSpec, RunOptions, Scenario, SimulationResult};
pub use config::{parse_config, RunConfig};
pub use constitutive::{IsothermBranch, MaterialParams, Saturation};
pub use error::{Error, Result};
pub use mesh::{build_rect_mesh, BoundaryMarkers, Mesh, RectMeshSpec};
pub use solver::{BoundaryCondition, BoundaryValue, FieldState, Problem, Stepper, TimeStepPlan, Unknown};
