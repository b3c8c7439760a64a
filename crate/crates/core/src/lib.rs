//! Regularized two-phase Stefan problem with p-Laplacian diffusion, and a
//! harness that measures the intrinsic-scaling estimates behind its
//! log-power modulus of continuity.

// `!(x > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod error;
pub mod geometry;
pub mod graphs;
pub mod presets;
pub mod quad;
pub mod verify;
pub mod solver;

pub use error::{ConstantsError, GeometryError, GraphError, SolverError, VerifyError};
pub use graphs::{BetaMap, RegularizedGraph};
pub use solver::{run_simulation, Grid, Scenario, Trajectory};
pub use constants::{fix_constants, ConstantInputs, ConstantsLedger, Context, Provenance};
pub use geometry::{alpha_kappa_of, CylinderFlavor, IntrinsicCylinder, ModulusParams};
pub use verify::InequalityReport;
