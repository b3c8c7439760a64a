//! Finite-volume discretization and implicit time stepping.

pub mod grid;
pub mod linalg;
pub mod scenario;
pub mod step;
pub mod trajectory;
pub mod weak_form;

pub use grid::{Edge, Grid};
pub use scenario::{
    Boundary, BoundaryKind, DtPolicy, InitialData, Scenario, Tolerances, VectorField,
};
pub use step::{implicit_step, p_laplacian_apply, phi, Operator, StepStats, Stepper};
pub use trajectory::{run_simulation, RescaleInfo, Trajectory};
pub use weak_form::{weak_form_residual, weak_form_residual_with_rule, Region, TimeRule, WeakResidual};
