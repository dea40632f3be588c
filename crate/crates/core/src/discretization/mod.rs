//! Method-of-lines forward simulator.

pub mod dynamics;
pub mod grid;
pub mod integrator;
pub mod simulate;
pub mod statics;

pub use dynamics::{LoadInputs, RodDynamics, RodState, NODE_DOF};
pub use grid::{reconstruct_poses, spatial_derivative, Grid};
pub use integrator::{Integrator, IntegratorKind, OdeSystem, SolverConfig};
pub use simulate::{
    output_times, simulate, step, ContinuousInputs, InputSignal, SampledInputs, TrajectoryRecord, TrajectorySample,
    DEFAULT_OUTPUT_RATE,
};
pub use statics::discrete_equilibrium;
