//! Noise schedules, time grids, transition kernels and PF-ODE transport maps.

mod kernels;
mod maps;
mod reverse;
mod schedule;

pub use kernels::{
    denoising_kernel_first_order, denoising_kernel_second_order, GaussianKernel, Integrator, NoisingKernel,
    Variance,
};
pub use maps::{
    explicit_ode_map, implicit_midpoint_map, logdet_coefficients, logdet_estimate, Direction, FixedPoint,
    LogdetCoefficients, OdeStep, TraceMode,
};
pub use reverse::{reverse_ode_simulate, reverse_sde_simulate};
pub use schedule::{make_time_grid, NoiseSchedule, ScheduleCoeffs, TimeGrid, DEFAULT_SIGMA_MIN_GRID};
