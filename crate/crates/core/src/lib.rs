//! Numerical machinery for polaron no-binding thresholds: IMS partitions of
//! unity with pinning profiles, per-region energy brackets, a minimax search
//! over partition parameters, and path-integral checks of the constants.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod feynman_kac;
pub mod optimizer;
pub mod partition;
pub mod quadrature;
pub mod simplex;
pub mod summation;

pub use bounds::{
    bracket_n, bracket_zero, c_constants, geometric_bound, Brackets, CutoffConstants, ModelSpec, PhiNorms,
};
pub use error::{Error, Result};
pub use feynman_kac::{
    jensen_rate, kernel_check_grid, mc_energy_probe, piezo_kernel, renorm_integral, retarded_action, sample_paths,
    separation_bound_check, EndpointMode, KernelQuery, McProbe, Path, PathEnsemble, Trajectory,
};
pub use optimizer::{
    build_full_schedule, kinetic_rescale, lambda_curve, minimize_truncated, no_binding_constant, CurvePoint,
    OptimumReport, SearchOptions, TailCertificate, TruncatedPoint,
};
pub use partition::{
    grad_sq_sum, make_schedule, phi_eval, pinning_diagnostics, pinning_profile, PartitionSchedule, PinningProfile,
    TailRule,
};
