//! Flat outputs, series assembly and reachability coefficients.

pub mod assemble;
pub mod flat;
pub mod target;

pub use assemble::{
    assemble_control, assemble_null_state, assemble_state, assemble_state_deriv, fit_flat_bounds, free_state,
    mode_control, truncation_bound, ControlSignal, FlatBounds, TruncationReport,
};
pub use flat::{leibniz, null_flat_output, reach_flat_output, FlatKind, FlatOutput, ModeFlat, ReachCoefficients};
pub use target::{
    check_compatibility, r0, reach_coefficients, target_field, CallableTarget, CompatibilityReport, TargetSpec,
    TargetTerm,
};
