//! End-to-end null-control and reachability runs.

use crate::domain::{l2_norm, make_basis, Field2, FieldTag, Grid, Params, TransverseBasis};
use crate::error::Result;
use crate::freeflow::{evolve_free, FreeFlowOptions, ModeEvolution};
use crate::genfun::{build_table, check_bound, sample_points, BoundReport, GenFunTable};
use crate::gevrey::InterpOptions;
use crate::simulator::{compare_fields, simulate_controlled, FieldComparison, Simulation};
use crate::synthesis::{
    assemble_control, check_compatibility, fit_flat_bounds, null_flat_output, reach_coefficients, reach_flat_output,
    target_field, truncation_bound, CompatibilityReport, ControlSignal, FlatBounds, FlatOutput, ReachCoefficients,
    TargetSpec, TruncationReport,
};
use nalgebra::DVector;

/// Sample count for the fitted flat-output bounds.
pub const BOUND_SAMPLES: usize = 201;

pub struct Setup {
    pub params: Params,
    pub grid: Grid,
    pub basis: TransverseBasis,
    pub table: GenFunTable,
}

pub fn setup(p: &Params, table: Option<GenFunTable>) -> Result<Setup> {
    p.validate()?;
    let grid = Grid::chebyshev(p)?;
    let basis = make_basis(p.j_max)?;
    let table = match table {
        Some(t) => t,
        None => build_table(p, &basis)?,
    };
    Ok(Setup {
        params: p.clone(),
        grid,
        basis,
        table,
    })
}

pub struct NullRun {
    pub setup: Setup,
    pub u0: Field2,
    pub free: Vec<ModeEvolution>,
    pub flat: FlatOutput,
    pub control: ControlSignal,
    pub sim: Simulation,
    pub terminal: Field2,
    pub initial_norm: f64,
    pub terminal_norm: f64,
    pub bound_report: BoundReport,
    pub flat_bounds: FlatBounds,
    pub truncation: TruncationReport,
}

impl NullRun {
    pub fn relative_terminal(&self) -> f64 {
        if self.initial_norm > 0.0 {
            self.terminal_norm / self.initial_norm
        } else {
            self.terminal_norm
        }
    }
}

fn truncation(s: &Setup, z: &FlatOutput) -> Result<(BoundReport, FlatBounds, TruncationReport)> {
    let report = check_bound(&s.table, &sample_points(101));
    let bounds = fit_flat_bounds(z, s.table.i_max, BOUND_SAMPLES)?;
    let tb = truncation_bound(&s.params, &bounds, report.c1_constant, &[]);
    Ok((report, bounds, tb))
}

/// Free evolution, flat output, control synthesis and verification by simulation.
pub fn run_null(s: Setup, u0: impl Fn(f64, f64) -> f64, opts: &FreeFlowOptions) -> Result<NullRun> {
    let u0 = Field2::from_fn(&s.grid, FieldTag::Initial, u0);
    run_null_from(s, u0, opts)
}

/// As [`run_null`], with the initial state given on the grid nodes.
pub fn run_null_from(s: Setup, u0: Field2, opts: &FreeFlowOptions) -> Result<NullRun> {
    let p = &s.params;
    u0.check_shape(&s.grid)?;
    let modes = u0.modes(&s.grid, &s.basis)?;
    let profiles: Vec<DVector<f64>> = modes
        .outer_iter()
        .map(|r| DVector::from_iterator(r.len(), r.iter().copied()))
        .collect();
    let free = evolve_free(&profiles, p, &s.grid.x, &s.grid.t, opts)?;
    let flat = null_flat_output(&free, p)?;
    let control = assemble_control(&s.table, &flat, &s.grid)?;
    let sim = simulate_controlled(&u0, &s.grid, &control, p, opts)?;
    let terminal = sim.terminal(&s.grid);
    let initial_norm = l2_norm(&u0, &s.grid);
    let terminal_norm = l2_norm(&terminal, &s.grid);
    let (bound_report, flat_bounds, truncation) = truncation(&s, &flat)?;
    Ok(NullRun {
        setup: s,
        u0,
        free,
        flat,
        control,
        sim,
        terminal,
        initial_norm,
        terminal_norm,
        bound_report,
        flat_bounds,
        truncation,
    })
}

pub struct ReachRun {
    pub setup: Setup,
    pub coefficients: ReachCoefficients,
    pub compatibility: CompatibilityReport,
    pub flat: FlatOutput,
    pub control: ControlSignal,
    pub sim: Simulation,
    pub target: Field2,
    pub terminal: Field2,
    pub error: FieldComparison,
    pub bound_report: BoundReport,
    pub flat_bounds: FlatBounds,
    pub truncation: TruncationReport,
}

/// Compatibility levels checked for reach targets.
pub const COMPAT_LEVELS: usize = 4;

/// Coefficients, flat output and control for a target, verified from zero data.
pub fn run_reach(s: Setup, target: &TargetSpec, interp: &InterpOptions, opts: &FreeFlowOptions) -> Result<ReachRun> {
    let p = &s.params;
    let coefficients = reach_coefficients(target, &s.table, &s.basis, &s.grid.y)?;
    let compatibility = check_compatibility(target, COMPAT_LEVELS, &s.table, &s.basis)?;
    let flat = reach_flat_output(&coefficients, p, interp)?;
    let control = assemble_control(&s.table, &flat, &s.grid)?;
    let u0 = Field2::zeros(&s.grid, FieldTag::Initial);
    let sim = simulate_controlled(&u0, &s.grid, &control, p, opts)?;
    let terminal = sim.terminal(&s.grid);
    let target_f = target_field(target, &s.table, &s.grid)?;
    let error = compare_fields(&terminal, &target_f, &s.grid)?;
    let (bound_report, flat_bounds, truncation) = truncation(&s, &flat)?;
    Ok(ReachRun {
        setup: s,
        coefficients,
        compatibility,
        flat,
        control,
        sim,
        target: target_f,
        terminal,
        error,
        bound_report,
        flat_bounds,
        truncation,
    })
}
