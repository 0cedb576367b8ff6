use std::f64::consts::PI;
use std::sync::Arc;
use zkflat::domain::{Grid, Params};
use zkflat::freeflow::{trace_f, FreeFlowOptions};
use zkflat::genfun::{build_table_for, GenFunTable};
use zkflat::gevrey::InterpOptions;
use zkflat::pipeline::{run_null, setup, NullRun};
use zkflat::synthesis::{
    assemble_control, assemble_state, check_compatibility, fit_flat_bounds, mode_control, reach_coefficients,
    reach_flat_output, truncation_bound, CallableTarget, FlatBounds, ReachCoefficients, TargetSpec, TargetTerm,
};
use zkflat::domain::make_basis;

fn u0(x: f64, y: f64) -> f64 {
    x * (x + 1.0) * ((PI * y).sin() + 0.5 * (2.0 * PI * y).sin())
}

fn null_run(p: &Params) -> NullRun {
    run_null(setup(p, None).unwrap(), u0, &FreeFlowOptions::default()).unwrap()
}

fn small_params() -> Params {
    Params {
        nx: 33,
        ny: 33,
        nt: 401,
        ..Params::default()
    }
}

fn term(i: usize, j: usize, beta: f64) -> TargetTerm {
    TargetTerm { i, j, beta }
}

fn as_callable(target: &TargetSpec, table: &GenFunTable) -> TargetSpec {
    TargetSpec::Callable(target.partials(table).unwrap())
}

fn reach_bits(p: &Params, target: &TargetSpec) -> (GenFunTable, ReachCoefficients) {
    let table = build_table_for(p.a, p.i_max, p.j_max).unwrap();
    let basis = make_basis(p.j_max).unwrap();
    let grid = Grid::chebyshev(p).unwrap();
    let b = reach_coefficients(target, &table, &basis, &grid.y).unwrap();
    (table, b)
}

#[test]
fn null_flat_output_vanishes_from_final_time() {
    let p = small_params();
    let run = null_run(&p);
    for j in 1..=p.j_max {
        assert!(run.flat.derivs(j, p.t_final, 12).unwrap().iter().all(|v| *v == 0.0));
        let near = run.flat.derivs(j, p.t_final - 1e-3, 4).unwrap();
        assert!(near.iter().all(|v| v.abs() < 1e-20), "{near:?}");
    }
}

#[test]
fn null_flat_output_is_the_free_trace_before_tau() {
    // the flat output keeps the slow eigenmodes; the stepped trace also
    // carries Crank-Nicolson remnants of the fast ones
    let p = Params::default();
    let run = null_run(&p);
    let tol = 1e-5 * run.initial_norm;
    for (jm, ev) in run.free.iter().enumerate() {
        for t in [0.03, 0.1, 0.2, 0.39] {
            let z = run.flat.derivs(jm + 1, t, 0).unwrap()[0];
            let f = trace_f(ev, t).unwrap();
            assert!((z - f).abs() <= tol, "j={} t={t}: {z} vs {f}", jm + 1);
        }
    }
}

#[test]
fn null_flat_derivative_matches_finite_difference() {
    let p = small_params();
    let run = null_run(&p);
    let t = 0.5 * (p.tau + p.t_final);
    let h = 1e-4;
    for j in 1..=p.j_max {
        let z = |t: f64| run.flat.derivs(j, t, 0).unwrap()[0];
        let fd = (z(t - 2.0 * h) - 8.0 * z(t - h) + 8.0 * z(t + h) - z(t + 2.0 * h)) / (12.0 * h);
        let d1 = run.flat.derivs(j, t, 1).unwrap()[1];
        let scale = d1.abs().max(z(t).abs()).max(1e-300);
        assert!((fd - d1).abs() <= 1e-4 * scale, "j={j}: {d1} vs {fd}");
    }
}

#[test]
fn exact_and_integral_coefficients_agree() {
    let p = small_params();
    let table = build_table_for(p.a, p.i_max, p.j_max).unwrap();
    let basis = make_basis(p.j_max).unwrap();
    let y: Vec<f64> = (0..65).map(|k| k as f64 / 64.0).collect();
    for terms in [vec![term(0, 1, 2.5)], vec![term(1, 2, 1.0)], vec![term(0, 1, 1.0), term(1, 2, 0.3)]] {
        let exact = TargetSpec::Exact(terms.clone());
        let b_exact = reach_coefficients(&exact, &table, &basis, &y).unwrap();
        let b_int = reach_coefficients(&as_callable(&exact, &table), &table, &basis, &y).unwrap();
        for j in 1..=p.j_max {
            for i in 0..=p.i_max {
                let want: f64 = terms.iter().filter(|t| t.i == i && t.j == j).map(|t| t.beta).sum();
                assert_eq!(b_exact.get(i, j), want);
                let got = b_int.get(i, j);
                assert!((got - want).abs() <= 1e-8 * (1.0 + want.abs()), "({i},{j}): {got} vs {want}");
            }
        }
    }
}

#[test]
fn zero_target_has_zero_coefficients_and_control() {
    let p = small_params();
    let (table, b) = reach_bits(&p, &TargetSpec::zero());
    assert!(b.b.iter().flatten().all(|v| *v == 0.0));
    let z = reach_flat_output(&b, &p, &InterpOptions::default()).unwrap();
    let grid = Grid::chebyshev(&p).unwrap();
    let u = assemble_state(&table, &z, &grid.with_times(vec![0.0, 0.5, 1.0])).unwrap();
    assert!(u.values.iter().all(|v| *v == 0.0));
    let h = assemble_control(&table, &z, &grid).unwrap();
    assert!(h.is_zero());
    assert!(h.h.iter().all(|v| *v == 0.0));
}

#[test]
fn callable_target_without_enough_derivatives_is_rejected() {
    let p = small_params();
    let table = build_table_for(p.a, p.i_max, p.j_max).unwrap();
    let basis = make_basis(p.j_max).unwrap();
    let y: Vec<f64> = (0..33).map(|k| k as f64 / 32.0).collect();
    let shallow = TargetSpec::Callable(CallableTarget {
        name: "shallow".into(),
        max_px: 3,
        max_qy: 2,
        partials: Arc::new(|_, _, _, _| 0.0),
    });
    assert!(reach_coefficients(&shallow, &table, &basis, &y).is_err());
    assert!(check_compatibility(&shallow, 2, &table, &basis).is_err());
}

#[test]
fn reach_flat_output_hits_the_coefficients_at_final_time() {
    let p = small_params();
    let target = TargetSpec::Exact(vec![term(0, 1, 1.0), term(1, 2, 0.3)]);
    let (_, b) = reach_bits(&p, &target);
    let z = reach_flat_output(&b, &p, &InterpOptions::default()).unwrap();
    for j in 1..=p.j_max {
        let d = z.derivs(j, p.t_final, 10).unwrap();
        for (i, di) in d.iter().enumerate() {
            let want = b.get(i, j);
            assert!((di - want).abs() <= 1e-8 * want.abs().max(1e-300) || (want == 0.0 && di.abs() <= 1e-12), "({i},{j}): {di} vs {want}");
        }
        assert!(z.derivs(j, p.tau, 6).unwrap().iter().all(|v| *v == 0.0));
        assert!(z.derivs(j, 0.0, 6).unwrap().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn assembled_state_has_structural_zeros() {
    let p = small_params();
    let target = TargetSpec::Exact(vec![term(0, 1, 1.0), term(1, 2, 0.3)]);
    let (table, b) = reach_bits(&p, &target);
    let z = reach_flat_output(&b, &p, &InterpOptions::default()).unwrap();
    let grid = Grid::chebyshev(&p).unwrap();
    let grid = grid.with_times((0..=20).map(|k| k as f64 / 20.0).collect());
    let u = assemble_state(&table, &z, &grid).unwrap();
    let (nt, nx, ny) = u.values.dim();
    for it in 0..nt {
        for iy in 0..ny {
            assert!(u.values[(it, nx - 1, iy)].abs() <= 1e-12);
        }
        for ix in 0..nx {
            assert!(u.values[(it, ix, 0)].abs() <= 1e-12);
            assert!(u.values[(it, ix, ny - 1)].abs() <= 1e-12);
        }
    }
    // reach states start from rest
    assert!(u.values.index_axis(ndarray::Axis(0), 0).iter().all(|v| v.abs() <= 1e-12));
}

#[test]
fn control_is_the_state_trace_at_the_left_end() {
    let p = small_params();
    let target = TargetSpec::Exact(vec![term(0, 1, 1.0), term(1, 2, 0.3)]);
    let (table, b) = reach_bits(&p, &target);
    let z = reach_flat_output(&b, &p, &InterpOptions::default()).unwrap();
    let grid = Grid::chebyshev(&p).unwrap();
    let sub = grid.with_times(grid.t.iter().step_by(20).copied().collect());
    let u = assemble_state(&table, &z, &sub).unwrap();
    let h = assemble_control(&table, &z, &sub).unwrap();
    for it in 0..sub.t.len() {
        for iy in 0..sub.y.len() {
            assert_eq!(u.values[(it, 0, iy)], h.h[(it, iy)]);
        }
    }
}

#[test]
fn raw_null_series_vanishes_at_the_left_end_before_tau() {
    let p = small_params();
    let run = null_run(&p);
    let scale = run.initial_norm;
    for t in [0.5 * p.tau, 0.75 * p.tau] {
        for j in 1..=p.j_max {
            let (h, _) = mode_control(&run.setup.table, &run.flat, j, t).unwrap();
            assert!(h.abs() <= 1e-6 * scale, "j={j} t={t}: {h}");
        }
    }
    assert_eq!(run.control.sup_before(p.tau), 0.0);
}

#[test]
fn truncation_tail_decreases_with_order() {
    let bounds = FlatBounds {
        sup: vec![vec![1.0; 4]; 2],
        m: vec![2.0, 0.5],
        r: 3.0,
        samples: 10,
    };
    let mut last = f64::INFINITY;
    for i_max in 2..30 {
        let p = Params { i_max, ..Params::default() };
        let tb = truncation_bound(&p, &bounds, 1.0, &[]);
        assert!(tb.total > 0.0 && tb.total < last);
        last = tb.total;
    }
    assert!(last < 1e-20);
}

#[test]
fn doubling_r_shrinks_the_tail_geometrically() {
    let p = Params { i_max: 6, ..Params::default() };
    let mut bounds = FlatBounds {
        sup: vec![vec![1.0; 4]],
        m: vec![1.0],
        r: 1.5,
        samples: 10,
    };
    let a = truncation_bound(&p, &bounds, 1.0, &[]).i_tail;
    bounds.r *= 2.0;
    let b = truncation_bound(&p, &bounds, 1.0, &[]).i_tail;
    assert!(a / b >= 4f64.powi(p.i_max as i32 + 1), "{}", a / b);
}

#[test]
fn truncation_bound_covers_a_higher_order_assembly() {
    let target = TargetSpec::Exact(vec![term(0, 1, 1.0), term(1, 2, 0.3)]);
    let p = small_params();
    let (table, b) = reach_bits(&p, &target);
    let z = reach_flat_output(&b, &p, &InterpOptions::default()).unwrap();
    let grid = Grid::chebyshev(&p).unwrap();
    let h = assemble_control(&table, &z, &grid).unwrap();
    let bounds = fit_flat_bounds(&z, p.i_max, 201).unwrap();
    let c1 = zkflat::genfun::check_bound(&table, &zkflat::genfun::sample_points(101)).c1_constant;
    let tb = truncation_bound(&p, &bounds, c1, &[]);

    let p5 = Params { i_max: p.i_max + 5, ..p.clone() };
    let (table5, b5) = reach_bits(&p5, &target);
    let z5 = reach_flat_output(&b5, &p5, &InterpOptions::default()).unwrap();
    let h5 = assemble_control(&table5, &z5, &grid).unwrap();
    let diff = (&h.h - &h5.h).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(tb.total.is_finite());
    assert!(diff <= tb.total, "{diff} > {}", tb.total);
}

#[test]
fn compatibility_of_exact_and_zero_targets() {
    let p = small_params();
    let table = build_table_for(p.a, p.i_max, p.j_max).unwrap();
    let basis = make_basis(p.j_max).unwrap();
    let exact = TargetSpec::Exact(vec![term(0, 1, 1.0), term(1, 2, 0.3), term(3, 3, -2.0)]);
    let r = check_compatibility(&exact, 4, &table, &basis).unwrap();
    assert!(r.passed, "{r:?}");
    assert!((r.r0 - 3.3914).abs() < 1e-4);
    let r = check_compatibility(&TargetSpec::zero(), 4, &table, &basis).unwrap();
    assert!(r.passed);
    assert_eq!(r.trace_defect, 0.0);
}

#[test]
fn incompatible_target_fails_the_trace_check() {
    let p = small_params();
    let table = build_table_for(p.a, p.i_max, p.j_max).unwrap();
    let basis = make_basis(p.j_max).unwrap();
    // (x + 1) sin(pi y) is nonzero at x = 0
    let bad = TargetSpec::Callable(CallableTarget {
        name: "(x+1) sin(pi y)".into(),
        max_px: usize::MAX,
        max_qy: usize::MAX,
        partials: Arc::new(|p, q, x, y| {
            let fx = match p {
                0 => x + 1.0,
                1 => 1.0,
                _ => 0.0,
            };
            let k = PI;
            let fy = k.powi(q as i32) * (k * y + q as f64 * PI / 2.0).sin();
            fx * fy
        }),
    });
    let r = check_compatibility(&bad, 2, &table, &basis).unwrap();
    assert!(!r.passed);
    assert!(r.trace_defect > 0.1);
}
