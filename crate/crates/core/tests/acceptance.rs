//! End-to-end acceptance suite. Prints one line per criterion, then fails if
//! any criterion failed.

use nalgebra::DVector;
use std::f64::consts::PI;
use std::time::Instant;
use zkflat::cheb;
use zkflat::domain::{Field3, Grid, Params};
use zkflat::freeflow::{evolve_free, FreeFlowOptions};
use zkflat::genfun::{build_table_for, check_bound, g0, g0_closed, sample_points, GenFunTable};
use zkflat::gevrey::{bump, bump_deriv, interpolate_sequence, BumpParams, InterpOptions};
use zkflat::pipeline::{run_null, run_reach, setup, NullRun, ReachRun};
use zkflat::simulator::pde_residual;
use zkflat::synthesis::{
    assemble_state, assemble_state_deriv, free_state, reach_coefficients, FlatOutput, TargetSpec, TargetTerm,
};

type Outcome = (bool, String);

fn u0(x: f64, y: f64) -> f64 {
    x * (x + 1.0) * (PI * y).sin() + 0.5 * x * (x + 1.0) * (2.0 * PI * y).sin()
}

fn null_params() -> Params {
    Params {
        a: 1.0,
        t_final: 1.0,
        tau: 0.4,
        s: 1.6,
        steepness: 1.0,
        i_max: 15,
        j_max: 4,
        ..Params::default()
    }
}

fn reach_target() -> TargetSpec {
    TargetSpec::Exact(vec![
        TargetTerm { i: 0, j: 1, beta: 1.0 },
        TargetTerm { i: 1, j: 2, beta: 0.3 },
    ])
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let table = build_table_for(1.0, 15, 10).unwrap();
    let report = check_bound(&table, &sample_points(101));
    let secs = start.elapsed().as_secs_f64();
    (
        report.passed() && secs <= 2.0,
        format!("{} violations over {} entries, {secs:.3} s", report.violations.len(), report.rows.len()),
    )
}

fn criterion_2() -> Outcome {
    let table = build_table_for(1.0, 15, 10).unwrap();
    let xs = sample_points(101);
    let mut ode: f64 = 0.0;
    for j in 1..=10 {
        for i in 0..=15 {
            ode = ode.max(table.ode_residual(i, j, &xs).unwrap());
        }
    }
    let mut closed: f64 = 0.0;
    for a in [1.0, PI * PI, 15.0] {
        let g = g0(1, a).unwrap();
        let mu = Params::lambda(1) - a;
        for &x in &xs {
            for k in 0..=3 {
                let want = g0_closed(mu, x, k);
                closed = closed.max((g.eval(x, k) - want).abs() / (1.0 + want.abs()));
            }
        }
    }
    (ode <= 1e-10 && closed <= 1e-12, format!("ode residual {ode:.2e}, closed form {closed:.2e}"))
}

fn criterion_3() -> Outcome {
    let p = Params { nx: 64, nt: 2000, j_max: 10, ..Params::default() };
    let x = cheb::nodes(p.nx);
    let t: Vec<f64> = (0..p.nt).map(|k| k as f64 / (p.nt - 1) as f64).collect();
    let u0: Vec<DVector<f64>> = (1..=10)
        .map(|j| DVector::from_iterator(x.len(), x.iter().map(|x| x * x * (x + 1.0) * (1.0 + 0.1 * j as f64 * x))))
        .collect();
    let evs = evolve_free(&u0, &p, &x, &t, &FreeFlowOptions::default()).unwrap();
    let worst = evs.iter().map(|ev| ev.energy_report().residual).fold(0.0, f64::max);
    (worst <= 1e-6, format!("max relative identity residual {worst:.2e} over j <= 10"))
}

/// `sup |a - b|` over all samples.
fn gap(a: &Field3, b: &Field3) -> f64 {
    sup(a.values.iter().zip(b.values.iter()).map(|(a, b)| a - b))
}

fn criterion_4(run: &NullRun, secs: f64) -> Outcome {
    let p = &run.setup.params;
    let h_early = run.control.sup_before(p.tau);
    let rel = run.relative_terminal();
    (
        h_early <= 1e-12 && rel <= 1e-3 && secs <= 60.0,
        format!("sup |h| on [0, tau) = {h_early:.1e}, ||u(T)||/||u0|| = {rel:.2e}, {secs:.2} s"),
    )
}

fn criterion_5(run: &NullRun) -> Outcome {
    let p = &run.setup.params;
    let grid = run.setup.grid.with_times(vec![0.5 * p.tau]);
    let series = assemble_state(&run.setup.table, &run.flat, &grid).unwrap();
    let free = free_state(&run.free, &grid).unwrap();
    let g = gap(&series, &free);
    let tol = 1e-4 * run.initial_norm;
    (g <= tol, format!("splice gap at tau/2 = {g:.2e} (limit {tol:.2e})"))
}

fn criterion_6(run: &ReachRun, secs: f64) -> Outcome {
    let p = &run.setup.params;
    let b = &run.coefficients;
    let mut coef_err: f64 = 0.0;
    // also through the integral definition on the callable view
    let callable = TargetSpec::Callable(reach_target().partials(&run.setup.table).unwrap());
    let b_int = reach_coefficients(&callable, &run.setup.table, &run.setup.basis, &run.setup.grid.y).unwrap();
    for j in 1..=p.j_max {
        for i in 0..=p.i_max {
            let want = match (i, j) {
                (0, 1) => 1.0,
                (1, 2) => 0.3,
                _ => 0.0,
            };
            coef_err = coef_err.max((b.get(i, j) - want).abs()).max((b_int.get(i, j) - want).abs());
        }
    }
    let mut interp_err: f64 = 0.0;
    for j in 1..=p.j_max {
        let d = run.flat.derivs(j, p.t_final, 10).unwrap();
        for (i, di) in d.iter().enumerate() {
            let want = b.get(i, j);
            let err = if want == 0.0 { di.abs() } else { ((di - want) / want).abs() };
            interp_err = interp_err.max(err);
        }
    }
    let rel = run.error.relative_l2;
    (
        coef_err <= 1e-8 && interp_err <= 1e-8 && rel <= 1e-3 && secs <= 60.0,
        format!(
            "coefficient error {coef_err:.1e}, z^(i)(T) error {interp_err:.1e}, terminal relative L2 error {rel:.2e}, {secs:.2} s"
        ),
    )
}

/// Largest residual over short time windows around `centers`, relative to
/// the largest `|u|` in those windows. The x grid is coarse enough that the
/// third-derivative matrix does not amplify rounding.
fn window_residual(table: &GenFunTable, z: &FlatOutput, p: &Params, centers: &[f64]) -> f64 {
    let delta = 1e-4;
    let base = Grid::chebyshev(&Params { nx: 25, ny: 33, ..p.clone() }).unwrap();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &c in centers {
        let grid = base.with_times((0..9).map(|k| c + delta * (k as f64 - 4.0)).collect());
        let u = assemble_state(table, z, &grid).unwrap();
        scale = scale.max(sup(u.values.iter().copied()));
        worst = worst.max(pde_residual(&u, &grid, p).unwrap());
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

fn criterion_7(null: &NullRun, reach: &ReachRun) -> Outcome {
    let p = &null.setup.params;
    let rn = window_residual(&null.setup.table, &null.flat, p, &[0.41, 0.45, 0.6, 0.8, 0.95]);
    let rr = window_residual(&reach.setup.table, &reach.flat, p, &[0.41, 0.45, 0.6, 0.8, 0.95, 0.999]);
    (
        rn <= 1e-6 && rr <= 1e-6,
        format!("relative residual null {rn:.2e}, reach {rr:.2e}"),
    )
}

fn boundary_zeros(table: &GenFunTable, z: &FlatOutput, grid: &Grid) -> f64 {
    let u = assemble_state(table, z, grid).unwrap();
    let ux = assemble_state_deriv(table, z, grid, 1).unwrap();
    let (nt, nx, ny) = u.values.dim();
    let mut worst: f64 = 0.0;
    for it in 0..nt {
        for iy in 0..ny {
            worst = worst.max(u.values[(it, nx - 1, iy)].abs()).max(ux.values[(it, nx - 1, iy)].abs());
        }
        for ix in 0..nx {
            worst = worst.max(u.values[(it, ix, 0)].abs()).max(u.values[(it, ix, ny - 1)].abs());
        }
    }
    worst
}

fn criterion_8(null: &NullRun, reach: &ReachRun) -> Outcome {
    let p = &null.setup.params;
    let late: Vec<f64> = (0..=30).map(|k| p.tau + (p.t_final - p.tau) * k as f64 / 30.0).collect();
    let all: Vec<f64> = (0..=40).map(|k| p.t_final * k as f64 / 40.0).collect();
    let zn = boundary_zeros(&null.setup.table, &null.flat, &null.setup.grid.with_times(late));
    let zr = boundary_zeros(&reach.setup.table, &reach.flat, &reach.setup.grid.with_times(all));
    (
        zn <= 1e-12 && zr <= 1e-12,
        format!("largest boundary value null {zn:.1e}, reach {zr:.1e}"),
    )
}

fn criterion_9() -> Outcome {
    let mut partition: f64 = 0.0;
    let mut fd_err: f64 = 0.0;
    for (s, m) in [(1.6, 1.0), (1.3, 0.5), (1.9, 2.0)] {
        let bp = BumpParams::new(s, m).unwrap();
        for k in 0..=4000 {
            let rho = k as f64 / 4000.0;
            partition = partition.max((bump(&bp, rho) + bump(&bp, 1.0 - rho) - 1.0).abs());
        }
        for rho in [0.3, 0.5, 0.7] {
            for order in 1..=4 {
                let f = |r: f64| bump_deriv(&bp, r, order - 1).unwrap();
                let d = |h: f64| (f(rho - 2.0 * h) - 8.0 * f(rho - h) + 8.0 * f(rho + h) - f(rho + 2.0 * h)) / (12.0 * h);
                let h = 2e-4;
                let fd = (64.0 * d(h / 2.0) - d(h)) / 63.0;
                let exact = bump_deriv(&bp, rho, order).unwrap();
                fd_err = fd_err.max((fd - exact).abs() / (1.0 + exact.abs() + f(rho).abs()));
            }
        }
    }
    let d: Vec<f64> = (0..=10).map(|q| (-0.8f64).powi(q) * (1.0 + q as f64).powi(3)).collect();
    let g = interpolate_sequence(&d, 1.0, &InterpOptions::default()).unwrap();
    let jet = g.jet(1.0, 10).unwrap();
    let anchor = (0..=10).map(|q| ((jet.deriv(q) - d[q]) / d[q]).abs()).fold(0.0, f64::max);
    (
        partition <= 1e-14 && fd_err <= 1e-8 && anchor <= 1e-8,
        format!("partition {partition:.1e}, finite differences {fd_err:.1e}, anchor {anchor:.1e}"),
    )
}

fn criterion_10(base: &NullRun) -> Outcome {
    let p = null_params();
    let fine = run_null(
        setup(&Params { nt: 2 * p.nt - 1, ..p.clone() }, None).unwrap(),
        u0,
        &FreeFlowOptions::default(),
    )
    .unwrap();
    let ratio = base.relative_terminal() / fine.relative_terminal();
    let higher = run_null(
        setup(&Params { i_max: 20, ..p.clone() }, None).unwrap(),
        u0,
        &FreeFlowOptions::default(),
    )
    .unwrap();
    let change = sup(base.control.h.iter().zip(higher.control.h.iter()).map(|(a, b)| a - b));
    let bound = base.truncation.total;
    (
        ratio >= 3.0 && change <= bound,
        format!("defect ratio for dt/2 = {ratio:.2}, control change I 15->20 = {change:.1e} (bound {bound:.1e})"),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(usize, Outcome)> = vec![(1, criterion_1()), (2, criterion_2()), (3, criterion_3())];

    let p = null_params();
    let start = Instant::now();
    let null = run_null(setup(&p, None).unwrap(), u0, &FreeFlowOptions::default()).unwrap();
    let null_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let reach = run_reach(
        setup(&p, None).unwrap(),
        &reach_target(),
        &InterpOptions::default(),
        &FreeFlowOptions::default(),
    )
    .unwrap();
    let reach_secs = start.elapsed().as_secs_f64();

    results.push((4, criterion_4(&null, null_secs)));
    results.push((5, criterion_5(&null)));
    results.push((6, criterion_6(&reach, reach_secs)));
    results.push((7, criterion_7(&null, &reach)));
    results.push((8, criterion_8(&null, &reach)));
    results.push((9, criterion_9()));
    results.push((10, criterion_10(&null)));

    for (n, (ok, detail)) in &results {
        println!("criterion {n}: {} {detail}", if *ok { "PASS" } else { "FAIL" });
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.1 .0).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
