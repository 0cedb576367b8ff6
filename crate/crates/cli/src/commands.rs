use crate::config::{Config, DEFAULT_U0};
use crate::exit::Failure;
use crate::expr::Expr;
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use zkflat::domain::{l2_norm, make_basis, Field2, FieldTag, Grid, Params, TransverseBasis};
use zkflat::freeflow::{evolve_free, smoothing_profile, smoothing_slopes, trace_f_derivs, ModeEvolution};
use zkflat::genfun::{check_bound, sample_points, BoundReport, GenFunTable};
use zkflat::io;
use zkflat::pipeline::{run_null_from, run_reach, setup, Setup, BOUND_SAMPLES};
use zkflat::simulator::{pde_residual, simulate_controlled, Simulation};
use zkflat::synthesis::{
    assemble_state, fit_flat_bounds, null_flat_output, r0, truncation_bound, FlatOutput, TargetSpec,
};

/// Smoothing diagnostics use `||L^n u||` for `n` up to this order.
const SMOOTHING_ORDER: usize = 3;
/// Trace derivatives reported by `bounds`.
const TRACE_ORDER: usize = 10;

pub struct Ctx {
    pub cfg: Config,
    pub hash: String,
    pub strict: bool,
}

enum Initial {
    Expr(String, Expr),
    Nodes(PathBuf, Field2),
    Zero,
}

impl Initial {
    fn field(&self, grid: &Grid) -> Field2 {
        match self {
            Initial::Expr(_, e) => Field2::from_fn(grid, FieldTag::Initial, |x, y| e.eval(x, y)),
            Initial::Nodes(_, f) => f.clone(),
            Initial::Zero => Field2::zeros(grid, FieldTag::Initial),
        }
    }

    fn describe(&self) -> String {
        match self {
            Initial::Expr(s, _) => s.clone(),
            Initial::Nodes(p, _) => p.display().to_string(),
            Initial::Zero => "0".into(),
        }
    }
}

fn position(nodes: &[f64], v: f64) -> Option<usize> {
    nodes.iter().position(|n| (n - v).abs() <= 1e-9)
}

/// Reads `x, y, value` rows covering every node of `grid`.
fn read_nodal_csv(path: &Path, grid: &Grid) -> Result<Field2, Failure> {
    let bad = |m: String| Failure::config(format!("{}: {m}", path.display()));
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = rd.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    if header != ["x", "y", "value"] {
        return Err(bad(format!("expected header x,y,value, found {header:?}")));
    }
    let mut f = Field2::zeros(grid, FieldTag::Initial);
    let mut seen = vec![false; grid.x.len() * grid.y.len()];
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}"))))
            .collect::<Result<_, _>>()?;
        if v.len() != 3 {
            return Err(bad("rows need three values".into()));
        }
        let (Some(ix), Some(iy)) = (position(&grid.x, v[0]), position(&grid.y, v[1])) else {
            return Err(bad(format!("({}, {}) is not a grid node", v[0], v[1])));
        };
        f.values[(ix, iy)] = v[2];
        seen[ix * grid.y.len() + iy] = true;
    }
    if !seen.iter().all(|s| *s) {
        return Err(bad("not every grid node has a value".into()));
    }
    Ok(f)
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Every `stride`-th entry, always ending with the last one.
fn strided<T: Copy>(v: &[T], stride: usize) -> Vec<T> {
    let mut out: Vec<T> = v.iter().step_by(stride).copied().collect();
    if (v.len() - 1) % stride != 0 {
        out.push(v[v.len() - 1]);
    }
    out
}

impl Ctx {
    fn params(&self) -> &Params {
        &self.cfg.params
    }

    fn path(&self, name: &str) -> Result<PathBuf, Failure> {
        let dir = &self.cfg.output.dir;
        std::fs::create_dir_all(dir).map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir.join(name))
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.path(name)?;
        let f = File::create(&path).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    fn write_text(&self, name: &str, text: &str) -> Result<(), Failure> {
        let mut w = self.create(name)?;
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn write_json(&self, name: &str, v: &impl Serialize) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(v).map_err(|e| Failure::invariant(e.to_string()))?;
        self.write_text(name, &text)
    }

    fn hash(&self) -> Option<&str> {
        Some(&self.hash)
    }

    /// The configured table, checked against the run parameters.
    fn table(&self) -> Result<Option<GenFunTable>, Failure> {
        let Some(path) = &self.cfg.table else {
            return Ok(None);
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        let t = GenFunTable::from_json(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let p = self.params();
        if t.a != p.a || t.i_max != p.i_max || t.j_max < p.j_max {
            return Err(Failure::config(format!(
                "table {} has a = {}, I_max = {}, J_max = {}; the run needs a = {}, I_max = {}, J_max >= {}",
                path.display(),
                t.a,
                t.i_max,
                t.j_max,
                p.a,
                p.i_max,
                p.j_max
            )));
        }
        Ok(Some(t))
    }

    fn setup(&self) -> Result<Setup, Failure> {
        Ok(setup(self.params(), self.table()?)?)
    }

    fn initial(&self, grid: &Grid, fallback: &str) -> Result<Initial, Failure> {
        let spec = self.cfg.initial.clone().unwrap_or_default();
        if let Some(path) = spec.csv {
            let f = read_nodal_csv(&path, grid)?;
            return Ok(Initial::Nodes(path, f));
        }
        let src = spec.expr.unwrap_or_else(|| fallback.to_string());
        if src.trim() == "0" {
            return Ok(Initial::Zero);
        }
        let e = Expr::parse(&src).map_err(|m| Failure::config(format!("initial expression: {m}")))?;
        Ok(Initial::Expr(src, e))
    }

    fn write_norm_history(&self, sim: &Simulation) -> Result<(), Failure> {
        let rows = strided(&sim.norm_history(), self.cfg.output.stride);
        io::write_series_csv(self.create("norm_history.csv")?, ["t", "norm"], &rows, self.hash())?;
        Ok(())
    }

    fn write_flat(&self, z: &FlatOutput, grid: &Grid) -> Result<(), Failure> {
        let t0 = z.t_start();
        let ts: Vec<f64> = strided(&grid.t, self.cfg.output.stride).into_iter().filter(|t| *t >= t0).collect();
        self.write_text("flat_output.json", &io::flat_output_json(z, &ts, self.params().i_max)?)
    }

    fn check_report(&self, report: &BoundReport) -> Result<(), Failure> {
        if report.passed() {
            return Ok(());
        }
        let msg = format!("{} generating-function samples exceed their bound", report.violations.len());
        if self.strict {
            return Err(Failure::invariant(msg));
        }
        eprintln!("warning: {msg}");
        Ok(())
    }
}

/// Largest residual of the assembled series over short windows around
/// `centers`, relative to the largest `|u|` seen in those windows. A coarse
/// x grid keeps the third-derivative matrix from amplifying rounding.
fn series_residual(table: &GenFunTable, z: &FlatOutput, p: &Params, centers: &[f64]) -> Result<f64, Failure> {
    let delta = 1e-4 * p.t_final;
    let base = Grid::chebyshev(&Params {
        nx: 25,
        ny: 33,
        ..p.clone()
    })?;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &c in centers {
        let c = c.clamp(z.t_start() + 4.0 * delta, p.t_final - 4.0 * delta);
        let grid = base.with_times((0..9).map(|k| c + delta * (k as f64 - 4.0)).collect());
        let u = assemble_state(table, z, &grid)?;
        scale = scale.max(sup(u.values.iter().copied()));
        worst = worst.max(pde_residual(&u, &grid, p)?);
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

fn null_centers(p: &Params) -> Vec<f64> {
    [0.02, 0.1, 0.35, 0.65, 0.9].iter().map(|f| p.tau + f * (p.t_final - p.tau)).collect()
}

/// Per-mode energy reports plus the identity summed over modes, relative to
/// the total initial energy, so modes at rounding level do not dominate.
fn energy_summary(evs: &[ModeEvolution]) -> Value {
    let reports: Vec<_> = evs.iter().map(|ev| ev.energy_report()).collect();
    let total: f64 = reports.iter().map(|r| r.initial).sum();
    let scale = if total > 0.0 { total } else { 1.0 };
    let defect: f64 = reports
        .iter()
        .map(|r| r.residual * if r.initial > 0.0 { r.initial } else { 1.0 })
        .sum();
    let loss: f64 = reports.iter().map(|r| r.start_loss * r.initial).sum();
    json!({
        "total_initial": total,
        "residual": defect / scale,
        "start_loss": loss / scale,
        "modes": reports,
    })
}

fn profiles_of(u0: &Field2, grid: &Grid, basis: &TransverseBasis) -> Result<Vec<DVector<f64>>, Failure> {
    let modes = u0.modes(grid, basis)?;
    Ok(modes
        .outer_iter()
        .map(|r| DVector::from_iterator(r.len(), r.iter().copied()))
        .collect())
}

pub fn gentable(ctx: &Ctx) -> Result<(), Failure> {
    let s = ctx.setup()?;
    let report = check_bound(&s.table, &sample_points(101));
    let xs = sample_points(101);
    let mut ode: f64 = 0.0;
    for j in 1..=s.table.j_max {
        for i in 0..=s.table.i_max {
            ode = ode.max(s.table.ode_residual(i, j, &xs)?);
        }
    }
    ctx.write_text("table.json", &s.table.to_json()?)?;
    ctx.write_json("bound_report.json", &report)?;
    ctx.write_json(
        "summary.json",
        &json!({
            "command": "gentable",
            "config_hash": ctx.hash,
            "a": s.table.a,
            "i_max": s.table.i_max,
            "j_max": s.table.j_max,
            "entries": (s.table.i_max + 1) * s.table.j_max,
            "bound_passed": report.passed(),
            "violations": report.violations.len(),
            "max_ratio": report.max_ratio,
            "c1_constant": report.c1_constant,
            "max_ode_residual": ode,
        }),
    )?;
    ctx.check_report(&report)
}

/// Residual of the simulated state over nine time nodes around the middle of
/// the run, relative to the largest `|u|` there. `None` for too few nodes.
fn simulation_residual(sim: &Simulation, p: &Params) -> Result<Option<f64>, Failure> {
    let n = sim.times.len();
    if n < 9 {
        return Ok(None);
    }
    let mid = (n / 2).clamp(4, n - 5);
    let grid = Grid::chebyshev(&Params {
        nx: 25,
        ny: 33,
        ..p.clone()
    })?
    .with_times(sim.times[mid - 4..=mid + 4].to_vec());
    let u = sim.field(&grid)?;
    let scale = sup(u.values.iter().copied());
    let r = pde_residual(&u, &grid, p)?;
    Ok(Some(if scale > 0.0 { r / scale } else { r }))
}

pub fn null(ctx: &Ctx) -> Result<(), Failure> {
    let s = ctx.setup()?;
    let init = ctx.initial(&s.grid, DEFAULT_U0)?;
    let u0 = init.field(&s.grid);
    let run = run_null_from(s, u0, &ctx.cfg.solver)?;
    let (p, grid) = (&run.setup.params, &run.setup.grid);
    let residual = series_residual(&run.setup.table, &run.flat, p, &null_centers(p))?;

    io::write_control_csv(ctx.create("control.csv")?, &run.control, ctx.hash())?;
    ctx.write_text("control_modes.json", &io::control_modes_json(&run.control)?)?;
    io::write_field_csv(ctx.create("terminal.csv")?, &run.terminal, grid, ctx.hash())?;
    ctx.write_norm_history(&run.sim)?;
    ctx.write_flat(&run.flat, grid)?;
    ctx.write_json("bound_report.json", &run.bound_report)?;

    let rel = run.relative_terminal();
    let tol = ctx.cfg.tolerances.terminal;
    ctx.write_json(
        "summary.json",
        &json!({
            "command": "null",
            "config_hash": ctx.hash,
            "params": p,
            "initial": init.describe(),
            "initial_norm": run.initial_norm,
            "terminal_norm": run.terminal_norm,
            "relative_terminal": rel,
            "tolerance": tol,
            "passed": rel <= tol,
            "control_sup_before_tau": run.control.sup_before(p.tau),
            "series_residual": residual,
            "bound_passed": run.bound_report.passed(),
            "flat_bounds": { "r": run.flat_bounds.r, "m": run.flat_bounds.m },
            "truncation": run.truncation,
            "energy": energy_summary(&run.free),
            "warnings": run.sim.warnings,
        }),
    )?;
    ctx.check_report(&run.bound_report)?;
    if rel > tol {
        return Err(Failure::tolerance(format!("relative terminal norm {rel:.3e} exceeds {tol:.1e}")));
    }
    eprintln!("null: ||u(T)|| / ||u0|| = {rel:.3e}");
    Ok(())
}

pub fn reach(ctx: &Ctx) -> Result<(), Failure> {
    let s = ctx.setup()?;
    let target = TargetSpec::Exact(ctx.cfg.target.clone());
    let run = run_reach(s, &target, &ctx.cfg.interp, &ctx.cfg.solver)?;
    let (p, grid) = (&run.setup.params, &run.setup.grid);
    let mut centers = null_centers(p);
    centers.push(p.t_final);
    let residual = series_residual(&run.setup.table, &run.flat, p, &centers)?;

    io::write_control_csv(ctx.create("control.csv")?, &run.control, ctx.hash())?;
    ctx.write_text("control_modes.json", &io::control_modes_json(&run.control)?)?;
    io::write_field_csv(ctx.create("terminal.csv")?, &run.terminal, grid, ctx.hash())?;
    io::write_field_csv(ctx.create("target.csv")?, &run.target, grid, ctx.hash())?;
    ctx.write_norm_history(&run.sim)?;
    ctx.write_flat(&run.flat, grid)?;
    ctx.write_text("coefficients.json", &io::reach_coefficients_json(&run.coefficients)?)?;
    ctx.write_json("bound_report.json", &run.bound_report)?;

    let rel = run.error.relative_l2;
    let tol = ctx.cfg.tolerances.terminal;
    ctx.write_json(
        "summary.json",
        &json!({
            "command": "reach",
            "config_hash": ctx.hash,
            "params": p,
            "target": target.describe(),
            "error": run.error,
            "tolerance": tol,
            "passed": rel <= tol,
            "compatibility": run.compatibility,
            "series_residual": residual,
            "bound_passed": run.bound_report.passed(),
            "flat_bounds": { "r": run.flat_bounds.r, "m": run.flat_bounds.m },
            "truncation": run.truncation,
            "warnings": run.sim.warnings,
        }),
    )?;
    ctx.check_report(&run.bound_report)?;
    if ctx.strict && !run.compatibility.passed {
        return Err(Failure::invariant("target fails the compatibility conditions"));
    }
    if rel > tol {
        return Err(Failure::tolerance(format!("relative terminal error {rel:.3e} exceeds {tol:.1e}")));
    }
    eprintln!("reach: relative terminal error {rel:.3e}");
    Ok(())
}

fn free_evolution(ctx: &Ctx) -> Result<(Initial, Vec<ModeEvolution>), Failure> {
    let p = ctx.params();
    p.validate()?;
    let grid = Grid::chebyshev(p)?;
    let basis = make_basis(p.j_max)?;
    let init = ctx.initial(&grid, DEFAULT_U0)?;
    let profiles = profiles_of(&init.field(&grid), &grid, &basis)?;
    let evs = evolve_free(&profiles, p, &grid.x, &grid.t, &ctx.cfg.solver)?;
    Ok((init, evs))
}

fn free_norms(evs: &[ModeEvolution]) -> Vec<(f64, f64)> {
    (0..evs[0].times.len())
        .map(|k| {
            let s: f64 = evs.iter().map(|ev| ev.op.norm_sq(&ev.snapshots[k])).sum();
            (evs[0].times[k], s.sqrt())
        })
        .collect()
}

fn check_energy(ctx: &Ctx, energy: &Value, always: bool) -> Result<(), Failure> {
    let worst = energy["residual"].as_f64().unwrap_or(f64::INFINITY);
    let tol = ctx.cfg.tolerances.energy;
    if worst <= tol {
        return Ok(());
    }
    let msg = format!("energy identity residual {worst:.3e} exceeds {tol:.1e}");
    if always || ctx.strict {
        return Err(Failure::invariant(msg));
    }
    eprintln!("warning: {msg}");
    Ok(())
}

pub fn free(ctx: &Ctx) -> Result<(), Failure> {
    let (init, evs) = free_evolution(ctx)?;
    let stride = ctx.cfg.output.stride;
    io::write_snapshots_csv(ctx.create("snapshots.csv")?, &evs, stride, ctx.hash())?;
    let norms = strided(&free_norms(&evs), stride);
    io::write_series_csv(ctx.create("norm_history.csv")?, ["t", "norm"], &norms, ctx.hash())?;
    let energy = energy_summary(&evs);
    ctx.write_json("energy.json", &energy)?;
    ctx.write_json(
        "summary.json",
        &json!({
            "command": "free",
            "config_hash": ctx.hash,
            "params": ctx.params(),
            "initial": init.describe(),
            "initial_norm": norms[0].1,
            "terminal_norm": norms[norms.len() - 1].1,
            "energy_residual": energy["residual"],
            "energy_start_loss": energy["start_loss"],
            "energy_tolerance": ctx.cfg.tolerances.energy,
        }),
    )?;
    check_energy(ctx, &energy, false)
}

pub fn simulate(ctx: &Ctx) -> Result<(), Failure> {
    let p = ctx.params();
    p.validate()?;
    let path = ctx
        .cfg
        .control
        .as_ref()
        .ok_or_else(|| Failure::config("simulate needs a control file (`control` or --control)"))?;
    let file = File::open(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let basis = make_basis(p.j_max)?;
    let h = io::read_control_csv(std::io::BufReader::new(file), &basis)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let grid = Grid::chebyshev(p)?.with_times(h.t.clone());
    let init = ctx.initial(&grid, "0")?;
    let u0 = init.field(&grid);
    let sim = simulate_controlled(&u0, &grid, &h, p, &ctx.cfg.solver)?;
    let terminal = sim.terminal(&grid);
    let residual = simulation_residual(&sim, p)?;

    io::write_field_csv(ctx.create("terminal.csv")?, &terminal, &grid, ctx.hash())?;
    ctx.write_norm_history(&sim)?;
    for w in &sim.warnings {
        eprintln!("warning: {w}");
    }
    let initial_norm = l2_norm(&u0, &grid);
    let terminal_norm = l2_norm(&terminal, &grid);
    ctx.write_json(
        "summary.json",
        &json!({
            "command": "simulate",
            "config_hash": ctx.hash,
            "params": p,
            "control": path.display().to_string(),
            "initial": init.describe(),
            "time_nodes": h.t.len(),
            "initial_norm": initial_norm,
            "terminal_norm": terminal_norm,
            "relative_terminal": if initial_norm > 0.0 { terminal_norm / initial_norm } else { terminal_norm },
            "residual_mid": residual,
            "warnings": sim.warnings,
        }),
    )
}

#[derive(Serialize)]
struct Constant {
    name: String,
    value: f64,
    source: &'static str,
}

pub fn bounds(ctx: &Ctx) -> Result<(), Failure> {
    let (init, evs) = free_evolution(ctx)?;
    let s = ctx.setup()?;
    let p = &s.params;
    let table_report = check_bound(&s.table, &sample_points(101));
    let flat = null_flat_output(&evs, p)?;
    let flat_bounds = fit_flat_bounds(&flat, p.i_max, BOUND_SAMPLES)?;
    let truncation = truncation_bound(p, &flat_bounds, table_report.c1_constant, &[]);

    let mut constants = vec![
        Constant {
            name: "C1".into(),
            value: table_report.c1_constant,
            source: "largest |g_ij| (2i)! / exp(sqrt(lambda_j)) over the table samples",
        },
        Constant {
            name: "R".into(),
            value: flat_bounds.r,
            source: "derivative ratios of the null flat output on [tau, T]",
        },
        Constant {
            name: "r0".into(),
            value: r0(p.a),
            source: "closed form",
        },
    ];
    for (jm, m) in flat_bounds.m.iter().enumerate() {
        constants.push(Constant {
            name: format!("M_{}", jm + 1),
            value: *m,
            source: "fitted to sup |z_j^(i)| on [tau, T]",
        });
    }

    let stride = ctx.cfg.output.stride;
    let smoothing: Vec<_> = evs.iter().flat_map(|ev| smoothing_profile(ev, SMOOTHING_ORDER, stride)).collect();
    let slopes: Vec<Value> = smoothing_slopes(&smoothing, p.tau)
        .into_iter()
        .map(|(j, n, slope)| json!({ "j": j, "n": n, "slope": slope }))
        .collect();
    let trace: Vec<Value> = evs
        .iter()
        .map(|ev| {
            let k = ev.node_index(p.tau).map_err(Failure::from)?;
            let d = trace_f_derivs(ev, ev.times[k], TRACE_ORDER)?;
            Ok(json!({ "j": ev.j(), "t": ev.times[k], "derivatives": d }))
        })
        .collect::<Result<_, Failure>>()?;

    let energy = energy_summary(&evs);
    ctx.write_json(
        "bounds.json",
        &json!({
            "command": "bounds",
            "config_hash": ctx.hash,
            "params": p,
            "initial": init.describe(),
            "table": table_report,
            "constants": constants,
            "flat_bounds": flat_bounds,
            "truncation": truncation,
            "energy": energy,
            "smoothing": smoothing,
            "smoothing_slopes": slopes,
            "trace_derivatives": trace,
        }),
    )?;
    if !table_report.passed() {
        return Err(Failure::invariant(format!(
            "{} generating-function samples exceed their bound",
            table_report.violations.len()
        )));
    }
    check_energy(ctx, &energy, true)
}

/// Long-format copies of artifacts: every row gains a leading `series`
/// column naming the file it came from.
pub fn plotdata(ctx: &Ctx, paths: &[PathBuf]) -> Result<(), Failure> {
    for path in paths {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Failure::config(format!("bad artifact path {}", path.display())))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        let (header, rows) = if path.extension().is_some_and(|e| e == "json") {
            bound_rows(&text).ok_or_else(|| Failure::config(format!("{}: no bound rows", path.display())))?
        } else {
            csv_rows(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
        };
        let mut w = ctx.create(&format!("plot_{stem}.csv"))?;
        writeln!(w, "# config-hash: {}", ctx.hash)?;
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut w);
        let mut head = vec!["series".to_string()];
        head.extend(header);
        out.write_record(&head).map_err(|e| Failure::config(e.to_string()))?;
        for r in rows {
            let mut rec = vec![stem.to_string()];
            rec.extend(r);
            out.write_record(&rec).map_err(|e| Failure::config(e.to_string()))?;
        }
        out.flush()?;
        drop(out);
        w.flush()?;
    }
    Ok(())
}

type Table = (Vec<String>, Vec<Vec<String>>);

fn csv_rows(text: &str) -> Result<Table, csv::Error> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rd.headers()?.iter().map(String::from).collect();
    let rows = rd
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

/// `i, j, value, bound` rows of a bound report, alone or inside `bounds.json`.
fn bound_rows(text: &str) -> Option<Table> {
    let v: Value = serde_json::from_str(text).ok()?;
    let rows = v.get("rows").or_else(|| v.get("table")?.get("rows"))?.as_array()?;
    let cols = ["i", "j", "value", "bound"];
    let out = rows
        .iter()
        .map(|r| cols.iter().map(|c| r.get(*c).map(|v| v.to_string())).collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>()?;
    Some((cols.iter().map(|c| c.to_string()).collect(), out))
}
