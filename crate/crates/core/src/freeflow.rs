//! Free evolution of one transverse mode,
//! `d/dt u + u''' + (a - lambda_j) u' = 0` on `(-1, 0)` with
//! `u(-1) = u(0) = u'(0) = 0`, by Chebyshev collocation in x and
//! Crank–Nicolson in t.
//!
//! The collocation state keeps the nodes `x_2 .. x_{N-1}` as unknowns,
//! sets `u(-1) = u(0) = 0`, and slaves `u(x_1)` to `u'(0) = 0`. The
//! equation is collocated on the unknown nodes.

use crate::cheb;
use crate::domain::Params;
use crate::error::{invalid, Error, Result};
use crate::modal::ModalBasis;
use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Implicit Euler half-steps that replace the first two Crank–Nicolson
/// steps when the initial data violates the boundary conditions.
pub const DAMPED_HALF_STEPS: usize = 4;

#[derive(Debug, Clone)]
pub struct ModeOperator {
    pub j: usize,
    pub mu: f64,
    pub x: Vec<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub d3: DMatrix<f64>,
    /// `D3 - mu D1` on all nodes, without boundary rows.
    pub l: DMatrix<f64>,
    /// Reduced state to nodal values (`n x (n-3)`).
    pub lift: DMatrix<f64>,
    /// Collocated operator on the reduced state.
    pub reduced: DMatrix<f64>,
    /// Clenshaw–Curtis weights.
    pub weights: Vec<f64>,
}

pub fn build_mode_operator(j: usize, p: &Params, x_nodes: &[f64]) -> Result<ModeOperator> {
    let n = x_nodes.len();
    if n < 16 {
        return Err(Error::GridTooCoarse(format!("mode operator needs nx >= 16, got {n}")));
    }
    let expected = cheb::nodes(n);
    if expected.iter().zip(x_nodes).any(|(a, b)| (a - b).abs() > 1e-14) {
        return Err(invalid("x_nodes", "mode operator needs Chebyshev–Lobatto nodes"));
    }
    if j < 1 {
        return Err(invalid("j", "mode index starts at 1"));
    }
    let mu = p.mu(j);
    let mut d = cheb::diff_matrices(n, 3).into_iter();
    let (d1, d2, d3) = (d.next().unwrap(), d.next().unwrap(), d.next().unwrap());
    let l = &d3 - &d1 * mu;

    let last = n - 1;
    let m = n - 3;
    let mut lift = DMatrix::<f64>::zeros(n, m);
    for k in 0..m {
        lift[(k + 2, k)] = 1.0;
        lift[(1, k)] = -d1[(last, k + 2)] / d1[(last, 1)];
    }
    let reduced = (&l * &lift).rows(2, m).into_owned();
    Ok(ModeOperator {
        j,
        mu,
        x: x_nodes.to_vec(),
        d1,
        d2,
        d3,
        l,
        lift,
        reduced,
        weights: cheb::clenshaw_curtis(n),
    })
}

impl ModeOperator {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn reduced_dim(&self) -> usize {
        self.x.len() - 3
    }

    /// `u''' + (a - lambda_j) u'` at every node.
    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.l * u
    }

    pub fn to_nodal(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.lift * v
    }

    pub fn to_reduced(&self, u: &DVector<f64>) -> DVector<f64> {
        u.rows(2, self.reduced_dim()).into_owned()
    }

    /// `[u(-1), u(0), u'(0)]`.
    pub fn boundary_values(&self, u: &DVector<f64>) -> [f64; 3] {
        let last = self.n() - 1;
        [u[0], u[last], (self.d1.row(last) * u)[0]]
    }

    /// `u''(0)`.
    pub fn trace(&self, u: &DVector<f64>) -> f64 {
        (self.d2.row(self.n() - 1) * u)[0]
    }

    /// `u'(-1)`.
    pub fn flux(&self, u: &DVector<f64>) -> f64 {
        (self.d1.row(0) * u)[0]
    }

    pub fn norm_sq(&self, u: &DVector<f64>) -> f64 {
        u.iter().zip(&self.weights).map(|(u, w)| w * u * u).sum()
    }

    pub fn weighted_norm_sq(&self, u: &DVector<f64>) -> f64 {
        u.iter()
            .zip(&self.weights)
            .zip(&self.x)
            .map(|((u, w), x)| w * (x + 1.0) * u * u)
            .sum()
    }

    /// Projection of nodal data onto the boundary-condition subspace,
    /// minimal in the quadrature norm. Returns the reduced state and the
    /// relative size of the correction.
    pub fn project(&self, u: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let n = self.n();
        let last = n - 1;
        let mut b = DMatrix::<f64>::zeros(3, n);
        b[(0, 0)] = 1.0;
        b[(1, last)] = 1.0;
        b.row_mut(2).copy_from(&self.d1.row(last));
        let winv = DVector::from_iterator(n, self.weights.iter().map(|w| 1.0 / w));
        let mut bw = b.clone();
        for k in 0..n {
            bw.column_mut(k).scale_mut(winv[k]);
        }
        let gram = &bw * b.transpose();
        let rhs = &b * u;
        let lam = gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("boundary projection".into()))?;
        let corr = bw.transpose() * lam;
        let projected = u - &corr;
        let base = self.norm_sq(u).sqrt();
        let rel = if base > 0.0 { self.norm_sq(&corr).sqrt() / base } else { 0.0 };
        Ok((self.to_reduced(&projected), rel))
    }
}

/// Whether to replace the first two steps by damped implicit Euler half-steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DampedStart {
    /// Only when the initial data needed projection.
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreeFlowOptions {
    pub damped_start: DampedStart,
    /// Relative projection size above which data counts as incompatible.
    pub compat_tol: f64,
    /// Earliest time for derivative extraction, in units of dt.
    pub t_min_steps: usize,
    /// Keep eigenmodes with `|nu| dt <= z_keep`.
    pub z_keep: f64,
    /// At most this many eigenmodes per transverse mode.
    pub k_max: usize,
    /// Largest derivative order of the trace.
    pub n_d: usize,
}

impl Default for FreeFlowOptions {
    fn default() -> Self {
        FreeFlowOptions {
            damped_start: DampedStart::Auto,
            compat_tol: 1e-10,
            t_min_steps: 10,
            z_keep: 1.0,
            k_max: 12,
            n_d: 40,
        }
    }
}

/// Crank–Nicolson stepper for `dv/dt = -A v + F(t)` on the reduced state.
pub struct Stepper<'a> {
    op: &'a ModeOperator,
    dt: f64,
    implicit: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    explicit: DMatrix<f64>,
}

/// One recorded step: end state and the quadrature of `|u'(-1)|^2` and the
/// weighted-identity dissipation over the step.
struct StepRecord {
    state: DVector<f64>,
    flux: f64,
    dissipation: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(op: &'a ModeOperator, dt: f64) -> Result<Stepper<'a>> {
        let m = op.reduced_dim();
        let id = DMatrix::<f64>::identity(m, m);
        let implicit_m = &id + &op.reduced * (dt / 2.0);
        let explicit = &id - &op.reduced * (dt / 2.0);
        let implicit = implicit_m.lu();
        if !implicit.is_invertible() {
            return Err(Error::Singular(format!("Crank–Nicolson matrix for mode {}", op.j)));
        }
        Ok(Stepper {
            op,
            dt,
            implicit,
            explicit,
        })
    }

    fn dissipation(&self, u: &DVector<f64>) -> f64 {
        let du = &self.op.d1 * u;
        3.0 * self.op.norm_sq(&du) + self.op.mu * self.op.norm_sq(u)
    }

    fn crank_nicolson(&self, v: &DVector<f64>, f0: Option<&DVector<f64>>, f1: Option<&DVector<f64>>) -> Result<StepRecord> {
        let mut rhs = &self.explicit * v;
        if let Some(f) = f0 {
            rhs.axpy(self.dt / 2.0, f, 1.0);
        }
        if let Some(f) = f1 {
            rhs.axpy(self.dt / 2.0, f, 1.0);
        }
        let next = self
            .implicit
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("Crank–Nicolson step".into()))?;
        let mid = self.op.to_nodal(&((v + &next) * 0.5));
        Ok(StepRecord {
            flux: self.dt * self.op.flux(&mid).powi(2),
            dissipation: self.dt * self.dissipation(&mid),
            state: next,
        })
    }

    /// Implicit Euler over `dt / 2`; it shares the Crank–Nicolson matrix.
    fn half_euler(&self, v: &DVector<f64>, f1: Option<&DVector<f64>>) -> Result<StepRecord> {
        let mut rhs = v.clone();
        if let Some(f) = f1 {
            rhs.axpy(self.dt / 2.0, f, 1.0);
        }
        let next = self
            .implicit
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("implicit Euler step".into()))?;
        let end = self.op.to_nodal(&next);
        Ok(StepRecord {
            flux: self.dt / 2.0 * self.op.flux(&end).powi(2),
            dissipation: self.dt / 2.0 * self.dissipation(&end),
            state: next,
        })
    }
}

/// Forcing in reduced coordinates as a function of time.
pub type Forcing<'f> = &'f (dyn Fn(f64) -> DVector<f64> + Sync);

/// Integration metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub method: String,
    pub dt: f64,
    pub damped_half_steps: usize,
    pub projection: f64,
}

/// Snapshots of one mode at every time node.
#[derive(Debug, Clone)]
pub struct ModeEvolution {
    pub op: ModeOperator,
    pub times: Vec<f64>,
    /// Nodal values at each time node.
    pub snapshots: Vec<DVector<f64>>,
    pub scheme: Scheme,
    /// `int |u'(-1)|^2 dt` over each step.
    pub step_flux: Vec<f64>,
    /// `int 3 |u'|^2 + (lambda - a) |u|^2 dx dt` over each step.
    pub step_dissipation: Vec<f64>,
    pub(crate) options: FreeFlowOptions,
    modal: OnceLock<ModalBasis>,
}

/// Integrate one mode from nodal initial data, optionally forced.
pub fn integrate_mode(
    op: &ModeOperator,
    u0: &DVector<f64>,
    times: &[f64],
    forcing: Option<Forcing>,
    opts: &FreeFlowOptions,
) -> Result<ModeEvolution> {
    if times.len() < 2 {
        return Err(invalid("nt", "need at least two time nodes"));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial data"));
    }
    let dt = times[1] - times[0];
    let (v0, projection) = op.project(u0)?;
    let damped = match opts.damped_start {
        DampedStart::Always => true,
        DampedStart::Never => false,
        DampedStart::Auto => projection > opts.compat_tol,
    };
    let stepper = Stepper::new(op, dt)?;
    let force = |t: f64| forcing.map(|f| f(t));

    let nt = times.len();
    let mut states = Vec::with_capacity(nt);
    let mut step_flux = Vec::with_capacity(nt - 1);
    let mut step_dissipation = Vec::with_capacity(nt - 1);
    states.push(v0);
    let mut k = 0;
    let mut half_steps = 0;
    if damped {
        let pairs = (DAMPED_HALF_STEPS / 2).min(nt - 1);
        for _ in 0..pairs {
            let mut v = states[k].clone();
            let mut flux = 0.0;
            let mut diss = 0.0;
            for h in 1..=2 {
                let t1 = times[k] + dt * h as f64 / 2.0;
                let rec = stepper.half_euler(&v, force(t1).as_ref())?;
                flux += rec.flux;
                diss += rec.dissipation;
                v = rec.state;
                half_steps += 1;
            }
            states.push(v);
            step_flux.push(flux);
            step_dissipation.push(diss);
            k += 1;
        }
    }
    let mut f_prev = force(times[k]);
    while k + 1 < nt {
        let f_next = force(times[k + 1]);
        let rec = stepper.crank_nicolson(&states[k], f_prev.as_ref(), f_next.as_ref())?;
        if rec.state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time integration"));
        }
        states.push(rec.state);
        step_flux.push(rec.flux);
        step_dissipation.push(rec.dissipation);
        f_prev = f_next;
        k += 1;
    }
    let snapshots = states.iter().map(|v| op.to_nodal(v)).collect();
    Ok(ModeEvolution {
        op: op.clone(),
        times: times.to_vec(),
        snapshots,
        scheme: Scheme {
            method: "crank-nicolson".into(),
            dt,
            damped_half_steps: half_steps,
            projection,
        },
        step_flux,
        step_dissipation,
        options: *opts,
        modal: OnceLock::new(),
    })
}

/// Free evolution of each mode. `u0_modes[j-1]` holds the nodal profile of mode `j`.
pub fn evolve_free(
    u0_modes: &[DVector<f64>],
    p: &Params,
    x_nodes: &[f64],
    times: &[f64],
    opts: &FreeFlowOptions,
) -> Result<Vec<ModeEvolution>> {
    use rayon::prelude::*;
    u0_modes
        .par_iter()
        .enumerate()
        .map(|(jm, u0)| {
            let op = build_mode_operator(jm + 1, p, x_nodes)?;
            integrate_mode(&op, u0, times, None, opts)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub j: usize,
    pub initial: f64,
    pub terminal: f64,
    pub boundary_flux: f64,
    /// `|terminal + boundary_flux - initial| / initial`, counted from the
    /// end of the damped start
    pub residual: f64,
    /// Energy removed by the damped start beyond its boundary flux, relative.
    pub start_loss: f64,
    pub weighted_initial: f64,
    pub weighted_terminal: f64,
    pub dissipation: f64,
    pub weighted_residual: f64,
    /// Largest increase of the norm between consecutive snapshots, relative.
    pub max_increase: f64,
    /// Largest boundary-condition defect over all snapshots.
    pub bc_defect: f64,
}

impl ModeEvolution {
    pub fn j(&self) -> usize {
        self.op.j
    }

    pub fn dt(&self) -> f64 {
        self.scheme.dt
    }

    pub fn t_min(&self) -> f64 {
        self.times[0] + self.options.t_min_steps as f64 * self.dt()
    }

    pub fn options(&self) -> &FreeFlowOptions {
        &self.options
    }

    /// Index of a time node, tolerating rounding in `t`.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let k = ((t - self.times[0]) / self.dt()).round();
        if k < 0.0 || k as usize >= self.times.len() || (self.times[k as usize] - t).abs() > 1e-9 * self.dt().max(1.0) {
            return Err(invalid("t", format!("{t} is not a time node")));
        }
        Ok(k as usize)
    }

    pub fn energy_report(&self) -> EnergyReport {
        let op = &self.op;
        let norms: Vec<f64> = self.snapshots.iter().map(|u| op.norm_sq(u)).collect();
        let initial = norms[0];
        let terminal = *norms.last().unwrap();
        let boundary_flux: f64 = self.step_flux.iter().sum();
        let k0 = self.scheme.damped_half_steps / 2;
        let start_flux: f64 = self.step_flux[..k0].iter().sum();
        let weighted_initial = op.weighted_norm_sq(&self.snapshots[0]);
        let weighted_terminal = op.weighted_norm_sq(self.snapshots.last().unwrap());
        let dissipation: f64 = self.step_dissipation.iter().sum();
        let scale = if initial > 0.0 { initial } else { 1.0 };
        let max_increase = norms
            .windows(2)
            .map(|w| (w[1] - w[0]) / scale)
            .fold(0.0, f64::max);
        let bc_defect = self
            .snapshots
            .iter()
            .flat_map(|u| op.boundary_values(u))
            .map(f64::abs)
            .fold(0.0, f64::max);
        EnergyReport {
            j: op.j,
            initial,
            terminal,
            boundary_flux,
            residual: (terminal + boundary_flux - start_flux - norms[k0]).abs() / scale,
            start_loss: (initial - norms[k0] - start_flux) / scale,
            weighted_initial,
            weighted_terminal,
            dissipation,
            weighted_residual: (weighted_terminal + dissipation - weighted_initial).abs() / scale,
            max_increase,
            bc_defect,
        }
    }

    /// `f_j(t_k) = u''(0, t_k)`.
    pub fn trace_at(&self, k: usize) -> f64 {
        self.op.trace(&self.snapshots[k])
    }
}

pub fn trace_f(ev: &ModeEvolution, t: f64) -> Result<f64> {
    Ok(ev.trace_at(ev.node_index(t)?))
}

impl ModeEvolution {
    /// Slow eigenmodes of this mode's operator, computed on first use.
    pub fn modal(&self) -> Result<&ModalBasis> {
        if let Some(m) = self.modal.get() {
            return Ok(m);
        }
        let m = ModalBasis::compute(&self.op, self.dt(), self.options.z_keep, self.options.k_max)?;
        Ok(self.modal.get_or_init(|| m))
    }

    /// Modal coefficients of the snapshot at node `k`.
    pub fn modal_coefficients(&self, k: usize) -> Result<Vec<num_complex::Complex64>> {
        let basis = self.modal()?;
        Ok(basis.coefficients(&self.op.to_reduced(&self.snapshots[k])))
    }

    /// Trace derivatives at `t`, propagated on the slow eigenmodes from the
    /// last time node at or before `t`.
    pub fn trace_derivs_at(&self, t: f64, n_max: usize) -> Result<Vec<f64>> {
        let t_min = self.t_min();
        if t < t_min - 1e-12 * self.dt() {
            return Err(Error::BeforeSmoothing { t, t_min });
        }
        if n_max > self.options.n_d {
            return Err(invalid("n_max", format!("at most {}, got {n_max}", self.options.n_d)));
        }
        let last = self.times.len() - 1;
        let k = (((t - self.times[0]) / self.dt()) + 1e-9).floor().clamp(0.0, last as f64) as usize;
        let coeffs = self.modal_coefficients(k)?;
        Ok(self.modal()?.trace_derivs(&coeffs, t - self.times[k], n_max))
    }
}

/// `f_j^(n)(t)` for `n = 0..=n_max` at a time node `t >= t_min`.
pub fn trace_f_derivs(ev: &ModeEvolution, t: f64, n_max: usize) -> Result<Vec<f64>> {
    let k = ev.node_index(t)?;
    ev.trace_derivs_at(ev.times[k], n_max)
}

/// `||L^n u_j(t)||` at one time node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingRow {
    pub j: usize,
    pub t: f64,
    pub n: usize,
    pub norm: f64,
}

/// `||L^n u_j(t)||` for `n <= n_max` at every `stride`-th node from `t_min` on.
/// Collocation powers of `L` lose about three digits per order, so keep `n_max` small.
pub fn smoothing_profile(ev: &ModeEvolution, n_max: usize, stride: usize) -> Vec<SmoothingRow> {
    let first = ev.options.t_min_steps.min(ev.times.len() - 1);
    let mut rows = Vec::new();
    for k in (first..ev.times.len()).step_by(stride.max(1)) {
        let mut u = ev.snapshots[k].clone();
        for n in 0..=n_max {
            if n > 0 {
                u = ev.op.apply(&u);
            }
            rows.push(SmoothingRow {
                j: ev.j(),
                t: ev.times[k],
                n,
                norm: ev.op.norm_sq(&u).sqrt(),
            });
        }
    }
    rows
}

/// Least-squares slope of `ln ||L^n u_j(t)||` against `ln t` for each `(j, n)`,
/// over rows with `t <= t_max` and a positive norm.
pub fn smoothing_slopes(rows: &[SmoothingRow], t_max: f64) -> Vec<(usize, usize, f64)> {
    let mut keys: Vec<(usize, usize)> = rows.iter().map(|r| (r.j, r.n)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .filter_map(|(j, n)| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.j == j && r.n == n && r.t <= t_max && r.t > 0.0 && r.norm > 0.0)
                .map(|r| (r.t.ln(), r.norm.ln()))
                .collect();
            if pts.len() < 2 {
                return None;
            }
            let m = pts.len() as f64;
            let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / m, a.1 + p.1 / m));
            let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            (den > 0.0).then(|| (j, n, num / den))
        })
        .collect()
}
