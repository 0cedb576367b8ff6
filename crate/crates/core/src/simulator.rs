//! Mode-by-mode simulation of the boundary-controlled system, used to verify
//! synthesized controls independently of the series.

use crate::cheb;
use crate::domain::{l2_norm, Field2, Field3, FieldTag, Grid, Params, XKind};
use crate::error::{invalid, Error, Result};
use crate::freeflow::{build_mode_operator, integrate_mode, FreeFlowOptions, ModeEvolution, ModeOperator};
use crate::synthesis::ControlSignal;
use nalgebra::DVector;
use ndarray::{Array2, Array3, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One mode with inhomogeneous data `u(-1) = h_j(t)`, lifted by `w(x) = -x^3`.
#[derive(Debug, Clone)]
pub struct ControlledModeProblem {
    pub j: usize,
    pub op: ModeOperator,
    pub w: DVector<f64>,
    /// `L w` at the nodes.
    pub lw: DVector<f64>,
}

impl ControlledModeProblem {
    pub fn new(j: usize, p: &Params, x: &[f64]) -> Result<ControlledModeProblem> {
        let op = build_mode_operator(j, p, x)?;
        let w = DVector::from_iterator(x.len(), x.iter().map(|x| -x * x * x));
        let lw = op.apply(&w);
        Ok(ControlledModeProblem { j, op, w, lw })
    }
}

/// Nodal forcing `f(j, t)` added to mode `j`; only interior rows are used.
pub type ExtraForcing<'f> = &'f (dyn Fn(usize, f64) -> DVector<f64> + Sync);

/// Piecewise-linear samples on a uniform time grid.
struct Samples<'a> {
    t0: f64,
    dt: f64,
    v: &'a [f64],
}

impl Samples<'_> {
    fn at(&self, t: f64) -> f64 {
        let n = self.v.len();
        let s = ((t - self.t0) / self.dt).clamp(0.0, (n - 1) as f64);
        let k = (s.floor() as usize).min(n - 2);
        let r = s - k as f64;
        if r == 0.0 {
            self.v[k]
        } else {
            self.v[k] * (1.0 - r) + self.v[k + 1] * r
        }
    }
}

/// Second-order central differences with one-sided second-order ends.
pub fn finite_difference(v: &[f64], dt: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|k| match k {
            0 => (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt),
            _ if k == n - 1 => (3.0 * v[k] - 4.0 * v[k - 1] + v[k - 2]) / (2.0 * dt),
            _ => (v[k + 1] - v[k - 1]) / (2.0 * dt),
        })
        .collect()
}

fn uniform_step(t: &[f64]) -> Result<f64> {
    if t.len() < 3 {
        return Err(Error::GridTooCoarse("control needs at least 3 time samples".into()));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if !(dt > 0.0) || t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1e-300) + 1e-12) {
        return Err(Error::GridTooCoarse("control samples must be uniform in time".into()));
    }
    Ok(dt)
}

/// Simulated modes; `modes[j-1]` holds the homogeneous part `v_j`.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub x: Vec<f64>,
    pub times: Vec<f64>,
    pub modes: Vec<ModeEvolution>,
    /// `boundary[j-1][k] = h_j(t_k)`
    pub boundary: Vec<Vec<f64>>,
    pub w: DVector<f64>,
    pub warnings: Vec<String>,
}

impl Simulation {
    pub fn j_max(&self) -> usize {
        self.modes.len()
    }

    /// Nodal `u_j(x, t_k) = v_j + h_j(t_k) w`.
    pub fn mode_profile(&self, j: usize, k: usize) -> DVector<f64> {
        let h = self.boundary[j - 1][k];
        let v = &self.modes[j - 1].snapshots[k];
        if h == 0.0 {
            v.clone()
        } else {
            v + &self.w * h
        }
    }

    /// The state at time node `k` on the x-y nodes of `grid`.
    pub fn state(&self, k: usize, grid: &Grid) -> Field2 {
        let profiles: Vec<DVector<f64>> = (1..=self.j_max()).map(|j| self.mode_profile(j, k)).collect();
        let same = grid.x == self.x;
        let modes = Array2::from_shape_fn((self.j_max(), grid.x.len()), |(jm, ix)| {
            if same {
                profiles[jm][ix]
            } else {
                cheb::interpolate(profiles[jm].as_slice(), grid.x[ix])
            }
        });
        Field2::from_modes(grid, &modes, FieldTag::State)
    }

    pub fn terminal(&self, grid: &Grid) -> Field2 {
        self.state(self.times.len() - 1, grid)
    }

    /// The state at the grid times, which must be simulation nodes.
    pub fn field(&self, grid: &Grid) -> Result<Field3> {
        let mut values = Array3::zeros((grid.t.len(), grid.x.len(), grid.y.len()));
        for (it, &t) in grid.t.iter().enumerate() {
            let k = self.modes[0].node_index(t)?;
            values.index_axis_mut(Axis(0), it).assign(&self.state(k, grid).values);
        }
        Ok(Field3 {
            values,
            tag: FieldTag::State,
        })
    }

    /// `(t_k, ||u(t_k)||)` from the mode norms.
    pub fn norm_history(&self) -> Vec<(f64, f64)> {
        (0..self.times.len())
            .map(|k| {
                let s: f64 = (1..=self.j_max())
                    .map(|j| self.modes[j - 1].op.norm_sq(&self.mode_profile(j, k)))
                    .sum();
                (self.times[k], s.sqrt())
            })
            .collect()
    }
}

/// Simulate modes from nodal initial profiles. The time grid is `h.t`.
pub fn simulate_modes(
    u0_modes: &[DVector<f64>],
    h: &ControlSignal,
    p: &Params,
    x: &[f64],
    extra: Option<ExtraForcing>,
    opts: &FreeFlowOptions,
) -> Result<Simulation> {
    let dt = uniform_step(&h.t)?;
    let j_max = u0_modes.len().max(h.j_max());
    if j_max == 0 {
        return Err(invalid("modes", "nothing to simulate"));
    }
    let t0 = h.t[0];
    let zeros = vec![0.0; h.t.len()];
    let results = (1..=j_max)
        .into_par_iter()
        .map(|j| {
            let prob = ControlledModeProblem::new(j, p, x)?;
            let hj: Vec<f64> = if j <= h.j_max() {
                h.modes.row(j - 1).to_vec()
            } else {
                zeros.clone()
            };
            let dhj: Vec<f64> = match &h.modes_dt {
                Some(d) if j <= h.j_max() => d.row(j - 1).to_vec(),
                _ => finite_difference(&hj, dt),
            };
            let u0 = u0_modes.get(j - 1).cloned().unwrap_or_else(|| DVector::zeros(x.len()));
            let mut warning = None;
            if (u0[0] - hj[0]).abs() > 1e-8 * (1.0 + u0.amax()) {
                warning = Some(format!(
                    "mode {j}: initial trace {} differs from h_j(0) = {}",
                    u0[0], hj[0]
                ));
            }
            let v0 = &u0 - &prob.w * hj[0];
            let controlled = hj.iter().chain(&dhj).any(|v| *v != 0.0);
            let hs = Samples { t0, dt, v: &hj };
            let dhs = Samples { t0, dt, v: &dhj };
            let forcing = |t: f64| {
                let mut f = &prob.w * (-dhs.at(t)) - &prob.lw * hs.at(t);
                if let Some(g) = extra {
                    f += g(j, t);
                }
                prob.op.to_reduced(&f)
            };
            let ev = if controlled || extra.is_some() {
                integrate_mode(&prob.op, &v0, &h.t, Some(&forcing), opts)?
            } else {
                integrate_mode(&prob.op, &v0, &h.t, None, opts)?
            };
            Ok((ev, hj, warning))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut modes = Vec::with_capacity(j_max);
    let mut boundary = Vec::with_capacity(j_max);
    let mut warnings = Vec::new();
    for (ev, hj, w) in results {
        modes.push(ev);
        boundary.push(hj);
        warnings.extend(w);
    }
    Ok(Simulation {
        x: x.to_vec(),
        times: h.t.clone(),
        w: DVector::from_iterator(x.len(), x.iter().map(|x| -x * x * x)),
        modes,
        boundary,
        warnings,
    })
}

/// Simulate from initial data sampled on a Chebyshev grid.
pub fn simulate_controlled(
    u0: &Field2,
    grid: &Grid,
    h: &ControlSignal,
    p: &Params,
    opts: &FreeFlowOptions,
) -> Result<Simulation> {
    if grid.x_kind != XKind::Chebyshev {
        return Err(invalid("grid", "simulation needs Chebyshev x nodes"));
    }
    let basis = crate::domain::make_basis(p.j_max)?;
    let modes = u0.modes(grid, &basis)?;
    let u0_modes: Vec<DVector<f64>> = modes
        .outer_iter()
        .map(|row| DVector::from_iterator(row.len(), row.iter().copied()))
        .collect();
    simulate_modes(&u0_modes, h, p, &grid.x, None, opts)
}

/// `c_j = 2/(n-1) sum_k f_k sin(j pi y_k)` on uniform nodes including both ends.
fn sine_coefficients(f: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (1..n - 1)
        .map(|j| {
            2.0 / (n - 1) as f64 * f.iter().zip(y).map(|(f, y)| f * (j as f64 * PI * y).sin()).sum::<f64>()
        })
        .collect()
}

/// Max over interior nodes of `|u_t + u_xxx + u_xyy + a u_x|`. Spectral in x
/// (Chebyshev nodes) and y (sine series), sixth-order central differences in t.
pub fn pde_residual(u: &Field3, grid: &Grid, p: &Params) -> Result<f64> {
    if grid.x_kind != XKind::Chebyshev {
        return Err(invalid("grid", "residual needs Chebyshev x nodes"));
    }
    let (nt, nx, ny) = u.values.dim();
    if nt != grid.t.len() || nx != grid.x.len() || ny != grid.y.len() {
        return Err(Error::GridTooCoarse("field shape does not match grid".into()));
    }
    if nt < 7 || ny < 3 {
        return Err(Error::GridTooCoarse("residual needs nt >= 7 and ny >= 3".into()));
    }
    let dt = uniform_step(&grid.t)?;
    let d = cheb::diff_matrices(nx, 3);
    let (d1, d3) = (&d[0], &d[2]);
    const W: [f64; 3] = [3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
    let rows: Vec<f64> = (3..nt - 3)
        .into_par_iter()
        .map(|it| {
            let slab = u.values.index_axis(Axis(0), it);
            let mut worst: f64 = 0.0;
            let mut ux = Array2::<f64>::zeros((nx, ny));
            let mut uxxx = Array2::<f64>::zeros((nx, ny));
            for iy in 0..ny {
                let col = DVector::from_iterator(nx, slab.column(iy).iter().copied());
                let c1 = d1 * &col;
                let c3 = d3 * &col;
                for ix in 0..nx {
                    ux[(ix, iy)] = c1[ix];
                    uxxx[(ix, iy)] = c3[ix];
                }
            }
            for ix in 1..nx - 1 {
                let row: Vec<f64> = ux.row(ix).to_vec();
                let c = sine_coefficients(&row, &grid.y);
                for iy in 1..ny - 1 {
                    let y = grid.y[iy];
                    let uxyy: f64 = c
                        .iter()
                        .enumerate()
                        .map(|(k, c)| {
                            let k = (k + 1) as f64 * PI;
                            -k * k * c * (k * y).sin()
                        })
                        .sum();
                    let ut: f64 = W
                        .iter()
                        .enumerate()
                        .map(|(m, w)| w * (u.values[(it + m + 1, ix, iy)] - u.values[(it - m - 1, ix, iy)]))
                        .sum::<f64>()
                        / dt;
                    let r = ut + uxxx[(ix, iy)] + uxyy + p.a * ux[(ix, iy)];
                    worst = worst.max(r.abs());
                }
            }
            worst
        })
        .collect();
    Ok(rows.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldComparison {
    pub l2_error: f64,
    pub sup_error: f64,
    /// `||u - v|| / ||v||`, or the absolute error when `v = 0`.
    pub relative_l2: f64,
}

pub fn compare_fields(u: &Field2, v: &Field2, grid: &Grid) -> Result<FieldComparison> {
    u.check_shape(grid)?;
    v.check_shape(grid)?;
    let diff = Field2 {
        values: &u.values - &v.values,
        tag: FieldTag::State,
    };
    let l2_error = l2_norm(&diff, grid);
    let sup_error = diff.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let base = l2_norm(v, grid);
    Ok(FieldComparison {
        l2_error,
        sup_error,
        relative_l2: if base > 0.0 { l2_error / base } else { l2_error },
    })
}

/// `sum_j u_j(x) e_j(y)` from per-mode nodal profiles on the grid's x nodes.
pub fn field_from_profiles(profiles: &[DVector<f64>], grid: &Grid) -> Field2 {
    let modes = Array2::from_shape_fn((profiles.len(), grid.x.len()), |(jm, ix)| profiles[jm][ix]);
    Field2::from_modes(grid, &modes, FieldTag::State)
}
