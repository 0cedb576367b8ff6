//! Series assembly of the state and the boundary control.

use super::flat::{FlatKind, FlatOutput};
use crate::cheb;
use crate::domain::{e, Field3, FieldTag, Grid, Params};
use crate::error::{invalid, Error, Result};
use crate::freeflow::ModeEvolution;
use crate::genfun::{ln_factorial, GenFunTable};
use ndarray::{Array2, Array3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

fn check_table(table: &GenFunTable, z: &FlatOutput) -> Result<()> {
    if z.j_max() > table.j_max {
        return Err(invalid("j_max", "flat output has more modes than the table"));
    }
    Ok(())
}

/// `G[j-1][ix][i] = g_{i,j}^{(kx)}(x)`
fn profile_matrix(table: &GenFunTable, j_max: usize, x: &[f64], kx: usize) -> Vec<Array2<f64>> {
    (0..j_max)
        .map(|jm| {
            Array2::from_shape_fn((x.len(), table.i_max + 1), |(ix, i)| table.entries[jm][i].eval(x[ix], kx))
        })
        .collect()
}

/// `d_x^kx` of `sum_j sum_i g_{i,j}(x) z_j^{(i)}(t) e_j(y)` on the grid.
pub fn assemble_state_deriv(table: &GenFunTable, z: &FlatOutput, grid: &Grid, kx: usize) -> Result<Field3> {
    check_table(table, z)?;
    let j_max = z.j_max();
    let g = profile_matrix(table, j_max, &grid.x, kx);
    let ey = Array2::from_shape_fn((j_max, grid.y.len()), |(jm, iy)| e(jm + 1, grid.y[iy]));
    let (nx, ny) = (grid.x.len(), grid.y.len());
    let slices = grid
        .t
        .par_iter()
        .map(|&t| {
            let mut slab = Array2::<f64>::zeros((nx, ny));
            for jm in 0..j_max {
                let zd = z.derivs(jm + 1, t, table.i_max)?;
                for ix in 0..nx {
                    let u: f64 = (0..=table.i_max).map(|i| g[jm][(ix, i)] * zd[i]).sum();
                    if u != 0.0 {
                        for iy in 0..ny {
                            slab[(ix, iy)] += u * ey[(jm, iy)];
                        }
                    }
                }
            }
            Ok(slab)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = Array3::zeros((grid.t.len(), nx, ny));
    for (it, s) in slices.into_iter().enumerate() {
        values.index_axis_mut(ndarray::Axis(0), it).assign(&s);
    }
    Ok(Field3 {
        values,
        tag: FieldTag::State,
    })
}

/// `u(x, y, t) = sum_j sum_i g_{i,j}(x) z_j^{(i)}(t) e_j(y)`.
pub fn assemble_state(table: &GenFunTable, z: &FlatOutput, grid: &Grid) -> Result<Field3> {
    assemble_state_deriv(table, z, grid, 0)
}

/// The free evolution `sum_j u_j(x, t) e_j(y)` at the grid times, which must be
/// nodes of the evolutions; x values are interpolated when the grids differ.
pub fn free_state(evs: &[ModeEvolution], grid: &Grid) -> Result<Field3> {
    let (nx, ny) = (grid.x.len(), grid.y.len());
    let mut values = Array3::zeros((grid.t.len(), nx, ny));
    for (it, &t) in grid.t.iter().enumerate() {
        for ev in evs {
            let k = ev.node_index(t)?;
            let snap = &ev.snapshots[k];
            let same = snap.len() == nx && ev.op.x.iter().zip(&grid.x).all(|(a, b)| a == b);
            for ix in 0..nx {
                let u = if same {
                    snap[ix]
                } else {
                    cheb::interpolate(snap.as_slice(), grid.x[ix])
                };
                for iy in 0..ny {
                    values[(it, ix, iy)] += u * e(ev.j(), grid.y[iy]);
                }
            }
        }
    }
    Ok(Field3 {
        values,
        tag: FieldTag::State,
    })
}

/// Null-control state: the free evolution on `[0, tau]`, the series after.
pub fn assemble_null_state(table: &GenFunTable, z: &FlatOutput, evs: &[ModeEvolution], grid: &Grid) -> Result<Field3> {
    if z.kind != FlatKind::Null {
        return Err(invalid("flat output", "expected a null-control flat output"));
    }
    let tau = z.step.tau;
    let (early, late): (Vec<f64>, Vec<f64>) = grid.t.iter().partition(|t| **t <= tau);
    let a = free_state(evs, &grid.with_times(early.clone()))?;
    let b = assemble_state(table, z, &grid.with_times(late))?;
    let mut values = Array3::zeros((grid.t.len(), grid.x.len(), grid.y.len()));
    values.slice_mut(ndarray::s![..early.len(), .., ..]).assign(&a.values);
    values.slice_mut(ndarray::s![early.len().., .., ..]).assign(&b.values);
    Ok(Field3 {
        values,
        tag: FieldTag::State,
    })
}

/// Samples `h(y, t)` and mode coefficients of a boundary control.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    /// `h[[it, iy]]`
    pub h: Array2<f64>,
    /// `modes[[j-1, it]] = h_j(t)`
    pub modes: Array2<f64>,
    /// Analytic `h_j'(t)` when the signal comes from a synthesis.
    pub modes_dt: Option<Array2<f64>>,
    pub tau: f64,
    pub kind: Option<FlatKind>,
}

impl ControlSignal {
    pub fn j_max(&self) -> usize {
        self.modes.nrows()
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|v| *v == 0.0) && self.modes_dt.as_ref().is_none_or(|d| d.iter().all(|v| *v == 0.0))
    }

    /// `sup |h|` over the samples with `t < t_end`.
    pub fn sup_before(&self, t_end: f64) -> f64 {
        self.t
            .iter()
            .enumerate()
            .filter(|(_, t)| **t < t_end)
            .flat_map(|(it, _)| self.h.row(it).to_vec())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Zero control on the given samples.
    pub fn zero(t: Vec<f64>, y: Vec<f64>, j_max: usize) -> ControlSignal {
        ControlSignal {
            h: Array2::zeros((t.len(), y.len())),
            modes: Array2::zeros((j_max, t.len())),
            modes_dt: Some(Array2::zeros((j_max, t.len()))),
            t,
            y,
            tau: 0.0,
            kind: None,
        }
    }
}

/// `(h_j(t), h_j'(t)) = sum_i g_{i,j}(-1) (z_j^{(i)}(t), z_j^{(i+1)}(t))` without splicing.
pub fn mode_control(table: &GenFunTable, z: &FlatOutput, j: usize, t: f64) -> Result<(f64, f64)> {
    let zd = z.derivs(j, t, table.i_max + 1)?;
    let mut h = 0.0;
    let mut dh = 0.0;
    for i in 0..=table.i_max {
        let g = table.get(i, j)?.eval(-1.0, 0);
        h += g * zd[i];
        dh += g * zd[i + 1];
    }
    Ok((h, dh))
}

/// `h(y, t) = sum_j sum_i g_{i,j}(-1) z_j^{(i)}(t) e_j(y)`. For a null
/// synthesis the free trace `u(-1, y, t) = 0` is used on `[0, tau)`.
pub fn assemble_control(table: &GenFunTable, z: &FlatOutput, grid: &Grid) -> Result<ControlSignal> {
    check_table(table, z)?;
    let j_max = z.j_max();
    let tau = z.step.tau;
    let per_t = grid
        .t
        .par_iter()
        .map(|&t| {
            if z.kind == FlatKind::Null && t < tau {
                return Ok(vec![(0.0, 0.0); j_max]);
            }
            (1..=j_max).map(|j| mode_control(table, z, j, t)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let nt = grid.t.len();
    let modes = Array2::from_shape_fn((j_max, nt), |(jm, it)| per_t[it][jm].0);
    let modes_dt = Array2::from_shape_fn((j_max, nt), |(jm, it)| per_t[it][jm].1);
    let h = Array2::<f64>::from_shape_fn((nt, grid.y.len()), |(it, iy)| {
        (0..j_max).map(|jm| modes[(jm, it)] * e(jm + 1, grid.y[iy])).sum()
    });
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("control signal"));
    }
    Ok(ControlSignal {
        t: grid.t.clone(),
        y: grid.y.clone(),
        h,
        modes,
        modes_dt: Some(modes_dt),
        tau,
        kind: Some(z.kind),
    })
}

/// Fitted `|z_j^{(i)}(t)| <= M_j (2i)! / R^{2i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatBounds {
    /// `sup_t |z_j^{(i)}|`, indexed `[j-1][i]`
    pub sup: Vec<Vec<f64>>,
    pub m: Vec<f64>,
    pub r: f64,
    pub samples: usize,
}

/// Samples `z_j^{(i)}` for `i <= i_max + 1` on `n` points of the interval
/// where the series is used (`[tau, T]` for null, `[0, T]` for reach).
pub fn fit_flat_bounds(z: &FlatOutput, i_max: usize, n: usize) -> Result<FlatBounds> {
    if n < 2 || i_max < 2 {
        return Err(invalid("samples", "need n >= 2 and i_max >= 2"));
    }
    let t0 = match z.kind {
        FlatKind::Null => z.step.tau.max(z.t_start()),
        FlatKind::Reach => 0.0,
    };
    let t1 = z.step.t_final;
    let ts: Vec<f64> = (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect();
    let sup = (1..=z.j_max())
        .map(|j| {
            let rows = ts
                .par_iter()
                .map(|&t| z.derivs(j, t, i_max + 1))
                .collect::<Result<Vec<_>>>()?;
            Ok((0..=i_max + 1)
                .map(|i| rows.iter().map(|r| r[i].abs()).fold(0.0, f64::max))
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;

    // R from the ratios Z_i / Z_{i+1} over the upper half of the derivative range
    let mut r = f64::INFINITY;
    for col in &sup {
        for i in i_max.div_ceil(2)..i_max {
            if col[i + 1] > 0.0 {
                let two_i = 2.0 * i as f64;
                let ri = ((two_i + 2.0) * (two_i + 1.0) * col[i] / col[i + 1]).sqrt();
                r = r.min(ri);
            }
        }
    }
    if !r.is_finite() {
        r = 1.0;
    }
    let m = sup
        .iter()
        .map(|col| {
            col.iter()
                .enumerate()
                .map(|(i, v)| v * (2.0 * i as f64 * r.ln() - ln_factorial(2 * i)).exp())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(FlatBounds {
        sup,
        m,
        r,
        samples: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub i_max: usize,
    pub j_max: usize,
    pub c1: f64,
    pub r: f64,
    pub m: Vec<f64>,
    /// Dropped terms with `i > I_max`, `j <= J_max`.
    pub i_tail: f64,
    /// Dropped modes `j > J_max` with supplied constants.
    pub j_tail: f64,
    pub total: f64,
}

/// Bound on the dropped part of the series, using `|g_{i,j}| <= C_1 e^{sqrt(lambda_j)} / (2i)!`
/// and `|z_j^{(i)}| <= M_j (2i)! / R^{2i}`: each term is at most
/// `C_1 M_j e^{sqrt(lambda_j)} R^{-2i}`. `extra_m[k]` is `M_j` for `j = J_max + 1 + k`.
pub fn truncation_bound(p: &Params, bounds: &FlatBounds, c1: f64, extra_m: &[f64]) -> TruncationReport {
    let j_max = bounds.m.len();
    let q = bounds.r.powi(-2);
    let (geom_tail, geom_all) = if q < 1.0 {
        (q.powi(p.i_max as i32 + 1) / (1.0 - q), 1.0 / (1.0 - q))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let weight = |j: usize, m: f64| if m == 0.0 { 0.0 } else { c1 * m * Params::lambda(j).sqrt().exp() };
    let i_tail: f64 = bounds
        .m
        .iter()
        .enumerate()
        .map(|(jm, m)| weight(jm + 1, *m) * geom_tail)
        .filter(|v| !v.is_nan())
        .fold(0.0, |a, v| a + v);
    let j_tail: f64 = extra_m
        .iter()
        .enumerate()
        .map(|(k, m)| weight(j_max + 1 + k, *m) * geom_all)
        .filter(|v| !v.is_nan())
        .fold(0.0, |a, v| a + v);
    TruncationReport {
        i_max: p.i_max,
        j_max,
        c1,
        r: bounds.r,
        m: bounds.m.clone(),
        i_tail,
        j_tail,
        total: i_tail + j_tail,
    }
}
