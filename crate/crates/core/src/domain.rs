//! Parameters, tensor grids on `(-1,0) x (0,1) x [0,T]`, the transverse
//! sine basis and the transforms between samples and mode coefficients.

use crate::cheb;
use crate::error::{invalid, Error, Result};
use ndarray::{Array2, Array3, ArrayView1};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

/// Physical and synthesis parameters.
///
/// `nx`, `ny` and `nt` are node counts, so the time step is `T / (nt - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub a: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub tau: f64,
    pub s: f64,
    #[serde(rename = "M")]
    pub steepness: f64,
    pub i_max: usize,
    pub j_max: usize,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            a: 1.0,
            t_final: 1.0,
            tau: 0.4,
            s: 1.6,
            steepness: 1.0,
            i_max: 15,
            j_max: 4,
            nx: 64,
            ny: 65,
            nt: 2001,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(invalid("a", format!("must be positive, got {}", self.a)));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(invalid("T", format!("must be positive, got {}", self.t_final)));
        }
        if !(self.tau > 0.0 && self.tau < self.t_final) {
            return Err(invalid(
                "tau",
                format!("need 0 < tau < T, got tau={} T={}", self.tau, self.t_final),
            ));
        }
        if !(self.s > 1.0 && self.s < 2.0) {
            return Err(invalid("s", format!("need 1 < s < 2, got {}", self.s)));
        }
        if !(self.steepness.is_finite() && self.steepness > 0.0) {
            return Err(invalid("M", format!("must be positive, got {}", self.steepness)));
        }
        if self.j_max < 1 {
            return Err(invalid("j_max", "must be at least 1"));
        }
        for (name, n) in [("nx", self.nx), ("ny", self.ny), ("nt", self.nt)] {
            if n < 2 {
                return Err(invalid(name, format!("need at least 2 nodes, got {n}")));
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_final / (self.nt - 1) as f64
    }

    pub fn lambda(j: usize) -> f64 {
        let k = j as f64 * PI;
        k * k
    }

    /// `mu = lambda_j - a`.
    pub fn mu(&self, j: usize) -> f64 {
        Params::lambda(j) - self.a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XKind {
    Uniform,
    Chebyshev,
}

/// Tensor grid. The x nodes are either uniform or Chebyshev–Lobatto.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub x_kind: XKind,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|k| a + h * k as f64).collect();
    v[n - 1] = b;
    v
}

impl Grid {
    pub fn uniform(p: &Params) -> Result<Grid> {
        p.validate()?;
        Ok(Grid {
            x: linspace(-1.0, 0.0, p.nx),
            y: linspace(0.0, 1.0, p.ny),
            t: linspace(0.0, p.t_final, p.nt),
            x_kind: XKind::Uniform,
        })
    }

    pub fn chebyshev(p: &Params) -> Result<Grid> {
        p.validate()?;
        Ok(Grid {
            x: cheb::nodes(p.nx),
            y: linspace(0.0, 1.0, p.ny),
            t: linspace(0.0, p.t_final, p.nt),
            x_kind: XKind::Chebyshev,
        })
    }

    /// Same grid with a different set of time nodes.
    pub fn with_times(&self, t: Vec<f64>) -> Grid {
        Grid {
            t,
            ..self.clone()
        }
    }

    pub fn x_weights(&self) -> Vec<f64> {
        match self.x_kind {
            XKind::Uniform => simpson_weights(&self.x),
            XKind::Chebyshev => cheb::clenshaw_curtis(self.x.len()),
        }
    }

    pub fn y_weights(&self) -> Vec<f64> {
        simpson_weights(&self.y)
    }
}

/// Composite Simpson weights on uniform nodes; an even node count closes
/// with a 3/8 panel at the right end.
pub fn simpson_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    let h = (nodes[n - 1] - nodes[0]) / (n - 1) as f64;
    if n == 2 {
        w[0] = h / 2.0;
        w[1] = h / 2.0;
        return w;
    }
    if n == 4 {
        for (k, c) in [3.0, 9.0, 9.0, 3.0].iter().enumerate() {
            w[k] = c * h / 8.0;
        }
        return w;
    }
    let simpson_end = if n % 2 == 1 { n - 1 } else { n - 4 };
    let mut k = 0;
    while k < simpson_end {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
        k += 2;
    }
    if n % 2 == 0 {
        for (m, c) in [3.0, 9.0, 9.0, 3.0].iter().enumerate() {
            w[simpson_end + m] += c * h / 8.0;
        }
    }
    w
}

/// The transverse eigenbasis `e_j(y) = sqrt(2) sin(j pi y)`, `lambda_j = (j pi)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseBasis {
    pub j_max: usize,
    pub lambdas: Vec<f64>,
}

pub fn make_basis(j_max: usize) -> Result<TransverseBasis> {
    if j_max < 1 {
        return Err(invalid("j_max", "must be at least 1"));
    }
    Ok(TransverseBasis {
        j_max,
        lambdas: (1..=j_max).map(Params::lambda).collect(),
    })
}

impl TransverseBasis {
    pub fn lambda(&self, j: usize) -> f64 {
        self.lambdas[j - 1]
    }

    pub fn eval(&self, j: usize, y: f64) -> f64 {
        e(j, y)
    }

    fn check_grid(&self, y: &[f64]) -> Result<()> {
        if y.len() < 2 * self.j_max + 1 {
            return Err(Error::GridTooCoarse(format!(
                "ny={} cannot resolve {} sine modes (need ny >= {})",
                y.len(),
                self.j_max,
                2 * self.j_max + 1
            )));
        }
        Ok(())
    }

    /// `c_j = int_0^1 f e_j dy` by composite Simpson on the y nodes.
    pub fn analyze(&self, y: &[f64], f: ArrayView1<f64>) -> Result<Vec<f64>> {
        self.check_grid(y)?;
        let w = simpson_weights(y);
        Ok((1..=self.j_max)
            .map(|j| {
                y.iter()
                    .zip(&w)
                    .zip(f.iter())
                    .map(|((&y, &w), &f)| w * f * e(j, y))
                    .sum()
            })
            .collect())
    }

    pub fn synthesize(&self, y: &[f64], c: &[f64]) -> Vec<f64> {
        y.iter()
            .map(|&y| c.iter().enumerate().map(|(k, c)| c * e(k + 1, y)).sum())
            .collect()
    }
}

/// `sqrt(2) sin(j pi y)`, exactly zero at both ends of `[0, 1]`.
pub fn e(j: usize, y: f64) -> f64 {
    if y == 0.0 || y == 1.0 {
        return 0.0;
    }
    SQRT_2 * (j as f64 * PI * y).sin()
}

/// q-th y-derivative of `e_j`.
pub fn e_deriv(j: usize, y: f64, q: usize) -> f64 {
    let k = j as f64 * PI;
    let phase = match q % 4 {
        0 => (k * y).sin(),
        1 => (k * y).cos(),
        2 => -(k * y).sin(),
        _ => -(k * y).cos(),
    };
    SQRT_2 * k.powi(q as i32) * phase
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldTag {
    State,
    Initial,
    Target,
}

/// Samples on the x-y grid, indexed `[ix, iy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2 {
    pub values: Array2<f64>,
    pub tag: FieldTag,
}

/// Samples on the x-y-t grid, indexed `[it, ix, iy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3 {
    pub values: Array3<f64>,
    pub tag: FieldTag,
}

impl Field2 {
    pub fn zeros(grid: &Grid, tag: FieldTag) -> Field2 {
        Field2 {
            values: Array2::zeros((grid.x.len(), grid.y.len())),
            tag,
        }
    }

    pub fn from_fn(grid: &Grid, tag: FieldTag, f: impl Fn(f64, f64) -> f64) -> Field2 {
        let values = Array2::from_shape_fn((grid.x.len(), grid.y.len()), |(i, k)| {
            f(grid.x[i], grid.y[k])
        });
        Field2 { values, tag }
    }

    pub fn check_shape(&self, grid: &Grid) -> Result<()> {
        if self.values.dim() != (grid.x.len(), grid.y.len()) {
            return Err(Error::GridTooCoarse(format!(
                "field shape {:?} does not match grid {}x{}",
                self.values.dim(),
                grid.x.len(),
                grid.y.len()
            )));
        }
        Ok(())
    }

    /// Per-mode x profiles: row `j-1` holds `c_j(x)` at every x node.
    pub fn modes(&self, grid: &Grid, basis: &TransverseBasis) -> Result<Array2<f64>> {
        self.check_shape(grid)?;
        let mut out = Array2::zeros((basis.j_max, grid.x.len()));
        for ix in 0..grid.x.len() {
            let c = basis.analyze(&grid.y, self.values.row(ix))?;
            for (j, c) in c.into_iter().enumerate() {
                out[(j, ix)] = c;
            }
        }
        Ok(out)
    }

    /// Inverse of [`Field2::modes`].
    pub fn from_modes(grid: &Grid, modes: &Array2<f64>, tag: FieldTag) -> Field2 {
        Field2::from_fn_indexed(grid, tag, |ix, iy| {
            (0..modes.nrows())
                .map(|j| modes[(j, ix)] * e(j + 1, grid.y[iy]))
                .sum()
        })
    }

    fn from_fn_indexed(grid: &Grid, tag: FieldTag, f: impl Fn(usize, usize) -> f64) -> Field2 {
        Field2 {
            values: Array2::from_shape_fn((grid.x.len(), grid.y.len()), |(i, k)| f(i, k)),
            tag,
        }
    }
}

impl Field3 {
    pub fn slice(&self, it: usize) -> Field2 {
        Field2 {
            values: self.values.index_axis(ndarray::Axis(0), it).to_owned(),
            tag: self.tag,
        }
    }
}

/// Tensor-product quadrature approximation of the L2 norm over the domain.
pub fn l2_norm(f: &Field2, grid: &Grid) -> f64 {
    let wx = grid.x_weights();
    let wy = grid.y_weights();
    let mut s = 0.0;
    for (ix, wx) in wx.iter().enumerate() {
        for (iy, wy) in wy.iter().enumerate() {
            let v = f.values[(ix, iy)];
            s += wx * wy * v * v;
        }
    }
    s.max(0.0).sqrt()
}
