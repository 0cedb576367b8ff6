//! Reachable targets `u_1`, their coefficients `b_{i,j}` and compatibility checks.

use super::flat::ReachCoefficients;
use crate::domain::{e, e_deriv, simpson_weights, Field2, FieldTag, Grid, TransverseBasis};
use crate::error::{invalid, Error, Result};
use crate::genfun::{ln_factorial, GenFunTable};
use crate::jet::binomial;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Least series degree of the callable view of an exact target.
const PARTIALS_DEGREE: usize = 48;
/// Multiple of the rounding estimate below which an integral coefficient is zero.
const NOISE_FACTOR: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetTerm {
    pub i: usize,
    pub j: usize,
    pub beta: f64,
}

/// Mixed partials `d_x^p d_y^q u_1(x, y)`, called as `f(p, q, x, y)`.
pub type PartialsFn = Arc<dyn Fn(usize, usize, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct CallableTarget {
    pub name: String,
    /// Highest available x and y derivative orders.
    pub max_px: usize,
    pub max_qy: usize,
    pub partials: PartialsFn,
}

impl fmt::Debug for CallableTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CallableTarget")
            .field("name", &self.name)
            .field("max_px", &self.max_px)
            .field("max_qy", &self.max_qy)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum TargetSpec {
    /// `u_1 = sum beta_{i,j} g_{i,j}(x) e_j(y)`
    Exact(Vec<TargetTerm>),
    Callable(CallableTarget),
}

impl TargetSpec {
    pub fn zero() -> TargetSpec {
        TargetSpec::Exact(Vec::new())
    }

    pub fn describe(&self) -> String {
        match self {
            TargetSpec::Exact(terms) if terms.is_empty() => "zero".into(),
            TargetSpec::Exact(terms) => terms
                .iter()
                .map(|t| format!("{}*g[{},{}]e[{}]", t.beta, t.i, t.j, t.j))
                .collect::<Vec<_>>()
                .join(" + "),
            TargetSpec::Callable(c) => c.name.clone(),
        }
    }

    fn check_terms(&self, table: &GenFunTable) -> Result<()> {
        if let TargetSpec::Exact(terms) = self {
            for t in terms {
                table.get(t.i, t.j)?;
                if !t.beta.is_finite() {
                    return Err(Error::NonFinite("target coefficient"));
                }
            }
        }
        Ok(())
    }

    /// The callable view of an exact combination, built on the series of `table`.
    pub fn partials(&self, table: &GenFunTable) -> Result<CallableTarget> {
        match self {
            TargetSpec::Callable(c) => Ok(c.clone()),
            TargetSpec::Exact(terms) => {
                self.check_terms(table)?;
                let degree = PARTIALS_DEGREE.max(3 * table.i_max + 8);
                let series = terms
                    .iter()
                    .map(|t| Ok((t.beta, t.j, table.extended(t.i, t.j, degree)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(CallableTarget {
                    name: self.describe(),
                    max_px: degree,
                    max_qy: usize::MAX,
                    partials: Arc::new(move |p, q, x, y| {
                        series
                            .iter()
                            .map(|(beta, j, g)| beta * g.eval(x, p) * e_deriv(*j, y, q))
                            .sum()
                    }),
                })
            }
        }
    }
}

/// `u_1` sampled on the x-y nodes of `grid`.
pub fn target_field(target: &TargetSpec, table: &GenFunTable, grid: &Grid) -> Result<Field2> {
    let f = match target {
        TargetSpec::Exact(terms) => {
            target.check_terms(table)?;
            let terms = terms.clone();
            return Ok(Field2::from_fn(grid, FieldTag::Target, |x, y| {
                terms
                    .iter()
                    .map(|t| t.beta * table.entries[t.j - 1][t.i].eval(x, 0) * e(t.j, y))
                    .sum()
            }));
        }
        TargetSpec::Callable(c) => c.partials.clone(),
    };
    Ok(Field2::from_fn(grid, FieldTag::Target, |x, y| f(0, 0, x, y)))
}

/// The terms of `P^n = d_x^n (Delta + a)^n` as
/// `(weight, x order, y order)`, followed by `extra_x` further x-derivatives.
fn p_power_terms(n: usize, a: f64, extra_x: usize) -> Vec<(f64, usize, usize)> {
    let mut out = Vec::new();
    for k in 0..=n {
        for m in 0..=k {
            let w = binomial(n, k) * binomial(k, m) * a.powi((n - k) as i32);
            out.push((w, n + 2 * m + extra_x, 2 * (k - m)));
        }
    }
    out
}

fn require_orders(c: &CallableTarget, terms: &[(f64, usize, usize)]) -> Result<()> {
    let px = terms.iter().map(|t| t.1).max().unwrap_or(0);
    let qy = terms.iter().map(|t| t.2).max().unwrap_or(0);
    if px > c.max_px || qy > c.max_qy {
        return Err(Error::Incompatible(format!(
            "target `{}` supplies derivatives up to ({}, {}), need ({px}, {qy})",
            c.name, c.max_px, c.max_qy
        )));
    }
    Ok(())
}

/// `b_{i,j}` for `i <= table.i_max`, `j <= basis.j_max`. Exact combinations
/// return their coefficients; callable targets use the integral definition
/// `(-1)^i int e_j d_x^2 P^i u_1(0, y) dy` with Simpson's rule on `y`.
/// An integral within rounding of the sum of its absolute terms counts as zero.
pub fn reach_coefficients(
    target: &TargetSpec,
    table: &GenFunTable,
    basis: &TransverseBasis,
    y: &[f64],
) -> Result<ReachCoefficients> {
    if basis.j_max > table.j_max {
        return Err(invalid("j_max", "exceeds the generating-function table"));
    }
    let mut b = vec![vec![0.0; table.i_max + 1]; basis.j_max];
    match target {
        TargetSpec::Exact(terms) => {
            target.check_terms(table)?;
            for t in terms {
                if t.j <= basis.j_max {
                    b[t.j - 1][t.i] += t.beta;
                }
            }
        }
        TargetSpec::Callable(c) => {
            if y.len() < 3 {
                return Err(Error::GridTooCoarse("need at least 3 y nodes".into()));
            }
            let w = simpson_weights(y);
            for i in 0..=table.i_max {
                let terms = p_power_terms(i, table.a, 2);
                require_orders(c, &terms)?;
                let trace: Vec<(f64, f64)> = y
                    .iter()
                    .map(|&y| weighted_sum(&terms, 0, &c.partials, 0.0, y))
                    .collect();
                for (j, col) in b.iter_mut().enumerate() {
                    let (v, noise) = trace.iter().zip(y).zip(&w).fold((0.0, 0.0), |(v, n), (((f, s), &y), w)| {
                        let ey = e(j + 1, y);
                        (v + w * f * ey, n + w * s * ey.abs())
                    });
                    // the terms of P^i cancel; anything at rounding level is zero
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    col[i] = if v.abs() <= NOISE_FACTOR * f64::EPSILON * noise { 0.0 } else { sign * v };
                }
            }
        }
    }
    if b.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reach coefficients"));
    }
    Ok(ReachCoefficients {
        b,
        source: target.describe(),
    })
}

/// `R_0 = (9(a+2))^{1/3} e^{1/(3e)}`.
pub fn r0(a: f64) -> f64 {
    (9.0 * (a + 2.0)).cbrt() * (1.0 / (3.0 * std::f64::consts::E)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub n_max: usize,
    /// Largest `|P^n u_1(0, y)|`, relative to the size of the summed terms on the domain.
    pub trace_defect: f64,
    /// Same for `d_x P^n u_1(0, y)`.
    pub flux_defect: f64,
    /// Same for `P^n u_1(x, 0)` and `P^n u_1(x, 1)`.
    pub side_defect: f64,
    /// Fitted Gevrey-2/3 constants `|d_x^p d_y^q u_1| <= C (p!)^{2/3} (q!)^{2/3} / (R_1^p R_2^q)`.
    pub r1: f64,
    pub r2: f64,
    pub c: f64,
    pub r0: f64,
    pub tol: f64,
    pub passed: bool,
}

fn weighted_sum(terms: &[(f64, usize, usize)], extra_x: usize, f: &PartialsFn, x: f64, y: f64) -> (f64, f64) {
    terms.iter().fold((0.0, 0.0), |(s, scale), (w, p, q)| {
        let v = w * f(p + extra_x, *q, x, y);
        (s + v, scale + v.abs())
    })
}

/// Slope fit of `ln m_k - (2/3) ln k!` against `k`; returns `(R, C)`.
fn gevrey_fit(m: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = m
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, v)| **v > 0.0)
        .map(|(k, v)| (k as f64, v.ln() - 2.0 / 3.0 * ln_factorial(k)))
        .collect();
    if pts.len() < 2 {
        return (f64::INFINITY, m.first().copied().unwrap_or(0.0));
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let r = (-num / den).exp();
    let c = m
        .iter()
        .enumerate()
        .map(|(k, v)| v * r.powi(k as i32) / (2.0 / 3.0 * ln_factorial(k)).exp())
        .fold(0.0, f64::max);
    (r, c)
}

/// Boundary identities of `P^n u_1` for `n <= n_max` and the Gevrey fit of `u_1`.
pub fn check_compatibility(
    target: &TargetSpec,
    n_max: usize,
    table: &GenFunTable,
    basis: &TransverseBasis,
) -> Result<CompatibilityReport> {
    let c = target.partials(table)?;
    let f = &c.partials;
    let ys: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let xs: Vec<f64> = (0..=20).map(|k| -1.0 + k as f64 / 20.0).collect();
    let mut trace_defect: f64 = 0.0;
    let mut flux_defect: f64 = 0.0;
    let mut side_defect: f64 = 0.0;
    for n in 0..=n_max {
        let terms = p_power_terms(n, table.a, 0);
        let mut need = terms.clone();
        need.push((1.0, n + 2 * n + 1, 0));
        require_orders(&c, &need)?;
        // defects are measured against the size of the summed terms over the whole sample grid
        let mut scale: f64 = 0.0;
        for &x in &xs {
            for &y in &ys {
                scale = scale.max(weighted_sum(&terms, 0, f, x, y).1);
                scale = scale.max(weighted_sum(&terms, 1, f, x, y).1);
            }
        }
        if scale == 0.0 {
            continue;
        }
        for &y in &ys {
            trace_defect = trace_defect.max(weighted_sum(&terms, 0, f, 0.0, y).0.abs() / scale);
            flux_defect = flux_defect.max(weighted_sum(&terms, 1, f, 0.0, y).0.abs() / scale);
        }
        for &x in &xs {
            let lo = weighted_sum(&terms, 0, f, x, 0.0).0.abs();
            let hi = weighted_sum(&terms, 0, f, x, 1.0).0.abs();
            side_defect = side_defect.max(lo.max(hi) / scale);
        }
    }

    let orders = (3 * table.i_max + 2).min(c.max_px).min(40);
    let orders_y = (2 * table.i_max + basis.j_max).min(c.max_qy).min(40);
    let sup = |p: usize, q: usize| {
        xs.iter()
            .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
            .map(|(x, y)| f(p, q, x, y).abs())
            .fold(0.0, f64::max)
    };
    let mx: Vec<f64> = (0..=orders).map(|p| sup(p, 0)).collect();
    let my: Vec<f64> = (0..=orders_y).map(|q| sup(0, q)).collect();
    let (r1, c1) = gevrey_fit(&mx);
    let (r2, c2) = gevrey_fit(&my);
    let tol = 1e-9;
    Ok(CompatibilityReport {
        n_max,
        trace_defect,
        flux_defect,
        side_defect,
        r1,
        r2,
        c: c1.max(c2),
        r0: r0(table.a),
        tol,
        passed: trace_defect <= tol && flux_defect <= tol && side_defect <= tol,
    })
}
