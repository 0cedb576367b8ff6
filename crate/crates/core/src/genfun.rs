//! Generating functions `g_{i,j}`: the x-profiles of the flat parametrization.
//!
//! `g_{0,j}` solves `g''' - mu g' = 0` with `g(0) = g'(0) = 0`, `g''(0) = 1`,
//! and `g_{i,j}` solves `g''' - mu g' = -g_{i-1,j}` with zero Cauchy data,
//! where `mu = lambda_j - a`. Both are computed as power series in `x`.

use crate::domain::{Params, TransverseBasis};
use crate::error::{invalid, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default truncation tolerance, relative to the l1 norm of the coefficients.
pub const SERIES_TOL: f64 = 1e-14;
/// Default degree cap.
pub const DEGREE_CAP: usize = 400;

/// Truncated power series `sum c_n x^n` on `[-1, 0]`.
///
/// `tail_bound` bounds the sum of absolute values of the dropped
/// coefficients, and hence the truncation error anywhere on `[-1, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    pub coeffs: Vec<f64>,
    pub tail_bound: f64,
}

impl PowerSeries {
    pub fn zero() -> PowerSeries {
        PowerSeries {
            coeffs: vec![0.0; 3],
            tail_bound: 0.0,
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// k-th derivative at `x` by Horner evaluation of the differentiated series.
    pub fn eval(&self, x: f64, k: usize) -> f64 {
        let n = self.coeffs.len();
        if k >= n {
            return 0.0;
        }
        let mut acc = 0.0;
        for m in (k..n).rev() {
            acc = acc * x + self.coeffs[m] * falling(m, k);
        }
        acc
    }

    /// `sum |c_n| + tail_bound`, a bound for `sup |g|` on `[-1, 0]`.
    pub fn l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum::<f64>() + self.tail_bound
    }
}

/// `m (m-1) ... (m-k+1)` as a float.
fn falling(m: usize, k: usize) -> f64 {
    ((m + 1 - k)..=m).fold(1.0, |acc, v| acc * v as f64)
}

/// Coefficient recursion for `g''' - mu g' = -prev` with `g(0) = g'(0) = 0`
/// and `g''(0) = 2 c2`.
fn solve(prev: Option<&PowerSeries>, mu: f64, c2: f64, tol: f64, cap: usize) -> Result<PowerSeries> {
    if !mu.is_finite() {
        return Err(invalid("mu", "must be finite"));
    }
    let d = |m: usize| prev.and_then(|p| p.coeffs.get(m).copied()).unwrap_or(0.0);
    let prev_deg = prev.map_or(0, |p| p.degree());
    let n_min = (prev_deg + 3).max(11);

    let mut c = vec![0.0, 0.0, c2];
    let mut l1 = c2.abs();
    loop {
        let n = c.len() - 1;
        if n >= n_min {
            let rho = mu.abs() / (n as f64 * (n + 1) as f64);
            let recent: f64 = c[n - 8..].iter().map(|v| v.abs()).sum();
            let floor = tol * l1.max(f64::MIN_POSITIVE);
            if rho < 0.5 && recent <= floor {
                let mut tail = (c[n - 1].abs() + c[n].abs()) * rho / (1.0 - rho);
                if let Some(p) = prev {
                    let k = p.degree() as f64;
                    tail += 2.0 * p.tail_bound / ((k + 2.0) * (k + 3.0) * (k + 4.0));
                }
                return Ok(PowerSeries {
                    coeffs: c,
                    tail_bound: tail,
                });
            }
        }
        if n >= cap {
            return Err(Error::SeriesNotConverged(cap));
        }
        let next = next_coeff(&c, d(n - 2), mu);
        if !next.is_finite() {
            return Err(Error::NonFinite("generating-function recursion"));
        }
        l1 += next.abs();
        c.push(next);
    }
}

/// `c_{m+3}` from the `x^m` coefficient of the equation, `m = c.len() - 3`,
/// where `d` is the `x^m` coefficient of the right-hand side source.
fn next_coeff(c: &[f64], d: f64, mu: f64) -> f64 {
    let m = c.len() - 3;
    let mf = m as f64;
    (mu * (mf + 1.0) * c[m + 1] - d) / ((mf + 3.0) * (mf + 2.0) * (mf + 1.0))
}

/// `g_{0,j}` for the given `a`.
pub fn g0(j: usize, a: f64) -> Result<PowerSeries> {
    if j < 1 {
        return Err(invalid("j", "mode index starts at 1"));
    }
    solve(None, Params::lambda(j) - a, 0.5, SERIES_TOL, DEGREE_CAP)
}

/// `g_{i,j}` from `g_{i-1,j}`.
pub fn g_next(prev: &PowerSeries, mu: f64) -> Result<PowerSeries> {
    solve(Some(prev), mu, 0.0, SERIES_TOL, DEGREE_CAP)
}

/// Closed form of `g_{0,j}` (and its derivatives up to order 3), used as a
/// cross-check of the recursion.
pub fn g0_closed(mu: f64, x: f64, k: usize) -> f64 {
    if mu > 0.0 {
        let r = mu.sqrt();
        match k {
            0 => ((r * x).cosh() - 1.0) / mu,
            1 => (r * x).sinh() / r,
            2 => (r * x).cosh(),
            _ => r * (r * x).sinh(),
        }
    } else if mu < 0.0 {
        let r = (-mu).sqrt();
        match k {
            0 => (1.0 - (r * x).cos()) / (-mu),
            1 => (r * x).sin() / r,
            2 => (r * x).cos(),
            _ => -r * (r * x).sin(),
        }
    } else {
        match k {
            0 => x * x / 2.0,
            1 => x,
            2 => 1.0,
            _ => 0.0,
        }
    }
}

/// All `g_{i,j}` for `0 <= i <= i_max`, `1 <= j <= j_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenFunTable {
    pub a: f64,
    pub i_max: usize,
    pub j_max: usize,
    /// `entries[j - 1][i]`
    pub entries: Vec<Vec<PowerSeries>>,
}

pub fn build_table(p: &Params, basis: &TransverseBasis) -> Result<GenFunTable> {
    build_table_for(p.a, p.i_max, basis.j_max)
}

pub fn build_table_for(a: f64, i_max: usize, j_max: usize) -> Result<GenFunTable> {
    if !(a.is_finite() && a > 0.0) {
        return Err(invalid("a", "must be positive"));
    }
    let entries = (1..=j_max)
        .into_par_iter()
        .map(|j| {
            let mu = Params::lambda(j) - a;
            let mut col = Vec::with_capacity(i_max + 1);
            col.push(g0(j, a)?);
            for i in 1..=i_max {
                let next = g_next(&col[i - 1], mu)?;
                col.push(next);
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GenFunTable {
        a,
        i_max,
        j_max,
        entries,
    })
}

impl GenFunTable {
    pub fn get(&self, i: usize, j: usize) -> Result<&PowerSeries> {
        if j < 1 || j > self.j_max || i > self.i_max {
            return Err(Error::TableOutOfRange {
                i,
                j,
                i_max: self.i_max,
                j_max: self.j_max,
            });
        }
        Ok(&self.entries[j - 1][i])
    }

    /// `g_{i,j}` with the coefficient recursion continued to at least
    /// `degree`, so derivatives up to that order at `x = 0` are exact.
    pub fn extended(&self, i: usize, j: usize, degree: usize) -> Result<PowerSeries> {
        self.get(i, j)?;
        let mu = self.mu(j);
        let mut prev: Option<PowerSeries> = None;
        for k in 0..=i {
            let mut g = self.entries[j - 1][k].clone();
            while g.coeffs.len() <= degree {
                let d = prev.as_ref().and_then(|p| p.coeffs.get(g.coeffs.len() - 3).copied()).unwrap_or(0.0);
                let next = next_coeff(&g.coeffs, d, mu);
                g.coeffs.push(next);
            }
            prev = Some(g);
        }
        Ok(prev.unwrap())
    }

    pub fn mu(&self, j: usize) -> f64 {
        Params::lambda(j) - self.a
    }

    /// `max |g''' - mu g' + g_{i-1}|` over `samples`, relative to the largest
    /// `|g'''| + |mu g'| + |g_{i-1}|` there.
    pub fn ode_residual(&self, i: usize, j: usize, samples: &[f64]) -> Result<f64> {
        let g = self.get(i, j)?;
        let prev = if i > 0 { Some(self.get(i - 1, j)?) } else { None };
        let mu = self.mu(j);
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for &x in samples {
            let pv = prev.map_or(0.0, |p| p.eval(x, 0));
            let (d3, d1) = (g.eval(x, 3), mu * g.eval(x, 1));
            scale = scale.max(d3.abs() + d1.abs() + pv.abs());
            worst = worst.max((d3 - d1 + pv).abs());
        }
        Ok(if scale > 0.0 { worst / scale } else { worst })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = TableDoc {
            version: TABLE_VERSION,
            a: self.a,
            i_max: self.i_max,
            j_max: self.j_max,
            entries: self
                .entries
                .iter()
                .enumerate()
                .flat_map(|(jm, col)| {
                    col.iter().enumerate().map(move |(i, ps)| EntryDoc {
                        i,
                        j: jm + 1,
                        degree: ps.degree(),
                        tail_bound: ps.tail_bound,
                        coeffs: ps.coeffs.clone(),
                    })
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<GenFunTable> {
        let doc: TableDoc = serde_json::from_str(s)?;
        if doc.version != TABLE_VERSION {
            return Err(Error::Parse(format!("unsupported table version {}", doc.version)));
        }
        if doc.j_max < 1 {
            return Err(Error::Parse("table needs j_max >= 1".into()));
        }
        let mut entries: Vec<Vec<Option<PowerSeries>>> = vec![vec![None; doc.i_max + 1]; doc.j_max];
        for e in doc.entries {
            if e.j < 1 || e.j > doc.j_max || e.i > doc.i_max {
                return Err(Error::Parse(format!("entry ({}, {}) out of range", e.i, e.j)));
            }
            if e.coeffs.len() != e.degree + 1 || e.coeffs.len() < 3 {
                return Err(Error::Parse(format!("entry ({}, {}) has inconsistent degree", e.i, e.j)));
            }
            entries[e.j - 1][e.i] = Some(PowerSeries {
                coeffs: e.coeffs,
                tail_bound: e.tail_bound,
            });
        }
        let entries = entries
            .into_iter()
            .map(|col| col.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Parse("table has missing entries".into()))?;
        Ok(GenFunTable {
            a: doc.a,
            i_max: doc.i_max,
            j_max: doc.j_max,
            entries,
        })
    }
}

const TABLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TableDoc {
    version: u32,
    a: f64,
    #[serde(rename = "I_max")]
    i_max: usize,
    #[serde(rename = "J_max")]
    j_max: usize,
    entries: Vec<EntryDoc>,
}

#[derive(Serialize, Deserialize)]
struct EntryDoc {
    i: usize,
    j: usize,
    degree: usize,
    tail_bound: f64,
    coeffs: Vec<f64>,
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `e^{sqrt(lambda_j)} 3^i i! / (3i+2)!`
pub fn eq4_bound(i: usize, j: usize) -> f64 {
    let ln = Params::lambda(j).sqrt() + i as f64 * 3f64.ln() + ln_factorial(i) - ln_factorial(3 * i + 2);
    ln.exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub i: usize,
    pub j: usize,
    /// `max_x |g_{i,j}(x)|` over the samples
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub samples: usize,
    pub max_ratio: f64,
    pub violations: Vec<BoundViolation>,
    pub rows: Vec<BoundRow>,
    /// Smallest `C` with `|g_{i,j}| <= C e^{sqrt(lambda_j)} / (2i)!` on the samples.
    pub c1_constant: f64,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_bound(table: &GenFunTable, samples: &[f64]) -> BoundReport {
    let mut max_ratio: f64 = 0.0;
    let mut violations = Vec::new();
    let mut rows = Vec::new();
    let mut c1: f64 = 0.0;
    for j in 1..=table.j_max {
        let grow = Params::lambda(j).sqrt();
        for i in 0..=table.i_max {
            let g = &table.entries[j - 1][i];
            let bound = eq4_bound(i, j);
            let c1_scale = (ln_factorial(2 * i) - grow).exp();
            let mut sup: f64 = 0.0;
            for &x in samples {
                let v = g.eval(x, 0);
                let ok = v.is_finite() && v.abs() <= bound;
                if !ok {
                    violations.push(BoundViolation {
                        i,
                        j,
                        x,
                        value: v,
                        bound,
                    });
                }
                max_ratio = max_ratio.max(v.abs() / bound);
                sup = sup.max(v.abs());
            }
            c1 = c1.max(sup * c1_scale);
            rows.push(BoundRow {
                i,
                j,
                value: sup,
                bound,
            });
        }
    }
    BoundReport {
        samples: samples.len(),
        max_ratio,
        violations,
        rows,
        c1_constant: c1,
    }
}

/// Evenly spaced points of `[-1, 0]`.
pub fn sample_points(n: usize) -> Vec<f64> {
    (0..n).map(|k| -1.0 + k as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn degenerate_mu_gives_parabola() {
        let a = PI * PI;
        let g = g0(1, a).unwrap();
        assert_eq!(g.coeffs[2], 0.5);
        assert!(g.coeffs.iter().enumerate().all(|(n, c)| n == 2 || *c == 0.0));
        assert_eq!(g.eval(-1.0, 0), 0.5);
    }

    #[test]
    fn next_of_parabola_is_quintic() {
        let g = g0(1, PI * PI).unwrap();
        let g1 = g_next(&g, 0.0).unwrap();
        assert!((g1.coeffs[5] + 1.0 / 120.0).abs() < 1e-18);
        for (n, c) in g1.coeffs.iter().enumerate() {
            if n != 5 {
                assert_eq!(*c, 0.0);
            }
        }
    }

    #[test]
    fn zero_source_gives_zero() {
        let g = g_next(&PowerSeries::zero(), 3.0).unwrap();
        assert!(g.coeffs.iter().all(|c| *c == 0.0));
        assert_eq!(g.tail_bound, 0.0);
    }

    #[test]
    fn closed_form_first_mode() {
        let g = g0(1, 1.0).unwrap();
        let mu = PI * PI - 1.0;
        let want = ((mu.sqrt()).cosh() - 1.0) / mu;
        assert!((g.eval(-1.0, 0) - want).abs() < 1e-13);
        // mpmath at 50 digits
        assert!((want - 0.997_962_303_305_497).abs() < 1e-14);
        assert!((g.eval(-0.5, 2) - (mu.sqrt() * 0.5).cosh()).abs() < 1e-12);
    }

    #[test]
    fn table_cauchy_data() {
        let t = build_table_for(1.0, 6, 3).unwrap();
        for j in 1..=3 {
            for i in 0..=6 {
                let g = t.get(i, j).unwrap();
                assert_eq!(g.coeffs[0], 0.0);
                assert_eq!(g.coeffs[1], 0.0);
                assert_eq!(g.coeffs[2], if i == 0 { 0.5 } else { 0.0 });
                assert!(g.tail_bound <= SERIES_TOL * g.l1());
            }
        }
        assert!(t.get(7, 1).is_err());
        assert!(t.get(0, 4).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let t = build_table_for(1.0, 4, 3).unwrap();
        let s = t.to_json().unwrap();
        let back = GenFunTable::from_json(&s).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_json().unwrap(), s);
    }
}
