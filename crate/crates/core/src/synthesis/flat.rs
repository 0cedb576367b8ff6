//! Flat outputs `z_j(t)` and their time derivatives.

use crate::domain::Params;
use crate::error::{invalid, Error, Result};
use crate::freeflow::ModeEvolution;
use crate::gevrey::{interpolate_sequence, BumpParams, GevreyInterpolant, InterpOptions, Step};
use crate::jet::binomial;
use crate::modal::ModalBasis;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlatKind {
    Null,
    Reach,
}

/// `(a b)^(i) = sum_n C(i, n) a^(i-n) b^(n)` for `i = 0..=order`.
pub fn leibniz(a: &[f64], b: &[f64], order: usize) -> Vec<f64> {
    (0..=order)
        .map(|i| (0..=i).map(|n| binomial(i, n) * a[i - n] * b[n]).sum())
        .collect()
}

/// The free trace of one mode, propagated on its slow eigenmodes.
#[derive(Debug, Clone)]
pub struct NullMode {
    basis: ModalBasis,
    t0: f64,
    dt: f64,
    t_min: f64,
    anchor: usize,
    /// Modal coefficients of every snapshot from `t_min` up to the anchor.
    coeffs: Vec<Vec<Complex64>>,
    first: usize,
}

impl NullMode {
    fn new(ev: &ModeEvolution, tau: f64) -> Result<NullMode> {
        let basis = ev.modal()?.clone();
        let dt = ev.dt();
        let t0 = ev.times[0];
        let last = ev.times.len() - 1;
        let first = ev.options().t_min_steps.min(last);
        let anchor = (((tau - t0) / dt) - 1e-9).ceil().clamp(first as f64, last as f64) as usize;
        let coeffs = (first..=anchor)
            .map(|k| ev.modal_coefficients(k))
            .collect::<Result<Vec<_>>>()?;
        Ok(NullMode {
            basis,
            t0,
            dt,
            t_min: ev.t_min(),
            anchor,
            coeffs,
            first,
        })
    }

    /// `f^(n)(t)` for `n = 0..=n_max`; after the anchor node the anchor
    /// coefficients are propagated exactly, so the family is consistent there.
    pub fn trace_derivs(&self, t: f64, n_max: usize) -> Result<Vec<f64>> {
        if t < self.t_min - 1e-12 * self.dt {
            return Err(Error::BeforeSmoothing { t, t_min: self.t_min });
        }
        let k = (((t - self.t0) / self.dt) + 1e-9).floor() as usize;
        let k = k.clamp(self.first, self.anchor);
        let s = t - (self.t0 + k as f64 * self.dt);
        Ok(self.basis.trace_derivs(&self.coeffs[k - self.first], s, n_max))
    }

    pub fn anchor_time(&self) -> f64 {
        self.t0 + self.anchor as f64 * self.dt
    }
}

#[derive(Debug, Clone)]
pub enum ModeFlat {
    Zero,
    Null(Box<NullMode>),
    Reach(GevreyInterpolant),
}

/// Flat outputs of all modes `j = 1..=J_max`.
#[derive(Debug, Clone)]
pub struct FlatOutput {
    pub kind: FlatKind,
    pub step: Step,
    pub modes: Vec<ModeFlat>,
}

impl FlatOutput {
    pub fn j_max(&self) -> usize {
        self.modes.len()
    }

    /// `z_j^(i)(t)` for `i = 0..=n_max`.
    pub fn derivs(&self, j: usize, t: f64, n_max: usize) -> Result<Vec<f64>> {
        if j < 1 || j > self.modes.len() {
            return Err(Error::ModeOutOfRange { j, j_max: self.modes.len() });
        }
        match &self.modes[j - 1] {
            ModeFlat::Zero => Ok(vec![0.0; n_max + 1]),
            ModeFlat::Null(m) => {
                if t >= self.step.t_final {
                    return Ok(vec![0.0; n_max + 1]);
                }
                let f = m.trace_derivs(t, n_max)?;
                if t <= self.step.tau {
                    return Ok(f);
                }
                let phi = self.step.jet(t, n_max)?.derivs();
                Ok(leibniz(&phi, &f, n_max))
            }
            ModeFlat::Reach(h) => {
                if t <= self.step.tau {
                    return Ok(vec![0.0; n_max + 1]);
                }
                let g = self.step.jet(t, n_max)?.scale(-1.0).add_const(1.0).derivs();
                let hd = h.jet(t, n_max)?.derivs();
                Ok(leibniz(&g, &hd, n_max))
            }
        }
    }

    /// First time at which `derivs` is defined.
    pub fn t_start(&self) -> f64 {
        self.modes
            .iter()
            .filter_map(|m| match m {
                ModeFlat::Null(n) => Some(n.t_min),
                _ => None,
            })
            .fold(0.0, f64::max)
    }
}

fn make_step(p: &Params) -> Result<Step> {
    Step::new(BumpParams::new(p.s, p.steepness)?, p.tau, p.t_final)
}

/// `z_j = phi_s((t - tau)/(T - tau)) f_j` from the free evolution of each mode.
pub fn null_flat_output(evs: &[ModeEvolution], p: &Params) -> Result<FlatOutput> {
    p.validate()?;
    if evs.is_empty() {
        return Err(invalid("evolutions", "need at least one mode"));
    }
    for ev in evs {
        let end = *ev.times.last().unwrap();
        if (end - p.t_final).abs() > 1e-9 * p.t_final || ev.times[0] != 0.0 {
            return Err(invalid("evolutions", "must cover [0, T]"));
        }
    }
    let modes = evs
        .iter()
        .map(|ev| Ok(ModeFlat::Null(Box::new(NullMode::new(ev, p.tau)?))))
        .collect::<Result<Vec<_>>>()?;
    Ok(FlatOutput {
        kind: FlatKind::Null,
        step: make_step(p)?,
        modes,
    })
}

/// `b_{i,j}`, indexed `b[j - 1][i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachCoefficients {
    pub b: Vec<Vec<f64>>,
    pub source: String,
}

impl ReachCoefficients {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.b.get(j - 1).and_then(|c| c.get(i)).copied().unwrap_or(0.0)
    }

    pub fn i_max(&self) -> usize {
        self.b.first().map_or(0, |c| c.len().saturating_sub(1))
    }

    /// Per mode, `(M_j, R)` with `|b_{i,j}| <= M_j [9(2+a)]^i (2i)! / R^{3i}`.
    pub fn growth_fit(&self, a: f64, h_min: f64) -> Result<Vec<(f64, f64)>> {
        let k = 9.0 * (2.0 + a);
        self.b
            .iter()
            .map(|col| {
                let (c, h) = crate::gevrey::fit_growth(col, h_min)?;
                Ok((c, (k / h).cbrt()))
            })
            .collect()
    }
}

/// `z_j = h_j (1 - phi_s)` with `h_j^(i)(T) = b_{i,j}`.
pub fn reach_flat_output(b: &ReachCoefficients, p: &Params, opts: &InterpOptions) -> Result<FlatOutput> {
    p.validate()?;
    let modes = b
        .b
        .iter()
        .map(|col| {
            if col.iter().all(|v| *v == 0.0) {
                Ok(ModeFlat::Zero)
            } else {
                Ok(ModeFlat::Reach(interpolate_sequence(col, p.t_final, opts)?))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FlatOutput {
        kind: FlatKind::Reach,
        step: make_step(p)?,
        modes,
    })
}
