//! Gevrey-class switching functions and derivative interpolation.

use crate::error::{invalid, Error, Result};
use crate::jet::{factorial, Jet};
use serde::{Deserialize, Serialize};

/// Largest derivative order supported by the bump evaluators.
pub const P_MAX: usize = 40;

/// Exponent magnitude beyond which the bump is constant to double precision.
const PSI_SATURATE: f64 = 700.0;

/// The bump `phi_s`: 1 on `rho <= 0`, 0 on `rho >= 1`, and
/// `1 / (1 + exp(M/(1-rho)^sigma - M/rho^sigma))` in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpParams {
    pub s: f64,
    pub m: f64,
    pub sigma: f64,
}

impl BumpParams {
    pub fn new(s: f64, m: f64) -> Result<BumpParams> {
        if !(s > 1.0 && s < 2.0) {
            return Err(invalid("s", format!("need 1 < s < 2, got {s}")));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(invalid("M", format!("must be positive, got {m}")));
        }
        Ok(BumpParams {
            s,
            m,
            sigma: 1.0 / (s - 1.0),
        })
    }

    fn psi(&self, rho: f64) -> f64 {
        self.m / (1.0 - rho).powf(self.sigma) - self.m / rho.powf(self.sigma)
    }
}

pub fn bump(p: &BumpParams, rho: f64) -> f64 {
    if rho <= 0.0 {
        return 1.0;
    }
    if rho >= 1.0 {
        return 0.0;
    }
    let psi = p.psi(rho);
    if psi > 0.0 {
        let e = (-psi).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + psi.exp())
    }
}

/// Taylor jet of the bump at `rho` up to `order`.
pub fn bump_jet(p: &BumpParams, rho: f64, order: usize) -> Result<Jet> {
    if order > P_MAX {
        return Err(invalid("order", format!("at most {P_MAX}, got {order}")));
    }
    if rho <= 0.0 {
        return Ok(Jet::constant(1.0, order));
    }
    if rho >= 1.0 {
        return Ok(Jet::constant(0.0, order));
    }
    let psi0 = p.psi(rho);
    if psi0 < -PSI_SATURATE {
        return Ok(Jet::constant(1.0, order));
    }
    if psi0 > PSI_SATURATE {
        return Ok(Jet::constant(0.0, order));
    }
    let u = Jet::variable(rho, order);
    let left = u.powf(-p.sigma);
    let right = u.scale(-1.0).add_const(1.0).powf(-p.sigma);
    let psi = (&right - &left).scale(p.m);
    let phi = if psi0 > 0.0 {
        let e = psi.scale(-1.0).exp();
        e.div(&e.add_const(1.0))
    } else {
        psi.exp().add_const(1.0).recip()
    };
    if !phi.is_finite() {
        return Err(Error::NonFinite("bump jet"));
    }
    Ok(phi)
}

pub fn bump_deriv(p: &BumpParams, rho: f64, order: usize) -> Result<f64> {
    Ok(bump_jet(p, rho, order)?.deriv(order))
}

/// `phi_s((t - tau) / (T - tau))` as a function of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub bump: BumpParams,
    pub tau: f64,
    pub t_final: f64,
}

impl Step {
    pub fn new(bump: BumpParams, tau: f64, t_final: f64) -> Result<Step> {
        if !(tau < t_final) {
            return Err(invalid("tau", "must be smaller than T"));
        }
        Ok(Step {
            bump,
            tau,
            t_final,
        })
    }

    pub fn jet(&self, t: f64, order: usize) -> Result<Jet> {
        let w = self.t_final - self.tau;
        let rho = (t - self.tau) / w;
        Ok(bump_jet(&self.bump, rho, order)?.chain_linear(1.0 / w))
    }
}

pub fn step_deriv(step: &Step, t: f64, order: usize) -> Result<f64> {
    Ok(step.jet(t, order)?.deriv(order))
}

/// Options of the Borel-type interpolant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpOptions {
    /// Gevrey order of the per-term cutoffs.
    pub s_c: f64,
    /// Steepness of the per-term cutoffs.
    pub m_c: f64,
    /// Scale factor in `rho_q = r / (H_tilde (q + 1))`.
    pub r: f64,
    /// Floor of the fitted growth constant `H`.
    pub h_min: f64,
    /// `H_tilde = H e^{1/e} margin`.
    pub margin: f64,
}

impl Default for InterpOptions {
    fn default() -> Self {
        InterpOptions {
            s_c: 1.5,
            m_c: 1.0,
            r: (-1.0f64).exp(),
            h_min: 1e-2,
            margin: 1.25,
        }
    }
}

/// Fit `|d_q| <= C H^q (2q)!`: `H` by the root test over `q >= 1`
/// (floored at `h_min`), then the smallest `C` for that `H`.
pub fn fit_growth(d: &[f64], h_min: f64) -> Result<(f64, f64)> {
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("prescribed derivative sequence"));
    }
    let mut h = h_min;
    for (q, dq) in d.iter().enumerate().skip(1) {
        if *dq != 0.0 {
            h = h.max((dq.abs() / factorial(2 * q)).powf(1.0 / q as f64));
        }
    }
    let c = d
        .iter()
        .enumerate()
        .map(|(q, dq)| dq.abs() / (h.powi(q as i32) * factorial(2 * q)))
        .fold(0.0, f64::max);
    if !(c.is_finite() && h.is_finite()) {
        return Err(Error::NonFinite("interpolant growth fit"));
    }
    Ok((c, h))
}

/// `f(x) = sum_q d_q (x - anchor)^q / q! chi((x - anchor) / rho_q)` with
/// `chi(xi) = phi(2|xi| - 1)`, so `chi = 1` on `|xi| <= 1/2` and `0` on `|xi| >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GevreyInterpolant {
    pub anchor: f64,
    pub d: Vec<f64>,
    pub c: f64,
    pub h: f64,
    pub h_tilde: f64,
    pub rho: Vec<f64>,
    pub cutoff: BumpParams,
}

pub fn borel_interpolate(
    d: &[f64],
    anchor: f64,
    h: f64,
    h_tilde: f64,
    c: f64,
    opts: &InterpOptions,
) -> Result<GevreyInterpolant> {
    if d.is_empty() {
        return Err(invalid("d", "need at least one prescribed derivative"));
    }
    if d.iter().any(|v| !v.is_finite()) || !c.is_finite() {
        return Err(Error::NonFinite("prescribed derivative sequence"));
    }
    if !(h > 0.0 && h_tilde > (1.0f64 / std::f64::consts::E).exp() * h) {
        return Err(invalid("H_tilde", format!("need H_tilde > e^(1/e) H, got H={h}, H_tilde={h_tilde}")));
    }
    let rho = (0..d.len())
        .map(|q| opts.r / (h_tilde * (q + 1) as f64))
        .collect();
    Ok(GevreyInterpolant {
        anchor,
        d: d.to_vec(),
        c,
        h,
        h_tilde,
        rho,
        cutoff: BumpParams::new(opts.s_c, opts.m_c)?,
    })
}

/// Fit the growth of `d`, then build the interpolant anchored at `anchor`.
pub fn interpolate_sequence(d: &[f64], anchor: f64, opts: &InterpOptions) -> Result<GevreyInterpolant> {
    let (c, h) = fit_growth(d, opts.h_min)?;
    let h_tilde = h * (1.0f64 / std::f64::consts::E).exp() * opts.margin;
    borel_interpolate(d, anchor, h, h_tilde, c, opts)
}

impl GevreyInterpolant {
    fn cutoff_jet(&self, xi: f64, scale: f64, order: usize) -> Result<Jet> {
        let a = xi.abs();
        if a <= 0.5 {
            return Ok(Jet::constant(1.0, order));
        }
        if a >= 1.0 {
            return Ok(Jet::constant(0.0, order));
        }
        let sign = if xi > 0.0 { 1.0 } else { -1.0 };
        Ok(bump_jet(&self.cutoff, 2.0 * a - 1.0, order)?.chain_linear(2.0 * sign / scale))
    }

    pub fn jet(&self, t: f64, order: usize) -> Result<Jet> {
        let dx = t - self.anchor;
        let mut total = Jet::constant(0.0, order);
        for (q, (&dq, &rho)) in self.d.iter().zip(&self.rho).enumerate() {
            if dq == 0.0 || dx.abs() >= rho {
                continue;
            }
            // (x - anchor)^q / q! expanded at t
            let poly: Vec<f64> = (0..=order.min(q))
                .map(|k| dx.powi((q - k) as i32) / (factorial(q - k) * factorial(k)))
                .collect();
            let poly = Jet::from_coeffs(poly, order);
            let cut = self.cutoff_jet(dx / rho, rho, order)?;
            total = &total + &(&poly * &cut).scale(dq);
        }
        Ok(total)
    }

    pub fn deriv(&self, t: f64, q: usize) -> Result<f64> {
        Ok(self.jet(t, q)?.deriv(q))
    }

    /// Smallest `C'` with `|f^(q)(t)| <= C' H_tilde^q (2q)!` over the samples.
    pub fn growth_constant(&self, samples: &[f64], q_max: usize) -> Result<f64> {
        let mut c: f64 = 0.0;
        for &t in samples {
            let j = self.jet(t, q_max)?;
            for q in 0..=q_max {
                c = c.max(j.deriv(q).abs() / (self.h_tilde.powi(q as i32) * factorial(2 * q)));
            }
        }
        Ok(c)
    }
}

pub fn interpolant_deriv(f: &GevreyInterpolant, t: f64, q: usize) -> Result<f64> {
    f.deriv(t, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> BumpParams {
        BumpParams::new(1.6, 1.0).unwrap()
    }

    #[test]
    fn bump_piecewise_values() {
        assert_eq!(bump(&p(), -0.3), 1.0);
        assert_eq!(bump(&p(), 0.5), 0.5);
        assert_eq!(bump(&p(), 1.2), 0.0);
        assert_eq!(bump_deriv(&p(), -0.1, 3).unwrap(), 0.0);
    }

    #[test]
    fn direct_formula_at_quarter() {
        let p = p();
        let r: f64 = 0.25;
        let e0 = (-p.m / r.powf(p.sigma)).exp();
        let e1 = (-p.m / (1.0 - r).powf(p.sigma)).exp();
        assert!((bump(&p, r) - e1 / (e0 + e1)).abs() < 1e-15);
    }

    #[test]
    fn step_chain_rule_scaling() {
        let b = p();
        let wide = Step::new(b, 0.0, 1.0).unwrap();
        let narrow = Step::new(b, 0.5, 1.0).unwrap();
        for n in 1..6 {
            let dw = step_deriv(&wide, 0.5, n).unwrap();
            let dn = step_deriv(&narrow, 0.75, n).unwrap();
            assert!((dn - dw * 2f64.powi(n as i32)).abs() <= 1e-12 * dn.abs().max(1.0));
        }
        assert_eq!(step_deriv(&narrow, 0.2, 2).unwrap(), 0.0);
        assert_eq!(step_deriv(&narrow, 1.3, 0).unwrap(), 0.0);
    }

    #[test]
    fn saturation_near_edges() {
        let j = bump_jet(&p(), 1e-4, 30).unwrap();
        assert_eq!(j.value(), 1.0);
        let j = bump_jet(&p(), 1.0 - 1e-4, 30).unwrap();
        assert_eq!(j.value(), 0.0);
    }

    #[test]
    fn interpolant_of_constant() {
        let f = interpolate_sequence(&[1.0, 0.0, 0.0], 1.0, &InterpOptions::default()).unwrap();
        assert_eq!(f.deriv(1.0, 0).unwrap(), 1.0);
        assert_eq!(f.deriv(1.0, 1).unwrap(), 0.0);
        assert_eq!(f.deriv(0.5, 0).unwrap(), 1.0);
    }

    #[test]
    fn interpolant_zero_sequence() {
        let f = interpolate_sequence(&[0.0; 5], 0.0, &InterpOptions::default()).unwrap();
        for t in [-0.3, 0.0, 0.2] {
            for q in 0..4 {
                assert_eq!(f.deriv(t, q).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn interpolant_rejects_small_h_tilde() {
        let o = InterpOptions::default();
        assert!(borel_interpolate(&[1.0], 0.0, 1.0, 1.2, 1.0, &o).is_err());
        assert!(fit_growth(&[1.0, f64::INFINITY], 0.01).is_err());
    }
}
