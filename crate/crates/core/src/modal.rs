//! Slow eigenmodes of the collocated mode operator.
//!
//! Time derivatives of the trace are read off an oblique projection of a
//! snapshot onto the slowest eigenvectors: on that subspace
//! `(-L)^n u = sum_k c_k (-nu_k)^n r_k` holds exactly, while applying the
//! collocation matrix `n` times would amplify rounding by `O(N^{6n})`.

use crate::error::{Error, Result};
use crate::freeflow::ModeOperator;
use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Multiple of machine epsilon below which a modal coefficient is rounding noise.
const RESOLUTION: f64 = 100.0;

#[derive(Debug, Clone)]
pub struct Eigenmode {
    pub nu: Complex64,
    /// Right eigenvector in reduced coordinates, `A r = nu r`.
    pub right: DVector<Complex64>,
    /// Left eigenvector scaled so that `left^T right = 1`.
    pub left: DVector<Complex64>,
    /// `r''(0)` of the nodal lift of `right`.
    pub trace: Complex64,
    /// `|left| |right| / |left^T right|`.
    pub condition: f64,
}

#[derive(Debug, Clone)]
pub struct ModalBasis {
    pub modes: Vec<Eigenmode>,
    lift: DMatrix<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub nu_re: f64,
    pub nu_im: f64,
    pub condition: f64,
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

fn inverse_iteration(a: &DMatrix<Complex64>, shift: Complex64, start: DVector<Complex64>) -> Result<DVector<Complex64>> {
    let n = a.nrows();
    let shifted = a - DMatrix::<Complex64>::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut v = start;
    for _ in 0..3 {
        v = lu
            .solve(&v)
            .ok_or_else(|| Error::Singular("inverse iteration".into()))?;
        let scale = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::NonFinite("inverse iteration"));
        }
        v.unscale_mut(scale);
    }
    Ok(v)
}

fn bilinear(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

impl ModalBasis {
    /// Eigenpairs with `|nu| dt <= z_keep`, slowest first, at most `k_max`
    /// (a complex pair is never split).
    pub fn compute(op: &ModeOperator, dt: f64, z_keep: f64, k_max: usize) -> Result<ModalBasis> {
        let a = &op.reduced;
        let n = a.nrows();
        let schur = Schur::try_new(a.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Singular(format!("Schur decomposition for mode {}", op.j)))?;
        let mut eig: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
        eig.sort_by(|x, y| x.norm().total_cmp(&y.norm()).then(y.im.total_cmp(&x.im)));

        let mut chosen = Vec::new();
        for &nu in &eig {
            if nu.norm() * dt > z_keep {
                break;
            }
            let pair_open = chosen
                .last()
                .is_some_and(|p: &Complex64| p.im > 0.0 && (p.conj() - nu).norm() <= 1e-8 * nu.norm());
            if chosen.len() >= k_max && !pair_open {
                break;
            }
            chosen.push(nu);
        }

        let ac = to_complex(a);
        let at = ac.transpose();
        let lift = to_complex(&op.lift);
        let trace_row = (op.d2.row(op.n() - 1) * &op.lift).map(|v| Complex64::new(v, 0.0));
        let start = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.01 * i as f64, 0.003 * i as f64));

        let mut modes = Vec::with_capacity(chosen.len());
        for nu0 in chosen {
            let shift = nu0 * (1.0 + 1e-10) + Complex64::new(1e-12, 0.0);
            let mut right = inverse_iteration(&ac, shift, start.clone())?;
            let mut left = inverse_iteration(&at, shift, start.clone())?;
            let pairing = bilinear(&left, &right);
            let nu = bilinear(&left, &(&ac * &right)) / pairing;
            // one more sweep at the refined shift
            let shift = nu * (1.0 + 1e-12);
            right = inverse_iteration(&ac, shift, right)?;
            left = inverse_iteration(&at, shift, left)?;
            let pairing = bilinear(&left, &right);
            let nu = bilinear(&left, &(&ac * &right)) / pairing;
            let condition = left.norm() * right.norm() / pairing.norm();
            let left = left.map(|v| v / pairing);
            let trace = (&trace_row * &right)[0];
            modes.push(Eigenmode {
                nu,
                right,
                left,
                trace,
                condition,
            });
        }
        Ok(ModalBasis { modes, lift })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn summary(&self) -> Vec<ModeSummary> {
        self.modes
            .iter()
            .map(|m| ModeSummary {
                nu_re: m.nu.re,
                nu_im: m.nu.im,
                condition: m.condition,
            })
            .collect()
    }

    /// Oblique projection coefficients of a reduced state. Coefficients
    /// below the rounding level of `v` are set to zero: `(-nu)^n` would
    /// otherwise turn them into large spurious derivatives.
    pub fn coefficients(&self, v: &DVector<f64>) -> Vec<Complex64> {
        let vc = v.map(|x| Complex64::new(x, 0.0));
        let floor = RESOLUTION * f64::EPSILON * v.norm();
        self.modes
            .iter()
            .map(|m| {
                let c = bilinear(&m.left, &vc);
                if c.norm() <= floor * m.left.norm() {
                    Complex64::new(0.0, 0.0)
                } else {
                    c
                }
            })
            .collect()
    }

    /// `d^n/dt^n u''(0, t0 + s)` for `n = 0..=n_max`, given coefficients at `t0`.
    pub fn trace_derivs(&self, coeffs: &[Complex64], s: f64, n_max: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_max + 1];
        for (m, c) in self.modes.iter().zip(coeffs) {
            let mut term = c * m.trace * (-m.nu * s).exp();
            for o in out.iter_mut() {
                *o += term.re;
                term *= -m.nu;
            }
        }
        out
    }

    /// Nodal values of `(-L)^n u(t0 + s)` on the kept subspace.
    pub fn nodal_power(&self, coeffs: &[Complex64], s: f64, n: usize) -> DVector<f64> {
        let mut acc = DVector::<Complex64>::zeros(self.lift.ncols());
        for (m, c) in self.modes.iter().zip(coeffs) {
            let w = c * (-m.nu).powu(n as u32) * (-m.nu * s).exp();
            acc.axpy(w, &m.right, Complex64::new(1.0, 0.0));
        }
        (&self.lift * acc).map(|z| z.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb;
    use crate::domain::Params;
    use crate::freeflow::build_mode_operator;

    #[test]
    fn slowest_eigenvalue_of_first_mode() {
        let p = Params {
            nx: 48,
            ..Params::default()
        };
        let op = build_mode_operator(1, &p, &cheb::nodes(48)).unwrap();
        let basis = ModalBasis::compute(&op, 1e-3, 1.0, 4).unwrap();
        assert!(!basis.is_empty());
        let nu = basis.modes[0].nu;
        assert!(nu.im.abs() < 1e-6 * nu.re);
        // root of the 3x3 characteristic determinant, see the integration tests
        assert!((nu.re - 106.31).abs() < 0.01, "nu = {nu}");
        for m in &basis.modes {
            let r = &m.right;
            let ar = op.reduced.map(|v| Complex64::new(v, 0.0)) * r;
            let res = (ar - r * m.nu).norm() / (m.nu.norm() * r.norm());
            assert!(res < 1e-8);
            assert!((bilinear(&m.left, r) - 1.0).norm() < 1e-12);
        }
    }
}
