//! Univariate truncated Taylor arithmetic.
//!
//! A [`Jet`] stores normalized coefficients `f^(k)(x0) / k!`, `k = 0..=order`.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet(pub Vec<f64>);

impl Jet {
    pub fn constant(v: f64, order: usize) -> Jet {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Jet(c)
    }

    /// The independent variable expanded at `x0`.
    pub fn variable(x0: f64, order: usize) -> Jet {
        let mut c = vec![0.0; order + 1];
        c[0] = x0;
        if order > 0 {
            c[1] = 1.0;
        }
        Jet(c)
    }

    /// Coefficients of a polynomial in `(x - x0)`, truncated.
    pub fn from_coeffs(mut c: Vec<f64>, order: usize) -> Jet {
        c.resize(order + 1, 0.0);
        Jet(c)
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// `f^(k)(x0)`.
    pub fn deriv(&self, k: usize) -> f64 {
        self.0[k] * factorial(k)
    }

    pub fn derivs(&self) -> Vec<f64> {
        (0..self.0.len()).map(|k| self.deriv(k)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet(self.0.iter().map(|v| v * s).collect())
    }

    pub fn add_const(&self, s: f64) -> Jet {
        let mut c = self.0.clone();
        c[0] += s;
        Jet(c)
    }

    /// Composition with `x -> alpha x + beta` on the argument: rescales
    /// the k-th coefficient by `alpha^k`.
    pub fn chain_linear(&self, alpha: f64) -> Jet {
        let mut f = 1.0;
        Jet(self
            .0
            .iter()
            .map(|v| {
                let r = v * f;
                f *= alpha;
                r
            })
            .collect())
    }

    pub fn recip(&self) -> Jet {
        Jet::constant(1.0, self.order()).div(self)
    }

    pub fn div(&self, b: &Jet) -> Jet {
        let n = self.0.len();
        let mut q = vec![0.0; n];
        for k in 0..n {
            let mut s = self.0[k];
            for i in 1..=k {
                s -= b.0[i] * q[k - i];
            }
            q[k] = s / b.0[0];
        }
        Jet(q)
    }

    pub fn exp(&self) -> Jet {
        let n = self.0.len();
        let mut e = vec![0.0; n];
        e[0] = self.0[0].exp();
        for k in 1..n {
            let mut s = 0.0;
            for i in 1..=k {
                s += i as f64 * self.0[i] * e[k - i];
            }
            e[k] = s / k as f64;
        }
        Jet(e)
    }

    pub fn ln(&self) -> Jet {
        let n = self.0.len();
        let mut l = vec![0.0; n];
        l[0] = self.0[0].ln();
        for k in 1..n {
            let mut s = 0.0;
            for i in 1..k {
                s += i as f64 * l[i] * self.0[k - i];
            }
            l[k] = (self.0[k] - s / k as f64) / self.0[0];
        }
        Jet(l)
    }

    /// `self^r` for a positive leading coefficient.
    pub fn powf(&self, r: f64) -> Jet {
        let n = self.0.len();
        let a0 = self.0[0];
        let mut p = vec![0.0; n];
        p[0] = a0.powf(r);
        for k in 1..n {
            let mut s = 0.0;
            for i in 1..=k {
                s += ((r + 1.0) * i as f64 - k as f64) * self.0[i] * p[k - i];
            }
            p[k] = s / (k as f64 * a0);
        }
        Jet(p)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, b: &Jet) -> Jet {
        Jet(self.0.iter().zip(&b.0).map(|(x, y)| x + y).collect())
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, b: &Jet) -> Jet {
        Jet(self.0.iter().zip(&b.0).map(|(x, y)| x - y).collect())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, b: &Jet) -> Jet {
        let n = self.0.len();
        let mut c = vec![0.0; n];
        for (i, ai) in self.0.iter().enumerate() {
            if *ai == 0.0 {
                continue;
            }
            for k in i..n {
                c[k] += ai * b.0[k - i];
            }
        }
        Jet(c)
    }
}

pub fn factorial(k: usize) -> f64 {
    (2..=k).fold(1.0, |acc, v| acc * v as f64)
}

/// Binomial coefficient, exact in integers for the orders used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as f64
}
