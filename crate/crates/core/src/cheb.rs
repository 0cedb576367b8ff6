//! Chebyshev–Lobatto collocation on the interval `[-1, 0]`.
//!
//! Nodes are stored in increasing order, `x_0 = -1` and `x_N = 0`.

use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Collocation nodes `x_k = -(1 + cos(pi k / N)) / 2`, `k = 0..=N`.
pub fn nodes(n_nodes: usize) -> Vec<f64> {
    let n = n_nodes - 1;
    (0..=n)
        .map(|k| {
            if 2 * k == n {
                -0.5
            } else {
                -(1.0 + (PI * k as f64 / n as f64).cos()) / 2.0
            }
        })
        .collect()
}

fn bary_weights(n_nodes: usize) -> Vec<f64> {
    let n = n_nodes - 1;
    (0..=n)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            if k == 0 || k == n {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// Differentiation matrices of orders `1..=order`, built with the
/// Welfert recursion and the negative-sum diagonal.
pub fn diff_matrices(n_nodes: usize, order: usize) -> Vec<DMatrix<f64>> {
    let n = n_nodes - 1;
    let w = bary_weights(n_nodes);
    let t: Vec<f64> = (0..=n).map(|k| PI * k as f64 / n as f64).collect();
    // x_i - x_j through the half-angle identity to avoid cancellation
    let dx = |i: usize, j: usize| ((t[i] + t[j]) / 2.0).sin() * ((t[i] - t[j]) / 2.0).sin();

    let mut out = Vec::with_capacity(order);
    let mut prev = DMatrix::<f64>::identity(n_nodes, n_nodes);
    for m in 1..=order {
        let mut d = DMatrix::<f64>::zeros(n_nodes, n_nodes);
        for i in 0..=n {
            let mut diag = 0.0;
            for j in 0..=n {
                if i == j {
                    continue;
                }
                let v = m as f64 / dx(i, j) * (w[j] / w[i] * prev[(i, i)] - prev[(i, j)]);
                d[(i, j)] = v;
                diag -= v;
            }
            d[(i, i)] = diag;
        }
        out.push(d.clone());
        prev = d;
    }
    out
}

/// Clenshaw–Curtis quadrature weights matching [`nodes`].
pub fn clenshaw_curtis(n_nodes: usize) -> Vec<f64> {
    let n = n_nodes - 1;
    let nf = n as f64;
    let mut w = vec![0.0; n_nodes];
    if n == 0 {
        return w;
    }
    let theta: Vec<f64> = (0..=n).map(|k| PI * k as f64 / nf).collect();
    let mut v = vec![1.0; n.saturating_sub(1)];
    if n % 2 == 0 {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta[i + 1]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= (nf * theta[i + 1]).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta[i + 1]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (i, vi) in v.iter().enumerate() {
        w[i + 1] = 2.0 * vi / nf;
    }
    // map from [-1, 1] to an interval of length 1
    w.iter().map(|x| x / 2.0).collect()
}

/// Barycentric interpolation of nodal values at an arbitrary point.
pub fn interpolate(values: &[f64], x: f64) -> f64 {
    let xs = nodes(values.len());
    let w = bary_weights(values.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..xs.len() {
        let d = x - xs[k];
        if d == 0.0 {
            return values[k];
        }
        let c = w[k] / d;
        num += c * values[k];
        den += c;
    }
    num / den
}
