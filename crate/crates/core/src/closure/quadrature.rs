//! Gauss-Hermite quadrature and its tensor-product Gaussian-measure form.
//!
//! `hermite_rule(n)` returns nodes/weights for `int e^{-x^2} f(x) dx`; a rule
//! of degree `n` integrates polynomials up to degree `2n - 1` exactly.
//! [`GaussianRule`] rescales the tensor product so that it integrates against
//! the centered Maxwellian `M_0(w) = (2 pi T)^{-d/2} exp(-|w|^2 / 2T)`.

use super::poly::MultiPoly;

/// Nodes and weights of the n-point Gauss-Hermite rule (weight `e^{-x^2}`).
///
/// Roots found by Newton iteration on the orthonormal Hermite recurrence;
/// weights from the Christoffel sum `w_i = 1 / sum_k p_k(x_i)^2`.
pub fn hermite_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && n < 128, "unsupported Gauss-Hermite order {n}");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];

    // Orthonormal Hermite value and derivative at x.
    let eval = |x: f64| -> (f64, f64) {
        let mut p_prev = 0.0;
        let mut p = std::f64::consts::PI.powf(-0.25);
        for j in 1..=n {
            let jn = j as f64;
            let p_next = x * (2.0 / jn).sqrt() * p - ((jn - 1.0) / jn).sqrt() * p_prev;
            p_prev = p;
            p = p_next;
        }
        // p = hhat_n(x); derivative hhat_n' = sqrt(2n) hhat_{n-1}.
        ((p), (2.0 * n as f64).sqrt() * p_prev)
    };

    // Largest root initial guess (Stroud & Secrest / NR), then march inward.
    let mut z = (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0);
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => z,
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        for _ in 0..200 {
            let (p, dp) = eval(z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 * (1.0 + z.abs()) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    for i in 0..n {
        // Christoffel: 1 / sum_{k=0}^{n-1} hhat_k(x)^2.
        let x = nodes[i];
        let mut s = 0.0;
        let mut p_prev = 0.0;
        let mut p = std::f64::consts::PI.powf(-0.25);
        s += p * p;
        for j in 1..n {
            let jn = j as f64;
            let p_next = x * (2.0 / jn).sqrt() * p - ((jn - 1.0) / jn).sqrt() * p_prev;
            p_prev = p;
            p = p_next;
            s += p * p;
        }
        weights[i] = 1.0 / s;
    }
    // Nodes ascending.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Tensor quadrature for `int f(w) M_0(w) dw` over `R^d`, `M_0` the centered
/// Gaussian with per-component variance `T`.
pub struct GaussianRule {
    dim: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl GaussianRule {
    pub fn new(dim: usize, n_q: usize, temp: f64) -> Self {
        assert!((1..=3).contains(&dim));
        assert!(temp > 0.0);
        let (x, w) = hermite_rule(n_q);
        let scale = (2.0 * temp).sqrt();
        let wnorm = 1.0 / std::f64::consts::PI.sqrt();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let idx_max = [n_q, if dim > 1 { n_q } else { 1 }, if dim > 2 { n_q } else { 1 }];
        for i in 0..idx_max[0] {
            for j in 0..idx_max[1] {
                for k in 0..idx_max[2] {
                    let mut pt = [0.0; 3];
                    let mut wt = w[i] * wnorm;
                    pt[0] = scale * x[i];
                    if dim > 1 {
                        pt[1] = scale * x[j];
                        wt *= w[j] * wnorm;
                    }
                    if dim > 2 {
                        pt[2] = scale * x[k];
                        wt *= w[k] * wnorm;
                    }
                    points.push(pt);
                    weights.push(wt);
                }
            }
        }
        Self { dim, points, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(&p[..self.dim]))
            .sum()
    }

    pub fn integrate_poly(&self, p: &MultiPoly) -> f64 {
        self.integrate(|w| p.eval(w))
    }
}

/// Moment integral `int f(w) M_0(w) dw` (the spec's `gaussian_moment`).
pub fn gaussian_moment<F: Fn(&[f64]) -> f64>(f: F, temp: f64, dim: usize, n_q: usize) -> f64 {
    GaussianRule::new(dim, n_q, temp).integrate(f)
}
