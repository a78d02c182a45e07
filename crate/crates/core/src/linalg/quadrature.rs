use std::f64::consts::PI;

use super::Matrix;

/// Nodes and weights of the `order`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be >= 1");
    if order == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order / 2 + order % 2 {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // P_n(x) and P_{n-1}(x) by the three-term recurrence.
            let (mut p_prev, mut p) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
                p_prev = p;
                p = next;
            }
            dp = n * (x * p - p_prev) / (x * x - 1.0);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule: `panels` equal panels, `order` points each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quadrature {
    pub panels: usize,
    pub order: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { panels: 257, order: 8 }
    }
}

impl Quadrature {
    pub fn new(panels: usize, order: usize) -> Self {
        Quadrature { panels: panels.max(1), order: order.max(1) }
    }

    /// `(node, weight)` pairs on `[lo, hi]`.
    pub fn points(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let (x, w) = gauss_legendre(self.order);
        let h = (hi - lo) / self.panels as f64;
        let mut out = Vec::with_capacity(self.panels * self.order);
        for p in 0..self.panels {
            let left = lo + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                out.push((left + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
            }
        }
        out
    }

    pub fn integrate_scalar(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.points(lo, hi).into_iter().map(|(t, w)| w * f(t)).sum()
    }

    pub fn integrate_matrix(
        &self,
        lo: f64,
        hi: f64,
        rows: usize,
        cols: usize,
        f: impl Fn(f64) -> Matrix,
    ) -> Matrix {
        let mut acc = Matrix::zeros(rows, cols);
        for (t, w) in self.points(lo, hi) {
            acc += f(t) * w;
        }
        acc
    }
}
