//! Gauss quadrature rules and adaptive integration.
//!
//! Nodes and weights come from the Golub–Welsch algorithm: the symmetric
//! tridiagonal Jacobi matrix of the orthonormal recurrence is diagonalized and
//! the weights are `μ₀` times the squared first components of the
//! eigenvectors.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// A quadrature rule `∫ f(x) ω(x) dx ≈ Σ w_i f(x_i)` with nodes in ascending
/// order. The weight function `ω` is implicit in the constructor used.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Gauss–Legendre rule: weight 1 on `[-1, 1]`.
    pub fn legendre(n: usize) -> Self {
        let diag = vec![0.0; n];
        let off: Vec<f64> = (1..n)
            .map(|k| {
                let kf = k as f64;
                kf / (4.0 * kf * kf - 1.0).sqrt()
            })
            .collect();
        Self::golub_welsch(&diag, &off, 2.0)
    }

    /// Gauss–Hermite rule: weight `e^{-x²}` on the line (physicists'
    /// convention).
    pub fn hermite(n: usize) -> Self {
        let diag = vec![0.0; n];
        let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
        Self::golub_welsch(&diag, &off, std::f64::consts::PI.sqrt())
    }

    /// Gauss–Jacobi rule for the one-sided weight `(1-u)^α` on `[-1, 1]`
    /// (second exponent zero). Requires `α > -1`.
    pub fn jacobi(n: usize, alpha: f64) -> Result<Self> {
        if alpha <= -1.0 {
            return Err(Error::InvalidParameter(format!(
                "Jacobi quadrature needs alpha > -1, got {alpha}"
            )));
        }
        let mut diag = Vec::with_capacity(n);
        for k in 0..n {
            if k == 0 {
                diag.push(-alpha / (alpha + 2.0));
            } else {
                let kf = k as f64;
                let t = 2.0 * kf + alpha;
                diag.push(-alpha * alpha / (t * (t + 2.0)));
            }
        }
        let off: Vec<f64> = (1..n)
            .map(|k| {
                let kf = k as f64;
                let t = 2.0 * kf + alpha;
                2.0 * kf * (kf + alpha) / (t * (t * t - 1.0).sqrt())
            })
            .collect();
        let mu0 = 2f64.powf(alpha + 1.0) / (alpha + 1.0);
        Ok(Self::golub_welsch(&diag, &off, mu0))
    }

    fn golub_welsch(diag: &[f64], off: &[f64], mu0: f64) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = diag[i];
        }
        for i in 0..n - 1 {
            m[(i, i + 1)] = off[i];
            m[(i + 1, i)] = off[i];
        }
        let eig = m.symmetric_eigen();
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Polish each node with Newton on p_n and take the weight as the
        // Christoffel number 1/Σ_{j<n} p_j(x)²; the eigensolver alone leaves
        // node errors that show up at ~1e-7 in high-degree inner products.
        // p_0..p_n and p_n' by the orthonormal recurrence; the unknown b_n of
        // the final step only rescales p_n, which leaves both the Newton step
        // p_n/p_n' and the Christoffel numbers untouched.
        let ladder = |x: f64| -> (Vec<f64>, f64) {
            let mut p = Vec::with_capacity(n + 1);
            p.push(1.0 / mu0.sqrt());
            let mut dp_prev = 0.0;
            let mut dp_cur = 0.0;
            for k in 0..n {
                let b_next = if k < off.len() { off[k] } else { 1.0 };
                let b_cur = if k == 0 { 0.0 } else { off[k - 1] };
                let prev = if k == 0 { 0.0 } else { p[k - 1] };
                let next = ((x - diag[k]) * p[k] - b_cur * prev) / b_next;
                let dnext = ((x - diag[k]) * dp_cur + p[k] - b_cur * dp_prev) / b_next;
                p.push(next);
                dp_prev = dp_cur;
                dp_cur = dnext;
            }
            (p, dp_cur)
        };
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (p, dpn) = ladder(*x);
                let step = p[n] / dpn;
                if step.is_finite() {
                    *x -= step;
                }
            }
            let (p, _) = ladder(*x);
            let k_diag: f64 = p[..n].iter().map(|v| v * v).sum();
            weights.push(1.0 / k_diag);
        }
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Affine image of a `[-1, 1]` rule on `[a, b]`. Only meaningful for
    /// Legendre-type rules with constant weight.
    pub fn mapped_to(&self, a: f64, b: f64) -> GaussRule {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        GaussRule {
            nodes: self.nodes.iter().map(|&x| mid + half * x).collect(),
            weights: self.weights.iter().map(|&w| w * half).collect(),
        }
    }
}

/// Adaptive Gauss–Legendre integration of `f` over `[a, b]` by interval
/// bisection; compares a single 15-point estimate against the sum of two
/// half-interval estimates.
pub fn adaptive_quad<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let base = GaussRule::legendre(15);
    let whole = base.mapped_to(a, b).integrate(f);
    let mut total = 0.0;
    let mut stack = vec![(a, b, whole, 0u32)];
    while let Some((lo, hi, est, depth)) = stack.pop() {
        if depth > 48 {
            return Err(Error::Numerical(format!(
                "adaptive quadrature failed to converge on [{lo}, {hi}]"
            )));
        }
        let mid = 0.5 * (lo + hi);
        let left = base.mapped_to(lo, mid).integrate(f);
        let right = base.mapped_to(mid, hi).integrate(f);
        let refined = left + right;
        if (refined - est).abs() <= tol.max(1e-15 * refined.abs()) || (hi - lo) < 1e-13 {
            total += refined;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    Ok(total)
}

/// Tensor-product quadrature of `f` over `dim` copies of the rule's support.
/// The cost is `len^dim`, so this is restricted to small dimensions.
pub fn tensor_integrate<F: Fn(&[f64]) -> f64>(rule: &GaussRule, dim: usize, f: F) -> f64 {
    assert!(dim <= 4, "tensor quadrature limited to dimension <= 4");
    if dim == 0 {
        return f(&[]);
    }
    let n = rule.len();
    let mut idx = vec![0usize; dim];
    let mut pt = vec![0.0; dim];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for d in 0..dim {
            pt[d] = rule.nodes[idx[d]];
            w *= rule.weights[idx[d]];
        }
        total += w * f(&pt);
        // advance the multi-index
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < n {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == dim {
                return total;
            }
        }
    }
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
