//! Projection kernels on the line: sine, Bessel, Christoffel–Darboux, and
//! their Palm reductions.
//!
//! A kernel here is a symmetric function `Π(x,y)` on an open interval that
//! induces an orthogonal projection on `L₂(U, Leb)`. Correlation functions of
//! the associated determinantal process are determinants `det Π(p_i, p_j)`,
//! and conditioning at points is the rank-l projection update implemented by
//! [`palm_reduce`].

use crate::error::{Error, Result};
use crate::orthopoly::{CdKernel, ScaledKernel};
use crate::quad::{adaptive_quad, ls_slope};
use crate::special::bessel_j;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Relative half-width of the confluent-diagonal switch.
const DIAGONAL_SWITCH: f64 = 1e-6;

/// An evaluable symmetric projection kernel.
///
/// `eval` assumes both arguments lie in `domain`; use
/// [`kernel_eval_checked`] at API boundaries where that is not guaranteed.
pub trait Kernel: Send + Sync {
    fn eval(&self, x: f64, y: f64) -> f64;

    /// Diagonal value `Π(x,x)`, i.e. the one-point intensity.
    fn diagonal(&self, x: f64) -> f64 {
        self.eval(x, x)
    }

    /// Open domain `U` of the kernel.
    fn domain(&self) -> (f64, f64);

    fn label(&self) -> String;

    /// Optional first partial derivatives `(∂₁Π, ∂₂Π)(x, y)`.
    fn derivative(&self, _x: f64, _y: f64) -> Option<(f64, f64)> {
        None
    }
}

/// Domain-checked kernel evaluation.
pub fn kernel_eval_checked(k: &dyn Kernel, x: f64, y: f64) -> Result<f64> {
    let (lo, hi) = k.domain();
    if !(x > lo && x < hi && y > lo && y < hi) {
        return Err(Error::Domain(format!(
            "({x}, {y}) outside domain ({lo}, {hi}) of {}",
            k.label()
        )));
    }
    Ok(k.eval(x, y))
}

/// The sine kernel `S(x,y) = sin(π(x-y)) / (π(x-y))` with `S(x,x) = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SineKernel;

/// Direct evaluation of the sine kernel.
pub fn sine_eval(x: f64, y: f64) -> f64 {
    let d = std::f64::consts::PI * (x - y);
    if d.abs() < 1e-9 {
        // sin(d)/d = 1 - d²/6 + O(d⁴)
        1.0 - d * d / 6.0
    } else {
        d.sin() / d
    }
}

impl Kernel for SineKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        sine_eval(x, y)
    }

    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn label(&self) -> String {
        "sine".into()
    }

    fn derivative(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let pi = std::f64::consts::PI;
        let d = pi * (x - y);
        let g = if d.abs() < 1e-5 {
            // d/dd [sin d / d] = -d/3 + d³/30 + O(d⁵)
            -d / 3.0 + d.powi(3) / 30.0
        } else {
            (d * d.cos() - d.sin()) / (d * d)
        };
        Some((pi * g, -pi * g))
    }
}

/// Parameters of the Bessel kernel `J_s`; requires `s > -1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselKernelParams {
    s: f64,
}

impl BesselKernelParams {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > -1.0) {
            return Err(Error::InvalidParameter(format!(
                "Bessel kernel needs s > -1, got {s}"
            )));
        }
        Ok(BesselKernelParams { s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

/// The Bessel kernel on `(0, ∞)`,
///
/// ```text
/// J_s(x,y) = (√x J_{s+1}(√x) J_s(√y) - √y J_{s+1}(√y) J_s(√x)) / (2(x-y)),
/// ```
///
/// with the confluent form `(J_s² - J_{s-1} J_{s+1})(√x)/4` near the diagonal.
#[derive(Debug, Clone, Copy)]
pub struct BesselKernel {
    params: BesselKernelParams,
}

impl BesselKernel {
    pub fn new(s: f64) -> Result<Self> {
        Ok(BesselKernel {
            params: BesselKernelParams::new(s)?,
        })
    }

    pub fn s(&self) -> f64 {
        self.params.s
    }

    fn eval_inner(&self, x: f64, y: f64) -> f64 {
        let s = self.params.s;
        if (x - y).abs() < DIAGONAL_SWITCH * (1.0 + x.abs()) {
            let a = (0.5 * (x + y)).sqrt();
            let js = bessel_j(s, a).expect("order and argument in range");
            let jm = bessel_j(s - 1.0, a).expect("order and argument in range");
            let jp = bessel_j(s + 1.0, a).expect("order and argument in range");
            0.25 * (js * js - jm * jp)
        } else {
            let (rx, ry) = (x.sqrt(), y.sqrt());
            let jsx = bessel_j(s, rx).expect("order and argument in range");
            let jsy = bessel_j(s, ry).expect("order and argument in range");
            let jpx = bessel_j(s + 1.0, rx).expect("order and argument in range");
            let jpy = bessel_j(s + 1.0, ry).expect("order and argument in range");
            (rx * jpx * jsy - ry * jpy * jsx) / (2.0 * (x - y))
        }
    }

    /// Domain-checked evaluation; errors on nonpositive arguments.
    pub fn try_eval(&self, x: f64, y: f64) -> Result<f64> {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::Domain(format!(
                "Bessel kernel needs positive arguments, got ({x}, {y})"
            )));
        }
        Ok(self.eval_inner(x, y))
    }
}

impl Kernel for BesselKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.eval_inner(x, y)
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn label(&self) -> String {
        format!("bessel(s={})", self.params.s)
    }
}

/// Residual of `J_s(x,y) = J_{s+2}(x,y) + (s+1)/√(xy) J_{s+1}(√x) J_{s+1}(√y)`
/// maximized over the grid; the two kernel orders and the Bessel-function
/// factor all go through independent evaluations.
pub fn bessel_recurrence_check(s: f64, grid: &[(f64, f64)]) -> Result<f64> {
    let k_s = BesselKernel::new(s)?;
    let k_s2 = BesselKernel::new(s + 2.0)?;
    let mut worst = 0.0_f64;
    for &(x, y) in grid {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::Domain(format!("grid point ({x}, {y}) not positive")));
        }
        let cross = (s + 1.0) / (x * y).sqrt()
            * bessel_j(s + 1.0, x.sqrt())?
            * bessel_j(s + 1.0, y.sqrt())?;
        let r = (k_s.eval(x, y) - k_s2.eval(x, y) - cross).abs();
        worst = worst.max(r);
    }
    Ok(worst)
}

impl Kernel for CdKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        CdKernel::eval(self, x, y)
    }

    fn domain(&self) -> (f64, f64) {
        self.family.support()
    }

    fn label(&self) -> String {
        format!("cd({:?}, n={})", self.family, self.n)
    }
}

impl Kernel for ScaledKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        ScaledKernel::eval(self, x, y).expect("argument within scaled-kernel domain")
    }

    fn domain(&self) -> (f64, f64) {
        ScaledKernel::domain(self)
    }

    fn label(&self) -> String {
        format!("scaled({})", self.base.n)
    }
}

/// Unitary image of a half-line kernel under the substitution `x = t²`:
/// `K'(t₁,t₂) = 2√(t₁t₂) K(t₁², t₂²)`. The induced point process is the
/// image of the original one under `x ↦ √x`, which makes hard-edge kernels
/// nearly stationary and cheap to resolve on a uniform grid.
#[derive(Clone)]
pub struct SqrtMappedKernel {
    base: Arc<dyn Kernel>,
}

impl SqrtMappedKernel {
    pub fn new(base: Arc<dyn Kernel>) -> Result<Self> {
        let (lo, _) = base.domain();
        if lo < 0.0 {
            return Err(Error::Domain(format!(
                "sqrt map needs a kernel on the positive half-line, domain starts at {lo}"
            )));
        }
        Ok(SqrtMappedKernel { base })
    }
}

impl Kernel for SqrtMappedKernel {
    fn eval(&self, t1: f64, t2: f64) -> f64 {
        2.0 * (t1 * t2).sqrt() * self.base.eval(t1 * t1, t2 * t2)
    }

    fn domain(&self) -> (f64, f64) {
        let (_, hi) = self.base.domain();
        (0.0, hi.sqrt())
    }

    fn label(&self) -> String {
        format!("sqrt-map({})", self.base.label())
    }
}

/// A finite ordered configuration of particles inside an observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Vec<f64>,
    window: (f64, f64),
}

impl Configuration {
    /// Sorts the points and validates: all inside the window, no duplicates.
    pub fn new(mut points: Vec<f64>, window: (f64, f64)) -> Result<Self> {
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in points.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidParameter(format!(
                    "duplicate particle at {}",
                    w[0]
                )));
            }
        }
        if let (Some(&first), Some(&last)) = (points.first(), points.last()) {
            if first < window.0 || last > window.1 {
                return Err(Error::InvalidParameter(format!(
                    "particles [{first}, {last}] outside window {window:?}"
                )));
            }
        }
        Ok(Configuration { points, window })
    }

    pub fn empty(window: (f64, f64)) -> Self {
        Configuration {
            points: Vec::new(),
            window,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of particles in `[lo, hi]`.
    pub fn count_in(&self, interval: (f64, f64)) -> usize {
        self.points
            .iter()
            .filter(|&&x| x >= interval.0 && x <= interval.1)
            .count()
    }

    /// Particles inside `[lo, hi]`.
    pub fn restrict_to(&self, interval: (f64, f64)) -> Vec<f64> {
        self.points
            .iter()
            .copied()
            .filter(|&x| x >= interval.0 && x <= interval.1)
            .collect()
    }

    /// Configuration restricted to the complement of `[lo, hi]`.
    pub fn restrict_outside(&self, interval: (f64, f64)) -> Configuration {
        Configuration {
            points: self
                .points
                .iter()
                .copied()
                .filter(|&x| x < interval.0 || x > interval.1)
                .collect(),
            window: self.window,
        }
    }

    /// Union with extra particles, extending the window to cover them.
    pub fn with_extra(&self, extra: &[f64]) -> Result<Configuration> {
        let mut pts = self.points.clone();
        pts.extend_from_slice(extra);
        let mut window = self.window;
        for &p in extra {
            window.0 = window.0.min(p);
            window.1 = window.1.max(p);
        }
        Configuration::new(pts, window)
    }
}

/// `l`-th correlation function `ρ_l(p) = det Π(p_i, p_j)`. Repeated points
/// give exactly 0 (determinant with equal rows).
pub fn correlation_function(k: &dyn Kernel, points: &[f64]) -> f64 {
    let l = points.len();
    if l == 0 {
        return 1.0;
    }
    for i in 0..l {
        for j in i + 1..l {
            if points[i] == points[j] {
                return 0.0;
            }
        }
    }
    let m = DMatrix::from_fn(l, l, |i, j| k.eval(points[i], points[j]));
    m.determinant()
}

/// Kernel reduced at `l` conditioning points: the Schur-complement form
/// `Π^q(x,y) = Π(x,y) - k_x^T G^{-1} k_y` with `G = [Π(q_i, q_j)]` and
/// `k_x = [Π(x, q_i)]`. This is the kernel of the projection onto functions
/// of the range vanishing at every `q_i`, and induces the reduced Palm
/// process conditioned at those points.
#[derive(Clone)]
pub struct PalmReducedKernel {
    base: Arc<dyn Kernel>,
    points: Vec<f64>,
    gram_inv: DMatrix<f64>,
}

impl PalmReducedKernel {
    pub fn conditioning_points(&self) -> &[f64] {
        &self.points
    }

    pub fn base(&self) -> &Arc<dyn Kernel> {
        &self.base
    }

    fn cross(&self, x: f64) -> DVector<f64> {
        DVector::from_fn(self.points.len(), |i, _| self.base.eval(x, self.points[i]))
    }
}

impl Kernel for PalmReducedKernel {
    fn eval(&self, x: f64, y: f64) -> f64 {
        let kx = self.cross(x);
        let ky = self.cross(y);
        self.base.eval(x, y) - (kx.transpose() * &self.gram_inv * ky)[(0, 0)]
    }

    fn domain(&self) -> (f64, f64) {
        self.base.domain()
    }

    fn label(&self) -> String {
        format!("palm({}; {:?})", self.base.label(), self.points)
    }
}

/// Reduce a kernel at distinct conditioning points with strictly positive
/// diagonal; errors if the Gram matrix of the points is not positive
/// definite.
pub fn palm_reduce(base: Arc<dyn Kernel>, points: &[f64]) -> Result<PalmReducedKernel> {
    let l = points.len();
    if l == 0 {
        return Err(Error::InvalidParameter(
            "palm_reduce needs at least one conditioning point".into(),
        ));
    }
    for i in 0..l {
        for j in i + 1..l {
            if points[i] == points[j] {
                return Err(Error::InvalidParameter(format!(
                    "conditioning points must be distinct, got {} twice",
                    points[i]
                )));
            }
        }
        if base.diagonal(points[i]) <= 0.0 {
            return Err(Error::Domain(format!(
                "kernel diagonal vanishes at conditioning point {}",
                points[i]
            )));
        }
    }
    let gram = DMatrix::from_fn(l, l, |i, j| base.eval(points[i], points[j]));
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("Gram matrix of conditioning points not PD".into()))?;
    Ok(PalmReducedKernel {
        base,
        points: points.to_vec(),
        gram_inv: chol.inverse(),
    })
}

/// Windowed integrability diagnostics for the trace-class and
/// Hilbert–Schmidt assumptions.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AssumptionReport {
    /// `∫_window Π(x,x)/(1+|x|) dx`
    pub trace_integral: f64,
    /// `∫_window Π(x,x)/(1+x²) dx`
    pub hs_integral: f64,
    /// Fitted exponent of `Π(x,x)` against `(1+|x|)`.
    pub alpha_hat: f64,
    /// Diagonal decays, so the trace-class integral plausibly converges.
    pub trace_plausible: bool,
    /// `α̂ < 1`: the Hilbert–Schmidt integral plausibly converges.
    pub hs_plausible: bool,
    /// `α̂ < 1/2`, the uniform power bound used for Hilbert–Schmidt limits.
    pub power_bound_half: bool,
}

/// Numerical values of the assumption integrals over a window, plus a fit of
/// the diagonal growth exponent starting from `|x| = fit_from`. Diagnostics
/// only; divergence shows up as a nonnegative exponent.
pub fn assumption_diagnostics(
    k: &dyn Kernel,
    window: (f64, f64),
    fit_from: f64,
) -> Result<AssumptionReport> {
    let (dlo, dhi) = k.domain();
    let lo = window.0.max(dlo);
    let hi = window.1.min(dhi);
    if !(lo < hi) {
        return Err(Error::Domain(format!(
            "window {window:?} does not meet domain ({dlo}, {dhi})"
        )));
    }
    // Nudge off open endpoints where the diagonal may blow up.
    let eps = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    let (lo, hi) = (
        if lo == dlo { lo + eps } else { lo },
        if hi == dhi { hi - eps } else { hi },
    );
    let trace_integral = adaptive_quad(&|x| k.diagonal(x) / (1.0 + x.abs()), lo, hi, 1e-9)?;
    let hs_integral = adaptive_quad(&|x| k.diagonal(x) / (1.0 + x * x), lo, hi, 1e-9)?;

    let edge = hi.abs().max(lo.abs());
    let start = fit_from.abs().max(1e-3).min(0.5 * edge);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let m = 40;
    for i in 0..m {
        let t = (start.ln() + (edge.ln() - start.ln()) * i as f64 / (m - 1) as f64).exp();
        let mut vals = Vec::new();
        if t > lo && t < hi {
            vals.push(k.diagonal(t));
        }
        if -t > lo && -t < hi {
            vals.push(k.diagonal(-t));
        }
        if vals.is_empty() {
            continue;
        }
        let d = vals.iter().sum::<f64>() / vals.len() as f64;
        if d > 0.0 {
            xs.push((1.0 + t).ln());
            ys.push(d.ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::Numerical(
            "not enough probe points for the growth fit".into(),
        ));
    }
    let alpha_hat = ls_slope(&xs, &ys);
    Ok(AssumptionReport {
        trace_integral,
        hs_integral,
        alpha_hat,
        trace_plausible: alpha_hat < 0.0,
        hs_plausible: alpha_hat < 1.0,
        power_bound_half: alpha_hat < 0.5,
    })
}
