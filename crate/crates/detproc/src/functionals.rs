//! Multiplicative functionals `Ψ_{p,q}(X) = ∏_{x∈X} ((x-p)/(x-q))²`.
//!
//! In the trace-class case the truncated product converges as the radius
//! grows; in the Hilbert–Schmidt case it is compensated by
//! `exp(2(p-q) ∫_{[-R,R]∩U} Π(x,x) λ(x) dx)` for an admissible `λ` with
//! `sup |x²λ(x) - x| < ∞`. Everything is carried in log space: products over
//! hundreds of particles would otherwise underflow.

use crate::error::{Error, Result};
use crate::kernels::{Configuration, Kernel};
use crate::quad::{adaptive_quad, ls_slope};
use crate::sampler::{discretize, dpp_sample_batch, SamplerConfig};
use std::sync::Arc;

/// Relative tolerance under which a particle counts as sitting on the pole.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

/// An admissible regularizer: a continuous `λ` with `x²λ(x) - x` bounded.
/// Admissibility is probed on a logarithmic grid out to `|x| = 10⁶`; the sup
/// over all of the line is not numerically checkable.
#[derive(Clone)]
pub struct LambdaRegularizer {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    label: String,
    admissibility_bound: f64,
}

impl LambdaRegularizer {
    /// The rational choice `λ₀(x) = x/(x²+1)`; odd, with bound 1/2.
    pub fn rational() -> Self {
        LambdaRegularizer {
            f: Arc::new(|x: f64| x / (x * x + 1.0)),
            label: "x/(x^2+1)".into(),
            admissibility_bound: 0.5,
        }
    }

    /// Wrap an arbitrary continuous function, probing `sup |x²λ(x) - x|` on a
    /// log grid to `10⁶`; rejects functions where that probe diverges.
    pub fn from_fn(
        label: impl Into<String>,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    ) -> Result<Self> {
        let mut bound = 0.0_f64;
        for i in 0..=240 {
            let x = 10f64.powf(-2.0 + 8.0 * i as f64 / 240.0);
            for sign in [-1.0, 1.0] {
                let t = sign * x;
                let v = (t * t * f(t) - t).abs();
                if !v.is_finite() {
                    return Err(Error::InvalidParameter(
                        "regularizer fails the admissibility probe".into(),
                    ));
                }
                bound = bound.max(v);
            }
        }
        if bound > 1e6 {
            return Err(Error::InvalidParameter(format!(
                "regularizer admissibility bound {bound:.3e} too large"
            )));
        }
        Ok(LambdaRegularizer {
            f,
            label: label.into(),
            admissibility_bound: bound,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn admissibility_bound(&self) -> f64 {
        self.admissibility_bound
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

fn guard_singular(q: f64, x: &Configuration) -> Result<()> {
    for &t in x.points() {
        if (t - q).abs() < SINGULAR_TOLERANCE * (1.0 + q.abs()) {
            return Err(Error::SingularConfiguration { particle: t, q });
        }
    }
    Ok(())
}

/// `log Ψ` truncated at radius `R`:
/// `Σ_{x∈X, |x|≤R} 2 (log|x-p| - log|x-q|)`.
pub fn psi_truncated(p: f64, q: f64, x: &Configuration, r: f64) -> Result<f64> {
    guard_singular(q, x)?;
    Ok(x.points()
        .iter()
        .filter(|&&t| t.abs() <= r)
        .map(|&t| 2.0 * ((t - p).abs().ln() - (t - q).abs().ln()))
        .sum())
}

/// A computed multiplicative-functional value together with the
/// regularization it used.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FunctionalEstimate {
    pub log_value: f64,
    pub truncation_radius: f64,
    /// The additive compensator `2(p-q) ∫_{[-R,R]∩U} Π(x,x) λ(x) dx`
    /// (zero on the trace-class path `λ = 0`).
    pub regularization: f64,
    pub window: (f64, f64),
}

/// Compensator integral `∫_{[-R,R]∩U} Π(x,x) λ(x) dx`. A hard edge at zero is
/// handled by the substitution `t = u²`, which absorbs diagonal singularities
/// `t^s` for every `s > -1`.
pub fn compensator_integral(k: &dyn Kernel, lambda: &LambdaRegularizer, r: f64) -> Result<f64> {
    let (dlo, dhi) = k.domain();
    let lo = (-r).max(dlo);
    let hi = r.min(dhi);
    if !(hi > lo) {
        return Ok(0.0);
    }
    if lo == 0.0 {
        adaptive_quad(
            &|u: f64| {
                let t = u * u;
                if t <= 0.0 {
                    0.0
                } else {
                    2.0 * u * k.diagonal(t) * lambda.eval(t)
                }
            },
            0.0,
            hi.sqrt(),
            1e-10,
        )
    } else {
        adaptive_quad(&|t| k.diagonal(t) * lambda.eval(t), lo, hi, 1e-10)
    }
}

/// Regularized functional `log Ψ^{Π,λ}_{p,q}` truncated at `R`: the truncated
/// product plus the compensator. With `lambda = None` this is the trace-class
/// path (`λ = 0`).
pub fn psi_regularized(
    k: &dyn Kernel,
    lambda: Option<&LambdaRegularizer>,
    p: f64,
    q: f64,
    x: &Configuration,
    r: f64,
) -> Result<FunctionalEstimate> {
    let base = psi_truncated(p, q, x, r)?;
    let regularization = match lambda {
        None => 0.0,
        Some(l) => 2.0 * (p - q) * compensator_integral(k, l, r)?,
    };
    Ok(FunctionalEstimate {
        log_value: base + regularization,
        truncation_radius: r,
        regularization,
        window: x.window(),
    })
}

/// The constant relating two regularizers,
/// `β_Π(λ₁, λ₂) = ∫ (λ₁-λ₂)(x) Π(x,x) dx`, computed over a window with a
/// crude tail estimate (the same integral over a 4× window extension)
/// reported as the error bar.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BetaEstimate {
    pub value: f64,
    pub error_bar: f64,
}

pub fn beta_constant(
    k: &dyn Kernel,
    lambda1: &LambdaRegularizer,
    lambda2: &LambdaRegularizer,
    window: (f64, f64),
) -> Result<BetaEstimate> {
    let (dlo, dhi) = k.domain();
    let lo = window.0.max(dlo);
    let hi = window.1.min(dhi);
    if !(hi > lo) {
        return Err(Error::Domain(format!(
            "window {window:?} does not meet kernel domain"
        )));
    }
    let f = |x: f64| (lambda1.eval(x) - lambda2.eval(x)) * k.diagonal(x);
    let value = if lo == 0.0 {
        adaptive_quad(&|u: f64| 2.0 * u * f(u * u), 0.0, hi.sqrt(), 1e-10)?
    } else {
        adaptive_quad(&f, lo, hi, 1e-10)?
    };
    // tail estimate from the window extension, clipped to the domain
    let mut tail = 0.0;
    let ext_hi = (4.0 * hi.abs().max(1.0)).min(dhi);
    if ext_hi > hi {
        tail += adaptive_quad(&f, hi, ext_hi, 1e-10)?.abs();
    }
    let ext_lo = (-4.0 * lo.abs().max(1.0)).max(dlo);
    if ext_lo < lo {
        tail += adaptive_quad(&f, ext_lo, lo, 1e-10)?.abs();
    }
    Ok(BetaEstimate {
        value,
        error_bar: tail,
    })
}

/// Split extra particles off a functional value:
/// `log Ψ(X ∪ {t_i}) = log Ψ(X) + Σ_i 2 (log|t_i-p| - log|t_i-q|)`.
pub fn particle_split_eval(
    base: &FunctionalEstimate,
    extra: &[f64],
    p: f64,
    q: f64,
) -> Result<f64> {
    let mut total = base.log_value;
    for &t in extra {
        if (t - q).abs() < SINGULAR_TOLERANCE * (1.0 + q.abs()) {
            return Err(Error::SingularConfiguration { particle: t, q });
        }
        total += 2.0 * ((t - p).abs().ln() - (t - q).abs().ln());
    }
    Ok(total)
}

/// Strictly increasing truncation radii.
#[derive(Debug, Clone)]
pub struct TruncationSchedule {
    radii: Vec<f64>,
}

impl TruncationSchedule {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
            return Err(Error::InvalidParameter(
                "truncation radii must be positive and strictly increasing".into(),
            ));
        }
        Ok(TruncationSchedule { radii })
    }

    /// The quartic schedule `R_k = W (k/m)⁴` scaled to a window half-width.
    pub fn quartic(half_width: f64, m: usize) -> Result<Self> {
        Self::new(
            (1..=m)
                .map(|k| half_width * (k as f64 / m as f64).powi(4))
                .collect(),
        )
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn max_radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }
}

/// Per-radius Monte Carlo variance of the tail sum
/// `Σ_{x∈X, |x|≥R} (log|x-p| - log|x-q|)` with the fitted slope of
/// `log Var` against `log R`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct VarianceScan {
    pub rows: Vec<(f64, f64)>,
    pub fitted_slope: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn variance_scan(
    k: &dyn Kernel,
    p: f64,
    q: f64,
    schedule: &TruncationSchedule,
    cfg: &SamplerConfig,
    window: (f64, f64),
    grid_n: usize,
    n_samples: usize,
) -> Result<VarianceScan> {
    if n_samples < 1_000 {
        return Err(Error::InvalidParameter(format!(
            "variance scan needs at least 10^3 samples, got {n_samples}"
        )));
    }
    let half = window.1.max(-window.0);
    if schedule.max_radius() > half {
        return Err(Error::InvalidParameter(
            "sampling window must contain the largest truncation radius".into(),
        ));
    }
    let dk = discretize(k, window, grid_n)?;
    let (samples, _) = dpp_sample_batch(&dk, cfg, n_samples)?;
    let radii = schedule.radii();
    let mut sums = vec![0.0_f64; radii.len()];
    let mut sqs = vec![0.0_f64; radii.len()];
    for x in &samples {
        for (ri, &r) in radii.iter().enumerate() {
            let t: f64 = x
                .points()
                .iter()
                .filter(|&&v| v.abs() >= r)
                .map(|&v| (v - p).abs().ln() - (v - q).abs().ln())
                .sum();
            sums[ri] += t;
            sqs[ri] += t * t;
        }
    }
    let n = n_samples as f64;
    let rows: Vec<(f64, f64)> = radii
        .iter()
        .enumerate()
        .map(|(ri, &r)| {
            let mean = sums[ri] / n;
            (r, (sqs[ri] / n - mean * mean).max(0.0) * n / (n - 1.0))
        })
        .collect();
    let fit: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|&(r, v)| (r.ln(), v.ln()))
        .collect();
    let fitted_slope = if fit.len() >= 2 {
        let xs: Vec<f64> = fit.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = fit.iter().map(|p| p.1).collect();
        Some(ls_slope(&xs, &ys))
    } else {
        None
    };
    Ok(VarianceScan { rows, fitted_slope })
}

/// Fraction of sampled configurations whose successive truncation gaps
/// `|log Ψ(R_{k+1}) - log Ψ(R_k)|` are nonincreasing along the schedule — a
/// convergence diagnostic, reported rather than asserted per sample.
pub fn truncation_monotonicity_fraction(
    k: &dyn Kernel,
    lambda: Option<&LambdaRegularizer>,
    p: f64,
    q: f64,
    schedule: &TruncationSchedule,
    samples: &[Configuration],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples supplied".into()));
    }
    let mut ok = 0usize;
    for x in samples {
        let mut prev_gap = f64::INFINITY;
        let mut prev_val = psi_regularized(k, lambda, p, q, x, schedule.radii()[0])?.log_value;
        let mut monotone = true;
        for &r in &schedule.radii()[1..] {
            let val = psi_regularized(k, lambda, p, q, x, r)?.log_value;
            let gap = (val - prev_val).abs();
            if gap > prev_gap + 1e-12 {
                monotone = false;
                break;
            }
            prev_gap = gap;
            prev_val = val;
        }
        ok += usize::from(monotone);
    }
    Ok(ok as f64 / samples.len() as f64)
}
