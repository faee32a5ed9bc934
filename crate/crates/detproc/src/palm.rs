//! Radon–Nikodym derivatives between reduced Palm measures.
//!
//! For a projection kernel `Π` with weight function `ρ` the order-l
//! derivative factorizes as
//!
//! ```text
//! dP^{p₁..p_l}/dP^{q₁..q_l}(X) = det Π(q_i,q_j)/det Π(p_i,p_j)
//!     · ∏_{i<j} ((p_i-p_j)/(q_i-q_j))²
//!     · ∏_i ρ(p_i)/ρ(q_i) · Ψ_{p_i,q_i}(X),
//! ```
//!
//! and `ρ` itself is only ever needed through ratios: it is defined up to a
//! multiplicative constant. The estimators here recover those ratios three
//! ways — Monte Carlo against sampled Palm configurations, finite-n weight
//! ratios under the classical scaling substitutions, and exact small-n
//! quadrature.

use crate::error::{Error, Result};
use crate::functionals::{psi_truncated, LambdaRegularizer};
use crate::kernels::{correlation_function, palm_reduce, Configuration, Kernel, SqrtMappedKernel};
use crate::orthopoly::{CdKernel, OrthoPolyFamily};
use crate::quad::tensor_integrate;
use crate::sampler::{discretize, dpp_sample_counted, stream_rng, SamplerConfig};
use rayon::prelude::*;
use std::sync::Arc;

/// Log-ratio provider `(p, q) -> log ρ(p)/ρ(q)`.
pub type RhoRatioFn<'a> = &'a (dyn Fn(f64, f64) -> f64 + Sync);

/// Multiplicative-functional provider `(p, q, X, R) -> log Ψ_{p,q}(X)`.
pub type PsiFn<'a> = &'a (dyn Fn(f64, f64, &Configuration, f64) -> Result<f64> + Sync);

/// The standard truncated-product provider.
pub fn truncated_psi_provider() -> impl Fn(f64, f64, &Configuration, f64) -> Result<f64> + Sync {
    psi_truncated
}

/// Component breakdown of a log Radon–Nikodym value; the total is the exact
/// floating-point sum of the four parts.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RnComponents {
    /// `log det Π(q_i,q_j) - log det Π(p_i,p_j)`
    pub log_det_ratio: f64,
    /// `Σ_{i<j} 2 (log|p_i-p_j| - log|q_i-q_j|)`
    pub log_vandermonde_ratio: f64,
    /// `Σ_i log ρ(p_i)/ρ(q_i)`
    pub log_rho_ratio_sum: f64,
    /// `Σ_i log Ψ_{p_i,q_i}(X)`
    pub log_psi_sum: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RnDerivativeReport {
    pub p_tuple: Vec<f64>,
    pub q_tuple: Vec<f64>,
    pub log_rn: f64,
    pub components: RnComponents,
    pub truncation_radius: f64,
}

fn validate_tuples(p: &[f64], q: &[f64], x: &Configuration) -> Result<()> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::InvalidParameter(
            "tuples must be nonempty and of equal length".into(),
        ));
    }
    let mut all: Vec<f64> = p.iter().chain(q.iter()).copied().collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in all.windows(2) {
        if w[0] == w[1] {
            return Err(Error::InvalidParameter(format!(
                "tuple points must be distinct, {} repeats",
                w[0]
            )));
        }
    }
    for &t in &all {
        if x.points().contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "tuple point {t} coincides with a configuration particle"
            )));
        }
    }
    Ok(())
}

/// Assemble the order-l log Radon–Nikodym derivative with its component
/// breakdown.
pub fn rn_derivative_order_l(
    k: &dyn Kernel,
    rho_log_ratio: RhoRatioFn,
    psi: PsiFn,
    p_tuple: &[f64],
    q_tuple: &[f64],
    x: &Configuration,
    r: f64,
) -> Result<RnDerivativeReport> {
    validate_tuples(p_tuple, q_tuple, x)?;
    let det_p = correlation_function(k, p_tuple);
    let det_q = correlation_function(k, q_tuple);
    if !(det_p > 0.0) || !(det_q > 0.0) {
        return Err(Error::Numerical(format!(
            "correlation determinants must be positive, got {det_p} and {det_q}"
        )));
    }
    let log_det_ratio = det_q.ln() - det_p.ln();
    let l = p_tuple.len();
    let mut log_vandermonde_ratio = 0.0;
    for i in 0..l {
        for j in i + 1..l {
            log_vandermonde_ratio +=
                2.0 * ((p_tuple[i] - p_tuple[j]).abs().ln() - (q_tuple[i] - q_tuple[j]).abs().ln());
        }
    }
    let mut log_rho_ratio_sum = 0.0;
    let mut log_psi_sum = 0.0;
    for i in 0..l {
        log_rho_ratio_sum += rho_log_ratio(p_tuple[i], q_tuple[i]);
        log_psi_sum += psi(p_tuple[i], q_tuple[i], x, r)?;
    }
    let log_rn = log_det_ratio + log_vandermonde_ratio + log_rho_ratio_sum + log_psi_sum;
    Ok(RnDerivativeReport {
        p_tuple: p_tuple.to_vec(),
        q_tuple: q_tuple.to_vec(),
        log_rn,
        components: RnComponents {
            log_det_ratio,
            log_vandermonde_ratio,
            log_rho_ratio_sum,
            log_psi_sum,
        },
        truncation_radius: r,
    })
}

/// Residual of the order-l derivative against the telescoping product of
/// order-1 derivatives evaluated on mixed configurations
/// `X ∪ q₁ ∪ … ∪ q_{i-1} ∪ p_{i+1} ∪ … ∪ p_l`. Both sides carry their
/// correlation prefactors `ρ_l` resp. `ρ₁`.
pub fn palm_dif_identity_check(
    k: &dyn Kernel,
    rho_log_ratio: RhoRatioFn,
    psi: PsiFn,
    p_tuple: &[f64],
    q_tuple: &[f64],
    x: &Configuration,
    r: f64,
) -> Result<f64> {
    let l = p_tuple.len();
    for &t in p_tuple.iter().chain(q_tuple.iter()) {
        if t.abs() > r {
            return Err(Error::InvalidParameter(format!(
                "tuple point {t} outside truncation radius {r}; the identity needs all mixed points inside"
            )));
        }
    }
    let order_l = rn_derivative_order_l(k, rho_log_ratio, psi, p_tuple, q_tuple, x, r)?;
    let lhs = -order_l.components.log_det_ratio + order_l.log_rn;
    let mut rhs = 0.0;
    for i in 0..l {
        let mut mixed: Vec<f64> = Vec::with_capacity(l - 1);
        mixed.extend_from_slice(&q_tuple[..i]);
        mixed.extend_from_slice(&p_tuple[i + 1..]);
        let augmented = x.with_extra(&mixed)?;
        let rn1 = rn_derivative_order_l(
            k,
            rho_log_ratio,
            psi,
            &p_tuple[i..=i],
            &q_tuple[i..=i],
            &augmented,
            r,
        )?;
        rhs += -rn1.components.log_det_ratio + rn1.log_rn;
    }
    Ok((lhs - rhs).abs())
}

/// The `Φ`-factorized form with `Φ(p,q) = |p-q|²`:
/// `Σ_{i<j} log Φ(p_i,p_j)/Φ(q_i,q_j) + Σ_i log Ψ(p_i,q_i,X)`. Equals the
/// order-l derivative minus its determinant and ρ components.
pub fn phi_palm_formula(
    p_tuple: &[f64],
    q_tuple: &[f64],
    x: &Configuration,
    psi: PsiFn,
    r: f64,
) -> Result<f64> {
    validate_tuples(p_tuple, q_tuple, x)?;
    let l = p_tuple.len();
    let phi = |a: f64, b: f64| (a - b) * (a - b);
    let mut total = 0.0;
    for i in 0..l {
        for j in i + 1..l {
            total += phi(p_tuple[i], p_tuple[j]).ln() - phi(q_tuple[i], q_tuple[j]).ln();
        }
    }
    for i in 0..l {
        total += psi(p_tuple[i], q_tuple[i], x, r)?;
    }
    Ok(total)
}

/// How a ρ-ratio estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoMethod {
    McPalm,
    FiniteNLimit,
    ClosedForm,
}

/// An estimate of `ρ(p)/ρ(q)` with its uncertainty.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RhoEstimate {
    pub p: f64,
    pub q: f64,
    pub ratio: f64,
    pub std_error: f64,
    pub method: RhoMethod,
    pub n_samples: usize,
    pub warning: Option<String>,
}

/// Coordinate map used for the sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMap {
    /// Discretize the kernel as-is.
    Identity,
    /// Discretize the unitary image under `x = t²`; resolves hard-edge
    /// kernels, whose points spread out like squares, on a uniform grid.
    Sqrt,
}

/// Options for the Monte Carlo ρ-ratio estimator.
#[derive(Debug, Clone)]
pub struct RhoMcOptions {
    /// Sampling window in the kernel's native coordinates.
    pub window: (f64, f64),
    pub grid_n: usize,
    pub map: GridMap,
    pub n_samples: usize,
    /// Truncation radius for Ψ; defaults to the window edge.
    pub truncation: Option<f64>,
}

/// Estimate `ρ(p)/ρ(q)` from the Palm identity
/// `∫ Ψ_{p,q} dP^q = ρ(q) Π(p,p) / (ρ(p) Π(q,q))`: sample the reduced Palm
/// process at `q` on a grid, average `Ψ`, and invert. Standard errors come
/// from 64 contiguous batches; a median-of-batch-means disagreement above 20%
/// flags the run, since `Ψ` has heavy tails near the conditioning point.
pub fn rho_estimate_mc(
    k: Arc<dyn Kernel>,
    lambda: Option<&LambdaRegularizer>,
    p: f64,
    q: f64,
    cfg: &SamplerConfig,
    opts: &RhoMcOptions,
) -> Result<RhoEstimate> {
    cfg.validate()?;
    if opts.n_samples < 1_000 {
        return Err(Error::InvalidParameter(format!(
            "rho estimation needs at least 10^3 samples, got {}",
            opts.n_samples
        )));
    }
    let (dlo, dhi) = k.domain();
    if !(p > dlo && p < dhi && q > dlo && q < dhi) {
        return Err(Error::Domain(format!(
            "p = {p}, q = {q} outside kernel domain"
        )));
    }
    if p == q {
        return Ok(RhoEstimate {
            p,
            q,
            ratio: 1.0,
            std_error: 0.0,
            method: RhoMethod::McPalm,
            n_samples: 0,
            warning: None,
        });
    }
    let r = opts
        .truncation
        .unwrap_or(opts.window.1.abs().max(opts.window.0.abs()));
    // compensator is configuration-independent; fold it in once
    let comp = match lambda {
        None => 0.0,
        Some(l) => 2.0 * (p - q) * crate::functionals::compensator_integral(k.as_ref(), l, r)?,
    };
    // reduced Palm kernel in sampling coordinates
    let (sample_kernel, sample_window): (Arc<dyn Kernel>, (f64, f64)) = match opts.map {
        GridMap::Identity => (
            Arc::new(palm_reduce(k.clone(), &[q])?) as Arc<dyn Kernel>,
            opts.window,
        ),
        GridMap::Sqrt => {
            let mapped: Arc<dyn Kernel> = Arc::new(SqrtMappedKernel::new(k.clone())?);
            (
                Arc::new(palm_reduce(mapped, &[q.sqrt()])?) as Arc<dyn Kernel>,
                (opts.window.0.max(0.0).sqrt(), opts.window.1.sqrt()),
            )
        }
    };
    let dk = discretize(sample_kernel.as_ref(), sample_window, opts.grid_n)?;

    let streams = cfg.n_streams;
    let per = opts.n_samples / streams;
    let extra = opts.n_samples % streams;
    let mut stream_values: Vec<(usize, Result<Vec<f64>>)> = (0..streams)
        .into_par_iter()
        .map(|s| {
            let count = per + usize::from(s < extra);
            let mut rng = stream_rng(cfg.seed, s as u64);
            let mut vals = Vec::with_capacity(count);
            for _ in 0..count {
                let sampled = match dpp_sample_counted(&dk, &mut rng) {
                    Ok((c, _)) => c,
                    Err(e) => return (s, Err(e)),
                };
                // map grid coordinates back to the kernel's native space
                let x_cfg = match opts.map {
                    GridMap::Identity => sampled,
                    GridMap::Sqrt => {
                        let pts: Vec<f64> = sampled.points().iter().map(|&t| t * t).collect();
                        match Configuration::new(pts, opts.window) {
                            Ok(c) => c,
                            Err(e) => return (s, Err(e)),
                        }
                    }
                };
                match psi_truncated(p, q, &x_cfg, r) {
                    Ok(lv) => vals.push((lv + comp).exp()),
                    Err(e) => return (s, Err(e)),
                }
            }
            (s, Ok(vals))
        })
        .collect();
    stream_values.sort_by_key(|v| v.0);
    let mut values = Vec::with_capacity(opts.n_samples);
    for (_, v) in stream_values {
        values.extend(v?);
    }

    let n = values.len();
    let mean: f64 = values.iter().sum::<f64>() / n as f64;
    let n_batches = 64.min(n);
    let batch_len = n / n_batches;
    let mut batch_means: Vec<f64> = (0..n_batches)
        .map(|b| {
            let lo = b * batch_len;
            let hi = if b + 1 == n_batches {
                n
            } else {
                lo + batch_len
            };
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let bm = batch_means.iter().sum::<f64>() / n_batches as f64;
    let bvar =
        batch_means.iter().map(|v| (v - bm) * (v - bm)).sum::<f64>() / (n_batches - 1) as f64;
    let se_mean = (bvar / n_batches as f64).sqrt();
    batch_means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = batch_means[n_batches / 2];
    let spread = (batch_means[n_batches - 1] - batch_means[0]) / mean.abs().max(1e-300);
    let mut warnings = Vec::new();
    if (median - mean).abs() > 0.2 * mean.abs() {
        warnings.push(format!(
            "median of batch means {median:.4e} disagrees with mean {mean:.4e} by more than 20%"
        ));
    }
    if spread > 0.5 {
        warnings.push(format!("batch means vary by {:.0}%", spread * 100.0));
    }
    let ratio = k.diagonal(p) / (k.diagonal(q) * mean);
    let std_error = ratio * se_mean / mean;
    Ok(RhoEstimate {
        p,
        q,
        ratio,
        std_error,
        method: RhoMethod::McPalm,
        n_samples: n,
        warning: if warnings.is_empty() {
            None
        } else {
            Some(warnings.join("; "))
        },
    })
}

/// Finite-n ρ-ratio sequence under the classical substitutions, with its
/// extrapolated limit: Jacobi weights under `u = 1 - t/(2n²)` give
/// `(p/q)^s` at every n, Hermite weights under the bulk scaling give
/// `exp(-(p²-q²)/(2n)) → 1`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RhoLimitSequence {
    pub rows: Vec<(usize, f64)>,
    pub extrapolated: f64,
}

pub fn rho_finite_n_limit(
    family: &OrthoPolyFamily,
    ns: &[usize],
    p: f64,
    q: f64,
) -> Result<RhoLimitSequence> {
    if ns.len() < 2 {
        return Err(Error::InvalidParameter("need at least two n values".into()));
    }
    let rows: Vec<(usize, f64)> = match family {
        OrthoPolyFamily::Jacobi { s } => {
            if !(p > 0.0 && q > 0.0) {
                return Err(Error::Domain("hard-edge limit needs positive p, q".into()));
            }
            ns.iter()
                .map(|&n| {
                    let scale = 2.0 * (n * n) as f64;
                    // (1 - u_t) = t / (2n²) by definition of the substitution
                    (n, ((p / scale) / (q / scale)).powf(*s))
                })
                .collect()
        }
        OrthoPolyFamily::Hermite => ns
            .iter()
            .map(|&n| (n, (-(p * p - q * q) / (2.0 * n as f64)).exp()))
            .collect(),
    };
    // extrapolate log r = a + b/n through the last two entries
    let (n1, r1) = rows[rows.len() - 2];
    let (n2, r2) = rows[rows.len() - 1];
    let (i1, i2) = (1.0 / n1 as f64, 1.0 / n2 as f64);
    let extrapolated = if (i1 - i2).abs() < 1e-15 || r1 == r2 {
        r2
    } else {
        let a = (r2.ln() * i1 - r1.ln() * i2) / (i1 - i2);
        a.exp()
    };
    Ok(RhoLimitSequence { rows, extrapolated })
}

/// Exact check of the Palm integral identity at finite n:
/// `∫ Ψ_{p,q} dP^q` over the (n-1)-point Palm ensemble with density
/// `∝ ∏(x_i-x_j)² ∏(x_i-q)² ∏ w(x_i)` is computed by tensor quadrature and
/// compared against `ρ(q) Π(p,p) / (ρ(p) Π(q,q))` with `ρ = w`. Returns
/// `|quad · ρ(p)Π(q,q)/(ρ(q)Π(p,p)) - 1|`.
pub fn finite_n_palm_integral_check(
    family: &OrthoPolyFamily,
    n: usize,
    p: f64,
    q: f64,
    quad_order: usize,
) -> Result<f64> {
    if n == 0 || n > 4 {
        return Err(Error::InvalidParameter(format!(
            "palm integral check limited to 1 <= n <= 4, got {n}"
        )));
    }
    let (lo, hi) = family.support();
    if !(p > lo && p < hi && q > lo && q < hi) {
        return Err(Error::Domain(format!("p = {p}, q = {q} outside support")));
    }
    let rule = family.gauss_rule(quad_order)?;
    let squared_vandermonde_with_root = |pts: &[f64], root: f64| -> f64 {
        let mut v = 1.0;
        for (i, &xi) in pts.iter().enumerate() {
            let d = xi - root;
            v *= d * d;
            for &xj in &pts[i + 1..] {
                let e = xi - xj;
                v *= e * e;
            }
        }
        v
    };
    let i_p = tensor_integrate(&rule, n - 1, |pts| squared_vandermonde_with_root(pts, p));
    let i_q = tensor_integrate(&rule, n - 1, |pts| squared_vandermonde_with_root(pts, q));
    if !(i_q > 0.0) {
        return Err(Error::Numerical(format!(
            "Palm normalization {i_q} not positive"
        )));
    }
    let quad_value = i_p / i_q; // = ∫ Ψ_{p,q} dP^q
    let kernel = CdKernel::new(*family, n)?;
    let ratio =
        quad_value * family.weight(p) * kernel.eval(q, q) / (family.weight(q) * kernel.eval(p, p));
    Ok((ratio - 1.0).abs())
}

/// Brute-force log Radon–Nikodym derivative of the finite-n ensemble: the
/// order-l Palm density at tuple `t` is
/// `Z_t^{-1} ∏(x_i-x_j)² ∏_{i,a}(x_i-t_a)² ∏ w(x_i)` on `n-l` points, so the
/// derivative at `X` is `(Z_q/Z_p) ∏_{x,a} ((x-p_a)/(x-q_a))²` with both
/// normalizations evaluated by tensor quadrature. Independent of the
/// component assembly in [`rn_derivative_order_l`].
pub fn finite_n_rn_brute_force(
    family: &OrthoPolyFamily,
    n: usize,
    p_tuple: &[f64],
    q_tuple: &[f64],
    x: &Configuration,
    quad_order: usize,
) -> Result<f64> {
    let l = p_tuple.len();
    if l != q_tuple.len() || l == 0 || l >= n {
        return Err(Error::InvalidParameter(
            "need tuples of equal length 1 <= l < n".into(),
        ));
    }
    if x.len() != n - l {
        return Err(Error::InvalidParameter(format!(
            "configuration must have n - l = {} particles, got {}",
            n - l,
            x.len()
        )));
    }
    if n - l > 4 {
        return Err(Error::InvalidParameter(
            "brute-force normalization limited to n - l <= 4".into(),
        ));
    }
    let rule = family.gauss_rule(quad_order)?;
    let z = |tuple: &[f64]| -> f64 {
        tensor_integrate(&rule, n - l, |pts| {
            let mut v = 1.0;
            for (i, &xi) in pts.iter().enumerate() {
                for &xj in &pts[i + 1..] {
                    let d = xi - xj;
                    v *= d * d;
                }
                for &t in tuple {
                    let d = xi - t;
                    v *= d * d;
                }
            }
            v
        })
    };
    let z_p = z(p_tuple);
    let z_q = z(q_tuple);
    if !(z_p > 0.0 && z_q > 0.0) {
        return Err(Error::Numerical("nonpositive normalization".into()));
    }
    let mut log_rn = z_q.ln() - z_p.ln();
    for &xi in x.points() {
        for a in 0..l {
            log_rn += 2.0 * ((xi - p_tuple[a]).abs().ln() - (xi - q_tuple[a]).abs().ln());
        }
    }
    Ok(log_rn)
}
