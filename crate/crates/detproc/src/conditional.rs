//! Conditional measures on a compact interval given the outside
//! configuration.
//!
//! Given the configuration outside a compact interval `I`, the conditional
//! law inside is an orthogonal polynomial ensemble with weight
//!
//! ```text
//! ρ_{I,X}(p)/ρ_{I,X}(q) = ρ(p)/ρ(q) · Ψ_{p,q}(X restricted outside I),
//! ```
//!
//! verified here two ways: exact algebra at finite n, where conditioning is a
//! plain density factorization, and Monte Carlo at the sine / Bessel level,
//! where fresh inside points drawn from the predicted ensemble must be
//! statistically indistinguishable from the sampled ones. Quasi-invariance
//! under piecewise isometries supplies the companion Radon–Nikodym check.

use crate::error::{Error, Result};
use crate::functionals::{compensator_integral, LambdaRegularizer, SINGULAR_TOLERANCE};
use crate::kernels::{Configuration, Kernel, SqrtMappedKernel};
use crate::orthopoly::OrthoPolyFamily;
use crate::palm::{GridMap, RhoRatioFn};
use crate::quad::GaussRule;
use crate::sampler::{discretize, dpp_sample_counted, stream_rng, OpeSpec, SamplerConfig};
use rand::prelude::*;
use rayon::prelude::*;
use std::sync::Arc;

/// A compact interval together with the configuration outside it and the
/// number of particles that were observed inside.
#[derive(Debug, Clone)]
pub struct WindowCondition {
    pub interval: (f64, f64),
    pub outside: Configuration,
    pub inside_count: usize,
}

impl WindowCondition {
    pub fn new(interval: (f64, f64), outside: Configuration, inside_count: usize) -> Result<Self> {
        if !(interval.1 > interval.0) {
            return Err(Error::InvalidParameter(format!(
                "degenerate interval {interval:?}"
            )));
        }
        if outside.count_in(interval) > 0 {
            return Err(Error::InvalidParameter(
                "outside configuration has particles inside the interval".into(),
            ));
        }
        Ok(WindowCondition {
            interval,
            outside,
            inside_count,
        })
    }

    /// Split a full configuration into inside count and outside part.
    pub fn from_configuration(x: &Configuration, interval: (f64, f64)) -> Result<Self> {
        Self::new(interval, x.restrict_outside(interval), x.count_in(interval))
    }

    /// The particles that were inside (for checks that need them).
    pub fn inside_of(x: &Configuration, interval: (f64, f64)) -> Vec<f64> {
        x.restrict_to(interval)
    }
}

/// The conditional weight `ρ_{I,X}` represented through log ratios against a
/// reference point `q₀ ∈ I`.
#[derive(Clone)]
pub struct ConditionalWeight {
    pub q0: f64,
    pub interval: (f64, f64),
    pub truncation_radius: f64,
    pub lambda_label: Option<String>,
    rho_log_ratio: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    outside_points: Arc<Vec<f64>>,
    /// `2 ∫ Π λ` so the compensator of `Ψ_{p,q₀}` is `slope · (p - q₀)`.
    compensator_slope: f64,
}

impl ConditionalWeight {
    /// `log ρ_{I,X}(p)/ρ_{I,X}(q₀)`; `p` must lie in the interval.
    pub fn log_ratio(&self, p: f64) -> Result<f64> {
        if p < self.interval.0 || p > self.interval.1 {
            return Err(Error::Domain(format!(
                "{p} outside the conditioning interval {:?}",
                self.interval
            )));
        }
        Ok(self.log_ratio_unchecked(p))
    }

    fn log_ratio_unchecked(&self, p: f64) -> f64 {
        let mut total = (self.rho_log_ratio)(p, self.q0) + self.compensator_slope * (p - self.q0);
        for &x in self.outside_points.iter() {
            total += 2.0 * ((x - p).abs().ln() - (x - self.q0).abs().ln());
        }
        total
    }
}

/// Build the conditional weight
/// `log ρ_{I,X}(p)/ρ_{I,X}(q₀) = log ρ(p)/ρ(q₀) + log Ψ^{Π[,λ]}_{p,q₀}(X_out)`
/// with the outside product truncated at the window edge.
pub fn conditional_weight(
    k: &dyn Kernel,
    lambda: Option<&LambdaRegularizer>,
    rho_log_ratio: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    cond: &WindowCondition,
    q0: f64,
) -> Result<ConditionalWeight> {
    if q0 < cond.interval.0 || q0 > cond.interval.1 {
        return Err(Error::InvalidParameter(format!(
            "reference point {q0} outside interval {:?}",
            cond.interval
        )));
    }
    for &x in cond.outside.points() {
        if (x - q0).abs() < SINGULAR_TOLERANCE * (1.0 + q0.abs()) {
            return Err(Error::SingularConfiguration { particle: x, q: q0 });
        }
    }
    let window = cond.outside.window();
    let r = window.0.abs().max(window.1.abs());
    let compensator_slope = match lambda {
        None => 0.0,
        Some(l) => 2.0 * compensator_integral(k, l, r)?,
    };
    let outside_points: Vec<f64> = cond
        .outside
        .points()
        .iter()
        .copied()
        .filter(|x| x.abs() <= r)
        .collect();
    Ok(ConditionalWeight {
        q0,
        interval: cond.interval,
        truncation_radius: r,
        lambda_label: lambda.map(|l| l.label().to_string()),
        rho_log_ratio,
        outside_points: Arc::new(outside_points),
        compensator_slope,
    })
}

/// The predicted conditional ensemble: `l` points on `I` with log weight
/// given by the conditional ratio. `l = 0` is the point mass on the empty
/// configuration.
pub fn conditional_density(cw: &ConditionalWeight, l: usize) -> Result<OpeSpec> {
    let cw = cw.clone();
    let interval = cw.interval;
    OpeSpec::new(
        l,
        interval,
        Arc::new(move |t: f64| {
            if t < interval.0 || t > interval.1 {
                f64::NEG_INFINITY
            } else {
                cw.log_ratio_unchecked(t)
            }
        }),
    )
}

/// Exact finite-n check of the conditional factorization: for the n-point
/// ensemble with weight `w` and fixed outside points, the conditional density
/// of the inside points is proportional to
/// `∏_{i<j}(t_i-t_j)² ∏_i ρ_{I,X}(t_i)` with `ρ_{I,X}(t) = w(t) ∏_out (x-t)²`.
/// Compares unnormalized log-ratios between two inside tuples computed from
/// the factorized joint density and from the formula; returns the absolute
/// residual, which is pure floating point since the identity is exact
/// algebra.
pub fn finite_n_conditional_check(
    family: &OrthoPolyFamily,
    n: usize,
    interval: (f64, f64),
    outside: &[f64],
    inside_a: &[f64],
    inside_b: &[f64],
) -> Result<f64> {
    let l = inside_a.len();
    if inside_b.len() != l || outside.len() + l != n {
        return Err(Error::InvalidParameter(
            "need |inside_a| = |inside_b| and |outside| + l = n".into(),
        ));
    }
    for &x in outside {
        if x >= interval.0 && x <= interval.1 {
            return Err(Error::InvalidParameter(format!(
                "outside point {x} lies in the interval"
            )));
        }
    }
    for &t in inside_a.iter().chain(inside_b.iter()) {
        if t < interval.0 || t > interval.1 {
            return Err(Error::InvalidParameter(format!(
                "inside point {t} not in the interval"
            )));
        }
    }
    let joint_log = |inside: &[f64]| -> f64 {
        let all: Vec<f64> = inside.iter().chain(outside.iter()).copied().collect();
        let mut total = 0.0;
        for (i, &zi) in all.iter().enumerate() {
            total += family.log_weight(zi);
            for &zj in &all[i + 1..] {
                total += 2.0 * (zi - zj).abs().ln();
            }
        }
        total
    };
    let direct = joint_log(inside_a) - joint_log(inside_b);

    let formula_log = |inside: &[f64]| -> f64 {
        let mut total = 0.0;
        for (i, &ti) in inside.iter().enumerate() {
            total += family.log_weight(ti);
            for &x in outside {
                total += 2.0 * (x - ti).abs().ln();
            }
            for &tj in &inside[i + 1..] {
                total += 2.0 * (ti - tj).abs().ln();
            }
        }
        total
    };
    let formula = formula_log(inside_a) - formula_log(inside_b);
    Ok((direct - formula).abs())
}

/// A compactly supported piecewise isometry: finitely many disjoint source
/// intervals translated onto disjoint images covering the same set, identity
/// elsewhere. `support` is the padded hull used as the set `V` in the
/// Radon–Nikodym formula; the padding keeps moved particles away from the
/// outside region, which bounds the Ψ factors.
#[derive(Debug, Clone)]
pub struct PiecewiseIsometry {
    /// `(src_lo, src_hi, dst_lo)` pieces.
    pieces: Vec<(f64, f64, f64)>,
    support: (f64, f64),
}

fn merge_intervals(mut ivs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    ivs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(f64, f64)> = Vec::new();
    for iv in ivs {
        match out.last_mut() {
            Some(last) if iv.0 <= last.1 + 1e-12 => last.1 = last.1.max(iv.1),
            _ => out.push(iv),
        }
    }
    out
}

impl PiecewiseIsometry {
    /// Build from explicit pieces with a support margin. Sources must be
    /// pairwise disjoint, images pairwise disjoint, and the union of images
    /// must equal the union of sources (a measurable bijection).
    pub fn new(pieces: Vec<(f64, f64, f64)>, margin: f64) -> Result<Self> {
        if margin < 0.0 {
            return Err(Error::InvalidParameter("margin must be nonnegative".into()));
        }
        let mut sources = Vec::new();
        let mut images = Vec::new();
        for &(lo, hi, dst) in &pieces {
            if !(hi > lo) {
                return Err(Error::InvalidParameter(format!(
                    "empty source interval ({lo}, {hi})"
                )));
            }
            sources.push((lo, hi));
            images.push((dst, dst + (hi - lo)));
        }
        for set in [&sources, &images] {
            let mut sorted = set.clone();
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for w in sorted.windows(2) {
                if w[1].0 < w[0].1 - 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "overlapping intervals {:?} and {:?}",
                        w[0], w[1]
                    )));
                }
            }
        }
        let mu = merge_intervals(sources.clone());
        let mi = merge_intervals(images.clone());
        let same = mu.len() == mi.len()
            && mu
                .iter()
                .zip(&mi)
                .all(|(a, b)| (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
        if !same {
            return Err(Error::InvalidParameter(
                "images must cover the same set as sources (bijection)".into(),
            ));
        }
        let lo = sources
            .iter()
            .chain(&images)
            .map(|iv| iv.0)
            .fold(f64::INFINITY, f64::min);
        let hi = sources
            .iter()
            .chain(&images)
            .map(|iv| iv.1)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(PiecewiseIsometry {
            pieces,
            support: (lo - margin, hi + margin),
        })
    }

    /// The interval exchange swapping two disjoint intervals of equal length.
    pub fn swap(a: (f64, f64), b: (f64, f64), margin: f64) -> Result<Self> {
        if ((a.1 - a.0) - (b.1 - b.0)).abs() > 1e-12 {
            return Err(Error::InvalidParameter(
                "swapped intervals must have equal length".into(),
            ));
        }
        Self::new(vec![(a.0, a.1, b.0), (b.0, b.1, a.0)], margin)
    }

    /// Identity map with a declared support (RN derivative ≡ 1).
    pub fn identity(support: (f64, f64)) -> Self {
        PiecewiseIsometry {
            pieces: Vec::new(),
            support,
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        for &(lo, hi, dst) in &self.pieces {
            if x >= lo && x < hi {
                return dst + (x - lo);
            }
        }
        x
    }

    pub fn inverse(&self) -> PiecewiseIsometry {
        PiecewiseIsometry {
            pieces: self
                .pieces
                .iter()
                .map(|&(lo, hi, dst)| (dst, dst + (hi - lo), lo))
                .collect(),
            support: self.support,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// All piece endpoints (for piecewise quadrature).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![self.support.0, self.support.1];
        for &(lo, hi, dst) in &self.pieces {
            b.extend_from_slice(&[lo, hi, dst, dst + (hi - lo)]);
        }
        b.sort_by(|a, c| a.partial_cmp(c).unwrap());
        b.dedup_by(|a, c| (*a - *c).abs() < 1e-12);
        b
    }

    pub fn is_identity(&self) -> bool {
        self.pieces.is_empty()
    }
}

/// Log Radon–Nikodym derivative of the pushforward under a piecewise
/// isometry at the configuration `points`:
///
/// ```text
/// Σ_{i<j} 2 log|F(p_i)-F(p_j)|/|p_i-p_j| + Σ_i log ρ(F(p_i))/ρ(p_i)
///   + Σ_i log Ψ_{F(p_i),p_i}(points outside V),
/// ```
///
/// with `{p_i} = points ∩ V` and Lebesgue Jacobian 1. `comp_slope` is
/// `2 ∫ Π λ` (0 on the trace-class path).
pub fn qi_log_rn_points(
    rho_log_ratio: RhoRatioFn,
    comp_slope: f64,
    t: &PiecewiseIsometry,
    points: &[f64],
    r: f64,
) -> f64 {
    let (vlo, vhi) = t.support();
    let mut inside: Vec<f64> = Vec::new();
    let mut outside: Vec<f64> = Vec::new();
    for &x in points {
        if x >= vlo && x <= vhi {
            inside.push(x);
        } else if x.abs() <= r {
            outside.push(x);
        }
    }
    let mut total = 0.0;
    let moved: Vec<(f64, f64)> = inside.iter().map(|&p| (p, t.apply(p))).collect();
    for (i, &(pi, fpi)) in moved.iter().enumerate() {
        for &(pj, fpj) in &moved[i + 1..] {
            total += 2.0 * ((fpi - fpj).abs().ln() - (pi - pj).abs().ln());
        }
        if fpi != pi {
            total += rho_log_ratio(fpi, pi) + comp_slope * (fpi - pi);
            for &y in &outside {
                total += 2.0 * ((y - fpi).abs().ln() - (y - pi).abs().ln());
            }
        }
    }
    total
}

/// Configuration-level wrapper over [`qi_log_rn_points`]; computes the
/// compensator for `lambda` once from the kernel diagonal.
pub fn qi_log_rn(
    k: &dyn Kernel,
    rho_log_ratio: RhoRatioFn,
    lambda: Option<&LambdaRegularizer>,
    t: &PiecewiseIsometry,
    x: &Configuration,
    r: f64,
) -> Result<f64> {
    let comp_slope = match lambda {
        None => 0.0,
        Some(l) => 2.0 * compensator_integral(k, l, r)?,
    };
    Ok(qi_log_rn_points(
        rho_log_ratio,
        comp_slope,
        t,
        x.points(),
        r,
    ))
}

/// A bounded test statistic of the configuration, with the breakpoints its
/// definition introduces (needed by the piecewise quadrature check).
#[derive(Clone)]
pub struct QiStatistic {
    pub label: String,
    pub f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub breakpoints: Vec<f64>,
}

impl QiStatistic {
    /// Number of particles in `[lo, hi]`.
    pub fn count(label: impl Into<String>, interval: (f64, f64)) -> Self {
        QiStatistic {
            label: label.into(),
            f: Arc::new(move |pts: &[f64]| {
                pts.iter()
                    .filter(|&&x| x >= interval.0 && x <= interval.1)
                    .count() as f64
            }),
            breakpoints: vec![interval.0, interval.1],
        }
    }

    /// Sum of positions of particles in `[lo, hi]`.
    pub fn position_sum(label: impl Into<String>, interval: (f64, f64)) -> Self {
        QiStatistic {
            label: label.into(),
            f: Arc::new(move |pts: &[f64]| {
                pts.iter()
                    .filter(|&&x| x >= interval.0 && x <= interval.1)
                    .sum()
            }),
            breakpoints: vec![interval.0, interval.1],
        }
    }

    /// Smooth bounded statistic `Σ exp(-((x-c)/w)²)`.
    pub fn gaussian_sum(label: impl Into<String>, center: f64, width: f64) -> Self {
        QiStatistic {
            label: label.into(),
            f: Arc::new(move |pts: &[f64]| {
                pts.iter()
                    .map(|&x| (-((x - center) / width).powi(2)).exp())
                    .sum()
            }),
            breakpoints: Vec::new(),
        }
    }
}

/// One statistic's Monte Carlo discrepancy between `E[f ∘ T]` and
/// `E[f · RN]`, using paired per-sample differences.
#[derive(Debug, Clone, serde::Serialize)]
pub struct QiMcRow {
    pub label: String,
    pub mean_diff: f64,
    pub std_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct QiMcReport {
    pub rows: Vec<QiMcRow>,
    pub n_samples: usize,
}

/// Monte Carlo quasi-invariance check: samples the full process on `window`,
/// pairs `f(T X)` with `f(X) exp(log RN(T⁻¹, X))`, and z-scores the mean
/// difference per statistic.
#[allow(clippy::too_many_arguments)]
pub fn quasi_invariance_check_mc(
    k: Arc<dyn Kernel>,
    rho_log_ratio: RhoRatioFn,
    lambda: Option<&LambdaRegularizer>,
    t: &PiecewiseIsometry,
    stats: &[QiStatistic],
    cfg: &SamplerConfig,
    window: (f64, f64),
    grid_n: usize,
    n_samples: usize,
) -> Result<QiMcReport> {
    if n_samples < 1_000 {
        return Err(Error::InvalidParameter(
            "quasi-invariance check needs at least 10^3 samples".into(),
        ));
    }
    let (vlo, vhi) = t.support();
    if vlo < window.0 || vhi > window.1 {
        return Err(Error::InvalidParameter(format!(
            "isometry support ({vlo}, {vhi}) must sit inside the sampling window"
        )));
    }
    let r = window.0.abs().max(window.1.abs());
    let comp_slope = match lambda {
        None => 0.0,
        Some(l) => 2.0 * compensator_integral(k.as_ref(), l, r)?,
    };
    let t_inv = t.inverse();
    let dk = discretize(k.as_ref(), window, grid_n)?;
    let streams = cfg.n_streams;
    let per = n_samples / streams;
    let extra = n_samples % streams;
    let mut per_stream: Vec<(usize, Result<Vec<Vec<f64>>>)> = (0..streams)
        .into_par_iter()
        .map(|s| {
            let count = per + usize::from(s < extra);
            let mut rng = stream_rng(cfg.seed, s as u64);
            let mut diffs: Vec<Vec<f64>> = vec![Vec::with_capacity(count); stats.len()];
            for _ in 0..count {
                let x = match dpp_sample_counted(&dk, &mut rng) {
                    Ok((c, _)) => c,
                    Err(e) => return (s, Err(e)),
                };
                let mut moved: Vec<f64> = x.points().iter().map(|&p| t.apply(p)).collect();
                moved.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let rn = qi_log_rn_points(rho_log_ratio, comp_slope, &t_inv, x.points(), r).exp();
                for (si, stat) in stats.iter().enumerate() {
                    let d = (stat.f)(&moved) - (stat.f)(x.points()) * rn;
                    diffs[si].push(d);
                }
            }
            (s, Ok(diffs))
        })
        .collect();
    per_stream.sort_by_key(|v| v.0);
    let mut all: Vec<Vec<f64>> = vec![Vec::with_capacity(n_samples); stats.len()];
    for (_, d) in per_stream {
        let d = d?;
        for (si, v) in d.into_iter().enumerate() {
            all[si].extend(v);
        }
    }
    let rows = stats
        .iter()
        .zip(&all)
        .map(|(stat, diffs)| {
            let n = diffs.len() as f64;
            let mean = diffs.iter().sum::<f64>() / n;
            let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt();
            QiMcRow {
                label: stat.label.clone(),
                mean_diff: mean,
                std_error: se,
                z: if se > 0.0 { mean / se } else { 0.0 },
            }
        })
        .collect();
    Ok(QiMcReport { rows, n_samples })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct QiFiniteRow {
    pub label: String,
    pub pushforward: f64,
    pub reweighted: f64,
    pub residual: f64,
}

/// Deterministic finite-n quasi-invariance check by piecewise tensor
/// quadrature: both `E[f ∘ T]` and `E[f · RN]` are n-dimensional integrals of
/// the (piecewise smooth) ensemble density, with the dimension partitioned at
/// every breakpoint of `T` and of the statistics.
pub fn quasi_invariance_finite_n(
    family: &OrthoPolyFamily,
    n: usize,
    t: &PiecewiseIsometry,
    stats: &[QiStatistic],
    nodes_per_piece: usize,
) -> Result<Vec<QiFiniteRow>> {
    if n > 4 {
        return Err(Error::InvalidParameter(
            "finite-n quadrature check limited to n <= 4".into(),
        ));
    }
    let (slo, shi) = family.support();
    // Hermite weight below e^{-64} is negligible against the 1e-6 target.
    let (lo, hi) = if shi.is_finite() {
        (slo + 1e-9, shi - 1e-9)
    } else {
        (-8.0, 8.0)
    };
    let (vlo, vhi) = t.support();
    if vlo < lo || vhi > hi {
        return Err(Error::InvalidParameter(
            "isometry support exceeds the quadrature box".into(),
        ));
    }
    let mut breaks = t.breakpoints();
    for s in stats {
        breaks.extend_from_slice(&s.breakpoints);
    }
    breaks.push(lo);
    breaks.push(hi);
    breaks.retain(|&b| b >= lo && b <= hi);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let base = GaussRule::legendre(nodes_per_piece);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in breaks.windows(2) {
        let piece = base.mapped_to(w[0], w[1]);
        nodes.extend(piece.nodes);
        weights.extend(piece.weights);
    }
    let m = nodes.len();
    let t_inv = t.inverse();
    let rho = |a: f64, b: f64| family.log_weight(a) - family.log_weight(b);

    let mut z = 0.0_f64;
    let mut push = vec![0.0_f64; stats.len()];
    let mut rew = vec![0.0_f64; stats.len()];
    let mut idx = vec![0usize; n];
    let mut pt = vec![0.0_f64; n];
    let mut moved = vec![0.0_f64; n];
    loop {
        let mut w = 1.0;
        for d in 0..n {
            pt[d] = nodes[idx[d]];
            w *= weights[idx[d]];
        }
        // ensemble density ∏(x_i-x_j)² ∏ w(x_i)
        let mut dens = 1.0;
        for i in 0..n {
            dens *= family.weight(pt[i]);
            for j in i + 1..n {
                let d = pt[i] - pt[j];
                dens *= d * d;
            }
        }
        if dens > 0.0 {
            let wd = w * dens;
            z += wd;
            for d in 0..n {
                moved[d] = t.apply(pt[d]);
            }
            let rn = qi_log_rn_points(&rho, 0.0, &t_inv, &pt, hi.abs().max(lo.abs())).exp();
            for (si, stat) in stats.iter().enumerate() {
                push[si] += wd * (stat.f)(&moved);
                rew[si] += wd * (stat.f)(&pt) * rn;
            }
        }
        // advance multi-index
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == n {
                return Ok(stats
                    .iter()
                    .enumerate()
                    .map(|(si, stat)| QiFiniteRow {
                        label: stat.label.clone(),
                        pushforward: push[si] / z,
                        reweighted: rew[si] / z,
                        residual: ((push[si] - rew[si]) / z).abs(),
                    })
                    .collect());
            }
        }
    }
}

/// One bin of the end-to-end conditional verification.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConditionalBin {
    pub inside_count: usize,
    pub outside_count_bucket: usize,
    pub distance_bucket: usize,
    pub n: usize,
    pub z_mean: f64,
    pub z_second_moment: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConditionalMcReport {
    pub bins: Vec<ConditionalBin>,
    /// Outer samples with no particle inside the interval (vacuously
    /// consistent).
    pub vacuous: usize,
    pub n_outer: usize,
    /// Fraction of populated-bin z-scores inside ±3.
    pub fraction_ok: f64,
    pub pass: bool,
}

/// Options for [`conditional_mc_verification`].
#[derive(Debug, Clone)]
pub struct ConditionalMcOptions {
    pub window: (f64, f64),
    pub grid_n: usize,
    pub map: GridMap,
    pub n_outer: usize,
    /// Metropolis steps per inside particle for the fresh draw.
    pub mcmc_steps_per_particle: usize,
    /// Minimum samples for a bin to count.
    pub min_bin: usize,
}

/// End-to-end statistical verification of the conditional-measure formula:
/// sample full configurations, redraw the inside points from the predicted
/// conditional ensemble (the chain starts at the observed inside points, so
/// under the theorem it stays exactly stationary), and z-score paired
/// differences of inside-point mean and second moment, binned by inside
/// count and a coarse outside summary.
pub fn conditional_mc_verification(
    k: Arc<dyn Kernel>,
    lambda: Option<&LambdaRegularizer>,
    rho_log_ratio: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    interval: (f64, f64),
    cfg: &SamplerConfig,
    opts: &ConditionalMcOptions,
) -> Result<ConditionalMcReport> {
    if interval.0 <= opts.window.0 || interval.1 >= opts.window.1 {
        return Err(Error::InvalidParameter(
            "window must contain the interval with margin".into(),
        ));
    }
    let q0 = 0.5 * (interval.0 + interval.1);
    let (sample_kernel, sample_window): (Arc<dyn Kernel>, (f64, f64)) = match opts.map {
        GridMap::Identity => (k.clone(), opts.window),
        GridMap::Sqrt => (
            Arc::new(SqrtMappedKernel::new(k.clone())?) as Arc<dyn Kernel>,
            (opts.window.0.max(0.0).sqrt(), opts.window.1.sqrt()),
        ),
    };
    let dk = discretize(sample_kernel.as_ref(), sample_window, opts.grid_n)?;
    let comp_slope = match lambda {
        None => 0.0,
        Some(l) => {
            let r = opts.window.0.abs().max(opts.window.1.abs());
            2.0 * compensator_integral(k.as_ref(), l, r)?
        }
    };

    struct Row {
        l: usize,
        out_count: usize,
        near_dist: f64,
        d_mean: f64,
        d_second: f64,
    }

    let streams = cfg.n_streams;
    let per = opts.n_outer / streams;
    let extra = opts.n_outer % streams;
    let rho = rho_log_ratio.clone();
    let mut per_stream: Vec<(usize, Result<(Vec<Row>, usize)>)> = (0..streams)
        .into_par_iter()
        .map(|s| {
            let count = per + usize::from(s < extra);
            let mut rng = stream_rng(cfg.seed, s as u64);
            let mut rows = Vec::new();
            let mut vacuous = 0usize;
            for _ in 0..count {
                let sampled = match dpp_sample_counted(&dk, &mut rng) {
                    Ok((c, _)) => c,
                    Err(e) => return (s, Err(e)),
                };
                let x = match opts.map {
                    GridMap::Identity => sampled,
                    GridMap::Sqrt => {
                        let pts: Vec<f64> = sampled.points().iter().map(|&t| t * t).collect();
                        match Configuration::new(pts, opts.window) {
                            Ok(c) => c,
                            Err(e) => return (s, Err(e)),
                        }
                    }
                };
                let inside = x.restrict_to(interval);
                let l = inside.len();
                if l == 0 {
                    vacuous += 1;
                    continue;
                }
                let outside = x.restrict_outside(interval);
                // build the predicted conditional weight inline (compensator
                // slope already known)
                let r = opts.window.0.abs().max(opts.window.1.abs());
                let out_pts: Vec<f64> = outside
                    .points()
                    .iter()
                    .copied()
                    .filter(|v| v.abs() <= r)
                    .collect();
                let log_w = |tpt: f64| -> f64 {
                    let mut v = rho(tpt, q0) + comp_slope * (tpt - q0);
                    for &y in &out_pts {
                        v += 2.0 * ((y - tpt).abs().ln() - (y - q0).abs().ln());
                    }
                    v
                };
                // fresh draw: Metropolis from the observed inside points
                let mut state = inside.clone();
                let spec_logd = |pts: &[f64]| -> f64 {
                    let mut total = 0.0;
                    for (i, &ti) in pts.iter().enumerate() {
                        if ti < interval.0 || ti > interval.1 {
                            return f64::NEG_INFINITY;
                        }
                        total += log_w(ti);
                        for &tj in &pts[i + 1..] {
                            if ti == tj {
                                return f64::NEG_INFINITY;
                            }
                            total += 2.0 * (ti - tj).abs().ln();
                        }
                    }
                    total
                };
                let mut logp = spec_logd(&state);
                let scale = 0.25 * (interval.1 - interval.0);
                let mut proposal = vec![0.0; l];
                let steps = opts.mcmc_steps_per_particle * l;
                for _ in 0..steps {
                    for (pv, &sv) in proposal.iter_mut().zip(state.iter()) {
                        let u1: f64 = rng.gen::<f64>().max(1e-300);
                        let u2: f64 = rng.gen::<f64>();
                        let g = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                        let raw = sv + scale * g;
                        let len = interval.1 - interval.0;
                        let tt = (raw - interval.0).rem_euclid(2.0 * len);
                        *pv = interval.0 + tt.min(2.0 * len - tt);
                    }
                    let logq = spec_logd(&proposal);
                    if logq - logp >= 0.0 || rng.gen::<f64>().ln() < logq - logp {
                        state.copy_from_slice(&proposal);
                        logp = logq;
                    }
                }
                let mean_of = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                let second_of = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>() / v.len() as f64;
                // outside summary: count and mean distance of the two nearest
                // outside particles to the interval
                let mut dists: Vec<f64> = outside
                    .points()
                    .iter()
                    .map(|&y| {
                        if y < interval.0 {
                            interval.0 - y
                        } else {
                            y - interval.1
                        }
                    })
                    .collect();
                dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let near_dist = match dists.len() {
                    0 => f64::INFINITY,
                    1 => dists[0],
                    _ => 0.5 * (dists[0] + dists[1]),
                };
                rows.push(Row {
                    l,
                    out_count: outside.len(),
                    near_dist,
                    d_mean: mean_of(&inside) - mean_of(&state),
                    d_second: second_of(&inside) - second_of(&state),
                });
            }
            (s, Ok((rows, vacuous)))
        })
        .collect();
    per_stream.sort_by_key(|v| v.0);
    let mut rows = Vec::new();
    let mut vacuous = 0usize;
    for (_, r) in per_stream {
        let (mut rs, v) = r?;
        rows.append(&mut rs);
        vacuous += v;
    }
    if rows.is_empty() {
        return Ok(ConditionalMcReport {
            bins: Vec::new(),
            vacuous,
            n_outer: opts.n_outer,
            fraction_ok: 1.0,
            pass: true,
        });
    }
    // median splits for the coarse outside summary
    let median = |v: &mut Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let mut counts: Vec<f64> = rows.iter().map(|r| r.out_count as f64).collect();
    let med_count = median(&mut counts);
    let mut dists: Vec<f64> = rows.iter().map(|r| r.near_dist).collect();
    let med_dist = median(&mut dists);

    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(usize, usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for r in &rows {
        let cb = usize::from((r.out_count as f64) > med_count);
        let db = usize::from(r.near_dist > med_dist);
        groups
            .entry((r.l, cb, db))
            .or_default()
            .push((r.d_mean, r.d_second));
    }
    let mut bins = Vec::new();
    let mut z_total = 0usize;
    let mut z_ok = 0usize;
    for ((l, cb, db), vals) in groups {
        let n = vals.len();
        if n < opts.min_bin {
            continue;
        }
        let zscore = |sel: &dyn Fn(&(f64, f64)) -> f64| -> f64 {
            let nn = n as f64;
            let mean = vals.iter().map(sel).sum::<f64>() / nn;
            let var = vals
                .iter()
                .map(|v| {
                    let d = sel(v) - mean;
                    d * d
                })
                .sum::<f64>()
                / (nn - 1.0);
            let se = (var / nn).sqrt();
            if se > 0.0 {
                mean / se
            } else {
                0.0
            }
        };
        let z_mean = zscore(&|v: &(f64, f64)| v.0);
        let z_second = zscore(&|v: &(f64, f64)| v.1);
        z_total += 2;
        z_ok += usize::from(z_mean.abs() < 3.0) + usize::from(z_second.abs() < 3.0);
        bins.push(ConditionalBin {
            inside_count: l,
            outside_count_bucket: cb,
            distance_bucket: db,
            n,
            z_mean,
            z_second_moment: z_second,
        });
    }
    let fraction_ok = if z_total == 0 {
        1.0
    } else {
        z_ok as f64 / z_total as f64
    };
    Ok(ConditionalMcReport {
        bins,
        vacuous,
        n_outer: opts.n_outer,
        fraction_ok,
        pass: fraction_ok >= 0.95,
    })
}

/// Fresh-draw helper used by tests and the CLI: one chain of the conditional
/// ensemble for a given condition.
pub fn sample_conditional(
    cw: &ConditionalWeight,
    l: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<Vec<f64>>> {
    let spec = conditional_density(cw, l)?;
    Ok(crate::sampler::ope_sample(&spec, cfg)?.samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::SineKernel;
    use crate::sampler::ope_log_density;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;

    fn const_rho() -> Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> {
        Arc::new(|_p: f64, _q: f64| 0.0)
    }

    #[test]
    fn empty_outside_constant_weight() {
        let cond =
            WindowCondition::new((0.0, 1.0), Configuration::empty((-10.0, 10.0)), 1).unwrap();
        let cw = conditional_weight(&SineKernel, None, const_rho(), &cond, 0.5).unwrap();
        for p in [0.1, 0.5, 0.9] {
            assert_eq!(cw.log_ratio(p).unwrap(), 0.0);
        }
        assert!(cw.log_ratio(2.0).is_err());
    }

    #[test]
    fn single_outside_particle_closed_form() {
        // sine, X_out = {10}: ratio(1 vs 0) = ((10-1)/(10-0))² = 0.81
        let outside = Configuration::new(vec![10.0], (-12.0, 12.0)).unwrap();
        let cond = WindowCondition::new((0.0, 1.0), outside, 1).unwrap();
        let cw = conditional_weight(&SineKernel, None, const_rho(), &cond, 0.0).unwrap();
        assert_abs_diff_eq!(cw.log_ratio(1.0).unwrap().exp(), 0.81, epsilon = 1e-12);
    }

    #[test]
    fn bessel_rho_ratio_with_empty_outside() {
        let rho: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> =
            Arc::new(|p: f64, q: f64| (p / q).ln()); // s = 1
        let cond = WindowCondition::new((0.5, 2.5), Configuration::empty((0.0, 40.0)), 1).unwrap();
        let k = crate::kernels::BesselKernel::new(1.0).unwrap();
        let cw = conditional_weight(&k, None, rho, &cond, 1.0).unwrap();
        assert_abs_diff_eq!(cw.log_ratio(2.0).unwrap().exp(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn conditional_weight_cocycle() {
        let outside = Configuration::new(vec![-4.0, 3.0, 8.5], (-10.0, 10.0)).unwrap();
        let cond = WindowCondition::new((0.0, 1.0), outside, 2).unwrap();
        let cw_a = conditional_weight(&SineKernel, None, const_rho(), &cond, 0.2).unwrap();
        let cw_b = conditional_weight(&SineKernel, None, const_rho(), &cond, 0.7).unwrap();
        for p in [0.05, 0.33, 0.92] {
            let via_a = cw_a.log_ratio(p).unwrap() - cw_a.log_ratio(0.7).unwrap();
            assert_abs_diff_eq!(via_a, cw_b.log_ratio(p).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn conditional_density_l_cases() {
        let cond = WindowCondition::new(
            (0.0, 1.0),
            Configuration::new(vec![10.0], (-12.0, 12.0)).unwrap(),
            0,
        )
        .unwrap();
        let cw = conditional_weight(&SineKernel, None, const_rho(), &cond, 0.5).unwrap();
        let empty = conditional_density(&cw, 0).unwrap();
        assert_eq!(ope_log_density(&empty, &[]), 0.0);
        // l = 1: density ∝ ρ_{I,X}(t)
        let one = conditional_density(&cw, 1).unwrap();
        let d = ope_log_density(&one, &[0.3]);
        assert_abs_diff_eq!(d, cw.log_ratio(0.3).unwrap(), epsilon = 1e-14);
        // l = 2 closed form between two inside pairs
        let two = conditional_density(&cw, 2).unwrap();
        let num = ope_log_density(&two, &[0.1, 0.9]);
        let den = ope_log_density(&two, &[0.4, 0.6]);
        let expect = 2.0 * ((0.8f64 / 0.2).ln())
            + (cw.log_ratio(0.1).unwrap() + cw.log_ratio(0.9).unwrap()
                - cw.log_ratio(0.4).unwrap()
                - cw.log_ratio(0.6).unwrap());
        assert_abs_diff_eq!(num - den, expect, epsilon = 1e-12);
    }

    #[test]
    fn finite_n_conditional_exactness() {
        let fam = OrthoPolyFamily::Hermite;
        let r = finite_n_conditional_check(
            &fam,
            5,
            (-0.5, 0.5),
            &[-3.0, -2.5, 2.8],
            &[0.1, -0.2],
            &[0.35, 0.4],
        )
        .unwrap();
        assert!(r < 1e-10, "residual {r}");
        // l = n, no outside points
        let r = finite_n_conditional_check(&fam, 2, (-1.0, 1.0), &[], &[0.1, -0.6], &[0.8, 0.2])
            .unwrap();
        assert!(r < 1e-12);
        let jac = OrthoPolyFamily::jacobi(0.5).unwrap();
        let r =
            finite_n_conditional_check(&jac, 4, (-0.3, 0.3), &[-0.9, -0.6, 0.7], &[0.1], &[-0.2])
                .unwrap();
        assert!(r < 1e-10, "jacobi residual {r}");
    }

    #[test]
    fn finite_n_conditional_random_sweep() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for family in [
            OrthoPolyFamily::Hermite,
            OrthoPolyFamily::jacobi(0.5).unwrap(),
        ] {
            let (slo, shi) = family.support();
            let (blo, bhi) = if shi.is_finite() {
                (slo + 0.05, shi - 0.05)
            } else {
                (-4.0, 4.0)
            };
            for _ in 0..50 {
                let n = rng.gen_range(2..=6usize);
                let l = rng.gen_range(1..=n.min(3));
                let mid = 0.5 * (blo + bhi);
                let half = 0.15 * (bhi - blo);
                let interval = (mid - half, mid + half);
                let mut outside = Vec::new();
                while outside.len() < n - l {
                    let v = rng.gen_range(blo..bhi);
                    if v < interval.0 || v > interval.1 {
                        outside.push(v);
                    }
                }
                let inside_a: Vec<f64> = (0..l)
                    .map(|_| rng.gen_range(interval.0..interval.1))
                    .collect();
                let inside_b: Vec<f64> = (0..l)
                    .map(|_| rng.gen_range(interval.0..interval.1))
                    .collect();
                let r = finite_n_conditional_check(
                    &family, n, interval, &outside, &inside_a, &inside_b,
                )
                .unwrap();
                assert!(r < 1e-10, "{family:?} n={n} l={l}: residual {r}");
            }
        }
    }

    #[test]
    fn isometry_validation_and_application() {
        let t = PiecewiseIsometry::swap((0.0, 0.4), (0.5, 0.9), 0.1).unwrap();
        assert_abs_diff_eq!(t.apply(0.1), 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(t.apply(0.7), 0.2, epsilon = 1e-15);
        assert_eq!(t.apply(0.45), 0.45);
        assert_eq!(t.apply(2.0), 2.0);
        let (lo, hi) = t.support();
        assert_abs_diff_eq!(lo, -0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-15);
        // unequal lengths rejected
        assert!(PiecewiseIsometry::swap((0.0, 0.4), (0.5, 1.2), 0.1).is_err());
        // non-bijection rejected
        assert!(PiecewiseIsometry::new(vec![(0.0, 0.2, 1.0)], 0.1).is_err());
        // inverse undoes the map
        let inv = t.inverse();
        for x in [0.05, 0.3, 0.55, 0.88, 0.45] {
            assert_abs_diff_eq!(inv.apply(t.apply(x)), x, epsilon = 1e-12);
        }
    }

    #[test]
    fn qi_rn_identity_map_is_one() {
        let t = PiecewiseIsometry::identity((-1.0, 1.0));
        let x = Configuration::new(vec![-0.5, 0.3, 4.0], (-8.0, 8.0)).unwrap();
        let rho = |_p: f64, _q: f64| 0.0;
        let v = qi_log_rn(&SineKernel, &rho, None, &t, &x, 8.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn qi_rn_matches_density_ratio_at_finite_n() {
        // pointwise check: RN formula equals p(Tx)/p(x) for the 4-point
        // Hermite ensemble
        let fam = OrthoPolyFamily::Hermite;
        let t = PiecewiseIsometry::swap((-0.4, 0.0), (0.3, 0.7), 0.15).unwrap();
        let rho = move |a: f64, b: f64| fam.log_weight(a) - fam.log_weight(b);
        let joint = |pts: &[f64]| -> f64 {
            let mut v = 0.0;
            for (i, &xi) in pts.iter().enumerate() {
                v += fam.log_weight(xi);
                for &xj in &pts[i + 1..] {
                    v += 2.0 * (xi - xj).abs().ln();
                }
            }
            v
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let pts: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let moved: Vec<f64> = pts.iter().map(|&p| t.apply(p)).collect();
            let direct = joint(&moved) - joint(&pts);
            let formula = qi_log_rn_points(&rho, 0.0, &t, &pts, 8.0);
            assert!(
                (direct - formula).abs() < 1e-10,
                "direct {direct} vs formula {formula}"
            );
        }
    }

    #[test]
    fn qi_finite_n_identity_map() {
        let fam = OrthoPolyFamily::Hermite;
        let t = PiecewiseIsometry::identity((-0.5, 0.5));
        let stats = [QiStatistic::count("n[0,0.5]", (0.0, 0.5))];
        let rows = quasi_invariance_finite_n(&fam, 2, &t, &stats, 12).unwrap();
        assert!(rows[0].residual < 1e-12);
    }

    #[test]
    fn qi_finite_n_swap_small() {
        let fam = OrthoPolyFamily::Hermite;
        let t = PiecewiseIsometry::swap((-0.4, 0.0), (0.3, 0.7), 0.15).unwrap();
        let stats = [
            QiStatistic::count("n[-0.4,0]", (-0.4, 0.0)),
            QiStatistic::gaussian_sum("gauss", 0.2, 0.8),
        ];
        let rows = quasi_invariance_finite_n(&fam, 2, &t, &stats, 14).unwrap();
        for row in &rows {
            assert!(row.residual < 1e-7, "{}: {row:?}", row.label);
        }
    }

    #[test]
    fn conditional_mc_smoke() {
        let cfg = SamplerConfig {
            seed: 9,
            n_streams: 4,
            ..Default::default()
        };
        // the window must dominate the interval: the unseen tail tilts the
        // conditional weight by O(1/window), which shows up as bin bias
        let opts = ConditionalMcOptions {
            window: (-24.0, 24.0),
            grid_n: 1024,
            map: GridMap::Identity,
            n_outer: 1_500,
            mcmc_steps_per_particle: 200,
            min_bin: 100,
        };
        let rep = conditional_mc_verification(
            Arc::new(SineKernel),
            Some(&LambdaRegularizer::rational()),
            Arc::new(|_p: f64, _q: f64| 0.0),
            (0.0, 1.0),
            &cfg,
            &opts,
        )
        .unwrap();
        assert!(rep.pass, "smoke run failed: {rep:?}");
        assert!(!rep.bins.is_empty());
    }
}
