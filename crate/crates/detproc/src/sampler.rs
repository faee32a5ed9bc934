//! Sampling engines: spectral sampling of discretized projection kernels,
//! Metropolis sampling of orthogonal polynomial ensembles on an interval, and
//! an exact tensor-quadrature oracle for small particle numbers.
//!
//! All randomness flows from a single 64-bit seed expanded into independent
//! ChaCha streams, one per worker; results are merged in stream order, so a
//! fixed [`SamplerConfig`] reproduces its output bit for bit regardless of
//! thread scheduling.

use crate::error::{Error, Result};
use crate::kernels::{Configuration, Kernel};
use crate::quad::{tensor_integrate, GaussRule};
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;

/// Eigenvalues clamped by more than this fail the run: it signals an
/// under-resolved grid rather than rounding noise.
pub const CLAMP_TOLERANCE: f64 = 1e-6;

/// Reproducible sampler parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Post-burn-in Metropolis steps (split across streams).
    pub chain_length: usize,
    pub burn_in: usize,
    pub proposal_scale: f64,
    pub n_streams: usize,
    pub thinning: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 1,
            chain_length: 20_000,
            burn_in: 10_000,
            proposal_scale: 0.5,
            n_streams: 8,
            thinning: 10,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chain_length == 0
            || self.burn_in == 0
            || self.n_streams == 0
            || self.thinning == 0
            || !(self.proposal_scale > 0.0)
        {
            return Err(Error::InvalidParameter(
                "sampler config fields must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// RNG for stream `stream` of the run keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Magnitudes by which raw eigenvalues fell outside `[0, 1]`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ClampReport {
    pub max_below: f64,
    pub max_above: f64,
}

impl ClampReport {
    pub fn magnitude(&self) -> f64 {
        self.max_below.max(self.max_above)
    }
}

/// A projection kernel restricted to a window and resolved on an equally
/// spaced grid: `M_ij = K(x_i, x_j) h`, symmetrized and eigendecomposed.
pub struct DiscretizedKernel {
    grid: Vec<f64>,
    h: f64,
    window: (f64, f64),
    /// Eigenvalues clamped to `[0, 1]`, descending; entries below 1e-12 are
    /// dropped together with their vectors.
    eigenvalues: Vec<f64>,
    /// Columns are the retained orthonormal eigenvectors.
    eigenvectors: DMatrix<f64>,
    clamp: ClampReport,
    trace: f64,
    pub warning: Option<String>,
}

/// Build the grid discretization of `k` on `window` with `n >= 16` midpoints.
pub fn discretize(k: &dyn Kernel, window: (f64, f64), n: usize) -> Result<DiscretizedKernel> {
    if n < 16 {
        return Err(Error::InvalidParameter(format!(
            "grid size {n} too small, need at least 16"
        )));
    }
    let (lo, hi) = window;
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!("bad window {window:?}")));
    }
    let (dlo, dhi) = k.domain();
    if lo < dlo || hi > dhi {
        return Err(Error::Domain(format!(
            "window {window:?} not contained in kernel domain ({dlo}, {dhi})"
        )));
    }
    let h = (hi - lo) / n as f64;
    let warning = if h >= 0.5 {
        Some(format!(
            "grid spacing h = {h:.3} may undersample the kernel (sine needs h < 0.5)"
        ))
    } else {
        None
    };
    let grid: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect();
    let mut m = DMatrix::from_fn(n, n, |i, j| k.eval(grid[i], grid[j]) * h);
    let trace = m.trace();
    // enforce exact symmetry before the eigensolver
    let mt = m.transpose();
    m = (m + mt) * 0.5;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut max_below = 0.0_f64;
    let mut max_above = 0.0_f64;
    let mut eigenvalues = Vec::new();
    let mut kept_cols = Vec::new();
    for &j in &order {
        let lam = eig.eigenvalues[j];
        if !lam.is_finite() {
            return Err(Error::Numerical("eigendecomposition produced NaN".into()));
        }
        max_below = max_below.max(-lam);
        max_above = max_above.max(lam - 1.0);
        let clamped = lam.clamp(0.0, 1.0);
        if clamped > 1e-12 {
            eigenvalues.push(clamped);
            kept_cols.push(j);
        }
    }
    let eigenvectors = DMatrix::from_fn(n, kept_cols.len(), |i, c| {
        eig.eigenvectors[(i, kept_cols[c])]
    });
    Ok(DiscretizedKernel {
        grid,
        h,
        window,
        eigenvalues,
        eigenvectors,
        clamp: ClampReport {
            max_below: max_below.max(0.0),
            max_above: max_above.max(0.0),
        },
        trace,
        warning,
    })
}

impl DiscretizedKernel {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn clamp_report(&self) -> ClampReport {
        self.clamp
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// Expected particle number `Σ λ_i`.
    pub fn expected_points(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

/// One spectral (HKPV-style) sample of the determinantal measure attached to
/// the discretized kernel: Bernoulli selection of eigenvectors, then
/// sequential sampling with Gram–Schmidt projection of the feature vectors.
pub fn dpp_sample(dk: &DiscretizedKernel, rng: &mut ChaCha8Rng) -> Result<Configuration> {
    dpp_sample_counted(dk, rng).map(|(c, _)| c)
}

/// As [`dpp_sample`], also reporting how many degenerate attempts were
/// restarted with fresh randomness.
pub fn dpp_sample_counted(
    dk: &DiscretizedKernel,
    rng: &mut ChaCha8Rng,
) -> Result<(Configuration, usize)> {
    if dk.clamp.magnitude() > CLAMP_TOLERANCE {
        return Err(Error::Numerical(format!(
            "eigenvalue clamp {:.3e} exceeds tolerance {CLAMP_TOLERANCE:.0e}; refine the grid",
            dk.clamp.magnitude()
        )));
    }
    let mut restarts = 0;
    loop {
        match try_sample(dk, rng) {
            Some(points) => {
                let cfg = Configuration::new(points, dk.window)?;
                return Ok((cfg, restarts));
            }
            None => {
                restarts += 1;
                if restarts > 10 {
                    return Err(Error::Numerical(
                        "spectral sampler degenerated repeatedly".into(),
                    ));
                }
            }
        }
    }
}

fn try_sample(dk: &DiscretizedKernel, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let n = dk.grid.len();
    // Bernoulli thinning of the spectrum.
    let selected: Vec<usize> = (0..dk.eigenvalues.len())
        .filter(|&i| {
            let lam = dk.eigenvalues[i];
            lam >= 1.0 || rng.gen::<f64>() < lam
        })
        .collect();
    let k = selected.len();
    if k == 0 {
        return Some(Vec::new());
    }
    // feature vector of grid point i = i-th row of the selected eigenvectors
    let mut feat = vec![0.0_f64; n * k];
    let mut weights = vec![0.0_f64; n];
    for i in 0..n {
        let row = &mut feat[i * k..(i + 1) * k];
        let mut w = 0.0;
        for (c, &col) in selected.iter().enumerate() {
            let v = dk.eigenvectors[(i, col)];
            row[c] = v;
            w += v * v;
        }
        weights[i] = w;
    }
    let mut points = Vec::with_capacity(k);
    let mut chosen = vec![0.0_f64; k];
    for step in 0..k {
        let total: f64 = weights.iter().sum();
        if !total.is_finite() || total <= 1e-12 * (k - step) as f64 {
            return None;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut idx = n - 1;
        for (i, &w) in weights.iter().enumerate() {
            u -= w;
            if u <= 0.0 {
                idx = i;
                break;
            }
        }
        let norm2 = weights[idx];
        if norm2 <= 1e-14 {
            return None;
        }
        let inv_norm = 1.0 / norm2.sqrt();
        chosen.copy_from_slice(&feat[idx * k..(idx + 1) * k]);
        for c in chosen.iter_mut() {
            *c *= inv_norm;
        }
        points.push(dk.grid[idx]);
        // project every feature orthogonal to the chosen direction
        for i in 0..n {
            let row = &mut feat[i * k..(i + 1) * k];
            let mut dot = 0.0;
            for c in 0..k {
                dot += row[c] * chosen[c];
            }
            for c in 0..k {
                row[c] -= dot * chosen[c];
            }
            weights[i] = (weights[i] - dot * dot).max(0.0);
        }
        weights[idx] = 0.0;
    }
    Some(points)
}

/// Draw `n_samples` independent configurations, fanned out over the config's
/// streams; returns the samples in deterministic order plus the total number
/// of degenerate restarts.
pub fn dpp_sample_batch(
    dk: &DiscretizedKernel,
    cfg: &SamplerConfig,
    n_samples: usize,
) -> Result<(Vec<Configuration>, usize)> {
    cfg.validate()?;
    let streams = cfg.n_streams;
    let per = n_samples / streams;
    let extra = n_samples % streams;
    let mut results: Vec<(usize, Result<(Vec<Configuration>, usize)>)> = (0..streams)
        .into_par_iter()
        .map(|s| {
            let count = per + usize::from(s < extra);
            let mut rng = stream_rng(cfg.seed, s as u64);
            let mut samples = Vec::with_capacity(count);
            let mut restarts = 0;
            for _ in 0..count {
                match dpp_sample_counted(dk, &mut rng) {
                    Ok((c, r)) => {
                        samples.push(c);
                        restarts += r;
                    }
                    Err(e) => return (s, Err(e)),
                }
            }
            (s, Ok((samples, restarts)))
        })
        .collect();
    results.sort_by_key(|r| r.0);
    let mut all = Vec::with_capacity(n_samples);
    let mut total_restarts = 0;
    for (_, r) in results {
        let (samples, restarts) = r?;
        all.extend(samples);
        total_restarts += restarts;
    }
    Ok((all, total_restarts))
}

/// An `l`-point orthogonal polynomial ensemble on a compact interval:
/// density proportional to `∏_{i<j} (t_i-t_j)² ∏_i ρ(t_i)`, specified through
/// `log ρ`.
#[derive(Clone)]
pub struct OpeSpec {
    pub l: usize,
    pub interval: (f64, f64),
    log_weight: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl OpeSpec {
    pub fn new(
        l: usize,
        interval: (f64, f64),
        log_weight: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    ) -> Result<Self> {
        if !(interval.1 > interval.0) || !interval.0.is_finite() || !interval.1.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "OPE interval must be compact and nondegenerate, got {interval:?}"
            )));
        }
        Ok(OpeSpec {
            l,
            interval,
            log_weight,
        })
    }

    /// Ensemble with unit weight.
    pub fn uniform(l: usize, interval: (f64, f64)) -> Result<Self> {
        Self::new(l, interval, Arc::new(|_| 0.0))
    }

    pub fn log_weight(&self, t: f64) -> f64 {
        (self.log_weight)(t)
    }
}

/// Unnormalized log density `2 Σ_{i<j} log|t_i-t_j| + Σ_i log ρ(t_i)`;
/// `-∞` on coincident points or points outside the interval.
pub fn ope_log_density(spec: &OpeSpec, points: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, &ti) in points.iter().enumerate() {
        if ti < spec.interval.0 || ti > spec.interval.1 {
            return f64::NEG_INFINITY;
        }
        total += spec.log_weight(ti);
        for &tj in &points[i + 1..] {
            if ti == tj {
                return f64::NEG_INFINITY;
            }
            total += 2.0 * (ti - tj).abs().ln();
        }
    }
    total
}

/// Result of a Metropolis run.
#[derive(Debug, Clone)]
pub struct OpeRun {
    /// Thinned post-burn-in states in deterministic stream order.
    pub samples: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    pub tuned_scale: f64,
    pub warning: Option<String>,
}

/// Reflect into `[lo, hi]` by folding; exact and symmetric, so the proposal
/// stays reversible.
fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let len = hi - lo;
    let t = (x - lo).rem_euclid(2.0 * len);
    lo + t.min(2.0 * len - t)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller; consumes exactly two uniforms per call, which keeps stream
    // accounting simple.
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random-walk Metropolis targeting [`ope_log_density`], with reflective
/// proposals at the interval endpoints and multiplicative scale adaptation
/// toward ~0.3 acceptance during burn-in. Adaptation freezes after burn-in,
/// so retained states come from a valid fixed-kernel chain.
pub fn ope_sample(spec: &OpeSpec, cfg: &SamplerConfig) -> Result<OpeRun> {
    cfg.validate()?;
    if spec.l == 0 {
        return Ok(OpeRun {
            samples: vec![Vec::new(); cfg.chain_length / cfg.thinning],
            acceptance_rate: 1.0,
            tuned_scale: cfg.proposal_scale,
            warning: None,
        });
    }
    let streams = cfg.n_streams;
    let per_stream = (cfg.chain_length / streams).max(cfg.thinning);
    let mut results: Vec<(usize, StreamRun)> = (0..streams)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(cfg.seed, s as u64);
            (
                s,
                run_chain(
                    spec,
                    &mut rng,
                    cfg.burn_in,
                    per_stream,
                    cfg.proposal_scale,
                    cfg.thinning,
                ),
            )
        })
        .collect();
    results.sort_by_key(|r| r.0);
    let mut samples = Vec::new();
    let mut acc = 0.0;
    let mut scale = 0.0;
    for (_, run) in &mut results {
        samples.append(&mut run.samples);
        acc += run.accepted as f64 / run.steps as f64;
        scale += run.scale;
    }
    let acceptance_rate = acc / streams as f64;
    let tuned_scale = scale / streams as f64;
    let warning = if !(0.05..=0.95).contains(&acceptance_rate) {
        Some(format!(
            "acceptance rate {acceptance_rate:.3} outside [0.05, 0.95]; try proposal scale {:.3e}",
            tuned_scale * if acceptance_rate < 0.05 { 0.25 } else { 4.0 }
        ))
    } else {
        None
    };
    Ok(OpeRun {
        samples,
        acceptance_rate,
        tuned_scale,
        warning,
    })
}

struct StreamRun {
    samples: Vec<Vec<f64>>,
    accepted: usize,
    steps: usize,
    scale: f64,
}

fn run_chain(
    spec: &OpeSpec,
    rng: &mut ChaCha8Rng,
    burn_in: usize,
    steps: usize,
    scale0: f64,
    thinning: usize,
) -> StreamRun {
    let (lo, hi) = spec.interval;
    let l = spec.l;
    let mut state: Vec<f64> = (0..l)
        .map(|i| lo + (hi - lo) * (i as f64 + 1.0) / (l as f64 + 1.0))
        .collect();
    let mut log_p = ope_log_density(spec, &state);
    let mut scale = scale0.min(hi - lo);
    let mut proposal = vec![0.0; l];

    // burn-in with adaptation
    let mut window_acc = 0usize;
    for step in 0..burn_in {
        let accepted = mh_step(
            spec,
            rng,
            &mut state,
            &mut log_p,
            scale,
            &mut proposal,
            lo,
            hi,
        );
        window_acc += usize::from(accepted);
        if (step + 1) % 200 == 0 {
            let rate = window_acc as f64 / 200.0;
            scale *= (1.5 * (rate - 0.3)).exp();
            scale = scale.clamp(1e-6 * (hi - lo), hi - lo);
            window_acc = 0;
        }
    }

    let mut samples = Vec::with_capacity(steps / thinning);
    let mut accepted = 0usize;
    for step in 0..steps {
        accepted += usize::from(mh_step(
            spec,
            rng,
            &mut state,
            &mut log_p,
            scale,
            &mut proposal,
            lo,
            hi,
        ));
        if (step + 1) % thinning == 0 {
            let mut snapshot = state.clone();
            snapshot.sort_by(|a, b| a.partial_cmp(b).unwrap());
            samples.push(snapshot);
        }
    }
    StreamRun {
        samples,
        accepted,
        steps,
        scale,
    }
}

#[allow(clippy::too_many_arguments)]
fn mh_step(
    spec: &OpeSpec,
    rng: &mut ChaCha8Rng,
    state: &mut [f64],
    log_p: &mut f64,
    scale: f64,
    proposal: &mut [f64],
    lo: f64,
    hi: f64,
) -> bool {
    for (p, &s) in proposal.iter_mut().zip(state.iter()) {
        *p = reflect(s + scale * gaussian(rng), lo, hi);
    }
    let log_q = ope_log_density(spec, proposal);
    if log_q - *log_p >= 0.0 || rng.gen::<f64>().ln() < log_q - *log_p {
        state.copy_from_slice(proposal);
        *log_p = log_q;
        true
    } else {
        false
    }
}

/// Ground truth for small ensembles: `E[statistic]` and the normalization
/// constant `Z = ∫ ∏(t_i-t_j)² ∏ ρ(t_i) dt` by tensorized Gauss–Legendre
/// quadrature. Restricted to `l <= 4` for cost.
pub fn exact_finite_oracle<F: Fn(&[f64]) -> f64>(
    spec: &OpeSpec,
    statistic: F,
    quad_order: usize,
) -> Result<(f64, f64)> {
    if spec.l > 4 {
        return Err(Error::InvalidParameter(format!(
            "exact oracle limited to l <= 4, got {}",
            spec.l
        )));
    }
    if spec.l == 0 {
        return Ok((statistic(&[]), 1.0));
    }
    let rule = GaussRule::legendre(quad_order).mapped_to(spec.interval.0, spec.interval.1);
    let z = tensor_integrate(&rule, spec.l, |pts| ope_log_density(spec, pts).exp());
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Numerical(format!("oracle normalization Z = {z}")));
    }
    let num = tensor_integrate(&rule, spec.l, |pts| {
        statistic(pts) * ope_log_density(spec, pts).exp()
    });
    Ok((num / z, z))
}
