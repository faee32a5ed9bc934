//! Experiment runner: every verification exposed as a reproducible command.
//!
//! Each subcommand reads one TOML config (see `ExperimentConfig`), writes CSV
//! data plus a JSON summary `{command, config, seed, criteria, wall_time_s}`
//! into the output directory, and exits 0 only if all asserted criteria pass
//! (1 on criterion failure, 2 on config errors, 3 on numerical failures).

use clap::{Args, Parser, Subcommand};
use detproc::conditional::{
    conditional_mc_verification, finite_n_conditional_check, quasi_invariance_check_mc,
    quasi_invariance_finite_n, ConditionalMcOptions, PiecewiseIsometry, QiStatistic,
};
use detproc::config::{ExperimentConfig, KernelConfig};
use detproc::error::Error;
use detproc::functionals::{
    psi_regularized, truncation_monotonicity_fraction, variance_scan, TruncationSchedule,
};
use detproc::kernels::{sine_eval, BesselKernel, Configuration, Kernel};
use detproc::orthopoly::{OrthoPolyFamily, ScaledKernel};
use detproc::palm::{
    finite_n_palm_integral_check, finite_n_rn_brute_force, palm_dif_identity_check,
    phi_palm_formula, rho_estimate_mc, rn_derivative_order_l, GridMap, RhoMcOptions,
};
use detproc::report::{write_configurations_csv, write_csv, CriterionResult, RunSummary};
use detproc::sampler::{discretize, dpp_sample_batch};
use detproc::Result;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "detproc",
    version,
    about = "Determinantal point process experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the TOML experiment config.
    #[arg(long, short)]
    config: PathBuf,
    /// Override config entries before validation, e.g. --set sampler.seed=7
    /// (repeatable, dotted paths).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a CSV grid of kernel values over the window.
    ///
    /// Columns: x, y, value.
    KernelTable(RunArgs),
    /// Draw determinantal samples; one configuration per CSV row
    /// (variable-length list of positions).
    Sample(RunArgs),
    /// Scan the multiplicative functional along a truncation schedule.
    ///
    /// Columns: radius, mean_log_psi, tail_variance.
    PsiScan(RunArgs),
    /// Estimate rho(p)/rho(q) by Monte Carlo over Palm samples.
    ///
    /// Columns: p, q, ratio, std_error, target.
    RhoEstimate(RunArgs),
    /// Verify Palm-measure identities: the integral identity at finite n,
    /// the order-l derivative against brute force, and the telescoping /
    /// factorized decompositions.
    ///
    /// Columns: check, instance, residual.
    VerifyPalm(RunArgs),
    /// Verify the conditional-measure formula: exact factorization at finite
    /// n for Christoffel-Darboux kernels, end-to-end Monte Carlo otherwise.
    ///
    /// Columns (finite n): instance, residual. Columns (MC): bin fields and
    /// z-scores.
    VerifyConditional(RunArgs),
    /// Verify quasi-invariance under interval exchanges (quadrature at
    /// finite n, Monte Carlo for sine/Bessel).
    ///
    /// Columns: exchange, statistic, lhs, rhs, discrepancy, z.
    VerifyQi(RunArgs),
    /// Scaled-kernel convergence study toward the sine / Bessel limits.
    ///
    /// Columns: n, max_abs_error.
    Limits(RunArgs),
}

fn main() {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::KernelTable(a) => ("kernel-table", a),
        Command::Sample(a) => ("sample", a),
        Command::PsiScan(a) => ("psi-scan", a),
        Command::RhoEstimate(a) => ("rho-estimate", a),
        Command::VerifyPalm(a) => ("verify-palm", a),
        Command::VerifyConditional(a) => ("verify-conditional", a),
        Command::VerifyQi(a) => ("verify-qi", a),
        Command::Limits(a) => ("limits", a),
    };
    let cfg = match ExperimentConfig::load(&args.config, &args.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            std::process::exit(2);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cfg.output.dir) {
        eprintln!("cannot create output dir: {e}");
        std::process::exit(2);
    }
    let started = Instant::now();
    let mut summary = RunSummary::new(name, &cfg);
    let run = match name {
        "kernel-table" => run_kernel_table(&cfg, &mut summary),
        "sample" => run_sample(&cfg, &mut summary),
        "psi-scan" => run_psi_scan(&cfg, &mut summary),
        "rho-estimate" => run_rho_estimate(&cfg, &mut summary),
        "verify-palm" => run_verify_palm(&cfg, &mut summary),
        "verify-conditional" => run_verify_conditional(&cfg, &mut summary),
        "verify-qi" => run_verify_qi(&cfg, &mut summary),
        "limits" => run_limits(&cfg, &mut summary),
        _ => unreachable!(),
    };
    summary.wall_time_s = started.elapsed().as_secs_f64();
    if let Err(e) = run {
        eprintln!("{name}: {e}");
        std::process::exit(match e {
            Error::Config(_) | Error::InvalidParameter(_) => 2,
            _ => 3,
        });
    }
    let json_path = cfg.output.dir.join(format!("{name}.json"));
    if let Err(e) = summary.write_json(&json_path) {
        eprintln!("cannot write summary: {e}");
        std::process::exit(3);
    }
    for c in &summary.criteria {
        println!(
            "{}: {} (value {:.6e}, tolerance {:.6e})",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.value,
            c.tolerance
        );
    }
    println!("summary: {}", json_path.display());
    std::process::exit(if summary.all_pass() { 0 } else { 1 });
}

fn out_path(cfg: &ExperimentConfig, file: &str) -> PathBuf {
    cfg.output.dir.join(file)
}

fn run_kernel_table(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    let kernel = cfg.kernel.build()?;
    let (lo, hi) = cfg.window.interval();
    let (dlo, dhi) = kernel.domain();
    let m = cfg.experiment.table_points.max(2);
    let step = (hi - lo) / (m - 1) as f64;
    let eps = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    let coords: Vec<f64> = (0..m)
        .map(|i| (lo + i as f64 * step).clamp(dlo + eps, dhi - eps))
        .collect();
    let mut rows = Vec::with_capacity(m * m);
    let mut sym_residual = 0.0_f64;
    for &x in &coords {
        for &y in &coords {
            let v = kernel.eval(x, y);
            sym_residual = sym_residual.max((v - kernel.eval(y, x)).abs());
            rows.push(vec![
                format!("{x:.17e}"),
                format!("{y:.17e}"),
                format!("{v:.17e}"),
            ]);
        }
    }
    write_csv(
        &out_path(cfg, "kernel_table.csv"),
        &["x", "y", "value"],
        rows,
    )?;
    summary.push(CriterionResult::at_most(
        "kernel-symmetry",
        sym_residual,
        1e-12,
    ));
    Ok(())
}

type SamplingSetup = (
    Arc<dyn Kernel>,
    (f64, f64),
    detproc::sampler::DiscretizedKernel,
);

fn sampling_setup(cfg: &ExperimentConfig) -> Result<SamplingSetup> {
    let kernel = cfg.kernel.build()?;
    let window = cfg.window.interval();
    let (sample_kernel, sample_window): (Arc<dyn Kernel>, (f64, f64)) = match cfg.window.map {
        GridMap::Identity => (kernel.clone(), window),
        GridMap::Sqrt => (
            Arc::new(detproc::kernels::SqrtMappedKernel::new(kernel.clone())?) as Arc<dyn Kernel>,
            (window.0.max(0.0).sqrt(), window.1.sqrt()),
        ),
    };
    let dk = discretize(sample_kernel.as_ref(), sample_window, cfg.window.grid_n)?;
    Ok((kernel, window, dk))
}

fn mapped_back(cfg: &ExperimentConfig, samples: Vec<Configuration>) -> Result<Vec<Configuration>> {
    match cfg.window.map {
        GridMap::Identity => Ok(samples),
        GridMap::Sqrt => samples
            .into_iter()
            .map(|c| {
                let pts: Vec<f64> = c.points().iter().map(|&t| t * t).collect();
                Configuration::new(pts, cfg.window.interval())
            })
            .collect(),
    }
}

fn run_sample(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    let (_, _, dk) = sampling_setup(cfg)?;
    let (samples, restarts) = dpp_sample_batch(&dk, &cfg.sampler, cfg.experiment.n_samples)?;
    let samples = mapped_back(cfg, samples)?;
    write_configurations_csv(&out_path(cfg, "samples.csv"), &samples)?;
    summary.push(CriterionResult::at_most(
        "eigenvalue-clamp",
        dk.clamp_report().magnitude(),
        detproc::sampler::CLAMP_TOLERANCE,
    ));
    summary.push(CriterionResult::at_most(
        "degenerate-restarts",
        restarts as f64,
        (cfg.experiment.n_samples / 100).max(10) as f64,
    ));
    Ok(())
}

fn run_psi_scan(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    let kernel = cfg.kernel.build()?;
    let lambda = cfg.lambda.build()?;
    let (p, q) = (cfg.experiment.p, cfg.experiment.q);
    let window = cfg.window.interval();
    let half = window.0.abs().max(window.1.abs());
    let schedule = if cfg.experiment.radii.is_empty() {
        TruncationSchedule::quartic(half, cfg.experiment.schedule_len)?
    } else {
        TruncationSchedule::new(cfg.experiment.radii.clone())?
    };
    let (_, _, dk) = sampling_setup(cfg)?;
    let n_samples = cfg.experiment.n_samples.max(1_000);
    let (samples, _) = dpp_sample_batch(&dk, &cfg.sampler, n_samples)?;
    let samples = mapped_back(cfg, samples)?;

    let scan = variance_scan(
        kernel.as_ref(),
        p,
        q,
        &schedule,
        &cfg.sampler,
        window,
        cfg.window.grid_n,
        n_samples,
    )?;
    let mut rows = Vec::new();
    let mut min_var = f64::INFINITY;
    for (i, &r) in schedule.radii().iter().enumerate() {
        let mut mean_log = 0.0;
        for x in &samples {
            mean_log += psi_regularized(kernel.as_ref(), lambda.as_ref(), p, q, x, r)?.log_value;
        }
        mean_log /= samples.len() as f64;
        let var = scan.rows[i].1;
        min_var = min_var.min(var);
        rows.push(vec![
            format!("{r:.17e}"),
            format!("{mean_log:.17e}"),
            format!("{var:.17e}"),
        ]);
    }
    write_csv(
        &out_path(cfg, "psi_scan.csv"),
        &["radius", "mean_log_psi", "tail_variance"],
        rows,
    )?;
    // cocycle spot check at the largest radius
    let x0 = &samples[0];
    let r_max = schedule.max_radius();
    let mid = 0.5 * (p + q) + 0.1;
    let a = psi_regularized(kernel.as_ref(), lambda.as_ref(), p, mid, x0, r_max)?.log_value;
    let b = psi_regularized(kernel.as_ref(), lambda.as_ref(), mid, q, x0, r_max)?.log_value;
    let c = psi_regularized(kernel.as_ref(), lambda.as_ref(), p, q, x0, r_max)?.log_value;
    summary.push(CriterionResult::at_most(
        "psi-cocycle",
        (a + b - c).abs(),
        1e-9,
    ));
    summary.push(CriterionResult::at_most(
        "tail-variance-nonnegative",
        -min_var,
        0.0,
    ));
    let frac = truncation_monotonicity_fraction(
        kernel.as_ref(),
        lambda.as_ref(),
        p,
        q,
        &schedule,
        &samples[..samples.len().min(500)],
    )?;
    // informational: fraction of samples with monotone truncation gaps
    summary.push(CriterionResult::at_least(
        "monotone-gap-fraction",
        frac,
        0.0,
    ));
    if let Some(slope) = scan.fitted_slope {
        summary.push(CriterionResult::at_least(
            "variance-slope",
            slope,
            f64::NEG_INFINITY,
        ));
    }
    Ok(())
}

fn run_rho_estimate(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    let kernel = cfg.kernel.build()?;
    let lambda = cfg.lambda.build()?;
    let (p, q) = (cfg.experiment.p, cfg.experiment.q);
    let opts = RhoMcOptions {
        window: cfg.window.interval(),
        grid_n: cfg.window.grid_n,
        map: cfg.window.map,
        n_samples: cfg.experiment.n_samples,
        truncation: None,
    };
    let est = rho_estimate_mc(kernel, lambda.as_ref(), p, q, &cfg.sampler, &opts)?;
    let target = cfg.kernel.rho_log_ratio()(p, q).exp();
    write_csv(
        &out_path(cfg, "rho_estimate.csv"),
        &["p", "q", "ratio", "std_error", "target"],
        vec![vec![
            format!("{p:.17e}"),
            format!("{q:.17e}"),
            format!("{:.17e}", est.ratio),
            format!("{:.17e}", est.std_error),
            format!("{target:.17e}"),
        ]],
    )?;
    let band = (0.1 * target.abs()).max(3.0 * est.std_error);
    summary.push(CriterionResult::within(
        "rho-ratio",
        est.ratio,
        target,
        band,
    ));
    if let Some(w) = est.warning {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn cd_family(kernel: &KernelConfig) -> Option<(OrthoPolyFamily, usize)> {
    match kernel {
        KernelConfig::HermiteCd { n } => Some((OrthoPolyFamily::Hermite, *n)),
        KernelConfig::JacobiCd { n, s } => OrthoPolyFamily::jacobi(*s).ok().map(|f| (f, *n)),
        _ => None,
    }
}

fn family_box(family: &OrthoPolyFamily) -> (f64, f64) {
    let (lo, hi) = family.support();
    if hi.is_finite() {
        (lo + 0.05, hi - 0.05)
    } else {
        (-2.5, 2.5)
    }
}

fn run_verify_palm(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    let kernel = cfg.kernel.build()?;
    let rho = cfg.kernel.rho_log_ratio();
    let mut rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sampler.seed);

    if let Some((family, n)) = cd_family(&cfg.kernel) {
        // Palm integral identity at finite n over five (p, q) pairs
        let (blo, bhi) = family_box(&family);
        let mut worst_integral = 0.0_f64;
        for i in 0..5 {
            let p = rng.gen_range(blo..bhi);
            let q = rng.gen_range(blo..bhi);
            if p == q {
                continue;
            }
            let r =
                finite_n_palm_integral_check(&family, n.min(4), p, q, cfg.experiment.quad_order)?;
            worst_integral = worst_integral.max(r);
            rows.push(vec![
                "palm-integral".into(),
                format!("pair-{i}(p={p:.4},q={q:.4})"),
                format!("{r:.3e}"),
            ]);
        }
        summary.push(CriterionResult::at_most(
            "palm-integral-identity",
            worst_integral,
            1e-6,
        ));

        // order-l derivative against brute force, keeping the component
        // breakdowns as a JSON artifact
        let mut worst_rn = 0.0_f64;
        let mut breakdowns = Vec::new();
        for l in 1..=cfg.experiment.order_l.min(n - 1) {
            for i in 0..3 {
                let x = random_config(&mut rng, n - l, (blo, bhi))?;
                let p_t = random_tuple(&mut rng, l, (blo, bhi), &x);
                let q_t = random_tuple(&mut rng, l, (blo, bhi), &x);
                let kernel_cd = cfg.kernel.build()?;
                let psi = detproc::functionals::psi_truncated;
                let assembled = rn_derivative_order_l(
                    kernel_cd.as_ref(),
                    rho.as_ref(),
                    &psi,
                    &p_t,
                    &q_t,
                    &x,
                    1e6,
                )?;
                let brute =
                    finite_n_rn_brute_force(&family, n, &p_t, &q_t, &x, cfg.experiment.quad_order)?;
                let r = (assembled.log_rn - brute).abs();
                worst_rn = worst_rn.max(r);
                rows.push(vec![
                    "rn-vs-brute-force".into(),
                    format!("l={l} instance-{i}"),
                    format!("{r:.3e}"),
                ]);
                breakdowns.push(assembled);
            }
        }
        summary.push(CriterionResult::at_most("rn-order-l", worst_rn, 1e-6));
        let breakdown_json = serde_json::to_string_pretty(&breakdowns)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        std::fs::write(out_path(cfg, "rn_components.json"), breakdown_json + "\n")?;
    }

    // telescoping and factorized decompositions on random instances
    let (dlo, dhi) = kernel.domain();
    let box_ = (
        dlo.max(cfg.window.lo.max(dlo + 0.1)),
        dhi.min(cfg.window.hi),
    );
    let mut worst_dif = 0.0_f64;
    let mut worst_phi = 0.0_f64;
    let psi = detproc::functionals::psi_truncated;
    let r_all = box_.0.abs().max(box_.1.abs());
    for i in 0..100 {
        let x = random_config(&mut rng, 3, box_)?;
        let l = 1 + (i % 3);
        let p_t = random_tuple(&mut rng, l, box_, &x);
        let q_t = random_tuple(&mut rng, l, box_, &x);
        let dif =
            palm_dif_identity_check(kernel.as_ref(), rho.as_ref(), &psi, &p_t, &q_t, &x, r_all)?;
        let rep =
            rn_derivative_order_l(kernel.as_ref(), rho.as_ref(), &psi, &p_t, &q_t, &x, r_all)?;
        let phi = phi_palm_formula(&p_t, &q_t, &x, &psi, r_all)?;
        let phi_res =
            (phi - rep.components.log_vandermonde_ratio - rep.components.log_psi_sum).abs();
        worst_dif = worst_dif.max(dif);
        worst_phi = worst_phi.max(phi_res);
        if i < 10 {
            rows.push(vec![
                "palm-dif".into(),
                format!("instance-{i}"),
                format!("{dif:.3e}"),
            ]);
            rows.push(vec![
                "phi-palm".into(),
                format!("instance-{i}"),
                format!("{phi_res:.3e}"),
            ]);
        }
    }
    summary.push(CriterionResult::at_most(
        "palm-dif-telescoping",
        worst_dif,
        1e-10,
    ));
    summary.push(CriterionResult::at_most(
        "phi-palm-decomposition",
        worst_phi,
        1e-10,
    ));
    write_csv(
        &out_path(cfg, "verify_palm.csv"),
        &["check", "instance", "residual"],
        rows,
    )?;
    Ok(())
}

fn random_config(rng: &mut ChaCha8Rng, count: usize, box_: (f64, f64)) -> Result<Configuration> {
    loop {
        let pts: Vec<f64> = (0..count).map(|_| rng.gen_range(box_.0..box_.1)).collect();
        if let Ok(c) = Configuration::new(pts, box_) {
            return Ok(c);
        }
    }
}

fn random_tuple(
    rng: &mut ChaCha8Rng,
    l: usize,
    box_: (f64, f64),
    avoid: &Configuration,
) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(l);
    while out.len() < l {
        let v = rng.gen_range(box_.0..box_.1);
        if !out.contains(&v) && !avoid.points().contains(&v) {
            out.push(v);
        }
    }
    out
}

fn run_verify_conditional(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    if let Some((family, _)) = cd_family(&cfg.kernel) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.sampler.seed);
        let (blo, bhi) = family_box(&family);
        let mut worst = 0.0_f64;
        let mut rows = Vec::new();
        for i in 0..50 {
            let n = 2 + (i % 5);
            let l = 1 + (i % n.min(3));
            let mid = 0.5 * (blo + bhi) + 0.1 * (rng.gen::<f64>() - 0.5);
            let half = 0.15 * (bhi - blo);
            let interval = (mid - half, mid + half);
            let mut outside = Vec::new();
            while outside.len() < n - l {
                let v = rng.gen_range(blo..bhi);
                if v < interval.0 || v > interval.1 {
                    outside.push(v);
                }
            }
            let a: Vec<f64> = (0..l)
                .map(|_| rng.gen_range(interval.0..interval.1))
                .collect();
            let b: Vec<f64> = (0..l)
                .map(|_| rng.gen_range(interval.0..interval.1))
                .collect();
            let r = finite_n_conditional_check(&family, n, interval, &outside, &a, &b)?;
            worst = worst.max(r);
            rows.push(vec![
                format!("n={n} l={l} instance-{i}"),
                format!("{r:.3e}"),
            ]);
        }
        write_csv(
            &out_path(cfg, "verify_conditional.csv"),
            &["instance", "residual"],
            rows,
        )?;
        summary.push(CriterionResult::at_most(
            "conditional-finite-n",
            worst,
            1e-10,
        ));
    } else {
        let kernel = cfg.kernel.build()?;
        let lambda = cfg.lambda.build()?;
        let opts = ConditionalMcOptions {
            window: cfg.window.interval(),
            grid_n: cfg.window.grid_n,
            map: cfg.window.map,
            n_outer: cfg.experiment.n_samples,
            mcmc_steps_per_particle: cfg.experiment.mcmc_steps_per_particle,
            min_bin: cfg.experiment.min_bin,
        };
        let rep = conditional_mc_verification(
            kernel,
            lambda.as_ref(),
            cfg.kernel.rho_log_ratio(),
            cfg.interval(),
            &cfg.sampler,
            &opts,
        )?;
        let rows: Vec<Vec<String>> = rep
            .bins
            .iter()
            .map(|b| {
                vec![
                    b.inside_count.to_string(),
                    b.outside_count_bucket.to_string(),
                    b.distance_bucket.to_string(),
                    b.n.to_string(),
                    format!("{:.6e}", b.z_mean),
                    format!("{:.6e}", b.z_second_moment),
                ]
            })
            .collect();
        write_csv(
            &out_path(cfg, "verify_conditional.csv"),
            &[
                "inside_count",
                "count_bucket",
                "dist_bucket",
                "n",
                "z_mean",
                "z_second",
            ],
            rows,
        )?;
        summary.push(CriterionResult::at_least(
            "conditional-mc-z-coverage",
            rep.fraction_ok,
            0.95,
        ));
    }
    Ok(())
}

fn default_exchanges(window: (f64, f64)) -> Vec<PiecewiseIsometry> {
    let width = window.1 - window.0;
    let mid = 0.5 * (window.0 + window.1);
    let u = (width * 0.04).min(0.45);
    // two interval exchanges well inside the window with a safety margin
    vec![
        PiecewiseIsometry::swap((mid, mid + u), (mid + 1.25 * u, mid + 2.25 * u), 0.3 * u)
            .expect("valid exchange"),
        PiecewiseIsometry::swap(
            (mid - 2.0 * u, mid - u),
            (mid + 0.5 * u, mid + 1.5 * u),
            0.3 * u,
        )
        .expect("valid exchange"),
    ]
}

fn run_verify_qi(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    let mut rows = Vec::new();
    if let Some((family, n)) = cd_family(&cfg.kernel) {
        let (blo, bhi) = family_box(&family);
        let mid = 0.5 * (blo + bhi);
        let u = 0.1 * (bhi - blo);
        let t = PiecewiseIsometry::swap(
            (mid - 2.0 * u, mid - u),
            (mid + 0.5 * u, mid + 1.5 * u),
            0.3 * u,
        )?;
        let stats = [
            QiStatistic::count("count-left", (mid - 2.0 * u, mid - u)),
            QiStatistic::position_sum("position-sum", (blo, bhi)),
            QiStatistic::gaussian_sum("gaussian-sum", mid, u),
        ];
        let out = quasi_invariance_finite_n(&family, n.min(4), &t, &stats, 14)?;
        let mut worst = 0.0_f64;
        for row in &out {
            worst = worst.max(row.residual);
            rows.push(vec![
                "exchange-0".into(),
                row.label.clone(),
                format!("{:.10e}", row.pushforward),
                format!("{:.10e}", row.reweighted),
                format!("{:.3e}", row.residual),
                String::new(),
            ]);
        }
        summary.push(CriterionResult::at_most("qi-finite-n", worst, 1e-6));
    } else {
        let kernel = cfg.kernel.build()?;
        let lambda = cfg.lambda.build()?;
        let rho = cfg.kernel.rho_log_ratio();
        let window = cfg.window.interval();
        let mut worst_z = 0.0_f64;
        for (ti, t) in default_exchanges(window).iter().enumerate() {
            let (vlo, vhi) = t.support();
            let stats = [
                QiStatistic::count("count-left", (vlo, 0.5 * (vlo + vhi))),
                QiStatistic::position_sum("position-sum", (vlo, vhi)),
                QiStatistic::gaussian_sum("gaussian-sum", 0.5 * (vlo + vhi), 0.5 * (vhi - vlo)),
            ];
            let rep = quasi_invariance_check_mc(
                kernel.clone(),
                rho.as_ref(),
                lambda.as_ref(),
                t,
                &stats,
                &cfg.sampler,
                window,
                cfg.window.grid_n,
                cfg.experiment.n_samples,
            )?;
            for row in &rep.rows {
                worst_z = worst_z.max(row.z.abs());
                rows.push(vec![
                    format!("exchange-{ti}"),
                    row.label.clone(),
                    String::new(),
                    String::new(),
                    format!("{:.6e}", row.mean_diff),
                    format!("{:.3}", row.z),
                ]);
            }
        }
        summary.push(CriterionResult::at_most("qi-mc-max-z", worst_z, 3.0));
    }
    write_csv(
        &out_path(cfg, "verify_qi.csv"),
        &["exchange", "statistic", "lhs", "rhs", "discrepancy", "z"],
        rows,
    )?;
    Ok(())
}

fn run_limits(cfg: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    match &cfg.kernel {
        KernelConfig::HermiteCd { .. } => {
            for &n in &cfg.experiment.ns {
                let sk = ScaledKernel::hermite_bulk(n)?;
                let mut worst = 0.0_f64;
                let m = 9;
                for i in 0..m {
                    for j in 0..m {
                        let x = -2.0 + 4.0 * i as f64 / (m - 1) as f64;
                        let y = -2.0 + 4.0 * j as f64 / (m - 1) as f64;
                        worst = worst.max((sk.eval(x, y)? - sine_eval(x, y)).abs());
                    }
                }
                errors.push(worst);
                rows.push(vec![n.to_string(), format!("{worst:.6e}")]);
            }
        }
        KernelConfig::JacobiCd { s, .. } => {
            let target = BesselKernel::new(*s)?;
            for &n in &cfg.experiment.ns {
                let sk = ScaledKernel::jacobi_hard_edge(n, *s)?;
                let mut worst = 0.0_f64;
                let m = 10;
                for i in 0..m {
                    for j in 0..m {
                        let x = 0.5 + 4.5 * i as f64 / (m - 1) as f64;
                        let y = 0.5 + 4.5 * j as f64 / (m - 1) as f64;
                        worst = worst.max((sk.eval(x, y)? - target.eval(x, y)).abs());
                    }
                }
                errors.push(worst);
                rows.push(vec![n.to_string(), format!("{worst:.6e}")]);
            }
        }
        other => {
            return Err(Error::Config(format!(
                "limits needs a Christoffel-Darboux kernel config, got {}",
                other.label()
            )))
        }
    }
    write_csv(&out_path(cfg, "limits.csv"), &["n", "max_abs_error"], rows)?;
    let last = *errors.last().unwrap();
    summary.push(CriterionResult::at_most("limit-error-at-max-n", last, 1e-2));
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    summary.push(CriterionResult::at_least(
        "limit-error-decreasing",
        if decreasing { 1.0 } else { 0.0 },
        1.0,
    ));
    Ok(())
}
