//! Experiment configuration: a single TOML file with strict schema
//! validation. Unknown keys are rejected, and every run embeds the resolved
//! config and seed in its output.

use crate::error::{Error, Result};
use crate::functionals::LambdaRegularizer;
use crate::kernels::{BesselKernel, Kernel, SineKernel};
use crate::orthopoly::{CdKernel, OrthoPolyFamily};
use crate::palm::GridMap;
use crate::sampler::SamplerConfig;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::Arc;

/// Kernel selector.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "type")]
pub enum KernelConfig {
    Sine,
    Bessel { s: f64 },
    HermiteCd { n: usize },
    JacobiCd { n: usize, s: f64 },
}

impl KernelConfig {
    pub fn build(&self) -> Result<Arc<dyn Kernel>> {
        Ok(match self {
            KernelConfig::Sine => Arc::new(SineKernel),
            KernelConfig::Bessel { s } => Arc::new(BesselKernel::new(*s)?),
            KernelConfig::HermiteCd { n } => Arc::new(CdKernel::new(OrthoPolyFamily::Hermite, *n)?),
            KernelConfig::JacobiCd { n, s } => {
                Arc::new(CdKernel::new(OrthoPolyFamily::jacobi(*s)?, *n)?)
            }
        })
    }

    /// The weight-ratio provider `log ρ(p)/ρ(q)` matched to the kernel:
    /// constant for sine, `t^s` for Bessel, the classical weight for
    /// Christoffel–Darboux kernels.
    pub fn rho_log_ratio(&self) -> Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> {
        match self {
            KernelConfig::Sine => Arc::new(|_p, _q| 0.0),
            KernelConfig::Bessel { s } => {
                let s = *s;
                Arc::new(move |p: f64, q: f64| s * (p / q).ln())
            }
            KernelConfig::HermiteCd { .. } => Arc::new(move |p: f64, q: f64| q * q - p * p),
            KernelConfig::JacobiCd { s, .. } => {
                let s = *s;
                Arc::new(move |p: f64, q: f64| s * ((1.0 - p).ln() - (1.0 - q).ln()))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            KernelConfig::Sine => "sine".into(),
            KernelConfig::Bessel { s } => format!("bessel(s={s})"),
            KernelConfig::HermiteCd { n } => format!("hermite-cd(n={n})"),
            KernelConfig::JacobiCd { n, s } => format!("jacobi-cd(n={n},s={s})"),
        }
    }
}

/// Observation window and grid resolution.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub lo: f64,
    pub hi: f64,
    pub grid_n: usize,
    #[serde(default = "default_map")]
    pub map: GridMap,
}

fn default_map() -> GridMap {
    GridMap::Identity
}

impl WindowConfig {
    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// Regularizer selector.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "type")]
pub enum LambdaConfig {
    #[default]
    None,
    /// `λ₀(x) = x/(x²+1)`
    Rational,
    /// Piecewise-linear table inside `[xs[0], xs[last]]` with a `1/x` tail.
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl LambdaConfig {
    pub fn build(&self) -> Result<Option<LambdaRegularizer>> {
        match self {
            LambdaConfig::None => Ok(None),
            LambdaConfig::Rational => Ok(Some(LambdaRegularizer::rational())),
            LambdaConfig::Table { xs, ys } => {
                if xs.len() != ys.len() || xs.len() < 2 {
                    return Err(Error::Config(
                        "lambda table needs matching xs/ys with at least two points".into(),
                    ));
                }
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("lambda table xs must be increasing".into()));
                }
                let xs = xs.clone();
                let ys = ys.clone();
                let f = move |x: f64| -> f64 {
                    let (x0, xn) = (xs[0], *xs.last().unwrap());
                    if x < x0 {
                        return ys[0] * x0 / x.min(-f64::MIN_POSITIVE);
                    }
                    if x > xn {
                        return ys.last().unwrap() * xn / x;
                    }
                    let i = xs.partition_point(|&v| v <= x).min(xs.len() - 1).max(1);
                    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
                    ys[i - 1] + t * (ys[i] - ys[i - 1])
                };
                Ok(Some(LambdaRegularizer::from_fn("table", Arc::new(f))?))
            }
        }
    }
}

/// Per-subcommand knobs; all optional with defaults.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub n_samples: usize,
    /// Evaluation / estimation points.
    pub p: f64,
    pub q: f64,
    /// Compact interval `I` for conditional experiments.
    pub interval_lo: f64,
    pub interval_hi: f64,
    /// Truncation radii (empty: quartic schedule of `schedule_len` radii).
    pub radii: Vec<f64>,
    pub schedule_len: usize,
    /// Grid resolution for `kernel-table`.
    pub table_points: usize,
    /// Degrees for the `limits` convergence study.
    pub ns: Vec<usize>,
    pub quad_order: usize,
    pub mcmc_steps_per_particle: usize,
    pub min_bin: usize,
    /// Tuple order for Palm checks.
    pub order_l: usize,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            n_samples: 10_000,
            p: 2.0,
            q: 1.0,
            interval_lo: 0.0,
            interval_hi: 1.0,
            radii: Vec::new(),
            schedule_len: 6,
            table_points: 41,
            ns: vec![25, 50, 100, 200],
            quad_order: 48,
            mcmc_steps_per_particle: 400,
            min_bin: 100,
            order_l: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
        }
    }
}

/// A full experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelConfig,
    pub window: WindowConfig,
    #[serde(default)]
    pub lambda: LambdaConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub experiment: ExperimentParams,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Parse a TOML string, apply `key.path=value` overrides, and validate.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value = text
            .parse()
            .map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let cfg: ExperimentConfig = value
            .try_into()
            .map_err(|e| Error::Config(format!("schema error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window.hi > self.window.lo) {
            return Err(Error::Config(format!(
                "window lo {} must be below hi {}",
                self.window.lo, self.window.hi
            )));
        }
        if self.window.grid_n < 16 {
            return Err(Error::Config("window.grid_n must be at least 16".into()));
        }
        self.sampler
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.experiment.interval_hi <= self.experiment.interval_lo {
            return Err(Error::Config("experiment interval is degenerate".into()));
        }
        Ok(())
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.experiment.interval_lo, self.experiment.interval_hi)
    }
}

fn apply_override(value: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' must be key.path=value")))?;
    let parsed: toml::Value = if let Ok(i) = raw.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = raw.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(raw.to_string())
    };
    let mut cur = value;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path '{path}' hits a non-table")))?;
        if i + 1 == segments.len() {
            table.insert(seg.to_string(), parsed);
            return Ok(());
        }
        cur = table
            .entry(seg.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[kernel]
type = "bessel"
s = 0.5

[window]
lo = 0.0
hi = 100.0
grid_n = 512
map = "sqrt"
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(BASE, &[]).unwrap();
        assert_eq!(cfg.kernel, KernelConfig::Bessel { s: 0.5 });
        assert_eq!(cfg.sampler.seed, 1);
        assert_eq!(cfg.experiment.n_samples, 10_000);
        assert_eq!(cfg.window.map, GridMap::Sqrt);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = format!("{BASE}\nbogus = 1\n");
        assert!(ExperimentConfig::from_toml(&bad, &[]).is_err());
        let bad = BASE.replace("grid_n = 512", "grid_n = 512\nunknown_field = 2");
        assert!(ExperimentConfig::from_toml(&bad, &[]).is_err());
    }

    #[test]
    fn overrides_apply_before_validation() {
        let cfg = ExperimentConfig::from_toml(
            BASE,
            &["sampler.seed=42".into(), "experiment.p=3.0".into()],
        )
        .unwrap();
        assert_eq!(cfg.sampler.seed, 42);
        assert_eq!(cfg.experiment.p, 3.0);
        assert!(ExperimentConfig::from_toml(BASE, &["window.grid_n=4".into()]).is_err());
    }

    #[test]
    fn kernel_constructors() {
        let k = KernelConfig::Sine.build().unwrap();
        assert_eq!(k.eval(0.0, 0.0), 1.0);
        let rho = KernelConfig::Bessel { s: 2.0 }.rho_log_ratio();
        assert!((rho(2.0, 1.0) - 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!(KernelConfig::JacobiCd { n: 0, s: 0.5 }.build().is_err());
    }

    #[test]
    fn lambda_table_build() {
        let table = LambdaConfig::Table {
            xs: vec![-10.0, 0.0, 10.0],
            ys: vec![-0.099, 0.0, 0.099],
        };
        let lam = table.build().unwrap().unwrap();
        assert!((lam.eval(5.0) - 0.0495).abs() < 1e-12);
        assert!(lam.eval(100.0) > 0.0);
        assert!(LambdaConfig::None.build().unwrap().is_none());
    }
}
