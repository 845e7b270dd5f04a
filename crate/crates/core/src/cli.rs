//! Command-line entry point: constants, sampling, skeletons, transforms and
//! named experiments.
//!
//! Exit codes: 0 success or experiment pass, 1 usage or configuration error,
//! 2 experiment fail, 3 experiment inconclusive.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Map, Value};

pub use crate::config::{OutFormat, RunConfig, CONFIG_ENV};
use crate::error::{Error, Result};
use crate::experiments::{ExperimentSpec, LEDGER_HEADER};
use crate::exponents::{
    chain_rates, clock_mean_1d, conditioned_clock_mean, entry_density_constant, planar_clock_mean,
    renewal_rate, upcrossing_constant, ConstantValue, StableParams,
};
use crate::path_engine::{simulate_skeleton, PathSkeleton, PathValue, Stable1d, StablePlanar, TimeGrid};
use crate::sampler::{sample_stable_1d, sample_stable_planar, RngStream};
use crate::transforms::{rbz_transform, reverse_from_last_exit, Invertible, TransformedPath};

#[derive(Debug, Parser)]
#[command(name = "stable-windings", version, about = "Windings and upcrossings of stable Lévy processes")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Args, Default)]
pub struct Common {
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long = "n-paths", short = 'n', global = true)]
    pub n_paths: Option<usize>,
    #[arg(long = "t-log", global = true)]
    pub t_log: Option<f64>,
    /// Points per decade of time.
    #[arg(long, global = true)]
    pub mesh: Option<u32>,
    /// Half-width of the interval standing in for the origin.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    /// key=value config file; defaults to $STABLE_WINDINGS_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print closed-form constants for the given parameters.
    Constants {
        /// Comma-separated constant names, or `all`.
        #[arg(long, default_value = "all")]
        which: String,
    },
    /// Draw increments of the process over a fixed time step.
    Sample {
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        /// 1 for the real-valued process, 2 for the isotropic planar one.
        #[arg(long, default_value_t = 1)]
        dim: u8,
    },
    /// Simulate a skeleton on a time grid.
    Path {
        /// `uniform:start:end:steps`, `geometric:tmin:tmax:per_decade`, or a
        /// comma-separated list of times.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 1)]
        dim: u8,
        /// Starting modulus (planar starts on the positive real axis).
        #[arg(long, default_value_t = 1.0)]
        start: f64,
    },
    /// Apply a path transform to a skeleton CSV.
    Transform {
        #[arg(value_enum)]
        kind: TransformKind,
        #[arg(long = "in")]
        input: PathBuf,
        /// Ball radius for `reverse`.
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    /// Run a named experiment and write its report.
    Experiment {
        name: String,
        /// Winding mode, upcrossing regime, or similar experiment switch.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long = "start-modulus")]
        start_modulus: Option<f64>,
        #[arg(long = "compare-modulus")]
        compare_modulus: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        time: Option<f64>,
        /// Append the report as a row to this CSV ledger.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TransformKind {
    Rbz,
    Reverse,
}

const CONSTANT_NAMES: [&str; 8] = [
    "upcrossing_constant",
    "renewal_rate",
    "clock_mean_1d",
    "conditioned_clock_mean",
    "planar_clock_mean",
    "chain_rate_down",
    "chain_rate_up",
    "entry_density_constant",
];

fn formula(name: &str) -> &'static str {
    match name {
        "upcrossing_constant" => "sin(pi a r) sin(pi a r^) / (a pi |sin(pi a)|)",
        "renewal_rate" => "Gamma(a) sin(pi a r) sin(pi a r^) / (pi (sin(pi a r) + sin(pi a r^)))",
        "clock_mean_1d" => "(sin(pi a r) + sin(pi a r^)) / (Gamma(1 + a) sin(pi a))",
        "conditioned_clock_mean" => "Gamma(-a) (sin(pi a r) + sin(pi a r^)) / pi",
        "planar_clock_mean" => "2^-a Gamma(1 - a/2) / Gamma(1 + a/2)",
        "chain_rate_down" => "Gamma(a) sin(pi a r^) / pi",
        "chain_rate_up" => "Gamma(a) sin(pi a r) / pi",
        _ => "2^(a-1) Gamma(2 - a) / (Gamma(1 - a r^) Gamma(1 - a r))",
    }
}

fn constant(name: &str, p: StableParams) -> Result<ConstantValue> {
    let fin = ConstantValue::Finite;
    match name {
        "upcrossing_constant" => Ok(upcrossing_constant(p)),
        "renewal_rate" => Ok(fin(renewal_rate(p))),
        "clock_mean_1d" => clock_mean_1d(p),
        "conditioned_clock_mean" => conditioned_clock_mean(p).map(fin),
        "planar_clock_mean" => planar_clock_mean(p.alpha).map(fin),
        "chain_rate_down" => Ok(fin(chain_rates(p).0)),
        "chain_rate_up" => Ok(fin(chain_rates(p).1)),
        "entry_density_constant" => entry_density_constant(p).map(fin),
        _ => Err(Error::config(
            "which",
            format!("unknown constant `{name}`; known: {}", CONSTANT_NAMES.join(", ")),
        )),
    }
}

fn constant_json(v: ConstantValue) -> Value {
    match v {
        ConstantValue::Finite(x) => json!(x),
        ConstantValue::Infinite => json!("inf"),
    }
}

/// Resolve the requested names. With `all`, constants undefined for these
/// parameters are left out; an explicitly requested one is an error.
pub fn cmd_constants(p: StableParams, which: &str) -> Result<Vec<(&'static str, ConstantValue)>> {
    if which == "all" {
        return Ok(CONSTANT_NAMES
            .iter()
            .filter_map(|&n| constant(n, p).ok().map(|v| (n, v)))
            .collect());
    }
    which
        .split(',')
        .map(|w| {
            let w = w.trim();
            let name = CONSTANT_NAMES
                .iter()
                .copied()
                .find(|&n| n == w || n.strip_suffix("_constant") == Some(w))
                .ok_or_else(|| {
                    Error::config(
                        "which",
                        format!("unknown constant `{w}`; known: {}", CONSTANT_NAMES.join(", ")),
                    )
                })?;
            Ok((name, constant(name, p)?))
        })
        .collect()
}

fn params(cfg: &RunConfig) -> Result<StableParams> {
    StableParams::new(cfg.alpha.unwrap_or(1.0), cfg.rho.unwrap_or(0.5))
        .map_err(|e| Error::config("alpha/rho", e.to_string()))
}

fn planar_alpha(cfg: &RunConfig) -> Result<f64> {
    let a = cfg.alpha.unwrap_or(1.0);
    if a > 0.0 && a < 2.0 {
        Ok(a)
    } else {
        Err(Error::config("alpha", "must lie in (0, 2)"))
    }
}

fn write_transformed<T: PathValue>(t: &TransformedPath<T>, out: &mut dyn Write, sidecar: Option<&Path>, err: &mut dyn Write) -> Result<()> {
    t.skeleton.write_csv(&mut *out)?;
    match sidecar {
        Some(p) => t.write_provenance(std::fs::File::create(p)?)?,
        None => {
            t.write_provenance(&mut *err)?;
            writeln!(err)?;
        }
    }
    Ok(())
}

fn transform_path<T: Invertible>(path: PathSkeleton<T>, kind: TransformKind, cfg: &RunConfig, radius: f64, out: &mut dyn Write, sidecar: Option<&Path>, err: &mut dyn Write) -> Result<()> {
    let t = match kind {
        TransformKind::Rbz => rbz_transform(&path, planar_alpha(cfg)?, None)?,
        TransformKind::Reverse => reverse_from_last_exit(&path, radius, None)?,
    };
    write_transformed(&t, out, sidecar, err)
}

/// Sidecar file next to the output: `<out>.provenance.json`.
fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".provenance.json");
    PathBuf::from(s)
}

fn load_config(common: &Common, default_config: Option<PathBuf>) -> Result<RunConfig> {
    let file = match common.config.clone().or(default_config) {
        Some(p) => RunConfig::from_file(&p)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        alpha: common.alpha,
        rho: common.rho,
        seed: common.seed,
        n_paths: common.n_paths,
        t_log: common.t_log,
        mesh: common.mesh,
        epsilon: common.epsilon,
        workers: common.workers,
        out_format: common.format.map(|f| match f {
            FormatArg::Csv => OutFormat::Csv,
            FormatArg::Json => OutFormat::Json,
        }),
        out_path: common.out.clone(),
        ..Default::default()
    };
    Ok(file.merged(&flags))
}

fn execute(cli: Cli, default_config: Option<PathBuf>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let mut cfg = load_config(&cli.common, default_config)?;
    if let Command::Experiment {
        mode,
        start_modulus,
        compare_modulus,
        radius,
        time,
        ..
    } = &cli.command
    {
        cfg = cfg.merged(&RunConfig {
            mode: mode.clone(),
            start_modulus: *start_modulus,
            compare_modulus: *compare_modulus,
            radius: *radius,
            time: *time,
            ..Default::default()
        });
    }
    let mut file_out;
    let out: &mut dyn Write = match &cfg.out_path {
        Some(p) => {
            file_out = std::io::BufWriter::new(std::fs::File::create(p)?);
            &mut file_out
        }
        None => stdout,
    };
    let format = cfg.out_format.unwrap_or_default();
    let seed = cfg.seed.unwrap_or(1);

    match cli.command {
        Command::Constants { which } => {
            let p = params(&cfg)?;
            let values = cmd_constants(p, &which)?;
            match format {
                OutFormat::Json => {
                    let mut doc = Map::new();
                    let mut formulas = Map::new();
                    for (n, v) in &values {
                        doc.insert((*n).into(), constant_json(*v));
                        formulas.insert((*n).into(), json!(formula(n)));
                    }
                    doc.insert("alpha".into(), json!(p.alpha));
                    doc.insert("rho".into(), json!(p.rho));
                    doc.insert("formulas".into(), Value::Object(formulas));
                    writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
                }
                OutFormat::Csv => {
                    writeln!(out, "name,value,formula")?;
                    for (n, v) in &values {
                        let v = match v {
                            ConstantValue::Finite(x) => format!("{x:.17e}"),
                            ConstantValue::Infinite => "inf".into(),
                        };
                        writeln!(out, "{n},{v},{}", formula(n))?;
                    }
                }
            }
            Ok(0)
        }
        Command::Sample { dt, dim } => {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config("dt", "must be positive"));
            }
            let n = cfg.n_paths.unwrap_or(10);
            let mut rng = RngStream::derived(seed, 0, 0);
            match dim {
                1 => {
                    let p = params(&cfg)?;
                    writeln!(out, "x")?;
                    for _ in 0..n {
                        writeln!(out, "{:.16e}", sample_stable_1d(&mut rng, p, dt))?;
                    }
                }
                2 => {
                    let a = planar_alpha(&cfg)?;
                    writeln!(out, "re,im")?;
                    for _ in 0..n {
                        let z = sample_stable_planar(&mut rng, a, dt);
                        writeln!(out, "{:.16e},{:.16e}", z.re, z.im)?;
                    }
                }
                _ => return Err(Error::config("dim", "must be 1 or 2")),
            }
            Ok(0)
        }
        Command::Path { grid, dim, start } => {
            let times = TimeGrid::parse(&grid)?.points()?;
            let mut rng = RngStream::derived(seed, 0, 0);
            match dim {
                1 => simulate_skeleton(&mut rng, &Stable1d(params(&cfg)?), &times, start, false)?.write_csv(&mut *out)?,
                2 => simulate_skeleton(&mut rng, &StablePlanar(planar_alpha(&cfg)?), &times, Complex64::new(start, 0.0), false)?
                    .write_csv(&mut *out)?,
                _ => return Err(Error::config("dim", "must be 1 or 2")),
            }
            Ok(0)
        }
        Command::Transform { kind, input, radius } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| Error::config("in", format!("{}: {e}", input.display())))?;
            let header = text.lines().next().unwrap_or("");
            let rest = text.as_bytes();
            let sidecar = cfg.out_path.as_deref().map(sidecar_path);
            match header.trim() {
                h if h == f64::CSV_HEADER => {
                    transform_path(PathSkeleton::<f64>::read_csv(rest)?, kind, &cfg, radius, out, sidecar.as_deref(), stderr)?
                }
                h if h == Complex64::CSV_HEADER => {
                    transform_path(PathSkeleton::<Complex64>::read_csv(rest)?, kind, &cfg, radius, out, sidecar.as_deref(), stderr)?
                }
                h => return Err(Error::config("in", format!("unrecognised CSV header `{h}`"))),
            }
            Ok(0)
        }
        Command::Experiment { name, ledger, .. } => {
            let spec = ExperimentSpec::from_config(&name, &cfg)?;
            let report = spec.run(cfg.workers())?;
            match format {
                OutFormat::Json => writeln!(out, "{}", report.to_json()?)?,
                OutFormat::Csv => writeln!(out, "{LEDGER_HEADER}\n{}", report.csv_row())?,
            }
            if let Some(l) = ledger {
                report.append_ledger(&l)?;
            }
            out.flush()?;
            writeln!(stderr, "{}: {:?}", report.name, report.verdict)?;
            Ok(report.verdict.exit_code())
        }
    }
}

/// Parse `args` and run, writing to the given streams. `default_config` plays
/// the role of the environment variable.
pub fn run_with<I, T>(args: I, default_config: Option<PathBuf>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli, default_config, stdout, stderr) {
        Ok(code) => code,
        Err(Error::OutputClosed) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

/// Entry point used by the binary.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, env, &mut stdout.lock(), &mut stderr.lock())
}
