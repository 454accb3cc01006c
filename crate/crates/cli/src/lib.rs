//! Command-line front end: argument parsing, subcommand dispatch and output
//! formatting. [`run`] is the whole program; `main` only forwards to it.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use stein_ustat::bounds::{compute_bound_report, BoundConfig};
use stein_ustat::chaos::{variance_from_kernels, MarginalEvaluator, McConfig};
use stein_ustat::distance::{empirical_distances, poisson_exact_dk};
use stein_ustat::experiment::{run_sweep, standardized_samples, SweepConfig};
use stein_ustat::kernels::{make_kernel, KernelDescriptor};
use stein_ustat::measure::{derive_seed, stream_rng};
use stein_ustat::partitions::{count_partitions, for_each_partition, variables, Partition};
use stein_ustat::stein::{check_stein_properties, SteinGrid};
use stein_ustat::{Density, IntensitySpec, Polynomial};

const DEFAULT_REPS: usize = 10_000;
const DEFAULT_MC_SAMPLES: usize = 200_000;

#[derive(Parser, Debug)]
#[command(
    name = "stein-ustat",
    version,
    about = "Normal-approximation bounds for Poisson U-statistics, checked by simulation"
)]
struct Cli {
    /// Master seed; required by every randomized subcommand.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo replications.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Samples per M_ij partition integral.
    #[arg(long = "mc-samples", global = true)]
    mc_samples: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one Poisson configuration and print it as CSV.
    Sample(SpaceArgs),
    /// Simulate the standardized U-statistic and report empirical distances to N(0,1).
    Ustat {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        space: SpaceArgs,
        /// Bootstrap resamples for the distance standard errors.
        #[arg(long, default_value_t = 200)]
        bootstrap: usize,
    },
    /// Compute the bound report as JSON.
    Bound {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        space: SpaceArgs,
        /// Also estimate the terms of the general Kolmogorov bound.
        #[arg(long)]
        theorem1: bool,
        /// Also estimate R_ij (k <= 2 only).
        #[arg(long)]
        rij: bool,
        /// Points z per replication for inner integrals.
        #[arg(long = "z-samples", default_value_t = 64)]
        z_samples: usize,
        /// Exit with status 3 if any M_ij is flagged unreliable.
        #[arg(long)]
        strict: bool,
    },
    /// Count and list the partitions indexing M_ij.
    Partitions {
        i: usize,
        j: usize,
        /// Print only the count line.
        #[arg(long = "count-only")]
        count_only: bool,
    },
    /// Check the bounds satisfied by the Stein solution on a grid.
    SteinCheck {
        #[arg(long = "w-min", default_value_t = -8.0, allow_hyphen_values = true)]
        w_min: f64,
        #[arg(long = "w-max", default_value_t = 8.0, allow_hyphen_values = true)]
        w_max: f64,
        #[arg(long = "w-step", default_value_t = 0.01)]
        w_step: f64,
        /// Test points s, comma separated.
        #[arg(long = "s", value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-2.0, 0.0, 1.0])]
        s: Vec<f64>,
    },
    /// Exact Kolmogorov distance of the standardized Poisson law for t = 1, 2, 4, ..., tmax.
    BerryEsseen {
        #[arg(long, default_value_t = 1024.0)]
        tmax: f64,
    },
    /// Run an intensity sweep described by a JSON file; prints CSV.
    Experiment {
        config: PathBuf,
        /// Exit with status 3 if any M_ij is flagged unreliable.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Args, Debug)]
struct SpaceArgs {
    /// Intensity scale t.
    #[arg(long)]
    t: f64,
    /// Dimension of the unit cube.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Box as "lo,hi;lo,hi;..." (overrides --dim).
    #[arg(long = "box", allow_hyphen_values = true)]
    bounds: Option<String>,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[arg(long, value_enum)]
    kernel: KernelName,
    /// Radius of the geometric indicator.
    #[arg(long)]
    r: Option<f64>,
    /// Value of the constant kernel.
    #[arg(long)]
    c: Option<f64>,
    /// Order k of the constant and product kernels.
    #[arg(long)]
    order: Option<usize>,
    /// Polynomial coefficients of the product kernel, ascending degree.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coeffs: Vec<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KernelName {
    Count,
    Constant,
    #[value(name = "geometric_indicator", alias = "geometric-indicator")]
    GeometricIndicator,
    Product,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<stein_ustat::Error> for CliError {
    fn from(e: stein_ustat::Error) -> Self {
        use stein_ustat::Error as E;
        match e {
            E::Unreliable(_) | E::NonFinite(_) | E::NonPositiveVariance(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn require_seed(cli: &Cli) -> CliResult<u64> {
    cli.seed
        .ok_or_else(|| CliError::Usage("--seed <u64> is required for this subcommand".into()))
}

fn positive(what: &str, v: usize) -> CliResult<usize> {
    if v == 0 {
        Err(CliError::Usage(format!("{what} must be positive")))
    } else {
        Ok(v)
    }
}

impl KernelArgs {
    fn descriptor(&self) -> CliResult<KernelDescriptor> {
        let need = |v: Option<f64>, flag: &str| {
            v.ok_or_else(|| CliError::Usage(format!("--kernel {:?} needs {flag}", self.kernel)))
        };
        let order = || {
            self.order
                .ok_or_else(|| CliError::Usage(format!("--kernel {:?} needs --order", self.kernel)))
        };
        Ok(match self.kernel {
            KernelName::Count => KernelDescriptor::Count {},
            KernelName::Constant => KernelDescriptor::Constant {
                c: need(self.c, "--c")?,
                k: order()?,
            },
            KernelName::GeometricIndicator => KernelDescriptor::GeometricIndicator { r: need(self.r, "--r")? },
            KernelName::Product => {
                if self.coeffs.is_empty() {
                    return Err(CliError::Usage("--kernel product needs --coeffs".into()));
                }
                KernelDescriptor::Product {
                    k: order()?,
                    coeffs: Polynomial::new(self.coeffs.clone()),
                }
            }
        })
    }
}

fn parse_box(text: &str) -> CliResult<Vec<(f64, f64)>> {
    text.split(';')
        .map(|pair| {
            let parts: Vec<&str> = pair.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [lo, hi] => match (lo.parse::<f64>(), hi.parse::<f64>()) {
                    (Ok(lo), Ok(hi)) => Ok((lo, hi)),
                    _ => Err(CliError::Usage(format!("--box: cannot parse interval {pair:?}"))),
                },
                _ => Err(CliError::Usage(format!("--box: expected \"lo,hi\", got {pair:?}"))),
            }
        })
        .collect()
}

impl SpaceArgs {
    fn intensity(&self) -> CliResult<IntensitySpec> {
        if !(self.t > 0.0) {
            return Err(CliError::Usage(format!("--t must be positive, got {}", self.t)));
        }
        let bounds = match &self.bounds {
            Some(text) => parse_box(text)?,
            None => vec![(0.0, 1.0); positive("--dim", self.dim)?],
        };
        Ok(IntensitySpec::new(bounds, Density::default(), self.t)?)
    }
}

fn csv_text<R: Serialize>(rows: &[R]) -> CliResult<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

fn json_text<T: Serialize>(value: &T) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn sample(cli: &Cli, space: &SpaceArgs) -> CliResult<String> {
    let seed = require_seed(cli)?;
    let intensity = space.intensity()?;
    let eta = intensity.sample_point_process(&mut stream_rng(seed, 0))?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = (0..intensity.dim()).map(|d| format!("x{d}")).collect();
    let io = |e: csv::Error| CliError::Io(e.to_string());
    writer.write_record(&header).map_err(io)?;
    for p in eta.points() {
        writer.serialize(p).map_err(io)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Serialize)]
struct UstatOutput {
    kernel: KernelDescriptor,
    t: f64,
    reps: usize,
    mean_f: f64,
    mean_f_stderr: f64,
    var_f: f64,
    var_f_stderr: f64,
    dk_emp: f64,
    dk_emp_stderr: f64,
    dw_emp: f64,
    dw_emp_stderr: f64,
    /// `(F - EF) / √Var F` per replication.
    samples: Vec<f64>,
}

fn ustat(cli: &Cli, kernel_args: &KernelArgs, space: &SpaceArgs, bootstrap: usize) -> CliResult<String> {
    let seed = require_seed(cli)?;
    let reps = positive("--reps", cli.reps.unwrap_or(DEFAULT_REPS))?;
    let descriptor = kernel_args.descriptor()?;
    let kernel = make_kernel(&descriptor)?;
    let intensity = space.intensity()?;
    let config = BoundConfig::from_seed(seed, DEFAULT_MC_SAMPLES, None);
    let var = variance_from_kernels(&kernel, &intensity, &config.integration)?.variance;
    let fallback = McConfig {
        seed: derive_seed(seed, 6),
        ..McConfig::default()
    };
    let mean = MarginalEvaluator::new(&kernel, &intensity, fallback).partial(&[], false)?;
    let samples = standardized_samples(&kernel, &intensity, mean.value, var.value, reps, derive_seed(seed, 7))?;
    let d = empirical_distances(&samples, bootstrap, derive_seed(seed, 8))?;
    json_text(&UstatOutput {
        kernel: descriptor,
        t: space.t,
        reps,
        mean_f: mean.value,
        mean_f_stderr: mean.stderr,
        var_f: var.value,
        var_f_stderr: var.stderr,
        dk_emp: d.dk.value,
        dk_emp_stderr: d.dk.stderr,
        dw_emp: d.dw.value,
        dw_emp_stderr: d.dw.stderr,
        samples,
    })
}

struct BoundOptions {
    theorem1: bool,
    rij: bool,
    z_samples: usize,
    strict: bool,
}

fn bound(cli: &Cli, kernel_args: &KernelArgs, space: &SpaceArgs, opts: &BoundOptions) -> CliResult<String> {
    let seed = require_seed(cli)?;
    let kernel = make_kernel(&kernel_args.descriptor()?)?;
    let intensity = space.intensity()?;
    let mc_samples = positive("--mc-samples", cli.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES))?;
    let reps = positive("--reps", cli.reps.unwrap_or(DEFAULT_REPS))?;
    let mut config = BoundConfig::from_seed(seed, mc_samples, Some(reps));
    if !opts.rij {
        config.rij = None;
    }
    if !opts.theorem1 {
        config.theorem1 = None;
    }
    if let Some(tc) = config.theorem1.as_mut() {
        tc.z_samples = opts.z_samples;
    }
    let report = compute_bound_report(&kernel, &intensity, &config)?;
    if opts.strict && report.any_unreliable() {
        return Err(CliError::Numerical(
            "M_ij flagged unreliable (relative standard error above 0.5); increase --mc-samples".into(),
        ));
    }
    json_text(&report)
}

fn partitions(i: usize, j: usize, count_only: bool) -> CliResult<String> {
    let mut text = format!("count={}\n", count_partitions(i, j)?);
    if !count_only {
        let vars = variables(i, j);
        for_each_partition(i, j, |labels| {
            let blocks = (0..=labels.iter().copied().max().unwrap_or(0))
                .map(|b| vars.iter().zip(labels).filter(|(_, &l)| l == b).map(|(v, _)| *v).collect())
                .collect();
            text.push_str(&Partition { blocks }.to_string());
            text.push('\n');
        })?;
    }
    Ok(text)
}

#[derive(Serialize)]
struct BerryEsseenRow {
    t: f64,
    dk_exact: f64,
    bound: f64,
    holds: bool,
}

fn berry_esseen(tmax: f64) -> CliResult<String> {
    if !(tmax >= 1.0 && tmax.is_finite()) {
        return Err(CliError::Usage(format!("--tmax must be at least 1, got {tmax}")));
    }
    let mut rows = Vec::new();
    let mut t = 1.0;
    while t <= tmax {
        let dk = poisson_exact_dk(t)?.dk;
        let bound = 8.0 / f64::sqrt(t);
        rows.push(BerryEsseenRow {
            t,
            dk_exact: dk,
            bound,
            holds: dk <= bound,
        });
        t *= 2.0;
    }
    csv_text(&rows)
}

fn read_config(path: &Path) -> CliResult<SweepConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

fn experiment(cli: &Cli, path: &Path, strict: bool) -> CliResult<String> {
    let mut config = read_config(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(reps) = cli.reps {
        config.reps = reps;
    }
    if let Some(n) = cli.mc_samples {
        config.mc_samples = n;
    }
    config.strict |= strict;
    config.validate()?;
    csv_text(&run_sweep(&config)?)
}

fn execute(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Sample(space) => sample(cli, space),
        Command::Ustat {
            kernel,
            space,
            bootstrap,
        } => ustat(cli, kernel, space, *bootstrap),
        Command::Bound {
            kernel,
            space,
            theorem1,
            rij,
            z_samples,
            strict,
        } => bound(
            cli,
            kernel,
            space,
            &BoundOptions {
                theorem1: *theorem1,
                rij: *rij,
                z_samples: *z_samples,
                strict: *strict,
            },
        ),
        Command::Partitions { i, j, count_only } => partitions(*i, *j, *count_only),
        Command::SteinCheck { w_min, w_max, w_step, s } => {
            if !(*w_step > 0.0) || w_max < w_min {
                return Err(CliError::Usage("stein-check needs --w-step > 0 and --w-min <= --w-max".into()));
            }
            json_text(&check_stein_properties(&SteinGrid {
                w_min: *w_min,
                w_max: *w_max,
                w_step: *w_step,
                s_values: s.clone(),
            }))
        }
        Command::BerryEsseen { tmax } => berry_esseen(*tmax),
        Command::Experiment { config, strict } => experiment(cli, config, *strict),
    }
}

/// Runs the program on `args` (including the program name) and returns the
/// process exit code: 0 success, 1 I/O failure, 2 usage or configuration
/// error, 3 numerical failure.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let result = execute(&cli).and_then(|text| match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code()
        }
    }
}
