//! Batch verification CLI.
//!
//! Runs one verification suite, sweep, trace or export per invocation and
//! writes a CSV or JSON report. Exit codes: 0 all checks pass,
//! 1 verification failure, 2 usage error, 3 numerical failure.
//!
//! Flags may also be given in a config file of `key=value` lines (keys are
//! the long flag names); command-line flags take precedence. The
//! CATAPLEX_THREADS environment variable caps sweep parallelism.

use cataplex::backlund::ModelKind;
use cataplex::cli::{
    self, parse_complex, parse_grid, CliError, Command, OutputFormat, RunConfig,
};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cataplex", version, about = "Numerical verification suites for Bessel-kernel identities, Liouville quantum mechanics, complex-time contours, Backlund solitons, and lattice entwining checks")]
struct Cli {
    /// Config file of key=value lines; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output format: csv or json.
    #[arg(long, global = true)]
    format: Option<String>,

    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed for randomized sweeps (64-bit LCG; see the docs).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Verify the Bessel product identity over an (x, y, mu) grid.
    Macdonald(MacdonaldArgs),
    /// Verify the unbounded-solution sister identity at (x, y, nu) points.
    Sister(SisterArgs),
    /// Compare the spectral propagator against the closed form on a grid.
    Propagator(PropagatorArgs),
    /// Check the complex-time map and its deep-Euclidean series.
    Timemap(TimemapArgs),
    /// Trace a constant-modulus contour in the complex z plane.
    Contour(ContourArgs),
    /// Generate a Backlund partner slice from the vacuum seed.
    Soliton(SolitonArgs),
    /// Check the sinh-Gordon -> Liouville contraction and companion limits.
    Contract(ContractArgs),
    /// Run the lattice entwining checks.
    Entwine(EntwineArgs),
}

#[derive(Args)]
struct MacdonaldArgs {
    /// Grid for x: lo:hi:n or comma list.
    #[arg(long = "x-grid")]
    x_grid: Option<String>,
    #[arg(long = "y-grid")]
    y_grid: Option<String>,
    /// Orders mu, comma separated.
    #[arg(long)]
    mu: Option<String>,
    /// Pass tolerance on |lhs - rhs|.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct SisterArgs {
    /// Semicolon-separated x,y,nu triples, e.g. "-1,1,0;-1,1,0.5;0,2,1".
    #[arg(long)]
    points: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct PropagatorArgs {
    /// Shared grid for x, y and z.
    #[arg(long)]
    grid: Option<String>,
    /// Pass tolerance on the relative error vs the closed form.
    #[arg(long)]
    tol: Option<f64>,
    /// Pass tolerance on the cutoff-doubling change.
    #[arg(long = "cutoff-tol")]
    cutoff_tol: Option<f64>,
}

#[derive(Args)]
struct TimemapArgs {
    #[arg(long)]
    energy: Option<f64>,
    #[arg(long = "z-grid")]
    z_grid: Option<String>,
    /// Pass tolerance on the order-3 series relative error.
    #[arg(long = "series-tol")]
    series_tol: Option<f64>,
}

#[derive(Args)]
struct ContourArgs {
    #[arg(long)]
    energy: Option<f64>,
    /// Seed point, "re,im".
    #[arg(long)]
    z0: Option<String>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long = "max-steps")]
    max_steps: Option<usize>,
    /// Pass tolerance on | |K| - level | / level.
    #[arg(long = "level-tol")]
    level_tol: Option<f64>,
}

#[derive(Args)]
struct SolitonArgs {
    /// liouville, sinh-gordon or sine-gordon.
    #[arg(long)]
    model: Option<String>,
    /// Backlund parameter.
    #[arg(long)]
    z: Option<f64>,
    /// Sigma grid lo:hi:step (step = spacing, not count).
    #[arg(long)]
    sigma: Option<String>,
    /// Integration constant psi(sigma_min); model-specific default.
    #[arg(long = "psi-left")]
    psi_left: Option<f64>,
    /// Pass tolerance on the kink profile sup-norm.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct ContractArgs {
    /// Contraction parameters w, comma separated.
    #[arg(long)]
    w: Option<String>,
    /// Number of random field samples.
    #[arg(long)]
    samples: Option<usize>,
    /// Pass tolerance on the relative deviation from the remainder law.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct EntwineArgs {
    /// all, or a comma list of model names.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    sites: Option<usize>,
    #[arg(long)]
    spacing: Option<f64>,
    /// Number of random configurations for the gradient oracle.
    #[arg(long)]
    configs: Option<usize>,
    /// Pass tolerance on the gradient-vs-finite-difference defect.
    #[arg(long = "grad-tol")]
    grad_tol: Option<f64>,
}

/// key=value config file; blank lines and #-comments ignored.
fn load_config_file(path: &PathBuf) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => {
                return Err(CliError::Usage(format!(
                    "config line {} is not key=value: '{line}'",
                    lineno + 1
                )))
            }
        }
    }
    Ok(map)
}

struct Resolver {
    file: BTreeMap<String, String>,
}

impl Resolver {
    fn string(&self, flag: Option<String>, key: &str, default: &str) -> String {
        flag.or_else(|| self.file.get(key).cloned())
            .unwrap_or_else(|| default.to_string())
    }

    fn parse<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => match self.file.get(key) {
                Some(raw) => raw.parse::<T>().map_err(|_| {
                    CliError::Usage(format!("config key '{key}' has unparsable value '{raw}'"))
                }),
                None => Ok(default),
            },
        }
    }

    fn parse_opt<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, CliError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => match self.file.get(key) {
                Some(raw) => raw
                    .parse::<T>()
                    .map(Some)
                    .map_err(|_| {
                        CliError::Usage(format!(
                            "config key '{key}' has unparsable value '{raw}'"
                        ))
                    }),
                None => Ok(None),
            },
        }
    }
}

fn parse_points(spec: &str) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let mut out = Vec::new();
    for triple in spec.split(';') {
        let parts: Vec<&str> = triple.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(format!(
                "bad point '{triple}' (expected x,y,nu)"
            )));
        }
        let vals: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
        let vals = vals
            .map_err(|_| CliError::Usage(format!("bad point '{triple}' (non-numeric entry)")))?;
        out.push((vals[0], vals[1], vals[2]));
    }
    if out.is_empty() {
        return Err(CliError::Usage("no points given".into()));
    }
    Ok(out)
}

fn parse_models(spec: &str) -> Result<Vec<ModelKind>, CliError> {
    if spec.eq_ignore_ascii_case("all") {
        return Ok(ModelKind::ALL.to_vec());
    }
    spec.split(',')
        .map(|name| {
            ModelKind::parse(name.trim())
                .ok_or_else(|| CliError::Usage(format!("unknown model '{name}'")))
        })
        .collect()
}

/// Sigma grid lo:hi:step, step being the grid spacing.
fn parse_sigma(spec: &str) -> Result<(f64, f64, usize), CliError> {
    let bad = |msg: &str| CliError::Usage(format!("bad sigma spec '{spec}': {msg}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected lo:hi:step"));
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad("lo"))?;
    let hi: f64 = parts[1].parse().map_err(|_| bad("hi"))?;
    let step: f64 = parts[2].parse().map_err(|_| bad("step"))?;
    if !(hi > lo) || !(step > 0.0) {
        return Err(bad("need hi > lo and step > 0"));
    }
    let n = ((hi - lo) / step).round() as usize + 1;
    if n < 2 {
        return Err(bad("grid has fewer than 2 points"));
    }
    Ok((lo, hi, n))
}

fn build_config(cli: Cli) -> Result<RunConfig, CliError> {
    let file = match &cli.config {
        Some(path) => load_config_file(path)?,
        None => BTreeMap::new(),
    };
    let r = Resolver { file };

    let format = OutputFormat::parse(&r.string(cli.format, "format", "json"))?;
    let seed = r.parse(cli.seed, "seed", 42u64)?;
    let out = match cli.out {
        Some(p) => Some(p),
        None => r.file.get("out").map(PathBuf::from),
    };

    let command = match cli.command {
        Commands::Macdonald(a) => Command::Macdonald {
            x_grid: parse_grid(&r.string(a.x_grid, "x-grid", "-2:1:4"))?,
            y_grid: parse_grid(&r.string(a.y_grid, "y-grid", "-2:1:4"))?,
            mu: parse_grid(&r.string(a.mu, "mu", "0.5,1,2"))?,
            tol: r.parse(a.tol, "tol", 1e-8)?,
        },
        Commands::Sister(a) => Command::Sister {
            points: parse_points(&r.string(a.points, "points", "-1,1,0;-1,1,0.5;0,2,1"))?,
            tol: r.parse(a.tol, "tol", 1e-5)?,
        },
        Commands::Propagator(a) => Command::Propagator {
            grid: parse_grid(&r.string(a.grid, "grid", "-1:1:3"))?,
            tol: r.parse(a.tol, "tol", 1e-4)?,
            cutoff_tol: r.parse(a.cutoff_tol, "cutoff-tol", 1e-5)?,
        },
        Commands::Timemap(a) => Command::Timemap {
            energy: r.parse(a.energy, "energy", 1.0)?,
            z_grid: parse_grid(&r.string(a.z_grid, "z-grid", "2:5:4"))?,
            series_tol: r.parse(a.series_tol, "series-tol", 1e-3)?,
        },
        Commands::Contour(a) => Command::Contour {
            energy: r.parse(a.energy, "energy", 1.0)?,
            z0: parse_complex(&r.string(a.z0, "z0", "0.5,0.4"))?,
            step: r.parse(a.step, "step", 0.05)?,
            max_steps: r.parse(a.max_steps, "max-steps", 400usize)?,
            level_tol: r.parse(a.level_tol, "level-tol", 1e-8)?,
        },
        Commands::Soliton(a) => Command::Soliton {
            model: ModelKind::parse(&r.string(a.model, "model", "sine-gordon"))
                .ok_or_else(|| CliError::Usage("unknown model".into()))?,
            z: r.parse(a.z, "z", 0.0)?,
            sigma: parse_sigma(&r.string(a.sigma, "sigma", "-5:5:0.001"))?,
            psi_left: r.parse_opt(a.psi_left, "psi-left")?,
            tol: r.parse(a.tol, "tol", 1e-8)?,
        },
        Commands::Contract(a) => Command::Contract {
            w_values: parse_grid(&r.string(a.w, "w", "0,1,3,5"))?,
            samples: r.parse(a.samples, "samples", 8usize)?,
            tol: r.parse(a.tol, "tol", 1e-10)?,
        },
        Commands::Entwine(a) => Command::Entwine {
            models: parse_models(&r.string(a.model, "model", "all"))?,
            sites: r.parse(a.sites, "sites", 32usize)?,
            spacing: r.parse(a.spacing, "spacing", 0.25)?,
            configs: r.parse(a.configs, "configs", 100usize)?,
            grad_tol: r.parse(a.grad_tol, "grad-tol", 1e-6)?,
        },
    };

    Ok(RunConfig {
        command,
        seed,
        out,
        format,
    })
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("CATAPLEX_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }

    let cli = Cli::parse();
    let config = match build_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };

    match cli::run_command(&config) {
        Ok(report) => {
            if let Err(e) = cli::write_report(&report, config.out.as_deref(), config.format) {
                eprintln!("{e}");
                return ExitCode::from(e.exit_code() as u8);
            }
            eprintln!(
                "{}: {} checks, {} passed, {} failed, max residual {:.3e}, wall time {:.2?}",
                report.command,
                report.summary.total,
                report.summary.passed,
                report.summary.failed,
                report.summary.max_residual,
                report.wall_time
            );
            if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
