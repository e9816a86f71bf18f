//! Batch command runner and report serialization.
//!
//! Each subcommand executes a verification suite or export and produces a
//! [`Report`]: one record per check with inputs, computed value, residual,
//! tolerance and pass flag, plus a summary. Reports serialize to JSON or
//! CSV byte-stably for a fixed (config, seed) pair; wall time is measured
//! but deliberately kept out of the serialized artifact so repeated runs
//! produce identical files. Exit codes follow the contract
//! 0 = all pass, 1 = verification failure, 2 = usage error,
//! 3 = numerical failure.

use crate::backlund::{self, BacklundError, BacklundParams, FieldSlice, ModelKind};
use crate::bessel::{BesselError, ImaginaryOrder};
use crate::entwine::{self, Chirality, Lattice, LatticePair};
use crate::liouville::{self, EnergyShell, KernelPoint, LiouvilleError};
use crate::numeric::{NumericError, Tolerance};
use crate::timemap::{self, ContourClass, TimeMapError};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use thiserror::Error;

/// 64-bit linear congruential generator with the Knuth MMIX constants
///
///   state_{n+1} = 6364136223846793005 * state_n + 1442695040888963407
///   (mod 2^64),
///
/// initial state = seed. Uniform draws on [-1, 1) take the top 53 bits:
/// u = (state >> 11) / 2^53, value = 2u - 1. Any implementation of this
/// recurrence reproduces the lattice configurations bit for bit.
#[derive(Debug, Clone)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    pub const MULTIPLIER: u64 = 6364136223846793005;
    pub const INCREMENT: u64 = 1442695040888963407;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(Self::MULTIPLIER)
            .wrapping_add(Self::INCREMENT);
        self.state
    }

    /// Uniform on [-1, 1).
    pub fn uniform_pm1(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(CliError::Usage(format!(
                "unknown output format '{other}' (expected csv or json)"
            ))),
        }
    }
}

/// Fully resolved run configuration: one command plus the global knobs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone)]
pub enum Command {
    Macdonald {
        x_grid: Vec<f64>,
        y_grid: Vec<f64>,
        mu: Vec<f64>,
        tol: f64,
    },
    Sister {
        /// (x, y, nu) triples.
        points: Vec<(f64, f64, f64)>,
        tol: f64,
    },
    Propagator {
        grid: Vec<f64>,
        tol: f64,
        cutoff_tol: f64,
    },
    Timemap {
        energy: f64,
        z_grid: Vec<f64>,
        series_tol: f64,
    },
    Contour {
        energy: f64,
        z0: Complex64,
        step: f64,
        max_steps: usize,
        level_tol: f64,
    },
    Soliton {
        model: ModelKind,
        z: f64,
        sigma: (f64, f64, usize),
        psi_left: Option<f64>,
        tol: f64,
    },
    Contract {
        w_values: Vec<f64>,
        samples: usize,
        tol: f64,
    },
    Entwine {
        models: Vec<ModelKind>,
        sites: usize,
        spacing: f64,
        configs: usize,
        grad_tol: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Macdonald { .. } => "macdonald",
            Command::Sister { .. } => "sister",
            Command::Propagator { .. } => "propagator",
            Command::Timemap { .. } => "timemap",
            Command::Contour { .. } => "contour",
            Command::Soliton { .. } => "soliton",
            Command::Contract { .. } => "contract",
            Command::Entwine { .. } => "entwine",
        }
    }
}

/// One verified statement: pass iff residual <= tolerance.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckRecord {
    pub check_id: String,
    pub inputs: BTreeMap<String, f64>,
    pub value: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    fn new(
        check_id: impl Into<String>,
        inputs: &[(&str, f64)],
        value: f64,
        residual: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            check_id: check_id.into(),
            inputs: inputs
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            value,
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub max_residual: f64,
}

/// Columnar payload for commands that export data (contours, slices,
/// refinement studies).
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub checks: Vec<CheckRecord>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
    /// Measured but never serialized: keeping it out of the artifact is
    /// what makes reports byte-stable across runs.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl Report {
    fn assemble(command: &Command, seed: u64, checks: Vec<CheckRecord>, table: Option<Table>) -> Self {
        let passed = checks.iter().filter(|c| c.pass).count();
        let max_residual = checks.iter().map(|c| c.residual).fold(0.0, f64::max);
        let summary = Summary {
            total: checks.len(),
            passed,
            failed: checks.len() - passed,
            max_residual,
        };
        Report {
            command: command.name().to_string(),
            seed,
            checks,
            summary,
            table,
            wall_time: Duration::ZERO,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.summary.failed == 0
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 2,
        }
    }
}

impl From<NumericError> for CliError {
    fn from(e: NumericError) -> Self {
        CliError::Numerical(e.to_string())
    }
}
impl From<BesselError> for CliError {
    fn from(e: BesselError) -> Self {
        CliError::Numerical(e.to_string())
    }
}
impl From<LiouvilleError> for CliError {
    fn from(e: LiouvilleError) -> Self {
        match e {
            LiouvilleError::InvalidEnergy { .. } | LiouvilleError::InvalidPacket { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}
impl From<BacklundError> for CliError {
    fn from(e: BacklundError) -> Self {
        match e {
            BacklundError::InvalidSlice { .. } => CliError::Usage(e.to_string()),
            BacklundError::Numeric(n) => CliError::Numerical(n.to_string()),
        }
    }
}
impl From<TimeMapError> for CliError {
    fn from(e: TimeMapError) -> Self {
        match e {
            TimeMapError::InvalidStep | TimeMapError::InvalidOrder { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

/// Parse `lo:hi:n` (n evenly spaced points, endpoints included) or a
/// comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |msg: &str| CliError::Usage(format!("bad grid '{spec}': {msg}"));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected lo:hi:n"));
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad("lo is not a number"))?;
        let hi: f64 = parts[1].parse().map_err(|_| bad("hi is not a number"))?;
        let n: usize = parts[2].parse().map_err(|_| bad("n is not an integer"))?;
        if n == 0 {
            return Err(bad("n must be >= 1"));
        }
        if n == 1 {
            return Ok(vec![lo]);
        }
        let h = (hi - lo) / (n - 1) as f64;
        return Ok((0..n).map(|i| lo + h * i as f64).collect());
    }
    let vals: Result<Vec<f64>, _> = spec.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|_| bad("expected comma-separated numbers"))?;
    if vals.is_empty() {
        return Err(bad("grid is empty"));
    }
    Ok(vals)
}

/// Parse a complex number as `re,im` or `re+imi` / `re-imi`.
pub fn parse_complex(spec: &str) -> Result<Complex64, CliError> {
    let bad = || CliError::Usage(format!("bad complex number '{spec}': expected re,im"));
    if let Some((re, im)) = spec.split_once(',') {
        let re: f64 = re.trim().parse().map_err(|_| bad())?;
        let im: f64 = im.trim().parse().map_err(|_| bad())?;
        return Ok(Complex64::new(re, im));
    }
    if let Some(body) = spec.strip_suffix('i') {
        // Split at the last +/- that is not a leading sign or exponent.
        let bytes = body.as_bytes();
        for i in (1..bytes.len()).rev() {
            let c = bytes[i] as char;
            if (c == '+' || c == '-') && bytes[i - 1] as char != 'e' && bytes[i - 1] as char != 'E'
            {
                let re: f64 = body[..i].parse().map_err(|_| bad())?;
                let im: f64 = body[i..].parse().map_err(|_| bad())?;
                return Ok(Complex64::new(re, im));
            }
        }
    }
    let re: f64 = spec.trim().parse().map_err(|_| bad())?;
    Ok(Complex64::new(re, 0.0))
}

fn quad_tol() -> Tolerance {
    Tolerance {
        abs_tol: 1e-12,
        rel_tol: 1e-12,
        max_refinements: 13,
    }
}

/// Execute a command and collect its report. Sweep items run concurrently;
/// records are reduced in input order, so the report content is
/// deterministic for a fixed (config, seed).
pub fn run_command(config: &RunConfig) -> Result<Report, CliError> {
    let started = Instant::now();
    let mut report = match &config.command {
        Command::Macdonald {
            x_grid,
            y_grid,
            mu,
            tol,
        } => run_macdonald(&config.command, config.seed, x_grid, y_grid, mu, *tol)?,
        Command::Sister { points, tol } => run_sister(&config.command, config.seed, points, *tol)?,
        Command::Propagator {
            grid,
            tol,
            cutoff_tol,
        } => run_propagator(&config.command, config.seed, grid, *tol, *cutoff_tol)?,
        Command::Timemap {
            energy,
            z_grid,
            series_tol,
        } => run_timemap(&config.command, config.seed, *energy, z_grid, *series_tol)?,
        Command::Contour {
            energy,
            z0,
            step,
            max_steps,
            level_tol,
        } => run_contour(
            &config.command,
            config.seed,
            *energy,
            *z0,
            *step,
            *max_steps,
            *level_tol,
        )?,
        Command::Soliton {
            model,
            z,
            sigma,
            psi_left,
            tol,
        } => run_soliton(&config.command, config.seed, *model, *z, *sigma, *psi_left, *tol)?,
        Command::Contract {
            w_values,
            samples,
            tol,
        } => run_contract(&config.command, config.seed, w_values, *samples, *tol)?,
        Command::Entwine {
            models,
            sites,
            spacing,
            configs,
            grad_tol,
        } => run_entwine(
            &config.command,
            config.seed,
            models,
            *sites,
            *spacing,
            *configs,
            *grad_tol,
        )?,
    };
    report.wall_time = started.elapsed();
    Ok(report)
}

fn run_macdonald(
    cmd: &Command,
    seed: u64,
    x_grid: &[f64],
    y_grid: &[f64],
    mu: &[f64],
    tol: f64,
) -> Result<Report, CliError> {
    if x_grid.is_empty() || y_grid.is_empty() || mu.is_empty() {
        return Err(CliError::Usage("macdonald grids must be nonempty".into()));
    }
    let mut tasks = Vec::new();
    for &x in x_grid {
        for &y in y_grid {
            for &m in mu {
                tasks.push((x, y, m));
            }
        }
    }
    let qt = quad_tol();
    let checks: Result<Vec<CheckRecord>, CliError> = tasks
        .par_iter()
        .map(|&(x, y, m)| {
            let c = liouville::verify_macdonald(x, y, ImaginaryOrder::new(m), &qt)?;
            Ok(CheckRecord::new(
                format!("macdonald/x={x}/y={y}/mu={m}"),
                &[("x", x), ("y", y), ("mu", m)],
                c.lhs,
                c.residual,
                tol,
            ))
        })
        .collect();
    Ok(Report::assemble(cmd, seed, checks?, None))
}

fn run_sister(
    cmd: &Command,
    seed: u64,
    points: &[(f64, f64, f64)],
    tol: f64,
) -> Result<Report, CliError> {
    if points.is_empty() {
        return Err(CliError::Usage("sister needs at least one (x,y,nu) point".into()));
    }
    let qt = quad_tol();
    let checks: Result<Vec<CheckRecord>, CliError> = points
        .par_iter()
        .map(|&(x, y, nu)| {
            let c = liouville::verify_sister(x, y, nu, &qt)?;
            Ok(CheckRecord::new(
                format!("sister/x={x}/y={y}/nu={nu}"),
                &[("x", x), ("y", y), ("nu", nu)],
                c.lhs,
                c.residual,
                tol,
            ))
        })
        .collect();
    Ok(Report::assemble(cmd, seed, checks?, None))
}

fn run_propagator(
    cmd: &Command,
    seed: u64,
    grid: &[f64],
    tol: f64,
    cutoff_tol: f64,
) -> Result<Report, CliError> {
    if grid.is_empty() {
        return Err(CliError::Usage("propagator grid must be nonempty".into()));
    }
    let mut tasks = Vec::new();
    for &x in grid {
        for &y in grid {
            for &z in grid {
                tasks.push(KernelPoint::new(x, y, z));
            }
        }
    }
    let qt = Tolerance {
        abs_tol: 1e-11,
        rel_tol: 1e-10,
        max_refinements: 12,
    };
    let e_max = liouville::default_energy_cutoff(1e-7);
    let checks: Result<Vec<Vec<CheckRecord>>, CliError> = tasks
        .par_iter()
        .map(|p| {
            let closed = liouville::macdonald_s(p);
            let spectral = liouville::spectral_propagator(p, e_max, &qt)?;
            let doubled = liouville::spectral_propagator(p, 2.0 * e_max, &qt)?;
            let rel = (spectral - closed).abs() / closed.abs();
            let id = format!("propagator/x={}/y={}/z={}", p.x, p.y, p.z);
            Ok(vec![
                CheckRecord::new(
                    id.clone(),
                    &[("x", p.x), ("y", p.y), ("z", p.z), ("e_max", e_max)],
                    spectral,
                    rel,
                    tol,
                ),
                CheckRecord::new(
                    format!("{id}/cutoff-doubling"),
                    &[("x", p.x), ("y", p.y), ("z", p.z), ("e_max", e_max)],
                    doubled,
                    (spectral - doubled).abs(),
                    cutoff_tol,
                ),
            ])
        })
        .collect();
    let checks = checks?.into_iter().flatten().collect();
    Ok(Report::assemble(cmd, seed, checks, None))
}

fn run_timemap(
    cmd: &Command,
    seed: u64,
    energy: f64,
    z_grid: &[f64],
    series_tol: f64,
) -> Result<Report, CliError> {
    if z_grid.is_empty() {
        return Err(CliError::Usage("timemap z-grid must be nonempty".into()));
    }
    let shell = EnergyShell::new(energy)?;
    let qt = quad_tol();
    let series = timemap::EuclideanSeries::new(shell);
    let mut checks = Vec::new();
    for &z in z_grid {
        let st = timemap::t_of_z(shell, Complex64::new(z, 0.0), None, &qt)?;
        let nu = Complex64::new(0.0, shell.mu());
        let k = crate::bessel::k_from_log_argument(nu, st.z, &qt)?;
        let reconstructed = (Complex64::new(0.0, -shell.energy()) * st.t).exp();
        let invariant = (reconstructed - k).norm() / k.norm();
        checks.push(CheckRecord::new(
            format!("timemap/invariant/z={z}"),
            &[("energy", energy), ("z", z)],
            st.t.im,
            invariant,
            1e-10,
        ));

        let t_exact = -k.norm().ln() / shell.energy();
        let errs: Result<Vec<f64>, TimeMapError> = (0..=3)
            .map(|order| Ok((series.eval(z, order)? - t_exact).abs()))
            .collect();
        let errs = errs?;
        let order3 = series.eval(z, 3)?;
        checks.push(CheckRecord::new(
            format!("timemap/series-order3/z={z}"),
            &[("energy", energy), ("z", z)],
            order3,
            errs[3] / t_exact.abs(),
            series_tol,
        ));
        let monotone_defect = errs
            .windows(2)
            .map(|p| (p[1] / p[0] - 1.0).max(0.0))
            .fold(0.0, f64::max);
        checks.push(CheckRecord::new(
            format!("timemap/series-monotone/z={z}"),
            &[("energy", energy), ("z", z)],
            errs[3],
            monotone_defect,
            0.0,
        ));
    }
    Ok(Report::assemble(cmd, seed, checks, None))
}

fn run_contour(
    cmd: &Command,
    seed: u64,
    energy: f64,
    z0: Complex64,
    step: f64,
    max_steps: usize,
    level_tol: f64,
) -> Result<Report, CliError> {
    let shell = EnergyShell::new(energy)?;
    let qt = quad_tol();
    let contour = timemap::trace_level_contour(shell, z0, step, max_steps, &qt)?;
    let halved = timemap::trace_level_contour(shell, z0, step / 2.0, max_steps * 2, &qt)?;

    let level_defect = contour
        .moduli
        .iter()
        .map(|m| (m - contour.level).abs() / contour.level)
        .fold(0.0, f64::max);
    let phase_defect = contour
        .phases
        .windows(2)
        .map(|p| (p[0] - p[1]).max(0.0))
        .fold(0.0, f64::max);
    let class = timemap::classify_contour(&contour)?;
    let class_halved = timemap::classify_contour(&halved)?;
    let stability = if class == class_halved { 0.0 } else { 1.0 };

    let checks = vec![
        CheckRecord::new(
            "contour/level-hold",
            &[("energy", energy), ("step", step)],
            contour.level,
            level_defect,
            level_tol,
        ),
        CheckRecord::new(
            "contour/phase-monotone",
            &[("energy", energy), ("step", step)],
            *contour.phases.last().unwrap() - contour.phases[0],
            phase_defect,
            0.0,
        ),
        CheckRecord::new(
            "contour/closure-refinement-stable",
            &[("energy", energy), ("step", step)],
            if class == ContourClass::Closed { 1.0 } else { 0.0 },
            stability,
            0.0,
        ),
    ];

    // Columns: Re z, Im z, |K|, arg K (principal), branch.
    let rows: Vec<Vec<f64>> = contour
        .points
        .iter()
        .zip(&contour.moduli)
        .zip(&contour.phases)
        .zip(&contour.branch_track)
        .map(|(((z, m), theta), b)| {
            let principal = theta - 2.0 * std::f64::consts::PI * *b as f64;
            vec![z.re, z.im, *m, principal, *b as f64]
        })
        .collect();
    let table = Table {
        header: ["re_z", "im_z", "abs_k", "arg_k", "branch"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows,
    };
    Ok(Report::assemble(cmd, seed, checks, Some(table)))
}

fn run_soliton(
    cmd: &Command,
    seed: u64,
    model: ModelKind,
    z: f64,
    sigma: (f64, f64, usize),
    psi_left: Option<f64>,
    tol: f64,
) -> Result<Report, CliError> {
    let (lo, hi, n) = sigma;
    let seed_slice = FieldSlice::vacuum(lo, hi, n)?;
    let psi_left = psi_left.unwrap_or(match model {
        ModelKind::SineGordon => 2.0 * ((-2.0 * z.cosh() * lo).exp()).atan(),
        ModelKind::SinhGordon => 1.0,
        ModelKind::Liouville => 0.0,
    });
    let params = BacklundParams { z, psi_left };
    let qt = Tolerance {
        abs_tol: 1e-12,
        rel_tol: 1e-12,
        max_refinements: 12,
    };
    let out = backlund::solve_backlund(model, &seed_slice, &params, &qt)?;

    let mut checks = Vec::new();
    if model == ModelKind::SineGordon && z == 0.0 && psi_left == 2.0 * ((-2.0 * lo).exp()).atan() {
        let sup = out
            .sigma
            .iter()
            .zip(&out.phi)
            .map(|(s, psi)| (psi - 2.0 * ((-2.0 * s).exp()).atan()).abs())
            .fold(0.0, f64::max);
        checks.push(CheckRecord::new(
            "soliton/kink-profile",
            &[("z", z), ("sigma_lo", lo), ("sigma_hi", hi)],
            out.phi[n / 2],
            sup,
            tol,
        ));
    }
    let max_pi = out.pi.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    if max_pi < 1e-8 {
        // Static output: the second-order field equation applies.
        let h = out.spacing();
        let eom_tol = 3.0 * h * h; // O(h^2) central differences
        checks.push(CheckRecord::new(
            "soliton/static-eom",
            &[("z", z), ("grid_h", h)],
            max_pi,
            backlund::eom_residual(model, &out),
            eom_tol,
        ));
    }

    let rows: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            vec![
                out.sigma[j],
                seed_slice.phi[j],
                seed_slice.pi[j],
                out.phi[j],
                out.pi[j],
            ]
        })
        .collect();
    let table = Table {
        header: ["sigma", "phi", "pi_phi", "psi", "pi_psi"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows,
    };
    Ok(Report::assemble(cmd, seed, checks, Some(table)))
}

fn run_contract(
    cmd: &Command,
    seed: u64,
    w_values: &[f64],
    samples: usize,
    tol: f64,
) -> Result<Report, CliError> {
    if w_values.is_empty() || samples == 0 {
        return Err(CliError::Usage(
            "contract needs w values and at least one sample".into(),
        ));
    }
    let mut rng = Lcg64::new(seed);
    let fields: Vec<(f64, f64, f64)> = (0..samples)
        .map(|_| (rng.uniform_pm1(), rng.uniform_pm1(), rng.uniform_pm1()))
        .collect();

    let mut checks = Vec::new();
    for (k, &(phi, psi, z)) in fields.iter().enumerate() {
        for &w in w_values {
            let d = backlund::contract_to_liouville(w, phi, psi, z);
            let law = 0.5 * (-phi - psi - z - 3.0 * w).exp();
            checks.push(CheckRecord::new(
                format!("contract/sample={k}/w={w}"),
                &[("phi", phi), ("psi", psi), ("z", z), ("w", w)],
                d,
                (d - law).abs() / law,
                tol,
            ));
        }
        // Decay slope: ln D(w) drops by 3 per unit w.
        let d1 = backlund::contract_to_liouville(1.0, phi, psi, z);
        let d2 = backlund::contract_to_liouville(2.0, phi, psi, z);
        checks.push(CheckRecord::new(
            format!("contract/sample={k}/decay-rate"),
            &[("phi", phi), ("psi", psi), ("z", z)],
            (d1 / d2).ln(),
            ((d1 / d2).ln() - 3.0).abs(),
            1e-9,
        ));
    }

    // Companion limits: the free-particle limit of F and the free-field
    // limit of the Liouville generator follow their own decay laws.
    let (f1, e1) = liouville::free_particle_limit(0.3, 0.8, -10.0);
    let (f2, e2) = liouville::free_particle_limit(0.3, 0.8, -11.0);
    let fp_rate = ((f1 - e1).abs() / (f2 - e2).abs()).ln();
    checks.push(CheckRecord::new(
        "contract/free-particle-limit-rate",
        &[("x", 0.3), ("big_x", 0.8)],
        (f1 - e1).abs(),
        (fp_rate - 2.0).abs(),
        1e-3,
    ));
    let g2 = entwine::free_field_limit(2.0, 0.4, -0.3);
    let g3 = entwine::free_field_limit(3.0, 0.4, -0.3);
    let ff_rate = (g2 / g3).ln();
    checks.push(CheckRecord::new(
        "contract/free-field-limit-rate",
        &[("phi", 0.4), ("varphi", -0.3)],
        g2,
        (ff_rate - 2.0).abs(),
        1e-3,
    ));
    Ok(Report::assemble(cmd, seed, checks, None))
}

fn run_entwine(
    cmd: &Command,
    seed: u64,
    models: &[ModelKind],
    sites: usize,
    spacing: f64,
    configs: usize,
    grad_tol: f64,
) -> Result<Report, CliError> {
    if models.is_empty() || configs == 0 {
        return Err(CliError::Usage("entwine needs models and configs >= 1".into()));
    }
    let lattice = Lattice::new(sites, spacing).map_err(|e| CliError::Usage(e.to_string()))?;

    // All random configurations are drawn sequentially up front so the
    // report does not depend on the parallel schedule.
    let mut rng = Lcg64::new(seed);
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..configs)
        .map(|_| {
            let phi: Vec<f64> = (0..sites).map(|_| rng.uniform_pm1()).collect();
            let psi: Vec<f64> = (0..sites).map(|_| rng.uniform_pm1()).collect();
            (phi, psi)
        })
        .collect();

    let mut checks = Vec::new();
    for &model in models {
        // Gradient oracle over the random corpus.
        let grad_defects: Vec<f64> = draws
            .par_iter()
            .map(|(phi, psi)| {
                let pair = LatticePair::new(lattice, phi.clone(), psi.clone(), 0.3)
                    .expect("lengths match by construction");
                gradient_fd_defect(model, &pair)
            })
            .collect();
        for (k, defect) in grad_defects.iter().enumerate() {
            checks.push(CheckRecord::new(
                format!("entwine/{}/gradient-oracle/config={k}", model.name()),
                &[("sites", sites as f64), ("spacing", spacing)],
                0.0,
                *defect,
                grad_tol,
            ));
        }

        // Exact zeros at constant equal fields.
        let pair = LatticePair::constant(lattice, 0.4, 0.4, 0.3)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let momentum = entwine::momentum_entwine_residual(model, &pair).norm();
        let energy = entwine::energy_entwine_max_residual(model, &pair);
        let imp_plus = entwine::improved_entwine_residual(model, &pair, Chirality::Plus).norm();
        let imp_minus = entwine::improved_entwine_residual(model, &pair, Chirality::Minus).norm();
        for (name, r) in [
            ("momentum", momentum),
            ("energy", energy),
            ("improved-plus", imp_plus),
            ("improved-minus", imp_minus),
        ] {
            checks.push(CheckRecord::new(
                format!("entwine/{}/constant-field-{name}", model.name()),
                &[("sites", sites as f64), ("spacing", spacing)],
                0.0,
                r,
                0.0,
            ));
        }

        // Refinement orders on a smooth single-mode configuration.
        let size = sites as f64 * spacing;
        let smooth = |n: usize| -> LatticePair {
            let a = size / n as f64;
            let lat = Lattice::new(n, a).expect("valid lattice");
            let phi: Vec<f64> = (0..n)
                .map(|j| 0.6 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).sin())
                .collect();
            let psi: Vec<f64> = (0..n)
                .map(|j| 0.4 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos())
                .collect();
            LatticePair::new(lat, phi, psi, 0.2).expect("lengths match")
        };
        let coarse = smooth(sites);
        let fine = smooth(sites * 2);
        let mom_order = (entwine::momentum_entwine_residual(model, &coarse).norm()
            / entwine::momentum_entwine_residual(model, &fine).norm())
        .log2();
        checks.push(CheckRecord::new(
            format!("entwine/{}/momentum-order", model.name()),
            &[("sites", sites as f64), ("spacing", spacing)],
            mom_order,
            (mom_order - 2.0).abs(),
            0.5,
        ));
        let en_order = (entwine::energy_entwine_max_residual(model, &coarse)
            / entwine::energy_entwine_max_residual(model, &fine))
        .log2();
        checks.push(CheckRecord::new(
            format!("entwine/{}/energy-order", model.name()),
            &[("sites", sites as f64), ("spacing", spacing)],
            en_order,
            (1.0 - en_order).max(0.0),
            0.0,
        ));
        for (chirality, tag) in [(Chirality::Plus, "plus"), (Chirality::Minus, "minus")] {
            let order = (entwine::improved_entwine_residual(model, &coarse, chirality).norm()
                / entwine::improved_entwine_residual(model, &fine, chirality).norm())
            .log2();
            checks.push(CheckRecord::new(
                format!("entwine/{}/improved-{tag}-order", model.name()),
                &[("sites", sites as f64), ("spacing", spacing)],
                order,
                (1.0 - order).max(0.0),
                0.0,
            ));
        }
    }

    // Refinement-study table: spacing, residual, measured order per model
    // and identity.
    let mut rows = Vec::new();
    let size = sites as f64 * spacing;
    for (mi, &model) in models.iter().enumerate() {
        let levels: Vec<(f64, f64, f64)> = [sites, sites * 2, sites * 4]
            .iter()
            .map(|&n| {
                let a = size / n as f64;
                let lat = Lattice::new(n, a).expect("valid lattice");
                let phi: Vec<f64> = (0..n)
                    .map(|j| 0.6 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).sin())
                    .collect();
                let psi: Vec<f64> = (0..n)
                    .map(|j| 0.4 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos())
                    .collect();
                let pair = LatticePair::new(lat, phi, psi, 0.2).expect("lengths match");
                (
                    a,
                    entwine::momentum_entwine_residual(model, &pair).norm(),
                    entwine::energy_entwine_max_residual(model, &pair),
                )
            })
            .collect();
        for i in 0..levels.len() {
            let (a, mom, en) = levels[i];
            let (mom_order, en_order) = if i + 1 < levels.len() {
                (
                    (mom / levels[i + 1].1).log2(),
                    (en / levels[i + 1].2).log2(),
                )
            } else {
                (f64::NAN, f64::NAN)
            };
            rows.push(vec![mi as f64, a, mom, mom_order, en, en_order]);
        }
    }
    let table = Table {
        header: [
            "model_index",
            "spacing",
            "momentum_residual",
            "momentum_order",
            "energy_residual",
            "energy_order",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        rows,
    };
    Ok(Report::assemble(cmd, seed, checks, Some(table)))
}

/// Max relative gap between closed-form gradients of the action and
/// central finite differences at h = 1e-4.
fn gradient_fd_defect(model: ModelKind, pair: &LatticePair) -> f64 {
    let h = 1e-4;
    let (dphi, dpsi) = entwine::kernel_gradients(model, pair);
    let n = pair.lattice.n_sites;
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let mut plus = pair.clone();
        plus.phi[j] += h;
        let mut minus = pair.clone();
        minus.phi[j] -= h;
        let fd = (entwine::kernel_action(model, &plus).action
            - entwine::kernel_action(model, &minus).action)
            / (2.0 * h);
        worst = worst.max((dphi[j] - fd).abs() / (1.0 + fd.abs()));
        let mut plus = pair.clone();
        plus.psi[j] += h;
        let mut minus = pair.clone();
        minus.psi[j] -= h;
        let fd = (entwine::kernel_action(model, &plus).action
            - entwine::kernel_action(model, &minus).action)
            / (2.0 * h);
        worst = worst.max((dpsi[j] - fd).abs() / (1.0 + fd.abs()));
    }
    worst
}

/// Serialize a report. JSON carries the whole structure; CSV writes the
/// table when the command produced one and the check records otherwise.
pub fn render_report(report: &Report, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        OutputFormat::Csv => match &report.table {
            Some(table) => {
                let mut s = String::new();
                let _ = writeln!(s, "{}", table.header.join(","));
                for row in &table.rows {
                    let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                    let _ = writeln!(s, "{}", line.join(","));
                }
                s
            }
            None => {
                let mut s = String::new();
                let _ = writeln!(s, "check_id,value,residual,tolerance,pass");
                for c in &report.checks {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{}",
                        c.check_id, c.value, c.residual, c.tolerance, c.pass
                    );
                }
                s
            }
        },
    }
}

/// Write a rendered report to a file, or to stdout when no path is given.
pub fn write_report(
    report: &Report,
    path: Option<&Path>,
    format: OutputFormat,
) -> Result<(), CliError> {
    let rendered = render_report(report, format);
    match path {
        Some(p) => std::fs::write(p, rendered).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(rendered.as_bytes())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}
