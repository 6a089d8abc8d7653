//! Configuration and command runners behind the `floquet-msf` binary.
//!
//! Every command resolves a flat JSON config (defaults <- config file <-
//! command-line flags), echoes the effective config into the output
//! directory, and writes deterministic CSV/JSON/PPM artifacts; rerunning
//! with the same config and seed reproduces the outputs byte for byte.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::floquet::{self, StabilityParameter};
use crate::models::{self, LVParams};
use crate::msf::{self, GridSpec};
use crate::netsim;
use crate::ode::IntegratorConfig;
use crate::orbit::{self, OrbitError, PeriodicOrbit};
use crate::spectral::{self, CouplingMatrix};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("no limit cycle at these parameters (fixed-point attractor)")]
    NoCycle,
    #[error("heteroclinic regime: returns grow without bound")]
    Heteroclinic,
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::NoCycle => 2,
            CliError::Heteroclinic => 3,
            CliError::Data(_) => 4,
            CliError::Numeric(_) => 5,
        }
    }
}

impl From<OrbitError> for CliError {
    fn from(e: OrbitError) -> Self {
        match e {
            OrbitError::NoCycle => CliError::NoCycle,
            OrbitError::HeteroclinicSuspect { .. } => CliError::Heteroclinic,
            OrbitError::Io(io) => CliError::Data(io.to_string()),
            OrbitError::Format(msg) => CliError::Data(msg),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<floquet::FloquetError> for CliError {
    fn from(e: floquet::FloquetError) -> Self {
        match e {
            floquet::FloquetError::Orbit(o) => o.into(),
            floquet::FloquetError::InvalidInput(msg) => CliError::Usage(msg),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<spectral::SpectralError> for CliError {
    fn from(e: spectral::SpectralError) -> Self {
        match e {
            spectral::SpectralError::Io(io) => CliError::Data(io.to_string()),
            spectral::SpectralError::Invalid(msg) => CliError::Data(msg),
            spectral::SpectralError::RowSumViolation { .. } => CliError::Data(e.to_string()),
            spectral::SpectralError::Floquet(f) => f.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<msf::MsfError> for CliError {
    fn from(e: msf::MsfError) -> Self {
        match e {
            msf::MsfError::InvalidInput(msg) => CliError::Usage(msg),
            msf::MsfError::Floquet(f) => f.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<netsim::NetsimError> for CliError {
    fn from(e: netsim::NetsimError) -> Self {
        match e {
            netsim::NetsimError::Orbit(o) => o.into(),
            netsim::NetsimError::Invalid(msg) => CliError::Usage(msg),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<models::ModelError> for CliError {
    fn from(e: models::ModelError) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Flat run configuration. Every command consumes the subset it needs;
/// flags override file values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub r: [f64; 3],
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub transient: Option<f64>,
    pub seed_state: Option<[f64; 3]>,
    pub orbit_file: Option<String>,
    /// Diffusivities for wavenumber analyses.
    pub d: [f64; 3],
    /// Per-species ratios (1, D_v/D_u, D_w/D_u) for complex-parameter maps.
    pub d_ratios: [f64; 3],
    /// Coupling strengths (D_u, D_v, D_w) for network runs.
    pub coupling: [f64; 3],
    pub matrix: Option<String>,
    pub matrix_format: MatrixFormat,
    pub complete_diagonal: bool,
    pub k2_max: f64,
    pub k2_points: usize,
    pub dump_mode_at: Option<f64>,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub polar: bool,
    pub r_max: f64,
    pub grid_res: usize,
    pub re_range: [f64; 2],
    pub im_range: [f64; 2],
    pub theta: Option<String>,
    pub ray_resolution: usize,
    pub d_sweep: Option<String>,
    /// Compute per-eigenvalue Floquet verdicts in `spectral` (implied by
    /// --coupling or --d-sweep).
    pub verdict: bool,
    pub margin: f64,
    pub t_end_periods: f64,
    pub perturbation: f64,
    pub seed: u64,
    pub stride: usize,
    /// Optional explicit per-node initial states for network runs.
    pub initial: Option<Vec<[f64; 3]>>,
    pub out_dir: String,
    pub workers: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFormat {
    Dense,
    Edges,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 2.3427,
            gamma: 0.5,
            r: [1.0, 1.0, 1.0],
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            transient: None,
            seed_state: None,
            orbit_file: None,
            d: [1.0, 0.0, 0.0],
            d_ratios: [1.0, 0.0, 0.0],
            coupling: [0.15, 0.0, 0.0],
            matrix: None,
            matrix_format: MatrixFormat::Dense,
            complete_diagonal: false,
            k2_max: 1.2,
            k2_points: 240,
            dump_mode_at: None,
            alpha_min: 2.30,
            alpha_max: 2.37,
            polar: true,
            r_max: 1.5,
            grid_res: 300,
            re_range: [-1.5, 0.02],
            im_range: [-1.2, 1.2],
            theta: None,
            ray_resolution: 400,
            d_sweep: None,
            verdict: false,
            margin: floquet::INSTABILITY_MARGIN,
            t_end_periods: 200.0,
            perturbation: 1e-3,
            seed: 42,
            stride: 16,
            initial: None,
            out_dir: "out".into(),
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn params(&self) -> LVParams {
        LVParams {
            alpha: self.alpha,
            gamma: self.gamma,
            r: self.r,
        }
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig::with_tols(self.rel_tol, self.abs_tol)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("config {path:?}: {e}")))?;
        serde_json::from_str(&body).map_err(|e| CliError::Data(format!("config {path:?}: {e}")))
    }

    fn validate(&self) -> Result<(), CliError> {
        self.params().validate()?;
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(CliError::Usage("tolerances must be positive".into()));
        }
        if let Some(path) = &self.orbit_file {
            if !Path::new(path).exists() {
                return Err(CliError::Data(format!("orbit file not found: {path}")));
            }
        }
        if let Some(path) = &self.matrix {
            if !path.starts_with("builtin:") && !Path::new(path).exists() {
                return Err(CliError::Data(format!("matrix file not found: {path}")));
            }
        }
        Ok(())
    }
}

/// Parse a decimal literal with an optional `pi` multiple and divisor:
/// "0.25", "0.4625pi", "pi/4", "37pi/80".
pub fn parse_angle(text: &str) -> Result<f64, CliError> {
    let s = text.trim();
    let bad = || CliError::Usage(format!("cannot parse angle {text:?}"));
    if let Some(idx) = s.find("pi") {
        let (coef_str, rest) = (&s[..idx], &s[idx + 2..]);
        let coef = if coef_str.is_empty() {
            1.0
        } else {
            coef_str.parse::<f64>().map_err(|_| bad())?
        };
        let div = if rest.is_empty() {
            1.0
        } else if let Some(d) = rest.strip_prefix('/') {
            d.parse::<f64>().map_err(|_| bad())?
        } else {
            return Err(bad());
        };
        if div == 0.0 {
            return Err(bad());
        }
        Ok(coef * std::f64::consts::PI / div)
    } else {
        s.parse::<f64>().map_err(|_| bad())
    }
}

fn triple(v: &[f64], what: &str) -> Result<[f64; 3], CliError> {
    if v.len() != 3 {
        return Err(CliError::Usage(format!(
            "{what} needs exactly three comma-separated values"
        )));
    }
    Ok([v[0], v[1], v[2]])
}

#[derive(Parser, Debug)]
#[command(
    name = "floquet-msf",
    version,
    about = "Floquet stability of synchronized oscillations in coupled cyclic Lotka-Volterra networks",
    disable_help_subcommand = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat JSON config file; flags override file values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<String>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    /// Worker threads for grid parallelism (0 = logical CPU count, also
    /// settable via FLOQUET_WORKERS).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Instability margin on the leading-multiplier modulus.
    #[arg(long, global = true)]
    pub margin: Option<f64>,
    /// Reuse a previously exported orbit instead of recomputing it.
    #[arg(long, global = true)]
    pub orbit_file: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Locate the limit cycle; export it and a summary (period, closure,
    /// region verdict).
    Orbit {
        /// Transient time before period measurement (default: 50 periods).
        #[arg(long)]
        transient: Option<f64>,
    },
    /// Multiplier branches versus squared wavenumber for diffusive
    /// coupling.
    RdCurve {
        #[arg(long)]
        k2_max: Option<f64>,
        #[arg(long)]
        k2_points: Option<usize>,
        /// Diffusivities d_u,d_v,d_w.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        d: Option<Vec<f64>>,
        /// Also dump the leading eigenmode time series at this squared
        /// wavenumber (two periods).
        #[arg(long)]
        dump_mode_at: Option<f64>,
    },
    /// Bisect the critical onset (alpha*, k*) of the finite-wavenumber
    /// instability.
    CriticalAlpha {
        #[arg(long)]
        alpha_min: Option<f64>,
        #[arg(long)]
        alpha_max: Option<f64>,
        #[arg(long, value_delimiter = ',', num_args = 3)]
        d: Option<Vec<f64>>,
    },
    /// Master stability function over the complex parameter plane
    /// (CSV and PPM raster).
    Msf {
        /// Use a cartesian (Re, Im) grid instead of the default polar one.
        #[arg(long)]
        cartesian: bool,
        #[arg(long)]
        r_max: Option<f64>,
        /// Grid resolution per axis.
        #[arg(long)]
        res: Option<usize>,
        /// Per-species ratios 1,Dv/Du,Dw/Du.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        d_ratios: Option<Vec<f64>>,
    },
    /// Instability intervals in R along the ray Omega = -R exp(i theta).
    Rays {
        /// Ray angle; accepts pi literals like 0.4625pi or 37pi/80.
        #[arg(long)]
        theta: Option<String>,
        #[arg(long)]
        r_max: Option<f64>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, value_delimiter = ',', num_args = 3)]
        d_ratios: Option<Vec<f64>>,
    },
    /// Small-parameter expansion coefficients of the leading multiplier.
    Expansion {
        #[arg(long, value_delimiter = ',', num_args = 3)]
        d_ratios: Option<Vec<f64>>,
    },
    /// Structural and spectral analysis of a coupling matrix, with
    /// optional per-eigenvalue Floquet verdicts and a coupling sweep.
    Spectral {
        /// Matrix source: a CSV path, an edge-list path, or
        /// builtin:<two-node|ring|complete|directed-cycle>:<m>[:<weight>].
        #[arg(long)]
        matrix: Option<String>,
        /// Treat the matrix file as an edge list (src,dst,weight).
        #[arg(long)]
        edges: bool,
        /// Complete diagonal entries of an edge list so rows sum to zero.
        #[arg(long)]
        complete_diagonal: bool,
        /// Coupling strengths D_u,D_v,D_w for the per-eigenvalue verdicts.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        coupling: Option<Vec<f64>>,
        /// Sweep D_u over lo:hi:n and report the leading modulus per value.
        #[arg(long)]
        d_sweep: Option<String>,
    },
    /// Direct nonlinear network simulation with synchronization
    /// diagnostics.
    Netsim {
        #[arg(long)]
        matrix: Option<String>,
        #[arg(long)]
        edges: bool,
        #[arg(long)]
        complete_diagonal: bool,
        #[arg(long, value_delimiter = ',', num_args = 3)]
        coupling: Option<Vec<f64>>,
        /// Simulation length in base periods.
        #[arg(long)]
        t_end_periods: Option<f64>,
        /// Per-node perturbation amplitude applied to the synchronized
        /// state when no explicit initial state is configured.
        #[arg(long)]
        perturbation: Option<f64>,
        /// Row decimation for the trajectory CSV.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Run every documented reproduction recipe into the output directory.
    Reproduce {
        /// Stability-map resolution per axis (default 120).
        #[arg(long)]
        res: Option<usize>,
    },
}

/// Resolve the effective config for a parsed command line.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &cli.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = cli.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = cli.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = cli.rel_tol {
        cfg.rel_tol = v;
    }
    if let Some(v) = cli.abs_tol {
        cfg.abs_tol = v;
    }
    if let Some(v) = cli.workers {
        cfg.workers = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if let Some(v) = cli.margin {
        cfg.margin = v;
    }
    if let Some(v) = &cli.orbit_file {
        cfg.orbit_file = Some(v.clone());
    }

    match &cli.command {
        Command::Orbit { transient } => {
            if let Some(v) = transient {
                cfg.transient = Some(*v);
            }
        }
        Command::RdCurve {
            k2_max,
            k2_points,
            d,
            dump_mode_at,
        } => {
            if let Some(v) = k2_max {
                cfg.k2_max = *v;
            }
            if let Some(v) = k2_points {
                cfg.k2_points = *v;
            }
            if let Some(v) = d {
                cfg.d = triple(v, "--d")?;
            }
            if let Some(v) = dump_mode_at {
                cfg.dump_mode_at = Some(*v);
            }
        }
        Command::CriticalAlpha {
            alpha_min,
            alpha_max,
            d,
        } => {
            if let Some(v) = alpha_min {
                cfg.alpha_min = *v;
            }
            if let Some(v) = alpha_max {
                cfg.alpha_max = *v;
            }
            if let Some(v) = d {
                cfg.d = triple(v, "--d")?;
            }
        }
        Command::Msf {
            cartesian,
            r_max,
            res,
            d_ratios,
        } => {
            if *cartesian {
                cfg.polar = false;
            }
            if let Some(v) = r_max {
                cfg.r_max = *v;
            }
            if let Some(v) = res {
                cfg.grid_res = *v;
            }
            if let Some(v) = d_ratios {
                cfg.d_ratios = triple(v, "--d-ratios")?;
            }
        }
        Command::Rays {
            theta,
            r_max,
            resolution,
            d_ratios,
        } => {
            if let Some(v) = theta {
                cfg.theta = Some(v.clone());
            }
            if let Some(v) = r_max {
                cfg.r_max = *v;
            }
            if let Some(v) = resolution {
                cfg.ray_resolution = *v;
            }
            if let Some(v) = d_ratios {
                cfg.d_ratios = triple(v, "--d-ratios")?;
            }
        }
        Command::Expansion { d_ratios } => {
            if let Some(v) = d_ratios {
                cfg.d_ratios = triple(v, "--d-ratios")?;
            }
        }
        Command::Spectral {
            matrix,
            edges,
            complete_diagonal,
            coupling,
            d_sweep,
        } => {
            if let Some(v) = matrix {
                cfg.matrix = Some(v.clone());
            }
            if *edges {
                cfg.matrix_format = MatrixFormat::Edges;
            }
            if *complete_diagonal {
                cfg.complete_diagonal = true;
            }
            if let Some(v) = coupling {
                cfg.coupling = triple(v, "--coupling")?;
                cfg.verdict = true;
            }
            if let Some(v) = d_sweep {
                cfg.d_sweep = Some(v.clone());
                cfg.verdict = true;
            }
        }
        Command::Netsim {
            matrix,
            edges,
            complete_diagonal,
            coupling,
            t_end_periods,
            perturbation,
            stride,
        } => {
            if let Some(v) = matrix {
                cfg.matrix = Some(v.clone());
            }
            if *edges {
                cfg.matrix_format = MatrixFormat::Edges;
            }
            if *complete_diagonal {
                cfg.complete_diagonal = true;
            }
            if let Some(v) = coupling {
                cfg.coupling = triple(v, "--coupling")?;
            }
            if let Some(v) = t_end_periods {
                cfg.t_end_periods = *v;
            }
            if let Some(v) = perturbation {
                cfg.perturbation = *v;
            }
            if let Some(v) = stride {
                cfg.stride = *v;
            }
        }
        Command::Reproduce { res } => {
            if let Some(v) = res {
                cfg.grid_res = *v;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&dir)?;
    let echo = serde_json::to_string_pretty(cfg)
        .map_err(|e| CliError::Numeric(format!("config echo: {e}")))?;
    std::fs::write(dir.join("effective_config.json"), echo + "\n")?;
    Ok(dir)
}

fn load_or_find_orbit(cfg: &RunConfig) -> Result<PeriodicOrbit, CliError> {
    match &cfg.orbit_file {
        Some(path) => Ok(PeriodicOrbit::read_from_path(path)?),
        None => Ok(orbit::find_orbit(
            &cfg.params(),
            cfg.seed_state,
            cfg.transient,
            &cfg.integrator(),
        )?),
    }
}

fn coupling_matrix(cfg: &RunConfig) -> Result<CouplingMatrix, CliError> {
    let spec = cfg
        .matrix
        .as_deref()
        .ok_or_else(|| CliError::Usage("a coupling matrix is required (--matrix)".into()))?;
    if let Some(rest) = spec.strip_prefix("builtin:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let family = parts[0];
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| CliError::Usage(format!("bad node count in {spec:?}")))
        };
        let parse_w = |s: Option<&&str>| -> Result<f64, CliError> {
            s.map_or(Ok(1.0), |v| {
                v.parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad weight in {spec:?}")))
            })
        };
        return match family {
            "two-node" => Ok(CouplingMatrix::two_node(parse_w(parts.get(1))?)),
            "ring" => Ok(CouplingMatrix::ring(
                parse_usize(parts.get(1).ok_or_else(|| {
                    CliError::Usage("builtin:ring needs a node count".into())
                })?)?,
                parse_w(parts.get(2))?,
            )),
            "complete" => Ok(CouplingMatrix::complete_graph(
                parse_usize(parts.get(1).ok_or_else(|| {
                    CliError::Usage("builtin:complete needs a node count".into())
                })?)?,
                parse_w(parts.get(2))?,
            )),
            "directed-cycle" => Ok(CouplingMatrix::directed_cycle(
                parse_usize(parts.get(1).ok_or_else(|| {
                    CliError::Usage("builtin:directed-cycle needs a node count".into())
                })?)?,
                parse_w(parts.get(2))?,
            )),
            other => Err(CliError::Usage(format!("unknown builtin family {other:?}"))),
        };
    }
    match cfg.matrix_format {
        MatrixFormat::Dense => Ok(CouplingMatrix::from_csv_path(spec)?),
        MatrixFormat::Edges => Ok(CouplingMatrix::from_edge_list_path(
            spec,
            cfg.complete_diagonal,
        )?),
    }
}

fn write_file(dir: &Path, name: &str, body: &[u8]) -> Result<(), CliError> {
    std::fs::write(dir.join(name), body)?;
    Ok(())
}

fn orbit_summary(orbit: &PeriodicOrbit, cfg: &RunConfig) -> serde_json::Value {
    let region = models::classify_region(&cfg.params())
        .map(|v| v.region.to_string())
        .unwrap_or_else(|_| "outside admissible conditions".into());
    serde_json::json!({
        "alpha": cfg.alpha,
        "gamma": cfg.gamma,
        "period": orbit.period(),
        "closure_error": orbit.closure_error(),
        "anchor_level": orbit.anchor().level,
        "region": region,
        "amplitude": orbit.amplitude(),
    })
}

pub fn cmd_orbit(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = prepare_out_dir(cfg)?;
    let orbit = orbit::find_orbit(
        &cfg.params(),
        cfg.seed_state,
        cfg.transient,
        &cfg.integrator(),
    )?;
    orbit.write_to_path(dir.join("orbit.csv"))?;
    let summary = orbit_summary(&orbit, cfg);
    write_file(
        &dir,
        "orbit_summary.json",
        format!("{:#}\n", summary).as_bytes(),
    )?;
    println!(
        "orbit: T = {:.6}, closure = {:.3e}, region = {}",
        orbit.period(),
        orbit.closure_error(),
        summary["region"].as_str().unwrap_or("?")
    );
    Ok(())
}

pub fn cmd_rd_curve(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = prepare_out_dir(cfg)?;
    let orbit = load_or_find_orbit(cfg)?;
    let grid = floquet::k2_grid(cfg.k2_max, cfg.k2_points.max(2));
    let curve = floquet::dispersion_curve(&orbit, cfg.d, &grid, &cfg.integrator())?;
    let mut body = Vec::new();
    floquet::write_dispersion_csv(&curve, &mut body)?;
    write_file(&dir, "rd_curve.csv", &body)?;
    let max = curve.max_leading_modulus_excluding_origin();
    println!(
        "rd-curve: {} points, max |mu| (k2 > 0) = {max:.6}",
        curve.points.len()
    );

    if let Some(k2) = cfg.dump_mode_at {
        let param = StabilityParameter::from_wavenumber(cfg.d, k2);
        let m = floquet::monodromy(&orbit, &param, &cfg.integrator())?;
        let spectrum = floquet::floquet_spectrum(&orbit, &param, &cfg.integrator())?;
        let mu = spectrum.multipliers[0];
        let v0 = floquet::eigenvector_3x3(&m, mu);
        let dt = orbit.period() / 512.0;
        let (times, series) =
            floquet::mode_series(&orbit, &param, v0, 2.0, dt, &cfg.integrator())?;
        let mut out = String::from("t,re_u,im_u,re_v,im_v,re_w,im_w,base_u,base_v,base_w\n");
        for (t, value) in times.iter().zip(&series) {
            let base = orbit.eval(*t);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                t,
                value[0].re,
                value[0].im,
                value[1].re,
                value[1].im,
                value[2].re,
                value[2].im,
                base[0],
                base[1],
                base[2]
            ));
        }
        write_file(&dir, "mode.csv", out.as_bytes())?;
        println!("mode dump at k2 = {k2}: mu = {mu}");
    }
    Ok(())
}

pub fn cmd_critical_alpha(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = prepare_out_dir(cfg)?;
    let onset = floquet::critical_alpha(
        cfg.gamma,
        cfg.d,
        [cfg.alpha_min, cfg.alpha_max],
        &cfg.integrator(),
    )?;
    let report = serde_json::json!({
        "alpha_star": onset.alpha_star,
        "k_star": onset.k_star,
        "k2_star": onset.k2_star,
        "multiplier": { "re": onset.multiplier.re, "im": onset.multiplier.im },
    });
    write_file(
        &dir,
        "critical_alpha.json",
        format!("{report:#}\n").as_bytes(),
    )?;
    println!(
        "critical onset: alpha* = {:.4}, k* = {:.4}",
        onset.alpha_star, onset.k_star
    );
    Ok(())
}

pub fn cmd_msf(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = prepare_out_dir(cfg)?;
    let orbit = load_or_find_orbit(cfg)?;
    let spec = if cfg.polar {
        GridSpec::Polar {
            r_max: cfg.r_max,
            n_r: cfg.grid_res,
            n_theta: cfg.grid_res,
            theta_max: std::f64::consts::FRAC_PI_2,
        }
    } else {
        GridSpec::Cartesian {
            re: cfg.re_range,
            im: cfg.im_range,
            n_re: cfg.grid_res,
            n_im: cfg.grid_res,
        }
    };
    let grid = msf::msf_sweep(&orbit, &spec, cfg.d_ratios, &cfg.integrator(), cfg.margin)?;
    let mut csv = Vec::new();
    msf::write_msf_csv(&grid, &mut csv)?;
    write_file(&dir, "msf.csv", &csv)?;
    let mut ppm = Vec::new();
    msf::write_msf_ppm(&grid, &mut ppm)?;
    write_file(&dir, "msf.ppm", &ppm)?;
    let unstable = grid.nodes.iter().filter(|n| n.unstable).count();
    println!(
        "msf: {} nodes, {unstable} unstable, origin modulus = {:.8}",
        grid.nodes.len(),
        grid.origin_modulus
    );
    Ok(())
}

pub fn cmd_rays(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = prepare_out_dir(cfg)?;
    let orbit = load_or_find_orbit(cfg)?;
    let theta_text = cfg.theta.clone().unwrap_or_else(|| "0".into());
    let theta = parse_angle(&theta_text)?;
    let intervals = msf::ray_intervals(
        &orbit,
        theta,
        cfg.r_max,
        cfg.d_ratios,
        &cfg.integrator(),
        cfg.ray_resolution,
        cfg.margin,
    )?;
    let rows: Vec<(f64, f64, f64)> = intervals.iter().map(|(lo, hi)| (theta, *lo, *hi)).collect();
    let mut csv = Vec::new();
    msf::write_rays_csv(&rows, &mut csv)?;
    write_file(&dir, "rays.csv", &csv)?;
    println!(
        "rays: theta = {theta:.6} ({} interval{}): {:?}",
        intervals.len(),
        if intervals.len() == 1 { "" } else { "s" },
        intervals
    );
    Ok(())
}

pub fn cmd_expansion(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = prepare_out_dir(cfg)?;
    let orbit = load_or_find_orbit(cfg)?;
    // The quadratic coefficient rides on multiplier differences of order
    // 1e-5; tighten the integration unless the caller already did.
    let icfg = IntegratorConfig::with_tols(cfg.rel_tol.min(1e-11), cfg.abs_tol.min(1e-13));
    let fit = msf::expansion_fit(&orbit, cfg.d_ratios, &icfg)?;
    let report = serde_json::json!({
        "mu1_1": { "re": fit.mu1_1.re, "im": fit.mu1_1.im },
        "mu1_2": { "re": fit.mu1_2.re, "im": fit.mu1_2.im },
        "fit_residual": fit.fit_residual,
        "r_star_of_theta": fit.r_star_of_theta,
    });
    write_file(&dir, "expansion.json", format!("{report:#}\n").as_bytes())?;
    println!(
        "expansion: mu1_1 = {:.4} + {:.2e} i, mu1_2 = {:.1} + {:.2e} i",
        fit.mu1_1.re, fit.mu1_1.im, fit.mu1_2.re, fit.mu1_2.im
    );
    Ok(())
}

fn parse_sweep(text: &str) -> Result<(f64, f64, usize), CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "sweep spec must be lo:hi:n, got {text:?}"
        )));
    }
    let lo = parts[0]
        .parse::<f64>()
        .map_err(|_| CliError::Usage("bad sweep lo".into()))?;
    let hi = parts[1]
        .parse::<f64>()
        .map_err(|_| CliError::Usage("bad sweep hi".into()))?;
    let n = parts[2]
        .parse::<usize>()
        .map_err(|_| CliError::Usage("bad sweep count".into()))?;
    if !(hi > lo) || n < 2 {
        return Err(CliError::Usage("sweep needs hi > lo and n >= 2".into()));
    }
    Ok((lo, hi, n))
}

pub fn cmd_spectral(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = prepare_out_dir(cfg)?;
    let matrix = coupling_matrix(cfg)?;
    let spec = spectral::analyze(&matrix)?;
    if !spec.is_irreducible {
        eprintln!("warning: coupling graph is not strongly connected; components could be analyzed independently");
    }

    let eigen_rows: Vec<serde_json::Value> = spec
        .structure
        .iter()
        .map(|s| {
            serde_json::json!({
                "re": s.value.re,
                "im": s.value.im,
                "algebraic": s.algebraic,
                "geometric": s.geometric,
                "jordan_blocks": s.block_sizes,
            })
        })
        .collect();
    let lap = spectral::standardized_laplacian(&matrix).ok();
    let report = serde_json::json!({
        "size": matrix.size(),
        "eigenvalues": spec.eigenvalues.iter().map(|z| serde_json::json!({"re": z.re, "im": z.im})).collect::<Vec<_>>(),
        "structure": eigen_rows,
        "is_metzler": spec.is_metzler,
        "is_irreducible": spec.is_irreducible,
        "is_diagonalizable": spec.is_diagonalizable(),
        "gershgorin_radius": spec.gershgorin_radius,
        "standardized_scale": spec.standardized_scale,
        "standardized_arg_bound_holds": lap.map(|l| l.arg_bound_holds),
    });
    write_file(&dir, "spectral.json", format!("{report:#}\n").as_bytes())?;
    let eigen_list: Vec<String> = spec
        .eigenvalues
        .iter()
        .map(|z| format!("{:.6}{:+.6}i", z.re, z.im))
        .collect();
    println!("spectral: eigenvalues {{{}}}", eigen_list.join(", "));

    // Per-eigenvalue Floquet verdicts only on request.
    if cfg.verdict || cfg.d_sweep.is_some() {
        let orbit = load_or_find_orbit(cfg)?;
        let report = spectral::jordan_verdict(
            &matrix,
            &orbit,
            cfg.coupling,
            &cfg.integrator(),
            cfg.margin,
        )?;
        let mut csv = String::from("re_lambda,im_lambda,re_mu_1,im_mu_1,abs_mu_1\n");
        for node in &report.per_eigenvalue {
            let mu = node.spectrum.multipliers[0];
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                node.lambda.re,
                node.lambda.im,
                mu.re,
                mu.im,
                mu.norm()
            ));
        }
        write_file(&dir, "eigenvalue_spectra.csv", csv.as_bytes())?;
        println!("verdict at D = {:?}: {:?}", cfg.coupling, report.verdict);

        if let Some(sweep) = &cfg.d_sweep {
            let (lo, hi, n) = parse_sweep(sweep)?;
            let mut csv = String::from("d_u,max_leading_modulus,verdict\n");
            for i in 0..n {
                let d_u = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let coupling = [d_u, cfg.coupling[1], cfg.coupling[2]];
                let rep = spectral::jordan_verdict(
                    &matrix,
                    &orbit,
                    coupling,
                    &cfg.integrator(),
                    cfg.margin,
                )?;
                let max_mod = rep
                    .per_eigenvalue
                    .iter()
                    .filter(|b| b.lambda.norm() > 1e-12)
                    .map(|b| b.spectrum.leading_modulus)
                    .fold(f64::NEG_INFINITY, f64::max);
                csv.push_str(&format!(
                    "{},{},{}\n",
                    d_u,
                    max_mod,
                    if rep.verdict == spectral::JordanVerdict::Unstable {
                        "unstable"
                    } else {
                        "stable"
                    }
                ));
            }
            write_file(&dir, "d_sweep.csv", csv.as_bytes())?;
            println!("d-sweep written ({n} points)");
        }
    }
    Ok(())
}

pub fn cmd_netsim(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = prepare_out_dir(cfg)?;
    let matrix = coupling_matrix(cfg)?;
    let orbit = load_or_find_orbit(cfg)?;
    let initial = match &cfg.initial {
        Some(nodes) => {
            if nodes.len() != matrix.size() {
                return Err(CliError::Usage(format!(
                    "{} initial nodes for a {}-node matrix",
                    nodes.len(),
                    matrix.size()
                )));
            }
            netsim::NetworkState::from_nodes(nodes)
        }
        None => netsim::perturbed_initial(&orbit, matrix.size(), cfg.perturbation, cfg.seed),
    };
    let t_end = cfg.t_end_periods * orbit.period();
    let out = netsim::simulate_with_orbit(
        &matrix,
        &cfg.params(),
        cfg.coupling,
        &initial,
        t_end,
        &cfg.integrator(),
        &orbit,
    )?;
    let mut csv = Vec::new();
    netsim::write_trajectory_csv(&out, matrix.size(), cfg.stride, &mut csv)?;
    write_file(&dir, "trajectory.csv", &csv)?;
    let diag = serde_json::to_string_pretty(&out.diagnostics)
        .map_err(|e| CliError::Numeric(format!("diagnostics: {e}")))?;
    write_file(&dir, "diagnostics.json", (diag + "\n").as_bytes())?;
    println!(
        "netsim: verdict {:?}, terminal sync error {:.3e} (scale {:.3})",
        out.diagnostics.verdict, out.diagnostics.terminal_sync_error, out.diagnostics.state_scale
    );
    Ok(())
}

pub fn cmd_reproduce(cfg: &RunConfig) -> Result<(), CliError> {
    let base = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&base)?;
    let sub = |name: &str, f: &dyn Fn(&mut RunConfig)| -> RunConfig {
        let mut c = cfg.clone();
        c.out_dir = base.join(name).to_string_lossy().into_owned();
        f(&mut c);
        c
    };

    // Shared orbit file so the recipes reuse one cycle computation.
    let orbit_cfg = sub("orbit", &|_| {});
    cmd_orbit(&orbit_cfg)?;
    let orbit_path = base.join("orbit").join("orbit.csv");
    let orbit_file = Some(orbit_path.to_string_lossy().into_owned());

    let recipes: Vec<(&str, RunConfig)> = vec![
        (
            "dispersion-curve",
            sub("dispersion-curve", &|c| {
                c.orbit_file = orbit_file.clone();
                c.k2_max = 1.2;
            }),
        ),
        (
            "period-doubling-mode",
            sub("period-doubling-mode", &|c| {
                c.orbit_file = orbit_file.clone();
                c.dump_mode_at = Some(0.3844);
            }),
        ),
        (
            "two-node-pd",
            sub("two-node-pd", &|c| {
                c.orbit_file = orbit_file.clone();
                c.matrix = Some("builtin:two-node:1".into());
                c.coupling = [0.1922, 0.0, 0.0];
                c.t_end_periods = 300.0;
            }),
        ),
        (
            "two-node-sync",
            sub("two-node-sync", &|c| {
                c.orbit_file = orbit_file.clone();
                c.matrix = Some("builtin:two-node:1".into());
                c.coupling = [0.15, 0.0, 0.0];
                c.initial = Some(vec![[0.1, 0.15, 0.05], [0.3, 0.15, 0.05]]);
                c.t_end_periods = 300.0;
            }),
        ),
        (
            "real-spectrum-intervals",
            sub("real-spectrum-intervals", &|c| {
                c.orbit_file = orbit_file.clone();
                c.matrix = Some("builtin:two-node:1".into());
                c.d_sweep = Some("0.01:1.2:120".into());
                c.coupling = [0.0, 0.0, 0.0];
            }),
        ),
        (
            "quasi-periodic",
            sub("quasi-periodic", &|c| {
                c.orbit_file = orbit_file.clone();
                c.matrix = Some(format!("builtin:directed-cycle:4:{}", 1.0 / 2f64.sqrt()));
                c.coupling = [0.04, 0.0, 0.0];
                c.t_end_periods = 220.0;
            }),
        ),
        (
            "msf-rays",
            sub("msf-rays", &|c| {
                c.orbit_file = orbit_file.clone();
                c.theta = Some("33pi/80".into());
            }),
        ),
        (
            "msf-grid",
            sub("msf-grid", &|c| {
                c.orbit_file = orbit_file.clone();
                c.grid_res = c.grid_res.min(120);
            }),
        ),
        (
            "expansion",
            sub("expansion", &|c| {
                c.orbit_file = orbit_file.clone();
            }),
        ),
    ];

    for (name, rcfg) in &recipes {
        println!("== recipe: {name}");
        match *name {
            "dispersion-curve" | "period-doubling-mode" => cmd_rd_curve(rcfg)?,
            "two-node-pd" | "two-node-sync" | "quasi-periodic" => cmd_netsim(rcfg)?,
            "real-spectrum-intervals" => cmd_spectral(rcfg)?,
            "msf-rays" => {
                cmd_rays(rcfg)?;
                let mut second = rcfg.clone();
                second.out_dir = base.join("msf-rays-b").to_string_lossy().into_owned();
                second.theta = Some("37pi/80".into());
                cmd_rays(&second)?;
            }
            "msf-grid" => cmd_msf(rcfg)?,
            "expansion" => cmd_expansion(rcfg)?,
            _ => unreachable!(),
        }
    }
    // The three-node two-interval sweep from a dense matrix file.
    let matrix_path = base.join("three_node.csv");
    std::fs::write(&matrix_path, "-3,1,2\n1,-2,1\n2,1,-3\n")?;
    let mut three = cfg.clone();
    three.out_dir = base
        .join("real-spectrum-three-node")
        .to_string_lossy()
        .into_owned();
    three.orbit_file = orbit_file.clone();
    three.matrix = Some(matrix_path.to_string_lossy().into_owned());
    three.d_sweep = Some("0.01:0.35:120".into());
    three.coupling = [0.0, 0.0, 0.0];
    cmd_spectral(&three)?;
    println!("reproduce: all recipes written under {}", base.display());
    Ok(())
}

/// Dispatch a parsed command line inside the configured worker pool.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    let workers = if cfg.workers > 0 {
        cfg.workers
    } else {
        std::env::var("FLOQUET_WORKERS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .unwrap_or(0)
    };
    let dispatch = |cfg: &RunConfig| -> Result<(), CliError> {
        match &cli.command {
            Command::Orbit { .. } => cmd_orbit(cfg),
            Command::RdCurve { .. } => cmd_rd_curve(cfg),
            Command::CriticalAlpha { .. } => cmd_critical_alpha(cfg),
            Command::Msf { .. } => cmd_msf(cfg),
            Command::Rays { .. } => cmd_rays(cfg),
            Command::Expansion { .. } => cmd_expansion(cfg),
            Command::Spectral { .. } => cmd_spectral(cfg),
            Command::Netsim { .. } => cmd_netsim(cfg),
            Command::Reproduce { .. } => cmd_reproduce(cfg),
        }
    };
    if workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Numeric(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(&cfg))
    } else {
        dispatch(&cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_literals() {
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert!((parse_angle("0.4625pi").unwrap() - 0.4625 * std::f64::consts::PI).abs() < 1e-15);
        assert!(
            (parse_angle("37pi/80").unwrap() - 37.0 * std::f64::consts::PI / 80.0).abs() < 1e-15
        );
        assert!((parse_angle("pi/4").unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((parse_angle("pi").unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert!(parse_angle("x pi").is_err());
        assert!(parse_angle("pi/0").is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg.alpha, back.alpha);
        assert_eq!(cfg.grid_res, back.grid_res);
        assert_eq!(cfg.out_dir, back.out_dir);
    }

    #[test]
    fn sweep_spec_parsing() {
        assert_eq!(parse_sweep("0.1:1.2:12").unwrap(), (0.1, 1.2, 12));
        assert!(parse_sweep("1:0:5").is_err());
        assert!(parse_sweep("0:1").is_err());
    }

    #[test]
    fn builtin_matrix_specs() {
        let mut cfg = RunConfig {
            matrix: Some("builtin:two-node:0.7".into()),
            ..RunConfig::default()
        };
        assert_eq!(coupling_matrix(&cfg).unwrap().size(), 2);
        cfg.matrix = Some("builtin:directed-cycle:4:0.5".into());
        let c = coupling_matrix(&cfg).unwrap();
        assert_eq!(c.size(), 4);
        assert_eq!(c.entries()[(0, 1)], 0.5);
        cfg.matrix = Some("builtin:unknown:3".into());
        assert!(matches!(coupling_matrix(&cfg), Err(CliError::Usage(_))));
    }
}
