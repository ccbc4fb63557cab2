//! Command-line front end: config ingestion, subcommand dispatch, CSV/report
//! emission.
//!
//! Exit codes: 0 success, 2 usage, 3 config/schema, 4 numerical failure.
//! Output files are written atomically (temp file + rename) and each
//! file-producing run drops a `<out>.manifest.json` with the resolved
//! parameter snapshot, so the run is reproducible from the manifest alone.

use crate::effective::elimination_diagnostics;
use crate::fit::{fit_params, fit_phase, FitError, FitResult, MeasuredSpectrum, Scale};
use crate::model::{ModelError, SystemParams};
use crate::scattering::{
    combined_spectrum, dip_analysis, linspace, spectrum, Port, ProbeSpec, ScatteringError,
    Spectrum,
};
use crate::sweep::{locate_ep, run_sweep, Pipeline, SweepError, SweepPlan};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Numeric(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ScatteringError> for CliError {
    fn from(e: ScatteringError) -> Self {
        match e {
            ScatteringError::Model(m) => CliError::Config(m.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Model(m) => CliError::Config(m.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Model(m) => CliError::Config(m.to_string()),
            FitError::Ingest { .. } => CliError::Config(e.to_string()),
            FitError::UnknownParameter(_) | FitError::BadBounds(_) | FitError::WrongPort(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PortArg {
    M1,
    M2,
    Cav,
    Combined,
}

impl PortArg {
    fn to_port(self) -> Port {
        match self {
            PortArg::M1 => Port::Magnon1,
            PortArg::M2 => Port::Magnon2,
            PortArg::Cav => Port::Cavity,
            PortArg::Combined => Port::Combined,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PipelineArg {
    Antipt,
    Effective,
    Full,
}

impl PipelineArg {
    fn to_pipeline(self) -> Pipeline {
        match self {
            PipelineArg::Antipt => Pipeline::AntiPt,
            PipelineArg::Effective => Pipeline::GeneralEffective,
            PipelineArg::Full => Pipeline::FullThreeMode,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "aptmag",
    version,
    about = "Dissipatively coupled magnon-cavity-magnon simulator: reflection spectra, anti-PT eigenvalue trajectories, EP location, and spectrum fitting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a reflection spectrum and write it as CSV.
    #[command(allow_negative_numbers = true)]
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = PortArg::M1)]
        port: PortArg,
        /// Grid start, MHz (default: frame center - 25).
        #[arg(long)]
        grid_min: Option<f64>,
        /// Grid end, MHz (default: frame center + 25).
        #[arg(long)]
        grid_max: Option<f64>,
        #[arg(long, default_value_t = 2001)]
        grid_points: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep the total cavity rate, writing the eigenvalue trajectory CSV and
    /// printing an EP summary.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        kappa_min: f64,
        #[arg(long)]
        kappa_max: f64,
        #[arg(long, default_value_t = 195)]
        kappa_steps: usize,
        #[arg(long, value_enum, default_value_t = PipelineArg::Antipt)]
        pipeline: PipelineArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Locate the exceptional point by bisection inside a kappa bracket.
    #[command(allow_negative_numbers = true)]
    Ep {
        #[arg(long)]
        config: PathBuf,
        /// Bracket lower edge, MHz.
        #[arg(long, default_value_t = 5.0)]
        kappa_min: f64,
        /// Bracket upper edge, MHz.
        #[arg(long, default_value_t = 50.0)]
        kappa_max: f64,
        #[arg(long, value_enum, default_value_t = PipelineArg::Antipt)]
        pipeline: PipelineArg,
    },
    /// Fit free parameters to a measured spectrum (CSV: freq_MHz,mag).
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = PortArg::M1)]
        port: PortArg,
        /// Comma-separated free parameters (default: the port's drive phase).
        #[arg(long)]
        free: Option<String>,
        /// Input magnitudes are in dB.
        #[arg(long)]
        db: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report the approximation margins behind the anti-PT description.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    timestamp: String,
    subcommand: String,
    config_path: String,
    output_path: String,
    seed: Option<u64>,
    flags: serde_json::Value,
    resolved_params: &'a SystemParams,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all().ok();
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        fs::remove_file(&tmp).ok();
        CliError::Io(e.to_string())
    })?;
    Ok(())
}

fn write_manifest(
    subcommand: &str,
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    flags: serde_json::Value,
    params: &SystemParams,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        tool: "aptmag",
        version: env!("CARGO_PKG_VERSION"),
        timestamp: chrono::Utc::now().to_rfc3339(),
        subcommand: subcommand.to_string(),
        config_path: config.display().to_string(),
        output_path: out.display().to_string(),
        seed,
        flags,
        resolved_params: params,
    };
    let path = PathBuf::from(format!("{}.manifest.json", out.display()));
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&path, text.as_bytes())
}

fn load_config(path: &Path) -> Result<SystemParams, CliError> {
    Ok(SystemParams::from_config_path(path)?)
}

fn build_grid(
    params: &SystemParams,
    grid_min: Option<f64>,
    grid_max: Option<f64>,
    grid_points: usize,
) -> Result<Vec<f64>, CliError> {
    let center = 0.5 * (params.magnon1.omega + params.magnon2.omega);
    let lo = grid_min.unwrap_or(center - 25.0);
    let hi = grid_max.unwrap_or(center + 25.0);
    if grid_points == 0 || (grid_points > 1 && hi <= lo) {
        return Err(CliError::Usage(format!(
            "empty grid: [{lo}, {hi}] with {grid_points} points"
        )));
    }
    Ok(linspace(lo, hi, grid_points))
}

fn compute_spectrum(
    params: &SystemParams,
    port: Port,
    grid: Vec<f64>,
) -> Result<Spectrum, CliError> {
    if port == Port::Combined {
        let s1 = spectrum(params, &ProbeSpec::new(Port::Magnon1, grid.clone(), 1.0)?)?;
        let s2 = spectrum(params, &ProbeSpec::new(Port::Magnon2, grid, 1.0)?)?;
        Ok(combined_spectrum(&s1, &s2)?)
    } else {
        Ok(spectrum(params, &ProbeSpec::new(port, grid, 1.0)?)?)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Spectrum {
            config,
            port,
            grid_min,
            grid_max,
            grid_points,
            out,
            seed,
        } => {
            let params = load_config(&config)?;
            let grid = build_grid(&params, grid_min, grid_max, grid_points)?;
            let spec = compute_spectrum(&params, port.to_port(), grid)?;
            let mut buf = Vec::new();
            spec.write_csv(&mut buf)?;
            write_atomic(&out, &buf)?;
            write_manifest(
                "spectrum",
                &config,
                &out,
                seed,
                serde_json::json!({
                    "port": spec.port.to_string(),
                    "grid_min": grid_min,
                    "grid_max": grid_max,
                    "grid_points": grid_points,
                }),
                &params,
            )?;
            if let Ok(report) = dip_analysis(&spec) {
                println!(
                    "wrote {} ({} points); dips at {:?}, separation {:.4} MHz, resolvable {}",
                    out.display(),
                    spec.points.len(),
                    report
                        .dips
                        .iter()
                        .map(|d| (d.frequency * 1e4).round() / 1e4)
                        .collect::<Vec<_>>(),
                    report.separation,
                    report.resolvable
                );
            } else {
                println!("wrote {} ({} points); no dips found", out.display(), spec.points.len());
            }
            Ok(())
        }
        Command::Sweep {
            config,
            kappa_min,
            kappa_max,
            kappa_steps,
            pipeline,
            out,
            seed,
        } => {
            if kappa_steps == 0 || kappa_max <= kappa_min {
                return Err(CliError::Usage(format!(
                    "empty kappa range: [{kappa_min}, {kappa_max}] with {kappa_steps} steps"
                )));
            }
            let params = load_config(&config)?;
            let values = linspace(kappa_min, kappa_max, kappa_steps);
            let plan = SweepPlan::new(params.clone(), values, pipeline.to_pipeline())?;
            let traj = run_sweep(&plan)?;
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)?;
            write_atomic(&out, &buf)?;
            write_manifest(
                "sweep",
                &config,
                &out,
                seed,
                serde_json::json!({
                    "kappa_min": kappa_min,
                    "kappa_max": kappa_max,
                    "kappa_steps": kappa_steps,
                    "pipeline": format!("{:?}", pipeline.to_pipeline()),
                }),
                &params,
            )?;
            match traj.ep_estimate {
                Some(ep) => println!(
                    "wrote {}; kappa0 = {:.4} MHz (bracket [{:.4}, {:.4}])",
                    out.display(),
                    ep.kappa0,
                    ep.bracket.0,
                    ep.bracket.1
                ),
                None => println!(
                    "wrote {}; no exceptional point inside the swept range",
                    out.display()
                ),
            }
            Ok(())
        }
        Command::Ep {
            config,
            kappa_min,
            kappa_max,
            pipeline,
        } => {
            if kappa_max <= kappa_min {
                return Err(CliError::Usage(format!(
                    "empty kappa bracket: [{kappa_min}, {kappa_max}]"
                )));
            }
            let params = load_config(&config)?;
            let kappa0 = locate_ep(
                &params,
                pipeline.to_pipeline(),
                (kappa_min, kappa_max),
                1e-4,
            )?;
            println!(
                "kappa0 = {kappa0:.4} MHz (pipeline {:?}, bracket [{kappa_min}, {kappa_max}])",
                pipeline.to_pipeline()
            );
            Ok(())
        }
        Command::Fit {
            config,
            data,
            port,
            free,
            db,
            out,
            seed,
        } => {
            let params = load_config(&config)?;
            let port = port.to_port();
            if port == Port::Combined || port == Port::Cavity {
                return Err(CliError::Usage(
                    "fit expects a magnon readout port (m1 or m2)".into(),
                ));
            }
            let file = fs::File::open(&data)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", data.display())))?;
            let scale = if db { Scale::Db } else { Scale::Linear };
            let measured =
                MeasuredSpectrum::from_csv(std::io::BufReader::new(file), port, scale)?;
            let result: FitResult = match free {
                None => fit_phase(&measured, &params)?,
                Some(ref names) => {
                    let names: Vec<&str> = names.split(',').map(|s| s.trim()).collect();
                    let bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); names.len()];
                    fit_params(&[measured], &names, &params, &bounds)?
                }
            };
            let report = serde_json::to_string_pretty(&result)
                .map_err(|e| CliError::Io(e.to_string()))?;
            write_atomic(&out, report.as_bytes())?;
            write_manifest(
                "fit",
                &config,
                &out,
                seed,
                serde_json::json!({
                    "data": data.display().to_string(),
                    "port": port.to_string(),
                    "free": free,
                    "db": db,
                }),
                &params,
            )?;
            println!(
                "wrote {}; residual {:.3e}, {} iterations, converged {}",
                out.display(),
                result.residual,
                result.iterations,
                result.converged
            );
            if !result.converged {
                return Err(CliError::Numeric(
                    "fit did not converge within the iteration limit (best point written)".into(),
                ));
            }
            Ok(())
        }
        Command::Validate { config } => {
            let params = load_config(&config)?;
            let d = elimination_diagnostics(&params).map_err(|e| CliError::Config(e.to_string()))?;
            let snapshot = serde_json::to_string_pretty(&params)
                .map_err(|e| CliError::Io(e.to_string()))?;
            let check = |ok: bool| if ok { "ok" } else { "WARN" };
            println!("resolved parameters:\n{snapshot}\n");
            println!("approximation margins:");
            println!(
                "  kappa / gamma1            = {:>10.3}  (want >> 1)  {}",
                d.kappa_over_gamma1,
                check(d.kappa_over_gamma1 >= 10.0)
            );
            println!(
                "  kappa / gamma2            = {:>10.3}  (want >> 1)  {}",
                d.kappa_over_gamma2,
                check(d.kappa_over_gamma2 >= 10.0)
            );
            println!(
                "  kappa / |omega3 - omega1| = {:>10.3}  (want >> 1)  {}",
                d.kappa_over_detuning13,
                check(d.kappa_over_detuning13 >= 10.0)
            );
            println!(
                "  kappa / |omega3 - omega2| = {:>10.3}  (want >> 1)  {}",
                d.kappa_over_detuning23,
                check(d.kappa_over_detuning23 >= 10.0)
            );
            println!(
                "  coupling asymmetry        = {:>9.1}%  (want < 5%)  {}",
                d.coupling_asymmetry_pct,
                check(d.coupling_asymmetry_pct < 5.0)
            );
            println!(
                "  damping asymmetry         = {:>9.1}%  (want < 5%)  {}",
                d.damping_asymmetry_pct,
                check(d.damping_asymmetry_pct < 5.0)
            );
            println!(
                "  anti-PT residual          = {:>10.4} MHz (exact-parameter Hamiltonian)",
                d.antipt_residual
            );
            Ok(())
        }
    }
}
