//! Command dispatch for the `adrc-lab` binary.
//!
//! [`run`] takes the argument list and output streams explicitly so the
//! commands can be driven from tests without spawning a process.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use adrc_core::simulate::{
    default_feedback, falsification_run, format_float, omega_sweep, omega_sweep_with_threads, run_closed_loop,
    FalsificationSetup, SweepRow,
};
use adrc_core::stability::{bandwidth_phi, gain_margin, table_report, PhiVector, UpperBound};
use clap::{Parser, Subcommand, ValueEnum};

pub mod scenario_file;

pub use scenario_file::{load_scenario, ScenarioFile};

/// Environment variable capping sweep worker threads.
pub const THREADS_ENV: &str = "ADRC_LAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_OUTPUT: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Output(_) => EXIT_OUTPUT,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "adrc-lab", version, about = "ADRC gain-margin laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact range of b_delta/b_bar keeping the observer loop Hurwitz.
    Margin {
        #[arg(long)]
        n: usize,
        /// Comma-separated phi_1..phi_{n+1}; defaults to the bandwidth design.
        #[arg(long)]
        phi: Option<String>,
    },
    /// Theorem and lemma gain ranges for n = 1..max_n.
    Table {
        #[arg(long, default_value_t = 5)]
        max_n: usize,
        #[arg(long, value_enum, default_value_t = TableFormat::Text)]
        format: TableFormat,
    },
    /// Run one scenario; writes the time series as CSV and prints the metrics JSON.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the metrics JSON to this file.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run a scenario at several observer bandwidths.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        omegas: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
    /// Destabilising-sinusoid experiment for a gain ratio outside the margin.
    Falsify {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        ratio: f64,
        #[arg(long = "Mg")]
        mg: f64,
        #[arg(long = "wg", default_value_t = 1.0)]
        wg: f64,
        #[arg(long = "phig", default_value_t = 0.0)]
        phig: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        omegas: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 30.0)]
        horizon: f64,
        /// Comma-separated k_1..k_n; defaults to all poles at -2.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
    /// Check scenario files against the schema and physical invariants.
    Validate {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn phi_for(n: usize, phi: Option<&str>) -> Result<PhiVector, CliError> {
    let phi = match phi {
        Some(s) => PhiVector::parse(s).map_err(input_err)?,
        None => bandwidth_phi(n).map_err(input_err)?,
    };
    if phi.order() != n {
        return Err(CliError::Input(format!(
            "phi has {} entries but n = {n} needs {}",
            phi.order() + 1,
            n + 1
        )));
    }
    Ok(phi)
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::Output(format!("cannot write output: {e}"))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))
}

fn sweep_threads() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .map(Some)
            .ok_or_else(|| CliError::Input(format!("{THREADS_ENV} must be a positive integer, got \"{v}\""))),
    }
}

fn opt_float(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), format_float)
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Margin { n, phi } => {
            let phi = phi_for(n, phi.as_deref())?;
            let interval = gain_margin(&phi);
            writeln!(out, "{interval}").map_err(stdout_err)?;
            match (&interval.upper, &interval.certificate) {
                (UpperBound::Exact(u), Some(c)) => writeln!(out, "certificate at ratio {u}: {c}"),
                (UpperBound::Bracket { unstable, .. }, Some(c)) => {
                    writeln!(out, "upper end bracketed; certificate at ratio {unstable}: {c}")
                }
                (UpperBound::Empty, Some(c)) => writeln!(out, "certificate at ratio 0: {c}"),
                (UpperBound::Unbounded { proven: true }, _) => {
                    writeln!(out, "certificate: none (stable for every ratio > -1)")
                }
                (UpperBound::Unbounded { proven: false }, _) => {
                    writeln!(
                        out,
                        "certificate: none found (every probe stable, unboundedness not proven)"
                    )
                }
                _ => Ok(()),
            }
            .map_err(stdout_err)?;
            writeln!(
                out,
                "lower end -1: constant coefficient phi_{{n+1}}(1 + ratio) vanishes"
            )
            .map_err(stdout_err)
        }
        Command::Table { max_n, format } => {
            let report = table_report(max_n).map_err(input_err)?;
            let text = match format {
                TableFormat::Text => report.to_text(),
                TableFormat::Csv => report.to_csv(),
            };
            out.write_all(text.as_bytes()).map_err(stdout_err)
        }
        Command::Simulate {
            config,
            out: csv_path,
            metrics,
        } => {
            let sc = load_scenario(&config)?;
            let mut csv = create(&csv_path)?;
            let mut metrics_file = metrics.as_deref().map(create).transpose()?;
            let result = run_closed_loop(&sc).map_err(input_err)?;
            let write_err = |e: std::io::Error| CliError::Output(format!("cannot write {}: {e}", csv_path.display()));
            result.write_csv(&mut csv).map_err(write_err)?;
            csv.flush().map_err(write_err)?;
            let json = serde_json::to_string_pretty(&result.metrics).map_err(|e| CliError::Output(e.to_string()))?;
            if let (Some(file), Some(path)) = (metrics_file.as_mut(), metrics.as_deref()) {
                let err = |e: std::io::Error| CliError::Output(format!("cannot write {}: {e}", path.display()));
                writeln!(file, "{json}").map_err(err)?;
                file.flush().map_err(err)?;
            }
            writeln!(out, "{json}").map_err(stdout_err)
        }
        Command::Sweep { config, omegas, format } => {
            let sc = load_scenario(&config)?;
            let rows = match sweep_threads()? {
                Some(t) => omega_sweep_with_threads(&sc, &omegas, t).map_err(input_err)?,
                None => omega_sweep(&sc, &omegas),
            };
            let text = match format {
                ReportFormat::Json => {
                    serde_json::to_string_pretty(&rows).map_err(|e| CliError::Output(e.to_string()))? + "\n"
                }
                ReportFormat::Text => sweep_text(&rows),
            };
            out.write_all(text.as_bytes()).map_err(stdout_err)
        }
        Command::Falsify {
            n,
            phi,
            ratio,
            mg,
            wg,
            phig,
            omegas,
            eps,
            horizon,
            k,
            format,
        } => {
            let phi = phi_for(n, phi.as_deref())?;
            let mut setup = FalsificationSetup::new(phi, ratio, mg, wg, phig, omegas, eps);
            setup.horizon = horizon;
            setup.k = k.unwrap_or_else(|| default_feedback(n));
            let report = falsification_run(&setup).map_err(input_err)?;
            let text = match format {
                ReportFormat::Json => {
                    serde_json::to_string_pretty(&report).map_err(|e| CliError::Output(e.to_string()))? + "\n"
                }
                ReportFormat::Text => {
                    let mut s = String::new();
                    for r in &report.rows {
                        s.push_str(&format!(
                            "omega_o={} sup_track={} diverged_at={}\n",
                            format_float(r.omega_o),
                            format_float(r.sup_track),
                            opt_float(r.diverged_at)
                        ));
                    }
                    s.push_str(&format!("tunability refuted: {}\n", report.tunability_refuted));
                    s
                }
            };
            out.write_all(text.as_bytes()).map_err(stdout_err)
        }
        Command::Validate { configs } => {
            for path in &configs {
                load_scenario(path)?;
                writeln!(out, "ok: {}", path.display()).map_err(stdout_err)?;
            }
            Ok(())
        }
    }
}

pub const SWEEP_HEADER: &str = "omega_o,sup_track,sup_est_post,sup_f_est_post,terminal_err,t_u,step,diverged_at,error";

/// One comma-separated line per bandwidth, in input order.
pub fn sweep_text(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for row in rows {
        match (&row.metrics, &row.error) {
            (Some(m), _) => s.push_str(&format!(
                "{},{},{},{},{},{},{},{},\n",
                format_float(row.omega_o),
                format_float(m.sup_track),
                format_float(m.sup_est_post),
                format_float(m.sup_f_est_post),
                format_float(m.terminal_err),
                format_float(m.t_u),
                format_float(m.step),
                opt_float(m.diverged_at),
            )),
            (None, e) => s.push_str(&format!(
                "{},-,-,-,-,-,-,-,\"{}\"\n",
                format_float(row.omega_o),
                e.as_deref().unwrap_or("").replace('"', "'")
            )),
        }
    }
    s
}
