//! `nsv`: run simulations, verify properties, fit decay rates, drive oracles.
//!
//! Exit codes: 0 success, 1 property or solver failure, 2 usage or config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nsv_core::coupler::{run, RunOptions};
use nsv_core::diagnostics::read_table;
use nsv_core::rates::fit_exponential;
use nsv_core::verify::{check_report, checks_csv, format_table, oracle_checks, PropertyCheck};
use nsv_core::{Error, SimConfig};

#[derive(Parser)]
#[command(
    name = "nsv",
    version,
    about = "Navier-Stokes-Vlasov particle-fluid simulator"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "NSV_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Fault {
    /// Solve the fluid step without the divergence constraint.
    DisableProjection,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: `output.dir` from the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property suite on the built-in scenarios or on one config.
    Verify {
        /// Check this config instead of the built-in scenarios.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Restrict to these built-in scenarios.
        #[arg(long = "scenario")]
        scenarios: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        fault: Option<Fault>,
        /// Skip the oracle cross-checks.
        #[arg(long)]
        no_oracle: bool,
    },
    /// Fit `y ≈ C e^{−λt}` to one column of a CSV with a `t` column.
    Fit {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long)]
        t0: f64,
        #[arg(long)]
        t1: f64,
    },
    /// Run the oracle cross-checks.
    Oracle {
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Io { .. } | Error::Format { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Check(e.to_string()),
        }
    }
}

fn load(path: &Path) -> Result<SimConfig, Failure> {
    SimConfig::from_path(path).map_err(|e| match e {
        Error::Io { .. } | Error::Format { .. } => Failure::Usage(e.to_string()),
        other => Failure::Usage(format!("{}: {other}", path.display())),
    })
}

fn report_checks(checks: &[PropertyCheck], out: Option<&PathBuf>) -> Result<(), Failure> {
    print!("{}", format_table(checks));
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
        nsv_core::io::write_atomic(&dir.join("checks.csv"), checks_csv(checks).as_bytes())?;
    }
    let failed: Vec<&PropertyCheck> = checks.iter().filter(|c| c.failed()).collect();
    if failed.is_empty() {
        println!(
            "all {} binding checks passed",
            checks.iter().filter(|c| c.binding).count()
        );
        Ok(())
    } else {
        let list = failed
            .iter()
            .map(|c| {
                format!(
                    "{}/{}: measured {:e} vs bound {:e}",
                    c.scenario, c.property, c.measured, c.bound
                )
            })
            .collect::<Vec<_>>()
            .join("\n  ");
        Err(Failure::Check(format!(
            "{} check(s) failed:\n  {list}",
            failed.len()
        )))
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            for w in cfg.warnings() {
                eprintln!("warning: {w}");
            }
            let output = run(&cfg, &dir, RunOptions::default())?;
            let b = output.summary.bootstrap;
            println!(
                "{} steps, E(T) = {:e}, bootstrap {:.4e} (within budget: {}), sigma {:.4e}",
                output.summary.steps,
                output.state.series.last().map_or(0.0, |r| r.energy),
                b.b1 + b.b2 + b.b3,
                b.within_budget,
                output.summary.theory.sigma
            );
            println!("wrote {} files to {}", output.files.len(), dir.display());
            Ok(())
        }
        Command::Verify {
            config,
            scenarios,
            out,
            fault,
            no_oracle,
        } => {
            let options = RunOptions {
                disable_projection: matches!(fault, Some(Fault::DisableProjection)),
                ..Default::default()
            };
            let runs: Vec<(String, SimConfig)> = match config {
                Some(p) => vec![("config".to_string(), load(&p)?)],
                None if scenarios.is_empty() => nsv_core::scenarios::all()?
                    .into_iter()
                    .map(|(n, c)| (n.to_string(), c))
                    .collect(),
                None => scenarios
                    .iter()
                    .map(|n| {
                        nsv_core::scenarios::reference(n)
                            .map(|c| (n.clone(), c))
                            .ok_or_else(|| {
                                Failure::Usage(format!(
                                    "unknown scenario `{n}` (known: {})",
                                    nsv_core::scenarios::names().join(", ")
                                ))
                            })
                    })
                    .collect::<Result<_, _>>()?,
            };
            let base = out.clone().unwrap_or_else(|| {
                std::env::temp_dir().join(format!("nsv-verify-{}", std::process::id()))
            });
            let mut checks = Vec::new();
            for (name, cfg) in &runs {
                for w in cfg.warnings() {
                    println!("warning [{name}]: {w}");
                }
                let dir = base.join(name);
                let output = run(cfg, &dir, options)?;
                let report = nsv_core::report::build_report(&output.state, &output.summary)?;
                checks.extend(check_report(name, cfg, &report));
            }
            if !no_oracle {
                checks.extend(oracle_checks()?);
            }
            if out.is_none() {
                let _ = std::fs::remove_dir_all(&base);
            }
            report_checks(&checks, out.as_ref())
        }
        Command::Fit {
            series,
            column,
            t0,
            t1,
        } => {
            let table = read_table(&series)?;
            let t = table
                .column("t")
                .ok_or_else(|| Failure::Usage(format!("{}: no `t` column", series.display())))?;
            let y = table.column(&column).ok_or_else(|| {
                Failure::Usage(format!(
                    "{}: unknown column `{column}` (columns: {})",
                    series.display(),
                    table.names.join(", ")
                ))
            })?;
            let fit = fit_exponential(&t, &y, (t0, t1))?;
            println!("rate {:?}", fit.rate);
            println!("prefactor {:?}", fit.prefactor);
            println!("residual {:?}", fit.residual);
            println!("samples {}", fit.samples);
            Ok(())
        }
        Command::Oracle { csv } => {
            let checks = oracle_checks()?;
            print!("{}", format_table(&checks));
            if let Some(p) = csv {
                nsv_core::io::write_atomic(&p, checks_csv(&checks).as_bytes())?;
            }
            if checks.iter().any(|c| c.failed()) {
                Err(Failure::Check("oracle cross-checks failed".into()))
            } else {
                Ok(())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Check(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
