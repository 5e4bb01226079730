use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use steady_front::commands::{cmd_audit, cmd_oracle, cmd_riemann, cmd_simulate};
use steady_front::config::parse_config;
use steady_front::{FlowError, GasModel};

/// Front tracking for steady supersonic reacting flow past a bending wall.
#[derive(Parser)]
#[command(name = "steady-front", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a configuration and write events.csv, slices.csv, glimm.csv and report.txt.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to $STEADY_FRONT_OUT.
        #[arg(long, env = "STEADY_FRONT_OUT")]
        out: PathBuf,
    },
    /// Solve one Riemann problem; states are u v p rho Z.
    Riemann {
        #[arg(long, num_args = 5, allow_negative_numbers = true, value_name = "F")]
        below: Vec<f64>,
        #[arg(long, num_args = 5, allow_negative_numbers = true, value_name = "F")]
        above: Vec<f64>,
        /// JSON gas model.
        #[arg(long)]
        gas: PathBuf,
    },
    /// Print the exact inert background solution along x = const.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
    },
    /// Re-run the monotonicity audit on an events.csv / glimm.csv pair.
    Audit {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        glimm: PathBuf,
    },
}

fn read(p: &PathBuf) -> Result<String, FlowError> {
    std::fs::read_to_string(p).map_err(|e| FlowError::Domain(format!("{}: {e}", p.display())))
}

fn arr(v: &[f64]) -> [f64; 5] {
    [v[0], v[1], v[2], v[3], v[4]]
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res: Result<ExitCode, FlowError> = (|| match cli.cmd {
        Cmd::Simulate { config, out } => {
            let cfg = parse_config(&read(&config)?)?;
            let o = cmd_simulate(&cfg, &out)?;
            println!(
                "{} events, {} reaction lines, {} audit violations; artifacts in {}",
                o.log.diagnostics.events,
                o.log.diagnostics.reaction_lines,
                o.audit.violations.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Riemann { below, above, gas } => {
            let g: GasModel = serde_json::from_str(&read(&gas)?)?;
            if let Err((f, m)) = g.validate() {
                return Err(FlowError::Config { field: format!("gas.{f}"), msg: m });
            }
            print!("{}", cmd_riemann(arr(&below), arr(&above), &g)?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Oracle { config, x } => {
            let cfg = parse_config(&read(&config)?)?;
            print!("{}", cmd_oracle(&cfg, x)?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Audit { events, glimm } => {
            let rep = cmd_audit(&read(&events)?, &read(&glimm)?)?;
            print!("{}", rep.render());
            Ok(if rep.violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    })();
    match res {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
