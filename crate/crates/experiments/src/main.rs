use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coopsense::{build_geometry, validate_flow_regime, FlowReport};
use coopsense_experiments::{build_spec, list_presets, load_config, run_experiment, to_csv, BuildError, RunOptions};

#[derive(Parser)]
#[command(
    name = "coopsense",
    version,
    about = "Detection and localization error of cooperative mobile sensors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a configuration or preset and write CSV.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// `key=v1,v2,...`; repeat for a grid.
        #[arg(long = "sweep")]
        sweeps: Vec<String>,
        /// Metric such as `P_e_D/memoryless` or `P_e_L/type-b`; repeatable.
        #[arg(long = "metric")]
        metrics: Vec<String>,
        /// analytic, mc or both.
        #[arg(long)]
        engine: Option<String>,
        /// exact, truncated:<cap> or sampled:<n>.
        #[arg(long)]
        policy: Option<String>,
        /// exact or gauss.
        #[arg(long)]
        tail: Option<String>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration file and print derived quantities.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List bundled presets.
    Presets,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            preset,
            sweeps,
            metrics,
            engine,
            policy,
            tail,
            trials,
            seed,
            out,
        } => {
            let opts = RunOptions {
                config,
                preset,
                sweeps,
                metrics,
                engine,
                policy,
                tail,
                trials,
                seed,
            };
            let spec = match build_spec(&opts) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let rows = run_experiment(&spec);
            let csv = to_csv(&spec, &rows).expect("in-memory CSV");
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, csv) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{csv}"),
            }
            for r in rows.iter().filter(|r| !r.error.is_empty()) {
                eprintln!("warning: {} {}: {}", r.engine, r.metric, r.error);
            }
            if !rows.is_empty() && rows.iter().all(|r| r.failed()) {
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load_config(&config) {
            Ok(c) => {
                let g = build_geometry(&c).expect("validated");
                println!("ok: K={} slot length={} m", g.k, g.subregion_len);
                println!("beta={} K_s={}", c.production_rate(), c.storage_slots());
                match c.validate_for_localization() {
                    Ok(()) => println!("localization: storage levels decode"),
                    Err(e) => println!("localization: unavailable ({e})"),
                }
                match validate_flow_regime(&c) {
                    FlowReport::Unchecked => println!("flow: not checked (no rho, eta, d_e, delta_x)"),
                    FlowReport::Checked {
                        reynolds,
                        laminar_ok,
                        dispersion_ratio,
                        dispersion_ok,
                    } => println!(
                        "flow: Re={reynolds} laminar={laminar_ok} dispersion ratio={dispersion_ratio} ok={dispersion_ok}"
                    ),
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}", BuildError::from(e));
                ExitCode::from(1)
            }
        },
        Command::Presets => {
            for (name, description) in list_presets() {
                println!("{name:<14} {description}");
            }
            ExitCode::SUCCESS
        }
    }
}
