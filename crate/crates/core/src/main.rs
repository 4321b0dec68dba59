use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coherence_nulltest::brute_force_oracle::validation_suite;
use coherence_nulltest::correlator_engine::Scalar;
use coherence_nulltest::experiment_cli::{
    compare_g2, gamma0_table, load_config, parse_speed, run_experiment, Overrides, Status,
};
use coherence_nulltest::physical_params::DetectorSpec;
use coherence_nulltest::{Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "coherence-nulltest",
    version,
    about = "Two-detector null tests of the coherent-state hypothesis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, sample the selected channels and write the report.
    Run {
        /// JSON configuration file; flags override its leaves.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Coupling rate of a resonant-mass detector and the occupancies it needs.
    Gamma0 {
        /// kg
        #[arg(long, default_value_t = 1400.0)]
        mass: f64,
        /// m
        #[arg(long, default_value_t = 1.5)]
        length: f64,
        /// Hz; converted to rad/s.
        #[arg(long, default_value_t = 1000.0)]
        freq: f64,
        /// m/s, or `light`.
        #[arg(long, default_value = "5000")]
        speed: String,
        /// s
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        #[arg(long)]
        json: bool,
    },
    /// Compare the ratio and single-detector click estimators of g2.
    CompareG2 {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check the fast paths against the brute-force references.
    Oracle,
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e.kind() {
        ErrorKind::Config | ErrorKind::Io => ExitCode::from(2),
        ErrorKind::Numerical => ExitCode::from(3),
    }
}

fn fmt_scalar(s: Scalar) -> String {
    match s {
        Scalar::Real(x) => format!("{x:+.6e}"),
        Scalar::Complex { re, im } => format!("{re:+.6e}{im:+.6e}i"),
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, overrides } => load_config(config.as_deref(), &overrides)
            .and_then(|cfg| run_experiment(&cfg))
            .map(|report| {
                for ch in &report.channels {
                    for v in &ch.verdicts {
                        println!(
                            "{:<10} {:<18} statistic={} se={:.3e} verdict={:?}",
                            v.channel.as_str(),
                            v.observable.as_str(),
                            fmt_scalar(v.statistic),
                            v.standard_error,
                            v.verdict
                        );
                    }
                    if let Some(e) = &ch.error {
                        println!("{:<10} failed: {e}", ch.channel.as_str());
                    }
                }
                println!(
                    "wrote {} files to {}",
                    report.files.len(),
                    report.config.output_dir.display()
                );
                if report.status == Status::Partial {
                    ExitCode::from(4)
                } else {
                    ExitCode::SUCCESS
                }
            }),
        Command::Gamma0 {
            mass,
            length,
            freq,
            speed,
            dt,
            json,
        } => parse_speed(&speed)
            .and_then(|speed| {
                let spec = DetectorSpec {
                    mass,
                    length,
                    omega: 2.0 * std::f64::consts::PI * freq,
                    speed,
                    dt,
                };
                gamma0_table(&spec)
            })
            .and_then(|t| {
                if json {
                    print_json(&t)?;
                } else {
                    println!("gamma0      = {:.10e} 1/s", t.gamma0);
                    println!("gamma0 dt   = {:.10e}", t.gamma0_dt);
                    for r in &t.rows {
                        println!(
                            "target {:>5}: n = {:.4e} feasible={}",
                            r.target, r.n_required, r.feasible
                        );
                    }
                }
                Ok(ExitCode::SUCCESS)
            }),
        Command::CompareG2 { config, overrides } => load_config(config.as_deref(), &overrides)
            .and_then(|cfg| compare_g2(&cfg))
            .and_then(|c| {
                print_json(&c)?;
                Ok(ExitCode::SUCCESS)
            }),
        Command::Oracle => validation_suite().map(|checks| {
            let mut ok = true;
            for c in &checks {
                ok &= c.passed();
                println!(
                    "{} {:<40} max_error={:.3e} tolerance={:.1e}",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.max_error,
                    c.tolerance
                );
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }),
    };
    result.unwrap_or_else(|e| exit_for(&e))
}
