use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use splash2d::commands::{cmd_simulate, cmd_splash_search, cmd_stability, cmd_verify};
use splash2d::config::load_config;

#[derive(Parser)]
#[command(
    name = "splash2d",
    version,
    about = "Free-boundary viscoelastic flow: windowed solves, splash search, stability probes"
)]
struct Cli {
    /// TOML configuration file; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for randomized checks, overriding the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dotted-path config override, e.g. window.k_levels=32; repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// March the configured state through its windows.
    Simulate,
    /// March, then sharpen any splash bracket by halving the time step.
    SplashSearch,
    /// Measure how the end state responds to rigid shifts of the data.
    Stability,
    /// Run the acceptance checks; exit nonzero if any fails.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(cli.config.as_deref(), &cli.overrides) {
        Ok(mut c) => {
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            c
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.cmd {
        Cmd::Simulate => cmd_simulate(&cfg, &cli.out).map(|()| true),
        Cmd::SplashSearch => cmd_splash_search(&cfg, &cli.out).map(|()| true),
        Cmd::Stability => cmd_stability(&cfg, &cli.out).map(|()| true),
        Cmd::Verify => cmd_verify(cfg.seed, &cli.out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
