use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use log::{error, info};

use rabicrit_cli::{execute, load_config, Format, Subcommand};

#[derive(Parser)]
#[command(
    name = "rabicrit",
    version,
    about = "Critical Rabi model dynamics and metrology"
)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Command {
    Spectrum,
    Dynamics,
    Dephasing,
    Metrology,
    Sweep,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cmd = match cli.subcommand {
        Command::Spectrum => Subcommand::Spectrum,
        Command::Dynamics => Subcommand::Dynamics,
        Command::Dephasing => Subcommand::Dephasing,
        Command::Metrology => Subcommand::Metrology,
        Command::Sweep => Subcommand::Sweep,
    };
    let format = cli.format.map(|f| match f {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    });
    let result = load_config(&cli.config)
        .and_then(|cfg| execute(cmd, &cfg, cli.out.as_deref(), format, cli.jobs));
    match result {
        Ok(paths) => {
            for p in paths {
                info!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            eprintln!("rabicrit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
