mod args;
mod commands;
mod errors;
mod fetch;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let mut builder = env_logger::Builder::new();
    builder.filter_level(level).format_timestamp_millis();
    if let Ok(spec) = std::env::var("RUST_LOG") {
        builder.parse_filters(&spec);
    }
    let _ = builder.try_init();
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| errors::UsageError(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Fetch(a) => commands::fetch_cmd(a),
        Command::Calibrate(a) => commands::calibrate_cmd(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Eval(a) => commands::eval_cmd(a),
        Command::Baseline(a) => commands::baseline_cmd(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
        Command::Plot(a) => commands::plot_cmd(a),
        Command::Inspect(a) => commands::inspect_cmd(a),
    }
}

fn main() -> ExitCode {
    stvo_esn::linalg::reexec_with_tuned_blas();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(errors::EXIT_USAGE as u8),
            };
        }
    };
    init_logging(cli.verbose);
    match run(&cli) {
        Ok(()) => ExitCode::from(errors::EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(errors::exit_code(&e) as u8)
        }
    }
}
