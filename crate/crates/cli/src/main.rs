use clap::{Parser, Subcommand};
use robinlab_cli::{run, CliError, ExperimentConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "robinlab", version, about = "Spectral laboratory experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        /// path to the experiment config
        #[arg(long)]
        config: PathBuf,
        /// override the config's output directory
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// override the config's seed
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            output_dir,
            seed,
        } => match execute(&config, output_dir, seed) {
            Ok(manifest) => {
                println!(
                    "{}: ok ({} files, {:.2}s) -> {}",
                    manifest.scenario,
                    manifest.result_files.len(),
                    manifest.wall_clock_seconds,
                    manifest.effective_config.output_dir
                );
                ExitCode::SUCCESS
            }
            Err(err) => {
                // scenario failures serialize the module error; config
                // errors print a field-naming diagnostic
                match &err {
                    CliError::Scenario(core) => {
                        let obj = serde_json::json!({
                            "error": "scenario",
                            "detail": core.to_string(),
                        });
                        eprintln!("{obj}");
                    }
                    other => eprintln!("{other}"),
                }
                ExitCode::from(err.exit_code() as u8)
            }
        },
    }
}

fn execute(
    config_path: &PathBuf,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
) -> Result<robinlab_cli::RunManifest, CliError> {
    let mut config = ExperimentConfig::load(config_path)?;
    // CLI flags win; the manifest records the effective config
    if let Some(dir) = output_dir {
        config.output_dir = dir.to_string_lossy().into_owned();
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    run(&config)
}
