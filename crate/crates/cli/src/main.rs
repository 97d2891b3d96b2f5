use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use splatsim::{cmd_perceive, cmd_render, cmd_sample, cmd_simulate, PipelineRun, ProviderMode};

#[derive(Parser)]
#[command(name = "splatsim", version, about = "Simulate segmented Gaussian-splat scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline and write one frame per simulated interval.
    Simulate(RunArgs),
    /// Estimate per-object material properties.
    Perceive(RunArgs),
    /// Write the driving particles chosen for each simulated object.
    Sample(RunArgs),
    /// Render the undeformed scene.
    Render(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Offline,
    Remote,
}

#[derive(Args)]
struct RunArgs {
    /// Segmented splat scene (binary PLY).
    #[arg(long)]
    scene: PathBuf,
    /// Scene manifest (JSON).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Simulation config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "offline")]
    provider: ProviderArg,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    /// Write driving particles of every frame as PLY.
    #[arg(long)]
    dump_particles: bool,
    /// Do not read or write the perception cache.
    #[arg(long)]
    no_cache: bool,
}

impl From<RunArgs> for PipelineRun {
    fn from(a: RunArgs) -> Self {
        PipelineRun {
            scene: a.scene,
            manifest: a.manifest,
            config: a.config,
            out: a.out,
            provider: match a.provider {
                ProviderArg::Offline => ProviderMode::Offline,
                ProviderArg::Remote => ProviderMode::Remote,
            },
            seed: a.seed,
            threads: a.threads,
            frames: a.frames,
            dump_particles: a.dump_particles,
            no_cache: a.no_cache,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let report = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a.into()),
        Command::Perceive(a) => cmd_perceive(&a.into()),
        Command::Sample(a) => cmd_sample(&a.into()),
        Command::Render(a) => cmd_render(&a.into()),
    };
    if let Some(f) = &report.failure {
        eprintln!("splatsim: {}", f.message);
    }
    ExitCode::from(report.exit_code() as u8)
}
