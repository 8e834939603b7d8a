mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use cart_sim::cart::Encoding;
use clap::{Args, Parser, Subcommand};

use config::{DeltaUnits, Overrides};

#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit code 2.
    Config(String),
    /// The simulation itself failed: exit code 3.
    Numerical(String),
}

impl From<cart_sim::Error> for CliError {
    fn from(e: cart_sim::Error) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "cartsim",
    version,
    about = "Heralded remote entanglement between two atom-cavity nodes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate photon emission of the node(s) and write the wavepackets.
    Emit(RunArgs),
    /// Interfere the photons of two nodes: coincidence map and windowed statistics.
    Interfere(RunArgs),
    /// Fidelity and efficiency over a grid of birefringence values at both nodes.
    Sweep(RunArgs),
    /// Print a parameter preset.
    Preset {
        /// ca40, ra225 or generic
        name: String,
    },
    /// Print the version.
    Version,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Birefringence at both nodes.
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta_b: Option<f64>,
    #[arg(long, value_enum)]
    delta_units: Option<DeltaUnits>,
    #[arg(long, value_parser = parse_encoding)]
    encoding: Option<Encoding>,
    /// Detection scheme: 1 direct, 2 filter cavity, 3 dichroic.
    #[arg(long)]
    scheme: Option<u8>,
    /// Include photons emitted after re-excitation.
    #[arg(long)]
    reexcitation: bool,
    #[arg(long)]
    emission_points: Option<usize>,
    #[arg(long)]
    map_points: Option<usize>,
    /// Relative integrator tolerance.
    #[arg(long)]
    rtol: Option<f64>,
    /// Comma-separated coincidence windows in µs.
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<f64>>,
    /// Heatmap points per axis.
    #[arg(long)]
    resolution: Option<usize>,
    /// Heatmap coincidence window in µs.
    #[arg(long)]
    window: Option<f64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Samples per axis in coincidence.csv; the full map is written when 0.
    #[arg(long, default_value_t = 257)]
    csv_points: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_encoding(s: &str) -> Result<Encoding, String> {
    match s.to_ascii_lowercase().as_str() {
        "frequency" => Ok(Encoding::Frequency),
        "polarization" | "polarisation" => Ok(Encoding::Polarization),
        _ => Err(format!("unknown encoding `{s}` (frequency | polarization)")),
    }
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            preset: self.preset.clone(),
            delta: self.delta,
            delta_a: self.delta_a,
            delta_b: self.delta_b,
            delta_units: self.delta_units,
            encoding: self.encoding,
            scheme: self.scheme,
            reexcitation: self.reexcitation,
            emission_points: self.emission_points,
            map_points: self.map_points,
            rtol: self.rtol,
            windows: self.windows.clone(),
            resolution: self.resolution,
            window: self.window,
        }
    }
}

fn setup_pool(jobs: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Emit(args) => {
            setup_pool(args.jobs)?;
            commands::emit(&args)
        }
        Command::Interfere(args) => {
            setup_pool(args.jobs)?;
            commands::interfere(&args)
        }
        Command::Sweep(args) => {
            setup_pool(args.jobs)?;
            commands::sweep(&args)
        }
        Command::Preset { name } => commands::preset(&name),
        Command::Version => {
            println!("cartsim {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}
