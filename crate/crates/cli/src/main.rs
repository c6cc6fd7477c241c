mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "dualrail", version, about = "Dual-rail walk-graph gate studies")]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true, env = "DUALRAIL_THREADS")]
    threads: Option<usize>,

    /// Output directory for the manifest and data files.
    #[arg(long, global = true, default_value = "dualrail-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hilbert-space dimensions for n logical qubits.
    Dim {
        n: usize,
        /// Maximum walkers per site (default: n, no cap).
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Synthesize and simulate one gate.
    Gate(commands::GateArgs),
    /// CZ fidelity and leakage under (J, V) miscalibration.
    Sweep {
        /// Gate family; only `cz` is supported.
        family: String,
        /// dJ range in units of J, `LO,HI`.
        #[arg(long, default_value = "-0.05,0.05", allow_hyphen_values = true)]
        dj_range: String,
        /// dV range in units of |V|, `LO,HI`.
        #[arg(long, default_value = "-0.05,0.05", allow_hyphen_values = true)]
        dv_range: String,
        #[arg(long, default_value_t = 21)]
        points: usize,
        #[arg(long, default_value_t = 8)]
        m: i64,
    },
    /// Exact and perturbative fidelity/leakage of the detuned CZ.
    Detuning {
        /// Smallest delta = Delta/J (with --max and --points; default grid otherwise).
        #[arg(long)]
        min: Option<f64>,
        #[arg(long)]
        max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Lindblad population dynamics of a repeated gate.
    Noise(commands::NoiseArgs),
    /// Circuit parameters (JSON file) to effective walk parameters.
    EffectiveParams {
        file: PathBuf,
        /// Levels per mode for the exact diagonalization.
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Three-qubit GHZ preparation.
    Ghz(commands::GhzArgs),
    /// Hamiltonian matrix of a walk graph (JSON file).
    Hamiltonian {
        file: PathBuf,
        #[arg(long, default_value_t = 2)]
        cap: usize,
    },
    /// Compose a circuit description (JSON file).
    Circuit { file: PathBuf },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, "DUALRAIL_THREADS must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = cli.out.as_path();
    match cli.command {
        Command::Dim { n, cap } => commands::dim(out, n, cap),
        Command::Gate(args) => commands::gate(out, &args),
        Command::Sweep { family, dj_range, dv_range, points, m } => {
            commands::sweep(out, &family, &dj_range, &dv_range, points, m)
        }
        Command::Detuning { min, max, points } => commands::detuning(out, min, max, points),
        Command::Noise(args) => commands::noise(out, &args),
        Command::EffectiveParams { file, levels } => commands::effective(out, &file, levels),
        Command::Ghz(args) => commands::ghz(out, &args),
        Command::Hamiltonian { file, cap } => commands::hamiltonian(out, &file, cap),
        Command::Circuit { file } => commands::circuit(out, &file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
