use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qls_cli::{CmdOutput, SimulateArgs};
use qls_core::certifier::{CertifyOptions, Tau25Policy};
use qls_core::fock_oracle::InitialState;
use qls_core::scaling_search::{ScalingTriple, SearchOptions};

/// Robust mean square stability certificates for uncertain linear quantum systems.
#[derive(Parser)]
#[command(name = "qls", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file's structure.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// H-infinity norm at given scalings, or the best one the search finds.
    Hinf {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, requires_all = ["tau3", "tau4"])]
        tau1: Option<f64>,
        #[arg(long)]
        tau3: Option<f64>,
        #[arg(long)]
        tau4: Option<f64>,
        #[command(flatten)]
        search: SearchFlags,
    },
    /// Search scalings, solve the Riccati equation and emit a certificate.
    Certify {
        #[arg(long)]
        model: PathBuf,
        /// Certificate destination; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        search: SearchFlags,
        #[arg(long, value_enum, default_value_t = Policy::Default)]
        policy: Policy,
    },
    /// Re-verify a certificate against its model.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
    },
    /// Simulate the master equation and test the certified bounds.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        /// Trajectory CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Simulation config JSON (cutoff, guard, T, steps, rho0).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        cutoff: Option<usize>,
        #[arg(long)]
        guard: Option<usize>,
        #[arg(long = "T")]
        t_final: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 1e-6)]
        slack: f64,
        /// Simulate even when the sector checks fail.
        #[arg(long)]
        force: bool,
        #[arg(long, value_enum)]
        state: Option<StateKind>,
        /// Fock level, or `re,im` for a coherent amplitude, or n̄ for a thermal state.
        #[arg(long, allow_hyphen_values = true)]
        param: Option<String>,
        /// Seed for the random initial state.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct SearchFlags {
    #[arg(long, default_value_t = SearchOptions::default().grid_decades)]
    grid_decades: f64,
    #[arg(long, default_value_t = SearchOptions::default().points_per_decade)]
    points_per_decade: usize,
    #[arg(long, default_value_t = SearchOptions::default().refine_iters)]
    refine_iters: usize,
    #[arg(long, default_value_t = SearchOptions::default().margin)]
    margin: f64,
}

impl From<&SearchFlags> for SearchOptions {
    fn from(f: &SearchFlags) -> Self {
        SearchOptions {
            grid_decades: f.grid_decades,
            points_per_decade: f.points_per_decade,
            refine_iters: f.refine_iters,
            margin: f.margin,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Default,
    OptimizeC3,
}

#[derive(Clone, Copy, ValueEnum)]
enum StateKind {
    Fock,
    Coherent,
    Thermal,
    Random,
}

fn parse_state(kind: StateKind, param: Option<&str>, seed: Option<u64>) -> Result<InitialState, String> {
    let nums = |s: &str| -> Result<Vec<f64>, String> {
        s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad --param {s:?}: {e}"))).collect()
    };
    Ok(match kind {
        StateKind::Fock => {
            let level = param.unwrap_or("0").parse().map_err(|e| format!("bad Fock level: {e}"))?;
            InitialState::Fock { level }
        }
        StateKind::Coherent => {
            let v = nums(param.unwrap_or("0"))?;
            InitialState::Coherent { alpha: [v[0], v.get(1).copied().unwrap_or(0.0)] }
        }
        StateKind::Thermal => InitialState::Thermal { nbar: nums(param.unwrap_or("0"))?[0] },
        StateKind::Random => InitialState::Random { seed: seed.unwrap_or(0) },
    })
}

fn run(cli: Cli) -> CmdOutput {
    match cli.command {
        Command::Validate { model } => qls_cli::cmd_validate(&model),
        Command::Hinf { model, tau1, tau3, tau4, search } => {
            let triple = match (tau1, tau3, tau4) {
                (Some(a), Some(b), Some(c)) => match ScalingTriple::new(a, b, c) {
                    Ok(t) => Some(t),
                    Err(e) => return qls_cli::cmd_error(e.to_string()),
                },
                _ => None,
            };
            qls_cli::cmd_hinf(&model, triple, &(&search).into())
        }
        Command::Certify { model, out, search, policy } => {
            let opts = CertifyOptions {
                search: (&search).into(),
                policy: match policy {
                    Policy::Default => Tau25Policy::Default,
                    Policy::OptimizeC3 => Tau25Policy::OptimizeC3,
                },
                pinned: None,
            };
            qls_cli::cmd_certify(&model, out.as_deref(), &opts)
        }
        Command::Check { model, certificate } => qls_cli::cmd_check(&model, &certificate),
        Command::Simulate {
            model,
            certificate,
            out,
            config,
            cutoff,
            guard,
            t_final,
            steps,
            slack,
            force,
            state,
            param,
            seed,
        } => {
            let state = match state.map(|k| parse_state(k, param.as_deref(), seed)).transpose() {
                Ok(s) => s,
                Err(e) => return qls_cli::cmd_error(e),
            };
            let args = SimulateArgs { config, cutoff, guard, t_final, steps, state, seed, slack, force, out };
            qls_cli::cmd_simulate(&model, &certificate, &args)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QLS_LOG", "warn")).init();
    let out = run(Cli::parse());
    println!("{}", serde_json::to_string_pretty(&out.report).expect("report serializes"));
    ExitCode::from(out.code as u8)
}
