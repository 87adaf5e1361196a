//! The `qsd` binary: generate ensembles, run solvers, train and evaluate the
//! RL agent, compare everything, sweep rotation noise, and print the trine
//! demonstration. Exit codes: 0 success, 1 usage/I/O, 2 solver
//! non-convergence, 3 invariant or bound violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qsd_cli::compare::run_comparison;
use qsd_cli::generate::generate_ensemble;
use qsd_cli::noise::{noise_sweep, DEFAULT_THETA_GRID};
use qsd_cli::schema::{EnsembleFile, SolverKind, TrialSpec};
use qsd_cli::trine::trine_demo_with;
use qsd_core::collective::{sdp_min_error_with, SdpOptions};
use qsd_core::local::{dp_optimal_local, locally_greedy, minentropy_local, ActionCatalog};
use qsd_core::qstate::Ensemble;
use qsd_core::rl::{
    extract_greedy_policy, load_checkpoint, save_checkpoint, train, PpoConfig, DEFAULT_HIDDEN,
};
use qsd_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "qsd",
    version,
    about = "Measurement strategies for discriminating product states of qubits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Where an ensemble comes from: a JSON file, or drawn fresh from (m, n,
/// seed) under the generation law.
#[derive(Args, Debug)]
struct EnsembleSource {
    /// Path to an ensemble JSON file
    #[arg(long, value_name = "PATH")]
    ensemble: Option<PathBuf>,

    /// Number of hypotheses (when generating)
    #[arg(short, long, default_value_t = 2)]
    m: usize,

    /// Number of qubits per state (when generating)
    #[arg(short, long, default_value_t = 3)]
    n: usize,

    /// Generation seed
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Depolarize factors (default is rank-1 pure factors)
    #[arg(long)]
    mixed: bool,

    /// Depolarizing noise range low end (with --mixed)
    #[arg(long, default_value_t = 0.0)]
    noise_lo: f64,

    /// Depolarizing noise range high end (with --mixed)
    #[arg(long, default_value_t = 0.5)]
    noise_hi: f64,
}

impl EnsembleSource {
    fn spec(&self, quantization: usize) -> TrialSpec {
        TrialSpec {
            m: self.m,
            n: self.n,
            quantization,
            pure_states: !self.mixed,
            noise_range: [self.noise_lo, self.noise_hi],
            seed: self.seed,
            ..TrialSpec::default()
        }
    }

    fn load(&self, quantization: usize) -> Result<Ensemble> {
        match &self.ensemble {
            Some(path) => EnsembleFile::parse(&fs::read_to_string(path)?)?.to_ensemble(),
            None => generate_ensemble(&self.spec(quantization), self.seed),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random ensemble and write it as JSON
    Generate {
        #[command(flatten)]
        source: EnsembleSource,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Solve one ensemble
    Solve {
        #[command(subcommand)]
        solver: Solver,
    },

    /// Train the PPO agent and write a checkpoint
    Train {
        #[command(flatten)]
        source: EnsembleSource,
        #[arg(short, long, default_value_t = 20)]
        quantization: usize,
        /// Training iterations
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        /// RL seed (independent of the generation seed)
        #[arg(long, default_value_t = 0)]
        rl_seed: u64,
        /// Episodes per iteration
        #[arg(long, default_value_t = 128)]
        episodes: usize,
        /// Hidden width of both subnets
        #[arg(long, default_value_t = DEFAULT_HIDDEN)]
        hidden: usize,
        /// Checkpoint path
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Evaluate a trained checkpoint on an ensemble (exact tree evaluation)
    Evaluate {
        #[command(flatten)]
        source: EnsembleSource,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },

    /// Run the randomized solver comparison
    Compare {
        #[command(flatten)]
        source: EnsembleSource,
        #[arg(short, long, default_value_t = 20)]
        quantization: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Solvers to run (default: all)
        #[arg(long, value_delimiter = ',')]
        solvers: Vec<String>,
        /// RL training iterations per repetition
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        /// Independent RL trainings per trial
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        #[arg(long, default_value_t = 128)]
        episodes: usize,
        #[arg(long, default_value_t = DEFAULT_HIDDEN)]
        hidden: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Evaluate the DP policy on rotated copies of its ensemble
    NoiseSweep {
        #[command(flatten)]
        source: EnsembleSource,
        #[arg(short, long, default_value_t = 20)]
        quantization: usize,
        /// Rotation angles (radians)
        #[arg(long, value_delimiter = ',')]
        thetas: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Print the two-copy trine demonstration
    TrineDemo {
        /// SDP iteration budget
        #[arg(long, default_value_t = 50_000)]
        iterations: usize,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Solver {
    /// Optimal collective measurement on the joint system
    Collective {
        #[command(flatten)]
        source: EnsembleSource,
        /// SDP iteration budget
        #[arg(long, default_value_t = 50_000)]
        iterations: usize,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Exact dynamic-programming local oracle
    Dp {
        #[command(flatten)]
        source: EnsembleSource,
        #[arg(short, long, default_value_t = 20)]
        quantization: usize,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Locally-greedy baseline
    Greedy {
        #[command(flatten)]
        source: EnsembleSource,
        #[arg(short, long, default_value_t = 20)]
        quantization: usize,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Min-entropy (SDP-lookahead) baseline
    Minentropy {
        #[command(flatten)]
        source: EnsembleSource,
        #[arg(short, long, default_value_t = 20)]
        quantization: usize,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn solver_json(solver: &str, value: f64, extra: serde_json::Value) -> String {
    let mut obj = serde_json::json!({ "solver": solver, "success_probability": value });
    if let (Some(map), Some(more)) = (obj.as_object_mut(), extra.as_object()) {
        for (k, v) in more {
            map.insert(k.clone(), v.clone());
        }
    }
    serde_json::to_string_pretty(&obj).expect("result serializes") + "\n"
}

fn parse_solvers(names: &[String]) -> Result<Vec<SolverKind>> {
    if names.is_empty() {
        return Ok(vec![
            SolverKind::Sdp,
            SolverKind::Dp,
            SolverKind::Greedy,
            SolverKind::Minentropy,
            SolverKind::Rlnn,
        ]);
    }
    names
        .iter()
        .map(|s| match s.as_str() {
            "sdp" => Ok(SolverKind::Sdp),
            "dp" => Ok(SolverKind::Dp),
            "greedy" => Ok(SolverKind::Greedy),
            "minentropy" => Ok(SolverKind::Minentropy),
            "rlnn" => Ok(SolverKind::Rlnn),
            other => Err(Error::invalid("solver list", format!("unknown solver {other:?}"))),
        })
        .collect()
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate { source, out } => {
            let spec = source.spec(20);
            let ensemble = generate_ensemble(&spec, source.seed)?;
            let meta = serde_json::json!({
                "generator": "qsd generate",
                "seed": source.seed,
                "pure": spec.pure_states,
                "noise_range": spec.noise_range,
            });
            emit(&EnsembleFile::from_ensemble(&ensemble, meta).to_json(), out.as_deref())
        }
        Command::Solve { solver } => match solver {
            Solver::Collective { source, iterations, out } => {
                let ensemble = source.load(20)?;
                let all: Vec<usize> = (0..ensemble.n()).collect();
                let joint = ensemble.joint_densities(&all)?;
                let opts = SdpOptions { max_iterations: iterations, ..SdpOptions::default() };
                let sol = sdp_min_error_with(&joint, ensemble.prior(), opts)?;
                emit(
                    &solver_json(
                        "collective",
                        sol.success_probability,
                        serde_json::json!({
                            "duality_gap": sol.duality_gap,
                            "iterations": sol.iterations,
                        }),
                    ),
                    out.as_deref(),
                )
            }
            Solver::Dp { source, quantization, out } => {
                let ensemble = source.load(quantization)?;
                let policy = dp_optimal_local(&ensemble, &ActionCatalog::new(quantization, ensemble.n()))?;
                emit(
                    &solver_json(
                        "dp",
                        policy.value(),
                        serde_json::json!({ "quantization": quantization }),
                    ),
                    out.as_deref(),
                )
            }
            Solver::Greedy { source, quantization, out } => {
                let ensemble = source.load(quantization)?;
                let policy =
                    locally_greedy(&ensemble, &ActionCatalog::new(quantization, ensemble.n()))?;
                emit(
                    &solver_json(
                        "greedy",
                        policy.value(),
                        serde_json::json!({ "quantization": quantization }),
                    ),
                    out.as_deref(),
                )
            }
            Solver::Minentropy { source, quantization, out } => {
                let ensemble = source.load(quantization)?;
                let policy =
                    minentropy_local(&ensemble, &ActionCatalog::new(quantization, ensemble.n()))?;
                emit(
                    &solver_json(
                        "minentropy",
                        policy.value(),
                        serde_json::json!({ "quantization": quantization }),
                    ),
                    out.as_deref(),
                )
            }
        },
        Command::Train { source, quantization, iterations, rl_seed, episodes, hidden, out } => {
            let ensemble = source.load(quantization)?;
            let cfg = PpoConfig {
                episodes_per_iteration: episodes,
                minibatch: episodes.min(128),
                hidden,
                ..PpoConfig::default()
            };
            let outcome = train(&ensemble, quantization, &cfg, iterations, rl_seed)?;
            if let Some(path) = &out {
                save_checkpoint(path, &outcome.net, quantization)?;
            }
            let curve_tail: Vec<f64> =
                outcome.curve.iter().rev().take(5).rev().cloned().collect();
            print!(
                "{}",
                solver_json(
                    "rlnn",
                    outcome.policy.value(),
                    serde_json::json!({
                        "iterations": iterations,
                        "rl_seed": rl_seed,
                        "final_mean_rewards": curve_tail,
                        "checkpoint": out.as_ref().map(|p| p.display().to_string()),
                    }),
                )
            );
            Ok(())
        }
        Command::Evaluate { source, checkpoint } => {
            let (net, meta) = load_checkpoint(&checkpoint)?;
            let ensemble = source.load(meta.quantization)?;
            if meta.n != ensemble.n() || meta.m != ensemble.m() {
                return Err(Error::Dimension(format!(
                    "checkpoint trained for m={} n={}, ensemble has m={} n={}",
                    meta.m,
                    meta.n,
                    ensemble.m(),
                    ensemble.n()
                )));
            }
            let catalog = ActionCatalog::new(meta.quantization, meta.n);
            let policy = extract_greedy_policy(&net, &ensemble, &catalog)?.evaluated(&ensemble)?;
            print!(
                "{}",
                solver_json(
                    "rlnn-checkpoint",
                    policy.value(),
                    serde_json::json!({ "checkpoint": checkpoint.display().to_string() }),
                )
            );
            Ok(())
        }
        Command::Compare {
            source,
            quantization,
            trials,
            solvers,
            iterations,
            repetitions,
            episodes,
            hidden,
            format,
            out,
        } => {
            let spec = TrialSpec {
                trials,
                solvers: parse_solvers(&solvers)?,
                iterations,
                repetitions,
                ..source.spec(quantization)
            };
            let cfg = PpoConfig {
                episodes_per_iteration: episodes,
                minibatch: episodes.min(128),
                hidden,
                ..PpoConfig::default()
            };
            let table = run_comparison(&spec, &cfg)?;
            table.check_invariants()?;
            let text = match format {
                Format::Csv => table.to_csv(),
                Format::Json => table.to_json(),
            };
            emit(&text, out.as_deref())
        }
        Command::NoiseSweep { source, quantization, thetas, format, out } => {
            let ensemble = source.load(quantization)?;
            let policy =
                dp_optimal_local(&ensemble, &ActionCatalog::new(quantization, ensemble.n()))?;
            let grid = if thetas.is_empty() { DEFAULT_THETA_GRID.to_vec() } else { thetas };
            let sweep = noise_sweep(&ensemble, &policy, &grid)?;
            let text = match format {
                Format::Csv => sweep.to_csv(),
                Format::Json => sweep.to_json(),
            };
            emit(&text, out.as_deref())
        }
        Command::TrineDemo { iterations, out } => {
            let opts = SdpOptions { max_iterations: iterations, ..SdpOptions::default() };
            let report = trine_demo_with(opts)?;
            if let Some(path) = &out {
                fs::write(path, serde_json::to_string_pretty(&report).expect("report") + "\n")?;
            }
            print!("{report}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // Usage errors exit 1 (clap's default of 2 is reserved for solver
    // non-convergence by the CLI contract).
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(qsd_cli::exit_code(&e))
        }
    }
}
