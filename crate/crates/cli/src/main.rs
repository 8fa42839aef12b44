use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use timed_attack::envs::EnvKind;
use timed_attack::harness::{
    all_rows, build_table, evaluate_cell_traced, export_reward_curves, obtain_victim, regret_check, reward_curves,
    row_seed, run_selftest, ExperimentConfig, TimerKind,
};
use timed_attack::noise::NoiseName;
use timed_attack::victims::{load_victim, save_victim, train_victim, Algo, Victim};
use timed_attack::Error;

#[derive(Parser)]
#[command(name = "timed-attack", version, about = "Timed observation attacks on trained RL agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Reduced training and evaluation budgets.
    #[arg(long)]
    quick: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train a victim and save its checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        env: Option<EnvKind>,
        #[arg(long)]
        algo: Option<Algo>,
        /// Environment steps.
        #[arg(long)]
        steps: Option<u64>,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the training curve (episode,return) here.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Evaluate one (env, victim, timer) cell and print its score.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        env: Option<EnvKind>,
        #[arg(long)]
        algo: Option<Algo>,
        #[arg(long)]
        timer: Option<TimerKind>,
        /// Single noise kind; default is every configured kind.
        #[arg(long)]
        noise: Option<NoiseName>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        budget: Option<usize>,
        /// Victim checkpoint; trained on the fly when absent.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Write one trace CSV per episode into this directory.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Evaluate the full env x victim x timer matrix.
    Table {
        #[command(flatten)]
        common: Common,
        /// Output directory for results.csv and results.md.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict to rows given as env:algo, comma separated.
        #[arg(long, value_delimiter = ',')]
        rows: Vec<String>,
    },
    /// Check the Hedge regret bound on random loss sequences.
    RegretCheck {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long = "T", default_value_t = 100)]
        horizon: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Export reward curves for one victim.
    Curves {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        env: Option<EnvKind>,
        #[arg(long)]
        algo: Option<Algo>,
        #[arg(long, default_value = "curves.csv")]
        out: PathBuf,
    },
    /// Run the invariant checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print configuration.
    Config {
        /// Print every default value.
        #[arg(long)]
        defaults: bool,
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Usage(String),
    Failed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter(_) => Failure::Usage(e.to_string()),
            other => Failure::Failed(other.to_string()),
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if common.quick {
        cfg = cfg.quick();
    }
    if let Some(seed) = common.seed {
        cfg.env.seed = seed;
    }
    Ok(cfg)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Failed(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))
}

fn parse_row(text: &str) -> Result<(EnvKind, Algo), Failure> {
    let (env, algo) = text
        .split_once(':')
        .ok_or_else(|| Failure::Usage(format!("row `{text}` is not env:algo")))?;
    Ok((env.parse().map_err(Failure::Usage)?, algo.parse().map_err(Failure::Usage)?))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train {
            common,
            env,
            algo,
            steps,
            out,
            curve,
        } => {
            let mut cfg = load_config(&common)?;
            let env = env.unwrap_or(cfg.env.kind);
            let algo = algo.unwrap_or(cfg.victim.algo);
            if let Some(steps) = steps {
                cfg.train.steps = steps;
            }
            let seed = timed_attack::harness::victim_seed(cfg.env.seed, env, algo);
            let outcome = train_victim(env, &cfg.env_settings(), algo, &cfg.train, seed, None)?;
            save_victim(&out, &outcome.victim)?;
            let n = outcome.curve.len();
            let tail = &outcome.curve[n.saturating_sub(50)..];
            println!(
                "trained {env} {algo}: {n} episodes, mean return of last {} = {:.3}",
                tail.len(),
                tail.iter().sum::<f64>() / tail.len().max(1) as f64
            );
            if let Some(path) = curve {
                let mut text = String::from("episode,return\n");
                for (i, r) in outcome.curve.iter().enumerate() {
                    text.push_str(&format!("{i},{r}\n"));
                }
                write_file(&path, text.as_bytes())?;
            }
            Ok(())
        }
        Command::Attack {
            common,
            env,
            algo,
            timer,
            noise,
            episodes,
            beta,
            budget,
            checkpoint,
            traces,
        } => {
            let mut cfg = load_config(&common)?;
            let env = env.unwrap_or(cfg.env.kind);
            let algo = algo.unwrap_or(cfg.victim.algo);
            let timer = timer.unwrap_or(cfg.attacker.kind);
            if noise.is_some() {
                cfg.noise.kind = noise;
            }
            if let Some(n) = episodes {
                cfg.eval.episodes_per_noise = n;
            }
            if let Some(b) = beta {
                cfg.attacker.beta = b;
            }
            if let Some(b) = budget {
                cfg.attacker.budget = b;
            }
            cfg.validate()?;
            let victim = match checkpoint {
                Some(path) => load_victim(&path)?,
                None => obtain_victim(&cfg, env, algo)?,
            };
            if victim.algo() != algo {
                return Err(Failure::Usage(format!("checkpoint holds a {} victim, not {algo}", victim.algo())));
            }
            let seed = row_seed(cfg.env.seed, env, algo);
            let (cell, kept) = evaluate_cell_traced(&cfg, env, victim.as_victim(), timer, seed, traces.is_some())?;
            println!("{env} {algo} {timer}: {}", cell.display());
            println!("aggregate {:.4}", cell.aggregate());
            println!("attacked frames {} (max per episode {})", cell.total_attacks(), cell.max_attacks());
            if let Some(dir) = traces {
                for (i, trace) in kept.iter().enumerate() {
                    let mut bytes = Vec::new();
                    trace.write_csv(&mut bytes)?;
                    write_file(&dir.join(format!("{env}-{algo}-{timer}-{i:03}.csv")), &bytes)?;
                }
            }
            Ok(())
        }
        Command::Table { common, out, rows } => {
            let cfg = load_config(&common)?;
            let rows = if rows.is_empty() {
                all_rows()
            } else {
                rows.iter().map(|r| parse_row(r)).collect::<Result<_, _>>()?
            };
            let table = build_table(&cfg, &rows);
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let mut csv = Vec::new();
            table.write_csv(&mut csv)?;
            write_file(&dir.join("results.csv"), &csv)?;
            let markdown = table.to_markdown();
            write_file(&dir.join("results.md"), markdown.as_bytes())?;
            println!("{markdown}");
            if table.has_errors() {
                return Err(Failure::Failed("some cells failed".into()));
            }
            Ok(())
        }
        Command::RegretCheck { d, horizon, trials, seed } => {
            if d < 2 || trials == 0 {
                return Err(Failure::Usage("need --d >= 2 and --trials >= 1".into()));
            }
            let (worst, bound) = regret_check(d, horizon, trials, seed)?;
            println!("d = {d}, T = {horizon}, trials = {trials}");
            println!("bound {bound:.4}");
            println!("max observed regret {worst:.4}");
            if worst <= bound {
                println!("ok");
                Ok(())
            } else {
                Err(Failure::Failed("regret exceeded the bound".into()))
            }
        }
        Command::Curves { common, env, algo, out } => {
            let cfg = load_config(&common)?;
            let env = env.unwrap_or(cfg.env.kind);
            let algo = algo.unwrap_or(cfg.victim.algo);
            let curves = reward_curves(&cfg, env, algo)?;
            export_reward_curves(&curves, &out)?;
            println!("wrote {} episodes to {}", curves.episodes(), out.display());
            Ok(())
        }
        Command::Selftest { seed } => {
            let checks = run_selftest(seed);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Failure::Failed("self-test failed".into()))
            }
        }
        Command::Config { defaults, common } => {
            let cfg = if defaults {
                ExperimentConfig::default()
            } else {
                load_config(&common)?
            };
            print!("{}", cfg.to_toml_string());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
