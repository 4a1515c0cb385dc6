use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qram_sync::error::Error;
use qram_sync::output::{summary_doc, summary_table, verify_bundle, write_bundle};
use qram_sync::sim::{monte_carlo, standard_strategies, ScenarioConfig, StrategySpec};
use qram_sync::stats::Summary;

#[derive(Parser)]
#[command(name = "qram-sync", version, about = "Q-RAM resource management with adaptive sync for bistatic radar")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run of the configured strategy.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the strategy of the config file.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Several strategies on shared seeds.
    Compare {
        config: PathBuf,
        /// Comma-separated, e.g. caseDecision,regUpdate3,TBreg3. Defaults to
        /// caseDecision, regUpdate2/3/4/10 and TBreg3.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<String>>,
        /// Number of seeds, counting up from --seed. Without it the seeds of
        /// the config file are used.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Summary statistics of numbers read from a file or stdin.
    Stats { file: Option<PathBuf> },
    /// Recompute the statistics of an output directory from its raw samples.
    Verify { dir: PathBuf },
    /// Print the default scenario as TOML.
    DefaultConfig,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InfeasibleConfig(_) => 3,
            Error::InvalidConfig(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: String) -> Failure {
    Failure { code: 2, message }
}

fn load_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let cfg = ScenarioConfig::from_toml(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn parse_strategies(names: &[String]) -> Result<Vec<StrategySpec>, Failure> {
    names
        .iter()
        .map(|n| n.trim().parse::<StrategySpec>().map_err(|e| usage(e.to_string())))
        .collect()
}

fn cmd_run(config: &Path, seed: Option<u64>, strategy: Option<String>, out_dir: &Path) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    if let Some(s) = strategy {
        cfg.strategy = parse_strategies(&[s])?.remove(0);
    }
    let seed = seed.or(cfg.seeds.first().copied()).unwrap_or(1);
    let result = monte_carlo(&cfg, &[cfg.strategy.clone()], &[seed])?;
    write_bundle(out_dir, &cfg, &result)?;
    print!("{}", summary_table(&summary_doc(&result)));
    Ok(())
}

fn cmd_compare(
    config: &Path,
    strategies: Option<Vec<String>>,
    runs: Option<usize>,
    seed: u64,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let strategies = match strategies {
        Some(names) => parse_strategies(&names)?,
        None => standard_strategies(),
    };
    let seeds: Vec<u64> = match runs {
        Some(0) => return Err(usage("--runs must be >= 1".into())),
        Some(n) => (seed..seed + n as u64).collect(),
        None => cfg.seeds.clone(),
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let result = monte_carlo(&cfg, &strategies, &seeds)?;
    write_bundle(out_dir, &cfg, &result)?;
    print!("{}", summary_table(&summary_doc(&result)));
    Ok(())
}

fn cmd_stats(file: Option<PathBuf>) -> Result<(), Failure> {
    let text = match &file {
        Some(p) => fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| usage(e.to_string()))?;
            s
        }
    };
    let samples = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| usage(format!("not a number: {t:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let s = Summary::of(&samples).map_err(|e| usage(e.to_string()))?;
    println!("median {}\nmin {}\nmax {}\nmean {}\nstd {}", s.median, s.min, s.max, s.mean, s.std);
    Ok(())
}

fn cmd_verify(dir: &Path) -> Result<(), Failure> {
    let problems = verify_bundle(dir).map_err(|e| usage(e.to_string()))?;
    if problems.is_empty() {
        println!("ok");
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: problems.join("\n"),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            seed,
            strategy,
            out_dir,
        } => cmd_run(&config, seed, strategy, &out_dir),
        Command::Compare {
            config,
            strategies,
            runs,
            seed,
            out_dir,
            threads,
        } => cmd_compare(&config, strategies, runs, seed, &out_dir, threads),
        Command::Stats { file } => cmd_stats(file),
        Command::Verify { dir } => cmd_verify(&dir),
        Command::DefaultConfig => ScenarioConfig::default()
            .to_toml()
            .map(|t| print!("{t}"))
            .map_err(Failure::from),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
