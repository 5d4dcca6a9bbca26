//! Command-line front end: single runs, campaigns and the offline solver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use tocucrl::agent::KnownOutcomes;
use tocucrl::benchmark::{solve_offline, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use tocucrl::harness::{
    compare_oracles, episodes_csv, observe_run, parse_instance, parse_reward, run_campaign, steps_csv, Experiment,
    ExperimentConfig, Setting,
};
use tocucrl::oco::OracleChoice;

#[derive(Parser)]
#[command(name = "tocucrl", version, about = "Learning in MDPs with global concave rewards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the learner once and write its step and episode logs.
    Run(RunArgs),
    /// Run a seeded campaign described by a JSON file.
    Campaign {
        #[arg(long)]
        config: PathBuf,
    },
    /// Offline benchmark tools.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Solve the offline relaxation and print opt, gap and x* as CSV.
    Solve {
        #[arg(long)]
        instance: String,
        #[arg(long)]
        reward: String,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        max_iters: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `star:K,D`, `bandit:K`, `cycle:D` or an instance JSON file.
    #[arg(long)]
    instance: String,
    /// Reward keyword, e.g. `quad`, `ent:0.1`, `linear:1`.
    #[arg(long)]
    reward: String,
    /// `fw`, `tgd`, `tmd:l2` or `tmd:ent`.
    #[arg(long, default_value = "fw")]
    oracle: String,
    /// Gradient threshold: a number, `inf`, or `L`.
    #[arg(long = "Q", default_value = "L")]
    q: String,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long = "T")]
    horizon: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reference optimum for regret, or `solve`.
    #[arg(long)]
    opt: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Use the doubling wrapper around a mirror-descent oracle.
    #[arg(long)]
    anytime: bool,
    /// Treat every outcome mean as known.
    #[arg(long)]
    known_outcomes: bool,
}

fn setting(text: &str) -> Setting {
    text.parse()
        .map(Setting::Value)
        .unwrap_or_else(|_| Setting::Keyword(text.to_string()))
}

fn run_once(args: RunArgs) -> anyhow::Result<bool> {
    OracleChoice::parse(&args.oracle)?;
    let config = ExperimentConfig {
        instance: args.instance,
        reward: args.reward,
        oracle: args.oracle,
        compare: Vec::new(),
        q: setting(&args.q),
        delta: args.delta,
        horizons: vec![args.horizon],
        seeds: vec![args.seed],
        opt: args.opt.as_deref().map(setting),
        out_dir: args.out_dir.clone(),
        anytime: args.anytime,
        known_outcomes: if args.known_outcomes {
            KnownOutcomes::All
        } else {
            KnownOutcomes::None
        },
    };
    let exp = Experiment::from_config(&config)?;
    let obs = observe_run(&exp, args.seed, args.horizon)?;
    let steps = steps_csv(&exp.instance, &obs.run)?;
    match &args.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            fs::write(dir.join("steps.csv"), steps)?;
            fs::write(dir.join("episodes.csv"), episodes_csv(&obs.run)?)?;
        }
        None => print!("{steps}"),
    }
    eprintln!(
        "T={} g={} regret={} episodes={} cap={} covered={} n_alt={}",
        args.horizon,
        obs.run.final_g(),
        obs.run
            .final_regret()
            .map(|r| r.to_string())
            .unwrap_or_else(|| "-".into()),
        obs.run.episode_count(),
        obs.run.episode_bound,
        obs.covered,
        obs.n_alt
    );
    Ok(true)
}

fn campaign(path: PathBuf) -> anyhow::Result<bool> {
    let config = ExperimentConfig::from_file(&path).with_context(|| format!("reading {}", path.display()))?;
    if config.compare.is_empty() {
        let summary = run_campaign(&config)?;
        print!("{}", summary.summary_csv()?);
        for run in summary.runs.iter().filter(|r| r.failed()) {
            eprintln!("T={} seed={}: {}", run.horizon, run.seed, run.error);
        }
        Ok(summary.error_count() == 0)
    } else {
        let table = compare_oracles(&config)?;
        print!("{}", table.to_csv()?);
        Ok(table.error_count() == 0)
    }
}

fn bench(command: BenchCommand) -> anyhow::Result<bool> {
    match command {
        BenchCommand::Solve {
            instance,
            reward,
            tol,
            max_iters,
        } => {
            if !(tol > 0.0) {
                bail!("--tol must be positive");
            }
            let instance = parse_instance(&instance)?;
            let spec = parse_reward(&reward, instance.dim())?;
            let sol = solve_offline(&instance, &spec, tol, max_iters)?;
            println!("opt,gap,iterations,converged");
            println!("{},{},{},{}", sol.value, sol.gap, sol.iterations, sol.converged);
            println!("state,action,x");
            for (pair, x) in sol.x.x.iter().enumerate() {
                let (s, a) = instance.pair_of(pair);
                println!("{},{},{}", instance.state_name(s), instance.action(s, a).name, x);
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run_once(args),
        Command::Campaign { config } => campaign(config),
        Command::Bench { command } => bench(command),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
