//! Seeded experiment campaigns, aggregation and CSV output.
//!
//! A campaign runs one learner configuration over a grid of horizons and
//! seeds. Every run writes its own step and episode CSVs; a per-run table
//! (`runs.csv`) and the aggregated summary (`summary.csv`) are written after
//! all runs have joined. Floats are printed with Rust's shortest round-trip
//! formatting, so the summary can be recomputed bit-for-bit from `runs.csv`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{run_anytime_observed, run_observed, AgentConfig, KnownOutcomes, RunResult};
use crate::benchmark::{solve_offline, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::error::{usage, Error, Result};
use crate::mdp::{build_bandit, build_cycle, build_star, MdpInstance};
use crate::oco::OracleChoice;
use crate::rewards::{
    make_fairness, make_knapsack_surrogate, make_l1_balance, make_linear, make_quadratic_balance,
    make_smoothed_entropy, make_target_se, make_tilted_balance, RewardSpec,
};
use crate::ucrl::ConfidenceRegions;

// ── Keyword parsing ──────────────────────────────────────────────────────

fn split_keyword(keyword: &str) -> (&str, Vec<&str>) {
    match keyword.split_once(':') {
        Some((name, args)) => (name, args.split(',').map(str::trim).collect()),
        None => (keyword, Vec::new()),
    }
}

fn parse_num<T: std::str::FromStr>(text: &str, what: &str) -> Result<T> {
    text.parse()
        .map_err(|_| Error::Usage(format!("cannot parse {what} from '{text}'")))
}

/// `star:K,D`, `bandit:K`, `cycle:D`, or a path to an instance JSON file.
pub fn parse_instance(keyword: &str) -> Result<MdpInstance> {
    let (name, args) = split_keyword(keyword);
    match (name, args.as_slice()) {
        ("star", [k, d]) => build_star(parse_num(k, "K")?, parse_num(d, "D")?),
        ("bandit", [k]) => build_bandit(parse_num(k, "K")?),
        ("cycle", [d]) => build_cycle(parse_num(d, "D")?),
        ("star" | "bandit" | "cycle", _) => usage(format!("wrong number of arguments in instance '{keyword}'")),
        _ => {
            let text = fs::read_to_string(keyword).map_err(|e| {
                Error::Usage(format!(
                    "instance '{keyword}' is neither a builder nor a readable file: {e}"
                ))
            })?;
            MdpInstance::from_json(&text)
        }
    }
}

/// Reward keyword for an outcome dimension `dim`.
///
/// Recognized forms: `quad`, `tquad`, `l1`, `se:ζ1,…,ζK`, `fair:κ`,
/// `ent:μ`, `knap:b`, `linear:c1,…,cK`. The balance families also accept
/// an explicit dimension (`quad:3`), which must match `dim`.
pub fn parse_reward(keyword: &str, dim: usize) -> Result<RewardSpec> {
    let (name, args) = split_keyword(keyword);
    let floats = |args: &[&str]| -> Result<Vec<f64>> { args.iter().map(|a| parse_num(a, "coefficient")).collect() };
    let balance_dim = |args: &[&str]| -> Result<usize> {
        match args {
            [] => Ok(dim),
            [k] => {
                let k: usize = parse_num(k, "K")?;
                if k != dim {
                    return usage(format!("reward '{keyword}' has dimension {k}, instance has {dim}"));
                }
                Ok(k)
            }
            _ => usage(format!("too many arguments in reward '{keyword}'")),
        }
    };
    match (name, args.as_slice()) {
        ("quad", a) => make_quadratic_balance(balance_dim(a)?),
        ("tquad", a) => make_tilted_balance(balance_dim(a)?),
        ("l1", a) => make_l1_balance(balance_dim(a)?),
        ("se", a) => make_target_se(floats(a)?),
        ("fair", [kappa]) => make_fairness(dim, parse_num(kappa, "kappa")?),
        ("ent", [mu]) => make_smoothed_entropy(dim, parse_num(mu, "mu")?),
        ("knap", [b]) => make_knapsack_surrogate(dim, parse_num(b, "b")?),
        ("linear", a) => make_linear(floats(a)?),
        _ => usage(format!("unknown reward '{keyword}'")),
    }
}

// ── Configuration ────────────────────────────────────────────────────────

/// A numeric setting that may also be given by keyword.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Setting {
    Value(f64),
    Keyword(String),
}

impl Setting {
    /// Gradient threshold: a number, `"inf"`, or `"L"` for the reward's
    /// Lipschitz constant.
    pub fn threshold(&self, spec: &RewardSpec) -> Result<f64> {
        match self {
            Setting::Value(q) => Ok(*q),
            Setting::Keyword(k) => match k.as_str() {
                "inf" | "infinity" => Ok(f64::INFINITY),
                "L" => Ok(spec.lipschitz),
                other => other.parse().map_err(|_| Error::Usage(format!("invalid Q '{other}'"))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: String,
    pub reward: String,
    #[serde(default = "default_oracle")]
    pub oracle: String,
    /// Oracles to compare side by side; empty for a plain campaign.
    #[serde(default)]
    pub compare: Vec<String>,
    #[serde(rename = "Q")]
    pub q: Setting,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(rename = "T")]
    pub horizons: Vec<u64>,
    pub seeds: Vec<u64>,
    /// Reference optimum: a number, `"solve"`, or absent.
    #[serde(default)]
    pub opt: Option<Setting>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Use the doubling wrapper (mirror-descent oracles only).
    #[serde(default)]
    pub anytime: bool,
    #[serde(default)]
    pub known_outcomes: KnownOutcomes,
}

fn default_oracle() -> String {
    "fw".into()
}

fn default_delta() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return usage("seed list is empty");
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return usage("T grid must be nonempty and positive");
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return usage("T values must be strictly increasing");
        }
        OracleChoice::parse(&self.oracle)?;
        for o in &self.compare {
            OracleChoice::parse(o)?;
        }
        Ok(())
    }
}

/// Everything a campaign needs, resolved from an [`ExperimentConfig`].
#[derive(Clone, Debug)]
pub struct Experiment {
    pub instance: MdpInstance,
    pub spec: RewardSpec,
    pub oracle: OracleChoice,
    pub q: f64,
    pub delta: f64,
    pub horizons: Vec<u64>,
    pub seeds: Vec<u64>,
    pub opt: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub anytime: bool,
    pub known_outcomes: KnownOutcomes,
}

impl Experiment {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let instance = parse_instance(&config.instance)?;
        let spec = parse_reward(&config.reward, instance.dim())?;
        let q = config.q.threshold(&spec)?;
        let opt = match &config.opt {
            None => None,
            Some(Setting::Value(v)) => Some(*v),
            Some(Setting::Keyword(k)) if k == "solve" => {
                Some(solve_offline(&instance, &spec, DEFAULT_TOL, DEFAULT_MAX_ITERS)?.value)
            }
            Some(Setting::Keyword(k)) => Some(parse_num(k, "opt")?),
        };
        Ok(Self {
            instance,
            spec,
            oracle: OracleChoice::parse(&config.oracle)?,
            q,
            delta: config.delta,
            horizons: config.horizons.clone(),
            seeds: config.seeds.clone(),
            opt,
            out_dir: config.out_dir.clone(),
            anytime: config.anytime,
            known_outcomes: config.known_outcomes,
        })
    }

    pub fn agent_config(&self, seed: u64) -> AgentConfig {
        AgentConfig {
            opt: self.opt,
            known_outcomes: self.known_outcomes,
            ..AgentConfig::new(self.oracle.clone(), self.q, self.delta, seed)
        }
    }
}

// ── Single runs ──────────────────────────────────────────────────────────

/// A run together with the harness-side diagnostics.
#[derive(Clone, Debug)]
pub struct ObservedRun {
    pub run: RunResult,
    /// Whether every episode's regions contained the true means and kernels.
    pub covered: bool,
    /// Number of steps that took an `exit` action (leaving a star leaf).
    pub n_alt: u64,
}

fn regions_contain_truth(instance: &MdpInstance, regions: &ConfidenceRegions) -> bool {
    (0..instance.num_pairs()).all(|pair| {
        let (s, a) = instance.pair_of(pair);
        regions.contains(pair, instance.mean(s, a), instance.transition(s, a))
    })
}

/// Runs one seed at one horizon, checking confidence coverage on the way.
pub fn observe_run(exp: &Experiment, seed: u64, horizon: u64) -> Result<ObservedRun> {
    let config = exp.agent_config(seed);
    let instance = &exp.instance;
    let mut covered = true;
    let mut observer = |regions: &ConfidenceRegions| {
        covered &= regions_contain_truth(instance, regions);
    };
    let run = if exp.anytime {
        let map = exp
            .oracle
            .mirror_map(&exp.spec)?
            .ok_or_else(|| Error::Config("the doubling wrapper needs a mirror-descent oracle".into()))?;
        run_anytime_observed(instance, &exp.spec, &config, &map, horizon, Some(&mut observer))?
    } else {
        run_observed(instance, &exp.spec, &config, horizon, Some(&mut observer))?
    };
    let n_alt = run
        .steps
        .iter()
        .filter(|s| instance.action(s.state, s.action).name == "exit")
        .count() as u64;
    Ok(ObservedRun { run, covered, n_alt })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-step CSV: `t, s, a, v_1..v_K, g, regret, m, psi`.
pub fn steps_csv(instance: &MdpInstance, run: &RunResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "s".into(), "a".into()];
    header.extend((1..=run.dim).map(|k| format!("v_{k}")));
    header.extend(["g", "regret", "m", "psi"].map(String::from));
    w.write_record(&header)?;
    for step in &run.steps {
        let mut row = vec![
            step.t.to_string(),
            instance.state_name(step.state).to_string(),
            instance.action(step.state, step.action).name.clone(),
        ];
        row.extend(step.outcome.iter().map(f64::to_string));
        row.push(step.g.to_string());
        row.push(fmt_opt(step.regret));
        row.push(step.episode.to_string());
        row.push(step.psi.to_string());
        w.write_record(&row)?;
    }
    into_string(w)
}

/// Episode CSV: `m, tau, trigger, gain, evi_iters`.
pub fn episodes_csv(run: &RunResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["m", "tau", "trigger", "gain", "evi_iters"])?;
    for ep in &run.episodes {
        w.write_record([
            ep.m.to_string(),
            ep.tau.to_string(),
            ep.trigger.map(|t| t.to_string()).unwrap_or_default(),
            ep.gain.to_string(),
            ep.evi_iters.to_string(),
        ])?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

// ── Campaigns ────────────────────────────────────────────────────────────

/// One row of `runs.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    #[serde(rename = "T")]
    pub horizon: u64,
    pub seed: u64,
    /// Empty when the run succeeded.
    pub error: String,
    pub final_g: Option<f64>,
    pub regret: Option<f64>,
    pub episodes: Option<usize>,
    pub episode_cap: Option<f64>,
    pub covered: Option<bool>,
    pub n_alt: Option<u64>,
}

impl RunRow {
    pub fn failed(&self) -> bool {
        !self.error.is_empty()
    }
}

/// Aggregates for one horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "T")]
    pub horizon: u64,
    pub runs: usize,
    pub errors: usize,
    pub mean_g: Option<f64>,
    pub mean_regret: Option<f64>,
    pub median_regret: Option<f64>,
    pub p90_regret: Option<f64>,
    pub mean_episodes: Option<f64>,
    pub max_episodes: Option<usize>,
    pub episode_cap: Option<f64>,
    pub cap_violations: usize,
    pub coverage: Option<f64>,
    pub mean_n_alt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignSummary {
    pub runs: Vec<RunRow>,
    pub rows: Vec<SummaryRow>,
}

impl CampaignSummary {
    pub fn error_count(&self) -> usize {
        self.runs.iter().filter(|r| r.failed()).count()
    }

    pub fn row(&self, horizon: u64) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.horizon == horizon)
    }

    pub fn runs_csv(&self) -> Result<String> {
        to_csv(&self.runs)
    }

    pub fn summary_csv(&self) -> Result<String> {
        to_csv(&self.rows)
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    into_string(w)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Nearest-rank quantile.
fn quantile(xs: &[f64], q: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

/// Aggregates per-run rows into one summary row per horizon.
pub fn aggregate(runs: &[RunRow]) -> Vec<SummaryRow> {
    let mut horizons: Vec<u64> = runs.iter().map(|r| r.horizon).collect();
    horizons.sort_unstable();
    horizons.dedup();
    horizons
        .into_iter()
        .map(|horizon| {
            let group: Vec<&RunRow> = runs.iter().filter(|r| r.horizon == horizon).collect();
            let ok: Vec<&RunRow> = group.iter().copied().filter(|r| !r.failed()).collect();
            let gs: Vec<f64> = ok.iter().filter_map(|r| r.final_g).collect();
            let regrets: Vec<f64> = ok.iter().filter_map(|r| r.regret).collect();
            let episodes: Vec<f64> = ok.iter().filter_map(|r| r.episodes.map(|m| m as f64)).collect();
            let n_alt: Vec<f64> = ok.iter().filter_map(|r| r.n_alt.map(|n| n as f64)).collect();
            let covered: Vec<f64> = ok
                .iter()
                .filter_map(|r| r.covered.map(|c| if c { 1.0 } else { 0.0 }))
                .collect();
            SummaryRow {
                horizon,
                runs: group.len(),
                errors: group.len() - ok.len(),
                mean_g: mean(&gs),
                mean_regret: mean(&regrets),
                median_regret: quantile(&regrets, 0.5),
                p90_regret: quantile(&regrets, 0.9),
                mean_episodes: mean(&episodes),
                max_episodes: ok.iter().filter_map(|r| r.episodes).max(),
                episode_cap: ok.iter().filter_map(|r| r.episode_cap).reduce(f64::max),
                cap_violations: ok
                    .iter()
                    .filter(|r| matches!((r.episodes, r.episode_cap), (Some(m), Some(c)) if m as f64 > c))
                    .count(),
                coverage: mean(&covered),
                mean_n_alt: mean(&n_alt),
            }
        })
        .collect()
}

/// Re-reads a `runs.csv` produced by a campaign.
pub fn read_runs_csv(text: &str) -> Result<Vec<RunRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn run_row(exp: &Experiment, seed: u64, horizon: u64) -> RunRow {
    let mut row = RunRow {
        horizon,
        seed,
        error: String::new(),
        final_g: None,
        regret: None,
        episodes: None,
        episode_cap: None,
        covered: None,
        n_alt: None,
    };
    let outcome = observe_run(exp, seed, horizon).and_then(|obs| {
        if let Some(dir) = &exp.out_dir {
            let stem = format!("T{horizon}_seed{seed}");
            fs::write(
                dir.join(format!("steps_{stem}.csv")),
                steps_csv(&exp.instance, &obs.run)?,
            )?;
            fs::write(dir.join(format!("episodes_{stem}.csv")), episodes_csv(&obs.run)?)?;
        }
        Ok(obs)
    });
    match outcome {
        Ok(obs) => {
            row.final_g = Some(obs.run.final_g());
            row.regret = obs.run.final_regret();
            row.episodes = Some(obs.run.episode_count());
            row.episode_cap = Some(obs.run.episode_bound);
            row.covered = Some(obs.covered);
            row.n_alt = Some(obs.n_alt);
        }
        Err(e) => row.error = e.to_string(),
    }
    row
}

/// Runs every (T, seed) pair, writing raw CSVs, `runs.csv` and
/// `summary.csv` when an output directory is configured.
pub fn run_experiment(exp: &Experiment) -> Result<CampaignSummary> {
    if let Some(dir) = &exp.out_dir {
        fs::create_dir_all(dir)?;
    }
    let jobs: Vec<(u64, u64)> = exp
        .horizons
        .iter()
        .flat_map(|&t| exp.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let runs: Vec<RunRow> = jobs.par_iter().map(|&(t, s)| run_row(exp, s, t)).collect();
    let summary = CampaignSummary {
        rows: aggregate(&runs),
        runs,
    };
    if let Some(dir) = &exp.out_dir {
        fs::write(dir.join("runs.csv"), summary.runs_csv()?)?;
        fs::write(dir.join("summary.csv"), summary.summary_csv()?)?;
    }
    Ok(summary)
}

pub fn run_campaign(config: &ExperimentConfig) -> Result<CampaignSummary> {
    run_experiment(&Experiment::from_config(config)?)
}

// ── Oracle comparison ────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub oracles: Vec<String>,
    pub horizons: Vec<u64>,
    /// `mean_regret[i][j]`: horizon `i`, oracle `j`.
    pub mean_regret: Vec<Vec<Option<f64>>>,
    pub campaigns: Vec<CampaignSummary>,
}

impl ComparisonTable {
    pub fn error_count(&self) -> usize {
        self.campaigns.iter().map(CampaignSummary::error_count).sum()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["T".to_string()];
        header.extend(self.oracles.iter().map(|o| format!("regret_{o}")));
        w.write_record(&header)?;
        for (t, row) in self.horizons.iter().zip(&self.mean_regret) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|x| fmt_opt(*x)));
            w.write_record(&rec)?;
        }
        into_string(w)
    }
}

/// Same instance, reward, horizons and seeds for each oracle; the oracle
/// list defaults to the configured oracle.
pub fn compare_oracles(config: &ExperimentConfig) -> Result<ComparisonTable> {
    let oracles = if config.compare.is_empty() {
        vec![config.oracle.clone()]
    } else {
        config.compare.clone()
    };
    let base = Experiment::from_config(config)?;
    let mut campaigns = Vec::with_capacity(oracles.len());
    for keyword in &oracles {
        let mut exp = base.clone();
        exp.oracle = OracleChoice::parse(keyword)?;
        if oracles.len() > 1 {
            exp.out_dir = base.out_dir.as_ref().map(|d| d.join(keyword.replace(':', "_")));
        }
        campaigns.push(run_experiment(&exp)?);
    }
    let mean_regret = base
        .horizons
        .iter()
        .map(|&t| campaigns.iter().map(|c| c.row(t).and_then(|r| r.mean_regret)).collect())
        .collect();
    let table = ComparisonTable {
        oracles,
        horizons: base.horizons.clone(),
        mean_regret,
        campaigns,
    };
    if let Some(dir) = &base.out_dir {
        fs::create_dir_all(dir)?;
        let mut f = fs::File::create(dir.join("comparison.csv"))?;
        f.write_all(table.to_csv()?.as_bytes())?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(seeds: Vec<u64>, horizons: Vec<u64>) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"instance": "star:2,2", "reward": "quad", "Q": "L", "T": {horizons:?},
                "seeds": {seeds:?}, "opt": 1.0}}"#
        ))
        .unwrap()
    }

    #[test]
    fn parses_keywords() {
        assert_eq!(parse_instance("star:3,4").unwrap().num_states(), 7);
        assert_eq!(parse_instance("cycle:5").unwrap().num_states(), 5);
        assert!(parse_instance("star:3").is_err());
        assert_eq!(parse_reward("quad:2", 2).unwrap().label(), "quad:2");
        assert!(parse_reward("quad:3", 2).is_err());
        assert_eq!(parse_reward("fair:1", 3).unwrap().label(), "fair:3,1");
        assert_eq!(parse_reward("linear:1", 1).unwrap().dim, 1);
        assert!(parse_reward("nope", 2).is_err());
    }

    #[test]
    fn threshold_keywords() {
        let spec = make_quadratic_balance(2).unwrap();
        assert_eq!(Setting::Keyword("inf".into()).threshold(&spec).unwrap(), f64::INFINITY);
        assert_eq!(Setting::Keyword("L".into()).threshold(&spec).unwrap(), spec.lipschitz);
        assert_eq!(Setting::Value(0.5).threshold(&spec).unwrap(), 0.5);
        assert!(Setting::Keyword("x".into()).threshold(&spec).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = r#"{"instance": "star:2,2", "reward": "quad", "Q": 1, "T": [10], "seeds": []}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
        let bad = r#"{"instance": "star:2,2", "reward": "quad", "Q": 1, "T": [10, 5], "seeds": [1]}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
    }

    #[test]
    fn single_run_summary_matches_run() {
        let summary = run_campaign(&config(vec![7], vec![200])).unwrap();
        let exp = Experiment::from_config(&config(vec![7], vec![200])).unwrap();
        let obs = observe_run(&exp, 7, 200).unwrap();
        let row = &summary.rows[0];
        assert_eq!(row.mean_regret, obs.run.final_regret());
        assert_eq!(row.median_regret, obs.run.final_regret());
        assert_eq!(row.max_episodes, Some(obs.run.episode_count()));
        assert_eq!(row.coverage, Some(if obs.covered { 1.0 } else { 0.0 }));
    }

    #[test]
    fn identical_seeds_identical_rows() {
        let summary = run_campaign(&config(vec![3, 3], vec![150])).unwrap();
        let (a, b) = (&summary.runs[0], &summary.runs[1]);
        assert_eq!(a, b);
    }

    #[test]
    fn aggregates_recompute_from_raw() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(vec![1, 2, 3], vec![50, 120]);
        cfg.out_dir = Some(dir.path().to_path_buf());
        let summary = run_campaign(&cfg).unwrap();
        let raw = fs::read_to_string(dir.path().join("runs.csv")).unwrap();
        let rows = aggregate(&read_runs_csv(&raw).unwrap());
        let again = to_csv(&rows).unwrap();
        assert_eq!(again, fs::read_to_string(dir.path().join("summary.csv")).unwrap());
        assert_eq!(again, summary.summary_csv().unwrap());
        assert!(dir.path().join("steps_T50_seed1.csv").exists());
        let c = summary.rows[0].coverage.unwrap();
        assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn run_errors_are_recorded() {
        let mut cfg = config(vec![1], vec![20]);
        cfg.oracle = "tgd".into();
        cfg.reward = "l1".into();
        let summary = run_campaign(&cfg).unwrap();
        assert_eq!(summary.error_count(), 1);
        assert_eq!(summary.rows[0].errors, 1);
        assert_eq!(summary.rows[0].mean_regret, None);
    }

    #[test]
    fn quantiles() {
        let xs = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), Some(3.0));
        assert_eq!(quantile(&xs, 0.9), Some(5.0));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn single_oracle_comparison_is_campaign() {
        let cfg = config(vec![4], vec![80]);
        let table = compare_oracles(&cfg).unwrap();
        let plain = run_campaign(&cfg).unwrap();
        assert_eq!(table.campaigns[0], plain);
        assert_eq!(table.mean_regret[0][0], plain.rows[0].mean_regret);
    }
}
