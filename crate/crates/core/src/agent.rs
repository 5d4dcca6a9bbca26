//! The Toc-UCRL2 learning loop and its wrappers.
//!
//! [`TocUcrl`] is a resumable state machine: [`Learner::recommend`] returns the
//! action for the current state, starting a new episode first when the
//! episode guard fails, and [`Learner::observe`] feeds back the outcome.
//! An episode runs a fixed optimistic policy while both
//!
//! * the accumulated gradient drift `Ψ = Σ ‖θ_{t+1} − θ^ref‖_*` is at most `Q`, and
//! * the within-episode count `ν(s, π(s))` is below `N⁺(s, π(s))`.
//!
//! [`AnytimeTmd`] restarts a fresh learner with a mirror-descent oracle on
//! mega-episodes of lengths `2, 4, 8, …`, and [`run_mdpwk`] drives the anytime
//! learner under knapsack budgets, switching to null actions once a budget is
//! exhausted.
//!
//! Every run asserts the deterministic episode-count bound of its oracle and
//! fails with [`Error::EpisodeBound`] if it is ever exceeded.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::mdp::{seeded_rng, MdpInstance, Step, Trajectory};
use crate::oco::{entropy_map_for, MirrorMap, OcoOracle, OracleChoice, OracleKind};
use crate::rewards::{make_knapsack_surrogate, RewardSpec};
use crate::ucrl::{compute_regions, ConfidenceRegions, CountsTable};

// ── Configuration ────────────────────────────────────────────────────────

/// Outcome means the learner is told in advance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnownOutcomes {
    /// Everything is learned from samples.
    #[default]
    None,
    /// Every pair's mean is known (singleton outcome regions).
    All,
    /// Only the null actions' zero outcomes are known.
    NullActions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub delta: f64,
    /// Gradient threshold; `f64::INFINITY` disables drift-triggered episodes.
    pub q: f64,
    pub oracle: OracleChoice,
    /// Horizon for horizon-tuned oracles; defaults to the run length.
    pub horizon: Option<u64>,
    pub seed: u64,
    /// Initial gradient, honored by the TGD oracle only.
    pub theta1: Option<Vec<f64>>,
    /// Reference optimum for regret curves.
    pub opt: Option<f64>,
    pub known_outcomes: KnownOutcomes,
}

impl AgentConfig {
    pub fn new(oracle: OracleChoice, q: f64, delta: f64, seed: u64) -> Self {
        Self {
            delta,
            q,
            oracle,
            horizon: None,
            seed,
            theta1: None,
            opt: None,
            known_outcomes: KnownOutcomes::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return usage(format!("delta must lie in (0,1), got {}", self.delta));
        }
        if !(self.q >= 0.0) {
            return usage(format!("Q must be nonnegative, got {}", self.q));
        }
        Ok(())
    }
}

// ── Episode-count bounds ─────────────────────────────────────────────────

/// Oracle-specific constants of the deterministic episode-count bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundKind {
    FrankWolfe { beta: f64, ones: f64 },
    Tgd { lipschitz: f64 },
    Tmd { l_prime: f64, horizon: u64 },
}

/// `SA(1 + log₂ T)`: episodes ended by count doubling.
pub fn count_doubling_bound(pairs: usize, t: u64) -> f64 {
    pairs as f64 * (1.0 + (t.max(1) as f64).log2())
}

/// Deterministic upper bound on the number of episodes started by time `t`.
pub fn episode_bound(kind: BoundKind, q: f64, pairs: usize, t: u64) -> f64 {
    let nu = count_doubling_bound(pairs, t);
    if q.is_infinite() {
        return 1.0 + nu;
    }
    if q <= 0.0 {
        return f64::INFINITY;
    }
    let tf = t.max(1) as f64;
    let psi = match kind {
        BoundKind::FrankWolfe { beta, ones } => {
            if beta == 0.0 {
                1.0
            } else {
                let c = beta * ones;
                1.0 + q / (2.0 * c) + (32.0 * c * tf / q).sqrt()
            }
        }
        BoundKind::Tgd { lipschitz } => {
            1.0 + (q / (2.0 * lipschitz)).powf(0.75) + (9.0 * lipschitz / q).sqrt() * tf.powf(2.0 / 3.0)
        }
        BoundKind::Tmd { l_prime, horizon } => {
            let h = horizon as f64;
            1.0 + (l_prime / q).sqrt() * h.powf(2.0 / 3.0)
        }
    };
    psi + nu
}

// ── Records ──────────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    PsiOverflow,
    CountDoubling,
    /// Cut short by the end of an anytime mega-episode.
    MegaEpisodeEnd,
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trigger::PsiOverflow => "psi_overflow",
            Trigger::CountDoubling => "count_doubling",
            Trigger::MegaEpisodeEnd => "mega_episode_end",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    /// 1-based global episode index.
    pub m: usize,
    /// Global start time.
    pub tau: u64,
    /// Why the episode ended; `None` for the episode still open at the end.
    pub trigger: Option<Trigger>,
    pub gain: f64,
    pub evi_iters: usize,
    pub policy: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub state: usize,
    pub action: usize,
    pub outcome: Vec<f64>,
    pub next_state: usize,
    /// `g(V̄_{1:t})`.
    pub g: f64,
    pub regret: Option<f64>,
    /// Episode index `m(t)`.
    pub episode: usize,
    /// Drift accumulator after the update at time `t`.
    pub psi: f64,
    /// Gradient `θ_t` in force when the action was chosen.
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MegaEpisode {
    pub h: u32,
    pub start: u64,
    pub length: u64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub dim: usize,
    pub steps: Vec<StepRecord>,
    pub episodes: Vec<EpisodeRecord>,
    pub mega_episodes: Vec<MegaEpisode>,
    /// Deterministic episode-count bound at the final time (summed over
    /// mega-episodes for anytime runs); infinite when `Q = 0`.
    pub episode_bound: f64,
}

impl RunResult {
    pub fn horizon(&self) -> u64 {
        self.steps.len() as u64
    }

    pub fn episode_count(&self) -> usize {
        self.episodes.len()
    }

    pub fn final_g(&self) -> f64 {
        self.steps.last().map_or(f64::NAN, |s| s.g)
    }

    pub fn final_regret(&self) -> Option<f64> {
        self.steps.last().and_then(|s| s.regret)
    }

    pub fn average(&self) -> Vec<f64> {
        self.trajectory().average()
    }

    pub fn trajectory(&self) -> Trajectory {
        let mut traj = Trajectory::new(self.dim);
        for s in &self.steps {
            traj.push(Step {
                t: s.t,
                state: s.state,
                action: s.action,
                outcome: s.outcome.clone(),
                next_state: s.next_state,
            });
        }
        traj
    }
}

// ── Learner interface ────────────────────────────────────────────────────

/// A step-wise learner: ask for an action, then report what happened.
pub trait Learner {
    fn recommend(&mut self, state: usize) -> Result<usize>;
    fn observe(&mut self, state: usize, action: usize, outcome: &[f64], next_state: usize) -> Result<()>;
    /// Global index of the current episode (0 before the first).
    fn episode_index(&self) -> usize;
    fn psi(&self) -> f64;
    fn theta(&self) -> &[f64];
    /// Regions of the current episode.
    fn regions(&self) -> Option<&ConfidenceRegions>;
    fn episodes(&self) -> Vec<EpisodeRecord>;
}

// ── Toc-UCRL2 ────────────────────────────────────────────────────────────

#[derive(Clone, Debug)]
struct Episode {
    policy: Vec<usize>,
    theta_ref: Vec<f64>,
    psi: f64,
    regions: ConfidenceRegions,
}

/// Algorithm state for one run.
#[derive(Clone, Debug)]
pub struct TocUcrl {
    delta: f64,
    q: f64,
    offsets: Vec<usize>,
    counts: CountsTable,
    oracle: OcoOracle,
    bound: BoundKind,
    /// Local time of the next step (1-based).
    t: u64,
    sum_outcomes: Vec<f64>,
    current: Option<Episode>,
    log: Vec<EpisodeRecord>,
    /// Added to local times and episode indices in the records.
    time_offset: u64,
    episode_offset: usize,
}

impl TocUcrl {
    pub fn new(counts: CountsTable, spec: &RewardSpec, oracle: OcoOracle, delta: f64, q: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return usage(format!("delta must lie in (0,1), got {delta}"));
        }
        if !(q >= 0.0) {
            return usage(format!("Q must be nonnegative, got {q}"));
        }
        spec.check_dim(counts.dim())?;
        let bound = match (oracle.kind(), oracle.mirror_map()) {
            (OracleKind::MirrorDescent, Some(map)) => BoundKind::Tmd {
                l_prime: map.l_prime(),
                horizon: oracle.horizon().unwrap_or(1),
            },
            (OracleKind::GradientDescent, _) => BoundKind::Tgd {
                lipschitz: spec.lipschitz,
            },
            _ => BoundKind::FrankWolfe {
                beta: spec.beta.unwrap_or(0.0),
                ones: spec.ones_norm(),
            },
        };
        let mut offsets = Vec::with_capacity(counts.num_states());
        let mut acc = 0;
        for &a in counts.actions_per_state() {
            offsets.push(acc);
            acc += a;
        }
        Ok(Self {
            delta,
            q,
            offsets,
            sum_outcomes: vec![0.0; counts.dim()],
            counts,
            oracle,
            bound,
            t: 1,
            current: None,
            log: Vec::new(),
            time_offset: 0,
            episode_offset: 0,
        })
    }

    /// Builds the learner for `instance` from a configuration.
    pub fn for_instance(instance: &MdpInstance, spec: &RewardSpec, config: &AgentConfig, horizon: u64) -> Result<Self> {
        config.validate()?;
        let oracle = OcoOracle::from_choice(
            &config.oracle,
            spec,
            Some(config.horizon.unwrap_or(horizon)),
            config.theta1.clone(),
        )?;
        let counts = counts_with_knowledge(instance, config.known_outcomes)?;
        let agent = Self::new(counts, spec, oracle, config.delta, config.q)?;
        Ok(agent)
    }

    fn with_offsets(mut self, time_offset: u64, episode_offset: usize) -> Self {
        self.time_offset = time_offset;
        self.episode_offset = episode_offset;
        self
    }

    pub fn bound_kind(&self) -> BoundKind {
        self.bound
    }

    /// Local time of the next step.
    pub fn local_time(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> &CountsTable {
        &self.counts
    }

    /// Current bound on the number of local episodes.
    pub fn bound_now(&self) -> f64 {
        let t = match self.bound {
            BoundKind::Tmd { horizon, .. } => horizon.max(self.t - 1),
            _ => (self.t - 1).max(1),
        };
        episode_bound(self.bound, self.q, self.counts.num_pairs(), t)
    }

    fn pair(&self, s: usize, a: usize) -> usize {
        self.offsets[s] + a
    }

    fn start_episode(&mut self) -> Result<()> {
        let tau = self.t;
        self.counts.start_episode();
        let regions = compute_regions(&self.counts, tau, self.delta);
        let theta = self.oracle.theta().to_vec();
        let rewards = regions.optimistic_rewards(&theta);
        let evi = regions.evi(&rewards, 1.0 / (tau as f64).sqrt())?;

        let m_local = self.log.len() + 1;
        let bound_t = match self.bound {
            BoundKind::Tmd { horizon, .. } => horizon.max(tau),
            _ => tau,
        };
        let bound = episode_bound(self.bound, self.q, self.counts.num_pairs(), bound_t);
        if m_local as f64 > bound {
            return Err(Error::EpisodeBound {
                t: tau + self.time_offset,
                episodes: m_local,
                bound,
            });
        }
        self.log.push(EpisodeRecord {
            m: m_local + self.episode_offset,
            tau: tau + self.time_offset,
            trigger: None,
            gain: evi.gain,
            evi_iters: evi.iterations,
            policy: evi.policy.clone(),
        });
        self.current = Some(Episode {
            policy: evi.policy,
            theta_ref: theta,
            psi: 0.0,
            regions,
        });
        Ok(())
    }

    /// Closes the open episode (used when a mega-episode ends).
    fn close(&mut self, trigger: Trigger) {
        if let Some(last) = self.log.last_mut() {
            if last.trigger.is_none() {
                last.trigger = Some(trigger);
            }
        }
    }
}

impl Learner for TocUcrl {
    fn recommend(&mut self, state: usize) -> Result<usize> {
        if state >= self.offsets.len() {
            return usage(format!("state {state} out of range"));
        }
        if let Some(ep) = &self.current {
            let a = ep.policy[state];
            let pair = self.pair(state, a);
            if ep.psi <= self.q && self.counts.nu(pair) < self.counts.n_plus(pair) {
                return Ok(a);
            }
            let trigger = if ep.psi > self.q {
                Trigger::PsiOverflow
            } else {
                Trigger::CountDoubling
            };
            self.close(trigger);
        }
        self.start_episode()?;
        Ok(self.current.as_ref().expect("episode started").policy[state])
    }

    fn observe(&mut self, state: usize, action: usize, outcome: &[f64], next_state: usize) -> Result<()> {
        let Some(ep) = &self.current else {
            return Err(Error::Internal("observe called before recommend".into()));
        };
        if ep.policy[state] != action {
            return Err(Error::Internal(
                "observed action differs from the episode policy".into(),
            ));
        }
        let pair = self.pair(state, action);
        self.counts.record(pair, outcome, next_state);
        for (acc, v) in self.sum_outcomes.iter_mut().zip(outcome) {
            *acc += v;
        }
        let t = self.t;
        let vbar: Vec<f64> = self.sum_outcomes.iter().map(|x| x / t as f64).collect();
        let norm = self.oracle.drift_norm();
        let theta = self.oracle.update(t, outcome, &vbar)?;
        let ep = self.current.as_mut().expect("checked above");
        ep.psi += norm.distance(theta, &ep.theta_ref);
        self.t += 1;
        Ok(())
    }

    fn episode_index(&self) -> usize {
        self.log.len() + self.episode_offset
    }

    fn psi(&self) -> f64 {
        self.current.as_ref().map_or(0.0, |e| e.psi)
    }

    fn theta(&self) -> &[f64] {
        self.oracle.theta()
    }

    fn regions(&self) -> Option<&ConfidenceRegions> {
        self.current.as_ref().map(|e| &e.regions)
    }

    fn episodes(&self) -> Vec<EpisodeRecord> {
        self.log.clone()
    }
}

/// Counts table with the prior knowledge the configuration grants.
pub fn counts_with_knowledge(instance: &MdpInstance, known: KnownOutcomes) -> Result<CountsTable> {
    let mut counts = CountsTable::for_instance(instance);
    match known {
        KnownOutcomes::None => {}
        KnownOutcomes::All => {
            for s in 0..instance.num_states() {
                for a in 0..instance.num_actions(s) {
                    counts.set_known_mean(instance.pair_index(s, a), instance.mean(s, a).to_vec());
                }
            }
        }
        KnownOutcomes::NullActions => {
            if !instance.has_null_actions() {
                return Err(Error::Config("instance declares no null actions".into()));
            }
            for s in 0..instance.num_states() {
                let a = instance.null_action(s).expect("checked above");
                counts.set_known_mean(instance.pair_index(s, a), vec![0.0; instance.dim()]);
            }
        }
    }
    Ok(counts)
}

// ── Anytime mirror descent ───────────────────────────────────────────────

/// Confidence parameter of mega-episode `h ≥ 1`.
pub fn mega_episode_delta(delta: f64, h: u32) -> f64 {
    if h <= 1 {
        delta
    } else {
        delta / 2f64.powi(h as i32)
    }
}

/// Restarts a mirror-descent learner on mega-episodes of length `2^h`.
#[derive(Clone, Debug)]
pub struct AnytimeTmd {
    spec: RewardSpec,
    map: MirrorMap,
    base_counts: CountsTable,
    delta: f64,
    q: f64,
    h: u32,
    inner: TocUcrl,
    /// Global time of the next step (1-based).
    t: u64,
    mega_start: u64,
    megas: Vec<MegaEpisode>,
    finished: Vec<EpisodeRecord>,
    bound_total: f64,
}

impl AnytimeTmd {
    pub fn new(counts: CountsTable, spec: &RewardSpec, map: MirrorMap, delta: f64, q: f64) -> Result<Self> {
        let inner = Self::fresh(&counts, spec, &map, delta, q, 1, 0, 0)?;
        let bound_total = inner.bound_now();
        Ok(Self {
            spec: spec.clone(),
            map,
            base_counts: counts,
            delta,
            q,
            h: 1,
            inner,
            t: 1,
            mega_start: 1,
            megas: vec![MegaEpisode {
                h: 1,
                start: 1,
                length: 2,
                delta,
            }],
            finished: Vec::new(),
            bound_total,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn fresh(
        counts: &CountsTable,
        spec: &RewardSpec,
        map: &MirrorMap,
        delta: f64,
        q: f64,
        h: u32,
        time_offset: u64,
        episode_offset: usize,
    ) -> Result<TocUcrl> {
        let length = 1u64 << h;
        let oracle = OcoOracle::tmd(spec, map.clone(), length)?;
        let inner = TocUcrl::new(counts.clone(), spec, oracle, mega_episode_delta(delta, h), q)?;
        Ok(inner.with_offsets(time_offset, episode_offset))
    }

    pub fn mega_episodes(&self) -> &[MegaEpisode] {
        &self.megas
    }

    /// Sum of the per-mega-episode bounds started so far.
    pub fn bound_total(&self) -> f64 {
        self.bound_total
    }

    fn roll_over(&mut self) -> Result<()> {
        self.inner.close(Trigger::MegaEpisodeEnd);
        self.finished.extend(self.inner.episodes());
        self.h += 1;
        let episode_offset = self.finished.len();
        self.inner = Self::fresh(
            &self.base_counts,
            &self.spec,
            &self.map,
            self.delta,
            self.q,
            self.h,
            self.t - 1,
            episode_offset,
        )?;
        self.bound_total += self.inner.bound_now();
        self.mega_start = self.t;
        self.megas.push(MegaEpisode {
            h: self.h,
            start: self.t,
            length: 1u64 << self.h,
            delta: mega_episode_delta(self.delta, self.h),
        });
        Ok(())
    }
}

impl Learner for AnytimeTmd {
    fn recommend(&mut self, state: usize) -> Result<usize> {
        if self.t - self.mega_start >= (1u64 << self.h) {
            self.roll_over()?;
        }
        self.inner.recommend(state)
    }

    fn observe(&mut self, state: usize, action: usize, outcome: &[f64], next_state: usize) -> Result<()> {
        self.inner.observe(state, action, outcome, next_state)?;
        self.t += 1;
        Ok(())
    }

    fn episode_index(&self) -> usize {
        self.inner.episode_index()
    }

    fn psi(&self) -> f64 {
        self.inner.psi()
    }

    fn theta(&self) -> &[f64] {
        self.inner.theta()
    }

    fn regions(&self) -> Option<&ConfidenceRegions> {
        self.inner.regions()
    }

    fn episodes(&self) -> Vec<EpisodeRecord> {
        let mut all = self.finished.clone();
        all.extend(self.inner.episodes());
        all
    }
}

// ── Drivers ──────────────────────────────────────────────────────────────

/// Called with the regions of every newly started episode.
pub type RegionObserver<'a> = &'a mut dyn FnMut(&ConfidenceRegions);

fn drive(
    instance: &MdpInstance,
    spec: &RewardSpec,
    learner: &mut dyn Learner,
    seed: u64,
    horizon: u64,
    opt: Option<f64>,
    mut observer: Option<RegionObserver<'_>>,
) -> Result<Vec<StepRecord>> {
    let mut rng = seeded_rng(seed);
    let mut state = instance.start();
    let mut sum = vec![0.0; instance.dim()];
    let mut steps = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let before = learner.episode_index();
        let theta = learner.theta().to_vec();
        let action = learner.recommend(state)?;
        let theta = if learner.episode_index() != before {
            learner.theta().to_vec()
        } else {
            theta
        };
        if learner.episode_index() != before {
            if let (Some(obs), Some(regions)) = (observer.as_mut(), learner.regions()) {
                obs(regions);
            }
        }
        let (next, outcome) = instance.step(state, action, &mut rng)?;
        learner.observe(state, action, &outcome, next)?;
        for (acc, v) in sum.iter_mut().zip(&outcome) {
            *acc += v;
        }
        let vbar: Vec<f64> = sum.iter().map(|x| x / t as f64).collect();
        let g = spec.evaluate(&vbar);
        steps.push(StepRecord {
            t,
            state,
            action,
            outcome,
            next_state: next,
            g,
            regret: opt.map(|o| o - g),
            episode: learner.episode_index(),
            psi: learner.psi(),
            theta,
        });
        state = next;
    }
    Ok(steps)
}

/// Runs Toc-UCRL2 for `horizon` steps.
pub fn run(instance: &MdpInstance, spec: &RewardSpec, config: &AgentConfig, horizon: u64) -> Result<RunResult> {
    run_observed(instance, spec, config, horizon, None)
}

pub fn run_observed(
    instance: &MdpInstance,
    spec: &RewardSpec,
    config: &AgentConfig,
    horizon: u64,
    observer: Option<RegionObserver<'_>>,
) -> Result<RunResult> {
    if horizon == 0 {
        return usage("horizon T must be positive");
    }
    spec.check_dim(instance.dim())?;
    let mut agent = TocUcrl::for_instance(instance, spec, config, horizon)?;
    let steps = drive(instance, spec, &mut agent, config.seed, horizon, config.opt, observer)?;
    Ok(RunResult {
        dim: instance.dim(),
        steps,
        episodes: agent.episodes(),
        mega_episodes: Vec::new(),
        episode_bound: agent.bound_now(),
    })
}

/// Runs the doubling wrapper around a mirror-descent learner.
pub fn run_anytime_tmd(
    instance: &MdpInstance,
    spec: &RewardSpec,
    config: &AgentConfig,
    map: &MirrorMap,
    horizon: u64,
) -> Result<RunResult> {
    run_anytime_observed(instance, spec, config, map, horizon, None)
}

pub fn run_anytime_observed(
    instance: &MdpInstance,
    spec: &RewardSpec,
    config: &AgentConfig,
    map: &MirrorMap,
    horizon: u64,
    observer: Option<RegionObserver<'_>>,
) -> Result<RunResult> {
    if horizon == 0 {
        return usage("horizon T must be positive");
    }
    config.validate()?;
    spec.check_dim(instance.dim())?;
    let counts = counts_with_knowledge(instance, config.known_outcomes)?;
    let mut agent = AnytimeTmd::new(counts, spec, map.clone(), config.delta, config.q)?;
    let steps = drive(instance, spec, &mut agent, config.seed, horizon, config.opt, observer)?;
    let mut megas = agent.mega_episodes().to_vec();
    if let Some(last) = megas.last_mut() {
        last.length = last.length.min(horizon + 1 - last.start);
    }
    Ok(RunResult {
        dim: instance.dim(),
        steps,
        episodes: agent.episodes(),
        mega_episodes: megas,
        episode_bound: agent.bound_total(),
    })
}

// ── Knapsack wrapper ─────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq)]
pub struct MdpwkResult {
    pub run: RunResult,
    /// Last step at which the learner acted (`T` if budgets never ran out).
    pub stopping_time: u64,
    /// `Σ_{t ≤ τ} R_t`.
    pub reward: f64,
    /// Per-resource consumption `Σ_{t ≤ τ} C_{t,k}`.
    pub consumption: Vec<f64>,
    /// Final inventories `bT − consumption`.
    pub inventories: Vec<f64>,
}

/// Knapsack-constrained control: coordinate 0 of the outcome is the reward,
/// the remaining `K − 1` coordinates are resource consumptions with budget
/// `bT` each.
pub fn run_mdpwk(instance: &MdpInstance, b: f64, horizon: u64, delta: f64, seed: u64) -> Result<MdpwkResult> {
    if horizon == 0 {
        return usage("horizon T must be positive");
    }
    if !instance.has_null_actions() {
        return Err(Error::Config(
            "knapsack control needs a null action in every state".into(),
        ));
    }
    let k = instance.dim();
    let spec = make_knapsack_surrogate(k, b)?;
    let map = entropy_map_for(&spec)?;
    let q = 1.0 + 2.0 / b;
    let counts = counts_with_knowledge(instance, KnownOutcomes::NullActions)?;
    let mut agent = AnytimeTmd::new(counts, &spec, map, delta, q)?;

    let budget = b * horizon as f64;
    let mut inventory = vec![budget; k - 1];
    let mut consumption = vec![0.0; k - 1];
    let mut reward = 0.0;
    let mut stopping_time = horizon;
    let mut active = true;

    let mut rng = seeded_rng(seed);
    let mut state = instance.start();
    let mut sum = vec![0.0; k];
    let mut steps = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let theta = agent.theta().to_vec();
        let action = if active {
            agent.recommend(state)?
        } else {
            instance.null_action(state).expect("checked above")
        };
        let theta = if active { agent.theta().to_vec() } else { theta };
        let (next, outcome) = instance.step(state, action, &mut rng)?;
        if active {
            agent.observe(state, action, &outcome, next)?;
            reward += outcome[0];
            for ((inv, used), c) in inventory.iter_mut().zip(consumption.iter_mut()).zip(&outcome[1..]) {
                *inv -= c;
                *used += c;
            }
            if inventory.iter().any(|&i| i < 0.0) {
                active = false;
                stopping_time = t;
            }
        }
        for (acc, v) in sum.iter_mut().zip(&outcome) {
            *acc += v;
        }
        let vbar: Vec<f64> = sum.iter().map(|x| x / t as f64).collect();
        steps.push(StepRecord {
            t,
            state,
            action,
            outcome,
            next_state: next,
            g: spec.evaluate(&vbar),
            regret: None,
            episode: agent.episode_index(),
            psi: agent.psi(),
            theta,
        });
        state = next;
    }
    let mut megas = agent.mega_episodes().to_vec();
    if let Some(last) = megas.last_mut() {
        last.length = last.length.min(stopping_time + 1 - last.start);
    }
    Ok(MdpwkResult {
        run: RunResult {
            dim: k,
            steps,
            episodes: agent.episodes(),
            mega_episodes: megas,
            episode_bound: agent.bound_total(),
        },
        stopping_time,
        reward,
        consumption,
        inventories: inventory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_bandit, build_star, Action, OutcomeModel};
    use crate::oco::make_mirror_map_entropy;
    use crate::rewards::{make_fairness, make_linear, make_quadratic_balance};

    #[test]
    fn bound_edge_cases() {
        let fw = BoundKind::FrankWolfe {
            beta: 1.0,
            ones: 2f64.sqrt(),
        };
        assert_eq!(episode_bound(fw, 0.0, 4, 100), f64::INFINITY);
        assert!((episode_bound(fw, f64::INFINITY, 4, 8) - (1.0 + 4.0 * 4.0)).abs() < 1e-12);
        let lin = BoundKind::FrankWolfe { beta: 0.0, ones: 1.0 };
        assert!((episode_bound(lin, 1.0, 2, 4) - (1.0 + 2.0 * 3.0)).abs() < 1e-12);
        let q: f64 = 0.5;
        let c = 2f64.sqrt();
        let expect = 1.0 + q / (2.0 * c) + (32.0 * c * 100.0 / q).sqrt() + 4.0 * (1.0 + 100f64.log2());
        assert!((episode_bound(fw, q, 4, 100) - expect).abs() < 1e-9);
    }

    #[test]
    fn mega_delta_schedule() {
        assert_eq!(mega_episode_delta(0.1, 1), 0.1);
        assert!((mega_episode_delta(0.1, 2) - 0.025).abs() < 1e-15);
        assert!((mega_episode_delta(0.1, 3) - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn linear_reward_keeps_gradient_constant() {
        let inst = build_bandit(2).unwrap();
        let spec = make_linear(vec![0.3, 0.7]).unwrap();
        let config = AgentConfig::new(OracleChoice::Fw, 1.0, 0.1, 5);
        let res = run(&inst, &spec, &config, 500).unwrap();
        assert!(res.steps.iter().all(|s| s.psi == 0.0 && s.theta == vec![-0.3, -0.7]));
        assert!(res
            .episodes
            .iter()
            .all(|e| matches!(e.trigger, None | Some(Trigger::CountDoubling))));
        assert!(res.episode_count() as f64 <= count_doubling_bound(2, 500));
    }

    #[test]
    fn policy_is_stationary_within_episodes() {
        let inst = build_star(2, 2).unwrap();
        let spec = make_quadratic_balance(2).unwrap();
        let config = AgentConfig::new(OracleChoice::Fw, spec.lipschitz, 0.1, 11);
        let res = run(&inst, &spec, &config, 2000).unwrap();
        for s in &res.steps {
            let ep = &res.episodes[s.episode - 1];
            assert_eq!(ep.policy[s.state], s.action);
        }
        assert!(res.episode_count() as f64 <= res.episode_bound);
    }

    #[test]
    fn runs_are_deterministic() {
        let inst = build_star(3, 4).unwrap();
        let spec = make_quadratic_balance(3).unwrap();
        let config = AgentConfig::new(OracleChoice::Tgd, 0.5, 0.1, 3);
        let a = run(&inst, &spec, &config, 300).unwrap();
        let b = run(&inst, &spec, &config, 300).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn anytime_mega_episode_lengths() {
        let inst = build_bandit(3).unwrap();
        let spec = make_fairness(3, 1).unwrap();
        let map = entropy_map_for(&spec).unwrap();
        let config = AgentConfig::new(OracleChoice::TmdEnt, 1.0, 0.1, 0);
        let res = run_anytime_tmd(&inst, &spec, &config, &map, 6).unwrap();
        let lengths: Vec<u64> = res.mega_episodes.iter().map(|m| m.length).collect();
        assert_eq!(lengths, vec![2, 4]);
        assert_eq!(res.mega_episodes[1].start, 3);
        let start = map.minimizer();
        assert_eq!(res.steps[0].theta, start);
        assert_eq!(res.steps[2].theta, start);
    }

    #[test]
    fn entropy_map_starts_uniform() {
        let map = make_mirror_map_entropy(2.0, 4).unwrap();
        assert_eq!(map.minimizer(), vec![0.5; 4]);
    }

    fn null_instance(cost: f64) -> MdpInstance {
        let actions = vec![vec![
            Action::new("rest", vec![1.0], OutcomeModel::Deterministic(vec![0.0, 0.0])),
            Action::new("work", vec![1.0], OutcomeModel::Deterministic(vec![1.0, cost])),
        ]];
        MdpInstance::new(vec!["x".into()], 0, 2, actions)
            .unwrap()
            .with_null_actions(vec![0])
            .unwrap()
    }

    #[test]
    fn mdpwk_free_resources_never_stop() {
        let res = run_mdpwk(&null_instance(0.0), 0.5, 200, 0.1, 1).unwrap();
        assert_eq!(res.stopping_time, 200);
        assert_eq!(res.consumption, vec![0.0]);
    }

    #[test]
    fn mdpwk_stops_at_budget() {
        let horizon = 400;
        let res = run_mdpwk(&null_instance(1.0), 0.5, horizon, 0.1, 1).unwrap();
        assert!(res.consumption[0] <= 0.5 * horizon as f64 + 1.0);
        if res.consumption[0] > 0.5 * horizon as f64 {
            assert_eq!(res.consumption[0], 201.0);
            let worked: Vec<_> = res.run.steps.iter().filter(|s| s.action == 1).collect();
            assert_eq!(worked.last().unwrap().t, res.stopping_time);
        }
    }

    #[test]
    fn mdpwk_requires_null_actions() {
        let inst = build_bandit(2).unwrap();
        assert!(matches!(run_mdpwk(&inst, 0.5, 10, 0.1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_config() {
        let inst = build_bandit(2).unwrap();
        let spec = make_quadratic_balance(2).unwrap();
        let mut config = AgentConfig::new(OracleChoice::Fw, 1.0, 1.5, 0);
        assert!(matches!(run(&inst, &spec, &config, 10), Err(Error::Usage(_))));
        config.delta = 0.1;
        assert!(matches!(run(&inst, &spec, &config, 0), Err(Error::Usage(_))));
        let l1 = crate::rewards::make_l1_balance(2).unwrap();
        assert!(matches!(run(&inst, &l1, &config, 10), Err(Error::Config(_))));
    }
}
