//! Optimistic-model machinery: visit counts, empirical estimates, confidence
//! regions, optimistic scalar rewards and extended value iteration.
//!
//! State-action pairs are laid out consecutively per state, in the same order
//! as [`MdpInstance::pair_index`](crate::mdp::MdpInstance::pair_index). The
//! transition region of a pair is a per-next-state box intersected with the
//! simplex; the optimistic transition for a value vector `u` is computed
//! exactly by a greedy fill, which is the LP optimum for that polytope.

use crate::error::{Error, Result};
use crate::mdp::MdpInstance;

/// Iteration cap for extended value iteration.
pub const EVI_MAX_ITERS: usize = 1_000_000;

// ── Counts ───────────────────────────────────────────────────────────────

/// Visit counts and sufficient statistics, with per-episode bookkeeping.
#[derive(Clone, Debug)]
pub struct CountsTable {
    num_states: usize,
    dim: usize,
    actions_per_state: Vec<usize>,
    /// `N_m`: visits before the current episode.
    before: Vec<u64>,
    /// `ν_m`: visits within the current episode.
    within: Vec<u64>,
    outcome_sums: Vec<Vec<f64>>,
    transition_counts: Vec<Vec<u64>>,
    known_means: Vec<Option<Vec<f64>>>,
}

impl CountsTable {
    pub fn new(actions_per_state: Vec<usize>, dim: usize) -> Self {
        let num_states = actions_per_state.len();
        let pairs: usize = actions_per_state.iter().sum();
        Self {
            num_states,
            dim,
            actions_per_state,
            before: vec![0; pairs],
            within: vec![0; pairs],
            outcome_sums: vec![vec![0.0; dim]; pairs],
            transition_counts: vec![vec![0; num_states]; pairs],
            known_means: vec![None; pairs],
        }
    }

    pub fn for_instance(instance: &MdpInstance) -> Self {
        let actions = (0..instance.num_states()).map(|s| instance.num_actions(s)).collect();
        Self::new(actions, instance.dim())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_pairs(&self) -> usize {
        self.before.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn actions_per_state(&self) -> &[usize] {
        &self.actions_per_state
    }

    /// Declares the mean outcome of a pair as known, making its outcome
    /// region a singleton.
    pub fn set_known_mean(&mut self, pair: usize, mean: Vec<f64>) {
        self.known_means[pair] = Some(mean);
    }

    pub fn n(&self, pair: usize) -> u64 {
        self.before[pair]
    }

    pub fn n_plus(&self, pair: usize) -> u64 {
        self.before[pair].max(1)
    }

    pub fn nu(&self, pair: usize) -> u64 {
        self.within[pair]
    }

    /// Total visits so far, `N_m + ν_m` summed over pairs.
    pub fn total_visits(&self) -> u64 {
        self.before.iter().sum::<u64>() + self.within.iter().sum::<u64>()
    }

    pub fn record(&mut self, pair: usize, outcome: &[f64], next_state: usize) {
        self.within[pair] += 1;
        for (acc, v) in self.outcome_sums[pair].iter_mut().zip(outcome) {
            *acc += v;
        }
        self.transition_counts[pair][next_state] += 1;
    }

    /// Folds the within-episode counts into `N`: `N_{m+1} = N_m + ν_m`.
    pub fn start_episode(&mut self) {
        for (n, nu) in self.before.iter_mut().zip(self.within.iter_mut()) {
            *n += *nu;
            *nu = 0;
        }
    }
}

// ── Confidence regions ───────────────────────────────────────────────────

/// Snapshot of the estimates and radii at the start of an episode.
#[derive(Clone, Debug)]
pub struct ConfidenceRegions {
    pub tau: u64,
    pub delta: f64,
    pub log_v: f64,
    pub log_p: f64,
    pub v_hat: Vec<Vec<f64>>,
    pub rad_v: Vec<Vec<f64>>,
    pub p_hat: Vec<Vec<f64>>,
    pub rad_p: Vec<Vec<f64>>,
    actions_per_state: Vec<usize>,
}

/// `sqrt(2·x·log/n) + 3·log/n`.
pub fn bernstein_radius(mean: f64, log_term: f64, n_plus: f64) -> f64 {
    (2.0 * mean * log_term / n_plus).sqrt() + 3.0 * log_term / n_plus
}

pub fn compute_regions(counts: &CountsTable, tau: u64, delta: f64) -> ConfidenceRegions {
    debug_assert!(tau >= 1);
    let s = counts.num_states as f64;
    let sa = counts.num_pairs() as f64;
    let k = counts.dim as f64;
    let tau_sq = (tau as f64) * (tau as f64);
    let log_v = (12.0 * k * sa * tau_sq / delta).ln();
    let log_p = (12.0 * s * sa * tau_sq / delta).ln();

    let pairs = counts.num_pairs();
    let mut v_hat = Vec::with_capacity(pairs);
    let mut rad_v = Vec::with_capacity(pairs);
    let mut p_hat = Vec::with_capacity(pairs);
    let mut rad_p = Vec::with_capacity(pairs);
    for pair in 0..pairs {
        let n_plus = counts.n_plus(pair) as f64;
        match &counts.known_means[pair] {
            Some(mean) => {
                v_hat.push(mean.clone());
                rad_v.push(vec![0.0; counts.dim]);
            }
            None => {
                let means: Vec<f64> = counts.outcome_sums[pair].iter().map(|x| x / n_plus).collect();
                rad_v.push(means.iter().map(|&m| bernstein_radius(m, log_v, n_plus)).collect());
                v_hat.push(means);
            }
        }
        let probs: Vec<f64> = counts.transition_counts[pair]
            .iter()
            .map(|&c| c as f64 / n_plus)
            .collect();
        rad_p.push(probs.iter().map(|&p| bernstein_radius(p, log_p, n_plus)).collect());
        p_hat.push(probs);
    }
    ConfidenceRegions {
        tau,
        delta,
        log_v,
        log_p,
        v_hat,
        rad_v,
        p_hat,
        rad_p,
        actions_per_state: counts.actions_per_state.clone(),
    }
}

impl ConfidenceRegions {
    pub fn actions_per_state(&self) -> &[usize] {
        &self.actions_per_state
    }

    /// Optimistic scalar reward `max_{v̄ ∈ H^v} (−θ)ᵀv̄` for one pair.
    pub fn optimistic_reward(&self, theta: &[f64], pair: usize) -> f64 {
        optimistic_reward(&self.v_hat[pair], &self.rad_v[pair], theta)
    }

    pub fn optimistic_rewards(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.v_hat.len())
            .map(|p| self.optimistic_reward(theta, p))
            .collect()
    }

    /// Whether the true `v(s,a)` and `p(·|s,a)` lie in the regions of `pair`.
    pub fn contains(&self, pair: usize, v: &[f64], p: &[f64]) -> bool {
        let v_ok = self.v_hat[pair]
            .iter()
            .zip(&self.rad_v[pair])
            .zip(v)
            .all(|((h, r), x)| (h - x).abs() <= *r);
        let p_ok = self.p_hat[pair]
            .iter()
            .zip(&self.rad_p[pair])
            .zip(p)
            .all(|((h, r), x)| (h - x).abs() <= *r);
        v_ok && p_ok
    }

    pub fn evi(&self, rewards: &[f64], epsilon: f64) -> Result<EviResult> {
        evi(&self.actions_per_state, rewards, &self.p_hat, &self.rad_p, epsilon)
    }
}

/// Coordinate-wise closed form of `max_{v̄ ∈ box ∩ [0,1]^K} (−θ)ᵀv̄`.
pub fn optimistic_reward(v_hat: &[f64], rad: &[f64], theta: &[f64]) -> f64 {
    v_hat
        .iter()
        .zip(rad)
        .zip(theta)
        .map(|((&v, &r), &th)| {
            let c = -th;
            if c > 0.0 {
                c * (v + r).clamp(0.0, 1.0)
            } else if c < 0.0 {
                c * (v - r).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .sum()
}

// ── Inner maximization ───────────────────────────────────────────────────

/// States sorted by decreasing `u`, ties by lowest index.
pub fn descending_order(u: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&i, &j| u[j].total_cmp(&u[i]).then(i.cmp(&j)));
    order
}

/// `argmax Σ u(s')p̄(s')` over `{p̄ ∈ simplex : |p̄ − p̂| ≤ rad}`.
pub fn inner_max_transition(u: &[f64], p_hat: &[f64], rad: &[f64]) -> Result<Vec<f64>> {
    let order = descending_order(u);
    greedy_fill(&order, p_hat, rad)
}

fn greedy_fill(order: &[usize], p_hat: &[f64], rad: &[f64]) -> Result<Vec<f64>> {
    let mut p: Vec<f64> = p_hat.iter().zip(rad).map(|(ph, r)| (ph - r).max(0.0)).collect();
    let mut residual = 1.0 - p.iter().sum::<f64>();
    if residual < -1e-12 {
        return Err(Error::Internal("transition box lies above the simplex".into()));
    }
    for &j in order {
        if residual <= 0.0 {
            break;
        }
        let upper = (p_hat[j] + rad[j]).min(1.0);
        let add = (upper - p[j]).max(0.0).min(residual);
        p[j] += add;
        residual -= add;
    }
    if residual > 1e-12 {
        return Err(Error::Internal("transition box lies below the simplex".into()));
    }
    Ok(p)
}

// ── Extended value iteration ─────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq)]
pub struct EviResult {
    pub policy: Vec<usize>,
    /// `φ̃ = max_s (u_{i+1}(s) − u_i(s))` at termination.
    pub gain: f64,
    /// `γ̃ = u_i`, shifted so its minimum is zero.
    pub bias: Vec<f64>,
    pub iterations: usize,
    /// Span of `u_{i+1} − u_i` at termination.
    pub final_span: f64,
}

/// Tuning knobs for [`evi_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EviSettings {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Weight `λ ∈ (0,1]` of the aperiodicity transform `p ↦ λp + (1−λ)e_s`.
    /// Every stationary policy keeps its stationary distributions and gain,
    /// while periodic chains become aperiodic so the span test can trip.
    /// `1.0` leaves the model untouched.
    pub mix: f64,
}

impl EviSettings {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            max_iters: EVI_MAX_ITERS,
            mix: 1.0,
        }
    }
}

/// Value iteration where each pair's transition is chosen optimistically
/// inside its box region. Stops when `span(u_{i+1} − u_i) ≤ ε`.
pub fn evi(
    actions_per_state: &[usize],
    rewards: &[f64],
    p_hat: &[Vec<f64>],
    rad_p: &[Vec<f64>],
    epsilon: f64,
) -> Result<EviResult> {
    evi_with(actions_per_state, rewards, p_hat, rad_p, &EviSettings::new(epsilon))
}

pub fn evi_with(
    actions_per_state: &[usize],
    rewards: &[f64],
    p_hat: &[Vec<f64>],
    rad_p: &[Vec<f64>],
    settings: &EviSettings,
) -> Result<EviResult> {
    let epsilon = settings.epsilon;
    let mix = settings.mix;
    if !(epsilon > 0.0) {
        return Err(Error::Usage("EVI needs epsilon > 0".into()));
    }
    if !(mix > 0.0 && mix <= 1.0) {
        return Err(Error::Usage("aperiodicity weight must lie in (0,1]".into()));
    }
    let n = actions_per_state.len();
    let pairs: usize = actions_per_state.iter().sum();
    if rewards.len() != pairs || p_hat.len() != pairs || rad_p.len() != pairs {
        return Err(Error::Usage("EVI inputs disagree on the number of pairs".into()));
    }
    let singleton: Vec<bool> = rad_p.iter().map(|r| r.iter().all(|&x| x == 0.0)).collect();
    let mut u = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut upsilon = vec![0.0; pairs];

    for iteration in 0..settings.max_iters {
        let order = descending_order(&u);
        let mut pair = 0;
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for _ in 0..actions_per_state[s] {
                let mut expect = if singleton[pair] {
                    dot(&p_hat[pair], &u)
                } else {
                    let p = greedy_fill(&order, &p_hat[pair], &rad_p[pair])?;
                    dot(&p, &u)
                };
                if mix < 1.0 {
                    expect = mix * expect + (1.0 - mix) * u[s];
                }
                upsilon[pair] = rewards[pair] + expect;
                best = best.max(upsilon[pair]);
                pair += 1;
            }
            next[s] = best;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in 0..n {
            let d = next[s] - u[s];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let span = hi - lo;
        if span <= epsilon {
            let mut policy = Vec::with_capacity(n);
            let mut pair = 0;
            for &count in actions_per_state {
                let mut best_a = 0;
                for a in 0..count {
                    if upsilon[pair + a] > upsilon[pair + best_a] {
                        best_a = a;
                    }
                }
                policy.push(best_a);
                pair += count;
            }
            let floor = u.iter().cloned().fold(f64::INFINITY, f64::min);
            let bias = u.iter().map(|x| x - floor).collect();
            return Ok(EviResult {
                policy,
                gain: hi,
                bias,
                iterations: iteration + 1,
                final_span: span,
            });
        }
        let floor = next.iter().cloned().fold(f64::INFINITY, f64::min);
        for (ui, ni) in u.iter_mut().zip(&next) {
            *ui = ni - floor;
        }
    }
    Err(Error::EviNonConvergent {
        iterations: settings.max_iters,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unvisited_pair_has_full_box() {
        let counts = CountsTable::new(vec![2, 1], 2);
        let reg = compute_regions(&counts, 1, 0.1);
        assert_eq!(reg.v_hat[0], vec![0.0, 0.0]);
        assert!(reg.rad_v[0].iter().all(|&r| r > 3.0 * 12f64.ln() - 1e-12 && r > 1.0));
        let r = reg.optimistic_reward(&[-1.0, 0.5], 0);
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn radius_arithmetic() {
        let log = (12.0 * 1000.0f64.powi(2) / 0.1).ln();
        let r = bernstein_radius(0.5, log, 1000.0);
        assert!((r - 0.1917).abs() < 1e-3);
        assert!(bernstein_radius(0.5, log, 2000.0) < r);
    }

    #[test]
    fn log_terms_use_total_pairs() {
        let counts = CountsTable::new(vec![2, 3, 1], 4);
        let reg = compute_regions(&counts, 7, 0.05);
        let sa = 6.0;
        assert!((reg.log_v - (12.0 * 4.0 * sa * 49.0 / 0.05f64).ln()).abs() < 1e-12);
        assert!((reg.log_p - (12.0 * 3.0 * sa * 49.0 / 0.05f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn optimistic_reward_examples() {
        assert_eq!(optimistic_reward(&[0.3, 0.6], &[0.1, 0.1], &[0.0, 0.0]), 0.0);
        let r = optimistic_reward(&[0.4, 0.6], &[0.1, 0.2], &[0.5, -0.5]);
        assert!((r - 0.25).abs() < 1e-15);
        let r = optimistic_reward(&[0.4, 0.6], &[0.0, 0.0], &[0.5, -0.5]);
        assert!((r - 0.1).abs() < 1e-15);
    }

    #[test]
    fn inner_max_examples() {
        let p = inner_max_transition(&[3.0, 1.0, 2.0], &[0.5, 0.3, 0.2], &[0.2, 0.1, 0.1]).unwrap();
        let expect = [0.7, 0.2, 0.1];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((dot(&p, &[3.0, 1.0, 2.0]) - 2.5).abs() < 1e-12);
        let p_hat = [0.2, 0.5, 0.3];
        assert_eq!(
            inner_max_transition(&[1.0, 2.0, 3.0], &p_hat, &[0.0; 3]).unwrap(),
            p_hat.to_vec()
        );
        assert_eq!(
            inner_max_transition(&[1.0, 5.0, 3.0], &p_hat, &[1.0; 3]).unwrap(),
            vec![0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn evi_two_cycle() {
        let p_hat = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let rad = vec![vec![0.0; 2], vec![0.0; 2]];
        let eps = 1e-6;
        let settings = EviSettings {
            mix: 0.5,
            ..EviSettings::new(eps)
        };
        let res = evi_with(&[1, 1], &[1.0, 0.0], &p_hat, &rad, &settings).unwrap();
        assert!((res.gain - 0.5).abs() <= eps);

        let plain = EviSettings {
            max_iters: 1000,
            ..EviSettings::new(eps)
        };
        let err = evi_with(&[1, 1], &[1.0, 0.0], &p_hat, &rad, &plain).unwrap_err();
        assert!(matches!(err, Error::EviNonConvergent { iterations: 1000 }));
    }

    #[test]
    fn evi_constant_rewards() {
        let p_hat = vec![vec![0.5, 0.5], vec![0.0, 1.0], vec![1.0, 0.0]];
        let rad = vec![vec![0.0; 2]; 3];
        let res = evi(&[2, 1], &[0.3, 0.3, 0.3], &p_hat, &rad, 1e-9).unwrap();
        assert!((res.gain - 0.3).abs() < 1e-12);
        assert!(res.iterations <= 2);
    }

    #[test]
    fn evi_prefers_rewarding_loop() {
        // state 0: stay (r=0.2) or go to 1 (r=0); state 1: stay (r=0.9) or back
        let p_hat = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let rad = vec![vec![0.0; 2]; 4];
        let res = evi(&[2, 2], &[0.2, 0.0, 0.9, 0.0], &p_hat, &rad, 1e-8).unwrap();
        assert_eq!(res.policy, vec![1, 0]);
        assert!((res.gain - 0.9).abs() < 1e-7);
    }

    #[test]
    fn evi_rejects_nonpositive_epsilon() {
        assert!(evi(&[1], &[0.0], &[vec![1.0]], &[vec![0.0]], 0.0).is_err());
    }

    #[test]
    fn counts_fold_on_episode_start() {
        let mut c = CountsTable::new(vec![1, 1], 1);
        c.record(0, &[1.0], 1);
        c.record(0, &[0.0], 0);
        assert_eq!((c.n(0), c.nu(0), c.n_plus(0)), (0, 2, 1));
        c.start_episode();
        assert_eq!((c.n(0), c.nu(0), c.n_plus(0)), (2, 0, 2));
        let reg = compute_regions(&c, 3, 0.1);
        assert_eq!(reg.v_hat[0], vec![0.5]);
        assert_eq!(reg.p_hat[0], vec![0.5, 0.5]);
        assert_eq!(c.total_visits(), 2);
    }

    #[test]
    fn known_means_give_singletons() {
        let mut c = CountsTable::new(vec![2], 2);
        c.set_known_mean(1, vec![0.0, 0.0]);
        let reg = compute_regions(&c, 1, 0.1);
        assert_eq!(reg.rad_v[1], vec![0.0, 0.0]);
        assert_eq!(reg.optimistic_reward(&[-1.0, -1.0], 1), 0.0);
    }
}
