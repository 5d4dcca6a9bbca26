//! Offline optimum of the fluid relaxation and dual certificates.
//!
//! The relaxation maximizes `g(Σ v(s,a) x(s,a))` over occupancy measures `x`,
//! i.e. distributions over state-action pairs satisfying flow balance. Linear
//! subproblems over that polytope are average-reward MDPs and are solved
//! exactly through value iteration plus the stationary distribution of the
//! greedy policy; the concave problem is solved by Frank-Wolfe on top.
//!
//! A dual certificate `(θ, φ, γ)` is feasible when `θ` lies in the dual ball
//! and `φ + γ(s) ≥ −θᵀv(s,a) + Σ p(s'|s,a)γ(s')` for every pair; its value
//! `g*(θ) + φ` upper-bounds every feasible primal value.

use crate::error::{Error, Result};
use crate::mdp::{stationary_distributions, MdpInstance};
use crate::rewards::{dot, make_knapsack_surrogate, RewardSpec};
use crate::ucrl::{evi_with, EviResult, EviSettings};

/// Self-loop weight of the aperiodicity transform used for exact linear solves.
pub const APERIODICITY_MIX: f64 = 0.5;
/// Span tolerance of the exact linear solves.
pub const LINEAR_EPSILON: f64 = 1e-9;
/// Flow-balance tolerance.
pub const FLOW_TOL: f64 = 1e-8;

// ── Occupancy measures ───────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyMeasure {
    /// `x(s,a)` indexed by pair.
    pub x: Vec<f64>,
}

impl OccupancyMeasure {
    /// `w(x) = Σ v(s,a) x(s,a)`.
    pub fn mean_outcome(&self, instance: &MdpInstance) -> Vec<f64> {
        let mut w = vec![0.0; instance.dim()];
        for (pair, &xp) in self.x.iter().enumerate() {
            if xp == 0.0 {
                continue;
            }
            let (s, a) = instance.pair_of(pair);
            for (wk, vk) in w.iter_mut().zip(instance.mean(s, a)) {
                *wk += xp * vk;
            }
        }
        w
    }

    /// `Σ c(s,a) x(s,a)`.
    pub fn linear_value(&self, c: &[f64]) -> f64 {
        dot(&self.x, c)
    }

    /// Largest flow-balance violation over states.
    pub fn flow_residual(&self, instance: &MdpInstance) -> f64 {
        let n = instance.num_states();
        let mut out = vec![0.0; n];
        let mut inflow = vec![0.0; n];
        for (pair, &xp) in self.x.iter().enumerate() {
            let (s, a) = instance.pair_of(pair);
            out[s] += xp;
            for (j, p) in instance.transition(s, a).iter().enumerate() {
                inflow[j] += p * xp;
            }
        }
        out.iter().zip(&inflow).fold(0.0, |m, (o, i)| m.max((o - i).abs()))
    }

    pub fn mass(&self) -> f64 {
        self.x.iter().sum()
    }

    fn mix(&self, other: &OccupancyMeasure, gamma: f64) -> OccupancyMeasure {
        OccupancyMeasure {
            x: self
                .x
                .iter()
                .zip(&other.x)
                .map(|(a, b)| (1.0 - gamma) * a + gamma * b)
                .collect(),
        }
    }
}

fn actions_per_state(instance: &MdpInstance) -> Vec<usize> {
    (0..instance.num_states()).map(|s| instance.num_actions(s)).collect()
}

/// Exact average-reward solve with scalar reward `c`, returning the greedy
/// policy's value-iteration output.
pub fn solve_average_reward(instance: &MdpInstance, c: &[f64]) -> Result<EviResult> {
    if c.len() != instance.num_pairs() {
        return Err(Error::Usage(format!(
            "reward vector has {} entries, instance has {} pairs",
            c.len(),
            instance.num_pairs()
        )));
    }
    let p_hat: Vec<Vec<f64>> = (0..instance.num_pairs())
        .map(|pair| {
            let (s, a) = instance.pair_of(pair);
            instance.transition(s, a).to_vec()
        })
        .collect();
    let rad = vec![vec![0.0; instance.num_states()]; instance.num_pairs()];
    let settings = EviSettings {
        mix: APERIODICITY_MIX,
        ..EviSettings::new(LINEAR_EPSILON)
    };
    evi_with(&actions_per_state(instance), c, &p_hat, &rad, &settings).map_err(|e| match e {
        Error::EviNonConvergent { iterations } => {
            Error::NotCommunicating(format!("value iteration did not converge in {iterations} iterations"))
        }
        other => other,
    })
}

/// Occupancy measure of the best recurrent class of a deterministic policy.
pub fn policy_occupancy(instance: &MdpInstance, policy: &[usize], c: &[f64]) -> Result<OccupancyMeasure> {
    let chain = instance.policy_chain(policy);
    let classes = stationary_distributions(&chain)?;
    let mut best: Option<(f64, OccupancyMeasure)> = None;
    for class in classes {
        let mut x = vec![0.0; instance.num_pairs()];
        for (&s, &pi) in class.states.iter().zip(&class.distribution) {
            x[instance.pair_index(s, policy[s])] = pi;
        }
        let occ = OccupancyMeasure { x };
        let value = occ.linear_value(c);
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, occ));
        }
    }
    best.map(|(_, occ)| occ)
        .ok_or_else(|| Error::Internal("policy chain has no recurrent class".into()))
}

/// `argmax_x Σ c(s,a) x(s,a)` over the occupancy polytope.
pub fn linear_oracle(instance: &MdpInstance, c: &[f64]) -> Result<OccupancyMeasure> {
    let evi = solve_average_reward(instance, c)?;
    policy_occupancy(instance, &evi.policy, c)
}

// ── Frank-Wolfe ──────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq)]
pub struct OfflineSolution {
    /// Best `g(w(x))` over the iterates.
    pub value: f64,
    pub x: OccupancyMeasure,
    pub w: Vec<f64>,
    /// `upper_bound − value`, where `upper_bound = min_i g(w_i) + gap_i`
    /// certifies `opt ≤ upper_bound`.
    pub gap: f64,
    pub upper_bound: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

fn pair_rewards(instance: &MdpInstance, grad: &[f64]) -> Vec<f64> {
    (0..instance.num_pairs())
        .map(|pair| {
            let (s, a) = instance.pair_of(pair);
            dot(grad, instance.mean(s, a))
        })
        .collect()
}

/// Frank-Wolfe over occupancy measures with step `2/(i+2)`.
pub fn solve_offline(instance: &MdpInstance, spec: &RewardSpec, tol: f64, max_iters: usize) -> Result<OfflineSolution> {
    spec.check_dim(instance.dim())?;
    if !(tol > 0.0) {
        return Err(Error::Usage("tolerance must be positive".into()));
    }
    let start_grad = spec.subgradient(&vec![0.0; instance.dim()]);
    let mut x = linear_oracle(instance, &pair_rewards(instance, &start_grad))?;
    let mut w = x.mean_outcome(instance);
    let mut best_value = spec.evaluate(&w);
    let mut best_x = x.clone();
    let mut best_w = w.clone();
    let mut upper = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for i in 0..max_iters {
        iterations = i + 1;
        let grad = spec.subgradient(&w);
        let c = pair_rewards(instance, &grad);
        let vertex = linear_oracle(instance, &c)?;
        let gap = (vertex.linear_value(&c) - x.linear_value(&c)).max(0.0);
        let value = spec.evaluate(&w);
        upper = upper.min(value + gap);
        if value > best_value {
            best_value = value;
            best_x = x.clone();
            best_w = w.clone();
        }
        if gap <= tol || upper - best_value <= tol {
            converged = true;
            break;
        }
        let gamma = 2.0 / (i as f64 + 2.0);
        x = x.mix(&vertex, gamma);
        w = x.mean_outcome(instance);
    }
    let value = spec.evaluate(&w);
    if value > best_value {
        best_value = value;
        best_x = x;
        best_w = w;
    }
    Ok(OfflineSolution {
        value: best_value,
        x: best_x,
        w: best_w,
        gap: (upper - best_value).max(0.0),
        upper_bound: upper,
        iterations,
        converged,
    })
}

// ── Dual certificates ────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq)]
pub struct DualCertificate {
    pub theta: Vec<f64>,
    pub phi: f64,
    pub gamma: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualCheck {
    pub feasible: bool,
    /// `g*(θ) + φ`.
    pub value: f64,
    /// Largest constraint violation (≤ 0 when all constraints hold).
    pub max_violation: f64,
}

pub fn check_dual(instance: &MdpInstance, spec: &RewardSpec, cert: &DualCertificate) -> Result<DualCheck> {
    spec.check_dim(instance.dim())?;
    if cert.theta.len() != instance.dim() || cert.gamma.len() != instance.num_states() {
        return Err(Error::Usage("certificate dimensions do not match the instance".into()));
    }
    let in_ball = spec.in_dual_ball(&cert.theta);
    let mut worst = f64::NEG_INFINITY;
    for s in 0..instance.num_states() {
        for a in 0..instance.num_actions(s) {
            let rhs = -dot(&cert.theta, instance.mean(s, a)) + dot(instance.transition(s, a), &cert.gamma);
            worst = worst.max(rhs - cert.phi - cert.gamma[s]);
        }
    }
    let w = spec.fenchel_argmax(&cert.theta);
    let value = spec.evaluate(&w) + dot(&cert.theta, &w) + cert.phi;
    Ok(DualCheck {
        feasible: in_ball && worst <= FLOW_TOL,
        value,
        max_violation: worst,
    })
}

/// Certificate built from the gradient at `w`: `θ = −∇g(w)` and `(φ, γ)`
/// from an exact average-reward solve with reward `−θᵀv`.
pub fn certificate_at(instance: &MdpInstance, spec: &RewardSpec, w: &[f64]) -> Result<DualCertificate> {
    let theta: Vec<f64> = spec.subgradient(w).iter().map(|g| -g).collect();
    let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
    let evi = solve_average_reward(instance, &pair_rewards(instance, &neg))?;
    Ok(DualCertificate {
        theta,
        phi: evi.gain,
        gamma: evi.bias.iter().map(|b| APERIODICITY_MIX * b).collect(),
    })
}

// ── Knapsack benchmark ───────────────────────────────────────────────────

/// Optimum of the budgeted program `max r(x) s.t. c_k(x) ≤ b`, where
/// coordinate 0 of the outcome is the reward and the rest are consumptions.
///
/// With a single resource the Lagrangian dual `min_{λ ≥ 0} λb + max_x (r − λc)(x)`
/// is minimized by golden-section search; since a zero-cost null action is
/// available the multiplier is at most `1/b`. With several resources the
/// exact-penalty surrogate is maximized by Frank-Wolfe instead.
pub fn knapsack_optimum(instance: &MdpInstance, b: f64) -> Result<f64> {
    let k = instance.dim();
    let spec = make_knapsack_surrogate(k, b)?;
    if k > 2 {
        return Ok(solve_offline(instance, &spec, DEFAULT_TOL, DEFAULT_MAX_ITERS)?.value);
    }
    let dual = |lambda: f64| -> Result<f64> {
        let c = pair_rewards(instance, &[1.0, -lambda]);
        let occ = linear_oracle(instance, &c)?;
        Ok(lambda * b + occ.linear_value(&c))
    };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 2.0 / b);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = dual(x1)?;
    let mut f2 = dual(x2)?;
    while hi - lo > 1e-10 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = dual(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = dual(x2)?;
        }
    }
    let at_zero = dual(0.0)?;
    Ok(f1.min(f2).min(at_zero))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_bandit, build_cycle, build_star};
    use crate::rewards::{make_l1_balance, make_linear, make_quadratic_balance};

    #[test]
    fn cycle_linear_oracle_is_uniform() {
        let inst = build_cycle(4).unwrap();
        let c: Vec<f64> = (0..4).map(|s| inst.mean(s, 0)[0]).collect();
        let occ = linear_oracle(&inst, &c).unwrap();
        for x in &occ.x {
            assert!((x - 0.25).abs() < 1e-12);
        }
        assert!((occ.linear_value(&c) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_reward_gives_valid_measure() {
        let inst = build_star(3, 4).unwrap();
        let occ = linear_oracle(&inst, &vec![0.0; inst.num_pairs()]).unwrap();
        assert!((occ.mass() - 1.0).abs() < 1e-10);
        assert!(occ.flow_residual(&inst) < FLOW_TOL);
    }

    #[test]
    fn star_point_mass_on_rewarding_loop() {
        let inst = build_star(2, 2).unwrap();
        let leaf = inst.state_index("leaf1").unwrap();
        let mut c = vec![0.0; inst.num_pairs()];
        c[inst.pair_index(leaf, 0)] = 1.0;
        let occ = linear_oracle(&inst, &c).unwrap();
        assert!((occ.x[inst.pair_index(leaf, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn offline_optima_of_balance_rewards() {
        let star = build_star(3, 4).unwrap();
        let quad = make_quadratic_balance(3).unwrap();
        let sol = solve_offline(&star, &quad, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-3, "{sol:?}");
        let bandit = build_bandit(3).unwrap();
        let l1 = make_l1_balance(3).unwrap();
        let sol = solve_offline(&bandit, &l1, 1e-4, 20_000).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-3, "{}", sol.value);
    }

    #[test]
    fn cycle_linear_optimum() {
        for d in 2..=6 {
            let inst = build_cycle(d).unwrap();
            let spec = make_linear(vec![1.0]).unwrap();
            let sol = solve_offline(&inst, &spec, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
            assert!((sol.value - 1.0 / d as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn trivial_certificate() {
        let inst = build_star(2, 2).unwrap();
        let quad = make_quadratic_balance(2).unwrap();
        let cert = DualCertificate {
            theta: vec![0.0, 0.0],
            phi: 0.0,
            gamma: vec![0.0; inst.num_states()],
        };
        let check = check_dual(&inst, &quad, &cert).unwrap();
        assert!(check.feasible);
        assert!((check.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_certificate_bounds_primal() {
        let inst = build_star(3, 4).unwrap();
        let quad = make_quadratic_balance(3).unwrap();
        let sol = solve_offline(&inst, &quad, 1e-4, 5_000).unwrap();
        let cert = certificate_at(&inst, &quad, &sol.w).unwrap();
        let check = check_dual(&inst, &quad, &cert).unwrap();
        assert!(check.feasible, "{check:?}");
        assert!(check.value >= sol.value - 1e-6);
    }
}
