//! Independent oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use tocucrl::mdp::{diameter, seeded_rng, stationary_distributions, Action, MdpInstance, OutcomeModel};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn load_fixture(name: &str) -> MdpInstance {
    MdpInstance::from_json(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

// ── Policy enumeration ───────────────────────────────────────────────────

/// Best average reward over all deterministic stationary policies and all
/// of their recurrent classes.
pub fn enumerate_best_gain(instance: &MdpInstance, c: &[f64]) -> f64 {
    let n = instance.num_states();
    let mut policy = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    loop {
        let chain = instance.policy_chain(&policy);
        for class in stationary_distributions(&chain).unwrap() {
            let gain: f64 = class
                .states
                .iter()
                .zip(&class.distribution)
                .map(|(&s, &pi)| pi * c[instance.pair_index(s, policy[s])])
                .sum();
            best = best.max(gain);
        }
        let mut s = 0;
        loop {
            if s == n {
                return best;
            }
            policy[s] += 1;
            if policy[s] < instance.num_actions(s) {
                break;
            }
            policy[s] = 0;
            s += 1;
        }
    }
}

// ── Box ∩ simplex by vertex enumeration ──────────────────────────────────

/// `max uᵀp` over `{p ∈ Δ : max(0, p̂ − r) ≤ p ≤ min(1, p̂ + r)}`.
///
/// Every vertex has at most one coordinate strictly inside its interval, so
/// enumerating the free coordinate and a lower/upper choice for the others
/// covers all of them.
pub fn brute_force_box_simplex(u: &[f64], p_hat: &[f64], rad: &[f64]) -> Option<f64> {
    let n = u.len();
    let lo: Vec<f64> = p_hat.iter().zip(rad).map(|(p, r)| (p - r).max(0.0)).collect();
    let hi: Vec<f64> = p_hat.iter().zip(rad).map(|(p, r)| (p + r).min(1.0)).collect();
    let mut best: Option<f64> = None;
    for free in 0..n {
        for mask in 0u32..(1 << (n - 1)) {
            let mut p = vec![0.0; n];
            let mut bit = 0;
            for i in 0..n {
                if i == free {
                    continue;
                }
                p[i] = if mask >> bit & 1 == 1 { hi[i] } else { lo[i] };
                bit += 1;
            }
            let rest: f64 = p.iter().sum();
            let x = 1.0 - rest;
            if x < lo[free] - 1e-12 || x > hi[free] + 1e-12 {
                continue;
            }
            p[free] = x;
            let value: f64 = u.iter().zip(&p).map(|(a, b)| a * b).sum();
            best = Some(best.map_or(value, |b: f64| b.max(value)));
        }
    }
    best
}

// ── Random instances ─────────────────────────────────────────────────────

fn random_distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen::<f64>() })
            .collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return raw.iter().map(|x| x / total).collect();
        }
    }
}

/// Random communicating MDP with one outcome coordinate.
pub fn random_communicating(seed: u64, max_states: usize, max_actions: usize) -> MdpInstance {
    let mut rng = seeded_rng(seed);
    loop {
        let n = rng.gen_range(1..=max_states);
        let actions: Vec<Vec<Action>> = (0..n)
            .map(|_| {
                (0..rng.gen_range(1..=max_actions))
                    .map(|a| {
                        Action::new(
                            format!("a{a}"),
                            random_distribution(&mut rng, n),
                            OutcomeModel::Bernoulli(vec![rng.gen()]),
                        )
                    })
                    .collect()
            })
            .collect();
        let names = (0..n).map(|s| format!("s{s}")).collect();
        let inst = MdpInstance::new(names, 0, 1, actions).unwrap();
        if diameter(&inst).is_ok() {
            return inst;
        }
    }
}

pub fn random_pair_rewards(seed: u64, pairs: usize) -> Vec<f64> {
    let mut rng = seeded_rng(seed ^ 0x5eed);
    (0..pairs).map(|_| rng.gen_range(-1.0..1.0)).collect()
}
