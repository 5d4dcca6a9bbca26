//! Concave global reward functions on `[0,1]^K`.
//!
//! A [`RewardSpec`] bundles a concave `g` with the primal norm it is measured
//! in, its Lipschitz constant `L`, an optional smoothness constant `β`, a
//! (super)gradient oracle and the Fenchel-type conjugate
//!
//! ```text
//! g*(θ) = max_{w ∈ [0,1]^K} { g(w) + θᵀw }
//! ```
//!
//! together with a maximizer. Where the maximizer is not unique the smallest
//! one (coordinate-wise or lexicographically) is returned.
//!
//! For the target-set objective the stated gradient in some references carries
//! an overall minus sign; here `subgradient` always returns the true gradient of
//! `g`, `∂g/∂w_k = (2/K)·max(0, ζ_k − w_k)`, and the learning oracles negate it.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// Slack allowed when checking dual-ball membership.
pub const BALL_SLACK: f64 = 1e-9;

// ── Norms ────────────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    pub fn of(self, x: &[f64]) -> f64 {
        match self {
            Norm::L1 => x.iter().map(|v| v.abs()).sum(),
            Norm::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Norm::Linf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn dual(self) -> Norm {
        match self {
            Norm::L1 => Norm::Linf,
            Norm::L2 => Norm::L2,
            Norm::Linf => Norm::L1,
        }
    }

    /// `‖1_K‖` in this norm.
    pub fn ones(self, k: usize) -> f64 {
        match self {
            Norm::L1 => k as f64,
            Norm::L2 => (k as f64).sqrt(),
            Norm::Linf => 1.0,
        }
    }

    pub fn distance(self, x: &[f64], y: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.of(&diff)
    }
}

// ── Reward families ──────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq)]
pub enum RewardKind {
    /// `1 − Σ(w_k − 1/K)²/2 + tilt·(Σ w_k − 1)`.
    QuadraticBalance { tilt: f64 },
    /// `1 − Σ|w_k − 1/K|/2`.
    L1Balance,
    /// `1 − (1/K)Σ max(0, ζ_k − w_k)²`.
    TargetSe { zeta: Vec<f64> },
    /// Sum of the `κ` smallest coordinates.
    Fairness { kappa: usize },
    /// `(1/log S) Σ P_s log(1/(P_s + μ))`.
    SmoothedEntropy { mu: f64 },
    /// `r − (2/b)·max_k (c_k − b)^+` on `w = (r, c_1, …, c_{K−1})`.
    KnapsackSurrogate { b: f64 },
    /// `cᵀw`.
    Linear { c: Vec<f64> },
}

/// A concave reward with its analytic constants.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardSpec {
    pub kind: RewardKind,
    pub dim: usize,
    /// Primal norm; gradients live in the dual ball of radius `lipschitz`.
    pub norm: Norm,
    pub lipschitz: f64,
    /// Present iff `g` is `β`-smooth.
    pub beta: Option<f64>,
}

pub fn make_quadratic_balance(k: usize) -> Result<RewardSpec> {
    make_quadratic(k, 0.0)
}

/// Quadratic balance plus `Σ w_k − 1`: `g(w) = Σ_k [w_k − (w_k − 1/K)²/2]`.
///
/// Same maximizer value on the simplex as the plain balance reward, but
/// penalizes average outcomes of small total mass, e.g. time spent travelling.
pub fn make_tilted_balance(k: usize) -> Result<RewardSpec> {
    make_quadratic(k, 1.0)
}

fn make_quadratic(k: usize, tilt: f64) -> Result<RewardSpec> {
    if k == 0 {
        return usage("K must be positive");
    }
    let center = 1.0 / k as f64 + tilt;
    let per_coord = center.abs().max((center - 1.0).abs());
    Ok(RewardSpec {
        kind: RewardKind::QuadraticBalance { tilt },
        dim: k,
        norm: Norm::L2,
        lipschitz: (k as f64).sqrt() * per_coord,
        beta: Some(1.0),
    })
}

pub fn make_l1_balance(k: usize) -> Result<RewardSpec> {
    if k == 0 {
        return usage("K must be positive");
    }
    Ok(RewardSpec {
        kind: RewardKind::L1Balance,
        dim: k,
        norm: Norm::L1,
        lipschitz: 0.5,
        beta: None,
    })
}

pub fn make_target_se(zeta: Vec<f64>) -> Result<RewardSpec> {
    let k = zeta.len();
    if k == 0 {
        return usage("target vector must be nonempty");
    }
    if zeta.iter().any(|z| !(0.0..=1.0).contains(z)) {
        return usage("targets must lie in [0,1]");
    }
    let kf = k as f64;
    Ok(RewardSpec {
        kind: RewardKind::TargetSe { zeta },
        dim: k,
        norm: Norm::L2,
        lipschitz: 2.0 / kf.sqrt(),
        beta: Some(2.0 / kf),
    })
}

pub fn make_fairness(k: usize, kappa: usize) -> Result<RewardSpec> {
    if kappa == 0 || kappa > k {
        return usage(format!("kappa must lie in 1..={k}, got {kappa}"));
    }
    Ok(RewardSpec {
        kind: RewardKind::Fairness { kappa },
        dim: k,
        norm: Norm::Linf,
        lipschitz: kappa as f64,
        beta: None,
    })
}

/// Smoothed entropy over `S ≥ 2` states.
///
/// The derivative of `p ↦ −p log(p + μ)` ranges over
/// `[−log(1+μ) − 1/(1+μ), log(1/μ)]` and its second derivative is bounded by
/// `2/μ`; the constants below are the exact suprema after normalization.
pub fn make_smoothed_entropy(s: usize, mu: f64) -> Result<RewardSpec> {
    if s < 2 {
        return usage("smoothed entropy needs S >= 2");
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return usage(format!("mu must lie in (0,1], got {mu}"));
    }
    let log_s = (s as f64).ln();
    let upper = (1.0 / mu).ln();
    let lower = (1.0 + mu).ln() + 1.0 / (1.0 + mu);
    Ok(RewardSpec {
        kind: RewardKind::SmoothedEntropy { mu },
        dim: s,
        norm: Norm::L1,
        lipschitz: upper.max(lower) / log_s,
        beta: Some(2.0 / (mu * log_s)),
    })
}

/// Surrogate for a reward coordinate plus `K − 1` budget coordinates.
pub fn make_knapsack_surrogate(k: usize, b: f64) -> Result<RewardSpec> {
    if k < 2 {
        return usage("knapsack surrogate needs K >= 2 (reward plus at least one resource)");
    }
    if !(b > 0.0 && b < 1.0) {
        return usage(format!("budget b must lie in (0,1), got {b}"));
    }
    Ok(RewardSpec {
        kind: RewardKind::KnapsackSurrogate { b },
        dim: k,
        norm: Norm::Linf,
        lipschitz: 1.0 + 2.0 / b,
        beta: None,
    })
}

/// Linear reward `cᵀw`, measured in `‖·‖_∞` so gradients live in an `ℓ1` ball.
pub fn make_linear(c: Vec<f64>) -> Result<RewardSpec> {
    if c.is_empty() {
        return usage("coefficient vector must be nonempty");
    }
    let l = Norm::L1.of(&c);
    if !(l > 0.0) || !l.is_finite() {
        return usage("coefficient vector must be nonzero and finite");
    }
    Ok(RewardSpec {
        dim: c.len(),
        kind: RewardKind::Linear { c },
        norm: Norm::Linf,
        lipschitz: l,
        beta: Some(0.0),
    })
}

impl RewardSpec {
    pub fn dual_norm(&self) -> Norm {
        self.norm.dual()
    }

    /// `‖1_K‖` in the primal norm.
    pub fn ones_norm(&self) -> f64 {
        self.norm.ones(self.dim)
    }

    pub fn is_smooth(&self) -> bool {
        self.beta.is_some()
    }

    /// Short keyword used in file names and tables.
    pub fn label(&self) -> String {
        match &self.kind {
            RewardKind::QuadraticBalance { tilt } if *tilt == 0.0 => format!("quad:{}", self.dim),
            RewardKind::QuadraticBalance { .. } => format!("tquad:{}", self.dim),
            RewardKind::L1Balance => format!("l1:{}", self.dim),
            RewardKind::TargetSe { .. } => format!("se:{}", self.dim),
            RewardKind::Fairness { kappa } => format!("fair:{},{}", self.dim, kappa),
            RewardKind::SmoothedEntropy { mu } => format!("ent:{},{}", self.dim, mu),
            RewardKind::KnapsackSurrogate { b } => format!("knap:{},{}", self.dim, b),
            RewardKind::Linear { .. } => format!("linear:{}", self.dim),
        }
    }

    pub fn evaluate(&self, w: &[f64]) -> f64 {
        debug_assert_eq!(w.len(), self.dim);
        let kf = self.dim as f64;
        match &self.kind {
            RewardKind::QuadraticBalance { tilt } => {
                let sq: f64 = w.iter().map(|x| (x - 1.0 / kf).powi(2)).sum();
                let mass: f64 = w.iter().sum();
                1.0 - sq / 2.0 + tilt * (mass - 1.0)
            }
            RewardKind::L1Balance => 1.0 - w.iter().map(|x| (x - 1.0 / kf).abs()).sum::<f64>() / 2.0,
            RewardKind::TargetSe { zeta } => {
                let sq: f64 = zeta.iter().zip(w).map(|(z, x)| (z - x).max(0.0).powi(2)).sum();
                1.0 - sq / kf
            }
            RewardKind::Fairness { kappa } => {
                let mut sorted = w.to_vec();
                sorted.sort_by(f64::total_cmp);
                sorted[..*kappa].iter().sum()
            }
            RewardKind::SmoothedEntropy { mu } => {
                let log_s = kf.ln();
                w.iter().map(|p| p * (1.0 / (p + mu)).ln()).sum::<f64>() / log_s
            }
            RewardKind::KnapsackSurrogate { b } => w[0] - (2.0 / b) * max_violation(&w[1..], *b).0,
            RewardKind::Linear { c } => c.iter().zip(w).map(|(a, x)| a * x).sum(),
        }
    }

    /// A supergradient of `g` at `w` (the gradient when `g` is smooth).
    pub fn subgradient(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.dim);
        let kf = self.dim as f64;
        match &self.kind {
            RewardKind::QuadraticBalance { tilt } => w.iter().map(|x| 1.0 / kf - x + tilt).collect(),
            RewardKind::L1Balance => w
                .iter()
                .map(|x| {
                    let d = x - 1.0 / kf;
                    if d > 0.0 {
                        -0.5
                    } else if d < 0.0 {
                        0.5
                    } else {
                        0.0
                    }
                })
                .collect(),
            RewardKind::TargetSe { zeta } => zeta.iter().zip(w).map(|(z, x)| (2.0 / kf) * (z - x).max(0.0)).collect(),
            RewardKind::Fairness { kappa } => {
                let mut g = vec![0.0; self.dim];
                for i in smallest_indices(w, *kappa) {
                    g[i] = 1.0;
                }
                g
            }
            RewardKind::SmoothedEntropy { mu } => {
                let log_s = kf.ln();
                w.iter()
                    .map(|p| ((1.0 / (p + mu)).ln() - p / (p + mu)) / log_s)
                    .collect()
            }
            RewardKind::KnapsackSurrogate { b } => {
                let mut g = vec![0.0; self.dim];
                g[0] = 1.0;
                let (viol, idx) = max_violation(&w[1..], *b);
                if viol > 0.0 {
                    g[1 + idx] = -2.0 / b;
                }
                g
            }
            RewardKind::Linear { c } => c.clone(),
        }
    }

    /// `(g*(θ), argmax w)`, rejecting `θ` outside the dual ball.
    pub fn fenchel(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        if theta.len() != self.dim {
            return usage(format!("theta has dimension {} != {}", theta.len(), self.dim));
        }
        let n = self.dual_norm().of(theta);
        if !(n <= self.lipschitz + BALL_SLACK) {
            return usage(format!(
                "theta outside the dual ball: norm {n} > L = {}",
                self.lipschitz
            ));
        }
        let w = self.fenchel_argmax(theta);
        let value = self.evaluate(&w) + dot(theta, &w);
        Ok((value, w))
    }

    /// Smallest maximizer of `g(w) + θᵀw` over the box, without the ball check.
    pub fn fenchel_argmax(&self, theta: &[f64]) -> Vec<f64> {
        let kf = self.dim as f64;
        match &self.kind {
            RewardKind::QuadraticBalance { tilt } => {
                theta.iter().map(|t| (1.0 / kf + tilt + t).clamp(0.0, 1.0)).collect()
            }
            RewardKind::L1Balance => theta
                .iter()
                .map(|&t| {
                    let f = |x: f64| -(x - 1.0 / kf).abs() / 2.0 + t * x;
                    best_vertex(&[0.0, 1.0 / kf, 1.0], f)
                })
                .collect(),
            RewardKind::TargetSe { zeta } => zeta
                .iter()
                .zip(theta)
                .map(|(&z, &t)| {
                    if t > 0.0 {
                        1.0
                    } else if t == 0.0 {
                        z
                    } else {
                        (z + kf * t / 2.0).max(0.0)
                    }
                })
                .collect(),
            RewardKind::Fairness { kappa } => fairness_argmax(theta, *kappa),
            RewardKind::SmoothedEntropy { mu } => {
                let log_s = kf.ln();
                theta.iter().map(|&t| entropy_coord_argmax(t, *mu, log_s)).collect()
            }
            RewardKind::KnapsackSurrogate { b } => {
                let mut w = vec![0.0; self.dim];
                if 1.0 + theta[0] > 0.0 {
                    w[0] = 1.0;
                }
                let positive: f64 = theta[1..].iter().filter(|&&t| t > 0.0).sum();
                let level = if positive > 2.0 / b { 1.0 - b } else { 0.0 };
                for (wk, &t) in w[1..].iter_mut().zip(&theta[1..]) {
                    if t > 0.0 {
                        *wk = b + level;
                    }
                }
                w
            }
            RewardKind::Linear { c } => c
                .iter()
                .zip(theta)
                .map(|(a, t)| if a + t > 0.0 { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    /// Whether `g` maps `[0,1]^K` into `[0,1]`.
    pub fn maps_box_into_unit(&self) -> bool {
        match &self.kind {
            RewardKind::QuadraticBalance { tilt } => *tilt == 0.0 && self.dim <= 3,
            RewardKind::L1Balance | RewardKind::TargetSe { .. } => true,
            RewardKind::Fairness { kappa } => *kappa == 1,
            RewardKind::SmoothedEntropy { .. } | RewardKind::KnapsackSurrogate { .. } => false,
            RewardKind::Linear { c } => c.iter().all(|&x| x >= 0.0) && c.iter().sum::<f64>() <= 1.0,
        }
    }

    /// Checks that `θ` lies in the dual ball of radius `L` (with slack).
    pub fn in_dual_ball(&self, theta: &[f64]) -> bool {
        self.dual_norm().of(theta) <= self.lipschitz + BALL_SLACK
    }

    pub fn check_dim(&self, k: usize) -> Result<()> {
        if k != self.dim {
            return Err(Error::Config(format!(
                "reward expects K = {} but the instance has K = {k}",
                self.dim
            )));
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ── Helpers ──────────────────────────────────────────────────────────────

/// `(max_k (c_k − b)^+, lowest maximizing k)`.
fn max_violation(c: &[f64], b: f64) -> (f64, usize) {
    let mut best = 0.0;
    let mut idx = 0;
    for (k, &ck) in c.iter().enumerate() {
        let v = (ck - b).max(0.0);
        if v > best {
            best = v;
            idx = k;
        }
    }
    (best, idx)
}

/// Indices of the `kappa` smallest entries, ties broken by lowest index.
fn smallest_indices(w: &[f64], kappa: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&i, &j| w[i].total_cmp(&w[j]).then(i.cmp(&j)));
    order.truncate(kappa);
    order
}

fn best_vertex(candidates: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut best_x = candidates[0];
    let mut best_v = f(best_x);
    for &x in &candidates[1..] {
        let v = f(x);
        if v > best_v {
            best_v = v;
            best_x = x;
        }
    }
    best_x
}

/// The sum of the `κ` smallest coordinates is the extension of a supermodular
/// set function, so `g + θᵀw` is maximized at a 0/1 vector: for each size `j`
/// the best set holds the `j` largest `θ`. Smallest `j` wins ties.
fn fairness_argmax(theta: &[f64], kappa: usize) -> Vec<f64> {
    let k = theta.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| theta[j].total_cmp(&theta[i]).then(i.cmp(&j)));
    let mut best_j = 0;
    let mut best_v = 0.0;
    let mut prefix = 0.0;
    for j in 1..=k {
        prefix += theta[order[j - 1]];
        let v = (kappa + j).saturating_sub(k) as f64 + prefix;
        if v > best_v {
            best_v = v;
            best_j = j;
        }
    }
    let mut w = vec![0.0; k];
    for &i in &order[..best_j] {
        w[i] = 1.0;
    }
    w
}

/// Maximizes `−p log(p + μ)/log S + θ p` over `[0,1]`; the derivative is
/// strictly decreasing so bisection on its sign is exact to machine precision.
fn entropy_coord_argmax(theta: f64, mu: f64, log_s: f64) -> f64 {
    let deriv = |p: f64| (-(p + mu).ln() - p / (p + mu)) / log_s + theta;
    if deriv(0.0) <= 0.0 {
        return 0.0;
    }
    if deriv(1.0) >= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if deriv(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn quadratic_examples() {
        let g = make_quadratic_balance(2).unwrap();
        assert!(close(g.evaluate(&[0.5, 0.5]), 1.0, 1e-15));
        assert_eq!(g.subgradient(&[0.5, 0.5]), vec![0.0, 0.0]);
        let d = g.subgradient(&[0.7, 0.3]);
        assert!(close(d[0], -0.2, 1e-12) && close(d[1], 0.2, 1e-12));
        assert!(close(g.evaluate(&[1.0, 1.0]), 0.75, 1e-15));
        let (_, w) = g.fenchel(&[0.2, -0.2]).unwrap();
        assert!(close(w[0], 0.7, 1e-12) && close(w[1], 0.3, 1e-12));
        assert!(close(g.lipschitz, 2f64.sqrt() * 0.5, 1e-15));
        let (v, _) = g.fenchel(&[0.0, 0.0]).unwrap();
        assert!(close(v, 1.0, 1e-15));
    }

    #[test]
    fn l1_examples() {
        let g = make_l1_balance(2).unwrap();
        assert!(close(g.evaluate(&[0.5, 0.5]), 1.0, 1e-15));
        assert!(close(g.evaluate(&[1.0, 0.0]), 0.5, 1e-15));
        assert_eq!(g.subgradient(&[0.5, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn target_se_examples() {
        let g = make_target_se(vec![0.3, 0.4]).unwrap();
        assert!(close(g.evaluate(&[0.5, 0.4]), 1.0, 1e-15));
        assert_eq!(g.subgradient(&[0.5, 0.4]), vec![0.0, 0.0]);
        let g1 = make_target_se(vec![1.0]).unwrap();
        assert!(close(g1.evaluate(&[0.0]), 0.0, 1e-15));
        let g4 = make_target_se(vec![1.0; 4]).unwrap();
        assert!(close(g4.evaluate(&[0.0; 4]), 0.0, 1e-15));
        assert_eq!(g4.subgradient(&[0.0; 4]), vec![0.5; 4]);
    }

    #[test]
    fn fairness_examples() {
        let g = make_fairness(3, 2).unwrap();
        assert!(close(g.evaluate(&[0.9, 0.1, 0.4]), 0.5, 1e-15));
        assert_eq!(g.subgradient(&[0.9, 0.1, 0.4]), vec![0.0, 1.0, 1.0]);
        let full = make_fairness(3, 3).unwrap();
        assert!(close(full.evaluate(&[0.2, 0.3, 0.4]), 0.9, 1e-15));
        let min = make_fairness(3, 1).unwrap();
        assert!(close(min.evaluate(&[0.2, 0.05, 0.4]), 0.05, 1e-15));
        assert!(make_fairness(3, 0).is_err());
    }

    #[test]
    fn entropy_examples() {
        let g = make_smoothed_entropy(2, 1.0).unwrap();
        let v = g.evaluate(&[0.5, 0.5]);
        assert!(close(v, (1.0f64 / 1.5).ln() / 2f64.ln(), 1e-12));
        assert!(close(v, -0.585, 1e-3));
        let g = make_smoothed_entropy(4, 1e-9).unwrap();
        assert!(close(g.evaluate(&[0.25; 4]), 1.0, 1e-7));
        let mu = 0.3;
        let g = make_smoothed_entropy(3, mu).unwrap();
        let p = 1.0 - mu;
        let d = g.subgradient(&[p, 0.1, 0.2]);
        assert!(close(d[0], -p / 3f64.ln(), 1e-12));
        let small = make_smoothed_entropy(3, 0.1).unwrap();
        assert!(close(small.lipschitz, 10f64.ln() / 3f64.ln(), 1e-15));
    }

    #[test]
    fn knapsack_examples() {
        let g = make_knapsack_surrogate(3, 0.25).unwrap();
        assert!(close(g.evaluate(&[0.6, 0.1, 0.2]), 0.6, 1e-15));
        assert!(close(g.evaluate(&[1.0, 0.25, 0.25]), 1.0, 1e-15));
        let g = make_knapsack_surrogate(2, 0.5).unwrap();
        assert!(close(g.evaluate(&[0.4, 0.7]), -0.4, 1e-12));
        let d = g.subgradient(&[0.4, 0.7]);
        assert_eq!(d, vec![1.0, -4.0]);
        assert!(close(Norm::L1.of(&d), g.lipschitz, 1e-15));
        assert_eq!(g.subgradient(&[0.4, 0.5]), vec![1.0, 0.0]);
    }

    #[test]
    fn knapsack_ties_pick_lowest_resource() {
        let g = make_knapsack_surrogate(3, 0.5).unwrap();
        assert_eq!(g.subgradient(&[0.0, 0.8, 0.8]), vec![1.0, -4.0, 0.0]);
    }

    #[test]
    fn linear_fenchel() {
        let g = make_linear(vec![0.5, -0.25, 0.25]).unwrap();
        let theta = [0.1, 0.3, -0.5];
        let (v, w) = g.fenchel(&theta).unwrap();
        assert_eq!(w, vec![1.0, 1.0, 0.0]);
        assert!(close(v, 0.6 + 0.05, 1e-15));
    }

    #[test]
    fn fenchel_rejects_outside_ball() {
        let g = make_quadratic_balance(2).unwrap();
        assert!(matches!(g.fenchel(&[1.0, 1.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn fairness_fenchel_matches_vertex_enumeration() {
        let g = make_fairness(4, 2).unwrap();
        let theta = [0.3, -0.2, 0.9, -0.5];
        let (v, _) = g.fenchel(&theta).unwrap();
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..16 {
            let w: Vec<f64> = (0..4).map(|i| ((mask >> i) & 1) as f64).collect();
            best = best.max(g.evaluate(&w) + dot(&theta, &w));
        }
        assert!(close(v, best, 1e-12));
    }

    #[test]
    fn norms() {
        let x = [3.0, -4.0];
        assert_eq!(Norm::L1.of(&x), 7.0);
        assert_eq!(Norm::L2.of(&x), 5.0);
        assert_eq!(Norm::Linf.of(&x), 4.0);
        assert_eq!(Norm::L1.dual(), Norm::Linf);
        assert_eq!(Norm::Linf.ones(5), 1.0);
        assert_eq!(Norm::L1.ones(5), 5.0);
    }
}
