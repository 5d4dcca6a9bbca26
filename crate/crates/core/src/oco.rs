//! Online convex optimization oracles producing the gradient sequence `θ_t`.
//!
//! The oracle plays against the losses `ℓ_t(θ) = g*(θ) − θᵀV_t`, whose
//! gradient is `∇g*(θ) − V_t` with `∇g*(θ)` the Fenchel maximizer. Gradients
//! follow the convention `θ ∈ −∂g`, so the learner's scalar reward for outcome
//! `v` is `(−θ)ᵀv`.
//!
//! * Frank-Wolfe: `θ_{t+1} = −∇g(V̄_{1:t})`, `θ_1 = −∇g(0)`. Smooth `g` only.
//! * Tuned gradient descent (Euclidean only):
//!   `θ_{t+1} = Proj_L(θ_t − η_t[∇g*(θ_t) − V_t])`, `η_t = L/(‖1_K‖ t^{2/3})`.
//! * Tuned mirror descent with horizon `T`:
//!   `θ_{t+1} = argmax_{θ ∈ dom F} {−θᵀ y_t − F(θ)}`,
//!   `y_t = η_T Σ_{q≤t} (∇g*(θ_q) − V_q)`, `η_T = L'/(‖1_K‖ T^{2/3})`.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::rewards::{Norm, RewardKind, RewardSpec};

/// Lower clamp on entropic mirror-map coordinates.
pub const ENTROPY_FLOOR: f64 = 1e-300;

// ── Mirror maps ──────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq)]
enum MirrorKind {
    /// `F(θ) = θᵀθ/2` on the Euclidean ball of radius `L`.
    Euclidean,
    /// `F(θ) = L Σ |θ_k| log|θ_k|` on `{σ_k θ_k ≥ 0, Σ|θ_k| = L}`; with a
    /// slack atom the constraint becomes `Σ|θ_k| ≤ L` and the missing mass
    /// `s = L − Σ|θ_k|` contributes `L s log s`.
    Entropic { signs: Vec<f64>, slack: bool },
}

/// A 1-strongly convex regularizer on a subset of the dual ball.
#[derive(Clone, Debug, PartialEq)]
pub struct MirrorMap {
    kind: MirrorKind,
    radius: f64,
    dim: usize,
    range_sq: f64,
}

pub fn make_mirror_map_l2(radius: f64, dim: usize) -> Result<MirrorMap> {
    if !(radius > 0.0) || dim == 0 {
        return usage("mirror map needs L > 0 and K >= 1");
    }
    Ok(MirrorMap {
        kind: MirrorKind::Euclidean,
        radius,
        dim,
        range_sq: radius * radius / 2.0,
    })
}

/// Negative entropy on the nonnegative part of the `ℓ1` sphere of radius `L`.
pub fn make_mirror_map_entropy(radius: f64, dim: usize) -> Result<MirrorMap> {
    make_signed_entropy_map(radius, vec![1.0; dim], false)
}

/// Negative entropy on one orthant of the `ℓ1` sphere (or ball, with `slack`).
pub fn make_signed_entropy_map(radius: f64, signs: Vec<f64>, slack: bool) -> Result<MirrorMap> {
    if !(radius > 0.0) || signs.is_empty() {
        return usage("mirror map needs L > 0 and K >= 1");
    }
    if signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
        return usage("orthant signs must be +1 or -1");
    }
    let dim = signs.len();
    let atoms = dim + usize::from(slack);
    Ok(MirrorMap {
        kind: MirrorKind::Entropic { signs, slack },
        radius,
        dim,
        range_sq: radius * radius * (atoms as f64).ln(),
    })
}

/// Entropic map whose domain contains `−∂g(w)` for every `w` in the box.
pub fn entropy_map_for(spec: &RewardSpec) -> Result<MirrorMap> {
    if spec.dual_norm() != Norm::L1 {
        return Err(Error::Config(format!(
            "entropic mirror map needs an l1 dual norm; {} uses {:?}",
            spec.label(),
            spec.dual_norm()
        )));
    }
    let l = spec.lipschitz;
    match &spec.kind {
        RewardKind::Fairness { .. } => make_signed_entropy_map(l, vec![-1.0; spec.dim], false),
        RewardKind::KnapsackSurrogate { .. } => {
            let mut signs = vec![1.0; spec.dim];
            signs[0] = -1.0;
            make_signed_entropy_map(l, signs, true)
        }
        RewardKind::Linear { c } => {
            let signs = c.iter().map(|&x| if x > 0.0 { -1.0 } else { 1.0 }).collect();
            make_signed_entropy_map(l, signs, false)
        }
        _ => Err(Error::Config(format!("no entropic mirror map for {}", spec.label()))),
    }
}

impl MirrorMap {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `L'² = max F − min F` over the domain.
    pub fn range_sq(&self) -> f64 {
        self.range_sq
    }

    pub fn l_prime(&self) -> f64 {
        self.range_sq.sqrt()
    }

    /// The dual norm in which `F` is 1-strongly convex.
    pub fn norm(&self) -> Norm {
        match self.kind {
            MirrorKind::Euclidean => Norm::L2,
            MirrorKind::Entropic { .. } => Norm::L1,
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, MirrorKind::Euclidean)
    }

    /// `F(θ)`, or `+∞` outside the domain (with tolerance `1e-9`).
    pub fn value(&self, theta: &[f64]) -> f64 {
        const TOL: f64 = 1e-9;
        match &self.kind {
            MirrorKind::Euclidean => {
                let sq: f64 = theta.iter().map(|x| x * x).sum();
                if sq.sqrt() > self.radius + TOL {
                    f64::INFINITY
                } else {
                    sq / 2.0
                }
            }
            MirrorKind::Entropic { signs, slack } => {
                if theta.iter().zip(signs).any(|(t, s)| t * s < -TOL) {
                    return f64::INFINITY;
                }
                let mass: f64 = theta.iter().map(|t| t.abs()).sum();
                let rest = self.radius - mass;
                if rest < -TOL || (!slack && rest.abs() > TOL) {
                    return f64::INFINITY;
                }
                let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
                let mut total: f64 = theta.iter().map(|t| xlogx(t.abs())).sum();
                if *slack {
                    total += xlogx(rest.max(0.0));
                }
                self.radius * total
            }
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        self.value(theta).is_finite()
    }

    /// `argmin F` over the domain.
    pub fn minimizer(&self) -> Vec<f64> {
        self.argmax(&vec![0.0; self.dim])
    }

    /// `argmax_{θ ∈ dom F} {−θᵀz − F(θ)}`.
    pub fn argmax(&self, z: &[f64]) -> Vec<f64> {
        match &self.kind {
            MirrorKind::Euclidean => {
                let neg: Vec<f64> = z.iter().map(|x| -x).collect();
                project_l2(&neg, self.radius)
            }
            MirrorKind::Entropic { signs, slack } => {
                let mut logits: Vec<f64> = z.iter().zip(signs).map(|(zk, s)| -s * zk / self.radius).collect();
                if *slack {
                    logits.push(0.0);
                }
                let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let log_norm = top + logits.iter().map(|a| (a - top).exp()).sum::<f64>().ln();
                signs
                    .iter()
                    .zip(&logits)
                    .map(|(s, a)| s * (self.radius * (a - log_norm).exp()).max(ENTROPY_FLOOR))
                    .collect()
            }
        }
    }
}

/// Euclidean projection onto the ball of radius `radius`.
pub fn project_l2(x: &[f64], radius: f64) -> Vec<f64> {
    let n = Norm::L2.of(x);
    if n <= radius {
        x.to_vec()
    } else {
        x.iter().map(|v| v * radius / n).collect()
    }
}

// ── Update rules ─────────────────────────────────────────────────────────

/// `θ_{t+1} = −∇g(V̄_{1:t})`.
pub fn fw_update(spec: &RewardSpec, vbar: &[f64]) -> Result<Vec<f64>> {
    if !spec.is_smooth() {
        return Err(Error::Config(format!(
            "Frank-Wolfe needs a smooth reward; {} is not",
            spec.label()
        )));
    }
    Ok(spec.subgradient(vbar).iter().map(|g| -g).collect())
}

pub fn tgd_step_size(spec: &RewardSpec, t: u64) -> f64 {
    spec.lipschitz / (spec.ones_norm() * (t as f64).powf(2.0 / 3.0))
}

/// `θ_{t+1} = Proj_L(θ_t − η_t[∇g*(θ_t) − V_t])`.
pub fn tgd_update(spec: &RewardSpec, theta: &[f64], outcome: &[f64], t: u64) -> Result<Vec<f64>> {
    if spec.norm != Norm::L2 {
        return Err(Error::Config(format!(
            "tuned gradient descent needs an l2 reward norm; {} uses {:?}",
            spec.label(),
            spec.norm
        )));
    }
    if t == 0 {
        return usage("time index starts at 1");
    }
    let (_, w) = spec.fenchel(theta)?;
    let eta = tgd_step_size(spec, t);
    let raw: Vec<f64> = theta
        .iter()
        .zip(w.iter().zip(outcome))
        .map(|(th, (wk, vk))| th - eta * (wk - vk))
        .collect();
    Ok(project_l2(&raw, spec.lipschitz))
}

pub fn tmd_step_size(map: &MirrorMap, spec: &RewardSpec, horizon: u64) -> f64 {
    map.l_prime() / (spec.ones_norm() * (horizon as f64).powf(2.0 / 3.0))
}

/// `θ_{t+1}` from the accumulated unscaled losses `Σ_q (∇g*(θ_q) − V_q)`.
pub fn tmd_update(map: &MirrorMap, accumulated: &[f64], horizon: u64, spec: &RewardSpec) -> Vec<f64> {
    let eta = tmd_step_size(map, spec, horizon);
    let y: Vec<f64> = accumulated.iter().map(|z| eta * z).collect();
    map.argmax(&y)
}

// ── Oracle state machine ─────────────────────────────────────────────────

/// Oracle selector as used in configuration files and on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    Fw,
    Tgd,
    TmdL2,
    TmdEnt,
}

impl OracleChoice {
    pub fn parse(keyword: &str) -> Result<Self> {
        match keyword {
            "fw" => Ok(Self::Fw),
            "tgd" => Ok(Self::Tgd),
            "tmd:l2" => Ok(Self::TmdL2),
            "tmd:ent" => Ok(Self::TmdEnt),
            other => usage(format!("unknown oracle '{other}' (fw, tgd, tmd:l2, tmd:ent)")),
        }
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            Self::Fw => "fw",
            Self::Tgd => "tgd",
            Self::TmdL2 => "tmd:l2",
            Self::TmdEnt => "tmd:ent",
        }
    }

    pub fn is_tmd(&self) -> bool {
        matches!(self, Self::TmdL2 | Self::TmdEnt)
    }

    /// The mirror map a TMD choice uses for `spec`.
    pub fn mirror_map(&self, spec: &RewardSpec) -> Result<Option<MirrorMap>> {
        match self {
            Self::TmdL2 => {
                if spec.norm != Norm::L2 {
                    return Err(Error::Config(format!(
                        "tmd:l2 needs an l2 reward norm; {} uses {:?}",
                        spec.label(),
                        spec.norm
                    )));
                }
                make_mirror_map_l2(spec.lipschitz, spec.dim).map(Some)
            }
            Self::TmdEnt => entropy_map_for(spec).map(Some),
            _ => Ok(None),
        }
    }
}

/// Which update rule an oracle runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    FrankWolfe,
    GradientDescent,
    MirrorDescent,
}

#[derive(Clone, Debug)]
enum Rule {
    FrankWolfe,
    Tgd,
    Tmd {
        map: MirrorMap,
        horizon: u64,
        accumulated: Vec<f64>,
    },
}

/// Single-run oracle holding the current gradient `θ_t`.
#[derive(Clone, Debug)]
pub struct OcoOracle {
    spec: RewardSpec,
    rule: Rule,
    theta: Vec<f64>,
}

impl OcoOracle {
    pub fn frank_wolfe(spec: &RewardSpec) -> Result<Self> {
        let theta = fw_update(spec, &vec![0.0; spec.dim])?;
        Ok(Self {
            spec: spec.clone(),
            rule: Rule::FrankWolfe,
            theta,
        })
    }

    /// TGD from `theta1`, or from `−∇g(0)` when none is given.
    pub fn tgd(spec: &RewardSpec, theta1: Option<Vec<f64>>) -> Result<Self> {
        if spec.norm != Norm::L2 {
            return Err(Error::Config(format!(
                "tuned gradient descent needs an l2 reward norm; {} uses {:?}",
                spec.label(),
                spec.norm
            )));
        }
        let theta = match theta1 {
            Some(th) => {
                if th.len() != spec.dim || !spec.in_dual_ball(&th) {
                    return usage("initial gradient must lie in the dual ball");
                }
                th
            }
            None => spec.subgradient(&vec![0.0; spec.dim]).iter().map(|g| -g).collect(),
        };
        Ok(Self {
            spec: spec.clone(),
            rule: Rule::Tgd,
            theta,
        })
    }

    pub fn tmd(spec: &RewardSpec, map: MirrorMap, horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return usage("mirror descent needs a horizon T >= 1");
        }
        if map.dim() != spec.dim {
            return Err(Error::Config("mirror map dimension does not match the reward".into()));
        }
        Ok(Self {
            spec: spec.clone(),
            theta: map.minimizer(),
            rule: Rule::Tmd {
                map,
                horizon,
                accumulated: vec![0.0; spec.dim],
            },
        })
    }

    /// Builds the oracle for a selector; TMD needs `horizon`.
    pub fn from_choice(
        choice: &OracleChoice,
        spec: &RewardSpec,
        horizon: Option<u64>,
        theta1: Option<Vec<f64>>,
    ) -> Result<Self> {
        match choice {
            OracleChoice::Fw => Self::frank_wolfe(spec),
            OracleChoice::Tgd => Self::tgd(spec, theta1),
            OracleChoice::TmdL2 | OracleChoice::TmdEnt => {
                let map = choice.mirror_map(spec)?.expect("tmd has a map");
                let horizon = horizon.ok_or_else(|| Error::Usage("mirror descent needs a horizon T".into()))?;
                Self::tmd(spec, map, horizon)
            }
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn kind(&self) -> OracleKind {
        match self.rule {
            Rule::FrankWolfe => OracleKind::FrankWolfe,
            Rule::Tgd => OracleKind::GradientDescent,
            Rule::Tmd { .. } => OracleKind::MirrorDescent,
        }
    }

    pub fn spec(&self) -> &RewardSpec {
        &self.spec
    }

    /// Norm used to measure gradient drift.
    pub fn drift_norm(&self) -> Norm {
        self.spec.dual_norm()
    }

    pub fn mirror_map(&self) -> Option<&MirrorMap> {
        match &self.rule {
            Rule::Tmd { map, .. } => Some(map),
            _ => None,
        }
    }

    /// Horizon of a mirror-descent oracle.
    pub fn horizon(&self) -> Option<u64> {
        match &self.rule {
            Rule::Tmd { horizon, .. } => Some(*horizon),
            _ => None,
        }
    }

    /// Consumes step `t` (outcome `V_t`, running average `V̄_{1:t}`) and
    /// advances to `θ_{t+1}`.
    pub fn update(&mut self, t: u64, outcome: &[f64], vbar: &[f64]) -> Result<&[f64]> {
        let next = match &mut self.rule {
            Rule::FrankWolfe => fw_update(&self.spec, vbar)?,
            Rule::Tgd => tgd_update(&self.spec, &self.theta, outcome, t)?,
            Rule::Tmd {
                map,
                horizon,
                accumulated,
            } => {
                let w = self.spec.fenchel_argmax(&self.theta);
                for ((acc, wk), vk) in accumulated.iter_mut().zip(&w).zip(outcome) {
                    *acc += wk - vk;
                }
                tmd_update(map, accumulated, *horizon, &self.spec)
            }
        };
        self.theta = next;
        Ok(&self.theta)
    }
}
