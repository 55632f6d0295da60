//! Named algorithm presets and the annealed interpolation algorithm.
//!
//! Each classic training algorithm is one point `(R, alpha, beta)` of the
//! engine:
//!
//! | preset               | reward                     | alpha | beta |
//! |----------------------|----------------------------|-------|------|
//! | mle                  | delta                      | 0     | 1    |
//! | raml                 | task reward                | 0     | tau  |
//! | spg                  | task reward                | 1     | 0    |
//! | unigram_noising      | unigram-noise reward       | 0     | 1    |
//! | single_token_noising | single-token relaxed delta | 0     | 1    |
//!
//! The interpolation algorithm walks between these corners: a per-token
//! spike-and-slab variable `z in {1,2,3}` picks the model, task-reward, or
//! delta-reward branch with probabilities `(lambda1, lambda2, lambda3)`,
//! annealed from the delta corner toward the model/reward corners, and the
//! M-step maximizes plain log-likelihood of the sampled sequences with `z`
//! marginalized out by Monte Carlo.

use serde::{Deserialize, Serialize};

use crate::engine::ErpoConfig;
use crate::error::{ErpoError, Result};
use crate::logmath::{log_sum_exp, sample_categorical, LogWeight};
use crate::policy::{Gradient, Policy};
use crate::rewards::{delta_prefix_reward, incremental_reward, RewardSpec};
use crate::rng::SplitRng;
use crate::types::{Example, Sequence, TokenId, Vocab};
use rand::Rng;

/// Algorithm preset names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Mle,
    Raml,
    Spg,
    UnigramNoising,
    SingleTokenNoising,
    Interpolation,
}

impl PresetName {
    pub fn parse(name: &str) -> Result<PresetName> {
        match name {
            "mle" => Ok(PresetName::Mle),
            "raml" => Ok(PresetName::Raml),
            "spg" => Ok(PresetName::Spg),
            "unigram_noising" => Ok(PresetName::UnigramNoising),
            "single_token_noising" => Ok(PresetName::SingleTokenNoising),
            "interpolation" => Ok(PresetName::Interpolation),
            other => Err(ErpoError::InvalidConfig(format!("unknown preset: {other}"))),
        }
    }
}

/// A named point in the `(R, alpha, beta)` space with its resolved config.
#[derive(Clone, Debug)]
pub struct Preset {
    pub name: PresetName,
    pub config: ErpoConfig,
    pub notes: String,
}

/// Resolves a preset name to its `(R, alpha, beta)` configuration. The
/// `task_reward` argument supplies the task metric for raml/spg and the
/// noise model (a `UnigramNoise` spec) for unigram_noising; mle and
/// single_token_noising ignore it.
pub fn preset_config(name: PresetName, task_reward: &RewardSpec, tau: f64) -> Result<Preset> {
    if tau <= 0.0 {
        return Err(ErpoError::InvalidConfig("tau must be positive".into()));
    }
    let (config, notes) = match name {
        PresetName::Mle => (
            ErpoConfig::new(RewardSpec::Delta, 0.0, 1.0),
            "delta reward; E-step is the point mass on y*".to_string(),
        ),
        PresetName::Raml => (
            ErpoConfig::new(task_reward.clone(), 0.0, tau),
            format!("task reward at temperature tau = {tau}"),
        ),
        PresetName::Spg => (
            ErpoConfig::new(task_reward.clone(), 1.0, 0.0),
            "log E_p[exp R] ascent; q proportional to p * e^R".to_string(),
        ),
        PresetName::UnigramNoising => {
            if !matches!(task_reward, RewardSpec::UnigramNoise { .. }) {
                return Err(ErpoError::InvalidConfig(
                    "unigram_noising preset needs a unigram_noise reward spec".into(),
                ));
            }
            (
                ErpoConfig::new(task_reward.clone(), 0.0, 1.0),
                "locally relaxed delta via unigram replacement noise".to_string(),
            )
        }
        PresetName::SingleTokenNoising => (
            ErpoConfig::new(RewardSpec::SingleTokenRelaxedDelta, 0.0, 1.0),
            "single uniformly replaced token".to_string(),
        ),
        PresetName::Interpolation => (
            ErpoConfig::new(RewardSpec::Delta, 0.0, 1.0),
            "start corner of the annealed mixture; training uses interp_train".to_string(),
        ),
    };
    Ok(Preset {
        name,
        config,
        notes,
    })
}

/// How to draw from the exponentiated-reward distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RamlMethod {
    /// Exact categorical draw over the enumerated length-`T*` space.
    Enumerate,
    /// Stratified by edit count; exact for the hamming reward.
    HammingStratified,
}

/// Draws `y ~ exp(R(y|y*)/tau) / Z` over sequences of length `T*`.
pub fn raml_sample(
    vocab: Vocab,
    y_star: &Example,
    tau: f64,
    reward: &RewardSpec,
    rng: &mut SplitRng,
    method: RamlMethod,
) -> Result<Sequence> {
    if tau <= 0.0 {
        return Err(ErpoError::InvalidConfig("tau must be positive".into()));
    }
    let reference = y_star.target.as_slice();
    let t_star = reference.len();
    match method {
        RamlMethod::Enumerate => {
            let space = crate::oracle::enumerate_space(vocab, t_star, crate::oracle::DEFAULT_BUDGET)?;
            let weights: Vec<LogWeight> = space
                .sequences
                .iter()
                .map(|y| reward.total(y.as_slice(), reference).scale_by_temperature(tau))
                .collect();
            let idx = sample_categorical(&weights, rng)?;
            Ok(space.sequences[idx].clone())
        }
        RamlMethod::HammingStratified => {
            let v = vocab.size();
            if v < 2 {
                return Err(ErpoError::InvalidConfig(
                    "stratified corruption needs at least two tokens".into(),
                ));
            }
            // P(m) proportional to C(T*, m) (V-1)^m exp(-m / (tau T*)):
            // exact for the hamming reward, whose exponent is (T*-m)/(tau T*).
            let weights: Vec<LogWeight> = (0..=t_star)
                .map(|m| {
                    LogWeight::new(
                        ln_binomial(t_star, m) + m as f64 * ((v - 1) as f64).ln()
                            - m as f64 / (tau * t_star as f64),
                    )
                })
                .collect();
            let m = sample_categorical(&weights, rng)?;
            let mut y = reference.to_vec();
            let positions = sample_distinct(t_star, m, rng);
            for pos in positions {
                let replacement = sample_other_token(v, reference[pos], rng);
                y[pos] = replacement;
            }
            Ok(Sequence::new(y))
        }
    }
}

impl LogWeight {
    fn scale_by_temperature(self, tau: f64) -> LogWeight {
        if self.is_neg_infinity() {
            self
        } else {
            LogWeight::new(self.value() / tau)
        }
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let ln_fact = |m: usize| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

/// Draws `k` distinct indices from `0..n` (partial Fisher-Yates).
fn sample_distinct(n: usize, k: usize, rng: &mut SplitRng) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    indices.truncate(k);
    indices
}

fn sample_other_token(v: usize, exclude: TokenId, rng: &mut SplitRng) -> TokenId {
    let r = rng.gen_range(0..v - 1);
    if r >= exclude {
        r + 1
    } else {
        r
    }
}

/// `log E_{p_theta}[exp R(y|y*)]` over the full fixed-length space.
pub fn spg_objective(policy: &Policy, reward: &RewardSpec, y_star: &Example) -> Result<f64> {
    let space = crate::oracle::enumerate_space(
        policy.vocab(),
        policy.max_len(),
        crate::oracle::DEFAULT_BUDGET,
    )?;
    let reference = y_star.target.as_slice();
    let terms: Vec<LogWeight> = space
        .sequences
        .iter()
        .map(|y| {
            let lp = policy.log_prob_seq(y.as_slice()).expect("enumerated length");
            lp + reward.total(y.as_slice(), reference)
        })
        .collect();
    Ok(log_sum_exp(&terms)?.value())
}

/// Procedural unigram noiser: independently per position, with probability
/// `gamma` replace the token by a draw from `u`, else keep it.
pub fn noise_unigram(
    y_star: &[TokenId],
    gamma: f64,
    u: &[f64],
    rng: &mut SplitRng,
) -> Result<Sequence> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(ErpoError::InvalidConfig("gamma must lie in [0,1]".into()));
    }
    let mut y = Vec::with_capacity(y_star.len());
    for &tok in y_star {
        if rng.gen::<f64>() < gamma {
            y.push(sample_from_probs(u, rng));
        } else {
            y.push(tok);
        }
    }
    Ok(Sequence::new(y))
}

fn sample_from_probs(probs: &[f64], rng: &mut SplitRng) -> usize {
    let r: f64 = rng.gen();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last_positive = i;
        cum += p;
        if r < cum {
            return i;
        }
    }
    last_positive
}

/// Per-token mixture weights of the spike-and-slab branches, plus the
/// within-branch softmax scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub c: f64,
}

impl MixtureWeights {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64, c: f64) -> Result<Self> {
        let w = MixtureWeights {
            lambda1,
            lambda2,
            lambda3,
            c,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let ls = [self.lambda1, self.lambda2, self.lambda3];
        if ls.iter().any(|l| *l < 0.0 || !l.is_finite()) {
            return Err(ErpoError::InvalidConfig(
                "mixture weights must be finite and >= 0".into(),
            ));
        }
        let sum: f64 = ls.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(ErpoError::InvalidConfig(format!(
                "mixture weights sum to {sum}, expected 1"
            )));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(ErpoError::InvalidConfig("c must be positive".into()));
        }
        Ok(())
    }
}

/// Annealing path of the mixture weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleKind {
    Linear,
    Exponential { decay: f64 },
    Piecewise { knots: Vec<(usize, [f64; 3])> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub kind: ScheduleKind,
    /// Weights at step 0; defaults to the pure delta-branch corner.
    pub start: [f64; 3],
    /// Weights from `horizon` onward.
    pub end: [f64; 3],
    pub horizon: usize,
    /// Lower bound kept on the delta-branch weight.
    #[serde(default)]
    pub lambda3_floor: f64,
    /// Within-branch softmax scale, constant across steps.
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_c() -> f64 {
    1.0
}

impl AnnealSchedule {
    /// Linear anneal from the delta corner to `(0.4, 0.4, 0.2)` over the
    /// first 60% of the run, then frozen.
    pub fn default_for(total_steps: usize) -> AnnealSchedule {
        AnnealSchedule {
            kind: ScheduleKind::Linear,
            start: [0.0, 0.0, 1.0],
            end: [0.4, 0.4, 0.2],
            horizon: (total_steps as f64 * 0.6).round() as usize,
            lambda3_floor: 0.0,
            c: 1.0,
        }
    }

    pub fn frozen(weights: [f64; 3], c: f64) -> AnnealSchedule {
        AnnealSchedule {
            kind: ScheduleKind::Linear,
            start: weights,
            end: weights,
            horizon: 0,
            lambda3_floor: 0.0,
            c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for w in [self.start, self.end] {
            MixtureWeights::new(w[0], w[1], w[2], self.c)?;
        }
        if !(0.0..=1.0).contains(&self.lambda3_floor) {
            return Err(ErpoError::InvalidConfig("lambda3 floor must lie in [0,1]".into()));
        }
        if let ScheduleKind::Exponential { decay } = self.kind {
            if !(decay > 0.0 && decay < 1.0) {
                return Err(ErpoError::InvalidConfig(
                    "exponential decay must lie in (0,1)".into(),
                ));
            }
        }
        if let ScheduleKind::Piecewise { knots } = &self.kind {
            let mut prev_step = 0usize;
            for (i, (step, w)) in knots.iter().enumerate() {
                MixtureWeights::new(w[0], w[1], w[2], self.c)?;
                if *step > self.horizon || (i > 0 && *step <= prev_step) {
                    return Err(ErpoError::InvalidConfig(
                        "piecewise knots must be strictly increasing within the horizon".into(),
                    ));
                }
                prev_step = *step;
            }
        }
        // Scan the emitted path: lambda3 non-increasing, lambda1/2
        // non-decreasing, always on the simplex.
        let probes: Vec<usize> = if self.horizon <= 1024 {
            (0..=self.horizon).collect()
        } else {
            let mut p: Vec<usize> = (0..=1024).map(|i| i * self.horizon / 1024).collect();
            p.dedup();
            p
        };
        let mut prev: Option<MixtureWeights> = None;
        for &s in &probes {
            let w = self.weights_at(s);
            w.validate()?;
            if let Some(p) = prev {
                if w.lambda3 > p.lambda3 + 1e-12
                    || w.lambda1 < p.lambda1 - 1e-12
                    || w.lambda2 < p.lambda2 - 1e-12
                {
                    return Err(ErpoError::InvalidConfig(format!(
                        "schedule is not monotone at step {s}"
                    )));
                }
            }
            prev = Some(w);
        }
        Ok(())
    }

    fn raw_at(&self, step: usize) -> [f64; 3] {
        if step >= self.horizon || self.horizon == 0 {
            return self.end;
        }
        match &self.kind {
            ScheduleKind::Linear => {
                let f = step as f64 / self.horizon as f64;
                lerp3(self.start, self.end, f)
            }
            ScheduleKind::Exponential { decay } => {
                let f = (1.0 - decay.powi(step as i32)) / (1.0 - decay.powi(self.horizon as i32));
                lerp3(self.start, self.end, f)
            }
            ScheduleKind::Piecewise { knots } => {
                let mut left = (0usize, self.start);
                let mut right = (self.horizon, self.end);
                for &(s, w) in knots {
                    if s <= step {
                        left = (s, w);
                    } else {
                        right = (s, w);
                        break;
                    }
                }
                if right.0 == left.0 {
                    return left.1;
                }
                let f = (step - left.0) as f64 / (right.0 - left.0) as f64;
                lerp3(left.1, right.1, f)
            }
        }
    }

    fn weights_at(&self, step: usize) -> MixtureWeights {
        let [l1, l2, l3] = self.raw_at(step);
        if l3 >= self.lambda3_floor {
            return MixtureWeights {
                lambda1: l1,
                lambda2: l2,
                lambda3: l3,
                c: self.c,
            };
        }
        // Lift lambda3 to the floor and rescale the other branches.
        let rest = l1 + l2;
        let scale = if rest > 0.0 {
            (1.0 - self.lambda3_floor) / rest
        } else {
            0.0
        };
        MixtureWeights {
            lambda1: l1 * scale,
            lambda2: l2 * scale,
            lambda3: self.lambda3_floor,
            c: self.c,
        }
    }
}

fn lerp3(a: [f64; 3], b: [f64; 3], f: f64) -> [f64; 3] {
    [
        a[0] + f * (b[0] - a[0]),
        a[1] + f * (b[1] - a[1]),
        a[2] + f * (b[2] - a[2]),
    ]
}

/// Mixture weights emitted for a step: the start weights at step 0, the end
/// weights from the horizon onward.
pub fn interp_weights(step: usize, schedule: &AnnealSchedule) -> MixtureWeights {
    schedule.weights_at(step)
}

/// Which branch generated each token.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ZBranch {
    Model = 1,
    TaskReward = 2,
    DeltaReward = 3,
}

pub type ZTrace = Vec<ZBranch>;

/// Spike-and-slab token-level sampler. Per position, `z ~ Cat(lambda)` picks
/// the branch; the token then follows the branch's `c`-scaled softmax:
/// model log-probabilities, task-reward increments, or delta-reward
/// increments (the one-hot on `y*_t` while the prefix still matches `y*`).
/// Once the prefix has deviated, the delta branch is impossible and its
/// weight is renormalized into the other two for that position.
pub fn sample_interpolated(
    policy: &Policy,
    y_star: &Example,
    weights: &MixtureWeights,
    comm: &RewardSpec,
    rng: &mut SplitRng,
) -> Result<(Sequence, ZTrace)> {
    weights.validate()?;
    let mut y: Vec<TokenId> = Vec::with_capacity(policy.max_len());
    let mut trace: ZTrace = Vec::with_capacity(policy.max_len());
    let v = policy.vocab().size();
    for t in 0..policy.max_len() {
        let delta_alive =
            delta_prefix_reward(&y, y_star).is_finite() && t < y_star.target_len();
        let z = draw_branch(weights, delta_alive, t, v, rng)?;
        let token = match z {
            ZBranch::Model => {
                let lp = policy.log_conditional(&y);
                let w: Vec<LogWeight> = lp
                    .iter()
                    .map(|&l| LogWeight::new(weights.c * l))
                    .collect();
                sample_categorical(&w, rng)?
            }
            ZBranch::TaskReward => {
                let mut w = Vec::with_capacity(v);
                for token in 0..v {
                    let dr = incremental_reward(&y, token, y_star, comm)?;
                    w.push(dr.scale(weights.c));
                }
                if w.iter().all(|x| x.is_neg_infinity()) {
                    return Err(ErpoError::DeadPrefix { position: t, vocab: v });
                }
                sample_categorical(&w, rng)?
            }
            ZBranch::DeltaReward => {
                let mut w = Vec::with_capacity(v);
                for token in 0..v {
                    let dr = incremental_reward(&y, token, y_star, &RewardSpec::Delta)?;
                    w.push(dr.scale(weights.c));
                }
                sample_categorical(&w, rng)?
            }
        };
        y.push(token);
        trace.push(z);
    }
    Ok((Sequence::new(y), trace))
}

fn draw_branch(
    weights: &MixtureWeights,
    delta_alive: bool,
    position: usize,
    vocab: usize,
    rng: &mut SplitRng,
) -> Result<ZBranch> {
    let lambda3 = if delta_alive { weights.lambda3 } else { 0.0 };
    let total = weights.lambda1 + weights.lambda2 + lambda3;
    if total <= 0.0 {
        return Err(ErpoError::DeadPrefix {
            position,
            vocab,
        });
    }
    let r: f64 = rng.gen::<f64>() * total;
    if r < weights.lambda1 {
        Ok(ZBranch::Model)
    } else if r < weights.lambda1 + weights.lambda2 {
        Ok(ZBranch::TaskReward)
    } else if delta_alive {
        Ok(ZBranch::DeltaReward)
    } else if weights.lambda2 > 0.0 {
        // Rounding pushed r to the top of the clipped range.
        Ok(ZBranch::TaskReward)
    } else {
        Ok(ZBranch::Model)
    }
}

/// M-step of the interpolation algorithm: one plain log-likelihood ascent
/// step on the sampled batch (`z` is integrated out by the sampling itself).
pub fn interp_m_step(
    policy: &mut Policy,
    batch: &[(Sequence, ZTrace)],
    lr: f64,
) -> Result<()> {
    if batch.is_empty() {
        return Err(ErpoError::ContractViolation("batch must be non-empty".into()));
    }
    let mut grad = Gradient::zeros_like(policy);
    for (y, _) in batch {
        let g = policy.grad_log_prob(y.as_slice())?;
        grad.add_scaled(&g, 1.0);
    }
    grad.scale(1.0 / batch.len() as f64);
    policy.apply_update(&grad, lr);
    Ok(())
}

/// Interpolation trainer settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InterpConfig {
    pub comm_reward: RewardSpec,
    pub schedule: AnnealSchedule,
    pub lr: f64,
    pub steps: usize,
    pub seed: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_every")]
    pub history_every: usize,
}

fn default_batch_size() -> usize {
    1
}
fn default_every() -> usize {
    1
}

impl InterpConfig {
    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        self.comm_reward.validate(vocab_size)?;
        self.schedule.validate()?;
        if self.lr < 0.0 {
            return Err(ErpoError::InvalidConfig("lr must be >= 0".into()));
        }
        if self.batch_size < 1 {
            return Err(ErpoError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.history_every == 0 {
            return Err(ErpoError::InvalidConfig("history_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-step record of the interpolation trainer.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpRow {
    pub step: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Mean whole-sequence task reward of the step's samples.
    pub mean_comm_reward: f64,
    pub probe_log_lik: f64,
    pub z1_frac: f64,
    pub z2_frac: f64,
    pub z3_frac: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InterpHistory {
    pub rows: Vec<InterpRow>,
}

impl InterpHistory {
    pub fn to_csv(&self, config_hash: Option<&str>) -> String {
        let mut out = String::new();
        let mut header = vec![
            "step",
            "lambda1",
            "lambda2",
            "lambda3",
            "mean_comm_reward",
            "probe_log_lik",
            "z1_frac",
            "z2_frac",
            "z3_frac",
        ];
        if config_hash.is_some() {
            header.push("config_hash");
        }
        out.push_str(&header.join(","));
        out.push_str("\r\n");
        for r in &self.rows {
            let mut fields = vec![
                r.step.to_string(),
                format!("{}", r.lambda1),
                format!("{}", r.lambda2),
                format!("{}", r.lambda3),
                format!("{}", r.mean_comm_reward),
                format!("{}", r.probe_log_lik),
                format!("{}", r.z1_frac),
                format!("{}", r.z2_frac),
                format!("{}", r.z3_frac),
            ];
            if let Some(h) = config_hash {
                fields.push(h.to_string());
            }
            out.push_str(&fields.join(","));
            out.push_str("\r\n");
        }
        out
    }

    /// Probe log-likelihood trajectory, for cross-trainer comparisons.
    pub fn probe_trajectory(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.probe_log_lik).collect()
    }
}

pub struct InterpOutcome {
    pub policy: Policy,
    pub history: InterpHistory,
}

/// Training loop of the interpolation algorithm: per step, anneal the
/// mixture weights, sample a batch through the spike-and-slab sampler, and
/// take one likelihood ascent step on the samples.
pub fn interp_train(
    initial: Policy,
    dataset: &[Example],
    config: &InterpConfig,
) -> Result<InterpOutcome> {
    if dataset.is_empty() {
        return Err(ErpoError::ContractViolation("dataset must be non-empty".into()));
    }
    config.validate(initial.vocab().size())?;
    for ex in dataset {
        if ex.target.len() != initial.max_len() {
            return Err(ErpoError::LengthMismatch {
                got: ex.target.len(),
                expected: initial.max_len(),
            });
        }
        ex.target.validate(&initial.vocab())?;
    }
    let mut policy = initial;
    let mut history = InterpHistory::default();
    let mut master = SplitRng::seed_from_u64(config.seed);
    let mut select_rng = master.split();
    let mut sample_rng = master.split();
    let probe = &dataset[0];

    for step in 0..config.steps {
        let weights = interp_weights(step, &config.schedule);
        let idx = select_rng.gen_range(0..dataset.len());
        let example = &dataset[idx];
        let mut batch = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            batch.push(sample_interpolated(
                &policy,
                example,
                &weights,
                &config.comm_reward,
                &mut sample_rng,
            )?);
        }
        interp_m_step(&mut policy, &batch, config.lr)?;

        let done = step + 1;
        if done % config.history_every == 0 || done == config.steps {
            let reference = example.target.as_slice();
            let mean_comm = batch
                .iter()
                .map(|(y, _)| config.comm_reward.total(y.as_slice(), reference).value())
                .sum::<f64>()
                / batch.len() as f64;
            let tokens = (batch.len() * policy.max_len()) as f64;
            let count = |b: ZBranch| {
                batch
                    .iter()
                    .flat_map(|(_, tr)| tr.iter())
                    .filter(|&&z| z == b)
                    .count() as f64
                    / tokens
            };
            history.rows.push(InterpRow {
                step: done,
                lambda1: weights.lambda1,
                lambda2: weights.lambda2,
                lambda3: weights.lambda3,
                mean_comm_reward: mean_comm,
                probe_log_lik: policy
                    .log_prob_seq(probe.target.as_slice())
                    .expect("validated length")
                    .value(),
                z1_frac: count(ZBranch::Model),
                z2_frac: count(ZBranch::TaskReward),
                z3_frac: count(ZBranch::DeltaReward),
            });
        }
    }
    Ok(InterpOutcome { policy, history })
}
