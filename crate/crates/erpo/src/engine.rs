//! Generalized entropy-regularized policy optimization engine.
//!
//! The objective over a non-parametric variational distribution `q` is
//!
//! ```text
//! L(q, theta) = E_q[R] - alpha * KL(q || p_theta) + beta * H(q)
//! ```
//!
//! maximized by EM-style coordinate ascent: the E-step has the closed form
//! `q(y) ∝ exp{(alpha log p(y) + R(y|y*)) / (alpha + beta)}`, and the M-step
//! fits the policy to samples from (or the exact expectation under) `q`.
//! MLE, RAML, SPG, and data noising are all points `(R, alpha, beta)` of this
//! engine; see the `algorithms` module for the named presets.

use serde::{Deserialize, Serialize};

use crate::error::{ErpoError, Result};
use crate::logmath::{normalize_log, sample_categorical, LogWeight};
use crate::policy::{Gradient, Policy};
use crate::rewards::{incremental_reward, next_lexicographic, RewardSpec};
use crate::rng::SplitRng;
use crate::stats::total_variation;
use crate::types::{Example, Sequence};
use rand::Rng;

/// How the E-step distribution is realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EStep {
    /// Enumerate the full sequence space and normalize exactly.
    Exact,
    /// Sample token by token from the per-prefix softmax.
    Sequential,
}

/// How the M-step gradient is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MStep {
    /// `sum_y q(y) grad log p(y)` over the enumerated support.
    ExactExpectation,
    /// Monte Carlo average of `grad log p` over samples from `q`.
    MonteCarlo { n_samples: usize },
}

/// How examples are drawn per EM step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    /// One uniformly-sampled example per step (stochastic EM).
    SampleOne,
    /// Average the gradient over the whole dataset each step.
    FullDataset,
}

/// Optional linear annealing of `(alpha, beta)` over the first `horizon`
/// steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBetaAnneal {
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub horizon: usize,
}

impl AlphaBetaAnneal {
    pub fn at(&self, step: usize) -> (f64, f64) {
        if self.horizon == 0 || step >= self.horizon {
            return self.to;
        }
        let f = step as f64 / self.horizon as f64;
        (
            self.from.0 + f * (self.to.0 - self.from.0),
            self.from.1 + f * (self.to.1 - self.from.1),
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (a, b) in [self.from, self.to] {
            if a < 0.0 || b < 0.0 || a + b <= 0.0 {
                return Err(ErpoError::InvalidConfig(format!(
                    "annealed (alpha, beta) = ({a}, {b}) must be >= 0 with alpha + beta > 0"
                )));
            }
        }
        Ok(())
    }
}

/// The hyperparameter triple `(R, alpha, beta)` plus trainer settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErpoConfig {
    pub reward: RewardSpec,
    pub alpha: f64,
    pub beta: f64,
    pub e_step: EStep,
    pub m_step: MStep,
    pub lr: f64,
    pub steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub clip_norm: Option<f64>,
    #[serde(default = "default_batch")]
    pub batch: BatchMode,
    #[serde(default = "default_history_every")]
    pub history_every: usize,
    #[serde(default = "default_budget")]
    pub enumeration_budget: u64,
}

fn default_batch() -> BatchMode {
    BatchMode::SampleOne
}
fn default_history_every() -> usize {
    1
}
fn default_budget() -> u64 {
    1_000_000
}

impl ErpoConfig {
    pub fn new(reward: RewardSpec, alpha: f64, beta: f64) -> ErpoConfig {
        ErpoConfig {
            reward,
            alpha,
            beta,
            e_step: EStep::Exact,
            m_step: MStep::ExactExpectation,
            lr: 0.1,
            steps: 0,
            seed: 0,
            clip_norm: None,
            batch: BatchMode::SampleOne,
            history_every: 1,
            enumeration_budget: 1_000_000,
        }
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(ErpoError::InvalidConfig(
                "alpha and beta must be >= 0".into(),
            ));
        }
        if self.alpha + self.beta <= 0.0 {
            return Err(ErpoError::InvalidConfig("alpha + beta must be positive".into()));
        }
        if self.lr < 0.0 {
            return Err(ErpoError::InvalidConfig("lr must be >= 0".into()));
        }
        if let MStep::MonteCarlo { n_samples } = self.m_step {
            if n_samples < 1 {
                return Err(ErpoError::InvalidConfig("n_samples must be >= 1".into()));
            }
        }
        if self.e_step == EStep::Sequential && self.m_step == MStep::ExactExpectation {
            return Err(ErpoError::InvalidConfig(
                "exact-expectation M-step requires the exact E-step".into(),
            ));
        }
        if self.history_every == 0 {
            return Err(ErpoError::InvalidConfig("history_every must be >= 1".into()));
        }
        self.reward.validate(vocab_size)
    }
}

/// An explicit normalized distribution over an enumerated sequence support.
#[derive(Clone, Debug)]
pub struct VariationalDistribution {
    pub support: Vec<Sequence>,
    pub log_q: Vec<LogWeight>,
}

impl VariationalDistribution {
    /// Normalizes raw log weights over the support. Errors when every weight
    /// is `-inf`.
    pub fn from_unnormalized(support: Vec<Sequence>, mut log_q: Vec<LogWeight>) -> Result<Self> {
        assert_eq!(support.len(), log_q.len());
        normalize_log(&mut log_q)?;
        Ok(VariationalDistribution { support, log_q })
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.log_q[i].exp()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_q.iter().map(|w| w.exp()).collect()
    }

    /// Shannon entropy with `0 log 0 := 0`.
    pub fn entropy(&self) -> f64 {
        self.log_q
            .iter()
            .filter(|w| w.is_finite())
            .map(|w| -w.exp() * w.value())
            .sum()
    }

    /// Index of the sequence if the support is in lexicographic order.
    pub fn index_of(&self, y: &Sequence) -> Option<usize> {
        self.support.iter().position(|s| s == y)
    }
}

/// Enumerates all `V^L` sequences in lexicographic order, guarding the budget.
fn enumerate_sequences(vocab_size: usize, len: usize, budget: u64) -> Result<Vec<Sequence>> {
    let count = (vocab_size as u128).pow(len as u32);
    if count > budget as u128 {
        return Err(ErpoError::BudgetExceeded {
            requested: count,
            budget,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    if len == 0 {
        out.push(Sequence::empty());
        return Ok(out);
    }
    let mut digits = vec![0usize; len];
    loop {
        out.push(Sequence::new(digits.clone()));
        if !next_lexicographic(&mut digits, vocab_size) {
            break;
        }
    }
    Ok(out)
}

/// Closed-form E-step: `log q(y) = (alpha log p(y) + R(y|y*)) / (alpha+beta)`,
/// normalized over the full fixed-length sequence space.
pub fn exact_q(
    policy: &Policy,
    config: &ErpoConfig,
    y_star: &Example,
) -> Result<VariationalDistribution> {
    exact_q_with(policy, config, config.alpha, config.beta, y_star)
}

fn exact_q_with(
    policy: &Policy,
    config: &ErpoConfig,
    alpha: f64,
    beta: f64,
    y_star: &Example,
) -> Result<VariationalDistribution> {
    assert!(alpha + beta > 0.0, "alpha + beta must be positive");
    let support = enumerate_sequences(
        policy.vocab().size(),
        policy.max_len(),
        config.enumeration_budget,
    )?;
    let reference = y_star.target.as_slice();
    let scale = 1.0 / (alpha + beta);
    let log_q: Vec<LogWeight> = support
        .iter()
        .map(|y| {
            let lp = policy.log_prob_seq(y.as_slice()).expect("enumerated length");
            let r = config.reward.total(y.as_slice(), reference);
            LogWeight::new((alpha * lp.value() + r.value()) * scale)
        })
        .collect();
    VariationalDistribution::from_unnormalized(support, log_q)
}

/// Eq-style objective value `E_q[R] - alpha KL(q||p) + beta H(q)` with
/// `0 log 0 := 0`; `-inf` (not an error) when `q` puts mass where `R = -inf`.
pub fn erpo_objective(
    policy: &Policy,
    q: &VariationalDistribution,
    config: &ErpoConfig,
    y_star: &Example,
) -> f64 {
    let reference = y_star.target.as_slice();
    let mut expected_reward = 0.0;
    let mut kl = 0.0;
    let mut entropy = 0.0;
    for (y, lq) in q.support.iter().zip(&q.log_q) {
        let p = lq.exp();
        if p == 0.0 {
            continue;
        }
        let r = config.reward.total(y.as_slice(), reference);
        if r.is_neg_infinity() {
            return f64::NEG_INFINITY;
        }
        expected_reward += p * r.value();
        let lp = policy.log_prob_seq(y.as_slice()).expect("support length").value();
        kl += p * (lq.value() - lp);
        entropy -= p * lq.value();
    }
    expected_reward - config.alpha * kl + config.beta * entropy
}

/// Per-step diagnostics of a `q` against the policy and reward.
pub fn q_diagnostics(
    policy: &Policy,
    q: &VariationalDistribution,
    config: &ErpoConfig,
    y_star: &Example,
) -> (f64, f64, f64, f64) {
    let reference = y_star.target.as_slice();
    let mut expected_reward = 0.0;
    let mut kl = 0.0;
    for (y, lq) in q.support.iter().zip(&q.log_q) {
        let p = lq.exp();
        if p == 0.0 {
            continue;
        }
        let r = config.reward.total(y.as_slice(), reference);
        expected_reward += p * r.value(); // may be -inf if q leaks outside R's support
        let lp = policy.log_prob_seq(y.as_slice()).expect("support length").value();
        kl += p * (lq.value() - lp);
    }
    let entropy = q.entropy();
    let objective = expected_reward - config.alpha * kl + config.beta * entropy;
    (objective, expected_reward, kl, entropy)
}

/// Token-level E-step: normalized `log q(y_t | prefix)` over the `V` next
/// tokens, with weights `(alpha log p(y_t|prefix) + dR(y_t|prefix, y*)) /
/// (alpha + beta)`.
pub fn token_q_step(
    policy: &Policy,
    prefix: &[usize],
    config: &ErpoConfig,
    y_star: &Example,
) -> Result<Vec<LogWeight>> {
    token_q_step_with(policy, prefix, config, config.alpha, config.beta, y_star)
}

fn token_q_step_with(
    policy: &Policy,
    prefix: &[usize],
    config: &ErpoConfig,
    alpha: f64,
    beta: f64,
    y_star: &Example,
) -> Result<Vec<LogWeight>> {
    assert!(alpha + beta > 0.0, "alpha + beta must be positive");
    let log_p = policy.log_conditional(prefix);
    let scale = 1.0 / (alpha + beta);
    let mut weights = Vec::with_capacity(log_p.len());
    for (token, &lp) in log_p.iter().enumerate() {
        let dr = incremental_reward(prefix, token, y_star, &config.reward)?;
        weights.push(LogWeight::new((alpha * lp + dr.value()) * scale));
    }
    if weights.iter().all(|w| w.is_neg_infinity()) {
        return Err(ErpoError::DeadPrefix {
            position: prefix.len(),
            vocab: log_p.len(),
        });
    }
    normalize_log(&mut weights)?;
    Ok(weights)
}

/// Draws a full sequence token by token from the token-level `q`.
pub fn sample_q_sequential(
    policy: &Policy,
    config: &ErpoConfig,
    y_star: &Example,
    rng: &mut SplitRng,
) -> Result<Sequence> {
    let mut y: Vec<usize> = Vec::with_capacity(policy.max_len());
    for _ in 0..policy.max_len() {
        let weights = token_q_step(policy, &y, config, y_star)?;
        let tok = sample_categorical(&weights, rng)?;
        y.push(tok);
    }
    Ok(Sequence::new(y))
}

/// Exact law of the sequential sampler: the product over positions of the
/// per-prefix token distributions, enumerated over the whole space. Used to
/// quantify the gap between the joint E-step solution and token-level
/// sampling (they coincide only when per-prefix normalizers are constant).
pub fn sequential_law(
    policy: &Policy,
    config: &ErpoConfig,
    y_star: &Example,
) -> Result<VariationalDistribution> {
    let support = enumerate_sequences(
        policy.vocab().size(),
        policy.max_len(),
        config.enumeration_budget,
    )?;
    let mut log_q = vec![LogWeight::NEG_INFINITY; support.len()];
    let mut prefix: Vec<usize> = Vec::new();
    descend(policy, config, y_star, &mut prefix, 0.0, &support, &mut log_q, &mut 0)?;
    // Already normalized by construction (each level is a distribution).
    Ok(VariationalDistribution { support, log_q })
}

#[allow(clippy::too_many_arguments)]
fn descend(
    policy: &Policy,
    config: &ErpoConfig,
    y_star: &Example,
    prefix: &mut Vec<usize>,
    log_mass: f64,
    support: &[Sequence],
    log_q: &mut [LogWeight],
    cursor: &mut usize,
) -> Result<()> {
    let v = policy.vocab().size();
    if prefix.len() == policy.max_len() {
        debug_assert_eq!(support[*cursor].as_slice(), prefix.as_slice());
        log_q[*cursor] = LogWeight::new(log_mass);
        *cursor += 1;
        return Ok(());
    }
    let remaining = (v as u128).pow((policy.max_len() - prefix.len()) as u32) as usize;
    if log_mass == f64::NEG_INFINITY {
        // Unreachable subtree: all leaves keep probability zero.
        *cursor += remaining;
        return Ok(());
    }
    let weights = token_q_step(policy, prefix, config, y_star)?;
    for (tok, w) in weights.iter().enumerate() {
        prefix.push(tok);
        let child_mass = if w.is_neg_infinity() {
            f64::NEG_INFINITY
        } else {
            log_mass + w.value()
        };
        descend(policy, config, y_star, prefix, child_mass, support, log_q, cursor)?;
        prefix.pop();
    }
    Ok(())
}

/// Total-variation distance between the exact E-step `q` and the law of the
/// sequential sampler.
pub fn joint_sequential_gap(policy: &Policy, config: &ErpoConfig, y_star: &Example) -> Result<f64> {
    let joint = exact_q(policy, config, y_star)?;
    let seq = sequential_law(policy, config, y_star)?;
    Ok(total_variation(&joint.probs(), &seq.probs()))
}

/// Input to the M-step gradient: the exact distribution or Monte Carlo
/// samples from it.
pub enum MStepInput<'a> {
    Exact(&'a VariationalDistribution),
    Samples(&'a [Sequence]),
}

/// M-step ascent direction on `E_q[log p_theta]`.
pub fn m_step_grad(policy: &Policy, input: MStepInput<'_>) -> Result<Gradient> {
    let mut grad = Gradient::zeros_like(policy);
    match input {
        MStepInput::Exact(q) => {
            for (y, lq) in q.support.iter().zip(&q.log_q) {
                let w = lq.exp();
                if w == 0.0 {
                    continue;
                }
                accumulate_grad_log_prob(policy, y.as_slice(), w, &mut grad)?;
            }
        }
        MStepInput::Samples(samples) => {
            if samples.is_empty() {
                return Err(ErpoError::ContractViolation(
                    "Monte Carlo M-step needs at least one sample".into(),
                ));
            }
            for y in samples {
                accumulate_grad_log_prob(policy, y.as_slice(), 1.0, &mut grad)?;
            }
            grad.scale(1.0 / samples.len() as f64);
        }
    }
    Ok(grad)
}

fn accumulate_grad_log_prob(
    policy: &Policy,
    y: &[usize],
    weight: f64,
    grad: &mut Gradient,
) -> Result<()> {
    if weight == 1.0 {
        let g = policy.grad_log_prob(y)?;
        grad.add_scaled(&g, 1.0);
    } else {
        let g = policy.grad_log_prob(y)?;
        grad.add_scaled(&g, weight);
    }
    Ok(())
}

/// One history record. Diagnostic fields are `None` when the sequence space
/// exceeded the enumeration budget.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub objective: Option<f64>,
    pub expected_reward: Option<f64>,
    pub kl: Option<f64>,
    pub entropy: Option<f64>,
    pub probe_log_lik: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingHistory {
    pub rows: Vec<HistoryRow>,
}

impl TrainingHistory {
    /// RFC 4180 CSV with columns step, objective, expected_reward, kl,
    /// entropy, probe_log_lik; a trailing config_hash column is appended when
    /// a hash is supplied.
    pub fn to_csv(&self, config_hash: Option<&str>) -> String {
        let mut out = String::new();
        let mut header = vec![
            "step",
            "objective",
            "expected_reward",
            "kl",
            "entropy",
            "probe_log_lik",
        ];
        if config_hash.is_some() {
            header.push("config_hash");
        }
        out.push_str(&header.join(","));
        out.push_str("\r\n");
        let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.rows {
            let mut fields = vec![
                r.step.to_string(),
                fmt(r.objective),
                fmt(r.expected_reward),
                fmt(r.kl),
                fmt(r.entropy),
                format!("{}", r.probe_log_lik),
            ];
            if let Some(h) = config_hash {
                fields.push(h.to_string());
            }
            out.push_str(&fields.join(","));
            out.push_str("\r\n");
        }
        out
    }
}

/// Trained policy plus per-step diagnostics.
pub struct TrainOutcome {
    pub policy: Policy,
    pub history: TrainingHistory,
}

/// EM training loop. Per step: draw example(s), compute the E-step (exact or
/// sequential-sampling), take one M-step ascent update, and record
/// diagnostics on the probe example (the first in the dataset).
pub fn erpo_train(
    initial: Policy,
    dataset: &[Example],
    config: &ErpoConfig,
    anneal: Option<&AlphaBetaAnneal>,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(ErpoError::ContractViolation("dataset must be non-empty".into()));
    }
    config.validate(initial.vocab().size())?;
    if let Some(a) = anneal {
        a.validate()?;
    }
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
    let mut history = TrainingHistory::default();
    let mut master = SplitRng::seed_from_u64(config.seed);
    let mut select_rng = master.split();
    let mut sample_rng = master.split();
    let probe = &dataset[0];

    for step in 0..config.steps {
        let (alpha, beta) = anneal.map(|a| a.at(step)).unwrap_or((config.alpha, config.beta));
        let mut grad = match config.batch {
            BatchMode::SampleOne => {
                let idx = select_rng.gen_range(0..dataset.len());
                example_grad(&policy, &dataset[idx], config, alpha, beta, &mut sample_rng)?
            }
            BatchMode::FullDataset => {
                let mut acc = Gradient::zeros_like(&policy);
                for ex in dataset {
                    let g = example_grad(&policy, ex, config, alpha, beta, &mut sample_rng)?;
                    acc.add_scaled(&g, 1.0);
                }
                acc.scale(1.0 / dataset.len() as f64);
                acc
            }
        };
        if let Some(max_norm) = config.clip_norm {
            grad.clip_to_max_norm(max_norm);
        }
        policy.apply_update(&grad, config.lr);

        let done = step + 1;
        if done % config.history_every == 0 || done == config.steps {
            history.rows.push(probe_row(&policy, probe, config, done));
        }
    }
    Ok(TrainOutcome { policy, history })
}

fn example_grad(
    policy: &Policy,
    example: &Example,
    config: &ErpoConfig,
    alpha: f64,
    beta: f64,
    sample_rng: &mut SplitRng,
) -> Result<Gradient> {
    match (config.e_step, config.m_step) {
        (EStep::Exact, MStep::ExactExpectation) => {
            let q = exact_q_with(policy, config, alpha, beta, example)?;
            m_step_grad(policy, MStepInput::Exact(&q))
        }
        (EStep::Exact, MStep::MonteCarlo { n_samples }) => {
            let q = exact_q_with(policy, config, alpha, beta, example)?;
            let mut samples = Vec::with_capacity(n_samples);
            for _ in 0..n_samples {
                let idx = sample_categorical(&q.log_q, sample_rng)?;
                samples.push(q.support[idx].clone());
            }
            m_step_grad(policy, MStepInput::Samples(&samples))
        }
        (EStep::Sequential, MStep::MonteCarlo { n_samples }) => {
            let mut samples = Vec::with_capacity(n_samples);
            for _ in 0..n_samples {
                let cfg = ErpoConfig {
                    alpha,
                    beta,
                    ..config.clone()
                };
                samples.push(sample_q_sequential(policy, &cfg, example, sample_rng)?);
            }
            m_step_grad(policy, MStepInput::Samples(&samples))
        }
        (EStep::Sequential, MStep::ExactExpectation) => Err(ErpoError::InvalidConfig(
            "exact-expectation M-step requires the exact E-step".into(),
        )),
    }
}

fn probe_row(policy: &Policy, probe: &Example, config: &ErpoConfig, step: usize) -> HistoryRow {
    let probe_log_lik = policy
        .log_prob_seq(probe.target.as_slice())
        .expect("validated length")
        .value();
    match exact_q(policy, config, probe) {
        Ok(q) => {
            let (objective, expected_reward, kl, entropy) =
                q_diagnostics(policy, &q, config, probe);
            HistoryRow {
                step,
                objective: Some(objective),
                expected_reward: Some(expected_reward),
                kl: Some(kl),
                entropy: Some(entropy),
                probe_log_lik,
            }
        }
        Err(_) => HistoryRow {
            step,
            objective: None,
            expected_reward: None,
            kl: None,
            entropy: None,
            probe_log_lik,
        },
    }
}
