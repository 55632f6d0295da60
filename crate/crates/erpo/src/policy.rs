//! Tabular autoregressive sequence model with exact log-probabilities,
//! sampling, analytic gradients, and beam decoding.
//!
//! The model is `p(y) = prod_t p(y_t | ctx(y_{1:t-1}))` where the context is
//! the last `k` tokens (position-agnostic). Logit rows are densely allocated
//! over all contexts of length 0..=k, so every reachable context has a row.
//! Generation is fixed-length: every sequence scored or produced has exactly
//! `max_len` tokens.

use rand_distr::{Distribution, Normal};

use crate::error::{ErpoError, Result};
use crate::logmath::{log_sum_exp, sample_categorical, LogWeight};
use crate::rng::SplitRng;
use crate::types::{Sequence, TokenId, Vocab};

/// Policy initialization scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PolicyInit {
    /// All-zero logits: uniform conditionals.
    Uniform,
    /// I.i.d. N(0, sigma^2) logits.
    Gaussian { sigma: f64 },
}

/// Tabular context-order-k softmax sequence model.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    vocab: Vocab,
    order: usize,
    max_len: usize,
    /// Row-major `(num_contexts, V)` logit table.
    logits: Vec<f64>,
    /// `offsets[j]` = first row index for contexts of length j.
    offsets: Vec<usize>,
}

/// Gradient with the same shape as the policy's logit table. Rows for
/// unvisited contexts stay zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    values: Vec<f64>,
    vocab_size: usize,
}

impl Gradient {
    pub fn zeros_like(policy: &Policy) -> Gradient {
        Gradient {
            values: vec![0.0; policy.logits.len()],
            vocab_size: policy.vocab.size(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let v = self.vocab_size;
        &self.values[row * v..(row + 1) * v]
    }

    pub fn copy_from(&mut self, values: &[f64]) {
        assert_eq!(self.values.len(), values.len());
        self.values.copy_from_slice(values);
    }

    pub fn add_scaled(&mut self, other: &Gradient, factor: f64) {
        assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in self.values.iter_mut() {
            *a *= factor;
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rescales so the L2 norm is at most `max_norm`; smaller gradients are
    /// left untouched.
    pub fn clip_to_max_norm(&mut self, max_norm: f64) {
        assert!(max_norm > 0.0);
        let norm = self.l2_norm();
        if norm > max_norm {
            self.scale(max_norm / norm);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Uniform or seeded-gaussian initialization.
pub fn init_policy(vocab: Vocab, order: usize, max_len: usize, init: PolicyInit, rng: &mut SplitRng) -> Policy {
    let mut offsets = Vec::with_capacity(order + 2);
    let mut total_rows = 0usize;
    let mut pow = 1usize;
    for _ in 0..=order {
        offsets.push(total_rows);
        total_rows += pow;
        pow *= vocab.size();
    }
    offsets.push(total_rows);
    let mut logits = vec![0.0; total_rows * vocab.size()];
    if let PolicyInit::Gaussian { sigma } = init {
        assert!(sigma >= 0.0, "sigma must be >= 0");
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).unwrap();
            for v in logits.iter_mut() {
                *v = normal.sample(rng);
            }
        }
    }
    Policy {
        vocab,
        order,
        max_len,
        logits,
        offsets,
    }
}

impl Policy {
    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn num_rows(&self) -> usize {
        self.logits.len() / self.vocab.size()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// Row index for the context of a prefix: the last `min(k, len)` tokens.
    pub fn context_row(&self, prefix: &[TokenId]) -> usize {
        let k = self.order.min(prefix.len());
        let ctx = &prefix[prefix.len() - k..];
        let mut idx = 0usize;
        for &t in ctx {
            debug_assert!(self.vocab.contains(t));
            idx = idx * self.vocab.size() + t;
        }
        self.offsets[k] + idx
    }

    fn row(&self, row: usize) -> &[f64] {
        let v = self.vocab.size();
        &self.logits[row * v..(row + 1) * v]
    }

    /// Log-softmax of a context row: `log p(. | ctx)`.
    pub fn log_conditional(&self, prefix: &[TokenId]) -> Vec<f64> {
        let row = self.row(self.context_row(prefix));
        log_softmax(row)
    }

    /// `sum_t log p(y_t | y_{1:t-1})`. Finite always; errors if `y` is not of
    /// the fixed generation length.
    pub fn log_prob_seq(&self, y: &[TokenId]) -> Result<LogWeight> {
        if y.len() != self.max_len {
            return Err(ErpoError::LengthMismatch {
                got: y.len(),
                expected: self.max_len,
            });
        }
        Ok(LogWeight::new(self.log_prob_prefix(y)))
    }

    /// Log-probability of an arbitrary-length prefix under the model.
    pub fn log_prob_prefix(&self, prefix: &[TokenId]) -> f64 {
        let mut total = 0.0;
        for t in 0..prefix.len() {
            let lp = self.log_conditional(&prefix[..t]);
            total += lp[prefix[t]];
        }
        total
    }

    /// Draws a fixed-length sequence token by token.
    pub fn sample_seq(&self, rng: &mut SplitRng) -> Sequence {
        let mut y: Vec<TokenId> = Vec::with_capacity(self.max_len);
        for _ in 0..self.max_len {
            let lp = self.log_conditional(&y);
            let weights: Vec<LogWeight> = lp.iter().map(|&w| LogWeight::new(w)).collect();
            let tok = sample_categorical(&weights, rng).expect("softmax rows are finite");
            y.push(tok);
        }
        Sequence::new(y)
    }

    /// Continues a forced prefix up to the fixed length, sampling each token.
    pub fn sample_continuation(&self, prefix: &[TokenId], rng: &mut SplitRng) -> Sequence {
        let mut y = prefix.to_vec();
        while y.len() < self.max_len {
            let lp = self.log_conditional(&y);
            let weights: Vec<LogWeight> = lp.iter().map(|&w| LogWeight::new(w)).collect();
            let tok = sample_categorical(&weights, rng).expect("softmax rows are finite");
            y.push(tok);
        }
        Sequence::new(y)
    }

    /// `grad log p(y)`: for each visited context row, `onehot(y_t) - softmax(row)`,
    /// accumulated over positions; zero elsewhere.
    pub fn grad_log_prob(&self, y: &[TokenId]) -> Result<Gradient> {
        if y.len() != self.max_len {
            return Err(ErpoError::LengthMismatch {
                got: y.len(),
                expected: self.max_len,
            });
        }
        let v = self.vocab.size();
        let mut grad = Gradient::zeros_like(self);
        for t in 0..y.len() {
            let row = self.context_row(&y[..t]);
            let probs = softmax(self.row(row));
            let base = row * v;
            for (i, p) in probs.iter().enumerate() {
                grad.values[base + i] -= p;
            }
            grad.values[base + y[t]] += 1.0;
        }
        Ok(grad)
    }

    /// Plain gradient ascent step: `logits += lr * grad`.
    pub fn apply_update(&mut self, grad: &Gradient, lr: f64) {
        assert!(lr >= 0.0, "learning rate must be >= 0");
        assert_eq!(grad.values.len(), self.logits.len(), "gradient shape mismatch");
        for (w, g) in self.logits.iter_mut().zip(&grad.values) {
            *w += lr * g;
        }
    }

    /// Standard fixed-length beam search over `log p`. Ties break toward the
    /// lexicographically smaller sequence; `width >= V^max_len` degenerates
    /// to exact argmax.
    pub fn beam_decode(&self, width: usize) -> Sequence {
        assert!(width >= 1, "beam width must be >= 1");
        self.beam_continuation(&[], width)
    }

    /// Beam search continuation of a forced prefix.
    pub fn beam_continuation(&self, prefix: &[TokenId], width: usize) -> Sequence {
        assert!(width >= 1, "beam width must be >= 1");
        let mut beams: Vec<(f64, Vec<TokenId>)> = vec![(0.0, prefix.to_vec())];
        for _ in prefix.len()..self.max_len {
            let mut expanded: Vec<(f64, Vec<TokenId>)> =
                Vec::with_capacity(beams.len() * self.vocab.size());
            for (score, y) in &beams {
                let lp = self.log_conditional(y);
                for tok in self.vocab.tokens() {
                    let mut ext = y.clone();
                    ext.push(tok);
                    expanded.push((score + lp[tok], ext));
                }
            }
            expanded.sort_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .expect("scores are finite")
                    .then_with(|| a.1.cmp(&b.1))
            });
            expanded.truncate(width);
            beams = expanded;
        }
        Sequence::new(beams.into_iter().next().expect("beam never empty").1)
    }

    /// Greedy decode: argmax token at every step (first index wins ties).
    pub fn greedy_decode(&self) -> Sequence {
        self.greedy_continuation(&[])
    }

    pub fn greedy_continuation(&self, prefix: &[TokenId]) -> Sequence {
        let mut y = prefix.to_vec();
        while y.len() < self.max_len {
            let lp = self.log_conditional(&y);
            let best = lp
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap();
            y.push(best);
        }
        Sequence::new(y)
    }

    /// Serializes to the versioned text checkpoint format.
    pub fn to_checkpoint(&self, config_hash: Option<&str>) -> String {
        let mut out = String::new();
        out.push_str("erpo-policy v1\n");
        out.push_str(&format!("config_hash {}\n", config_hash.unwrap_or("-")));
        match self.vocab.eos() {
            Some(e) => out.push_str(&format!("vocab {} eos {}\n", self.vocab.size(), e)),
            None => out.push_str(&format!("vocab {} eos -\n", self.vocab.size())),
        }
        out.push_str(&format!("order {}\n", self.order));
        out.push_str(&format!("max_len {}\n", self.max_len));
        out.push_str(&format!("rows {}\n", self.num_rows()));
        for r in 0..self.num_rows() {
            let row: Vec<String> = self.row(r).iter().map(|x| format!("{x}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parses the text checkpoint format (round-trip exact: shortest
    /// representation parses back to the identical f64).
    pub fn from_checkpoint(text: &str) -> Result<Policy> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| ErpoError::Parse("empty checkpoint".into()))?;
        if header != "erpo-policy v1" {
            return Err(ErpoError::Parse(format!("unknown checkpoint header: {header}")));
        }
        let _hash = lines
            .next()
            .ok_or_else(|| ErpoError::Parse("missing config_hash line".into()))?;
        let vocab_line = lines
            .next()
            .ok_or_else(|| ErpoError::Parse("missing vocab line".into()))?;
        let parts: Vec<&str> = vocab_line.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "vocab" || parts[2] != "eos" {
            return Err(ErpoError::Parse(format!("bad vocab line: {vocab_line}")));
        }
        let size: usize = parts[1]
            .parse()
            .map_err(|_| ErpoError::Parse("bad vocab size".into()))?;
        let vocab = if parts[3] == "-" {
            Vocab::new(size)?
        } else {
            let eos: usize = parts[3]
                .parse()
                .map_err(|_| ErpoError::Parse("bad eos id".into()))?;
            Vocab::with_eos(size, eos)?
        };
        let order = parse_kv(lines.next(), "order")?;
        let max_len = parse_kv(lines.next(), "max_len")?;
        let rows: usize = parse_kv(lines.next(), "rows")?;
        let mut scratch = SplitRng::seed_from_u64(0);
        let mut policy = init_policy(vocab, order, max_len, PolicyInit::Uniform, &mut scratch);
        if policy.num_rows() != rows {
            return Err(ErpoError::Parse(format!(
                "row count {rows} does not match order {order} and vocab {size}"
            )));
        }
        let v = size;
        for r in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| ErpoError::Parse(format!("missing logit row {r}")))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| ErpoError::Parse(format!("bad logit: {s}"))))
                .collect::<Result<_>>()?;
            if vals.len() != v {
                return Err(ErpoError::Parse(format!(
                    "row {r} has {} logits, expected {v}",
                    vals.len()
                )));
            }
            policy.logits[r * v..(r + 1) * v].copy_from_slice(&vals);
        }
        Ok(policy)
    }

    /// Mutable access to the raw logit table (used by finite-difference
    /// probes that perturb single parameters).
    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }
}

fn parse_kv(line: Option<&str>, key: &str) -> Result<usize> {
    let line = line.ok_or_else(|| ErpoError::Parse(format!("missing {key} line")))?;
    let mut it = line.split_whitespace();
    if it.next() != Some(key) {
        return Err(ErpoError::Parse(format!("expected {key} line, got: {line}")));
    }
    it.next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ErpoError::Parse(format!("bad {key} value")))
}

/// Numerically stable log-softmax of a logit row.
pub(crate) fn log_softmax(row: &[f64]) -> Vec<f64> {
    let weights: Vec<LogWeight> = row.iter().map(|&w| LogWeight::new(w)).collect();
    let z = log_sum_exp(&weights).expect("non-empty row").value();
    row.iter().map(|&w| w - z).collect()
}

/// Softmax of a logit row.
pub(crate) fn softmax(row: &[f64]) -> Vec<f64> {
    log_softmax(row).iter().map(|&l| l.exp()).collect()
}
