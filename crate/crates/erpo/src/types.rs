//! Shared data primitives: vocabulary, token sequences, training examples.

use serde::{Deserialize, Serialize};

use crate::error::{ErpoError, Result};

/// Token identifier. Valid ids are `0..vocab.size()`.
pub type TokenId = usize;

/// A finite token alphabet. Ids are dense: `0..size`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    size: usize,
    /// Optional end-of-sequence marker. Carried as metadata for tasks that
    /// reserve a terminator symbol; generation itself is fixed-length.
    eos: Option<TokenId>,
}

impl Vocab {
    pub fn new(size: usize) -> Result<Self> {
        if size < 1 {
            return Err(ErpoError::ContractViolation(
                "vocab must contain at least one token".into(),
            ));
        }
        Ok(Vocab { size, eos: None })
    }

    pub fn with_eos(size: usize, eos: TokenId) -> Result<Self> {
        let mut v = Vocab::new(size)?;
        if eos >= size {
            return Err(ErpoError::ContractViolation(format!(
                "eos id {eos} outside vocab of size {size}"
            )));
        }
        v.eos = Some(eos);
        Ok(v)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn eos(&self) -> Option<TokenId> {
        self.eos
    }

    pub fn contains(&self, token: TokenId) -> bool {
        token < self.size
    }

    pub fn tokens(&self) -> impl Iterator<Item = TokenId> {
        0..self.size
    }
}

/// A finite token string.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sequence(Vec<TokenId>);

impl Sequence {
    pub fn new(items: Vec<TokenId>) -> Self {
        Sequence(items)
    }

    pub fn empty() -> Self {
        Sequence(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[TokenId] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &TokenId> {
        self.0.iter()
    }

    pub fn push(&mut self, token: TokenId) {
        self.0.push(token);
    }

    pub fn prefix(&self, len: usize) -> &[TokenId] {
        &self.0[..len.min(self.0.len())]
    }

    pub fn reversed(&self) -> Sequence {
        let mut v = self.0.clone();
        v.reverse();
        Sequence(v)
    }

    /// Checks every token against the vocabulary.
    pub fn validate(&self, vocab: &Vocab) -> Result<()> {
        for &t in &self.0 {
            if !vocab.contains(t) {
                return Err(ErpoError::ContractViolation(format!(
                    "token {t} outside vocab of size {}",
                    vocab.size()
                )));
            }
        }
        Ok(())
    }
}

impl From<Vec<TokenId>> for Sequence {
    fn from(items: Vec<TokenId>) -> Self {
        Sequence(items)
    }
}

impl From<&[TokenId]> for Sequence {
    fn from(items: &[TokenId]) -> Self {
        Sequence(items.to_vec())
    }
}

impl std::ops::Index<usize> for Sequence {
    type Output = TokenId;
    fn index(&self, i: usize) -> &TokenId {
        &self.0[i]
    }
}

/// A training example: the reference sequence `y*` plus an optional source
/// sequence kept as an opaque conditioning tag (the policy itself is
/// unconditional; the tag is bookkeeping for task generation and reports).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Example {
    pub target: Sequence,
    pub source: Option<Sequence>,
}

impl Example {
    pub fn new(target: Sequence) -> Result<Self> {
        if target.is_empty() {
            return Err(ErpoError::ContractViolation(
                "example target must be non-empty".into(),
            ));
        }
        Ok(Example {
            target,
            source: None,
        })
    }

    pub fn with_source(target: Sequence, source: Sequence) -> Result<Self> {
        let mut e = Example::new(target)?;
        e.source = Some(source);
        Ok(e)
    }

    /// Length of the reference sequence, `T*`.
    pub fn target_len(&self) -> usize {
        self.target.len()
    }
}
