//! Desk-scale laboratory for entropy-regularized policy optimization over
//! discrete sequence models.
//!
//! MLE, RAML, softmax policy gradient, and data noising are all realized as
//! hyperparameter configurations `(R, alpha, beta)` of one EM-style trainer,
//! and every claimed equivalence is checked against independent brute-force
//! oracles.

pub mod algorithms;
pub mod engine;
pub mod error;
pub mod oracle;
pub mod logmath;
pub mod policy;
pub mod rewards;
pub mod rng;
pub mod stats;
pub mod types;

pub use error::{ErpoError, Result};
pub use logmath::LogWeight;
pub use rng::SplitRng;
pub use types::{Example, Sequence, TokenId, Vocab};
