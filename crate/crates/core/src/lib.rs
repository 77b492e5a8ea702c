//! Two-stage rank-correlation adversarial attack on image quality scorers.
//!
//! Stage One optimizes per-image adversarial target scores that jointly
//! reverse the set's rank correlation and enlarge the score error, using a
//! differentiable rank surrogate (Euclidean projection onto the
//! permutahedron). Stage Two drives each image toward its target with
//! l_inf-bounded iterative sign-gradient steps. The [`metrics`] module
//! carries the full evaluation suite and [`pipeline`] the end-to-end runner
//! behind the command-line tool.
//!
//! ```
//! use sma_core::soft_rank::{hard_rank, soft_rank};
//!
//! let scores = [10.0, 5.0, 0.0];
//! assert_eq!(hard_rank(&scores).unwrap(), vec![1, 2, 3]);
//! // Below the minimum adjacent gap the surrogate is exact.
//! assert_eq!(soft_rank(&scores, 5.0).unwrap().values, vec![1.0, 2.0, 3.0]);
//! // Far above it, every rank contracts toward the barycenter.
//! let blurred = soft_rank(&scores, 1e9).unwrap();
//! assert!(blurred.values.iter().all(|v| (v - 2.0).abs() < 1e-6));
//! ```

// Negated float comparisons like `!(beta > 0.0)` are deliberate: they reject
// NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod metrics;
pub mod numerics;
pub mod pipeline;
pub mod pnm;
pub mod report;
pub mod scorer;
pub mod soft_rank;
pub mod stage_one;
pub mod stage_two;

pub use error::{Error, Result};
pub use metrics::{MetricsReport, RBounds};
pub use pipeline::{InputSource, RunConfig, RunMode, RunOutcome, SweepKind};
pub use report::{AttackReport, ReportRow};
pub use scorer::{ImageTensor, ScorerKind, ScorerSpec};
pub use soft_rank::SoftRankResult;
pub use stage_one::{StageOneConfig, StageOneTrace};
pub use stage_two::{AttackConfig, AttackResult};
