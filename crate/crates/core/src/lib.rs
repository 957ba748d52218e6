//! Decision logic for accelerating vision-language-action policies without
//! retraining.
//!
//! Two mechanisms cut the cost of a policy step:
//!
//! * [`ics`] scores visual tokens by their projection energy on the dominant
//!   singular directions of the attention output and keeps the top `k`.
//! * [`gate`] skips a policy call altogether, reusing the previous action,
//!   when both the action direction and the selected token set are stable.
//!
//! [`flops`] prices the combination, [`trace`] stores and synthesizes the
//! per-step data the gate replays, and [`analyzer`] measures how concentrated
//! dumped attention maps are layer by layer. [`linalg`] is the dense kernel
//! underneath.
//!
//! ```
//! use flashgate::ics::{contribution_scores, select_top_k};
//! use flashgate::linalg::{DenseMatrix, DEFAULT_RANK_TOLERANCE};
//!
//! let tokens = DenseMatrix::from_rows(&[[3.0, 0.0], [0.0, 2.0], [0.0, 0.0]])?;
//! let scores = contribution_scores(&tokens, DEFAULT_RANK_TOLERANCE)?;
//! assert_eq!(scores.scores(), &[3.0, 2.0, 0.0]);
//! assert_eq!(select_top_k(&scores, 2)?.indices(), &[0, 1]);
//! # Ok::<(), flashgate::Error>(())
//! ```

pub mod analyzer;
mod error;
pub mod flops;
pub mod gate;
pub mod ics;
pub mod linalg;
pub mod trace;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/svd.md")]
    mod svd {}
    #[doc = include_str!("../../../book/src/token-selection.md")]
    mod token_selection {}
    #[doc = include_str!("../../../book/src/reuse-gate.md")]
    mod reuse_gate {}
    #[doc = include_str!("../../../book/src/cost-model.md")]
    mod cost_model {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/attention.md")]
    mod attention {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
