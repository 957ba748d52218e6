//! On-disk formats and synthetic data.
//!
//! * Step traces are JSONL, one [`TraceStep`] per line.
//! * Tensors use the little-endian `FVTS` container (see [`tensor`]).
//! * [`synthesize_trace`] produces seeded traces with stable plateaus.

mod jsonl;
mod synth;
pub mod tensor;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use jsonl::{read_trace, write_trace};
pub use synth::{synthesize_trace, SynthSpec};
pub use tensor::{read_tensor, write_tensor, Tensor};

use crate::error::{invalid, Result};
use crate::gate::{ActionVector, Observation};
use crate::ics::{contribution_scores, select_top_k, TokenSet};

/// Where a step's selected token set comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TokenSource {
    /// The set itself.
    Set { set: TokenSet },
    /// A matrix inside a tensor file; the set is its top-`k` ICS selection.
    Tensor { tensor: PathBuf, index: usize },
}

/// One step of a recorded or synthesized episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: u64,
    pub action: ActionVector,
    pub tokens: TokenSource,
    pub done: bool,
}

/// Turns [`TokenSource`]s into token sets, loading each referenced tensor
/// file once.
#[derive(Debug)]
pub struct TokenResolver {
    base_dir: PathBuf,
    budget: Option<usize>,
    rank_tolerance: f64,
    cache: HashMap<PathBuf, Tensor>,
}

impl TokenResolver {
    /// `base_dir` anchors relative tensor paths. `budget` is the `k` used for
    /// tensor-backed steps and may be omitted for traces with inline sets.
    pub fn new(base_dir: impl Into<PathBuf>, budget: Option<usize>, rank_tolerance: f64) -> Self {
        Self {
            base_dir: base_dir.into(),
            budget,
            rank_tolerance,
            cache: HashMap::new(),
        }
    }

    pub fn resolve(&mut self, source: &TokenSource) -> Result<TokenSet> {
        match source {
            TokenSource::Set { set } => Ok(set.clone()),
            TokenSource::Tensor { tensor, index } => {
                let Some(k) = self.budget else {
                    return invalid("trace references a tensor but no token budget was given");
                };
                let path = self.base_dir.join(tensor);
                if !self.cache.contains_key(&path) {
                    let loaded = tensor::read_tensor_file(&path)?;
                    self.cache.insert(path.clone(), loaded);
                }
                let matrix = self.cache[&path].matrix(*index)?;
                select_top_k(&contribution_scores(&matrix, self.rank_tolerance)?, k)
            }
        }
    }
}

/// Resolves every step of a trace into gate observations.
pub fn observations(steps: &[TraceStep], resolver: &mut TokenResolver) -> Result<Vec<Observation>> {
    steps
        .iter()
        .map(|s| {
            Ok(Observation {
                action: s.action.clone(),
                tokens: resolver.resolve(&s.tokens)?,
            })
        })
        .collect()
}

/// Observations for a trace whose steps all carry inline sets.
pub fn inline_observations(steps: &[TraceStep]) -> Result<Vec<Observation>> {
    observations(
        steps,
        &mut TokenResolver::new(Path::new("."), None, crate::linalg::DEFAULT_RANK_TOLERANCE),
    )
}
