//! Action-reuse gate.
//!
//! Before each policy call the gate looks at the last two *inferred* actions
//! and token sets. If the action direction barely moved and the selected
//! token set barely changed, the previous action is emitted again and the
//! policy call is skipped. Reuse never happens in the first two steps and
//! never on two consecutive steps, and reused steps do not touch the
//! memories.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ics::TokenSet;
use crate::linalg::vector_angle_deg;

/// A policy output vector, e.g. 6 end-effector deltas plus a gripper command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ActionVector(Vec<f64>);

impl ActionVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return invalid("action vector must have at least one component");
        }
        if let Some(i) = components.iter().position(|c| !c.is_finite()) {
            return invalid(format!("action component {i} is not finite"));
        }
        Ok(Self(components))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for ActionVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ActionVector::new(v)
    }
}

impl From<ActionVector> for Vec<f64> {
    fn from(a: ActionVector) -> Self {
        a.0
    }
}

/// Which inequality the trigger uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriggerMode {
    /// Reuse when `angle <= epsilon1` and `overlap >= epsilon2`: small motion,
    /// stable tokens.
    #[default]
    MotivationConsistent,
    /// Reuse when `angle > epsilon1` and `overlap > epsilon2`, the inequality
    /// exactly as it is usually printed. Kept for auditing.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateConfig {
    /// Angle threshold in degrees.
    pub epsilon1: f64,
    /// Number of token-set changes tolerated between the two remembered sets.
    pub delta: f64,
    pub mode: TriggerMode,
    /// Fixed overlap threshold; when set, `delta` is ignored.
    pub epsilon2_override: Option<f64>,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            epsilon1: 2.0,
            delta: 3.0,
            mode: TriggerMode::MotivationConsistent,
            epsilon2_override: None,
        }
    }
}

impl GateConfig {
    pub fn new(epsilon1: f64, delta: f64) -> Result<Self> {
        let cfg = Self {
            epsilon1,
            delta,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_mode(mut self, mode: TriggerMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon1.is_finite() && self.epsilon1 >= 0.0) {
            return invalid(format!(
                "epsilon1 must be finite and >= 0, got {}",
                self.epsilon1
            ));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return invalid(format!("delta must be finite and >= 0, got {}", self.delta));
        }
        if let Some(e2) = self.epsilon2_override {
            if !(0.0..=1.0).contains(&e2) {
                return invalid(format!("epsilon2 override must lie in [0, 1], got {e2}"));
            }
        }
        Ok(())
    }

    /// Overlap threshold for a remembered set of `set_size` tokens.
    ///
    /// A `delta` larger than the set clamps the threshold to 0 (any overlap
    /// passes) instead of failing mid-episode.
    pub fn epsilon2_for(&self, set_size: usize) -> f64 {
        match self.epsilon2_override {
            Some(e2) => e2,
            None => epsilon2_from_delta(self.delta.min(set_size as f64), set_size).unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ReuseAction,
    PrunedInference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionReason {
    Warmup,
    ConsecutiveBlock,
    PredicatePass,
    PredicateFail,
    DegenerateAction,
}

impl fmt::Display for DecisionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Warmup => "warmup",
            Self::ConsecutiveBlock => "consecutive-block",
            Self::PredicatePass => "predicate-pass",
            Self::PredicateFail => "predicate-fail",
            Self::DegenerateAction => "degenerate-action",
        })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ReuseAction => "reuse",
            Self::PrunedInference => "infer",
        })
    }
}

/// Outcome of one trigger evaluation, with the quantities that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub step: u64,
    pub verdict: Verdict,
    pub reason: DecisionReason,
    pub alpha_deg: Option<f64>,
    pub phi: Option<f64>,
    /// Absent only while the token memory is still empty.
    pub epsilon2: Option<f64>,
}

impl GateDecision {
    pub fn is_reuse(&self) -> bool {
        self.verdict == Verdict::ReuseAction
    }
}

/// Action and token memories plus the step counter and last-reuse flag.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GateState {
    step: u64,
    actions: VecDeque<ActionVector>,
    tokens: VecDeque<TokenSet>,
    last_reuse: bool,
}

impl GateState {
    pub fn new() -> Self {
        Self {
            step: 1,
            ..Default::default()
        }
    }

    /// 1-based index of the step that will be decided next.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Remembered actions, oldest first. At most two.
    pub fn action_memory(&self) -> impl Iterator<Item = &ActionVector> {
        self.actions.iter()
    }

    /// Remembered token sets, oldest first. At most two.
    pub fn token_memory(&self) -> impl Iterator<Item = &TokenSet> {
        self.tokens.iter()
    }

    pub fn last_reuse(&self) -> bool {
        self.last_reuse
    }

    fn action_dim(&self) -> Option<usize> {
        self.actions.back().map(ActionVector::dim)
    }

    fn remember(&mut self, action: ActionVector, tokens: TokenSet) {
        if self.actions.len() == 2 {
            self.actions.pop_front();
        }
        if self.tokens.len() == 2 {
            self.tokens.pop_front();
        }
        self.actions.push_back(action);
        self.tokens.push_back(tokens);
    }
}

/// Fraction of `current` that also appears in `previous`.
pub fn token_overlap(previous: &TokenSet, current: &TokenSet) -> Result<f64> {
    if current.is_empty() {
        return invalid("current token set is empty");
    }
    Ok(previous.intersection_len(current) as f64 / current.len() as f64)
}

/// Overlap threshold `1 - delta / set_size`.
pub fn epsilon2_from_delta(delta: f64, set_size: usize) -> Result<f64> {
    if set_size == 0 {
        return invalid("token set size must be positive");
    }
    if delta.is_nan() || delta < 0.0 {
        return invalid(format!("delta must be >= 0, got {delta}"));
    }
    if delta > set_size as f64 {
        return invalid(format!("delta {delta} exceeds token set size {set_size}"));
    }
    Ok(1.0 - delta / set_size as f64)
}

/// Evaluates the trigger for the step `state` is about to take.
pub fn trigger_decide(state: &GateState, config: &GateConfig) -> GateDecision {
    let epsilon2 = state.tokens.back().map(|t| config.epsilon2_for(t.len()));
    let mut decision = GateDecision {
        step: state.step,
        verdict: Verdict::PrunedInference,
        reason: DecisionReason::Warmup,
        alpha_deg: None,
        phi: None,
        epsilon2,
    };
    if state.step <= 2 || state.actions.len() < 2 || state.tokens.len() < 2 {
        return decision;
    }
    if state.last_reuse {
        decision.reason = DecisionReason::ConsecutiveBlock;
        return decision;
    }
    let alpha = match vector_angle_deg(state.actions[0].components(), state.actions[1].components())
    {
        Ok(a) => a,
        Err(_) => {
            decision.reason = DecisionReason::DegenerateAction;
            return decision;
        }
    };
    let phi =
        token_overlap(&state.tokens[0], &state.tokens[1]).expect("token sets are never empty");
    let epsilon2 = epsilon2.expect("token memory is full");
    decision.alpha_deg = Some(alpha);
    decision.phi = Some(phi);
    let pass = match config.mode {
        TriggerMode::MotivationConsistent => alpha <= config.epsilon1 && phi >= epsilon2,
        TriggerMode::Literal => alpha > config.epsilon1 && phi > epsilon2,
    };
    if pass {
        decision.verdict = Verdict::ReuseAction;
        decision.reason = DecisionReason::PredicatePass;
    } else {
        decision.reason = DecisionReason::PredicateFail;
    }
    decision
}

/// What the policy would produce at this step if it were run.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub action: ActionVector,
    pub tokens: TokenSet,
}

/// One gate step. On reuse the remembered latest action is emitted and the
/// memories are left alone; otherwise the candidate is emitted and shifted
/// into memory.
pub fn gate_step(
    state: &GateState,
    config: &GateConfig,
    observation: &Observation,
) -> Result<(GateDecision, ActionVector, GateState)> {
    let candidate = &observation.action;
    if let Some(i) = candidate.components().iter().position(|c| !c.is_finite()) {
        return invalid(format!("candidate action component {i} is not finite"));
    }
    if let Some(dim) = state.action_dim() {
        if dim != candidate.dim() {
            return invalid(format!(
                "candidate action has dimension {}, memory holds {dim}",
                candidate.dim()
            ));
        }
    }
    let decision = trigger_decide(state, config);
    let mut next = state.clone();
    next.step += 1;
    let emitted = match decision.verdict {
        Verdict::ReuseAction => {
            next.last_reuse = true;
            state
                .actions
                .back()
                .cloned()
                .expect("reuse requires a full memory")
        }
        Verdict::PrunedInference => {
            next.remember(candidate.clone(), observation.tokens.clone());
            next.last_reuse = false;
            candidate.clone()
        }
    };
    Ok((decision, emitted, next))
}

/// Owned, mutable wrapper around [`gate_step`] for sequential use.
#[derive(Debug, Clone)]
pub struct FlashTrigger {
    config: GateConfig,
    state: GateState,
}

impl FlashTrigger {
    pub fn new(config: GateConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            state: GateState::new(),
        })
    }

    pub fn config(&self) -> &GateConfig {
        &self.config
    }

    pub fn state(&self) -> &GateState {
        &self.state
    }

    pub fn step(&mut self, observation: &Observation) -> Result<(GateDecision, ActionVector)> {
        let (decision, action, next) = gate_step(&self.state, &self.config, observation)?;
        self.state = next;
        Ok((decision, action))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub reuse_rate: f64,
    pub decisions: Vec<GateDecision>,
    pub emitted: Vec<ActionVector>,
}

impl ReplayReport {
    pub fn reuse_count(&self) -> usize {
        self.decisions.iter().filter(|d| d.is_reuse()).count()
    }
}

/// Runs a fresh gate over `trace` and reports the reuse rate.
pub fn replay_metrics(trace: &[Observation], config: &GateConfig) -> Result<ReplayReport> {
    if trace.is_empty() {
        return invalid("trace must contain at least one observation");
    }
    let mut gate = FlashTrigger::new(*config)?;
    let mut decisions = Vec::with_capacity(trace.len());
    let mut emitted = Vec::with_capacity(trace.len());
    for obs in trace {
        let (d, a) = gate.step(obs)?;
        decisions.push(d);
        emitted.push(a);
    }
    let reuses = decisions.iter().filter(|d| d.is_reuse()).count();
    Ok(ReplayReport {
        reuse_rate: reuses as f64 / trace.len() as f64,
        decisions,
        emitted,
    })
}
