use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};

use super::{TokenSource, TraceStep};
use crate::error::{invalid, Result};
use crate::gate::ActionVector;
use crate::ics::TokenSet;

/// Parameters of a synthetic trace.
///
/// Steps are either *stable* (the previous action rotated by at most
/// `angle_noise_deg` and exactly `token_churn` indices swapped out of the
/// token set) or *fresh* (a new random unit direction and a new random
/// `token_budget`-subset). The first step is always fresh; of the remaining
/// steps, `round(plateau_fraction * (length - 1))` are stable. Stable runs
/// have geometric lengths with mean `plateau_run_length` (the last one cut to
/// fit) and the fresh steps are scattered uniformly over the gaps between
/// them, at least one per gap.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub length: usize,
    pub action_dim: usize,
    pub plateau_fraction: f64,
    pub plateau_run_length: f64,
    pub angle_noise_deg: f64,
    pub token_universe: usize,
    pub token_budget: usize,
    pub token_churn: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            length: 500,
            action_dim: 7,
            plateau_fraction: 0.8,
            plateau_run_length: 20.0,
            angle_noise_deg: 0.5,
            token_universe: 256,
            token_budget: 192,
            token_churn: 1,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// The seeded trace used for threshold sweeps: long plateaus, sub-degree
    /// jitter and one token swap per stable step.
    pub fn reference() -> Self {
        Self {
            length: 1000,
            angle_noise_deg: 0.2,
            seed: 6,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.action_dim == 0 {
            return invalid("length and action_dim must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.plateau_fraction) {
            return invalid(format!(
                "plateau_fraction {} outside [0, 1]",
                self.plateau_fraction
            ));
        }
        if !(self.plateau_run_length >= 1.0 && self.plateau_run_length.is_finite()) {
            return invalid(format!(
                "plateau_run_length {} must be >= 1",
                self.plateau_run_length
            ));
        }
        if !(0.0..=180.0).contains(&self.angle_noise_deg) {
            return invalid(format!(
                "angle_noise_deg {} outside [0, 180]",
                self.angle_noise_deg
            ));
        }
        if self.token_budget == 0 || self.token_budget > self.token_universe {
            return invalid(format!(
                "token_budget {} outside 1..={}",
                self.token_budget, self.token_universe
            ));
        }
        if self.token_churn > self.token_budget
            || self.token_churn > self.token_universe - self.token_budget
        {
            return invalid(format!(
                "token_churn {} needs that many selected and unselected tokens",
                self.token_churn
            ));
        }
        Ok(())
    }
}

/// Generates a trace from `spec`. Deterministic for a fixed seed.
pub fn synthesize_trace(spec: &SynthSpec) -> Result<Vec<TraceStep>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let layout = layout(&mut rng, spec);

    let mut action = random_unit(&mut rng, spec.action_dim);
    let mut tokens = random_subset(&mut rng, spec.token_universe, spec.token_budget);
    let mut out = Vec::with_capacity(spec.length);
    push(&mut out, &action, &tokens);
    for stable in layout {
        if stable {
            action = perturb(&mut rng, &action, spec.angle_noise_deg);
            churn(&mut rng, &mut tokens, spec.token_universe, spec.token_churn);
        } else {
            action = random_unit(&mut rng, spec.action_dim);
            tokens = random_subset(&mut rng, spec.token_universe, spec.token_budget);
        }
        push(&mut out, &action, &tokens);
    }
    if let Some(last) = out.last_mut() {
        last.done = true;
    }
    Ok(out)
}

/// Stable (`true`) or fresh (`false`) for steps `2..=length`.
fn layout<R: Rng>(rng: &mut R, spec: &SynthSpec) -> Vec<bool> {
    let n = spec.length - 1;
    let stable = ((spec.plateau_fraction * n as f64).round() as usize).min(n);
    let fresh = n - stable;
    let run_len = Geometric::new(1.0 / spec.plateau_run_length).expect("valid probability");
    let mut runs = Vec::new();
    let mut placed = 0usize;
    while placed < stable {
        let draw = usize::try_from(run_len.sample(rng))
            .unwrap_or(usize::MAX)
            .saturating_add(1);
        let len = draw.min(stable - placed);
        runs.push(len);
        placed += len;
    }
    while runs.len() >= 2 && runs.len() - 1 > fresh {
        let last = runs.pop().expect("two runs");
        *runs.last_mut().expect("one run") += last;
    }
    // slot i holds the fresh steps before run i; the final slot trails the last run
    let mut gaps = vec![0usize; runs.len() + 1];
    for gap in gaps.iter_mut().take(runs.len()).skip(1) {
        *gap = 1;
    }
    for _ in 0..fresh - gaps.iter().sum::<usize>() {
        let slot = rng.random_range(0..gaps.len());
        gaps[slot] += 1;
    }
    let mut out = Vec::with_capacity(n);
    for (i, gap) in gaps.iter().enumerate() {
        out.extend(std::iter::repeat_n(false, *gap));
        if let Some(&run) = runs.get(i) {
            out.extend(std::iter::repeat_n(true, run));
        }
    }
    out
}

fn push(out: &mut Vec<TraceStep>, action: &[f64], tokens: &[usize]) {
    out.push(TraceStep {
        step: out.len() as u64 + 1,
        action: ActionVector::new(action.to_vec()).expect("unit vectors are finite"),
        tokens: TokenSource::Set {
            set: TokenSet::from_indices(tokens.to_vec()).expect("subset is non-empty and distinct"),
        },
        done: false,
    });
}

fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::linalg::norm(&v);
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Rotates the unit vector `v` by a uniform angle in `[0, max_deg]` toward a
/// random orthogonal direction.
fn perturb<R: Rng>(rng: &mut R, v: &[f64], max_deg: f64) -> Vec<f64> {
    if max_deg == 0.0 || v.len() < 2 {
        return v.to_vec();
    }
    let theta = rng.random_range(0.0..=max_deg).to_radians();
    let w = loop {
        let mut w = random_unit(rng, v.len());
        let proj = crate::linalg::dot(&w, v);
        w.iter_mut().zip(v).for_each(|(x, y)| *x -= proj * y);
        let n = crate::linalg::norm(&w);
        if n > 1e-6 {
            break w.into_iter().map(|x| x / n).collect::<Vec<_>>();
        }
    };
    v.iter()
        .zip(&w)
        .map(|(a, b)| theta.cos() * a + theta.sin() * b)
        .collect()
}

/// First `k` entries of a seeded Fisher-Yates shuffle of `0..n`, sorted.
fn random_subset<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    fisher_yates_prefix(rng, &mut pool, k);
    pool.truncate(k);
    pool.sort_unstable();
    pool
}

fn fisher_yates_prefix<R: Rng>(rng: &mut R, pool: &mut [usize], k: usize) {
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
}

/// Swaps exactly `count` members of `set` for non-members.
fn churn<R: Rng>(rng: &mut R, set: &mut [usize], universe: usize, count: usize) {
    if count == 0 {
        return;
    }
    let mut outside: Vec<usize> = (0..universe)
        .filter(|i| set.binary_search(i).is_err())
        .collect();
    fisher_yates_prefix(rng, set, count);
    fisher_yates_prefix(rng, &mut outside, count);
    set[..count].copy_from_slice(&outside[..count]);
    set.sort_unstable();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector_angle_deg;
    use crate::trace::write_trace;

    fn set_of(step: &TraceStep) -> &TokenSet {
        match &step.tokens {
            TokenSource::Set { set } => set,
            TokenSource::Tensor { .. } => panic!("synthetic steps carry inline sets"),
        }
    }

    #[test]
    fn fully_stable_spec_is_constant() {
        let spec = SynthSpec {
            plateau_fraction: 1.0,
            angle_noise_deg: 0.0,
            token_churn: 0,
            length: 50,
            ..SynthSpec::default()
        };
        let trace = synthesize_trace(&spec).unwrap();
        assert_eq!(trace.len(), 50);
        for s in &trace[1..] {
            assert_eq!(s.action, trace[0].action);
            assert_eq!(s.tokens, trace[0].tokens);
        }
        assert!(trace.last().unwrap().done);
        assert!(trace[..49].iter().all(|s| !s.done));
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SynthSpec::default();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_trace(&synthesize_trace(&spec).unwrap(), &mut a).unwrap();
        write_trace(&synthesize_trace(&spec).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        let other = SynthSpec { seed: 1, ..spec };
        write_trace(&synthesize_trace(&other).unwrap(), &mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn independent_actions_average_ninety_degrees() {
        let spec = SynthSpec {
            length: 10_000,
            action_dim: 64,
            plateau_fraction: 0.0,
            seed: 11,
            ..SynthSpec::default()
        };
        let trace = synthesize_trace(&spec).unwrap();
        let mean: f64 = trace
            .windows(2)
            .map(|w| vector_angle_deg(w[0].action.components(), w[1].action.components()).unwrap())
            .sum::<f64>()
            / (trace.len() - 1) as f64;
        assert!((mean - 90.0).abs() <= 3.0, "mean angle {mean}");
    }

    #[test]
    fn plateau_steps_respect_noise_and_churn() {
        let spec = SynthSpec {
            length: 2000,
            angle_noise_deg: 0.7,
            token_churn: 3,
            seed: 3,
            ..SynthSpec::default()
        };
        let trace = synthesize_trace(&spec).unwrap();
        let mut stable = 0usize;
        for w in trace.windows(2) {
            let angle =
                vector_angle_deg(w[0].action.components(), w[1].action.components()).unwrap();
            let shared = set_of(&w[0]).intersection_len(set_of(&w[1]));
            // a fresh draw almost never lands this close
            if angle <= 0.7 + 1e-6 {
                stable += 1;
                assert_eq!(spec.token_budget - shared, 3);
            }
        }
        let share = stable as f64 / trace.len() as f64;
        assert!((share - 0.8).abs() <= 0.05, "plateau share {share}");
    }

    #[test]
    fn realized_share_tracks_fraction() {
        for p in [0.0, 0.2, 0.5, 0.8, 1.0] {
            for seed in 0..20 {
                let spec = SynthSpec {
                    plateau_fraction: p,
                    angle_noise_deg: 0.0,
                    token_churn: 0,
                    seed,
                    ..SynthSpec::default()
                };
                let trace = synthesize_trace(&spec).unwrap();
                assert_eq!(trace.len(), 500);
                let stable = trace
                    .windows(2)
                    .filter(|w| w[0].action == w[1].action)
                    .count();
                let share = stable as f64 / trace.len() as f64;
                assert!((share - p).abs() <= 0.05, "p={p} seed={seed} share={share}");
            }
        }
    }

    #[test]
    fn short_and_single_step_traces() {
        for length in [1, 2, 3] {
            let spec = SynthSpec {
                length,
                ..SynthSpec::default()
            };
            assert_eq!(synthesize_trace(&spec).unwrap().len(), length);
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            SynthSpec {
                length: 0,
                ..SynthSpec::default()
            },
            SynthSpec {
                plateau_fraction: 1.5,
                ..SynthSpec::default()
            },
            SynthSpec {
                plateau_run_length: 0.5,
                ..SynthSpec::default()
            },
            SynthSpec {
                angle_noise_deg: -1.0,
                ..SynthSpec::default()
            },
            SynthSpec {
                token_budget: 300,
                ..SynthSpec::default()
            },
            SynthSpec {
                token_churn: 65,
                ..SynthSpec::default()
            },
            SynthSpec {
                token_budget: 4,
                token_churn: 5,
                ..SynthSpec::default()
            },
        ];
        for spec in bad {
            assert!(synthesize_trace(&spec).is_err(), "{spec:?}");
        }
    }
}
