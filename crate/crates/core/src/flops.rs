//! Closed-form visual-token cost model for a decoder-only transformer.
//!
//! One layer over `t` tokens costs `4·t·d² + 2·t²·d + 2·t·d·m` FLOPs
//! (projections, attention scores, FFN). The first `prune_layer` layers see
//! all `tokens`; the remaining layers see `pruned_tokens`. The whole sum is
//! scaled by `1 - reuse_rate`, since reused steps run no layers at all.

use serde::Serialize;

use crate::error::{invalid, Result};

/// Hidden size of the 7B LLaMA backbone.
pub const DEFAULT_HIDDEN: u64 = 4096;
/// FFN intermediate size of the 7B LLaMA backbone.
pub const DEFAULT_FFN: u64 = 11008;
pub const DEFAULT_LAYERS: u64 = 32;
pub const DEFAULT_PRUNE_LAYER: u64 = 2;
pub const DEFAULT_TOKENS: u64 = 256;

/// Cost-model inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlopsParams {
    /// Visual tokens entering the backbone.
    pub tokens: u64,
    pub hidden: u64,
    pub ffn: u64,
    pub layers: u64,
    /// Layers before this index run on all tokens.
    pub prune_layer: u64,
    /// Tokens kept from `prune_layer` on.
    pub pruned_tokens: u64,
    pub reuse_rate: f64,
}

impl Default for FlopsParams {
    fn default() -> Self {
        Self {
            tokens: DEFAULT_TOKENS,
            hidden: DEFAULT_HIDDEN,
            ffn: DEFAULT_FFN,
            layers: DEFAULT_LAYERS,
            prune_layer: DEFAULT_PRUNE_LAYER,
            pruned_tokens: DEFAULT_TOKENS,
            reuse_rate: 0.0,
        }
    }
}

impl FlopsParams {
    /// Default backbone with `pruned_tokens` of 256 kept and the given reuse
    /// rate.
    pub fn pruned(pruned_tokens: u64, reuse_rate: f64) -> Self {
        Self {
            pruned_tokens,
            reuse_rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens == 0 || self.hidden == 0 || self.ffn == 0 || self.layers == 0 {
            return invalid("tokens, hidden, ffn and layers must all be >= 1");
        }
        if self.prune_layer > self.layers {
            return invalid(format!(
                "prune layer {} exceeds layer count {}",
                self.prune_layer, self.layers
            ));
        }
        if self.pruned_tokens == 0 || self.pruned_tokens > self.tokens {
            return invalid(format!(
                "pruned token count {} outside 1..={}",
                self.pruned_tokens, self.tokens
            ));
        }
        if !(0.0..=1.0).contains(&self.reuse_rate) {
            return invalid(format!("reuse rate {} outside [0, 1]", self.reuse_rate));
        }
        Ok(())
    }

    pub fn with_reuse_rate(self, reuse_rate: f64) -> Self {
        Self { reuse_rate, ..self }
    }

    pub fn without_pruning(self) -> Self {
        Self {
            pruned_tokens: self.tokens,
            ..self
        }
    }
}

/// FLOPs of one transformer layer over `tokens` tokens. Exact in 128-bit
/// integers, falling back to floating point on overflow.
pub fn layer_cost(tokens: u64, hidden: u64, ffn: u64) -> Result<f64> {
    if tokens == 0 || hidden == 0 || ffn == 0 {
        return invalid("layer cost needs tokens, hidden and ffn >= 1");
    }
    let (t, d, m) = (tokens as u128, hidden as u128, ffn as u128);
    let exact = (|| {
        let proj = 4u128.checked_mul(t)?.checked_mul(d)?.checked_mul(d)?;
        let attn = 2u128.checked_mul(t)?.checked_mul(t)?.checked_mul(d)?;
        let ffn = 2u128.checked_mul(t)?.checked_mul(d)?.checked_mul(m)?;
        proj.checked_add(attn)?.checked_add(ffn)
    })();
    Ok(match exact {
        Some(v) => v as f64,
        None => {
            let (t, d, m) = (tokens as f64, hidden as f64, ffn as f64);
            4.0 * t * d * d + 2.0 * t * t * d + 2.0 * t * d * m
        }
    })
}

pub fn estimate_flops(params: &FlopsParams) -> Result<f64> {
    params.validate()?;
    let full = layer_cost(params.tokens, params.hidden, params.ffn)?;
    let pruned = layer_cost(params.pruned_tokens, params.hidden, params.ffn)?;
    let per_step =
        params.prune_layer as f64 * full + (params.layers - params.prune_layer) as f64 * pruned;
    Ok((1.0 - params.reuse_rate) * per_step)
}

/// Cost at three cumulative stages and how the total saving splits between
/// pruning and reuse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SavingsBreakdown {
    pub baseline: f64,
    pub after_pruning: f64,
    pub after_pruning_and_reuse: f64,
    pub pruning_share: f64,
    pub reuse_share: f64,
}

pub fn savings_breakdown(params: &FlopsParams) -> Result<SavingsBreakdown> {
    let baseline = estimate_flops(&params.without_pruning().with_reuse_rate(0.0))?;
    let after_pruning = estimate_flops(&params.with_reuse_rate(0.0))?;
    let after_pruning_and_reuse = estimate_flops(params)?;
    let saved = baseline - after_pruning_and_reuse;
    let (pruning_share, reuse_share) = if saved > 0.0 {
        let p = (baseline - after_pruning) / saved;
        (p, 1.0 - p)
    } else {
        (0.0, 0.0)
    };
    Ok(SavingsBreakdown {
        baseline,
        after_pruning,
        after_pruning_and_reuse,
        pruning_share,
        reuse_share,
    })
}

/// Reuse rate that turns the zero-reuse cost of `params` into `observed`.
/// The reuse rate stored in `params` is ignored.
pub fn implied_reuse_rate(observed: f64, params: &FlopsParams) -> Result<f64> {
    let at_zero = estimate_flops(&params.with_reuse_rate(0.0))?;
    reuse_rate_between(observed, at_zero)
}

/// `1 - observed / at_zero` for two costs given directly.
pub fn reuse_rate_between(observed: f64, at_zero: f64) -> Result<f64> {
    if !(at_zero > 0.0 && at_zero.is_finite()) {
        return invalid(format!("zero-reuse cost must be positive, got {at_zero}"));
    }
    if observed.is_nan() || observed <= 0.0 {
        return invalid(format!("observed FLOPs must be positive, got {observed}"));
    }
    if observed > at_zero {
        return invalid(format!(
            "observed FLOPs {observed:e} exceed the zero-reuse cost {at_zero:e}"
        ));
    }
    Ok(1.0 - observed / at_zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_layer_cost() {
        assert_eq!(layer_cost(1, 1, 1).unwrap(), 8.0);
        assert!(layer_cost(0, 1, 1).is_err());
        assert!(layer_cost(1, 0, 1).is_err());
    }

    #[test]
    fn full_width_layer_cost() {
        // 4·256·4096² + 2·256²·4096 + 2·256·4096·11008
        let expected = 17_179_869_184.0 + 536_870_912.0 + 23_085_449_216.0;
        assert_eq!(layer_cost(256, 4096, 11008).unwrap(), expected);
        assert!((32.0 * expected / 1e12 - 1.3057).abs() < 1e-4);
    }

    #[test]
    fn huge_layer_falls_back_to_float() {
        let v = layer_cost(u64::MAX, u64::MAX, u64::MAX).unwrap();
        assert!(v.is_finite() && v > 1e57);
    }

    #[test]
    fn baseline_and_pruned_costs() {
        let base = estimate_flops(&FlopsParams::default()).unwrap();
        assert!((base / 1e12 - 1.31).abs() / 1.31 < 0.01);
        let p192 = estimate_flops(&FlopsParams::pruned(192, 0.0)).unwrap();
        assert!((p192 / 1e12 - 1.00).abs() < 0.01);
        assert_eq!(estimate_flops(&FlopsParams::pruned(192, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn validation() {
        let bad = [
            FlopsParams {
                tokens: 0,
                ..Default::default()
            },
            FlopsParams {
                prune_layer: 33,
                ..Default::default()
            },
            FlopsParams::pruned(0, 0.0),
            FlopsParams::pruned(257, 0.0),
            FlopsParams::pruned(192, 1.5),
            FlopsParams::pruned(192, f64::NAN),
        ];
        for p in bad {
            assert!(estimate_flops(&p).is_err(), "{p:?}");
        }
    }

    #[test]
    fn unpruned_cost_ignores_prune_layer() {
        let a = estimate_flops(&FlopsParams {
            prune_layer: 0,
            ..Default::default()
        })
        .unwrap();
        let b = estimate_flops(&FlopsParams {
            prune_layer: 17,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn breakdown_no_op() {
        let b = savings_breakdown(&FlopsParams::default()).unwrap();
        assert_eq!(b.baseline, b.after_pruning_and_reuse);
        assert_eq!((b.pruning_share, b.reuse_share), (0.0, 0.0));
    }

    #[test]
    fn breakdown_192_tokens_twenty_percent_reuse() {
        let b = savings_breakdown(&FlopsParams::pruned(192, 0.20)).unwrap();
        assert!((b.after_pruning_and_reuse / 1e12 - 0.80).abs() < 0.01);
        assert!((b.after_pruning_and_reuse - 0.8 * b.after_pruning).abs() < 1.0);
        assert!((b.pruning_share + b.reuse_share - 1.0).abs() < 1e-12);
        assert!(b.baseline >= b.after_pruning && b.after_pruning >= b.after_pruning_and_reuse);
    }

    #[test]
    fn implied_rates() {
        let p192 = FlopsParams::pruned(192, 0.0);
        let at_zero = estimate_flops(&p192).unwrap();
        assert_eq!(implied_reuse_rate(at_zero, &p192).unwrap(), 0.0);
        let r = implied_reuse_rate(0.80e12, &FlopsParams::pruned(192, 0.5)).unwrap();
        assert!((r - (1.0 - 0.80e12 / at_zero)).abs() < 1e-12);
        assert!((r - 0.20).abs() < 0.01);
        assert!(implied_reuse_rate(at_zero * 1.01, &p192).is_err());
        assert!(implied_reuse_rate(0.0, &p192).is_err());
    }

    #[test]
    fn implied_rate_on_raw_costs() {
        let r = reuse_rate_between(0.66e12, 0.85e12).unwrap();
        assert!((r - 0.2235).abs() < 1e-4);
        assert!(reuse_rate_between(1.0, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone_in_reuse_and_pruning(np in 1u64..=256, r1 in 0.0f64..1.0, r2 in 0.0f64..1.0) {
                let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
                let a = estimate_flops(&FlopsParams::pruned(np, lo)).unwrap();
                let b = estimate_flops(&FlopsParams::pruned(np, hi)).unwrap();
                prop_assert!(b <= a);
                if hi > lo { prop_assert!(b < a); }
                if np > 1 {
                    let fewer = estimate_flops(&FlopsParams::pruned(np - 1, lo)).unwrap();
                    prop_assert!(fewer < a);
                }
                let s = savings_breakdown(&FlopsParams::pruned(np, hi)).unwrap();
                prop_assert!(s.baseline >= s.after_pruning && s.after_pruning >= s.after_pruning_and_reuse);
            }

            #[test]
            fn layer_cost_increasing(t in 1u64..5000, d in 1u64..5000, m in 1u64..20000) {
                let base = layer_cost(t, d, m).unwrap();
                prop_assert!(layer_cost(t + 1, d, m).unwrap() > base);
                prop_assert!(layer_cost(t, d + 1, m).unwrap() > base);
                prop_assert!(layer_cost(t, d, m + 1).unwrap() > base);
            }
        }
    }
}
