mod common;

use common::rng;
use flashgate::analyzer::{last_query_scores, sparsity_profile, AttentionDump};
use flashgate::trace::Tensor;
use rand::Rng;

fn softmax_rows<R: Rng>(r: &mut R, rows: usize, keys: usize, temperature: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * keys);
    for _ in 0..rows {
        let logits: Vec<f64> = (0..keys).map(|_| r.random::<f64>() * temperature).collect();
        let max = logits.iter().cloned().fold(f64::MIN, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let s: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / s));
    }
    out
}

#[test]
fn last_query_matches_mean_then_slice() {
    let (layers, heads, queries, keys) = (3, 4, 5, 7);
    let values = softmax_rows(&mut rng(77), layers * heads * queries, keys, 4.0);
    let dump = AttentionDump::new(layers, heads, queries, keys, values.clone()).unwrap();
    for layer in 0..layers {
        // average full query x key matrices over heads, then take the last row
        let mut mean = vec![0.0; queries * keys];
        for h in 0..heads {
            let base = (layer * heads + h) * queries * keys;
            for (i, m) in mean.iter_mut().enumerate() {
                *m += values[base + i] / heads as f64;
            }
        }
        let oracle = &mean[(queries - 1) * keys..];
        let ours = last_query_scores(&dump, layer).unwrap();
        for (a, b) in ours.iter().zip(oracle) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn uniform_then_sparse_layers() {
    let (layers, heads, queries, keys) = (6, 2, 3, 256);
    let mut values = Vec::new();
    for layer in 0..layers {
        for h in 0..heads {
            for _ in 0..queries {
                if layer < 2 {
                    values.extend(std::iter::repeat_n(1.0 / keys as f32, keys));
                } else {
                    let mut row = vec![0.0f32; keys];
                    row[(layer * 31 + h) % keys] = 1.0;
                    values.extend(row);
                }
            }
        }
    }
    let tensor = Tensor::new(vec![layers, heads, queries, keys], values).unwrap();
    let profile = sparsity_profile(&AttentionDump::from_tensor(&tensor).unwrap()).unwrap();
    let uniform_entropy = (keys as f64).ln();
    for p in &profile[..2] {
        assert!((p.entropy - uniform_entropy).abs() < 1e-4);
        assert!((p.top_k_mass[0] - 8.0 / 256.0).abs() < 1e-5);
        assert!(p.gini < 1e-4);
    }
    for p in &profile[2..] {
        // two heads point at two different keys
        assert!(p.entropy <= 2f64.ln() + 1e-9);
        assert_eq!(p.top_k_mass[0], 1.0);
        assert!(p.gini > 0.99);
        assert!(p.entropy < profile[1].entropy);
    }
}
