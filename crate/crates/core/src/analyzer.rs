//! Layer-wise attention concentration.
//!
//! For each layer the attention weights are averaged over heads and the
//! final query row is kept: the distribution of attention the last position
//! pays to every key. Concentration of that vector is summarised by entropy,
//! top-k mass and the Gini coefficient.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::trace::Tensor;

/// Allowed deviation of an attention row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-3;

/// `k` values reported by [`sparsity_profile`].
pub const TOP_K: [usize; 3] = [8, 16, 32];

/// Softmax attention weights indexed `(layer, head, query, key)`.
#[derive(Debug, Clone)]
pub struct AttentionDump {
    layers: usize,
    heads: usize,
    queries: usize,
    keys: usize,
    values: Vec<f64>,
}

impl AttentionDump {
    /// Validates non-negativity (exact) and unit row sums (within
    /// [`ROW_SUM_TOLERANCE`]).
    pub fn new(
        layers: usize,
        heads: usize,
        queries: usize,
        keys: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if layers == 0 || heads == 0 || queries == 0 || keys == 0 {
            return invalid("attention dump dimensions must be positive");
        }
        if values.len() != layers * heads * queries * keys {
            return invalid("attention dump length does not match its dimensions");
        }
        for (row_idx, row) in values.chunks_exact(keys).enumerate() {
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return invalid(format!(
                    "attention row {row_idx} has a negative or non-finite weight"
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                let q = row_idx % queries;
                let h = (row_idx / queries) % heads;
                let l = row_idx / (queries * heads);
                return invalid(format!(
                    "attention row (layer {l}, head {h}, query {q}) sums to {sum}"
                ));
            }
        }
        Ok(Self {
            layers,
            heads,
            queries,
            keys,
            values,
        })
    }

    pub fn from_tensor(tensor: &Tensor) -> Result<Self> {
        let &[l, h, q, k] = tensor.dims() else {
            return invalid(format!(
                "attention dump needs a 4-D tensor, got dims {:?}",
                tensor.dims()
            ));
        };
        Self::new(
            l,
            h,
            q,
            k,
            tensor.values().iter().map(|&v| v as f64).collect(),
        )
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn keys(&self) -> usize {
        self.keys
    }

    fn row(&self, layer: usize, head: usize, query: usize) -> &[f64] {
        let start = ((layer * self.heads + head) * self.queries + query) * self.keys;
        &self.values[start..start + self.keys]
    }
}

/// Head-averaged attention paid by the final query to every key.
pub fn last_query_scores(dump: &AttentionDump, layer: usize) -> Result<Vec<f64>> {
    if layer >= dump.layers {
        return invalid(format!(
            "layer {layer} out of range for {} layers",
            dump.layers
        ));
    }
    let mut scores = vec![0.0; dump.keys];
    for head in 0..dump.heads {
        for (s, v) in scores
            .iter_mut()
            .zip(dump.row(layer, head, dump.queries - 1))
        {
            *s += v;
        }
    }
    let h = dump.heads as f64;
    scores.iter_mut().for_each(|s| *s /= h);
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerSparsity {
    pub layer: usize,
    /// Shannon entropy in nats.
    pub entropy: f64,
    /// Mass of the `k` largest scores for each `k` in [`TOP_K`].
    pub top_k_mass: [f64; 3],
    pub gini: f64,
}

/// Shannon entropy in nats with `0 ln 0 = 0`. The input is renormalised.
pub fn entropy(p: &[f64]) -> f64 {
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let h = -p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| {
            let q = x / total;
            q * q.ln()
        })
        .sum::<f64>();
    h.max(0.0)
}

/// Share of the total held by the `k` largest entries (all of it when
/// `k >= len`).
pub fn top_k_mass(p: &[f64], k: usize) -> f64 {
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    (sorted.iter().take(k).sum::<f64>() / total).min(1.0)
}

/// Gini coefficient: 0 for uniform, `(n - 1) / n` for one-hot.
pub fn gini(p: &[f64]) -> f64 {
    let n = p.len();
    let total: f64 = p.iter().sum();
    if n == 0 || total <= 0.0 {
        return 0.0;
    }
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    // sum_i (2i - n + 1) x_(i) / (n sum x), i zero-based over ascending order
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * i as f64 - n as f64 + 1.0) * x)
        .sum();
    (weighted / (n as f64 * total)).clamp(0.0, 1.0)
}

pub fn sparsity_profile(dump: &AttentionDump) -> Result<Vec<LayerSparsity>> {
    (0..dump.layers)
        .map(|layer| {
            let scores = last_query_scores(dump, layer)?;
            Ok(LayerSparsity {
                layer,
                entropy: entropy(&scores),
                top_k_mass: TOP_K.map(|k| top_k_mass(&scores, k)),
                gini: gini(&scores),
            })
        })
        .collect()
}

/// Writes `layer,entropy,top8,top16,top32,gini` rows.
pub fn write_profile_csv<W: Write>(profile: &[LayerSparsity], mut sink: W) -> Result<()> {
    writeln!(sink, "layer,entropy,top8,top16,top32,gini")?;
    for row in profile {
        writeln!(
            sink,
            "{},{},{},{},{},{}",
            row.layer,
            row.entropy,
            row.top_k_mass[0],
            row.top_k_mass[1],
            row.top_k_mass[2],
            row.gini
        )?;
    }
    sink.flush()?;
    Ok(())
}
