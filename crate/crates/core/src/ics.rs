//! Information contribution scores (ICS) for visual tokens and the retention
//! quantities that compare ICS selection against uniform random selection.
//!
//! For a token matrix `T = U Σ Vᵀ` of effective rank `r`, token `x` scores
//! `C(x) = Σ_{i<r} |u_xi σ_i|`. The retained energy of a subset `S` is
//! `Σ_{x∈S} Σ_{i<r} (u_xi σ_i)²`, i.e. the squared Frobenius norm of the
//! selected rows projected onto the top-`r` right singular directions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{svd_decompose, DenseMatrix, SvdFactors};

/// Per-token information contribution scores.
#[derive(Debug, Clone, PartialEq)]
pub struct IcsScores {
    scores: Vec<f64>,
    source_rank: usize,
}

impl IcsScores {
    /// Wraps precomputed scores. Every score must be finite and non-negative.
    pub fn new(scores: Vec<f64>, source_rank: usize) -> Result<Self> {
        if scores.is_empty() {
            return invalid("score vector is empty");
        }
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return invalid("scores must be finite and non-negative");
        }
        Ok(Self {
            scores,
            source_rank,
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Effective rank of the decomposition the scores came from.
    pub fn source_rank(&self) -> usize {
        self.source_rank
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Sorted, duplicate-free set of selected token indices drawn from a universe
/// of `universe` tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct TokenSet {
    indices: Vec<usize>,
    universe: usize,
}

impl TokenSet {
    /// Builds a set from arbitrary-order indices. Duplicates, an empty set,
    /// or an index outside `0..universe` are rejected.
    pub fn new(mut indices: Vec<usize>, universe: usize) -> Result<Self> {
        if indices.is_empty() {
            return invalid("token set must be non-empty");
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return invalid("token set contains duplicate indices");
        }
        if let Some(&last) = indices.last() {
            if last >= universe {
                return invalid(format!("token index {last} outside universe of {universe}"));
            }
        }
        Ok(Self { indices, universe })
    }

    /// Builds a set whose universe is the smallest one that contains it.
    pub fn from_indices(indices: Vec<usize>) -> Result<Self> {
        let universe = indices.iter().max().map_or(0, |m| m + 1);
        Self::new(indices, universe)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of selected tokens (the budget `K`).
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    /// Size of the intersection with `other`, by a linear merge.
    pub fn intersection_len(&self, other: &TokenSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        let (a, b) = (&self.indices, &other.indices);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

impl TryFrom<Vec<usize>> for TokenSet {
    type Error = crate::Error;

    fn try_from(indices: Vec<usize>) -> Result<Self> {
        TokenSet::from_indices(indices)
    }
}

impl From<TokenSet> for Vec<usize> {
    fn from(set: TokenSet) -> Self {
        set.indices
    }
}

/// A token matrix together with its decomposition, so that scores and
/// retention values can be evaluated without refactoring the matrix.
#[derive(Debug, Clone)]
pub struct IcsAnalysis {
    factors: SvdFactors,
}

impl IcsAnalysis {
    pub fn new(tokens: &DenseMatrix, rank_tolerance: f64) -> Result<Self> {
        Ok(Self {
            factors: svd_decompose(tokens, rank_tolerance)?,
        })
    }

    pub fn from_factors(factors: SvdFactors) -> Self {
        Self { factors }
    }

    pub fn factors(&self) -> &SvdFactors {
        &self.factors
    }

    pub fn tokens(&self) -> usize {
        self.factors.rows()
    }

    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    pub fn scores(&self) -> IcsScores {
        let sigma = self.factors.sigma();
        let scores = (0..self.tokens())
            .map(|x| {
                self.factors
                    .u_row(x)
                    .iter()
                    .zip(sigma)
                    .map(|(u, s)| (u * s).abs())
                    .sum()
            })
            .collect();
        IcsScores {
            scores,
            source_rank: self.rank(),
        }
    }

    /// `Σ_{i<r} (u_xi σ_i)²` for one token.
    pub fn token_energy(&self, x: usize, r: usize) -> f64 {
        self.factors.u_row(x)[..r]
            .iter()
            .zip(self.factors.sigma())
            .map(|(u, s)| (u * s) * (u * s))
            .sum()
    }

    fn check_rank(&self, r: usize) -> Result<()> {
        if r > self.rank() {
            return invalid(format!("rank {r} exceeds effective rank {}", self.rank()));
        }
        Ok(())
    }

    /// Energy retained by `subset` within the top-`r` singular directions.
    pub fn retention(&self, subset: &TokenSet, r: usize) -> Result<f64> {
        self.check_rank(r)?;
        if let Some(&bad) = subset.indices().iter().find(|&&x| x >= self.tokens()) {
            return invalid(format!(
                "token index {bad} out of range for {} tokens",
                self.tokens()
            ));
        }
        Ok(subset
            .indices()
            .iter()
            .map(|&x| self.token_energy(x, r))
            .sum())
    }

    /// Expected retention of a uniformly random `k`-subset:
    /// `(k / N) · Σ_x Σ_{i<r} (u_xi σ_i)²`.
    pub fn expected_random_retention(&self, k: usize, r: usize) -> Result<f64> {
        let n = self.tokens();
        if k == 0 || k > n {
            return invalid(format!("budget {k} outside 1..={n}"));
        }
        self.check_rank(r)?;
        let total: f64 = (0..n).map(|x| self.token_energy(x, r)).sum();
        Ok(k as f64 / n as f64 * total)
    }

    /// Both sides of `C(x)² ≤ r · Σ_i (u_xi σ_i)²` at the effective rank.
    pub fn cauchy_schwarz_margin(&self, x: usize) -> Result<(f64, f64)> {
        if x >= self.tokens() {
            return invalid(format!(
                "token index {x} out of range for {} tokens",
                self.tokens()
            ));
        }
        let r = self.rank();
        let c: f64 = self
            .factors
            .u_row(x)
            .iter()
            .zip(self.factors.sigma())
            .map(|(u, s)| (u * s).abs())
            .sum();
        Ok((c * c, r as f64 * self.token_energy(x, r)))
    }
}

pub fn contribution_scores(tokens: &DenseMatrix, rank_tolerance: f64) -> Result<IcsScores> {
    Ok(IcsAnalysis::new(tokens, rank_tolerance)?.scores())
}

/// The `k` highest-scoring tokens. Ties go to the lower index; the result is
/// sorted ascending.
pub fn select_top_k(scores: &IcsScores, k: usize) -> Result<TokenSet> {
    let n = scores.len();
    if k == 0 || k > n {
        return invalid(format!("budget {k} outside 1..={n}"));
    }
    let s = scores.scores();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    order.truncate(k);
    TokenSet::new(order, n)
}

pub fn information_retention(tokens: &DenseMatrix, subset: &TokenSet, r: usize) -> Result<f64> {
    IcsAnalysis::new(tokens, crate::linalg::DEFAULT_RANK_TOLERANCE)?.retention(subset, r)
}

pub fn expected_random_retention(tokens: &DenseMatrix, k: usize, r: usize) -> Result<f64> {
    IcsAnalysis::new(tokens, crate::linalg::DEFAULT_RANK_TOLERANCE)?.expected_random_retention(k, r)
}

pub fn cauchy_schwarz_margin(tokens: &DenseMatrix, x: usize) -> Result<(f64, f64)> {
    IcsAnalysis::new(tokens, crate::linalg::DEFAULT_RANK_TOLERANCE)?.cauchy_schwarz_margin(x)
}
