use serde::Serialize;

use crate::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct BernoulliWeights {
    weights: Vec<f64>,
}

impl BernoulliWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("empty vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidWeights(format!("entry {w} is not a nonnegative real")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidWeights(format!("entries sum to {sum}")));
        }
        Ok(Self { weights })
    }

    /// Rescales a nonnegative vector with positive mass onto the simplex.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum.is_finite() && sum > 0.0) || raw.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidWeights(format!("cannot normalize {raw:?}")));
        }
        Self::new(raw.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(alphabet_size: usize) -> Self {
        assert!(alphabet_size > 0);
        Self {
            weights: vec![1.0 / alphabet_size as f64; alphabet_size],
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.weights.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, symbol: usize) -> f64 {
        self.weights[symbol]
    }

    /// Shannon entropy with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        entropy(&self.weights)
    }

    /// Measure of the cylinder spelled by `word`.
    pub fn cylinder(&self, word: &[usize]) -> f64 {
        word.iter().map(|&s| self.weights[s]).product()
    }

    /// Floors every entry at `floor` and renormalizes.
    pub fn floored(&self, floor: f64) -> Self {
        let raw: Vec<f64> = self.weights.iter().map(|w| w.max(floor)).collect();
        let sum: f64 = raw.iter().sum();
        Self {
            weights: raw.into_iter().map(|w| w / sum).collect(),
        }
    }

    /// First symbol carrying zero weight, if any.
    pub fn zero_symbol(&self) -> Option<usize> {
        self.weights.iter().position(|w| *w == 0.0)
    }

    /// Reorders the alphabet: symbol `s` becomes `perm[s]`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let mut out = vec![0.0; self.weights.len()];
        for (s, w) in self.weights.iter().enumerate() {
            out[perm[s]] = *w;
        }
        Self { weights: out }
    }
}

pub(crate) fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|w| **w > 0.0).map(|w| -w * w.ln()).sum()
}
