//! Carpet definition, column statistics and the closed-form ambient quantities.

use serde::{Deserialize, Serialize};

use crate::weights::BernoulliWeights;
use crate::{Error, Result};

/// On-disk carpet description: `{"n": 3, "m": 2, "digits": [[0,0],[1,1]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarpetDoc {
    pub n: u32,
    pub m: u32,
    pub digits: Vec<[u32; 2]>,
}

/// A validated Bedford–McMullen digit set.
///
/// Digits are kept sorted lexicographically and every vector indexed by the
/// digit alphabet uses that order. The column alphabet `π(D)` is the sorted
/// list of distinct second coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Carpet {
    n: u32,
    m: u32,
    digits: Vec<(u32, u32)>,
    columns: Vec<u32>,
    column_of_digit: Vec<usize>,
    fibers: Vec<Vec<usize>>,
    column_counts: Vec<usize>,
    eta: f64,
}

/// Axis-aligned rectangle in the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellRect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Carpet {
    pub fn new(n: u32, m: u32, digits: &[(u32, u32)]) -> Result<Self> {
        if m < 2 || m >= n {
            return Err(Error::InvalidBase { n, m });
        }
        if digits.is_empty() {
            return Err(Error::EmptyDigitSet);
        }
        if let Some(&(i, j)) = digits.iter().find(|(i, j)| *i >= n || *j >= m) {
            return Err(Error::DigitOutOfRange { i, j, n, m });
        }
        let mut digits = digits.to_vec();
        digits.sort_unstable();
        digits.dedup();

        let mut columns: Vec<u32> = digits.iter().map(|d| d.1).collect();
        columns.sort_unstable();
        columns.dedup();
        let column_of_digit: Vec<usize> = digits
            .iter()
            .map(|d| columns.binary_search(&d.1).expect("column present"))
            .collect();
        let mut fibers = vec![Vec::new(); columns.len()];
        for (d, &c) in column_of_digit.iter().enumerate() {
            fibers[c].push(d);
        }
        let mut column_counts = vec![0usize; m as usize];
        for d in &digits {
            column_counts[d.1 as usize] += 1;
        }
        let eta = (m as f64).ln() / (n as f64).ln();
        Ok(Self {
            n,
            m,
            digits,
            columns,
            column_of_digit,
            fibers,
            column_counts,
            eta,
        })
    }

    pub fn from_doc(doc: &CarpetDoc) -> Result<Self> {
        let digits: Vec<(u32, u32)> = doc.digits.iter().map(|d| (d[0], d[1])).collect();
        Self::new(doc.n, doc.m, &digits)
    }

    pub fn to_doc(&self) -> CarpetDoc {
        CarpetDoc {
            n: self.n,
            m: self.m,
            digits: self.digits.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// `log m / log n`.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn digits(&self) -> &[(u32, u32)] {
        &self.digits
    }

    pub fn digit_count(&self) -> usize {
        self.digits.len()
    }

    /// The occupied columns `π(D)`, sorted.
    pub fn columns(&self) -> &[u32] {
        &self.columns
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    /// `z(j)` for every `j < m`, including empty columns.
    pub fn column_counts(&self) -> &[usize] {
        &self.column_counts
    }

    pub fn digit_index(&self, digit: (u32, u32)) -> Option<usize> {
        self.digits.binary_search(&digit).ok()
    }

    pub fn column_index(&self, column: u32) -> Option<usize> {
        self.columns.binary_search(&column).ok()
    }

    /// Column-alphabet index of a digit-alphabet symbol.
    pub fn column_of(&self, digit: usize) -> usize {
        self.column_of_digit[digit]
    }

    /// Digit-alphabet symbols lying over a column-alphabet symbol.
    pub fn fiber(&self, column: usize) -> &[usize] {
        &self.fibers[column]
    }

    pub fn project_word(&self, word: &[usize]) -> Vec<usize> {
        word.iter().map(|&d| self.column_of_digit[d]).collect()
    }

    /// True when no column holds more than one digit.
    pub fn columns_at_most_singletons(&self) -> bool {
        self.column_counts.iter().all(|&z| z <= 1)
    }

    /// `(1 / log m) · log Σ_j z(j)^η`.
    pub fn hausdorff_dim(&self) -> f64 {
        let s: f64 = self
            .column_counts
            .iter()
            .filter(|&&z| z > 0)
            .map(|&z| (z as f64).powf(self.eta))
            .sum();
        s.ln() / (self.m as f64).ln()
    }

    /// `log|D| / log n + (1 − η) log|π(D)| / log m`.
    pub fn box_dim(&self) -> f64 {
        (self.digits.len() as f64).ln() / (self.n as f64).ln()
            + (1.0 - self.eta) * (self.columns.len() as f64).ln() / (self.m as f64).ln()
    }

    pub fn max_entropy_weights(&self) -> BernoulliWeights {
        BernoulliWeights::uniform(self.digits.len())
    }

    /// Weights `z(j)^(η−1) / m^s` of the measure of maximal dimension.
    pub fn max_dim_weights(&self) -> BernoulliWeights {
        let s = self.hausdorff_dim();
        let scale = (self.m as f64).powf(s);
        let raw: Vec<f64> = self
            .digits
            .iter()
            .map(|&(_, j)| (self.column_counts[j as usize] as f64).powf(self.eta - 1.0) / scale)
            .collect();
        // The identity Σ z(j)^η = m^s makes this a probability vector up to rounding.
        BernoulliWeights::normalized(raw).expect("positive weights")
    }

    /// Column marginal `q(p)_j = Σ_i p_(i,j)` over `π(D)`.
    pub fn project_weights(&self, p: &BernoulliWeights) -> BernoulliWeights {
        assert_eq!(p.alphabet_size(), self.digits.len(), "weights must be indexed by D");
        let mut q = vec![0.0; self.columns.len()];
        for (d, w) in p.as_slice().iter().enumerate() {
            q[self.column_of_digit[d]] += w;
        }
        BernoulliWeights::normalized(q).expect("projection of a probability vector")
    }

    /// Hausdorff dimension of the self-affine Bernoulli measure `μ_p`:
    /// `(η h(p) + (1 − η) h(q(p))) / log m`.
    pub fn bernoulli_dim(&self, p: &BernoulliWeights) -> f64 {
        let q = self.project_weights(p);
        (self.eta * p.entropy() + (1.0 - self.eta) * q.entropy()) / (self.m as f64).ln()
    }

    /// Geometric rectangle `n^{-k} × m^{-k}` of the depth-`k` cylinder `word`.
    pub fn cell_rect(&self, word: &[usize]) -> CellRect {
        let (n, m) = (self.n as f64, self.m as f64);
        let (mut x, mut y) = (0.0, 0.0);
        let (mut w, mut h) = (1.0, 1.0);
        for &d in word {
            let (i, j) = self.digits[d];
            w /= n;
            h /= m;
            x += i as f64 * w;
            y += j as f64 * h;
        }
        CellRect { x, y, w, h }
    }
}
