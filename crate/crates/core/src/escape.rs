//! Escape rates of Bernoulli measures through holes, computed as minus the
//! log of the Perron root of the weighted survivor operator, together with
//! the first-order constants for holes shrinking to a point.

use std::ops::RangeInclusive;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::numerics::{spectral_radius, PerronRoot, SparseNonnegativeMatrix};
use crate::symbolic::{is_mixing, PointSpec, SurvivorGraph, WordSet};
use crate::{BernoulliWeights, Budget, Carpet, Error, Result};

/// Power-iteration tolerance on the Perron root.
pub const PERRON_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapeRateResult {
    /// `None` stands for an infinite rate (no infinite survivor).
    pub rate: Option<f64>,
    pub perron_root: f64,
    pub residual: f64,
    pub iterations: usize,
    pub survivor_empty: bool,
    /// Whether the survivor shift is topologically mixing; without it the
    /// operator value is still returned but is not claimed to be the limit
    /// of the decay rate.
    pub mixing: bool,
}

/// The survivor operator of one hole with its weights left open, so the
/// Perron root can be re-evaluated cheaply for many weight vectors.
#[derive(Debug, Clone)]
pub struct RateEvaluator {
    alphabet_size: usize,
    states: usize,
    /// `(from, to, symbol)` over the core of the survivor graph.
    edges: Vec<(usize, usize, usize)>,
    /// Strongly connected pieces of the core carrying a cycle, each with its
    /// size and internal edges in local indices.
    components: Vec<(usize, Vec<(usize, usize, usize)>)>,
    mixing: bool,
}

fn cyclic_components(states: usize, edges: &[(usize, usize, usize)]) -> Vec<(usize, Vec<(usize, usize, usize)>)> {
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(states, edges.len());
    let nodes: Vec<_> = (0..states).map(|_| g.add_node(())).collect();
    for &(a, b, _) in edges {
        g.add_edge(nodes[a], nodes[b], ());
    }
    let mut component = vec![0usize; states];
    let mut local = vec![0usize; states];
    let sccs = tarjan_scc(&g);
    for (c, scc) in sccs.iter().enumerate() {
        for (i, v) in scc.iter().enumerate() {
            component[v.index()] = c;
            local[v.index()] = i;
        }
    }
    let mut inner: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); sccs.len()];
    for &(a, b, symbol) in edges {
        if component[a] == component[b] {
            inner[component[a]].push((local[a], local[b], symbol));
        }
    }
    sccs.iter()
        .zip(inner)
        .filter(|(_, e)| !e.is_empty())
        .map(|(scc, e)| (scc.len(), e))
        .collect()
}

fn weighted(states: usize, edges: &[(usize, usize, usize)], weights: &[f64]) -> SparseNonnegativeMatrix {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); states];
    for &(from, to, symbol) in edges {
        let w = weights[symbol];
        match rows[from].iter_mut().find(|e| e.0 == to) {
            Some(e) => e.1 += w,
            None => rows[from].push((to, w)),
        }
    }
    SparseNonnegativeMatrix::from_rows_unchecked(rows)
}

impl RateEvaluator {
    pub fn new(hole: &WordSet, budget: &Budget) -> Result<Self> {
        let graph = SurvivorGraph::unweighted(hole, budget)?;
        let core = graph.core();
        let mut position = vec![usize::MAX; graph.states().len()];
        for (i, &s) in core.iter().enumerate() {
            position[s] = i;
        }
        let edges = graph
            .transitions()
            .iter()
            .filter(|t| position[t.from] != usize::MAX && position[t.to] != usize::MAX)
            .map(|t| (position[t.from], position[t.to], t.symbol))
            .collect::<Vec<_>>();
        Ok(Self {
            alphabet_size: hole.alphabet_size(),
            states: core.len(),
            components: cyclic_components(core.len(), &edges),
            edges,
            mixing: is_mixing(&graph),
        })
    }

    pub fn is_mixing(&self) -> bool {
        self.mixing
    }

    pub fn survivor_empty(&self) -> bool {
        self.states == 0
    }

    pub fn operator(&self, weights: &[f64]) -> SparseNonnegativeMatrix {
        weighted(self.states, &self.edges, weights)
    }

    /// Perron root of the core operator as the largest root over its
    /// strongly connected components.
    fn perron_root(&self, weights: &[f64]) -> Result<PerronRoot> {
        let mut best = PerronRoot { lambda: 0.0, residual: 0.0, iterations: 0 };
        for (size, edges) in &self.components {
            let a = weighted(*size, edges, weights);
            let root = spectral_radius(&a, PERRON_TOLERANCE, 100 * (size + 100))?;
            if root.lambda > best.lambda {
                best = root;
            }
        }
        Ok(best)
    }

    pub fn evaluate(&self, p: &BernoulliWeights) -> Result<EscapeRateResult> {
        if p.alphabet_size() != self.alphabet_size {
            return Err(Error::InvalidWeights(format!(
                "weights over {} symbols for a hole over {}",
                p.alphabet_size(),
                self.alphabet_size
            )));
        }
        if let Some(symbol) = p.zero_symbol() {
            return Err(Error::ZeroWeightSymbol { symbol });
        }
        if self.survivor_empty() {
            return Ok(EscapeRateResult {
                rate: None,
                perron_root: 0.0,
                residual: 0.0,
                iterations: 0,
                survivor_empty: true,
                mixing: false,
            });
        }
        let root = self.perron_root(p.as_slice())?;
        let survivor_empty = root.lambda == 0.0;
        Ok(EscapeRateResult {
            rate: (!survivor_empty).then(|| (-root.lambda.min(1.0).ln()).max(0.0)),
            perron_root: root.lambda.min(1.0),
            residual: root.residual,
            iterations: root.iterations,
            survivor_empty,
            mixing: self.mixing,
        })
    }

    /// The rate alone, `+∞` for an empty survivor. For use inside objectives.
    pub fn rate(&self, weights: &[f64]) -> f64 {
        let p = match BernoulliWeights::normalized(weights.to_vec()) {
            Ok(p) => p,
            Err(_) => return f64::NAN,
        };
        match self.evaluate(&p) {
            Ok(r) => r.rate.unwrap_or(f64::INFINITY),
            Err(_) => f64::NAN,
        }
    }
}

/// `r_p(h)`; `h` may be a digit hole or a column hole.
pub fn escape_rate(p: &BernoulliWeights, hole: &WordSet, budget: &Budget) -> Result<EscapeRateResult> {
    if p.alphabet_size() != hole.alphabet_size() {
        return Err(Error::InvalidWeights(format!(
            "weights over {} symbols for a hole over {}",
            p.alphabet_size(),
            hole.alphabet_size()
        )));
    }
    if let Some(symbol) = p.zero_symbol() {
        return Err(Error::ZeroWeightSymbol { symbol });
    }
    RateEvaluator::new(hole, budget)?.evaluate(p)
}

pub fn hole_measure(p: &BernoulliWeights, hole: &WordSet) -> f64 {
    hole.measure(p)
}

/// `1 − Π p_{z_i}` over one prime period of a periodic `z`, and `1` otherwise.
pub fn perturbation_prediction(p: &BernoulliWeights, z: &PointSpec) -> f64 {
    if z.is_periodic() {
        1.0 - p.cylinder(z.period())
    } else {
        1.0
    }
}

/// `(d_B, d̃_B)`: `1 − |D|^{-p}` for `z` of prime period `p` (else 1), and the
/// same for `π(z)` over the column alphabet.
pub fn d_box_factors(carpet: &Carpet, z: &PointSpec) -> (f64, f64) {
    let factor = |alphabet: usize, point: &PointSpec| match point.prime_period() {
        Some(p) => 1.0 - (alphabet as f64).powi(-(p as i32)),
        None => 1.0,
    };
    (factor(carpet.digit_count(), z), factor(carpet.column_count(), &z.project(carpet)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioEntry {
    pub depth: usize,
    pub measure: f64,
    pub rate: Option<f64>,
    pub ratio: Option<f64>,
    pub mixing: bool,
}

/// `r_p(U_N) / μ_p(U_N)` for the cylinders `U_N = [z_0 … z_{N−1}]`.
pub fn ratio_sequence(
    p: &BernoulliWeights,
    z: &PointSpec,
    depths: RangeInclusive<usize>,
    budget: &Budget,
) -> Result<Vec<RatioEntry>> {
    depths
        .filter(|&n| n >= 1)
        .map(|n| {
            let hole = WordSet::new(p.alphabet_size(), n, [z.prefix(n)])?;
            let measure = hole.measure(p);
            let r = escape_rate(p, &hole, budget)?;
            Ok(RatioEntry {
                depth: n,
                measure,
                rate: r.rate,
                ratio: r.rate.map(|rate| rate / measure),
                mixing: r.mixing,
            })
        })
        .collect()
}
