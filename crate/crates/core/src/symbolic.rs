//! Words, cylinder holes of uniform depth, the column projection of a hole,
//! survivor transition graphs, eventually periodic points, and Markov
//! approximations of metric balls.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::ops::Deref;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::numerics::SparseNonnegativeMatrix;
use crate::{checked_pow, BernoulliWeights, Budget, Carpet, CellRect, Error, Result, Word};

/// `{"depth": 2, "cells": [[[1,1],[0,0]], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleDoc {
    pub depth: usize,
    pub cells: Vec<Vec<[u32; 2]>>,
}

/// Rectangle shorthand: horizontal digits `omega` and vertical digits `tau`,
/// possibly of different lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectDoc {
    pub omega: Vec<u32>,
    pub tau: Vec<u32>,
}

/// `{"preperiod": [[0,0]], "period": [[1,1]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDoc {
    #[serde(default)]
    pub preperiod: Vec<[u32; 2]>,
    pub period: Vec<[u32; 2]>,
}

/// A finite set of forbidden words, all of the same length, over
/// `0..alphabet_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSet {
    alphabet_size: usize,
    depth: usize,
    cells: BTreeSet<Word>,
}

impl WordSet {
    pub fn new(alphabet_size: usize, depth: usize, cells: impl IntoIterator<Item = Word>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidHole("depth must be at least 1".into()));
        }
        let cells: BTreeSet<Word> = cells.into_iter().collect();
        for w in &cells {
            if w.len() != depth {
                return Err(Error::InvalidHole(format!("cell {w:?} has length {} != depth {depth}", w.len())));
            }
            if let Some(s) = w.iter().find(|&&s| s >= alphabet_size) {
                return Err(Error::InvalidHole(format!("symbol {s} outside alphabet of size {alphabet_size}")));
            }
        }
        Ok(Self {
            alphabet_size,
            depth,
            cells,
        })
    }

    pub fn empty(alphabet_size: usize) -> Self {
        Self {
            alphabet_size,
            depth: 1,
            cells: BTreeSet::new(),
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn cells(&self) -> &BTreeSet<Word> {
        &self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    /// Whether the cylinder of `word` (at least `depth` long) lies in the hole.
    pub fn covers(&self, word: &[usize]) -> bool {
        word.len() >= self.depth && self.cells.contains(&word[..self.depth])
    }

    /// The same set of sequences written with cells of length `depth`.
    pub fn refine(&self, depth: usize, budget: &Budget) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::InvalidDepth(format!("cannot refine depth {} to {depth}", self.depth)));
        }
        let extra = depth - self.depth;
        let per_cell = checked_pow(self.alphabet_size, extra);
        budget.check_states("hole refinement", per_cell.saturating_mul(self.cells.len() as u128))?;
        let suffixes = all_words(self.alphabet_size, extra);
        let cells = self
            .cells
            .iter()
            .flat_map(|c| {
                suffixes.iter().map(move |s| {
                    let mut w = c.clone();
                    w.extend_from_slice(s);
                    w
                })
            })
            .collect();
        Ok(Self {
            alphabet_size: self.alphabet_size,
            depth,
            cells,
        })
    }

    /// Set inclusion of the sequences each hole contains.
    pub fn is_subset_of(&self, other: &WordSet) -> bool {
        if self.depth >= other.depth {
            return self.cells.iter().all(|c| other.covers(c));
        }
        let extra = other.depth - self.depth;
        let suffixes = all_words(self.alphabet_size, extra);
        self.cells.iter().all(|c| {
            suffixes.iter().all(|s| {
                let mut w = c.clone();
                w.extend_from_slice(s);
                other.covers(&w)
            })
        })
    }

    /// `μ_p` of the hole.
    pub fn measure(&self, p: &BernoulliWeights) -> f64 {
        self.cells.iter().map(|c| p.cylinder(c)).sum()
    }

    /// Renames symbol `s` to `perm[s]` in every cell.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        Self {
            alphabet_size: self.alphabet_size,
            depth: self.depth,
            cells: self.cells.iter().map(|c| c.iter().map(|&s| perm[s]).collect()).collect(),
        }
    }

    pub(crate) fn codes(&self) -> HashSet<u64> {
        self.cells.iter().map(|c| encode(c, self.alphabet_size)).collect()
    }
}

/// Base-`alphabet` integer code of a word, most significant symbol first.
pub(crate) fn encode(word: &[usize], alphabet: usize) -> u64 {
    word.iter().fold(0u64, |acc, &s| acc * alphabet as u64 + s as u64)
}

pub(crate) fn decode(mut code: u64, alphabet: usize, len: usize) -> Word {
    let mut w = vec![0; len];
    for slot in w.iter_mut().rev() {
        *slot = (code % alphabet as u64) as usize;
        code /= alphabet as u64;
    }
    w
}

/// All words of length `len`, in lexicographic order.
pub(crate) fn all_words(alphabet: usize, len: usize) -> Vec<Word> {
    let count = alphabet.pow(len as u32);
    (0..count as u64).map(|c| decode(c, alphabet, len)).collect()
}

/// A hole over the digit alphabet `D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovHole(WordSet);

/// A hole over the column alphabet `π(D)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnHole(WordSet);

impl Deref for MarkovHole {
    type Target = WordSet;
    fn deref(&self) -> &WordSet {
        &self.0
    }
}

impl Deref for ColumnHole {
    type Target = WordSet;
    fn deref(&self) -> &WordSet {
        &self.0
    }
}

impl MarkovHole {
    pub fn new(carpet: &Carpet, depth: usize, cells: impl IntoIterator<Item = Word>) -> Result<Self> {
        WordSet::new(carpet.digit_count(), depth, cells).map(Self)
    }

    pub fn empty(carpet: &Carpet) -> Self {
        Self(WordSet::empty(carpet.digit_count()))
    }

    pub fn from_doc(carpet: &Carpet, doc: &HoleDoc) -> Result<Self> {
        let cells = doc
            .cells
            .iter()
            .map(|cell| digits_to_word(carpet, cell))
            .collect::<Result<Vec<_>>>()?;
        Self::new(carpet, doc.depth, cells)
    }

    pub fn to_doc(&self, carpet: &Carpet) -> HoleDoc {
        HoleDoc {
            depth: self.depth(),
            cells: self.cells().iter().map(|w| word_to_digits(carpet, w)).collect(),
        }
    }

    pub fn refine(&self, depth: usize, budget: &Budget) -> Result<Self> {
        self.0.refine(depth, budget).map(Self)
    }

    pub fn relabeled(&self, perm: &[usize]) -> Self {
        Self(self.0.relabeled(perm))
    }

    pub fn words(&self) -> &WordSet {
        &self.0
    }
}

impl ColumnHole {
    pub fn new(carpet: &Carpet, depth: usize, cells: impl IntoIterator<Item = Word>) -> Result<Self> {
        WordSet::new(carpet.column_count(), depth, cells).map(Self)
    }

    pub fn words(&self) -> &WordSet {
        &self.0
    }
}

fn digits_to_word(carpet: &Carpet, digits: &[[u32; 2]]) -> Result<Word> {
    digits
        .iter()
        .map(|d| {
            carpet
                .digit_index((d[0], d[1]))
                .ok_or_else(|| Error::InvalidHole(format!("({}, {}) is not a digit of the carpet", d[0], d[1])))
        })
        .collect()
}

fn word_to_digits(carpet: &Carpet, word: &[usize]) -> Vec<[u32; 2]> {
    word.iter()
        .map(|&d| {
            let (i, j) = carpet.digits()[d];
            [i, j]
        })
        .collect()
}

/// Refines a list of mixed-depth symbolic rectangles to one uniform depth
/// (the longest prefix length, at least 1).
pub fn normalize_hole(carpet: &Carpet, rects: &[RectDoc], budget: &Budget) -> Result<MarkovHole> {
    let depth = rects
        .iter()
        .map(|r| r.omega.len().max(r.tau.len()))
        .max()
        .unwrap_or(1)
        .max(1);
    let mut cells = BTreeSet::new();
    for rect in rects {
        // Candidate digits at each position.
        let mut choices: Vec<Vec<usize>> = Vec::with_capacity(depth);
        let mut total: u128 = 1;
        for t in 0..depth {
            let allowed: Vec<usize> = (0..carpet.digit_count())
                .filter(|&d| {
                    let (i, j) = carpet.digits()[d];
                    rect.omega.get(t).is_none_or(|&w| w == i) && rect.tau.get(t).is_none_or(|&v| v == j)
                })
                .collect();
            if allowed.is_empty() {
                return Err(Error::IncompatiblePrefix { index: t });
            }
            total = total.saturating_mul(allowed.len() as u128);
            choices.push(allowed);
        }
        budget.check_states("rectangle refinement", total)?;
        let mut words: Vec<Word> = vec![Vec::with_capacity(depth)];
        for allowed in &choices {
            words = words
                .into_iter()
                .flat_map(|w| {
                    allowed.iter().map(move |&d| {
                        let mut next = w.clone();
                        next.push(d);
                        next
                    })
                })
                .collect();
        }
        cells.extend(words);
    }
    MarkovHole::new(carpet, depth, cells)
}

/// `Ṽ`: the column words whose entire fiber of digit words lies in the hole.
pub fn project_hole(carpet: &Carpet, hole: &MarkovHole) -> ColumnHole {
    let mut hits: HashMap<Word, usize> = HashMap::new();
    for cell in hole.cells() {
        *hits.entry(carpet.project_word(cell)).or_default() += 1;
    }
    let cells = hits
        .into_iter()
        .filter(|(tau, count)| {
            let fiber: usize = tau.iter().map(|&c| carpet.fiber(c).len()).product();
            *count == fiber
        })
        .map(|(tau, _)| tau);
    ColumnHole::new(carpet, hole.depth(), cells).expect("projection preserves shape")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub from: usize,
    pub symbol: usize,
    pub to: usize,
    pub weight: f64,
}

/// De Bruijn-style graph on words of length `depth − 1`: appending a symbol
/// is a transition unless the resulting `depth`-word is forbidden.
///
/// States are the words with at least one allowed extension; transitions
/// into words without one are omitted since they cannot lie on an infinite
/// path.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivorGraph {
    alphabet_size: usize,
    depth: usize,
    states: Vec<Word>,
    transitions: Vec<Transition>,
}

impl SurvivorGraph {
    /// Graph with unit transition weights.
    pub fn unweighted(hole: &WordSet, budget: &Budget) -> Result<Self> {
        let a = hole.alphabet_size();
        let width = hole.depth() - 1;
        let state_space = checked_pow(a, width);
        budget.check_states("survivor graph states", state_space)?;
        budget.check_states("survivor graph transitions", state_space.saturating_mul(a as u128))?;
        let state_space = state_space as u64;
        let forbidden = hole.codes();

        let mut index: Vec<Option<usize>> = vec![None; state_space as usize];
        let mut states = Vec::new();
        for code in 0..state_space {
            let has_exit = (0..a as u64).any(|s| !forbidden.contains(&(code * a as u64 + s)));
            if has_exit {
                index[code as usize] = Some(states.len());
                states.push(code);
            }
        }
        let mut transitions = Vec::new();
        for (from, &code) in states.iter().enumerate() {
            for s in 0..a {
                let word = code * a as u64 + s as u64;
                if forbidden.contains(&word) {
                    continue;
                }
                if let Some(to) = index[(word % state_space) as usize] {
                    transitions.push(Transition {
                        from,
                        symbol: s,
                        to,
                        weight: 1.0,
                    });
                }
            }
        }
        Ok(Self {
            alphabet_size: a,
            depth: hole.depth(),
            states: states.into_iter().map(|c| decode(c, a, width)).collect(),
            transitions,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn states(&self) -> &[Word] {
        &self.states
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Sets every transition weight to the weight of its appended symbol.
    pub fn with_weights(mut self, p: &BernoulliWeights) -> Self {
        assert_eq!(p.alphabet_size(), self.alphabet_size);
        for t in &mut self.transitions {
            t.weight = p.get(t.symbol);
        }
        self
    }

    /// States lying on bi-infinite paths, found by repeatedly trimming
    /// states with no incoming or no outgoing transition.
    pub fn core(&self) -> Vec<usize> {
        let n = self.states.len();
        let mut alive = vec![true; n];
        let mut indeg = vec![0usize; n];
        let mut outdeg = vec![0usize; n];
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
        for t in &self.transitions {
            outdeg[t.from] += 1;
            indeg[t.to] += 1;
            succ[t.from].push(t.to);
            pred[t.to].push(t.from);
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&s| indeg[s] == 0 || outdeg[s] == 0).collect();
        while let Some(s) = queue.pop_front() {
            if !alive[s] {
                continue;
            }
            alive[s] = false;
            for &t in &succ[s] {
                indeg[t] -= 1;
                if alive[t] && indeg[t] == 0 {
                    queue.push_back(t);
                }
            }
            for &t in &pred[s] {
                outdeg[t] -= 1;
                if alive[t] && outdeg[t] == 0 {
                    queue.push_back(t);
                }
            }
        }
        (0..n).filter(|&s| alive[s]).collect()
    }

    /// Weighted transfer operator restricted to [`Self::core`]; entry
    /// `(from, to)` sums the weights `weights[symbol]` of parallel edges.
    pub fn core_operator(&self, weights: &[f64]) -> SparseNonnegativeMatrix {
        let core = self.core();
        let mut position = vec![usize::MAX; self.states.len()];
        for (i, &s) in core.iter().enumerate() {
            position[s] = i;
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); core.len()];
        for t in &self.transitions {
            let (r, c) = (position[t.from], position[t.to]);
            if r == usize::MAX || c == usize::MAX {
                continue;
            }
            let w = weights[t.symbol];
            match rows[r].iter_mut().find(|e| e.0 == c) {
                Some(e) => e.1 += w,
                None => rows[r].push((c, w)),
            }
        }
        SparseNonnegativeMatrix::from_rows_unchecked(rows)
    }
}

/// Survivor graph whose transitions carry the Bernoulli weight of the
/// appended symbol.
pub fn survivor_graph(hole: &WordSet, p: &BernoulliWeights, budget: &Budget) -> Result<SurvivorGraph> {
    if p.alphabet_size() != hole.alphabet_size() {
        return Err(Error::InvalidWeights(format!(
            "weights over {} symbols for a hole over {}",
            p.alphabet_size(),
            hole.alphabet_size()
        )));
    }
    Ok(SurvivorGraph::unweighted(hole, budget)?.with_weights(p))
}

/// Topological mixing of the survivor shift: the core is nonempty, strongly
/// connected, and the gcd of its cycle lengths is one.
pub fn is_mixing(graph: &SurvivorGraph) -> bool {
    let core = graph.core();
    if core.is_empty() {
        return false;
    }
    let mut position = vec![usize::MAX; graph.states.len()];
    for (i, &s) in core.iter().enumerate() {
        position[s] = i;
    }
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(core.len(), graph.transitions.len());
    let nodes: Vec<_> = core.iter().map(|_| g.add_node(())).collect();
    let mut edges = Vec::new();
    for t in &graph.transitions {
        let (a, b) = (position[t.from], position[t.to]);
        if a != usize::MAX && b != usize::MAX {
            g.add_edge(nodes[a], nodes[b], ());
            edges.push((a, b));
        }
    }
    if tarjan_scc(&g).len() != 1 {
        return false;
    }
    period(core.len(), &edges) == 1
}

/// Period of a strongly connected graph via BFS levels.
fn period(n: usize, edges: &[(usize, usize)]) -> u64 {
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in edges {
        succ[a].push(b);
    }
    let mut level = vec![u64::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for &v in &succ[u] {
            if level[v] == u64::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    edges.iter().fold(0u64, |g, &(a, b)| {
        let diff = (level[a] + 1).abs_diff(level[b]);
        gcd(g, diff)
    })
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// An eventually periodic symbolic point `preperiod · period^∞`.
///
/// Construction reduces the period to its primitive root and absorbs any
/// preperiod symbols that merely repeat the cycle, so a point is periodic
/// exactly when its stored preperiod is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSpec {
    preperiod: Word,
    period: Word,
}

impl PointSpec {
    pub fn new(preperiod: Word, period: Word) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::InvalidPoint("period word is empty".into()));
        }
        let mut period = primitive_root(&period).to_vec();
        let mut preperiod = preperiod;
        while let (Some(&a), Some(&b)) = (preperiod.last(), period.last()) {
            if a != b {
                break;
            }
            preperiod.pop();
            period.rotate_right(1);
        }
        Ok(Self { preperiod, period })
    }

    pub fn periodic(period: Word) -> Result<Self> {
        Self::new(Vec::new(), period)
    }

    pub fn from_doc(carpet: &Carpet, doc: &PointDoc) -> Result<Self> {
        let conv = |ds: &[[u32; 2]]| {
            ds.iter()
                .map(|d| {
                    carpet
                        .digit_index((d[0], d[1]))
                        .ok_or_else(|| Error::InvalidPoint(format!("({}, {}) is not a digit", d[0], d[1])))
                })
                .collect::<Result<Word>>()
        };
        Self::new(conv(&doc.preperiod)?, conv(&doc.period)?)
    }

    pub fn to_doc(&self, carpet: &Carpet) -> PointDoc {
        PointDoc {
            preperiod: word_to_digits(carpet, &self.preperiod),
            period: word_to_digits(carpet, &self.period),
        }
    }

    pub fn preperiod(&self) -> &[usize] {
        &self.preperiod
    }

    pub fn period(&self) -> &[usize] {
        &self.period
    }

    pub fn is_periodic(&self) -> bool {
        self.preperiod.is_empty()
    }

    /// Least `p` with `σ^p(z) = z`, or `None` for a non-periodic point.
    pub fn prime_period(&self) -> Option<usize> {
        self.is_periodic().then_some(self.period.len())
    }

    pub fn symbol(&self, i: usize) -> usize {
        if i < self.preperiod.len() {
            self.preperiod[i]
        } else {
            self.period[(i - self.preperiod.len()) % self.period.len()]
        }
    }

    /// The first `len` symbols.
    pub fn prefix(&self, len: usize) -> Word {
        (0..len).map(|i| self.symbol(i)).collect()
    }

    /// `π(z)` over the column alphabet, re-canonicalized.
    pub fn project(&self, carpet: &Carpet) -> PointSpec {
        PointSpec::new(carpet.project_word(&self.preperiod), carpet.project_word(&self.period))
            .expect("nonempty period")
    }

    pub fn relabeled(&self, perm: &[usize]) -> PointSpec {
        let map = |w: &[usize]| w.iter().map(|&s| perm[s]).collect();
        PointSpec::new(map(&self.preperiod), map(&self.period)).expect("nonempty period")
    }
}

fn primitive_root(word: &[usize]) -> &[usize] {
    let n = word.len();
    (1..=n)
        .filter(|d| n % d == 0)
        .find(|&d| word.chunks(d).all(|c| c == &word[..d]))
        .map(|d| &word[..d])
        .unwrap_or(word)
}

/// The depth-`depth` cylinder around `z` as a single-cell hole.
pub fn cylinder_hole_around(carpet: &Carpet, z: &PointSpec, depth: usize) -> Result<MarkovHole> {
    if depth == 0 {
        return Err(Error::InvalidDepth("cylinder depth must be at least 1".into()));
    }
    MarkovHole::new(carpet, depth, [z.prefix(depth)])
}

/// Configuration for the cylinder-containment condition of a shrinking
/// family: the ratio bound `kappa` and the centres `z^(i)`. With no centres
/// the family's own point is used.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyCheckConfig {
    pub kappa: f64,
    pub centers: Vec<PointSpec>,
}

impl Default for FamilyCheckConfig {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            centers: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FamilyReport {
    /// Consecutive members are strictly nested and every member contains `z`.
    pub nested_and_shrinking: bool,
    pub uniform_cell_length: bool,
    /// Every member sits inside cylinders of length `ρ` around the centres
    /// with `κ < ρ / depth ≤ 1`.
    pub bounded_cylinders: bool,
    /// `σ^{-p}(U_N) ∩ [z_0 … z_{p−1}] ⊆ U_N` for periodic `z`; vacuous otherwise.
    pub periodic_backflow: bool,
    /// Set when the family was empty and every check passed vacuously.
    pub empty_family: bool,
}

impl FamilyReport {
    pub fn all_pass(&self) -> bool {
        self.nested_and_shrinking && self.uniform_cell_length && self.bounded_cylinders && self.periodic_backflow
    }
}

pub fn validate_shrinking_family(
    carpet: &Carpet,
    family: &[MarkovHole],
    z: &PointSpec,
    cfg: &FamilyCheckConfig,
) -> FamilyReport {
    if family.is_empty() {
        return FamilyReport {
            nested_and_shrinking: true,
            uniform_cell_length: true,
            bounded_cylinders: true,
            periodic_backflow: true,
            empty_family: true,
        };
    }
    let uniform = carpet.max_entropy_weights();
    let contains_z = family.iter().all(|h| h.covers(&z.prefix(h.depth())));
    let nested = family.windows(2).all(|pair| {
        pair[1].is_subset_of(&pair[0]) && pair[1].measure(&uniform) < pair[0].measure(&uniform)
    });
    let uniform_cell_length = family.iter().all(|h| h.cells().iter().all(|c| c.len() == h.depth()));

    let centers: Vec<&PointSpec> = if cfg.centers.is_empty() {
        vec![z]
    } else {
        cfg.centers.iter().collect()
    };
    let bounded_cylinders = family.iter().all(|h| {
        let l = h.depth();
        let rho = h
            .cells()
            .iter()
            .map(|cell| {
                centers
                    .iter()
                    .map(|c| cell.iter().zip(c.prefix(l)).take_while(|(a, b)| **a == *b).count())
                    .max()
                    .unwrap_or(0)
            })
            .min()
            .unwrap_or(l);
        let ratio = rho as f64 / l as f64;
        cfg.kappa < ratio && ratio <= 1.0
    });

    let periodic_backflow = match z.prime_period() {
        None => true,
        Some(p) => {
            let head = z.prefix(p);
            family.iter().all(|h| {
                h.cells().iter().all(|cell| {
                    let mut w = head.clone();
                    w.extend_from_slice(cell);
                    h.covers(&w)
                })
            })
        }
    };

    FamilyReport {
        nested_and_shrinking: contains_z && nested,
        uniform_cell_length,
        bounded_cylinders,
        periodic_backflow,
        empty_family: false,
    }
}

/// Distance on the unit circle.
fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Nearest and farthest circular distance from `c` to `[a, a + w]`.
fn axis_range(c: f64, a: f64, w: f64) -> (f64, f64) {
    let inside = |x: f64| {
        let off = (x - a).rem_euclid(1.0);
        off <= w
    };
    let ends = (circle_dist(c, a), circle_dist(c, a + w));
    let near = if inside(c) { 0.0 } else { ends.0.min(ends.1) };
    let far = if inside(c + 0.5) { 0.5 } else { ends.0.max(ends.1) };
    (near, far)
}

fn rect_distances(center: (f64, f64), r: &CellRect) -> (f64, f64) {
    let (nx, fx) = axis_range(center.0, r.x, r.w);
    let (ny, fy) = axis_range(center.1, r.y, r.h);
    (nx * nx + ny * ny, fx * fx + fy * fy)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum BallTest {
    Intersects,
    Inside,
}

fn ball_cells(
    carpet: &Carpet,
    center: (f64, f64),
    eps: f64,
    depth: usize,
    budget: &Budget,
    test: BallTest,
) -> Result<MarkovHole> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidHole(format!("ball radius {eps} must be positive")));
    }
    if !(0.0..1.0).contains(&center.0) || !(0.0..1.0).contains(&center.1) {
        return Err(Error::InvalidHole(format!("ball centre {center:?} outside [0,1)^2")));
    }
    if depth == 0 {
        return Err(Error::InvalidDepth("ball approximation depth must be at least 1".into()));
    }
    let cells = checked_pow(carpet.digit_count(), depth);
    if cells > budget.max_states as u128 {
        return Err(Error::DepthTooLarge {
            depth,
            cells,
            limit: budget.max_states,
        });
    }
    let eps2 = eps * eps;
    let mut out = Vec::new();
    let mut stack: Vec<Word> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        let rect = carpet.cell_rect(&prefix);
        let (near2, far2) = rect_distances(center, &rect);
        // Children of a cell are sub-rectangles, so both tests prune.
        match test {
            BallTest::Intersects if near2 > eps2 => continue,
            BallTest::Inside if near2 >= eps2 => continue,
            _ => {}
        }
        if prefix.len() == depth {
            let keep = match test {
                BallTest::Intersects => near2 <= eps2,
                BallTest::Inside => far2 < eps2,
            };
            if keep {
                out.push(prefix);
            }
            continue;
        }
        for d in (0..carpet.digit_count()).rev() {
            let mut next = prefix.clone();
            next.push(d);
            stack.push(next);
        }
    }
    MarkovHole::new(carpet, depth, out)
}

/// Depth-`depth` cells meeting the closed torus ball `B̄_eps(center)`.
pub fn ball_outer_markov(carpet: &Carpet, center: (f64, f64), eps: f64, depth: usize, budget: &Budget) -> Result<MarkovHole> {
    ball_cells(carpet, center, eps, depth, budget, BallTest::Intersects)
}

/// Depth-`depth` cells contained in the open torus ball `B_eps(center)`.
pub fn ball_inner_markov(carpet: &Carpet, center: (f64, f64), eps: f64, depth: usize, budget: &Budget) -> Result<MarkovHole> {
    ball_cells(carpet, center, eps, depth, budget, BallTest::Inside)
}
