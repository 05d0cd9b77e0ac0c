//! Brute-force ground truth, independent of the spectral machinery: exact
//! surviving measures and approximate-square counts by dynamic programming
//! over raw words, and dimensions estimated from them by slope fitting.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::RangeInclusive;
use std::time::Instant;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::numerics::fit_line;
use crate::symbolic::{encode, project_hole, MarkovHole, WordSet};
use crate::{checked_pow, BernoulliWeights, Budget, Carpet, CellRect, Error, Result, Word};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountReport {
    pub depth: usize,
    /// The measure, or the count as a float (may overflow to `inf`).
    pub value: f64,
    /// Natural log of the quantity, accurate even where `value` underflows.
    pub log_value: f64,
    /// Decimal digits of an exact integer count.
    pub exact_count: Option<String>,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

fn ln_big(n: &BigUint) -> f64 {
    if n.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    (n >> shift).to_f64().expect("64-bit head").ln() + shift as f64 * std::f64::consts::LN_2
}

fn count_report(depth: usize, count: BigUint, start: Instant) -> CountReport {
    CountReport {
        depth,
        value: count.to_f64().unwrap_or(f64::INFINITY),
        log_value: ln_big(&count),
        exact_count: Some(count.to_string()),
        elapsed_secs: start.elapsed().as_secs_f64(),
    }
}

/// `μ_p{x : σ^i x ∉ h for 0 ≤ i < k}`: the mass of the length-`(k + l − 1)`
/// words none of whose `k` windows of length `l` is a hole cell.
pub fn surviving_measure(p: &BernoulliWeights, hole: &WordSet, k: usize, budget: &Budget) -> Result<CountReport> {
    let start = Instant::now();
    if k == 0 {
        return Err(Error::InvalidDepth("k must be at least 1".into()));
    }
    if p.alphabet_size() != hole.alphabet_size() {
        return Err(Error::InvalidWeights("weights and hole use different alphabets".into()));
    }
    let l = hole.depth();
    if hole.is_empty() {
        return Ok(CountReport {
            depth: k,
            value: 1.0,
            log_value: 0.0,
            exact_count: None,
            elapsed_secs: start.elapsed().as_secs_f64(),
        });
    }
    let a = p.alphabet_size();
    let states = checked_pow(a, l - 1);
    budget.check_states("surviving-measure states", states)?;
    budget.check_updates("surviving-measure updates", states * a as u128 * k as u128)?;
    let states = states as usize;
    let forbidden = hole.codes();
    let w = p.as_slice();

    // Distribution of the first l−1 symbols, then one window per step.
    let mut v: Vec<f64> = (0..states as u64)
        .map(|code| crate::symbolic::decode(code, a, l - 1).iter().map(|&s| w[s]).product())
        .collect();
    let mut log_scale = 0.0;
    let mut next = vec![0.0; states];
    for _ in 0..k {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (code, &mass) in v.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (s, &ws) in w.iter().enumerate() {
                let window = code as u64 * a as u64 + s as u64;
                if !forbidden.contains(&window) {
                    next[(window % states as u64) as usize] += mass * ws;
                }
            }
        }
        std::mem::swap(&mut v, &mut next);
        let total: f64 = v.iter().sum();
        if total == 0.0 {
            return Ok(CountReport {
                depth: k,
                value: 0.0,
                log_value: f64::NEG_INFINITY,
                exact_count: None,
                elapsed_secs: start.elapsed().as_secs_f64(),
            });
        }
        log_scale += total.ln();
        v.iter_mut().for_each(|x| *x /= total);
    }
    Ok(CountReport {
        depth: k,
        value: log_scale.exp(),
        log_value: log_scale,
        exact_count: None,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Minus the least-squares slope of `log surviving_measure` over the tail
/// window `k_max/2 ..= k_max`.
pub fn escape_rate_bruteforce(p: &BernoulliWeights, hole: &WordSet, k_max: usize, budget: &Budget) -> Result<Estimate> {
    if k_max < 6 {
        return Err(Error::InvalidDepth(format!("k_max = {k_max} must be at least 6")));
    }
    let points = (k_max / 2..=k_max)
        .map(|k| surviving_measure(p, hole, k, budget).map(|r| (k as f64, r.log_value)))
        .collect::<Result<Vec<_>>>()?;
    if points.iter().any(|pt| !pt.1.is_finite()) {
        return Ok(Estimate {
            value: f64::INFINITY,
            stderr: 0.0,
        });
    }
    let fit = fit_line(&points)?;
    Ok(Estimate {
        value: -fit.slope,
        stderr: fit.stderr,
    })
}

/// Whether the window starting at `i` is constrained in the square count.
struct Phases {
    switch: usize,
    k: usize,
    l: usize,
}

impl Phases {
    fn new(carpet: &Carpet, hole: &MarkovHole, k: usize) -> Result<Self> {
        let switch = (carpet.eta() * k as f64).floor() as usize;
        let l = hole.depth();
        if switch <= l {
            return Err(Error::InvalidDepth(format!("floor(eta k) = {switch} must exceed the hole depth {l}")));
        }
        Ok(Self { switch, k, l })
    }

    fn digit_window(&self, i: usize) -> bool {
        i + self.l < self.switch
    }

    fn column_window(&self, i: usize) -> bool {
        i >= self.switch && i + self.l < self.k
    }
}

/// Number of approximate squares of level `k` (`⌊ηk⌋` digits followed by
/// `k − ⌊ηk⌋` columns) whose digit windows starting before `⌊ηk⌋ − l` avoid
/// the hole and whose column windows starting in `[⌊ηk⌋, k − l)` avoid its
/// projection.
pub fn count_surviving_squares(carpet: &Carpet, hole: &MarkovHole, k: usize, budget: &Budget) -> Result<CountReport> {
    let start = Instant::now();
    let phases = Phases::new(carpet, hole, k)?;
    let l = hole.depth();
    let (a, b) = (carpet.digit_count(), carpet.column_count());
    let (states, column_states) = (checked_pow(a, l - 1), checked_pow(b, l - 1));
    budget.check_states("square-count states", states)?;
    budget.check_updates("square-count updates", states * a as u128 * k as u128)?;
    let (states, column_states) = (states as u64, column_states as u64);
    let forbidden = hole.codes();
    let column_forbidden = project_hole(carpet, hole).codes();

    // Phase one: digit words of length ⌊ηk⌋, indexed by their last l−1 symbols.
    let mut counts: Vec<BigUint> = vec![BigUint::one(); states as usize];
    for t in (l - 1)..phases.switch {
        let constrained = phases.digit_window(t + 1 - l);
        let mut next = vec![BigUint::zero(); states as usize];
        for (code, c) in counts.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for s in 0..a as u64 {
                let window = code as u64 * a as u64 + s;
                if constrained && forbidden.contains(&window) {
                    continue;
                }
                next[(window % states) as usize] += c;
            }
        }
        counts = next;
    }

    // Switch: project the digit state onto columns.
    let mut column_counts: Vec<BigUint> = vec![BigUint::zero(); column_states as usize];
    for (code, c) in counts.into_iter().enumerate() {
        let word = crate::symbolic::decode(code as u64, a, l - 1);
        column_counts[encode(&carpet.project_word(&word), b) as usize] += c;
    }

    // Phase two: column symbols up to position k − 1.
    for t in phases.switch..k {
        let constrained = t + 1 >= l && phases.column_window(t + 1 - l);
        let mut next = vec![BigUint::zero(); column_states as usize];
        for (code, c) in column_counts.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for s in 0..b as u64 {
                let window = code as u64 * b as u64 + s;
                if constrained && column_forbidden.contains(&window) {
                    continue;
                }
                next[(window % column_states) as usize] += c;
            }
        }
        column_counts = next;
    }
    let total: BigUint = column_counts.iter().sum();
    Ok(count_report(k, total, start))
}

/// Number of approximate squares of level `k` that meet the survivor set:
/// some digit sequence realizing the square avoids the hole forever.
pub fn count_squares_meeting_survivor(
    carpet: &Carpet,
    hole: &MarkovHole,
    k: usize,
    budget: &Budget,
) -> Result<CountReport> {
    let start = Instant::now();
    let phases = Phases::new(carpet, hole, k)?;
    let l = hole.depth();
    let a = carpet.digit_count();
    let states = checked_pow(a, l - 1);
    budget.check_states("square-count states", states)?;
    budget.check_updates("square-count updates", states * a as u128 * k as u128)?;
    let states = states as u64;
    let forbidden = hole.codes();
    let step = |code: u64, s: usize| -> Option<u64> {
        let window = code * a as u64 + s as u64;
        (!forbidden.contains(&window)).then_some(window % states)
    };

    // States from which an infinite allowed continuation exists.
    let mut alive: Vec<bool> = vec![true; states as usize];
    loop {
        let mut changed = false;
        for code in 0..states {
            if alive[code as usize] && !(0..a).any(|s| step(code, s).is_some_and(|t| alive[t as usize])) {
                alive[code as usize] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut counts: Vec<BigUint> = vec![BigUint::one(); states as usize];
    for _ in (l - 1)..phases.switch {
        let mut next = vec![BigUint::zero(); states as usize];
        for (code, c) in counts.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for s in 0..a {
                if let Some(t) = step(code as u64, s) {
                    next[t as usize] += c;
                }
            }
        }
        counts = next;
    }

    // Phase two tracks the set of digit states compatible with the columns so far.
    let mut subsets: HashMap<BTreeSet<u64>, BigUint> = HashMap::new();
    for (code, c) in counts.into_iter().enumerate() {
        if !c.is_zero() && alive[code] {
            *subsets.entry(BTreeSet::from([code as u64])).or_default() += c;
        }
    }
    for _ in phases.switch..k {
        let mut next: HashMap<BTreeSet<u64>, BigUint> = HashMap::new();
        for (set, c) in &subsets {
            for col in 0..carpet.column_count() {
                let image: BTreeSet<u64> = set
                    .iter()
                    .flat_map(|&code| carpet.fiber(col).iter().filter_map(move |&d| step(code, d)))
                    .filter(|&t| alive[t as usize])
                    .collect();
                if !image.is_empty() {
                    *next.entry(image).or_default() += c;
                }
            }
        }
        budget.check_states("square-count subsets", next.len() as u128)?;
        subsets = next;
    }
    let total: BigUint = subsets.values().sum();
    Ok(count_report(k, total, start))
}

/// Which approximate-square count to use for box-dimension estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SquareCount {
    /// Window constraints only.
    #[default]
    Constrained,
    /// Squares that actually meet the survivor set.
    MeetingSurvivor,
}

/// Slope of `log N_k` against `k log m`.
pub fn empirical_box_dim(
    carpet: &Carpet,
    hole: &MarkovHole,
    depths: RangeInclusive<usize>,
    kind: SquareCount,
    budget: &Budget,
) -> Result<Estimate> {
    let log_m = (carpet.m() as f64).ln();
    let points = depths
        .map(|k| {
            let r = match kind {
                SquareCount::Constrained => count_surviving_squares(carpet, hole, k, budget)?,
                SquareCount::MeetingSurvivor => count_squares_meeting_survivor(carpet, hole, k, budget)?,
            };
            if !r.log_value.is_finite() {
                return Err(Error::DegenerateInput(format!("no surviving squares at k = {k}")));
            }
            Ok((k as f64 * log_m, r.log_value))
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_line(&points)?;
    Ok(Estimate {
        value: fit.slope,
        stderr: fit.stderr,
    })
}

/// The geometric rectangles of all depth-`k` cylinders, optionally only
/// those whose words contain no window in `survivors_of`.
pub fn enumerate_cells(
    carpet: &Carpet,
    k: usize,
    survivors_of: Option<&MarkovHole>,
    budget: &Budget,
) -> Result<Vec<CellRect>> {
    let total = checked_pow(carpet.digit_count(), k);
    budget.check_states("cell enumeration", total)?;
    let forbidden: HashSet<&Word> = survivors_of.map(|h| h.cells().iter().collect()).unwrap_or_default();
    let l = survivors_of.map_or(1, |h| h.depth());
    let mut out = Vec::new();
    let mut stack: Vec<Word> = vec![Vec::new()];
    while let Some(word) = stack.pop() {
        if word.len() >= l && forbidden.contains(&word[word.len() - l..].to_vec()) {
            continue;
        }
        if word.len() == k {
            out.push(carpet.cell_rect(&word));
            continue;
        }
        for d in (0..carpet.digit_count()).rev() {
            let mut next = word.clone();
            next.push(d);
            stack.push(next);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::all_words;

    fn carpet_a() -> Carpet {
        Carpet::new(3, 2, &[(0, 0), (1, 1), (2, 0)]).unwrap()
    }

    fn avoids(word: &[usize], hole: &WordSet) -> bool {
        word.windows(hole.depth()).all(|w| !hole.cells().contains(w))
    }

    #[test]
    fn measure_one_symbol_hole() {
        let p = BernoulliWeights::uniform(3);
        let h = WordSet::new(3, 1, [vec![0]]).unwrap();
        let r = surviving_measure(&p, &h, 5, &Budget::default()).unwrap();
        assert!((r.value - (2.0f64 / 3.0).powi(5)).abs() < 1e-15);
        let r = surviving_measure(&p, &WordSet::empty(3), 7, &Budget::default()).unwrap();
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn measure_matches_enumeration() {
        let p = BernoulliWeights::uniform(3);
        let h = WordSet::new(3, 2, [vec![1, 1]]).unwrap();
        let r = surviving_measure(&p, &h, 2, &Budget::default()).unwrap();
        let count = all_words(3, 3).iter().filter(|w| avoids(w, &h)).count();
        assert_eq!(count, 22);
        assert!((r.value - 22.0 / 27.0).abs() < 1e-15);

        let q = BernoulliWeights::new(vec![0.2, 0.5, 0.3]).unwrap();
        let h = WordSet::new(3, 2, [vec![0, 2], vec![2, 2], vec![1, 0]]).unwrap();
        for k in 1..=6 {
            let exact: f64 = all_words(3, k + 1).iter().filter(|w| avoids(w, &h)).map(|w| q.cylinder(w)).sum();
            let r = surviving_measure(&q, &h, k, &Budget::default()).unwrap();
            assert!((r.value - exact).abs() < 1e-14, "k = {k}");
        }
    }

    #[test]
    fn measure_underflow_is_tracked_in_logs() {
        let p = BernoulliWeights::uniform(3);
        let h = WordSet::new(3, 1, [vec![0], vec![1]]).unwrap();
        let r = surviving_measure(&p, &h, 2000, &Budget::default()).unwrap();
        assert!((r.log_value - 2000.0 * (1.0f64 / 3.0).ln()).abs() < 1e-9);
    }

    #[test]
    fn bruteforce_rates() {
        let p = BernoulliWeights::uniform(3);
        let h = WordSet::new(3, 1, [vec![0]]).unwrap();
        let r = escape_rate_bruteforce(&p, &h, 24, &Budget::default()).unwrap();
        assert!((r.value - 1.5f64.ln()).abs() < 1e-9);
        let r = escape_rate_bruteforce(&p, &WordSet::empty(3), 24, &Budget::default()).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert!(escape_rate_bruteforce(&p, &h, 5, &Budget::default()).is_err());
    }

    /// Counts approximate squares by listing every digit prefix and column suffix.
    fn exhaustive_squares(c: &Carpet, h: &MarkovHole, k: usize) -> usize {
        let big_k = (c.eta() * k as f64).floor() as usize;
        let l = h.depth();
        let vt = project_hole(c, h);
        let digit_ok = all_words(c.digit_count(), big_k)
            .into_iter()
            .filter(|x| (0..big_k.saturating_sub(l)).all(|i| !h.cells().contains(&x[i..i + l])))
            .count();
        let tail = k - big_k;
        let column_ok = all_words(c.column_count(), tail)
            .into_iter()
            .filter(|y| (0..tail.saturating_sub(l)).all(|i| !vt.cells().contains(&y[i..i + l])))
            .count();
        digit_ok * column_ok
    }

    #[test]
    fn square_counts_match_enumeration() {
        let c = carpet_a();
        let b = Budget::default();
        let holes = [
            MarkovHole::empty(&c),
            MarkovHole::new(&c, 1, [vec![0]]).unwrap(),
            MarkovHole::new(&c, 1, [vec![1]]).unwrap(),
            MarkovHole::new(&c, 2, [vec![1, 1], vec![0, 2]]).unwrap(),
        ];
        for h in &holes {
            for k in 5..=8 {
                if ((c.eta() * k as f64).floor() as usize) <= h.depth() {
                    continue;
                }
                let r = count_surviving_squares(&c, h, k, &b).unwrap();
                assert_eq!(r.exact_count.unwrap(), exhaustive_squares(&c, h, k).to_string(), "k = {k}");
            }
        }
    }

    #[test]
    fn unconstrained_square_count() {
        let c = carpet_a();
        let r = count_surviving_squares(&c, &MarkovHole::empty(&c), 8, &Budget::default()).unwrap();
        assert_eq!(r.exact_count.unwrap(), (3u64.pow(5) * 2u64.pow(3)).to_string());
        let all = MarkovHole::new(&c, 1, (0..3).map(|d| vec![d])).unwrap();
        let r = count_surviving_squares(&c, &all, 8, &Budget::default()).unwrap();
        assert_eq!(r.exact_count.unwrap(), "0");
        assert!(count_surviving_squares(&c, &MarkovHole::empty(&c), 1, &Budget::default()).is_err());
    }

    #[test]
    fn meeting_count_is_bounded_by_constrained_count() {
        let c = carpet_a();
        let b = Budget::default();
        let h = MarkovHole::new(&c, 2, [vec![1, 1], vec![0, 2]]).unwrap();
        for k in 6..=12 {
            let outer = count_squares_meeting_survivor(&c, &h, k, &b).unwrap();
            let inner = count_surviving_squares(&c, &h, k, &b).unwrap();
            assert!(outer.log_value <= inner.log_value + 1e-12);
            assert!(inner.log_value - outer.log_value < 3.0, "k = {k}");
        }
        let empty = MarkovHole::empty(&c);
        let r = count_squares_meeting_survivor(&c, &empty, 8, &b).unwrap();
        assert_eq!(r.exact_count.unwrap(), (3u64.pow(5) * 2u64.pow(3)).to_string());
    }

    #[test]
    fn cells() {
        let c = carpet_a();
        let b = Budget::default();
        let one = enumerate_cells(&c, 1, None, &b).unwrap();
        assert_eq!(one.len(), 3);
        assert!(one.iter().all(|r| (r.w - 1.0 / 3.0).abs() < 1e-15 && (r.h - 0.5).abs() < 1e-15));
        let full = Carpet::new(3, 2, &[(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]).unwrap();
        let tiles = enumerate_cells(&full, 2, None, &b).unwrap();
        assert_eq!(tiles.len(), 36);
        let area: f64 = tiles.iter().map(|r| r.w * r.h).sum();
        assert!((area - 1.0).abs() < 1e-12);
        let h = MarkovHole::new(&c, 1, [vec![1]]).unwrap();
        assert_eq!(enumerate_cells(&c, 2, Some(&h), &b).unwrap().len(), 4);
        assert!(enumerate_cells(&c, 40, None, &b).is_err());
    }
}
