//! Dimensions of the survivor set `X_U`: the exact box dimension for mixing
//! Markov holes, upper and lower Hausdorff bounds as suprema over Bernoulli
//! weights, and the limiting drop constants for holes shrinking to a point.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use serde::Serialize;

use crate::escape::{d_box_factors, RateEvaluator};
use crate::numerics::{simplex_optimize, OptimizerConfig, SimplexOptimum, StartTrace};
use crate::symbolic::{cylinder_hole_around, project_hole, MarkovHole, PointSpec};
use crate::{BernoulliWeights, Budget, Carpet, Error, Result, Word};

/// Which of the two extreme projection regimes a hole falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerCase {
    /// No column word has its whole fiber in the hole.
    ColumnEmpty,
    /// Every projected cell has its whole fiber in the hole.
    ColumnFull,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerSummary {
    pub best_start: usize,
    pub starts: usize,
    pub converged: usize,
    pub max_iterations: usize,
}

impl OptimizerSummary {
    fn from_trace(trace: &[StartTrace], best_value: f64) -> Self {
        Self {
            best_start: trace.iter().find(|t| t.value == best_value).map_or(0, |t| t.start),
            starts: trace.len(),
            converged: trace.iter().filter(|t| t.converged).count(),
            max_iterations: trace.iter().map(|t| t.iterations).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bound {
    pub value: f64,
    pub argmax: BernoulliWeights,
    pub diagnostics: OptimizerSummary,
}

impl Bound {
    fn from_optimum(opt: SimplexOptimum) -> Result<Self> {
        let diagnostics = OptimizerSummary::from_trace(&opt.trace, opt.value);
        Ok(Self {
            value: opt.value,
            argmax: BernoulliWeights::normalized(opt.argmax)?,
            diagnostics,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivorDimensions {
    /// Absent when the closed form comes out negative.
    #[serde(rename = "box")]
    pub box_dim: Option<f64>,
    pub hausdorff_upper: f64,
    pub hausdorff_lower: Option<f64>,
    pub lower_case: LowerCase,
    pub maximizer: BernoulliWeights,
    pub diagnostics: OptimizerSummary,
}

/// The pair of survivor operators a hole induces: on digits for `V` and on
/// columns for `Ṽ`.
struct HoleRates<'a> {
    carpet: &'a Carpet,
    hole: &'a MarkovHole,
    digits: RateEvaluator,
    columns: Option<RateEvaluator>,
}

impl<'a> HoleRates<'a> {
    fn new(carpet: &'a Carpet, hole: &'a MarkovHole, budget: &Budget) -> Result<Self> {
        let digits = RateEvaluator::new(hole, budget)?;
        if digits.survivor_empty() {
            return Err(Error::EmptySurvivor);
        }
        if !digits.is_mixing() {
            return Err(Error::NotMixing);
        }
        let projected = project_hole(carpet, hole);
        let columns = if projected.is_empty() {
            None
        } else {
            Some(RateEvaluator::new(&projected, budget)?)
        };
        Ok(Self {
            carpet,
            hole,
            digits,
            columns,
        })
    }

    fn digit_rate(&self, p: &[f64]) -> f64 {
        if self.hole.is_empty() {
            0.0
        } else {
            self.digits.rate(p)
        }
    }

    fn column_rate(&self, q: &[f64]) -> f64 {
        self.columns.as_ref().map_or(0.0, |e| e.rate(q))
    }
}

fn column_marginal(carpet: &Carpet, p: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; carpet.column_count()];
    for (d, &w) in p.iter().enumerate() {
        q[carpet.column_of(d)] += w;
    }
    q
}

fn bernoulli_dim_raw(carpet: &Carpet, p: &[f64]) -> f64 {
    let eta = carpet.eta();
    let q = column_marginal(carpet, p);
    (eta * crate::weights::entropy(p) + (1.0 - eta) * crate::weights::entropy(&q)) / (carpet.m() as f64).ln()
}

/// Exact box dimension of the survivor set of a mixing Markov hole.
pub fn survivor_box_dim(carpet: &Carpet, hole: &MarkovHole, budget: &Budget) -> Result<f64> {
    let rates = HoleRates::new(carpet, hole, budget)?;
    let uniform = vec![1.0 / carpet.digit_count() as f64; carpet.digit_count()];
    let column_uniform = vec![1.0 / carpet.column_count() as f64; carpet.column_count()];
    let r = rates.digit_rate(&uniform);
    let r_tilde = rates.column_rate(&column_uniform);
    let eta = carpet.eta();
    let value = carpet.box_dim() - (eta * r + (1.0 - eta) * r_tilde) / (carpet.m() as f64).ln();
    if !value.is_finite() || value < -1e-9 {
        return Err(Error::NegativeDimension(value));
    }
    Ok(value)
}

/// `sup_p bdim(p) − (η r_p(V) + (1 − η) r_{π_*p}(Ṽ)) / log m`.
pub fn survivor_hausdorff_upper(
    carpet: &Carpet,
    hole: &MarkovHole,
    cfg: &OptimizerConfig,
    budget: &Budget,
) -> Result<Bound> {
    let rates = HoleRates::new(carpet, hole, budget)?;
    upper_from_rates(&rates, cfg)
}

fn upper_from_rates(rates: &HoleRates<'_>, cfg: &OptimizerConfig) -> Result<Bound> {
    let carpet = rates.carpet;
    let eta = carpet.eta();
    let log_m = (carpet.m() as f64).ln();
    let objective = |p: &[f64]| {
        let q = column_marginal(carpet, p);
        bernoulli_dim_raw(carpet, p) - (eta * rates.digit_rate(p) + (1.0 - eta) * rates.column_rate(&q)) / log_m
    };
    let opt = simplex_optimize(
        &objective,
        carpet.digit_count(),
        cfg,
        &[carpet.max_dim_weights().as_slice().to_vec()],
    )?;
    Bound::from_optimum(opt)
}

/// Classifies the hole by its column projection `Ṽ` against the shadow of
/// all its cells.
pub fn lower_case(carpet: &Carpet, hole: &MarkovHole) -> LowerCase {
    let projected = project_hole(carpet, hole);
    if projected.is_empty() {
        return LowerCase::ColumnEmpty;
    }
    let shadow: BTreeSet<Word> = hole.cells().iter().map(|c| carpet.project_word(c)).collect();
    if projected.cells() == &shadow {
        LowerCase::ColumnFull
    } else {
        LowerCase::NotApplicable
    }
}

/// The lower bound in the two extreme projection regimes.
pub fn survivor_hausdorff_lower(
    carpet: &Carpet,
    hole: &MarkovHole,
    cfg: &OptimizerConfig,
    budget: &Budget,
) -> Result<(Bound, LowerCase)> {
    let rates = HoleRates::new(carpet, hole, budget)?;
    lower_from_rates(&rates, cfg)
}

fn lower_from_rates(rates: &HoleRates<'_>, cfg: &OptimizerConfig) -> Result<(Bound, LowerCase)> {
    let carpet = rates.carpet;
    let case = lower_case(carpet, rates.hole);
    let log_m = (carpet.m() as f64).ln();
    let log_n = (carpet.n() as f64).ln();
    let starts = [carpet.max_dim_weights().as_slice().to_vec()];
    let opt = match case {
        LowerCase::NotApplicable => return Err(Error::NotApplicable),
        LowerCase::ColumnFull => {
            let objective = |p: &[f64]| bernoulli_dim_raw(carpet, p) - rates.digit_rate(p) / log_m;
            simplex_optimize(&objective, carpet.digit_count(), cfg, &starts)?
        }
        LowerCase::ColumnEmpty => {
            // Group the hole cells by the column word they project to.
            let mut groups: Vec<(Word, Vec<&Word>)> = Vec::new();
            for cell in rates.hole.cells() {
                let tau = carpet.project_word(cell);
                match groups.iter_mut().find(|g| g.0 == tau) {
                    Some(g) => g.1.push(cell),
                    None => groups.push((tau, vec![cell])),
                }
            }
            let objective = |p: &[f64]| {
                let q = column_marginal(carpet, p);
                let correction: f64 = groups
                    .iter()
                    .map(|(tau, cells)| {
                        let q_w: f64 = tau.iter().map(|&c| q[c]).product();
                        let removed: f64 = cells.iter().map(|w| w.iter().map(|&d| p[d]).product::<f64>()).sum();
                        let kept = (q_w - removed).max(0.0);
                        q_w * (kept / q_w).ln()
                    })
                    .sum();
                bernoulli_dim_raw(carpet, p) + correction / log_n
            };
            simplex_optimize(&objective, carpet.digit_count(), cfg, &starts)?
        }
    };
    Ok((Bound::from_optimum(opt)?, case))
}

/// Box dimension and both Hausdorff bounds, sharing one pair of survivor
/// operators.
pub fn survivor_dimensions(
    carpet: &Carpet,
    hole: &MarkovHole,
    cfg: &OptimizerConfig,
    budget: &Budget,
) -> Result<SurvivorDimensions> {
    let rates = HoleRates::new(carpet, hole, budget)?;
    let box_dim = match survivor_box_dim(carpet, hole, budget) {
        Ok(v) => Some(v),
        Err(Error::NegativeDimension(_)) => None,
        Err(e) => return Err(e),
    };
    let upper = upper_from_rates(&rates, cfg)?;
    let (lower, case) = match lower_from_rates(&rates, cfg) {
        Ok((b, case)) => (Some(b.value), case),
        Err(Error::NotApplicable) => (None, LowerCase::NotApplicable),
        Err(e) => return Err(e),
    };
    Ok(SurvivorDimensions {
        box_dim,
        hausdorff_upper: upper.value,
        hausdorff_lower: lower,
        lower_case: case,
        maximizer: upper.argmax,
        diagnostics: upper.diagnostics,
    })
}

/// Limit of `(dim_B X − dim_B X_{U_N}) / μ_max(U_N)` for cylinders shrinking to `z`.
pub fn shrink_box_prediction(carpet: &Carpet, z: &PointSpec) -> f64 {
    let (d, d_tilde) = d_box_factors(carpet, z);
    let eta = carpet.eta();
    let log_m = (carpet.m() as f64).ln();
    if carpet.columns_at_most_singletons() {
        (eta * d + (1.0 - eta) * d_tilde) / log_m
    } else {
        eta * d / log_m
    }
}

/// Limit of `(dim_H X − dim_H X_{U_N}) / μ_dim(U_N)`; only offered for
/// non-periodic `z`.
pub fn shrink_hausdorff_prediction(carpet: &Carpet, z: &PointSpec) -> Option<f64> {
    if z.is_periodic() {
        return None;
    }
    let base = if carpet.columns_at_most_singletons() { carpet.m() } else { carpet.n() };
    Some(1.0 / (base as f64).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropEntry {
    pub depth: usize,
    pub mu_max: f64,
    pub mu_dim: f64,
    pub box_drop_ratio: Option<f64>,
    pub haus_drop_ratio: Option<f64>,
    /// Hypotheses held at this depth (mixing survivor, nonnegative box value).
    pub valid: bool,
}

/// Normalized dimension drops for the cylinder holes `U_N` around `z`.
pub fn dimension_drop_sequence(
    carpet: &Carpet,
    z: &PointSpec,
    depths: RangeInclusive<usize>,
    cfg: &OptimizerConfig,
    budget: &Budget,
) -> Result<Vec<DropEntry>> {
    let mu_max = carpet.max_entropy_weights();
    let mu_dim = carpet.max_dim_weights();
    let (dim_b, dim_h) = (carpet.box_dim(), carpet.hausdorff_dim());
    let mut out = Vec::new();
    for n in depths.filter(|&n| n >= 1) {
        let hole = cylinder_hole_around(carpet, z, n)?;
        let (a, b) = (hole.measure(&mu_max), hole.measure(&mu_dim));
        let entry = match survivor_box_dim(carpet, &hole, budget) {
            Ok(box_value) => {
                let upper = survivor_hausdorff_upper(carpet, &hole, cfg, budget)?;
                DropEntry {
                    depth: n,
                    mu_max: a,
                    mu_dim: b,
                    box_drop_ratio: Some((dim_b - box_value) / a),
                    haus_drop_ratio: Some((dim_h - upper.value) / b),
                    valid: true,
                }
            }
            Err(Error::NotMixing | Error::EmptySurvivor | Error::NegativeDimension(_)) => DropEntry {
                depth: n,
                mu_max: a,
                mu_dim: b,
                box_drop_ratio: None,
                haus_drop_ratio: None,
                valid: false,
            },
            Err(e) => return Err(e),
        };
        out.push(entry);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstOrder {
    /// `sup_p bdim(p) − (η μ_p(U) + (1 − η) π_*μ_p(Ũ)) / log m`.
    pub f_u: f64,
    /// The same expression with `p` frozen at the measure of maximal dimension.
    pub first_order: f64,
    pub argmax: BernoulliWeights,
}

pub fn haussup_first_order(carpet: &Carpet, hole: &MarkovHole, cfg: &OptimizerConfig) -> Result<FirstOrder> {
    let projected = project_hole(carpet, hole);
    let eta = carpet.eta();
    let log_m = (carpet.m() as f64).ln();
    let word_mass = |w: &Word, p: &[f64]| w.iter().map(|&s| p[s]).product::<f64>();
    let penalty = |p: &[f64], q: &[f64]| {
        let mu: f64 = hole.cells().iter().map(|w| word_mass(w, p)).sum();
        let nu: f64 = projected.cells().iter().map(|w| word_mass(w, q)).sum();
        (eta * mu + (1.0 - eta) * nu) / log_m
    };
    let objective = |p: &[f64]| bernoulli_dim_raw(carpet, p) - penalty(p, &column_marginal(carpet, p));
    let mu_dim = carpet.max_dim_weights();
    let opt = simplex_optimize(&objective, carpet.digit_count(), cfg, &[mu_dim.as_slice().to_vec()])?;
    let first_order =
        carpet.hausdorff_dim() - penalty(mu_dim.as_slice(), carpet.project_weights(&mu_dim).as_slice());
    Ok(FirstOrder {
        f_u: opt.value,
        first_order,
        argmax: BernoulliWeights::normalized(opt.argmax)?,
    })
}
