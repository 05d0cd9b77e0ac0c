//! Loading and validating the JSON documents a run is configured from.

use std::fs;
use std::path::Path;

use carpet_holes::numerics::OptimizerConfig;
use carpet_holes::symbolic::{ball_outer_markov, normalize_hole, HoleDoc, MarkovHole, PointDoc, PointSpec, RectDoc};
use carpet_holes::{BernoulliWeights, Budget, Carpet, CarpetDoc};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// A metric ball, resolved to the depth-`depth` cells meeting it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallDoc {
    pub center: [f64; 2],
    pub eps: f64,
    pub depth: usize,
}

/// Exactly one of `cells`, `rectangles` or `ball` must be present.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct HoleFile {
    depth: Option<usize>,
    cells: Option<Vec<Vec<[u32; 2]>>>,
    rectangles: Option<Vec<RectDoc>>,
    ball: Option<BallDoc>,
}

#[derive(Debug, Clone)]
pub struct ResolvedHole {
    pub hole: MarkovHole,
    /// The requested ball, when the hole came from one.
    pub ball: Option<BallDoc>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {what} file {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("malformed {what} file {}: {e}", path.display())))
}

pub fn load_carpet(path: &Path) -> Result<Carpet, Failure> {
    let doc: CarpetDoc = read_json(path, "carpet")?;
    Ok(Carpet::from_doc(&doc)?)
}

pub fn load_hole(path: &Path, carpet: &Carpet, budget: &Budget) -> Result<ResolvedHole, Failure> {
    let file: HoleFile = read_json(path, "hole")?;
    let sources = [file.cells.is_some(), file.rectangles.is_some(), file.ball.is_some()];
    if sources.iter().filter(|&&s| s).count() != 1 {
        return Err(Failure::config(
            "hole file must contain exactly one of \"cells\", \"rectangles\" or \"ball\"".into(),
        ));
    }
    if let Some(cells) = file.cells {
        let depth = file
            .depth
            .ok_or_else(|| Failure::config("a \"cells\" hole needs a \"depth\"".into()))?;
        let hole = MarkovHole::from_doc(carpet, &HoleDoc { depth, cells })?;
        return Ok(ResolvedHole { hole, ball: None });
    }
    if file.depth.is_some() {
        return Err(Failure::config("\"depth\" only accompanies \"cells\"".into()));
    }
    if let Some(rects) = file.rectangles {
        let hole = normalize_hole(carpet, &rects, budget)?;
        return Ok(ResolvedHole { hole, ball: None });
    }
    let ball = file.ball.expect("one source is present");
    let hole = ball_outer_markov(carpet, (ball.center[0], ball.center[1]), ball.eps, ball.depth, budget)?;
    Ok(ResolvedHole { hole, ball: Some(ball) })
}

pub fn load_point(path: &Path, carpet: &Carpet) -> Result<PointSpec, Failure> {
    let doc: PointDoc = read_json(path, "point")?;
    Ok(PointSpec::from_doc(carpet, &doc)?)
}

/// `max-entropy`, `max-dim`, or an explicit comma-separated vector in digit order.
pub fn parse_weights(spec: &str, carpet: &Carpet) -> Result<BernoulliWeights, Failure> {
    match spec {
        "max-entropy" => Ok(carpet.max_entropy_weights()),
        "max-dim" => Ok(carpet.max_dim_weights()),
        explicit => {
            let values = explicit
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::config(format!("bad weight vector {explicit:?}: {e}")))?;
            if values.len() != carpet.digit_count() {
                return Err(Failure::config(format!(
                    "{} weights given for {} digits",
                    values.len(),
                    carpet.digit_count()
                )));
            }
            Ok(BernoulliWeights::new(values)?)
        }
    }
}

pub fn budget(max_states: Option<u64>) -> Result<Budget, Failure> {
    match max_states {
        None => Ok(Budget::default()),
        Some(0) => Err(Failure::config("--budget must be positive".into())),
        Some(n) => Ok(Budget::with_max_states(n)),
    }
}

pub fn optimizer(
    starts: Option<usize>,
    seed: Option<u64>,
    max_iters: Option<usize>,
    step_shrink: Option<f64>,
    fd_step: Option<f64>,
    tolerance: Option<f64>,
) -> Result<OptimizerConfig, Failure> {
    let d = OptimizerConfig::default();
    let cfg = OptimizerConfig {
        starts: starts.unwrap_or(d.starts),
        seed: seed.unwrap_or(d.seed),
        max_iters: max_iters.unwrap_or(d.max_iters),
        step_shrink: step_shrink.unwrap_or(d.step_shrink),
        gradient_fd_step: fd_step.unwrap_or(d.gradient_fd_step),
        tolerance: tolerance.unwrap_or(d.tolerance),
    };
    if !(cfg.step_shrink > 0.0 && cfg.step_shrink < 1.0) {
        return Err(Failure::config("--step-shrink must lie in (0, 1)".into()));
    }
    if !(cfg.gradient_fd_step > 0.0 && cfg.tolerance > 0.0) || cfg.max_iters == 0 {
        return Err(Failure::config("optimizer step, tolerance and iteration cap must be positive".into()));
    }
    Ok(cfg)
}
