use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use carpet_holes::dimension::{
    dimension_drop_sequence, shrink_box_prediction, shrink_hausdorff_prediction, survivor_box_dim,
    survivor_dimensions,
};
use carpet_holes::escape::{escape_rate, hole_measure, perturbation_prediction, ratio_sequence};
use carpet_holes::oracle::{
    count_surviving_squares, empirical_box_dim, enumerate_cells, escape_rate_bruteforce, surviving_measure,
    SquareCount,
};
use carpet_holes::symbolic::{project_hole, MarkovHole};
use carpet_holes::{Budget, Carpet, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

mod config;
mod output;

use output::{Format, Sink};

/// A failed run: exit code, message, and optionally a report to emit anyway.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
    payload: Option<Value>,
}

impl Failure {
    pub fn config(message: String) -> Self {
        Self {
            code: 2,
            message,
            payload: None,
        }
    }

    pub fn io(e: std::io::Error) -> Self {
        Self {
            code: 1,
            message: format!("write failed: {e}"),
            payload: None,
        }
    }

    pub fn csv(e: csv::Error) -> Self {
        Self {
            code: 1,
            message: format!("csv output failed: {e}"),
            payload: None,
        }
    }

    fn with_payload(mut self, payload: Value) -> Self {
        self.payload = Some(payload);
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::EmptySurvivor => 3,
            Error::NotMixing => 4,
            Error::BudgetExceeded { .. } | Error::DepthTooLarge { .. } => 5,
            Error::NotConverged { .. }
            | Error::OptimizerFailed(_)
            | Error::NegativeDimension(_)
            | Error::NotApplicable => 1,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
            payload: None,
        }
    }
}

#[derive(Parser)]
#[command(name = "carpet-holes", version, about = "Dimensions of Bedford–McMullen carpets with holes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ambient Hausdorff and box dimensions of the carpet.
    Dims(Common),
    /// Escape rate through a hole and through its column projection.
    Escape {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        hole: HoleArg,
        #[command(flatten)]
        weights: WeightsArg,
    },
    /// Box dimension and Hausdorff bounds of the survivor set.
    Survivor {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        hole: HoleArg,
        #[command(flatten)]
        opt: OptimizerArgs,
        /// Also estimate the box dimension by counting approximate squares.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 10)]
        k_min: usize,
        #[arg(long, default_value_t = 18)]
        k_max: usize,
    },
    /// Escape-rate ratios and dimension drops for cylinders shrinking to a point.
    Shrink {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        point: PathBuf,
        #[command(flatten)]
        weights: WeightsArg,
        #[command(flatten)]
        opt: OptimizerArgs,
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long, default_value_t = 7)]
        n_max: usize,
    },
    /// Rectangles of the depth-k cylinders, optionally only the hole's survivors.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        hole: Option<PathBuf>,
        #[arg(long)]
        depth: usize,
    },
    /// Cross-check spectral results against the brute-force oracles.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        hole: Option<PathBuf>,
        #[command(flatten)]
        weights: WeightsArg,
        #[arg(long, default_value_t = 10)]
        k_min: usize,
        #[arg(long, default_value_t = 24)]
        k_max: usize,
        /// Emit the raw `(k, value, log_value)` sequence instead of the checks.
        #[arg(long, value_enum)]
        series: Option<Series>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    carpet: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest admissible state space or cell enumeration.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct HoleArg {
    #[arg(long)]
    hole: PathBuf,
}

#[derive(Args)]
struct WeightsArg {
    /// `max-entropy`, `max-dim`, or comma-separated weights in digit order.
    #[arg(long, default_value = "max-entropy")]
    weights: String,
}

#[derive(Args)]
struct OptimizerArgs {
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    step_shrink: Option<f64>,
    #[arg(long)]
    gradient_fd_step: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Series {
    /// Measure of the points surviving k steps.
    Measure,
    /// Approximate-square counts.
    Squares,
}

struct Ctx {
    carpet: Carpet,
    budget: Budget,
    format: Format,
    sink: Sink,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self, Failure> {
        Ok(Self {
            carpet: config::load_carpet(&common.carpet)?,
            budget: config::budget(common.budget)?,
            format: match common.format {
                FormatArg::Json => Format::Json,
                FormatArg::Csv => Format::Csv,
            },
            sink: Sink::open(common.out.as_deref())?,
        })
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn hole_report(carpet: &Carpet, resolved: &config::ResolvedHole) -> Value {
    json!({
        "requested_ball": resolved.ball,
        "resolved": to_value(&resolved.hole.to_doc(carpet)),
    })
}

fn cmd_dims(common: Common) -> Result<(), Failure> {
    let mut ctx = Ctx::new(&common)?;
    let c = &ctx.carpet;
    let report = json!({
        "hausdorff": c.hausdorff_dim(),
        "box": c.box_dim(),
        "eta": c.eta(),
        "column_counts": c.column_counts(),
        "max_dim_weights": to_value(&c.max_dim_weights()),
    });
    ctx.sink.report(&ctx.format, report)
}

fn cmd_escape(common: Common, hole: HoleArg, weights: WeightsArg) -> Result<(), Failure> {
    let mut ctx = Ctx::new(&common)?;
    let c = &ctx.carpet;
    let resolved = config::load_hole(&hole.hole, c, &ctx.budget)?;
    let p = config::parse_weights(&weights.weights, c)?;
    let r = escape_rate(&p, &resolved.hole, &ctx.budget)?;
    let q = c.project_weights(&p);
    let projected = project_hole(c, &resolved.hole);
    let rp = escape_rate(&q, &projected, &ctx.budget)?;
    let report = json!({
        "rate": r.rate,
        "perron_root": r.perron_root,
        "residual": r.residual,
        "iterations": r.iterations,
        "mixing": r.mixing,
        "survivor_empty": r.survivor_empty,
        "hole_measure": hole_measure(&p, &resolved.hole),
        "projected": {
            "cells": projected.len(),
            "rate": rp.rate,
            "perron_root": rp.perron_root,
            "mixing": rp.mixing,
            "hole_measure": hole_measure(&q, &projected),
        },
        "weights": to_value(&p),
        "hole": hole_report(c, &resolved),
    });
    if r.survivor_empty {
        return Err(Failure::from(Error::EmptySurvivor).with_payload(report));
    }
    ctx.sink.report(&ctx.format, report)
}

fn cmd_survivor(
    common: Common,
    hole: HoleArg,
    opt: OptimizerArgs,
    oracle: bool,
    k_min: usize,
    k_max: usize,
) -> Result<(), Failure> {
    let mut ctx = Ctx::new(&common)?;
    let c = &ctx.carpet;
    let resolved = config::load_hole(&hole.hole, c, &ctx.budget)?;
    let cfg = optimizer_config(&opt)?;
    let dims = survivor_dimensions(c, &resolved.hole, &cfg, &ctx.budget)?;
    let mut report = to_value(&dims);
    let map = report.as_object_mut().expect("struct serializes to an object");
    map.insert("hole".into(), hole_report(c, &resolved));
    if oracle {
        if k_min > k_max {
            return Err(Failure::config("--k-min exceeds --k-max".into()));
        }
        let est = empirical_box_dim(c, &resolved.hole, k_min..=k_max, SquareCount::Constrained, &ctx.budget)?;
        map.insert(
            "oracle".into(),
            json!({
                "k_min": k_min,
                "k_max": k_max,
                "empirical_box": est.value,
                "stderr": est.stderr,
                "discrepancy": dims.box_dim.map(|b| est.value - b),
            }),
        );
    }
    ctx.sink.report(&ctx.format, report)
}

fn optimizer_config(o: &OptimizerArgs) -> Result<carpet_holes::numerics::OptimizerConfig, Failure> {
    config::optimizer(o.starts, o.seed, o.max_iters, o.step_shrink, o.gradient_fd_step, o.tolerance)
}

const SHRINK_COLUMNS: [&str; 10] = [
    "N",
    "mu",
    "mu_dim",
    "rate",
    "ratio",
    "box_drop_ratio",
    "haus_drop_ratio",
    "predicted_ratio",
    "predicted_box",
    "predicted_haus",
];

fn cmd_shrink(
    common: Common,
    point: PathBuf,
    weights: WeightsArg,
    opt: OptimizerArgs,
    n_min: usize,
    n_max: usize,
) -> Result<(), Failure> {
    let mut ctx = Ctx::new(&common)?;
    let c = &ctx.carpet;
    let z = config::load_point(&point, c)?;
    let p = config::parse_weights(&weights.weights, c)?;
    let cfg = optimizer_config(&opt)?;
    if n_min == 0 {
        return Err(Failure::config("--n-min must be at least 1".into()));
    }
    let ratios = ratio_sequence(&p, &z, n_min..=n_max, &ctx.budget)?;
    let drops = dimension_drop_sequence(c, &z, n_min..=n_max, &cfg, &ctx.budget)?;
    let predicted_ratio = perturbation_prediction(&p, &z);
    let predicted_box = shrink_box_prediction(c, &z);
    let predicted_haus = shrink_hausdorff_prediction(c, &z);
    let rows: Vec<Map<String, Value>> = ratios
        .iter()
        .zip(&drops)
        .map(|(r, d)| {
            let row = json!({
                "N": r.depth,
                "mu": r.measure,
                "mu_dim": d.mu_dim,
                "rate": r.rate,
                "ratio": r.ratio,
                "mixing": r.mixing && d.valid,
                "box_drop_ratio": d.box_drop_ratio,
                "haus_drop_ratio": d.haus_drop_ratio,
                "predicted_ratio": predicted_ratio,
                "predicted_box": predicted_box,
                "predicted_haus": predicted_haus,
            });
            match row {
                Value::Object(m) => m,
                _ => unreachable!(),
            }
        })
        .collect();
    match ctx.format {
        Format::Csv => ctx.sink.table(&SHRINK_COLUMNS, &rows),
        Format::Json => ctx.sink.json(json!({
            "point": to_value(&z.to_doc(c)),
            "prime_period": z.prime_period(),
            "weights": to_value(&p),
            "predicted_ratio": predicted_ratio,
            "predicted_box": predicted_box,
            "predicted_haus": predicted_haus,
            "sequence": rows,
        })),
    }
}

fn cmd_render(common: Common, hole: Option<PathBuf>, depth: usize) -> Result<(), Failure> {
    let mut ctx = Ctx::new(&common)?;
    let c = &ctx.carpet;
    let resolved = hole.map(|h| config::load_hole(&h, c, &ctx.budget)).transpose()?;
    let cells = enumerate_cells(c, depth, resolved.as_ref().map(|r| &r.hole), &ctx.budget)?;
    let rows: Vec<Map<String, Value>> = cells
        .iter()
        .map(|r| match to_value(r) {
            Value::Object(m) => m,
            _ => unreachable!(),
        })
        .collect();
    match ctx.format {
        Format::Csv => ctx.sink.table(&["x", "y", "w", "h"], &rows),
        Format::Json => ctx.sink.json(json!({ "depth": depth, "cells": rows })),
    }
}

/// The default suite: every single-digit hole and every single-cell depth-2 hole.
fn default_suite(c: &Carpet) -> Vec<MarkovHole> {
    let d = c.digit_count();
    let mut holes: Vec<MarkovHole> = (0..d)
        .map(|a| MarkovHole::new(c, 1, [vec![a]]).expect("valid cell"))
        .collect();
    for a in 0..d {
        for b in 0..d {
            holes.push(MarkovHole::new(c, 2, [vec![a, b]]).expect("valid cell"));
        }
    }
    holes
}

const PRESSURE_TOLERANCE: f64 = 1e-6;
const BOX_TOLERANCE: f64 = 0.02;

fn cmd_oracle_check(
    common: Common,
    hole: Option<PathBuf>,
    weights: WeightsArg,
    k_min: usize,
    k_max: usize,
    series: Option<Series>,
) -> Result<(), Failure> {
    let mut ctx = Ctx::new(&common)?;
    let c = &ctx.carpet;
    let p = config::parse_weights(&weights.weights, c)?;
    if k_min > k_max {
        return Err(Failure::config("--k-min exceeds --k-max".into()));
    }
    let holes = match &hole {
        Some(path) => vec![config::load_hole(path, c, &ctx.budget)?.hole],
        None => default_suite(c),
    };

    if let Some(series) = series {
        let h = match (&hole, holes.first()) {
            (Some(_), Some(h)) => h,
            _ => return Err(Failure::config("--series needs --hole".into())),
        };
        let rows = (k_min..=k_max)
            .map(|k| {
                let r = match series {
                    Series::Measure => surviving_measure(&p, h, k, &ctx.budget)?,
                    Series::Squares => count_surviving_squares(c, h, k, &ctx.budget)?,
                };
                let row = json!({ "k": k, "value": r.value, "log_value": r.log_value });
                Ok(match row {
                    Value::Object(m) => m,
                    _ => unreachable!(),
                })
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        return match ctx.format {
            Format::Csv => ctx.sink.table(&["k", "value", "log_value"], &rows),
            Format::Json => ctx.sink.json(Value::Array(rows.into_iter().map(Value::Object).collect())),
        };
    }

    let mut checks = Vec::new();
    let mut all_pass = true;
    for h in &holes {
        let spectral = escape_rate(&p, h, &ctx.budget)?;
        let mut entry = Map::new();
        entry.insert("hole".into(), to_value(&h.to_doc(c)));
        entry.insert("mixing".into(), json!(spectral.mixing));
        if spectral.mixing {
            let brute = escape_rate_bruteforce(&p, h, k_max, &ctx.budget)?;
            let rate = spectral.rate.expect("mixing survivor is nonempty");
            let diff = (rate - brute.value).abs();
            let pass = diff < PRESSURE_TOLERANCE;
            all_pass &= pass;
            entry.insert(
                "pressure".into(),
                json!({ "spectral": rate, "oracle": brute.value, "difference": diff, "pass": pass }),
            );
            if h.depth() == 1 {
                let exact = survivor_box_dim(c, h, &ctx.budget)?;
                let lo = k_min.max(((h.depth() + 1) as f64 / c.eta()).ceil() as usize + 1);
                let est = empirical_box_dim(c, h, lo..=k_max.max(lo + 2), SquareCount::Constrained, &ctx.budget)?;
                let diff = (exact - est.value).abs();
                let pass = diff < BOX_TOLERANCE;
                all_pass &= pass;
                entry.insert(
                    "box".into(),
                    json!({ "spectral": exact, "oracle": est.value, "difference": diff, "pass": pass }),
                );
            }
        }
        checks.push(Value::Object(entry));
    }
    let report = json!({ "weights": to_value(&p), "k_max": k_max, "all_pass": all_pass, "checks": checks });
    if !all_pass {
        return Err(Failure {
            code: 1,
            message: "oracle disagreement".into(),
            payload: Some(report),
        });
    }
    ctx.sink.report(&ctx.format, report)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Dims(common) => cmd_dims(common),
        Command::Escape { common, hole, weights } => cmd_escape(common, hole, weights),
        Command::Survivor {
            common,
            hole,
            opt,
            oracle,
            k_min,
            k_max,
        } => cmd_survivor(common, hole, opt, oracle, k_min, k_max),
        Command::Shrink {
            common,
            point,
            weights,
            opt,
            n_min,
            n_max,
        } => cmd_shrink(common, point, weights, opt, n_min, n_max),
        Command::Render { common, hole, depth } => cmd_render(common, hole, depth),
        Command::OracleCheck {
            common,
            hole,
            weights,
            k_min,
            k_max,
            series,
        } => cmd_oracle_check(common, hole, weights, k_min, k_max, series),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let body = json!({ "error": f.message, "exit_code": f.code, "report": f.payload });
            let text = serde_json::to_string_pretty(&output::rounded(body)).expect("serializes");
            let _ = writeln!(std::io::stdout(), "{text}");
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
