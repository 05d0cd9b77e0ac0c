//! Acceptance harness: runs every exit criterion at its pinned tolerance and
//! time limit, prints one PASS/FAIL line each, and exits nonzero if any fail.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use carpet_holes::dimension::{
    dimension_drop_sequence, haussup_first_order, shrink_box_prediction, shrink_hausdorff_prediction,
    survivor_box_dim, survivor_hausdorff_lower, survivor_hausdorff_upper, LowerCase,
};
use carpet_holes::escape::{escape_rate, ratio_sequence};
use carpet_holes::numerics::{simplex_optimize, OptimizerConfig};
use carpet_holes::oracle::{empirical_box_dim, escape_rate_bruteforce, SquareCount};
use carpet_holes::symbolic::{
    ball_inner_markov, ball_outer_markov, cylinder_hole_around, is_mixing, project_hole, validate_shrinking_family,
    FamilyCheckConfig, MarkovHole, PointSpec, SurvivorGraph,
};
use carpet_holes::{BernoulliWeights, Budget, Carpet, Word};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// High-precision evaluations of the two closed forms for carpet A.
const CARPET_A_HAUSDORFF: f64 = 1.3496838201955776;
const CARPET_A_BOX: f64 = 1.3690702464285426;

struct Outcome {
    pass: bool,
    detail: String,
}

fn carpet_a() -> Carpet {
    Carpet::new(3, 2, &[(0, 0), (1, 1), (2, 0)]).unwrap()
}

fn digit_hole(c: &Carpet, digits: &[(u32, u32)]) -> MarkovHole {
    MarkovHole::new(c, 1, digits.iter().map(|&d| vec![c.digit_index(d).unwrap()])).unwrap()
}

/// `(0,0) · (1,1)^∞`.
fn wandering_point(c: &Carpet) -> PointSpec {
    let d = |i, j| c.digit_index((i, j)).unwrap();
    PointSpec::new(vec![d(0, 0)], vec![d(1, 1)]).unwrap()
}

fn ambient_dimensions() -> Outcome {
    let c = carpet_a();
    let dh = (c.hausdorff_dim() - CARPET_A_HAUSDORFF).abs();
    let db = (c.box_dim() - CARPET_A_BOX).abs();
    let est = empirical_box_dim(&c, &MarkovHole::empty(&c), 8..=16, SquareCount::Constrained, &Budget::default())
        .unwrap();
    let de = (est.value - c.box_dim()).abs();
    Outcome {
        pass: dh < 1e-9 && db < 1e-9 && de < 0.02,
        detail: format!("|dim_H err| = {dh:.1e}, |dim_B err| = {db:.1e}, empirical box {:.4} (off {de:.4})", est.value),
    }
}

fn sub_carpet_exactness() -> Outcome {
    let c = carpet_a();
    let b = Budget::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (hole, rest) in [
        ([(0, 0)], [(1, 1), (2, 0)]),
        ([(1, 1)], [(0, 0), (2, 0)]),
    ] {
        let h = digit_hole(&c, &hole);
        let exact = Carpet::new(3, 2, &rest).unwrap().box_dim();
        let v = survivor_box_dim(&c, &h, &b).unwrap();
        let est = empirical_box_dim(&c, &h, 10..=18, SquareCount::Constrained, &b).unwrap();
        pass &= (v - exact).abs() < 1e-9 && (est.value - exact).abs() < 0.02;
        parts.push(format!("hole {hole:?}: {v:.10} vs {exact:.10}, empirical {:.4}", est.value));
    }
    pass &= (Carpet::new(3, 2, &[(1, 1), (2, 0)]).unwrap().box_dim() - 1.0).abs() < 1e-12;
    pass &= (Carpet::new(3, 2, &[(0, 0), (2, 0)]).unwrap().box_dim() - c.eta()).abs() < 1e-12;
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn pressure_suite() -> Vec<(Carpet, MarkovHole, BernoulliWeights)> {
    let a = carpet_a();
    let full = Carpet::new(3, 2, &[(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]).unwrap();
    let five = Carpet::new(4, 3, &[(0, 0), (1, 2), (2, 1), (3, 0), (3, 2)]).unwrap();
    let h = |c: &Carpet, depth: usize, cells: &[&[usize]]| MarkovHole::new(c, depth, cells.iter().map(|w| w.to_vec())).unwrap();
    let mut suite = vec![
        (a.clone(), h(&a, 1, &[&[0]]), a.max_entropy_weights()),
        (a.clone(), h(&a, 1, &[&[1]]), a.max_dim_weights()),
        (a.clone(), h(&a, 2, &[&[1, 1]]), a.max_entropy_weights()),
        (a.clone(), h(&a, 2, &[&[0, 2], &[2, 0]]), a.max_dim_weights()),
        (a.clone(), h(&a, 3, &[&[1, 1, 1]]), a.max_entropy_weights()),
        (a.clone(), h(&a, 3, &[&[0, 1, 2], &[2, 1, 0], &[1, 1, 0]]), a.max_entropy_weights()),
        (full.clone(), h(&full, 1, &[&[3]]), full.max_entropy_weights()),
        (full.clone(), h(&full, 2, &[&[0, 5], &[5, 0], &[2, 2]]), full.max_entropy_weights()),
        (full.clone(), h(&full, 3, &[&[1, 2, 3], &[4, 4, 4]]), full.max_entropy_weights()),
        (five.clone(), h(&five, 1, &[&[4]]), five.max_dim_weights()),
        (five.clone(), h(&five, 2, &[&[0, 1], &[1, 0], &[3, 3]]), five.max_entropy_weights()),
        (five.clone(), h(&five, 3, &[&[2, 2, 2], &[0, 4, 1]]), five.max_dim_weights()),
    ];
    let skewed = BernoulliWeights::new(vec![0.5, 0.2, 0.3]).unwrap();
    suite.push((a.clone(), h(&a, 2, &[&[1, 0]]), skewed));
    suite
}

fn pressure_identity() -> Outcome {
    let b = Budget::default();
    let mut worst: f64 = 0.0;
    let mut mixing = 0;
    let mut failures = Vec::new();
    let suite = pressure_suite();
    for (i, (_, hole, p)) in suite.iter().enumerate() {
        let spectral = escape_rate(p, hole, &b).unwrap();
        if !spectral.mixing {
            continue;
        }
        mixing += 1;
        let brute = escape_rate_bruteforce(p, hole, 24, &b).unwrap();
        let diff = (spectral.rate.unwrap() - brute.value).abs();
        worst = worst.max(diff);
        if diff >= 1e-6 {
            failures.push(format!("#{i}: {diff:.2e}"));
        }
    }
    Outcome {
        pass: failures.is_empty() && suite.len() >= 10 && mixing >= 10,
        detail: format!(
            "{} holes, {mixing} mixing, worst |spectral - oracle| = {worst:.2e}{}",
            suite.len(),
            if failures.is_empty() { String::new() } else { format!(", over tolerance: {}", failures.join(" ")) }
        ),
    }
}

fn perturbation_ratios() -> Outcome {
    let c = carpet_a();
    let p = c.max_entropy_weights();
    let b = Budget::default();
    let fixed = PointSpec::periodic(vec![c.digit_index((1, 1)).unwrap()]).unwrap();
    let periodic = ratio_sequence(&p, &fixed, 8..=8, &b).unwrap()[0].ratio.unwrap();
    let wandering = ratio_sequence(&p, &wandering_point(&c), 8..=8, &b).unwrap()[0].ratio.unwrap();
    Outcome {
        pass: (periodic - 2.0 / 3.0).abs() < 0.05 && (wandering - 1.0).abs() < 0.05,
        detail: format!("fixed point ratio {periodic:.5} (target 2/3), non-periodic ratio {wandering:.5} (target 1)"),
    }
}

fn hausdorff_sandwich() -> Outcome {
    let c = carpet_a();
    let b = Budget::default();
    let cfg = OptimizerConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (hole, rest, case) in [
        ([(0, 0)], [(1, 1), (2, 0)], LowerCase::ColumnEmpty),
        ([(1, 1)], [(0, 0), (2, 0)], LowerCase::ColumnFull),
    ] {
        let h = digit_hole(&c, &hole);
        let exact = Carpet::new(3, 2, &rest).unwrap().hausdorff_dim();
        let upper = survivor_hausdorff_upper(&c, &h, &cfg, &b).unwrap().value;
        let (lower, got_case) = survivor_hausdorff_lower(&c, &h, &cfg, &b).unwrap();
        let lower = lower.value;
        let ok = got_case == case
            && lower <= exact
            && exact <= upper
            && upper - exact <= 0.05
            && (lower - exact).abs() <= 0.05;
        pass &= ok;
        parts.push(format!("hole {hole:?}: lower {lower:.4} <= exact {exact:.4} <= upper {upper:.4}? {ok}"));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn optimizer_correctness() -> Outcome {
    let b = Budget::default();
    let cfg = OptimizerConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for c in [
        carpet_a(),
        Carpet::new(3, 2, &[(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]).unwrap(),
    ] {
        let r = survivor_hausdorff_upper(&c, &MarkovHole::empty(&c), &cfg, &b).unwrap();
        let dv = (r.value - c.hausdorff_dim()).abs();
        let dw = r
            .argmax
            .as_slice()
            .iter()
            .zip(c.max_dim_weights().as_slice())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        pass &= dv < 1e-6 && dw < 1e-5;
        parts.push(format!("|D| = {}: value off {dv:.1e}, argmax off {dw:.1e}", c.digit_count()));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn shrink_constants() -> Outcome {
    let c = carpet_a();
    let z = wandering_point(&c);
    let seq = dimension_drop_sequence(&c, &z, 6..=7, &OptimizerConfig::default(), &Budget::default()).unwrap();
    let box_ratio = seq[1].box_drop_ratio.unwrap();
    let haus_ratio = seq[0].haus_drop_ratio.unwrap();
    let box_pred = shrink_box_prediction(&c, &z);
    let haus_pred = shrink_hausdorff_prediction(&c, &z).unwrap();
    let box_rel = (box_ratio - box_pred).abs() / box_pred;
    let haus_rel = (haus_ratio - haus_pred).abs() / haus_pred;
    Outcome {
        pass: box_rel < 0.10 && haus_rel < 0.15,
        detail: format!(
            "box ratio at N=7 {box_ratio:.4} vs {box_pred:.4} ({:.1}%), Hausdorff ratio at N=6 {haus_ratio:.4} vs {haus_pred:.4} ({:.1}%)",
            100.0 * box_rel,
            100.0 * haus_rel
        ),
    }
}

fn first_order_supremum() -> Outcome {
    let c = carpet_a();
    let z = wandering_point(&c);
    let mu_dim = c.max_dim_weights();
    let cfg = OptimizerConfig::default();
    let ratios: Vec<f64> = (3..=6)
        .map(|n| {
            let h = cylinder_hole_around(&c, &z, n).unwrap();
            let r = haussup_first_order(&c, &h, &cfg).unwrap();
            (r.f_u - r.first_order).abs() / h.measure(&mu_dim)
        })
        .collect();
    Outcome {
        pass: ratios.windows(2).all(|w| w[1] < w[0]),
        detail: format!("ratios over N = 3..6: {}", ratios.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(", ")),
    }
}

fn random_carpet(rng: &mut ChaCha8Rng) -> Carpet {
    loop {
        let m = rng.random_range(2..=3u32);
        let n = rng.random_range(m + 1..=4u32);
        let size = rng.random_range(2..=5usize);
        let mut all: Vec<(u32, u32)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
        all.shuffle(rng);
        if let Ok(c) = Carpet::new(n, m, &all[..size.min(all.len())]) {
            return c;
        }
    }
}

fn random_hole(rng: &mut ChaCha8Rng, c: &Carpet, depth: usize, cells: usize) -> MarkovHole {
    let words: BTreeSet<Word> = (0..cells)
        .map(|_| (0..depth).map(|_| rng.random_range(0..c.digit_count())).collect())
        .collect();
    MarkovHole::new(c, depth, words).unwrap()
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let b = Budget::default();
    let cfg = OptimizerConfig::default();
    let mut failures: Vec<String> = Vec::new();
    let mut checked = [0usize; 6];

    // Hole monotonicity of escape rates and survivor dimensions.
    for trial in 0..40 {
        let c = random_carpet(&mut rng);
        let depth = rng.random_range(1..=2);
        let small = random_hole(&mut rng, &c, depth, 1);
        let extra = random_hole(&mut rng, &c, depth, 2);
        let big = MarkovHole::new(&c, depth, small.cells().iter().chain(extra.cells()).cloned()).unwrap();
        let p = c.max_entropy_weights();
        let (rs, rb) = (escape_rate(&p, &small, &b).unwrap(), escape_rate(&p, &big, &b).unwrap());
        let (rs, rb) = (rs.rate.unwrap_or(f64::INFINITY), rb.rate.unwrap_or(f64::INFINITY));
        if rs > rb + 1e-9 {
            failures.push(format!("rate monotonicity #{trial}"));
        }
        checked[0] += 1;
        if let (Ok(bs), Ok(bb)) = (survivor_box_dim(&c, &small, &b), survivor_box_dim(&c, &big, &b)) {
            if bb > bs + 1e-9 {
                failures.push(format!("box monotonicity #{trial}"));
            }
            if trial % 5 == 0 {
                let us = survivor_hausdorff_upper(&c, &small, &cfg, &b).unwrap();
                let ub = survivor_hausdorff_upper(&c, &big, &cfg, &b).unwrap();
                if ub.value > us.value + 1e-6 {
                    failures.push(format!("upper monotonicity #{trial}"));
                }
                for w in [&us.argmax, &ub.argmax] {
                    let s: f64 = w.as_slice().iter().sum();
                    if (s - 1.0).abs() > 1e-12 || w.as_slice().iter().any(|&x| x < 0.0) {
                        failures.push(format!("simplex membership #{trial}"));
                    }
                }
                checked[3] += 2;
            }
        }
    }

    // Relabeling invariance.
    for trial in 0..30 {
        let c = random_carpet(&mut rng);
        let (depth, cells) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let h = random_hole(&mut rng, &c, depth, cells);
        let mut perm: Vec<usize> = (0..c.digit_count()).collect();
        perm.shuffle(&mut rng);
        let p = BernoulliWeights::normalized((0..c.digit_count()).map(|_| rng.random_range(0.1..1.0)).collect()).unwrap();
        let (h2, p2) = (h.relabeled(&perm), p.relabeled(&perm));
        let g1 = SurvivorGraph::unweighted(&h, &b).unwrap();
        let g2 = SurvivorGraph::unweighted(&h2, &b).unwrap();
        let (r1, r2) = (escape_rate(&p, &h, &b).unwrap(), escape_rate(&p2, &h2, &b).unwrap());
        let same_rate = match (r1.rate, r2.rate) {
            (Some(a), Some(b)) => (a - b).abs() < 1e-9,
            (None, None) => true,
            _ => false,
        };
        if is_mixing(&g1) != is_mixing(&g2) || !same_rate {
            failures.push(format!("relabeling #{trial}"));
        }
        checked[1] += 1;
    }

    // Cylinder families around random eventually periodic points.
    for trial in 0..20 {
        let c = random_carpet(&mut rng);
        let pre: Word = (0..rng.random_range(0..=2)).map(|_| rng.random_range(0..c.digit_count())).collect();
        let per: Word = (0..rng.random_range(1..=3)).map(|_| rng.random_range(0..c.digit_count())).collect();
        let z = PointSpec::new(pre, per).unwrap();
        let family: Vec<_> = (1..=6).map(|n| cylinder_hole_around(&c, &z, n).unwrap()).collect();
        if !validate_shrinking_family(&c, &family, &z, &FamilyCheckConfig::default()).all_pass() {
            failures.push(format!("family validation #{trial}"));
        }
        checked[2] += 1;
    }

    // Optimizer outputs on random concave and linear objectives.
    for trial in 0..10 {
        let k = rng.random_range(2..=6);
        let target: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let t = target.clone();
        let f = move |p: &[f64]| -> f64 { p.iter().zip(&t).map(|(x, y)| x * y - x * x).sum() };
        let opt = simplex_optimize(&f, k, &cfg, &[]).unwrap();
        let s: f64 = opt.argmax.iter().sum();
        if (s - 1.0).abs() > 1e-12 || opt.argmax.iter().any(|&x| x < 0.0) || opt.value < f(&vec![1.0 / k as f64; k]) - 1e-9 {
            failures.push(format!("optimizer output #{trial}"));
        }
        checked[3] += 1;
    }

    // Projected hole lies in the shadow of the hole.
    for trial in 0..40 {
        let c = random_carpet(&mut rng);
        let (depth, cells) = (rng.random_range(1..=3), rng.random_range(1..=12));
        let h = random_hole(&mut rng, &c, depth, cells);
        let shadow: BTreeSet<Word> = h.cells().iter().map(|w| c.project_word(w)).collect();
        if !project_hole(&c, &h).cells().is_subset(&shadow) {
            failures.push(format!("projection inclusion #{trial}"));
        }
        checked[4] += 1;
    }

    // Inner and outer ball approximations.
    for trial in 0..20 {
        let c = random_carpet(&mut rng);
        let center = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let eps = rng.random_range(0.05..0.6);
        let uniform = c.max_entropy_weights();
        let mut previous = f64::INFINITY;
        for k in 1..=5 {
            let outer = ball_outer_markov(&c, center, eps, k, &b).unwrap();
            let inner = ball_inner_markov(&c, center, eps, k, &b).unwrap();
            if !inner.is_subset_of(&outer) {
                failures.push(format!("ball inclusion #{trial} k={k}"));
            }
            let gap = outer.measure(&uniform) - inner.measure(&uniform);
            if gap > previous + 1e-12 {
                failures.push(format!("ball gap growth #{trial} k={k}"));
            }
            previous = gap;
        }
        checked[5] += 1;
    }

    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "cases: monotonicity {}, relabeling {}, families {}, simplex {}, projection {}, balls {}{}",
            checked[0],
            checked[1],
            checked[2],
            checked[3],
            checked[4],
            checked[5],
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(", ")) }
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, u64); 9] = [
        ("ambient dimensions", ambient_dimensions, 10),
        ("sub-carpet box dimensions", sub_carpet_exactness, 60),
        ("pressure identity", pressure_identity, 60),
        ("perturbation ratios", perturbation_ratios, 120),
        ("Hausdorff sandwich", hausdorff_sandwich, 300),
        ("optimizer correctness", optimizer_correctness, 60),
        ("shrink-limit constants", shrink_constants, 600),
        ("first-order supremum", first_order_supremum, 300),
        ("property suites", property_suites, 300),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(*limit);
        let pass = outcome.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name} ({:.2} s of {limit} s) {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            outcome.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
