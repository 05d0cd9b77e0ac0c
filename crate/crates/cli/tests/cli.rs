use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const CARPET_A: &str = r#"{"n": 3, "m": 2, "digits": [[0,0],[1,1],[2,0]]}"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Self { dir: TempDir::new().unwrap() };
        ws.file("a.json", CARPET_A);
        ws
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_carpet-holes"))
            .current_dir(self.dir.path())
            .args(args)
            .output()
            .unwrap()
    }
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn close(v: &Value, x: f64) -> bool {
    (v.as_f64().unwrap() - x).abs() < 1e-10
}

#[test]
fn ambient_dimensions() {
    let ws = Workspace::new();
    let out = ws.run(&["dims", "--carpet", "a.json"]);
    assert!(out.status.success());
    let v = json(&out);
    assert!(close(&v["hausdorff"], 1.3496838202));
    assert!(close(&v["box"], 1.36907024643));

    ws.file("full.json", r#"{"n": 3, "m": 2, "digits": [[0,0],[0,1],[1,0],[1,1],[2,0],[2,1]]}"#);
    let v = json(&ws.run(&["dims", "--carpet", "full.json"]));
    assert!(close(&v["hausdorff"], 2.0) && close(&v["box"], 2.0));
}

#[test]
fn malformed_input_is_a_config_error() {
    let ws = Workspace::new();
    ws.file("bad.json", "{\"n\": 3,");
    let out = ws.run(&["dims", "--carpet", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["exit_code"], 2);

    ws.file("h.json", r#"{"depth": 1, "cells": [[[1,1]]], "rectangles": []}"#);
    let out = ws.run(&["escape", "--carpet", "a.json", "--hole", "h.json"]);
    assert_eq!(out.status.code(), Some(2));

    ws.file("odd.json", r#"{"n": 2, "m": 3, "digits": [[0,0]]}"#);
    assert_eq!(ws.run(&["dims", "--carpet", "odd.json"]).status.code(), Some(2));
}

#[test]
fn escape_rate_of_one_cell() {
    let ws = Workspace::new();
    ws.file("h.json", r#"{"depth": 1, "cells": [[[1,1]]]}"#);
    let v = json(&ws.run(&["escape", "--carpet", "a.json", "--hole", "h.json"]));
    assert!(close(&v["rate"], 1.5f64.ln()));
    assert!(close(&v["projected"]["rate"], 1.5f64.ln()));
    assert_eq!(v["mixing"], true);

    let v = json(&ws.run(&["escape", "--carpet", "a.json", "--hole", "h.json", "--weights", "0.25,0.5,0.25"]));
    assert!(close(&v["rate"], 2f64.ln()));
}

#[test]
fn full_hole_exits_with_empty_survivor() {
    let ws = Workspace::new();
    ws.file("h.json", r#"{"depth": 1, "cells": [[[0,0]], [[1,1]], [[2,0]]]}"#);
    let out = ws.run(&["escape", "--carpet", "a.json", "--hole", "h.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["report"]["survivor_empty"], true);
}

#[test]
fn non_mixing_survivor_is_reported() {
    let ws = Workspace::new();
    // Only the alternation (0,0)(1,1) survives: a 2-cycle.
    ws.file(
        "h.json",
        r#"{"depth": 2, "cells": [[[0,0],[0,0]], [[0,0],[2,0]], [[1,1],[1,1]], [[1,1],[2,0]],
            [[2,0],[0,0]], [[2,0],[1,1]], [[2,0],[2,0]]]}"#,
    );
    let out = ws.run(&["survivor", "--carpet", "a.json", "--hole", "h.json"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn survivor_dimensions_of_a_sub_carpet() {
    let ws = Workspace::new();
    ws.file("h.json", r#"{"depth": 1, "cells": [[[0,0]]]}"#);
    let out = ws.run(&["survivor", "--carpet", "a.json", "--hole", "h.json", "--starts", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(close(&v["box"], 1.0));
    assert_eq!(v["lower_case"], "column_empty");
    assert!(v["hausdorff_upper"].as_f64().unwrap() >= 1.0 - 1e-9);
}

#[test]
fn shrink_series_and_budget() {
    let ws = Workspace::new();
    ws.file("z.json", r#"{"preperiod": [[0,0]], "period": [[1,1]]}"#);
    let out = ws.run(&["shrink", "--carpet", "a.json", "--point", "z.json", "--n-max", "4", "--format", "csv", "--starts", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("N,mu,mu_dim,rate,ratio"));
    assert_eq!(lines.count(), 4);

    let out = ws.run(&["shrink", "--carpet", "a.json", "--point", "z.json", "--n-max", "30", "--budget", "1000"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn render_rows() {
    let ws = Workspace::new();
    let rows = |args: &[&str]| {
        let out = ws.run(args);
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap().lines().count() - 1
    };
    assert_eq!(rows(&["render", "--carpet", "a.json", "--depth", "1", "--format", "csv"]), 3);
    assert_eq!(rows(&["render", "--carpet", "a.json", "--depth", "2", "--format", "csv"]), 9);
    ws.file("h.json", r#"{"depth": 1, "cells": [[[1,1]]]}"#);
    assert_eq!(rows(&["render", "--carpet", "a.json", "--depth", "2", "--hole", "h.json", "--format", "csv"]), 4);
    assert_eq!(ws.run(&["render", "--carpet", "a.json", "--depth", "40"]).status.code(), Some(5));
}

#[test]
fn output_file_and_determinism() {
    let ws = Workspace::new();
    ws.file("h.json", r#"{"rectangles": [{"omega": [1], "tau": [1]}]}"#);
    let args = |out: &Path| {
        ["survivor", "--carpet", "a.json", "--hole", "h.json", "--seed", "7", "--out", out.to_str().unwrap()]
            .map(String::from)
    };
    for name in ["one.json", "two.json"] {
        let out = Command::new(env!("CARGO_BIN_EXE_carpet-holes"))
            .current_dir(ws.dir.path())
            .args(args(&ws.path(name)))
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let (one, two) = (fs::read(ws.path("one.json")).unwrap(), fs::read(ws.path("two.json")).unwrap());
    assert!(!one.is_empty());
    assert_eq!(one, two);
}

#[test]
fn ball_holes_resolve_to_cells() {
    let ws = Workspace::new();
    ws.file("b.json", r#"{"ball": {"center": [0.5, 0.75], "eps": 0.05, "depth": 2}}"#);
    let out = ws.run(&["escape", "--carpet", "a.json", "--hole", "b.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["hole"]["requested_ball"].is_object());
    assert!(!v["hole"]["resolved"]["cells"].as_array().unwrap().is_empty());
}

#[test]
fn oracle_check_agrees() {
    let ws = Workspace::new();
    let out = ws.run(&["oracle-check", "--carpet", "a.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}
