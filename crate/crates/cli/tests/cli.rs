use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIAS: &str = "\
head header(+cell)
head materials(+index, +cell)
head part_description(+cell)
head author(+cell)
head date(+cell)
body zero(+index)
body succ(-index, +index)
body above_below(+cell, -cell)
body above_below(-cell, +cell)
body left_right(+cell, -cell)
body cell_contains(+cell, #token)
";

const MINING_BIAS: &str = "\
body cell_contains(+cell, #token)
body above_below(+cell, -cell)
body header(+cell)
body materials(-index, +cell)
";

fn tdassist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdassist")).args(args).env_remove("TDASSIST_CONFIG").output().unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(tdassist(&["--no-such-flag"]).status.code(), Some(1));
    assert_eq!(tdassist(&["rank"]).status.code(), Some(1));
    assert_eq!(tdassist(&["--help"]).status.code(), Some(0));
    let out = tdassist(&["rank", "/nonexistent/q.json", "--index", "/nonexistent/i"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}

#[test]
fn learn_index_rank_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train");
    let bias = dir.path().join("bias.txt");
    std::fs::write(&bias, BIAS).unwrap();
    ok_json(&tdassist(&["--seed", "11", "synth", p(&train), "--rows", "1,2,3,4,5"]));

    let out = tdassist(&["learn", p(&train), "--bias", p(&bias), "--bootstrap"]);
    let report = ok_json(&out);
    let materials = report["targets"].as_array().unwrap().iter().find(|t| t["label"] == "materials").unwrap();
    let clauses: Vec<&str> = materials["clauses"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    assert_eq!(
        clauses,
        [
            "materials(A,B) :- zero(A), above_below(B,C), header(C).",
            "materials(A,B) :- succ(C,A), above_below(B,D), materials(C,D).",
        ]
    );
    let again = tdassist(&["learn", p(&train), "--bias", p(&bias), "--bootstrap"]);
    assert_eq!(out.stdout, again.stdout);

    let programs = dir.path().join("programs.pl");
    std::fs::write(&programs, report["program"].as_str().unwrap()).unwrap();
    let parsed = ok_json(&tdassist(&["parse", p(&train.join("d02.json")), "--programs", p(&programs)]));
    assert_eq!(parsed["labels"]["materials"].as_array().unwrap().len(), 12);

    let mbias = dir.path().join("mine.txt");
    std::fs::write(&mbias, MINING_BIAS).unwrap();
    let index = dir.path().join("designs.tdx");
    let built = ok_json(&tdassist(&[
        "index", "build", p(&train), "--bias", p(&mbias), "--programs", p(&programs), "--out", p(&index),
        "--min-support", "0.4", "--max-literals", "2",
    ]));
    assert_eq!(built["designs"], 5);

    let q = train.join("d03.json");
    let ranked = ok_json(&tdassist(&["rank", p(&q), "--index", p(&index), "--alpha", "1.0", "-k", "5"]));
    assert_eq!(ranked[0]["id"], "d03");
    let r = ranked.as_array().unwrap();
    for w in r.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        assert!(a["sim_tabular"].as_f64() >= b["sim_tabular"].as_f64());
        assert_eq!(a["combined"], a["sim_tabular"]);
    }

    // Config supplies what the flags leave out.
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, format!("alpha = 1.0\nk = 5\n[paths]\nindex = {:?}\n", p(&index))).unwrap();
    let via_env = Command::new(env!("CARGO_BIN_EXE_tdassist"))
        .args(["rank", p(&q)])
        .env("TDASSIST_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(ok_json(&via_env), ranked);
    std::fs::write(&cfg, "alpha = 3.0\n").unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_tdassist"))
        .args(["rank", p(&q), "--index", p(&index)])
        .env("TDASSIST_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn corrects_noisy_name() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("cell.json");
    std::fs::write(
        &doc,
        r#"{"id": "q", "cells": [{"id": "name", "bbox": [0, 0, 50, 10], "text": null,
            "ocr": [{"d": 0.8, "b": 0.1, "o": 0.1}, {"r": 1.0}, {"i": 1.0}, {"e": 0.8, "3": 0.2}, {"s": 1.0}]}]}"#,
    )
    .unwrap();
    let dict = dir.path().join("names.txt");
    std::fs::write(&dict, "wannes\ndries\ndii3s\n").unwrap();
    let out = ok_json(&tdassist(&["correct", p(&doc), "--dictionary", p(&dict)]));
    assert_eq!(out[0]["corrected"], "dries");
    assert!((out[0]["score"].as_f64().unwrap() - 0.64).abs() < 1e-12);
}

#[test]
fn segments_a_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("two.pgm");
    let (w, h) = (220u32, 20u32);
    let mut px = vec![255u8; (w * h) as usize];
    for y in 0..10 {
        for x in (0..10).chain(110..120) {
            px[(y * w + x) as usize] = 0;
        }
    }
    let mut data = format!("P5\n{w} {h}\n255\n").into_bytes();
    data.extend(px);
    std::fs::write(&img, data).unwrap();
    let seg = ok_json(&tdassist(&["segment", p(&img), "--min-pts", "75"]));
    let clusters = seg["clusters"].as_array().unwrap();
    assert_eq!(clusters.len(), 2);
    assert_eq!(clusters[0]["bbox"], serde_json::json!([0, 0, 10, 10]));
    assert_eq!(clusters[1]["pixels"], 100);
}
