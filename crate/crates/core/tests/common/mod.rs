//! Fixtures shared by the integration tests and the acceptance binary.
#![allow(dead_code)]

use instructplan::kinematics::Point2;
use instructplan::metrics::{referentiality_category, EvaluationRecord};
use instructplan::parser::{ParseTier, SpeedCurvatureSequence};
use instructplan::prompting::ConditionKind;
use serde::Deserialize;

pub fn baseline(scene: &str, ade: f64) -> EvaluationRecord {
    let mut r = EvaluationRecord::skeleton(scene, ConditionKind::Baseline, "fixture", Some(0));
    r.ade = Some(ade);
    r
}

pub fn instructed(scene: &str, id: &str, ade: f64, words: usize, refs: (bool, bool)) -> EvaluationRecord {
    let mut r = EvaluationRecord::skeleton(scene, ConditionKind::Instructed, "fixture", Some(0));
    r.ade = Some(ade);
    r.annotation_id = Some(id.to_owned());
    r.word_count = Some(words);
    r.instruction_text = Some(vec!["go"; words].join(" "));
    r.referentiality = Some(referentiality_category(refs.0, refs.1));
    r
}

/// 39 ordinary scenes and one outlier whose aggregates average to the
/// published Table I numbers.
pub fn table1_fixture() -> Vec<EvaluationRecord> {
    let mut out = Vec::new();
    for i in 0..39 {
        let s = format!("scene-{i:03}");
        out.push(baseline(&s, 2.879));
        for (j, v) in [2.732, 2.945, 3.110].into_iter().enumerate() {
            out.push(instructed(&s, &format!("{s}-{j}"), v, 6, (true, false)));
        }
    }
    out.push(baseline("scene-999", 247945.439));
    for (j, v) in [293.412, 2851.625, 5935.51].into_iter().enumerate() {
        out.push(instructed("scene-999", &format!("outlier-{j}"), v, 6, (true, false)));
    }
    out
}

/// One scene per bucket plus an outlier that the filter drops.
pub fn table2_fixture() -> Vec<EvaluationRecord> {
    let rows = [(2, 3.001, 3.323), (6, 3.002, 3.076), (10, 2.916, 2.887), (15, 2.925, 2.902), (22, 2.795, 2.784)];
    let mut out = Vec::new();
    for (i, (words, b, t)) in rows.into_iter().enumerate() {
        let s = format!("len-{i}");
        out.push(baseline(&s, b));
        out.push(instructed(&s, &format!("{s}-a"), t, words, (false, false)));
    }
    out.push(baseline("len-outlier", 1000.0));
    out.push(instructed("len-outlier", "len-outlier-a", 900.0, 3, (false, false)));
    out
}

pub fn table3_fixture() -> Vec<EvaluationRecord> {
    let rows = [
        ((false, false), 3.014, 3.397),
        ((true, false), 3.054, 3.027),
        ((false, true), 2.830, 2.764),
        ((true, true), 2.829, 2.783),
    ];
    let mut out = Vec::new();
    for (i, (refs, b, t)) in rows.into_iter().enumerate() {
        let s = format!("ref-{i}");
        out.push(baseline(&s, b));
        out.push(instructed(&s, &format!("{s}-a"), t, 7, refs));
    }
    out.push(baseline("ref-outlier", 5000.0));
    out.push(instructed("ref-outlier", "ref-outlier-a", 4000.0, 7, (false, true)));
    out
}

pub fn golden(name: &str) -> &'static str {
    match name {
        "table1.txt" => include_str!("../golden/table1.txt"),
        "table1.csv" => include_str!("../golden/table1.csv"),
        "table2.txt" => include_str!("../golden/table2.txt"),
        "table2.csv" => include_str!("../golden/table2.csv"),
        "table3.txt" => include_str!("../golden/table3.txt"),
        "table3.csv" => include_str!("../golden/table3.csv"),
        other => panic!("no golden file {other}"),
    }
}

#[derive(Deserialize)]
pub struct Sample {
    pub name: String,
    pub horizon: usize,
    pub text: String,
    pub expect: Expect,
}

#[derive(Deserialize)]
#[serde(untagged)]
pub enum Expect {
    Parsed {
        tier: String,
        speeds: Vec<f64>,
        curvatures: Vec<f64>,
        clamped_speeds: usize,
        clamped_curvatures: usize,
    },
    Failed {
        error: String,
    },
}

pub fn corpus() -> Vec<Sample> {
    serde_json::from_str(include_str!("../fixtures/parser_corpus.json")).unwrap()
}

pub fn tier_name(t: ParseTier) -> &'static str {
    match t {
        ParseTier::Strict => "strict",
        ParseTier::Lenient => "lenient",
        ParseTier::Fallback => "fallback",
    }
}

/// Euler integration of the unicycle model with `substeps` sub-steps per
/// step. `midpoint` evaluates the heading halfway through each sub-step.
pub fn euler(seq: &SpeedCurvatureSequence, dt: f64, substeps: usize, midpoint: bool) -> Vec<Point2> {
    let h = dt / substeps as f64;
    let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
    let mut out = Vec::new();
    for (&v, &k) in seq.speeds.iter().zip(&seq.curvatures) {
        for _ in 0..substeps {
            let a = if midpoint { th + 0.5 * v * k * h } else { th };
            x += v * a.cos() * h;
            y += v * a.sin() * h;
            th += v * k * h;
        }
        out.push(Point2::new(x, y));
    }
    out
}

pub fn max_gap(a: &[Point2], b: &[Point2]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p.distance(q)).fold(0.0, f64::max)
}

pub fn brute_ade(a: &[Point2], b: &[Point2]) -> f64 {
    let mut total = 0.0;
    for i in 0..a.len() {
        let dx = a[i].x - b[i].x;
        let dy = a[i].y - b[i].y;
        total += (dx * dx + dy * dy).sqrt();
    }
    total / a.len() as f64
}
