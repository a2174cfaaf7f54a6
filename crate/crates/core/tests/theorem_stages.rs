use std::fs;
use std::path::PathBuf;

use wforge_core::lemma::RunStatus;
use wforge_core::theorem::{
    properness_table, radius, run_theorem, step_data, TheoremConfig, CONFORMING_FLAG, NONCONFORMING_FLAG,
};

fn config(name: &str) -> TheoremConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    TheoremConfig::from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn radii_are_exact() {
    assert_eq!(radius(302.0, 2), 303.0);
    assert_eq!(radius(302.0, 3), 303.0 + 2.0 / 3.0);
}

#[test]
fn properness_floor_at_two() {
    let t = properness_table(302.0, 3);
    assert_eq!(t[0].k, 2);
    assert!((t[0].floor - 148.75).abs() <= 1e-12);
}

#[test]
fn step_cross_checks_vanish() {
    for n in 2..=6 {
        let st = step_data(302.0, n);
        assert!(st.level_defect.abs() <= 1e-12, "{st:?}");
        assert!(st.floor_defect.abs() <= 1e-12, "{st:?}");
    }
}

#[test]
fn desk_stage_one_verifies() {
    let mut cfg = config("theorem_desk.json");
    cfg.stages = 1;
    let run = run_theorem(&cfg);
    assert_eq!(run.flag, NONCONFORMING_FLAG);
    assert_eq!(run.status, RunStatus::Verified);
    assert_eq!(run.stages.len(), 1);
    assert!(!run.stages[0].ledger.any_violated());
}

#[test]
fn conforming_stage_two_stops_on_lemma() {
    let mut cfg = config("theorem_conforming.json");
    cfg.stages = 2;
    let run = run_theorem(&cfg);
    assert_eq!(run.flag, CONFORMING_FLAG);
    assert_eq!(run.stages.len(), 1);
    assert_eq!(run.status, RunStatus::ConstructionFailed);
    assert_eq!(run.error.as_ref().unwrap().kind, "lemma_failed");
}
