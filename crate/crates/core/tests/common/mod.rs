#![allow(dead_code)]

use std::path::PathBuf;

use blockbench_core::{load_workspace, parse_model, EffectiveBlock, Model, Workspace};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/workspace")
}

pub fn workspace() -> Workspace {
    let ws = load_workspace(&fixtures(), false).expect("fixture workspace loads");
    assert!(ws.load_issues.is_empty(), "fixture issues: {:?}", ws.load_issues);
    ws
}

pub fn block(name: &str) -> EffectiveBlock {
    workspace().resolve(name).expect("fixture block resolves")
}

pub fn fixture_text(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).expect("fixture readable")
}

pub fn fixture_model(id: &str) -> Model {
    parse_model(&fixture_text(&format!("models/{id}.dslm"))).expect("fixture model parses")
}

pub fn model(text: &str) -> Model {
    match parse_model(text) {
        Ok(m) => m,
        Err(errs) => panic!("test model does not parse: {errs:?}"),
    }
}
