//! One line per acceptance criterion: PASS or FAIL, runtime against its
//! limit, and a reason on failure. Exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request};
use blockbench_core::catalog::Selector;
use blockbench_core::meta::{Literal, Severity};
use blockbench_core::syntax::{parse_block_bytes, parse_model_bytes};
use blockbench_core::{
    advance, apply, parse_block, parse_model, reachable_set, serialize_block, serialize_model, start_session,
    validate, Advance, ChangeOp, ChangeSet, EffectiveBlock, Model, ModelElement, Workspace,
};
use blockbench_service::{router, AppState};
use http_body_util::BodyExt;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tower::ServiceExt;

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/workspace")
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).unwrap()
}

fn workspace() -> Result<Workspace, String> {
    let ws = blockbench_core::load_workspace(&fixtures(), false).map_err(|e| e.to_string())?;
    ensure(ws.load_issues.is_empty(), format!("load issues: {:?}", ws.load_issues))?;
    Ok(ws)
}

fn block(name: &str) -> Result<EffectiveBlock, String> {
    workspace()?.resolve(name).map_err(|e| e.to_string())
}

fn blockbench(ws: &Path, args: &[&str]) -> Result<(i32, String), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_blockbench"))
        .arg("--workspace")
        .arg(ws)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stdout).into_owned()))
}

fn ids<T>(items: &[T], id: impl Fn(&T) -> &str) -> Vec<String> {
    items.iter().map(|i| id(i).to_string()).collect()
}

fn seq(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

const TABLE_ONE: [&str; 10] = [
    "A finite state machine with a fixed number of [State]s and [Transition]s.",
    "Representation of information of a system at a given point.",
    "Name of the [State].",
    "Type of a [State]: Initial, Intermediate, Final.",
    "A path between two [State]s based on an action.",
    "A [Transition] starts at this [State].",
    "The [State] where the [Transition] ends.",
    "The [Trigger] that switches the [Transition] from a source to a target [State].",
    "A logical condition for a [Transition] running for a definite period of time.",
    "A string holding the condition requirement.",
];

fn fixture_state_machine() -> Check {
    let own = parse_block(&read("state_machine.dslbb")).map_err(|e| format!("{e:?}"))?;
    ensure(ids(&own.elements, |e| &e.name) == ["StateMachine", "State", "Transition", "Trigger"], "element kinds")?;
    ensure(ids(&own.constraints, |c| &c.id) == seq("C", 4), "constraints C1-C4")?;
    ensure(ids(&own.nuances, |n| &n.id) == seq("N", 7), "nuances N1-N7")?;
    ensure(own.docs.len() == 10, "ten doc entries")?;
    let (code, md) = blockbench(&fixtures(), &["docs", "StateMachine"])?;
    ensure(code == 0, format!("docs exit {code}"))?;
    for d in TABLE_ONE {
        ensure(md.contains(&format!("| {d} |")), format!("missing doc text: {d}"))?;
    }
    Ok(())
}

/// The three Table II transitions, with waits chosen by the test.
fn table_two_model(extra_nodes: &str, extra_edges: &str) -> String {
    format!(
        "model signal : TrafficSignal\n\nnodes\n  [State: Go] {{ type = Initial }}\n  [State: Slow] {{ type = Intermediate }}\n  [State: Stop] {{ type = Intermediate }}\n{extra_nodes}\ndata\n  [Trigger: T1] {{ condition = \"Wait 30 seconds\" }}\n  [Trigger: T2] {{ condition = \"Wait 5 seconds\" }}\n  [Trigger: T3] {{ condition = \"Wait 35 seconds\" }}\n\nedges\n  [Transition: 1] Go -> Slow {{ action = T1 }}\n  [Transition: 2] Slow -> Stop {{ action = T2 }}\n  [Transition: 3] Stop -> Go {{ action = T3 }}\n{extra_edges}"
    )
}

fn fixture_traffic_signal() -> Check {
    let ts = block("TrafficSignal")?;
    let sm = block("StateMachine")?;
    ensure(ids(&ts.constraints, |c| &c.id) == seq("C", 5), "constraints C1-C5")?;
    ensure(ids(&ts.nuances, |n| &n.id) == seq("N", 10), "nuances N1-N10")?;
    ensure(ts.nuance("N2") != sm.nuance("N2"), "N2 not overridden")?;
    let m = parse_model(&table_two_model("", "")).map_err(|e| format!("{e:?}"))?;
    let diags = validate(&m, &ts);
    ensure(diags.is_empty(), format!("expected no diagnostics, got {diags:?}"))?;
    let m = parse_model(&table_two_model(
        "  [State: End] { type = Final }\n",
        "  [Transition: 4] Stop -> End { action = T3 }\n",
    ))
    .map_err(|e| format!("{e:?}"))?;
    let diags = validate(&m, &ts);
    ensure(
        diags.len() == 1 && diags[0].code == "C5" && diags[0].severity == Severity::Error,
        format!("expected exactly one C5 error, got {diags:?}"),
    )
}

fn oracle(edges: &[(usize, usize)], root: usize) -> BTreeSet<usize> {
    fn walk(at: usize, path: &mut Vec<usize>, edges: &[(usize, usize)], out: &mut BTreeSet<usize>) {
        out.insert(at);
        for &(s, t) in edges {
            if s == at && !path.contains(&t) {
                path.push(t);
                walk(t, path, edges, out);
                path.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(root, &mut vec![root], edges, &mut out);
    out
}

fn reachability_oracle() -> Check {
    let initial = Selector::with("State", "type", "Initial");
    let mut graphs = 0u32;
    for n in 1..=4usize {
        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|s| (0..n).map(move |t| (s, t))).filter(|(s, t)| s != t).collect();
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<(usize, usize)> =
                pairs.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, p)| *p).collect();
            let mut m = Model::empty("g", "StateMachine");
            for i in 0..n {
                let ty = if i == 0 { "Initial" } else { "Intermediate" };
                m.insert(ModelElement::node("State", &format!("s{i}")).with_attr("type", Literal::Symbol(ty.into())));
            }
            for (k, (s, t)) in edges.iter().enumerate() {
                m.insert(ModelElement::edge("Transition", &format!("e{k}"), &format!("s{s}"), &format!("s{t}")));
            }
            let got = reachable_set(&m, &initial, Some("Transition"));
            let want: BTreeSet<String> = oracle(&edges, 0).into_iter().map(|i| format!("s{i}")).collect();
            ensure(got == want, format!("n={n} edges={edges:?}: {got:?} != {want:?}"))?;
            graphs += 1;
        }
    }
    ensure(graphs == 4165, format!("{graphs} graphs checked"))
}

fn node_group<'a>(svg: &'a str, class: &str, name: &str) -> Option<&'a str> {
    svg.match_indices(&format!("<g class=\"{class}\""))
        .map(|(at, _)| &svg[at..at + svg[at..].find("</g>").unwrap_or(0)])
        .find(|g| g.contains(&format!("data-name=\"{name}\"")))
}

fn attr_value(tag: &str, name: &str) -> Option<String> {
    let key = format!(" {name}=\"");
    let at = tag.find(&key)? + key.len();
    Some(tag[at..at + tag[at..].find('"')?].to_string())
}

fn rendering() -> Check {
    let ts = block("TrafficSignal")?;
    let m = parse_model(&read("models/expo.dslm")).map_err(|e| format!("{e:?}"))?;
    let svg = blockbench_core::render_model(&m, &ts).map_err(|e| e.to_string())?;
    ensure(svg.matches("<circle ").count() == 3, "expected exactly three circles")?;
    let mut ys = Vec::new();
    for (name, fill) in [("Stop", "red"), ("Slow", "yellow"), ("Go", "green")] {
        let g = node_group(&svg, "node", name).ok_or(format!("no node {name}"))?;
        let circle = &g[g.find("<circle ").ok_or(format!("{name} is not a circle"))?..];
        ensure(attr_value(circle, "fill").as_deref() == Some(fill), format!("{name} should be {fill}"))?;
        ys.push(attr_value(circle, "cy").and_then(|v| v.parse::<f64>().ok()).ok_or("bad cy")?);
    }
    ensure(ys[0] < ys[1] && ys[1] < ys[2], format!("y-centers Stop, Slow, Go not increasing: {ys:?}"))?;
    ensure(svg == blockbench_core::render_model(&m, &ts).map_err(|e| e.to_string())?, "not byte-identical")?;

    let ops = ChangeSet::new(m.version).op(ChangeOp::SetAttr {
        kind: "Transition".into(),
        name: "2".into(),
        attr: "action".into(),
        value: None,
    });
    let no_trigger = apply(&m, &ts, &ops).map_err(|e| e.to_string())?;
    let svg = blockbench_core::render_model(&no_trigger, &ts).map_err(|e| e.to_string())?;
    let edge = node_group(&svg, "edge", "2").ok_or("no edge 2")?;
    ensure(edge.contains("stroke=\"red\"") && edge.contains(">!</text>"), "missing red edge with ! badge")?;

    let mut isolated = m.clone();
    isolated.insert(ModelElement::node("State", "Spare").with_attr("type", Literal::Symbol("Intermediate".into())));
    let svg = blockbench_core::render_model(&isolated, &ts).map_err(|e| e.to_string())?;
    let node = node_group(&svg, "node", "Spare").ok_or("no node Spare")?;
    ensure(node.contains(">!</text>"), "isolated state has no ! badge")
}

fn instantiation() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for f in ["state_machine.dslbb", "traffic_signal.dslbb"] {
        std::fs::copy(fixtures().join(f), dir.path().join(f)).map_err(|e| e.to_string())?;
    }
    for (blk, expected) in [("StateMachine", None), ("TrafficSignal", Some("Go"))] {
        let (code, _) = blockbench(dir.path(), &["new", blk, "m", "--force"])?;
        ensure(code == 0, format!("new {blk} exit {code}"))?;
        let text = std::fs::read_to_string(dir.path().join("models/m.dslm")).map_err(|e| e.to_string())?;
        let m = parse_model(&text).map_err(|e| format!("{e:?}"))?;
        ensure(m.elements.len() == 1, format!("{blk}: {} elements", m.elements.len()))?;
        let e = &m.elements[0];
        ensure(e.kind == "State" && e.attr_text("type").as_deref() == Some("Initial"), format!("{blk}: {e:?}"))?;
        if let Some(name) = expected {
            ensure(e.name == name, format!("{blk}: initial state is {}", e.name))?;
        }
    }
    Ok(())
}

fn mutate(rng: &mut StdRng, base: &[u8]) -> Vec<u8> {
    let mut bytes = base.to_vec();
    for _ in 0..rng.gen_range(1..=8) {
        let pos = if bytes.is_empty() { 0 } else { rng.gen_range(0..bytes.len()) };
        match rng.gen_range(0..3) {
            0 if !bytes.is_empty() => bytes[pos] = rng.gen(),
            1 => bytes.insert(pos, rng.gen()),
            _ if !bytes.is_empty() => {
                let end = (pos + rng.gen_range(1..16)).min(bytes.len());
                bytes.drain(pos..end);
            }
            _ => bytes.push(rng.gen()),
        }
    }
    bytes
}

fn round_trips() -> Check {
    for f in ["state_machine.dslbb", "traffic_signal.dslbb"] {
        let b = parse_block(&read(f)).map_err(|e| format!("{f}: {e:?}"))?;
        ensure(parse_block(&serialize_block(&b)).ok() == Some(b), format!("{f} does not round-trip"))?;
    }
    for f in ["expo", "oven", "expo_draft"] {
        let m = parse_model(&read(&format!("models/{f}.dslm"))).map_err(|e| format!("{f}: {e:?}"))?;
        ensure(parse_model(&serialize_model(&m)).ok() == Some(m), format!("{f} does not round-trip"))?;
    }
    let seeds = [read("state_machine.dslbb"), read("traffic_signal.dslbb"), read("models/expo.dslm")];
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for i in 0..10_000 {
        let input = mutate(&mut rng, seeds[i % seeds.len()].as_bytes());
        let outcome = std::panic::catch_unwind(|| {
            let _ = parse_block_bytes(&input);
            let _ = parse_model_bytes(&input);
        });
        ensure(outcome.is_ok(), format!("parser panicked on input {i}"))?;
    }
    Ok(())
}

fn extension_isolation() -> Check {
    let ws = workspace()?;
    let own = parse_block(&read("state_machine.dslbb")).map_err(|e| format!("{e:?}"))?;
    ws.resolve("TrafficSignal").map_err(|e| e.to_string())?;
    let again = ws.resolve("StateMachine").map_err(|e| e.to_string())?;
    ensure(again == EffectiveBlock::standalone(&own), "StateMachine changed after resolving TrafficSignal")?;
    ensure(ws.blocks["StateMachine"] == own, "stored parent block changed")
}

fn method_sessions() -> Check {
    let sm = block("StateMachine")?;
    let mut m = blockbench_core::instantiate(&sm, "walk").map_err(|e| e.to_string())?;
    let mut session = start_session(&m, &sm).map_err(|e| e.to_string())?;
    let add = |op: ChangeOp, m: &Model| apply(m, &sm, &ChangeSet::new(m.version).op(op)).map_err(|e| e.to_string());
    let edits: Vec<ChangeOp> = vec![
        ChangeOp::AddElement { kind: "State".into(), name: "Run".into(), attrs: Default::default() },
        ChangeOp::AddEdge {
            kind: "Transition".into(),
            name: "t".into(),
            source: "Start".into(),
            target: "Run".into(),
            attrs: Default::default(),
        },
        ChangeOp::AddElement { kind: "Trigger".into(), name: "T".into(), attrs: Default::default() },
        ChangeOp::SetAttr {
            kind: "Transition".into(),
            name: "t".into(),
            attr: "action".into(),
            value: Some(Literal::Symbol("T".into())),
        },
        ChangeOp::SetAttr {
            kind: "Trigger".into(),
            name: "T".into(),
            attr: "condition".into(),
            value: Some(Literal::Text("Wait 10 seconds".into())),
        },
    ];
    let mut pending = edits.into_iter();
    let mut attempts = 0;
    while !session.is_finished() {
        attempts += 1;
        ensure(attempts < 20, "session did not finish")?;
        let done_before = session.done_count();
        let current = session.current().map(|s| s.step_id.clone()).ok_or("no current step")?;
        let step = sm.step(&current).ok_or("unknown step")?;
        let holds = blockbench_core::method::check_step(step, &m, &sm, false).is_none();
        match advance(&session, &m, &sm, false).map_err(|e| e.to_string())? {
            Advance::Advanced { session: next } => {
                ensure(holds, format!("{current} advanced while its predicate failed"))?;
                ensure(next.done_count() == done_before + 1, "advance skipped or repeated a step")?;
                session = next;
            }
            Advance::Unmet { report } => {
                ensure(!holds, format!("{current} refused while its predicate held"))?;
                if step.completion.kind == blockbench_core::meta::PredicateKind::ModelValid {
                    let errors: Vec<_> =
                        validate(&m, &sm).into_iter().filter(|d| d.severity >= Severity::Error).collect();
                    ensure(report.diagnostics == errors, "model-valid step disagrees with validate")?;
                }
                let op = pending.next().ok_or(format!("stuck at {current}"))?;
                m = add(op, &m)?;
            }
        }
    }
    ensure(validate(&m, &sm).iter().all(|d| d.severity < Severity::Error), "finished with errors")?;
    ensure(pending.next().is_none(), "not every scripted edit was needed")
}

fn cli_service_parity() -> Check {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let state = Arc::new(AppState::load(&fixtures()).map_err(|e| e.to_string())?);
    let app = router(state);
    for id in ["expo", "expo_draft", "oven"] {
        let path = fixtures().join(format!("models/{id}.dslm"));
        let path = path.to_str().unwrap();
        let (_, cli_lines) = blockbench(&fixtures(), &["check", path])?;
        let (_, cli_svg) = blockbench(&fixtures(), &["render", path])?;
        let fetch = |method: Method, uri: String| {
            let app = app.clone();
            runtime.block_on(async move {
                let req = Request::builder().method(method).uri(uri).body(Body::empty()).unwrap();
                let resp = app.oneshot(req).await.unwrap();
                resp.into_body().collect().await.unwrap().to_bytes().to_vec()
            })
        };
        let http_lines = fetch(Method::POST, format!("/models/{id}/validate?format=text"));
        let http_svg = fetch(Method::GET, format!("/models/{id}/render.svg"));
        ensure(http_lines == cli_lines.as_bytes(), format!("{id}: validate output differs"))?;
        ensure(http_svg == cli_svg.as_bytes(), format!("{id}: render output differs"))?;
    }
    Ok(())
}

fn main() {
    let criteria: [(&str, Option<Duration>, fn() -> Check); 9] = [
        ("fixture fidelity: state machine", Some(Duration::from_secs(1)), fixture_state_machine),
        ("fixture fidelity: traffic signal", Some(Duration::from_secs(1)), fixture_traffic_signal),
        ("reachability oracle", Some(Duration::from_secs(10)), reachability_oracle),
        ("rendering", Some(Duration::from_secs(1)), rendering),
        ("instantiation", Some(Duration::from_secs(1)), instantiation),
        ("round-trips and fuzz", Some(Duration::from_secs(30)), round_trips),
        ("extension isolation", None, extension_isolation),
        ("method sessions", None, method_sessions),
        ("CLI/service parity", None, cli_service_parity),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let over = limit.is_some_and(|l| elapsed > l);
        let budget = limit.map_or("no limit".to_string(), |l| format!("limit {:.0?}", l));
        let line = format!("{name} ({:.3}s, {budget})", elapsed.as_secs_f64());
        match (&result, over) {
            (Ok(()), false) => println!("PASS {line}"),
            (Ok(()), true) => {
                failed += 1;
                println!("FAIL {line}: over the time limit");
            }
            (Err(why), _) => {
                failed += 1;
                println!("FAIL {line}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
