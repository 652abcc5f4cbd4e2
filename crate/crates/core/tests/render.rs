mod common;

use blockbench_core::catalog::{Corner, ShapeKind};
use blockbench_core::render::PALETTE;
use blockbench_core::{layout, render_model, render_svg, resolve_styles, validate, Model, Scene};
use common::*;
use proptest::prelude::*;

/// Attribute maps of every `<tag ...>` element in `svg`.
fn elements(svg: &str, tag: &str) -> Vec<Vec<(String, String)>> {
    let open = format!("<{tag} ");
    svg.match_indices(&open)
        .map(|(at, _)| {
            let rest = &svg[at + open.len()..];
            let end = rest.find('>').unwrap();
            let mut attrs = Vec::new();
            let mut s = &rest[..end];
            while let Some(eq) = s.find("=\"") {
                let name = s[..eq].trim().to_string();
                let after = &s[eq + 2..];
                let close = after.find('"').unwrap();
                attrs.push((name, after[..close].to_string()));
                s = &after[close + 1..];
            }
            attrs
        })
        .collect()
}

fn attr<'a>(el: &'a [(String, String)], name: &str) -> &'a str {
    el.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str()).unwrap_or("")
}

/// Text content of `<g>` groups with the given data-name.
fn group<'a>(svg: &'a str, class: &str, name: &str) -> &'a str {
    let open = format!("<g class=\"{class}\" data-kind=");
    for (at, _) in svg.match_indices(&open) {
        let rest = &svg[at..];
        let end = rest.find("</g>").unwrap();
        if rest[..end].contains(&format!("data-name=\"{name}\"")) {
            return &rest[..end];
        }
    }
    panic!("no {class} group named {name}");
}

fn circles_by_label(svg: &str) -> Vec<(String, String, f64)> {
    let mut out = Vec::new();
    for name in ["Go", "Slow", "Stop"] {
        let g = group(svg, "node", name);
        for c in elements(g, "circle") {
            out.push((name.to_string(), attr(&c, "fill").to_string(), attr(&c, "cy").parse().unwrap()));
        }
    }
    out
}

#[test]
fn traffic_signal_is_three_lights_top_to_bottom() {
    let svg = render_model(&fixture_model("expo"), &block("TrafficSignal")).unwrap();
    assert_eq!(elements(&svg, "circle").len(), 3);
    let circles = circles_by_label(&svg);
    let fill = |n: &str| circles.iter().find(|c| c.0 == n).unwrap().1.clone();
    let y = |n: &str| circles.iter().find(|c| c.0 == n).unwrap().2;
    assert_eq!((fill("Stop").as_str(), fill("Slow").as_str(), fill("Go").as_str()), ("red", "yellow", "green"));
    assert!(y("Stop") < y("Slow") && y("Slow") < y("Go"));
    assert!(!svg.contains("stroke=\"red\""), "no red edges on a complete model");
    assert!(!svg.contains(">!<"));
    // initial badge and icons
    assert!(group(&svg, "node", "Go").contains(">i</text>"));
    assert!(group(&svg, "node", "Go").contains(">\u{2713}</text>"));
    assert!(group(&svg, "node", "Stop").contains(">\u{2717}</text>"));
}

#[test]
fn missing_trigger_turns_the_edge_red_with_a_marker() {
    let svg = render_model(&fixture_model("expo_draft"), &block("TrafficSignal")).unwrap();
    let edge = group(&svg, "edge", "3");
    assert!(edge.contains("stroke=\"red\""));
    assert!(edge.contains("url(#arrow-red)"));
    assert!(edge.contains(">!</text>"));
    let ok_edge = group(&svg, "edge", "1");
    assert!(ok_edge.contains("stroke=\"black\"") && !ok_edge.contains(">!<"));
}

#[test]
fn isolated_state_gets_a_marker() {
    let mut text = fixture_text("models/expo.dslm");
    text = text.replace("  [State: Stop] { type = Intermediate }\n", "  [State: Stop] { type = Intermediate }\n  [State: Lonely] { type = Intermediate }\n");
    let svg = render_model(&model(&text), &block("TrafficSignal")).unwrap();
    let lonely = group(&svg, "node", "Lonely");
    assert!(lonely.contains(">!</text>"));
    assert!(lonely.contains("fill=\"red\" text-anchor"), "marker is red");
    assert!(!group(&svg, "node", "Go").contains(">!<"));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let b = block("TrafficSignal");
    for id in ["expo", "expo_draft"] {
        let m = fixture_model(id);
        assert_eq!(render_model(&m, &b).unwrap(), render_model(&m, &b).unwrap());
    }
}

/// Positions derived by hand from the layout rules for a 3-cycle A->B->C->A
/// under the parent block: node step 140, bow max(20, dist/4) to the left
/// of the direction of travel, ends trimmed at radius 40, padding 40 and
/// the drawing centered in its viewport.
#[test]
fn three_cycle_scene_matches_hand_layout() {
    let m = model(
        "model c : StateMachine\n\nnodes\n  [State: A] { type = Initial }\n  [State: B] { type = Intermediate }\n  [State: C] { type = Intermediate }\n\nedges\n  [Transition: ab] A -> B\n  [Transition: bc] B -> C\n  [Transition: ca] C -> A\n",
    );
    let b = block("StateMachine");
    let scene = layout(&m, &b).unwrap();
    let k = 40.0 / (70.0f64 * 70.0 + 35.0 * 35.0).sqrt();
    let (tx, ty) = (70.0 * k, 35.0 * k); // 35.78, 17.89

    assert_eq!((scene.width, scene.height), (440.0, 190.0));
    let pos: Vec<(&str, f64, f64)> = scene.nodes.iter().map(|n| (n.name.as_str(), n.x, n.y)).collect();
    assert_eq!(pos, [("A", 80.0, 80.0), ("B", 220.0, 80.0), ("C", 360.0, 80.0)]);

    let close = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9;
    let edge = |n: &str| scene.edges.iter().find(|e| e.name == n).unwrap();
    let ab = edge("ab").path;
    assert!(close(ab[0], (80.0 + tx, 80.0 - ty)), "{ab:?}");
    assert!(close(ab[1], (150.0, 45.0)), "{ab:?}");
    assert!(close(ab[2], (220.0 - tx, 80.0 - ty)), "{ab:?}");
    let ca = edge("ca").path;
    assert!(close(ca[1], (220.0, 150.0)), "{ca:?}");
    assert!(close(ca[0], (360.0 - tx, 80.0 + ty)), "{ca:?}");
    assert!(close(ca[2], (80.0 + tx, 80.0 + ty)), "{ca:?}");

    assert_eq!(layout(&m, &b).unwrap(), scene);

    let styled = scene.styled(&resolve_styles(&m, &b, &validate(&m, &b)));
    let fills: Vec<&str> = styled.nodes.iter().map(|n| n.fill.as_str()).collect();
    assert_eq!(fills, [PALETTE[0], PALETTE[1], PALETTE[2]]);
    assert!(styled.nodes.iter().all(|n| n.shape == ShapeKind::Circle));
    assert_eq!(styled.nodes[0].badges.len(), 1);
    assert_eq!((styled.nodes[0].badges[0].glyph.as_str(), styled.nodes[0].badges[0].corner), ("i", Corner::TopLeft));
}

#[test]
fn empty_scene_uses_the_minimum_viewport() {
    let scene = layout(&Model::empty("e", "StateMachine"), &block("StateMachine")).unwrap();
    assert_eq!((scene.width, scene.height), (100.0, 100.0));
    let svg = render_svg(&scene);
    assert!(svg.contains("viewBox=\"0 0 100 100\""));
    assert!(svg.contains("<g id=\"diagram\">\n  </g>"));
}

#[test]
fn fixed_fills_beat_the_palette_and_shapes_follow_nuances() {
    let b = block("TrafficSignal");
    let mut text = fixture_text("models/expo.dslm");
    text = text.replace("  [State: Stop] { type = Intermediate }\n", "  [State: Stop] { type = Intermediate }\n  [State: Amber] { type = Intermediate }\n");
    let m = model(&text);
    let styles = resolve_styles(&m, &b, &validate(&m, &b));
    let fill = |n: &str| styles.node("State", n).unwrap().fill.clone().unwrap();
    assert_eq!((fill("Go").value.as_str(), fill("Go").nuance.as_str()), ("green", "N8"));
    assert_eq!(fill("Stop").nuance, "N10");
    // the palette is handed out only to states without a fixed colour
    assert_eq!((fill("Amber").value.as_str(), fill("Amber").nuance.as_str()), (PALETTE[0], "N4"));
    let shape = styles.node("State", "Go").unwrap().shape.clone().unwrap();
    assert_eq!((shape.value, shape.nuance.as_str()), (ShapeKind::Circle, "N2"));
}

#[test]
fn final_states_get_the_f_badge() {
    let svg = render_model(&fixture_model("oven"), &block("StateMachine")).unwrap();
    assert!(group(&svg, "node", "Done").contains(">f</text>"));
    assert!(group(&svg, "node", "Off").contains(">i</text>"));
    assert!(!group(&svg, "node", "Heating").contains("class=\"badge\""));
}

#[test]
fn unbound_models_do_not_render() {
    let m = model("model u : StateMachine\n\nnodes\n  [Lamp: L]\n");
    assert!(render_model(&m, &block("StateMachine")).is_err());
}

fn random_graph() -> impl Strategy<Value = Model> {
    (1usize..9, prop::collection::vec((0usize..9, 0usize..9), 0..14)).prop_map(|(n, edges)| {
        let mut text = String::from("model g : StateMachine\n\nnodes\n");
        for i in 0..n {
            let ty = if i == 0 { "Initial" } else { "Intermediate" };
            text.push_str(&format!("  [State: s{i}] {{ type = {ty} }}\n"));
        }
        if !edges.is_empty() {
            text.push_str("\nedges\n");
        }
        for (k, (s, t)) in edges.iter().enumerate() {
            text.push_str(&format!("  [Transition: e{k}] s{} -> s{}\n", s % n, t % n));
        }
        model(&text)
    })
}

fn in_viewport(scene: &Scene) -> bool {
    let inside = |(x, y): (f64, f64)| x >= 0.0 && y >= 0.0 && x <= scene.width && y <= scene.height;
    scene.nodes.iter().all(|n| inside((n.x - n.half_width, n.y - n.half_height)) && inside((n.x + n.half_width, n.y + n.half_height)))
        && scene.edges.iter().all(|e| e.path.iter().all(|p| inside(*p)))
}

proptest! {
    #[test]
    fn layout_is_deterministic_distinct_and_inside_the_viewport(m in random_graph()) {
        let b = block("StateMachine");
        let scene = layout(&m, &b).unwrap();
        prop_assert!(in_viewport(&scene));
        for (i, a) in scene.nodes.iter().enumerate() {
            for c in &scene.nodes[i + 1..] {
                prop_assert!(a.x != c.x || a.y != c.y, "{} and {} coincide", a.name, c.name);
            }
        }
        prop_assert_eq!(render_model(&m, &b).unwrap(), render_model(&m, &b).unwrap());
        let svg = render_model(&m, &b).unwrap();
        prop_assert_eq!(elements(&svg, "circle").len(), m.nodes().count());
    }
}
