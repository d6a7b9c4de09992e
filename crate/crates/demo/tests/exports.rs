use cosmic_demo::{graph_explorer_json, stream_json, sweep_json};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

#[test]
fn graph_explorer_shape() {
    let v = parse(graph_explorer_json(1, 5, 30, 0.5, true, 0.2));
    assert_eq!(v["n"], 10);
    assert_eq!(v["visual"].as_array().unwrap().iter().filter(|b| b.as_bool().unwrap()).count(), 5);
    let inliers = v["inliers"].as_array().unwrap();
    assert_eq!(inliers.len(), 10);
    assert!(inliers.iter().any(|b| b.as_bool().unwrap()));
    let fog = v["first_order_edges"].as_array().unwrap().len();
    let sog = v["second_order_edges"].as_array().unwrap().len();
    assert!(sog <= fog);
}

#[test]
fn raising_threshold_removes_edges() {
    let edges = |t: f64| parse(graph_explorer_json(2, 6, 40, t, false, 0.2))["first_order_edges"]
        .as_array()
        .unwrap()
        .len();
    assert!(edges(0.9) <= edges(0.3));
    assert!(edges(-1.0) >= edges(0.3));
}

#[test]
fn stream_curve_ends_at_final_accuracy() {
    let v = parse(stream_json(0, 120, 1.2, 0.08, 0.2, 6, 25));
    let curve = v["curve"].as_array().unwrap();
    assert_eq!(curve.len(), 5);
    let last = curve.last().unwrap();
    assert_eq!(last["samples"], 120);
    let fused = last["accuracy"][4].as_f64().unwrap();
    assert!((fused - v["accuracy"]["fused"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn sweep_grid_size() {
    let v = parse(sweep_json(0, 60, 1.0, 2.0));
    assert_eq!(v["grid"].as_array().unwrap().len(), 9);
    assert_eq!(v["best"]["beta1"], 1.0);
}

#[test]
fn bad_inputs_are_errors() {
    assert!(graph_explorer_json(0, 1, 5, 0.5, true, 0.2).is_err());
    assert!(graph_explorer_json(0, 5, 5, 1.5, true, 0.2).is_err());
    assert!(stream_json(0, 10_000, 1.0, 0.1, 0.2, 6, 10).is_err());
    assert!(sweep_json(0, 50, 0.01, 10.0).is_err());
}
