use steercert_demo::{bounds, sample_plan, scenario_curve};

#[test]
fn bounds_text() {
    let t = bounds("tilted-analog", 0.5, 7.0).unwrap();
    assert!(t.contains("lhs_bound: 2.5"));
    assert!(bounds("two-untrusted", 1.0, 1.0).is_err());
    assert!(bounds("no-such-family", 0.0, 1.0).is_err());
}

#[test]
fn curve_rows_are_ordered() {
    let csv = scenario_curve(1.0, 21).unwrap();
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 21);
    for r in &rows {
        assert!(r[1] >= r[2] - 1e-12 && r[2] >= r[3] - 1e-12, "{r:?}");
    }
    assert!((rows[0][2] - 0.81623).abs() < 5e-6);
    assert!(scenario_curve(1.0, 1).is_err());
}

#[test]
fn plan_text() {
    let t = sample_plan("three-trusted", 0.0, 1.0, 0.01, 0.01).unwrap();
    assert!(t.contains("n_required: 1305"));
    assert!(t.contains("guessing_probability_at_quantum_bound: 1"));
    assert!(sample_plan("tilted-analog", 0.0, 1.0, 0.01, 0.01).unwrap().contains("QUADRATIC"));
    assert!(sample_plan("three-trusted", 1.0, 2.0, 0.01, 0.01).is_err());
}
