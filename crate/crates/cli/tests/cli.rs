use std::process::{Command, Output};

fn steercert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steercert")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .to_string()
}

fn num(text: &str, key: &str) -> f64 {
    field(text, key).parse().unwrap()
}

#[test]
fn bounds_tilted_and_three_setting() {
    let o = steercert(&["bounds", "--family", "tilted-analog", "--alpha", "0.5"]);
    assert!(o.status.success());
    let t = stdout(&o);
    assert!((num(&t, "lhs_bound") - 2.5).abs() < 1e-12);
    assert!((num(&t, "quantum_bound") - 8.5f64.sqrt()).abs() < 1e-12);

    let t = stdout(&steercert(&["bounds", "--family", "three-trusted", "--alpha", "0", "--beta", "1"]));
    assert!((num(&t, "lhs_bound") - 3f64.sqrt()).abs() < 1e-12);
    assert!((num(&t, "quantum_bound") - 3.0).abs() < 1e-12);
}

#[test]
fn bounds_outside_region_exits_2() {
    let o = steercert(&["bounds", "--family", "two-untrusted", "--alpha", "1", "--beta", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sqrt(1+alpha^2)"));
}

#[test]
fn unknown_family_exits_2() {
    let o = steercert(&["bounds", "--family", "four-trusted"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn plan_examples() {
    let t = stdout(&steercert(&[
        "plan", "--family", "three-trusted", "--alpha", "0", "--beta", "1", "--eps", "0.01", "--delta", "0.01",
    ]));
    assert_eq!(field(&t, "n_required"), "1305");
    assert_eq!(field(&t, "regime"), "COINCIDING");

    let t = stdout(&steercert(&[
        "plan", "--family", "three-trusted", "--alpha", "0", "--beta", "1", "--eps", "0.5", "--delta", "0.5",
    ]));
    assert_eq!(field(&t, "regime"), "COINCIDING");
    assert!(field(&t, "n_required").parse::<u64>().unwrap() < 10);

    let t = stdout(&steercert(&["plan", "--family", "tilted-analog", "--alpha", "0", "--eps", "0.01", "--delta", "0.01"]));
    assert_eq!(field(&t, "regime"), "QUADRATIC");
    assert!(field(&t, "note").contains("order-of-magnitude"));
    let n: f64 = field(&t, "n_required").parse().unwrap();
    assert!((n / 5.4e5 - 1.0).abs() < 0.01, "{n}");
}

#[test]
fn plan_infeasible_exits_2() {
    let o = steercert(&[
        "plan", "--family", "three-trusted", "--alpha", "0", "--beta", "1", "--eps", "0.99", "--delta", "0.1", "--slope", "0.1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = steercert(&["plan", "--family", "three-trusted", "--eps", "1.5", "--delta", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fig2_row_at_classical_bound() {
    let t = stdout(&steercert(&["curve", "--figure", "fig2", "--alpha", "1", "--grid-points", "11"]));
    let mut lines = t.lines();
    assert_eq!(lines.next(), Some("observed,F_DD,F_1SDI,F_DI"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 3.0);
    assert!((first[2] - 0.81623).abs() < 5e-6, "{first:?}");
    assert_eq!(t.lines().count(), 12);
}

#[test]
fn fig3_three_setting_crosses_half_first() {
    let t = stdout(&steercert(&["curve", "--figure", "fig3", "--grid-points", "5001"]));
    let mut lines = t.lines();
    assert_eq!(lines.next(), Some("p,F_2setting,F_3setting"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    let cross = |col: usize| rows.iter().find(|r| r[col] >= 0.5).unwrap()[0];
    assert!((cross(2) - 0.82381).abs() < 2e-4);
    assert!((cross(1) - 0.85355).abs() < 2e-4);
}

#[test]
fn fig5_endpoint_reaches_one() {
    let dir = std::env::temp_dir().join(format!("steercert-fig5-{}", std::process::id()));
    let o = steercert(&["curve", "--figure", "fig5", "--grid-points", "4", "--output", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = std::fs::read_to_string(&dir).unwrap();
    std::fs::remove_file(&dir).ok();
    let mut lines = t.lines();
    assert_eq!(lines.next(), Some("observed,f_min,status,dual_gap"));
    let last: Vec<&str> = t.lines().last().unwrap().split(',').collect();
    assert!((last[0].parse::<f64>().unwrap() - 5f64.sqrt() - 2.0).abs() < 1e-12);
    assert!((last[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-4);
    assert_eq!(last[2], "optimal");
}

#[test]
fn verify_is_deterministic_and_passes() {
    let a = steercert(&["verify", "--seed", "7"]);
    let b = steercert(&["verify", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let t = stdout(&a);
    assert_eq!(t.lines().filter(|l| l.starts_with("PASS") && l.contains(" sos ")).count(), 13);
    assert!(t.contains("reference-form discrepancies"));
}

#[test]
fn verify_fault_names_main_sos1() {
    let o = steercert(&["verify", "--seed", "7", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("MAIN_SOS1"), "{err}");
    assert!(!err.contains("MAIN_SOS2"));
}

#[test]
fn flags_override_config_file() {
    let path = std::env::temp_dir().join(format!("steercert-cfg-{}.conf", std::process::id()));
    std::fs::write(&path, "family = tilted-analog\nalpha = 1 # comment\n").unwrap();
    let p = path.to_str().unwrap();
    let from_file = stdout(&steercert(&["--config", p, "bounds"]));
    let from_flag = stdout(&steercert(&["--config", p, "bounds", "--alpha", "0.5"]));
    std::fs::write(&path, "colour = red\n").unwrap();
    let bad = steercert(&["--config", p, "bounds"]);
    std::fs::remove_file(&path).ok();
    assert!((num(&from_file, "lhs_bound") - 3.0).abs() < 1e-12);
    assert!((num(&from_flag, "lhs_bound") - 2.5).abs() < 1e-12);
    assert_eq!(bad.status.code(), Some(2));
}
