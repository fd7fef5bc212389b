use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn infoprice(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infoprice"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

/// Data rows (header and metadata footer dropped), split into fields.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    assert!(lines.pop().unwrap().starts_with("# seed="));
    lines[1..]
        .iter()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn two_coupon_bond_at_time_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"asset": {"kind": "two_coupon_bond", "c": 5, "n": 100, "p1": 0.9, "p2": 0.9,
             "sigmas": [0.3, 0.3], "t1": 1, "t2": 2},
            "times": [0], "xi": [[0, 0]]}"#,
    );
    let out = infoprice(dir.path(), &["price", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&dir.path().join("price.csv"));
    let price: f64 = r[0][3].parse().unwrap();
    assert!((price - 89.55).abs() < 1e-10, "{price}");
}

#[test]
fn binary_bond_at_time_zero_is_its_default_free_probability() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"asset": {"kind": "single", "prior": {"kind": "digital", "p1": 0.8}, "sigma": 0.25, "maturity": 5},
            "curve": {"kind": "zero"}, "times": [0], "xi": [[0]]}"#,
    );
    assert!(infoprice(dir.path(), &["price", "--config", &cfg]).status.success());
    let price: f64 = rows(&dir.path().join("price.csv"))[0][2].parse().unwrap();
    assert!((price - 0.8).abs() < 1e-15);
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(
        dir.path(),
        r#"{"asset": {"kind": "cash_flows", "payments": []}, "times": [0], "xi": [[]]}"#,
    );
    let out = infoprice(dir.path(), &["price", "--config", &empty]);
    assert_eq!(out.status.code(), Some(2));

    let typo = write_config(
        dir.path(),
        r#"{"prior": {"kind": "digital", "p1": 0.5}, "sigma": 0.2, "sigma_informd": 0.4}"#,
    );
    let out = infoprice(dir.path(), &["mutual-info", "--config", &typo]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma_informd"));

    let out = infoprice(dir.path(), &["stat-arb", "--preset", "fig7"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("fig2") && msg.contains("fig3"), "{msg}");

    let out = infoprice(dir.path(), &["mutual-info", "--trials", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn option_table_checks_its_own_pricers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"prior": {"kind": "binary", "d0": 0, "d1": 1, "p1": 0.8}, "sigma": 0.25, "horizon": 5,
            "maturity": 1, "strikes": [0, 0.2, 0.4, 0.6, 0.7, 0.8, 0.9], "paths": 20000}"#,
    );
    let out = infoprice(dir.path(), &["option", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&dir.path().join("option.csv"));
    let prices: Vec<f64> = r.iter().map(|row| row[2].parse().unwrap()).collect();
    // K = 0 is the spot price.
    assert!((prices[0] - 0.8).abs() < 1e-12);
    assert!(prices.windows(2).all(|w| w[1] <= w[0]));
    for row in &r {
        assert_eq!(row[5], "true", "{row:?}");
        let diff: f64 = row[4].parse().unwrap();
        assert!(diff < 1e-10);
    }
}

#[test]
fn continuous_prior_option_has_no_closed_form_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"prior": {"kind": "lognormal", "mu": 0, "s": 0.3}, "sigma": 0.5, "horizon": 2,
            "maturity": 1, "curve": {"kind": "flat", "rate": 0.02}, "strikes": [1.0], "paths": 0}"#,
    );
    assert!(infoprice(dir.path(), &["option", "--config", &cfg]).status.success());
    let r = rows(&dir.path().join("option.csv"));
    assert!(r[0][2].parse::<f64>().unwrap() > 0.0);
    assert_eq!(r[0][3], "");
    assert_eq!(r[0][9], "");
}

#[test]
fn metadata_footer_tracks_seed_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(infoprice(&a, &["market-sim", "--seed", "1"]).status.success());
    assert!(infoprice(&b, &["market-sim", "--seed", "2"]).status.success());
    let footer = |p: &Path| {
        fs::read_to_string(p.join("market_events.csv"))
            .unwrap()
            .lines()
            .last()
            .unwrap()
            .to_owned()
    };
    let (fa, fb) = (footer(&a), footer(&b));
    assert!(fa.starts_with("# seed=1, version="), "{fa}");
    assert!(fb.starts_with("# seed=2, version="));
    assert_ne!(fa.split("config_hash=").nth(1), fb.split("config_hash=").nth(1));
}

#[test]
fn fig2_and_fig3_stat_arb_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = infoprice(dir.path(), &["stat-arb", "--preset", "fig3", "--trials", "300"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&dir.path().join("stat_arb.csv"));
    assert_eq!(r.len(), 19);
    for row in &r {
        let buy_rate: f64 = row[7].parse().unwrap();
        assert!((0.0..=1.0).contains(&buy_rate));
    }
}
