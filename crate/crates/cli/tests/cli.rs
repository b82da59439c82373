use std::process::{Command, Output};

fn inar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn table(out: &Output) -> Vec<(usize, f64)> {
    let text = stdout(out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,probability"));
    lines
        .map(|l| {
            let (k, p) = l.split_once(',').unwrap();
            (k.parse().unwrap(), p.parse().unwrap())
        })
        .collect()
}

const BERN: [&str; 6] = ["--innovation", "bernoulli", "--p", "0.2", "--alpha", "0.5"];

fn with<'a>(cmd: &'a str, base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend_from_slice(base);
    v.extend_from_slice(extra);
    v
}

#[test]
fn pmf_bernoulli_table() {
    let out = inar(&with("pmf", &BERN, &[]));
    assert!(out.status.success());
    let rows = table(&out);
    assert_eq!(rows[0].0, 0);
    assert!((rows[0].1 - 0.650366).abs() < 5e-7, "{}", rows[0].1);
    let total: f64 = rows.iter().map(|r| r.1).sum();
    assert!((1.0 - 1e-9..=1.0 + 1e-12).contains(&total), "{total}");
    for (i, (k, _)) in rows.iter().enumerate() {
        assert_eq!(*k, i);
    }
}

#[test]
fn pmf_respects_max_k_and_json() {
    let rows = table(&inar(&with("pmf", &BERN, &["--max-k", "2"])));
    assert_eq!(rows.len(), 3);
    let out = inar(&with("pmf", &BERN, &["--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["method"], "bernoulli_series");
    assert_eq!(v["model"]["innovation"]["family"], "bernoulli");
    let p0 = v["probabilities"][0].as_f64().unwrap();
    assert!((p0 - 0.650366).abs() < 5e-7);
}

#[test]
fn coarse_tolerance_is_rejected() {
    let out = inar(&with("pmf", &BERN, &["--tol", "1e-5"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tol"));
}

#[test]
fn inline_json_file_and_flags_agree() {
    let json = r#"{"innovation": {"family": "bernoulli", "p": 0.2}, "alpha": 0.5}"#;
    let inline = inar(&["pmf", "--model", json]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, json).unwrap();
    let file = inar(&["pmf", "--model", path.to_str().unwrap()]);
    let flags = inar(&with("pmf", &BERN, &[]));
    assert_eq!(inline.stdout, flags.stdout);
    assert_eq!(file.stdout, flags.stdout);
}

#[test]
fn bad_model_configs_report_location() {
    let out = inar(&[
        "pmf",
        "--model",
        "{\"innovation\": {\"family\": \"bernoulli\", \"p\": 0.2},\n \"alpha\": }",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");

    let out = inar(&[
        "pmf",
        "--model",
        r#"{"innovation": {"family": "bernoulli", "p": 1.2}, "alpha": 0.5}"#,
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`p`"));

    let out = inar(&[
        "pmf",
        "--innovation",
        "bernoulli",
        "--p",
        "0.2",
        "--m",
        "3",
        "--alpha",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = inar(&[
        "pmf",
        "--innovation",
        "binomial",
        "--p",
        "0.2",
        "--alpha",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--m"));

    let out = inar(&["pmf"]);
    assert_eq!(out.status.code(), Some(2));
}

fn moments(args: &[&str]) -> serde_json::Value {
    let out = inar(&with("moments", args, &[]));
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_str(&stdout(&out)).unwrap()
}

#[test]
fn moment_reports() {
    let v = moments(&BERN);
    assert!((v["dispersion_index"].as_f64().unwrap() - 0.866667).abs() < 1e-6);
    assert_eq!(v["cumulants"].as_array().unwrap().len(), 4);
    let v = moments(&["--innovation", "poisson", "--lambda", "1", "--alpha", "0.5"]);
    assert!((v["dispersion_index"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    let v = moments(&[
        "--innovation",
        "logarithmic",
        "--p",
        "0.7",
        "--alpha",
        "0.5",
    ]);
    assert!(v["dispersion_index"].as_f64().unwrap() > 1.0);
    let out = inar(&with("moments", &BERN, &["--orders", "7"]));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["factorial_moments"].as_array().unwrap().len(), 7);
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = inar(&with(
            "simulate",
            &BERN,
            &[
                "--steps",
                "5000",
                "--seed",
                "42",
                "--out",
                path.to_str().unwrap(),
            ],
        ));
        assert!(out.status.success());
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x"));
    assert_eq!(lines.count(), 5000);

    let other = inar(&with(
        "simulate",
        &BERN,
        &["--steps", "5000", "--seed", "43"],
    ));
    assert_ne!(other.stdout, std::fs::read(&a).unwrap());
}

#[test]
fn simulate_fixed_start_and_bad_output() {
    let out = inar(&with(
        "simulate",
        &BERN,
        &["--steps", "3", "--init", "fixed:0"],
    ));
    let text = stdout(&out);
    let first = text.lines().nth(1).unwrap();
    let (t, x) = first.split_once(',').unwrap();
    assert_eq!(t, "1");
    assert!(x.parse::<u64>().unwrap() <= 1);

    let out = inar(&with(
        "simulate",
        &BERN,
        &["--steps", "3", "--out", "/nonexistent-dir/x.csv"],
    ));
    assert_ne!(out.status.code(), Some(0));

    let out = inar(&with(
        "simulate",
        &BERN,
        &["--steps", "3", "--init", "warm"],
    ));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn one_step_from_zero_is_the_innovation() {
    let rows = table(&inar(&with(
        "transition",
        &BERN,
        &["--from", "0", "--steps", "1"],
    )));
    assert_eq!(rows, vec![(0, 0.8), (1, 0.2)]);
    let rows = table(&inar(&[
        "transition",
        "--innovation",
        "binomial",
        "--m",
        "3",
        "--p",
        "0.2",
        "--alpha",
        "0.5",
        "--from",
        "0",
    ]));
    let want = [0.512, 0.384, 0.096, 0.008];
    assert_eq!(rows.len(), 4);
    for ((_, got), w) in rows.iter().zip(want) {
        assert!((got - w).abs() < 1e-12);
    }
    let rows = table(&inar(&with(
        "transition",
        &BERN,
        &["--from", "4", "--steps", "3"],
    )));
    let total: f64 = rows.iter().map(|r| r.1).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn validate_lemma2_suite() {
    let out = inar(&["validate", "--suite", "lemma2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut n = 0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["passed"], true);
        assert!(v["max_abs_error"].as_f64().unwrap() <= v["tolerance"].as_f64().unwrap());
        n += 1;
    }
    assert!(n > 20);
    assert_eq!(
        inar(&["validate", "--suite", "bogus"]).status.code(),
        Some(2)
    );
    assert_eq!(inar(&["validate", "--tol", "0.1"]).status.code(), Some(2));
}

#[test]
fn presets_listed_and_usable() {
    let out = inar(&["presets"]);
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 10);
    let out = inar(&["pmf", "--preset", "poisson-heine", "--max-k", "3"]);
    assert!(out.status.success());
    assert_eq!(inar(&["pmf", "--preset", "nope"]).status.code(), Some(2));
}
