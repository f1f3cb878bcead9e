use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rssi-predict"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        run(&["acf", "--in", "/no/such/file.csv", "--max-lag", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["simulate", "--channel", "hurricane", "--out", "/dev/null"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["simulate", "--loss", "bernoulli:1.5"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["atpc", "--threshold", "-150"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "seq,rssi_dbm\n0,-70\nx,-71\n").unwrap();
    assert_eq!(
        run(&["acf", "--in", s(&bad), "--max-lag", "1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn pipeline_outputs_have_documented_headers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let trace = d.join("t.csv");
    assert!(run(&[
        "simulate",
        "--channel",
        "chop",
        "--packets",
        "800",
        "--seed",
        "2",
        "--out",
        s(&trace)
    ])
    .status
    .success());
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("seq,t_s,rssi_dbm,tx_power_dbm\n"));

    let acf = run(&["acf", "--in", s(&trace), "--max-lag", "4"]);
    let acf = String::from_utf8(acf.stdout).unwrap();
    assert_eq!(acf.lines().next(), Some("lag_s,acov,acf_norm,n_pairs,d1"));
    assert_eq!(acf.lines().count(), 6);

    let prefix = d.join("ev");
    let ev = run(&[
        "evaluate",
        "--in",
        s(&trace),
        "--method",
        "orthonormal",
        "--lags",
        "1,15",
        "--out",
        s(&prefix),
    ]);
    assert!(ev.status.success());
    let csv = std::fs::read_to_string(d.join("ev.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("ev.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 2);
    assert!(json["normalization"]["r_max_dbm"].is_number());

    let model = d.join("m.json");
    assert!(run(&[
        "fit",
        "--in",
        s(&trace),
        "--method",
        "simplified",
        "--lag",
        "1",
        "--out",
        s(&model)
    ])
    .status
    .success());
    // A simplified model is lag-parametric: r + 3 * 0.1 * slope.
    let p = run(&[
        "predict",
        "--model",
        s(&model),
        "--anchor-rssi",
        "-70",
        "--anchor-slope",
        "2",
        "--steps",
        "3",
    ]);
    let out = String::from_utf8(p.stdout).unwrap();
    assert_eq!(out.lines().nth(1), Some("3,0.300000,-69.400000,"));

    let loop_csv = d.join("loop.csv");
    let a = run(&[
        "atpc",
        "--threshold",
        "-90",
        "--seed",
        "1",
        "--packets",
        "300",
        "--out",
        s(&loop_csv),
    ]);
    assert!(a.status.success());
    let text = std::fs::read_to_string(&loop_csv).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("seq,tx_dbm,rssi_dbm,delivered,predicted,mode")
    );
    assert_eq!(text.lines().count(), 301);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("sim.conf");
    std::fs::write(
        &cfg,
        "# swell run\nchannel = calm\npackets = 120\nseed = 9\n",
    )
    .unwrap();
    let a = d.join("a.csv");
    let b = d.join("b.csv");
    let c = d.join("c.csv");
    assert!(run(&["--config", s(&cfg), "simulate", "--out", s(&a)])
        .status
        .success());
    assert!(run(&[
        "simulate",
        "--channel",
        "calm",
        "--packets",
        "120",
        "--seed",
        "9",
        "--out",
        s(&b)
    ])
    .status
    .success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    assert!(run(&[
        "--config",
        s(&cfg),
        "simulate",
        "--packets",
        "50",
        "--out",
        s(&c)
    ])
    .status
    .success());
    assert_eq!(std::fs::read_to_string(&c).unwrap().lines().count(), 51);

    std::fs::write(&cfg, "packets: 10\n").unwrap();
    assert_eq!(
        run(&["--config", s(&cfg), "simulate"]).status.code(),
        Some(1)
    );
}
