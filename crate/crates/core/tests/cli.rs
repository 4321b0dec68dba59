use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coherence-nulltest"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_into(dir: &Path, seed: &str) -> Output {
    let out = dir.to_string_lossy().into_owned();
    let args = [
        "run",
        "--state",
        "squeezed",
        "--r",
        "0.4",
        "--phi",
        "0.2",
        "--gamma0-dt",
        "0.01",
        "--channels",
        "click,homodyne,heterodyne",
        "--samples",
        "20000",
        "--seed",
        seed,
        "--out",
        &out,
        "--format",
        "csv,json,svg",
    ];
    run(&args)
}

#[test]
fn identical_flags_give_identical_csvs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_into(a.path(), "99").status.success());
    assert!(run_into(b.path(), "99").status.success());
    for name in ["click.csv", "homodyne.csv", "heterodyne.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
        let text = String::from_utf8(x).unwrap();
        assert!(text.starts_with("channel,seed,index,out1_a,out1_b,out2_a,out2_b\n"));
        assert_eq!(text.lines().count(), 20_001);
    }
    for name in [
        "click_marginal.svg",
        "homodyne_density.svg",
        "report.json",
        "manifest.json",
    ] {
        assert!(a.path().join(name).exists(), "{name}");
    }
    let c = tempfile::tempdir().unwrap();
    assert!(run_into(c.path(), "100").status.success());
    assert_ne!(
        fs::read(a.path().join("click.csv")).unwrap(),
        fs::read(c.path().join("click.csv")).unwrap()
    );
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"state":{{"kind":"thermal","nbar":1.0}},"coupling":{{"gamma0_dt":0.02}},
                "channels":["click"],"samples":5000,"seed":1,"output_dir":{:?}}}"#,
            dir.path().join("out").to_string_lossy()
        ),
    )
    .unwrap();
    let o = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--nbar",
        "4",
        "--samples",
        "6000",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["state"]["nbar"], 4.0);
    assert_eq!(report["config"]["samples"], 6000);
    assert_eq!(report["channels"][0]["reports"][0]["sample_count"], 6000);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let missing_seed = run(&[
        "run",
        "--state",
        "fock",
        "--n",
        "2",
        "--gamma0-dt",
        "0.01",
        "--channels",
        "click",
        "--samples",
        "200",
    ]);
    assert_eq!(missing_seed.status.code(), Some(2));
    let few = run(&[
        "run",
        "--state",
        "fock",
        "--n",
        "2",
        "--gamma0-dt",
        "0.01",
        "--channels",
        "click",
        "--samples",
        "50",
        "--seed",
        "1",
    ]);
    assert_eq!(few.status.code(), Some(2));
    let numerical = run(&[
        "run",
        "--state",
        "fock",
        "--n",
        "2",
        "--gamma0-dt",
        "0.01",
        "--channels",
        "click",
        "--samples",
        "200",
        "--seed",
        "1",
        "--max-dim",
        "2",
        "--out",
        &out,
    ]);
    assert_eq!(numerical.status.code(), Some(3));
    let partial = run(&[
        "run",
        "--state",
        "thermal",
        "--nbar",
        "2",
        "--gamma0-dt",
        "0.01",
        "--channels",
        "click,homodyne",
        "--samples",
        "200",
        "--seed",
        "1",
        "--grid-half-width",
        "1",
        "--out",
        &out,
    ]);
    assert_eq!(partial.status.code(), Some(4));
    assert!(dir.path().join("homodyne.error.txt").exists());
    assert!(dir.path().join("click.csv").exists());
}

#[test]
fn gamma0_and_oracle_commands() {
    let o = run(&["gamma0", "--json"]);
    assert!(o.status.success());
    let t: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let g = t["gamma0"].as_f64().unwrap();
    assert!((g / 8.611448832e-12 - 1.0).abs() < 1e-14);
    assert_eq!(t["rows"].as_array().unwrap().len(), 3);
    let light = run(&["gamma0", "--speed", "light", "--json"]);
    let tl: serde_json::Value = serde_json::from_slice(&light.stdout).unwrap();
    assert!(tl["gamma0"].as_f64().unwrap() < g * 1e-12);

    let o = run(&["oracle"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn compare_g2_reports_both_estimators() {
    let o = run(&[
        "compare-g2",
        "--state",
        "thermal",
        "--nbar",
        "3",
        "--gamma0-dt",
        "0.01",
        "--channels",
        "click",
        "--samples",
        "50000",
        "--seed",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(c["analytic_r"], 2.0);
    assert_eq!(c["low_coincidence"], true);
    assert!(c["separation_sigma"].as_f64().unwrap() < 5.0);
}
