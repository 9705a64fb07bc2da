use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mbn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbn"))
        .args(args)
        .env_remove("MBN_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_run(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec!["run", "--seeds", "4", "--out", out, "num_sbs=12", "radio.subchannels=8"];
    args.extend_from_slice(extra);
    mbn(&args)
}

#[test]
fn run_writes_every_table_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = small_run(dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let header = |f: &str| fs::read_to_string(dir.path().join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header("sumrate.csv"), "seed,scheme,M,N,rho,sum_rate_bps");
    assert_eq!(header("cost.csv"), "q,kappa,mno,cost");
    assert!(header("cdf.csv").starts_with("scheme,M,N,rho"));
    assert!(header("overhead.csv").contains("messages"));

    let rows = fs::read_to_string(dir.path().join("sumrate.csv")).unwrap();
    // 4 seeds x 3 default schemes
    assert_eq!(rows.lines().count(), 1 + 12);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([0, 1, 2, 3]));
    assert_eq!(manifest["config"]["scenario"]["num_sbs"], 12);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(small_run(a.path(), &["--workers", "1"]).status.success());
    assert!(small_run(b.path(), &["--workers", "3"]).status.success());
    for f in ["sumrate.csv", "cdf.csv", "cost.csv", "overhead.csv", "manifest.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn overrides_change_the_resolved_config() {
    let resolved = |args: &[&str]| {
        let o = mbn(&[&["config"], args].concat());
        assert!(o.status.success(), "{}", stderr(&o));
        let cfg: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        cfg
    };
    assert_eq!(resolved(&["--preset", "fig5"]), resolved(&["--preset", "fig5"]));
    assert_ne!(resolved(&["--preset", "fig5"]), resolved(&["--preset", "fig5", "radio.rho=0.1"]));
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.json");
    fs::write(&path, r#"{"scenario": {"num_sbs": 6, "num_mnos": 2}, "sweep": {"rho": [0.2, 1.0]}, "seeds": 3}"#).unwrap();
    let o = mbn(&["config", "--config", path.to_str().unwrap(), "network.quota=2", "--scheme", "cooperative,random"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cfg["scenario"]["num_sbs"], 6);
    assert_eq!(cfg["scenario"]["network"]["quota"], 2);
    assert_eq!(cfg["sweep"]["rho"], serde_json::json!([0.2, 1.0]));
    assert_eq!(cfg["schemes"], serde_json::json!(["cooperative", "random"]));
    assert_eq!(cfg["seeds"], 3);
}

#[test]
fn unknown_preset_is_a_usage_error_listing_the_presets() {
    let o = mbn(&["run", "--preset", "fig42"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("fig3") && e.contains("fig8"), "{e}");
}

#[test]
fn bad_input_exits_with_two() {
    for args in [
        &["run", "radio.rhoo=0.5"][..],
        &["run", "radio.rho=1.5"],
        &["run", "--scheme", "greedy"],
        &["run", "--seeds", "0"],
        &["run", "--config", "/nonexistent/sweep.json"],
        &["run", "--bogus-flag"],
    ] {
        let o = mbn(args);
        let code = o.status.code();
        // a missing file is an I/O failure, everything else is bad input
        let want = if args.contains(&"--config") { Some(1) } else { Some(2) };
        assert_eq!(code, want, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn optimal_is_refused_above_the_limits() {
    let dir = tempfile::tempdir().unwrap();
    let o = mbn(&["run", "--scheme", "optimal", "--seeds", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("limited to"), "{}", stderr(&o));
    assert!(!dir.path().join("sumrate.csv").exists());
}

#[test]
fn optimal_runs_on_small_instances_and_bounds_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let o = mbn(&[
        "run", "--preset", "fig3", "--seeds", "3", "--out", dir.path().to_str().unwrap(), "sweep.num_sbs=[5]",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("sumrate.csv")).unwrap();
    let rows: Vec<(u64, String, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].to_string(), r[5].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 3 * 4);
    for seed in 0..3 {
        let best = rows.iter().find(|r| r.0 == seed && r.1 == "optimal").unwrap().2;
        for r in rows.iter().filter(|r| r.0 == seed) {
            assert!(r.2 <= best * (1.0 + 1e-9), "{r:?} above optimum {best}");
        }
    }
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mbn"))
        .args(["run", "--seeds", "1", "num_sbs=4", "--scheme", "cooperative"])
        .env("MBN_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("sumrate.csv").exists());
}

#[test]
fn fig8_cost_table_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = mbn(&[
        "run", "--preset", "fig8", "--seeds", "2", "--out", dir.path().to_str().unwrap(),
        "sweep.price=[0,5]", "sweep.kappa_mbps=[0,50,100]",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("cost.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    // 2 prices x 3 weights x 3 operators
    assert_eq!(rows.len(), 18);
    for r in rows.iter().filter(|r| &r[0] == "0.0") {
        assert_eq!(&r[3], "0.0", "free sub-channels cost nothing: {r:?}");
    }
}

#[test]
fn presets_are_listed() {
    let o = mbn(&["presets"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for p in ["fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "overhead"] {
        assert!(text.contains(p), "{p} missing");
    }
}
