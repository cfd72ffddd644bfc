use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn out_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fiblab-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn fiblab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fiblab"))
        .args(args)
        .env_remove("FIBLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &std::path::Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn lift_square_at_unit_point() {
    let dir = out_dir("lift");
    let o = fiblab(&[
        "lift",
        "square",
        "--point",
        "1,0",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("w_f=(1,0)  α=0.25  w_F=(2,0)  β=1"), "{text}");
    assert!(text.contains("w̃=(4,0)"), "{text}");
    let s = summary(&dir);
    assert_eq!(
        s["reports"]["lift"]["w_tilde"],
        serde_json::json!([4.0, 0.0])
    );
}

#[test]
fn inline_map_document_is_accepted() {
    let dir = out_dir("inline");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("square.json");
    std::fs::write(
        &cfg,
        r#"{"n":2,"p":2,"components":[[{"c":1,"e":[2,0]},{"c":-1,"e":[0,2]}],[{"c":2,"e":[1,1]}]]}"#,
    )
    .unwrap();
    let o = fiblab(&[
        "lift",
        cfg.to_str().unwrap(),
        "--point",
        "1,0",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("w̃=(4,0)"));
}

#[test]
fn examples_list_names_the_catalog() {
    let o = fiblab(&["examples", "list"]);
    assert_eq!(o.status.code(), Some(0));
    for name in [
        "square",
        "nondreg-4-3",
        "quadrics-3-2",
        "identity-2",
        "projection-3-2",
    ] {
        assert!(stdout(&o).contains(name));
    }
}

#[test]
fn examples_run_square_passes_and_is_stable_across_threads() {
    let a = out_dir("square-1");
    let b = out_dir("square-4");
    let oa = fiblab(&[
        "examples",
        "run",
        "square",
        "--seed",
        "0",
        "--threads",
        "1",
        "--out",
        a.to_str().unwrap(),
    ]);
    let ob = fiblab(&[
        "examples",
        "run",
        "square",
        "--seed",
        "0",
        "--threads",
        "4",
        "--out",
        b.to_str().unwrap(),
    ]);
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    assert_eq!(ob.status.code(), Some(0), "{}", stderr(&ob));
    let s = summary(&a);
    assert_eq!(s["verdicts"]["equivalence"], "pass");
    assert_eq!(s["verdicts"]["d-regularity"], "pass");
    for file in [
        "summary.json",
        "samples.jsonl",
        "traces.csv",
        "discriminant.csv",
    ] {
        let x = std::fs::read(a.join(file)).unwrap();
        let y = std::fs::read(b.join(file)).unwrap();
        assert!(x == y, "{file} differs between thread counts");
    }
    assert!(stdout(&oa).contains("property: Φ-constancy"));
}

#[test]
fn strict_exit_codes_for_catalog_maps() {
    for (name, code) in [("square", 0), ("quadrics-3-2", 0), ("nondreg-4-3", 1)] {
        let dir = out_dir(&format!("strict-{name}"));
        let o = fiblab(&["dreg", name, "--strict", "--out", dir.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(code), "{name}: {}", stdout(&o));
    }
}

#[test]
fn nondreg_dreg_reports_a_witness() {
    let dir = out_dir("nondreg");
    let o = fiblab(&[
        "dreg",
        "nondreg-4-3",
        "--strict",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let s = summary(&dir);
    assert_eq!(s["verdicts"]["d-regularity"], "fail");
    let witnesses = s["reports"]["regularity"]["witnesses"].as_array().unwrap();
    assert!(!witnesses.is_empty());
    assert!(witnesses
        .iter()
        .any(|w| w["margin"].as_f64().unwrap() < 1e-3));
}

#[test]
fn flow_refuses_without_d_regularity() {
    let dir = out_dir("refuse");
    let o = fiblab(&[
        "flow",
        "nondreg-4-3",
        "--seeds",
        "5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(&dir);
    assert_eq!(s["verdicts"]["equivalence"], "refused");
    assert!(s["reports"]["equivalence"]["refusal_witness"].is_object());
}

#[test]
fn flow_writes_step_records() {
    let dir = out_dir("flow");
    let o = fiblab(&[
        "flow",
        "square",
        "--seeds",
        "3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.join("traces.csv")).unwrap();
    assert!(csv.starts_with("seed_index,step,t,r,f_norm,x0,x1,phi0,phi1\n"));
    let lines = std::fs::read_to_string(dir.join("samples.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), csv.lines().count() - 1);
}

#[test]
fn discriminant_csv_of_nondreg() {
    let dir = out_dir("disc");
    let o = fiblab(&[
        "discriminant",
        "nondreg-4-3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.join("discriminant.csv")).unwrap();
    assert!(csv.starts_with("radius,u0,u1,u2,shell,cluster\n"));
    assert_eq!(summary(&dir)["verdicts"]["discriminant"], "linear");
}

#[test]
fn input_errors_exit_2_and_name_the_field() {
    let cases: [(&[&str], &str); 4] = [
        (&["lift", "square", "--point", "1,0,3"], "--point"),
        (&["analyze", "no-such-map"], "map"),
        (
            &["dreg", "square", "--epsilon", "1", "--delta", "0.5"],
            "delta",
        ),
        (&["lift", "square", "--point", "0,0"], "(0,0)"),
    ];
    for (args, needle) in cases {
        let dir = out_dir("errors");
        let mut full = args.to_vec();
        full.extend(["--out", dir.to_str().unwrap()]);
        let o = fiblab(&full);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).contains(needle), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn config_file_errors_name_the_field() {
    let dir = out_dir("badcfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bad.json");
    std::fs::write(&cfg, r#"{"map":"square","sampler":{"samples":0}}"#).unwrap();
    let o = fiblab(&[
        "dreg",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sampler.samples"), "{}", stderr(&o));
}
