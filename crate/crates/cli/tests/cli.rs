use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = adrc_lab::run(
        std::iter::once("adrc-lab").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn scenario(name: &str) -> String {
    scenarios_dir().join(name).to_string_lossy().into_owned()
}

#[test]
fn margin_examples() {
    let first_line = |args: &[&str]| run(args).1.lines().next().unwrap().to_string();
    assert_eq!(first_line(&["margin", "--n", "2"]), "(-1, 8)");
    assert_eq!(first_line(&["margin", "--n", "2", "--phi", "3,3,0.5"]), "(-1, 17)");
    assert_eq!(first_line(&["margin", "--n", "1"]), "(-1, inf)");
    let (_, out, _) = run(&["margin", "--n", "2"]);
    assert!(out.contains("certificate at ratio 8"), "{out}");
}

#[test]
fn margin_rejects_bad_phi() {
    for phi in ["3,3", "3,-3,1", "1,1,1,1", "x,1,1"] {
        let (code, _, err) = run(&["margin", "--n", "2", "--phi", phi]);
        assert_eq!(code, 2, "{phi}");
        assert!(err.starts_with("error:"), "{err}");
    }
}

#[test]
fn table_rows() {
    let (code, csv, _) = run(&["table", "--max-n", "5", "--format", "csv"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,theorem_lower,theorem_upper,lemma_lower,lemma_upper");
    assert_eq!(lines[3], "3,-1,4,-1,5/3");
    assert_eq!(lines.len(), 6);

    let (_, one, _) = run(&["table", "--max-n", "1", "--format", "csv"]);
    assert_eq!(one.lines().count(), 2);

    let (_, text, _) = run(&["table", "--max-n", "5"]);
    let footnote = text.lines().find(|l| l.starts_with("! n=4")).expect("n=4 footnote");
    assert!(footnote.contains("2.885438"), "{footnote}");
    assert_eq!(run(&["table", "--max-n", "9"]).0, 2);
}

#[test]
fn shipped_scenarios_validate() {
    let mut names: Vec<String> = fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().path().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert!(names.len() >= 9);
    let mut args = vec!["validate"];
    args.extend(names.iter().map(String::as_str));
    let (code, out, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().count(), names.len());
}

#[test]
fn shipped_scenarios_run_to_completion() {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        let csv = dir.path().join("run.csv");
        let (code, out, err) = run(&["simulate", path.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
        assert_eq!(code, 0, "{}: {err}", path.display());
        let metrics: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(metrics["diverged_at"].is_null(), "{}", path.display());
    }
}

#[test]
fn zero_disturbance_tracks_ideal() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("z.csv");
    let json = dir.path().join("z.json");
    let (code, out, _) = run(&[
        "simulate",
        &scenario("zero_disturbance.json"),
        "--out",
        csv.to_str().unwrap(),
        "--metrics",
        json.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!(metrics["sup_track"].as_f64().unwrap() <= 1e-6);
    assert_eq!(serde_json::from_str::<serde_json::Value>(&out).unwrap(), metrics);
    let header = fs::read_to_string(&csv).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "t,x1,x2,xhat1,xhat2,fhat,f,u,xstar1,xstar2");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let csv = dir.path().join(format!("{i}.csv"));
        let json = dir.path().join(format!("{i}.json"));
        let (code, _, _) = run(&[
            "simulate",
            &scenario("sine_reference_n3.json"),
            "--out",
            csv.to_str().unwrap(),
            "--metrics",
            json.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        outputs.push((fs::read(&csv).unwrap(), fs::read(&json).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn schema_violations_exit_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let base: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(scenario("case1_bd7.5.json")).unwrap()).unwrap();
    type Mutation = Box<dyn Fn(&mut serde_json::Value)>;
    let mutations: Vec<(&str, Mutation)> = vec![
        ("unknown top-level field", Box::new(|v| v["colour"] = "red".into())),
        ("unknown plant field", Box::new(|v| v["plant"]["mass"] = 1.0.into())),
        (
            "unknown uncertainty kind",
            Box::new(|v| v["plant"]["uncertainty"] = serde_json::json!({"kind": "case9"})),
        ),
        ("b_bar zero", Box::new(|v| v["plant"]["b_bar"] = 0.0.into())),
        (
            "omega_o negative",
            Box::new(|v| v["controller"]["omega_o"] = (-5.0).into()),
        ),
        (
            "K not Hurwitz",
            Box::new(|v| v["controller"]["K"] = serde_json::json!([-4.0, 4.0])),
        ),
        ("phi not Hurwitz", Box::new(|v| v["controller"]["phi"] = "1,1,1".into())),
        (
            "K length",
            Box::new(|v| v["controller"]["K"] = serde_json::json!([4.0])),
        ),
        ("step too large", Box::new(|v| v["step"] = 0.001.into())),
        ("step word", Box::new(|v| v["step"] = "fast".into())),
        (
            "case on third order",
            Box::new(|v| {
                v["n"] = 3.into();
                v["plant"]["x0"] = serde_json::json!([0.0, 0.0, 0.0]);
                v["controller"]["K"] = serde_json::json!([8.0, 12.0, 6.0]);
                v["controller"]["phi"] = "4,6,4,1".into();
            }),
        ),
    ];
    for (label, mutate) in mutations {
        let mut v = base.clone();
        mutate(&mut v);
        let path = dir.path().join("bad.json");
        fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
        let (code, _, err) = run(&["validate", path.to_str().unwrap()]);
        assert_eq!(code, 2, "{label}: accepted");
        assert!(!err.is_empty(), "{label}");
    }
    fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    assert_eq!(
        run(&["validate", dir.path().join("broken.json").to_str().unwrap()]).0,
        2
    );
}

#[test]
fn io_failures_map_to_exit_codes() {
    let (code, _, _) = run(&["simulate", "/nonexistent/scenario.json", "--out", "/tmp/never.csv"]);
    assert_eq!(code, 2);
    let (code, _, err) = run(&[
        "simulate",
        &scenario("zero_disturbance.json"),
        "--out",
        "/nonexistent/dir/out.csv",
    ]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn falsify_reports_refutation() {
    let (code, out, _) = run(&[
        "falsify",
        "--n",
        "2",
        "--ratio",
        "9",
        "--Mg",
        "10",
        "--omegas",
        "100,1000,10000",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 4);
    assert_eq!(out.lines().last().unwrap(), "tunability refuted: true");

    let (code, _, err) = run(&["falsify", "--n", "2", "--ratio", "7.5", "--Mg", "10", "--omegas", "100"]);
    assert_eq!(code, 2);
    assert!(err.contains("inside the gain margin"), "{err}");

    let (code, out, _) = run(&[
        "falsify", "--n", "2", "--ratio", "9", "--Mg", "0", "--omegas", "100", "--format", "json",
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["tunability_refuted"], false);
}

#[test]
fn sweep_text_and_json() {
    let (code, out, _) = run(&["sweep", &scenario("zero_disturbance.json"), "--omegas", "100,200"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("100,") && lines[2].starts_with("200,"));

    let (code, out, _) = run(&[
        "sweep",
        &scenario("zero_disturbance.json"),
        "--omegas",
        "100",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    let rows: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(rows[0]["metrics"]["sup_track"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_adrc-lab");
    let ok = Command::new(bin).args(["margin", "--n", "3"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&ok.stdout).lines().next(), Some("(-1, 4)"));
    let bad = Command::new(bin)
        .args(["margin", "--n", "2", "--phi", "1,1"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let usage = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
}
