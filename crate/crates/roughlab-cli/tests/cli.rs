use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_roughlab"));
    c.env_remove("ROUGHLAB_OUT");
    c
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_scenario(name: &str, out: &Path, extra: &[&str]) -> Output {
    let file = scenarios().join(format!("{}.toml", name));
    let mut args = vec!["run", file.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_presets_shows_every_preset() {
    let o = run(&["list-presets"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["kalman-linear", "degenerate", "correlated-jump-diffusion", "multiplicative-jump-diffusion"] {
        assert!(text.contains(name), "{}", text);
    }
    let o = run(&["list-presets", "--json"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.as_array().unwrap().len() >= 9);
}

#[test]
fn degenerate_filter_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = run_scenario("filter-degenerate", &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["report.json", "manifest.json", "comparison.csv", "filter-robust.csv", "filter-oracle.csv"] {
        assert!(out.join(f).exists(), "{}", f);
    }
    let r = report(&out);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["result"]["comparison"]["within_3se"], true);
    // No likelihood: the normalization is exactly one at every checkpoint.
    for c in r["result"]["robust"]["checkpoints"].as_array().unwrap() {
        assert_eq!(c["g_1"].as_f64(), Some(1.0));
        assert_eq!(c["se_g_1"].as_f64(), Some(0.0));
    }
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_hash"], r["config_hash"]);
    assert_eq!(m["versions"]["roughlab"], "0.1.0");
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    let csv = std::fs::read_to_string(out.join("filter-robust.csv")).unwrap();
    assert!(csv.starts_with("time,g_f,g_1,theta,se\n"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn reports_are_byte_identical_across_threads_and_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["filter-degenerate", "consistency-linear", "moments-brownian", "robustness-jump"] {
        let mut texts = Vec::new();
        for threads in ["1", "4", "8"] {
            let out = tmp.path().join(format!("{}-{}", name, threads));
            let o = run_scenario(name, &out, &["--threads", threads]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            texts.push(std::fs::read(out.join("report.json")).unwrap());
        }
        assert!(texts.windows(2).all(|w| w[0] == w[1]), "{}", name);
    }
}

#[test]
fn output_collision_needs_force() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    assert!(run_scenario("skorokhod-counterexample", &out, &[]).status.success());
    let o = run_scenario("skorokhod-counterexample", &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--force"));
    assert!(run_scenario("skorokhod-counterexample", &out, &["--force"]).status.success());
}

#[test]
fn counterexample_gap_persists() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    assert!(run_scenario("skorokhod-counterexample", &out, &[]).status.success());
    let r = report(&out);
    let points = r["result"]["report"]["points"].as_array().unwrap();
    assert_eq!(points.len(), 5);
    for p in points {
        assert!((p["l2_gap"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn consistency_gap_decays() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    assert!(run_scenario("consistency-linear", &out, &[]).status.success());
    let r = report(&out);
    assert_eq!(r["result"]["decays"], true);
    let csv = std::fs::read_to_string(out.join("levels.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn assumption_skip_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = run_scenario("robustness-kalman", &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["status"], "skipped");
    assert!(r["skip_reason"].as_str().unwrap().contains("unbounded"));
}

#[test]
fn bad_scenarios_fail_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "name = \"x\"\nseed = 1\nexperiment = \"filter\"\n[filter]\nparticles = -3\n").unwrap();
    let o = run(&["run", bad.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 5") && stderr(&o).contains("particles"), "{}", stderr(&o));

    std::fs::write(
        &bad,
        "name = \"x\"\nseed = 1\nexperiment = \"filter\"\n[model]\npreset = \"nope\"\n[filter]\nparticles = 3\n",
    )
    .unwrap();
    let o = run(&["run", bad.to_str().unwrap(), "--out", tmp.path().join("p").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown preset `nope`"), "{}", stderr(&o));

    std::fs::write(
        &bad,
        "name = \"x\"\nseed = 1\nexperiment = \"filter\"\n[model]\npreset = \"degenerate\"\nparams = { nope = 1.0 }\n[filter]\nparticles = 3\n",
    )
    .unwrap();
    let o = run(&["run", bad.to_str().unwrap(), "--out", tmp.path().join("q").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope"), "{}", stderr(&o));
}

#[test]
fn env_var_sets_output_root_and_flags_change_the_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let file = scenarios().join("skorokhod-counterexample.toml");
    let o = bin()
        .args(["run", file.to_str().unwrap(), "--seed", "5", "--mesh-refine", "1"])
        .env("ROUGHLAB_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("skorokhod-counterexample");
    let r = report(&dir);
    assert_eq!(r["seed"], 5);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["mesh_refine"], 1);
    assert!(m["canonical_config"].as_str().unwrap().contains("\"cells\":128"));

    let base = tmp.path().join("base");
    assert!(run_scenario("skorokhod-counterexample", &base, &[]).status.success());
    assert_ne!(report(&base)["config_hash"], r["config_hash"]);
}

#[test]
fn verify_matches_the_bundled_goldens() {
    let o = run(&["verify", scenarios().to_str().unwrap(), "--json"]);
    let entries: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", entries);
    let entries = entries.as_array().unwrap();
    assert!(entries.len() >= 8);
    assert!(entries.iter().all(|e| e["status"] == "match"), "{:?}", entries);
}

#[test]
fn verify_lists_missing_goldens_as_new() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("golden");
    std::fs::create_dir(&empty).unwrap();
    let dir = tmp.path().join("scen");
    std::fs::create_dir(&dir).unwrap();
    let o = run(&["verify", dir.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(serde_json::from_slice::<Value>(&o.stdout).unwrap(), Value::Array(vec![]));

    std::fs::copy(scenarios().join("skorokhod-counterexample.toml"), dir.join("a.toml")).unwrap();
    let o = run(&["verify", dir.to_str().unwrap(), "--golden", empty.to_str().unwrap(), "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["status"], "new");
    assert_eq!(std::fs::read_dir(&empty).unwrap().count(), 0);
}

#[test]
fn verify_flags_a_perturbed_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("scen");
    let golden = dir.join("golden");
    std::fs::create_dir_all(&golden).unwrap();
    std::fs::copy(scenarios().join("consistency-linear.toml"), dir.join("c.toml")).unwrap();
    let o = run(&["verify", dir.to_str().unwrap(), "--bless"]);
    assert_eq!(o.status.code(), Some(0));
    let path = std::fs::read_dir(&golden).unwrap().next().unwrap().unwrap().path();
    let mut g: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(run(&["verify", dir.to_str().unwrap()]).status.code(), Some(0));

    // A shift well inside the recorded tolerance is accepted, one outside is flagged.
    let gap = &mut g["report"]["result"]["levels"][0]["mean_terminal_gap"];
    let v = gap.as_f64().unwrap();
    *gap = Value::from(v * (1.0 + 1e-12));
    std::fs::write(&path, serde_json::to_string(&g).unwrap()).unwrap();
    assert_eq!(run(&["verify", dir.to_str().unwrap()]).status.code(), Some(0));
    g["report"]["result"]["levels"][0]["mean_terminal_gap"] = Value::from(v * (1.0 + 1e-6));
    std::fs::write(&path, serde_json::to_string(&g).unwrap()).unwrap();
    let o = run(&["verify", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("DIFF") && text.contains("mean_terminal_gap"), "{}", text);
}
