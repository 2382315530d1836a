use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bcnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcnet")).args(args).output().expect("run bcnet")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const DIAMOND: &str = r#"{"kind":"ldn","p":2,"q":3,"nodes":4,"source":0,"bc_destinations":[3],
  "gains":[{"from":0,"to":1,"shift":2},{"from":0,"to":2,"shift":1},
           {"from":1,"to":3,"shift":1},{"from":2,"to":3,"shift":2}]}"#;

fn body(out: &Output) -> Vec<String> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn point_to_point_region_is_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "p2p.json",
        r#"{"kind":"gaussian","nodes":2,"source":0,"bc_destinations":[1],"gains":[{"from":0,"to":1,"re":1.5,"im":-2.0}]}"#,
    );
    let out = bcnet(&["cutset", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let lines = body(&out);
    assert_eq!(lines[0], "targets,cut_bitmask,value_bits");
    assert_eq!(lines.len(), 2);
    let value: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    let oracle = (1.0f64 + 1.5 * 1.5 + 2.0 * 2.0).log2();
    assert!((value - oracle).abs() < 1e-12, "{value} vs {oracle}");
}

#[test]
fn disconnected_destination_has_zero_bound() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "ldn.json",
        r#"{"kind":"ldn","p":2,"q":2,"nodes":3,"source":0,"bc_destinations":[1,2],
            "gains":[{"from":0,"to":1,"shift":2}]}"#,
    );
    let out = bcnet(&["cutset", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let lines = body(&out);
    assert!(lines.iter().any(|l| l.starts_with("2,") && l.ends_with(",0")), "{lines:?}");
}

#[test]
fn header_carries_version_seed_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.json", DIAMOND);
    let out = bcnet(&["ldn-sim", p.to_str().unwrap(), "--trials", "5", "--seed", "11"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# bcnet "));
    assert!(first.contains("seed=11"));
    let hash = first.split("config_hash=").nth(1).unwrap();
    assert_eq!(hash.len(), 64);
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.json", "{\"kind\": ");
    assert_eq!(bcnet(&["cutset", p.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(bcnet(&["cutset", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn invalid_network_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "loop.json",
        r#"{"kind":"ldn","p":4,"q":2,"nodes":2,"source":0,"bc_destinations":[1],"gains":[{"from":0,"to":1,"shift":1}]}"#,
    );
    assert_eq!(bcnet(&["cutset", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn shallow_unfolding_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.json", DIAMOND);
    let out = bcnet(&["unfold", p.to_str().unwrap(), "--depth", "4"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8(out.stderr).unwrap().contains("depth"));
}

#[test]
fn reciprocity_of_ldn_is_all_equal() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.json", DIAMOND);
    let out = bcnet(&["reciprocity", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout.clone()).unwrap().contains("# all_equal=true"));
    let j = bcnet(&["reciprocity", p.to_str().unwrap(), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&j.stdout).unwrap();
    assert_eq!(v["result"]["all_equal"], serde_json::Value::Bool(true));
}

#[test]
fn ldn_sim_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.json", DIAMOND);
    let args = ["ldn-sim", p.to_str().unwrap(), "--seed", "7", "--trials", "1000"];
    let a = bcnet(&args);
    let b = bcnet(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(body(&a).len(), 1001);
    let c = bcnet(&["ldn-sim", p.to_str().unwrap(), "--seed", "8", "--trials", "1000"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn unfolded_diamond_matches_layer_bound() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.json", DIAMOND);
    let out = bcnet(&["unfold", p.to_str().unwrap(), "--depth", "6", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = &v["result"][0];
    assert_eq!(row["original_bits"].as_f64(), Some(2.0));
    let u = row["unfolded_bits"].as_f64().unwrap();
    // the diamond has two hops, so K - 2 steps carry data
    assert!((6.0 - 4.0) * 2.0 <= u && u <= (6.0 - 1.0) * 2.0, "{u}");
}

#[test]
fn multicast_roles_have_no_reciprocal() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "mc.json",
        r#"{"kind":"ldn","p":2,"q":2,"nodes":3,"source":0,"bc_destinations":[1],"mc_destinations":[2],
            "gains":[{"from":0,"to":1,"shift":2},{"from":0,"to":2,"shift":1}]}"#,
    );
    assert_eq!(bcnet(&["reciprocity", p.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn blackwell_marton_fixture_reports_json() {
    let out = bcnet(&["marton-sim", "--fixture", "blackwell", "--t2", "8", "--trials", "50", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["header"]["seed"], 1);
    assert!(v["result"]["report"]["per_block"][0]["rates"][0].as_f64().unwrap() > 0.0);
}

#[test]
fn bad_flag_exits_2() {
    assert_eq!(bcnet(&["cutset", "x.json", "--format", "xml"]).status.code(), Some(2));
}
