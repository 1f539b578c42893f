use std::path::Path;
use std::process::{Command, Output};

fn fpisa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpisa")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn add_traces() {
    let o = fpisa(&["add", "1.0", "256.0", "--variant", "approx"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("events: [OVERWRITE]"));
    assert!(text.ends_with("result = 256.0 (0x43800000)\n"));

    let text = stdout(&fpisa(&["add", "0", "0"]));
    assert!(text.contains("events: []"));
    assert!(text.ends_with("result = 0.0 (0x00000000)\n"));

    let o = fpisa(&["add", "1.0", "256.0", "--variant", "approx", "--strict"]);
    assert_eq!(o.status.code(), Some(3));

    let json: serde_json::Value = serde_json::from_slice(&fpisa(&["add", "-2.5", "1", "--output-format", "json"]).stdout).unwrap();
    assert_eq!(json["packets"].as_array().unwrap().len(), 2);
}

#[test]
fn add_rejects_bad_literals() {
    assert_eq!(fpisa(&["add", "abc", "1"]).status.code(), Some(1));
    assert_eq!(fpisa(&["add", "inf", "1"]).status.code(), Some(1));
    assert_eq!(fpisa(&["add", "1"]).status.code(), Some(1));
    assert_eq!(fpisa(&["add", "1", "2", "--format", "fp8"]).status.code(), Some(1));
    assert_eq!(fpisa(&["--profile", "baseline", "add", "1", "2"]).status.code(), Some(2));
}

#[test]
fn validate_profiles() {
    let o = fpisa(&["validate", "--builtin", "exact", "--profile", "baseline"]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(text.contains("UnsupportedCapability(VariableShift)"));
    assert!(text.contains("UnsupportedCapability(StatefulReadShiftAddWrite)"));

    assert_eq!(fpisa(&["validate", "--builtin", "exact", "--profile", "extended"]).status.code(), Some(0));

    let o = fpisa(&["validate", "--builtin", "approx", "--profile", "baseline"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ResourcePressure"));
}

#[test]
fn validate_program_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let program = stdout(&fpisa(&["validate", "--builtin", "exact", "--emit-program"]));
    let path = write(dir.path(), "p.json", &program);
    assert_eq!(fpisa(&["validate", "--program", &path]).status.code(), Some(0));
    assert_eq!(fpisa(&["validate", "--program", &path, "--profile", "baseline"]).status.code(), Some(2));
    let broken = write(dir.path(), "b.json", "{\"name\": 1}");
    assert_eq!(fpisa(&["validate", "--program", &broken]).status.code(), Some(1));
}

#[test]
fn aggregate_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "3.0\n");
    let b = write(dir.path(), "b.csv", "1.0\n");
    for engine in ["protocol", "functional"] {
        let o = fpisa(&["aggregate", "--workers", &a, &b, "--engine", engine]);
        assert!(o.status.success());
        assert_eq!(stdout(&o), "element,value,bits\n0,4.0,0x40800000\n");
    }
}

#[test]
fn aggregate_binary_input_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let bin = |name: &str, v: &[f32]| {
        let p = dir.path().join(name);
        std::fs::write(&p, v.iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<u8>>()).unwrap();
        p.display().to_string()
    };
    let (a, b) = (bin("a.bin", &[1.0, 2.0, 3.0]), bin("b.bin", &[0.5, -2.0, 4.0]));
    let cfg = write(dir.path(), "run.toml", "slots = 2\nelements_per_packet = 2\noutput_format = \"json\"\n");
    let o = fpisa(&["aggregate", "--config", &cfg, "--input-kind", "binary", "--workers", &a, &b]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let values: Vec<&str> = json["result"].as_array().unwrap().iter().map(|r| r["value"].as_str().unwrap()).collect();
    assert_eq!(values, ["1.5", "0.0", "7.0"]);
    assert_eq!(json["report"]["elements_per_packet"], 2);
    assert_eq!(json["report"]["slots"], 2);

    let short = bin("c.bin", &[1.0]);
    assert_eq!(fpisa(&["aggregate", "--input-kind", "binary", "--workers", &a, &short]).status.code(), Some(1));
}

#[test]
fn aggregate_strict_fails_on_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "1.0\n");
    let b = write(dir.path(), "b.csv", "256.0\n");
    let report = dir.path().join("r.json");
    let args = ["aggregate", "--variant", "approx", "--workers", &a, &b, "--report", report.to_str().unwrap()];
    assert_eq!(fpisa(&args).status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["event_counts"]["Overwrite"], 1);
    assert_eq!(r["events"][0]["worker"], 1);
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(fpisa(&strict).status.code(), Some(3));
}

#[test]
fn query_examples() {
    let dir = tempfile::tempdir().unwrap();
    let stream = write(dir.path(), "s.csv", "key,value\na,1.0\nb,9.0\nc,3.0\nd,5.0\ne,2.0\n");
    let o = fpisa(&["query", "--op", "topn", "--n", "2", "--input", &stream]);
    assert_eq!(stdout(&o), "key,value,bits,status\nb,9.0,0x41100000,ok\nd,5.0,0x40A00000,ok\n");

    let rows = write(dir.path(), "g.csv", "key,value\ng1,3.0\ng1,1.0\ng2,oops\n");
    let report = dir.path().join("r.json");
    let o = fpisa(&["query", "--op", "gb-sum", "--input", &rows, "--report", report.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "key,value,bits,status\ng1,4.0,0x40800000,ok\n");
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["malformed_rows"], 1);

    let big = format!("key,value\n{}", "g,3.4e38\n".repeat(140));
    let big = write(dir.path(), "big.csv", &big);
    let o = fpisa(&["query", "--op", "gb-sum", "--input", &big]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("g,,,HeadroomOverflow"));
    assert_eq!(fpisa(&["query", "--op", "gb-sum", "--input", &rows, "--variant", "approx"]).status.code(), Some(2));

    let o = fpisa(&["query", "--op", "gb-extreme", "--extreme", "min", "--input", &rows]);
    assert_eq!(stdout(&o), "key,value,bits,status\ng1,1.0,0x3F800000,ok\n");
}

#[test]
fn analyze_examples() {
    let dir = tempfile::tempdir().unwrap();
    let w: Vec<String> = [("a", "0.5\n1.0\n"), ("b", "1.0\n0.0\n"), ("c", "2.0\n3.0\n")]
        .iter()
        .map(|(n, t)| write(dir.path(), n, t))
        .collect();
    let o = fpisa(&["analyze", "--ratio", "--output-format", "json", "--workers", &w[0], &w[1], &w[2]]);
    let h: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(h["zero_containing"], 1);
    let buckets = h["buckets"].as_array().unwrap();
    let hit: Vec<_> = buckets.iter().filter(|b| b["count"] == 1).collect();
    assert_eq!(hit.len(), 1);
    assert_eq!(hit[0]["log2"], 2);

    let a = write(dir.path(), "x", "1.0\n");
    let b = write(dir.path(), "y", "256.0\n");
    let csv = stdout(&fpisa(&["analyze", "--error", "--variant", "approx", "--workers", &a, &b]));
    assert!(csv.contains("class:overwrite,1,1"));
    let out = dir.path().join("h.csv");
    fpisa(&["analyze", "--error", "--variant", "approx", "--workers", &a, &b, "--output", out.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), csv);
}
