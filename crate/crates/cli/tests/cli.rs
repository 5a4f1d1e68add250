mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

use palate::provider::{Cassette, ChatClient, ChatRequest, Recorded};
use palate::tagger::{tag_to_coverage, CoverageConfig, DimensionSchema};

fn palate(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_palate")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = palate(args, cwd);
    assert!(
        out.status.success(),
        "palate {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(path: impl AsRef<Path>) -> Value {
    let path = path.as_ref();
    serde_json::from_str(&fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    common::write_workspace(dir.path());
    dir
}

fn curated(dir: &Path) {
    ok(
        &["consolidate", "--embeddings", "embeddings.tsv", "--map", "map.csv", "--out", "curated.tsv"],
        dir,
    );
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(palate(&["analyze", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(palate(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(palate(&["geometry", "--embeddings", "e.tsv"], dir.path()).status.code(), Some(2));
}

#[test]
fn missing_inputs_exit_with_one_and_name_the_path() {
    let dir = fixture();
    curated(dir.path());
    let out = palate(
        &["analyze", "--dimension", "sweetness", "--labels", "labels/nowhere.json", "--embeddings", "curated.tsv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("labels/nowhere.json"), "{stderr}");
}

#[test]
fn consolidate_writes_curated_matrix_and_report() {
    let dir = fixture();
    curated(dir.path());
    let tsv = fs::read_to_string(dir.path().join("curated.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 1 + 28);
    let report = read_json(dir.path().join("reports/consolidate.json"));
    assert_eq!(report["provenance"]["command"], "consolidate");
    assert_eq!(report["provenance"]["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(report["report"]["canonicals"], 28);
}

#[test]
fn analyze_reports_the_planted_gradient() {
    let dir = fixture();
    curated(dir.path());
    ok(
        &["analyze", "--dimension", "sweetness", "--labels", "labels/sweetness.json", "--embeddings", "curated.tsv"],
        dir.path(),
    );
    let report = read_json(dir.path().join("reports/sweetness.report.json"));
    let rho = report["report"]["spearman"]["statistic"].as_f64().unwrap();
    assert!(rho > 0.9, "{rho}");

    let out = palate(
        &["analyze", "--dimension", "bitterness", "--labels", "labels/sweetness.json", "--embeddings", "curated.tsv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pairs_counts_every_unordered_pair() {
    let dir = fixture();
    ok(&["pairs", "--embeddings", "embeddings.tsv", "--out", "pairs.csv"], dir.path());
    let csv = fs::read_to_string(dir.path().join("pairs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 31 * 30 / 2);
    assert_eq!(csv.lines().next(), Some("id_a,id_b,cosine"));
}

fn crossval(dir: &Path, out: &str, seed: &str) -> Vec<u8> {
    ok(
        &[
            "crossval", "--labels", "labels/sweetness.json", "--embeddings", "curated.tsv", "--k", "4",
            "--repeats", "5", "--seed", seed, "--out", out,
        ],
        dir,
    );
    fs::read(dir.join(out).join("sweetness.cv.json")).unwrap()
}

#[test]
fn crossval_is_reproducible_for_a_seed() {
    let dir = fixture();
    curated(dir.path());
    let a = crossval(dir.path(), "a", "11");
    let b = crossval(dir.path(), "b", "11");
    let c = crossval(dir.path(), "c", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let report: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["provenance"]["seed"], 11);
}

#[test]
fn noise_and_culture_write_their_tables() {
    let dir = fixture();
    ok(
        &["noise", "--embeddings", "embeddings.tsv", "--map", "map.csv", "--top-k", "2", "--seed", "3"],
        dir.path(),
    );
    let noise = read_json(dir.path().join("reports/noise.json"));
    assert!(noise["report"].is_object());
    assert!(dir.path().join("reports/noise.csv").exists());

    curated(dir.path());
    ok(
        &[
            "culture", "--embeddings", "curated.tsv", "--tags", "tags.json", "--k", "3", "--subsample", "21",
            "--iterations", "10", "--axis-labels", "labels/sweetness.json", "--n-perm", "49", "--seed", "5",
        ],
        dir.path(),
    );
    let culture = read_json(dir.path().join("reports/culture.json"));
    assert_eq!(culture["report"]["purity"]["cuisines"].as_array().unwrap().len(), 7);
    for f in ["purity.csv", "intra.csv", "purity_subsampled.csv", "profiles.csv"] {
        assert!(dir.path().join("reports").join(f).exists(), "{f}");
    }
}

#[test]
fn geometry_with_pole_plane() {
    let dir = fixture();
    curated(dir.path());
    fs::write(dir.path().join("sweet.txt"), "4\n8\n12\n").unwrap();
    fs::write(dir.path().join("savoury.txt"), "1\n5\n9\n").unwrap();
    // A second label set along a different dimension of the fixture.
    let mut labels = serde_json::Map::new();
    for c in 0..7 {
        for j in 0..4 {
            labels.insert(common::canonical_name(c, j), json!(if (c + j) % 3 == 0 { "low" } else { "high" }));
        }
    }
    let other = json!({"dimension": "other", "kind": "ordinal", "scale": ["low", "high"], "labels": labels});
    fs::write(dir.path().join("labels/other.json"), other.to_string()).unwrap();
    ok(
        &[
            "geometry", "--embeddings", "curated.tsv", "--labels", "labels/sweetness.json", "labels/other.json",
            "--coords", "coords3d.csv", "--sweet", "sweet.txt", "--savoury", "savoury.txt",
        ],
        dir.path(),
    );
    let geometry = read_json(dir.path().join("reports/geometry.json"));
    assert!(geometry["report"].is_object());
    assert!(dir.path().join("reports/axis_cosines.csv").exists());
    let projection = read_json(dir.path().join("reports/projection3d.json"));
    assert!(projection["report"].is_object());
}

fn matching_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/matching")
}

#[test]
fn match_runs_offline_from_recorded_fixtures() {
    let fx = matching_dir();
    let out = tempfile::tempdir().unwrap();
    let reports = out.path().join("reports");
    let path = |f: &str| fx.join(f).to_string_lossy().into_owned();
    ok(
        &[
            "match", "--names", &path("names.txt"), "--entries", &path("entries.csv"), "--map", &path("map.csv"),
            "--provider", &path("provider.json"), "--offline", "--measure", "energy",
            "--out", reports.to_str().unwrap(),
        ],
        out.path(),
    );
    let mut got = csv::Reader::from_path(reports.join("matches.csv")).unwrap();
    let headers = got.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (ing, entry) = (col("ingredient"), col("entry_id"));
    let got: Vec<(String, String)> =
        got.records().map(|r| r.unwrap()).map(|r| (r[ing].to_string(), r[entry].to_string())).collect();
    let mut want = csv::Reader::from_path(fx.join("expected.csv")).unwrap();
    let want: Vec<(String, String)> = want.records().map(|r| r.unwrap()).map(|r| (r[0].to_string(), r[1].to_string())).collect();
    assert_eq!(got, want);
    let energy = read_json(reports.join("energy.labels.json"));
    assert_eq!(energy["labels"]["tomato"], 18.0);
}

#[test]
fn offline_match_without_fixtures_fails() {
    let fx = matching_dir();
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("provider.json"), r#"{"base_url":"http://127.0.0.1:9","model":"m","fixtures_dir":"empty"}"#).unwrap();
    let path = |f: &str| fx.join(f).to_string_lossy().into_owned();
    let out = palate(
        &["match", "--names", &path("names.txt"), "--entries", &path("entries.csv"), "--provider", "provider.json", "--offline"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no recorded response"));
}

/// Says "yes" to every binary field for whatever names the prompt lists.
struct AllYes;

impl ChatClient for AllYes {
    fn model(&self) -> &str {
        "fixture-v1"
    }

    fn complete(&self, request: &ChatRequest) -> palate::Result<Value> {
        let schema = DimensionSchema::builtin("binary").unwrap();
        let (_, list) = request.prompt.split_once("INGREDIENTS TO CLASSIFY:").unwrap();
        let records: Vec<Value> = list
            .lines()
            .filter_map(|l| l.split_once(". ").filter(|(n, _)| n.parse::<usize>().is_ok()).map(|(_, r)| r))
            .map(|name| {
                let mut obj = serde_json::Map::new();
                obj.insert("ingredient".into(), json!(name));
                for f in &schema.fields {
                    obj.insert(f.name.clone(), json!("yes"));
                }
                Value::Object(obj)
            })
            .collect();
        Ok(Value::Array(records))
    }
}

#[test]
fn tag_runs_offline_from_recorded_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let names: Vec<String> = (0..7).map(|i| format!("ingredient {i}")).collect();
    fs::write(dir.path().join("names.txt"), names.join("\n")).unwrap();
    fs::write(
        dir.path().join("provider.json"),
        r#"{"base_url":"http://127.0.0.1:9","model":"fixture-v1","fixtures_dir":"cassette"}"#,
    )
    .unwrap();
    let schema = DimensionSchema::builtin("binary").unwrap().with_batch_size(3);
    let recorder = Recorded::record("fixture-v1", AllYes, Cassette::new(dir.path().join("cassette")));
    tag_to_coverage(&names, &schema, &recorder, CoverageConfig::default()).unwrap();

    ok(
        &[
            "tag", "--family", "binary", "--names", "names.txt", "--batch-size", "3", "--provider", "provider.json",
            "--offline",
        ],
        dir.path(),
    );
    let summary = read_json(dir.path().join("reports/binary.tag.json"));
    assert_eq!(summary["report"]["labeled"], 7);
    assert_eq!(summary["report"]["rounds"], 1);
    let sour = read_json(dir.path().join("reports/sour.labels.json"));
    assert_eq!(sour["labels"].as_object().unwrap().len(), 7);
    let transcripts = fs::read_to_string(dir.path().join("reports/binary.transcripts.jsonl")).unwrap();
    assert_eq!(transcripts.lines().count(), 3);

    // A different batch size changes the prompts, so nothing is recorded for it.
    let out = palate(
        &["tag", "--family", "binary", "--names", "names.txt", "--batch-size", "4", "--provider", "provider.json", "--offline"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}
