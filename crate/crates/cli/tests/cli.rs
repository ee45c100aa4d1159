use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use stickpost_cli::report::decode_verify_report;

fn stickpost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stickpost"))
        .args(args)
        .env_remove("STICKPOST_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn theorem1_json_report() {
    let o = stickpost(&["verify-theorem1", "--c", "1", "--samples", "20000", "--seed", "7", "--moments-max", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = decode_verify_report(&stdout(&o)).unwrap();
    assert_eq!(doc.metadata.tool, "stickpost");
    assert_eq!(doc.body.command, "verify-theorem1");
    assert!(doc.body.all_pass);
    let moments = doc.body.reports.iter().filter(|r| r.name.contains(".moment.")).count();
    assert_eq!(moments, 3);
    assert!(doc.body.reports.len() >= 3);
    assert_eq!(doc.body.config["seed"], 7);
    assert_eq!(doc.body.config["c"], 1.0);
}

#[test]
fn sample_prior_csv_sums_to_one() {
    let o = stickpost(&["sample-prior", "--c", "2", "--epsilon", "1e-10", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rd.headers().unwrap(), vec!["draw", "kind", "atom", "weight"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    let total: f64 = rows.iter().map(|r| r[3].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12, "{total}");
    assert_eq!(rows.iter().filter(|r| &r[1] == "tail").count(), 1);
    assert!(rows.iter().all(|r| {
        let a: f64 = r[2].parse().unwrap();
        a > 0.0 && a < 1.0
    }));
}

#[test]
fn sample_posterior_carries_the_observation() {
    let o = stickpost(&["sample-posterior", "--c", "1", "--x", "0.25", "--draws", "3", "--format", "json", "--k", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let draws = v["body"]["draws"].as_array().unwrap();
    assert_eq!(draws.len(), 3);
    for d in draws {
        let recs = d["records"].as_array().unwrap();
        assert_eq!(recs[0]["kind"], "observed");
        assert_eq!(recs[0]["atom"], 0.25);
        let total: f64 = recs.iter().map(|r| r["weight"].as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(d["posterior"]["sticks"].as_array().unwrap().len() <= 4);
        assert_eq!(d["posterior"]["w_x"], recs[0]["weight"]);
    }
}

#[test]
fn lemma3_two_cell_means() {
    let o = stickpost(&["verify-lemma3", "--c", "1", "--x", "0.25", "--partition", "0.5", "--samples", "20000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = decode_verify_report(&stdout(&o)).unwrap();
    let mean = |name: &str| doc.body.reports.iter().find(|r| r.name == name).unwrap().reference;
    assert!((mean("lemma3.mean.A1") - 0.75).abs() < 1e-12);
    assert!((mean("lemma3.mean.A2") - 0.25).abs() < 1e-12);
}

#[test]
fn missing_observation_is_a_config_error() {
    for cmd in ["sample-posterior", "verify-lemma3"] {
        let o = stickpost(&[cmd, "--samples", "5000"]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("--x"));
    }
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocked = dir.path().join("missing").join("out.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["verify-everything"],
        vec!["verify-theorem1", "--c", "0"],
        vec!["verify-theorem1", "--c", "-1"],
        vec!["verify-theorem1", "--samples", "10"],
        vec!["sample-prior", "--epsilon", "1.5"],
        vec!["verify-theorem4", "--pair", "1,2"],
        vec!["verify-theorem2", "--levels", "1,x"],
        vec!["sample-prior", "--output", blocked.to_str().unwrap()],
    ];
    for args in cases {
        let o = stickpost(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn failing_verdict_exits_with_one() {
    // A zero-width acceptance band fails every moment comparison.
    let o = stickpost(&["verify-theorem1", "--samples", "5000", "--se-multiplier", "1e-9"]);
    assert_eq!(o.status.code(), Some(1));
    let doc = decode_verify_report(&stdout(&o)).unwrap();
    assert!(!doc.body.all_pass);
}

#[test]
fn bodies_are_identical_across_runs_and_workers() {
    let args = |w: &'static str| {
        vec!["verify-theorem4", "--c", "2", "--samples", "30000", "--seed", "3", "--workers", w, "--format", "csv"]
    };
    let a = stickpost(&args("1"));
    let b = stickpost(&args("1"));
    let c = stickpost(&args("4"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);

    let j1 = json(&stickpost(&["verify-lemma2", "--samples", "20000", "--workers", "1"]));
    let j3 = json(&stickpost(&["verify-lemma2", "--samples", "20000", "--workers", "3"]));
    assert_eq!(
        serde_json::to_string(&j1["body"]).unwrap(),
        serde_json::to_string(&j3["body"]).unwrap()
    );
    assert_eq!(j3["metadata"]["workers"], 3);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "c = 2.0\nsamples = 5000\nseed = 11\nlevels = [1, 3]\n").unwrap();
    let o = stickpost(&["verify-theorem2", "--config", path.to_str().unwrap(), "--c", "1"]);
    assert_ne!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    let cfg = &v["body"]["config"];
    assert_eq!(cfg["c"], 1.0);
    assert_eq!(cfg["samples"], 5000);
    assert_eq!(cfg["seed"], 11);
    assert_eq!(cfg["levels"], serde_json::json!([1, 3]));

    std::fs::write(&path, "colour = 'blue'\n").unwrap();
    let o = stickpost(&["verify-theorem2", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_from_environment() {
    let with_env = Command::new(env!("CARGO_BIN_EXE_stickpost"))
        .args(["sample-prior", "--draws", "2"])
        .env("STICKPOST_SEED", "5")
        .output()
        .unwrap();
    let with_flag = stickpost(&["sample-prior", "--draws", "2", "--seed", "5"]);
    let default = stickpost(&["sample-prior", "--draws", "2"]);
    assert_eq!(with_env.stdout, with_flag.stdout);
    assert_ne!(with_env.stdout, default.stdout);
}

#[test]
fn ecdf_dump_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let ecdf = dir.path().join("ecdf.txt");
    let o = stickpost(&[
        "verify-theorem1",
        "--samples",
        "5000",
        "--output",
        report.to_str().unwrap(),
        "--ecdf-dump",
        ecdf.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert!(decode_verify_report(&std::fs::read_to_string(&report).unwrap()).is_ok());
    check_ecdf(&ecdf, "# theorem1.w_x.ks");
}

fn check_ecdf(path: &Path, header: &str) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with(header), "{}", &text[..text.len().min(80)]);
    let mut last = 0.0;
    for line in text.lines().skip(1).take_while(|l| !l.is_empty()) {
        let cols: Vec<f64> = line.split(' ').map(|t| t.parse().unwrap()).collect();
        assert_eq!(cols.len(), 2);
        assert!(cols[1] > last && cols[1] <= 1.0);
        last = cols[1];
    }
    assert_eq!(last, 1.0);
}
