use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

const REPRESSILATOR: &str = r#"
seed = 11
[model]
kind = "repressilator"
cost = { kind = "work", seconds_per_unit = 1e-6 }
[benchmark]
rows = 10
"#;

const TOY: &str = r#"
seed = 5
[model]
kind = "toy"
p_tp = 0.10
p_fp = 0.02
p_fn = 0.03
cost_lo = 1.0
c_p = 2.0
c_n = 6.0
"#;

fn mfabc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfabc")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run_ok(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = mfabc(&args);
    assert!(o.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let i = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[i].to_string()).collect()
}

#[test]
fn benchmark_writes_table_and_hashed_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "rep.toml", REPRESSILATOR);
    let out = dir.path().join("out");
    let m = run_ok("benchmark", &cfg, &out, &[]);
    let rows = csv_rows(&out.join("benchmark.csv"));
    assert_eq!(rows.len(), 10);
    let header = csv::Reader::from_path(out.join("benchmark.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["index", "n", "K_h", "d_lo", "d_hi", "cost_lo", "cost_hi", "w_lo", "w_hi", "u"]
    );
    let files = m["files"].as_array().unwrap();
    assert!(files.len() >= 2);
    for f in files {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    assert_eq!(m["seed"], 11);
    assert!(m["streams"]["campaign"].as_str().unwrap().contains("campaign/index-"));
}

#[test]
fn nonpositive_threshold_exits_2_with_field_path() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &format!("{REPRESSILATOR}[distance]\neps_hi = -1.0\n"));
    let out = dir.path().join("out");
    let o = mfabc(&["benchmark", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("distance.eps_hi"));
    assert!(!out.exists(), "nothing written before validation");
}

#[test]
fn unknown_key_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &format!("{REPRESSILATOR}colour = \"red\"\n"));
    let o = mfabc(&["benchmark", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn missing_config_exits_3() {
    let o = mfabc(&["benchmark", "--config", "/nonexistent/mfabc.toml"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn benchmark_is_byte_identical_across_runs_and_workers() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "rep.toml", REPRESSILATOR);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok("benchmark", &cfg, &a, &["--workers", "1"]);
    run_ok("benchmark", &cfg, &b, &["--workers", "3"]);
    assert_eq!(fs::read(a.join("benchmark.csv")).unwrap(), fs::read(b.join("benchmark.csv")).unwrap());
    let c = dir.path().join("c");
    run_ok("benchmark", &cfg, &c, &["--seed", "12"]);
    assert_ne!(fs::read(a.join("benchmark.csv")).unwrap(), fs::read(c.join("benchmark.csv")).unwrap());
}

#[test]
fn tiny_budget_stops_after_a_handful_of_records() {
    let dir = TempDir::new().unwrap();
    let text = format!("{REPRESSILATOR}[campaign]\neta = {{ kind = \"fixed\", eta1 = 0.5, eta2 = 0.2 }}\nstop = {{ budget = {{ seconds = 0.001 }} }}\n");
    let cfg = write_config(dir.path(), "run.toml", &text);
    let out = dir.path().join("out");
    let m = run_ok("run", &cfg, &out, &[]);
    let n = m["summary"]["sample"]["n"].as_u64().unwrap();
    assert!((1..=5).contains(&n), "{n} records");
    assert_eq!(csv_rows(&out.join("campaign.csv")).len() as u64, n);
    assert!(m["files"].as_array().unwrap().iter().any(|f| f["path"] == "campaign.csv"));
}

#[test]
fn adaptive_run_records_full_eta_trace() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "{TOY}[campaign]\neta = {{ kind = \"adaptive\", burn_in = 100, freeze_after = 0 }}\nstop = {{ count = 1500 }}\n"
    );
    let cfg = write_config(dir.path(), "adapt.toml", &text);
    let out = dir.path().join("out");
    let m = run_ok("run", &cfg, &out, &[]);
    let trace = m["eta_trace"].as_array().unwrap();
    let gate = m["summary"]["gate_after"].as_u64().unwrap();
    // one point per record from the one that opened the gate onwards
    assert_eq!(trace.len() as u64, 1500 - gate + 1);
    assert_eq!(trace[0]["index"].as_u64().unwrap(), gate - 1);
    assert_eq!(csv_rows(&out.join("eta_trace.csv")).len(), trace.len());
    let last = trace.last().unwrap();
    assert_eq!(last["eta1"], m["summary"]["final_eta"]["eta1"]);
}

#[test]
fn runs_are_reproducible_under_work_cost() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "{REPRESSILATOR}[campaign]\neta = {{ kind = \"fixed\", eta1 = 0.5, eta2 = 0.5 }}\nstop = {{ count = 8 }}\n"
    );
    let cfg = write_config(dir.path(), "run.toml", &text);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok("run", &cfg, &a, &[]);
    run_ok("run", &cfg, &b, &["--workers", "2"]);
    assert_eq!(fs::read(a.join("campaign.csv")).unwrap(), fs::read(b.join("campaign.csv")).unwrap());
}

#[test]
fn tune_report_feeds_an_optimal_campaign() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "tune.toml", &format!("{TOY}[benchmark]\nrows = 5000\n"));
    let tuned = dir.path().join("tuned");
    let m = run_ok("tune", &cfg, &tuned, &[]);
    let eta = &m["summary"]["report"]["eta"];
    assert!(tuned.join("tuning.json").exists() && tuned.join("eta_grid.csv").exists());
    let report = tuned.join("tuning.json");
    let text = format!(
        "{TOY}[campaign]\neta = {{ kind = \"optimal\", report = \"{}\" }}\nstop = {{ count = 50 }}\n",
        report.display()
    );
    let run_cfg = write_config(dir.path(), "run.toml", &text);
    let m2 = run_ok("run", &run_cfg, &dir.path().join("run"), &[]);
    assert_eq!(m2["summary"]["initial_eta"]["eta1"], eta["eta1"]);
    assert_eq!(m2["summary"]["initial_eta"]["eta2"], eta["eta2"]);
}

#[test]
fn efficiency_study_shapes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "b.toml", &format!("{TOY}[benchmark]\nrows = 100\n"));
    let bench = dir.path().join("bench");
    run_ok("benchmark", &cfg, &bench, &[]);
    let text = format!(
        r#"{TOY}
[study]
kind = "efficiency"
table = "bench/benchmark.csv"
subsample_size = 20
repeats = 5
settings = [
  {{ label = "a", eta1 = 1.0, eta2 = 1.0 }},
  {{ label = "b", eta1 = 1.0, eta2 = 0.5 }},
  {{ label = "c", eta1 = 0.5, eta2 = 0.5 }},
  {{ label = "d", eta1 = 0.5, eta2 = 0.2 }},
  {{ label = "e", eta1 = 0.2, eta2 = 0.2 }},
]
"#
    );
    let scfg = write_config(dir.path(), "s.toml", &text);
    let out = dir.path().join("study");
    run_ok("study", &scfg, &out, &[]);
    let settings = column(&out.join("efficiency.csv"), "setting");
    assert_eq!(settings.len(), 25);
    for l in ["a", "b", "c", "d", "e"] {
        assert_eq!(settings.iter().filter(|s| *s == l).count(), 5);
    }
    let ex = csv_rows(&out.join("exceedance.csv"));
    assert_eq!(ex.len(), 5);
    assert!(ex.iter().all(|r| r.len() == 6));
    for r in &ex {
        for v in r.iter().skip(1) {
            let p: f64 = v.parse().unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
    }
}

#[test]
fn constant_function_has_zero_variance() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        r#"{TOY}
[benchmark]
rows = 2000
[study]
kind = "variance"
repeats = 20
budget = 200.0
functions = [{{ name = "one", function = {{ kind = "constant", value = 1.0 }} }}]
"#
    );
    let cfg = write_config(dir.path(), "v.toml", &text);
    let out = dir.path().join("out");
    run_ok("study", &cfg, &out, &[]);
    let v = column(&out.join("variance.csv"), "variance");
    assert!(v.len() >= 5);
    assert!(v.iter().all(|x| x.parse::<f64>().unwrap() == 0.0), "{v:?}");
    // rerun is identical
    let again = dir.path().join("again");
    run_ok("study", &cfg, &again, &[]);
    assert_eq!(fs::read(out.join("variance.csv")).unwrap(), fs::read(again.join("variance.csv")).unwrap());
}

#[test]
fn burn_in_study_runs_on_a_small_table() {
    let dir = TempDir::new().unwrap();
    let text = format!("{TOY}[benchmark]\nrows = 2000\n[study]\nkind = \"burn_in\"\nrepeats = 10\n");
    let cfg = write_config(dir.path(), "b.toml", &text);
    let out = dir.path().join("out");
    let m = run_ok("study", &cfg, &out, &[]);
    assert_eq!(m["summary"]["burn_in"], 100);
    assert_eq!(m["summary"]["adaptive_len"], 100);
    let phases = column(&out.join("burn_in_efficiency.csv"), "phase");
    assert_eq!(phases.len(), 30);
}

#[test]
fn dry_run_prints_plan_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "rep.toml", REPRESSILATOR);
    let out = dir.path().join("out");
    let o = mfabc(&["benchmark", "--dry-run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let plan: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(plan["command"], "benchmark");
    assert!(plan["steps"][0].as_str().unwrap().contains("10 benchmark rows"));
    assert!(!out.exists());
}

#[test]
fn json_config_is_accepted() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"seed": 2, "model": {"kind": "toy", "p_tp": 0.1, "p_fp": 0.02, "p_fn": 0.03, "cost_lo": 1, "c_p": 2, "c_n": 6},
            "campaign": {"method": "rejection", "stop": {"count": 20}}}"#,
    );
    let out = dir.path().join("out");
    let m = run_ok("run", &cfg, &out, &[]);
    assert_eq!(m["summary"]["sample"]["n"], 20);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cmd = match path.file_stem().unwrap().to_str().unwrap() {
            s if s.ends_with("benchmark") => "benchmark",
            s if s.ends_with("tune") => "tune",
            s if s.ends_with("adaptive") => "run",
            _ => "study",
        };
        let o = mfabc(&[cmd, "--dry-run", "--config", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
        n += 1;
    }
    assert!(n >= 5);
}
