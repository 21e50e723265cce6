use std::fs;
use std::process::{Command, Output};

fn scpir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scpir"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn run_reports_partition_rate() {
    let out = scpir(&["run", "--n", "4", "--k", "3", "--mu", "1/2", "--engine", "a"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["rate"]["measured_rate"], "4/7");
    assert_eq!(report["rate"]["downloads"], 28);
    assert_eq!(report["decoded_ok"], 1);
    assert_eq!(report["at_capacity"], 1);
}

#[test]
fn run_from_config_file_writes_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"N":5,"K":2,"t":"3","placement":"cyclic","engine":"b","seed":3,"trials":4}"#).unwrap();
    let tdir = dir.path().join("tr");
    let out = scpir(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--transcripts",
        tdir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_dir(&tdir).unwrap().count(), 4);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["rate"]["measured_rate"], "3/4");
}

#[test]
fn same_seed_gives_identical_output() {
    let args = ["run", "--n", "5", "--k", "3", "--t", "5/2", "--theta", "uniform", "--trials", "5", "--seed", "42"];
    let a = scpir(&args);
    let b = scpir(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let (x, y) = (dir.path().join("x"), dir.path().join("y"));
    for d in [&x, &y] {
        let out = scpir(&["run", "--n", "4", "--k", "2", "--t", "2", "--trials", "3", "--theta", "uniform", "--transcripts", d.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
    }
    for entry in fs::read_dir(&x).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(fs::read(x.join(&name)).unwrap(), fs::read(y.join(&name)).unwrap());
    }
}

#[test]
fn conflicting_or_missing_parameters_exit_two() {
    assert_eq!(code(&scpir(&["run", "--n", "4", "--k", "3", "--mu", "1/2", "--t", "2"])), 2);
    assert_eq!(code(&scpir(&["run", "--n", "4", "--k", "3"])), 2);
    assert_eq!(code(&scpir(&["run", "--n", "4", "--k", "3", "--t", "5"])), 2);
    assert_eq!(code(&scpir(&["run", "--n", "5", "--k", "2", "--t", "2", "--placement", "partition"])), 2);
    assert_eq!(code(&scpir(&["run", "--n", "4", "--k", "3", "--t", "2", "--l", "7"])), 2);
    assert_eq!(code(&scpir(&["bogus"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"N":4,"K":2,"t":"2","colour":"red"}"#).unwrap();
    assert_eq!(code(&scpir(&["run", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn sweep_csv_has_header_and_capacity_rows() {
    let out = scpir(&["sweep", "--n", "4", "--k", "3", "--t-grid", "1,3/2,2,5/2,3,4"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t_num,t_den,K,N,rate_p,rate_q,capacity_p,capacity_q,L,L_baseline,D,length_ratio_p,length_ratio_q,rate_f64,capacity_f64"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[2].starts_with("2,1,3,4,4,7,4,7,16,48,28,1,3,"), "{}", rows[2]);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!((f[4], f[5]), (f[6], f[7]));
    }
}

#[test]
fn sweep_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.json");
    let out = scpir(&["sweep", "--n", "3", "--k", "2", "--format", "json", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 5);
}

#[test]
fn audit_passes_and_detects_broken_symmetry() {
    let ok = scpir(&["audit", "--n", "3", "--k", "2", "--t", "3", "--engine", "b", "--placement", "partition", "--mode", "exhaustive"]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    let v: serde_json::Value = serde_json::from_str(&stdout(&ok)).unwrap();
    assert_eq!(v["max_tv"], "0/1");

    let broken = scpir(&[
        "audit", "--n", "3", "--k", "2", "--t", "3", "--engine", "b", "--placement", "partition", "--mode", "exhaustive",
        "--break-symmetry",
    ]);
    assert_eq!(code(&broken), 1);

    let leak = scpir(&["audit", "--n", "4", "--k", "2", "--t", "2", "--trials", "500", "--mutant", "desired-only"]);
    assert_eq!(code(&leak), 1);
    assert_eq!(code(&scpir(&["audit", "--n", "4", "--k", "2", "--t", "2", "--mutant", "nonsense"])), 2);
}

#[test]
fn audit_budget_overflow_is_a_usage_error() {
    let out = scpir(&["audit", "--n", "4", "--k", "3", "--t", "2", "--mode", "exhaustive", "--budget", "10"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn placement_roundtrip_and_validation() {
    let out = scpir(&["placement", "--n", "5", "--t", "5/2", "--k", "2"]);
    assert_eq!(code(&out), 0);
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["placement"]["F"], 10);
    assert_eq!(summary["validation"]["valid"], true);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    fs::write(&path, summary["placement"].to_string()).unwrap();
    assert_eq!(code(&scpir(&["placement", "--from", path.to_str().unwrap(), "--k", "2"])), 0);

    // two databases overloaded
    fs::write(&path, r#"{"N":3,"F":2,"t":"1","alpha":["1/2","1/2"],"groups":[[1,2],[1,2]]}"#).unwrap();
    let bad = scpir(&["placement", "--from", path.to_str().unwrap(), "--k", "2"]);
    assert_eq!(code(&bad), 1, "{}", stdout(&bad));
}

#[test]
fn capacity_command() {
    let out = scpir(&["capacity", "--n", "5", "--k", "2", "--t", "5/2"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["capacity"], "12/17");
    assert_eq!(v["min_message_length"], 60);
    let out = scpir(&["capacity", "--n", "4", "--k", "3", "--mu", "1/2"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!((v["min_message_length"].as_u64(), v["baseline_message_length"].as_u64()), (Some(16), Some(48)));
}
