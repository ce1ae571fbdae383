use std::path::Path;
use std::process::Command;

use biggins_cli::{load, parse_config, run, ExitStatus, Experiment, ExperimentReport, Overrides};

const GW: &str = "[model]\nkind = GaltonWatsonEmbedding\ngw_pmf = \"0:0,1:0.5,2:0.5\"\n";
const BG: &str = "[model]\nkind = BinaryGaussian\ntau2 = 0.25\n";

fn biggins(dir: &Path, args: &[&str], envs: &[(&str, &str)]) -> (i32, String, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_biggins"));
    cmd.current_dir(dir).args(args).env_remove("BIGGINS_SEED").env_remove("BIGGINS_WORKERS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn moments_exit_zero_and_print_json() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.conf", &format!("experiment = moments\n{GW}"));
    let (code, stdout, _) = biggins(dir.path(), &["moments", "--config", "m.conf"], &[]);
    assert_eq!(code, 0);
    let report: ExperimentReport = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report.schema, 1);
    assert!(report.tests.is_empty());
    let m2 = report.statistics["moments"]["m2"].as_f64().unwrap();
    assert!((m2 - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(report.statistics["proxy_depth"], 12);
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.conf", "model.kind = BinaryGaussian\nmodel.tau2 = 0.8\n");
    let (code, _, stderr) = biggins(dir.path(), &["clt-cov", "--config", "bad.conf"], &[]);
    assert_eq!(code, 2);
    assert!(stderr.contains("(ii)"), "{stderr}");

    write(dir.path(), "dup.conf", "model.kind = BinaryGaussian\nmodel.tau2 = 0.25\nmodel.tau2 = 0.3\n");
    let (code, _, stderr) = biggins(dir.path(), &["moments", "--config", "dup.conf"], &[]);
    assert_eq!(code, 2);
    assert!(stderr.contains("line 3"), "{stderr}");

    let (code, _, _) = biggins(dir.path(), &["nonsense", "--config", "dup.conf"], &[]);
    assert_eq!(code, 2);
    let (code, _, _) = biggins(dir.path(), &["moments", "--config", "missing.conf"], &[]);
    assert_eq!(code, 2);
    write(dir.path(), "ok.conf", &format!("experiment = moments\n{BG}"));
    let (code, _, _) = biggins(dir.path(), &["moments", "--config", "ok.conf", "--workers", "0"], &[]);
    assert_eq!(code, 2);
}

#[test]
fn statistical_failure_exits_one() {
    // 5 steps are far too few for V(x)/x to approach c_a at x = e^8
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "r.conf", &format!("{BG}[params]\nx_grid = 8\nn_max = 5\npaths = 2000\n"));
    let (code, stdout, stderr) = biggins(dir.path(), &["renewal", "--config", "r.conf"], &[]);
    assert_eq!(code, 1, "{stderr}");
    let report: ExperimentReport = serde_json::from_str(&stdout).unwrap();
    assert!(!report.pass);
    assert!(report.error.is_none());
}

#[test]
fn runtime_error_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "cap.conf", &format!("cap = 100\n{GW}[params]\nN = 20\nM = 10\n"));
    let (code, stdout, stderr) = biggins(dir.path(), &["simulate", "--config", "cap.conf"], &[]);
    assert_eq!(code, 3, "{stderr}");
    let report: ExperimentReport = serde_json::from_str(&stdout).unwrap();
    assert!(report.error.as_deref().unwrap().contains("cap"));
}

#[test]
fn seed_precedence_flag_env_config() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.conf", &format!("seed = 5\n{GW}[params]\nM = 50\nN = 3\nboot = 20\n"));
    let seed_of = |args: &[&str], envs: &[(&str, &str)]| {
        let mut all = vec!["simulate", "--config", "s.conf"];
        all.extend_from_slice(args);
        let (_, stdout, _) = biggins(dir.path(), &all, envs);
        let report: ExperimentReport = serde_json::from_str(&stdout).unwrap();
        (report.seed, report.workers)
    };
    assert_eq!(seed_of(&[], &[]), (5, 1));
    assert_eq!(seed_of(&[], &[("BIGGINS_SEED", "9"), ("BIGGINS_WORKERS", "3")]), (9, 3));
    assert_eq!(seed_of(&["--seed", "11"], &[("BIGGINS_SEED", "9")]), (11, 1));
}

#[test]
fn out_directory_holds_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.conf", &format!("{GW}[params]\nM = 40\nN = 4\nboot = 20\n"));
    let (code, stdout, _) = biggins(dir.path(), &["simulate", "--config", "s.conf", "--out", "runs"], &[]);
    assert!(code == 0 || code == 1);
    let report: ExperimentReport = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report.raw_files.len(), 1);
    let csv_name = &report.raw_files[0];
    assert!(csv_name.contains(&report.config_hash[..12]));
    let csv = std::fs::read_to_string(dir.path().join("runs").join(csv_name)).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "tree,survived,W0,W1,W2,W3,W4,W2_4");
    assert_eq!(csv.lines().count(), 41);
    let json_name = format!("simulate-{}.json", &report.config_hash[..12]);
    let saved: ExperimentReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("runs").join(json_name)).unwrap()).unwrap();
    assert_eq!(saved.statistics_section(), report.statistics_section());
}

fn section(text: &str, experiment: Experiment, workers: usize) -> serde_json::Value {
    let cfg = load(text, experiment, &Overrides { workers: Some(workers), ..Overrides::default() }).unwrap();
    run(&cfg).statistics_section()
}

#[test]
fn reports_identical_across_worker_counts() {
    let cases = [
        (Experiment::Simulate, format!("seed = 3\n{BG}[params]\nM = 300\nN = 4\nboot = 50\n")),
        (Experiment::CltCov, format!("seed = 4\n{GW}[params]\nlevels = 2, 3\nd = 2\nR = 4\nM = 300\nboot = 30\n")),
        (Experiment::Renewal, format!("seed = 5\n{BG}[params]\nx_grid = 1, 2\nn_max = 30\npaths = 3000\n")),
        (Experiment::BerryEsseen, format!("seed = 6\n{GW}[params]\nlevels = 3, 5\nK = 200\nsamples = 100\ntrees = 3\nvar_levels = 5\nvar_trees = 3\nR = 3\n")),
    ];
    for (e, text) in &cases {
        let one = section(text, *e, 1);
        assert_eq!(one, section(text, *e, 1), "{e} repeat");
        assert_eq!(one, section(text, *e, 8), "{e} across workers");
    }
}

#[test]
fn report_records_resolved_config() {
    let text = format!("{BG}[params]\nM = 30\nN = 2\nboot = 10\n");
    let cfg = load(&text, Experiment::Simulate, &Overrides { seed: Some(77), ..Overrides::default() }).unwrap();
    let report = run(&cfg);
    let again = parse_config(&report.config, None).unwrap();
    assert_eq!(again.seed, 77);
    assert_eq!(again, cfg);
    assert_eq!(ExitStatus::of(&report) == ExitStatus::RuntimeError, report.error.is_some());
}
