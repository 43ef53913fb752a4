use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use lzqnd_bench::output::read_table;

const BIN: &str = env!("CARGO_BIN_EXE_lzqnd-bench");

/// Small, fast meter and window shared by the tests.
const SMALL: &str = r#"
[lz]
g = 1.0
eps = 1.0

[meter]
omega_c = 1.0
kappa = 2.0
n = 0.2
x0 = 0.5
n_max = 8

[window]
half_width = 2.0

[run]
samples = 50
"#;

fn write_config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, format!("{SMALL}\n{extra}")).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn last(p: &Path, col: &str) -> f64 {
    *read_table(p).unwrap().floats(col).unwrap().last().unwrap()
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[meter]\nkappa = 1.0\nomega = 2.0\n").unwrap();
    let out = run(&["trace", "--config", s(&bad), "--out", s(&dir.path().join("t.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("omega"), "{err}");

    let cfg = write_config(dir.path(), "c.toml", "");
    let out = run(&["trace", "--config", s(&cfg), "--set", "meter.kappa=-2", "--out", s(&dir.path().join("t.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kappa"));
}

#[test]
fn empty_gamma_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "");
    let out = run(&["trace", "--config", s(&cfg), "--set", "run.engine=ame", "--out", s(&dir.path().join("t.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma0_over_g is empty"));
}

#[test]
fn ame_trace_writes_one_file_per_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[dephasing]\ngamma0_over_g = [0.0, 0.5, 2.0, 10.0]\n");
    let out_path = dir.path().join("fig.csv");
    let out = run(&["trace", "--config", s(&cfg), "--set", "run.engine=\"ame\"", "--out", s(&out_path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let finals: Vec<f64> = ["0", "0.5", "2", "10"]
        .iter()
        .map(|r| last(&dir.path().join(format!("fig_gamma0_{r}.csv")), "P"))
        .collect();
    assert!(finals.iter().all(|p| (0.0..=1.0).contains(p)));
    // strong dephasing freezes the populations
    assert!(finals[3] < finals[0], "{finals:?}");
}

#[test]
fn decoupled_joint_trace_equals_coherent_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "");
    let joint = dir.path().join("joint.csv");
    let coherent = dir.path().join("coherent.csv");
    let common = ["--config", s(&cfg), "--set", "meter.x0=0", "--set", "run.dt=0.005"];
    assert!(run(&[&["trace"], &common[..], &["--out", s(&joint)]].concat()).status.success());
    assert!(run(&[&["trace"], &common[..], &["--set", "run.engine=coherent", "--out", s(&coherent)]].concat())
        .status
        .success());
    let (a, b) = (read_table(&joint).unwrap(), read_table(&coherent).unwrap());
    assert_eq!(a.header, b.header);
    let (ta, pa) = (a.floats("t").unwrap(), a.floats("P").unwrap());
    let (tb, pb) = (b.floats("t").unwrap(), b.floats("P").unwrap());
    let mut matched = 0;
    for (t, p) in ta.iter().zip(&pa) {
        if let Some(j) = tb.iter().position(|u| (u - t).abs() < 1e-9) {
            assert!((p - pb[j]).abs() < 1e-9, "t = {t}: {p} vs {}", pb[j]);
            matched += 1;
        }
    }
    assert!(matched >= 10, "{matched}");
    assert!((pa.last().unwrap() - pb.last().unwrap()).abs() < 1e-9);
}

#[test]
fn one_cell_sweep_equals_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[sweep]\ntask = \"continuous_t\"\n[[sweep.axes]]\nname = \"meter.kappa\"\nvalues = [2.0]\n",
    );
    let trace = dir.path().join("trace.csv");
    let sweep = dir.path().join("sweep.csv");
    assert!(run(&["trace", "--config", s(&cfg), "--out", s(&trace)]).status.success());
    let out = run(&["sweep", "--config", s(&cfg), "--out", s(&sweep)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read_table(&sweep).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.rows[0][table.column("status").unwrap()], "ok");
    assert_eq!(table.floats("T").unwrap()[0], last(&trace, "P"));
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert!(sidecar[0]["wall_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(sidecar[0]["status"], "ok");
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[sweep]\ntask = \"continuous_t\"\n[[sweep.axes]]\nname = \"meter.kappa\"\nlog = [0.5, 4.0, 3]\n[[sweep.axes]]\nname = \"meter.x0\"\nvalues = [0.0, 0.5]\n",
    );
    let bodies: Vec<String> = ["1", "3"]
        .iter()
        .map(|w| {
            let out_path = dir.path().join(format!("sweep_{w}.csv"));
            let out = run(&["sweep", "--config", s(&cfg), "--workers", w, "--out", s(&out_path)]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            read_table(&out_path).unwrap().body()
        })
        .collect();
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[0].lines().count(), 7);
}

#[test]
fn failing_sweep_cells_do_not_abort() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[sweep]\ntask = \"effective_gap\"\n[[sweep.axes]]\nname = \"meter.omega_c\"\nvalues = [0.0, 1.0]\n",
    );
    let out_path = dir.path().join("sweep.csv");
    assert!(run(&["sweep", "--config", s(&cfg), "--out", s(&out_path)]).status.success());
    let t = read_table(&out_path).unwrap();
    let status = t.column("status").unwrap();
    assert!(t.rows[0][status].starts_with("error") && t.rows[0][status].contains("omega_c"));
    assert_eq!(t.rows[1][status], "ok");
}

#[test]
fn noise_mc_is_seeded_and_self_describing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "[strobe]\ndelta_t = 0.5\nt_p = 0.1\npulse_dt = 0.005\n[noise]\ntau = 0.05\nn_it = 4\n",
    );
    let run_mc = |seed: &str, name: &str| {
        let p = dir.path().join(name);
        let out = run(&["noise-mc", "--config", s(&cfg), "--set", "meter.x0=2", "--seed", seed, "--out", s(&p)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        read_table(&p).unwrap()
    };
    let a = run_mc("7", "a.csv");
    let b = run_mc("7", "b.csv");
    let c = run_mc("8", "c.csv");
    assert_eq!(a.header, ["t", "mean_P", "stderr"]);
    assert_eq!(a.body(), b.body());
    assert_ne!(a.body(), c.body());
    let mc = a.meta.iter().find(|l| l.starts_with("mc: ")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&mc[4..]).unwrap();
    assert_eq!(json["seed"], 7);
    assert_eq!(json["amplitude_convention"], "linear");
    assert!((json["tau"].as_f64().unwrap() - 0.05).abs() < 1e-15);
}

#[test]
fn strobe_gap_and_nm_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[strobe]\ndelta_t = 1.0\nt_p = 0.1\npulse_dt = 0.005\n");
    let strobe = dir.path().join("strobe.csv");
    assert!(run(&["strobe", "--config", s(&cfg), "--out", s(&strobe)]).status.success());
    let t = read_table(&strobe).unwrap();
    assert!(t.meta.iter().any(|l| l == "pulses: 5"), "{:?}", t.meta);

    let gap = dir.path().join("gap.csv");
    assert!(run(&["gap", "--config", s(&cfg), "--out", s(&gap)]).status.success());
    assert!(read_table(&gap).unwrap().floats("delta_r").unwrap()[0].is_finite());

    let nm = dir.path().join("nm.csv");
    let out = run(&[
        "nm",
        "--config",
        s(&cfg),
        "--set",
        "run.engine=ame",
        "--set",
        "dephasing.gamma0_over_g=[0.5]",
        "--set",
        "dephasing.profile=constant",
        "--out",
        s(&nm),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta = read_table(&nm).unwrap().meta;
    let n: f64 = meta.iter().find_map(|l| l.strip_prefix("N: ")).unwrap().parse().unwrap();
    assert!(n < 1e-4, "{n}");
}

#[test]
fn verify_analytic_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let start = Instant::now();
    let out = run(&["verify", "--only", "analytic", "--out", s(&report)]);
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let checks = json[0]["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    assert!(checks.iter().all(|c| c["pass"] == true && c["bound"].is_number()));
}

#[test]
fn coarse_steps_fail_verification() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = run(&["verify", "--only", "c03", "--dt-scale", "10", "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(2));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let err = json[0]["error"].as_str().unwrap();
    assert!(err.contains("invariant violated") || err.contains("min eigenvalue"), "{err}");
}
