//! End-to-end tests of the `chlab` binary.

use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use chlab::diagnostics::{read_csv, CSV_HEADER};
use chlab::runner::{read_checkpoint, read_state_file, CHECKPOINT_FILE, CSV_FILE, STEADY_FILE};

fn chlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chlab")).args(args).current_dir(dir).output().unwrap()
}

const BASE: &str = "dim = 1\nn = 32\neps_u = 0.05\neps_v = 0.05\ntheta_u = 0.6\ntheta_v = 0.6\nsigma = 1\nc = 0.1\nmean_v = -0.1\ntau = 1e-3\nsnapshot_stride = 10\nseed = 9\nout_dir = out\n";

/// `BASE` with the keys of `extra` replaced.
fn write_config(dir: &Path, extra: &str) {
    let key = |line: &str| line.split('=').next().unwrap().trim().to_string();
    let overridden: Vec<String> = extra.lines().map(key).collect();
    let mut text: String = BASE.lines().filter(|l| !overridden.contains(&key(l))).map(|l| format!("{l}\n")).collect();
    text.push_str(extra);
    fs::write(dir.join("run.cfg"), text).unwrap();
}

fn rows(dir: &Path) -> Vec<chlab::diagnostics::DiagnosticsRecord> {
    read_csv(BufReader::new(fs::File::open(dir.join("out").join(CSV_FILE)).unwrap())).unwrap()
}

#[test]
fn zero_length_run_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "t_end = 0\n");
    let out = chlab(&["run", "run.cfg"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out").join(CSV_FILE)).unwrap();
    assert_eq!(csv, format!("{CSV_HEADER}\n"));
    assert_eq!(read_checkpoint(&dir.path().join("out").join(CHECKPOINT_FILE)).unwrap().step, 0);
}

#[test]
fn run_header_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.cfg"), "# all defaults\nt_end = 0\nout_dir = out\n").unwrap();
    let out = chlab(&["run", "empty.cfg"], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    for line in ["# theta0_u = 1.0", "# n = 64,64", "# init_kind = constant_plus_noise", "# adaptive = true"] {
        assert!(stdout.contains(line), "{line} missing from\n{stdout}");
    }
}

#[test]
fn config_errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "c = 1.5\ntau = -1\nbogus = 1\n");
    let out = chlab(&["run", "--strict", "run.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let summary: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(summary["kind"], "Config");
    let details: Vec<&str> = summary["details"].as_array().unwrap().iter().map(|d| d.as_str().unwrap()).collect();
    assert_eq!(details.len(), 3, "{details:?}");
    assert!(details.iter().any(|d| d.contains("`c`") && d.contains("|c| < 1")));

    // Relaxed mode turns the unknown key into a warning only.
    write_config(dir.path(), "t_end = 0\nbogus = 1\n");
    let out = chlab(&["run", "run.cfg"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: line"));
}

#[test]
fn missing_file_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = chlab(&["run", "nope.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let summary: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(summary["kind"], "Io");
}

#[test]
fn resume_reproduces_uninterrupted_run() {
    let full = tempfile::tempdir().unwrap();
    write_config(full.path(), "t_end = 0.05\n");
    assert!(chlab(&["run", "run.cfg"], full.path()).status.success());
    let reference = rows(full.path());
    assert_eq!(reference.len(), 50);

    let split = tempfile::tempdir().unwrap();
    write_config(split.path(), "t_end = 0.05\n");
    let out = chlab(&["run", "run.cfg", "--max-steps", "23"], split.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"completed\":false"));
    assert_eq!(rows(split.path()).len(), 23);
    let out = chlab(&["resume", "out/checkpoint.chk"], split.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let resumed = rows(split.path());
    assert_eq!(resumed.len(), reference.len());

    let columns = |r: &chlab::diagnostics::DiagnosticsRecord| {
        let mut c = vec![r.t, r.step as f64, r.mass_u, r.mass_v, r.psi, r.psi_hat, r.psi_tilde, r.grad_mu_sq];
        c.extend([r.grad_phitilde_sq, r.oono_source, r.min_u, r.max_u, r.min_v, r.max_v]);
        c.extend([r.energy_residual.unwrap_or(0.0), r.steady_res_u, r.steady_res_v]);
        c
    };
    let (a, b) = (columns(reference.last().unwrap()), columns(resumed.last().unwrap()));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-9, "{a:?}\n{b:?}");
    }
}

#[test]
fn resume_drops_rows_after_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "t_end = 0.03\n");
    assert!(chlab(&["run", "run.cfg", "--max-steps", "10"], dir.path()).status.success());
    // Pretend the run went on past the checkpoint before dying.
    let csv_path = dir.path().join("out").join(CSV_FILE);
    let mut text = fs::read_to_string(&csv_path).unwrap();
    let last = text.lines().last().unwrap().replacen("10,", "11,", 1);
    text.push_str(&last);
    text.push('\n');
    fs::write(&csv_path, text).unwrap();
    assert!(chlab(&["resume", "out/checkpoint.chk"], dir.path()).status.success());
    let steps: Vec<u64> = rows(dir.path()).iter().map(|r| r.step).collect();
    assert_eq!(steps, (1..=30).collect::<Vec<_>>());
}

#[test]
fn steady_writes_tagged_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "t_end = 0.5\ntau = 5e-3\n");
    let out = chlab(&["steady", "run.cfg"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(String::from_utf8(out.stdout).unwrap().lines().last().unwrap()).unwrap();
    assert_eq!(summary["status"], "ok");
    let (state, headers) = read_state_file(&dir.path().join("out").join(STEADY_FILE)).unwrap();
    assert!(headers.iter().all(|h| h.has_tag("STEADY") && h.attr("mu_u").is_some()));
    assert!((state.v.mean() - 0.1).abs() < 1e-10);
    assert!(headers[0].attr_f64("res_u").unwrap() <= 1e-8);
}

#[test]
fn check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = chlab(&["check"], dir.path());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert!(stdout.lines().count() > 10);
}
