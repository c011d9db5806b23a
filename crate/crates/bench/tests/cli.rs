//! End-to-end behaviour of the `svibench` binary.

use std::path::Path;
use std::process::{Command, Output};

fn svibench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svibench")).args(args).output().expect("svibench runs")
}

fn config_path(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name).display().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// The `h` and `e_l2` columns of a result CSV, as written.
fn error_columns(path: &Path) -> Vec<(String, String)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_owned(), f.next().unwrap().to_owned())
        })
        .collect()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["run"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--reps", "1", "--out", dir.to_str().unwrap()]);
    svibench(&all)
}

#[test]
fn presets_lists_every_system_with_its_horizon() {
    let out = svibench(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["harmonic-1dof-paper", "linear-4dof-paper", "damped-paper", "pendulum-single-paper", "pendulum-double-paper"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing from\n{text}");
    }
    assert!(text.contains("T =   300 s"));
}

#[test]
fn the_harmonic_config_writes_one_csv_and_sidecar_per_integrator() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &[&config_path("fig1_harmonic.toml")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mut names: Vec<String> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(
        names,
        [
            "harmonic-1dof-paper__nominal-vi.csv",
            "harmonic-1dof-paper__nominal-vi.json",
            "harmonic-1dof-paper__rk4.csv",
            "harmonic-1dof-paper__rk4.json",
            "harmonic-1dof-paper__surrogate-vi.csv",
            "harmonic-1dof-paper__surrogate-vi.json",
        ]
    );
    // The CSV paths are echoed on stdout, one per line.
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 3);

    let csvs: Vec<_> = names.iter().filter(|n| n.ends_with(".csv")).map(|n| dir.path().join(n)).collect();
    let hs = |p: &Path| error_columns(p).into_iter().map(|(h, _)| h).collect::<Vec<_>>();
    for csv in &csvs {
        let text = std::fs::read_to_string(csv).unwrap();
        assert!(text.starts_with("h,e_l2,time_mean_s,time_std_s\n"));
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
        assert_eq!(text.lines().count(), 5);
        assert_eq!(hs(csv), hs(&csvs[0]));
    }
    assert_eq!(hs(&csvs[0])[0], "2.0000000000000001e-1");

    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("harmonic-1dof-paper__rk4.json")).unwrap()).unwrap();
    assert_eq!(sidecar["tool"], "svibench");
    assert_eq!(sidecar["csv"], "harmonic-1dof-paper__rk4.csv");
    assert_eq!(sidecar["config"]["system"], "harmonic-1dof-paper");
    assert_eq!(sidecar["config"]["repetitions"], 1);
    assert_eq!(sidecar["result"]["integrator"], "rk4");
}

#[test]
fn repeated_runs_produce_identical_errors() {
    let args = ["--system", "linear-4dof-paper", "--integrator", "nominal-vi", "--integrator", "surrogate-vi,6", "--h", "0.2,0.1", "--t-final", "20"];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = run_in(dir.path(), &args);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for name in ["linear-4dof-paper__nominal-vi.csv", "linear-4dof-paper__surrogate-vi-6.csv"] {
        let (x, y) = (error_columns(&a.path().join(name)), error_columns(&b.path().join(name)));
        assert_eq!(x.len(), 2);
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn configuration_mistakes_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_file = |body: &str| {
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, body).unwrap();
        path.display().to_string()
    };
    let cases: Vec<Vec<String>> = vec![
        vec!["--system".into(), "nope".into(), "--integrator".into(), "rk4".into(), "--h".into(), "0.1".into()],
        vec!["--system".into(), "harmonic-1dof-paper".into(), "--integrator".into(), "euler".into(), "--h".into(), "0.1".into()],
        vec!["--system".into(), "harmonic-1dof-paper".into(), "--integrator".into(), "surrogate-vi,3".into(), "--h".into(), "0.1".into()],
        vec!["--system".into(), "harmonic-1dof-paper".into(), "--integrator".into(), "rk4".into(), "--h=-0.1".into()],
        vec!["--system".into(), "harmonic-1dof-paper".into(), "--integrator".into(), "rk4".into()],
        vec!["--system".into(), "pendulum-single-paper".into(), "--integrator".into(), "rk4".into(), "--h".into(), "0.1".into()],
        vec![bad_file("system = \"harmonic-1dof-paper\"\nintegrators = [\"rk4\"]\nh = []\n")],
        vec![bad_file("system = \"harmonic-1dof-paper\"\nintegrators = [\"rk4\"]\nh = [0.1]\ncolour = \"blue\"\n")],
        vec![bad_file("system = \"harmonic-1dof-paper\"\nh = [0.1\n")],
    ];
    for case in cases {
        let args: Vec<&str> = case.iter().map(String::as_str).collect();
        let out = run_in(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{case:?}: {}", stderr(&out));
        assert!(stderr(&out).starts_with("svibench: config error"), "{}", stderr(&out));
    }
}

#[test]
fn an_integration_failure_exits_with_code_3_and_names_the_step() {
    let dir = tempfile::tempdir().unwrap();
    // RK4 amplifies the oscillator by about thirteen per step at h = 3 until it overflows.
    let out = run_in(dir.path(), &["--system", "harmonic-1dof-paper", "--integrator", "rk4", "--h", "3", "--t-final", "3000"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.starts_with("svibench: rk4 failed at h = 3\n"), "{err}");
    assert!(err.contains("caused by: non-finite state"), "{err}");
}

#[test]
fn slope_fits_a_written_csv_and_honours_the_floor() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.csv");
    let rows: String = [0.4, 0.2, 0.1, 0.05, 0.025].iter().map(|h: &f64| format!("{h},{},0,0\n", 5.0 * h.powi(3))).collect();
    std::fs::write(&path, format!("h,e_l2,time_mean_s,time_std_s\n{rows}")).unwrap();
    let p = path.to_str().unwrap();
    let out = svibench(&["slope", p]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "3.000000");
    // A floor above all but two points leaves too little to fit.
    let out = svibench(&["slope", p, "--floor", "1e-2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("insufficient data: 2 usable points"), "{}", stderr(&out));
    let out = svibench(&["slope", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
