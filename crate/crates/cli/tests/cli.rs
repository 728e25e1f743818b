use std::path::Path;
use std::process::{Command, Output};

fn podgeq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_podgeq"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(amplitude: f64) -> String {
    format!(
        "equation = viscous\nscheme = semi_implicit\nd = 0.1\ns_l = 1\np_x = 1\np_y = 0\n\
         flow = time_periodic\nA = {amplitude}\ntheta = 1\nn_cells = 16\ndt = 0.005\nt_final = 0.2\n\
         e_pod = 0.001\ninner_product = h1\nadaptive.check_period = 0.05\nadaptive.burst_len = 2\n"
    )
}

fn ok(out: &Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_key_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), config(1.0).replace("d = 0.1\n", "")).unwrap();
    let out = podgeq(dir.path(), &["reference-solve", "--config", "run.cfg", "--out", "s.snap"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`d`"));
}

#[test]
fn zero_spectrum_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = b"PODGEQ1\nkind snapshots\nn_cells 8\ncount 2\ninner h1\ntimes 0 0.1\nend\n".to_vec();
    bytes.extend(std::iter::repeat(0u8).take(8 * (3 * 64 + 2)));
    std::fs::write(dir.path().join("s.snap"), bytes).unwrap();
    let out = podgeq(dir.path(), &["pod-build", "--snapshots", "s.snap", "--e-pod", "0.001", "--inner", "h1", "--out", "b.basis"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn full_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.cfg"), config(1.0)).unwrap();
    ok(&podgeq(d, &["reference-solve", "--config", "run.cfg", "--out", "s.snap", "--traj", "fd_ubar.csv"]));
    ok(&podgeq(d, &["pod-build", "--snapshots", "s.snap", "--e-pod", "0.001", "--inner", "h1", "--out", "b.basis"]));
    for tag in ["1", "2"] {
        ok(&podgeq(
            d,
            &["rom-solve", "--basis", "b.basis", "--config", "run.cfg", "--out", &format!("c{tag}.csv"), "--ubar", &format!("u{tag}.csv")],
        ));
    }
    assert_eq!(std::fs::read(d.join("c1.csv")).unwrap(), std::fs::read(d.join("c2.csv")).unwrap());

    ok(&podgeq(d, &["flame-speed", "--ubar", "u1.csv", "--out", "speed.csv"]));
    let speed = std::fs::read_to_string(d.join("speed.csv")).unwrap();
    assert!(speed.starts_with("t,s_full,s_bar\n"));
    assert_eq!(speed.lines().count(), 1 + 40);

    ok(&podgeq(d, &["compare", "--a", "c1.csv", "--basis-a", "b.basis", "--b", "s.snap", "--out", "err.csv"]));
    let err = std::fs::read_to_string(d.join("err.csv")).unwrap();
    let last: Vec<f64> = err.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[0] - 0.2).abs() < 1e-12);
    assert!(last[1] < 0.05, "relative error {}", last[1]);

    ok(&podgeq(d, &["adaptive-solve", "--config", "run.cfg", "--init-basis", "b.basis", "--out", "report.csv"]));
    let report = std::fs::read_to_string(d.join("report.csv")).unwrap();
    assert!(report.starts_with("t,residual_norm,"));
    assert_eq!(report.lines().count(), 1 + 4);
}
