use std::path::Path;
use std::process::{Command, Output};

use laserbound_core::format::Real;
use laserbound_core::omega::BoundCertificate;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_laserbound"))
        .args(args)
        .env_remove("LASERBOUND_CACHE")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("p2.json");
    let out = run(&["analyze", "--q", "6", "--power", "2", "--rho", "2.3754770", "--out", path_str(&cert)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("certifying: omega < 2.375477"));
    let out = run(&["verify", path_str(&cert)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("VERIFIED"));
}

#[test]
fn non_certifying_rho_exits_one() {
    let out = run(&["analyze", "--q", "5", "--power", "1", "--rho", "2.3"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("not certifying"));
}

#[test]
fn omega_without_any_certifying_rho_exits_one() {
    let out = run(&["omega", "--q", "1", "--power", "1"]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&["analyze", "--q", "5", "--power", "3", "--rho", "2.4"])), 2);
    assert_eq!(code(&run(&["analyze", "--q", "5", "--power", "2", "--rho", "2.4", "--algorithm", "C"])), 2);
    assert_eq!(code(&run(&["analyze", "--q", "5", "--power", "2", "--rho", "2.4", "--construction", "nope"])), 2);
    assert_eq!(code(&run(&["kernel", "--power", "3"])), 2);
    assert_eq!(code(&run(&["analyze", "--q", "5"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["verify", "/nonexistent/cert.json"])), 2);
    let warm = run(&["analyze", "--q", "4", "--power", "4", "--rho", "2.4", "--warm-start", "cw-q5-power4"]);
    assert_eq!(code(&warm), 2);
}

fn certificate(dir: &Path) -> (std::path::PathBuf, String) {
    let path = dir.join("cert.json");
    let out = run(&["analyze", "--q", "5", "--power", "2", "--rho", "2.38", "--out", path_str(&path)]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    (path, text)
}

#[test]
fn damaged_certificates_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (path, text) = certificate(dir.path());

    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert_eq!(code(&run(&["verify", path_str(&path)])), 2);

    let mut cert = BoundCertificate::from_json(&text).unwrap();
    cert.global.distribution[0] = Real(cert.global.distribution[0].get() + 0.1);
    std::fs::write(&path, cert.to_json().unwrap()).unwrap();
    assert_eq!(code(&run(&["verify", path_str(&path)])), 2);

    let mut cert = BoundCertificate::from_json(&text).unwrap();
    cert.components[0].distribution[0] = Real(cert.components[0].distribution[0].get() + 0.1);
    std::fs::write(&path, cert.to_json().unwrap()).unwrap();
    assert_eq!(code(&run(&["verify", path_str(&path)])), 2);

    // a certificate that claims more than its distributions give
    let mut cert = BoundCertificate::from_json(&text).unwrap();
    cert.rho = Real(2.36);
    cert.omega_claim = Some(Real(2.36));
    std::fs::write(&path, cert.to_json().unwrap()).unwrap();
    let out = run(&["verify", path_str(&path)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("REFUTED"));
}

#[test]
fn replay_certificates_verify() {
    let dir = tempfile::tempdir().unwrap();
    for (name, power, rho, algorithm) in [("cw-q5-power4", "4", "2.3729372", "A"), ("cw-q5-power8", "8", "2.3728642", "B")] {
        let path = dir.path().join(format!("{name}.json"));
        let out = run(&[
            "analyze", "--q", "5", "--power", power, "--rho", rho, "--algorithm", algorithm, "--replay", name, "--out",
            path_str(&path),
        ]);
        assert_eq!(code(&out), 0, "{name}: {}{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
        let out = run(&["verify", path_str(&path)]);
        assert_eq!(code(&out), 0, "{name}: {}", stdout(&out));
    }
}

#[test]
fn sweep_writes_csv() {
    let out = run(&["sweep", "--q", "6", "--power", "1", "--rhos", "2.38,2.39"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rho,log_bound,threshold,margin_linear"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].split(',').nth(3).unwrap().starts_with('-'));
    assert!(!rows[1].split(',').nth(3).unwrap().starts_with('-'));
}

#[test]
fn kernel_reports_dimensions() {
    let out = run(&["kernel", "--q", "5", "--power", "8"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("global: dim 30 chi 14"));
    assert!(text.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["(6,5,5)", l.split_whitespace().nth(1).unwrap(), "15", "7"]));
}

#[test]
fn omega_over_a_q_range_marks_the_best() {
    let out = run(&["omega", "--q-range", "4..7", "--power", "1", "--rho-tol", "1e-5"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("best: q=6, omega < 2.3872000"), "{text}");
}
