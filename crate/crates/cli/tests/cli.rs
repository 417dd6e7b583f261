use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fbp_cli::artifacts::{load_manifest, read_csv_columns};
use fbp_cli::config::RunConfig;
use tempfile::TempDir;

fn fbp(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbp"))
        .arg("--out-root")
        .arg(root)
        .args(args)
        .env_remove("FBP_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_with(tmp: &TempDir, name: &str, config: &str, command: &str) -> Output {
    let root = tmp.path().join("out");
    let cfg = write_config(tmp.path(), name, config);
    fbp(&root, &["--config", cfg.to_str().unwrap(), command])
}

const SMALL_BALL: &str = r#"
schema_version = 1
[minimize]
a = 3.0
h = 0.1
eps0 = 0.4
[sweep]
eps_start = 0.3
eps_stop = 0.9
eps_count = 13
"#;

#[test]
fn default_config_round_trips() {
    let cfg = RunConfig::default();
    let text = cfg.to_toml();
    assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
}

#[test]
fn bad_configs_exit_two_without_artifacts() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("out");
    let cases = [
        ("empty.toml", ""),
        ("schema.toml", "schema_version = 99\n"),
        ("unknown.toml", "schema_version = 1\n[glue]\nbogus = 1\n"),
        ("range.toml", "schema_version = 1\n[kernels_table]\npoints = 1\n"),
    ];
    for (name, text) in cases {
        let cfg = write_config(tmp.path(), name, text);
        let out = fbp(&root, &["--config", cfg.to_str().unwrap(), "kernels-table"]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!root.exists(), "{name} left artifacts behind");
    }
    // verify needs a manifest
    let cfg = write_config(tmp.path(), "verify.toml", "schema_version = 1\n");
    assert_eq!(fbp(&root, &["--config", cfg.to_str().unwrap(), "verify"]).status.code(), Some(2));
    assert!(!root.exists());
}

#[test]
fn kernels_table_brackets_the_root() {
    let tmp = TempDir::new().unwrap();
    let out = run_with(&tmp, "k.toml", "schema_version = 1\n[kernels_table]\nk_max = 10.0\npoints = 1001\n", "kernels-table");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out/kernels-table");
    let m = load_manifest(&dir.join("manifest.json")).unwrap();
    let root = m.summary["d2_root"];
    assert!(m.summary["bracket_lo"] <= root && root <= m.summary["bracket_hi"]);
    let cols = read_csv_columns(&dir.join("kernels.csv"), &["k", "d2"]).unwrap();
    assert_eq!(cols[0].len(), 1001);
    assert_eq!(cols[0][1000], 10.0);
}

#[test]
fn glue_verify_report_and_tampering() {
    let tmp = TempDir::new().unwrap();
    let root = tmp.path().join("out");
    let out = run_with(&tmp, "g.toml", "schema_version = 1\n", "glue");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = root.join("glue/manifest.json");

    let report = fbp(&root, &["report", manifest.to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(0));
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("status: PASS") && text.contains("boundary_vs_naive"));

    let v = format!("schema_version = 1\n[verify]\nmanifest = {:?}\n", manifest.to_str().unwrap());
    let out = run_with(&tmp, "v.toml", &v, "verify");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // a single changed byte breaks the checksum
    let heights = root.join("glue/heights.csv");
    let mut bytes = std::fs::read(&heights).unwrap();
    let last = bytes.len() - 2;
    bytes[last] = if bytes[last] == b'1' { b'2' } else { b'1' };
    std::fs::write(&heights, bytes).unwrap();
    let report = fbp(&root, &["report", manifest.to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&report.stderr).contains("checksum"));
    let out = run_with(&tmp, "v.toml", &v, "verify");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn small_ball_minimize_and_sweep() {
    let tmp = TempDir::new().unwrap();
    let out = run_with(&tmp, "s.toml", SMALL_BALL, "sweep");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out/sweep");
    let m = load_manifest(&dir.join("manifest.json")).unwrap();
    assert!(m.summary["energy"] <= m.summary["tube_energy"]);
    let names: Vec<_> = m.artifacts.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["field.csv", "trace.json", "sweep.json"]);

    // feeding the recorded boundary values back reproduces the field
    let cols = read_csv_columns(&dir.join("field.csv"), &["x", "y", "u", "boundary"]).unwrap();
    let mut csv = String::from("x,y,b\n");
    for k in 0..cols[0].len() {
        if cols[3][k] == 1.0 {
            csv.push_str(&format!("{:e},{:e},{:e}\n", cols[0][k], cols[1][k], cols[2][k]));
        }
    }
    let bpath = write_config(tmp.path(), "boundary.csv", &csv);
    let cfg = format!("{SMALL_BALL}\n").replace(
        "eps0 = 0.4\n",
        &format!("eps0 = 0.4\nboundary = {:?}\n", bpath.to_str().unwrap()),
    );
    let cfg = format!("output_dir = \"custom\"\n{cfg}");
    let out = run_with(&tmp, "b.toml", &cfg, "minimize");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let again = read_csv_columns(&tmp.path().join("out/custom/field.csv"), &["u"]).unwrap();
    assert_eq!(again[0], cols[2]);

    // data above the upper barrier is rejected by the core, and the manifest says where
    std::fs::write(&bpath, csv.lines().enumerate().map(|(i, l)| {
        if i == 0 { format!("{l}\n") } else { format!("{},2\n", l.rsplit_once(',').unwrap().0) }
    }).collect::<String>()).unwrap();
    let out = run_with(&tmp, "b.toml", &cfg, "minimize");
    assert_eq!(out.status.code(), Some(1));
    let m = load_manifest(&tmp.path().join("out/custom/manifest.json")).unwrap();
    let f = m.failure.expect("failure recorded");
    assert_eq!(f.stage, "minimization");
    let report = fbp(&tmp.path().join("out"), &["report", tmp.path().join("out/custom").to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&report.stdout).contains("failed stage: minimization"));
}

#[test]
fn missing_boundary_file_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = SMALL_BALL.replace("eps0 = 0.4\n", "eps0 = 0.4\nboundary = \"/nonexistent/b.csv\"\n");
    let out = run_with(&tmp, "m.toml", &cfg, "minimize");
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unconverged_descent_fails_its_gate() {
    let tmp = TempDir::new().unwrap();
    let cfg = SMALL_BALL.replace("eps0 = 0.4\n", "eps0 = 0.4\nmax_sweeps = 3\n");
    let out = run_with(&tmp, "u.toml", &cfg, "minimize");
    assert_eq!(out.status.code(), Some(1));
    let m = load_manifest(&tmp.path().join("out/minimize/manifest.json")).unwrap();
    assert!(!m.passed() && m.failure.is_none());
    assert!(m.gates.iter().any(|g| g.name == "harmonicity_residual" && !g.passed));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let cfg = write_config(tmp.path(), "c.toml", "schema_version = 1\n");
    for root in [&a, &b] {
        assert_eq!(fbp(root, &["--config", cfg.to_str().unwrap(), "catenoid-profile"]).status.code(), Some(0));
    }
    for name in ["profile.csv", "profile.json", "manifest.json"] {
        let x = std::fs::read(a.join("catenoid-profile").join(name)).unwrap();
        let y = std::fs::read(b.join("catenoid-profile").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn env_sets_output_root() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fbp"))
        .arg("simons-leaf")
        .env("FBP_OUTPUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("simons-leaf/manifest.json").exists());
}
