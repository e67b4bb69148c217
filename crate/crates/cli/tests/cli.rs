use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn rldp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rldp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parses CSV text into a header and rows of numbers.
fn table(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn solve_rbm_matches_reference_value() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "rbm.toml",
        "[model]\nkind = \"rbm\"\n[solver]\nN = 1000\nthetas = [0.01]\n",
    );
    let (header, rows) = table(&stdout(&rldp(&["solve", "--config", s(&cfg)])));
    assert_eq!(header, ["theta", "psi_hat", "residual", "N", "iterations"]);
    assert_eq!(rows.len(), 1);
    assert!((rows[0][1] - 5.017e-3).abs() < 1e-6);
    assert_eq!(rows[0][3], 1000.0);
}

#[test]
fn solve_at_zero_gives_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bd.toml",
        "[model]\nkind = \"birth-death\"\nlambda = 50.0\nb = 3\n[solver]\nthetas = [0.0]\n",
    );
    let ef = dir.path().join("u.csv");
    let (_, rows) = table(&stdout(&rldp(&[
        "solve",
        "--config",
        s(&cfg),
        "--eigenfunction",
        s(&ef),
    ])));
    assert_eq!(rows.len(), 1);
    assert!(rows[0][1].abs() < 1e-12);
    let (header, u) = table(&fs::read_to_string(&ef).unwrap());
    assert_eq!(header, ["theta", "x", "u"]);
    assert_eq!(u.len(), 4);
    assert!(u.iter().all(|r| (r[2] - 1.0).abs() < 1e-8));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.toml", "[model\nkind = 1");
    assert_eq!(rldp(&["solve", "--config", s(&bad)]).status.code(), Some(2));
    let unknown = write(&dir, "unknown.toml", "[model]\nkind = \"ou\"\n");
    assert_eq!(rldp(&["curve", "--config", s(&unknown)]).status.code(), Some(2));
    assert_eq!(rldp(&["solve"]).status.code(), Some(2));
    assert_eq!(rldp(&["reproduce", "no-such-target"]).status.code(), Some(2));
    // θ beyond the critical value of the boundary substitution on a coarse mesh
    let critical = write(
        &dir,
        "critical.toml",
        "[model]\nkind = \"rbm\"\n[solver]\nN = 9\nthetas = [15.0]\n",
    );
    let o = rldp(&["solve", "--config", s(&critical)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    // jump rate 25 per direction against a thinning bound of 1
    let bound = write(
        &dir,
        "bound.toml",
        "[model]\nkind = \"birth-death\"\nlambda = 50.0\nb = 3\n[sim]\nT = 50.0\nintensity_bound = 1.0\n",
    );
    let o = rldp(&["simulate", "--config", s(&bound)]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let crn_oracle = write(&dir, "crn.toml", "[model]\nkind = \"crn-langevin\"\nn = 100.0\n");
    assert_eq!(rldp(&["oracle", "--config", s(&crn_oracle)]).status.code(), Some(2));
}

#[test]
fn rate_on_quadratic_curve() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("theta,psi\n");
    for k in -40..=40 {
        let t = k as f64 * 0.05;
        text.push_str(&format!("{t},{}\n", 0.5 * t * t));
    }
    let curve = write(&dir, "q.csv", &text);
    let out = dir.path().join("rate.csv");
    let o = rldp(&["rate", "--curve", s(&curve), "--x", "1,0,-0.5", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = table(&fs::read_to_string(&out).unwrap());
    assert_eq!(header, ["x", "rate", "argmax_theta"]);
    assert!((rows[0][1] - 0.5).abs() < 1e-12);
    assert!((rows[0][2] - 1.0).abs() < 1e-6);
    assert!(rows[1][1].abs() < 1e-12);
    assert!((rows[2][1] - 0.125).abs() < 1e-12);
}

#[test]
fn rate_rejects_nonconvex_curve() {
    let dir = TempDir::new().unwrap();
    let curve = write(&dir, "c.csv", "theta,psi\n-1,0\n0,0\n1,-1\n2,0\n");
    assert_eq!(rldp(&["rate", "--curve", s(&curve), "--x", "0"]).status.code(), Some(2));
}

#[test]
fn curve_and_rate_from_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "rbm.toml",
        "[model]\nkind = \"rbm\"\nmu = -0.5\n[solver]\nN = 100\ntheta_min = -1.0\ntheta_max = 1.0\ntheta_step = 0.1\n",
    );
    let (header, rows) = table(&stdout(&rldp(&["curve", "--config", s(&cfg)])));
    assert_eq!(header, ["theta", "psi"]);
    assert_eq!(rows.len(), 21);
    assert_eq!(rows[10][0], 0.0);
    assert!(rows[10][1].abs() < 1e-9);
    let (_, rates) = table(&stdout(&rldp(&["rate", "--config", s(&cfg), "--x", "0.2,0.6,1.0"])));
    assert!(rates.iter().all(|r| r[1] >= 0.0));
}

#[test]
fn oracle_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bd.toml",
        "[model]\nkind = \"birth-death\"\nlambda = 50.0\nb = 3\n",
    );
    let (header, rows) = table(&stdout(&rldp(&["oracle", "--config", s(&cfg)])));
    assert_eq!(header, ["theta", "psi_oracle"]);
    assert_eq!(rows.len(), 11);
    assert!((rows[10][1] - 2.5008752e-3).abs() < 1e-9);
}

const SIM: &str =
    "[model]\nkind = \"rbm\"\n[solver]\nN = 100\nthetas = [0.5]\n[sim]\ndt = 0.01\nT = 1.0\npaths = 5\nseed = 4\n";

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sim.toml", SIM);
    let a = stdout(&rldp(&["simulate", "--config", s(&cfg)]));
    let b = stdout(&rldp(&["simulate", "--config", s(&cfg)]));
    assert_eq!(a, b);
    let (header, rows) = table(&a);
    assert_eq!(header, ["path", "t", "V", "L0", "Lb", "Lambda"]);
    assert_eq!(rows.len(), 5 * 101);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r[2])));
    let c = stdout(&rldp(&["simulate", "--config", s(&cfg), "--seed", "5"]));
    assert_ne!(a, c);
}

#[test]
fn simulate_split_writes_one_file_per_path() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sim.toml", SIM);
    let out = dir.path().join("paths");
    assert!(rldp(&["simulate", "--config", s(&cfg), "--split", "--out", s(&out)])
        .status
        .success());
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["path_0.csv", "path_1.csv", "path_2.csv", "path_3.csv", "path_4.csv"]
    );
    let (header, rows) = table(&fs::read_to_string(out.join("path_0.csv")).unwrap());
    assert_eq!(header, ["t", "V", "L0", "Lb", "Lambda"]);
    assert_eq!(rows.len(), 101);
}

#[test]
fn simulate_estimate_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sim.toml", SIM);
    let (header, rows) = table(&stdout(&rldp(&["simulate", "--config", s(&cfg), "--estimate"])));
    assert_eq!(header, ["theta", "estimate", "stderr", "paths", "T", "dt", "seed"]);
    assert_eq!(rows, vec![vec![0.5, rows[0][1], rows[0][2], 5.0, 1.0, 0.01, 4.0]]);
}

#[test]
fn output_path_from_config() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o.csv");
    let text = format!(
        "[model]\nkind = \"rbm\"\n[solver]\nN = 50\nthetas = [0.0]\n[output]\npath = {:?}\n",
        s(&out)
    );
    let cfg = write(&dir, "o.toml", &text);
    let o = rldp(&["solve", "--config", s(&cfg)]);
    assert!(o.status.success() && o.stdout.is_empty());
    assert!(fs::read_to_string(&out).unwrap().starts_with("theta,psi_hat"));
}

#[test]
fn reproduce_tables() {
    let (header, rows) = table(&stdout(&rldp(&["reproduce", "table-bd"])));
    assert_eq!(header, ["theta", "psi_numeric", "psi_oracle", "abs_error"]);
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r[3] <= 5e-6));
    let (_, rows) = table(&stdout(&rldp(&["reproduce", "table-rbm", "--threads", "1"])));
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r[3] <= 1e-5));
    assert!(rows[0][1].abs() <= 1e-9);
}

#[test]
fn reproduce_small_network_comparison() {
    let o = rldp(&["reproduce", "crn-eq-n", "--n", "60", "--mesh", "60"]);
    let (header, rows) = table(&stdout(&o));
    assert_eq!(header, ["theta", "psi_jmp", "psi_jda"]);
    assert_eq!(rows.len(), 21);
    assert_eq!(rows[10][0], 0.0);
    assert!(rows[10][1].abs() < 1e-9 && rows[10][2].abs() < 1e-9);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(
        err.contains("psi'(0)") && err.contains("JMP") && err.contains("JDA"),
        "{err}"
    );
}

#[test]
fn example_configs_parse_and_solve() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let tmp = TempDir::new().unwrap();
            // shrink the run so every example solves quickly
            let text = fs::read_to_string(&path).unwrap();
            let text = text
                .lines()
                .map(|l| {
                    if l.starts_with("N = ") {
                        "N = 40".to_string()
                    } else if l.starts_with("n = ") {
                        "n = 50.0".to_string()
                    } else if l.starts_with("thetas") || l.starts_with("theta_") {
                        String::new()
                    } else {
                        l.to_string()
                    }
                })
                .collect::<Vec<_>>()
                .join("\n");
            let text = text.replace("[solver]", "[solver]\nthetas = [0.0, 0.1]");
            let cfg = write(&tmp, "c.toml", &text);
            let o = rldp(&["solve", "--config", s(&cfg)]);
            assert!(
                o.status.success(),
                "{}: {}",
                path.display(),
                String::from_utf8_lossy(&o.stderr)
            );
            seen += 1;
        }
    }
    assert!(seen >= 6, "expected one example per model kind, found {seen}");
}
