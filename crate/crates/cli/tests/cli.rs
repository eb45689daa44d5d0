use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_strip-lab");

const FLAT: &str = r#"
[experiment]
kind = "spectrum"

[geometry]
a = 1.5707963267948966
L = 10.0
N1 = 41
N2 = 9

[numerics]
eigen_count = 2
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn strip_lab(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).env_remove("OUTPUT_DIR").output().unwrap()
}

#[test]
fn spectrum_run_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.toml", FLAT);
    let out = dir.path().join("out");
    let o = strip_lab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("spectrum/spectrum.csv")).unwrap();
    assert!(csv.starts_with("index [1],eigenvalue [1/length^2],residual [1]"));
    let first: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    // lowest eigenvalue sits just above E1 = 1 in a box of half-length 10
    assert!(first > 1.0 && first < 1.05, "{first}");
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config_hash = "));
    assert!(manifest.contains("files.spectrum = spectrum/spectrum.csv, spectrum/summary.csv"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = FLAT.replace("kind = \"spectrum\"", "kind = [\"spectrum\", \"mc\"]")
        + "n_paths = 2000\nt_values = [0.1, 0.2, 0.3]\n";
    let cfg = write_config(dir.path(), "batch.toml", &text);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = strip_lab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut files = Vec::new();
        for f in ["spectrum/spectrum.csv", "mc/survival.csv", "mc/histogram.csv", "mc/summary.csv"] {
            files.push(std::fs::read(out.join(f)).unwrap());
        }
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
    let survival = String::from_utf8(outputs[0][1].clone()).unwrap();
    assert!(survival.starts_with("t [time],alive [paths],estimate [1],ci_low [1],ci_high [1]"));
}

#[test]
fn seed_override_changes_the_hash_and_the_paths() {
    let dir = tempfile::tempdir().unwrap();
    let text = FLAT.replace("kind = \"spectrum\"", "kind = \"mc\"") + "n_paths = 500\nt_values = [0.2]\n";
    let cfg = write_config(dir.path(), "mc.toml", &text);
    let read = |seed: &str| {
        let out = dir.path().join(seed);
        let o = strip_lab(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success());
        let m = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
        let hash = m.lines().find(|l| l.starts_with("config_hash")).unwrap().to_string();
        (hash, std::fs::read_to_string(out.join("mc/survival.csv")).unwrap())
    };
    let (h1, s1) = read("1");
    let (h2, s2) = read("2");
    assert_ne!(h1, h2);
    assert_ne!(s1, s2);
}

#[test]
fn output_dir_environment_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.toml", FLAT);
    let target = dir.path().join("from-env");
    let o = Command::new(BIN)
        .args(["run", cfg.to_str().unwrap()])
        .env("OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(target.join("manifest.txt").is_file());
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = FLAT.replace("a = 1.5707963267948966", "a = 1.0\n") + "\n[curvature]\nkind = \"constant-on-box\"\nvalue = 0.6\nhalf_length = 2.0\n";
    let cfg = write_config(dir.path(), "bad.toml", &bad);
    let o = strip_lab(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(dir.path(), "typo.toml", &FLAT.replace("N2 = 9", "N2 = 9\nN7 = 1"));
    assert_eq!(strip_lab(&["run", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_3() {
    // a positive bump violates the Hardy hypothesis mu_K >= 0
    let dir = tempfile::tempdir().unwrap();
    let text = FLAT.replace("kind = \"spectrum\"", "kind = \"hardy\"")
        + "\n[curvature]\nkind = \"gaussian-bump\"\namplitude = 0.2\nwidths = [2.0, 10.0]\nradius = 5.0\n";
    let cfg = write_config(dir.path(), "pos.toml", &text);
    let o = strip_lab(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn report_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let text = FLAT.to_string() + "criteria = [1, 9]\n";
    let cfg = write_config(dir.path(), "report.toml", &text);
    let out = dir.path().join("report");
    let o = strip_lab(&["report", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("report/acceptance.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().skip(1).all(|l| l.contains(",true,")));
}

#[test]
fn oracle_subcommands() {
    let o = strip_lab(&["oracle", "halfline", "--t", "1", "--x", "1", "--y", "1"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let v: f64 = text.trim().trim_start_matches("value = ").parse().unwrap();
    assert!((v - 0.178318).abs() < 1e-6);
    let o = strip_lab(&["oracle", "modes", "--a", "1.5707963267948966", "--n", "1"]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("1,1e0,7.978845608"));
    let o = strip_lab(&["oracle", "survival", "--x0", "0", "0", "--t", "1", "--a", "1.5707963267948966"]);
    assert!(o.status.success());
}

#[test]
fn plot_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let o = strip_lab(&["plot", empty.to_str().unwrap(), "--kind", "nu-vs-s"]);
    assert_eq!(o.status.code(), Some(2));
    let nu = dir.path().join("nu.csv");
    std::fs::write(&nu, "s [1],nu [1],residual [1]\n0,0.32,1e-9\n8,0.74,1e-9\n").unwrap();
    let o = strip_lab(&["plot", nu.to_str().unwrap(), "--kind", "nu-vs-s"]);
    assert!(o.status.success());
    let svg = std::fs::read_to_string(dir.path().join("nu.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("0.75"));
}
