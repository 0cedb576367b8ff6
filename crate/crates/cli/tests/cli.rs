use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const SMALL: &str = "[params]\nnx = 24\nny = 33\nnt = 401\ni_max = 10\nj_max = 2\n";

fn zkflat(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zkflat"))
        .current_dir(dir)
        .env_remove("ZKFLAT_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_column(path: PathBuf, col: usize) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn gentable_writes_every_entry() {
    let dir = TempDir::new().unwrap();
    let o = zkflat(dir.path(), &["gentable", "--out", "t"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = json(dir.path().join("t/table.json"));
    assert_eq!(table["entries"].as_array().unwrap().len(), 16 * 4);
    let summary = json(dir.path().join("t/summary.json"));
    assert_eq!(summary["entries"], 64);
    assert_eq!(summary["bound_passed"], true);
    assert!(summary["max_ode_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(code(&zkflat(dir.path(), &["gentable", "--out", "u"])), 0);
    for name in ["table.json", "bound_report.json", "summary.json"] {
        assert_eq!(fs::read(dir.path().join("t").join(name)).unwrap(), fs::read(dir.path().join("u").join(name)).unwrap());
    }
}

#[test]
fn scenario_key_selects_the_command() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "free.toml", &format!("scenario = \"free\"\n{SMALL}"));
    assert_eq!(code(&zkflat(dir.path(), &["--config", cfg.to_str().unwrap()])), 0);
    assert_eq!(json(dir.path().join("out/summary.json"))["command"], "free");
    assert_eq!(code(&zkflat(dir.path(), &[])), 1);
}

#[test]
fn bad_configuration_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let late = config(&dir, "late.toml", "[params]\ntau = 1.0\nT = 1.0\n");
    assert_eq!(code(&zkflat(dir.path(), &["null", "--config", late.to_str().unwrap()])), 1);
    let unknown = config(&dir, "unknown.toml", "[params]\nalpha = 2.0\n");
    assert_eq!(code(&zkflat(dir.path(), &["gentable", "--config", unknown.to_str().unwrap()])), 1);
    let expr = config(&dir, "expr.toml", &format!("{SMALL}[initial]\nexpr = \"x * (\"\n"));
    assert_eq!(code(&zkflat(dir.path(), &["null", "--config", expr.to_str().unwrap()])), 1);
    let target = config(&dir, "target.toml", &format!("{SMALL}[[target]]\ni = 0\nj = 3\nbeta = 1.0\n"));
    assert_eq!(code(&zkflat(dir.path(), &["reach", "--config", target.to_str().unwrap()])), 1);
    assert_eq!(code(&zkflat(dir.path(), &["simulate"])), 1);
    assert_eq!(code(&zkflat(dir.path(), &["plotdata", "missing.csv"])), 1);
    assert_eq!(code(&zkflat(dir.path(), &["nonsense"])), 1);
}

#[test]
fn corrupted_table_is_an_invariant_violation_when_strict() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&zkflat(dir.path(), &["gentable", "--out", "t"])), 0);
    let mut table = json(dir.path().join("t/table.json"));
    let entry = &mut table["entries"][3]["coeffs"][0];
    *entry = serde_json::json!(1e6);
    fs::write(dir.path().join("bad.json"), table.to_string()).unwrap();

    let o = zkflat(dir.path(), &["gentable", "--table", "bad.json", "--strict", "--out", "s"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&zkflat(dir.path(), &["gentable", "--table", "bad.json", "--out", "w"])), 0);
    assert_eq!(code(&zkflat(dir.path(), &["bounds", "--table", "bad.json", "--out", "b"])), 2);
    // a table built for other parameters is a configuration error
    assert_eq!(code(&zkflat(dir.path(), &["gentable", "--table", "t/table.json", "--imax", "12"])), 1);
}

#[test]
fn null_run_is_deterministic_and_tagged() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "small.toml", SMALL);
    let cfg = cfg.to_str().unwrap();
    for out in ["a", "b"] {
        let o = zkflat(dir.path(), &["null", "--config", cfg, "--out", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let o = zkflat(dir.path(), &["null", "--config", cfg, "--out", "c", "--threads", "2"]);
    assert_eq!(code(&o), 0);
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for n in &names {
        let a = fs::read(dir.path().join("a").join(n)).unwrap();
        for other in ["b", "c"] {
            assert_eq!(a, fs::read(dir.path().join(other).join(n)).unwrap(), "{n:?}");
        }
    }
    let summary = json(dir.path().join("a/summary.json"));
    let hash = summary["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    let control = fs::read_to_string(dir.path().join("a/control.csv")).unwrap();
    assert!(control.starts_with(&format!("# config-hash: {hash}\nt,y,h\n")));
    assert_eq!(summary["passed"], true);
    assert!(summary["relative_terminal"].as_f64().unwrap() <= 1e-3);
    assert_eq!(summary["control_sup_before_tau"], 0.0);
}

#[test]
fn unmet_tolerance_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "small.toml", SMALL);
    let o = zkflat(dir.path(), &["null", "--config", cfg.to_str().unwrap(), "--tol-terminal", "1e-30"]);
    assert_eq!(code(&o), 3);
    assert!(dir.path().join("out/summary.json").exists());
    assert_eq!(json(dir.path().join("out/summary.json"))["passed"], false);
}

#[test]
fn zero_data_gives_zero_control() {
    let dir = TempDir::new().unwrap();
    let null = config(&dir, "null.toml", &format!("{SMALL}[initial]\nexpr = \"0\"\n"));
    assert_eq!(code(&zkflat(dir.path(), &["null", "--config", null.to_str().unwrap(), "--out", "n"])), 0);
    assert!(csv_column(dir.path().join("n/control.csv"), 2).iter().all(|h| *h == 0.0));

    let reach = config(&dir, "reach.toml", &format!("target = []\n{SMALL}"));
    assert_eq!(code(&zkflat(dir.path(), &["reach", "--config", reach.to_str().unwrap(), "--out", "r"])), 0);
    assert!(csv_column(dir.path().join("r/control.csv"), 2).iter().all(|h| *h == 0.0));
    assert!(csv_column(dir.path().join("r/terminal.csv"), 2).iter().all(|u| *u == 0.0));
}

#[test]
fn simulated_reach_control_hits_the_target() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "small.toml", SMALL);
    let cfg = cfg.to_str().unwrap();
    let o = zkflat(dir.path(), &["reach", "--config", cfg, "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(dir.path().join("r/summary.json"));
    assert_eq!(summary["compatibility"]["passed"], true);

    let o = zkflat(dir.path(), &["simulate", "--config", cfg, "--control", "r/control.csv", "--out", "s"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got = csv_column(dir.path().join("s/terminal.csv"), 2);
    let want = csv_column(dir.path().join("r/target.csv"), 2);
    let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(err <= 1e-2 * scale, "{err} vs {scale}");
    assert!(json(dir.path().join("s/summary.json"))["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn free_energy_check_is_hard_only_when_strict() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "small.toml", &format!("{SMALL}[tolerances]\nenergy = 1e-30\n"));
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&zkflat(dir.path(), &["free", "--config", cfg, "--out", "f"])), 0);
    assert_eq!(code(&zkflat(dir.path(), &["free", "--config", cfg, "--out", "f", "--strict"])), 2);
    let energy = json(dir.path().join("f/energy.json"));
    assert!(energy["residual"].as_f64().unwrap() <= 1e-9);
    assert_eq!(energy["modes"].as_array().unwrap().len(), 2);
}

#[test]
fn plotdata_adds_a_series_column() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "small.toml", SMALL);
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&zkflat(dir.path(), &["null", "--config", cfg, "--out", "n"])), 0);
    let o = zkflat(
        dir.path(),
        &["plotdata", "--config", cfg, "--out", "p", "n/control.csv", "n/norm_history.csv", "n/bound_report.json"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let header = |name: &str| {
        fs::read_to_string(dir.path().join("p").join(name))
            .unwrap()
            .lines()
            .nth(1)
            .unwrap()
            .to_string()
    };
    assert_eq!(header("plot_control.csv"), "series,t,y,h");
    assert_eq!(header("plot_norm_history.csv"), "series,t,norm");
    assert_eq!(header("plot_bound_report.csv"), "series,i,j,value,bound");
    let rows = fs::read_to_string(dir.path().join("p/plot_bound_report.csv")).unwrap().lines().count();
    assert_eq!(rows, 2 + 11 * 2);
}

#[test]
fn example_configuration_spells_out_the_defaults() {
    let dir = TempDir::new().unwrap();
    let example = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../zkflat.example.toml");
    let a = zkflat(dir.path(), &["gentable", "--config", example.to_str().unwrap(), "--out", "a"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(code(&zkflat(dir.path(), &["gentable", "--out", "b"])), 0);
    let hash = |d: &str| json(dir.path().join(d).join("summary.json"))["config_hash"].clone();
    assert_eq!(hash("a"), hash("b"));
}
