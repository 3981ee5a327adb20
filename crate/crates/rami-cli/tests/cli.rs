use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rami"))
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rami-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn irrigate_single_atom_bracket_is_tight() {
    let dir = tempdir("single");
    let mu = write(&dir, "mu.csv", "x1,x2,mass\n3.0,4.0,2.0\n");
    let out = bin()
        .args(["irrigate", "--measure"])
        .arg(&mu)
        .args(["--alpha", "0.5", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    let report = stdout_json(&out);
    let upper = report["upper"].as_f64().unwrap();
    let lower = report["lower"].as_f64().unwrap();
    // One atom: both bounds are mass^alpha * |x| exactly.
    let exact = 2.0_f64.sqrt() * 5.0;
    assert!((upper - exact).abs() <= 1e-12 * exact, "upper {upper} vs {exact}");
    assert!((upper - lower).abs() <= 1e-12 * exact, "lower {lower} vs {upper}");
    assert!((report["gap"].as_f64().unwrap()).abs() <= 1e-12);
}

#[test]
fn irrigate_alpha_one_cost_is_mass_weighted_distance() {
    let dir = tempdir("alpha-one");
    let mu = write(&dir, "mu.csv", "x1,x2,mass\n1.0,1.0,1.0\n-2.0,0.0,0.5\n0.0,3.0,2.0\n");
    let out = bin()
        .args(["irrigate", "--measure"])
        .arg(&mu)
        .args(["--alpha", "1", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    let report = stdout_json(&out);
    let exact = 2.0_f64.sqrt() + 0.5 * 2.0 + 2.0 * 3.0;
    let upper = report["upper"].as_f64().unwrap();
    assert!((upper - exact).abs() <= 1e-9 * exact, "upper {upper} vs {exact}");
}

#[test]
fn malformed_measure_exits_2_with_row_diagnostic() {
    let dir = tempdir("malformed");
    let mu = write(&dir, "mu.csv", "x1,x2,mass\n1.0,1.0,1.0\n1.0,nope,1.0\n");
    let out = bin()
        .args(["irrigate", "--measure"])
        .arg(&mu)
        .args(["--alpha", "0.5", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3"), "diagnostic should name the row: {err}");
}

#[test]
fn out_of_range_alpha_exits_3() {
    let dir = tempdir("alpha-range");
    let mu = write(&dir, "mu.csv", "x1,x2,mass\n1.0,1.0,1.0\n");
    let out = bin()
        .args(["irrigate", "--measure"])
        .arg(&mu)
        .args(["--alpha", "0", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempdir("badkey");
    let mu = write(&dir, "mu.csv", "x1,x2,mass\n1.0,1.0,1.0\n");
    let cfg = write(&dir, "f.cfg", "sunlight.grid_h = 0.25\nsunlight.cheat = 1\n");
    let out = bin()
        .args(["sunlight", "--config"])
        .arg(&cfg)
        .arg("--measure")
        .arg(&mu)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sunlight.cheat"));
}

const BRANCH_CFG: &str = "\
branches.alpha = 1.0
branches.c = 4.0
branches.lattice_spacing = 0.5
branches.lattice_radius = 1.5
branches.budget = 8
sunlight.grid_h = 0.25
sunlight.grid_extent = 3.0
sunlight.directions = 16
";

#[test]
fn optimize_branches_is_deterministic_and_roundtrips() {
    let dir = tempdir("det");
    let cfg = write(&dir, "f.cfg", BRANCH_CFG);
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.join(run);
        let out = bin()
            .args(["optimize", "branches", "--config"])
            .arg(&cfg)
            .args(["--seed", "7", "--out"])
            .arg(&out_dir)
            .env("RAMI_THREADS", "2")
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        reports.push(out.stdout);
        for artifact in ["report.json", "measure.csv", "tree.csv"] {
            assert!(out_dir.join(artifact).exists(), "{artifact} missing");
        }
    }
    assert_eq!(reports[0], reports[1], "same config and seed must print identical bytes");
    assert_eq!(
        fs::read(dir.join("a/measure.csv")).unwrap(),
        fs::read(dir.join("b/measure.csv")).unwrap()
    );
    assert_eq!(
        fs::read(dir.join("a/tree.csv")).unwrap(),
        fs::read(dir.join("b/tree.csv")).unwrap()
    );

    // Artifacts parse back through the library.
    let mu = rami::measures::DiscreteMeasure::parse_csv(
        &fs::read_to_string(dir.join("a/measure.csv")).unwrap(),
    )
    .unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("a/report.json")).unwrap()).unwrap();
    assert_eq!(mu.atoms().len() as u64, report["atoms"].as_u64().unwrap());
    let tree = rami::irrigation::parse_tree_csv(
        &fs::read_to_string(dir.join("a/tree.csv")).unwrap(),
    )
    .unwrap();
    tree.check_irrigates(&mu).unwrap();
}

#[test]
fn optimize_branches_seed_flag_overrides_config() {
    let dir = tempdir("seed-flag");
    let cfg = write(&dir, "f.cfg", &format!("{BRANCH_CFG}branches.seed = 3\n"));
    let out = bin()
        .args(["optimize", "branches", "--config"])
        .arg(&cfg)
        .args(["--seed", "11", "--out"])
        .arg(dir.join("x"))
        .output()
        .unwrap();
    let report = stdout_json(&out);
    assert_eq!(report["seed"].as_u64(), Some(11));
}

#[test]
fn rescale_roots_identity_case() {
    let out = bin()
        .args(["rescale", "roots", "--a", "1", "--b", "1", "--sigma", "1", "--c", "0.3"])
        .output()
        .unwrap();
    let report = stdout_json(&out);
    assert_eq!(report["lambda"].as_f64(), Some(1.0));
    assert_eq!(report["c_tilde"].as_f64(), Some(0.3));
}

#[test]
fn harvest_writes_field_that_parses_back() {
    let dir = tempdir("harvest");
    let mu = write(&dir, "mu.csv", "x1,x2,mass\n0.25,-0.5,1.0\n");
    let cfg = write(&dir, "h.cfg", "harvest.grid_l = 1.0\nharvest.grid_h = 0.25\n");
    let out = bin()
        .args(["harvest", "--config"])
        .arg(&cfg)
        .arg("--measure")
        .arg(&mu)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    let report = stdout_json(&out);
    let harvest = report["harvest"].as_f64().unwrap();
    assert!(harvest > 0.0 && harvest < 1.0, "harvest {harvest} outside (0, M/b * mass)");
    let field =
        rami::harvest::parse_field_csv(&fs::read_to_string(dir.join("field.csv")).unwrap())
            .unwrap();
    assert_eq!(field.grid().dim(), 2);
    assert_eq!(field.grid().node_count(), 9 * 5);
}

#[test]
fn verify_scaling_suite_passes() {
    let out = bin().args(["verify", "--suite", "scaling"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().filter(|l| l.contains(" PASS")).count() >= 4, "{text}");
    assert!(!text.contains(" FAIL"), "{text}");
}

#[test]
fn verify_unknown_suite_exits_2() {
    let out = bin().args(["verify", "--suite", "quantum"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_thread_env_exits_2() {
    let out = bin()
        .args(["verify", "--suite", "measures"])
        .env("RAMI_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
