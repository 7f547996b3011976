use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn phasect(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasect"))
        .current_dir(dir)
        .env_remove("PHASECT_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = phasect(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn matrix_rows(path: &Path) -> usize {
    let text = fs::read_to_string(path).unwrap();
    let size = text.lines().find(|l| !l.starts_with('%')).unwrap();
    size.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        "matrix",
        "phantom",
        "solve",
        "diagram",
        "contour",
        "width",
        "theory",
        "convert",
        "predict",
        "recovery-curve",
        "render",
    ] {
        let out = ok(dir.path(), &[sub, "--help"]);
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--out") || text.contains("--contour"), "{sub}");
        assert!(text.contains("--config") && text.contains("--preset"), "{sub}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(phasect(dir.path(), &["bogus"]).status.code(), Some(1));
    assert_eq!(phasect(dir.path(), &["matrix", "--nope"]).status.code(), Some(1));
    // missing --views is caught after parsing
    let out = phasect(dir.path(), &["matrix", "--geometry", "fanbeam", "--nside", "8", "--out", "m.mtx"]);
    assert_eq!(out.status.code(), Some(1));
    let out = phasect(
        dir.path(),
        &["solve", "--matrix", "absent.mtx", "--data", "b.csv", "--problem", "p1", "--out", "x.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_phasect"))
        .current_dir(dir.path())
        .env("PHASECT_WORKERS", "many")
        .args(["diagram", "--type", "almt", "--geometry", "gaussian", "--class", "signedspikes"])
        .args(["--problem", "p1", "--nside", "8", "--realizations", "1", "--out", "d"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fanbeam_matrix_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["matrix", "--geometry", "fanbeam", "--nside", "16", "--views", "4", "--out", "m.mtx"]);
    assert_eq!(matrix_rows(&dir.path().join("m.mtx")), 128);
    let side = json(&dir.path().join("m.mtx.json"));
    assert_eq!(side["m"], 128);
    assert_eq!(side["n_views"], 4);
    let manifest = json(&dir.path().join("m.mtx.manifest.json"));
    assert_eq!(manifest["command"], "matrix");
    assert!(manifest["wall_time_s"].is_number());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), "# matrix defaults\ngeometry = fanbeam\nnside=16\nviews=4\n").unwrap();
    ok(dir.path(), &["matrix", "--config", "c.cfg", "--out", "a.mtx"]);
    assert_eq!(matrix_rows(&dir.path().join("a.mtx")), 128);
    ok(dir.path(), &["matrix", "--views", "2", "--config", "c.cfg", "--out", "b.mtx"]);
    assert_eq!(matrix_rows(&dir.path().join("b.mtx")), 64);
    fs::write(dir.path().join("bad.cfg"), "views 4\n").unwrap();
    assert_eq!(phasect(dir.path(), &["matrix", "--config", "bad.cfg", "--out", "c.mtx"]).status.code(), Some(1));
}

#[test]
fn theory_curve_endpoints_and_monotonicity() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["theory", "--curve", "l1", "--coords", "almt", "--out", "psi.csv"]);
    let text = fs::read_to_string(dir.path().join("psi.csv")).unwrap();
    let pts: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(pts.len(), 99);
    assert_eq!(pts[0].0, 0.025);
    assert!((pts[98].0 - 0.975).abs() < 1e-15);
    assert_eq!(pts[0].1, phasect::theory::psi_l1(0.025));
    assert!(pts.windows(2).all(|w| w[1].1 > w[0].1));
    assert_eq!(json(&dir.path().join("psi.csv.json"))["kind"], "theoretical_l1");
}

#[test]
fn manifest_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["phantom", "--class", "signedspikes", "--nside", "8", "--sparsity", "5", "--seed", "9", "--out", "x.csv"]);
    ok(d, &["theory", "--curve", "l1_nonneg", "--coords", "dt", "--points", "20", "--out", "dt.csv"]);
    for (file, manifest) in [("x.csv", "x.csv.manifest.json"), ("dt.csv", "dt.csv.manifest.json")] {
        let before = fs::read(d.join(file)).unwrap();
        let side = fs::read(d.join(format!("{file}.json"))).unwrap();
        fs::rename(d.join(manifest), d.join("saved.json")).unwrap();
        fs::remove_file(d.join(file)).unwrap();
        ok(d, &["--replay", "saved.json"]);
        assert_eq!(fs::read(d.join(file)).unwrap(), before);
        assert_eq!(fs::read(d.join(format!("{file}.json"))).unwrap(), side);
    }
}

fn without_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').unwrap().0)
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn gaussian_diagram_artifacts_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "diagram",
            "--type",
            "almt",
            "--geometry",
            "gaussian",
            "--class",
            "signedspikes",
            "--problem",
            "p1",
            "--nside",
            "16",
            "--realizations",
            "10",
            "--workers",
            "4",
            "--out",
            "runs/d1",
        ],
    );
    let run = d.join("runs/d1");
    for f in ["results.csv", "rates.csv", "rates.csv.json", "rates.pgm", "spec.json", "manifest.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let results = fs::read_to_string(run.join("results.csv")).unwrap();
    // 39 sparsity levels x 7 sampling levels x 10 realizations
    assert_eq!(results.lines().count(), 1 + 39 * 7 * 10);
    let rates = fs::read(run.join("rates.csv")).unwrap();
    assert_eq!(json(&run.join("manifest.json"))["master_seed"], 0);

    fs::rename(run.join("manifest.json"), d.join("saved.json")).unwrap();
    fs::remove_dir_all(&run).unwrap();
    ok(d, &["--replay", "saved.json"]);
    assert_eq!(fs::read(run.join("rates.csv")).unwrap(), rates);
    let again = fs::read_to_string(run.join("results.csv")).unwrap();
    assert_eq!(without_wall_time(&again), without_wall_time(&results));

    ok(d, &["contour", "--rates", "runs/d1/rates.csv", "--out", "c50.csv", "--polyline", "poly.csv"]);
    let c = phasect::theory::Curve::read(&d.join("c50.csv")).unwrap();
    assert!(!c.is_empty());
    ok(d, &["width", "--rates", "runs/d1/rates.csv", "--out", "w.csv"]);
    assert_eq!(fs::read_to_string(d.join("w.csv")).unwrap().lines().count(), 40);
    ok(d, &["render", "--kind", "rates", "--input", "runs/d1/rates.csv", "--out", "r.pgm"]);
    let (w, h, _) = phasect::io::read_pgm(&d.join("r.pgm")).unwrap();
    assert_eq!((w, h), (39, 7));
}

#[test]
fn interrupted_diagram_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = [
        "diagram",
        "--type",
        "dt",
        "--geometry",
        "fanbeam",
        "--class",
        "signedspikes",
        "--problem",
        "p1",
        "--nside",
        "8",
        "--sampling",
        "1,2,3",
        "--sparsity",
        "0.25,0.5,0.75",
        "--realizations",
        "5",
    ];
    let with = |extra: &[&'static str]| -> Vec<&'static str> { [&base[..], extra].concat() };
    ok(d, &with(&["--workers", "1", "--out", "one"]));
    ok(d, &with(&["--workers", "3", "--stop-after", "20", "--out", "two"]));
    assert!(!d.join("two/rates.csv").exists());
    ok(d, &with(&["--workers", "3", "--out", "two"]));
    let norm = |p: &str| without_wall_time(&fs::read_to_string(d.join(p)).unwrap());
    assert_eq!(norm("one/results.csv"), norm("two/results.csv"));
    assert_eq!(
        fs::read(d.join("one/rates.csv")).unwrap(),
        fs::read(d.join("two/rates.csv")).unwrap()
    );
}

#[test]
fn predict_walnut_structure() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let beta = 45_074.0 / 823_592.0;
    fs::write(d.join("c.csv"), format!("0.0,0.0\n{beta},0.17829\n0.5,0.8\n")).unwrap();
    let out = ok(
        d,
        &[
            "predict",
            "--contour",
            "c.csv",
            "--coords",
            "almt",
            "--sparsity",
            "45074",
            "--n-pixels",
            "823592",
            "--rays-per-view",
            "2048",
            "--out",
            "p.json",
        ],
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["views_fractional"].as_f64().unwrap() - 71.7).abs() < 0.05);
    assert_eq!(v["views_ceil"], 72);
    assert!(v["m_critical"].is_number());
    assert_eq!(json(&d.join("p.json")), v);

    // same curve through the DT path after conversion
    ok(d, &["convert", "--curve", "c.csv", "--from", "almt", "--to", "dt", "--out", "c_dt.csv"]);
    let out = ok(
        d,
        &[
            "predict",
            "--contour",
            "c_dt.csv",
            "--coords",
            "dt",
            "--sparsity",
            "45074",
            "--n-pixels",
            "823592",
            "--rays-per-view",
            "2048",
        ],
    );
    let w: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((w["views_fractional"].as_f64().unwrap() - 71.7).abs() < 0.05, "{w}");
    assert_eq!(phasect(d, &["predict", "--contour", "c.csv", "--coords", "almt", "--sparsity", "823592",
        "--n-pixels", "823592", "--rays-per-view", "2048"]).status.code(), Some(2));
}

#[test]
fn solve_and_recovery_curve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["matrix", "--geometry", "gaussian", "--nside", "8", "--rows", "30", "--seed", "2", "--out", "g.mtx"]);
    ok(d, &["phantom", "--class", "signedspikes", "--nside", "8", "--sparsity", "4", "--seed", "2", "--out", "x.csv"]);
    for extra in [&["--oracle"][..], &["--preset", "desk"][..]] {
        let args = [&["solve", "--matrix", "g.mtx", "--phantom", "x.csv", "--problem", "p1", "--out", "s.csv"][..], extra].concat();
        ok(d, &args);
        let s = json(&d.join("s.csv.json"));
        for key in ["problem", "lambda", "K", "iterations_run", "objective", "residual", "relative_error_if_reference"] {
            assert!(s.get(key).is_some(), "{key}");
        }
        assert!(s["relative_error_if_reference"].as_f64().unwrap() < 1e-4, "{s}");
    }
    assert!(d.join("s.history.csv").exists());

    ok(d, &["phantom", "--class", "altprojisotv", "--nside", "8", "--sparsity", "12", "--seed", "1", "--out", "t.csv"]);
    ok(
        d,
        &["recovery-curve", "--phantom", "t.csv", "--nside", "8", "--views", "1,2,3", "--preset", "desk", "--out", "rc.csv"],
    );
    let text = fs::read_to_string(d.join("rc.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "views,image_rmse,data_rmse,relative_error,iterations");
    assert_eq!(text.lines().count(), 4);
    ok(d, &["render", "--input", "t.csv", "--out", "t.pgm"]);
    let (w, h, _) = phasect::io::read_pgm(&d.join("t.pgm")).unwrap();
    assert_eq!((w, h), (8, 8));
}
