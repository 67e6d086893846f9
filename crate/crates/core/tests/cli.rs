use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use photoncorr::io::{read_series, regenerate, write_series};
use photoncorr::theory::{thermal_g, twb_g, TheoryPoint};
use tempfile::TempDir;

fn photoncorr(args: &[&str]) -> Output {
    photoncorr_env(args, &[])
}

fn photoncorr_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_photoncorr"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn shot_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "shots"))
        .collect();
    v.sort();
    v
}

/// Header and rows of a CSV written by the tool, `#` lines skipped.
fn read_csv(path: &Path) -> (Vec<String>, Vec<HashMap<String, String>>) {
    let text = fs::read_to_string(path).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| {
            header
                .iter()
                .cloned()
                .zip(rec.unwrap().iter().map(String::from))
                .collect()
        })
        .collect();
    (header, rows)
}

fn val(row: &HashMap<String, String>, key: &str) -> f64 {
    row.get(key)
        .unwrap_or_else(|| panic!("missing column {key}"))
        .parse()
        .unwrap_or_else(|_| panic!("column {key} = {:?}", row[key]))
}

const SMALL: &str = r#"
kind = "twin_beam"
modes = 100
eta = 0.05
axis = "mean_detected"
values = [0.5, 1.0, 3.88]
shots = 1000
seed = 11
"#;

const LOW_EFFICIENCY_SWEEP: &str = r#"
kind = "twin_beam"
modes = 100
eta = 0.05
axis = "mean_detected"
values = [0.5, 1.0, 2.0, 3.88]
shots = 50000
seed = 2024
"#;

#[test]
fn simulate_writes_one_file_per_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("shots");
    ok(&photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&out)]));
    let files = shot_files(&out);
    assert_eq!(files.len(), 3);
    for f in &files {
        let file = read_series(fs::read(f).unwrap().as_slice()).unwrap();
        assert_eq!(file.series.count(), 1000);
    }
}

#[test]
fn simulate_is_byte_identical_on_rerun() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&a)]));
    ok(&photoncorr_env(
        &["simulate", "--config", s(&cfg), "--out", s(&b)],
        &[("PHOTONCORR_THREADS", "1")],
    ));
    let (fa, fb) = (shot_files(&a), shot_files(&b));
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
}

#[test]
fn overrides_change_seed_and_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&a)]));
    ok(&photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&b), "--seed", "12", "--shots", "500"]));
    let fa = read_series(fs::read(&shot_files(&a)[0]).unwrap().as_slice()).unwrap();
    let fb = read_series(fs::read(&shot_files(&b)[0]).unwrap().as_slice()).unwrap();
    assert_eq!(fb.series.count(), 500);
    assert_ne!(&fa.series.records()[..500], fb.series.records());
}

#[test]
fn simulated_mean_at_fixed_detected_mean() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "m.toml",
        "kind = \"twin_beam\"\nmodes = 100\neta = 0.05\naxis = \"mean_detected\"\nvalues = [3.88]\nshots = 50000\nseed = 5\n",
    );
    let out = dir.path().join("shots");
    ok(&photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&out)]));
    let file = read_series(fs::read(&shot_files(&out)[0]).unwrap().as_slice()).unwrap();
    let xs: Vec<f64> = file.series.records().iter().map(|r| 0.5 * (r.m1 + r.m2) as f64).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!((mean - 3.88).abs() < 4.0 * se, "mean {mean} se {se}");
}

#[test]
fn analyze_empty_order_list_gives_means_and_criteria() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let shots = dir.path().join("shots");
    ok(&photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&shots)]));
    let csv_path = dir.path().join("a.csv");
    let files = shot_files(&shots);
    let mut args = vec!["analyze", "--orders", "", "--bootstrap", "200", "--out", s(&csv_path)];
    args.extend(files.iter().map(|p| s(p)));
    ok(&photoncorr(&args));
    let (header, rows) = read_csv(&csv_path);
    assert_eq!(rows.len(), 3);
    assert!(!header.iter().any(|h| h.starts_with('g')), "{header:?}");
    for col in ["axis_value", "mean1", "mean2", "nrf", "schwarz", "high_order"] {
        assert!(header.iter().any(|h| h == col), "missing {col}");
    }
}

#[test]
fn csv_cells_are_plain_finite_numbers() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let shots = dir.path().join("shots");
    ok(&photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&shots)]));
    let files = shot_files(&shots);
    let a = dir.path().join("a.csv");
    let mut args = vec!["analyze", "--bootstrap", "200", "--out", s(&a)];
    args.extend(files.iter().map(|p| s(p)));
    ok(&photoncorr(&args));
    let t = dir.path().join("t.csv");
    ok(&photoncorr(&["theory", "--config", s(&cfg), "--out", s(&t)]));
    for path in [&a, &t] {
        let text = fs::read_to_string(path).unwrap();
        assert!(text.lines().next().unwrap().starts_with('#'));
        let (header, rows) = read_csv(path);
        for row in &rows {
            for h in header.iter().filter(|h| !matches!(h.as_str(), "file" | "axis")) {
                let cell = &row[h];
                if !cell.is_empty() {
                    let v: f64 = cell.parse().unwrap_or_else(|_| panic!("{h} = {cell}"));
                    assert!(v.is_finite());
                    assert!(!cell.contains(['e', 'E', ' ']), "{h} = {cell}");
                }
            }
        }
    }
}

#[test]
fn regeneration_from_metadata_reproduces_analysis() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let shots = dir.path().join("shots");
    ok(&photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&shots)]));
    let again = dir.path().join("again");
    fs::create_dir(&again).unwrap();
    for f in shot_files(&shots) {
        let file = read_series(fs::read(&f).unwrap().as_slice()).unwrap();
        let series = regenerate(&file).unwrap();
        let mut bytes = Vec::new();
        write_series(&mut bytes, &series, file.axis).unwrap();
        fs::write(again.join(f.file_name().unwrap()), bytes).unwrap();
    }
    let analyze = |src: &Path, out: &Path| {
        let files = shot_files(src);
        let mut args = vec!["analyze", "--bootstrap", "200", "--out", s(out)];
        args.extend(files.iter().map(|p| s(p)));
        ok(&photoncorr(&args));
        fs::read(out).unwrap()
    };
    let x = analyze(&shots, &dir.path().join("x.csv"));
    let y = analyze(&again, &dir.path().join("y.csv"));
    assert_eq!(x, y);
}

#[test]
fn theory_rows_match_closed_forms() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "t.toml",
        "kind = \"twin_beam\"\nmodes = 100\neta = 0.05\naxis = \"mean_detected\"\nvalues = [1.0, 2.0]\norders = \"1:1,2:1,2:2,3:1\"\n",
    );
    let out = dir.path().join("t.csv");
    ok(&photoncorr(&["theory", "--config", s(&cfg), "--out", s(&out)]));
    let (_, rows) = read_csv(&out);
    let r = &rows[0];
    for (col, want) in [
        ("twb_g11", 1.06),
        ("twb_g21", 2.1912),
        ("twb_g22", 4.594596),
        ("twb_g31", 5.669236),
    ] {
        assert!((val(r, col) / want - 1.0).abs() < 1e-12, "{col} = {}", val(r, col));
    }
    assert!((val(&rows[1], "coherent_g22") - 2.25).abs() < 1e-12);
}

#[test]
fn many_mode_thermal_row_approaches_coherent_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "t.toml",
        "kind = \"multimode_thermal\"\nmean_detected = 2\neta = 0.05\naxis = \"modes\"\nvalues = [1e6]\norders = \"1:1,1:2,2:1,2:2,1:3,3:1\"\n",
    );
    let out = dir.path().join("t.csv");
    ok(&photoncorr(&["theory", "--config", s(&cfg), "--out", s(&out)]));
    let (header, rows) = read_csv(&out);
    let r = &rows[0];
    let mut checked = 0;
    for h in header.iter().filter(|h| h.starts_with("thermal_g")) {
        let coherent = h.replace("thermal", "coherent");
        let (a, b) = (val(r, h), val(r, &coherent));
        assert!((a - b).abs() < 1e-5 * b, "{h}: {a} vs {b}");
        checked += 1;
    }
    assert_eq!(checked, 6);
}

#[test]
fn theory_needs_oracle_for_other_orders() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("t.csv");
    let r = photoncorr(&["theory", "--config", s(&cfg), "--out", s(&out), "--orders", "4:1"]);
    assert_eq!(r.status.code(), Some(5), "{}", stderr(&r));
    assert!(!out.exists());
    ok(&photoncorr(&["theory", "--config", s(&cfg), "--out", s(&out), "--orders", "4:1", "--oracle"]));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("# method.g41 = oracle"));
    let (_, rows) = read_csv(&out);
    assert!(val(&rows[0], "twb_g41") > val(&rows[0], "thermal_g41"));
}

#[test]
fn theory_with_unbalanced_detectors_uses_oracle() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "u.toml",
        "kind = \"twin_beam\"\nmodes = 100\neta1 = 0.05\neta2 = 0.1\naxis = \"mean_detected\"\nvalues = [1.0]\norders = \"1:1\"\n",
    );
    let out = dir.path().join("t.csv");
    let r = photoncorr(&["theory", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(5));
    ok(&photoncorr(&["theory", "--config", s(&cfg), "--out", s(&out), "--oracle"]));
}

#[test]
fn low_efficiency_sweep_g22_follows_theory() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "sweep.toml", LOW_EFFICIENCY_SWEEP);
    let shots = dir.path().join("shots");
    ok(&photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&shots)]));
    let files = shot_files(&shots);
    let out = dir.path().join("a.csv");
    let mut args = vec!["analyze", "--orders", "2:2", "--out", s(&out)];
    args.extend(files.iter().map(|p| s(p)));
    ok(&photoncorr(&args));
    let (_, rows) = read_csv(&out);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let m = val(r, "axis_value");
        let want = twb_g(2, 2, &TheoryPoint::new(m, 100.0, 0.05).unwrap()).unwrap();
        let (g, se) = (val(r, "g22"), val(r, "g22_se"));
        assert!((g - want).abs() < 4.0 * se, "m={m}: {g} ± {se} vs {want}");
    }
}

#[test]
fn thermal_high_order_is_at_the_boundary() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "th.toml",
        "kind = \"multimode_thermal\"\nmodes = 10\neta = 0.05\ntransmittance = 0.5\naxis = \"mean_detected\"\nvalues = [1.0, 3.88]\nshots = 50000\nseed = 9\n",
    );
    let shots = dir.path().join("shots");
    ok(&photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&shots)]));
    let files = shot_files(&shots);
    let out = dir.path().join("a.csv");
    let mut args = vec!["analyze", "--orders", "1:1", "--out", s(&out)];
    args.extend(files.iter().map(|p| s(p)));
    ok(&photoncorr(&args));
    let (_, rows) = read_csv(&out);
    for r in &rows {
        let (h, se) = (val(r, "high_order"), val(r, "high_order_se"));
        assert!((h - 1.0).abs() < 4.0 * se, "{h} ± {se}");
        let m = val(r, "axis_value");
        let g = val(r, "g11");
        assert!((g - thermal_g(1, 1, m, 10.0).unwrap()).abs() < 4.0 * val(r, "g11_se"));
    }
}

#[test]
fn criteria_on_config_and_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let exact = dir.path().join("c.csv");
    ok(&photoncorr(&["criteria", "--config", s(&cfg), "--out", s(&exact)]));
    let (_, rows) = read_csv(&exact);
    for r in &rows {
        assert_eq!(r["schwarz_pass"], "true");
        assert_eq!(r["nrf_pass"], "true");
        assert_eq!(r["high_order_pass"], "true");
        assert!((val(r, "nrf") - 0.95).abs() < 1e-9);
    }
    let shots = dir.path().join("shots");
    ok(&photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&shots)]));
    let files = shot_files(&shots);
    let emp = dir.path().join("e.csv");
    let mut args = vec!["criteria", "--bootstrap", "200", "--out", s(&emp)];
    args.extend(files.iter().map(|p| s(p)));
    ok(&photoncorr(&args));
    let (header, rows) = read_csv(&emp);
    assert_eq!(rows.len(), 3);
    assert!(header.iter().any(|h| h == "high_order_z"));
}

#[test]
fn bad_config_exits_2_with_location() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "kind = \"twin_beam\"\nmodes = = 100\n");
    let r = photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(r.status.code(), Some(2));
    assert!(stderr(&r).contains("line 2"), "{}", stderr(&r));
    let cfg = write_config(dir.path(), "bad2.toml", &SMALL.replace("shots = 1000", "shots = 5"));
    let r = photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(r.status.code(), Some(2));
    assert!(stderr(&r).contains("shots"));
    let r = photoncorr(&["simulate", "--config", s(&dir.path().join("missing.toml")), "--out", "o"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn bad_thread_count_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let r = photoncorr_env(
        &["theory", "--config", s(&cfg), "--out", s(&dir.path().join("t.csv"))],
        &[("PHOTONCORR_THREADS", "zero")],
    );
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let r = photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&blocker.join("sub"))]);
    assert_eq!(r.status.code(), Some(3));
    let r = photoncorr(&["theory", "--config", s(&cfg), "--out", s(&blocker.join("t.csv"))]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn corrupt_file_exits_4_with_name_and_offset() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let shots = dir.path().join("shots");
    ok(&photoncorr(&["simulate", "--config", s(&cfg), "--out", s(&shots)]));
    let f = &shot_files(&shots)[0];
    let text = fs::read_to_string(f).unwrap();
    let header_len: usize = text.lines().take_while(|l| l.starts_with('#')).map(|l| l.len() + 1).sum();
    let mut bad = text.clone();
    bad.insert_str(header_len, "7;x\n");
    let bad_path = dir.path().join("broken.shots");
    fs::write(&bad_path, bad).unwrap();
    let r = photoncorr(&["analyze", s(&bad_path), "--out", s(&dir.path().join("a.csv"))]);
    assert_eq!(r.status.code(), Some(4));
    let e = stderr(&r);
    assert!(e.contains("broken.shots"), "{e}");
    assert!(e.contains(&format!("byte offset {header_len}")), "{e}");
    assert!(!dir.path().join("a.csv").exists());
}
