use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use seriesfed::io::GeometryFile;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/ka_band_1x6.geom")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seriesfed"))
        .args(args)
        .output()
        .expect("failed to launch seriesfed")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn edited_fixture(dir: &Path, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(fixture()).unwrap();
    assert!(text.contains(from), "fixture lacks {from:?}");
    let path = dir.join("edited.geom");
    fs::write(&path, text.replace(from, to)).unwrap();
    path
}

fn fix() -> String {
    fixture().to_str().unwrap().to_owned()
}

#[test]
fn metrics_report_fields() {
    let out = run(&["metrics", "--geom", &fix(), "--freq", "28"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    for key in [
        "resonance_ghz",
        "s11_min_db",
        "vswr_min",
        "band_ghz",
        "peak_gain_dbi",
        "directivity_dbi",
        "phi0_hpbw_deg",
        "phi90_hpbw_deg",
        "phi0_sll_db",
        "phi90_sll_db",
        "warnings",
        "null_reasons",
    ] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["freq_ghz"], 28.0);
    assert_eq!(r["warnings"][0]["code"], "electrically_thick_substrate");
    // every null carries a reason
    for (key, value) in r.as_object().unwrap() {
        if value.is_null() {
            assert!(
                r["null_reasons"].get(key).is_some(),
                "{key} null without reason"
            );
        }
    }
}

#[test]
fn design_reports_synthesis() {
    let out = run(&["design", "--f0", "28", "--geom", &fix()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&out);
    let w = r["patch_width_mm"].as_f64().unwrap();
    assert!((w - 3.785451428578272).abs() < 1e-9);
    assert_eq!(r["lines"][0]["name"], "feed");
}

#[test]
fn analyze_two_point_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let geom = edited_fixture(dir.path(), "points = 401", "points = 2");
    let s1p = dir.path().join("a.s1p");
    let csv = dir.path().join("a.csv");
    let out = run(&[
        "analyze",
        "--geom",
        geom.to_str().unwrap(),
        "--out",
        s1p.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(json(&out)["points"], 2);
    let touchstone = fs::read_to_string(&s1p).unwrap();
    assert_eq!(touchstone.lines().count(), 3);
    assert!(touchstone.starts_with("# GHz S RI R 50\n25.0 "));
    let table = fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert_eq!(table.lines().next(), Some("freq_ghz,s11_db,vswr"));
}

#[test]
fn pattern_exports() {
    let dir = tempfile::tempdir().unwrap();
    let cut = dir.path().join("cut.csv");
    let out = run(&[
        "pattern",
        "--geom",
        &fix(),
        "--freq",
        "28",
        "--cut",
        "90",
        "--grid",
        "1",
        "--out",
        cut.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(&cut).unwrap();
    assert_eq!(text.lines().count(), 1 + 360);
    let peak = text
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(peak, 0.0);

    let grid = dir.path().join("grid.csv");
    let out = run(&[
        "pattern",
        "--geom",
        &fix(),
        "--freq",
        "28",
        "--grid",
        "5",
        "--out",
        grid.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(&grid).unwrap().lines().count(),
        1 + 37 * 72
    );
}

#[test]
fn empty_free_list_reemits_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let tuned = dir.path().join("same.geom");
    let out = run(&[
        "optimize",
        "--geom",
        &fix(),
        "--target-f0",
        "28",
        "--free",
        "",
        "--out",
        tuned.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let original =
        GeometryFile::parse(&fs::read_to_string(fixture()).unwrap(), &fixture()).unwrap();
    let again = GeometryFile::parse(&fs::read_to_string(&tuned).unwrap(), &tuned).unwrap();
    assert_eq!(original, again);
    let printed = json(&out)["geometry"].as_str().unwrap().to_owned();
    assert_eq!(GeometryFile::parse(&printed, &tuned).unwrap(), original);
}

#[test]
fn resonance_tuning_then_rerun_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let geom = edited_fixture(
        dir.path(),
        "auto_design_f0_ghz = 28.0",
        "auto_design_f0_ghz = 26.7",
    );
    let tuned = dir.path().join("tuned.geom");
    let args = |g: &Path| {
        vec![
            "optimize".to_owned(),
            "--geom".to_owned(),
            g.to_str().unwrap().to_owned(),
            "--target-f0".to_owned(),
            "28".to_owned(),
            "--mode".to_owned(),
            "resonance".to_owned(),
            "--out".to_owned(),
            tuned.to_str().unwrap().to_owned(),
        ]
    };
    let a: Vec<String> = args(&geom);
    let out = run(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(json(&out)["result"]["best_value"].as_f64().unwrap() <= 0.15);

    let retuned = dir.path().join("tuned_again.geom");
    fs::copy(&tuned, &retuned).unwrap();
    let b: Vec<String> = args(&retuned);
    let out = run(&b.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(json(&out)["improvement"], 0.0);
}

#[test]
fn exhausted_budget_exits_two() {
    let out = run(&[
        "optimize",
        "--geom",
        &fix(),
        "--target-f0",
        "28",
        "--free",
        "L,W",
        "--max-evals",
        "3",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert_eq!(json(&out)["result"]["converged"], false);
}

#[test]
fn malformed_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(Vec<String>, &str)> = vec![
        (
            vec![
                "metrics".into(),
                "--geom".into(),
                "/no/such/file.geom".into(),
            ],
            "No such file",
        ),
        (vec!["bogus".into()], "unrecognized"),
        (vec!["metrics".into()], "--geom"),
        (
            vec![
                "metrics".into(),
                "--geom".into(),
                edited_fixture(dir.path(), "height_mm = 1.574", "height_mm = -1.574")
                    .to_str()
                    .unwrap()
                    .into(),
            ],
            "substrate.height_mm",
        ),
    ];
    for (args, needle) in cases {
        let out = run(&args.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(code(&out), 1, "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).contains(needle), "{args:?}: {}", stderr(&out));
    }

    let broken = edited_fixture(dir.path(), "eps_r = 3.0", "eps_r = = 3.0");
    let out = run(&["metrics", "--geom", broken.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));

    let no_dims = edited_fixture(dir.path(), "auto_design_f0_ghz = 28.0", "");
    let out = run(&["analyze", "--geom", no_dims.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("patch.width_mm"), "{}", stderr(&out));

    let f = fix();
    for args in [
        vec!["metrics", "--geom", &f, "--freq", "40"],
        vec!["metrics", "--geom", &f, "--grid", "0.7"],
        vec!["metrics", "--geom", &f, "--freq", "abc"],
        vec!["design", "--f0", "-28", "--geom", &f],
        vec![
            "pattern",
            "--geom",
            &f,
            "--freq",
            "28",
            "--cut",
            "0.3",
            "--out",
            "/tmp/x.csv",
        ],
        vec![
            "pattern",
            "--geom",
            &f,
            "--freq",
            "28",
            "--out",
            "/no/such/dir/x.csv",
        ],
        vec![
            "optimize",
            "--geom",
            &f,
            "--target-f0",
            "28",
            "--free",
            "length",
        ],
        vec![
            "optimize",
            "--geom",
            &f,
            "--target-f0",
            "40",
            "--mode",
            "resonance",
        ],
        vec![
            "optimize",
            "--geom",
            &f,
            "--target-f0",
            "28",
            "--w-match",
            "0",
        ],
    ] {
        let out = run(&args);
        assert_eq!(code(&out), 1, "{args:?}: {}", stderr(&out));
        assert!(out.stdout.is_empty() || args[0] == "pattern", "{args:?}");
    }
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["metrics", "--help"])), 0);
}
