use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use entangle_lab::bell::{g_factor, Region, WavePacketPair};
use entangle_lab::field::phi_radial;
use entangle_lab::{Formfactor, QuadratureSpec};

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_entangle-lab"));
    c.env_remove("ENTANGLE_LAB_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    cli().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> (i32, String) {
    let out = run(args);
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Header and data rows of a CSV produced by the CLI.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let (header, rows) = parse_csv(text);
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i]).collect()
}

fn trailer(text: &str) -> Value {
    let line = text.lines().last().unwrap();
    serde_json::from_str(line.strip_prefix("# ").unwrap()).unwrap()
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn phi_at_zero_time_vanishes() {
    let csv = ok(&["phi", "--t", "0", "--points", "17"]);
    assert!(column(&csv, "abs_phi_sq").iter().all(|v| *v == 0.0));
}

#[test]
fn phi_rows_match_library_calls() {
    let csv = ok(&[
        "phi",
        "--formfactor",
        "step",
        "--cutoff",
        "1.5",
        "--t",
        "2",
        "--points",
        "9",
    ]);
    let f = Formfactor::step(1.5).unwrap();
    let (header, rows) = parse_csv(&csv);
    assert_eq!(
        header,
        ["r", "t", "phi_re", "phi_im", "abs_phi_sq", "est_error"]
    );
    assert_eq!(rows.len(), 9);
    for row in rows {
        let phi = phi_radial(&f, row[0], 2.0, &QuadratureSpec::default()).unwrap();
        assert_eq!(row[2], phi.value.re);
        assert_eq!(row[3], phi.value.im);
        assert_eq!(row[4], phi.norm_sqr());
    }
}

#[test]
fn phi_rejects_zero_radius() {
    let (c, err) = code(&["phi", "--r-min", "0"]);
    assert_eq!(c, 1);
    assert!(err.contains("--r-min"), "{err}");
}

#[test]
fn provenance_header() {
    let csv = ok(&["phi", "--seed", "42", "--points", "2"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        format!("# entangle-lab {}", env!("CARGO_PKG_VERSION"))
    );
    assert_eq!(lines[1], "# command: phi");
    assert_eq!(lines[2], "# seed: 42");
    let config = json(lines[3].strip_prefix("# config: ").unwrap());
    assert_eq!(config["formfactor"], "step");
    assert_eq!(config["points"], 2);
}

#[test]
fn r0_sweep_zero_time_and_positivity() {
    let csv = ok(&["r0-sweep", "--t", "0", "--points", "8"]);
    assert!(column(&csv, "r0").iter().all(|v| *v == 0.0));

    let csv = ok(&[
        "r0-sweep",
        "--r-min",
        "10",
        "--r-max",
        "1000",
        "--points",
        "200",
        "--log-spacing",
    ]);
    let r0 = column(&csv, "r0");
    assert_eq!(r0.len(), 200);
    assert!(r0.iter().all(|v| *v > 0.0));
    assert_eq!(column(&csv, "r1"), column(&csv, "r2"));
}

#[test]
fn r0_sweep_swap_keeps_values() {
    let a = ok(&["r0-sweep", "--r2", "7", "--points", "12"]);
    let b = ok(&["r0-sweep", "--r2", "7", "--swap", "--points", "12"]);
    assert_eq!(column(&a, "r0"), column(&b, "r0"));
    assert_eq!(column(&a, "r1"), column(&b, "r2"));
}

#[test]
fn decay_fit_synthetic_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("synthetic.csv");
    let mut text = String::from("# injected\nr,y\n");
    for i in 0..50 {
        let r = 10f64.powf(1.0 + 2.0 * i as f64 / 49.0);
        text.push_str(&format!("{r},{}\n", 3.5 / r.powi(4)));
    }
    std::fs::write(&input, text).unwrap();
    let doc = json(&ok(&["decay-fit", "--input", input.to_str().unwrap()]));
    assert!((doc["slope"].as_f64().unwrap() + 4.0).abs() < 1e-6, "{doc}");
    assert_eq!(doc["used_envelope"], false);
    assert_eq!(doc["n_points"], 50);
}

#[test]
fn decay_fit_step_default_meets_bound() {
    let doc = json(&ok(&["decay-fit"]));
    assert!(doc["slope"].as_f64().unwrap() <= -1.9);
    assert_eq!(doc["window"], serde_json::json!([100.0, 1000.0]));
    assert_eq!(doc["used_envelope"], true);
}

#[test]
fn decay_fit_short_window_is_numerical_failure() {
    let (c, err) = code(&["decay-fit", "--r-min", "200", "--r-max", "1000"]);
    assert_eq!(c, 2, "{err}");
}

#[test]
fn chsh_all_space_violates() {
    let doc = json(&ok(&["chsh"]));
    assert_eq!(doc["g"], 1.0);
    assert_eq!(doc["g_method"], "tensorized");
    assert!((doc["s_weighted"].as_f64().unwrap() + 2.0 * SQRT_2).abs() < 1e-12);
    assert_eq!(doc["violated"], true);
    assert!(doc["s_lhv"].as_f64().unwrap().abs() <= 2.0);
}

#[test]
fn chsh_small_boxes_do_not_violate() {
    let doc = json(&ok(&[
        "chsh", "--box1", "-5.2", "-0.2", "-0.2", "-4.8", "0.2", "0.2", "--box2", "4.8", "-0.2",
        "-0.2", "5.2", "0.2", "0.2",
    ]));
    assert!(doc["g"].as_f64().unwrap() < 1e-2);
    assert_eq!(doc["violated"], false);
}

fn cube_args(center: f64, h: f64) -> Vec<String> {
    [center - h, -h, -h, center + h, h, h]
        .iter()
        .map(|v| format!("{v:e}"))
        .collect()
}

#[test]
fn chsh_verdict_flips_at_threshold() {
    // Bisect the cube half-width until g brackets 1/sqrt(2) as tightly as
    // floating point allows.
    let pair = WavePacketPair::product([-5.0, 0.0, 0.0], 1.0, [5.0, 0.0, 0.0], 1.0).unwrap();
    let g_of = |h: f64| {
        let o1 = Region::cube([-5.0, 0.0, 0.0], h).unwrap();
        let o2 = Region::cube([5.0, 0.0, 0.0], h).unwrap();
        g_factor(&pair, &o1, &o2, 1, 0).unwrap().g
    };
    let (mut lo, mut hi) = (0.5, 4.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g_of(mid) > FRAC_1_SQRT_2 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    for (h, expect) in [(lo, false), (hi, true)] {
        let b1 = cube_args(-5.0, h);
        let b2 = cube_args(5.0, h);
        let mut args = vec!["chsh", "--box1"];
        args.extend(b1.iter().map(String::as_str));
        args.push("--box2");
        args.extend(b2.iter().map(String::as_str));
        let doc = json(&ok(&args));
        let g = doc["g"].as_f64().unwrap();
        assert!((g - FRAC_1_SQRT_2).abs() < 1e-6);
        assert_eq!(doc["violated"], expect, "h = {h}, g = {g}");
        assert_eq!(doc["violated"], g > FRAC_1_SQRT_2);
    }
}

#[test]
fn g_factor_budget_too_small_exits_2() {
    let (c, err) = code(&[
        "chsh",
        "--packet",
        "correlated",
        "--sigma-rel",
        "0.5",
        "--box1",
        "-11",
        "-6",
        "-6",
        "1",
        "6",
        "6",
        "--box2",
        "-1",
        "-6",
        "-6",
        "11",
        "6",
        "6",
        "--budget",
        "5000",
    ]);
    assert_eq!(c, 2, "{err}");
    assert!(err.contains("budget"));
}

#[test]
fn g_factor_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let doc = json(&ok(&[
        "g-factor",
        "--out",
        out.to_str().unwrap(),
        "--points",
        "8",
    ]));
    assert_eq!(doc["g"], 1.0);
    let csv = std::fs::read_to_string(&out).unwrap();
    let g = column(&csv, "g");
    assert!(g.windows(2).all(|w| w[1] >= w[0]));
    let violated = column(&csv, "violated");
    for (g, v) in g.iter().zip(violated) {
        assert_eq!(v == 1.0, *g > FRAC_1_SQRT_2);
    }
}

#[test]
fn franson_fringe() {
    let csv = ok(&["franson", "--phi2", "0.4"]);
    let (_, rows) = parse_csv(&csv);
    assert_eq!(rows.len(), 360);
    for row in &rows {
        assert!((row[2] - row[0].cos().powi(2) / 4.0).abs() < 1e-12);
    }
    assert_eq!(rows[90][0], PI / 2.0);
    let t = trailer(&csv);
    assert!((t["visibility"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let r0 = t["r0"].as_f64().unwrap();
    assert!((t["mean_rc"].as_f64().unwrap() - r0 / 8.0).abs() < 1e-9);
}

#[test]
fn franson_efficiency_is_linear() {
    let full = column(&ok(&["franson", "--points", "24"]), "rc");
    let half = column(&ok(&["franson", "--points", "24", "--eta1", "0.5"]), "rc");
    for (a, b) in full.iter().zip(&half) {
        assert_eq!(*b, 0.5 * a);
    }
}

#[test]
fn franson_without_base_rate_fails_numerically() {
    let (c, _) = code(&["franson", "--t", "0"]);
    assert_eq!(c, 2);
}

#[test]
fn tolerance_failures_exit_2() {
    let (c, err) = code(&[
        "phi",
        "--formfactor",
        "gaussian",
        "--tol",
        "1e-15",
        "--r-min",
        "500",
        "--r-max",
        "1000",
        "--points",
        "2",
    ]);
    assert_eq!(c, 2, "{err}");
}

#[test]
fn argument_errors_exit_1() {
    assert_eq!(code(&["phi", "--bogus"]).0, 1);
    assert_eq!(code(&["phi", "--formfactor", "sinc"]).0, 1);
    assert_eq!(code(&["phi", "--cutoff", "-1"]).0, 1);
    assert_eq!(code(&["phi", "--tol", "0"]).0, 1);
    assert_eq!(code(&["phi", "--points", "1"]).0, 1);
    assert_eq!(code(&["chsh", "--box1", "1", "0", "0", "0", "1", "1"]).0, 1);
    assert_eq!(code(&["phi", "--config", "/nonexistent/run.json"]).0, 1);
    assert_eq!(code(&["nope"]).0, 1);
    assert_eq!(code(&["phi", "--help"]).0, 0);
}

#[test]
fn unwritable_output_exits_1() {
    assert_eq!(code(&["phi", "--out", "/nonexistent/dir/out.csv"]).0, 1);
}

#[test]
fn decay_fit_plot_renders() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("fit.svg");
    ok(&["decay-fit", "--plot", svg.to_str().unwrap()]);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.contains("<polyline"));
}

fn write_config(dir: &Path, name: &str, doc: Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn flags_and_config_are_equivalent() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(&str, Vec<&str>, Value)> = vec![
        (
            "phi",
            vec![
                "--formfactor",
                "bump",
                "--support",
                "0.5",
                "2",
                "--t",
                "1.5",
                "--points",
                "6",
                "--log-spacing",
            ],
            serde_json::json!({"formfactor": "bump", "support": [0.5, 2.0], "t": 1.5, "points": 6, "log-spacing": true}),
        ),
        (
            "r0-sweep",
            vec![
                "--formfactor",
                "gaussian",
                "--width",
                "2",
                "--r2",
                "3",
                "--swap",
                "--points",
                "5",
            ],
            serde_json::json!({"formfactor": "gaussian", "width": 2, "r2": 3, "swap": true, "points": 5}),
        ),
        (
            "decay-fit",
            vec![
                "--formfactor",
                "gaussian",
                "--points",
                "12",
                "--envelope",
                "off",
            ],
            serde_json::json!({"formfactor": "gaussian", "points": 12, "envelope": "off"}),
        ),
        (
            "chsh",
            vec![
                "--angles",
                "0",
                "45",
                "22.5",
                "67.5",
                "--seed",
                "9",
                "--lhv-samples",
                "500",
            ],
            serde_json::json!({"angles": [0, 45, 22.5, 67.5], "seed": 9, "lhv-samples": 500}),
        ),
        (
            "g-factor",
            vec![
                "--packet",
                "correlated",
                "--offset",
                "-6",
                "0",
                "0",
                "--sigma-rel",
                "2",
                "--budget",
                "20000",
                "--box1",
                "-5",
                "-2",
                "-2",
                "-1",
                "2",
                "2",
            ],
            serde_json::json!({"packet": "correlated", "offset": [-6, 0, 0], "sigma-rel": 2, "budget": 20000, "box1": [-5, -2, -2, -1, 2, 2]}),
        ),
        (
            "franson",
            vec!["--eta1", "0.8", "--phi2", "-0.3", "--points", "30"],
            serde_json::json!({"eta1": 0.8, "phi2": -0.3, "points": 30}),
        ),
    ];
    for (cmd, flags, doc) in cases {
        let path = write_config(dir.path(), &format!("{cmd}.json"), doc);
        let mut by_flags = vec![cmd];
        by_flags.extend(flags);
        let by_config = [cmd, "--config", path.as_str()];
        assert_eq!(ok(&by_flags), ok(&by_config), "{cmd}");
    }
}

#[test]
fn command_line_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "run.json",
        serde_json::json!({"t": 2.0, "points": 3}),
    );
    let a = ok(&["phi", "--config", &path, "--t", "0.5"]);
    let b = ok(&["phi", "--points", "3", "--t", "0.5"]);
    assert_eq!(a, b);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "bad.json", serde_json::json!({"cutof": 1.0}));
    assert_eq!(code(&["phi", "--config", &path]).0, 1);
}

#[test]
fn thread_cap_does_not_change_output() {
    let args = ["r0-sweep", "--formfactor", "gaussian", "--points", "40"];
    let one = cli()
        .args(args)
        .env("ENTANGLE_LAB_THREADS", "1")
        .output()
        .unwrap();
    let four = cli()
        .args(args)
        .env("ENTANGLE_LAB_THREADS", "4")
        .output()
        .unwrap();
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);

    let bad = cli()
        .args(args)
        .env("ENTANGLE_LAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn json_out_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chsh.json");
    let stdout = ok(&["chsh", "--json-out", path.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout);
}

#[test]
fn table_json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phi.json");
    let csv = ok(&["phi", "--points", "5", "--json-out", path.to_str().unwrap()]);
    let doc = json(&std::fs::read_to_string(&path).unwrap());
    let (header, rows) = parse_csv(&csv);
    assert_eq!(doc["columns"], serde_json::json!(header));
    assert_eq!(doc["rows"], serde_json::json!(rows));
    assert_eq!(doc["provenance"]["command"], "phi");
}
