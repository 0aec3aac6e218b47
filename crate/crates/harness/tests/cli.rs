use std::path::Path;
use std::process::{Command, Output};

fn prompt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prompt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const SMALL_LINEAR: &str = r#"
experiment = "linear"
n_simulations = 3
master_seed = 7
grid_resolution = 21

[linear]
multicollinearity = [0.0, 2.0]
contamination_pct = [0.0, 50.0]
"#;

#[test]
fn output_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("linear.toml");
    std::fs::write(&cfg, SMALL_LINEAR).unwrap();
    let mut outputs = Vec::new();
    for jobs in ["1", "4", "4"] {
        let out = dir.path().join(format!("out-{jobs}-{}", outputs.len()));
        let o = prompt(&[
            "run",
            cfg.to_str().unwrap(),
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((
            read(&out.join("results.csv")),
            read(&out.join("advantage.svg")),
            read(&out.join("summary.csv")),
        ));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
}

#[test]
fn verify_is_deterministic_and_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(jobs);
        let o = prompt(&[
            "verify",
            "--instances",
            "20",
            "--seed",
            "5",
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("information bound violations: 0"));
        csvs.push(read(&out.join("results.csv")));
    }
    assert_eq!(csvs[0], csvs[1]);

    let out = dir.path().join("single");
    let o = prompt(&["verify", "--instances", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let mut reader = csv::Reader::from_path(out.join("results.csv")).unwrap();
    let k = reader
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == "decomposition_residual")
        .unwrap();
    let records: Vec<_> = reader.records().collect::<Result<_, _>>().unwrap();
    assert_eq!(records.len(), 1);
    let residual: f64 = records[0][k].parse().unwrap();
    assert!(residual.abs() < 1e-9, "{residual}");
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "experiment = \"linear\"\nn_simulation = 3\n").unwrap();
    let o = prompt(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_simulation"));

    std::fs::write(&cfg, "experiment = \"linear\"\nn_simulations = 0\n").unwrap();
    let o = prompt(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let o = prompt(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn plot_renders_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    assert!(prompt(&[
        "verify",
        "--instances",
        "10",
        "--out",
        out.to_str().unwrap()
    ])
    .status
    .success());
    let svg = dir.path().join("plot.svg");
    let o = prompt(&[
        "plot",
        out.join("results.csv").to_str().unwrap(),
        svg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    roxmltree::Document::parse(&text).expect("well-formed SVG");
    assert_eq!(read(&svg), read(&out.join("advantage.svg")));
}

#[test]
fn default_configs_parse_back() {
    for kind in ["linear", "gp", "smoking", "toy-verify"] {
        let o = prompt(&["config", kind]);
        assert!(o.status.success());
        let text = String::from_utf8(o.stdout).unwrap();
        prompt_harness::ExperimentConfig::parse(&text).unwrap_or_else(|e| panic!("{kind}: {e}"));
    }
}
