use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn grass(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grass"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("GRASS_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn error_record(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line)
        .unwrap_or_else(|e| panic!("stderr is not a JSON record ({e}): {text}"))
}

/// Five observations of three variables; only x and y are strongly correlated.
fn toy_data(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("toy.csv");
    fs::write(&path, "x,y,z\n1,2,3\n2,4.1,1\n3,6.3,2\n4,7.9,0\n5,9.8,2\n").unwrap();
    path
}

fn edge_lines(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("edges.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_string)
        .collect()
}

#[test]
fn screen_lists_pairs_above_threshold() {
    let tmp = TempDir::new().unwrap();
    let data = toy_data(tmp.path());
    let out = tmp.path().join("out");
    let o = grass(
        &out,
        &[
            "screen",
            "--input",
            data.to_str().unwrap(),
            "--gamma",
            "0.5",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = edge_lines(&out);
    assert_eq!(lines.len(), 1);
    assert!(lines[0].starts_with("1,2,"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "screen");
    assert_eq!(manifest["resolved"]["gamma"], 0.5);
}

#[test]
fn threshold_above_one_selects_nothing() {
    let tmp = TempDir::new().unwrap();
    let data = toy_data(tmp.path());
    let out = tmp.path().join("out");
    let o = grass(
        &out,
        &[
            "screen",
            "--input",
            data.to_str().unwrap(),
            "--gamma",
            "1.5",
        ],
    );
    assert!(o.status.success());
    assert!(edge_lines(&out).is_empty());
}

#[test]
fn fpr_level_matches_equivalent_fixed_threshold() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    assert!(grass(
        &sim,
        &["simulate", "--family", "B", "--p", "20", "--n", "60", "--seed", "4"]
    )
    .status
    .success());
    let data = sim.join("data.csv");
    let by_q = tmp.path().join("q");
    assert!(grass(
        &by_q,
        &["screen", "--input", data.to_str().unwrap(), "--q", "0.1"]
    )
    .status
    .success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(by_q.join("manifest.json")).unwrap()).unwrap();
    let gamma = manifest["resolved"]["gamma"].as_f64().unwrap();
    let expected =
        grass::resolve_threshold::<f64>(&grass::ThresholdRule::FprControl { q: 0.1 }, 60, 20)
            .unwrap();
    assert_eq!(gamma, expected);
    let by_gamma = tmp.path().join("g");
    let g = format!("{gamma:?}");
    assert!(grass(
        &by_gamma,
        &["screen", "--input", data.to_str().unwrap(), "--gamma", &g]
    )
    .status
    .success());
    assert_eq!(edge_lines(&by_q), edge_lines(&by_gamma));
}

#[test]
fn simulate_writes_block_instance() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    let o = grass(
        &out,
        &[
            "simulate", "--family", "B", "--p", "50", "--n", "30", "--seed", "1",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(edge_lines(&out).len(), 100);
    for f in [
        "precision.csv",
        "covariance.csv",
        "data.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let data = fs::read_to_string(out.join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 31);
}

#[test]
fn simulated_matrices_round_trip() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    assert!(grass(
        &out,
        &["simulate", "--family", "C", "--p", "8", "--n", "12", "--seed", "9"]
    )
    .status
    .success());
    let cfg = grass::SimulationConfig {
        family: grass::Family::C,
        p: 8,
        n: 12,
        seed: 9,
        ..Default::default()
    };
    let inst = grass::build_instance(&cfg).unwrap();
    let (_, x) = grass::io::read_data_csv(&out.join("data.csv")).unwrap();
    assert_eq!(x, inst.data);
    let prec = grass::io::read_matrix_csv(&out.join("precision.csv")).unwrap();
    assert_eq!(
        grass::SymMatrix::from_rows(&prec.rows).unwrap(),
        inst.precision
    );
    let edges =
        grass::io::parse_edges_csv(&fs::read_to_string(out.join("edges.csv")).unwrap(), 8).unwrap();
    assert_eq!(edges, inst.edges);
}

#[test]
fn error_rate_report_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let args = [
        "table1",
        "--families",
        "A,B",
        "--n",
        "40",
        "--p",
        "20",
        "--replicates",
        "1",
        "--seed",
        "3",
    ];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(grass(&a, &args).status.success());
    let mut threaded = vec!["--threads", "1"];
    threaded.extend(args);
    assert!(grass(&b, &threaded).status.success());
    for f in ["table1.csv", "table1.json", "manifest.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let csv = fs::read_to_string(a.join("table1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"family":"C","p":10,"n":20,"seed":5,"bandwidth":2}"#,
    )
    .unwrap();
    let out = tmp.path().join("sim");
    let o = grass(
        &out,
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--bandwidth",
            "1",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(edge_lines(&out).len(), 9);
}

#[test]
fn glasso_size_guard_refuses_large_input() {
    let tmp = TempDir::new().unwrap();
    let p = 501;
    let mut text = String::new();
    for i in 0..4 {
        let row: Vec<String> = (0..p)
            .map(|j| (((i * 7 + j * 13) % 17) as f64 + 0.5 * i as f64).to_string())
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let data = tmp.path().join("wide.csv");
    fs::write(&data, text).unwrap();
    let out = tmp.path().join("out");
    let o = grass(
        &out,
        &[
            "stability",
            "--input",
            data.to_str().unwrap(),
            "--top-variance",
            "501",
            "--sizes",
            "5",
            "--splits",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["error"]["kind"], "size_guard");
    let o = grass(
        &out,
        &[
            "glasso",
            "--input",
            data.to_str().unwrap(),
            "--lambda",
            "0.5",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ragged_csv_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("bad.csv");
    fs::write(&data, "a,b\n1,2\n3\n").unwrap();
    let o = grass(
        &tmp.path().join("out"),
        &[
            "screen",
            "--input",
            data.to_str().unwrap(),
            "--gamma",
            "0.1",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    let rec = error_record(&o);
    assert_eq!(rec["error"]["kind"], "parse");
    assert!(rec["error"]["message"].as_str().unwrap().contains("line 3"));
}

#[test]
fn constant_column_is_named() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("flat.csv");
    fs::write(&data, "u,v,w\n1,5,2\n2,5,4\n3,5,1\n").unwrap();
    let o = grass(
        &tmp.path().join("out"),
        &[
            "screen",
            "--input",
            data.to_str().unwrap(),
            "--gamma",
            "0.1",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(error_record(&o)["error"]["message"]
        .as_str()
        .unwrap()
        .contains("'v'"));
}

#[test]
fn invalid_level_is_a_configuration_error() {
    let tmp = TempDir::new().unwrap();
    let data = toy_data(tmp.path());
    let o = grass(
        &tmp.path().join("out"),
        &["screen", "--input", data.to_str().unwrap(), "--q", "1.5"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&o)["error"]["kind"], "domain");
}

#[test]
fn glasso_and_nbsel_write_edge_lists() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    assert!(grass(
        &sim,
        &["simulate", "--family", "C", "--p", "10", "--n", "200", "--seed", "2"]
    )
    .status
    .success());
    let data = sim.join("data.csv");
    let gl = tmp.path().join("gl");
    let o = grass(
        &gl,
        &[
            "glasso",
            "--input",
            data.to_str().unwrap(),
            "--lambda",
            "0.1",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(gl.join("theta.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(gl.join("glasso.json")).unwrap()).unwrap();
    assert!(summary["gap"].as_f64().unwrap() <= 1e-8);
    let nb = tmp.path().join("nb");
    let o = grass(
        &nb,
        &[
            "nbsel",
            "--input",
            data.to_str().unwrap(),
            "--lambda",
            "0.1",
            "--rule",
            "and",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!edge_lines(&nb).is_empty());
}

#[test]
fn experiment_commands_produce_reports() {
    let tmp = TempDir::new().unwrap();
    let roc = tmp.path().join("roc");
    let o = grass(
        &roc,
        &[
            "roc",
            "--p",
            "20",
            "--n",
            "40",
            "--grid-size",
            "5",
            "--estimators",
            "grass,nbsel",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(roc.join("roc.csv")).unwrap();
    assert!(
        csv.contains("\nnbsel,or,") && csv.contains("\nnbsel,and,") && csv.contains("\ngrass,,")
    );
    let fig = tmp.path().join("fig");
    assert!(grass(&fig, &["fig1", "--p", "20", "--n", "40"])
        .status
        .success());
    assert!(fig.join("fig1.csv").exists());
    let hm = tmp.path().join("hm");
    let o = grass(
        &hm,
        &["heatmaps", "--p", "20", "--n", "40", "--replicates", "2"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(hm.join("heatmap_grass.csv").exists() && hm.join("truth.csv").exists());
    let o = grass(&hm, &["heatmaps", "--family", "A"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stability_with_labels() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    assert!(grass(
        &sim,
        &["simulate", "--family", "B", "--p", "20", "--n", "40", "--seed", "6"]
    )
    .status
    .success());
    let labels = tmp.path().join("labels.csv");
    let text: String = (0..40)
        .map(|i| if i % 2 == 0 { "x\n" } else { "y\n" })
        .collect();
    fs::write(&labels, text).unwrap();
    let out = tmp.path().join("st");
    let o = grass(
        &out,
        &[
            "stability",
            "--input",
            sim.join("data.csv").to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
            "--sizes",
            "3,6",
            "--splits",
            "3",
            "--top-variance",
            "10",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("stability.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
