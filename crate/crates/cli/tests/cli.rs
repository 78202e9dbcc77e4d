use std::path::Path;
use std::process::{Command, Output};

fn gk(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gk"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("GK_THREADS", t),
        None => cmd.env_remove("GK_THREADS"),
    };
    cmd.output().expect("gk runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{"n":10,"m":20,"trials":3,"a":[0,0.25],"b":[1,-0.5],
            "sigma_grid":{"start":0,"stop":0.5,"step":0.25},
            "sigma_tilde_grid":{"start":0,"stop":1,"step":0.5},
            "seed":7,"clip":0.5,"trace":{"sigma":0.25,"sigma_tilde":0.5,"vertex":4}}"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn heatmap_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let res = gk(&["heatmap", "--config", &cfg, "--out", out.to_str().unwrap(), "--svg"], Some("2"));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for name in ["heatmap_kalman", "heatmap_inverse"] {
        let (header, rows) = read_csv(&out.join(format!("{name}.csv")));
        assert_eq!(header, ["sigma", "sigma_tilde", "value", "n_trials", "flagged"]);
        assert_eq!(rows.len(), 9);
        // sigma = 0 row: the state never leaves zero, so no trial is usable.
        assert!(rows[..3].iter().all(|r| r[2] == "NaN" && r[3] == "0" && r[4] == "1"));
        assert!(rows[3..].iter().all(|r| r[3] == "3"));
        let svg = std::fs::read_to_string(out.join(format!("{name}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn trace_and_simulate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("trace");
    assert!(gk(&["trace", "--config", &cfg, "--out", out.to_str().unwrap()], None).status.success());
    let (header, rows) = read_csv(&out.join("energy.csv"));
    assert_eq!(header, ["k", "e_true", "e_kalman", "e_inverse"]);
    assert_eq!(rows.len(), 20);
    let (header, rows) = read_csv(&out.join("vertex.csv"));
    assert_eq!(header, ["k", "x_true", "x_kalman", "x_inverse"]);
    assert_eq!(rows.first().unwrap()[0], "1");

    let out = dir.path().join("sim");
    assert!(gk(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()], None).status.success());
    let (header, rows) = read_csv(&out.join("trajectory.csv"));
    assert_eq!(header, ["k", "vertex", "x", "z"]);
    assert_eq!(rows.len(), 21 * 10);
    assert_eq!(rows[0][1], "1");
    assert_eq!(rows[0][3], "");
    let graph: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("graph.json")).unwrap()).unwrap();
    assert_eq!(graph["n"], 10);
    assert_eq!(graph["edges"][0], serde_json::json!([1, 2, 1.0]));
}

#[test]
fn verify_filters_by_module() {
    let res = gk(&["verify", "--filter", "kalman"], None);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(res.status.success(), "{stdout}");
    let rows: Vec<&str> = stdout.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|l| l.contains(" kalman ")));
    assert!(stdout.contains("dual-form equivalence"));
}

#[test]
fn bad_input_is_an_error() {
    assert_eq!(gk(&["verify", "--filter", "nope"], None).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("x");
    assert_eq!(gk(&["heatmap", "--config", &cfg, "--out", out.to_str().unwrap()], Some("0")).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n":10}"#).unwrap();
    assert_eq!(
        gk(&["trace", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()], None).status.code(),
        Some(2)
    );
}
