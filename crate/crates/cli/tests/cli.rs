//! End-to-end runs of the `ppwave` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const LAMBDA_V: &str = r#"
[metric]
m = 1
H = "2 + sin(x)"

[surface]
level_set = "2*v"

[grid]
ranges = [[-1.0, 1.0], [-1.0, 1.0]]
nodes = [5, 5]
"#;

const MINKOWSKI_PLANE: &str = r#"
[metric]
H = "1"

[surface]
graph = "0.3*u - 0.4*x + 2"

[grid]
ranges = [[0.0, 1.0], [0.0, 1.0]]
nodes = [9, 9]

[solver]
boundary_data = "0.3*u - 0.4*x + 2"
initial = "0.3*u - 0.4*x + 2 + 0.05*sin(3.14159265358979*u)*sin(3.14159265358979*x)"
"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self { dir: TempDir::new().unwrap() }
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn ppwave(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppwave"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("PPWAVE_THREADS")
        .output()
        .unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_minkowski_plane_is_exact() {
    let ws = Workspace::new();
    let cfg = ws.config("plane.toml", MINKOWSKI_PLANE);
    let o = ppwave(&["verify"], &cfg, &ws.out("out"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(ws.out("out").join("verify.json"));
    let reports = report["result"]["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 5);
    for r in reports {
        assert!(r["max_residual"].as_f64().unwrap() <= 1e-12, "{r}");
    }
    assert_eq!(report["tool"], "ppwave");
    assert_eq!(report["config"]["surface"]["kind"], "graph");
}

#[test]
fn verify_lambda_v_passes_with_second_order() {
    let ws = Workspace::new();
    let cfg = ws.config("lv.toml", LAMBDA_V);
    let o = ppwave(&["verify"], &cfg, &ws.out("out"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(ws.out("out").join("verify.json"));
    assert_eq!(report["result"]["all_pass"], true);
    for r in report["result"]["reports"].as_array().unwrap() {
        let order = r["order"].as_f64().unwrap();
        assert!((1.7..=2.3).contains(&order), "{r}");
    }
}

#[test]
fn verify_reports_identity_failure() {
    // a coarse step on a high-frequency graph: truncation error beats 10 h² scale
    let ws = Workspace::new();
    let text = MINKOWSKI_PLANE.replace("0.3*u - 0.4*x + 2\"\n\n[grid]", "0.01*sin(12*x)\"\n\n[grid]");
    let cfg = ws.config("wavy.toml", &text);
    let o = ppwave(&["verify", "--h", "0.05"], &cfg, &ws.out("out"));
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("identity check failed"));
    let report = json(ws.out("out").join("verify.json"));
    assert_eq!(report["result"]["all_pass"], false);
    assert_eq!(report["config"]["grid"]["h"], 0.05);
}

#[test]
fn solve_with_non_spacelike_guess_reports_node() {
    let ws = Workspace::new();
    let text = MINKOWSKI_PLANE.replace(
        "initial = \"0.3*u - 0.4*x + 2 + 0.05*sin(3.14159265358979*u)*sin(3.14159265358979*x)\"",
        "initial = \"0.3*u - 0.4*x + 2 + 0.9*x*x\"",
    );
    let cfg = ws.config("bad_guess.toml", &text);
    let o = ppwave(&["solve"], &cfg, &ws.out("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("not spacelike at node (") && err.contains("chart point (u, x) = ("), "{err}");
}

#[test]
fn solve_minkowski_plane_recovers_plane() {
    let ws = Workspace::new();
    let cfg = ws.config("plane.toml", MINKOWSKI_PLANE);
    let o = ppwave(&["solve"], &cfg, &ws.out("out"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = json(ws.out("out").join("solve.json"));
    assert_eq!(summary["result"]["status"], "converged");
    assert!(summary["result"]["iterations"].as_u64().unwrap() <= 5);

    let csv = fs::read_to_string(ws.out("out").join("solve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# dims u=9 x=9"));
    assert_eq!(lines.next(), Some("# ranges u=[0,1] x=[0,1]"));
    assert_eq!(lines.next(), Some("u,x,f"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 81);
    // row-major: x varies fastest
    assert_eq!((rows[1][0], rows[1][1]), (0.0, 0.125));
    for r in rows {
        assert!((r[2] - (0.3 * r[0] - 0.4 * r[1] + 2.0)).abs() <= 1e-8);
    }
}

#[test]
fn cmc_torus_is_a_solver_failure() {
    let ws = Workspace::new();
    let cfg = ws.config(
        "torus.toml",
        r#"
[metric]
H = "1.5"
periods = { u = 6.283185307179586, x = 6.283185307179586 }

[grid]
ranges = [[0.0, 6.283185307179586], [0.0, 6.283185307179586]]
nodes = [16, 16]

[solver]
boundary = "periodic"
initial = "0.2*sin(u)"
target = 0.5
"#,
    );
    let o = ppwave(&["solve"], &cfg, &ws.out("out"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let summary = json(ws.out("out").join("solve.json"));
    assert_ne!(summary["result"]["status"], "converged");
}

#[test]
fn bad_configs_exit_with_config_error() {
    let ws = Workspace::new();
    let cases = [
        ("syntax.toml", "[metric\nH = \"1\"".to_string()),
        ("expr.toml", LAMBDA_V.replace("2 + sin(x)", "2 + sin(y)")),
        ("nodes.toml", LAMBDA_V.replace("[5, 5]", "[3, 5]")),
        ("unknown.toml", LAMBDA_V.replace("m = 1", "m = 1\npotential = \"1\"")),
    ];
    for (name, text) in cases {
        let cfg = ws.config(name, &text);
        let o = ppwave(&["verify"], &cfg, &ws.out("out"));
        assert_eq!(o.status.code(), Some(3), "{name}: {}", stderr(&o));
        assert!(stderr(&o).contains("config error"), "{name}: {}", stderr(&o));
    }
    let o = ppwave(&["verify"], &ws.out("missing.toml"), &ws.out("out"));
    assert_eq!(o.status.code(), Some(3));
    // expression errors point at the offending line
    let cfg = ws.config("expr.toml", &LAMBDA_V.replace("2 + sin(x)", "2 + sin(y)"));
    assert!(stderr(&ppwave(&["verify"], &cfg, &ws.out("out"))).contains("line 4: [metric] H"));
    // a surface command without a surface
    let cfg = ws.config("nosurf.toml", "[metric]\nH = \"1\"\n[grid]\nranges = [[0.0, 1.0], [0.0, 1.0]]\nnodes = [5, 5]\n");
    assert_eq!(ppwave(&["analyze"], &cfg, &ws.out("out")).status.code(), Some(3));
    // usage errors share the config status
    let o = Command::new(env!("CARGO_BIN_EXE_ppwave")).arg("verify").output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn curvature_reports_closed_forms_and_oracle_deltas() {
    let ws = Workspace::new();
    let cfg = ws.config(
        "cubic.toml",
        "[metric]\nH = \"x^3\"\n[grid]\nranges = [[0.0, 1.0], [-2.0, 2.0]]\nnodes = [5, 5]\n",
    );
    let o = ppwave(&["curvature"], &cfg, &ws.out("out"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let result = &json(ws.out("out").join("curvature.json"))["result"];
    assert!(result["max_christoffel_oracle_delta"].as_f64().unwrap() < 1e-5);
    assert!(result["max_ricci_oracle_delta"].as_f64().unwrap() < 1e-5);
    for p in result["points"].as_array().unwrap() {
        let x = p["chart_point"][1].as_f64().unwrap();
        assert!((p["ricci_uu"].as_f64().unwrap() + 3.0 * x).abs() < 1e-12, "{p}");
    }

    let cfg = ws.config(
        "flat.toml",
        "[metric]\nH = \"2.5\"\n[grid]\nranges = [[0.0, 1.0], [-2.0, 2.0]]\nnodes = [5, 5]\n",
    );
    assert_eq!(ppwave(&["curvature"], &cfg, &ws.out("flat")).status.code(), Some(0));
    let result = &json(ws.out("flat").join("curvature.json"))["result"];
    assert_eq!(result["max_abs_christoffel"], 0.0);
    assert_eq!(result["max_abs_ricci_uu"], 0.0);
}

#[test]
fn tcc_classifies_potentials() {
    let ws = Workspace::new();
    for (h, satisfied, min) in [("-x^2", true, 1.0), ("x^2", false, -1.0)] {
        let cfg = ws.config(
            "tcc.toml",
            &format!("[metric]\nH = \"{h}\"\n[grid]\nranges = [[0.0, 1.0], [-1.0, 1.0]]\nnodes = [5, 5]\n"),
        );
        let o = ppwave(&["tcc"], &cfg, &ws.out("out"));
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let result = &json(ws.out("out").join("tcc.json"))["result"];
        assert_eq!(result["satisfied_on_samples"], satisfied);
        assert!((result["min_ricci_uu"].as_f64().unwrap() - min).abs() < 1e-12);
    }
}

#[test]
fn analyze_writes_row_major_csv() {
    let ws = Workspace::new();
    let cfg = ws.config("lv.toml", LAMBDA_V);
    let o = ppwave(&["analyze"], &cfg, &ws.out("out"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(ws.out("out").join("analyze.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# dims u=5 x=5");
    assert_eq!(lines[1], "# ranges u=[-1,1] x=[-1,1]");
    let columns: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(lines.len(), 3 + 25);
    let eta = columns.iter().position(|c| *c == "eta").unwrap();
    for row in &lines[3..] {
        let cells: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        let h = 2.0 + cells[1].sin();
        assert!((cells[eta] - h.powf(-0.5)).abs() < 1e-12);
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let ws = Workspace::new();
    let lv = ws.config("lv.toml", LAMBDA_V);
    let plane = ws.config("plane.toml", MINKOWSKI_PLANE);
    for (cmd, cfg, files) in [
        ("verify", &lv, vec!["verify.json"]),
        ("analyze", &lv, vec!["analyze.csv", "analyze.json"]),
        ("solve", &plane, vec!["solve.csv", "solve.json"]),
    ] {
        assert_eq!(ppwave(&[cmd], cfg, &ws.out("a")).status.code(), Some(0));
        assert_eq!(ppwave(&[cmd], cfg, &ws.out("b")).status.code(), Some(0));
        for f in files {
            let a = fs::read(ws.out("a").join(f)).unwrap();
            let b = fs::read(ws.out("b").join(f)).unwrap();
            assert!(a == b, "{cmd}: {f} differs");
        }
    }
}

#[test]
fn threads_come_from_flag_or_environment() {
    let ws = Workspace::new();
    let cfg = ws.config("lv.toml", LAMBDA_V);
    assert_eq!(ppwave(&["verify"], &cfg, &ws.out("one")).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_ppwave"))
        .args(["verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(ws.out("env"))
        .env("PPWAVE_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(ppwave(&["verify", "--threads", "4"], &cfg, &ws.out("flag")).status.code(), Some(0));
    let one = fs::read(ws.out("one").join("verify.json")).unwrap();
    assert_eq!(one, fs::read(ws.out("env").join("verify.json")).unwrap());
    assert_eq!(one, fs::read(ws.out("flag").join("verify.json")).unwrap());
    assert_eq!(ppwave(&["verify", "--threads", "0"], &cfg, &ws.out("zero")).status.code(), Some(3));
}
