use std::process::ExitCode;

use clap::Parser;

use super::{run, Cli};

struct Run {
    code: std::result::Result<ExitCode, String>,
    out: String,
}

impl Run {
    fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.out).unwrap()
    }

    fn code(&self) -> ExitCode {
        self.code.clone().unwrap_or_else(|e| panic!("{e}"))
    }
}

/// Runs the command in-process with output redirected to a temporary file.
fn matchnet(args: &[&str]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out");
    let mut argv = vec!["matchnet"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["--out", path.to_str().unwrap()]);
    let cli = Cli::try_parse_from(argv).unwrap();
    let code = run(cli).map_err(|e| format!("{e:#}"));
    let out = std::fs::read_to_string(&path).unwrap_or_default();
    Run { code, out }
}

#[test]
fn solve_reports_codes_for_each_outcome() {
    let ok = matchnet(&["solve", "--a", "0.5", "--c", "0.005", "--d", "0.015", "--V", "2", "--format", "json"]);
    assert_eq!(ok.code(), ExitCode::SUCCESS);
    let s = ok.json()["s_star"].as_f64().unwrap();
    assert!((s - 0.7852519544491616).abs() < 1e-7);

    let none = matchnet(&["solve", "--c", "0.01", "--format", "json"]);
    assert_eq!(none.code(), ExitCode::from(2));
    assert_eq!(none.json()["threshold"], 0.00369375);
    assert_eq!(none.json()["exists"], false);

    let bad = matchnet(&["solve", "--a", "1.5"]);
    assert!(bad.code.unwrap_err().contains("`a`"));
    let unknown = Cli::try_parse_from(["matchnet", "solve", "--nonsense"]).unwrap_err();
    assert!(unknown.use_stderr());
}

#[test]
fn two_type_solve_returns_the_figure_eight_pair() {
    let o = matchnet(&["solve", "--model", "heterogeneous", "--c", "0.003", "--h", "0.8", "--Y", "2", "--format", "json"]);
    assert_eq!(o.code(), ExitCode::SUCCESS);
    let v = o.json();
    assert!((v["s_h_star"].as_f64().unwrap() - 1.703015).abs() < 1e-6);
    assert!((v["s_l_star"].as_f64().unwrap() - 1.773328).abs() < 1e-6);
    assert_eq!(v["status"], "interior");
}

#[test]
fn rates_at_h_one_match_the_one_type_output() {
    let one = matchnet(&["rates", "--format", "json"]).json();
    let two = matchnet(&["rates", "--model", "heterogeneous", "--h", "1", "--format", "json"]).json();
    for key in ["psi_hh", "ups_hh", "m_summed_h", "m_weighted"] {
        assert_eq!(one[key], two[key], "{key}");
    }
    assert!((one["psi_hh"].as_f64().unwrap() - 0.518332407752983).abs() < 1e-15);
    let bench = matchnet(&["rates", "--model", "heterogeneous", "--format", "json"]).json();
    assert!((bench["psi_hh"].as_f64().unwrap() - 0.44256024060794874).abs() < 1e-12);
    assert_eq!(bench["m_weighted"], serde_json::Value::Null);
    let homogeneous_h = matchnet(&["rates", "--h", "0.8"]);
    assert!(homogeneous_h.code.unwrap_err().contains("fixes h = 1"));
}

#[test]
fn text_and_csv_records() {
    let text = matchnet(&["rates"]).out;
    assert!(text.lines().any(|l| l == "psi_hh = 0.5183324077529831"));
    let csv = matchnet(&["solve", "--format", "csv"]).out;
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("model,a,d,c,h,Y,V,n,exists,s_star"));
}

#[test]
fn config_files_fill_in_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "c = 0.005\nd = 0.015\nV = 2.0\na = 0.3\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = matchnet(&["solve", "--config", cfg, "--format", "json"]).json();
    assert_eq!(from_file["a"], 0.3);
    let overridden = matchnet(&["solve", "--config", cfg, "--a", "0.5", "--format", "json"]).json();
    assert_eq!(overridden["a"], 0.5);
    assert_eq!(overridden["V"], 2.0);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "colour = 3\n").unwrap();
    let o = matchnet(&["solve", "--config", bad.to_str().unwrap()]);
    assert!(o.code.unwrap_err().contains("unknown field"));
}

#[test]
fn figure_configs_parse_and_run() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    for (fig, first) in [(5, "a,s_star,"), (6, "a,s_star,"), (7, "a,s_h,s_l,"), (8, "a,s_h_star,"), (9, "a,s_h_star,")] {
        let cfg = format!("{root}/fig{fig}.toml");
        let o = matchnet(&["sweep", "--config", &cfg]);
        assert_eq!(o.code(), ExitCode::SUCCESS, "fig {fig}");
        assert!(o.out.starts_with(first), "fig {fig}");
        assert_eq!(o.out.lines().count(), 42, "fig {fig}");
    }
    let cfg = format!("{root}/simulate-benchmark.toml");
    let o = matchnet(&["simulate", "--config", &cfg, "--n", "2000", "--reps", "2"]);
    assert_eq!(o.code(), ExitCode::SUCCESS);
    assert!(o.out.contains("psi_hh"));
}

#[test]
fn sweep_json_lands_in_out() {
    let o = matchnet(&[
        "sweep", "--c", "0.005", "--V", "2", "--axis", "a", "--from", ".3", "--to", ".7", "--step", ".01", "--format",
        "json",
    ]);
    assert_eq!(o.code(), ExitCode::SUCCESS);
    assert_eq!(o.json()["rows"].as_array().unwrap().len(), 41);
}

#[test]
fn simulate_emits_replications_and_a_summary() {
    let base = ["simulate", "--model", "heterogeneous", "--n", "2000", "--reps", "4", "--seed", "3"];
    let csv = matchnet(&[&base[..], &["--format", "csv"]].concat());
    assert_eq!(csv.code(), ExitCode::SUCCESS);
    assert_eq!(csv.out.lines().count(), 5);
    let a = matchnet(&[&base[..], &["--format", "json"]].concat());
    let b = matchnet(&[&base[..], &["--format", "json"]].concat());
    assert_eq!(a.out, b.out);
    assert_eq!(a.json()["estimates"]["config"]["reps"], 4);
}

#[test]
fn quick_verification_passes() {
    let o = matchnet(&["verify", "--quick"]);
    assert_eq!(o.code(), ExitCode::SUCCESS, "{}", o.out);
    assert!(o.out.contains("overall: PASS"));
}
