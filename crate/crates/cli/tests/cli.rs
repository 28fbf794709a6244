use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn plap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(args)
        .current_dir(dir)
        .env_remove("PLAP_OUT_DIR")
        .output()
        .unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn table(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn exponents_example_table() {
    let dir = TempDir::new().unwrap();
    let out = plap(dir.path(), &["exponents", "--p-min", "2.1", "--p-max", "10", "--steps", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = table(&dir.path().join("exponents.csv"));
    assert_eq!(
        rows[0],
        ["p", "p_conj", "alpha_star", "alpha_bk", "alpha_crit", "tau0", "c_radial_2d", "chain_pass"]
    );
    assert_eq!(rows.len(), 6);
    assert!(rows[1..].iter().all(|r| r[7] == "true"));
    assert_eq!(rows[1][0], "2.1");
    assert_eq!(rows[5][0], "10");
}

#[test]
fn exponents_at_two_leave_tau0_blank() {
    let dir = TempDir::new().unwrap();
    let out = plap(dir.path(), &["exponents", "--p-min", "2", "--p-max", "2", "--steps", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = table(&dir.path().join("exponents.csv"));
    assert_eq!(rows[1], ["2", "2", "1", "1", "1", "", "", "false"]);
}

#[test]
fn solve_example_converges() {
    let dir = TempDir::new().unwrap();
    let out = plap(dir.path(), &["solve", "--p", "3", "--rhs", "const:1", "--domain", "disk", "--n", "64"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let side = json(&dir.path().join("solution.json"));
    assert_eq!(side["converged"], true);
    assert!(side["residual_sup"].as_f64().unwrap() <= 2e-9);
    assert!(side["energy_history"].as_array().unwrap().len() > 8);
    assert_eq!(side["meta"]["subcommand"], "solve");
    assert_eq!(side["meta"]["config"]["n"], 64);
    let text = std::fs::read_to_string(dir.path().join("solution.csv")).unwrap();
    assert!(text.starts_with("# grid n=64 domain=disk\n# version="));
    assert!(text.contains("# config_hash=") && text.contains("# p=3\n"));
}

#[test]
fn unknown_flag_is_a_config_error_without_outputs() {
    let dir = TempDir::new().unwrap();
    let out = plap(dir.path(), &["solve", "--p", "3", "--tolerance", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(files(dir.path()).is_empty());
    let out = plap(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(files(dir.path()).is_empty());
}

#[test]
fn help_and_version_succeed() {
    let dir = TempDir::new().unwrap();
    assert_eq!(plap(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(plap(dir.path(), &["solve", "--help"]).status.code(), Some(0));
    assert_eq!(plap(dir.path(), &["--version"]).status.code(), Some(0));
    assert_eq!(plap(dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn invalid_values_name_their_key() {
    let dir = TempDir::new().unwrap();
    let cases: &[(&[&str], &str)] = &[
        (&["solve", "--p", "1.5"], "p:"),
        (&["solve", "--n", "16"], "p:"),
        (&["solve", "--p", "3", "--n", "7"], "n:"),
        (&["solve", "--p", "3", "--domain", "annulus"], "domain:"),
        (&["solve", "--p", "3", "--rhs", "cosh"], "rhs:"),
        (&["solve", "--p", "3", "--boundary", "affine:1"], "boundary:"),
        (&["solve", "--p", "3", "--eps-factor", "2"], "solver.eps_factor:"),
        (&["exponents", "--p-min", "5", "--p-max", "3"], "p_max:"),
        (&["oscillate", "--p", "3"], "solution:"),
        (&["oscillate", "--solution", "missing.csv"], "solution:"),
        (&["rescale", "--solution", "missing.csv", "--kind", "mu"], "solution:"),
        (&["convergence", "--ns", "64,32"], "ns:"),
        (&["corrector", "--p", "3", "--levels", "1,nan"], "--levels"),
        (&["solve", "--p", "inf"], "--p"),
    ];
    for (args, key) in cases {
        let out = plap(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).contains(key), "{args:?}: {}", stderr(&out));
    }
    assert!(files(dir.path()).is_empty());
}

#[test]
fn config_file_fills_gaps_and_flags_win() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "p = 2.5\nn = 16\ndomain = \"square\"\nboundary = \"quad\"\n[solver]\nmax_newton = 40\n",
    )
    .unwrap();
    let out = plap(dir.path(), &["solve", "--config", "run.toml", "--p", "3", "--out", "a.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let cfg = &json(&dir.path().join("a.json"))["meta"]["config"];
    assert_eq!(cfg["p"], 3.0);
    assert_eq!(cfg["n"], 16);
    assert_eq!(cfg["domain"], "square");
    assert_eq!(cfg["boundary"], "quad");
    assert_eq!(cfg["solver"]["max_newton"], 40);
    assert_eq!(cfg["solver"]["eps_min"], 1e-8);

    std::fs::write(
        dir.path().join("run.json"),
        r#"{"p": 3, "n": 16, "domain": "square", "boundary": "quad", "solver": {"max_newton": 40}}"#,
    )
    .unwrap();
    let out = plap(dir.path(), &["solve", "--config", "run.json", "--out", "b.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(
        json(&dir.path().join("a.json"))["meta"]["config_hash"],
        json(&dir.path().join("b.json"))["meta"]["config_hash"]
    );
    assert_eq!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap()
    );
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("c.toml"), "p = 3\nresolution = 32\n").unwrap();
    std::fs::write(dir.path().join("d.json"), r#"{"p": 3, "solver": {"eps": 0.1}}"#).unwrap();
    std::fs::write(dir.path().join("e.yaml"), "p: 3\n").unwrap();
    for (file, key) in [("c.toml", "resolution"), ("d.json", "eps"), ("e.yaml", "toml or .json")] {
        let out = plap(dir.path(), &["solve", "--config", file, "--out", "x/s.csv"]);
        assert_eq!(out.status.code(), Some(2), "{file}");
        assert!(stderr(&out).contains(key), "{file}: {}", stderr(&out));
    }
    assert!(!dir.path().join("x").exists());
}

#[test]
fn non_convergence_exits_one_with_diagnostics() {
    let dir = TempDir::new().unwrap();
    let out = plap(dir.path(), &["solve", "--p", "3", "--n", "16", "--max-newton", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("did not converge"));
    let side = json(&dir.path().join("solution.json"));
    assert_eq!(side["converged"], false);
    assert!(side["stages"].as_array().unwrap().iter().any(|s| s["converged"] == false));
}

#[test]
fn numerical_breakdown_writes_failure_json() {
    let dir = TempDir::new().unwrap();
    assert_eq!(plap(dir.path(), &["solve", "--p", "3", "--n", "16"]).status.code(), Some(0));
    let out = plap(dir.path(), &["rescale", "--kind", "mu", "--solution", "solution.csv"]);
    assert_eq!(out.status.code(), Some(1));
    let side = json(&dir.path().join("rescaled.json"));
    assert_eq!(side["status"], "failed");
    assert!(side["error"].as_str().unwrap().contains("critical point"));
    assert!(!dir.path().join("rescaled.csv").exists());
}

#[test]
fn out_dir_variable_sets_default_location() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(["exponents", "--steps", "2"])
        .current_dir(dir.path())
        .env("PLAP_OUT_DIR", "results")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(files(dir.path()), ["results"]);
    assert!(dir.path().join("results/exponents.csv").exists());
}

#[test]
fn analysis_commands_read_p_from_the_solution() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(plap(d, &["solve", "--p", "3", "--n", "32"]).status.code(), Some(0));

    let out = plap(d, &["oscillate", "--solution", "solution.csv", "--levels", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = table(&d.join("profile.csv"));
    assert_eq!(rows[0], ["r", "osc_centered", "osc_linear", "bound_rhs", "ratio_to_bound"]);
    assert_eq!(rows.len(), 4);
    let side = json(&d.join("profile.json"));
    assert_eq!(side["meta"]["config"]["p"], 3.0);
    assert_eq!(side["triangle_inequalities_hold"], true);
    assert_eq!(side["classification"][0]["class"], "critical");

    let out = plap(d, &["oscillate", "--solution", "solution.csv", "--levels", "6"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("levels:"), "{}", stderr(&out));

    let out = plap(d, &["qr", "--solution", "solution.csv", "--out", "qr.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = json(&d.join("qr.json"));
    assert!(report["kqr_defect"]["count"].as_u64().unwrap() > 0);
    assert!(report["gradient_mapping"]["nodes"].as_u64().unwrap() > 0);
    let morrey = table(&d.join("qr_morrey.csv"));
    assert_eq!(morrey[0], ["r", "integral", "ratio"]);
    assert_eq!(morrey[1][2], "0.5");
}

#[test]
fn theta_rescale_hits_delta0() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(plap(d, &["solve", "--p", "3", "--n", "32", "--rhs", "const:2"]).status.code(), Some(0));
    let out = plap(d, &["rescale", "--kind", "theta", "--solution", "solution.csv", "--delta0", "0.05"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let side = json(&d.join("rescaled.json"));
    assert!((side["f_tilde_sup"].as_f64().unwrap() - 0.05).abs() <= 1e-12);
    assert_eq!(side["record"]["kind"], "theta");
    assert!(d.join("rescaled_f_tilde.csv").exists());

    let out = plap(d, &["rescale", "--kind", "theta", "--solution", "solution.csv", "--delta0", "50"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("admissible delta0"), "{}", stderr(&out));
    let out = plap(d, &["rescale", "--kind", "mu", "--solution", "solution.csv", "--lambda0", "0.3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("lambda0:"));
}

#[test]
fn corrector_sweep_table() {
    let dir = TempDir::new().unwrap();
    let out = plap(dir.path(), &["corrector", "--p", "3", "--n", "16", "--levels", "1,0.1,0"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = table(&dir.path().join("corrector.csv"));
    assert_eq!(rows[0], ["f_sup", "u_sup", "xi_sup", "grad_xi_sup", "converged"]);
    assert_eq!(rows[3][2], "0");
    let side = json(&dir.path().join("corrector.json"));
    assert_eq!(side["xi_sup_decreasing"], true);
    assert_eq!(side["all_converged"], true);
}

#[test]
fn convergence_study_table() {
    let dir = TempDir::new().unwrap();
    let out = plap(dir.path(), &["convergence", "--ns", "16,32,64", "--levels", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = table(&dir.path().join("convergence.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1][3], "");
    for r in &rows[2..] {
        assert!(r[3].parse::<f64>().unwrap() < 0.7);
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [a.path(), b.path()] {
        let out = plap(dir, &["solve", "--p", "2.5", "--n", "16", "--initial", "random", "--seed", "3"]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for name in ["solution.csv", "solution.json"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
}
