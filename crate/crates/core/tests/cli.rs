use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cr_approx::cli::config::RunConfig;
use cr_approx::kernel::{select_constants, SelectionOptions};
use cr_approx::quadrature::{graph_point, Evaluator};
use tempfile::TempDir;

const RIGID: &str = r#"seed = 1

[manifold]
spec = "n=2 d=1; h1 = u1^2 + v1^2"
growth_c = 2.0
growth_n = 1
"#;

const CODIM2: &str = r#"seed = 1

[manifold]
spec = "n=3 d=2; h1 = u1^2; h2 = x1*u1 + v1^2"
growth_c = 3.0
growth_n = 1
"#;

const FLAT: &str = r#"seed = 1

[manifold]
spec = "n=2 d=1; h1 = 0"
growth_c = 1.0
growth_n = 0
"#;

struct Run {
    code: i32,
    stderr: String,
    out: PathBuf,
    _dir: TempDir,
}

fn run(config: &str, args: &[&str]) -> Run {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let o: Output = Command::new(env!("CARGO_BIN_EXE_cr-approx"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .current_dir(dir.path())
        .output()
        .unwrap();
    Run {
        code: o.status.code().expect("exited normally"),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
        out,
        _dir: dir,
    }
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn valid_check_exits_zero() {
    let r = run(RIGID, &["check"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = json(&r.out.join("check.json"));
    assert_eq!(report["verdicts"][0]["item"], "growth_certificate");
    assert_eq!(report["verdicts"][0]["pass"], true);
}

#[test]
fn decoupling_violation_exits_two() {
    let r = run(&RIGID.replace("u1^2 + v1^2", "x1^2 + v1^2"), &["check"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("decoupling violation: h1 uses x1"), "{}", r.stderr);
}

#[test]
fn missing_seed_exits_two() {
    let r = run(&RIGID.replace("seed = 1", ""), &["check"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("missing seed"), "{}", r.stderr);
}

#[test]
fn unknown_key_exits_two() {
    let r = run(&format!("{RIGID}\n[selection]\nbudgte = 3\n"), &["check"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("budgte"), "{}", r.stderr);
}

#[test]
fn seed_flag_overrides_missing_seed() {
    let r = run(&RIGID.replace("seed = 1", ""), &["check", "--seed", "7"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
}

#[test]
fn exhausted_budget_exits_three() {
    let r = run(&format!("{CODIM2}\n[selection]\nbudget = 0\n"), &["select"]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("selection budget exhausted"), "{}", r.stderr);
    assert!(r.stderr.contains("(x,u,v)"), "{}", r.stderr);
}

#[test]
fn select_is_reproducible() {
    let a = run(CODIM2, &["select"]);
    let b = run(CODIM2, &["select", "--threads", "3"]);
    assert_eq!((a.code, b.code), (0, 0), "{}{}", a.stderr, b.stderr);
    let pa = json(&a.out.join("params.json"));
    let pb = json(&b.out.join("params.json"));
    assert_eq!(pa["params"], pb["params"]);
    assert_eq!(pa["trace"], pb["trace"]);
}

#[test]
fn flat_select_has_no_lambda() {
    let r = run(FLAT, &["select"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let p = json(&r.out.join("params.json"));
    assert_eq!(p["params"]["lambda"].as_array().unwrap().len(), 0, "{}", p["params"]);
}

struct ApproxRow {
    point: Vec<f64>,
    function: usize,
    re: f64,
    im: f64,
    err: f64,
}

fn approx_rows(path: &Path) -> Vec<ApproxRow> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x1,u1,v1,function,eps,re,im,err_est,flagged");
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            ApproxRow {
                point: f[..3].iter().map(|s| s.parse().unwrap()).collect(),
                function: f[3].parse().unwrap(),
                re: f[5].parse().unwrap(),
                im: f[6].parse().unwrap(),
                err: f[7].parse().unwrap(),
            }
        })
        .collect()
}

#[test]
fn approx_zero_function_and_linearity() {
    let cfg = format!(
        "{RIGID}\n[experiment]\nfunctions = [\"0\", \"zeta1\", \"eta1\", \"zeta1 + 2*eta1\"]\n\n[approx]\neps = 0.2\npoints = \"pts.csv\"\n"
    );
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("pts.csv"), "x,u,v\n0.3,0.2,0.5\n0.3,0.2,0.9\n-0.1,0.4,0.1\n").unwrap();
    fs::write(dir.path().join("run.toml"), &cfg).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_cr-approx"))
        .args(["approx", "--config", "run.toml", "--out"])
        .arg(&out)
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let rows = approx_rows(&out.join("approx.csv"));
    assert_eq!(rows.len(), 12);
    for p in rows.chunks(4) {
        assert!(p.iter().all(|r| r.point == p[0].point));
        assert_eq!(p.iter().map(|r| r.function).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!((p[0].re, p[0].im), (0.0, 0.0));
        let (re, im) = (p[1].re + 2.0 * p[2].re, p[1].im + 2.0 * p[2].im);
        let tol = 2.0 * (p[1].err + 2.0 * p[2].err + p[3].err) + 1e-9;
        assert!((re - p[3].re).abs() <= tol && (im - p[3].im).abs() <= tol, "{:?}", p[0].point);
    }
}

#[test]
fn f_equals_g_on_the_reference_slice() {
    let cfg = RunConfig::from_toml(RIGID).unwrap();
    let res = cfg.resolve().unwrap();
    let opts = SelectionOptions {
        seed: res.seed,
        budget: 96,
        audit_samples: 2000,
        law: None,
    };
    let (params, _) = select_constants(&res.graph, &res.k, res.growth, &opts).unwrap();
    let ev = Evaluator::new(&res.graph, &params, &cfg.quadrature, &res.k, &res.fns).unwrap();
    let mut p = vec![0.3, 0.2];
    p.extend(&res.k.v0);
    let (z, w) = graph_point(&res.graph, &p);
    let r = ev.f(0.2, &z, &w).unwrap();
    for (f, g) in r.f.iter().zip(&r.g) {
        assert_eq!(f.value, g.value);
    }
}
