use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn picsurv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_picsurv"))
        .args(args)
        .env_remove("PICSURV_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = picsurv(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn row<'a>(summary: &'a Value, name: &str) -> &'a Value {
    summary["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["name"] == name)
        .unwrap_or_else(|| panic!("no row {name}"))
}

const PIC_CONFIG: &str = r#"{"model":"pic","prior":"vague",
 "covariates":{"mix":["strain18"],"inc":["strain18"]},
 "profiles":[{"name":"16"},{"name":"18","values":{"strain18":1}}],
 "survival_times":[2,5,10],
 "sampler":{"n_chains":4,"n_adapt":500,"n_burnin":500,"n_keep":1000,"thin":1,"seed":3,"init":"prior_draw","target_accept":0.44}}"#;

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["simulate", "--n", "40", "--seed", "1", "--out", s(&a)]);
    ok(&["--threads", "3", "simulate", "--n", "40", "--seed", "1", "--out", s(&b)]);
    for f in ["data.csv", "truth.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m = read_json(&a.join("manifest.json"));
    assert_eq!(m["config"]["n"], 40);
    assert_eq!(m["config"]["seed"], 1);
    assert!(m["build"].as_str().unwrap().starts_with("picsurv "));
    assert!(m.get("threads").is_none());
}

#[test]
fn simulate_rejects_empty_cohort() {
    let dir = TempDir::new().unwrap();
    let out = picsurv(&["simulate", "--n", "0", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n must be positive"));
}

#[test]
fn simulated_strain_share() {
    let dir = TempDir::new().unwrap();
    ok(&["simulate", "--n", "100000", "--seed", "5", "--out", s(dir.path())]);
    let text = fs::read_to_string(dir.path().join("data.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    let strain16 = rows.iter().filter(|l| l.ends_with(",0")).count();
    let share = strain16 as f64 / rows.len() as f64;
    assert!((share - 0.76).abs() < 0.005, "{share}");
}

#[test]
fn simulate_reads_a_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("dgp.json");
    fs::write(&cfg, r#"{"n":25,"seed":9,"visits":{"kind":"fixed","times":[1,2,3]}}"#).unwrap();
    ok(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    let text = fs::read_to_string(dir.path().join("o/data.csv")).unwrap();
    assert_eq!(text.lines().count(), 26);
    for line in text.lines().skip(1) {
        let right = line.split(',').nth(2).unwrap();
        assert!(["0", "1", "2", "3", "inf"].contains(&right), "{line}");
    }
}

#[test]
fn fit_pic_writes_summary_and_draws() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--n", "4000", "--seed", "11", "--out", s(&sim)]);
    let cfg = dir.path().join("pic.json");
    fs::write(&cfg, PIC_CONFIG).unwrap();
    let out = dir.path().join("fit");
    let run = picsurv(&["fit", "--data", s(&sim.join("data.csv")), "--config", s(&cfg), "--out", s(&out)]);
    let summary = read_json(&out.join("summary.json"));
    let expected = if summary["converged"] == true { 0 } else { 2 };
    assert_eq!(run.status.code(), Some(expected));
    for name in ["alpha", "lambda", "m_tilde", "prevalence[16]", "cure[16]", "prevalence[18]", "cure[18]"] {
        assert!(row(&summary, name)["estimate"].is_f64());
    }
    let draws = fs::read_to_string(out.join("draws.csv")).unwrap();
    assert!(draws.starts_with("chain,iter,alpha,lambda"));
    assert_eq!(draws.lines().count(), 1 + 4 * 1000);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn fit_pi_writes_fit_and_bootstrap() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--n", "400", "--seed", "2", "--out", s(&sim)]);
    let cfg = dir.path().join("pi.json");
    fs::write(
        &cfg,
        {
            let mut c: Value = serde_json::from_str(PIC_CONFIG).unwrap();
            c["model"] = "pi".into();
            c["bootstrap"] = serde_json::json!({"resamples": 100, "seed": 4});
            c.to_string()
        },
    )
    .unwrap();
    let out = dir.path().join("fit");
    ok(&["fit", "--data", s(&sim.join("data.csv")), "--config", s(&cfg), "--out", s(&out)]);
    let fit = read_json(&out.join("fit.json"));
    assert_eq!(fit["method"], "pi-mle");
    let s10 = row(&fit, "survival[16](t=10)");
    assert!(s10["lower"].as_f64().unwrap() <= s10["estimate"].as_f64().unwrap());
    assert!(row(&fit, "alpha")["se"].as_f64().unwrap() > 0.0);
    let boot = fs::read_to_string(out.join("bootstrap.csv")).unwrap();
    assert!(boot.starts_with("alpha,lambda,m_tilde,beta_pi_1"));
    assert_eq!(boot.lines().count(), 101);
}

/// The PI model has no cure component, so on a cohort with a cured fraction
/// its long-horizon survival should sit below the PIC estimate. On this
/// generating process the PI likelihood peaks at a heavy-tailed Weibull
/// (shape near 0.3) that imitates the plateau, and the ordering is reversed.
#[test]
#[ignore = "PI MLE mimics the cure plateau with a heavy tail on this DGP"]
fn pi_survival_at_ten_years_is_below_pic() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate", "--n", "4000", "--seed", "11", "--out", s(&sim)]);
    let pic_cfg = dir.path().join("pic.json");
    fs::write(&pic_cfg, PIC_CONFIG).unwrap();
    let pi_cfg = dir.path().join("pi.json");
    fs::write(&pi_cfg, PIC_CONFIG.replace(r#""model":"pic""#, r#""model":"pi""#)).unwrap();
    let data = sim.join("data.csv");
    picsurv(&["fit", "--data", s(&data), "--config", s(&pic_cfg), "--out", s(&dir.path().join("pic"))]);
    ok(&["fit", "--data", s(&data), "--config", s(&pi_cfg), "--out", s(&dir.path().join("pi"))]);
    let pic = read_json(&dir.path().join("pic/summary.json"));
    let pi = read_json(&dir.path().join("pi/fit.json"));
    let name = "survival[16](t=10)";
    let (a, b) = (row(&pi, name)["estimate"].as_f64().unwrap(), row(&pic, name)["estimate"].as_f64().unwrap());
    assert!(a < b, "PI {a} vs PIC {b}");
}

#[test]
fn fit_reports_missing_column_and_bad_lines() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, "id,left,right,age\na,0,1,40\nb,-inf,0,50\n").unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"model":"pi","covariates":{"mix":["bmi"],"inc":[]}}"#).unwrap();
    let out = picsurv(&["fit", "--data", s(&data), "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`bmi`"));

    fs::write(&data, "id,left,right,age\na,0,1,40\nb,3,2,50\n").unwrap();
    let out = picsurv(&["fit", "--data", s(&data), "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = picsurv(&["fit", "--data", s(&dir.path().join("nope.csv")), "--config", s(&cfg), "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn elicit_matches_worked_examples() {
    let dir = TempDir::new().unwrap();
    let q = dir.path().join("q.json");
    fs::write(
        &q,
        r#"{"alpha":[1.64,2.43],"median_time":[15.5,34],"beta_pi":[[0.05,0.5],[0.5,2.0]],"beta_delta":[[1,20],[0.5,2.0]],"gamma":[[0.5,2.0]],"time_unit":"months"}"#,
    )
    .unwrap();
    let out = dir.path().join("prior.json");
    ok(&["elicit", "--quantiles-json", s(&q), "--out", s(&out)]);
    let spec = read_json(&out);
    let close = |v: &Value, x: f64| (v.as_f64().unwrap() - x).abs() < 0.01;
    assert!(close(&spec["alpha"]["mu"], 2f64.ln()));
    assert!(close(&spec["alpha"]["sigma"], 0.1));
    assert!(close(&spec["median_time"]["mu"], 22.96f64.ln()));
    assert!(close(&spec["beta_pi"][0]["mu"], -1.84));
    assert_eq!(spec["time_unit"], "months");
    assert!(dir.path().join("prior.json.manifest.json").exists());

    fs::write(&q, r#"{"alpha":[2,2],"median_time":[15.5,34],"beta_pi":[[0.05,0.5]]}"#).unwrap();
    let bad = picsurv(&["elicit", "--quantiles-json", s(&q), "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn study_smoke_and_determinism() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("study.json");
    fs::write(
        &cfg,
        r#"{"sampler":{"n_chains":2,"n_adapt":200,"n_burnin":200,"n_keep":300,"thin":1,"seed":1,"init":"prior_draw","target_accept":0.44}}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = |out: &Path| {
        vec![
            "study".to_string(), "--reps".into(), "1".into(), "--n".into(), "200".into(), "--seed".into(), "4".into(),
            "--config".into(), s(&cfg).into(), "--out".into(), s(out).into(),
        ]
    };
    let a_args = args(&a);
    ok(&a_args.iter().map(String::as_str).collect::<Vec<_>>());
    let mut b_args = vec!["--threads".to_string(), "2".into()];
    b_args.extend(args(&b));
    ok(&b_args.iter().map(String::as_str).collect::<Vec<_>>());
    for f in ["raw.csv", "metrics.csv", "metrics.md", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m = read_json(&a.join("manifest.json"));
    assert_eq!(m["n_reps"], 1);
    assert_eq!(m["replication_seeds"].as_array().unwrap().len(), 1);
}

#[test]
fn study_pi_manifest_counts_failures() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("pi");
    ok(&["study", "--method", "pi", "--reps", "3", "--n", "400", "--resamples", "100", "--seed", "2", "--out", s(&out)]);
    let m = read_json(&out.join("manifest.json"));
    for k in ["n_failed_fit", "n_failed_ci", "n_flagged"] {
        assert!(m[k].is_u64(), "{k}");
    }
    assert_eq!(m["config"]["method"], "pi");
    let raw = fs::read_to_string(out.join("raw.csv")).unwrap();
    assert!(raw.starts_with("rep,seed,estimand,truth,estimate,lower,upper,fit_failed,ci_failed,flagged"));
}

fn npmle(text: &str) -> Vec<(f64, f64)> {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, text).unwrap();
    let out = dir.path().join("curve.csv");
    ok(&["npmle", "--data", s(&data), "--out", s(&out)]);
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,survival,lower,upper"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect()
}

#[test]
fn npmle_examples() {
    let exact = npmle("id,left,right\na,1,1\nb,2,2\nc,2,2\nd,4,4\n");
    assert_eq!(exact, [(0.0, 1.0), (1.0, 0.75), (2.0, 0.25), (4.0, 0.0)]);

    let censored = npmle("id,left,right\na,1,inf\nb,3,inf\n");
    assert!(censored.iter().all(|&(_, sv)| sv == 1.0));

    // Hand-iterated EM on this set converges to masses 3/8, 3/8, 1/4 on
    // (0,1], (1,2] and (2,inf).
    let toy = npmle("id,left,right\na,0,1\nb,0,2\nc,1,2\nd,2,inf\n");
    assert_eq!(toy.len(), 3);
    for (got, want) in toy.iter().zip([(0.0, 1.0), (1.0, 0.625), (2.0, 0.25)]) {
        assert_eq!(got.0, want.0);
        assert!((got.1 - want.1).abs() < 1e-6, "{got:?}");
    }
}
