//! Batch runner: executes the configured tasks and writes `report.json` plus CSV tables.
//!
//! Tasks may run on separate threads, but results are assembled and written by
//! one writer in declared task order, so the report does not depend on
//! scheduling. Wall-clock times go to `timings.json` to keep `report.json`
//! byte-identical across runs of the same config.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::conditions::{self, check_condition_a, classify};
use crate::config::{build_model, validate, ExperimentConfig, Params, Task};
use crate::error::{Error, Result};
use crate::factorization::{
    factorize_model, factorize_sharp, innovation_coeffs, phase_matrix, verify_isometry_g, verify_outer_on,
    BauerOptions, OuterFactor, TrigPoly, ORDER_CAP, OUTER_EXPONENT, OUTER_MAX_EXCLUDED_FRACTION, RESIDUAL_EXPONENT,
};
use crate::linalg::{herm_eigen, max_abs_diff, CMat};
use crate::models::DensityModel;
use crate::quadrature::{self, fourier_coeffs, make_grid};
use crate::subspace::{self, cnd_profile, finite_predictor, ipf_finite_check};

/// Default grid exponent of the random-polynomial isometry check.
pub const ISOMETRY_EXPONENT: u32 = 12;
/// Default grid exponent of the phase-matrix check. Coarse on purpose: within about
/// `1/order` of a zero of `det w` a truncated factor is dominated by its tail, and
/// the deviation roughly doubles with each grid refinement.
pub const PHASE_EXPONENT: u32 = 7;
/// Default grid exponent of the quadrature cross-check of closed-form autocovariances.
pub const AUTOCOV_CHECK_EXPONENT: u32 = 14;

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub serial: bool,
    pub output_dir: Option<PathBuf>,
    pub m: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskError {
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskOutcome {
    pub task: Task,
    pub status: TaskStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<TaskError>,
    /// CSV files written, relative to the output directory.
    pub files: Vec<String>,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub model: Value,
    pub tasks: Vec<TaskOutcome>,
    pub output_dir: PathBuf,
}

impl RunReport {
    pub fn failed(&self) -> impl Iterator<Item = &TaskOutcome> {
        self.tasks.iter().filter(|t| t.status == TaskStatus::Failed)
    }

    pub fn succeeded(&self) -> bool {
        self.failed().next().is_none()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "constants": constants(),
            "model": self.model,
            "tasks": self.tasks,
            "status": if self.succeeded() { "OK" } else { "PARTIAL_FAILURE" },
        })
    }

    pub fn timings_json(&self) -> Value {
        let rows: Vec<Value> = self
            .tasks
            .iter()
            .map(|t| json!({"task": t.task, "seconds": t.seconds}))
            .collect();
        json!({ "tasks": rows })
    }
}

/// Every fixed numeric constant that can influence a verdict.
pub fn constants() -> Value {
    json!({
        "quadrature.MIN_EXPONENT": quadrature::MIN_EXPONENT,
        "quadrature.MAX_EXPONENT": quadrature::MAX_EXPONENT,
        "quadrature.PROBE_REL_TOL": quadrature::PROBE_REL_TOL,
        "quadrature.PROBE_DIVERGENT_RATIO": quadrature::PROBE_DIVERGENT_RATIO,
        "quadrature.PROBE_GEOMETRIC_RATIO": quadrature::PROBE_GEOMETRIC_RATIO,
        "conditions.MR_EXPONENT": conditions::MR_EXPONENT,
        "conditions.MR_DET_FLOOR": conditions::MR_DET_FLOOR,
        "conditions.MR_ZERO_FLOOR": conditions::MR_ZERO_FLOOR,
        "conditions.MR_FAIL_FRACTION": conditions::MR_FAIL_FRACTION,
        "conditions.PROBE_EXPONENTS": conditions::PROBE_EXPONENTS,
        "factorization.RESIDUAL_EXPONENT": RESIDUAL_EXPONENT,
        "factorization.OUTER_EXPONENT": OUTER_EXPONENT,
        "factorization.ORDER_CAP": ORDER_CAP,
        "factorization.OUTER_MAX_EXCLUDED_FRACTION": OUTER_MAX_EXCLUDED_FRACTION,
        "levinson.PD_FLOOR": crate::levinson::PD_FLOOR,
        "subspace.RANK_TOL": subspace::RANK_TOL,
        "subspace.RANK_STABILITY_BAND": subspace::RANK_STABILITY_BAND,
        "subspace.COSINE_ONE_GAP": subspace::COSINE_ONE_GAP,
        "report.ISOMETRY_EXPONENT": ISOMETRY_EXPONENT,
        "report.PHASE_EXPONENT": PHASE_EXPONENT,
        "report.AUTOCOV_CHECK_EXPONENT": AUTOCOV_CHECK_EXPONENT,
    })
}

/// `[[[re, im], ...], ...]`, the config encoding.
pub fn matrix_json(m: &CMat) -> Value {
    let rows: Vec<Value> = (0..m.nrows())
        .map(|r| Value::Array((0..m.ncols()).map(|c| json!([m[(r, c)].re, m[(r, c)].im])).collect()))
        .collect();
    Value::Array(rows)
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone)]
struct Table {
    name: &'static str,
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

fn num(x: f64) -> String {
    // Debug keeps full round-trip precision and switches to exponent form for tiny values.
    format!("{x:?}")
}

fn push_matrix(rows: &mut Vec<Vec<String>>, label: String, m: &CMat) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            rows.push(vec![label.clone(), r.to_string(), c.to_string(), num(z.re), num(z.im)]);
        }
    }
}

fn coeff_table(name: &'static str, f: &OuterFactor) -> Table {
    let mut rows = Vec::new();
    for (n, c) in f.coeffs.iter().enumerate() {
        push_matrix(&mut rows, n.to_string(), c);
    }
    Table {
        name,
        header: &["n", "row", "col", "re", "im"],
        rows,
    }
}

type TaskOutput = (Value, Vec<Table>);

struct Context<'a> {
    model: &'a DensityModel,
    params: &'a Params,
    seed: u64,
}

fn autocov_task(cx: &Context) -> Result<TaskOutput> {
    let k = cx.params.autocov.max_lag;
    let seq = cx.model.autocov_seq(k);
    let mut rows = Vec::new();
    for (lag, g) in (0..=k).map(|l| (l, cx.model.autocovariance(l as i64))) {
        push_matrix(&mut rows, lag.to_string(), &g);
    }
    let m = cx.params.m.unwrap_or(AUTOCOV_CHECK_EXPONENT);
    let check = match make_grid(cx.model, m).and_then(|g| fourier_coeffs(&g, k)) {
        Ok(quad) => {
            let diff = (0..=k as i64)
                .map(|l| max_abs_diff(seq.get(l).expect("lag in range"), quad.get(l).expect("lag in range")))
                .fold(0.0, f64::max);
            json!({"m": m, "max_abs_diff": diff})
        }
        Err(e) => json!({"m": m, "skipped": e.to_string()}),
    };
    let gammas: Vec<Value> = (0..=k)
        .map(|l| matrix_json(&cx.model.autocovariance(l as i64)))
        .collect();
    Ok((
        json!({"K": k, "gammas": gammas, "quadrature_check": check}),
        vec![Table {
            name: "autocov.csv",
            header: &["k", "row", "col", "re", "im"],
            rows,
        }],
    ))
}

fn factor_json(f: &OuterFactor) -> Value {
    json!({
        "kind": f.kind,
        "normalization": f.normalization,
        "order": f.order,
        "residual": f.residual,
        "last_change": f.last_change,
        "flags": f.flags,
        "tail_norm": f.tail_norm,
        "c0": matrix_json(&f.coeffs[0]),
    })
}

fn factorize_task(cx: &Context) -> Result<TaskOutput> {
    let p = &cx.params.factorize;
    let opts = BauerOptions {
        order: p.order,
        tol: p.tol,
        order_cap: p.order_cap,
    };
    let h = factorize_model(cx.model, opts)?;
    let hs = factorize_sharp(cx.model, opts)?;
    let outer = verify_outer_on(&h, cx.params.m.unwrap_or(OUTER_EXPONENT));
    let phase = phase_matrix(&h, &hs, cx.params.m.unwrap_or(PHASE_EXPONENT), p.phase_tol)?;

    let mi = cx.params.m.unwrap_or(ISOMETRY_EXPONENT);
    let mut rng = ChaCha8Rng::seed_from_u64(cx.seed);
    let mut checks = Vec::with_capacity(p.isometry_polys);
    for _ in 0..p.isometry_polys {
        let f = TrigPoly::random(h.q, p.isometry_degree, &mut rng);
        checks.push(verify_isometry_g(cx.model, &hs, &f, mi)?);
    }
    let max_disc = checks.iter().map(|c| c.discrepancy).fold(0.0, f64::max);

    let result = json!({
        "causal": factor_json(&h),
        "sharp": factor_json(&hs),
        "one_step_error": matrix_json(&innovation_coeffs(&h).one_step_error),
        "outer": {
            "check": outer,
            "tol": p.outer_tol,
            "is_outer": outer.is_outer(p.outer_tol),
        },
        "phase": phase,
        "isometry": {
            "seed": cx.seed,
            "polys": p.isometry_polys,
            "degree": p.isometry_degree,
            "m": mi,
            "max_discrepancy": max_disc,
            "checks": checks,
        },
    });
    Ok((
        result,
        vec![coeff_table("factor.csv", &h), coeff_table("factor_sharp.csv", &hs)],
    ))
}

fn conditions_task(cx: &Context) -> Result<TaskOutput> {
    Ok((serde_json::to_value(classify(cx.model))?, Vec::new()))
}

fn profile_table(name: &'static str, rows: Vec<Vec<String>>) -> Table {
    Table {
        name,
        header: &["N", "n", "cos_1", "cos_2", "dim", "residual"],
        rows,
    }
}

fn angles_task(cx: &Context) -> Result<TaskOutput> {
    let p = &cx.params.angles;
    let profile = cnd_profile(cx.model, &p.big_n_list, p.rank_tol)?;
    let rows = profile
        .iter()
        .map(|r| {
            vec![
                r.big_n.to_string(),
                r.n.map(|n| n.to_string()).unwrap_or_default(),
                num(r.cos_1),
                num(r.cos_2),
                r.dim.to_string(),
                num(r.residual),
            ]
        })
        .collect();
    let dims: Vec<usize> = profile.iter().map(|r| r.dim).collect();
    let result = json!({
        "rank_tol": p.rank_tol,
        "dim_min": dims.iter().min(),
        "dim_max": dims.iter().max(),
        "cos_1_max": profile.iter().map(|r| r.cos_1).fold(f64::NEG_INFINITY, f64::max),
        "rows": profile,
    });
    Ok((result, vec![profile_table("angles.csv", rows)]))
}

fn intersect_task(cx: &Context) -> Result<TaskOutput> {
    let p = &cx.params.intersect;
    let mut checks = Vec::new();
    for &n in &p.n_list {
        for &big_n in p.big_n_list.iter().filter(|&&b| b > n) {
            checks.push(ipf_finite_check(cx.model, n, big_n, p.tol, p.rank_tol)?);
        }
    }
    let rows = checks
        .iter()
        .map(|c| {
            vec![
                c.big_n.to_string(),
                c.n.to_string(),
                num(c.cos_1),
                num(c.cos_2),
                c.dim.to_string(),
                num(c.residual),
            ]
        })
        .collect();
    let passed = checks.iter().filter(|c| c.passed()).count();
    let result = json!({
        "tol": p.tol,
        "rank_tol": p.rank_tol,
        "passed": passed,
        "failed": checks.len() - passed,
        "checks": checks,
    });
    Ok((result, vec![profile_table("intersect.csv", rows)]))
}

fn predictor_task(cx: &Context) -> Result<TaskOutput> {
    let big_n = cx.params.predictor.big_n;
    let fp = finite_predictor(cx.model, big_n)?;
    let mut rows = Vec::new();
    for (k, v) in fp.history.iter().enumerate() {
        push_matrix(&mut rows, k.to_string(), v);
    }
    // Largest eigenvalue of V_{k+1} − V_k; nonpositive up to roundoff when V_k is nonincreasing.
    let loewner = fp
        .history
        .windows(2)
        .map(|w| herm_eigen(&(&w[1] - &w[0])).values[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let det_v = fp.error_cov.determinant().re;
    let a = check_condition_a(cx.model);
    let limit = a.szego_integral.map(f64::exp);
    let result = json!({
        "N": big_n,
        "error_cov": matrix_json(&fp.error_cov),
        "det_error_cov": det_v,
        "szego_limit": limit,
        "szego_gap": limit.map(|l| (det_v - l).abs()),
        "condition_a": a.verdict,
        "loewner_max_increase": loewner,
        "coeffs": fp.coeffs.iter().map(matrix_json).collect::<Vec<_>>(),
    });
    Ok((
        result,
        vec![Table {
            name: "predictor.csv",
            header: &["N", "row", "col", "re", "im"],
            rows,
        }],
    ))
}

fn run_task(task: Task, cx: &Context) -> Result<TaskOutput> {
    match task {
        Task::Autocov => autocov_task(cx),
        Task::Factorize => factorize_task(cx),
        Task::Conditions => conditions_task(cx),
        Task::Angles => angles_task(cx),
        Task::Intersect => intersect_task(cx),
        Task::Predictor => predictor_task(cx),
        // assembled after the other tasks finish
        Task::Report => Ok((Value::Null, Vec::new())),
    }
}

fn timed(task: Task, cx: &Context) -> (Result<TaskOutput>, f64) {
    let start = Instant::now();
    let out = run_task(task, cx);
    (out, start.elapsed().as_secs_f64())
}

fn model_json(model: &DensityModel) -> Value {
    json!({
        "name": model.name(),
        "dim": model.dim(),
        "analytically_degenerate": model.analytically_degenerate(),
        "analytic_certificate": model.analytic_certificate().map(|c| json!({
            "ipf": c.ipf,
            "cnd": c.cnd,
            "source": c.source,
        })),
    })
}

fn summary(outcomes: &[TaskOutcome], model: &Value) -> Value {
    let statuses: Vec<Value> = outcomes
        .iter()
        .filter(|o| o.task != Task::Report)
        .map(|o| json!({"task": o.task, "status": o.status, "error": o.error.as_ref().map(|e| e.code)}))
        .collect();
    let find = |t: Task| outcomes.iter().find(|o| o.task == t).and_then(|o| o.result.as_ref());
    let conditions = find(Task::Conditions).map(|c| {
        json!({
            "mr": c["mr"]["verdict"],
            "condition_a": c["condition_a"]["verdict"],
            "minimality": c["minimality"]["verdict"],
            "implied_cnd": c["implied_cnd"]["verdict"],
            "implied_ipf": c["implied_ipf"]["verdict"],
        })
    });
    json!({
        "model": model,
        "tasks": statuses,
        "conditions": conditions,
        "angles_dim_range": find(Task::Angles).map(|a| json!([a["dim_min"], a["dim_max"]])),
        "factor_flags": find(Task::Factorize).map(|f| f["causal"]["flags"].clone()),
    })
}

fn write_table(dir: &Path, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(table.name))?;
    w.write_record(table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Applies overrides and validates; diagnostics become a single config error.
pub fn prepare(mut cfg: ExperimentConfig, opts: &RunOptions) -> Result<ExperimentConfig> {
    if let Some(dir) = &opts.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(m) = opts.m {
        cfg.params.m = Some(m);
    }
    let diags = validate(&cfg);
    if !diags.is_empty() {
        let text: Vec<String> = diags.iter().map(|d| format!("{}: {}", d.field, d.message)).collect();
        return Err(Error::Config(text.join("; ")));
    }
    Ok(cfg)
}

/// Runs every task in declared order and writes the report files.
///
/// A failing task is recorded in the report and the remaining tasks still run;
/// check [`RunReport::succeeded`] for the overall status.
pub fn run(cfg: ExperimentConfig, opts: &RunOptions) -> Result<RunReport> {
    let cfg = prepare(cfg, opts)?;
    let model = build_model(&cfg.model)?;
    let cx = Context {
        model: &model,
        params: &cfg.params,
        seed: cfg.seed,
    };

    let results: Vec<(Result<TaskOutput>, f64)> = if opts.serial {
        cfg.tasks.iter().map(|&t| timed(t, &cx)).collect()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = cfg
                .tasks
                .iter()
                .map(|&t| {
                    let cx = &cx;
                    s.spawn(move || timed(t, cx))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("task thread panicked"))
                .collect()
        })
    };

    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir)?;
    let mut outcomes = Vec::with_capacity(results.len());
    for (&task, (res, seconds)) in cfg.tasks.iter().zip(results) {
        let outcome = match res {
            Ok((value, tables)) => {
                for t in &tables {
                    write_table(&dir, t)?;
                }
                TaskOutcome {
                    task,
                    status: TaskStatus::Ok,
                    result: Some(value),
                    error: None,
                    files: tables.iter().map(|t| t.name.to_string()).collect(),
                    seconds,
                }
            }
            Err(e) => TaskOutcome {
                task,
                status: TaskStatus::Failed,
                result: None,
                error: Some(TaskError {
                    code: e.code(),
                    message: e.to_string(),
                }),
                files: Vec::new(),
                seconds,
            },
        };
        outcomes.push(outcome);
    }
    let model_value = model_json(&model);
    if let Some(i) = outcomes.iter().position(|o| o.task == Task::Report) {
        outcomes[i].result = Some(summary(&outcomes, &model_value));
    }

    let report = RunReport {
        config: cfg,
        model: model_value,
        tasks: outcomes,
        output_dir: dir.clone(),
    };
    write_json(&dir.join("report.json"), &report.to_json())?;
    write_json(&dir.join("timings.json"), &report.timings_json())?;
    Ok(report)
}

/// Reads and runs a config file.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunReport> {
    let text = fs::read_to_string(path)?;
    let cfg = crate::config::parse(&text).map_err(|d| {
        let text: Vec<String> = d.iter().map(|d| format!("{}: {}", d.field, d.message)).collect();
        Error::Config(text.join("; "))
    })?;
    run(cfg, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;

    fn config(model: &str, tasks: &str, dir: &Path) -> ExperimentConfig {
        let text = format!(
            r#"{{"model": {model}, "tasks": {tasks}, "output_dir": "{}"}}"#,
            dir.display()
        );
        parse(&text).unwrap()
    }

    #[test]
    fn white_noise_conditions() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(r#"{"white_noise": {"q": 2}}"#, r#"["conditions"]"#, dir.path());
        let r = run(cfg, &RunOptions::default()).unwrap();
        assert!(r.succeeded());
        let c = r.tasks[0].result.as_ref().unwrap();
        assert_eq!(c["mr"]["verdict"], "HOLDS");
        assert_eq!(c["condition_a"]["verdict"], "HOLDS");
        assert!(c["condition_a"]["szego_integral"].as_f64().unwrap().abs() < 1e-12);
        assert_eq!(c["minimality"]["verdict"], "FINITE");
        assert!((c["minimality"]["value"].as_f64().unwrap() - 2.0).abs() < 1e-9);
        assert!(dir.path().join("report.json").exists());
    }

    #[test]
    fn stacked_shift_partial_failure_keeps_going() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(
            r#"{"stacked_shift": {"base": {"white_noise": {"q": 1}}}}"#,
            r#"["factorize", "angles", "report"]"#,
            dir.path(),
        );
        let r = run(cfg, &RunOptions::default()).unwrap();
        assert!(!r.succeeded());
        assert_eq!(r.tasks[0].error.as_ref().unwrap().code, "NOT_FACTORIZABLE");
        assert_eq!(r.tasks[1].status, TaskStatus::Ok);
        let csv = fs::read_to_string(dir.path().join("angles.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("N,n,cos_1,cos_2,dim,residual"));
        let dims: Vec<&str> = lines.map(|l| l.split(',').nth(4).unwrap()).collect();
        assert_eq!(dims.len(), 16);
        assert!(dims.iter().all(|d| *d == "1"));
        let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(report["status"], "PARTIAL_FAILURE");
        assert_eq!(report["tasks"][2]["result"]["tasks"][0]["error"], "NOT_FACTORIZABLE");
    }

    #[test]
    fn serial_and_parallel_reports_match() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let model = r#"{"ma_factor": {"coeffs": [[[[1,0]]], [[[0.5,0]]]]}}"#;
        let tasks = r#"["autocov", "conditions", "angles", "predictor", "report"]"#;
        run(
            config(model, tasks, a.path()),
            &RunOptions {
                serial: true,
                ..Default::default()
            },
        )
        .unwrap();
        run(config(model, tasks, b.path()), &RunOptions::default()).unwrap();
        for f in ["report.json", "autocov.csv", "angles.csv", "predictor.csv"] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }

    #[test]
    fn invalid_config_is_rejected_before_running() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(r#"{"white_noise": {"q": 2}}"#, r#"["angles"]"#, dir.path());
        let err = run(
            cfg,
            &RunOptions {
                m: Some(40),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert_eq!(err.code(), "CONFIG");
        assert!(err.to_string().contains("params.m"));
    }
}
