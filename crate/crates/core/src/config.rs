//! Experiment configuration: a strict JSON schema plus semantic validation.
//!
//! Complex matrices are written row-major as nested arrays of `[re, im]` pairs.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::linalg::{CMat, C64};
use crate::models::DensityModel;
use crate::quadrature::{MAX_EXPONENT, MIN_EXPONENT};

/// Row-major complex matrix as `[[[re, im], ...], ...]`.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    WhiteNoise {
        q: usize,
    },
    /// Causal moving average `w = Θ Θ*` with `Θ(z) = Σ θ_j z^j`.
    MaFactor {
        coeffs: Vec<MatrixSpec>,
    },
    ScalarWeight {
        b: MatrixSpec,
    },
    StackedShift {
        base: Box<ModelSpec>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Autocov,
    Factorize,
    Conditions,
    Angles,
    Intersect,
    Predictor,
    Report,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Autocov => "autocov",
            Task::Factorize => "factorize",
            Task::Conditions => "conditions",
            Task::Angles => "angles",
            Task::Intersect => "intersect",
            Task::Predictor => "predictor",
            Task::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutocovParams {
    /// Largest lag written.
    #[serde(rename = "K")]
    pub max_lag: usize,
}

impl Default for AutocovParams {
    fn default() -> Self {
        AutocovParams { max_lag: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorizeParams {
    pub order: usize,
    pub order_cap: usize,
    pub tol: f64,
    pub isometry_polys: usize,
    pub isometry_degree: usize,
    pub phase_tol: f64,
    pub outer_tol: f64,
}

impl Default for FactorizeParams {
    fn default() -> Self {
        FactorizeParams {
            order: 64,
            order_cap: 4096,
            tol: 1e-10,
            isometry_polys: 20,
            isometry_degree: 4,
            phase_tol: 2e-2,
            outer_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnglesParams {
    #[serde(rename = "N_list")]
    pub big_n_list: Vec<usize>,
    pub rank_tol: f64,
}

impl Default for AnglesParams {
    fn default() -> Self {
        AnglesParams {
            big_n_list: (1..=16).collect(),
            rank_tol: crate::subspace::RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntersectParams {
    pub n_list: Vec<usize>,
    #[serde(rename = "N_list")]
    pub big_n_list: Vec<usize>,
    /// Coincidence-angle tolerance.
    pub tol: f64,
    pub rank_tol: f64,
}

impl Default for IntersectParams {
    fn default() -> Self {
        IntersectParams {
            n_list: vec![1, 2, 3],
            big_n_list: (4..=16).collect(),
            tol: 1e-8,
            rank_tol: crate::subspace::RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorParams {
    #[serde(rename = "N")]
    pub big_n: usize,
}

impl Default for PredictorParams {
    fn default() -> Self {
        PredictorParams { big_n: 64 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Grid exponent for pointwise checks; each check has its own default when absent.
    pub m: Option<u32>,
    /// Expected process dimension, checked against the model.
    pub q: Option<usize>,
    pub autocov: AutocovParams,
    pub factorize: FactorizeParams,
    pub angles: AnglesParams,
    pub intersect: IntersectParams,
    pub predictor: PredictorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub params: Params,
    /// Not echoed into the report so that reports compare across output locations.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

/// One validation finding, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Parses config text; schema violations come back as diagnostics.
pub fn parse(text: &str) -> Result<ExperimentConfig, Vec<Diagnostic>> {
    serde_json::from_str(text).map_err(|e| {
        vec![Diagnostic::new(
            "$",
            format!("schema violation at line {} column {}: {e}", e.line(), e.column()),
        )]
    })
}

/// Schema and invariant check of config text without running anything.
pub fn validate_text(text: &str) -> Vec<Diagnostic> {
    match parse(text) {
        Ok(cfg) => validate(&cfg),
        Err(d) => d,
    }
}

fn matrix(desc: &MatrixSpec, field: &str) -> Result<CMat, Diagnostic> {
    let rows = desc.len();
    let cols = desc.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Err(Diagnostic::new(field, "matrix is empty"));
    }
    if let Some(i) = desc.iter().position(|r| r.len() != cols) {
        return Err(Diagnostic::new(
            field,
            format!("row {i} has {} entries, row 0 has {cols}", desc[i].len()),
        ));
    }
    Ok(CMat::from_fn(rows, cols, |r, c| C64::new(desc[r][c][0], desc[r][c][1])))
}

fn build(desc: &ModelSpec, field: &str) -> Result<DensityModel, Diagnostic> {
    let invalid = |e: crate::Error| Diagnostic::new(field, e.to_string());
    match desc {
        ModelSpec::WhiteNoise { q } => {
            if *q == 0 {
                return Err(Diagnostic::new(format!("{field}.white_noise.q"), "q must be positive"));
            }
            Ok(DensityModel::white_noise(*q))
        }
        ModelSpec::MaFactor { coeffs } => {
            let mats = coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| matrix(c, &format!("{field}.ma_factor.coeffs[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            DensityModel::ma(mats).map_err(invalid)
        }
        ModelSpec::ScalarWeight { b } => {
            DensityModel::scalar_weight(matrix(b, &format!("{field}.scalar_weight.b"))?).map_err(invalid)
        }
        ModelSpec::StackedShift { base } => {
            let base = build(base, &format!("{field}.stacked_shift.base"))?;
            DensityModel::stacked_shift(base).map_err(invalid)
        }
    }
}

/// Builds the density model described by a config entry.
pub fn build_model(desc: &ModelSpec) -> crate::Result<DensityModel> {
    build(desc, "model").map_err(|d| crate::Error::Config(format!("{}: {}", d.field, d.message)))
}

fn positive(out: &mut Vec<Diagnostic>, field: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        out.push(Diagnostic::new(
            field,
            format!("must be a positive finite number, got {v}"),
        ));
    }
}

fn power_of_two(out: &mut Vec<Diagnostic>, field: &str, v: usize) {
    if !v.is_power_of_two() {
        out.push(Diagnostic::new(field, format!("must be a power of two, got {v}")));
    }
}

fn ascending(out: &mut Vec<Diagnostic>, field: &str, list: &[usize], min: usize) {
    if list.is_empty() {
        out.push(Diagnostic::new(field, "must not be empty"));
    } else if list.windows(2).any(|w| w[1] <= w[0]) {
        out.push(Diagnostic::new(field, "must be strictly ascending"));
    } else if list[0] < min {
        out.push(Diagnostic::new(field, format!("entries must be at least {min}")));
    }
}

/// Invariant checks on a parsed config. An empty list means the config is runnable.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let model = match build(&cfg.model, "model") {
        Ok(m) => Some(m),
        Err(d) => {
            out.push(d);
            None
        }
    };
    if let (Some(model), Some(q)) = (&model, cfg.params.q) {
        if model.dim() != q {
            out.push(Diagnostic::new(
                "params.q",
                format!("model is {0}x{0} but params.q = {q}", model.dim()),
            ));
        }
    }

    if cfg.tasks.is_empty() {
        out.push(Diagnostic::new("tasks", "at least one task is required"));
    }
    let mut seen = BTreeSet::new();
    for t in &cfg.tasks {
        if !seen.insert(*t) {
            out.push(Diagnostic::new("tasks", format!("task {} listed twice", t.name())));
        }
    }
    if cfg.output_dir.as_os_str().is_empty() {
        out.push(Diagnostic::new("output_dir", "must not be empty"));
    }

    let p = &cfg.params;
    if let Some(m) = p.m {
        if !(MIN_EXPONENT..=MAX_EXPONENT).contains(&m) {
            out.push(Diagnostic::new(
                "params.m",
                format!("grid exponent must lie in {MIN_EXPONENT}..={MAX_EXPONENT}, got {m}"),
            ));
        }
    }

    let f = &p.factorize;
    power_of_two(&mut out, "params.factorize.order", f.order);
    power_of_two(&mut out, "params.factorize.order_cap", f.order_cap);
    if f.order > f.order_cap {
        out.push(Diagnostic::new("params.factorize.order", "exceeds order_cap"));
    }
    positive(&mut out, "params.factorize.tol", f.tol);
    positive(&mut out, "params.factorize.phase_tol", f.phase_tol);
    positive(&mut out, "params.factorize.outer_tol", f.outer_tol);
    let m = p.m.unwrap_or(crate::report::ISOMETRY_EXPONENT);
    if 4 * f.isometry_degree >= 1usize << m.min(MAX_EXPONENT) {
        out.push(Diagnostic::new(
            "params.factorize.isometry_degree",
            format!("too large for grid exponent {m}"),
        ));
    }

    if p.autocov.max_lag == 0 {
        out.push(Diagnostic::new("params.autocov.K", "must be at least 1"));
    }

    ascending(&mut out, "params.angles.N_list", &p.angles.big_n_list, 1);
    positive(&mut out, "params.angles.rank_tol", p.angles.rank_tol);

    let i = &p.intersect;
    ascending(&mut out, "params.intersect.n_list", &i.n_list, 1);
    ascending(&mut out, "params.intersect.N_list", &i.big_n_list, 2);
    positive(&mut out, "params.intersect.tol", i.tol);
    positive(&mut out, "params.intersect.rank_tol", i.rank_tol);
    if let (Some(&n), Some(&big_n)) = (i.n_list.last(), i.big_n_list.first()) {
        if big_n <= n && cfg.tasks.contains(&Task::Intersect) {
            out.push(Diagnostic::new(
                "params.intersect.N_list",
                format!("every N must exceed every n (N = {big_n}, n = {n})"),
            ));
        }
    }

    if p.predictor.big_n == 0 {
        out.push(Diagnostic::new("params.predictor.N", "must be at least 1"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MA1: &str = r#"{
        "model": {"ma_factor": {"coeffs": [
            [[[1,0],[0,0]],[[0,0],[1,0]]],
            [[[0.5,0],[0.2,0]],[[0,0],[0.3,0]]]
        ]}},
        "tasks": ["conditions", "factorize"],
        "output_dir": "out"
    }"#;

    #[test]
    fn valid_config_has_no_diagnostics() {
        assert!(validate_text(MA1).is_empty());
        let cfg = parse(MA1).unwrap();
        assert_eq!(build_model(&cfg.model).unwrap().dim(), 2);
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = MA1.replace("\"tasks\"", "\"colour\": 1, \"tasks\"");
        let d = validate_text(&text);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("colour"));

        let text = r#"{"model": {"white_noise": {"q": 2, "r": 1}}, "tasks": ["angles"], "output_dir": "o"}"#;
        assert!(validate_text(text)[0].message.contains("`r`"));
    }

    #[test]
    fn order_must_be_power_of_two() {
        let text = MA1.replace(
            "\"output_dir\"",
            "\"params\": {\"factorize\": {\"order\": 100}}, \"output_dir\"",
        );
        let d = validate_text(&text);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "params.factorize.order");
    }

    #[test]
    fn dimension_mismatch_reported() {
        let text = r#"{"model": {"scalar_weight": {"b": [[[1,0],[0,0]],[[0,0],[1,0]]]}},
            "tasks": ["angles"], "params": {"q": 3}, "output_dir": "o"}"#;
        let d = validate_text(text);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "params.q");
    }

    #[test]
    fn bad_models_and_tolerances() {
        let text = r#"{"model": {"ma_factor": {"coeffs": [[[[1,0]],[[0,0],[1,0]]]]}},
            "tasks": ["angles"], "params": {"angles": {"rank_tol": -1}}, "output_dir": "o"}"#;
        let fields: Vec<String> = validate_text(text).into_iter().map(|d| d.field).collect();
        assert_eq!(fields, vec!["model.ma_factor.coeffs[0]", "params.angles.rank_tol"]);

        let text = r#"{"model": {"stacked_shift": {"base": {"white_noise": {"q": 2}}}},
            "tasks": ["angles"], "output_dir": "o"}"#;
        assert_eq!(validate_text(text)[0].field, "model");
    }
}
