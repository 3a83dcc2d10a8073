//! Midpoint quadrature and Fourier analysis of matrix functions on the unit circle.
//!
//! All integrals are taken against the normalized measure `dθ/(2π)` on `[-π, π)`.
//! Grids use `G = 2^m` nodes offset by half a step,
//! `θ_j = -π + (j + 1/2)·2π/G`, so neither `θ = 0` nor `θ = ±π` is ever a node.
//! The midpoint rule on such a grid integrates trigonometric polynomials of
//! degree below `G` exactly, which makes it spectrally accurate for smooth
//! periodic integrands.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{cis, hermitian_defect, CMat};
use crate::models::{AutocovSeq, DensityModel};

pub const MIN_EXPONENT: u32 = 3;
pub const MAX_EXPONENT: u32 = 24;

/// Relative change below which two successive refinements count as converged.
pub const PROBE_REL_TOL: f64 = 1e-6;
/// Per-doubling increment ratio at or above which a monotone sequence is called divergent.
pub const PROBE_DIVERGENT_RATIO: f64 = 0.8;
/// Per-doubling increment ratio at or below which the increments count as geometrically decaying.
pub const PROBE_GEOMETRIC_RATIO: f64 = 0.75;

/// A density sampled on a half-step-offset midpoint grid.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    pub m: u32,
    pub nodes: Vec<f64>,
    pub values: Vec<CMat>,
}

impl SpectralGrid {
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn q(&self) -> usize {
        self.values.first().map_or(0, |v| v.nrows())
    }
}

/// Node angles of the `2^m`-point grid.
pub fn node_angles(m: u32) -> Vec<f64> {
    let g = 1usize << m;
    let step = 2.0 * PI / g as f64;
    (0..g).map(|j| -PI + (j as f64 + 0.5) * step).collect()
}

fn check_exponent(m: u32) -> Result<()> {
    if (MIN_EXPONENT..=MAX_EXPONENT).contains(&m) {
        Ok(())
    } else {
        Err(Error::GridExponent(m))
    }
}

pub fn make_grid(model: &DensityModel, m: u32) -> Result<SpectralGrid> {
    check_exponent(m)?;
    let nodes = node_angles(m);
    let mut values = Vec::with_capacity(nodes.len());
    for (node, &theta) in nodes.iter().enumerate() {
        let w = model.evaluate(theta);
        let finite = w.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite || hermitian_defect(&w) > 1e-12 {
            return Err(Error::NodeEvaluation { node });
        }
        values.push(w);
    }
    Ok(SpectralGrid { m, nodes, values })
}

/// Neumaier-compensated sum in index order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Midpoint mean `(1/G)·Σ values`.
pub fn midpoint_mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// `∫ f dσ` for `f` sampled at the grid nodes.
pub fn integrate(grid: &SpectralGrid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.size() {
        return Err(Error::LengthMismatch {
            expected: grid.size(),
            got: values.len(),
        });
    }
    Ok(midpoint_mean(values))
}

/// Mean of a node-evaluable function over the `2^m`-point grid.
pub fn integrate_fn(f: impl Fn(f64) -> f64, m: u32) -> f64 {
    let vals: Vec<f64> = node_angles(m).into_iter().map(f).collect();
    midpoint_mean(&vals)
}

/// Autocovariances `Γ(k) = ∫ e^{-ikθ} w dσ` for `k = -K..K`.
///
/// Only `k ≥ 0` is integrated; negative lags are mirrored as `Γ(-k) = Γ(k)*`.
pub fn fourier_coeffs(grid: &SpectralGrid, max_lag: usize) -> Result<AutocovSeq> {
    let g = grid.size();
    if 2 * max_lag >= g {
        return Err(Error::Aliasing { lag: max_lag, grid: g });
    }
    let q = grid.q();
    let mut positive = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let mut acc = CMat::zeros(q, q);
        for (r, c) in (0..q).flat_map(|r| (0..q).map(move |c| (r, c))) {
            let re = compensated_sum(
                grid.nodes
                    .iter()
                    .zip(&grid.values)
                    .map(|(&t, w)| (cis(-(k as f64) * t) * w[(r, c)]).re),
            );
            let im = compensated_sum(
                grid.nodes
                    .iter()
                    .zip(&grid.values)
                    .map(|(&t, w)| (cis(-(k as f64) * t) * w[(r, c)]).im),
            );
            acc[(r, c)] = num_complex::Complex64::new(re, im) / g as f64;
        }
        positive.push(acc);
    }
    // Γ(0) is Hermitian exactly in exact arithmetic; symmetrize the roundoff.
    positive[0] = crate::linalg::hermitian_part(&positive[0]);
    AutocovSeq::from_nonnegative(positive)
}

/// Outcome of a refinement-sequence integrability probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProbeVerdict {
    Finite { value: f64 },
    Divergent { growth_per_doubling: f64 },
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeStep {
    pub m: u32,
    pub value: f64,
    pub nonfinite_nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    #[serde(flatten)]
    pub verdict: ProbeVerdict,
    pub trace: Vec<ProbeStep>,
    pub rel_tol: f64,
    pub divergent_ratio: f64,
    pub geometric_ratio: f64,
}

impl ProbeReport {
    pub fn is_finite(&self) -> bool {
        matches!(self.verdict, ProbeVerdict::Finite { .. })
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self.verdict, ProbeVerdict::Divergent { .. })
    }

    pub fn value(&self) -> Option<f64> {
        match self.verdict {
            ProbeVerdict::Finite { value } => Some(value),
            _ => None,
        }
    }
}

/// Integrability evidence for a nonnegative integrand.
///
/// The midpoint integral is computed at each exponent in `exponents`, which must
/// be at least four consecutive integers. Non-finite node values are excluded
/// from the sum and counted; any such node is read as divergence evidence.
/// Classification of the final three increments `d_i = v_i - v_{i-1}`:
///
/// * relative change below [`PROBE_REL_TOL`] over the last two doublings: finite;
/// * increments of one sign whose ratios all stay at or above
///   [`PROBE_DIVERGENT_RATIO`] (and growth not shrinking): divergent;
/// * increment ratios all at or below [`PROBE_GEOMETRIC_RATIO`]: finite, with the
///   remaining geometric tail added to the last value;
/// * anything else: inconclusive.
pub fn integrability_probe(integrand: impl Fn(f64) -> f64, exponents: &[u32]) -> Result<ProbeReport> {
    if exponents.len() < 4 || exponents.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::ProbeWindow(exponents.len()));
    }
    for &m in exponents {
        check_exponent(m)?;
    }
    let mut trace = Vec::with_capacity(exponents.len());
    for &m in exponents {
        let g = 1usize << m;
        let mut nonfinite = 0usize;
        let vals: Vec<f64> = node_angles(m)
            .into_iter()
            .map(|t| {
                let v = integrand(t);
                if v.is_finite() {
                    v
                } else {
                    nonfinite += 1;
                    0.0
                }
            })
            .collect();
        let value = compensated_sum(vals) / g as f64;
        trace.push(ProbeStep {
            m,
            value,
            nonfinite_nodes: nonfinite,
        });
    }
    let verdict = classify_trace(&trace);
    Ok(ProbeReport {
        verdict,
        trace,
        rel_tol: PROBE_REL_TOL,
        divergent_ratio: PROBE_DIVERGENT_RATIO,
        geometric_ratio: PROBE_GEOMETRIC_RATIO,
    })
}

fn classify_trace(trace: &[ProbeStep]) -> ProbeVerdict {
    let n = trace.len();
    if trace.iter().any(|s| s.nonfinite_nodes > 0) {
        return ProbeVerdict::Divergent {
            growth_per_doubling: f64::INFINITY,
        };
    }
    let v: Vec<f64> = trace.iter().map(|s| s.value).collect();
    let last = v[n - 1];
    let close = |a: f64, b: f64| (a - b).abs() <= PROBE_REL_TOL * a.abs().max(b.abs());
    if close(v[n - 1], v[n - 2]) && close(v[n - 2], v[n - 3]) {
        return ProbeVerdict::Finite { value: last };
    }
    let d: Vec<f64> = (n - 3..n).map(|i| v[i] - v[i - 1]).collect();
    let same_sign = d.iter().all(|x| *x > 0.0) || d.iter().all(|x| *x < 0.0);
    let ratios: Vec<f64> = d.windows(2).map(|w| w[1] / w[0]).collect();
    if same_sign && d.iter().all(|x| *x > 0.0) && ratios.iter().all(|r| *r >= PROBE_DIVERGENT_RATIO) {
        return ProbeVerdict::Divergent {
            growth_per_doubling: d[2],
        };
    }
    if same_sign && ratios.iter().all(|r| r.abs() <= PROBE_GEOMETRIC_RATIO) {
        let r = ratios[1];
        let tail = d[2] * r / (1.0 - r);
        return ProbeVerdict::Finite { value: last + tail };
    }
    ProbeVerdict::Inconclusive
}
