//! Outer spectral factors `w = h h*` and `w = h♯* h♯`.
//!
//! The factor `h(z) = Σ c(n) zⁿ` is computed by the Bauer method: the last
//! block row of the Cholesky factor of the block Toeplitz autocovariance matrix
//! of `X(0..=N)`, read in reverse, converges to the coefficients of the outer
//! factor normalized so that `c(0)` is lower triangular with positive diagonal.
//! The rows come from a Levinson–Whittle recursion, `O(N² q³)` per order.
//!
//! `h♯` is obtained by factorizing the transposed density `wᵀ = g g*` and
//! taking `h♯ = gᵀ`.

use std::f64::consts::PI;

use rand::Rng;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::levinson::bauer_last_row;
use crate::linalg::{cis, frobenius, identity, inverse, max_abs_diff, CMat, C64, ZERO};
use crate::models::{AutocovSeq, AutocovSource, DensityModel};
use crate::quadrature::{compensated_sum, node_angles};

/// Grid exponent used for the factorization residual.
pub const RESIDUAL_EXPONENT: u32 = 12;
/// Grid exponent used by [`verify_outer`].
pub const OUTER_EXPONENT: u32 = 14;
/// Default upper limit for the internal order doubling.
pub const ORDER_CAP: usize = 4096;
/// Fraction of excluded nodes above which [`verify_outer`] is inconclusive.
pub const OUTER_MAX_EXCLUDED_FRACTION: f64 = 0.01;

/// A `q×q` matrix function on the unit circle, evaluated at `e^{iθ}`.
pub trait CircleFunction {
    fn dim(&self) -> usize;

    fn eval(&self, theta: f64) -> CMat;

    /// Values at the nodes of the `2^m`-point half-step grid.
    fn eval_grid(&self, m: u32) -> Vec<CMat> {
        node_angles(m).into_iter().map(|t| self.eval(t)).collect()
    }
}

impl CircleFunction for DensityModel {
    fn dim(&self) -> usize {
        DensityModel::dim(self)
    }

    fn eval(&self, theta: f64) -> CMat {
        self.evaluate(theta)
    }
}

/// Density reconstructed from a finite autocovariance list, `Σ_k Γ(k) e^{ikθ}`.
impl CircleFunction for AutocovSeq {
    fn dim(&self) -> usize {
        self.q()
    }

    fn eval(&self, theta: f64) -> CMat {
        let k0 = self.max_lag() as i64;
        let mut acc = CMat::zeros(self.q(), self.q());
        for (i, g) in self.gammas().iter().enumerate() {
            acc += g * cis((i as i64 - k0) as f64 * theta);
        }
        crate::linalg::hermitian_part(&acc)
    }
}

/// Gauge that pins the constant unitary factor left free by the factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Normalization {
    /// `c(0)` lower triangular with positive real diagonal (the `h` gauge).
    LowerTriangularPositiveDiag,
    /// `c(0)` upper triangular with positive real diagonal (`h♯ = gᵀ` with `g` in the lower gauge).
    UpperTriangularPositiveDiag,
    /// Coefficients supplied by the caller.
    Unnormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FactorFlag {
    /// The order cap was reached before successive coefficient rows agreed within tolerance.
    SlowConvergence,
}

/// Which product the factor reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    /// `w = h h*`.
    Causal,
    /// `w = h♯* h♯`.
    Sharp,
}

/// Power-series coefficients `c(0..=N)` of an outer factor.
#[derive(Debug, Clone)]
pub struct OuterFactor {
    pub q: usize,
    pub coeffs: Vec<CMat>,
    pub normalization: Normalization,
    pub kind: FactorKind,
    /// `sup_j ‖h h* − w‖_F` (or `‖h♯* h♯ − w‖_F`) on the residual grid; NaN if unknown.
    pub residual: f64,
    pub order: usize,
    /// Max coefficient change between the last two orders.
    pub last_change: f64,
    pub flags: Vec<FactorFlag>,
    /// `(Σ_{n > N/2} ‖c(n)‖²_F)^{1/2}`.
    pub tail_norm: f64,
}

impl OuterFactor {
    /// Wraps caller-supplied coefficients without normalization or residual.
    pub fn from_coeffs(coeffs: Vec<CMat>) -> Result<Self> {
        let q = coeffs
            .first()
            .map(|c| c.nrows())
            .ok_or_else(|| Error::InvalidArgument("factor needs at least c(0)".into()))?;
        if coeffs.iter().any(|c| c.nrows() != q || c.ncols() != q) {
            return Err(Error::InvalidArgument("factor coefficients must be q×q".into()));
        }
        let order = coeffs.len() - 1;
        let tail_norm = tail_norm(&coeffs);
        Ok(OuterFactor {
            q,
            coeffs,
            normalization: Normalization::Unnormalized,
            kind: FactorKind::Causal,
            residual: f64::NAN,
            order,
            last_change: f64::NAN,
            flags: Vec::new(),
            tail_norm,
        })
    }

    pub fn is_slow(&self) -> bool {
        self.flags.contains(&FactorFlag::SlowConvergence)
    }

    /// `Σ_n c(n) e^{inθ}` at every node of the `2^m` grid, via one FFT per entry.
    pub fn series_on_grid(&self, m: u32) -> Vec<CMat> {
        let g = 1usize << m;
        let q = self.q;
        let shift = -PI + PI / g as f64;
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_inverse(g);
        let mut out = vec![CMat::zeros(q, q); g];
        let mut buf = vec![ZERO; g];
        for r in 0..q {
            for c in 0..q {
                buf.iter_mut().for_each(|x| *x = ZERO);
                for (n, coef) in self.coeffs.iter().enumerate() {
                    buf[n % g] += coef[(r, c)] * cis(n as f64 * shift);
                }
                fft.process(&mut buf);
                for (j, v) in buf.iter().enumerate() {
                    out[j][(r, c)] = *v;
                }
            }
        }
        out
    }

    fn product_residual(&self, density: &dyn CircleFunction, m: u32) -> f64 {
        let values = self.series_on_grid(m);
        node_angles(m)
            .into_iter()
            .zip(values)
            .map(|(t, h)| {
                let prod = match self.kind {
                    FactorKind::Causal => &h * h.adjoint(),
                    FactorKind::Sharp => h.adjoint() * &h,
                };
                frobenius(&(prod - density.eval(t)))
            })
            .fold(0.0, f64::max)
    }
}

impl CircleFunction for OuterFactor {
    fn dim(&self) -> usize {
        self.q
    }

    fn eval(&self, theta: f64) -> CMat {
        let z = cis(theta);
        let mut acc = CMat::zeros(self.q, self.q);
        let mut zn = C64::new(1.0, 0.0);
        for c in &self.coeffs {
            acc += c * zn;
            zn *= z;
        }
        acc
    }

    fn eval_grid(&self, m: u32) -> Vec<CMat> {
        self.series_on_grid(m)
    }
}

fn tail_norm(coeffs: &[CMat]) -> f64 {
    let start = coeffs.len() / 2 + 1;
    coeffs
        .iter()
        .skip(start)
        .map(|c| frobenius(c).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Options for [`bauer_factorize`].
#[derive(Debug, Clone, Copy)]
pub struct BauerOptions {
    /// Starting order, a power of two.
    pub order: usize,
    /// Stop when successive coefficient rows differ by less than this.
    pub tol: f64,
    /// Largest order tried, a power of two.
    pub order_cap: usize,
}

impl Default for BauerOptions {
    fn default() -> Self {
        BauerOptions {
            order: 64,
            tol: 1e-10,
            order_cap: ORDER_CAP,
        }
    }
}

fn check_options(opts: &BauerOptions) -> Result<()> {
    for v in [opts.order, opts.order_cap] {
        if !v.is_power_of_two() {
            return Err(Error::OrderNotPowerOfTwo(v));
        }
    }
    if opts.order > opts.order_cap {
        return Err(Error::InvalidArgument(format!(
            "order {} exceeds cap {}",
            opts.order, opts.order_cap
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    Ok(())
}

/// Outer factor `h` with `w = h h*` from autocovariances.
///
/// The order doubles from `opts.order` until the coefficient rows of two
/// successive orders agree within `opts.tol`, or until the cap (or the last
/// available lag of a finite sequence) is reached, in which case the result is
/// flagged [`FactorFlag::SlowConvergence`]. `density` is used only for the
/// residual; pass the model, or the sequence itself for its truncated Fourier series.
pub fn bauer_factorize(
    source: &dyn AutocovSource,
    density: &dyn CircleFunction,
    opts: BauerOptions,
) -> Result<OuterFactor> {
    check_options(&opts)?;
    let cap = match source.max_lag() {
        Some(k) => {
            if k < opts.order {
                return Err(Error::InsufficientLags {
                    requested: opts.order,
                    available: k,
                });
            }
            // largest power of two not above the available lag
            opts.order_cap.min(1usize << (usize::BITS - 1 - k.leading_zeros()))
        }
        None => opts.order_cap,
    };
    let q = source.dim();
    let mut order = opts.order;
    let mut row = bauer_last_row(source, order)?;
    let mut change = f64::INFINITY;
    while order < cap {
        let next = bauer_last_row(source, order * 2)?;
        change = row
            .iter()
            .zip(&next)
            .map(|(a, b)| max_abs_diff(a, b))
            .fold(0.0, f64::max);
        row = next;
        order *= 2;
        if change < opts.tol {
            break;
        }
    }
    let mut flags = Vec::new();
    if !(change < opts.tol) {
        flags.push(FactorFlag::SlowConvergence);
    }
    let tail = tail_norm(&row);
    let mut factor = OuterFactor {
        q,
        coeffs: row,
        normalization: Normalization::LowerTriangularPositiveDiag,
        kind: FactorKind::Causal,
        residual: f64::NAN,
        order,
        last_change: change,
        flags,
        tail_norm: tail,
    };
    factor.residual = factor.product_residual(density, RESIDUAL_EXPONENT);
    Ok(factor)
}

/// Convenience wrapper factorizing a closed-form model.
pub fn factorize_model(model: &DensityModel, opts: BauerOptions) -> Result<OuterFactor> {
    if model.analytically_degenerate() {
        return Err(Error::NotFactorizable(format!(
            "{} density is singular everywhere (maximal rank fails)",
            model.name()
        )));
    }
    bauer_factorize(model, model, opts)
}

/// `h♯` with `w = h♯* h♯`, as `gᵀ` where `wᵀ = g g*`.
pub fn factorize_sharp(model: &DensityModel, opts: BauerOptions) -> Result<OuterFactor> {
    let g = factorize_model(&model.transpose_density(), opts)?;
    Ok(sharp_from_transposed(g, model))
}

/// As [`factorize_sharp`] for a finite autocovariance list.
pub fn factorize_sharp_autocov(seq: &AutocovSeq, opts: BauerOptions) -> Result<OuterFactor> {
    let t = seq.transposed();
    let g = bauer_factorize(&t, &t, opts)?;
    Ok(sharp_from_transposed(g, seq))
}

fn sharp_from_transposed(g: OuterFactor, density: &dyn CircleFunction) -> OuterFactor {
    let mut h = OuterFactor {
        coeffs: g.coeffs.iter().map(|c| c.transpose()).collect(),
        normalization: Normalization::UpperTriangularPositiveDiag,
        kind: FactorKind::Sharp,
        residual: f64::NAN,
        ..g
    };
    h.residual = h.product_residual(density, RESIDUAL_EXPONENT);
    h
}

/// Numerical outerness evidence for `det h`.
#[derive(Debug, Clone, Serialize)]
pub struct OuterCheck {
    /// `|log|det c(0)| − ∫ log|det h| dσ|`.
    pub residual: f64,
    pub excluded_nodes: usize,
    pub inconclusive: bool,
    pub m: u32,
}

impl OuterCheck {
    pub fn is_outer(&self, tol: f64) -> bool {
        !self.inconclusive && self.residual < tol
    }
}

/// Compares `log|det h(0)|` with the boundary mean of `log|det h|`.
///
/// Nodes where `det h` vanishes are excluded and counted.
pub fn verify_outer(factor: &OuterFactor) -> OuterCheck {
    verify_outer_on(factor, OUTER_EXPONENT)
}

pub fn verify_outer_on(factor: &OuterFactor, m: u32) -> OuterCheck {
    let values = factor.series_on_grid(m);
    let mut excluded = 0usize;
    let logs: Vec<f64> = values
        .iter()
        .filter_map(|h| {
            let l = h.determinant().norm().ln();
            if l.is_finite() {
                Some(l)
            } else {
                excluded += 1;
                None
            }
        })
        .collect();
    let g = values.len();
    let mean = compensated_sum(logs.iter().copied()) / logs.len().max(1) as f64;
    let at_zero = factor.coeffs[0].determinant().norm().ln();
    OuterCheck {
        residual: (at_zero - mean).abs(),
        excluded_nodes: excluded,
        inconclusive: excluded as f64 > OUTER_MAX_EXCLUDED_FRACTION * g as f64 || !at_zero.is_finite(),
        m,
    }
}

/// Innovation representation read off an outer factor.
#[derive(Debug, Clone)]
pub struct Innovations<'a> {
    /// `X(n) = Σ_{k ≤ n} c(n−k) ξ(k)` with unit-covariance white `ξ`.
    pub coeffs: &'a [CMat],
    /// One-step prediction error covariance `c(0) c(0)*`.
    pub one_step_error: CMat,
}

pub fn innovation_coeffs(factor: &OuterFactor) -> Innovations<'_> {
    let c0 = &factor.coeffs[0];
    Innovations {
        coeffs: &factor.coeffs,
        one_step_error: c0 * c0.adjoint(),
    }
}

/// Constancy of `Φ(θ) = e^{-iθ/2} (h♯(e^{iθ})*)^{-1} h(e^{iθ})`.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseReport {
    /// `max_j ‖Φ(θ_j) − Φ(θ_0)‖_F`.
    pub constancy: f64,
    /// `‖Φ(θ_0)* Φ(θ_0) − I‖_F`.
    pub unitarity: f64,
    pub tol: f64,
    pub m: u32,
    pub constant: bool,
}

pub fn phase_matrix(h: &dyn CircleFunction, h_sharp: &dyn CircleFunction, m: u32, tol: f64) -> Result<PhaseReport> {
    let q = h.dim();
    let nodes = node_angles(m);
    let hv = h.eval_grid(m);
    let hs = h_sharp.eval_grid(m);
    let mut phis = Vec::with_capacity(nodes.len());
    for (j, ((t, hj), hsj)) in nodes.iter().zip(&hv).zip(&hs).enumerate() {
        let inv = inverse(&hsj.adjoint(), &format!("h♯* at node {j}"))?;
        phis.push(inv * hj * cis(-t / 2.0));
    }
    let phi0 = &phis[0];
    let constancy = phis.iter().map(|p| frobenius(&(p - phi0))).fold(0.0, f64::max);
    let unitarity = frobenius(&(phi0.adjoint() * phi0 - identity(q)));
    Ok(PhaseReport {
        constancy,
        unitarity,
        tol,
        m,
        constant: constancy < tol && unitarity < tol,
    })
}

/// A `1×q` trigonometric polynomial `f = Σ_k a_k e_·(k)`, i.e. `f(e^{iθ}) = Σ_k a_k e^{-ikθ}`.
#[derive(Debug, Clone)]
pub struct TrigPoly {
    pub q: usize,
    /// `(k, a_k)` with `a_k` a length-`q` row.
    pub terms: Vec<(i64, Vec<C64>)>,
}

impl TrigPoly {
    /// The generator `e_j(k)` (0-based `j`).
    pub fn unit(q: usize, j: usize, k: i64) -> Self {
        let mut row = vec![ZERO; q];
        row[j] = C64::new(1.0, 0.0);
        TrigPoly {
            q,
            terms: vec![(k, row)],
        }
    }

    /// Coefficients with real and imaginary parts uniform on `[-1, 1)`, lags `-degree..=degree`.
    pub fn random(q: usize, degree: usize, rng: &mut impl Rng) -> Self {
        let d = degree as i64;
        let terms = (-d..=d)
            .map(|k| {
                let row = (0..q)
                    .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                (k, row)
            })
            .collect();
        TrigPoly { q, terms }
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(|(k, _)| k.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, theta: f64) -> CMat {
        let mut row = CMat::zeros(1, self.q);
        for (k, a) in &self.terms {
            let z = cis(-(*k as f64) * theta);
            for (j, v) in a.iter().enumerate() {
                row[(0, j)] += v * z;
            }
        }
        row
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometryCheck {
    /// `‖f‖²_w = ∫ f w f* dσ`.
    pub norm_w: f64,
    /// `‖f h♯*‖²_{I_q}`.
    pub norm_image: f64,
    pub discrepancy: f64,
}

/// Norm preservation of `G(f) = conj(f h♯*)` checked by grid quadrature.
pub fn verify_isometry_g(
    density: &dyn CircleFunction,
    h_sharp: &dyn CircleFunction,
    f: &TrigPoly,
    m: u32,
) -> Result<IsometryCheck> {
    let g = 1usize << m;
    if 4 * f.degree() >= g {
        return Err(Error::InvalidArgument(format!(
            "polynomial degree {} too large for grid of {g} nodes",
            f.degree()
        )));
    }
    let nodes = node_angles(m);
    let hs = h_sharp.eval_grid(m);
    let mut lhs = Vec::with_capacity(g);
    let mut rhs = Vec::with_capacity(g);
    for (t, hsj) in nodes.iter().zip(&hs) {
        let fv = f.eval(*t);
        lhs.push((&fv * density.eval(*t) * fv.adjoint())[(0, 0)].re);
        let img = &fv * hsj.adjoint();
        rhs.push(img.iter().map(|z| z.norm_sqr()).sum());
    }
    let norm_w = compensated_sum(lhs) / g as f64;
    let norm_image = compensated_sum(rhs) / g as f64;
    Ok(IsometryCheck {
        norm_w,
        norm_image,
        discrepancy: (norm_w - norm_image).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ScalarWeightFactor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn cmat() -> CMat {
        CMat::from_row_slice(2, 2, &[c(0.5), c(0.2), c(0.0), c(0.3)])
    }

    fn ma_c() -> DensityModel {
        DensityModel::ma(vec![identity(2), cmat()]).unwrap()
    }

    #[test]
    fn white_noise_factor_is_identity() {
        let f = factorize_model(&DensityModel::white_noise(2), BauerOptions::default()).unwrap();
        assert!(max_abs_diff(&f.coeffs[0], &identity(2)) < 1e-14);
        assert!(f.coeffs[1..].iter().all(|c| frobenius(c) < 1e-14));
        assert!(f.residual < 1e-12);
        assert!(!f.is_slow());
    }

    #[test]
    fn ma1_recovered() {
        let f = factorize_model(
            &ma_c(),
            BauerOptions {
                order: 32,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(f.order <= 256);
        assert!(max_abs_diff(&f.coeffs[0], &identity(2)) < 1e-6);
        assert!(max_abs_diff(&f.coeffs[1], &cmat()) < 1e-6);
        assert!(f.residual < 1e-8);
        assert_eq!(f.normalization, Normalization::LowerTriangularPositiveDiag);
    }

    #[test]
    fn factorize_from_finite_sequence() {
        let seq = ma_c().autocov_seq(200);
        let f = bauer_factorize(
            &seq,
            &seq,
            BauerOptions {
                order: 32,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(max_abs_diff(&f.coeffs[1], &cmat()) < 1e-6);
        assert!(matches!(
            bauer_factorize(
                &ma_c().autocov_seq(10),
                &seq,
                BauerOptions {
                    order: 32,
                    ..Default::default()
                }
            ),
            Err(Error::InsufficientLags { .. })
        ));
    }

    #[test]
    fn options_validated() {
        let bad = BauerOptions {
            order: 100,
            ..Default::default()
        };
        assert!(matches!(
            factorize_model(&ma_c(), bad),
            Err(Error::OrderNotPowerOfTwo(100))
        ));
    }

    #[test]
    fn stacked_shift_not_factorizable() {
        let m = DensityModel::stacked_shift(DensityModel::white_noise(1)).unwrap();
        assert!(matches!(
            factorize_model(&m, BauerOptions::default()),
            Err(Error::NotFactorizable(_))
        ));
        let seq = m.autocov_seq(128);
        assert!(matches!(
            bauer_factorize(&seq, &seq, BauerOptions::default()),
            Err(Error::NotFactorizable(_))
        ));
    }

    #[test]
    fn sharp_scalar_equals_causal() {
        let model = DensityModel::ma1_scalar(0.5);
        let h = factorize_model(&model, BauerOptions::default()).unwrap();
        let hs = factorize_sharp(&model, BauerOptions::default()).unwrap();
        assert!((hs.coeffs[0][(0, 0)] - c(1.0)).norm() < 1e-6);
        assert!((hs.coeffs[1][(0, 0)] - c(0.5)).norm() < 1e-6);
        assert!(max_abs_diff(&h.coeffs[1], &hs.coeffs[1]) < 1e-12);
    }

    #[test]
    fn sharp_reproduces_density_for_matrix_ma() {
        let hs = factorize_sharp(&ma_c(), BauerOptions::default()).unwrap();
        assert_eq!(hs.kind, FactorKind::Sharp);
        assert!(hs.residual < 1e-8, "{}", hs.residual);
        let seq = ma_c().autocov_seq(300);
        let hs2 = factorize_sharp_autocov(&seq, BauerOptions::default()).unwrap();
        assert!(max_abs_diff(&hs.coeffs[0], &hs2.coeffs[0]) < 1e-10);
    }

    #[test]
    fn unitary_quotient_between_orders() {
        let a = factorize_model(
            &ma_c(),
            BauerOptions {
                order: 64,
                order_cap: 64,
                ..Default::default()
            },
        )
        .unwrap();
        let b = factorize_model(
            &ma_c(),
            BauerOptions {
                order: 128,
                order_cap: 128,
                ..Default::default()
            },
        )
        .unwrap();
        let quotient = inverse(&a.coeffs[0], "c0").unwrap() * &b.coeffs[0];
        assert!(max_abs_diff(&quotient, &identity(2)) < 1e-6);
    }

    #[test]
    fn outer_checks() {
        let wn = OuterFactor::from_coeffs(vec![identity(2)]).unwrap();
        assert!(verify_outer(&wn).residual < 1e-14);

        let ma = OuterFactor::from_coeffs(vec![identity(2), identity(2) * c(0.5)]).unwrap();
        assert!(verify_outer(&ma).residual < 1e-6);

        let reversed = OuterFactor::from_coeffs(vec![identity(1) * c(0.5), identity(1)]).unwrap();
        let check = verify_outer(&reversed);
        assert!((check.residual - 2f64.ln()).abs() < 1e-6);
        assert!(!check.is_outer(1e-6));

        let vanishing = OuterFactor::from_coeffs(vec![CMat::zeros(1, 1)]).unwrap();
        assert!(verify_outer(&vanishing).inconclusive);
    }

    #[test]
    fn innovation_covariance() {
        let f = factorize_model(&ma_c(), BauerOptions::default()).unwrap();
        let inn = innovation_coeffs(&f);
        assert!(max_abs_diff(&inn.one_step_error, &identity(2)) < 1e-10);
        assert_eq!(inn.coeffs.len(), f.coeffs.len());
    }

    #[test]
    fn grid_series_matches_direct_sum() {
        let f = factorize_model(
            &ma_c(),
            BauerOptions {
                order: 16,
                order_cap: 16,
                ..Default::default()
            },
        )
        .unwrap();
        let fast = f.series_on_grid(5);
        for (t, v) in node_angles(5).into_iter().zip(fast) {
            assert!(max_abs_diff(&v, &f.eval(t)) < 1e-12);
        }
        // more coefficients than nodes folds correctly
        let long = OuterFactor::from_coeffs((0..40).map(|n| identity(1) * c(0.9f64.powi(n))).collect()).unwrap();
        for (t, v) in node_angles(4).into_iter().zip(long.series_on_grid(4)) {
            assert!(max_abs_diff(&v, &long.eval(t)) < 1e-12);
        }
    }

    #[test]
    fn analytic_phase_is_constant() {
        let h = ScalarWeightFactor {
            b: identity(2),
            sharp: false,
        };
        let hs = ScalarWeightFactor {
            b: identity(2),
            sharp: true,
        };
        let rep = phase_matrix(&h, &hs, 8, 1e-12).unwrap();
        assert!(rep.constancy < 1e-12 && rep.unitarity < 1e-12);
        assert!(rep.constant);
    }

    #[test]
    fn ma_phase_is_not_constant() {
        let model = DensityModel::ma1_scalar(0.5);
        let h = factorize_model(&model, BauerOptions::default()).unwrap();
        let hs = factorize_sharp(&model, BauerOptions::default()).unwrap();
        let rep = phase_matrix(&h, &hs, 8, 1e-6).unwrap();
        assert!(rep.unitarity < 1e-10, "|Φ| = 1 pointwise");
        assert!(rep.constancy > 0.1);
        assert!(!rep.constant);
    }

    #[test]
    fn isometry_examples() {
        let wn = DensityModel::white_noise(2);
        let unit = TrigPoly::unit(2, 0, 0);
        let chk = verify_isometry_g(&wn, &wn, &unit, 6).unwrap();
        assert!((chk.norm_w - 1.0).abs() < 1e-14 && chk.discrepancy < 1e-14);

        let model = ma_c();
        let hs = factorize_sharp(&model, BauerOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = TrigPoly::random(2, 3, &mut rng);
        assert!(verify_isometry_g(&model, &hs, &f, 12).unwrap().discrepancy < 1e-8);

        let sw = DensityModel::scalar_weight(identity(2)).unwrap();
        let hs = ScalarWeightFactor {
            b: identity(2),
            sharp: true,
        };
        let f = TrigPoly::unit(2, 1, -1);
        let chk = verify_isometry_g(&sw, &hs, &f, 12).unwrap();
        assert!((chk.norm_w - 4.0 / PI).abs() < 1e-4);
        assert!((chk.norm_image - 4.0 / PI).abs() < 1e-4);

        let big = TrigPoly::unit(2, 0, 20);
        assert!(verify_isometry_g(&wn, &wn, &big, 6).is_err());
    }
}
