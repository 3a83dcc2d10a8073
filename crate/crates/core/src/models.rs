//! Closed-form spectral density models and their autocovariances.
//!
//! Conventions: `Γ(k) = E[X(m+k) X(m)*] = ∫ e^{-ikθ} w(e^{iθ}) dσ`, so that
//! `Γ(-k) = Γ(k)*`. A causal moving-average factor `Θ(z) = Σ θ_j z^j` with
//! `w = Θ Θ*` has `Γ(k) = Σ_j θ_{j+k} θ_j*`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{cis, conj, identity, transpose, CMat, C64, ONE};

/// Which side the moving-average polynomial sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorSide {
    /// `w = Θ Θ*`.
    Left,
    /// `w = Θ* Θ`; produced when transposing a left-sided model.
    Right,
}

/// Time alignment of the stacked pair built from a scalar base process `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftOrientation {
    /// `X(k) = (Y(k-1), Y(k))ᵀ`; off-diagonal `w_12 = e^{iθ} w_Y`.
    Lag,
    /// Transposed density: `w_12 = e^{-iθ} w_Y`.
    Lead,
}

/// A `q×q` spectral density on the unit circle given in closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityModel {
    WhiteNoise {
        q: usize,
    },
    MaFactor {
        coeffs: Vec<CMat>,
        side: FactorSide,
    },
    /// `w(e^{iθ}) = |1 + e^{iθ}| B B*`.
    ScalarWeight {
        b: CMat,
    },
    /// Degenerate 2×2 density of a scalar process stacked with its own shift.
    StackedShift {
        base: Box<DensityModel>,
        orientation: ShiftOrientation,
    },
}

/// Facts about a model that are known analytically rather than numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalyticCertificate {
    pub ipf: bool,
    pub cnd: bool,
    pub source: &'static str,
}

fn check_square(m: &CMat, q: usize, what: &str) -> Result<()> {
    if m.nrows() != q || m.ncols() != q {
        return Err(Error::InvalidModel(format!(
            "{what} is {}x{}, expected {q}x{q}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidModel(format!("{what} has non-finite entries")));
    }
    Ok(())
}

fn check_invertible(m: &CMat, what: &str) -> Result<()> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let q = m.nrows() as i32;
    if m.determinant().norm() <= 1e-12 * scale.powi(q) {
        return Err(Error::InvalidModel(format!("{what} is not invertible")));
    }
    Ok(())
}

impl DensityModel {
    pub fn white_noise(q: usize) -> Self {
        DensityModel::WhiteNoise { q }
    }

    /// Moving-average model `w = Θ Θ*` with `Θ(z) = Σ coeffs[j] z^j`.
    pub fn ma(coeffs: Vec<CMat>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::InvalidModel("MA model needs at least θ₀".into()))?;
        let q = first.nrows();
        if q == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        for (j, c) in coeffs.iter().enumerate() {
            check_square(c, q, &format!("θ_{j}"))?;
        }
        check_invertible(first, "θ₀")?;
        Ok(DensityModel::MaFactor {
            coeffs,
            side: FactorSide::Left,
        })
    }

    /// Scalar MA(1): `Θ(z) = 1 + c z`.
    pub fn ma1_scalar(c: f64) -> Self {
        DensityModel::MaFactor {
            coeffs: vec![identity(1), CMat::from_element(1, 1, C64::new(c, 0.0))],
            side: FactorSide::Left,
        }
    }

    pub fn scalar_weight(b: CMat) -> Result<Self> {
        let q = b.nrows();
        if q == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        check_square(&b, q, "B")?;
        check_invertible(&b, "B")?;
        Ok(DensityModel::ScalarWeight { b })
    }

    pub fn stacked_shift(base: DensityModel) -> Result<Self> {
        if base.dim() != 1 {
            return Err(Error::InvalidModel(format!(
                "stacked shift needs a scalar base, got dimension {}",
                base.dim()
            )));
        }
        Ok(DensityModel::StackedShift {
            base: Box::new(base),
            orientation: ShiftOrientation::Lag,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            DensityModel::WhiteNoise { q } => *q,
            DensityModel::MaFactor { coeffs, .. } => coeffs[0].nrows(),
            DensityModel::ScalarWeight { b } => b.nrows(),
            DensityModel::StackedShift { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DensityModel::WhiteNoise { .. } => "white_noise",
            DensityModel::MaFactor { .. } => "ma",
            DensityModel::ScalarWeight { .. } => "scalar_weight",
            DensityModel::StackedShift { .. } => "stacked_shift",
        }
    }

    /// True when `det w ≡ 0` is known in closed form.
    pub fn analytically_degenerate(&self) -> bool {
        matches!(self, DensityModel::StackedShift { .. })
    }

    /// Past/future facts proved for this family, if any.
    pub fn analytic_certificate(&self) -> Option<AnalyticCertificate> {
        match self {
            DensityModel::ScalarWeight { .. } => Some(AnalyticCertificate {
                ipf: true,
                cnd: true,
                source: "scalar weight |1+z|BB*: outer factors (1+z)^(1/2)B, (1+z)^(1/2)B* give trivial intersection",
            }),
            DensityModel::StackedShift { .. } => Some(AnalyticCertificate {
                ipf: true,
                cnd: false,
                source: "stacked shift (Y(k-1),Y(k)): past and future share Y(-1); finite windows reduce to Y",
            }),
            _ => None,
        }
    }

    /// `w(e^{iθ})`.
    pub fn evaluate(&self, theta: f64) -> CMat {
        match self {
            DensityModel::WhiteNoise { q } => identity(*q),
            DensityModel::MaFactor { coeffs, side } => {
                let z = cis(theta);
                let mut poly = CMat::zeros(coeffs[0].nrows(), coeffs[0].ncols());
                let mut zk = ONE;
                for c in coeffs {
                    poly += c * zk;
                    zk *= z;
                }
                let w = match side {
                    FactorSide::Left => &poly * poly.adjoint(),
                    FactorSide::Right => poly.adjoint() * &poly,
                };
                crate::linalg::hermitian_part(&w)
            }
            DensityModel::ScalarWeight { b } => {
                let weight = 2.0 * (theta / 2.0).cos().abs();
                crate::linalg::hermitian_part(&(b * b.adjoint())) * C64::new(weight, 0.0)
            }
            DensityModel::StackedShift { base, orientation } => {
                let wy = base.evaluate(theta)[(0, 0)].re;
                let phase = match orientation {
                    ShiftOrientation::Lag => cis(theta),
                    ShiftOrientation::Lead => cis(-theta),
                };
                let wy = C64::new(wy, 0.0);
                CMat::from_row_slice(2, 2, &[wy, phase * wy, phase.conj() * wy, wy])
            }
        }
    }

    /// Closed-form autocovariance `Γ(k)`.
    pub fn autocovariance(&self, k: i64) -> CMat {
        match self {
            DensityModel::WhiteNoise { q } => {
                if k == 0 {
                    identity(*q)
                } else {
                    CMat::zeros(*q, *q)
                }
            }
            DensityModel::MaFactor { coeffs, side } => {
                if k < 0 {
                    return self.autocovariance(-k).adjoint();
                }
                let q = coeffs[0].nrows();
                let k = k as usize;
                let mut acc = CMat::zeros(q, q);
                for j in 0..coeffs.len().saturating_sub(k) {
                    acc += match side {
                        FactorSide::Left => &coeffs[j + k] * coeffs[j].adjoint(),
                        FactorSide::Right => coeffs[j].adjoint() * &coeffs[j + k],
                    };
                }
                acc
            }
            DensityModel::ScalarWeight { b } => {
                let kf = k as f64;
                let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                let coef = (4.0 / PI) * sign / (4.0 * kf * kf - 1.0);
                crate::linalg::hermitian_part(&(b * b.adjoint())) * C64::new(coef, 0.0)
            }
            DensityModel::StackedShift { base, orientation } => {
                let g = |lag: i64| base.autocovariance(lag)[(0, 0)];
                let (upper, lower) = match orientation {
                    ShiftOrientation::Lag => (g(k - 1), g(k + 1)),
                    ShiftOrientation::Lead => (g(k + 1), g(k - 1)),
                };
                CMat::from_row_slice(2, 2, &[g(k), upper, lower, g(k)])
            }
        }
    }

    /// Autocovariances for lags `-max_lag..=max_lag` from the closed forms.
    pub fn autocov_seq(&self, max_lag: usize) -> AutocovSeq {
        let positive = (0..=max_lag as i64).map(|k| self.autocovariance(k)).collect();
        AutocovSeq::from_nonnegative(positive).expect("closed-form Γ(0) is square")
    }

    /// A model whose density is the pointwise transpose `w(e^{iθ})ᵀ`.
    pub fn transpose_density(&self) -> DensityModel {
        match self {
            DensityModel::WhiteNoise { q } => DensityModel::WhiteNoise { q: *q },
            // (ΘΘ*)ᵀ = (Θᵀ)* Θᵀ and (Θ*Θ)ᵀ = Θᵀ (Θᵀ)*.
            DensityModel::MaFactor { coeffs, side } => DensityModel::MaFactor {
                coeffs: coeffs.iter().map(transpose).collect(),
                side: match side {
                    FactorSide::Left => FactorSide::Right,
                    FactorSide::Right => FactorSide::Left,
                },
            },
            // (BB*)ᵀ = B̄ B̄*.
            DensityModel::ScalarWeight { b } => DensityModel::ScalarWeight { b: conj(b) },
            DensityModel::StackedShift { base, orientation } => DensityModel::StackedShift {
                base: base.clone(),
                orientation: match orientation {
                    ShiftOrientation::Lag => ShiftOrientation::Lead,
                    ShiftOrientation::Lead => ShiftOrientation::Lag,
                },
            },
        }
    }
}

/// Anything that can supply autocovariance matrices by lag.
pub trait AutocovSource {
    fn dim(&self) -> usize;
    /// Largest available lag, `None` when unbounded.
    fn max_lag(&self) -> Option<usize>;
    fn gamma(&self, k: i64) -> Result<CMat>;
}

impl AutocovSource for DensityModel {
    fn dim(&self) -> usize {
        DensityModel::dim(self)
    }

    fn max_lag(&self) -> Option<usize> {
        None
    }

    fn gamma(&self, k: i64) -> Result<CMat> {
        Ok(self.autocovariance(k))
    }
}

/// Finite autocovariance list `Γ(-K)..Γ(K)` with `Γ(-k) = Γ(k)*`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSeq {
    q: usize,
    max_lag: usize,
    gammas: Vec<CMat>,
}

impl AutocovSeq {
    /// Builds the sequence from `Γ(0)..Γ(K)`, mirroring the negative lags.
    pub fn from_nonnegative(positive: Vec<CMat>) -> Result<Self> {
        let g0 = positive
            .first()
            .ok_or_else(|| Error::InvalidArgument("autocovariance list is empty".into()))?;
        let q = g0.nrows();
        if positive.iter().any(|g| g.nrows() != q || g.ncols() != q) {
            return Err(Error::InvalidArgument("autocovariance blocks must be q×q".into()));
        }
        let max_lag = positive.len() - 1;
        let mut gammas: Vec<CMat> = positive[1..].iter().rev().map(|g| g.adjoint()).collect();
        gammas.extend(positive);
        Ok(AutocovSeq { q, max_lag, gammas })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn get(&self, k: i64) -> Option<&CMat> {
        if k.unsigned_abs() as usize > self.max_lag {
            return None;
        }
        self.gammas.get((k + self.max_lag as i64) as usize)
    }

    /// `Γ(-K)..Γ(K)` in lag order.
    pub fn gammas(&self) -> &[CMat] {
        &self.gammas
    }

    /// The sequence of the transposed process, `Γ(k)ᵀ`.
    pub fn transposed(&self) -> AutocovSeq {
        AutocovSeq {
            q: self.q,
            max_lag: self.max_lag,
            gammas: self.gammas.iter().map(transpose).collect(),
        }
    }
}

impl AutocovSource for AutocovSeq {
    fn dim(&self) -> usize {
        self.q
    }

    fn max_lag(&self) -> Option<usize> {
        Some(self.max_lag)
    }

    fn gamma(&self, k: i64) -> Result<CMat> {
        self.get(k).cloned().ok_or(Error::InsufficientLags {
            requested: k.unsigned_abs() as usize,
            available: self.max_lag,
        })
    }
}

/// `(1+z)^{1/2} B` (or `(1+z)^{1/2} B*` for the sharp factor) on the closed disk,
/// principal branch, so the value at `z = 0` is `B`.
pub fn analytic_factor_scalar_weight(b: &CMat, z: C64, sharp: bool) -> Result<CMat> {
    if z.norm() > 1.0 + 1e-12 {
        return Err(Error::OutsideDisk(z.norm()));
    }
    let base = ONE + z;
    if base.norm() < 1e-300 {
        return Err(Error::BranchPoint);
    }
    let root = base.sqrt();
    Ok(if sharp { b.adjoint() * root } else { b * root })
}

/// Boundary values of the analytic outer factor of a scalar-weight density.
#[derive(Debug, Clone)]
pub struct ScalarWeightFactor {
    pub b: CMat,
    pub sharp: bool,
}

impl crate::factorization::CircleFunction for ScalarWeightFactor {
    fn dim(&self) -> usize {
        self.b.nrows()
    }

    fn eval(&self, theta: f64) -> CMat {
        analytic_factor_scalar_weight(&self.b, cis(theta), self.sharp).expect("grid angles exclude the branch point")
    }
}
