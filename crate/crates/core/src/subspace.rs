//! Finite-window geometry of past and future subspaces of `L(w)`.
//!
//! The generator `e_j(k)` (row vector with `z^{-k}` in slot `j`) corresponds
//! isometrically to the process variable `X_j(k)`, and
//! `⟨e_i(k), e_j(l)⟩_w = Γ(k-l)_{ij}`. Every subspace spanned by finitely
//! many generators is therefore handled through block Toeplitz Gram matrices
//! assembled from autocovariances, with no quadrature involved.
//!
//! Distances between vectors are measured in coordinates `F x`, where
//! `G = F* F` is the rank-truncated factorization of the Gram matrix of the
//! union of the index sets involved. This avoids forming `x* G x` for vectors
//! that are zero in `L(w)` but have O(1) coefficients, which happens whenever
//! the Gram is singular.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::levinson::{FlatGammas, Whittle};
use crate::linalg::{herm_eigen, singular_values, svd_dilation, CMat, CVec, C64};
use crate::models::AutocovSource;

/// Relative eigenvalue cutoff for numerical rank.
pub const RANK_TOL: f64 = 1e-10;
/// Eigenvalues within this factor of the cutoff make a rank unstable.
pub const RANK_STABILITY_BAND: f64 = 10.0;
/// Cosines at or above `1 - COSINE_ONE_GAP` count as a shared direction.
pub const COSINE_ONE_GAP: f64 = 1e-8;

/// Sorted, duplicate-free list of lags; each lag contributes all `q` generators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexSet(Vec<i64>);

impl IndexSet {
    pub fn new(mut lags: Vec<i64>) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        lags.sort_unstable();
        lags.dedup();
        Ok(IndexSet(lags))
    }

    /// Lags `a..=b`.
    pub fn range(a: i64, b: i64) -> Result<Self> {
        Self::new((a..=b).collect())
    }

    pub fn lags(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        IndexSet::new(v).expect("union of non-empty sets")
    }

    fn position(&self, lag: i64) -> Option<usize> {
        self.0.binary_search(&lag).ok()
    }
}

/// Gram matrix of the generators on a lag window, block `(k, l) = Γ(k-l)`.
#[derive(Debug, Clone)]
pub struct GramBlockToeplitz {
    pub q: usize,
    pub window: (i64, i64),
    pub matrix: CMat,
}

/// Gram matrix of the generators of an arbitrary index set.
pub fn gram_for(autocov: &dyn AutocovSource, set: &IndexSet) -> Result<CMat> {
    let q = autocov.dim();
    let lags = set.lags();
    let span = (lags[lags.len() - 1] - lags[0]) as usize;
    if let Some(max) = autocov.max_lag() {
        if max < span {
            return Err(Error::InsufficientLags {
                requested: span,
                available: max,
            });
        }
    }
    let blocks: Vec<CMat> = (0..=span as i64).map(|k| autocov.gamma(k)).collect::<Result<_>>()?;
    let n = lags.len();
    let mut g = CMat::zeros(n * q, n * q);
    for (a, &ka) in lags.iter().enumerate() {
        for (b, &kb) in lags.iter().enumerate() {
            let d = ka - kb;
            let blk = if d >= 0 {
                blocks[d as usize].clone()
            } else {
                blocks[(-d) as usize].adjoint()
            };
            g.view_mut((a * q, b * q), (q, q)).copy_from(&blk);
        }
    }
    Ok(g)
}

/// Gram on the contiguous window `[a, b]`.
pub fn gram(autocov: &dyn AutocovSource, window: (i64, i64)) -> Result<GramBlockToeplitz> {
    let (a, b) = window;
    if a > b {
        return Err(Error::InvalidArgument(format!("window [{a}, {b}] is empty")));
    }
    let matrix = gram_for(autocov, &IndexSet::range(a, b)?)?;
    Ok(GramBlockToeplitz {
        q: autocov.dim(),
        window,
        matrix,
    })
}

/// Numerical rank with the stability band around the cutoff.
#[derive(Debug, Clone, Serialize)]
pub struct RankInfo {
    pub rank: usize,
    pub size: usize,
    pub unstable: bool,
    pub max_eigenvalue: f64,
}

pub fn numerical_rank(g: &CMat, tol: f64) -> RankInfo {
    let eig = herm_eigen(g);
    rank_from_eigenvalues(&eig.values, tol)
}

fn rank_from_eigenvalues(values: &[f64], tol: f64) -> RankInfo {
    let max = values.first().copied().unwrap_or(0.0).max(0.0);
    let cut = tol * max;
    let rank = values.iter().filter(|&&v| v > cut).count();
    let unstable = values
        .iter()
        .any(|&v| v > cut / RANK_STABILITY_BAND && v < cut * RANK_STABILITY_BAND);
    RankInfo {
        rank,
        size: values.len(),
        unstable,
        max_eigenvalue: max,
    }
}

/// `V Λ^{-1/2}` over the eigenpairs above the cutoff: columns are an
/// orthonormal basis of the span, expressed in generator coefficients.
fn whitening(g: &CMat, tol: f64) -> (CMat, RankInfo) {
    let eig = herm_eigen(g);
    let info = rank_from_eigenvalues(&eig.values, tol);
    let mut w = CMat::zeros(g.nrows(), info.rank);
    for i in 0..info.rank {
        let s = C64::new(1.0 / eig.values[i].sqrt(), 0.0);
        w.set_column(i, &(eig.vectors.column(i) * s));
    }
    (w, info)
}

/// Union geometry: generator bookkeeping plus the factor `F` with `G_U = F* F`.
struct Geometry {
    q: usize,
    union: IndexSet,
    gram: CMat,
    coords: CMat,
    rank: RankInfo,
}

impl Geometry {
    fn new(autocov: &dyn AutocovSource, union: IndexSet, tol: f64) -> Result<Self> {
        let q = autocov.dim();
        let gram = gram_for(autocov, &union)?;
        let eig = herm_eigen(&gram);
        let rank = rank_from_eigenvalues(&eig.values, tol);
        let mut coords = CMat::zeros(rank.rank, gram.ncols());
        for i in 0..rank.rank {
            let s = C64::new(eig.values[i].sqrt(), 0.0);
            coords.set_row(i, &(eig.vectors.column(i).adjoint() * s));
        }
        Ok(Geometry {
            q,
            union,
            gram,
            coords,
            rank,
        })
    }

    /// Union generator indices of the generators of `set`.
    fn columns(&self, set: &IndexSet) -> Vec<usize> {
        set.lags()
            .iter()
            .flat_map(|&lag| {
                let p = self.union.position(lag).expect("set is part of the union");
                (0..self.q).map(move |j| p * self.q + j)
            })
            .collect()
    }

    fn sub_gram(&self, rows: &[usize], cols: &[usize]) -> CMat {
        CMat::from_fn(rows.len(), cols.len(), |r, c| self.gram[(rows[r], cols[c])])
    }

    /// Embeds coefficients over `cols` into union coefficients.
    fn embed(&self, cols: &[usize], x: &CMat) -> CMat {
        let mut out = CMat::zeros(self.gram.nrows(), x.ncols());
        for (i, &c) in cols.iter().enumerate() {
            out.set_row(c, &x.row(i));
        }
        out
    }

    /// Orthonormal basis (in `F` coordinates) of the span of union coefficient vectors.
    fn orthonormal(&self, coeffs: &CMat, tol: f64) -> CMat {
        let y = &self.coords * coeffs;
        if y.ncols() == 0 || y.nrows() == 0 {
            return CMat::zeros(y.nrows(), 0);
        }
        let eig = herm_eigen(&(y.adjoint() * &y));
        let max = eig.values.first().copied().unwrap_or(0.0);
        let keep: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i] > tol * max).collect();
        let mut basis = CMat::zeros(y.nrows(), keep.len());
        for (c, &i) in keep.iter().enumerate() {
            let s = C64::new(1.0 / eig.values[i].sqrt(), 0.0);
            basis.set_column(c, &(&y * eig.vectors.column(i) * s));
        }
        basis
    }
}

/// Canonical cosines between two spans.
#[derive(Debug, Clone, Serialize)]
pub struct PrincipalAngleReport {
    /// Descending; may exceed 1 by roundoff.
    pub cosines: Vec<f64>,
    pub rank_a: usize,
    pub rank_b: usize,
    pub tol: f64,
}

impl PrincipalAngleReport {
    pub fn largest(&self) -> f64 {
        self.cosines.first().copied().unwrap_or(0.0)
    }

    pub fn second(&self) -> f64 {
        self.cosines.get(1).copied().unwrap_or(0.0)
    }
}

struct AnglePairs {
    report: PrincipalAngleReport,
    /// Principal vectors in union coefficients, paired with the cosines.
    vectors_a: CMat,
    vectors_b: CMat,
}

fn angle_pairs(geom: &Geometry, a: &IndexSet, b: &IndexSet, tol: f64) -> AnglePairs {
    let ca = geom.columns(a);
    let cb = geom.columns(b);
    let (wa, ra) = whitening(&geom.sub_gram(&ca, &ca), tol);
    let (wb, rb) = whitening(&geom.sub_gram(&cb, &cb), tol);
    let m = wa.adjoint() * geom.sub_gram(&ca, &cb) * &wb;
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return AnglePairs {
            report: PrincipalAngleReport {
                cosines: Vec::new(),
                rank_a: ra.rank,
                rank_b: rb.rank,
                tol,
            },
            vectors_a: CMat::zeros(geom.gram.nrows(), 0),
            vectors_b: CMat::zeros(geom.gram.nrows(), 0),
        };
    }
    let (cosines, ys, zs) = svd_dilation(&m);
    AnglePairs {
        report: PrincipalAngleReport {
            cosines,
            rank_a: ra.rank,
            rank_b: rb.rank,
            tol,
        },
        vectors_a: geom.embed(&ca, &(&wa * ys)),
        vectors_b: geom.embed(&cb, &(&wb * zs)),
    }
}

/// Principal cosines between `span{e_j(k): k ∈ A}` and `span{e_j(k): k ∈ B}`:
/// singular values of `W_A* G_AB W_B` with `W_X` the rank-truncated inverse
/// square root of `G_X`.
pub fn principal_angles(
    a: &IndexSet,
    b: &IndexSet,
    autocov: &dyn AutocovSource,
    tol: f64,
) -> Result<PrincipalAngleReport> {
    let geom = Geometry::new(autocov, a.union(b), tol)?;
    Ok(angle_pairs(&geom, a, b, tol).report)
}

/// A certified common subspace of two spans.
#[derive(Debug, Clone, Serialize)]
pub struct IntersectionCertificate {
    /// `rank G_A + rank G_B − rank G_{A∪B}`.
    pub dim: usize,
    pub rank_a: usize,
    pub rank_b: usize,
    pub rank_union: usize,
    /// Union generator list `(lag, component)`, the row labels of `basis`.
    pub generators: Vec<(i64, usize)>,
    /// Columns: certified intersection vectors as coefficients over `generators`.
    #[serde(skip)]
    pub basis: CMat,
    /// Max over certified vectors of `‖u_A − u_B‖_w`.
    pub residual: f64,
    pub cosines: Vec<f64>,
    /// Some rank had eigenvalues within the stability band of its cutoff.
    pub unstable: bool,
    /// Number of certified vectors equals `dim`.
    pub consistent: bool,
}

impl IntersectionCertificate {
    pub fn certified(&self) -> usize {
        self.basis.ncols()
    }
}

fn certificate(geom: &Geometry, a: &IndexSet, b: &IndexSet, tol: f64) -> IntersectionCertificate {
    let pairs = angle_pairs(geom, a, b, tol);
    let ca = geom.columns(a);
    let cb = geom.columns(b);
    let ra = numerical_rank(&geom.sub_gram(&ca, &ca), tol);
    let rb = numerical_rank(&geom.sub_gram(&cb, &cb), tol);
    let ru = &geom.rank;
    let dim = (ra.rank + rb.rank).saturating_sub(ru.rank);
    let shared: Vec<usize> = pairs
        .report
        .cosines
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= 1.0 - COSINE_ONE_GAP)
        .map(|(i, _)| i)
        .collect();
    let basis = CMat::from_fn(geom.gram.nrows(), shared.len(), |r, c| pairs.vectors_a[(r, shared[c])]);
    let residual = shared
        .iter()
        .map(|&i| {
            let d = pairs.vectors_a.column(i) - pairs.vectors_b.column(i);
            (&geom.coords * d).norm()
        })
        .fold(0.0, f64::max);
    let generators = geom
        .union
        .lags()
        .iter()
        .flat_map(|&lag| (0..geom.q).map(move |j| (lag, j)))
        .collect();
    IntersectionCertificate {
        dim,
        rank_a: ra.rank,
        rank_b: rb.rank,
        rank_union: ru.rank,
        generators,
        basis,
        residual,
        cosines: pairs.report.cosines,
        unstable: ra.unstable || rb.unstable || ru.unstable,
        consistent: shared.len() == dim,
    }
}

/// Intersection of the spans of `A` and `B`, dimension from the Grassmann rank
/// formula and basis from principal-vector pairs with cosine ≥ `1 − 1e-8`.
pub fn intersection(
    a: &IndexSet,
    b: &IndexSet,
    autocov: &dyn AutocovSource,
    tol: f64,
) -> Result<IntersectionCertificate> {
    let geom = Geometry::new(autocov, a.union(b), tol)?;
    Ok(certificate(&geom, a, b, tol))
}

/// Largest principal angle between the span of the certified vectors and the
/// span of `target`, in radians.
fn coincidence_angle(geom: &Geometry, cert: &IntersectionCertificate, target: &IndexSet, tol: f64) -> f64 {
    let cols = geom.columns(target);
    let mut t = CMat::zeros(geom.gram.nrows(), cols.len());
    for (i, &c) in cols.iter().enumerate() {
        t[(c, i)] = C64::new(1.0, 0.0);
    }
    let qi = geom.orthonormal(&cert.basis, tol);
    let qt = geom.orthonormal(&t, tol);
    if qi.ncols() != qt.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if qi.ncols() == 0 {
        return 0.0;
    }
    let resid = &qi - &qt * (qt.adjoint() * &qi);
    let sines = singular_values(&resid);
    sines.first().copied().unwrap_or(0.0).min(1.0).asin()
}

/// Past/future table row.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileRow {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: Option<usize>,
    pub cos_1: f64,
    pub cos_2: f64,
    pub dim: usize,
    pub residual: f64,
}

/// Past `[-N..-1]` against future `[0..N]` for every `N` in `n_list`.
pub fn cnd_profile(autocov: &dyn AutocovSource, n_list: &[usize], tol: f64) -> Result<Vec<ProfileRow>> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("N list must be strictly ascending".into()));
    }
    n_list
        .iter()
        .map(|&big_n| {
            if big_n == 0 {
                return Err(Error::InvalidArgument("N must be at least 1".into()));
            }
            let n = big_n as i64;
            let cert = intersection(&IndexSet::range(-n, -1)?, &IndexSet::range(0, n)?, autocov, tol)?;
            Ok(ProfileRow {
                big_n,
                n: None,
                cos_1: cert.cosines.first().copied().unwrap_or(0.0),
                cos_2: cert.cosines.get(1).copied().unwrap_or(0.0),
                dim: cert.dim,
                residual: cert.residual,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IpfFailure {
    /// Generators are linearly dependent on the window (maximal rank violated).
    RankDeficient,
    Unstable,
    DimensionMismatch,
    NotCoincident,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct IpfCheck {
    pub status: CheckStatus,
    pub reasons: Vec<IpfFailure>,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub dim: usize,
    pub expected_dim: usize,
    pub rank_union: usize,
    pub union_size: usize,
    /// Largest principal angle between the certified intersection and the span of `[-n..-1]`.
    pub coincidence_angle: f64,
    pub cos_1: f64,
    pub cos_2: f64,
    pub residual: f64,
    pub tol: f64,
}

impl IpfCheck {
    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

/// Finite-window shadow of `past ∩ future-from-(−n) = span[−n..−1]`.
///
/// Intersects the past `[-N..-1]` with `[-n..N]`. Passes when the window Gram
/// has full rank, the intersection has dimension exactly `q n`, and it
/// coincides with the span of `[-n..-1]` (largest angle below `tol`). A pass is
/// consistency evidence only; a rank-deficient window refutes the linear
/// independence the property's infinite-dimensional version relies on.
pub fn ipf_finite_check(
    autocov: &dyn AutocovSource,
    n: usize,
    big_n: usize,
    tol: f64,
    rank_tol: f64,
) -> Result<IpfCheck> {
    if !(n >= 1 && big_n > n) {
        return Err(Error::InvalidArgument(format!("need N > n >= 1, got N={big_n}, n={n}")));
    }
    let q = autocov.dim();
    let (ni, bi) = (n as i64, big_n as i64);
    let past = IndexSet::range(-bi, -1)?;
    let window = IndexSet::range(-ni, bi)?;
    let middle = IndexSet::range(-ni, -1)?;
    let geom = Geometry::new(autocov, past.union(&window), rank_tol)?;
    let cert = certificate(&geom, &past, &window, rank_tol);
    let angle = coincidence_angle(&geom, &cert, &middle, rank_tol);
    let expected = q * n;
    let mut reasons = Vec::new();
    if geom.rank.rank < geom.rank.size {
        reasons.push(IpfFailure::RankDeficient);
    }
    if cert.unstable {
        reasons.push(IpfFailure::Unstable);
    }
    if cert.dim != expected {
        reasons.push(IpfFailure::DimensionMismatch);
    }
    if !(angle < tol) || !cert.consistent {
        reasons.push(IpfFailure::NotCoincident);
    }
    Ok(IpfCheck {
        status: if reasons.is_empty() {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        reasons,
        big_n,
        n,
        dim: cert.dim,
        expected_dim: expected,
        rank_union: geom.rank.rank,
        union_size: geom.rank.size,
        coincidence_angle: angle,
        cos_1: cert.cosines.first().copied().unwrap_or(0.0),
        cos_2: cert.cosines.get(1).copied().unwrap_or(0.0),
        residual: cert.residual,
        tol,
    })
}

/// Norm sequence of `x ← P_A P_B x`.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionTrace {
    /// `‖x_m‖_w` for `m = 0..=iters` (`x_0` the start).
    pub norms: Vec<f64>,
    /// `‖x_{m+1}‖ / ‖x_m‖`.
    pub ratios: Vec<f64>,
    /// Last ratio; the asymptotic decay rate.
    pub decay_ratio: f64,
}

/// Coefficient vector over the union of `a` and `b` for the generator `e_j(lag)`.
pub fn generator_vector(a: &IndexSet, b: &IndexSet, q: usize, lag: i64, j: usize) -> Result<CVec> {
    let union = a.union(b);
    let p = union
        .position(lag)
        .ok_or_else(|| Error::InvalidArgument(format!("lag {lag} not in A ∪ B")))?;
    let mut v = CVec::zeros(union.len() * q);
    v[p * q + j] = C64::new(1.0, 0.0);
    Ok(v)
}

/// Alternating projections between the spans of `a` and `b` in the Gram geometry.
///
/// `start` holds coefficients over the generators of `a ∪ b` (lag-major).
/// Iterates are renormalized internally; reported norms are the true ones.
pub fn alternating_projections(
    a: &IndexSet,
    b: &IndexSet,
    autocov: &dyn AutocovSource,
    start: &CVec,
    iters: usize,
) -> Result<ProjectionTrace> {
    let geom = Geometry::new(autocov, a.union(b), RANK_TOL)?;
    if start.len() != geom.gram.nrows() {
        return Err(Error::InvalidArgument(format!(
            "start has {} coefficients, union has {}",
            start.len(),
            geom.gram.nrows()
        )));
    }
    let basis = |set: &IndexSet| {
        let cols = geom.columns(set);
        let mut t = CMat::zeros(geom.gram.nrows(), cols.len());
        for (i, &c) in cols.iter().enumerate() {
            t[(c, i)] = C64::new(1.0, 0.0);
        }
        geom.orthonormal(&t, RANK_TOL)
    };
    let qa = basis(a);
    let qb = basis(b);
    let mut x = &geom.coords * start;
    let mut norms = vec![x.norm()];
    let mut ratios = Vec::with_capacity(iters);
    for _ in 0..iters {
        let before = x.norm();
        let y = &qb * (qb.adjoint() * &x);
        x = &qa * (qa.adjoint() * y);
        let after = x.norm();
        let ratio = if before > 0.0 { after / before } else { 0.0 };
        ratios.push(ratio);
        norms.push(norms[norms.len() - 1] * ratio);
        if after == 0.0 {
            break;
        }
        x /= C64::new(after, 0.0);
    }
    let decay_ratio = ratios.last().copied().unwrap_or(0.0);
    Ok(ProjectionTrace {
        norms,
        ratios,
        decay_ratio,
    })
}

/// Finite-past linear predictor of `X(0)` from `X(-1..-N)`.
#[derive(Debug, Clone)]
pub struct FinitePredictor {
    /// `Φ_k` with `X̂(0) = Σ_{k=1}^N Φ_k X(-k)`.
    pub coeffs: Vec<CMat>,
    /// Prediction error covariance `V_N`.
    pub error_cov: CMat,
    /// `V_0..V_N`.
    pub history: Vec<CMat>,
}

pub fn finite_predictor(autocov: &dyn AutocovSource, big_n: usize) -> Result<FinitePredictor> {
    let gammas = FlatGammas::load(autocov, big_n)?;
    let singular = |e: Error| match e {
        Error::NotFactorizable(msg) => Error::Singular(msg),
        other => other,
    };
    let mut rec = Whittle::new(&gammas, big_n.max(1)).map_err(singular)?;
    let mut history = vec![rec.forward_error().clone()];
    for _ in 0..big_n {
        rec.step().map_err(singular)?;
        history.push(rec.forward_error().clone());
    }
    let coeffs = (1..=rec.order()).map(|k| -rec.forward_coeff(k)).collect();
    Ok(FinitePredictor {
        coeffs,
        error_cov: rec.forward_error().clone(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, inverse, max_abs_diff, min_eigenvalue};
    use crate::models::DensityModel;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn ma_c() -> DensityModel {
        let cm = CMat::from_row_slice(2, 2, &[c(0.5), c(0.2), c(0.0), c(0.3)]);
        DensityModel::ma(vec![identity(2), cm]).unwrap()
    }

    fn stacked() -> DensityModel {
        DensityModel::stacked_shift(DensityModel::white_noise(1)).unwrap()
    }

    #[test]
    fn index_set_sorted_unique() {
        let s = IndexSet::new(vec![3, -1, 3, 0]).unwrap();
        assert_eq!(s.lags(), &[-1, 0, 3]);
        assert!(matches!(IndexSet::new(vec![]), Err(Error::EmptyIndexSet)));
    }

    #[test]
    fn gram_examples() {
        let g = gram(&DensityModel::white_noise(2), (-2, 1)).unwrap();
        assert_eq!(g.matrix, identity(8));

        let model = ma_c();
        let g = gram(&model, (0, 1)).unwrap().matrix;
        let g1 = model.autocovariance(1);
        assert_eq!(g.view((2, 0), (2, 2)).into_owned(), g1);
        assert_eq!(g.view((0, 2), (2, 2)).into_owned(), g1.adjoint());

        let g = gram(&stacked(), (-1, 0)).unwrap().matrix;
        assert_eq!(numerical_rank(&g, RANK_TOL).rank, 3);

        let short = model.autocov_seq(2);
        assert!(matches!(gram(&short, (0, 5)), Err(Error::InsufficientLags { .. })));
    }

    #[test]
    fn gram_is_shift_invariant() {
        let model = DensityModel::scalar_weight(identity(2)).unwrap();
        let a = gram(&model, (-3, 2)).unwrap().matrix;
        for s in [-7, 1, 12] {
            assert_eq!(a, gram(&model, (-3 + s, 2 + s)).unwrap().matrix);
        }
    }

    #[test]
    fn angle_examples() {
        let past = IndexSet::range(-4, -1).unwrap();
        let fut = IndexSet::range(0, 4).unwrap();
        let r = principal_angles(&past, &fut, &DensityModel::white_noise(2), RANK_TOL).unwrap();
        assert!(r.cosines.iter().all(|c| c.abs() < 1e-14));

        for n in [1, 3, 8] {
            let r = principal_angles(
                &IndexSet::range(-n, -1).unwrap(),
                &IndexSet::range(0, n).unwrap(),
                &stacked(),
                RANK_TOL,
            )
            .unwrap();
            assert!((r.largest() - 1.0).abs() < 1e-8);
        }
        assert!(matches!(IndexSet::range(1, 0), Err(Error::EmptyIndexSet)));
    }

    #[test]
    fn ma_scalar_largest_cosine_below_one_and_nondecreasing() {
        let model = DensityModel::ma1_scalar(0.5);
        let mut prev = 0.0;
        for n in [1i64, 2, 4, 8, 16, 32, 64] {
            let r = principal_angles(
                &IndexSet::range(-n, -1).unwrap(),
                &IndexSet::range(0, n).unwrap(),
                &model,
                RANK_TOL,
            )
            .unwrap();
            assert!(r.largest() < 1.0 - 1e-6);
            assert!(r.largest() >= prev - 1e-12);
            prev = r.largest();
        }
        // dense oracle at small N: cosine² is the top eigenvalue of
        // G_A^{-1} G_AB G_B^{-1} G_BA
        let a = IndexSet::range(-3, -1).unwrap();
        let b = IndexSet::range(0, 3).unwrap();
        let u = a.union(&b);
        let g = gram_for(&model, &u).unwrap();
        let gaa = g.view((0, 0), (3, 3)).into_owned();
        let gbb = g.view((3, 3), (4, 4)).into_owned();
        let gab = g.view((0, 3), (3, 4)).into_owned();
        let la_inv = inverse(&crate::linalg::cholesky_lower(&gaa, "gaa").unwrap(), "la").unwrap();
        let m = &la_inv * &gab * inverse(&gbb, "gbb").unwrap() * gab.adjoint() * la_inv.adjoint();
        let top = herm_eigen(&m).values[0];
        let r = principal_angles(&a, &b, &model, RANK_TOL).unwrap();
        assert!((r.largest().powi(2) - top).abs() < 1e-12);
    }

    #[test]
    fn intersection_examples() {
        let model = ma_c();
        let cert = intersection(
            &IndexSet::range(-8, -1).unwrap(),
            &IndexSet::range(-2, 8).unwrap(),
            &model,
            RANK_TOL,
        )
        .unwrap();
        assert_eq!(cert.dim, 4);
        assert!(cert.consistent && !cert.unstable);

        let cert = intersection(
            &IndexSet::range(-6, -1).unwrap(),
            &IndexSet::range(0, 6).unwrap(),
            &stacked(),
            RANK_TOL,
        )
        .unwrap();
        assert_eq!(cert.dim, 1);
        assert!(cert.residual < 1e-8);
        // basis vector is a multiple of e_2(-1), which equals e_1(0) in L(w)
        let v = cert.basis.column(0);
        let idx_e2m1 = cert.generators.iter().position(|&g| g == (-1, 1)).unwrap();
        let off: f64 = v
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx_e2m1)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        assert!(off.sqrt() < 1e-8 * v[idx_e2m1].norm());

        let cert = intersection(
            &IndexSet::range(-3, -1).unwrap(),
            &IndexSet::range(0, 3).unwrap(),
            &DensityModel::white_noise(2),
            RANK_TOL,
        )
        .unwrap();
        assert_eq!(cert.dim, 0);
        assert_eq!(cert.certified(), 0);
    }

    #[test]
    fn ipf_check_examples() {
        for n in 1..=3 {
            for big_n in [4, 9, 16] {
                let r = ipf_finite_check(&ma_c(), n, big_n, 1e-8, RANK_TOL).unwrap();
                assert!(r.passed(), "{r:?}");
            }
        }
        let r = ipf_finite_check(&DensityModel::white_noise(2), 2, 8, 1e-8, RANK_TOL).unwrap();
        assert!(r.passed());
        let r = ipf_finite_check(&stacked(), 1, 8, 1e-8, RANK_TOL).unwrap();
        assert!(!r.passed());
        assert!(r.reasons.contains(&IpfFailure::RankDeficient));
        assert!(ipf_finite_check(&ma_c(), 3, 3, 1e-8, RANK_TOL).is_err());
    }

    #[test]
    fn alternating_projection_examples() {
        let past = IndexSet::range(-4, -1).unwrap();
        let fut = IndexSet::range(0, 4).unwrap();
        let start = generator_vector(&past, &fut, 2, 2, 1).unwrap();
        let t = alternating_projections(&past, &fut, &DensityModel::white_noise(2), &start, 3).unwrap();
        assert!(t.norms[1].abs() < 1e-14);

        let start = generator_vector(&past, &fut, 2, 0, 0).unwrap();
        let t = alternating_projections(&past, &fut, &stacked(), &start, 50).unwrap();
        assert!((t.norms.last().unwrap() - 1.0).abs() < 1e-10);

        let model = DensityModel::ma1_scalar(0.5);
        let a = IndexSet::range(-8, -1).unwrap();
        let b = IndexSet::range(0, 8).unwrap();
        let start = generator_vector(&a, &b, 1, 0, 0).unwrap();
        let t = alternating_projections(&a, &b, &model, &start, 40).unwrap();
        let cos = principal_angles(&a, &b, &model, RANK_TOL).unwrap().largest();
        assert!((t.decay_ratio - cos * cos).abs() < 1e-6);
    }

    #[test]
    fn predictor_examples() {
        let p = finite_predictor(&DensityModel::white_noise(2), 5).unwrap();
        assert!(p.coeffs.iter().all(|c| c.norm() < 1e-15));
        assert_eq!(p.error_cov, identity(2));

        let p = finite_predictor(&DensityModel::ma1_scalar(0.5), 64).unwrap();
        assert!((p.error_cov[(0, 0)].re - 1.0).abs() < 1e-3);
        let p = finite_predictor(&ma_c(), 64).unwrap();
        assert!((p.error_cov.determinant().re - 1.0).abs() < 1e-3);
        for w in p.history.windows(2) {
            assert!(min_eigenvalue(&(&w[0] - &w[1])) >= -1e-10);
        }
        assert!(matches!(finite_predictor(&stacked(), 4), Err(Error::Singular(_))));
    }

    #[test]
    fn predictor_matches_dense_normal_equations() {
        let model = ma_c();
        let n = 5usize;
        let p = finite_predictor(&model, n).unwrap();
        let past = IndexSet::range(-(n as i64), -1).unwrap();
        let zero = IndexSet::range(0, 0).unwrap();
        let u = past.union(&zero);
        let g = gram_for(&model, &u).unwrap();
        let gpp = g.view((0, 0), (2 * n, 2 * n)).into_owned();
        let g0p = g.view((2 * n, 0), (2, 2 * n)).into_owned();
        // coefficients over lags -n..-1 in ascending order
        let phi = &g0p * inverse(&gpp, "past").unwrap();
        for k in 1..=n {
            let blk = phi.view((0, 2 * (n - k)), (2, 2)).into_owned();
            assert!(max_abs_diff(&blk, &p.coeffs[k - 1]) < 1e-10);
        }
    }
}
