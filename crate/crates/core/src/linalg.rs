//! Small dense complex linear-algebra helpers shared by the modules.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn identity(q: usize) -> CMat {
    CMat::identity(q, q)
}

/// `e^{i·angle}`.
pub fn cis(angle: f64) -> C64 {
    C64::from_polar(1.0, angle)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn transpose(m: &CMat) -> CMat {
    m.transpose()
}

/// Largest entrywise deviation from Hermitian symmetry, relative to the largest entry.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let d = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    d / scale
}

/// `(m + m*)/2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted descending.
pub struct HermEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn herm_eigen(m: &CMat) -> HermEigen {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(m.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermEigen { values, vectors }
}

/// Singular triplets of `m` from the Hermitian dilation `[[0, m], [m*, 0]]`,
/// whose eigenvalues are `±σ_i`. Returns the `min(rows, cols)` largest
/// singular values (descending) with unit left/right vectors as columns.
pub fn svd_dilation(m: &CMat) -> (Vec<f64>, CMat, CMat) {
    let (r, c) = m.shape();
    let k = r.min(c);
    let mut d = CMat::zeros(r + c, r + c);
    d.view_mut((0, r), (r, c)).copy_from(m);
    d.view_mut((r, 0), (c, r)).copy_from(&m.adjoint());
    let eig = herm_eigen(&d);
    let mut sigmas = Vec::with_capacity(k);
    let mut u = CMat::zeros(r, k);
    let mut v = CMat::zeros(c, k);
    for i in 0..k {
        sigmas.push(eig.values[i].max(0.0));
        let col = eig.vectors.column(i);
        let top = col.rows(0, r).into_owned();
        let bottom = col.rows(r, c).into_owned();
        let (nt, nb) = (top.norm(), bottom.norm());
        if nt > 0.0 {
            u.set_column(i, &(top / C64::new(nt, 0.0)));
        }
        if nb > 0.0 {
            v.set_column(i, &(bottom / C64::new(nb, 0.0)));
        }
    }
    (sigmas, u, v)
}

/// Singular values of `m`, descending, as square roots of the eigenvalues of `m* m`.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.ncols() == 0 {
        return Vec::new();
    }
    herm_eigen(&(m.adjoint() * m))
        .values
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect()
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    herm_eigen(m).values.last().copied().unwrap_or(0.0)
}

pub fn inverse(m: &CMat, what: &str) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Lower Cholesky factor (positive real diagonal) of a Hermitian PD matrix.
pub fn cholesky_lower(m: &CMat, what: &str) -> Result<CMat> {
    Cholesky::new(hermitian_part(m))
        .map(|c| c.unpack())
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

pub fn det(m: &CMat) -> C64 {
    m.determinant()
}

/// `m` with every entry conjugated.
pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
