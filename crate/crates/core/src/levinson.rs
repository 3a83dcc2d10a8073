//! Multichannel Levinson–Whittle recursion on flat `q×q` block storage.
//!
//! Forward innovations of order `n` are
//! `ε_n(t) = X(t) + Σ_{k=1}^n A_k X(t-k)` with covariance `V_n`, backward ones
//! `ε'_n(t) = X(t-n) + Σ_{k=1}^n B_k X(t-n+k)` with covariance `U_n`.
//! Blocks are stored row-major, `q²` entries each.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, herm_eigen, inverse, CMat, C64, ZERO};
use crate::models::AutocovSource;

/// Relative eigenvalue floor below which a prediction-error covariance counts as singular.
pub const PD_FLOOR: f64 = 1e-12;

fn to_flat(m: &CMat) -> Vec<C64> {
    let q = m.nrows();
    let mut out = Vec::with_capacity(q * q);
    for r in 0..q {
        for c in 0..q {
            out.push(m[(r, c)]);
        }
    }
    out
}

fn from_flat(q: usize, flat: &[C64]) -> CMat {
    CMat::from_row_slice(q, q, flat)
}

/// `out += a · b`.
#[inline]
fn mul_acc(out: &mut [C64], a: &[C64], b: &[C64], q: usize) {
    for r in 0..q {
        for k in 0..q {
            let ark = a[r * q + k];
            if ark == ZERO {
                continue;
            }
            for c in 0..q {
                out[r * q + c] += ark * b[k * q + c];
            }
        }
    }
}

/// `out += a · b*`.
#[inline]
fn mul_adj_acc(out: &mut [C64], a: &[C64], b: &[C64], q: usize) {
    for r in 0..q {
        for c in 0..q {
            let mut s = ZERO;
            for k in 0..q {
                s += a[r * q + k] * b[c * q + k].conj();
            }
            out[r * q + c] += s;
        }
    }
}

/// Autocovariances `Γ(0)..Γ(max_lag)` in flat storage.
pub(crate) struct FlatGammas {
    q: usize,
    data: Vec<C64>,
}

impl FlatGammas {
    pub fn load(source: &dyn AutocovSource, max_lag: usize) -> Result<Self> {
        let q = source.dim();
        let mut data = Vec::with_capacity((max_lag + 1) * q * q);
        for k in 0..=max_lag {
            data.extend(to_flat(&source.gamma(k as i64)?));
        }
        Ok(FlatGammas { q, data })
    }

    #[inline]
    fn block(&self, k: usize) -> &[C64] {
        let s = self.q * self.q;
        &self.data[k * s..(k + 1) * s]
    }
}

/// Running state of the recursion.
pub(crate) struct Whittle<'a> {
    q: usize,
    gammas: &'a FlatGammas,
    order: usize,
    a: Vec<C64>,
    b: Vec<C64>,
    v: CMat,
    u: CMat,
    scale: f64,
}

impl<'a> Whittle<'a> {
    pub fn new(gammas: &'a FlatGammas, capacity: usize) -> Result<Self> {
        let q = gammas.q;
        let g0 = from_flat(q, gammas.block(0));
        let scale = herm_eigen(&g0).values.first().copied().unwrap_or(0.0);
        let w = Whittle {
            q,
            gammas,
            order: 0,
            a: vec![ZERO; capacity * q * q],
            b: vec![ZERO; capacity * q * q],
            v: g0.clone(),
            u: g0,
            scale,
        };
        w.check_pd()?;
        Ok(w)
    }

    fn check_pd(&self) -> Result<()> {
        let min_v = herm_eigen(&self.v).values.last().copied().unwrap_or(0.0);
        let min_u = herm_eigen(&self.u).values.last().copied().unwrap_or(0.0);
        if self.scale <= 0.0 || min_v.min(min_u) <= PD_FLOOR * self.scale {
            return Err(Error::NotFactorizable(format!(
                "block Toeplitz Gram is singular at order {} (min eigenvalue {:.3e}); \
                 the density does not have maximal rank",
                self.order,
                min_v.min(min_u)
            )));
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Forward prediction-error covariance `V_n`.
    pub fn forward_error(&self) -> &CMat {
        &self.v
    }

    /// Forward coefficient `A_k` of the current order.
    pub fn forward_coeff(&self, k: usize) -> CMat {
        let s = self.q * self.q;
        from_flat(self.q, &self.a[(k - 1) * s..k * s])
    }

    /// Advances from order `n` to `n + 1`.
    pub fn step(&mut self) -> Result<()> {
        let q = self.q;
        let s = q * q;
        let n = self.order;
        if (n + 1) * s > self.a.len() {
            return Err(Error::InvalidArgument("recursion capacity exceeded".into()));
        }
        // Δ = Γ(n+1) + Σ_{k=1}^n A_k Γ(n+1-k)
        let mut delta = self.gammas.block(n + 1).to_vec();
        for k in 1..=n {
            mul_acc(&mut delta, &self.a[(k - 1) * s..k * s], self.gammas.block(n + 1 - k), q);
        }
        let delta = from_flat(q, &delta);
        let u_inv = inverse(&self.u, "backward error covariance")?;
        let v_inv = inverse(&self.v, "forward error covariance")?;
        let ka = -(&delta * &u_inv);
        let kb = -(delta.adjoint() * &v_inv);
        let ka_flat = to_flat(&ka);
        let kb_flat = to_flat(&kb);

        // A'_k = A_k + Ka B_{n+1-k}, B'_k = B_k + Kb A_{n+1-k}, updated pairwise in place.
        let mut lo = 1;
        let mut hi = n;
        while lo <= hi {
            let a_lo: Vec<C64> = self.a[(lo - 1) * s..lo * s].to_vec();
            let b_lo: Vec<C64> = self.b[(lo - 1) * s..lo * s].to_vec();
            let a_hi: Vec<C64> = self.a[(hi - 1) * s..hi * s].to_vec();
            let b_hi: Vec<C64> = self.b[(hi - 1) * s..hi * s].to_vec();
            // pair (lo, hi) with hi = n + 1 - lo
            mul_acc(&mut self.a[(lo - 1) * s..lo * s], &ka_flat, &b_hi, q);
            mul_acc(&mut self.b[(lo - 1) * s..lo * s], &kb_flat, &a_hi, q);
            if lo != hi {
                mul_acc(&mut self.a[(hi - 1) * s..hi * s], &ka_flat, &b_lo, q);
                mul_acc(&mut self.b[(hi - 1) * s..hi * s], &kb_flat, &a_lo, q);
            }
            lo += 1;
            if hi == 0 {
                break;
            }
            hi -= 1;
        }
        self.a[n * s..(n + 1) * s].copy_from_slice(&ka_flat);
        self.b[n * s..(n + 1) * s].copy_from_slice(&kb_flat);
        self.v = crate::linalg::hermitian_part(&(&self.v + &ka * delta.adjoint()));
        self.u = crate::linalg::hermitian_part(&(&self.u + &kb * &delta));
        self.order = n + 1;
        self.check_pd()
    }

    /// `E[X(t + lead) ε_n(t)*] = Γ(lead) + Σ_{k=1}^n Γ(lead + k) A_k*`.
    pub fn cross_with_future(&self, lead: usize) -> CMat {
        let q = self.q;
        let s = q * q;
        let mut acc = self.gammas.block(lead).to_vec();
        for k in 1..=self.order {
            mul_adj_acc(&mut acc, self.gammas.block(lead + k), &self.a[(k - 1) * s..k * s], q);
        }
        from_flat(q, &acc)
    }
}

/// Last block row of the lower Cholesky factor of the block Toeplitz Gram of
/// `X(0..=order)`, read in reverse: entry `n` is `L_{order, order-n}`.
///
/// `L_{N,j} = E[X(N) ε_j(j)*] · chol(V_j)^{-*}`, with `ε_j` the order-`j` forward
/// innovation; as `N` grows these converge to the outer-factor coefficients.
pub(crate) fn bauer_last_row(source: &dyn AutocovSource, order: usize) -> Result<Vec<CMat>> {
    let gammas = FlatGammas::load(source, order)?;
    let mut rec = Whittle::new(&gammas, order.max(1))?;
    let mut row = vec![CMat::zeros(source.dim(), source.dim()); order + 1];
    for j in 0..=order {
        if j > 0 {
            rec.step()?;
        }
        let chol = cholesky_lower(rec.forward_error(), "forward error covariance")?;
        let chol_adj_inv = inverse(&chol.adjoint(), "Cholesky factor")?;
        row[order - j] = rec.cross_with_future(order - j) * chol_adj_inv;
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff};
    use crate::models::DensityModel;

    fn dense_gram(model: &DensityModel, n: usize) -> CMat {
        let q = model.dim();
        let mut g = CMat::zeros(q * (n + 1), q * (n + 1));
        for k in 0..=n {
            for l in 0..=n {
                let blk = model.autocovariance(k as i64 - l as i64);
                g.view_mut((k * q, l * q), (q, q)).copy_from(&blk);
            }
        }
        g
    }

    #[test]
    fn last_row_matches_dense_cholesky() {
        let c = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(0.5, 0.1),
                C64::new(0.2, 0.0),
                C64::new(-0.1, 0.3),
                C64::new(0.3, 0.0),
            ],
        );
        let c2 = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(0.1, 0.0),
                C64::new(0.0, 0.2),
                C64::new(0.05, 0.0),
                C64::new(-0.2, 0.0),
            ],
        );
        let model = DensityModel::ma(vec![identity(2), c, c2]).unwrap();
        let n = 7;
        let row = bauer_last_row(&model, n).unwrap();
        let l = cholesky_lower(&dense_gram(&model, n), "gram").unwrap();
        for j in 0..=n {
            let dense_blk = l.view((n * 2, j * 2), (2, 2)).into_owned();
            assert!(max_abs_diff(&row[n - j], &dense_blk) < 1e-12, "j={j}");
        }
    }

    #[test]
    fn forward_error_matches_dense_schur_complement() {
        let model = DensityModel::scalar_weight(identity(2)).unwrap();
        let gammas = FlatGammas::load(&model, 6).unwrap();
        let mut rec = Whittle::new(&gammas, 6).unwrap();
        for n in 1..=5 {
            rec.step().unwrap();
            // V_n = Γ(0) - c* G^{-1} c over the past X(-1..-n)
            let g = dense_gram(&model, n);
            let past = g.view((0, 0), (2 * n, 2 * n)).into_owned();
            let cross = g.view((2 * n, 0), (2, 2 * n)).into_owned();
            let v = model.autocovariance(0) - &cross * inverse(&past, "past").unwrap() * cross.adjoint();
            assert!(max_abs_diff(&v, rec.forward_error()) < 1e-12);
        }
    }

    #[test]
    fn degenerate_density_rejected() {
        let model = DensityModel::stacked_shift(DensityModel::white_noise(1)).unwrap();
        assert!(matches!(bauer_last_row(&model, 8), Err(Error::NotFactorizable(_))));
    }
}
