//! Quasi-differencing and the Prais-Winsten / Cochrane-Orcutt feasible GLS
//! estimators for the stacked system with VAR(p) errors.
//!
//! Rows `t > p` are quasi-differenced, `Y_t − Σ_j Φ_j Y_{t−j}` and the same
//! for `Z_t`, which leaves the intercept block as `I − Σ_j Φ_j`. Rows `t ≤ p`
//! (Prais-Winsten only) are premultiplied by `Ω^{1/2} Γ_e^{−1/2}`.
//!
//! The normal equations for the differenced rows are assembled from lagged
//! cross moments of the raw data rather than from materialized `Z_t^{QD}`
//! blocks: writing `Z_t^{QD} = Σ_j B_j Z_{t−j}` with `B_0 = I`,
//! `B_j = −Φ_j`, every term of `Σ_t Z_t^{QD′} Ω⁻¹ Z_t^{QD}` is
//! `G_{jl} = B_jᵀ Ω⁻¹ B_l` contracted with `Σ_t x_{i,t−j} x_{m,t−l}ᵀ`.
//! With common factors the moments do not depend on the equation pair.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, psd_sqrt, Matrix, SpdFactor};
use crate::model::StackedModel;
use crate::var_errors::{gamma_e_infinity, VarFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlsKind {
    PraisWinsten,
    CochraneOrcutt,
}

/// Feasible GLS estimate together with the pieces its Wald test needs.
#[derive(Debug, Clone)]
pub struct GlsFit {
    pub kind: GlsKind,
    pub kappa_hat: Vec<f64>,
    /// `Σ_t Ẑ_t^{QD′} Ω̂⁻¹ Ẑ_t^{QD} / n` over the rows the estimator uses.
    pub m_hat: Matrix,
    /// `T` for Prais-Winsten, `T − p` for Cochrane-Orcutt.
    pub effective_t: usize,
    pub var_fit: VarFit,
    /// Untransformed residuals `Y_t − Z_t κ̂`, `T × N`.
    pub residuals: Matrix,
    n: usize,
}

impl GlsFit {
    pub fn alpha_hat(&self) -> &[f64] {
        &self.kappa_hat[..self.n]
    }
}

/// The quasi-differenced model.
#[derive(Debug, Clone)]
pub struct QdModel<'a> {
    model: &'a StackedModel,
    phi: Vec<Matrix>,
    /// Transformed responses, `T × N`; rows `< p` use `C^{QD1}`.
    pub y_qd: Matrix,
    pub split: usize,
    /// `Ω^{1/2} Γ_e^{∞ −1/2}`
    pub c_qd1: Matrix,
    /// `I − Σ_j Φ_j`
    pub c_qd2: Matrix,
    pub gamma_e_inf: Matrix,
}

impl QdModel<'_> {
    /// Materializes `Z_t^{QD}` for row `t` (0-based).
    pub fn z_block(&self, t: usize) -> Matrix {
        let z = self.model.z_block(t);
        if t < self.split {
            return self.c_qd1.matmul(&z);
        }
        let mut out = z;
        for (j, phi) in self.phi.iter().enumerate() {
            out = out.sub(&phi.matmul(&self.model.z_block(t - j - 1)));
        }
        out
    }

    /// Transformed residuals `Y_t^{QD} − Z_t^{QD} κ`.
    pub fn residuals(&self, kappa: &[f64]) -> Matrix {
        let t_len = self.model.t();
        let n = self.model.n();
        let mut out = Matrix::zeros(t_len, n);
        for t in 0..t_len {
            let fit = self.z_block(t).matvec(kappa);
            for i in 0..n {
                out[(t, i)] = self.y_qd[(t, i)] - fit[i];
            }
        }
        out
    }
}

/// Builds the quasi-differenced model. `p = 0` leaves the data unchanged.
///
/// Fails with [`Error::NonStationaryVar`] when `p ≥ 1` and the fitted VAR
/// has no stationary variance, since the first-`p`-row rescaling needs it.
pub fn quasi_difference<'a>(model: &'a StackedModel, fit: &VarFit) -> Result<QdModel<'a>> {
    let n = model.n();
    check_var_shape(model, fit)?;
    let gamma = gamma_e_infinity(fit)?;
    let c_qd1 = if fit.p == 0 {
        Matrix::identity(n)
    } else {
        psd_sqrt(&fit.omega, false)?.matmul(&psd_sqrt(&gamma, true)?)
    };
    let c_qd2 = fit.intercept_transform();
    let y = model.panel().y();
    let mut y_qd = Matrix::zeros(model.t(), n);
    for t in 0..model.t() {
        let row = if t < fit.p {
            c_qd1.matvec(y.row(t))
        } else {
            let mut r = y.row(t).to_vec();
            for (j, phi) in fit.phi.iter().enumerate() {
                let lag = phi.matvec(y.row(t - j - 1));
                for (a, b) in r.iter_mut().zip(lag) {
                    *a -= b;
                }
            }
            r
        };
        y_qd.row_mut(t).copy_from_slice(&row);
    }
    Ok(QdModel {
        model,
        phi: fit.phi.clone(),
        y_qd,
        split: fit.p,
        c_qd1,
        c_qd2,
        gamma_e_inf: gamma,
    })
}

fn check_var_shape(model: &StackedModel, fit: &VarFit) -> Result<()> {
    let n = model.n();
    if fit.omega.rows() != n || fit.phi.len() != fit.p || fit.phi.iter().any(|m| m.rows() != n) {
        return Err(Error::DimensionMismatch(format!(
            "VAR fit is for {} equations, model has {n}",
            fit.omega.rows()
        )));
    }
    if fit.p >= model.t() {
        return Err(Error::InsufficientSample {
            needed: fit.p,
            got: model.t(),
        });
    }
    Ok(())
}

/// Prais-Winsten FGLS over all `T` rows with weight `I_T ⊗ Ω̂⁻¹`.
pub fn pw_fgls(model: &StackedModel, fit: &VarFit) -> Result<GlsFit> {
    check_var_shape(model, fit)?;
    let omega = cholesky(&fit.omega).map_err(|_| Error::SingularCovariance)?;
    let (mut gram, mut rhs) = differenced_normal_equations(model, fit, &omega);
    if fit.p > 0 {
        let qd = quasi_difference(model, fit)?;
        for t in 0..fit.p {
            let w = omega.whiten(&qd.z_block(t));
            let mut yw = qd.y_qd.row(t).to_vec();
            omega.forward_in_place(&mut yw);
            gram.add_assign(&w.t_matmul(&w));
            for (r, v) in rhs.iter_mut().zip(w.t_matvec(&yw)) {
                *r += v;
            }
        }
        gram.symmetrize();
    }
    finish(model, fit, GlsKind::PraisWinsten, gram, rhs, model.t())
}

/// Cochrane-Orcutt FGLS over rows `t = p+1..T` with weight `I_{T−p} ⊗ Ω̂⁻¹`.
pub fn co_fgls(model: &StackedModel, fit: &VarFit) -> Result<GlsFit> {
    check_var_shape(model, fit)?;
    let omega = cholesky(&fit.omega).map_err(|_| Error::SingularCovariance)?;
    let (gram, rhs) = differenced_normal_equations(model, fit, &omega);
    finish(model, fit, GlsKind::CochraneOrcutt, gram, rhs, model.t() - fit.p)
}

fn finish(
    model: &StackedModel,
    fit: &VarFit,
    kind: GlsKind,
    gram: Matrix,
    rhs: Vec<f64>,
    effective_t: usize,
) -> Result<GlsFit> {
    let factor = cholesky(&gram).map_err(|_| Error::SingularDesign)?;
    let kappa_hat = factor.solve_vec(&rhs);
    let residuals = model.residuals(&kappa_hat);
    Ok(GlsFit {
        kind,
        kappa_hat,
        m_hat: gram.scale(1.0 / effective_t as f64),
        effective_t,
        var_fit: fit.clone(),
        residuals,
        n: model.n(),
    })
}

/// Lagged sums over the differenced rows `t = p..T` (0-based).
struct Moments {
    p: usize,
    n: usize,
    k: usize,
    common: bool,
    /// `Σ_t Y_{t−l}`, indexed `[l][m]`.
    sy: Vec<f64>,
    /// `Σ_t x_{m,t−l}`, indexed `[l][m][c]` (`m` collapsed when common).
    sx: Vec<f64>,
    /// `Σ_t x_{i,t−j} x_{m,t−l}ᵀ`, indexed `[j][l][i][m][c][d]`.
    sxx: Vec<f64>,
    /// `Σ_t x_{i,t−j} Y_{m,t−l}`, indexed `[j][l][i][m][c]`.
    sxy: Vec<f64>,
}

impl Moments {
    fn eqs(&self) -> usize {
        if self.common {
            1
        } else {
            self.n
        }
    }

    fn compute(model: &StackedModel, p: usize) -> Self {
        let panel = model.panel();
        let (t_len, n, k) = (model.t(), model.n(), model.k());
        let common = panel.common_factors();
        let ne = if common { 1 } else { n };
        let lags = p + 1;
        let mut m = Moments {
            p,
            n,
            k,
            common,
            sy: vec![0.0; lags * n],
            sx: vec![0.0; lags * ne * k],
            sxx: vec![0.0; lags * lags * ne * ne * k * k],
            sxy: vec![0.0; lags * lags * ne * n * k],
        };
        let y = panel.y();
        for t in p..t_len {
            for l in 0..lags {
                let yl = y.row(t - l);
                for (dst, v) in m.sy[l * n..(l + 1) * n].iter_mut().zip(yl) {
                    *dst += v;
                }
                for e in 0..ne {
                    let x = panel.x(t - l, e);
                    let base = (l * ne + e) * k;
                    for (dst, v) in m.sx[base..base + k].iter_mut().zip(x) {
                        *dst += v;
                    }
                }
            }
            for j in 0..lags {
                for i in 0..ne {
                    let xi = panel.x(t - j, i);
                    for l in 0..lags {
                        let yl = y.row(t - l);
                        for mm in 0..ne {
                            let xm = panel.x(t - l, mm);
                            let base = m.sxx_index(j, l, i, mm);
                            let block = &mut m.sxx[base..base + k * k];
                            for c in 0..k {
                                let xc = xi[c];
                                for d in 0..k {
                                    block[c * k + d] += xc * xm[d];
                                }
                            }
                        }
                        for mm in 0..n {
                            let base = m.sxy_index(j, l, i, mm);
                            let ym = yl[mm];
                            for c in 0..k {
                                m.sxy[base + c] += xi[c] * ym;
                            }
                        }
                    }
                }
            }
        }
        m
    }

    #[inline]
    fn sxx_index(&self, j: usize, l: usize, i: usize, m: usize) -> usize {
        let ne = self.eqs();
        (((j * (self.p + 1) + l) * ne + i) * ne + m) * self.k * self.k
    }

    #[inline]
    fn sxy_index(&self, j: usize, l: usize, i: usize, m: usize) -> usize {
        let ne = self.eqs();
        (((j * (self.p + 1) + l) * ne + i) * self.n + m) * self.k
    }

    #[inline]
    fn eq(&self, i: usize) -> usize {
        if self.common {
            0
        } else {
            i
        }
    }

    fn sxx(&self, j: usize, l: usize, i: usize, m: usize) -> &[f64] {
        let base = self.sxx_index(j, l, self.eq(i), self.eq(m));
        &self.sxx[base..base + self.k * self.k]
    }

    fn sxy(&self, j: usize, l: usize, i: usize, m: usize) -> &[f64] {
        let base = self.sxy_index(j, l, self.eq(i), m);
        &self.sxy[base..base + self.k]
    }

    fn sx(&self, l: usize, m: usize) -> &[f64] {
        let base = (l * self.eqs() + self.eq(m)) * self.k;
        &self.sx[base..base + self.k]
    }
}

/// `Σ_{t>p} Z_t^{QD′} Ω⁻¹ Z_t^{QD}` and `Σ_{t>p} Z_t^{QD′} Ω⁻¹ Y_t^{QD}`.
fn differenced_normal_equations(
    model: &StackedModel,
    fit: &VarFit,
    omega: &SpdFactor,
) -> (Matrix, Vec<f64>) {
    let (n, k, p) = (model.n(), model.k(), fit.p);
    let dim = model.n_params();
    let count = (model.t() - p) as f64;
    let a = omega.inverse();
    let b: Vec<Matrix> = std::iter::once(Matrix::identity(n))
        .chain(fit.phi.iter().map(|phi| phi.scale(-1.0)))
        .collect();
    let lags = p + 1;
    let mut g = Vec::with_capacity(lags * lags);
    for bj in &b {
        let bja = bj.t_matmul(&a);
        for bl in &b {
            g.push(bja.matmul(bl));
        }
    }
    let mom = Moments::compute(model, p);

    let mut gram = Matrix::zeros(dim, dim);
    let mut rhs = vec![0.0; dim];
    for j in 0..lags {
        for l in 0..lags {
            let gjl = &g[j * lags + l];
            for r in 0..n {
                for c in 0..n {
                    gram[(r, c)] += count * gjl[(r, c)];
                }
            }
            for r in 0..n {
                for m in 0..n {
                    let coef = gjl[(r, m)];
                    let sx = mom.sx(l, m);
                    let base = model.beta_index(m, 0);
                    for c in 0..k {
                        gram[(r, base + c)] += coef * sx[c];
                    }
                }
            }
            for i in 0..n {
                let bi = model.beta_index(i, 0);
                for m in 0..n {
                    let coef = gjl[(i, m)];
                    let bm = model.beta_index(m, 0);
                    let sxx = mom.sxx(j, l, i, m);
                    for c in 0..k {
                        let row = gram.row_mut(bi + c);
                        for d in 0..k {
                            row[bm + d] += coef * sxx[c * k + d];
                        }
                    }
                    let sxy = mom.sxy(j, l, i, m);
                    for c in 0..k {
                        rhs[bi + c] += coef * sxy[c];
                    }
                }
            }
            for r in 0..n {
                let row = gjl.row(r);
                rhs[r] += crate::linalg::dot(row, &mom.sy[l * n..(l + 1) * n]);
            }
        }
    }
    for r in 0..n {
        for c in n..dim {
            gram[(c, r)] = gram[(r, c)];
        }
    }
    gram.symmetrize();
    (gram, rhs)
}
