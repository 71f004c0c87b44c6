//! Test statistics for `H₀: Rκ = r`, chiefly the zero-intercept hypothesis
//! `α = 0`: FGLS Wald tests, the HAR Wald test built on OLS with a
//! Newey-West long-run variance, and the GRS F-test with its small-sample
//! corrected variant.

use std::fmt;

use crate::dist::RefDist;
use crate::error::{Error, Result};
use crate::fgls::GlsFit;
use crate::linalg::{cholesky, dot, rank, Matrix};
use crate::model::{OlsFit, PanelData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestName {
    WaldPw,
    WaldCo,
    WaldHar,
    Grs,
    GrsKs,
}

impl TestName {
    pub const ALL: [TestName; 5] = [
        TestName::WaldPw,
        TestName::WaldCo,
        TestName::WaldHar,
        TestName::Grs,
        TestName::GrsKs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestName::WaldPw => "WaldPW",
            TestName::WaldCo => "WaldCO",
            TestName::WaldHar => "WaldHAR",
            TestName::Grs => "GRS",
            TestName::GrsKs => "GRS_KS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for TestName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub name: TestName,
    pub statistic: f64,
    pub dist: RefDist,
    pub p_value: f64,
}

impl TestResult {
    fn new(name: TestName, statistic: f64, dist: RefDist) -> Result<Self> {
        let p_value = dist.sf(statistic)?;
        Ok(Self {
            name,
            statistic,
            dist,
            p_value,
        })
    }
}

/// Linear restriction `Rκ = r` with `R` of full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    r_mat: Matrix,
    r_vec: Vec<f64>,
}

impl Restriction {
    pub fn new(r_mat: Matrix, r_vec: Vec<f64>) -> Result<Self> {
        if r_vec.len() != r_mat.rows() || r_mat.rows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "R has {} rows but r has {} entries",
                r_mat.rows(),
                r_vec.len()
            )));
        }
        if r_mat.rows() > r_mat.cols() {
            return Err(Error::RankDeficient {
                rank: r_mat.cols(),
                rows: r_mat.rows(),
            });
        }
        let rk = rank(&r_mat, 1e-10);
        if rk < r_mat.rows() {
            return Err(Error::RankDeficient {
                rank: rk,
                rows: r_mat.rows(),
            });
        }
        Ok(Self { r_mat, r_vec })
    }

    /// `R^α = [I_N, 0]`, `r = 0`.
    pub fn alpha(n: usize, n_params: usize) -> Self {
        let mut r_mat = Matrix::zeros(n, n_params);
        for i in 0..n {
            r_mat[(i, i)] = 1.0;
        }
        Self {
            r_mat,
            r_vec: vec![0.0; n],
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.r_mat
    }

    pub fn rhs(&self) -> &[f64] {
        &self.r_vec
    }

    pub fn rows(&self) -> usize {
        self.r_mat.rows()
    }
}

/// `n·(Rκ−r)ᵀ[R M⁻¹ Rᵀ]⁻¹(Rκ−r)`.
pub fn wald_statistic(kappa: &[f64], m_hat: &Matrix, n: usize, restr: &Restriction) -> Result<f64> {
    let r = restr.matrix();
    if r.cols() != kappa.len() || m_hat.rows() != kappa.len() {
        return Err(Error::DimensionMismatch(format!(
            "restriction has {} columns, κ has {} entries",
            r.cols(),
            kappa.len()
        )));
    }
    let m = cholesky(m_hat).map_err(|_| Error::SingularDesign)?;
    let middle = r.matmul(&m.solve_mat(&r.transpose()));
    let mut diff = r.matvec(kappa);
    for (d, v) in diff.iter_mut().zip(restr.rhs()) {
        *d -= v;
    }
    quadratic_form(&middle, &diff).map(|q| n as f64 * q)
}

/// `dᵀ A⁻¹ d` through a Cholesky factor of `A`.
fn quadratic_form(a: &Matrix, d: &[f64]) -> Result<f64> {
    let mut sym = a.clone();
    sym.symmetrize();
    let f = cholesky(&sym).map_err(|_| Error::SingularRestriction)?;
    let mut z = d.to_vec();
    f.forward_in_place(&mut z);
    Ok(dot(&z, &z).max(0.0))
}

fn gls_name(fit: &GlsFit) -> TestName {
    match fit.kind {
        crate::fgls::GlsKind::PraisWinsten => TestName::WaldPw,
        crate::fgls::GlsKind::CochraneOrcutt => TestName::WaldCo,
    }
}

/// Wald test of `Rκ = r` on a PW or CO fit, referred to `χ²(rows(R))`.
pub fn wald_fgls(fit: &GlsFit, restr: &Restriction) -> Result<TestResult> {
    let w = wald_statistic(&fit.kappa_hat, &fit.m_hat, fit.effective_t, restr)?;
    TestResult::new(gls_name(fit), w, RefDist::chi2(restr.rows())?)
}

/// Wald test of `α = 0` on a PW or CO fit.
pub fn wald_alpha(fit: &GlsFit) -> Result<TestResult> {
    let n = fit.alpha_hat().len();
    wald_fgls(fit, &Restriction::alpha(n, fit.kappa_hat.len()))
}

/// Newey-West lag `⌊4(T/100)^{2/9}⌋`.
pub fn bartlett_lag(t: usize) -> usize {
    (4.0 * (t as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Bartlett weight `1 − j/(l+1)`.
pub fn bartlett_weight(j: usize, l: usize) -> f64 {
    1.0 - j as f64 / (l + 1) as f64
}

/// Long-run variance `Γ̂₀ + Σ_{j=1}^{l} w(j,l)(Γ̂_j + Γ̂_jᵀ)` of the rows of
/// `w`, with `Γ̂_j = T⁻¹ Σ_{t>j} w_t w_{t−j}ᵀ` (no demeaning).
pub fn newey_west_lrv(w: &Matrix, l: usize) -> Matrix {
    let (t_len, d) = (w.rows(), w.cols());
    let l = l.min(t_len.saturating_sub(1));
    let mut out = Matrix::zeros(d, d);
    for j in 0..=l {
        let weight = if j == 0 { 1.0 } else { bartlett_weight(j, l) };
        let mut gamma = Matrix::zeros(d, d);
        for t in j..t_len {
            let cur = w.row(t);
            let lag = w.row(t - j);
            for (a, &ca) in cur.iter().enumerate() {
                if ca == 0.0 {
                    continue;
                }
                let row = gamma.row_mut(a);
                for (g, &lb) in row.iter_mut().zip(lag) {
                    *g += ca * lb;
                }
            }
        }
        if j == 0 {
            out.add_assign(&gamma);
        } else {
            out.add_assign(&gamma.scale(weight));
            out.add_assign(&gamma.transpose().scale(weight));
        }
    }
    let mut out = out.scale(1.0 / t_len as f64);
    out.symmetrize();
    out
}

/// Sandwich `M̂⁻¹ Γ̂_w^∞ M̂⁻¹` of the OLS fit with Newey-West lag `l`.
pub fn hac_covariance(ols: &OlsFit, l: usize) -> Result<Matrix> {
    let m = cholesky(&ols.m_hat).map_err(|_| Error::SingularDesign)?;
    let m_inv = m.inverse();
    let gamma = newey_west_lrv(&ols.w_hats, l);
    let mut s = m_inv.matmul(&gamma).matmul(&m_inv);
    s.symmetrize();
    Ok(s)
}

/// HAR Wald test of `α = 0` with the default Bartlett lag.
pub fn har_wald(ols: &OlsFit) -> Result<TestResult> {
    har_wald_with_lag(ols, bartlett_lag(ols.t()))
}

/// HAR Wald test `T·α̂ᵀ[R^α Ŝ R^{αᵀ}]⁻¹α̂`, `Ŝ = M̂⁻¹Γ̂_w^∞M̂⁻¹`.
///
/// Only the `α` rows of `M̂⁻¹ŵ_t` are carried into the long-run variance,
/// which gives `R^α Ŝ R^{αᵀ}` exactly at `O(TN²l)` cost.
pub fn har_wald_with_lag(ols: &OlsFit, l: usize) -> Result<TestResult> {
    let n = ols.n;
    let t_len = ols.t();
    let m = cholesky(&ols.m_hat).map_err(|_| Error::SingularDesign)?;
    let mut rows = Matrix::zeros(n, ols.m_hat.rows());
    for i in 0..n {
        rows[(i, i)] = 1.0;
    }
    // (M⁻¹)_{α,:}, using the symmetry of M⁻¹
    let m_inv_alpha = m.solve_mat(&rows.transpose()).transpose();
    let mut v = Matrix::zeros(t_len, n);
    for t in 0..t_len {
        let vt = m_inv_alpha.matvec(ols.w_hats.row(t));
        v.row_mut(t).copy_from_slice(&vt);
    }
    let s_alpha = newey_west_lrv(&v, l);
    let w = t_len as f64 * quadratic_form(&s_alpha, ols.alpha_hat())?;
    TestResult::new(TestName::WaldHar, w, RefDist::chi2(n)?)
}

/// Ingredients of the GRS statistic for a common-factor panel.
#[derive(Debug, Clone, PartialEq)]
pub struct GrsComponents {
    pub x_bar: Vec<f64>,
    /// Factor covariance with divisor `T − 1`.
    pub s_x: Matrix,
    /// Residual covariance with divisor `T − L − 1`.
    pub sigma_hat: Matrix,
    pub alpha_hat: Vec<f64>,
    pub t: usize,
    pub l: usize,
}

impl GrsComponents {
    /// Per-equation OLS of each return on an intercept and the `L = k` factors.
    pub fn from_panel(panel: &PanelData) -> Result<Self> {
        if !panel.common_factors() {
            return Err(Error::NotCommonFactors);
        }
        let (t_len, n, l) = (panel.t(), panel.n(), panel.k());
        if t_len <= n + l + 1 {
            return Err(Error::InsufficientSample {
                needed: n + l + 1,
                got: t_len,
            });
        }
        let f = panel.factors();
        let y = panel.y();
        let d = l + 1;
        let mut gram = Matrix::zeros(d, d);
        let mut xy = Matrix::zeros(d, n);
        let mut z = vec![1.0; d];
        for t in 0..t_len {
            z[1..].copy_from_slice(f.row(t));
            for a in 0..d {
                for b in 0..d {
                    gram[(a, b)] += z[a] * z[b];
                }
                for (i, &yv) in y.row(t).iter().enumerate() {
                    xy[(a, i)] += z[a] * yv;
                }
            }
        }
        let g = cholesky(&gram).map_err(|_| Error::SingularDesign)?;
        let coef = g.solve_mat(&xy);
        let alpha_hat = coef.row(0).to_vec();

        let mut sigma = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for t in 0..t_len {
            z[1..].copy_from_slice(f.row(t));
            for (i, ei) in e.iter_mut().enumerate() {
                *ei = y[(t, i)] - (0..d).map(|a| z[a] * coef[(a, i)]).sum::<f64>();
            }
            for a in 0..n {
                for b in 0..n {
                    sigma[(a, b)] += e[a] * e[b];
                }
            }
        }
        let sigma_hat = sigma.scale(1.0 / (t_len - l - 1) as f64);

        let mut x_bar = vec![0.0; l];
        for t in 0..t_len {
            for (m, v) in x_bar.iter_mut().zip(f.row(t)) {
                *m += v;
            }
        }
        for m in &mut x_bar {
            *m /= t_len as f64;
        }
        let mut s_x = Matrix::zeros(l, l);
        for t in 0..t_len {
            let row = f.row(t);
            for a in 0..l {
                for b in 0..l {
                    s_x[(a, b)] += (row[a] - x_bar[a]) * (row[b] - x_bar[b]);
                }
            }
        }
        let s_x = s_x.scale(1.0 / (t_len - 1) as f64);
        Ok(Self {
            x_bar,
            s_x,
            sigma_hat,
            alpha_hat,
            t: t_len,
            l,
        })
    }

    pub fn n(&self) -> usize {
        self.alpha_hat.len()
    }

    /// `S_x* = (T−1)/T · S_x`
    pub fn s_x_star(&self) -> Matrix {
        self.s_x.scale((self.t - 1) as f64 / self.t as f64)
    }

    /// `T(T−N−L)/(N(T−L−1)) · (1 + x̄ᵀS⁻¹x̄)⁻¹ · α̂ᵀΣ̂⁻¹α̂` with
    /// `S = S_x*` when `corrected`, otherwise `S_x`.
    pub fn statistic(&self, corrected: bool) -> Result<f64> {
        let (t, n, l) = (self.t as f64, self.n() as f64, self.l as f64);
        let s = if corrected { self.s_x_star() } else { self.s_x.clone() };
        let sharpe = quadratic_form(&s, &self.x_bar).map_err(|_| Error::SingularCovariance)?;
        let q = quadratic_form(&self.sigma_hat, &self.alpha_hat).map_err(|_| Error::SingularCovariance)?;
        Ok(t * (t - n - l) / (n * (t - l - 1.0)) * q / (1.0 + sharpe))
    }

    pub fn reference(&self) -> Result<RefDist> {
        Ok(RefDist::f(self.n(), self.t - self.n() - self.l)?)
    }
}

/// GRS (`corrected = false`) or GRS^KS test, referred to `F(N, T−N−L)`.
pub fn grs(panel: &PanelData, corrected: bool) -> Result<TestResult> {
    let c = GrsComponents::from_panel(panel)?;
    grs_from_components(&c, corrected)
}

pub fn grs_from_components(c: &GrsComponents, corrected: bool) -> Result<TestResult> {
    let name = if corrected { TestName::GrsKs } else { TestName::Grs };
    TestResult::new(name, c.statistic(corrected)?, c.reference()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fgls::{co_fgls, pw_fgls};
    use crate::linalg::sym_eigen;
    use crate::model::{build_stacked, ols_fit};
    use crate::var_errors::{fit_var, VarFit};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(rng: &mut impl Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn factor_panel(seed: u64, t: usize, n: usize, l: usize, alpha: f64) -> PanelData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Matrix::zeros(t, l);
        let mut y = Matrix::zeros(t, n);
        for s in 0..t {
            for c in 0..l {
                f[(s, c)] = 0.3 + normal(&mut rng);
            }
            let common = normal(&mut rng);
            for i in 0..n {
                let beta: f64 = f.row(s).iter().sum();
                y[(s, i)] = alpha + beta + 0.5 * common + normal(&mut rng);
            }
        }
        PanelData::with_common_factors(y, &f).unwrap()
    }

    #[test]
    fn bartlett_lags() {
        assert_eq!(bartlett_lag(100), 4);
        assert_eq!(bartlett_lag(200), 4);
        assert_eq!(bartlett_lag(400), 5);
        assert_eq!(bartlett_lag(3200), 8);
        assert!((bartlett_weight(1, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((bartlett_weight(2, 2) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lrv_lag_zero_is_second_moment() {
        let w = Matrix::from_rows(&[[1.0, 2.0], [0.0, -1.0], [3.0, 1.0]]).unwrap();
        let g = newey_west_lrv(&w, 0);
        let expect = w.t_matmul(&w).scale(1.0 / 3.0);
        assert!(g.sub(&expect).max_abs() < 1e-15);
    }

    #[test]
    fn lrv_scalar_hand_computed() {
        let w = Matrix::column(&[1.0, 2.0, -1.0, 0.5]);
        // Γ0 = 6.25/4, Γ1 = (2 − 2 − 0.5)/4, Γ2 = (−1 + 1)/4
        let g = newey_west_lrv(&w, 2);
        let expect = 6.25 / 4.0 + 2.0 * (2.0 / 3.0) * (-0.5 / 4.0);
        assert!((g[(0, 0)] - expect).abs() < 1e-14);
    }

    #[test]
    fn restriction_rank_checked() {
        let r = Matrix::from_rows(&[[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]]).unwrap();
        assert_eq!(
            Restriction::new(r, vec![0.0, 0.0]).unwrap_err(),
            Error::RankDeficient { rank: 1, rows: 2 }
        );
        let r = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(matches!(
            Restriction::new(r, vec![0.0, 1.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn toy_wald_value() {
        let r = Restriction::new(Matrix::from_rows(&[[1.0, 0.0]]).unwrap(), vec![0.0]).unwrap();
        let w = wald_statistic(&[0.2, 1.0], &Matrix::identity(2), 100, &r).unwrap();
        assert!((w - 4.0).abs() < 1e-12);
    }

    fn sample_fit() -> (crate::model::StackedModel, GlsFit) {
        let panel = factor_panel(3, 300, 3, 2, 0.05);
        let model = build_stacked(panel);
        let ols = ols_fit(&model).unwrap();
        let var = fit_var(&ols.residuals, 1).unwrap();
        let fit = pw_fgls(&model, &var).unwrap();
        (model, fit)
    }

    #[test]
    fn wald_at_estimate_is_zero() {
        let (_, fit) = sample_fit();
        let r = Restriction::alpha(3, fit.kappa_hat.len());
        let at = Restriction::new(r.matrix().clone(), fit.alpha_hat().to_vec()).unwrap();
        let res = wald_fgls(&fit, &at).unwrap();
        assert_eq!(res.statistic, 0.0);
        assert_eq!(res.p_value, 1.0);
    }

    #[test]
    fn wald_alpha_is_wald_with_alpha_restriction() {
        let (_, fit) = sample_fit();
        let a = wald_alpha(&fit).unwrap();
        let b = wald_fgls(&fit, &Restriction::alpha(3, fit.kappa_hat.len())).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dist, RefDist::chi2(3).unwrap());
        assert_eq!(a.name, TestName::WaldPw);
        assert!((a.p_value - a.dist.sf(a.statistic).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn wald_reparametrization_invariant() {
        let (_, fit) = sample_fit();
        let base = Restriction::alpha(3, fit.kappa_hat.len());
        let a = Matrix::from_rows(&[[2.0, 1.0, 0.0], [0.0, -1.0, 3.0], [1.0, 0.0, 1.0]]).unwrap();
        let r2 = Restriction::new(a.matmul(base.matrix()), a.matvec(base.rhs())).unwrap();
        let w1 = wald_fgls(&fit, &base).unwrap().statistic;
        let w2 = wald_fgls(&fit, &r2).unwrap().statistic;
        assert!((w1 - w2).abs() <= 1e-8 * w1);
    }

    #[test]
    fn wald_invariant_to_data_rescaling() {
        let panel = factor_panel(4, 300, 3, 2, 0.05);
        let scaled_y = panel.y().scale(3.0);
        let scaled = panel.with_y(scaled_y).unwrap();
        let w = |p: PanelData| {
            let model = build_stacked(p);
            let ols = ols_fit(&model).unwrap();
            let var = fit_var(&ols.residuals, 1).unwrap();
            wald_alpha(&co_fgls(&model, &var).unwrap()).unwrap().statistic
        };
        let (a, b) = (w(panel), w(scaled));
        assert!((a - b).abs() <= 1e-8 * a);
    }

    #[test]
    fn alpha_zero_gives_zero_statistics() {
        let ols = {
            let panel = factor_panel(5, 200, 2, 2, 0.0);
            let model = build_stacked(panel);
            let mut o = ols_fit(&model).unwrap();
            o.kappa_hat[0] = 0.0;
            o.kappa_hat[1] = 0.0;
            o
        };
        assert_eq!(har_wald(&ols).unwrap().statistic, 0.0);
        let mut c = GrsComponents::from_panel(&factor_panel(5, 200, 2, 2, 0.0)).unwrap();
        c.alpha_hat = vec![0.0; 2];
        assert_eq!(c.statistic(false).unwrap(), 0.0);
        assert_eq!(grs_from_components(&c, true).unwrap().p_value, 1.0);
    }

    #[test]
    fn har_matches_full_sandwich() {
        let panel = factor_panel(6, 250, 3, 2, 0.1);
        let ols = ols_fit(&build_stacked(panel)).unwrap();
        for l in [0, 3, 7] {
            let s = hac_covariance(&ols, l).unwrap();
            let sa = s.submatrix(0, 0, 3, 3);
            let oracle = 250.0 * {
                let inv = crate::linalg::lu(&sa).unwrap();
                dot(ols.alpha_hat(), &inv.solve_vec(ols.alpha_hat()))
            };
            let w = har_wald_with_lag(&ols, l).unwrap().statistic;
            assert!((w - oracle).abs() < 1e-8 * oracle, "{w} vs {oracle}");
        }
    }

    #[test]
    fn har_close_to_omega_wald_under_iid() {
        let mut ratios = Vec::new();
        for seed in 0..9 {
            let panel = factor_panel(100 + seed, 3200, 3, 2, 0.03);
            let model = build_stacked(panel);
            let ols = ols_fit(&model).unwrap();
            let har = har_wald_with_lag(&ols, 0).unwrap().statistic;
            let omega = fit_var(&ols.residuals, 0).unwrap().omega;
            let gls = pw_fgls(&model, &VarFit::white_noise(omega)).unwrap();
            let oracle = wald_alpha(&gls).unwrap().statistic;
            ratios.push((har - oracle).abs() / oracle);
        }
        ratios.sort_by(f64::total_cmp);
        assert!(ratios[ratios.len() / 2] < 0.2, "{ratios:?}");
    }

    /// Textbook GRS through the ML covariance of the factors:
    /// `(T/N)(T−N−L)/(T−L−1)·α̂ᵀΣ̂⁻¹α̂ / (1 + μ̂ᵀΩ̂⁻¹μ̂)` with `Ω̂` divisor `T`.
    #[test]
    fn corrected_grs_matches_ml_form() {
        let panel = factor_panel(7, 120, 4, 2, 0.1);
        let c = GrsComponents::from_panel(&panel).unwrap();
        let f = panel.factors();
        let t = 120.0;
        let mean: Vec<f64> = (0..2).map(|j| f.col_to_vec(j).iter().sum::<f64>() / t).collect();
        let mut om = Matrix::zeros(2, 2);
        for s in 0..120 {
            for a in 0..2 {
                for b in 0..2 {
                    om[(a, b)] += (f[(s, a)] - mean[a]) * (f[(s, b)] - mean[b]) / t;
                }
            }
        }
        let sh = dot(&mean, &crate::linalg::lu_solve(&om, &mean).unwrap());
        let q = dot(&c.alpha_hat, &crate::linalg::lu_solve(&c.sigma_hat, &c.alpha_hat).unwrap());
        let expect = (t / 4.0) * (t - 4.0 - 2.0) / (t - 2.0 - 1.0) * q / (1.0 + sh);
        let got = c.statistic(true).unwrap();
        assert!((got - expect).abs() < 1e-10 * expect);
        let ols = ols_fit(&build_stacked(panel)).unwrap();
        for (a, b) in c.alpha_hat.iter().zip(ols.alpha_hat()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn grs_requires_common_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = Matrix::new(40, 2, (0..80).map(|_| normal(&mut rng)).collect());
        let x: Vec<f64> = (0..80).map(|_| normal(&mut rng)).collect();
        let panel = PanelData::new(y, 1, x).unwrap();
        assert_eq!(grs(&panel, false).unwrap_err(), Error::NotCommonFactors);
    }

    #[test]
    fn grs_reference_distribution() {
        let r = grs(&factor_panel(8, 200, 6, 3, 0.0), false).unwrap();
        assert_eq!(r.dist, RefDist::f(6, 191).unwrap());
        assert_eq!(r.name, TestName::Grs);
    }

    #[test]
    fn grs_gap_shrinks_like_one_over_t() {
        let mut scaled = Vec::new();
        for t in [200, 400, 800, 1600, 3200] {
            let c = GrsComponents::from_panel(&factor_panel(9, t, 6, 3, 0.05)).unwrap();
            let gap = c.statistic(false).unwrap() - c.statistic(true).unwrap();
            assert!(gap >= 0.0);
            scaled.push(t as f64 * gap);
        }
        let max = scaled.iter().cloned().fold(0.0, f64::max);
        assert!(max < 50.0, "{scaled:?}");
    }

    #[test]
    fn test_names_round_trip() {
        for t in TestName::ALL {
            assert_eq!(TestName::parse(&t.to_string()), Some(t));
        }
        assert_eq!(TestName::GrsKs.to_string(), "GRS_KS");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lrv_is_psd(seed in any::<u64>(), t in 5usize..60, d in 1usize..6, l in 0usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = Matrix::new(t, d, (0..t * d).map(|_| normal(&mut rng)).collect());
            let g = newey_west_lrv(&w, l.min(t - 1));
            let min = *sym_eigen(&g).unwrap().values.last().unwrap();
            prop_assert!(min >= -1e-10 * g.trace().max(1.0));
        }

        #[test]
        fn corrected_grs_not_larger(seed in any::<u64>(), t in 30usize..120, n in 1usize..5, l in 1usize..4) {
            let c = GrsComponents::from_panel(&factor_panel(seed, t, n, l, 0.1)).unwrap();
            let (a, b) = (c.statistic(false).unwrap(), c.statistic(true).unwrap());
            prop_assert!(0.0 <= b && b <= a);
        }
    }
}
