//! Panel data, the stacked system `Y_t = Z_t κ + e_t`, and its OLS fit.
//!
//! The parameter vector is laid out as `κ = [α₁..α_N, β₁ᵀ..β_Nᵀ]ᵀ`, so
//! `Z_t = [I_N, X_t]` where `X_t` is block diagonal with row `i` holding
//! `x_{i,t}ᵀ` in columns `N + i·k .. N + (i+1)·k`. The `TN × (N+K)` stacked
//! design is never formed; Gram sums are accumulated per observation.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix};

/// Raw observations for `N` equations over `T` periods with `k` regressors each.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    t: usize,
    n: usize,
    k: usize,
    y: Matrix,
    /// `x[(t·N + i)·k + c]` is regressor `c` of equation `i` at time `t`.
    x: Vec<f64>,
    common_factors: bool,
}

/// Smallest admissible `T` is `N·k + N + 6`.
pub fn min_sample(n: usize, k: usize) -> usize {
    n * k + n + 6
}

impl PanelData {
    /// Builds a panel from `y` (`T × N`) and a flat regressor buffer of
    /// length `T·N·k` ordered by time, then equation, then regressor.
    ///
    /// `common_factors` is set when every equation sees identical regressors.
    pub fn new(y: Matrix, k: usize, x: Vec<f64>) -> Result<Self> {
        let (t, n) = (y.rows(), y.cols());
        if n == 0 || k == 0 {
            return Err(Error::DimensionMismatch(format!(
                "need N ≥ 1 and k ≥ 1, got N = {n}, k = {k}"
            )));
        }
        if x.len() != t * n * k {
            return Err(Error::DimensionMismatch(format!(
                "regressor buffer has {} entries, expected T·N·k = {}",
                x.len(),
                t * n * k
            )));
        }
        if y.as_slice().iter().chain(&x).any(|v| !v.is_finite()) {
            return Err(Error::DimensionMismatch("non-finite observation".into()));
        }
        if t < min_sample(n, k) {
            return Err(Error::InsufficientSample {
                needed: min_sample(n, k) - 1,
                got: t,
            });
        }
        let common_factors = (0..t).all(|s| {
            let base = &x[s * n * k..s * n * k + k];
            (1..n).all(|i| &x[(s * n + i) * k..(s * n + i + 1) * k] == base)
        });
        Ok(Self {
            t,
            n,
            k,
            y,
            x,
            common_factors,
        })
    }

    /// Nested input: `y[t][i]` and `x[t][i][c]`. Ragged input is a
    /// [`Error::DimensionMismatch`].
    pub fn from_nested(y: &[Vec<f64>], x: &[Vec<Vec<f64>>]) -> Result<Self> {
        let y = Matrix::from_rows(y).map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        if x.len() != y.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} regressor periods for {} response periods",
                x.len(),
                y.rows()
            )));
        }
        let n = y.cols();
        let k = x.first().and_then(|r| r.first()).map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(y.rows() * n * k);
        for (t, row) in x.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "period {t} has {} equations, expected {n}",
                    row.len()
                )));
            }
            for (i, xi) in row.iter().enumerate() {
                if xi.len() != k {
                    return Err(Error::DimensionMismatch(format!(
                        "x[{t}][{i}] has {} regressors, expected {k}",
                        xi.len()
                    )));
                }
                flat.extend_from_slice(xi);
            }
        }
        Self::new(y, k, flat)
    }

    /// Panel whose equations share the factor matrix `factors` (`T × k`).
    pub fn with_common_factors(y: Matrix, factors: &Matrix) -> Result<Self> {
        if factors.rows() != y.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} factor periods for {} response periods",
                factors.rows(),
                y.rows()
            )));
        }
        let (t, n, k) = (y.rows(), y.cols(), factors.cols());
        let mut flat = Vec::with_capacity(t * n * k);
        for s in 0..t {
            for _ in 0..n {
                flat.extend_from_slice(factors.row(s));
            }
        }
        Self::new(y, k, flat)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn common_factors(&self) -> bool {
        self.common_factors
    }

    /// `x_{i,t}`
    #[inline]
    pub fn x(&self, t: usize, i: usize) -> &[f64] {
        let start = (t * self.n + i) * self.k;
        &self.x[start..start + self.k]
    }

    /// The `T × k` factor matrix of a common-factor panel (equation 0's regressors).
    pub fn factors(&self) -> Matrix {
        let mut f = Matrix::zeros(self.t, self.k);
        for s in 0..self.t {
            f.row_mut(s).copy_from_slice(self.x(s, 0));
        }
        f
    }

    /// Copy of the panel with `y` replaced.
    pub fn with_y(&self, y: Matrix) -> Result<Self> {
        if (y.rows(), y.cols()) != (self.t, self.n) {
            return Err(Error::DimensionMismatch("replacement y has a different shape".into()));
        }
        Self::new(y, self.k, self.x.clone())
    }
}

/// The stacked system built on a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedModel {
    panel: PanelData,
}

/// Wraps a panel as a stacked model.
pub fn build_stacked(panel: PanelData) -> StackedModel {
    StackedModel { panel }
}

impl StackedModel {
    pub fn panel(&self) -> &PanelData {
        &self.panel
    }

    pub fn t(&self) -> usize {
        self.panel.t
    }

    pub fn n(&self) -> usize {
        self.panel.n
    }

    pub fn k(&self) -> usize {
        self.panel.k
    }

    /// `K = N·k`
    pub fn k_total(&self) -> usize {
        self.panel.n * self.panel.k
    }

    /// `N + K`
    pub fn n_params(&self) -> usize {
        self.panel.n + self.k_total()
    }

    /// Column of regressor `c` of equation `i` inside κ.
    #[inline]
    pub fn beta_index(&self, i: usize, c: usize) -> usize {
        self.panel.n + i * self.panel.k + c
    }

    /// Materializes `Z_t = [I_N, X_t]`.
    pub fn z_block(&self, t: usize) -> Matrix {
        let n = self.n();
        let mut z = Matrix::zeros(n, self.n_params());
        for i in 0..n {
            z[(i, i)] = 1.0;
            let start = self.beta_index(i, 0);
            z.row_mut(i)[start..start + self.k()].copy_from_slice(self.panel.x(t, i));
        }
        z
    }

    /// `Z_t κ`
    pub fn fitted(&self, t: usize, kappa: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| {
                let start = self.beta_index(i, 0);
                let beta = &kappa[start..start + self.k()];
                kappa[i] + crate::linalg::dot(self.panel.x(t, i), beta)
            })
            .collect()
    }

    /// `e_t = Y_t − Z_t κ` for every t, as a `T × N` matrix.
    pub fn residuals(&self, kappa: &[f64]) -> Matrix {
        assert_eq!(kappa.len(), self.n_params());
        let mut e = Matrix::zeros(self.t(), self.n());
        for t in 0..self.t() {
            let fit = self.fitted(t, kappa);
            for (i, (out, y)) in e.row_mut(t).iter_mut().zip(self.panel.y.row(t)).enumerate() {
                *out = y - fit[i];
            }
        }
        e
    }

    /// Score contributions `ŵ_t = Z_tᵀ e_t` as a `T × (N+K)` matrix.
    pub fn scores(&self, residuals: &Matrix) -> Matrix {
        let (n, k) = (self.n(), self.k());
        let mut w = Matrix::zeros(self.t(), self.n_params());
        for t in 0..self.t() {
            let e = residuals.row(t);
            let row = w.row_mut(t);
            row[..n].copy_from_slice(e);
            for i in 0..n {
                let x = self.panel.x(t, i);
                for c in 0..k {
                    row[n + i * k + c] = x[c] * e[i];
                }
            }
        }
        w
    }
}

/// OLS fit of the stacked system.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub kappa_hat: Vec<f64>,
    /// `ê_t`, `T × N`.
    pub residuals: Matrix,
    /// `Σ_t Z_tᵀZ_t / T`.
    pub m_hat: Matrix,
    /// `ŵ_t = Z_tᵀ ê_t`, `T × (N+K)`.
    pub w_hats: Matrix,
    pub n: usize,
}

impl OlsFit {
    pub fn alpha_hat(&self) -> &[f64] {
        &self.kappa_hat[..self.n]
    }

    pub fn t(&self) -> usize {
        self.residuals.rows()
    }
}

/// Stacked OLS, `κ̂ = (Σ Z_tᵀZ_t)⁻¹ Σ Z_tᵀY_t`.
///
/// Sums run sequentially over `t = 1..T` so the result is bit-stable.
/// Because `Z_t` is block diagonal by equation, this is per-equation OLS
/// with an intercept.
pub fn ols_fit(model: &StackedModel) -> Result<OlsFit> {
    let (t_len, n, k) = (model.t(), model.n(), model.k());
    let dim = model.n_params();
    let panel = model.panel();
    let mut gram = Matrix::zeros(dim, dim);
    let mut rhs = vec![0.0; dim];
    for t in 0..t_len {
        let y = panel.y.row(t);
        for i in 0..n {
            let x = panel.x(t, i);
            let b = model.beta_index(i, 0);
            gram[(i, i)] += 1.0;
            rhs[i] += y[i];
            for c in 0..k {
                gram[(i, b + c)] += x[c];
                rhs[b + c] += x[c] * y[i];
                for d in c..k {
                    gram[(b + c, b + d)] += x[c] * x[d];
                }
            }
        }
    }
    for i in 0..n {
        let b = model.beta_index(i, 0);
        for c in 0..k {
            gram[(b + c, i)] = gram[(i, b + c)];
            for d in 0..c {
                gram[(b + c, b + d)] = gram[(b + d, b + c)];
            }
        }
    }
    let factor = cholesky(&gram).map_err(|_| Error::SingularDesign)?;
    let kappa_hat = factor.solve_vec(&rhs);
    let residuals = model.residuals(&kappa_hat);
    let w_hats = model.scores(&residuals);
    Ok(OlsFit {
        kappa_hat,
        residuals,
        m_hat: gram.scale(1.0 / t_len as f64),
        w_hats,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_panel(rng: &mut impl Rng, t: usize, n: usize, k: usize) -> PanelData {
        let y = Matrix::new(t, n, (0..t * n).map(|_| rng.random_range(-1.0..1.0)).collect());
        let x = (0..t * n * k).map(|_| rng.random_range(-2.0..2.0)).collect();
        PanelData::new(y, k, x).unwrap()
    }

    /// Single-equation OLS with intercept by explicit normal equations.
    fn single_equation_ols(y: &[f64], x: &[Vec<f64>]) -> Vec<f64> {
        let k = x[0].len() + 1;
        let mut g = Matrix::zeros(k, k);
        let mut r = vec![0.0; k];
        for (yt, xt) in y.iter().zip(x) {
            let z: Vec<f64> = std::iter::once(1.0).chain(xt.iter().copied()).collect();
            for a in 0..k {
                r[a] += z[a] * yt;
                for b in 0..k {
                    g[(a, b)] += z[a] * z[b];
                }
            }
        }
        crate::linalg::lu_solve(&g, &r).unwrap()
    }

    fn long_panel(n: usize, k: usize, x: Vec<f64>, y: Vec<f64>) -> Result<PanelData> {
        let t = y.len() / n;
        PanelData::new(Matrix::new(t, n, y), k, x)
    }

    #[test]
    fn z_block_layout() {
        let t = min_sample(1, 1);
        let p = long_panel(1, 1, vec![2.5; t], vec![0.0; t]).unwrap();
        let m = build_stacked(p);
        assert_eq!(m.z_block(0).as_slice(), &[1.0, 2.5]);

        let t = min_sample(2, 1);
        let mut x = vec![0.0; t * 2];
        x[0] = 3.0;
        x[1] = 4.0;
        let p = long_panel(2, 1, x, vec![0.0; t * 2]).unwrap();
        let z = build_stacked(p).z_block(0);
        assert_eq!(z.row(0), &[1.0, 0.0, 3.0, 0.0]);
        assert_eq!(z.row(1), &[0.0, 1.0, 0.0, 4.0]);
    }

    #[test]
    fn z_block_shape_six_by_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = build_stacked(random_panel(&mut rng, 40, 6, 3));
        let z = m.z_block(5);
        assert_eq!((z.rows(), z.cols()), (6, 24));
        assert_eq!(m.k_total(), 18);
        for i in 0..6 {
            assert!(z.row(i).iter().filter(|v| **v != 0.0).count() <= 1 + 3);
        }
    }

    #[test]
    fn ragged_input_rejected() {
        let y = vec![vec![0.0, 1.0]; 20];
        let mut x = vec![vec![vec![1.0], vec![2.0]]; 20];
        x[3][1] = vec![1.0, 2.0];
        assert!(matches!(
            PanelData::from_nested(&y, &x),
            Err(Error::DimensionMismatch(_))
        ));
        let mut y2 = y.clone();
        y2[4] = vec![1.0];
        let x2 = vec![vec![vec![1.0], vec![2.0]]; 20];
        assert!(matches!(
            PanelData::from_nested(&y2, &x2),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn short_panel_rejected() {
        let err = long_panel(2, 2, vec![0.0; 10 * 4], vec![0.0; 10 * 2]).unwrap_err();
        assert_eq!(err, Error::InsufficientSample { needed: 11, got: 10 });
    }

    #[test]
    fn common_factor_detection() {
        let t = 30;
        let f = Matrix::new(t, 2, (0..t * 2).map(|v| v as f64).collect());
        let p = PanelData::with_common_factors(Matrix::zeros(t, 3), &f).unwrap();
        assert!(p.common_factors());
        assert_eq!(p.factors(), f);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(!random_panel(&mut rng, 30, 3, 2).common_factors());
    }

    #[test]
    fn two_point_line() {
        // Design padded with replicated points so the panel passes the
        // sample-size check; the line through (1,2) and (2,3) is exact.
        let t = min_sample(1, 1);
        let x: Vec<f64> = (0..t).map(|s| if s % 2 == 0 { 1.0 } else { 2.0 }).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        let fit = ols_fit(&build_stacked(long_panel(1, 1, x, y).unwrap())).unwrap();
        assert!((fit.kappa_hat[0] - 1.0).abs() < 1e-12);
        assert!((fit.kappa_hat[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_recovery_without_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_panel(&mut rng, 50, 3, 2);
        let m = build_stacked(p.clone());
        let kappa: Vec<f64> = (0..m.n_params()).map(|i| i as f64 * 0.25 - 1.0).collect();
        let mut y = Matrix::zeros(50, 3);
        for t in 0..50 {
            y.row_mut(t).copy_from_slice(&m.fitted(t, &kappa));
        }
        let fit = ols_fit(&build_stacked(p.with_y(y).unwrap())).unwrap();
        for (a, b) in fit.kappa_hat.iter().zip(&kappa) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn residuals_orthogonal_to_own_regressors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = build_stacked(random_panel(&mut rng, 80, 4, 3));
        let fit = ols_fit(&m).unwrap();
        for i in 0..4 {
            let s: f64 = (0..80).map(|t| fit.residuals[(t, i)]).sum();
            assert!(s.abs() < 1e-10);
            for c in 0..3 {
                let s: f64 = (0..80).map(|t| fit.residuals[(t, i)] * m.panel().x(t, i)[c]).sum();
                assert!(s.abs() < 1e-10);
            }
        }
        // summed scores vanish too
        for j in 0..m.n_params() {
            let s: f64 = (0..80).map(|t| fit.w_hats[(t, j)]).sum();
            assert!(s.abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn stacked_equals_per_equation(seed in any::<u64>(), n in 1usize..5, k in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = min_sample(n, k) + 20;
            let m = build_stacked(random_panel(&mut rng, t, n, k));
            let fit = ols_fit(&m).unwrap();
            for i in 0..n {
                let y: Vec<f64> = (0..t).map(|s| m.panel().y()[(s, i)]).collect();
                let x: Vec<Vec<f64>> = (0..t).map(|s| m.panel().x(s, i).to_vec()).collect();
                let coef = single_equation_ols(&y, &x);
                let got_alpha = fit.kappa_hat[i];
                prop_assert!((got_alpha - coef[0]).abs() <= 1e-10 * (1.0 + coef[0].abs()));
                for c in 0..k {
                    let got = fit.kappa_hat[m.beta_index(i, c)];
                    prop_assert!((got - coef[c + 1]).abs() <= 1e-10 * (1.0 + coef[c + 1].abs()));
                }
            }
        }

        #[test]
        fn ols_invariant_to_time_permutation(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (t, n, k) = (40, 3, 2);
            let p = random_panel(&mut rng, t, n, k);
            let mut order: Vec<usize> = (0..t).collect();
            for i in (1..t).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let y: Vec<Vec<f64>> = order.iter().map(|&s| p.y().row(s).to_vec()).collect();
            let x: Vec<Vec<Vec<f64>>> = order
                .iter()
                .map(|&s| (0..n).map(|i| p.x(s, i).to_vec()).collect())
                .collect();
            let shuffled = PanelData::from_nested(&y, &x).unwrap();
            let a = ols_fit(&build_stacked(p)).unwrap();
            let b = ols_fit(&build_stacked(shuffled)).unwrap();
            for (u, v) in a.kappa_hat.iter().zip(&b.kappa_hat) {
                prop_assert!((u - v).abs() <= 1e-10 * (1.0 + u.abs()));
            }
        }
    }
}
