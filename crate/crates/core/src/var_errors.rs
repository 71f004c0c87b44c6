//! VAR(p) model for the regression errors: least-squares fit, BIC lag
//! selection, stationarity check and the stationary variance used by the
//! Prais-Winsten rescaling of the first `p` observations.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, lu, spectral_radius, Matrix};

/// Default cap on the VAR lag order searched by BIC.
pub const DEFAULT_P_MAX: usize = 5;

/// Fitted `e_t = Φ₁e_{t−1} + … + Φ_p e_{t−p} + ε_t`, `Var(ε_t) = Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarFit {
    pub p: usize,
    /// `Φ₁ … Φ_p`, each `N × N`.
    pub phi: Vec<Matrix>,
    pub omega: Matrix,
    /// Number of periods the fit used, `T − p`.
    pub sample_used: usize,
}

impl VarFit {
    pub fn n(&self) -> usize {
        self.omega.rows()
    }

    /// White-noise model (`p = 0`) with the given innovation covariance.
    pub fn white_noise(omega: Matrix) -> Self {
        Self {
            p: 0,
            phi: Vec::new(),
            omega,
            sample_used: 0,
        }
    }

    /// `Np × Np` companion matrix `[Φ₁ … Φ_p; I 0]`.
    pub fn companion(&self) -> Matrix {
        let n = self.n();
        let np = n * self.p;
        let mut c = Matrix::zeros(np, np);
        for (j, phi) in self.phi.iter().enumerate() {
            c.set_block(0, j * n, phi);
        }
        for r in n..np {
            c[(r, r - n)] = 1.0;
        }
        c
    }

    /// `I − Σ_j Φ_j`
    pub fn intercept_transform(&self) -> Matrix {
        let mut c = Matrix::identity(self.n());
        for phi in &self.phi {
            c = c.sub(phi);
        }
        c
    }
}

/// Least-squares VAR(p) fit on the sample `t = p+1..T`:
/// `Φ̂ = UVᵀ(VVᵀ)⁻¹`, `Ω̂ = HHᵀ/(T−p)` with `H = U − Φ̂V`.
///
/// Only requires enough periods for `VVᵀ` to be invertible
/// (`T − p ≥ max(N·p, 1)`); the larger margin used for lag search is
/// enforced by [`select_lag_bic`].
pub fn fit_var(residuals: &Matrix, p: usize) -> Result<VarFit> {
    let (t_len, n) = (residuals.rows(), residuals.cols());
    let np = n * p;
    if t_len <= p || t_len - p < np.max(1) {
        return Err(Error::InsufficientSample {
            needed: p + np.max(1) - 1,
            got: t_len,
        });
    }
    let used = t_len - p;
    if p == 0 {
        let mut omega = residuals.t_matmul(residuals).scale(1.0 / t_len as f64);
        omega.symmetrize();
        return Ok(VarFit {
            p,
            phi: Vec::new(),
            omega,
            sample_used: used,
        });
    }

    let lagged = |t: usize| -> Vec<f64> {
        let mut v = Vec::with_capacity(np);
        for j in 1..=p {
            v.extend_from_slice(residuals.row(t - j));
        }
        v
    };
    let mut vv = Matrix::zeros(np, np);
    let mut vu = Matrix::zeros(np, n);
    for t in p..t_len {
        let v = lagged(t);
        let u = residuals.row(t);
        for a in 0..np {
            let va = v[a];
            if va == 0.0 {
                continue;
            }
            let row = vv.row_mut(a);
            for b in a..np {
                row[b] += va * v[b];
            }
            for (dst, &ub) in vu.row_mut(a).iter_mut().zip(u) {
                *dst += va * ub;
            }
        }
    }
    for a in 0..np {
        for b in 0..a {
            vv[(a, b)] = vv[(b, a)];
        }
    }
    let factor = cholesky(&vv).map_err(|_| Error::SingularGram)?;
    // Φ̂ᵀ = (VVᵀ)⁻¹ VUᵀ, stacked Np × N
    let phi_t = factor.solve_mat(&vu);
    let phi: Vec<Matrix> = (0..p)
        .map(|j| phi_t.submatrix(j * n, 0, n, n).transpose())
        .collect();

    let mut omega = Matrix::zeros(n, n);
    let mut h = vec![0.0; n];
    for t in p..t_len {
        h.copy_from_slice(residuals.row(t));
        let v = lagged(t);
        for (a, &va) in v.iter().enumerate() {
            if va != 0.0 {
                crate::linalg::axpy(-va, phi_t.row(a), &mut h);
            }
        }
        for a in 0..n {
            for b in a..n {
                omega[(a, b)] += h[a] * h[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            omega[(a, b)] = omega[(b, a)];
        }
    }
    omega.scale_in_place(1.0 / used as f64);
    Ok(VarFit {
        p,
        phi,
        omega,
        sample_used: used,
    })
}

/// BIC lag selection over `p ∈ {0, …, p_max}`; see [`select_lag_bic_range`].
pub fn select_lag_bic(residuals: &Matrix, p_max: usize) -> Result<usize> {
    select_lag_bic_range(residuals, 0, p_max)
}

/// BIC value `ln det Ω̃_p + ln(T*)·p·N²/T*` of every candidate lag in
/// `p_min..=p_max`, each fitted on the common sample `t = p_max+1..T`
/// (`T* = T − p_max`) with `Ω̃_p` the residual covariance divided by `T*`.
pub fn bic_values(residuals: &Matrix, p_min: usize, p_max: usize) -> Result<Vec<(usize, f64)>> {
    let (t_len, n) = (residuals.rows(), residuals.cols());
    if p_min > p_max {
        return Err(Error::InvalidConfig(format!(
            "lag search range {p_min}..={p_max} is empty"
        )));
    }
    if t_len <= p_max || t_len - p_max <= n * p_max + 5 {
        return Err(Error::InsufficientSample {
            needed: n * p_max + 5 + p_max,
            got: t_len,
        });
    }
    let t_star = t_len - p_max;
    let gram = lag_gram(residuals, p_max);
    let uu = gram.submatrix(0, 0, n, n);
    let ln_t = (t_star as f64).ln();
    let mut out = Vec::with_capacity(p_max - p_min + 1);
    for p in p_min..=p_max {
        let np = n * p;
        let mut s = uu.clone();
        if p > 0 {
            let vv = gram.submatrix(n, n, np, np);
            let vu = gram.submatrix(n, 0, np, n);
            let factor = cholesky(&vv).map_err(|_| Error::SingularGram)?;
            let coef = factor.solve_mat(&vu);
            s = s.sub(&vu.t_matmul(&coef));
            s.symmetrize();
        }
        let omega = s.scale(1.0 / t_star as f64);
        let log_det = cholesky(&omega).map_err(|_| Error::SingularGram)?.log_det();
        let bic = log_det + ln_t * (p * n * n) as f64 / t_star as f64;
        out.push((p, bic));
    }
    Ok(out)
}

/// Argmin of BIC over `p_min..=p_max`, ties going to the smaller lag.
///
/// Requires `T − p_max > N·p_max + 5`.
pub fn select_lag_bic_range(residuals: &Matrix, p_min: usize, p_max: usize) -> Result<usize> {
    let values = bic_values(residuals, p_min, p_max)?;
    let mut best = values[0];
    for &(p, bic) in &values[1..] {
        if bic < best.1 {
            best = (p, bic);
        }
    }
    Ok(best.0)
}

/// Gram matrix of `z_t = [e_tᵀ, e_{t−1}ᵀ, …, e_{t−L}ᵀ]ᵀ` summed over
/// `t = L+1..T`. Only the first block row is summed directly; block
/// `(a+1, b+1)` follows from block `(a, b)` by swapping one end point.
fn lag_gram(e: &Matrix, max_lag: usize) -> Matrix {
    let (t_len, n) = (e.rows(), e.cols());
    let dim = n * (max_lag + 1);
    let mut g = Matrix::zeros(dim, dim);
    for b in 0..=max_lag {
        for t in max_lag..t_len {
            let u = e.row(t);
            let w = e.row(t - b);
            for r in 0..n {
                let ur = u[r];
                let dst = &mut g.row_mut(r)[b * n..(b + 1) * n];
                for (d, &wc) in dst.iter_mut().zip(w) {
                    *d += ur * wc;
                }
            }
        }
    }
    for a in 0..max_lag {
        for b in a..max_lag {
            let drop_a = e.row(t_len - 1 - a);
            let drop_b = e.row(t_len - 1 - b);
            let add_a = e.row(max_lag - 1 - a);
            let add_b = e.row(max_lag - 1 - b);
            for r in 0..n {
                for c in 0..n {
                    let v = g[(a * n + r, b * n + c)] - drop_a[r] * drop_b[c] + add_a[r] * add_b[c];
                    g[((a + 1) * n + r, (b + 1) * n + c)] = v;
                }
            }
        }
    }
    for r in 0..dim {
        for c in 0..r {
            g[(r, c)] = g[(c, r)];
        }
    }
    g
}

/// True when every root of `det(I − Φ₁z − … − Φ_p z^p)` lies outside the
/// unit circle, checked as companion spectral radius `< 1 − 1e-8`.
pub fn check_stationarity(fit: &VarFit) -> bool {
    if fit.p == 0 {
        return true;
    }
    matches!(spectral_radius(&fit.companion()), Ok(r) if r < 1.0 - 1e-8)
}

/// `vec(Γ) = (I_{N²} − Σ_j Φ_j ⊗ Φ_j)⁻¹ vec(Ω)`, symmetrized.
///
/// For `p = 1` this is the stationary variance of the VAR. For `p ≥ 2` the
/// formula is applied as written and ignores cross-lag autocovariances.
pub fn gamma_e_infinity(fit: &VarFit) -> Result<Matrix> {
    if !check_stationarity(fit) {
        return Err(Error::NonStationaryVar);
    }
    if fit.p == 0 {
        return Ok(fit.omega.clone());
    }
    if fit.p == 1 {
        if let Some(gamma) = stein_doubling(&fit.phi[0], &fit.omega) {
            return Ok(gamma);
        }
    }
    let n = fit.n();
    let mut system = Matrix::identity(n * n);
    for phi in &fit.phi {
        system = system.sub(&phi.kron(phi));
    }
    let vec_gamma = lu(&system)?.solve_vec(&fit.omega.vec());
    let mut gamma = Matrix::unvec(&vec_gamma, n, n);
    gamma.symmetrize();
    Ok(gamma)
}

/// Solves `Γ = ΦΓΦᵀ + Ω` by doubling, `Γ = Σ_j Φ^j Ω Φ^{jᵀ}` summed in
/// blocks of `2^k` terms. This is the `p = 1` Kronecker system at `O(N³)`
/// per step instead of `O(N⁶)`. Returns `None` if the sum has not settled
/// after 64 steps.
fn stein_doubling(phi: &Matrix, omega: &Matrix) -> Option<Matrix> {
    let mut a = phi.clone();
    let mut gamma = omega.clone();
    for _ in 0..64 {
        let step = a.matmul(&gamma).matmul(&a.transpose());
        gamma.add_assign(&step);
        if step.max_abs() <= 1e-17 * gamma.max_abs() {
            gamma.symmetrize();
            return Some(gamma);
        }
        a = a.matmul(&a);
        if !a.max_abs().is_finite() {
            return None;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn simulate_var1(seed: u64, t: usize, n: usize, phi: f64, scale: f64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = Matrix::zeros(t, n);
        let mut prev = vec![0.0; n];
        for s in 0..t {
            for i in 0..n {
                let u: f64 = StandardNormal.sample(&mut rng);
                let v = phi * prev[i] + scale * u;
                e[(s, i)] = v;
                prev[i] = v;
            }
        }
        e
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn scalar_hand_example() {
        let e = Matrix::column(&[1.0, 2.0, 1.0]);
        let fit = fit_var(&e, 1).unwrap();
        assert!((fit.phi[0][(0, 0)] - 0.8).abs() < 1e-14);
        assert!((fit.omega[(0, 0)] - 0.9).abs() < 1e-14);
        assert_eq!(fit.sample_used, 2);
    }

    #[test]
    fn lag_zero_is_second_moment() {
        let e = simulate_var1(1, 50, 3, 0.0, 1.0);
        let fit = fit_var(&e, 0).unwrap();
        assert!(fit.phi.is_empty());
        let m = e.t_matmul(&e).scale(1.0 / 50.0);
        assert!(fit.omega.sub(&m).max_abs() < 1e-14);
    }

    #[test]
    fn too_short_sample() {
        let e = Matrix::zeros(4, 3);
        assert!(matches!(fit_var(&e, 2), Err(Error::InsufficientSample { .. })));
        assert!(matches!(select_lag_bic(&e, 1), Err(Error::InsufficientSample { .. })));
    }

    #[test]
    fn consistent_for_var1() {
        // per-coefficient standard error is about 0.017 at T = 3200, so a
        // 0.05 band is a three-sigma event for a single coefficient
        let mut hits = 0;
        for seed in 0..100 {
            let e = simulate_var1(seed, 3200, 1, 0.3, 1.0);
            let fit = fit_var(&e, 1).unwrap();
            if (fit.phi[0][(0, 0)] - 0.3).abs() < 0.05 {
                hits += 1;
            }
        }
        assert!(hits >= 97, "only {hits}/100 fits within 0.05");
        let e = simulate_var1(7, 3200, 6, 0.3, 1.0);
        let fit = fit_var(&e, 1).unwrap();
        assert!(fit.phi[0].sub(&Matrix::identity(6).scale(0.3)).max_abs() < 0.08);
    }

    #[test]
    fn bic_selection_examples() {
        let mut zero = 0;
        let mut one = 0;
        for seed in 0..40 {
            let e = simulate_var1(100 + seed, 3200, 6, 0.0, 1.0);
            if select_lag_bic(&e, 5).unwrap() == 0 {
                zero += 1;
            }
            let e = simulate_var1(200 + seed, 3200, 6, 0.3, 1.0);
            if select_lag_bic(&e, 5).unwrap() == 1 {
                one += 1;
            }
        }
        assert!(zero >= 38, "p=0 chosen {zero}/40");
        assert!(one >= 38, "p=1 chosen {one}/40");
        let e = simulate_var1(5, 100, 2, 0.5, 1.0);
        assert_eq!(select_lag_bic(&e, 0).unwrap(), 0);
    }

    #[test]
    fn bic_is_scale_invariant() {
        for seed in 0..10 {
            let e = simulate_var1(300 + seed, 400, 4, 0.2, 1.0);
            let a = select_lag_bic(&e, 4).unwrap();
            let b = select_lag_bic(&e.scale(3.0), 4).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn lag_gram_matches_direct_sum() {
        let e = simulate_var1(9, 60, 3, 0.4, 1.0);
        let g = lag_gram(&e, 3);
        for a in 0..=3 {
            for b in 0..=3 {
                for r in 0..3 {
                    for c in 0..3 {
                        let direct: f64 = (3..60).map(|t| e[(t - a, r)] * e[(t - b, c)]).sum();
                        assert!((g[(a * 3 + r, b * 3 + c)] - direct).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn bic_matches_explicit_refits() {
        // candidate p on the common sample equals a direct fit on the trimmed series
        let e = simulate_var1(17, 300, 3, 0.3, 1.0);
        let p_max = 3;
        let values = bic_values(&e, 0, p_max).unwrap();
        let t_star = (300 - p_max) as f64;
        for (p, bic) in values {
            let trimmed = e.submatrix(p_max - p, 0, 300 - (p_max - p), 3);
            let fit = fit_var(&trimmed, p).unwrap();
            let omega_ml = fit.omega.scale(fit.sample_used as f64 / t_star);
            let expected = cholesky(&omega_ml).unwrap().log_det()
                + t_star.ln() * (p * 9) as f64 / t_star;
            assert!((bic - expected).abs() < 1e-9, "p={p}: {bic} vs {expected}");
        }
    }

    #[test]
    fn refit_on_innovations_whitens() {
        let stats: Vec<f64> = (0..15)
            .map(|seed| {
                let e = simulate_var1(400 + seed, 1600, 4, 0.3, 1.0);
                let fit = fit_var(&e, 1).unwrap();
                let mut h = Matrix::zeros(1599, 4);
                for t in 1..1600 {
                    let pred = fit.phi[0].matvec(e.row(t - 1));
                    for i in 0..4 {
                        h[(t - 1, i)] = e[(t, i)] - pred[i];
                    }
                }
                fit_var(&h, 1).unwrap().phi[0].max_abs()
            })
            .collect();
        assert!(median(stats) < 5.0 / 1600f64.sqrt());
    }

    #[test]
    fn omega_is_psd() {
        let e = simulate_var1(21, 200, 5, 0.3, 1.0);
        for p in 0..4 {
            let fit = fit_var(&e, p).unwrap();
            let eig = crate::linalg::sym_eigen(&fit.omega).unwrap();
            assert!(*eig.values.last().unwrap() >= -1e-10 * fit.omega.trace());
        }
    }

    #[test]
    fn stationarity_examples() {
        let fit = VarFit {
            p: 1,
            phi: vec![Matrix::identity(3).scale(0.3)],
            omega: Matrix::identity(3),
            sample_used: 10,
        };
        assert!(check_stationarity(&fit));
        let unit = VarFit {
            phi: vec![Matrix::identity(3)],
            ..fit.clone()
        };
        assert!(!check_stationarity(&unit));
        assert_eq!(gamma_e_infinity(&unit), Err(Error::NonStationaryVar));
        assert!(check_stationarity(&VarFit::white_noise(Matrix::identity(2))));
    }

    #[test]
    fn doubling_matches_kronecker_solve() {
        let phi = Matrix::from_rows(&[[0.5, 0.3, 0.0], [-0.2, 0.4, 0.1], [0.0, 0.6, -0.7]]).unwrap();
        let omega = Matrix::from_rows(&[[1.0, 0.2, 0.1], [0.2, 0.8, 0.0], [0.1, 0.0, 0.5]]).unwrap();
        let fast = stein_doubling(&phi, &omega).unwrap();
        let system = Matrix::identity(9).sub(&phi.kron(&phi));
        let slow = Matrix::unvec(&lu(&system).unwrap().solve_vec(&omega.vec()), 3, 3);
        assert!(fast.sub(&slow).max_abs() < 1e-12 * slow.max_abs());
    }

    #[test]
    fn gamma_examples() {
        let zero_phi = VarFit {
            p: 1,
            phi: vec![Matrix::zeros(2, 2)],
            omega: Matrix::from_rows(&[[1.0, 0.3], [0.3, 2.0]]).unwrap(),
            sample_used: 10,
        };
        assert!(gamma_e_infinity(&zero_phi).unwrap().sub(&zero_phi.omega).max_abs() < 1e-14);

        let scalar = VarFit {
            p: 1,
            phi: vec![Matrix::new(1, 1, vec![0.5])],
            omega: Matrix::new(1, 1, vec![1.0]),
            sample_used: 10,
        };
        assert!((gamma_e_infinity(&scalar).unwrap()[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);

        let diag = VarFit {
            p: 1,
            phi: vec![Matrix::identity(3).scale(0.3)],
            omega: Matrix::identity(3),
            sample_used: 10,
        };
        let g = gamma_e_infinity(&diag).unwrap();
        assert!(g.sub(&Matrix::identity(3).scale(1.0 / 0.91)).max_abs() < 1e-12);
        assert!((g[(0, 0)] - 1.0989).abs() < 1e-4);
    }

    #[test]
    fn gamma_solves_lyapunov_for_p1() {
        let e = simulate_var1(33, 500, 4, 0.4, 1.0);
        let fit = fit_var(&e, 1).unwrap();
        let g = gamma_e_infinity(&fit).unwrap();
        let phi = &fit.phi[0];
        let rhs = phi.matmul(&g).matmul(&phi.transpose()).add(&fit.omega);
        assert!(g.sub(&rhs).max_abs() < 1e-8 * g.max_abs());
    }
}
