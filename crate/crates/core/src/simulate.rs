//! Monte Carlo size experiments for the intercept tests.
//!
//! The design: common AR(1) factors `x_t = a·x_{t−1} + η_t`, slopes
//! `β = ι`, errors `e_t = φ·e_{t−1} + u_t` with `u_t ~ N(0, Ω)`,
//! `Ω_{ij} = ρσ_iσ_j`, `σ_i² ~ U(0.5, 1)`, and `x₀ = e₀ = 0`.
//! Each replication draws from its own random streams, so results do not
//! depend on how replications are scheduled.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fgls::{co_fgls, pw_fgls};
use crate::hypothesis::{grs_from_components, har_wald, wald_alpha, GrsComponents, TestName, TestResult};
use crate::linalg::{cholesky, Matrix};
use crate::model::{build_stacked, min_sample, ols_fit, PanelData};
use crate::rng::{stream, Purpose};
use crate::var_errors::{fit_var, select_lag_bic_range, DEFAULT_P_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaMode {
    Null,
    /// `α₁ = 0.1`, all other intercepts zero.
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagChoice {
    /// BIC over `p_min..=p_max`.
    Bic,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaMode {
    /// `σ_i²` redrawn in every replication.
    PerReplication,
    /// One draw shared by all replications.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub reps: usize,
    pub rho: f64,
    pub phi_diag: f64,
    pub x_ar: f64,
    pub alpha: AlphaMode,
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub seed: u64,
    pub p_min: usize,
    pub p_max: usize,
    pub lag: LagChoice,
    pub omega_mode: OmegaMode,
    pub levels: Vec<f64>,
}

impl SimConfig {
    /// Null design with heteroskedastic, serially uncorrelated errors.
    ///
    /// The lag search runs over `1..=5`: the error process is modelled as a
    /// VAR of positive order, so even white-noise errors get a fitted
    /// VAR(1). Set `p_min = 0` to let BIC choose a white-noise model.
    pub fn case_i(n: usize, k: usize, t: usize) -> Self {
        Self {
            n,
            k,
            t,
            reps: 1000,
            rho: 0.3,
            phi_diag: 0.0,
            x_ar: 0.5,
            alpha: AlphaMode::Null,
            sigma_low: 0.5,
            sigma_high: 1.0,
            seed: 0,
            p_min: 1,
            p_max: DEFAULT_P_MAX,
            lag: LagChoice::Bic,
            omega_mode: OmegaMode::PerReplication,
            levels: vec![0.10, 0.05, 0.01],
        }
    }

    /// Null design with VAR(1) errors, `Φ₁ = 0.3·I`.
    pub fn case_ii(n: usize, k: usize, t: usize) -> Self {
        Self {
            phi_diag: 0.3,
            ..Self::case_i(n, k, t)
        }
    }

    pub fn case_label(&self) -> &'static str {
        if self.phi_diag == 0.0 {
            "hetero"
        } else {
            "hetero+auto"
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.reps == 0 {
            return fail("reps must be at least 1".into());
        }
        if self.n == 0 || self.k == 0 {
            return fail("N and k must be positive".into());
        }
        if !(0.0..1.0).contains(&self.phi_diag) {
            return fail(format!("phi_diag = {} outside [0, 1)", self.phi_diag));
        }
        if !(self.x_ar.abs() < 1.0) {
            return fail(format!("|x_ar| = {} is not below 1", self.x_ar.abs()));
        }
        let rho_low = if self.n > 1 { -1.0 / (self.n - 1) as f64 } else { -1.0 };
        if !(self.rho > rho_low && self.rho < 1.0) {
            return fail(format!("rho = {} makes Ω singular", self.rho));
        }
        if !(0.0 < self.sigma_low && self.sigma_low <= self.sigma_high && self.sigma_high.is_finite()) {
            return fail("sigma bounds must satisfy 0 < low <= high".into());
        }
        if self.t < min_sample(self.n, self.k) {
            return fail(format!(
                "T = {} is too small for N = {}, k = {} (need at least {})",
                self.t,
                self.n,
                self.k,
                min_sample(self.n, self.k)
            ));
        }
        if self.p_min > self.p_max {
            return fail("p_min exceeds p_max".into());
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return fail("levels must lie in (0, 1)".into());
        }
        Ok(())
    }
}

/// `Ω_{ii} = σ_i²`, `Ω_{ij} = ρσ_iσ_j` with `σ_i² ~ U(low, high)`.
pub fn gen_omega(n: usize, rho: f64, low: f64, high: f64, rng: &mut impl Rng) -> Matrix {
    let sd: Vec<f64> = (0..n)
        .map(|_| {
            let v = if high > low { rng.random_range(low..high) } else { low };
            v.sqrt()
        })
        .collect();
    omega_from_sd(&sd, rho)
}

fn omega_from_sd(sd: &[f64], rho: f64) -> Matrix {
    let n = sd.len();
    let mut omega = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            omega[(i, j)] = if i == j { sd[i] * sd[i] } else { rho * sd[i] * sd[j] };
        }
    }
    omega
}

/// Simulates one panel with common factors.
pub fn gen_panel(cfg: &SimConfig, omega: &Matrix, rng: &mut impl Rng) -> Result<PanelData> {
    let (n, k, t_len) = (cfg.n, cfg.k, cfg.t);
    let chol = cholesky(omega).map_err(|_| Error::SingularCovariance)?;
    let l = chol.lower();
    let alpha: Vec<f64> = (0..n)
        .map(|i| match cfg.alpha {
            AlphaMode::Alternative if i == 0 => 0.1,
            _ => 0.0,
        })
        .collect();
    let mut f = Matrix::zeros(t_len, k);
    let mut y = Matrix::zeros(t_len, n);
    let mut x = vec![0.0; k];
    let mut e = vec![0.0; n];
    let mut z = vec![0.0; n];
    for t in 0..t_len {
        for xc in x.iter_mut() {
            let eta: f64 = StandardNormal.sample(rng);
            *xc = cfg.x_ar * *xc + eta;
        }
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        let u = l.matvec(&z);
        let xb: f64 = x.iter().sum();
        for i in 0..n {
            e[i] = cfg.phi_diag * e[i] + u[i];
            y[(t, i)] = alpha[i] + xb + e[i];
        }
        f.row_mut(t).copy_from_slice(&x);
    }
    PanelData::with_common_factors(y, &f)
}

/// Statistics of one replication. A test that failed carries its error.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub rep_id: u64,
    pub lag: usize,
    pub outcomes: Vec<(TestName, Result<TestResult>)>,
}

impl Replication {
    pub fn result(&self, name: TestName) -> Option<&Result<TestResult>> {
        self.outcomes.iter().find(|(n, _)| *n == name).map(|(_, r)| r)
    }
}

/// Innovation covariance used by replication `rep_id`.
pub fn replication_omega(cfg: &SimConfig, rep_id: u64) -> Matrix {
    let id = match cfg.omega_mode {
        OmegaMode::PerReplication => rep_id,
        OmegaMode::Fixed => 0,
    };
    let mut rng = stream(cfg.seed, Purpose::Omega, id);
    gen_omega(cfg.n, cfg.rho, cfg.sigma_low, cfg.sigma_high, &mut rng)
}

/// Runs one replication: simulate, fit OLS, choose `p`, fit the VAR, then
/// compute all five tests.
///
/// Errors that prevent every test (singular design, VAR fit failure) are
/// returned; errors confined to one test are recorded in its outcome.
pub fn run_replication(cfg: &SimConfig, rep_id: u64) -> Result<Replication> {
    let omega = replication_omega(cfg, rep_id);
    let mut rng = stream(cfg.seed, Purpose::Panel, rep_id);
    let panel = gen_panel(cfg, &omega, &mut rng)?;
    let grs = GrsComponents::from_panel(&panel);
    let model = build_stacked(panel);
    let ols = ols_fit(&model)?;
    let lag = match cfg.lag {
        LagChoice::Bic => select_lag_bic_range(&ols.residuals, cfg.p_min, cfg.p_max)?,
        LagChoice::Fixed(p) => p,
    };
    let var = fit_var(&ols.residuals, lag)?;
    let pw = pw_fgls(&model, &var).and_then(|f| wald_alpha(&f));
    let co = co_fgls(&model, &var).and_then(|f| wald_alpha(&f));
    let har = har_wald(&ols);
    let (grs, grs_ks) = match grs {
        Ok(c) => (grs_from_components(&c, false), grs_from_components(&c, true)),
        Err(e) => (Err(e.clone()), Err(e)),
    };
    Ok(Replication {
        rep_id,
        lag,
        outcomes: vec![
            (TestName::WaldPw, pw),
            (TestName::WaldCo, co),
            (TestName::WaldHar, har),
            (TestName::Grs, grs),
            (TestName::GrsKs, grs_ks),
        ],
    })
}

/// How replications are scheduled. Results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Data-parallel over replications; `None` uses every available core.
    /// Without the `parallel` feature this runs sequentially.
    Parallel { workers: Option<usize> },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel { workers: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRow {
    pub test: TestName,
    /// Rejection counts, one per level.
    pub rejections: Vec<usize>,
    pub successes: usize,
    pub failures: usize,
}

impl TestRow {
    pub fn rate(&self, level_idx: usize) -> f64 {
        if self.successes == 0 {
            return f64::NAN;
        }
        self.rejections[level_idx] as f64 / self.successes as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// `lag_histogram[p]` replications selected lag `p`.
    pub lag_histogram: Vec<usize>,
    /// Failure counts keyed by error kind, over whole replications and single tests.
    pub failure_kinds: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionTable {
    pub case: String,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub seed: u64,
    pub reps: usize,
    pub levels: Vec<f64>,
    pub rows: Vec<TestRow>,
    pub diagnostics: Diagnostics,
}

impl RejectionTable {
    pub fn row(&self, test: TestName) -> &TestRow {
        self.rows.iter().find(|r| r.test == test).expect("every test has a row")
    }

    /// Rejection rate of `test` at `level`, if that level was run.
    pub fn rate(&self, test: TestName, level: f64) -> Option<f64> {
        let idx = self.levels.iter().position(|l| (l - level).abs() < 1e-12)?;
        Some(self.row(test).rate(idx))
    }

    fn empty(cfg: &SimConfig) -> Self {
        Self {
            case: cfg.case_label().to_string(),
            n: cfg.n,
            k: cfg.k,
            t: cfg.t,
            seed: cfg.seed,
            reps: cfg.reps,
            levels: cfg.levels.clone(),
            rows: TestName::ALL
                .into_iter()
                .map(|test| TestRow {
                    test,
                    rejections: vec![0; cfg.levels.len()],
                    successes: 0,
                    failures: 0,
                })
                .collect(),
            diagnostics: Diagnostics {
                lag_histogram: vec![0; cfg.p_max.max(fixed_lag(cfg)) + 1],
                failure_kinds: BTreeMap::new(),
            },
        }
    }

    fn record(&mut self, rep: Result<Replication>) {
        let rep = match rep {
            Ok(r) => r,
            Err(e) => {
                *self.diagnostics.failure_kinds.entry(e.kind().to_string()).or_default() += 1;
                for row in &mut self.rows {
                    row.failures += 1;
                }
                return;
            }
        };
        if rep.lag >= self.diagnostics.lag_histogram.len() {
            self.diagnostics.lag_histogram.resize(rep.lag + 1, 0);
        }
        self.diagnostics.lag_histogram[rep.lag] += 1;
        for (name, outcome) in rep.outcomes {
            let row = self.rows.iter_mut().find(|r| r.test == name).expect("known test");
            match outcome {
                Ok(res) => {
                    row.successes += 1;
                    for (count, level) in row.rejections.iter_mut().zip(&self.levels) {
                        if res.p_value < *level {
                            *count += 1;
                        }
                    }
                }
                Err(e) => {
                    row.failures += 1;
                    let key = format!("{}:{}", name, e.kind());
                    *self.diagnostics.failure_kinds.entry(key).or_default() += 1;
                }
            }
        }
    }
}

fn fixed_lag(cfg: &SimConfig) -> usize {
    match cfg.lag {
        LagChoice::Fixed(p) => p,
        LagChoice::Bic => 0,
    }
}

/// Runs `cfg.reps` replications with the default execution.
pub fn run_experiment(cfg: &SimConfig) -> Result<RejectionTable> {
    run_experiment_with(cfg, Execution::default())
}

pub fn run_experiment_with(cfg: &SimConfig, exec: Execution) -> Result<RejectionTable> {
    cfg.validate()?;
    let reps = run_all(cfg, exec)?;
    let mut table = RejectionTable::empty(cfg);
    for rep in reps {
        table.record(rep);
    }
    if table.rows.iter().all(|r| r.successes == 0) {
        return Err(Error::AllReplicationsFailed);
    }
    Ok(table)
}

fn run_sequential(cfg: &SimConfig) -> Vec<Result<Replication>> {
    (0..cfg.reps as u64).map(|id| run_replication(cfg, id)).collect()
}

#[cfg(feature = "parallel")]
fn run_all(cfg: &SimConfig, exec: Execution) -> Result<Vec<Result<Replication>>> {
    use rayon::prelude::*;
    match exec {
        Execution::Sequential => Ok(run_sequential(cfg)),
        Execution::Parallel { workers } => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(w) = workers {
                if w == 0 {
                    return Err(Error::InvalidConfig("workers must be at least 1".into()));
                }
                builder = builder.num_threads(w);
            }
            let pool = builder
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(|| {
                (0..cfg.reps as u64)
                    .into_par_iter()
                    .map(|id| run_replication(cfg, id))
                    .collect()
            }))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn run_all(cfg: &SimConfig, exec: Execution) -> Result<Vec<Result<Replication>>> {
    if let Execution::Parallel { workers: Some(0) } = exec {
        return Err(Error::InvalidConfig("workers must be at least 1".into()));
    }
    Ok(run_sequential(cfg))
}
