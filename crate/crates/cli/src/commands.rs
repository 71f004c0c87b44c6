use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mvgls::hypothesis::{bartlett_lag, hac_covariance};
use mvgls::linalg::cholesky;
use mvgls::{
    build_stacked, co_fgls, fit_var, grs, har_wald, ols_fit, pw_fgls, run_experiment_with, select_lag_bic_range,
    wald_alpha, Execution, GlsFit, Matrix, OlsFit, StackedModel, TestName, TestResult, VarFit,
};
use serde_json::{json, Value};

use crate::config::{read_config_file, split_list, Cell, OmegaChoice, PartialSettings, Preset, SimulateSettings};
use crate::data::{inner_join, read_dated_csv, Joined};
use crate::error::{CliError, Result};
use crate::output::{render_tables, sha256_hex, write_results_csv, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "mvgls", version, about = "Intercept tests for multivariate regressions with autocorrelated errors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo rejection rates over a grid of designs.
    Simulate(SimulateArgs),
    /// Run all five tests of zero intercepts on a returns/factors panel.
    Test(InputArgs),
    /// Fit the stacked model and print estimates.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Design: table1 (heteroskedastic) or table2 (plus VAR(1) errors); comma list.
    #[arg(long)]
    pub preset: Option<String>,
    /// Cells such as N6K3,N25K5.
    #[arg(long)]
    pub cells: Option<String>,
    /// Sample sizes, comma list.
    #[arg(long = "T")]
    pub t: Option<String>,
    /// Replications per cell.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Random seed; drawn at random and recorded when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Smallest VAR lag considered by BIC.
    #[arg(long)]
    pub p_min: Option<usize>,
    /// Largest VAR lag considered by BIC.
    #[arg(long)]
    pub p_max: Option<usize>,
    /// Equicorrelation of the error innovations.
    #[arg(long)]
    pub rho: Option<f64>,
    /// per-replication or fixed.
    #[arg(long)]
    pub omega: Option<String>,
    /// Significance levels, comma list.
    #[arg(long)]
    pub levels: Option<String>,
    /// Worker threads for the replications.
    #[arg(long, env = "MVGLS_WORKERS")]
    pub workers: Option<usize>,
    /// Flat key = value settings file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Re-run the settings recorded in a previous manifest.json.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Output directory for results.csv, table.txt and manifest.json.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagArg {
    Auto,
    Fixed(usize),
}

fn parse_lag(s: &str) -> std::result::Result<LagArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(LagArg::Auto);
    }
    s.parse()
        .map(LagArg::Fixed)
        .map_err(|_| format!("`{s}` is neither `auto` nor a lag order"))
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV with a `date` column and one column per asset.
    #[arg(long)]
    pub returns: PathBuf,
    /// CSV with a `date` column and one column per factor.
    #[arg(long)]
    pub factors: PathBuf,
    /// VAR lag order for the errors, or `auto` for BIC.
    #[arg(long, default_value = "auto", value_parser = parse_lag)]
    pub p: LagArg,
    /// Smallest lag considered when `--p auto`.
    #[arg(long, default_value_t = 0)]
    pub p_min: usize,
    /// Largest lag considered when `--p auto`.
    #[arg(long, default_value_t = mvgls::var_errors::DEFAULT_P_MAX)]
    pub p_max: usize,
    /// Write a JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Recorded in the report; the computations are deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Estimator {
    Ols,
    Pw,
    Co,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "pw")]
    pub estimator: Estimator,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Test(a) => cmd_test(a),
        Command::Fit(a) => cmd_fit(a),
    }
}

fn flag_settings(a: &SimulateArgs) -> Result<PartialSettings> {
    let presets = a
        .preset
        .as_deref()
        .map(|s| s.split(',').map(str::parse).collect::<Result<Vec<Preset>>>())
        .transpose()?;
    let cells = a
        .cells
        .as_deref()
        .map(|s| s.split(',').map(str::parse).collect::<Result<Vec<Cell>>>())
        .transpose()?;
    Ok(PartialSettings {
        presets,
        cells,
        t_values: a.t.as_deref().map(|s| split_list(s, "sample size")).transpose()?,
        reps: a.reps,
        seed: a.seed,
        p_min: a.p_min,
        p_max: a.p_max,
        rho: a.rho,
        x_ar: None,
        omega: a.omega.as_deref().map(str::parse::<OmegaChoice>).transpose()?,
        levels: a.levels.as_deref().map(|s| split_list(s, "level")).transpose()?,
        workers: a.workers,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let start = Instant::now();
    let mut layered = PartialSettings::default();
    if let Some(path) = &a.replay {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let manifest: RunManifest =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let settings: SimulateSettings = serde_json::from_value(manifest.config)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        layered = PartialSettings::from_settings(settings);
    }
    if let Some(path) = &a.config {
        layered = layered.overlay(read_config_file(path)?);
    }
    let layered = layered.overlay(flag_settings(&a)?);
    let workers = layered.workers;
    if workers == Some(0) {
        return Err(CliError::Config("workers must be at least 1".into()));
    }
    let settings = layered.resolve()?;
    let exec = Execution::Parallel { workers };

    let mut tables = Vec::new();
    for (preset, cfg) in settings.configs() {
        let label = format!("{} N{}K{} T={}", cfg.case_label(), cfg.n, cfg.k, cfg.t);
        eprintln!("running {label} ({} reps)", cfg.reps);
        let table = run_experiment_with(&cfg, exec).map_err(|e| match e {
            mvgls::Error::AllReplicationsFailed => CliError::AllFailed(label.clone()),
            e => e.into(),
        })?;
        tables.push((preset, table));
    }

    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let plain: Vec<_> = tables.iter().map(|(_, t)| t.clone()).collect();
    let mut csv_bytes = Vec::new();
    write_results_csv(&mut csv_bytes, &plain)?;
    write_file(&a.out.join("results.csv"), &csv_bytes)?;
    let text = render_tables(&settings, &tables);
    write_file(&a.out.join("table.txt"), text.as_bytes())?;
    print!("{text}");

    let config = serde_json::to_value(&settings).expect("settings serialize");
    let manifest = RunManifest {
        command: "simulate".into(),
        library_version: mvgls::VERSION.into(),
        seed: Some(settings.seed),
        input_hash: sha256_hex(&[config.to_string().as_bytes()]),
        wall_time_secs: start.elapsed().as_secs_f64(),
        config,
        outputs: vec!["results.csv".into(), "table.txt".into()],
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&a.out.join("manifest.json"), json.as_bytes())?;
    Ok(())
}

/// Everything the `test` and `fit` commands share.
pub struct Prepared {
    pub joined: Joined,
    pub model: StackedModel,
    pub ols: OlsFit,
    pub var: VarFit,
    pub lag_rule: &'static str,
    pub input_hash: String,
}

pub fn prepare(a: &InputArgs) -> Result<Prepared> {
    let returns_bytes = fs::read(&a.returns).map_err(|e| CliError::io(&a.returns, e))?;
    let factors_bytes = fs::read(&a.factors).map_err(|e| CliError::io(&a.factors, e))?;
    let returns = read_dated_csv(&a.returns)?;
    let factors = read_dated_csv(&a.factors)?;
    let joined = inner_join(&returns, &factors)?;
    let model = build_stacked(joined.panel()?);
    let ols = ols_fit(&model)?;
    let (p, lag_rule) = match a.p {
        LagArg::Auto => (select_lag_bic_range(&ols.residuals, a.p_min, a.p_max)?, "bic"),
        LagArg::Fixed(p) => (p, "fixed"),
    };
    let var = fit_var(&ols.residuals, p)?;
    Ok(Prepared {
        joined,
        model,
        ols,
        var,
        lag_rule,
        input_hash: sha256_hex(&[&returns_bytes, &factors_bytes]),
    })
}

/// The five intercept tests; a test that cannot be computed carries its error.
pub fn all_tests(prep: &Prepared) -> Vec<(TestName, mvgls::Result<TestResult>)> {
    let panel = prep.model.panel();
    vec![
        (
            TestName::WaldPw,
            pw_fgls(&prep.model, &prep.var).and_then(|f| wald_alpha(&f)),
        ),
        (
            TestName::WaldCo,
            co_fgls(&prep.model, &prep.var).and_then(|f| wald_alpha(&f)),
        ),
        (TestName::WaldHar, har_wald(&prep.ols)),
        (TestName::Grs, grs(panel, false)),
        (TestName::GrsKs, grs(panel, true)),
    ]
}

fn meta(prep: &Prepared, a: &InputArgs, command: &str) -> Value {
    json!({
        "command": command,
        "library_version": mvgls::VERSION,
        "input_hash": prep.input_hash,
        "seed": a.seed,
        "returns": a.returns.display().to_string(),
        "factors": a.factors.display().to_string(),
    })
}

fn sample_json(prep: &Prepared) -> Value {
    json!({
        "T": prep.model.t(),
        "N": prep.model.n(),
        "k": prep.model.k(),
        "first_date": prep.joined.dates.first(),
        "last_date": prep.joined.dates.last(),
        "p": prep.var.p,
        "lag_rule": prep.lag_rule,
    })
}

fn matrix_json(m: &Matrix) -> Value {
    Value::from((0..m.rows()).map(|r| m.row(r).to_vec()).collect::<Vec<_>>())
}

fn cmd_test(a: InputArgs) -> Result<()> {
    let prep = prepare(&a)?;
    let results = all_tests(&prep);
    println!(
        "T = {}, N = {}, k = {}, VAR lag p = {} ({})",
        prep.model.t(),
        prep.model.n(),
        prep.model.k(),
        prep.var.p,
        prep.lag_rule
    );
    println!("{:<8} {:>14} {:>12} {:>12}", "test", "statistic", "df", "p-value");
    let mut tests = Vec::new();
    for (name, res) in &results {
        match res {
            Ok(r) => {
                let df = r.dist.dfs().iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
                println!("{:<8} {:>14.6} {:>12} {:>12.6}", name.as_str(), r.statistic, df, r.p_value);
                tests.push(json!({
                    "name": name.as_str(),
                    "statistic": r.statistic,
                    "df": r.dist.dfs(),
                    "dist": r.dist.to_string(),
                    "p_value": r.p_value,
                }));
            }
            Err(e) => {
                eprintln!("warning: {name} skipped: {e}");
                println!("{:<8} {:>14} {:>12} {:>12}", name.as_str(), "-", "-", "-");
                tests.push(json!({ "name": name.as_str(), "error": e.to_string() }));
            }
        }
    }
    if let Some(path) = &a.report {
        let report = json!({
            "tests": tests,
            "fit": sample_json(&prep),
            "manifest": meta(&prep, &a, "test"),
        });
        write_file(path, serde_json::to_string_pretty(&report).expect("report serializes").as_bytes())?;
    }
    Ok(())
}

/// Standard errors: `sqrt(diag(M̂⁻¹)/n)` for FGLS, and the Newey-West
/// sandwich `sqrt(diag(M̂⁻¹Γ̂M̂⁻¹)/T)` for OLS.
fn standard_errors(m_hat: &Matrix, n: usize) -> Result<Vec<f64>> {
    let inv = cholesky(m_hat).map_err(|_| mvgls::Error::SingularDesign)?.inverse();
    Ok(inv.diag().into_iter().map(|v| (v.max(0.0) / n as f64).sqrt()).collect())
}

pub struct FitSummary {
    pub kappa: Vec<f64>,
    pub se: Vec<f64>,
}

pub fn fit_summary(prep: &Prepared, estimator: Estimator) -> Result<FitSummary> {
    let gls = |f: GlsFit| -> Result<FitSummary> {
        let se = standard_errors(&f.m_hat, f.effective_t)?;
        Ok(FitSummary { kappa: f.kappa_hat, se })
    };
    match estimator {
        Estimator::Pw => gls(pw_fgls(&prep.model, &prep.var)?),
        Estimator::Co => gls(co_fgls(&prep.model, &prep.var)?),
        Estimator::Ols => {
            let t = prep.ols.t();
            let s = hac_covariance(&prep.ols, bartlett_lag(t))?;
            let se = s.diag().into_iter().map(|v| (v.max(0.0) / t as f64).sqrt()).collect();
            Ok(FitSummary {
                kappa: prep.ols.kappa_hat.clone(),
                se,
            })
        }
    }
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let prep = prepare(&a.input)?;
    let fit = fit_summary(&prep, a.estimator)?;
    let (n, k) = (prep.model.n(), prep.model.k());
    let est = format!("{:?}", a.estimator).to_ascii_lowercase();
    println!(
        "estimator {est}, T = {}, N = {n}, k = {k}, VAR lag p = {} ({})",
        prep.model.t(),
        prep.var.p,
        prep.lag_rule
    );
    let mut header = format!("{:<12} {:>24}", "equation", "alpha (se)");
    for f in &prep.joined.factors {
        header.push_str(&format!(" {:>24}", format!("{f} (se)")));
    }
    println!("{header}");
    let mut equations = Vec::new();
    for (i, asset) in prep.joined.assets.iter().enumerate() {
        let mut line = format!("{asset:<12} {:>24}", format!("{:.6} ({:.6})", fit.kappa[i], fit.se[i]));
        let mut betas = Vec::new();
        let mut beta_se = Vec::new();
        for c in 0..k {
            let j = prep.model.beta_index(i, c);
            line.push_str(&format!(" {:>24}", format!("{:.6} ({:.6})", fit.kappa[j], fit.se[j])));
            betas.push(fit.kappa[j]);
            beta_se.push(fit.se[j]);
        }
        println!("{line}");
        equations.push(json!({
            "name": asset,
            "alpha": fit.kappa[i],
            "alpha_se": fit.se[i],
            "beta": betas,
            "beta_se": beta_se,
        }));
    }
    for (j, phi) in prep.var.phi.iter().enumerate() {
        println!("Phi_{}:", j + 1);
        print_matrix(phi);
    }
    println!("Omega:");
    print_matrix(&prep.var.omega);
    if let Some(path) = &a.input.report {
        let report = json!({
            "fit": {
                "estimator": est,
                "sample": sample_json(&prep),
                "kappa": fit.kappa,
                "se": fit.se,
                "equations": equations,
                "phi": prep.var.phi.iter().map(matrix_json).collect::<Vec<_>>(),
                "omega": matrix_json(&prep.var.omega),
            },
            "manifest": meta(&prep, &a.input, "fit"),
        });
        write_file(path, serde_json::to_string_pretty(&report).expect("report serializes").as_bytes())?;
    }
    Ok(())
}

fn print_matrix(m: &Matrix) {
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format!("{v:>12.6}")).collect();
        println!("  {}", line.join(" "));
    }
}
