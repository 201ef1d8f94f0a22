//! The five pipeline commands. Each reads and validates all inputs before any
//! output file is created, so failures leave no partial outputs.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use svarma::estimate::{self, EstimationResult, FitOptions, OrderCell};
use svarma::filter::{self, SamplePath};
use svarma::irf::{self, IrfResult, ShockSize};
use svarma::model::{validate, ModelConfig, SvarmaSpec, ThetaVector};

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::errors::CliError;
use crate::transform;

pub struct CommandContext {
    pub config: RunConfig,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub scheme: Option<char>,
    pub bootstrap: Option<usize>,
    pub horizon: Option<usize>,
}

impl CommandContext {
    fn fit_options(&self) -> FitOptions {
        let mut o = self.config.options.to_options();
        if let Some(seed) = self.seed {
            o.seed = seed;
        }
        if let Some(scheme) = self.scheme {
            o.scheme = scheme;
        }
        o
    }

    fn spec(&self) -> Result<SvarmaSpec, CliError> {
        SvarmaSpec::from_config(&self.config.model).map_err(CliError::from)
    }

    fn theta(&self, spec: &SvarmaSpec) -> Result<ThetaVector, CliError> {
        let cfg = self
            .config
            .model
            .theta
            .as_ref()
            .ok_or_else(|| CliError::config("model.theta is required for this command".into()))?;
        ThetaVector::from_config(spec, cfg).map_err(CliError::from)
    }

    fn load_data(&self) -> Result<SamplePath, CliError> {
        let path = self
            .data
            .as_ref()
            .ok_or_else(|| CliError::config("--data <csv> is required for this command".into()))?;
        let file = fs::File::open(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let raw = SamplePath::read_csv(file).map_err(|e| CliError::data(e.to_string()))?;
        match &self.config.transform {
            Some(t) => transform::apply(&raw, t),
            None => Ok(raw),
        }
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        let mut body = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::internal(format!("serialize {name}: {e}")))?;
        body.push('\n');
        fs::write(&path, body)?;
        Ok(path)
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

fn vector_vals(v: &DVector<f64>) -> Vec<f64> {
    v.iter().cloned().collect()
}

pub fn cmd_simulate(ctx: &CommandContext) -> Result<(), CliError> {
    let spec = ctx.spec()?;
    let theta = ctx.theta(&spec)?;
    let violations = validate(&spec, &theta, 1e-8);
    if !violations.is_empty() {
        return Err(CliError::validation(format!("theta invalid: {violations:?}")));
    }
    let sim = &ctx.config.simulate;
    let seed = ctx.seed.unwrap_or(ctx.config.options.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = filter::simulate(&spec, &theta, sim.t, sim.burnin, &mut rng)?;
    fs::create_dir_all(&ctx.out)?;
    let out_path = ctx.out.join("simulated.csv");
    let file = fs::File::create(&out_path)?;
    path.write_csv(file)?;
    println!("{}", out_path.display());
    Ok(())
}

#[derive(Serialize)]
struct FitReport {
    loglik: f64,
    score_norm: f64,
    iterations: usize,
    converged: bool,
    termination: String,
    scheme: char,
    b_hat: Vec<Vec<f64>>,
    se: Option<Vec<f64>>,
    cov_opg: Option<Vec<Vec<f64>>>,
    cov_hessian: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
struct EstimateOutput {
    schema_version: u32,
    model: ModelConfig,
    fit: FitReport,
}

fn estimate_output(spec: &SvarmaSpec, res: &EstimationResult, scheme: char) -> EstimateOutput {
    EstimateOutput {
        schema_version: SCHEMA_VERSION,
        model: ModelConfig {
            n: spec.n,
            p: spec.p,
            q: spec.q,
            densities: res.densities.iter().map(|d| d.to_config()).collect(),
            theta: Some(res.theta_hat.to_config()),
        },
        fit: FitReport {
            loglik: res.loglik_value,
            score_norm: res.score_norm,
            iterations: res.iterations,
            converged: res.converged,
            termination: res.termination.clone(),
            scheme,
            b_hat: matrix_rows(&res.b_hat),
            se: res.se.as_ref().map(vector_vals),
            cov_opg: res.cov_opg.as_ref().map(matrix_rows),
            cov_hessian: res.cov_hessian.as_ref().map(matrix_rows),
        },
    }
}

pub fn cmd_estimate(ctx: &CommandContext) -> Result<(), CliError> {
    let spec = ctx.spec()?;
    let data = ctx.load_data()?;
    let options = ctx.fit_options();
    let res = estimate::fit(&data.y, &spec, &options)
        .map_err(|e| CliError::estimation(e.to_string()))?;
    let out = estimate_output(&spec, &res, options.scheme);
    let path = ctx.write_json("estimate.json", &out)?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct OrderOutput {
    schema_version: u32,
    chosen_p: usize,
    chosen_q: usize,
    table: Vec<OrderCell>,
}

pub fn cmd_select_order(ctx: &CommandContext) -> Result<(), CliError> {
    let spec = ctx.spec()?;
    let data = ctx.load_data()?;
    let options = ctx.fit_options();
    let so = &ctx.config.select_order;
    let (p, q, table) = estimate::select_order(&data.y, &spec, so.p_max, so.q_max, &options)
        .map_err(|e| CliError::estimation(e.to_string()))?;
    let out = OrderOutput { schema_version: SCHEMA_VERSION, chosen_p: p, chosen_q: q, table };
    let path = ctx.write_json("order_selection.json", &out)?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct DiagnosticsOutput {
    schema_version: u32,
    lags: usize,
    series: Vec<SeriesReport>,
}

#[derive(Serialize)]
struct SeriesReport {
    name: String,
    #[serde(flatten)]
    tests: estimate::SeriesDiagnostics,
}

pub fn cmd_diagnose(ctx: &CommandContext) -> Result<(), CliError> {
    let spec = ctx.spec()?;
    let theta = ctx.theta(&spec)?;
    let data = ctx.load_data()?;
    let lags = ctx.config.diagnostics.lags;
    // standardized structural shocks carry the independence hypothesis
    let (_, std_shocks) = filter::structural_shocks(&spec, &theta, &data.y)?;
    let diags = estimate::diagnostics(&std_shocks, lags)?;
    let series = diags
        .into_iter()
        .enumerate()
        .map(|(i, tests)| SeriesReport {
            name: data
                .series_names
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("shock{}", i + 1)),
            tests,
        })
        .collect();
    let out = DiagnosticsOutput { schema_version: SCHEMA_VERSION, lags, series };
    let path = ctx.write_json("diagnostics.json", &out)?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct IrfOutput {
    schema_version: u32,
    horizon: usize,
    level: f64,
    replications: usize,
    replications_used: usize,
    shock_size: ShockSize,
    series: Vec<String>,
    phi: Vec<Vec<Vec<f64>>>,
    fevd: Vec<Vec<Vec<f64>>>,
    lower: Option<Vec<Vec<Vec<f64>>>>,
    upper: Option<Vec<Vec<Vec<f64>>>>,
}

fn write_irf_csv(
    path: &Path,
    names: &[String],
    res: &IrfResult,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(fs::File::create(path)?);
    w.write_record(["horizon", "response", "shock", "point", "lo", "hi"])
        .map_err(|e| CliError::internal(e.to_string()))?;
    let n = res.phi[0].nrows();
    let label = |i: usize| {
        names
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("v{}", i + 1))
    };
    for (j, m) in res.phi.iter().enumerate() {
        for r in 0..n {
            for c in 0..n {
                let lo = res.lower.as_ref().map(|b| format!("{:.17e}", b[j][(r, c)]));
                let hi = res.upper.as_ref().map(|b| format!("{:.17e}", b[j][(r, c)]));
                w.write_record([
                    j.to_string(),
                    label(r),
                    format!("shock{}", c + 1),
                    format!("{:.17e}", m[(r, c)]),
                    lo.unwrap_or_default(),
                    hi.unwrap_or_default(),
                ])
                .map_err(|e| CliError::internal(e.to_string()))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_irf(ctx: &CommandContext) -> Result<(), CliError> {
    let spec = ctx.spec()?;
    let theta = ctx.theta(&spec)?;
    let violations = validate(&spec, &theta, 1e-8);
    if !violations.is_empty() {
        return Err(CliError::validation(format!("theta invalid: {violations:?}")));
    }
    let cfg = &ctx.config.irf;
    let horizon = ctx.horizon.unwrap_or(cfg.horizon);
    let replications = ctx.bootstrap.unwrap_or(cfg.bootstrap);
    let options = ctx.fit_options();
    let seed = ctx.seed.unwrap_or(ctx.config.options.seed);

    let (result, names) = if replications > 0 {
        let data = ctx.load_data()?;
        let res = irf::bootstrap_irf(
            &spec,
            &theta,
            &data.y,
            horizon,
            replications,
            cfg.level,
            cfg.shock_size,
            &options,
            seed,
        )
        .map_err(|e| CliError::estimation(e.to_string()))?;
        (res, data.series_names)
    } else {
        let res = irf::irf(&spec, &theta, horizon, cfg.shock_size)?;
        let names = (0..spec.n).map(|i| format!("v{}", i + 1)).collect();
        (res, names)
    };

    let to3 = |ms: &Vec<DMatrix<f64>>| ms.iter().map(matrix_rows).collect::<Vec<_>>();
    let out = IrfOutput {
        schema_version: SCHEMA_VERSION,
        horizon,
        level: if replications > 0 { cfg.level } else { 0.0 },
        replications: result.meta.replications,
        replications_used: result.meta.replications_used,
        shock_size: result.meta.shock_size,
        series: names.clone(),
        phi: to3(&result.phi),
        fevd: to3(&result.fevd),
        lower: result.lower.as_ref().map(to3),
        upper: result.upper.as_ref().map(to3),
    };
    let json_path = ctx.write_json("irf.json", &out)?;
    let csv_path = ctx.out.join("irf.csv");
    write_irf_csv(&csv_path, &names, &result)?;
    println!("{}", json_path.display());
    println!("{}", csv_path.display());
    Ok(())
}
