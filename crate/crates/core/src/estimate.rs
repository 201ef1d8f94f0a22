//! Initial values, local ML optimization, order selection, and residual
//! diagnostics.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Result, SvarmaError};
use crate::lagpoly::MatrixPolynomial;
use crate::likelihood::{self, CovMethod};
use crate::model::{self, SvarmaSpec, ThetaVector};
use crate::optim::{self, OptimOptions, Termination};
use crate::shockdist::ComponentDensity;

/// Options JSON: {max_iter, grad_tol, sigma_min, seed, scheme}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_sigma_min")]
    pub sigma_min: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scheme")]
    pub scheme: char,
    /// Extra perturbed restarts beyond the deterministic start.
    #[serde(default)]
    pub restarts: usize,
    /// Compute the finite-difference Hessian covariance (the OPG covariance is
    /// always attempted).
    #[serde(default = "default_true")]
    pub hessian_cov: bool,
}

fn default_max_iter() -> usize {
    500
}
fn default_grad_tol() -> f64 {
    1e-6
}
fn default_sigma_min() -> f64 {
    1e-8
}
fn default_scheme() -> char {
    'A'
}
fn default_true() -> bool {
    true
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: default_max_iter(),
            grad_tol: default_grad_tol(),
            sigma_min: default_sigma_min(),
            seed: 0,
            scheme: default_scheme(),
            restarts: 0,
            hessian_cov: true,
        }
    }
}

/// Fit output: the normalized point estimate with covariance estimates and
/// convergence metadata.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub theta_hat: ThetaVector,
    /// Density families after the normalization relabeling.
    pub densities: Vec<ComponentDensity>,
    pub b_hat: DMatrix<f64>,
    pub loglik_value: f64,
    pub score_norm: f64,
    pub cov_opg: Option<DMatrix<f64>>,
    pub cov_hessian: Option<DMatrix<f64>>,
    /// Standard errors from the OPG covariance.
    pub se: Option<DVector<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: String,
}

impl EstimationResult {
    /// Spec with the relabeled densities, for downstream likelihood calls.
    pub fn relabeled_spec(&self, spec: &SvarmaSpec) -> SvarmaSpec {
        SvarmaSpec {
            n: spec.n,
            p: spec.p,
            q: spec.q,
            densities: self.densities.clone(),
        }
    }
}

/// Multivariate least squares of targets on regressors; returns the
/// coefficient matrix C (targets = X C' + E) and the residuals.
fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or(SvarmaError::RankDeficient)?;
    // guard against numerically tiny pivots that Cholesky tolerates
    let sv = xtx.singular_values();
    if sv.min() <= 1e-10 * sv.max().max(1.0) {
        return Err(SvarmaError::RankDeficient);
    }
    let coef = chol.solve(&xty); // (k x n), so C = coef'
    let resid = y - x * &coef;
    Ok((coef.transpose(), resid))
}

/// Two-stage start: long-AR innovation proxies, least squares for the lag
/// matrices, Cholesky of the innovation covariance for (B0, sigma0), with
/// stability/invertibility repairs.
pub fn initial_estimate(
    y: &DMatrix<f64>,
    spec: &SvarmaSpec,
    sigma_min: f64,
) -> Result<ThetaVector> {
    let n = spec.n;
    let (p, q) = (spec.p, spec.q);
    let t_len = y.nrows();
    if y.ncols() != n {
        return Err(SvarmaError::Domain(format!(
            "data has {} series, model expects {n}",
            y.ncols()
        )));
    }
    let min_t = 10 * (n * n * (p + q)).max(1);
    if t_len < min_t.max(n * 4) {
        return Err(SvarmaError::Domain(format!(
            "sample too short for initialization: T = {t_len}"
        )));
    }

    let (mut a_mats, mut b_mats, omega) = if p + q == 0 {
        let omega = (y.transpose() * y) / t_len as f64;
        (Vec::new(), Vec::new(), omega)
    } else {
        // stage 1: long AR for innovation proxies
        let h_ar = ((1.5 * (t_len as f64).ln()).ceil() as usize)
            .max(p + q)
            .min((t_len - 1) / (2 * n).max(1))
            .max(1);
        let rows1 = t_len - h_ar;
        let mut x1 = DMatrix::<f64>::zeros(rows1, n * h_ar);
        let mut y1 = DMatrix::<f64>::zeros(rows1, n);
        for t in h_ar..t_len {
            for lag in 0..h_ar {
                for c in 0..n {
                    x1[(t - h_ar, lag * n + c)] = y[(t - lag - 1, c)];
                }
            }
            for c in 0..n {
                y1[(t - h_ar, c)] = y[(t, c)];
            }
        }
        let (_, resid1) = least_squares(&x1, &y1)?;
        // innovation proxies aligned with t = h_ar..t_len
        let ehat = resid1;

        // stage 2: regress y_t on its lags and lagged proxies
        let start = h_ar + p.max(q);
        let rows2 = t_len - start;
        let k2 = n * (p + q);
        let mut x2 = DMatrix::<f64>::zeros(rows2, k2);
        let mut y2 = DMatrix::<f64>::zeros(rows2, n);
        for t in start..t_len {
            for i in 0..p {
                for c in 0..n {
                    x2[(t - start, i * n + c)] = y[(t - i - 1, c)];
                }
            }
            for j in 0..q {
                // proxy index: ehat row for time t-j-1 is (t-j-1) - h_ar
                let r = t - j - 1 - h_ar;
                for c in 0..n {
                    x2[(t - start, n * p + j * n + c)] = ehat[(r, c)];
                }
            }
            for c in 0..n {
                y2[(t - start, c)] = y[(t, c)];
            }
        }
        let (coef, resid2) = least_squares(&x2, &y2)?;
        let a_mats: Vec<DMatrix<f64>> =
            (0..p).map(|i| coef.columns(i * n, n).into_owned()).collect();
        let b_mats: Vec<DMatrix<f64>> =
            (0..q).map(|j| coef.columns(n * p + j * n, n).into_owned()).collect();
        let omega = (resid2.transpose() * &resid2) / rows2 as f64;
        (a_mats, b_mats, omega)
    };

    // repair: project a onto the stable region by shrinking lag coefficients
    if p > 0 {
        let a_poly = MatrixPolynomial::ar(n, a_mats.clone())?;
        let minmod = a_poly.min_root_modulus()?;
        if minmod <= 1.02 {
            let c = (minmod / 1.05).min(0.999);
            for (i, m) in a_mats.iter_mut().enumerate() {
                *m *= c.powi(i as i32 + 1);
            }
        }
    }
    // repair: mirror non-invertible MA roots, adjusting the covariance
    let mut omega = omega;
    if q > 0 {
        let b_poly = MatrixPolynomial::ma(n, b_mats.clone())?;
        if !b_poly.is_invertible()? {
            match b_poly.mirror_noninvertible_roots(&omega) {
                Ok((bm, om)) => {
                    b_mats = bm.coeffs().to_vec();
                    omega = om;
                }
                Err(_) => {
                    // roots on the circle: fall back to shrinking
                    let minmod = b_poly.min_root_modulus()?;
                    let c = (minmod / 1.05).min(0.999);
                    for (j, m) in b_mats.iter_mut().enumerate() {
                        *m *= c.powi(j as i32 + 1);
                    }
                }
            }
        }
    }

    // (B0, sigma0) from the unit-diagonal rescaling of the Cholesky factor
    let omega_sym = (&omega + omega.transpose()) * 0.5;
    let chol = omega_sym
        .clone()
        .cholesky()
        .ok_or(SvarmaError::RankDeficient)?;
    let l = chol.l();
    let mut b0 = DMatrix::<f64>::identity(n, n);
    let mut sigma0 = DVector::<f64>::zeros(n);
    for j in 0..n {
        let d = l[(j, j)];
        sigma0[j] = d.max(sigma_min.max(1e-12));
        for i in 0..n {
            b0[(i, j)] = l[(i, j)] / d;
        }
    }

    let lambda0: Vec<f64> = spec
        .densities
        .iter()
        .flat_map(|d| match d {
            ComponentDensity::StudentT { .. } => vec![8.0],
            _ => vec![],
        })
        .collect();

    let mut pi2 = DVector::<f64>::zeros(n * n * p);
    for (i, m) in a_mats.iter().enumerate() {
        for c in 0..n {
            for r in 0..n {
                pi2[i * n * n + c * n + r] = m[(r, c)];
            }
        }
    }
    let mut pi3 = DVector::<f64>::zeros(n * n * q);
    for (j, m) in b_mats.iter().enumerate() {
        for c in 0..n {
            for r in 0..n {
                pi3[j * n * n + c * n + r] = m[(r, c)];
            }
        }
    }

    Ok(ThetaVector {
        pi2,
        pi3,
        beta: model::beta_from_b(&b0)?,
        sigma: sigma0,
        lambda: DVector::from_vec(lambda0),
    })
}

/// The conditions the optimizer enforces by rejection: stability,
/// invertibility, nonsingular B, densities in domain. Rank/coprimeness are
/// validated once at the end (they fail only on measure-zero sets and would
/// otherwise wall off the search path).
fn admissible(spec: &SvarmaSpec, theta: &ThetaVector) -> bool {
    if theta.sigma.iter().any(|&s| !(s > 0.0)) {
        return false;
    }
    let lam: Vec<f64> = theta.lambda.iter().cloned().collect();
    for i in 0..spec.n {
        if spec.density_at(i, &lam).check_lambda().is_err() {
            return false;
        }
    }
    let b = theta.b_matrix(spec.n);
    if b.lu().determinant().abs() < 1e-12 {
        return false;
    }
    if spec.p > 0 && !theta.ar_polynomial(spec).is_stable().unwrap_or(false) {
        return false;
    }
    if spec.q > 0 && !theta.ma_polynomial(spec).is_invertible().unwrap_or(false) {
        return false;
    }
    true
}

/// Local ML fit from the two-stage start, followed by the identification-
/// scheme normalization and covariance estimation at the normalized point.
pub fn fit(y: &DMatrix<f64>, spec: &SvarmaSpec, options: &FitOptions) -> Result<EstimationResult> {
    let theta0 = initial_estimate(y, spec, options.sigma_min)?;
    fit_from(y, spec, &theta0, options)
}

/// Like `fit`, but from a caller-supplied admissible starting point.
pub fn fit_from(
    y: &DMatrix<f64>,
    spec: &SvarmaSpec,
    theta0: &ThetaVector,
    options: &FitOptions,
) -> Result<EstimationResult> {
    if !admissible(spec, theta0) {
        return Err(SvarmaError::InvalidTheta(
            "initial point is outside the admissible set".into(),
        ));
    }
    let dim = spec.theta_dim();
    let offs = spec.block_offsets();
    let mut lower = DVector::from_element(dim, f64::NEG_INFINITY);
    for i in 0..spec.n {
        lower[offs[3] + i] = options.sigma_min;
    }
    let mut off = offs[4];
    for d in &spec.densities {
        for b in d.lambda_lower_bounds() {
            lower[off] = b;
            off += 1;
        }
    }
    let opts = OptimOptions {
        max_iter: options.max_iter,
        grad_tol: options.grad_tol,
        lower,
    };

    let run_one = |start: &DVector<f64>| {
        optim::maximize(start, &opts, |x, need_grad| {
            let theta = ThetaVector::unpack(spec, x).ok()?;
            if !admissible(spec, &theta) {
                return None;
            }
            if need_grad {
                let panel = likelihood::score_panel(spec, &theta, y).ok()?;
                Some((panel.loglik, Some(panel.score)))
            } else {
                let l = likelihood::try_loglik(spec, &theta, y).ok()?;
                Some((l, None))
            }
        })
    };

    let mut best = run_one(&theta0.pack());
    if options.restarts > 0 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(options.seed);
        for _ in 0..options.restarts {
            let mut start = theta0.pack();
            for v in start.iter_mut() {
                *v += rng.gen_range(-0.05..0.05);
            }
            let cand = run_one(&start);
            if cand.value > best.value {
                best = cand;
            }
        }
    }

    let theta_raw = ThetaVector::unpack(spec, &best.x)?;

    // normalize and relabel: shock k of the normalized model is shock perm[k]
    // of the raw fit, so sigma and the lambda blocks move together
    let b_raw = theta_raw.b_matrix(spec.n);
    let norm = model::normalize_scheme(options.scheme, &b_raw, &theta_raw.sigma)?;
    let mut lambda_new = Vec::with_capacity(theta_raw.lambda.len());
    let mut densities_new = Vec::with_capacity(spec.n);
    let lam: Vec<f64> = theta_raw.lambda.iter().cloned().collect();
    for k in 0..spec.n {
        let src = norm.perm[k];
        let d = spec.density_at(src, &lam);
        for v in d.lambda() {
            lambda_new.push(v);
        }
        densities_new.push(d);
    }
    let theta_hat = ThetaVector {
        pi2: theta_raw.pi2.clone(),
        pi3: theta_raw.pi3.clone(),
        beta: model::beta_from_b(&norm.b)?,
        sigma: norm.sigma.clone(),
        lambda: DVector::from_vec(lambda_new),
    };
    let spec_new = SvarmaSpec {
        n: spec.n,
        p: spec.p,
        q: spec.q,
        densities: densities_new.clone(),
    };

    // evaluate at the normalized point: the likelihood is invariant, the
    // score coordinates are not, so recompute both for the report
    let panel = likelihood::score_panel(&spec_new, &theta_hat, y)?;
    let mut converged = best.converged;
    let mut termination = match best.termination {
        Termination::GradientTol => "gradient tolerance reached".to_string(),
        Termination::StationaryAtResolution => {
            // kinked likelihoods (Laplace) maximize at vertices; the one-sided
            // score there is O(1/T) rather than zero
            "stationary at line-search resolution".to_string()
        }
        Termination::MaxIter => "maximum iterations reached".to_string(),
        Termination::InvalidStart => "invalid starting point".to_string(),
    };
    let violations = model::validate(&spec_new, &theta_hat, 1e-8);
    if !violations.is_empty() {
        converged = false;
        termination = format!("{termination}; validation failed: {violations:?}");
    }

    let cov_opg = likelihood::asy_cov(&spec_new, &theta_hat, y, CovMethod::Opg).ok();
    let cov_hessian = if options.hessian_cov {
        likelihood::asy_cov(&spec_new, &theta_hat, y, CovMethod::Hessian).ok()
    } else {
        None
    };
    let se = cov_opg.as_ref().map(|(_, se)| se.clone());

    Ok(EstimationResult {
        theta_hat,
        densities: densities_new,
        b_hat: norm.b,
        loglik_value: panel.loglik,
        score_norm: panel.score.norm(),
        cov_opg: cov_opg.map(|(c, _)| c),
        cov_hessian: cov_hessian.map(|(c, _)| c),
        se,
        iterations: best.iterations,
        converged,
        termination,
    })
}

/// One cell of the order-selection table.
#[derive(Debug, Clone, Serialize)]
pub struct OrderCell {
    pub p: usize,
    pub q: usize,
    pub aic: f64,
    pub loglik: f64,
    pub dim: usize,
    pub converged: bool,
    pub note: String,
}

/// Fits every (p, q) on the grid and returns the AIC-minimizing order with
/// the full table. AIC = -2 T L_T + 2 dim(theta).
pub fn select_order(
    y: &DMatrix<f64>,
    template: &SvarmaSpec,
    p_max: usize,
    q_max: usize,
    options: &FitOptions,
) -> Result<(usize, usize, Vec<OrderCell>)> {
    let t_len = y.nrows() as f64;
    let cells: Vec<(usize, usize)> = (0..=p_max)
        .flat_map(|p| (0..=q_max).map(move |q| (p, q)))
        .collect();
    let table: Vec<OrderCell> = cells
        .par_iter()
        .map(|&(p, q)| {
            let spec = SvarmaSpec {
                n: template.n,
                p,
                q,
                densities: template.densities.clone(),
            };
            let dim = spec.theta_dim();
            match fit(y, &spec, options) {
                Ok(res) if res.converged => OrderCell {
                    p,
                    q,
                    aic: -2.0 * t_len * res.loglik_value + 2.0 * dim as f64,
                    loglik: res.loglik_value,
                    dim,
                    converged: true,
                    note: String::new(),
                },
                Ok(res) => OrderCell {
                    p,
                    q,
                    aic: f64::INFINITY,
                    loglik: res.loglik_value,
                    dim,
                    converged: false,
                    note: res.termination,
                },
                Err(e) => OrderCell {
                    p,
                    q,
                    aic: f64::INFINITY,
                    loglik: f64::NEG_INFINITY,
                    dim,
                    converged: false,
                    note: e.to_string(),
                },
            }
        })
        .collect();
    let best = table
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.aic.partial_cmp(&b.aic).unwrap())
        .map(|(i, _)| i)
        .ok_or_else(|| SvarmaError::Domain("empty order grid".into()))?;
    Ok((table[best].p, table[best].q, table))
}

/// One scalar test statistic with its chi-square reference.
#[derive(Debug, Clone, Serialize)]
pub struct TestStat {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Residual diagnostics for one component series.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesDiagnostics {
    pub ljung_box: TestStat,
    pub mcleod_li: TestStat,
    pub jarque_bera: TestStat,
}

fn chi2_p(stat: f64, df: usize) -> f64 {
    if !stat.is_finite() || df == 0 {
        return f64::NAN;
    }
    let dist = ChiSquared::new(df as f64).expect("df > 0");
    1.0 - dist.cdf(stat)
}

/// Ljung-Box Q on a single demeaned series.
fn ljung_box_stat(x: &[f64], lags: usize) -> f64 {
    let t = x.len();
    let mean = x.iter().sum::<f64>() / t as f64;
    let denom: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for k in 1..=lags {
        let mut num = 0.0;
        for i in k..t {
            num += (x[i] - mean) * (x[i - k] - mean);
        }
        let rho = num / denom;
        q += rho * rho / (t - k) as f64;
    }
    q * t as f64 * (t + 2) as f64
}

fn jarque_bera_stat(x: &[f64]) -> f64 {
    let t = x.len() as f64;
    let mean = x.iter().sum::<f64>() / t;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / t;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / t;
    if m2 == 0.0 {
        return 0.0;
    }
    let s = m3 / m2.powf(1.5);
    let k = m4 / (m2 * m2);
    t / 6.0 * (s * s + (k - 3.0) * (k - 3.0) / 4.0)
}

/// Ljung-Box on levels, McLeod-Li on squares, Jarque-Bera, per component.
pub fn diagnostics(residuals: &DMatrix<f64>, lags: usize) -> Result<Vec<SeriesDiagnostics>> {
    let t = residuals.nrows();
    if t <= lags {
        return Err(SvarmaError::Domain(format!(
            "need more observations ({t}) than lags ({lags})"
        )));
    }
    let mut out = Vec::with_capacity(residuals.ncols());
    for c in 0..residuals.ncols() {
        let x: Vec<f64> = (0..t).map(|r| residuals[(r, c)]).collect();
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        let lb = ljung_box_stat(&x, lags);
        let ml = ljung_box_stat(&x2, lags);
        let jb = jarque_bera_stat(&x);
        out.push(SeriesDiagnostics {
            ljung_box: TestStat { statistic: lb, df: lags, p_value: chi2_p(lb, lags) },
            mcleod_li: TestStat { statistic: ml, df: lags, p_value: chi2_p(ml, lags) },
            jarque_bera: TestStat { statistic: jb, df: 2, p_value: chi2_p(jb, 2) },
        });
    }
    Ok(out)
}
