//! Impulse response functions, forecast-error variance decomposition, and
//! residual-bootstrap confidence bands.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SvarmaError};
use crate::estimate::{self, FitOptions};
use crate::filter;
use crate::lagpoly::MatrixPolynomial;
use crate::model::{SvarmaSpec, ThetaVector};

/// Response scaling: unit shocks (columns of B) or one-standard-deviation
/// shocks (columns of B Sigma).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockSize {
    Unit,
    OneSd,
}

#[derive(Debug, Clone, Serialize)]
pub struct IrfMeta {
    pub horizon: usize,
    pub replications: usize,
    pub replications_used: usize,
    pub level: f64,
    pub shock_size: ShockSize,
}

/// Point IRFs, FEVD shares, and optional bootstrap percentile bands.
#[derive(Debug, Clone)]
pub struct IrfResult {
    /// phi[j] is the n x n response matrix at horizon j (response variable in
    /// rows, shock in columns).
    pub phi: Vec<DMatrix<f64>>,
    /// fevd[h](r, c): share of the h-step forecast-error variance of variable
    /// r attributed to shock c.
    pub fevd: Vec<DMatrix<f64>>,
    pub lower: Option<Vec<DMatrix<f64>>>,
    pub upper: Option<Vec<DMatrix<f64>>>,
    pub meta: IrfMeta,
}

/// Point impulse responses Phi_j = k_j B (optionally scaled to one-sd shocks).
pub fn irf(
    spec: &SvarmaSpec,
    theta: &ThetaVector,
    horizon: usize,
    shock_size: ShockSize,
) -> Result<IrfResult> {
    let phi = irf_matrices(spec, theta, horizon, shock_size)?;
    let fevd = fevd_from_phi(spec, theta, &phi, shock_size)?;
    Ok(IrfResult {
        phi,
        fevd,
        lower: None,
        upper: None,
        meta: IrfMeta {
            horizon,
            replications: 0,
            replications_used: 0,
            level: 0.0,
            shock_size,
        },
    })
}

fn irf_matrices(
    spec: &SvarmaSpec,
    theta: &ThetaVector,
    horizon: usize,
    shock_size: ShockSize,
) -> Result<Vec<DMatrix<f64>>> {
    let a = theta.ar_polynomial(spec);
    let b = theta.ma_polynomial(spec);
    let ks = MatrixPolynomial::transfer_coeffs(&a, &b, horizon)?;
    let mut load = theta.b_matrix(spec.n);
    if shock_size == ShockSize::OneSd {
        load *= DMatrix::from_diagonal(&theta.sigma);
    }
    Ok(ks.into_iter().map(|k| k * &load).collect())
}

/// FEVD shares from the per-horizon response matrices.
fn fevd_from_phi(
    spec: &SvarmaSpec,
    theta: &ThetaVector,
    phi: &[DMatrix<f64>],
    shock_size: ShockSize,
) -> Result<Vec<DMatrix<f64>>> {
    let n = spec.n;
    // forecast-error contributions need one-sd responses regardless of the
    // reporting convention
    let sigma = DMatrix::from_diagonal(&theta.sigma);
    let mut cum = DMatrix::<f64>::zeros(n, n);
    let mut out = Vec::with_capacity(phi.len());
    for mat in phi {
        let theta_j = match shock_size {
            ShockSize::OneSd => mat.clone(),
            ShockSize::Unit => mat * &sigma,
        };
        for r in 0..n {
            for c in 0..n {
                cum[(r, c)] += theta_j[(r, c)] * theta_j[(r, c)];
            }
        }
        let mut shares = DMatrix::<f64>::zeros(n, n);
        for r in 0..n {
            let total: f64 = (0..n).map(|c| cum[(r, c)]).sum();
            if total <= 0.0 {
                return Err(SvarmaError::DegenerateFevd { row: r });
            }
            for c in 0..n {
                shares[(r, c)] = cum[(r, c)] / total;
            }
        }
        out.push(shares);
    }
    Ok(out)
}

/// FEVD shares alone.
pub fn fevd(spec: &SvarmaSpec, theta: &ThetaVector, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
    let phi = irf_matrices(spec, theta, horizon, ShockSize::OneSd)?;
    fevd_from_phi(spec, theta, &phi, ShockSize::OneSd)
}

/// Order-statistic quantile with nearest-rank semantics: q_p = x_(ceil(p R)),
/// clamped to the observed range. With R = 2 interior levels give min/max.
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let r = sorted.len();
    let idx = ((p * r as f64).ceil() as usize).clamp(1, r);
    sorted[idx - 1]
}

/// Residual recursive bootstrap: resample centered fitted shocks, regenerate
/// paths from theta-hat with zero presample, re-fit, normalize, and collect
/// percentile bands per (response, shock, horizon) entry.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_irf(
    spec: &SvarmaSpec,
    theta_hat: &ThetaVector,
    y: &DMatrix<f64>,
    horizon: usize,
    replications: usize,
    level: f64,
    shock_size: ShockSize,
    options: &FitOptions,
    master_seed: u64,
) -> Result<IrfResult> {
    if replications < 2 {
        return Err(SvarmaError::Domain("need at least 2 bootstrap replications".into()));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(SvarmaError::Domain(format!("level {level} outside (0, 1)")));
    }
    let n = spec.n;
    let t_len = y.nrows();
    let point = irf(spec, theta_hat, horizon, shock_size)?;

    // centered structural shocks from the fitted model
    let (mut eps_hat, _) = filter::structural_shocks(spec, theta_hat, y)?;
    for c in 0..n {
        let mean = eps_hat.column(c).sum() / t_len as f64;
        for r in 0..t_len {
            eps_hat[(r, c)] -= mean;
        }
    }

    let fit_options = FitOptions { hessian_cov: false, ..options.clone() };

    let replicate_irfs: Vec<Option<Vec<DMatrix<f64>>>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let seed = master_seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // resample rows of the centered shock panel with replacement
            let mut eps_star = DMatrix::<f64>::zeros(t_len, n);
            for t in 0..t_len {
                let pick = rng.gen_range(0..t_len);
                for c in 0..n {
                    eps_star[(t, c)] = eps_hat[(pick, c)];
                }
            }
            let y_star = filter::simulate_with_shocks(spec, theta_hat, &eps_star);
            let res = estimate::fit(&y_star, spec, &fit_options).ok()?;
            if !res.converged {
                return None;
            }
            let spec_rep = res.relabeled_spec(spec);
            irf_matrices(&spec_rep, &res.theta_hat, horizon, shock_size).ok()
        })
        .collect();

    let used: Vec<&Vec<DMatrix<f64>>> = replicate_irfs.iter().flatten().collect();
    let dropped = replications - used.len();
    if dropped * 5 > replications {
        return Err(SvarmaError::BootstrapFailed { dropped, total: replications });
    }

    let lo_p = (1.0 - level) / 2.0;
    let hi_p = 1.0 - lo_p;
    let mut lower = vec![DMatrix::<f64>::zeros(n, n); horizon + 1];
    let mut upper = vec![DMatrix::<f64>::zeros(n, n); horizon + 1];
    let mut buf = Vec::with_capacity(used.len());
    for j in 0..=horizon {
        for r in 0..n {
            for c in 0..n {
                buf.clear();
                buf.extend(used.iter().map(|rep| rep[j][(r, c)]));
                buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
                lower[j][(r, c)] = nearest_rank(&buf, lo_p);
                upper[j][(r, c)] = nearest_rank(&buf, hi_p);
            }
        }
    }

    Ok(IrfResult {
        phi: point.phi,
        fevd: point.fevd,
        lower: Some(lower),
        upper: Some(upper),
        meta: IrfMeta {
            horizon,
            replications,
            replications_used: used.len(),
            level,
            shock_size,
        },
    })
}
