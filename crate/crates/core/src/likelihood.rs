//! Conditional log-likelihood, analytic score via per-time lag recursions,
//! numeric Hessian, and the two asymptotic covariance estimators.
//!
//! The score never materializes the stacked T n x T n system matrices; the
//! derivative processes d u_t / d pi2 and d u_t / d pi3 are propagated by the
//! same O(T) lag recursion as u_t itself, with zero presample values.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SvarmaError};
use crate::filter::residuals_u;
use crate::model::{SvarmaSpec, ThetaVector};

/// Default relative step for the finite-difference Hessian.
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-5;

/// Which information-matrix estimator backs the covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovMethod {
    /// B_T, the average outer product of per-time scores.
    Opg,
    /// -A_T, the negative finite-difference Hessian of the average likelihood.
    Hessian,
}

/// Per-time score contributions plus the averaged quantities.
#[derive(Debug, Clone)]
pub struct ScorePanel {
    /// T x dim(theta), row t = d l_t / d theta.
    pub per_t: DMatrix<f64>,
    /// (1/T) sum_t l_t
    pub loglik: f64,
    /// (1/T) sum_t d l_t / d theta
    pub score: DVector<f64>,
}

/// Average conditional log-likelihood L_T; -inf sentinel when B is singular
/// or the parameter point puts a density outside its domain.
pub fn loglik(spec: &SvarmaSpec, theta: &ThetaVector, y: &DMatrix<f64>) -> f64 {
    try_loglik(spec, theta, y).unwrap_or(f64::NEG_INFINITY)
}

/// Like `loglik`, but surfaces the diagnostic instead of the sentinel.
pub fn try_loglik(spec: &SvarmaSpec, theta: &ThetaVector, y: &DMatrix<f64>) -> Result<f64> {
    let n = spec.n;
    let t_len = y.nrows();
    if t_len <= spec.p + spec.q {
        return Err(SvarmaError::Domain(format!(
            "need more than p + q = {} observations, got {t_len}",
            spec.p + spec.q
        )));
    }
    let b = theta.b_matrix(n);
    let det = b.clone().lu().determinant();
    if det.abs() < 1e-300 {
        return Err(SvarmaError::SingularB);
    }
    for (i, &s) in theta.sigma.iter().enumerate() {
        if !(s > 0.0) {
            return Err(SvarmaError::InvalidTheta(format!("sigma[{i}] = {s} not positive")));
        }
    }
    let densities = theta.densities(spec);
    for d in &densities {
        d.check_lambda()?;
    }
    let lu = b.lu();
    let u = residuals_u(spec, theta, y);
    let base = -det.abs().ln() - theta.sigma.iter().map(|s| s.ln()).sum::<f64>();
    let mut acc = 0.0;
    for t in 0..t_len {
        let rhs = DVector::from_fn(n, |r, _| u[(t, r)]);
        let eps = lu.solve(&rhs).ok_or(SvarmaError::SingularB)?;
        let mut lt = base;
        for i in 0..n {
            lt += densities[i].log_density(eps[i] / theta.sigma[i]);
        }
        acc += lt;
    }
    if !acc.is_finite() {
        return Err(SvarmaError::InvalidTheta("non-finite likelihood".into()));
    }
    Ok(acc / t_len as f64)
}

/// Gradient of the average log-likelihood, blocks ordered (pi2, pi3, beta, sigma, lambda).
pub fn score(spec: &SvarmaSpec, theta: &ThetaVector, y: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(score_panel(spec, theta, y)?.score)
}

/// Per-time scores, their average, and the likelihood in one pass.
pub fn score_panel(
    spec: &SvarmaSpec,
    theta: &ThetaVector,
    y: &DMatrix<f64>,
) -> Result<ScorePanel> {
    let n = spec.n;
    let (p, q) = (spec.p, spec.q);
    let t_len = y.nrows();
    if t_len <= p + q {
        return Err(SvarmaError::Domain(format!(
            "need more than p + q = {} observations, got {t_len}",
            p + q
        )));
    }
    let dim = spec.theta_dim();
    let offs = spec.block_offsets();
    let (d2, d3) = (n * n * p, n * n * q);

    let b = theta.b_matrix(n);
    let lu = b.clone().lu();
    let det = lu.determinant();
    if det.abs() < 1e-300 {
        return Err(SvarmaError::SingularB);
    }
    let lut = b.transpose().lu();
    let binv = lu
        .try_inverse()
        .ok_or(SvarmaError::SingularB)?;
    let densities = theta.densities(spec);
    for d in &densities {
        d.check_lambda()?;
    }
    for (i, &s) in theta.sigma.iter().enumerate() {
        if !(s > 0.0) {
            return Err(SvarmaError::InvalidTheta(format!("sigma[{i}] = {s} not positive")));
        }
    }
    let b_coef = theta.ma_coeffs(n, q);
    let u = residuals_u(spec, theta, y);

    let base = -det.abs().ln() - theta.sigma.iter().map(|s| s.ln()).sum::<f64>();
    let mut per_t = DMatrix::<f64>::zeros(t_len, dim);
    let mut loglik_acc = 0.0;

    // ring buffers of the last q derivative matrices
    let mut du2_hist: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, d2); q];
    let mut du3_hist: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, d3); q];

    for t in 0..t_len {
        // d u_t / d pi2' = -(x'_{t-1} (x) I_n) - sum_j b_j d u_{t-j} / d pi2'
        let mut du2 = DMatrix::<f64>::zeros(n, d2);
        for i in 0..p {
            if t > i {
                let lag = t - i - 1;
                for j in 0..n {
                    let v = y[(lag, j)];
                    for r in 0..n {
                        du2[(r, (i * n + j) * n + r)] = -v;
                    }
                }
            }
        }
        for (jl, bj) in b_coef.iter().enumerate() {
            if t > jl {
                du2.gemm(-1.0, bj, &du2_hist[jl], 1.0);
            }
        }

        // d u_t / d pi3' = -(w'_{t-1} (x) I_n) - sum_j b_j d u_{t-j} / d pi3'
        let mut du3 = DMatrix::<f64>::zeros(n, d3);
        for i in 0..q {
            if t > i {
                let lag = t - i - 1;
                for j in 0..n {
                    let v = u[(lag, j)];
                    for r in 0..n {
                        du3[(r, (i * n + j) * n + r)] = -v;
                    }
                }
            }
        }
        for (jl, bj) in b_coef.iter().enumerate() {
            if t > jl {
                du3.gemm(-1.0, bj, &du3_hist[jl], 1.0);
            }
        }

        let rhs = DVector::from_fn(n, |r, _| u[(t, r)]);
        let eps = lu.solve(&rhs).ok_or(SvarmaError::SingularB)?;
        let mut ex_scaled = DVector::<f64>::zeros(n); // Sigma^{-1} e_x
        let mut lt = base;
        for i in 0..n {
            let x = eps[i] / theta.sigma[i];
            lt += densities[i].log_density(x);
            ex_scaled[i] = densities[i].e_x(x) / theta.sigma[i];
        }
        loglik_acc += lt;
        // g_t = B'^{-1} Sigma^{-1} e_x
        let g = lut.solve(&ex_scaled).ok_or(SvarmaError::SingularB)?;

        // pi2 and pi3 blocks: (d u_t'/d pi) g_t
        {
            let mut row = per_t.row_mut(t);
            for c in 0..d2 {
                let mut acc = 0.0;
                for r in 0..n {
                    acc += du2[(r, c)] * g[r];
                }
                row[offs[0] + c] = acc;
            }
            for c in 0..d3 {
                let mut acc = 0.0;
                for r in 0..n {
                    acc += du3[(r, c)] * g[r];
                }
                row[offs[1] + c] = acc;
            }

            // beta block. u_t is a function of (pi2, pi3) alone -- substituting
            // eps_{t-j} = B^{-1} u_{t-j} makes the lagged-shock product-rule
            // terms cancel -- so only the contemporaneous term and the
            // determinant term remain. Verified against central finite
            // differences of the likelihood.
            let mut k = 0;
            for j in 0..n {
                for i in 0..n {
                    if i != j {
                        row[offs[2] + k] = -eps[j] * g[i] - binv[(j, i)];
                        k += 1;
                    }
                }
            }

            // sigma block: -sigma_i^{-2} (e_x_i eps_i + sigma_i)
            for i in 0..n {
                let s = theta.sigma[i];
                let e_x = ex_scaled[i] * s; // undo the Sigma^{-1} scaling
                row[offs[3] + i] = -(e_x * eps[i] + s) / (s * s);
            }

            // lambda block
            let mut off = offs[4];
            for i in 0..n {
                let x = eps[i] / theta.sigma[i];
                for v in densities[i].e_lambda(x) {
                    row[off] = v;
                    off += 1;
                }
            }
        }

        if q > 0 {
            du2_hist.rotate_right(1);
            du2_hist[0] = du2;
            du3_hist.rotate_right(1);
            du3_hist[0] = du3;
        }
    }

    let loglik = loglik_acc / t_len as f64;
    if !loglik.is_finite() {
        return Err(SvarmaError::InvalidTheta("non-finite likelihood".into()));
    }
    let mut score = DVector::<f64>::zeros(dim);
    for t in 0..t_len {
        for c in 0..dim {
            score[c] += per_t[(t, c)];
        }
    }
    score /= t_len as f64;
    Ok(ScorePanel { per_t, loglik, score })
}

/// Outer-product estimator B_T = (1/T) sum_t s_t s_t'.
pub fn opg(spec: &SvarmaSpec, theta: &ThetaVector, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let panel = score_panel(spec, theta, y)?;
    let t_len = y.nrows() as f64;
    let dim = panel.per_t.ncols();
    let mut out = DMatrix::<f64>::zeros(dim, dim);
    for t in 0..panel.per_t.nrows() {
        let row = panel.per_t.row(t);
        for i in 0..dim {
            for j in i..dim {
                out[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            out[(i, j)] /= t_len;
            out[(j, i)] = out[(i, j)];
        }
    }
    Ok(out)
}

/// A_T: central finite differences of the analytic score, symmetrized.
///
/// `step_rel` scales per-coordinate steps h_k = step_rel * max(1, |theta_k|).
/// With kinked densities (Laplace) the step also controls how much of the
/// kink-crossing curvature mass is sampled; steps of 1e-2 order are needed
/// for the information-equality check, while smooth models can use the default.
pub fn hessian(
    spec: &SvarmaSpec,
    theta: &ThetaVector,
    y: &DMatrix<f64>,
    step_rel: f64,
) -> Result<DMatrix<f64>> {
    let packed = theta.pack();
    let dim = packed.len();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim {
        let hk = step_rel * packed[k].abs().max(1.0);
        let mut plus = packed.clone();
        plus[k] += hk;
        let mut minus = packed.clone();
        minus[k] -= hk;
        let sp = score(spec, &ThetaVector::unpack(spec, &plus)?, y)?;
        let sm = score(spec, &ThetaVector::unpack(spec, &minus)?, y)?;
        let col = (sp - sm) / (2.0 * hk);
        h.column_mut(k).copy_from(&col);
    }
    // symmetrize
    let ht = h.transpose();
    Ok((h + ht) * 0.5)
}

/// Asymmetry of the raw finite-difference Hessian before symmetrization;
/// a smoothness diagnostic used by tests.
pub fn hessian_asymmetry(
    spec: &SvarmaSpec,
    theta: &ThetaVector,
    y: &DMatrix<f64>,
    step_rel: f64,
) -> Result<f64> {
    let packed = theta.pack();
    let dim = packed.len();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim {
        let hk = step_rel * packed[k].abs().max(1.0);
        let mut plus = packed.clone();
        plus[k] += hk;
        let mut minus = packed.clone();
        minus[k] -= hk;
        let sp = score(spec, &ThetaVector::unpack(spec, &plus)?, y)?;
        let sm = score(spec, &ThetaVector::unpack(spec, &minus)?, y)?;
        let col = (sp - sm) / (2.0 * hk);
        h.column_mut(k).copy_from(&col);
    }
    Ok((&h - h.transpose()).norm() / h.norm().max(1e-300))
}

/// Covariance of theta-hat and standard errors from the chosen estimator:
/// B_T^{-1}/T for OPG, (-A_T)^{-1}/T for the Hessian.
pub fn asy_cov(
    spec: &SvarmaSpec,
    theta: &ThetaVector,
    y: &DMatrix<f64>,
    method: CovMethod,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let info = match method {
        CovMethod::Opg => opg(spec, theta, y)?,
        CovMethod::Hessian => -hessian(spec, theta, y, DEFAULT_HESSIAN_STEP)?,
    };
    let sv = info.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 0.0 || smax / smin > 1e12 {
        return Err(SvarmaError::NearSingularInformation { cond: smax / smin.max(1e-300) });
    }
    let inv = info
        .try_inverse()
        .ok_or(SvarmaError::NearSingularInformation { cond: smax / smin })?;
    let t_len = y.nrows() as f64;
    let cov = inv / t_len;
    let se = DVector::from_fn(cov.nrows(), |i, _| cov[(i, i)].max(0.0).sqrt());
    Ok((cov, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shockdist::ComponentDensity;
    use nalgebra::dvector;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_spec(p: usize, q: usize, d: ComponentDensity) -> SvarmaSpec {
        SvarmaSpec::new(1, p, q, vec![d]).unwrap()
    }

    #[test]
    fn closed_form_scalar_values() {
        let spec = scalar_spec(0, 0, ComponentDensity::Laplace);
        let theta = ThetaVector {
            pi2: DVector::zeros(0),
            pi3: DVector::zeros(0),
            beta: DVector::zeros(0),
            sigma: dvector![1.0],
            lambda: DVector::zeros(0),
        };
        let y = DMatrix::from_element(1, 1, 0.0);
        let l = loglik(&spec, &theta, &y);
        assert!((l - (-0.5 * std::f64::consts::LN_2)).abs() < 1e-15);

        // doubling sigma at y = 0 lowers the likelihood by log 2
        let theta2 = ThetaVector { sigma: dvector![2.0], ..theta.clone() };
        let l2 = loglik(&spec, &theta2, &y);
        assert!((l - l2 - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn scalar_sigma_score_zero_point() {
        // d l / d sigma = sqrt(2)|y|/sigma^2 - 1/sigma vanishes at |y| = sigma/sqrt(2)
        let spec = scalar_spec(0, 0, ComponentDensity::Laplace);
        let sigma = 1.3;
        let y_at_zero = sigma / std::f64::consts::SQRT_2;
        let theta = ThetaVector {
            pi2: DVector::zeros(0),
            pi3: DVector::zeros(0),
            beta: DVector::zeros(0),
            sigma: dvector![sigma],
            lambda: DVector::zeros(0),
        };
        let y = DMatrix::from_element(1, 1, y_at_zero);
        let s = score(&spec, &theta, &y).unwrap();
        assert!(s[0].abs() < 1e-14, "sigma score {}", s[0]);

        let y2 = DMatrix::from_element(1, 1, 0.9);
        let s2 = score(&spec, &theta, &y2).unwrap();
        let expect = std::f64::consts::SQRT_2 * 0.9 / (sigma * sigma) - 1.0 / sigma;
        assert!((s2[0] - expect).abs() < 1e-14);
    }

    fn random_valid_theta(
        spec: &SvarmaSpec,
        rng: &mut StdRng,
    ) -> ThetaVector {
        let n = spec.n;
        loop {
            let scale_a = 0.5 / (spec.p.max(1) as f64);
            let scale_b = 0.5 / (spec.q.max(1) as f64);
            let theta = ThetaVector {
                pi2: DVector::from_fn(n * n * spec.p, |_, _| rng.gen_range(-scale_a..scale_a)),
                pi3: DVector::from_fn(n * n * spec.q, |_, _| rng.gen_range(-scale_b..scale_b)),
                beta: DVector::from_fn(n * (n - 1), |_, _| rng.gen_range(-0.6..0.6)),
                sigma: DVector::from_fn(n, |_, _| rng.gen_range(0.5..1.5)),
                lambda: DVector::from_fn(spec.lambda_dim(), |_, _| rng.gen_range(5.0..9.0)),
            };
            if crate::model::validate(spec, &theta, 1e-8).is_empty() {
                return theta;
            }
        }
    }

    /// Minimum standardized residual magnitude across the panel, used to keep
    /// finite-difference fixtures away from the Laplace kink.
    fn min_std_residual(spec: &SvarmaSpec, theta: &ThetaVector, y: &DMatrix<f64>) -> f64 {
        let (_, std) = crate::filter::structural_shocks(spec, theta, y).unwrap();
        std.iter().fold(f64::INFINITY, |m, &v| m.min(v.abs()))
    }

    #[test]
    fn score_matches_finite_differences_across_orders() {
        let mut rng = StdRng::seed_from_u64(2024);
        let mut fixtures = 0;
        for n in [1usize, 2] {
            for p in [0usize, 1, 2] {
                for q in [0usize, 1, 2] {
                    let densities: Vec<ComponentDensity> = (0..n)
                        .map(|i| {
                            if i % 2 == 0 {
                                ComponentDensity::Laplace
                            } else {
                                ComponentDensity::StudentT { nu: 6.0 }
                            }
                        })
                        .collect();
                    let spec = SvarmaSpec::new(n, p, q, densities).unwrap();
                    // deterministic search for a kink-avoiding fixture; the
                    // simulation seed must vary per attempt or static models
                    // can never escape an unlucky draw
                    let mut attempt = 0u64;
                    let (theta, y) = loop {
                        attempt += 1;
                        let theta = random_valid_theta(&spec, &mut rng);
                        let mut sim_rng =
                            ChaCha8Rng::seed_from_u64(fixtures as u64 * 1000 + attempt + 77);
                        let path =
                            crate::filter::simulate(&spec, &theta, 60, 50, &mut sim_rng).unwrap();
                        if min_std_residual(&spec, &theta, &path.y) > 1e-3 {
                            break (theta, path.y);
                        }
                    };
                    let max_rel = max_score_fd_error(&spec, &theta, &y);
                    assert!(
                        max_rel < 1e-5,
                        "n={n} p={p} q={q}: max relative score error {max_rel}"
                    );
                    fixtures += 1;
                }
            }
        }
        assert!(fixtures >= 18);
    }

    fn max_score_fd_error(spec: &SvarmaSpec, theta: &ThetaVector, y: &DMatrix<f64>) -> f64 {
        let s = score(spec, theta, y).unwrap();
        let packed = theta.pack();
        let h = 1e-6;
        let mut max_rel = 0.0f64;
        for k in 0..packed.len() {
            let hk = h * packed[k].abs().max(1.0);
            let mut plus = packed.clone();
            plus[k] += hk;
            let mut minus = packed.clone();
            minus[k] -= hk;
            let lp = try_loglik(spec, &ThetaVector::unpack(spec, &plus).unwrap(), y).unwrap();
            let lm = try_loglik(spec, &ThetaVector::unpack(spec, &minus).unwrap(), y).unwrap();
            let fd = (lp - lm) / (2.0 * hk);
            let rel = (fd - s[k]).abs() / s[k].abs().max(1e-4);
            max_rel = max_rel.max(rel);
        }
        max_rel
    }

    #[test]
    fn loglik_invariant_under_shock_relabeling() {
        // permute B columns, flip signs, rescale; absorb into sigma and lambda
        let spec = SvarmaSpec::new(
            2,
            1,
            1,
            vec![ComponentDensity::StudentT { nu: 5.0 }, ComponentDensity::StudentT { nu: 8.0 }],
        )
        .unwrap();
        let theta = ThetaVector {
            pi2: DVector::from_vec(vec![0.4, 0.1, -0.2, 0.3]),
            pi3: DVector::from_vec(vec![0.2, -0.1, 0.05, 0.25]),
            beta: DVector::from_vec(vec![0.5, -0.3]),
            sigma: dvector![1.0, 0.7],
            lambda: dvector![5.0, 8.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let path = crate::filter::simulate(&spec, &theta, 150, 100, &mut rng).unwrap();
        let l0 = loglik(&spec, &theta, &path.y);

        // swap the two shocks with a sign flip and scale 2 on the first column
        let b = theta.b_matrix(2);
        let mut b2 = DMatrix::zeros(2, 2);
        let (d0, d1) = (-2.0, 1.0);
        for r in 0..2 {
            b2[(r, 0)] = b[(r, 1)] * d0;
            b2[(r, 1)] = b[(r, 0)] * d1;
        }
        // restore unit diagonal: absorb into the diagonal scale
        let (s0, s1) = (b2[(0, 0)], b2[(1, 1)]);
        for r in 0..2 {
            b2[(r, 0)] /= s0;
            b2[(r, 1)] /= s1;
        }
        let spec2 = SvarmaSpec::new(
            2,
            1,
            1,
            vec![ComponentDensity::StudentT { nu: 8.0 }, ComponentDensity::StudentT { nu: 5.0 }],
        )
        .unwrap();
        // net column scales: output col k = (d_k / s_k) * source column
        let theta2 = ThetaVector {
            pi2: theta.pi2.clone(),
            pi3: theta.pi3.clone(),
            beta: crate::model::beta_from_b(&b2).unwrap(),
            sigma: dvector![
                theta.sigma[1] * (s0 / d0).abs(),
                theta.sigma[0] * (s1 / d1).abs()
            ],
            lambda: dvector![8.0, 5.0],
        };
        let l1 = loglik(&spec2, &theta2, &path.y);
        assert!((l0 - l1).abs() < 1e-12, "relabeling changed loglik: {l0} vs {l1}");
    }

    #[test]
    fn opg_shape_properties() {
        // T = 1: rank <= 1 (static model, since the filter needs T > p + q)
        let spec0 = SvarmaSpec::new(
            2,
            0,
            0,
            vec![ComponentDensity::Laplace, ComponentDensity::Laplace],
        )
        .unwrap();
        let theta0 = ThetaVector {
            pi2: DVector::zeros(0),
            pi3: DVector::zeros(0),
            beta: DVector::from_vec(vec![0.4, -0.1]),
            sigma: dvector![1.0, 0.8],
            lambda: DVector::zeros(0),
        };
        let y = DMatrix::from_row_slice(1, 2, &[0.7, -0.3]);
        let b_t = opg(&spec0, &theta0, &y).unwrap();
        let sv = b_t.singular_values();
        assert!(sv.iter().skip(1).all(|&s| s < 1e-12 * sv[0].max(1.0)));

        // PSD by construction
        let spec = scalar_spec(1, 0, ComponentDensity::Laplace);
        let theta = ThetaVector {
            pi2: dvector![0.5],
            pi3: DVector::zeros(0),
            beta: DVector::zeros(0),
            sigma: dvector![1.0],
            lambda: DVector::zeros(0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let path = crate::filter::simulate(&spec, &theta, 300, 100, &mut rng).unwrap();
        let b_t = opg(&spec, &theta, &path.y).unwrap();
        let eig = b_t.symmetric_eigen();
        assert!(eig.eigenvalues.min() > -1e-12);
    }

    #[test]
    fn gaussian_sigma_hessian_entry() {
        // scalar Gaussian at y=0, sigma=1: d^2 l / d sigma^2 = +1
        let spec = scalar_spec(0, 0, ComponentDensity::Gaussian);
        let theta = ThetaVector {
            pi2: DVector::zeros(0),
            pi3: DVector::zeros(0),
            beta: DVector::zeros(0),
            sigma: dvector![1.0],
            lambda: DVector::zeros(0),
        };
        let y = DMatrix::from_element(1, 1, 0.0);
        let h = hessian(&spec, &theta, &y, 1e-5).unwrap();
        assert!((h[(0, 0)] - 1.0).abs() < 1e-8, "sigma-sigma entry {}", h[(0, 0)]);
    }

    #[test]
    fn hessian_symmetry_on_smooth_fixture() {
        let spec = SvarmaSpec::new(
            2,
            1,
            1,
            vec![ComponentDensity::StudentT { nu: 6.0 }, ComponentDensity::StudentT { nu: 7.0 }],
        )
        .unwrap();
        let theta = ThetaVector {
            pi2: DVector::from_vec(vec![0.4, 0.1, -0.2, 0.3]),
            pi3: DVector::from_vec(vec![0.2, -0.1, 0.05, 0.25]),
            beta: DVector::from_vec(vec![0.5, -0.3]),
            sigma: dvector![1.0, 0.7],
            lambda: dvector![6.0, 7.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let path = crate::filter::simulate(&spec, &theta, 250, 100, &mut rng).unwrap();
        let asym = hessian_asymmetry(&spec, &theta, &path.y, 1e-5).unwrap();
        assert!(asym < 1e-4, "asymmetry {asym}");

        // negative semidefinite near an optimum is checked in the estimate tests;
        // here just confirm the sigma block has negative curvature at truth-ish points
        let h = hessian(&spec, &theta, &path.y, 1e-5).unwrap();
        let o = spec.block_offsets();
        assert!(h[(o[3], o[3])] < 0.0);
    }

    #[test]
    fn loglik_peaks_at_the_truth_for_large_samples() {
        let spec = SvarmaSpec::new(
            2,
            1,
            0,
            vec![ComponentDensity::Laplace, ComponentDensity::Laplace],
        )
        .unwrap();
        let theta = ThetaVector {
            pi2: DVector::from_vec(vec![0.5, 0.1, -0.2, 0.4]),
            pi3: DVector::zeros(0),
            beta: DVector::from_vec(vec![0.3, -0.2]),
            sigma: dvector![1.0, 0.8],
            lambda: DVector::zeros(0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let path = crate::filter::simulate(&spec, &theta, 20_000, 500, &mut rng).unwrap();
        let l0 = loglik(&spec, &theta, &path.y);
        let mut pert_rng = StdRng::seed_from_u64(3);
        for _ in 0..5 {
            let mut packed = theta.pack();
            for v in packed.iter_mut() {
                *v += pert_rng.gen_range(-0.08..0.08);
            }
            let cand = ThetaVector::unpack(&spec, &packed).unwrap();
            if !crate::model::validate(&spec, &cand, 1e-8).is_empty() {
                continue;
            }
            let l1 = loglik(&spec, &cand, &path.y);
            assert!(l0 > l1, "perturbed point beat the truth: {l0} vs {l1}");
        }
    }

    #[test]
    fn cov_methods_agree_on_smooth_model() {
        // OPG and Hessian covariances estimate the same object; on a smooth
        // (Student-t) design at T = 10^4 they agree to well within 25%
        let spec = SvarmaSpec::new(
            2,
            1,
            0,
            vec![ComponentDensity::StudentT { nu: 6.0 }, ComponentDensity::StudentT { nu: 6.0 }],
        )
        .unwrap();
        let theta = ThetaVector {
            pi2: DVector::from_vec(vec![0.5, 0.1, -0.2, 0.4]),
            pi3: DVector::zeros(0),
            beta: DVector::from_vec(vec![0.3, -0.2]),
            sigma: dvector![1.0, 0.8],
            lambda: dvector![6.0, 6.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let path = crate::filter::simulate(&spec, &theta, 10_000, 500, &mut rng).unwrap();
        let (cov_o, se_o) = asy_cov(&spec, &theta, &path.y, CovMethod::Opg).unwrap();
        let (cov_h, se_h) = asy_cov(&spec, &theta, &path.y, CovMethod::Hessian).unwrap();
        for k in 0..se_o.len() {
            let rel = (se_o[k] - se_h[k]).abs() / se_o[k];
            assert!(rel < 0.25, "se[{k}] disagreement {rel}");
        }
        let frob = (&cov_o - &cov_h).norm() / cov_o.norm();
        assert!(frob < 0.25, "covariance Frobenius disagreement {frob}");
        // PSD output
        assert!(cov_o.clone().symmetric_eigen().eigenvalues.min() > -1e-12);
    }

    #[test]
    fn score_shrinks_like_sqrt_t() {
        let spec = scalar_spec(1, 1, ComponentDensity::Laplace);
        let theta = ThetaVector {
            pi2: dvector![0.5],
            pi3: dvector![0.3],
            beta: DVector::zeros(0),
            sigma: dvector![1.0],
            lambda: DVector::zeros(0),
        };
        let reps = 40;
        let ts = [500usize, 2000, 8000];
        let mut mean_log = Vec::new();
        for (ti, &t_len) in ts.iter().enumerate() {
            let mut acc = 0.0;
            for r in 0..reps {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + (ti * reps + r) as u64);
                let path = crate::filter::simulate(&spec, &theta, t_len, 300, &mut rng).unwrap();
                let s = score(&spec, &theta, &path.y).unwrap();
                acc += s.norm().ln();
            }
            mean_log.push(acc / reps as f64);
        }
        // slope of mean log||score|| on log T
        let xs: Vec<f64> = ts.iter().map(|&t| (t as f64).ln()).collect();
        let xbar = xs.iter().sum::<f64>() / 3.0;
        let ybar = mean_log.iter().sum::<f64>() / 3.0;
        let slope = xs
            .iter()
            .zip(&mean_log)
            .map(|(x, y)| (x - xbar) * (y - ybar))
            .sum::<f64>()
            / xs.iter().map(|x| (x - xbar) * (x - xbar)).sum::<f64>();
        assert!(
            (slope + 0.5).abs() < 0.15,
            "score norm decay slope {slope}, expected about -0.5"
        );
    }
}
