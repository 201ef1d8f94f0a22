//! Parameter space, theta packing, the H selection matrix, model validation,
//! and the identification schemes that pick one representative from the
//! signed-permutation-and-scaling class of B.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SvarmaError};
use crate::lagpoly::{MatrixPolynomial, SignConvention};
use crate::shockdist::{ComponentDensity, DensityConfig};

/// Strictness of the dominance/sign decisions inside the normalization schemes.
const SCHEME_TIE_TOL: f64 = 1e-10;

/// Model shape: dimension, lag orders, and the shock density families.
#[derive(Debug, Clone, PartialEq)]
pub struct SvarmaSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub densities: Vec<ComponentDensity>,
}

/// Serialized model config: {n, p, q, densities[], theta{...}?}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub densities: Vec<DensityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaConfig>,
}

/// Serialized theta in structured block form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaConfig {
    pub pi2: Vec<f64>,
    pub pi3: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
}

impl SvarmaSpec {
    pub fn new(n: usize, p: usize, q: usize, densities: Vec<ComponentDensity>) -> Result<Self> {
        if n == 0 {
            return Err(SvarmaError::Domain("model dimension must be >= 1".into()));
        }
        if densities.len() != n {
            return Err(SvarmaError::Domain(format!(
                "expected {n} densities, got {}",
                densities.len()
            )));
        }
        let gaussians = densities.iter().filter(|d| d.is_gaussian()).count();
        if gaussians > 1 {
            return Err(SvarmaError::Domain(format!(
                "at most one Gaussian component is allowed, got {gaussians}"
            )));
        }
        for d in &densities {
            d.check_lambda()?;
        }
        Ok(Self { n, p, q, densities })
    }

    pub fn from_config(cfg: &ModelConfig) -> Result<Self> {
        let densities = cfg
            .densities
            .iter()
            .map(ComponentDensity::from_config)
            .collect::<Result<Vec<_>>>()?;
        Self::new(cfg.n, cfg.p, cfg.q, densities)
    }

    /// Total length of the lambda block.
    pub fn lambda_dim(&self) -> usize {
        self.densities.iter().map(|d| d.lambda_dim()).sum()
    }

    /// Length of the packed theta vector.
    pub fn theta_dim(&self) -> usize {
        let n = self.n;
        n * n * self.p + n * n * self.q + n * (n - 1) + n + self.lambda_dim()
    }

    /// Offsets of the (pi2, pi3, beta, sigma, lambda) blocks in packed order.
    pub fn block_offsets(&self) -> [usize; 6] {
        let n = self.n;
        let o0 = 0;
        let o1 = o0 + n * n * self.p;
        let o2 = o1 + n * n * self.q;
        let o3 = o2 + n * (n - 1);
        let o4 = o3 + n;
        let o5 = o4 + self.lambda_dim();
        [o0, o1, o2, o3, o4, o5]
    }

    /// Per-component density with its lambda taken from a packed lambda block.
    pub fn density_at(&self, i: usize, lambda: &[f64]) -> ComponentDensity {
        let mut off = 0;
        for d in self.densities.iter().take(i) {
            off += d.lambda_dim();
        }
        let di = self.densities[i].lambda_dim();
        self.densities[i].with_lambda(&lambda[off..off + di])
    }

    /// Start offset of component i inside the lambda block.
    pub fn lambda_offset(&self, i: usize) -> usize {
        self.densities.iter().take(i).map(|d| d.lambda_dim()).sum()
    }
}

/// The packed parameter point theta = (pi2, pi3, beta, sigma, lambda).
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector {
    pub pi2: DVector<f64>,
    pub pi3: DVector<f64>,
    pub beta: DVector<f64>,
    pub sigma: DVector<f64>,
    pub lambda: DVector<f64>,
}

impl ThetaVector {
    /// Packs the blocks into one vector, ordered (pi2, pi3, beta, sigma, lambda).
    pub fn pack(&self) -> DVector<f64> {
        let len =
            self.pi2.len() + self.pi3.len() + self.beta.len() + self.sigma.len() + self.lambda.len();
        let mut out = DVector::zeros(len);
        let mut k = 0;
        for block in [&self.pi2, &self.pi3, &self.beta, &self.sigma, &self.lambda] {
            out.rows_mut(k, block.len()).copy_from(block);
            k += block.len();
        }
        out
    }

    /// Inverse of `pack` for a given spec.
    pub fn unpack(spec: &SvarmaSpec, v: &DVector<f64>) -> Result<Self> {
        if v.len() != spec.theta_dim() {
            return Err(SvarmaError::InvalidTheta(format!(
                "packed theta has length {}, expected {}",
                v.len(),
                spec.theta_dim()
            )));
        }
        let o = spec.block_offsets();
        Ok(Self {
            pi2: v.rows(o[0], o[1] - o[0]).into_owned(),
            pi3: v.rows(o[1], o[2] - o[1]).into_owned(),
            beta: v.rows(o[2], o[3] - o[2]).into_owned(),
            sigma: v.rows(o[3], o[4] - o[3]).into_owned(),
            lambda: v.rows(o[4], o[5] - o[4]).into_owned(),
        })
    }

    pub fn from_config(spec: &SvarmaSpec, cfg: &ThetaConfig) -> Result<Self> {
        let n = spec.n;
        let check = |name: &str, got: usize, want: usize| -> Result<()> {
            if got != want {
                return Err(SvarmaError::InvalidTheta(format!(
                    "{name} has length {got}, expected {want}"
                )));
            }
            Ok(())
        };
        check("pi2", cfg.pi2.len(), n * n * spec.p)?;
        check("pi3", cfg.pi3.len(), n * n * spec.q)?;
        check("beta", cfg.beta.len(), n * (n - 1))?;
        check("sigma", cfg.sigma.len(), n)?;
        check("lambda", cfg.lambda.len(), spec.lambda_dim())?;
        Ok(Self {
            pi2: DVector::from_vec(cfg.pi2.clone()),
            pi3: DVector::from_vec(cfg.pi3.clone()),
            beta: DVector::from_vec(cfg.beta.clone()),
            sigma: DVector::from_vec(cfg.sigma.clone()),
            lambda: DVector::from_vec(cfg.lambda.clone()),
        })
    }

    pub fn to_config(&self) -> ThetaConfig {
        ThetaConfig {
            pi2: self.pi2.iter().cloned().collect(),
            pi3: self.pi3.iter().cloned().collect(),
            beta: self.beta.iter().cloned().collect(),
            sigma: self.sigma.iter().cloned().collect(),
            lambda: self.lambda.iter().cloned().collect(),
        }
    }

    /// AR lag matrices a_1..a_p from pi2 = vec(a_1, ..., a_p).
    pub fn ar_coeffs(&self, n: usize, p: usize) -> Vec<DMatrix<f64>> {
        unvec_lags(&self.pi2, n, p)
    }

    /// MA lag matrices b_1..b_q from pi3 = vec(b_1, ..., b_q).
    pub fn ma_coeffs(&self, n: usize, q: usize) -> Vec<DMatrix<f64>> {
        unvec_lags(&self.pi3, n, q)
    }

    pub fn ar_polynomial(&self, spec: &SvarmaSpec) -> MatrixPolynomial {
        MatrixPolynomial::new(spec.n, SignConvention::Ar, self.ar_coeffs(spec.n, spec.p))
            .expect("dimensions checked at construction")
    }

    pub fn ma_polynomial(&self, spec: &SvarmaSpec) -> MatrixPolynomial {
        MatrixPolynomial::new(spec.n, SignConvention::Ma, self.ma_coeffs(spec.n, spec.q))
            .expect("dimensions checked at construction")
    }

    /// B(beta): unit diagonal, off-diagonals from beta in column-major order.
    pub fn b_matrix(&self, n: usize) -> DMatrix<f64> {
        b_from_beta_dim(&self.beta, n)
    }

    /// Sigma as a diagonal matrix.
    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.sigma)
    }

    /// Per-component densities at this lambda.
    pub fn densities(&self, spec: &SvarmaSpec) -> Vec<ComponentDensity> {
        let lam: Vec<f64> = self.lambda.iter().cloned().collect();
        (0..spec.n).map(|i| spec.density_at(i, &lam)).collect()
    }
}

/// Splits vec(c_1, ..., c_k) into k column-major n x n matrices.
fn unvec_lags(v: &DVector<f64>, n: usize, k: usize) -> Vec<DMatrix<f64>> {
    (0..k)
        .map(|i| {
            DMatrix::from_column_slice(n, n, &v.as_slice()[i * n * n..(i + 1) * n * n])
        })
        .collect()
}

/// The n^2 x n(n-1) selection matrix H with vec(B(beta)) = H beta + vec(I_n).
///
/// Columns walk the off-diagonal slots of vec(B) in column-major order.
pub fn build_h(n: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(n * n, n * (n - 1));
    let mut col = 0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                h[(j * n + i, col)] = 1.0;
                col += 1;
            }
        }
    }
    h
}

fn b_from_beta_dim(beta: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::identity(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                b[(i, j)] = beta[k];
                k += 1;
            }
        }
    }
    b
}

/// B(beta) for a given dimension.
pub fn b_from_beta(beta: &DVector<f64>, n: usize) -> Result<DMatrix<f64>> {
    if beta.len() != n * (n - 1) {
        return Err(SvarmaError::Domain(format!(
            "beta has length {}, expected {}",
            beta.len(),
            n * (n - 1)
        )));
    }
    Ok(b_from_beta_dim(beta, n))
}

/// Off-diagonal elements of a unit-diagonal B, column-major.
pub fn beta_from_b(b: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = b.nrows();
    for i in 0..n {
        if b[(i, i)] != 1.0 {
            return Err(SvarmaError::NonUnitDiagonal { row: i, value: b[(i, i)] });
        }
    }
    let mut beta = DVector::zeros(n * (n - 1));
    let mut k = 0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                beta[k] = b[(i, j)];
                k += 1;
            }
        }
    }
    Ok(beta)
}

/// A single constraint violation found by `validate`.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Unstable { min_root_modulus: f64 },
    NonInvertible { min_root_modulus: f64 },
    EdgeRankDeficient { smallest_singular_value: f64 },
    NotLeftCoprime,
    NonPositiveSigma { index: usize, value: f64 },
    LambdaOutOfDomain { index: usize, message: String },
    SingularB { abs_det: f64 },
}

/// Checks theta against the parameter-space restrictions. Violations are data,
/// not errors; an empty list means theta is admissible.
pub fn validate(spec: &SvarmaSpec, theta: &ThetaVector, tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let a = theta.ar_polynomial(spec);
    let b = theta.ma_polynomial(spec);

    match a.min_root_modulus() {
        Ok(m) if m <= 1.0 + crate::lagpoly::DEFAULT_ROOT_MARGIN => {
            out.push(Violation::Unstable { min_root_modulus: m })
        }
        Ok(_) => {}
        Err(_) => out.push(Violation::Unstable { min_root_modulus: f64::NAN }),
    }
    match b.min_root_modulus() {
        Ok(m) if m <= 1.0 + crate::lagpoly::DEFAULT_ROOT_MARGIN => {
            out.push(Violation::NonInvertible { min_root_modulus: m })
        }
        Ok(_) => {}
        Err(_) => out.push(Violation::NonInvertible { min_root_modulus: f64::NAN }),
    }

    // full rank of the edge coefficients (a_p, b_q)
    let n = spec.n;
    let edge_blocks: Vec<&DMatrix<f64>> = [
        (spec.p > 0).then(|| a.coeff(spec.p)),
        (spec.q > 0).then(|| b.coeff(spec.q)),
    ]
    .into_iter()
    .flatten()
    .collect();
    if !edge_blocks.is_empty() {
        let mut edge = DMatrix::zeros(n, n * edge_blocks.len());
        for (k, blk) in edge_blocks.iter().enumerate() {
            edge.view_mut((0, k * n), (n, n)).copy_from(*blk);
        }
        let smin = edge.singular_values().iter().cloned().fold(f64::INFINITY, f64::min);
        if smin <= tol {
            out.push(Violation::EdgeRankDeficient { smallest_singular_value: smin });
        }
    }

    if let Ok(false) = MatrixPolynomial::left_coprime_check(&a, &b, tol) {
        out.push(Violation::NotLeftCoprime);
    }

    for (i, &s) in theta.sigma.iter().enumerate() {
        if !(s > 0.0) {
            out.push(Violation::NonPositiveSigma { index: i, value: s });
        }
    }

    let lam: Vec<f64> = theta.lambda.iter().cloned().collect();
    for i in 0..n {
        let d = spec.density_at(i, &lam);
        if let Err(e) = d.check_lambda() {
            out.push(Violation::LambdaOutOfDomain { index: i, message: e.to_string() });
        }
    }

    let bmat = b_from_beta_dim(&theta.beta, n);
    let det = bmat.lu().determinant();
    if det.abs() <= tol {
        out.push(Violation::SingularB { abs_det: det.abs() });
    }

    out
}

/// Outcome of a normalization scheme: B* = B P D with B*, the adjusted sigma*,
/// the column permutation (perm[k] = source column of output column k), and
/// the diagonal scale factors.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub b: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub perm: Vec<usize>,
    pub scale: DVector<f64>,
}

/// Scheme A: unit-norm columns, diagonal dominance against later columns,
/// then rescale so the diagonal is one.
pub fn normalize_scheme_a(b: &DMatrix<f64>, sigma: &DVector<f64>) -> Result<Normalized> {
    let (unit, norms) = unit_norm_columns(b)?;
    let perm = dominance_permutation(&unit, 'A')?;
    let n = b.nrows();
    let mut out = DMatrix::zeros(n, n);
    let mut scale = DVector::zeros(n);
    let mut sig = DVector::zeros(n);
    for k in 0..n {
        let src = perm[k];
        let diag = unit[(k, src)];
        if diag.abs() <= SCHEME_TIE_TOL {
            return Err(SvarmaError::NotNormalizable {
                scheme: 'A',
                reason: format!("zero diagonal candidate in row {k}"),
            });
        }
        // output column k = source column scaled by d_k = 1/(norm * diag)
        let d = 1.0 / (norms[src] * diag);
        for r in 0..n {
            out[(r, k)] = b[(r, src)] * d;
        }
        scale[k] = d;
        sig[k] = sigma[src] / d.abs();
    }
    Ok(Normalized { b: out, sigma: sig, perm, scale })
}

/// Scheme B: same first two steps as A, then keep unit-norm columns and make
/// the diagonal positive.
pub fn normalize_scheme_b(b: &DMatrix<f64>, sigma: &DVector<f64>) -> Result<Normalized> {
    let (unit, norms) = unit_norm_columns(b)?;
    let perm = dominance_permutation(&unit, 'B')?;
    let n = b.nrows();
    let mut out = DMatrix::zeros(n, n);
    let mut scale = DVector::zeros(n);
    let mut sig = DVector::zeros(n);
    for k in 0..n {
        let src = perm[k];
        let diag = unit[(k, src)];
        if diag.abs() <= SCHEME_TIE_TOL {
            return Err(SvarmaError::NotNormalizable {
                scheme: 'B',
                reason: format!("zero diagonal candidate in row {k}"),
            });
        }
        let d = diag.signum() / norms[src];
        for r in 0..n {
            out[(r, k)] = b[(r, src)] * d;
        }
        scale[k] = d;
        sig[k] = sigma[src] / d.abs();
    }
    Ok(Normalized { b: out, sigma: sig, perm, scale })
}

/// Scheme C: unit-norm columns, largest-|entry| element made positive, columns
/// sorted lexicographically. Total on nonsingular B up to exact ties.
pub fn normalize_scheme_c(b: &DMatrix<f64>, sigma: &DVector<f64>) -> Result<Normalized> {
    let (unit, norms) = unit_norm_columns(b)?;
    let n = b.nrows();
    // sign-fix each column
    let mut signs = vec![1.0f64; n];
    for j in 0..n {
        let mut best = 0usize;
        for r in 1..n {
            if unit[(r, j)].abs() > unit[(best, j)].abs() {
                best = r;
            }
        }
        signs[j] = if unit[(best, j)] < 0.0 { -1.0 } else { 1.0 };
    }
    let mut order: Vec<usize> = (0..n).collect();
    // Lexicographically descending over sign-fixed columns; this arrangement
    // makes the identity a fixed point of the scheme.
    let col = |j: usize, r: usize| signs[j] * unit[(r, j)];
    order.sort_by(|&ja, &jb| {
        for r in 0..n {
            let (x, y) = (col(ja, r), col(jb, r));
            if x > y {
                return std::cmp::Ordering::Less;
            }
            if x < y {
                return std::cmp::Ordering::Greater;
            }
        }
        std::cmp::Ordering::Equal
    });
    // exact-tie detection between adjacent sorted columns
    for w in order.windows(2) {
        let (ja, jb) = (w[0], w[1]);
        let max_diff = (0..n)
            .map(|r| (col(ja, r) - col(jb, r)).abs())
            .fold(0.0f64, f64::max);
        if max_diff <= SCHEME_TIE_TOL {
            return Err(SvarmaError::ColumnOrderTie);
        }
    }
    let mut out = DMatrix::zeros(n, n);
    let mut scale = DVector::zeros(n);
    let mut sig = DVector::zeros(n);
    for k in 0..n {
        let src = order[k];
        let d = signs[src] / norms[src];
        for r in 0..n {
            out[(r, k)] = b[(r, src)] * d;
        }
        scale[k] = d;
        sig[k] = sigma[src] / d.abs();
    }
    Ok(Normalized { b: out, sigma: sig, perm: order, scale })
}

pub fn normalize_scheme(
    scheme: char,
    b: &DMatrix<f64>,
    sigma: &DVector<f64>,
) -> Result<Normalized> {
    match scheme {
        'A' => normalize_scheme_a(b, sigma),
        'B' => normalize_scheme_b(b, sigma),
        'C' => normalize_scheme_c(b, sigma),
        other => Err(SvarmaError::Domain(format!("unknown scheme '{other}'"))),
    }
}

fn unit_norm_columns(b: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = b.nrows();
    if b.ncols() != n {
        return Err(SvarmaError::Domain("B must be square".into()));
    }
    let mut norms = Vec::with_capacity(n);
    let mut unit = b.clone();
    for j in 0..n {
        let norm = b.column(j).norm();
        if norm <= SCHEME_TIE_TOL {
            return Err(SvarmaError::SingularB);
        }
        for r in 0..n {
            unit[(r, j)] /= norm;
        }
        norms.push(norm);
    }
    Ok((unit, norms))
}

/// Greedy permutation placing, at each position i, the remaining column whose
/// row-i entry has the largest absolute value. This is the unique permutation
/// under which each diagonal dominates every later same-row entry; a tie at
/// any step means the scheme is undefined at this point.
fn dominance_permutation(unit: &DMatrix<f64>, scheme: char) -> Result<Vec<usize>> {
    let n = unit.nrows();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut perm = Vec::with_capacity(n);
    for i in 0..n {
        let mut vals: Vec<(usize, f64)> =
            remaining.iter().map(|&j| (j, unit[(i, j)].abs())).collect();
        vals.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        if vals.len() > 1 && (vals[0].1 - vals[1].1).abs() <= SCHEME_TIE_TOL {
            return Err(SvarmaError::NotNormalizable {
                scheme,
                reason: format!("dominance tie in row {i}"),
            });
        }
        let chosen = vals[0].0;
        perm.push(chosen);
        remaining.retain(|&j| j != chosen);
    }
    Ok(perm)
}
