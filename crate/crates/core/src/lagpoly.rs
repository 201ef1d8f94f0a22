//! Matrix lag-polynomial algebra: evaluation, determinantal roots, power-series
//! inversion, transfer functions, stability/invertibility predicates, and
//! mirroring of non-invertible MA roots.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SvarmaError};

/// Margin added to the unit circle for the strict stability/invertibility checks.
pub const DEFAULT_ROOT_MARGIN: f64 = 1e-8;

/// Band around the unit circle inside which mirroring is refused.
const UNIT_CIRCLE_BAND: f64 = 1e-6;

/// Whether lag coefficients enter with minus signs (AR side) or plus signs (MA side).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignConvention {
    /// I - c1 z - ... - cd z^d
    Ar,
    /// I + c1 z + ... + cd z^d
    Ma,
}

/// A square matrix polynomial with leading coefficient fixed to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    dim: usize,
    sign: SignConvention,
    coeffs: Vec<DMatrix<f64>>,
}

impl MatrixPolynomial {
    pub fn new(dim: usize, sign: SignConvention, coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(SvarmaError::Domain("polynomial dimension must be >= 1".into()));
        }
        for c in &coeffs {
            if c.nrows() != dim || c.ncols() != dim {
                return Err(SvarmaError::Domain(format!(
                    "coefficient is {}x{}, expected {dim}x{dim}",
                    c.nrows(),
                    c.ncols()
                )));
            }
        }
        Ok(Self { dim, sign, coeffs })
    }

    /// AR-style polynomial I - c1 z - ... - cd z^d.
    pub fn ar(dim: usize, coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::new(dim, SignConvention::Ar, coeffs)
    }

    /// MA-style polynomial I + c1 z + ... + cd z^d.
    pub fn ma(dim: usize, coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        Self::new(dim, SignConvention::Ma, coeffs)
    }

    /// Degree-zero polynomial, i.e. the identity.
    pub fn identity(dim: usize, sign: SignConvention) -> Self {
        Self { dim, sign, coeffs: Vec::new() }
    }

    /// Scalar polynomial from lag coefficients.
    pub fn scalar(sign: SignConvention, coeffs: &[f64]) -> Self {
        Self {
            dim: 1,
            sign,
            coeffs: coeffs.iter().map(|&c| DMatrix::from_element(1, 1, c)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn sign_convention(&self) -> SignConvention {
        self.sign
    }

    /// Raw lag coefficient c_i for i in 1..=degree.
    pub fn coeff(&self, i: usize) -> &DMatrix<f64> {
        &self.coeffs[i - 1]
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// Signed coefficient so that poly(z) = I + sum signed_coeff(i) z^i.
    pub fn signed_coeff(&self, i: usize) -> DMatrix<f64> {
        match self.sign {
            SignConvention::Ar => -&self.coeffs[i - 1],
            SignConvention::Ma => self.coeffs[i - 1].clone(),
        }
    }

    /// Evaluates the polynomial at a complex point.
    pub fn eval(&self, z: Complex64) -> DMatrix<Complex64> {
        let n = self.dim;
        let mut out = DMatrix::<Complex64>::identity(n, n);
        let mut zp = Complex64::new(1.0, 0.0);
        let s = match self.sign {
            SignConvention::Ar => -1.0,
            SignConvention::Ma => 1.0,
        };
        for c in &self.coeffs {
            zp *= z;
            for r in 0..n {
                for k in 0..n {
                    out[(r, k)] += zp * (s * c[(r, k)]);
                }
            }
        }
        out
    }

    /// Coefficients of the scalar polynomial det(poly(z)), constant term first.
    ///
    /// Evaluates the determinant on the n*d+1 roots of unity and inverts the DFT;
    /// exact for a degree n*d polynomial and stable for the small dimensions this
    /// crate targets.
    pub fn det_coeffs(&self) -> Result<Vec<f64>> {
        let m = self.dim * self.degree() + 1;
        let mut values = Vec::with_capacity(m);
        for j in 0..m {
            let angle = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            let z = Complex64::from_polar(1.0, angle);
            let det = self.eval(z).lu().determinant();
            if !det.re.is_finite() || !det.im.is_finite() {
                return Err(SvarmaError::SingularPolynomial);
            }
            values.push(det);
        }
        let mut coeffs = Vec::with_capacity(m);
        for k in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in values.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (j * k) as f64 / m as f64;
                acc += v * Complex64::from_polar(1.0, angle);
            }
            coeffs.push(acc.re / m as f64);
        }
        Ok(coeffs)
    }

    /// All roots of det(poly(z)), with multiplicity.
    ///
    /// Computed as reciprocals of the nonzero eigenvalues of the companion matrix
    /// of the reversed determinant polynomial; the reversed polynomial is monic
    /// because det(poly(0)) = 1, and degree deficiency shows up as zero
    /// eigenvalues which are dropped.
    pub fn det_roots(&self) -> Result<Vec<Complex64>> {
        let coeffs = self.det_coeffs()?;
        let m = coeffs.len() - 1;
        if m == 0 {
            return Ok(Vec::new());
        }
        // Companion of w^m + c1 w^{m-1} + ... + cm (reversed polynomial, c0 = 1).
        let mut comp = DMatrix::<f64>::zeros(m, m);
        for k in 1..=m {
            comp[(0, k - 1)] = -coeffs[k];
        }
        for r in 1..m {
            comp[(r, r - 1)] = 1.0;
        }
        let eigs = comp.complex_eigenvalues();
        let mut roots = Vec::new();
        for mu in eigs.iter() {
            if mu.norm() > 1e-12 {
                roots.push(1.0 / mu);
            }
        }
        Ok(roots)
    }

    /// Smallest determinantal root modulus, or +inf for a constant determinant.
    pub fn min_root_modulus(&self) -> Result<f64> {
        let roots = self.det_roots()?;
        Ok(roots.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min))
    }

    fn roots_outside_disk(&self, margin: f64) -> Result<bool> {
        Ok(self.min_root_modulus()? > 1.0 + margin)
    }

    /// True iff every determinantal root lies strictly outside the closed unit disk.
    pub fn is_stable_with_margin(&self, margin: f64) -> Result<bool> {
        self.roots_outside_disk(margin)
    }

    pub fn is_stable(&self) -> Result<bool> {
        self.roots_outside_disk(DEFAULT_ROOT_MARGIN)
    }

    /// Same predicate as stability, read on the MA side.
    pub fn is_invertible_with_margin(&self, margin: f64) -> Result<bool> {
        self.roots_outside_disk(margin)
    }

    pub fn is_invertible(&self) -> Result<bool> {
        self.roots_outside_disk(DEFAULT_ROOT_MARGIN)
    }

    /// First k+1 coefficients of poly(z)^{-1} as a power series around zero.
    pub fn power_series_inverse(&self, k: usize) -> Result<Vec<DMatrix<f64>>> {
        if !self.is_invertible()? {
            return Err(SvarmaError::NonInvertiblePolynomial);
        }
        Ok(self.power_series_inverse_unchecked(k))
    }

    /// The inversion recursion itself, without the root check. The score
    /// recursions call this on every trial point; validity is the caller's
    /// responsibility there.
    pub(crate) fn power_series_inverse_unchecked(&self, k: usize) -> Vec<DMatrix<f64>> {
        let n = self.dim;
        let d = self.degree();
        let mut psi = Vec::with_capacity(k + 1);
        psi.push(DMatrix::<f64>::identity(n, n));
        for j in 1..=k {
            let mut acc = DMatrix::<f64>::zeros(n, n);
            for i in 1..=d.min(j) {
                acc -= self.signed_coeff(i) * &psi[j - i];
            }
            psi.push(acc);
        }
        psi
    }

    /// First k+1 coefficients of the transfer function a(z)^{-1} b(z).
    pub fn transfer_coeffs(a: &Self, b: &Self, k: usize) -> Result<Vec<DMatrix<f64>>> {
        if a.dim != b.dim {
            return Err(SvarmaError::Domain("transfer operands must share dimension".into()));
        }
        if !a.is_stable()? {
            return Err(SvarmaError::UnstablePolynomial);
        }
        let n = a.dim;
        let zero = DMatrix::<f64>::zeros(n, n);
        // a(z) k(z) = b(z): k_j = b~_j - sum_{i=1..min(j,da)} a~_i k_{j-i},
        // with ~ the signed coefficients (leading terms I).
        let mut ks: Vec<DMatrix<f64>> = Vec::with_capacity(k + 1);
        ks.push(DMatrix::identity(n, n));
        for j in 1..=k {
            let mut acc = if j <= b.degree() { b.signed_coeff(j) } else { zero.clone() };
            for i in 1..=a.degree().min(j) {
                acc -= a.signed_coeff(i) * &ks[j - i];
            }
            ks.push(acc);
        }
        Ok(ks)
    }

    /// Numerical left-coprimeness surrogate: at every common determinantal root
    /// z* of a and b, the block [a(z*), b(z*)] must have numerical rank n.
    pub fn left_coprime_check(a: &Self, b: &Self, tol: f64) -> Result<bool> {
        let roots_a = a.det_roots()?;
        let roots_b = b.det_roots()?;
        let n = a.dim;
        for za in &roots_a {
            for zb in &roots_b {
                if (za - zb).norm() > 1e-4 * (1.0 + za.norm()) {
                    continue;
                }
                let zm = 0.5 * (za + zb);
                let ea = a.eval(zm);
                let eb = b.eval(zm);
                let mut stack = DMatrix::<Complex64>::zeros(n, 2 * n);
                stack.view_mut((0, 0), (n, n)).copy_from(&ea);
                stack.view_mut((0, n), (n, n)).copy_from(&eb);
                if smallest_singular_value(&stack) <= tol {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Replaces determinantal roots inside the unit disk by their reciprocals
    /// while preserving the implied MA autocovariances.
    ///
    /// The invertible factor is found by running the multivariate innovations
    /// recursion on the MA(q) autocovariances until the innovation covariance
    /// converges; the limiting coefficients are the miniphase factor.
    pub fn mirror_noninvertible_roots(
        &self,
        cov: &DMatrix<f64>,
    ) -> Result<(Self, DMatrix<f64>)> {
        let n = self.dim;
        if cov.nrows() != n || cov.ncols() != n {
            return Err(SvarmaError::Domain("covariance dimension mismatch".into()));
        }
        if self.is_invertible()? {
            return Ok((self.clone(), cov.clone()));
        }
        for z in self.det_roots()? {
            if (z.norm() - 1.0).abs() <= UNIT_CIRCLE_BAND {
                return Err(SvarmaError::NotFactorizable { modulus: z.norm() });
            }
        }
        let q = self.degree();
        let gammas = self.ma_autocovariances(cov);
        let (thetas, v) = innovations_fixed_point(&gammas, n, q)?;
        let signed = match self.sign {
            SignConvention::Ma => thetas,
            SignConvention::Ar => thetas.into_iter().map(|t| -t).collect(),
        };
        let mirrored = Self { dim: n, sign: self.sign, coeffs: signed };
        Ok((mirrored, v))
    }

    /// Autocovariances gamma_0..gamma_q of the MA process driven through this
    /// polynomial with innovation covariance `cov`.
    pub fn ma_autocovariances(&self, cov: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let n = self.dim;
        let q = self.degree();
        let mut signed: Vec<DMatrix<f64>> = Vec::with_capacity(q + 1);
        signed.push(DMatrix::identity(n, n));
        for i in 1..=q {
            signed.push(self.signed_coeff(i));
        }
        (0..=q)
            .map(|s| {
                let mut g = DMatrix::<f64>::zeros(n, n);
                for j in 0..=(q - s) {
                    g += &signed[j + s] * cov * signed[j].transpose();
                }
                g
            })
            .collect()
    }
}

/// Smallest singular value of a complex matrix via its real embedding
/// [[Re, -Im], [Im, Re]], whose singular values are those of the complex
/// matrix with doubled multiplicity.
pub(crate) fn smallest_singular_value(m: &DMatrix<Complex64>) -> f64 {
    let (r, c) = (m.nrows(), m.ncols());
    let mut real = DMatrix::<f64>::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let v = m[(i, j)];
            real[(i, j)] = v.re;
            real[(i, j + c)] = -v.im;
            real[(i + r, j)] = v.im;
            real[(i + r, j + c)] = v.re;
        }
    }
    let sv = real.singular_values();
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Multivariate innovations recursion specialized to an MA(q) autocovariance
/// sequence. Returns the limiting (Theta_1..Theta_q, V).
fn innovations_fixed_point(
    gammas: &[DMatrix<f64>],
    n: usize,
    q: usize,
) -> Result<(Vec<DMatrix<f64>>, DMatrix<f64>)> {
    let max_iter = 100_000usize;
    let zero = DMatrix::<f64>::zeros(n, n);
    let gamma = |s: usize| -> DMatrix<f64> {
        if s > q {
            zero.clone()
        } else {
            gammas[s].clone()
        }
    };
    // Theta_{k,h} for step k at lag h; zero outside the stored band.
    let theta_of = |rows: &[Vec<DMatrix<f64>>], k: usize, h: usize| -> DMatrix<f64> {
        if h == 0 || h > q || k == 0 || k > rows.len() {
            DMatrix::zeros(n, n)
        } else {
            rows[k - 1][h - 1].clone()
        }
    };

    let mut vs: Vec<DMatrix<f64>> = vec![gammas[0].clone()];
    let mut rows: Vec<Vec<DMatrix<f64>>> = Vec::new();

    // Zero autocovariances at some lags can make consecutive iterates coincide
    // long before the fixed point, so convergence needs a sustained streak.
    let mut quiet_steps = 0usize;

    for t in 1..=max_iter {
        let mut row: Vec<DMatrix<f64>> = vec![zero.clone(); q];
        let k_lo = t.saturating_sub(q);
        // Ascending k fills the row from the largest lag down, so the
        // within-row references (lag t - j > t - k) are already available.
        for k in k_lo..t {
            let h = t - k;
            let mut acc = gamma(h);
            for j in k_lo..k {
                let th_t = &row[t - j - 1];
                let th_k = theta_of(&rows, k, k - j);
                acc -= th_t * &vs[j] * th_k.transpose();
            }
            // Theta_{t,h} = acc * vs[k]^{-1}
            let sol = vs[k]
                .transpose()
                .lu()
                .solve(&acc.transpose())
                .ok_or_else(|| SvarmaError::Domain("singular innovation covariance".into()))?;
            row[h - 1] = sol.transpose();
        }
        let mut v = gamma(0);
        for j in k_lo..t {
            let th = &row[t - j - 1];
            v -= th * &vs[j] * th.transpose();
        }

        let quiet = t > q && {
            let dv = (&v - vs.last().unwrap()).norm() / v.norm().max(1e-300);
            let prev = rows.last().unwrap();
            let dth = row
                .iter()
                .zip(prev.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            dv < 1e-14 && dth < 1e-12
        };
        quiet_steps = if quiet { quiet_steps + 1 } else { 0 };

        vs.push(v.clone());
        rows.push(row.clone());

        if quiet_steps > q + 1 {
            return Ok((row, v));
        }
    }
    Err(SvarmaError::Domain(
        "innovations recursion did not converge; roots too close to the unit circle".into(),
    ))
}
