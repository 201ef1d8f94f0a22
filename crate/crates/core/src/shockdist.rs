//! Standardized component shock densities and their derivative stack.
//!
//! Every family is normalized to zero mean and unit variance, so a shock with
//! scale sigma_i is sigma_i times a draw from one of these densities. The
//! derivative accessors return log-density derivatives: e_x = f_x/f,
//! e_xx = d e_x / dx, and the lambda counterparts for parametric families.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Result, SvarmaError};

/// Hard lower bound for the Student-t degrees of freedom; keeps the
/// unit-variance standardization well-defined.
pub const STUDENT_T_NU_MIN: f64 = 2.1;

const LN_2PI: f64 = 1.8378770664093453; // ln(2*pi)
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// One shock's standardized density family.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentDensity {
    Gaussian,
    Laplace,
    /// Unit-variance Student-t with nu > 2 degrees of freedom.
    StudentT { nu: f64 },
}

/// Serialized form used in model configs: {"family": "...", "lambda": [...]}.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DensityConfig {
    pub family: String,
    #[serde(default)]
    pub lambda: Vec<f64>,
}

impl ComponentDensity {
    pub fn from_config(cfg: &DensityConfig) -> Result<Self> {
        match cfg.family.as_str() {
            "gaussian" => {
                if !cfg.lambda.is_empty() {
                    return Err(SvarmaError::Domain("gaussian takes no lambda".into()));
                }
                Ok(Self::Gaussian)
            }
            "laplace" => {
                if !cfg.lambda.is_empty() {
                    return Err(SvarmaError::Domain("laplace takes no lambda".into()));
                }
                Ok(Self::Laplace)
            }
            "student_t" => {
                if cfg.lambda.len() != 1 {
                    return Err(SvarmaError::Domain("student_t takes lambda = [nu]".into()));
                }
                let d = Self::StudentT { nu: cfg.lambda[0] };
                d.check_lambda()?;
                Ok(d)
            }
            other => Err(SvarmaError::Domain(format!("unknown density family '{other}'"))),
        }
    }

    pub fn to_config(&self) -> DensityConfig {
        match self {
            Self::Gaussian => DensityConfig { family: "gaussian".into(), lambda: vec![] },
            Self::Laplace => DensityConfig { family: "laplace".into(), lambda: vec![] },
            Self::StudentT { nu } => {
                DensityConfig { family: "student_t".into(), lambda: vec![*nu] }
            }
        }
    }

    /// Number of family parameters d_i.
    pub fn lambda_dim(&self) -> usize {
        match self {
            Self::Gaussian | Self::Laplace => 0,
            Self::StudentT { .. } => 1,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Self::Gaussian)
    }

    /// Replaces the family parameters with the entries of `lambda`.
    pub fn with_lambda(&self, lambda: &[f64]) -> Self {
        match self {
            Self::Gaussian => Self::Gaussian,
            Self::Laplace => Self::Laplace,
            Self::StudentT { .. } => Self::StudentT { nu: lambda[0] },
        }
    }

    pub fn lambda(&self) -> Vec<f64> {
        match self {
            Self::Gaussian | Self::Laplace => vec![],
            Self::StudentT { nu } => vec![*nu],
        }
    }

    pub fn check_lambda(&self) -> Result<()> {
        match self {
            Self::StudentT { nu } if !(*nu >= STUDENT_T_NU_MIN && nu.is_finite()) => {
                Err(SvarmaError::Domain(format!(
                    "student_t nu = {nu} outside [{STUDENT_T_NU_MIN}, inf)"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Lower box bounds for the family parameters, used by the optimizer.
    pub fn lambda_lower_bounds(&self) -> Vec<f64> {
        match self {
            Self::Gaussian | Self::Laplace => vec![],
            Self::StudentT { .. } => vec![STUDENT_T_NU_MIN],
        }
    }

    /// log f(x; lambda)
    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian => -0.5 * x * x - 0.5 * LN_2PI,
            Self::Laplace => -SQRT_2 * x.abs() - 0.5 * std::f64::consts::LN_2,
            Self::StudentT { nu } => {
                let v = *nu;
                ln_gamma(0.5 * (v + 1.0))
                    - ln_gamma(0.5 * v)
                    - 0.5 * (std::f64::consts::PI * (v - 2.0)).ln()
                    - 0.5 * (v + 1.0) * (1.0 + x * x / (v - 2.0)).ln()
            }
        }
    }

    /// e_x = f_x / f. For the Laplace kink at 0 the convention e_x(0) = 0 is used.
    pub fn e_x(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian => -x,
            Self::Laplace => {
                if x == 0.0 {
                    0.0
                } else {
                    -SQRT_2 * x.signum()
                }
            }
            Self::StudentT { nu } => -(nu + 1.0) * x / (nu - 2.0 + x * x),
        }
    }

    /// e_xx = d e_x / dx = (f_xx f - f_x^2) / f^2. Laplace convention: 0 at the kink.
    pub fn e_xx(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian => -1.0,
            Self::Laplace => 0.0,
            Self::StudentT { nu } => {
                let w = nu - 2.0 + x * x;
                -(nu + 1.0) * (nu - 2.0 - x * x) / (w * w)
            }
        }
    }

    /// e_lambda = d log f / d lambda; empty when the family has no parameters.
    pub fn e_lambda(&self, x: f64) -> Vec<f64> {
        match self {
            Self::Gaussian | Self::Laplace => vec![],
            Self::StudentT { nu } => {
                let v = *nu;
                let w = v - 2.0 + x * x;
                let val = 0.5 * digamma(0.5 * (v + 1.0))
                    - 0.5 * digamma(0.5 * v)
                    - 0.5 / (v - 2.0)
                    - 0.5 * (1.0 + x * x / (v - 2.0)).ln()
                    + 0.5 * (v + 1.0) * x * x / ((v - 2.0) * w);
                vec![val]
            }
        }
    }

    /// e_xlambda = d e_x / d lambda.
    pub fn e_xlambda(&self, x: f64) -> Vec<f64> {
        match self {
            Self::Gaussian | Self::Laplace => vec![],
            Self::StudentT { nu } => {
                let w = nu - 2.0 + x * x;
                vec![x * (3.0 - x * x) / (w * w)]
            }
        }
    }

    /// e_lambdalambda = d e_lambda / d lambda', as a dense d_i x d_i matrix in
    /// row-major order.
    pub fn e_lambdalambda(&self, x: f64) -> Vec<f64> {
        match self {
            Self::Gaussian | Self::Laplace => vec![],
            Self::StudentT { nu } => {
                let v = *nu;
                let x2 = x * x;
                let w = v - 2.0 + x2;
                // d/dv of (v+1)/((v-2) w)
                let gprime = ((v - 2.0) * w - (v + 1.0) * (w + (v - 2.0)))
                    / ((v - 2.0) * (v - 2.0) * w * w);
                let val = 0.25 * trigamma(0.5 * (v + 1.0)) - 0.25 * trigamma(0.5 * v)
                    + 0.5 / ((v - 2.0) * (v - 2.0))
                    + 0.5 * x2 / ((v - 2.0) * w)
                    + 0.5 * x2 * gprime;
                vec![val]
            }
        }
    }

    /// One standardized draw; deterministic given the generator state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian => StandardNormal.sample(rng),
            Self::Laplace => {
                // difference of two unit exponentials, scaled to unit variance
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                (e1 - e2) / SQRT_2
            }
            Self::StudentT { nu } => {
                let t: f64 = StudentT::new(*nu).expect("nu > 2 checked").sample(rng);
                t * ((nu - 2.0) / nu).sqrt()
            }
        }
    }
}

/// Trigamma function via the recurrence psi'(x) = psi'(x+1) + 1/x^2 and the
/// asymptotic series for large arguments.
pub(crate) fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    // 1/x + 1/(2x^2) + sum B_{2k} / x^{2k+1}
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv * (1.0 + inv * (0.5 + inv * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0)))))
}
