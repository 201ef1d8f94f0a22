//! File-based run configuration shared by all subcommands.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use svarma::estimate::FitOptions;
use svarma::irf::ShockSize;
use svarma::model::ModelConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub model: ModelConfig,
    #[serde(default)]
    pub options: FitOptionsConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub transform: Option<TransformConfig>,
    #[serde(default)]
    pub irf: IrfConfig,
    #[serde(default)]
    pub select_order: SelectOrderConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

/// Mirror of FitOptions with full serde defaults, so configs can omit any field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptionsConfig {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub sigma_min: f64,
    pub seed: u64,
    pub scheme: char,
    pub restarts: usize,
    pub hessian_cov: bool,
}

impl Default for FitOptionsConfig {
    fn default() -> Self {
        let o = FitOptions::default();
        Self {
            max_iter: o.max_iter,
            grad_tol: o.grad_tol,
            sigma_min: o.sigma_min,
            seed: o.seed,
            scheme: o.scheme,
            restarts: o.restarts,
            hessian_cov: o.hessian_cov,
        }
    }
}

impl FitOptionsConfig {
    pub fn to_options(&self) -> FitOptions {
        FitOptions {
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
            sigma_min: self.sigma_min,
            seed: self.seed,
            scheme: self.scheme,
            restarts: self.restarts,
            hessian_cov: self.hessian_cov,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub t: usize,
    pub burnin: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { t: 500, burnin: 500 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IrfConfig {
    pub horizon: usize,
    pub bootstrap: usize,
    pub level: f64,
    pub shock_size: ShockSize,
}

impl Default for IrfConfig {
    fn default() -> Self {
        Self { horizon: 20, bootstrap: 1000, level: 0.95, shock_size: ShockSize::OneSd }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectOrderConfig {
    pub p_max: usize,
    pub q_max: usize,
}

impl Default for SelectOrderConfig {
    fn default() -> Self {
        Self { p_max: 2, q_max: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsConfig {
    pub lags: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { lags: 12 }
    }
}

/// Per-column data preparation applied before modeling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformConfig {
    #[serde(default)]
    pub transforms: Vec<TransformStep>,
    /// Names of the columns that enter the model, in order.
    pub series: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TransformStep {
    /// name = input_t - input_{t-lag}
    Diff {
        name: String,
        input: String,
        #[serde(default = "default_lag")]
        lag: usize,
    },
    /// name = ln(input)
    Log { name: String, input: String },
    /// name = sum_w weight * column
    Lincomb {
        name: String,
        inputs: BTreeMap<String, f64>,
    },
}

fn default_lag() -> usize {
    1
}
