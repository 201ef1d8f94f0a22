//! Column transforms: lag differences, logs, and linear combinations of named
//! columns, applied in order before series selection.

use nalgebra::DMatrix;
use svarma::filter::SamplePath;

use crate::config::{TransformConfig, TransformStep};
use crate::errors::CliError;

struct Column {
    values: Vec<f64>,
    /// rows before this index are not defined (consumed by lag differences)
    valid_from: usize,
}

/// Applies the transform steps and selects the model series. Each step may
/// reference only columns that already exist, which makes the pipeline
/// acyclic by construction.
pub fn apply(path: &SamplePath, cfg: &TransformConfig) -> Result<SamplePath, CliError> {
    let t_len = path.len();
    let mut cols: Vec<(String, Column)> = Vec::new();
    for (j, name) in path.series_names.iter().enumerate() {
        let values = (0..t_len).map(|r| path.y[(r, j)]).collect();
        cols.push((name.clone(), Column { values, valid_from: 0 }));
    }
    let find = |cols: &[(String, Column)], name: &str| -> Result<usize, CliError> {
        cols.iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| CliError::config(format!("transform references unknown column '{name}'")))
    };

    for step in &cfg.transforms {
        let (name, col) = match step {
            TransformStep::Diff { name, input, lag } => {
                if *lag == 0 || *lag >= t_len {
                    return Err(CliError::config(format!(
                        "diff lag {lag} invalid for {t_len} rows"
                    )));
                }
                let src = &cols[find(&cols, input)?].1;
                let mut values = vec![0.0; t_len];
                for t in *lag..t_len {
                    values[t] = src.values[t] - src.values[t - *lag];
                }
                (name, Column { values, valid_from: src.valid_from + lag })
            }
            TransformStep::Log { name, input } => {
                let src = &cols[find(&cols, input)?].1;
                let mut values = vec![0.0; t_len];
                for t in src.valid_from..t_len {
                    if src.values[t] <= 0.0 {
                        return Err(CliError::data(format!(
                            "log transform '{name}': non-positive value {} at row {t}",
                            src.values[t]
                        )));
                    }
                    values[t] = src.values[t].ln();
                }
                (name, Column { values, valid_from: src.valid_from })
            }
            TransformStep::Lincomb { name, inputs } => {
                if inputs.is_empty() {
                    return Err(CliError::config(format!("lincomb '{name}' has no inputs")));
                }
                let mut values = vec![0.0; t_len];
                let mut valid_from = 0;
                for (input, weight) in inputs {
                    let src = &cols[find(&cols, input)?].1;
                    valid_from = valid_from.max(src.valid_from);
                    for t in 0..t_len {
                        values[t] += weight * src.values[t];
                    }
                }
                (name, Column { values, valid_from })
            }
        };
        if cols.iter().any(|(n, _)| n == name) {
            return Err(CliError::config(format!("transform redefines column '{name}'")));
        }
        cols.push((name.clone(), col));
    }

    if cfg.series.is_empty() {
        return Err(CliError::config("transform.series must name at least one column".into()));
    }
    let mut selected = Vec::new();
    let mut start = 0usize;
    for name in &cfg.series {
        let idx = find(&cols, name)?;
        start = start.max(cols[idx].1.valid_from);
        selected.push(idx);
    }
    if start >= t_len {
        return Err(CliError::data("transforms consumed every observation".into()));
    }
    let rows = t_len - start;
    let y = DMatrix::from_fn(rows, selected.len(), |r, c| cols[selected[c]].1.values[start + r]);
    for v in y.iter() {
        if !v.is_finite() {
            return Err(CliError::data("non-finite value after transforms".into()));
        }
    }
    SamplePath::with_names(y, cfg.series.clone()).map_err(CliError::from)
}
