use serde::{Deserialize, Serialize};

use super::GeometryKind;
use crate::error::{check_len, Result};
use crate::operator::norm2;
use crate::phantoms::Gradient;
use crate::sensing::DiskMask;
use crate::solvers::{check_recovery, solve_cp, ProblemKind, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub views: usize,
    /// `||x - x_orig|| / sqrt(N)`; NaN if the solve failed.
    pub image_rmse: f64,
    /// `||Ax - b|| / sqrt(m)`; NaN if the solve failed.
    pub data_rmse: f64,
    pub relative_error: f64,
    pub iterations: usize,
    pub error: Option<String>,
}

/// Reconstruct one phantom from `b = A x` at each view count.
pub fn recovery_curve(
    phantom: &[f64],
    mask: &DiskMask,
    geometry: GeometryKind,
    seed: u64,
    view_list: &[usize],
    config: &SolverConfig,
) -> Result<Vec<RecoveryRow>> {
    check_len(mask.n_pixels(), phantom.len())?;
    if view_list.is_empty() {
        return Err(crate::error::Error::InvalidArgument("view list is empty".into()));
    }
    config.validate()?;
    let gradient = (config.problem_kind == ProblemKind::TV).then(|| Gradient::new(mask));
    let n = phantom.len() as f64;
    let rows = view_list
        .iter()
        .map(|&views| {
            let level = if geometry.counts_views() {
                views
            } else {
                views * 2 * mask.n_side()
            };
            let attempt = (|| {
                let a = geometry.build(mask.n_side(), phantom.len(), level, seed)?;
                let b = a.apply(phantom)?;
                let sol = solve_cp(config, &a, &b, gradient.as_ref(), None)?;
                let diff: Vec<f64> = sol.x.iter().zip(phantom).map(|(p, q)| p - q).collect();
                let rel = check_recovery(&sol.x, phantom, config.problem_kind.default_epsilon())?;
                Ok::<_, crate::error::Error>((
                    norm2(&diff) / n.sqrt(),
                    sol.data_residual / (a.m() as f64).sqrt(),
                    rel.relative_error,
                    sol.iterations_run,
                ))
            })();
            match attempt {
                Ok((image_rmse, data_rmse, relative_error, iterations)) => RecoveryRow {
                    views,
                    image_rmse,
                    data_rmse,
                    relative_error,
                    iterations,
                    error: None,
                },
                Err(e) => RecoveryRow {
                    views,
                    image_rmse: f64::NAN,
                    data_rmse: f64::NAN,
                    relative_error: f64::NAN,
                    iterations: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(rows)
}
