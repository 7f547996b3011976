use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::operator::LinearOperator;
use crate::sensing::DiskMask;

/// Forward differences of a masked image, one `(gx, gy)` pair per pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientField {
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl GradientField {
    /// Per-pixel 2-norm `||(Dx)_j||_2`.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.gx
            .iter()
            .zip(&self.gy)
            .map(|(a, b)| a.hypot(*b))
            .collect()
    }
}

/// Forward-difference gradient on a disk mask.
///
/// `gx_j = x(right of j) - x(j)` and `gy_j = x(below j) - x(j)`; a difference
/// whose neighbor lies outside the mask is zero. As a linear operator the
/// output is the stacked vector `[gx; gy]` of length `2N`.
#[derive(Debug, Clone)]
pub struct Gradient {
    right: Vec<Option<usize>>,
    down: Vec<Option<usize>>,
}

impl Gradient {
    pub fn new(mask: &DiskMask) -> Self {
        let (right, down) = mask
            .indices()
            .iter()
            .map(|&(r, c)| {
                let (r, c) = (r as isize, c as isize);
                (mask.index_of(r, c + 1), mask.index_of(r + 1, c))
            })
            .unzip();
        Self { right, down }
    }

    pub fn n_pixels(&self) -> usize {
        self.right.len()
    }

    pub fn right(&self) -> &[Option<usize>] {
        &self.right
    }

    pub fn down(&self) -> &[Option<usize>] {
        &self.down
    }

    /// Number of pixels with at least one in-mask forward neighbor, i.e. the
    /// largest attainable gradient sparsity.
    pub fn max_support(&self) -> usize {
        self.right
            .iter()
            .zip(&self.down)
            .filter(|(r, d)| r.is_some() || d.is_some())
            .count()
    }

    pub fn apply(&self, x: &[f64]) -> Result<GradientField> {
        check_len(self.n_pixels(), x.len())?;
        let n = self.n_pixels();
        let mut out = vec![0.0; 2 * n];
        self.apply_into(x, &mut out);
        let gy = out.split_off(n);
        Ok(GradientField { gx: out, gy })
    }

    pub fn adjoint(&self, field: &GradientField) -> Result<Vec<f64>> {
        let n = self.n_pixels();
        check_len(n, field.gx.len())?;
        check_len(n, field.gy.len())?;
        let mut stacked = field.gx.clone();
        stacked.extend_from_slice(&field.gy);
        let mut out = vec![0.0; n];
        self.apply_transpose_into(&stacked, &mut out);
        Ok(out)
    }

    pub fn tv_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(self.apply(x)?.magnitudes().iter().sum())
    }

    /// Count of pixels whose gradient magnitude exceeds `tau_zero`
    /// (default `1e-8 * max|x|`).
    pub fn sparsity(&self, x: &[f64], tau_zero: Option<f64>) -> Result<usize> {
        let tau = tau_zero.unwrap_or_else(|| default_tau(x));
        Ok(self
            .apply(x)?
            .magnitudes()
            .iter()
            .filter(|&&m| m > tau)
            .count())
    }
}

impl LinearOperator for Gradient {
    fn rows(&self) -> usize {
        2 * self.n_pixels()
    }

    fn cols(&self) -> usize {
        self.n_pixels()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n_pixels();
        let (gx, gy) = out.split_at_mut(n);
        for j in 0..n {
            gx[j] = self.right[j].map_or(0.0, |k| x[k] - x[j]);
            gy[j] = self.down[j].map_or(0.0, |k| x[k] - x[j]);
        }
    }

    fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        let n = self.n_pixels();
        let (gx, gy) = y.split_at(n);
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            if let Some(k) = self.right[j] {
                out[k] += gx[j];
                out[j] -= gx[j];
            }
            if let Some(k) = self.down[j] {
                out[k] += gy[j];
                out[j] -= gy[j];
            }
        }
    }
}

pub(crate) fn default_tau(x: &[f64]) -> f64 {
    1e-8 * x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Count of pixels with `|x_j| > tau_zero` (default `1e-8 * max|x|`).
pub fn pixel_sparsity(x: &[f64], tau_zero: Option<f64>) -> usize {
    let tau = tau_zero.unwrap_or_else(|| default_tau(x));
    x.iter().filter(|v| v.abs() > tau).count()
}
