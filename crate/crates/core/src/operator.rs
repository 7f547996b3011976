//! Matrix-free linear operators and spectral-norm estimation.

use crate::error::{check_len, Error, Result};

/// A real linear map `R^cols -> R^rows` with its exact adjoint.
pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `out = A x`
    fn apply_into(&self, x: &[f64], out: &mut [f64]);
    /// `out = A^T y`
    fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]);
}

/// Identity on `R^n`; the sparsifying operator for image-domain sparsity.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn rows(&self) -> usize {
        self.0
    }
    fn cols(&self) -> usize {
        self.0
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
}

/// The vertically stacked operator `(A; weight * S)`, never materialized.
pub struct Stacked<'a> {
    pub top: &'a dyn LinearOperator,
    pub bottom: &'a dyn LinearOperator,
    pub weight: f64,
}

impl LinearOperator for Stacked<'_> {
    fn rows(&self) -> usize {
        self.top.rows() + self.bottom.rows()
    }
    fn cols(&self) -> usize {
        self.top.cols()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (a, b) = out.split_at_mut(self.top.rows());
        self.top.apply_into(x, a);
        self.bottom.apply_into(x, b);
        b.iter_mut().for_each(|v| *v *= self.weight);
    }
    fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        let (a, b) = y.split_at(self.top.rows());
        self.top.apply_transpose_into(a, out);
        let mut tmp = vec![0.0; out.len()];
        self.bottom.apply_transpose_into(b, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o += self.weight * t;
        }
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn apply(op: &dyn LinearOperator, x: &[f64]) -> Result<Vec<f64>> {
    check_len(op.cols(), x.len())?;
    let mut out = vec![0.0; op.rows()];
    op.apply_into(x, &mut out);
    Ok(out)
}

pub fn apply_transpose(op: &dyn LinearOperator, y: &[f64]) -> Result<Vec<f64>> {
    check_len(op.rows(), y.len())?;
    let mut out = vec![0.0; op.cols()];
    op.apply_transpose_into(y, &mut out);
    Ok(out)
}

pub const DEFAULT_POWER_MAX_ITER: usize = 20_000;

/// Largest singular value of `op` by power iteration on `A^T A`.
///
/// Stops when the Rayleigh-quotient estimate of `||A||^2` changes by less
/// than `tol` relative between consecutive iterations.
pub fn spectral_norm(op: &dyn LinearOperator, tol: f64) -> Result<f64> {
    spectral_norm_with(op, tol, DEFAULT_POWER_MAX_ITER)
}

pub fn spectral_norm_with(op: &dyn LinearOperator, tol: f64, max_iter: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let n = op.cols();
    if n == 0 || op.rows() == 0 {
        return Ok(0.0);
    }
    // fixed pseudo-random start, so that no structured nullspace (e.g. the
    // constants for a gradient) swallows the initial vector
    let mut state = 0x2545_F491_4F6C_DD1Du64;
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            state = crate::rng::splitmix64(state);
            0.5 + (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect();
    let mut av = vec![0.0; op.rows()];
    let mut w = vec![0.0; n];
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut estimate = 0.0;
    for _ in 0..max_iter {
        op.apply_into(&v, &mut av);
        let rayleigh = dot(&av, &av);
        op.apply_transpose_into(&av, &mut w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        let change = (rayleigh - estimate).abs();
        estimate = rayleigh;
        if change <= tol * rayleigh {
            return Ok(rayleigh.sqrt());
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        estimate: estimate.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Diag(Vec<f64>);

    impl LinearOperator for Diag {
        fn rows(&self) -> usize {
            self.0.len()
        }
        fn cols(&self) -> usize {
            self.0.len()
        }
        fn apply_into(&self, x: &[f64], out: &mut [f64]) {
            for ((o, d), xi) in out.iter_mut().zip(&self.0).zip(x) {
                *o = d * xi;
            }
        }
        fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
            self.apply_into(y, out)
        }
    }

    #[test]
    fn identity_has_unit_norm() {
        let n = spectral_norm(&Identity(17), 1e-10).unwrap();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_norm() {
        let n = spectral_norm(&Diag(vec![3.0, 1.0]), 1e-12).unwrap();
        assert!((n - 3.0).abs() < 1e-6);
    }

    #[test]
    fn stacked_of_identities() {
        let id = Identity(5);
        let st = Stacked {
            top: &id,
            bottom: &id,
            weight: 2.0,
        };
        let n = spectral_norm(&st, 1e-12).unwrap();
        assert!((n - 5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn reports_non_convergence() {
        let err = spectral_norm_with(&Diag(vec![1.0, 0.999999, 0.5]), 1e-15, 3).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 3, .. }));
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(spectral_norm(&Identity(2), 0.0).is_err());
    }
}
