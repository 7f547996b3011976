use super::{l1, HistoryRecord, ProblemKind, Solution, SolverConfig};
use crate::error::{check_len, Error, Result};
use crate::operator::{norm2, spectral_norm, Identity, LinearOperator, Stacked};
use crate::phantoms::Gradient;

const NORM_TOL: f64 = 1e-10;

/// Chambolle-Pock primal-dual iteration for `min (lambda/nu) sum_j ||nu S_j x||`
/// subject to `Ax = b`, with step sizes `tau = sigma = 1 / ||(A; nu S)||` and
/// `theta = 1`. For LP the primal iterate is clamped to `x >= 0`.
///
/// `A x_k` and `S x_k` are carried between iterations, so one step costs a
/// single application of each of `A`, `A^T`, `S` and `S^T`.
pub struct ChambollePock<'a> {
    kind: ProblemKind,
    a: &'a dyn LinearOperator,
    s: Box<dyn LinearOperator + 'a>,
    b: &'a [f64],
    nu: f64,
    step: f64,
    radius: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    ax: Vec<f64>,
    sx: Vec<f64>,
    ax_bar: Vec<f64>,
    sx_bar: Vec<f64>,
    // scratch
    x_next: Vec<f64>,
    ax_next: Vec<f64>,
    sx_next: Vec<f64>,
    grad_x: Vec<f64>,
    tmp: Vec<f64>,
    iteration: usize,
    last_change: f64,
}

impl<'a> ChambollePock<'a> {
    pub fn new(
        kind: ProblemKind,
        lambda: f64,
        a: &'a dyn LinearOperator,
        b: &'a [f64],
        gradient: Option<&'a Gradient>,
    ) -> Result<Self> {
        check_len(a.rows(), b.len())?;
        let n = a.cols();
        let s: Box<dyn LinearOperator + 'a> = match kind {
            ProblemKind::P1 | ProblemKind::LP => Box::new(Identity(n)),
            ProblemKind::TV => {
                let g = gradient.ok_or_else(|| {
                    Error::InvalidArgument("TV needs the gradient operator of the image mask".into())
                })?;
                check_len(n, g.cols())?;
                Box::new(g.clone())
            }
        };
        let a_norm = spectral_norm(a, NORM_TOL)?;
        let s_norm = spectral_norm(s.as_ref(), NORM_TOL)?;
        if s_norm == 0.0 {
            return Err(Error::Numerical("sparsifying operator has zero norm".into()));
        }
        if a_norm == 0.0 {
            return Err(Error::Numerical("measurement operator has zero norm".into()));
        }
        let nu = a_norm / s_norm;
        let stacked = Stacked {
            top: a,
            bottom: s.as_ref(),
            weight: nu,
        };
        let l = spectral_norm(&stacked, NORM_TOL)?;
        let (m, p) = (a.rows(), s.rows());
        Ok(Self {
            kind,
            a,
            b,
            nu,
            step: 1.0 / l,
            radius: lambda / nu,
            x: vec![0.0; n],
            y: vec![0.0; m],
            z: vec![0.0; p],
            ax: vec![0.0; m],
            sx: vec![0.0; p],
            ax_bar: vec![0.0; m],
            sx_bar: vec![0.0; p],
            x_next: vec![0.0; n],
            ax_next: vec![0.0; m],
            sx_next: vec![0.0; p],
            grad_x: vec![0.0; n],
            tmp: vec![0.0; n],
            s,
            iteration: 0,
            last_change: f64::INFINITY,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Radius `lambda / nu` of the dual sparsity ball.
    pub fn dual_radius(&self) -> f64 {
        self.radius
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Per-group magnitudes of the dual sparsity variable.
    pub fn z_group_norms(&self) -> Vec<f64> {
        match self.kind {
            ProblemKind::TV => {
                let n = self.x.len();
                (0..n).map(|j| self.z[j].hypot(self.z[n + j])).collect()
            }
            _ => self.z.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn residual(&self) -> f64 {
        self.ax
            .iter()
            .zip(self.b)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `||x_k - x_{k-1}|| / ||x_k||` of the last step.
    pub fn relative_change(&self) -> f64 {
        self.last_change
    }

    pub fn objective(&self) -> f64 {
        match self.kind {
            ProblemKind::TV => {
                let n = self.x.len();
                (0..n).map(|j| self.sx[j].hypot(self.sx[n + j])).sum()
            }
            _ => l1(&self.x),
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let sigma = self.step;
        let tau = self.step;
        let nu = self.nu;

        for ((y, axb), b) in self.y.iter_mut().zip(&self.ax_bar).zip(self.b) {
            *y += sigma * (axb - b);
        }

        for (z, sxb) in self.z.iter_mut().zip(&self.sx_bar) {
            *z += sigma * nu * sxb;
        }
        let r = self.radius;
        match self.kind {
            ProblemKind::TV => {
                let n = self.x.len();
                let (zx, zy) = self.z.split_at_mut(n);
                for (a, b) in zx.iter_mut().zip(zy.iter_mut()) {
                    let scale = r / r.max(a.hypot(*b));
                    *a *= scale;
                    *b *= scale;
                }
            }
            _ => {
                for z in self.z.iter_mut() {
                    *z *= r / r.max(z.abs());
                }
            }
        }

        self.a.apply_transpose_into(&self.y, &mut self.grad_x);
        self.s.apply_transpose_into(&self.z, &mut self.tmp);
        let nonneg = self.kind == ProblemKind::LP;
        for (((xn, x), g), t) in self
            .x_next
            .iter_mut()
            .zip(&self.x)
            .zip(&self.grad_x)
            .zip(&self.tmp)
        {
            let mut v = x - tau * (g + nu * t);
            if nonneg && v < 0.0 {
                v = 0.0;
            }
            *xn = v;
        }

        self.a.apply_into(&self.x_next, &mut self.ax_next);
        self.s.apply_into(&self.x_next, &mut self.sx_next);
        // extrapolation, applied to the carried operator images as well
        for ((bar, new), old) in self.ax_bar.iter_mut().zip(&self.ax_next).zip(&self.ax) {
            *bar = 2.0 * new - old;
        }
        for ((bar, new), old) in self.sx_bar.iter_mut().zip(&self.sx_next).zip(&self.sx) {
            *bar = 2.0 * new - old;
        }

        let mut diff = 0.0;
        let mut size = 0.0;
        for (a, b) in self.x_next.iter().zip(&self.x) {
            diff += (a - b) * (a - b);
            size += a * a;
        }
        self.last_change = if size > 0.0 { (diff / size).sqrt() } else { diff.sqrt() };

        std::mem::swap(&mut self.x, &mut self.x_next);
        std::mem::swap(&mut self.ax, &mut self.ax_next);
        std::mem::swap(&mut self.sx, &mut self.sx_next);
        self.iteration += 1;

        if !self.last_change.is_finite() || !self.ax.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                iteration: self.iteration,
            });
        }
        Ok(())
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }
}

fn rmse(x: &[f64], reference: &[f64]) -> f64 {
    let n = x.len().max(1) as f64;
    (x.iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Run the primal-dual iteration to `config.max_iter` steps or early exit.
///
/// `gradient` is required for TV. `reference`, when given, adds the image
/// RMSE to every history record.
pub fn solve_cp(
    config: &SolverConfig,
    a: &dyn LinearOperator,
    b: &[f64],
    gradient: Option<&Gradient>,
    reference: Option<&[f64]>,
) -> Result<Solution> {
    config.validate()?;
    if let Some(r) = reference {
        check_len(a.cols(), r.len())?;
    }
    let mut cp = ChambollePock::new(config.problem_kind, config.lambda, a, b, gradient)?;
    let b_norm = norm2(b);
    let log_every = config.log_every.max(1);
    let mut history = Vec::new();
    let record = |cp: &ChambollePock, history: &mut Vec<HistoryRecord>| {
        history.push(HistoryRecord {
            iteration: cp.iteration(),
            objective: cp.objective(),
            residual: cp.residual(),
            image_rmse: reference.map(|r| rmse(cp.x(), r)),
        });
    };

    while cp.iteration() < config.max_iter {
        cp.step()?;
        let residual = cp.residual();
        let rel = if b_norm > 0.0 { residual / b_norm } else { residual };
        let done = rel < config.feas_tol && cp.relative_change() < config.feas_tol;
        if cp.iteration() % log_every == 0 || done || cp.iteration() == config.max_iter {
            record(&cp, &mut history);
        }
        if done {
            break;
        }
    }

    let primal_objective = cp.objective();
    let data_residual = cp.residual();
    let iterations_run = cp.iteration();
    Ok(Solution {
        x: cp.into_x(),
        iterations_run,
        primal_objective,
        data_residual,
        history,
    })
}
