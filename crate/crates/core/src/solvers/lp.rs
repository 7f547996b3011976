//! Small-scale exact oracle for P1 and LP.
//!
//! The constraint system is first replaced by an equivalent one with
//! orthonormal rows (thin SVD, numerically dependent rows dropped), then
//! recast in standard form `min 1^T v, Cv = d, v >= 0` and solved with a
//! Mehrotra predictor-corrector interior-point method. The interior solution
//! is finally polished to the basic solution on its identified support.

use nalgebra::{DMatrix, DVector};

use super::{l1, ProblemKind, Solution};
use crate::error::{Error, Result};
use crate::sensing::SensingMatrix;

pub const DEFAULT_ORACLE_MAX_VARS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Bound on standard-form variables (`2N` for P1, `N` for LP).
    pub max_vars: usize,
    pub max_iter: usize,
    /// Relative duality-gap target.
    pub gap_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            max_vars: DEFAULT_ORACLE_MAX_VARS,
            max_iter: 200,
            gap_tol: 1e-11,
        }
    }
}

pub fn lp_oracle(kind: ProblemKind, a: &SensingMatrix, b: &[f64]) -> Result<Solution> {
    lp_oracle_dense(kind, &a.to_dense(), b, &OracleOptions::default())
}

pub fn lp_oracle_dense(
    kind: ProblemKind,
    a: &DMatrix<f64>,
    b: &[f64],
    opts: &OracleOptions,
) -> Result<Solution> {
    let (m, n) = a.shape();
    crate::error::check_len(m, b.len())?;
    let signs: Vec<f64> = match kind {
        ProblemKind::P1 => vec![1.0, -1.0],
        ProblemKind::LP => vec![1.0],
        ProblemKind::TV => {
            return Err(Error::InvalidArgument("the LP oracle handles P1 and LP only".into()))
        }
    };
    let n_vars = n * signs.len();
    if n_vars > opts.max_vars {
        return Err(Error::SizeBound {
            size: n_vars,
            bound: opts.max_vars,
        });
    }

    let b_vec = DVector::from_column_slice(b);
    let reduced = reduce_rows(a, &b_vec)?;

    let x = if reduced.base.nrows() == 0 {
        vec![0.0; n]
    } else {
        let map: Vec<(usize, f64)> = signs
            .iter()
            .flat_map(|&s| (0..n).map(move |j| (j, s)))
            .collect();
        let lp = StdLp {
            base: reduced.base.clone(),
            map,
            c: DVector::from_element(n_vars, 1.0),
            d: reduced.rhs.clone(),
        };
        let v = match lp.solve(opts) {
            Ok(s) => polish(&lp, s),
            Err(e) => {
                if let Some(cert) = lp.infeasibility_certificate(opts) {
                    return Err(Error::Infeasible {
                        certificate: reduced.lift(&cert),
                    });
                }
                return Err(e);
            }
        };
        match kind {
            ProblemKind::P1 => (0..n).map(|j| v[j] - v[n + j]).collect(),
            _ => v.iter().copied().collect(),
        }
    };

    let ax = a * DVector::from_column_slice(&x);
    let data_residual = (ax - &b_vec).norm();
    Ok(Solution {
        primal_objective: l1(&x),
        x,
        iterations_run: 0,
        data_residual,
        history: Vec::new(),
    })
}

struct Reduced {
    /// Orthonormal rows spanning the row space of `A`.
    base: DMatrix<f64>,
    rhs: DVector<f64>,
    /// `U_r Sigma_r^{-1}`, maps reduced multipliers back to the original rows.
    lift: DMatrix<f64>,
}

impl Reduced {
    fn lift(&self, y: &DVector<f64>) -> Vec<f64> {
        (&self.lift * y).iter().copied().collect()
    }
}

fn reduce_rows(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Reduced> {
    let (m, n) = a.shape();
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let smax = svd.singular_values.max();
    let cutoff = 1e-10 * smax;
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > cutoff)
        .collect();
    let r = keep.len();
    let mut base = DMatrix::zeros(r, n);
    let mut rhs = DVector::zeros(r);
    let mut lift = DMatrix::zeros(m, r);
    let mut projected = DVector::zeros(m);
    for (k, &i) in keep.iter().enumerate() {
        let s = svd.singular_values[i];
        base.set_row(k, &vt.row(i));
        let ub = u.column(i).dot(b);
        rhs[k] = ub / s;
        projected += u.column(i) * ub;
        lift.set_column(k, &(u.column(i) / s));
    }
    let leftover = b - projected;
    if leftover.norm() > 1e-9 * (1.0 + b.norm()) {
        // b has a component orthogonal to range(A): A^T y = 0, b^T y > 0
        return Err(Error::Infeasible {
            certificate: leftover.iter().copied().collect(),
        });
    }
    Ok(Reduced { base, rhs, lift })
}

/// `min c^T v` subject to `C v = d`, `v >= 0`, where column `j` of `C` is
/// `sign_j * base[:, col_j]`.
struct StdLp {
    base: DMatrix<f64>,
    map: Vec<(usize, f64)>,
    c: DVector<f64>,
    d: DVector<f64>,
}

struct IpmPoint {
    v: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
}

impl StdLp {
    fn n_vars(&self) -> usize {
        self.map.len()
    }

    fn times(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut u = DVector::zeros(self.base.ncols());
        for (k, &(j, s)) in self.map.iter().enumerate() {
            u[j] += s * v[k];
        }
        &self.base * u
    }

    fn times_t(&self, y: &DVector<f64>) -> DVector<f64> {
        let u = self.base.tr_mul(y);
        DVector::from_iterator(self.n_vars(), self.map.iter().map(|&(j, s)| s * u[j]))
    }

    /// `C diag(w) C^T`
    fn normal(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let mut col_w = vec![0.0; self.base.ncols()];
        for (k, &(j, _)) in self.map.iter().enumerate() {
            col_w[j] += w[k];
        }
        let mut scaled = self.base.clone();
        for (j, cw) in col_w.iter().enumerate() {
            let f = cw.sqrt();
            scaled.column_mut(j).scale_mut(f);
        }
        &scaled * scaled.transpose()
    }

    fn solve_normal(&self, w: &DVector<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let mut mat = self.normal(w);
        let scale = mat.diagonal().max().max(1e-300);
        for reg in [0.0, 1e-14, 1e-12, 1e-10] {
            if reg > 0.0 {
                for i in 0..mat.nrows() {
                    mat[(i, i)] += reg * scale;
                }
            }
            if let Some(ch) = mat.clone().cholesky() {
                // one step of iterative refinement against the unregularized system
                let mut sol = ch.solve(rhs);
                let exact = if reg > 0.0 { self.normal(w) } else { mat.clone() };
                let r = rhs - &exact * &sol;
                sol += ch.solve(&r);
                return Ok(sol);
            }
        }
        Err(Error::Numerical("normal equations are not positive definite".into()))
    }

    fn starting_point(&self) -> Result<IpmPoint> {
        let ones = DVector::from_element(self.n_vars(), 1.0);
        let v0 = self.times_t(&self.solve_normal(&ones, &self.d)?);
        let y0 = self.solve_normal(&ones, &self.times(&self.c))?;
        let z0 = &self.c - self.times_t(&y0);
        let dv = (-1.5 * v0.min()).max(0.0);
        let dz = (-1.5 * z0.min()).max(0.0);
        let mut v = v0.add_scalar(dv);
        let mut z = z0.add_scalar(dz);
        let vz = v.dot(&z);
        let dv2 = 0.5 * vz / z.sum().max(1e-300);
        let dz2 = 0.5 * vz / v.sum().max(1e-300);
        v = v.add_scalar(dv2.max(1e-3));
        z = z.add_scalar(dz2.max(1e-3));
        Ok(IpmPoint { v, y: y0, z })
    }

    /// Mehrotra predictor-corrector iteration. Near the optimum of degenerate
    /// problems the normal equations become too ill-conditioned to reach the
    /// target, so the best iterate seen is kept and accepted when it meets
    /// `ACCEPT_TOL`.
    fn solve(&self, opts: &OracleOptions) -> Result<IpmPoint> {
        const ACCEPT_TOL: f64 = 1e-9;
        const STALL: usize = 6;
        let n = self.n_vars() as f64;
        let mut pt = self.starting_point()?;
        let d_norm = self.d.norm();
        let c_norm = self.c.norm();
        let mut best: Option<(f64, IpmPoint)> = None;
        let mut since_best = 0;
        let accept = |best: Option<(f64, IpmPoint)>, err: Error| match best {
            Some((merit, p)) if merit <= ACCEPT_TOL => Ok(p),
            _ => Err(err),
        };
        for _ in 0..opts.max_iter {
            let IpmPoint { v, y, z } = &pt;
            if !v.iter().chain(z.iter()).all(|t| t.is_finite()) || v.amax() > 1e14 {
                return accept(best, Error::Numerical("interior-point iterates diverged".into()));
            }
            let rp = &self.d - self.times(v);
            let rd = &self.c - self.times_t(y) - z;
            let primal = self.c.dot(v);
            let gap = (primal - self.d.dot(y)).abs() / (1.0 + primal.abs());
            let infeas = (rp.norm() / (1.0 + d_norm)).max(rd.norm() / (1.0 + c_norm));
            if infeas <= 1e-10 && gap <= opts.gap_tol {
                return Ok(pt);
            }
            let merit = infeas.max(gap);
            if best.as_ref().is_none_or(|(m, _)| merit < *m) {
                best = Some((
                    merit,
                    IpmPoint {
                        v: v.clone(),
                        y: y.clone(),
                        z: z.clone(),
                    },
                ));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= STALL {
                    break;
                }
            }
            let mu = v.dot(z) / n;
            let w = v.component_div(z);

            let direction = |rc: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
                // C D C^T dy = rp - C Z^{-1} rc + C D rd
                let zinv_rc = rc.component_div(z);
                let rhs = &rp - self.times(&zinv_rc) + self.times(&w.component_mul(&rd));
                let dy = self.solve_normal(&w, &rhs)?;
                let dz = &rd - self.times_t(&dy);
                let dv = zinv_rc - w.component_mul(&dz);
                Ok((dv, dy, dz))
            };

            let rc_aff = -v.component_mul(z);
            let (dv_a, _, dz_a) = match direction(&rc_aff) {
                Ok(d) => d,
                Err(e) => return accept(best, e),
            };
            let ap = max_step(v, &dv_a);
            let ad = max_step(z, &dz_a);
            let mu_aff = (v + &dv_a * ap).dot(&(z + &dz_a * ad)) / n;
            let sigma = (mu_aff / mu).powi(3).min(1.0);
            let rc = rc_aff.add_scalar(sigma * mu) - dv_a.component_mul(&dz_a);
            let (dv, dy, dz) = match direction(&rc) {
                Ok(d) => d,
                Err(e) => return accept(best, e),
            };
            let ap = (0.995 * max_step(v, &dv)).min(1.0);
            let ad = (0.995 * max_step(z, &dz)).min(1.0);
            pt = IpmPoint {
                v: v + dv * ap,
                y: y + dy * ad,
                z: z + dz * ad,
            };
        }
        accept(best, Error::Numerical("interior-point method did not converge".into()))
    }

    /// Phase-one problem `min 1^T t`, `C v + diag(sign d) t = d`, `v, t >= 0`;
    /// a positive optimum proves infeasibility and its dual is the certificate.
    fn infeasibility_certificate(&self, opts: &OracleOptions) -> Option<DVector<f64>> {
        let (r, p) = self.base.shape();
        let mut base = DMatrix::zeros(r, p + r);
        base.view_mut((0, 0), (r, p)).copy_from(&self.base);
        let mut map = self.map.clone();
        for i in 0..r {
            base[(i, p + i)] = 1.0;
            map.push((p + i, if self.d[i] < 0.0 { -1.0 } else { 1.0 }));
        }
        let mut c = DVector::zeros(map.len());
        for k in self.map.len()..map.len() {
            c[k] = 1.0;
        }
        let phase1 = StdLp {
            base,
            map,
            c,
            d: self.d.clone(),
        };
        let pt = phase1.solve(opts).ok()?;
        let opt = phase1.c.dot(&pt.v);
        (opt > 1e-8 * (1.0 + self.d.norm())).then_some(pt.y)
    }
}

fn max_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&xi, &d)| -xi / d)
        .fold(1.0, f64::min)
}

/// Replace an interior optimum by the basic solution on its support when
/// that is a feasible vertex at least as good.
fn polish(lp: &StdLp, pt: IpmPoint) -> DVector<f64> {
    let support: Vec<usize> = (0..lp.n_vars()).filter(|&k| pt.v[k] > pt.z[k]).collect();
    let r = lp.base.nrows();
    if support.is_empty() || support.len() > r {
        return pt.v;
    }
    let mut cols = DMatrix::zeros(r, support.len());
    for (k, &j) in support.iter().enumerate() {
        let (col, s) = lp.map[j];
        cols.set_column(k, &(lp.base.column(col) * s));
    }
    let svd = cols.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-10 * smax {
        return pt.v;
    }
    let Ok(vb) = svd.solve(&lp.d, 0.0) else {
        return pt.v;
    };
    let scale = pt.v.amax().max(1.0);
    if vb.iter().any(|&t| t < -1e-12 * scale) {
        return pt.v;
    }
    let mut v = DVector::zeros(lp.n_vars());
    for (k, &j) in support.iter().enumerate() {
        v[j] = vb[k].max(0.0);
    }
    let res = (&lp.d - lp.times(&v)).norm();
    let obj = lp.c.dot(&v);
    let ipm_obj = lp.c.dot(&pt.v);
    if res <= 1e-11 * (1.0 + lp.d.norm()) && obj <= ipm_obj + 1e-9 * (1.0 + ipm_obj.abs()) {
        v
    } else {
        pt.v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::build_gaussian;

    fn dense(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows.len(), rows[0].len(), &rows.concat())
    }

    #[test]
    fn two_vertex_example() {
        // basic feasible vertices (1, 0) and (0, 2) with l1 norms 1 and 2
        let a = dense(&[&[2.0, 1.0]]);
        for kind in [ProblemKind::P1, ProblemKind::LP] {
            let sol = lp_oracle_dense(kind, &a, &[2.0], &OracleOptions::default()).unwrap();
            assert!((sol.x[0] - 1.0).abs() < 1e-12 && sol.x[1].abs() < 1e-12, "{:?}", sol.x);
            assert!((sol.primal_objective - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let a = build_gaussian(5, 9, 1).unwrap();
        let sol = lp_oracle(ProblemKind::P1, &a, &[0.0; 5]).unwrap();
        assert!(sol.x.iter().all(|v| v.abs() < 1e-12));
        assert!(sol.primal_objective < 1e-11);
    }

    #[test]
    fn feasibility_contract_on_random_instances() {
        for seed in 0..20 {
            let a = build_gaussian(12, 30, seed).unwrap();
            let x0 = crate::phantoms::gen_signedspikes(30, 8, seed).unwrap();
            let b = a.apply(&x0).unwrap();
            for kind in [ProblemKind::P1, ProblemKind::LP] {
                let b = if kind == ProblemKind::LP {
                    a.apply(&crate::phantoms::gen_spikes(30, 8, seed).unwrap()).unwrap()
                } else {
                    b.clone()
                };
                let sol = lp_oracle(kind, &a, &b).unwrap();
                let ax = a.apply(&sol.x).unwrap();
                let binf = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let err = ax.iter().zip(&b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
                assert!(err <= 1e-8 * (1.0 + binf), "seed {seed}: {err}");
                if kind == ProblemKind::LP {
                    assert!(sol.x.iter().all(|&v| v >= 0.0));
                }
            }
        }
    }

    #[test]
    fn matches_brute_force_vertex_enumeration() {
        // optimum of an LP is attained at a basic solution: enumerate all
        // column subsets of size m and take the best feasible one
        let a = dense(&[&[1.0, 2.0, -1.0, 0.5, 3.0], &[0.0, 1.0, 2.0, -1.0, 1.0]]);
        let b = [1.0, 2.0];
        let n = 5;
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let sub = DMatrix::from_columns(&[a.column(i), a.column(j)]);
                if let Some(inv) = sub.try_inverse() {
                    let xb = inv * DVector::from_column_slice(&b);
                    best = best.min(xb.abs().sum());
                }
            }
        }
        let sol = lp_oracle_dense(ProblemKind::P1, &a, &b, &OracleOptions::default()).unwrap();
        assert!((sol.primal_objective - best).abs() < 1e-9 * (1.0 + best));

        let mut best_nn = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let sub = DMatrix::from_columns(&[a.column(i), a.column(j)]);
                if let Some(inv) = sub.try_inverse() {
                    let xb = inv * DVector::from_column_slice(&b);
                    if xb.iter().all(|&v| v >= -1e-12) {
                        best_nn = best_nn.min(xb.sum());
                    }
                }
            }
        }
        let sol = lp_oracle_dense(ProblemKind::LP, &a, &b, &OracleOptions::default()).unwrap();
        assert!((sol.primal_objective - best_nn).abs() < 1e-9 * (1.0 + best_nn));
    }

    #[test]
    fn nonnegative_infeasible_system_has_certificate() {
        let a = dense(&[&[1.0, 1.0]]);
        let err = lp_oracle_dense(ProblemKind::LP, &a, &[-1.0], &OracleOptions::default()).unwrap_err();
        let Error::Infeasible { certificate } = err else {
            panic!("expected infeasibility, got {err}");
        };
        // A^T y <= 0 and b^T y > 0
        let y = certificate[0];
        assert!(y <= 0.0 + 1e-9 && y < 0.0);
        assert!(-y > 0.0);
    }

    #[test]
    fn inconsistent_system_has_certificate() {
        let a = dense(&[&[1.0, 1.0], &[2.0, 2.0]]);
        let err = lp_oracle_dense(ProblemKind::P1, &a, &[1.0, 3.0], &OracleOptions::default()).unwrap_err();
        let Error::Infeasible { certificate } = err else {
            panic!("expected infeasibility");
        };
        let aty = a.tr_mul(&DVector::from_column_slice(&certificate));
        assert!(aty.amax() < 1e-9);
        assert!(certificate[0] * 1.0 + certificate[1] * 3.0 > 0.0);
    }

    #[test]
    fn rank_deficient_and_overdetermined() {
        let a = build_gaussian(8, 6, 3).unwrap();
        let x0 = vec![0.5, -1.0, 0.0, 2.0, 0.25, -0.75];
        let b = a.apply(&x0).unwrap();
        let sol = lp_oracle(ProblemKind::P1, &a, &b).unwrap();
        for (p, q) in sol.x.iter().zip(&x0) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn size_bound() {
        let a = DMatrix::zeros(1, 1500);
        let err = lp_oracle_dense(ProblemKind::P1, &a, &[0.0], &OracleOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SizeBound { size: 3000, bound: 2000 }));
        assert!(lp_oracle_dense(ProblemKind::TV, &DMatrix::zeros(1, 2), &[0.0], &OracleOptions::default()).is_err());
    }
}
