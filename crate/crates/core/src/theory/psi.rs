//! Statistical dimension of the l1 descent cone at an `s`-sparse vector,
//! normalized by the ambient dimension, in the limit of large `N`.

use statrs::function::erf::erfc;

use super::quad::integrate;

const QUAD_TOL: f64 = 1e-9;
/// Upper end of the quadrature window above `tau`; beyond it the closed-form
/// tail takes over.
const WINDOW: f64 = 12.0;
const TAU_MAX: f64 = 40.0;

pub(crate) fn phi(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper standard normal tail probability.
pub(crate) fn phi_c(u: f64) -> f64 {
    0.5 * erfc(u / std::f64::consts::SQRT_2)
}

/// `int_a^inf (u - tau)^2 phi(u) du`
pub(crate) fn tail_moment(tau: f64, a: f64) -> f64 {
    (1.0 + tau * tau) * phi_c(a) + (a - 2.0 * tau) * phi(a)
}

/// `int_tau^inf (u - tau)^2 phi(u) du`, quadrature on `[tau, tau + 12]` plus
/// the analytic remainder.
pub fn off_support_moment(tau: f64) -> f64 {
    let head = integrate(|u| (u - tau) * (u - tau) * phi(u), tau, tau + WINDOW, QUAD_TOL)
        .expect("smooth integrand on a bounded window");
    head + tail_moment(tau, tau + WINDOW)
}

/// Objective minimized over the threshold `tau`; `sides` is 2 for signed and
/// 1 for nonnegative vectors.
fn objective(beta: f64, tau: f64, sides: f64) -> f64 {
    beta * (1.0 + tau * tau) + (1.0 - beta) * sides * off_support_moment(tau)
}

fn minimize(beta: f64, sides: f64) -> f64 {
    if beta <= 0.0 {
        return 0.0;
    }
    if beta >= 1.0 {
        return 1.0;
    }
    let f = |t: f64| objective(beta, t, sides);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, TAU_MAX);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    // refinement: the endpoint tau = 0 is admissible
    let best = f(0.5 * (a + b)).min(fc).min(fd).min(f(0.0));
    best.clamp(0.0, 1.0)
}

/// Critical sampling fraction `m/N` for l1 recovery of signed vectors with
/// sparsity fraction `beta = s/N`.
pub fn psi_l1(beta: f64) -> f64 {
    minimize(beta, 2.0)
}

/// One-sided counterpart for nonnegative vectors recovered with `x >= 0`.
pub fn psi_l1_nonneg(beta: f64) -> f64 {
    minimize(beta, 1.0)
}
