//! Critical number of projections for a given sparsity, read off a
//! phase-transition curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theory::{Coords, Curve};

const DELTA_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct PredictionInput {
    /// Absolute sparsity in whatever domain the curve describes.
    pub s: f64,
    /// Pixels in the image domain.
    pub n: usize,
    pub rays_per_view: usize,
    pub curve: Curve,
}

impl PredictionInput {
    pub fn new(s: f64, n: usize, rays_per_view: usize, curve: Curve) -> Result<Self> {
        if n == 0 || !(s > 0.0 && s <= n as f64) {
            return Err(Error::InvalidArgument(format!("need 0 < s <= N, got s = {s}, N = {n}")));
        }
        if rays_per_view == 0 {
            return Err(Error::InvalidArgument("rays_per_view must be at least 1".into()));
        }
        Ok(Self {
            s,
            n,
            rays_per_view,
            curve,
        })
    }

    fn views(&self, m_over_n: f64) -> f64 {
        m_over_n_to_views(m_over_n, self.n, self.rays_per_view)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub views_fractional: f64,
    pub views_ceil: u64,
    /// Critical number of measurements `views * rays_per_view`.
    pub m_critical: f64,
}

impl Prediction {
    fn from_views(views: f64, rays_per_view: usize) -> Self {
        Self {
            views_fractional: views,
            views_ceil: views.ceil() as u64,
            m_critical: views * rays_per_view as f64,
        }
    }
}

pub fn views_to_m_over_n(views: f64, n: usize, rays_per_view: usize) -> f64 {
    views * rays_per_view as f64 / n as f64
}

pub fn m_over_n_to_views(m_over_n: f64, n: usize, rays_per_view: usize) -> f64 {
    m_over_n * n as f64 / rays_per_view as f64
}

fn require(curve: &Curve, coords: Coords) -> Result<()> {
    if curve.coords() != coords {
        return Err(Error::Curve(format!(
            "expected a curve in {} coordinates, got {}",
            coords.as_str(),
            curve.coords().as_str()
        )));
    }
    if curve.is_empty() {
        return Err(Error::Curve("empty curve".into()));
    }
    Ok(())
}

/// Interpolate the ALMT curve at `s/N` for the critical `m/N`.
pub fn predict_views_almt(input: &PredictionInput) -> Result<Prediction> {
    require(&input.curve, Coords::Almt)?;
    let beta = input.s / input.n as f64;
    let m_over_n = input.curve.interpolate(beta).ok_or(Error::OutsideSupport(beta))?;
    Ok(Prediction::from_views(input.views(m_over_n), input.rays_per_view))
}

/// Intersect the DT curve with the hyperbola `rho = s / (delta N)`.
///
/// The first crossing in increasing `delta` is refined by bisection.
pub fn predict_views_dt(input: &PredictionInput) -> Result<Prediction> {
    require(&input.curve, Coords::Dt)?;
    let beta = input.s / input.n as f64;
    let curve = &input.curve;
    // g(delta) = delta * rho(delta) - s/N changes sign at the intersection
    let g = |delta: f64| curve.interpolate(delta).map(|rho| delta * rho - beta);
    let pts: Vec<(f64, f64)> = curve
        .points()
        .iter()
        .copied()
        .filter(|p| p.0 > 0.0 && p.0 <= 1.0)
        .collect();
    let no_hit = || Error::Curve(format!("curve does not meet the hyperbola for s/N = {beta}"));
    let mut bracket = None;
    for w in pts.windows(2) {
        let (ga, gb) = (w[0].0 * w[0].1 - beta, w[1].0 * w[1].1 - beta);
        if ga == 0.0 {
            bracket = Some((w[0].0, w[0].0));
            break;
        }
        if ga < 0.0 && gb >= 0.0 || ga > 0.0 && gb <= 0.0 {
            bracket = Some((w[0].0, w[1].0));
            break;
        }
    }
    if bracket.is_none() {
        if let Some(&(d, r)) = pts.last() {
            if d * r == beta {
                bracket = Some((d, d));
            }
        }
    }
    let (mut lo, mut hi) = bracket.ok_or_else(no_hit)?;
    let rising = g(hi).ok_or_else(no_hit)? >= g(lo).ok_or_else(no_hit)?;
    while hi - lo > DELTA_TOL {
        let mid = 0.5 * (lo + hi);
        let v = g(mid).ok_or_else(no_hit)?;
        if (v < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    Ok(Prediction::from_views(input.views(delta), input.rays_per_view))
}
