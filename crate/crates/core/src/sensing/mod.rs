//! Measurement operators over a disk-shaped image domain.
//!
//! CT matrices hold exact ray/pixel intersection lengths (pixel-side units)
//! computed by cell traversal: every crossing of a ray with a grid line is
//! collected, and each interval between consecutive crossings is assigned to
//! the pixel containing its midpoint. Pixels outside the mask are dropped, so
//! a ray that misses the disk yields an all-zero row, which is kept.

mod mask;
mod matrix;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use mask::DiskMask;
pub use matrix::{Csr, Geometry, SensingMatrix, Storage};

use crate::error::{Error, Result};
use crate::rng::rng;

pub const DEFAULT_OFFSET_DEG: f64 = 20.0;

/// Measured data `b = A x` together with the matrix it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    pub values: Vec<f64>,
    pub matrix_id: String,
}

impl SensingMatrix {
    /// Short identifier of the generating geometry.
    pub fn id(&self) -> String {
        match self.geometry() {
            Geometry::Fanbeam {
                n_side,
                n_views,
                offset_deg,
                ..
            } => format!("fanbeam-n{n_side}-v{n_views}-o{offset_deg}"),
            Geometry::FanbeamRand {
                n_side,
                n_views,
                seed,
                ..
            } => format!("fanbeam_rand-n{n_side}-v{n_views}-s{seed}"),
            Geometry::RandomRays {
                n_side,
                n_rays,
                seed,
            } => format!("random_rays-n{n_side}-r{n_rays}-s{seed}"),
            Geometry::Gaussian { seed } => format!("gaussian-{}x{}-s{seed}", self.m(), self.n()),
        }
    }

    pub fn measure(&self, x: &[f64]) -> Result<Sinogram> {
        Ok(Sinogram {
            values: self.apply(x)?,
            matrix_id: self.id(),
        })
    }
}

/// Parameters of the circular fan-beam scanner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanbeamConfig {
    pub n_side: usize,
    pub n_views: usize,
    pub offset_deg: f64,
    /// Source-to-center distance in pixel units; `None` means `2 * n_side`.
    pub source_radius: Option<f64>,
}

impl FanbeamConfig {
    pub fn new(n_side: usize, n_views: usize) -> Self {
        Self {
            n_side,
            n_views,
            offset_deg: DEFAULT_OFFSET_DEG,
            source_radius: None,
        }
    }

    fn radius(&self) -> f64 {
        self.source_radius.unwrap_or(2.0 * self.n_side as f64)
    }
}

pub fn disk_mask(n_side: usize) -> Result<DiskMask> {
    DiskMask::new(n_side)
}

/// Equi-angular fan-beam scan over a 360 degree arc.
pub fn build_fanbeam(cfg: &FanbeamConfig) -> Result<SensingMatrix> {
    validate_fan(cfg.n_side, cfg.n_views, cfg.radius())?;
    let angles: Vec<f64> = (0..cfg.n_views)
        .map(|k| cfg.offset_deg + k as f64 * 360.0 / cfg.n_views as f64)
        .collect();
    let mask = DiskMask::new(cfg.n_side)?;
    let geometry = Geometry::Fanbeam {
        n_side: cfg.n_side,
        n_views: cfg.n_views,
        offset_deg: cfg.offset_deg,
        source_radius: cfg.radius(),
    };
    Ok(fan_matrix(&mask, &angles, cfg.radius(), geometry))
}

/// Fan-beam scan with source positions drawn uniformly from `[0, 360)`.
pub fn build_fanbeam_random(n_side: usize, n_views: usize, seed: u64) -> Result<SensingMatrix> {
    let radius = 2.0 * n_side as f64;
    validate_fan(n_side, n_views, radius)?;
    let angles = fanbeam_random_angles(n_views, seed);
    let mask = DiskMask::new(n_side)?;
    let geometry = Geometry::FanbeamRand {
        n_side,
        n_views,
        seed,
        source_radius: radius,
    };
    Ok(fan_matrix(&mask, &angles, radius, geometry))
}

/// Source angles (degrees) used by [`build_fanbeam_random`].
pub fn fanbeam_random_angles(n_views: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n_views).map(|_| r.random::<f64>() * 360.0).collect()
}

/// Independent rays, each given by an angle uniform on `[0, 180)` degrees and
/// a signed offset uniform on `[-n_side/2, n_side/2]` along the orthogonal
/// diameter.
pub fn build_random_rays(n_side: usize, n_rays: usize, seed: u64) -> Result<SensingMatrix> {
    if n_rays == 0 {
        return Err(Error::InvalidArgument("n_rays must be at least 1".into()));
    }
    let mask = DiskMask::new(n_side)?;
    let half = n_side as f64 / 2.0;
    let mut r = rng(seed);
    let rays: Vec<(f64, f64)> = (0..n_rays)
        .map(|_| {
            let angle = r.random::<f64>() * 180.0;
            let offset = (2.0 * r.random::<f64>() - 1.0) * half;
            (angle, offset)
        })
        .collect();
    let rows = rays
        .iter()
        .map(|&(angle, offset)| {
            let (o, d) = parallel_ray(n_side, angle, offset);
            trace_ray(&mask, o, d, 4.0 * n_side as f64)
        })
        .collect();
    Ok(SensingMatrix::from_rows(
        mask.n_pixels(),
        rows,
        Geometry::RandomRays {
            n_side,
            n_rays,
            seed,
        },
    ))
}

/// Dense `m x n` matrix with iid standard normal entries.
pub fn build_gaussian(m: usize, n: usize, seed: u64) -> Result<SensingMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "gaussian matrix needs m, n >= 1 (got {m} x {n})"
        )));
    }
    let mut r = rng(seed);
    let data = (0..m * n).map(|_| r.sample(StandardNormal)).collect();
    Ok(SensingMatrix::from_dense(m, n, data, Geometry::Gaussian { seed }))
}

/// Origin and unit direction of the line at `angle_deg` whose closest point
/// to the image center is `offset` along the left-hand normal. The origin
/// lies `2 * n_side` before that point.
pub fn parallel_ray(n_side: usize, angle_deg: f64, offset: f64) -> ([f64; 2], [f64; 2]) {
    let a = angle_deg.to_radians();
    let d = [a.cos(), a.sin()];
    let normal = [-d[1], d[0]];
    let back = 2.0 * n_side as f64;
    (
        [offset * normal[0] - back * d[0], offset * normal[1] - back * d[1]],
        d,
    )
}

/// Source position and unit direction of every ray of one fan-beam view.
///
/// The curved detector has `2 * n_side` equi-angular bins whose fan exactly
/// spans the inscribed disk; ray `i` passes through the center of bin `i`.
pub fn fan_rays(n_side: usize, angle_deg: f64, source_radius: f64) -> Vec<([f64; 2], [f64; 2])> {
    let theta = angle_deg.to_radians();
    let source = [source_radius * theta.cos(), source_radius * theta.sin()];
    let central = theta + std::f64::consts::PI;
    let half_fan = (n_side as f64 / 2.0 / source_radius).asin();
    let n_bins = 2 * n_side;
    (0..n_bins)
        .map(|i| {
            let gamma = -half_fan + (i as f64 + 0.5) * 2.0 * half_fan / n_bins as f64;
            let phi = central + gamma;
            (source, [phi.cos(), phi.sin()])
        })
        .collect()
}

fn validate_fan(n_side: usize, n_views: usize, radius: f64) -> Result<()> {
    if n_views == 0 {
        return Err(Error::InvalidArgument("n_views must be at least 1".into()));
    }
    if n_side < 2 {
        return Err(Error::InvalidArgument(format!("n_side must be at least 2, got {n_side}")));
    }
    let half_diag = n_side as f64 / 2.0 * std::f64::consts::SQRT_2;
    if !(radius > half_diag) {
        return Err(Error::InvalidArgument(format!(
            "source radius {radius} must exceed the grid half-diagonal {half_diag}"
        )));
    }
    Ok(())
}

fn fan_matrix(mask: &DiskMask, angles: &[f64], radius: f64, geometry: Geometry) -> SensingMatrix {
    let n_side = mask.n_side();
    let rows = angles
        .iter()
        .flat_map(|&a| fan_rays(n_side, a, radius))
        .map(|(o, d)| trace_ray(mask, o, d, 2.0 * radius))
        .collect();
    SensingMatrix::from_rows(mask.n_pixels(), rows, geometry)
}

/// Intersection lengths of the segment `origin + t * dir`, `t in [0, length]`,
/// with every masked pixel it crosses. `dir` must be a unit vector.
pub fn trace_ray(mask: &DiskMask, origin: [f64; 2], dir: [f64; 2], length: f64) -> Vec<(usize, f64)> {
    let n = mask.n_side();
    let h = n as f64 / 2.0;
    let (mut t_lo, mut t_hi) = (0.0f64, length);
    for axis in 0..2 {
        if dir[axis] == 0.0 {
            if origin[axis] < -h || origin[axis] > h {
                return Vec::new();
            }
        } else {
            let t1 = (-h - origin[axis]) / dir[axis];
            let t2 = (h - origin[axis]) / dir[axis];
            t_lo = t_lo.max(t1.min(t2));
            t_hi = t_hi.min(t1.max(t2));
        }
    }
    if t_hi <= t_lo {
        return Vec::new();
    }

    let mut ts = Vec::with_capacity(2 * n + 4);
    ts.push(t_lo);
    ts.push(t_hi);
    for axis in 0..2 {
        if dir[axis] == 0.0 {
            continue;
        }
        for k in 0..=n {
            let t = (k as f64 - h - origin[axis]) / dir[axis];
            if t > t_lo && t < t_hi {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut out = Vec::with_capacity(ts.len());
    for w in ts.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-12 {
            continue;
        }
        let t = 0.5 * (w[0] + w[1]);
        let x = origin[0] + t * dir[0];
        let y = origin[1] + t * dir[1];
        let col = (x + h).floor() as isize;
        // cells own their left and bottom edges
        let row = (h - y).ceil() as isize - 1;
        if let Some(j) = mask.index_of(row, col) {
            out.push((j, len));
        }
    }
    out
}
