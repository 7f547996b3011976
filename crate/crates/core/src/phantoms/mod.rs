//! Sparse test-image ensembles and the discrete gradient.
//!
//! Images are plain vectors over the masked pixels of a [`DiskMask`], in the
//! mask's index order.

mod gradient;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use gradient::{pixel_sparsity, Gradient, GradientField};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::sensing::DiskMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageClass {
    SignedSpikes,
    Spikes,
    AltProjIsoTv,
    Grains,
}

impl ImageClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImageClass::SignedSpikes => "signedspikes",
            ImageClass::Spikes => "spikes",
            ImageClass::AltProjIsoTv => "altprojisotv",
            ImageClass::Grains => "grains",
        }
    }

    /// Whether sparsity counts gradient groups rather than pixels.
    pub fn gradient_domain(&self) -> bool {
        matches!(self, ImageClass::AltProjIsoTv)
    }
}

impl fmt::Display for ImageClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ImageClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "signedspikes" => Ok(ImageClass::SignedSpikes),
            "spikes" => Ok(ImageClass::Spikes),
            "altprojisotv" => Ok(ImageClass::AltProjIsoTv),
            "grains" => Ok(ImageClass::Grains),
            other => Err(Error::InvalidArgument(format!("unknown image class '{other}'"))),
        }
    }
}

pub const DEFAULT_ALTPROJ_MAX_ITER: usize = 200;

fn spikes(n: usize, s: usize, seed: u64, lo: f64) -> Result<Vec<f64>> {
    if s > n {
        return Err(Error::InvalidArgument(format!(
            "sparsity {s} exceeds pixel count {n}"
        )));
    }
    let mut r = rng::rng(seed);
    let support = index::sample(&mut r, n, s);
    let mut x = vec![0.0; n];
    for j in support {
        x[j] = loop {
            let v = lo + (1.0 - lo) * r.random::<f64>();
            if v != 0.0 {
                break v;
            }
        };
    }
    Ok(x)
}

/// `s` pixels at uniformly chosen distinct locations with values uniform on
/// `[-1, 1]`; all other pixels zero.
pub fn gen_signedspikes(n_pixels: usize, s: usize, seed: u64) -> Result<Vec<f64>> {
    spikes(n_pixels, s, seed, -1.0)
}

/// As [`gen_signedspikes`] with values uniform on `[0, 1]`.
pub fn gen_spikes(n_pixels: usize, s: usize, seed: u64) -> Result<Vec<f64>> {
    spikes(n_pixels, s, seed, 0.0)
}

/// Union of `n_grains` random disks with uniform amplitudes; later grains
/// overwrite earlier ones. Nonnegative and piecewise constant.
pub fn gen_grains(mask: &DiskMask, n_grains: usize, seed: u64) -> Result<Vec<f64>> {
    if n_grains == 0 {
        return Err(Error::InvalidArgument("n_grains must be at least 1".into()));
    }
    let mut r = rng::rng(seed);
    let half = mask.n_side() as f64 / 2.0;
    let max_radius = (half / 3.0).max(1.0);
    let mut x = vec![0.0; mask.n_pixels()];
    for _ in 0..n_grains {
        // center drawn uniformly over the disk
        let (cx, cy) = loop {
            let cx = (2.0 * r.random::<f64>() - 1.0) * half;
            let cy = (2.0 * r.random::<f64>() - 1.0) * half;
            if cx.hypot(cy) <= half {
                break (cx, cy);
            }
        };
        let radius = 0.5 + (max_radius - 0.5) * r.random::<f64>();
        let amp = loop {
            let a = r.random::<f64>();
            if a != 0.0 {
                break a;
            }
        };
        for (j, &(row, col)) in mask.indices().iter().enumerate() {
            let px = col as f64 + 0.5 - half;
            let py = half - row as f64 - 0.5;
            if (px - cx).hypot(py - cy) <= radius {
                x[j] = amp;
            }
        }
    }
    Ok(x)
}

/// Image whose gradient-magnitude sparsity lies in `[0.9 * t, t]` with
/// `t = min(s_grad, grad.max_support())`.
///
/// Start from smoothed noise, keep the `k` largest gradient groups, and
/// project onto the images whose gradient vanishes on all other groups (each
/// connected set of pixels joined by a zeroed difference takes its mean).
/// Threshold and projection alternate until the support is a fixed point.
/// The kept count `k >= t` is bisected until the achieved sparsity lands in
/// the band; fresh starts are drawn while the iteration budget lasts.
pub fn gen_altprojisotv(
    mask: &DiskMask,
    s_grad: usize,
    seed: u64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = mask.n_pixels();
    if s_grad == 0 || s_grad > n {
        return Err(Error::InvalidArgument(format!(
            "gradient sparsity {s_grad} outside [1, {n}]"
        )));
    }
    let grad = Gradient::new(mask);
    let target = s_grad.min(grad.max_support());
    let lower = (0.9 * target as f64).ceil() as usize;

    if target == grad.max_support() {
        let mut r = rng::rng(seed);
        let x: Vec<f64> = (0..n).map(|_| 0.5 + 0.5 * r.random::<f64>()).collect();
        return Ok(normalize_max(x));
    }

    let frac = target as f64 / n as f64;
    let passes = ((0.5 / (frac * frac)).round() as usize).min(4 * n);
    let mut budget = max_iter.max(1);
    let mut best = 0usize;
    let mut attempt = 0u64;
    while budget > 0 {
        let mut r = rng::rng(rng::mix(&[seed, attempt]));
        attempt += 1;
        let start = smoothed_noise(&grad, &mut r, passes);
        let (mut lo, mut hi) = (target, grad.max_support());
        while lo <= hi && budget > 0 {
            let keep = lo + (hi - lo) / 2;
            let (x, used) = threshold_project(&grad, start.clone(), keep, budget);
            budget = budget.saturating_sub(used);
            let achieved = grad.sparsity(&x, None)?;
            if achieved <= target {
                best = best.max(achieved);
            }
            if achieved > target {
                if keep == 0 {
                    break;
                }
                hi = keep - 1;
            } else if achieved < lower {
                lo = keep + 1;
            } else {
                return Ok(normalize_max(x));
            }
        }
    }
    Err(Error::SparsityTarget {
        target,
        achieved: best,
    })
}

fn normalize_max(mut x: Vec<f64>) -> Vec<f64> {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v /= m);
    }
    x
}

fn smoothed_noise(grad: &Gradient, r: &mut Rng, passes: usize) -> Vec<f64> {
    let n = grad.n_pixels();
    let mut x: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.5).collect();
    // undirected 4-neighborhoods from the forward links
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        for k in [grad.right()[j], grad.down()[j]].into_iter().flatten() {
            nbrs[j].push(k);
            nbrs[k].push(j);
        }
    }
    let mut next = vec![0.0; n];
    for _ in 0..passes {
        for j in 0..n {
            let s: f64 = nbrs[j].iter().map(|&k| x[k]).sum();
            next[j] = (x[j] + s) / (1 + nbrs[j].len()) as f64;
        }
        std::mem::swap(&mut x, &mut next);
    }
    normalize_max(x)
}

/// Alternate "keep `keep` largest groups" and the exact projection onto the
/// corresponding piecewise-constant subspace until the kept set repeats.
fn threshold_project(grad: &Gradient, mut x: Vec<f64>, keep: usize, budget: usize) -> (Vec<f64>, usize) {
    let n = grad.n_pixels();
    let mut prev: Option<Vec<bool>> = None;
    let mut used = 0;
    while used < budget {
        used += 1;
        let mags = grad.apply(&x).expect("length checked").magnitudes();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| mags[b].partial_cmp(&mags[a]).unwrap().then(a.cmp(&b)));
        let mut kept = vec![false; n];
        for &j in order.iter().take(keep) {
            if mags[j] > 0.0 {
                kept[j] = true;
            }
        }
        if prev.as_ref() == Some(&kept) {
            break;
        }
        x = project_piecewise_constant(grad, &x, &kept);
        prev = Some(kept);
    }
    (x, used)
}

fn project_piecewise_constant(grad: &Gradient, x: &[f64], kept: &[bool]) -> Vec<f64> {
    let n = grad.n_pixels();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    for j in 0..n {
        if kept[j] {
            continue;
        }
        for k in [grad.right()[j], grad.down()[j]].into_iter().flatten() {
            let (ra, rb) = (find(&mut parent, j), find(&mut parent, k));
            if ra != rb {
                parent[ra] = rb;
            }
        }
    }
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for j in 0..n {
        let r = find(&mut parent, j);
        sum[r] += x[j];
        count[r] += 1;
    }
    (0..n)
        .map(|j| {
            let r = find(&mut parent, j);
            sum[r] / count[r] as f64
        })
        .collect()
}

/// Draw one image of `class` with nominal sparsity `s` (pixels, gradient
/// groups, or grains for the grains class).
pub fn generate(class: ImageClass, mask: &DiskMask, s: usize, seed: u64) -> Result<Vec<f64>> {
    match class {
        ImageClass::SignedSpikes => gen_signedspikes(mask.n_pixels(), s, seed),
        ImageClass::Spikes => gen_spikes(mask.n_pixels(), s, seed),
        ImageClass::AltProjIsoTv => gen_altprojisotv(mask, s, seed, DEFAULT_ALTPROJ_MAX_ITER),
        ImageClass::Grains => gen_grains(mask, s.max(1), seed),
    }
}
