//! Phase-transition curves: theoretical Gaussian curves, import/export, and
//! conversion between the two diagram coordinate systems.
//!
//! * DT coordinates: `(delta, rho) = (m/N, s/m)`.
//! * ALMT coordinates: `(s/N, m/N)`.

mod psi;
pub mod quad;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use psi::{off_support_moment, psi_l1, psi_l1_nonneg};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coords {
    Dt,
    Almt,
}

impl Coords {
    pub fn as_str(&self) -> &'static str {
        match self {
            Coords::Dt => "dt",
            Coords::Almt => "almt",
        }
    }
}

impl fmt::Display for Coords {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Coords {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dt" => Ok(Coords::Dt),
            "almt" => Ok(Coords::Almt),
            other => Err(Error::InvalidArgument(format!("unknown coordinates '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    TheoreticalL1,
    TheoreticalL1Nonneg,
    Imported,
    EmpiricalContour,
}

/// Which regularizer a theoretical curve belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiKind {
    L1,
    L1Nonneg,
}

impl PsiKind {
    pub fn eval(&self, beta: f64) -> f64 {
        match self {
            PsiKind::L1 => psi_l1(beta),
            PsiKind::L1Nonneg => psi_l1_nonneg(beta),
        }
    }

    pub fn curve_kind(&self) -> CurveKind {
        match self {
            PsiKind::L1 => CurveKind::TheoreticalL1,
            PsiKind::L1Nonneg => CurveKind::TheoreticalL1Nonneg,
        }
    }
}

impl FromStr for PsiKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(PsiKind::L1),
            "l1_nonneg" | "l1-nonneg" | "nonneg" => Ok(PsiKind::L1Nonneg),
            other => Err(Error::InvalidArgument(format!("unknown curve '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    coords: Coords,
    points: Vec<(f64, f64)>,
    kind: CurveKind,
    provenance: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveSidecar {
    coords: Coords,
    kind: CurveKind,
    provenance: String,
}

impl Curve {
    /// Validated curve: abscissae strictly increasing, every value in `[0, 1]`.
    pub fn new(
        coords: Coords,
        points: Vec<(f64, f64)>,
        kind: CurveKind,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        for (k, &(x, y)) in points.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
                return Err(Error::Curve(format!("point {k} = ({x}, {y}) outside [0,1]^2")));
            }
        }
        if let Some(k) = points.windows(2).position(|w| w[1].0 <= w[0].0) {
            return Err(Error::Curve(format!(
                "abscissae not strictly increasing at point {}",
                k + 1
            )));
        }
        Ok(Self {
            coords,
            points,
            kind,
            provenance: provenance.into(),
        })
    }

    pub fn coords(&self) -> Coords {
        self.coords
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_kind(mut self, kind: CurveKind, provenance: impl Into<String>) -> Self {
        self.kind = kind;
        self.provenance = provenance.into();
        self
    }

    /// Piecewise-linear interpolation; `None` outside the abscissa range.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let pts = &self.points;
        let (first, last) = (pts.first()?, pts.last()?);
        if x < first.0 || x > last.0 {
            return None;
        }
        let k = pts.partition_point(|p| p.0 < x);
        if k < pts.len() && pts[k].0 == x {
            return Some(pts[k].1);
        }
        let (x0, y0) = pts[k - 1];
        let (x1, y1) = pts[k];
        Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    /// Values on `grid`, dropping grid points outside the curve's support.
    pub fn resample(&self, grid: &[f64]) -> Result<Curve> {
        let points = grid
            .iter()
            .filter_map(|&x| self.interpolate(x).map(|y| (x, y)))
            .collect();
        Curve::new(self.coords, points, self.kind, self.provenance.clone())
    }

    /// Writes `path` as `abscissa,ordinate` lines and a `.json` sidecar.
    pub fn export(&self, path: &Path) -> Result<()> {
        let (xl, yl) = match self.coords {
            Coords::Dt => ("delta", "rho"),
            Coords::Almt => ("s_over_n", "m_over_n"),
        };
        let mut out = format!("{xl},{yl}\n");
        for (x, y) in &self.points {
            out.push_str(&format!("{x},{y}\n"));
        }
        fs::write(path, out)?;
        let sidecar = CurveSidecar {
            coords: self.coords,
            kind: self.kind,
            provenance: self.provenance.clone(),
        };
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    /// Reads a curve written by [`Curve::export`], sidecar included.
    pub fn read(path: &Path) -> Result<Curve> {
        let sidecar: CurveSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
        let points = read_pairs(path)?;
        Curve::new(sidecar.coords, points, sidecar.kind, sidecar.provenance)
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => points.push((v[0], v[1])),
            // a single header line is allowed before any data
            None if points.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(Error::Parse(format!(
                    "{}:{}: expected two numbers, got '{line}'",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(points)
}

/// Reads a two-column CSV of `(abscissa, ordinate)` pairs as an imported curve.
pub fn import_curve(path: &Path, coords: Coords) -> Result<Curve> {
    let points = read_pairs(path)?;
    Curve::new(coords, points, CurveKind::Imported, format!("imported from {}", path.display()))
}

/// Pointwise map between ALMT `(s/N, m/N)` and DT `(m/N, s/m)`. Points with
/// `m/N = 0` have no DT image and are dropped; the result is re-sorted by
/// abscissa, and coinciding abscissae are an error.
pub fn convert_coords(curve: &Curve, target: Coords) -> Result<Curve> {
    if curve.coords == target {
        return Ok(curve.clone());
    }
    let mut points: Vec<(f64, f64)> = match target {
        Coords::Dt => curve
            .points
            .iter()
            .filter(|p| p.1 > 0.0)
            .map(|&(beta, delta)| (delta, beta / delta))
            .collect(),
        Coords::Almt => curve
            .points
            .iter()
            .filter(|p| p.0 > 0.0)
            .map(|&(delta, rho)| (rho * delta, delta))
            .collect(),
    };
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    Curve::new(target, points, curve.kind, curve.provenance.clone())
}

/// Theoretical weak curve in DT coordinates: for each `rho` the fixed point
/// `delta = psi(rho * delta)`, located by bisection.
///
/// Returns the computed `(delta, rho)` pairs sorted by `delta`; use
/// [`Curve::resample`] for values on a regular `delta` grid.
pub fn dt_curve_from_psi(kind: PsiKind, rho_grid: &[f64]) -> Result<Curve> {
    let mut points = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        points.push((dt_fixed_point(kind, rho)?, rho));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    Curve::new(
        Coords::Dt,
        points,
        kind.curve_kind(),
        format!("statistical dimension fixed point ({})", match kind {
            PsiKind::L1 => "l1",
            PsiKind::L1Nonneg => "l1_nonneg",
        }),
    )
}

fn dt_fixed_point(kind: PsiKind, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidArgument(format!("rho must lie in (0, 1], got {rho}")));
    }
    if rho == 1.0 {
        return Ok(1.0);
    }
    // g > 0 just above the trivial root at 0, g(1) = psi(rho) - 1 < 0
    let g = |delta: f64| kind.eval(rho * delta) - delta;
    let mut lo = 0.5;
    while g(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Curve(format!("no nontrivial fixed point for rho = {rho}")));
        }
    }
    let mut hi = 1.0;
    if g(hi) > 0.0 {
        return Err(Error::Curve(format!("bisection bracket failed for rho = {rho}")));
    }
    // relative resolution: at small rho the fixed point is exponentially small
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Regular ALMT curve `(beta, psi(beta))` on `beta = k / (n + 1)`, `k = 1..=n`.
pub fn almt_curve(kind: PsiKind, n: usize) -> Result<Curve> {
    let points = (1..=n)
        .map(|k| {
            let beta = k as f64 / (n + 1) as f64;
            (beta, kind.eval(beta))
        })
        .collect();
    Curve::new(Coords::Almt, points, kind.curve_kind(), "statistical dimension")
}

/// Outcome of checking the one-sided curve against an empirical nonnegative
/// transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonnegGate {
    pub passed: bool,
    /// `(beta, psi_plus(beta), empirical m/N)` at each checked sparsity.
    pub checks: Vec<(f64, f64, Option<f64>)>,
    pub max_deviation: f64,
    /// Theoretical curve if the gate passed, else the empirical calibration
    /// relabeled as imported.
    pub curve: Curve,
}

/// Compare `psi_l1_nonneg` with an empirical ALMT 50% contour at `betas`.
pub fn gate_nonneg(empirical: &Curve, betas: &[f64], tol: f64, n_points: usize) -> Result<NonnegGate> {
    let empirical = convert_coords(empirical, Coords::Almt)?;
    let mut checks = Vec::new();
    let mut max_deviation = 0.0f64;
    let mut passed = true;
    for &beta in betas {
        let theory = psi_l1_nonneg(beta);
        let seen = empirical.interpolate(beta);
        match seen {
            Some(e) => max_deviation = max_deviation.max((e - theory).abs()),
            None => passed = false,
        }
        checks.push((beta, theory, seen));
    }
    passed &= max_deviation <= tol;
    let curve = if passed {
        almt_curve(PsiKind::L1Nonneg, n_points)?
    } else {
        empirical.with_kind(
            CurveKind::Imported,
            format!("empirical nonnegative calibration (one-sided formula off by {max_deviation:.4})"),
        )
    };
    Ok(NonnegGate {
        passed,
        checks,
        max_deviation,
        curve,
    })
}
