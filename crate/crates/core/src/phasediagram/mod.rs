//! Phase-diagram sweeps: grid planning, per-cell recovery experiments,
//! success-rate aggregation, contour extraction and transition widths.

mod contour;
mod rates;
mod recovery;
mod run;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use contour::{extract_contour, transition_width, Axis, Contour};
pub use rates::{success_rates, RateGrid};
pub use recovery::{recovery_curve, RecoveryRow};
pub use run::{normalized_results_csv, read_results_csv, results_csv, run_diagram, DiagramResult, RunOptions};

use crate::error::{Error, Result};
use crate::phantoms::{self, Gradient, ImageClass};
use crate::rng;
use crate::sensing::{self, DiskMask, FanbeamConfig, SensingMatrix};
use crate::solvers::{check_recovery, lp_oracle, solve_cp, ProblemKind, Solution, SolverConfig, DEFAULT_ORACLE_MAX_VARS};
use crate::theory::Coords;

pub const PAPER_REALIZATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagramKind {
    Dt,
    Almt,
}

impl DiagramKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiagramKind::Dt => "dt",
            DiagramKind::Almt => "almt",
        }
    }

    pub fn coords(&self) -> Coords {
        match self {
            DiagramKind::Dt => Coords::Dt,
            DiagramKind::Almt => Coords::Almt,
        }
    }
}

impl fmt::Display for DiagramKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DiagramKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dt" => Ok(DiagramKind::Dt),
            "almt" => Ok(DiagramKind::Almt),
            other => Err(Error::InvalidArgument(format!("unknown diagram type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Fanbeam,
    FanbeamRand,
    RandomRays,
    Gaussian,
}

impl GeometryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GeometryKind::Fanbeam => "fanbeam",
            GeometryKind::FanbeamRand => "fanbeam_rand",
            GeometryKind::RandomRays => "random_rays",
            GeometryKind::Gaussian => "gaussian",
        }
    }

    /// Whether sampling levels count views (`m = views * 2 * n_side`) rather
    /// than rows.
    pub fn counts_views(&self) -> bool {
        matches!(self, GeometryKind::Fanbeam | GeometryKind::FanbeamRand)
    }

    /// Gaussian matrices are redrawn per realization; CT matrices are fixed
    /// per sampling level.
    pub fn fresh_per_realization(&self) -> bool {
        matches!(self, GeometryKind::Gaussian)
    }

    /// Matrix with `level` views (CT) or rows (random rays, Gaussian) over
    /// `n` unknowns.
    pub fn build(&self, n_side: usize, n: usize, level: usize, seed: u64) -> Result<SensingMatrix> {
        match self {
            GeometryKind::Fanbeam => sensing::build_fanbeam(&FanbeamConfig::new(n_side, level)),
            GeometryKind::FanbeamRand => sensing::build_fanbeam_random(n_side, level, seed),
            GeometryKind::RandomRays => sensing::build_random_rays(n_side, level, seed),
            GeometryKind::Gaussian => sensing::build_gaussian(level, n, seed),
        }
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeometryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fanbeam" => Ok(GeometryKind::Fanbeam),
            "fanbeam_rand" => Ok(GeometryKind::FanbeamRand),
            "random_rays" => Ok(GeometryKind::RandomRays),
            "gaussian" => Ok(GeometryKind::Gaussian),
            other => Err(Error::InvalidArgument(format!("unknown geometry '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub diagram_kind: DiagramKind,
    pub geometry: GeometryKind,
    pub n_side: usize,
    /// Unknowns of a flat (maskless) Gaussian domain; `None` uses the disk.
    pub n_pixels: Option<usize>,
    pub image_class: ImageClass,
    pub problem_kind: ProblemKind,
    /// View counts for CT geometries, row counts otherwise; ascending.
    pub sampling_levels: Vec<usize>,
    /// `s/N` (ALMT) or `rho = s/m` (DT); ascending, in `(0, 1]`.
    pub sparsity_levels: Vec<f64>,
    pub realizations: usize,
    pub master_seed: u64,
    /// Used for TV cells, and for P1/LP cells beyond the oracle bound.
    pub solver: SolverConfig,
    pub oracle_max_vars: usize,
}

/// Desk-scale replacements for the paper-default grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridOverrides {
    pub sampling_levels: Option<Vec<usize>>,
    pub sparsity_levels: Option<Vec<f64>>,
    pub realizations: Option<usize>,
    pub master_seed: Option<u64>,
    pub n_pixels: Option<usize>,
    pub solver: Option<SolverConfig>,
    pub oracle_max_vars: Option<usize>,
}

/// One `(cell, realization)` task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskKey {
    pub i: usize,
    pub j: usize,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub diagram_kind: DiagramKind,
    pub i: usize,
    pub j: usize,
    pub r: usize,
    pub s: usize,
    pub m: usize,
    /// Views for CT geometries, 0 otherwise.
    pub n_views: usize,
    pub seed: u64,
    /// NaN when the phantom or the solver failed.
    pub relative_error: f64,
    pub success: bool,
    pub iterations: usize,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub error: Option<String>,
}

impl CellResult {
    pub fn key(&self) -> TaskKey {
        TaskKey {
            i: self.i,
            j: self.j,
            r: self.r,
        }
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// Paper-default grid for `geometry` at `n_side`, with `overrides` applied.
///
/// Defaults: 39 sparsity levels `0.025..0.975` (ALMT) or 32 levels `k/32`
/// (DT); sampling from one view up to the first count with `m >= N`
/// (26 views at `n_side = 64`); 100 realizations.
pub fn plan_grid(
    diagram_kind: DiagramKind,
    geometry: GeometryKind,
    image_class: ImageClass,
    problem_kind: ProblemKind,
    n_side: usize,
    overrides: GridOverrides,
) -> Result<GridSpec> {
    let mask = sensing::disk_mask(n_side)?;
    let n = overrides.n_pixels.unwrap_or(mask.n_pixels());
    let rays = 2 * n_side;
    let full = n.div_ceil(rays);
    let sampling_levels = overrides.sampling_levels.unwrap_or_else(|| {
        if geometry.counts_views() {
            (1..=full).collect()
        } else {
            (1..=full).map(|k| k * rays).collect()
        }
    });
    let sparsity_levels = overrides.sparsity_levels.unwrap_or_else(|| match diagram_kind {
        DiagramKind::Almt => (1..=39).map(|k| k as f64 / 40.0).collect(),
        DiagramKind::Dt => (1..=32).map(|k| k as f64 / 32.0).collect(),
    });
    let solver = SolverConfig {
        problem_kind,
        ..overrides.solver.unwrap_or_else(|| SolverConfig::new(problem_kind))
    };
    let spec = GridSpec {
        diagram_kind,
        geometry,
        n_side,
        n_pixels: overrides.n_pixels,
        image_class,
        problem_kind,
        sampling_levels,
        sparsity_levels,
        realizations: overrides.realizations.unwrap_or(PAPER_REALIZATIONS),
        master_seed: overrides.master_seed.unwrap_or(0),
        solver,
        oracle_max_vars: overrides.oracle_max_vars.unwrap_or(DEFAULT_ORACLE_MAX_VARS),
    };
    spec.validate()?;
    Ok(spec)
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.sampling_levels.is_empty() || self.sparsity_levels.is_empty() {
            return bad("empty grid".into());
        }
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if self.sampling_levels.windows(2).any(|w| w[1] <= w[0]) || self.sampling_levels[0] == 0 {
            return bad("sampling levels must be positive and strictly ascending".into());
        }
        if self.sparsity_levels.windows(2).any(|w| w[1] <= w[0])
            || self.sparsity_levels.iter().any(|&f| !(f > 0.0 && f <= 1.0))
        {
            return bad("sparsity levels must lie in (0, 1] and be strictly ascending".into());
        }
        if self.n_pixels.is_some() {
            if self.geometry != GeometryKind::Gaussian {
                return bad("a flat pixel count applies to Gaussian sampling only".into());
            }
            if self.image_class.gradient_domain() || self.problem_kind == ProblemKind::TV {
                return bad("gradient sparsity needs the disk domain".into());
            }
        }
        if self.solver.problem_kind != self.problem_kind {
            return bad("solver configuration is for a different problem".into());
        }
        if self.problem_kind == ProblemKind::LP && self.image_class == ImageClass::SignedSpikes {
            return bad("signed images cannot be recovered under x >= 0".into());
        }
        self.solver.validate()?;
        sensing::disk_mask(self.n_side)?;
        Ok(())
    }

    pub fn mask(&self) -> DiskMask {
        sensing::disk_mask(self.n_side).expect("validated")
    }

    /// Number of unknowns `N`.
    pub fn n_unknowns(&self) -> usize {
        self.n_pixels.unwrap_or_else(|| self.mask().n_pixels())
    }

    /// Measurements at sampling level `j`.
    pub fn m_at(&self, j: usize) -> usize {
        let level = self.sampling_levels[j];
        if self.geometry.counts_views() {
            level * 2 * self.n_side
        } else {
            level
        }
    }

    /// Absolute sparsity of cell `(i, j)`, or `None` when it would exceed `N`.
    pub fn sparsity_at(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.n_unknowns();
        let f = self.sparsity_levels[i];
        let s = match self.diagram_kind {
            DiagramKind::Almt => round_half_up(f * n as f64),
            DiagramKind::Dt => round_half_up(f * self.m_at(j) as f64),
        }
        .max(1);
        match self.diagram_kind {
            DiagramKind::Dt if s > n => None,
            _ => Some(s.min(n)),
        }
    }

    /// Cells times realizations, structurally infeasible cells included.
    pub fn n_planned(&self) -> usize {
        self.sparsity_levels.len() * self.sampling_levels.len() * self.realizations
    }

    /// Feasible tasks in `(i, j, r)` order.
    pub fn tasks(&self) -> Vec<TaskKey> {
        let mut out = Vec::new();
        for i in 0..self.sparsity_levels.len() {
            for j in 0..self.sampling_levels.len() {
                if self.sparsity_at(i, j).is_none() {
                    continue;
                }
                out.extend((0..self.realizations).map(|r| TaskKey { i, j, r }));
            }
        }
        out
    }

    pub fn seed(&self, key: TaskKey) -> u64 {
        rng::mix(&[
            self.master_seed,
            rng::tag(self.diagram_kind.as_str()),
            key.i as u64,
            key.j as u64,
            key.r as u64,
        ])
    }

    /// Seed of the fixed matrix at sampling level `j` (CT geometries).
    pub fn level_seed(&self, j: usize) -> u64 {
        rng::mix(&[self.master_seed, j as u64])
    }

    /// The fixed matrix at sampling level `j`; `None` for Gaussian sampling.
    pub fn level_matrix(&self, j: usize) -> Result<Option<SensingMatrix>> {
        if self.geometry.fresh_per_realization() {
            return Ok(None);
        }
        self.geometry
            .build(self.n_side, self.n_unknowns(), self.sampling_levels[j], self.level_seed(j))
            .map(Some)
    }

    /// Canonical hash identifying this grid in checkpoints.
    pub fn hash(&self) -> u64 {
        rng::tag(&serde_json::to_string(self).expect("serializable"))
    }

    fn draw_phantom(&self, s: usize, seed: u64) -> Result<Vec<f64>> {
        match self.n_pixels {
            Some(n) => match self.image_class {
                ImageClass::SignedSpikes => phantoms::gen_signedspikes(n, s, seed),
                ImageClass::Spikes => phantoms::gen_spikes(n, s, seed),
                other => Err(Error::InvalidArgument(format!("{other} needs the disk domain"))),
            },
            None => phantoms::generate(self.image_class, &self.mask(), s, seed),
        }
    }

    fn solve(&self, a: &SensingMatrix, b: &[f64], gradient: Option<&Gradient>) -> Result<Solution> {
        let n = a.n();
        let vars = match self.problem_kind {
            ProblemKind::P1 => 2 * n,
            _ => n,
        };
        match self.problem_kind {
            ProblemKind::P1 | ProblemKind::LP if vars <= self.oracle_max_vars => {
                lp_oracle(self.problem_kind, a, b)
            }
            _ => solve_cp(&self.solver, a, b, gradient, None),
        }
    }
}

/// Run one realization of cell `(i, j)`. Failures of the phantom generator
/// or the solver are recorded in the result, never returned.
pub fn run_cell(spec: &GridSpec, i: usize, j: usize, r: usize) -> Result<CellResult> {
    spec.validate()?;
    if i >= spec.sparsity_levels.len() || j >= spec.sampling_levels.len() || r >= spec.realizations {
        return Err(Error::InvalidArgument(format!("task ({i}, {j}, {r}) outside the grid")));
    }
    let gradient = (spec.problem_kind == ProblemKind::TV).then(|| Gradient::new(&spec.mask()));
    Ok(run_task(spec, TaskKey { i, j, r }, None, gradient.as_ref()))
}

pub(crate) fn run_task(
    spec: &GridSpec,
    key: TaskKey,
    fixed: Option<&SensingMatrix>,
    gradient: Option<&Gradient>,
) -> CellResult {
    let start = Instant::now();
    let seed = spec.seed(key);
    let m = spec.m_at(key.j);
    let n_views = if spec.geometry.counts_views() {
        spec.sampling_levels[key.j]
    } else {
        0
    };
    let mut result = CellResult {
        diagram_kind: spec.diagram_kind,
        i: key.i,
        j: key.j,
        r: key.r,
        s: spec.sparsity_at(key.i, key.j).unwrap_or(0),
        m,
        n_views,
        seed,
        relative_error: f64::NAN,
        success: false,
        iterations: 0,
        wall_time_s: 0.0,
        error: None,
    };
    let outcome = (|| -> Result<(f64, bool, usize)> {
        if result.s == 0 {
            return Err(Error::InvalidArgument("structurally infeasible cell".into()));
        }
        let x0 = spec.draw_phantom(result.s, seed)?;
        let owned;
        let a = match fixed {
            Some(a) => a,
            None if spec.geometry.fresh_per_realization() => {
                owned = spec.geometry.build(
                    spec.n_side,
                    spec.n_unknowns(),
                    spec.sampling_levels[key.j],
                    // independent of the phantom stream
                    rng::mix(&[seed, 1]),
                )?;
                &owned
            }
            None => {
                owned = spec.geometry.build(
                    spec.n_side,
                    spec.n_unknowns(),
                    spec.sampling_levels[key.j],
                    spec.level_seed(key.j),
                )?;
                &owned
            }
        };
        let b = a.apply(&x0)?;
        let sol = spec.solve(a, &b, gradient)?;
        let rec = check_recovery(&sol.x, &x0, spec.problem_kind.default_epsilon())?;
        Ok((rec.relative_error, rec.success, sol.iterations_run))
    })();
    match outcome {
        Ok((err, success, iterations)) => {
            result.relative_error = err;
            result.success = success;
            result.iterations = iterations;
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result.wall_time_s = start.elapsed().as_secs_f64();
    result
}

#[cfg(test)]
mod tests;
