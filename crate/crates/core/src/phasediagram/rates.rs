use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CellResult, DiagramKind, GridSpec};
use crate::error::{Error, Result};
use crate::io::{read_json, sidecar_path, to_gray, write_atomic, write_json};

/// Per-cell success fractions with the diagram axes they live on.
///
/// Cell `(i, j)` sits at sparsity level `i` and sampling level `j`. The
/// abscissa of the diagram is the sparsity axis for ALMT and the sampling
/// axis for DT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateGrid {
    pub diagram_kind: DiagramKind,
    /// `s/N` (ALMT) or `rho` (DT) per sparsity level.
    pub sparsity: Vec<f64>,
    /// `m/N` per sampling level.
    pub sampling: Vec<f64>,
    /// Row-major over `(i, j)`; `None` for structurally infeasible cells.
    pub rate: Vec<Option<f64>>,
    pub count: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RatesSidecar {
    diagram_kind: DiagramKind,
    sparsity: Vec<f64>,
    sampling: Vec<f64>,
}

impl RateGrid {
    pub fn n_sparsity(&self) -> usize {
        self.sparsity.len()
    }

    pub fn n_sampling(&self) -> usize {
        self.sampling.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rate[i * self.n_sampling() + j]
    }

    /// Abscissa and ordinate values of the lattice, in diagram coordinates.
    pub fn axes(&self) -> (&[f64], &[f64]) {
        match self.diagram_kind {
            DiagramKind::Almt => (&self.sparsity, &self.sampling),
            DiagramKind::Dt => (&self.sampling, &self.sparsity),
        }
    }

    /// Rate at abscissa index `a` and ordinate index `o`.
    pub fn at(&self, a: usize, o: usize) -> Option<f64> {
        match self.diagram_kind {
            DiagramKind::Almt => self.get(a, o),
            DiagramKind::Dt => self.get(o, a),
        }
    }

    /// Grid built from explicit values, mainly for synthetic inputs.
    pub fn from_values(
        diagram_kind: DiagramKind,
        sparsity: Vec<f64>,
        sampling: Vec<f64>,
        rate: Vec<Option<f64>>,
    ) -> Result<Self> {
        crate::error::check_len(sparsity.len() * sampling.len(), rate.len())?;
        let count = rate.iter().map(|r| usize::from(r.is_some())).collect();
        Ok(Self {
            diagram_kind,
            sparsity,
            sampling,
            rate,
            count,
        })
    }

    /// `rates.csv` (`i,j,rate,count`, infeasible cells omitted) plus a JSON
    /// sidecar with the axes.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::from("i,j,rate,count\n");
        for i in 0..self.n_sparsity() {
            for j in 0..self.n_sampling() {
                if let Some(r) = self.get(i, j) {
                    out.push_str(&format!("{i},{j},{r},{}\n", self.count[i * self.n_sampling() + j]));
                }
            }
        }
        write_atomic(path, out.as_bytes())?;
        write_json(
            &sidecar_path(path),
            &RatesSidecar {
                diagram_kind: self.diagram_kind,
                sparsity: self.sparsity.clone(),
                sampling: self.sampling.clone(),
            },
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let side: RatesSidecar = read_json(&sidecar_path(path))?;
        let (ni, nj) = (side.sparsity.len(), side.sampling.len());
        let mut rate = vec![None; ni * nj];
        let mut count = vec![0; ni * nj];
        for line in fs::read_to_string(path)?.lines().skip(1).filter(|l| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Parse(format!("bad rate row '{line}'"));
            if f.len() != 4 {
                return Err(bad());
            }
            let i: usize = f[0].parse().map_err(|_| bad())?;
            let j: usize = f[1].parse().map_err(|_| bad())?;
            if i >= ni || j >= nj {
                return Err(bad());
            }
            rate[i * nj + j] = Some(f[2].parse().map_err(|_| bad())?);
            count[i * nj + j] = f[3].parse().map_err(|_| bad())?;
        }
        Ok(Self {
            diagram_kind: side.diagram_kind,
            sparsity: side.sparsity,
            sampling: side.sampling,
            rate,
            count,
        })
    }

    /// 8-bit heat map, one pixel per cell, rate 0 black and 1 white; the
    /// abscissa runs left to right and the ordinate bottom to top.
    pub fn render(&self) -> (usize, usize, Vec<u8>) {
        let (xs, ys) = self.axes();
        let (w, h) = (xs.len(), ys.len());
        let mut px = vec![0u8; w * h];
        for row in 0..h {
            for col in 0..w {
                px[row * w + col] = to_gray(self.at(col, h - 1 - row).unwrap_or(0.0), 0.0, 1.0);
            }
        }
        (w, h, px)
    }
}

/// Exact success fraction per cell. Every feasible cell must have all of its
/// realizations present.
pub fn success_rates(spec: &GridSpec, results: &[CellResult]) -> Result<RateGrid> {
    let (ni, nj) = (spec.sparsity_levels.len(), spec.sampling_levels.len());
    let mut successes = vec![0usize; ni * nj];
    let mut seen = vec![vec![false; spec.realizations]; ni * nj];
    for r in results {
        if r.i >= ni || r.j >= nj || r.r >= spec.realizations {
            return Err(Error::InvalidArgument(format!("result ({}, {}, {}) outside the grid", r.i, r.j, r.r)));
        }
        let c = r.i * nj + r.j;
        if !seen[c][r.r] {
            seen[c][r.r] = true;
            successes[c] += usize::from(r.success);
        }
    }
    let mut missing = Vec::new();
    let mut rate = vec![None; ni * nj];
    let mut count = vec![0; ni * nj];
    for i in 0..ni {
        for j in 0..nj {
            if spec.sparsity_at(i, j).is_none() {
                continue;
            }
            let c = i * nj + j;
            if seen[c].iter().any(|s| !s) {
                missing.push((i, j));
                continue;
            }
            rate[c] = Some(successes[c] as f64 / spec.realizations as f64);
            count[c] = spec.realizations;
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingCells(missing));
    }
    let n = spec.n_unknowns() as f64;
    Ok(RateGrid {
        diagram_kind: spec.diagram_kind,
        sparsity: spec.sparsity_levels.clone(),
        sampling: (0..nj).map(|j| spec.m_at(j) as f64 / n).collect(),
        rate,
        count,
    })
}
