use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::operator::LinearOperator;

/// Measurement geometry and the parameters that generated a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "snake_case")]
pub enum Geometry {
    Fanbeam {
        n_side: usize,
        n_views: usize,
        offset_deg: f64,
        source_radius: f64,
    },
    FanbeamRand {
        n_side: usize,
        n_views: usize,
        seed: u64,
        source_radius: f64,
    },
    RandomRays {
        n_side: usize,
        n_rays: usize,
        seed: u64,
    },
    Gaussian {
        seed: u64,
    },
}

impl Geometry {
    pub fn tag(&self) -> &'static str {
        match self {
            Geometry::Fanbeam { .. } => "fanbeam",
            Geometry::FanbeamRand { .. } => "fanbeam_rand",
            Geometry::RandomRays { .. } => "random_rays",
            Geometry::Gaussian { .. } => "gaussian",
        }
    }
}

/// Compressed sparse rows without stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Sparse(Csr),
    /// Row-major `m x n`.
    Dense(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    m: usize,
    n: usize,
    storage: Storage,
    geometry: Geometry,
}

impl SensingMatrix {
    pub(crate) fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>, geometry: Geometry) -> Self {
        let m = rows.len();
        let mut row_ptr = Vec::with_capacity(m + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if v == 0.0 {
                    continue;
                }
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            m,
            n,
            storage: Storage::Sparse(Csr {
                row_ptr,
                col_idx,
                values,
            }),
            geometry,
        }
    }

    pub fn from_dense(m: usize, n: usize, data: Vec<f64>, geometry: Geometry) -> Self {
        assert_eq!(data.len(), m * n);
        Self {
            m,
            n,
            storage: Storage::Dense(data),
            geometry,
        }
    }

    pub fn from_csr(m: usize, n: usize, csr: Csr, geometry: Geometry) -> Self {
        assert_eq!(csr.row_ptr.len(), m + 1);
        Self {
            m,
            n,
            storage: Storage::Sparse(csr),
            geometry,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Sparse(csr) => csr.values.len(),
            Storage::Dense(d) => d.len(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        let mut out = vec![0.0; self.m];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m, y.len())?;
        let mut out = vec![0.0; self.n];
        self.apply_transpose_into(y, &mut out);
        Ok(out)
    }

    /// Row `i` as (column, value) pairs.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        match &self.storage {
            Storage::Sparse(csr) => {
                let r = csr.row_ptr[i]..csr.row_ptr[i + 1];
                csr.col_idx[r.clone()]
                    .iter()
                    .copied()
                    .zip(csr.values[r].iter().copied())
                    .collect()
            }
            Storage::Dense(d) => d[i * self.n..(i + 1) * self.n]
                .iter()
                .copied()
                .enumerate()
                .collect(),
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.m)
            .map(|i| self.row(i).iter().map(|&(_, v)| v).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(d) => DMatrix::from_row_slice(self.m, self.n, d),
            Storage::Sparse(csr) => {
                let mut out = DMatrix::zeros(self.m, self.n);
                for i in 0..self.m {
                    for k in csr.row_ptr[i]..csr.row_ptr[i + 1] {
                        out[(i, csr.col_idx[k])] = csr.values[k];
                    }
                }
                out
            }
        }
    }
}

impl LinearOperator for SensingMatrix {
    fn rows(&self) -> usize {
        self.m
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.storage {
            Storage::Sparse(csr) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for k in csr.row_ptr[i]..csr.row_ptr[i + 1] {
                        acc += csr.values[k] * x[csr.col_idx[k]];
                    }
                    *o = acc;
                }
            }
            Storage::Dense(d) => {
                for (o, row) in out.iter_mut().zip(d.chunks_exact(self.n)) {
                    *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        match &self.storage {
            Storage::Sparse(csr) => {
                for (i, &yi) in y.iter().enumerate() {
                    if yi == 0.0 {
                        continue;
                    }
                    for k in csr.row_ptr[i]..csr.row_ptr[i + 1] {
                        out[csr.col_idx[k]] += csr.values[k] * yi;
                    }
                }
            }
            Storage::Dense(d) => {
                for (row, &yi) in d.chunks_exact(self.n).zip(y) {
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += a * yi;
                    }
                }
            }
        }
    }
}
