use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixels of an `n_side x n_side` grid whose centers lie in the inscribed
/// closed disk of radius `n_side / 2`.
///
/// Pixel `(row, col)` covers `x in [col - n/2, col + 1 - n/2]` and
/// `y in [n/2 - row - 1, n/2 - row]`; row 0 is the top of the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskMask {
    n_side: usize,
    indices: Vec<(usize, usize)>,
    #[serde(skip)]
    lookup: Vec<Option<u32>>,
}

impl DiskMask {
    pub fn new(n_side: usize) -> Result<Self> {
        if n_side < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_side must be at least 2, got {n_side}"
            )));
        }
        let half = n_side as f64 / 2.0;
        let mut indices = Vec::new();
        let mut lookup = vec![None; n_side * n_side];
        for row in 0..n_side {
            for col in 0..n_side {
                let dx = col as f64 + 0.5 - half;
                let dy = row as f64 + 0.5 - half;
                if dx.hypot(dy) <= half {
                    lookup[row * n_side + col] = Some(indices.len() as u32);
                    indices.push((row, col));
                }
            }
        }
        Ok(Self {
            n_side,
            indices,
            lookup,
        })
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }

    pub fn n_pixels(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    /// Column index of pixel `(row, col)`, or `None` outside the mask or grid.
    pub fn index_of(&self, row: isize, col: isize) -> Option<usize> {
        let n = self.n_side as isize;
        if row < 0 || col < 0 || row >= n || col >= n {
            return None;
        }
        self.lookup[(row * n + col) as usize].map(|k| k as usize)
    }

    /// Scatter masked values into a dense row-major square (zeros outside).
    pub fn to_square(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_side * self.n_side];
        for (&(r, c), &v) in self.indices.iter().zip(values) {
            out[r * self.n_side + c] = v;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_count(n: usize) -> usize {
        let r2 = (n * n) as i64; // (2 * radius)^2 in doubled coordinates
        let mut count = 0;
        for row in 0..n as i64 {
            for col in 0..n as i64 {
                // doubled coordinates keep everything integral
                let dx = 2 * col + 1 - n as i64;
                let dy = 2 * row + 1 - n as i64;
                if dx * dx + dy * dy <= r2 {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn small_masks() {
        assert_eq!(DiskMask::new(2).unwrap().n_pixels(), 4);
        assert!(DiskMask::new(1).is_err());
        assert!(DiskMask::new(0).is_err());
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        for n in [3, 8, 16, 31, 32] {
            assert_eq!(DiskMask::new(n).unwrap().n_pixels(), brute_force_count(n));
        }
    }

    #[test]
    fn reference_column_count_at_64() {
        assert_eq!(DiskMask::new(64).unwrap().n_pixels(), 3228);
    }

    #[test]
    fn indices_sorted_unique_and_inside() {
        let mask = DiskMask::new(20).unwrap();
        let idx = mask.indices();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        for (k, &(r, c)) in idx.iter().enumerate() {
            let d = (c as f64 + 0.5 - 10.0).hypot(r as f64 + 0.5 - 10.0);
            assert!(d <= 10.0);
            assert_eq!(mask.index_of(r as isize, c as isize), Some(k));
        }
        assert_eq!(mask.index_of(-1, 3), None);
        assert_eq!(mask.index_of(0, 0), None);
    }
}
