//! File formats: Matrix Market matrices, one-value-per-line vectors, and
//! 8-bit PGM images, each with a JSON sidecar at `<path>.json`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::{DiskMask, Geometry, SensingMatrix, Storage};

pub fn sidecar_path(path: &Path) -> PathBuf {
    crate::theory::sidecar_path(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub geometry: String,
    pub n_side: Option<usize>,
    pub n_views: Option<usize>,
    pub offset_deg: Option<f64>,
    pub seed: Option<u64>,
    pub m: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_rays: Option<usize>,
}

impl MatrixSidecar {
    pub fn of(a: &SensingMatrix) -> Self {
        let mut s = MatrixSidecar {
            geometry: a.geometry().tag().to_string(),
            n_side: None,
            n_views: None,
            offset_deg: None,
            seed: None,
            m: a.m(),
            n: a.n(),
            source_radius: None,
            n_rays: None,
        };
        match *a.geometry() {
            Geometry::Fanbeam {
                n_side,
                n_views,
                offset_deg,
                source_radius,
            } => {
                s.n_side = Some(n_side);
                s.n_views = Some(n_views);
                s.offset_deg = Some(offset_deg);
                s.source_radius = Some(source_radius);
            }
            Geometry::FanbeamRand {
                n_side,
                n_views,
                seed,
                source_radius,
            } => {
                s.n_side = Some(n_side);
                s.n_views = Some(n_views);
                s.seed = Some(seed);
                s.source_radius = Some(source_radius);
            }
            Geometry::RandomRays {
                n_side,
                n_rays,
                seed,
            } => {
                s.n_side = Some(n_side);
                s.n_rays = Some(n_rays);
                s.seed = Some(seed);
            }
            Geometry::Gaussian { seed } => s.seed = Some(seed),
        }
        s
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| Error::Parse(format!("matrix sidecar lacks '{name}'")))
        };
        let seed = || self.seed.ok_or_else(|| Error::Parse("matrix sidecar lacks 'seed'".into()));
        Ok(match self.geometry.as_str() {
            "fanbeam" => {
                let n_side = need(self.n_side, "n_side")?;
                Geometry::Fanbeam {
                    n_side,
                    n_views: need(self.n_views, "n_views")?,
                    offset_deg: self.offset_deg.unwrap_or(crate::sensing::DEFAULT_OFFSET_DEG),
                    source_radius: self.source_radius.unwrap_or(2.0 * n_side as f64),
                }
            }
            "fanbeam_rand" => {
                let n_side = need(self.n_side, "n_side")?;
                Geometry::FanbeamRand {
                    n_side,
                    n_views: need(self.n_views, "n_views")?,
                    seed: seed()?,
                    source_radius: self.source_radius.unwrap_or(2.0 * n_side as f64),
                }
            }
            "random_rays" => Geometry::RandomRays {
                n_side: need(self.n_side, "n_side")?,
                n_rays: self.n_rays.unwrap_or(self.m),
                seed: seed()?,
            },
            "gaussian" => Geometry::Gaussian { seed: seed()? },
            other => return Err(Error::Parse(format!("unknown geometry '{other}'"))),
        })
    }
}

/// Coordinate format for sparse matrices, array (column-major) for dense
/// ones. Values use the shortest round-trip decimal representation.
pub fn write_matrix_market(a: &SensingMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    match a.storage() {
        Storage::Sparse(csr) => {
            writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
            writeln!(w, "% geometry {}", a.id())?;
            writeln!(w, "{} {} {}", a.m(), a.n(), csr.values.len())?;
            for i in 0..a.m() {
                for k in csr.row_ptr[i]..csr.row_ptr[i + 1] {
                    writeln!(w, "{} {} {}", i + 1, csr.col_idx[k] + 1, csr.values[k])?;
                }
            }
        }
        Storage::Dense(data) => {
            writeln!(w, "%%MatrixMarket matrix array real general")?;
            writeln!(w, "% geometry {}", a.id())?;
            writeln!(w, "{} {}", a.m(), a.n())?;
            for j in 0..a.n() {
                for i in 0..a.m() {
                    writeln!(w, "{}", data[i * a.n() + j])?;
                }
            }
        }
    }
    w.flush()?;
    write_json(&sidecar_path(path), &MatrixSidecar::of(a))
}

pub fn read_matrix_market(path: &Path) -> Result<SensingMatrix> {
    let sidecar: MatrixSidecar = read_json(&sidecar_path(path))?;
    let geometry = sidecar.geometry()?;
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let bad = |msg: &str| Error::Parse(format!("{}: {msg}", path.display()));
    let header = lines.next().ok_or_else(|| bad("empty file"))??;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[3] != "real" || tokens[4] != "general" {
        return Err(bad("unsupported Matrix Market header"));
    }
    let dense = match tokens[2].as_str() {
        "coordinate" => false,
        "array" => true,
        _ => return Err(bad("unsupported Matrix Market layout")),
    };
    let mut body = lines.filter(|l| l.as_ref().map(|s| !s.starts_with('%') && !s.trim().is_empty()).unwrap_or(true));
    let size = body.next().ok_or_else(|| bad("missing size line"))??;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad size line")))
        .collect::<Result<_>>()?;
    let parse_f = |t: &str| t.parse::<f64>().map_err(|_| bad(&format!("bad value '{t}'")));
    if dense {
        let [m, n] = dims[..] else {
            return Err(bad("array size line needs two numbers"));
        };
        let mut data = vec![0.0; m * n];
        for k in 0..m * n {
            let line = body.next().ok_or_else(|| bad("too few values"))??;
            let (j, i) = (k / m, k % m);
            data[i * n + j] = parse_f(line.trim())?;
        }
        Ok(SensingMatrix::from_dense(m, n, data, geometry))
    } else {
        let [m, n, nnz] = dims[..] else {
            return Err(bad("coordinate size line needs three numbers"));
        };
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for _ in 0..nnz {
            let line = body.next().ok_or_else(|| bad("too few entries"))??;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(bad(&format!("bad entry '{line}'")));
            }
            let i: usize = t[0].parse().map_err(|_| bad("bad row index"))?;
            let j: usize = t[1].parse().map_err(|_| bad("bad column index"))?;
            if i == 0 || i > m || j == 0 || j > n {
                return Err(bad(&format!("entry ({i}, {j}) out of range")));
            }
            rows[i - 1].push((j - 1, parse_f(t[2])?));
        }
        Ok(SensingMatrix::from_rows(n, rows, geometry))
    }
}

/// One value per line.
pub fn write_vector(path: &Path, values: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(values.len() * 20);
    for v in values {
        out.push_str(&format!("{v}\n"));
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(k, l)| {
            l.parse()
                .map_err(|_| Error::Parse(format!("{}:{}: bad value '{l}'", path.display(), k + 1)))
        })
        .collect()
}

/// Binary 8-bit PGM, row-major.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: width * height,
            got: pixels.len(),
        });
    }
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(pixels);
    write_atomic(path, &bytes)
}

pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let bad = || Error::Parse(format!("{}: not a binary 8-bit PGM", path.display()));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let w: usize = fields[1].parse().map_err(|_| bad())?;
    let h: usize = fields[2].parse().map_err(|_| bad())?;
    if fields[0] != "P5" || fields[3] != "255" || bytes.len() < pos + w * h {
        return Err(bad());
    }
    Ok((w, h, bytes[pos..pos + w * h].to_vec()))
}

/// Linear window `[lo, hi] -> [0, 255]`, clamped.
pub fn to_gray(v: f64, lo: f64, hi: f64) -> u8 {
    let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    (t.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Square rendering of a masked image; pixels outside the disk are black.
pub fn render_image(mask: &DiskMask, x: &[f64], lo: f64, hi: f64) -> Result<(usize, usize, Vec<u8>)> {
    crate::error::check_len(mask.n_pixels(), x.len())?;
    let n = mask.n_side();
    let mut px = vec![0u8; n * n];
    for (&(row, col), &v) in mask.indices().iter().zip(x) {
        px[row * n + col] = to_gray(v, lo, hi);
    }
    Ok((n, n, px))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{build_fanbeam, build_gaussian, build_random_rays, FanbeamConfig};

    #[test]
    fn matrix_market_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.mtx");
        for a in [
            build_fanbeam(&FanbeamConfig::new(8, 3)).unwrap(),
            build_gaussian(5, 7, 2).unwrap(),
            build_random_rays(8, 10, 4).unwrap(),
        ] {
            write_matrix_market(&a, &p).unwrap();
            assert_eq!(read_matrix_market(&p).unwrap(), a);
            let side: serde_json::Value = read_json(&sidecar_path(&p)).unwrap();
            for key in ["geometry", "n_side", "n_views", "offset_deg", "seed", "m", "n"] {
                assert!(side.get(key).is_some(), "{key}");
            }
        }
    }

    #[test]
    fn fanbeam_header_counts() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.mtx");
        write_matrix_market(&build_fanbeam(&FanbeamConfig::new(16, 4)).unwrap(), &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let size = text.lines().find(|l| !l.starts_with('%')).unwrap();
        assert!(size.starts_with("128 "));
    }

    #[test]
    fn malformed_matrix_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.mtx");
        let a = build_gaussian(2, 2, 1).unwrap();
        write_matrix_market(&a, &p).unwrap();
        fs::write(&p, "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").unwrap();
        assert!(read_matrix_market(&p).is_err());
        fs::write(&p, "%%MatrixMarket matrix coordinate complex general\n2 2 0\n").unwrap();
        assert!(read_matrix_market(&p).is_err());
    }

    #[test]
    fn vectors_and_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let x = vec![0.1, -2.5e-17, 3.0, f64::MIN_POSITIVE];
        write_vector(&p, &x).unwrap();
        assert_eq!(read_vector(&p).unwrap(), x);

        let q = dir.path().join("x.pgm");
        write_pgm(&q, 3, 2, &[0, 1, 2, 3, 4, 255]).unwrap();
        assert_eq!(read_pgm(&q).unwrap(), (3, 2, vec![0, 1, 2, 3, 4, 255]));
        assert!(write_pgm(&q, 3, 3, &[0]).is_err());
        assert_eq!((to_gray(-1.0, 0.0, 1.0), to_gray(0.5, 0.0, 1.0), to_gray(2.0, 0.0, 1.0)), (0, 128, 255));
    }
}
