use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::RateGrid;
use crate::error::{Error, Result};
use crate::theory::{Curve, CurveKind};

/// Level set of a rate grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub level: f64,
    /// One ordinate per abscissa line crossed by the main branch. Empty when
    /// the level is never crossed.
    pub curve: Curve,
    /// Main branch as traced, including vertices on abscissa-direction edges.
    pub polyline: Vec<(f64, f64)>,
    /// Crossings not represented in `curve`: other branches and secondary
    /// crossings of multi-valued lines.
    pub extras: Vec<(f64, f64)>,
}

impl Contour {
    pub fn is_empty(&self) -> bool {
        self.polyline.is_empty()
    }
}

/// Lattice edge carrying a crossing: `(a, o, vertical)` starts at node
/// `(a, o)` and runs along the ordinate (`vertical`) or the abscissa.
type EdgeId = (usize, usize, bool);

/// Marching squares on the cell-center lattice with linear interpolation
/// along edges; the longest connected branch becomes the curve.
pub fn extract_contour(grid: &RateGrid, level: f64) -> Result<Contour> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("contour level must lie in (0, 1), got {level}")));
    }
    let (xs, ys) = grid.axes();
    let (w, h) = (xs.len(), ys.len());
    let above = |a: usize, o: usize| grid.at(a, o).map(|v| v >= level);

    let point = |e: EdgeId| -> (f64, f64) {
        let (a, o, vertical) = e;
        let (a1, o1) = if vertical { (a, o + 1) } else { (a + 1, o) };
        let v0 = grid.at(a, o).expect("edge endpoints exist");
        let v1 = grid.at(a1, o1).expect("edge endpoints exist");
        let t = (level - v0) / (v1 - v0);
        (xs[a] + t * (xs[a1] - xs[a]), ys[o] + t * (ys[o1] - ys[o]))
    };

    let mut links: HashMap<EdgeId, Vec<EdgeId>> = HashMap::new();
    for a in 0..w.saturating_sub(1) {
        for o in 0..h.saturating_sub(1) {
            let corners = [above(a, o), above(a + 1, o), above(a + 1, o + 1), above(a, o + 1)];
            let [Some(bl), Some(br), Some(tr), Some(tl)] = corners else {
                continue;
            };
            let bottom = (a, o, false);
            let right = (a + 1, o, true);
            let top = (a, o + 1, false);
            let left = (a, o, true);
            let mut cut = Vec::new();
            if bl != br {
                cut.push(bottom);
            }
            if br != tr {
                cut.push(right);
            }
            if tr != tl {
                cut.push(top);
            }
            if tl != bl {
                cut.push(left);
            }
            let segments = match cut.len() {
                0 => vec![],
                2 => vec![(cut[0], cut[1])],
                _ => {
                    let center = [(a, o), (a + 1, o), (a + 1, o + 1), (a, o + 1)]
                        .iter()
                        .map(|&(p, q)| grid.at(p, q).expect("present"))
                        .sum::<f64>()
                        / 4.0;
                    // join the two corners that agree with the center value
                    if (center >= level) == bl {
                        vec![(bottom, right), (top, left)]
                    } else {
                        vec![(bottom, left), (top, right)]
                    }
                }
            };
            for (p, q) in segments {
                links.entry(p).or_default().push(q);
                links.entry(q).or_default().push(p);
            }
        }
    }

    let mut branches = trace_branches(&links);
    let length = |b: &[EdgeId]| -> f64 {
        b.windows(2)
            .map(|s| {
                let (p, q) = (point(s[0]), point(s[1]));
                (q.0 - p.0).hypot(q.1 - p.1)
            })
            .sum()
    };
    branches.sort_by(|p, q| length(q).total_cmp(&length(p)).then(q.len().cmp(&p.len())).then(p.cmp(q)));

    let mut extras: Vec<(f64, f64)> = Vec::new();
    let mut polyline = Vec::new();
    let mut points = Vec::new();
    if let Some(main) = branches.first() {
        polyline = main.iter().map(|&e| point(e)).collect();
        let mut ords: Vec<f64> = polyline.iter().map(|p| p.1).collect();
        ords.sort_by(f64::total_cmp);
        let band = ords[ords.len() / 2];
        let mut by_line: Vec<Vec<(f64, f64)>> = vec![Vec::new(); w];
        for &e in main {
            if e.2 {
                by_line[e.0].push(point(e));
            }
        }
        for line in by_line.iter_mut() {
            line.sort_by(|p, q| (p.1 - band).abs().total_cmp(&(q.1 - band).abs()).then(p.1.total_cmp(&q.1)));
            if let Some((&first, rest)) = line.split_first() {
                if (0.0..=1.0).contains(&first.0) && (0.0..=1.0).contains(&first.1) {
                    points.push(first);
                } else {
                    extras.push(first);
                }
                extras.extend_from_slice(rest);
            }
        }
        for other in &branches[1..] {
            extras.extend(other.iter().map(|&e| point(e)));
        }
    }
    let curve = Curve::new(
        grid.diagram_kind.coords(),
        points,
        CurveKind::EmpiricalContour,
        format!("{}% success contour", level * 100.0),
    )?;
    Ok(Contour {
        level,
        curve,
        polyline,
        extras,
    })
}

/// Chains of linked edges: open chains first walked from an endpoint, then
/// closed loops.
fn trace_branches(links: &HashMap<EdgeId, Vec<EdgeId>>) -> Vec<Vec<EdgeId>> {
    let mut keys: Vec<EdgeId> = links.keys().copied().collect();
    keys.sort();
    let mut visited: HashMap<EdgeId, bool> = keys.iter().map(|&k| (k, false)).collect();
    let mut out = Vec::new();
    let starts: Vec<EdgeId> = keys
        .iter()
        .copied()
        .filter(|k| links[k].len() == 1)
        .chain(keys.iter().copied())
        .collect();
    for start in starts {
        if visited[&start] {
            continue;
        }
        let mut chain = vec![start];
        visited.insert(start, true);
        let mut cur = start;
        loop {
            let next = links[&cur].iter().copied().find(|n| !visited[n]);
            match next {
                Some(n) => {
                    visited.insert(n, true);
                    chain.push(n);
                    cur = n;
                }
                None => {
                    // close loops so their length counts the last segment
                    if chain.len() > 2 && links[&cur].contains(&start) {
                        chain.push(start);
                    }
                    break;
                }
            }
        }
        out.push(chain);
    }
    out
}

/// Grid direction along which widths are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Sparsity,
    Sampling,
}

/// Distance between the 5% and 95% crossings on each grid line running
/// along `axis`, in that axis' units. Lines where either level is never
/// crossed give `None`. With several crossings the outermost pair is used.
pub fn transition_width(grid: &RateGrid, axis: Axis) -> Vec<Option<f64>> {
    let (lines, along) = match axis {
        Axis::Sampling => (grid.n_sparsity(), grid.n_sampling()),
        Axis::Sparsity => (grid.n_sampling(), grid.n_sparsity()),
    };
    (0..lines)
        .map(|l| {
            let samples: Vec<(f64, f64)> = (0..along)
                .filter_map(|k| {
                    let (i, j, pos) = match axis {
                        Axis::Sampling => (l, k, grid.sampling[k]),
                        Axis::Sparsity => (k, l, grid.sparsity[k]),
                    };
                    grid.get(i, j).map(|v| (pos, v))
                })
                .collect();
            let lo = crossings(&samples, 0.05);
            let hi = crossings(&samples, 0.95);
            if lo.is_empty() || hi.is_empty() {
                return None;
            }
            let all = lo.iter().chain(&hi);
            let min = all.clone().copied().fold(f64::INFINITY, f64::min);
            let max = all.copied().fold(f64::NEG_INFINITY, f64::max);
            Some(max - min)
        })
        .collect()
}

fn crossings(samples: &[(f64, f64)], level: f64) -> Vec<f64> {
    samples
        .windows(2)
        .filter(|w| (w[0].1 >= level) != (w[1].1 >= level))
        .map(|w| {
            let t = (level - w[0].1) / (w[1].1 - w[0].1);
            w[0].0 + t * (w[1].0 - w[0].0)
        })
        .collect()
}
