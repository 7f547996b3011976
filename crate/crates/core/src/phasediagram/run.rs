use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;

use super::{run_task, success_rates, CellResult, DiagramKind, GridSpec, RateGrid, TaskKey};
use crate::error::{Error, Result};
use crate::phantoms::Gradient;
use crate::sensing::SensingMatrix;
use crate::solvers::ProblemKind;

pub const RESULTS_HEADER: &str =
    "diagram_kind,i,j,r,s,m,n_views,seed,relative_error,success,iterations,wall_time_s";
const CHECKPOINT_FILE: &str = "checkpoint.csv";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: usize,
    /// Append-only result log; completed tasks found there are skipped.
    pub checkpoint_dir: Option<PathBuf>,
    /// Stop after this many newly computed tasks, leaving a partial run.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DiagramResult {
    pub spec: GridSpec,
    /// Sorted by `(i, j, r)`.
    pub results: Vec<CellResult>,
    /// `None` while tasks are outstanding.
    pub rates: Option<RateGrid>,
    /// Tasks computed by this call, excluding those restored from a checkpoint.
    pub computed: usize,
}

/// Execute every feasible task of `spec` on `opts.workers` threads.
///
/// Each task derives all randomness from its own key, so the result set does
/// not depend on the worker count or on completion order.
pub fn run_diagram(spec: &GridSpec, opts: &RunOptions) -> Result<DiagramResult> {
    spec.validate()?;
    let mut done: Vec<CellResult> = Vec::new();
    let mut log = None;
    if let Some(dir) = &opts.checkpoint_dir {
        fs::create_dir_all(dir)?;
        let path = dir.join(CHECKPOINT_FILE);
        done = load_checkpoint(&path, spec)?;
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        if file.metadata()?.len() == 0 {
            writeln!(file, "# grid {:016x}", spec.hash())?;
            writeln!(file, "{RESULTS_HEADER}")?;
            file.flush()?;
        }
        log = Some(Mutex::new(file));
    }

    let finished: HashSet<TaskKey> = done.iter().map(CellResult::key).collect();
    let mut pending: Vec<TaskKey> = spec.tasks().into_iter().filter(|k| !finished.contains(k)).collect();
    let partial = opts.stop_after.is_some_and(|n| n < pending.len());
    if let Some(n) = opts.stop_after {
        pending.truncate(n);
    }

    let matrices: Vec<OnceLock<Option<SensingMatrix>>> =
        (0..spec.sampling_levels.len()).map(|_| OnceLock::new()).collect();
    let gradient = (spec.problem_kind == ProblemKind::TV).then(|| Gradient::new(&spec.mask()));
    let counter = AtomicUsize::new(0);
    let io_error: Mutex<Option<std::io::Error>> = Mutex::new(None);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let fresh: Vec<CellResult> = pool.install(|| {
        pending
            .par_iter()
            .map(|&key| {
                let fixed = matrices[key.j]
                    .get_or_init(|| spec.level_matrix(key.j).ok().flatten())
                    .as_ref();
                // a failed build is retried inside the task and recorded there
                let result = run_task(spec, key, fixed, gradient.as_ref());
                counter.fetch_add(1, Ordering::Relaxed);
                if let Some(log) = &log {
                    let mut file = log.lock().expect("checkpoint lock");
                    if let Err(e) = writeln!(file, "{}", csv_row(&result)).and_then(|_| file.flush()) {
                        io_error.lock().expect("error slot").get_or_insert(e);
                    }
                }
                result
            })
            .collect()
    });
    if let Some(e) = io_error.into_inner().expect("error slot") {
        return Err(e.into());
    }

    done.extend(fresh);
    done.sort_by_key(CellResult::key);
    let rates = if partial { None } else { Some(success_rates(spec, &done)?) };
    Ok(DiagramResult {
        spec: spec.clone(),
        results: done,
        rates,
        computed: counter.into_inner(),
    })
}

fn load_checkpoint(path: &Path, spec: &GridSpec) -> Result<Vec<CellResult>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let mut lines = text.lines();
    let expected = format!("# grid {:016x}", spec.hash());
    match lines.next() {
        Some(h) if h == expected => {}
        other => {
            return Err(Error::Checkpoint(format!(
                "{} belongs to a different grid (header {:?})",
                path.display(),
                other.unwrap_or("")
            )))
        }
    }
    let valid: HashSet<TaskKey> = spec.tasks().into_iter().collect();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut good_len = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        offset += line.len();
        let content = line.trim_end();
        if content.starts_with('#') || content == RESULTS_HEADER || content.is_empty() {
            good_len = offset;
            continue;
        }
        // a line without its newline was cut off by an interrupted write
        if !line.ends_with('\n') {
            break;
        }
        let row = parse_row(content)?;
        if !valid.contains(&row.key()) {
            return Err(Error::Checkpoint(format!("task {:?} is not part of the grid", row.key())));
        }
        if seen.insert(row.key()) {
            out.push(row);
        }
        good_len = offset;
    }
    if good_len < text.len() {
        OpenOptions::new().write(true).open(path)?.set_len(good_len as u64)?;
    }
    Ok(out)
}

fn csv_row(r: &CellResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.diagram_kind, r.i, r.j, r.r, r.s, r.m, r.n_views, r.seed, r.relative_error, r.success, r.iterations, r.wall_time_s
    )
}

fn parse_row(line: &str) -> Result<CellResult> {
    let f: Vec<&str> = line.split(',').collect();
    let bad = || Error::Parse(format!("bad result row '{line}'"));
    if f.len() != 12 {
        return Err(bad());
    }
    let u = |k: usize| f[k].parse::<usize>().map_err(|_| bad());
    let relative_error: f64 = f[8].parse().map_err(|_| bad())?;
    Ok(CellResult {
        diagram_kind: f[0].parse::<DiagramKind>()?,
        i: u(1)?,
        j: u(2)?,
        r: u(3)?,
        s: u(4)?,
        m: u(5)?,
        n_views: u(6)?,
        seed: f[7].parse().map_err(|_| bad())?,
        relative_error,
        success: f[9].parse().map_err(|_| bad())?,
        iterations: u(10)?,
        wall_time_s: f[11].parse().map_err(|_| bad())?,
        error: relative_error.is_nan().then(|| "failed".to_string()),
    })
}

/// `results.csv` contents in `(i, j, r)` order.
pub fn results_csv(results: &[CellResult]) -> String {
    let mut sorted: Vec<&CellResult> = results.iter().collect();
    sorted.sort_by_key(|r| r.key());
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in sorted {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

/// As [`results_csv`] with the wall-time column blanked, for comparing runs.
pub fn normalized_results_csv(results: &[CellResult]) -> String {
    let stripped: Vec<CellResult> = results
        .iter()
        .map(|r| CellResult {
            wall_time_s: 0.0,
            ..r.clone()
        })
        .collect();
    results_csv(&stripped)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<CellResult>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#') && *l != RESULTS_HEADER)
        .map(parse_row)
        .collect()
}
