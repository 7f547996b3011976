use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use phasect::io::{self, sidecar_path, MatrixSidecar};
use phasect::phantoms::{self, Gradient};
use phasect::phasediagram::{
    extract_contour, plan_grid, recovery_curve, results_csv, run_diagram, transition_width, Axis, DiagramKind,
    GeometryKind, GridOverrides, RateGrid, RunOptions,
};
use phasect::predict::{predict_views_almt, predict_views_dt, PredictionInput};
use phasect::sensing::{self, FanbeamConfig};
use phasect::solvers::{check_recovery, lp_oracle, solve_cp, ProblemKind, SolverConfig};
use phasect::theory::{convert_coords, dt_curve_from_psi, import_curve, Coords, Curve};
use serde::Serialize;

use crate::args::*;
use crate::{CliError, CliResult};

pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    /// Where the run manifest goes; `None` when nothing was written.
    pub manifest: Option<PathBuf>,
}

impl Outcome {
    fn beside(primary: &Path, outputs: Vec<PathBuf>) -> Self {
        let mut m = primary.as_os_str().to_owned();
        m.push(".manifest.json");
        Self {
            outputs,
            manifest: Some(PathBuf::from(m)),
        }
    }
}

pub fn run(cmd: &Command) -> CliResult<Outcome> {
    match cmd {
        Command::Matrix(a) => matrix(a),
        Command::Phantom(a) => phantom(a),
        Command::Solve(a) => solve(a),
        Command::Diagram(a) => diagram(a),
        Command::Contour(a) => contour(a),
        Command::Width(a) => width(a),
        Command::Theory(a) => theory(a),
        Command::Convert(a) => convert(a),
        Command::Predict(a) => predict(a),
        Command::RecoveryCurve(a) => recovery(a),
        Command::Render(a) => render(a),
    }
}

fn need<T: Copy>(v: Option<T>, flag: &str, why: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Usage(format!("{flag} is required {why}")))
}

fn desk(common: &Common) -> bool {
    common.preset == Some(Preset::Desk)
}

fn solver_config(kind: ProblemKind, s: &SolverArgs, desk: bool) -> SolverConfig {
    let base = if desk { SolverConfig::desk(kind) } else { SolverConfig::new(kind) };
    SolverConfig {
        lambda: s.lambda.unwrap_or(base.lambda),
        max_iter: s.iters.unwrap_or(base.max_iter),
        feas_tol: s.feas_tol.unwrap_or(base.feas_tol),
        log_every: s.log_every.unwrap_or(base.log_every),
        ..base
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(io::write_atomic(path, text.as_bytes())?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn matrix(a: &MatrixArgs) -> CliResult<Outcome> {
    let views = || need(a.views, "--views", "for fan-beam geometries");
    let m = match a.geometry {
        GeometryKind::Fanbeam => sensing::build_fanbeam(&FanbeamConfig {
            n_side: a.nside,
            n_views: views()?,
            offset_deg: a.offset_deg,
            source_radius: a.source_radius,
        })?,
        GeometryKind::FanbeamRand => sensing::build_fanbeam_random(a.nside, views()?, a.seed)?,
        GeometryKind::RandomRays => {
            sensing::build_random_rays(a.nside, need(a.rays, "--rays", "for random_rays")?, a.seed)?
        }
        GeometryKind::Gaussian => {
            let n = match a.n_pixels {
                Some(n) => n,
                None => sensing::disk_mask(a.nside)?.n_pixels(),
            };
            sensing::build_gaussian(need(a.rows, "--rows", "for gaussian")?, n, a.seed)?
        }
    };
    io::write_matrix_market(&m, &a.out)?;
    eprintln!("{} x {} matrix, {} nonzeros", m.m(), m.n(), m.nnz());
    Ok(Outcome::beside(&a.out, vec![a.out.clone(), sidecar_path(&a.out)]))
}

#[derive(Serialize)]
struct PhantomSidecar {
    class: phantoms::ImageClass,
    seed: u64,
    n_side: usize,
    n_pixels: usize,
    sparsity: usize,
    achieved_sparsity: usize,
}

#[derive(Serialize)]
struct RenderSidecar<'a> {
    source: &'a Path,
    kind: RenderKind,
    lo: f64,
    hi: f64,
    width: usize,
    height: usize,
}

fn window(x: &[f64], lo: Option<f64>, hi: Option<f64>) -> (f64, f64) {
    let lo = lo.unwrap_or_else(|| x.iter().copied().fold(0.0, f64::min));
    let hi = hi.unwrap_or_else(|| x.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    (lo, hi)
}

fn write_render(out: &Path, source: &Path, kind: RenderKind, lo: f64, hi: f64, image: (usize, usize, Vec<u8>)) -> CliResult<Vec<PathBuf>> {
    let (width, height, px) = image;
    io::write_pgm(out, width, height, &px)?;
    let side = RenderSidecar {
        source,
        kind,
        lo,
        hi,
        width,
        height,
    };
    io::write_json(&sidecar_path(out), &side)?;
    Ok(vec![out.to_path_buf(), sidecar_path(out)])
}

fn phantom(a: &PhantomArgs) -> CliResult<Outcome> {
    let mask = sensing::disk_mask(a.nside)?;
    let n = mask.n_pixels();
    let s = match (a.sparsity, a.fraction) {
        (Some(s), _) => s,
        (None, Some(f)) if (0.0..=1.0).contains(&f) => ((f * n as f64).round() as usize).clamp(1, n),
        (None, Some(f)) => return Err(CliError::Usage(format!("--fraction must lie in [0, 1], got {f}"))),
        (None, None) => return Err(CliError::Usage("one of --sparsity or --fraction is required".into())),
    };
    let x = phantoms::generate(a.class, &mask, s, a.seed)?;
    let achieved = if a.class.gradient_domain() {
        Gradient::new(&mask).sparsity(&x, None)?
    } else {
        phantoms::pixel_sparsity(&x, None)
    };
    io::write_vector(&a.out, &x)?;
    let side = PhantomSidecar {
        class: a.class,
        seed: a.seed,
        n_side: a.nside,
        n_pixels: n,
        sparsity: s,
        achieved_sparsity: achieved,
    };
    io::write_json(&sidecar_path(&a.out), &side)?;
    let mut outputs = vec![a.out.clone(), sidecar_path(&a.out)];
    if let Some(r) = &a.render {
        let (lo, hi) = window(&x, None, None);
        outputs.extend(write_render(r, &a.out, RenderKind::Image, lo, hi, io::render_image(&mask, &x, lo, hi)?)?);
    }
    Ok(Outcome::beside(&a.out, outputs))
}

#[derive(Serialize)]
struct SolveSummary {
    problem: ProblemKind,
    solver: &'static str,
    lambda: f64,
    #[serde(rename = "K")]
    k: usize,
    iterations_run: usize,
    objective: f64,
    residual: f64,
    relative_error_if_reference: Option<f64>,
}

fn history_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.history.csv"))
}

fn solve(a: &SolveArgs) -> CliResult<Outcome> {
    let m = io::read_matrix_market(&a.matrix)?;
    let (b, mut reference) = match (&a.data, &a.phantom) {
        (_, Some(p)) => {
            let x0 = io::read_vector(p)?;
            (m.apply(&x0)?, Some(x0))
        }
        (Some(d), None) => (io::read_vector(d)?, None),
        (None, None) => return Err(CliError::Usage("--data or --phantom is required".into())),
    };
    if let Some(r) = &a.reference {
        reference = Some(io::read_vector(r)?);
    }
    let gradient = if a.problem == ProblemKind::TV {
        let side: MatrixSidecar = io::read_json(&sidecar_path(&a.matrix))?;
        let n_side = need(a.nside.or(side.n_side), "--nside", "for TV when the matrix has no image side")?;
        let mask = sensing::disk_mask(n_side)?;
        if mask.n_pixels() != m.n() {
            return Err(CliError::Usage(format!(
                "a {n_side}-side disk has {} pixels but the matrix has {} columns",
                mask.n_pixels(),
                m.n()
            )));
        }
        Some(Gradient::new(&mask))
    } else {
        None
    };
    let cfg = solver_config(a.problem, &a.solver, desk(&a.common));
    let sol = if a.oracle {
        lp_oracle(a.problem, &m, &b)?
    } else {
        solve_cp(&cfg, &m, &b, gradient.as_ref(), reference.as_deref())?
    };
    let rel = match &reference {
        Some(r) => Some(check_recovery(&sol.x, r, a.problem.default_epsilon())?.relative_error),
        None => None,
    };
    io::write_vector(&a.out, &sol.x)?;
    let summary = SolveSummary {
        problem: a.problem,
        solver: if a.oracle { "oracle" } else { "chambolle_pock" },
        lambda: cfg.lambda,
        k: cfg.max_iter,
        iterations_run: sol.iterations_run,
        objective: sol.primal_objective,
        residual: sol.data_residual,
        relative_error_if_reference: rel,
    };
    io::write_json(&sidecar_path(&a.out), &summary)?;
    let hist = a.history.clone().unwrap_or_else(|| history_path(&a.out));
    let mut text = String::from("iteration,objective,residual,image_rmse\n");
    for h in &sol.history {
        let _ = writeln!(text, "{},{},{},{}", h.iteration, h.objective, h.residual, fmt_opt(h.image_rmse));
    }
    write_text(&hist, &text)?;
    eprintln!(
        "{} iterations, objective {}, residual {:e}",
        sol.iterations_run, sol.primal_objective, sol.data_residual
    );
    Ok(Outcome::beside(&a.out, vec![a.out.clone(), sidecar_path(&a.out), hist]))
}

fn workers(flag: Option<usize>) -> CliResult<usize> {
    if let Ok(v) = std::env::var("PHASECT_WORKERS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("PHASECT_WORKERS must be a positive integer, got '{v}'")))?;
        return Ok(n.max(1));
    }
    Ok(flag
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1))
}

fn desk_sparsity(kind: DiagramKind) -> Vec<f64> {
    match kind {
        DiagramKind::Almt => (0..10).map(|k| (2 * k + 1) as f64 / 20.0).collect(),
        DiagramKind::Dt => (1..=16).map(|k| k as f64 / 16.0).collect(),
    }
}

fn diagram(a: &DiagramArgs) -> CliResult<Outcome> {
    let desk = desk(&a.common);
    let n_side = a.nside.unwrap_or(if desk { 16 } else { 64 });
    let overrides = GridOverrides {
        sampling_levels: a.sampling.clone().map(|l| l.0),
        sparsity_levels: a
            .sparsity
            .clone()
            .map(|l| l.0)
            .or_else(|| desk.then(|| desk_sparsity(a.diagram_type))),
        realizations: a.realizations.or(desk.then_some(20)),
        master_seed: Some(a.seed),
        n_pixels: a.n_pixels,
        solver: Some(solver_config(a.problem, &a.solver, desk)),
        oracle_max_vars: a.oracle_max_vars,
    };
    let spec = plan_grid(a.diagram_type, a.geometry, a.class, a.problem, n_side, overrides)?;
    std::fs::create_dir_all(&a.out)?;
    let opts = RunOptions {
        workers: workers(a.workers)?,
        checkpoint_dir: Some(a.out.clone()),
        stop_after: a.stop_after,
    };
    let res = run_diagram(&spec, &opts)?;
    let results = a.out.join("results.csv");
    write_text(&results, &results_csv(&res.results))?;
    let spec_path = a.out.join("spec.json");
    io::write_json(&spec_path, &spec)?;
    let mut outputs = vec![results, spec_path, a.out.join("checkpoint.csv")];
    let failures = res.results.iter().filter(|r| r.relative_error.is_nan()).count();
    eprintln!(
        "{} of {} tasks done ({} computed now, {} failed)",
        res.results.len(),
        spec.tasks().len(),
        res.computed,
        failures
    );
    if let Some(rates) = &res.rates {
        let p = a.out.join("rates.csv");
        rates.write(&p)?;
        let pgm = a.out.join("rates.pgm");
        let (w, h, px) = rates.render();
        io::write_pgm(&pgm, w, h, &px)?;
        outputs.extend([p.clone(), sidecar_path(&p), pgm]);
    } else {
        eprintln!("partial run; rerun with the same flags to resume");
    }
    Ok(Outcome {
        outputs,
        manifest: Some(a.out.join("manifest.json")),
    })
}

fn contour(a: &ContourArgs) -> CliResult<Outcome> {
    let grid = RateGrid::read(&a.rates)?;
    let c = extract_contour(&grid, a.level)?;
    c.curve.export(&a.out)?;
    let mut outputs = vec![a.out.clone(), sidecar_path(&a.out)];
    if c.is_empty() {
        eprintln!("level {} is never crossed", a.level);
    }
    if let Some(p) = &a.polyline {
        let mut text = String::from("x,y,part\n");
        for (x, y) in &c.polyline {
            let _ = writeln!(text, "{x},{y},main");
        }
        for (x, y) in &c.extras {
            let _ = writeln!(text, "{x},{y},extra");
        }
        write_text(p, &text)?;
        outputs.push(p.clone());
    }
    Ok(Outcome::beside(&a.out, outputs))
}

fn width(a: &WidthArgs) -> CliResult<Outcome> {
    let grid = RateGrid::read(&a.rates)?;
    let axis = match a.axis {
        Some(AxisArg::Sampling) => Axis::Sampling,
        Some(AxisArg::Sparsity) => Axis::Sparsity,
        None => match grid.diagram_kind {
            DiagramKind::Almt => Axis::Sampling,
            DiagramKind::Dt => Axis::Sparsity,
        },
    };
    let positions = match axis {
        Axis::Sampling => &grid.sparsity,
        Axis::Sparsity => &grid.sampling,
    };
    let mut text = String::from("position,width\n");
    for (p, w) in positions.iter().zip(transition_width(&grid, axis)) {
        let _ = writeln!(text, "{p},{}", fmt_opt(w));
    }
    write_text(&a.out, &text)?;
    Ok(Outcome::beside(&a.out, vec![a.out.clone()]))
}

fn linspace(from: f64, to: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![from],
        _ => (0..n).map(|k| from + (to - from) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn theory(a: &TheoryArgs) -> CliResult<Outcome> {
    if !(0.0 < a.from && a.from <= a.to && a.to <= 1.0) || a.points == 0 {
        return Err(CliError::Usage("need 0 < from <= to <= 1 and points >= 1".into()));
    }
    let grid = linspace(a.from, a.to, a.points);
    let curve = match a.coords {
        Coords::Almt => Curve::new(
            Coords::Almt,
            grid.iter().map(|&b| (b, a.curve.eval(b))).collect(),
            a.curve.curve_kind(),
            "statistical dimension of the l1 descent cone",
        )?,
        Coords::Dt => dt_curve_from_psi(a.curve, &grid)?,
    };
    curve.export(&a.out)?;
    Ok(Outcome::beside(&a.out, vec![a.out.clone(), sidecar_path(&a.out)]))
}

/// A curve with sidecar, or an imported one in `coords`.
fn load_curve(path: &Path, coords: Option<Coords>) -> CliResult<Curve> {
    if sidecar_path(path).exists() {
        return Ok(Curve::read(path)?);
    }
    let coords = need(coords, "--from/--coords", "for a curve without sidecar")?;
    Ok(import_curve(path, coords)?)
}

fn convert(a: &ConvertArgs) -> CliResult<Outcome> {
    let curve = load_curve(&a.curve, a.from)?;
    convert_coords(&curve, a.to)?.export(&a.out)?;
    Ok(Outcome::beside(&a.out, vec![a.out.clone(), sidecar_path(&a.out)]))
}

fn predict(a: &PredictArgs) -> CliResult<Outcome> {
    let mut curve = load_curve(&a.contour, Some(a.coords))?;
    if curve.coords() != a.coords {
        curve = convert_coords(&curve, a.coords)?;
    }
    let input = PredictionInput::new(a.sparsity, a.n_pixels, a.rays_per_view, curve)?;
    let p = match a.coords {
        Coords::Almt => predict_views_almt(&input)?,
        Coords::Dt => predict_views_dt(&input)?,
    };
    let text = serde_json::to_string_pretty(&p).map_err(phasect::Error::from)?;
    println!("{text}");
    match &a.out {
        Some(out) => {
            write_text(out, &(text + "\n"))?;
            Ok(Outcome::beside(out, vec![out.clone()]))
        }
        None => Ok(Outcome {
            outputs: vec![],
            manifest: None,
        }),
    }
}

fn recovery(a: &RecoveryArgs) -> CliResult<Outcome> {
    let mask = sensing::disk_mask(a.nside)?;
    let x = match &a.phantom {
        Some(p) => io::read_vector(p)?,
        None => phantoms::generate(
            need(a.class, "--class", "without --phantom")?,
            &mask,
            need(a.sparsity, "--sparsity", "without --phantom")?,
            a.seed,
        )?,
    };
    let cfg = solver_config(a.problem, &a.solver, desk(&a.common));
    let rows = recovery_curve(&x, &mask, a.geometry, a.seed, &a.views.0, &cfg)?;
    let mut text = String::from("views,image_rmse,data_rmse,relative_error,iterations\n");
    for r in &rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            r.views, r.image_rmse, r.data_rmse, r.relative_error, r.iterations
        );
        if let Some(e) = &r.error {
            eprintln!("{} views: {e}", r.views);
        }
    }
    write_text(&a.out, &text)?;
    Ok(Outcome::beside(&a.out, vec![a.out.clone()]))
}

fn render(a: &RenderArgs) -> CliResult<Outcome> {
    let outputs = match a.kind {
        RenderKind::Rates => {
            let grid = RateGrid::read(&a.input)?;
            write_render(&a.out, &a.input, a.kind, 0.0, 1.0, grid.render())?
        }
        RenderKind::Image => {
            let x = io::read_vector(&a.input)?;
            let n_side = match a.nside {
                Some(n) => n,
                None => {
                    let side: serde_json::Value = io::read_json(&sidecar_path(&a.input))
                        .map_err(|_| CliError::Usage("--nside is required for an image without sidecar".into()))?;
                    side.get("n_side")
                        .and_then(|v| v.as_u64())
                        .ok_or_else(|| CliError::Usage("image sidecar has no n_side; pass --nside".into()))?
                        as usize
                }
            };
            let mask = sensing::disk_mask(n_side)?;
            let (lo, hi) = window(&x, a.lo, a.hi);
            write_render(&a.out, &a.input, a.kind, lo, hi, io::render_image(&mask, &x, lo, hi)?)?
        }
    };
    Ok(Outcome::beside(&a.out, outputs))
}
