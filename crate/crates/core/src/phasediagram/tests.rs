use proptest::prelude::*;

use super::*;
use crate::phantoms::ImageClass;
use crate::theory::Coords;

fn small_spec(workers_geometry: GeometryKind) -> GridSpec {
    plan_grid(
        DiagramKind::Almt,
        workers_geometry,
        ImageClass::SignedSpikes,
        ProblemKind::P1,
        8,
        GridOverrides {
            sampling_levels: Some(if workers_geometry.counts_views() { vec![1, 2, 3] } else { vec![12, 24, 36] }),
            sparsity_levels: Some(vec![0.1, 0.3, 0.6]),
            realizations: Some(5),
            master_seed: Some(7),
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn paper_default_task_counts() {
    let almt = plan_grid(DiagramKind::Almt, GeometryKind::Fanbeam, ImageClass::AltProjIsoTv, ProblemKind::TV, 64, GridOverrides::default()).unwrap();
    assert_eq!(almt.n_planned(), 101_400);
    assert_eq!(almt.sampling_levels, (1..=26).collect::<Vec<_>>());
    assert_eq!(almt.sparsity_levels.len(), 39);
    assert_eq!(almt.sparsity_levels[0], 0.025);
    let dt = plan_grid(DiagramKind::Dt, GeometryKind::Fanbeam, ImageClass::SignedSpikes, ProblemKind::P1, 64, GridOverrides::default()).unwrap();
    assert_eq!(dt.n_planned(), 83_200);
    // rho = 1 at 26 views asks for 3328 > 3228 nonzeros
    assert_eq!(dt.tasks().len(), 83_200 - 100);
    let one = plan_grid(
        DiagramKind::Almt,
        GeometryKind::Fanbeam,
        ImageClass::SignedSpikes,
        ProblemKind::P1,
        16,
        GridOverrides {
            sampling_levels: Some(vec![3]),
            sparsity_levels: Some(vec![0.5]),
            realizations: Some(1),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(one.n_planned(), 1);
}

#[test]
fn invalid_grids() {
    let bad = |o: GridOverrides| {
        plan_grid(DiagramKind::Dt, GeometryKind::Fanbeam, ImageClass::SignedSpikes, ProblemKind::P1, 8, o).is_err()
    };
    assert!(bad(GridOverrides { sampling_levels: Some(vec![]), ..Default::default() }));
    assert!(bad(GridOverrides { sparsity_levels: Some(vec![0.5, 0.2]), ..Default::default() }));
    assert!(bad(GridOverrides { sparsity_levels: Some(vec![0.0, 0.2]), ..Default::default() }));
    assert!(bad(GridOverrides { realizations: Some(0), ..Default::default() }));
    assert!(bad(GridOverrides { n_pixels: Some(50), ..Default::default() }));
}

#[test]
fn sparsity_rounding_and_clamping() {
    let spec = plan_grid(
        DiagramKind::Dt,
        GeometryKind::Gaussian,
        ImageClass::SignedSpikes,
        ProblemKind::P1,
        8,
        GridOverrides {
            n_pixels: Some(40),
            sampling_levels: Some(vec![10, 50]),
            sparsity_levels: Some(vec![0.01, 0.25, 1.0]),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(spec.sparsity_at(0, 0), Some(1));
    // 2.5 rounds up
    assert_eq!(spec.sparsity_at(1, 0), Some(3));
    assert_eq!(spec.sparsity_at(2, 0), Some(10));
    assert_eq!(spec.sparsity_at(2, 1), None);
}

#[test]
fn cells_are_deterministic() {
    for g in [GeometryKind::Gaussian, GeometryKind::Fanbeam, GeometryKind::RandomRays] {
        let spec = small_spec(g);
        let a = run_cell(&spec, 1, 2, 3).unwrap();
        let b = run_cell(&spec, 1, 2, 3).unwrap();
        assert_eq!(a.relative_error.to_bits(), b.relative_error.to_bits());
        assert_eq!((a.seed, a.s, a.m, a.success), (b.seed, b.s, b.m, b.success));
        assert!(a.error.is_none(), "{:?}", a.error);
    }
    assert!(run_cell(&small_spec(GeometryKind::Gaussian), 3, 0, 0).is_err());
}

#[test]
fn full_sampling_recovers_any_sparsity() {
    let spec = plan_grid(
        DiagramKind::Almt,
        GeometryKind::Gaussian,
        ImageClass::SignedSpikes,
        ProblemKind::P1,
        8,
        GridOverrides {
            n_pixels: Some(30),
            sampling_levels: Some(vec![30, 36]),
            sparsity_levels: Some(vec![1.0]),
            realizations: Some(10),
            ..Default::default()
        },
    )
    .unwrap();
    let res = run_diagram(&spec, &RunOptions::default()).unwrap();
    assert!(res.results.iter().all(|r| r.s == 30 && r.success));
    assert_eq!(res.rates.unwrap().rate, vec![Some(1.0), Some(1.0)]);
}

#[test]
fn single_spike_with_generous_ct_sampling() {
    let spec = plan_grid(
        DiagramKind::Almt,
        GeometryKind::Fanbeam,
        ImageClass::SignedSpikes,
        ProblemKind::P1,
        16,
        GridOverrides {
            sampling_levels: Some(vec![6]),
            sparsity_levels: Some(vec![1.0 / 193.0]),
            realizations: Some(20),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(spec.sparsity_at(0, 0), Some(1));
    let res = run_diagram(&spec, &RunOptions::default()).unwrap();
    assert_eq!(res.rates.unwrap().rate, vec![Some(1.0)]);
}

#[test]
fn schedule_independence_and_resume() {
    let spec = small_spec(GeometryKind::Fanbeam);
    let serial = run_diagram(&spec, &RunOptions { workers: 1, ..Default::default() }).unwrap();
    let parallel = run_diagram(&spec, &RunOptions { workers: 8, ..Default::default() }).unwrap();
    assert_eq!(normalized_results_csv(&serial.results), normalized_results_csv(&parallel.results));
    assert_eq!(serial.results.len(), 45);

    let dir = tempfile::tempdir().unwrap();
    let opts = |stop| RunOptions {
        workers: 3,
        checkpoint_dir: Some(dir.path().to_path_buf()),
        stop_after: stop,
    };
    let first = run_diagram(&spec, &opts(Some(22))).unwrap();
    assert!(first.rates.is_none());
    assert_eq!(first.computed, 22);
    let second = run_diagram(&spec, &opts(None)).unwrap();
    assert_eq!(second.computed, 23);
    assert_eq!(normalized_results_csv(&second.results), normalized_results_csv(&serial.results));
    assert_eq!(second.rates, serial.rates);
    let third = run_diagram(&spec, &opts(None)).unwrap();
    assert_eq!(third.computed, 0);
    assert_eq!(normalized_results_csv(&third.results), normalized_results_csv(&serial.results));

    let mut other = spec.clone();
    other.master_seed += 1;
    assert!(matches!(run_diagram(&other, &opts(None)), Err(Error::Checkpoint(_))));
}

#[test]
fn interrupted_checkpoint_line_is_dropped() {
    let spec = small_spec(GeometryKind::Gaussian);
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        workers: 1,
        checkpoint_dir: Some(dir.path().to_path_buf()),
        stop_after: Some(10),
    };
    run_diagram(&spec, &opts).unwrap();
    let path = dir.path().join("checkpoint.csv");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("almt,2,2,4,7,3");
    std::fs::write(&path, text).unwrap();
    let done = run_diagram(&spec, &RunOptions { stop_after: None, ..opts }).unwrap();
    assert_eq!(done.computed, 35);
    let clean = run_diagram(&spec, &RunOptions::default()).unwrap();
    assert_eq!(normalized_results_csv(&done.results), normalized_results_csv(&clean.results));
}

#[test]
fn results_csv_round_trip() {
    let spec = small_spec(GeometryKind::Gaussian);
    let res = run_diagram(&spec, &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("results.csv");
    std::fs::write(&p, results_csv(&res.results)).unwrap();
    let back = read_results_csv(&p).unwrap();
    assert_eq!(results_csv(&back), results_csv(&res.results));
    let header = std::fs::read_to_string(&p).unwrap();
    assert!(header.starts_with("diagram_kind,i,j,r,s,m,n_views,seed,relative_error,success,iterations,wall_time_s\n"));
}

fn synthetic(spec: &GridSpec, success: impl Fn(usize, usize, usize) -> bool) -> Vec<CellResult> {
    spec.tasks()
        .into_iter()
        .map(|k| CellResult {
            diagram_kind: spec.diagram_kind,
            i: k.i,
            j: k.j,
            r: k.r,
            s: 1,
            m: 1,
            n_views: 0,
            seed: 0,
            relative_error: 0.0,
            success: success(k.i, k.j, k.r),
            iterations: 0,
            wall_time_s: 0.0,
            error: None,
        })
        .collect()
}

#[test]
fn success_rate_tallies() {
    let mut spec = small_spec(GeometryKind::Gaussian);
    spec.realizations = 4;
    let all = success_rates(&spec, &synthetic(&spec, |_, _, _| true)).unwrap();
    assert!(all.rate.iter().all(|&r| r == Some(1.0)));
    let three = success_rates(&spec, &synthetic(&spec, |_, _, r| r < 3)).unwrap();
    assert!(three.rate.iter().all(|&r| r == Some(0.75)));
    let mixed = synthetic(&spec, |i, j, r| (i * 7 + j * 3 + r) % 3 == 0);
    let grid = success_rates(&spec, &mixed).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let hand = (0..4).filter(|r| (i * 7 + j * 3 + r) % 3 == 0).count() as f64 / 4.0;
            assert_eq!(grid.get(i, j), Some(hand));
        }
    }
    let partial: Vec<CellResult> = mixed.into_iter().filter(|c| !(c.i == 1 && c.j == 2 && c.r == 0)).collect();
    match success_rates(&spec, &partial) {
        Err(Error::MissingCells(cells)) => assert_eq!(cells, vec![(1, 2)]),
        other => panic!("{other:?}"),
    }
}

fn grid_from(kind: DiagramKind, n_abs: usize, n_ord: usize, f: impl Fn(usize, usize) -> f64) -> RateGrid {
    // axes in (0, 1]: abscissa a -> (a + 1) / (n_abs + 1), ordinate likewise
    let xs: Vec<f64> = (0..n_abs).map(|a| (a + 1) as f64 / (n_abs + 1) as f64).collect();
    let ys: Vec<f64> = (0..n_ord).map(|o| (o + 1) as f64 / (n_ord + 1) as f64).collect();
    let (sparsity, sampling) = match kind {
        DiagramKind::Almt => (xs, ys),
        DiagramKind::Dt => (ys, xs),
    };
    let (ni, nj) = (sparsity.len(), sampling.len());
    let mut rate = vec![None; ni * nj];
    for i in 0..ni {
        for j in 0..nj {
            let (a, o) = match kind {
                DiagramKind::Almt => (i, j),
                DiagramKind::Dt => (j, i),
            };
            rate[i * nj + j] = Some(f(a, o));
        }
    }
    RateGrid::from_values(kind, sparsity, sampling, rate).unwrap()
}

#[test]
fn step_contour_sits_between_rows() {
    for kind in [DiagramKind::Almt, DiagramKind::Dt] {
        let g = grid_from(kind, 6, 9, |_, o| if o >= 4 { 1.0 } else { 0.0 });
        let c = extract_contour(&g, 0.5).unwrap();
        let (_, ys) = g.axes();
        let mid = 0.5 * (ys[3] + ys[4]);
        assert_eq!(c.curve.points().len(), 6);
        assert_eq!(c.curve.coords(), kind.coords());
        assert!(c.curve.points().iter().all(|p| (p.1 - mid).abs() < 1e-15));
        assert!(c.extras.is_empty());
    }
}

#[test]
fn ramp_contours() {
    // ramp along the ordinate: value o / 10 over 11 rows
    let g = grid_from(DiagramKind::Almt, 5, 11, |_, o| o as f64 / 10.0);
    let c = extract_contour(&g, 0.5).unwrap();
    let (_, ys) = g.axes();
    assert!(c.curve.points().iter().all(|p| (p.1 - ys[5]).abs() < 1e-15));
    // ramp along the abscissa: the level set is the middle column
    let g = grid_from(DiagramKind::Almt, 11, 5, |a, _| a as f64 / 10.0);
    let c = extract_contour(&g, 0.5).unwrap();
    let (xs, _) = g.axes();
    assert!(!c.polyline.is_empty());
    assert!(c.polyline.iter().all(|p| (p.0 - xs[5]).abs() < 1e-15), "{:?}", c.polyline);
}

#[test]
fn uncrossed_level_is_empty() {
    let g = grid_from(DiagramKind::Dt, 4, 4, |_, _| 0.0);
    let c = extract_contour(&g, 0.5).unwrap();
    assert!(c.is_empty() && c.curve.is_empty());
    assert!(extract_contour(&g, 1.0).is_err());
}

#[test]
fn secondary_branches_become_extras() {
    // main transition at o = 4.5 plus an isolated success island
    let g = grid_from(DiagramKind::Almt, 8, 10, |a, o| {
        if o >= 5 || (a == 2 && o == 1) {
            1.0
        } else {
            0.0
        }
    });
    let c = extract_contour(&g, 0.5).unwrap();
    assert_eq!(c.curve.points().len(), 8);
    let (_, ys) = g.axes();
    let mid = 0.5 * (ys[4] + ys[5]);
    assert!(c.curve.points().iter().all(|p| (p.1 - mid).abs() < 1e-15));
    assert!(!c.extras.is_empty());
}

#[test]
fn widths() {
    let g = grid_from(DiagramKind::Almt, 4, 10, |_, o| if o >= 6 { 1.0 } else { 0.0 });
    let spacing = g.sampling[1] - g.sampling[0];
    for w in transition_width(&g, Axis::Sampling) {
        let w = w.unwrap();
        assert!(w <= spacing + 1e-15 && w >= 0.0);
    }
    let g = grid_from(DiagramKind::Almt, 3, 11, |_, o| o as f64 / 10.0);
    let span = g.sampling[10] - g.sampling[0];
    for w in transition_width(&g, Axis::Sampling) {
        assert!((w.unwrap() - 0.9 * span).abs() < 1e-12);
    }
    let g = grid_from(DiagramKind::Almt, 3, 5, |_, o| o as f64 / 8.0);
    assert!(transition_width(&g, Axis::Sampling).iter().all(Option::is_none));
    // DT lines run along rho, where rates fall
    let g = grid_from(DiagramKind::Dt, 3, 11, |_, o| 1.0 - o as f64 / 10.0);
    let span = g.sparsity[10] - g.sparsity[0];
    for w in transition_width(&g, Axis::Sparsity) {
        assert!((w.unwrap() - 0.9 * span).abs() < 1e-12);
    }
}

#[test]
fn heat_map_orientation() {
    let g = grid_from(DiagramKind::Almt, 2, 3, |a, o| if a == 1 && o == 2 { 1.0 } else { 0.0 });
    let (w, h, px) = g.render();
    assert_eq!((w, h), (2, 3));
    // top-right pixel is the largest abscissa and ordinate
    assert_eq!(px, vec![0, 255, 0, 0, 0, 0]);
}

#[test]
fn rates_file_round_trip() {
    let spec = small_spec(GeometryKind::Gaussian);
    let grid = success_rates(&spec, &synthetic(&spec, |i, j, _| i <= j)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("rates.csv");
    grid.write(&p).unwrap();
    assert_eq!(RateGrid::read(&p).unwrap(), grid);
    assert!(std::fs::read_to_string(&p).unwrap().starts_with("i,j,rate,count\n"));
}

#[test]
fn recovery_curve_with_full_rank_sampling() {
    let mask = crate::sensing::disk_mask(8).unwrap();
    let x = crate::phantoms::gen_altprojisotv(&mask, 20, 3, 200).unwrap();
    let full = mask.n_pixels().div_ceil(16);
    let cfg = SolverConfig::desk(ProblemKind::TV);
    let rows = recovery_curve(&x, &mask, GeometryKind::Fanbeam, 0, &[1, full, full + 1], &cfg).unwrap();
    let b_norm = |views: usize| {
        let a = GeometryKind::Fanbeam.build(8, mask.n_pixels(), views, 0).unwrap();
        (crate::operator::norm2(&a.apply(&x).unwrap()), a.m())
    };
    for row in &rows {
        assert!(row.error.is_none());
        if row.iterations < cfg.max_iter {
            let (bn, m) = b_norm(row.views);
            assert!(row.data_rmse <= cfg.feas_tol * bn / (m as f64).sqrt());
        }
    }
    assert!(rows[1].image_rmse < 1e-6 && rows[2].image_rmse < 1e-6, "{rows:?}");
    assert!(rows[2].image_rmse <= rows[0].image_rmse);
    assert!(recovery_curve(&x, &mask, GeometryKind::Fanbeam, 0, &[], &cfg).is_err());
}

#[test]
fn contour_levels_are_ordered() {
    // smooth sigmoid transition along the sampling axis
    let g = grid_from(DiagramKind::Almt, 6, 20, |a, o| {
        let center = 6.0 + a as f64;
        1.0 / (1.0 + (-(o as f64 - center)).exp())
    });
    let lo = extract_contour(&g, 0.05).unwrap();
    let hi = extract_contour(&g, 0.95).unwrap();
    for (p, q) in lo.curve.points().iter().zip(hi.curve.points()) {
        assert_eq!(p.0, q.0);
        assert!(q.1 > p.1);
    }
    assert_eq!(g.diagram_kind.coords(), Coords::Almt);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn widths_are_nonnegative(vals in prop::collection::vec(0.0f64..1.0, 30)) {
        let g = grid_from(DiagramKind::Almt, 3, 10, |a, o| vals[a * 10 + o]);
        for w in transition_width(&g, Axis::Sampling).into_iter().flatten() {
            prop_assert!(w >= 0.0);
        }
        let c = extract_contour(&g, 0.5).unwrap();
        prop_assert!(c.curve.points().windows(2).all(|w| w[1].0 > w[0].0));
    }
}
