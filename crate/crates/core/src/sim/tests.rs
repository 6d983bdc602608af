use std::sync::Arc;

use nalgebra::DVector;
use proptest::prelude::*;

use super::*;
use crate::mesh::build_cartesian_grid;
use crate::timestepping::{SolverKind, Theta};

fn strip(length: f64, nx: usize, degree: usize) -> Arc<DgSpace> {
    let bbox = BoundingBox::new(Point::zeros(), Point::new(length, 1.0, 0.0)).unwrap();
    let mesh = build_cartesian_grid(2, &[nx, 1], &bbox).unwrap();
    Arc::new(DgSpace::new(Arc::new(mesh), degree).unwrap())
}

fn seed_box(x1: f64) -> Region {
    let bbox = BoundingBox::new(Point::zeros(), Point::new(x1, 1.0, 0.0)).unwrap();
    Region::new("seed", RegionShape::Box(bbox))
}

#[test]
fn ball_region_selects_by_center() {
    let space = strip(4.0, 4, 1);
    let r = Region::new("b", RegionShape::Ball { center: Point::new(1.5, 0.5, 0.0), radius: 0.1 });
    assert_eq!(r.resolve(space.mesh()).unwrap(), vec![1]);
    let far = Region::new("far", RegionShape::Ball { center: Point::new(9.0, 0.5, 0.0), radius: 0.1 });
    assert!(matches!(far.resolve(space.mesh()), Err(SimError::EmptyRegion(_))));
    let bad = Region::new("bad", RegionShape::Elements(vec![7]));
    assert!(matches!(bad.resolve(space.mesh()), Err(SimError::UnknownElement { element: 7, .. })));
}

#[test]
fn seeded_state_places_mass_in_seed_only() {
    let space = strip(4.0, 4, 2);
    let params = ModelParams::reference();
    let seed = Region::new("s", RegionShape::Elements(vec![1]));
    let state = seeded_initial_state(&space, &params, &seed, 0.4).unwrap();
    let q = space.cell_averages(&state.q);
    let c = space.cell_averages(&state.c);
    assert!((space.element_integral(&state.q, 1) - 0.4).abs() < 1e-13);
    for e in [0, 2, 3] {
        assert_eq!(q[e], 0.0);
    }
    for v in c {
        assert!((v - 1.2).abs() < 1e-13);
    }
    let zero = ModelParams { k1: 0.0, ..params };
    assert!(seeded_initial_state(&space, &zero, &seed, 0.4).is_err());
}

#[test]
fn biomarker_requires_positive_total() {
    let space = strip(2.0, 2, 1);
    let region = ResolvedRegion::new(&Region::everywhere(), space.mesh()).unwrap();
    let n = space.n_dofs();
    let zero = State::new(DVector::zeros(n), DVector::zeros(n), 0.0);
    assert!(matches!(biomarker(&space, &zero, &region), Err(SimError::NonPositiveTotal { .. })));
    let one = project_l2(&space, |_| 1.0);
    let half = State::new(one.clone(), one, 0.0);
    assert!((biomarker(&space, &half, &region).unwrap() - 0.5).abs() < 1e-14);
}

proptest! {
    #[test]
    fn biomarker_in_unit_interval(cs in prop::collection::vec(0.0f64..3.0, 3), qs in prop::collection::vec(0.0f64..3.0, 3)) {
        prop_assume!(cs.iter().chain(&qs).sum::<f64>() > 1e-6);
        let space = strip(3.0, 3, 1);
        let one = project_l2(&space, |_| 1.0);
        let mut c = DVector::zeros(space.n_dofs());
        let mut q = DVector::zeros(space.n_dofs());
        for e in 0..3 {
            let o = space.offset(e);
            for i in 0..space.local_dofs() {
                c[o + i] = one[o + i] * cs[e];
                q[o + i] = one[o + i] * qs[e];
            }
        }
        let region = ResolvedRegion::new(&Region::everywhere(), space.mesh()).unwrap();
        let b = biomarker(&space, &State::new(c, q, 0.0), &region).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
    }

    #[test]
    fn linear_track_gives_exact_speed(v in 0.5f64..10.0, x0 in -5.0f64..5.0) {
        let track: Vec<(f64, f64)> = (0..50).map(|k| { let t = k as f64 * 0.2; (t, x0 + v * t) }).collect();
        let fit = front_speed(&track, (f64::NEG_INFINITY, f64::INFINITY), 0.5).unwrap();
        prop_assert!((fit.speed - v).abs() < 1e-10 * v);
        prop_assert!((fit.intercept - x0).abs() < 1e-9);
    }
}

#[test]
fn crossing_time_interpolates() {
    let mut s = BiomarkerSeries::new("g");
    s.push(0.0, 0.1);
    s.push(1.0, 0.3);
    s.push(2.0, 0.7);
    assert!((s.crossing_time(0.5).unwrap() - 1.5).abs() < 1e-14);
    assert_eq!(s.crossing_time(0.9), None);
    assert_eq!(s.crossing_time(0.05), Some(0.0));
}

#[test]
fn staging_orders_unreached_regions_last() {
    let space = strip(3.0, 3, 1);
    let regions: Vec<ResolvedRegion> = (0..3)
        .map(|e| ResolvedRegion::new(&Region::new(format!("r{e}"), RegionShape::Elements(vec![e])), space.mesh()).unwrap())
        .collect();
    let mut staging = Staging::new(&regions, 0.5);
    let one = project_l2(&space, |_| 1.0);
    let n = space.n_dofs();
    let profile = |levels: [f64; 3], t: f64| {
        let mut q = DVector::zeros(n);
        for (e, level) in levels.iter().enumerate() {
            let o = space.offset(e);
            for i in 0..space.local_dofs() {
                q[o + i] = one[o + i] * level;
            }
        }
        State::new(DVector::zeros(n), q, t)
    };
    staging.observe(&space, &profile([0.0, 0.6, 0.0], 1.0), &regions);
    staging.observe(&space, &profile([0.7, 0.6, 0.0], 2.0), &regions);
    staging.observe(&space, &profile([0.0, 0.0, 0.0], 3.0), &regions);
    let order = staging.ordered();
    assert_eq!(order[0], ("r1".to_string(), 1.0));
    assert_eq!(order[1], ("r0".to_string(), 2.0));
    assert_eq!(order[2].0, "r2");
    assert!(order[2].1.is_infinite());
    assert!(staging.to_csv().ends_with("r2,inf\n"));
}

#[test]
fn front_position_interpolates_and_reports_absence() {
    let profile = vec![(0.5, 1.5), (1.5, 1.0), (2.5, 0.5), (3.5, 0.0)];
    assert!((front_position(&profile, 0.75).unwrap() - 2.0).abs() < 1e-14);
    assert_eq!(front_position(&profile, 2.0), None);
    assert_eq!(front_position(&[(0.0, 1.0), (1.0, 1.0)], 0.5), None);
    assert!(matches!(front_speed(&[], (0.0, 1.0), 0.75), Err(SimError::FrontNeverForms(_))));
    let short = [(0.0, 0.1), (1.0, 0.2), (2.0, 5.0)];
    assert!(matches!(front_speed(&short, (0.0, 1.0), 0.75), Err(SimError::WindowTooShort(2))));
}

#[test]
fn csv_round_trip_is_exact() {
    let space = strip(2.0, 4, 2);
    let c = project_l2(&space, |x| (x.x * 1.7).sin() + 1.0 / 3.0);
    let q = project_l2(&space, |x| x.x.exp() * 1e-7);
    let state = State::new(c, q, 0.25);
    let mut buf = Vec::new();
    write_fields_csv(&mut buf, &space, &state).unwrap();
    let rows = read_fields_csv(buf.as_slice()).unwrap();
    let ca = space.cell_averages(&state.c);
    let qa = space.cell_averages(&state.q);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.c, ca[r.element]);
        assert_eq!(r.q, qa[r.element]);
        assert_eq!(r.center[0], space.mesh().elements()[r.element].center.x);
    }
    let broken = b"element,x,y,z,c,q\n0,1,2,3,4\n";
    assert!(matches!(read_fields_csv(&broken[..]), Err(SimError::Parse { line: 2, .. })));
}

#[test]
fn vtk_lists_every_sub_simplex() {
    for dim in [2, 3] {
        let max = if dim == 2 { Point::new(1.0, 1.0, 0.0) } else { Point::new(1.0, 1.0, 1.0) };
        let bbox = BoundingBox::with_dim(dim, Point::zeros(), max).unwrap();
        let cells = vec![2; dim];
        let mesh = Arc::new(build_cartesian_grid(dim, &cells, &bbox).unwrap());
        let space = DgSpace::new(mesh.clone(), 1).unwrap();
        let n = space.n_dofs();
        let state = State::new(DVector::zeros(n), DVector::zeros(n), 0.0);
        let mut buf = Vec::new();
        write_vtk(&mut buf, &space, &state).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let expected = sub_simplex_count(&mesh);
        // quads give 4 triangles, hexes 12 triangular facets
        assert_eq!(expected, mesh.n_elements() * if dim == 2 { 4 } else { 12 });
        assert!(text.contains(&format!("CELLS {expected} ")));
        assert!(text.contains(&format!("CELL_TYPES {expected}\n")));
        assert!(text.contains(&format!("CELL_DATA {expected}\n")));
        let body = text.split("CELL_TYPES").nth(1).unwrap();
        let kind = if dim == 2 { "5" } else { "10" };
        assert_eq!(body.lines().skip(1).take(expected).filter(|l| *l == kind).count(), expected);
    }
}

fn short_setup(params: ModelParams) -> SimulationSetup {
    SimulationSetup {
        space: strip(30.0, 30, 1),
        params,
        scheme: SchemeConfig { theta: Theta::CrankNicolson, dt: 0.05, t_final: 6.0, solver: SolverKind::Direct },
        gamma0: 10.0,
        seed: seed_box(2.0),
        seed_value: 0.5,
        regions: vec![
            Region::new("near", RegionShape::Elements(vec![5])),
            Region::new("far", RegionShape::Elements(vec![25])),
        ],
        q_crit: 0.5,
        stride: 10,
        front: Some(FrontConfig { axis: 0, threshold: 0.75 }),
        vtk_dir: None,
    }
}

#[test]
fn seeded_run_spreads_from_the_seed() {
    let res = simulate(&short_setup(ModelParams::reference())).unwrap();
    assert!(res.biomarker_violations.is_empty());
    let g = res.global_biomarker();
    assert_eq!(g.times.len(), 13);
    assert_eq!(g.times[0], 0.0);
    assert!((g.times.last().unwrap() - 6.0).abs() < 1e-9);
    assert!(g.values.windows(2).all(|w| w[1] >= w[0]));
    let onsets = res.staging.ordered();
    assert_eq!(onsets[0].0, "near");
    assert!(onsets[0].1.is_finite());
    assert!(res.front_track.len() > 10);
    let (t0, x0) = res.front_track[0];
    let (t1, x1) = *res.front_track.last().unwrap();
    assert!(t1 > t0 && x1 > x0);
}

#[test]
fn vtk_snapshots_follow_stride() {
    let dir = std::env::temp_dir().join(format!("heterodg-vtk-{}", std::process::id()));
    let mut setup = short_setup(ModelParams::reference());
    setup.scheme.t_final = 1.0;
    setup.vtk_dir = Some(dir.clone());
    simulate(&setup).unwrap();
    let count = std::fs::read_dir(&dir).unwrap().count();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(count, 3);
}

#[test]
fn zero_seed_never_becomes_pathological() {
    let mut setup = short_setup(ModelParams::reference());
    setup.seed_value = 0.0;
    setup.scheme.t_final = 2.0;
    let res = simulate(&setup).unwrap();
    assert!(res.global_biomarker().values.iter().all(|&b| b.abs() < 1e-12));
    assert!(res.front_track.is_empty());
    assert!(res.staging.ordered().iter().all(|(_, t)| t.is_infinite()));
}
