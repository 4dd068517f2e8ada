//! End-to-end behaviors of the engine, oracle and io layers on small grids.

use snake::io::{machine_block, parse_config, ParameterDatabaseFile};
use snake::model::element_error;
use snake::{
    calibrate_graph, emit_report, global_brute_force, stitch, total_system_error, validate, CalibrationState,
    ElementId, GlobalAssignment, RunConfig,
};

fn state(cfg: RunConfig) -> CalibrationState {
    CalibrationState::new(cfg).unwrap()
}

fn nodes_only(s: CalibrationState) -> CalibrationState {
    let nodes: Vec<ElementId> = s.graph().nodes().map(|e| e.id).collect();
    s.with_goal(&nodes).unwrap()
}

#[test]
fn complete_state_is_a_fixed_point() {
    let mut s = state(RunConfig { rows: 3, cols: 3, ..RunConfig::default() });
    calibrate_graph(&mut s).unwrap();
    let (db, log) = (s.database(), s.step_log().to_vec());
    stitch(&mut s).unwrap();
    calibrate_graph(&mut s).unwrap();
    assert_eq!(s.database(), db);
    assert_eq!(s.step_log(), log.as_slice());
}

#[test]
fn half_calibrated_grid_is_stitched_under_boundary_constraints() {
    let cfg = RunConfig { rows: 3, cols: 6, seed: 4, ..RunConfig::default() };
    let mut full = state(cfg.clone());
    let left: Vec<ElementId> = full
        .goal()
        .iter()
        .copied()
        .filter(|&g| {
            let e = full.graph().element(g);
            match e.endpoints {
                Some((a, b)) => full.graph().element(a).coord.1 <= 2 && full.graph().element(b).coord.1 <= 2,
                None => e.coord.1 <= 2,
            }
        })
        .collect();
    let mut half = state(cfg).with_goal(&left).unwrap();
    calibrate_graph(&mut half).unwrap();
    full.import(&half).unwrap();
    let before = full.step_log().len();
    stitch(&mut full).unwrap();
    assert!(full.is_complete());
    assert!(validate(&full).is_empty());
    let new_steps = &full.step_log()[before..];
    assert!(new_steps.iter().any(|r| r.constraint_count > 0));
    for (g, v) in half.database() {
        assert_eq!(full.value(g), Some(v));
    }
}

#[test]
fn single_node_totals() {
    let s = state(RunConfig { rows: 1, cols: 1, k: 5, ..RunConfig::default() });
    let n = s.graph().node_at(0, 0).unwrap();
    let domain = s.config().domain();
    let errors = s.config().errors();
    let curve: Vec<f64> =
        (0..5).map(|i| element_error(s.graph(), s.landscapes(), &errors, n, domain.value(i))).collect();
    for (i, &e) in curve.iter().enumerate() {
        let a = GlobalAssignment::from([(n, i as u32)]);
        assert_eq!(total_system_error(&s, &a).unwrap(), e);
    }
    let best = (0..5).min_by(|&a, &b| curve[a].total_cmp(&curve[b])).unwrap() as u32;
    let (a, v) = global_brute_force(&s, 5).unwrap().unwrap();
    assert_eq!(a[&n], best);
    assert_eq!(v, curve[best as usize]);
}

#[test]
fn distant_nodes_do_not_interact() {
    let full = state(RunConfig { rows: 1, cols: 4, d_r: 4, ..RunConfig::default() });
    let (a, d) = (full.graph().node_at(0, 0).unwrap(), full.graph().node_at(0, 3).unwrap());
    assert!(full.graph().distance(a, d) > 4);
    let s = full.with_goal(&[a, d]).unwrap();
    let domain = s.config().domain();
    let errors = s.config().errors();
    let x = GlobalAssignment::from([(a, 3), (d, 3)]);
    let expected = element_error(s.graph(), s.landscapes(), &errors, a, domain.value(3))
        + element_error(s.graph(), s.landscapes(), &errors, d, domain.value(3));
    assert_eq!(total_system_error(&s, &x).unwrap(), expected);
}

#[test]
fn validator_names_the_violating_pair() {
    let mut s = nodes_only(state(RunConfig { rows: 1, cols: 2, ..RunConfig::default() }));
    let (a, b) = (s.goal()[0], s.goal()[1]);
    s.assign(a, 7, 0).unwrap();
    s.assign(b, 7, 0).unwrap();
    let v = validate(&s);
    assert_eq!(v.len(), 1);
    assert_eq!((v[0].a, v[0].b, v[0].distance), (a, b, 2));

    let mut ok = nodes_only(state(RunConfig { rows: 1, cols: 2, ..RunConfig::default() }));
    ok.assign(a, 0, 0).unwrap();
    ok.assign(b, 40, 0).unwrap();
    assert!(validate(&ok).is_empty());
}

#[test]
fn database_sizes() {
    let empty = state(RunConfig::default());
    let text = ParameterDatabaseFile::from_state(&empty).to_text();
    assert!(text.contains("records 0\n"));
    assert_eq!(ParameterDatabaseFile::parse(&text).unwrap().to_text(), text);

    let mut one = state(RunConfig { rows: 1, cols: 1, ..RunConfig::default() });
    calibrate_graph(&mut one).unwrap();
    assert_eq!(ParameterDatabaseFile::from_state(&one).records.len(), 1);

    let mut s = state(RunConfig::default());
    calibrate_graph(&mut s).unwrap();
    let file = ParameterDatabaseFile::from_state(&s);
    assert_eq!(file.records.len(), 40);
    assert_eq!(ParameterDatabaseFile::parse(&file.to_text()).unwrap(), file);
}

#[test]
fn report_histograms() {
    let mut s = state(RunConfig { d_p: 0, ..RunConfig::default() });
    calibrate_graph(&mut s).unwrap();
    let m = machine_block(&emit_report(&s, None));
    assert_eq!(m["dimension_hist"], "1:40");
    assert!(m["constraint_hist"].starts_with("0:"));

    let mut s = state(RunConfig::default());
    calibrate_graph(&mut s).unwrap();
    let m = machine_block(&emit_report(&s, None));
    for bin in m["dimension_hist"].split(',') {
        let d: usize = bin.split_once(':').unwrap().0.parse().unwrap();
        assert!((1..=5).contains(&d));
    }
}

#[test]
fn config_examples() {
    assert_eq!(parse_config("").unwrap(), RunConfig::default());
    let cfg = parse_config("d_p = 1\nrows = 4\ncols = 4").unwrap();
    assert_eq!(cfg, RunConfig { d_p: 1, rows: 4, cols: 4, ..RunConfig::default() });
    let err = parse_config("d_p = -1").unwrap_err();
    assert_eq!((err.line, err.key.as_str()), (1, "d_p"));
}
