use std::sync::OnceLock;

use cueing_core::constraints::ConstraintSet;
use cueing_core::error::TableError;
use cueing_core::explicit::*;
use cueing_core::model::{Axis, ModelParams, PlatformState, SpecificForce};

struct Built {
    qp: ParametricQp,
    table: RegionTable,
}

fn build(axis: Axis) -> Built {
    let m = linearize_and_discretize(&ModelParams::default(), 0.25, axis).unwrap();
    let w = ExplicitWeights::default();
    let c = ConstraintSet::default();
    let o = BuildOptions::default();
    let (table, stats) = build_region_table(&m, &w, &c, &o).unwrap();
    assert_eq!(stats.regions, table.regions.len());
    Built {
        qp: ParametricQp::new(&m, &w, &c, &o).unwrap(),
        table,
    }
}

fn built(axis: Axis) -> &'static Built {
    static LONG: OnceLock<Built> = OnceLock::new();
    static LAT: OnceLock<Built> = OnceLock::new();
    match axis {
        Axis::Long => LONG.get_or_init(|| build(Axis::Long)),
        Axis::Lat => LAT.get_or_init(|| build(Axis::Lat)),
    }
}

#[test]
fn origin_maps_to_zero_input() {
    for axis in Axis::BOTH {
        let hit = built(axis).table.query(&[0.0; 5]).expect("origin covered");
        for u in hit.inputs {
            assert!(u.abs() < 1e-12, "{axis:?}: {u}");
        }
    }
}

#[test]
fn matches_dense_qp_oracle() {
    for axis in Axis::BOTH {
        let b = built(axis);
        let r = check_against_oracle(&b.table, &b.qp, 10_000, 17);
        assert_eq!(r.feasible, 10_000);
        assert!(r.coverage() >= 0.999, "{axis:?} coverage {}", r.coverage());
        assert!(r.max_input_error <= 1e-6, "{axis:?} {r:?}");
        assert!(r.max_rel_cost_error <= 1e-9, "{axis:?} {r:?}");
        assert!(r.max_table_violation <= 1e-6, "{axis:?} {r:?}");
    }
}

#[test]
fn laws_continuous_across_facets() {
    for axis in Axis::BOTH {
        let r = check_continuity(&built(axis).table, 100, 3);
        assert!(r.adjacent_pairs > 0);
        assert!(r.max_jump <= 1e-6, "{axis:?} {r:?}");
    }
}

#[test]
fn law_affine_inside_region() {
    let t = &built(Axis::Long).table;
    // two points along a segment that stays in one region
    let p1 = [0.01, 0.05, 0.3, 0.02, 1.5];
    let p2 = [0.012, 0.051, 0.31, 0.021, 1.52];
    let r1 = t.query(&p1).unwrap();
    let r2 = t.query(&p2).unwrap();
    assert_eq!(r1.region, r2.region);
    for alpha in [0.1, 0.5, 0.9] {
        let p: Vec<f64> = p1
            .iter()
            .zip(&p2)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        let mid = t.query(&p).unwrap();
        assert_eq!(mid.region, r1.region);
        for i in 0..mid.inputs.len() {
            let lin = alpha * r1.inputs[i] + (1.0 - alpha) * r2.inputs[i];
            assert!((mid.inputs[i] - lin).abs() < 1e-12);
        }
    }
}

#[test]
fn large_reference_saturates_first_translation() {
    // tilted back and moving backwards: the tilt alone cannot supply the
    // reference, so a_tran_0 must sit on its bound
    let b = built(Axis::Long);
    let p = [0.0, -0.4, -3.0, 0.3, 6.7];
    let hit = b.table.query(&p).unwrap();
    let dense = b.qp.solve_dense(&p).unwrap();
    assert!((hit.inputs[1] - 9.81).abs() < 1e-9, "{:?}", hit.inputs);
    assert!((dense[1] - 9.81).abs() < 1e-9, "{dense:?}");
}

#[test]
fn outside_box_not_found() {
    let t = &built(Axis::Lat).table;
    assert!(t.query(&[0.0, 0.0, 0.0, 0.0, 6.8]).is_none());
    assert!(t.query(&[0.0, 0.0, 0.0, 0.36, 0.0]).is_none());
    assert!(t.query(&[0.0, f64::NAN, 0.0, 0.0, 0.0]).is_none());
}

#[test]
fn facet_tie_goes_to_lowest_index() {
    let t = &built(Axis::Long).table;
    // bisect along a segment until the region changes
    let a = [0.0, 0.0, 0.0, 0.0, 0.5];
    let b = [0.0, 0.0, 0.0, 0.0, 6.5];
    let ra = t.query(&a).unwrap().region;
    let rb = t.query(&b).unwrap().region;
    assert_ne!(ra, rb);
    let (mut lo, mut hi) = (0.0, 1.0);
    let at = |s: f64| -> Vec<f64> { a.iter().zip(&b).map(|(x, y)| x + s * (y - x)).collect() };
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if t.query(&at(mid)).unwrap().region == ra {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = at(0.5 * (lo + hi));
    let near: Vec<usize> = (0..t.regions.len())
        .filter(|&i| t.regions[i].margin(&p) <= 1e-9)
        .collect();
    assert!(near.len() >= 2, "{near:?}");
    let hit = t.query(&p).unwrap();
    assert_eq!(hit.region, near[0]);
    let other = t.regions[near[1]].law(&p);
    for (x, y) in hit.inputs.iter().zip(&other) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn build_is_deterministic() {
    let again = build(Axis::Lat);
    assert_eq!(to_bytes(&again.table), to_bytes(&built(Axis::Lat).table));
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("long.mcat");
    let t = &built(Axis::Long).table;
    save_table(t, &path).unwrap();
    let loaded = load_table(&path, Some(&t.meta.model_hash), false).unwrap();
    assert!(!loaded.hash_mismatch);
    assert_eq!(to_bytes(&loaded.table), to_bytes(t));
    assert_eq!(loaded.table.regions.len(), t.regions.len());
    let p = [0.01, -0.1, 0.5, 0.1, -2.0];
    assert_eq!(
        loaded.table.query(&p).unwrap().inputs,
        t.query(&p).unwrap().inputs
    );
}

#[test]
fn truncated_file_names_region() {
    let t = &built(Axis::Long).table;
    let bytes = to_bytes(t);
    let header = 4 + 4 + 1 + 4 + 4 + 4 + 8 + 32 + 8 * 15;
    let first = 4 + 8 * (t.regions[0].h.nrows() * 6 + 4 * 5 + 4);
    let cut = &bytes[..header + first + 10];
    match from_bytes(cut, None, false) {
        Err(TableError::Truncated { region, total, .. }) => {
            assert_eq!(region, 1);
            assert_eq!(total, t.regions.len());
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        from_bytes(&bytes[..20], None, false),
        Err(TableError::Truncated { .. })
    ));
}

#[test]
fn hash_mismatch_refused_unless_forced() {
    let t = &built(Axis::Long).table;
    let bytes = to_bytes(t);
    let other = [7u8; 32];
    assert!(matches!(
        from_bytes(&bytes, Some(&other), false),
        Err(TableError::HashMismatch)
    ));
    let forced = from_bytes(&bytes, Some(&other), true).unwrap();
    assert!(forced.hash_mismatch);
    assert_eq!(forced.table.regions.len(), t.regions.len());
}

#[test]
fn header_checks() {
    let mut bytes = to_bytes(&built(Axis::Lat).table);
    bytes[4] = 9;
    assert!(matches!(
        from_bytes(&bytes, None, false),
        Err(TableError::Version {
            found: 9,
            expected: 1
        })
    ));
    bytes[0] = b'X';
    assert!(matches!(
        from_bytes(&bytes, None, false),
        Err(TableError::BadMagic)
    ));
}

#[test]
fn hash_tracks_configuration() {
    let m = linearize_and_discretize(&ModelParams::default(), 0.25, Axis::Long).unwrap();
    let w = ExplicitWeights::default();
    let c = ConstraintSet::default();
    let o = BuildOptions::default();
    let base = model_hash(&m, &w, &c, &o);
    assert_eq!(base, built(Axis::Long).table.meta.model_hash);
    let c2 = ConstraintSet { v_max: 7.0, ..c };
    assert_ne!(base, model_hash(&m, &w, &c2, &o));
    let lat = linearize_and_discretize(&ModelParams::default(), 0.25, Axis::Lat).unwrap();
    assert_ne!(base, model_hash(&lat, &w, &c, &o));
}

#[test]
fn controller_combines_axes() {
    let ctl = ExplicitController::new(
        built(Axis::Long).table.clone(),
        built(Axis::Lat).table.clone(),
    )
    .unwrap();
    let x = PlatformState {
        theta_long: 0.05,
        v_lat: -0.2,
        ..Default::default()
    };
    let f = SpecificForce::new(1.0, -0.5);
    let seq = ctl.evaluate(&x, &f).unwrap();
    assert_eq!(seq.len(), 2);
    let long = ctl.long.query(&axis_parameter(&x, &f, Axis::Long)).unwrap();
    assert_eq!(seq[1].a_tran_long, long.inputs[3]);
    assert!(ExplicitController::new(ctl.lat.clone(), ctl.long.clone()).is_err());
}
