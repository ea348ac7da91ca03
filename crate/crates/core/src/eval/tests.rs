use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names() -> Vec<String> {
    crate::taxonomy::SOURCE_LABELS.iter().map(|s| s.to_string()).collect()
}

fn label_of(name: &str) -> i32 {
    crate::taxonomy::SOURCE_LABELS.iter().position(|s| *s == name).unwrap() as i32
}

fn gt_from(points: Vec<Point3>, labels: Vec<i32>) -> GtCloud {
    let n = points.len();
    GtCloud {
        points,
        labels,
        label_names: names(),
        instance: vec![-1; n],
        frame: "world".into(),
    }
}

fn pred_from(points: &[Point3], classes: &[ClassId]) -> LabeledCloud {
    LabeledCloud {
        area_id: "a".into(),
        coords: points.iter().map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect(),
        segment: classes.iter().map(|c| c.index() as i32).collect(),
        instance: vec![0; points.len()],
        confidence: vec![1.0; points.len()],
    }
}

fn line(n: usize, y: f64) -> Vec<Point3> {
    (0..n).map(|i| Point3::new(i as f64, y, 0.0)).collect()
}

#[test]
fn clone_with_agreeing_labels_is_perfect() {
    let pts = line(50, 0.0);
    let gt = gt_from(pts.clone(), vec![label_of("door"); 50]);
    let pred = pred_from(&pts, &[ClassId::DOOR; 50]);
    let rep = per_point_accuracy(&[("a", &pred, &gt)]).unwrap();
    assert_eq!(rep.overall, Some(1.0));
}

#[test]
fn all_disagree_is_zero() {
    let pts = line(20, 0.0);
    let gt = gt_from(pts.clone(), vec![label_of("wall"); 20]);
    let pred = pred_from(&pts, &[ClassId::WINDOW; 20]);
    let rep = per_point_accuracy(&[("a", &pred, &gt)]).unwrap();
    assert_eq!(rep.overall, Some(0.0));
}

/// n = (100, 300), a = (1.0, 0.5) gives 0.25 * 1.0 + 0.75 * 0.5.
pub(crate) fn two_area_fixture() -> (LabeledCloud, GtCloud, LabeledCloud, GtCloud) {
    let p1 = line(100, 0.0);
    let gt1 = gt_from(p1.clone(), vec![label_of("door"); 100]);
    let pred1 = pred_from(&p1, &[ClassId::DOOR; 100]);
    let p2 = line(300, 5.0);
    let labels2: Vec<i32> = (0..300).map(|i| if i % 2 == 0 { label_of("chair") } else { label_of("wall") }).collect();
    let gt2 = gt_from(p2.clone(), labels2);
    let pred2 = pred_from(&p2, &[ClassId::FURNITURE; 300]);
    (pred1, gt1, pred2, gt2)
}

#[test]
fn two_area_weighting() {
    let (pred1, gt1, pred2, gt2) = two_area_fixture();
    let rep = per_point_accuracy(&[("area_1", &pred1, &gt1), ("area_2", &pred2, &gt2)]).unwrap();
    assert_eq!(rep.areas["area_1"].weight, Some(0.25));
    assert_eq!(rep.areas["area_2"].accuracy, Some(0.5));
    assert!((rep.overall.unwrap() - 0.625).abs() < 1e-12);
    let w: f64 = rep.areas.values().filter_map(|r| r.weight).sum();
    assert!((w - 1.0).abs() < 1e-12);
}

#[test]
fn exclusions_leave_the_denominator() {
    let pts = line(4, 0.0);
    let gt = gt_from(pts.clone(), vec![label_of("clutter"), label_of("board"), label_of("door"), label_of("door")]);
    let pred = pred_from(&pts, &[ClassId::DOOR, ClassId::DOOR, ClassId::AED, ClassId::DOOR]);
    let rep = per_point_accuracy(&[("a", &pred, &gt)]).unwrap();
    let row = &rep.areas["a"];
    assert_eq!(row.n, 1);
    assert_eq!(row.excluded_reference, 2);
    assert_eq!(row.skipped_novel, 1);
    assert_eq!(rep.overall, Some(1.0));
}

#[test]
fn empty_prediction_has_no_overall() {
    let gt = gt_from(line(3, 0.0), vec![0; 3]);
    let rep = per_point_accuracy(&[("a", &LabeledCloud::default(), &gt)]).unwrap();
    assert_eq!(rep.overall, None);
    assert_eq!(rep.areas["a"].weight, None);
}

#[test]
fn coverage_cases() {
    let gt_pts = line(10, 0.0);
    let gt = gt_from(gt_pts.clone(), vec![label_of("wall"); 10]);
    let idx = NnIndex::build(&gt.points);
    let inside = spatial_coverage(ClassId::DOOR, &gt_pts[..4], &gt, &idx, 0.1).unwrap();
    assert_eq!(inside.fraction, Some(1.0));
    assert_eq!(inside.mismatched_labels[0].label, "wall");
    assert_eq!(inside.mismatched_labels[0].pct, 100.0);
    let away: Vec<_> = gt_pts.iter().map(|p| p + nalgebra::Vector3::new(0.0, 0.0, 1.0)).collect();
    assert_eq!(spatial_coverage(ClassId::DOOR, &away, &gt, &idx, 0.1).unwrap().fraction, Some(0.0));
    let empty = gt_from(vec![], vec![]);
    let r = spatial_coverage(ClassId::DOOR, &away, &empty, &NnIndex::build(&[]), 0.1).unwrap();
    assert_eq!(r.covered, 0);
    assert_eq!(r.fraction, Some(0.0));
}

#[test]
fn gt_cloud_roundtrip_and_frames() {
    let dir = tempfile::tempdir().unwrap();
    let gt = gt_from(line(5, 1.0), vec![0, 1, 2, 3, 12]);
    write_gt_cloud(dir.path(), "area_1", &gt).unwrap();
    let back = read_gt_cloud(dir.path()).unwrap();
    assert_eq!(back, gt);
    let mut m = LabeledCloud::default().manifest("world");
    assert!(check_frames(&m, &back).is_ok());
    m.frame = "area_1_local".into();
    assert!(matches!(check_frames(&m, &back), Err(EvalError::FrameMismatch { .. })));
}

fn item(area: &str, class: ClassId, x: f64) -> CentroidItem {
    CentroidItem {
        area_id: area.into(),
        class,
        centroid: Point3::new(x, 0.0, 0.0),
    }
}

#[test]
fn complementarity_basic_cases() {
    let ex = default_complementarity_exclusions();
    let r = complementarity(&[item("a", ClassId::DOOR, 0.0)], &[item("a", ClassId::DOOR, 0.5)], 1.0, &ex);
    assert_eq!(r.total, MatchCounts { both: 1, a_only: 0, b_only: 0 });
    let r = complementarity(&[item("a", ClassId::DOOR, 0.0)], &[item("a", ClassId::DOOR, 1.5)], 1.0, &ex);
    assert_eq!(r.total, MatchCounts { both: 0, a_only: 1, b_only: 1 });
    assert_eq!(r.unique_total, 2);
    // different area or class never matches; excluded classes vanish
    let r = complementarity(
        &[item("a", ClassId::DOOR, 0.0), item("a", ClassId::WALL, 0.0), item("a", ClassId::RAMP, 0.0)],
        &[item("b", ClassId::DOOR, 0.0), item("a", ClassId::AED, 0.0), item("a", ClassId::WALL, 0.0)],
        1.0,
        &ex,
    );
    assert_eq!(r.total, MatchCounts { both: 0, a_only: 1, b_only: 2 });
    assert!(!r.per_class.contains_key(&ClassId::WALL));
}

#[test]
fn radius_boundary_flips() {
    let ex = BTreeSet::new();
    let near = complementarity(&[item("a", ClassId::AED, 0.0)], &[item("a", ClassId::AED, 0.999)], 1.0, &ex);
    let far = complementarity(&[item("a", ClassId::AED, 0.0)], &[item("a", ClassId::AED, 1.001)], 1.0, &ex);
    assert_eq!(near.total.both, 1);
    assert_eq!(far.total, MatchCounts { both: 0, a_only: 1, b_only: 1 });
}

#[test]
fn retention_cases() {
    assert_eq!(retention(&[0.2, 0.8], &[0.5]), vec![Some(50.0)]);
    assert_eq!(retention(&[0.2, 0.8], &[0.0]), vec![Some(100.0)]);
    assert_eq!(retention(&[0.2, 1.0], &[1.0 + 1e-9]), vec![Some(0.0)]);
    assert_eq!(retention(&[], &[0.5]), vec![None]);
    let curve = retention_curve(
        &[(ClassId::AED, 0.9), (ClassId::DOOR, 0.3)],
        &threshold_grid(0.1),
        &novel_safety_classes(),
    );
    assert_eq!(curve.thresholds.len(), 11);
    assert_eq!(curve.n_safety, 1);
    assert_eq!(curve.safety[9], Some(100.0));
    assert_eq!(curve.all[5], Some(50.0));
}

/// Independent quadratic replay: linear nearest scan, hand mapping table.
pub(crate) fn brute_force_accuracy(pred: &LabeledCloud, gt: &GtCloud) -> (u64, u64) {
    let map = |name: &str| -> Option<ClassId> {
        match name {
            "ceiling" => Some(ClassId::CEILING),
            "floor" => Some(ClassId::FLOOR),
            "wall" => Some(ClassId::WALL),
            "beam" | "column" => Some(ClassId::COLUMN),
            "window" => Some(ClassId::WINDOW),
            "door" => Some(ClassId::DOOR),
            "table" | "chair" | "sofa" | "bookcase" => Some(ClassId::FURNITURE),
            _ => None,
        }
    };
    let overlapping = [
        ClassId::CEILING,
        ClassId::FLOOR,
        ClassId::WALL,
        ClassId::COLUMN,
        ClassId::WINDOW,
        ClassId::DOOR,
        ClassId::FURNITURE,
    ];
    let (mut counted, mut correct) = (0, 0);
    for i in 0..pred.len() {
        let c = ClassId::new(pred.segment[i] as u8).unwrap();
        if !overlapping.contains(&c) || gt.points.is_empty() {
            continue;
        }
        let q = pred.point(i);
        let mut best = 0;
        for j in 1..gt.points.len() {
            if (gt.points[j] - q).norm_squared() < (gt.points[best] - q).norm_squared() {
                best = j;
            }
        }
        if let Some(g) = map(&gt.label_names[gt.labels[best] as usize]) {
            counted += 1;
            correct += u64::from(g == c);
        }
    }
    (counted, correct)
}

pub(crate) fn random_pair(rng: &mut ChaCha8Rng, n_pred: usize, n_gt: usize) -> (LabeledCloud, GtCloud) {
    // quarter-meter lattice keeps exact distance ties frequent
    let mut p = || Point3::new(rng.random_range(0..16) as f64 * 0.25, rng.random_range(0..16) as f64 * 0.25, rng.random_range(0..8) as f64 * 0.25);
    let gt_pts: Vec<Point3> = (0..n_gt).map(|_| p()).collect();
    let pred_pts: Vec<Point3> = (0..n_pred).map(|_| p()).collect();
    let labels = (0..n_gt).map(|_| rng.random_range(0..13)).collect();
    let classes: Vec<ClassId> = (0..n_pred).map(|_| ClassId::new(rng.random_range(0..23)).unwrap()).collect();
    (pred_from(&pred_pts, &classes), gt_from(gt_pts, labels))
}

#[test]
fn accuracy_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..20 {
        let (pred, gt) = random_pair(&mut rng, 10 + k * 30, 5 + k * 50);
        let a = area_accuracy(&pred, &gt, &NnIndex::build(&gt.points)).unwrap();
        assert_eq!((a.tally.counted, a.tally.correct), brute_force_accuracy(&pred, &gt));
    }
}

proptest! {
    #[test]
    fn complementarity_is_symmetric(
        a in prop::collection::vec((0u8..4, 0.0f64..6.0, 0.0f64..6.0), 0..30),
        b in prop::collection::vec((0u8..4, 0.0f64..6.0, 0.0f64..6.0), 0..30),
    ) {
        let mk = |v: &[(u8, f64, f64)]| -> Vec<CentroidItem> {
            v.iter().map(|&(c, x, y)| CentroidItem { area_id: "a".into(), class: ClassId::new(c).unwrap(), centroid: Point3::new(x, y, 0.0) }).collect()
        };
        let (ia, ib) = (mk(&a), mk(&b));
        let ex = default_complementarity_exclusions();
        let ab = complementarity(&ia, &ib, 1.0, &ex);
        let ba = complementarity(&ib, &ia, 1.0, &ex);
        prop_assert_eq!(ab.total.both, ba.total.both);
        prop_assert_eq!(ab.total.a_only, ba.total.b_only);
        prop_assert_eq!(ab.unique_total, ab.total.both + ab.total.a_only + ab.total.b_only);
        prop_assert_eq!(ab.total.both + ab.total.a_only, ia.iter().filter(|i| !ex.contains(&i.class)).count() as u64);
        for c in ab.per_class.values() {
            let s = c.shares().unwrap();
            prop_assert!((s.both + s.a_only + s.b_only - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn retention_is_monotone(confs in prop::collection::vec(0.0f64..=1.0, 1..50), t1 in 0.0f64..1.0, dt in 0.0f64..1.0) {
        let r = retention(&confs, &[t1, t1 + dt]);
        prop_assert!(r[0].unwrap() >= r[1].unwrap());
    }
}
