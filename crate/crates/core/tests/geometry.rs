mod common;

use proptest::prelude::*;
use skelalign::retarget::RootPlacement;
use skelalign::skeleton::{Canvas, JointId, Keypoint, Skeleton, TOTAL_JOINTS};
use skelalign::{
    align, augment_virtual, default_tree, from_polar, retarget_pose, to_polar, AlignError, AlignmentConfig,
    JointStatus, VerticalAnchor,
};

fn skeleton_strategy(p_missing: f64) -> impl Strategy<Value = Skeleton> {
    prop::array::uniform18((0.0..512.0f64, 0.0..512.0f64, prop::bool::weighted(1.0 - p_missing))).prop_map(|pts| {
        let mut s = Skeleton::empty(Canvas::default());
        for (k, (x, y, present)) in s.joints.iter_mut().zip(pts) {
            if present {
                *k = Keypoint::present(x, y);
            }
        }
        s
    })
}

fn full() -> impl Strategy<Value = Skeleton> {
    skeleton_strategy(0.0)
}

fn close(a: &Keypoint, b: &Keypoint, tol: f64) -> bool {
    (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol
}

proptest! {
    #[test]
    fn polar_round_trip(s in full()) {
        let ext = augment_virtual(&s);
        let tree = default_tree();
        let pose = to_polar(&ext, &tree).unwrap();
        let back = from_polar(&pose, &tree, pose.root_position);
        for j in JointId::all() {
            prop_assert!(close(back.joint(j), ext.joint(j), 1e-6), "{}", j.name());
        }
    }

    #[test]
    fn partial_round_trip_keeps_only_connected_joints(s in skeleton_strategy(0.2)) {
        let ext = augment_virtual(&s);
        let tree = default_tree();
        let Ok(pose) = to_polar(&ext, &tree) else { return Ok(()) };
        let back = from_polar(&pose, &tree, pose.root_position);
        for j in JointId::all() {
            if back.is_present(j) {
                prop_assert!(ext.is_present(j));
                prop_assert!(close(back.joint(j), ext.joint(j), 1e-6));
            }
        }
    }

    #[test]
    fn reference_translation_moves_output(r in full(), s in full(), dx in -100.0..100.0f64, dy in -100.0..100.0f64) {
        let cfg = AlignmentConfig::default();
        let a = retarget_pose(&r, &s, &cfg).unwrap();
        let moved = r.map_positions(|x, y| (x + dx, y + dy));
        let b = retarget_pose(&moved, &s, &cfg).unwrap();
        for j in JointId::all() {
            let shifted = Keypoint { x: a.aligned.joint(j).x + dx, y: a.aligned.joint(j).y + dy, ..*a.aligned.joint(j) };
            prop_assert!(close(b.aligned.joint(j), &shifted, 1e-6));
        }
        prop_assert!((a.b - b.b).abs() < 1e-6);
    }

    #[test]
    fn subject_translation_is_irrelevant(r in full(), s in full(), dx in -100.0..100.0f64, dy in -100.0..100.0f64) {
        let cfg = AlignmentConfig::default();
        let a = retarget_pose(&r, &s, &cfg).unwrap();
        let b = retarget_pose(&r, &s.map_positions(|x, y| (x + dx, y + dy)), &cfg).unwrap();
        for j in JointId::all() {
            prop_assert!(close(a.aligned.joint(j), b.aligned.joint(j), 1e-6));
        }
    }

    #[test]
    fn realigning_is_a_fixed_point(r in full(), s in full()) {
        let cfg = AlignmentConfig::default();
        let first = retarget_pose(&r, &s, &cfg).unwrap();
        let again = align(&first.aligned, &augment_virtual(&s), &default_tree(), &cfg).unwrap();
        prop_assert!(again.b.abs() < 1e-6);
        for j in JointId::all() {
            prop_assert!(close(again.aligned.joint(j), first.aligned.joint(j), 1e-6));
        }
    }

    #[test]
    fn status_matches_presence(r in skeleton_strategy(0.25), s in skeleton_strategy(0.25)) {
        let Ok(res) = retarget_pose(&r, &s, &AlignmentConfig::default()) else { return Ok(()) };
        for j in JointId::all() {
            let aligned = res.per_joint_status[j.index()] == JointStatus::Aligned;
            prop_assert_eq!(aligned, res.aligned.is_present(j), "{}", j.name());
        }
    }

    #[test]
    fn dropping_subject_joints_never_adds_output(r in full(), s in full(), drop in 0usize..18) {
        let cfg = AlignmentConfig::default();
        let before = retarget_pose(&r, &s, &cfg).unwrap();
        let mut fewer = s.clone();
        fewer.joints[drop] = Keypoint::MISSING;
        let Ok(after) = retarget_pose(&r, &fewer, &cfg) else { return Ok(()) };
        for j in JointId::all() {
            prop_assert!(!after.aligned.is_present(j) || before.aligned.is_present(j));
        }
        prop_assert!(!after.aligned.is_present(JointId::new(drop).unwrap()));
    }

    #[test]
    fn max_anchor_matches_lowest_point(r in full(), s in full(), scale in 0.25..4.0f64) {
        let cfg = AlignmentConfig { subject_scale: scale, vertical_anchor: VerticalAnchor::MaxY, ..Default::default() };
        let res = retarget_pose(&r, &s, &cfg).unwrap();
        let ext = augment_virtual(&r);
        let max = |f: &dyn Fn(usize) -> f64| (0..TOTAL_JOINTS).map(f).fold(f64::NEG_INFINITY, f64::max);
        let got = max(&|i| res.aligned.joints[i].y);
        let want = max(&|i| ext.joints[i].y);
        prop_assert!((got - want).abs() < 1e-9);
    }
}

#[test]
fn explicit_root_is_used_before_offset() {
    let r = common::load_fixture("tpose.json");
    let cfg = AlignmentConfig { root_placement: RootPlacement::Explicit { x: 100.0, y: 50.0 }, ..Default::default() };
    let res = retarget_pose(&r, &r, &cfg).unwrap();
    let root = res.aligned.joint(JointId::HIP_CENTER);
    assert!((root.x - 100.0).abs() < 1e-9);
    // identical shape, so the anchor correction restores the reference height
    let ref_root = augment_virtual(&r).joint(JointId::HIP_CENTER).y;
    assert!((root.y - ref_root).abs() < 1e-9);
    assert!((res.b - (ref_root - 50.0)).abs() < 1e-9);
}

#[test]
fn missing_reference_root_is_an_error() {
    let mut r = common::load_fixture("tpose.json");
    r.joints[JointId::L_HIP.index()] = Keypoint::MISSING;
    let s = common::load_fixture("tpose.json");
    let err = retarget_pose(&r, &s, &AlignmentConfig::default()).unwrap_err();
    assert_eq!(err, AlignError::ReferenceRootMissing(JointId::HIP_CENTER));
}

#[test]
fn disjoint_bones_are_an_error() {
    let r = common::load_fixture("tpose.json");
    let mut s = Skeleton::empty(Canvas::default());
    s.joints[JointId::NOSE.index()] = Keypoint::present(10.0, 10.0);
    assert_eq!(retarget_pose(&r, &s, &AlignmentConfig::default()).unwrap_err(), AlignError::NoCommonBones);
}

#[test]
fn one_arm_missing_statuses() {
    let r = common::load_fixture("tpose.json");
    let s = common::load_fixture("one_arm_missing.json");
    let res = retarget_pose(&r, &s, &AlignmentConfig::default()).unwrap();
    assert_eq!(res.per_joint_status[JointId::L_ELBOW.index()], JointStatus::MissingInSubject);
    assert_eq!(res.per_joint_status[JointId::L_WRIST.index()], JointStatus::MissingInSubject);
    assert_eq!(res.aligned_count(), TOTAL_JOINTS - 2);
    let swapped = retarget_pose(&s, &r, &AlignmentConfig::default()).unwrap();
    assert_eq!(swapped.per_joint_status[JointId::L_WRIST.index()], JointStatus::MissingInRef);
}

#[test]
fn invalid_scale_rejected() {
    let r = common::load_fixture("tpose.json");
    for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        let err = retarget_pose(&r, &r, &AlignmentConfig::with_scale(bad)).unwrap_err();
        assert!(matches!(err, AlignError::InvalidScale(_)));
    }
}
