//! Structure alignment: subject bone lengths recombined with reference bone
//! directions, followed by a vertical offset correction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skeleton::{
    augment_virtual, default_tree, from_polar, polar_entries, ExtendedSkeleton, JointId, KinematicTree, PolarJoint,
    PolarPose, Skeleton, TOTAL_JOINTS,
};

/// Which extreme of the figure is matched between reference and output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerticalAnchor {
    /// Match the smallest `y` (the top of the figure in image coordinates).
    #[default]
    MinY,
    /// Match the largest `y`, i.e. align the lowest points (usually the feet).
    MaxY,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum RootPlacement {
    #[default]
    ReferenceRoot,
    Explicit {
        x: f64,
        y: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentConfig {
    pub subject_scale: f64,
    pub vertical_anchor: VerticalAnchor,
    pub root_placement: RootPlacement,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self { subject_scale: 1.0, vertical_anchor: VerticalAnchor::MinY, root_placement: RootPlacement::ReferenceRoot }
    }
}

impl AlignmentConfig {
    pub fn with_scale(subject_scale: f64) -> Self {
        Self { subject_scale, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        if !(self.subject_scale.is_finite() && self.subject_scale > 0.0) {
            return Err(AlignError::InvalidScale(self.subject_scale));
        }
        if let RootPlacement::Explicit { x, y } = self.root_placement {
            if !x.is_finite() || !y.is_finite() {
                return Err(AlignError::InvalidRootPlacement);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JointStatus {
    Aligned,
    MissingInRef,
    MissingInSubject,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub aligned: ExtendedSkeleton,
    /// Vertical offset added to every aligned joint.
    pub b: f64,
    pub per_joint_status: [JointStatus; TOTAL_JOINTS],
}

impl AlignmentResult {
    pub fn aligned_count(&self) -> usize {
        self.per_joint_status.iter().filter(|s| **s == JointStatus::Aligned).count()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlignError {
    #[error("reference root joint {0} is missing")]
    ReferenceRootMissing(JointId),
    #[error("reference and subject share no defined bones")]
    NoCommonBones,
    #[error("subject scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("explicit root placement must be finite")]
    InvalidRootPlacement,
}

/// Status of a non-root joint before reconstruction, looking only at the
/// joint's own bone in each pose.
fn bone_status(
    joint: JointId,
    father: JointId,
    reference: &ExtendedSkeleton,
    subject: &ExtendedSkeleton,
    ref_entry: &PolarJoint,
    sub_entry: &PolarJoint,
) -> JointStatus {
    if !reference.is_present(joint) || !reference.is_present(father) {
        JointStatus::MissingInRef
    } else if !subject.is_present(joint) || !subject.is_present(father) {
        JointStatus::MissingInSubject
    } else if !ref_entry.defined || !sub_entry.defined {
        JointStatus::Degenerate
    } else {
        JointStatus::Aligned
    }
}

/// Recombines subject bone lengths with reference bone directions.
///
/// Every joint defined in both poses takes `(scale * rho_subject,
/// cos_reference, sin_reference)`. The figure is rebuilt from the configured
/// root position and then shifted vertically so the anchor extreme of the
/// aligned joints matches that of the same joints in the reference.
pub fn align(
    reference: &ExtendedSkeleton,
    subject: &ExtendedSkeleton,
    tree: &KinematicTree,
    cfg: &AlignmentConfig,
) -> Result<AlignmentResult, AlignError> {
    cfg.validate()?;
    let root = tree.root();
    let ref_root = reference.joint(root);
    if !ref_root.is_present() {
        return Err(AlignError::ReferenceRootMissing(root));
    }

    let ref_polar = polar_entries(reference, tree);
    let sub_polar = polar_entries(subject, tree);

    let mut status = [JointStatus::MissingInRef; TOTAL_JOINTS];
    let mut entries = [PolarJoint::UNDEFINED; TOTAL_JOINTS];
    status[root.index()] = JointStatus::Aligned;
    let mut common = 0usize;
    for &joint in &tree.topological_order()[1..] {
        let father = tree.parent(joint).expect("non-root joints have parents");
        let (r, s) = (&ref_polar[joint.index()], &sub_polar[joint.index()]);
        let own = bone_status(joint, father, reference, subject, r, s);
        if own == JointStatus::Aligned {
            common += 1;
            entries[joint.index()] = PolarJoint {
                rho: cfg.subject_scale * s.rho,
                cos_theta: r.cos_theta,
                sin_theta: r.sin_theta,
                defined: true,
                confidence: reference.joint(joint).confidence.min(subject.joint(joint).confidence),
            };
        }
        // A joint whose father did not survive cannot be placed either; it
        // inherits the father's reason.
        let father_status = status[father.index()];
        status[joint.index()] =
            if father_status != JointStatus::Aligned && own == JointStatus::Aligned { father_status } else { own };
    }
    if common == 0 {
        return Err(AlignError::NoCommonBones);
    }

    let root_position = match cfg.root_placement {
        RootPlacement::ReferenceRoot => ref_root.position(),
        RootPlacement::Explicit { x, y } => (x, y),
    };
    let pose = PolarPose { entries, root_position, root_confidence: ref_root.confidence, canvas: reference.canvas };
    let mut aligned = from_polar(&pose, tree, root_position);

    let anchor = |s: &ExtendedSkeleton| {
        let ys = JointId::all().filter(|&j| aligned.is_present(j)).map(|j| s.joint(j).y);
        match cfg.vertical_anchor {
            VerticalAnchor::MinY => ys.fold(f64::INFINITY, f64::min),
            VerticalAnchor::MaxY => ys.fold(f64::NEG_INFINITY, f64::max),
        }
    };
    let target = anchor(reference);
    let raw = target - anchor(&aligned);
    // Reconstruction round-off leaves a few ulps of offset even when the
    // figure already sits on the anchor; report that as no shift at all.
    let noise = 1024.0 * f64::EPSILON * target.abs().max(1.0);
    let b = if raw.abs() <= noise { 0.0 } else { raw };
    for k in aligned.joints.iter_mut().filter(|k| k.is_present()) {
        k.y += b;
    }

    Ok(AlignmentResult { aligned, b, per_joint_status: status })
}

/// Aligns two plain skeletons using the default tree.
pub fn retarget_pose(
    reference: &Skeleton,
    subject_template: &Skeleton,
    cfg: &AlignmentConfig,
) -> Result<AlignmentResult, AlignError> {
    align(&augment_virtual(reference), &augment_virtual(subject_template), &default_tree(), cfg)
}

/// Ratio of the reference torso (hip center to shoulder center) to the
/// subject torso, usable as `subject_scale` when the two skeletons were
/// annotated at different resolutions. `None` if either torso is missing or
/// has zero length.
pub fn suggest_subject_scale(reference: &Skeleton, subject: &Skeleton) -> Option<f64> {
    let torso = |s: &Skeleton| {
        let ext = augment_virtual(s);
        let (sc, hc) = (ext.joint(JointId::SHOULDER_CENTER), ext.joint(JointId::HIP_CENTER));
        (sc.is_present() && hc.is_present()).then(|| sc.distance(hc)).filter(|d| *d > 0.0)
    };
    Some(torso(reference)? / torso(subject)?)
}
