//! Skeletons, the kinematic tree over real and virtual joints, and the
//! conversion between Euclidean joint positions and father-relative polar
//! coordinates.
//!
//! Coordinates follow the image convention: origin top-left, `y` grows
//! downward.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of detector joints in the COCO-18 layout.
pub const REAL_JOINTS: usize = 18;
/// Real joints plus the shoulder-center and hip-center virtual joints.
pub const TOTAL_JOINTS: usize = 20;

/// Tolerance for exact identities such as unit-direction norms.
pub const EXACT_TOL: f64 = 1e-9;
/// Tolerance for geometric round trips, in pixels.
pub const GEOMETRIC_TOL: f64 = 1e-6;

/// Index of a joint in the extended 20-joint layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointId(u8);

impl JointId {
    pub const NOSE: JointId = JointId(0);
    pub const NECK: JointId = JointId(1);
    pub const R_SHOULDER: JointId = JointId(2);
    pub const R_ELBOW: JointId = JointId(3);
    pub const R_WRIST: JointId = JointId(4);
    pub const L_SHOULDER: JointId = JointId(5);
    pub const L_ELBOW: JointId = JointId(6);
    pub const L_WRIST: JointId = JointId(7);
    pub const R_HIP: JointId = JointId(8);
    pub const R_KNEE: JointId = JointId(9);
    pub const R_ANKLE: JointId = JointId(10);
    pub const L_HIP: JointId = JointId(11);
    pub const L_KNEE: JointId = JointId(12);
    pub const L_ANKLE: JointId = JointId(13);
    pub const R_EYE: JointId = JointId(14);
    pub const L_EYE: JointId = JointId(15);
    pub const R_EAR: JointId = JointId(16);
    pub const L_EAR: JointId = JointId(17);
    pub const SHOULDER_CENTER: JointId = JointId(18);
    pub const HIP_CENTER: JointId = JointId(19);

    const NAMES: [&'static str; TOTAL_JOINTS] = [
        "nose",
        "neck",
        "r_shoulder",
        "r_elbow",
        "r_wrist",
        "l_shoulder",
        "l_elbow",
        "l_wrist",
        "r_hip",
        "r_knee",
        "r_ankle",
        "l_hip",
        "l_knee",
        "l_ankle",
        "r_eye",
        "l_eye",
        "r_ear",
        "l_ear",
        "shoulder_center",
        "hip_center",
    ];

    pub fn new(index: usize) -> Option<Self> {
        (index < TOTAL_JOINTS).then_some(JointId(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_virtual(self) -> bool {
        self.index() >= REAL_JOINTS
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self.index()]
    }

    pub fn all() -> impl Iterator<Item = JointId> {
        (0..TOTAL_JOINTS as u8).map(JointId)
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.0)
    }
}

/// A 2D keypoint. `confidence == 0` marks the joint as missing, in which
/// case `x` and `y` carry no meaning.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub const MISSING: Keypoint = Keypoint { x: 0.0, y: 0.0, confidence: 0.0 };

    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self { x, y, confidence }
    }

    pub fn present(x: f64, y: f64) -> Self {
        Self { x, y, confidence: 1.0 }
    }

    pub fn is_present(&self) -> bool {
        self.confidence > 0.0
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn distance(&self, other: &Keypoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Pixel dimensions of the image a skeleton was annotated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl Canvas {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.width as f64).contains(&x) && (0.0..=self.height as f64).contains(&y)
    }
}

impl Default for Canvas {
    fn default() -> Self {
        Canvas::new(512, 512)
    }
}

impl fmt::Display for Canvas {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Problems found by [`Skeleton::validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkeletonIssue {
    #[error("canvas must have positive dimensions, got {0}")]
    EmptyCanvas(Canvas),
    #[error("joint {joint} has confidence {confidence} outside [0, 1]")]
    ConfidenceOutOfRange { joint: JointId, confidence: f64 },
    #[error("joint {joint} has a non-finite coordinate")]
    NonFinite { joint: JointId },
    #[error("joint {joint} at ({x}, {y}) lies outside the {canvas} canvas")]
    OutOfCanvas { joint: JointId, x: f64, y: f64, canvas: Canvas },
}

/// 18 COCO-layout keypoints on a pixel canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub joints: [Keypoint; REAL_JOINTS],
    pub canvas: Canvas,
}

impl Skeleton {
    pub fn new(joints: [Keypoint; REAL_JOINTS], canvas: Canvas) -> Self {
        Self { joints, canvas }
    }

    pub fn empty(canvas: Canvas) -> Self {
        Self { joints: [Keypoint::MISSING; REAL_JOINTS], canvas }
    }

    pub fn joint(&self, id: JointId) -> Option<&Keypoint> {
        self.joints.get(id.index())
    }

    pub fn present_count(&self) -> usize {
        self.joints.iter().filter(|k| k.is_present()).count()
    }

    /// Flat `[x0, y0, c0, x1, y1, c1, ...]` layout used by OpenPose.
    pub fn to_flat(&self) -> Vec<f64> {
        self.joints.iter().flat_map(|k| [k.x, k.y, k.confidence]).collect()
    }

    /// Returns every invariant violation; an empty list means valid.
    pub fn validate(&self) -> Vec<SkeletonIssue> {
        let mut issues = Vec::new();
        if self.canvas.width == 0 || self.canvas.height == 0 {
            issues.push(SkeletonIssue::EmptyCanvas(self.canvas));
        }
        for (i, k) in self.joints.iter().enumerate() {
            let joint = JointId(i as u8);
            if !(0.0..=1.0).contains(&k.confidence) {
                issues.push(SkeletonIssue::ConfidenceOutOfRange { joint, confidence: k.confidence });
                continue;
            }
            if !k.is_present() {
                continue;
            }
            if !k.x.is_finite() || !k.y.is_finite() {
                issues.push(SkeletonIssue::NonFinite { joint });
            } else if !self.canvas.contains(k.x, k.y) {
                issues.push(SkeletonIssue::OutOfCanvas { joint, x: k.x, y: k.y, canvas: self.canvas });
            }
        }
        issues
    }

    /// Applies `f` to every present joint position.
    pub fn map_positions(&self, mut f: impl FnMut(f64, f64) -> (f64, f64)) -> Skeleton {
        let mut out = self.clone();
        for k in out.joints.iter_mut().filter(|k| k.is_present()) {
            (k.x, k.y) = f(k.x, k.y);
        }
        out
    }
}

/// A skeleton carrying the two virtual joints in slots 18 and 19.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSkeleton {
    pub joints: [Keypoint; TOTAL_JOINTS],
    pub canvas: Canvas,
}

impl ExtendedSkeleton {
    pub fn joint(&self, id: JointId) -> &Keypoint {
        &self.joints[id.index()]
    }

    pub fn is_present(&self, id: JointId) -> bool {
        self.joints[id.index()].is_present()
    }

    /// Drops the virtual joints.
    pub fn to_skeleton(&self) -> Skeleton {
        let mut joints = [Keypoint::MISSING; REAL_JOINTS];
        joints.copy_from_slice(&self.joints[..REAL_JOINTS]);
        Skeleton { joints, canvas: self.canvas }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> ExtendedSkeleton {
        let mut out = self.clone();
        for k in out.joints.iter_mut().filter(|k| k.is_present()) {
            k.x += dx;
            k.y += dy;
        }
        out
    }
}

impl From<&ExtendedSkeleton> for Skeleton {
    fn from(ext: &ExtendedSkeleton) -> Self {
        ext.to_skeleton()
    }
}

fn midpoint(a: &Keypoint, b: &Keypoint) -> Keypoint {
    if !a.is_present() || !b.is_present() {
        return Keypoint::MISSING;
    }
    Keypoint { x: (a.x + b.x) / 2.0, y: (a.y + b.y) / 2.0, confidence: a.confidence.min(b.confidence) }
}

/// Adds the shoulder-center and hip-center joints as midpoints of their
/// defining pairs. A virtual joint is missing when either of its defining
/// joints is missing.
pub fn augment_virtual(skeleton: &Skeleton) -> ExtendedSkeleton {
    let mut joints = [Keypoint::MISSING; TOTAL_JOINTS];
    joints[..REAL_JOINTS].copy_from_slice(&skeleton.joints);
    let j = &skeleton.joints;
    joints[JointId::SHOULDER_CENTER.index()] =
        midpoint(&j[JointId::R_SHOULDER.index()], &j[JointId::L_SHOULDER.index()]);
    joints[JointId::HIP_CENTER.index()] = midpoint(&j[JointId::R_HIP.index()], &j[JointId::L_HIP.index()]);
    ExtendedSkeleton { joints, canvas: skeleton.canvas }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("joint index {0} is out of range")]
    UnknownJoint(usize),
    #[error("joint {0} is listed as its own parent")]
    SelfParent(JointId),
    #[error("joint {0} has more than one parent")]
    DuplicateParent(JointId),
    #[error("the root {0} cannot have a parent")]
    RootHasParent(JointId),
    #[error("joint {0} does not reach the root")]
    Unreachable(JointId),
}

/// Parent map over the 20 extended joints.
///
/// Joints that are neither the root nor have a parent are outside the tree;
/// they never receive polar coordinates and are always missing after
/// reconstruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KinematicTree {
    root: JointId,
    parents: [Option<JointId>; TOTAL_JOINTS],
    order: Vec<JointId>,
}

impl KinematicTree {
    /// Builds a tree from `(child, parent)` edges.
    pub fn new(root: JointId, edges: &[(JointId, JointId)]) -> Result<Self, TreeError> {
        let mut parents = [None; TOTAL_JOINTS];
        for &(child, parent) in edges {
            if child == parent {
                return Err(TreeError::SelfParent(child));
            }
            if child == root {
                return Err(TreeError::RootHasParent(root));
            }
            if parents[child.index()].replace(parent).is_some() {
                return Err(TreeError::DuplicateParent(child));
            }
        }

        // Breadth-first from the root, children visited in index order.
        let mut order = vec![root];
        let mut head = 0;
        while head < order.len() {
            let current = order[head];
            head += 1;
            order.extend(JointId::all().filter(|j| parents[j.index()] == Some(current)));
        }
        if let Some(stray) = JointId::all().find(|j| parents[j.index()].is_some() && !order.contains(j)) {
            return Err(TreeError::Unreachable(stray));
        }
        Ok(Self { root, parents, order })
    }

    /// Builds a tree from raw indices, e.g. when crossing an FFI boundary.
    pub fn from_indices(root: usize, edges: &[(usize, usize)]) -> Result<Self, TreeError> {
        let id = |i: usize| JointId::new(i).ok_or(TreeError::UnknownJoint(i));
        let edges = edges.iter().map(|&(c, p)| Ok((id(c)?, id(p)?))).collect::<Result<Vec<_>, TreeError>>()?;
        Self::new(id(root)?, &edges)
    }

    pub fn root(&self) -> JointId {
        self.root
    }

    pub fn parent(&self, joint: JointId) -> Option<JointId> {
        self.parents[joint.index()]
    }

    pub fn contains(&self, joint: JointId) -> bool {
        joint == self.root || self.parents[joint.index()].is_some()
    }

    /// Parents before children; the root comes first.
    pub fn topological_order(&self) -> &[JointId] {
        &self.order
    }

    pub fn edges(&self) -> impl Iterator<Item = (JointId, JointId)> + '_ {
        JointId::all().filter_map(|c| self.parents[c.index()].map(|p| (c, p)))
    }
}

impl Default for KinematicTree {
    fn default() -> Self {
        default_tree()
    }
}

/// The canonical tree rooted at the hip center: arms hang from the shoulder
/// center through the shoulders, legs from the hip center through the hips,
/// and the head chain from the shoulder center through the neck.
pub fn default_tree() -> KinematicTree {
    use JointId as J;
    let edges = [
        (J::SHOULDER_CENTER, J::HIP_CENTER),
        (J::R_SHOULDER, J::SHOULDER_CENTER),
        (J::L_SHOULDER, J::SHOULDER_CENTER),
        (J::R_ELBOW, J::R_SHOULDER),
        (J::L_ELBOW, J::L_SHOULDER),
        (J::R_WRIST, J::R_ELBOW),
        (J::L_WRIST, J::L_ELBOW),
        (J::R_HIP, J::HIP_CENTER),
        (J::L_HIP, J::HIP_CENTER),
        (J::R_KNEE, J::R_HIP),
        (J::L_KNEE, J::L_HIP),
        (J::R_ANKLE, J::R_KNEE),
        (J::L_ANKLE, J::L_KNEE),
        (J::NECK, J::SHOULDER_CENTER),
        (J::NOSE, J::NECK),
        (J::R_EYE, J::NOSE),
        (J::L_EYE, J::NOSE),
        (J::R_EAR, J::R_EYE),
        (J::L_EAR, J::L_EYE),
    ];
    KinematicTree::new(J::HIP_CENTER, &edges).expect("canonical tree is well formed")
}

/// Bone length and unit direction of a joint relative to its father.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarJoint {
    pub rho: f64,
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub defined: bool,
    /// Confidence assigned to the joint when it is reconstructed.
    pub confidence: f64,
}

impl PolarJoint {
    pub const UNDEFINED: PolarJoint =
        PolarJoint { rho: 0.0, cos_theta: 0.0, sin_theta: 0.0, defined: false, confidence: 0.0 };

    pub fn new(rho: f64, cos_theta: f64, sin_theta: f64) -> Self {
        Self { rho, cos_theta, sin_theta, defined: true, confidence: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarPose {
    pub entries: [PolarJoint; TOTAL_JOINTS],
    pub root_position: (f64, f64),
    pub root_confidence: f64,
    pub canvas: Canvas,
}

impl PolarPose {
    pub fn entry(&self, joint: JointId) -> &PolarJoint {
        &self.entries[joint.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolarError {
    #[error("tree root {0} is missing from the skeleton")]
    RootMissing(JointId),
}

/// Polar coordinates of `child` relative to `father`, undefined when either
/// is missing or the bone has zero length.
pub fn bone_polar(child: &Keypoint, father: &Keypoint) -> PolarJoint {
    if !child.is_present() || !father.is_present() {
        return PolarJoint::UNDEFINED;
    }
    let dx = child.x - father.x;
    let dy = child.y - father.y;
    let rho = dx.hypot(dy);
    if rho == 0.0 || !rho.is_finite() {
        return PolarJoint::UNDEFINED;
    }
    PolarJoint { rho, cos_theta: dx / rho, sin_theta: dy / rho, defined: true, confidence: child.confidence }
}

/// Per-joint polar entries without requiring the root to be present.
pub(crate) fn polar_entries(ext: &ExtendedSkeleton, tree: &KinematicTree) -> [PolarJoint; TOTAL_JOINTS] {
    let mut entries = [PolarJoint::UNDEFINED; TOTAL_JOINTS];
    for (child, father) in tree.edges() {
        entries[child.index()] = bone_polar(ext.joint(child), ext.joint(father));
    }
    entries
}

pub fn to_polar(ext: &ExtendedSkeleton, tree: &KinematicTree) -> Result<PolarPose, PolarError> {
    let root = ext.joint(tree.root());
    if !root.is_present() {
        return Err(PolarError::RootMissing(tree.root()));
    }
    Ok(PolarPose {
        entries: polar_entries(ext, tree),
        root_position: root.position(),
        root_confidence: root.confidence,
        canvas: ext.canvas,
    })
}

/// Rebuilds Euclidean joints root-first. Undefined entries, and everything
/// below them, come back missing.
pub fn from_polar(pose: &PolarPose, tree: &KinematicTree, root_position: (f64, f64)) -> ExtendedSkeleton {
    let mut joints = [Keypoint::MISSING; TOTAL_JOINTS];
    let root_conf = if pose.root_confidence > 0.0 { pose.root_confidence } else { 1.0 };
    joints[tree.root().index()] = Keypoint::new(root_position.0, root_position.1, root_conf);
    for &joint in &tree.topological_order()[1..] {
        let father = tree.parent(joint).expect("non-root joints in the order have parents");
        let base = joints[father.index()];
        let entry = pose.entry(joint);
        if !base.is_present() || !entry.defined {
            continue;
        }
        joints[joint.index()] = Keypoint::new(
            base.x + entry.rho * entry.cos_theta,
            base.y + entry.rho * entry.sin_theta,
            if entry.confidence > 0.0 { entry.confidence } else { 1.0 },
        );
    }
    ExtendedSkeleton { joints, canvas: pose.canvas }
}
