//! Retargets a reference human pose onto subjects with different body
//! proportions, renders OpenPose-style conditioning images, and builds
//! `<image, caption, pose image>` fine-tuning manifests.
//!
//! The core pipeline is [`skeleton::augment_virtual`] →
//! [`retarget::align`] → [`render::render_pose`].

pub mod cli;
pub mod dataset;
pub mod pipeline;
pub mod render;
pub mod retarget;
pub mod serve;
pub mod skeleton;

pub use render::{limb_list, render_pose, PoseImage, RenderError, RenderSpec};
pub use retarget::{align, retarget_pose, AlignError, AlignmentConfig, AlignmentResult, JointStatus, VerticalAnchor};
pub use skeleton::{
    augment_virtual, default_tree, from_polar, to_polar, Canvas, ExtendedSkeleton, JointId, Keypoint, KinematicTree,
    PolarJoint, PolarPose, Skeleton,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
