//! Document-level entry points shared by the CLI, the HTTP API and the C
//! ABI, so every front end produces identical bytes for identical inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::openpose::{encode_document, OpenPoseDocument, ParseError};
use crate::render::{render_many, RenderError, RenderSpec, RenderSpecPatch};
use crate::retarget::{retarget_pose, AlignError, AlignmentConfig, AlignmentResult, JointStatus};
use crate::skeleton::{Canvas, Skeleton};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("expected exactly one person in the reference, found {0}")]
    PersonCount(usize),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

/// Machine-readable summary of an alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignSummary {
    pub b: f64,
    pub status: Vec<JointStatus>,
    pub aligned_joints: usize,
}

impl From<&AlignmentResult> for AlignSummary {
    fn from(r: &AlignmentResult) -> Self {
        Self { b: r.b, status: r.per_joint_status.to_vec(), aligned_joints: r.aligned_count() }
    }
}

/// Single-person reference from a document.
pub fn single_person(doc: &OpenPoseDocument, default_canvas: Canvas) -> Result<Skeleton, PipelineError> {
    let mut people = doc.to_skeletons(default_canvas)?;
    if people.len() != 1 {
        return Err(PipelineError::PersonCount(people.len()));
    }
    Ok(people.remove(0))
}

pub fn align_document(
    reference: &OpenPoseDocument,
    subject: &Skeleton,
    cfg: &AlignmentConfig,
    default_canvas: Canvas,
) -> Result<AlignmentResult, PipelineError> {
    let reference = single_person(reference, default_canvas)?;
    Ok(retarget_pose(&reference, subject, cfg)?)
}

/// The aligned skeleton (virtual joints dropped) as an OpenPose document.
pub fn aligned_document(result: &AlignmentResult) -> OpenPoseDocument {
    OpenPoseDocument::from_skeletons(&[result.aligned.to_skeleton()])
}

/// Renders every person in `doc` onto one PNG. Size defaults to the
/// document canvas.
pub fn render_document_png(
    doc: &OpenPoseDocument,
    spec: &RenderSpecPatch,
    default_canvas: Canvas,
) -> Result<Vec<u8>, PipelineError> {
    let canvas = doc.canvas_or(default_canvas)?;
    let people = doc.to_skeletons(canvas)?;
    let spec: RenderSpec = spec.resolve(canvas);
    Ok(render_many(people.iter(), &spec)?.to_png()?)
}

pub fn render_skeleton_png(skeleton: &Skeleton, spec: &RenderSpecPatch) -> Result<Vec<u8>, PipelineError> {
    render_document_png(&OpenPoseDocument::from_skeletons(std::slice::from_ref(skeleton)), spec, skeleton.canvas)
}

pub fn document_bytes(doc: &OpenPoseDocument) -> Vec<u8> {
    encode_document(doc)
}
