//! OpenPose body keypoint JSON.
//!
//! Each person carries `pose_keypoints_2d`, a flat list of 18 `[x, y, c]`
//! triples. The optional top-level `canvas_width` / `canvas_height` fields
//! are an extension: OpenPose itself does not record image size.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::skeleton::{Canvas, Keypoint, Skeleton, REAL_JOINTS};

pub const FLAT_LEN: usize = REAL_JOINTS * 3;
pub const DOCUMENT_VERSION: f64 = 1.3;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed JSON: {0}")]
    MalformedJson(#[from] serde_json::Error),
    #[error("person {person}: expected {FLAT_LEN} keypoint numbers, got {got}")]
    WrongKeypointCount { person: usize, got: usize },
    #[error("person {person}, joint {joint}: non-finite coordinate")]
    NonFiniteCoordinate { person: usize, joint: usize },
    #[error("person {person}, joint {joint}: confidence {value} outside [0, 1]")]
    InvalidConfidence { person: usize, joint: usize, value: f64 },
    #[error("canvas dimensions must be positive, got {0}")]
    InvalidCanvas(Canvas),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonEntry {
    pub pose_keypoints_2d: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenPoseDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canvas_width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canvas_height: Option<u32>,
    pub people: Vec<PersonEntry>,
}

/// Converts one flat 54-number list into a skeleton. `person` is only used
/// for error messages.
pub fn skeleton_from_flat(flat: &[f64], canvas: Canvas, person: usize) -> Result<Skeleton, ParseError> {
    if flat.len() != FLAT_LEN {
        return Err(ParseError::WrongKeypointCount { person, got: flat.len() });
    }
    let mut joints = [Keypoint::MISSING; REAL_JOINTS];
    for (joint, (slot, triple)) in joints.iter_mut().zip(flat.chunks_exact(3)).enumerate() {
        let (x, y, c) = (triple[0], triple[1], triple[2]);
        if !x.is_finite() || !y.is_finite() || !c.is_finite() {
            return Err(ParseError::NonFiniteCoordinate { person, joint });
        }
        if !(0.0..=1.0).contains(&c) {
            return Err(ParseError::InvalidConfidence { person, joint, value: c });
        }
        *slot = Keypoint::new(x, y, c);
    }
    Ok(Skeleton::new(joints, canvas))
}

impl OpenPoseDocument {
    /// The document's canvas, or `default` when it does not declare one.
    pub fn canvas_or(&self, default: Canvas) -> Result<Canvas, ParseError> {
        let canvas = match (self.canvas_width, self.canvas_height) {
            (Some(width), Some(height)) => Canvas { width, height },
            _ => default,
        };
        if canvas.width == 0 || canvas.height == 0 {
            return Err(ParseError::InvalidCanvas(canvas));
        }
        Ok(canvas)
    }

    pub fn to_skeletons(&self, default_canvas: Canvas) -> Result<Vec<Skeleton>, ParseError> {
        let canvas = self.canvas_or(default_canvas)?;
        self.people.iter().enumerate().map(|(i, p)| skeleton_from_flat(&p.pose_keypoints_2d, canvas, i)).collect()
    }

    /// Canvas is taken from the first skeleton; an empty list yields a
    /// document without canvas fields.
    pub fn from_skeletons(skeletons: &[Skeleton]) -> Self {
        let canvas = skeletons.first().map(|s| s.canvas);
        Self {
            version: Some(Value::from(DOCUMENT_VERSION)),
            canvas_width: canvas.map(|c| c.width),
            canvas_height: canvas.map(|c| c.height),
            people: skeletons.iter().map(|s| PersonEntry { pose_keypoints_2d: s.to_flat() }).collect(),
        }
    }

    /// Same as [`from_skeletons`](Self::from_skeletons) but always records
    /// `canvas`, even with no people.
    pub fn with_canvas(skeletons: &[Skeleton], canvas: Canvas) -> Self {
        let mut doc = Self::from_skeletons(skeletons);
        doc.canvas_width = Some(canvas.width);
        doc.canvas_height = Some(canvas.height);
        doc
    }
}

pub fn parse_openpose_json(bytes: &[u8], default_canvas: Canvas) -> Result<Vec<Skeleton>, ParseError> {
    let doc: OpenPoseDocument = serde_json::from_slice(bytes)?;
    doc.to_skeletons(default_canvas)
}

/// Serializes skeletons as a single-line document followed by a newline.
/// Coordinates use shortest round-trip formatting.
pub fn write_openpose_json(skeletons: &[Skeleton]) -> Vec<u8> {
    encode_document(&OpenPoseDocument::from_skeletons(skeletons))
}

pub fn encode_document(doc: &OpenPoseDocument) -> Vec<u8> {
    let mut out = serde_json::to_vec(doc).expect("document serialization is infallible");
    out.push(b'\n');
    out
}
