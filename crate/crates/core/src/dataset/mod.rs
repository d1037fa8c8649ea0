//! Keypoint files, subject templates, caption identifiers and triplet
//! manifests.

pub mod identifier;
pub mod manifest;
pub mod openpose;
pub mod templates;

pub use identifier::{apply_identifier, IdentifierError, UniqueIdentifier};
pub use manifest::{
    build_manifest, parse_captions, validate_manifest, BuildInputs, CaptionEntry, Captions, DatasetError,
    DatasetManifest, TripletRecord, ValidationReport,
};
pub use openpose::{parse_openpose_json, write_openpose_json, OpenPoseDocument, ParseError, PersonEntry};
pub use templates::{write_atomic, SkeletonJson, SubjectTemplate, TemplateError, TemplateStore};
