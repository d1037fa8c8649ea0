//! Subject templates and their on-disk store (one JSON file per template).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::openpose::{skeleton_from_flat, ParseError};
use crate::skeleton::{augment_virtual, Canvas, JointId, Skeleton, SkeletonIssue};

/// Wire form of a single skeleton: canvas plus the flat OpenPose layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonJson {
    pub canvas_width: u32,
    pub canvas_height: u32,
    pub pose_keypoints_2d: Vec<f64>,
}

impl SkeletonJson {
    pub fn to_skeleton(&self) -> Result<Skeleton, ParseError> {
        let canvas = Canvas::new(self.canvas_width, self.canvas_height);
        if canvas.width == 0 || canvas.height == 0 {
            return Err(ParseError::InvalidCanvas(canvas));
        }
        skeleton_from_flat(&self.pose_keypoints_2d, canvas, 0)
    }
}

impl From<&Skeleton> for SkeletonJson {
    fn from(s: &Skeleton) -> Self {
        Self { canvas_width: s.canvas.width, canvas_height: s.canvas.height, pose_keypoints_2d: s.to_flat() }
    }
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("invalid template name {0:?}: use 1-64 characters from [A-Za-z0-9_.-], not starting with '.'")]
    BadName(String),
    #[error("template name {body:?} does not match {path:?}")]
    NameMismatch { path: String, body: String },
    #[error("template skeleton: {0}")]
    Skeleton(#[from] ParseError),
    #[error("template skeleton: {0}")]
    Issue(SkeletonIssue),
    #[error("template needs both shoulders or both hips so a virtual joint exists")]
    NoVirtualJoint,
    #[error("template {0:?} not found")]
    NotFound(String),
    #[error("template JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("template store I/O at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectTemplate {
    pub name: String,
    pub skeleton: Skeleton,
    pub source_image: Option<String>,
    pub notes: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateJson {
    name: String,
    skeleton: SkeletonJson,
    #[serde(default)]
    source_image: Option<String>,
    #[serde(default)]
    notes: String,
}

pub fn validate_name(name: &str) -> Result<(), TemplateError> {
    let ok = !name.is_empty()
        && name.len() <= 64
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(TemplateError::BadName(name.to_string()))
    }
}

impl SubjectTemplate {
    pub fn new(name: impl Into<String>, skeleton: Skeleton) -> Result<Self, TemplateError> {
        let t = Self { name: name.into(), skeleton, source_image: None, notes: String::new() };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        validate_name(&self.name)?;
        if let Some(issue) = self.skeleton.validate().into_iter().next() {
            return Err(TemplateError::Issue(issue));
        }
        let ext = augment_virtual(&self.skeleton);
        if !ext.is_present(JointId::SHOULDER_CENTER) && !ext.is_present(JointId::HIP_CENTER) {
            return Err(TemplateError::NoVirtualJoint);
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, TemplateError> {
        let raw: TemplateJson = serde_json::from_slice(bytes)?;
        let t = Self {
            skeleton: raw.skeleton.to_skeleton()?,
            name: raw.name,
            source_image: raw.source_image,
            notes: raw.notes,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let raw = TemplateJson {
            name: self.name.clone(),
            skeleton: SkeletonJson::from(&self.skeleton),
            source_image: self.source_image.clone(),
            notes: self.notes.clone(),
        };
        let mut out = serde_json::to_vec_pretty(&raw).expect("template serialization is infallible");
        out.push(b'\n');
        out
    }
}

/// Directory of `<name>.json` files. Writes go through a temp file and an
/// atomic rename, so readers never see a partial template.
#[derive(Debug)]
pub struct TemplateStore {
    dir: PathBuf,
    lock: RwLock<()>,
}

impl TemplateStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, TemplateError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| TemplateError::Io { path: dir.clone(), source })?;
        Ok(Self { dir, lock: RwLock::new(()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, name: &str) -> Result<PathBuf, TemplateError> {
        validate_name(name)?;
        Ok(self.dir.join(format!("{name}.json")))
    }

    /// Template names, sorted.
    pub fn list(&self) -> Result<Vec<String>, TemplateError> {
        let _guard = self.lock.read().unwrap_or_else(|e| e.into_inner());
        let io_err = |source| TemplateError::Io { path: self.dir.clone(), source };
        let mut names = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(io_err)? {
            let path = entry.map_err(io_err)?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                if validate_name(stem).is_ok() {
                    names.push(stem.to_string());
                }
            }
        }
        names.sort();
        Ok(names)
    }

    pub fn get(&self, name: &str) -> Result<SubjectTemplate, TemplateError> {
        let path = self.path_for(name)?;
        let _guard = self.lock.read().unwrap_or_else(|e| e.into_inner());
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(TemplateError::NotFound(name.to_string())),
            Err(source) => return Err(TemplateError::Io { path, source }),
        };
        SubjectTemplate::from_json(&bytes)
    }

    /// Full replace.
    pub fn put(&self, template: &SubjectTemplate) -> Result<(), TemplateError> {
        template.validate()?;
        let path = self.path_for(&template.name)?;
        let _guard = self.lock.write().unwrap_or_else(|e| e.into_inner());
        write_atomic(&path, &template.to_json()).map_err(|source| TemplateError::Io { path, source })
    }

    pub fn delete(&self, name: &str) -> Result<(), TemplateError> {
        let path = self.path_for(name)?;
        let _guard = self.lock.write().unwrap_or_else(|e| e.into_inner());
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(TemplateError::NotFound(name.to_string())),
            Err(source) => Err(TemplateError::Io { path, source }),
        }
    }
}

/// Temp file in `dir` created with ordinary file permissions (0644 before
/// umask on Unix) rather than tempfile's private 0600.
pub(crate) fn staging_file(dir: &Path) -> io::Result<tempfile::NamedTempFile> {
    let mut builder = tempfile::Builder::new();
    builder.prefix(".skelalign-");
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(fs::Permissions::from_mode(0o644));
    }
    builder.tempfile_in(dir)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = staging_file(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
