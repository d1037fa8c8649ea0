//! `<image, text, pose image>` triplet manifests.
//!
//! A manifest is line-delimited JSON: one header object, then one record per
//! line, sorted by image path.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::identifier::{apply_identifier, IdentifierError, UniqueIdentifier};
use super::openpose::{parse_openpose_json, ParseError};
use super::templates::write_atomic;
use crate::render::{png_dimensions, render_many, RenderError, RenderSpec};
use crate::skeleton::Canvas;

pub const MANIFEST_FORMAT: &str = "skelalign-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const IMAGE_EXTENSIONS: [&str; 8] = ["png", "jpg", "jpeg", "webp", "bmp", "gif", "tif", "tiff"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no caption for image {0}")]
    MissingCaption(PathBuf),
    #[error("no keypoints file for image {0}")]
    MissingKeypoints(PathBuf),
    #[error("keypoints {path}: {source}")]
    Keypoints { path: PathBuf, source: ParseError },
    #[error("rendering pose for {path}: {source}")]
    Render { path: PathBuf, source: RenderError },
    #[error("caption for {path}: {source}")]
    Caption { path: PathBuf, source: IdentifierError },
    #[error("images {0} and {1} share a file stem")]
    DuplicateStem(PathBuf, PathBuf),
    #[error("captions file: {0}")]
    Captions(String),
    #[error("manifest line {line}: {message}")]
    InvalidManifest { line: usize, message: String },
    #[error("I/O at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// A caption, optionally naming the subject phrase to replace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaptionEntry {
    Plain(String),
    Detailed {
        caption: String,
        #[serde(default)]
        subject: Option<String>,
    },
}

impl CaptionEntry {
    pub fn text(&self) -> &str {
        match self {
            CaptionEntry::Plain(c) | CaptionEntry::Detailed { caption: c, .. } => c,
        }
    }

    pub fn subject(&self) -> Option<&str> {
        match self {
            CaptionEntry::Plain(_) => None,
            CaptionEntry::Detailed { subject, .. } => subject.as_deref(),
        }
    }
}

/// Captions keyed by image file name (or file stem).
pub type Captions = BTreeMap<String, CaptionEntry>;

/// Parses a captions file: a JSON object mapping image file names to either
/// a caption string or `{"caption": ..., "subject": ...}`.
pub fn parse_captions(bytes: &[u8]) -> Result<Captions, DatasetError> {
    let captions: Captions = serde_json::from_slice(bytes).map_err(|e| DatasetError::Captions(e.to_string()))?;
    if let Some((k, _)) = captions.iter().find(|(_, v)| v.text().trim().is_empty()) {
        return Err(DatasetError::Captions(format!("empty caption for {k:?}")));
    }
    Ok(captions)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub image_path: PathBuf,
    pub caption: String,
    pub pose_image_path: PathBuf,
    pub keypoints_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub subject: UniqueIdentifier,
    pub identifier: String,
    pub render_spec: RenderSpec,
    pub default_canvas: Canvas,
    pub created: String,
    pub record_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub header: ManifestHeader,
    pub records: Vec<TripletRecord>,
}

impl DatasetManifest {
    pub fn subject(&self) -> &UniqueIdentifier {
        &self.header.subject
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.header).expect("header serializes");
        out.push(b'\n');
        for r in &self.records {
            out.extend(serde_json::to_vec(r).expect("record serializes"));
            out.push(b'\n');
        }
        out
    }

    pub fn from_jsonl(bytes: &[u8]) -> Result<Self, DatasetError> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| DatasetError::InvalidManifest { line: 0, message: e.to_string() })?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) =
            lines.next().ok_or(DatasetError::InvalidManifest { line: 1, message: "missing header".into() })?;
        let header: ManifestHeader = serde_json::from_str(first)
            .map_err(|e| DatasetError::InvalidManifest { line: 1, message: e.to_string() })?;
        if header.format != MANIFEST_FORMAT {
            return Err(DatasetError::InvalidManifest {
                line: 1,
                message: format!("unknown format {:?}", header.format),
            });
        }
        let records = lines
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| DatasetError::InvalidManifest { line: i + 1, message: e.to_string() })
            })
            .collect::<Result<Vec<TripletRecord>, _>>()?;
        Ok(Self { header, records })
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        write_atomic(path, &self.to_jsonl()).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        Self::from_jsonl(&fs::read(path).map_err(io_err(path))?)
    }
}

#[derive(Debug, Clone)]
pub struct BuildInputs {
    pub image_dir: PathBuf,
    pub captions: Captions,
    pub keypoints_dir: PathBuf,
    pub pose_out_dir: PathBuf,
    pub identifier: UniqueIdentifier,
    pub spec: RenderSpec,
    /// Canvas for keypoint files that do not declare one.
    pub default_canvas: Canvas,
    /// Phrase replaced in captions that do not name their own subject.
    /// Captions with no phrase at all are used verbatim.
    pub subject_phrase: Option<String>,
    pub created: String,
}

fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Images directly inside `dir`, sorted by path.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut images = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if is_image(&path) {
            images.push(path);
        }
    }
    images.sort();
    Ok(images)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// `<stem>.json`, falling back to OpenPose's own `<stem>_keypoints.json`.
pub fn keypoints_for(keypoints_dir: &Path, image: &Path) -> Option<PathBuf> {
    let stem = file_stem(image);
    [format!("{stem}.json"), format!("{stem}_keypoints.json")]
        .into_iter()
        .map(|n| keypoints_dir.join(n))
        .find(|p| p.is_file())
}

fn caption_for<'a>(captions: &'a Captions, image: &Path) -> Option<&'a CaptionEntry> {
    let name = image.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    captions.get(&name).or_else(|| captions.get(&file_stem(image)))
}

/// Renders a pose image per source image and assembles the manifest. Fails
/// on the first problem, naming the offending file. Nothing is written for
/// an image whose caption or keypoints are missing.
pub fn build_manifest(inputs: &BuildInputs) -> Result<DatasetManifest, DatasetError> {
    inputs.spec.validate().map_err(|source| DatasetError::Render { path: inputs.pose_out_dir.clone(), source })?;
    let images = list_images(&inputs.image_dir)?;

    // Check everything up front so a failing build leaves no pose images.
    let mut stems: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut plan = Vec::with_capacity(images.len());
    for image in &images {
        if let Some(prev) = stems.insert(file_stem(image), image.clone()) {
            return Err(DatasetError::DuplicateStem(prev, image.clone()));
        }
        let entry = caption_for(&inputs.captions, image).ok_or_else(|| DatasetError::MissingCaption(image.clone()))?;
        let keypoints =
            keypoints_for(&inputs.keypoints_dir, image).ok_or_else(|| DatasetError::MissingKeypoints(image.clone()))?;
        let caption = match entry.subject().or(inputs.subject_phrase.as_deref()) {
            Some(phrase) => apply_identifier(entry.text(), phrase, &inputs.identifier)
                .map_err(|source| DatasetError::Caption { path: image.clone(), source })?,
            None => entry.text().to_string(),
        };
        let bytes = fs::read(&keypoints).map_err(io_err(&keypoints))?;
        let skeletons = parse_openpose_json(&bytes, inputs.default_canvas)
            .map_err(|source| DatasetError::Keypoints { path: keypoints.clone(), source })?;
        plan.push((image, caption, keypoints, skeletons));
    }

    fs::create_dir_all(&inputs.pose_out_dir).map_err(io_err(&inputs.pose_out_dir))?;
    let mut records = Vec::with_capacity(plan.len());
    for (image, caption, keypoints, skeletons) in plan {
        let pose_image_path = inputs.pose_out_dir.join(format!("{}.png", file_stem(image)));
        let render_err = |source| DatasetError::Render { path: image.clone(), source };
        let png = render_many(skeletons.iter(), &inputs.spec).and_then(|img| img.to_png()).map_err(render_err)?;
        write_atomic(&pose_image_path, &png).map_err(io_err(&pose_image_path))?;
        records.push(TripletRecord { image_path: image.clone(), caption, pose_image_path, keypoints_path: keypoints });
    }

    Ok(DatasetManifest {
        header: ManifestHeader {
            format: MANIFEST_FORMAT.to_string(),
            identifier: inputs.identifier.full(),
            subject: inputs.identifier.clone(),
            render_spec: inputs.spec.clone(),
            default_canvas: inputs.default_canvas,
            created: inputs.created.clone(),
            record_count: records.len(),
        },
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn pass(name: &'static str) -> Self {
        Self { name, passed: true, detail: None }
    }

    fn fail(name: &'static str, detail: impl Into<String>) -> Self {
        Self { name, passed: false, detail: Some(detail.into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordReport {
    pub image_path: PathBuf,
    pub checks: Vec<Check>,
}

impl RecordReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub manifest_checks: Vec<Check>,
    pub records: Vec<RecordReport>,
}

impl ValidationReport {
    pub fn failed_records(&self) -> impl Iterator<Item = &RecordReport> {
        self.records.iter().filter(|r| !r.passed())
    }
}

fn check_record(r: &TripletRecord, header: &ManifestHeader) -> RecordReport {
    let mut checks = Vec::new();
    let exists = |name, p: &Path| {
        if p.is_file() {
            Check::pass(name)
        } else {
            Check::fail(name, format!("{} does not exist", p.display()))
        }
    };
    checks.push(exists("image_exists", &r.image_path));
    checks.push(match fs::read(&r.keypoints_path) {
        Err(e) => Check::fail("keypoints_parse", format!("{}: {e}", r.keypoints_path.display())),
        Ok(bytes) => match parse_openpose_json(&bytes, header.default_canvas) {
            Ok(_) => Check::pass("keypoints_parse"),
            Err(e) => Check::fail("keypoints_parse", e.to_string()),
        },
    });
    let spec = &header.render_spec;
    checks.push(match fs::read(&r.pose_image_path) {
        Err(e) => Check::fail("pose_image_exists", format!("{}: {e}", r.pose_image_path.display())),
        Ok(bytes) => match png_dimensions(&bytes) {
            Some((w, h)) if (w, h) == (spec.width, spec.height) => Check::pass("pose_image_dimensions"),
            Some((w, h)) => {
                Check::fail("pose_image_dimensions", format!("{w}x{h}, expected {}x{}", spec.width, spec.height))
            }
            None => Check::fail("pose_image_dimensions", "not a readable PNG"),
        },
    });
    checks.push(if r.caption.trim().is_empty() {
        Check::fail("caption_has_rare_token", "caption is empty")
    } else if header.subject.tagged_in(&r.caption) {
        Check::pass("caption_has_rare_token")
    } else {
        Check::fail("caption_has_rare_token", format!("{:?} lacks {:?}", r.caption, header.subject.rare_token()))
    });
    RecordReport { image_path: r.image_path.clone(), checks }
}

/// Checks every record against the filesystem. Problems become report
/// entries rather than errors.
pub fn validate_manifest(manifest: &DatasetManifest) -> ValidationReport {
    let mut manifest_checks = Vec::new();
    let mut seen = HashSet::new();
    let dups: Vec<_> = manifest.records.iter().filter(|r| !seen.insert(&r.image_path)).collect();
    manifest_checks.push(if dups.is_empty() {
        Check::pass("distinct_image_paths")
    } else {
        Check::fail("distinct_image_paths", format!("{} duplicate image path(s)", dups.len()))
    });
    manifest_checks.push(if manifest.header.record_count == manifest.records.len() {
        Check::pass("record_count")
    } else {
        Check::fail(
            "record_count",
            format!("header says {}, found {}", manifest.header.record_count, manifest.records.len()),
        )
    });
    let records: Vec<_> = manifest.records.iter().map(|r| check_record(r, &manifest.header)).collect();
    let passed = manifest_checks.iter().all(|c| c.passed) && records.iter().all(RecordReport::passed);
    ValidationReport { passed, manifest_checks, records }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::openpose::write_openpose_json;
    use crate::skeleton::{Keypoint, Skeleton};

    struct Fixture {
        _root: tempfile::TempDir,
        inputs: BuildInputs,
    }

    fn fixture(n: usize) -> Fixture {
        let root = tempfile::tempdir().unwrap();
        let images = root.path().join("images");
        let keypoints = root.path().join("keypoints");
        fs::create_dir_all(&images).unwrap();
        fs::create_dir_all(&keypoints).unwrap();
        let mut captions = Captions::new();
        for i in 0..n {
            let name = format!("img{i:03}.png");
            fs::write(images.join(&name), b"not really a png").unwrap();
            let mut s = Skeleton::empty(Canvas::new(256, 256));
            s.joints[1] = Keypoint::present(128.0, 60.0 + i as f64);
            s.joints[2] = Keypoint::present(100.0, 70.0);
            fs::write(keypoints.join(format!("img{i:03}.json")), write_openpose_json(&[s])).unwrap();
            captions.insert(name, CaptionEntry::Plain(format!("a toy is standing, take {i}")));
        }
        let inputs = BuildInputs {
            image_dir: images,
            captions,
            keypoints_dir: keypoints,
            pose_out_dir: root.path().join("out/pose"),
            identifier: UniqueIdentifier::new("sks", "mr. potato head").unwrap(),
            spec: RenderSpec::new(128, 128),
            default_canvas: Canvas::new(256, 256),
            subject_phrase: Some("a toy".into()),
            created: "2024-01-01T00:00:00Z".into(),
        };
        Fixture { _root: root, inputs }
    }

    #[test]
    fn builds_and_validates() {
        let f = fixture(3);
        let m = build_manifest(&f.inputs).unwrap();
        assert_eq!(m.records.len(), 3);
        assert_eq!(m.records[0].caption, "sks mr. potato head is standing, take 0");
        let report = validate_manifest(&m);
        assert!(report.passed, "{report:#?}");
        assert_eq!(DatasetManifest::from_jsonl(&m.to_jsonl()).unwrap(), m);
    }

    #[test]
    fn empty_dir_gives_empty_manifest() {
        let f = fixture(0);
        let m = build_manifest(&f.inputs).unwrap();
        assert!(m.records.is_empty());
        assert!(validate_manifest(&m).passed);
    }

    #[test]
    fn missing_keypoints_names_image() {
        let f = fixture(2);
        fs::remove_file(f.inputs.keypoints_dir.join("img001.json")).unwrap();
        match build_manifest(&f.inputs) {
            Err(DatasetError::MissingKeypoints(p)) => assert!(p.ends_with("img001.png")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(!f.inputs.pose_out_dir.exists());
    }

    #[test]
    fn missing_caption() {
        let mut f = fixture(2);
        f.inputs.captions.remove("img000.png");
        assert!(matches!(build_manifest(&f.inputs), Err(DatasetError::MissingCaption(_))));
    }

    #[test]
    fn openpose_style_keypoint_names() {
        let f = fixture(1);
        let kp = &f.inputs.keypoints_dir;
        fs::rename(kp.join("img000.json"), kp.join("img000_keypoints.json")).unwrap();
        let m = build_manifest(&f.inputs).unwrap();
        assert!(m.records[0].keypoints_path.ends_with("img000_keypoints.json"));
    }

    #[test]
    fn validate_flags_deleted_pose_and_untagged_caption() {
        let f = fixture(3);
        let mut m = build_manifest(&f.inputs).unwrap();
        fs::remove_file(&m.records[1].pose_image_path).unwrap();
        m.records[2].caption = "a toy is standing".into();
        let report = validate_manifest(&m);
        assert!(!report.passed);
        let failed: Vec<_> = report.failed_records().map(|r| r.image_path.clone()).collect();
        assert_eq!(failed, vec![m.records[1].image_path.clone(), m.records[2].image_path.clone()]);
    }

    #[test]
    fn duplicate_paths_flagged() {
        let f = fixture(2);
        let mut m = build_manifest(&f.inputs).unwrap();
        m.records.push(m.records[0].clone());
        m.header.record_count += 1;
        let report = validate_manifest(&m);
        assert!(!report.passed);
        assert!(!report.manifest_checks[0].passed);
    }

    #[test]
    fn per_entry_subject_overrides() {
        let mut f = fixture(1);
        f.inputs.captions.insert(
            "img000.png".into(),
            CaptionEntry::Detailed { caption: "the doll waves".into(), subject: Some("the doll".into()) },
        );
        let m = build_manifest(&f.inputs).unwrap();
        assert_eq!(m.records[0].caption, "sks mr. potato head waves");
    }

    #[test]
    fn captions_file_parsing() {
        let c = parse_captions(br#"{"a.png": "x", "b.png": {"caption": "y", "subject": "z"}}"#).unwrap();
        assert_eq!(c["b.png"].subject(), Some("z"));
        assert!(parse_captions(b"[1,2]").is_err());
        assert!(parse_captions(br#"{"a.png": ""}"#).is_err());
    }
}
