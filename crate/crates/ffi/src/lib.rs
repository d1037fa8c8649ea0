//! C ABI over `skelalign`.
//!
//! Objects cross the boundary as opaque heap handles created by `*_new` /
//! `*_from_*` functions and released by the matching `*_free`. Every
//! fallible call returns a [`SkelalignStatus`]; on failure a message is
//! available from [`skelalign_last_error`] on the same thread. Byte results
//! (JSON, PNG, strings) come back in a [`SkelalignBuffer`] that the caller
//! releases with [`skelalign_buffer_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use skelalign::dataset::openpose::{encode_document, OpenPoseDocument};
use skelalign::dataset::{apply_identifier, UniqueIdentifier};
use skelalign::pipeline::render_skeleton_png;
use skelalign::render::RenderSpecPatch;
use skelalign::retarget::{retarget_pose, AlignError, AlignmentConfig, AlignmentResult, RootPlacement};
use skelalign::skeleton::{Canvas, Keypoint, Skeleton, REAL_JOINTS, TOTAL_JOINTS};
use skelalign::{JointStatus, VerticalAnchor};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkelalignStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    ReferenceRootMissing = 5,
    NoCommonBones = 6,
    Render = 7,
    IndexOutOfRange = 8,
    Panic = 9,
}

/// Per-joint outcome of an alignment.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkelalignJointStatus {
    Aligned = 0,
    MissingInRef = 1,
    MissingInSubject = 2,
    Degenerate = 3,
}

impl From<JointStatus> for SkelalignJointStatus {
    fn from(s: JointStatus) -> Self {
        match s {
            JointStatus::Aligned => Self::Aligned,
            JointStatus::MissingInRef => Self::MissingInRef,
            JointStatus::MissingInSubject => Self::MissingInSubject,
            JointStatus::Degenerate => Self::Degenerate,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkelalignAnchor {
    MinY = 0,
    MaxY = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkelalignKeypoint {
    pub x: f64,
    pub y: f64,
    /// 0 means the joint is missing.
    pub confidence: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkelalignAlignConfig {
    pub subject_scale: f64,
    pub anchor: SkelalignAnchor,
    /// When true the aligned root is placed at (root_x, root_y) before the
    /// vertical correction; otherwise at the reference root.
    pub explicit_root: bool,
    pub root_x: f64,
    pub root_y: f64,
}

/// Bytes owned by the library. `len` excludes the trailing NUL that string
/// results carry.
#[repr(C)]
#[derive(Debug)]
pub struct SkelalignBuffer {
    pub data: *mut u8,
    pub len: usize,
    pub capacity: usize,
}

/// Opaque 18-joint skeleton.
pub struct SkelalignSkeleton(Skeleton);

/// Opaque alignment result.
pub struct SkelalignAlignment(AlignmentResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: SkelalignStatus, msg: impl Into<String>) -> SkelalignStatus {
    set_error(msg);
    status
}

fn guarded(f: impl FnOnce() -> SkelalignStatus) -> SkelalignStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == SkelalignStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(SkelalignStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SkelalignStatus> {
    if p.is_null() {
        return Err(fail(SkelalignStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(SkelalignStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn into_buffer(mut bytes: Vec<u8>, out: *mut SkelalignBuffer) {
    bytes.shrink_to_fit();
    let mut bytes = std::mem::ManuallyDrop::new(bytes);
    let buf = SkelalignBuffer { data: bytes.as_mut_ptr(), len: bytes.len(), capacity: bytes.capacity() };
    unsafe { out.write(buf) };
}

fn string_buffer(s: String, out: *mut SkelalignBuffer) {
    let mut bytes = s.into_bytes();
    let len = bytes.len();
    bytes.push(0);
    into_buffer(bytes, out);
    unsafe { (*out).len = len };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn skelalign_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn skelalign_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn skelalign_buffer_free(buf: *mut SkelalignBuffer) {
    if buf.is_null() || (*buf).data.is_null() {
        return;
    }
    let b = &mut *buf;
    drop(Vec::from_raw_parts(b.data, b.capacity, b.capacity));
    b.data = ptr::null_mut();
    b.len = 0;
    b.capacity = 0;
}

/// Empty skeleton (all joints missing) on a `width` x `height` canvas.
#[no_mangle]
pub unsafe extern "C" fn skelalign_skeleton_new(
    width: u32,
    height: u32,
    out: *mut *mut SkelalignSkeleton,
) -> SkelalignStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SkelalignStatus::NullPointer, "out is null");
        }
        if width == 0 || height == 0 {
            return fail(SkelalignStatus::InvalidArgument, "canvas dimensions must be positive");
        }
        *out = Box::into_raw(Box::new(SkelalignSkeleton(Skeleton::empty(Canvas::new(width, height)))));
        SkelalignStatus::Ok
    })
}

/// Parses person `person` from an OpenPose JSON document of `len` bytes.
/// `default_width` / `default_height` apply when the document has no canvas.
#[no_mangle]
pub unsafe extern "C" fn skelalign_skeleton_from_openpose_json(
    json: *const u8,
    len: usize,
    default_width: u32,
    default_height: u32,
    person: usize,
    out: *mut *mut SkelalignSkeleton,
) -> SkelalignStatus {
    guarded(|| {
        if json.is_null() || out.is_null() {
            return fail(SkelalignStatus::NullPointer, "json or out is null");
        }
        let bytes = std::slice::from_raw_parts(json, len);
        let people = match skelalign::dataset::parse_openpose_json(bytes, Canvas::new(default_width, default_height)) {
            Ok(p) => p,
            Err(e) => return fail(SkelalignStatus::Parse, e.to_string()),
        };
        match people.into_iter().nth(person) {
            Some(s) => {
                *out = Box::into_raw(Box::new(SkelalignSkeleton(s)));
                SkelalignStatus::Ok
            }
            None => fail(SkelalignStatus::IndexOutOfRange, format!("document has no person {person}")),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn skelalign_skeleton_free(skeleton: *mut SkelalignSkeleton) {
    if !skeleton.is_null() {
        drop(Box::from_raw(skeleton));
    }
}

#[no_mangle]
pub unsafe extern "C" fn skelalign_skeleton_set_joint(
    skeleton: *mut SkelalignSkeleton,
    index: usize,
    point: SkelalignKeypoint,
) -> SkelalignStatus {
    guarded(|| {
        let Some(s) = skeleton.as_mut() else {
            return fail(SkelalignStatus::NullPointer, "skeleton is null");
        };
        if index >= REAL_JOINTS {
            return fail(SkelalignStatus::IndexOutOfRange, format!("joint index {index} >= {REAL_JOINTS}"));
        }
        if !(0.0..=1.0).contains(&point.confidence) || !point.x.is_finite() || !point.y.is_finite() {
            return fail(SkelalignStatus::InvalidArgument, "coordinates must be finite and confidence in [0, 1]");
        }
        s.0.joints[index] = Keypoint::new(point.x, point.y, point.confidence);
        SkelalignStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn skelalign_skeleton_get_joint(
    skeleton: *const SkelalignSkeleton,
    index: usize,
    out: *mut SkelalignKeypoint,
) -> SkelalignStatus {
    guarded(|| {
        let (Some(s), false) = (skeleton.as_ref(), out.is_null()) else {
            return fail(SkelalignStatus::NullPointer, "skeleton or out is null");
        };
        let Some(k) = s.0.joints.get(index) else {
            return fail(SkelalignStatus::IndexOutOfRange, format!("joint index {index} >= {REAL_JOINTS}"));
        };
        out.write(SkelalignKeypoint { x: k.x, y: k.y, confidence: k.confidence });
        SkelalignStatus::Ok
    })
}

/// Serializes the skeleton as a one-person OpenPose document.
#[no_mangle]
pub unsafe extern "C" fn skelalign_skeleton_to_openpose_json(
    skeleton: *const SkelalignSkeleton,
    out: *mut SkelalignBuffer,
) -> SkelalignStatus {
    guarded(|| {
        let (Some(s), false) = (skeleton.as_ref(), out.is_null()) else {
            return fail(SkelalignStatus::NullPointer, "skeleton or out is null");
        };
        let bytes = encode_document(&OpenPoseDocument::from_skeletons(std::slice::from_ref(&s.0)));
        string_buffer(String::from_utf8(bytes).expect("JSON is UTF-8"), out);
        SkelalignStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn skelalign_align_config_default() -> SkelalignAlignConfig {
    SkelalignAlignConfig {
        subject_scale: 1.0,
        anchor: SkelalignAnchor::MinY,
        explicit_root: false,
        root_x: 0.0,
        root_y: 0.0,
    }
}

fn to_config(c: &SkelalignAlignConfig) -> AlignmentConfig {
    AlignmentConfig {
        subject_scale: c.subject_scale,
        vertical_anchor: match c.anchor {
            SkelalignAnchor::MinY => VerticalAnchor::MinY,
            SkelalignAnchor::MaxY => VerticalAnchor::MaxY,
        },
        root_placement: if c.explicit_root {
            RootPlacement::Explicit { x: c.root_x, y: c.root_y }
        } else {
            RootPlacement::ReferenceRoot
        },
    }
}

/// Aligns `reference` to the proportions of `subject` using the default
/// tree. `config` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn skelalign_retarget(
    reference: *const SkelalignSkeleton,
    subject: *const SkelalignSkeleton,
    config: *const SkelalignAlignConfig,
    out: *mut *mut SkelalignAlignment,
) -> SkelalignStatus {
    guarded(|| {
        let (Some(r), Some(s), false) = (reference.as_ref(), subject.as_ref(), out.is_null()) else {
            return fail(SkelalignStatus::NullPointer, "reference, subject or out is null");
        };
        let cfg = config.as_ref().map(to_config).unwrap_or_default();
        match retarget_pose(&r.0, &s.0, &cfg) {
            Ok(res) => {
                *out = Box::into_raw(Box::new(SkelalignAlignment(res)));
                SkelalignStatus::Ok
            }
            Err(e @ AlignError::ReferenceRootMissing(_)) => fail(SkelalignStatus::ReferenceRootMissing, e.to_string()),
            Err(e @ AlignError::NoCommonBones) => fail(SkelalignStatus::NoCommonBones, e.to_string()),
            Err(e) => fail(SkelalignStatus::InvalidArgument, e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn skelalign_alignment_free(alignment: *mut SkelalignAlignment) {
    if !alignment.is_null() {
        drop(Box::from_raw(alignment));
    }
}

/// Vertical offset applied by the correction step; NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn skelalign_alignment_offset(alignment: *const SkelalignAlignment) -> f64 {
    alignment.as_ref().map_or(f64::NAN, |a| a.0.b)
}

/// Joint `index` in 0..20 (18 and 19 are the shoulder and hip centers).
/// Either output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn skelalign_alignment_joint(
    alignment: *const SkelalignAlignment,
    index: usize,
    point: *mut SkelalignKeypoint,
    status: *mut SkelalignJointStatus,
) -> SkelalignStatus {
    guarded(|| {
        let Some(a) = alignment.as_ref() else {
            return fail(SkelalignStatus::NullPointer, "alignment is null");
        };
        if index >= TOTAL_JOINTS {
            return fail(SkelalignStatus::IndexOutOfRange, format!("joint index {index} >= {TOTAL_JOINTS}"));
        }
        let k = a.0.aligned.joints[index];
        if !point.is_null() {
            point.write(SkelalignKeypoint { x: k.x, y: k.y, confidence: k.confidence });
        }
        if !status.is_null() {
            status.write(a.0.per_joint_status[index].into());
        }
        SkelalignStatus::Ok
    })
}

/// Copies the aligned pose (virtual joints dropped) into a new skeleton.
#[no_mangle]
pub unsafe extern "C" fn skelalign_alignment_skeleton(
    alignment: *const SkelalignAlignment,
    out: *mut *mut SkelalignSkeleton,
) -> SkelalignStatus {
    guarded(|| {
        let (Some(a), false) = (alignment.as_ref(), out.is_null()) else {
            return fail(SkelalignStatus::NullPointer, "alignment or out is null");
        };
        *out = Box::into_raw(Box::new(SkelalignSkeleton(a.0.aligned.to_skeleton())));
        SkelalignStatus::Ok
    })
}

/// Renders the skeleton to PNG. Zero for any size argument selects the
/// default (skeleton canvas, 4 px per 512 px strokes).
#[no_mangle]
pub unsafe extern "C" fn skelalign_render_png(
    skeleton: *const SkelalignSkeleton,
    width: u32,
    height: u32,
    limb_thickness: u32,
    joint_radius: u32,
    out: *mut SkelalignBuffer,
) -> SkelalignStatus {
    guarded(|| {
        let (Some(s), false) = (skeleton.as_ref(), out.is_null()) else {
            return fail(SkelalignStatus::NullPointer, "skeleton or out is null");
        };
        let nonzero = |v: u32| (v != 0).then_some(v);
        let patch = RenderSpecPatch {
            width: nonzero(width),
            height: nonzero(height),
            limb_thickness: nonzero(limb_thickness),
            joint_radius: nonzero(joint_radius),
            ..Default::default()
        };
        match render_skeleton_png(&s.0, &patch) {
            Ok(png) => {
                into_buffer(png, out);
                SkelalignStatus::Ok
            }
            Err(e) => fail(SkelalignStatus::Render, e.to_string()),
        }
    })
}

/// Replaces the first occurrence of `subject_phrase` in `caption` with
/// "`rare_token` `common_tokens`". The result is NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn skelalign_apply_identifier(
    caption: *const c_char,
    subject_phrase: *const c_char,
    rare_token: *const c_char,
    common_tokens: *const c_char,
    out: *mut SkelalignBuffer,
) -> SkelalignStatus {
    guarded(|| {
        if out.is_null() {
            return fail(SkelalignStatus::NullPointer, "out is null");
        }
        let args = (|| {
            Ok::<_, SkelalignStatus>((
                str_arg(caption, "caption")?,
                str_arg(subject_phrase, "subject_phrase")?,
                str_arg(rare_token, "rare_token")?,
                str_arg(common_tokens, "common_tokens")?,
            ))
        })();
        let (caption, phrase, rare, common) = match args {
            Ok(a) => a,
            Err(s) => return s,
        };
        let id = match UniqueIdentifier::new(rare, common) {
            Ok(id) => id,
            Err(e) => return fail(SkelalignStatus::InvalidArgument, e.to_string()),
        };
        match apply_identifier(caption, phrase, &id) {
            Ok(s) => {
                string_buffer(s, out);
                SkelalignStatus::Ok
            }
            Err(e) => fail(SkelalignStatus::InvalidArgument, e.to_string()),
        }
    })
}
