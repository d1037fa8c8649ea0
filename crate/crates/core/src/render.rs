//! Hard-edged stick-figure rasterizer in the OpenPose colour convention.
//!
//! Skeleton coordinates are mapped from the skeleton's canvas onto the
//! output raster. Limbs are capsules, joints are discs; coverage is decided
//! by testing pixel centres, so output bytes depend only on IEEE double
//! arithmetic and are identical across platforms.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::skeleton::{Canvas, ExtendedSkeleton, JointId, Keypoint, Skeleton, REAL_JOINTS};

pub type Rgb = [u8; 3];

pub const LIMB_COUNT: usize = 17;
pub const MIN_SIDE: u32 = 64;

/// OpenPose body palette, one colour per joint; limb `i` uses colour `i`.
pub const OPENPOSE_COLORS: [Rgb; REAL_JOINTS] = [
    [255, 0, 0],
    [255, 85, 0],
    [255, 170, 0],
    [255, 255, 0],
    [170, 255, 0],
    [85, 255, 0],
    [0, 255, 0],
    [0, 255, 85],
    [0, 255, 170],
    [0, 255, 255],
    [0, 170, 255],
    [0, 85, 255],
    [0, 0, 255],
    [85, 0, 255],
    [170, 0, 255],
    [255, 0, 255],
    [255, 0, 170],
    [255, 0, 85],
];

const LIMBS: [(u8, u8); LIMB_COUNT] = [
    (1, 2),
    (1, 5),
    (2, 3),
    (3, 4),
    (5, 6),
    (6, 7),
    (1, 8),
    (8, 9),
    (9, 10),
    (1, 11),
    (11, 12),
    (12, 13),
    (1, 0),
    (0, 14),
    (14, 16),
    (0, 15),
    (15, 17),
];

/// The 17 COCO body limbs in drawing order.
pub fn limb_list() -> Vec<(JointId, JointId)> {
    LIMBS.iter().map(|&(a, b)| (JointId::new(a as usize).unwrap(), JointId::new(b as usize).unwrap())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("image must be at least {MIN_SIDE}x{MIN_SIDE}, got {width}x{height}")]
    TooSmall { width: u32, height: u32 },
    #[error("limb thickness must be at least 1 px")]
    ZeroThickness,
    #[error("joint radius must be at least 1 px")]
    ZeroRadius,
    #[error("palette needs {expected} {kind} colours, got {got}")]
    PaletteLength { kind: &'static str, expected: usize, got: usize },
    #[error("png encoding failed: {0}")]
    Encode(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub width: u32,
    pub height: u32,
    pub limb_thickness: u32,
    pub joint_radius: u32,
    pub joint_colors: Vec<Rgb>,
    pub limb_colors: Vec<Rgb>,
    pub background: Rgb,
}

/// Stroke size for an image: 4 px at 512 px on the longer side, scaled
/// linearly and never below 1.
pub fn default_stroke(width: u32, height: u32) -> u32 {
    let side = width.max(height) as u64;
    ((4 * side + 256) / 512).max(1) as u32
}

impl RenderSpec {
    pub fn new(width: u32, height: u32) -> Self {
        let stroke = default_stroke(width, height);
        Self {
            width,
            height,
            limb_thickness: stroke,
            joint_radius: stroke,
            joint_colors: OPENPOSE_COLORS.to_vec(),
            limb_colors: OPENPOSE_COLORS[..LIMB_COUNT].to_vec(),
            background: [0, 0, 0],
        }
    }

    pub fn for_canvas(canvas: Canvas) -> Self {
        Self::new(canvas.width, canvas.height)
    }

    pub fn with_thickness(mut self, px: u32) -> Self {
        self.limb_thickness = px;
        self
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width < MIN_SIDE || self.height < MIN_SIDE {
            return Err(RenderError::TooSmall { width: self.width, height: self.height });
        }
        if self.limb_thickness == 0 {
            return Err(RenderError::ZeroThickness);
        }
        if self.joint_radius == 0 {
            return Err(RenderError::ZeroRadius);
        }
        if self.joint_colors.len() != REAL_JOINTS {
            return Err(RenderError::PaletteLength {
                kind: "joint",
                expected: REAL_JOINTS,
                got: self.joint_colors.len(),
            });
        }
        if self.limb_colors.len() != LIMB_COUNT {
            return Err(RenderError::PaletteLength { kind: "limb", expected: LIMB_COUNT, got: self.limb_colors.len() });
        }
        Ok(())
    }
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self::new(512, 512)
    }
}

/// Partial render spec as accepted on the wire and in config files. Absent
/// fields fall back to the defaults for the resolved size.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSpecPatch {
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub limb_thickness: Option<u32>,
    pub joint_radius: Option<u32>,
    pub joint_colors: Option<Vec<Rgb>>,
    pub limb_colors: Option<Vec<Rgb>>,
    pub background: Option<Rgb>,
}

impl RenderSpecPatch {
    pub fn resolve(&self, fallback: Canvas) -> RenderSpec {
        let mut spec = RenderSpec::new(self.width.unwrap_or(fallback.width), self.height.unwrap_or(fallback.height));
        if let Some(t) = self.limb_thickness {
            spec.limb_thickness = t;
        }
        if let Some(r) = self.joint_radius {
            spec.joint_radius = r;
        }
        if let Some(c) = &self.joint_colors {
            spec.joint_colors = c.clone();
        }
        if let Some(c) = &self.limb_colors {
            spec.limb_colors = c.clone();
        }
        if let Some(bg) = self.background {
            spec.background = bg;
        }
        spec
    }
}

/// Row-major RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoseImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl PoseImage {
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&color);
        }
        Self { width, height, pixels }
    }

    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn put(&mut self, x: usize, y: usize, color: Rgb) {
        let i = (y * self.width as usize + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&color);
    }

    /// Encodes as 8-bit RGB PNG with fixed encoder settings.
    pub fn to_png(&self) -> Result<Vec<u8>, RenderError> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_compression(png::Compression::Default);
            enc.set_filter(png::FilterType::Sub);
            enc.set_adaptive_filter(png::AdaptiveFilterType::NonAdaptive);
            let mut writer = enc.write_header().map_err(|e| RenderError::Encode(e.to_string()))?;
            writer.write_image_data(&self.pixels).map_err(|e| RenderError::Encode(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn write_png(&self, mut sink: impl Write) -> Result<(), RenderError> {
        let bytes = self.to_png()?;
        sink.write_all(&bytes).map_err(|e| RenderError::Encode(e.to_string()))
    }
}

/// Reads the dimensions from a PNG header.
pub fn png_dimensions(bytes: &[u8]) -> Option<(u32, u32)> {
    let decoder = png::Decoder::new(bytes);
    let reader = decoder.read_info().ok()?;
    let info = reader.info();
    Some((info.width, info.height))
}

/// Decodes an 8-bit RGB PNG produced by [`PoseImage::to_png`].
pub fn decode_png(bytes: &[u8]) -> Option<PoseImage> {
    let mut reader = png::Decoder::new(bytes).read_info().ok()?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).ok()?;
    if frame.color_type != png::ColorType::Rgb || frame.bit_depth != png::BitDepth::Eight {
        return None;
    }
    buf.truncate(frame.buffer_size());
    Some(PoseImage { width: frame.width, height: frame.height, pixels: buf })
}

/// Anything that can be drawn: the first 18 joints plus the source canvas.
pub trait Drawable {
    fn real_joints(&self) -> &[Keypoint];
    fn canvas(&self) -> Canvas;
}

impl Drawable for Skeleton {
    fn real_joints(&self) -> &[Keypoint] {
        &self.joints
    }
    fn canvas(&self) -> Canvas {
        self.canvas
    }
}

impl Drawable for ExtendedSkeleton {
    fn real_joints(&self) -> &[Keypoint] {
        &self.joints[..REAL_JOINTS]
    }
    fn canvas(&self) -> Canvas {
        self.canvas
    }
}

struct Mapper {
    sx: f64,
    sy: f64,
}

impl Mapper {
    fn new(canvas: Canvas, spec: &RenderSpec) -> Self {
        let w = canvas.width.max(1) as f64;
        let h = canvas.height.max(1) as f64;
        Self { sx: spec.width as f64 / w, sy: spec.height as f64 / h }
    }

    fn map(&self, k: &Keypoint) -> (f64, f64) {
        (k.x * self.sx, k.y * self.sy)
    }
}

/// Squared distance from `p` to the segment `a`–`b`.
fn segment_dist2(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let (px, py) = (p.0 - a.0, p.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { ((px * dx + py * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (ex, ey) = (px - t * dx, py - t * dy);
    ex * ex + ey * ey
}

fn pixel_span(lo: f64, hi: f64, limit: u32) -> Option<(usize, usize)> {
    // Pixel i has its centre at i + 0.5.
    let first = (lo - 0.5).ceil().max(0.0);
    let last = (hi - 0.5).floor().min(limit as f64 - 1.0);
    (first <= last).then_some((first as usize, last as usize))
}

fn fill_capsule(img: &mut PoseImage, a: (f64, f64), b: (f64, f64), radius: f64, color: Rgb) {
    let r2 = radius * radius;
    let Some((x0, x1)) = pixel_span(a.0.min(b.0) - radius, a.0.max(b.0) + radius, img.width) else {
        return;
    };
    let Some((y0, y1)) = pixel_span(a.1.min(b.1) - radius, a.1.max(b.1) + radius, img.height) else {
        return;
    };
    for y in y0..=y1 {
        let cy = y as f64 + 0.5;
        for x in x0..=x1 {
            if segment_dist2((x as f64 + 0.5, cy), a, b) <= r2 {
                img.put(x, y, color);
            }
        }
    }
}

/// Draws one skeleton onto an existing raster.
pub fn draw_skeleton<S: Drawable + ?Sized>(img: &mut PoseImage, skeleton: &S, spec: &RenderSpec) {
    let joints = skeleton.real_joints();
    let mapper = Mapper::new(skeleton.canvas(), spec);
    let half = spec.limb_thickness as f64 / 2.0;
    for (i, &(a, b)) in LIMBS.iter().enumerate() {
        let (ka, kb) = (&joints[a as usize], &joints[b as usize]);
        if ka.is_present() && kb.is_present() {
            fill_capsule(img, mapper.map(ka), mapper.map(kb), half, spec.limb_colors[i]);
        }
    }
    let radius = spec.joint_radius as f64;
    for (i, k) in joints.iter().enumerate().filter(|(_, k)| k.is_present()) {
        let p = mapper.map(k);
        fill_capsule(img, p, p, radius, spec.joint_colors[i]);
    }
}

pub fn render_pose<S: Drawable + ?Sized>(skeleton: &S, spec: &RenderSpec) -> Result<PoseImage, RenderError> {
    render_many(std::iter::once(skeleton), spec)
}

/// Renders several people onto one image, in order.
pub fn render_many<'a, S, I>(skeletons: I, spec: &RenderSpec) -> Result<PoseImage, RenderError>
where
    S: Drawable + ?Sized + 'a,
    I: IntoIterator<Item = &'a S>,
{
    spec.validate()?;
    let mut img = PoseImage::filled(spec.width, spec.height, spec.background);
    for s in skeletons {
        draw_skeleton(&mut img, s, spec);
    }
    Ok(img)
}
