//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 input or usage error,
//! 3 computation error. Machine-readable results go to stdout as one JSON
//! line; human-readable messages go to stderr.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::dataset::manifest::{self, BuildInputs, DatasetError, DatasetManifest, MANIFEST_FILE};
use crate::dataset::openpose::{encode_document, OpenPoseDocument};
use crate::dataset::templates::{SubjectTemplate, TemplateError, TemplateStore};
use crate::dataset::UniqueIdentifier;
use crate::pipeline::{self, AlignSummary, PipelineError};
use crate::render::{RenderError, RenderSpec, RenderSpecPatch};
use crate::retarget::{AlignError, AlignmentConfig, AlignmentResult, VerticalAnchor};
use crate::serve::{self, AppState};
use crate::skeleton::{Canvas, Skeleton};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

pub const TEMPLATES_ENV: &str = "RETARGET_TEMPLATES";
pub const DEFAULT_TEMPLATES_DIR: &str = "templates";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    fn compute(message: impl Into<String>) -> Self {
        Self { code: EXIT_COMPUTE, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Align(AlignError::NoCommonBones | AlignError::ReferenceRootMissing(_)) => {
                CliError::compute(e.to_string())
            }
            PipelineError::Render(RenderError::Encode(_)) => CliError::compute(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => CliError::compute(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

/// `WIDTHxHEIGHT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Size(pub u32, pub u32);

impl FromStr for Size {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("bad dimension {v:?}: {e}"));
        Ok(Size(parse(w)?, parse(h)?))
    }
}

impl<'de> Deserialize<'de> for Size {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Size {
    fn canvas(self) -> Result<Canvas, CliError> {
        if self.0 == 0 || self.1 == 0 {
            return Err(CliError::input(format!("canvas must be positive, got {}x{}", self.0, self.1)));
        }
        Ok(Canvas::new(self.0, self.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    Min,
    Max,
}

impl From<Anchor> for VerticalAnchor {
    fn from(a: Anchor) -> Self {
        match a {
            Anchor::Min => VerticalAnchor::MinY,
            Anchor::Max => VerticalAnchor::MaxY,
        }
    }
}

/// Defaults loaded from `--config`; any flag given on the command line wins.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scale: Option<f64>,
    pub anchor: Option<Anchor>,
    pub canvas: Option<Size>,
    pub size: Option<Size>,
    pub thickness: Option<u32>,
    pub joint_radius: Option<u32>,
    pub templates: Option<PathBuf>,
    pub identifier: Option<String>,
    pub subject_phrase: Option<String>,
    pub created: Option<String>,
    pub port: Option<u16>,
    pub host: Option<String>,
    #[serde(rename = "static")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(
    name = "skelalign",
    version,
    about = "Retarget 2D poses onto subject proportions and build pose-conditioning datasets"
)]
pub struct Cli {
    /// JSON file supplying default flag values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align a reference pose to a subject's proportions and write OpenPose JSON
    Align(AlignArgs),
    /// Render every person in an OpenPose JSON file to a PNG
    Render(RenderArgs),
    /// Align, then render the aligned pose
    Retarget(RetargetArgs),
    /// Build or validate an <image, caption, pose image> manifest
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Serve the HTTP API and the annotation studio
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct AlignmentFlags {
    /// Multiplier applied to subject bone lengths
    #[arg(long)]
    pub scale: Option<f64>,
    /// Vertical extreme matched to the reference: min (top) or max (bottom)
    #[arg(long, value_enum)]
    pub anchor: Option<Anchor>,
    /// Canvas for keypoint files that do not declare one [default: 512x512]
    #[arg(long, value_name = "WxH")]
    pub canvas: Option<Size>,
    /// Template directory [default: $RETARGET_TEMPLATES or ./templates]
    #[arg(long, value_name = "DIR")]
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Reference OpenPose JSON (exactly one person)
    #[arg(long)]
    pub reference: PathBuf,
    /// Subject: a template or OpenPose JSON file, or a template name
    #[arg(long)]
    pub subject: String,
    /// Output OpenPose JSON
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub alignment: AlignmentFlags,
}

#[derive(Debug, Args)]
pub struct DrawFlags {
    /// Output image size [default: the keypoint canvas]
    #[arg(long, value_name = "WxH")]
    pub size: Option<Size>,
    /// Limb thickness in pixels [default: 4 per 512 px]
    #[arg(long, value_name = "PX")]
    pub thickness: Option<u32>,
    /// Joint disc radius in pixels [default: 4 per 512 px]
    #[arg(long, value_name = "PX")]
    pub joint_radius: Option<u32>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub keypoints: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Canvas for keypoint files that do not declare one [default: 512x512]
    #[arg(long, value_name = "WxH")]
    pub canvas: Option<Size>,
    #[command(flatten)]
    pub draw: DrawFlags,
}

#[derive(Debug, Args)]
pub struct RetargetArgs {
    #[arg(long)]
    pub reference: PathBuf,
    /// Subject template name (or a template / OpenPose JSON file)
    #[arg(long)]
    pub subject: String,
    #[arg(long)]
    pub out_image: PathBuf,
    #[arg(long)]
    pub out_keypoints: PathBuf,
    #[command(flatten)]
    pub alignment: AlignmentFlags,
    #[command(flatten)]
    pub draw: DrawFlags,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Render pose images and write <out>/manifest.jsonl
    Build(BuildArgs),
    /// Check a manifest; exits 1 if any check fails
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long, value_name = "DIR")]
    pub images: PathBuf,
    /// JSON object mapping image file names to captions
    #[arg(long)]
    pub captions: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub keypoints: PathBuf,
    /// Output directory; pose images go to <out>/pose
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Subject identifier as "rare|common tokens", e.g. "sks|mr. potato head"
    #[arg(long)]
    pub identifier: Option<String>,
    /// Phrase in each caption to replace with the identifier
    #[arg(long)]
    pub subject_phrase: Option<String>,
    /// Pose image size [default: 512x512]
    #[arg(long, value_name = "WxH")]
    pub size: Option<Size>,
    #[arg(long, value_name = "PX")]
    pub thickness: Option<u32>,
    #[arg(long, value_name = "PX")]
    pub joint_radius: Option<u32>,
    /// Canvas for keypoint files that do not declare one [default: 512x512]
    #[arg(long, value_name = "WxH")]
    pub canvas: Option<Size>,
    /// Manifest timestamp (RFC 3339) [default: $SOURCE_DATE_EPOCH or now]
    #[arg(long)]
    pub created: Option<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Dataset directory containing manifest.jsonl
    #[arg(long, value_name = "DIR", required_unless_present = "manifest")]
    pub out: Option<PathBuf>,
    /// Explicit manifest path
    #[arg(long, conflicts_with = "out")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub templates: Option<PathBuf>,
    /// Directory with the studio's static bundle
    #[arg(long = "static", value_name = "DIR")]
    pub static_dir: Option<PathBuf>,
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            serde_json::from_slice(&read(p)?).map_err(|e| CliError::input(format!("config {}: {e}", p.display())))
        }
    }
}

fn templates_dir(flag: Option<PathBuf>, cfg: &ConfigFile) -> PathBuf {
    flag.or_else(|| cfg.templates.clone())
        .or_else(|| std::env::var_os(TEMPLATES_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_TEMPLATES_DIR))
}

fn default_canvas(flag: Option<Size>, cfg: &ConfigFile) -> Result<Canvas, CliError> {
    flag.or(cfg.canvas).map_or(Ok(Canvas::default()), Size::canvas)
}

fn alignment_config(flags: &AlignmentFlags, cfg: &ConfigFile) -> Result<AlignmentConfig, CliError> {
    let mut out = AlignmentConfig::default();
    if let Some(s) = flags.scale.or(cfg.scale) {
        out.subject_scale = s;
    }
    if let Some(a) = flags.anchor.or(cfg.anchor) {
        out.vertical_anchor = a.into();
    }
    out.validate().map_err(|e| CliError::input(e.to_string()))?;
    Ok(out)
}

fn draw_patch(flags: &DrawFlags, cfg: &ConfigFile) -> RenderSpecPatch {
    let size = flags.size.or(cfg.size);
    RenderSpecPatch {
        width: size.map(|s| s.0),
        height: size.map(|s| s.1),
        limb_thickness: flags.thickness.or(cfg.thickness),
        joint_radius: flags.joint_radius.or(cfg.joint_radius),
        ..Default::default()
    }
}

fn parse_document(path: &Path) -> Result<OpenPoseDocument, CliError> {
    serde_json::from_slice(&read(path)?)
        .map_err(|e| CliError::input(format!("{}: malformed JSON: {e}", path.display())))
}

/// A subject given as a template file, an OpenPose file, or a template name.
fn resolve_subject(spec: &str, templates: &Path, canvas: Canvas) -> Result<Skeleton, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        let bytes = read(path)?;
        if let Ok(t) = SubjectTemplate::from_json(&bytes) {
            return Ok(t.skeleton);
        }
        let doc: OpenPoseDocument = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::input(format!("{spec}: neither a template nor OpenPose JSON: {e}")))?;
        return pipeline::single_person(&doc, canvas).map_err(|e| CliError::input(format!("{spec}: {e}")));
    }
    let store = TemplateStore::open(templates).map_err(|e| CliError::input(e.to_string()))?;
    match store.get(spec) {
        Ok(t) => Ok(t.skeleton),
        Err(TemplateError::NotFound(_) | TemplateError::BadName(_)) => {
            let available = store.list().unwrap_or_default();
            Err(CliError::input(format!(
                "unknown subject {spec:?}; available templates in {}: [{}]",
                templates.display(),
                available.join(", ")
            )))
        }
        Err(e) => Err(CliError::input(e.to_string())),
    }
}

/// Writes every file to a temp sibling first, then renames them all, so a
/// failure before the rename step leaves no output behind.
fn write_outputs(files: &[(&Path, &[u8])]) -> Result<(), CliError> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&dir).map_err(|e| CliError::compute(format!("{}: {e}", dir.display())))?;
        let mut tmp = crate::dataset::templates::staging_file(&dir)
            .map_err(|e| CliError::compute(format!("{}: {e}", dir.display())))?;
        tmp.write_all(bytes).map_err(|e| CliError::compute(format!("{}: {e}", path.display())))?;
        staged.push((tmp, *path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| CliError::compute(format!("{}: {}", path.display(), e.error)))?;
    }
    Ok(())
}

fn summary_line(result: &AlignmentResult, extra: &[(&str, serde_json::Value)]) -> String {
    let mut v = serde_json::to_value(AlignSummary::from(result)).expect("summary serializes");
    if let serde_json::Value::Object(map) = &mut v {
        for (k, val) in extra {
            map.insert((*k).to_string(), val.clone());
        }
    }
    v.to_string()
}

fn align_from_flags(
    reference: &Path,
    subject: &str,
    flags: &AlignmentFlags,
    cfg: &ConfigFile,
) -> Result<AlignmentResult, CliError> {
    let canvas = default_canvas(flags.canvas, cfg)?;
    let align_cfg = alignment_config(flags, cfg)?;
    let doc = parse_document(reference)?;
    let templates = templates_dir(flags.templates.clone(), cfg);
    let subject = resolve_subject(subject, &templates, canvas)?;
    Ok(pipeline::align_document(&doc, &subject, &align_cfg, canvas)?)
}

fn cmd_align(args: AlignArgs, cfg: &ConfigFile) -> Result<i32, CliError> {
    let result = align_from_flags(&args.reference, &args.subject, &args.alignment, cfg)?;
    let doc = encode_document(&pipeline::aligned_document(&result));
    write_outputs(&[(&args.out, &doc)])?;
    println!("{}", summary_line(&result, &[("output", args.out.display().to_string().into())]));
    Ok(EXIT_OK)
}

fn cmd_render(args: RenderArgs, cfg: &ConfigFile) -> Result<i32, CliError> {
    let canvas = default_canvas(args.canvas, cfg)?;
    let doc = parse_document(&args.keypoints)?;
    let png = pipeline::render_document_png(&doc, &draw_patch(&args.draw, cfg), canvas)?;
    write_outputs(&[(&args.out, &png)])?;
    eprintln!("wrote {}", args.out.display());
    Ok(EXIT_OK)
}

fn cmd_retarget(args: RetargetArgs, cfg: &ConfigFile) -> Result<i32, CliError> {
    let result = align_from_flags(&args.reference, &args.subject, &args.alignment, cfg)?;
    let doc = pipeline::aligned_document(&result);
    let png = pipeline::render_document_png(&doc, &draw_patch(&args.draw, cfg), result.aligned.canvas)?;
    write_outputs(&[(&args.out_keypoints, &encode_document(&doc)), (&args.out_image, &png)])?;
    println!(
        "{}",
        summary_line(
            &result,
            &[
                ("out_image", args.out_image.display().to_string().into()),
                ("out_keypoints", args.out_keypoints.display().to_string().into()),
            ]
        )
    );
    Ok(EXIT_OK)
}

fn created_timestamp(flag: Option<String>, cfg: &ConfigFile) -> Result<String, CliError> {
    use chrono::{DateTime, SecondsFormat, Utc};
    if let Some(s) = flag.or_else(|| cfg.created.clone()) {
        let t = DateTime::parse_from_rfc3339(&s).map_err(|e| CliError::input(format!("--created {s:?}: {e}")))?;
        return Ok(t.with_timezone(&Utc).to_rfc3339_opts(SecondsFormat::Secs, true));
    }
    let now = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => {
            let secs: i64 = v.trim().parse().map_err(|_| CliError::input(format!("bad SOURCE_DATE_EPOCH {v:?}")))?;
            DateTime::from_timestamp(secs, 0).ok_or_else(|| CliError::input("SOURCE_DATE_EPOCH out of range"))?
        }
        Err(_) => Utc::now(),
    };
    Ok(now.to_rfc3339_opts(SecondsFormat::Secs, true))
}

fn cmd_dataset_build(args: BuildArgs, cfg: &ConfigFile) -> Result<i32, CliError> {
    let identifier: UniqueIdentifier = args
        .identifier
        .or_else(|| cfg.identifier.clone())
        .ok_or_else(|| CliError::input("--identifier is required"))?
        .parse()
        .map_err(|e: crate::dataset::IdentifierError| CliError::input(e.to_string()))?;
    let captions = manifest::parse_captions(&read(&args.captions)?)?;
    let size = args.size.or(cfg.size).unwrap_or(Size(512, 512));
    let mut spec = RenderSpec::new(size.0, size.1);
    if let Some(t) = args.thickness.or(cfg.thickness) {
        spec.limb_thickness = t;
    }
    if let Some(r) = args.joint_radius.or(cfg.joint_radius) {
        spec.joint_radius = r;
    }
    let inputs = BuildInputs {
        image_dir: args.images,
        captions,
        keypoints_dir: args.keypoints,
        pose_out_dir: args.out.join("pose"),
        identifier,
        spec,
        default_canvas: default_canvas(args.canvas, cfg)?,
        subject_phrase: args.subject_phrase.or_else(|| cfg.subject_phrase.clone()),
        created: created_timestamp(args.created, cfg)?,
    };
    let built = manifest::build_manifest(&inputs)?;
    let path = args.out.join(MANIFEST_FILE);
    built.write(&path)?;
    println!("{}", serde_json::json!({ "manifest": path.display().to_string(), "records": built.records.len() }));
    Ok(EXIT_OK)
}

fn cmd_dataset_validate(args: ValidateArgs) -> Result<i32, CliError> {
    let path = match (args.manifest, args.out) {
        (Some(m), _) => m,
        (None, Some(dir)) => dir.join(MANIFEST_FILE),
        (None, None) => return Err(CliError::input("--out or --manifest is required")),
    };
    let m = DatasetManifest::read(&path).map_err(|e| CliError::input(e.to_string()))?;
    let report = manifest::validate_manifest(&m);
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    for r in report.failed_records() {
        for c in r.checks.iter().filter(|c| !c.passed) {
            eprintln!("{}: {} failed: {}", r.image_path.display(), c.name, c.detail.as_deref().unwrap_or(""));
        }
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_VALIDATION })
}

fn cmd_serve(args: ServeArgs, cfg: &ConfigFile) -> Result<i32, CliError> {
    let host = args.host.or_else(|| cfg.host.clone()).unwrap_or_else(|| "127.0.0.1".into());
    let port = args.port.or(cfg.port).unwrap_or(7860);
    let static_dir = args.static_dir.or_else(|| cfg.static_dir.clone());
    let store = TemplateStore::open(templates_dir(args.templates, cfg)).map_err(|e| CliError::input(e.to_string()))?;
    let listener = std::net::TcpListener::bind((host.as_str(), port))
        .map_err(|e| CliError::input(format!("cannot bind {host}:{port}: {e}")))?;
    listener.set_nonblocking(true).map_err(|e| CliError::compute(e.to_string()))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::compute(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener).map_err(|e| CliError::compute(e.to_string()))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(|e| CliError::compute(e.to_string()))?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            eprintln!("shutting down");
        };
        serve::serve(listener, AppState::new(store), static_dir, shutdown)
            .await
            .map_err(|e| CliError::compute(e.to_string()))
    })?;
    Ok(EXIT_OK)
}

pub fn execute(cli: Cli) -> Result<i32, CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Align(a) => cmd_align(a, &cfg),
        Command::Render(a) => cmd_render(a, &cfg),
        Command::Retarget(a) => cmd_retarget(a, &cfg),
        Command::Dataset(DatasetCommand::Build(a)) => cmd_dataset_build(a, &cfg),
        Command::Dataset(DatasetCommand::Validate(a)) => cmd_dataset_validate(a),
        Command::Serve(a) => cmd_serve(a, &cfg),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
