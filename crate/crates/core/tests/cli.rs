mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_skelalign"));
    c.env_remove("RETARGET_TEMPLATES").env_remove("SOURCE_DATE_EPOCH");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    common::fixture(name)
}

fn templates() -> PathBuf {
    common::templates_dir()
}

#[test]
fn help_lists_flags() {
    let o = run(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for sub in ["align", "render", "retarget", "dataset", "serve"] {
        assert!(text.contains(sub), "{sub}");
    }
    let o = run(&["retarget", "--help"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for flag in [
        "--reference",
        "--subject",
        "--out-image",
        "--out-keypoints",
        "--scale",
        "--anchor",
        "--canvas",
        "--size",
        "--thickness",
        "--templates",
    ] {
        assert!(text.contains(flag), "{flag}");
    }
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["align", "--unknown"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn identity_align() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("aligned.json");
    let t = fixture("tpose.json");
    let o = run(&["align", "--reference", p(&t), "--subject", p(&t), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["b"], 0.0);
    assert_eq!(summary["aligned_joints"], 20);
    let got = skelalign::dataset::parse_openpose_json(&fs::read(&out).unwrap(), Default::default()).unwrap();
    let want = common::load_fixture("tpose.json");
    for (g, w) in got[0].joints.iter().zip(&want.joints) {
        assert!((g.x - w.x).abs() < 1e-6 && (g.y - w.y).abs() < 1e-6);
    }
}

#[test]
fn align_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let short = dir.path().join("short.json");
    let mut doc: Value = serde_json::from_slice(&fs::read(fixture("tpose.json")).unwrap()).unwrap();
    doc["people"][0]["pose_keypoints_2d"].as_array_mut().unwrap().pop();
    fs::write(&short, doc.to_string()).unwrap();
    let t = fixture("tpose.json");
    let o = run(&["align", "--reference", p(&short), "--subject", p(&t), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("53"), "{}", stderr(&o));
    assert!(!out.exists());

    // a subject with only a nose shares no bones with anything
    let lonely = dir.path().join("lonely.json");
    let mut flat = vec![0.0; 54];
    flat[0] = 5.0;
    flat[2] = 1.0;
    fs::write(&lonely, serde_json::json!({"people": [{"pose_keypoints_2d": flat}]}).to_string()).unwrap();
    let o = run(&["align", "--reference", p(&t), "--subject", p(&lonely), "--out", p(&out)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(!out.exists());

    let o = run(&["align", "--reference", p(&t), "--subject", p(&t), "--out", p(&out), "--scale", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_template_lists_available() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "retarget",
        "--reference",
        p(&fixture("tpose.json")),
        "--subject",
        "teapot",
        "--templates",
        p(&templates()),
        "--out-image",
        p(&dir.path().join("a.png")),
        "--out-keypoints",
        p(&dir.path().join("a.json")),
    ]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("teapot") && err.contains("potato, sloth"), "{err}");
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn templates_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.json");
    let o = bin()
        .args(["align", "--reference", p(&fixture("tpose.json")), "--subject", "sloth", "--out", p(&out)])
        .env("RETARGET_TEMPLATES", templates())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, serde_json::json!({"templates": templates(), "scale": 2.0, "anchor": "max"}).to_string()).unwrap();
    let out = dir.path().join("a.json");
    let t = fixture("tpose.json");
    let with_cfg = run(&["--config", p(&cfg), "align", "--reference", p(&t), "--subject", "potato", "--out", p(&out)]);
    assert_eq!(code(&with_cfg), 0, "{}", stderr(&with_cfg));
    let explicit = run(&[
        "align",
        "--reference",
        p(&t),
        "--subject",
        "potato",
        "--out",
        p(&out),
        "--templates",
        p(&templates()),
        "--scale",
        "2",
        "--anchor",
        "max",
    ]);
    assert_eq!(with_cfg.stdout, explicit.stdout);
    // flag beats config
    let flag = run(&[
        "--config",
        p(&cfg),
        "align",
        "--reference",
        p(&t),
        "--subject",
        "potato",
        "--out",
        p(&out),
        "--scale",
        "1",
    ]);
    assert_ne!(flag.stdout, with_cfg.stdout);

    fs::write(&cfg, r#"{"scael": 2}"#).unwrap();
    let o = run(&["--config", p(&cfg), "align", "--reference", p(&t), "--subject", "potato", "--out", p(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn render_matches_golden_and_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.png");
    for name in ["tpose", "seated", "one_arm_missing"] {
        let o = run(&["render", "--keypoints", p(&fixture(&format!("{name}.json"))), "--out", p(&out)]);
        assert_eq!(code(&o), 0);
        assert_eq!(fs::read(&out).unwrap(), fs::read(common::golden(&format!("{name}.png"))).unwrap(), "{name}");
    }

    let o = run(&["render", "--keypoints", p(&fixture("tpose.json")), "--out", p(&out), "--size", "256x128"]);
    assert_eq!(code(&o), 0);
    assert_eq!(skelalign::render::png_dimensions(&fs::read(&out).unwrap()), Some((256, 128)));

    let bad = dir.path().join("bad.png");
    let o = run(&["render", "--keypoints", p(&fixture("tpose.json")), "--out", p(&bad), "--size", "0x0"]);
    assert_eq!(code(&o), 2);
    assert!(!bad.exists());
    let o = run(&["render", "--keypoints", p(&fixture("tpose.json")), "--out", p(&bad), "--thickness", "0"]);
    assert_eq!(code(&o), 2);
    let o = run(&["render", "--keypoints", p(&dir.path().join("nope.json")), "--out", p(&bad)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn empty_people_renders_background() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("empty.json");
    fs::write(&doc, r#"{"version":"1.3","people":[]}"#).unwrap();
    let out = dir.path().join("e.png");
    let o = run(&["render", "--keypoints", p(&doc), "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    let img = skelalign::render::decode_png(&fs::read(&out).unwrap()).unwrap();
    assert_eq!((img.width, img.height), (512, 512));
    assert!(img.pixels.iter().all(|&b| b == 0));
}

#[test]
fn retarget_rerender_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (img, kp, again) = (dir.path().join("r.png"), dir.path().join("r.json"), dir.path().join("again.png"));
    let o = run(&[
        "retarget",
        "--reference",
        p(&fixture("seated.json")),
        "--subject",
        "sloth",
        "--templates",
        p(&templates()),
        "--out-image",
        p(&img),
        "--out-keypoints",
        p(&kp),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["b"].is_number());
    assert_eq!(skelalign::render::png_dimensions(&fs::read(&img).unwrap()), Some((512, 512)));
    let o = run(&["render", "--keypoints", p(&kp), "--out", p(&again)]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(&img).unwrap(), fs::read(&again).unwrap());
}

fn write_corpus(root: &Path, n: usize) -> (PathBuf, PathBuf, PathBuf) {
    let (images, kps, captions) = (root.join("images"), root.join("kps"), root.join("captions.json"));
    fs::create_dir_all(&images).unwrap();
    fs::create_dir_all(&kps).unwrap();
    let mut rng = common::rng(3);
    let mut caps = serde_json::Map::new();
    for i in 0..n {
        fs::write(images.join(format!("{i:02}.jpg")), b"jpeg").unwrap();
        let s = common::random_full(&mut rng, Default::default());
        fs::write(kps.join(format!("{i:02}_keypoints.json")), skelalign::dataset::write_openpose_json(&[s])).unwrap();
        caps.insert(format!("{i:02}.jpg"), format!("a plush sloth, photo {i}").into());
    }
    fs::write(&captions, Value::Object(caps).to_string()).unwrap();
    (images, kps, captions)
}

#[test]
fn dataset_build_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let (images, kps, captions) = write_corpus(dir.path(), 6);
    let out = dir.path().join("ds");
    let build = |created: Option<&str>| {
        let mut c = bin();
        c.args([
            "dataset",
            "build",
            "--images",
            p(&images),
            "--captions",
            p(&captions),
            "--keypoints",
            p(&kps),
            "--out",
            p(&out),
            "--identifier",
            "sks|grey sloth plushie",
            "--subject-phrase",
            "a plush sloth",
            "--size",
            "128x128",
        ]);
        if let Some(t) = created {
            c.args(["--created", t]);
        } else {
            c.env("SOURCE_DATE_EPOCH", "1700000000");
        }
        c.output().unwrap()
    };
    let o = build(Some("2024-01-02T03:04:05Z"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = fs::read(out.join("manifest.jsonl")).unwrap();
    let o = build(Some("2024-01-02T03:04:05Z"));
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(out.join("manifest.jsonl")).unwrap(), first);
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("sks grey sloth plushie, photo 3"));
    assert!(text.contains("2024-01-02T03:04:05Z"));

    let o = build(None);
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(out.join("manifest.jsonl")).unwrap().contains("2023-11-14T22:13:20Z"));

    let o = run(&["dataset", "validate", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], true);

    fs::remove_file(out.join("pose/04.png")).unwrap();
    let o = run(&["dataset", "validate", "--manifest", p(&out.join("manifest.jsonl"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("04.jpg"));
}

#[test]
fn dataset_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (images, kps, captions) = write_corpus(dir.path(), 2);
    let out = dir.path().join("ds");
    let args = |caps: &Path, ident: &str| {
        run(&[
            "dataset",
            "build",
            "--images",
            p(&images),
            "--captions",
            p(caps),
            "--keypoints",
            p(&kps),
            "--out",
            p(&out),
            "--identifier",
            ident,
            "--created",
            "2024-01-01T00:00:00Z",
        ])
    };
    let bad_caps = dir.path().join("bad.json");
    fs::write(&bad_caps, "[not, json").unwrap();
    assert_eq!(code(&args(&bad_caps, "sks|x")), 2);
    assert_eq!(code(&args(&captions, "no-pipe")), 2);
    fs::remove_file(kps.join("01_keypoints.json")).unwrap();
    let o = args(&captions, "sks|x");
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("01.jpg"));
    assert!(!out.exists());

    let o = run(&["dataset", "validate", "--out", p(&dir.path().join("missing"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn serve_port_busy_exits_2() {
    let blocker = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = blocker.local_addr().unwrap().port().to_string();
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["serve", "--port", &port, "--templates", p(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("cannot bind"));
}

#[test]
fn serve_answers_http() {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpStream;
    use std::time::{Duration, Instant};

    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut child = bin()
        .args(["serve", "--port", &port.to_string(), "--templates", p(dir.path())])
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    assert!(lines.next().unwrap().unwrap().contains("listening"));

    let get = |path: &str| {
        let deadline = Instant::now() + Duration::from_secs(5);
        loop {
            if let Ok(mut s) = TcpStream::connect(("127.0.0.1", port)) {
                write!(s, "GET {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
                let mut resp = String::new();
                s.read_to_string(&mut resp).unwrap();
                return resp;
            }
            assert!(Instant::now() < deadline, "server did not come up");
            std::thread::sleep(Duration::from_millis(50));
        }
    };
    let health = get("/healthz");
    assert!(health.starts_with("HTTP/1.1 200"), "{health}");
    assert!(health.contains(skelalign::VERSION));
    let list = get("/templates");
    assert!(list.ends_with("[]"), "{list}");

    let second = run(&["serve", "--port", &port.to_string(), "--templates", p(dir.path())]);
    assert_eq!(code(&second), 2);

    let interrupted = Command::new("kill").args(["-INT", &child.id().to_string()]).status();
    if interrupted.is_ok_and(|s| s.success()) {
        let status = child.wait().unwrap();
        assert_eq!(status.code(), Some(0));
        assert!(lines.any(|l| l.unwrap().contains("shutting down")));
    } else {
        child.kill().unwrap();
        child.wait().unwrap();
    }
}

#[test]
fn atomic_outputs_leave_no_temp_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "retarget",
        "--reference",
        p(&fixture("tpose.json")),
        "--subject",
        p(&templates().join("potato.json")),
        "--out-image",
        p(&dir.path().join("x.png")),
        "--out-keypoints",
        p(&dir.path().join("x.json")),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["x.json", "x.png"]);
}
