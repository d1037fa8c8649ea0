#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skelalign::skeleton::{Canvas, Keypoint, Skeleton, REAL_JOINTS};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn templates_dir() -> PathBuf {
    fixture("templates")
}

pub fn load_fixture(name: &str) -> Skeleton {
    let bytes = std::fs::read(fixture(name)).unwrap();
    skelalign::dataset::parse_openpose_json(&bytes, Canvas::default()).unwrap().remove(0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every joint present, coordinates uniform over the canvas.
pub fn random_full(rng: &mut impl Rng, canvas: Canvas) -> Skeleton {
    let mut s = Skeleton::empty(canvas);
    for k in s.joints.iter_mut() {
        *k = Keypoint::new(
            rng.gen_range(0.0..canvas.width as f64),
            rng.gen_range(0.0..canvas.height as f64),
            rng.gen_range(0.05..=1.0),
        );
    }
    s
}

/// Like [`random_full`] but each joint is dropped with probability `p_missing`.
pub fn random_partial(rng: &mut impl Rng, canvas: Canvas, p_missing: f64) -> Skeleton {
    let mut s = random_full(rng, canvas);
    for i in 0..REAL_JOINTS {
        if rng.gen_bool(p_missing) {
            s.joints[i] = Keypoint::MISSING;
        }
    }
    s
}
