//! Corpus directories: `NNNN_image.png` (RGB), `NNNN_mask.png` (grey 0/255)
//! and `manifest.json` holding the generating spec.

use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::config::CorpusConfig;
use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};
use crate::synth::{generate, Sample, SynthSpec};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub version: String,
    pub spec: SynthSpec,
    pub count: usize,
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn image_to_png(image: &Tensor<f64>) -> Result<RgbImage> {
    let (c, h, w) = match image.shape() {
        &[c, h, w] => (c, h, w),
        s => return Err(Error::Shape(format!("expected [3, H, W] image, got {s:?}"))),
    };
    if c != 3 {
        return Err(Error::Shape(format!("expected 3 channels, got {c}")));
    }
    let d = image.data();
    Ok(RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let i = y as usize * w + x as usize;
        Rgb([to_u8(d[i]), to_u8(d[h * w + i]), to_u8(d[2 * h * w + i])])
    }))
}

pub fn mask_to_png(mask: &Tensor<f64>) -> Result<GrayImage> {
    let s = mask.shape();
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    let d = mask.data();
    Ok(GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([if d[y as usize * w + x as usize] >= 0.5 { 255 } else { 0 }])
    }))
}

pub fn png_to_image(img: &RgbImage) -> Result<Tensor<f64>> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    Tensor::from_fn(&[3, h, w], |i| {
        let (c, p) = (i / (h * w), i % (h * w));
        img.get_pixel((p % w) as u32, (p / w) as u32)[c] as f64 / 255.0
    })
}

fn save_png<P, C>(img: &image::ImageBuffer<P, C>, path: &Path) -> Result<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    img.save(path)
        .map_err(|e| Error::Format(format!("writing {}: {e}", path.display())))
}

pub fn write_png_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    save_png(img, path)
}

/// Writes samples and a manifest into `dir` (created if missing).
pub fn write_corpus(dir: &Path, spec: &SynthSpec, samples: &[Sample]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, s) in samples.iter().enumerate() {
        save_png(&image_to_png(&s.image)?, &dir.join(format!("{i:04}_image.png")))?;
        save_png(&mask_to_png(&s.mask)?, &dir.join(format!("{i:04}_mask.png")))?;
    }
    let manifest = CorpusManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        spec: spec.clone(),
        count: samples.len(),
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Manifest(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn open_png(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).map_err(|e| Error::Format(format!("reading {}: {e}", path.display())))
}

pub fn read_manifest(dir: &Path) -> Result<CorpusManifest> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
}

/// Loads every sample listed by the manifest in `dir`.
pub fn read_corpus(dir: &Path) -> Result<Vec<Sample>> {
    let manifest = read_manifest(dir)?;
    (0..manifest.count)
        .map(|i| {
            let image = png_to_image(&open_png(&dir.join(format!("{i:04}_image.png")))?.to_rgb8())?;
            let m = open_png(&dir.join(format!("{i:04}_mask.png")))?.to_luma8();
            let (w, h) = (m.width() as usize, m.height() as usize);
            let mask = Tensor::from_fn(&[1, h, w], |p| (m.as_raw()[p] >= 128) as u8 as f64)?;
            Ok(Sample { image, mask })
        })
        .collect()
}

/// The four splits described by a corpus config, each from its own seed.
pub struct Splits {
    pub train: (SynthSpec, Vec<Sample>),
    pub val: (SynthSpec, Vec<Sample>),
    pub test_seen: (SynthSpec, Vec<Sample>),
    pub test_unseen: (SynthSpec, Vec<Sample>),
}

pub fn generate_splits(cfg: &CorpusConfig) -> Result<Splits> {
    let base = &cfg.spec;
    let split = |count: usize, offset: u64, unseen: bool| -> Result<(SynthSpec, Vec<Sample>)> {
        let mut spec = SynthSpec {
            count,
            seed: base.seed.wrapping_mul(1000).wrapping_add(offset),
            ..base.clone()
        };
        if unseen {
            spec.shift = cfg.unseen_shift;
        }
        let samples = generate(&spec)?;
        Ok((spec, samples))
    };
    Ok(Splits {
        train: split(cfg.train, 0, false)?,
        val: split(cfg.val, 1, false)?,
        test_seen: split(cfg.test, 2, false)?,
        test_unseen: split(cfg.test, 3, true)?,
    })
}

/// Stacks images (`[B, 3, H, W]`) and masks (`[B, 1, H, W]`) in precision `S`.
pub fn stack<S: Scalar>(samples: &[&Sample]) -> Result<(Tensor<S>, Tensor<S>)> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Argument("cannot stack an empty batch".into()))?;
    let (h, w) = first.size();
    let mut img = Vec::with_capacity(samples.len() * 3 * h * w);
    let mut msk = Vec::with_capacity(samples.len() * h * w);
    for s in samples {
        if s.size() != (h, w) {
            return Err(Error::Shape(format!("mixed sample sizes {:?} and {:?}", (h, w), s.size())));
        }
        img.extend(s.image.data().iter().map(|&v| S::lit(v)));
        msk.extend(s.mask.data().iter().map(|&v| S::lit(v)));
    }
    Ok((
        Tensor::new(&[samples.len(), 3, h, w], img)?,
        Tensor::new(&[samples.len(), 1, h, w], msk)?,
    ))
}
