//! Deterministic synthetic segmentation corpus: bright shapes on noisy,
//! shaded backgrounds, plus flip/rotate/rescale augmentation.
//!
//! Every sample draws from its own ChaCha8 stream (`seed`, stream = sample
//! index), so a sample never depends on how many others were generated or in
//! which order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numerics::{resize_tensor, Tensor};

/// Supersampling factor per axis used to anti-alias shape coverage.
const SUPERSAMPLE: usize = 4;
/// Rejection-sampling budget for hitting the configured area range.
const MAX_ATTEMPTS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeFamily {
    Ellipse,
    Rectangle,
    BlobUnion,
    /// Picks one of the three per sample.
    Mixed,
}

/// Offsets that turn a "seen" spec into a shifted "unseen" one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainShift {
    /// Multiplies foreground/background contrast.
    pub contrast_scale: f64,
    /// Added to the noise σ.
    pub noise_offset: f64,
    /// Multiplies shape extents.
    pub scale: f64,
}

impl Default for DomainShift {
    fn default() -> Self {
        Self {
            contrast_scale: 1.0,
            noise_offset: 0.0,
            scale: 1.0,
        }
    }
}

impl DomainShift {
    /// The shift used for the held-out "unseen" split.
    pub fn unseen() -> Self {
        Self {
            contrast_scale: 0.75,
            noise_offset: 0.03,
            scale: 0.85,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub count: usize,
    pub size: (usize, usize),
    pub family: ShapeFamily,
    pub noise_sigma: f64,
    pub contrast: f64,
    /// Allowed foreground fraction `[min, max]` (before the shift's scaling).
    pub area_range: (f64, f64),
    pub shift: DomainShift,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            count: 200,
            size: (64, 64),
            family: ShapeFamily::Mixed,
            noise_sigma: 0.06,
            contrast: 0.35,
            area_range: (0.05, 0.35),
            shift: DomainShift::default(),
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn with_shift(mut self, shift: DomainShift) -> Self {
        self.shift = shift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.size;
        if h == 0 || w == 0 || h % 32 != 0 || w % 32 != 0 {
            return Err(Error::Config(format!("corpus size {h}×{w} must be positive multiples of 32")));
        }
        if self.count == 0 {
            return Err(Error::Config("corpus must contain at least one sample".into()));
        }
        let (lo, hi) = self.area_range;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Config(format!("area range ({lo}, {hi}) must satisfy 0 < min < max < 1")));
        }
        if !(self.noise_sigma >= 0.0 && self.contrast > 0.0 && self.shift.scale > 0.0) {
            return Err(Error::Config("noise must be ≥ 0, contrast and scale > 0".into()));
        }
        Ok(())
    }

    fn effective_area_range(&self) -> (f64, f64) {
        let s2 = self.shift.scale * self.shift.scale;
        (self.area_range.0 * s2, (self.area_range.1 * s2).min(0.95))
    }
}

/// One image (`[3, H, W]`, values on the 8-bit grid in [0, 1]) and its
/// binary mask (`[1, H, W]`).
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: Tensor<f64>,
    pub mask: Tensor<f64>,
}

impl Sample {
    pub fn size(&self) -> (usize, usize) {
        let s = self.mask.shape();
        (s[1], s[2])
    }

    pub fn mask_area(&self) -> usize {
        self.mask.data().iter().filter(|&&v| v == 1.0).count()
    }
}

/// Geometric primitive in pixel units.
#[derive(Clone, Debug)]
enum Shape {
    Ellipse { cy: f64, cx: f64, ry: f64, rx: f64, angle: f64 },
    Rectangle { cy: f64, cx: f64, hy: f64, hx: f64, angle: f64 },
    Blobs(Vec<(f64, f64, f64)>),
}

impl Shape {
    fn contains(&self, y: f64, x: f64) -> bool {
        match *self {
            Shape::Ellipse { cy, cx, ry, rx, angle } => {
                let (u, v) = rotate(y - cy, x - cx, angle);
                (u / ry).powi(2) + (v / rx).powi(2) <= 1.0
            }
            Shape::Rectangle { cy, cx, hy, hx, angle } => {
                let (u, v) = rotate(y - cy, x - cx, angle);
                u.abs() <= hy && v.abs() <= hx
            }
            Shape::Blobs(ref circles) => circles
                .iter()
                .any(|&(cy, cx, r)| (y - cy).powi(2) + (x - cx).powi(2) <= r * r),
        }
    }

    fn random(family: ShapeFamily, h: f64, w: f64, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let family = match family {
            ShapeFamily::Mixed => [ShapeFamily::Ellipse, ShapeFamily::Rectangle, ShapeFamily::BlobUnion]
                [rng.random_range(0..3)],
            f => f,
        };
        let m = h.min(w);
        let cy = rng.random_range(0.25..0.75) * h;
        let cx = rng.random_range(0.25..0.75) * w;
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        match family {
            ShapeFamily::Ellipse => Shape::Ellipse {
                cy,
                cx,
                ry: rng.random_range(0.1..0.35) * m * scale,
                rx: rng.random_range(0.1..0.35) * m * scale,
                angle,
            },
            ShapeFamily::Rectangle => Shape::Rectangle {
                cy,
                cx,
                hy: rng.random_range(0.08..0.3) * m * scale,
                hx: rng.random_range(0.08..0.3) * m * scale,
                angle,
            },
            _ => {
                let n = rng.random_range(2..=4);
                let circles = (0..n)
                    .map(|_| {
                        let dy = rng.random_range(-0.15..0.15) * m * scale;
                        let dx = rng.random_range(-0.15..0.15) * m * scale;
                        let r = rng.random_range(0.07..0.18) * m * scale;
                        (cy + dy, cx + dx, r)
                    })
                    .collect();
                Shape::Blobs(circles)
            }
        }
    }

    /// Fraction of each pixel covered, from `SUPERSAMPLE²` subsamples.
    fn coverage(&self, h: usize, w: usize) -> Vec<f64> {
        let n = SUPERSAMPLE;
        let step = 1.0 / n as f64;
        let mut cov = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                let mut hits = 0;
                for sy in 0..n {
                    for sx in 0..n {
                        let py = y as f64 + (sy as f64 + 0.5) * step;
                        let px = x as f64 + (sx as f64 + 0.5) * step;
                        hits += self.contains(py, px) as usize;
                    }
                }
                cov[y * w + x] = hits as f64 / (n * n) as f64;
            }
        }
        cov
    }
}

fn rotate(dy: f64, dx: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (c * dy + s * dx, -s * dy + c * dx)
}

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Sample number `index` of the corpus described by `spec`.
pub fn generate_one(spec: &SynthSpec, index: usize) -> Result<Sample> {
    spec.validate()?;
    let (h, w) = spec.size;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);

    let (lo, hi) = spec.effective_area_range();
    let mut coverage = None;
    for _ in 0..MAX_ATTEMPTS {
        let shape = Shape::random(spec.family, h as f64, w as f64, spec.shift.scale, &mut rng);
        let cov = shape.coverage(h, w);
        let area = cov.iter().filter(|&&c| c >= 0.5).count() as f64 / (h * w) as f64;
        if (lo..=hi).contains(&area) {
            coverage = Some(cov);
            break;
        }
    }
    let coverage = coverage.ok_or_else(|| {
        Error::Config(format!("no shape within area range ({lo:.3}, {hi:.3}) after {MAX_ATTEMPTS} draws"))
    })?;

    let contrast = spec.contrast * spec.shift.contrast_scale;
    let sigma = spec.noise_sigma + spec.shift.noise_offset;
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.15..0.45));
    let tint: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.8..1.2));
    let (gy, gx) = (rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
    let noise = Normal::new(0.0, sigma.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;

    let mask = Tensor::from_fn(&[1, h, w], |i| (coverage[i] >= 0.5) as u8 as f64)?;
    let mut image = Tensor::zeros(&[3, h, w])?;
    for c in 0..3 {
        for y in 0..h {
            for x in 0..w {
                let shade = gy * (y as f64 / h as f64 - 0.5) + gx * (x as f64 / w as f64 - 0.5);
                let fg = contrast * tint[c] * mask.data()[y * w + x];
                let n = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                image.data_mut()[(c * h + y) * w + x] = quantize(base[c] + shade + fg + n);
            }
        }
    }
    Ok(Sample { image, mask })
}

/// The whole corpus, in index order.
pub fn generate(spec: &SynthSpec) -> Result<Vec<Sample>> {
    spec.validate()?;
    (0..spec.count).map(|i| generate_one(spec, i)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentPolicy {
    pub hflip: f64,
    pub vflip: f64,
    /// Rotation drawn uniformly from `[-max, max]` degrees.
    pub max_rotation_deg: f64,
    /// Optional per-batch rescale factors (multi-scale training).
    pub scales: Vec<f64>,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self::binary()
    }
}

impl AugmentPolicy {
    /// Flips at 50% and ±5° rotation.
    pub fn binary() -> Self {
        Self {
            hflip: 0.5,
            vflip: 0.5,
            max_rotation_deg: 5.0,
            scales: Vec::new(),
        }
    }

    /// Flips at 50% and ±20° rotation.
    pub fn multi_organ() -> Self {
        Self {
            max_rotation_deg: 20.0,
            ..Self::binary()
        }
    }

    pub fn none() -> Self {
        Self {
            hflip: 0.0,
            vflip: 0.0,
            max_rotation_deg: 0.0,
            scales: Vec::new(),
        }
    }

    /// The multi-scale option with factors {0.75, 1.0, 1.25}.
    pub fn with_multi_scale(mut self) -> Self {
        self.scales = vec![0.75, 1.0, 1.25];
        self
    }

    /// Picks a batch resolution: `scale·size` rounded to a multiple of 32.
    pub fn batch_size_for<R: Rng>(&self, size: (usize, usize), rng: &mut R) -> (usize, usize) {
        if self.scales.is_empty() {
            return size;
        }
        let s = self.scales[rng.random_range(0..self.scales.len())];
        let snap = |v: usize| (((v as f64 * s) / 32.0).round() as usize).max(1) * 32;
        (snap(size.0), snap(size.1))
    }
}

/// Horizontal flip of every `[.., H, W]` plane.
pub fn hflip(t: &Tensor<f64>) -> Tensor<f64> {
    let w = *t.shape().last().unwrap();
    let mut out = t.clone();
    for row in out.data_mut().chunks_mut(w) {
        row.reverse();
    }
    out
}

/// Vertical flip of every `[.., H, W]` plane.
pub fn vflip(t: &Tensor<f64>) -> Tensor<f64> {
    let s = t.shape();
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    let mut out = t.clone();
    for (dst, src) in out.data_mut().chunks_mut(h * w).zip(t.data().chunks(h * w)) {
        for y in 0..h {
            dst[y * w..(y + 1) * w].copy_from_slice(&src[(h - 1 - y) * w..(h - y) * w]);
        }
    }
    out
}

/// Rotates every plane about the image centre by `deg` degrees. Pixels
/// mapping outside the source take the nearest edge value. `nearest` picks
/// nearest-neighbour sampling instead of bilinear.
pub fn rotate_planes(t: &Tensor<f64>, deg: f64, nearest: bool) -> Tensor<f64> {
    if deg == 0.0 {
        return t.clone();
    }
    let s = t.shape();
    let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let (sin, cos) = deg.to_radians().sin_cos();
    let mut out = t.clone();
    for (dst, src) in out.data_mut().chunks_mut(h * w).zip(t.data().chunks(h * w)) {
        let at = |y: isize, x: isize| src[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize];
        for y in 0..h {
            for x in 0..w {
                let (dy, dx) = (y as f64 - cy, x as f64 - cx);
                let sy = cos * dy - sin * dx + cy;
                let sx = sin * dy + cos * dx + cx;
                dst[y * w + x] = if nearest {
                    at(sy.round() as isize, sx.round() as isize)
                } else {
                    let (y0, x0) = (sy.floor(), sx.floor());
                    let (fy, fx) = (sy - y0, sx - x0);
                    let (y0, x0) = (y0 as isize, x0 as isize);
                    let top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx;
                    let bot = at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx;
                    top * (1.0 - fy) + bot * fy
                };
            }
        }
    }
    out
}

/// Applies one random draw of `policy` identically to image and mask.
pub fn augment<R: Rng>(sample: &Sample, policy: &AugmentPolicy, rng: &mut R) -> Sample {
    let mut image = sample.image.clone();
    let mut mask = sample.mask.clone();
    if rng.random_bool(policy.hflip.clamp(0.0, 1.0)) {
        image = hflip(&image);
        mask = hflip(&mask);
    }
    if rng.random_bool(policy.vflip.clamp(0.0, 1.0)) {
        image = vflip(&image);
        mask = vflip(&mask);
    }
    if policy.max_rotation_deg > 0.0 {
        let deg = rng.random_range(-policy.max_rotation_deg..=policy.max_rotation_deg);
        image = rotate_planes(&image, deg, false).map(|v| v.clamp(0.0, 1.0));
        mask = rotate_planes(&mask, deg, true).map(|v| (v >= 0.5) as u8 as f64);
    }
    Sample { image, mask }
}

/// Resizes a sample to `size`: bilinear image, mask re-binarized at 0.5.
pub fn rescale(sample: &Sample, size: (usize, usize)) -> Result<Sample> {
    if sample.size() == size {
        return Ok(sample.clone());
    }
    if size.0 == 0 || size.1 == 0 {
        return Err(shape_err!("cannot rescale to {}×{}", size.0, size.1));
    }
    Ok(Sample {
        image: resize_tensor(&sample.image, size)?,
        mask: resize_tensor(&sample.mask, size)?.map(|v| (v >= 0.5) as u8 as f64),
    })
}
