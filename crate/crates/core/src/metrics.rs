//! Overlap, error and boundary-distance metrics on binary masks.

use crate::error::{shape_err, Error, Result};

/// Threshold used to binarize probability maps.
pub const THRESHOLD: f64 = 0.5;

/// Row-major binary mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(shape_err!("{} mask values for a {height}×{width} grid", data.len()));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let data = (0..height * width).map(|i| f(i / width, i % width)).collect();
        Self { height, width, data }
    }

    /// `p >= 0.5` for each probability.
    pub fn binarize(height: usize, width: usize, probs: &[f64]) -> Result<Self> {
        Self::new(height, width, probs.iter().map(|&p| p >= THRESHOLD).collect())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| (i / self.width, i % self.width))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    /// `pred` against `truth`.
    pub fn from_masks(pred: &Mask, truth: &Mask) -> Result<Self> {
        same_shape(pred, truth)?;
        let mut c = Self::default();
        for (&p, &t) in pred.data.iter().zip(&truth.data) {
            match (p, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn dsc(&self) -> f64 {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 {
            1.0
        } else {
            (2 * self.tp) as f64 / den as f64
        }
    }

    pub fn iou(&self) -> f64 {
        let den = self.tp + self.fp + self.fn_;
        if den == 0 {
            1.0
        } else {
            self.tp as f64 / den as f64
        }
    }
}

fn same_shape(a: &Mask, b: &Mask) -> Result<()> {
    if (a.height, a.width) != (b.height, b.width) {
        return Err(shape_err!(
            "mask shapes differ: {}×{} vs {}×{}",
            a.height,
            a.width,
            b.height,
            b.width
        ));
    }
    Ok(())
}

/// Dice coefficient; two empty masks score 1.
pub fn dsc(a: &Mask, b: &Mask) -> Result<f64> {
    Ok(ConfusionCounts::from_masks(a, b)?.dsc())
}

/// Intersection over union; two empty masks score 1.
pub fn miou(a: &Mask, b: &Mask) -> Result<f64> {
    Ok(ConfusionCounts::from_masks(a, b)?.iou())
}

/// Mean absolute difference of two equally sized maps.
pub fn mae(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(shape_err!("maps of length {} and {} cannot be compared", a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Linear-interpolation percentile (`q` in [0, 1]) of an ascending slice.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// Exact 1D squared distance transform: `out[q] = min_p (q − p)² + f[p]`
/// over the finite sites `p` (lower envelope of parabolas). All arithmetic
/// stays on small integers, so results are exact in f64.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for q in (0..f.len()).filter(|&q| f[q].is_finite()) {
        let mut s = f64::NEG_INFINITY;
        while let Some(&p) = v.last() {
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2 * (q - p)) as f64;
            if s <= z[v.len() - 1] {
                v.pop();
                z.pop();
            } else {
                break;
            }
        }
        if v.is_empty() {
            s = f64::NEG_INFINITY;
        }
        v.push(q);
        z.push(s);
    }
    if v.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    // z[k] is where parabola v[k] starts to be the lowest.
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared Euclidean distance from every pixel to the nearest foreground pixel.
fn squared_distance_to(mask: &Mask) -> Vec<f64> {
    let (h, w) = (mask.height, mask.width);
    let mut grid: Vec<f64> = mask.data.iter().map(|&v| if v { 0.0 } else { f64::INFINITY }).collect();
    let n = h.max(w);
    let (mut f, mut out) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut z) = (Vec::with_capacity(n), Vec::with_capacity(n + 1));
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        edt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        edt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    grid
}

fn directed_distances(from: &Mask, to: &Mask) -> Vec<f64> {
    let field = squared_distance_to(to);
    let mut d: Vec<f64> = from.points().map(|(y, x)| field[y * from.width + x].sqrt()).collect();
    d.sort_by(f64::total_cmp);
    d
}

/// 95th-percentile symmetric Hausdorff distance between foreground sets, in pixels.
pub fn hd95(a: &Mask, b: &Mask) -> Result<f64> {
    same_shape(a, b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedDistance(format!(
            "HD95 needs two nonempty masks (areas {} and {})",
            a.area(),
            b.area()
        )));
    }
    let ab = percentile_sorted(&directed_distances(a, b), 0.95);
    let ba = percentile_sorted(&directed_distances(b, a), 0.95);
    Ok(ab.max(ba))
}

/// Mean and sample standard deviation (`n − 1`); std is 0 for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
