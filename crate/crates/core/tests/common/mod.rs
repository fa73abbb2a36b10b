//! Loop-level oracles shared by the integration tests. Each one is written
//! from the definition, deliberately without reusing library internals.
#![allow(dead_code)]

/// Neighbour rows by full sort of all pairwise squared distances.
pub fn knn_oracle(features: &[f64], c: usize, n: usize, k: usize, d: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let mut s = 0.0;
                    for ch in 0..c {
                        let diff = features[ch * n + i] - features[ch * n + j];
                        s += diff * diff;
                    }
                    (s, j)
                })
                .collect();
            cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            cand.iter().step_by(d).take(k).map(|&(_, j)| j).collect()
        })
        .collect()
}

/// Mean of `-p ln p` over a channel's values, `p = 1 / (1 + e^-x)`.
pub fn entropy_oracle(values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &x in values {
        let p = 1.0 / (1.0 + (-x).exp());
        if p > 0.0 {
            acc -= p * p.ln();
        }
    }
    acc / values.len() as f64
}

/// Lowest-sum `m`-subset by enumerating all `C(n, m)` masks; ties go to the
/// subset whose sorted index list is lexicographically smallest.
pub fn bottom_m_oracle(scores: &[f64], m: usize) -> Vec<usize> {
    let n = scores.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for bits in 0u32..(1 << n) {
        if bits.count_ones() as usize != m {
            continue;
        }
        let idx: Vec<usize> = (0..n).filter(|&i| bits >> i & 1 == 1).collect();
        // Sum in ascending value order so equal multisets give equal sums.
        let mut vals: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        vals.sort_by(f64::total_cmp);
        let sum: f64 = vals.iter().sum();
        let better = match &best {
            None => true,
            Some((s, b)) => sum < *s || (sum == *s && idx < *b),
        };
        if better {
            best = Some((sum, idx));
        }
    }
    best.unwrap().1
}

/// Sobel edge indicator of a binary `h×w` plane with mirror padding.
pub fn sobel_oracle(mask: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mirror = |i: i64, n: usize| -> usize {
        let n = n as i64;
        let r = if i < 0 { -i } else if i >= n { 2 * n - 2 - i } else { i };
        r.clamp(0, n - 1) as usize
    };
    let kx = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
    let ky = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]];
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let (mut gx, mut gy) = (0i64, 0i64);
            for dy in 0..3 {
                for dx in 0..3 {
                    let v = mask[mirror(y as i64 + dy as i64 - 1, h) * w + mirror(x as i64 + dx as i64 - 1, w)] as i64;
                    gx += kx[dy][dx] * v;
                    gy += ky[dy][dx] * v;
                }
            }
            if gx * gx + gy * gy > 0 {
                out[y * w + x] = 1.0;
            }
        }
    }
    out
}

/// `1 + 5·|mean of the in-bounds 31×31 window − R|`.
pub fn weight_oracle(mask: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let (mut sum, mut count) = (0.0, 0.0);
            for yy in (y - 15).max(0)..(y + 16).min(h as i64) {
                for xx in (x - 15).max(0)..(x + 16).min(w as i64) {
                    sum += mask[yy as usize * w + xx as usize];
                    count += 1.0;
                }
            }
            let r = mask[y as usize * w + x as usize];
            out[y as usize * w + x as usize] = 1.0 + 5.0 * (sum / count - r).abs();
        }
    }
    out
}

/// Per-image weighted BCE with probabilities clamped to `[1e-7, 1 − 1e-7]`,
/// averaged over images.
pub fn weighted_bce_oracle(p: &[f64], t: &[f64], w: &[f64], batch: usize) -> f64 {
    let plane = p.len() / batch;
    let mut total = 0.0;
    for b in 0..batch {
        let (mut num, mut den) = (0.0, 0.0);
        for i in b * plane..(b + 1) * plane {
            let q = p[i].clamp(1e-7, 1.0 - 1e-7);
            num += w[i] * -(t[i] * q.ln() + (1.0 - t[i]) * (1.0 - q).ln());
            den += w[i];
        }
        total += num / den;
    }
    total / batch as f64
}

/// Per-image smoothed weighted soft IoU loss, averaged over images.
pub fn weighted_iou_oracle(p: &[f64], t: &[f64], w: &[f64], batch: usize) -> f64 {
    let plane = p.len() / batch;
    let mut total = 0.0;
    for b in 0..batch {
        let (mut inter, mut union) = (1.0, 1.0);
        for i in b * plane..(b + 1) * plane {
            inter += w[i] * p[i] * t[i];
            union += w[i] * (p[i] + t[i] - p[i] * t[i]);
        }
        total += 1.0 - inter / union;
    }
    total / batch as f64
}

/// 95th-percentile Hausdorff distance from all point pairs.
pub fn hd95_oracle(a: &[bool], b: &[bool], w: usize) -> f64 {
    let pts = |m: &[bool]| -> Vec<(f64, f64)> {
        m.iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(|(i, _)| ((i / w) as f64, (i % w) as f64))
            .collect()
    };
    let (pa, pb) = (pts(a), pts(b));
    let directed = |from: &[(f64, f64)], to: &[(f64, f64)]| -> f64 {
        let mut d: Vec<f64> = from
            .iter()
            .map(|p| {
                to.iter()
                    .map(|q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        d.sort_by(f64::total_cmp);
        let rank = 0.95 * (d.len() - 1) as f64;
        let (lo, hi) = (rank.floor() as usize, rank.ceil() as usize);
        d[lo] + (d[hi] - d[lo]) * (rank - lo as f64)
    };
    directed(&pa, &pb).max(directed(&pb, &pa))
}

/// `(tp, fp, fn, tn)` by direct counting.
pub fn confusion_oracle(pred: &[bool], truth: &[bool]) -> (u64, u64, u64, u64) {
    let mut c = (0, 0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, true) => c.2 += 1,
            (false, false) => c.3 += 1,
        }
    }
    c
}
