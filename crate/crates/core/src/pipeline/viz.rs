use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Scalar, Session, Tensor, Var};
use crate::skipnet::SkipNet;

/// Output image side the rendering is scaled up to (at least).
const RENDER_SIDE: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighbourInfo {
    pub node: usize,
    pub row: usize,
    pub col: usize,
    /// Euclidean distance between the embedded node features.
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub row: usize,
    pub col: usize,
    pub node: usize,
    pub neighbours: Vec<NeighbourInfo>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub index: usize,
    pub row: usize,
    pub col: usize,
}

/// `rank` is the position of `dst` in the neighbour row of `src` (0 = nearest).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub rank: usize,
}

/// Adjacency of the seed patches plus the node features the graph was
/// built from (`features[c][node]`), enough to recompute the neighbours.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub grid: (usize, usize),
    pub k_neighbors: usize,
    pub dilation: usize,
    pub nodes: Vec<NodeInfo>,
    pub edges: Vec<Edge>,
    pub seeds: Vec<SeedInfo>,
    pub features: Vec<Vec<f64>>,
}

/// Runs the first graph block on `image` (`[3, H, W]`) and collects the
/// first `per_seed` neighbours of every seed patch `(row, col)`.
pub fn graph_dump<S: Scalar>(
    net: &SkipNet,
    store: &ParamStore<S>,
    image: &Tensor<f64>,
    seeds: &[(usize, usize)],
    per_seed: usize,
) -> Result<GraphDump> {
    let x: Tensor<S> = image.cast();
    let x = x.reshape(&[1, image.shape()[0], image.shape()[1], image.shape()[2]])?;
    let session = Session::eval(store);
    let (_, trace) = net.forward_traced(&session, &Var::constant(x))?;
    let block = trace
        .blocks
        .first()
        .ok_or_else(|| Error::Argument("model has no graph block (setting S0)".into()))?;
    let graph = &block.graphs[0];
    let grid = net.config().graph_grid();
    let cfg = net.config();
    if per_seed == 0 || per_seed > graph.k_neighbors() {
        return Err(Error::Argument(format!(
            "asked for {per_seed} neighbours per seed, graph has K = {}",
            graph.k_neighbors()
        )));
    }
    let (c, n) = (block.embedded.shape()[1], block.embedded.shape()[2]);
    let feats = block.embedded.item_slice(0);
    let features: Vec<Vec<f64>> = (0..c).map(|ch| feats[ch * n..(ch + 1) * n].iter().map(|v| v.as_f64()).collect()).collect();
    let dist = |a: usize, b: usize| features.iter().map(|f| (f[a] - f[b]).powi(2)).sum::<f64>().sqrt();

    let mut out = Vec::with_capacity(seeds.len());
    let mut edges = Vec::new();
    for &(row, col) in seeds {
        if row >= grid.0 || col >= grid.1 {
            return Err(Error::Argument(format!(
                "seed patch ({row}, {col}) lies outside the {}×{} graph grid",
                grid.0, grid.1
            )));
        }
        let node = row * grid.1 + col;
        let neighbours = graph.row(node)[..per_seed]
            .iter()
            .map(|&j| NeighbourInfo {
                node: j,
                row: j / grid.1,
                col: j % grid.1,
                distance: dist(node, j),
            })
            .collect::<Vec<_>>();
        edges.extend(neighbours.iter().enumerate().map(|(rank, nb)| Edge {
            src: node,
            dst: nb.node,
            rank,
        }));
        out.push(SeedInfo {
            row,
            col,
            node,
            neighbours,
        });
    }
    Ok(GraphDump {
        grid,
        k_neighbors: cfg.k_neighbors,
        dilation: cfg.dilation,
        nodes: (0..n)
            .map(|index| NodeInfo {
                index,
                row: index / grid.1,
                col: index % grid.1,
            })
            .collect(),
        edges,
        seeds: out,
        features,
    })
}

const PALETTE: [[u8; 3]; 6] = [
    [255, 64, 64],
    [64, 200, 255],
    [255, 220, 0],
    [120, 255, 120],
    [255, 128, 255],
    [255, 160, 40],
];

fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// The input image (nearest-upscaled) with lines from every seed patch
/// centre to its neighbours and a box around each seed patch.
pub fn render(image: &Tensor<f64>, dump: &GraphDump) -> Result<RgbImage> {
    let base = super::corpus::image_to_png(image)?;
    let (w, h) = (base.width() as usize, base.height() as usize);
    let scale = (RENDER_SIDE / w.max(h)).max(1);
    let mut img = RgbImage::from_fn((w * scale) as u32, (h * scale) as u32, |x, y| {
        *base.get_pixel(x / scale as u32, y / scale as u32)
    });
    let (gh, gw) = dump.grid;
    let (ph, pw) = ((h * scale) as f64 / gh as f64, (w * scale) as f64 / gw as f64);
    let centre = |r: usize, c: usize| (((c as f64 + 0.5) * pw) as i64, ((r as f64 + 0.5) * ph) as i64);
    for (i, seed) in dump.seeds.iter().enumerate() {
        let color = Rgb(PALETTE[i % PALETTE.len()]);
        let from = centre(seed.row, seed.col);
        for nb in &seed.neighbours {
            line(&mut img, from, centre(nb.row, nb.col), color);
        }
        let (x0, y0) = ((seed.col as f64 * pw) as i64, (seed.row as f64 * ph) as i64);
        let (x1, y1) = (((seed.col + 1) as f64 * pw) as i64 - 1, ((seed.row + 1) as f64 * ph) as i64 - 1);
        for (a, b) in [((x0, y0), (x1, y0)), ((x1, y0), (x1, y1)), ((x1, y1), (x0, y1)), ((x0, y1), (x0, y0))] {
            line(&mut img, a, b, color);
        }
    }
    Ok(img)
}
