use std::cmp::Ordering;

use crate::error::{shape_err, Error, Result};
use crate::numerics::{Scalar, Tensor};

/// Neighbour table of a dilated K-nearest-neighbour graph over `N` nodes.
///
/// Row `i` lists `K` distinct node indices, none equal to `i`, ordered by
/// `(squared distance, index)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchGraph {
    n_nodes: usize,
    k_neighbors: usize,
    dilation: usize,
    neighbors: Vec<usize>,
}

impl PatchGraph {
    /// Rebuilds a graph from a flat `N×K` table (e.g. a replayed one),
    /// validating every invariant except the distance ordering.
    pub fn from_table(n_nodes: usize, k_neighbors: usize, dilation: usize, neighbors: Vec<usize>) -> Result<Self> {
        if neighbors.len() != n_nodes * k_neighbors || k_neighbors == 0 {
            return Err(Error::Graph(format!(
                "table of {} entries does not describe {n_nodes}×{k_neighbors}",
                neighbors.len()
            )));
        }
        for (i, row) in neighbors.chunks(k_neighbors).enumerate() {
            for (a, &j) in row.iter().enumerate() {
                if j >= n_nodes || j == i || row[..a].contains(&j) {
                    return Err(Error::Graph(format!("row {i} is not a valid neighbour list")));
                }
            }
        }
        Ok(Self {
            n_nodes,
            k_neighbors,
            dilation,
            neighbors,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn k_neighbors(&self) -> usize {
        self.k_neighbors
    }

    pub fn dilation(&self) -> usize {
        self.dilation
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.k_neighbors..(i + 1) * self.k_neighbors]
    }

    pub fn table(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn into_table(self) -> Vec<usize> {
        self.neighbors
    }
}

fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Dilated KNN over the columns of `features: [C, N]` using squared
/// Euclidean distance.
///
/// For every node the other nodes are ranked by `(distance, index)` and
/// ranks `0, d, 2d, …` are kept until `K` neighbours are chosen.
pub fn build_dilated_knn<S: Scalar>(features: &Tensor<S>, k: usize, dilation: usize) -> Result<PatchGraph> {
    let &[chans, n] = features.shape() else {
        return Err(shape_err!("knn features must be [C, N], got {:?}", features.shape()));
    };
    knn_from_slice(features.data(), chans, n, k, dilation)
}

pub(crate) fn knn_from_slice<S: Scalar>(
    x: &[S],
    chans: usize,
    n: usize,
    k: usize,
    dilation: usize,
) -> Result<PatchGraph> {
    if k == 0 || dilation == 0 {
        return Err(Error::Graph(format!("K ({k}) and dilation ({dilation}) must be positive")));
    }
    if n <= k * dilation {
        return Err(Error::Graph(format!(
            "{n} nodes cannot supply {k} neighbours at dilation {dilation} (need N > K·d)"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite node features".into()));
    }
    let mut dist = vec![0.0f64; n * n];
    for c in 0..chans {
        let row = &x[c * n..(c + 1) * n];
        for i in 0..n {
            let xi = row[i].as_f64();
            let d = &mut dist[i * n..(i + 1) * n];
            for (dj, xj) in d.iter_mut().zip(row) {
                let diff = xi - xj.as_f64();
                *dj += diff * diff;
            }
        }
    }
    let span = (k - 1) * dilation + 1;
    let mut neighbors = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        cand.extend((0..n).filter(|&j| j != i).map(|j| (dist[i * n + j], j)));
        if span < cand.len() {
            cand.select_nth_unstable_by(span - 1, by_distance);
            cand.truncate(span);
        }
        cand.sort_unstable_by(by_distance);
        neighbors.extend(cand.iter().step_by(dilation).take(k).map(|&(_, j)| j));
    }
    Ok(PatchGraph {
        n_nodes: n,
        k_neighbors: k,
        dilation,
        neighbors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_points_on_a_line() {
        let f = Tensor::new(&[1, 3], vec![0.0f64, 1.0, 10.0]).unwrap();
        let g = build_dilated_knn(&f, 1, 1).unwrap();
        assert_eq!(g.table(), &[1, 0, 1]);
    }

    #[test]
    fn identical_patches_fall_back_to_index_order() {
        let f = Tensor::full(&[2, 6], 0.3f64).unwrap();
        let g = build_dilated_knn(&f, 3, 1).unwrap();
        assert_eq!(g.row(0), &[1, 2, 3]);
        assert_eq!(g.row(2), &[0, 1, 3]);
        assert_eq!(g.row(5), &[0, 1, 2]);
    }

    #[test]
    fn dilation_skips_ranks() {
        let f = Tensor::new(&[1, 6], vec![0.0f64, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let g = build_dilated_knn(&f, 2, 2).unwrap();
        // node 0 ranks: 1,2,3,4,5 -> keep ranks 0 and 2
        assert_eq!(g.row(0), &[1, 3]);
    }

    #[test]
    fn too_few_nodes_is_an_error() {
        let f = Tensor::zeros(&[1, 4]).unwrap();
        assert!(matches!(build_dilated_knn::<f64>(&f, 2, 2), Err(Error::Graph(_))));
        assert!(build_dilated_knn::<f64>(&f, 3, 1).is_ok());
    }

    #[test]
    fn from_table_validates_rows() {
        assert!(PatchGraph::from_table(3, 1, 1, vec![1, 0, 1]).is_ok());
        assert!(PatchGraph::from_table(3, 1, 1, vec![0, 0, 1]).is_err());
        assert!(PatchGraph::from_table(3, 2, 1, vec![1, 1, 0, 2, 0, 1]).is_err());
    }
}
