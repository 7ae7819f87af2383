use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use nalgebra::DMatrix;

use super::linalg::pairwise_distances;
use crate::error::{Error, Result};

/// Undirected weighted graph stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    pub n: usize,
    /// `(neighbor, edge length)` pairs sorted by neighbor index.
    pub adjacency: Vec<Vec<(usize, f64)>>,
}

impl NeighborGraph {
    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &(w, _) in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }
}

/// k-nearest-neighbour graph on the rows of `points`.
pub fn knn_graph(points: &DMatrix<f64>, k: usize) -> Result<NeighborGraph> {
    knn_graph_from_distances(&pairwise_distances(points), k)
}

/// Connects every node to its `k` nearest others (ties to the lower index),
/// then symmetrizes by union. A disconnected result is an error.
pub fn knn_graph_from_distances(dist: &DMatrix<f64>, k: usize) -> Result<NeighborGraph> {
    let n = dist.nrows();
    if k == 0 || k >= n {
        return Err(Error::Domain(format!(
            "neighbour count must satisfy 0 < k < n (k={k}, n={n})"
        )));
    }
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]).then(a.cmp(&b)));
        for &j in &others[..k] {
            adjacency[i].push((j, dist[(i, j)]));
            adjacency[j].push((i, dist[(i, j)]));
        }
    }
    for list in &mut adjacency {
        list.sort_by_key(|&(j, _)| j);
        list.dedup_by_key(|&mut (j, _)| j);
    }
    let graph = NeighborGraph { n, adjacency };
    let components = graph.component_count();
    if components > 1 {
        return Err(Error::Numerical(format!(
            "{k}-nearest-neighbour graph has {components} connected components; increase k"
        )));
    }
    Ok(graph)
}

#[derive(PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn dijkstra(g: &NeighborGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.n];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Dist(0.0), source)));
    while let Some(Reverse((Dist(d), v))) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, len) in &g.adjacency[v] {
            let candidate = d + len;
            if candidate < dist[w] {
                dist[w] = candidate;
                heap.push(Reverse((Dist(candidate), w)));
            }
        }
    }
    dist
}

/// All-pairs shortest-path lengths, one Dijkstra run per source.
///
/// The result is symmetrized with the minimum of the two directions, which
/// only matters at rounding level.
pub fn geodesic_distances(g: &NeighborGraph) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(g.n, g.n);
    for s in 0..g.n {
        for (t, v) in dijkstra(g, s).into_iter().enumerate() {
            d[(s, t)] = v;
        }
    }
    for i in 0..g.n {
        for j in (i + 1)..g.n {
            let v = d[(i, j)].min(d[(j, i)]);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(xs.len(), 1, xs)
    }

    #[test]
    fn disconnected_graph_errors() {
        let err = knn_graph(&line(&[0.0, 1.0, 10.0, 11.0]), 1).unwrap_err();
        assert!(err.to_string().contains("2 connected components"), "{err}");
    }

    #[test]
    fn path_graph_by_hand() {
        let g = knn_graph(&line(&[0.0, 1.0, 2.0, 3.0]), 1).unwrap();
        // 0->1, 1->0 (tie with 2, lower index), 2->1 (tie with 3), 3->2
        let edges: Vec<Vec<usize>> = g
            .adjacency
            .iter()
            .map(|a| a.iter().map(|e| e.0).collect())
            .collect();
        assert_eq!(edges, vec![vec![1], vec![0, 2], vec![1, 3], vec![2]]);
    }

    #[test]
    fn weighted_path_geodesic() {
        let g = NeighborGraph {
            n: 3,
            adjacency: vec![vec![(1, 1.0)], vec![(0, 1.0), (2, 2.0)], vec![(1, 2.0)]],
        };
        let d = geodesic_distances(&g);
        assert_eq!(d[(0, 2)], 3.0);
        assert_eq!(d[(2, 0)], 3.0);
        assert!((0..3).all(|i| d[(i, i)] == 0.0));
    }

    #[test]
    fn geodesics_dominate_chords_and_match_on_a_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = DMatrix::from_fn(40, 3, |_, _| rng.random_range(-1.0..1.0));
        let g = knn_graph(&pts, 6).unwrap();
        assert!((0..40).all(|i| g.degree(i) >= 6));
        let d = geodesic_distances(&g);
        let e = pairwise_distances(&pts);
        for i in 0..40 {
            assert_eq!(d[(i, i)], 0.0);
            for j in 0..40 {
                assert_eq!(d[(i, j)], d[(j, i)]);
                assert!(d[(i, j)] >= e[(i, j)] - 1e-12);
                for k in 0..40 {
                    assert!(d[(i, k)] <= d[(i, j)] + d[(j, k)] + 1e-12);
                }
            }
        }

        let dir = [0.3, -0.5, 0.8];
        let ts: Vec<f64> = (0..25).map(|i| 0.2 * i as f64 + rng.random_range(0.0..0.05)).collect();
        let pts = DMatrix::from_fn(25, 3, |i, j| 1.0 + ts[i] * dir[j]);
        let d = geodesic_distances(&knn_graph(&pts, 2).unwrap());
        let e = pairwise_distances(&pts);
        assert!((d - e).amax() <= 1e-9);
    }
}
