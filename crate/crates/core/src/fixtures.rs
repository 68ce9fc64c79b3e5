//! Deterministic graph generators for tests, benchmarks and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::EdgeList;

fn build(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> EdgeList {
    EdgeList::new(n, edges).expect("generator produced a valid edge list")
}

/// Path `0 - 1 - ... - (n-1)`.
pub fn path(n: usize) -> EdgeList {
    build(n, (1..n).map(|i| (i - 1, i, 1.0)))
}

/// Cycle on `n >= 3` nodes.
pub fn cycle(n: usize) -> EdgeList {
    assert!(n >= 3, "a cycle needs at least 3 nodes");
    build(n, (0..n).map(|i| (i, (i + 1) % n, 1.0)))
}

pub fn complete(n: usize) -> EdgeList {
    build(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0))))
}

/// Star with hub 0.
pub fn star(n: usize) -> EdgeList {
    build(n, (1..n).map(|i| (0, i, 1.0)))
}

/// `rows x cols` grid graph.
pub fn grid(rows: usize, cols: usize) -> EdgeList {
    let id = |r: usize, c: usize| r * cols + c;
    let mut e = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                e.push((id(r, c), id(r, c + 1), 1.0));
            }
            if r + 1 < rows {
                e.push((id(r, c), id(r + 1, c), 1.0));
            }
        }
    }
    build(rows * cols, e)
}

fn pair(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Connected random graph with average degree close to `avg_degree` and
/// weights drawn uniformly from `[0.5, 2)`.
///
/// A random spanning tree guarantees connectivity; the remaining edges are
/// uniform random pairs.
pub fn random_connected(n: usize, avg_degree: f64, seed: u64) -> EdgeList {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::new();
    for k in 1..n {
        let j = order[rng.gen_range(0..k)];
        let e = pair(order[k], j);
        seen.insert(e);
        edges.push((e.0, e.1, rng.gen_range(0.5..2.0)));
    }
    let max_edges = n * n.saturating_sub(1) / 2;
    let target = ((avg_degree * n as f64 / 2.0).round() as usize).clamp(n.saturating_sub(1), max_edges);
    while edges.len() < target {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i == j {
            continue;
        }
        let e = pair(i, j);
        if seen.insert(e) {
            edges.push((e.0, e.1, rng.gen_range(0.5..2.0)));
        }
    }
    build(n, edges)
}

/// Random geometric graph: `n` uniform points in the unit square joined when
/// closer than `radius`. Components are then linked through their closest
/// pair of points until the graph is connected.
pub fn random_geometric(n: usize, radius: f64, seed: u64) -> EdgeList {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
    let d2 = |i: usize, j: usize| {
        let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
        dx * dx + dy * dy
    };
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if d2(i, j) < radius * radius {
                edges.push((i, j, 1.0));
            }
        }
    }
    let mut g = build(n, edges.iter().copied());
    loop {
        let (count, labels) = crate::graph::connected_components(&g);
        if count <= 1 {
            return g;
        }
        // join the component of node 0 to its nearest outside point
        let root = labels[0];
        let mut best = (f64::INFINITY, 0, 0);
        for i in (0..n).filter(|&i| labels[i] == root) {
            for j in (0..n).filter(|&j| labels[j] != root) {
                let d = d2(i, j);
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        edges.push((best.1.min(best.2), best.1.max(best.2), 1.0));
        g = build(n, edges.iter().copied());
    }
}

/// Sparse scale-free graph grown by preferential attachment, where each new
/// node attaches `m` edges (1 or 2 at random, so the graph has many leaves
/// and a tightly clustered low end of the spectrum).
pub fn clustered(n: usize, seed: u64) -> EdgeList {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    // endpoint multiset: sampling from it is degree-proportional
    let mut ends: Vec<usize> = Vec::new();
    let start = 3.min(n);
    for i in 1..start {
        seen.insert((i - 1, i));
        edges.push((i - 1, i, 1.0));
        ends.extend([i - 1, i]);
    }
    for v in start..n {
        let m = if rng.gen_bool(0.6) { 1 } else { 2 };
        let mut added = 0;
        let mut tries = 0;
        while added < m && tries < 50 {
            tries += 1;
            let u = ends[rng.gen_range(0..ends.len())];
            if u != v && seen.insert((u, v)) {
                edges.push((u, v, 1.0));
                ends.extend([u, v]);
                added += 1;
            }
        }
    }
    build(n, edges)
}
