//! Graph ingestion, weighted Laplacian assembly and structural statistics.
//!
//! Graphs are simple, undirected and positively weighted. Two text formats are
//! understood:
//!
//! * edge list: first line `n`, then one `i j w` triple per line (0-based,
//!   whitespace separated, `#` starts a comment, `w` defaults to 1);
//! * Matrix Market coordinate files (`real`, `integer` or `pattern`,
//!   `symmetric` or `general`), 1-based. Off-diagonal entries become edges
//!   with weight `|a_ij|`, so both adjacency and Laplacian files load to the
//!   same graph. Diagonal entries are ignored.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One undirected weighted edge, stored with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// A simple undirected graph with strictly positive edge weights.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeList {
    n_nodes: usize,
    edges: Vec<Edge>,
}

impl EdgeList {
    /// Validates and canonicalizes a list of `(i, j, w)` triples.
    pub fn new(n_nodes: usize, triples: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut seen = HashMap::new();
        let mut edges = Vec::new();
        for (k, (i, j, w)) in triples.into_iter().enumerate() {
            let line = k + 1;
            let edge = canonical_edge(line, n_nodes, i, j, w)?;
            if seen.insert((edge.i, edge.j), edges.len()).is_some() {
                return Err(Error::DuplicateEdge { line, i: edge.i, j: edge.j });
            }
            edges.push(edge);
        }
        edges.sort_by_key(|e| (e.i, e.j));
        Ok(Self { n_nodes, edges })
    }

    /// Unit-weight graph from node pairs.
    pub fn unweighted(n_nodes: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        Self::new(n_nodes, pairs.iter().map(|&(i, j)| (i, j, 1.0)))
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
}

fn canonical_edge(line: usize, n: usize, i: usize, j: usize, w: f64) -> Result<Edge> {
    for node in [i, j] {
        if node >= n {
            return Err(Error::NodeOutOfRange { line, node, n });
        }
    }
    if i == j {
        return Err(Error::SelfLoop { line, node: i });
    }
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::NonPositiveWeight { line, weight: w });
    }
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    Ok(Edge { i, j, w })
}

/// Input file format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    EdgeList,
    MatrixMarket,
}

impl InputFormat {
    /// `.mtx` files are Matrix Market, everything else an edge list.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("mtx") => InputFormat::MatrixMarket,
            _ => InputFormat::EdgeList,
        }
    }
}

/// Accumulates edges while reading, applying the duplicate / symmetrization rule.
struct EdgeCollector {
    n: usize,
    symmetrize: bool,
    /// Mirrored entries of a `general` Matrix Market file must agree when not symmetrizing.
    mirrored: bool,
    index: HashMap<(usize, usize), (usize, bool)>,
    edges: Vec<Edge>,
}

impl EdgeCollector {
    fn new(n: usize, symmetrize: bool, mirrored: bool) -> Self {
        Self { n, symmetrize, mirrored, index: HashMap::new(), edges: Vec::new() }
    }

    fn push(&mut self, line: usize, i: usize, j: usize, w: f64) -> Result<()> {
        let edge = canonical_edge(line, self.n, i, j, w)?;
        let forward = i < j;
        match self.index.get(&(edge.i, edge.j)).copied() {
            None => {
                self.index.insert((edge.i, edge.j), (self.edges.len(), forward));
                self.edges.push(edge);
            }
            Some((k, first_forward)) => {
                if self.symmetrize {
                    // directed arcs i->j and j->i collapse to max(w_ij, w_ji)
                    self.edges[k].w = self.edges[k].w.max(edge.w);
                } else if self.mirrored && first_forward != forward && self.edges[k].w == edge.w {
                    // consistent transpose entry of a general-storage symmetric matrix
                } else {
                    return Err(Error::DuplicateEdge { line, i: edge.i, j: edge.j });
                }
            }
        }
        Ok(())
    }

    fn finish(mut self) -> EdgeList {
        self.edges.sort_by_key(|e| (e.i, e.j));
        EdgeList { n_nodes: self.n, edges: self.edges }
    }
}

/// Reads a graph from `source` in the given format.
///
/// With `symmetrize`, repeated pairs (typically the two arcs of a directed
/// graph) are merged keeping the larger weight; without it they are an error.
pub fn load_edge_list<R: BufRead>(source: R, format: InputFormat, symmetrize: bool) -> Result<EdgeList> {
    match format {
        InputFormat::EdgeList => parse_edge_list(source, symmetrize),
        InputFormat::MatrixMarket => parse_matrix_market(source, symmetrize),
    }
}

/// Opens `path` and reads it with [`load_edge_list`].
pub fn read_graph_file(path: &Path, format: InputFormat, symmetrize: bool) -> Result<EdgeList> {
    let file = File::open(path)?;
    load_edge_list(BufReader::new(file), format, symmetrize)
}

fn parse_field<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse { line, msg: format!("cannot parse {what} from {tok:?}") })
}

fn parse_edge_list<R: BufRead>(source: R, symmetrize: bool) -> Result<EdgeList> {
    let mut collector: Option<EdgeCollector> = None;
    for (k, raw) in source.lines().enumerate() {
        let line = k + 1;
        let raw = raw?;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        match collector.as_mut() {
            None => {
                if toks.len() != 1 {
                    return Err(Error::Parse { line, msg: "expected the node count `n` on the first line".into() });
                }
                let n = parse_field(line, toks[0], "node count")?;
                collector = Some(EdgeCollector::new(n, symmetrize, false));
            }
            Some(c) => {
                if toks.len() != 2 && toks.len() != 3 {
                    return Err(Error::Parse { line, msg: format!("expected `i j w`, got {} fields", toks.len()) });
                }
                let i = parse_field(line, toks[0], "node index")?;
                let j = parse_field(line, toks[1], "node index")?;
                let w = match toks.get(2) {
                    Some(t) => parse_field(line, t, "weight")?,
                    None => 1.0,
                };
                c.push(line, i, j, w)?;
            }
        }
    }
    collector
        .map(EdgeCollector::finish)
        .ok_or_else(|| Error::Parse { line: 0, msg: "empty input: missing node count".into() })
}

fn parse_matrix_market<R: BufRead>(source: R, symmetrize: bool) -> Result<EdgeList> {
    let mut lines = source.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l?,
        None => return Err(Error::Parse { line: 1, msg: "empty Matrix Market file".into() }),
    };
    let tags: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tags.len() != 5 || tags[0] != "%%matrixmarket" || tags[1] != "matrix" || tags[2] != "coordinate" {
        return Err(Error::Parse {
            line: 1,
            msg: "expected `%%MatrixMarket matrix coordinate <field> <symmetry>`".into(),
        });
    }
    let pattern = match tags[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        other => return Err(Error::Parse { line: 1, msg: format!("unsupported field {other:?}") }),
    };
    let general = match tags[4].as_str() {
        "symmetric" => false,
        "general" => true,
        other => return Err(Error::Parse { line: 1, msg: format!("unsupported symmetry {other:?}") }),
    };

    let mut collector: Option<EdgeCollector> = None;
    let mut expected = 0usize;
    let mut read = 0usize;
    for (k, raw) in lines {
        let line = k + 1;
        let raw = raw?;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        match collector.as_mut() {
            None => {
                if toks.len() != 3 {
                    return Err(Error::Parse { line, msg: "expected size line `rows cols entries`".into() });
                }
                let rows: usize = parse_field(line, toks[0], "row count")?;
                let cols: usize = parse_field(line, toks[1], "column count")?;
                if rows != cols {
                    return Err(Error::Parse { line, msg: format!("matrix is {rows}x{cols}, not square") });
                }
                expected = parse_field(line, toks[2], "entry count")?;
                collector = Some(EdgeCollector::new(rows, symmetrize, general));
            }
            Some(c) => {
                let want = if pattern { 2 } else { 3 };
                if toks.len() != want {
                    return Err(Error::Parse { line, msg: format!("expected {want} fields, got {}", toks.len()) });
                }
                let i: usize = parse_field(line, toks[0], "row index")?;
                let j: usize = parse_field(line, toks[1], "column index")?;
                if i == 0 || j == 0 {
                    return Err(Error::Parse { line, msg: "Matrix Market indices are 1-based".into() });
                }
                read += 1;
                let w = if pattern { 1.0 } else { parse_field::<f64>(line, toks[2], "value")?.abs() };
                if i != j {
                    c.push(line, i - 1, j - 1, w)?;
                }
            }
        }
    }
    let collector = collector.ok_or_else(|| Error::Parse { line: 0, msg: "missing size line".into() })?;
    if read != expected {
        return Err(Error::Parse { line: 0, msg: format!("size line announces {expected} entries, found {read}") });
    }
    Ok(collector.finish())
}

/// Writes the lower triangle (diagonal included) of a symmetric matrix as a
/// 1-based `real symmetric` Matrix Market file.
pub fn write_matrix_market<W: Write>(a: &CsrMatrix, mut out: W) -> Result<()> {
    let lower: Vec<(usize, usize, f64)> =
        (0..a.n()).flat_map(|i| a.row(i).filter(move |&(j, _)| j <= i).map(move |(j, v)| (i, j, v))).collect();
    writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(out, "{} {} {}", a.n(), a.n(), lower.len())?;
    for (i, j, v) in lower {
        writeln!(out, "{} {} {}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Square sparse matrix in compressed-sparse-row form.
///
/// Column indices are strictly increasing within each row. The `symmetric`
/// flag records that entry `(i, j)` is present iff `(j, i)` is, with the same
/// value.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl CsrMatrix {
    /// Builds from raw CSR arrays, checking the structural invariants.
    pub fn from_raw(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
        symmetric: bool,
    ) -> Result<Self> {
        if row_ptr.len() != n + 1 {
            return Err(Error::DimensionMismatch { expected: n + 1, found: row_ptr.len() });
        }
        if col_idx.len() != values.len() || row_ptr[n] != col_idx.len() || row_ptr[0] != 0 {
            return Err(Error::InvalidArgument("inconsistent CSR array lengths".into()));
        }
        for i in 0..n {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidArgument(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= n) {
                return Err(Error::InvalidArgument(format!(
                    "row {i}: columns not strictly increasing or out of range"
                )));
            }
        }
        let a = Self { n, row_ptr, col_idx, values, symmetric };
        if symmetric {
            let asym = a.asymmetry();
            if asym > 0.0 {
                return Err(Error::NotSymmetric { asymmetry: asym });
            }
        }
        Ok(a)
    }

    /// Builds from `(row, col, value)` triplets; repeated positions are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)], symmetric: bool) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch { expected: n, found: i.max(j) + 1 });
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_raw(n, row_ptr, col_idx, values, symmetric)
    }

    /// Keeps every nonzero of a dense row-major square matrix.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut trip = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: r.len() });
            }
            trip.extend(r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, &v)| (i, j, v)));
        }
        let mut a = Self::from_triplets(n, &trip, false)?;
        a.symmetric = a.asymmetry() == 0.0;
        Ok(a)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal_matrix(&vec![1.0; n])
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        let n = d.len();
        Self { n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: d.to_vec(), symmetric: true }
    }

    /// Symmetric tridiagonal matrix with diagonal `alpha` and off-diagonal `beta`.
    pub fn tridiagonal(alpha: &[f64], beta: &[f64]) -> Result<Self> {
        let n = alpha.len();
        if beta.len() + 1 != n.max(1) {
            return Err(Error::DimensionMismatch { expected: n.saturating_sub(1), found: beta.len() });
        }
        let mut trip = Vec::with_capacity(3 * n);
        for i in 0..n {
            trip.push((i, i, alpha[i]));
            if i + 1 < n {
                trip.push((i, i + 1, beta[i]));
                trip.push((i + 1, i, beta[i]));
            }
        }
        Self::from_triplets(n, &trip, true)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(column, value)` over row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            trip.extend(self.row(i).map(|(j, v)| (j, i, v)));
        }
        let mut t = Self::from_triplets(self.n, &trip, false).expect("transpose of a valid matrix");
        t.symmetric = self.symmetric;
        t
    }

    /// Largest `|a_ij - a_ji|` over the stored pattern and its transpose;
    /// zero exactly when the matrix equals its transpose.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// `x^T A x`, without touching any MVP counter.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>()).sum()
    }

    /// Connected components of the off-diagonal sparsity pattern.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut uf = UnionFind::new(self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if j != i && v != 0.0 {
                    uf.union(i, j);
                }
            }
        }
        uf.labels()
    }
}

/// Weighted Laplacian `D - A`: generalized degrees on the diagonal and `-w_ij`
/// off the diagonal. Every node keeps a diagonal entry, so `nnz = n + 2m`.
pub fn build_laplacian(g: &EdgeList) -> CsrMatrix {
    let n = g.n_nodes();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut degree = vec![0.0; n];
    for e in g.edges() {
        rows[e.i].push((e.j, -e.w));
        rows[e.j].push((e.i, -e.w));
        degree[e.i] += e.w;
        degree[e.j] += e.w;
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(n + 2 * g.n_edges());
    let mut values = Vec::with_capacity(n + 2 * g.n_edges());
    row_ptr.push(0);
    for (i, mut row) in rows.into_iter().enumerate() {
        row.push((i, degree[i]));
        row.sort_by_key(|&(j, _)| j);
        for (j, v) in row {
            col_idx.push(j);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    CsrMatrix { n, row_ptr, col_idx, values, symmetric: true }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }

    /// Component count and labels numbered by first appearance.
    fn labels(&mut self) -> (usize, Vec<usize>) {
        let n = self.parent.len();
        let mut map = HashMap::new();
        let mut labels = Vec::with_capacity(n);
        for x in 0..n {
            let r = self.find(x);
            let next = map.len();
            labels.push(*map.entry(r).or_insert(next));
        }
        (map.len(), labels)
    }
}

/// Number of connected components and a component label per node.
pub fn connected_components(g: &EdgeList) -> (usize, Vec<usize>) {
    let mut uf = UnionFind::new(g.n_nodes());
    for e in g.edges() {
        uf.union(e.i, e.j);
    }
    uf.labels()
}

/// Restricts `g` to its largest connected component (ties go to the lowest
/// label). Returns the subgraph and the original index of every kept node.
pub fn largest_component(g: &EdgeList) -> (EdgeList, Vec<usize>) {
    let (count, labels) = connected_components(g);
    let mut sizes = vec![0usize; count];
    for &l in &labels {
        sizes[l] += 1;
    }
    let best = (0..count).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap_or(0);
    let kept: Vec<usize> = (0..g.n_nodes()).filter(|&v| labels[v] == best).collect();
    let mut new_index = vec![usize::MAX; g.n_nodes()];
    for (k, &v) in kept.iter().enumerate() {
        new_index[v] = k;
    }
    let edges = g
        .edges()
        .iter()
        .filter(|e| labels[e.i] == best)
        .map(|e| Edge { i: new_index[e.i], j: new_index[e.j], w: e.w })
        .collect();
    (EdgeList { n_nodes: kept.len(), edges }, kept)
}

/// Matrix statistics in the layout of the usual test-matrix summary tables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphStats {
    pub n: usize,
    pub nnz: usize,
    pub anzr: f64,
    pub components: usize,
}

pub fn stats(g: &EdgeList) -> GraphStats {
    let n = g.n_nodes();
    let nnz = n + 2 * g.n_edges();
    let anzr = if n == 0 { 0.0 } else { nnz as f64 / n as f64 };
    GraphStats { n, nnz, anzr, components: connected_components(g).0 }
}
