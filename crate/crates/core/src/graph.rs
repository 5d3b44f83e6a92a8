//! Simple undirected graphs, the DIMACS clique format, and clique utilities.
//!
//! Vertices are 0-based internally; DIMACS files are 1-based.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    m: usize,
    words: usize,
    bits: Vec<u64>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from 0-based edges. Duplicates are merged; self-loops
    /// and out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge ({u}, {v}) out of range for {n} vertices")));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop at vertex {u}")));
            }
            g.insert(u, v);
        }
        g.finish();
        Ok(g)
    }

    fn empty(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Self {
            n,
            m: 0,
            words,
            bits: vec![0; n * words],
            adj: vec![Vec::new(); n],
        }
    }

    /// Returns false if the edge was already present.
    fn insert(&mut self, u: usize, v: usize) -> bool {
        if self.has_edge(u, v) {
            return false;
        }
        self.bits[u * self.words + v / 64] |= 1 << (v % 64);
        self.bits[v * self.words + u / 64] |= 1 << (u % 64);
        self.adj[u].push(v);
        self.adj[v].push(u);
        self.m += 1;
        true
    }

    fn finish(&mut self) {
        for list in &mut self.adj {
            list.sort_unstable();
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.bits[u * self.words + v / 64] >> (v % 64) & 1 == 1
    }

    /// Sorted neighbours of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    fn row(&self, v: usize) -> &[u64] {
        &self.bits[v * self.words..(v + 1) * self.words]
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| self.adj[u].iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }
}

/// A parsed DIMACS file and any non-fatal irregularities found in it.
#[derive(Clone, Debug)]
pub struct ParsedGraph {
    pub graph: Graph,
    pub warnings: Vec<String>,
}

/// Parses the DIMACS clique format: `c` comments, a `p edge N M` header, and
/// `e u v` lines with 1-based vertices.
pub fn parse_dimacs(text: &str) -> Result<ParsedGraph> {
    let mut graph: Option<Graph> = None;
    let mut declared_m = 0usize;
    let mut warnings = Vec::new();
    let mut duplicates = 0usize;
    let parse_err = |line: usize, message: String| Error::Parse { line, message };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("c") => {}
            Some("p") => {
                if graph.is_some() {
                    return Err(parse_err(line_no, "duplicate problem line".into()));
                }
                let kind = fields.next();
                if !matches!(kind, Some("edge" | "col")) {
                    return Err(parse_err(line_no, format!("expected `p edge N M`, got `{line}`")));
                }
                let n = parse_count(fields.next(), line_no, "vertex count")?;
                declared_m = parse_count(fields.next(), line_no, "edge count")?;
                graph = Some(Graph::empty(n));
            }
            Some("e") => {
                let g = graph
                    .as_mut()
                    .ok_or_else(|| parse_err(line_no, "edge before problem line".into()))?;
                let u = parse_vertex(fields.next(), g.n, line_no)?;
                let v = parse_vertex(fields.next(), g.n, line_no)?;
                if fields.next().is_some() {
                    return Err(parse_err(line_no, format!("trailing fields in `{line}`")));
                }
                if u == v {
                    warnings.push(format!("line {line_no}: self-loop on vertex {} ignored", u + 1));
                } else if !g.insert(u, v) {
                    duplicates += 1;
                }
            }
            Some(tag) => {
                return Err(parse_err(line_no, format!("unknown line type `{tag}`")));
            }
            None => unreachable!("blank lines are skipped"),
        }
    }

    let mut graph = graph.ok_or_else(|| Error::Parse {
        line: text.lines().count(),
        message: "missing problem line".into(),
    })?;
    graph.finish();
    if duplicates > 0 {
        warnings.push(format!("{duplicates} duplicate edge(s) merged"));
    }
    if declared_m != graph.m && declared_m != graph.m + duplicates {
        warnings.push(format!(
            "header declares {declared_m} edges but {} distinct edges were read",
            graph.m
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ParsedGraph { graph, warnings })
}

fn parse_count(field: Option<&str>, line: usize, what: &str) -> Result<usize> {
    field.and_then(|f| f.parse().ok()).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing or malformed {what}"),
    })
}

fn parse_vertex(field: Option<&str>, n: usize, line: usize) -> Result<usize> {
    let v: usize = parse_count(field, line, "vertex")?;
    if v == 0 || v > n {
        return Err(Error::Parse {
            line,
            message: format!("vertex {v} out of range 1..={n}"),
        });
    }
    Ok(v - 1)
}

/// Reads a DIMACS file, transparently decompressing gzip input.
pub fn read_dimacs(path: &Path) -> Result<ParsedGraph> {
    let bytes = std::fs::read(path)?;
    let text = if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut s = String::new();
        GzDecoder::new(bytes.as_slice()).read_to_string(&mut s)?;
        s
    } else {
        String::from_utf8(bytes).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?
    };
    parse_dimacs(&text)
}

pub fn to_dimacs(g: &Graph) -> String {
    let mut out = format!("p edge {} {}\n", g.n, g.m);
    for (u, v) in g.edges() {
        writeln!(out, "e {} {}", u + 1, v + 1).unwrap();
    }
    out
}

/// Whether `vertices` are pairwise adjacent, and how many there are.
pub fn verify_clique(g: &Graph, vertices: &[usize]) -> Result<(bool, usize)> {
    if let Some(&v) = vertices.iter().find(|&&v| v >= g.n) {
        return Err(Error::invalid(format!("vertex {v} out of range for {} vertices", g.n)));
    }
    let ok = vertices
        .iter()
        .enumerate()
        .all(|(k, &u)| vertices[k + 1..].iter().all(|&v| u != v && g.has_edge(u, v)));
    Ok((ok, vertices.len()))
}

/// Thresholds `q` at 0.5, then repeatedly drops the lowest-probability vertex
/// that still misses an edge to another kept vertex (ties drop the higher
/// index). The result is always a clique, in increasing vertex order.
pub fn round_and_repair(g: &Graph, q: &[f64]) -> Vec<usize> {
    let mut keep: Vec<bool> = (0..g.n).map(|i| q.get(i).is_some_and(|&p| p >= 0.5)).collect();
    let mut mask = vec![0u64; g.words];
    for (i, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
        mask[i / 64] |= 1 << (i % 64);
    }
    let mut size = keep.iter().filter(|&&k| k).count();
    loop {
        let mut worst: Option<usize> = None;
        for i in (0..g.n).filter(|&i| keep[i]) {
            let linked: usize = g
                .row(i)
                .iter()
                .zip(&mask)
                .map(|(a, b)| (a & b).count_ones() as usize)
                .sum();
            if linked + 1 < size {
                worst = match worst {
                    Some(w) if q[w] < q[i] => Some(w),
                    _ => Some(i),
                };
            }
        }
        match worst {
            Some(w) => {
                keep[w] = false;
                mask[w / 64] &= !(1 << (w % 64));
                size -= 1;
            }
            None => break,
        }
    }
    (0..g.n).filter(|&i| keep[i]).collect()
}

/// Erdős–Rényi graph with edge probability `p_edge` plus a clique on `k`
/// random vertices. Returns the graph and the sorted planted set.
pub fn planted_clique(n: usize, k: usize, p_edge: f64, rng: &mut RngStream) -> Result<(Graph, Vec<usize>)> {
    if k > n {
        return Err(Error::invalid(format!("clique size {k} exceeds {n} vertices")));
    }
    if !(p_edge > 0.0 && p_edge < 1.0) {
        return Err(Error::invalid(format!("edge probability {p_edge} must lie in (0, 1)")));
    }
    let mut g = Graph::empty(n);
    for u in 0..n {
        for v in u + 1..n {
            if rng.bernoulli(p_edge) {
                g.insert(u, v);
            }
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + rng.below(n - i);
        perm.swap(i, j);
    }
    let mut planted = perm[..k].to_vec();
    planted.sort_unstable();
    for (a, &u) in planted.iter().enumerate() {
        for &v in &planted[a + 1..] {
            g.insert(u, v);
        }
    }
    g.finish();
    Ok((g, planted))
}

/// Exact maximum clique by branch and bound with greedy-colouring bounds.
/// Exponential in the worst case; intended for graphs of a few hundred
/// vertices at most.
pub fn max_clique(g: &Graph) -> Vec<usize> {
    let mut all = vec![0u64; g.words];
    for i in 0..g.n {
        all[i / 64] |= 1 << (i % 64);
    }
    let mut best = Vec::new();
    let mut current = Vec::new();
    expand(g, &mut current, all, &mut best);
    best.sort_unstable();
    best
}

fn members(set: &[u64]) -> impl Iterator<Item = usize> + '_ {
    set.iter().enumerate().flat_map(|(w, &word)| {
        let mut bits = word;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let t = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(w * 64 + t)
        })
    })
}

fn expand(g: &Graph, current: &mut Vec<usize>, mut candidates: Vec<u64>, best: &mut Vec<usize>) {
    // greedy colouring: class k holds an independent set, so a clique uses at
    // most one vertex per class
    let mut order = Vec::new();
    let mut uncolored = candidates.clone();
    let mut color = 0;
    while uncolored.iter().any(|&w| w != 0) {
        color += 1;
        let mut open = uncolored.clone();
        loop {
            let Some(v) = members(&open).next() else { break };
            open[v / 64] &= !(1 << (v % 64));
            uncolored[v / 64] &= !(1 << (v % 64));
            for (o, r) in open.iter_mut().zip(g.row(v)) {
                *o &= !r;
            }
            order.push((v, color));
        }
    }
    for &(v, c) in order.iter().rev() {
        if current.len() + c <= best.len() {
            return;
        }
        current.push(v);
        let next: Vec<u64> = candidates.iter().zip(g.row(v)).map(|(a, b)| a & b).collect();
        if next.iter().all(|&w| w == 0) {
            if current.len() > best.len() {
                *best = current.clone();
            }
        } else {
            expand(g, current, next, best);
        }
        current.pop();
        candidates[v / 64] &= !(1 << (v % 64));
    }
}
