//! Undirected connected graphs and the textual specs that name them.

use crate::rng::SimRng;
use std::collections::VecDeque;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph needs at least 2 nodes, got {0}")]
    TooSmall(usize),
    #[error("ring needs at least 3 nodes, got {0}")]
    RingTooSmall(usize),
    #[error("edge ({0}, {1}) is out of range for {2} nodes")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is not connected")]
    NotConnected,
    #[error("edge probability {0} is outside (0, 1]")]
    BadProbability(f64),
    #[error("no connected graph found for gnp(n={n}, p={p}) after {tries} tries")]
    GnpExhausted { n: usize, p: f64, tries: u32 },
    #[error("cannot parse graph spec {0:?}: {1}")]
    BadSpec(String, String),
    #[error("bad edge list line {line}: {reason}")]
    BadEdgeLine { line: usize, reason: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Simple undirected connected graph over nodes `0..n`.
///
/// Construction validates simplicity and connectivity, so every `Graph`
/// value is usable as a protocol communication graph.
#[derive(Debug, Clone)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooSmall(n));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::EdgeOutOfRange(u, v, n));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for (u, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                let v = list.windows(2).find(|w| w[0] == w[1]).unwrap()[0];
                return Err(GraphError::DuplicateEdge(u, v));
            }
        }
        let g = Graph { adj };
        if g.bfs_distances(0).contains(&usize::MAX) {
            return Err(GraphError::NotConnected);
        }
        Ok(g)
    }

    pub fn ring(n: usize) -> Result<Self, GraphError> {
        if n < 3 {
            return Err(GraphError::RingTooSmall(n));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Self::from_edges(n, &edges)
    }

    /// `rows x cols` grid, node `r * cols + c` at position (r, c).
    pub fn grid(rows: usize, cols: usize) -> Result<Self, GraphError> {
        let n = rows.checked_mul(cols).unwrap_or(0);
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        Self::from_edges(n, &edges)
    }

    /// Uniform random recursive tree: node i attaches to a uniformly chosen
    /// earlier node.
    pub fn random_tree(n: usize, seed: u64) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooSmall(n));
        }
        let mut rng = SimRng::new(seed);
        let edges: Vec<_> = (1..n).map(|i| (rng.below(i as u64) as usize, i)).collect();
        Self::from_edges(n, &edges)
    }

    /// Erdos-Renyi G(n, p), redrawn until connected (bounded retries).
    pub fn gnp(n: usize, p: f64, seed: u64) -> Result<Self, GraphError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(GraphError::BadProbability(p));
        }
        if n < 2 {
            return Err(GraphError::TooSmall(n));
        }
        const TRIES: u32 = 1000;
        let mut rng = SimRng::new(seed);
        for _ in 0..TRIES {
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.chance(p) {
                        edges.push((u, v));
                    }
                }
            }
            match Self::from_edges(n, &edges) {
                Ok(g) => return Ok(g),
                Err(GraphError::NotConnected) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(GraphError::GnpExhausted { n, p, tries: TRIES })
    }

    /// Reads a whitespace-separated edge list, one `u v` pair per line.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_file(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut edges = Vec::new();
        let mut max_node = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize, GraphError> {
                tok.and_then(|t| t.parse().ok())
                    .ok_or_else(|| GraphError::BadEdgeLine {
                        line: lineno + 1,
                        reason: format!("expected two node ids, got {line:?}"),
                    })
            };
            let u = parse(parts.next())?;
            let v = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(GraphError::BadEdgeLine {
                    line: lineno + 1,
                    reason: format!("trailing tokens in {line:?}"),
                });
            }
            max_node = max_node.max(u).max(v);
            edges.push((u, v));
        }
        Self::from_edges(max_node + 1, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|l| l.len()).sum::<usize>() / 2
    }

    /// BFS distances from `src`; unreachable nodes get `usize::MAX`.
    pub fn bfs_distances(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.adj.len()];
        let mut queue = VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn eccentricity(&self, v: usize) -> usize {
        *self.bfs_distances(v).iter().max().unwrap()
    }

    pub fn diameter(&self) -> usize {
        (0..self.node_count())
            .map(|v| self.eccentricity(v))
            .max()
            .unwrap()
    }

    /// A node of maximum eccentricity, smallest id first.
    pub fn peripheral_node(&self) -> usize {
        let mut best = 0;
        let mut best_ecc = 0;
        for v in 0..self.node_count() {
            let e = self.eccentricity(v);
            if e > best_ecc {
                best = v;
                best_ecc = e;
            }
        }
        best
    }

    /// Two nodes realizing the diameter, lexicographically smallest pair.
    pub fn diameter_pair(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_d = 0;
        for u in 0..self.node_count() {
            let dist = self.bfs_distances(u);
            for (v, &d) in dist.iter().enumerate().skip(u + 1) {
                if d != usize::MAX && d > best_d {
                    best_d = d;
                    best = (u, v);
                }
            }
        }
        best
    }
}

/// Parsed graph description. The textual grammar is
/// `ring:N`, `path:N`, `complete:N`, `grid:RxC`, `tree:N:SEED`,
/// `gnp:N:P:SEED`, and `file:PATH`.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Ring(usize),
    Path(usize),
    Complete(usize),
    Grid(usize, usize),
    Tree(usize, u64),
    Gnp(usize, f64, u64),
    File(PathBuf),
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph, GraphError> {
        match self {
            GraphSpec::Ring(n) => Graph::ring(*n),
            GraphSpec::Path(n) => Graph::path(*n),
            GraphSpec::Complete(n) => Graph::complete(*n),
            GraphSpec::Grid(r, c) => Graph::grid(*r, *c),
            GraphSpec::Tree(n, seed) => Graph::random_tree(*n, *seed),
            GraphSpec::Gnp(n, p, seed) => Graph::gnp(*n, *p, *seed),
            GraphSpec::File(path) => Graph::from_file(path),
        }
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::Ring(n) => write!(f, "ring:{n}"),
            GraphSpec::Path(n) => write!(f, "path:{n}"),
            GraphSpec::Complete(n) => write!(f, "complete:{n}"),
            GraphSpec::Grid(r, c) => write!(f, "grid:{r}x{c}"),
            GraphSpec::Tree(n, seed) => write!(f, "tree:{n}:{seed}"),
            GraphSpec::Gnp(n, p, seed) => write!(f, "gnp:{n}:{p}:{seed}"),
            GraphSpec::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

impl FromStr for GraphSpec {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| GraphError::BadSpec(s.to_string(), reason.to_string());
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| bad("expected kind:args"))?;
        let parse_usize =
            |tok: &str| tok.parse::<usize>().map_err(|_| bad("bad node count"));
        let parse_seed = |tok: &str| tok.parse::<u64>().map_err(|_| bad("bad seed"));
        match kind {
            "ring" => Ok(GraphSpec::Ring(parse_usize(rest)?)),
            "path" => Ok(GraphSpec::Path(parse_usize(rest)?)),
            "complete" => Ok(GraphSpec::Complete(parse_usize(rest)?)),
            "grid" => {
                let (r, c) = rest.split_once('x').ok_or_else(|| bad("expected RxC"))?;
                Ok(GraphSpec::Grid(parse_usize(r)?, parse_usize(c)?))
            }
            "tree" => {
                let (n, seed) = rest
                    .split_once(':')
                    .ok_or_else(|| bad("expected tree:N:SEED"))?;
                Ok(GraphSpec::Tree(parse_usize(n)?, parse_seed(seed)?))
            }
            "gnp" => {
                let mut parts = rest.splitn(3, ':');
                let n = parse_usize(parts.next().ok_or_else(|| bad("missing N"))?)?;
                let p = parts
                    .next()
                    .ok_or_else(|| bad("missing P"))?
                    .parse::<f64>()
                    .map_err(|_| bad("bad probability"))?;
                let seed = parse_seed(parts.next().ok_or_else(|| bad("missing SEED"))?)?;
                Ok(GraphSpec::Gnp(n, p, seed))
            }
            "file" => Ok(GraphSpec::File(PathBuf::from(rest))),
            _ => Err(bad("unknown graph kind")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[allow(clippy::needless_range_loop)]
    fn floyd_warshall(g: &Graph) -> Vec<Vec<usize>> {
        let n = g.node_count();
        const INF: usize = usize::MAX / 4;
        let mut d = vec![vec![INF; n]; n];
        for v in 0..n {
            d[v][v] = 0;
            for &u in g.neighbors(v) {
                d[v][u] = 1;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
                }
            }
        }
        d
    }

    #[test]
    fn generators_have_expected_shape() {
        let ring = Graph::ring(6).unwrap();
        assert_eq!(ring.node_count(), 6);
        assert_eq!(ring.edge_count(), 6);
        assert!(ring.adj.iter().all(|l| l.len() == 2));

        let path = Graph::path(5).unwrap();
        assert_eq!(path.edge_count(), 4);
        assert_eq!(path.diameter(), 4);

        let complete = Graph::complete(6).unwrap();
        assert_eq!(complete.edge_count(), 15);
        assert_eq!(complete.diameter(), 1);

        let grid = Graph::grid(3, 3).unwrap();
        assert_eq!(grid.node_count(), 9);
        assert_eq!(grid.edge_count(), 12);
        assert_eq!(grid.diameter(), 4);

        let tree = Graph::random_tree(10, 7).unwrap();
        assert_eq!(tree.edge_count(), 9);
    }

    #[test]
    fn construction_rejects_malformed_graphs() {
        assert!(matches!(
            Graph::from_edges(1, &[]),
            Err(GraphError::TooSmall(1))
        ));
        assert!(matches!(
            Graph::from_edges(3, &[(0, 0)]),
            Err(GraphError::SelfLoop(0))
        ));
        assert!(matches!(
            Graph::from_edges(3, &[(0, 1), (1, 0), (1, 2)]),
            Err(GraphError::DuplicateEdge(_, _))
        ));
        assert!(matches!(
            Graph::from_edges(4, &[(0, 1), (2, 3)]),
            Err(GraphError::NotConnected)
        ));
        assert!(matches!(
            Graph::from_edges(2, &[(0, 5)]),
            Err(GraphError::EdgeOutOfRange(0, 5, 2))
        ));
        assert!(Graph::ring(2).is_err());
    }

    #[test]
    fn gnp_is_connected_and_reproducible() {
        let a = Graph::gnp(8, 0.4, 3).unwrap();
        let b = Graph::gnp(8, 0.4, 3).unwrap();
        assert_eq!(a.adj, b.adj);
        assert!(a.bfs_distances(0).iter().all(|&d| d != usize::MAX));
        assert!(Graph::gnp(8, 0.0, 3).is_err());
    }

    #[test]
    fn bfs_agrees_with_floyd_warshall() {
        for g in [
            Graph::ring(8).unwrap(),
            Graph::path(7).unwrap(),
            Graph::grid(2, 4).unwrap(),
            Graph::gnp(8, 0.4, 11).unwrap(),
            Graph::random_tree(8, 5).unwrap(),
        ] {
            let oracle = floyd_warshall(&g);
            for (v, row) in oracle.iter().enumerate() {
                assert_eq!(&g.bfs_distances(v), row, "source {v}");
            }
        }
    }

    #[test]
    fn diameter_and_periphery() {
        let path = Graph::path(6).unwrap();
        assert_eq!(path.eccentricity(0), 5);
        assert_eq!(path.eccentricity(2), 3);
        assert_eq!(path.diameter(), 5);
        assert_eq!(path.peripheral_node(), 0);
        assert_eq!(path.diameter_pair(), (0, 5));
        let ring = Graph::ring(8).unwrap();
        assert_eq!(ring.diameter(), 4);
        assert_eq!(ring.diameter_pair(), (0, 4));
    }

    #[test]
    fn spec_grammar_round_trips() {
        for s in [
            "ring:8",
            "path:12",
            "complete:6",
            "grid:3x3",
            "tree:10:42",
            "gnp:8:0.4:7",
            "file:/tmp/edges.txt",
        ] {
            let spec: GraphSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("ring".parse::<GraphSpec>().is_err());
        assert!("blob:5".parse::<GraphSpec>().is_err());
        assert!("grid:3".parse::<GraphSpec>().is_err());
        assert!("gnp:8:0.4".parse::<GraphSpec>().is_err());
    }

    #[test]
    fn edge_list_files_parse() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# a triangle plus a tail").unwrap();
        writeln!(file, "0 1").unwrap();
        writeln!(file).unwrap();
        writeln!(file, "1 2").unwrap();
        writeln!(file, "0 2").unwrap();
        writeln!(file, "2 3").unwrap();
        let g = Graph::from_file(file.path()).unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 4);

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, "0 1 2").unwrap();
        assert!(matches!(
            Graph::from_file(bad.path()),
            Err(GraphError::BadEdgeLine { line: 1, .. })
        ));
    }
}
