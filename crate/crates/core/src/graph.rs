//! Undirected simple graphs, Erdős–Rényi sampling, balls, exploration and
//! tree excess.
//!
//! Vertices are `0..n` and the enumeration order used by the SAW-tree sign
//! rule is the natural order on indices.

use std::collections::{HashSet, VecDeque};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Undirected simple graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    m: usize,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n], m: 0 }
    }

    /// Builds a graph from an edge list, rejecting loops, duplicates and
    /// out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidArgument(format!("edge ({u},{v}) out of range for n={n}")));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop at {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for (v, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument(format!("parallel edge at vertex {v}")));
            }
        }
        Ok(Self { adj, m: edges.len() })
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("path is simple")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 vertices");
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        edges.push((0, n - 1));
        Self::from_edges(n, &edges).expect("cycle is simple")
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Self::from_edges(n, &edges).expect("complete graph is simple")
    }

    /// Star with center 0 and leaves `1..=k`.
    pub fn star(k: usize) -> Self {
        let edges: Vec<_> = (1..=k).map(|i| (0, i)).collect();
        Self::from_edges(k + 1, &edges).expect("star is simple")
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v` in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.m);
        for (u, list) in self.adj.iter().enumerate() {
            out.extend(list.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    /// Subgraph induced on `vertices`, relabelled in the given order.
    pub fn induced(&self, vertices: &[usize]) -> Graph {
        let mut index = vec![usize::MAX; self.n()];
        for (i, &v) in vertices.iter().enumerate() {
            index[v] = i;
        }
        let mut edges = Vec::new();
        for (i, &v) in vertices.iter().enumerate() {
            for &w in &self.adj[v] {
                let j = index[w];
                if j != usize::MAX && i < j {
                    edges.push((i, j));
                }
            }
        }
        Graph::from_edges(vertices.len(), &edges).expect("induced subgraph is simple")
    }

    /// Writes the text format: `n m` then one `u v` line per edge, `u < v`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n(), self.m)?;
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty graph file".into()))??;
        let mut it = header.split_whitespace();
        let mut field = |name: &str| -> Result<usize> {
            it.next()
                .ok_or_else(|| Error::Parse(format!("header missing {name}")))?
                .parse()
                .map_err(|e| Error::Parse(format!("header {name}: {e}")))
        };
        let n = field("n")?;
        let m = field("m")?;
        let mut edges = Vec::with_capacity(m);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|e| Error::Parse(format!("line {}: {e}", i + 2))))
                .collect::<Result<_>>()?;
            match nums[..] {
                [u, v] if u < v => edges.push((u, v)),
                _ => return Err(Error::Parse(format!("line {}: expected `u v` with u < v", i + 2))),
            }
        }
        if edges.len() != m {
            return Err(Error::Parse(format!("header promises {m} edges, found {}", edges.len())));
        }
        Graph::from_edges(n, &edges)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// Samples `G(n, d/n)` by geometric skipping over the pair sequence.
pub fn sample_er(n: usize, d: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(d > 0.0) || d >= n as f64 {
        return Err(Error::InvalidParameter(format!("need 0 < d < n, got d={d}, n={n}")));
    }
    let p = d / n as f64;
    let log_q = (-p).ln_1p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    // Pairs (w, v) with w < v enumerated row by row.
    let (mut v, mut w) = (1usize, -1i64);
    while v < n {
        let r: f64 = rng.random();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while v < n && w >= v as i64 {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((w as usize, v));
        }
    }
    Graph::from_edges(n, &edges)
}

/// Uniform random labelled tree on `n` vertices (Prüfer decoding).
pub fn random_tree(n: usize, rng: &mut impl Rng) -> Graph {
    if n <= 1 {
        return Graph::empty(n);
    }
    if n == 2 {
        return Graph::from_edges(2, &[(0, 1)]).unwrap();
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    let mut leaves: std::collections::BTreeSet<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    for &c in &code {
        let leaf = *leaves.iter().next().unwrap();
        leaves.remove(&leaf);
        edges.push((leaf.min(c), leaf.max(c)));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.insert(c);
        }
    }
    let rest: Vec<usize> = leaves.into_iter().collect();
    edges.push((rest[0], rest[1]));
    Graph::from_edges(n, &edges).unwrap()
}

/// Ball `B(v, r)` with its layers by distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ball {
    /// `layers[k]` holds the vertices at distance exactly `k`.
    pub layers: Vec<Vec<usize>>,
}

impl Ball {
    pub fn members(&self) -> Vec<usize> {
        self.layers.concat()
    }

    /// Vertices at distance exactly `r`; empty when the ball stopped short.
    pub fn boundary(&self, r: usize) -> &[usize] {
        self.layers.get(r).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn size(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }
}

/// Reusable BFS workspace so that per-vertex sweeps allocate once.
#[derive(Debug, Clone)]
pub struct Bfs {
    stamp: Vec<u32>,
    current: u32,
}

impl Bfs {
    pub fn new(n: usize) -> Self {
        Self { stamp: vec![0; n], current: 0 }
    }

    fn fresh(&mut self) {
        self.current = self.current.wrapping_add(1);
        if self.current == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.current = 1;
        }
    }

    /// Layers of `B(v, r)`; also stops after the first layer at which the
    /// ball holds at least `size_cap` vertices.
    pub fn layers(&mut self, g: &Graph, v: usize, r: usize, size_cap: usize) -> Ball {
        self.fresh();
        self.stamp[v] = self.current;
        let mut layers = vec![vec![v]];
        let mut total = 1;
        while layers.len() <= r && total < size_cap {
            let mut next = Vec::new();
            for &x in layers.last().unwrap() {
                for &y in g.neighbors(x) {
                    if self.stamp[y] != self.current {
                        self.stamp[y] = self.current;
                        next.push(y);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            total += next.len();
            layers.push(next);
        }
        Ball { layers }
    }
}

impl Bfs {
    /// Edges with both endpoints in the ball returned by the last `layers` call.
    pub fn edges_within_last(&self, g: &Graph, ball: &Ball) -> usize {
        ball.layers
            .iter()
            .flatten()
            .map(|&x| g.neighbors(x).iter().filter(|&&y| y > x && self.stamp[y] == self.current).count())
            .sum()
    }
}

/// `B(v, r)` and its layers.
pub fn ball(g: &Graph, v: usize, r: usize) -> Ball {
    Bfs::new(g.n()).layers(g, v, r, usize::MAX)
}

/// Connected components in order of their smallest vertex.
pub fn components(g: &Graph) -> Vec<Vec<usize>> {
    let mut seen = vec![false; g.n()];
    let mut out = Vec::new();
    for s in 0..g.n() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            let x = comp[i];
            i += 1;
            for &y in g.neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    comp.push(y);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Number of edges of `g` with both endpoints in `set`.
pub fn induced_edge_count(g: &Graph, set: &[usize]) -> usize {
    let members: HashSet<usize> = set.iter().copied().collect();
    set.iter()
        .map(|&v| g.neighbors(v).iter().filter(|&&w| w > v && members.contains(&w)).count())
        .sum()
}

/// `|E| - |V| + 1` of the subgraph induced on a connected vertex set.
pub fn tree_excess(g: &Graph, component: &[usize]) -> Result<usize> {
    if component.is_empty() {
        return Err(Error::InvalidArgument("empty vertex set".into()));
    }
    let members: HashSet<usize> = component.iter().copied().collect();
    if members.len() != component.len() {
        return Err(Error::InvalidArgument("vertex set has duplicates".into()));
    }
    let mut seen = HashSet::from([component[0]]);
    let mut stack = vec![component[0]];
    let mut edges = 0usize;
    while let Some(x) = stack.pop() {
        for &y in g.neighbors(x) {
            if members.contains(&y) {
                if y > x {
                    edges += 1;
                }
                if seen.insert(y) {
                    stack.push(y);
                }
            }
        }
    }
    if seen.len() != members.len() {
        return Err(Error::InvalidArgument("vertex set is not connected".into()));
    }
    Ok(edges + 1 - members.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Active,
    Inactive,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    Exhaustion,
    /// Stop once every active vertex sits at this distance from the root.
    RadiusCap(usize),
    /// Stop once this many vertices have been discovered (root included).
    DiscoveredCap(usize),
}

/// State of the neighbourhood exploration when it stopped.
#[derive(Debug, Clone)]
pub struct ExplorationState {
    pub statuses: Vec<Status>,
    /// Active vertices in the order they will be chosen.
    pub queue: VecDeque<usize>,
    /// Edges revealed from a chosen vertex to a non-inactive vertex.
    pub discovered_edges: Vec<(usize, usize)>,
    /// Number of discovered vertices at each distance from the root.
    pub boundary_sizes: Vec<usize>,
    /// Distance from the root for discovered vertices.
    pub distance: Vec<Option<usize>>,
    /// Number of choice steps performed.
    pub steps: usize,
    pub r_v: Option<usize>,
    pub r_v_prime: Option<usize>,
}

impl ExplorationState {
    pub fn discovered(&self) -> usize {
        self.boundary_sizes.iter().sum()
    }
}

/// Runs the FIFO exploration of the neighbourhood of `v` avoiding `avoid`.
///
/// Vertices in `avoid` start inactive, `v` starts active, all others neutral.
/// At each step the oldest active vertex is chosen, its neutral neighbours
/// become active and the chosen vertex becomes inactive.
pub fn explore(g: &Graph, v: usize, avoid: &[usize], stop: StopRule) -> ExplorationState {
    let n = g.n();
    let mut statuses = vec![Status::Neutral; n];
    for &a in avoid {
        statuses[a] = Status::Inactive;
    }
    assert_ne!(statuses[v], Status::Inactive, "root must not be avoided");
    statuses[v] = Status::Active;
    let mut distance = vec![None; n];
    distance[v] = Some(0);
    let mut queue = VecDeque::from([v]);
    let mut discovered_edges = Vec::new();
    let mut boundary_sizes = vec![1usize];
    let mut steps = 0;
    let mut discovered = 1;
    loop {
        let Some(&x) = queue.front() else { break };
        match stop {
            StopRule::RadiusCap(r) if distance[x].unwrap() >= r => break,
            StopRule::DiscoveredCap(k) if discovered >= k => break,
            _ => {}
        }
        queue.pop_front();
        steps += 1;
        let dx = distance[x].unwrap();
        for &y in g.neighbors(x) {
            match statuses[y] {
                Status::Inactive => {}
                Status::Active => discovered_edges.push((x.min(y), x.max(y))),
                Status::Neutral => {
                    discovered_edges.push((x.min(y), x.max(y)));
                    statuses[y] = Status::Active;
                    distance[y] = Some(dx + 1);
                    if boundary_sizes.len() <= dx + 1 {
                        boundary_sizes.push(0);
                    }
                    boundary_sizes[dx + 1] += 1;
                    discovered += 1;
                    queue.push_back(y);
                }
            }
        }
        statuses[x] = Status::Inactive;
    }
    ExplorationState {
        statuses,
        queue,
        discovered_edges,
        boundary_sizes,
        distance,
        steps,
        r_v: None,
        r_v_prime: None,
    }
}

/// Thresholds `ceil(n^{delta/10})` and `ceil(n^{delta/20})`.
pub fn radius_thresholds(n: usize, delta: f64) -> (usize, usize) {
    let n = n as f64;
    (n.powf(delta / 10.0).ceil() as usize, n.powf(delta / 20.0).ceil() as usize)
}

/// Least radii at which `B(v, r)` reaches the two size thresholds, `None`
/// when the component of `v` is smaller.
pub fn critical_radii(g: &Graph, v: usize, delta: f64) -> (Option<usize>, Option<usize>) {
    critical_radii_with(&mut Bfs::new(g.n()), g, v, delta)
}

pub fn critical_radii_with(bfs: &mut Bfs, g: &Graph, v: usize, delta: f64) -> (Option<usize>, Option<usize>) {
    let (t, t_prime) = radius_thresholds(g.n(), delta);
    let ball = bfs.layers(g, v, usize::MAX, t.max(t_prime));
    let first_reaching = |threshold: usize| {
        let mut total = 0;
        for (r, layer) in ball.layers.iter().enumerate() {
            total += layer.len();
            if total >= threshold {
                return Some(r);
            }
        }
        None
    };
    (first_reaching(t), first_reaching(t_prime))
}

/// One connected graph on `n` vertices per isomorphism class (`n <= 7`).
pub fn connected_graphs(n: usize) -> Vec<Graph> {
    assert!(n <= 7, "exhaustive enumeration is limited to n <= 7");
    if n == 0 {
        return Vec::new();
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let mut pair_index = vec![vec![0usize; n]; n];
    for (i, &(u, v)) in pairs.iter().enumerate() {
        pair_index[u][v] = i;
        pair_index[v][u] = i;
    }
    let perms = permutations(n);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        let edges: Vec<_> = pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e).collect();
        let g = Graph::from_edges(n, &edges).unwrap();
        if components(&g).len() != 1 {
            continue;
        }
        let canonical = perms
            .iter()
            .map(|p| edges.iter().fold(0u64, |acc, &(u, v)| acc | 1 << pair_index[p[u]][p[v]]))
            .min()
            .unwrap();
        if seen.insert(canonical) {
            out.push(g);
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            let j = if k % 2 == 0 { i } else { 0 };
            a.swap(j, k - 1);
        }
    }
    heap(n, &mut current, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vertex_has_no_edges() {
        assert_eq!(sample_er(1, 0.5, 7).unwrap().edge_count(), 0);
        assert!(sample_er(5, 5.0, 1).is_err());
        assert!(sample_er(5, 0.0, 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(sample_er(500, 2.0, 9).unwrap(), sample_er(500, 2.0, 9).unwrap());
        assert_ne!(sample_er(500, 2.0, 9).unwrap(), sample_er(500, 2.0, 10).unwrap());
    }

    #[test]
    fn two_vertex_edge_frequency() {
        let d = 0.8;
        let trials = 100_000;
        let hits = (0..trials).filter(|&s| sample_er(2, d, s).unwrap().edge_count() == 1).count();
        let p = d / 2.0;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - trials as f64 * p).abs() < 3.0 * sd, "hits {hits}");
    }

    #[test]
    fn mean_degree_matches_binomial() {
        let n = 10_000usize;
        let g = sample_er(n, 2.0, 3).unwrap();
        let p = 2.0 / n as f64;
        let pairs = (n * (n - 1) / 2) as f64;
        let mean = 2.0 * g.edge_count() as f64 / n as f64;
        let sd_mean = 2.0 * (pairs * p * (1.0 - p)).sqrt() / n as f64;
        assert!((mean - 2.0 * (1.0 - 1.0 / n as f64)).abs() < 3.0 * sd_mean, "mean {mean}");
    }

    #[test]
    fn ball_examples() {
        let p = Graph::path(3);
        let b = ball(&p, 0, 1);
        assert_eq!(b.members(), vec![0, 1]);
        assert_eq!(b.boundary(1), &[1]);
        let b0 = ball(&p, 1, 0);
        assert_eq!(b0.members(), vec![1]);
        assert_eq!(b0.boundary(0), &[1]);
        let t = ball(&Graph::complete(3), 0, 2);
        assert_eq!(t.size(), 3);
        assert!(t.boundary(2).is_empty());
    }

    #[test]
    fn tree_excess_examples() {
        assert_eq!(tree_excess(&Graph::path(5), &[0, 1, 2, 3, 4]).unwrap(), 0);
        assert_eq!(tree_excess(&Graph::complete(3), &[0, 1, 2]).unwrap(), 1);
        assert_eq!(tree_excess(&Graph::complete(4), &[0, 1, 2, 3]).unwrap(), 3);
        assert!(tree_excess(&Graph::path(5), &[0, 2]).is_err());
    }

    #[test]
    fn explore_star_and_triangle() {
        let k = 6;
        let s = explore(&Graph::star(k), 0, &[], StopRule::Exhaustion);
        assert_eq!(s.boundary_sizes, vec![1, k]);
        assert_eq!(s.steps, k + 1);
        let first = explore(&Graph::star(k), 0, &[], StopRule::RadiusCap(1));
        assert_eq!(first.steps, 1);
        assert_eq!(first.queue.len(), k);

        let t = explore(&Graph::complete(3), 0, &[], StopRule::Exhaustion);
        let mut e = t.discovered_edges.clone();
        e.sort();
        assert_eq!(e, vec![(0, 1), (0, 2), (1, 2)]);

        let g = Graph::complete(4);
        let only = explore(&g, 0, &[1, 2, 3], StopRule::Exhaustion);
        assert_eq!(only.discovered(), 1);
        assert!(only.discovered_edges.is_empty());

        let capped = explore(&Graph::path(10), 0, &[], StopRule::DiscoveredCap(4));
        assert_eq!(capped.discovered(), 4);
    }

    #[test]
    fn critical_radii_examples() {
        let g = Graph::empty(10);
        assert_eq!(critical_radii(&g, 3, 0.1), (None, None));
        let k = Graph::complete(50);
        assert_eq!(critical_radii(&k, 0, 0.1).0, Some(1));
        // n = 100, delta = 2: thresholds are ceil(100^0.2) = 3 and ceil(100^0.1) = 2.
        let p = Graph::path(100);
        assert_eq!(radius_thresholds(100, 2.0), (3, 2));
        assert_eq!(critical_radii(&p, 0, 2.0), (Some(2), Some(1)));
        assert_eq!(critical_radii(&p, 50, 2.0), (Some(1), Some(1)));
    }

    #[test]
    fn connected_graph_counts() {
        let counts: Vec<usize> = (1..=6).map(|n| connected_graphs(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 6, 21, 112]);
    }

    #[test]
    fn round_trip_text_format() {
        let g = sample_er(200, 3.0, 5).unwrap();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        let h = Graph::read_from(&buf[..]).unwrap();
        assert_eq!(g, h);
        let mut again = Vec::new();
        h.write_to(&mut again).unwrap();
        assert_eq!(buf, again);
        assert!(Graph::read_from("3 1\n2 1\n".as_bytes()).is_err());
        assert!(Graph::read_from("3 2\n0 1\n".as_bytes()).is_err());
    }
}
