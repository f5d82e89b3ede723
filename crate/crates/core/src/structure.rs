//! The A/B vertex partition, the subgraph `H` spanned by edges touching `A`,
//! verifiers for the four structural properties and the no-tangle events.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{components, critical_radii_with, Bfs, Graph};
use crate::params::ModelParams;
use crate::walks::{sup_saw_counts, NbOperator, SawCounter, DEFAULT_SAW_BUDGET};

/// Vertex split into `B` (regular ball growth) and `A`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub in_b: Vec<bool>,
    /// Edges with at least one endpoint in `A`, `u < v`.
    pub h_edges: Vec<(usize, usize)>,
    /// Components of `H`; every `A` vertex lies in exactly one.
    pub h_components: Vec<Vec<usize>>,
    /// `max_{r <= R} |dB(v, r)| d^{-r}` with `R = floor(delta log_d n)`.
    pub growth_stat: Vec<f64>,
    pub radius: usize,
}

impl Partition {
    /// Partition with prescribed labels; `growth_stat` is left empty.
    pub fn from_labels(g: &Graph, in_b: Vec<bool>) -> Self {
        assert_eq!(in_b.len(), g.n());
        let mut p = Self { in_b, h_edges: Vec::new(), h_components: Vec::new(), growth_stat: Vec::new(), radius: 0 };
        p.assemble_h(g);
        p
    }

    pub fn a_vertices(&self) -> Vec<usize> {
        (0..self.in_b.len()).filter(|&v| !self.in_b[v]).collect()
    }

    pub fn b_vertices(&self) -> Vec<usize> {
        (0..self.in_b.len()).filter(|&v| self.in_b[v]).collect()
    }

    /// `H` as a graph on all `n` vertices.
    pub fn h_graph(&self, g: &Graph) -> Graph {
        Graph::from_edges(g.n(), &self.h_edges).expect("H is a subgraph of g")
    }

    fn assemble_h(&mut self, g: &Graph) {
        self.h_edges = g.edges().into_iter().filter(|&(u, v)| !self.in_b[u] || !self.in_b[v]).collect();
        let h = self.h_graph(g);
        self.h_components = components(&h)
            .into_iter()
            .filter(|c| c.len() > 1 || !self.in_b[c[0]])
            .collect();
    }
}

/// `x` is in `B` iff `max_{r <= floor(delta log_d n)} |dB(x, r)| d^{-r} <= C`.
pub fn partition(g: &Graph, p: &ModelParams) -> Partition {
    let radius = p.partition_radius(g.n());
    let growth_stat: Vec<f64> = (0..g.n())
        .into_par_iter()
        .map_init(
            || Bfs::new(g.n()),
            |bfs, v| {
                let ball = bfs.layers(g, v, radius, usize::MAX);
                ball.layers
                    .iter()
                    .enumerate()
                    .map(|(r, layer)| layer.len() as f64 * p.d.powi(-(r as i32)))
                    .fold(0.0, f64::max)
            },
        )
        .collect();
    let in_b = growth_stat.iter().map(|&s| s <= p.c).collect();
    let mut part = Partition { in_b, h_edges: Vec::new(), h_components: Vec::new(), growth_stat, radius };
    part.assemble_h(g);
    part
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop1 {
    pub ok: bool,
    pub max_tree_excess: usize,
    /// A component of `H` with tree excess above one.
    pub witness: Option<Vec<usize>>,
}

/// Every component of `H` has tree excess at most one.
pub fn check_prop1(g: &Graph, part: &Partition) -> Prop1 {
    let mut worst = 0;
    let mut witness = None;
    for comp in &part.h_components {
        let tx = h_excess(g, part, comp);
        if tx > worst {
            worst = tx;
            if tx > 1 {
                witness = Some(comp.clone());
            }
        }
    }
    Prop1 { ok: worst <= 1, max_tree_excess: worst, witness }
}

fn h_excess(g: &Graph, part: &Partition, comp: &[usize]) -> usize {
    let edges: usize = comp
        .iter()
        .map(|&u| g.neighbors(u).iter().filter(|&&v| v > u && (!part.in_b[u] || !part.in_b[v])).count())
        .sum();
    edges + 1 - comp.len()
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop2 {
    pub ok: bool,
    /// Largest `sum_{v in path} deg_g(v)` over self-avoiding paths in `H`.
    pub max_degree_sum: usize,
    /// `C ln n`.
    pub threshold: f64,
    pub witness: Option<Vec<usize>>,
    pub mode: Mode,
}

/// Node budget for exhaustive path search in components with tree excess above one.
const PATH_SEARCH_BUDGET: u64 = 2_000_000;

/// Degree sums along self-avoiding paths of `H` stay below `C ln n`.
pub fn check_prop2(g: &Graph, part: &Partition, p: &ModelParams) -> Prop2 {
    let threshold = p.c * (g.n() as f64).ln();
    let h = part.h_graph(g);
    let weight = |v: usize| g.degree(v);
    let mut best = 0usize;
    let mut best_path = Vec::new();
    let mut mode = Mode::Exact;
    for comp in &part.h_components {
        let (value, path, m) = match h_excess(g, part, comp) {
            0 => {
                let (v, path) = tree_max_path(&h, comp, None, &weight);
                (v, path, Mode::Exact)
            }
            1 => {
                let mut top = (0, Vec::new());
                for e in cycle_edges(&h, comp) {
                    let cand = tree_max_path(&h, comp, Some(e), &weight);
                    if cand.0 > top.0 {
                        top = cand;
                    }
                }
                (top.0, top.1, Mode::Exact)
            }
            _ => exhaustive_max_path(&h, comp, &weight),
        };
        if m == Mode::Sampled {
            mode = Mode::Sampled;
        }
        if value > best {
            best = value;
            best_path = path;
        }
    }
    let ok = best as f64 <= threshold;
    Prop2 { ok, max_degree_sum: best, threshold, witness: (!ok).then_some(best_path), mode }
}

/// Maximum vertex-weighted path in a tree component, optionally with one edge removed.
fn tree_max_path(h: &Graph, comp: &[usize], banned: Option<(usize, usize)>, weight: &impl Fn(usize) -> usize) -> (usize, Vec<usize>) {
    let usable = |a: usize, b: usize| banned != Some((a.min(b), a.max(b)));
    let root = comp[0];
    let mut parent = std::collections::HashMap::from([(root, usize::MAX)]);
    let mut order = vec![root];
    let mut i = 0;
    while i < order.len() {
        let x = order[i];
        i += 1;
        for &y in h.neighbors(x) {
            if usable(x, y) && !parent.contains_key(&y) {
                parent.insert(y, x);
                order.push(y);
            }
        }
    }
    let mut down = std::collections::HashMap::new();
    let mut next = std::collections::HashMap::new();
    let mut best = (0usize, root, None, None);
    for &x in order.iter().rev() {
        let mut top: [(usize, Option<usize>); 2] = [(0, None), (0, None)];
        for &y in h.neighbors(x) {
            if usable(x, y) && parent[&y] == x {
                let dy = down[&y];
                if dy > top[0].0 {
                    top[1] = top[0];
                    top[0] = (dy, Some(y));
                } else if dy > top[1].0 {
                    top[1] = (dy, Some(y));
                }
            }
        }
        down.insert(x, weight(x) + top[0].0);
        next.insert(x, top[0].1);
        let through = weight(x) + top[0].0 + top[1].0;
        if through > best.0 {
            best = (through, x, top[0].1, top[1].1);
        }
    }
    let chain = |mut c: Option<usize>| {
        let mut out = Vec::new();
        while let Some(y) = c {
            out.push(y);
            c = next[&y];
        }
        out
    };
    let mut path: Vec<usize> = chain(best.2).into_iter().rev().collect();
    path.push(best.1);
    path.extend(chain(best.3));
    (best.0, path)
}

/// Edges on the unique cycle of a unicyclic component.
fn cycle_edges(h: &Graph, comp: &[usize]) -> Vec<(usize, usize)> {
    let members: std::collections::HashSet<usize> = comp.iter().copied().collect();
    let mut deg: std::collections::HashMap<usize, usize> = comp.iter().map(|&v| (v, h.degree(v))).collect();
    let mut stack: Vec<usize> = comp.iter().copied().filter(|v| deg[v] <= 1).collect();
    let mut removed = std::collections::HashSet::new();
    while let Some(v) = stack.pop() {
        if !removed.insert(v) {
            continue;
        }
        for &w in h.neighbors(v) {
            if members.contains(&w) && !removed.contains(&w) {
                let d = deg.get_mut(&w).unwrap();
                *d -= 1;
                if *d == 1 {
                    stack.push(w);
                }
            }
        }
    }
    let core: Vec<usize> = comp.iter().copied().filter(|v| !removed.contains(v)).collect();
    let mut edges = Vec::new();
    for &u in &core {
        for &v in h.neighbors(u) {
            if v > u && !removed.contains(&v) {
                edges.push((u, v));
            }
        }
    }
    edges
}

fn exhaustive_max_path(h: &Graph, comp: &[usize], weight: &impl Fn(usize) -> usize) -> (usize, Vec<usize>, Mode) {
    let mut on_path = std::collections::HashSet::new();
    let mut best = (0usize, Vec::new());
    let mut budget = PATH_SEARCH_BUDGET;
    // Explicit stack of (vertex, next neighbour index, accumulated weight).
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for &v in comp {
        on_path.insert(v);
        stack.push((v, 0, weight(v)));
        while let Some(top) = stack.last_mut() {
            let (x, i, acc) = *top;
            if i == 0 {
                if budget == 0 {
                    return (best.0, best.1, Mode::Sampled);
                }
                budget -= 1;
                if acc > best.0 {
                    best = (acc, stack.iter().map(|f| f.0).collect());
                }
            }
            let top = stack.last_mut().unwrap();
            match h.neighbors(x).get(i) {
                Some(&y) => {
                    top.1 += 1;
                    if on_path.insert(y) {
                        stack.push((y, 0, acc + weight(y)));
                    }
                }
                None => {
                    on_path.remove(&x);
                    stack.pop();
                }
            }
        }
    }
    (best.0, best.1, Mode::Exact)
}

/// How the good-edge property is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prop3Mode {
    /// Branch and bound over every self-avoiding path with the window length.
    Exact { budget: u64 },
    /// `k` random paths through `A` vertices, grown by uniform non-backtracking steps.
    Sampled { k: usize, seed: u64 },
}

impl Prop3Mode {
    pub const DEFAULT_EXACT_BUDGET: u64 = 100_000_000;
    pub const DEFAULT_SAMPLES: usize = 100_000;
    /// Largest `n` for which the default mode is exact.
    pub const EXACT_MAX_N: usize = 2000;

    pub fn default_for(n: usize, seed: u64) -> Self {
        if n <= Self::EXACT_MAX_N {
            Prop3Mode::Exact { budget: Self::DEFAULT_EXACT_BUDGET }
        } else {
            Prop3Mode::Sampled { k: Self::DEFAULT_SAMPLES, seed }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop3 {
    pub ok: bool,
    /// Window length `ceil(delta log_d n)`.
    pub window: usize,
    /// Smallest fraction of edges with both endpoints in `B` over the paths examined.
    pub min_good_fraction: f64,
    /// At least 80% on every window, which forces 60% on all longer paths.
    pub long_paths_certified: bool,
    pub witness: Option<Vec<usize>>,
    pub mode: Mode,
}

/// Every self-avoiding path with `ceil(delta log_d n)` edges has at least
/// 60% of its edges inside `B`.
pub fn check_prop3(g: &Graph, part: &Partition, p: &ModelParams, mode: Prop3Mode) -> Result<Prop3> {
    let window = p.window_length(g.n());
    let a = part.a_vertices();
    let (worst_bad, witness, m) = if a.is_empty() {
        (0, None, Mode::Exact)
    } else {
        match mode {
            Prop3Mode::Exact { budget } => {
                let (bad, path) = max_bad_path_exact(g, part, &a, window, budget)?;
                (bad, path, Mode::Exact)
            }
            Prop3Mode::Sampled { k, seed } => {
                let (bad, path) = max_bad_path_sampled(g, part, &a, window, k, seed);
                (bad, path, Mode::Sampled)
            }
        }
    };
    let min_good_fraction = 1.0 - worst_bad as f64 / window as f64;
    let ok = (window - worst_bad) as f64 >= 0.6 * window as f64 - 1e-12;
    Ok(Prop3 {
        ok,
        window,
        min_good_fraction,
        long_paths_certified: min_good_fraction >= 0.8 - 1e-12,
        witness: if ok { None } else { witness },
        mode: m,
    })
}

fn is_bad(part: &Partition, u: usize, v: usize) -> bool {
    !part.in_b[u] || !part.in_b[v]
}

fn max_bad_path_exact(g: &Graph, part: &Partition, a: &[usize], window: usize, budget: u64) -> Result<(usize, Option<Vec<usize>>)> {
    // Paths with a bad edge meet A, so they stay within distance `window` of A.
    let mut dist = vec![usize::MAX; g.n()];
    let mut queue = std::collections::VecDeque::new();
    for &v in a {
        dist[v] = 0;
        queue.push_back(v);
    }
    while let Some(x) = queue.pop_front() {
        if dist[x] == window {
            continue;
        }
        for &y in g.neighbors(x) {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    struct Search<'a> {
        g: &'a Graph,
        part: &'a Partition,
        near: &'a [usize],
        window: usize,
        on_path: Vec<bool>,
        path: Vec<usize>,
        best: usize,
        best_path: Option<Vec<usize>>,
        budget: u64,
    }
    impl Search<'_> {
        fn go(&mut self, x: usize, bad: usize) -> Result<()> {
            if self.budget == 0 {
                return Err(Error::ResourceLimit("good-edge path search exceeded its node budget".into()));
            }
            self.budget -= 1;
            let len = self.path.len() - 1;
            if len == self.window {
                if bad > self.best || self.best_path.is_none() {
                    self.best = bad;
                    self.best_path = Some(self.path.clone());
                }
                return Ok(());
            }
            if self.best_path.is_some() && bad + (self.window - len) <= self.best {
                return Ok(());
            }
            for &y in self.g.neighbors(x) {
                if !self.on_path[y] && self.near[y] != usize::MAX {
                    self.on_path[y] = true;
                    self.path.push(y);
                    let r = self.go(y, bad + is_bad(self.part, x, y) as usize);
                    self.path.pop();
                    self.on_path[y] = false;
                    r?;
                }
            }
            Ok(())
        }
    }
    let mut s = Search { g, part, near: &dist, window, on_path: vec![false; g.n()], path: Vec::new(), best: 0, best_path: None, budget };
    for v in 0..g.n() {
        if dist[v] == usize::MAX || s.best == window {
            continue;
        }
        s.on_path[v] = true;
        s.path.push(v);
        let r = s.go(v, 0);
        s.path.pop();
        s.on_path[v] = false;
        r?;
    }
    Ok((s.best, s.best_path))
}

fn max_bad_path_sampled(g: &Graph, part: &Partition, a: &[usize], window: usize, k: usize, seed: u64) -> (usize, Option<Vec<usize>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (0usize, None);
    let mut on_path = vec![false; g.n()];
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < k && attempts < 20 * k {
        attempts += 1;
        let start = a[rng.random_range(0..a.len())];
        let left_len = rng.random_range(0..=window);
        let mut left = vec![start];
        on_path[start] = true;
        let grown = grow_arm(g, &mut left, left_len, &mut on_path, &mut rng)
            && {
                let mut right = vec![start];
                let ok = grow_arm(g, &mut right, window - left_len, &mut on_path, &mut rng);
                left.reverse();
                left.extend_from_slice(&right[1..]);
                ok
            };
        for &v in &left {
            on_path[v] = false;
        }
        if !grown {
            continue;
        }
        accepted += 1;
        let bad = left.windows(2).filter(|w| is_bad(part, w[0], w[1])).count();
        if bad > best.0 || best.1.is_none() {
            best = (bad, Some(left));
        }
    }
    best
}

fn grow_arm(g: &Graph, arm: &mut Vec<usize>, len: usize, on_path: &mut [bool], rng: &mut impl Rng) -> bool {
    for _ in 0..len {
        let x = *arm.last().unwrap();
        let options: Vec<usize> = g.neighbors(x).iter().copied().filter(|&y| !on_path[y]).collect();
        if options.is_empty() {
            return false;
        }
        let y = options[rng.random_range(0..options.len())];
        on_path[y] = true;
        arm.push(y);
    }
    true
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop4 {
    pub ok: bool,
    /// `S_v^(l) <= C' d^l` for `v in B`, `1 <= l <= floor(delta log_d n)`.
    pub short_ok: bool,
    /// `max S_v^(l) / d^l` over that range (0 when empty).
    pub short_ratio: f64,
    pub short_witness: Option<(usize, usize)>,
    /// Weighted sum `sum_l d^{-l} / l sup_{v in B} S_v^(l)`.
    pub weighted_sum: f64,
    /// `C'' ln n`.
    pub weighted_bound: f64,
    pub sum_ok: bool,
    /// Lengths up to this value use exact SAW counts.
    pub exact_up_to: usize,
    /// Lengths beyond `exact_up_to` use `sup_{v in B} N_v^(l)` up to this value.
    pub tail_truncated_at: usize,
    /// `sup_{v in B} S_v^(l)` (or its majorant) for `l = 0..=tail_truncated_at`.
    pub sup_counts: Vec<f64>,
}

/// SAW growth bounds for `B` vertices.
pub fn check_prop4(g: &Graph, part: &Partition, p: &ModelParams) -> Result<Prop4> {
    let n = g.n();
    let b = part.b_vertices();
    let radius = p.partition_radius(n);
    let ln_n = (n as f64).ln();

    let short: Vec<(f64, usize, usize)> = b
        .par_iter()
        .map_init(
            || SawCounter::new(n),
            |counter, &v| -> Result<(f64, usize, usize)> {
                let mut counts = vec![0u64; radius + 1];
                let mut budget = DEFAULT_SAW_BUDGET;
                counter.count(g, v, radius, &mut counts, &mut budget)?;
                Ok((1..=radius)
                    .map(|l| (counts[l] as f64 / p.d.powi(l as i32), v, l))
                    .fold((0.0, v, 0), |a, b| if b.0 > a.0 { b } else { a }))
            },
        )
        .collect::<Result<_>>()?;
    let (short_ratio, wv, wl) = short.into_iter().fold((0.0, 0, 0), |a, b| if b.0 > a.0 { b } else { a });
    let short_ok = short_ratio <= p.c_prime;

    let largest_component = components(g).iter().map(Vec::len).max().unwrap_or(0);
    let walk_limit = largest_component.saturating_sub(1);
    let exact_up_to = p.ell_cap(n).min(walk_limit);
    let tail_truncated_at = p.nb_horizon(n).max(exact_up_to).min(walk_limit);
    let exact = sup_saw_counts(g, &b, exact_up_to, DEFAULT_SAW_BUDGET)?;
    let mut sup_counts: Vec<f64> = exact.iter().map(|&c| c as f64).collect();
    if tail_truncated_at > exact_up_to {
        let majorant = NbOperator::new(g).all_vertex_counts_f64(tail_truncated_at);
        for row in majorant.iter().take(tail_truncated_at + 1).skip(exact_up_to + 1) {
            sup_counts.push(b.iter().map(|&v| row[v]).fold(0.0, f64::max));
        }
    }
    let weighted_sum: f64 = sup_counts.iter().enumerate().skip(1).map(|(l, &s)| s * p.d.powi(-(l as i32)) / l as f64).sum();
    let weighted_bound = p.c_double_prime * ln_n;
    let sum_ok = weighted_sum <= weighted_bound;
    Ok(Prop4 {
        ok: short_ok && sum_ok,
        short_ok,
        short_ratio,
        short_witness: (!short_ok).then_some((wv, wl)),
        weighted_sum,
        weighted_bound,
        sum_ok,
        exact_up_to,
        tail_truncated_at,
        sup_counts,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub prop1: Prop1,
    pub prop2: Prop2,
    pub prop3: Prop3,
    pub prop4: Prop4,
    pub a_size: usize,
    pub verification_mode: Mode,
}

impl PropertyReport {
    pub fn flags(&self) -> [bool; 4] {
        [self.prop1.ok, self.prop2.ok, self.prop3.ok, self.prop4.ok]
    }

    pub fn all_ok(&self) -> bool {
        self.flags().iter().all(|&f| f)
    }
}

pub fn verify_structure(g: &Graph, part: &Partition, p: &ModelParams, mode: Prop3Mode) -> Result<PropertyReport> {
    let prop1 = check_prop1(g, part);
    let prop2 = check_prop2(g, part, p);
    let prop3 = check_prop3(g, part, p, mode)?;
    let prop4 = check_prop4(g, part, p)?;
    let verification_mode = if prop2.mode == Mode::Sampled || prop3.mode == Mode::Sampled { Mode::Sampled } else { Mode::Exact };
    Ok(PropertyReport { prop1, prop2, prop3, prop4, a_size: part.a_vertices().len(), verification_mode })
}

#[derive(Debug, Clone, Serialize)]
pub struct NoTangleReport {
    pub a1_ok: bool,
    pub a2_ok: bool,
    pub a3_ok: bool,
    pub a4_ok: bool,
    pub a1_offenders: Vec<usize>,
    pub a2_offenders: Vec<usize>,
    pub a3_offenders: Vec<usize>,
    pub a4_offenders: Vec<usize>,
    /// `max_v sup_r |B(v, r)| d^{-r} / log_d n`.
    pub empirical_c: f64,
    /// `min_v |dB(v, r_v)| n^{-delta/10}` over vertices with finite `r_v`.
    pub empirical_c0: Option<f64>,
}

impl NoTangleReport {
    pub fn flags(&self) -> [bool; 4] {
        [self.a1_ok, self.a2_ok, self.a3_ok, self.a4_ok]
    }
}

/// Checks the four no-tangle events with constants `c` and `c0`.
pub fn check_no_tangle(g: &Graph, p: &ModelParams, c: f64, c0: f64) -> NoTangleReport {
    let n = g.n();
    let radius = p.partition_radius(n);
    let log_d_n = p.log_d(n);
    let scale = (n as f64).powf(p.delta / 10.0);
    let comps = components(g);
    let mut comp_excess = vec![0usize; n];
    for comp in &comps {
        let edges: usize = comp.iter().map(|&v| g.degree(v)).sum::<usize>() / 2;
        let tx = edges + 1 - comp.len();
        for &v in comp {
            comp_excess[v] = tx;
        }
    }
    struct Row {
        growth: f64,
        tx_ball: usize,
        tx_radius: usize,
        boundary: Option<usize>,
    }
    let rows: Vec<Row> = (0..n)
        .into_par_iter()
        .map_init(
            || Bfs::new(n),
            |bfs, v| {
                let ball = bfs.layers(g, v, radius, usize::MAX);
                let mut size = 0usize;
                let mut growth: f64 = 0.0;
                for (r, layer) in ball.layers.iter().enumerate() {
                    size += layer.len();
                    growth = growth.max(size as f64 * p.d.powi(-(r as i32)));
                }
                let tx_ball = bfs.edges_within_last(g, &ball) + 1 - ball.size();
                let (r_v, _) = critical_radii_with(bfs, g, v, p.delta);
                let (tx_radius, boundary) = match r_v {
                    Some(r) => {
                        let ball = bfs.layers(g, v, r, usize::MAX);
                        (bfs.edges_within_last(g, &ball) + 1 - ball.size(), Some(ball.boundary(r).len()))
                    }
                    None => (comp_excess[v], None),
                };
                Row { growth, tx_ball, tx_radius, boundary }
            },
        )
        .collect();
    let a1: Vec<usize> = (0..n).filter(|&v| rows[v].growth > c * log_d_n).collect();
    let a2: Vec<usize> = (0..n).filter(|&v| rows[v].tx_ball > 1).collect();
    let a3: Vec<usize> = (0..n).filter(|&v| rows[v].tx_radius > 1).collect();
    let a4: Vec<usize> = (0..n).filter(|&v| rows[v].boundary.is_some_and(|b| (b as f64) < c0 * scale)).collect();
    let empirical_c = rows.iter().map(|r| r.growth).fold(0.0, f64::max) / log_d_n;
    let empirical_c0 = rows.iter().filter_map(|r| r.boundary).min().map(|b| b as f64 / scale);
    NoTangleReport {
        a1_ok: a1.is_empty(),
        a2_ok: a2.is_empty(),
        a3_ok: a3.is_empty(),
        a4_ok: a4.is_empty(),
        a1_offenders: a1,
        a2_offenders: a2,
        a3_offenders: a3,
        a4_offenders: a4,
        empirical_c,
        empirical_c0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: f64, c: f64) -> ModelParams {
        ModelParams { c, ..ModelParams::critical(d).unwrap() }
    }

    #[test]
    fn empty_graph_is_all_b() {
        let g = Graph::empty(50);
        let part = partition(&g, &params(2.0, 4.0));
        assert!(part.in_b.iter().all(|&b| b));
        assert!(part.h_edges.is_empty() && part.h_components.is_empty());
    }

    #[test]
    fn star_center_lands_in_a() {
        // Star with 12 leaves inside 1000 isolated vertices; radius floor(0.1 log_2 1012) = 0
        // would hide it, so use delta = 0.2 to reach radius 1.
        let mut edges: Vec<(usize, usize)> = (1..=12).map(|i| (0, i)).collect();
        edges.push((100, 101));
        let g = Graph::from_edges(1012, &edges).unwrap();
        let p = ModelParams { delta: 0.2, ..params(2.0, 4.0) };
        assert_eq!(p.partition_radius(1012), 1);
        let part = partition(&g, &p);
        assert!(!part.in_b[0]);
        assert!(part.growth_stat[0] >= 12.0 / 2.0);
        assert!(part.in_b[1] && part.in_b[100]);
        assert_eq!(part.h_components, vec![(0..=12).collect::<Vec<_>>()]);
    }

    #[test]
    fn complete_k5_all_in_b() {
        let g = Graph::complete(5);
        let p = ModelParams { delta: 0.5, ..params(2.0, 2.0) };
        assert!(p.partition_radius(5) >= 1);
        let part = partition(&g, &p);
        assert!(part.in_b.iter().all(|&b| b));
        assert_eq!(part.growth_stat[0], 2.0);
    }

    #[test]
    fn prop1_examples() {
        let bowtie = Graph::from_edges(5, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]).unwrap();
        let part = Partition::from_labels(&bowtie, vec![false; 5]);
        let r = check_prop1(&bowtie, &part);
        assert!(!r.ok);
        assert_eq!(r.max_tree_excess, 2);
        assert_eq!(r.witness.unwrap(), vec![0, 1, 2, 3, 4]);

        let tri = Graph::complete(3);
        let part = Partition::from_labels(&tri, vec![false, true, true]);
        assert!(check_prop1(&tri, &part).ok);
    }

    #[test]
    fn prop2_examples() {
        let g = Graph::empty(4);
        let part = Partition::from_labels(&g, vec![true; 4]);
        let r = check_prop2(&g, &part, &params(2.0, 1.0));
        assert!(r.ok && r.max_degree_sum == 0);

        // H is the path 1-2-3 inside the path 0..4.
        let g = Graph::path(5);
        let part = Partition::from_labels(&g, vec![true, true, false, true, true]);
        let r = check_prop2(&g, &part, &params(2.0, 10.0));
        assert_eq!(r.max_degree_sum, 6);
        let weights = [2, 3, 2];
        let (best, path) = tree_max_path(&Graph::path(3), &[0, 1, 2], None, &|v: usize| weights[v]);
        assert_eq!((best, path.len()), (7, 3));

        let tri = Graph::complete(3);
        let part = Partition::from_labels(&tri, vec![false, false, false]);
        assert_eq!(check_prop2(&tri, &part, &params(2.0, 10.0)).max_degree_sum, 6);
    }

    #[test]
    fn prop3_examples() {
        let p = ModelParams { delta: 9.5 / 11.0_f64.log2(), ..params(2.0, 1.0) };
        let g = Graph::path(11);
        assert_eq!(p.window_length(11), 10);
        let all_b = Partition::from_labels(&g, vec![true; 11]);
        let r = check_prop3(&g, &all_b, &p, Prop3Mode::Exact { budget: 1_000_000 }).unwrap();
        assert!(r.ok && r.min_good_fraction == 1.0);

        let alternating = Partition::from_labels(&g, (0..11).map(|i| i % 2 == 0).collect());
        let r = check_prop3(&g, &alternating, &p, Prop3Mode::Exact { budget: 1_000_000 }).unwrap();
        assert!(!r.ok && r.min_good_fraction == 0.0);
        assert_eq!(r.witness.unwrap().len(), 11);

        let mut labels = vec![true; 11];
        labels[5] = false;
        let single = Partition::from_labels(&g, labels);
        let r = check_prop3(&g, &single, &p, Prop3Mode::Exact { budget: 1_000_000 }).unwrap();
        assert!((r.min_good_fraction - 0.8).abs() < 1e-12);
        let s = check_prop3(&g, &single, &p, Prop3Mode::Sampled { k: 200, seed: 1 }).unwrap();
        assert!((s.min_good_fraction - 0.8).abs() < 1e-12);
    }

    #[test]
    fn prop4_examples() {
        let p = ModelParams { delta: 0.5, c_prime: 1.0, c_double_prime: 1.0, ..params(2.0, 4.0) };
        let iso = Graph::empty(30);
        let part = Partition::from_labels(&iso, vec![true; 30]);
        let r = check_prop4(&iso, &part, &p).unwrap();
        assert!(r.ok && r.weighted_sum == 0.0);

        let n = 12;
        let cyc = Graph::cycle(n);
        let part = Partition::from_labels(&cyc, vec![true; n]);
        let r = check_prop4(&cyc, &part, &p).unwrap();
        let oracle: f64 = (1..=r.tail_truncated_at).map(|l| 2.0 * 0.5f64.powi(l as i32) / l as f64).sum();
        assert!((r.weighted_sum - oracle).abs() < 1e-12);
        assert!(r.weighted_sum <= 2.0 * (1.0f64 / (1.0 - 0.5)).ln());
    }

    #[test]
    fn no_tangle_examples() {
        let p = ModelParams { delta: 1.0, ..params(2.0, 4.0) };
        let tree = Graph::path(40);
        let r = check_no_tangle(&tree, &p, 10.0, 0.1);
        assert!(r.a2_ok && r.a3_ok);

        let mut edges = Graph::complete(4).edges();
        edges.extend((3..39).map(|i| (i, i + 1)));
        let g = Graph::from_edges(40, &edges).unwrap();
        let r = check_no_tangle(&g, &p, 10.0, 0.1);
        assert!(!r.a2_ok);
        assert!(r.a2_offenders.contains(&0));
    }
}
