//! Self-avoiding walk counts, the non-backtracking (Hashimoto) operator and
//! the numeric walk-count checks built on them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{ball, critical_radii_with, induced_edge_count, Bfs, Graph};
use crate::params::ModelParams;

/// Longest walk length the exact SAW counter accepts.
pub const MAX_EXACT_LENGTH: usize = 24;
/// Default DFS node budget for exact SAW counting.
pub const DEFAULT_SAW_BUDGET: u64 = 100_000_000;

/// Counts `S_v^(l)` for `l = 0..=lmax` by depth-first search.
pub fn saw_counts(g: &Graph, v: usize, lmax: usize, budget: u64) -> Result<Vec<u64>> {
    let mut counter = SawCounter::new(g.n());
    let mut left = budget;
    let mut counts = vec![0u64; lmax + 1];
    counter.count(g, v, lmax, &mut counts, &mut left)?;
    Ok(counts)
}

/// `S_v^(l)`, the number of self-avoiding walks with `l` edges starting at `v`.
pub fn saw_count(g: &Graph, v: usize, l: usize) -> Result<u64> {
    if l > MAX_EXACT_LENGTH {
        return Err(Error::ResourceLimit(format!("walk length {l} exceeds exact cap {MAX_EXACT_LENGTH}")));
    }
    Ok(saw_counts(g, v, l, DEFAULT_SAW_BUDGET)?[l])
}

/// Reusable DFS scratch for SAW counting.
pub struct SawCounter {
    on_path: Vec<bool>,
}

impl SawCounter {
    pub fn new(n: usize) -> Self {
        Self { on_path: vec![false; n] }
    }

    /// Adds `S_v^(l)` into `counts[l]` for every `l < counts.len()`.
    pub fn count(&mut self, g: &Graph, v: usize, lmax: usize, counts: &mut [u64], budget: &mut u64) -> Result<()> {
        self.on_path[v] = true;
        let r = self.dfs(g, v, 0, lmax, counts, budget);
        self.on_path[v] = false;
        r
    }

    fn dfs(&mut self, g: &Graph, x: usize, depth: usize, lmax: usize, counts: &mut [u64], budget: &mut u64) -> Result<()> {
        if *budget == 0 {
            return Err(Error::ResourceLimit("SAW enumeration exceeded its node budget".into()));
        }
        *budget -= 1;
        counts[depth] += 1;
        if depth == lmax {
            return Ok(());
        }
        for &y in g.neighbors(x) {
            if !self.on_path[y] {
                self.on_path[y] = true;
                let r = self.dfs(g, y, depth + 1, lmax, counts, budget);
                self.on_path[y] = false;
                r?;
            }
        }
        Ok(())
    }
}

/// `sup_{v in vertices} S_v^(l)` for `l = 0..=lmax`.
///
/// Vertices are expanded in decreasing order of their non-backtracking count,
/// which bounds their SAW count, so most of them are never enumerated.
pub fn sup_saw_counts(g: &Graph, vertices: &[usize], lmax: usize, budget: u64) -> Result<Vec<u64>> {
    let mut best = vec![0u64; lmax + 1];
    if vertices.is_empty() {
        return Ok(best);
    }
    best[0] = 1;
    let op = NbOperator::new(g);
    let majorant = op.all_vertex_counts_f64(lmax);
    let mut counter = SawCounter::new(g.n());
    let mut done = vec![false; g.n()];
    let mut left = budget;
    for l in 1..=lmax {
        let mut order: Vec<usize> = vertices.to_vec();
        order.sort_by(|&a, &b| majorant[l][b].total_cmp(&majorant[l][a]).then(a.cmp(&b)));
        for &v in &order {
            if majorant[l][v] <= best[l] as f64 {
                break;
            }
            if done[v] {
                continue;
            }
            done[v] = true;
            let mut counts = vec![0u64; lmax + 1];
            counter.count(g, v, lmax, &mut counts, &mut left)?;
            for (b, c) in best.iter_mut().zip(&counts) {
                *b = (*b).max(*c);
            }
        }
    }
    Ok(best)
}

/// Hashimoto matrix `W_{ef} = 1{e_2 = f_1, e != f^{-1}}` on the `2m`
/// directed edges, applied matrix-free.
///
/// Directed edges leaving `u` occupy `start[u]..start[u + 1]` in the order
/// of `u`'s sorted neighbour list.
#[derive(Debug, Clone)]
pub struct NbOperator {
    start: Vec<usize>,
    tail: Vec<usize>,
    head: Vec<usize>,
    rev: Vec<usize>,
}

impl NbOperator {
    pub fn new(g: &Graph) -> Self {
        let n = g.n();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for v in 0..n {
            start.push(start[v] + g.degree(v));
        }
        let dim = start[n];
        let mut tail = Vec::with_capacity(dim);
        let mut head = Vec::with_capacity(dim);
        for u in 0..n {
            for &v in g.neighbors(u) {
                tail.push(u);
                head.push(v);
            }
        }
        let rev = (0..dim)
            .map(|e| {
                let (u, v) = (tail[e], head[e]);
                start[v] + g.neighbors(v).binary_search(&u).expect("symmetric adjacency")
            })
            .collect();
        Self { start, tail, head, rev }
    }

    pub fn dim(&self) -> usize {
        self.tail.len()
    }

    pub fn n(&self) -> usize {
        self.start.len() - 1
    }

    pub fn tail(&self, e: usize) -> usize {
        self.tail[e]
    }

    pub fn head(&self, e: usize) -> usize {
        self.head[e]
    }

    pub fn reverse(&self, e: usize) -> usize {
        self.rev[e]
    }

    pub fn out_edges(&self, v: usize) -> std::ops::Range<usize> {
        self.start[v]..self.start[v + 1]
    }

    /// `(W x)(e) = sum_{f out of head(e)} x(f) - x(e^{-1})`.
    pub fn apply<T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + Default>(&self, x: &[T]) -> Vec<T> {
        let sums = self.vertex_sums(x, |f| f);
        (0..self.dim()).map(|e| sums[self.head[e]] - x[self.rev[e]]).collect()
    }

    /// `(W^T x)(f) = sum_{e into tail(f)} x(e) - x(f^{-1})`.
    pub fn apply_transpose<T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + Default>(
        &self,
        x: &[T],
    ) -> Vec<T> {
        let sums = self.vertex_sums(x, |f| self.rev[f]);
        (0..self.dim()).map(|f| sums[self.tail[f]] - x[self.rev[f]]).collect()
    }

    fn vertex_sums<T: Copy + std::ops::Add<Output = T> + Default>(&self, x: &[T], pick: impl Fn(usize) -> usize) -> Vec<T> {
        (0..self.n())
            .map(|v| self.out_edges(v).fold(T::default(), |acc, f| acc + x[pick(f)]))
            .collect()
    }

    fn apply_transpose_checked(&self, x: &[u128]) -> Option<Vec<u128>> {
        let mut sums = vec![0u128; self.n()];
        for (v, s) in sums.iter_mut().enumerate() {
            for f in self.out_edges(v) {
                *s = s.checked_add(x[self.rev[f]])?;
            }
        }
        Some((0..self.dim()).map(|f| sums[self.tail[f]] - x[self.rev[f]]).collect())
    }

    fn apply_checked(&self, x: &[u128]) -> Option<Vec<u128>> {
        let mut sums = vec![0u128; self.n()];
        for (v, s) in sums.iter_mut().enumerate() {
            for f in self.out_edges(v) {
                *s = s.checked_add(x[f])?;
            }
        }
        Some((0..self.dim()).map(|e| sums[self.head[e]] - x[self.rev[e]]).collect())
    }

    /// `N_v^(l)` for every vertex and `l = 0..=lmax`, as `out[l][v]`, in
    /// floating point.
    pub fn all_vertex_counts_f64(&self, lmax: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![1.0; self.n()]];
        let mut y = vec![1.0f64; self.dim()];
        for l in 1..=lmax {
            if l > 1 {
                y = self.apply(&y);
            }
            out.push((0..self.n()).map(|v| self.out_edges(v).map(|e| y[e]).sum()).collect());
        }
        out
    }

    /// Exact `N_v^(l)` for every vertex and `l = 0..=lmax`, or `None` on
    /// 128-bit overflow.
    pub fn all_vertex_counts_exact(&self, lmax: usize) -> Option<Vec<Vec<u128>>> {
        let mut out = vec![vec![1u128; self.n()]];
        let mut y = vec![1u128; self.dim()];
        for l in 1..=lmax {
            if l > 1 {
                y = self.apply_checked(&y)?;
            }
            let mut row = Vec::with_capacity(self.n());
            for v in 0..self.n() {
                let mut s = 0u128;
                for e in self.out_edges(v) {
                    s = s.checked_add(y[e])?;
                }
                row.push(s);
            }
            out.push(row);
        }
        Some(out)
    }
}

/// Non-backtracking walk counts from one source.
#[derive(Debug, Clone, Serialize)]
pub struct NbCounts {
    /// `N_x^(L)`.
    pub total: f64,
    /// `N_{xy}^(L)` indexed by `y`.
    pub per_vertex: Vec<f64>,
    /// Exact integers when no 128-bit overflow occurred.
    #[serde(skip)]
    pub exact: Option<(u128, Vec<u128>)>,
}

impl NbCounts {
    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }
}

/// `N_x^(L)` and `N_{xy}^(L)` for walks with `L` edges.
pub fn nb_counts(g: &Graph, x: usize, l: usize) -> NbCounts {
    nb_counts_with(&NbOperator::new(g), x, l)
}

pub fn nb_counts_with(op: &NbOperator, x: usize, l: usize) -> NbCounts {
    assert!(l >= 1, "walk length must be at least 1");
    let mut c = vec![0u128; op.dim()];
    for e in op.out_edges(x) {
        c[e] = 1;
    }
    let mut exact = Some(c);
    for _ in 1..l {
        exact = exact.and_then(|c| op.apply_transpose_checked(&c));
    }
    if let Some(c) = exact {
        let mut per = vec![0u128; op.n()];
        let mut overflow = false;
        for (e, &ce) in c.iter().enumerate() {
            match per[op.head(e)].checked_add(ce) {
                Some(s) => per[op.head(e)] = s,
                None => overflow = true,
            }
        }
        let total = per.iter().try_fold(0u128, |acc, &p| acc.checked_add(p));
        if let (false, Some(total)) = (overflow, total) {
            return NbCounts {
                total: total as f64,
                per_vertex: per.iter().map(|&p| p as f64).collect(),
                exact: Some((total, per)),
            };
        }
    }
    let mut c = vec![0f64; op.dim()];
    for e in op.out_edges(x) {
        c[e] = 1.0;
    }
    for _ in 1..l {
        c = op.apply_transpose(&c);
    }
    let mut per = vec![0f64; op.n()];
    for (e, &ce) in c.iter().enumerate() {
        per[op.head(e)] += ce;
    }
    NbCounts { total: per.iter().sum(), per_vertex: per, exact: None }
}

/// Vertices of the 2-core (iterated removal of degree <= 1 vertices).
pub fn two_core(g: &Graph) -> Vec<usize> {
    let mut deg: Vec<usize> = (0..g.n()).map(|v| g.degree(v)).collect();
    let mut removed = vec![false; g.n()];
    let mut stack: Vec<usize> = (0..g.n()).filter(|&v| deg[v] <= 1).collect();
    while let Some(v) = stack.pop() {
        if removed[v] {
            continue;
        }
        removed[v] = true;
        for &w in g.neighbors(v) {
            if !removed[w] {
                deg[w] -= 1;
                if deg[w] == 1 {
                    stack.push(w);
                }
            }
        }
    }
    (0..g.n()).filter(|&v| !removed[v]).collect()
}

/// Leading eigenpair of `W`.
#[derive(Debug, Clone, Serialize)]
pub struct PerronData {
    pub lambda1: f64,
    /// Right eigenvector, unit Euclidean norm.
    pub u: Vec<f64>,
    /// Left eigenvector with `<u, v> = 1`.
    pub v: Vec<f64>,
    /// `v(y) = sum_{f : f_2 = y} v(f)`.
    pub v_vertex: Vec<f64>,
    /// `||W u - lambda1 u||_2`.
    pub residual: f64,
    pub iterations: usize,
}

/// Power iteration on `W + I` and its transpose; the shift makes the
/// dominant eigenvalue strictly dominant even when `W` is periodic.
pub fn perron(op: &NbOperator, tol: f64, max_iter: usize) -> Result<PerronData> {
    if !op_has_two_core(op) {
        return Err(Error::Inapplicable("graph has an empty 2-core; W is nilpotent".into()));
    }
    let (u, lambda_u, it_u) = shifted_power(op.dim(), |x| op.apply(x), tol, max_iter)?;
    let (v, _, it_v) = shifted_power(op.dim(), |x| op.apply_transpose(x), tol, max_iter)?;
    let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let u: Vec<f64> = u.iter().map(|a| a / norm).collect();
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    let v: Vec<f64> = v.iter().map(|b| b / dot).collect();
    let wu = op.apply(&u);
    let residual = wu.iter().zip(&u).map(|(a, b)| (a - lambda_u * b).powi(2)).sum::<f64>().sqrt();
    let mut v_vertex = vec![0.0; op.n()];
    for (f, &vf) in v.iter().enumerate() {
        v_vertex[op.head(f)] += vf;
    }
    Ok(PerronData { lambda1: lambda_u, u, v, v_vertex, residual, iterations: it_u.max(it_v) })
}

fn op_has_two_core(op: &NbOperator) -> bool {
    let n = op.n();
    let mut deg: Vec<usize> = (0..n).map(|v| op.out_edges(v).len()).collect();
    let mut removed = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| deg[v] <= 1).collect();
    while let Some(v) = stack.pop() {
        if removed[v] {
            continue;
        }
        removed[v] = true;
        for e in op.out_edges(v) {
            let w = op.head(e);
            if !removed[w] {
                deg[w] -= 1;
                if deg[w] == 1 {
                    stack.push(w);
                }
            }
        }
    }
    removed.iter().any(|r| !r)
}

fn shifted_power(dim: usize, apply: impl Fn(&[f64]) -> Vec<f64>, tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64, usize)> {
    let mut x = vec![1.0 / dim as f64; dim];
    let mut previous = f64::NAN;
    for it in 1..=max_iter {
        let wx = apply(&x);
        let mut y: Vec<f64> = wx.iter().zip(&x).map(|(a, b)| a + b).collect();
        let norm: f64 = y.iter().sum();
        if norm <= 0.0 {
            return Err(Error::Inapplicable("iterate vanished; W is nilpotent on the start vector".into()));
        }
        y.iter_mut().for_each(|a| *a /= norm);
        // Rayleigh-type estimate for non-negative iterates: ||(W+I)x||_1 / ||x||_1 - 1.
        let lambda = norm - 1.0;
        let wy = apply(&y);
        let residual = wy.iter().zip(&y).map(|(a, b)| (a - lambda * b).abs()).sum::<f64>();
        x = y;
        if (lambda - previous).abs() < tol && residual <= tol * lambda.max(1.0) {
            let lambda = wy.iter().sum::<f64>();
            return Ok((x, lambda, it));
        }
        previous = lambda;
    }
    Err(Error::SpectralGapTooSmall { iterations: max_iter, estimate: previous })
}

/// Whether the rank-one residual came from all sources or from a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ResidualMode {
    /// `max_{x,y}` over every source.
    Exact,
    /// `max_x N_x^(L)` bounds the residual since `N_xy <= N_x` and `v(y)/||v||_1 <= 1`.
    Bounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma44Report {
    pub horizon: usize,
    pub lambda1: Option<f64>,
    /// Residual (exact mode) or its upper bound (bounded mode).
    pub residual: f64,
    /// Largest residual over the sampled sources.
    pub sampled_residual: f64,
    pub sampled_sources: usize,
    pub bound: f64,
    pub ok: bool,
    pub mode: ResidualMode,
    pub exact_counts: bool,
}

/// Work budget (`n * L * 2m`) under which every source is evaluated.
pub const LEMMA44_EXACT_BUDGET: f64 = 2e8;

/// Rank-one approximation `N_xy^(L) ~ v(y)/||v||_1 N_x^(L)` against the
/// additive error `d^{(K+10) log_d n / 2}`.
pub fn lemma44_residual(g: &Graph, p: &ModelParams) -> Lemma44Report {
    let n = g.n();
    let horizon = p.nb_horizon(n);
    let op = NbOperator::new(g);
    let bound = p.d.powf((p.k + 10.0) * p.log_d(n) / 2.0);
    let perron = perron(&op, 1e-12, 100_000).ok();
    let weights: Vec<f64> = match &perron {
        Some(pd) => {
            let total: f64 = pd.v_vertex.iter().sum();
            pd.v_vertex.iter().map(|a| a / total).collect()
        }
        None => vec![0.0; n],
    };
    let residual_from = |x: usize| -> (f64, bool) {
        let c = nb_counts_with(&op, x, horizon);
        let r = c
            .per_vertex
            .iter()
            .zip(&weights)
            .map(|(nxy, w)| (nxy - w * c.total).abs())
            .fold(0.0, f64::max);
        (r, c.is_exact())
    };
    let work = n as f64 * horizon as f64 * op.dim().max(1) as f64;
    let (residual, sampled_residual, sampled_sources, mode, exact_counts) = if work <= LEMMA44_EXACT_BUDGET {
        let mut worst: f64 = 0.0;
        let mut exact = true;
        for x in 0..n {
            let (r, e) = residual_from(x);
            worst = worst.max(r);
            exact &= e;
        }
        (worst, worst, n, ResidualMode::Exact, exact)
    } else {
        let totals = op.all_vertex_counts_f64(horizon);
        let upper = totals[horizon].iter().copied().fold(0.0, f64::max);
        let samples = 32.min(n);
        let mut worst: f64 = 0.0;
        let mut exact = true;
        for i in 0..samples {
            let (r, e) = residual_from(i * n / samples);
            worst = worst.max(r);
            exact &= e;
        }
        (upper.max(worst), worst, samples, ResidualMode::Bounded, exact)
    };
    Lemma44Report {
        horizon,
        lambda1: perron.map(|pd| pd.lambda1),
        residual,
        sampled_residual,
        sampled_sources,
        bound,
        ok: residual <= bound,
        mode,
        exact_counts,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma45Report {
    pub ell: usize,
    pub horizon: usize,
    pub sum: f64,
    pub bound: f64,
    pub ok: bool,
    /// False when the sum is the non-backtracking majorant.
    pub exact: bool,
}

/// `sum_y S_y^(l - L) <= d^{l - 2L/3}` for each `l` in `ells`.
pub fn lemma45_check(g: &Graph, p: &ModelParams, ells: &[usize]) -> Result<Vec<Lemma45Report>> {
    let n = g.n();
    let horizon = p.nb_horizon(n);
    let cap = p.ell_cap(n);
    let shifts: Vec<usize> = ells
        .iter()
        .map(|&l| {
            l.checked_sub(horizon)
                .ok_or_else(|| Error::InvalidArgument(format!("l = {l} is below the horizon L = {horizon}")))
        })
        .collect::<Result<_>>()?;
    let max_exact = shifts.iter().copied().filter(|&j| j <= cap).max().unwrap_or(0);
    let mut sums = vec![0u64; max_exact + 1];
    let mut counter = SawCounter::new(n);
    let mut budget = DEFAULT_SAW_BUDGET * 10;
    for y in 0..n {
        counter.count(g, y, max_exact, &mut sums, &mut budget)?;
    }
    let max_shift = shifts.iter().copied().max().unwrap_or(0);
    let majorant = if max_shift > cap { Some(NbOperator::new(g).all_vertex_counts_f64(max_shift)) } else { None };
    Ok(ells
        .iter()
        .zip(&shifts)
        .map(|(&l, &j)| {
            let (sum, exact) = if j <= cap {
                (sums[j] as f64, true)
            } else {
                (majorant.as_ref().unwrap()[j].iter().sum(), false)
            };
            let bound = p.d.powf(l as f64 - 2.0 * horizon as f64 / 3.0);
            Lemma45Report { ell: l, horizon, sum, bound, ok: sum <= bound, exact }
        })
        .collect())
}

/// Measured constants of the walk-count lemmas; nothing is asserted.
#[derive(Debug, Clone, Serialize)]
pub struct WalkConstants {
    pub horizon: usize,
    /// `(1/n) sum_x N_x^(L) / d^L`.
    pub c1: f64,
    /// `max_v N_v^(L) / (d^{L - r_v} |dB(v, r_v)|)` over vertices with finite `r_v`.
    pub growth_ratio: f64,
    /// Triple sum of the weighted walk bound divided by `ln n`.
    pub weighted_sum_over_log: f64,
    /// Largest `l - L` included exactly in the weighted sum.
    pub weighted_sum_depth: usize,
}

pub fn lemma410_412_checks(g: &Graph, p: &ModelParams) -> Result<WalkConstants> {
    let n = g.n();
    let horizon = p.nb_horizon(n);
    if g.edge_count() == 0 {
        return Ok(WalkConstants { horizon, c1: 0.0, growth_ratio: 0.0, weighted_sum_over_log: 0.0, weighted_sum_depth: 0 });
    }
    let op = NbOperator::new(g);
    let counts = op.all_vertex_counts_f64(horizon);
    let n_l = &counts[horizon];
    let c1 = n_l.iter().sum::<f64>() / n as f64 / p.d.powi(horizon as i32);

    let mut bfs = Bfs::new(n);
    let mut growth_ratio: f64 = 0.0;
    for v in 0..n {
        if let (Some(r), _) = critical_radii_with(&mut bfs, g, v, p.delta) {
            if r > horizon {
                continue;
            }
            let boundary = bfs.layers(g, v, r, usize::MAX).boundary(r).len() as f64;
            growth_ratio = growth_ratio.max(n_l[v] / (p.d.powi((horizon - r) as i32) * boundary));
        }
    }

    // sum_x N_xy^(L) = N_y^(L) by reversing walks, so the triple sum collapses.
    let depth = p.ell_cap(n);
    let mut weighted = 0.0;
    let mut counter = SawCounter::new(n);
    let mut budget = DEFAULT_SAW_BUDGET * 10;
    for y in 0..n {
        if n_l[y] == 0.0 {
            continue;
        }
        let mut s = vec![0u64; depth + 1];
        counter.count(g, y, depth, &mut s, &mut budget)?;
        for (j, &sj) in s.iter().enumerate().skip(1) {
            let l = horizon + j;
            weighted += n_l[y] * sj as f64 * p.d.powi(-(l as i32)) / l as f64;
        }
    }
    let weighted_sum_over_log = weighted / n as f64 / (n as f64).ln();
    Ok(WalkConstants { horizon, c1, growth_ratio, weighted_sum_over_log, weighted_sum_depth: depth })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Obs413 {
    pub nb_count: f64,
    pub ball_size: usize,
    pub ok: bool,
}

/// `N_v^(l) <= 2 |B(v, l)|` when `B(v, l)` has tree excess at most one.
pub fn obs413_check(g: &Graph, v: usize, l: usize) -> Result<Obs413> {
    let b = ball(g, v, l).members();
    let excess = induced_edge_count(g, &b) + 1 - b.len();
    if excess > 1 {
        return Err(Error::Inapplicable(format!("B({v},{l}) has tree excess {excess}")));
    }
    let nb_count = if l == 0 { 1.0 } else { nb_counts(g, v, l).total };
    Ok(Obs413 { nb_count, ball_size: b.len(), ok: nb_count <= 2.0 * b.len() as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saw_examples() {
        let k3 = Graph::complete(3);
        assert_eq!(saw_count(&k3, 0, 1).unwrap(), 2);
        assert_eq!(saw_count(&k3, 0, 2).unwrap(), 2);
        assert_eq!(saw_count(&Graph::path(3), 1, 2).unwrap(), 0);
        let k4 = Graph::complete(4);
        assert_eq!(saw_count(&k4, 2, 2).unwrap(), 6);
        assert_eq!(saw_count(&k4, 2, 3).unwrap(), 6);
        assert!(saw_count(&k4, 0, 25).is_err());
        assert!(saw_counts(&Graph::complete(8), 0, 7, 100).is_err());
    }

    #[test]
    fn nb_count_examples() {
        for l in 1..8 {
            assert_eq!(nb_counts(&Graph::cycle(3), 1, l).exact.unwrap().0, 2);
            assert_eq!(nb_counts(&Graph::complete(4), 0, l).exact.unwrap().0, 3 * (1 << (l - 1)));
        }
        assert_eq!(nb_counts(&Graph::path(3), 0, 3).total, 0.0);
    }

    #[test]
    fn perron_examples() {
        let c = perron(&NbOperator::new(&Graph::cycle(7)), 1e-13, 100_000).unwrap();
        assert!((c.lambda1 - 1.0).abs() < 1e-9);
        let first = c.u[0];
        assert!(c.u.iter().all(|a| (a - first).abs() < 1e-9));
        let k4 = perron(&NbOperator::new(&Graph::complete(4)), 1e-13, 10_000).unwrap();
        assert!((k4.lambda1 - 2.0).abs() < 1e-10);
        assert!(k4.residual <= 1e-10 * k4.lambda1);
        assert!(matches!(perron(&NbOperator::new(&Graph::path(6)), 1e-12, 1000), Err(Error::Inapplicable(_))));
    }

    #[test]
    fn obs413_examples() {
        let r = obs413_check(&Graph::cycle(6), 0, 4).unwrap();
        assert_eq!((r.nb_count, r.ball_size, r.ok), (2.0, 6, true));
        assert!(matches!(obs413_check(&Graph::complete(4), 0, 1), Err(Error::Inapplicable(_))));
        let t = obs413_check(&Graph::path(9), 4, 3).unwrap();
        assert_eq!(t.nb_count, 2.0);
    }
}
