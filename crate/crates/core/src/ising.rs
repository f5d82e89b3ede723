//! Exact Ising measures on small graphs, tree correlations, the tree of
//! self-avoiding walks and the correlation inequalities checked on trees.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{components, Graph};

/// Largest number of free spins summed exhaustively.
pub const MAX_FREE_SPINS: usize = 24;

/// Ising model with per-edge couplings and extended-real fields.
///
/// A field of `+inf` (`-inf`) clamps the spin to `+1` (`-1`).
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    graph: Graph,
    /// `couplings[v][i]` is the coupling on the edge to `graph.neighbors(v)[i]`.
    couplings: Vec<Vec<f64>>,
    fields: Vec<f64>,
}

impl IsingModel {
    pub fn uniform(graph: Graph, beta: f64) -> Self {
        Self::with_coupling_fn(graph, |_, _| beta)
    }

    /// Couplings from a symmetric function of the endpoints.
    pub fn with_coupling_fn(graph: Graph, beta: impl Fn(usize, usize) -> f64) -> Self {
        let couplings = (0..graph.n())
            .map(|v| graph.neighbors(v).iter().map(|&w| beta(v.min(w), v.max(w))).collect())
            .collect();
        let fields = vec![0.0; graph.n()];
        Self { graph, couplings, fields }
    }

    pub fn with_fields(mut self, fields: Vec<f64>) -> Self {
        assert_eq!(fields.len(), self.graph.n());
        self.fields = fields;
        self
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn field(&self, v: usize) -> f64 {
        self.fields[v]
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn set_field(&mut self, v: usize, h: f64) {
        self.fields[v] = h;
    }

    /// Coupling on edge `{u, v}`; panics if the edge is absent.
    pub fn coupling(&self, u: usize, v: usize) -> f64 {
        let i = self.graph.neighbors(u).binary_search(&v).expect("edge present");
        self.couplings[u][i]
    }

    /// `(neighbor, coupling)` pairs of `v`.
    pub fn couplings_of(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.graph.neighbors(v).iter().copied().zip(self.couplings[v].iter().copied())
    }

    pub fn max_coupling(&self) -> f64 {
        self.couplings.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn is_clamped(&self, v: usize) -> bool {
        self.fields[v].is_infinite()
    }

    /// Copy with `v` clamped to `spin`.
    pub fn conditioned(&self, v: usize, spin: i8) -> Self {
        let mut m = self.clone();
        m.fields[v] = if spin > 0 { f64::INFINITY } else { f64::NEG_INFINITY };
        m
    }

    pub fn free_vertices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&v| !self.is_clamped(v)).collect()
    }

    /// Reads `{"n": .., "edges": [[u, v, beta]], "fields": {"v": h}}`; field
    /// values may be the strings `"+inf"`/`"-inf"`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let n = file.n.unwrap_or_else(|| {
            let top = file.edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0);
            let f = file.fields.keys().filter_map(|k| k.parse::<usize>().ok()).map(|v| v + 1).max().unwrap_or(0);
            top.max(f)
        });
        let pairs: Vec<(usize, usize)> = file.edges.iter().map(|&(u, v, _)| (u.min(v), u.max(v))).collect();
        let graph = Graph::from_edges(n, &pairs)?;
        let betas: BTreeMap<(usize, usize), f64> = file.edges.iter().map(|&(u, v, b)| ((u.min(v), u.max(v)), b)).collect();
        if betas.values().any(|&b| !(b >= 0.0) || !b.is_finite()) {
            return Err(Error::InvalidParameter("couplings must be finite and non-negative".into()));
        }
        let mut model = Self::with_coupling_fn(graph, |u, v| betas[&(u, v)]);
        for (k, h) in file.fields {
            let v: usize = k.parse().map_err(|_| Error::Parse(format!("field key {k} is not a vertex")))?;
            if v >= n {
                return Err(Error::Parse(format!("field on vertex {v} outside 0..{n}")));
            }
            model.fields[v] = h.value()?;
        }
        Ok(model)
    }
}

#[derive(Deserialize)]
struct ModelFile {
    n: Option<usize>,
    edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    fields: BTreeMap<String, FieldValue>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FieldValue {
    Number(f64),
    Text(String),
}

impl FieldValue {
    fn value(&self) -> Result<f64> {
        match self {
            FieldValue::Number(h) => Ok(*h),
            FieldValue::Text(s) => match s.as_str() {
                "+inf" | "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => other.parse().map_err(|_| Error::Parse(format!("bad field value {other}"))),
            },
        }
    }
}

/// Exact Gibbs distribution over the free spins.
///
/// Configuration index bit `i` is set when `free[i]` has spin `+1`.
#[derive(Debug, Clone)]
pub struct GibbsTable {
    pub free: Vec<usize>,
    pub probabilities: Vec<f64>,
    /// Log partition function over free spins; infinite clamping fields are
    /// excluded from the energy.
    pub log_z: f64,
    clamped: Vec<Option<i8>>,
}

impl GibbsTable {
    pub fn spin(&self, config: usize, v: usize) -> i8 {
        match self.clamped[v] {
            Some(s) => s,
            None => {
                let i = self.free.binary_search(&v).expect("free vertex");
                if config >> i & 1 == 1 {
                    1
                } else {
                    -1
                }
            }
        }
    }

    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        pairwise_sum(&self.probabilities.iter().enumerate().map(|(c, p)| p * f(c)).collect::<Vec<_>>())
    }

    pub fn mean(&self, v: usize) -> f64 {
        self.expect(|c| self.spin(c, v) as f64)
    }

    pub fn correlation(&self, u: usize, v: usize) -> f64 {
        self.expect(|c| (self.spin(c, u) * self.spin(c, v)) as f64)
    }

    pub fn covariance(&self, u: usize, v: usize) -> f64 {
        self.correlation(u, v) - self.mean(u) * self.mean(v)
    }

    /// `P(sigma_v = +)`.
    pub fn prob_plus(&self, v: usize) -> f64 {
        self.expect(|c| (self.spin(c, v) > 0) as u8 as f64)
    }
}

/// Sum in fixed pairwise order so results do not depend on scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `log(sum exp(x))` computed stably.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + pairwise_sum(&xs.iter().map(|x| (x - m).exp()).collect::<Vec<_>>()).ln()
}

/// Log-weights `beta-energy` of every free configuration, indexed as in [`GibbsTable`].
pub fn log_weights(model: &IsingModel) -> Result<(Vec<usize>, Vec<f64>)> {
    let free = model.free_vertices();
    let k = free.len();
    if k > MAX_FREE_SPINS {
        return Err(Error::ResourceLimit(format!("{k} free spins exceed the exact limit {MAX_FREE_SPINS}")));
    }
    let n = model.n();
    let mut spin: Vec<f64> = (0..n).map(|v| if model.fields[v] == f64::NEG_INFINITY { -1.0 } else { 1.0 }).collect();
    for &v in &free {
        spin[v] = -1.0;
    }
    let mut energy = 0.0;
    for v in 0..n {
        for (w, b) in model.couplings_of(v) {
            if w > v {
                energy += b * spin[v] * spin[w];
            }
        }
        if !model.is_clamped(v) {
            energy += model.fields[v] * spin[v];
        }
    }
    let mut out = vec![0.0; 1 << k];
    out[0] = energy;
    // Gray-code walk: step i flips the free spin at the lowest set bit of i.
    let mut config = 0usize;
    for i in 1..(1usize << k) {
        let bit = i.trailing_zeros() as usize;
        let v = free[bit];
        let local: f64 = model.couplings_of(v).map(|(w, b)| b * spin[w]).sum::<f64>() + model.fields[v];
        energy -= 2.0 * spin[v] * local;
        spin[v] = -spin[v];
        config ^= 1 << bit;
        out[config] = energy;
    }
    Ok((free, out))
}

pub fn gibbs_exact(model: &IsingModel) -> Result<GibbsTable> {
    let (free, lw) = log_weights(model)?;
    let log_z = log_sum_exp(&lw);
    let probabilities = lw.iter().map(|w| (w - log_z).exp()).collect();
    let clamped = (0..model.n())
        .map(|v| match model.fields[v] {
            f if f == f64::INFINITY => Some(1),
            f if f == f64::NEG_INFINITY => Some(-1),
            _ => None,
        })
        .collect();
    Ok(GibbsTable { free, probabilities, log_z, clamped })
}

/// `sum_y E(sigma_x sigma_y)`, including `y = x`.
pub fn susceptibility(model: &IsingModel, x: usize) -> Result<f64> {
    let table = gibbs_exact(model)?;
    Ok(susceptibility_from(&table, model.n(), x))
}

fn susceptibility_from(table: &GibbsTable, n: usize, x: usize) -> f64 {
    (0..n).map(|y| table.correlation(x, y)).sum()
}

/// `sup_x sum_y E(sigma_x sigma_y)` with the maximizing vertex.
pub fn max_susceptibility(model: &IsingModel) -> Result<(f64, usize)> {
    let table = gibbs_exact(model)?;
    Ok((0..model.n())
        .map(|x| (susceptibility_from(&table, model.n(), x), x))
        .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a }))
}

fn is_tree(g: &Graph) -> bool {
    g.n() > 0 && g.edge_count() + 1 == g.n() && components(g).len() == 1
}

/// `prod_{e on the u-v path} tanh(beta_e)` on a zero-field tree.
pub fn tree_correlation(model: &IsingModel, u: usize, v: usize) -> Result<f64> {
    if !is_tree(model.graph()) {
        return Err(Error::InvalidArgument("tree correlation needs a tree".into()));
    }
    if model.fields.iter().any(|&h| h != 0.0) {
        return Err(Error::InvalidArgument("tree correlation needs zero field".into()));
    }
    let n = model.n();
    let mut parent = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    seen[u] = true;
    let mut stack = vec![u];
    while let Some(x) = stack.pop() {
        for &y in model.graph.neighbors(x) {
            if !seen[y] {
                seen[y] = true;
                parent[y] = x;
                stack.push(y);
            }
        }
    }
    let mut product = 1.0;
    let mut x = v;
    while x != u {
        product *= model.coupling(x, parent[x]).tanh();
        x = parent[x];
    }
    Ok(product)
}

/// Default node budget for [`build_saw_tree`].
pub const SAW_TREE_BUDGET: usize = 2_000_000;

/// Tree of self-avoiding walks from `root`.
///
/// Node 0 is the root. A walk that returns to a vertex already on it ends in
/// a forced leaf: `+1` when the closing edge exceeds the edge that opened the
/// cycle, both keyed by their endpoint away from the repeated vertex.
#[derive(Debug, Clone)]
pub struct SawTree {
    pub phi: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub forced: Vec<Option<i8>>,
    pub depth: Vec<usize>,
    /// True when `depth_cap` cut off some walk.
    pub truncated: bool,
}

impl SawTree {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Root-to-node vertex sequence.
    pub fn walk(&self, mut node: usize) -> Vec<usize> {
        let mut out = vec![self.phi[node]];
        while let Some(p) = self.parent[node] {
            out.push(self.phi[p]);
            node = p;
        }
        out.reverse();
        out
    }

    /// As a plain graph on its nodes.
    pub fn as_graph(&self) -> Graph {
        let edges: Vec<(usize, usize)> = (1..self.len()).map(|c| (self.parent[c].unwrap(), c)).collect();
        Graph::from_edges(self.len(), &edges).expect("tree is simple")
    }
}

pub fn build_saw_tree(g: &Graph, root: usize, depth_cap: usize) -> Result<SawTree> {
    build_saw_tree_with_budget(g, root, depth_cap, SAW_TREE_BUDGET)
}

pub fn build_saw_tree_with_budget(g: &Graph, root: usize, depth_cap: usize, budget: usize) -> Result<SawTree> {
    let mut t = SawTree { phi: vec![root], parent: vec![None], children: vec![Vec::new()], forced: vec![None], depth: vec![0], truncated: false };
    let mut position = vec![usize::MAX; g.n()];
    let mut path = vec![root];
    position[root] = 0;
    fn grow(
        g: &Graph,
        t: &mut SawTree,
        node: usize,
        path: &mut Vec<usize>,
        position: &mut [usize],
        depth_cap: usize,
        budget: usize,
    ) -> Result<()> {
        let k = path.len() - 1;
        let x = path[k];
        if k == depth_cap {
            if g.neighbors(x).iter().any(|&w| k == 0 || w != path[k - 1]) {
                t.truncated = true;
            }
            return Ok(());
        }
        for &w in g.neighbors(x) {
            if k > 0 && w == path[k - 1] {
                continue;
            }
            if t.len() >= budget {
                return Err(Error::ResourceLimit(format!("SAW tree exceeds {budget} nodes")));
            }
            let child = t.len();
            t.phi.push(w);
            t.parent.push(Some(node));
            t.children.push(Vec::new());
            t.depth.push(k + 1);
            t.children[node].push(child);
            let i = position[w];
            if i != usize::MAX {
                // Cycle path[i] .. path[k] closed by the edge (path[k], path[i]).
                let sign = if path[k] > path[i + 1] { 1 } else { -1 };
                t.forced.push(Some(sign));
                continue;
            }
            t.forced.push(None);
            position[w] = path.len();
            path.push(w);
            let r = grow(g, t, child, path, position, depth_cap, budget);
            path.pop();
            position[w] = usize::MAX;
            r?;
        }
        Ok(())
    }
    grow(g, &mut t, 0, &mut path, &mut position, depth_cap, budget)?;
    Ok(t)
}

/// `ln cosh x` without overflow.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Log-ratio message a subtree with log-ratio `r` sends across a coupling `beta`.
fn message(r: f64, beta: f64) -> f64 {
    if r == f64::INFINITY {
        2.0 * beta
    } else if r == f64::NEG_INFINITY {
        -2.0 * beta
    } else {
        ln_cosh(r / 2.0 + beta) - ln_cosh(r / 2.0 - beta)
    }
}

/// `log P(+)/P(-)` at every node of a tree, computed bottom-up.
///
/// `clamp(node)` returns a fixed spin for conditioned nodes; forced leaves
/// keep their construction sign unless `clamp` overrides it.
pub fn tree_log_ratios(tree: &SawTree, model: &IsingModel, clamp: impl Fn(usize) -> Option<i8>) -> Vec<f64> {
    let mut r = vec![0.0; tree.len()];
    for node in (0..tree.len()).rev() {
        let fixed = clamp(node).or(tree.forced[node]).or_else(|| {
            let h = model.field(tree.phi[node]);
            h.is_infinite().then_some(if h > 0.0 { 1 } else { -1 })
        });
        r[node] = match fixed {
            Some(s) if s > 0 => f64::INFINITY,
            Some(_) => f64::NEG_INFINITY,
            None => {
                let x = tree.phi[node];
                2.0 * model.field(x)
                    + tree.children[node]
                        .iter()
                        .map(|&c| message(r[c], model.coupling(x, tree.phi[c])))
                        .sum::<f64>()
            }
        };
    }
    r
}

fn prob_from_log_ratio(r: f64) -> f64 {
    if r == f64::INFINITY {
        1.0
    } else if r == f64::NEG_INFINITY {
        0.0
    } else {
        1.0 / (1.0 + (-r).exp())
    }
}

/// Root marginal `P_T(sigma_root = +)` with every unforced copy of `y` set to `+`.
pub fn saw_tree_root_prob(tree: &SawTree, model: &IsingModel, y: Option<usize>) -> f64 {
    let r = tree_log_ratios(tree, model, |node| {
        (Some(tree.phi[node]) == y && tree.forced[node].is_none()).then_some(1)
    });
    prob_from_log_ratio(r[0])
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeitzCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub discrepancy: f64,
}

/// `P_G(sigma_v = + | sigma_y = +)` against the root marginal of the SAW tree.
pub fn weitz_identity_check(g: &Graph, v: usize, y: usize, beta: f64) -> Result<WeitzCheck> {
    let model = IsingModel::uniform(g.clone(), beta);
    weitz_identity_check_model(&model, v, y)
}

pub fn weitz_identity_check_model(model: &IsingModel, v: usize, y: usize) -> Result<WeitzCheck> {
    let lhs = gibbs_exact(&model.conditioned(y, 1))?.prob_plus(v);
    let tree = build_saw_tree(model.graph(), v, model.n())?;
    let rhs = saw_tree_root_prob(&tree, model, Some(y));
    Ok(WeitzCheck { lhs, rhs, discrepancy: (lhs - rhs).abs() })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// `Cov_h(sigma_u, sigma_v) <= E_0(sigma_u sigma_v)` on a tree.
pub fn dss_check(model: &IsingModel, u: usize, v: usize) -> Result<InequalityCheck> {
    if !is_tree(model.graph()) {
        return Err(Error::InvalidArgument("inequality is checked on trees".into()));
    }
    let lhs = gibbs_exact(model)?.covariance(u, v);
    let zero = model.clone().with_fields(vec![0.0; model.n()]);
    let rhs = gibbs_exact(&zero)?.correlation(u, v);
    Ok(InequalityCheck { lhs, rhs, ok: lhs <= rhs + 1e-12 })
}

/// `(1 + e^{2 beta d'}) / 2`.
pub fn spin_corr_constant(beta: f64, d_prime: usize) -> f64 {
    (1.0 + (2.0 * beta * d_prime as f64).exp()) / 2.0
}

/// `E_h(sigma_rho | all targets +) <= c(d') sum_i E_0(sigma_rho | sigma_{v_i} = +)`
/// on a tree, with `d'` the largest tree degree among the targets and
/// `beta` the largest coupling.
pub fn spin_corr_check(model: &IsingModel, rho: usize, targets: &[usize]) -> Result<InequalityCheck> {
    if !is_tree(model.graph()) {
        return Err(Error::InvalidArgument("inequality is checked on trees".into()));
    }
    let base = gibbs_exact(model)?;
    let m = base.mean(rho);
    if m.abs() > 1e-9 {
        return Err(Error::Inapplicable(format!("E_h(sigma_rho) = {m:e} is not zero")));
    }
    let mut conditioned = model.clone();
    for &v in targets {
        conditioned.set_field(v, f64::INFINITY);
    }
    let lhs = gibbs_exact(&conditioned)?.mean(rho);
    let zero = model.clone().with_fields(vec![0.0; model.n()]);
    let mut rhs_sum = 0.0;
    for &v in targets {
        rhs_sum += gibbs_exact(&zero.conditioned(v, 1))?.mean(rho);
    }
    let d_prime = targets.iter().map(|&v| model.graph().degree(v)).max().unwrap_or(0);
    let rhs = spin_corr_constant(model.max_coupling(), d_prime) * rhs_sum;
    Ok(InequalityCheck { lhs, rhs, ok: lhs <= rhs + 1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gibbs_examples() {
        let single = gibbs_exact(&IsingModel::uniform(Graph::empty(1), 0.3)).unwrap();
        assert!((single.probabilities[0] - 0.5).abs() < 1e-15);
        let beta: f64 = 0.7;
        let edge = gibbs_exact(&IsingModel::uniform(Graph::path(2), beta)).unwrap();
        let expected = beta.exp() / (2.0 * beta.exp() + 2.0 * (-beta).exp());
        assert!((edge.probabilities[0b11] - expected).abs() < 1e-15);
        assert!((edge.probabilities[0b00] - expected).abs() < 1e-15);
        let h = vec![0.3, -1.2, 0.5];
        let free = gibbs_exact(&IsingModel::uniform(Graph::complete(3), 0.0).with_fields(h.clone())).unwrap();
        for c in 0..8usize {
            let product: f64 = (0..3)
                .map(|v| {
                    let s = if c >> v & 1 == 1 { 1.0 } else { -1.0 };
                    (h[v] * s).exp() / (2.0 * h[v].cosh())
                })
                .product();
            assert!((free.probabilities[c] - product).abs() < 1e-15);
        }
    }

    #[test]
    fn clamped_vertices_leave_the_state_space() {
        let m = IsingModel::uniform(Graph::path(3), 0.5).conditioned(0, 1);
        let t = gibbs_exact(&m).unwrap();
        assert_eq!(t.free, vec![1, 2]);
        assert_eq!(t.probabilities.len(), 4);
        assert_eq!(t.mean(0), 1.0);
        assert!((t.mean(1) - 0.5f64.tanh()).abs() < 1e-14);
    }

    #[test]
    fn susceptibility_examples() {
        let b: f64 = 0.4;
        assert!((susceptibility(&IsingModel::uniform(Graph::path(4), 0.0), 1).unwrap() - 1.0).abs() < 1e-14);
        assert!((susceptibility(&IsingModel::uniform(Graph::path(2), b), 0).unwrap() - (1.0 + b.tanh())).abs() < 1e-14);
        let path = susceptibility(&IsingModel::uniform(Graph::path(3), b), 0).unwrap();
        assert!((path - (1.0 + b.tanh() + b.tanh().powi(2))).abs() < 1e-14);
    }

    #[test]
    fn tree_correlation_examples() {
        let m = IsingModel::uniform(Graph::path(4), 0.6);
        assert_eq!(tree_correlation(&m, 2, 2).unwrap(), 1.0);
        assert!((tree_correlation(&m, 0, 1).unwrap() - 0.6f64.tanh()).abs() < 1e-15);
        let exact = gibbs_exact(&m).unwrap().correlation(0, 3);
        assert!((tree_correlation(&m, 0, 3).unwrap() - exact).abs() < 1e-12);
        assert!(tree_correlation(&IsingModel::uniform(Graph::cycle(4), 0.6), 0, 1).is_err());
    }

    #[test]
    fn saw_tree_examples() {
        let path = build_saw_tree(&Graph::path(5), 2, 10).unwrap();
        assert_eq!(path.len(), 5);
        assert!(path.forced.iter().all(Option::is_none));

        let tri = build_saw_tree(&Graph::complete(3), 0, 10).unwrap();
        let forced: Vec<(Vec<usize>, i8)> =
            (0..tri.len()).filter_map(|i| tri.forced[i].map(|s| (tri.walk(i), s))).collect();
        assert_eq!(forced, vec![(vec![0, 1, 2, 0], 1), (vec![0, 2, 1, 0], -1)]);

        let c4 = build_saw_tree(&Graph::cycle(4), 0, 10).unwrap();
        let leaves: Vec<usize> = (0..c4.len()).filter(|&i| c4.forced[i].is_some()).collect();
        assert_eq!(leaves.len(), 2);
        assert!(leaves.iter().all(|&i| c4.depth[i] == 4));

        assert!(build_saw_tree_with_budget(&Graph::complete(7), 0, 7, 100).is_err());
        assert!(build_saw_tree(&Graph::complete(5), 0, 2).unwrap().truncated);
    }

    #[test]
    fn weitz_examples() {
        let tree = Graph::path(5);
        let w = weitz_identity_check(&tree, 1, 4, 0.5).unwrap();
        assert!(w.discrepancy < 1e-14);
        for (v, y) in [(0, 1), (1, 2), (2, 0)] {
            assert!(weitz_identity_check(&Graph::complete(3), v, y, 0.3).unwrap().discrepancy <= 1e-10);
        }
        for (v, y) in [(0, 3), (2, 1)] {
            assert!(weitz_identity_check(&Graph::complete(4), v, y, 0.2).unwrap().discrepancy <= 1e-10);
        }
    }

    #[test]
    fn dss_examples() {
        let edge = IsingModel::uniform(Graph::path(2), 0.5);
        let zero = dss_check(&edge, 0, 1).unwrap();
        assert!((zero.lhs - zero.rhs).abs() < 1e-14);
        let tilted = dss_check(&edge.clone().with_fields(vec![1.0, -0.5]), 0, 1).unwrap();
        assert!(tilted.ok);
    }

    #[test]
    fn spin_corr_examples() {
        let path = IsingModel::uniform(Graph::path(4), 0.4);
        let one = spin_corr_check(&path, 0, &[2]).unwrap();
        assert!(one.ok && one.lhs <= one.rhs);
        let star = IsingModel::uniform(Graph::star(2), 0.4);
        assert!(spin_corr_check(&star, 0, &[1, 2]).unwrap().ok);
        assert!(spin_corr_check(&path, 0, &[2, 3]).unwrap().ok);
        let biased = path.clone().with_fields(vec![0.5, 0.0, 0.0, 0.0]);
        assert!(matches!(spin_corr_check(&biased, 0, &[3]), Err(Error::Inapplicable(_))));
    }

    #[test]
    fn model_file_round_trip() {
        let m = IsingModel::from_json(r#"{"edges": [[0, 1, 0.5], [1, 2, 0.25]], "fields": {"2": "+inf", "0": -0.1}}"#).unwrap();
        assert_eq!(m.n(), 3);
        assert_eq!(m.coupling(2, 1), 0.25);
        assert!(m.is_clamped(2) && m.field(0) == -0.1);
        assert!(IsingModel::from_json(r#"{"edges": [[0, 1, -1.0]]}"#).is_err());
    }
}
