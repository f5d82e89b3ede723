//! Continuous-time chains built on the Ising measure: plain, accelerated,
//! block-updated, projected and restricted Glauber dynamics.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{components, Graph};
use crate::ising::{log_sum_exp, log_weights, pairwise_sum, IsingModel};
use crate::seed::rng_for;

/// Largest state space for which an explicit generator is built.
pub const MAX_STATES: usize = 1 << 20;
/// Largest state space for dense heat kernels.
pub const MAX_DENSE_STATES: usize = 1 << 14;
/// Cap on stored generator entries.
const MAX_ENTRIES: usize = 60_000_000;
/// Largest cut set enumerated when resampling an A-component.
const MAX_CUT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChainKind {
    X1,
    X2,
    X3,
    X4,
    X5,
    Y1,
    Y1Tilde,
    Y2,
}

impl ChainKind {
    pub const ALL: [ChainKind; 8] =
        [Self::X1, Self::X2, Self::X3, Self::X4, Self::X5, Self::Y1, Self::Y1Tilde, Self::Y2];

    pub fn name(self) -> &'static str {
        match self {
            Self::X1 => "X1",
            Self::X2 => "X2",
            Self::X3 => "X3",
            Self::X4 => "X4",
            Self::X5 => "X5",
            Self::Y1 => "Y1",
            Self::Y1Tilde => "Y1tilde",
            Self::Y2 => "Y2",
        }
    }

    /// True for chains whose stationary law satisfies detailed balance.
    pub fn reversible(self) -> bool {
        self != Self::X3
    }
}

impl FromStr for ChainKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown chain kind {s}")))
    }
}

impl std::fmt::Display for ChainKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A chain on the Ising measure `model` with vertex split `in_b`.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub kind: ChainKind,
    pub model: IsingModel,
    pub in_b: Vec<bool>,
    /// Clock rate of A-vertices in X2.
    pub rate_a: f64,
    /// Frozen configuration whose B-part conditions Y2.
    pub frozen: Option<Vec<i8>>,
}

impl ChainSpec {
    pub fn new(kind: ChainKind, model: IsingModel, in_b: Vec<bool>) -> Self {
        Self { kind, model, in_b, rate_a: 1.0, frozen: None }
    }

    pub fn with_rate_a(mut self, rate_a: f64) -> Self {
        self.rate_a = rate_a;
        self
    }

    pub fn with_frozen(mut self, frozen: Vec<i8>) -> Self {
        self.frozen = Some(frozen);
        self
    }

    pub fn with_kind(&self, kind: ChainKind) -> Self {
        Self { kind, ..self.clone() }
    }

    /// Vertices carried by the state space, in bit order.
    pub fn sites(&self) -> Vec<usize> {
        let n = self.model.n();
        match self.kind {
            ChainKind::X1 | ChainKind::X2 | ChainKind::X3 | ChainKind::Y1 => (0..n).collect(),
            ChainKind::X4 | ChainKind::X5 | ChainKind::Y1Tilde => (0..n).filter(|&v| self.in_b[v]).collect(),
            ChainKind::Y2 => (0..n).filter(|&v| !self.in_b[v]).collect(),
        }
    }

    pub fn b_count(&self) -> usize {
        self.in_b.iter().filter(|&&b| b).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.model.n();
        if self.in_b.len() != n {
            return Err(Error::InvalidArgument(format!("partition has {} labels for {n} vertices", self.in_b.len())));
        }
        if self.model.fields().iter().any(|h| !h.is_finite()) {
            return Err(Error::InvalidArgument("chains need finite fields".into()));
        }
        if !(self.rate_a > 0.0) || !self.rate_a.is_finite() {
            return Err(Error::InvalidParameter(format!("rate_A = {} must be positive", self.rate_a)));
        }
        if self.kind == ChainKind::Y2 {
            match &self.frozen {
                Some(f) if f.len() == n && f.iter().all(|&s| s == 1 || s == -1) => {}
                _ => return Err(Error::InvalidArgument("Y2 needs a frozen configuration on all vertices".into())),
            }
        }
        Ok(())
    }

    /// The Ising measure the chain is built on.
    pub fn measure(&self) -> IsingModel {
        match self.kind {
            ChainKind::Y1 | ChainKind::Y1Tilde => decoupled_model(&self.model, &self.in_b),
            _ => self.model.clone(),
        }
    }
}

/// Same model with every B-B coupling set to zero.
pub fn decoupled_model(model: &IsingModel, in_b: &[bool]) -> IsingModel {
    IsingModel::with_coupling_fn(model.graph().clone(), |u, v| if in_b[u] && in_b[v] { 0.0 } else { model.coupling(u, v) })
        .with_fields(model.fields().to_vec())
}

/// Sparse rate matrix with its stationary law.
///
/// State bit `i` is set when `sites[i]` has spin `+1`.
#[derive(Debug, Clone)]
pub struct Generator {
    pub kind: Option<ChainKind>,
    pub sites: Vec<usize>,
    /// Off-diagonal rates, sorted by target.
    rows: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
    pub pi: Vec<f64>,
}

impl Generator {
    /// From off-diagonal rows; the diagonal is minus the row sum.
    pub fn from_rows(sites: Vec<usize>, rows: Vec<Vec<(usize, f64)>>, pi: Vec<f64>) -> Result<Self> {
        let count = rows.len();
        if pi.len() != count {
            return Err(Error::InvalidArgument("pi and Q differ in size".into()));
        }
        let mut clean = Vec::with_capacity(count);
        let mut exit = Vec::with_capacity(count);
        for (x, mut row) in rows.into_iter().enumerate() {
            row.retain(|&(y, _)| y != x);
            row.sort_by_key(|&(y, _)| y);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (y, q) in row {
                if !(q >= 0.0) || y >= count {
                    return Err(Error::InvalidArgument(format!("bad rate {q} from {x} to {y}")));
                }
                match merged.last_mut() {
                    Some(last) if last.0 == y => last.1 += q,
                    _ => merged.push((y, q)),
                }
            }
            exit.push(pairwise_sum(&merged.iter().map(|e| e.1).collect::<Vec<_>>()));
            clean.push(merged);
        }
        Ok(Self { kind: None, sites, rows: clean, exit, pi })
    }

    pub fn from_dense(q: &DMatrix<f64>, pi: Vec<f64>) -> Result<Self> {
        let rows = (0..q.nrows())
            .map(|x| (0..q.ncols()).filter(|&y| y != x && q[(x, y)] != 0.0).map(|y| (y, q[(x, y)])).collect())
            .collect();
        Self::from_rows((0..q.nrows().trailing_zeros() as usize).collect(), rows, pi)
    }

    pub fn state_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, x: usize) -> &[(usize, f64)] {
        &self.rows[x]
    }

    pub fn exit_rate(&self, x: usize) -> f64 {
        self.exit[x]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().copied().fold(0.0, f64::max)
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return -self.exit[x];
        }
        self.rows[x].binary_search_by_key(&y, |e| e.0).map(|i| self.rows[x][i].1).unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let k = self.state_count();
        let mut q = DMatrix::zeros(k, k);
        for x in 0..k {
            q[(x, x)] = -self.exit[x];
            for &(y, r) in &self.rows[x] {
                q[(x, y)] = r;
            }
        }
        q
    }

    /// `max |pi(x) q(x,y) - pi(y) q(y,x)|`.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for x in 0..self.state_count() {
            for &(y, q) in &self.rows[x] {
                worst = worst.max((self.pi[x] * q - self.pi[y] * self.rate(y, x)).abs());
            }
        }
        worst
    }

    /// `max_y |(pi Q)(y)|`.
    pub fn stationarity_residual(&self) -> f64 {
        let mut flow: Vec<f64> = self.pi.iter().zip(&self.exit).map(|(p, e)| -p * e).collect();
        for x in 0..self.state_count() {
            for &(y, q) in &self.rows[x] {
                flow[y] += self.pi[x] * q;
            }
        }
        flow.iter().fold(0.0, |m, f| m.max(f.abs()))
    }

    /// State index of a configuration on all vertices.
    pub fn index_of(&self, config: &[i8]) -> usize {
        self.sites.iter().enumerate().filter(|&(_, &v)| config[v] > 0).fold(0, |acc, (i, _)| acc | 1 << i)
    }

    /// Writes state `x` onto the chain's sites of `config`.
    pub fn write_state(&self, x: usize, config: &mut [i8]) {
        for (i, &v) in self.sites.iter().enumerate() {
            config[v] = if x >> i & 1 == 1 { 1 } else { -1 };
        }
    }

    /// `p + (p Q) / rate`, the uniformized one-step map on row vectors.
    fn step_row(&self, p: &[f64], rate: f64, out: &mut [f64]) {
        for (o, (&px, &e)) in out.iter_mut().zip(p.iter().zip(&self.exit)) {
            *o = px * (1.0 - e / rate);
        }
        for x in 0..self.state_count() {
            if p[x] != 0.0 {
                for &(y, q) in &self.rows[x] {
                    out[y] += p[x] * q / rate;
                }
            }
        }
    }

    /// `out = m (I + Q / rate)`.
    fn step_right(&self, m: &DMatrix<f64>, rate: f64, out: &mut DMatrix<f64>) {
        out.copy_from(m);
        for x in 0..self.state_count() {
            out.column_mut(x).scale_mut(1.0 - self.exit[x] / rate);
        }
        for x in 0..self.state_count() {
            for &(y, q) in &self.rows[x] {
                out.column_mut(y).axpy(q / rate, &m.column(x), 1.0);
            }
        }
    }
}

/// Glauber rate `nu(flipped) / (nu(sigma) + nu(flipped))` from log-weights.
pub fn glauber_rate_log(log_sigma: f64, log_flipped: f64) -> Result<f64> {
    if log_sigma == f64::NEG_INFINITY && log_flipped == f64::NEG_INFINITY {
        return Err(Error::UndefinedState("both configurations have zero weight".into()));
    }
    Ok(logistic(log_flipped - log_sigma))
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Glauber rate of flipping `v` in `sigma` under `model`.
pub fn glauber_rate(model: &IsingModel, sigma: &[i8], v: usize) -> Result<f64> {
    let violates = |w: usize| {
        let h = model.field(w);
        (h == f64::INFINITY && sigma[w] < 0) || (h == f64::NEG_INFINITY && sigma[w] > 0)
    };
    if (0..model.n()).any(|w| w != v && violates(w)) {
        return Err(Error::UndefinedState("a clamped spin is violated away from the update site".into()));
    }
    if model.is_clamped(v) {
        return Ok(if violates(v) { 1.0 } else { 0.0 });
    }
    let local: f64 = model.couplings_of(v).map(|(w, b)| b * sigma[w] as f64).sum::<f64>() + model.field(v);
    glauber_rate_log(0.0, -2.0 * sigma[v] as f64 * local)
}

/// Bit positions of chosen vertices inside full configuration indices.
struct Embedding {
    positions: Vec<usize>,
}

impl Embedding {
    fn compress(&self, c: usize) -> usize {
        self.positions.iter().enumerate().fold(0, |acc, (i, &p)| acc | (c >> p & 1) << i)
    }

    fn expand(&self, s: usize) -> usize {
        self.positions.iter().enumerate().fold(0, |acc, (i, &p)| acc | (s >> i & 1) << p)
    }
}

pub fn softmax(lw: &[f64]) -> Vec<f64> {
    let z = log_sum_exp(lw);
    lw.iter().map(|w| (w - z).exp()).collect()
}

fn flip_rate(lw: &[f64], c: usize, v: usize) -> f64 {
    logistic(lw[c ^ 1 << v] - lw[c])
}

/// Log-weights of the full configurations with their B-marginals.
struct FullTable {
    lw: Vec<f64>,
    b: Embedding,
    a: Embedding,
    log_mu_b: Vec<f64>,
}

impl FullTable {
    fn new(model: &IsingModel, in_b: &[bool]) -> Result<Self> {
        let (_, lw) = log_weights(model)?;
        let b = Embedding { positions: (0..model.n()).filter(|&v| in_b[v]).collect() };
        let a = Embedding { positions: (0..model.n()).filter(|&v| !in_b[v]).collect() };
        let mut groups = vec![Vec::with_capacity(1 << a.positions.len()); 1 << b.positions.len()];
        for (c, &w) in lw.iter().enumerate() {
            groups[b.compress(c)].push(w);
        }
        let log_mu_b = groups.iter().map(|g| log_sum_exp(g)).collect();
        Ok(Self { lw, b, a, log_mu_b })
    }

    /// `mu(tau | tau_B)`.
    fn conditional(&self, tau: usize) -> f64 {
        (self.lw[tau] - self.log_mu_b[self.b.compress(tau)]).exp()
    }
}

pub fn build_generator(spec: &ChainSpec) -> Result<Generator> {
    spec.validate()?;
    let sites = spec.sites();
    if sites.len() >= usize::BITS as usize || 1usize << sites.len() > MAX_STATES {
        return Err(Error::ResourceLimit(format!("{} spins exceed the explicit generator limit", sites.len())));
    }
    let measure = spec.measure();
    let n = measure.n();
    let (rows, pi) = match spec.kind {
        ChainKind::X1 | ChainKind::X2 | ChainKind::Y1 => {
            let (_, lw) = log_weights(&measure)?;
            let rows = (0..lw.len())
                .map(|c| {
                    (0..n)
                        .map(|v| {
                            let clock = if spec.kind == ChainKind::X2 && !spec.in_b[v] { spec.rate_a } else { 1.0 };
                            (c ^ 1 << v, clock * flip_rate(&lw, c, v))
                        })
                        .collect()
                })
                .collect();
            (rows, softmax(&lw))
        }
        ChainKind::Y2 => {
            let (_, lw) = log_weights(&measure)?;
            let frozen = spec.frozen.as_ref().expect("validated");
            let base = (0..n).filter(|&v| spec.in_b[v] && frozen[v] > 0).fold(0, |acc, v| acc | 1 << v);
            let a = Embedding { positions: sites.clone() };
            let full: Vec<usize> = (0..1usize << sites.len()).map(|s| base | a.expand(s)).collect();
            let rows = full
                .iter()
                .enumerate()
                .map(|(s, &c)| (0..sites.len()).map(|i| (s ^ 1 << i, flip_rate(&lw, c, sites[i]))).collect())
                .collect();
            (rows, softmax(&full.iter().map(|&c| lw[c]).collect::<Vec<_>>()))
        }
        ChainKind::X3 => {
            let t = FullTable::new(&measure, &spec.in_b)?;
            let a_count = 1usize << t.a.positions.len();
            let entries = t.lw.len().saturating_mul(t.b.positions.len() + 1).saturating_mul(a_count);
            if entries > MAX_ENTRIES {
                return Err(Error::ResourceLimit(format!("X3 generator needs {entries} entries")));
            }
            let a_configs: Vec<usize> = (0..a_count).map(|s| t.a.expand(s)).collect();
            let b_mask = t.b.expand(usize::MAX >> (usize::BITS as usize - t.b.positions.len().max(1)));
            let b_mask = if t.b.positions.is_empty() { 0 } else { b_mask };
            let rows = (0..t.lw.len())
                .into_par_iter()
                .map(|c| {
                    let mut row = Vec::with_capacity((t.b.positions.len() + 1) * a_count);
                    let mut stay = 0.0;
                    for &v in &t.b.positions {
                        let p = flip_rate(&t.lw, c, v);
                        stay += 1.0 - p;
                        let flipped = (c ^ 1 << v) & b_mask;
                        for &ta in &a_configs {
                            let tau = flipped | ta;
                            row.push((tau, p * t.conditional(tau)));
                        }
                    }
                    for &ta in &a_configs {
                        let tau = (c & b_mask) | ta;
                        if tau != c {
                            row.push((tau, stay * t.conditional(tau)));
                        }
                    }
                    row
                })
                .collect();
            (rows, softmax(&t.lw))
        }
        ChainKind::X4 | ChainKind::Y1Tilde => {
            let t = FullTable::new(&measure, &spec.in_b)?;
            let k = t.b.positions.len();
            let mut rates = vec![vec![0.0; k]; 1 << k];
            for c in 0..t.lw.len() {
                let b = t.b.compress(c);
                let weight = (t.lw[c] - t.log_mu_b[b]).exp();
                for (j, &v) in t.b.positions.iter().enumerate() {
                    rates[b][j] += weight * flip_rate(&t.lw, c, v);
                }
            }
            let rows = rates.iter().enumerate().map(|(b, r)| r.iter().enumerate().map(|(j, &q)| (b ^ 1 << j, q)).collect()).collect();
            (rows, softmax(&t.log_mu_b))
        }
        ChainKind::X5 => {
            let t = FullTable::new(&measure, &spec.in_b)?;
            let k = t.b.positions.len();
            let rows = (0..1usize << k)
                .map(|b| (0..k).map(|j| (b ^ 1 << j, logistic(t.log_mu_b[b ^ 1 << j] - t.log_mu_b[b]))).collect())
                .collect();
            (rows, softmax(&t.log_mu_b))
        }
    };
    let mut g = Generator::from_rows(sites, rows, pi)?;
    g.kind = Some(spec.kind);
    Ok(g)
}

/// Single-site Glauber dynamics, unit clock per spin, for the measure with
/// log-weights `lw` on `{-1, 1}^m` (bit `i` set when spin `i` is `+1`).
pub fn glauber_generator(lw: &[f64]) -> Result<Generator> {
    let m = lw.len().trailing_zeros() as usize;
    if lw.len() != 1 << m {
        return Err(Error::InvalidArgument("log-weight table length must be a power of two".into()));
    }
    let rows = (0..lw.len()).map(|c| (0..m).map(|v| (c ^ 1 << v, flip_rate(lw, c, v))).collect()).collect();
    Generator::from_rows((0..m).collect(), rows, softmax(lw))
}

/// `W - |B| I` for the B-projection of the block chain, with
/// `W(x, x^v) = sum_A mu mu^v / (mu + mu^v) / mu(x)` and
/// `W(x, x) = sum_v sum_A mu^2 / (mu + mu^v) / mu(x)`.
pub fn projection_generator(model: &IsingModel, in_b: &[bool]) -> Result<DMatrix<f64>> {
    let t = FullTable::new(model, in_b)?;
    let k = t.b.positions.len();
    let mut w = DMatrix::zeros(1 << k, 1 << k);
    for c in 0..t.lw.len() {
        let b = t.b.compress(c);
        for (j, &v) in t.b.positions.iter().enumerate() {
            let (x, y) = (t.lw[c], t.lw[c ^ 1 << v]);
            let denom = x.max(y) + (-(x - y).abs()).exp().ln_1p();
            w[(b, b ^ 1 << j)] += (x + y - denom - t.log_mu_b[b]).exp();
            w[(b, b)] += (2.0 * x - denom - t.log_mu_b[b]).exp();
        }
    }
    for b in 0..1usize << k {
        w[(b, b)] -= k as f64;
    }
    Ok(w)
}

/// Poisson(lambda) weights until the remaining mass is below `1e-13`.
fn poisson_weights(lambda: f64) -> Vec<f64> {
    let mut w = vec![(-lambda).exp()];
    let mut total = w[0];
    let mut k = 0.0;
    while 1.0 - total > 1e-13 || k < lambda {
        k += 1.0;
        let next = w.last().unwrap() * lambda / k;
        total += next;
        w.push(next);
        if k > lambda + 200.0 + 20.0 * lambda.sqrt() {
            break;
        }
    }
    w
}

/// Largest uniformization exponent handled in one chunk.
const CHUNK: f64 = 32.0;

fn chunks(rate: f64, t: f64) -> (usize, f64) {
    let k = ((rate * t) / CHUNK).ceil().max(1.0) as usize;
    (k, t / k as f64)
}

/// `p e^{Qt}` for a row vector `p`.
pub fn evolve_distribution(gen: &Generator, p: &[f64], t: f64) -> Vec<f64> {
    let rate = gen.max_exit_rate();
    if t == 0.0 || rate == 0.0 {
        return p.to_vec();
    }
    let (k, s) = chunks(rate, t);
    let weights = poisson_weights(rate * s);
    let mut cur = p.to_vec();
    let mut term = vec![0.0; p.len()];
    let mut next = vec![0.0; p.len()];
    for _ in 0..k {
        let mut acc: Vec<f64> = cur.iter().map(|x| x * weights[0]).collect();
        term.copy_from_slice(&cur);
        for &w in &weights[1..] {
            gen.step_row(&term, rate, &mut next);
            std::mem::swap(&mut term, &mut next);
            for (a, x) in acc.iter_mut().zip(&term) {
                *a += w * x;
            }
        }
        cur = acc;
    }
    cur
}

/// `m e^{Qt}`.
pub fn evolve_right(gen: &Generator, m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let rate = gen.max_exit_rate();
    if t == 0.0 || rate == 0.0 {
        return m.clone();
    }
    let (k, s) = chunks(rate, t);
    let weights = poisson_weights(rate * s);
    let mut cur = m.clone();
    let mut term = m.clone();
    let mut next = m.clone();
    for _ in 0..k {
        term.copy_from(&cur);
        cur.scale_mut(weights[0]);
        for &w in &weights[1..] {
            gen.step_right(&term, rate, &mut next);
            std::mem::swap(&mut term, &mut next);
            cur.zip_apply(&term, |a, x| *a += w * x);
        }
    }
    cur
}

pub fn heat_kernel(gen: &Generator, t: f64) -> Result<DMatrix<f64>> {
    let k = gen.state_count();
    if k > MAX_DENSE_STATES {
        return Err(Error::ResourceLimit(format!("{k} states exceed the dense heat kernel limit")));
    }
    let rate = gen.max_exit_rate();
    let mut squarings = 0;
    let mut s = t;
    while rate * s > CHUNK / 2.0 {
        s /= 2.0;
        squarings += 1;
    }
    let mut h = evolve_right(gen, &DMatrix::identity(k, k), s);
    for _ in 0..squarings {
        h = &h * &h;
    }
    Ok(h)
}

pub fn heat_kernel_row(gen: &Generator, x: usize, t: f64) -> Vec<f64> {
    let mut p = vec![0.0; gen.state_count()];
    p[x] = 1.0;
    evolve_distribution(gen, &p, t)
}

pub fn tv_distance(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::InvalidArgument(format!("supports of size {} and {}", mu.len(), nu.len())));
    }
    Ok(0.5 * pairwise_sum(&mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>()))
}

/// `max_x TV(H(x, .), pi)`.
pub fn worst_tv(h: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let mut acc = vec![0.0; h.nrows()];
    for (j, col) in h.column_iter().enumerate() {
        for (a, x) in acc.iter_mut().zip(col.iter()) {
            *a += (x - pi[j]).abs();
        }
    }
    acc.into_iter().fold(0.0, f64::max) / 2.0
}

/// Relative precision of [`mixing_time`].
pub const MIXING_REL_TOL: f64 = 1e-3;

/// `inf{t : max_x TV(H_t(x, .), pi) <= eps}` to relative precision [`MIXING_REL_TOL`].
pub fn mixing_time(gen: &Generator, eps: f64) -> Result<f64> {
    if eps >= 1.0 {
        return Ok(0.0);
    }
    let k = gen.state_count();
    if k > MAX_DENSE_STATES {
        return Err(Error::ResourceLimit(format!("{k} states exceed the dense heat kernel limit")));
    }
    let at_zero = gen.pi.iter().map(|p| 1.0 - p).fold(0.0, f64::max);
    if at_zero <= eps {
        return Ok(0.0);
    }
    let rate = gen.max_exit_rate();
    if rate == 0.0 {
        return Err(Error::UndefinedState("chain never moves".into()));
    }
    let mut lo = 0.0;
    let mut h_lo = DMatrix::identity(k, k);
    let mut g_lo = (at_zero / eps).ln();
    let mut hi = 1.0 / rate;
    let mut h_hi = heat_kernel(gen, hi)?;
    let mut g_hi = (worst_tv(&h_hi, &gen.pi) / eps).ln();
    let mut doublings = 0;
    while g_hi > 0.0 {
        doublings += 1;
        if doublings > 200 {
            return Err(Error::UndefinedState("worst-case distance never falls below eps".into()));
        }
        let squared = &h_hi * &h_hi;
        lo = hi;
        h_lo = h_hi;
        g_lo = g_hi;
        hi *= 2.0;
        h_hi = squared;
        g_hi = (worst_tv(&h_hi, &gen.pi) / eps).ln();
    }
    drop(h_hi);
    // Illinois false position on log(TV / eps), which is close to linear in t.
    let mut side = 0i8;
    while hi - lo > MIXING_REL_TOL * hi {
        let width = hi - lo;
        let secant = if g_hi.is_finite() { hi - g_hi * width / (g_hi - g_lo) } else { lo + width / 2.0 };
        let t = secant.clamp(lo + width / 64.0, hi - width / 64.0);
        let mid = evolve_right(gen, &h_lo, t - lo);
        let g = (worst_tv(&mid, &gen.pi) / eps).ln();
        if g <= 0.0 {
            hi = t;
            g_hi = g;
            if side == -1 {
                g_lo /= 2.0;
            }
            side = -1;
        } else {
            lo = t;
            g_lo = g;
            h_lo = mid;
            if side == 1 {
                g_hi /= 2.0;
            }
            side = 1;
        }
    }
    Ok(hi)
}

/// A spin change at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub site: u32,
    pub spin: i8,
}

/// Spin history on all vertices; only the chain's sites ever change.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: Vec<i8>,
    pub events: Vec<Event>,
    pub t_end: f64,
    /// Clock rings, including those that left the spin unchanged.
    pub updates: u64,
}

const LOG_MAGIC: &[u8; 4] = b"GLTR";
const LOG_VERSION: u32 = 1;

impl Trajectory {
    pub fn state_at(&self, t: f64) -> Vec<i8> {
        let mut s = self.initial.clone();
        for e in self.events.iter().take_while(|e| e.time <= t) {
            s[e.site as usize] = e.spin;
        }
        s
    }

    pub fn final_state(&self) -> Vec<i8> {
        self.state_at(f64::INFINITY)
    }

    pub fn flip_count(&self) -> usize {
        self.events.len()
    }

    /// Little-endian log: `GLTR`, `u32` version, `u32` n, `n` initial `i8`
    /// spins, then records of `f64` time, `u32` site, `i8` spin.
    pub fn write_log(&self, mut w: impl Write) -> Result<()> {
        w.write_all(LOG_MAGIC)?;
        w.write_all(&LOG_VERSION.to_le_bytes())?;
        w.write_all(&(self.initial.len() as u32).to_le_bytes())?;
        w.write_all(&self.initial.iter().map(|&s| s as u8).collect::<Vec<_>>())?;
        for e in &self.events {
            w.write_all(&e.time.to_le_bytes())?;
            w.write_all(&e.site.to_le_bytes())?;
            w.write_all(&[e.spin as u8])?;
        }
        Ok(())
    }

    /// Inverse of [`write_log`](Self::write_log); `t_end` is the last event time.
    pub fn read_log(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 12 || &bytes[..4] != LOG_MAGIC {
            return Err(Error::Parse("not a trajectory log".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != LOG_VERSION {
            return Err(Error::Parse(format!("unsupported log version {version}")));
        }
        let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = bytes.get(12 + n..).ok_or_else(|| Error::Parse("truncated header".into()))?;
        let initial = bytes[12..12 + n].iter().map(|&b| b as i8).collect();
        if body.len() % 13 != 0 {
            return Err(Error::Parse("truncated record".into()));
        }
        let events: Vec<Event> = body
            .chunks_exact(13)
            .map(|c| Event {
                time: f64::from_le_bytes(c[..8].try_into().unwrap()),
                site: u32::from_le_bytes(c[8..12].try_into().unwrap()),
                spin: c[12] as i8,
            })
            .collect();
        let t_end = events.last().map_or(0.0, |e| e.time);
        Ok(Self { initial, events, t_end, updates: 0 })
    }
}

fn heat_bath_plus(model: &IsingModel, sigma: &[i8], v: usize) -> f64 {
    let local: f64 = model.couplings_of(v).map(|(w, b)| b * sigma[w] as f64).sum::<f64>() + model.field(v);
    logistic(2.0 * local)
}

fn spin_from(u: f64, p_plus: f64) -> i8 {
    if u < p_plus {
        1
    } else {
        -1
    }
}

/// Single-site dynamics: each vertex rings at `clocks[v]` and resamples its
/// spin from the conditional law.
fn glauber_run(model: &IsingModel, clocks: &[f64], sigma0: &[i8], t_end: f64, rng: &mut impl Rng) -> Trajectory {
    let mut sigma = sigma0.to_vec();
    let mut cumulative = Vec::with_capacity(clocks.len());
    let mut total = 0.0;
    for &c in clocks {
        total += c;
        cumulative.push(total);
    }
    let mut events = Vec::new();
    let mut updates = 0;
    if total > 0.0 {
        let hold = Exp::new(total).expect("positive rate");
        let mut t = 0.0;
        loop {
            t += hold.sample(rng);
            if t > t_end {
                break;
            }
            let target = rng.random::<f64>() * total;
            let v = cumulative.partition_point(|&c| c <= target).min(clocks.len() - 1);
            updates += 1;
            let s = spin_from(rng.random(), heat_bath_plus(model, &sigma, v));
            if s != sigma[v] {
                sigma[v] = s;
                events.push(Event { time: t, site: v as u32, spin: s });
            }
        }
    }
    Trajectory { initial: sigma0.to_vec(), events, t_end, updates }
}

/// Exact sampler for the spins of one A-component given everything else.
///
/// Vertices in `cut` are enumerated; the rest form a forest sampled by
/// upward log-partition passes and downward conditional draws.
#[derive(Debug, Clone)]
struct ComponentSampler {
    comp: Vec<usize>,
    local: HashMap<usize, usize>,
    is_cut: Vec<bool>,
    cut: Vec<usize>,
    /// Forest vertices in BFS order; parents precede children.
    order: Vec<usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    roots: Vec<usize>,
}

impl ComponentSampler {
    fn new(g: &Graph, comp: &[usize], in_comp: &[bool]) -> Result<Self> {
        let mut local = vec![usize::MAX; g.n()];
        for (i, &v) in comp.iter().enumerate() {
            local[v] = i;
        }
        // Spanning tree of the component; one endpoint of each non-tree edge is cut.
        let mut tree_parent = vec![usize::MAX; comp.len()];
        let mut seen = vec![false; comp.len()];
        let mut bfs = vec![comp[0]];
        seen[0] = true;
        let mut head = 0;
        while head < bfs.len() {
            let x = bfs[head];
            head += 1;
            for &y in g.neighbors(x) {
                if in_comp[y] && !seen[local[y]] {
                    seen[local[y]] = true;
                    tree_parent[local[y]] = x;
                    bfs.push(y);
                }
            }
        }
        let mut is_cut = vec![false; comp.len()];
        for &x in comp {
            for &y in g.neighbors(x) {
                if in_comp[y] && x < y && tree_parent[local[y]] != x && tree_parent[local[x]] != y && !is_cut[local[x]] && !is_cut[local[y]] {
                    is_cut[local[y]] = true;
                }
            }
        }
        let cut: Vec<usize> = comp.iter().copied().filter(|&v| is_cut[local[v]]).collect();
        if cut.len() > MAX_CUT {
            return Err(Error::ResourceLimit(format!("A-component needs a cut set of {} vertices", cut.len())));
        }
        let mut parent = vec![None; comp.len()];
        let mut children = vec![Vec::new(); comp.len()];
        let mut order = Vec::with_capacity(comp.len());
        let mut roots = Vec::new();
        let mut placed = is_cut.clone();
        for &start in comp {
            if placed[local[start]] {
                continue;
            }
            placed[local[start]] = true;
            roots.push(local[start]);
            let first = order.len();
            order.push(start);
            let mut i = first;
            while i < order.len() {
                let x = order[i];
                i += 1;
                for &y in g.neighbors(x) {
                    if in_comp[y] && !placed[local[y]] {
                        placed[local[y]] = true;
                        parent[local[y]] = Some(local[x]);
                        children[local[x]].push(local[y]);
                        order.push(y);
                    }
                }
            }
        }
        let local = comp.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        Ok(Self { comp: comp.to_vec(), local, is_cut, cut, order, parent, children, roots })
    }

    fn is_cut_vertex(&self, v: usize) -> bool {
        self.local.get(&v).is_some_and(|&i| self.is_cut[i])
    }

    fn is_forest(&self, v: usize) -> bool {
        self.local.get(&v).is_some_and(|&i| !self.is_cut[i])
    }

    /// Resamples the component's spins in place.
    fn sample(&self, model: &IsingModel, sigma: &mut [i8], rng: &mut impl Rng) {
        let comp = &self.comp;
        let k = self.cut.len();
        let mut best: Vec<(f64, Vec<[f64; 2]>)> = Vec::with_capacity(1 << k);
        for a in 0..1usize << k {
            for (i, &c) in self.cut.iter().enumerate() {
                sigma[c] = if a >> i & 1 == 1 { 1 } else { -1 };
            }
            // Energy of cut spins against everything outside the forest.
            let mut log_z = 0.0;
            for &c in &self.cut {
                let s = sigma[c] as f64;
                log_z += model.field(c) * s;
                for (w, b) in model.couplings_of(c) {
                    if !self.is_forest(w) && (!self.is_cut_vertex(w) || w > c) {
                        log_z += b * s * sigma[w] as f64;
                    }
                }
            }
            let l = self.upward(model, sigma);
            for &r in &self.roots {
                log_z += lse2(l[r][0], l[r][1]);
            }
            best.push((log_z, l));
        }
        let weights: Vec<f64> = best.iter().map(|b| b.0).collect();
        let z = log_sum_exp(&weights);
        let mut u = rng.random::<f64>();
        let mut chosen = best.len() - 1;
        for (a, w) in weights.iter().enumerate() {
            let p = (w - z).exp();
            if u < p {
                chosen = a;
                break;
            }
            u -= p;
        }
        for (i, &c) in self.cut.iter().enumerate() {
            sigma[c] = if chosen >> i & 1 == 1 { 1 } else { -1 };
        }
        let l = &best[chosen].1;
        for &v in &self.order {
            let i = self.local[&v];
            let (minus, plus) = match self.parent[i] {
                None => (l[i][0], l[i][1]),
                Some(p) => {
                    let b = model.coupling(v, comp[p]);
                    let sp = sigma[comp[p]] as f64;
                    (l[i][0] - b * sp, l[i][1] + b * sp)
                }
            };
            sigma[v] = spin_from(rng.random(), logistic(plus - minus));
        }
    }

    /// `l[i][s]`: log-partition of the subtree at `i` with its spin `s`
    /// (`0` for minus), including couplings to fixed outside spins.
    fn upward(&self, model: &IsingModel, sigma: &[i8]) -> Vec<[f64; 2]> {
        let comp = &self.comp;
        let mut l = vec![[0.0; 2]; comp.len()];
        for &v in self.order.iter().rev() {
            let i = self.local[&v];
            let mut h = model.field(v);
            for (w, b) in model.couplings_of(v) {
                if !self.is_forest(w) {
                    h += b * sigma[w] as f64;
                }
            }
            let mut out = [-h, h];
            for &c in &self.children[i] {
                let b = model.coupling(v, comp[c]);
                out[0] += lse2(l[c][0] + b, l[c][1] - b);
                out[1] += lse2(l[c][0] - b, l[c][1] + b);
            }
            l[i] = out;
        }
        l
    }
}

fn lse2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// Exact resampling of all A-spins given the B-spins.
struct BlockResampler {
    components: Vec<ComponentSampler>,
}

impl BlockResampler {
    fn new(model: &IsingModel, in_b: &[bool]) -> Result<Self> {
        let g = model.graph();
        let a: Vec<usize> = (0..g.n()).filter(|&v| !in_b[v]).collect();
        let edges: Vec<(usize, usize)> = g.edges().into_iter().filter(|&(u, v)| !in_b[u] && !in_b[v]).collect();
        let in_a: Vec<bool> = in_b.iter().map(|b| !b).collect();
        let sub = Graph::from_edges(g.n(), &edges)?;
        let mut components_out = Vec::new();
        for comp in components(&sub) {
            if !in_a[comp[0]] {
                continue;
            }
            let mut in_comp = vec![false; g.n()];
            for &v in &comp {
                in_comp[v] = true;
            }
            components_out.push(ComponentSampler::new(g, &comp, &in_comp)?);
        }
        debug_assert_eq!(components_out.iter().map(|c| c.comp.len()).sum::<usize>(), a.len());
        Ok(Self { components: components_out })
    }

    fn resample(&self, model: &IsingModel, sigma: &mut [i8], rng: &mut impl Rng) {
        for sampler in &self.components {
            sampler.sample(model, sigma, rng);
        }
    }
}

/// Block chain: at rate `|B|` a uniform B-vertex is heat-bath updated, then
/// every A-spin is redrawn from its conditional law given B.
fn block_run(
    model: &IsingModel,
    in_b: &[bool],
    resampler: &BlockResampler,
    sigma0: &[i8],
    t_end: f64,
    rng: &mut impl Rng,
) -> Trajectory {
    let b: Vec<usize> = (0..model.n()).filter(|&v| in_b[v]).collect();
    let mut sigma = sigma0.to_vec();
    let mut events = Vec::new();
    let mut updates = 0;
    if !b.is_empty() {
        let hold = Exp::new(b.len() as f64).expect("positive rate");
        let mut t = 0.0;
        let mut before = sigma.clone();
        loop {
            t += hold.sample(rng);
            if t > t_end {
                break;
            }
            updates += 1;
            before.copy_from_slice(&sigma);
            let v = b[rng.random_range(0..b.len())];
            sigma[v] = spin_from(rng.random(), heat_bath_plus(model, &sigma, v));
            resampler.resample(model, &mut sigma, rng);
            for w in 0..sigma.len() {
                if sigma[w] != before[w] {
                    events.push(Event { time: t, site: w as u32, spin: sigma[w] });
                }
            }
        }
    }
    Trajectory { initial: sigma0.to_vec(), events, t_end, updates }
}

/// Jump chain of an explicit generator, started from `sigma0` restricted to its sites.
pub fn simulate_generator(gen: &Generator, sigma0: &[i8], t_end: f64, rng: &mut impl Rng) -> Trajectory {
    let mut x = gen.index_of(sigma0);
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut updates = 0;
    loop {
        let e = gen.exit_rate(x);
        if e <= 0.0 {
            break;
        }
        t += Exp::new(e).expect("positive rate").sample(rng);
        if t > t_end {
            break;
        }
        updates += 1;
        let mut target = rng.random::<f64>() * e;
        let row = gen.row(x);
        let mut y = row.last().unwrap().0;
        for &(z, q) in row {
            if target < q {
                y = z;
                break;
            }
            target -= q;
        }
        for (i, &v) in gen.sites.iter().enumerate() {
            if (x ^ y) >> i & 1 == 1 {
                events.push(Event { time: t, site: v as u32, spin: if y >> i & 1 == 1 { 1 } else { -1 } });
            }
        }
        x = y;
    }
    Trajectory { initial: sigma0.to_vec(), events, t_end, updates }
}

/// Prepared simulator; reusable across replicas.
pub struct Simulator {
    spec: ChainSpec,
    engine: Engine,
}

enum Engine {
    Glauber { model: IsingModel, clocks: Vec<f64> },
    Block { resampler: BlockResampler, project: bool },
    Explicit(Generator),
}

impl Simulator {
    pub fn new(spec: &ChainSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.model.n();
        let engine = match spec.kind {
            ChainKind::X1 | ChainKind::X2 | ChainKind::Y1 | ChainKind::Y2 => {
                let clocks = (0..n)
                    .map(|v| match spec.kind {
                        ChainKind::X2 if !spec.in_b[v] => spec.rate_a,
                        ChainKind::Y2 if spec.in_b[v] => 0.0,
                        _ => 1.0,
                    })
                    .collect();
                Engine::Glauber { model: spec.measure(), clocks }
            }
            ChainKind::X3 | ChainKind::X4 => Engine::Block {
                resampler: BlockResampler::new(&spec.model, &spec.in_b)?,
                project: spec.kind == ChainKind::X4,
            },
            ChainKind::X5 | ChainKind::Y1Tilde => Engine::Explicit(build_generator(spec)?),
        };
        Ok(Self { spec: spec.clone(), engine })
    }

    /// One trajectory; X4 starts from `sigma0` with its A-part redrawn.
    pub fn run(&self, sigma0: &[i8], t_end: f64, rng: &mut impl Rng) -> Result<Trajectory> {
        let n = self.spec.model.n();
        if sigma0.len() != n || sigma0.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(format!("initial state must hold {n} spins of +-1")));
        }
        if let (ChainKind::Y2, Some(f)) = (self.spec.kind, &self.spec.frozen) {
            if (0..n).any(|v| self.spec.in_b[v] && f[v] != sigma0[v]) {
                return Err(Error::InvalidArgument("Y2 initial state disagrees with the frozen B-spins".into()));
            }
        }
        Ok(match &self.engine {
            Engine::Glauber { model, clocks } => glauber_run(model, clocks, sigma0, t_end, rng),
            Engine::Block { resampler, project } => {
                let mut start = sigma0.to_vec();
                if *project {
                    resampler.resample(&self.spec.model, &mut start, rng);
                }
                let mut tr = block_run(&self.spec.model, &self.spec.in_b, resampler, &start, t_end, rng);
                if *project {
                    tr.initial = sigma0.to_vec();
                    tr.events.retain(|e| self.spec.in_b[e.site as usize]);
                }
                tr
            }
            Engine::Explicit(g) => simulate_generator(g, sigma0, t_end, rng),
        })
    }
}

/// One trajectory from `sigma0` up to `t_end`, deterministic in `seed`.
pub fn simulate(spec: &ChainSpec, sigma0: &[i8], t_end: f64, seed: u64) -> Result<Trajectory> {
    Simulator::new(spec)?.run(sigma0, t_end, &mut rng_for(seed, &[]))
}

/// Final states of `runs` independent replicas, replica `i` seeded by `(seed, i)`.
pub fn simulate_replicas(spec: &ChainSpec, sigma0: &[i8], t_end: f64, runs: usize, seed: u64) -> Result<Vec<Vec<i8>>> {
    let sim = Simulator::new(spec)?;
    (0..runs)
        .into_par_iter()
        .map(|i| sim.run(sigma0, t_end, &mut rng_for(seed, &[i as u64])).map(|t| t.final_state()))
        .collect()
}

/// Empirical law of final states over the generator's state space.
pub fn empirical_law(gen: &Generator, finals: &[Vec<i8>]) -> Vec<f64> {
    let mut counts = vec![0.0; gen.state_count()];
    for s in finals {
        counts[gen.index_of(s)] += 1.0;
    }
    counts.iter().map(|c| c / finals.len() as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CouplingMode {
    Exact,
    Simulated { runs: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingReport {
    pub rate_a: f64,
    pub t: f64,
    pub tv: f64,
    pub mode: CouplingMode,
    /// Two-sided 95% DKW radius per empirical law, simulation mode only.
    pub dkw_radius: Option<f64>,
}

/// TV between the accelerated chain from `sigma0` and the block chain from
/// `sigma0` with its A-part drawn from the conditional Ising law, at time `t`.
pub fn lemma34_coupling_check(
    model: &IsingModel,
    in_b: &[bool],
    rate_a: f64,
    sigma0: &[i8],
    t: f64,
    mode: CouplingMode,
    seed: u64,
) -> Result<CouplingReport> {
    let x2 = ChainSpec::new(ChainKind::X2, model.clone(), in_b.to_vec()).with_rate_a(rate_a);
    let x3 = x2.with_kind(ChainKind::X3);
    let tv = match mode {
        CouplingMode::Exact => {
            let g2 = build_generator(&x2)?;
            let g3 = build_generator(&x3)?;
            let p2 = heat_kernel_row(&g2, g2.index_of(sigma0), t);
            let start = conditional_start(model, in_b, sigma0)?;
            let p3 = evolve_distribution(&g3, &start, t);
            tv_distance(&p2, &p3)?
        }
        CouplingMode::Simulated { runs } => {
            let sim2 = Simulator::new(&x2)?;
            let resampler = BlockResampler::new(model, in_b)?;
            let finals: Vec<(Vec<i8>, Vec<i8>)> = (0..runs)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_for(seed, &[i as u64]);
                    let a = sim2.run(sigma0, t, &mut rng)?.final_state();
                    let mut start = sigma0.to_vec();
                    resampler.resample(model, &mut start, &mut rng);
                    let b = block_run(model, in_b, &resampler, &start, t, &mut rng).final_state();
                    Ok((a, b))
                })
                .collect::<Result<_>>()?;
            let mut law: HashMap<Vec<i8>, (f64, f64)> = HashMap::new();
            for (a, b) in finals {
                law.entry(a).or_default().0 += 1.0;
                law.entry(b).or_default().1 += 1.0;
            }
            let diffs: Vec<f64> = law.values().map(|(a, b)| (a - b).abs() / runs as f64).collect();
            0.5 * pairwise_sum(&diffs)
        }
    };
    let dkw_radius = match mode {
        CouplingMode::Simulated { runs } => Some(((2.0f64 / 0.05).ln() / (2.0 * runs as f64)).sqrt()),
        CouplingMode::Exact => None,
    };
    Ok(CouplingReport { rate_a, t, tv, mode, dkw_radius })
}

/// Law on full configurations with `sigma0`'s B-part and A-part drawn from
/// the conditional Ising law.
pub fn conditional_start(model: &IsingModel, in_b: &[bool], sigma0: &[i8]) -> Result<Vec<f64>> {
    let t = FullTable::new(model, in_b)?;
    let full: usize = (0..model.n()).filter(|&v| sigma0[v] > 0).fold(0, |acc, v| acc | 1 << v);
    let b_part = full & t.b.expand(usize::MAX >> (usize::BITS as usize - t.b.positions.len().max(1)));
    let b_part = if t.b.positions.is_empty() { 0 } else { b_part };
    let mut p = vec![0.0; t.lw.len()];
    for s in 0..1usize << t.a.positions.len() {
        let tau = b_part | t.a.expand(s);
        p[tau] = t.conditional(tau);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::gibbs_exact;

    fn edge_model(beta: f64) -> IsingModel {
        IsingModel::uniform(Graph::path(2), beta)
    }

    #[test]
    fn glauber_rate_examples() {
        let free = IsingModel::uniform(Graph::path(3), 0.0);
        assert_eq!(glauber_rate(&free, &[1, -1, 1], 1).unwrap(), 0.5);
        let b: f64 = 0.8;
        let r = glauber_rate(&edge_model(b), &[1, 1], 0).unwrap();
        assert!((r - (-b).exp() / (b.exp() + (-b).exp())).abs() < 1e-15);
        let h: f64 = 0.6;
        let single = IsingModel::uniform(Graph::empty(1), 0.0).with_fields(vec![h]);
        let r = glauber_rate(&single, &[-1], 0).unwrap();
        assert!((r - h.exp() / (h.exp() + (-h).exp())).abs() < 1e-15);
        assert!(glauber_rate_log(f64::NEG_INFINITY, f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn generator_examples() {
        let single = ChainSpec::new(ChainKind::X1, IsingModel::uniform(Graph::empty(1), 0.3), vec![true]);
        let q = build_generator(&single).unwrap().to_dense();
        assert_eq!(q, DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]));

        let model = IsingModel::uniform(Graph::path(3), 0.4);
        let x1 = build_generator(&ChainSpec::new(ChainKind::X1, model.clone(), vec![true; 3])).unwrap();
        let x2 = build_generator(&ChainSpec::new(ChainKind::X2, model.clone(), vec![true; 3]).with_rate_a(50.0)).unwrap();
        assert_eq!(x1.to_dense(), x2.to_dense());

        let x5 = build_generator(&ChainSpec::new(ChainKind::X5, edge_model(0.9), vec![false, true])).unwrap();
        assert!(x5.pi.iter().all(|p| (p - 0.5).abs() < 1e-15));
        assert!((x5.to_dense() - DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5])).abs().max() < 1e-15);
    }

    #[test]
    fn generators_are_stationary() {
        let model = IsingModel::uniform(Graph::cycle(4), 0.5).with_fields(vec![0.1, -0.2, 0.0, 0.3]);
        let in_b = vec![true, false, true, false];
        for kind in ChainKind::ALL {
            let spec = ChainSpec::new(kind, model.clone(), in_b.clone()).with_rate_a(3.0).with_frozen(vec![1, -1, -1, 1]);
            let g = build_generator(&spec).unwrap();
            assert!(g.stationarity_residual() < 1e-14, "{kind}");
            if kind.reversible() {
                assert!(g.detailed_balance_residual() < 1e-14, "{kind}");
            }
        }
    }

    #[test]
    fn block_chain_fails_detailed_balance() {
        let model = IsingModel::uniform(Graph::path(3), 0.4);
        let g = build_generator(&ChainSpec::new(ChainKind::X3, model, vec![true, false, true])).unwrap();
        assert!(g.stationarity_residual() < 1e-15);
        assert!(g.detailed_balance_residual() > 1e-3);
    }

    #[test]
    fn projection_matches_rates() {
        let model = IsingModel::uniform(Graph::cycle(5), 0.45).with_fields(vec![0.2, 0.0, -0.1, 0.0, 0.05]);
        let in_b = vec![true, false, true, true, false];
        let q4 = build_generator(&ChainSpec::new(ChainKind::X4, model.clone(), in_b.clone())).unwrap().to_dense();
        let w = projection_generator(&model, &in_b).unwrap();
        assert!((q4 - w).abs().max() < 1e-13);
    }

    #[test]
    fn heat_kernel_examples() {
        let g = build_generator(&ChainSpec::new(ChainKind::X1, IsingModel::uniform(Graph::empty(1), 0.0), vec![true])).unwrap();
        assert_eq!(heat_kernel(&g, 0.0).unwrap(), DMatrix::identity(2, 2));
        for t in [0.1, 1.0, 7.5, 80.0] {
            let h = heat_kernel(&g, t).unwrap();
            assert!((h[(1, 0)] - (1.0 - (-t).exp()) / 2.0).abs() < 1e-12, "t={t}");
        }
        let model = IsingModel::uniform(Graph::complete(3), 0.35);
        let g = build_generator(&ChainSpec::new(ChainKind::X1, model, vec![true; 3])).unwrap();
        let h = heat_kernel(&g, 2.3).unwrap();
        for x in 0..8 {
            assert!((h.row(x).sum() - 1.0).abs() < 1e-10);
            let row = heat_kernel_row(&g, x, 2.3);
            assert!(row.iter().enumerate().all(|(y, p)| (p - h[(x, y)]).abs() < 1e-12));
        }
    }

    #[test]
    fn tv_and_mixing_examples() {
        assert_eq!(tv_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((tv_distance(&[0.6, 0.4], &[0.5, 0.5]).unwrap() - 0.1).abs() < 1e-15);
        let g = build_generator(&ChainSpec::new(ChainKind::X1, IsingModel::uniform(Graph::empty(1), 0.0), vec![true])).unwrap();
        let t = mixing_time(&g, 0.25).unwrap();
        assert!((t - 2f64.ln()).abs() <= 2e-3 * t);
        assert_eq!(mixing_time(&g, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn simulation_examples() {
        let spec = ChainSpec::new(ChainKind::X1, edge_model(0.5), vec![true, true]);
        let tr = simulate(&spec, &[1, -1], 0.0, 1).unwrap();
        assert!(tr.events.is_empty());
        assert_eq!(tr.final_state(), vec![1, -1]);
        assert_eq!(simulate(&spec, &[1, -1], 20.0, 9).unwrap(), simulate(&spec, &[1, -1], 20.0, 9).unwrap());

        let finals = simulate_replicas(&spec, &[1, -1], 50.0, 20_000, 3).unwrap();
        let g = build_generator(&spec).unwrap();
        let emp = empirical_law(&g, &finals);
        let exact = gibbs_exact(&edge_model(0.5)).unwrap();
        for (x, p) in exact.probabilities.iter().enumerate() {
            let sd = (p * (1.0 - p) / finals.len() as f64).sqrt();
            assert!((emp[x] - p).abs() < 3.0 * sd + 1e-12, "state {x}");
        }
    }

    #[test]
    fn log_round_trip() {
        let spec = ChainSpec::new(ChainKind::X1, IsingModel::uniform(Graph::cycle(5), 0.4), vec![true; 5]);
        let tr = simulate(&spec, &[1, 1, -1, 1, -1], 5.0, 4).unwrap();
        let mut buf = Vec::new();
        tr.write_log(&mut buf).unwrap();
        assert_eq!(buf.len(), 12 + 5 + 13 * tr.events.len());
        let back = Trajectory::read_log(buf.as_slice()).unwrap();
        assert_eq!(back.events, tr.events);
        assert_eq!(back.initial, tr.initial);
    }

    #[test]
    fn coupling_examples() {
        let model = IsingModel::uniform(Graph::path(3), 0.5);
        let all_b = lemma34_coupling_check(&model, &[true; 3], 5.0, &[1, -1, 1], 0.7, CouplingMode::Exact, 0).unwrap();
        assert!(all_b.tv < 1e-12);
        let in_b = [true, false, true];
        let tvs: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
            .iter()
            .map(|&r| lemma34_coupling_check(&model, &in_b, r, &[1, -1, 1], 0.5, CouplingMode::Exact, 0).unwrap().tv)
            .collect();
        assert!(tvs.windows(2).all(|w| w[1] < w[0]), "{tvs:?}");
        let at_zero = lemma34_coupling_check(&model, &in_b, 1.0, &[1, -1, 1], 0.0, CouplingMode::Exact, 0).unwrap();
        let p_plus = gibbs_exact(&model.conditioned(0, 1).conditioned(2, 1)).unwrap().prob_plus(1);
        assert!((at_zero.tv - p_plus).abs() < 1e-12);
    }
}
