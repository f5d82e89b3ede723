//! Spectral gaps, Dirichlet forms, the chain comparison suite, the
//! stochastic-localization gap bound and the covariance inequality chain.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chains::{build_generator, glauber_generator, mixing_time, softmax, ChainKind, ChainSpec, Generator};
use crate::error::{Error, Result};
use crate::graph::{components, Graph};
use crate::ising::{build_saw_tree, gibbs_exact, log_weights, pairwise_sum, saw_tree_root_prob, spin_corr_constant, IsingModel};
use crate::params::ModelParams;
use crate::seed::rng_for;
use crate::structure::{check_prop4, Partition};
use crate::walks::{sup_saw_counts, DEFAULT_SAW_BUDGET, MAX_EXACT_LENGTH};

/// Largest state space handled by a dense eigendecomposition.
pub const DENSE_EIG_LIMIT: usize = 4096;
/// Residual certificate required from the iterative gap solver.
pub const ITERATIVE_RESIDUAL: f64 = 1e-8;
/// Detailed-balance residual above which a generator counts as non-reversible.
pub const REVERSIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    /// Sorted spectrum of `-Q`; only `[0, gap]` on the iterative path.
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    /// Eigenfunction of the gap, `f = u / sqrt(pi)`.
    pub dirichlet_witness: Option<Vec<f64>>,
    /// `|| -S u - gap u ||` of the returned eigenvector.
    pub residual: f64,
    pub iterative: bool,
}

/// Symmetric `S(x, y) = sqrt(q(x, y) q(y, x))`, similar to `Q` when reversible.
fn symmetrized_rows(gen: &Generator) -> Vec<Vec<(usize, f64)>> {
    (0..gen.state_count())
        .map(|x| gen.row(x).iter().map(|&(y, q)| (y, (q * gen.rate(y, x)).sqrt())).collect())
        .collect()
}

fn check_reversible(gen: &Generator) -> Result<()> {
    let r = gen.detailed_balance_residual();
    if r > REVERSIBILITY_TOL {
        return Err(Error::InvalidArgument(format!("generator is not reversible (residual {r:e})")));
    }
    Ok(())
}

/// Minus the symmetrized generator as a dense matrix.
pub fn symmetrized_dense(gen: &Generator) -> DMatrix<f64> {
    let k = gen.state_count();
    let mut s = DMatrix::zeros(k, k);
    for (x, row) in symmetrized_rows(gen).into_iter().enumerate() {
        s[(x, x)] = gen.exit_rate(x);
        for (y, w) in row {
            s[(x, y)] = -w;
        }
    }
    s
}

pub fn spectral_gap(gen: &Generator) -> Result<SpectralReport> {
    check_reversible(gen)?;
    if gen.state_count() <= DENSE_EIG_LIMIT {
        dense_gap(gen)
    } else {
        iterative_gap(gen, 0)
    }
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn dense_gap(gen: &Generator) -> Result<SpectralReport> {
    let s = symmetrized_dense(gen);
    let eig = to_faer(&s)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::UndefinedState(format!("symmetric eigensolver failed: {e:?}")))?;
    let eigenvalues: Vec<f64> = eig.S().column_vector().iter().copied().collect();
    if eigenvalues.len() < 2 {
        return Ok(SpectralReport { eigenvalues, gap: f64::INFINITY, dirichlet_witness: None, residual: 0.0, iterative: false });
    }
    let u = DVector::from_iterator(s.nrows(), eig.U().col(1).iter().copied());
    let gap = eigenvalues[1];
    let residual = (&s * &u - &u * gap).norm();
    let witness = u.iter().zip(&gen.pi).map(|(x, p)| x / p.sqrt()).collect();
    Ok(SpectralReport { eigenvalues, gap, dirichlet_witness: Some(witness), residual, iterative: false })
}

/// Lanczos with full reorthogonalization against `sqrt(pi)`, explicitly
/// restarted from the current Ritz vector.
pub fn iterative_gap(gen: &Generator, seed: u64) -> Result<SpectralReport> {
    check_reversible(gen)?;
    let k = gen.state_count();
    let rows = symmetrized_rows(gen);
    let apply = |x: &DVector<f64>| -> DVector<f64> {
        DVector::from_iterator(
            k,
            (0..k).map(|i| gen.exit_rate(i) * x[i] - rows[i].iter().map(|&(j, w)| w * x[j]).sum::<f64>()),
        )
    };
    let ground = DVector::from_iterator(k, gen.pi.iter().map(|p| p.sqrt())).normalize();
    let deflate = |v: &mut DVector<f64>| {
        let c = ground.dot(v);
        v.axpy(-c, &ground, 1.0);
    };
    let basis_cap = (60_000_000 / k).clamp(8, 200);
    let mut rng = rng_for(seed, &[k as u64]);
    let mut start = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
    deflate(&mut start);
    let mut estimate = f64::NAN;
    let max_restarts = 200;
    for restart in 0..max_restarts {
        let mut basis: Vec<DVector<f64>> = vec![start.normalize()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..basis_cap {
            let mut w = apply(&basis[j]);
            let a = basis[j].dot(&w);
            alpha.push(a);
            for _ in 0..2 {
                deflate(&mut w);
                for b in &basis {
                    let c = b.dot(&w);
                    w.axpy(-c, b, 1.0);
                }
            }
            let norm = w.norm();
            if norm < 1e-14 || j + 1 == basis_cap {
                break;
            }
            beta.push(norm);
            basis.push(w / norm);
        }
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (idx, &theta) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let y = eig.eigenvectors.column(idx);
        let mut ritz = DVector::zeros(k);
        for (i, b) in basis.iter().take(m).enumerate() {
            ritz.axpy(y[i], b, 1.0);
        }
        deflate(&mut ritz);
        let ritz = ritz.normalize();
        let residual = (apply(&ritz) - &ritz * theta).norm();
        estimate = theta;
        if residual <= ITERATIVE_RESIDUAL {
            let witness = ritz.iter().zip(&gen.pi).map(|(x, p)| x / p.sqrt()).collect();
            return Ok(SpectralReport {
                eigenvalues: vec![0.0, theta],
                gap: theta,
                dirichlet_witness: Some(witness),
                residual,
                iterative: true,
            });
        }
        start = ritz;
        let _ = restart;
    }
    Err(Error::SpectralGapTooSmall { iterations: max_restarts * basis_cap, estimate })
}

/// Eigenvalues of `-Q` for any generator, sorted by real part.
pub fn general_spectrum(gen: &Generator) -> Result<Vec<(f64, f64)>> {
    let k = gen.state_count();
    if k > DENSE_EIG_LIMIT {
        return Err(Error::ResourceLimit(format!("{k} states exceed the dense eigensolver limit")));
    }
    let q = -gen.to_dense();
    let mut eig: Vec<(f64, f64)> = to_faer(&q)
        .eigenvalues()
        .map_err(|e| Error::UndefinedState(format!("eigensolver failed: {e:?}")))?
        .into_iter()
        .map(|z| (z.re, z.im))
        .collect();
    eig.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(eig)
}

/// Smallest real part of the spectrum of `-Q` after dropping the eigenvalue
/// closest to zero.
pub fn general_gap(spectrum: &[(f64, f64)]) -> f64 {
    let zero = spectrum
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 .0.hypot(a.1 .1)).total_cmp(&b.1 .0.hypot(b.1 .1)))
        .map(|(i, _)| i);
    spectrum
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != zero)
        .map(|(_, e)| e.0)
        .fold(f64::INFINITY, f64::min)
}

pub fn variance(pi: &[f64], f: &[f64]) -> f64 {
    let mean = pairwise_sum(&pi.iter().zip(f).map(|(p, x)| p * x).collect::<Vec<_>>());
    pairwise_sum(&pi.iter().zip(f).map(|(p, x)| p * (x - mean) * (x - mean)).collect::<Vec<_>>())
}

/// `-<f, Qf>_pi` and `1/2 sum pi(x) q(x,y) (f(x) - f(y))^2`.
pub fn dirichlet_forms(gen: &Generator, f: &[f64]) -> (f64, f64) {
    let k = gen.state_count();
    let mut quad = Vec::with_capacity(k);
    let mut edges = Vec::with_capacity(k);
    for x in 0..k {
        let qf: f64 = gen.row(x).iter().map(|&(y, q)| q * f[y]).sum::<f64>() - gen.exit_rate(x) * f[x];
        quad.push(-gen.pi[x] * f[x] * qf);
        edges.push(0.5 * gen.pi[x] * gen.row(x).iter().map(|&(y, q)| q * (f[x] - f[y]).powi(2)).sum::<f64>());
    }
    (pairwise_sum(&quad), pairwise_sum(&edges))
}

/// `E(f, f)`; both formulas must agree to `1e-10` relative to their scale.
pub fn dirichlet(gen: &Generator, f: &[f64]) -> Result<f64> {
    if f.len() != gen.state_count() {
        return Err(Error::InvalidArgument(format!("f has {} values for {} states", f.len(), gen.state_count())));
    }
    let (a, b) = dirichlet_forms(gen, f);
    if (a - b).abs() > 1e-10 * a.abs().max(b.abs()).max(1.0) {
        return Err(Error::UndefinedState(format!("Dirichlet formulas disagree: {a} vs {b}")));
    }
    Ok(b)
}

/// Self-contained description of one comparison instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonInstance {
    pub n: usize,
    /// `(u, v, beta_uv)`.
    pub edges: Vec<(usize, usize, f64)>,
    pub fields: Vec<f64>,
    pub in_b: Vec<bool>,
    pub rate_a: f64,
}

impl ComparisonInstance {
    pub fn new(model: &IsingModel, in_b: &[bool], rate_a: f64) -> Self {
        let edges = model.graph().edges().into_iter().map(|(u, v)| (u, v, model.coupling(u, v))).collect();
        Self { n: model.n(), edges, fields: model.fields().to_vec(), in_b: in_b.to_vec(), rate_a }
    }

    pub fn model(&self) -> Result<IsingModel> {
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.0, e.1)).collect();
        let g = Graph::from_edges(self.n, &pairs)?;
        let lookup = |u: usize, v: usize| self.edges.iter().find(|e| (e.0.min(e.1), e.0.max(e.1)) == (u, v)).map_or(0.0, |e| e.2);
        Ok(IsingModel::with_coupling_fn(g, lookup).with_fields(self.fields.clone()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainGaps {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
    pub x5: f64,
    pub y1: f64,
    pub y1_tilde: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub instance: ComparisonInstance,
    pub b_size: usize,
    pub gaps: ChainGaps,
    /// (a) `gap(Y1tilde) - gap(Y1)`.
    pub projection_margin: f64,
    pub projection_ok: bool,
    /// (b) `gap(X1) - gap(X2) / rate_A`.
    pub acceleration_margin: f64,
    pub acceleration_ok: bool,
    /// (c) largest distance from an eigenvalue of `-Q3` below `|B|` to its
    /// matched eigenvalue of `-Q4`.
    pub embedding_mismatch: f64,
    pub embedding_matched: usize,
    /// Largest imaginary part in the spectrum of `-Q3`.
    pub x3_max_imaginary: f64,
    pub embedding_ok: bool,
    /// (c) `gap(X3) - gap(X4) / 2`.
    pub block_margin: f64,
    pub block_ok: bool,
    /// (d) rate sandwich constant.
    pub c0_prime: f64,
    pub restricted_lower_margin: f64,
    pub restricted_upper_margin: f64,
    pub restricted_ok: bool,
    /// (e) for X1 at `eps = 1/4`.
    pub t_mix: f64,
    pub relaxation_lower: f64,
    /// `t_mix * gap / ln(1 / (2 eps pi_min))`.
    pub measured_c2: f64,
    pub relaxation_ok: bool,
    /// Detailed-balance residual per generator built.
    pub detailed_balance: Vec<(ChainKind, f64)>,
    /// Stationarity residual per generator built.
    pub stationarity: Vec<(ChainKind, f64)>,
    pub spectra: Spectra,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectra {
    pub x3: Vec<(f64, f64)>,
    pub x4: Vec<f64>,
    pub x5: Vec<f64>,
}

impl ComparisonReport {
    pub fn ok(&self) -> bool {
        self.projection_ok && self.acceleration_ok && self.embedding_ok && self.block_ok && self.restricted_ok && self.relaxation_ok
    }

    pub fn flags(&self) -> [bool; 5] {
        [
            self.projection_ok,
            self.acceleration_ok,
            self.embedding_ok && self.block_ok,
            self.restricted_ok,
            self.relaxation_ok,
        ]
    }
}

/// Absolute tolerance on gap comparisons.
pub const GAP_TOL: f64 = 1e-9;
/// Absolute tolerance on the eigenvalue embedding.
pub const EMBEDDING_TOL: f64 = 1e-7;

/// `1 / (1 + e^{2 m})` with `m` the largest `sum_w |beta_vw| + |h_v|` over `v in B`.
pub fn rate_floor(model: &IsingModel, in_b: &[bool]) -> f64 {
    let worst = (0..model.n())
        .filter(|&v| in_b[v])
        .map(|v| model.couplings_of(v).map(|(_, b)| b.abs()).sum::<f64>() + model.field(v).abs())
        .fold(0.0, f64::max);
    1.0 / (1.0 + (2.0 * worst).exp())
}

/// Greedy nearest matching of `small` into `pool`; returns the worst distance.
fn greedy_match(small: &[f64], pool: &[f64]) -> f64 {
    let mut used = vec![false; pool.len()];
    let mut worst: f64 = 0.0;
    for &x in small {
        let best = pool
            .iter()
            .enumerate()
            .filter(|&(i, _)| !used[i])
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()));
        match best {
            Some((i, y)) => {
                used[i] = true;
                worst = worst.max((y - x).abs());
            }
            None => return f64::INFINITY,
        }
    }
    worst
}

pub fn comparison_suite(model: &IsingModel, in_b: &[bool], rate_a: f64) -> Result<ComparisonReport> {
    let instance = ComparisonInstance::new(model, in_b, rate_a);
    let spec = ChainSpec::new(ChainKind::X1, model.clone(), in_b.to_vec()).with_rate_a(rate_a);
    let build = |k: ChainKind| build_generator(&spec.with_kind(k));
    let gens: Vec<(ChainKind, Generator)> =
        [ChainKind::X1, ChainKind::X2, ChainKind::X3, ChainKind::X4, ChainKind::X5, ChainKind::Y1, ChainKind::Y1Tilde]
            .into_iter()
            .map(|k| build(k).map(|g| (k, g)))
            .collect::<Result<_>>()?;
    let gen = |k: ChainKind| &gens.iter().find(|g| g.0 == k).unwrap().1;
    let detailed_balance = gens.iter().map(|(k, g)| (*k, g.detailed_balance_residual())).collect();
    let stationarity = gens.iter().map(|(k, g)| (*k, g.stationarity_residual())).collect();

    let x1 = spectral_gap(gen(ChainKind::X1))?;
    let x2 = spectral_gap(gen(ChainKind::X2))?;
    let x4 = spectral_gap(gen(ChainKind::X4))?;
    let x5 = spectral_gap(gen(ChainKind::X5))?;
    let y1 = spectral_gap(gen(ChainKind::Y1))?;
    let y1t = spectral_gap(gen(ChainKind::Y1Tilde))?;
    let x3_spectrum = general_spectrum(gen(ChainKind::X3))?;
    let x3 = general_gap(&x3_spectrum);

    let b_size = in_b.iter().filter(|&&b| b).count() as f64;
    let below: Vec<f64> = x3_spectrum.iter().map(|e| e.0).filter(|&re| re < b_size - EMBEDDING_TOL).collect();
    let embedding_mismatch = greedy_match(&below, &x4.eigenvalues);
    let x3_max_imaginary = x3_spectrum.iter().map(|e| e.1.abs()).fold(0.0, f64::max);

    let c0 = rate_floor(model, in_b);
    let g1 = gen(ChainKind::X1);
    let t_mix = mixing_time(g1, 0.25)?;
    let pi_min = g1.pi.iter().copied().fold(f64::INFINITY, f64::min);
    let relaxation_lower = 2f64.ln() / x1.gap;
    let measured_c2 = t_mix * x1.gap / (1.0 / (2.0 * 0.25 * pi_min)).ln();

    let projection_margin = y1t.gap - y1.gap;
    let acceleration_margin = x1.gap - x2.gap / rate_a;
    let block_margin = x3 - x4.gap / 2.0;
    let restricted_lower_margin = x4.gap - c0 * x5.gap;
    let restricted_upper_margin = x5.gap / c0 - x4.gap;
    Ok(ComparisonReport {
        instance,
        b_size: b_size as usize,
        gaps: ChainGaps { x1: x1.gap, x2: x2.gap, x3, x4: x4.gap, x5: x5.gap, y1: y1.gap, y1_tilde: y1t.gap },
        projection_margin,
        projection_ok: projection_margin >= -GAP_TOL,
        acceleration_margin,
        acceleration_ok: acceleration_margin >= -GAP_TOL,
        embedding_mismatch,
        embedding_matched: below.len(),
        x3_max_imaginary,
        embedding_ok: embedding_mismatch <= EMBEDDING_TOL,
        block_margin,
        block_ok: block_margin >= -GAP_TOL,
        c0_prime: c0,
        restricted_lower_margin,
        restricted_upper_margin,
        restricted_ok: restricted_lower_margin >= -GAP_TOL && restricted_upper_margin >= -GAP_TOL,
        t_mix,
        relaxation_lower,
        measured_c2,
        relaxation_ok: t_mix >= relaxation_lower * (1.0 - crate::chains::MIXING_REL_TOL),
        detailed_balance,
        stationarity,
        spectra: Spectra { x3: x3_spectrum, x4: x4.eigenvalues, x5: x5.eigenvalues },
    })
}

/// Re-runs the suite on a dumped instance.
pub fn replay(instance: &ComparisonInstance) -> Result<ComparisonReport> {
    comparison_suite(&instance.model()?, &instance.in_b, instance.rate_a)
}

/// Measure on `{-1, 1}^m` with interaction `J` and sampled tilts.
#[derive(Debug, Clone)]
pub struct ChenEldanInput {
    /// Log-weights of `nu`, bit `i` set when spin `i` is `+1`.
    pub log_nu: Vec<f64>,
    pub m: usize,
    pub j: DMatrix<f64>,
    /// Tilts over which the gap lower bound `eps` is minimized.
    pub u_samples: Vec<Vec<f64>>,
    /// `<x, J x>` per configuration.
    quad: Vec<f64>,
}

/// Grid points from `{0, +-0.5, +-2}^m` kept before the Gaussian draws.
pub const GRID_TILTS: usize = 64;
pub const GAUSSIAN_TILTS: usize = 64;
/// Largest dimension handled exactly.
pub const CHEN_ELDAN_MAX_M: usize = 14;

impl ChenEldanInput {
    pub fn new(nu: &IsingModel, j: DMatrix<f64>, seed: u64) -> Result<Self> {
        let m = nu.n();
        if m > CHEN_ELDAN_MAX_M {
            return Err(Error::ResourceLimit(format!("{m} spins exceed {CHEN_ELDAN_MAX_M}")));
        }
        if j.nrows() != m || j.ncols() != m || (&j - j.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidArgument("J must be a symmetric m x m matrix".into()));
        }
        if Cholesky::new(j.clone()).is_none() {
            return Err(Error::InvalidArgument("J is not positive definite; shift its diagonal".into()));
        }
        let (_, log_nu) = log_weights(nu)?;
        let mut rng = rng_for(seed, &[m as u64]);
        let levels = [0.0, 0.5, -0.5, 2.0, -2.0];
        let grid_size = 5f64.powi(m as i32);
        let mut u_samples = vec![vec![0.0; m]];
        if grid_size <= GRID_TILTS as f64 {
            for code in 1..grid_size as usize {
                let mut c = code;
                u_samples.push((0..m).map(|_| { let l = levels[c % 5]; c /= 5; l }).collect());
            }
        } else {
            while u_samples.len() < GRID_TILTS {
                let u: Vec<f64> = (0..m).map(|_| levels[rng.random_range(0..5)]).collect();
                if !u_samples.contains(&u) {
                    u_samples.push(u);
                }
            }
        }
        for _ in 0..GAUSSIAN_TILTS {
            u_samples.push((0..m).map(|_| rng.sample(StandardNormal)).collect());
        }
        let quad = (0..log_nu.len())
            .map(|c| {
                let x: Vec<f64> = (0..m).map(|i| if c >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
                (0..m).map(|a| x[a] * (0..m).map(|b| j[(a, b)] * x[b]).sum::<f64>()).sum()
            })
            .collect();
        Ok(Self { log_nu, m, j, u_samples, quad })
    }

    /// Log-weights of `nu_{t,u}`.
    pub fn tilted(&self, t: f64, u: &[f64]) -> Vec<f64> {
        self.log_nu
            .iter()
            .enumerate()
            .map(|(c, &w)| {
                let lin: f64 = u.iter().enumerate().map(|(i, a)| if c >> i & 1 == 1 { *a } else { -a }).sum();
                w - t * self.quad[c] + lin
            })
            .collect()
    }

    /// `max_u ||Cov(nu_{t,u})||_op` over the sampled tilts.
    pub fn exact_alpha(&self, t: f64) -> f64 {
        self.u_samples.iter().map(|u| op_norm(&covariance_matrix(&softmax(&self.tilted(t, u)), self.m))).fold(0.0, f64::max)
    }

    pub fn j_norm(&self) -> f64 {
        op_norm(&self.j)
    }
}

/// Covariance of the spins under a law on `{-1, 1}^m`.
pub fn covariance_matrix(p: &[f64], m: usize) -> DMatrix<f64> {
    let spin = |c: usize, i: usize| if c >> i & 1 == 1 { 1.0 } else { -1.0 };
    let mean: Vec<f64> = (0..m).map(|i| p.iter().enumerate().map(|(c, w)| w * spin(c, i)).sum()).collect();
    DMatrix::from_fn(m, m, |a, b| {
        p.iter().enumerate().map(|(c, w)| w * spin(c, a) * spin(c, b)).sum::<f64>() - mean[a] * mean[b]
    })
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn op_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    nalgebra::SymmetricEigen::new(a.clone()).eigenvalues.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = (a + b) / 2.0;
        let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f((a + b) / 2.0), f(b));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 30)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChenEldanReport {
    /// Minimum of `gap(P(nu_{1,u}))` over the sampled tilts only.
    pub epsilon: f64,
    pub epsilon_sampled: bool,
    pub tilts: usize,
    pub alpha_integral: f64,
    pub j_norm: f64,
    pub bound: f64,
    /// Discrete-time gap of `P(nu)`.
    pub actual_gap: f64,
    pub ok: bool,
}

/// Discrete-time Glauber gap: the continuous-time gap divided by `m`.
pub fn discrete_gap(log_weights: &[f64]) -> Result<f64> {
    let gen = glauber_generator(log_weights)?;
    let m = gen.sites.len().max(1) as f64;
    let report = if gen.state_count() > ITERATIVE_FROM {
        iterative_gap(&gen, 0).or_else(|_| spectral_gap(&gen))?
    } else {
        spectral_gap(&gen)?
    };
    Ok(report.gap / m)
}

/// State count above which [`discrete_gap`] uses the iterative solver.
pub const ITERATIVE_FROM: usize = 256;

pub fn chen_eldan_bound(input: &ChenEldanInput, alpha: &dyn Fn(f64) -> f64) -> Result<ChenEldanReport> {
    let mut epsilon = f64::INFINITY;
    for u in &input.u_samples {
        epsilon = epsilon.min(discrete_gap(&input.tilted(1.0, u))?);
    }
    let alpha_integral = adaptive_simpson(alpha, 0.0, 1.0, 1e-7);
    let j_norm = input.j_norm();
    let bound = epsilon * (-2.0 * j_norm * alpha_integral).exp();
    let actual_gap = discrete_gap(&input.log_nu)?;
    Ok(ChenEldanReport {
        epsilon,
        epsilon_sampled: true,
        tilts: input.u_samples.len(),
        alpha_integral,
        j_norm,
        bound,
        actual_gap,
        ok: actual_gap >= bound - 1e-12,
    })
}

/// The SAW-count majorant of the tilted covariance norm.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaMajorant {
    pub theta: f64,
    pub beta: f64,
    /// `C' delta log_d n`.
    pub head: f64,
    /// First length in the tail, `ceil(delta log_d n)`.
    pub start: usize,
    /// `sup_{v in B} S_v^(l)` or its majorant, indexed by `l`.
    pub sup_counts: Vec<f64>,
    /// True when the counts stop before the longest possible walk.
    pub truncated: bool,
}

impl AlphaMajorant {
    pub fn new(g: &Graph, part: &Partition, p: &ModelParams) -> Result<Self> {
        let n = g.n();
        let log = p.log_d(n);
        let b = part.b_vertices();
        let walk_limit = components(g).iter().map(Vec::len).max().unwrap_or(1) - 1;
        let (sup_counts, truncated) = if walk_limit <= MAX_EXACT_LENGTH {
            (sup_saw_counts(g, &b, walk_limit, DEFAULT_SAW_BUDGET)?.into_iter().map(|c| c as f64).collect(), false)
        } else {
            let p4 = check_prop4(g, part, p)?;
            let truncated = p4.tail_truncated_at < walk_limit;
            (p4.sup_counts, truncated)
        };
        Ok(Self {
            theta: p.theta(),
            beta: p.beta,
            head: p.c_prime * p.delta * log,
            start: (p.delta * log).ceil().max(0.0) as usize,
            sup_counts,
            truncated,
        })
    }

    pub fn tail(&self, t: f64) -> f64 {
        let decay = (self.beta * (1.0 - t)).tanh();
        self.sup_counts
            .iter()
            .enumerate()
            .skip(self.start)
            .map(|(l, s)| self.theta.powf(0.4 * l as f64) * decay.powf(0.6 * l as f64) * s)
            .sum()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.head + self.tail(t)
    }

    pub fn integral(&self) -> f64 {
        adaptive_simpson(&|t| self.eval(t), 0.0, 1.0, 1e-10)
    }

    /// `max_l l * int_0^1 tanh(beta(1-t))^{0.6 l} dt / theta^{0.6 l}` over the tail.
    pub fn measured_integral_constant(&self) -> f64 {
        (self.start.max(1)..self.sup_counts.len())
            .map(|l| {
                let e = 0.6 * l as f64;
                let integral = adaptive_simpson(&|t| (self.beta * (1.0 - t)).tanh().powf(e), 0.0, 1.0, 1e-12);
                l as f64 * integral / self.theta.powf(e)
            })
            .fold(0.0, f64::max)
    }
}

pub fn alpha_majorant(g: &Graph, part: &Partition, p: &ModelParams, t: f64) -> Result<f64> {
    Ok(AlphaMajorant::new(g, part, p)?.eval(t))
}

/// Every link of the covariance inequality chain for `nu_{t,u}`.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceChain {
    /// `||Cov_B||_op`.
    pub op_norm: f64,
    /// `max_v sum_y |Cov(v, y)|`.
    pub row_sum: f64,
    /// `max_v sum_y E_{t,0}(sigma_v sigma_y)`.
    pub zero_field: f64,
    /// `max_v sum_y E_T(sigma_root | copies of y = +)`.
    pub saw_tree: f64,
    /// `c(d') max_v sum_y sum over unforced copies of y of the path tanh product`.
    pub lemma_bound: f64,
    /// `c(d') max_v` of the tanh product summed over every SAW from `v`, including the empty walk.
    pub walk_sum: f64,
    pub c_d_prime: f64,
    pub links_ok: [bool; 5],
}

impl CovarianceChain {
    pub fn links(&self) -> [f64; 6] {
        [self.op_norm, self.row_sum, self.zero_field, self.saw_tree, self.lemma_bound, self.walk_sum]
    }

    pub fn ok(&self) -> bool {
        self.links_ok.iter().all(|&b| b)
    }
}

/// Tolerance on each link of the covariance chain.
pub const CHAIN_TOL: f64 = 1e-9;

/// The measure of the chain: couplings `beta_e (1 - t)` inside `B`, `beta_e`
/// elsewhere, field `u` on `B` and zero on `A`.
pub fn tilted_model(model: &IsingModel, in_b: &[bool], t: f64, u: &[f64]) -> IsingModel {
    let b: Vec<usize> = (0..model.n()).filter(|&v| in_b[v]).collect();
    let mut fields = vec![0.0; model.n()];
    for (i, &v) in b.iter().enumerate() {
        fields[v] = u[i];
    }
    IsingModel::with_coupling_fn(model.graph().clone(), |x, y| {
        let c = model.coupling(x, y);
        if in_b[x] && in_b[y] {
            c * (1.0 - t)
        } else {
            c
        }
    })
    .with_fields(fields)
}

pub fn covariance_opnorm_chain_check(model: &IsingModel, in_b: &[bool], t: f64, u: &[f64]) -> Result<CovarianceChain> {
    let b: Vec<usize> = (0..model.n()).filter(|&v| in_b[v]).collect();
    if u.len() != b.len() {
        return Err(Error::InvalidArgument(format!("u has {} entries for {} B-vertices", u.len(), b.len())));
    }
    let tilted = tilted_model(model, in_b, t, u);
    let table = gibbs_exact(&tilted)?;
    let cov = DMatrix::from_fn(b.len(), b.len(), |i, j| table.covariance(b[i], b[j]));
    let op = op_norm(&cov);
    let row_sum = (0..b.len()).map(|i| cov.row(i).iter().map(|c| c.abs()).sum::<f64>()).fold(0.0, f64::max);

    let zero = tilted.clone().with_fields(vec![0.0; model.n()]);
    let zero_table = gibbs_exact(&zero)?;
    let zero_field = b.iter().map(|&v| b.iter().map(|&y| zero_table.correlation(v, y)).sum::<f64>()).fold(0.0, f64::max);

    let d_prime = b.iter().map(|&v| model.graph().degree(v)).max().unwrap_or(0);
    let c = spin_corr_constant(tilted.max_coupling(), d_prime);
    let mut saw_tree: f64 = 0.0;
    let mut lemma_bound: f64 = 0.0;
    let mut walk_sum: f64 = 0.0;
    for &v in &b {
        let tree = build_saw_tree(model.graph(), v, model.n())?;
        let conditioned: f64 = b.iter().map(|&y| 2.0 * saw_tree_root_prob(&tree, &zero, Some(y)) - 1.0).sum();
        saw_tree = saw_tree.max(conditioned);
        let mut product = vec![1.0; tree.len()];
        let (mut in_b_sum, mut all_sum) = (0.0, 0.0);
        for node in 0..tree.len() {
            if let Some(p) = tree.parent[node] {
                product[node] = product[p] * zero.coupling(tree.phi[p], tree.phi[node]).tanh();
            }
            if tree.forced[node].is_none() {
                all_sum += product[node];
                if in_b[tree.phi[node]] {
                    in_b_sum += product[node];
                }
            }
        }
        lemma_bound = lemma_bound.max(c * in_b_sum);
        walk_sum = walk_sum.max(c * all_sum);
    }
    let links = [op, row_sum, zero_field, saw_tree, lemma_bound, walk_sum];
    let mut links_ok = [false; 5];
    for i in 0..5 {
        links_ok[i] = links[i] <= links[i + 1] + CHAIN_TOL;
    }
    links_ok[2] &= (zero_field - saw_tree).abs() <= CHAIN_TOL;
    Ok(CovarianceChain { op_norm: op, row_sum, zero_field, saw_tree, lemma_bound, walk_sum, c_d_prime: c, links_ok })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_site() -> Generator {
        build_generator(&ChainSpec::new(ChainKind::X1, IsingModel::uniform(Graph::empty(1), 0.0), vec![true])).unwrap()
    }

    #[test]
    fn gap_examples() {
        let r = spectral_gap(&single_site()).unwrap();
        assert!((r.gap - 1.0).abs() < 1e-14 && r.eigenvalues[0].abs() < 1e-14);

        let fields = vec![0.3, -1.1, 0.7];
        let product = build_generator(&ChainSpec::new(
            ChainKind::X1,
            IsingModel::uniform(Graph::empty(3), 0.0).with_fields(fields.clone()),
            vec![true; 3],
        ))
        .unwrap();
        // A single site with field h flips at rates that sum to 1.
        let gap = spectral_gap(&product).unwrap().gap;
        assert!((gap - 1.0).abs() < 1e-12);

        let beta: f64 = 0.6;
        let edge = build_generator(&ChainSpec::new(ChainKind::X1, IsingModel::uniform(Graph::path(2), beta), vec![true; 2])).unwrap();
        // Gap of the two-spin chain is 1 - tanh(beta).
        let q = edge.to_dense();
        let sym = SymmetricEigen::new(symmetrized_dense(&edge));
        let mut ev: Vec<f64> = sym.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let r = spectral_gap(&edge).unwrap();
        assert!((r.gap - ev[1]).abs() < 1e-10);
        let (a, b) = ((-beta).exp() / (2.0 * beta.cosh()), beta.exp() / (2.0 * beta.cosh()));
        assert!((q[(0b11, 0b10)] - a).abs() < 1e-15 && (q[(0b10, 0b11)] - b).abs() < 1e-15);
        assert!((r.gap - 2.0 * a).abs() < 1e-10);
    }

    #[test]
    fn dirichlet_examples() {
        let g = single_site();
        assert_eq!(dirichlet(&g, &[3.0, 3.0]).unwrap(), 0.0);
        let e = dirichlet(&g, &[-1.0, 1.0]).unwrap();
        assert!((e - 1.0).abs() < 1e-15);
        assert!((e - spectral_gap(&g).unwrap().gap * variance(&g.pi, &[-1.0, 1.0])).abs() < 1e-15);

        let model = IsingModel::uniform(Graph::cycle(4), 0.5);
        let x1 = build_generator(&ChainSpec::new(ChainKind::X1, model, vec![true; 4])).unwrap();
        let r = spectral_gap(&x1).unwrap();
        let f = r.dirichlet_witness.clone().unwrap();
        assert!((dirichlet(&x1, &f).unwrap() / variance(&x1.pi, &f) - r.gap).abs() < 1e-8);
        let mut rng = rng_for(1, &[]);
        for _ in 0..50 {
            let f: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
            assert!(dirichlet(&x1, &f).unwrap() / variance(&x1.pi, &f) >= r.gap - 1e-12);
        }
    }

    #[test]
    fn iterative_matches_dense() {
        let g = crate::graph::sample_er(9, 2.0, 4).unwrap();
        let model = IsingModel::uniform(g, 0.5);
        let x1 = build_generator(&ChainSpec::new(ChainKind::X1, model, vec![true; 9])).unwrap();
        let dense = spectral_gap(&x1).unwrap();
        let it = iterative_gap(&x1, 3).unwrap();
        assert!((dense.gap - it.gap).abs() < 1e-8, "{} vs {}", dense.gap, it.gap);
        assert!(it.residual <= ITERATIVE_RESIDUAL);
    }

    #[test]
    fn non_reversible_is_rejected() {
        let model = IsingModel::uniform(Graph::path(3), 0.4);
        let x3 = build_generator(&ChainSpec::new(ChainKind::X3, model, vec![true, false, true])).unwrap();
        assert!(matches!(spectral_gap(&x3), Err(Error::InvalidArgument(_))));
        let spectrum = general_spectrum(&x3).unwrap();
        assert!(spectrum[0].0.abs() < 1e-12);
        assert!(spectrum.iter().filter(|e| (e.0 - 2.0).abs() < 1e-9).count() >= 4);
    }

    #[test]
    fn suite_examples() {
        let edge = comparison_suite(&IsingModel::uniform(Graph::path(2), 0.5), &[true, true], 10.0).unwrap();
        assert!(edge.ok(), "{edge:?}");
        assert!((edge.gaps.x1 - edge.gaps.x4).abs() < 1e-10);
        let p3 = comparison_suite(&IsingModel::uniform(Graph::path(3), 0.4), &[true, false, true], 10.0).unwrap();
        assert!(p3.ok(), "{p3:?}");
        assert_eq!(p3.embedding_matched, 4);
        let back = replay(&p3.instance).unwrap();
        assert_eq!(back.gaps.x4, p3.gaps.x4);
    }

    #[test]
    fn chen_eldan_examples() {
        let zeta = 0.05;
        let product = ChenEldanInput::new(&IsingModel::uniform(Graph::empty(3), 0.0), DMatrix::identity(3, 3) * zeta, 1).unwrap();
        let r = chen_eldan_bound(&product, &|t| product.exact_alpha(t)).unwrap();
        assert!(r.ok && r.bound <= r.actual_gap);
        assert!((r.actual_gap - 1.0 / 3.0).abs() < 1e-12);

        let beta = 0.5;
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]) + DMatrix::identity(2, 2) * 4.0;
        let edge = ChenEldanInput::new(&IsingModel::uniform(Graph::path(2), beta), j, 2).unwrap();
        let exact = chen_eldan_bound(&edge, &|t| edge.exact_alpha(t)).unwrap();
        assert!(exact.ok);
        let loose = chen_eldan_bound(&edge, &|t| edge.exact_alpha(t) + 1.0).unwrap();
        assert!(loose.bound <= exact.bound);

        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(ChenEldanInput::new(&IsingModel::uniform(Graph::path(2), beta), bad, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn alpha_examples() {
        let p = ModelParams::critical(2.0).unwrap();
        let cycle = Graph::cycle(12);
        let part = Partition::from_labels(&cycle, vec![true; 12]);
        let a = AlphaMajorant::new(&cycle, &part, &p).unwrap();
        assert!((a.eval(1.0) - p.c_prime * p.delta * p.log_d(12)).abs() < 1e-15);
        let t = 0.3;
        let r = p.theta().powf(0.4) * (p.beta * (1.0 - t)).tanh().powf(0.6);
        let closed = 2.0 * (r.powi(a.start as i32) - r.powi(12)) / (1.0 - r);
        assert!((a.tail(t) - closed).abs() < 1e-8);

        let empty = Graph::empty(5);
        let a = AlphaMajorant::new(&empty, &Partition::from_labels(&empty, vec![true; 5]), &p).unwrap();
        assert_eq!(a.tail(0.0), 0.0);
    }

    #[test]
    fn covariance_chain_examples() {
        let beta = crate::params::critical_beta(2.0);
        let p3 = IsingModel::uniform(Graph::path(3), beta);
        let dead = covariance_opnorm_chain_check(&p3, &[true; 3], 1.0, &[0.0; 3]).unwrap();
        assert!(dead.links().iter().all(|&l| (l - 1.0).abs() < 1e-12), "{dead:?}");
        let edge = covariance_opnorm_chain_check(&IsingModel::uniform(Graph::path(2), 0.7), &[true; 2], 0.5, &[0.0; 2]).unwrap();
        assert!(edge.ok(), "{edge:?}");
        assert!((edge.zero_field - (1.0 + 0.35f64.tanh())).abs() < 1e-12);
        let tilted = covariance_opnorm_chain_check(&p3, &[true; 3], 0.3, &[0.4, -1.3, 0.8]).unwrap();
        assert!(tilted.ok(), "{tilted:?}");
    }
}
