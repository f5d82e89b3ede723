use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use critlab::chains::{
    build_generator, empirical_law, heat_kernel_row, simulate as simulate_one, simulate_replicas, tv_distance, ChainKind, ChainSpec,
};
use critlab::experiment::{
    calibrate_constants, chen_eldan_instance, comparison_sweep, run_scaling_study, run_verification_battery,
    BatteryConfig, BetaSpec, CalibrationConfig, ScalingConfig,
};
use critlab::graph::sample_er;
use critlab::ising::{max_susceptibility, weitz_identity_check_model, IsingModel, MAX_FREE_SPINS};
use critlab::seed::rng_for;
use critlab::spectral::{
    chen_eldan_bound, general_gap, general_spectrum, replay, spectral_gap, ComparisonInstance,
    ComparisonReport,
};
use critlab::structure::{check_no_tangle, partition as split, verify_structure as verify, Prop3Mode};
use critlab::walks::{lemma410_412_checks, lemma44_residual, lemma45_check, perron, saw_counts, NbOperator, DEFAULT_SAW_BUDGET};
use critlab::{Error, Graph, ModelParams, Result};

use crate::config::{announce, resolve};
use crate::Outcome;

/// Options shared by every command.
pub struct Io {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub json: bool,
}

impl Io {
    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text)?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
        text.push('\n');
        self.emit(&text)
    }

    fn load<C, F>(&self, section: &str, flags: &F) -> Result<C>
    where
        C: serde::de::DeserializeOwned + Serialize + Default,
        F: Serialize,
    {
        let cfg: C = resolve(self.config.as_deref(), section, flags)?;
        announce(section, &cfg);
        Ok(cfg)
    }
}

/// Where the graph comes from: a file, or `G(n, d/n)` with a seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphSource {
    pub graph: Option<PathBuf>,
    pub n: usize,
    pub d: f64,
    pub seed: u64,
}

impl Default for GraphSource {
    fn default() -> Self {
        Self { graph: None, n: 1000, d: 2.0, seed: 1 }
    }
}

impl GraphSource {
    fn build(&self) -> Result<Graph> {
        match &self.graph {
            Some(path) => Graph::load(path),
            None => sample_er(self.n, self.d, self.seed),
        }
    }
}

#[derive(Args, Serialize)]
pub struct GraphFlags {
    /// Edge-list file written by `generate`.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Mean degree of G(n, d/n).
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Flattens graph flags and command flags into one override object.
#[derive(Serialize)]
struct Merged<'a, A: Serialize, B: Serialize> {
    #[serde(flatten)]
    a: &'a A,
    #[serde(flatten)]
    b: &'a B,
}

fn parse_vertex_list(text: &str, n: usize) -> Result<Vec<usize>> {
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let v: usize = t.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad vertex {t:?}")))?;
            if v >= n {
                return Err(Error::InvalidParameter(format!("vertex {v} out of range for n = {n}")));
            }
            Ok(v)
        })
        .collect()
}

/// `in_b` from an explicit list of `A` vertices (empty means all in `B`).
fn b_labels(a: &str, n: usize) -> Result<Vec<bool>> {
    let mut in_b = vec![true; n];
    for v in parse_vertex_list(a, n)? {
        in_b[v] = false;
    }
    Ok(in_b)
}

fn params_from(d: f64, beta: BetaSpec, c: f64, c_prime: f64, c_double_prime: f64, k: f64, delta: f64) -> Result<ModelParams> {
    let p = ModelParams { c, c_prime, c_double_prime, k, delta, ..ModelParams::critical(d)?.with_beta(beta.resolve(d)) };
    p.validate()?;
    Ok(p)
}

fn csv_rows<I: IntoIterator<Item = String>>(header: &str, rows: I) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------- generate

#[derive(Args, Serialize)]
pub struct GenerateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphFlags,
}

pub fn generate(io: &Io, a: GenerateArgs) -> Result<Outcome> {
    let cfg: GraphSource = io.load("generate", &a.graph)?;
    let g = cfg.build()?;
    let mut buf = Vec::new();
    g.write_to(&mut buf)?;
    io.emit(&String::from_utf8_lossy(&buf))?;
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- partition

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StructureConfig {
    #[serde(flatten)]
    pub source: GraphSource,
    pub c: f64,
    pub c_prime: f64,
    pub c_double_prime: f64,
    pub k: f64,
    pub delta: f64,
    /// No-tangle constants.
    pub tangle_c: f64,
    pub tangle_c0: f64,
    /// Force the sampled good-edge check with this many paths.
    pub samples: Option<usize>,
}

impl Default for StructureConfig {
    fn default() -> Self {
        Self {
            source: GraphSource::default(),
            c: 8.0,
            c_prime: 8.0,
            c_double_prime: 8.0,
            k: 4.0,
            delta: ModelParams::DEFAULT_DELTA,
            tangle_c: 4.0,
            tangle_c0: 0.125,
            samples: None,
        }
    }
}

impl StructureConfig {
    fn params(&self) -> Result<ModelParams> {
        params_from(self.source.d, BetaSpec::Critical, self.c, self.c_prime, self.c_double_prime, self.k, self.delta)
    }
}

#[derive(Args, Serialize)]
pub struct StructureFlags {
    /// Partition threshold C.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    c_prime: Option<f64>,
    #[arg(long)]
    c_double_prime: Option<f64>,
    /// Non-backtracking horizon constant K.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    tangle_c: Option<f64>,
    #[arg(long)]
    tangle_c0: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
pub struct PartitionArgs {
    #[command(flatten)]
    graph: GraphFlags,
    #[command(flatten)]
    structure: StructureFlags,
}

pub fn partition(io: &Io, a: PartitionArgs) -> Result<Outcome> {
    let cfg: StructureConfig = io.load("partition", &Merged { a: &a.graph, b: &a.structure })?;
    let g = cfg.source.build()?;
    let part = split(&g, &cfg.params()?);
    if io.json {
        #[derive(Serialize)]
        struct Summary<'a> {
            n: usize,
            radius: usize,
            a_vertices: Vec<usize>,
            h_components: &'a [Vec<usize>],
        }
        io.emit_json(&Summary { n: g.n(), radius: part.radius, a_vertices: part.a_vertices(), h_components: &part.h_components })?;
    } else {
        io.emit(&csv_rows(
            "vertex,degree,growth_stat,in_b",
            (0..g.n()).map(|v| format!("{v},{},{:.6},{}", g.degree(v), part.growth_stat[v], part.in_b[v])),
        ))?;
    }
    eprintln!("|A| = {} of {}", part.a_vertices().len(), g.n());
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- verify-structure

#[derive(Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    graph: GraphFlags,
    #[command(flatten)]
    structure: StructureFlags,
}

pub fn verify_structure(io: &Io, a: VerifyArgs) -> Result<Outcome> {
    let cfg: StructureConfig = io.load("verify-structure", &Merged { a: &a.graph, b: &a.structure })?;
    let g = cfg.source.build()?;
    let p = cfg.params()?;
    let part = split(&g, &p);
    let mode = match cfg.samples {
        Some(k) => Prop3Mode::Sampled { k, seed: cfg.source.seed },
        None => Prop3Mode::default_for(g.n(), cfg.source.seed),
    };
    let report = verify(&g, &part, &p, mode)?;
    let tangle = check_no_tangle(&g, &p, cfg.tangle_c, cfg.tangle_c0);
    #[derive(Serialize)]
    struct Both<'a> {
        properties: &'a critlab::structure::PropertyReport,
        no_tangle: &'a critlab::structure::NoTangleReport,
    }
    io.emit_json(&Both { properties: &report, no_tangle: &tangle })?;
    if report.all_ok() && tangle.flags().iter().all(|&f| f) {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::CheckFailed(format!("properties {:?}, no-tangle events {:?}", report.flags(), tangle.flags())))
    }
}

// ---------------------------------------------------------------- saw-count

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SawConfig {
    #[serde(flatten)]
    pub source: GraphSource,
    pub vertex: usize,
    pub max_len: usize,
    pub budget: u64,
}

impl Default for SawConfig {
    fn default() -> Self {
        Self { source: GraphSource::default(), vertex: 0, max_len: 10, budget: DEFAULT_SAW_BUDGET }
    }
}

#[derive(Args, Serialize)]
pub struct SawArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphFlags,
    #[arg(long)]
    vertex: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Node budget of the enumeration.
    #[arg(long)]
    budget: Option<u64>,
}

pub fn saw_count(io: &Io, a: SawArgs) -> Result<Outcome> {
    let cfg: SawConfig = io.load("saw-count", &a)?;
    let g = cfg.source.build()?;
    if cfg.vertex >= g.n() {
        return Err(Error::InvalidParameter(format!("vertex {} out of range", cfg.vertex)));
    }
    let counts = saw_counts(&g, cfg.vertex, cfg.max_len, cfg.budget)?;
    if io.json {
        io.emit_json(&counts)?;
    } else {
        io.emit(&csv_rows("length,count", counts.iter().enumerate().map(|(l, c)| format!("{l},{c}"))))?;
    }
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- nb-analyze

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NbConfig {
    #[serde(flatten)]
    pub source: GraphSource,
    pub k: f64,
    /// Extra lengths beyond the horizon for the shifted SAW sums.
    pub extra: usize,
}

impl Default for NbConfig {
    fn default() -> Self {
        Self { source: GraphSource::default(), k: 4.0, extra: 4 }
    }
}

#[derive(Args, Serialize)]
pub struct NbArgs {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphFlags,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    extra: Option<usize>,
}

pub fn nb_analyze(io: &Io, a: NbArgs) -> Result<Outcome> {
    let cfg: NbConfig = io.load("nb-analyze", &a)?;
    let g = cfg.source.build()?;
    let p = ModelParams { k: cfg.k, ..ModelParams::critical(cfg.source.d)? };
    p.validate()?;
    let op = NbOperator::new(&g);
    let lambda1 = perron(&op, 1e-12, 100_000).ok().map(|pd| pd.lambda1);
    let residual = lemma44_residual(&g, &p);
    let horizon = p.nb_horizon(g.n());
    let ells: Vec<usize> = (horizon..=horizon + cfg.extra).collect();
    let sums = lemma45_check(&g, &p, &ells)?;
    let constants = lemma410_412_checks(&g, &p)?;
    #[derive(Serialize)]
    struct Report {
        lambda1: Option<f64>,
        rank_one: critlab::walks::Lemma44Report,
        shifted_saw_sums: Vec<critlab::walks::Lemma45Report>,
        constants: critlab::walks::WalkConstants,
    }
    io.emit_json(&Report { lambda1, rank_one: residual, shifted_saw_sums: sums, constants })?;
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- models

/// A uniform model on a graph, or a model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSource {
    #[serde(flatten)]
    pub source: GraphSource,
    pub beta: BetaSpec,
    /// `{"edges": [[u, v, beta]], "fields": {..}}`; overrides the graph.
    pub model: Option<PathBuf>,
}

impl Default for ModelSource {
    fn default() -> Self {
        Self { source: GraphSource { n: 8, ..GraphSource::default() }, beta: BetaSpec::Critical, model: None }
    }
}

impl ModelSource {
    fn build(&self) -> Result<IsingModel> {
        match &self.model {
            Some(path) => IsingModel::from_json(&std::fs::read_to_string(path)?),
            None => Ok(IsingModel::uniform(self.source.build()?, self.beta.resolve(self.source.d))),
        }
    }
}

#[derive(Args, Serialize)]
pub struct ModelFlags {
    #[command(flatten)]
    #[serde(flatten)]
    graph: GraphFlags,
    /// Inverse temperature or "critical".
    #[arg(long)]
    beta: Option<String>,
    /// Model JSON with per-edge couplings and fields.
    #[arg(long)]
    model: Option<PathBuf>,
}

impl ModelFlags {
    fn validated(&self) -> Result<()> {
        if let Some(b) = &self.beta {
            b.parse::<BetaSpec>().map_err(|e| Error::InvalidParameter(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ModelOverrides<'a> {
    #[serde(flatten)]
    graph: &'a GraphFlags,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<serde_json::Value>,
    model: &'a Option<PathBuf>,
}

impl<'a> From<&'a ModelFlags> for ModelOverrides<'a> {
    fn from(f: &'a ModelFlags) -> Self {
        let beta = f.beta.as_ref().map(|b| match b.parse::<f64>() {
            Ok(x) => serde_json::json!(x),
            Err(_) => serde_json::json!(b),
        });
        Self { graph: &f.graph, beta, model: &f.model }
    }
}

// ---------------------------------------------------------------- weitz-check

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct WeitzConfig {
    #[serde(flatten)]
    pub model: ModelSource,
    pub v: usize,
    pub y: usize,
}

#[derive(Args)]
pub struct WeitzArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    v: Option<usize>,
    #[arg(long)]
    y: Option<usize>,
}

/// Tolerance on the tree identity.
const WEITZ_TOL: f64 = 1e-10;

pub fn weitz_check(io: &Io, a: WeitzArgs) -> Result<Outcome> {
    a.model.validated()?;
    #[derive(Serialize)]
    struct F {
        v: Option<usize>,
        y: Option<usize>,
    }
    let cfg: WeitzConfig = io.load("weitz-check", &Merged { a: &ModelOverrides::from(&a.model), b: &F { v: a.v, y: a.y } })?;
    let model = cfg.model.build()?;
    if cfg.v >= model.n() || cfg.y >= model.n() {
        return Err(Error::InvalidParameter("v and y must be vertices".into()));
    }
    let c = weitz_identity_check_model(&model, cfg.v, cfg.y)?;
    io.emit_json(&c)?;
    if c.discrepancy <= WEITZ_TOL {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::CheckFailed(format!("discrepancy {:e} exceeds {WEITZ_TOL:e}", c.discrepancy)))
    }
}

// ---------------------------------------------------------------- susceptibility

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SusceptibilityConfig {
    #[serde(flatten)]
    pub model: ModelSource,
}

#[derive(Args)]
pub struct SusceptibilityArgs {
    #[command(flatten)]
    model: ModelFlags,
}

pub fn susceptibility(io: &Io, a: SusceptibilityArgs) -> Result<Outcome> {
    a.model.validated()?;
    let cfg: SusceptibilityConfig = io.load("susceptibility", &ModelOverrides::from(&a.model))?;
    let model = cfg.model.build()?;
    if model.free_vertices().len() > MAX_FREE_SPINS {
        return Err(Error::ResourceLimit(format!("more than {MAX_FREE_SPINS} free spins")));
    }
    let (chi, argmax) = max_susceptibility(&model)?;
    io.emit_json(&serde_json::json!({ "susceptibility": chi, "argmax": argmax }))?;
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub model: ModelSource,
    pub chain: String,
    /// Comma-separated `A` vertices.
    pub a: String,
    pub rate_a: f64,
    pub t_end: f64,
    pub replicas: usize,
    pub sim_seed: u64,
    /// Binary trajectory log of replica 0.
    pub log: Option<PathBuf>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            model: ModelSource::default(),
            chain: "X1".into(),
            a: String::new(),
            rate_a: 1.0,
            t_end: 1.0,
            replicas: 10_000,
            sim_seed: 1,
            log: None,
        }
    }
}

#[derive(Args, Serialize)]
pub struct ChainFlags {
    /// X1, X2, X3, X4, X5, Y1, Y1tilde or Y2.
    #[arg(long)]
    chain: Option<String>,
    /// Comma-separated A vertices; all others are in B.
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    rate_a: Option<f64>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    chain: ChainFlags,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    sim_seed: Option<u64>,
    #[arg(long)]
    log: Option<PathBuf>,
}

fn chain_spec(model: IsingModel, chain: &str, a: &str, rate_a: f64) -> Result<ChainSpec> {
    let kind: ChainKind = chain.parse().map_err(|e: Error| Error::InvalidParameter(e.to_string()))?;
    let in_b = b_labels(a, model.n())?;
    let n = model.n();
    let mut spec = ChainSpec::new(kind, model, in_b).with_rate_a(rate_a);
    if kind == ChainKind::Y2 {
        spec = spec.with_frozen(vec![1; n]);
    }
    spec.validate().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(spec)
}

pub fn simulate(io: &Io, a: SimulateArgs) -> Result<Outcome> {
    a.model.validated()?;
    #[derive(Serialize)]
    struct F<'a> {
        #[serde(flatten)]
        chain: &'a ChainFlags,
        t_end: Option<f64>,
        replicas: Option<usize>,
        sim_seed: Option<u64>,
        log: &'a Option<PathBuf>,
    }
    let flags = F { chain: &a.chain, t_end: a.t_end, replicas: a.replicas, sim_seed: a.sim_seed, log: &a.log };
    let cfg: SimulateConfig = io.load("simulate", &Merged { a: &ModelOverrides::from(&a.model), b: &flags })?;
    if !(cfg.t_end >= 0.0) || cfg.replicas == 0 {
        return Err(Error::InvalidParameter("t_end >= 0 and replicas > 0 required".into()));
    }
    let spec = chain_spec(cfg.model.build()?, &cfg.chain, &cfg.a, cfg.rate_a)?;
    let sigma0 = vec![1i8; spec.model.n()];
    if let Some(path) = &cfg.log {
        let traj = simulate_one(&spec, &sigma0, cfg.t_end, cfg.sim_seed)?;
        traj.write_log(std::io::BufWriter::new(std::fs::File::create(path)?))?;
        eprintln!("wrote {} events to {}", traj.events.len(), path.display());
    }
    let finals = simulate_replicas(&spec, &sigma0, cfg.t_end, cfg.replicas, cfg.sim_seed)?;
    let gen = build_generator(&spec)?;
    let empirical = empirical_law(&gen, &finals);
    let exact = heat_kernel_row(&gen, gen.index_of(&sigma0), cfg.t_end);
    let tv = tv_distance(&empirical, &exact)?;
    if io.json {
        io.emit_json(&serde_json::json!({ "tv": tv, "empirical": empirical, "exact": exact }))?;
    } else {
        io.emit(&csv_rows(
            "state,empirical,exact",
            empirical.iter().zip(&exact).enumerate().map(|(x, (e, h))| format!("{x},{e:.8},{h:.8}")),
        ))?;
    }
    eprintln!("TV(simulated, heat kernel) = {tv:.5} over {} replicas", cfg.replicas);
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- spectra

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectraConfig {
    #[serde(flatten)]
    pub model: ModelSource,
    pub chain: String,
    pub a: String,
    pub rate_a: f64,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        Self { model: ModelSource::default(), chain: "X1".into(), a: String::new(), rate_a: 1.0 }
    }
}

#[derive(Args)]
pub struct SpectraArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    chain: ChainFlags,
}

pub fn spectra(io: &Io, a: SpectraArgs) -> Result<Outcome> {
    a.model.validated()?;
    let cfg: SpectraConfig = io.load("spectra", &Merged { a: &ModelOverrides::from(&a.model), b: &a.chain })?;
    let spec = chain_spec(cfg.model.build()?, &cfg.chain, &cfg.a, cfg.rate_a)?;
    let gen = build_generator(&spec)?;
    if spec.kind.reversible() {
        let r = spectral_gap(&gen)?;
        if io.json {
            io.emit_json(&r)?;
        } else {
            io.emit(&csv_rows("index,eigenvalue", r.eigenvalues.iter().enumerate().map(|(i, e)| format!("{i},{e:.15e}"))))?;
        }
        eprintln!("gap = {:.12}", r.gap);
    } else {
        let s = general_spectrum(&gen)?;
        let gap = general_gap(&s);
        if io.json {
            io.emit_json(&serde_json::json!({ "eigenvalues": s, "gap": gap }))?;
        } else {
            io.emit(&csv_rows("index,re,im", s.iter().enumerate().map(|(i, e)| format!("{i},{:.15e},{:.15e}", e.0, e.1))))?;
        }
        eprintln!("gap (smallest nonzero real part) = {gap:.12}");
    }
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- compare-suite

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    pub n: usize,
    pub min_n: usize,
    pub seeds: usize,
    pub betas: Vec<f64>,
    pub rate_a: f64,
    pub master_seed: u64,
    /// Counterexample dumps go here.
    pub dump_dir: Option<PathBuf>,
    /// Replays one dump instead of sweeping.
    pub replay: Option<PathBuf>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            n: 8,
            min_n: 2,
            seeds: 30,
            betas: vec![0.2, critlab::params::critical_beta(2.0)],
            rate_a: 50.0,
            master_seed: 1,
            dump_dir: None,
            replay: None,
        }
    }
}

#[derive(Args, Serialize)]
pub struct CompareArgs {
    /// Largest instance size; `seeds` is the number of instances.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    min_n: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    /// Comma-separated inverse temperatures; "critical" means d = 2.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<String>>,
    #[arg(long)]
    rate_a: Option<f64>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    #[arg(long)]
    replay: Option<PathBuf>,
}

fn comparison_row(r: &ComparisonReport) -> String {
    let g = &r.gaps;
    format!(
        "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6},{}",
        r.instance.n,
        r.b_size,
        r.instance.edges.len(),
        g.x1,
        g.x2,
        g.x3,
        g.x4,
        g.x5,
        g.y1,
        g.y1_tilde,
        r.projection_margin,
        r.acceleration_margin,
        r.embedding_mismatch,
        r.block_margin,
        r.restricted_lower_margin,
        r.restricted_upper_margin,
        r.c0_prime,
        r.measured_c2,
        r.ok()
    )
}

const COMPARISON_HEADER: &str = "n,b_size,edges,gap_x1,gap_x2,gap_x3,gap_x4,gap_x5,gap_y1,gap_y1tilde,projection_margin,acceleration_margin,embedding_mismatch,block_margin,restricted_lower_margin,restricted_upper_margin,c0_prime,measured_c2,ok";

fn dump(dir: &Path, reports: &[ComparisonReport]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, r) in reports.iter().enumerate() {
        let path = dir.join(format!("counterexample_{i:03}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(r).map_err(|e| Error::Parse(e.to_string()))?)?;
        eprintln!("dumped {}", path.display());
    }
    Ok(())
}

pub fn compare_suite(io: &Io, a: CompareArgs) -> Result<Outcome> {
    let betas = a
        .beta
        .as_ref()
        .map(|list| {
            list.iter()
                .map(|b| b.parse::<BetaSpec>().map(|s| s.resolve(2.0)).map_err(|e| Error::InvalidParameter(e.to_string())))
                .collect::<Result<Vec<f64>>>()
        })
        .transpose()?;
    #[derive(Serialize)]
    struct F<'a> {
        #[serde(flatten)]
        rest: &'a CompareArgs,
        betas: Option<Vec<f64>>,
    }
    let mut flags = serde_json::to_value(F { rest: &a, betas }).map_err(|e| Error::Parse(e.to_string()))?;
    flags.as_object_mut().unwrap().remove("beta");
    let cfg: CompareConfig = io.load("compare-suite", &flags)?;
    if let Some(path) = &cfg.replay {
        let text = std::fs::read_to_string(path)?;
        let instance: ComparisonInstance = match serde_json::from_str::<ComparisonReport>(&text) {
            Ok(r) => r.instance,
            Err(_) => serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("replay file: {e}")))?,
        };
        let r = replay(&instance)?;
        if io.json {
            io.emit_json(&r)?;
        } else {
            io.emit(&csv_rows(COMPARISON_HEADER, [comparison_row(&r)]))?;
        }
        return Ok(if r.ok() { Outcome::Ok } else { Outcome::CheckFailed(format!("replayed flags {:?}", r.flags())) });
    }
    if cfg.n < cfg.min_n || cfg.min_n < 1 || cfg.n > 10 || cfg.betas.is_empty() || cfg.seeds == 0 || !(cfg.rate_a >= 1.0) {
        return Err(Error::InvalidParameter("need 1 <= min_n <= n <= 10, seeds > 0, betas non-empty, rate_a >= 1".into()));
    }
    let sweep = comparison_sweep(cfg.seeds, cfg.min_n, cfg.n, &cfg.betas, cfg.rate_a, cfg.master_seed)?;
    if io.json {
        io.emit_json(&sweep)?;
    } else {
        io.emit(&csv_rows(COMPARISON_HEADER, sweep.reports.iter().map(comparison_row)))?;
    }
    if let Some(dir) = &cfg.dump_dir {
        dump(dir, &sweep.counterexamples)?;
    }
    eprintln!("{} instances, {} failures", sweep.outcome.checked, sweep.outcome.failures);
    Ok(if sweep.outcome.passed() {
        Outcome::Ok
    } else {
        Outcome::CheckFailed(format!("{} comparison instances failed", sweep.outcome.failures))
    })
}

// ---------------------------------------------------------------- chen-eldan

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ChenEldanConfig {
    pub m: usize,
    pub instances: usize,
    pub master_seed: u64,
}

impl Default for ChenEldanConfig {
    fn default() -> Self {
        Self { m: 6, instances: 5, master_seed: 1 }
    }
}

#[derive(Args, Serialize)]
pub struct ChenEldanArgs {
    /// Spins per instance.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
}

pub fn chen_eldan(io: &Io, a: ChenEldanArgs) -> Result<Outcome> {
    let cfg: ChenEldanConfig = io.load("chen-eldan", &a)?;
    if !(2..=critlab::spectral::CHEN_ELDAN_MAX_M).contains(&cfg.m) || cfg.instances == 0 {
        return Err(Error::InvalidParameter(format!("m must lie in 2..={}", critlab::spectral::CHEN_ELDAN_MAX_M)));
    }
    let mut reports = Vec::new();
    for i in 0..cfg.instances {
        let mut rng = rng_for(cfg.master_seed, &[i as u64]);
        let input = chen_eldan_instance(cfg.m, &mut rng)?;
        let r = chen_eldan_bound(&input, &|t| input.exact_alpha(t))?;
        reports.push(r);
    }
    if io.json {
        io.emit_json(&reports)?;
    } else {
        io.emit(&csv_rows(
            "instance,epsilon_sampled,alpha_integral,j_norm,bound,actual_gap,ok",
            reports.iter().enumerate().map(|(i, r)| {
                format!("{i},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}", r.epsilon, r.alpha_integral, r.j_norm, r.bound, r.actual_gap, r.ok)
            }),
        ))?;
    }
    let failures = reports.iter().filter(|r| !r.ok).count();
    Ok(if failures == 0 { Outcome::Ok } else { Outcome::CheckFailed(format!("{failures} instances below the bound")) })
}

// ---------------------------------------------------------------- scaling-study

#[derive(Args, Serialize)]
pub struct ScalingArgs {
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    d: Option<f64>,
    /// Inverse temperature or "critical".
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    proxy_horizon: Option<f64>,
    /// JSON with the fitted exponents.
    #[arg(long)]
    #[serde(skip)]
    fit_out: Option<PathBuf>,
}

pub fn scaling_study(io: &Io, a: ScalingArgs) -> Result<Outcome> {
    let mut flags = serde_json::to_value(&a).map_err(|e| Error::Parse(e.to_string()))?;
    if let Some(b) = &a.beta {
        let spec: BetaSpec = b.parse().map_err(|e: Error| Error::InvalidParameter(e.to_string()))?;
        flags["beta"] = serde_json::to_value(spec).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let cfg: ScalingConfig = io.load("scaling-study", &flags)?;
    let report = run_scaling_study(&cfg)?;
    if io.json {
        io.emit_json(&report)?;
    } else {
        io.emit(&report.csv())?;
    }
    let fits = serde_json::json!({
        "beta": report.beta,
        "exponent": report.exponent,
        "exponent_over_log": report.exponent_over_log,
        "proxy_exponent": report.proxy_exponent,
    });
    match &a.fit_out {
        Some(path) => std::fs::write(path, serde_json::to_string_pretty(&fits).unwrap())?,
        None => eprintln!("{}", serde_json::to_string_pretty(&fits).unwrap()),
    }
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- calibrate

#[derive(Args, Serialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    min_exp: Option<i32>,
    #[arg(long)]
    max_exp: Option<i32>,
    #[arg(long)]
    target: Option<f64>,
}

pub fn calibrate(io: &Io, a: CalibrateArgs) -> Result<Outcome> {
    let cfg: CalibrationConfig = io.load("calibrate", &a)?;
    let report = calibrate_constants(&cfg)?;
    io.emit_json(&report)?;
    if report.params.is_none() {
        eprintln!("no feasible constants within the grid");
    }
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- battery

#[derive(Args, Serialize)]
pub struct BatteryArgs {
    #[arg(long)]
    master_seed: Option<u64>,
    /// Partition constant C.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    c_prime: Option<f64>,
    #[arg(long)]
    c_double_prime: Option<f64>,
    #[arg(long)]
    structure_n: Option<usize>,
    #[arg(long)]
    structure_seeds: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    dump_dir: Option<PathBuf>,
}

pub fn battery(io: &Io, a: BatteryArgs) -> Result<Outcome> {
    let cfg: BatteryConfig = io.load("battery", &a)?;
    let report = run_verification_battery(&cfg)?;
    if io.json {
        io.emit_json(&report)?;
    } else {
        io.emit(&report.csv())?;
    }
    if let Some(dir) = &a.dump_dir {
        dump(dir, &report.counterexamples)?;
    }
    Ok(if report.passed() {
        Outcome::Ok
    } else {
        let failed: Vec<&str> = report.sweeps.iter().filter(|s| s.hard && !s.passed()).map(|s| s.name.as_str()).collect();
        Outcome::CheckFailed(format!("hard sweeps failed: {failed:?}"))
    })
}
