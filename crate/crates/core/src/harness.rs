//! Experiment orchestration: configuration, seeded multi-node runs of the
//! five trainers, prequential metric logging, and CSV emission.
//!
//! Every round follows predict-then-update: a node's squared error at time
//! `t` is computed before its trainer sees the label of item `t`. All
//! randomness comes from substreams derived from `(seed, purpose, node, t)`,
//! so runs are reproducible regardless of worker-pool size.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::data::{
    format_f64, load_jsonl, partition, synth_varlen, synth_window_series, Dataset,
    PartitionScheme,
};
use crate::distributed::{dekf_round, mcdpf_round};
use crate::error::{Error, Result};
use crate::filters::{
    ekf_measurement_update, ekf_time_update, init_particles, pf_round, EkfState, Particle,
};
use crate::graph::{load_graph_file, metropolis_weights, Graph};
use crate::lstm::{pack, LstmParams, PoolingMode};
use crate::rng::{substream, STREAM_INIT, STREAM_ROUND, STREAM_WALK};
use crate::sgd::{sgd_step, SgdState};
use crate::state_space::{AugmentedState, NoiseSpec, StateSpace};

/// Width of the uniform parameter prior at t = 0, shared by every trainer.
pub const THETA_INIT_BOUND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Sgd,
    Ekf,
    Pf,
    Dekf,
    Dpf,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Algorithm::Sgd),
            "ekf" => Ok(Algorithm::Ekf),
            "pf" => Ok(Algorithm::Pf),
            "dekf" => Ok(Algorithm::Dekf),
            "dpf" => Ok(Algorithm::Dpf),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Sgd => "sgd",
            Algorithm::Ekf => "ekf",
            Algorithm::Pf => "pf",
            Algorithm::Dekf => "dekf",
            Algorithm::Dpf => "dpf",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Ring,
    Complete,
    Line,
    File(PathBuf),
}

impl std::str::FromStr for GraphSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(GraphSpec::Ring),
            "complete" => Ok(GraphSpec::Complete),
            "line" => Ok(GraphSpec::Line),
            other => match other.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(GraphSpec::File(PathBuf::from(path))),
                _ => Err(Error::Config(format!("unknown graph spec `{other}`"))),
            },
        }
    }
}

/// Dataset source: a JSONL file or one of the synthetic generators.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    File(PathBuf),
    Window {
        len: usize,
        a1: f64,
        a2: f64,
        noise_sd: f64,
        /// Generator seed; defaults to the experiment seed.
        seed: Option<u64>,
    },
    Varlen {
        len: usize,
        m_max: usize,
        teacher_seed: u64,
        noise_sd: f64,
        seed: Option<u64>,
    },
}

fn parse_kv_list(body: &str, context: &str) -> Result<Vec<(String, String)>> {
    body.split(',')
        .filter(|part| !part.trim().is_empty())
        .map(|part| {
            let (k, v) = part.split_once('=').ok_or_else(|| {
                Error::Config(format!("{context}: expected key=value, got `{part}`"))
            })?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

impl std::str::FromStr for DataSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(Error::Config("empty dataset path".into()));
            }
            return Ok(DataSpec::File(PathBuf::from(path)));
        }
        if let Some(body) = s.strip_prefix("window:") {
            let mut len = 2002usize;
            let mut a1 = 0.9f64;
            let mut a2 = -0.2f64;
            let mut noise_sd = 0.01f64;
            let mut seed = None;
            for (k, v) in parse_kv_list(body, "window data spec")? {
                let bad = |e: std::num::ParseFloatError| Error::Config(format!("window {k}: {e}"));
                match k.as_str() {
                    "len" => len = v.parse().map_err(|e| Error::Config(format!("window len: {e}")))?,
                    "a1" => a1 = v.parse().map_err(bad)?,
                    "a2" => a2 = v.parse().map_err(bad)?,
                    "noise_sd" => noise_sd = v.parse().map_err(bad)?,
                    "seed" => {
                        seed = Some(v.parse().map_err(|e| Error::Config(format!("window seed: {e}")))?)
                    }
                    other => return Err(Error::Config(format!("window: unknown key `{other}`"))),
                }
            }
            return Ok(DataSpec::Window {
                len,
                a1,
                a2,
                noise_sd,
                seed,
            });
        }
        if let Some(body) = s.strip_prefix("varlen:") {
            let mut len = 800usize;
            let mut m_max = 3usize;
            let mut teacher_seed = 7u64;
            let mut noise_sd = 0.1f64;
            let mut seed = None;
            for (k, v) in parse_kv_list(body, "varlen data spec")? {
                match k.as_str() {
                    "len" => len = v.parse().map_err(|e| Error::Config(format!("varlen len: {e}")))?,
                    "m_max" => {
                        m_max = v.parse().map_err(|e| Error::Config(format!("varlen m_max: {e}")))?
                    }
                    "teacher_seed" => {
                        teacher_seed = v
                            .parse()
                            .map_err(|e| Error::Config(format!("varlen teacher_seed: {e}")))?
                    }
                    "noise_sd" => {
                        noise_sd = v
                            .parse()
                            .map_err(|e: std::num::ParseFloatError| Error::Config(format!("varlen noise_sd: {e}")))?
                    }
                    "seed" => {
                        seed = Some(v.parse().map_err(|e| Error::Config(format!("varlen seed: {e}")))?)
                    }
                    other => return Err(Error::Config(format!("varlen: unknown key `{other}`"))),
                }
            }
            return Ok(DataSpec::Varlen {
                len,
                m_max,
                teacher_seed,
                noise_sd,
                seed,
            });
        }
        Err(Error::Config(format!("unknown data spec `{s}`")))
    }
}

/// One experiment: which trainer, model dimensions, network, noise scales
/// and data source. Field names double as the config-file keys.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub n: usize,
    pub p: usize,
    pub pooling: PoolingMode,
    pub nodes: usize,
    pub graph: GraphSpec,
    /// Particles per node (particle trainers).
    pub particles: usize,
    /// Markov steps per round (distributed particle trainer).
    pub steps: usize,
    /// Process noise scale: Q = q0 * I (also the initial covariance scale).
    pub q0: f64,
    /// Measurement noise variance.
    pub r: f64,
    /// Learning rate (gradient trainer).
    pub mu: f64,
    pub seed: u64,
    /// Rounds to run (T).
    pub rounds: usize,
    pub data: DataSpec,
    pub partition: PartitionScheme,
    /// Worker threads for per-node fan-out. Results are identical for any
    /// value.
    pub workers: usize,
}

impl ExperimentConfig {
    /// Parse the flat `key = value` config format. `algorithm` and `data`
    /// are required; everything else has the paper-default value.
    pub fn parse(text: &str) -> Result<Self> {
        let mut algorithm = None;
        let mut data = None;
        let mut cfg = ExperimentConfig {
            algorithm: Algorithm::Sgd,
            n: 2,
            p: 2,
            pooling: PoolingMode::Mean,
            nodes: 4,
            graph: GraphSpec::Ring,
            particles: 80,
            steps: 3,
            q0: 4e-4,
            r: 0.01,
            mu: 0.1,
            seed: 0,
            rounds: 500,
            data: DataSpec::Window {
                len: 0,
                a1: 0.0,
                a2: 0.0,
                noise_sd: 0.0,
                seed: None,
            },
            partition: PartitionScheme::RoundRobin,
            workers: 1,
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", idx + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let ctx = |e: String| Error::Config(format!("line {}: {key}: {e}", idx + 1));
            match key {
                "algorithm" => algorithm = Some(value.parse::<Algorithm>()?),
                "n" => cfg.n = value.parse().map_err(|e| ctx(format!("{e}")))?,
                "p" => cfg.p = value.parse().map_err(|e| ctx(format!("{e}")))?,
                "pooling" => cfg.pooling = value.parse()?,
                "nodes" => cfg.nodes = value.parse().map_err(|e| ctx(format!("{e}")))?,
                "graph" => cfg.graph = value.parse()?,
                "particles" => cfg.particles = value.parse().map_err(|e| ctx(format!("{e}")))?,
                "steps" => cfg.steps = value.parse().map_err(|e| ctx(format!("{e}")))?,
                "q0" => cfg.q0 = value.parse().map_err(|e| ctx(format!("{e}")))?,
                "r" => cfg.r = value.parse().map_err(|e| ctx(format!("{e}")))?,
                "mu" => cfg.mu = value.parse().map_err(|e| ctx(format!("{e}")))?,
                "seed" => cfg.seed = value.parse().map_err(|e| ctx(format!("{e}")))?,
                "rounds" => cfg.rounds = value.parse().map_err(|e| ctx(format!("{e}")))?,
                "data" => data = Some(value.parse::<DataSpec>()?),
                "partition" => cfg.partition = value.parse()?,
                "workers" => cfg.workers = value.parse().map_err(|e| ctx(format!("{e}")))?,
                other => return Err(Error::Config(format!("line {}: unknown key `{other}`", idx + 1))),
            }
        }
        cfg.algorithm = algorithm.ok_or_else(|| Error::Config("missing required key `algorithm`".into()))?;
        cfg.data = data.ok_or_else(|| Error::Config("missing required key `data`".into()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::Config("n and p must be positive".into()));
        }
        if self.nodes == 0 {
            return Err(Error::Config("nodes must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        if !(self.q0 >= 0.0) || !(self.r > 0.0) {
            return Err(Error::Config("q0 must be nonnegative and r positive".into()));
        }
        match self.algorithm {
            Algorithm::Sgd => {
                if !(self.mu > 0.0) {
                    return Err(Error::Config("sgd requires a positive mu".into()));
                }
            }
            Algorithm::Pf | Algorithm::Dpf => {
                if self.particles == 0 {
                    return Err(Error::Config("particle trainers require particles >= 1".into()));
                }
                if self.algorithm == Algorithm::Dpf && self.steps == 0 {
                    return Err(Error::Config("dpf requires steps >= 1".into()));
                }
            }
            Algorithm::Ekf | Algorithm::Dekf => {}
        }
        Ok(())
    }

    fn build_graph(&self) -> Result<Graph> {
        let g = match &self.graph {
            GraphSpec::Ring => Graph::ring(self.nodes)?,
            GraphSpec::Complete => Graph::complete(self.nodes)?,
            GraphSpec::Line => Graph::line(self.nodes)?,
            GraphSpec::File(path) => {
                let g = load_graph_file(path)?;
                if g.node_count() != self.nodes {
                    return Err(Error::Config(format!(
                        "graph file has {} nodes but config says {}",
                        g.node_count(),
                        self.nodes
                    )));
                }
                g
            }
        };
        Ok(g)
    }

    fn build_dataset(&self) -> Result<Dataset> {
        let ds = match &self.data {
            DataSpec::File(path) => load_jsonl(path)?,
            DataSpec::Window {
                len,
                a1,
                a2,
                noise_sd,
                seed,
            } => synth_window_series(seed.unwrap_or(self.seed), *len, *a1, *a2, *noise_sd)?,
            DataSpec::Varlen {
                len,
                m_max,
                teacher_seed,
                noise_sd,
                seed,
            } => {
                let mut teacher_rng = substream(*teacher_seed, STREAM_INIT, u64::MAX, 0);
                let teacher = LstmParams::random_uniform(self.n, self.p, 0.5, &mut teacher_rng);
                synth_varlen(
                    seed.unwrap_or(self.seed),
                    *len,
                    self.p,
                    *m_max,
                    &teacher,
                    *noise_sd,
                )?
            }
        };
        if let Some(p) = ds.feature_dim() {
            if p != self.p {
                return Err(Error::Config(format!(
                    "dataset has p = {p} but config says p = {}",
                    self.p
                )));
            }
        }
        Ok(ds)
    }
}

/// One logged row: prequential squared error and the running per-node mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub t: usize,
    pub node: usize,
    pub algorithm: Algorithm,
    pub squared_error: f64,
    pub cumulative_mse: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    rows: Vec<MetricsRow>,
}

impl MetricsLog {
    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Mean over nodes of the per-node cumulative MSE at round `t`.
    pub fn network_cumulative_mse(&self, t: usize) -> Option<f64> {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|row| row.t == t)
            .map(|row| row.cumulative_mse)
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    }

    pub fn final_round(&self) -> Option<usize> {
        self.rows.last().map(|row| row.t)
    }
}

/// Full result of a run: the metrics plus each node's final state estimate.
#[derive(Debug)]
pub struct ExperimentOutput {
    pub log: MetricsLog,
    /// Final augmented-state estimate per node.
    pub estimates: Vec<AugmentedState>,
}

fn collect_errors<T>(results: Vec<Result<T>>, t: usize) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(results.len());
    for (node, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(Error::Round { .. }) => return Err(r.err().unwrap()),
            Err(e) => return Err(e.at_round(t, node)),
        }
    }
    Ok(out)
}

/// Run one experiment to completion. Deterministic for a fixed config.
pub fn run_experiment_full(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let ss = StateSpace::new(cfg.n, cfg.p, cfg.pooling);
    let graph = cfg.build_graph()?;
    let k = graph.node_count();
    let mut log = MetricsLog::default();

    if cfg.rounds == 0 {
        return Ok(ExperimentOutput {
            log,
            estimates: Vec::new(),
        });
    }

    let dataset = cfg.build_dataset()?;
    let streams = partition(&dataset, k, cfg.partition)?;
    if streams.min_len() < cfg.rounds {
        return Err(Error::InsufficientData {
            need: cfg.rounds * k,
            have: dataset.len(),
        });
    }

    let noise = NoiseSpec::isotropic(ss.dim(), cfg.q0, cfg.r)?;
    let weights = metropolis_weights(&graph);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("failed to build worker pool: {e}")))?;

    let init_theta = |node: usize| -> LstmParams {
        let mut rng = substream(cfg.seed, STREAM_INIT, node as u64, 0);
        LstmParams::random_uniform(cfg.n, cfg.p, THETA_INIT_BOUND, &mut rng)
    };
    let init_augmented = |node: usize| -> AugmentedState {
        AugmentedState::from_parts(
            DVector::zeros(cfg.n),
            DVector::zeros(cfg.n),
            pack(&init_theta(node)),
        )
        .expect("matching block sizes")
    };
    let node_rng = |node: usize, t: usize| substream(cfg.seed, STREAM_ROUND, node as u64, t as u64);

    enum Trainers {
        Sgd(Vec<SgdState>),
        Ekf(Vec<EkfState>),
        Pf(Vec<Vec<Particle>>),
        Dekf(Vec<EkfState>),
        Dpf(Vec<Vec<Particle>>),
    }

    let mut trainers = match cfg.algorithm {
        Algorithm::Sgd => Trainers::Sgd(
            (0..k)
                .map(|node| SgdState::new(init_theta(node), cfg.mu))
                .collect::<Result<_>>()?,
        ),
        Algorithm::Ekf => Trainers::Ekf(
            (0..k)
                .map(|node| EkfState::isotropic(init_augmented(node), cfg.q0))
                .collect(),
        ),
        Algorithm::Dekf => Trainers::Dekf(
            (0..k)
                .map(|node| EkfState::isotropic(init_augmented(node), cfg.q0))
                .collect(),
        ),
        Algorithm::Pf | Algorithm::Dpf => {
            let sets: Vec<Vec<Particle>> = (0..k)
                .map(|node| {
                    let mut rng = substream(cfg.seed, STREAM_INIT, node as u64, 0);
                    init_particles(&ss, cfg.particles, node, THETA_INIT_BOUND, &mut rng)
                })
                .collect();
            if cfg.algorithm == Algorithm::Pf {
                Trainers::Pf(sets)
            } else {
                Trainers::Dpf(sets)
            }
        }
    };

    // Latest per-node state estimates, refreshed every round.
    let mut estimates: Vec<AugmentedState> = (0..k).map(init_augmented).collect();
    let mut cumulative = vec![0.0f64; k];

    for t in 1..=cfg.rounds {
        let items: Vec<_> = (0..k).map(|node| streams.stream(node)[t - 1].clone()).collect();

        // Per-node prequential predictions for this round.
        let predictions: Vec<f64> = match &mut trainers {
            Trainers::Sgd(states) => {
                let results: Vec<Result<f64>> = pool.install(|| {
                    states
                        .par_iter_mut()
                        .zip(items.par_iter())
                        .map(|(state, item)| sgd_step(state, &item.x, item.label, cfg.pooling))
                        .collect()
                });
                let predictions = collect_errors(results, t)?;
                for (node, state) in states.iter().enumerate() {
                    estimates[node] = AugmentedState::from_parts(
                        state.carry.c.clone(),
                        state.carry.y.clone(),
                        pack(&state.params),
                    )?;
                }
                predictions
            }
            Trainers::Ekf(states) => {
                let results: Vec<Result<(EkfState, f64)>> = pool.install(|| {
                    states
                        .par_iter()
                        .zip(items.par_iter())
                        .map(|(state, item)| {
                            let prediction = ss.measurement(&state.a)?;
                            let posterior =
                                ekf_measurement_update(state, &ss, item.label, noise.r())?;
                            let next = ekf_time_update(&posterior, &ss, &item.x, &noise)?;
                            Ok((next, prediction))
                        })
                        .collect()
                });
                let outcome = collect_errors(results, t)?;
                let mut predictions = Vec::with_capacity(k);
                for (node, (next, prediction)) in outcome.into_iter().enumerate() {
                    estimates[node] = next.a.clone();
                    states[node] = next;
                    predictions.push(prediction);
                }
                predictions
            }
            Trainers::Dekf(states) => {
                let mut predictions = Vec::with_capacity(k);
                for state in states.iter() {
                    predictions.push(ss.measurement(&state.a)?);
                }
                let next = pool
                    .install(|| dekf_round(states, &items, &graph, &weights, &ss, &noise))
                    .map_err(|e| match e {
                        Error::Round { node, source, .. } => source.at_round(t, node),
                        other => other,
                    })?;
                for (node, state) in next.iter().enumerate() {
                    estimates[node] = state.a.clone();
                }
                *states = next;
                predictions
            }
            Trainers::Pf(sets) => {
                let mut rngs: Vec<ChaCha12Rng> = (0..k).map(|node| node_rng(node, t)).collect();
                let results: Vec<Result<(f64, AugmentedState)>> = pool.install(|| {
                    sets.par_iter_mut()
                        .zip(rngs.par_iter_mut())
                        .zip(items.par_iter())
                        .map(|((set, rng), item)| {
                            let round = pf_round(set, item, &ss, &noise, rng)?;
                            Ok((round.prediction, round.estimate))
                        })
                        .collect()
                });
                let outcome = collect_errors(results, t)?;
                let mut predictions = Vec::with_capacity(k);
                for (node, (prediction, estimate)) in outcome.into_iter().enumerate() {
                    estimates[node] = estimate;
                    predictions.push(prediction);
                }
                predictions
            }
            Trainers::Dpf(sets) => {
                let mut rngs: Vec<ChaCha12Rng> = (0..k).map(|node| node_rng(node, t)).collect();
                let mut walk_rng = substream(cfg.seed, STREAM_WALK, 0, t as u64);
                let taken = std::mem::take(sets);
                let out = pool.install(|| {
                    mcdpf_round(
                        taken,
                        &items,
                        &graph,
                        cfg.steps,
                        &ss,
                        &noise,
                        &mut rngs,
                        &mut walk_rng,
                    )
                })?;
                *sets = out.nodes;
                let predictions = collect_errors(out.predictions, t)?;
                let ests = collect_errors(out.estimates, t)?;
                for (node, estimate) in ests.into_iter().enumerate() {
                    estimates[node] = estimate;
                }
                predictions
            }
        };

        for node in 0..k {
            let squared_error = {
                let residual = items[node].label - predictions[node];
                residual * residual
            };
            cumulative[node] += (squared_error - cumulative[node]) / t as f64;
            log.rows.push(MetricsRow {
                t,
                node,
                algorithm: cfg.algorithm,
                squared_error,
                cumulative_mse: cumulative[node],
            });
        }
    }

    Ok(ExperimentOutput {
        log,
        estimates,
    })
}

/// Run one experiment and return only the metrics log.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsLog> {
    Ok(run_experiment_full(cfg)?.log)
}

/// Write the log as CSV: header then rows in `(t, node)` order, floats with
/// 17 significant digits.
pub fn emit_csv_writer(log: &MetricsLog, mut writer: impl Write) -> Result<()> {
    writeln!(writer, "t,node,algorithm,squared_error,cumulative_mse")?;
    for row in log.rows() {
        writeln!(
            writer,
            "{},{},{},{},{}",
            row.t,
            row.node,
            row.algorithm,
            format_f64(row.squared_error),
            format_f64(row.cumulative_mse)
        )?;
    }
    Ok(())
}

pub fn emit_csv(log: &MetricsLog, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    emit_csv_writer(log, std::io::BufWriter::new(file))
}

/// Parameter swept by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Particles per node.
    Particles,
    /// Markov steps per round.
    Steps,
}

#[derive(Debug)]
pub struct SweepRun {
    pub value: usize,
    pub log: MetricsLog,
    pub wall_seconds: f64,
}

/// Re-run the experiment once per value with fresh identical seeds,
/// recording wall-clock time per run.
pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[usize]) -> Result<Vec<SweepRun>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut runs = Vec::with_capacity(values.len());
    for &value in values {
        let mut cfg = cfg.clone();
        match param {
            SweepParam::Particles => cfg.particles = value,
            SweepParam::Steps => cfg.steps = value,
        }
        let start = Instant::now();
        let log = run_experiment(&cfg)?;
        runs.push(SweepRun {
            value,
            log,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(runs)
}
