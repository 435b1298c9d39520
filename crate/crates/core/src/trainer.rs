//! Self-play training loop.
//!
//! Each iteration plays `episodes` games on freshly generated instances with
//! guided search against a frozen copy of the network, reshapes every
//! terminal reward into a ranked ±1 target, stores the games, then runs
//! `train_steps` Adam steps on minibatches drawn from the most recent
//! `dataset_games` games. A checkpoint (`ckpt_<iter>.r2`) and a row of
//! `metrics.csv` are written after every iteration.
//!
//! Resuming restores the network, optimizer state and reward buffer; the
//! example store starts empty and refills from self-play.

use std::collections::VecDeque;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Dim, EnvError, PackState};
use crate::generator::{cube_bin, generate, GenError};
use crate::mcts::{improved_policy, SearchConfig, SearchError, SearchTree, TerminalScore};
use crate::net::{featurize, Checkpoint, FeatureMatrix, NetError, NetParams, NetShape, Sample};
use crate::ranking::{BufferOwner, Percentile, RankError, Ranker, RewardBuffer};

pub const HISTOGRAM_BINS: usize = 20;
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("episode (instance seed {seed}): {source}")]
    Episode {
        seed: u64,
        #[source]
        source: Box<TrainError>,
    },
    #[error("non-finite values at iteration {iter}: {source}; last good checkpoint kept")]
    Diverged {
        iter: u64,
        #[source]
        source: NetError,
    },
    #[error("example store is empty")]
    EmptyStore,
    #[error("resume: {0}")]
    Resume(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

type Result<T, E = TrainError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// ±1 targets against the buffer percentile.
    Ranked,
    /// Targets and terminal backups use `2r − 1` directly.
    RankFree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// 2 or 3.
    pub dim: u8,
    pub items: usize,
    /// Edge of the square/cube the generator splits.
    pub bin_edge: i64,
    pub seed: u64,
    pub iterations: u64,
    pub episodes: usize,
    pub simulations: usize,
    pub buffer_capacity: usize,
    pub dataset_games: usize,
    pub batch_size: usize,
    pub train_steps: usize,
    pub alpha: f64,
    pub learning_rate: f64,
    pub l2: f64,
    pub hidden: usize,
    pub threads: usize,
    pub reward_mode: RewardMode,
    pub c_puct: f64,
    pub dirichlet_epsilon: f64,
    pub dirichlet_alpha: f64,
    /// Record wall time in the metrics; off gives byte-reproducible files.
    pub timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 2,
            items: 10,
            bin_edge: 10,
            seed: 0,
            iterations: 50,
            episodes: 50,
            simulations: 300,
            buffer_capacity: 250,
            dataset_games: 500,
            batch_size: 32,
            train_steps: 50,
            alpha: 75.0,
            learning_rate: 1e-3,
            l2: 1e-4,
            hidden: 64,
            threads: 1,
            reward_mode: RewardMode::Ranked,
            c_puct: 1.25,
            dirichlet_epsilon: 0.25,
            dirichlet_alpha: 0.3,
            timing: true,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text).map_err(|e| TrainError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dimension(&self) -> Result<Dim> {
        Dim::from_number(self.dim).ok_or_else(|| TrainError::Config(format!("dim must be 2 or 3, got {}", self.dim)))
    }

    pub fn percentile(&self) -> Result<Percentile> {
        Percentile::new(self.alpha).map_err(|e| TrainError::Config(e.to_string()))
    }

    pub fn net_shape(&self) -> Result<NetShape> {
        Ok(NetShape::new(crate::net::feature_width(self.dimension()?), self.hidden))
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            simulations: self.simulations,
            c_puct: self.c_puct,
            dirichlet_epsilon: self.dirichlet_epsilon,
            dirichlet_alpha: self.dirichlet_alpha,
            root_noise: true,
            ..SearchConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dimension()?;
        self.percentile()?;
        let positive = [
            ("items", self.items),
            ("episodes", self.episodes),
            ("simulations", self.simulations),
            ("buffer_capacity", self.buffer_capacity),
            ("dataset_games", self.dataset_games),
            ("batch_size", self.batch_size),
            ("hidden", self.hidden),
            ("threads", self.threads),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(TrainError::Config(format!("{name} must be positive")));
            }
        }
        if self.bin_edge < 1 {
            return Err(TrainError::Config("bin_edge must be positive".into()));
        }
        let cells = match self.dimension()? {
            Dim::Two => self.bin_edge.saturating_mul(self.bin_edge),
            Dim::Three => self.bin_edge.saturating_mul(self.bin_edge).saturating_mul(self.bin_edge),
        };
        if (self.items as i64) > cells {
            return Err(TrainError::Config(format!(
                "{} items do not fit a bin of edge {}",
                self.items, self.bin_edge
            )));
        }
        if !(self.learning_rate > 0.0) || !(self.l2 >= 0.0) {
            return Err(TrainError::Config("learning_rate must be positive and l2 non-negative".into()));
        }
        self.search_config().validate()?;
        Ok(())
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a `(iteration, index, stream)` triple under a master seed.
pub fn derive_seed(master: u64, iter: u64, index: u64, stream: u64) -> u64 {
    mix(mix(mix(mix(master) ^ iter) ^ index) ^ stream)
}

const STREAM_INSTANCE: u64 = 1;
const STREAM_SEARCH: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_INIT: u64 = 4;

/// One self-play game: a feature matrix and search policy per move.
#[derive(Clone, Debug)]
pub struct GameRecord {
    pub steps: Vec<(FeatureMatrix, Vec<f64>)>,
    pub instance_seed: u64,
    pub reward: f64,
    pub cost: i64,
    pub origin_cost: i64,
}

impl GameRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Final cost equals the cost of the bin the instance was cut from.
    pub fn optimal(&self) -> bool {
        self.cost == self.origin_cost
    }
}

#[derive(Clone, Debug)]
struct StoredGame {
    steps: Vec<(FeatureMatrix, Vec<f64>)>,
    z: f64,
}

/// FIFO of games; every move of a game shares the game's target `z`.
#[derive(Clone, Debug)]
pub struct ExampleStore {
    games: VecDeque<StoredGame>,
    capacity: usize,
    triplets: usize,
}

impl ExampleStore {
    pub fn new(capacity: usize) -> Self {
        ExampleStore {
            games: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
            triplets: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn games(&self) -> usize {
        self.games.len()
    }

    pub fn triplets(&self) -> usize {
        self.triplets
    }

    pub fn is_empty(&self) -> bool {
        self.triplets == 0
    }

    /// Targets of the stored games, oldest first.
    pub fn game_targets(&self) -> Vec<f64> {
        self.games.iter().map(|g| g.z).collect()
    }

    pub fn push(&mut self, record: GameRecord, z: f64) {
        if self.games.len() == self.capacity {
            if let Some(old) = self.games.pop_front() {
                self.triplets -= old.steps.len();
            }
        }
        self.triplets += record.steps.len();
        self.games.push_back(StoredGame { steps: record.steps, z });
    }

    /// `b` triplets uniformly over all stored moves; without replacement when
    /// the store holds at least `b`, with replacement otherwise.
    pub fn sample<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Result<Vec<Sample<'_>>> {
        if self.triplets == 0 {
            return Err(TrainError::EmptyStore);
        }
        let picks: Vec<usize> = if self.triplets >= b {
            index::sample(rng, self.triplets, b).into_vec()
        } else {
            (0..b).map(|_| rng.random_range(0..self.triplets)).collect()
        };
        let mut starts = Vec::with_capacity(self.games.len());
        let mut at = 0;
        for g in &self.games {
            starts.push(at);
            at += g.steps.len();
        }
        Ok(picks
            .into_iter()
            .map(|p| {
                let gi = starts.partition_point(|&s| s <= p) - 1;
                let g = &self.games[gi];
                let (f, pi) = &g.steps[p - starts[gi]];
                Sample {
                    features: f,
                    policy: pi,
                    value: g.z,
                }
            })
            .collect())
    }
}

fn terminal_score(cfg: &TrainConfig, owner: &BufferOwner) -> TerminalScore {
    match cfg.reward_mode {
        RewardMode::Ranked => TerminalScore::ranked(owner.snapshot()),
        RewardMode::RankFree => TerminalScore::Affine,
    }
}

/// Plays one game on the instance generated from `instance_seed`.
///
/// Moves in the first third of the game are sampled from the visit
/// distribution, later moves take the most visited action. The stored policy
/// is always the plain visit distribution.
pub fn run_episode<R: Rng + ?Sized>(
    net: &NetParams,
    owner: &BufferOwner,
    cfg: &TrainConfig,
    instance_seed: u64,
    rng: &mut R,
) -> Result<GameRecord> {
    let wrap = |e: TrainError| TrainError::Episode {
        seed: instance_seed,
        source: Box::new(e),
    };
    let dim = cfg.dimension()?;
    let inst = generate(dim, cfg.items, cube_bin(dim, cfg.bin_edge), instance_seed).map_err(|e| wrap(e.into()))?;
    let problem = inst.problem().map_err(|e| wrap(e.into()))?;
    let n = problem.len();
    let explore = n.div_ceil(3);
    let search = cfg.search_config();
    let mut tree = SearchTree::new(PackState::new(problem)).map_err(|e| wrap(e.into()))?;
    let mut steps = Vec::with_capacity(n);
    for t in 0..n {
        let counts = tree
            .search(Some(net), terminal_score(cfg, owner), &search, rng)
            .map_err(|e| wrap(e.into()))?;
        let pi = improved_policy(&counts, 1.0).map_err(|e| wrap(e.into()))?;
        let choice = if t < explore {
            sample_index(&pi, rng)
        } else {
            let best = *counts.iter().max().expect("non-empty");
            counts.iter().position(|&c| c == best).expect("max exists")
        };
        let feats = featurize(tree.root_state(), tree.root_actions()).map_err(|e| wrap(e.into()))?;
        steps.push((feats, pi));
        tree.advance(choice).map_err(|e| wrap(e.into()))?;
    }
    let end = tree.root_state();
    Ok(GameRecord {
        steps,
        instance_seed,
        reward: end.terminal_reward().map_err(|e| wrap(e.into()))?,
        cost: end.bin_cost_int().map_err(|e| wrap(e.into()))?,
        origin_cost: inst.origin_cost(),
    })
}

fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Pushes `record.reward` into the buffer, reshapes it against the
/// post-push threshold and stores the game. Returns the target.
pub fn rank_and_store<R: Rng + ?Sized>(
    record: GameRecord,
    owner: &BufferOwner,
    store: &mut ExampleStore,
    mode: RewardMode,
    rng: &mut R,
) -> Result<f64> {
    let r = record.reward;
    let threshold = owner.push_and_threshold(r)?;
    let z = match mode {
        RewardMode::Ranked => Ranker::default().rank(r, threshold, rng),
        RewardMode::RankFree => 2.0 * r - 1.0,
    };
    store.push(record, z);
    Ok(z)
}

/// `steps` Adam steps on minibatches of `batch` triplets.
pub fn train_iteration<R: Rng + ?Sized>(
    net: &mut NetParams,
    store: &ExampleStore,
    steps: usize,
    batch: usize,
    lr: f64,
    l2: f64,
    rng: &mut R,
) -> Result<f64, TrainError> {
    if steps == 0 {
        return Ok(f64::NAN);
    }
    let mut last = f64::NAN;
    for _ in 0..steps {
        let samples = store.sample(batch, rng)?;
        let (loss, grad) = net.loss_and_grad(&samples, l2)?;
        net.adam_step(&grad, lr)?;
        last = loss;
    }
    Ok(last)
}

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationMetrics {
    pub iter: u64,
    pub mean_reward: f64,
    pub optimality_pct: f64,
    /// Threshold of the buffer at the end of the iteration.
    pub r_alpha: f64,
    pub histogram: [u32; HISTOGRAM_BINS],
    pub seconds: f64,
    /// Loss of the last minibatch (not written to the CSV).
    pub last_loss: f64,
}

pub fn metrics_header() -> String {
    let mut h = String::from("iter,mean_reward,optimality_pct,r_alpha");
    for i in 0..HISTOGRAM_BINS {
        h.push_str(&format!(",hist_{i:02}"));
    }
    h.push_str(",seconds");
    h
}

impl IterationMetrics {
    pub fn csv_row(&self) -> String {
        let mut s = format!(
            "{},{:.6},{:.2},{:.6}",
            self.iter, self.mean_reward, self.optimality_pct, self.r_alpha
        );
        for c in self.histogram {
            s.push_str(&format!(",{c}"));
        }
        s.push_str(&format!(",{:.3}", self.seconds));
        s
    }

    /// Share of the iteration's episodes in the top reward bin.
    pub fn top_bin_share(&self) -> f64 {
        let total: u32 = self.histogram.iter().sum();
        if total == 0 {
            0.0
        } else {
            self.histogram[HISTOGRAM_BINS - 1] as f64 / total as f64
        }
    }
}

/// Bin `i` covers `[i/20, (i+1)/20)`; the last bin also holds 1.0.
pub fn histogram_bin(r: f64) -> usize {
    ((r * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

/// Final state of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub net: NetParams,
    pub buffer: RewardBuffer,
    pub history: Vec<IterationMetrics>,
}

pub fn checkpoint_path(out: &Path, iter: u64) -> PathBuf {
    out.join(format!("ckpt_{iter}.r2"))
}

fn play_iteration(
    net: &NetParams,
    owner: &BufferOwner,
    cfg: &TrainConfig,
    iter: u64,
    store: &mut ExampleStore,
) -> Result<Vec<GameRecord>> {
    let play = |ep: usize| -> Result<(GameRecord, ChaCha8Rng)> {
        let inst_seed = derive_seed(cfg.seed, iter, ep as u64, STREAM_INSTANCE);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, iter, ep as u64, STREAM_SEARCH));
        let rec = run_episode(net, owner, cfg, inst_seed, &mut rng)?;
        Ok((rec, rng))
    };
    let mut records = Vec::with_capacity(cfg.episodes);
    if cfg.threads <= 1 {
        for ep in 0..cfg.episodes {
            let (rec, mut rng) = play(ep)?;
            records.push(rec.clone());
            rank_and_store(rec, owner, store, cfg.reward_mode, &mut rng)?;
        }
    } else {
        // workers rank in completion order through the shared owner
        let store_lock = Mutex::new(std::mem::replace(store, ExampleStore::new(cfg.dataset_games)));
        let done = Mutex::new(Vec::with_capacity(cfg.episodes));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| TrainError::Config(format!("thread pool: {e}")))?;
        let result: Result<()> = pool.install(|| {
            use rayon::prelude::*;
            (0..cfg.episodes).into_par_iter().try_for_each(|ep| {
                let (rec, mut rng) = play(ep)?;
                let mut st = store_lock.lock().expect("store lock");
                done.lock().expect("records lock").push(rec.clone());
                rank_and_store(rec, owner, &mut st, cfg.reward_mode, &mut rng)?;
                Ok(())
            })
        });
        *store = store_lock.into_inner().expect("store lock");
        result?;
        records = done.into_inner().expect("records lock");
    }
    Ok(records)
}

fn summarize(iter: u64, records: &[GameRecord], r_alpha: f64, seconds: f64, last_loss: f64) -> IterationMetrics {
    let m = records.len().max(1) as f64;
    let mut histogram = [0u32; HISTOGRAM_BINS];
    for r in records {
        histogram[histogram_bin(r.reward)] += 1;
    }
    IterationMetrics {
        iter,
        mean_reward: records.iter().map(|r| r.reward).sum::<f64>() / m,
        optimality_pct: 100.0 * records.iter().filter(|r| r.optimal()).count() as f64 / m,
        r_alpha,
        histogram,
        seconds,
        last_loss,
    }
}

/// Keeps the header and the rows up to `last_iter` of an existing metrics file.
fn truncate_metrics(path: &Path, last_iter: u64) -> Result<String> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            out.push_str(line);
            out.push('\n');
            continue;
        }
        let keep = line
            .split(',')
            .next()
            .and_then(|x| x.parse::<u64>().ok())
            .is_some_and(|it| it <= last_iter);
        if keep {
            out.push_str(line);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Runs `cfg.iterations` iterations, writing into `out`. With `resume`, the
/// run continues after the checkpoint's iteration. `progress` sees every
/// metrics row as it is written.
pub fn train(
    cfg: &TrainConfig,
    out: &Path,
    resume: Option<&Path>,
    mut progress: impl FnMut(&IterationMetrics),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let shape = cfg.net_shape()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let metrics_path = out.join(METRICS_FILE);

    let (mut net, buffer, first_iter, metrics_text) = match resume {
        Some(path) => {
            let ck = Checkpoint::load(path, Some(shape.features))?;
            if ck.net.shape() != shape {
                return Err(TrainError::Resume(format!(
                    "checkpoint hidden width {} but config says {}",
                    ck.net.shape().hidden,
                    shape.hidden
                )));
            }
            let done = ck
                .iteration
                .ok_or_else(|| TrainError::Resume("checkpoint has no iteration (not a training checkpoint)".into()))?;
            let buffer = match ck.buffer {
                Some(b) if b.capacity() == cfg.buffer_capacity => b,
                Some(b) => {
                    let kept: Vec<f64> = b.entries().collect();
                    let skip = kept.len().saturating_sub(cfg.buffer_capacity);
                    RewardBuffer::from_entries(cfg.buffer_capacity, &kept[skip..])?
                }
                None => RewardBuffer::new(cfg.buffer_capacity)?,
            };
            let text = if metrics_path.exists() {
                truncate_metrics(&metrics_path, done)?
            } else {
                format!("{}\n", metrics_header())
            };
            (ck.net, buffer, done + 1, text)
        }
        None => {
            let net = NetParams::init(shape, derive_seed(cfg.seed, 0, 0, STREAM_INIT));
            (net, RewardBuffer::new(cfg.buffer_capacity)?, 1, format!("{}\n", metrics_header()))
        }
    };
    fs::write(&metrics_path, &metrics_text).map_err(io_err(&metrics_path))?;
    let owner = BufferOwner::new(buffer, cfg.percentile()?);
    let mut store = ExampleStore::new(cfg.dataset_games);
    let mut history = Vec::new();

    for iter in first_iter..=cfg.iterations {
        let start = Instant::now();
        let snapshot = net.clone();
        let records = play_iteration(&snapshot, &owner, cfg, iter, &mut store)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, iter, 0, STREAM_TRAIN));
        let last_loss = train_iteration(
            &mut net,
            &store,
            cfg.train_steps,
            cfg.batch_size,
            cfg.learning_rate,
            cfg.l2,
            &mut rng,
        )
        .map_err(|e| match e {
            TrainError::Net(source) => TrainError::Diverged { iter, source },
            other => other,
        })?;
        if !net.all_finite() {
            return Err(TrainError::Diverged {
                iter,
                source: NetError::NonFinite("parameters".into()),
            });
        }
        let r_alpha = owner.snapshot().unwrap_or(f64::NAN);
        let seconds = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
        let row = summarize(iter, &records, r_alpha, seconds, last_loss);

        let ck = Checkpoint {
            net: net.clone(),
            buffer: Some(owner.buffer()),
            iteration: Some(iter),
        };
        ck.save(&checkpoint_path(out, iter))?;
        let mut f = fs::OpenOptions::new()
            .append(true)
            .open(&metrics_path)
            .map_err(io_err(&metrics_path))?;
        writeln!(f, "{}", row.csv_row()).map_err(io_err(&metrics_path))?;
        progress(&row);
        history.push(row);
    }
    Ok(TrainOutcome {
        net,
        buffer: owner.into_buffer(),
        history,
    })
}
