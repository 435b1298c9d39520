//! Comparison agents.
//!
//! Every agent plays through [`PackState`] and only sees the item sizes, so
//! all of them compete on the same action set and every layout they return
//! re-validates against the environment.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{Action, Dim, EnvError, PackState, Placement, Problem};
use crate::generator::{cube_bin, generate, optimal_sequence, GenError, Instance};
use crate::mcts::{SearchConfig, SearchError, SearchTree, TerminalScore};
use crate::net::{featurize, FeatureMatrix, NetError, NetParams, NetShape, Sample};

pub const EXHAUSTIVE_MAX_ITEMS: usize = 6;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("exhaustive search is limited to {EXHAUSTIVE_MAX_ITEMS} items, got {0}")]
    TooManyItems(usize),
    #[error("no legal action after {placed} placements")]
    DeadEnd { placed: usize },
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("agent `{0}` needs a network")]
    MissingNetwork(AgentKind),
    #[error("network built for another dimensionality: {0}")]
    WrongNetwork(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Gen(#[from] GenError),
}

type Result<T, E = AgentError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentKind {
    R2Mcts,
    NetOnly,
    PlainMcts,
    Lego,
    SupervisedNet,
    Random,
    Exhaustive,
}

impl AgentKind {
    pub const ALL: [AgentKind; 7] = [
        AgentKind::R2Mcts,
        AgentKind::NetOnly,
        AgentKind::PlainMcts,
        AgentKind::Lego,
        AgentKind::SupervisedNet,
        AgentKind::Random,
        AgentKind::Exhaustive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::R2Mcts => "r2-mcts",
            AgentKind::NetOnly => "net-only",
            AgentKind::PlainMcts => "plain-mcts",
            AgentKind::Lego => "lego",
            AgentKind::SupervisedNet => "supervised-net",
            AgentKind::Random => "random",
            AgentKind::Exhaustive => "exhaustive",
        }
    }

    pub fn needs_network(self) -> bool {
        matches!(self, AgentKind::R2Mcts | AgentKind::NetOnly | AgentKind::SupervisedNet)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| AgentError::UnknownAgent(s.to_string()))
    }
}

/// A finished (or failed) packing.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub layout: Vec<Placement>,
    pub reward: f64,
    pub cost: i64,
}

impl Solution {
    pub fn from_state(state: &PackState) -> Result<Self> {
        Ok(Solution {
            layout: state.placed().to_vec(),
            reward: state.terminal_reward()?,
            cost: state.bin_cost_int()?,
        })
    }
}

/// Compares fill ratios `a.0 / a.1` and `b.0 / b.1` exactly.
fn cmp_ratio(a: (i64, i64), b: (i64, i64)) -> std::cmp::Ordering {
    (a.0 as i128 * b.1 as i128).cmp(&(b.0 as i128 * a.1 as i128))
}

fn bin_volume(state: &PackState, a: &Action) -> i64 {
    let ext = state.extents();
    let mut v = 1;
    for ax in 0..3 {
        v *= ext[ax].max(a.pos[ax] + a.size[ax]);
    }
    v
}

fn placed_volume(state: &PackState) -> i64 {
    state.placed().iter().map(|p| p.size.iter().product::<i64>()).sum()
}

/// Greedy Lego heuristic.
///
/// The largest item (lowest id on ties) goes to the origin with its extents
/// sorted in decreasing order along x, y, z. Every later move maximizes the
/// fill ratio of the resulting enclosing box, then minimizes its cost, then
/// takes the first such action in environment order.
pub fn lego_solve(problem: Arc<Problem>) -> Result<PackState> {
    let mut state = PackState::new(problem.clone());
    let first = {
        let largest = problem
            .items()
            .iter()
            .max_by(|a, b| a.volume().cmp(&b.volume()).then(b.id.cmp(&a.id)))
            .ok_or(EnvError::EmptyProblem)?;
        let mut sorted = largest.dims;
        let d = problem.dim().axes();
        sorted[..d].sort_unstable_by(|a, b| b.cmp(a));
        state
            .legal_actions()
            .into_iter()
            .find(|a| a.item_id == largest.id && a.size == sorted)
            .ok_or(AgentError::DeadEnd { placed: 0 })?
    };
    state = state.apply_action(&first)?;
    while !state.is_terminal() {
        let actions = state.legal_actions();
        let base = placed_volume(&state);
        let mut best: Option<(Action, (i64, i64), i64)> = None;
        for a in actions {
            let fill = (base + a.size.iter().product::<i64>(), bin_volume(&state, &a));
            let cost = state.cost_after(&a);
            let better = match &best {
                None => true,
                Some((_, bf, bc)) => match cmp_ratio(fill, *bf) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => cost < *bc,
                },
            };
            if better {
                best = Some((a, fill, cost));
            }
        }
        let (a, _, _) = best.ok_or(AgentError::DeadEnd {
            placed: state.step(),
        })?;
        state = state.apply_action(&a)?;
    }
    Ok(state)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustiveResult {
    pub best: PackState,
    pub reward: f64,
    /// Search nodes visited.
    pub nodes: u64,
}

/// Best terminal reward reachable in the MDP by depth-first enumeration.
///
/// With `prune`, branches whose cost already reaches the best complete cost
/// are cut (cost never decreases along a path), states reached through a
/// different move order are visited once, and the search stops at an ideal
/// packing. Both settings return the same optimum.
pub fn exhaustive_solve(problem: Arc<Problem>, prune: bool) -> Result<ExhaustiveResult> {
    if problem.len() > EXHAUSTIVE_MAX_ITEMS {
        return Err(AgentError::TooManyItems(problem.len()));
    }
    struct Dfs {
        prune: bool,
        best_cost: i64,
        best: Option<PackState>,
        seen: HashSet<Vec<Placement>>,
        nodes: u64,
    }
    impl Dfs {
        fn done(&self) -> bool {
            self.prune && self.best.as_ref().is_some_and(|b| b.is_ideal())
        }

        fn visit(&mut self, s: &PackState) -> Result<()> {
            self.nodes += 1;
            if s.is_terminal() {
                let c = s.bin_cost_int()?;
                if c < self.best_cost {
                    self.best_cost = c;
                    self.best = Some(s.clone());
                }
                return Ok(());
            }
            if self.prune {
                let mut key = s.placed().to_vec();
                key.sort_unstable_by_key(|p| p.item_id);
                if !self.seen.insert(key) {
                    return Ok(());
                }
            }
            for a in s.legal_actions() {
                if self.prune && s.cost_after(&a) >= self.best_cost {
                    continue;
                }
                self.visit(&s.apply_unchecked(&a))?;
                if self.done() {
                    break;
                }
            }
            Ok(())
        }
    }
    let mut dfs = Dfs {
        prune,
        best_cost: i64::MAX,
        best: None,
        seen: HashSet::new(),
        nodes: 0,
    };
    dfs.visit(&PackState::new(problem))?;
    let best = dfs.best.ok_or(AgentError::DeadEnd { placed: 0 })?;
    Ok(ExhaustiveResult {
        reward: best.terminal_reward()?,
        best,
        nodes: dfs.nodes,
    })
}

/// Uniformly random legal moves.
pub fn random_solve<R: Rng + ?Sized>(problem: Arc<Problem>, rng: &mut R) -> Result<PackState> {
    let mut state = PackState::new(problem);
    while !state.is_terminal() {
        let actions = state.legal_actions();
        let a = actions.choose(rng).ok_or(AgentError::DeadEnd {
            placed: state.step(),
        })?;
        state = state.apply_unchecked(a);
    }
    Ok(state)
}

/// Follows the policy head greedily (first index on ties).
pub fn greedy_net_solve(problem: Arc<Problem>, net: &NetParams) -> Result<PackState> {
    let mut state = PackState::new(problem);
    while !state.is_terminal() {
        let actions = state.legal_actions();
        if actions.is_empty() {
            return Err(AgentError::DeadEnd {
                placed: state.step(),
            });
        }
        let p = net.forward(&featurize(&state, &actions)?)?.policy;
        let mut best = 0;
        for i in 1..p.len() {
            if p[i] > p[best] {
                best = i;
            }
        }
        state = state.apply_unchecked(&actions[best]);
    }
    Ok(state)
}

/// Search at every move and play the most visited action, reusing the tree.
pub fn search_solve<R: Rng + ?Sized>(
    problem: Arc<Problem>,
    net: Option<&NetParams>,
    score: TerminalScore,
    cfg: &SearchConfig,
    rng: &mut R,
) -> Result<PackState> {
    let mut tree = SearchTree::new(PackState::new(problem))?;
    while !tree.root_state().is_terminal() {
        let counts = tree.search(net, score, cfg, rng)?;
        let top = *counts.iter().max().expect("non-empty");
        let best = counts.iter().position(|&c| c == top).expect("max exists");
        tree.advance(best)?;
    }
    Ok(tree.root_state().clone())
}

/// A runnable agent with whatever it needs attached.
#[derive(Clone, Debug)]
pub enum Agent {
    /// Guided search with a trained network; terminal backups rank against
    /// `threshold` (or use `2r − 1` when absent).
    R2Mcts {
        net: Arc<NetParams>,
        threshold: Option<f64>,
        search: SearchConfig,
    },
    NetOnly(Arc<NetParams>),
    PlainMcts(SearchConfig),
    Lego,
    SupervisedNet(Arc<NetParams>),
    Random,
    Exhaustive,
}

impl Agent {
    pub fn kind(&self) -> AgentKind {
        match self {
            Agent::R2Mcts { .. } => AgentKind::R2Mcts,
            Agent::NetOnly(_) => AgentKind::NetOnly,
            Agent::PlainMcts(_) => AgentKind::PlainMcts,
            Agent::Lego => AgentKind::Lego,
            Agent::SupervisedNet(_) => AgentKind::SupervisedNet,
            Agent::Random => AgentKind::Random,
            Agent::Exhaustive => AgentKind::Exhaustive,
        }
    }

    /// Builds an agent; network agents need `net`. Search agents run
    /// `simulations` per move without root noise.
    pub fn build(kind: AgentKind, net: Option<Arc<NetParams>>, threshold: Option<f64>, simulations: usize) -> Result<Self> {
        let need = || net.clone().ok_or(AgentError::MissingNetwork(kind));
        Ok(match kind {
            AgentKind::R2Mcts => Agent::R2Mcts {
                net: need()?,
                threshold,
                search: SearchConfig {
                    simulations,
                    ..SearchConfig::default()
                },
            },
            AgentKind::NetOnly => Agent::NetOnly(need()?),
            AgentKind::SupervisedNet => Agent::SupervisedNet(need()?),
            AgentKind::PlainMcts => Agent::PlainMcts(SearchConfig::rollout(simulations)),
            AgentKind::Lego => Agent::Lego,
            AgentKind::Random => Agent::Random,
            AgentKind::Exhaustive => Agent::Exhaustive,
        })
    }

    fn check_net(net: &NetParams, dim: Dim) -> Result<()> {
        let want = crate::net::feature_width(dim);
        if net.shape().features != want {
            return Err(AgentError::WrongNetwork(format!(
                "feature width {} but {}D problems need {want}",
                net.shape().features,
                dim.number()
            )));
        }
        Ok(())
    }

    pub fn solve(&self, problem: Arc<Problem>, seed: u64) -> Result<Solution> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = problem.dim();
        let state = match self {
            Agent::R2Mcts { net, threshold, search } => {
                Self::check_net(net, dim)?;
                search_solve(problem, Some(net), TerminalScore::ranked(*threshold), search, &mut rng)?
            }
            Agent::NetOnly(net) | Agent::SupervisedNet(net) => {
                Self::check_net(net, dim)?;
                greedy_net_solve(problem, net)?
            }
            Agent::PlainMcts(cfg) => search_solve(problem, None, TerminalScore::Affine, cfg, &mut rng)?,
            Agent::Lego => lego_solve(problem)?,
            Agent::Random => random_solve(problem, &mut rng)?,
            Agent::Exhaustive => exhaustive_solve(problem, true)?.best,
        };
        Solution::from_state(&state)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupervisedConfig {
    pub dim: Dim,
    pub items: usize,
    pub bin_edge: i64,
    pub instances: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        SupervisedConfig {
            dim: Dim::Two,
            items: 10,
            bin_edge: 10,
            instances: 500,
            epochs: 5,
            batch_size: 32,
            learning_rate: 1e-3,
            l2: 1e-4,
            hidden: 64,
            seed: 0,
        }
    }
}

/// State/action pairs along the reference sequences: features, one-hot
/// target on the reference action.
#[derive(Clone, Debug, Default)]
pub struct SupervisedData {
    pub examples: Vec<(FeatureMatrix, Vec<f64>)>,
    /// Instances whose reference sequence could not be built.
    pub skipped: usize,
}

impl SupervisedData {
    pub fn build(dim: Dim, items: usize, bin_edge: i64, seeds: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut data = SupervisedData::default();
        for seed in seeds {
            let inst = generate(dim, items, cube_bin(dim, bin_edge), seed)?;
            match optimal_sequence(&inst) {
                Ok(seq) => data.add(&inst, &seq)?,
                Err(_) => data.skipped += 1,
            }
        }
        Ok(data)
    }

    fn add(&mut self, inst: &Instance, seq: &[Placement]) -> Result<()> {
        let mut state = PackState::new(inst.problem()?);
        for step in seq {
            let actions = state.legal_actions();
            let idx = actions.iter().position(|a| a == step).ok_or(AgentError::DeadEnd {
                placed: state.step(),
            })?;
            let mut target = vec![0.0; actions.len()];
            target[idx] = 1.0;
            self.examples.push((featurize(&state, &actions)?, target));
            state = state.apply_action(step)?;
        }
        Ok(())
    }

    pub fn samples(&self) -> Vec<Sample<'_>> {
        self.examples
            .iter()
            .map(|(f, p)| Sample {
                features: f,
                policy: p,
                value: 1.0,
            })
            .collect()
    }

    /// Fraction of examples where the policy's top action is the reference one.
    pub fn accuracy(&self, net: &NetParams) -> Result<f64> {
        if self.examples.is_empty() {
            return Ok(0.0);
        }
        let mut hits = 0;
        for (f, target) in &self.examples {
            let p = net.forward(f)?.policy;
            let mut best = 0;
            for i in 1..p.len() {
                if p[i] > p[best] {
                    best = i;
                }
            }
            if target[best] == 1.0 {
                hits += 1;
            }
        }
        Ok(hits as f64 / self.examples.len() as f64)
    }

    /// Expected accuracy of a uniformly random choice.
    pub fn chance_accuracy(&self) -> f64 {
        if self.examples.is_empty() {
            return 0.0;
        }
        self.examples.iter().map(|(f, _)| 1.0 / f.rows() as f64).sum::<f64>() / self.examples.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct SupervisedOutcome {
    pub net: NetParams,
    /// Mean minibatch loss per epoch.
    pub epoch_loss: Vec<f64>,
    pub examples: usize,
    pub skipped: usize,
}

/// Trains the policy toward the reference actions and the value toward +1.
pub fn supervised_train(cfg: &SupervisedConfig) -> Result<SupervisedOutcome> {
    if cfg.batch_size == 0 || cfg.hidden == 0 || cfg.instances == 0 {
        return Err(AgentError::Config("instances, batch_size and hidden must be positive".into()));
    }
    let seeds = (0..cfg.instances as u64).map(|i| crate::trainer::derive_seed(cfg.seed, 0, i, 11));
    let data = SupervisedData::build(cfg.dim, cfg.items, cfg.bin_edge, seeds)?;
    let shape = NetShape::new(crate::net::feature_width(cfg.dim), cfg.hidden);
    let mut net = NetParams::init(shape, crate::trainer::derive_seed(cfg.seed, 0, 0, 12));
    let samples = data.samples();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::trainer::derive_seed(cfg.seed, 0, 0, 13));
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Sample<'_>> = chunk.iter().map(|&i| samples[i]).collect();
            let (loss, grad) = net.loss_and_grad(&batch, cfg.l2)?;
            net.adam_step(&grad, cfg.learning_rate)?;
            total += loss;
            batches += 1;
        }
        epoch_loss.push(if batches > 0 { total / batches as f64 } else { f64::NAN });
    }
    Ok(SupervisedOutcome {
        net,
        epoch_loss,
        examples: samples.len(),
        skipped: data.skipped,
    })
}
