//! Monte Carlo tree search over packing states.
//!
//! Two modes share one tree:
//!
//! - **guided**: PUCT selection `Q + c·P·√N_parent / (1 + N)`, leaves are
//!   expanded with network priors and valued by the network, terminal nodes
//!   back up a ranked ±1 outcome;
//! - **rollout**: UCB1 selection, leaves valued by one uniformly random
//!   playout returning the raw terminal reward.
//!
//! Accounting: expanding the root counts as its first visit and is not a
//! simulation. Every simulation then adds exactly one visit to one root
//! child, and a search runs until the root children hold `simulations`
//! visits in total. After [`SearchTree::advance`] the reused subtree keeps
//! its statistics, so only the missing simulations are run.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::env::{Action, EnvError, PackState};
use crate::net::{featurize, NetError, NetParams};
use crate::ranking::Ranker;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search root is terminal")]
    TerminalRoot,
    #[error("guided search needs a network")]
    MissingNetwork,
    #[error("state has no legal actions")]
    NoActions,
    #[error("child index {0} out of range")]
    BadChild(usize),
    #[error("visit counts are all zero")]
    ZeroCounts,
    #[error("invalid search config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    Guided,
    Rollout,
}

/// Value assumed for children that have never been visited (guided mode).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FirstPlayUrgency {
    Constant(f64),
    /// The parent's running mean value.
    ParentMean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub simulations: usize,
    pub c_puct: f64,
    pub dirichlet_epsilon: f64,
    pub dirichlet_alpha: f64,
    /// Mix Dirichlet noise into the root priors (training only).
    pub root_noise: bool,
    pub fpu: FirstPlayUrgency,
    /// Exploration constant of UCB1 in rollout mode.
    pub c_uct: f64,
    pub mode: SearchMode,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            simulations: 300,
            c_puct: 1.25,
            dirichlet_epsilon: 0.25,
            dirichlet_alpha: 0.3,
            root_noise: false,
            fpu: FirstPlayUrgency::ParentMean,
            c_uct: std::f64::consts::SQRT_2,
            mode: SearchMode::Guided,
        }
    }
}

impl SearchConfig {
    pub fn rollout(simulations: usize) -> Self {
        SearchConfig {
            simulations,
            mode: SearchMode::Rollout,
            ..SearchConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.simulations == 0 {
            return Err(SearchError::Config("simulations must be at least 1"));
        }
        if !(self.c_puct >= 0.0) || !(self.c_uct >= 0.0) {
            return Err(SearchError::Config("exploration constants must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.dirichlet_epsilon) || !(self.dirichlet_alpha > 0.0) {
            return Err(SearchError::Config("bad Dirichlet parameters"));
        }
        Ok(())
    }
}

/// How a terminal reward is turned into a backed-up value in guided mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TerminalScore {
    /// ±1 against a threshold frozen for the whole search; `2r − 1` while no
    /// threshold exists yet.
    Ranked {
        threshold: Option<f64>,
        ranker: Ranker,
    },
    /// `2r − 1`, the reward mapped affinely onto `[−1, 1]`.
    Affine,
}

impl TerminalScore {
    pub fn ranked(threshold: Option<f64>) -> Self {
        TerminalScore::Ranked {
            threshold,
            ranker: Ranker::default(),
        }
    }

    pub fn value<R: Rng + ?Sized>(&self, r: f64, rng: &mut R) -> f64 {
        match *self {
            TerminalScore::Ranked {
                threshold: Some(t),
                ranker,
            } => ranker.rank(r, t, rng),
            TerminalScore::Ranked { threshold: None, .. } | TerminalScore::Affine => 2.0 * r - 1.0,
        }
    }
}

const NO_CHILD: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Node {
    state: PackState,
    terminal_reward: Option<f64>,
    expanded: bool,
    actions: Vec<Action>,
    raw_priors: Vec<f64>,
    priors: Vec<f64>,
    n: Vec<u32>,
    w: Vec<f64>,
    children: Vec<u32>,
    visits: u32,
    value_sum: f64,
}

impl Node {
    fn new(state: PackState) -> Result<Self, SearchError> {
        let terminal_reward = if state.is_terminal() {
            Some(state.terminal_reward()?)
        } else {
            None
        };
        Ok(Node {
            state,
            terminal_reward,
            expanded: false,
            actions: Vec::new(),
            raw_priors: Vec::new(),
            priors: Vec::new(),
            n: Vec::new(),
            w: Vec::new(),
            children: Vec::new(),
            visits: 0,
            value_sum: 0.0,
        })
    }
}

/// Per-root-child statistics, for debugging dumps.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub action: Action,
    pub prior: f64,
    pub visits: u32,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchTrace {
    pub step: usize,
    pub root_visits: u32,
    pub rows: Vec<TraceRow>,
}

impl SearchTrace {
    /// One line per child: `item orient x y z prior visits q`.
    pub fn to_text(&self) -> String {
        let mut s = format!("# step {} root_visits {}\n", self.step, self.root_visits);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{} {} {} {} {} {:.6} {} {:.6}",
                r.action.item_id,
                r.action.orient.code(),
                r.action.pos[0],
                r.action.pos[1],
                r.action.pos[2],
                r.prior,
                r.visits,
                r.q
            );
        }
        s
    }
}

/// Search tree rooted at the current decision state.
#[derive(Clone, Debug)]
pub struct SearchTree {
    nodes: Vec<Node>,
    root: usize,
}

impl SearchTree {
    pub fn new(state: PackState) -> Result<Self, SearchError> {
        Ok(SearchTree {
            nodes: vec![Node::new(state)?],
            root: 0,
        })
    }

    pub fn root_state(&self) -> &PackState {
        &self.nodes[self.root].state
    }

    /// Legal actions at the root, in environment order. Empty until the first search.
    pub fn root_actions(&self) -> &[Action] {
        &self.nodes[self.root].actions
    }

    pub fn root_counts(&self) -> &[u32] {
        &self.nodes[self.root].n
    }

    /// Priors in use at the root (including any noise).
    pub fn root_priors(&self) -> &[f64] {
        &self.nodes[self.root].priors
    }

    pub fn root_visits(&self) -> u32 {
        self.nodes[self.root].visits
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn trace(&self) -> SearchTrace {
        let root = &self.nodes[self.root];
        SearchTrace {
            step: root.state.step(),
            root_visits: root.visits,
            rows: (0..root.actions.len())
                .map(|a| TraceRow {
                    action: root.actions[a],
                    prior: root.priors[a],
                    visits: root.n[a],
                    q: if root.n[a] > 0 {
                        root.w[a] / root.n[a] as f64
                    } else {
                        0.0
                    },
                })
                .collect(),
        }
    }

    /// Makes root child `index` the new root, keeping its subtree.
    pub fn advance(&mut self, index: usize) -> Result<(), SearchError> {
        let root = &self.nodes[self.root];
        if index >= root.actions.len() {
            return Err(SearchError::BadChild(index));
        }
        self.root = self.child(self.root, index)?;
        Ok(())
    }

    fn child(&mut self, node: usize, a: usize) -> Result<usize, SearchError> {
        let c = self.nodes[node].children[a];
        if c != NO_CHILD {
            return Ok(c as usize);
        }
        let next = self.nodes[node].state.apply_unchecked(&self.nodes[node].actions[a]);
        let id = self.nodes.len();
        self.nodes.push(Node::new(next)?);
        self.nodes[node].children[a] = id as u32;
        Ok(id)
    }

    /// Computes legal actions and priors; returns the leaf value.
    fn expand<R: Rng + ?Sized>(
        &mut self,
        id: usize,
        net: Option<&NetParams>,
        mode: SearchMode,
        rng: &mut R,
    ) -> Result<f64, SearchError> {
        let node = &mut self.nodes[id];
        let actions = node.state.legal_actions();
        if actions.is_empty() {
            return Err(SearchError::NoActions);
        }
        let k = actions.len();
        let (priors, value) = match mode {
            SearchMode::Guided => {
                let net = net.ok_or(SearchError::MissingNetwork)?;
                let out = net.forward(&featurize(&node.state, &actions)?)?;
                (out.policy, out.value)
            }
            SearchMode::Rollout => (vec![1.0 / k as f64; k], rollout_value(&node.state, rng)?),
        };
        node.actions = actions;
        node.raw_priors = priors.clone();
        node.priors = priors;
        node.n = vec![0; k];
        node.w = vec![0.0; k];
        node.children = vec![NO_CHILD; k];
        node.expanded = true;
        Ok(value)
    }

    fn select(&self, id: usize, cfg: &SearchConfig) -> usize {
        let node = &self.nodes[id];
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        match cfg.mode {
            SearchMode::Guided => {
                let sqrt_n = (node.visits.max(1) as f64).sqrt();
                let fpu = match cfg.fpu {
                    FirstPlayUrgency::Constant(v) => v,
                    FirstPlayUrgency::ParentMean => {
                        if node.visits > 0 {
                            node.value_sum / node.visits as f64
                        } else {
                            0.0
                        }
                    }
                };
                for a in 0..node.actions.len() {
                    let n = node.n[a];
                    let q = if n > 0 { node.w[a] / n as f64 } else { fpu };
                    let score = q + cfg.c_puct * node.priors[a] * sqrt_n / (1.0 + n as f64);
                    if score > best_score {
                        best_score = score;
                        best = a;
                    }
                }
            }
            SearchMode::Rollout => {
                let ln_n = (node.visits.max(1) as f64).ln();
                for a in 0..node.actions.len() {
                    let n = node.n[a];
                    if n == 0 {
                        return a;
                    }
                    let score = node.w[a] / n as f64 + cfg.c_uct * (ln_n / n as f64).sqrt();
                    if score > best_score {
                        best_score = score;
                        best = a;
                    }
                }
            }
        }
        best
    }

    fn simulate<R: Rng + ?Sized>(
        &mut self,
        net: Option<&NetParams>,
        score: TerminalScore,
        cfg: &SearchConfig,
        path: &mut Vec<(usize, usize)>,
        rng: &mut R,
    ) -> Result<(), SearchError> {
        path.clear();
        let mut id = self.root;
        let value = loop {
            if let Some(r) = self.nodes[id].terminal_reward {
                break match cfg.mode {
                    SearchMode::Guided => score.value(r, rng),
                    SearchMode::Rollout => r,
                };
            }
            if !self.nodes[id].expanded {
                break self.expand(id, net, cfg.mode, rng)?;
            }
            let a = self.select(id, cfg);
            path.push((id, a));
            id = self.child(id, a)?;
        };
        let leaf = &mut self.nodes[id];
        leaf.visits += 1;
        leaf.value_sum += value;
        for &(p, a) in path.iter() {
            let node = &mut self.nodes[p];
            node.n[a] += 1;
            node.w[a] += value;
            node.visits += 1;
            node.value_sum += value;
        }
        Ok(())
    }

    fn set_root_priors<R: Rng + ?Sized>(&mut self, cfg: &SearchConfig, rng: &mut R) {
        let root = &mut self.nodes[self.root];
        root.priors.clone_from(&root.raw_priors);
        let k = root.priors.len();
        if cfg.mode != SearchMode::Guided || !cfg.root_noise || k < 2 || cfg.dirichlet_epsilon == 0.0 {
            return;
        }
        let gamma = Gamma::new(cfg.dirichlet_alpha, 1.0).expect("alpha > 0");
        let mut noise: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let total: f64 = noise.iter().sum();
        if !(total > 0.0) {
            return;
        }
        for x in &mut noise {
            *x /= total;
        }
        let eps = cfg.dirichlet_epsilon;
        for (p, x) in root.priors.iter_mut().zip(noise) {
            *p = (1.0 - eps) * *p + eps * x;
        }
    }

    /// Runs simulations until the root children hold `cfg.simulations` visits
    /// and returns the root visit counts (one per root action).
    pub fn search<R: Rng + ?Sized>(
        &mut self,
        net: Option<&NetParams>,
        score: TerminalScore,
        cfg: &SearchConfig,
        rng: &mut R,
    ) -> Result<Vec<u32>, SearchError> {
        cfg.validate()?;
        if cfg.mode == SearchMode::Guided && net.is_none() {
            return Err(SearchError::MissingNetwork);
        }
        if self.nodes[self.root].terminal_reward.is_some() {
            return Err(SearchError::TerminalRoot);
        }
        if !self.nodes[self.root].expanded {
            let v = self.expand(self.root, net, cfg.mode, rng)?;
            let root = &mut self.nodes[self.root];
            root.visits += 1;
            root.value_sum += v;
        }
        self.set_root_priors(cfg, rng);
        let mut path = Vec::with_capacity(64);
        let target = cfg.simulations as u64;
        let mut done: u64 = self.nodes[self.root].n.iter().map(|&n| n as u64).sum();
        while done < target {
            self.simulate(net, score, cfg, &mut path, rng)?;
            done += 1;
        }
        Ok(self.nodes[self.root].n.clone())
    }
}

/// `π(a) ∝ N(a)^(1/τ)`; `τ = 0` gives a one-hot on the first most-visited action.
pub fn improved_policy(counts: &[u32], tau: f64) -> Result<Vec<f64>, SearchError> {
    let max = counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(SearchError::ZeroCounts);
    }
    if tau < 0.0 || tau.is_nan() {
        return Err(SearchError::Config("temperature must be non-negative"));
    }
    if tau == 0.0 {
        let best = counts.iter().position(|&c| c == max).expect("max exists");
        let mut out = vec![0.0; counts.len()];
        out[best] = 1.0;
        return Ok(out);
    }
    let weights: Vec<f64> = if tau == 1.0 {
        counts.iter().map(|&c| c as f64).collect()
    } else {
        counts
            .iter()
            .map(|&c| (c as f64 / max as f64).powf(1.0 / tau))
            .collect()
    };
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Uniformly random playout to the end; returns the raw terminal reward.
pub fn rollout_value<R: Rng + ?Sized>(state: &PackState, rng: &mut R) -> Result<f64, SearchError> {
    let mut s = state.clone();
    while !s.is_terminal() {
        let actions = s.legal_actions();
        if actions.is_empty() {
            return Err(SearchError::NoActions);
        }
        let a = actions[rng.random_range(0..actions.len())];
        s = s.apply_unchecked(&a);
    }
    Ok(s.terminal_reward()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Dim, Problem};
    use crate::net::{feature_width, NetShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn problem2(sizes: &[[i64; 2]]) -> Arc<Problem> {
        let v: Vec<_> = sizes.iter().map(|s| [s[0], s[1], 1]).collect();
        Arc::new(Problem::new(Dim::Two, &v).unwrap())
    }

    fn net() -> NetParams {
        NetParams::init(NetShape::new(feature_width(Dim::Two), 16), 1)
    }

    #[test]
    fn improved_policy_examples() {
        assert_eq!(improved_policy(&[30, 10, 60], 1.0).unwrap(), vec![0.3, 0.1, 0.6]);
        assert_eq!(improved_policy(&[30, 10, 60], 0.0).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(improved_policy(&[5, 5], 0.0).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(improved_policy(&[0, 0], 1.0), Err(SearchError::ZeroCounts)));
        let sharp = improved_policy(&[1, 2], 0.5).unwrap();
        assert!((sharp[0] - 0.2).abs() < 1e-12 && (sharp[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn one_simulation_one_visit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut tree = SearchTree::new(PackState::new(problem2(&[[2, 3], [1, 1], [2, 2]]))).unwrap();
        let cfg = SearchConfig {
            simulations: 1,
            ..SearchConfig::default()
        };
        let counts = tree.search(Some(&net()), TerminalScore::ranked(None), &cfg, &mut rng).unwrap();
        assert_eq!(counts.iter().sum::<u32>(), 1);
        assert_eq!(counts.iter().filter(|&&c| c == 1).count(), 1);
    }

    #[test]
    fn counts_sum_to_budget_and_parent_accounting_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prob = problem2(&[[2, 3], [1, 1], [2, 2], [1, 3]]);
        let mut tree = SearchTree::new(PackState::new(prob)).unwrap();
        let cfg = SearchConfig {
            simulations: 120,
            root_noise: true,
            ..SearchConfig::default()
        };
        let counts = tree.search(Some(&net()), TerminalScore::ranked(Some(0.8)), &cfg, &mut rng).unwrap();
        assert_eq!(counts.iter().sum::<u32>(), 120);
        for node in &tree.nodes {
            if node.expanded {
                assert_eq!(node.n.iter().sum::<u32>(), node.visits - 1);
                for a in 0..node.n.len() {
                    if node.n[a] > 0 {
                        let q = node.w[a] / node.n[a] as f64;
                        assert!((-1.0..=1.0).contains(&q));
                    }
                }
            }
        }
    }

    #[test]
    fn terminal_root_is_an_error() {
        let prob = problem2(&[[1, 1]]);
        let s = PackState::new(prob);
        let t = s.apply_action(&s.legal_actions()[0]).unwrap();
        let mut tree = SearchTree::new(t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            tree.search(Some(&net()), TerminalScore::Affine, &SearchConfig::default(), &mut rng),
            Err(SearchError::TerminalRoot)
        ));
    }

    #[test]
    fn guided_without_network_is_an_error() {
        let mut tree = SearchTree::new(PackState::new(problem2(&[[1, 2]]))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            tree.search(None, TerminalScore::Affine, &SearchConfig::default(), &mut rng),
            Err(SearchError::MissingNetwork)
        ));
    }

    #[test]
    fn huge_c_puct_round_robins_uniform_priors() {
        let prob = problem2(&[[1, 2], [1, 3], [1, 4], [1, 5]]);
        let mut tree = SearchTree::new(PackState::new(prob)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // force uniform priors through rollout-mode expansion, then search guided
        tree.expand(0, None, SearchMode::Rollout, &mut rng).unwrap();
        tree.nodes[0].visits = 1;
        let k = tree.root_actions().len();
        let cfg = SearchConfig {
            simulations: 3 * k,
            c_puct: 1e12,
            ..SearchConfig::default()
        };
        let counts = tree.search(Some(&net()), TerminalScore::Affine, &cfg, &mut rng).unwrap();
        assert!(counts.iter().all(|&c| c == 3), "{counts:?}");
    }

    #[test]
    fn reuse_keeps_subtree_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prob = problem2(&[[2, 3], [1, 1], [2, 2], [1, 3]]);
        let mut tree = SearchTree::new(PackState::new(prob)).unwrap();
        let cfg = SearchConfig {
            simulations: 200,
            ..SearchConfig::default()
        };
        let net = net();
        let counts = tree.search(Some(&net), TerminalScore::Affine, &cfg, &mut rng).unwrap();
        let best = improved_policy(&counts, 0.0).unwrap().iter().position(|&p| p == 1.0).unwrap();
        let child = tree.nodes[tree.root].children[best] as usize;
        let (n_before, visits_before) = (tree.nodes[child].n.clone(), tree.nodes[child].visits);
        tree.advance(best).unwrap();
        assert_eq!(tree.root_counts(), &n_before[..]);
        assert_eq!(tree.root_visits(), visits_before);
        assert_eq!(visits_before, counts[best]);
        let again = tree.search(Some(&net), TerminalScore::Affine, &cfg, &mut rng).unwrap();
        assert_eq!(again.iter().sum::<u32>(), 200);
        for (a, b) in again.iter().zip(&n_before) {
            assert!(a >= b);
        }
    }

    #[test]
    fn search_is_deterministic_per_seed() {
        let prob = problem2(&[[2, 3], [1, 1], [2, 2], [1, 3], [3, 1]]);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut tree = SearchTree::new(PackState::new(prob.clone())).unwrap();
            let cfg = SearchConfig {
                simulations: 150,
                root_noise: true,
                ..SearchConfig::default()
            };
            tree.search(Some(&net()), TerminalScore::ranked(Some(0.7)), &cfg, &mut rng).unwrap();
            tree.trace()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn rollout_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let single = PackState::new(problem2(&[[3, 3]]));
        assert_eq!(rollout_value(&single, &mut rng).unwrap(), 1.0);
        let t = single.apply_action(&single.legal_actions()[0]).unwrap();
        assert_eq!(rollout_value(&t, &mut rng).unwrap(), 1.0);
        let s = PackState::new(problem2(&[[2, 1], [3, 2], [1, 1]]));
        for _ in 0..50 {
            let v = rollout_value(&s, &mut rng).unwrap();
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn rollout_search_returns_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut tree = SearchTree::new(PackState::new(problem2(&[[2, 1], [3, 2], [1, 1]]))).unwrap();
        let counts = tree.search(None, TerminalScore::Affine, &SearchConfig::rollout(60), &mut rng).unwrap();
        assert_eq!(counts.iter().sum::<u32>(), 60);
        let text = tree.trace().to_text();
        assert_eq!(text.lines().count(), 1 + tree.root_actions().len());
    }
}
