//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `R2_ACCEPTANCE_ONLY=1,3,9` runs a subset (8 needs 7's training run and
//! runs it when selected alone).

use std::collections::HashMap;
use std::fs;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use r2pack::baselines::{Agent, AgentKind};
use r2pack::env::{Action, Dim, PackState, Problem, Vec3};
use r2pack::eval::{evaluate, test_set};
use r2pack::generator::{cube_bin, generate, optimal_sequence};
use r2pack::mcts::{SearchConfig, SearchTree, TerminalScore};
use r2pack::net::{FeatureMatrix, NetParams, NetShape, Sample};
use r2pack::ranking::{rank, Percentile, Ranker, RewardBuffer};
use r2pack::trainer::{train, IterationMetrics, RewardMode, TrainConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- oracles

/// Oriented extents, straight from the orientation table.
fn orient(d: Vec3, code: u8, dim: Dim) -> Vec3 {
    match dim {
        Dim::Two => {
            if code == 0 {
                d
            } else {
                [d[1], d[0], 1]
            }
        }
        Dim::Three => match code {
            0 => [d[0], d[1], d[2]],
            1 => [d[0], d[2], d[1]],
            2 => [d[1], d[0], d[2]],
            3 => [d[1], d[2], d[0]],
            4 => [d[2], d[0], d[1]],
            _ => [d[2], d[1], d[0]],
        },
    }
}

/// Voxel occupancy grid holding the owner id of every unit cell.
struct Voxels {
    n: i64,
    cells: Vec<i32>,
}

impl Voxels {
    fn new(n: i64) -> Self {
        Voxels {
            n,
            cells: vec![-1; (n * n * n) as usize],
        }
    }

    fn idx(&self, p: Vec3) -> Option<usize> {
        if p.iter().any(|&c| c < 0 || c >= self.n) {
            return None;
        }
        Some(((p[0] * self.n + p[1]) * self.n + p[2]) as usize)
    }

    fn get(&self, p: Vec3) -> i32 {
        self.idx(p).map_or(-1, |i| self.cells[i])
    }

    fn fill(&mut self, pos: Vec3, size: Vec3, id: i32) -> usize {
        let mut clashes = 0;
        for x in pos[0]..pos[0] + size[0] {
            for y in pos[1]..pos[1] + size[1] {
                for z in pos[2]..pos[2] + size[2] {
                    let i = self.idx([x, y, z]).expect("inside grid");
                    if self.cells[i] != -1 {
                        clashes += 1;
                    }
                    self.cells[i] = id;
                }
            }
        }
        clashes
    }

    fn free(&self, pos: Vec3, size: Vec3) -> bool {
        for x in pos[0]..pos[0] + size[0] {
            for y in pos[1]..pos[1] + size[1] {
                for z in pos[2]..pos[2] + size[2] {
                    if self.get([x, y, z]) != -1 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Floor contact, or the footprint centre lies on the closed top face of
    /// a single box whose top is exactly at the base height.
    fn supported(&self, pos: Vec3, size: Vec3, dim: Dim) -> bool {
        let g = dim.axes() - 1;
        if pos[g] == 0 {
            return true;
        }
        let below = pos[g] - 1;
        // centre in doubled coordinates, on the horizontal axes
        let horiz: Vec<usize> = (0..dim.axes()).filter(|&a| a != g).collect();
        let centre: Vec<i64> = horiz.iter().map(|&a| 2 * pos[a] + size[a]).collect();
        // candidate cells whose closed square contains the centre
        let mut options: Vec<Vec<i64>> = vec![vec![]];
        for c in &centre {
            let cells: Vec<i64> = if c % 2 == 0 { vec![c / 2 - 1, c / 2] } else { vec![c / 2] };
            options = options
                .into_iter()
                .flat_map(|o| {
                    cells.iter().map(move |&v| {
                        let mut o = o.clone();
                        o.push(v);
                        o
                    })
                })
                .collect();
        }
        for o in options {
            let mut cell = [0i64; 3];
            for (k, &a) in horiz.iter().enumerate() {
                cell[a] = o[k];
            }
            cell[g] = below;
            let owner = self.get(cell);
            if owner < 0 {
                continue;
            }
            let mut above = cell;
            above[g] = pos[g];
            if self.get(above) != owner {
                return true;
            }
        }
        false
    }
}

/// Legal actions by brute force over the voxel grid, in (item, orientation,
/// position) order.
fn oracle_actions(state: &PackState) -> Vec<(usize, u8, Vec3, Vec3)> {
    let problem = state.problem();
    let dim = problem.dim();
    let mut vox = Voxels::new(64);
    let mut coords: [Vec<i64>; 3] = [vec![0], vec![0], vec![0]];
    for p in state.placed() {
        vox.fill(p.pos, p.size, p.item_id as i32);
        for a in 0..3 {
            coords[a].push(p.pos[a] + p.size[a]);
        }
    }
    for c in coords.iter_mut() {
        c.sort_unstable();
        c.dedup();
    }
    if dim == Dim::Two {
        coords[2] = vec![0];
    }
    let placed: Vec<usize> = state.placed().iter().map(|p| p.item_id).collect();
    let mut out = Vec::new();
    for item in problem.items() {
        if placed.contains(&item.id) {
            continue;
        }
        let mut seen: Vec<Vec3> = Vec::new();
        for code in 0..dim.orientation_count() {
            let size = orient(item.dims, code, dim);
            if seen.contains(&size) {
                continue;
            }
            seen.push(size);
            for &x in &coords[0] {
                for &y in &coords[1] {
                    for &z in &coords[2] {
                        let pos = [x, y, z];
                        if vox.free(pos, size) && vox.supported(pos, size, dim) {
                            out.push((item.id, code, pos, size));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Nearest-rank percentile by counting: the smallest buffer value with at
/// least α% of the buffer at or below it.
fn oracle_threshold(values: &[f64], alpha: f64) -> f64 {
    let n = values.len() as f64;
    let mut candidates = values.to_vec();
    candidates.sort_by(f64::total_cmp);
    for &v in &candidates {
        let at_or_below = values.iter().filter(|&&x| x <= v).count() as f64;
        if at_or_below * 100.0 >= alpha * n {
            return v;
        }
    }
    candidates[candidates.len() - 1]
}

/// Independent forward pass returning the loss and the smallest distance of
/// any ReLU pre-activation or max-pool runner-up from a kink.
fn oracle_loss_and_margin(net: &NetParams, f: &FeatureMatrix, target: &[f64], z: f64, l2: f64) -> (f64, f64) {
    let shape = net.shape();
    let (fw, h) = (shape.features, shape.hidden);
    let w = &net.weights;
    let mut at = 0;
    let mut take = |inputs: usize, outputs: usize| {
        let wt = at;
        let b = at + inputs * outputs;
        at = b + outputs;
        (wt, b)
    };
    let (w0, b0) = take(fw, h);
    let (w1, b1) = take(h, h);
    let (w2, b2) = take(3 * h, h);
    let (w3, b3) = take(h, 1);
    let (w4, b4) = take(2 * h, h);
    let (w5, b5) = take(h, 1);
    let dense = |x: &[f64], wt: usize, b: usize, outputs: usize| -> Vec<f64> {
        (0..outputs)
            .map(|o| w[b + o] + x.iter().enumerate().map(|(i, xi)| xi * w[wt + i * outputs + o]).sum::<f64>())
            .collect()
    };
    let mut margin = f64::INFINITY;
    let relu = |v: Vec<f64>, margin: &mut f64| -> Vec<f64> {
        v.into_iter()
            .map(|x| {
                *margin = margin.min(x.abs());
                x.max(0.0)
            })
            .collect()
    };
    let rows = f.rows();
    let mut emb = Vec::with_capacity(rows);
    for r in 0..rows {
        let a = relu(dense(f.row(r), w0, b0, h), &mut margin);
        emb.push(relu(dense(&a, w1, b1, h), &mut margin));
    }
    let mut g = vec![0.0; 2 * h];
    for j in 0..h {
        let mut col: Vec<f64> = emb.iter().map(|e| e[j]).collect();
        g[j] = col.iter().sum::<f64>() / rows as f64;
        col.sort_by(|a, b| b.total_cmp(a));
        g[h + j] = col[0];
        if rows > 1 && col[0] > 0.0 {
            margin = margin.min(col[0] - col[1]);
        }
    }
    let logits: Vec<f64> = emb
        .iter()
        .map(|e| {
            let x: Vec<f64> = e.iter().chain(g.iter()).copied().collect();
            let a = relu(dense(&x, w2, b2, h), &mut margin);
            dense(&a, w3, b3, 1)[0]
        })
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + logits.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    let ce: f64 = target.iter().zip(&logits).map(|(t, l)| -t * (l - lse)).sum();
    let c = relu(dense(&g, w4, b4, h), &mut margin);
    let v = dense(&c, w5, b5, 1)[0].tanh();
    let reg = l2 * w.iter().map(|x| x * x).sum::<f64>();
    (ce + (v - z).powi(2) + reg, margin)
}

fn random_features<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> FeatureMatrix {
    FeatureMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(0.0..2.0)).collect()).unwrap()
}

fn random_distribution<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

// ------------------------------------------------------------- criteria

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut states = 0;
    let mut actions = 0;
    for k in 0..200 {
        let dim = if k % 2 == 0 { Dim::Two } else { Dim::Three };
        let n = rng.random_range(1..=5);
        let sizes: Vec<Vec3> = (0..n)
            .map(|_| match dim {
                Dim::Two => [rng.random_range(1..=6), rng.random_range(1..=6), 1],
                Dim::Three => [rng.random_range(1..=6), rng.random_range(1..=6), rng.random_range(1..=6)],
            })
            .collect();
        let mut state = PackState::new(Arc::new(Problem::new(dim, &sizes).unwrap()));
        loop {
            let got: Vec<(usize, u8, Vec3, Vec3)> = state
                .legal_actions()
                .iter()
                .map(|a| (a.item_id, a.orient.code(), a.pos, a.size))
                .collect();
            let want = oracle_actions(&state);
            if got != want {
                return verdict(
                    false,
                    format!("instance {k} step {}: env {} actions, oracle {}", state.step(), got.len(), want.len()),
                );
            }
            states += 1;
            actions += got.len();
            if state.is_terminal() {
                break;
            }
            let all = state.legal_actions();
            let a: Action = all[rng.random_range(0..all.len())];
            state = state.apply_action(&a).unwrap();
        }
    }
    verdict(true, format!("200 instances, {states} states, {actions} actions identical"))
}

fn criterion_2() -> Verdict {
    let mut failures = [0usize; 2];
    let mut bad = Vec::new();
    for (di, dim) in [Dim::Two, Dim::Three].into_iter().enumerate() {
        let bin = cube_bin(dim, 10);
        for seed in 0..10_000u64 {
            let inst = generate(dim, 10, bin, seed).unwrap();
            let volume: i64 = inst.items.iter().map(|d| d.iter().product::<i64>()).sum();
            let mut vox = Voxels::new(10);
            let mut clashes = 0;
            for p in &inst.optimal_layout {
                if p.pos.iter().zip(&p.size).zip(&bin).any(|((&x, &s), &b)| x < 0 || x + s > b) {
                    clashes += 1;
                    continue;
                }
                clashes += vox.fill(p.pos, p.size, p.item_id as i32);
            }
            let covered = (0..bin[0])
                .flat_map(|x| (0..bin[1]).flat_map(move |y| (0..bin[2]).map(move |z| [x, y, z])))
                .all(|c| vox.get(c) >= 0);
            if inst.items.len() != 10 || volume != bin.iter().product::<i64>() || clashes > 0 || !covered {
                bad.push(format!("{dim} seed {seed}: conservation/tiling"));
                continue;
            }
            match optimal_sequence(&inst) {
                Ok(seq) => {
                    let mut s = PackState::new(inst.problem().unwrap());
                    for a in &seq {
                        match s.apply_action(a) {
                            Ok(next) => s = next,
                            Err(e) => {
                                bad.push(format!("{dim} seed {seed}: illegal step {e}"));
                                break;
                            }
                        }
                    }
                    if !s.is_terminal() || s.terminal_reward().unwrap() != 1.0 {
                        bad.push(format!("{dim} seed {seed}: replay reward below 1"));
                    }
                }
                Err(_) => failures[di] += 1,
            }
        }
    }
    let detail = format!(
        "2x10^4 instances conserve and tile; ordering failure rate 2D {:.2}% 3D {:.2}%",
        failures[0] as f64 / 100.0,
        failures[1] as f64 / 100.0
    );
    if bad.is_empty() {
        verdict(true, detail)
    } else {
        verdict(false, format!("{} violations, first: {}", bad.len(), bad[0]))
    }
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for case in 0..1000 {
        let cap = rng.random_range(1..=250);
        let alpha = [50.0, 75.0, 90.0][case % 3];
        let pushes = rng.random_range(1..=2 * cap);
        let mut buf = RewardBuffer::new(cap).unwrap();
        let mut all = Vec::with_capacity(pushes);
        for _ in 0..pushes {
            // coarse values so ties are common
            let r = (rng.random_range(0..40) as f64) / 40.0 + 0.025;
            buf.push(r).unwrap();
            all.push(r);
        }
        let window = &all[all.len().saturating_sub(cap)..];
        let got = buf.threshold(Percentile::new(alpha).unwrap()).unwrap();
        let want = oracle_threshold(window, alpha);
        if got != want {
            return verdict(false, format!("case {case}: threshold {got}, oracle {want}"));
        }
    }
    let r = Ranker::default();
    let branches = [
        (0.9, 0.8, 1.0),
        (0.7, 0.8, -1.0),
        (1.0, 1.0, 1.0),
        (1.0, 0.9, 1.0),
    ];
    for (reward, t, want) in branches {
        for _ in 0..100 {
            if r.rank(reward, t, &mut rng) != want {
                return verdict(false, format!("rank({reward}, {t}) != {want}"));
            }
        }
    }
    let draws = 10_000;
    let total: f64 = (0..draws).map(|_| rank(0.8, 0.8, &mut rng)).sum();
    let mean = total / draws as f64;
    let pass = mean.abs() < 0.05;
    verdict(pass, format!("10^3 buffers match the counting oracle; branches ok; tie mean z = {mean:+.4}"))
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let eps = 1e-5;
    let tol = 1e-4;
    let l2 = 1e-4;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut triples = 0;
    let mut resampled = 0;
    while triples < 100 {
        let cols = if triples % 2 == 0 { 10 } else { 13 };
        let hidden = rng.random_range(4..=8);
        let net = NetParams::init(NetShape::new(cols, hidden), rng.random());
        let rows = 1 + triples % 30;
        let f = random_features(rows, cols, &mut rng);
        let pi = random_distribution(rows, &mut rng);
        let z = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let (oracle, margin) = oracle_loss_and_margin(&net, &f, &pi, z, l2);
        // finite differences are only meaningful away from ReLU/max kinks
        if margin < 1e-3 {
            resampled += 1;
            continue;
        }
        let sample = Sample {
            features: &f,
            policy: &pi,
            value: z,
        };
        let (loss, grad) = net.loss_and_grad(&[sample], l2).unwrap();
        if (loss - oracle).abs() > 1e-9 * oracle.abs().max(1.0) {
            return verdict(false, format!("loss {loss} disagrees with the oracle forward {oracle}"));
        }
        let mut probe = net.clone();
        for i in 0..grad.len() {
            let orig = probe.weights[i];
            probe.weights[i] = orig + eps;
            let up = probe.loss(&[sample], l2).unwrap();
            probe.weights[i] = orig - eps;
            let down = probe.loss(&[sample], l2).unwrap();
            probe.weights[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let scale = grad[i].abs().max(numeric.abs());
            let err = if scale < 1e-6 { (grad[i] - numeric).abs() } else { (grad[i] - numeric).abs() / scale };
            worst = worst.max(err);
            checked += 1;
        }
        triples += 1;
    }
    verdict(
        worst <= tol,
        format!("100 triples, 1-30 rows, {checked} coordinates, worst relative error {worst:.2e} (limit 1e-4; {resampled} kink-adjacent draws redrawn)"),
    )
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let cols = if case % 2 == 0 { 10 } else { 13 };
        let net = NetParams::init(NetShape::new(cols, 64), rng.random());
        let rows = rng.random_range(1..=60);
        let f = random_features(rows, cols, &mut rng);
        let mut perm: Vec<usize> = (0..rows).collect();
        perm.shuffle(&mut rng);
        let a = net.forward(&f).unwrap();
        let b = net.forward(&f.permuted(&perm)).unwrap();
        worst = worst.max((a.value - b.value).abs());
        for (i, &p) in perm.iter().enumerate() {
            worst = worst.max((b.policy[i] - a.policy[p]).abs());
        }
    }
    verdict(worst <= 1e-9, format!("10^3 cases, max deviation {worst:.2e} (limit 1e-9)"))
}

fn criterion_6() -> Verdict {
    let mut wins = 0;
    let cfg = SearchConfig {
        simulations: 300,
        ..SearchConfig::default()
    };
    let mut worst_share: f64 = 1.0;
    for seed in 0..100u64 {
        let dim = if seed % 2 == 0 { Dim::Two } else { Dim::Three };
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let edge = rng.random_range(3..=8);
        // two items tiling a square/cube: after the first reference move only
        // the complementary placement completes the ideal bin
        let inst = generate(dim, 2, cube_bin(dim, edge), seed).unwrap();
        let seq = optimal_sequence(&inst).unwrap();
        let root = PackState::new(inst.problem().unwrap()).apply_action(&seq[0]).unwrap();
        let actions = root.legal_actions();
        let rewards: Vec<f64> = actions
            .iter()
            .map(|a| root.apply_action(a).unwrap().terminal_reward().unwrap())
            .collect();
        let optimal: Vec<usize> = (0..actions.len()).filter(|&i| rewards[i] == 1.0).collect();
        let runner_up = rewards.iter().copied().filter(|&r| r < 1.0).fold(0.0, f64::max);
        if optimal.len() != 1 || actions.len() < 2 {
            return verdict(false, format!("seed {seed}: micro-MDP is not strictly optimal"));
        }
        // every non-optimal reward ranks strictly below this threshold
        let threshold = (runner_up + 1.0) / 2.0;
        let net = NetParams::init(NetShape::new(r2pack::net::feature_width(dim), 64), 9000 + seed);
        let mut tree = SearchTree::new(root).unwrap();
        let counts = tree
            .search(Some(&net), TerminalScore::ranked(Some(threshold)), &cfg, &mut rng)
            .unwrap();
        let total: u32 = counts.iter().sum();
        let share = counts[optimal[0]] as f64 / total as f64;
        worst_share = worst_share.min(share);
        if 2 * counts[optimal[0]] > total {
            wins += 1;
        }
    }
    verdict(
        wins >= 95,
        format!("strict majority in {wins}/100 runs (need 95); lowest optimal share {worst_share:.3}"),
    )
}

struct LearningRuns {
    r2: Vec<IterationMetrics>,
    rank_free: Vec<IterationMetrics>,
    net: NetParams,
    threshold: Option<f64>,
    rank_free_net: NetParams,
}

fn learning_config() -> TrainConfig {
    TrainConfig {
        dim: 2,
        items: 10,
        bin_edge: 10,
        alpha: 75.0,
        episodes: 50,
        simulations: 300,
        iterations: 40,
        seed: 2024,
        threads: 1,
        timing: true,
        ..TrainConfig::default()
    }
}

fn learning_runs() -> LearningRuns {
    let dir = tempfile::tempdir().unwrap();
    let cfg = learning_config();
    let r2 = train(&cfg, &dir.path().join("r2"), None, |_| {}).unwrap();
    let rf_cfg = TrainConfig {
        reward_mode: RewardMode::RankFree,
        ..cfg.clone()
    };
    let rf = train(&rf_cfg, &dir.path().join("rank-free"), None, |_| {}).unwrap();
    let threshold = r2.buffer.threshold(cfg.percentile().unwrap()).ok();
    LearningRuns {
        r2: r2.history,
        rank_free: rf.history,
        net: r2.net,
        threshold,
        rank_free_net: rf.net,
    }
}

fn window_mean(h: &[IterationMetrics], from: usize, to: usize) -> f64 {
    h[from..to].iter().map(|m| m.mean_reward).sum::<f64>() / (to - from) as f64
}

fn criterion_7(runs: &LearningRuns) -> Verdict {
    let h = &runs.r2;
    let k = h.len();
    let first = window_mean(h, 0, 5);
    let last = window_mean(h, k - 5, k);
    let rf_last = window_mean(&runs.rank_free, k - 5, k);
    let a = last - first >= 0.05;
    let b = last >= rf_last;

    let set = test_set(Dim::Two, 10, 10, 100, 77).unwrap();
    let net = Arc::new(runs.net.clone());
    let agents = [
        Agent::build(AgentKind::R2Mcts, Some(net.clone()), runs.threshold, 300).unwrap(),
        Agent::build(AgentKind::Lego, None, None, 300).unwrap(),
        Agent::build(AgentKind::NetOnly, Some(net), None, 300).unwrap(),
        Agent::build(AgentKind::NetOnly, Some(Arc::new(runs.rank_free_net.clone())), None, 300).unwrap(),
    ];
    let report = evaluate(&agents, &set, 77, 1).unwrap();
    let mean = |i: usize| {
        let rows = &report.rows[i * 100..(i + 1) * 100];
        rows.iter().map(|r| r.reward).sum::<f64>() / 100.0
    };
    let (r2_mcts, lego, net_only, rf_net) = (mean(0), mean(1), mean(2), mean(3));
    let c = r2_mcts >= lego;
    let minutes: f64 = h.iter().chain(&runs.rank_free).map(|m| m.seconds).sum::<f64>() / 60.0;
    verdict(
        a && b && c,
        format!(
            "(a) first5 {first:.4} -> last5 {last:.4} [{}]; (b) R2 {last:.4} vs rank-free {rf_last:.4} [{}]; \
             (c) test net+MCTS {r2_mcts:.4} vs Lego {lego:.4} [{}]; net-only R2 {net_only:.4}, rank-free {rf_net:.4}; \
             {k} iterations x2 in {minutes:.1} min; full-scale reference: net-only 0.953 +/- 0.027 (rank 50%), 0.926 +/- 0.064 (rank 75%)",
            ok(a),
            ok(b),
            ok(c)
        ),
    )
}

fn criterion_8(runs: &LearningRuns) -> Verdict {
    let h = &runs.r2;
    let q = h.len() / 5;
    let share = |rows: &[IterationMetrics]| {
        let top: u32 = rows.iter().map(|m| m.histogram[19]).sum();
        let all: u32 = rows.iter().map(|m| m.histogram.iter().sum::<u32>()).sum();
        top as f64 / all as f64
    };
    let first = share(&h[..q]);
    let last = share(&h[h.len() - q..]);
    verdict(
        last > first,
        format!("top-bin share {first:.3} (first {q} iterations) -> {last:.3} (last {q})"),
    )
}

fn criterion_9() -> Verdict {
    let set = test_set(Dim::Two, 5, 10, 100, 909).unwrap();
    let net = Arc::new(NetParams::init(NetShape::new(10, 64), 909));
    let agents = [
        Agent::Exhaustive,
        Agent::build(AgentKind::Lego, None, None, 300).unwrap(),
        Agent::build(AgentKind::PlainMcts, None, None, 300).unwrap(),
        Agent::build(AgentKind::Random, None, None, 300).unwrap(),
        Agent::build(AgentKind::NetOnly, Some(net.clone()), None, 300).unwrap(),
        Agent::build(AgentKind::R2Mcts, Some(net), None, 300).unwrap(),
    ];
    let report = evaluate(&agents, &set, 909, 1).unwrap();
    let mut per_instance: HashMap<u64, f64> = HashMap::new();
    for r in report.rows.iter().filter(|r| r.agent == AgentKind::Exhaustive) {
        per_instance.insert(r.instance_seed, r.reward);
    }
    let dominated = report
        .rows
        .iter()
        .all(|r| r.reward <= per_instance[&r.instance_seed]);
    let means: Vec<(AgentKind, f64)> = report.summaries().iter().map(|s| (s.agent, s.mean_reward)).collect();
    let get = |k: AgentKind| means.iter().find(|m| m.0 == k).unwrap().1;
    let ex = get(AgentKind::Exhaustive);
    let mean_dominated = means.iter().all(|m| m.1 <= ex);
    let mcts_vs_random = get(AgentKind::PlainMcts) >= get(AgentKind::Random);
    let failures: usize = report.summaries().iter().map(|s| s.failures).sum();
    let table: Vec<String> = means.iter().map(|(k, m)| format!("{k} {m:.4}")).collect();
    verdict(
        dominated && mean_dominated && mcts_vs_random && failures == 0,
        format!("100 N=5 instances: {}; per-instance dominance {}", table.join(", "), ok(dominated)),
    )
}

fn criterion_10() -> Verdict {
    let exe = env!("CARGO_BIN_EXE_r2pack");
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("det.toml");
    fs::write(
        &config,
        "items = 6\nbin_edge = 8\niterations = 3\nepisodes = 6\nsimulations = 40\nbatch_size = 8\ntrain_steps = 5\nhidden = 16\n",
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(exe)
            .args(["train", "--no-timing", "--threads", "1", "--seed", "31"])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .env_remove("R2_THREADS")
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let mut files: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    let expected = ["ckpt_1.r2", "ckpt_2.r2", "ckpt_3.r2", "config.toml", "metrics.csv"];
    if files != expected {
        return verdict(false, format!("unexpected outputs {files:?}"));
    }
    for f in &files {
        if fs::read(a.join(f)).unwrap() != fs::read(b.join(f)).unwrap() {
            return verdict(false, format!("{f} differs between runs"));
        }
    }
    verdict(true, "metrics.csv and 3 checkpoints byte-identical across two CLI runs")
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; listing mode
    // must not run anything
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let only: Option<Vec<u32>> = std::env::var("R2_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let selected = |n: u32| only.as_ref().is_none_or(|o| o.contains(&n));

    let names = [
        "environment matches voxel oracle",
        "generator conservation and optimal replay",
        "ranking threshold and reshaping",
        "gradient check",
        "permutation invariance",
        "search sanity on micro-MDPs",
        "desk-scale learning",
        "reward histogram shift",
        "exhaustive dominance",
        "training determinism",
    ];
    let mut runs: Option<LearningRuns> = None;
    let mut passed = 0;
    let mut total = 0;
    for n in 1..=10u32 {
        if !selected(n) {
            continue;
        }
        let start = Instant::now();
        let v = match n {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(),
            7 | 8 => {
                let runs = runs.get_or_insert_with(learning_runs);
                if n == 7 {
                    criterion_7(runs)
                } else {
                    criterion_8(runs)
                }
            }
            9 => criterion_9(),
            _ => criterion_10(),
        };
        total += 1;
        if v.pass {
            passed += 1;
        }
        println!(
            "{} [{n:>2}] {}: {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            names[n as usize - 1],
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {passed}/{total} criteria passed");
    if passed != total {
        std::process::exit(1);
    }
}
