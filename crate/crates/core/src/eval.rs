//! Evaluation harness: every agent on every test instance, paired seeds.
//!
//! An agent that errors, or whose layout does not replay to the reward it
//! reported, scores 0 on that instance.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use crate::baselines::{Agent, AgentError, AgentKind, EXHAUSTIVE_MAX_ITEMS};
use crate::env::PackState;
use crate::generator::{cube_bin, generate, GenError, Instance};
use crate::trainer::derive_seed;

const STREAM_AGENT: u64 = 21;
const STREAM_TEST_SET: u64 = 22;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub agent: AgentKind,
    pub instance_seed: u64,
    pub n_items: usize,
    pub dim: u8,
    pub reward: f64,
    pub cost: i64,
    pub optimal: bool,
    pub millis: f64,
    /// Why the agent scored 0, if it failed.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentSummary {
    pub agent: AgentKind,
    pub count: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub optimality_pct: f64,
    pub failures: usize,
}

/// Quartiles and Tukey whiskers of one agent's rewards.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxStats {
    pub agent: AgentKind,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    /// Agent-major, instances in test-set order.
    pub rows: Vec<EvalRow>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl EvalReport {
    pub fn agents(&self) -> Vec<AgentKind> {
        let mut out: Vec<AgentKind> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.agent) {
                out.push(r.agent);
            }
        }
        out
    }

    pub fn rewards(&self, agent: AgentKind) -> Vec<f64> {
        self.rows.iter().filter(|r| r.agent == agent).map(|r| r.reward).collect()
    }

    pub fn summary(&self, agent: AgentKind) -> Option<AgentSummary> {
        let rows: Vec<&EvalRow> = self.rows.iter().filter(|r| r.agent == agent).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r.reward).sum::<f64>() / n;
        let var = if rows.len() > 1 {
            rows.iter().map(|r| (r.reward - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(AgentSummary {
            agent,
            count: rows.len(),
            mean_reward: mean,
            std_reward: var.sqrt(),
            optimality_pct: 100.0 * rows.iter().filter(|r| r.optimal).count() as f64 / n,
            failures: rows.iter().filter(|r| r.failure.is_some()).count(),
        })
    }

    pub fn summaries(&self) -> Vec<AgentSummary> {
        self.agents().into_iter().filter_map(|a| self.summary(a)).collect()
    }

    pub fn box_stats(&self, agent: AgentKind) -> Option<BoxStats> {
        let mut v = self.rewards(agent);
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&v, 0.25), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        Some(BoxStats {
            agent,
            min: v[0],
            q1,
            median: quantile(&v, 0.5),
            q3,
            max: v[v.len() - 1],
            whisker_low: v.iter().copied().find(|&x| x >= lo_fence).unwrap_or(v[0]),
            whisker_high: v.iter().rev().copied().find(|&x| x <= hi_fence).unwrap_or(v[v.len() - 1]),
        })
    }

    pub fn rows_csv(&self) -> String {
        let mut s = String::from("agent,instance_seed,n_items,dim,reward,cost,optimal,millis\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6},{},{},{:.3}",
                r.agent, r.instance_seed, r.n_items, r.dim, r.reward, r.cost, r.optimal, r.millis
            );
        }
        s
    }

    pub fn aggregate_csv(&self) -> String {
        let mut s = String::from("agent,mean_reward,std_reward,optimality_pct\n");
        for a in self.summaries() {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.2}",
                a.agent, a.mean_reward, a.std_reward, a.optimality_pct
            );
        }
        s
    }

    pub fn boxplot_csv(&self) -> String {
        let mut s = String::from("agent,min,whisker_low,q1,median,q3,whisker_high,max\n");
        for a in self.agents() {
            let b = self.box_stats(a).expect("agent has rows");
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                a, b.min, b.whisker_low, b.q1, b.median, b.q3, b.whisker_high, b.max
            );
        }
        s
    }

    /// Human-readable comparison table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<15} {:>5} {:>12} {:>10} {:>12} {:>8}\n",
            "agent", "n", "mean_reward", "std", "optimal_%", "failed"
        );
        for a in self.summaries() {
            let _ = writeln!(
                s,
                "{:<15} {:>5} {:>12.4} {:>10.4} {:>12.1} {:>8}",
                a.agent.name(),
                a.count,
                a.mean_reward,
                a.std_reward,
                a.optimality_pct,
                a.failures
            );
        }
        s
    }
}

/// Test instances for `(dim, items, bin_edge)` derived from `seed`.
pub fn test_set(dim: crate::env::Dim, items: usize, bin_edge: i64, count: usize, seed: u64) -> Result<Vec<Instance>, GenError> {
    (0..count as u64)
        .map(|i| generate(dim, items, cube_bin(dim, bin_edge), derive_seed(seed, 0, i, STREAM_TEST_SET)))
        .collect()
}

fn run_one(agent: &Agent, inst: &Instance, seed: u64) -> EvalRow {
    let start = Instant::now();
    let outcome = inst
        .problem()
        .map_err(AgentError::from)
        .and_then(|p| agent.solve(p.clone(), derive_seed(seed, inst.seed, 0, STREAM_AGENT)).map(|s| (p, s)))
        .and_then(|(p, sol)| {
            let replay = PackState::replay(p, &sol.layout)?;
            let r = replay.terminal_reward()?;
            if r != sol.reward || replay.bin_cost_int()? != sol.cost {
                return Err(AgentError::Config(format!(
                    "reported reward {} but the layout replays to {r}",
                    sol.reward
                )));
            }
            Ok(sol)
        });
    let millis = start.elapsed().as_secs_f64() * 1e3;
    let base = EvalRow {
        agent: agent.kind(),
        instance_seed: inst.seed,
        n_items: inst.len(),
        dim: inst.dim.number(),
        reward: 0.0,
        cost: 0,
        optimal: false,
        millis,
        failure: None,
    };
    match outcome {
        Ok(sol) => EvalRow {
            reward: sol.reward,
            cost: sol.cost,
            optimal: sol.cost == inst.origin_cost(),
            ..base
        },
        Err(e) => EvalRow {
            failure: Some(e.to_string()),
            ..base
        },
    }
}

/// Runs every agent on every instance. `threads > 1` spreads the pairs over a
/// worker pool; the report order does not depend on it.
pub fn evaluate(agents: &[Agent], instances: &[Instance], seed: u64, threads: usize) -> Result<EvalReport, AgentError> {
    if agents.iter().any(|a| a.kind() == AgentKind::Exhaustive) {
        if let Some(big) = instances.iter().find(|i| i.len() > EXHAUSTIVE_MAX_ITEMS) {
            return Err(AgentError::TooManyItems(big.len()));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..agents.len())
        .flat_map(|a| (0..instances.len()).map(move |i| (a, i)))
        .collect();
    let rows = if threads <= 1 {
        pairs.iter().map(|&(a, i)| run_one(&agents[a], &instances[i], seed)).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| AgentError::Config(format!("thread pool: {e}")))?;
        let agents = Arc::new(agents.to_vec());
        pool.install(|| {
            pairs
                .par_iter()
                .map(|&(a, i)| run_one(&agents[a], &instances[i], seed))
                .collect()
        })
    };
    Ok(EvalReport { rows })
}
