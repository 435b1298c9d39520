//! Command-line front end. `run` returns the process exit code:
//! 0 on success, 1 on usage errors, 2 on runtime failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::baselines::{supervised_train, Agent, AgentKind, SupervisedConfig};
use crate::env::Dim;
use crate::eval::{evaluate, test_set};
use crate::generator::{cube_bin, generate};
use crate::instance_io::{load_instance, save_instance, to_text};
use crate::net::{checkpoint, Checkpoint};
use crate::ranking::Percentile;
use crate::trainer::{derive_seed, train, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "r2pack", version, about = "Ranked-reward self-play for 2D/3D bin packing")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Training config file (TOML); flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["2", "3"])]
    pub dim: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    pub items: Option<usize>,
    /// Ranking percentile in (0, 100).
    #[arg(long, global = true, value_name = "P")]
    pub alpha: Option<f64>,
    /// Worker threads.
    #[arg(long, global = true, env = "R2_THREADS", value_name = "W")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate instances into files.
    Gen {
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        bin_edge: Option<i64>,
    },
    /// Run ranked-reward training.
    Train {
        /// Continue after this checkpoint.
        #[arg(long, value_name = "CKPT")]
        resume: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<u64>,
        /// Write 0 in the seconds column.
        #[arg(long)]
        no_timing: bool,
        /// Train on 2r − 1 targets instead of ranked ones.
        #[arg(long)]
        rank_free: bool,
    },
    /// Train the network on reference sequences.
    TrainSupervised {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
    },
    /// Solve one instance file and print the layout.
    Solve {
        #[arg(value_name = "INSTANCE")]
        instance: PathBuf,
        #[arg(long, default_value = "lego")]
        agent: String,
        #[arg(long, value_name = "CKPT")]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 300)]
        simulations: usize,
    },
    /// Compare agents on a generated test set.
    Eval {
        /// Comma-separated agent names.
        #[arg(long, default_value = "lego,plain-mcts,random")]
        agents: String,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        bin_edge: Option<i64>,
        /// Network for r2-mcts and net-only.
        #[arg(long, value_name = "CKPT")]
        checkpoint: Option<PathBuf>,
        /// Network for supervised-net.
        #[arg(long, value_name = "CKPT")]
        supervised: Option<PathBuf>,
        #[arg(long, default_value_t = 300)]
        simulations: usize,
    },
    /// Print metadata of a checkpoint or instance file.
    Inspect {
        #[arg(value_name = "PATH")]
        path: PathBuf,
    },
}

type Outcome = Result<(), String>;

fn parse_dim(s: &Option<String>) -> Option<Dim> {
    s.as_deref().and_then(|d| d.parse().ok()).and_then(Dim::from_number)
}

fn train_config(g: &GlobalArgs) -> Result<TrainConfig, String> {
    let mut cfg = match &g.config {
        Some(p) => TrainConfig::load(p).map_err(|e| e.to_string())?,
        None => TrainConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(d) = parse_dim(&g.dim) {
        cfg.dim = d.number();
    }
    if let Some(n) = g.items {
        cfg.items = n;
    }
    if let Some(a) = g.alpha {
        cfg.alpha = a;
    }
    if let Some(t) = g.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn out_dir(g: &GlobalArgs) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn write(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_net(path: &Path, dim: Dim) -> Result<Checkpoint, String> {
    Checkpoint::load(path, Some(crate::net::feature_width(dim))).map_err(|e| format!("{}: {e}", path.display()))
}

fn threshold_of(ck: &Checkpoint, alpha: f64) -> Result<Option<f64>, String> {
    let p = Percentile::new(alpha).map_err(|e| e.to_string())?;
    Ok(ck.buffer.as_ref().and_then(|b| b.threshold(p).ok()))
}

fn cmd_gen(g: &GlobalArgs, count: usize, bin_edge: Option<i64>) -> Outcome {
    let cfg = train_config(g)?;
    let dim = cfg.dimension().map_err(|e| e.to_string())?;
    let edge = bin_edge.unwrap_or(cfg.bin_edge);
    let out = out_dir(g);
    fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
    for i in 0..count {
        let seed = derive_seed(cfg.seed, 0, i as u64, 0);
        let inst = generate(dim, cfg.items, cube_bin(dim, edge), seed).map_err(|e| e.to_string())?;
        let path = out.join(format!("instance_{i:05}.r2i"));
        save_instance(&inst, &path).map_err(|e| e.to_string())?;
    }
    println!("wrote {count} instances to {}", out.display());
    Ok(())
}

fn cmd_train(g: &GlobalArgs, resume: Option<PathBuf>, iterations: Option<u64>, no_timing: bool, rank_free: bool) -> Outcome {
    let mut cfg = train_config(g)?;
    if let Some(k) = iterations {
        cfg.iterations = k;
    }
    if no_timing {
        cfg.timing = false;
    }
    if rank_free {
        cfg.reward_mode = crate::trainer::RewardMode::RankFree;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    let out = out_dir(g);
    fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
    write(&out.join("config.toml"), &cfg.to_toml())?;
    let outcome = train(&cfg, &out, resume.as_deref(), |m| {
        eprintln!(
            "iter {:>4}  reward {:.4}  optimal {:>5.1}%  r_alpha {:.4}  loss {:.4}",
            m.iter, m.mean_reward, m.optimality_pct, m.r_alpha, m.last_loss
        );
    })
    .map_err(|e| e.to_string())?;
    if let Some(last) = outcome.history.last() {
        println!("final iteration {}: mean reward {:.4}", last.iter, last.mean_reward);
    }
    Ok(())
}

fn cmd_train_supervised(g: &GlobalArgs, instances: usize, epochs: usize, hidden: usize) -> Outcome {
    let base = train_config(g)?;
    let cfg = SupervisedConfig {
        dim: base.dimension().map_err(|e| e.to_string())?,
        items: base.items,
        bin_edge: base.bin_edge,
        instances,
        epochs,
        hidden,
        seed: base.seed,
        learning_rate: base.learning_rate,
        l2: base.l2,
        batch_size: base.batch_size,
    };
    let res = supervised_train(&cfg).map_err(|e| e.to_string())?;
    for (i, l) in res.epoch_loss.iter().enumerate() {
        eprintln!("epoch {:>3}  loss {l:.4}", i + 1);
    }
    let out = out_dir(g);
    fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
    let path = out.join("supervised.r2");
    checkpoint::save_checkpoint(&res.net, &path).map_err(|e| e.to_string())?;
    println!(
        "{} examples, {} instances skipped; wrote {}",
        res.examples,
        res.skipped,
        path.display()
    );
    Ok(())
}

fn cmd_solve(g: &GlobalArgs, instance: &Path, agent: &str, ck: Option<PathBuf>, simulations: usize) -> Outcome {
    let inst = load_instance(instance).map_err(|e| e.to_string())?;
    let kind: AgentKind = agent.parse().map_err(|e: crate::baselines::AgentError| e.to_string())?;
    let (net, threshold) = match &ck {
        Some(p) => {
            let c = load_net(p, inst.dim)?;
            let alpha = g.alpha.unwrap_or(75.0);
            (Some(Arc::new(c.net.clone())), threshold_of(&c, alpha)?)
        }
        None => (None, None),
    };
    let agent = Agent::build(kind, net, threshold, simulations).map_err(|e| e.to_string())?;
    let problem = inst.problem().map_err(|e| e.to_string())?;
    let sol = agent.solve(problem, g.seed.unwrap_or(0)).map_err(|e| e.to_string())?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "# item x y z orient l w h");
    for p in &sol.layout {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            p.item_id,
            p.pos[0],
            p.pos[1],
            p.pos[2],
            p.orient.code(),
            p.size[0],
            p.size[1],
            p.size[2]
        );
    }
    let _ = writeln!(out, "cost {}", sol.cost);
    let _ = writeln!(out, "reward {:.6}", sol.reward);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    g: &GlobalArgs,
    agents: &str,
    count: usize,
    bin_edge: Option<i64>,
    ck: Option<PathBuf>,
    supervised: Option<PathBuf>,
    simulations: usize,
) -> Outcome {
    let cfg = train_config(g)?;
    let dim = cfg.dimension().map_err(|e| e.to_string())?;
    let main = ck.as_deref().map(|p| load_net(p, dim)).transpose()?;
    let sup = supervised.as_deref().map(|p| load_net(p, dim)).transpose()?;
    let threshold = match &main {
        Some(c) => threshold_of(c, cfg.alpha)?,
        None => None,
    };
    let mut list = Vec::new();
    for name in agents.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let kind: AgentKind = name.parse().map_err(|e: crate::baselines::AgentError| e.to_string())?;
        let net = match kind {
            AgentKind::SupervisedNet => sup.as_ref().map(|c| Arc::new(c.net.clone())),
            _ => main.as_ref().map(|c| Arc::new(c.net.clone())),
        };
        list.push(Agent::build(kind, net, threshold, simulations).map_err(|e| e.to_string())?);
    }
    if list.is_empty() {
        return Err("no agents given".into());
    }
    let set = test_set(dim, cfg.items, bin_edge.unwrap_or(cfg.bin_edge), count, cfg.seed).map_err(|e| e.to_string())?;
    let report = evaluate(&list, &set, cfg.seed, cfg.threads).map_err(|e| e.to_string())?;
    let out = out_dir(g);
    fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
    write(&out.join("eval_rows.csv"), &report.rows_csv())?;
    write(&out.join("eval_summary.csv"), &report.aggregate_csv())?;
    write(&out.join("eval_boxplot.csv"), &report.boxplot_csv())?;
    print!("{}", report.table());
    Ok(())
}

fn cmd_inspect(path: &Path) -> Outcome {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if bytes.starts_with(checkpoint::MAGIC) {
        let c = Checkpoint::from_bytes(&bytes, None).map_err(|e| e.to_string())?;
        let s = c.net.shape();
        println!("checkpoint format {}", checkpoint::FORMAT_VERSION);
        println!("feature width {}", s.features);
        println!("hidden width {}", s.hidden);
        println!("parameters {}", s.param_count());
        println!("optimizer steps {}", c.net.step());
        match c.iteration {
            Some(i) => println!("iteration {i}"),
            None => println!("iteration none"),
        }
        match &c.buffer {
            Some(b) => println!("reward buffer {}/{}", b.len(), b.capacity()),
            None => println!("reward buffer none"),
        }
    } else {
        let inst = load_instance(path).map_err(|e| e.to_string())?;
        println!("instance dim {} items {} seed {}", inst.dim.number(), inst.len(), inst.seed);
        println!("origin bin {:?}  cost {}", inst.origin_bin, inst.origin_cost());
        print!("{}", to_text(&inst));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    let g = &cli.global;
    if let Some(t) = g.threads {
        if t == 0 {
            return Err("--threads must be at least 1".into());
        }
    }
    match cli.command {
        Command::Gen { count, bin_edge } => cmd_gen(g, count, bin_edge),
        Command::Train {
            resume,
            iterations,
            no_timing,
            rank_free,
        } => cmd_train(g, resume, iterations, no_timing, rank_free),
        Command::TrainSupervised {
            instances,
            epochs,
            hidden,
        } => cmd_train_supervised(g, instances, epochs, hidden),
        Command::Solve {
            instance,
            agent,
            checkpoint,
            simulations,
        } => cmd_solve(g, &instance, &agent, checkpoint, simulations),
        Command::Eval {
            agents,
            count,
            bin_edge,
            checkpoint,
            supervised,
            simulations,
        } => cmd_eval(g, &agents, count, bin_edge, checkpoint, supervised, simulations),
        Command::Inspect { path } => cmd_inspect(&path),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_FAILURE
        }
    }
}
