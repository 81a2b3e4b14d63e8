use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gridqa_core::harness::{
    compute_metrics, evaluate_arm, mla_records, replay, run_ablation_suite, split_items,
    write_logs, Arm, EpisodeLog, EpisodeRecord, MetricsReport, ParamStore, RoomSuite, RunConfig,
    Slice,
};
use gridqa_core::questions::{
    generate_dataset, verify_balance, Dataset, DatasetItem, DatasetOptions, QuestionType, Split,
};
use gridqa_core::rooms::{kitchen_suite, read_rooms_dir, small_suite, write_rooms_dir};
use gridqa_core::world::RoomSpec;
use gridqa_server::{Service, ServiceOptions};

#[derive(Parser)]
#[command(
    name = "gridqa",
    version,
    about = "Grid-house interactive question answering"
)]
struct Cli {
    /// Run configuration (JSON with world/detector/reward/training/eval sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the command: generation seed for gen-rooms and gen-dataset,
    /// training and evaluation seed elsewhere.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    /// Room documents written by gen-rooms (default: the configured suite).
    #[arg(long)]
    rooms: Option<PathBuf>,
    /// Dataset written by gen-dataset (default: generated from the config).
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a room suite and write one document per room plus the split.
    GenRooms {
        #[arg(long, value_parser = parse_suite, default_value = "small")]
        suite: RoomSuite,
    },
    /// Generate a balanced question dataset over a room directory.
    GenDataset {
        #[arg(long)]
        rooms: PathBuf,
        /// Fraction of the full per-room item counts.
        #[arg(long)]
        scale: Option<f64>,
        /// Skip the extra configurations of training rooms (seen split).
        #[arg(long)]
        no_seen: bool,
    },
    /// Train learned planners; parameters and curves go to <out>/params.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Arms to train (himn, himn_gt, himn_gt_oracle_nav, question_blind, no_validity, memoryless).
        #[arg(long = "arm", default_values = ["himn"])]
        arms: Vec<String>,
    },
    /// Evaluate agents on the held-out items and report metrics.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long = "arm", default_values = ["himn", "scripted", "mla"])]
        arms: Vec<String>,
        /// Directory holding <arm>.params (default <out>/params).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Write one gzip log per episode under <out>/logs/<arm>.
        #[arg(long)]
        logs: bool,
    },
    /// Train what is missing and evaluate every ablation arm.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        /// Restrict to these arms (default: all).
        #[arg(long = "arm")]
        arms: Vec<String>,
        #[arg(long)]
        logs: bool,
    },
    /// Serve episodes over the wire protocol (frames and HTTP on one port).
    Serve {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Static assets for browser clients.
        #[arg(long = "static", default_value = "www")]
        static_dir: PathBuf,
    },
    /// Re-execute a logged episode and check it reproduces.
    Replay {
        log: PathBuf,
        /// Print every logged step.
        #[arg(long)]
        steps: bool,
    },
    /// Recompute metrics from record files (JSON lines).
    Metrics { records: Vec<PathBuf> },
}

fn parse_suite(s: &str) -> Result<RoomSuite, String> {
    match s {
        "kitchen" => Ok(RoomSuite::Kitchen),
        "small" => Ok(RoomSuite::Small),
        _ => Err(format!("unknown suite {s:?} (kitchen or small)")),
    }
}

fn parse_arms(names: &[String]) -> Result<Vec<Arm>> {
    names
        .iter()
        .map(|n| Arm::from_name(n).with_context(|| format!("unknown arm {n:?}")))
        .collect()
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.training.a2c.seed = seed;
        cfg.eval.seed = seed;
    }
    Ok(cfg)
}

fn load_data(cfg: &RunConfig, data: &DataArgs) -> Result<(Vec<RoomSpec>, Vec<DatasetItem>)> {
    let (rooms, split) = match &data.rooms {
        Some(dir) => read_rooms_dir(dir)?,
        None => cfg.rooms()?,
    };
    let items = match &data.dataset {
        Some(dir) => {
            Dataset::read_dir(dir)
                .with_context(|| format!("reading dataset {}", dir.display()))?
                .items
        }
        None => cfg.dataset(&rooms, &split)?.items,
    };
    Ok((rooms, items))
}

fn write_records(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// CSV, then one table per slice, on standard output.
fn print_metrics(m: &MetricsReport, agents: &[&str]) {
    print!("{}", m.csv());
    for slice in [Slice::All, Slice::Seen, Slice::Unseen] {
        println!("\n[{}]", slice.name());
        print!("{}", m.table_for(slice, agents));
    }
}

fn report(out: &Path, records: &[EpisodeRecord], agents: &[&str]) -> Result<()> {
    std::fs::create_dir_all(out)?;
    write_records(&out.join("records.jsonl"), records)?;
    let m = compute_metrics(records);
    std::fs::write(out.join("metrics.csv"), m.csv())?;
    print_metrics(&m, agents);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    let out = cli.out.clone();
    match &cli.command {
        Command::GenRooms { suite } => {
            let seed = cli.seed.unwrap_or(cfg.world.room_seed);
            let (rooms, split) = match suite {
                RoomSuite::Kitchen => kitchen_suite(seed),
                RoomSuite::Small => small_suite(seed),
            };
            write_rooms_dir(&out, &rooms, &split)?;
            println!(
                "wrote {} rooms ({} train, {} test) to {}",
                rooms.len(),
                split.train.len(),
                split.test.len(),
                out.display()
            );
        }
        Command::GenDataset {
            rooms,
            scale,
            no_seen,
        } => {
            let (specs, split) = read_rooms_dir(rooms)?;
            let opts = DatasetOptions {
                seed: cli.seed.unwrap_or(cfg.world.dataset_seed),
                scale: scale.unwrap_or(cfg.world.scale),
                seen_split: !no_seen,
            };
            let ds = generate_dataset(&specs, &split, &opts)?;
            ds.write_dir(&out)?;
            let balance = verify_balance(&ds.items)?;
            println!("split,qtype,items");
            for s in [Split::Train, Split::Test, Split::Seen] {
                for q in QuestionType::ALL {
                    println!("{},{},{}", s.name(), q, balance.count(s, q));
                }
            }
            println!("wrote {} items to {}", ds.items.len(), out.display());
        }
        Command::Train { data, arms } => {
            let arms = parse_arms(arms)?;
            let (rooms, items) = load_data(&cfg, data)?;
            let (train, _) = split_items(&items);
            let mut store = ParamStore::new(Some(out.join("params")));
            for arm in arms {
                if !arm.learned() {
                    bail!("{} has nothing to train", arm.name());
                }
                let started = std::time::Instant::now();
                store.get_or_train(arm, &cfg, &rooms, &train)?;
                eprintln!(
                    "{}: parameters ready in {:.1?}",
                    arm.name(),
                    started.elapsed()
                );
                if let Some(last) = store.curves.get(&arm).and_then(|c| c.last()) {
                    println!(
                        "{}: updates {} episodes {} accuracy {:.1}/{:.1}/{:.1} mean return {:.2}",
                        arm.name(),
                        last.updates,
                        last.episodes,
                        100.0 * last.accuracy(QuestionType::Existence),
                        100.0 * last.accuracy(QuestionType::Counting),
                        100.0 * last.accuracy(QuestionType::SpatialRelationship),
                        last.mean_return,
                    );
                }
            }
        }
        Command::Eval {
            data,
            arms,
            params,
            logs,
        } => {
            let arms = parse_arms(arms)?;
            let (rooms, items) = load_data(&cfg, data)?;
            let (train, eval) = split_items(&items);
            let dir = params.clone().unwrap_or_else(|| out.join("params"));
            let mut store = ParamStore::new(Some(dir.clone()));
            let mut records = Vec::new();
            for &arm in &arms {
                if arm == Arm::Mla {
                    records.extend(mla_records(&eval));
                    continue;
                }
                if arm.learned() {
                    if !ParamStore::params_path(&dir, arm).exists() {
                        bail!(
                            "no parameters for {} in {}; run `gridqa train --arm {}` first",
                            arm.name(),
                            dir.display(),
                            arm.name()
                        );
                    }
                    store.get_or_train(arm, &cfg, &rooms, &train)?;
                }
                let runs = evaluate_arm(arm, &cfg, &rooms, &eval, &store)?;
                if *logs {
                    write_logs(&out.join("logs").join(arm.name()), &runs)?;
                }
                eprintln!("{}: evaluated {} episodes", arm.name(), runs.len());
                records.extend(runs.into_iter().map(|r| r.record));
            }
            let names: Vec<&str> = arms.iter().map(|a| a.name()).collect();
            report(&out, &records, &names)?;
        }
        Command::Ablate { data, arms, logs } => {
            let arms = if arms.is_empty() {
                Arm::ALL.to_vec()
            } else {
                parse_arms(arms)?
            };
            let (rooms, items) = load_data(&cfg, data)?;
            let mut cfg = cfg.clone();
            if *logs {
                cfg.eval.log_dir = Some(out.join("logs"));
            }
            let mut store = ParamStore::new(Some(out.join("params")));
            let rep = run_ablation_suite(&cfg, &rooms, &items, &arms, &mut store, &mut |line| {
                eprintln!("{line}")
            })?;
            let names: Vec<&str> = arms.iter().map(|a| a.name()).collect();
            report(&out, &rep.records, &names)?;
        }
        Command::Serve {
            data,
            port,
            host,
            static_dir,
        } => {
            let (rooms, items) = load_data(&cfg, data)?;
            std::fs::create_dir_all(&out)?;
            let opts = ServiceOptions {
                seed: cfg.eval.seed,
                log_dir: Some(out.join("logs")),
                records_path: Some(out.join("records.jsonl")),
                static_dir: static_dir.is_dir().then(|| static_dir.clone()),
            };
            let n = items.len();
            let service = Service::new(rooms, items, cfg.episode_config(), opts);
            let records = out.display().to_string();
            gridqa_server::run(Arc::new(service), &format!("{host}:{port}"), |addr| {
                println!("listening on {addr}");
                eprintln!("serving {n} items (frames and HTTP); records in {records}");
            })?;
        }
        Command::Replay { log, steps } => {
            let log = EpisodeLog::read(log)?;
            let rep = replay(&log)?;
            let r = &log.record;
            if *steps {
                println!("step,action,valid,reward,coverage,primitives,x,y,heading,pitch");
                for (s, prims) in &log.steps {
                    println!(
                        "{},{},{},{:.4},{:.4},{},{},{},{:?},{:?}",
                        s.step,
                        s.action,
                        s.valid,
                        s.reward,
                        s.coverage,
                        prims.len(),
                        s.agent.cell.x,
                        s.agent.cell.y,
                        s.agent.heading,
                        s.agent.pitch
                    );
                }
            }
            println!(
                "agent {} item {} question {:?}",
                r.agent, r.item_id, r.question
            );
            println!(
                "answer {:?} truth {} correct {} planner steps {} primitive steps {} invalid {} reward {:.3}",
                r.answer, r.truth, r.correct, r.planner_steps, r.primitive_steps, r.invalid, r.total_reward
            );
            println!(
                "replayed {} primitives; first divergence {:?}; final world matches {}; record matches {}",
                rep.primitive_steps, rep.first_divergence, rep.world_final_matches, rep.record_matches
            );
            if !rep.ok() {
                bail!("replay does not reproduce the log");
            }
        }
        Command::Metrics { records } => {
            let mut all = Vec::new();
            for path in records {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                for (i, line) in text
                    .lines()
                    .enumerate()
                    .filter(|(_, l)| !l.trim().is_empty())
                {
                    let r: EpisodeRecord = serde_json::from_str(line)
                        .with_context(|| format!("{}:{}", path.display(), i + 1))?;
                    all.push(r);
                }
            }
            let m = compute_metrics(&all);
            let agents: Vec<&str> = m.agents().collect();
            print_metrics(&m, &agents);
        }
    }
    Ok(())
}
