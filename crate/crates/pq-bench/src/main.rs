//! Benchmark CLI for the concurrent priority-queue suite.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use pq_bench::{emit_csv, BenchConfig, QueueKind, VariantKnobs};
use pq_core::{Entry, PopResult};
use pq_verify::history::{EventKind, History, HistoryEvent, OpKind, OpResult};
use pq_verify::record::Recorder;
use rand::prelude::*;

#[derive(Parser, Debug)]
#[command(
    name = "pqbench",
    about = "Throughput benchmark for the concurrent priority-queue suite",
    long_about = "Prefills the chosen queue with uniform random 32-bit keys, then runs a \
                  tight mixed insert/delete-min loop on the configured number of threads \
                  (pinned to cores where possible) and reports per-run and aggregate \
                  throughput."
)]
struct Cli {
    /// Queue under test: globallock|hunt|shavitlotan|linden|spray|krelaxed
    #[arg(long)]
    queue: Option<String>,

    /// Worker thread count.
    #[arg(long, default_value_t = 1)]
    threads: usize,

    /// Elements inserted before the timed loop starts.
    #[arg(long, default_value_t = 32768)]
    prefill: usize,

    /// Timed-loop length in seconds per run (prefill excluded).
    #[arg(long, default_value_t = 10.0)]
    duration: f64,

    /// Probability that a loop iteration inserts (the rest delete).
    #[arg(long, default_value_t = 0.5)]
    insert_ratio: f64,

    /// Number of runs to aggregate.
    #[arg(long, default_value_t = 10)]
    repeats: usize,

    /// Workload seed; per-thread streams derive from it.
    #[arg(long, default_value_t = 0xbe9c)]
    seed: u64,

    /// Deleted-prefix length that triggers restructuring (linden).
    #[arg(long, default_value_t = 32)]
    bound_offset: usize,

    /// Relaxation constant (krelaxed).
    #[arg(long, default_value_t = 64)]
    k: usize,

    /// Fixed heap capacity (hunt).
    #[arg(long, default_value_t = 262144)]
    capacity: usize,

    /// Spray parameter P override (spray); defaults to --threads.
    #[arg(long)]
    spray_p: Option<usize>,

    /// Write per-run rows and the aggregate as CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,

    /// After benchmarking, record a small companion workload (1000 ops
    /// per thread, same seed and mix) and write its history here.
    #[arg(long)]
    record_history: Option<PathBuf>,

    /// Check a recorded history file instead of benchmarking:
    /// linearizability, quiescent consistency, and rank replay.
    #[arg(long)]
    check_history: Option<PathBuf>,

    /// Rank bound used when replaying histories (default k * threads).
    #[arg(long)]
    rank_bound: Option<usize>,

    /// Disable thread pinning.
    #[arg(long)]
    no_pin: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn real_main(cli: Cli) -> Result<(), String> {
    if let Some(path) = &cli.check_history {
        let bound = cli.rank_bound.unwrap_or(cli.k * cli.threads.max(1));
        return check_history(path, bound);
    }

    let queue_name = cli
        .queue
        .as_deref()
        .ok_or("missing --queue (or use --check-history)")?;
    let kind: QueueKind = queue_name.parse().map_err(|e| format!("{e}"))?;
    let mut cfg = BenchConfig::new(kind);
    cfg.threads = cli.threads;
    cfg.prefill = cli.prefill;
    cfg.duration = Duration::from_secs_f64(cli.duration.max(0.0));
    cfg.insert_ratio = cli.insert_ratio;
    cfg.repeats = cli.repeats;
    cfg.seed = cli.seed;
    cfg.pin_threads = !cli.no_pin;
    cfg.knobs = VariantKnobs {
        bound_offset: cli.bound_offset,
        k: cli.k,
        capacity: cli.capacity,
        spray_threads: cli.spray_p,
    };
    cfg.validate().map_err(|e| format!("{e}"))?;

    let report = pq_bench::run(&cfg).map_err(|e| format!("{e}"))?;
    println!(
        "queue={} threads={} prefill={} duration={}s ratio={} repeats={} seed={}",
        kind.name(),
        cfg.threads,
        cfg.prefill,
        cli.duration,
        cfg.insert_ratio,
        cfg.repeats,
        cfg.seed
    );
    for r in &report.runs {
        println!(
            "run {:>2}: {:>12.0} ops/s  ({} ops in {:.3}s, {} cas-failures, {} restructures, {} resprays)",
            r.run, r.throughput, r.ops_total, r.duration_s, r.cas_failures, r.restructures, r.resprays
        );
    }
    println!(
        "mean throughput {:.0} ops/s (stddev {:.0})",
        report.mean_throughput, report.stddev_throughput
    );

    if let Some(path) = &cli.csv {
        std::fs::write(path, emit_csv(&report)).map_err(|e| format!("writing {path:?}: {e}"))?;
        println!("csv written to {}", path.display());
    }

    if let Some(path) = &cli.record_history {
        let history = record_companion(&cfg);
        let file = std::fs::File::create(path).map_err(|e| format!("creating {path:?}: {e}"))?;
        history
            .write_to(std::io::BufWriter::new(file))
            .map_err(|e| format!("writing {path:?}: {e}"))?;
        println!(
            "recorded {} events to {}",
            history.events.len(),
            path.display()
        );
    }
    Ok(())
}

/// Small recorded session: 1000 ops per thread with the configured mix.
fn record_companion(cfg: &BenchConfig) -> History {
    const OPS_PER_THREAD: usize = 1000;
    let queue = pq_bench::build_queue(cfg.queue, cfg.threads, &cfg.knobs);
    let recorder = Recorder::new();
    let logs: Vec<Vec<HistoryEvent>> = std::thread::scope(|s| {
        (0..cfg.threads)
            .map(|t| {
                let queue = &*queue;
                let recorder = &recorder;
                s.spawn(move || {
                    let mut handle = queue.register();
                    let mut rng = StdRng::seed_from_u64(pq_bench::stream_seed(
                        cfg.seed, 0, t as u64,
                    ));
                    let mut log = Vec::with_capacity(OPS_PER_THREAD * 2);
                    for _ in 0..OPS_PER_THREAD {
                        let op = if rng.random_bool(cfg.insert_ratio) {
                            OpKind::Insert(rng.random())
                        } else {
                            OpKind::DeleteMin
                        };
                        log.push(HistoryEvent {
                            time: recorder.stamp(),
                            thread: t,
                            kind: EventKind::Invoke,
                            op,
                            result: None,
                        });
                        let result = match op {
                            OpKind::Insert(k) => {
                                let _ = handle.insert(Entry::new(k, k as u64));
                                None
                            }
                            OpKind::DeleteMin => Some(match handle.delete_min() {
                                PopResult::Item(e) => OpResult::Item(e.key),
                                PopResult::Empty => OpResult::Empty,
                            }),
                        };
                        log.push(HistoryEvent {
                            time: recorder.stamp(),
                            thread: t,
                            kind: EventKind::Respond,
                            op,
                            result,
                        });
                    }
                    log
                })
            })
            .collect::<Vec<_>>()
            .into_iter()
            .map(|h| h.join().unwrap())
            .collect()
    });
    History::new(logs.into_iter().flatten().collect())
}

fn check_history(path: &PathBuf, rank_bound: usize) -> Result<(), String> {
    let file = std::fs::File::open(path).map_err(|e| format!("opening {path:?}: {e}"))?;
    let history =
        History::read_from(std::io::BufReader::new(file)).map_err(|e| format!("{e}"))?;
    let ops = history.operations().map_err(|e| format!("{e}"))?;
    println!("history: {} events, {} operations", history.events.len(), ops.len());

    match pq_verify::check_linearizable(&history) {
        Ok(v) => println!("linearizable: {}", v.ok),
        Err(e) => println!("linearizable: skipped ({e})"),
    }
    match pq_verify::check_quiescent(&history) {
        Ok(v) => println!("quiescently consistent: {}", v.ok),
        Err(e) => println!("quiescently consistent: skipped ({e})"),
    }
    let report = pq_verify::rank_replay(&history, rank_bound);
    println!(
        "rank replay: {} pops, max rank {}, {} over bound {}, {} empties",
        report.ranks.len(),
        report.max_rank,
        report.violations,
        rank_bound,
        report.empties
    );
    Ok(())
}
