//! Command line interface.
//!
//! Three subcommands: `stress` drives a multiset from several threads and
//! can check the recorded history, `check` re-checks a saved history file,
//! and `steps` measures the shared-memory step counts of one uncontended
//! SCX and VLX against their closed forms.
//!
//! Exit codes: 0 success, 1 property violation (a history that is not
//! linearizable, step counts off the closed forms, or a worker failure),
//! 2 usage or input errors, 3 checker budget exhausted.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::domain::Domain;
use crate::harness::checker::{check_linearizable, CheckError, CheckOptions};
use crate::harness::history::History;
use crate::harness::stress::{
    run_stress, run_stress_controlled, LockedMultiset, MixPercent, ProcessReport, StressConfig,
    StressOutcome, StressTarget,
};
use crate::multiset::Multiset;
use crate::process::StepCounters;
use crate::record::FieldRef;
use crate::word::{FieldKind, RecordSchema, Word};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Parser)]
#[command(
    name = "llxscx",
    version,
    about = "Multi-record synchronization primitives, a multiset built on them, and their verification tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Drive a multiset from several threads with a random operation mix.
    Stress(StressArgs),
    /// Check a saved history file for linearizability.
    Check(CheckArgs),
    /// Measure the shared-memory steps of one uncontended SCX and VLX.
    Steps(StepsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ImplKind {
    /// The lock-free multiset built on the primitives.
    Lockfree,
    /// A mutex-wrapped reference multiset.
    Locked,
}

#[derive(Args)]
struct StressArgs {
    /// Worker threads.
    #[arg(long, default_value_t = 4)]
    threads: usize,
    /// Operations per thread.
    #[arg(long, default_value_t = 1000)]
    ops: usize,
    /// Keys are drawn uniformly from 0..KEY_RANGE.
    #[arg(long = "key-range", default_value_t = 8, value_name = "KEY_RANGE")]
    key_range: i64,
    /// Percent mix get,insert,delete; must sum to 100.
    #[arg(long, default_value = "34,33,33", value_parser = parse_mix)]
    mix: MixPercent,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Record a history and check it for linearizability.
    #[arg(long)]
    check: bool,
    /// Save the recorded history as NDJSON.
    #[arg(long, value_name = "PATH")]
    save: Option<PathBuf>,
    /// Run under the deterministic scheduler instead of free threading.
    #[arg(long)]
    controlled: bool,
    /// Print a single-line JSON report instead of text.
    #[arg(long)]
    machine: bool,
    /// Which implementation to drive.
    #[arg(long = "impl", value_enum, default_value_t = ImplKind::Lockfree)]
    implementation: ImplKind,
}

#[derive(Args)]
struct CheckArgs {
    /// History file (NDJSON, one invoke/respond event per line).
    #[arg(long, value_name = "PATH")]
    history: PathBuf,
    /// Search state budget before giving up.
    #[arg(long, default_value_t = CheckOptions::default().max_expansions)]
    budget: u64,
    /// Print a single-line JSON verdict instead of text.
    #[arg(long)]
    machine: bool,
}

#[derive(Args)]
struct StepsArgs {
    /// Number of records in the SCX's V sequence.
    #[arg(long, value_name = "K")]
    v: usize,
    /// Number of records finalized (the R sequence), at most K.
    #[arg(long, value_name = "F")]
    r: usize,
    /// Print a single-line JSON report instead of text.
    #[arg(long)]
    machine: bool,
}

fn parse_mix(s: &str) -> Result<MixPercent, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated percentages, like 34,33,33".into());
    }
    let mut nums = [0u32; 3];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("bad percentage {:?}: {}", part, e))?;
    }
    Ok(MixPercent {
        get: nums[0],
        insert: nums[1],
        delete: nums[2],
    })
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match cli.command {
        Command::Stress(args) => cmd_stress(args),
        Command::Check(args) => cmd_check(args),
        Command::Steps(args) => cmd_steps(args),
    }
}

#[derive(Serialize)]
struct RunReport<'a> {
    implementation: &'a str,
    controlled: bool,
    config: &'a StressConfig,
    elapsed_ms: f64,
    total_ops: u64,
    throughput_ops_per_sec: f64,
    gets: u64,
    inserts: u64,
    deletes_true: u64,
    deletes_false: u64,
    retries: u64,
    llx_fail: u64,
    freezing_cas_failed: u64,
    update_cas_failed: u64,
    history_events: usize,
    check: Option<&'a str>,
    per_process: &'a [ProcessReport],
}

fn cmd_stress(args: StressArgs) -> i32 {
    let cfg = StressConfig {
        processes: args.threads,
        ops_per_process: args.ops,
        key_range: args.key_range,
        mix: args.mix,
        seed: args.seed,
        record_history: args.check || args.save.is_some(),
    };
    if let Err(msg) = cfg.validate() {
        eprintln!("error: {}", msg);
        return EXIT_USAGE;
    }

    let outcome = match args.implementation {
        ImplKind::Lockfree => drive(&cfg, args.controlled, Multiset::new(Domain::new())),
        ImplKind::Locked => drive(&cfg, args.controlled, LockedMultiset::new()),
    };
    let outcome = match outcome {
        Ok(o) => o,
        Err(msg) => {
            eprintln!("error: {}", msg);
            return EXIT_VIOLATION;
        }
    };

    if let Some(path) = &args.save {
        if let Err(e) = outcome.history.save(path) {
            eprintln!("error: cannot save history to {}: {}", path.display(), e);
            return EXIT_USAGE;
        }
    }

    let mut exit = EXIT_OK;
    let mut verdict = None;
    if args.check {
        match check_linearizable(&outcome.history, &CheckOptions::default()) {
            Ok(true) => verdict = Some("linearizable"),
            Ok(false) => {
                verdict = Some("not linearizable");
                exit = EXIT_VIOLATION;
            }
            Err(CheckError::BudgetExhausted(_)) => {
                verdict = Some("budget exhausted");
                exit = EXIT_BUDGET;
            }
            Err(CheckError::Malformed(msg)) => {
                eprintln!("error: recorded history is malformed: {}", msg);
                return EXIT_USAGE;
            }
        }
    }

    let total: u64 = outcome.per_process.iter().map(|p| p.ops).sum();
    let secs = outcome.elapsed.as_secs_f64();
    let report = RunReport {
        implementation: match args.implementation {
            ImplKind::Lockfree => "lockfree",
            ImplKind::Locked => "locked",
        },
        controlled: args.controlled,
        config: &cfg,
        elapsed_ms: secs * 1e3,
        total_ops: total,
        throughput_ops_per_sec: if secs > 0.0 { total as f64 / secs } else { 0.0 },
        gets: outcome.per_process.iter().map(|p| p.gets).sum(),
        inserts: outcome.per_process.iter().map(|p| p.inserts).sum(),
        deletes_true: outcome.per_process.iter().map(|p| p.deletes_true).sum(),
        deletes_false: outcome.per_process.iter().map(|p| p.deletes_false).sum(),
        retries: outcome.per_process.iter().map(|p| p.stats.retries).sum(),
        llx_fail: outcome.per_process.iter().map(|p| p.stats.llx_fail).sum(),
        freezing_cas_failed: outcome
            .per_process
            .iter()
            .map(|p| p.stats.freezing_cas_failed)
            .sum(),
        update_cas_failed: outcome
            .per_process
            .iter()
            .map(|p| p.stats.update_cas_failed)
            .sum(),
        history_events: outcome.history.len(),
        check: verdict,
        per_process: &outcome.per_process,
    };

    if args.machine {
        println!("{}", serde_json::to_string(&report).unwrap());
    } else {
        print_report(&report);
    }
    exit
}

fn drive<T>(cfg: &StressConfig, controlled: bool, target: T) -> Result<StressOutcome, String>
where
    T: StressTarget + Send + Sync + 'static,
{
    if controlled {
        run_stress_controlled(cfg, Arc::new(target)).map_err(|e| e.to_string())
    } else {
        Ok(run_stress(cfg, &target))
    }
}

fn print_report(r: &RunReport<'_>) {
    println!(
        "{} impl, {} threads x {} ops, keys 0..{}, mix {}/{}/{} , seed {}{}",
        r.implementation,
        r.config.processes,
        r.config.ops_per_process,
        r.config.key_range,
        r.config.mix.get,
        r.config.mix.insert,
        r.config.mix.delete,
        r.config.seed,
        if r.controlled { ", controlled" } else { "" }
    );
    println!(
        "{} ops in {:.1} ms ({:.0} ops/s)",
        r.total_ops, r.elapsed_ms, r.throughput_ops_per_sec
    );
    println!(
        "gets {}, inserts {}, deletes {} hit / {} miss, retries {}",
        r.gets, r.inserts, r.deletes_true, r.deletes_false, r.retries
    );
    println!(
        "llx fails {}, failed freezing cas {}, failed update cas {}",
        r.llx_fail, r.freezing_cas_failed, r.update_cas_failed
    );
    if r.history_events > 0 {
        println!("history: {} events", r.history_events);
    }
    if let Some(verdict) = r.check {
        println!("check: {}", verdict);
    }
}

#[derive(Serialize)]
struct CheckReport<'a> {
    events: usize,
    verdict: &'a str,
}

fn cmd_check(args: CheckArgs) -> i32 {
    let history = match History::load(&args.history) {
        Ok(h) => h,
        Err(e) => {
            eprintln!(
                "error: cannot read history {}: {}",
                args.history.display(),
                e
            );
            return EXIT_USAGE;
        }
    };
    let opts = CheckOptions {
        max_expansions: args.budget,
    };
    let (verdict, exit) = match check_linearizable(&history, &opts) {
        Ok(true) => ("linearizable", EXIT_OK),
        Ok(false) => ("not linearizable", EXIT_VIOLATION),
        Err(CheckError::BudgetExhausted(_)) => ("budget exhausted", EXIT_BUDGET),
        Err(CheckError::Malformed(msg)) => {
            eprintln!("error: malformed history: {}", msg);
            return EXIT_USAGE;
        }
    };
    if args.machine {
        let report = CheckReport {
            events: history.len(),
            verdict,
        };
        println!("{}", serde_json::to_string(&report).unwrap());
    } else {
        println!("{} events: {}", history.len(), verdict);
    }
    exit
}

#[derive(Serialize)]
struct StepsReport {
    v: usize,
    r: usize,
    cas: u64,
    expected_cas: u64,
    writes: u64,
    expected_writes: u64,
    vlx_reads: u64,
    expected_vlx_reads: u64,
    pass: bool,
}

fn cmd_steps(args: StepsArgs) -> i32 {
    if args.v < 1 || args.v > 64 {
        eprintln!("error: --v must be between 1 and 64");
        return EXIT_USAGE;
    }
    if args.r > args.v {
        eprintln!("error: --r must be at most --v");
        return EXIT_USAGE;
    }
    let (scx, vlx_reads) = measure_steps(args.v, args.r);
    let report = StepsReport {
        v: args.v,
        r: args.r,
        cas: scx.cas_total(),
        expected_cas: args.v as u64 + 1,
        writes: scx.writes,
        expected_writes: args.r as u64 + 2,
        vlx_reads,
        expected_vlx_reads: args.v as u64,
        pass: false,
    };
    let pass = report.cas == report.expected_cas
        && report.writes == report.expected_writes
        && report.vlx_reads == report.expected_vlx_reads;
    let report = StepsReport { pass, ..report };
    if args.machine {
        println!("{}", serde_json::to_string(&report).unwrap());
    } else {
        println!(
            "scx over {} records finalizing {}: {} cas (expected {}), {} writes (expected {})",
            report.v,
            report.r,
            report.cas,
            report.expected_cas,
            report.writes,
            report.expected_writes
        );
        println!(
            "vlx over {} records: {} reads (expected {})",
            report.v, report.vlx_reads, report.expected_vlx_reads
        );
        println!("{}", if pass { "pass" } else { "FAIL" });
    }
    if pass {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    }
}

/// Runs one uncontended SCX over `k` fresh records finalizing the last `f`,
/// and one uncontended VLX over `k` fresh records, returning the SCX step
/// counters and the VLX shared-read count.
pub fn measure_steps(k: usize, f: usize) -> (StepCounters, u64) {
    let domain = Domain::new();
    let schema = Arc::new(RecordSchema::new(vec![FieldKind::Value], vec![]));
    let mut p = domain.process();

    let records: Vec<_> = (0..k)
        .map(|i| domain.new_record(&schema, &[Word::Value(i as u64)], &[]))
        .collect();
    for &r in &records {
        assert!(
            p.llx(r).is_snapshot(),
            "llx on a fresh record must snapshot"
        );
    }
    let fld = FieldRef {
        record: records[0],
        field: 0,
    };
    let finalize = &records[k - f..];
    let ok = p.scx(&records, finalize, fld, Word::Value(999_999));
    assert!(ok, "uncontended scx must succeed");
    let scx = p.last_counters();

    let fresh: Vec<_> = (0..k)
        .map(|i| domain.new_record(&schema, &[Word::Value(i as u64)], &[]))
        .collect();
    for &r in &fresh {
        assert!(
            p.llx(r).is_snapshot(),
            "llx on a fresh record must snapshot"
        );
    }
    assert!(p.vlx(&fresh), "uncontended vlx must validate");
    let vlx_reads = p.last_counters().shared_reads;

    (scx, vlx_reads)
}
