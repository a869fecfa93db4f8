//! Command-line front end. Exit status: 0 when no races (or disagreements)
//! were found, 1 when some were, 2 on any error.

use std::ffi::OsString;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::{analyze, AnalysisError, AnalysisOptions, RaceReport, Relation, Tier};
use crate::harness::{differential_run, Corpus, DiffConfig};
use crate::oracle::{
    access_races, closure_order, predictable_race_search, OracleError, SearchOutcome,
};
use crate::stats::{emit_stats, stats_json_value, StatsFormat};
use crate::trace::{generate_trace, parse_trace, GenConfig, GenError, ParseError, Trace};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("{path}: bad generator config: {source}")]
    Config {
        path: String,
        source: serde_json::Error,
    },
    #[error("bad seed range `{0}`, expected A..B")]
    SeedRange(String),
}

#[derive(Parser, Debug)]
#[command(
    name = "predrace",
    version,
    about = "Predictive data-race detection over execution traces"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run one analysis over a trace file.
    Analyze(AnalyzeArgs),
    /// Compute races from the relation closure, or search for a predictable race.
    Oracle(OracleArgs),
    /// Generate a random well-formed trace.
    Gen(GenArgs),
    /// Differential run over generated traces.
    Diff(DiffArgs),
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long, value_parser = parse_relation)]
    relation: Relation,
    #[arg(long, value_parser = parse_tier)]
    tier: Tier,
    /// Also print per-case counters.
    #[arg(long)]
    stats: bool,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    stop_at_first_race: bool,
    trace: PathBuf,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, value_parser = parse_relation, default_value = "dc")]
    relation: Relation,
    /// Search reorderings for a predictable race instead.
    #[arg(long)]
    predictable: bool,
    #[arg(long)]
    json: bool,
    trace: PathBuf,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 3)]
    threads: usize,
    #[arg(long, default_value_t = 40)]
    events: usize,
    #[arg(long, default_value_t = 3)]
    vars: usize,
    #[arg(long, default_value_t = 2)]
    locks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    p_cs: f64,
    #[arg(long, default_value_t = 0.2)]
    p_nested: f64,
    #[arg(long, default_value_t = 0.5)]
    p_write: f64,
    #[arg(long, default_value_t = 0.1)]
    p_sync: f64,
    #[arg(long, default_value_t = 0.3)]
    p_release: f64,
    #[arg(long)]
    fork_join: bool,
    #[arg(long)]
    lock_affinity: bool,
    #[arg(long)]
    disciplined: bool,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiffArgs {
    /// Seed range, `A..B` (B exclusive).
    #[arg(long)]
    seeds: String,
    /// JSON generator config; each seed varies its shape within these bounds.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the config as is instead of drawing a shape per seed.
    #[arg(long)]
    no_vary: bool,
    #[arg(long, value_delimiter = ',', value_parser = parse_relation, default_values_t = Relation::ALL.to_vec())]
    relations: Vec<Relation>,
    #[arg(long, value_delimiter = ',', value_parser = parse_tier, default_values_t = Tier::ALL.to_vec())]
    tiers: Vec<Tier>,
    /// Also compare against the closure oracle (traces under its cap).
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    no_shrink: bool,
    #[arg(long)]
    repro_dir: Option<PathBuf>,
    /// Run SmartTrack with the read-share coupling disabled.
    #[arg(long, hide = true)]
    mutant_read_share: bool,
}

fn parse_relation(s: &str) -> Result<Relation, AnalysisError> {
    s.parse()
}

fn parse_tier(s: &str) -> Result<Tier, AnalysisError> {
    s.parse()
}

fn parse_seeds(s: &str) -> Result<Range<u64>, CliError> {
    let bad = || CliError::SeedRange(s.to_string());
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if b < a {
        return Err(bad());
    }
    Ok(a..b)
}

fn read_trace(path: &Path) -> Result<Trace, CliError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: p.clone(),
        source,
    })?;
    parse_trace(&text).map_err(|source| CliError::Parse { path: p, source })
}

fn race_json(r: &RaceReport) -> Value {
    json!({
        "kind": r.kind.name(),
        "var": r.var,
        "prior": {"index": r.prior_index, "site": r.prior_site, "thread": r.prior_thread},
        "curr": {"index": r.curr_index, "site": r.curr_site, "thread": r.curr_thread},
    })
}

fn race_line(r: &RaceReport) -> String {
    format!(
        "{} race on {}: {} at {} (event {}) vs {} at {} (event {})",
        r.kind.name(),
        r.var,
        r.prior_thread,
        r.prior_site,
        r.prior_index,
        r.curr_thread,
        r.curr_site,
        r.curr_index
    )
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json output")
}

fn cmd_analyze(a: AnalyzeArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let trace = read_trace(&a.trace)?;
    let opts = AnalysisOptions {
        stop_at_first_race: a.stop_at_first_race,
        ..AnalysisOptions::default()
    };
    let v = analyze(&trace, a.relation, a.tier, opts)?;
    if a.json {
        let mut doc = json!({
            "relation": a.relation.name(),
            "tier": a.tier.name(),
            "races": v.races.iter().map(race_json).collect::<Vec<_>>(),
        });
        if a.stats {
            doc["stats"] = stats_json_value(&v.stats, a.relation, a.tier);
        }
        let _ = writeln!(out, "{}", pretty(&doc));
    } else {
        for r in &v.races {
            let _ = writeln!(out, "{}", race_line(r));
        }
        let _ = writeln!(
            out,
            "{} race(s) under {}/{}",
            v.races.len(),
            a.relation,
            a.tier
        );
        if a.stats {
            let _ = write!(
                out,
                "{}",
                emit_stats(&v.stats, a.relation, a.tier, StatsFormat::Table)
            );
        }
    }
    Ok(if v.races.is_empty() { 0 } else { 1 })
}

fn cmd_oracle(a: OracleArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let trace = read_trace(&a.trace)?;
    if let Some(v) = crate::trace::validate(&trace).violations.first() {
        return Err(AnalysisError::IllFormed(format!("event {}: {}", v.index, v.kind)).into());
    }
    if a.predictable {
        let found = predictable_race_search(&trace)?;
        let (doc, text, code) = match &found {
            None => (
                json!({"predictable": null}),
                "no predictable race".to_string(),
                0,
            ),
            Some(SearchOutcome::Race(w)) => {
                let (i, j) = w.pair;
                let ev = trace.events();
                let mut order: Vec<usize> = w.schedule.clone();
                order.extend([i, j]);
                (
                    json!({"predictable": {"race": [i, j], "schedule": order}}),
                    format!(
                        "predictable race: {} and {} adjacent after {}",
                        trace.render_event(&ev[i]),
                        trace.render_event(&ev[j]),
                        render_schedule(&trace, &w.schedule)
                    ),
                    1,
                )
            }
            Some(SearchOutcome::Deadlock { schedule, threads }) => {
                let names: Vec<&str> = threads.iter().map(|&t| trace.thread_name(t)).collect();
                (
                    json!({"predictable": {"deadlock": names, "schedule": schedule}}),
                    format!(
                        "no predictable race; predictable deadlock among {}",
                        names.join(", ")
                    ),
                    0,
                )
            }
        };
        let _ = writeln!(out, "{}", if a.json { pretty(&doc) } else { text });
        return Ok(code);
    }
    let m = closure_order(&trace, a.relation)?;
    let ev = trace.events();
    let races = access_races(&trace, &m);
    if a.json {
        let list: Vec<Value> = races
            .iter()
            .map(|&(i, j, kind)| {
                json!({
                    "kind": kind.name(),
                    "var": trace.var_name(ev[j].op.var().expect("access")),
                    "prior": {"index": i, "site": ev[i].site_label(), "thread": trace.thread_name(ev[i].thread)},
                    "curr": {"index": j, "site": ev[j].site_label(), "thread": trace.thread_name(ev[j].thread)},
                })
            })
            .collect();
        let doc = json!({"relation": a.relation.name(), "tier": "oracle", "races": list});
        let _ = writeln!(out, "{}", pretty(&doc));
    } else {
        for &(i, j, kind) in &races {
            let _ = writeln!(
                out,
                "{} race: {} (event {}) vs {} (event {})",
                kind.name(),
                trace.render_event(&ev[i]),
                i,
                trace.render_event(&ev[j]),
                j
            );
        }
        let _ = writeln!(out, "{} race(s) under {}", races.len(), a.relation);
    }
    Ok(if races.is_empty() { 0 } else { 1 })
}

fn render_schedule(trace: &Trace, schedule: &[usize]) -> String {
    if schedule.is_empty() {
        return "nothing".to_string();
    }
    schedule
        .iter()
        .map(|&i| trace.render_event(&trace.events()[i]))
        .collect::<Vec<_>>()
        .join("; ")
}

fn cmd_gen(a: GenArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = GenConfig {
        threads: a.threads,
        vars: a.vars,
        locks: a.locks,
        events: a.events,
        p_critical_section: a.p_cs,
        p_nested: a.p_nested,
        p_write: a.p_write,
        p_sync: a.p_sync,
        p_release: a.p_release,
        fork_join: a.fork_join,
        lock_affinity: a.lock_affinity,
        disciplined: a.disciplined,
        seed: a.seed,
    };
    let text = generate_trace(&cfg)?.serialize();
    match a.output {
        Some(path) => std::fs::write(&path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => {
            let _ = write!(out, "{text}");
        }
    }
    Ok(0)
}

fn cmd_diff(a: DiffArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let config = match &a.config {
        Some(path) => {
            let p = path.display().to_string();
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: p.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|source| CliError::Config { path: p, source })?
        }
        None => GenConfig {
            threads: 6,
            events: 60,
            vars: 4,
            locks: 3,
            ..GenConfig::default()
        },
    };
    config.check()?;
    let cfg = DiffConfig {
        seeds: parse_seeds(&a.seeds)?,
        corpus: Corpus::Generated {
            config,
            vary: !a.no_vary,
        },
        relations: a.relations,
        tiers: a.tiers,
        oracle: a.oracle,
        options: AnalysisOptions {
            st_drop_read_share_coupling: a.mutant_read_share,
            ..AnalysisOptions::default()
        },
        shrink: !a.no_shrink,
        repro_dir: a.repro_dir,
    };
    let report = differential_run(&cfg);
    let _ = writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&report).expect("json output")
    );
    Ok(if report.disagreements.is_empty() {
        0
    } else {
        1
    })
}

/// Parse `args` (program name first) and run the chosen subcommand.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 2;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    let result = match cli.cmd {
        Cmd::Analyze(a) => cmd_analyze(a, out),
        Cmd::Oracle(a) => cmd_oracle(a, out),
        Cmd::Gen(a) => cmd_gen(a, out),
        Cmd::Diff(a) => cmd_diff(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}
